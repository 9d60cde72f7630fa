//! Built-in mechanisms: a deterministic second-price auction, single-player
//! lotteries with enumerable coins, and the coverage-valuation auction.

mod coverage;
mod lottery;
mod second_price;

pub use coverage::{coverage_externality_payment, make_coverage_auction, CoverageAuction, MAX_ENUMERABLE_ITEMS};
pub use lottery::{make_lottery, shipped_menus, Lottery, LotteryMenu, MenuEntry, ShippedMenu};
pub use second_price::{make_second_price, SecondPrice};
