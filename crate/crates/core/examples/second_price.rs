//! Deterministic second-price auction: run it, then compare a truthful and a
//! misreported expected payoff.

use tiekit::mechanisms::make_second_price;
use tiekit::{expected_payoff, run_seeded, Method, Valuation};

fn main() -> tiekit::Result<()> {
    let auction = make_second_price(3)?;
    let truth = vec![Valuation::single(7.0)?, Valuation::single(4.0)?, Valuation::single(5.0)?];

    let r = run_seeded(&auction, &truth, 0)?;
    println!("winner {:?}, payments {:?}", r.allocation.owners()[0], r.payments);

    // Player 0 shades to 4.5 and loses to player 2.
    let mut shaded = truth.clone();
    shaded[0] = Valuation::single(4.5)?;
    let honest = expected_payoff(&auction, &truth, &truth, 0, Method::Exact)?;
    let dishonest = expected_payoff(&auction, &shaded, &truth, 0, Method::Exact)?;
    println!("payoff truthful {honest}, shaded {dishonest}");
    Ok(())
}
