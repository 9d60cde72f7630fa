use crate::error::{input_err, Result};
use crate::mech_core::{check_shape, Allocation, Coin, CoinModel, Mechanism, PayoffOracle};
use crate::valuations::Valuation;

/// Single-item second-price auction. Highest report wins and pays the
/// second-highest report; ties go to the lowest player index.
#[derive(Debug, Clone)]
pub struct SecondPrice {
    n_players: usize,
    coins: CoinModel,
}

pub fn make_second_price(n_players: usize) -> Result<SecondPrice> {
    if n_players == 0 {
        return input_err("second-price auction needs at least one player");
    }
    Ok(SecondPrice {
        n_players,
        coins: CoinModel::deterministic(),
    })
}

fn bids(reports: &[Valuation]) -> Vec<f64> {
    reports.iter().map(|v| v.as_single().unwrap_or(0.0)).collect()
}

fn winner(bids: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &b) in bids.iter().enumerate() {
        if best.is_none_or(|w| b > bids[w]) {
            best = Some(i);
        }
    }
    best
}

impl Mechanism for SecondPrice {
    fn name(&self) -> String {
        format!("second-price({})", self.n_players)
    }

    fn n_players(&self) -> usize {
        self.n_players
    }

    fn n_items(&self) -> usize {
        1
    }

    fn coin_model(&self) -> &CoinModel {
        &self.coins
    }

    fn payoff_oracle(&self) -> PayoffOracle {
        PayoffOracle::Exact
    }

    fn check_reports(&self, reports: &[Valuation]) -> Result<()> {
        check_shape(reports, self.n_players, 1)?;
        if reports.iter().any(|v| v.as_single().is_none()) {
            return input_err("second-price auction takes single-item reports");
        }
        Ok(())
    }

    fn allocate(&self, reports: &[Valuation], _coin: &Coin) -> Result<Allocation> {
        let mut a = Allocation::empty(1);
        if let Some(w) = winner(&bids(reports)) {
            a.assign(0, w);
        }
        Ok(a)
    }

    fn pay(&self, reports: &[Valuation], _coin: &Coin, allocation: &Allocation) -> Result<Vec<f64>> {
        let bids = bids(reports);
        let mut pay = vec![0.0; self.n_players];
        if let Some(w) = allocation.owners()[0] {
            pay[w] = bids
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != w)
                .map(|(_, b)| *b)
                .fold(0.0, f64::max);
        }
        Ok(pay)
    }
}
