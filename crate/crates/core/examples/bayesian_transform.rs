//! Bayesian variant: the payoff baseline averages over a prior on the other
//! bidder, so truthful payoffs are constant across opponents and coins.

use std::sync::Arc;

use tiekit::ic_audit::{audit_bic, interim_truthful_spread, resolve_battery, TypeSpace};
use tiekit::mechanisms::make_second_price;
use tiekit::risk_transform::transform_bayesian;
use tiekit::utility_models::standard_battery_specs;
use tiekit::{Method, Prior, Valuation};

fn main() -> tiekit::Result<()> {
    let v = |x: f64| Valuation::single(x);
    let prior = Prior::new(vec![
        vec![(v(2.0)?, 1.0)],
        vec![(v(0.0)?, 0.5), (v(4.0)?, 0.5)],
    ])?;
    let t = transform_bayesian(Arc::new(make_second_price(2)?), Some(&prior), Method::Exact)?;

    println!("baseline for bidder 0 at 2: {}", t.payoff_baseline(&[v(2.0)?, v(0.0)?], 0)?);
    println!(
        "truthful payoff spread for bidder 0: {}",
        interim_truthful_spread(&t, &prior, 0, &v(2.0)?)?
    );

    let grid: Vec<f64> = (0..=5).map(f64::from).collect();
    let space = TypeSpace::single_item(&[grid.clone(), grid])?;
    let battery = resolve_battery(&standard_battery_specs(), &t, &space, Method::Exact)?;
    let report = audit_bic(&t, Some(&prior), &space, &battery, Method::Exact, 1e-9)?;
    println!("{:?} over {} checks, worst margin {:?}", report.verdict, report.checks, report.worst_margin);
    Ok(())
}
