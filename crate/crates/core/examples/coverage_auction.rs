//! Coverage auction on two players and two items: fractional optimum, win
//! probabilities, externality payments and a few sampled allocations.

use tiekit::mechanisms::CoverageAuction;
use tiekit::valuations::CoverageValuation;
use tiekit::welfare_opt::OptimizerParams;
use tiekit::{run_seeded, Valuation};

fn main() -> tiekit::Result<()> {
    let ids = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let alpha = CoverageValuation::new(
        vec![("a1".into(), 1.0), ("a2".into(), 2.0), ("a3".into(), 1.0)],
        vec![ids(&["a1", "a2"]), ids(&["a2", "a3"])],
    )?;
    let beta = CoverageValuation::new(
        vec![("b1".into(), 2.0), ("b2".into(), 1.0), ("b3".into(), 1.0)],
        vec![ids(&["b1"]), ids(&["b2", "b3"])],
    )?;
    let reports = vec![Valuation::Coverage(alpha), Valuation::Coverage(beta)];

    let auction = CoverageAuction::new(2, 2, OptimizerParams::default());
    let x = auction.optimal_allocation(&reports)?;
    println!("x*       {:?}", x.rows());
    println!("win prob {:?}", auction.win_probabilities(&reports)?);
    println!("payments {:?}", auction.payments(&reports)?);
    for seed in 0..5 {
        let r = run_seeded(&auction, &reports, seed)?;
        println!("seed {seed}: owners {:?}", r.allocation.owners());
    }
    Ok(())
}
