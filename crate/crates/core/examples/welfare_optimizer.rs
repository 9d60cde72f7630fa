//! The fractional welfare problem on its own: projection onto the allocation
//! polytope and projected gradient ascent.

use tiekit::valuations::CoverageValuation;
use tiekit::welfare_opt::{
    expected_welfare, maximize_expected_welfare, project_column, welfare_gradient,
    FractionalAllocation, OptimizerParams,
};

fn main() -> tiekit::Result<()> {
    println!("project (0.9, 0.9) -> {:?}", project_column(&[0.9, 0.9]));
    println!("project (0.2, -1.0) -> {:?}", project_column(&[0.2, -1.0]));

    let shared = CoverageValuation::unit(2, vec![vec![0], vec![0, 1], vec![1]])?;
    let solo = CoverageValuation::unit(1, vec![vec![0], vec![], vec![]])?;
    let profile = [&shared, &solo];

    let x0 = FractionalAllocation::zeros(2, 3);
    println!("gradient at 0: {:?}", welfare_gradient(&x0, &profile)?);
    let sol = maximize_expected_welfare(&profile, 3, OptimizerParams::default())?;
    println!(
        "optimum {:.6} after {} iterations, residual {:.1e}",
        sol.objective, sol.iterations, sol.residual
    );
    for row in sol.x.rows() {
        println!("  {row:.4?}");
    }
    assert!((expected_welfare(&sol.x, &profile)? - sol.objective).abs() < 1e-12);
    Ok(())
}
