//! Estimated payoff baselines: sample them, print the table's error bounds
//! and audit the resulting mechanism for approximate IC at several epsilons.

use std::sync::Arc;

use tiekit::ic_audit::{audit_apx, resolve_battery, TypeSpace};
use tiekit::mech_core::Mechanism;
use tiekit::mechanisms::{make_lottery, shipped_menus};
use tiekit::risk_transform::{estimated_payoff_table, exact_payoff_table, transform_with_table};
use tiekit::utility_models::standard_battery_specs;
use tiekit::{Method, Valuation};

fn main() -> tiekit::Result<()> {
    let menu = shipped_menus().into_iter().find(|m| m.name == "small_payoff").unwrap();
    let space = TypeSpace::single_item(&[menu.grid.clone()])?;
    let profiles: Vec<Vec<Valuation>> = menu
        .grid
        .iter()
        .map(|&x| Valuation::single(x).map(|v| vec![v]))
        .collect::<tiekit::Result<_>>()?;
    let base: Arc<dyn Mechanism> = Arc::new(make_lottery(menu.menu)?);

    let exact = exact_payoff_table(base.as_ref(), &profiles)?;
    let estimated = estimated_payoff_table(base.as_ref(), &profiles, 400, 9)?;
    for (e, x) in estimated.entries().iter().zip(exact.entries()) {
        println!(
            "type {:>5}: exact {:>7.4}, estimate {:>7.4} ± {:.4}",
            e.profile[0].to_string(),
            x.mean,
            e.mean,
            e.std_error()
        );
    }
    println!(
        "99% error bounds: additive {:.4}, multiplicative {:.4}",
        estimated.additive_error_bound(2.576),
        estimated.multiplicative_error_bound(2.576)
    );

    for epsilon in [0.05, 0.1, 0.5] {
        let t = transform_with_table(Arc::clone(&base), estimated.clone());
        let battery = resolve_battery(&standard_battery_specs(), &t, &space, Method::Exact)?;
        let r = audit_apx(&t, &space, &battery, epsilon, 1e-9)?;
        println!(
            "epsilon {epsilon}: {:?}, worst margin {:.4}, degraded {}",
            r.verdict,
            r.worst_margin.unwrap_or(0.0),
            r.degraded
        );
    }
    Ok(())
}
