//! Audits a lottery against the standard utility battery. The base mechanism
//! fails for risk-averse bidders; its transform passes.

use std::sync::Arc;

use tiekit::cli::render_report;
use tiekit::ic_audit::{audit_risk_averse, resolve_battery, TypeSpace};
use tiekit::mech_core::Mechanism;
use tiekit::mechanisms::{make_lottery, shipped_menus};
use tiekit::risk_transform::transform;
use tiekit::utility_models::standard_battery_specs;
use tiekit::Method;

fn main() -> tiekit::Result<()> {
    let menu = shipped_menus().remove(0);
    let space = TypeSpace::single_item(std::slice::from_ref(&menu.grid))?;
    let base: Arc<dyn Mechanism> = Arc::new(make_lottery(menu.menu)?);
    let transformed = transform(Arc::clone(&base), Method::Exact)?;

    for mech in [base.as_ref(), &transformed as &dyn Mechanism] {
        let battery = resolve_battery(&standard_battery_specs(), mech, &space, Method::Exact)?;
        let report = audit_risk_averse(mech, &space, &battery, Method::Exact, 1e-9)?;
        print!("{}", render_report(&report));
    }
    Ok(())
}
