//! A lottery that is truthful only in expectation, before and after the
//! risk-neutralizing transform. Prints each coin outcome.

use std::sync::Arc;

use tiekit::mech_core::{player_outcomes, Mechanism};
use tiekit::mechanisms::{make_lottery, shipped_menus};
use tiekit::risk_transform::transform;
use tiekit::{Method, Valuation};

fn show(name: &str, mech: &dyn Mechanism, truth: &Valuation) -> tiekit::Result<()> {
    println!("{name}");
    for o in player_outcomes(mech, std::slice::from_ref(truth), 0)? {
        let payoff = truth.value(&o.bundle)? - o.payment;
        println!(
            "  p={:.2}  wins={:<5}  pays {:>6.2}  payoff {:>6.2}",
            o.probability,
            !o.bundle.is_empty(),
            o.payment,
            payoff
        );
    }
    Ok(())
}

fn main() -> tiekit::Result<()> {
    let menu = shipped_menus().remove(0);
    println!("menu {}: {:?}", menu.name, menu.menu.entries());
    let base: Arc<dyn Mechanism> = Arc::new(make_lottery(menu.menu)?);
    let transformed = transform(Arc::clone(&base), Method::Exact)?;

    let truth = Valuation::single(10.0)?;
    show("base", base.as_ref(), &truth)?;
    show("transformed", &transformed, &truth)?;
    Ok(())
}
