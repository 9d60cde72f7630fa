//! Checks the structural guarantees of the transform on a three-step lottery.

use std::sync::Arc;

use tiekit::ic_audit::{verify_transform_claims, TypeSpace};
use tiekit::mechanisms::{make_lottery, shipped_menus};
use tiekit::risk_transform::transform;
use tiekit::Method;

fn main() -> tiekit::Result<()> {
    let menu = shipped_menus().into_iter().find(|m| m.name == "three_step").unwrap();
    let space = TypeSpace::single_item(std::slice::from_ref(&menu.grid))?;
    let t = transform(Arc::new(make_lottery(menu.menu)?), Method::Exact)?;
    let seeds: Vec<u64> = (0..64).collect();
    let report = verify_transform_claims(&t, &space, &seeds, 1e-12)?;
    for c in &report.claims {
        println!("{:<24} worst {:.2e}  {}", c.claim, c.worst_deviation, if c.passed { "ok" } else { "FAILED" });
    }
    Ok(())
}
