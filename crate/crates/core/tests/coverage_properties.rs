mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{brute_force_expected_value, random_coverage};
use tiekit::ic_audit::{audit_risk_averse, audit_tie, resolve_battery, verify_transform_claims, TypeSpace};
use tiekit::mech_core::{estimate_payoff, expected_payoff, Method};
use tiekit::mechanisms::CoverageAuction;
use tiekit::risk_transform::transform;
use tiekit::utility_models::standard_battery_specs;
use tiekit::valuations::Valuation;
use tiekit::welfare_opt::OptimizerParams;

/// Two players, `m` items, each with a grid of {0, ½, 1} times a random valuation.
fn instance(seed: u64, m: usize) -> (CoverageAuction, TypeSpace) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grids = (0..2)
        .map(|_| {
            let v = random_coverage(&mut rng, m, 3);
            [0.0, 0.5, 1.0]
                .iter()
                .map(|&s| Valuation::Coverage(v.scaled(s).unwrap()))
                .collect()
        })
        .collect();
    (
        CoverageAuction::new(2, m, OptimizerParams::default()),
        TypeSpace::new(grids).unwrap(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn auction_is_tie_up_to_optimizer_error(seed in any::<u64>(), m in 1usize..3) {
        let (mech, space) = instance(seed, m);
        let r = audit_tie(&mech, &space, Method::Exact, 1e-3).unwrap();
        prop_assert!(r.passed(), "{:?}", r.witnesses.first());
    }

    #[test]
    fn transformed_auction_passes_battery(seed in any::<u64>(), m in 1usize..3) {
        let (mech, space) = instance(seed, m);
        let t = transform(Arc::new(mech), Method::Exact).unwrap();
        let battery = resolve_battery(&standard_battery_specs(), &t, &space, Method::Exact).unwrap();
        let r = audit_risk_averse(&t, &space, &battery, Method::Exact, 1e-3).unwrap();
        prop_assert!(r.passed(), "{:?}", r.witnesses.first());
        let c = verify_transform_claims(&t, &space, &[0, 1, 2, 3], 1e-9).unwrap();
        prop_assert!(c.passed(), "{:?}", c.claims);
    }

    #[test]
    fn expected_value_product_matches_enumeration(seed in any::<u64>(), m in 1usize..5,
                                                  q in prop::collection::vec(0.0f64..1.0, 4)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_coverage(&mut rng, m, 5);
        let q = &q[..m];
        prop_assert!((v.expected_value_product(q).unwrap() - brute_force_expected_value(&v, q)).abs() <= 1e-9);
    }
}

#[test]
fn monte_carlo_payoff_matches_closed_form() {
    let (mech, space) = instance(99, 2);
    let profile: Vec<Valuation> = (0..2).map(|i| space.grid(i)[2].clone()).collect();
    for player in 0..2 {
        let exact = expected_payoff(&mech, &profile, &profile, player, Method::Exact).unwrap();
        let est = estimate_payoff(
            &mech,
            &profile,
            &profile,
            player,
            Method::MonteCarlo {
                samples: 20_000,
                seed: 5,
            },
        )
        .unwrap();
        assert!((est.mean - exact).abs() <= 5.0 * est.std_error() + 1e-12);
    }
    assert!(mech.payments(&profile).unwrap().iter().all(|&p| p >= -1e-9));
}
