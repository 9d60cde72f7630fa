use std::sync::Arc;

use proptest::prelude::*;
use tiekit::ic_audit::{
    audit_risk_averse, audit_tie, resolve_battery, risk_averse_checks, verify_transform_claims,
    TypeSpace, Verdict,
};
use tiekit::mech_core::{expected_payoff, player_outcomes, Mechanism, Method};
use tiekit::mechanisms::{make_lottery, make_second_price, LotteryMenu, MenuEntry};
use tiekit::risk_transform::transform;
use tiekit::utility_models::{standard_battery_specs, UtilityModel};
use tiekit::valuations::Valuation;

/// Monotone step allocations with taxation-principle payments.
fn monotone_menu() -> impl Strategy<Value = LotteryMenu> {
    prop::collection::vec((0.25f64..4.0, 0.05f64..1.0), 1..4).prop_map(|steps| {
        let mut from = 0.0;
        let mut prob: f64 = 0.0;
        let steps: Vec<(f64, f64)> = steps
            .into_iter()
            .map(|(gap, dp)| {
                from += gap;
                prob = (prob + dp * (1.0 - prob)).min(1.0);
                (from, prob)
            })
            .collect();
        LotteryMenu::monotone(&steps).expect("valid menu")
    })
}

fn grid() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(0u32..40, 2..7)
        .prop_map(|s| s.into_iter().map(|k| f64::from(k) / 4.0).collect())
}

fn space(g: &[f64]) -> TypeSpace {
    TypeSpace::single_item(&[g.to_vec()]).unwrap()
}

fn battery(mech: &dyn Mechanism, s: &TypeSpace) -> Vec<UtilityModel> {
    resolve_battery(&standard_battery_specs(), mech, s, Method::Exact).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn taxation_menus_are_tie(menu in monotone_menu(), g in grid()) {
        let m = make_lottery(menu).unwrap();
        prop_assert!(audit_tie(&m, &space(&g), Method::Exact, 1e-9).unwrap().passed());
    }

    #[test]
    fn exact_transform_is_risk_averse_ic(menu in monotone_menu(), g in grid()) {
        let base: Arc<dyn Mechanism> = Arc::new(make_lottery(menu).unwrap());
        let t = transform(base, Method::Exact).unwrap();
        let s = space(&g);
        let r = audit_risk_averse(&t, &s, &battery(&t, &s), Method::Exact, 1e-9).unwrap();
        prop_assert!(r.passed(), "{:?}", r.witnesses.first());
    }

    #[test]
    fn claims_hold_on_random_menus(menu in monotone_menu(), g in grid()) {
        let base: Arc<dyn Mechanism> = Arc::new(make_lottery(menu).unwrap());
        let t = transform(base, Method::Exact).unwrap();
        let seeds: Vec<u64> = (0..16).collect();
        let r = verify_transform_claims(&t, &space(&g), &seeds, 1e-9).unwrap();
        prop_assert!(r.passed(), "{:?}", r.claims);
    }

    #[test]
    fn transform_dominates_base_for_truthful_players(menu in monotone_menu(), v in 0.0f64..10.0) {
        let base: Arc<dyn Mechanism> = Arc::new(make_lottery(menu).unwrap());
        let t = transform(Arc::clone(&base), Method::Exact).unwrap();
        let truth = vec![Valuation::single(v).unwrap()];
        let payoffs = |m: &dyn Mechanism| -> Vec<(f64, f64)> {
            player_outcomes(m, &truth, 0)
                .unwrap()
                .iter()
                .map(|o| (o.probability, truth[0].value(&o.bundle).unwrap() - o.payment))
                .collect()
        };
        let (before, after) = (payoffs(base.as_ref()), payoffs(&t));
        let lo = before.iter().chain(&after).map(|p| p.1).fold(0.0, f64::min);
        for spec in standard_battery_specs() {
            let u = spec.resolve(lo);
            let eu = |xs: &[(f64, f64)]| xs.iter().map(|(p, x)| p * u.eval(*x).unwrap()).sum::<f64>();
            prop_assert!(eu(&after) >= eu(&before) - 1e-9, "{u}");
        }
    }

    #[test]
    fn deterministic_mechanisms_are_fixed_points(bids in prop::collection::vec(0u32..20, 1..5)) {
        let n = bids.len();
        let base: Arc<dyn Mechanism> = Arc::new(make_second_price(n).unwrap());
        let t = transform(Arc::clone(&base), Method::Exact).unwrap();
        let reports: Vec<Valuation> = bids.iter().map(|&b| Valuation::single(f64::from(b)).unwrap()).collect();
        let a = tiekit::run_seeded(base.as_ref(), &reports, 0).unwrap();
        let b = tiekit::run_seeded(&t, &reports, 0).unwrap();
        prop_assert_eq!(a.allocation, b.allocation);
        for (x, y) in a.payments.iter().zip(&b.payments) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    /// Every reported margin re-evaluates to the same number through the
    /// plain expected-payoff path.
    #[test]
    fn identity_margins_are_sound(entries in prop::collection::vec((0.0f64..1.0, 0.0f64..5.0), 1..4), g in grid()) {
        // Arbitrary, possibly non-monotone menus.
        let mut from = 0.0;
        let mut menu = vec![MenuEntry { from: 0.0, probability: 0.0, payment: 0.0 }];
        for (p, pay) in entries {
            from += 2.0;
            menu.push(MenuEntry { from, probability: p, payment: pay });
        }
        let m = make_lottery(LotteryMenu::new(menu).unwrap()).unwrap();
        let s = space(&g);
        for w in risk_averse_checks(&m, &s, &[UtilityModel::Identity], Method::Exact).unwrap() {
            let dev = vec![w.deviation.clone().unwrap()];
            let truthful = expected_payoff(&m, &w.true_profile, &w.true_profile, 0, Method::Exact).unwrap();
            let deviating = expected_payoff(&m, &dev, &w.true_profile, 0, Method::Exact).unwrap();
            prop_assert!((w.margin - (truthful - deviating)).abs() <= 1e-12);
        }
        let r = audit_tie(&m, &s, Method::Exact, 1e-9).unwrap();
        let any_negative = risk_averse_checks(&m, &s, &[UtilityModel::Identity], Method::Exact)
            .unwrap()
            .iter()
            .any(|w| w.margin < -1e-9);
        prop_assert_eq!(r.verdict == Verdict::Fail, any_negative);
    }
}
