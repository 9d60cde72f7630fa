//! Shared oracles for the integration tests. Nothing here calls the code
//! under test for the quantity being checked.
#![allow(dead_code)]

use std::collections::HashSet;
use std::path::PathBuf;

use rand::Rng;
use tiekit::valuations::CoverageValuation;
use tiekit::welfare_opt::FractionalAllocation;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Weight of the union of the sets of `bundle`, by explicit set union.
pub fn union_value(v: &CoverageValuation, bundle: &[usize]) -> f64 {
    let covered: HashSet<usize> = bundle
        .iter()
        .flat_map(|&j| v.item_sets()[j].iter().copied())
        .collect();
    covered.iter().map(|&u| v.universe()[u].weight).sum()
}

/// `Σ_S Pr[S] v(S)` with items included independently with probability `q_j`.
pub fn brute_force_expected_value(v: &CoverageValuation, q: &[f64]) -> f64 {
    let m = q.len();
    (0u32..1 << m)
        .map(|mask| {
            let bundle: Vec<usize> = (0..m).filter(|j| mask >> j & 1 == 1).collect();
            let p: f64 = (0..m)
                .map(|j| if mask >> j & 1 == 1 { q[j] } else { 1.0 - q[j] })
                .product();
            p * union_value(v, &bundle)
        })
        .sum()
}

/// `Σ_i Σ_u w_u (1 − exp(−Σ_{j: u ∈ X_ij} x_ij))`, straight from the definition.
pub fn welfare_oracle(x: &[Vec<f64>], profile: &[&CoverageValuation]) -> f64 {
    let mut total = 0.0;
    for (v, row) in profile.iter().zip(x) {
        for (u, el) in v.universe().iter().enumerate() {
            let s: f64 = v
                .item_sets()
                .iter()
                .enumerate()
                .filter(|(_, set)| set.contains(&u))
                .map(|(j, _)| row[j])
                .sum();
            total += el.weight * (1.0 - (-s).exp());
        }
    }
    total
}

/// Random point of `{x ≥ 0, Σ_i x_ij ≤ 1}`: per column, a Dirichlet draw over
/// the players plus a slack coordinate.
pub fn random_feasible(rng: &mut impl Rng, n: usize, m: usize) -> Vec<Vec<f64>> {
    let mut x = vec![vec![0.0; m]; n];
    for j in 0..m {
        let draws: Vec<f64> = (0..=n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let total: f64 = draws.iter().sum();
        for i in 0..n {
            x[i][j] = draws[i] / total;
        }
    }
    x
}

pub fn allocation(x: Vec<Vec<f64>>) -> FractionalAllocation {
    let m = x.first().map_or(0, Vec::len);
    FractionalAllocation::new(x, m).expect("feasible")
}

/// Random coverage valuation with `m` items over a universe of `k` elements.
pub fn random_coverage(rng: &mut impl Rng, m: usize, k: usize) -> CoverageValuation {
    let universe = (0..k)
        .map(|u| (format!("e{u}"), (rng.random_range(1..=8) as f64) / 2.0))
        .collect();
    let sets = (0..m)
        .map(|_| {
            (0..k)
                .filter(|_| rng.random_bool(0.5))
                .map(|u| format!("e{u}"))
                .collect()
        })
        .collect();
    CoverageValuation::new(universe, sets).expect("valid coverage")
}
