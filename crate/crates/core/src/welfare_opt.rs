//! Expected-welfare maximization over fractional allocations.
//!
//! A fractional allocation `x` lives in `P = {x ≥ 0 : Σ_i x_ij ≤ 1 for every item j}`.
//! Player `i` receives item `j` with probability `q_ij = 1 − e^{−x_ij}`,
//! independently across items, so the expected welfare
//!
//! ```text
//! W(x) = Σ_i Σ_u w_u (1 − exp(−Σ_{j ∋ u} x_ij))
//! ```
//!
//! is concave, with gradient `∂W/∂x_ij = Σ_{u ∈ X^i_j} w_u exp(−Σ_{j' ∋ u} x_ij')`.
//! [`maximize_expected_welfare`] runs projected gradient ascent from `x = 0`
//! with step `1/L`, where `L` bounds the Hessian's spectral norm, and
//! backtracks if the ascent condition ever fails.

use serde::{Deserialize, Serialize};

use crate::error::{input_err, Error, Result};
use crate::valuations::{CoverageValuation, Valuation};

/// Slack allowed on `Σ_i x_ij ≤ 1` and `x_ij ≥ 0`.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Row-major `n × m` matrix in `P`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalAllocation {
    x: Vec<Vec<f64>>,
    n_items: usize,
}

impl FractionalAllocation {
    pub fn new(x: Vec<Vec<f64>>, n_items: usize) -> Result<Self> {
        if x.iter().any(|row| row.len() != n_items) {
            return input_err("fractional allocation rows must all have one entry per item");
        }
        if x.iter().flatten().any(|v| !v.is_finite() || *v < -FEASIBILITY_TOL) {
            return input_err("fractional allocation entries must be finite and nonnegative");
        }
        for j in 0..n_items {
            let total: f64 = x.iter().map(|row| row[j]).sum();
            if total > 1.0 + FEASIBILITY_TOL {
                return input_err(format!("item {j} is over-allocated: column sum {total}"));
            }
        }
        Ok(Self { x, n_items })
    }

    pub fn zeros(n_players: usize, n_items: usize) -> Self {
        Self {
            x: vec![vec![0.0; n_items]; n_players],
            n_items,
        }
    }

    pub fn n_players(&self) -> usize {
        self.x.len()
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn get(&self, player: usize, item: usize) -> f64 {
        self.x[player][item]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.x
    }

    /// Inclusion probabilities `1 − e^{−x_ij}` of player `i`'s items.
    pub fn marginals(&self, player: usize) -> Vec<f64> {
        self.x[player]
            .iter()
            .map(|&v| -(-v.max(0.0)).exp_m1())
            .collect()
    }
}

/// Optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerParams {
    /// Stop when the gradient-mapping norm falls to this value.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 100_000,
        }
    }
}

/// Optimizer output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareSolution {
    pub x: FractionalAllocation,
    pub objective: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Borrows the coverage valuations out of a report profile.
pub fn coverage_profile(reports: &[Valuation]) -> Result<Vec<&CoverageValuation>> {
    reports
        .iter()
        .enumerate()
        .map(|(i, v)| {
            v.as_coverage()
                .ok_or_else(|| Error::Input(format!("player {i} did not report a coverage valuation")))
        })
        .collect()
}

fn check_dims(x: &FractionalAllocation, reports: &[&CoverageValuation]) -> Result<()> {
    if x.n_players() != reports.len() {
        return input_err(format!(
            "allocation has {} rows but there are {} players",
            x.n_players(),
            reports.len()
        ));
    }
    if let Some(v) = reports.iter().find(|v| v.n_items() != x.n_items()) {
        return input_err(format!(
            "valuation covers {} items, allocation has {}",
            v.n_items(),
            x.n_items()
        ));
    }
    Ok(())
}

/// Exponent `Σ_{j ∋ u} x_ij` for each element `u` of player `i`'s universe.
fn coverage_exponents(v: &CoverageValuation, row: &[f64]) -> Vec<f64> {
    (0..v.universe().len())
        .map(|u| v.covering_items(u).iter().map(|&j| row[j]).sum())
        .collect()
}

fn welfare_unchecked(x: &FractionalAllocation, reports: &[&CoverageValuation]) -> f64 {
    reports
        .iter()
        .zip(x.rows())
        .map(|(v, row)| {
            v.universe()
                .iter()
                .zip(coverage_exponents(v, row))
                .map(|(e, s)| -e.weight * (-s).exp_m1())
                .sum::<f64>()
        })
        .sum()
}

fn gradient_unchecked(x: &FractionalAllocation, reports: &[&CoverageValuation]) -> Vec<Vec<f64>> {
    reports
        .iter()
        .zip(x.rows())
        .map(|(v, row)| {
            let mut g = vec![0.0; row.len()];
            for (u, s) in coverage_exponents(v, row).into_iter().enumerate() {
                let w = v.universe()[u].weight * (-s).exp();
                for &j in v.covering_items(u) {
                    g[j] += w;
                }
            }
            g
        })
        .collect()
}

/// Expected welfare `Σ_i E[v_i(S_i)]` of the allocation distribution induced by `x`.
pub fn expected_welfare(x: &FractionalAllocation, reports: &[&CoverageValuation]) -> Result<f64> {
    check_dims(x, reports)?;
    Ok(welfare_unchecked(x, reports))
}

/// Exact partial derivatives `∂W/∂x_ij`.
pub fn welfare_gradient(
    x: &FractionalAllocation,
    reports: &[&CoverageValuation],
) -> Result<Vec<Vec<f64>>> {
    check_dims(x, reports)?;
    Ok(gradient_unchecked(x, reports))
}

/// Euclidean projection of one item column onto `{y ≥ 0, Σ y ≤ 1}`.
pub fn project_column(col: &[f64]) -> Vec<f64> {
    let clamped: Vec<f64> = col.iter().map(|v| v.max(0.0)).collect();
    if clamped.iter().sum::<f64>() <= 1.0 {
        return clamped;
    }
    // Sum constraint active: project onto the probability simplex.
    let mut sorted = col.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut prefix = 0.0;
    let mut theta = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        prefix += v;
        let t = (prefix - 1.0) / (k as f64 + 1.0);
        if v - t > 0.0 {
            theta = t;
        }
    }
    col.iter().map(|v| (v - theta).max(0.0)).collect()
}

/// Projects an arbitrary `n × m` matrix onto `P`, column by column.
pub fn project_to_polytope(raw: &[Vec<f64>]) -> Result<FractionalAllocation> {
    let m = raw.first().map_or(0, Vec::len);
    if raw.iter().any(|row| row.len() != m) {
        return input_err("matrix rows differ in length");
    }
    if raw.iter().flatten().any(|v| !v.is_finite()) {
        return input_err("matrix entries must be finite");
    }
    let mut x = vec![vec![0.0; m]; raw.len()];
    for j in 0..m {
        let col: Vec<f64> = raw.iter().map(|row| row[j]).collect();
        for (i, v) in project_column(&col).into_iter().enumerate() {
            x[i][j] = v;
        }
    }
    Ok(FractionalAllocation { x, n_items: m })
}

/// Upper bound on the spectral norm of the welfare Hessian. The Hessian is
/// block diagonal over players with block `Σ_u w_u e^{−s_u} a_u a_uᵀ`, where
/// `a_u` marks the items covering `u`.
pub fn lipschitz_bound(reports: &[&CoverageValuation]) -> f64 {
    reports
        .iter()
        .map(|v| {
            v.universe()
                .iter()
                .enumerate()
                .map(|(u, e)| e.weight * v.covering_items(u).len() as f64)
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// Projected gradient ascent on `W` over `P`, started at `x = 0`.
pub fn maximize_expected_welfare(
    reports: &[&CoverageValuation],
    n_items: usize,
    params: OptimizerParams,
) -> Result<WelfareSolution> {
    if let Some(v) = reports.iter().find(|v| v.n_items() != n_items) {
        return input_err(format!(
            "valuation covers {} items, expected {n_items}",
            v.n_items()
        ));
    }
    let mut x = FractionalAllocation::zeros(reports.len(), n_items);
    let mut lip = lipschitz_bound(reports);
    if lip == 0.0 {
        return Ok(WelfareSolution {
            x,
            objective: 0.0,
            residual: 0.0,
            iterations: 0,
        });
    }
    let mut value = welfare_unchecked(&x, reports);
    let mut residual = f64::INFINITY;
    for iter in 0..params.max_iter {
        let grad = gradient_unchecked(&x, reports);
        let (y, y_value) = loop {
            let stepped: Vec<Vec<f64>> = x
                .rows()
                .iter()
                .zip(&grad)
                .map(|(row, g)| row.iter().zip(g).map(|(a, b)| a + b / lip).collect())
                .collect();
            let y = project_to_polytope(&stepped)?;
            let y_value = welfare_unchecked(&y, reports);
            let (mut lin, mut sq) = (0.0, 0.0);
            for ((yr, xr), gr) in y.rows().iter().zip(x.rows()).zip(&grad) {
                for ((a, b), g) in yr.iter().zip(xr).zip(gr) {
                    lin += g * (a - b);
                    sq += (a - b) * (a - b);
                }
            }
            let model = value + lin - 0.5 * lip * sq;
            if y_value >= model - 1e-12 * (1.0 + value.abs()) {
                residual = lip * sq.sqrt();
                break (y, y_value);
            }
            lip *= 2.0;
        };
        x = y;
        value = y_value;
        if residual <= params.tol {
            return Ok(WelfareSolution {
                x,
                objective: value,
                residual,
                iterations: iter + 1,
            });
        }
    }
    Err(Error::Convergence {
        residual,
        iterations: params.max_iter,
    })
}
