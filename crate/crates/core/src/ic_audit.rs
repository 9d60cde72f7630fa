//! Exhaustive incentive audits over finite type grids.
//!
//! Every audit enumerates all (player, true profile, deviation) tuples of a
//! [`TypeSpace`], evaluates both sides of the relevant inequality and keeps
//! the margin `truthful − required`. Exact audits compare margins against
//! `−tol`; Monte-Carlo audits attach a 99% confidence half-width and report
//! `inconclusive` when the interval straddles `−tol`.
//!
//! A finite utility battery cannot cover every concave utility. When the
//! audited mechanism makes the truthful payoff deterministic the choice of
//! battery is immaterial for the truthful side; otherwise a pass is evidence
//! for the listed utilities only.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};
use crate::mech_core::{
    player_outcomes, run_seeded, Estimate, Mechanism, Method, PlayerOutcome, Prior,
};
use crate::risk_transform::TransformedMechanism;
use crate::rng;
use crate::utility_models::{UtilityModel, UtilitySpec};
use crate::valuations::{profile_key, Valuation};

/// Two-sided 99% normal quantile.
pub const Z_99: f64 = 2.576;

/// Witnesses kept in a report.
pub const MAX_WITNESSES: usize = 25;

/// Per-player finite grids of candidate valuations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeSpace {
    per_player: Vec<Vec<Valuation>>,
}

impl TypeSpace {
    pub fn new(per_player: Vec<Vec<Valuation>>) -> Result<Self> {
        if let Some(i) = per_player.iter().position(Vec::is_empty) {
            return input_err(format!("type grid of player {i} is empty"));
        }
        Ok(Self { per_player })
    }

    /// Single-item grids from plain values.
    pub fn single_item(per_player: &[Vec<f64>]) -> Result<Self> {
        Self::new(
            per_player
                .iter()
                .map(|g| g.iter().map(|&x| Valuation::single(x)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn n_players(&self) -> usize {
        self.per_player.len()
    }

    pub fn grid(&self, player: usize) -> &[Valuation] {
        &self.per_player[player]
    }

    /// Cartesian product of the grids, first player slowest.
    pub fn profiles(&self) -> Vec<Vec<Valuation>> {
        let mut out = vec![Vec::new()];
        for grid in &self.per_player {
            out = out
                .into_iter()
                .flat_map(|p: Vec<Valuation>| {
                    grid.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push(v.clone());
                        q
                    })
                })
                .collect();
        }
        out
    }

    fn check_against(&self, mech: &dyn Mechanism) -> Result<()> {
        if self.n_players() != mech.n_players() {
            return input_err(format!(
                "type space has {} players, mechanism has {}",
                self.n_players(),
                mech.n_players()
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// One evaluated inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub check: String,
    pub player: usize,
    pub true_profile: Vec<Valuation>,
    pub deviation: Option<Valuation>,
    pub utility: Option<String>,
    pub truthful: f64,
    pub deviating: f64,
    pub margin: f64,
    pub ci_half_width: Option<f64>,
}

/// Aggregate of one claim in [`verify_transform_claims`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimSummary {
    pub claim: String,
    pub worst_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub mode: String,
    pub mechanism: String,
    pub verdict: Verdict,
    pub worst_margin: Option<f64>,
    pub tolerance: f64,
    pub method: Method,
    pub epsilon: Option<f64>,
    pub utilities: Vec<String>,
    pub seeds: Vec<u64>,
    pub checks: usize,
    pub failing: usize,
    pub inconclusive: usize,
    pub degraded: bool,
    pub worst: Option<Witness>,
    pub witnesses: Vec<Witness>,
    pub claims: Vec<ClaimSummary>,
    pub notes: Vec<String>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    Inconclusive,
}

fn status(margin: f64, half_width: Option<f64>, tol: f64) -> Status {
    match half_width {
        None => {
            if margin >= -tol {
                Status::Pass
            } else {
                Status::Fail
            }
        }
        Some(hw) => {
            if margin - hw >= -tol {
                Status::Pass
            } else if margin + hw < -tol {
                Status::Fail
            } else {
                Status::Inconclusive
            }
        }
    }
}

fn witness_order(a: &Witness, b: &Witness) -> Ordering {
    a.margin
        .total_cmp(&b.margin)
        .then(a.player.cmp(&b.player))
        .then_with(|| profile_key(&a.true_profile).cmp(&profile_key(&b.true_profile)))
        .then_with(|| {
            let fa = a.deviation.as_ref().map(Valuation::fingerprint);
            let fb = b.deviation.as_ref().map(Valuation::fingerprint);
            fa.cmp(&fb)
        })
        .then_with(|| a.utility.cmp(&b.utility))
        .then_with(|| a.check.cmp(&b.check))
}

struct Header {
    mode: &'static str,
    mechanism: String,
    tol: f64,
    method: Method,
    epsilon: Option<f64>,
    utilities: Vec<String>,
    seeds: Vec<u64>,
    degraded: bool,
    claims: Vec<ClaimSummary>,
    notes: Vec<String>,
}

fn assemble(h: Header, results: Vec<Witness>) -> AuditReport {
    let statuses: Vec<Status> = results
        .iter()
        .map(|w| status(w.margin, w.ci_half_width, h.tol))
        .collect();
    let failing = statuses.iter().filter(|s| **s == Status::Fail).count();
    let inconclusive = statuses.iter().filter(|s| **s == Status::Inconclusive).count();
    let claims_failed = h.claims.iter().any(|c| !c.passed);
    let verdict = if failing > 0 || claims_failed {
        Verdict::Fail
    } else if inconclusive > 0 {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    let worst = results.iter().min_by(|a, b| witness_order(a, b)).cloned();
    let mut witnesses: Vec<Witness> = results
        .iter()
        .zip(&statuses)
        .filter(|(_, s)| **s != Status::Pass)
        .map(|(w, _)| w.clone())
        .collect();
    witnesses.sort_by(witness_order);
    witnesses.truncate(MAX_WITNESSES);
    AuditReport {
        mode: h.mode.into(),
        mechanism: h.mechanism,
        verdict,
        worst_margin: worst.as_ref().map(|w| w.margin),
        tolerance: h.tol,
        method: h.method,
        epsilon: h.epsilon,
        utilities: h.utilities,
        seeds: h.seeds,
        checks: results.len(),
        failing,
        inconclusive,
        degraded: h.degraded,
        worst,
        witnesses,
        claims: h.claims,
        notes: h.notes,
    }
}

/// Outcome distribution of one player at one report profile: exact atoms,
/// or equally weighted Monte-Carlo draws.
#[derive(Debug, Clone)]
pub struct OutcomeDist {
    atoms: Vec<PlayerOutcome>,
    sampled: bool,
}

impl OutcomeDist {
    pub fn atoms(&self) -> &[PlayerOutcome] {
        &self.atoms
    }

    /// `E[f(bundle, payment)]` with its standard error.
    pub fn expect(&self, mut f: impl FnMut(&PlayerOutcome) -> Result<f64>) -> Result<Estimate> {
        if self.sampled {
            let xs = self.atoms.iter().map(f).collect::<Result<Vec<f64>>>()?;
            return Ok(Estimate::from_samples(&xs));
        }
        let mut total = 0.0;
        for a in &self.atoms {
            if a.probability > 0.0 {
                total += a.probability * f(a)?;
            }
        }
        Ok(Estimate::exact(total))
    }

    /// Realized payoffs under `truth`, positive-probability atoms only.
    pub fn payoffs(&self, truth: &Valuation) -> Result<Vec<f64>> {
        self.atoms
            .iter()
            .filter(|a| a.probability > 0.0)
            .map(|a| Ok(truth.value(&a.bundle)? - a.payment))
            .collect()
    }
}

/// Outcome distribution of `player` at `reports` under `method`. Monte-Carlo
/// draws use a seed derived from the method seed and the profile.
pub fn outcome_dist(
    mech: &dyn Mechanism,
    reports: &[Valuation],
    player: usize,
    method: Method,
) -> Result<OutcomeDist> {
    match method {
        Method::Exact => Ok(OutcomeDist {
            atoms: player_outcomes(mech, reports, player)?,
            sampled: false,
        }),
        Method::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return input_err("Monte-Carlo audit needs at least one sample");
            }
            let mut words = profile_key(reports);
            words.push(player as u64);
            let base = rng::hash_words(seed, &words);
            let atoms = (0..samples as u64)
                .map(|k| {
                    let r = run_seeded(mech, reports, rng::derive_seed(base, k))?;
                    Ok(PlayerOutcome {
                        bundle: r.allocation.bundle(player),
                        payment: r.payments[player],
                        probability: 1.0 / samples as f64,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(OutcomeDist {
                atoms,
                sampled: true,
            })
        }
    }
}

fn expected_utility(dist: &OutcomeDist, truth: &Valuation, u: &UtilityModel) -> Result<Estimate> {
    dist.expect(|a| u.eval(truth.value(&a.bundle)? - a.payment))
}

fn half_width(a: &Estimate, b: &Estimate, sampled: bool) -> Option<f64> {
    sampled.then(|| Z_99 * (a.std_error().powi(2) + b.std_error().powi(2)).sqrt())
}

fn with_deviation(profile: &[Valuation], player: usize, dev: &Valuation) -> Vec<Valuation> {
    let mut p = profile.to_vec();
    p[player] = dev.clone();
    p
}

fn units(space: &TypeSpace) -> Vec<(Vec<Valuation>, usize)> {
    space
        .profiles()
        .into_iter()
        .flat_map(|p| (0..space.n_players()).map(move |i| (p.clone(), i)))
        .collect()
}

/// Lowest realized payoff over every truthful and deviating outcome of the
/// grid; used to place the log utility's domain.
pub fn min_payoff_on_grid(mech: &dyn Mechanism, space: &TypeSpace, method: Method) -> Result<f64> {
    space.check_against(mech)?;
    let mins = units(space)
        .par_iter()
        .map(|(profile, i)| {
            let mut lo = f64::INFINITY;
            for dev in space.grid(*i) {
                let reports = with_deviation(profile, *i, dev);
                let dist = outcome_dist(mech, &reports, *i, method)?;
                lo = dist
                    .payoffs(&profile[*i])?
                    .into_iter()
                    .fold(lo, f64::min);
            }
            Ok(lo)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mins.into_iter().fold(f64::INFINITY, f64::min).min(0.0))
}

/// Resolves a battery (e.g. `log:auto`) against the payoffs of this audit.
pub fn resolve_battery(
    specs: &[UtilitySpec],
    mech: &dyn Mechanism,
    space: &TypeSpace,
    method: Method,
) -> Result<Vec<UtilityModel>> {
    let min = if specs.iter().any(|s| matches!(s, UtilitySpec::LogAuto)) {
        min_payoff_on_grid(mech, space, method)?
    } else {
        0.0
    };
    Ok(specs.iter().map(|s| s.resolve(min)).collect())
}

/// Truthfulness in expectation:
/// `E[v_i(A(v)) − p_i(v)] ≥ E[v_i(A(v_{−i}, v'_i)) − p_i(v_{−i}, v'_i)] − tol`.
pub fn audit_tie(mech: &dyn Mechanism, space: &TypeSpace, method: Method, tol: f64) -> Result<AuditReport> {
    audit_utilities(mech, space, &[UtilityModel::Identity], method, tol, None, "tie")
}

/// Dominant-strategy IC for risk-averse players, for each utility in the
/// battery. Utilities are applied to realized payoffs before averaging.
pub fn audit_risk_averse(
    mech: &dyn Mechanism,
    space: &TypeSpace,
    utilities: &[UtilityModel],
    method: Method,
    tol: f64,
) -> Result<AuditReport> {
    audit_utilities(mech, space, utilities, method, tol, None, "risk-averse")
}

/// `(1−ε)`-approximate risk-averse IC:
/// `E[u(truthful)] ≥ (1−ε) E[u(deviating)] − tol`. Checks that meet a
/// negative utility value switch to `E[u(truthful)] ≥ E[u(deviating)] −
/// ε|E[u(deviating)]| − tol` and the report is flagged `degraded`.
pub fn audit_apx(
    mech: &dyn Mechanism,
    space: &TypeSpace,
    utilities: &[UtilityModel],
    epsilon: f64,
    tol: f64,
) -> Result<AuditReport> {
    if !(0.0..=1.0).contains(&epsilon) {
        return input_err(format!("epsilon {epsilon} outside [0, 1]"));
    }
    audit_utilities(mech, space, utilities, Method::Exact, tol, Some(epsilon), "apx")
}

/// Every evaluated check of [`audit_risk_averse`], unfiltered, in
/// enumeration order.
pub fn risk_averse_checks(
    mech: &dyn Mechanism,
    space: &TypeSpace,
    utilities: &[UtilityModel],
    method: Method,
) -> Result<Vec<Witness>> {
    Ok(utility_checks(mech, space, utilities, method, None, "risk-averse")?.0)
}

fn audit_utilities(
    mech: &dyn Mechanism,
    space: &TypeSpace,
    utilities: &[UtilityModel],
    method: Method,
    tol: f64,
    epsilon: Option<f64>,
    mode: &'static str,
) -> Result<AuditReport> {
    let (results, degraded) = utility_checks(mech, space, utilities, method, epsilon, mode)?;
    let mut notes = Vec::new();
    if mode != "tie" {
        notes.push(
            "finite utility battery: a pass covers the listed utilities, not every concave utility"
                .into(),
        );
    }
    if degraded {
        notes.push("negative utility values met: affected checks use the additive-margin form".into());
    }
    Ok(assemble(
        Header {
            mode,
            mechanism: mech.name(),
            tol,
            method,
            epsilon,
            utilities: utilities.iter().map(ToString::to_string).collect(),
            seeds: Vec::new(),
            degraded,
            claims: Vec::new(),
            notes,
        },
        results,
    ))
}

fn utility_checks(
    mech: &dyn Mechanism,
    space: &TypeSpace,
    utilities: &[UtilityModel],
    method: Method,
    epsilon: Option<f64>,
    mode: &'static str,
) -> Result<(Vec<Witness>, bool)> {
    space.check_against(mech)?;
    if utilities.is_empty() {
        return input_err("utility battery is empty");
    }
    let sampled = matches!(method, Method::MonteCarlo { .. });
    let per_unit = units(space)
        .par_iter()
        .map(|(profile, i)| {
            let (profile, i) = (profile.as_slice(), *i);
            let truth = &profile[i];
            let truthful_dist = outcome_dist(mech, profile, i, method)?;
            let truthful_payoffs = truthful_dist.payoffs(truth)?;
            let mut out = Vec::new();
            let mut degraded = false;
            for dev in space.grid(i).iter().filter(|d| *d != truth) {
                let reports = with_deviation(profile, i, dev);
                let dist = outcome_dist(mech, &reports, i, method)?;
                let dev_payoffs = dist.payoffs(truth)?;
                for u in utilities {
                    let t = expected_utility(&truthful_dist, truth, u)?;
                    let d = expected_utility(&dist, truth, u)?;
                    let required = match epsilon {
                        None => d.mean,
                        Some(eps) => {
                            let negative = truthful_payoffs
                                .iter()
                                .chain(&dev_payoffs)
                                .any(|&x| u.eval(x).map_or(true, |v| v < 0.0));
                            if negative {
                                degraded = true;
                                d.mean - eps * d.mean.abs()
                            } else {
                                (1.0 - eps) * d.mean
                            }
                        }
                    };
                    out.push(Witness {
                        check: mode.into(),
                        player: i,
                        true_profile: profile.to_vec(),
                        deviation: Some(dev.clone()),
                        utility: Some(u.to_string()),
                        truthful: t.mean,
                        deviating: d.mean,
                        margin: t.mean - required,
                        ci_half_width: half_width(&t, &d, sampled),
                    });
                }
            }
            Ok((out, degraded))
        })
        .collect::<Result<Vec<_>>>()?;
    let degraded = per_unit.iter().any(|(_, d)| *d);
    Ok((per_unit.into_iter().flat_map(|(w, _)| w).collect(), degraded))
}

/// Interim distribution of player `i` with type `v_i` reporting `report`:
/// every prior draw of the others, every coin outcome.
fn interim_dist(
    mech: &dyn Mechanism,
    prior: &Prior,
    player: usize,
    report: &Valuation,
    method: Method,
) -> Result<OutcomeDist> {
    let mut atoms = Vec::new();
    let mut sampled = false;
    for (profile, prob) in prior.others(player, report) {
        let dist = outcome_dist(mech, &profile, player, method)?;
        sampled = dist.sampled;
        atoms.extend(dist.atoms.into_iter().map(|a| PlayerOutcome {
            probability: a.probability * prob,
            ..a
        }));
    }
    Ok(OutcomeDist { atoms, sampled })
}

fn interim_expectation(dist: &OutcomeDist, truth: &Valuation, u: &UtilityModel) -> Result<Estimate> {
    if !dist.sampled {
        return expected_utility(dist, truth, u);
    }
    // Weighted mean of equally sized sample blocks; the weights already sum to 1.
    let mut mean = 0.0;
    let mut second = 0.0;
    for a in &dist.atoms {
        let x = u.eval(truth.value(&a.bundle)? - a.payment)?;
        mean += a.probability * x;
        second += a.probability * x * x;
    }
    let n = dist.atoms.len();
    Ok(Estimate {
        mean,
        std_dev: (second - mean * mean).max(0.0).sqrt(),
        samples: n,
    })
}

/// Bayesian IC: for each player, each type in the prior's support and each
/// deviation in the grid, the interim expected utility of truth-telling
/// (over the others' types and the coins) is at least that of deviating.
/// Pass `&[UtilityModel::Identity]` for the risk-neutral check.
pub fn audit_bic(
    mech: &dyn Mechanism,
    prior: Option<&Prior>,
    space: &TypeSpace,
    utilities: &[UtilityModel],
    method: Method,
    tol: f64,
) -> Result<AuditReport> {
    let results = bic_checks(mech, prior, space, utilities, method)?;
    Ok(assemble(
        Header {
            mode: "bic",
            mechanism: mech.name(),
            tol,
            method,
            epsilon: None,
            utilities: utilities.iter().map(ToString::to_string).collect(),
            seeds: Vec::new(),
            degraded: false,
            claims: Vec::new(),
            notes: vec!["true_profile holds the deviating player's own type only".into()],
        },
        results,
    ))
}

/// Every evaluated check of [`audit_bic`], unfiltered, in enumeration order.
pub fn bic_checks(
    mech: &dyn Mechanism,
    prior: Option<&Prior>,
    space: &TypeSpace,
    utilities: &[UtilityModel],
    method: Method,
) -> Result<Vec<Witness>> {
    let Some(prior) = prior else {
        return input_err("Bayesian audit needs a prior");
    };
    space.check_against(mech)?;
    if prior.n_players() != mech.n_players() {
        return input_err("prior and mechanism disagree on the number of players");
    }
    if utilities.is_empty() {
        return input_err("utility battery is empty");
    }
    let sampled = matches!(method, Method::MonteCarlo { .. });
    let cases: Vec<(usize, Valuation)> = (0..mech.n_players())
        .flat_map(|i| prior.support(i).iter().map(move |(v, _)| (i, v.clone())))
        .collect();
    let results = cases
        .par_iter()
        .map(|(i, truth)| {
            let truthful = interim_dist(mech, prior, *i, truth, method)?;
            let mut out = Vec::new();
            for dev in space.grid(*i).iter().filter(|d| *d != truth) {
                let deviating = interim_dist(mech, prior, *i, dev, method)?;
                for u in utilities {
                    let t = interim_expectation(&truthful, truth, u)?;
                    let d = interim_expectation(&deviating, truth, u)?;
                    out.push(Witness {
                        check: "bic".into(),
                        player: *i,
                        true_profile: vec![truth.clone()],
                        deviation: Some(dev.clone()),
                        utility: Some(u.to_string()),
                        truthful: t.mean,
                        deviating: d.mean,
                        margin: t.mean - d.mean,
                        ci_half_width: half_width(&t, &d, sampled),
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(results.into_iter().flatten().collect())
}

/// Spread (max − min) of the truthful realized payoff of `player` with type
/// `truth`, over all prior draws of the others and all coin outcomes.
pub fn interim_truthful_spread(
    mech: &dyn Mechanism,
    prior: &Prior,
    player: usize,
    truth: &Valuation,
) -> Result<f64> {
    let dist = interim_dist(mech, prior, player, truth, Method::Exact)?;
    let payoffs = dist.payoffs(truth)?;
    let hi = payoffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = payoffs.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(if payoffs.is_empty() { 0.0 } else { hi - lo })
}

/// Checks the structural claims of the transform on every grid profile:
/// (a) expected payments preserved per player, (b) truthful payoff constant
/// across coin outcomes, (c) identical allocations for every seed,
/// (d) expected revenue preserved.
pub fn verify_transform_claims(
    transformed: &TransformedMechanism,
    space: &TypeSpace,
    seeds: &[u64],
    tol: f64,
) -> Result<AuditReport> {
    let base = transformed.base().as_ref();
    space.check_against(base)?;
    let n = base.n_players();
    let per_profile = space
        .profiles()
        .par_iter()
        .map(|profile| {
            let mut out = Vec::new();
            let (mut revenue_base, mut revenue_new) = (0.0, 0.0);
            for i in 0..n {
                let before = outcome_dist(base, profile, i, Method::Exact)?;
                let after = outcome_dist(transformed, profile, i, Method::Exact)?;
                let pay_before = before.expect(|a| Ok(a.payment))?.mean;
                let pay_after = after.expect(|a| Ok(a.payment))?.mean;
                revenue_base += pay_before;
                revenue_new += pay_after;
                out.push(claim_witness("expected-payment", i, profile, pay_before, pay_after));
                let payoffs = after.payoffs(&profile[i])?;
                let hi = payoffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = payoffs.iter().copied().fold(f64::INFINITY, f64::min);
                out.push(claim_witness("truthful-payoff-spread", i, profile, hi, lo));
            }
            out.push(claim_witness("expected-revenue", 0, profile, revenue_base, revenue_new));
            for &seed in seeds {
                let a = run_seeded(base, profile, seed)?;
                let b = run_seeded(transformed, profile, seed)?;
                let same = a.allocation == b.allocation;
                let mut w = claim_witness("allocation-equality", 0, profile, 0.0, 0.0);
                if !same {
                    w.margin = -1.0;
                    w.deviating = 1.0;
                }
                out.push(w);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let results: Vec<Witness> = per_profile.into_iter().flatten().collect();
    let claims = [
        ("expected-payment", tol),
        ("truthful-payoff-spread", tol),
        ("allocation-equality", 0.0),
        ("expected-revenue", tol),
    ]
    .iter()
    .map(|&(name, claim_tol)| {
        let worst = results
            .iter()
            .filter(|w| w.check == name)
            .map(|w| -w.margin)
            .fold(0.0, f64::max);
        ClaimSummary {
            claim: name.into(),
            worst_deviation: worst,
            tolerance: claim_tol,
            passed: worst <= claim_tol,
        }
    })
    .collect();
    Ok(assemble(
        Header {
            mode: "claims",
            mechanism: transformed.name(),
            tol,
            method: Method::Exact,
            epsilon: None,
            utilities: Vec::new(),
            seeds: seeds.to_vec(),
            degraded: false,
            claims,
            notes: Vec::new(),
        },
        results,
    ))
}

fn claim_witness(check: &str, player: usize, profile: &[Valuation], a: f64, b: f64) -> Witness {
    Witness {
        check: check.into(),
        player,
        true_profile: profile.to_vec(),
        deviation: None,
        utility: None,
        truthful: a,
        deviating: b,
        margin: -(a - b).abs(),
        ci_half_width: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{make_lottery, make_second_price, shipped_menus, LotteryMenu, MenuEntry};
    use crate::risk_transform::transform;
    use crate::utility_models::standard_battery;
    use std::sync::Arc;

    fn default_lottery() -> Arc<dyn Mechanism> {
        Arc::new(make_lottery(shipped_menus().remove(0).menu).unwrap())
    }

    fn lottery_space() -> TypeSpace {
        TypeSpace::single_item(&[vec![1.0, 10.0]]).unwrap()
    }

    #[test]
    fn second_price_is_tie() {
        let m = make_second_price(2).unwrap();
        let grid: Vec<f64> = (0..=5).map(f64::from).collect();
        let space = TypeSpace::single_item(&[grid.clone(), grid]).unwrap();
        let r = audit_tie(&m, &space, Method::Exact, 1e-9).unwrap();
        assert!(r.passed());
        assert!(r.worst_margin.unwrap() >= 0.0);
    }

    #[test]
    fn shipped_lottery_is_tie() {
        let r = audit_tie(default_lottery().as_ref(), &lottery_space(), Method::Exact, 1e-9).unwrap();
        assert!(r.passed());
        assert_eq!(r.checks, 2);
    }

    #[test]
    fn overpriced_lottery_fails_with_witness() {
        let menu = LotteryMenu::new(vec![
            MenuEntry {
                from: 0.0,
                probability: 0.0,
                payment: 0.0,
            },
            MenuEntry {
                from: 5.0,
                probability: 0.5,
                payment: 10.0,
            },
        ])
        .unwrap();
        let m = make_lottery(menu).unwrap();
        let r = audit_tie(&m, &lottery_space(), Method::Exact, 1e-9).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        let w = &r.witnesses[0];
        // Type 10: truthful 5 − 10 = −5, deviating to 1 gives 0.
        assert_eq!(w.true_profile[0].as_single(), Some(10.0));
        assert!((w.margin + 5.0).abs() < 1e-12);
    }

    #[test]
    fn untransformed_lottery_fails_risk_averse() {
        let cara = UtilityModel::cara(1.0).unwrap();
        let r = audit_risk_averse(
            default_lottery().as_ref(),
            &lottery_space(),
            &[cara.clone()],
            Method::Exact,
            1e-9,
        )
        .unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        let expected = 0.5 * (cara.eval(9.0).unwrap() + cara.eval(-1.0).unwrap());
        assert!((r.witnesses[0].margin - expected).abs() < 1e-12);
        assert!((expected + 0.359).abs() < 1e-3);
    }

    #[test]
    fn transformed_lottery_passes_risk_averse() {
        let t = transform(default_lottery(), Method::Exact).unwrap();
        let cara = UtilityModel::cara(1.0).unwrap();
        let r = audit_risk_averse(&t, &lottery_space(), &[cara.clone()], Method::Exact, 1e-9).unwrap();
        assert!(r.passed());
        let w = r
            .worst
            .iter()
            .chain(&r.witnesses)
            .find(|w| w.true_profile[0].as_single() == Some(10.0));
        if let Some(w) = w {
            assert!((w.truthful - cara.eval(4.0).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_battery_equals_tie() {
        let m = default_lottery();
        let a = audit_tie(m.as_ref(), &lottery_space(), Method::Exact, 1e-9).unwrap();
        let b = audit_risk_averse(
            m.as_ref(),
            &lottery_space(),
            &[UtilityModel::Identity],
            Method::Exact,
            1e-9,
        )
        .unwrap();
        assert_eq!(a.verdict, b.verdict);
        assert_eq!(a.worst_margin, b.worst_margin);
    }

    #[test]
    fn monte_carlo_audit_reports_intervals() {
        let t = transform(default_lottery(), Method::Exact).unwrap();
        let method = Method::MonteCarlo {
            samples: 2000,
            seed: 3,
        };
        let r = audit_risk_averse(&t, &lottery_space(), &standard_battery(-10.0), method, 1e-3).unwrap();
        assert_ne!(r.verdict, Verdict::Fail);
        assert!(r.worst.unwrap().ci_half_width.is_some());
    }

    #[test]
    fn apx_with_zero_epsilon_matches_risk_averse() {
        let t = transform(default_lottery(), Method::Exact).unwrap();
        let battery = standard_battery(-10.0);
        let a = audit_apx(&t, &lottery_space(), &battery, 0.0, 1e-9).unwrap();
        let b = audit_risk_averse(&t, &lottery_space(), &battery, Method::Exact, 1e-9).unwrap();
        assert_eq!(a.verdict, b.verdict);
        assert_eq!(a.worst_margin, b.worst_margin);
    }

    #[test]
    fn report_json_is_stable() {
        let t = transform(default_lottery(), Method::Exact).unwrap();
        let battery = standard_battery(-10.0);
        let a = audit_risk_averse(&t, &lottery_space(), &battery, Method::Exact, 1e-9).unwrap();
        let b = audit_risk_averse(&t, &lottery_space(), &battery, Method::Exact, 1e-9).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn empty_grid_rejected() {
        assert!(TypeSpace::new(vec![vec![]]).is_err());
        let m = make_second_price(2).unwrap();
        let space = TypeSpace::single_item(&[vec![1.0]]).unwrap();
        assert!(audit_tie(&m, &space, Method::Exact, 1e-9).is_err());
        assert!(audit_bic(&m, None, &space, &[UtilityModel::Identity], Method::Exact, 1e-9).is_err());
    }
}
