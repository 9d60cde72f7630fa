//! The risk-neutralizing payment transform.
//!
//! Given a mechanism `(A, p)`, the transformed mechanism keeps `A` and the
//! coin model and charges
//!
//! ```text
//! p'_i(v) = v_i(A(v)) − Π_i(v),    Π_i(v) = E[v_i(A(v)) − p_i(v)]
//! ```
//!
//! where `v_i` is player `i`'s *report*. A truthful player's payoff is then
//! `Π_i(v)` on every coin outcome, and `E[p'_i] = E[p_i]`. `Π` can be exact,
//! a Monte-Carlo estimate drawn with a seed fixed at transform time, a
//! precomputed (possibly perturbed) table, or an interim expectation over a
//! prior on the other players' types.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{input_err, Error, Result};
use crate::mech_core::{
    estimate_payoff, expected_payoff, player_outcomes, Allocation, Coin, CoinModel, Estimate,
    Mechanism, Method, PayoffOracle, PlayerOutcome, Prior,
};
use crate::rng;
use crate::valuations::{profile_key, Valuation};

/// One `Π̂_i(profile)` estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffEntry {
    pub profile: Vec<Valuation>,
    pub player: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub samples: usize,
}

impl PayoffEntry {
    pub fn std_error(&self) -> f64 {
        Estimate {
            mean: self.mean,
            std_dev: self.std_dev,
            samples: self.samples,
        }
        .std_error()
    }
}

/// Expected-payoff table keyed by (report profile, player).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<PayoffEntry>", into = "Vec<PayoffEntry>")]
pub struct PayoffTable {
    entries: Vec<PayoffEntry>,
    index: HashMap<(Vec<u64>, usize), usize>,
}

impl From<Vec<PayoffEntry>> for PayoffTable {
    fn from(entries: Vec<PayoffEntry>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(k, e)| ((profile_key(&e.profile), e.player), k))
            .collect();
        Self { entries, index }
    }
}

impl From<PayoffTable> for Vec<PayoffEntry> {
    fn from(t: PayoffTable) -> Self {
        t.entries
    }
}

impl PayoffTable {
    pub fn entries(&self) -> &[PayoffEntry] {
        &self.entries
    }

    pub fn get(&self, profile: &[Valuation], player: usize) -> Option<&PayoffEntry> {
        self.index
            .get(&(profile_key(profile), player))
            .map(|&k| &self.entries[k])
    }

    /// Table with every mean replaced by `f(entry)`.
    pub fn map_means(&self, mut f: impl FnMut(&PayoffEntry) -> f64) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|e| PayoffEntry {
                mean: f(e),
                ..e.clone()
            })
            .collect::<Vec<_>>();
        entries.into()
    }

    /// Largest `z · stderr` over entries: an additive error bound at the
    /// confidence level of `z`.
    pub fn additive_error_bound(&self, z: f64) -> f64 {
        self.entries
            .iter()
            .map(|e| z * e.std_error())
            .fold(0.0, f64::max)
    }

    /// Largest `z · stderr / |mean|`; infinite when some mean is zero but
    /// uncertain.
    pub fn multiplicative_error_bound(&self, z: f64) -> f64 {
        self.entries
            .iter()
            .map(|e| {
                let add = z * e.std_error();
                if add == 0.0 {
                    0.0
                } else {
                    add / e.mean.abs()
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Exact `Π` table over a list of report profiles.
pub fn exact_payoff_table(base: &dyn Mechanism, profiles: &[Vec<Valuation>]) -> Result<PayoffTable> {
    let n = base.n_players();
    let entries = profiles
        .par_iter()
        .flat_map_iter(|profile| (0..n).map(move |i| (profile, i)))
        .map(|(profile, i)| {
            let mean = expected_payoff(base, profile, profile, i, Method::Exact)?;
            Ok(PayoffEntry {
                profile: profile.clone(),
                player: i,
                mean,
                std_dev: 0.0,
                samples: 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(entries.into())
}

/// Monte-Carlo `Π̂` table. Entry `e` (profile-major, then player) is sampled
/// with seed `derive_seed(seed, e)`, so results do not depend on scheduling.
pub fn estimated_payoff_table(
    base: &dyn Mechanism,
    profiles: &[Vec<Valuation>],
    samples: usize,
    seed: u64,
) -> Result<PayoffTable> {
    if samples == 0 {
        return input_err("Monte-Carlo estimation needs at least one sample");
    }
    let n = base.n_players();
    let entries = (0..profiles.len() * n)
        .into_par_iter()
        .map(|e| {
            let (profile, i) = (&profiles[e / n], e % n);
            let method = Method::MonteCarlo {
                samples,
                seed: rng::derive_seed(seed, e as u64),
            };
            let est = estimate_payoff(base, profile, profile, i, method)?;
            Ok(PayoffEntry {
                profile: profile.clone(),
                player: i,
                mean: est.mean,
                std_dev: est.std_dev,
                samples: est.samples,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(entries.into())
}

/// Where `Π` comes from.
#[derive(Debug, Clone)]
pub enum PayoffSource {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
    Table(PayoffTable),
    /// Interim payoff over the prior on the other players' types.
    Bayesian { prior: Prior, method: Method },
}

impl PayoffSource {
    pub fn label(&self) -> String {
        match self {
            PayoffSource::Exact => "exact".into(),
            PayoffSource::MonteCarlo { samples, seed } => format!("monte-carlo(n={samples}, seed={seed})"),
            PayoffSource::Table(t) => format!("table({} entries)", t.entries().len()),
            PayoffSource::Bayesian { method, .. } => match method {
                Method::Exact => "bayesian-exact".into(),
                Method::MonteCarlo { samples, seed } => {
                    format!("bayesian-monte-carlo(n={samples}, seed={seed})")
                }
            },
        }
    }
}

/// `(A, p')`: the base allocation with risk-neutralizing payments.
pub struct TransformedMechanism {
    base: Arc<dyn Mechanism>,
    source: PayoffSource,
    baselines: Mutex<HashMap<(Vec<u64>, usize), f64>>,
}

impl std::fmt::Debug for TransformedMechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransformedMechanism")
            .field("base", &self.base.name())
            .field("source", &self.source.label())
            .finish()
    }
}

fn supports_exact(base: &dyn Mechanism) -> bool {
    base.coin_model().is_enumerable() || base.payoff_oracle() == PayoffOracle::Exact
}

/// Transforms `base` with `Π` computed by `method`.
pub fn transform(base: Arc<dyn Mechanism>, method: Method) -> Result<TransformedMechanism> {
    let source = match method {
        Method::Exact => {
            if !supports_exact(base.as_ref()) {
                return Err(Error::UnsupportedMethod(format!(
                    "{} has no exact payoff oracle",
                    base.name()
                )));
            }
            PayoffSource::Exact
        }
        Method::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return input_err("Monte-Carlo estimation needs at least one sample");
            }
            PayoffSource::MonteCarlo { samples, seed }
        }
    };
    Ok(TransformedMechanism::with_source(base, source))
}

/// Bayesian variant: `Π_i` depends only on player `i`'s report and averages
/// over the prior on everyone else.
pub fn transform_bayesian(
    base: Arc<dyn Mechanism>,
    prior: Option<&Prior>,
    method: Method,
) -> Result<TransformedMechanism> {
    let Some(prior) = prior else {
        return input_err("Bayesian transform needs a prior");
    };
    if prior.n_players() != base.n_players() {
        return input_err("prior and mechanism disagree on the number of players");
    }
    if method == Method::Exact && !supports_exact(base.as_ref()) {
        return Err(Error::UnsupportedMethod(format!(
            "{} has no exact payoff oracle",
            base.name()
        )));
    }
    Ok(TransformedMechanism::with_source(
        base,
        PayoffSource::Bayesian {
            prior: prior.clone(),
            method,
        },
    ))
}

/// Transform driven by a precomputed `Π̂` table.
pub fn transform_with_table(base: Arc<dyn Mechanism>, table: PayoffTable) -> TransformedMechanism {
    TransformedMechanism::with_source(base, PayoffSource::Table(table))
}

impl TransformedMechanism {
    pub fn with_source(base: Arc<dyn Mechanism>, source: PayoffSource) -> Self {
        Self {
            base,
            source,
            baselines: Mutex::new(HashMap::new()),
        }
    }

    pub fn base(&self) -> &Arc<dyn Mechanism> {
        &self.base
    }

    pub fn source(&self) -> &PayoffSource {
        &self.source
    }

    /// `Π_i(reports)`: the payoff a truthful player `i` receives on every coin.
    pub fn payoff_baseline(&self, reports: &[Valuation], player: usize) -> Result<f64> {
        let key = (profile_key(reports), player);
        if let Some(&v) = self.baselines.lock().expect("cache poisoned").get(&key) {
            return Ok(v);
        }
        let base = self.base.as_ref();
        let value = match &self.source {
            PayoffSource::Exact => expected_payoff(base, reports, reports, player, Method::Exact)?,
            PayoffSource::MonteCarlo { samples, seed } => {
                let seed = rng::hash_words(*seed, &key_words(&key));
                let method = Method::MonteCarlo {
                    samples: *samples,
                    seed,
                };
                expected_payoff(base, reports, reports, player, method)?
            }
            PayoffSource::Table(t) => t
                .get(reports, player)
                .ok_or_else(|| {
                    Error::Input(format!("payoff table has no entry for player {player} at this profile"))
                })?
                .mean,
            PayoffSource::Bayesian { prior, method } => {
                let mut total = 0.0;
                for (profile, prob) in prior.others(player, &reports[player]) {
                    let method = match *method {
                        Method::Exact => Method::Exact,
                        Method::MonteCarlo { samples, seed } => Method::MonteCarlo {
                            samples,
                            seed: rng::hash_words(seed, &key_words(&(profile_key(&profile), player))),
                        },
                    };
                    total += prob * expected_payoff(base, &profile, &profile, player, method)?;
                }
                total
            }
        };
        self.baselines
            .lock()
            .expect("cache poisoned")
            .insert(key, value);
        Ok(value)
    }

    fn transformed_payment(&self, reports: &[Valuation], player: usize, bundle: &[usize]) -> Result<f64> {
        Ok(reports[player].value(bundle)? - self.payoff_baseline(reports, player)?)
    }
}

fn key_words(key: &(Vec<u64>, usize)) -> Vec<u64> {
    let mut words = key.0.clone();
    words.push(key.1 as u64);
    words
}

impl Mechanism for TransformedMechanism {
    fn name(&self) -> String {
        format!("transformed[{}]({})", self.source.label(), self.base.name())
    }

    fn n_players(&self) -> usize {
        self.base.n_players()
    }

    fn n_items(&self) -> usize {
        self.base.n_items()
    }

    fn coin_model(&self) -> &CoinModel {
        self.base.coin_model()
    }

    fn payoff_oracle(&self) -> PayoffOracle {
        self.base.payoff_oracle()
    }

    fn check_reports(&self, reports: &[Valuation]) -> Result<()> {
        self.base.check_reports(reports)
    }

    fn allocate(&self, reports: &[Valuation], coin: &Coin) -> Result<Allocation> {
        self.base.allocate(reports, coin)
    }

    fn pay(&self, reports: &[Valuation], _coin: &Coin, allocation: &Allocation) -> Result<Vec<f64>> {
        (0..self.n_players())
            .map(|i| self.transformed_payment(reports, i, &allocation.bundle(i)))
            .collect()
    }

    fn closed_form_outcomes(
        &self,
        reports: &[Valuation],
        player: usize,
    ) -> Result<Option<Vec<PlayerOutcome>>> {
        if self.base.coin_model().is_enumerable() {
            return Ok(None);
        }
        let outcomes = match self.base.closed_form_outcomes(reports, player)? {
            Some(o) => o,
            None => return Ok(None),
        };
        let baseline = self.payoff_baseline(reports, player)?;
        outcomes
            .into_iter()
            .map(|o| {
                let payment = reports[player].value(&o.bundle)? - baseline;
                Ok(PlayerOutcome { payment, ..o })
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// `E[truth(b)] − E[p'] = base payoff under truth − base payoff under the
    /// report + Π`.
    fn closed_form_expected_payoff(
        &self,
        reports: &[Valuation],
        truth: &Valuation,
        player: usize,
    ) -> Result<Option<f64>> {
        let base = self.base.as_ref();
        let under_truth = base.closed_form_expected_payoff(reports, truth, player)?;
        let under_report = base.closed_form_expected_payoff(reports, &reports[player], player)?;
        match (under_truth, under_report) {
            (Some(t), Some(r)) => Ok(Some(t - r + self.payoff_baseline(reports, player)?)),
            _ => Ok(None),
        }
    }
}

/// Exact outcome distribution of the base and transformed mechanism side by
/// side; a convenience for claim checks.
pub fn paired_outcomes(
    transformed: &TransformedMechanism,
    reports: &[Valuation],
    player: usize,
) -> Result<(Vec<PlayerOutcome>, Vec<PlayerOutcome>)> {
    Ok((
        player_outcomes(transformed.base().as_ref(), reports, player)?,
        player_outcomes(transformed, reports, player)?,
    ))
}
