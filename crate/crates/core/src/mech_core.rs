//! The mechanism abstraction.
//!
//! A mechanism maps a report profile and a coin outcome to an allocation and
//! a payment vector. Allocation and payments are computed from the same coin,
//! so payments may depend on the realized allocation. Coins are either an
//! explicit finite list ([`CoinModel::Enumerable`]) or a seeded stream
//! ([`CoinModel::Streamed`]); in both cases a run is a pure function of its
//! inputs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input_err, Error, Result};
use crate::rng;
use crate::valuations::Valuation;

/// Absolute tolerance used for probability normalization checks.
pub const PROB_TOL: f64 = 1e-9;

/// Discrete prior, independent across players.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    per_player: Vec<Vec<(Valuation, f64)>>,
}

impl Prior {
    pub fn new(per_player: Vec<Vec<(Valuation, f64)>>) -> Result<Self> {
        for (i, support) in per_player.iter().enumerate() {
            if support.is_empty() {
                return input_err(format!("prior for player {i} is empty"));
            }
            if let Some((_, p)) = support.iter().find(|(_, p)| !(0.0..=1.0).contains(p)) {
                return input_err(format!("prior probability {p} for player {i} outside [0, 1]"));
            }
            let total: f64 = support.iter().map(|(_, p)| p).sum();
            if (total - 1.0).abs() > PROB_TOL {
                return input_err(format!(
                    "prior for player {i} sums to {total}, expected 1"
                ));
            }
        }
        Ok(Self { per_player })
    }

    /// Point-mass prior on a single profile.
    pub fn point(profile: &[Valuation]) -> Self {
        Self {
            per_player: profile.iter().map(|v| vec![(v.clone(), 1.0)]).collect(),
        }
    }

    pub fn n_players(&self) -> usize {
        self.per_player.len()
    }

    pub fn support(&self, player: usize) -> &[(Valuation, f64)] {
        &self.per_player[player]
    }

    /// Every profile of the other players' types with its probability. The
    /// returned profiles have `filler` in slot `player`.
    pub fn others(&self, player: usize, filler: &Valuation) -> Vec<(Vec<Valuation>, f64)> {
        let mut out = vec![(Vec::with_capacity(self.per_player.len()), 1.0)];
        for (k, support) in self.per_player.iter().enumerate() {
            let mut next = Vec::with_capacity(out.len() * support.len());
            for (profile, p) in &out {
                if k == player {
                    let mut prof = profile.clone();
                    prof.push(filler.clone());
                    next.push((prof, *p));
                } else {
                    for (v, q) in support {
                        let mut prof = profile.clone();
                        prof.push(v.clone());
                        next.push((prof, p * q));
                    }
                }
            }
            out = next;
        }
        out
    }
}

/// The world being simulated: players, items, their true valuations and an
/// optional prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub items: Vec<String>,
    pub player_names: Vec<String>,
    pub true_valuations: Vec<Valuation>,
    pub prior: Option<Prior>,
}

impl Instance {
    pub fn new(
        items: Vec<String>,
        player_names: Vec<String>,
        true_valuations: Vec<Valuation>,
        prior: Option<Prior>,
    ) -> Result<Self> {
        if player_names.len() != true_valuations.len() {
            return input_err("one name per player required");
        }
        let m = items.len();
        for (i, v) in true_valuations.iter().enumerate() {
            if v.n_items() != m {
                return input_err(format!(
                    "player {i} valuation covers {} items, instance has {m}",
                    v.n_items()
                ));
            }
        }
        if let Some(prior) = &prior {
            if prior.n_players() != true_valuations.len() {
                return input_err("prior must list one distribution per player");
            }
            for i in 0..prior.n_players() {
                if prior.support(i).iter().any(|(v, _)| v.n_items() != m) {
                    return input_err(format!("prior for player {i} has a wrong-sized valuation"));
                }
            }
        }
        Ok(Self {
            items,
            player_names,
            true_valuations,
            prior,
        })
    }

    pub fn n_players(&self) -> usize {
        self.true_valuations.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }
}

/// One labelled outcome of an enumerable coin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoinOutcome {
    pub label: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CoinModel {
    Enumerable(Vec<CoinOutcome>),
    Streamed,
}

impl CoinModel {
    pub fn enumerable(outcomes: Vec<CoinOutcome>) -> Result<Self> {
        if outcomes.is_empty() {
            return input_err("enumerable coin model needs at least one outcome");
        }
        if let Some(o) = outcomes.iter().find(|o| !(0.0..=1.0).contains(&o.probability)) {
            return input_err(format!("coin probability {} outside [0, 1]", o.probability));
        }
        let total: f64 = outcomes.iter().map(|o| o.probability).sum();
        if (total - 1.0).abs() > PROB_TOL {
            return input_err(format!("coin probabilities sum to {total}, expected 1"));
        }
        Ok(CoinModel::Enumerable(outcomes))
    }

    /// A single certain outcome, for deterministic mechanisms.
    pub fn deterministic() -> Self {
        CoinModel::Enumerable(vec![CoinOutcome {
            label: "certain".into(),
            probability: 1.0,
        }])
    }

    pub fn is_enumerable(&self) -> bool {
        matches!(self, CoinModel::Enumerable(_))
    }

    /// Coin selected by `seed`. Enumerable models draw an outcome index with
    /// the listed probabilities; streamed models carry the seed itself.
    pub fn draw(&self, seed: u64) -> Coin {
        match self {
            CoinModel::Streamed => Coin::Seed(seed),
            CoinModel::Enumerable(outcomes) => {
                let u: f64 = rng::stream(seed).random();
                let mut acc = 0.0;
                for (k, o) in outcomes.iter().enumerate() {
                    acc += o.probability;
                    if u < acc {
                        return Coin::Outcome(k);
                    }
                }
                // u landed in the rounding gap above the last cumulative sum
                let last = outcomes
                    .iter()
                    .rposition(|o| o.probability > 0.0)
                    .unwrap_or(outcomes.len() - 1);
                Coin::Outcome(last)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coin {
    Outcome(usize),
    Seed(u64),
}

/// Payoff oracle a mechanism advertises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoffOracle {
    Exact,
    MonteCarlo { samples: usize },
}

/// How an expectation is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

/// Item ownership; each item has at most one owner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    owners: Vec<Option<usize>>,
}

impl Allocation {
    pub fn empty(n_items: usize) -> Self {
        Self {
            owners: vec![None; n_items],
        }
    }

    pub fn from_owners(owners: Vec<Option<usize>>) -> Self {
        Self { owners }
    }

    pub fn owners(&self) -> &[Option<usize>] {
        &self.owners
    }

    pub fn assign(&mut self, item: usize, player: usize) {
        self.owners[item] = Some(player);
    }

    pub fn bundle(&self, player: usize) -> Vec<usize> {
        self.owners
            .iter()
            .enumerate()
            .filter(|(_, o)| **o == Some(player))
            .map(|(j, _)| j)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub allocation: Allocation,
    pub payments: Vec<f64>,
    pub coin: Coin,
}

/// One atom of a player's outcome distribution: own bundle, own payment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerOutcome {
    pub bundle: Vec<usize>,
    pub payment: f64,
    pub probability: f64,
}

/// A direct-revelation mechanism with explicit coins.
pub trait Mechanism: Send + Sync {
    fn name(&self) -> String;
    fn n_players(&self) -> usize;
    fn n_items(&self) -> usize;
    fn coin_model(&self) -> &CoinModel;
    fn payoff_oracle(&self) -> PayoffOracle;

    fn allocate(&self, reports: &[Valuation], coin: &Coin) -> Result<Allocation>;

    fn pay(&self, reports: &[Valuation], coin: &Coin, allocation: &Allocation) -> Result<Vec<f64>>;

    /// Exact distribution of `player`'s (bundle, payment) when the mechanism
    /// knows it without enumerating coins.
    fn closed_form_outcomes(
        &self,
        _reports: &[Valuation],
        _player: usize,
    ) -> Result<Option<Vec<PlayerOutcome>>> {
        Ok(None)
    }

    /// Exact `E[truth(bundle) − payment]` for `player` when available in closed form.
    fn closed_form_expected_payoff(
        &self,
        _reports: &[Valuation],
        _truth: &Valuation,
        _player: usize,
    ) -> Result<Option<f64>> {
        Ok(None)
    }

    /// Shape check applied before every run.
    fn check_reports(&self, reports: &[Valuation]) -> Result<()> {
        check_shape(reports, self.n_players(), self.n_items())
    }
}

pub(crate) fn check_shape(reports: &[Valuation], n: usize, m: usize) -> Result<()> {
    if reports.len() != n {
        return input_err(format!("expected {n} reports, got {}", reports.len()));
    }
    if let Some((i, v)) = reports.iter().enumerate().find(|(_, v)| v.n_items() != m) {
        return input_err(format!(
            "report of player {i} covers {} items, mechanism has {m}",
            v.n_items()
        ));
    }
    Ok(())
}

/// Runs the mechanism on one coin outcome.
pub fn run(mech: &dyn Mechanism, reports: &[Valuation], coin: &Coin) -> Result<Realization> {
    mech.check_reports(reports)?;
    match (mech.coin_model(), coin) {
        (CoinModel::Enumerable(outs), Coin::Outcome(k)) if *k >= outs.len() => {
            return input_err(format!("coin outcome {k} out of range"));
        }
        (CoinModel::Enumerable(_), Coin::Seed(_)) | (CoinModel::Streamed, Coin::Outcome(_)) => {
            return input_err("coin does not match the mechanism's coin model");
        }
        _ => {}
    }
    let allocation = mech.allocate(reports, coin)?;
    if allocation.owners().len() != mech.n_items()
        || allocation
            .owners()
            .iter()
            .flatten()
            .any(|&i| i >= mech.n_players())
    {
        return input_err("mechanism produced an infeasible allocation");
    }
    let payments = mech.pay(reports, coin, &allocation)?;
    if payments.len() != mech.n_players() {
        return input_err("payment vector length differs from player count");
    }
    Ok(Realization {
        allocation,
        payments,
        coin: *coin,
    })
}

/// Runs the mechanism on the coin selected by `seed`.
pub fn run_seeded(mech: &dyn Mechanism, reports: &[Valuation], seed: u64) -> Result<Realization> {
    let coin = mech.coin_model().draw(seed);
    run(mech, reports, &coin)
}

/// Exact outcome distribution for `player`, by coin enumeration or the
/// mechanism's closed form.
pub fn player_outcomes(
    mech: &dyn Mechanism,
    reports: &[Valuation],
    player: usize,
) -> Result<Vec<PlayerOutcome>> {
    mech.check_reports(reports)?;
    check_player(mech, player)?;
    match mech.coin_model() {
        CoinModel::Enumerable(outcomes) => outcomes
            .iter()
            .enumerate()
            .map(|(k, o)| {
                let r = run(mech, reports, &Coin::Outcome(k))?;
                Ok(PlayerOutcome {
                    bundle: r.allocation.bundle(player),
                    payment: r.payments[player],
                    probability: o.probability,
                })
            })
            .collect(),
        CoinModel::Streamed => mech.closed_form_outcomes(reports, player)?.ok_or_else(|| {
            Error::UnsupportedMethod(format!(
                "{} has streamed coins and no closed-form outcome distribution",
                mech.name()
            ))
        }),
    }
}

/// Sample mean with its standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_dev: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            std_dev: 0.0,
            samples: 0,
        }
    }

    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_dev: var.sqrt(),
            samples: xs.len(),
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.std_dev / (self.samples as f64).sqrt()
        }
    }
}

/// `E[truth_i(A(reports)_i) − p_i(reports)]`: the mechanism sees `reports`,
/// the bundle is valued under `as_if_true[player]`.
pub fn expected_payoff(
    mech: &dyn Mechanism,
    reports: &[Valuation],
    as_if_true: &[Valuation],
    player: usize,
    method: Method,
) -> Result<f64> {
    estimate_payoff(mech, reports, as_if_true, player, method).map(|e| e.mean)
}

/// [`expected_payoff`] with the sample standard deviation attached.
pub fn estimate_payoff(
    mech: &dyn Mechanism,
    reports: &[Valuation],
    as_if_true: &[Valuation],
    player: usize,
    method: Method,
) -> Result<Estimate> {
    mech.check_reports(reports)?;
    check_player(mech, player)?;
    if as_if_true.len() != reports.len() {
        return input_err("as-if-true profile length differs from reports");
    }
    let truth = &as_if_true[player];
    match method {
        Method::Exact => {
            if let Some(v) = mech.closed_form_expected_payoff(reports, truth, player)? {
                return Ok(Estimate::exact(v));
            }
            let outcomes = player_outcomes(mech, reports, player)?;
            let mut total = 0.0;
            for o in &outcomes {
                total += o.probability * (truth.value(&o.bundle)? - o.payment);
            }
            Ok(Estimate::exact(total))
        }
        Method::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return input_err("Monte-Carlo estimation needs at least one sample");
            }
            let xs = (0..samples as u64)
                .map(|k| {
                    let r = run_seeded(mech, reports, rng::derive_seed(seed, k))?;
                    Ok(truth.value(&r.allocation.bundle(player))? - r.payments[player])
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(Estimate::from_samples(&xs))
        }
    }
}

fn check_player(mech: &dyn Mechanism, player: usize) -> Result<()> {
    if player >= mech.n_players() {
        return input_err(format!(
            "player {player} out of range for {} players",
            mech.n_players()
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{make_lottery, make_second_price, LotteryMenu};

    fn singles(xs: &[f64]) -> Vec<Valuation> {
        xs.iter().map(|&x| Valuation::single(x).unwrap()).collect()
    }

    #[test]
    fn second_price_run_and_payoff() {
        let m = make_second_price(2).unwrap();
        let r = run_seeded(&m, &singles(&[5.0, 3.0]), 17).unwrap();
        assert_eq!(r.allocation.owners(), &[Some(0)]);
        assert_eq!(r.payments, vec![3.0, 0.0]);
        let v = singles(&[5.0, 3.0]);
        assert_eq!(expected_payoff(&m, &v, &v, 0, Method::Exact).unwrap(), 2.0);
    }

    #[test]
    fn misreport_is_valued_under_truth() {
        let m = make_second_price(2).unwrap();
        let reports = singles(&[6.0, 3.0]);
        let truth = singles(&[2.0, 3.0]);
        assert_eq!(expected_payoff(&m, &reports, &truth, 0, Method::Exact).unwrap(), -1.0);
    }

    #[test]
    fn shape_errors() {
        let m = make_second_price(2).unwrap();
        assert!(matches!(run_seeded(&m, &singles(&[1.0]), 0), Err(Error::Input(_))));
        assert!(run(&m, &singles(&[1.0, 2.0]), &Coin::Seed(3)).is_err());
        assert!(run(&m, &singles(&[1.0, 2.0]), &Coin::Outcome(1)).is_err());
        let v = singles(&[1.0, 2.0]);
        assert!(expected_payoff(&m, &v, &v, 2, Method::Exact).is_err());
    }

    #[test]
    fn replay_is_bit_identical() {
        let m = make_lottery(LotteryMenu::monotone(&[(1.0, 0.3), (4.0, 0.9)]).unwrap()).unwrap();
        let v = singles(&[5.0]);
        for seed in 0..50 {
            assert_eq!(run_seeded(&m, &v, seed).unwrap(), run_seeded(&m, &v, seed).unwrap());
        }
    }

    #[test]
    fn coin_draw_frequencies() {
        let model = CoinModel::enumerable(vec![
            CoinOutcome {
                label: "a".into(),
                probability: 0.25,
            },
            CoinOutcome {
                label: "b".into(),
                probability: 0.75,
            },
        ])
        .unwrap();
        let hits = (0..4000)
            .filter(|&s| model.draw(s) == Coin::Outcome(0))
            .count();
        assert!((hits as f64 / 4000.0 - 0.25).abs() < 0.03);
    }

    #[test]
    fn invalid_coin_models() {
        assert!(CoinModel::enumerable(vec![]).is_err());
        let half = |p| CoinOutcome {
            label: "x".into(),
            probability: p,
        };
        assert!(CoinModel::enumerable(vec![half(0.5), half(0.4)]).is_err());
        assert!(CoinModel::enumerable(vec![half(1.5), half(-0.5)]).is_err());
    }

    #[test]
    fn prior_validation_and_enumeration() {
        let v = singles(&[0.0, 4.0]);
        assert!(Prior::new(vec![vec![(v[0].clone(), 0.9)]]).is_err());
        assert!(Prior::new(vec![vec![]]).is_err());
        let prior = Prior::new(vec![
            vec![(v[1].clone(), 1.0)],
            vec![(v[0].clone(), 0.5), (v[1].clone(), 0.5)],
        ])
        .unwrap();
        let filler = Valuation::single(9.0).unwrap();
        let others = prior.others(0, &filler);
        assert_eq!(others.len(), 2);
        assert!(others.iter().all(|(p, _)| p[0] == filler));
        let total: f64 = others.iter().map(|(_, q)| q).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_close_to_exact() {
        let m = make_lottery(LotteryMenu::monotone(&[(1.0, 0.5)]).unwrap()).unwrap();
        let v = singles(&[3.0]);
        let exact = expected_payoff(&m, &v, &v, 0, Method::Exact).unwrap();
        let est = estimate_payoff(&m, &v, &v, 0, Method::MonteCarlo { samples: 20_000, seed: 1 }).unwrap();
        assert!((est.mean - exact).abs() < 4.0 * est.std_error());
        assert!(estimate_payoff(&m, &v, &v, 0, Method::MonteCarlo { samples: 0, seed: 1 }).is_err());
    }

    #[test]
    fn instance_shapes_checked() {
        let v = singles(&[1.0]);
        assert!(Instance::new(vec!["a".into()], vec!["p".into()], v.clone(), None).is_ok());
        assert!(Instance::new(vec!["a".into(), "b".into()], vec!["p".into()], v.clone(), None).is_err());
        assert!(Instance::new(vec!["a".into()], vec![], v, None).is_err());
    }
}
