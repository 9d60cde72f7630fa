use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::Rng;

use crate::error::{input_err, Result};
use crate::mech_core::{
    check_shape, Allocation, Coin, CoinModel, Instance, Mechanism, PayoffOracle, PlayerOutcome,
};
use crate::rng;
use crate::valuations::{profile_key, Valuation};
use crate::welfare_opt::{
    coverage_profile, maximize_expected_welfare, FractionalAllocation, OptimizerParams,
};

/// Largest item count for which outcome distributions are enumerated exactly.
pub const MAX_ENUMERABLE_ITEMS: usize = 16;

/// Everything the auction needs for one report profile.
#[derive(Debug)]
struct Plan {
    x: FractionalAllocation,
    /// `marginals[i][j] = 1 − e^{−x*_ij}`: probability player `i` wins item `j`.
    marginals: Vec<Vec<f64>>,
    payments: Vec<f64>,
}

/// Combinatorial auction for coverage valuations.
///
/// The allocation solves the concave expected-welfare program for `x*`, then
/// samples one uniform per item: player `i` (in index order) wins item `j`
/// with probability `1 − e^{−x*_ij}` and nobody wins with the remaining mass,
/// which is nonnegative because `1 − e^{−x} ≤ x` and `Σ_i x*_ij ≤ 1`.
/// Items are independent, so each player's bundle has the product
/// distribution used by the welfare objective. Payments are each player's
/// expected externality, charged deterministically.
pub struct CoverageAuction {
    n_players: usize,
    n_items: usize,
    params: OptimizerParams,
    coins: CoinModel,
    solutions: Mutex<HashMap<Vec<u64>, Arc<FractionalAllocation>>>,
    plans: Mutex<HashMap<Vec<u64>, Arc<Plan>>>,
}

impl std::fmt::Debug for CoverageAuction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoverageAuction")
            .field("n_players", &self.n_players)
            .field("n_items", &self.n_items)
            .field("params", &self.params)
            .finish()
    }
}

pub fn make_coverage_auction(instance: &Instance, params: OptimizerParams) -> Result<CoverageAuction> {
    if instance.true_valuations.iter().any(|v| v.as_coverage().is_none()) {
        return input_err("coverage auction needs coverage valuations for every player");
    }
    Ok(CoverageAuction::new(instance.n_players(), instance.n_items(), params))
}

impl CoverageAuction {
    pub fn new(n_players: usize, n_items: usize, params: OptimizerParams) -> Self {
        Self {
            n_players,
            n_items,
            params,
            coins: CoinModel::Streamed,
            solutions: Mutex::new(HashMap::new()),
            plans: Mutex::new(HashMap::new()),
        }
    }

    pub fn params(&self) -> OptimizerParams {
        self.params
    }

    /// Optimal fractional allocation `x*(reports)`, memoized per profile.
    pub fn optimal_allocation(&self, reports: &[Valuation]) -> Result<Arc<FractionalAllocation>> {
        let key = profile_key(reports);
        if let Some(x) = self.solutions.lock().expect("cache poisoned").get(&key) {
            return Ok(Arc::clone(x));
        }
        let profile = coverage_profile(reports)?;
        let x = Arc::new(maximize_expected_welfare(&profile, self.n_items, self.params)?.x);
        self.solutions
            .lock()
            .expect("cache poisoned")
            .insert(key, Arc::clone(&x));
        Ok(x)
    }

    /// Per-player win probabilities `1 − e^{−x*_ij}`.
    pub fn win_probabilities(&self, reports: &[Valuation]) -> Result<Vec<Vec<f64>>> {
        self.check_reports(reports)?;
        Ok(self.plan(reports)?.marginals.clone())
    }

    /// Deterministic payments charged at `reports`.
    pub fn payments(&self, reports: &[Valuation]) -> Result<Vec<f64>> {
        self.check_reports(reports)?;
        Ok(self.plan(reports)?.payments.clone())
    }

    fn plan(&self, reports: &[Valuation]) -> Result<Arc<Plan>> {
        let key = profile_key(reports);
        if let Some(p) = self.plans.lock().expect("cache poisoned").get(&key) {
            return Ok(Arc::clone(p));
        }
        let x = self.optimal_allocation(reports)?;
        let marginals: Vec<Vec<f64>> = (0..self.n_players).map(|i| x.marginals(i)).collect();
        let payments = (0..self.n_players)
            .map(|i| self.externality(reports, &marginals, i))
            .collect::<Result<Vec<f64>>>()?;
        let plan = Arc::new(Plan {
            x: (*x).clone(),
            marginals,
            payments,
        });
        self.plans
            .lock()
            .expect("cache poisoned")
            .insert(key, Arc::clone(&plan));
        Ok(plan)
    }

    fn externality(&self, reports: &[Valuation], marginals: &[Vec<f64>], player: usize) -> Result<f64> {
        if reports.len() <= 1 {
            return Ok(0.0);
        }
        let mut without = reports.to_vec();
        without[player] = reports[player].zero_like();
        let x_without = self.optimal_allocation(&without)?;
        let mut others_without = 0.0;
        let mut others_with = 0.0;
        for (k, v) in reports.iter().enumerate().filter(|(k, _)| *k != player) {
            others_without += v.expected_value_product(&x_without.marginals(k))?;
            others_with += v.expected_value_product(&marginals[k])?;
        }
        Ok(others_without - others_with)
    }

    /// The fractional optimum behind the allocation at `reports`.
    pub fn fractional_allocation(&self, reports: &[Valuation]) -> Result<FractionalAllocation> {
        self.check_reports(reports)?;
        Ok(self.plan(reports)?.x.clone())
    }
}

/// Expected externality of `player`: others' expected welfare when the
/// player reports zero, minus others' expected welfare at `reports`.
pub fn coverage_externality_payment(
    reports: &[Valuation],
    player: usize,
    params: OptimizerParams,
) -> Result<f64> {
    let m = reports.first().map_or(0, Valuation::n_items);
    let auction = CoverageAuction::new(reports.len(), m, params);
    auction.check_reports(reports)?;
    if player >= reports.len() {
        return input_err(format!("player {player} out of range"));
    }
    Ok(auction.plan(reports)?.payments[player])
}

impl Mechanism for CoverageAuction {
    fn name(&self) -> String {
        format!("coverage-auction({}x{})", self.n_players, self.n_items)
    }

    fn n_players(&self) -> usize {
        self.n_players
    }

    fn n_items(&self) -> usize {
        self.n_items
    }

    fn coin_model(&self) -> &CoinModel {
        &self.coins
    }

    fn payoff_oracle(&self) -> PayoffOracle {
        PayoffOracle::Exact
    }

    fn check_reports(&self, reports: &[Valuation]) -> Result<()> {
        check_shape(reports, self.n_players, self.n_items)?;
        coverage_profile(reports).map(|_| ())
    }

    fn allocate(&self, reports: &[Valuation], coin: &Coin) -> Result<Allocation> {
        let Coin::Seed(seed) = *coin else {
            return input_err("coverage auction draws from a seeded stream");
        };
        let plan = self.plan(reports)?;
        let mut stream = rng::stream(seed);
        let mut allocation = Allocation::empty(self.n_items);
        for j in 0..self.n_items {
            let u: f64 = stream.random();
            let mut acc = 0.0;
            for (i, q) in plan.marginals.iter().enumerate() {
                acc += q[j];
                if u < acc {
                    allocation.assign(j, i);
                    break;
                }
            }
        }
        Ok(allocation)
    }

    fn pay(&self, reports: &[Valuation], _coin: &Coin, _allocation: &Allocation) -> Result<Vec<f64>> {
        Ok(self.plan(reports)?.payments.clone())
    }

    fn closed_form_outcomes(
        &self,
        reports: &[Valuation],
        player: usize,
    ) -> Result<Option<Vec<PlayerOutcome>>> {
        if self.n_items > MAX_ENUMERABLE_ITEMS {
            return Ok(None);
        }
        let plan = self.plan(reports)?;
        let q = &plan.marginals[player];
        let payment = plan.payments[player];
        let outcomes = (0u32..1 << self.n_items)
            .filter_map(|mask| {
                let probability: f64 = (0..self.n_items)
                    .map(|j| if mask >> j & 1 == 1 { q[j] } else { 1.0 - q[j] })
                    .product();
                (probability > 0.0).then(|| PlayerOutcome {
                    bundle: (0..self.n_items).filter(|j| mask >> j & 1 == 1).collect(),
                    payment,
                    probability,
                })
            })
            .collect();
        Ok(Some(outcomes))
    }

    fn closed_form_expected_payoff(
        &self,
        reports: &[Valuation],
        truth: &Valuation,
        player: usize,
    ) -> Result<Option<f64>> {
        let plan = self.plan(reports)?;
        let value = truth.expected_value_product(&plan.marginals[player])?;
        Ok(Some(value - plan.payments[player]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mech_core::{expected_payoff, run_seeded, Method};
    use crate::valuations::CoverageValuation;

    fn cov(n_el: usize, sets: Vec<Vec<usize>>) -> Valuation {
        Valuation::Coverage(CoverageValuation::unit(n_el, sets).unwrap())
    }

    fn auction(n: usize, m: usize) -> CoverageAuction {
        CoverageAuction::new(n, m, OptimizerParams::default())
    }

    #[test]
    fn single_player_single_item() {
        let a = auction(1, 1);
        let reports = vec![cov(1, vec![vec![0]])];
        let q = a.win_probabilities(&reports).unwrap();
        assert!((q[0][0] - (1.0 - (-1.0f64).exp())).abs() < 1e-9);
        assert_eq!(a.payments(&reports).unwrap(), vec![0.0]);
    }

    #[test]
    fn empty_player_pays_nothing_and_changes_nothing() {
        let a = auction(2, 1);
        let alone = auction(1, 1);
        let full = cov(1, vec![vec![0]]);
        let reports = vec![full.clone(), cov(0, vec![vec![]])];
        let x = a.fractional_allocation(&reports).unwrap();
        let x_alone = alone.fractional_allocation(&[full]).unwrap();
        assert!((x.get(0, 0) - x_alone.get(0, 0)).abs() < 1e-12);
        assert_eq!(x.get(1, 0), 0.0);
        assert!(a.payments(&reports).unwrap()[1].abs() < 1e-6);
    }

    #[test]
    fn symmetric_players_get_symmetric_allocations() {
        let a = auction(2, 1);
        let v = cov(1, vec![vec![0]]);
        let x = a.fractional_allocation(&[v.clone(), v]).unwrap();
        assert!((x.get(0, 0) - x.get(1, 0)).abs() < 1e-6);
    }

    #[test]
    fn competing_player_pays_nonnegative_externality() {
        let v = cov(1, vec![vec![0]]);
        let reports = vec![v.clone(), v];
        let p = coverage_externality_payment(&reports, 0, OptimizerParams::default()).unwrap();
        assert!(p >= 0.0);
        assert!(p <= 1.0);
        let solo = vec![cov(1, vec![vec![0]])];
        assert_eq!(
            coverage_externality_payment(&solo, 0, OptimizerParams::default()).unwrap(),
            0.0
        );
    }

    #[test]
    fn closed_form_payoff_matches_enumerated_outcomes() {
        let a = auction(2, 2);
        let reports = vec![
            cov(3, vec![vec![0, 1], vec![1, 2]]),
            cov(2, vec![vec![0], vec![1]]),
        ];
        for i in 0..2 {
            let closed = a.closed_form_expected_payoff(&reports, &reports[i], i).unwrap().unwrap();
            let outs = a.closed_form_outcomes(&reports, i).unwrap().unwrap();
            let enumerated: f64 = outs
                .iter()
                .map(|o| o.probability * (reports[i].value(&o.bundle).unwrap() - o.payment))
                .sum();
            assert!((closed - enumerated).abs() < 1e-12);
            let mc = expected_payoff(
                &a,
                &reports,
                &reports,
                i,
                Method::MonteCarlo {
                    samples: 20_000,
                    seed: 11,
                },
            )
            .unwrap();
            assert!((mc - closed).abs() < 0.05, "{mc} vs {closed}");
        }
    }

    #[test]
    fn replay_is_deterministic() {
        let a = auction(2, 2);
        let reports = vec![
            cov(3, vec![vec![0, 1], vec![1, 2]]),
            cov(2, vec![vec![0], vec![1]]),
        ];
        for seed in 0..20 {
            assert_eq!(
                run_seeded(&a, &reports, seed).unwrap(),
                run_seeded(&a, &reports, seed).unwrap()
            );
        }
    }

    #[test]
    fn rejects_single_item_reports() {
        let a = auction(1, 1);
        assert!(a.win_probabilities(&[Valuation::single(1.0).unwrap()]).is_err());
    }
}
