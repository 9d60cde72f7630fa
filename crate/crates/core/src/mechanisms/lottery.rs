use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};
use crate::mech_core::{check_shape, Allocation, Coin, CoinModel, CoinOutcome, Mechanism, PayoffOracle};
use crate::valuations::Valuation;

/// Menu row: reports in `[from, next.from)` get the item with `probability`
/// and are charged `payment` whether or not they get it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MenuEntry {
    pub from: f64,
    pub probability: f64,
    pub payment: f64,
}

/// Threshold menu partitioning `[0, ∞)` into report regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<MenuEntry>", into = "Vec<MenuEntry>")]
pub struct LotteryMenu {
    entries: Vec<MenuEntry>,
}

impl LotteryMenu {
    /// Entries must start at 0 and have strictly increasing thresholds.
    pub fn new(entries: Vec<MenuEntry>) -> Result<Self> {
        match entries.first() {
            None => return input_err("lottery menu is empty"),
            Some(e) if e.from != 0.0 => {
                return input_err("first menu region must start at report 0")
            }
            _ => {}
        }
        for e in &entries {
            if !(0.0..=1.0).contains(&e.probability) {
                return input_err(format!("menu probability {} outside [0, 1]", e.probability));
            }
            if !e.payment.is_finite() || !e.from.is_finite() {
                return input_err("menu thresholds and payments must be finite");
            }
        }
        if entries.windows(2).any(|w| w[1].from <= w[0].from) {
            return input_err("menu thresholds must be strictly increasing");
        }
        Ok(Self { entries })
    }

    /// Monotone step allocation with payments from the taxation principle:
    /// each step at threshold `θ_k` raising the probability from `q_{k−1}`
    /// to `q_k` adds `(q_k − q_{k−1}) θ_k` to the payment.
    pub fn monotone(steps: &[(f64, f64)]) -> Result<Self> {
        let mut entries = vec![MenuEntry {
            from: 0.0,
            probability: 0.0,
            payment: 0.0,
        }];
        for &(threshold, probability) in steps {
            let prev = *entries.last().expect("menu starts non-empty");
            if probability < prev.probability {
                return input_err("allocation probabilities must be nondecreasing");
            }
            entries.push(MenuEntry {
                from: threshold,
                probability,
                payment: prev.payment + (probability - prev.probability) * threshold,
            });
        }
        Self::new(entries)
    }

    pub fn entries(&self) -> &[MenuEntry] {
        &self.entries
    }

    pub fn lookup(&self, report: f64) -> &MenuEntry {
        self.entries
            .iter()
            .rev()
            .find(|e| report >= e.from)
            .unwrap_or(&self.entries[0])
    }
}

impl TryFrom<Vec<MenuEntry>> for LotteryMenu {
    type Error = crate::error::Error;

    fn try_from(entries: Vec<MenuEntry>) -> Result<Self> {
        Self::new(entries)
    }
}

impl From<LotteryMenu> for Vec<MenuEntry> {
    fn from(menu: LotteryMenu) -> Self {
        menu.entries
    }
}

/// Single-player, single-item lottery driven by an enumerable coin.
///
/// The coin is a uniform draw `u ∈ [0, 1)` discretized at every probability
/// appearing in the menu; outcome `k` covers `[cut_k, cut_{k+1})` and
/// allocates exactly when that interval lies below the report's probability.
#[derive(Debug, Clone)]
pub struct Lottery {
    menu: LotteryMenu,
    cuts: Vec<f64>,
    coins: CoinModel,
}

pub fn make_lottery(menu: LotteryMenu) -> Result<Lottery> {
    let mut cuts: Vec<f64> = menu.entries.iter().map(|e| e.probability).collect();
    cuts.push(0.0);
    cuts.push(1.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let outcomes = cuts
        .windows(2)
        .map(|w| CoinOutcome {
            label: format!("u in [{}, {})", w[0], w[1]),
            probability: w[1] - w[0],
        })
        .collect();
    Ok(Lottery {
        menu,
        coins: CoinModel::enumerable(outcomes)?,
        cuts,
    })
}

impl Lottery {
    pub fn menu(&self) -> &LotteryMenu {
        &self.menu
    }

    fn entry(&self, reports: &[Valuation]) -> &MenuEntry {
        self.menu.lookup(reports[0].as_single().unwrap_or(0.0))
    }
}

impl Mechanism for Lottery {
    fn name(&self) -> String {
        "lottery".into()
    }

    fn n_players(&self) -> usize {
        1
    }

    fn n_items(&self) -> usize {
        1
    }

    fn coin_model(&self) -> &CoinModel {
        &self.coins
    }

    fn payoff_oracle(&self) -> PayoffOracle {
        PayoffOracle::Exact
    }

    fn check_reports(&self, reports: &[Valuation]) -> Result<()> {
        check_shape(reports, 1, 1)?;
        if reports[0].as_single().is_none() {
            return input_err("lottery takes a single-item report");
        }
        Ok(())
    }

    fn allocate(&self, reports: &[Valuation], coin: &Coin) -> Result<Allocation> {
        let Coin::Outcome(k) = *coin else {
            return input_err("lottery needs an enumerable coin outcome");
        };
        let mut a = Allocation::empty(1);
        if self.cuts[k + 1] <= self.entry(reports).probability {
            a.assign(0, 0);
        }
        Ok(a)
    }

    fn pay(&self, reports: &[Valuation], _coin: &Coin, _allocation: &Allocation) -> Result<Vec<f64>> {
        Ok(vec![self.entry(reports).payment])
    }
}

/// A menu shipped with the crate, with the report grid it is audited on.
#[derive(Debug, Clone)]
pub struct ShippedMenu {
    pub name: &'static str,
    pub menu: LotteryMenu,
    pub grid: Vec<f64>,
}

/// Default menus. Each is truthful in expectation on its grid.
pub fn shipped_menus() -> Vec<ShippedMenu> {
    let half_at_five = LotteryMenu::new(vec![
        MenuEntry {
            from: 0.0,
            probability: 0.0,
            payment: 0.0,
        },
        MenuEntry {
            from: 5.0,
            probability: 0.5,
            payment: 1.0,
        },
    ])
    .expect("valid menu");
    vec![
        ShippedMenu {
            name: "half_at_five",
            menu: half_at_five,
            grid: vec![1.0, 10.0],
        },
        ShippedMenu {
            name: "two_step",
            menu: LotteryMenu::monotone(&[(2.0, 0.3), (6.0, 0.8)]).expect("valid menu"),
            grid: (0..=8).map(f64::from).collect(),
        },
        ShippedMenu {
            name: "three_step",
            menu: LotteryMenu::monotone(&[(1.0, 0.25), (3.0, 0.5), (7.0, 1.0)]).expect("valid menu"),
            grid: vec![0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 9.0],
        },
        ShippedMenu {
            name: "small_payoff",
            menu: LotteryMenu::monotone(&[(1.0, 0.5), (5.0, 1.0)]).expect("valid menu"),
            grid: vec![0.0, 1.14, 10.0],
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mech_core::{expected_payoff, player_outcomes, run, run_seeded, Method};

    fn v(x: f64) -> Vec<Valuation> {
        vec![Valuation::single(x).unwrap()]
    }

    fn default_lottery() -> Lottery {
        make_lottery(shipped_menus().remove(0).menu).unwrap()
    }

    #[test]
    fn coin_has_two_halves() {
        let l = default_lottery();
        match l.coin_model() {
            CoinModel::Enumerable(outs) => {
                assert_eq!(outs.len(), 2);
                assert!(outs.iter().all(|o| o.probability == 0.5));
            }
            CoinModel::Streamed => panic!("lottery coins must be enumerable"),
        }
        let r = run(&l, &v(10.0), &Coin::Outcome(0)).unwrap();
        assert_eq!(r.allocation.owners(), &[Some(0)]);
        let r = run(&l, &v(10.0), &Coin::Outcome(1)).unwrap();
        assert_eq!(r.allocation.owners(), &[None]);
    }

    #[test]
    fn menu_examples() {
        let l = default_lottery();
        let pay = |truth: f64, report: f64| {
            expected_payoff(&l, &v(report), &v(truth), 0, Method::Exact).unwrap()
        };
        assert_eq!(pay(10.0, 10.0), 4.0);
        assert_eq!(pay(1.0, 1.0), 0.0);
        assert_eq!(pay(1.0, 5.0), -0.5);
    }

    #[test]
    fn seeded_frequency_matches_coin() {
        let l = default_lottery();
        let hits = (0..1000)
            .filter(|&s| {
                run_seeded(&l, &v(10.0), s)
                    .unwrap()
                    .allocation
                    .owners()[0]
                    .is_some()
            })
            .count();
        assert!((hits as f64 / 1000.0 - 0.5).abs() <= 0.05, "{hits}");
    }

    #[test]
    fn outcome_distribution_sums_to_one() {
        let l = make_lottery(LotteryMenu::monotone(&[(1.0, 0.25), (3.0, 0.5), (7.0, 1.0)]).unwrap())
            .unwrap();
        for r in [0.0, 2.0, 4.0, 8.0] {
            let outs = player_outcomes(&l, &v(r), 0).unwrap();
            let total: f64 = outs.iter().map(|o| o.probability).sum();
            assert!((total - 1.0).abs() < 1e-12);
            let q: f64 = outs
                .iter()
                .filter(|o| !o.bundle.is_empty())
                .map(|o| o.probability)
                .sum();
            assert!((q - l.menu().lookup(r).probability).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_menus_rejected() {
        let e = |from, probability| MenuEntry {
            from,
            probability,
            payment: 0.0,
        };
        assert!(LotteryMenu::new(vec![e(0.0, 1.5)]).is_err());
        assert!(LotteryMenu::new(vec![e(1.0, 0.5)]).is_err());
        assert!(LotteryMenu::new(vec![e(0.0, 0.0), e(0.0, 0.5)]).is_err());
        assert!(LotteryMenu::new(vec![]).is_err());
        assert!(LotteryMenu::monotone(&[(1.0, 0.5), (2.0, 0.25)]).is_err());
    }

    #[test]
    fn taxation_payments() {
        let m = LotteryMenu::monotone(&[(2.0, 0.3), (6.0, 0.8)]).unwrap();
        assert!((m.entries()[1].payment - 0.6).abs() < 1e-12);
        assert!((m.entries()[2].payment - 3.6).abs() < 1e-12);
    }
}
