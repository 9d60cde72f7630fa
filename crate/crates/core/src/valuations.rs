//! Valuation functions over bundles of items.
//!
//! Items are addressed by their index `0..m` in the enclosing instance. A
//! [`CoverageValuation`] assigns each item a subset of a weighted universe and
//! values a bundle at the total weight of the union of its subsets; a
//! [`SingleItemValuation`] is the one-item special case used by the
//! second-price auction and the lotteries.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{input_err, Error, Result};

/// One weighted element of a coverage universe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub id: String,
    pub weight: f64,
}

/// Weighted coverage valuation: `v(S) = w(∪_{j∈S} X_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCoverage", into = "RawCoverage")]
pub struct CoverageValuation {
    universe: Vec<Element>,
    /// `item_sets[j]` holds indices into `universe`, sorted and deduplicated.
    item_sets: Vec<Vec<usize>>,
    /// `covering[u]` lists the items whose set contains element `u`.
    covering: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoverage {
    universe: Vec<Element>,
    item_sets: Vec<Vec<usize>>,
}

impl TryFrom<RawCoverage> for CoverageValuation {
    type Error = Error;

    fn try_from(raw: RawCoverage) -> Result<Self> {
        CoverageValuation::from_indices(raw.universe, raw.item_sets)
    }
}

impl From<CoverageValuation> for RawCoverage {
    fn from(v: CoverageValuation) -> Self {
        RawCoverage {
            universe: v.universe,
            item_sets: v.item_sets,
        }
    }
}

impl CoverageValuation {
    /// Builds a valuation from named elements; `item_sets[j]` names the
    /// elements covered by item `j`.
    pub fn new(universe: Vec<(String, f64)>, item_sets: Vec<Vec<String>>) -> Result<Self> {
        let universe: Vec<Element> = universe
            .into_iter()
            .map(|(id, weight)| Element { id, weight })
            .collect();
        let mut sets = Vec::with_capacity(item_sets.len());
        for (j, names) in item_sets.iter().enumerate() {
            let mut set = Vec::with_capacity(names.len());
            for name in names {
                match universe.iter().position(|e| &e.id == name) {
                    Some(u) => set.push(u),
                    None => {
                        return input_err(format!(
                            "item {j} references element {name:?} missing from the universe"
                        ))
                    }
                }
            }
            sets.push(set);
        }
        Self::from_indices(universe, sets)
    }

    /// Unit-weight universe `0..universe_size` with sets given by element index.
    pub fn unit(universe_size: usize, item_sets: Vec<Vec<usize>>) -> Result<Self> {
        let universe = (0..universe_size)
            .map(|u| Element {
                id: format!("e{u}"),
                weight: 1.0,
            })
            .collect();
        Self::from_indices(universe, item_sets)
    }

    pub fn from_indices(universe: Vec<Element>, item_sets: Vec<Vec<usize>>) -> Result<Self> {
        for (k, e) in universe.iter().enumerate() {
            if !(e.weight.is_finite() && e.weight >= 0.0) {
                return input_err(format!("element {:?} has invalid weight {}", e.id, e.weight));
            }
            if universe[..k].iter().any(|other| other.id == e.id) {
                return input_err(format!("element {:?} appears twice in the universe", e.id));
            }
        }
        let mut covering = vec![Vec::new(); universe.len()];
        let mut sets = Vec::with_capacity(item_sets.len());
        for (j, mut set) in item_sets.into_iter().enumerate() {
            set.sort_unstable();
            set.dedup();
            if let Some(&bad) = set.iter().find(|&&u| u >= universe.len()) {
                return input_err(format!("item {j} references element index {bad} out of range"));
            }
            for &u in &set {
                covering[u].push(j);
            }
            sets.push(set);
        }
        Ok(Self {
            universe,
            item_sets: sets,
            covering,
        })
    }

    /// Valuation with the same item count that values everything at zero.
    pub fn zero(n_items: usize) -> Self {
        Self {
            universe: Vec::new(),
            item_sets: vec![Vec::new(); n_items],
            covering: Vec::new(),
        }
    }

    /// Same sets, every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let universe = self
            .universe
            .iter()
            .map(|e| Element {
                id: e.id.clone(),
                weight: e.weight * factor,
            })
            .collect();
        Self::from_indices(universe, self.item_sets.clone())
    }

    pub fn universe(&self) -> &[Element] {
        &self.universe
    }

    pub fn item_sets(&self) -> &[Vec<usize>] {
        &self.item_sets
    }

    /// Items whose sets contain universe element `u`.
    pub fn covering_items(&self, u: usize) -> &[usize] {
        &self.covering[u]
    }

    pub fn n_items(&self) -> usize {
        self.item_sets.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.universe.iter().map(|e| e.weight).sum()
    }

    /// True when every bundle is worth zero.
    pub fn is_zero(&self) -> bool {
        self.universe
            .iter()
            .zip(&self.covering)
            .all(|(e, cov)| e.weight == 0.0 || cov.is_empty())
    }

    pub fn value(&self, bundle: &[usize]) -> Result<f64> {
        let mut covered = vec![false; self.universe.len()];
        for &j in bundle {
            let set = self
                .item_sets
                .get(j)
                .ok_or_else(|| Error::Input(format!("unknown item {j} in bundle")))?;
            for &u in set {
                covered[u] = true;
            }
        }
        Ok(self
            .universe
            .iter()
            .zip(covered)
            .filter(|(_, c)| *c)
            .map(|(e, _)| e.weight)
            .sum())
    }

    /// `E[v(S)]` when item `j` joins `S` independently with probability `q[j]`:
    /// `Σ_u w_u (1 − Π_{j ∋ u} (1 − q_j))`.
    pub fn expected_value_product(&self, q: &[f64]) -> Result<f64> {
        check_probabilities(q, self.n_items())?;
        Ok(self
            .universe
            .iter()
            .zip(&self.covering)
            .map(|(e, cov)| {
                let miss: f64 = cov.iter().map(|&j| 1.0 - q[j]).product();
                e.weight * (1.0 - miss)
            })
            .sum())
    }
}

/// Value for the unique item of a single-item instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SingleItemValuation(f64);

impl SingleItemValuation {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value >= 0.0 {
            Ok(Self(value))
        } else {
            input_err(format!("single-item value must be finite and >= 0, got {value}"))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for SingleItemValuation {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SingleItemValuation> for f64 {
    fn from(v: SingleItemValuation) -> f64 {
        v.0
    }
}

/// A player's valuation, as reported to or held by a mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Valuation {
    Coverage(CoverageValuation),
    SingleItem { value: SingleItemValuation },
}

impl Valuation {
    pub fn single(value: f64) -> Result<Self> {
        Ok(Valuation::SingleItem {
            value: SingleItemValuation::new(value)?,
        })
    }

    /// Number of items this valuation is defined over.
    pub fn n_items(&self) -> usize {
        match self {
            Valuation::Coverage(c) => c.n_items(),
            Valuation::SingleItem { .. } => 1,
        }
    }

    pub fn value(&self, bundle: &[usize]) -> Result<f64> {
        match self {
            Valuation::Coverage(c) => c.value(bundle),
            Valuation::SingleItem { value } => {
                if let Some(&j) = bundle.iter().find(|&&j| j != 0) {
                    return input_err(format!("unknown item {j} in single-item bundle"));
                }
                Ok(if bundle.is_empty() { 0.0 } else { value.value() })
            }
        }
    }

    pub fn expected_value_product(&self, q: &[f64]) -> Result<f64> {
        match self {
            Valuation::Coverage(c) => c.expected_value_product(q),
            Valuation::SingleItem { value } => {
                check_probabilities(q, 1)?;
                Ok(value.value() * q[0])
            }
        }
    }

    /// Value of the full bundle `{0..m}`.
    pub fn grand_value(&self) -> f64 {
        match self {
            Valuation::Coverage(c) => {
                let all: Vec<usize> = (0..c.n_items()).collect();
                c.value(&all).unwrap_or(0.0)
            }
            Valuation::SingleItem { value } => value.value(),
        }
    }

    /// Same shape, worth nothing.
    pub fn zero_like(&self) -> Valuation {
        match self {
            Valuation::Coverage(c) => Valuation::Coverage(CoverageValuation::zero(c.n_items())),
            Valuation::SingleItem { .. } => Valuation::SingleItem {
                value: SingleItemValuation(0.0),
            },
        }
    }

    pub fn as_coverage(&self) -> Option<&CoverageValuation> {
        match self {
            Valuation::Coverage(c) => Some(c),
            Valuation::SingleItem { .. } => None,
        }
    }

    pub fn as_single(&self) -> Option<f64> {
        match self {
            Valuation::SingleItem { value } => Some(value.value()),
            Valuation::Coverage(_) => None,
        }
    }

    /// Bit-exact identity of the valuation, usable as a map key and a total order.
    pub fn fingerprint(&self) -> Vec<u64> {
        match self {
            Valuation::SingleItem { value } => vec![0, value.value().to_bits()],
            Valuation::Coverage(c) => {
                let mut key = vec![1, c.universe.len() as u64, c.item_sets.len() as u64];
                key.extend(c.universe.iter().map(|e| e.weight.to_bits()));
                for set in &c.item_sets {
                    key.push(set.len() as u64);
                    key.extend(set.iter().map(|&u| u as u64));
                }
                key
            }
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::SingleItem { value } => write!(f, "{}", value.value()),
            Valuation::Coverage(c) => {
                write!(f, "coverage(w=")?;
                for (k, e) in c.universe.iter().enumerate() {
                    if k > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}", e.weight)?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Key identifying a whole report profile.
pub fn profile_key(profile: &[Valuation]) -> Vec<u64> {
    let mut key = Vec::new();
    for v in profile {
        let fp = v.fingerprint();
        key.push(fp.len() as u64);
        key.extend(fp);
    }
    key
}

fn check_probabilities(q: &[f64], n_items: usize) -> Result<()> {
    if q.len() != n_items {
        return input_err(format!("expected {n_items} item probabilities, got {}", q.len()));
    }
    if let Some(p) = q.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return input_err(format!("item probability {p} outside [0, 1]"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abc() -> CoverageValuation {
        CoverageValuation::unit(3, vec![vec![0, 1], vec![1, 2]]).unwrap()
    }

    fn brute_force(v: &CoverageValuation, q: &[f64]) -> f64 {
        let m = q.len();
        (0u32..1 << m)
            .map(|mask| {
                let bundle: Vec<usize> = (0..m).filter(|j| mask >> j & 1 == 1).collect();
                let p: f64 = (0..m)
                    .map(|j| if mask >> j & 1 == 1 { q[j] } else { 1.0 - q[j] })
                    .product();
                p * v.value(&bundle).unwrap()
            })
            .sum()
    }

    #[test]
    fn value_examples() {
        let v = abc();
        assert_eq!(v.value(&[]).unwrap(), 0.0);
        assert_eq!(v.value(&[0, 1]).unwrap(), 3.0);

        let w = CoverageValuation::new(
            vec![("a".into(), 1.0), ("b".into(), 2.5)],
            vec![vec!["a".into()], vec!["a".into(), "b".into()]],
        )
        .unwrap();
        assert_eq!(w.value(&[1]).unwrap(), 3.5);
    }

    #[test]
    fn unknown_item_is_an_input_error() {
        assert!(matches!(abc().value(&[5]), Err(Error::Input(_))));
        let single = Valuation::single(3.0).unwrap();
        assert!(single.value(&[1]).is_err());
    }

    #[test]
    fn expected_value_examples() {
        let v = abc();
        assert_eq!(v.expected_value_product(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(v.expected_value_product(&[1.0, 1.0]).unwrap(), v.value(&[0, 1]).unwrap());
        assert!((v.expected_value_product(&[0.5, 0.5]).unwrap() - 1.75).abs() < 1e-12);
        assert!(v.expected_value_product(&[1.5, 0.0]).is_err());
        assert!(v.expected_value_product(&[0.5]).is_err());
    }

    #[test]
    fn dangling_element_and_duplicates_rejected() {
        assert!(CoverageValuation::new(vec![("a".into(), 1.0)], vec![vec!["z".into()]]).is_err());
        assert!(CoverageValuation::new(
            vec![("a".into(), 1.0), ("a".into(), 2.0)],
            vec![vec![]]
        )
        .is_err());
        assert!(CoverageValuation::new(vec![("a".into(), -1.0)], vec![vec![]]).is_err());
    }

    #[test]
    fn serde_round_trip_validates() {
        let v = Valuation::Coverage(abc());
        let json = serde_json::to_string(&v).unwrap();
        let back: Valuation = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        let bad = r#"{"kind":"coverage","universe":[{"id":"a","weight":1.0}],"item_sets":[[3]]}"#;
        assert!(serde_json::from_str::<Valuation>(bad).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn coverage(max_items: usize) -> impl Strategy<Value = CoverageValuation> {
            (1..=max_items, 1usize..6).prop_flat_map(|(m, n_el)| {
                (
                    proptest::collection::vec(0.0f64..5.0, n_el),
                    proptest::collection::vec(proptest::collection::vec(0..n_el, 0..=n_el), m),
                )
                    .prop_map(|(weights, sets)| {
                        let universe = weights
                            .into_iter()
                            .enumerate()
                            .map(|(k, weight)| Element {
                                id: format!("u{k}"),
                                weight,
                            })
                            .collect();
                        CoverageValuation::from_indices(universe, sets).unwrap()
                    })
            })
        }

        proptest! {
            #[test]
            fn closed_form_matches_enumeration(
                (v, q) in coverage(4).prop_flat_map(|v| {
                    let m = v.n_items();
                    (Just(v), proptest::collection::vec(0.0f64..=1.0, m))
                })
            ) {
                let closed = v.expected_value_product(&q).unwrap();
                prop_assert!((closed - brute_force(&v, &q)).abs() <= 1e-9);
            }

            #[test]
            fn value_is_monotone(v in coverage(4), a in 0u32..16, b in 0u32..16) {
                let m = v.n_items();
                let small: Vec<usize> = (0..m).filter(|j| a >> j & 1 == 1).collect();
                let large: Vec<usize> = (0..m).filter(|j| (a | b) >> j & 1 == 1).collect();
                prop_assert!(v.value(&small).unwrap() <= v.value(&large).unwrap() + 1e-12);
            }

            #[test]
            fn expected_value_nondecreasing_in_each_probability(
                v in coverage(3), j in 0usize..3, base in 0.0f64..=1.0
            ) {
                let m = v.n_items();
                let j = j % m;
                let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
                let mut q = vec![base; m];
                let mut prev = f64::NEG_INFINITY;
                for p in grid {
                    q[j] = p;
                    let e = v.expected_value_product(&q).unwrap();
                    prop_assert!(e >= prev - 1e-12);
                    prev = e;
                }
            }
        }
    }
}
