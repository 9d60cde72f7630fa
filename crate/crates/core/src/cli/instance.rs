//! Instance files: versioned, strict JSON.
//!
//! Numbers may be written as JSON numbers or as decimal strings; both are
//! converted once to `f64` and written back as the shortest decimal string
//! that round-trips.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ic_audit::TypeSpace;
use crate::mech_core::{Instance, Mechanism, Method, Prior, PROB_TOL};
use crate::mechanisms::{make_lottery, make_second_price, CoverageAuction, LotteryMenu, MenuEntry};
use crate::risk_transform::{
    transform, transform_bayesian, transform_with_table, PayoffEntry, PayoffTable,
    TransformedMechanism,
};
use crate::utility_models::{parse_battery, standard_battery_specs, UtilitySpec};
use crate::valuations::{CoverageValuation, Element, Valuation};
use crate::welfare_opt::OptimizerParams;

pub const SCHEMA_VERSION: u32 = 1;

/// A number read from a JSON number or a decimal string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dec(pub f64);

impl Serialize for Dec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for Dec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        let x = match Raw::deserialize(d)? {
            Raw::Num(x) => x,
            Raw::Str(s) => s
                .trim()
                .parse::<f64>()
                .map_err(|_| serde::de::Error::custom(format!("invalid decimal {s:?}")))?,
        };
        if !x.is_finite() {
            return Err(serde::de::Error::custom("number must be finite"));
        }
        Ok(Dec(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub schema_version: u32,
    pub items: Vec<String>,
    pub players: Vec<PlayerFile>,
    pub mechanism: MechanismFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<Vec<PriorPointFile>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerFile {
    pub name: String,
    pub valuation: ValuationFile,
    /// Audit grid of single-item values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<Dec>>,
    /// Audit grid of multiples of a coverage valuation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_scales: Option<Vec<Dec>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ValuationFile {
    SingleItem {
        value: Dec,
    },
    Coverage {
        universe: Vec<ElementFile>,
        item_sets: BTreeMap<String, Vec<String>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementFile {
    pub id: String,
    #[serde(default = "unit_weight")]
    pub weight: Dec,
}

fn unit_weight() -> Dec {
    Dec(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorPointFile {
    pub valuation: ValuationFile,
    pub probability: Dec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerFile {
    pub tol: Dec,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MechanismFile {
    SecondPrice,
    Lottery {
        menu: Vec<MenuEntryFile>,
    },
    CoverageAuction,
    Transformed {
        base: Box<MechanismFile>,
        payoffs: PayoffsFile,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MenuEntryFile {
    pub from: Dec,
    pub probability: Dec,
    pub payment: Dec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PayoffsFile {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
    BayesianExact,
    BayesianMonteCarlo { samples: usize, seed: u64 },
    Table { entries: Vec<TableEntryFile> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntryFile {
    pub profile: Vec<ValuationFile>,
    pub player: usize,
    pub mean: Dec,
    #[serde(default = "zero")]
    pub std_dev: Dec,
    #[serde(default)]
    pub samples: usize,
}

fn zero() -> Dec {
    Dec(0.0)
}

/// A located input problem with a stable code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub code: &'static str,
    pub message: String,
    pub field: Option<String>,
    pub line: Option<usize>,
    pub column: Option<usize>,
}

impl Diagnostic {
    fn at(code: &'static str, field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            field: Some(field.into()),
            line: None,
            column: None,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]", self.code)?;
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, " line {l}, column {c}")?;
        }
        if let Some(field) = &self.field {
            write!(f, " at {field}")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for Diagnostic {}

type Parsed<T> = std::result::Result<T, Diagnostic>;

/// The resolved mechanism description of an instance file.
#[derive(Debug, Clone, PartialEq)]
pub enum MechanismConfig {
    SecondPrice,
    Lottery(LotteryMenu),
    CoverageAuction,
    Transformed {
        base: Box<MechanismConfig>,
        payoffs: PayoffsConfig,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PayoffsConfig {
    Method(Method),
    Bayesian(Method),
    Table(PayoffTable),
}

/// A fully validated instance file.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub instance: Instance,
    pub space: TypeSpace,
    pub mechanism: MechanismConfig,
    pub battery: Vec<UtilitySpec>,
    pub optimizer: OptimizerParams,
    pub file: InstanceFile,
}

pub fn parse_instance(path: &Path) -> Parsed<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Diagnostic {
        code: "io-error",
        message: format!("{}: {e}", path.display()),
        field: None,
        line: None,
        column: None,
    })?;
    parse_instance_str(&text)
}

pub fn parse_instance_str(text: &str) -> Parsed<Scenario> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| {
        use serde_json::error::Category;
        let code = match e.classify() {
            Category::Syntax | Category::Eof | Category::Io => "malformed-syntax",
            Category::Data => "schema-violation",
        };
        Diagnostic {
            code,
            message: e.to_string(),
            field: None,
            line: Some(e.line()),
            column: Some(e.column()),
        }
    })?;
    resolve(file)
}

/// Canonical JSON text of a scenario.
pub fn to_json(scenario: &Scenario) -> String {
    serde_json::to_string_pretty(&scenario.file).expect("instance file serializes")
}

pub fn resolve(file: InstanceFile) -> Parsed<Scenario> {
    if file.schema_version != SCHEMA_VERSION {
        return Err(Diagnostic::at(
            "unsupported-schema-version",
            "schema_version",
            format!("expected {SCHEMA_VERSION}, found {}", file.schema_version),
        ));
    }
    let items = &file.items;
    if items.is_empty() {
        return Err(Diagnostic::at("schema-violation", "items", "at least one item required"));
    }
    let mut seen = HashSet::new();
    for (j, it) in items.iter().enumerate() {
        if !seen.insert(it) {
            return Err(Diagnostic::at(
                "duplicate-item",
                format!("items[{j}]"),
                format!("item {it:?} listed twice"),
            ));
        }
    }
    if file.players.is_empty() {
        return Err(Diagnostic::at("schema-violation", "players", "at least one player required"));
    }
    let mut valuations = Vec::new();
    let mut grids = Vec::new();
    for (i, p) in file.players.iter().enumerate() {
        let field = format!("players[{i}]");
        let v = valuation(&p.valuation, items, &format!("{field}.valuation"))?;
        grids.push(grid(p, &v, &field)?);
        valuations.push(v);
    }
    let prior = match &file.prior {
        None => None,
        Some(per_player) => Some(prior(per_player, items, file.players.len())?),
    };
    let instance = Instance::new(
        items.clone(),
        file.players.iter().map(|p| p.name.clone()).collect(),
        valuations,
        prior,
    )
    .map_err(|e| Diagnostic::at("schema-violation", "players", e.to_string()))?;
    let space = TypeSpace::new(grids)
        .map_err(|e| Diagnostic::at("schema-violation", "players", e.to_string()))?;
    let mechanism = mechanism(&file.mechanism, items, "mechanism")?;
    let battery = match &file.battery {
        None => standard_battery_specs(),
        Some(names) => parse_battery(&names.join(","))
            .map_err(|e| Diagnostic::at("invalid-utility", "battery", e.to_string()))?,
    };
    let optimizer = match &file.optimizer {
        None => OptimizerParams::default(),
        Some(o) => {
            if o.tol.0.is_nan() || o.tol.0 < 0.0 || o.max_iter == 0 {
                return Err(Diagnostic::at(
                    "schema-violation",
                    "optimizer",
                    "tol must be ≥ 0 and max_iter ≥ 1",
                ));
            }
            OptimizerParams {
                tol: o.tol.0,
                max_iter: o.max_iter,
            }
        }
    };
    Ok(Scenario {
        instance,
        space,
        mechanism,
        battery,
        optimizer,
        file,
    })
}

fn valuation(spec: &ValuationFile, items: &[String], field: &str) -> Parsed<Valuation> {
    match spec {
        ValuationFile::SingleItem { value } => {
            if items.len() != 1 {
                return Err(Diagnostic::at(
                    "schema-violation",
                    field,
                    "single_item valuations need exactly one item",
                ));
            }
            Valuation::single(value.0)
                .map_err(|e| Diagnostic::at("invalid-number", format!("{field}.value"), e.to_string()))
        }
        ValuationFile::Coverage { universe, item_sets } => {
            let mut ids = HashSet::new();
            for (k, el) in universe.iter().enumerate() {
                if !ids.insert(el.id.as_str()) {
                    return Err(Diagnostic::at(
                        "duplicate-element",
                        format!("{field}.universe[{k}]"),
                        format!("element {:?} listed twice", el.id),
                    ));
                }
                if el.weight.0.is_nan() || el.weight.0 < 0.0 {
                    return Err(Diagnostic::at(
                        "invalid-number",
                        format!("{field}.universe[{k}].weight"),
                        "weights must be nonnegative",
                    ));
                }
            }
            for (item, els) in item_sets {
                if !items.contains(item) {
                    return Err(Diagnostic::at(
                        "dangling-item",
                        format!("{field}.item_sets.{item}"),
                        format!("unknown item {item:?}"),
                    ));
                }
                if let Some(e) = els.iter().find(|e| !ids.contains(e.as_str())) {
                    return Err(Diagnostic::at(
                        "dangling-element",
                        format!("{field}.item_sets.{item}"),
                        format!("unknown element {e:?}"),
                    ));
                }
            }
            let sets = items
                .iter()
                .map(|it| item_sets.get(it).cloned().unwrap_or_default())
                .collect();
            let universe = universe.iter().map(|e| (e.id.clone(), e.weight.0)).collect();
            CoverageValuation::new(universe, sets)
                .map(Valuation::Coverage)
                .map_err(|e| Diagnostic::at("schema-violation", field, e.to_string()))
        }
    }
}

/// Inverse of [`valuation`].
pub fn valuation_file(v: &Valuation, items: &[String]) -> ValuationFile {
    match v {
        Valuation::SingleItem { value } => ValuationFile::SingleItem {
            value: Dec(value.value()),
        },
        Valuation::Coverage(c) => {
            let universe: &[Element] = c.universe();
            ValuationFile::Coverage {
                universe: universe
                    .iter()
                    .map(|e| ElementFile {
                        id: e.id.clone(),
                        weight: Dec(e.weight),
                    })
                    .collect(),
                item_sets: c
                    .item_sets()
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| !s.is_empty())
                    .map(|(j, s)| {
                        (
                            items[j].clone(),
                            s.iter().map(|&u| universe[u].id.clone()).collect(),
                        )
                    })
                    .collect(),
            }
        }
    }
}

fn grid(p: &PlayerFile, v: &Valuation, field: &str) -> Parsed<Vec<Valuation>> {
    match v {
        Valuation::SingleItem { .. } => {
            if p.grid_scales.is_some() {
                return Err(Diagnostic::at(
                    "schema-violation",
                    format!("{field}.grid_scales"),
                    "grid_scales applies to coverage valuations; use grid",
                ));
            }
            match &p.grid {
                None => Ok(vec![v.clone(), v.zero_like()]),
                Some(g) => g
                    .iter()
                    .enumerate()
                    .map(|(k, x)| {
                        Valuation::single(x.0).map_err(|e| {
                            Diagnostic::at("invalid-number", format!("{field}.grid[{k}]"), e.to_string())
                        })
                    })
                    .collect(),
            }
        }
        Valuation::Coverage(c) => {
            if p.grid.is_some() {
                return Err(Diagnostic::at(
                    "schema-violation",
                    format!("{field}.grid"),
                    "grid applies to single_item valuations; use grid_scales",
                ));
            }
            let scales = p
                .grid_scales
                .clone()
                .unwrap_or_else(|| vec![Dec(1.0), Dec(0.0)]);
            scales
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    c.scaled(s.0).map(Valuation::Coverage).map_err(|e| {
                        Diagnostic::at("invalid-number", format!("{field}.grid_scales[{k}]"), e.to_string())
                    })
                })
                .collect()
        }
    }
}

fn prior(per_player: &[Vec<PriorPointFile>], items: &[String], n: usize) -> Parsed<Prior> {
    if per_player.len() != n {
        return Err(Diagnostic::at(
            "schema-violation",
            "prior",
            format!("prior lists {} players, instance has {n}", per_player.len()),
        ));
    }
    let mut out = Vec::new();
    for (i, support) in per_player.iter().enumerate() {
        let mut points = Vec::new();
        for (k, pt) in support.iter().enumerate() {
            let field = format!("prior[{i}][{k}]");
            let p = pt.probability.0;
            if !(0.0..=1.0).contains(&p) {
                return Err(Diagnostic::at(
                    "invalid-probability",
                    format!("{field}.probability"),
                    format!("{p} outside [0, 1]"),
                ));
            }
            points.push((valuation(&pt.valuation, items, &format!("{field}.valuation"))?, p));
        }
        let total: f64 = points.iter().map(|(_, p)| p).sum();
        if points.is_empty() || (total - 1.0).abs() > PROB_TOL {
            return Err(Diagnostic::at(
                "prior-not-normalized",
                format!("prior[{i}]"),
                format!("probabilities sum to {total}, expected 1"),
            ));
        }
        out.push(points);
    }
    Prior::new(out).map_err(|e| Diagnostic::at("schema-violation", "prior", e.to_string()))
}

fn mechanism(spec: &MechanismFile, items: &[String], field: &str) -> Parsed<MechanismConfig> {
    Ok(match spec {
        MechanismFile::SecondPrice => MechanismConfig::SecondPrice,
        MechanismFile::CoverageAuction => MechanismConfig::CoverageAuction,
        MechanismFile::Lottery { menu } => {
            let entries = menu
                .iter()
                .map(|e| MenuEntry {
                    from: e.from.0,
                    probability: e.probability.0,
                    payment: e.payment.0,
                })
                .collect();
            MechanismConfig::Lottery(
                LotteryMenu::new(entries)
                    .map_err(|e| Diagnostic::at("invalid-menu", format!("{field}.menu"), e.to_string()))?,
            )
        }
        MechanismFile::Transformed { base, payoffs } => {
            let base = Box::new(mechanism(base, items, &format!("{field}.base"))?);
            let payoffs = match payoffs {
                PayoffsFile::Exact => PayoffsConfig::Method(Method::Exact),
                PayoffsFile::MonteCarlo { samples, seed } => PayoffsConfig::Method(Method::MonteCarlo {
                    samples: *samples,
                    seed: *seed,
                }),
                PayoffsFile::BayesianExact => PayoffsConfig::Bayesian(Method::Exact),
                PayoffsFile::BayesianMonteCarlo { samples, seed } => {
                    PayoffsConfig::Bayesian(Method::MonteCarlo {
                        samples: *samples,
                        seed: *seed,
                    })
                }
                PayoffsFile::Table { entries } => {
                    let mut out = Vec::new();
                    for (k, e) in entries.iter().enumerate() {
                        let f = format!("{field}.payoffs.entries[{k}]");
                        let profile = e
                            .profile
                            .iter()
                            .enumerate()
                            .map(|(i, v)| valuation(v, items, &format!("{f}.profile[{i}]")))
                            .collect::<Parsed<Vec<_>>>()?;
                        if e.player >= profile.len() {
                            return Err(Diagnostic::at(
                                "schema-violation",
                                format!("{f}.player"),
                                "player index outside the profile",
                            ));
                        }
                        out.push(PayoffEntry {
                            profile,
                            player: e.player,
                            mean: e.mean.0,
                            std_dev: e.std_dev.0,
                            samples: e.samples,
                        });
                    }
                    PayoffsConfig::Table(out.into())
                }
            };
            MechanismConfig::Transformed { base, payoffs }
        }
    })
}

/// Inverse of [`mechanism`].
pub fn mechanism_file(config: &MechanismConfig, items: &[String]) -> MechanismFile {
    match config {
        MechanismConfig::SecondPrice => MechanismFile::SecondPrice,
        MechanismConfig::CoverageAuction => MechanismFile::CoverageAuction,
        MechanismConfig::Lottery(menu) => MechanismFile::Lottery {
            menu: menu
                .entries()
                .iter()
                .map(|e| MenuEntryFile {
                    from: Dec(e.from),
                    probability: Dec(e.probability),
                    payment: Dec(e.payment),
                })
                .collect(),
        },
        MechanismConfig::Transformed { base, payoffs } => MechanismFile::Transformed {
            base: Box::new(mechanism_file(base, items)),
            payoffs: match payoffs {
                PayoffsConfig::Method(Method::Exact) => PayoffsFile::Exact,
                PayoffsConfig::Method(Method::MonteCarlo { samples, seed }) => PayoffsFile::MonteCarlo {
                    samples: *samples,
                    seed: *seed,
                },
                PayoffsConfig::Bayesian(Method::Exact) => PayoffsFile::BayesianExact,
                PayoffsConfig::Bayesian(Method::MonteCarlo { samples, seed }) => {
                    PayoffsFile::BayesianMonteCarlo {
                        samples: *samples,
                        seed: *seed,
                    }
                }
                PayoffsConfig::Table(t) => PayoffsFile::Table {
                    entries: t
                        .entries()
                        .iter()
                        .map(|e| TableEntryFile {
                            profile: e.profile.iter().map(|v| valuation_file(v, items)).collect(),
                            player: e.player,
                            mean: Dec(e.mean),
                            std_dev: Dec(e.std_dev),
                            samples: e.samples,
                        })
                        .collect(),
                },
            },
        },
    }
}

impl Scenario {
    /// Builds the configured mechanism.
    pub fn build(&self) -> crate::Result<Arc<dyn Mechanism>> {
        self.build_config(&self.mechanism)
    }

    fn build_config(&self, config: &MechanismConfig) -> crate::Result<Arc<dyn Mechanism>> {
        let n = self.instance.n_players();
        Ok(match config {
            MechanismConfig::SecondPrice => Arc::new(make_second_price(n)?),
            MechanismConfig::Lottery(menu) => Arc::new(make_lottery(menu.clone())?),
            MechanismConfig::CoverageAuction => {
                Arc::new(CoverageAuction::new(n, self.instance.n_items(), self.optimizer))
            }
            MechanismConfig::Transformed { .. } => Arc::new(self.build_transformed(config)?),
        })
    }

    fn build_transformed(&self, config: &MechanismConfig) -> crate::Result<TransformedMechanism> {
        let MechanismConfig::Transformed { base, payoffs } = config else {
            return Err(crate::Error::Input("mechanism is not transformed".into()));
        };
        let base = self.build_config(base)?;
        match payoffs {
            PayoffsConfig::Method(m) => transform(base, *m),
            PayoffsConfig::Bayesian(m) => transform_bayesian(base, self.instance.prior.as_ref(), *m),
            PayoffsConfig::Table(t) => Ok(transform_with_table(base, t.clone())),
        }
    }

    /// The configured mechanism as a transform, if it is one.
    pub fn build_transformed_mechanism(&self) -> crate::Result<Option<TransformedMechanism>> {
        match &self.mechanism {
            MechanismConfig::Transformed { .. } => self.build_transformed(&self.mechanism).map(Some),
            _ => Ok(None),
        }
    }

    /// Copy of this scenario whose mechanism is the transform of the current one.
    pub fn transformed(&self, payoffs: PayoffsConfig) -> Scenario {
        let mechanism = MechanismConfig::Transformed {
            base: Box::new(self.mechanism.clone()),
            payoffs,
        };
        let mut file = self.file.clone();
        file.mechanism = mechanism_file(&mechanism, &self.instance.items);
        Scenario {
            mechanism,
            file,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "items": ["x"],
        "players": [{"name": "a", "valuation": {"kind": "single_item", "value": "10"}}],
        "mechanism": {"kind": "second_price"}
    }"#;

    #[test]
    fn minimal_file() {
        let s = parse_instance_str(MINIMAL).unwrap();
        assert_eq!(s.instance.n_players(), 1);
        assert_eq!(s.instance.n_items(), 1);
        assert_eq!(s.space.grid(0).len(), 2);
    }

    #[test]
    fn numbers_or_strings() {
        let s = parse_instance_str(&MINIMAL.replace("\"10\"", "10.5")).unwrap();
        assert_eq!(s.instance.true_valuations[0].as_single(), Some(10.5));
    }

    fn code(text: &str) -> &'static str {
        parse_instance_str(text).unwrap_err().code
    }

    #[test]
    fn diagnostics_are_distinct() {
        assert_eq!(code("{ \"schema_version\": "), "malformed-syntax");
        assert_eq!(code(&MINIMAL.replace("\"items\"", "\"extra\": 1, \"items\"")), "schema-violation");
        assert_eq!(code(&MINIMAL.replace("\"schema_version\": 1", "\"schema_version\": 2")), "unsupported-schema-version");
        let bad_prior = MINIMAL.replace(
            "\"mechanism\"",
            r#""prior": [[{"valuation": {"kind": "single_item", "value": 1}, "probability": "0.9"}]], "mechanism""#,
        );
        assert_eq!(code(&bad_prior), "prior-not-normalized");
    }

    #[test]
    fn syntax_errors_carry_position() {
        let d = parse_instance_str("{\n  \"items\": [,]\n}").unwrap_err();
        assert_eq!(d.code, "malformed-syntax");
        assert_eq!(d.line, Some(2));
    }

    fn coverage_file(sets: &str) -> String {
        format!(
            r#"{{
            "schema_version": 1,
            "items": ["a", "b"],
            "players": [{{"name": "p", "valuation": {{"kind": "coverage",
                "universe": [{{"id": "e1", "weight": "2"}}, {{"id": "e2"}}],
                "item_sets": {sets}}}}}],
            "mechanism": {{"kind": "coverage_auction"}}
        }}"#
        )
    }

    #[test]
    fn coverage_references_checked() {
        let ok = parse_instance_str(&coverage_file(r#"{"a": ["e1"], "b": ["e1", "e2"]}"#)).unwrap();
        let v = &ok.instance.true_valuations[0];
        assert_eq!(v.value(&[0, 1]).unwrap(), 3.0);
        assert_eq!(code(&coverage_file(r#"{"c": ["e1"]}"#)), "dangling-item");
        assert_eq!(code(&coverage_file(r#"{"a": ["e9"]}"#)), "dangling-element");
    }

    #[test]
    fn round_trip_is_identity() {
        let s = parse_instance_str(&coverage_file(r#"{"a": ["e1"], "b": ["e2"]}"#)).unwrap();
        let again = parse_instance_str(&to_json(&s)).unwrap();
        assert_eq!(s, again);
        let t = s.transformed(PayoffsConfig::Method(Method::Exact));
        assert_eq!(parse_instance_str(&to_json(&t)).unwrap(), t);
    }
}
