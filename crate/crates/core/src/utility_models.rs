//! Utility-for-money functions. Each model is normalized so `u(0) = 0` and is
//! applied to a realized net payoff `value − payment`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{input_err, Error, Result};

/// Non-decreasing concave utility for money (when certified).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilityModel {
    Identity,
    /// `(1 − e^{−a x}) / a`
    Cara { a: f64 },
    /// `ln(x + c) − ln(c)`, defined for `x > −c`
    LogShifted { c: f64 },
    /// Integral from 0 of a step slope function: `slopes[0]` below
    /// `breakpoints[0]`, `slopes[k]` on `[breakpoints[k−1], breakpoints[k])`,
    /// and the last slope beyond the last breakpoint.
    PiecewiseLinear { breakpoints: Vec<f64>, slopes: Vec<f64> },
}

impl UtilityModel {
    pub fn cara(a: f64) -> Result<Self> {
        if a > 0.0 && a.is_finite() {
            Ok(UtilityModel::Cara { a })
        } else {
            input_err(format!("CARA coefficient must be positive, got {a}"))
        }
    }

    pub fn log_shifted(c: f64) -> Result<Self> {
        if c > 0.0 && c.is_finite() {
            Ok(UtilityModel::LogShifted { c })
        } else {
            input_err(format!("log shift must be positive, got {c}"))
        }
    }

    /// Any finite slopes are accepted; use [`certify_shape`] to check concavity.
    pub fn piecewise_linear(breakpoints: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if slopes.len() != breakpoints.len() + 1 {
            return input_err("piecewise-linear utility needs one more slope than breakpoints");
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return input_err("breakpoints must be strictly increasing");
        }
        if breakpoints.iter().chain(&slopes).any(|v| !v.is_finite()) {
            return input_err("breakpoints and slopes must be finite");
        }
        Ok(UtilityModel::PiecewiseLinear { breakpoints, slopes })
    }

    /// Slopes 3, 1, 0.2 with kinks at 0 and 5.
    pub fn default_piecewise() -> Self {
        UtilityModel::PiecewiseLinear {
            breakpoints: vec![0.0, 5.0],
            slopes: vec![3.0, 1.0, 0.2],
        }
    }

    pub fn in_domain(&self, x: f64) -> bool {
        match self {
            UtilityModel::LogShifted { c } => x > -c,
            _ => x.is_finite(),
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !self.in_domain(x) {
            return Err(Error::Domain(format!("{self} is undefined at {x}")));
        }
        Ok(match self {
            UtilityModel::Identity => x,
            UtilityModel::Cara { a } => -(-a * x).exp_m1() / a,
            UtilityModel::LogShifted { c } => (x / c).ln_1p(),
            UtilityModel::PiecewiseLinear { breakpoints, slopes } => {
                let (lo, hi, sign) = if x >= 0.0 { (0.0, x, 1.0) } else { (x, 0.0, -1.0) };
                let mut total = 0.0;
                for (k, s) in slopes.iter().enumerate() {
                    let seg_lo = if k == 0 { f64::NEG_INFINITY } else { breakpoints[k - 1] };
                    let seg_hi = breakpoints.get(k).copied().unwrap_or(f64::INFINITY);
                    let overlap = hi.min(seg_hi) - lo.max(seg_lo);
                    if overlap > 0.0 {
                        total += s * overlap;
                    }
                }
                sign * total
            }
        })
    }
}

impl fmt::Display for UtilityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UtilityModel::Identity => write!(f, "identity"),
            UtilityModel::Cara { a } => write!(f, "cara:{a}"),
            UtilityModel::LogShifted { c } => write!(f, "log:{c}"),
            UtilityModel::PiecewiseLinear { breakpoints, slopes } => {
                let join = |xs: &[f64]| xs.iter().map(f64::to_string).collect::<Vec<_>>().join("/");
                write!(f, "pwl:{}@{}", join(slopes), join(breakpoints))
            }
        }
    }
}

/// Utility selector as written on the command line or in an instance file.
/// `log:auto` resolves its shift from the audited payoff range.
#[derive(Debug, Clone, PartialEq)]
pub enum UtilitySpec {
    Fixed(UtilityModel),
    LogAuto,
}

impl UtilitySpec {
    pub fn resolve(&self, min_payoff: f64) -> UtilityModel {
        match self {
            UtilitySpec::Fixed(u) => u.clone(),
            UtilitySpec::LogAuto => UtilityModel::LogShifted {
                c: adaptive_log_shift(min_payoff),
            },
        }
    }
}

impl fmt::Display for UtilitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UtilitySpec::Fixed(u) => u.fmt(f),
            UtilitySpec::LogAuto => write!(f, "log:auto"),
        }
    }
}

impl FromStr for UtilitySpec {
    type Err = Error;

    /// `identity`, `cara:<a>`, `log:<c>`, `log:auto`, `pwl` (the default
    /// kinked utility) or `pwl:<s0>/<s1>/..@<b0>/<b1>/..`.
    fn from_str(s: &str) -> Result<Self> {
        let num = |t: &str| {
            t.parse::<f64>()
                .map_err(|_| Error::Input(format!("bad number {t:?} in utility {s:?}")))
        };
        let list = |t: &str| t.split('/').map(num).collect::<Result<Vec<f64>>>();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        Ok(match (head, arg) {
            ("identity", None) => UtilitySpec::Fixed(UtilityModel::Identity),
            ("cara", Some(a)) => UtilitySpec::Fixed(UtilityModel::cara(num(a)?)?),
            ("log", Some("auto")) => UtilitySpec::LogAuto,
            ("log", Some(c)) => UtilitySpec::Fixed(UtilityModel::log_shifted(num(c)?)?),
            ("pwl", None) => UtilitySpec::Fixed(UtilityModel::default_piecewise()),
            ("pwl", Some(rest)) => {
                let (slopes, bps) = rest
                    .split_once('@')
                    .ok_or_else(|| Error::Input(format!("pwl utility needs slopes@breakpoints: {s:?}")))?;
                UtilitySpec::Fixed(UtilityModel::piecewise_linear(list(bps)?, list(slopes)?)?)
            }
            _ => return input_err(format!("unknown utility {s:?}")),
        })
    }
}

/// Shift for the log utility keeping every payoff `≥ min_payoff` in domain.
pub fn adaptive_log_shift(min_payoff: f64) -> f64 {
    1.0 + min_payoff.min(0.0).abs()
}

/// The audit battery: near-neutral to sharply risk-averse.
pub fn standard_battery_specs() -> Vec<UtilitySpec> {
    vec![
        UtilitySpec::Fixed(UtilityModel::Identity),
        UtilitySpec::Fixed(UtilityModel::Cara { a: 0.1 }),
        UtilitySpec::Fixed(UtilityModel::Cara { a: 1.0 }),
        UtilitySpec::Fixed(UtilityModel::Cara { a: 5.0 }),
        UtilitySpec::LogAuto,
        UtilitySpec::Fixed(UtilityModel::default_piecewise()),
    ]
}

/// [`standard_battery_specs`] resolved for payoffs no lower than `min_payoff`.
pub fn standard_battery(min_payoff: f64) -> Vec<UtilityModel> {
    standard_battery_specs()
        .iter()
        .map(|s| s.resolve(min_payoff))
        .collect()
}

/// Parses a comma-separated battery; `standard` expands to the full battery.
pub fn parse_battery(s: &str) -> Result<Vec<UtilitySpec>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if part == "standard" {
            out.extend(standard_battery_specs());
        } else {
            out.push(part.parse()?);
        }
    }
    if out.is_empty() {
        return input_err("utility battery is empty");
    }
    Ok(out)
}

/// Checks monotonicity and midpoint concavity on consecutive grid points.
pub fn certify_shape(u: &UtilityModel, grid: &[f64]) -> Result<bool> {
    if grid.len() < 3 {
        return input_err("shape certificate needs at least 3 grid points");
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return input_err("shape certificate grid must be sorted");
    }
    let values = grid.iter().map(|&x| u.eval(x)).collect::<Result<Vec<f64>>>()?;
    for k in 0..grid.len() - 1 {
        if values[k + 1] < values[k] - 1e-12 {
            return Ok(false);
        }
    }
    for k in 0..grid.len() - 2 {
        let mid = u.eval(0.5 * (grid[k] + grid[k + 2]))?;
        if mid < 0.5 * (values[k] + values[k + 2]) - 1e-12 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `[−100, 100]` in steps of 0.5, clipped to the model's domain.
pub fn standard_grid(u: &UtilityModel) -> Vec<f64> {
    (-200..=200)
        .map(|k| f64::from(k) * 0.5)
        .filter(|&x| u.in_domain(x))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        assert_eq!(UtilityModel::Identity.eval(3.7).unwrap(), 3.7);
        let cara = UtilityModel::cara(1.0).unwrap();
        assert_eq!(cara.eval(0.0).unwrap(), 0.0);
        // 1 − e, against the alternating series for e.
        let e_series: f64 = (0..20).map(|k| 1.0 / (1..=k).map(f64::from).product::<f64>()).sum();
        assert!((cara.eval(-1.0).unwrap() - (1.0 - e_series)).abs() < 1e-12);
        assert!((cara.eval(-1.0).unwrap() + 1.718_28).abs() < 1e-5);
    }

    #[test]
    fn log_domain() {
        let u = UtilityModel::log_shifted(2.0).unwrap();
        assert_eq!(u.eval(0.0).unwrap(), 0.0);
        assert!(matches!(u.eval(-2.0), Err(Error::Domain(_))));
        assert!(u.eval(-1.9).unwrap() < 0.0);
    }

    #[test]
    fn piecewise_values() {
        let u = UtilityModel::default_piecewise();
        assert_eq!(u.eval(0.0).unwrap(), 0.0);
        assert!((u.eval(-2.0).unwrap() + 6.0).abs() < 1e-12);
        assert!((u.eval(3.0).unwrap() - 3.0).abs() < 1e-12);
        assert!((u.eval(10.0).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn certify_examples() {
        let grid: Vec<f64> = (-20..=20).map(|k| f64::from(k) * 0.25).collect();
        assert!(certify_shape(&UtilityModel::cara(1.0).unwrap(), &grid).unwrap());
        let convex = UtilityModel::piecewise_linear(vec![0.0], vec![0.5, 2.0]).unwrap();
        assert!(!certify_shape(&convex, &grid).unwrap());
        assert!(certify_shape(&UtilityModel::Identity, &[-3.0, 0.1, 7.0]).unwrap());
        assert!(certify_shape(&UtilityModel::Identity, &[0.0, 1.0]).is_err());
        assert!(certify_shape(&UtilityModel::Identity, &[2.0, 1.0, 3.0]).is_err());
    }

    #[test]
    fn battery_is_certified_on_standard_grid() {
        for u in standard_battery(-12.0) {
            assert!(certify_shape(&u, &standard_grid(&u)).unwrap(), "{u}");
        }
    }

    #[test]
    fn jensen_on_two_point_lotteries() {
        let points = [-9.0, -1.0, 0.0, 0.5, 4.0, 9.0, 40.0];
        for u in standard_battery(-10.0) {
            for &a in &points {
                for &b in &points {
                    let mid = u.eval(0.5 * (a + b)).unwrap();
                    let avg = 0.5 * (u.eval(a).unwrap() + u.eval(b).unwrap());
                    assert!(mid >= avg - 1e-9 * avg.abs().max(1.0), "{u} {a} {b}");
                }
            }
        }
    }

    #[test]
    fn battery_parsing() {
        assert_eq!(parse_battery("standard").unwrap().len(), 6);
        let b = parse_battery("identity, cara:2,log:auto,pwl:2/1@0").unwrap();
        assert_eq!(b.len(), 4);
        assert_eq!(b[1], UtilitySpec::Fixed(UtilityModel::Cara { a: 2.0 }));
        assert_eq!(b[2].resolve(-3.0), UtilityModel::LogShifted { c: 4.0 });
        assert!(parse_battery("cara:-1").is_err());
        assert!(parse_battery("risky").is_err());
        assert!(parse_battery("").is_err());
        for spec in standard_battery_specs() {
            let back: UtilitySpec = spec.to_string().parse().unwrap();
            assert_eq!(back, spec);
        }
    }
}
