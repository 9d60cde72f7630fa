//! The `tiekit` command line.
//!
//! Exit codes: 0 success or audit pass, 1 audit fail or inconclusive,
//! 2 usage or input error, 3 optimizer did not converge.

pub mod instance;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::ic_audit::{
    audit_apx, audit_bic, audit_risk_averse, audit_tie, resolve_battery, verify_transform_claims,
    AuditReport, Verdict,
};
use crate::mech_core::{run_seeded, Mechanism, Method};
use crate::risk_transform::transform;
use crate::rng;
use crate::utility_models::{parse_battery, UtilityModel};
use crate::welfare_opt::{coverage_profile, maximize_expected_welfare};

pub use instance::{parse_instance, parse_instance_str, Diagnostic, PayoffsConfig, Scenario};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "tiekit", version, about = "Audit and risk-neutralize truthful-in-expectation mechanisms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the instance's mechanism once on the true valuations.
    Run {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the welfare-maximizing fractional allocation of a coverage instance.
    Optimize {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replace the instance's mechanism by its risk-neutralized transform.
    Transform {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
        method: MethodArg,
        /// Average the payoff baseline over the instance prior.
        #[arg(long)]
        bayesian: bool,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the transformed instance.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Audit the transformed mechanism right away.
        #[arg(long, value_enum)]
        then_audit: Option<Mode>,
        #[command(flatten)]
        audit: AuditArgs,
        /// Where to write the audit report of `--then-audit`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Audit the instance's mechanism.
    Audit {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
        method: MethodArg,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        audit: AuditArgs,
        /// Where to write the JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a JSON report as a table.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Debug, Clone, clap::Args)]
struct AuditArgs {
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Comma-separated utilities; `standard` is the full battery.
    #[arg(long)]
    battery: Option<String>,
    /// Identity utility only in `bic` mode.
    #[arg(long)]
    risk_neutral: bool,
    /// Seeds checked for allocation equality in `claims` mode.
    #[arg(long, default_value_t = 8)]
    claim_seeds: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Tie,
    RiskAverse,
    Bic,
    Apx,
    Claims,
}

fn method(arg: MethodArg, samples: usize, seed: u64) -> Method {
    match arg {
        MethodArg::Exact => Method::Exact,
        MethodArg::Mc => Method::MonteCarlo { samples, seed },
    }
}

/// Any failure of a subcommand.
#[derive(Debug)]
enum Failure {
    Input(Diagnostic),
    Lib(Error),
    Io(String),
}

impl From<Diagnostic> for Failure {
    fn from(d: Diagnostic) -> Self {
        Failure::Input(d)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Lib(Error::Convergence { .. }) => EXIT_CONVERGENCE,
            _ => EXIT_INPUT,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Input(d) => d.fmt(f),
            Failure::Lib(e) => write!(f, "error: {e}"),
            Failure::Io(e) => write!(f, "error[io-error]: {e}"),
        }
    }
}

/// Entry point of the binary.
pub fn main() -> i32 {
    main_with(std::env::args_os(), &mut std::io::stdout().lock())
}

/// Runs the command line on `argv`, writing human-readable output to `out`.
pub fn main_with<I, T>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("{f}");
            f.exit_code()
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32, Failure> {
    match command {
        Command::Run {
            instance,
            seed,
            out: path,
        } => cmd_run(&instance, seed, path.as_deref(), out),
        Command::Optimize {
            instance,
            out: path,
        } => cmd_optimize(&instance, path.as_deref(), out),
        Command::Transform {
            input,
            method: m,
            bayesian,
            samples,
            seed,
            out: path,
            then_audit,
            audit,
            report,
        } => {
            let scenario = parse_instance(&input)?;
            let method = method(m, samples, seed);
            let payoffs = if bayesian {
                PayoffsConfig::Bayesian(method)
            } else {
                PayoffsConfig::Method(method)
            };
            let transformed = scenario.transformed(payoffs);
            // Fails early on unsupported methods.
            transformed.build()?;
            let text = instance::to_json(&transformed) + "\n";
            match &path {
                Some(p) => write_file(p, &text)?,
                None if then_audit.is_none() => write_out(out, &text)?,
                None => {}
            }
            match then_audit {
                None => Ok(EXIT_PASS),
                Some(mode) => run_audit(&transformed, mode, Method::Exact, &audit, report.as_deref(), out),
            }
        }
        Command::Audit {
            instance,
            mode,
            method: m,
            samples,
            seed,
            audit: args,
            out: path,
        } => {
            let scenario = parse_instance(&instance)?;
            run_audit(&scenario, mode, method(m, samples, seed), &args, path.as_deref(), out)
        }
        Command::Report { input } => {
            let text = std::fs::read_to_string(&input)
                .map_err(|e| Failure::Io(format!("{}: {e}", input.display())))?;
            let report: AuditReport = serde_json::from_str(&text).map_err(|e| {
                Failure::Input(Diagnostic {
                    code: "schema-violation",
                    message: e.to_string(),
                    field: None,
                    line: Some(e.line()),
                    column: Some(e.column()),
                })
            })?;
            write_out(out, &render_report(&report))?;
            Ok(exit_for(&report))
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes())
        .map_err(|e| Failure::Io(e.to_string()))
}

fn exit_for(report: &AuditReport) -> i32 {
    match report.verdict {
        Verdict::Pass => EXIT_PASS,
        Verdict::Fail | Verdict::Inconclusive => EXIT_FAIL,
    }
}

/// Output of `run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub mechanism: String,
    pub seed: u64,
    pub winners: Vec<Option<String>>,
    pub payments: Vec<f64>,
    pub payoffs: Vec<f64>,
}

fn cmd_run(path: &Path, seed: u64, out_path: Option<&Path>, out: &mut dyn Write) -> Result<i32, Failure> {
    let scenario = parse_instance(path)?;
    let mech = scenario.build()?;
    let inst = &scenario.instance;
    let r = run_seeded(mech.as_ref(), &inst.true_valuations, seed)?;
    let payoffs = (0..inst.n_players())
        .map(|i| Ok(inst.true_valuations[i].value(&r.allocation.bundle(i))? - r.payments[i]))
        .collect::<crate::Result<Vec<f64>>>()?;
    let record = RunRecord {
        mechanism: mech.name(),
        seed,
        winners: r
            .allocation
            .owners()
            .iter()
            .map(|o| o.map(|i| inst.player_names[i].clone()))
            .collect(),
        payments: r.payments.clone(),
        payoffs,
    };
    let mut text = format!("mechanism {} seed {seed}\n", record.mechanism);
    for (j, w) in record.winners.iter().enumerate() {
        text += &format!("  item {:<12} -> {}\n", inst.items[j], w.as_deref().unwrap_or("-"));
    }
    for (i, name) in inst.player_names.iter().enumerate() {
        text += &format!(
            "  player {name:<10} pays {:>12.6}  payoff {:>12.6}\n",
            record.payments[i], record.payoffs[i]
        );
    }
    write_out(out, &text)?;
    if let Some(p) = out_path {
        write_file(p, &(serde_json::to_string_pretty(&record).expect("record serializes") + "\n"))?;
    }
    Ok(EXIT_PASS)
}

/// Output of `optimize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeRecord {
    pub x: Vec<Vec<f64>>,
    pub win_probabilities: Vec<Vec<f64>>,
    pub objective: f64,
    pub residual: f64,
    pub iterations: usize,
}

fn cmd_optimize(path: &Path, out_path: Option<&Path>, out: &mut dyn Write) -> Result<i32, Failure> {
    let scenario = parse_instance(path)?;
    let inst = &scenario.instance;
    let profile = coverage_profile(&inst.true_valuations)?;
    let sol = maximize_expected_welfare(&profile, inst.n_items(), scenario.optimizer)?;
    let record = OptimizeRecord {
        x: sol.x.rows().to_vec(),
        win_probabilities: (0..sol.x.n_players()).map(|i| sol.x.marginals(i)).collect(),
        objective: sol.objective,
        residual: sol.residual,
        iterations: sol.iterations,
    };
    let mut text = format!(
        "expected welfare {:.9} after {} iterations (residual {:.3e})\n{:<12}",
        record.objective, record.iterations, record.residual, "x*"
    );
    for item in &inst.items {
        text += &format!(" {item:>12}");
    }
    text += "\n";
    for (i, row) in record.x.iter().enumerate() {
        text += &format!("{:<12}", inst.player_names[i]);
        for v in row {
            text += &format!(" {v:>12.6}");
        }
        text += "\n";
    }
    write_out(out, &text)?;
    if let Some(p) = out_path {
        write_file(p, &(serde_json::to_string_pretty(&record).expect("record serializes") + "\n"))?;
    }
    Ok(EXIT_PASS)
}

fn utilities(
    scenario: &Scenario,
    args: &AuditArgs,
    mech: &dyn Mechanism,
    method: Method,
) -> Result<Vec<UtilityModel>, Failure> {
    let specs = match &args.battery {
        Some(s) => parse_battery(s)?,
        None => scenario.battery.clone(),
    };
    Ok(resolve_battery(&specs, mech, &scenario.space, method)?)
}

/// Runs one audit mode and reports it.
fn run_audit(
    scenario: &Scenario,
    mode: Mode,
    method: Method,
    args: &AuditArgs,
    out_path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let mech = scenario.build()?;
    let space = &scenario.space;
    let report = match mode {
        Mode::Tie => audit_tie(mech.as_ref(), space, method, args.tol)?,
        Mode::RiskAverse => {
            let us = utilities(scenario, args, mech.as_ref(), method)?;
            audit_risk_averse(mech.as_ref(), space, &us, method, args.tol)?
        }
        Mode::Bic => {
            let us = if args.risk_neutral {
                vec![UtilityModel::Identity]
            } else {
                utilities(scenario, args, mech.as_ref(), method)?
            };
            audit_bic(mech.as_ref(), scenario.instance.prior.as_ref(), space, &us, method, args.tol)?
        }
        Mode::Apx => {
            let us = utilities(scenario, args, mech.as_ref(), Method::Exact)?;
            audit_apx(mech.as_ref(), space, &us, args.epsilon, args.tol)?
        }
        Mode::Claims => {
            let transformed = match scenario.build_transformed_mechanism()? {
                Some(t) => t,
                None => transform(Arc::clone(&mech), Method::Exact)?,
            };
            let seeds: Vec<u64> = (0..args.claim_seeds)
                .map(|k| match method {
                    Method::MonteCarlo { seed, .. } => rng::derive_seed(seed, k),
                    Method::Exact => rng::derive_seed(0, k),
                })
                .collect();
            verify_transform_claims(&transformed, space, &seeds, args.tol)?
        }
    };
    write_out(out, &render_report(&report))?;
    if let Some(p) = out_path {
        write_file(p, &report_json(&report))?;
    }
    Ok(exit_for(&report))
}

/// Canonical JSON text of a report.
pub fn report_json(report: &AuditReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes") + "\n"
}

/// Human-readable summary of a report.
pub fn render_report(r: &AuditReport) -> String {
    let verdict = match r.verdict {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::Inconclusive => "INCONCLUSIVE",
    };
    let method = match r.method {
        Method::Exact => "exact".to_string(),
        Method::MonteCarlo { samples, seed } => format!("monte-carlo n={samples} seed={seed}"),
    };
    let mut s = format!(
        "audit {} of {}: {verdict}\n  method {method}, tol {:e}, {} checks, {} failing, {} inconclusive\n",
        r.mode, r.mechanism, r.tolerance, r.checks, r.failing, r.inconclusive
    );
    if let Some(m) = r.worst_margin {
        s += &format!("  worst margin {m:.6e}\n");
    }
    if let Some(eps) = r.epsilon {
        s += &format!("  epsilon {eps}{}\n", if r.degraded { " (degraded: additive margins)" } else { "" });
    }
    if !r.utilities.is_empty() {
        s += &format!("  utilities {}\n", r.utilities.join(", "));
    }
    for c in &r.claims {
        s += &format!(
            "  claim {:<24} worst {:.3e}  tol {:.0e}  {}\n",
            c.claim,
            c.worst_deviation,
            c.tolerance,
            if c.passed { "ok" } else { "FAILED" }
        );
    }
    if !r.witnesses.is_empty() {
        s += "  witnesses:\n";
        for w in &r.witnesses {
            let profile: Vec<String> = w.true_profile.iter().map(ToString::to_string).collect();
            s += &format!(
                "    {} player {} true ({}) -> {}{}: truthful {:.6} vs {:.6}, margin {:.6e}",
                w.check,
                w.player,
                profile.join(", "),
                w.deviation.as_ref().map_or("-".into(), ToString::to_string),
                w.utility.as_ref().map_or(String::new(), |u| format!(" under {u}")),
                w.truthful,
                w.deviating,
                w.margin
            );
            if let Some(hw) = w.ci_half_width {
                s += &format!(" ± {hw:.3e}");
            }
            s += "\n";
        }
    }
    for n in &r.notes {
        s += &format!("  note: {n}\n");
    }
    s
}

