//! Command-line front end. Exit codes: 0 success, 1 a check failed,
//! 2 bad configuration or arguments.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use super::asymptotics::{asymptotics_experiment, AsymptoticsConfig};
use super::kernel_checks::{kernel_vs_solver, SolverComparison};
use super::output::{self, write_json};
use super::sequences::{
    build_sequences_thm1, build_sequences_thm2, check_plan1, check_plan2, SequencePlan1, SequencePlan2,
    Thm1Options, Thm2Margins,
};
use super::verify::{verify_theorem1, verify_theorem2};
use crate::error::{Error, Result};
use crate::fronts;
use crate::kernels::{verify_kernel_bounds, KernelBoundReport, Kernels, ThresholdDomain, TruncationPolicy};
use crate::solver::config::{parse_toml, Scenario};
use crate::solver::TimeSeries;

#[derive(Debug, Parser)]
#[command(
    name = "relay-rd",
    version,
    about = "Reaction-diffusion with distributed relay hysteresis"
)]
struct Cli {
    /// Config file for subcommands that take one.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for sweeps (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Seed for randomized suites.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write series, events, profiles and fronts.
    Simulate { config: Option<PathBuf> },
    /// Kernel closeness sweep and kernel-versus-grid comparison.
    Kernels { config: Option<PathBuf> },
    /// Build and re-check an observation plan.
    Sequences {
        #[command(subcommand)]
        which: SeqCommand,
    },
    /// Check sign-change counts of a stored run against a plan.
    Verify {
        #[command(subcommand)]
        which: VerifyCommand,
    },
    /// Steady fronts over a sweep of diffusivities.
    Asymptotics { config: Option<PathBuf> },
    /// A-priori bound monitors on randomized scenarios.
    Monitors {
        #[arg(long, default_value_t = 20)]
        count: usize,
    },
}

#[derive(Debug, Subcommand)]
enum SeqCommand {
    Thm1(Thm1Args),
    Thm2(Thm2Args),
}

#[derive(Debug, Args)]
struct Thm1Args {
    #[arg(long = "N")]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    lo: f64,
    #[arg(long, default_value_t = 0.25)]
    hi: f64,
    #[arg(long, default_value_t = 0.05)]
    margin: f64,
}

#[derive(Debug, Args)]
struct Thm2Args {
    #[arg(long = "N")]
    n: usize,
    #[arg(long, default_value_t = 0.25)]
    mu: f64,
    #[arg(long, default_value_t = 0.05)]
    margin: f64,
}

#[derive(Debug, Subcommand)]
enum VerifyCommand {
    Thm1 { series: PathBuf, plan: PathBuf },
    Thm2 { series: PathBuf, plan: PathBuf },
}

enum Outcome {
    Ok,
    CheckFailed,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    crate::par::configure_threads(cli.jobs);
    match run(&cli) {
        Ok(Outcome::Ok) => 0,
        Ok(Outcome::CheckFailed) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Integration(_) | Error::Structural(_) | Error::Truncation { .. } => 1,
                _ => 2,
            }
        }
    }
}

fn config_path(cli: &Cli, positional: &Option<PathBuf>) -> Result<PathBuf> {
    positional
        .clone()
        .or_else(|| cli.config.clone())
        .ok_or_else(|| Error::Config("a config file is required (positional or --config)".into()))
}

fn read_config(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        e => e,
    }
}

fn out_dir(cli: &Cli) -> Result<&Path> {
    std::fs::create_dir_all(&cli.out)?;
    Ok(&cli.out)
}

fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Simulate { config } => simulate(cli, &config_path(cli, config)?),
        Command::Kernels { config } => kernels(cli, &config_path(cli, config)?),
        Command::Sequences { which } => sequences(cli, which),
        Command::Verify { which } => verify(cli, which),
        Command::Asymptotics { config } => asymptotics(cli, &config_path(cli, config)?),
        Command::Monitors { count } => monitors(cli, *count),
    }
}

#[derive(Serialize)]
struct RunReport<'a> {
    steps: u64,
    end_time: f64,
    stop_reason: &'a str,
    monitor: &'a crate::solver::MonitorReport,
    steady: &'a fronts::SteadyReport,
    collisions: Vec<fronts::CollisionCheck>,
    profiles: Vec<String>,
}

/// Margin used for the collision inequality and certificates.
const LEMMA_TOL: f64 = 5e-3;

fn simulate(cli: &Cli, path: &Path) -> Result<Outcome> {
    let sc = Scenario::load(path)?;
    let series = sc.sim.run(&sc.data, &sc.opts)?;
    let dir = out_dir(cli)?;
    let mut tracks = fronts::track(&series)?;
    let steady = fronts::steady_fronts(&tracks, &series, 1e-2);
    let certs: Vec<fronts::Certification> = series
        .probes
        .iter()
        .filter_map(|&x| fronts::certify_from_probe(&tracks, &series, x, LEMMA_TOL))
        .collect();
    fronts::annotate(&mut tracks, &steady, None);
    for c in &certs {
        fronts::annotate(&mut tracks, &Default::default(), Some(c));
    }
    let collisions: Vec<fronts::CollisionCheck> = fronts::collision_events(&series, &tracks)
        .iter()
        .map(|e| fronts::check_collision_lemma(e, LEMMA_TOL))
        .collect();
    output::write_series_csv(&dir.join("series.csv"), &series)?;
    output::write_events_jsonl(&dir.join("events.jsonl"), &series)?;
    let profiles = output::write_profiles(dir, &series)?;
    output::write_fronts_csv(&dir.join("fronts.csv"), &tracks)?;
    write_json(&dir.join("certificates.json"), &certs)?;
    write_json(&dir.join("series.json"), &series)?;
    let report = RunReport {
        steps: series.steps,
        end_time: series.end_time(),
        stop_reason: &series.stop_reason,
        monitor: &series.monitor,
        steady: &steady,
        collisions,
        profiles,
    };
    write_json(&dir.join("report.json"), &report)?;
    println!(
        "{} steps to t = {}, {} events, {} fronts at the end, monitor violations: {}",
        series.steps,
        series.end_time(),
        series.events.len(),
        series.records.last().map_or(0, |r| r.cfg.fronts.len()),
        series.monitor.violation_count
    );
    let ok = series.monitor.is_clean() && report.collisions.iter().all(|c| c.pass);
    Ok(if ok { Outcome::Ok } else { Outcome::CheckFailed })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    domain: SweepDomain,
    #[serde(default)]
    sweep: SweepSection,
    #[serde(default)]
    truncation: Option<TruncSection>,
    #[serde(default)]
    solver_check: Option<SolverCheckSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepDomain {
    lo: f64,
    hi: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SweepSection {
    tau_min: f64,
    tau_max: f64,
    n_tau: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            tau_min: 0.005,
            tau_max: 0.5,
            n_tau: 41,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruncSection {
    abs_tol: f64,
    max_terms: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverCheckSection {
    cells: usize,
    tau0: f64,
    dt: f64,
    taus: Vec<f64>,
    tolerance: f64,
}

#[derive(Serialize)]
struct KernelReport {
    bounds: KernelBoundReport,
    solver: Vec<SolverComparison>,
    solver_tolerance: Option<f64>,
    pass: bool,
}

fn kernels(cli: &Cli, path: &Path) -> Result<Outcome> {
    let src = read_config(path)?;
    let f: SweepFile = parse_toml(&src).map_err(|e| with_path(path, e))?;
    let domain = ThresholdDomain::new(f.domain.lo, f.domain.hi)
        .map_err(|e| with_path(path, Error::Config(e.to_string())))?;
    let policy = match &f.truncation {
        Some(t) => TruncationPolicy::new(t.abs_tol, t.max_terms).map_err(|e| Error::Config(e.to_string()))?,
        None => TruncationPolicy::default(),
    };
    let s = &f.sweep;
    if !(s.tau_min > 0.0 && s.tau_max > s.tau_min && s.n_tau >= 2) {
        return Err(with_path(
            path,
            Error::Config("sweep needs 0 < tau_min < tau_max and n_tau >= 2".into()),
        ));
    }
    let k = Kernels::new(domain, policy);
    let taus: Vec<f64> = (0..s.n_tau)
        .map(|j| s.tau_min * (s.tau_max / s.tau_min).powf(j as f64 / (s.n_tau - 1) as f64))
        .collect();
    let bounds = verify_kernel_bounds(&k, &taus, s.tau_max)?;
    let (solver, tol) = match &f.solver_check {
        Some(c) => (
            kernel_vs_solver(&k, c.cells, c.tau0, &c.taus, c.dt)?,
            Some(c.tolerance),
        ),
        None => (Vec::new(), None),
    };
    let pass = bounds.violations.is_empty() && tol.is_none_or(|t| solver.iter().all(|c| c.sup_err <= t));
    let dir = out_dir(cli)?;
    let mut w = csv::Writer::from_path(dir.join("kernels.csv"))?;
    w.write_record(["tau", "sup_diff", "scaled"])?;
    for c in &bounds.samples {
        w.write_record([output::fmt(c.tau), output::fmt(c.sup_diff), output::fmt(c.scaled)])?;
    }
    w.flush()?;
    println!(
        "fitted constant {} over {} scaled times, {} off-grid violations",
        bounds.c_fit,
        bounds.samples.len(),
        bounds.violations.len()
    );
    write_json(
        &dir.join("kernel_report.json"),
        &KernelReport {
            bounds,
            solver,
            solver_tolerance: tol,
            pass,
        },
    )?;
    Ok(if pass { Outcome::Ok } else { Outcome::CheckFailed })
}

fn sequences(cli: &Cli, which: &SeqCommand) -> Result<Outcome> {
    let dir = out_dir(cli)?;
    let (check, name) = match which {
        SeqCommand::Thm1(a) => {
            let domain = ThresholdDomain::new(a.lo, a.hi).map_err(|e| Error::Config(e.to_string()))?;
            let k = Kernels::new(domain, TruncationPolicy::default());
            let opts = Thm1Options {
                margin: a.margin,
                ..Default::default()
            };
            let plan = build_sequences_thm1(&k, a.n, &opts).map_err(config_error)?;
            write_json(&dir.join("plan_thm1.json"), &plan)?;
            (check_plan1(&k, &plan, 1000)?, "plan_thm1")
        }
        SeqCommand::Thm2(a) => {
            let m = Thm2Margins {
                margin: a.margin,
                ..Default::default()
            };
            let plan = build_sequences_thm2(a.n, a.mu, &m).map_err(config_error)?;
            write_json(&dir.join("plan_thm2.json"), &plan)?;
            (check_plan2(&plan, 1000)?, "plan_thm2")
        }
    };
    write_json(&dir.join(format!("{name}_check.json")), &check)?;
    println!(
        "{name}: {} checks, all pass: {}",
        check.checks.len(),
        check.pass()
    );
    Ok(if check.pass() {
        Outcome::Ok
    } else {
        Outcome::CheckFailed
    })
}

/// Infeasible construction parameters are a configuration problem.
fn config_error(e: Error) -> Error {
    match e {
        Error::Construction { .. } | Error::Domain(_) => Error::Config(e.to_string()),
        e => e,
    }
}

fn load_input<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    output::read_json(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn verify(cli: &Cli, which: &VerifyCommand) -> Result<Outcome> {
    let report = match which {
        VerifyCommand::Thm1 { series, plan } => {
            let s: TimeSeries = load_input(series)?;
            let p: SequencePlan1 = load_input(plan)?;
            verify_theorem1(&s, &p).map_err(config_error_mismatch)?
        }
        VerifyCommand::Thm2 { series, plan } => {
            let s: TimeSeries = load_input(series)?;
            let p: SequencePlan2 = load_input(plan)?;
            verify_theorem2(&s, &p).map_err(config_error_mismatch)?
        }
    };
    write_json(&out_dir(cli)?.join("report.json"), &report)?;
    for o in &report.observations {
        println!(
            "i = {}: t >= {}, x >= {}: expected >= {}, measured min {:?}",
            o.index, o.t_obs, o.x_cut, o.expected_at_least, o.measured_min
        );
    }
    println!(
        "verdict: {}",
        serde_json::to_string(&report.verdict)?.trim_matches('"')
    );
    Ok(if report.pass() {
        Outcome::Ok
    } else {
        Outcome::CheckFailed
    })
}

fn config_error_mismatch(e: Error) -> Error {
    match e {
        Error::ScenarioMismatch(m) => Error::Config(format!("scenario mismatch: {m}")),
        e => e,
    }
}

fn asymptotics(cli: &Cli, path: &Path) -> Result<Outcome> {
    let src = read_config(path)?;
    let cfg: AsymptoticsConfig = parse_toml(&src).map_err(|e| with_path(path, e))?;
    cfg.validate().map_err(|e| with_path(path, e))?;
    let (table, _) = asymptotics_experiment(&cfg)?;
    let dir = out_dir(cli)?;
    output::write_asymptotics_csv(&dir.join("asymptotics.csv"), &table)?;
    write_json(&dir.join("asymptotics.json"), &table)?;
    for r in &table.rows {
        println!(
            "D = {:e} n = {}: t = {:?} q/sqrt(D) = {:?}",
            r.d,
            r.n,
            r.t_n,
            r.q_n.map(|q| q / r.d.sqrt())
        );
    }
    println!("max error per D: {:?}", table.trend.max_error);
    Ok(Outcome::Ok)
}

#[derive(Serialize)]
struct MonitorSummary {
    seed: u64,
    index: usize,
    monitor: crate::solver::MonitorReport,
    pass: bool,
}

/// Late-time tolerance on `sup|u - Ubar/L|`.
pub const FLATNESS_TOL: f64 = 1e-3;

fn monitors(cli: &Cli, count: usize) -> Result<Outcome> {
    let scenarios = super::scenarios::randomized(cli.seed, count)?;
    let reports = crate::par::map(&scenarios, |sc| sc.sim.run(&sc.data, &sc.opts).map(|s| s.monitor))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let summary: Vec<MonitorSummary> = reports
        .into_iter()
        .enumerate()
        .map(|(index, monitor)| MonitorSummary {
            seed: cli.seed,
            index,
            pass: monitor.is_clean() && monitor.final_sup_deviation <= FLATNESS_TOL,
            monitor,
        })
        .collect();
    write_json(&out_dir(cli)?.join("monitors.json"), &summary)?;
    let failed = summary.iter().filter(|s| !s.pass).count();
    println!("{} scenarios, {failed} failed", summary.len());
    Ok(if failed == 0 {
        Outcome::Ok
    } else {
        Outcome::CheckFailed
    })
}
