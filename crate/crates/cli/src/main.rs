//! nfdesim: scenario-driven simulation and analysis of neutral
//! compartmental systems.
//!
//! Exit codes: 0 = success / all checks passed, 1 = a check failed,
//! 2 = input error (unreadable file, malformed scenario, bad flag).
//!
//! All output is deterministic given the scenario file and flags: the
//! only randomness is the seeded sampling inside `compare`'s stability
//! check (`--seed`, default 7), and wall-clock timings go to stderr,
//! never into emitted JSON or files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use nfdesim_core::diagnostics::{
    d_order_compare, mass_drift, merging_check, ordered_mass_gap, stability_modulus, Relation,
    Verdict,
};
use nfdesim_core::history::{HistoryFn, HistoryView};
use nfdesim_core::integrator::{integrate, IntegratorOptions, Scheme, Trajectory};
use nfdesim_core::measures::{neumann_inverse, ScalarMeasure};
use nfdesim_core::scenario::{
    load_scenario, parse_history_literal, parse_measure_literal, Scenario,
};
use nfdesim_core::structure::{PipeGraph, SingletonPolicy};
use nfdesim_core::{Error, Grid};

#[derive(Parser)]
#[command(
    name = "nfdesim",
    version,
    about = "Simulate and analyze compartment networks with delayed transport \
             and neutral in-compartment coupling"
)]
struct Cli {
    /// Seed for the sampled stability check in `compare`.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,

    /// Suppress progress notes and timings on stderr.
    #[arg(long, global = true)]
    quiet: bool,

    /// Directory for emitted files (CSV trajectories, DOT graphs).
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the model hypotheses and report them as JSON.
    Validate {
        /// Scenario file (JSON).
        path: PathBuf,
    },
    /// Decompose the pipe graph into irreducible sets; emit JSON + DOT.
    Analyze {
        /// Scenario file (JSON).
        path: PathBuf,
        /// Treat fully isolated compartments as transient instead of
        /// singleton irreducible sets.
        #[arg(long)]
        exclude_isolated: bool,
    },
    /// Integrate the scenario and write the trajectory to a file.
    Simulate {
        /// Scenario file (JSON).
        path: PathBuf,
        /// Trajectory file format.
        #[arg(long, value_parser = ["csv", "json"], default_value = "csv")]
        out: String,
        /// Override the scenario's scheme (euler, heun, rk4).
        #[arg(long)]
        scheme: Option<String>,
        /// Override the simulation horizon T.
        #[arg(long = "T", value_name = "T")]
        horizon: Option<f64>,
        /// Override the step size (the grid spacing or an integer divisor).
        #[arg(long)]
        step: Option<f64>,
        /// Which named initial history to start from.
        #[arg(long)]
        initial: Option<String>,
    },
    /// Run two initial histories and compare them with the long-run checks.
    Compare {
        /// Scenario file (JSON).
        path: PathBuf,
        /// Named initial history; pass exactly twice.
        #[arg(long = "initial", value_name = "NAME")]
        initials: Vec<String>,
        /// Checks to run: merging, order, stability. Default: all three.
        checks: Vec<String>,
    },
    /// Dump the truncated inverse kernel, optionally applying it to a history.
    Invert {
        /// Scenario file whose neutral kernel is inverted.
        path: Option<PathBuf>,
        /// Inline scalar measure literal (JSON with atoms/density/horizon).
        #[arg(long, conflicts_with = "path")]
        measure: Option<String>,
        /// Sample spacing for an inline measure literal.
        #[arg(long, requires = "measure")]
        h: Option<f64>,
        /// Truncation tolerance for the series inverse.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// History literal file; when given, the inverse transform of this
        /// history is written as CSV.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

/// Input problems exit 2; check failures exit 1 (signaled by Ok(1)).
enum Failure {
    Input(String),
}

fn input_err(e: impl std::fmt::Display) -> Failure {
    Failure::Input(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let quiet = cli.quiet;
    let result = run(cli);
    match result {
        Ok(code) => {
            if !quiet {
                eprintln!("nfdesim: finished in {:.3}s", started.elapsed().as_secs_f64());
            }
            ExitCode::from(code)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("nfdesim: input error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let out_dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    match cli.command {
        Command::Validate { path } => cmd_validate(&path),
        Command::Analyze { path, exclude_isolated } => {
            cmd_analyze(&path, exclude_isolated, &out_dir, cli.quiet)
        }
        Command::Simulate { path, out, scheme, horizon, step, initial } => cmd_simulate(
            &path,
            &out,
            scheme.as_deref(),
            horizon,
            step,
            initial.as_deref(),
            &out_dir,
            cli.quiet,
        ),
        Command::Compare { path, initials, checks } => {
            cmd_compare(&path, &initials, &checks, cli.seed, cli.quiet)
        }
        Command::Invert { path, measure, h, tol, input } => {
            cmd_invert(path.as_deref(), measure.as_deref(), h, tol, input.as_deref(), &out_dir)
        }
    }
}

fn emit(report: &Value) {
    println!("{}", serde_json::to_string_pretty(report).expect("serializable report"));
}

fn note(quiet: bool, msg: &str) {
    if !quiet {
        eprintln!("nfdesim: {msg}");
    }
}

// ---------------------------------------------------------------- validate

fn cmd_validate(path: &Path) -> Result<u8, Failure> {
    let scenario = load_scenario(path).map_err(input_err)?;
    let report = scenario.model.validate();
    let checks: Vec<Value> = report
        .checks
        .iter()
        .map(|c| {
            json!({
                "check": c.code,
                "verdict": verdict_word(c.status),
                "detail": c.detail,
            })
        })
        .collect();
    let eta: Vec<Value> = report
        .eta
        .iter()
        .map(|w| {
            json!({
                "dest": w.dest + 1,
                "src": w.src + 1,
                "min_in_range": w.min_in_range,
                "tail": w.tail,
                "ok": w.ok,
            })
        })
        .collect();
    let hard = report.has_hard_failures();
    emit(&json!({
        "command": "validate",
        "checks": checks,
        "eta": eta,
        "carriers": report.carriers.iter().map(|&(d, s)| vec![d + 1, s + 1]).collect::<Vec<_>>(),
        "contraction": report.contraction,
        "hard_failure": hard,
        "warnings": report.warnings(),
    }));
    Ok(if hard { 1 } else { 0 })
}

fn verdict_word(status: nfdesim_core::model::CheckStatus) -> &'static str {
    use nfdesim_core::model::CheckStatus::*;
    match status {
        Pass => "pass",
        Fail => "fail",
        Indeterminate | Skipped => "skip",
    }
}

// ----------------------------------------------------------------- analyze

fn cmd_analyze(
    path: &Path,
    exclude_isolated: bool,
    out_dir: &Path,
    quiet: bool,
) -> Result<u8, Failure> {
    let scenario = load_scenario(path).map_err(input_err)?;
    let graph = PipeGraph::from_model(&scenario.model);
    let policy = if exclude_isolated {
        SingletonPolicy::Exclude
    } else {
        SingletonPolicy::Include
    };
    let deco = graph.decompose(policy);
    let (irreducible, j0) = deco.one_based();

    let dot_path = out_dir.join(format!("{}.dot", stem(path)));
    write_file(&dot_path, &graph.to_dot(&deco))?;
    note(quiet, &format!("graph written to {}", dot_path.display()));

    emit(&json!({
        "command": "analyze",
        "irreducible": irreducible,
        "j0": j0,
        "set_inflow": deco.set_inflow,
        "set_outflow": deco.set_outflow,
        "dot": dot_path.display().to_string(),
    }));
    Ok(0)
}

// ---------------------------------------------------------------- simulate

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    path: &Path,
    out: &str,
    scheme: Option<&str>,
    horizon: Option<f64>,
    step: Option<f64>,
    initial: Option<&str>,
    out_dir: &Path,
    quiet: bool,
) -> Result<u8, Failure> {
    let scenario = load_scenario(path).map_err(input_err)?;
    let opts = build_options(&scenario, scheme, horizon, step, true)?;
    let (name, phi) = pick_initial(&scenario, initial)?;

    note(
        quiet,
        &format!(
            "integrating '{name}' with {} at step {} to T = {}",
            opts.scheme.name(),
            opts.step,
            opts.horizon
        ),
    );
    let traj = match integrate(&scenario.model, phi, &opts) {
        Ok(t) => t,
        Err(Error::ValidationFailure(msg)) => {
            emit(&json!({
                "command": "simulate",
                "verdict": "fail",
                "detail": format!("validation failure: {msg}"),
            }));
            return Ok(1);
        }
        Err(e) => return Err(input_err(e)),
    };

    let file = match out {
        "csv" => {
            let p = out_dir.join(format!("{}_trajectory.csv", stem(path)));
            write_file(&p, &trajectory_csv(&traj))?;
            p
        }
        _ => {
            let p = out_dir.join(format!("{}_trajectory.json", stem(path)));
            write_file(&p, &trajectory_json(&traj))?;
            p
        }
    };
    note(quiet, &format!("trajectory written to {}", file.display()));

    let drift = mass_drift(&scenario.model, &traj).map_err(input_err)?;
    emit(&json!({
        "command": "simulate",
        "initial": name,
        "scheme": traj.meta().scheme.name(),
        "step": traj.step(),
        "horizon": traj.final_time(),
        "rows": traj.len(),
        "mass": {
            "closed": drift.closed,
            "initial": drift.mass0,
            "max_residual": drift.max_abs,
            "max_relative_residual": drift.max_rel,
        },
        "warnings": traj.meta().warnings,
        "output": file.display().to_string(),
    }));
    Ok(0)
}

fn build_options(
    scenario: &Scenario,
    scheme: Option<&str>,
    horizon: Option<f64>,
    step: Option<f64>,
    force_mass: bool,
) -> Result<IntegratorOptions, Failure> {
    let run = &scenario.run;
    let scheme = match scheme {
        Some(text) => Scheme::from_str(text).map_err(input_err)?,
        None => run.scheme.unwrap_or(Scheme::Heun),
    };
    let step = step
        .or(run.step)
        .unwrap_or_else(|| scenario.model.grid().step());
    let horizon = horizon.or(run.horizon).ok_or_else(|| {
        Failure::Input("simulation horizon required: pass --T or set run.T in the scenario".into())
    })?;
    let mut opts = IntegratorOptions::new(scheme, step, horizon);
    if let Some(tol) = run.recovery_tol {
        opts.recovery_tol = tol;
    }
    opts.record_mass = force_mass || run.record_mass.unwrap_or(true);
    Ok(opts)
}

fn pick_initial<'a>(
    scenario: &'a Scenario,
    name: Option<&str>,
) -> Result<(String, &'a HistoryFn), Failure> {
    let phi = scenario.initial(name).map_err(input_err)?;
    let name = match name {
        Some(n) => n.to_string(),
        None => scenario
            .initials
            .iter()
            .find(|(_, h)| std::ptr::eq(*h, phi))
            .map(|(n, _)| n.clone())
            .unwrap_or_else(|| "default".into()),
    };
    Ok((name, phi))
}

/// CSV columns: `t,z_1..z_m,w_1..w_m,mass`. Shortest-round-trip float
/// formatting keeps the file byte-stable across runs.
fn trajectory_csv(traj: &Trajectory) -> String {
    let m = traj.dim();
    let mut text = String::from("t");
    for i in 1..=m {
        let _ = write!(text, ",z_{i}");
    }
    for i in 1..=m {
        let _ = write!(text, ",w_{i}");
    }
    text.push_str(",mass\n");
    let mass = traj.mass();
    for idx in 0..traj.len() {
        let _ = write!(text, "{}", traj.times()[idx]);
        for &v in traj.z_row(idx) {
            let _ = write!(text, ",{v}");
        }
        for &v in traj.w_row(idx) {
            let _ = write!(text, ",{v}");
        }
        match mass {
            Some(rows) => {
                let _ = write!(text, ",{}", rows[idx]);
            }
            None => text.push(','),
        }
        text.push('\n');
    }
    text
}

fn trajectory_json(traj: &Trajectory) -> String {
    let report = json!({
        "times": traj.times(),
        "z": (0..traj.len()).map(|i| traj.z_row(i).to_vec()).collect::<Vec<_>>(),
        "w": (0..traj.len()).map(|i| traj.w_row(i).to_vec()).collect::<Vec<_>>(),
        "mass": traj.mass(),
        "scheme": traj.meta().scheme.name(),
        "step": traj.step(),
    });
    serde_json::to_string_pretty(&report).expect("serializable trajectory")
}

// ----------------------------------------------------------------- compare

fn cmd_compare(
    path: &Path,
    initials: &[String],
    checks: &[String],
    seed: u64,
    quiet: bool,
) -> Result<u8, Failure> {
    if initials.len() != 2 {
        return Err(Failure::Input(format!(
            "compare needs exactly two --initial names, got {}",
            initials.len()
        )));
    }
    let scenario = load_scenario(path).map_err(input_err)?;
    let a = scenario.initial(Some(&initials[0])).map_err(input_err)?;
    let b = scenario.initial(Some(&initials[1])).map_err(input_err)?;
    let opts = build_options(&scenario, None, None, None, false)?;

    let all = ["merging", "order", "stability"];
    let selected: Vec<&str> = if checks.is_empty() {
        all.to_vec()
    } else {
        let mut sel = Vec::new();
        for c in checks {
            if !all.contains(&c.as_str()) {
                return Err(Failure::Input(format!(
                    "unknown check '{c}' (expected one of: merging, order, stability)"
                )));
            }
            sel.push(c.as_str());
        }
        sel
    };

    let mut reports = Vec::new();
    for check in &selected {
        note(quiet, &format!("running check '{check}'"));
        let report = match *check {
            "merging" => check_merging(&scenario, a, b, &opts),
            "order" => check_order(&scenario, a, b, &opts),
            _ => check_stability(&scenario, a, &opts, seed),
        };
        reports.push(report);
    }
    let any_fail = reports.iter().any(|r| r["verdict"] == "fail");
    emit(&json!({
        "command": "compare",
        "initials": initials,
        "checks": reports,
    }));
    Ok(if any_fail { 1 } else { 0 })
}

fn check_merging(
    scenario: &Scenario,
    a: &HistoryFn,
    b: &HistoryFn,
    opts: &IntegratorOptions,
) -> Value {
    let graph = PipeGraph::from_model(&scenario.model);
    let deco = graph.decompose(SingletonPolicy::Include);
    let threshold = scenario.run.thresholds.merging;
    match merging_check(&scenario.model, &deco, a, b, opts, threshold) {
        Ok(report) => {
            let worst = report
                .components
                .iter()
                .filter(|c| c.targeted)
                .map(|c| c.final_sup)
                .fold(0.0f64, f64::max);
            let witness = report
                .components
                .iter()
                .filter(|c| c.targeted)
                .max_by(|x, y| x.final_sup.total_cmp(&y.final_sup))
                .map(|c| json!({ "component": c.comp + 1, "final_sup": c.final_sup }));
            json!({
                "check": "merging",
                "verdict": verdict_json(&report.verdict),
                "max_violation": (worst - threshold).max(0.0),
                "witness": witness,
                "detail": report.reason,
                "decay_rate": report.decay_rate,
            })
        }
        Err(e) => check_error("merging", e),
    }
}

fn check_order(
    scenario: &Scenario,
    a: &HistoryFn,
    b: &HistoryFn,
    opts: &IntegratorOptions,
) -> Value {
    let model = &scenario.model;
    let tol = scenario.run.thresholds.order_tol;
    // Orient the pair so x is the transform-smaller history.
    let direction = match d_order_compare(model.d_operator(), a, b) {
        Ok(v) => v,
        Err(e) => return check_error("order", e),
    };
    let (x, y) = match direction.relation {
        Relation::Le | Relation::Equal => (a, b),
        Relation::Ge => (b, a),
        Relation::Incomparable => {
            return json!({
                "check": "order",
                "verdict": "skip",
                "max_violation": direction.max_violation,
                "witness": direction.witness.map(|(s, c)| json!({ "s": s, "component": c + 1 })),
                "detail": "initial histories are not transform-ordered",
            });
        }
    };
    let mut run_opts = opts.clone();
    run_opts.record_mass = false;
    let tx = match integrate(model, x, &run_opts) {
        Ok(t) => t,
        Err(e) => return check_error("order", e),
    };
    let ty = match integrate(model, y, &run_opts) {
        Ok(t) => t,
        Err(e) => return check_error("order", e),
    };
    match ordered_mass_gap(model, &tx, &ty, tol) {
        Ok(report) => json!({
            "check": "order",
            "verdict": "pass",
            "max_violation": 0.0,
            "witness": null,
            "detail": format!(
                "gap stayed in [0, {:.6e}]; margins {:.3e} / {:.3e} over {} points",
                report.mass_gap, report.lower_margin, report.upper_margin, report.checked_points
            ),
        }),
        Err(Error::OrderViolation { t, component, detail }) => json!({
            "check": "order",
            "verdict": "fail",
            "max_violation": tol,
            "witness": { "t": t, "component": component + 1 },
            "detail": detail,
        }),
        Err(e) => check_error("order", e),
    }
}

fn check_stability(
    scenario: &Scenario,
    base_phi: &HistoryFn,
    opts: &IntegratorOptions,
    seed: u64,
) -> Value {
    let model = &scenario.model;
    let grid = *model.grid();
    let mut run_opts = opts.clone();
    run_opts.record_mass = false;
    let base = match integrate(model, base_phi, &run_opts) {
        Ok(t) => t,
        Err(e) => return check_error("stability", e),
    };
    let eps_grid = [0.2, 0.1, 0.05, 0.02, 0.01];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perturbed = Vec::new();
    for &eps in &eps_grid {
        for _ in 0..3 {
            let samples: Vec<Vec<f64>> = (0..model.m())
                .map(|_| (0..grid.samples()).map(|_| rng.gen_range(-eps..=eps)).collect())
                .collect();
            let pre = (0..model.m()).map(|_| rng.gen_range(-eps..=eps)).collect();
            let bump = HistoryFn::from_samples(grid, samples, pre).expect("grid-sized samples");
            match base_phi.add(&bump) {
                Ok(phi) => perturbed.push(phi),
                Err(e) => return check_error("stability", e),
            }
        }
    }
    match stability_modulus(model, &base, &perturbed, &eps_grid) {
        Ok(table) => {
            let mut max_violation = 0.0f64;
            let mut witness = None;
            let mut all_within = true;
            for (i, run) in table.runs.iter().enumerate() {
                if let Some(bound) = run.analytic_bound {
                    let excess = run.sup_gap - bound;
                    if excess > max_violation {
                        max_violation = excess;
                        witness = Some(json!({
                            "run": i,
                            "initial_distance": run.delta,
                            "sup_gap": run.sup_gap,
                            "bound": bound,
                        }));
                    }
                    all_within &= run.within_chain;
                }
            }
            let modulus: Vec<Value> = table
                .rows
                .iter()
                .map(|r| json!({ "eps": r.eps, "delta": r.delta }))
                .collect();
            json!({
                "check": "stability",
                "verdict": if all_within { "pass" } else { "fail" },
                "max_violation": max_violation.max(0.0),
                "witness": witness,
                "detail": format!(
                    "{} perturbed runs against the geometric gap bound (contraction {:.3})",
                    table.runs.len(),
                    table.contraction
                ),
                "modulus": modulus,
            })
        }
        Err(e) => check_error("stability", e),
    }
}

fn verdict_json(v: &Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Skipped => "skip",
    }
}

fn check_error(check: &str, e: Error) -> Value {
    json!({
        "check": check,
        "verdict": "fail",
        "max_violation": null,
        "witness": null,
        "detail": e.to_string(),
    })
}

// ------------------------------------------------------------------ invert

fn cmd_invert(
    path: Option<&Path>,
    measure: Option<&str>,
    h: Option<f64>,
    tol: f64,
    input: Option<&Path>,
    out_dir: &Path,
) -> Result<u8, Failure> {
    let (nu, grid, label) = match (path, measure) {
        (Some(p), None) => {
            let scenario = load_scenario(p).map_err(input_err)?;
            let grid = *scenario.model.grid();
            (scenario.model.nu().clone(), grid, stem(p))
        }
        (None, Some(text)) => {
            let h = h.ok_or_else(|| {
                Failure::Input("--measure needs --h for the sample spacing".into())
            })?;
            let m = parse_measure_literal(h, text).map_err(input_err)?;
            let grid = *m.grid();
            let kernel =
                nfdesim_core::measures::Kernel::from_entries(1, grid, vec![(0, 0, m)])
                    .map_err(input_err)?;
            (kernel, grid, "measure".to_string())
        }
        _ => {
            return Err(Failure::Input(
                "pass a scenario path or an inline --measure literal".into(),
            ))
        }
    };

    let series = match neumann_inverse(&nu, tol) {
        Ok(s) => s,
        Err(Error::NotContractive { row_sum }) => {
            emit(&json!({
                "command": "invert",
                "verdict": "fail",
                "detail": format!("kernel is not contractive: max row variation {row_sum} >= 1"),
                "row_sum": row_sum,
            }));
            return Ok(1);
        }
        Err(e) => return Err(input_err(e)),
    };

    let m = series.kernel.dim();
    let mu_star: Vec<Vec<Value>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| series.kernel.get(i, j).map_or(Value::Null, |e| measure_literal(e, grid)))
                .collect()
        })
        .collect();

    let mut report = json!({
        "command": "invert",
        "contraction": series.contraction,
        "terms": series.terms,
        "residual_bound": series.residual_bound,
        "mu_star": mu_star,
    });

    if let Some(history_path) = input {
        let text = fs::read_to_string(history_path).map_err(input_err)?;
        let phi = parse_history_literal(grid, m, &text).map_err(input_err)?;
        let op = nfdesim_core::d_operator::DOperator::new(nu).map_err(input_err)?;
        let x = op.invert_dhat(&phi, tol.min(1e-9)).map_err(input_err)?;
        let csv_path = out_dir.join(format!("{label}_inverse.csv"));
        write_file(&csv_path, &history_csv(&x))?;
        report["inverse_csv"] = json!(csv_path.display().to_string());
        report["inverse_sup_norm"] = json!(x.sup_norm());
    }

    emit(&report);
    Ok(0)
}

/// One kernel entry as explicit data: atoms as (location, mass) pairs,
/// density point-sampled oldest-first over [-H, 0], declared tail mass.
fn measure_literal(m: &ScalarMeasure, grid: Grid) -> Value {
    let atoms: Vec<Value> = m
        .atoms()
        .iter()
        .map(|&(depth, mass)| json!([0.0 - depth as f64 * grid.step(), mass]))
        .collect();
    json!({
        "atoms": atoms,
        "density_samples": m.density(),
        "tail": m.tail(),
        "horizon": grid.horizon(),
    })
}

fn history_csv(x: &HistoryFn) -> String {
    let grid = x.grid();
    let m = x.dim();
    let mut text = String::from("s");
    for i in 1..=m {
        let _ = write!(text, ",x_{i}");
    }
    text.push('\n');
    for idx in 0..grid.samples() {
        let _ = write!(text, "{}", grid.location(idx));
        for c in 0..m {
            let _ = write!(text, ",{}", x.samples(c)[idx]);
        }
        text.push('\n');
    }
    text
}

// ----------------------------------------------------------------- plumbing

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "output".into())
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(input_err)?;
        }
    }
    fs::write(path, contents).map_err(input_err)
}
