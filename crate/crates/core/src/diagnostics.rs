//! Executable checks for the structural theorems: order comparison under
//! the D-transform, mass conservation, stability moduli, compartment
//! emptying, trajectory merging, and recurrence.
//!
//! Every check returns a report object rather than asserting; the only
//! hard errors are misuse (mismatched grids or lattices) and genuine
//! order violations, which indicate either a hypothesis failure or an
//! integration fault.

use crate::d_operator::DOperator;
use crate::error::{Error, Result};
use crate::history::{sup_distance, HistoryFn, HistoryView};
use crate::integrator::{integrate, IntegratorOptions, Trajectory};
use crate::model::CompartmentalModel;
use crate::structure::Decomposition;
use serde::{Deserialize, Serialize};

/// Comparison tolerance for order verdicts.
const ORDER_TOL: f64 = 1e-9;
/// Inversion tolerance used by the positive-part construction.
const POSITIVE_PART_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Equal,
    Le,
    Ge,
    Incomparable,
}

/// Verdict of comparing two histories through the convolution transform
/// x ≤ y ⟺ D̂x(s) ≤ D̂y(s) at every point of the window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderVerdict {
    pub relation: Relation,
    /// How badly the reported relation is violated (0 when clean); for
    /// incomparable pairs, the distance to the nearest one-sided verdict.
    pub max_violation: f64,
    /// (window position, component) achieving the violation.
    pub witness: Option<(f64, usize)>,
}

pub fn d_order_compare(op: &DOperator, x: &HistoryFn, y: &HistoryFn) -> Result<OrderVerdict> {
    let dx = op.apply_dhat(x)?;
    let dy = op.apply_dhat(y)?;
    let grid = op.grid();
    let m = op.dim();
    // Extremes of dy − dx over the window, with their locations.
    let mut min = (f64::INFINITY, 0.0, 0usize);
    let mut max = (f64::NEG_INFINITY, 0.0, 0usize);
    for c in 0..m {
        let xs = dx.samples(c);
        let ys = dy.samples(c);
        for j in 0..xs.len() {
            let diff = ys[j] - xs[j];
            let s = grid.location(j);
            if diff < min.0 {
                min = (diff, s, c);
            }
            if diff > max.0 {
                max = (diff, s, c);
            }
        }
    }
    let neg = (-min.0).max(0.0);
    let pos = max.0.max(0.0);
    let verdict = if neg <= ORDER_TOL && pos <= ORDER_TOL {
        OrderVerdict {
            relation: Relation::Equal,
            max_violation: neg.max(pos),
            witness: None,
        }
    } else if neg <= ORDER_TOL {
        OrderVerdict { relation: Relation::Le, max_violation: neg, witness: None }
    } else if pos <= ORDER_TOL {
        OrderVerdict { relation: Relation::Ge, max_violation: pos, witness: None }
    } else if neg <= pos {
        OrderVerdict {
            relation: Relation::Incomparable,
            max_violation: neg,
            witness: Some((min.1, min.2)),
        }
    } else {
        OrderVerdict {
            relation: Relation::Incomparable,
            max_violation: pos,
            witness: Some((max.1, max.2)),
        }
    };
    Ok(verdict)
}

/// The least D-upper bound of x above zero: x⁺ = D̂⁻¹ sup(0, D̂x).
pub fn positive_part(op: &DOperator, x: &HistoryFn) -> Result<HistoryFn> {
    let dx = op.apply_dhat(x)?;
    let grid = *dx.grid();
    let m = dx.dim();
    let samples: Vec<Vec<f64>> = (0..m)
        .map(|c| dx.samples(c).iter().map(|&v| v.max(0.0)).collect())
        .collect();
    let pre: Vec<f64> = (0..m).map(|c| dx.pre(c).max(0.0)).collect();
    let clamped = HistoryFn::from_samples(grid, samples, pre)?;
    op.invert_dhat(&clamped, POSITIVE_PART_TOL)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MassDriftReport {
    /// True when the model exchanges nothing with the environment, so the
    /// drift is measured against a constant.
    pub closed: bool,
    pub mass0: f64,
    /// max over t of |M(t) − M(0) − ∫₀ᵗ Σ(inflow − outflow) ds|.
    pub max_abs: f64,
    /// max_abs relative to |M(0)| (or absolute when M(0) ≈ 0).
    pub max_rel: f64,
}

/// Mass series of a trajectory: recorded values if present, otherwise
/// recomputed from reconstructed windows.
fn mass_series(model: &CompartmentalModel, traj: &Trajectory) -> Result<Vec<f64>> {
    if let Some(mass) = traj.mass() {
        return Ok(mass.to_vec());
    }
    (0..traj.len())
        .map(|idx| {
            let win = traj.history_at(traj.times()[idx])?;
            model.total_mass(traj.times()[idx], &win)
        })
        .collect()
}

/// Conservation check: the mass functional may only change by what flows
/// through the boundary.
pub fn mass_drift(model: &CompartmentalModel, traj: &Trajectory) -> Result<MassDriftReport> {
    if traj.dim() != model.m() {
        return Err(Error::BadArgument(format!(
            "trajectory has {} components, model has {}",
            traj.dim(),
            model.m()
        )));
    }
    let mass = mass_series(model, traj)?;
    let times = traj.times();
    let m = model.m();

    let boundary_rate = |idx: usize| -> f64 {
        let t = times[idx];
        let z = traj.z_row(idx);
        (0..m)
            .map(|i| {
                let inflow = model.inflow_value(i, t);
                let outflow =
                    model.outflow_fn(i).map(|g| g.eval(t, z[i])).unwrap_or(0.0);
                inflow - outflow
            })
            .sum()
    };

    let mut max_abs = 0.0f64;
    let mut boundary = 0.0f64;
    let mut prev_rate = boundary_rate(0);
    for idx in 0..times.len() {
        if idx > 0 {
            let rate = boundary_rate(idx);
            boundary += 0.5 * (times[idx] - times[idx - 1]) * (prev_rate + rate);
            prev_rate = rate;
        }
        max_abs = max_abs.max((mass[idx] - mass[0] - boundary).abs());
    }
    let scale = mass[0].abs().max(1e-12);
    Ok(MassDriftReport {
        closed: model.is_closed(),
        mass0: mass[0],
        max_abs,
        max_rel: max_abs / scale,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MassGapReport {
    /// M(y₀) − M(x₀), the proven ceiling for every per-compartment gap.
    pub mass_gap: f64,
    pub min_gap: f64,
    pub max_gap: f64,
    /// Worst approach to the lower bound 0 (≥ −tolerance on pass).
    pub lower_margin: f64,
    /// Worst approach to the ceiling (≥ −tolerance on pass).
    pub upper_margin: f64,
    pub checked_points: usize,
}

/// For D-ordered initial data x ≤ y, every compartment content gap
/// D_i z_t(y) − D_i z_t(x) stays inside [0, M(y₀) − M(x₀)]. A violation
/// beyond `tol` is an error: it falsifies a hypothesis or the scheme.
pub fn ordered_mass_gap(
    model: &CompartmentalModel,
    traj_x: &Trajectory,
    traj_y: &Trajectory,
    tol: f64,
) -> Result<MassGapReport> {
    if traj_x.len() != traj_y.len() || (traj_x.step() - traj_y.step()).abs() > 1e-12 {
        return Err(Error::BadArgument(
            "trajectories must share the time lattice".into(),
        ));
    }
    let mass_gap = model.total_mass(0.0, traj_y.initial())?
        - model.total_mass(0.0, traj_x.initial())?;
    let m = model.m();
    let mut min_gap = f64::INFINITY;
    let mut max_gap = f64::NEG_INFINITY;
    let mut checked = 0usize;
    for idx in 0..traj_x.len() {
        let t = traj_x.times()[idx];
        let wx = traj_x.w_row(idx);
        let wy = traj_y.w_row(idx);
        for i in 0..m {
            let gap = wy[i] - wx[i];
            if gap < -tol {
                return Err(Error::OrderViolation {
                    t,
                    component: i,
                    detail: format!("content gap {gap:e} fell below 0"),
                });
            }
            if gap > mass_gap + tol {
                return Err(Error::OrderViolation {
                    t,
                    component: i,
                    detail: format!(
                        "content gap {gap:e} exceeded the initial mass gap {mass_gap:e}"
                    ),
                });
            }
            min_gap = min_gap.min(gap);
            max_gap = max_gap.max(gap);
            checked += 1;
        }
    }
    Ok(MassGapReport {
        mass_gap,
        min_gap,
        max_gap,
        lower_margin: min_gap,
        upper_margin: mass_gap - max_gap,
        checked_points: checked,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbationRun {
    /// Initial sup-norm distance from the base history.
    pub delta: f64,
    /// Largest sup-norm state gap over the whole run.
    pub sup_gap: f64,
    /// Initial gap measured through the convolution transform.
    pub d_gap: f64,
    /// d_gap/(1 − c): the analytic ceiling for contractive kernels.
    pub analytic_bound: Option<f64>,
    pub within_chain: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModulusRow {
    pub eps: f64,
    /// Largest tested perturbation size whose run stayed within eps.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModulusTable {
    pub contraction: f64,
    pub rows: Vec<ModulusRow>,
    pub runs: Vec<PerturbationRun>,
}

/// Empirical uniform-stability modulus δ(ε): rerun the model from each
/// perturbed history and record how far the solutions drift from the
/// base. Each run is also checked against the analytic chain
/// sup gap ≤ (initial transform gap)/(1 − c).
pub fn stability_modulus(
    model: &CompartmentalModel,
    base: &Trajectory,
    perturbed: &[HistoryFn],
    eps_grid: &[f64],
) -> Result<ModulusTable> {
    let meta = base.meta();
    let opts = IntegratorOptions {
        scheme: meta.scheme,
        step: meta.step,
        horizon: base.final_time(),
        recovery_tol: meta.recovery_tol,
        recovery_max_iters: 100,
        record_mass: false,
    };
    let op = model.d_operator();
    let c = op.contraction();
    let base_dhat = op.apply_dhat(base.initial())?;
    let mut runs = Vec::new();
    for phi in perturbed {
        let traj = integrate(model, phi, &opts)?;
        let delta = sup_distance(phi, base.initial())?;
        let mut sup_gap = 0.0f64;
        for idx in 0..base.len() {
            let zb = base.z_row(idx);
            let zp = traj.z_row(idx);
            for i in 0..model.m() {
                sup_gap = sup_gap.max((zb[i] - zp[i]).abs());
            }
        }
        let d_gap = sup_distance(&op.apply_dhat(phi)?, &base_dhat)?;
        let analytic_bound = (c < 1.0).then(|| d_gap / (1.0 - c));
        let within_chain = analytic_bound
            .map(|b| sup_gap <= b * (1.0 + 1e-9) + 1e-9)
            .unwrap_or(false);
        runs.push(PerturbationRun { delta, sup_gap, d_gap, analytic_bound, within_chain });
    }
    let rows = eps_grid
        .iter()
        .map(|&eps| ModulusRow {
            eps,
            delta: runs
                .iter()
                .filter(|r| r.sup_gap <= eps)
                .map(|r| r.delta)
                .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d)))),
        })
        .collect();
    Ok(ModulusTable { contraction: c, rows, runs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmptyingReport {
    pub verdict: Verdict,
    pub reason: String,
    /// Compartments the emptying theorem speaks about: the transient set
    /// plus every minimal closed set that drains to the environment.
    pub targets: Vec<usize>,
    pub window_start: f64,
    pub threshold: f64,
    /// max |z_i(t)| over the final window, aligned with `targets`.
    pub terminal_sup: Vec<f64>,
}

/// Terminal-emptiness check over the final 10% of the run. Applicable
/// only to models without inflow; otherwise reported as skipped.
pub fn emptying_check(
    model: &CompartmentalModel,
    traj: &Trajectory,
    decomposition: &Decomposition,
    threshold: f64,
) -> Result<EmptyingReport> {
    if traj.dim() != model.m() {
        return Err(Error::BadArgument(format!(
            "trajectory has {} components, model has {}",
            traj.dim(),
            model.m()
        )));
    }
    let mut targets: Vec<usize> = decomposition.j0.clone();
    for (l, set) in decomposition.irreducible.iter().enumerate() {
        if decomposition.set_outflow[l] {
            targets.extend_from_slice(set);
        }
    }
    targets.sort_unstable();

    let has_inflow = (0..model.m()).any(|i| model.has_inflow(i));
    if has_inflow {
        return Ok(EmptyingReport {
            verdict: Verdict::Skipped,
            reason: "environment inflow present; emptying is not expected".into(),
            targets,
            window_start: 0.0,
            threshold,
            terminal_sup: Vec::new(),
        });
    }
    if targets.is_empty() {
        return Ok(EmptyingReport {
            verdict: Verdict::Skipped,
            reason: "no transient compartments and no draining minimal set".into(),
            targets,
            window_start: 0.0,
            threshold,
            terminal_sup: Vec::new(),
        });
    }

    let t_final = traj.final_time();
    let window_start = 0.9 * t_final;
    let mut terminal_sup = vec![0.0f64; targets.len()];
    for idx in 0..traj.len() {
        if traj.times()[idx] < window_start {
            continue;
        }
        let z = traj.z_row(idx);
        for (k, &i) in targets.iter().enumerate() {
            terminal_sup[k] = terminal_sup[k].max(z[i].abs());
        }
    }
    let pass = terminal_sup.iter().all(|&v| v < threshold);
    Ok(EmptyingReport {
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        reason: format!(
            "worst terminal magnitude {:e} against threshold {threshold:e}",
            terminal_sup.iter().fold(0.0f64, |a, &v| a.max(v))
        ),
        targets,
        window_start,
        threshold,
        terminal_sup,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentTrace {
    pub comp: usize,
    /// Whether the theorem being checked makes a claim about this
    /// component.
    pub targeted: bool,
    /// Supremum of the difference signal over the final window.
    pub final_sup: f64,
    /// Supremum over the whole run.
    pub max_sup: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub verdict: Verdict,
    pub reason: String,
    pub threshold: f64,
    /// Start time of each analysis window (or sample times for
    /// recurrence checks).
    pub window_times: Vec<f64>,
    /// Targeted supremum of the difference signal per window (or
    /// successive sample gaps).
    pub window_sup: Vec<f64>,
    /// Log-linear decay rate fitted to the window suprema, when they are
    /// all positive.
    pub decay_rate: Option<f64>,
    pub components: Vec<ComponentTrace>,
    pub targets: Vec<usize>,
}

fn fit_decay_rate(times: &[f64], sups: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(sups)
        .filter(|(_, &s)| s > 0.0)
        .map(|(&t, &s)| (t, s.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

/// Merging of two runs started from different histories: transient
/// compartments and draining minimal sets must forget their initial
/// data. Requires the uniform-transport-floor classification; skipped
/// when it fails.
pub fn merging_check(
    model: &CompartmentalModel,
    decomposition: &Decomposition,
    x0: &HistoryFn,
    y0: &HistoryFn,
    opts: &IntegratorOptions,
    threshold: f64,
) -> Result<ConvergenceReport> {
    let mut targets: Vec<usize> = decomposition.j0.clone();
    for (l, set) in decomposition.irreducible.iter().enumerate() {
        if decomposition.set_outflow[l] {
            targets.extend_from_slice(set);
        }
    }
    targets.sort_unstable();

    let report = model.validate();
    if !report.passes("C6*") {
        return Ok(ConvergenceReport {
            verdict: Verdict::Skipped,
            reason: "uniform transport floor classification failed; merging not guaranteed"
                .into(),
            threshold,
            window_times: Vec::new(),
            window_sup: Vec::new(),
            decay_rate: None,
            components: Vec::new(),
            targets,
        });
    }

    let mut run_opts = opts.clone();
    run_opts.record_mass = false;
    let ta = integrate(model, x0, &run_opts)?;
    let tb = integrate(model, y0, &run_opts)?;
    compare_runs(model.m(), &ta, &tb, &targets, threshold)
}

/// Windowed comparison of two runs on the same lattice.
fn compare_runs(
    m: usize,
    ta: &Trajectory,
    tb: &Trajectory,
    targets: &[usize],
    threshold: f64,
) -> Result<ConvergenceReport> {
    if ta.len() != tb.len() {
        return Err(Error::BadArgument("runs must share the time lattice".into()));
    }
    let t_final = ta.final_time();
    let n_windows = 10usize;
    let window_len = t_final / n_windows as f64;
    let mut window_times = Vec::with_capacity(n_windows);
    let mut window_sup = vec![0.0f64; n_windows];
    for w in 0..n_windows {
        window_times.push(w as f64 * window_len);
    }
    let mut is_target = vec![false; m];
    for &i in targets {
        is_target[i] = true;
    }
    let mut final_sup = vec![0.0f64; m];
    let mut max_sup = vec![0.0f64; m];
    let final_start = 0.9 * t_final;
    for idx in 0..ta.len() {
        let t = ta.times()[idx];
        let w = ((t / window_len) as usize).min(n_windows - 1);
        let za = ta.z_row(idx);
        let zb = tb.z_row(idx);
        for i in 0..m {
            let diff = (za[i] - zb[i]).abs();
            max_sup[i] = max_sup[i].max(diff);
            if t >= final_start {
                final_sup[i] = final_sup[i].max(diff);
            }
            if is_target[i] {
                window_sup[w] = window_sup[w].max(diff);
            }
        }
    }
    let components = (0..m)
        .map(|i| ComponentTrace {
            comp: i,
            targeted: is_target[i],
            final_sup: final_sup[i],
            max_sup: max_sup[i],
        })
        .collect();
    let worst_final = targets
        .iter()
        .map(|&i| final_sup[i])
        .fold(0.0f64, f64::max);
    let converged = !targets.is_empty() && worst_final < threshold;
    Ok(ConvergenceReport {
        verdict: if targets.is_empty() {
            Verdict::Skipped
        } else if converged {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        reason: if targets.is_empty() {
            "no targeted compartments".into()
        } else {
            format!("targeted final-window difference {worst_final:e} vs threshold {threshold:e}")
        },
        threshold,
        decay_rate: fit_decay_rate(&window_times, &window_sup),
        window_times,
        window_sup,
        components,
        targets: targets.to_vec(),
    })
}

/// Poincaré recurrence check for period-T coefficients: the samples
/// z(kT) must become Cauchy.
pub fn recurrence_check(
    traj: &Trajectory,
    period: f64,
    threshold: f64,
) -> Result<ConvergenceReport> {
    if !(period > 0.0) {
        return Err(Error::BadArgument(format!("period must be positive, got {period}")));
    }
    let n_samples = (traj.final_time() / period).floor() as usize + 1;
    if n_samples < 3 {
        return Err(Error::BadArgument(format!(
            "trajectory covers {} period(s); at least 2 are needed",
            n_samples.saturating_sub(1)
        )));
    }
    let m = traj.dim();
    let mut sample_rows: Vec<Vec<f64>> = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let idx = traj.index_at(k as f64 * period)?;
        sample_rows.push(traj.z_row(idx).to_vec());
    }
    let mut window_times = Vec::new();
    let mut gaps = Vec::new();
    let mut per_comp_final = vec![0.0f64; m];
    let mut per_comp_max = vec![0.0f64; m];
    for k in 1..n_samples {
        let mut gap = 0.0f64;
        for i in 0..m {
            let d = (sample_rows[k][i] - sample_rows[k - 1][i]).abs();
            gap = gap.max(d);
            per_comp_max[i] = per_comp_max[i].max(d);
            if k == n_samples - 1 {
                per_comp_final[i] = d;
            }
        }
        window_times.push(k as f64 * period);
        gaps.push(gap);
    }
    let final_gap = *gaps.last().expect("at least two samples");
    let components = (0..m)
        .map(|i| ComponentTrace {
            comp: i,
            targeted: true,
            final_sup: per_comp_final[i],
            max_sup: per_comp_max[i],
        })
        .collect();
    Ok(ConvergenceReport {
        verdict: if final_gap < threshold { Verdict::Pass } else { Verdict::Fail },
        reason: format!("final sample gap {final_gap:e} vs threshold {threshold:e}"),
        threshold,
        decay_rate: fit_decay_rate(&window_times, &gaps),
        window_times,
        window_sup: gaps,
        components,
        targets: (0..m).collect(),
    })
}

/// Final-window sup distance between two computed runs; backs the
/// two-run phase comparison for quasi-periodic coefficients and the
/// pairwise merging inspections.
pub fn window_sup_difference(
    ta: &Trajectory,
    tb: &Trajectory,
    window_frac: f64,
    threshold: f64,
) -> Result<ConvergenceReport> {
    if !(0.0..=1.0).contains(&window_frac) {
        return Err(Error::BadArgument(format!(
            "window fraction must lie in [0, 1], got {window_frac}"
        )));
    }
    let m = ta.dim();
    let targets: Vec<usize> = (0..m).collect();
    let mut report = compare_runs(m, ta, tb, &targets, threshold)?;
    // compare_runs uses a fixed 10% final window; recompute at the
    // requested fraction when it differs.
    if (window_frac - 0.1).abs() > 1e-12 {
        let start = (1.0 - window_frac) * ta.final_time();
        let mut final_sup = vec![0.0f64; m];
        for idx in 0..ta.len() {
            if ta.times()[idx] < start {
                continue;
            }
            for i in 0..m {
                final_sup[i] =
                    final_sup[i].max((ta.z_row(idx)[i] - tb.z_row(idx)[i]).abs());
            }
        }
        for (i, trace) in report.components.iter_mut().enumerate() {
            trace.final_sup = final_sup[i];
        }
        let worst = final_sup.iter().fold(0.0f64, |a, &v| a.max(v));
        report.verdict = if worst < threshold { Verdict::Pass } else { Verdict::Fail };
        report.reason =
            format!("final-window difference {worst:e} vs threshold {threshold:e}");
    }
    Ok(report)
}
