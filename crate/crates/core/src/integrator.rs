//! Time stepping for neutral compartment systems.
//!
//! The state derivative enters through w(t) = D z_t: explicit Runge-Kutta
//! schemes advance w, and after every stage the state value is recovered
//! from the neutral relation z(t) = w(t) + Σ ∫[dν] z(t + s) by a Picard
//! iteration over the stored past. With an atom-free-at-zero kernel the
//! relation is explicit up to the quadrature weight at 0, so the iteration
//! contracts at least as fast as the kernel itself.
//!
//! Two routes to the same trajectory are provided: the direct route above,
//! and a transformed route that rewrites the system as an ordinary delay
//! equation for y = D̂z, advances y, and maps back through the inverse
//! convolution operator. Agreement of the two routes is a strong
//! correctness check on both.

use crate::d_operator::DOperator;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::history::{HistoryFn, HistoryView};
use crate::model::CompartmentalModel;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Euler,
    Heun,
    Rk4,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Euler => "euler",
            Scheme::Heun => "heun",
            Scheme::Rk4 => "rk4",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Scheme::Euler),
            "heun" => Ok(Scheme::Heun),
            "rk4" => Ok(Scheme::Rk4),
            other => Err(Error::BadArgument(format!(
                "unknown scheme '{other}' (expected euler, heun, or rk4)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub scheme: Scheme,
    /// Step size; must equal the grid spacing or an integer divisor of it,
    /// so that every grid point of every history window lands on the
    /// computed lattice.
    pub step: f64,
    pub horizon: f64,
    /// Per-step recovery target for |w(t) − D z_t|.
    pub recovery_tol: f64,
    pub recovery_max_iters: usize,
    /// Record the total-mass functional at every accepted step.
    pub record_mass: bool,
}

impl IntegratorOptions {
    pub fn new(scheme: Scheme, step: f64, horizon: f64) -> Self {
        IntegratorOptions {
            scheme,
            step,
            horizon,
            recovery_tol: 1e-12,
            recovery_max_iters: 100,
            record_mass: true,
        }
    }

    fn checked_step(&self, grid: &Grid) -> Result<f64> {
        if !(self.step > 0.0) {
            return Err(Error::BadArgument(format!("step must be positive, got {}", self.step)));
        }
        let h = grid.step();
        let k = (h / self.step).round();
        if k < 1.0 || (k * self.step - h).abs() > 1e-9 * h.max(1.0) {
            return Err(Error::BadArgument(format!(
                "step {} must be the grid spacing {h} or an integer divisor of it",
                self.step
            )));
        }
        Ok(self.step)
    }

    fn step_count(&self) -> Result<usize> {
        if !(self.horizon > 0.0) {
            return Err(Error::BadArgument(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        let n = (self.horizon / self.step).round();
        if (n * self.step - self.horizon).abs() > 1e-6 * self.horizon.max(1.0) {
            return Err(Error::BadArgument(format!(
                "horizon {} is not a whole number of steps of {}",
                self.horizon, self.step
            )));
        }
        Ok(n.max(1.0) as usize)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub scheme: Scheme,
    pub step: f64,
    pub recovery_tol: f64,
    /// Worst iteration count any single recovery needed.
    pub max_recovery_iters: usize,
    /// Direct stepping ("direct") or the convolution-transformed route
    /// ("transformed").
    pub route: String,
    pub warnings: Vec<String>,
}

/// Computed solution on a uniform time lattice, plus the initial history
/// so that full state windows can be reconstructed at any lattice time.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    /// z[i][c]: component c at times[i].
    z: Vec<Vec<f64>>,
    /// w[i][c] = (D z_t)_c at times[i], up to the recovery tolerance.
    w: Vec<Vec<f64>>,
    mass: Option<Vec<f64>>,
    initial: HistoryFn,
    meta: RunMeta,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.initial.dim()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn step(&self) -> f64 {
        self.meta.step
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("nonempty trajectory")
    }

    pub fn z_row(&self, idx: usize) -> &[f64] {
        &self.z[idx]
    }

    pub fn w_row(&self, idx: usize) -> &[f64] {
        &self.w[idx]
    }

    pub fn mass(&self) -> Option<&[f64]> {
        self.mass.as_deref()
    }

    pub fn initial(&self) -> &HistoryFn {
        &self.initial
    }

    pub fn meta(&self) -> &RunMeta {
        &self.meta
    }

    /// Lattice index of time t; t must sit on the lattice.
    pub fn index_at(&self, t: f64) -> Result<usize> {
        let tau = self.meta.step;
        let pos = t / tau;
        let idx = pos.round();
        if (t - idx * tau).abs() > 1e-9 * t.abs().max(1.0) || idx < 0.0 {
            return Err(Error::OffGrid { value: t, step: tau });
        }
        let idx = idx as usize;
        if idx >= self.times.len() {
            return Err(Error::HorizonExceeded { requested: t, available: self.final_time() });
        }
        Ok(idx)
    }

    /// State window z_t ending at lattice time t. Past the window bottom
    /// the history is extended by a constant: for t = 0 the original
    /// far-past value, otherwise the window-bottom value. Exact whenever
    /// the kernels place no mass below the horizon.
    pub fn history_at(&self, t: f64) -> Result<HistoryFn> {
        let idx = self.index_at(t)?;
        if idx == 0 {
            return Ok(self.initial.clone());
        }
        let t = self.times[idx];
        let grid = *self.initial.grid();
        let view = RunView {
            init: &self.initial,
            rows: &self.z,
            tau: self.meta.step,
            now: t,
            stage: None,
        };
        let m = self.dim();
        let n = grid.n_steps();
        let samples: Vec<Vec<f64>> = (0..m)
            .map(|c| (0..=n).map(|j| view.value(c, grid.location(j))).collect())
            .collect();
        let pre: Vec<f64> = (0..m).map(|c| view.value(c, -grid.horizon())).collect();
        HistoryFn::from_samples(grid, samples, pre)
    }
}

/// Read-only state history assembled from the initial window plus the
/// computed rows, with an optional provisional stage value ahead of the
/// last accepted row. Times between lattice points interpolate linearly.
pub(crate) struct RunView<'a> {
    pub(crate) init: &'a HistoryFn,
    pub(crate) rows: &'a [Vec<f64>],
    pub(crate) tau: f64,
    /// The view represents the window s ↦ z(now + s), s ≤ 0.
    pub(crate) now: f64,
    /// (absolute time, provisional values) strictly after the last row.
    pub(crate) stage: Option<(f64, &'a [f64])>,
}

impl HistoryView for RunView<'_> {
    fn dim(&self) -> usize {
        self.init.dim()
    }

    fn value(&self, comp: usize, s: f64) -> f64 {
        let u = self.now + s;
        if u <= 0.0 {
            return self.init.value(comp, u);
        }
        let last = self.rows.len() - 1;
        let t_last = last as f64 * self.tau;
        if last > 0 && u <= t_last + 1e-9 * self.tau {
            let pos = u / self.tau;
            let near = pos.round();
            if (pos - near).abs() <= 1e-6 {
                return self.rows[(near as usize).min(last)][comp];
            }
            let i0 = (pos.floor() as usize).min(last - 1);
            let frac = pos - i0 as f64;
            let a = self.rows[i0][comp];
            let b = self.rows[i0 + 1][comp];
            return a + frac * (b - a);
        }
        match self.stage {
            Some((st, vals)) if st > t_last => {
                let frac = ((u - t_last) / (st - t_last)).clamp(0.0, 1.0);
                let a = self.rows[last][comp];
                a + frac * (vals[comp] - a)
            }
            _ => self.rows[last][comp],
        }
    }

    fn far_past(&self, comp: usize) -> f64 {
        self.init.pre(comp)
    }
}

/// Solve z = w + (z(0) − D z_t) for the head value at time t by Picard
/// iteration, holding everything strictly in the past fixed. Returns the
/// head and the iteration count.
#[allow(clippy::too_many_arguments)]
fn recover(
    op: &DOperator,
    init: &HistoryFn,
    rows: &[Vec<f64>],
    tau: f64,
    t: f64,
    w: &[f64],
    mut guess: Vec<f64>,
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, usize)> {
    let m = w.len();
    let mut last_delta = f64::INFINITY;
    for iter in 1..=max_iters {
        let d = {
            let view = RunView { init, rows, tau, now: t, stage: Some((t, &guess)) };
            op.apply_d_view(&view)
        };
        let mut delta = 0.0f64;
        for i in 0..m {
            let next = w[i] + (guess[i] - d[i]);
            delta = delta.max((next - guess[i]).abs());
            guess[i] = next;
        }
        if delta <= tol {
            return Ok((guess, iter));
        }
        last_delta = delta;
    }
    Err(Error::NoConvergence { iters: max_iters, delta: last_delta, tol })
}

/// Integrate the compartment system from the initial history `phi` over
/// `opts.horizon`. Structural validation runs first: a failed mass or
/// contraction check aborts, everything else is carried as a warning.
pub fn integrate(
    model: &CompartmentalModel,
    phi: &HistoryFn,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    model.grid().ensure_same(phi.grid(), "integrate")?;
    if phi.dim() != model.m() {
        return Err(Error::BadArgument(format!(
            "initial history has {} components, model has {}",
            phi.dim(),
            model.m()
        )));
    }
    let report = model.validate();
    if report.has_hard_failures() {
        return Err(Error::ValidationFailure(report.warnings().join("; ")));
    }
    let warnings = report.warnings();

    let op = model.d_operator();
    let tau = opts.checked_step(model.grid())?;
    let n_total = opts.step_count()?;
    let rtol = opts.recovery_tol;
    let rmax = opts.recovery_max_iters;

    let mut rows: Vec<Vec<f64>> = vec![phi.head()];
    let mut w_rows: Vec<Vec<f64>> = vec![op.apply_d_view(phi)];
    let mut times: Vec<f64> = vec![0.0];
    let mut mass: Option<Vec<f64>> =
        opts.record_mass.then(|| vec![model.total_mass_view(0.0, phi)]);
    let mut worst_recovery = 0usize;

    let eval = |t: f64, rows: &[Vec<f64>], stage: Option<(f64, &[f64])>| -> Vec<f64> {
        let view = RunView { init: phi, rows, tau, now: t, stage };
        model.eval_f_view(t, &view)
    };

    for n in 0..n_total {
        let t = n as f64 * tau;
        let t1 = (n + 1) as f64 * tau;
        let w = w_rows[n].clone();
        let last = rows[n].clone();

        let (w_new, z_new) = match opts.scheme {
            Scheme::Euler => {
                let k1 = eval(t, &rows, None);
                let w1 = axpy(&w, tau, &k1);
                let (z1, it) = recover(op, phi, &rows, tau, t1, &w1, last, rtol, rmax)?;
                worst_recovery = worst_recovery.max(it);
                (w1, z1)
            }
            Scheme::Heun => {
                let k1 = eval(t, &rows, None);
                let wp = axpy(&w, tau, &k1);
                let (zp, it1) = recover(op, phi, &rows, tau, t1, &wp, last, rtol, rmax)?;
                let k2 = eval(t1, &rows, Some((t1, &zp)));
                let mut w1 = w.clone();
                for i in 0..w1.len() {
                    w1[i] += 0.5 * tau * (k1[i] + k2[i]);
                }
                let (z1, it2) = recover(op, phi, &rows, tau, t1, &w1, zp, rtol, rmax)?;
                worst_recovery = worst_recovery.max(it1).max(it2);
                (w1, z1)
            }
            Scheme::Rk4 => {
                let th = t + 0.5 * tau;
                let k1 = eval(t, &rows, None);
                let wa = axpy(&w, 0.5 * tau, &k1);
                let (za, ia) = recover(op, phi, &rows, tau, th, &wa, last, rtol, rmax)?;
                let k2 = eval(th, &rows, Some((th, &za)));
                let wb = axpy(&w, 0.5 * tau, &k2);
                let (zb, ib) = recover(op, phi, &rows, tau, th, &wb, za, rtol, rmax)?;
                let k3 = eval(th, &rows, Some((th, &zb)));
                let wc = axpy(&w, tau, &k3);
                let (zc, ic) = recover(op, phi, &rows, tau, t1, &wc, zb, rtol, rmax)?;
                let k4 = eval(t1, &rows, Some((t1, &zc)));
                let mut w1 = w.clone();
                for i in 0..w1.len() {
                    w1[i] += tau / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
                let (z1, id) = recover(op, phi, &rows, tau, t1, &w1, zc, rtol, rmax)?;
                worst_recovery = worst_recovery.max(ia).max(ib).max(ic).max(id);
                (w1, z1)
            }
        };

        rows.push(z_new);
        w_rows.push(w_new);
        times.push(t1);
        if let Some(mass) = mass.as_mut() {
            let view = RunView { init: phi, rows: &rows, tau, now: t1, stage: None };
            mass.push(model.total_mass_view(t1, &view));
        }
    }

    Ok(Trajectory {
        times,
        z: rows,
        w: w_rows,
        mass,
        initial: phi.clone(),
        meta: RunMeta {
            scheme: opts.scheme,
            step: tau,
            recovery_tol: rtol,
            max_recovery_iters: worst_recovery,
            route: "direct".into(),
            warnings,
        },
    })
}

/// Advance the purely neutral relation D z_t = forcing(t) from z_0 = phi:
/// no vector field, w is prescribed directly and each step is a single
/// recovery. Used for homogeneous decay studies and forward continuation.
pub(crate) fn run_neutral_recursion<F: Fn(f64) -> Vec<f64>>(
    op: &DOperator,
    phi: &HistoryFn,
    forcing: F,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    op.grid().ensure_same(phi.grid(), "neutral recursion")?;
    let tau = opts.checked_step(op.grid())?;
    let n_total = opts.step_count()?;

    let mut rows: Vec<Vec<f64>> = vec![phi.head()];
    let mut w_rows: Vec<Vec<f64>> = vec![forcing(0.0)];
    let mut times: Vec<f64> = vec![0.0];
    let mut worst_recovery = 0usize;

    for n in 1..=n_total {
        let t = n as f64 * tau;
        let w = forcing(t);
        let guess = rows[n - 1].clone();
        let (z, it) = recover(
            op,
            phi,
            &rows,
            tau,
            t,
            &w,
            guess,
            opts.recovery_tol,
            opts.recovery_max_iters,
        )?;
        worst_recovery = worst_recovery.max(it);
        rows.push(z);
        w_rows.push(w);
        times.push(t);
    }

    Ok(Trajectory {
        times,
        z: rows,
        w: w_rows,
        mass: None,
        initial: phi.clone(),
        meta: RunMeta {
            scheme: opts.scheme,
            step: tau,
            recovery_tol: opts.recovery_tol,
            max_recovery_iters: worst_recovery,
            route: "direct".into(),
            warnings: Vec::new(),
        },
    })
}

/// The system rewritten for y = D̂z: an ordinary delay equation
/// y'(t) = G(t, y_t) with G = F ∘ D̂⁻¹.
pub struct TransformedSystem<'a> {
    model: &'a CompartmentalModel,
}

pub fn transform_to_fde(model: &CompartmentalModel) -> TransformedSystem<'_> {
    TransformedSystem { model }
}

impl TransformedSystem<'_> {
    pub fn model(&self) -> &CompartmentalModel {
        self.model
    }

    /// G(t, y_t) = F(t, D̂⁻¹ y_t).
    pub fn eval_g(&self, t: f64, y_window: &HistoryFn, tol: f64) -> Result<Vec<f64>> {
        let z = self.model.d_operator().invert_dhat(y_window, tol)?;
        Ok(self.model.eval_f_view(t, &z))
    }

    /// Integrate in y coordinates and map every accepted step back to z.
    /// The result is directly comparable with [`integrate`].
    pub fn integrate(&self, phi: &HistoryFn, opts: &IntegratorOptions) -> Result<Trajectory> {
        let model = self.model;
        model.grid().ensure_same(phi.grid(), "transformed integrate")?;
        if phi.dim() != model.m() {
            return Err(Error::BadArgument(format!(
                "initial history has {} components, model has {}",
                phi.dim(),
                model.m()
            )));
        }
        let report = model.validate();
        if report.has_hard_failures() {
            return Err(Error::ValidationFailure(report.warnings().join("; ")));
        }
        let warnings = report.warnings();

        let op = model.d_operator();
        let grid = *model.grid();
        let tau = opts.checked_step(&grid)?;
        let n_total = opts.step_count()?;
        let rtol = opts.recovery_tol;
        let m = model.m();
        let n_grid = grid.n_steps();

        let y0 = op.apply_dhat(phi)?;
        let mut y_rows: Vec<Vec<f64>> = vec![y0.head()];
        let mut z_rows: Vec<Vec<f64>> = vec![phi.head()];
        let mut times: Vec<f64> = vec![0.0];
        let mut mass: Option<Vec<f64>> =
            opts.record_mass.then(|| vec![model.total_mass_view(0.0, phi)]);

        let window = |y_rows: &[Vec<f64>], now: f64, stage: Option<(f64, &[f64])>| -> HistoryFn {
            let view = RunView { init: &y0, rows: y_rows, tau, now, stage };
            let samples: Vec<Vec<f64>> = (0..m)
                .map(|c| (0..=n_grid).map(|j| view.value(c, grid.location(j))).collect())
                .collect();
            let pre: Vec<f64> = (0..m).map(|c| y0.pre(c)).collect();
            HistoryFn::from_samples(grid, samples, pre).expect("lattice-aligned window")
        };

        // D̂⁻¹ of the current y-window; starts as phi itself.
        let mut z_window = phi.clone();

        for n in 0..n_total {
            let t = n as f64 * tau;
            let t1 = (n + 1) as f64 * tau;
            let y = y_rows[n].clone();

            let g_at = |t_stage: f64,
                        y_rows: &[Vec<f64>],
                        stage: Option<(f64, &[f64])>|
             -> Result<Vec<f64>> {
                let win = window(y_rows, t_stage, stage);
                let z = op.invert_dhat(&win, rtol)?;
                Ok(model.eval_f_view(t_stage, &z))
            };

            let y1 = match opts.scheme {
                Scheme::Euler => {
                    let k1 = model.eval_f_view(t, &z_window);
                    axpy(&y, tau, &k1)
                }
                Scheme::Heun => {
                    let k1 = model.eval_f_view(t, &z_window);
                    let yp = axpy(&y, tau, &k1);
                    let k2 = g_at(t1, &y_rows, Some((t1, &yp)))?;
                    let mut y1 = y.clone();
                    for i in 0..m {
                        y1[i] += 0.5 * tau * (k1[i] + k2[i]);
                    }
                    y1
                }
                Scheme::Rk4 => {
                    let th = t + 0.5 * tau;
                    let k1 = model.eval_f_view(t, &z_window);
                    let ya = axpy(&y, 0.5 * tau, &k1);
                    let k2 = g_at(th, &y_rows, Some((th, &ya)))?;
                    let yb = axpy(&y, 0.5 * tau, &k2);
                    let k3 = g_at(th, &y_rows, Some((th, &yb)))?;
                    let yc = axpy(&y, tau, &k3);
                    let k4 = g_at(t1, &y_rows, Some((t1, &yc)))?;
                    let mut y1 = y.clone();
                    for i in 0..m {
                        y1[i] += tau / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                    }
                    y1
                }
            };

            y_rows.push(y1);
            times.push(t1);
            z_window = op.invert_dhat(&window(&y_rows, t1, None), rtol)?;
            z_rows.push(z_window.head());
            if let Some(mass) = mass.as_mut() {
                mass.push(model.total_mass_view(t1, &z_window));
            }
        }

        Ok(Trajectory {
            times,
            z: z_rows,
            w: y_rows,
            mass,
            initial: phi.clone(),
            meta: RunMeta {
                scheme: opts.scheme,
                step: tau,
                recovery_tol: rtol,
                max_recovery_iters: 0,
                route: "transformed".into(),
                warnings,
            },
        })
    }
}

fn axpy(base: &[f64], a: f64, dir: &[f64]) -> Vec<f64> {
    base.iter().zip(dir).map(|(b, d)| b + a * d).collect()
}
