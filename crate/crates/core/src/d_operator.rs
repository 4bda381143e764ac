//! The neutral operator D, its convolution lift, and their inverses.
//!
//! D maps a history to the vector Dx = x(0) − ∫ [dν(s)] x(s), with ν a
//! kernel of measures carrying no mass at 0 (atomic at zero). The lift
//! D̂ applies D at every shift: (D̂x)(s) = Dx_s. When the kernel is
//! contractive (max row variation c < 1) the lift is invertible; the
//! inverse is computed either by Picard iteration x ← h + ν⊛x or by
//! integrating against the Neumann-series measure μ*, and the two
//! routes are kept as mutual oracles.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::history::{HistoryFn, HistoryView};
use crate::integrator::{IntegratorOptions, Trajectory};
use crate::measures::{neumann_inverse, Kernel, NeumannSeries};
use serde::Serialize;
use std::sync::OnceLock;

/// Internal tolerance for the cached μ* series.
const MU_STAR_TOL: f64 = 1e-12;

/// Tolerance for the Dφ = h(0) compatibility gate of forward solving.
const COMPAT_TOL: f64 = 1e-9;

#[derive(Debug)]
pub struct DOperator {
    kernel: Kernel,
    mu_star: OnceLock<NeumannSeries>,
}

impl Clone for DOperator {
    fn clone(&self) -> Self {
        let mu_star = OnceLock::new();
        if let Some(series) = self.mu_star.get() {
            let _ = mu_star.set(series.clone());
        }
        DOperator { kernel: self.kernel.clone(), mu_star }
    }
}

impl DOperator {
    /// Wrap a kernel as a D-operator. Atoms at 0 are rejected: D must be
    /// atomic at zero for forward stepping to be explicit.
    pub fn new(kernel: Kernel) -> Result<Self> {
        if !kernel.no_mass_at_zero() {
            return Err(Error::InvalidModel(
                "neutral kernel carries an atom at 0; D would not be atomic at zero".into(),
            ));
        }
        Ok(DOperator { kernel, mu_star: OnceLock::new() })
    }

    /// D with ν = 0, i.e. Dx = x(0).
    pub fn identity(m: usize, grid: Grid) -> Self {
        DOperator { kernel: Kernel::zero(m, grid), mu_star: OnceLock::new() }
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn grid(&self) -> &Grid {
        self.kernel.grid()
    }

    /// Contraction constant c = max row variation of ν (tail included).
    pub fn contraction(&self) -> f64 {
        self.kernel.max_row_variation()
    }

    pub fn is_contractive(&self) -> bool {
        self.contraction() < 1.0
    }

    /// Dx on any history view (unchecked grids; views are grid-free).
    pub fn apply_d_view<V: HistoryView + ?Sized>(&self, x: &V) -> Vec<f64> {
        let m = self.dim();
        (0..m)
            .map(|i| {
                let mut acc = x.value(i, 0.0);
                for j in 0..m {
                    if let Some(nu) = self.kernel.get(i, j) {
                        acc -= nu.integrate_with_tail(|s| x.value(j, s), x.far_past(j));
                    }
                }
                acc
            })
            .collect()
    }

    /// Dx = x(0) − ∫ [dν] x.
    pub fn apply_d(&self, x: &HistoryFn) -> Result<Vec<f64>> {
        self.grid().ensure_same(x.grid(), "apply D")?;
        Ok(self.apply_d_view(x))
    }

    /// D̂x, the history s ↦ Dx_s, sampled on the grid. Arguments below the
    /// horizon use the constant far-past extension of x.
    pub fn apply_dhat(&self, x: &HistoryFn) -> Result<HistoryFn> {
        self.grid().ensure_same(x.grid(), "apply lifted D")?;
        let grid = *self.grid();
        let m = self.dim();
        let mut samples = vec![vec![0.0; grid.samples()]; m];
        for idx in 0..grid.samples() {
            let shift = grid.location(idx);
            for (i, row) in samples.iter_mut().enumerate() {
                let mut acc = x.value(i, shift);
                for j in 0..m {
                    if let Some(nu) = self.kernel.get(i, j) {
                        acc -= nu
                            .integrate_with_tail(|s| x.value(j, s + shift), x.far_past(j));
                    }
                }
                row[idx] = acc;
            }
        }
        let pre = self.far_image(&(0..m).map(|c| x.far_past(c)).collect::<Vec<_>>());
        HistoryFn::from_samples(grid, samples, pre)
    }

    /// Image of a constant history under D: (I − N) v with N the matrix of
    /// total kernel masses.
    fn far_image(&self, v: &[f64]) -> Vec<f64> {
        let m = self.dim();
        (0..m)
            .map(|i| {
                let mut acc = v[i];
                for (j, vj) in v.iter().enumerate() {
                    if let Some(nu) = self.kernel.get(i, j) {
                        acc -= nu.total_full() * vj;
                    }
                }
                acc
            })
            .collect()
    }

    /// Constant far-past value of D̂⁻¹h: solves (I − N) v = far(h).
    fn far_preimage(&self, far_h: &[f64]) -> Result<Vec<f64>> {
        let m = self.dim();
        let mut a = vec![vec![0.0; m]; m];
        for (i, row) in a.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                let mass =
                    self.kernel.get(i, j).map(|nu| nu.total_full()).unwrap_or(0.0);
                *entry = if i == j { 1.0 - mass } else { -mass };
            }
        }
        solve_linear(a, far_h.to_vec())
    }

    /// D̂⁻¹h by Picard iteration x ← h + ν⊛x. The returned x satisfies
    /// sup_norm(D̂x − h) ≤ tol in the grid semantics, and
    /// sup_norm(x) ≤ sup_norm(h)/(1−c).
    pub fn invert_dhat(&self, h: &HistoryFn, tol: f64) -> Result<HistoryFn> {
        self.grid().ensure_same(h.grid(), "invert lifted D")?;
        if !(tol > 0.0) {
            return Err(Error::BadArgument(format!("tolerance must be positive, got {tol}")));
        }
        let c = self.contraction();
        if c >= 1.0 {
            return Err(Error::NotContractive { row_sum: c });
        }
        let grid = *self.grid();
        let m = self.dim();
        let far = self.far_preimage(&(0..m).map(|c| h.far_past(c)).collect::<Vec<_>>())?;

        // Residual identity: after x' = h + ν⊛x, D̂x' − h = ν⊛(x − x'),
        // so sup residual ≤ c · (iteration delta).
        let max_iters =
            if c == 0.0 { 2 } else { (tol.ln() / c.ln()).ceil().max(1.0) as usize + 64 };
        let mut x =
            HistoryFn::from_samples(grid, (0..m).map(|c| h.samples(c).to_vec()).collect(), far)?;
        for iter in 1..=max_iters {
            let next = self.picard_step(h, &x)?;
            let delta = crate::history::sup_distance(&next, &x)?;
            x = next;
            if c * delta <= tol {
                return Ok(x);
            }
            if iter == max_iters {
                return Err(Error::NoConvergence { iters: iter, delta: c * delta, tol });
            }
        }
        Ok(x)
    }

    /// One sweep of x ← h + ν⊛x on the grid, keeping x's far-past constant.
    fn picard_step(&self, h: &HistoryFn, x: &HistoryFn) -> Result<HistoryFn> {
        let grid = *self.grid();
        let m = self.dim();
        let mut samples = vec![vec![0.0; grid.samples()]; m];
        for idx in 0..grid.samples() {
            let shift = grid.location(idx);
            for (i, row) in samples.iter_mut().enumerate() {
                let mut acc = h.value(i, shift);
                for j in 0..m {
                    if let Some(nu) = self.kernel.get(i, j) {
                        acc += nu
                            .integrate_with_tail(|s| x.value(j, s + shift), x.far_past(j));
                    }
                }
                row[idx] = acc;
            }
        }
        let pre = (0..m).map(|c| x.far_past(c)).collect();
        HistoryFn::from_samples(grid, samples, pre)
    }

    /// Cached Neumann series for the μ* route.
    pub fn mu_star(&self) -> Result<&NeumannSeries> {
        if let Some(series) = self.mu_star.get() {
            return Ok(series);
        }
        let series = neumann_inverse(&self.kernel, MU_STAR_TOL)?;
        Ok(self.mu_star.get_or_init(|| series))
    }

    /// D*x = D̂⁻¹x(0), computed both through the Picard inverse and through
    /// integration against μ*; the two routes are returned side by side.
    pub fn dstar_apply(&self, x: &HistoryFn, tol: f64) -> Result<DStarValue> {
        let inv = self.invert_dhat(x, tol)?;
        let via_inverse = inv.head();
        let series = self.mu_star()?;
        let m = self.dim();
        let via_measure: Vec<f64> = (0..m)
            .map(|i| {
                let mut acc = 0.0;
                for j in 0..m {
                    if let Some(mu) = series.kernel.get(i, j) {
                        acc += mu.integrate_with_tail(|s| x.value(j, s), x.far_past(j));
                    }
                }
                acc
            })
            .collect();
        let max_discrepancy = via_inverse
            .iter()
            .zip(&via_measure)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        Ok(DStarValue { value: via_measure, via_inverse, max_discrepancy })
    }

    /// Replace x(0) so that Dx equals `target` exactly (up to tol 1e−12).
    /// Useful for building compatible initial data.
    pub fn adjust_head(&self, x: &HistoryFn, target: &[f64]) -> Result<HistoryFn> {
        self.grid().ensure_same(x.grid(), "adjust head")?;
        let m = self.dim();
        if target.len() != m {
            return Err(Error::BadArgument(format!(
                "target has {} components, operator has {m}",
                target.len()
            )));
        }
        let mut head = (0..m).map(|c| x.value(c, 0.0)).collect::<Vec<_>>();
        for iter in 1..=200 {
            let view = OverrideHead { base: x, head: &head };
            let mut next = vec![0.0; m];
            for (i, slot) in next.iter_mut().enumerate() {
                let mut acc = target[i];
                for j in 0..m {
                    if let Some(nu) = self.kernel.get(i, j) {
                        acc += nu.integrate_with_tail(|s| view.value(j, s), view.far_past(j));
                    }
                }
                *slot = acc;
            }
            let delta =
                head.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            head = next;
            if delta <= 1e-12 {
                let mut samples: Vec<Vec<f64>> =
                    (0..m).map(|c| x.samples(c).to_vec()).collect();
                for (c, row) in samples.iter_mut().enumerate() {
                    *row.last_mut().unwrap() = head[c];
                }
                let pre = (0..m).map(|c| x.far_past(c)).collect();
                return HistoryFn::from_samples(*x.grid(), samples, pre);
            }
            if iter == 200 {
                break;
            }
        }
        Err(Error::NoConvergence { iters: 200, delta: f64::NAN, tol: 1e-12 })
    }

    /// Solve Dx_t = h(t) forward from x_0 = φ by the explicit neutral
    /// recursion x(tₙ) = h(tₙ) + Σ ∫[dν] x(tₙ + s). Requires Dφ = h(0).
    pub fn solve_forward<F: Fn(f64) -> Vec<f64>>(
        &self,
        phi: &HistoryFn,
        forcing: F,
        opts: &IntegratorOptions,
    ) -> Result<Trajectory> {
        self.grid().ensure_same(phi.grid(), "solve forward")?;
        let w0 = forcing(0.0);
        if w0.len() != self.dim() {
            return Err(Error::BadArgument(format!(
                "forcing returns {} components, operator has {}",
                w0.len(),
                self.dim()
            )));
        }
        let d_phi = self.apply_d_view(phi);
        let mismatch =
            d_phi.iter().zip(&w0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = 1.0 + w0.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if mismatch > COMPAT_TOL * scale {
            return Err(Error::IncompatibleInitialData(format!(
                "D(initial) differs from forcing at 0 by {mismatch:e}"
            )));
        }
        crate::integrator::run_neutral_recursion(self, phi, forcing, opts)
    }

    /// Decay envelope and gain constants for the homogeneous problem.
    ///
    /// Contractive kernels get the certified envelope c(t) = c^⌊t/R⌋ with R
    /// the deepest kernel support (provable by induction on R-blocks) along
    /// with k = 1/(1−c) and finite-interval constants 2/(1−c). Otherwise the
    /// estimate is fitted from `n_basis` seeded homogeneous solves and
    /// labeled uncertified.
    pub fn estimate_stability(&self, n_basis: usize, t_max: f64) -> Result<StabilityEstimate> {
        let c = self.contraction();
        let grid = *self.grid();
        let h = grid.step();
        let n_times = (t_max / h).round().max(1.0) as usize;
        let times: Vec<f64> = (0..=n_times).map(|k| k as f64 * h).collect();

        if c < 1.0 {
            let r = self.deepest_support().max(h);
            let envelope: Vec<f64> = times
                .iter()
                .map(|&t| if c == 0.0 { if t > 0.0 { 0.0 } else { 1.0 } } else { c.powi((t / r).floor() as i32) })
                .collect();
            let k = 1.0 / (1.0 - c);
            return Ok(StabilityEstimate {
                certified: true,
                contraction: c,
                times,
                envelope,
                k,
                k_t1: 2.0 / (1.0 - c),
                k_t2: 2.0 / (1.0 - c),
                note: format!("certified: contraction {c} over deepest support {r}"),
            });
        }

        // Empirical branch: seeded homogeneous runs, envelope of |x(t)|/‖φ‖.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed_ab1e);
        let m = self.dim();
        let mut envelope = vec![0.0f64; times.len()];
        let opts = IntegratorOptions::new(crate::integrator::Scheme::Euler, h, t_max);
        for _ in 0..n_basis.max(1) {
            let modes: Vec<(f64, f64, f64)> = (0..4)
                .map(|_| {
                    (rng.gen_range(-1.0..1.0), rng.gen_range(0.1..2.0), rng.gen_range(0.0..6.28))
                })
                .collect();
            let raw = HistoryFn::from_fn(grid, m, |c, s| {
                modes.iter().map(|&(a, w, p)| a * (w * s + p + c as f64).cos()).sum()
            });
            let phi = self.adjust_head(&raw, &vec![0.0; m])?;
            let norm = phi.sup_norm().max(1e-12);
            let traj = self.solve_forward(&phi, |_| vec![0.0; m], &opts)?;
            for (idx, env) in envelope.iter_mut().enumerate() {
                let amp = traj.z_row(idx).iter().fold(0.0f64, |a, v| a.max(v.abs()));
                *env = env.max(amp / norm);
            }
        }
        let peak = envelope.iter().fold(0.0f64, |a, &v| a.max(v)).max(1.0);
        Ok(StabilityEstimate {
            certified: false,
            contraction: c,
            times,
            envelope,
            k: peak,
            k_t1: 2.0 * peak,
            k_t2: 2.0 * peak,
            note: format!(
                "uncertified: contraction {c} >= 1, envelope fitted from {} seeded homogeneous runs",
                n_basis.max(1)
            ),
        })
    }

    /// Deepest time the kernel reaches into the past (atom depth, density
    /// support, or the full horizon when tail mass is declared).
    fn deepest_support(&self) -> f64 {
        let grid = self.grid();
        let mut deepest = 0.0f64;
        let m = self.dim();
        for i in 0..m {
            for j in 0..m {
                if let Some(nu) = self.kernel.get(i, j) {
                    if nu.tail() != 0.0 {
                        return grid.horizon();
                    }
                    for &(d, _) in nu.atoms() {
                        deepest = deepest.max(d as f64 * grid.step());
                    }
                    if let Some(dens) = nu.density() {
                        for (idx, &v) in dens.iter().enumerate() {
                            if v != 0.0 {
                                deepest = deepest.max(-grid.location(idx));
                                break;
                            }
                        }
                    }
                }
            }
        }
        deepest
    }
}

/// The two computations of D* side by side.
#[derive(Debug, Clone, Serialize)]
pub struct DStarValue {
    /// μ*-quadrature route (the returned value of record).
    pub value: Vec<f64>,
    /// Picard-inverse route, kept as an oracle.
    pub via_inverse: Vec<f64>,
    pub max_discrepancy: f64,
}

/// Decay envelope c(t) with gain constants; `certified` marks the
/// contraction-backed branch.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityEstimate {
    pub certified: bool,
    pub contraction: f64,
    pub times: Vec<f64>,
    pub envelope: Vec<f64>,
    /// Gain of the nonhomogeneous term: sup|x| ≤ c(t)‖φ‖ + k·sup|h|.
    pub k: f64,
    pub k_t1: f64,
    pub k_t2: f64,
    pub note: String,
}

/// History with its value at 0 replaced; queries elsewhere fall through.
struct OverrideHead<'a> {
    base: &'a HistoryFn,
    head: &'a [f64],
}

impl HistoryView for OverrideHead<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn value(&self, comp: usize, s: f64) -> f64 {
        if s.abs() <= 1e-12 {
            self.head[comp]
        } else {
            self.base.value(comp, s)
        }
    }

    fn far_past(&self, comp: usize) -> f64 {
        self.base.far_past(comp)
    }
}

/// Gaussian elimination with partial pivoting for the small far-past systems.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-14 {
            return Err(Error::NotContractive { row_sum: 1.0 });
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for col in row + 1..n {
            acc -= a[row][col] * x[col];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::ScalarMeasure;

    fn scalar_op(grid: Grid, depth: f64, mass: f64) -> DOperator {
        let mut nu = Kernel::zero(1, grid);
        nu.set(0, 0, ScalarMeasure::single_atom(grid, depth, mass).unwrap()).unwrap();
        DOperator::new(nu).unwrap()
    }

    #[test]
    fn d_of_identity_operator_is_head() {
        let grid = Grid::new(0.5, 4.0).unwrap();
        let op = DOperator::identity(2, grid);
        let x = HistoryFn::from_fn(grid, 2, |c, s| c as f64 + s);
        let d = op.apply_d(&x).unwrap();
        assert_eq!(d, vec![0.0, 1.0]);
    }

    #[test]
    fn d_on_constants_scales_by_one_minus_mass() {
        let grid = Grid::new(0.5, 4.0).unwrap();
        let op = scalar_op(grid, -1.0, 0.4);
        let x = HistoryFn::constant(grid, &[3.0]);
        let d = op.apply_d(&x).unwrap();
        assert!((d[0] - 3.0 * 0.6).abs() < 1e-12);
    }

    #[test]
    fn d_on_ramp() {
        let grid = Grid::new(0.5, 10.0).unwrap();
        let op = scalar_op(grid, -1.0, 0.5);
        let x = HistoryFn::from_fn(grid, 1, |_, s| s);
        let d = op.apply_d(&x).unwrap();
        assert!((d[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dhat_on_ramp_interior_and_bottom() {
        let grid = Grid::new(0.5, 10.0).unwrap();
        let op = scalar_op(grid, -1.0, 0.5);
        let x = HistoryFn::from_fn(grid, 1, |_, s| s);
        let y = op.apply_dhat(&x).unwrap();
        // Interior: s − 0.5(s−1) = 0.5s + 0.5 while s−1 ≥ −10.
        assert!((y.value(0, -5.0) - (-2.0)).abs() < 1e-12);
        assert!((y.value(0, 0.0) - 0.5).abs() < 1e-12);
        // Bottom: x(−10.5) is the constant −10, so D̂x(−10) = −10 + 5.
        assert!((y.value(0, -10.0) - (-5.0)).abs() < 1e-12);
    }

    #[test]
    fn invert_constant_is_geometric() {
        let grid = Grid::new(0.5, 6.0).unwrap();
        let op = scalar_op(grid, -1.0, 0.5);
        let h = HistoryFn::constant(grid, &[1.0]);
        let x = op.invert_dhat(&h, 1e-12).unwrap();
        assert!((x.value(0, 0.0) - 2.0).abs() < 1e-9);
        assert!((x.far_past(0) - 2.0).abs() < 1e-12);
        let back = op.apply_dhat(&x).unwrap();
        assert!(crate::history::sup_distance(&back, &h).unwrap() <= 1e-12);
    }

    #[test]
    fn invert_requires_contraction() {
        let grid = Grid::new(0.5, 6.0).unwrap();
        let op = scalar_op(grid, -1.0, 1.0);
        let h = HistoryFn::constant(grid, &[1.0]);
        assert!(matches!(op.invert_dhat(&h, 1e-10), Err(Error::NotContractive { .. })));
    }

    #[test]
    fn dstar_routes_agree_on_constant() {
        let grid = Grid::new(0.5, 8.0).unwrap();
        let op = scalar_op(grid, -1.0, 0.3);
        let x = HistoryFn::constant(grid, &[1.0]);
        let d = op.dstar_apply(&x, 1e-12).unwrap();
        assert!((d.value[0] - 1.0 / 0.7).abs() < 1e-9);
        assert!(d.max_discrepancy < 1e-9);
    }

    #[test]
    fn adjust_head_zeroes_d() {
        let grid = Grid::new(0.25, 5.0).unwrap();
        let op = scalar_op(grid, -1.0, 0.5);
        let raw = HistoryFn::from_fn(grid, 1, |_, s| (s * 1.3).cos());
        let phi = op.adjust_head(&raw, &[0.0]).unwrap();
        let d = op.apply_d(&phi).unwrap();
        assert!(d[0].abs() < 1e-12);
    }

    #[test]
    fn certified_stability_envelope() {
        let grid = Grid::new(0.5, 6.0).unwrap();
        let op = scalar_op(grid, -1.0, 0.5);
        let est = op.estimate_stability(0, 4.0).unwrap();
        assert!(est.certified);
        assert!((est.k - 2.0).abs() < 1e-12);
        // Envelope at t = 2.5 is 0.5² = 0.25.
        let idx = est.times.iter().position(|&t| (t - 2.5).abs() < 1e-12).unwrap();
        assert!((est.envelope[idx] - 0.25).abs() < 1e-12);
    }
}
