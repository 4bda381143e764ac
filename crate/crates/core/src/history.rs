//! Histories: bounded uniformly continuous functions on (-inf, 0].
//!
//! A history stores grid samples on [-H, 0] per component plus one
//! constant per component for the unsampled past below -H. Evaluation
//! interpolates linearly between samples, so sup norms computed on
//! samples are exact for the represented function.

use crate::error::{Error, Result};
use crate::grid::{Grid, SNAP_TOL};
use serde::{Deserialize, Serialize};

/// Read access to a (possibly virtual) history, used so operators can run
/// directly over integrator state without copying windows.
pub trait HistoryView {
    fn dim(&self) -> usize;
    /// Value of component `comp` at time s ≤ 0.
    fn value(&self, comp: usize, s: f64) -> f64;
    /// Constant value of component `comp` before the sampled range.
    fn far_past(&self, comp: usize) -> f64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryFn {
    grid: Grid,
    dim: usize,
    /// Per component, oldest-first samples at -H, -H+h, …, 0.
    samples: Vec<Vec<f64>>,
    /// Per component constant for s < -H.
    pre: Vec<f64>,
}

impl HistoryFn {
    pub fn constant(grid: Grid, values: &[f64]) -> Self {
        let samples = values.iter().map(|&v| vec![v; grid.samples()]).collect();
        HistoryFn { grid, dim: values.len(), samples, pre: values.to_vec() }
    }

    /// Build from per-component sample vectors and far-past constants.
    pub fn from_samples(grid: Grid, samples: Vec<Vec<f64>>, pre: Vec<f64>) -> Result<Self> {
        if samples.len() != pre.len() {
            return Err(Error::BadArgument(format!(
                "{} sample rows but {} far-past constants",
                samples.len(),
                pre.len()
            )));
        }
        for row in &samples {
            if row.len() != grid.samples() {
                return Err(Error::GridMismatch(format!(
                    "history row has {} samples, grid wants {}",
                    row.len(),
                    grid.samples()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::BadArgument("history samples must be finite".into()));
            }
        }
        if pre.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadArgument("far-past constants must be finite".into()));
        }
        let dim = samples.len();
        Ok(HistoryFn { grid, dim, samples, pre })
    }

    /// Sample a closure (component, time) -> value; the far past takes the
    /// value at -H.
    pub fn from_fn<F: Fn(usize, f64) -> f64>(grid: Grid, dim: usize, f: F) -> Self {
        let samples: Vec<Vec<f64>> =
            (0..dim).map(|c| (0..grid.samples()).map(|i| f(c, grid.location(i))).collect()).collect();
        let pre = (0..dim).map(|c| f(c, -grid.horizon())).collect();
        HistoryFn { grid, dim, samples, pre }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self, comp: usize) -> &[f64] {
        &self.samples[comp]
    }

    pub fn pre(&self, comp: usize) -> f64 {
        self.pre[comp]
    }

    /// Values of all components at s = 0.
    pub fn head(&self) -> Vec<f64> {
        self.samples.iter().map(|row| *row.last().unwrap()).collect()
    }

    /// x_t for t ≤ 0: samples slide down, exposed past fills with the
    /// far-past constant.
    pub fn shift(&self, t: f64) -> Result<HistoryFn> {
        if t > self.grid.step() * SNAP_TOL {
            return Err(Error::BadArgument(format!("shift must be nonpositive, got {t}")));
        }
        let k = self.grid.depth_of(t.min(0.0))?;
        let n = self.grid.samples();
        let samples = (0..self.dim)
            .map(|c| {
                (0..n)
                    .map(|i| if i >= k { self.samples[c][i - k] } else { self.pre[c] })
                    .collect()
            })
            .collect();
        Ok(HistoryFn { grid: self.grid, dim: self.dim, samples, pre: self.pre.clone() })
    }

    pub fn sup_norm(&self) -> f64 {
        let mut sup = 0.0f64;
        for c in 0..self.dim {
            for &v in &self.samples[c] {
                sup = sup.max(v.abs());
            }
            sup = sup.max(self.pre[c].abs());
        }
        sup
    }

    pub fn add(&self, other: &HistoryFn) -> Result<HistoryFn> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &HistoryFn) -> Result<HistoryFn> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, k: f64) -> HistoryFn {
        let samples = self.samples.iter().map(|row| row.iter().map(|v| k * v).collect()).collect();
        let pre = self.pre.iter().map(|v| k * v).collect();
        HistoryFn { grid: self.grid, dim: self.dim, samples, pre }
    }

    fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &HistoryFn, f: F) -> Result<HistoryFn> {
        self.grid.ensure_same(&other.grid, "history combination")?;
        if self.dim != other.dim {
            return Err(Error::GridMismatch(format!(
                "history dimensions differ: {} vs {}",
                self.dim, other.dim
            )));
        }
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect())
            .collect();
        let pre = self.pre.iter().zip(&other.pre).map(|(a, b)| f(*a, *b)).collect();
        Ok(HistoryFn { grid: self.grid, dim: self.dim, samples, pre })
    }
}

impl HistoryView for HistoryFn {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, comp: usize, s: f64) -> f64 {
        let grid = &self.grid;
        if s < -grid.horizon() {
            return self.pre[comp];
        }
        let u = (s + grid.horizon()) / grid.step();
        let n = grid.n_steps();
        let i0 = u.floor().max(0.0) as usize;
        if i0 >= n {
            return self.samples[comp][n];
        }
        let frac = u - i0 as f64;
        if frac <= 1e-9 {
            self.samples[comp][i0]
        } else if frac >= 1.0 - 1e-9 {
            self.samples[comp][i0 + 1]
        } else {
            (1.0 - frac) * self.samples[comp][i0] + frac * self.samples[comp][i0 + 1]
        }
    }

    fn far_past(&self, comp: usize) -> f64 {
        self.pre[comp]
    }
}

/// Sup norm of x − y over samples and far-past constants.
pub fn sup_distance(x: &HistoryFn, y: &HistoryFn) -> Result<f64> {
    Ok(x.sub(y)?.sup_norm())
}

/// Compact-open metric d(x, y) = Σ_{n≥1} 2⁻ⁿ rₙ/(1+rₙ) with rₙ the sup of
/// |x−y| on [-n, 0]. The series is evaluated exactly up to n = ⌈H⌉ and the
/// remaining terms are collapsed into 2^{-⌈H⌉}·r/(1+r) with r the full sup,
/// which is exact whenever the difference attains its sup inside [-⌈H⌉, 0]
/// and an upper-biased approximation otherwise.
pub fn metric_d(x: &HistoryFn, y: &HistoryFn) -> Result<f64> {
    let diff = x.sub(y)?;
    let grid = diff.grid;
    let n_windows = grid.horizon().ceil() as usize;
    let full_sup = diff.sup_norm();
    let squash = |u: f64| u / (1.0 + u);

    // Suffix maxima over sample indices: peak[i] = sup over locations >= location(i).
    let n = grid.samples();
    let mut peak = vec![0.0f64; n];
    for i in (0..n).rev() {
        let mut here = 0.0f64;
        for c in 0..diff.dim {
            here = here.max(diff.samples[c][i].abs());
        }
        peak[i] = if i + 1 < n { here.max(peak[i + 1]) } else { here };
    }
    let pre_sup = diff.pre.iter().fold(0.0f64, |a, v| a.max(v.abs()));

    let mut total = 0.0;
    for w in 1..=n_windows {
        let depth = w as f64;
        let r = if depth >= grid.horizon() - SNAP_TOL {
            peak[0].max(pre_sup)
        } else {
            // First index at or below depth w.
            let idx = ((grid.horizon() - depth) / grid.step()).floor() as usize;
            peak[idx.min(n - 1)]
        };
        total += squash(r) / 2f64.powi(w as i32);
    }
    total += squash(full_sup) / 2f64.powi(n_windows as i32);
    Ok(total)
}
