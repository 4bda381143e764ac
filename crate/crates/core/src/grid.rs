//! Shared sample grid for measures and histories.
//!
//! A grid covers [-H, 0] with step h; the number of steps H/h must be
//! integral. Samples are indexed oldest-first: index 0 sits at -H,
//! index `n_steps()` sits at 0. Many routines also use "depth", the
//! number of steps below zero, so depth d corresponds to index
//! `n_steps() - d` and to the time -d*h.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Relative tolerance used when snapping times onto the grid.
pub const SNAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    step: f64,
    horizon: f64,
}

impl Grid {
    pub fn new(step: f64, horizon: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::BadArgument(format!("grid step must be positive, got {step}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::BadArgument(format!(
                "grid horizon must be positive, got {horizon}"
            )));
        }
        let ratio = horizon / step;
        if (ratio - ratio.round()).abs() > SNAP_TOL * ratio.max(1.0) {
            return Err(Error::OffGrid { value: horizon, step });
        }
        Ok(Grid { step, horizon })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of steps between -H and 0.
    pub fn n_steps(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }

    /// Number of sample points on [-H, 0].
    pub fn samples(&self) -> usize {
        self.n_steps() + 1
    }

    /// Time of the oldest-first sample index.
    pub fn location(&self, index: usize) -> f64 {
        -self.horizon + index as f64 * self.step
    }

    /// Depth (steps below zero) of a nonpositive grid-aligned time.
    pub fn depth_of(&self, s: f64) -> Result<usize> {
        if s > self.step * SNAP_TOL {
            return Err(Error::BadArgument(format!("time {s} is positive")));
        }
        let raw = -s / self.step;
        let d = raw.round();
        if (raw - d).abs() > SNAP_TOL * raw.abs().max(1.0) {
            return Err(Error::OffGrid { value: s, step: self.step });
        }
        Ok(d as usize)
    }

    /// True if `s` lies within SNAP_TOL of a grid multiple.
    pub fn is_aligned(&self, s: f64) -> bool {
        let raw = s / self.step;
        (raw - raw.round()).abs() <= SNAP_TOL * raw.abs().max(1.0)
    }

    /// Oldest-first index of a depth, when it lies inside the horizon.
    pub fn index_of_depth(&self, depth: usize) -> Option<usize> {
        let n = self.n_steps();
        if depth <= n {
            Some(n - depth)
        } else {
            None
        }
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        (self.step - other.step).abs() <= SNAP_TOL * self.step
            && (self.horizon - other.horizon).abs() <= SNAP_TOL * self.horizon
    }

    pub fn ensure_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: ({}, {}) vs ({}, {})",
                self.step, self.horizon, other.step, other.horizon
            )))
        }
    }
}
