//! Signed Borel measures on (-H, 0], truncated to a shared grid.
//!
//! A measure is a finite set of atoms at grid points plus an optional
//! sampled density integrated by trapezoid quadrature. Mass below -H is
//! not representable pointwise; constructors and convolution keep it as
//! a declared signed `tail` scalar so truncation is always explicit.
//! Matrix-valued measures (kernels) stack scalar entries row-major and
//! support the convolution algebra used to invert delay operators.

use crate::error::{Error, Result};
use crate::grid::Grid;
use serde::{Deserialize, Serialize};

/// Trapezoid sum of samples spaced `h` apart.
pub(crate) fn trapezoid(h: f64, samples: &[f64]) -> f64 {
    match samples.len() {
        0 => 0.0,
        1 => 0.0,
        n => {
            let mut acc = 0.5 * (samples[0] + samples[n - 1]);
            for s in &samples[1..n - 1] {
                acc += s;
            }
            acc * h
        }
    }
}

/// Scalar measure on [-H, 0] with declared tail mass below -H.
///
/// Atoms are stored as (depth, mass) where depth counts grid steps below
/// zero; the sample vector of a density is oldest-first like histories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarMeasure {
    grid: Grid,
    atoms: Vec<(usize, f64)>,
    density: Option<Vec<f64>>,
    tail: f64,
}

impl ScalarMeasure {
    pub fn zero(grid: Grid) -> Self {
        ScalarMeasure { grid, atoms: Vec::new(), density: None, tail: 0.0 }
    }

    /// Unit atom at 0, the convolution identity.
    pub fn delta(grid: Grid) -> Self {
        ScalarMeasure { grid, atoms: vec![(0, 1.0)], density: None, tail: 0.0 }
    }

    /// Atoms given as (location, mass) pairs; locations must be grid-aligned
    /// points of [-H, 0].
    pub fn from_atoms(grid: Grid, atoms: &[(f64, f64)]) -> Result<Self> {
        let n = grid.n_steps();
        let mut by_depth = vec![0.0; n + 1];
        for &(loc, mass) in atoms {
            let d = grid.depth_of(loc)?;
            if d > n {
                return Err(Error::BadArgument(format!(
                    "atom at {loc} lies below the horizon {}; declare it as tail mass",
                    -grid.horizon()
                )));
            }
            by_depth[d] += mass;
        }
        Ok(Self::from_depth_masses(grid, &by_depth, None, 0.0))
    }

    pub fn single_atom(grid: Grid, loc: f64, mass: f64) -> Result<Self> {
        Self::from_atoms(grid, &[(loc, mass)])
    }

    /// Density from oldest-first samples plus declared tail mass.
    pub fn with_density(grid: Grid, samples: Vec<f64>, tail: f64) -> Result<Self> {
        if samples.len() != grid.samples() {
            return Err(Error::GridMismatch(format!(
                "density has {} samples, grid wants {}",
                samples.len(),
                grid.samples()
            )));
        }
        Ok(ScalarMeasure { grid, atoms: Vec::new(), density: Some(samples), tail })
    }

    /// Probability density rate·e^{rate·s} on (-inf, 0]; the mass below -H
    /// (e^{-rate·H}) is declared as tail.
    pub fn exp_density(grid: Grid, rate: f64) -> Result<Self> {
        if !(rate > 0.0) {
            return Err(Error::BadArgument(format!("exp density rate must be positive, got {rate}")));
        }
        let samples: Vec<f64> =
            (0..grid.samples()).map(|i| rate * (rate * grid.location(i)).exp()).collect();
        let tail = (-rate * grid.horizon()).exp();
        Self::with_density(grid, samples, tail)
    }

    /// Uniform probability density on [a, b] ⊂ [-H, 0], a and b grid-aligned.
    /// Samples are normalized so the trapezoid mass is exactly 1.
    pub fn uniform_density(grid: Grid, a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::BadArgument(format!("uniform density needs a < b, got [{a}, {b}]")));
        }
        let da = grid.depth_of(a)?;
        let db = grid.depth_of(b)?;
        let n = grid.n_steps();
        if da > n {
            return Err(Error::BadArgument(format!("uniform density start {a} below horizon")));
        }
        let c = 1.0 / (b - a);
        let mut samples = vec![0.0; grid.samples()];
        for (i, s) in samples.iter_mut().enumerate() {
            let depth = n - i;
            if depth < da && depth > db {
                *s = c;
            } else if depth == da || depth == db {
                *s = 0.5 * c;
            }
        }
        let mass = trapezoid(grid.step(), &samples);
        if mass <= 0.0 {
            return Err(Error::BadArgument("uniform density support too narrow for grid".into()));
        }
        for s in &mut samples {
            *s /= mass;
        }
        Self::with_density(grid, samples, 0.0)
    }

    fn from_depth_masses(grid: Grid, by_depth: &[f64], density: Option<Vec<f64>>, tail: f64) -> Self {
        let atoms: Vec<(usize, f64)> =
            by_depth.iter().enumerate().filter(|(_, &m)| m != 0.0).map(|(d, &m)| (d, m)).collect();
        let density = density.filter(|dens| dens.iter().any(|&v| v != 0.0));
        ScalarMeasure { grid, atoms, density, tail }
    }

    /// Replace the declared below-horizon mass.
    pub fn with_tail(mut self, tail: f64) -> Self {
        self.tail = tail;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Atoms as (depth, mass), ascending depth.
    pub fn atoms(&self) -> &[(usize, f64)] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&[f64]> {
        self.density.as_deref()
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.density.is_none() && self.tail == 0.0
    }

    pub fn has_mass_at_zero(&self) -> bool {
        self.atoms.iter().any(|&(d, m)| d == 0 && m != 0.0)
    }

    /// Total variation of the in-range part (atoms and density on [-H, 0]).
    pub fn total_variation(&self) -> f64 {
        let atom_part: f64 = self.atoms.iter().map(|&(_, m)| m.abs()).sum();
        let dens_part = match &self.density {
            Some(dens) => {
                let abs: Vec<f64> = dens.iter().map(|v| v.abs()).collect();
                trapezoid(self.grid.step(), &abs)
            }
            None => 0.0,
        };
        atom_part + dens_part
    }

    /// Total variation including the declared tail magnitude.
    pub fn total_variation_full(&self) -> f64 {
        self.total_variation() + self.tail.abs()
    }

    /// Signed mass of the in-range part.
    pub fn total(&self) -> f64 {
        let atom_part: f64 = self.atoms.iter().map(|&(_, m)| m).sum();
        let dens_part = match &self.density {
            Some(dens) => trapezoid(self.grid.step(), dens),
            None => 0.0,
        };
        atom_part + dens_part
    }

    /// Signed mass including tail.
    pub fn total_full(&self) -> f64 {
        self.total() + self.tail
    }

    /// Most negative of atom masses, density samples, and tail; 0 for the
    /// zero measure. Nonnegative measures return a value ≥ 0.
    pub fn min_component(&self) -> f64 {
        let mut lo: f64 = 0.0;
        for &(_, m) in &self.atoms {
            lo = lo.min(m);
        }
        if let Some(dens) = &self.density {
            for &v in dens {
                lo = lo.min(v);
            }
        }
        lo.min(self.tail)
    }

    /// ∫ f dm over [-H, 0]; f is evaluated at atom locations and at density
    /// sample points (trapezoid). Tail mass is excluded; see
    /// [`integrate_with_tail`](Self::integrate_with_tail).
    pub fn integrate_against<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let h = self.grid.step();
        let mut acc = 0.0;
        for &(d, m) in &self.atoms {
            acc += m * f(-(d as f64) * h);
        }
        if let Some(dens) = &self.density {
            let weighted: Vec<f64> =
                dens.iter().enumerate().map(|(i, &v)| v * f(self.grid.location(i))).collect();
            acc += trapezoid(h, &weighted);
        }
        acc
    }

    /// Like `integrate_against`, plus tail·pre for integrands constant
    /// before -H with value `pre`.
    pub fn integrate_with_tail<F: Fn(f64) -> f64>(&self, f: F, pre: f64) -> f64 {
        self.integrate_against(f) + self.tail * pre
    }

    pub fn scale(&self, k: f64) -> Self {
        let atoms = self.atoms.iter().map(|&(d, m)| (d, k * m)).collect();
        let density = self.density.as_ref().map(|dens| dens.iter().map(|v| k * v).collect());
        ScalarMeasure { grid: self.grid, atoms, density, tail: k * self.tail }
    }

    pub fn add(&self, other: &ScalarMeasure) -> Result<Self> {
        self.grid.ensure_same(&other.grid, "measure addition")?;
        let n = self.grid.n_steps();
        let mut by_depth = vec![0.0; n + 1];
        for &(d, m) in self.atoms.iter().chain(other.atoms.iter()) {
            by_depth[d] += m;
        }
        let density = match (&self.density, &other.density) {
            (None, None) => None,
            (Some(a), None) => Some(a.clone()),
            (None, Some(b)) => Some(b.clone()),
            (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| x + y).collect()),
        };
        Ok(Self::from_depth_masses(self.grid, &by_depth, density, self.tail + other.tail))
    }

    pub fn sub(&self, other: &ScalarMeasure) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// Convolution truncated to [-H, 0]. Atom·atom products land on atoms,
    /// atom·density on shifted densities, density·density on the discrete
    /// convolution of samples scaled by h. Mass pushed below -H is kept as
    /// tail via the exact identity
    /// tail(result) = total_full(a)·total_full(b) − total(result).
    pub fn convolve(&self, other: &ScalarMeasure) -> Result<Self> {
        self.grid.ensure_same(&other.grid, "convolution")?;
        let grid = self.grid;
        let n = grid.n_steps();
        let h = grid.step();

        let mut atom_masses = vec![0.0; n + 1];
        for &(da, ma) in &self.atoms {
            for &(db, mb) in &other.atoms {
                let d = da + db;
                if d <= n {
                    atom_masses[d] += ma * mb;
                }
            }
        }

        let a_dens = self.density_by_depth();
        let b_dens = other.density_by_depth();
        let mut dens_by_depth: Option<Vec<f64>> = None;
        {
            let mut bump = |d: usize, v: f64| {
                if d <= n {
                    dens_by_depth.get_or_insert_with(|| vec![0.0; n + 1])[d] += v;
                }
            };
            if let Some(bd) = &b_dens {
                for &(da, ma) in &self.atoms {
                    for (db, &vb) in bd.iter().enumerate() {
                        bump(da + db, ma * vb);
                    }
                }
            }
            if let Some(ad) = &a_dens {
                for &(db, mb) in &other.atoms {
                    for (da, &va) in ad.iter().enumerate() {
                        bump(da + db, mb * va);
                    }
                }
            }
            if let (Some(ad), Some(bd)) = (&a_dens, &b_dens) {
                for (da, &va) in ad.iter().enumerate() {
                    if va == 0.0 {
                        continue;
                    }
                    for (db, &vb) in bd.iter().enumerate() {
                        bump(da + db, h * va * vb);
                    }
                }
            }
        }

        let density = dens_by_depth.map(|by_depth| {
            (0..=n).map(|i| by_depth[n - i]).collect::<Vec<f64>>()
        });
        let mut out = Self::from_depth_masses(grid, &atom_masses, density, 0.0);
        out.tail = self.total_full() * other.total_full() - out.total();
        Ok(out)
    }

    /// Density samples re-indexed by depth (index d = value at -d·h).
    fn density_by_depth(&self) -> Option<Vec<f64>> {
        let n = self.grid.n_steps();
        self.density.as_ref().map(|dens| (0..=n).map(|d| dens[n - d]).collect())
    }
}

/// Matrix of optional scalar measures, row-major; entry (i, j) weights the
/// influence of component j histories on component i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    m: usize,
    grid: Grid,
    entries: Vec<Option<ScalarMeasure>>,
}

impl Kernel {
    pub fn zero(m: usize, grid: Grid) -> Self {
        Kernel { m, grid, entries: vec![None; m * m] }
    }

    /// δI: unit atom at 0 on the diagonal.
    pub fn identity(m: usize, grid: Grid) -> Self {
        let mut k = Kernel::zero(m, grid);
        for i in 0..m {
            k.entries[i * m + i] = Some(ScalarMeasure::delta(grid));
        }
        k
    }

    pub fn from_entries(
        m: usize,
        grid: Grid,
        entries: Vec<(usize, usize, ScalarMeasure)>,
    ) -> Result<Self> {
        let mut kernel = Kernel::zero(m, grid);
        for (i, j, measure) in entries {
            if i >= m || j >= m {
                return Err(Error::BadArgument(format!(
                    "kernel index ({i}, {j}) out of range 0..{m}"
                )));
            }
            kernel.set(i, j, measure)?;
        }
        Ok(kernel)
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&ScalarMeasure> {
        self.entries[i * self.m + j].as_ref()
    }

    pub fn set(&mut self, i: usize, j: usize, measure: ScalarMeasure) -> Result<()> {
        self.grid.ensure_same(measure.grid(), "kernel entry")?;
        self.entries[i * self.m + j] = if measure.is_zero() { None } else { Some(measure) };
        Ok(())
    }

    /// True if no entry carries an atom at depth 0.
    pub fn no_mass_at_zero(&self) -> bool {
        self.entries.iter().flatten().all(|e| !e.has_mass_at_zero())
    }

    pub fn row_variation(&self, i: usize) -> f64 {
        (0..self.m).filter_map(|j| self.get(i, j)).map(|e| e.total_variation_full()).sum()
    }

    pub fn max_row_variation(&self) -> f64 {
        (0..self.m).map(|i| self.row_variation(i)).fold(0.0, f64::max)
    }

    pub fn add(&self, other: &Kernel) -> Result<Kernel> {
        self.ensure_compatible(other)?;
        let mut out = Kernel::zero(self.m, self.grid);
        for idx in 0..self.entries.len() {
            out.entries[idx] = match (&self.entries[idx], &other.entries[idx]) {
                (None, None) => None,
                (Some(a), None) => Some(a.clone()),
                (None, Some(b)) => Some(b.clone()),
                (Some(a), Some(b)) => {
                    let sum = a.add(b)?;
                    if sum.is_zero() {
                        None
                    } else {
                        Some(sum)
                    }
                }
            };
        }
        Ok(out)
    }

    pub fn scale(&self, k: f64) -> Kernel {
        let entries = self.entries.iter().map(|e| e.as_ref().map(|m| m.scale(k))).collect();
        Kernel { m: self.m, grid: self.grid, entries }
    }

    /// Matrix convolution: (A ⊛ B)_ij = Σ_k A_ik ⊛ B_kj.
    pub fn convolve(&self, other: &Kernel) -> Result<Kernel> {
        self.ensure_compatible(other)?;
        let m = self.m;
        let mut out = Kernel::zero(m, self.grid);
        for i in 0..m {
            for j in 0..m {
                let mut acc: Option<ScalarMeasure> = None;
                for k in 0..m {
                    if let (Some(a), Some(b)) = (self.get(i, k), other.get(k, j)) {
                        let prod = a.convolve(b)?;
                        acc = Some(match acc {
                            None => prod,
                            Some(cur) => cur.add(&prod)?,
                        });
                    }
                }
                if let Some(acc) = acc {
                    if !acc.is_zero() {
                        out.entries[i * m + j] = Some(acc);
                    }
                }
            }
        }
        Ok(out)
    }

    fn ensure_compatible(&self, other: &Kernel) -> Result<()> {
        if self.m != other.m {
            return Err(Error::GridMismatch(format!(
                "kernel dimensions differ: {} vs {}",
                self.m, other.m
            )));
        }
        self.grid.ensure_same(&other.grid, "kernel operation")
    }
}

/// Truncated Neumann series δI + ν + ν⊛ν + … with its error certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeumannSeries {
    /// The accumulated series, an approximate convolution inverse of δI − ν.
    pub kernel: Kernel,
    /// Contraction constant c = max row variation of ν.
    pub contraction: f64,
    /// Highest power of ν included.
    pub terms: usize,
    /// Row-variation bound on the dropped remainder: c^(K+1)/(1−c).
    pub residual_bound: f64,
}

const NEUMANN_MAX_TERMS: usize = 100_000;

/// Convolution inverse of δI − ν by Neumann series, valid for contractive ν.
/// Terms are added until the row variation of the latest power is ≤ tol.
pub fn neumann_inverse(nu: &Kernel, tol: f64) -> Result<NeumannSeries> {
    if !(tol > 0.0) {
        return Err(Error::BadArgument(format!("tolerance must be positive, got {tol}")));
    }
    let c = nu.max_row_variation();
    if c >= 1.0 {
        return Err(Error::NotContractive { row_sum: c });
    }
    let mut acc = Kernel::identity(nu.dim(), *nu.grid());
    let mut power = acc.clone();
    let mut k = 0usize;
    loop {
        power = power.convolve(nu)?;
        k += 1;
        acc = acc.add(&power)?;
        let term_size = power.max_row_variation();
        if term_size <= tol {
            let residual_bound = c.powi(k as i32 + 1) / (1.0 - c);
            return Ok(NeumannSeries { kernel: acc, contraction: c, terms: k, residual_bound });
        }
        if k >= NEUMANN_MAX_TERMS {
            return Err(Error::NoConvergence { iters: k, delta: term_size, tol });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(0.5, 4.0).unwrap()
    }

    #[test]
    fn atom_totals() {
        let m = ScalarMeasure::from_atoms(grid(), &[(-1.0, 0.3), (-2.0, 0.2)]).unwrap();
        assert_eq!(m.total_variation(), 0.5);
        assert_eq!(m.total(), 0.5);
        let signed = ScalarMeasure::from_atoms(grid(), &[(-1.0, 0.3), (-2.0, -0.2)]).unwrap();
        assert!((signed.total_variation() - 0.5).abs() < 1e-15);
        assert!((signed.total() - 0.1).abs() < 1e-15);
        assert_eq!(signed.min_component(), -0.2);
    }

    #[test]
    fn zero_measure_is_neutral() {
        let z = ScalarMeasure::zero(grid());
        assert!(z.is_zero());
        assert_eq!(z.total_variation(), 0.0);
        assert_eq!(z.integrate_against(|s| s * s + 1.0), 0.0);
    }

    #[test]
    fn atoms_merge_at_equal_depth() {
        let m = ScalarMeasure::from_atoms(grid(), &[(-1.0, 0.3), (-1.0, -0.3)]).unwrap();
        assert!(m.is_zero());
    }

    #[test]
    fn delta_is_convolution_identity() {
        let d = ScalarMeasure::delta(grid());
        let m = ScalarMeasure::from_atoms(grid(), &[(-1.0, 0.4), (-2.5, -0.1)]).unwrap();
        let conv = d.convolve(&m).unwrap();
        assert_eq!(conv, m);
    }

    #[test]
    fn atom_convolution_translates() {
        let a = ScalarMeasure::single_atom(grid(), -1.0, 0.5).unwrap();
        let b = ScalarMeasure::single_atom(grid(), -2.0, 0.4).unwrap();
        let c = a.convolve(&b).unwrap();
        assert_eq!(c.atoms(), &[(6, 0.2)]);
        assert_eq!(c.tail(), 0.0);
    }

    #[test]
    fn deep_convolution_mass_lands_in_tail() {
        let a = ScalarMeasure::single_atom(grid(), -3.0, 0.5).unwrap();
        let b = ScalarMeasure::single_atom(grid(), -2.0, 0.4).unwrap();
        let c = a.convolve(&b).unwrap();
        assert!(c.atoms().is_empty());
        assert!((c.tail() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn uniform_density_has_unit_mass() {
        let g = Grid::new(0.01, 20.0).unwrap();
        let m = ScalarMeasure::uniform_density(g, -3.0, -1.0).unwrap();
        assert!((m.total() - 1.0).abs() < 1e-12);
        assert!((m.total_variation() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn neumann_rejects_expanding_kernels() {
        let mut nu = Kernel::zero(1, grid());
        nu.set(0, 0, ScalarMeasure::single_atom(grid(), -1.0, 1.1).unwrap()).unwrap();
        match neumann_inverse(&nu, 1e-6) {
            Err(Error::NotContractive { row_sum }) => assert!((row_sum - 1.1).abs() < 1e-12),
            other => panic!("expected NotContractive, got {other:?}"),
        }
    }

    #[test]
    fn neumann_of_zero_is_identity() {
        let nu = Kernel::zero(2, grid());
        let inv = neumann_inverse(&nu, 1e-12).unwrap();
        assert_eq!(inv.kernel, Kernel::identity(2, grid()));
        assert_eq!(inv.residual_bound, 0.0);
    }
}
