//! Configuration-space ensembles.
//!
//! A state is a probability density `P ≥ 0` and a conjugate phase `S` on a
//! discretised configuration space. Observables are functionals of `(P, S)`
//! and the dynamics is generated through the ensemble Poisson bracket
//!
//! ```text
//! {A, B} = ∫ dz (δA/δP δB/δS − δB/δP δA/δS)
//! ```
//!
//! Grids are row-major products of axes. Continuous axes include both end
//! points, and every point carries the same quadrature weight, the product of
//! the continuous spacings.
//!
//! Functional derivatives are undefined where `P` vanishes; states used here
//! keep `P` strictly positive on the grid.

mod functional;
mod snapshot;

pub use functional::*;
pub use snapshot::{read_snapshot, write_snapshot};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::hilbert::{CVector, C64};
use crate::{Error, Result};

/// Tolerance on `Σ w P = 1`.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-8;
/// Below this density the phase carries no information.
pub const DENSITY_FLOOR: f64 = 1e-14;
/// Largest number of points in a configuration grid.
pub const MAX_GRID_POINTS: usize = 1 << 23;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Axis {
    Continuous { min: f64, max: f64, n: usize },
    Discrete { n: usize },
}

impl Axis {
    pub fn continuous(min: f64, max: f64, n: usize) -> Self {
        Axis::Continuous { min, max, n }
    }

    pub fn discrete(n: usize) -> Self {
        Axis::Discrete { n }
    }

    pub fn len(&self) -> usize {
        match *self {
            Axis::Continuous { n, .. } | Axis::Discrete { n } => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Point spacing; 1 for discrete axes.
    pub fn spacing(&self) -> f64 {
        match *self {
            Axis::Continuous { min, max, n } => (max - min) / (n - 1) as f64,
            Axis::Discrete { .. } => 1.0,
        }
    }

    /// Coordinate of point `i`; the label itself on a discrete axis.
    pub fn coord(&self, i: usize) -> f64 {
        match *self {
            Axis::Continuous { min, .. } => min + i as f64 * self.spacing(),
            Axis::Discrete { .. } => i as f64,
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.coord(i)).collect()
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, Axis::Continuous { .. })
    }

    /// Index of the point nearest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        match *self {
            Axis::Continuous { min, n, .. } => {
                let i = ((x - min) / self.spacing()).round();
                i.clamp(0.0, (n - 1) as f64) as usize
            }
            Axis::Discrete { n } => (x.round().max(0.0) as usize).min(n - 1),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Axis::Continuous { min, max, n } => {
                if n < 4 {
                    return Err(Error::arg(format!("continuous axis needs at least 4 points, got {n}")));
                }
                if !(min.is_finite() && max.is_finite() && max > min) {
                    return Err(Error::arg(format!(
                        "continuous axis needs finite min < max, got [{min}, {max}]"
                    )));
                }
            }
            Axis::Discrete { n } => {
                if n == 0 {
                    return Err(Error::arg("discrete axis needs at least one label"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationGrid {
    axes: Vec<Axis>,
}

impl ConfigurationGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::arg("grid needs at least one axis"));
        }
        let mut total: usize = 1;
        for a in &axes {
            a.validate()?;
            total = total.saturating_mul(a.len());
        }
        if total > MAX_GRID_POINTS {
            return Err(Error::Capacity {
                what: "grid points",
                requested: total,
                limit: MAX_GRID_POINTS,
            });
        }
        Ok(ConfigurationGrid { axes })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn dims(&self) -> Vec<usize> {
        self.axes.iter().map(Axis::len).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Axis::len).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight shared by every point.
    pub fn weight(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).product()
    }

    /// Distance in flat index between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.axes[axis + 1..].iter().map(Axis::len).product()
    }

    pub fn multi_index(&self, mut z: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for (slot, a) in idx.iter_mut().zip(&self.axes).rev() {
            *slot = z % a.len();
            z /= a.len();
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (&i, a)| acc * a.len() + i)
    }

    pub fn coords(&self, z: usize) -> Vec<f64> {
        self.multi_index(z)
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.coord(i))
            .collect()
    }

    /// Coordinate along `axis` of every point.
    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        let a = &self.axes[axis];
        let stride = self.stride(axis);
        (0..self.len()).map(|z| a.coord((z / stride) % a.len())).collect()
    }

    /// Axes of `self` followed by those of `other`.
    pub fn product(&self, other: &ConfigurationGrid) -> Result<ConfigurationGrid> {
        let mut axes = self.axes.clone();
        axes.extend_from_slice(&other.axes);
        ConfigurationGrid::new(axes)
    }

    pub(crate) fn check_axis(&self, axis: usize) -> Result<&Axis> {
        self.axes
            .get(axis)
            .ok_or_else(|| Error::arg(format!("axis {axis} out of range for a {}-axis grid", self.axes.len())))
    }
}

/// `(P, S)` on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleState {
    grid: ConfigurationGrid,
    pub(crate) p: Vec<f64>,
    pub(crate) s: Vec<f64>,
}

impl EnsembleState {
    pub fn new(grid: ConfigurationGrid, p: Vec<f64>, s: Vec<f64>) -> Result<Self> {
        if p.len() != grid.len() || s.len() != grid.len() {
            return Err(Error::arg(format!(
                "fields have {} and {} values, grid has {} points",
                p.len(),
                s.len(),
                grid.len()
            )));
        }
        if let Some(v) = p.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::contract(format!(
                "density must be finite and nonnegative, found {v}"
            )));
        }
        if p.iter().zip(&s).any(|(&pz, sz)| pz > DENSITY_FLOOR && !sz.is_finite()) {
            return Err(Error::contract("phase must be finite where the density is nonzero"));
        }
        let total = grid.weight() * p.iter().sum::<f64>();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::contract(format!("quadrature sum of P is {total}, expected 1")));
        }
        Ok(EnsembleState { grid, p, s })
    }

    /// Rescales `P` so its quadrature sum is one.
    pub fn normalized(grid: ConfigurationGrid, mut p: Vec<f64>, s: Vec<f64>) -> Result<Self> {
        let total = grid.weight() * p.iter().sum::<f64>();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::contract(format!(
                "cannot normalise a density with total {total}"
            )));
        }
        p.iter_mut().for_each(|v| *v /= total);
        Self::new(grid, p, s)
    }

    /// Samples `f(coords) = (P, S)` at every point and normalises.
    pub fn from_fn(grid: ConfigurationGrid, f: impl Fn(&[f64]) -> (f64, f64)) -> Result<Self> {
        let (p, s) = (0..grid.len()).map(|z| f(&grid.coords(z))).unzip();
        Self::normalized(grid, p, s)
    }

    /// Inverse of [`EnsembleState::amplitudes`]: `P = |a|²/w`, `S = ħ arg a`.
    pub fn from_amplitudes(grid: ConfigurationGrid, a: &[C64], hbar: f64) -> Result<Self> {
        if a.len() != grid.len() {
            return Err(Error::arg("amplitude count differs from the number of grid points"));
        }
        let w = grid.weight();
        let p = a.iter().map(|z| z.norm_sqr() / w).collect();
        let s = a.iter().map(|z| hbar * z.arg()).collect();
        Self::normalized(grid, p, s)
    }

    /// Random state with `P` bounded away from zero and `S ∈ [−π, π)`.
    pub fn random<R: Rng + ?Sized>(grid: ConfigurationGrid, rng: &mut R) -> Result<Self> {
        let n = grid.len();
        let p = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let s = (0..n)
            .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect();
        Self::normalized(grid, p, s)
    }

    /// State of two independent ensembles: `P = P₁P₂`, `S = S₁ + S₂`.
    pub fn product(&self, other: &EnsembleState) -> Result<EnsembleState> {
        let grid = self.grid.product(&other.grid)?;
        let mut p = Vec::with_capacity(grid.len());
        let mut s = Vec::with_capacity(grid.len());
        for (pa, sa) in self.p.iter().zip(&self.s) {
            for (pb, sb) in other.p.iter().zip(&other.s) {
                p.push(pa * pb);
                s.push(sa + sb);
            }
        }
        Self::new(grid, p, s)
    }

    pub fn grid(&self) -> &ConfigurationGrid {
        &self.grid
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn total_probability(&self) -> f64 {
        self.grid.weight() * self.p.iter().sum::<f64>()
    }

    pub fn min_density(&self) -> f64 {
        self.p.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `√(wP) e^{iS/ħ}`: a unit vector on the grid.
    pub fn amplitudes(&self, hbar: f64) -> CVector {
        let w = self.grid.weight();
        CVector::from_iterator(
            self.p.len(),
            self.p
                .iter()
                .zip(&self.s)
                .map(|(&p, &s)| C64::from_polar((w * p).sqrt(), s / hbar)),
        )
    }

    /// Marginal density on the listed axes, in the order given.
    pub fn marginal(&self, axes: &[usize]) -> Result<(ConfigurationGrid, Vec<f64>)> {
        for &a in axes {
            self.grid.check_axis(a)?;
        }
        let sub = ConfigurationGrid::new(axes.iter().map(|&a| self.grid.axes[a]).collect())?;
        let dropped: f64 = (0..self.grid.axes.len())
            .filter(|a| !axes.contains(a))
            .map(|a| self.grid.axes[a].spacing())
            .product();
        let dims = self.grid.dims();
        let strides: Vec<usize> = (0..dims.len()).map(|a| self.grid.stride(a)).collect();
        let mut out = vec![0.0; sub.len()];
        for (z, &p) in self.p.iter().enumerate() {
            let target = axes
                .iter()
                .fold(0, |acc, &a| acc * dims[a] + (z / strides[a]) % dims[a]);
            out[target] += p * dropped;
        }
        Ok((sub, out))
    }
}

/// `ψ(z) = √P(z) e^{iS(z)/ħ}` sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridField {
    grid: ConfigurationGrid,
    values: Vec<C64>,
    hbar: f64,
}

impl HybridField {
    pub fn grid(&self) -> &ConfigurationGrid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// `P = |ψ|²` and `S = ħ arg ψ ∈ (−πħ, πħ]`.
    pub fn to_state(&self) -> Result<EnsembleState> {
        let p = self.values.iter().map(|z| z.norm_sqr()).collect();
        let s = self.values.iter().map(|z| self.hbar * z.arg()).collect();
        EnsembleState::new(self.grid.clone(), p, s)
    }
}

pub fn hybrid_wavefunction(state: &EnsembleState, hbar: f64) -> HybridField {
    HybridField {
        grid: state.grid.clone(),
        values: state
            .p
            .iter()
            .zip(&state.s)
            .map(|(&p, &s)| C64::from_polar(p.sqrt(), s / hbar))
            .collect(),
        hbar,
    }
}

/// Closed-form Gaussian wavepacket
/// `ψ(x) = (2πσ²)^{-1/4} exp(−(x−μ)²/(4σ²) + i k₀ x/ħ)`, so that
/// `P = N(μ, σ²)` and `S = k₀ x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianPacket {
    pub mean: f64,
    pub width: f64,
    #[serde(default)]
    pub momentum: f64,
}

impl GaussianPacket {
    pub fn new(mean: f64, width: f64, momentum: f64) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::arg(format!("width must be positive, got {width}")));
        }
        if !mean.is_finite() || !momentum.is_finite() {
            return Err(Error::arg("mean and momentum must be finite"));
        }
        Ok(GaussianPacket { mean, width, momentum })
    }

    pub fn standard() -> Self {
        GaussianPacket {
            mean: 0.0,
            width: 1.0,
            momentum: 0.0,
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        let u = (x - self.mean) / self.width;
        (-0.5 * u * u).exp() / (self.width * (2.0 * std::f64::consts::PI).sqrt())
    }

    pub fn phase(&self, x: f64) -> f64 {
        self.momentum * x
    }

    pub fn psi(&self, x: f64, hbar: f64) -> C64 {
        C64::from_polar(self.density(x).sqrt(), self.phase(x) / hbar)
    }

    /// Probability outside `[min, max]`.
    pub fn tail_mass(&self, min: f64, max: f64) -> f64 {
        let s = self.width * std::f64::consts::SQRT_2;
        0.5 * (libm::erfc((max - self.mean) / s) + libm::erfc((self.mean - min) / s))
    }
}
