use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Axis, ConfigurationGrid, EnsembleState, DENSITY_FLOOR};
use crate::hilbert::{CMatrix, CVector, Operator, C64};
use crate::{Error, Result};

/// Functional derivatives `(δA/δP, δA/δS)`, one value per grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub dp: Vec<f64>,
    pub ds: Vec<f64>,
}

/// Observable `A[P, S]`.
///
/// Values are evaluated on the raw fields, so perturbed (unnormalised)
/// states are allowed.
pub trait Functional: Send + Sync {
    fn value(&self, state: &EnsembleState) -> Result<f64>;

    /// Defaults to [`finite_difference_gradient`].
    fn gradient(&self, state: &EnsembleState) -> Result<Gradient> {
        finite_difference_gradient(self, state)
    }

    fn label(&self) -> String;
}

const FD_RELATIVE_STEP: f64 = 1e-6;

/// Central differences of `value`, divided by the quadrature weight. The
/// step is `10⁻⁶` relative to the larger of the local value and the field's
/// largest magnitude.
pub fn finite_difference_gradient<F: Functional + ?Sized>(f: &F, state: &EnsembleState) -> Result<Gradient> {
    let w = state.grid().weight();
    let n = state.p.len();
    let mut work = state.clone();
    let mut dp = vec![0.0; n];
    let mut ds = vec![0.0; n];
    let p_scale = state.p.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let s_scale = state.s.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    for z in 0..n {
        let p0 = state.p[z];
        let h = FD_RELATIVE_STEP * p0.max(p_scale);
        work.p[z] = p0 + h;
        let up = f.value(&work)?;
        work.p[z] = (p0 - h).max(0.0);
        let down = f.value(&work)?;
        dp[z] = (up - down) / ((p0 + h - work.p[z]) * w);
        work.p[z] = p0;

        let s0 = state.s[z];
        let h = FD_RELATIVE_STEP * s_scale;
        work.s[z] = s0 + h;
        let up = f.value(&work)?;
        work.s[z] = s0 - h;
        let down = f.value(&work)?;
        ds[z] = (up - down) / (2.0 * h * w);
        work.s[z] = s0;
    }
    Ok(Gradient { dp, ds })
}

fn check_gradient(g: &Gradient, state: &EnsembleState, label: &str) -> Result<()> {
    if g.dp.len() != state.p.len() || g.ds.len() != state.p.len() {
        return Err(Error::arg(format!(
            "gradient of {label} has {} entries, grid has {} points",
            g.dp.len(),
            state.p.len()
        )));
    }
    Ok(())
}

/// `{A, B} = Σ_z w (δA/δP δB/δS − δB/δP δA/δS)`.
pub fn poisson_bracket(a: &dyn Functional, b: &dyn Functional, state: &EnsembleState) -> Result<f64> {
    let ga = a.gradient(state)?;
    let gb = b.gradient(state)?;
    check_gradient(&ga, state, &a.label())?;
    check_gradient(&gb, state, &b.label())?;
    Ok(bracket_of_gradients(&ga, &gb, state.grid().weight()))
}

pub(crate) fn bracket_of_gradients(ga: &Gradient, gb: &Gradient, w: f64) -> f64 {
    let sum: f64 = (0..ga.dp.len())
        .map(|z| ga.dp[z] * gb.ds[z] - gb.dp[z] * ga.ds[z])
        .sum();
    w * sum
}

/// Relative mismatch between the directional finite difference of `value`
/// and `⟨gradient, direction⟩` along a random smooth direction.
pub fn gradient_consistency(f: &dyn Functional, state: &EnsembleState, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = state.p.len();
    let mut smooth = || {
        let modes: Vec<(f64, f64, f64)> = (1..=3)
            .map(|j| (j as f64, rng.random_range(-1.0..1.0), rng.random_range(0.0..6.3)))
            .collect();
        (0..n)
            .map(|z| {
                let u = std::f64::consts::TAU * z as f64 / n as f64;
                modes.iter().map(|(j, c, phi)| c * (j * u + phi).sin()).sum::<f64>()
            })
            .collect::<Vec<f64>>()
    };
    // keep P positive along the path by scaling the direction with P
    let dp: Vec<f64> = smooth().iter().zip(&state.p).map(|(d, p)| d * p).collect();
    let ds = smooth();
    let g = f.gradient(state)?;
    check_gradient(&g, state, &f.label())?;
    let w = state.grid().weight();
    let analytic: f64 = w * (0..n).map(|z| g.dp[z] * dp[z] + g.ds[z] * ds[z]).sum::<f64>();
    let scale: f64 = w
        * (0..n)
            .map(|z| (g.dp[z] * dp[z]).abs() + (g.ds[z] * ds[z]).abs())
            .sum::<f64>();
    let eps = 1e-5;
    let shifted = |sign: f64| {
        let mut s = state.clone();
        for z in 0..n {
            s.p[z] += sign * eps * dp[z];
            s.s[z] += sign * eps * ds[z];
        }
        f.value(&s)
    };
    let fd = (shifted(1.0)? - shifted(-1.0)?) / (2.0 * eps);
    Ok((fd - analytic).abs() / scale.max(1e-300))
}

/// Second-order first derivative stencil at point `i` of `n`, as
/// `(index, coefficient)` pairs in units of `1/(2Δ)`.
fn stencil(i: usize, n: usize) -> [(usize, f64); 3] {
    if i == 0 {
        [(0, -3.0), (1, 4.0), (2, -1.0)]
    } else if i == n - 1 {
        [(n - 1, 3.0), (n - 2, -4.0), (n - 3, 1.0)]
    } else {
        [(i - 1, -1.0), (i + 1, 1.0), (i, 0.0)]
    }
}

/// `∂v` along `axis`: central differences, one-sided second order at the
/// ends.
pub fn axis_derivative(grid: &ConfigurationGrid, axis: usize, v: &[f64]) -> Vec<f64> {
    let a = grid.axes()[axis];
    let (n, stride, inv) = (a.len(), grid.stride(axis), 0.5 / a.spacing());
    (0..v.len())
        .map(|z| {
            let i = (z / stride) % n;
            let base = z - i * stride;
            stencil(i, n)
                .iter()
                .map(|&(j, c)| c * v[base + j * stride])
                .sum::<f64>()
                * inv
        })
        .collect()
}

/// Transpose of [`axis_derivative`].
fn axis_derivative_transpose(grid: &ConfigurationGrid, axis: usize, u: &[f64]) -> Vec<f64> {
    let a = grid.axes()[axis];
    let (n, stride, inv) = (a.len(), grid.stride(axis), 0.5 / a.spacing());
    let mut out = vec![0.0; u.len()];
    for (z, &uz) in u.iter().enumerate() {
        let i = (z / stride) % n;
        let base = z - i * stride;
        for (j, c) in stencil(i, n) {
            out[base + j * stride] += c * inv * uz;
        }
    }
    out
}

/// Phase-space function `f(x, k)` together with `∂f/∂k`.
pub trait PhaseFunction: Send + Sync {
    fn eval(&self, x: f64, k: f64) -> f64;
    fn dk(&self, x: f64, k: f64) -> f64;
    fn label(&self) -> String;
}

/// Polynomial in `x` and `k`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Polynomial {
    /// `(power of x, power of k) → coefficient`
    terms: BTreeMap<(u32, u32), f64>,
}

impl Polynomial {
    pub fn monomial(coefficient: f64, px: u32, pk: u32) -> Self {
        let mut p = Polynomial::default();
        p.push(coefficient, px, pk);
        p
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(c, 0, 0)
    }

    pub fn x() -> Self {
        Self::monomial(1.0, 1, 0)
    }

    pub fn k() -> Self {
        Self::monomial(1.0, 0, 1)
    }

    fn push(&mut self, c: f64, px: u32, pk: u32) {
        let e = self.terms.entry((px, pk)).or_insert(0.0);
        *e += c;
        if *e == 0.0 {
            self.terms.remove(&(px, pk));
        }
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (&(px, pk), &c) in &other.terms {
            out.push(c, px, pk);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut out = Polynomial::default();
        for (&(px, pk), &c) in &self.terms {
            out.push(c * s, px, pk);
        }
        out
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = Polynomial::default();
        for (&(ax, ak), &ca) in &self.terms {
            for (&(bx, bk), &cb) in &other.terms {
                out.push(ca * cb, ax + bx, ak + bk);
            }
        }
        out
    }

    pub fn diff_x(&self) -> Polynomial {
        let mut out = Polynomial::default();
        for (&(px, pk), &c) in &self.terms {
            if px > 0 {
                out.push(c * px as f64, px - 1, pk);
            }
        }
        out
    }

    pub fn diff_k(&self) -> Polynomial {
        let mut out = Polynomial::default();
        for (&(px, pk), &c) in &self.terms {
            if pk > 0 {
                out.push(c * pk as f64, px, pk - 1);
            }
        }
        out
    }

    /// `{f, g} = ∂f/∂x ∂g/∂k − ∂f/∂k ∂g/∂x`.
    pub fn bracket(&self, other: &Polynomial) -> Polynomial {
        self.diff_x()
            .mul(&other.diff_k())
            .add(&self.diff_k().mul(&other.diff_x()).scale(-1.0))
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|(a, b)| a + b).max().unwrap_or(0)
    }

    pub fn value(&self, x: f64, k: f64) -> f64 {
        self.terms
            .iter()
            .map(|(&(px, pk), &c)| c * x.powi(px as i32) * k.powi(pk as i32))
            .sum()
    }
}

impl PhaseFunction for Polynomial {
    fn eval(&self, x: f64, k: f64) -> f64 {
        self.value(x, k)
    }

    fn dk(&self, x: f64, k: f64) -> f64 {
        self.diff_k().value(x, k)
    }

    fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (&(px, pk), &c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let mut factors = Vec::new();
            if c != 1.0 || (px == 0 && pk == 0) {
                factors.push(format!("{c}"));
            }
            for (name, p) in [("x", px), ("k", pk)] {
                match p {
                    0 => {}
                    1 => factors.push(name.to_string()),
                    _ => factors.push(format!("{name}^{p}")),
                }
            }
            write!(f, "{}", factors.join("*"))?;
        }
        Ok(())
    }
}

impl FromStr for Polynomial {
    type Err = Error;

    /// Sums of products, e.g. `x^2`, `x*k`, `2*k^2 + x`, `-0.5*x^3`.
    fn from_str(s: &str) -> Result<Self> {
        let mut out = Polynomial::default();
        let cleaned = s.replace(' ', "").replace('-', "+-");
        for term in cleaned.split('+').filter(|t| !t.is_empty()) {
            let (mut c, mut px, mut pk) = (1.0, 0, 0);
            for factor in term.split('*') {
                let (base, power) = match factor.split_once('^') {
                    Some((b, p)) => (
                        b,
                        p.parse::<u32>()
                            .map_err(|_| Error::Parse(format!("bad exponent in `{factor}`")))?,
                    ),
                    None => (factor, 1),
                };
                match base {
                    "x" => px += power,
                    "k" => pk += power,
                    "-x" => {
                        c = -c;
                        px += power
                    }
                    "-k" => {
                        c = -c;
                        pk += power
                    }
                    num => {
                        let v: f64 = num
                            .parse()
                            .map_err(|_| Error::Parse(format!("bad factor `{factor}` in `{s}`")))?;
                        c *= v.powi(power as i32);
                    }
                }
            }
            out.push(c, px, pk);
        }
        Ok(out)
    }
}

impl TryFrom<String> for Polynomial {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Polynomial> for String {
    fn from(p: Polynomial) -> String {
        p.to_string()
    }
}

/// `C_f[P, S] = Σ_z w P f(x, ∂S)` with `x` and the derivative taken along
/// one continuous axis.
#[derive(Clone)]
pub struct ClassicalObservable {
    f: Arc<dyn PhaseFunction>,
    axis: usize,
}

impl ClassicalObservable {
    pub fn new(f: Arc<dyn PhaseFunction>, axis: usize) -> Self {
        ClassicalObservable { f, axis }
    }

    pub fn polynomial(p: Polynomial, axis: usize) -> Self {
        Self::new(Arc::new(p), axis)
    }

    fn check(&self, grid: &ConfigurationGrid) -> Result<()> {
        match grid.check_axis(self.axis)? {
            Axis::Continuous { .. } => Ok(()),
            Axis::Discrete { .. } => Err(Error::arg(format!(
                "classical observable {} needs a continuous axis, axis {} is discrete",
                self.f.label(),
                self.axis
            ))),
        }
    }

    fn evaluate(&self, state: &EnsembleState) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        self.check(state.grid())?;
        let x = state.grid().axis_coords(self.axis);
        let k = axis_derivative(state.grid(), self.axis, &state.s);
        let fx: Vec<f64> = x.iter().zip(&k).map(|(&x, &k)| self.f.eval(x, k)).collect();
        if let Some(z) = fx.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!(
                "{} is not finite at x = {}, k = {}",
                self.f.label(),
                x[z],
                k[z]
            )));
        }
        Ok((x, k, fx))
    }
}

impl Functional for ClassicalObservable {
    fn value(&self, state: &EnsembleState) -> Result<f64> {
        let (_, _, fx) = self.evaluate(state)?;
        Ok(state.grid().weight() * state.p.iter().zip(&fx).map(|(p, f)| p * f).sum::<f64>())
    }

    /// Exact derivative of the discretised functional:
    /// `δC/δP = f(x, DS)` and `δC/δS = Dᵀ(P ∂f/∂k)`.
    fn gradient(&self, state: &EnsembleState) -> Result<Gradient> {
        let (x, k, fx) = self.evaluate(state)?;
        let weighted: Vec<f64> = (0..x.len()).map(|z| state.p[z] * self.f.dk(x[z], k[z])).collect();
        Ok(Gradient {
            dp: fx,
            ds: axis_derivative_transpose(state.grid(), self.axis, &weighted),
        })
    }

    fn label(&self) -> String {
        format!("C[{}]", self.f.label())
    }
}

/// `Q_M[P, S] = ⟨ψ|M|ψ⟩` with amplitudes `√(wP) e^{iS/ħ}` and `M` acting on
/// the listed axes (identity elsewhere).
#[derive(Clone, Debug)]
pub struct QuantumObservable {
    m: Operator,
    axes: Vec<usize>,
    hbar: f64,
}

impl QuantumObservable {
    pub fn new(m: Operator, axes: Vec<usize>, hbar: f64) -> Result<Self> {
        if !m.is_hermitian() {
            return Err(Error::contract("quantum observables must be Hermitian"));
        }
        if axes.is_empty() {
            return Err(Error::arg("quantum observable needs at least one axis"));
        }
        let mut seen = axes.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != axes.len() {
            return Err(Error::arg("repeated axis in quantum observable"));
        }
        Ok(QuantumObservable { m, axes, hbar })
    }

    pub fn operator(&self) -> &Operator {
        &self.m
    }

    /// `(amplitudes, M·amplitudes)` on the state's grid.
    fn apply(&self, state: &EnsembleState) -> Result<(CVector, CVector)> {
        let grid = state.grid();
        for &a in &self.axes {
            grid.check_axis(a)?;
        }
        let dims = grid.dims();
        let dsel: usize = self.axes.iter().map(|&a| dims[a]).product();
        if dsel != self.m.space().total_dim() {
            return Err(Error::arg(format!(
                "operator has dimension {}, axes {:?} span {dsel} points",
                self.m.space().total_dim(),
                self.axes
            )));
        }
        let rest: Vec<usize> = (0..dims.len()).filter(|a| !self.axes.contains(a)).collect();
        let drest = grid.len() / dsel;
        let index = |z: usize| {
            let idx = grid.multi_index(z);
            let s = self.axes.iter().fold(0, |acc, &a| acc * dims[a] + idx[a]);
            let r = rest.iter().fold(0, |acc, &a| acc * dims[a] + idx[a]);
            (s, r)
        };
        let a = state.amplitudes(self.hbar);
        let mut mat = CMatrix::zeros(dsel, drest);
        for z in 0..grid.len() {
            let (s, r) = index(z);
            mat[(s, r)] = a[z];
        }
        let prod = self.m.matrix() * mat;
        let ma = CVector::from_iterator(
            grid.len(),
            (0..grid.len()).map(|z| {
                let (s, r) = index(z);
                prod[(s, r)]
            }),
        );
        Ok((a, ma))
    }
}

impl Functional for QuantumObservable {
    fn value(&self, state: &EnsembleState) -> Result<f64> {
        let (a, ma) = self.apply(state)?;
        Ok(a.dotc(&ma).re)
    }

    /// `δQ/δP = Re[ā (Ma)]/(wP)` and `δQ/δS = (2/ħ) Im[ā (Ma)]/w`.
    fn gradient(&self, state: &EnsembleState) -> Result<Gradient> {
        let (a, ma) = self.apply(state)?;
        let w = state.grid().weight();
        let mut dp = Vec::with_capacity(a.len());
        let mut ds = Vec::with_capacity(a.len());
        for z in 0..a.len() {
            let c: C64 = a[z].conj() * ma[z];
            if state.p[z] <= DENSITY_FLOOR {
                return Err(Error::Domain(format!(
                    "density vanishes at point {z}; δQ/δP is undefined there"
                )));
            }
            dp.push(c.re / (w * state.p[z]));
            ds.push(2.0 / self.hbar * c.im / w);
        }
        Ok(Gradient { dp, ds })
    }

    fn label(&self) -> String {
        format!(
            "Q[{}x{} on axes {:?}]",
            self.m.space().total_dim(),
            self.m.space().total_dim(),
            self.axes
        )
    }
}

/// Largest `|{Q_M, Q_N} − Q_{[M,N]/(iħ)}|` over `states`.
pub fn verify_qb(m: &Operator, n: &Operator, axes: &[usize], states: &[EnsembleState], hbar: f64) -> Result<f64> {
    let qm = QuantumObservable::new(m.clone(), axes.to_vec(), hbar)?;
    let qn = QuantumObservable::new(n.clone(), axes.to_vec(), hbar)?;
    let comm = QuantumObservable::new(m.commutator_over_ihbar(n, hbar)?, axes.to_vec(), hbar)?;
    states
        .par_iter()
        .map(|s| Ok((poisson_bracket(&qm, &qn, s)? - comm.value(s)?).abs()))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Largest `|{C_f, C_g} − C_{{f,g}}|` over `states`.
pub fn verify_cb(f: &Polynomial, g: &Polynomial, axis: usize, states: &[EnsembleState]) -> Result<f64> {
    if f.degree() > 3 || g.degree() > 3 {
        return Err(Error::arg(
            "bracket verification is limited to polynomials of degree at most 3",
        ));
    }
    let cf = ClassicalObservable::polynomial(f.clone(), axis);
    let cg = ClassicalObservable::polynomial(g.clone(), axis);
    let cfg = ClassicalObservable::polynomial(f.bracket(g), axis);
    states
        .par_iter()
        .map(|s| Ok((poisson_bracket(&cf, &cg, s)? - cfg.value(s)?).abs()))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Polynomial pairs checked under grid refinement.
pub fn bracket_registry() -> Vec<(Polynomial, Polynomial)> {
    let p = |s: &str| s.parse::<Polynomial>().expect("registry entries parse");
    vec![
        (p("x"), p("x")),
        (p("x"), p("k")),
        (p("x^2"), p("k")),
        (p("x*k"), p("k")),
        (p("k^2"), p("x")),
        (p("x^3"), p("k^2")),
        (p("x^2*k"), p("x*k")),
    ]
}

/// Smooth test states on `[-8, 8]` with `n` points: Gaussian densities and
/// phases `k₀x + ε sin x`, whose third derivative is nonzero.
pub fn smooth_states(n: usize) -> Result<Vec<EnsembleState>> {
    let grid = ConfigurationGrid::new(vec![Axis::continuous(-8.0, 8.0, n)])?;
    [(0.3, 1.0, 0.7, 0.3), (-0.5, 0.8, -0.4, 0.2), (0.0, 1.2, 1.1, 0.25)]
        .iter()
        .map(|&(mu, sigma, k0, eps)| {
            EnsembleState::from_fn(grid.clone(), |c| {
                let u = (c[0] - mu) / sigma;
                ((-0.5 * u * u).exp(), k0 * c[0] + eps * c[0].sin())
            })
        })
        .collect()
}

/// Deviations at or below this are treated as exact.
pub const ROUNDOFF_FLOOR: f64 = 1e-11;

/// Deviation of the classical bracket identity on successively refined grids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub f: String,
    pub g: String,
    pub points: Vec<usize>,
    pub deviations: Vec<f64>,
    /// `log₂` of the deviation ratio between the last two grids, scaled by
    /// the spacing ratio.
    pub order: Option<f64>,
    /// All deviations at roundoff level.
    pub exact: bool,
}

impl Refinement {
    pub fn passes(&self, min_order: f64) -> bool {
        self.exact || self.order.is_some_and(|o| o >= min_order)
    }
}

pub fn cb_refinement(f: &Polynomial, g: &Polynomial, points: &[usize]) -> Result<Refinement> {
    if points.len() < 2 {
        return Err(Error::arg("refinement needs at least two grids"));
    }
    let deviations = points
        .iter()
        .map(|&n| verify_cb(f, g, 0, &smooth_states(n)?))
        .collect::<Result<Vec<f64>>>()?;
    let exact = deviations.iter().all(|&d| d <= ROUNDOFF_FLOOR);
    let m = points.len();
    let (d0, d1) = (deviations[m - 2], deviations[m - 1]);
    let spacing = |n: usize| 16.0 / (n - 1) as f64;
    let order = (d0 > 0.0 && d1 > 0.0).then(|| (d0 / d1).ln() / (spacing(points[m - 2]) / spacing(points[m - 1])).ln());
    Ok(Refinement {
        f: f.to_string(),
        g: g.to_string(),
        points: points.to_vec(),
        deviations,
        order,
        exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::random::random_hermitian;
    use crate::hilbert::{pauli_x, pauli_y, pauli_z, HilbertSpace};

    fn discrete(n: usize) -> ConfigurationGrid {
        ConfigurationGrid::new(vec![Axis::discrete(n)]).unwrap()
    }

    fn qubit_state(p: [f64; 2], s: [f64; 2]) -> EnsembleState {
        EnsembleState::new(discrete(2), p.to_vec(), s.to_vec()).unwrap()
    }

    fn gaussian_state(n: usize, mu: f64, k0: f64) -> EnsembleState {
        let grid = ConfigurationGrid::new(vec![Axis::continuous(-8.0, 8.0, n)]).unwrap();
        EnsembleState::from_fn(grid, |c| ((-0.5 * (c[0] - mu).powi(2)).exp(), k0 * c[0])).unwrap()
    }

    #[test]
    fn polynomial_algebra() {
        let f: Polynomial = "x^2".parse().unwrap();
        let g: Polynomial = "k".parse().unwrap();
        assert_eq!(f.bracket(&g), "2*x".parse().unwrap());
        assert_eq!(Polynomial::x().bracket(&Polynomial::k()), Polynomial::constant(1.0));
        let h: Polynomial = "2*x*k - 0.5*k^3 + 1".parse().unwrap();
        assert_eq!(h.degree(), 3);
        assert_eq!(h.value(2.0, 1.0), 4.5);
        assert_eq!(h.to_string().parse::<Polynomial>().unwrap(), h);
        assert!("x^y".parse::<Polynomial>().is_err());
        assert!("z".parse::<Polynomial>().is_err());
    }

    #[test]
    fn constant_observable_is_normalisation() {
        let one = ClassicalObservable::polynomial(Polynomial::constant(1.0), 0);
        for st in smooth_states(65).unwrap() {
            assert!((one.value(&st).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn position_and_momentum_means() {
        // Δ² quadrature error is far below the tolerance used here for a
        // smooth Gaussian; the tails are beyond e^-30.
        let cx = ClassicalObservable::polynomial(Polynomial::x(), 0);
        let ck = ClassicalObservable::polynomial(Polynomial::k(), 0);
        for n in [65, 129] {
            let st = gaussian_state(n, 0.7, 0.0);
            assert!((cx.value(&st).unwrap() - 0.7).abs() < 1e-10);
            let st = gaussian_state(n, 0.0, -1.3);
            assert!((ck.value(&st).unwrap() + 1.3).abs() < 1e-12);
        }
    }

    #[test]
    fn discrete_axis_rejected_for_classical_observable() {
        let cx = ClassicalObservable::polynomial(Polynomial::x(), 0);
        assert!(matches!(
            cx.value(&qubit_state([0.5, 0.5], [0.0, 0.0])),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn quantum_examples() {
        let id = QuantumObservable::new(Operator::identity(HilbertSpace::single(2).unwrap()), vec![0], 1.0).unwrap();
        let z = QuantumObservable::new(pauli_z(), vec![0], 1.0).unwrap();
        let x = QuantumObservable::new(pauli_x(), vec![0], 1.0).unwrap();
        let st = qubit_state([1.0, 0.0], [0.0, 0.0]);
        assert!((id.value(&st).unwrap() - 1.0).abs() < 1e-15);
        assert!((z.value(&st).unwrap() - 1.0).abs() < 1e-15);
        let plus = qubit_state([0.5, 0.5], [0.0, 0.0]);
        assert!((x.value(&plus).unwrap() - 1.0).abs() < 1e-15);
        let three = QuantumObservable::new(pauli_x(), vec![0], 1.0).unwrap();
        let st3 = EnsembleState::new(discrete(3), vec![0.2, 0.3, 0.5], vec![0.0; 3]).unwrap();
        assert!(matches!(three.value(&st3), Err(Error::Argument(_))));
    }

    #[test]
    fn sigma_x_sigma_y_bracket() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for hbar in [1.0, 0.3] {
            let x = QuantumObservable::new(pauli_x(), vec![0], hbar).unwrap();
            let y = QuantumObservable::new(pauli_y(), vec![0], hbar).unwrap();
            let z = QuantumObservable::new(pauli_z(), vec![0], hbar).unwrap();
            for _ in 0..10 {
                let st = EnsembleState::random(discrete(2), &mut rng).unwrap();
                let lhs = poisson_bracket(&x, &y, &st).unwrap();
                let rhs = 2.0 / hbar * z.value(&st).unwrap();
                assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn canonical_pair() {
        let cx = ClassicalObservable::polynomial(Polynomial::x(), 0);
        let ck = ClassicalObservable::polynomial(Polynomial::k(), 0);
        for st in smooth_states(129).unwrap() {
            let b = poisson_bracket(&cx, &ck, &st).unwrap();
            assert!((b - 1.0).abs() < 1e-6, "{b}");
            assert_eq!(poisson_bracket(&cx, &cx, &st).unwrap(), 0.0);
        }
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let st = &smooth_states(33).unwrap()[0];
        for f in ["x", "k^2", "x*k", "x^3 + k"] {
            let c = ClassicalObservable::polynomial(f.parse().unwrap(), 0);
            let a = c.gradient(st).unwrap();
            let fd = finite_difference_gradient(&c, st).unwrap();
            let scale = a.ds.iter().chain(&a.dp).fold(1.0_f64, |m, v| m.max(v.abs()));
            for z in 0..a.dp.len() {
                assert!((a.dp[z] - fd.dp[z]).abs() < 1e-6 * scale, "{f} dP at {z}");
                assert!(
                    (a.ds[z] - fd.ds[z]).abs() < 1e-6 * scale,
                    "{f} dS at {z}: {} vs {}",
                    a.ds[z],
                    fd.ds[z]
                );
            }
            assert!(gradient_consistency(&c, st, 3).unwrap() < 1e-6);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let space = HilbertSpace::single(3).unwrap();
        let q = QuantumObservable::new(random_hermitian(&space, &mut rng), vec![0], 0.8).unwrap();
        let st = EnsembleState::random(discrete(3), &mut rng).unwrap();
        let a = q.gradient(&st).unwrap();
        let fd = finite_difference_gradient(&q, &st).unwrap();
        for z in 0..3 {
            assert!((a.dp[z] - fd.dp[z]).abs() < 1e-6 * a.dp[z].abs().max(1.0));
            assert!((a.ds[z] - fd.ds[z]).abs() < 1e-6 * a.ds[z].abs().max(1.0));
        }
        assert!(gradient_consistency(&q, &st, 9).unwrap() < 1e-6);
    }

    #[test]
    fn quantum_gradient_rejects_nodes() {
        let z = QuantumObservable::new(pauli_z(), vec![0], 1.0).unwrap();
        assert!(matches!(
            z.gradient(&qubit_state([1.0, 0.0], [0.0, 0.0])),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn qb_identity_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in [2, 3] {
            let space = HilbertSpace::single(d).unwrap();
            let states: Vec<_> = (0..20)
                .map(|_| EnsembleState::random(discrete(d), &mut rng).unwrap())
                .collect();
            let m = random_hermitian(&space, &mut rng);
            assert!(verify_qb(&m, &m, &[0], &states, 1.0).unwrap() < 1e-12);
            let n = random_hermitian(&space, &mut rng);
            assert!(verify_qb(&m, &n, &[0], &states, 1.0).unwrap() < 1e-10);
        }
    }

    #[test]
    fn cb_registry_converges() {
        for (f, g) in bracket_registry() {
            let r = cb_refinement(&f, &g, &[129, 257]).unwrap();
            assert!(r.passes(1.9), "{r:?}");
        }
        let same = cb_refinement(&Polynomial::x(), &Polynomial::x(), &[129, 257]).unwrap();
        assert!(same.exact && same.deviations.iter().all(|&d| d == 0.0));
        // (x³, k²) carries a genuine Δ² error: D x³ = 3x² + Δ²
        let cubic = cb_refinement(&"x^3".parse().unwrap(), &"k^2".parse().unwrap(), &[129, 257]).unwrap();
        assert!(!cubic.exact);
        assert!((cubic.order.unwrap() - 2.0).abs() < 0.05, "{cubic:?}");
    }

    #[test]
    fn cb_rejects_high_degree() {
        let states = smooth_states(17).unwrap();
        assert!(verify_cb(&"x^4".parse().unwrap(), &Polynomial::k(), 0, &states).is_err());
    }

    #[test]
    fn grid_mismatch_is_an_argument_error() {
        let st = gaussian_state(17, 0.0, 0.0);
        let q = QuantumObservable::new(pauli_z(), vec![0], 1.0).unwrap();
        let c = ClassicalObservable::polynomial(Polynomial::x(), 0);
        assert!(matches!(poisson_bracket(&c, &q, &st), Err(Error::Argument(_))));
        let c1 = ClassicalObservable::polynomial(Polynomial::x(), 1);
        assert!(matches!(c1.value(&st), Err(Error::Argument(_))));
    }
}
