//! Two quantum particles coupled through a classical particle.
//!
//! With ensemble Hamiltonian `g₁ k_Q x + g₂ k_C q'` the densities obey
//! first-order transport equations solved by a volume-preserving shear:
//!
//! ```text
//! P_t(q, q', x) = P₀(q − g₁t x + ½g₁g₂t² q', q', x − g₂t q')
//! ```
//!
//! and likewise for `S`. Initial states are independent Gaussian packets.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Span;
use crate::ensemble::{ConfigurationGrid, EnsembleState, GaussianPacket};
use crate::hilbert::{
    negativity, schmidt, Bipartition, CMatrix, DensityOperator, EntanglementReport, HilbertSpace, QuantumState, C64,
};
use crate::{Error, Result};

/// Largest initial probability allowed outside each grid.
pub const INTERIOR_TOLERANCE: f64 = 1e-6;
/// Largest quadrature mass lost by the evolved density.
pub const TRUNCATION_LIMIT: f64 = 1e-4;
/// Largest side of the dense mixture density matrix.
pub const MIXTURE_SIDE_LIMIT: usize = 1024;
const SLICE_PROBABILITY_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParticleScenario {
    /// Coupling of the momentum of `Q` to the position of `C`.
    pub g1: f64,
    /// Coupling of the momentum of `C` to the position of `Q'`.
    pub g2: f64,
    pub t: f64,
    pub psi_q: GaussianPacket,
    pub psi_q_prime: GaussianPacket,
    pub psi_c: GaussianPacket,
    pub q_grid: Span,
    pub q_prime_grid: Span,
    pub x_grid: Span,
    /// Points per quantum axis for the mixture density matrix.
    pub coarse_points: usize,
    pub hbar: f64,
}

impl Default for ParticleScenario {
    fn default() -> Self {
        ParticleScenario {
            g1: 1.0,
            g2: 1.0,
            t: 1.0,
            psi_q: GaussianPacket::standard(),
            psi_q_prime: GaussianPacket::standard(),
            psi_c: GaussianPacket::standard(),
            q_grid: Span::new(-8.0, 8.0, 129),
            q_prime_grid: Span::new(-8.0, 8.0, 129),
            x_grid: Span::new(-12.0, 12.0, 257),
            coarse_points: 16,
            hbar: crate::DEFAULT_HBAR,
        }
    }
}

/// Mean and variance of a Gaussian marginal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

impl ParticleScenario {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("g1", self.g1), ("g2", self.g2), ("t", self.t)] {
            if !v.is_finite() {
                return Err(Error::arg(format!("{name} must be finite, got {v}")));
            }
        }
        if !(self.hbar > 0.0) || !self.hbar.is_finite() {
            return Err(Error::arg(format!("hbar must be positive, got {}", self.hbar)));
        }
        let packets = [
            ("psi_q", &self.psi_q, &self.q_grid, "q_grid"),
            ("psi_q_prime", &self.psi_q_prime, &self.q_prime_grid, "q_prime_grid"),
            ("psi_c", &self.psi_c, &self.x_grid, "x_grid"),
        ];
        for (name, p, span, grid_name) in packets {
            GaussianPacket::new(p.mean, p.width, p.momentum).map_err(|e| Error::arg(format!("{name}: {e}")))?;
            span.axis(grid_name)?;
            let outside = p.tail_mass(span.min, span.max);
            if outside > INTERIOR_TOLERANCE {
                return Err(Error::GridTooSmall {
                    axis: grid_name.to_string(),
                    defect: outside,
                });
            }
        }
        if self.coarse_points < 4 {
            return Err(Error::arg(format!(
                "coarse_points must be at least 4, got {}",
                self.coarse_points
            )));
        }
        Ok(())
    }

    /// Initial wavefunction `ψ_Q(q) ψ_Q'(q') ψ_C(x)`.
    pub fn initial_psi(&self, q: f64, qp: f64, x: f64) -> C64 {
        self.psi_q.psi(q, self.hbar) * self.psi_q_prime.psi(qp, self.hbar) * self.psi_c.psi(x, self.hbar)
    }

    /// Initial point that the shear carries to `(q, q', x)`.
    pub fn pullback(&self, q: f64, qp: f64, x: f64) -> (f64, f64, f64) {
        let (g1, g2, t) = (self.g1, self.g2, self.t);
        (q - g1 * t * x + 0.5 * g1 * g2 * t * t * qp, qp, x - g2 * t * qp)
    }

    /// Evolved wavefunction `√P_t e^{iS_t/ħ}` in closed form.
    pub fn psi_t(&self, q: f64, qp: f64, x: f64) -> C64 {
        let (q0, qp0, x0) = self.pullback(q, qp, x);
        self.initial_psi(q0, qp0, x0)
    }

    /// Exact Gaussian marginals of `P_t` along `q`, `q'` and `x`.
    pub fn marginals(&self) -> [Moments; 3] {
        let (g1, g2, t) = (self.g1, self.g2, self.t);
        let (q, qp, x) = (&self.psi_q, &self.psi_q_prime, &self.psi_c);
        let var = |p: &GaussianPacket| p.width * p.width;
        // forward map: q = q₀ + g₁t x₀ + ½g₁g₂t² q'₀, x = x₀ + g₂t q'₀
        let a = 0.5 * g1 * g2 * t * t;
        [
            Moments {
                mean: q.mean + g1 * t * x.mean + a * qp.mean,
                variance: var(q) + (g1 * t).powi(2) * var(x) + a * a * var(qp),
            },
            Moments {
                mean: qp.mean,
                variance: var(qp),
            },
            Moments {
                mean: x.mean + g2 * t * qp.mean,
                variance: var(x) + (g2 * t).powi(2) * var(qp),
            },
        ]
    }

    fn spans(&self) -> [(&'static str, Span); 3] {
        [("q", self.q_grid), ("q_prime", self.q_prime_grid), ("x", self.x_grid)]
    }

    pub fn grid(&self) -> Result<ConfigurationGrid> {
        ConfigurationGrid::new(vec![
            self.q_grid.axis("q_grid")?,
            self.q_prime_grid.axis("q_prime_grid")?,
            self.x_grid.axis("x_grid")?,
        ])
    }
}

/// Evolved ensemble together with its quadrature mass before
/// renormalisation.
#[derive(Clone, Debug)]
pub struct Propagation {
    pub state: EnsembleState,
    pub raw_mass: f64,
}

pub fn propagate_particle(s: &ParticleScenario) -> Result<Propagation> {
    s.validate()?;
    let grid = s.grid()?;
    let [qs, qps, xs] = [s.q_grid, s.q_prime_grid, s.x_grid].map(|sp| {
        (0..sp.points)
            .map(|i| sp.min + i as f64 * sp.spacing())
            .collect::<Vec<f64>>()
    });
    let (nqp, nx) = (qps.len(), xs.len());
    let fields: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|z| {
            let (q, qp, x) = (qs[z / (nqp * nx)], qps[(z / nx) % nqp], xs[z % nx]);
            let (q0, qp0, x0) = s.pullback(q, qp, x);
            let p = s.psi_q.density(q0) * s.psi_q_prime.density(qp0) * s.psi_c.density(x0);
            let phase = s.psi_q.phase(q0) + s.psi_q_prime.phase(qp0) + s.psi_c.phase(x0);
            (p, phase)
        })
        .collect();
    let (p, phase): (Vec<f64>, Vec<f64>) = fields.into_iter().unzip();
    let raw_mass = grid.weight() * p.iter().sum::<f64>();
    let defect = (1.0 - raw_mass).abs();
    log::info!("particle propagation: quadrature mass {raw_mass:.15}, truncation defect {defect:.3e}");
    if defect > TRUNCATION_LIMIT {
        let marg = s.marginals();
        let worst = s
            .spans()
            .iter()
            .zip(&marg)
            .map(|((name, span), m)| {
                let g = GaussianPacket {
                    mean: m.mean,
                    width: m.variance.sqrt(),
                    momentum: 0.0,
                };
                (*name, g.tail_mass(span.min, span.max))
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("three axes");
        return Err(Error::GridTooSmall {
            axis: worst.0.to_string(),
            defect,
        });
    }
    Ok(Propagation {
        state: EnsembleState::normalized(grid, p, phase)?,
        raw_mass,
    })
}

/// Moments `Σ w xᵐ P` of the marginal along `axis`, for `m = 1..=order`.
pub fn marginal_moments(state: &EnsembleState, axis: usize, order: u32) -> Result<Vec<f64>> {
    let (sub, p) = state.marginal(&[axis])?;
    let a = sub.axes()[0];
    let w = a.spacing();
    Ok((1..=order as i32)
        .map(|m| w * p.iter().enumerate().map(|(i, pi)| a.coord(i).powi(m) * pi).sum::<f64>())
        .collect())
}

/// `ψ_t(·, ·, a)` on the given grids, with `Σ|ψ|² Δq Δq'`.
fn slice(s: &ParticleScenario, q: &Span, qp: &Span, a: f64) -> (Vec<C64>, f64) {
    let mut values = Vec::with_capacity(q.points * qp.points);
    for i in 0..q.points {
        let qi = q.min + i as f64 * q.spacing();
        for j in 0..qp.points {
            values.push(s.psi_t(qi, qp.min + j as f64 * qp.spacing(), a));
        }
    }
    let mass = values.iter().map(|v| v.norm_sqr()).sum::<f64>() * q.spacing() * qp.spacing();
    (values, mass)
}

/// Post-selected two-particle state `ψ_{t|a}`.
#[derive(Clone, Debug)]
pub struct PostSelection {
    /// Grid point actually used for `a`.
    pub a: f64,
    pub index: usize,
    /// Slice probability `p(a) = Δx ∫∫ |ψ_t(q, q', a)|² dq dq'`.
    pub probability: f64,
    /// `K_a`, so that `K_a ψ_t(·, ·, a)` has unit norm on the quadrature.
    pub normalization: f64,
    /// Unit vector on `q ⊗ q'`, amplitudes `ψ_{t|a} √(Δq Δq')`.
    pub state: QuantumState,
    pub report: EntanglementReport,
}

pub fn postselect_x(s: &ParticleScenario, a: f64) -> Result<PostSelection> {
    s.validate()?;
    let axis = s.x_grid.axis("x_grid")?;
    let index = axis.nearest(a);
    if index == 0 || index + 1 == axis.len() {
        return Err(Error::Domain(format!(
            "post-selection point {a} is not interior to the x grid"
        )));
    }
    let a_snap = axis.coord(index);
    let (values, mass) = slice(s, &s.q_grid, &s.q_prime_grid, a_snap);
    let probability = mass * s.x_grid.spacing();
    if !(probability > SLICE_PROBABILITY_FLOOR) {
        return Err(Error::Domain(format!(
            "slice probability at x = {a_snap} is {probability:.3e}"
        )));
    }
    let normalization = mass.sqrt().recip();
    let cell = (s.q_grid.spacing() * s.q_prime_grid.spacing()).sqrt();
    let space = HilbertSpace::new(vec![s.q_grid.points, s.q_prime_grid.points])?;
    let amps = DVector::from_iterator(values.len(), values.iter().map(|v| v * (normalization * cell)));
    let state = QuantumState::normalized(space, amps)?;
    let report = schmidt(&state, &Bipartition::first(1))?;
    Ok(PostSelection {
        a: a_snap,
        index,
        probability,
        normalization,
        state,
        report,
    })
}

/// Mixture of post-selected states over all outcomes `a`.
#[derive(Clone, Debug)]
pub struct Mixture {
    pub rho: DensityOperator,
    /// `Σ_a p(a)` before renormalisation.
    pub weight_sum: f64,
    pub trace_error: f64,
    pub negativity: f64,
    pub slices: usize,
}

/// `ρ_{QQ'|C} = Σ_a p(a) |ψ_{t|a}⟩⟨ψ_{t|a}|` on the coarse `(q, q')` grids.
///
/// `p(a)` is taken from the fine grids; each `ψ_{t|a}` is sampled on the
/// coarse grids and normalised there. The weights are renormalised by their
/// sum.
pub fn mixture_density(s: &ParticleScenario) -> Result<Mixture> {
    s.validate()?;
    let cq = Span::new(s.q_grid.min, s.q_grid.max, s.coarse_points);
    let cqp = Span::new(s.q_prime_grid.min, s.q_prime_grid.max, s.coarse_points);
    let side = cq.points * cqp.points;
    if side > MIXTURE_SIDE_LIMIT {
        return Err(Error::Capacity {
            what: "mixture density side",
            requested: side,
            limit: MIXTURE_SIDE_LIMIT,
        });
    }
    let xs: Vec<f64> = (0..s.x_grid.points)
        .map(|i| s.x_grid.min + i as f64 * s.x_grid.spacing())
        .collect();
    // fixed chunking keeps the summation order independent of thread count
    let partials: Vec<(CMatrix, f64, usize)> = xs
        .par_chunks(16)
        .map(|chunk| {
            let mut acc = CMatrix::zeros(side, side);
            let mut weight = 0.0;
            let mut used = 0;
            for &a in chunk {
                let (_, fine_mass) = slice(s, &s.q_grid, &s.q_prime_grid, a);
                let p = fine_mass * s.x_grid.spacing();
                let (coarse, _) = slice(s, &cq, &cqp, a);
                let v = DVector::from_vec(coarse);
                let norm = v.norm();
                weight += p;
                if p > 0.0 && norm > 0.0 {
                    let v = v.unscale(norm);
                    acc.gerc(C64::new(p, 0.0), &v, &v, C64::new(1.0, 0.0));
                    used += 1;
                }
            }
            (acc, weight, used)
        })
        .collect();
    let mut rho = CMatrix::zeros(side, side);
    let mut weight_sum = 0.0;
    let mut slices = 0;
    for (m, w, u) in partials {
        rho += m;
        weight_sum += w;
        slices += u;
    }
    rho.unscale_mut(weight_sum);
    let rho = DensityOperator::new(HilbertSpace::new(vec![cq.points, cqp.points])?, rho)?;
    let negativity = negativity(&rho, &Bipartition::first(1))?;
    Ok(Mixture {
        trace_error: (rho.trace() - 1.0).abs(),
        rho,
        weight_sum,
        negativity,
        slices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ParticleScenario {
        ParticleScenario {
            q_grid: Span::new(-8.0, 8.0, 41),
            q_prime_grid: Span::new(-8.0, 8.0, 41),
            x_grid: Span::new(-12.0, 12.0, 61),
            coarse_points: 8,
            ..ParticleScenario::default()
        }
    }

    #[test]
    fn default_scenario_is_valid() {
        ParticleScenario::default().validate().unwrap();
    }

    #[test]
    fn validation_names_fields() {
        let mut s = small();
        s.psi_c.width = -1.0;
        assert!(s.validate().unwrap_err().to_string().contains("psi_c"));
        let mut s = small();
        s.psi_q.mean = 6.0;
        match s.validate().unwrap_err() {
            Error::GridTooSmall { axis, .. } => assert_eq!(axis, "q_grid"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn no_coupling_is_identity() {
        let s = ParticleScenario {
            g1: 0.0,
            g2: 0.0,
            ..small()
        };
        let evolved = propagate_particle(&s).unwrap().state;
        let initial = propagate_particle(&ParticleScenario { t: 0.0, ..s.clone() })
            .unwrap()
            .state;
        assert_eq!(evolved, initial);
    }

    #[test]
    fn q_shift_without_back_coupling() {
        let s = ParticleScenario {
            g2: 0.0,
            t: 0.7,
            ..small()
        };
        let st = propagate_particle(&s).unwrap();
        let g = st.state.grid();
        let scale = st.raw_mass;
        for z in (0..g.len()).step_by(97) {
            let c = g.coords(z);
            let expect = s.psi_q.density(c[0] - 0.7 * c[2]) * s.psi_q_prime.density(c[1]) * s.psi_c.density(c[2]);
            assert!((st.state.p()[z] * scale - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn x_mean_follows_q_prime_mean() {
        let s = ParticleScenario {
            g1: 0.0,
            psi_q_prime: GaussianPacket::new(0.5, 1.0, 0.0).unwrap(),
            ..small()
        };
        let st = propagate_particle(&s).unwrap().state;
        let mx = marginal_moments(&st, 2, 1).unwrap()[0];
        assert!((mx - 0.5).abs() < 1e-9, "{mx}");
        assert!((s.marginals()[2].mean - 0.5).abs() < 1e-15);
    }

    #[test]
    fn closed_form_marginals_match_grid() {
        let s = ParticleScenario {
            psi_q: GaussianPacket::new(0.3, 0.8, 0.4).unwrap(),
            psi_c: GaussianPacket::new(-0.2, 0.9, 0.0).unwrap(),
            t: 0.8,
            ..small()
        };
        let st = propagate_particle(&s).unwrap().state;
        for (axis, m) in s.marginals().iter().enumerate() {
            let mom = marginal_moments(&st, axis, 2).unwrap();
            assert!((mom[0] - m.mean).abs() < 1e-7, "axis {axis}");
            assert!((mom[1] - m.mean * m.mean - m.variance).abs() < 1e-6, "axis {axis}");
        }
    }

    #[test]
    fn narrow_grid_is_reported() {
        let s = ParticleScenario {
            g1: 3.0,
            x_grid: Span::new(-8.0, 8.0, 61),
            ..small()
        };
        match propagate_particle(&s).unwrap_err() {
            Error::GridTooSmall { axis, .. } => assert_eq!(axis, "q"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn postselection_controls_are_products() {
        for (g1, g2) in [(0.0, 1.0), (1.0, 0.0), (0.0, 0.0)] {
            let s = ParticleScenario { g1, g2, ..small() };
            for a in [0.0, 0.9] {
                let ps = postselect_x(&s, a).unwrap();
                assert!(ps.report.entropy <= 1e-8, "g1={g1} g2={g2}: {}", ps.report.entropy);
            }
        }
        let ps = postselect_x(&small(), 0.0).unwrap();
        assert!(ps.report.entropy > 0.01);
        assert!((ps.state.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn postselection_rejects_edges_and_empty_slices() {
        assert!(matches!(postselect_x(&small(), 30.0), Err(Error::Domain(_))));
        let s = ParticleScenario {
            x_grid: Span::new(-60.0, 60.0, 241),
            ..small()
        };
        assert!(matches!(postselect_x(&s, 50.0), Err(Error::Domain(_))));
    }

    #[test]
    fn mixture_of_uncoupled_system_is_pure_product() {
        let s = ParticleScenario {
            g1: 0.0,
            g2: 0.0,
            ..small()
        };
        let m = mixture_density(&s).unwrap();
        assert!((m.rho.purity() - 1.0).abs() < 1e-10);
        assert!(m.negativity < 1e-10);
        assert!(m.trace_error < 1e-12);
        assert!((m.weight_sum - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mixture_without_back_coupling_is_separable() {
        let s = ParticleScenario { g2: 0.0, ..small() };
        let m = mixture_density(&s).unwrap();
        assert!(m.negativity <= 1e-8, "{}", m.negativity);
    }

    #[test]
    fn mixture_capacity() {
        let s = ParticleScenario {
            coarse_points: 40,
            ..small()
        };
        assert!(matches!(mixture_density(&s), Err(Error::Capacity { .. })));
    }
}
