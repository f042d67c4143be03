//! Configuration-ensemble models in which a classical particle `C`
//! correlates two quantum systems `Q` and `Q'`.
//!
//! * [`particle`]: `Q` and `Q'` are particles coupled through the classical
//!   ensemble by `g₁ k_Q x + g₂ k_C q'`. The evolution is a linear shear of the
//!   initial `(P, S)`, evaluated in closed form on a grid.
//! * [`general`]: arbitrary `Q` and `Q'` coupled through
//!   `M ⊗ 1 ⊗ x̂ + 1 ⊗ N ⊗ k̂`, evolved by its factorised exponential and
//!   cross-checked against a dense exponential.
//!
//! Not every classical observable of `C` is a function of `x̂` and `k̂` on
//! the hybrid wavefunction; nothing here relies on such a representation.

pub mod general;
pub mod particle;

use serde::{Deserialize, Serialize};

use crate::ensemble::Axis;
use crate::{Error, Result};

pub use general::*;
pub use particle::*;

/// Uniform grid on `[min, max]` with `points` points, both ends included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Span {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Span {
    pub fn new(min: f64, max: f64, points: usize) -> Self {
        Span { min, max, points }
    }

    pub fn axis(&self, field: &str) -> Result<Axis> {
        let a = Axis::continuous(self.min, self.max, self.points);
        crate::ensemble::ConfigurationGrid::new(vec![a]).map_err(|e| Error::arg(format!("{field}: {e}")))?;
        Ok(a)
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.points - 1) as f64
    }

    pub fn refined(&self) -> Span {
        Span {
            points: 2 * self.points - 1,
            ..*self
        }
    }
}
