//! Uniform ε-lattice quantization with a random phase shift.
//!
//! The lattice is `{ ε(θ + j) : j ∈ Zᵈ }`. Because it is an axis-aligned
//! product, the nearest vertex is found one coordinate at a time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeQuantizer<S> {
    epsilon: S,
    theta: Vec<S>,
}

/// `d` independent phases uniform on `[-1/2, 1/2)`.
pub fn sample_phase<S: Scalar, R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<S> {
    (0..d).map(|_| S::of(rng.random::<f64>() - 0.5)).collect()
}

/// Nearest integer, halves rounding toward +∞.
fn round_half_up<S: Scalar>(v: S) -> S {
    let f = v.floor();
    if v - f >= S::of(0.5) {
        f + S::one()
    } else {
        f
    }
}

impl<S: Scalar> LatticeQuantizer<S> {
    pub fn new(epsilon: S, theta: Vec<S>) -> Result<Self> {
        if !(epsilon > S::zero() && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
        }
        let half = S::of(0.5);
        if theta.is_empty() || theta.iter().any(|t| !(t.abs() <= half)) {
            return Err(Error::InvalidParameter("phase components must lie in [-1/2, 1/2]".into()));
        }
        Ok(Self { epsilon, theta })
    }

    pub fn random<R: Rng + ?Sized>(epsilon: S, d: usize, rng: &mut R) -> Result<Self> {
        Self::new(epsilon, sample_phase(d, rng))
    }

    pub fn epsilon(&self) -> S {
        self.epsilon
    }

    pub fn theta(&self) -> &[S] {
        &self.theta
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// Lattice index `a(x)` of the nearest vertex.
    pub fn index(&self, x: &[S]) -> Result<Vec<S>> {
        self.check(x)?;
        Ok(x.iter()
            .zip(&self.theta)
            .map(|(&v, &t)| round_half_up(v / self.epsilon - t))
            .collect())
    }

    /// Nearest lattice vertex `ε(θ + a(x))`.
    pub fn quantize(&self, x: &[S]) -> Result<Vec<S>> {
        self.check(x)?;
        let mut out = x.to_vec();
        self.quantize_in_place(&mut out);
        Ok(out)
    }

    /// Quantizes `x` in place; the caller guarantees length and finiteness.
    pub(crate) fn quantize_in_place(&self, x: &mut [S]) {
        for (v, &t) in x.iter_mut().zip(&self.theta) {
            *v = self.epsilon * (t + round_half_up(*v / self.epsilon - t));
        }
    }

    fn check(&self, x: &[S]) -> Result<()> {
        if x.len() != self.theta.len() {
            return Err(Error::DimensionMismatch {
                expected: self.theta.len(),
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("cannot quantize a non-finite point".into()));
        }
        Ok(())
    }
}
