//! Control Hamiltonians.
//!
//! Every model here is affine in its controls, `H(u) = sum_k u_k G_k`, so the
//! gradient operators are constant matrices.

mod rydberg;
mod two_level;

pub use rydberg::{
    build_symmetric_basis, rydberg_hamiltonian, rydberg_initial, rydberg_target, RydbergModel,
    SymmetricBasisState,
};
pub use two_level::{two_level_model, TwoLevelModel};

use crate::error::{Error, Result};
use crate::geometry::{Operator, QuantumState};

/// Closed interval a control component may take.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlBounds {
    pub lo: f64,
    pub hi: f64,
}

impl ControlBounds {
    pub const UNIT: ControlBounds = ControlBounds { lo: 0.0, hi: 1.0 };

    pub fn contains(&self, u: f64) -> bool {
        u >= self.lo && u <= self.hi
    }

    pub fn clamp(&self, u: f64) -> f64 {
        u.clamp(self.lo, self.hi)
    }
}

/// A controllable quantum system with fixed initial and target states.
pub trait HamiltonianModel: Send + Sync {
    /// Short identifier written to output metadata.
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn bounds(&self) -> &[ControlBounds];

    fn control_count(&self) -> usize {
        self.bounds().len()
    }

    /// Characteristic coupling (rad/s) used to scale optimizer steps.
    fn omega_max(&self) -> f64;

    /// `H(u)` without bound validation.
    fn build_unchecked(&self, u: &[f64]) -> Operator;

    /// `dH/du_k`.
    fn gradient(&self, u: &[f64], k: usize) -> Operator;

    fn initial_state(&self) -> QuantumState;

    fn target_state(&self) -> QuantumState;

    /// Human-readable labels of the basis states, in matrix order.
    fn basis_labels(&self) -> Vec<String>;

    /// `H(u)`, rejecting controls outside the declared bounds.
    fn build(&self, u: &[f64]) -> Result<Operator> {
        self.check_controls(u)?;
        Ok(self.build_unchecked(u))
    }

    fn check_controls(&self, u: &[f64]) -> Result<()> {
        let bounds = self.bounds();
        if u.len() != bounds.len() {
            return Err(Error::ControlCount {
                expected: bounds.len(),
                got: u.len(),
            });
        }
        for (index, (&value, b)) in u.iter().zip(bounds).enumerate() {
            if !b.contains(value) {
                return Err(Error::ControlOutOfBounds {
                    index,
                    value,
                    lo: b.lo,
                    hi: b.hi,
                });
            }
        }
        Ok(())
    }
}

/// `sum_k u_k G_k` for a list of generators.
pub(crate) fn affine_combination(generators: &[Operator], u: &[f64]) -> Operator {
    let dim = generators[0].nrows();
    let mut h = Operator::zeros(dim, dim);
    for (g, &uk) in generators.iter().zip(u) {
        if uk != 0.0 {
            h += g * num_complex::Complex64::new(uk, 0.0);
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_clamp_and_contain() {
        let b = ControlBounds::UNIT;
        assert_eq!(b.clamp(1.2), 1.0);
        assert_eq!(b.clamp(-0.3), 0.0);
        assert_eq!(b.clamp(0.4), 0.4);
        assert!(b.contains(0.0) && b.contains(1.0) && !b.contains(1.0 + 1e-12));
    }
}
