use num_complex::Complex64;

use super::{affine_combination, ControlBounds, HamiltonianModel};
use crate::error::{Error, Result};
use crate::geometry::{Operator, QuantumState};

/// Resonantly driven qubit, `H(u) = u * Omega_max * sigma_x / 2`, from `|0>`
/// to `|1>`. Its speed limit is `pi / Omega_max` with `Q_opt = Omega_max / 2`.
#[derive(Debug, Clone)]
pub struct TwoLevelModel {
    omega_max: f64,
    generators: [Operator; 1],
    bounds: [ControlBounds; 1],
}

pub fn two_level_model(omega_max: f64) -> Result<TwoLevelModel> {
    if !(omega_max > 0.0) || !omega_max.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "omega_max must be positive (got {omega_max})"
        )));
    }
    let half = Complex64::new(omega_max / 2.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let sx = Operator::from_row_slice(2, 2, &[zero, half, half, zero]);
    Ok(TwoLevelModel {
        omega_max,
        generators: [sx],
        bounds: [ControlBounds::UNIT],
    })
}

impl HamiltonianModel for TwoLevelModel {
    fn name(&self) -> &str {
        "two_level"
    }

    fn dim(&self) -> usize {
        2
    }

    fn bounds(&self) -> &[ControlBounds] {
        &self.bounds
    }

    fn omega_max(&self) -> f64 {
        self.omega_max
    }

    fn build_unchecked(&self, u: &[f64]) -> Operator {
        affine_combination(&self.generators, u)
    }

    fn gradient(&self, _u: &[f64], k: usize) -> Operator {
        self.generators[k].clone()
    }

    fn initial_state(&self) -> QuantumState {
        QuantumState::basis(2, 0).expect("valid basis")
    }

    fn target_state(&self) -> QuantumState {
        QuantumState::basis(2, 1).expect("valid basis")
    }

    fn basis_labels(&self) -> Vec<String> {
        vec!["|0>".into(), "|1>".into()]
    }
}
