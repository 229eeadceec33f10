//! Test models and random draws shared by the integration and acceptance tests.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha20Rng;

use qsl_control::geometry::{Operator, QuantumState};
use qsl_control::models::{ControlBounds, HamiltonianModel};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn random_state(rng: &mut ChaCha20Rng, dim: usize) -> QuantumState {
    let v = DVector::from_fn(dim, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    QuantumState::normalized(v).unwrap()
}

/// Entries uniform in the unit box around zero, scaled by `scale`.
pub fn random_hermitian(rng: &mut ChaCha20Rng, dim: usize, scale: f64) -> Operator {
    let a = DMatrix::from_fn(dim, dim, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    (&a + a.adjoint()) * c(scale / 2.0, 0.0)
}

/// `H = (Omega / 2) (sigma_x + u sigma_z)` from `|0>` to `|1>`, `u` in `[-1, 1]`.
/// The detuning only slows the transfer, so below `pi / Omega` the optimum is
/// the interior control `u = 0`.
pub struct DetunedQubit {
    pub omega: f64,
    bounds: [ControlBounds; 1],
    target: QuantumState,
}

impl DetunedQubit {
    pub fn new(omega: f64) -> Self {
        Self::with_target(omega, QuantumState::basis(2, 1).unwrap())
    }

    pub fn with_target(omega: f64, target: QuantumState) -> Self {
        Self {
            omega,
            bounds: [ControlBounds { lo: -1.0, hi: 1.0 }],
            target,
        }
    }
}

impl HamiltonianModel for DetunedQubit {
    fn name(&self) -> &str {
        "detuned_qubit"
    }

    fn dim(&self) -> usize {
        2
    }

    fn bounds(&self) -> &[ControlBounds] {
        &self.bounds
    }

    fn omega_max(&self) -> f64 {
        self.omega
    }

    fn build_unchecked(&self, u: &[f64]) -> Operator {
        let h = self.omega / 2.0;
        DMatrix::from_row_slice(2, 2, &[c(h * u[0], 0.0), c(h, 0.0), c(h, 0.0), c(-h * u[0], 0.0)])
    }

    fn gradient(&self, _u: &[f64], _k: usize) -> Operator {
        let h = self.omega / 2.0;
        DMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-h, 0.0)])
    }

    fn initial_state(&self) -> QuantumState {
        QuantumState::basis(2, 0).unwrap()
    }

    fn target_state(&self) -> QuantumState {
        self.target.clone()
    }

    fn basis_labels(&self) -> Vec<String> {
        vec!["0".into(), "1".into()]
    }
}

/// `H = H_0 + sum_k u_k H_k` with dense complex Hermitian terms, used to cover
/// Hamiltonians with nonzero imaginary parts.
pub struct ComplexModel {
    drift: Operator,
    terms: Vec<Operator>,
    bounds: Vec<ControlBounds>,
    psi0: QuantumState,
    chi: QuantumState,
    omega: f64,
}

impl ComplexModel {
    pub fn random(rng: &mut ChaCha20Rng, dim: usize, controls: usize, omega: f64) -> Self {
        Self {
            drift: random_hermitian(rng, dim, omega),
            terms: (0..controls).map(|_| random_hermitian(rng, dim, omega)).collect(),
            bounds: vec![ControlBounds::UNIT; controls],
            psi0: random_state(rng, dim),
            chi: random_state(rng, dim),
            omega,
        }
    }
}

impl HamiltonianModel for ComplexModel {
    fn name(&self) -> &str {
        "complex"
    }

    fn dim(&self) -> usize {
        self.drift.nrows()
    }

    fn bounds(&self) -> &[ControlBounds] {
        &self.bounds
    }

    fn omega_max(&self) -> f64 {
        self.omega
    }

    fn build_unchecked(&self, u: &[f64]) -> Operator {
        let mut h = self.drift.clone();
        for (x, t) in u.iter().zip(&self.terms) {
            h += t * c(*x, 0.0);
        }
        h
    }

    fn gradient(&self, _u: &[f64], k: usize) -> Operator {
        self.terms[k].clone()
    }

    fn initial_state(&self) -> QuantumState {
        self.psi0.clone()
    }

    fn target_state(&self) -> QuantumState {
        self.chi.clone()
    }

    fn basis_labels(&self) -> Vec<String> {
        (0..self.dim()).map(|i| i.to_string()).collect()
    }
}
