//! `N` indistinguishable three-level atoms (ground states 1 and 2, Rydberg
//! state r) under perfect Rydberg blockade.
//!
//! The symmetric subspace with at most one Rydberg excitation is spanned by
//! `|n1, n2, nr>` with `n1 + n2 + nr = N`, `nr <= 1`, which gives `2N + 1`
//! states. The Hamiltonian is
//!
//! ```text
//! H = Omega_max u1 J_x + Omega_max ur (a2^dag s- + a2 s+) / 2,
//! J_x = (a1^dag a2 + a1 a2^dag) / 2.
//! ```

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{affine_combination, ControlBounds, HamiltonianModel};
use crate::error::{Error, Result};
use crate::geometry::{fix_phase, Operator, QuantumState};

/// Occupation numbers of a symmetric basis state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SymmetricBasisState {
    pub n1: usize,
    pub n2: usize,
    pub nr: usize,
}

impl fmt::Display for SymmetricBasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{},{},{}>", self.n1, self.n2, self.nr)
    }
}

/// Ordered basis: `nr` ascending, then `n2` ascending.
pub fn build_symmetric_basis(n_atoms: usize) -> Result<Vec<SymmetricBasisState>> {
    if n_atoms == 0 {
        return Err(Error::InvalidArgument("atom count must be at least 1".into()));
    }
    let mut basis = Vec::with_capacity(2 * n_atoms + 1);
    for nr in 0..=1 {
        for n2 in 0..=(n_atoms - nr) {
            basis.push(SymmetricBasisState {
                n1: n_atoms - nr - n2,
                n2,
                nr,
            });
        }
    }
    Ok(basis)
}

#[derive(Debug, Clone)]
pub struct RydbergModel {
    n_atoms: usize,
    omega_max: f64,
    basis: Vec<SymmetricBasisState>,
    /// `[Omega_max J_x, Omega_max (a2^dag s- + a2 s+)/2]`.
    generators: [Operator; 2],
    bounds: [ControlBounds; 2],
    initial: QuantumState,
    target: QuantumState,
}

impl RydbergModel {
    pub fn new(n_atoms: usize, omega_max: f64) -> Result<Self> {
        if !(omega_max > 0.0) || !omega_max.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "omega_max must be positive (got {omega_max})"
            )));
        }
        let basis = build_symmetric_basis(n_atoms)?;
        let jx = jx_matrix(&basis);
        let jc = jc_matrix(&basis);
        let scale = |m: &DMatrix<f64>| m.map(|x| Complex64::new(omega_max * x, 0.0));
        let generators = [scale(&jx), scale(&jc)];
        let initial = rydberg_initial_in(&basis, n_atoms)?;
        let target = rydberg_target_in(&basis, &jx, n_atoms)?;
        Ok(Self {
            n_atoms,
            omega_max,
            basis,
            generators,
            bounds: [ControlBounds::UNIT; 2],
            initial,
            target,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn basis(&self) -> &[SymmetricBasisState] {
        &self.basis
    }

    pub fn index_of(&self, state: SymmetricBasisState) -> Option<usize> {
        self.basis.iter().position(|&b| b == state)
    }
}

impl HamiltonianModel for RydbergModel {
    fn name(&self) -> &str {
        "rydberg"
    }

    fn dim(&self) -> usize {
        self.basis.len()
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
        self.initial.clone()
    }

    fn target_state(&self) -> QuantumState {
        self.target.clone()
    }

    fn basis_labels(&self) -> Vec<String> {
        self.basis.iter().map(ToString::to_string).collect()
    }
}

/// `H(u1, ur)` for `model`, rejecting out-of-bounds controls.
pub fn rydberg_hamiltonian(u1: f64, ur: f64, model: &RydbergModel) -> Result<Operator> {
    model.build(&[u1, ur])
}

/// `|N, 0, 0>`.
pub fn rydberg_initial(n_atoms: usize) -> Result<QuantumState> {
    let basis = build_symmetric_basis(n_atoms)?;
    rydberg_initial_in(&basis, n_atoms)
}

/// Zero eigenvector of `J_x` in the block with `nr = N mod 2`, phase-fixed.
pub fn rydberg_target(n_atoms: usize) -> Result<QuantumState> {
    let basis = build_symmetric_basis(n_atoms)?;
    let jx = jx_matrix(&basis);
    rydberg_target_in(&basis, &jx, n_atoms)
}

fn rydberg_initial_in(basis: &[SymmetricBasisState], n_atoms: usize) -> Result<QuantumState> {
    let idx = basis
        .iter()
        .position(|b| b.n1 == n_atoms && b.nr == 0)
        .expect("|N,0,0> is always in the basis");
    QuantumState::basis(basis.len(), idx)
}

fn rydberg_target_in(
    basis: &[SymmetricBasisState],
    jx: &DMatrix<f64>,
    n_atoms: usize,
) -> Result<QuantumState> {
    let nr = n_atoms % 2;
    let block: Vec<usize> = (0..basis.len()).filter(|&i| basis[i].nr == nr).collect();
    let sub = DMatrix::from_fn(block.len(), block.len(), |a, b| jx[(block[a], block[b])]);
    let eig = sub.symmetric_eigen();
    let zeros: Vec<usize> = (0..block.len())
        .filter(|&i| eig.eigenvalues[i].abs() < 1e-9)
        .collect();
    if zeros.len() != 1 {
        return Err(Error::ZeroEigenspace(zeros.len()));
    }
    let v = eig.eigenvectors.column(zeros[0]);
    let mut full = DVector::zeros(basis.len());
    for (a, &i) in block.iter().enumerate() {
        full[i] = Complex64::new(v[a], 0.0);
    }
    QuantumState::normalized(fix_phase(&full))
}

/// `<n1+1, n2-1, nr| J_x |n1, n2, nr> = sqrt((n1+1) n2) / 2`, plus conjugate.
fn jx_matrix(basis: &[SymmetricBasisState]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(basis.len(), basis.len());
    for (i, s) in basis.iter().enumerate() {
        if s.n2 == 0 {
            continue;
        }
        let to = SymmetricBasisState {
            n1: s.n1 + 1,
            n2: s.n2 - 1,
            nr: s.nr,
        };
        if let Some(j) = basis.iter().position(|&b| b == to) {
            let v = 0.5 * (((s.n1 + 1) * s.n2) as f64).sqrt();
            m[(j, i)] = v;
            m[(i, j)] = v;
        }
    }
    m
}

/// `<n1, n2-1, 1| (a2 s+)/2 |n1, n2, 0> = sqrt(n2) / 2`, plus conjugate.
fn jc_matrix(basis: &[SymmetricBasisState]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(basis.len(), basis.len());
    for (i, s) in basis.iter().enumerate() {
        if s.nr != 0 || s.n2 == 0 {
            continue;
        }
        let to = SymmetricBasisState {
            n1: s.n1,
            n2: s.n2 - 1,
            nr: 1,
        };
        if let Some(j) = basis.iter().position(|&b| b == to) {
            let v = 0.5 * (s.n2 as f64).sqrt();
            m[(j, i)] = v;
            m[(i, j)] = v;
        }
    }
    m
}
