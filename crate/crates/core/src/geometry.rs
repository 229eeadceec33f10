//! Hilbert-space geometry of pure states.
//!
//! Distances, fidelities, energy uncertainty and the direct Hilbert velocity
//! `Q = Re<xi|dpsi/dt> = Im<xi|H|psi>`, where `xi` is the unit vector in
//! `span{psi, chi}` orthogonal to `psi` (the part of `chi` missing from `psi`).
//! All functions are pure.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex operator (Hamiltonians, propagators), in rad/s where physical.
pub type Operator = DMatrix<Complex64>;

/// Fidelity threshold separating the closed-form `xi` branch from the two
/// singular branches (orthogonal states, target reached).
pub const FIDELITY_EPS: f64 = 1e-12;

/// Max-norm tolerance for `H - H^dagger`.
pub const HERMITIAN_TOL: f64 = 1e-10;

const NORM_TOL: f64 = 1e-10;

/// Normalized pure state in a fixed orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amplitudes: DVector<Complex64>,
}

impl QuantumState {
    /// Wraps `amplitudes`, rejecting vectors that are not unit norm.
    pub fn new(amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::DimensionTooSmall(amplitudes.len()));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes `amplitudes` and wraps them.
    pub fn normalized(amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::DimensionTooSmall(amplitudes.len()));
        }
        let norm = amplitudes.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self {
            amplitudes: amplitudes / Complex64::new(norm, 0.0),
        })
    }

    /// Basis vector `index` of a `dim`-dimensional space.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::DimensionTooSmall(dim));
        }
        if index >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut v = DVector::zeros(dim);
        v[index] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes: v })
    }

    /// Builds a state from real amplitudes, normalizing them.
    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::normalized(DVector::from_iterator(
            values.len(),
            values.iter().map(|&x| Complex64::new(x, 0.0)),
        ))
    }

    /// Internal constructor for vectors that are unitary images of states.
    pub(crate) fn from_unitary_image(amplitudes: DVector<Complex64>) -> Self {
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<Complex64> {
        self.amplitudes
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &QuantumState) -> Result<Complex64> {
        check_dims(self.dim(), other.dim())?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Multiplies by the global phase that makes the largest-magnitude
    /// amplitude real and positive. Ties go to the lowest index.
    pub fn phase_fixed(&self) -> QuantumState {
        QuantumState {
            amplitudes: fix_phase(&self.amplitudes),
        }
    }
}

pub(crate) fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(a, b));
    }
    Ok(())
}

pub(crate) fn fix_phase(v: &DVector<Complex64>) -> DVector<Complex64> {
    let max = v.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    if max == 0.0 {
        return v.clone();
    }
    let pivot = v
        .iter()
        .find(|z| z.norm() >= max * (1.0 - 1e-12))
        .copied()
        .unwrap_or(Complex64::new(1.0, 0.0));
    let phase = pivot.conj() / pivot.norm();
    v * phase
}

/// Fails unless `h` is square and Hermitian within [`HERMITIAN_TOL`].
pub fn ensure_hermitian(h: &Operator) -> Result<()> {
    if h.nrows() != h.ncols() {
        return Err(Error::DimensionMismatch(h.nrows(), h.ncols()));
    }
    let n = h.nrows();
    let mut dev = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    if dev > HERMITIAN_TOL || !dev.is_finite() {
        return Err(Error::NotHermitian(dev));
    }
    Ok(())
}

fn check_operator(h: &Operator, psi: &QuantumState) -> Result<()> {
    ensure_hermitian(h)?;
    check_dims(h.nrows(), psi.dim())
}

/// Wootters distance `arccos |<alpha|beta>|`, in `[0, pi/2]`.
pub fn distance(alpha: &QuantumState, beta: &QuantumState) -> Result<f64> {
    let overlap = alpha.inner(beta)?.norm().clamp(0.0, 1.0);
    Ok(overlap.acos())
}

/// `|<chi|psi>|^2`.
pub fn fidelity(chi: &QuantumState, psi: &QuantumState) -> Result<f64> {
    Ok(chi.inner(psi)?.norm_sqr().clamp(0.0, 1.0))
}

/// Energy uncertainty `sqrt(<H^2> - <H>^2)`, the perpendicular speed.
pub fn energy_uncertainty(psi: &QuantumState, h: &Operator) -> Result<f64> {
    check_operator(h, psi)?;
    Ok(energy_uncertainty_unchecked(psi.amplitudes(), h))
}

pub(crate) fn energy_uncertainty_unchecked(psi: &DVector<Complex64>, h: &Operator) -> f64 {
    let h_psi = h * psi;
    let mean = psi.dotc(&h_psi);
    (h_psi - psi * mean).norm()
}

/// Which branch the `xi` construction took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FidelityRegime {
    /// `F` in `[eps, 1 - eps]`; closed form.
    Interior,
    /// `F < eps`; `xi` is `chi` (projected off `psi`) with a chosen phase.
    Orthogonal,
    /// `F > 1 - eps`; no direction left to move in.
    TargetReached,
}

impl FidelityRegime {
    pub fn of(f: f64) -> Self {
        if f > 1.0 - FIDELITY_EPS {
            FidelityRegime::TargetReached
        } else if f < FIDELITY_EPS {
            FidelityRegime::Orthogonal
        } else {
            FidelityRegime::Interior
        }
    }
}

/// Result of [`xi_state`].
#[derive(Debug, Clone, PartialEq)]
pub enum Xi {
    Interior(QuantumState),
    Orthogonal(QuantumState),
    TargetReached,
}

impl Xi {
    pub fn state(&self) -> Option<&QuantumState> {
        match self {
            Xi::Interior(s) | Xi::Orthogonal(s) => Some(s),
            Xi::TargetReached => None,
        }
    }
}

/// Unit vector orthogonal to `psi` in `span{psi, chi}`:
/// `xi = (|chi><chi| - F) psi / sqrt(F (1 - F))`.
///
/// At `F < eps` the phase is fixed so the largest amplitude is real positive.
pub fn xi_state(chi: &QuantumState, psi: &QuantumState) -> Result<Xi> {
    check_dims(chi.dim(), psi.dim())?;
    Ok(match xi_raw(chi.amplitudes(), psi.amplitudes(), None) {
        (FidelityRegime::Interior, Some(v)) => Xi::Interior(QuantumState::from_unitary_image(v)),
        (FidelityRegime::Orthogonal, Some(v)) => {
            Xi::Orthogonal(QuantumState::from_unitary_image(v))
        }
        _ => Xi::TargetReached,
    })
}

/// Core `xi` construction on raw vectors.
///
/// In the orthogonal branch, `motion` (the velocity `dpsi/dt`) picks the phase
/// that makes `<xi|motion>` real and non-negative; without it, or when the
/// projection of the motion onto `chi` vanishes, the largest-amplitude
/// convention applies.
pub(crate) fn xi_raw(
    chi: &DVector<Complex64>,
    psi: &DVector<Complex64>,
    motion: Option<&DVector<Complex64>>,
) -> (FidelityRegime, Option<DVector<Complex64>>) {
    let overlap = chi.dotc(psi);
    let f = overlap.norm_sqr();
    match FidelityRegime::of(f) {
        FidelityRegime::Interior => {
            let scale = (f * (1.0 - f)).sqrt();
            let v = (chi * overlap - psi * Complex64::new(f, 0.0)) / Complex64::new(scale, 0.0);
            (FidelityRegime::Interior, Some(v))
        }
        FidelityRegime::Orthogonal => {
            let projected = chi - psi * psi.dotc(chi);
            let norm = projected.norm();
            let v = projected / Complex64::new(norm, 0.0);
            let aligned = motion.and_then(|m| {
                let p = v.dotc(m);
                (p.norm() > 1e-300).then(|| &v * (p / p.norm()))
            });
            (
                FidelityRegime::Orthogonal,
                Some(aligned.unwrap_or_else(|| fix_phase(&v))),
            )
        }
        FidelityRegime::TargetReached => (FidelityRegime::TargetReached, None),
    }
}

/// Direct Hilbert velocity with the branch it was evaluated in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectVelocity {
    /// `Q` in rad/s; 0 when the target is reached.
    pub q: f64,
    pub regime: FidelityRegime,
}

/// `Q = Im<xi|H|psi>`, the rate at which `psi` approaches `chi`.
///
/// When `chi` is orthogonal to `psi` this equals `|<chi|dpsi/dt>|`.
pub fn direct_velocity(chi: &QuantumState, psi: &QuantumState, h: &Operator) -> Result<DirectVelocity> {
    check_dims(chi.dim(), psi.dim())?;
    check_operator(h, psi)?;
    Ok(direct_velocity_unchecked(chi.amplitudes(), psi.amplitudes(), h))
}

pub(crate) fn direct_velocity_unchecked(
    chi: &DVector<Complex64>,
    psi: &DVector<Complex64>,
    h: &Operator,
) -> DirectVelocity {
    let h_psi = h * psi;
    let motion = &h_psi * Complex64::new(0.0, -1.0);
    match xi_raw(chi, psi, Some(&motion)) {
        (regime, Some(xi)) => DirectVelocity {
            q: xi.dotc(&h_psi).im,
            regime,
        },
        (regime, None) => DirectVelocity { q: 0.0, regime },
    }
}

/// Pontryagin Hamiltonian `2 Im[<chi|H|psi><psi|chi>]`; equals
/// `2 sqrt(F(1-F)) Q` and is regular at `F = 0` and `F = 1`.
pub fn pontryagin_hamiltonian(chi: &QuantumState, psi: &QuantumState, h: &Operator) -> Result<f64> {
    check_dims(chi.dim(), psi.dim())?;
    check_operator(h, psi)?;
    let chi_h_psi = chi.amplitudes().dotc(&(h * psi.amplitudes()));
    let psi_chi = psi.amplitudes().dotc(chi.amplitudes());
    Ok(2.0 * (chi_h_psi * psi_chi).im)
}

/// Trajectory length `C = sum_j dE_j dt_j` over piecewise-constant segments.
///
/// Each entry is `(state at the segment start, segment Hamiltonian, duration)`.
/// `dE` is conserved within a segment because `H` commutes with its own
/// propagator, so the sum is exact.
pub fn trajectory_length(segments: &[(QuantumState, Operator, f64)]) -> Result<f64> {
    if segments.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    segments.iter().try_fold(0.0, |acc, (psi, h, dt)| {
        if *dt < 0.0 {
            return Err(Error::NonPositiveDuration(0, *dt));
        }
        Ok(acc + energy_uncertainty(psi, h)? * dt)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sigma_x(scale: f64) -> Operator {
        DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(scale, 0.), c(scale, 0.), c(0., 0.)])
    }

    fn ket(v: &[Complex64]) -> QuantumState {
        QuantumState::normalized(DVector::from_column_slice(v)).unwrap()
    }

    #[test]
    fn distance_cases() {
        let zero = QuantumState::basis(2, 0).unwrap();
        let one = QuantumState::basis(2, 1).unwrap();
        let plus = QuantumState::from_real(&[1.0, 1.0]).unwrap();
        assert_eq!(distance(&zero, &zero).unwrap(), 0.0);
        assert!((distance(&zero, &one).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((distance(&zero, &plus).unwrap() - FRAC_PI_4).abs() < 1e-12);
        let three = QuantumState::basis(3, 0).unwrap();
        assert!(matches!(distance(&zero, &three), Err(Error::DimensionMismatch(2, 3))));
    }

    #[test]
    fn fidelity_cases() {
        let zero = QuantumState::basis(2, 0).unwrap();
        let one = QuantumState::basis(2, 1).unwrap();
        let plus = QuantumState::from_real(&[1.0, 1.0]).unwrap();
        assert!((fidelity(&zero, &zero).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(fidelity(&zero, &one).unwrap(), 0.0);
        assert!((fidelity(&plus, &zero).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_unnormalized_and_small() {
        let v = DVector::from_column_slice(&[c(1.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(QuantumState::new(v), Err(Error::NotNormalized(_))));
        let v = DVector::from_column_slice(&[c(1.0, 0.0)]);
        assert!(matches!(QuantumState::new(v), Err(Error::DimensionTooSmall(1))));
    }

    #[test]
    fn energy_uncertainty_rabi_and_eigenstate() {
        let omega = 3.0;
        let h = sigma_x(omega / 2.0);
        let zero = QuantumState::basis(2, 0).unwrap();
        assert!((energy_uncertainty(&zero, &h).unwrap() - omega / 2.0).abs() < 1e-15);
        let plus = QuantumState::from_real(&[1.0, 1.0]).unwrap();
        assert!(energy_uncertainty(&plus, &h).unwrap() < 1e-15);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut h = sigma_x(1.0);
        h[(0, 1)] = c(1.0, 0.5);
        let zero = QuantumState::basis(2, 0).unwrap();
        assert!(matches!(energy_uncertainty(&zero, &h), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn xi_half_fidelity() {
        let zero = QuantumState::basis(2, 0).unwrap();
        let plus = QuantumState::from_real(&[1.0, 1.0]).unwrap();
        // F = 1/2: xi = (plus/sqrt2 - zero/2) / (1/2) = |1>.
        let xi = xi_state(&plus, &zero).unwrap();
        let Xi::Interior(xi) = xi else { panic!("expected interior branch") };
        assert!((xi.amplitudes()[0]).norm() < 1e-15);
        assert!((xi.amplitudes()[1] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn xi_orthogonal_and_reached() {
        let zero = QuantumState::basis(2, 0).unwrap();
        let one = ket(&[c(0.0, 0.0), c(0.0, 1.0)]);
        let Xi::Orthogonal(xi) = xi_state(&one, &zero).unwrap() else { panic!() };
        assert!((xi.amplitudes()[1] - c(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(xi_state(&zero, &zero).unwrap(), Xi::TargetReached);
    }

    #[test]
    fn direct_velocity_geodesic_two_level() {
        let omega = 2.0;
        let h = sigma_x(omega / 2.0);
        let zero = QuantumState::basis(2, 0).unwrap();
        let one = QuantumState::basis(2, 1).unwrap();
        let v = direct_velocity(&one, &zero, &h).unwrap();
        assert_eq!(v.regime, FidelityRegime::Orthogonal);
        assert!((v.q - omega / 2.0).abs() < 1e-15);
        // Halfway along the Rabi arc the motion is still geodesic.
        let mid = ket(&[c(FRAC_1_SQRT_2, 0.0), c(0.0, -FRAC_1_SQRT_2)]);
        let target = ket(&[c(0.0, 0.0), c(0.0, -1.0)]);
        let v = direct_velocity(&target, &mid, &h).unwrap();
        assert_eq!(v.regime, FidelityRegime::Interior);
        assert!((v.q - omega / 2.0).abs() < 1e-14);
        let p = pontryagin_hamiltonian(&target, &mid, &h).unwrap();
        assert!((p - omega / 2.0).abs() < 1e-14);
    }

    #[test]
    fn direct_velocity_stationary_and_reached() {
        let h = sigma_x(1.0);
        let plus = QuantumState::from_real(&[1.0, 1.0]).unwrap();
        let minus = QuantumState::from_real(&[1.0, -1.0]).unwrap();
        let zero = QuantumState::basis(2, 0).unwrap();
        assert!(direct_velocity(&zero, &plus, &h).unwrap().q.abs() < 1e-15);
        assert!(direct_velocity(&minus, &plus, &h).unwrap().q.abs() < 1e-15);
        let v = direct_velocity(&plus, &plus, &h).unwrap();
        assert_eq!(v, DirectVelocity { q: 0.0, regime: FidelityRegime::TargetReached });
    }

    #[test]
    fn pontryagin_vanishes_at_extremes() {
        let h = sigma_x(1.0);
        let zero = QuantumState::basis(2, 0).unwrap();
        let one = QuantumState::basis(2, 1).unwrap();
        assert_eq!(pontryagin_hamiltonian(&one, &zero, &h).unwrap(), 0.0);
        assert_eq!(pontryagin_hamiltonian(&zero, &zero, &h).unwrap(), 0.0);
    }

    #[test]
    fn trajectory_length_constant_speed() {
        let omega = 5.0;
        let h = sigma_x(omega / 2.0);
        let zero = QuantumState::basis(2, 0).unwrap();
        let c_len = trajectory_length(&[(zero, h, 0.4)]).unwrap();
        assert!((c_len - omega / 2.0 * 0.4).abs() < 1e-15);
        assert!(trajectory_length(&[]).is_err());
    }

    #[test]
    fn phase_fix_prefers_first_of_ties() {
        let s = ket(&[c(0.0, 1.0), c(0.0, -1.0)]);
        let f = s.phase_fixed();
        assert!((f.amplitudes()[0] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((f.amplitudes()[1] - c(-FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
    }
}
