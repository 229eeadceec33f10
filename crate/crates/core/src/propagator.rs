//! Exact propagators `exp(-i H dt)` for constant Hermitian `H`.
//!
//! The eigendecomposition is kept so that the derivative of the propagator
//! with respect to a change of `H` (the Daleckii-Krein formula) is available
//! without another factorization.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{ensure_hermitian, Operator};

/// Factorized `U = V exp(-i Lambda dt) V^dagger`.
#[derive(Debug, Clone)]
pub struct SegmentPropagator {
    eigenvalues: DVector<f64>,
    eigenvectors: Operator,
    /// Set when `H` is real symmetric, so `V` is real orthogonal.
    real_vectors: Option<DMatrix<f64>>,
    /// `exp(-i l_a dt / 2)`.
    half_phases: DVector<Complex64>,
    unitary: Operator,
    dt: f64,
    divided: OnceLock<DMatrix<Complex64>>,
}

impl SegmentPropagator {
    pub fn new(h: &Operator, dt: f64) -> Result<Self> {
        ensure_hermitian(h)?;
        if !(dt >= 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("propagation time {dt} must be >= 0")));
        }
        Ok(Self::new_unchecked(h, dt))
    }

    pub(crate) fn new_unchecked(h: &Operator, dt: f64) -> Self {
        let (eigenvalues, eigenvectors, real_vectors) = if h.iter().all(|z| z.im == 0.0) {
            let eig = h.map(|z| z.re).symmetric_eigen();
            let complex = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
            (eig.eigenvalues, complex, Some(eig.eigenvectors))
        } else {
            let eig = h.clone().symmetric_eigen();
            (eig.eigenvalues, eig.eigenvectors, None)
        };
        let half_phases = eigenvalues.map(|l| Complex64::from_polar(1.0, -0.5 * l * dt));
        let n = eigenvalues.len();
        let unitary = match &real_vectors {
            Some(v) => Operator::from_fn(n, n, |i, j| {
                (0..n).fold(Complex64::new(0.0, 0.0), |acc, k| {
                    acc + half_phases[k] * half_phases[k] * (v[(i, k)] * v[(j, k)])
                })
            }),
            None => {
                let mut scaled = eigenvectors.clone();
                for (k, mut col) in scaled.column_iter_mut().enumerate() {
                    col *= half_phases[k] * half_phases[k];
                }
                scaled * eigenvectors.adjoint()
            }
        };
        Self {
            eigenvalues,
            eigenvectors,
            real_vectors,
            half_phases,
            unitary,
            dt,
            divided: OnceLock::new(),
        }
    }

    pub fn unitary(&self) -> &Operator {
        &self.unitary
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn apply(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        &self.unitary * v
    }

    pub fn apply_adjoint(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        self.unitary.ad_mul(v)
    }

    /// `<bra| dU/dH[dh] |ket>` for a Hermitian direction `dh`.
    ///
    /// In the eigenbasis, `(dU)_ab = (V^dagger dh V)_ab * phi(l_a, l_b)` with
    /// `phi = (e^{-i l_a dt} - e^{-i l_b dt}) / (l_a - l_b)`, written in the
    /// `sinc` form so that degenerate eigenvalues need no special case.
    pub fn directional_matrix_element(
        &self,
        bra: &DVector<Complex64>,
        dh: &Operator,
        ket: &DVector<Complex64>,
    ) -> Complex64 {
        self.directional_matrix_elements(bra, std::slice::from_ref(dh), ket)[0]
    }

    /// [`Self::directional_matrix_element`] for several directions sharing
    /// one eigenbasis transform of `bra` and `ket`.
    pub fn directional_matrix_elements(
        &self,
        bra: &DVector<Complex64>,
        dhs: &[Operator],
        ket: &DVector<Complex64>,
    ) -> Vec<Complex64> {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let bra_e = v.ad_mul(bra);
        let ket_e = v.ad_mul(ket);
        let phi = self.divided.get_or_init(|| self.divided_differences());
        // w_ab = conj(bra_a) phi_ab ket_b, so the element is sum_ab (V^dag dh V)_ab w_ab.
        let w = DMatrix::from_fn(n, n, |a, b| bra_e[a].conj() * phi[(a, b)] * ket_e[b]);
        dhs.iter()
            .map(|dh| {
                let real_dh = self
                    .real_vectors
                    .as_ref()
                    .filter(|_| dh.iter().all(|z| z.im == 0.0));
                match real_dh {
                    Some(vr) => {
                        let dh_e = vr.transpose() * (dh.map(|z| z.re) * vr);
                        dh_e.iter()
                            .zip(w.iter())
                            .fold(Complex64::new(0.0, 0.0), |acc, (d, x)| acc + x * *d)
                    }
                    None => {
                        let dh_e = v.adjoint() * dh * v;
                        dh_e.iter()
                            .zip(w.iter())
                            .fold(Complex64::new(0.0, 0.0), |acc, (d, x)| acc + x * d)
                    }
                }
            })
            .collect()
    }

    /// `phi_ab = -i dt e^{-i (l_a + l_b) dt / 2} sinc((l_a - l_b) dt / 2)`.
    fn divided_differences(&self) -> DMatrix<Complex64> {
        let n = self.eigenvalues.len();
        let h = &self.half_phases;
        DMatrix::from_fn(n, n, |a, b| {
            let x = 0.5 * (self.eigenvalues[a] - self.eigenvalues[b]) * self.dt;
            let sinc = if x.abs() < 1e-4 {
                1.0 - x * x / 6.0 * (1.0 - x * x / 20.0)
            } else {
                // sin(x) from the cached phases: conj(h_a) h_b = e^{i x}.
                (h[a].conj() * h[b]).im / x
            };
            Complex64::new(0.0, -self.dt * sinc) * h[a] * h[b]
        })
    }
}

/// `exp(-i H dt)` via Hermitian eigendecomposition.
pub fn segment_propagator(h: &Operator, dt: f64) -> Result<DMatrix<Complex64>> {
    Ok(SegmentPropagator::new(h, dt)?.unitary)
}
