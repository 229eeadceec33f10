//! Constant-control scans over the process duration and their division into
//! sections at the zeros of `F(T)`.

use crate::dynamics::{simulate, ControlSequence};
use crate::error::{Error, Result};
use crate::models::HamiltonianModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub t: f64,
    pub fidelity: f64,
    pub q: f64,
    pub delta_e: f64,
    /// Trajectory length `C`.
    pub length: f64,
}

/// Evolves under the fixed control `u` for every duration in `times`.
pub fn constant_scan(model: &dyn HamiltonianModel, u: &[f64], times: &[f64]) -> Result<Vec<ScanPoint>> {
    model.check_controls(u)?;
    times
        .iter()
        .map(|&t| {
            if t == 0.0 {
                let f = model
                    .target_state()
                    .inner(&model.initial_state())?
                    .norm_sqr();
                return Ok(ScanPoint {
                    t,
                    fidelity: f,
                    q: 0.0,
                    delta_e: 0.0,
                    length: 0.0,
                });
            }
            let rec = simulate(&ControlSequence::constant(u, t, 1)?, model)?;
            Ok(ScanPoint {
                t,
                fidelity: rec.final_fidelity(),
                q: rec.mean_q(),
                delta_e: rec.delta_e.values()[0],
                length: rec.trajectory_length(),
            })
        })
        .collect()
}

/// `count` equally spaced durations on `(0, t_max]`.
pub fn duration_grid(t_max: f64, count: usize) -> Result<Vec<f64>> {
    if !(t_max > 0.0) || count == 0 {
        return Err(Error::InvalidArgument(format!(
            "scan needs t_max > 0 and at least one point (got {t_max}, {count})"
        )));
    }
    Ok((1..=count).map(|i| t_max * i as f64 / count as f64).collect())
}

/// Interval of durations between consecutive zeros of `F(T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub t_lo: f64,
    pub t_hi: f64,
    /// Duration inside the section with the largest `F`, used as a seed.
    pub t_seed: f64,
}

/// Indices of local minima of `F` with `F < zero_tol`.
pub fn fidelity_zeros(points: &[ScanPoint], zero_tol: f64) -> Vec<usize> {
    (1..points.len().saturating_sub(1))
        .filter(|&i| {
            let f = points[i].fidelity;
            f < zero_tol && f <= points[i - 1].fidelity && f < points[i + 1].fidelity
        })
        .collect()
}

/// Splits the scan at the zeros of `F`; the last point closes the final section.
pub fn scan_sections(points: &[ScanPoint], zero_tol: f64) -> Vec<Section> {
    if points.is_empty() {
        return Vec::new();
    }
    let mut cuts = vec![0];
    cuts.extend(fidelity_zeros(points, zero_tol));
    cuts.push(points.len() - 1);
    cuts.windows(2)
        .filter(|w| w[1] > w[0] + 1)
        .map(|w| {
            let inner = &points[w[0] + 1..w[1]];
            let best = inner
                .iter()
                .max_by(|a, b| a.fidelity.total_cmp(&b.fidelity))
                .expect("non-empty section");
            Section {
                t_lo: points[w[0]].t,
                t_hi: points[w[1]].t,
                t_seed: best.t,
            }
        })
        .collect()
}
