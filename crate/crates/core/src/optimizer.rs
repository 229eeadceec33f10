//! Sequential (Krotov-style) control optimization by ascent of the direct
//! Hilbert velocity.
//!
//! One sweep visits the segments in order. For each segment it evaluates the
//! gradient of the final distance with respect to the segment control, using
//! the already updated forward state and the backward-propagated target,
//! steps the control, projects it into bounds and re-propagates that segment
//! before moving on.

use std::fmt;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::dynamics::{simulate_with, ControlSequence, PropagatorCache, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::geometry::{check_dims, xi_raw, FidelityRegime, QuantumState};
use crate::grid::{sigma_q, GridSeries};
use crate::models::{ControlBounds, HamiltonianModel};
use crate::propagator::SegmentPropagator;

/// Componentwise clamp into `bounds`.
pub fn project_bounds(u: &[f64], bounds: &[ControlBounds]) -> Vec<f64> {
    u.iter().zip(bounds).map(|(&x, b)| b.clamp(x)).collect()
}

/// Gradient of the instantaneous direct velocity, `Im<xi|dH/du_k|psi>`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGradient {
    pub values: Vec<f64>,
    pub regime: FidelityRegime,
}

/// `dQ/du_k = Im<xi|dH/du_k|psi>` for states at a common time.
///
/// With `chi` orthogonal to `psi`, `xi` takes the phase of the current motion
/// (the same convention as [`crate::geometry::direct_velocity`]). When the
/// target is reached the gradient is zero.
pub fn control_gradient(
    chi: &QuantumState,
    psi: &QuantumState,
    u: &[f64],
    model: &dyn HamiltonianModel,
) -> Result<ControlGradient> {
    check_dims(chi.dim(), psi.dim())?;
    check_dims(psi.dim(), model.dim())?;
    let h = model.build(u)?;
    let psi_v = psi.amplitudes();
    let motion = (&h * psi_v) * Complex64::new(0.0, -1.0);
    let (regime, xi) = xi_raw(chi.amplitudes(), psi_v, Some(&motion));
    let values = match xi {
        Some(xi) => (0..model.control_count())
            .map(|k| xi.dotc(&(model.gradient(u, k) * psi_v)).im)
            .collect(),
        None => vec![0.0; model.control_count()],
    };
    Ok(ControlGradient { values, regime })
}

/// Pontryagin switching-function gradient `2 Im[<chi|dH/du_k|psi><psi|chi>]`.
///
/// Regular at `F = 0` and `F = 1`; equals `2 sqrt(F(1-F))` times
/// [`control_gradient`] in between.
pub fn pontryagin_gradient(
    chi: &QuantumState,
    psi: &QuantumState,
    u: &[f64],
    model: &dyn HamiltonianModel,
) -> Result<Vec<f64>> {
    check_dims(chi.dim(), psi.dim())?;
    model.check_controls(u)?;
    let psi_chi = psi.amplitudes().dotc(chi.amplitudes());
    Ok((0..model.control_count())
        .map(|k| {
            let m = chi
                .amplitudes()
                .dotc(&(model.gradient(u, k) * psi.amplitudes()));
            2.0 * (m * psi_chi).im
        })
        .collect())
}

/// Exact gradient of the final distance with respect to one segment's
/// control, expressed as a rate.
///
/// `values[k] = -(dD/du_k) / dt = Re<xi(t_j)|dU_j/du_k|psi(t_{j-1})> / dt`,
/// where `xi(t_j)` is built from `chi(t_j)` and `psi(t_j) = U_j psi(t_{j-1})`.
/// It tends to `Im<xi|dH/du_k|psi>` as `dt -> 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentGradient {
    pub values: Vec<f64>,
    pub regime: FidelityRegime,
    /// Fidelity at the segment end, `|<chi(t_j)|psi(t_j)>|^2`.
    pub fidelity: f64,
}

pub(crate) fn segment_gradient_raw(
    chi_end: &DVector<Complex64>,
    psi_start: &DVector<Complex64>,
    prop: &SegmentPropagator,
    u: &[f64],
    model: &dyn HamiltonianModel,
) -> SegmentGradient {
    let psi_end = prop.apply(psi_start);
    let fidelity = chi_end.dotc(&psi_end).norm_sqr();
    let h = model.build_unchecked(u);
    let motion = (&h * &psi_end) * Complex64::new(0.0, -1.0);
    let (regime, xi) = xi_raw(chi_end, &psi_end, Some(&motion));
    let dt = prop.dt();
    let values = match xi {
        Some(xi) if dt > 0.0 => {
            let dhs: Vec<_> = (0..model.control_count()).map(|k| model.gradient(u, k)).collect();
            prop.directional_matrix_elements(&xi, &dhs, psi_start)
                .iter()
                .map(|d| d.re / dt)
                .collect()
        }
        _ => vec![0.0; model.control_count()],
    };
    SegmentGradient {
        values,
        regime,
        fidelity,
    }
}

/// Gradient of the final fidelity `F(T)` with respect to every control of
/// every segment, `dF/du_{jk}`, by the exact propagator derivative.
pub fn fidelity_gradient(seq: &ControlSequence, model: &dyn HamiltonianModel) -> Result<Vec<Vec<f64>>> {
    let mut cache = PropagatorCache::new(seq.len());
    seq.validate(model)?;
    let props = cache.propagators(seq, model);
    let fwd = props.forward_states(model.initial_state().amplitudes());
    let bwd = props.backward_states(model.target_state().amplitudes());
    let overlap = bwd[0].dotc(&fwd[0]);
    Ok((0..seq.len())
        .map(|j| {
            let dhs: Vec<_> = (0..model.control_count()).map(|k| model.gradient(seq.control(j), k)).collect();
            props
                .segment(j)
                .directional_matrix_elements(&bwd[j + 1], &dhs, &fwd[j])
                .iter()
                .map(|d| 2.0 * (overlap.conj() * d).re)
                .collect()
        })
        .collect())
}

/// Gradient of the final distance, `-(dD/du_{jk}) / dt_j`, for all segments.
pub fn distance_rate_gradient(
    seq: &ControlSequence,
    model: &dyn HamiltonianModel,
) -> Result<Vec<SegmentGradient>> {
    seq.validate(model)?;
    let mut cache = PropagatorCache::new(seq.len());
    let props = cache.propagators(seq, model);
    let fwd = props.forward_states(model.initial_state().amplitudes());
    let bwd = props.backward_states(model.target_state().amplitudes());
    Ok((0..seq.len())
        .map(|j| segment_gradient_raw(&bwd[j + 1], &fwd[j], props.segment(j), seq.control(j), model))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepDirection {
    Forward,
    Backward,
    Alternating,
}

impl SweepDirection {
    fn forward_on(&self, sweep_index: usize) -> bool {
        match self {
            SweepDirection::Forward => true,
            SweepDirection::Backward => false,
            SweepDirection::Alternating => sweep_index % 2 == 0,
        }
    }
}

/// Backtracking on the global fidelity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    /// Step multiplier after a rejected sweep.
    pub shrink: f64,
    /// Step multiplier applied at the start of the sweep after an accepted one.
    pub grow: f64,
    /// Rejected attempts tolerated within one sweep.
    pub max_shrinks: usize,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self {
            shrink: 0.5,
            grow: 1.5,
            max_shrinks: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    /// Dimensionless step scale `c`; segment `j` uses `alpha_j = c / (Omega_max dt_j)`
    /// on the distance gradient `-dD/du_j`.
    pub step_alpha: f64,
    pub max_sweeps: usize,
    /// A sweep improving `F` by less than this counts toward convergence.
    pub fidelity_tol: f64,
    /// Threshold for reporting a converged iterate as optimal.
    pub sigma_q_tol: f64,
    /// Consecutive small-improvement sweeps that end the run.
    pub stall_window: usize,
    /// `F >= 1 - target_tol` ends the run as target reached.
    pub target_tol: f64,
    pub sweep_direction: SweepDirection,
    pub line_search: Option<LineSearch>,
    /// Upper limit on the adapted step scale, as a multiple of `step_alpha`.
    pub max_step_growth: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            step_alpha: 0.1,
            max_sweeps: 2000,
            fidelity_tol: 1e-10,
            sigma_q_tol: 1e-2,
            stall_window: 5,
            target_tol: 1e-10,
            sweep_direction: SweepDirection::Forward,
            line_search: Some(LineSearch::default()),
            max_step_growth: 1e3,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be positive (got {v})")))
            }
        };
        positive("step_alpha", self.step_alpha)?;
        positive("fidelity_tol", self.fidelity_tol)?;
        positive("sigma_q_tol", self.sigma_q_tol)?;
        positive("target_tol", self.target_tol)?;
        positive("max_step_growth", self.max_step_growth)?;
        if self.stall_window == 0 {
            return Err(Error::InvalidArgument("stall_window must be at least 1".into()));
        }
        if let Some(ls) = &self.line_search {
            if !(ls.shrink > 0.0 && ls.shrink < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "line search shrink must lie in (0, 1) (got {})",
                    ls.shrink
                )));
            }
            positive("line search grow", ls.grow)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// `stall_window` consecutive sweeps improved `F` by less than `fidelity_tol`.
    Converged,
    SweepBudget,
    TargetReached,
    /// No non-decreasing step was found by the line search.
    Stalled,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::SweepBudget => "sweep_budget",
            Termination::TargetReached => "target_reached",
            Termination::Stalled => "stalled",
        })
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationReport {
    pub sequence: ControlSequence,
    /// `F(T)` before the first sweep and after every accepted sweep.
    pub fidelity_history: Vec<f64>,
    /// `sigma_Q` matching `fidelity_history` (NaN where undefined).
    pub sigma_q_history: Vec<f64>,
    pub q: GridSeries,
    pub mean_q: f64,
    pub sigma_q: f64,
    pub sweeps: usize,
    pub termination: Termination,
    pub record: TrajectoryRecord,
}

impl OptimizationReport {
    pub fn final_fidelity(&self) -> f64 {
        *self.fidelity_history.last().expect("history holds the initial value")
    }

    /// Whether `sigma_Q` is below `tol` at the final iterate.
    pub fn is_optimal(&self, tol: f64) -> bool {
        self.sigma_q.is_finite() && self.sigma_q < tol
    }

    /// True when every control component sits strictly inside its bounds.
    pub fn controls_interior(&self, bounds: &[ControlBounds], margin: f64) -> bool {
        self.sequence
            .controls()
            .iter()
            .all(|u| u.iter().zip(bounds).all(|(&x, b)| x > b.lo + margin && x < b.hi - margin))
    }
}

fn sigma_q_or_nan(q: &GridSeries) -> f64 {
    sigma_q(q).unwrap_or(f64::NAN)
}

/// Runs sequential sweeps until convergence, target, stall or budget.
pub fn optimize(
    seq: &ControlSequence,
    model: &dyn HamiltonianModel,
    cfg: &OptimizerConfig,
) -> Result<OptimizationReport> {
    cfg.validate()?;
    seq.validate(model)?;
    let mut state = Optimizer::new(seq.clone(), model, cfg);
    let mut fidelity_history = vec![state.fidelity];
    let mut sigma_q_history = vec![sigma_q_or_nan(&state.record.q)];
    let mut small_steps = 0;
    let mut sweeps = 0;
    let termination = loop {
        if state.fidelity >= 1.0 - cfg.target_tol {
            break Termination::TargetReached;
        }
        if sweeps >= cfg.max_sweeps {
            break Termination::SweepBudget;
        }
        let before = state.fidelity;
        if !state.step(sweeps) {
            break Termination::Stalled;
        }
        sweeps += 1;
        fidelity_history.push(state.fidelity);
        sigma_q_history.push(sigma_q_or_nan(&state.record.q));
        if state.fidelity - before < cfg.fidelity_tol {
            small_steps += 1;
            if small_steps >= cfg.stall_window {
                break Termination::Converged;
            }
        } else {
            small_steps = 0;
        }
    };
    let record = state.record;
    Ok(OptimizationReport {
        sequence: state.seq,
        fidelity_history,
        sigma_q_history,
        q: record.q.clone(),
        mean_q: record.mean_q(),
        sigma_q: sigma_q_or_nan(&record.q),
        sweeps,
        termination,
        record,
    })
}

/// One sweep (with line search when enabled), returning the updated controls.
pub fn sweep(
    seq: &ControlSequence,
    model: &dyn HamiltonianModel,
    cfg: &OptimizerConfig,
) -> Result<ControlSequence> {
    cfg.validate()?;
    seq.validate(model)?;
    let mut state = Optimizer::new(seq.clone(), model, cfg);
    state.step(0);
    Ok(state.seq)
}

struct Optimizer<'a> {
    model: &'a dyn HamiltonianModel,
    cfg: &'a OptimizerConfig,
    seq: ControlSequence,
    cache: PropagatorCache,
    record: TrajectoryRecord,
    fidelity: f64,
    step_scale: f64,
    chi_t: DVector<Complex64>,
    psi0: DVector<Complex64>,
}

impl<'a> Optimizer<'a> {
    fn new(seq: ControlSequence, model: &'a dyn HamiltonianModel, cfg: &'a OptimizerConfig) -> Self {
        let mut cache = PropagatorCache::new(seq.len());
        let props = cache.propagators(&seq, model);
        let record = simulate_with(&props, &seq, model);
        let fidelity = record.final_fidelity();
        Self {
            model,
            cfg,
            chi_t: model.target_state().into_amplitudes(),
            psi0: model.initial_state().into_amplitudes(),
            seq,
            cache,
            record,
            fidelity,
            step_scale: cfg.step_alpha,
        }
    }

    /// Attempts one accepted sweep. Returns false when the line search fails.
    fn step(&mut self, sweep_index: usize) -> bool {
        let forward = self.cfg.sweep_direction.forward_on(sweep_index);
        let mut scale = self.step_scale;
        let attempts = self.cfg.line_search.map_or(1, |ls| ls.max_shrinks + 1);
        for _ in 0..attempts {
            let (candidate, fidelity) = self.trial_sweep(scale, forward);
            let accept = match self.cfg.line_search {
                Some(_) => fidelity >= self.fidelity,
                None => true,
            };
            if accept {
                let changed = candidate != self.seq;
                self.seq = candidate;
                if changed {
                    let props = self.cache.propagators(&self.seq, self.model);
                    self.record = simulate_with(&props, &self.seq, self.model);
                }
                self.fidelity = fidelity;
                if let Some(ls) = self.cfg.line_search {
                    self.step_scale = (scale * ls.grow).min(self.cfg.step_alpha * self.cfg.max_step_growth);
                }
                return true;
            }
            let ls = self.cfg.line_search.expect("rejection implies line search");
            scale *= ls.shrink;
        }
        self.step_scale = scale;
        false
    }

    /// Runs one sweep with step scale `scale` from the current controls.
    fn trial_sweep(&mut self, scale: f64, forward: bool) -> (ControlSequence, f64) {
        let n = self.seq.len();
        let omega = self.model.omega_max();
        let bounds = self.model.bounds().to_vec();
        let durations = self.seq.grid().durations().to_vec();
        let mut next = self.seq.clone();
        let fidelity = if forward {
            let chi: Vec<DVector<Complex64>> = self
                .record
                .backward
                .states()
                .iter()
                .map(|s| s.amplitudes().clone())
                .collect();
            let mut psi = self.psi0.clone();
            for j in 0..n {
                let u_old = self.seq.control(j).to_vec();
                let prop = self.cache.get(j, &u_old, durations[j], self.model);
                let g = segment_gradient_raw(&chi[j + 1], &psi, prop, &u_old, self.model);
                let u_new = updated_control(&u_old, &g.values, scale, omega, &bounds);
                let prop = self.cache.get(j, &u_new, durations[j], self.model);
                psi = prop.apply(&psi);
                next.set_control(j, u_new);
            }
            self.chi_t.dotc(&psi).norm_sqr()
        } else {
            let psi: Vec<DVector<Complex64>> = self
                .record
                .forward
                .states()
                .iter()
                .map(|s| s.amplitudes().clone())
                .collect();
            let mut chi = self.chi_t.clone();
            for j in (0..n).rev() {
                let u_old = self.seq.control(j).to_vec();
                let prop = self.cache.get(j, &u_old, durations[j], self.model);
                let g = segment_gradient_raw(&chi, &psi[j], prop, &u_old, self.model);
                let u_new = updated_control(&u_old, &g.values, scale, omega, &bounds);
                let prop = self.cache.get(j, &u_new, durations[j], self.model);
                chi = prop.apply_adjoint(&chi);
                next.set_control(j, u_new);
            }
            chi.dotc(&self.psi0).norm_sqr()
        };
        (next, fidelity.clamp(0.0, 1.0))
    }
}

/// `u + alpha_j (-dD/du)` with `alpha_j = c / (Omega_max dt_j)`; the rate
/// gradient already carries `1/dt_j`, so the step is `c * g / Omega_max`.
fn updated_control(u: &[f64], rate_grad: &[f64], scale: f64, omega: f64, bounds: &[ControlBounds]) -> Vec<f64> {
    let stepped: Vec<f64> = u
        .iter()
        .zip(rate_grad)
        .map(|(&x, &g)| x + scale * g / omega)
        .collect();
    project_bounds(&stepped, bounds)
}
