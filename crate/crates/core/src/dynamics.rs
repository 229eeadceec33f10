//! Piecewise-constant propagation of the initial state forward and of the
//! target state backward, and the per-segment diagnostics built from them.

use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{
    direct_velocity_unchecked, energy_uncertainty_unchecked, FidelityRegime, QuantumState,
};
use crate::grid::{time_average, GridSeries, TimeGrid};
use crate::models::HamiltonianModel;
use crate::propagator::SegmentPropagator;

/// Controls `u_j` held constant over the segments of a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSequence {
    controls: Vec<Vec<f64>>,
    grid: Arc<TimeGrid>,
}

impl ControlSequence {
    pub fn new(controls: Vec<Vec<f64>>, grid: Arc<TimeGrid>) -> Result<Self> {
        if controls.len() != grid.len() {
            return Err(Error::GridMismatch(grid.len(), controls.len()));
        }
        let width = controls[0].len();
        if let Some(bad) = controls.iter().find(|u| u.len() != width) {
            return Err(Error::ControlCount {
                expected: width,
                got: bad.len(),
            });
        }
        Ok(Self { controls, grid })
    }

    /// The same control vector on every segment of a uniform grid.
    pub fn constant(u: &[f64], total: f64, segments: usize) -> Result<Self> {
        let grid = Arc::new(TimeGrid::uniform(total, segments)?);
        Self::new(vec![u.to_vec(); segments], grid)
    }

    pub fn controls(&self) -> &[Vec<f64>] {
        &self.controls
    }

    pub fn control(&self, j: usize) -> &[f64] {
        &self.controls[j]
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    pub fn control_count(&self) -> usize {
        self.controls[0].len()
    }

    pub fn duration(&self) -> f64 {
        self.grid.total()
    }

    pub fn with_controls(&self, controls: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(controls, Arc::clone(&self.grid))
    }

    pub fn with_grid(&self, grid: TimeGrid) -> Result<Self> {
        Self::new(self.controls.clone(), Arc::new(grid))
    }

    pub(crate) fn set_control(&mut self, j: usize, u: Vec<f64>) {
        self.controls[j] = u;
    }

    /// Fails unless every control lies within the model's bounds.
    pub fn validate(&self, model: &dyn HamiltonianModel) -> Result<()> {
        self.controls.iter().try_for_each(|u| model.check_controls(u))
    }
}

/// Propagators for every segment of one control sequence.
#[derive(Debug, Clone)]
pub struct Propagators {
    segments: Vec<SegmentPropagator>,
}

impl Propagators {
    pub fn build(seq: &ControlSequence, model: &dyn HamiltonianModel) -> Result<Self> {
        seq.validate(model)?;
        Ok(Self::build_unchecked(seq, model))
    }

    pub(crate) fn build_unchecked(seq: &ControlSequence, model: &dyn HamiltonianModel) -> Self {
        let segments = seq
            .controls()
            .iter()
            .zip(seq.grid().durations())
            .map(|(u, &dt)| SegmentPropagator::new_unchecked(&model.build_unchecked(u), dt))
            .collect();
        Self { segments }
    }

    pub(crate) fn from_segments(segments: Vec<SegmentPropagator>) -> Self {
        Self { segments }
    }

    pub fn segment(&self, j: usize) -> &SegmentPropagator {
        &self.segments[j]
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// `psi(t_j)` for `j = 0..=N`.
    pub(crate) fn forward_states(&self, psi0: &DVector<Complex64>) -> Vec<DVector<Complex64>> {
        let mut states = Vec::with_capacity(self.len() + 1);
        states.push(psi0.clone());
        for p in &self.segments {
            let next = p.apply(states.last().expect("non-empty"));
            states.push(next);
        }
        states
    }

    /// `chi(t_j)` for `j = 0..=N`, with `chi(t_N) = chi_t`.
    pub(crate) fn backward_states(&self, chi_t: &DVector<Complex64>) -> Vec<DVector<Complex64>> {
        let n = self.len();
        let mut states = vec![DVector::zeros(chi_t.len()); n + 1];
        states[n] = chi_t.clone();
        for j in (0..n).rev() {
            states[j] = self.segments[j].apply_adjoint(&states[j + 1]);
        }
        states
    }
}

/// States at every grid boundary `t_0 .. t_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<QuantumState>,
}

impl Trajectory {
    pub fn states(&self) -> &[QuantumState] {
        &self.states
    }

    pub fn first(&self) -> &QuantumState {
        &self.states[0]
    }

    pub fn last(&self) -> &QuantumState {
        self.states.last().expect("trajectory has N+1 >= 2 states")
    }

    fn from_raw(raw: Vec<DVector<Complex64>>) -> Self {
        Self {
            states: raw.into_iter().map(QuantumState::from_unitary_image).collect(),
        }
    }
}

fn check_state(model: &dyn HamiltonianModel, s: &QuantumState) -> Result<()> {
    if s.dim() != model.dim() {
        return Err(Error::DimensionMismatch(s.dim(), model.dim()));
    }
    Ok(())
}

/// `psi(t_j) = U_j ... U_1 psi(0)`.
pub fn propagate_forward(
    psi0: &QuantumState,
    seq: &ControlSequence,
    model: &dyn HamiltonianModel,
) -> Result<Trajectory> {
    check_state(model, psi0)?;
    let props = Propagators::build(seq, model)?;
    Ok(Trajectory::from_raw(props.forward_states(psi0.amplitudes())))
}

/// `chi(t_j) = U_{j+1}^dagger ... U_N^dagger chi(T)`.
pub fn propagate_backward(
    chi_t: &QuantumState,
    seq: &ControlSequence,
    model: &dyn HamiltonianModel,
) -> Result<Trajectory> {
    check_state(model, chi_t)?;
    let props = Propagators::build(seq, model)?;
    Ok(Trajectory::from_raw(props.backward_states(chi_t.amplitudes())))
}

/// Where within a segment the diagnostics are sampled.
///
/// `Q` and `dE` are exactly constant within a segment (both states co-evolve
/// under the segment Hamiltonian, which commutes with its propagator), so the
/// choice only fixes which stored boundary states are used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingConvention {
    /// Boundary states at the start of the segment.
    LeftEdge,
}

impl SamplingConvention {
    pub fn as_str(&self) -> &'static str {
        match self {
            SamplingConvention::LeftEdge => "left_edge",
        }
    }
}

/// Forward and backward trajectories with per-segment `Q`, `dE` and `F`.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub forward: Trajectory,
    pub backward: Trajectory,
    pub q: GridSeries,
    pub delta_e: GridSeries,
    pub fidelity: GridSeries,
    pub regimes: Vec<FidelityRegime>,
    pub sampling: SamplingConvention,
}

impl TrajectoryRecord {
    /// `|<chi(T)|psi(T)>|^2`.
    pub fn final_fidelity(&self) -> f64 {
        self.forward
            .last()
            .inner(self.backward.last())
            .map(|z| z.norm_sqr().clamp(0.0, 1.0))
            .expect("matching dimensions")
    }

    /// `<Q>_T`.
    pub fn mean_q(&self) -> f64 {
        time_average(&self.q)
    }

    /// `C = sum_j dE_j dt_j`.
    pub fn trajectory_length(&self) -> f64 {
        self.delta_e
            .values()
            .iter()
            .zip(self.delta_e.grid().durations())
            .map(|(e, dt)| e * dt)
            .sum()
    }

    /// True when any segment sits in the target-reached branch.
    pub fn target_reached(&self) -> bool {
        self.regimes.contains(&FidelityRegime::TargetReached)
    }
}

/// Fills `Q_j`, `dE_j`, `F_j` from matching forward and backward trajectories.
pub fn record_diagnostics(
    forward: Trajectory,
    backward: Trajectory,
    seq: &ControlSequence,
    model: &dyn HamiltonianModel,
) -> Result<TrajectoryRecord> {
    let n = seq.len();
    for t in [&forward, &backward] {
        if t.states.len() != n + 1 {
            return Err(Error::GridMismatch(n + 1, t.states.len()));
        }
        check_state(model, t.first())?;
    }
    seq.validate(model)?;
    Ok(diagnostics_unchecked(forward, backward, seq, model))
}

pub(crate) fn diagnostics_unchecked(
    forward: Trajectory,
    backward: Trajectory,
    seq: &ControlSequence,
    model: &dyn HamiltonianModel,
) -> TrajectoryRecord {
    let n = seq.len();
    let mut q = Vec::with_capacity(n);
    let mut de = Vec::with_capacity(n);
    let mut fid = Vec::with_capacity(n);
    let mut regimes = Vec::with_capacity(n);
    for j in 0..n {
        let h = model.build_unchecked(seq.control(j));
        let psi = forward.states[j].amplitudes();
        let chi = backward.states[j].amplitudes();
        let v = direct_velocity_unchecked(chi, psi, &h);
        q.push(v.q);
        regimes.push(v.regime);
        de.push(energy_uncertainty_unchecked(psi, &h));
        fid.push(chi.dotc(psi).norm_sqr().clamp(0.0, 1.0));
    }
    let grid = Arc::clone(seq.grid());
    TrajectoryRecord {
        forward,
        backward,
        q: GridSeries::new(q, Arc::clone(&grid)).expect("length n"),
        delta_e: GridSeries::new(de, Arc::clone(&grid)).expect("length n"),
        fidelity: GridSeries::new(fid, grid).expect("length n"),
        regimes,
        sampling: SamplingConvention::LeftEdge,
    }
}

/// Full record from the model's own initial and target states.
pub fn simulate(seq: &ControlSequence, model: &dyn HamiltonianModel) -> Result<TrajectoryRecord> {
    let props = Propagators::build(seq, model)?;
    Ok(simulate_with(&props, seq, model))
}

pub(crate) fn simulate_with(
    props: &Propagators,
    seq: &ControlSequence,
    model: &dyn HamiltonianModel,
) -> TrajectoryRecord {
    let fwd = Trajectory::from_raw(props.forward_states(model.initial_state().amplitudes()));
    let bwd = Trajectory::from_raw(props.backward_states(model.target_state().amplitudes()));
    diagnostics_unchecked(fwd, bwd, seq, model)
}

/// Final-state fidelity only; cheaper than a full record.
pub fn final_fidelity(seq: &ControlSequence, model: &dyn HamiltonianModel) -> Result<f64> {
    let props = Propagators::build(seq, model)?;
    let mut psi = model.initial_state().into_amplitudes();
    for j in 0..props.len() {
        psi = props.segment(j).apply(&psi);
    }
    Ok(model
        .target_state()
        .amplitudes()
        .dotc(&psi)
        .norm_sqr()
        .clamp(0.0, 1.0))
}

/// Segment propagators keyed by the control value they were built for.
///
/// Entries are reused while a segment's control is unchanged and rebuilt when
/// it differs.
#[derive(Debug, Clone)]
pub struct PropagatorCache {
    entries: Vec<Option<(Vec<f64>, f64, SegmentPropagator)>>,
}

impl PropagatorCache {
    pub fn new(segments: usize) -> Self {
        Self {
            entries: vec![None; segments],
        }
    }

    pub fn get(
        &mut self,
        j: usize,
        u: &[f64],
        dt: f64,
        model: &dyn HamiltonianModel,
    ) -> &SegmentPropagator {
        let fresh = matches!(&self.entries[j], Some((cu, cdt, _)) if cu.as_slice() == u && *cdt == dt);
        if !fresh {
            let p = SegmentPropagator::new_unchecked(&model.build_unchecked(u), dt);
            self.entries[j] = Some((u.to_vec(), dt, p));
        }
        &self.entries[j].as_ref().expect("just filled").2
    }

    pub(crate) fn propagators(
        &mut self,
        seq: &ControlSequence,
        model: &dyn HamiltonianModel,
    ) -> Propagators {
        let segments = (0..seq.len())
            .map(|j| {
                self.get(j, seq.control(j), seq.grid().durations()[j], model)
                    .clone()
            })
            .collect();
        Propagators::from_segments(segments)
    }
}
