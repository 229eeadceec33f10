//! Time–fidelity trade-off: duration variations, the `T2` estimator,
//! minimal-time search at fixed fidelity, continuation of an optimum class
//! in `T`, and speed-limit extrapolation.

use std::f64::consts::FRAC_PI_2;

use crate::dynamics::ControlSequence;
use crate::error::{Error, Result};
use crate::grid::{covariance, time_average, GridSeries};
use crate::models::HamiltonianModel;
use crate::optimizer::{optimize, OptimizationReport, OptimizerConfig, Termination};

/// Largest admissible `|kappa|` and `max |mu_j|`.
const MAX_RELATIVE_CHANGE: f64 = 0.5;

/// Largest relative duration change per outer iteration of the targeted search.
const MAX_OUTER_KAPPA: f64 = 0.25;

/// Shortening applied when the optimum has `F` above target but `Q_opt <= 0`.
const FALLBACK_KAPPA: f64 = 0.05;

/// Every duration scaled by `1 + kappa`; controls unchanged.
pub fn uniform_extend(seq: &ControlSequence, kappa: f64) -> Result<ControlSequence> {
    if !(kappa.abs() <= MAX_RELATIVE_CHANGE) {
        return Err(Error::PerturbationTooLarge(kappa));
    }
    rescale(seq, 1.0 + kappa)
}

/// Same controls on the normalized time axis, total duration `factor * T`.
pub(crate) fn rescale(seq: &ControlSequence, factor: f64) -> Result<ControlSequence> {
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(Error::NonPositiveDuration(0, factor * seq.duration()));
    }
    let grid = seq.grid().scaled(std::iter::repeat(factor))?;
    seq.with_grid(grid)
}

/// Duration-preserving redistribution `dt_j -> dt_j (1 + mu_j)` with
/// `mu_j = eps (nu_j - <nu>_T)`.
pub fn redistribute(seq: &ControlSequence, nu: &GridSeries, epsilon: f64) -> Result<ControlSequence> {
    if nu.values().len() != seq.len() {
        return Err(Error::GridMismatch(seq.len(), nu.values().len()));
    }
    let mean = time_average(nu);
    let mu: Vec<f64> = nu.values().iter().map(|v| epsilon * (v - mean)).collect();
    let worst = mu.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if !(worst <= MAX_RELATIVE_CHANGE) {
        return Err(Error::PerturbationTooLarge(worst));
    }
    let grid = seq.grid().scaled(mu.iter().map(|m| 1.0 + m))?;
    seq.with_grid(grid)
}

/// First-order distance response to [`redistribute`], `-eps T Cov(Q, nu)`.
pub fn predicted_redistribution_change(q: &GridSeries, nu: &GridSeries, epsilon: f64) -> Result<f64> {
    Ok(-epsilon * q.grid().total() * covariance(q, nu)?)
}

/// `T2 = T1 + [asin(sqrt F2) - asin(sqrt F1)] / Q_opt(T1)`.
pub fn estimate_t2(t1: f64, f1: f64, f2: f64, q_opt1: f64) -> Result<f64> {
    for f in [f1, f2] {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidArgument(format!("fidelity {f} outside [0, 1]")));
        }
    }
    if !(q_opt1 > 0.0) {
        return Err(Error::NoEstimate(q_opt1));
    }
    Ok(t1 + (f2.sqrt().asin() - f1.sqrt().asin()) / q_opt1)
}

#[derive(Debug, Clone)]
pub struct TargetedReport {
    pub report: OptimizationReport,
    /// Re-optimizations after the first one.
    pub outer_iterations: usize,
    /// True when the fidelity tolerance was not met.
    pub stalled: bool,
    /// Why the search stopped early, if it did.
    pub reason: Option<String>,
}

impl TargetedReport {
    pub fn duration(&self) -> f64 {
        self.report.sequence.duration()
    }
}

/// Searches the shortest duration at which the optimizer reaches `f_target`,
/// alternating optimization with the `T2` estimate.
pub fn optimize_to_fidelity(
    seq: &ControlSequence,
    model: &dyn HamiltonianModel,
    cfg: &OptimizerConfig,
    f_target: f64,
    tol: f64,
    max_outer: usize,
) -> Result<TargetedReport> {
    if !(f_target > 0.0 && f_target <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target fidelity must lie in (0, 1] (got {f_target})"
        )));
    }
    let mut report = optimize(seq, model, cfg)?;
    let mut best = report.clone();
    for outer in 0..=max_outer {
        let f = report.final_fidelity();
        if (f - f_target).abs() < tol {
            return Ok(TargetedReport {
                report,
                outer_iterations: outer,
                stalled: false,
                reason: None,
            });
        }
        if outer == max_outer {
            break;
        }
        let t1 = report.sequence.duration();
        let kappa = match estimate_t2(t1, f, f_target, report.mean_q) {
            Ok(t2) => (t2 / t1 - 1.0).clamp(-MAX_OUTER_KAPPA, MAX_OUTER_KAPPA),
            // Without a positive velocity only shortening is still meaningful.
            Err(_) if f > f_target => -FALLBACK_KAPPA,
            Err(e) => return Ok(stalled(best, outer, e.to_string())),
        };
        report = optimize(&uniform_extend(&report.sequence, kappa)?, model, cfg)?;
        if (report.final_fidelity() - f_target).abs() < (best.final_fidelity() - f_target).abs() {
            best = report.clone();
        }
    }
    Ok(stalled(best, max_outer, "outer iteration cap reached".into()))
}

fn stalled(report: OptimizationReport, outer: usize, reason: String) -> TargetedReport {
    TargetedReport {
        report,
        outer_iterations: outer,
        stalled: true,
        reason: Some(reason),
    }
}

/// Root-mean-square difference of two control profiles on `points` midpoints
/// of the normalized time axis `t/T`.
pub fn normalized_distance(a: &ControlSequence, b: &ControlSequence, points: usize) -> f64 {
    let width = a.control_count().min(b.control_count());
    let (pa, pb) = (resample(a, points), resample(b, points));
    let sum: f64 = pa
        .iter()
        .zip(&pb)
        .map(|(x, y)| (0..width).map(|k| (x[k] - y[k]).powi(2)).sum::<f64>())
        .sum();
    (sum / (points * width.max(1)) as f64).sqrt()
}

/// Controls sampled at `t/T = (i + 1/2) / points`.
pub fn resample(seq: &ControlSequence, points: usize) -> Vec<Vec<f64>> {
    let total = seq.duration();
    let bounds = seq.grid().boundaries();
    let mut j = 0;
    (0..points)
        .map(|i| {
            let t = total * (i as f64 + 0.5) / points as f64;
            while j + 1 < seq.len() && bounds[j + 1] <= t {
                j += 1;
            }
            seq.control(j).to_vec()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyMetric {
    pub threshold: f64,
    pub points: usize,
}

impl Default for FamilyMetric {
    fn default() -> Self {
        Self {
            threshold: 0.15,
            points: 64,
        }
    }
}

/// Whether two converged sequences belong to the same control family.
pub fn classify_family(a: &ControlSequence, b: &ControlSequence, metric: FamilyMetric) -> bool {
    normalized_distance(a, b, metric.points) < metric.threshold
}

/// A family and the time-normalized control that represents it.
#[derive(Debug, Clone)]
pub struct FamilyLabel {
    pub id: usize,
    pub representative: Vec<Vec<f64>>,
}

/// Greedy labelling: each sequence joins the first family holding a member
/// within the threshold, otherwise it opens a new one. Labels follow input
/// order.
pub fn label_families(seqs: &[ControlSequence], metric: FamilyMetric) -> (Vec<usize>, Vec<FamilyLabel>) {
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut labels = Vec::with_capacity(seqs.len());
    for (i, s) in seqs.iter().enumerate() {
        let found = members
            .iter()
            .position(|m| m.iter().any(|&o| classify_family(s, &seqs[o], metric)));
        let id = match found {
            Some(id) => id,
            None => {
                members.push(Vec::new());
                members.len() - 1
            }
        };
        members[id].push(i);
        labels.push(id);
    }
    let families = members
        .iter()
        .enumerate()
        .map(|(id, m)| FamilyLabel {
            id,
            representative: resample(&seqs[m[0]], metric.points),
        })
        .collect();
    (labels, families)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffConfig {
    /// Fidelity increment between trace samples away from slips.
    pub f_step: f64,
    /// Smallest increment used while localizing a slip.
    pub f_step_min: f64,
    pub fidelity_tol: f64,
    pub max_outer: usize,
    pub family: FamilyMetric,
    /// Downward traces stop once the target would fall below this.
    pub f_floor: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub trace_up: bool,
    pub trace_down: bool,
}

impl Default for TradeoffConfig {
    fn default() -> Self {
        Self {
            f_step: 0.05,
            f_step_min: 0.01,
            fidelity_tol: 1e-4,
            max_outer: 20,
            family: FamilyMetric::default(),
            f_floor: 0.05,
            t_min: 0.0,
            t_max: f64::INFINITY,
            trace_up: true,
            trace_down: true,
        }
    }
}

impl TradeoffConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.f_step > 0.0 && self.f_step < 1.0) {
            return bad(format!("f_step must lie in (0, 1) (got {})", self.f_step));
        }
        if !(self.f_step_min > 0.0 && self.f_step_min <= self.f_step) {
            return bad(format!("f_step_min must lie in (0, f_step] (got {})", self.f_step_min));
        }
        if !(self.fidelity_tol > 0.0) {
            return bad(format!("fidelity_tol must be positive (got {})", self.fidelity_tol));
        }
        if !(self.f_floor >= 0.0 && self.f_floor < 1.0) {
            return bad(format!("f_floor must lie in [0, 1) (got {})", self.f_floor));
        }
        if !(self.t_min >= 0.0 && self.t_max > self.t_min) {
            return bad(format!("invalid duration range [{}, {}]", self.t_min, self.t_max));
        }
        if !(self.family.threshold > 0.0 && self.family.points > 0) {
            return bad("family metric needs a positive threshold and point count".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TraceSample {
    pub t: f64,
    pub fidelity: f64,
    pub q_opt: f64,
    pub sigma_q: f64,
    pub sequence: ControlSequence,
    /// Class index local to the trace; the seed class is 0.
    pub class_id: usize,
    /// Class this sample slipped from, if it starts a new class.
    pub slipped_from: Option<usize>,
    pub termination: Termination,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipEvent {
    pub t: f64,
    pub from: usize,
    pub to: usize,
    /// True for slips met while raising the target fidelity.
    pub upward: bool,
}

#[derive(Debug, Clone)]
pub struct ClassTrace {
    /// Ordered by `t`.
    pub samples: Vec<TraceSample>,
    pub slip_events: Vec<SlipEvent>,
    pub up_stop: Option<String>,
    pub down_stop: Option<String>,
}

impl ClassTrace {
    /// Samples of one class, in `t` order.
    pub fn class_samples(&self, class_id: usize) -> Vec<&TraceSample> {
        self.samples.iter().filter(|s| s.class_id == class_id).collect()
    }

    /// Shortest-duration sample of `class_id` with `F >= f`.
    pub fn first_reaching(&self, class_id: usize, f: f64) -> Option<&TraceSample> {
        self.samples
            .iter()
            .filter(|s| s.class_id == class_id && s.fidelity >= f)
            .min_by(|a, b| a.t.total_cmp(&b.t))
    }

    /// Restriction to one class, keeping only slip events into it.
    pub fn restricted(&self, class_id: usize) -> ClassTrace {
        ClassTrace {
            samples: self.class_samples(class_id).into_iter().cloned().collect(),
            slip_events: self.slip_events.iter().filter(|e| e.to == class_id).copied().collect(),
            up_stop: None,
            down_stop: None,
        }
    }

    /// Shifts every class id by `offset`.
    pub fn relabel(&mut self, offset: usize) {
        for s in &mut self.samples {
            s.class_id += offset;
            if let Some(f) = s.slipped_from.as_mut() {
                *f += offset;
            }
        }
        for e in &mut self.slip_events {
            e.from += offset;
            e.to += offset;
        }
    }

    pub fn class_count(&self) -> usize {
        self.samples.iter().map(|s| s.class_id + 1).max().unwrap_or(0)
    }
}

fn sample_of(report: &OptimizationReport, class_id: usize, slipped_from: Option<usize>) -> TraceSample {
    TraceSample {
        t: report.sequence.duration(),
        fidelity: report.final_fidelity(),
        q_opt: report.mean_q,
        sigma_q: report.sigma_q,
        sequence: report.sequence.clone(),
        class_id,
        slipped_from,
        termination: report.termination,
    }
}

/// Maps an optimum class by stepping the target fidelity up and down from
/// the seed's optimum, each step seeded with the previous optimal control on
/// the normalized time axis.
pub fn trace_class(
    seed: &ControlSequence,
    model: &dyn HamiltonianModel,
    opt: &OptimizerConfig,
    cfg: &TradeoffConfig,
) -> Result<ClassTrace> {
    cfg.validate()?;
    let first = optimize(seed, model, opt)?;
    let start = sample_of(&first, 0, None);
    let mut next_class = 1;
    let mut trace = ClassTrace {
        samples: vec![start.clone()],
        slip_events: Vec::new(),
        up_stop: None,
        down_stop: None,
    };
    if cfg.trace_down {
        trace.down_stop = Some(walk(&start, false, model, opt, cfg, &mut trace, &mut next_class)?);
    }
    if cfg.trace_up {
        // A seed already at unit fidelity lies above the speed limit, so unit
        // fidelity is approached again from the best sample below it.
        let below = (start.fidelity >= 1.0 - cfg.fidelity_tol)
            .then(|| {
                trace
                    .samples
                    .iter()
                    .filter(|s| s.class_id == 0 && s.fidelity < 1.0 - cfg.fidelity_tol)
                    .max_by(|a, b| a.fidelity.total_cmp(&b.fidelity))
                    .cloned()
            })
            .flatten();
        let from = below.as_ref().unwrap_or(&start);
        trace.up_stop = Some(walk(from, true, model, opt, cfg, &mut trace, &mut next_class)?);
    }
    trace.samples.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(trace)
}

fn walk(
    start: &TraceSample,
    upward: bool,
    model: &dyn HamiltonianModel,
    opt: &OptimizerConfig,
    cfg: &TradeoffConfig,
    trace: &mut ClassTrace,
    next_class: &mut usize,
) -> Result<String> {
    let mut prev = start.clone();
    let mut step = cfg.f_step;
    loop {
        let target = if upward {
            if prev.fidelity >= 1.0 - cfg.fidelity_tol {
                return Ok("reached unit fidelity".into());
            }
            (prev.fidelity + step).min(1.0)
        } else {
            let target = prev.fidelity - step;
            if target < cfg.f_floor {
                return Ok("reached fidelity floor".into());
            }
            target
        };
        let found = optimize_to_fidelity(&prev.sequence, model, opt, target, cfg.fidelity_tol, cfg.max_outer)?;
        if found.stalled {
            return Ok(format!(
                "no solution at F = {target:.4}: {}",
                found.reason.unwrap_or_default()
            ));
        }
        let t = found.duration();
        if t < cfg.t_min || t > cfg.t_max {
            return Ok(format!("duration {t:e} s left the configured range"));
        }
        // Above the speed limit the optimal control is not unique, so leaving a
        // unit-fidelity sample is not a change of class.
        let degenerate = prev.fidelity >= 1.0 - cfg.fidelity_tol;
        let jumped = !degenerate && !classify_family(&prev.sequence, &found.report.sequence, cfg.family);
        if jumped && step > cfg.f_step_min {
            step = (step * 0.5).max(cfg.f_step_min);
            continue;
        }
        let sample = if jumped {
            let to = *next_class;
            *next_class += 1;
            trace.slip_events.push(SlipEvent {
                t,
                from: prev.class_id,
                to,
                upward,
            });
            sample_of(&found.report, to, Some(prev.class_id))
        } else {
            step = (step * 2.0).min(cfg.f_step);
            sample_of(&found.report, prev.class_id, None)
        };
        trace.samples.push(sample.clone());
        prev = sample;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TqslEstimate {
    pub t_qsl: f64,
    pub t1: f64,
    pub f1: f64,
    pub q_opt: f64,
}

/// `T_QSL = T1 + [pi/2 - asin(sqrt F1)] / Q_opt(T1)` from the sample with
/// `F >= f_from` and positive `Q_opt` whose fidelity is nearest `f_from`.
pub fn extrapolate_tqsl(trace: &ClassTrace, f_from: f64) -> Result<TqslEstimate> {
    let points: Vec<(f64, f64, f64)> = trace.samples.iter().map(|s| (s.t, s.fidelity, s.q_opt)).collect();
    extrapolate_from_points(&points, f_from)
}

/// [`extrapolate_tqsl`] on bare `(T, F_opt, Q_opt)` triples.
pub fn extrapolate_from_points(points: &[(f64, f64, f64)], f_from: f64) -> Result<TqslEstimate> {
    let &(t1, f, q_opt) = points
        .iter()
        .filter(|p| p.1 >= f_from && p.2 > 0.0)
        .min_by(|a, b| (a.1 - f_from).total_cmp(&(b.1 - f_from)))
        .ok_or_else(|| Error::NoQualifyingSample(format!("no sample with F >= {f_from} and Q_opt > 0")))?;
    let f1 = f.min(1.0);
    Ok(TqslEstimate {
        t_qsl: t1 + (FRAC_PI_2 - f1.sqrt().asin()) / q_opt,
        t1,
        f1,
        q_opt,
    })
}

/// `[asin sqrt F]_{T1}^{T2} - int_{T1}^{T2} Q_opt dT`, trapezoidal over the
/// trace samples, with linear interpolation at the end points.
pub fn integral_tradeoff_check(trace: &ClassTrace, t1: f64, t2: f64) -> Result<f64> {
    if t1 == t2 {
        return Ok(0.0);
    }
    let pts: Vec<(f64, f64, f64)> = trace
        .samples
        .iter()
        .map(|s| (s.t, s.fidelity.clamp(0.0, 1.0).sqrt().asin(), s.q_opt))
        .collect();
    let (lo, hi) = match (pts.first(), pts.last()) {
        (Some(a), Some(b)) => (a.0, b.0),
        _ => return Err(Error::NoQualifyingSample("empty trace".into())),
    };
    let tol = 1e-12 * hi.abs();
    if !(t1 < t2 && t1 >= lo - tol && t2 <= hi + tol) {
        return Err(Error::InvalidArgument(format!(
            "interval [{t1:e}, {t2:e}] not inside trace range [{lo:e}, {hi:e}]"
        )));
    }
    let at = |t: f64| -> (f64, f64) {
        if pts.len() == 1 {
            return (pts[0].1, pts[0].2);
        }
        let k = pts.partition_point(|p| p.0 < t).clamp(1, pts.len() - 1);
        let (a, b) = (pts[k - 1], pts[k]);
        let w = if b.0 > a.0 { (t - a.0) / (b.0 - a.0) } else { 0.0 };
        (a.1 + w * (b.1 - a.1), a.2 + w * (b.2 - a.2))
    };
    let (s1, q1) = at(t1);
    let (s2, q2) = at(t2);
    let mut nodes = vec![(t1, q1)];
    nodes.extend(pts.iter().filter(|p| p.0 > t1 && p.0 < t2).map(|p| (p.0, p.2)));
    nodes.push((t2, q2));
    let integral: f64 = nodes.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum();
    Ok((s2 - s1) - integral)
}
