use std::collections::BTreeMap;
use std::fs::File;

use rayon::prelude::*;
use serde_json::json;

use qsl_control::dynamics::{simulate, SamplingConvention};
use qsl_control::geometry::FIDELITY_EPS;
use qsl_control::grid::GridSeries;
use qsl_control::io::{
    fmt_f64, read_trace_csv, write_control_surface_csv, write_controls_csv, write_scan_csv, write_trace_csv,
};
use qsl_control::models::HamiltonianModel;
use qsl_control::optimizer::{optimize as run_optimizer, Termination};
use qsl_control::rng::{run_rng, RNG_ALGORITHM};
use qsl_control::scan::{constant_scan, duration_grid, scan_sections};
use qsl_control::tradeoff::{
    extrapolate_from_points, label_families, predicted_redistribution_change, redistribute, trace_class,
    ClassTrace, TqslEstimate,
};

use crate::config::{ConfigError, RunConfig};
use crate::output::OutputSet;

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] qsl_control::Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CommandError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CommandError::Config(_) => 2,
            CommandError::Numerical(_) | CommandError::Io(_) => 3,
        }
    }
}

pub struct Context {
    pub cfg: RunConfig,
    pub rng_seed: u64,
}

pub struct Outcome {
    pub files: OutputSet,
    pub summary: Vec<String>,
    pub exit_code: u8,
}

const EXIT_STALLED: u8 = 4;

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> qsl_control::Result<()>) -> Result<Vec<u8>, CommandError> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn json_bytes(value: &serde_json::Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("json values serialize");
    s.push('\n');
    s.into_bytes()
}

fn metadata(ctx: &Context, model: &dyn HamiltonianModel, command: &str) -> serde_json::Value {
    json!({
        "command": command,
        "model": model.name(),
        "dimension": model.dim(),
        "omega_max_rad_per_s": model.omega_max(),
        "basis": model.basis_labels(),
        "q_sampling": SamplingConvention::LeftEdge.as_str(),
        "rng_algorithm": RNG_ALGORITHM,
        "rng_seed": ctx.rng_seed,
        "segments": ctx.cfg.grid.segments,
    })
}

pub fn evolve(ctx: &Context) -> Result<Outcome, CommandError> {
    let model = ctx.cfg.model()?;
    let u = ctx.cfg.constant_values(model.as_ref())?;
    let times = duration_grid(ctx.cfg.require_t_max()?, ctx.cfg.grid.scan_points)
        .map_err(|e| ConfigError::new("grid.t_max_s", e.to_string()))?;
    let points = times
        .par_iter()
        .map(|&t| constant_scan(model.as_ref(), &u, &[t]).map(|mut p| p.remove(0)))
        .collect::<qsl_control::Result<Vec<_>>>()?;
    let sections = scan_sections(&points, ctx.cfg.seed.zero_fidelity_tol);
    let mut files = OutputSet::default();
    files.add("scan.csv", csv_bytes(|b| write_scan_csv(&points, b))?);
    let mut sec = String::from("t_lo_seconds,t_hi_seconds,t_seed_seconds\n");
    for s in &sections {
        sec.push_str(&format!("{},{},{}\n", fmt_f64(s.t_lo), fmt_f64(s.t_hi), fmt_f64(s.t_seed)));
    }
    files.add("sections.csv", sec.into_bytes());
    let mut meta = metadata(ctx, model.as_ref(), "evolve");
    meta["controls"] = json!(u);
    files.add("meta.json", json_bytes(&meta));
    Ok(Outcome {
        files,
        summary: vec![format!("{} durations scanned, {} sections", points.len(), sections.len())],
        exit_code: 0,
    })
}

pub fn optimize(ctx: &Context) -> Result<Outcome, CommandError> {
    let model = ctx.cfg.model()?;
    let t = ctx.cfg.require_duration()?;
    let seq = ctx.cfg.seed_sequence(model.as_ref(), t, ctx.rng_seed, 0)?;
    let report = run_optimizer(&seq, model.as_ref(), &ctx.cfg.optimizer_config())?;
    let f = report.final_fidelity();
    let success = f >= ctx.cfg.optimizer.success_fidelity || report.termination == Termination::TargetReached;
    let status = if success {
        report.termination.to_string()
    } else {
        "stalled-below-target".to_string()
    };
    let rec = &report.record;
    let mut segments = String::from("t_start_seconds,dt_seconds,Q_rad_per_s,dE_rad_per_s,F\n");
    let grid = report.sequence.grid();
    for j in 0..report.sequence.len() {
        segments.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(grid.boundaries()[j]),
            fmt_f64(grid.durations()[j]),
            fmt_f64(rec.q.values()[j]),
            fmt_f64(rec.delta_e.values()[j]),
            fmt_f64(rec.fidelity.values()[j]),
        ));
    }
    let mut meta = metadata(ctx, model.as_ref(), "optimize");
    meta["status"] = json!(status);
    meta["termination"] = json!(report.termination.to_string());
    meta["duration_seconds"] = json!(t);
    meta["final_fidelity"] = json!(f);
    meta["mean_q_rad_per_s"] = json!(report.mean_q);
    meta["sigma_q"] = json!(finite_or_null(report.sigma_q));
    meta["optimal"] = json!(report.is_optimal(ctx.cfg.optimizer.sigma_q_tol));
    meta["trajectory_length"] = json!(rec.trajectory_length());
    meta["sweeps"] = json!(report.sweeps);
    meta["fidelity_history"] = json!(report.fidelity_history);
    meta["sigma_q_history"] = json!(report.sigma_q_history.iter().map(|&x| finite_or_null(x)).collect::<Vec<_>>());
    let mut files = OutputSet::default();
    files.add("report.json", json_bytes(&meta));
    files.add("controls.csv", csv_bytes(|b| write_controls_csv(&report.sequence, b))?);
    files.add("segments.csv", segments.into_bytes());
    Ok(Outcome {
        files,
        summary: vec![format!(
            "status={status} F={f:.10} sigma_Q={:.3e} sweeps={}",
            report.sigma_q, report.sweeps
        )],
        exit_code: if success { 0 } else { EXIT_STALLED },
    })
}

fn finite_or_null(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Seed durations: scan sections, explicit list, or the single configured duration.
fn seed_durations(cfg: &RunConfig, model: &dyn HamiltonianModel) -> Result<Vec<f64>, CommandError> {
    if cfg.seed.from_scan_sections {
        let u = cfg.constant_values(model)?;
        let times = duration_grid(cfg.require_t_max()?, cfg.grid.scan_points)
            .map_err(|e| ConfigError::new("grid.t_max_s", e.to_string()))?;
        let points = constant_scan(model, &u, &times)?;
        return Ok(scan_sections(&points, cfg.seed.zero_fidelity_tol)
            .iter()
            .map(|s| s.t_seed)
            .collect());
    }
    if !cfg.seed.durations_s.is_empty() {
        return Ok(cfg.seed.durations_s.clone());
    }
    Ok(vec![cfg.require_duration()?])
}

fn run_traces(ctx: &Context, model: &dyn HamiltonianModel) -> Result<(Vec<f64>, Vec<ClassTrace>), CommandError> {
    let seeds = seed_durations(&ctx.cfg, model)?;
    let seqs = seeds
        .iter()
        .enumerate()
        .map(|(i, &t)| ctx.cfg.seed_sequence(model, t, ctx.rng_seed, i as u64))
        .collect::<Result<Vec<_>, _>>()?;
    let opt = ctx.cfg.optimizer_config();
    let tr = ctx.cfg.tradeoff_config();
    let mut traces = seqs
        .par_iter()
        .map(|s| trace_class(s, model, &opt, &tr))
        .collect::<qsl_control::Result<Vec<_>>>()?;
    let mut offset = 0;
    for t in &mut traces {
        let count = t.class_count();
        t.relabel(offset);
        offset += count;
    }
    Ok((seeds, traces))
}

pub fn trace(ctx: &Context) -> Result<Outcome, CommandError> {
    let model = ctx.cfg.model()?;
    let (seeds, traces) = run_traces(ctx, model.as_ref())?;
    let f_ref = ctx.cfg.tradeoff.f_from;
    let metric = ctx.cfg.tradeoff_config().family;
    let mut reps = Vec::new();
    let mut rep_ids = Vec::new();
    for t in &traces {
        let mut by_class: BTreeMap<usize, &qsl_control::tradeoff::TraceSample> = BTreeMap::new();
        for s in &t.samples {
            let e = by_class.entry(s.class_id).or_insert(s);
            if (s.fidelity - f_ref).abs() < (e.fidelity - f_ref).abs() {
                *e = s;
            }
        }
        for (id, s) in by_class {
            rep_ids.push(id);
            reps.push(s.sequence.clone());
        }
    }
    let (families, _) = label_families(&reps, metric);
    let mut files = OutputSet::default();
    let mut fam = String::from("class_id,family_id\n");
    for (id, f) in rep_ids.iter().zip(&families) {
        fam.push_str(&format!("{id},{f}\n"));
    }
    let mut summary = Vec::new();
    for (i, (t, seed)) in traces.iter().zip(&seeds).enumerate() {
        files.add(format!("trace_{i:02}.csv"), csv_bytes(|b| write_trace_csv(t, b))?);
        files.add(
            format!("surface_{i:02}.csv"),
            csv_bytes(|b| write_control_surface_csv(t, metric.points, b))?,
        );
        let down = t.slip_events.iter().filter(|e| !e.upward).count();
        summary.push(format!(
            "seed {i}: T0={seed:.6e} s, {} samples, {} slips ({} downward)",
            t.samples.len(),
            t.slip_events.len(),
            down
        ));
    }
    files.add("families.csv", fam.into_bytes());
    let distinct = families.iter().copied().max().map_or(0, |m| m + 1);
    summary.push(format!("{distinct} distinct families"));
    let mut meta = metadata(ctx, model.as_ref(), "trace");
    meta["seed_durations_seconds"] = json!(seeds);
    meta["family_threshold"] = json!(metric.threshold);
    meta["family_points"] = json!(metric.points);
    meta["stops"] = json!(traces
        .iter()
        .map(|t| json!({"up": t.up_stop, "down": t.down_stop}))
        .collect::<Vec<_>>());
    files.add("meta.json", json_bytes(&meta));
    Ok(Outcome {
        files,
        summary,
        exit_code: 0,
    })
}

pub fn qsl(ctx: &Context) -> Result<Outcome, CommandError> {
    let f_from = ctx.cfg.tradeoff.f_from;
    let mut by_class: BTreeMap<usize, Vec<(f64, f64, f64)>> = BTreeMap::new();
    if let Some(path) = &ctx.cfg.tradeoff.trace_file {
        let file = File::open(path).map_err(|e| ConfigError::new("tradeoff.trace_file", e.to_string()))?;
        let rows = read_trace_csv(file).map_err(|e| ConfigError::new("tradeoff.trace_file", e.to_string()))?;
        for r in rows {
            by_class.entry(r.class_id).or_default().push((r.t, r.fidelity, r.q_opt));
        }
    } else {
        let model = ctx.cfg.model()?;
        let (_, traces) = run_traces(ctx, model.as_ref())?;
        for t in &traces {
            for s in &t.samples {
                by_class.entry(s.class_id).or_default().push((s.t, s.fidelity, s.q_opt));
            }
        }
    }
    let estimates: Vec<(usize, TqslEstimate)> = by_class
        .iter()
        .filter_map(|(&id, pts)| extrapolate_from_points(pts, f_from).ok().map(|e| (id, e)))
        .collect();
    if estimates.is_empty() {
        return Err(qsl_control::Error::NoQualifyingSample(format!(
            "no class has a sample with F >= {f_from} and Q_opt > 0"
        ))
        .into());
    }
    let mut csv = String::from("class_id,T_QSL_seconds,T1_seconds,F1,Q_opt_rad_per_s\n");
    let mut summary = Vec::new();
    for (id, e) in &estimates {
        csv.push_str(&format!(
            "{id},{},{},{},{}\n",
            fmt_f64(e.t_qsl),
            fmt_f64(e.t1),
            fmt_f64(e.f1),
            fmt_f64(e.q_opt)
        ));
        summary.push(format!(
            "class {id}: T_QSL={:.6e} s from T1={:.6e} s, F1={:.6}, Q_opt={:.6e} rad/s",
            e.t_qsl, e.t1, e.f1, e.q_opt
        ));
    }
    let mut files = OutputSet::default();
    files.add("qsl.csv", csv.into_bytes());
    Ok(Outcome {
        files,
        summary,
        exit_code: 0,
    })
}

pub fn redistribute_check(ctx: &Context) -> Result<Outcome, CommandError> {
    use rand::Rng;

    let model = ctx.cfg.model()?;
    let t = ctx.cfg.require_duration()?;
    let seq = ctx.cfg.seed_sequence(model.as_ref(), t, ctx.rng_seed, 0)?;
    let report = run_optimizer(&seq, model.as_ref(), &ctx.cfg.optimizer_config())?;
    let distance = |f: f64| f.clamp(0.0, 1.0).sqrt().acos();
    let d0 = distance(report.final_fidelity());
    let q = &report.record.q;
    let grid = std::sync::Arc::clone(report.sequence.grid());
    let scale = report.mean_q.abs().max(FIDELITY_EPS);
    let mut profiles = vec![("q".to_string(), q.map(|x| x / scale))];
    let mut rng = run_rng(ctx.rng_seed, 1);
    for k in 0..ctx.cfg.redistribute.random_profiles {
        let values = (0..grid.len()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        profiles.push((format!("random_{k}"), GridSeries::new(values, std::sync::Arc::clone(&grid))?));
    }
    let mut csv = String::from("profile,epsilon,delta_D_measured,delta_D_predicted,residual\n");
    let mut worst: f64 = 0.0;
    for (name, nu) in &profiles {
        for &eps in &ctx.cfg.redistribute.epsilons {
            let moved = redistribute(&report.sequence, nu, eps)?;
            let d = distance(simulate(&moved, model.as_ref())?.final_fidelity());
            let measured = d - d0;
            let predicted = predicted_redistribution_change(q, nu, eps)?;
            worst = worst.max((measured - predicted).abs());
            csv.push_str(&format!(
                "{name},{},{},{},{}\n",
                fmt_f64(eps),
                fmt_f64(measured),
                fmt_f64(predicted),
                fmt_f64(measured - predicted)
            ));
        }
    }
    let mut files = OutputSet::default();
    files.add("redistribute.csv", csv.into_bytes());
    Ok(Outcome {
        files,
        summary: vec![format!(
            "F={:.10} sigma_Q={:.3e} max |residual|={worst:.3e}",
            report.final_fidelity(),
            report.sigma_q
        )],
        exit_code: 0,
    })
}
