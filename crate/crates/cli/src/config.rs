//! Run configuration, read from TOML. Physical quantities are SI and carry
//! their unit in the key name.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use qsl_control::dynamics::ControlSequence;
use qsl_control::models::{two_level_model, HamiltonianModel, RydbergModel};
use qsl_control::optimizer::{LineSearch, OptimizerConfig, SweepDirection};
use qsl_control::tradeoff::{FamilyMetric, TradeoffConfig};

#[derive(Debug, thiserror::Error)]
#[error("{key}: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub seed: SeedSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub tradeoff: TradeoffSection,
    #[serde(default)]
    pub redistribute: RedistributeSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ModelKind {
    Rydberg,
    TwoLevel,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    #[serde(default = "default_atoms")]
    pub n_atoms: usize,
    pub omega_max_rad_per_s: f64,
}

fn default_atoms() -> usize {
    3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub segments: usize,
    pub duration_s: Option<f64>,
    pub t_max_s: Option<f64>,
    pub scan_points: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            segments: 200,
            duration_s: None,
            t_max_s: None,
            scan_points: 200,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum SeedKind {
    Constant,
    File,
    Random,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeedSection {
    pub kind: SeedKind,
    pub values: Vec<f64>,
    pub path: Option<PathBuf>,
    pub rng_seed: u64,
    /// Seed durations for `trace`; empty means one seed at `grid.duration_s`.
    pub durations_s: Vec<f64>,
    /// Seed `trace` from every section of the constant-control scan.
    pub from_scan_sections: bool,
    pub zero_fidelity_tol: f64,
}

impl Default for SeedSection {
    fn default() -> Self {
        Self {
            kind: SeedKind::Constant,
            values: Vec::new(),
            path: None,
            rng_seed: 0,
            durations_s: Vec::new(),
            from_scan_sections: false,
            zero_fidelity_tol: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub step_alpha: f64,
    pub max_sweeps: usize,
    pub fidelity_tol: f64,
    pub sigma_q_tol: f64,
    pub stall_window: usize,
    pub target_tol: f64,
    pub sweep_direction: String,
    pub line_search: bool,
    pub line_search_shrink: f64,
    pub line_search_grow: f64,
    /// Final fidelity below which `optimize` reports a stall.
    pub success_fidelity: f64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        let ls = LineSearch::default();
        Self {
            step_alpha: d.step_alpha,
            max_sweeps: d.max_sweeps,
            fidelity_tol: d.fidelity_tol,
            sigma_q_tol: d.sigma_q_tol,
            stall_window: d.stall_window,
            target_tol: d.target_tol,
            sweep_direction: "forward".into(),
            line_search: true,
            line_search_shrink: ls.shrink,
            line_search_grow: ls.grow,
            success_fidelity: 0.999,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TradeoffSection {
    pub f_step: f64,
    pub f_step_min: f64,
    pub fidelity_tol: f64,
    pub max_outer: usize,
    pub family_threshold: f64,
    pub family_points: usize,
    pub f_floor: f64,
    pub t_min_s: f64,
    pub t_max_s: Option<f64>,
    pub trace_up: bool,
    pub trace_down: bool,
    /// Fidelity from which `qsl` extrapolates.
    pub f_from: f64,
    /// Existing trace CSV for `qsl`; absent means trace inline.
    pub trace_file: Option<PathBuf>,
}

impl Default for TradeoffSection {
    fn default() -> Self {
        let d = TradeoffConfig::default();
        Self {
            f_step: d.f_step,
            f_step_min: d.f_step_min,
            fidelity_tol: d.fidelity_tol,
            max_outer: d.max_outer,
            family_threshold: d.family.threshold,
            family_points: d.family.points,
            f_floor: d.f_floor,
            t_min_s: d.t_min,
            t_max_s: None,
            trace_up: d.trace_up,
            trace_down: d.trace_down,
            f_from: 0.9,
            trace_file: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RedistributeSection {
    pub epsilons: Vec<f64>,
    /// Random redistribution profiles per epsilon, besides `nu = Q`.
    pub random_profiles: usize,
}

impl Default for RedistributeSection {
    fn default() -> Self {
        Self {
            epsilons: vec![1e-3, 1e-4],
            random_profiles: 3,
        }
    }
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(key, format!("must be a positive number (got {v})")))
    }
}

fn unit_interval(key: &str, v: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(ConfigError::new(key, format!("must lie in [0, 1] (got {v})")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let key = msg
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "config".into());
            ConfigError::new(key, msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        positive("model.omega_max_rad_per_s", self.model.omega_max_rad_per_s)?;
        if matches!(self.model.kind, ModelKind::Rydberg) && self.model.n_atoms == 0 {
            return Err(ConfigError::new("model.n_atoms", "must be at least 1"));
        }
        if self.grid.segments == 0 {
            return Err(ConfigError::new("grid.segments", "must be at least 1"));
        }
        if self.grid.scan_points < 3 {
            return Err(ConfigError::new("grid.scan_points", "must be at least 3"));
        }
        if let Some(t) = self.grid.duration_s {
            positive("grid.duration_s", t)?;
        }
        if let Some(t) = self.grid.t_max_s {
            positive("grid.t_max_s", t)?;
        }
        for (i, &t) in self.seed.durations_s.iter().enumerate() {
            positive(&format!("seed.durations_s[{i}]"), t)?;
        }
        positive("seed.zero_fidelity_tol", self.seed.zero_fidelity_tol)?;
        if self.seed.kind == SeedKind::File {
            match &self.seed.path {
                Some(p) if p.is_file() => {}
                Some(p) => return Err(ConfigError::new("seed.path", format!("{} does not exist", p.display()))),
                None => return Err(ConfigError::new("seed.path", "required when seed.kind = \"file\"")),
            }
        }
        let o = &self.optimizer;
        positive("optimizer.step_alpha", o.step_alpha)?;
        positive("optimizer.fidelity_tol", o.fidelity_tol)?;
        positive("optimizer.sigma_q_tol", o.sigma_q_tol)?;
        positive("optimizer.target_tol", o.target_tol)?;
        positive("optimizer.line_search_grow", o.line_search_grow)?;
        unit_interval("optimizer.success_fidelity", o.success_fidelity)?;
        if o.stall_window == 0 {
            return Err(ConfigError::new("optimizer.stall_window", "must be at least 1"));
        }
        if !(o.line_search_shrink > 0.0 && o.line_search_shrink < 1.0) {
            return Err(ConfigError::new(
                "optimizer.line_search_shrink",
                format!("must lie in (0, 1) (got {})", o.line_search_shrink),
            ));
        }
        self.sweep_direction()?;
        let t = &self.tradeoff;
        positive("tradeoff.f_step", t.f_step)?;
        positive("tradeoff.f_step_min", t.f_step_min)?;
        if t.f_step_min > t.f_step || t.f_step >= 1.0 {
            return Err(ConfigError::new("tradeoff.f_step_min", "need 0 < f_step_min <= f_step < 1"));
        }
        positive("tradeoff.fidelity_tol", t.fidelity_tol)?;
        positive("tradeoff.family_threshold", t.family_threshold)?;
        if t.family_points == 0 {
            return Err(ConfigError::new("tradeoff.family_points", "must be at least 1"));
        }
        unit_interval("tradeoff.f_floor", t.f_floor)?;
        unit_interval("tradeoff.f_from", t.f_from)?;
        if !(t.t_min_s >= 0.0) {
            return Err(ConfigError::new("tradeoff.t_min_s", "must be non-negative"));
        }
        if let Some(tm) = t.t_max_s {
            if !(tm > t.t_min_s) {
                return Err(ConfigError::new("tradeoff.t_max_s", "must exceed tradeoff.t_min_s"));
            }
        }
        if let Some(p) = &t.trace_file {
            if !p.is_file() {
                return Err(ConfigError::new("tradeoff.trace_file", format!("{} does not exist", p.display())));
            }
        }
        for (i, &e) in self.redistribute.epsilons.iter().enumerate() {
            positive(&format!("redistribute.epsilons[{i}]"), e)?;
        }
        let model = self.model()?;
        if self.seed.kind == SeedKind::Constant && !self.seed.values.is_empty() {
            if self.seed.values.len() != model.control_count() {
                return Err(ConfigError::new(
                    "seed.values",
                    format!("expected {} values, got {}", model.control_count(), self.seed.values.len()),
                ));
            }
            model
                .check_controls(&self.seed.values)
                .map_err(|e| ConfigError::new("seed.values", e.to_string()))?;
        }
        Ok(())
    }

    fn sweep_direction(&self) -> Result<SweepDirection, ConfigError> {
        match self.optimizer.sweep_direction.as_str() {
            "forward" => Ok(SweepDirection::Forward),
            "backward" => Ok(SweepDirection::Backward),
            "alternating" => Ok(SweepDirection::Alternating),
            other => Err(ConfigError::new(
                "optimizer.sweep_direction",
                format!("expected forward, backward or alternating (got {other:?})"),
            )),
        }
    }

    pub fn model(&self) -> Result<Box<dyn HamiltonianModel>, ConfigError> {
        let omega = self.model.omega_max_rad_per_s;
        Ok(match self.model.kind {
            ModelKind::Rydberg => Box::new(
                RydbergModel::new(self.model.n_atoms, omega)
                    .map_err(|e| ConfigError::new("model.n_atoms", e.to_string()))?,
            ),
            ModelKind::TwoLevel => {
                Box::new(two_level_model(omega).map_err(|e| ConfigError::new("model.omega_max_rad_per_s", e.to_string()))?)
            }
        })
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        let o = &self.optimizer;
        OptimizerConfig {
            step_alpha: o.step_alpha,
            max_sweeps: o.max_sweeps,
            fidelity_tol: o.fidelity_tol,
            sigma_q_tol: o.sigma_q_tol,
            stall_window: o.stall_window,
            target_tol: o.target_tol,
            sweep_direction: self.sweep_direction().expect("validated"),
            line_search: o.line_search.then_some(LineSearch {
                shrink: o.line_search_shrink,
                grow: o.line_search_grow,
                ..LineSearch::default()
            }),
            ..OptimizerConfig::default()
        }
    }

    pub fn tradeoff_config(&self) -> TradeoffConfig {
        let t = &self.tradeoff;
        TradeoffConfig {
            f_step: t.f_step,
            f_step_min: t.f_step_min,
            fidelity_tol: t.fidelity_tol,
            max_outer: t.max_outer,
            family: FamilyMetric {
                threshold: t.family_threshold,
                points: t.family_points,
            },
            f_floor: t.f_floor,
            t_min: t.t_min_s,
            t_max: t.t_max_s.unwrap_or(f64::INFINITY),
            trace_up: t.trace_up,
            trace_down: t.trace_down,
        }
    }

    pub fn require_duration(&self) -> Result<f64, ConfigError> {
        self.grid
            .duration_s
            .ok_or_else(|| ConfigError::new("grid.duration_s", "required by this command"))
    }

    pub fn require_t_max(&self) -> Result<f64, ConfigError> {
        self.grid
            .t_max_s
            .ok_or_else(|| ConfigError::new("grid.t_max_s", "required by this command"))
    }

    /// Constant control vector; all ones when none is configured.
    pub fn constant_values(&self, model: &dyn HamiltonianModel) -> Result<Vec<f64>, ConfigError> {
        if self.seed.kind != SeedKind::Constant {
            return Err(ConfigError::new("seed.kind", "this command needs a constant control"));
        }
        if self.seed.values.is_empty() {
            Ok(vec![1.0; model.control_count()])
        } else {
            Ok(self.seed.values.clone())
        }
    }

    /// Initial sequence for a run of duration `t`; `stream` separates random
    /// seeds of concurrent runs.
    pub fn seed_sequence(
        &self,
        model: &dyn HamiltonianModel,
        t: f64,
        rng_seed: u64,
        stream: u64,
    ) -> Result<ControlSequence, ConfigError> {
        let segments = self.grid.segments;
        let seq = match self.seed.kind {
            SeedKind::Constant => ControlSequence::constant(&self.constant_values(model)?, t, segments)
                .map_err(|e| ConfigError::new("grid.segments", e.to_string()))?,
            SeedKind::Random => qsl_control::rng::random_controls(model, t, segments, rng_seed, stream)
                .map_err(|e| ConfigError::new("seed.rng_seed", e.to_string()))?,
            SeedKind::File => {
                let path = self.seed.path.as_ref().expect("validated");
                let file = File::open(path).map_err(|e| ConfigError::new("seed.path", e.to_string()))?;
                let seq = qsl_control::io::read_controls_csv(file)
                    .map_err(|e| ConfigError::new("seed.path", e.to_string()))?;
                let factor = t / seq.duration();
                let grid = seq
                    .grid()
                    .scaled(std::iter::repeat(factor))
                    .map_err(|e| ConfigError::new("seed.path", e.to_string()))?;
                seq.with_grid(grid).map_err(|e| ConfigError::new("seed.path", e.to_string()))?
            }
        };
        seq.validate(model)
            .map_err(|e| ConfigError::new("seed", e.to_string()))?;
        Ok(seq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[model]\nkind = \"two_level\"\nomega_max_rad_per_s = 1.0\n";

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.grid.segments, 200);
        assert_eq!(cfg.optimizer_config(), OptimizerConfig::default());
    }

    #[test]
    fn errors_name_the_key() {
        let e = RunConfig::parse("[model]\nkind = \"two_level\"\nomega_max_rad_per_s = -1.0\n").unwrap_err();
        assert_eq!(e.key, "model.omega_max_rad_per_s");
        let e = RunConfig::parse(&format!("{MINIMAL}[optimizer]\nstep_alfa = 0.1\n")).unwrap_err();
        assert_eq!(e.key, "step_alfa");
        let e = RunConfig::parse(&format!("{MINIMAL}[seed]\nvalues = [0.5, 0.5]\n")).unwrap_err();
        assert_eq!(e.key, "seed.values");
    }
}
