//! Run configuration: a TOML file with optional sections, defaulting to the
//! reference experiment profile. Unknown keys are rejected and every numeric
//! field is range-checked at load time.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::SamplerMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    SyntheticGgfl,
    Libsvm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    AsAdmm,
    LAdmm,
    DetInexact,
}

impl SolverKind {
    pub fn label(&self) -> &'static str {
        match self {
            SolverKind::AsAdmm => "as-admm",
            SolverKind::LAdmm => "l-admm",
            SolverKind::DetInexact => "det-inexact",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum YModeConfig {
    Exact,
    Linearized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKindConfig {
    Power,
    Constant,
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AKindConfig {
    Identity,
    StackedGraph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimingConfig {
    /// Deterministic cost model (reproducible traces).
    Modeled,
    /// Real wall clock.
    Measured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSection {
    pub kind: ProblemKind,
    pub dataset_path: Option<PathBuf>,
    pub n_samples: usize,
    pub n_features: usize,
    pub sparsity: f64,
    pub data_seed: u64,
    pub mu: f64,
    pub a_kind: AKindConfig,
    pub corr_threshold: f64,
    /// Optional externally computed difference matrix: text lines `i j`
    /// (0-based feature pairs), one penalty row `+1 at i, −1 at j` each.
    pub graph_path: Option<PathBuf>,
}

impl Default for ProblemSection {
    fn default() -> Self {
        ProblemSection {
            kind: ProblemKind::SyntheticGgfl,
            dataset_path: None,
            n_samples: 500,
            n_features: 50,
            sparsity: 0.1,
            data_seed: 7,
            mu: 1e-5,
            a_kind: AKindConfig::Identity,
            corr_threshold: 0.3,
            graph_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub kind: SolverKind,
    pub beta: f64,
    pub s: f64,
    /// Diagonal of the inner metric, `H = sigma I`.
    pub sigma: f64,
    pub y_mode: YModeConfig,
    /// Linearized-penalty coefficient; `None` selects `beta ‖BᵀB‖` (estimated).
    pub tau: Option<f64>,
    pub max_outer: usize,
    pub feas_tol: f64,
    pub obj_tol: f64,
    pub ergodic_kappa: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            kind: SolverKind::AsAdmm,
            beta: 0.04,
            s: 1.618,
            sigma: 2e-5,
            y_mode: YModeConfig::Exact,
            tau: None,
            max_outer: 500,
            feas_tol: 1e-6,
            obj_tol: 0.0,
            ergodic_kappa: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    pub kind: ScheduleKindConfig,
    /// `None` selects `1/nu` from the problem.
    pub c1: Option<f64>,
    /// `None` selects `1/(2 nu)` from the problem.
    pub c2: Option<f64>,
    pub c3: f64,
    pub rho_exp: f64,
    pub m_floor: usize,
    /// `None` selects `1/(2 nu)`.
    pub eta_const: Option<f64>,
    pub theta: f64,
    pub m_cap: usize,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        ScheduleSection {
            kind: ScheduleKindConfig::Power,
            c1: None,
            c2: None,
            c3: 0.01,
            rho_exp: 1.1,
            m_floor: 200,
            eta_const: None,
            theta: 0.1,
            m_cap: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptiveSection {
    pub rho0: f64,
    pub rho_min: f64,
    pub growth_eta: f64,
    pub enabled: bool,
}

impl Default for AdaptiveSection {
    fn default() -> Self {
        AdaptiveSection {
            rho0: 1.0,
            rho_min: 1e-5,
            growth_eta: 1.1,
            enabled: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub mode: SamplerMode,
    pub batch_c: f64,
    pub batch_rho: f64,
    /// `None` selects the x-dimension of the assembled problem.
    pub anchor_threshold: Option<usize>,
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection {
            mode: SamplerMode::SvrgAnchor,
            batch_c: 1.0,
            batch_rho: 1.1,
            anchor_threshold: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LadmmSection {
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for LadmmSection {
    fn default() -> Self {
        LadmmSection {
            cg_tol: 1e-10,
            cg_max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Solvers the benchmark compares; `solve` uses `solver.kind` instead.
    pub solvers: Vec<SolverKind>,
    pub reference_budget: usize,
    pub wall_budget_secs: Option<f64>,
    pub timing: TimingConfig,
    pub seconds_per_component: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seeds: vec![0],
            output_dir: PathBuf::from("out"),
            solvers: vec![SolverKind::AsAdmm, SolverKind::LAdmm],
            reference_budget: 4000,
            wall_budget_secs: None,
            timing: TimingConfig::Modeled,
            seconds_per_component: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub solver: SolverSection,
    pub schedule: ScheduleSection,
    pub adaptive: AdaptiveSection,
    pub sampler: SamplerSection,
    pub ladmm: LadmmSection,
    pub run: RunSection,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |field: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid_config(
                    field,
                    format!("must be > 0, got {v}"),
                ))
            }
        };

        if self.problem.kind == ProblemKind::Libsvm && self.problem.dataset_path.is_none() {
            return Err(Error::invalid_config(
                "problem.dataset_path",
                "required when problem.kind = \"libsvm\"",
            ));
        }
        if self.problem.n_samples == 0 || self.problem.n_features == 0 {
            return Err(Error::invalid_config(
                "problem.n_samples/n_features",
                "must be at least 1",
            ));
        }
        if !(0.0..=1.0).contains(&self.problem.sparsity) {
            return Err(Error::invalid_config(
                "problem.sparsity",
                format!("must lie in [0, 1], got {}", self.problem.sparsity),
            ));
        }
        pos("problem.mu", self.problem.mu)?;
        if !(self.problem.corr_threshold > 0.0 && self.problem.corr_threshold < 1.0) {
            return Err(Error::invalid_config(
                "problem.corr_threshold",
                format!("must lie in (0, 1), got {}", self.problem.corr_threshold),
            ));
        }

        pos("solver.beta", self.solver.beta)?;
        if !(self.solver.s.is_finite()
            && self.solver.s > 0.0
            && self.solver.s <= crate::solver::DUAL_STEP_MAX)
        {
            return Err(Error::invalid_config(
                "solver.s",
                format!("must lie in (0, (1+sqrt 5)/2], got {}", self.solver.s),
            ));
        }
        pos("solver.sigma", self.solver.sigma)?;
        if let Some(tau) = self.solver.tau {
            pos("solver.tau", tau)?;
        }
        if self.solver.max_outer == 0 {
            return Err(Error::invalid_config(
                "solver.max_outer",
                "must be at least 1",
            ));
        }
        if self.solver.feas_tol < 0.0 || self.solver.obj_tol < 0.0 {
            return Err(Error::invalid_config(
                "solver.feas_tol/obj_tol",
                "must be nonnegative",
            ));
        }

        if let Some(c1) = self.schedule.c1 {
            pos("schedule.c1", c1)?;
        }
        if let Some(c2) = self.schedule.c2 {
            pos("schedule.c2", c2)?;
        }
        pos("schedule.c3", self.schedule.c3)?;
        if self.schedule.rho_exp.is_nan() || self.schedule.rho_exp < 1.0 {
            return Err(Error::invalid_config(
                "schedule.rho_exp",
                format!("must be >= 1, got {}", self.schedule.rho_exp),
            ));
        }
        if self.schedule.m_floor == 0 {
            return Err(Error::invalid_config(
                "schedule.m_floor",
                "must be at least 1",
            ));
        }
        if let Some(eta) = self.schedule.eta_const {
            pos("schedule.eta_const", eta)?;
        }
        pos("schedule.theta", self.schedule.theta)?;
        if self.schedule.m_cap < self.schedule.m_floor {
            return Err(Error::invalid_config(
                "schedule.m_cap",
                "must be at least m_floor",
            ));
        }

        pos("adaptive.rho_min", self.adaptive.rho_min)?;
        if self.adaptive.rho0.is_nan() || self.adaptive.rho0 < self.adaptive.rho_min {
            return Err(Error::invalid_config(
                "adaptive.rho0",
                "must be >= adaptive.rho_min",
            ));
        }
        if self.adaptive.growth_eta.is_nan() || self.adaptive.growth_eta <= 1.0 {
            return Err(Error::invalid_config(
                "adaptive.growth_eta",
                format!("must be > 1, got {}", self.adaptive.growth_eta),
            ));
        }

        pos("sampler.batch_c", self.sampler.batch_c)?;
        if self.sampler.batch_rho.is_nan() || self.sampler.batch_rho < 1.0 {
            return Err(Error::invalid_config(
                "sampler.batch_rho",
                format!("must be >= 1, got {}", self.sampler.batch_rho),
            ));
        }

        pos("ladmm.cg_tol", self.ladmm.cg_tol)?;
        if self.ladmm.cg_max_iter == 0 {
            return Err(Error::invalid_config(
                "ladmm.cg_max_iter",
                "must be at least 1",
            ));
        }

        if self.run.seeds.is_empty() {
            return Err(Error::invalid_config("run.seeds", "need at least one seed"));
        }
        if self.run.solvers.is_empty() {
            return Err(Error::invalid_config(
                "run.solvers",
                "need at least one solver",
            ));
        }
        if self.run.reference_budget == 0 {
            return Err(Error::invalid_config(
                "run.reference_budget",
                "must be at least 1",
            ));
        }
        pos("run.seconds_per_component", self.run.seconds_per_component)?;
        if let Some(w) = self.run.wall_budget_secs {
            pos("run.wall_budget_secs", w)?;
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::invalid_config("config", format!("serialization failed: {e}")))
    }
}

/// Parses and validates a config file; an empty file yields all defaults.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    load_config_str(&text)
}

pub fn load_config_str(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig =
        toml::from_str(text).map_err(|e| Error::invalid_config("config", format!("{e}")))?;
    cfg.validate()?;
    Ok(cfg)
}
