//! Benchmark harness: assembles problems and solver settings from a run
//! configuration, computes reference solutions, runs (solver, seed) grids,
//! and persists traces, aggregates, and plot-ready series.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::baselines::{det_inexact_admm, ladmm_solve, LAdmmConfig, LadmmRunOptions};
use crate::error::{Error, Result};
use crate::io::config::{
    AKindConfig, ProblemKind, RunConfig, ScheduleKindConfig, SolverKind, TimingConfig, YModeConfig,
};
use crate::io::metrics::{write_metrics_csv, MetricsRecord};
use crate::io::parse_libsvm;
use crate::linalg::{DenseVec, DiagMetric, SparseMat};
use crate::models::{build_ggfl, build_graph_g, synthetic_instance, GgflModel};
use crate::problem::{ProblemSpec, SaddleReference};
use crate::sampler::{Sampler, SamplerConfig};
use crate::solver::{
    solve_with_budget, ScheduleConfig, ScheduleKind, SolveResult, Solver, SolverConfig, TimingMode,
    YMode,
};

/// Feasibility level the reference run must reach before its objective value
/// is frozen as `F*`.
pub const REFERENCE_FEAS_TOL: f64 = 1e-10;
/// Stationarity level required of the reference iterate: both the gradient
/// residual `‖∇f(x) − Aᵀλ‖` and the prox residual `‖y − prox_g(y + Bᵀλ)‖`
/// must drop below this.
pub const REFERENCE_KKT_TOL: f64 = 1e-9;

/// The three first-order optimality residuals of a primal-dual point:
/// gradient stationarity in x, prox stationarity in y, and feasibility.
pub fn kkt_residuals(
    p: &ProblemSpec,
    x: &DenseVec,
    y: &DenseVec,
    lambda: &DenseVec,
) -> (f64, f64, f64) {
    let mut grad_res = p.full_gradient(x);
    grad_res.add_scaled(-1.0, &p.a_mat().mul_vec_t(lambda));
    let e1 = grad_res.norm();
    // B^T lambda ∈ ∂g(y)  <=>  y = prox_{g,1}(y + B^T lambda)
    let mut shifted = y.clone();
    shifted.add_scaled(1.0, &p.b_mat().mul_vec_t(lambda));
    let e2 = (y - &p.g_prox(1.0, &shifted)).norm();
    let feas = p.constraint_residual(x, y).norm();
    (e1, e2, feas)
}

/// Computes a high-accuracy reference by running the deterministic inexact
/// variant until the iterate satisfies the first-order optimality system to
/// tight tolerances. Deterministic, so repeated calls agree exactly.
pub fn compute_reference(p: &ProblemSpec, budget: usize) -> Result<SaddleReference> {
    if budget == 0 {
        return Err(Error::invalid_config("budget", "must be at least 1"));
    }
    let single = p.as_single_component();
    let mut cfg = SolverConfig::paper_defaults(&single)?;
    cfg.schedule = ScheduleConfig::paper_power(p.lipschitz_nu(), 50);
    cfg.max_outer = budget;
    cfg.timing = TimingMode::Modeled {
        seconds_per_component: 1e-9,
    };
    let sampler = Sampler::new(SamplerConfig::plain(0))?;
    let mut solver = Solver::new(&single, &cfg, sampler, None)?;

    for it in 0..budget {
        solver.outer_iteration()?;
        // the stationarity check costs a full gradient; probe sparsely
        if it % 10 != 9 {
            continue;
        }
        let st = solver.state();
        let (e1, e2, feas) = kkt_residuals(p, &st.x, &st.y, &st.lambda);
        if feas <= REFERENCE_FEAS_TOL && e1 <= REFERENCE_KKT_TOL && e2 <= REFERENCE_KKT_TOL {
            return Ok(SaddleReference {
                x_star: st.x.clone(),
                y_star: st.y.clone(),
                f_star: p.objective_value(&st.x, &st.y),
            });
        }
    }
    let st = solver.state();
    Err(Error::ReferenceNotConverged {
        budget,
        residual: st.residual.norm(),
        best: Box::new(SaddleReference {
            x_star: st.x.clone(),
            y_star: st.y.clone(),
            f_star: p.objective_value(&st.x, &st.y),
        }),
    })
}

/// `(obj_err, equ_err, opt_err)` against a reference:
/// `obj_err = |F(x, y) − F*| / max(F*, 1)`, `equ_err = ‖Ax + By − b‖`.
pub fn compute_metrics(
    p: &ProblemSpec,
    reference: &SaddleReference,
    x: &DenseVec,
    y: &DenseVec,
) -> (f64, f64, f64) {
    let obj_err = (p.objective_value(x, y) - reference.f_star).abs() / reference.f_star.max(1.0);
    let equ_err = p.constraint_residual(x, y).norm();
    (obj_err, equ_err, obj_err.max(equ_err))
}

/// Loads an edge-list difference matrix: each line `i j` (0-based feature
/// indices) becomes a row with `+1` at `i` and `−1` at `j`.
pub fn load_graph_edges(path: &Path, n_features: usize) -> Result<SparseMat> {
    let text = fs::read_to_string(path)?;
    let mut triplets = Vec::new();
    let mut rows = 0usize;
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<usize> {
            tok.ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: "expected `i j`".into(),
            })?
            .parse()
            .map_err(|e| Error::Parse {
                line: idx + 1,
                message: format!("bad index: {e}"),
            })
        };
        let i = parse(parts.next())?;
        let j = parse(parts.next())?;
        triplets.push((rows, i, 1.0));
        triplets.push((rows, j, -1.0));
        rows += 1;
    }
    SparseMat::from_triplets(rows, n_features, &triplets)
}

/// Builds the problem instance selected by the configuration.
pub fn build_problem(cfg: &RunConfig) -> Result<ProblemSpec> {
    let dataset = match cfg.problem.kind {
        ProblemKind::Libsvm => {
            let path = cfg.problem.dataset_path.as_ref().ok_or_else(|| {
                Error::invalid_config("problem.dataset_path", "required for libsvm problems")
            })?;
            parse_libsvm(path)?
        }
        ProblemKind::SyntheticGgfl => {
            synthetic_instance(
                cfg.problem.data_seed,
                cfg.problem.n_samples,
                cfg.problem.n_features,
                cfg.problem.sparsity,
            )?
            .dataset
        }
    };
    let model = match cfg.problem.a_kind {
        AKindConfig::Identity => GgflModel::identity(dataset, cfg.problem.mu),
        AKindConfig::StackedGraph => {
            let graph = match &cfg.problem.graph_path {
                Some(path) => load_graph_edges(path, dataset.n_features())?,
                None => build_graph_g(&dataset, cfg.problem.corr_threshold)?,
            };
            GgflModel::stacked(dataset, cfg.problem.mu, graph)
        }
    };
    build_ggfl(&model)
}

fn timing_mode(cfg: &RunConfig) -> TimingMode {
    match cfg.run.timing {
        TimingConfig::Measured => TimingMode::Measured,
        TimingConfig::Modeled => TimingMode::Modeled {
            seconds_per_component: cfg.run.seconds_per_component,
        },
    }
}

/// Resolves the solver settings against a concrete problem (Lipschitz-derived
/// schedule constants, metric dimensions, linearization coefficient).
pub fn solver_config(cfg: &RunConfig, p: &ProblemSpec) -> Result<SolverConfig> {
    let nu = p.lipschitz_nu();
    let schedule = ScheduleConfig {
        kind: match cfg.schedule.kind {
            ScheduleKindConfig::Power => ScheduleKind::Power,
            ScheduleKindConfig::Constant => ScheduleKind::Constant,
            ScheduleKindConfig::Geometric => ScheduleKind::Geometric,
        },
        c1: cfg.schedule.c1.unwrap_or(1.0 / nu),
        c2: cfg.schedule.c2.unwrap_or(1.0 / (2.0 * nu)),
        c3: cfg.schedule.c3,
        rho_exp: cfg.schedule.rho_exp,
        m_floor: cfg.schedule.m_floor,
        eta_const: cfg.schedule.eta_const.unwrap_or(1.0 / (2.0 * nu)),
        theta: cfg.schedule.theta,
        m_cap: cfg.schedule.m_cap,
    };
    let y_mode = match cfg.solver.y_mode {
        YModeConfig::Exact => YMode::ExactProx,
        YModeConfig::Linearized => {
            let tau = cfg.solver.tau.unwrap_or_else(|| {
                let est = p.b_mat().gram_spectral_norm_est(200, 0x5eed);
                cfg.solver.beta * est * 1.01
            });
            YMode::Linearized { tau }
        }
    };
    Ok(SolverConfig {
        beta: cfg.solver.beta,
        s: cfg.solver.s,
        h: DiagMetric::uniform(cfg.solver.sigma, p.dim_x())?,
        schedule,
        adaptive: crate::solver::AdaptiveProxConfig {
            rho0: cfg.adaptive.rho0,
            rho_min: cfg.adaptive.rho_min,
            growth_eta: cfg.adaptive.growth_eta,
            enabled: cfg.adaptive.enabled,
        },
        y_mode,
        max_outer: cfg.solver.max_outer,
        feas_tol: cfg.solver.feas_tol,
        obj_tol: cfg.solver.obj_tol,
        ergodic_kappa: cfg.solver.ergodic_kappa,
        record_inner_gap: false,
        timing: timing_mode(cfg),
    })
}

pub fn sampler_config(cfg: &RunConfig, p: &ProblemSpec, seed: u64) -> SamplerConfig {
    SamplerConfig {
        mode: cfg.sampler.mode,
        rng_seed: seed,
        batch_c: cfg.sampler.batch_c,
        batch_rho: cfg.sampler.batch_rho,
        anchor_threshold: cfg.sampler.anchor_threshold.unwrap_or(p.dim_x()),
    }
}

pub fn ladmm_config(cfg: &RunConfig, p: &ProblemSpec) -> LAdmmConfig {
    LAdmmConfig {
        beta: cfg.solver.beta,
        nu: p.lipschitz_nu(),
        cg_tol: cfg.ladmm.cg_tol,
        cg_max_iter: cfg.ladmm.cg_max_iter,
    }
}

/// One run of the configured solver kind on an assembled problem.
pub fn run_solver(
    kind: SolverKind,
    cfg: &RunConfig,
    p: &ProblemSpec,
    seed: u64,
    reference: Option<&SaddleReference>,
) -> Result<SolveResult> {
    let budget = cfg.run.wall_budget_secs;
    match kind {
        SolverKind::AsAdmm => {
            let scfg = solver_config(cfg, p)?;
            let sampler = Sampler::new(sampler_config(cfg, p, seed))?;
            solve_with_budget(p, &scfg, sampler, reference, budget)
        }
        SolverKind::DetInexact => {
            let scfg = solver_config(cfg, p)?;
            det_inexact_admm(p, &scfg, reference, budget)
        }
        SolverKind::LAdmm => {
            let lcfg = ladmm_config(cfg, p);
            let opts = LadmmRunOptions {
                max_outer: cfg.solver.max_outer,
                obj_tol: cfg.solver.obj_tol,
                timing: timing_mode(cfg),
                wall_budget_secs: budget,
            };
            ladmm_solve(p, &lcfg, &opts, reference)
        }
    }
}

/// Mean/min/max optimality error over seeds at matched iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub k: usize,
    pub ergodic: bool,
    pub opt_mean: f64,
    pub opt_min: f64,
    pub opt_max: f64,
    pub grad_mean: f64,
    pub wall_mean: f64,
}

/// Joins traces of the same solver on `(k, ergodic_flag)`; only iterations
/// present in every trace contribute rows.
pub fn aggregate_traces(traces: &[Vec<MetricsRecord>]) -> Vec<AggregateRow> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(usize, bool), Vec<&MetricsRecord>> = BTreeMap::new();
    for trace in traces {
        for r in trace {
            groups.entry((r.k, r.ergodic_flag)).or_default().push(r);
        }
    }
    groups
        .into_iter()
        .filter(|(_, rs)| rs.len() == traces.len())
        .map(|((k, ergodic), rs)| {
            let n = rs.len() as f64;
            AggregateRow {
                k,
                ergodic,
                opt_mean: rs.iter().map(|r| r.opt_err).sum::<f64>() / n,
                opt_min: rs.iter().map(|r| r.opt_err).fold(f64::INFINITY, f64::min),
                opt_max: rs
                    .iter()
                    .map(|r| r.opt_err)
                    .fold(f64::NEG_INFINITY, f64::max),
                grad_mean: rs.iter().map(|r| r.grad_components as f64).sum::<f64>() / n,
                wall_mean: rs.iter().map(|r| r.wall_seconds).sum::<f64>() / n,
            }
        })
        .collect()
}

pub fn write_aggregate_csv(rows: &[AggregateRow], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(
        w,
        "k,ergodic_flag,opt_err_mean,opt_err_min,opt_err_max,grad_components_mean,wall_seconds_mean"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            r.k, r.ergodic, r.opt_mean, r.opt_min, r.opt_max, r.grad_mean, r.wall_mean
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Which abscissa a plot series runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotAxis {
    GradComponents,
    WallSeconds,
}

/// Builds a `(abscissa, opt_err)` series from an aggregate. When
/// `raw_then_ergodic` is set, the first third of the abscissa budget reports
/// the raw iterate error and the remainder the ergodic error.
pub fn plot_series(
    rows: &[AggregateRow],
    axis: PlotAxis,
    raw_then_ergodic: bool,
) -> Vec<(f64, f64)> {
    let abscissa = |r: &AggregateRow| match axis {
        PlotAxis::GradComponents => r.grad_mean,
        PlotAxis::WallSeconds => r.wall_mean,
    };
    let budget = rows.iter().map(&abscissa).fold(0.0f64, f64::max);
    let split = budget / 3.0;
    let mut out = Vec::new();
    let max_k = rows.iter().map(|r| r.k).max().unwrap_or(0);
    for k in 0..=max_k {
        let raw = rows.iter().find(|r| r.k == k && !r.ergodic);
        let erg = rows.iter().find(|r| r.k == k && r.ergodic);
        let pick = if raw_then_ergodic {
            match (raw, erg) {
                (Some(r), Some(e)) => {
                    if abscissa(r) <= split {
                        Some(r)
                    } else {
                        Some(e)
                    }
                }
                (r, e) => r.or(e),
            }
        } else {
            raw.or(erg)
        };
        if let Some(r) = pick {
            out.push((abscissa(r), r.opt_mean));
        }
    }
    out
}

/// Writes a two-column series, flooring the error at `1e-16` so the output is
/// safe for log-scale plotting.
pub fn emit_plotdata(series: &[(f64, f64)], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "abscissa,opt_err")?;
    for &(x, y) in series {
        if !x.is_finite() || !y.is_finite() {
            continue;
        }
        writeln!(w, "{:.12e},{:.12e}", x, y.max(1e-16))?;
    }
    w.flush()?;
    Ok(())
}

/// Artifacts produced by a benchmark invocation.
#[derive(Debug, Clone, Default)]
pub struct BenchmarkOutcome {
    pub trace_files: Vec<PathBuf>,
    pub aggregate_files: Vec<PathBuf>,
    pub plot_files: Vec<PathBuf>,
    pub reference_file: Option<PathBuf>,
    /// `(context, error)` pairs for runs that failed; successes continue.
    pub failures: Vec<(String, String)>,
}

impl BenchmarkOutcome {
    pub fn all_succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs every configured (solver, seed) pair against a shared reference and
/// writes traces, per-solver aggregates, and plot series under the output
/// directory. Individual run failures are recorded and do not abort the rest.
pub fn run_benchmark(cfg: &RunConfig) -> Result<BenchmarkOutcome> {
    cfg.validate()?;
    let out_dir = &cfg.run.output_dir;
    fs::create_dir_all(out_dir)?;
    let p = build_problem(cfg)?;
    let reference = compute_reference(&p, cfg.run.reference_budget)?;

    let mut outcome = BenchmarkOutcome::default();
    let ref_path = out_dir.join("reference.json");
    let ref_json = serde_json::to_string_pretty(&reference)
        .map_err(|e| Error::invalid_config("reference", format!("serialization failed: {e}")))?;
    fs::write(&ref_path, ref_json)?;
    outcome.reference_file = Some(ref_path);

    for &kind in &cfg.run.solvers {
        let label = kind.label();
        let mut traces: Vec<Vec<MetricsRecord>> = Vec::new();
        for &seed in &cfg.run.seeds {
            match run_solver(kind, cfg, &p, seed, Some(&reference)) {
                Ok(result) => {
                    let path = out_dir.join(format!("trace_{label}_{seed}.csv"));
                    write_metrics_csv(&result.trace, &path)?;
                    outcome.trace_files.push(path);
                    traces.push(result.trace);
                }
                Err(e) => {
                    outcome
                        .failures
                        .push((format!("{label} seed {seed}"), e.to_string()));
                }
            }
        }
        if traces.is_empty() {
            continue;
        }
        let rows = aggregate_traces(&traces);
        let agg_path = out_dir.join(format!("aggregate_{label}.csv"));
        write_aggregate_csv(&rows, &agg_path)?;
        outcome.aggregate_files.push(agg_path);

        let split = kind == SolverKind::AsAdmm;
        for (axis, tag) in [
            (PlotAxis::GradComponents, "grad"),
            (PlotAxis::WallSeconds, "wall"),
        ] {
            let series = plot_series(&rows, axis, split);
            let plot_path = out_dir.join(format!("plot_{tag}_{label}.csv"));
            emit_plotdata(&series, &plot_path)?;
            outcome.plot_files.push(plot_path);
        }
    }
    Ok(outcome)
}
