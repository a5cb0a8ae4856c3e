//! Deterministic comparison solvers: the classic linearized ADMM and the
//! deterministic inexact variant obtained by treating the full gradient as a
//! single component.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::io::MetricsRecord;
use crate::linalg::DenseVec;
use crate::problem::{ProblemSpec, SaddleReference};
use crate::sampler::{Sampler, SamplerConfig};
use crate::solver::{
    lambda_step, solve_with_budget, y_step, IterateState, SolveDiagnostics, SolveResult,
    SolverConfig, TimingMode,
};

/// Linearized-ADMM settings. `nu` is the linearization coefficient of the
/// smooth term (its gradient Lipschitz bound); the x-update linear system is
/// solved by conjugate gradient unless `A` is the identity.
#[derive(Debug, Clone)]
pub struct LAdmmConfig {
    pub beta: f64,
    pub nu: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl LAdmmConfig {
    pub fn from_problem(p: &ProblemSpec, beta: f64) -> Self {
        LAdmmConfig {
            beta,
            nu: p.lipschitz_nu(),
            cg_tol: 1e-10,
            cg_max_iter: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beta", self.beta),
            ("nu", self.nu),
            ("cg_tol", self.cg_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid_config(name, format!("must be > 0, got {v}")));
            }
        }
        if self.cg_max_iter == 0 {
            return Err(Error::invalid_config("cg_max_iter", "must be at least 1"));
        }
        Ok(())
    }
}

/// Conjugate gradient for a symmetric positive definite operator, to a
/// relative residual tolerance.
pub fn conjugate_gradient<F>(
    apply: F,
    rhs: &DenseVec,
    tol: f64,
    max_iter: usize,
) -> Result<DenseVec>
where
    F: Fn(&DenseVec) -> DenseVec,
{
    let rhs_norm = rhs.norm();
    let mut x = DenseVec::zeros(rhs.len());
    if rhs_norm == 0.0 {
        return Ok(x);
    }
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rs = r.norm_sq();
    for _ in 0..max_iter {
        if rs.sqrt() <= tol * rhs_norm {
            return Ok(x);
        }
        let ap = apply(&p);
        let denom = p.dot(&ap);
        if denom <= 0.0 {
            return Err(Error::invalid_config(
                "cg",
                "operator is not positive definite",
            ));
        }
        let alpha = rs / denom;
        x.add_scaled(alpha, &p);
        r.add_scaled(-alpha, &ap);
        let rs_new = r.norm_sq();
        p = DenseVec::lin_comb(1.0, &r, rs_new / rs, &p);
        rs = rs_new;
    }
    if rs.sqrt() <= tol * rhs_norm {
        Ok(x)
    } else {
        Err(Error::CgNoConvergence {
            max_iter,
            residual: rs.sqrt() / rhs_norm,
            tol,
        })
    }
}

/// One linearized-ADMM cycle: gradient-linearized proximal x-update, the
/// exact prox y-step, and the multiplier step with unit dual stepsize.
pub fn ladmm_step(p: &ProblemSpec, cfg: &LAdmmConfig, st: &IterateState) -> Result<IterateState> {
    let a = p.a_mat();
    let grad = p.full_gradient(&st.x);

    // (nu I + beta AᵀA) x = nu x^k − ∇f(x^k) − beta Aᵀ(B y^k − b − λ^k/beta)
    let mut w = p.b_mat().mul_vec(&st.y);
    w.add_scaled(-1.0, p.rhs());
    w.add_scaled(-1.0 / cfg.beta, &st.lambda);
    let mut rhs = st.x.scaled(cfg.nu);
    rhs.add_scaled(-1.0, &grad);
    rhs.add_scaled(-cfg.beta, &a.mul_vec_t(&w));

    let x_new = if a.is_identity() {
        rhs.scaled(1.0 / (cfg.nu + cfg.beta))
    } else {
        conjugate_gradient(
            |v| {
                let mut out = a.mul_vec_t(&a.mul_vec(v));
                out.scale(cfg.beta);
                out.add_scaled(cfg.nu, v);
                out
            },
            &rhs,
            cfg.cg_tol,
            cfg.cg_max_iter,
        )?
    };

    let ax_new = a.mul_vec(&x_new);
    let y_new = y_step(p, cfg.beta, &ax_new, &st.lambda)?;
    let mut residual = ax_new;
    residual.add_scaled(1.0, &p.b_mat().mul_vec(&y_new));
    residual.add_scaled(-1.0, p.rhs());
    let lambda_new = lambda_step(&st.lambda, 1.0, cfg.beta, &residual);

    Ok(IterateState {
        x_breve: x_new.clone(),
        x: x_new,
        y: y_new,
        lambda: lambda_new,
        k: st.k + 1,
        residual,
    })
}

#[derive(Debug, Clone)]
pub struct LadmmRunOptions {
    pub max_outer: usize,
    /// Early-stop threshold on the raw optimality error; `0` disables.
    pub obj_tol: f64,
    pub timing: TimingMode,
    pub wall_budget_secs: Option<f64>,
}

impl Default for LadmmRunOptions {
    fn default() -> Self {
        LadmmRunOptions {
            max_outer: 500,
            obj_tol: 0.0,
            timing: TimingMode::Measured,
            wall_budget_secs: None,
        }
    }
}

/// Runs linearized ADMM from the zero start, producing a metrics trace with
/// one raw record per iteration.
pub fn ladmm_solve(
    p: &ProblemSpec,
    cfg: &LAdmmConfig,
    opts: &LadmmRunOptions,
    reference: Option<&SaddleReference>,
) -> Result<SolveResult> {
    cfg.validate()?;
    let started = Instant::now();
    let grad_base = p.grad_call_count();
    let mut st = IterateState::zero(p);
    let residual_limit = 1e6 * (st.residual.norm() + 1.0);
    let mut trace = Vec::new();
    let mut converged = false;

    while st.k < opts.max_outer {
        st = ladmm_step(p, cfg, &st)?;
        let grad_components = p.grad_call_count() - grad_base;
        let wall = match opts.timing {
            TimingMode::Measured => started.elapsed().as_secs_f64(),
            TimingMode::Modeled {
                seconds_per_component,
            } => grad_components as f64 * seconds_per_component,
        };
        let equ_err = st.residual.norm();
        let obj_err = match reference {
            Some(r) => (p.objective_value(&st.x, &st.y) - r.f_star).abs() / r.f_star.max(1.0),
            None => f64::NAN,
        };
        let opt_err = obj_err.max(equ_err);
        trace.push(MetricsRecord {
            k: st.k - 1,
            obj_err,
            equ_err,
            opt_err,
            grad_components,
            wall_seconds: wall,
            ergodic_flag: false,
        });

        if !equ_err.is_finite() || equ_err > residual_limit {
            return Err(Error::Divergence {
                iteration: st.k,
                residual: equ_err,
                limit: residual_limit,
            });
        }
        if opts.obj_tol > 0.0 && opt_err <= opts.obj_tol {
            converged = true;
            break;
        }
        if let Some(budget) = opts.wall_budget_secs {
            if started.elapsed().as_secs_f64() >= budget {
                break;
            }
        }
    }

    let diagnostics = SolveDiagnostics {
        grad_components: p.grad_call_count() - grad_base,
        ..SolveDiagnostics::default()
    };
    Ok(SolveResult {
        ergodic_x: st.x.clone(),
        ergodic_y: st.y.clone(),
        ergodic_lambda: st.lambda.clone(),
        state: st,
        trace,
        diagnostics,
        converged,
    })
}

/// Deterministic inexact ADMM: the N-component average is collapsed into a
/// single exact-gradient component, so the stochastic machinery runs with no
/// randomness left and the trajectory is seed-independent.
pub fn det_inexact_admm(
    p: &ProblemSpec,
    cfg: &SolverConfig,
    reference: Option<&SaddleReference>,
    wall_budget_secs: Option<f64>,
) -> Result<SolveResult> {
    let single = p.as_single_component();
    let sampler = Sampler::new(SamplerConfig::plain(0))?;
    solve_with_budget(&single, cfg, sampler, reference, wall_budget_secs)
}
