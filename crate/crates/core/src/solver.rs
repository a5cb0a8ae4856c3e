//! The accelerated stochastic ADMM engine: outer loop, the inner accelerated
//! stochastic routine for the x-subproblem, inner/outer parameter schedules,
//! the adaptive proximal coefficient, both y-step variants, and ergodic
//! averaging of the iterates.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::io::MetricsRecord;
use crate::linalg::{DenseVec, DiagMetric, SparseMat};
use crate::problem::{ProblemSpec, SaddleReference};
use crate::sampler::Sampler;

/// How the y-subproblem is solved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum YMode {
    /// Closed-form prox; requires `B = −I`.
    ExactProx,
    /// Prox of a linearized penalty with coefficient `tau >= beta ‖BᵀB‖`.
    Linearized { tau: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Power,
    Constant,
    Geometric,
}

/// Inner-iteration count and stepsize schedule for the outer loop.
#[derive(Debug, Clone)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    /// Power kind: `eta_k = min{c1 / (M_k (M_k+1)), c2}`.
    pub c1: f64,
    pub c2: f64,
    /// Power kind: `M_k = max{ceil(c3 k^rho_exp), m_floor}`.
    pub c3: f64,
    pub rho_exp: f64,
    pub m_floor: usize,
    /// Constant kind stepsize.
    pub eta_const: f64,
    /// Geometric kind growth parameter.
    pub theta: f64,
    /// Ceiling on the geometric inner-iteration count.
    pub m_cap: usize,
}

impl ScheduleConfig {
    /// Power schedule with the reference parameterization
    /// `c1 = 1/nu`, `c2 = 1/(2 nu)`, `c3 = 0.01`, `rho_exp = 1.1`.
    pub fn paper_power(nu: f64, m_floor: usize) -> Self {
        ScheduleConfig {
            kind: ScheduleKind::Power,
            c1: 1.0 / nu,
            c2: 1.0 / (2.0 * nu),
            c3: 0.01,
            rho_exp: 1.1,
            m_floor,
            eta_const: 1.0 / (2.0 * nu),
            theta: 0.1,
            m_cap: 1_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c1", self.c1), ("c2", self.c2), ("c3", self.c3)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid_config(name, format!("must be > 0, got {v}")));
            }
        }
        if self.rho_exp.is_nan() || self.rho_exp < 1.0 {
            return Err(Error::invalid_config(
                "rho_exp",
                format!("must be >= 1, got {}", self.rho_exp),
            ));
        }
        if self.m_floor == 0 {
            return Err(Error::invalid_config("m_floor", "must be at least 1"));
        }
        if self.kind == ScheduleKind::Constant
            && !(self.eta_const.is_finite() && self.eta_const > 0.0)
        {
            return Err(Error::invalid_config(
                "eta_const",
                format!("must be > 0, got {}", self.eta_const),
            ));
        }
        if self.kind == ScheduleKind::Geometric && !(self.theta.is_finite() && self.theta > 0.0) {
            return Err(Error::invalid_config(
                "theta",
                format!("must be > 0, got {}", self.theta),
            ));
        }
        if self.m_cap < self.m_floor {
            return Err(Error::invalid_config("m_cap", "must be at least m_floor"));
        }
        Ok(())
    }
}

/// Running state of the schedule (the geometric rule is recursive in `M`).
#[derive(Debug, Clone, Default)]
pub struct ScheduleState {
    prev_m: Option<usize>,
    pub cap_hit: bool,
}

/// Produces `(M_k, eta_k)` for outer iteration `k`. The geometric rule also
/// needs `‖x̆^k‖²`; the other kinds ignore it.
pub fn schedule_step(
    sc: &ScheduleConfig,
    state: &mut ScheduleState,
    k: usize,
    x_breve_norm_sq: f64,
) -> (usize, f64) {
    let (m, eta) = match sc.kind {
        ScheduleKind::Power => {
            let grown = (sc.c3 * (k as f64).powf(sc.rho_exp)).ceil();
            let m = if grown.is_finite() {
                (grown as usize).max(sc.m_floor)
            } else {
                state.cap_hit = true;
                sc.m_cap
            };
            let mf = m as f64;
            let eta = (sc.c1 / (mf * (mf + 1.0))).min(sc.c2);
            (m, eta)
        }
        ScheduleKind::Constant => (sc.m_floor, sc.eta_const),
        ScheduleKind::Geometric => {
            let m = match state.prev_m {
                None => sc.m_floor,
                Some(prev) => {
                    let raw = (1.0 + sc.theta).powi(2) * prev as f64 * (x_breve_norm_sq + 1.0);
                    if raw.is_finite() && raw <= sc.m_cap as f64 {
                        (raw.ceil() as usize).max(1)
                    } else {
                        state.cap_hit = true;
                        sc.m_cap
                    }
                }
            };
            let eta = ((1.0 + sc.theta).powi(-(k.min(i32::MAX as usize) as i32)) / m as f64)
                .max(f64::MIN_POSITIVE);
            (m, eta)
        }
    };
    state.prev_m = Some(m);
    (m, eta)
}

/// Adaptive proximal-coefficient settings: start at `rho0`, keep a floor
/// `rho_min` that is multiplied by `growth_eta` whenever the eigenvalue
/// underestimate overtakes the current coefficient.
#[derive(Debug, Clone)]
pub struct AdaptiveProxConfig {
    pub rho0: f64,
    pub rho_min: f64,
    pub growth_eta: f64,
    pub enabled: bool,
}

impl Default for AdaptiveProxConfig {
    fn default() -> Self {
        AdaptiveProxConfig {
            rho0: 1.0,
            rho_min: 1e-5,
            growth_eta: 1.1,
            enabled: true,
        }
    }
}

impl AdaptiveProxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_min.is_finite() && self.rho_min > 0.0) {
            return Err(Error::invalid_config(
                "rho_min",
                format!("must be > 0, got {}", self.rho_min),
            ));
        }
        if self.rho0.is_nan() || self.rho0 < self.rho_min {
            return Err(Error::invalid_config(
                "rho0",
                format!("must be >= rho_min, got {} < {}", self.rho0, self.rho_min),
            ));
        }
        if self.growth_eta.is_nan() || self.growth_eta <= 1.0 {
            return Err(Error::invalid_config(
                "growth_eta",
                format!("must be > 1, got {}", self.growth_eta),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AdaptiveProxState {
    pub rho_cur: f64,
    pub rho_min: f64,
    pub growth_eta: f64,
    pub bump_count: usize,
    pub last_bump_iteration: Option<usize>,
    prev_x: Option<DenseVec>,
}

impl AdaptiveProxState {
    pub fn new(cfg: &AdaptiveProxConfig) -> Self {
        AdaptiveProxState {
            rho_cur: cfg.rho0,
            rho_min: cfg.rho_min,
            growth_eta: cfg.growth_eta,
            bump_count: 0,
            last_bump_iteration: None,
            prev_x: None,
        }
    }

    /// One application of the adaptive rule at outer iteration `k`, given the
    /// current x-iterate. With no previous iterate, or a zero displacement,
    /// the coefficient is left unchanged.
    pub fn update(&mut self, a: &SparseMat, beta: f64, x_cur: &DenseVec, k: usize) -> f64 {
        if let Some(prev) = &self.prev_x {
            let dx = x_cur - prev;
            let d1 = dx.norm_sq();
            if d1 > 0.0 {
                let d2 = a.mul_vec(&dx).norm_sq();
                let ratio = beta * d2 / d1;
                // relative guard so rounding noise in the quotient cannot
                // masquerade as eigenvalue growth
                if self.rho_cur * (1.0 + 1e-12) < ratio {
                    self.rho_min *= self.growth_eta;
                    self.bump_count += 1;
                    self.last_bump_iteration = Some(k);
                }
                self.rho_cur = self.rho_min.max(ratio);
            }
        }
        self.prev_x = Some(x_cur.clone());
        self.rho_cur
    }
}

/// Inner-step coefficients: the averaging mix `2/(t+1)`, the proximal weight
/// `2/(t eta_k)`, and the cumulative average weight `2/(t(t+1))`. They satisfy
/// `mix * prox / avg = 2 / eta_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerStepParams {
    pub mix_weight: f64,
    pub prox_weight: f64,
    pub avg_weight: f64,
}

pub fn inner_params(t: usize, eta_k: f64) -> InnerStepParams {
    debug_assert!(t >= 1);
    debug_assert!(eta_k > 0.0);
    let tf = t as f64;
    InnerStepParams {
        mix_weight: 2.0 / (tf + 1.0),
        prox_weight: 2.0 / (tf * eta_k),
        avg_weight: 2.0 / (tf * (tf + 1.0)),
    }
}

/// Primal-dual iterate with the cached constraint residual `Ax + By − b`.
#[derive(Debug, Clone)]
pub struct IterateState {
    pub x: DenseVec,
    pub y: DenseVec,
    pub lambda: DenseVec,
    pub x_breve: DenseVec,
    pub k: usize,
    pub residual: DenseVec,
}

impl IterateState {
    pub fn zero(p: &ProblemSpec) -> Self {
        let x = DenseVec::zeros(p.dim_x());
        let y = DenseVec::zeros(p.dim_y());
        let residual = p.constraint_residual(&x, &y);
        IterateState {
            x_breve: x.clone(),
            x,
            y,
            lambda: DenseVec::zeros(p.dim_constraint()),
            k: 0,
            residual,
        }
    }

    pub fn from_point(p: &ProblemSpec, x: DenseVec, y: DenseVec, lambda: DenseVec) -> Self {
        let residual = p.constraint_residual(&x, &y);
        IterateState {
            x_breve: x.clone(),
            x,
            y,
            lambda,
            k: 0,
            residual,
        }
    }
}

/// Running sums of the tilde-iterates from the burn-in index onward.
#[derive(Debug, Clone)]
pub struct ErgodicAccumulator {
    count: usize,
    sum_x: DenseVec,
    sum_y: DenseVec,
    sum_lambda: DenseVec,
}

impl ErgodicAccumulator {
    pub fn new(n1: usize, n2: usize, n: usize) -> Self {
        ErgodicAccumulator {
            count: 0,
            sum_x: DenseVec::zeros(n1),
            sum_y: DenseVec::zeros(n2),
            sum_lambda: DenseVec::zeros(n),
        }
    }

    pub fn push(&mut self, x: &DenseVec, y: &DenseVec, lambda_tilde: &DenseVec) {
        self.sum_x.add_scaled(1.0, x);
        self.sum_y.add_scaled(1.0, y);
        self.sum_lambda.add_scaled(1.0, lambda_tilde);
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Arithmetic means of the accumulated tilde-iterates.
    pub fn read(&self) -> Result<(DenseVec, DenseVec, DenseVec)> {
        if self.count == 0 {
            return Err(Error::invalid_config(
                "ergodic",
                "accumulator is empty (burn-in not reached)",
            ));
        }
        let inv = 1.0 / self.count as f64;
        Ok((
            self.sum_x.scaled(inv),
            self.sum_y.scaled(inv),
            self.sum_lambda.scaled(inv),
        ))
    }
}

/// Wall-time accounting for the metrics trace. `Modeled` charges a fixed
/// nominal cost per gradient component so that traces are reproducible
/// byte-for-byte; `Measured` records the real clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimingMode {
    Measured,
    Modeled { seconds_per_component: f64 },
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub beta: f64,
    /// Dual stepsize in `(0, (1+sqrt 5)/2]`.
    pub s: f64,
    pub h: DiagMetric,
    pub schedule: ScheduleConfig,
    pub adaptive: AdaptiveProxConfig,
    pub y_mode: YMode,
    pub max_outer: usize,
    pub feas_tol: f64,
    /// Early-stop threshold on the ergodic optimality error; `0` disables.
    pub obj_tol: f64,
    /// Ergodic burn-in index: averaging starts at this outer iteration.
    pub ergodic_kappa: usize,
    /// Track the weighted-average identity of the inner loop per call.
    pub record_inner_gap: bool,
    pub timing: TimingMode,
}

pub const DUAL_STEP_MAX: f64 = 1.618033988749895; // (1 + sqrt 5) / 2

impl SolverConfig {
    /// Reference profile: `beta = 0.04`, `s = 1.618`, `H = 2e-5 I`, power
    /// schedule derived from the problem's Lipschitz bound, adaptive rho.
    pub fn paper_defaults(p: &ProblemSpec) -> Result<Self> {
        Ok(SolverConfig {
            beta: 0.04,
            s: 1.618,
            h: DiagMetric::uniform(2.0e-5, p.dim_x())?,
            schedule: ScheduleConfig::paper_power(p.lipschitz_nu(), 200),
            adaptive: AdaptiveProxConfig::default(),
            y_mode: YMode::ExactProx,
            max_outer: 500,
            feas_tol: 1e-6,
            obj_tol: 0.0,
            ergodic_kappa: 0,
            record_inner_gap: false,
            timing: TimingMode::Measured,
        })
    }

    pub fn validate(&self, p: &ProblemSpec) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid_config(
                "beta",
                format!("must be > 0, got {}", self.beta),
            ));
        }
        if !(self.s.is_finite() && self.s > 0.0 && self.s <= DUAL_STEP_MAX) {
            return Err(Error::invalid_config(
                "s",
                format!("must lie in (0, (1+sqrt 5)/2], got {}", self.s),
            ));
        }
        if self.h.len() != p.dim_x() {
            return Err(Error::DimensionMismatch {
                context: "metric H",
                expected: p.dim_x(),
                got: self.h.len(),
            });
        }
        self.schedule.validate()?;
        self.adaptive.validate()?;
        if self.max_outer == 0 {
            return Err(Error::invalid_config("max_outer", "must be at least 1"));
        }
        match self.y_mode {
            YMode::ExactProx => {
                if !p.b_mat().is_neg_identity() {
                    return Err(Error::invalid_config(
                        "y_mode",
                        "exact prox path requires B = −I; use the linearized y-step",
                    ));
                }
            }
            YMode::Linearized { tau } => validate_tau(p, self.beta, tau)?,
        }
        Ok(())
    }
}

/// The linearized y-step needs `tau I ⪰ beta BᵀB`; checked against a
/// power-iteration estimate of `‖BᵀB‖` (an underestimate, so valid
/// configurations are never rejected).
pub fn validate_tau(p: &ProblemSpec, beta: f64, tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid_config(
            "tau",
            format!("must be > 0, got {tau}"),
        ));
    }
    let est = p.b_mat().gram_spectral_norm_est(100, 0x5eed);
    if tau < beta * est * (1.0 - 1e-9) {
        return Err(Error::invalid_config(
            "tau",
            format!(
                "must be at least beta ‖BᵀB‖ ≈ {:.6e}, got {tau:.6e}",
                beta * est
            ),
        ));
    }
    Ok(())
}

/// `h^k = −Aᵀ [λ^k − beta (A x^k + B y^k − b)]`, using the cached residual.
pub fn compute_h(p: &ProblemSpec, st: &IterateState, beta: f64) -> DenseVec {
    let mut w = st.residual.scaled(beta);
    w.add_scaled(-1.0, &st.lambda);
    p.a_mat().mul_vec_t(&w)
}

/// Result of one inner run: the averaged iterate, the final auxiliary point,
/// the component-gradient spend, and (optionally) the deviation between the
/// averaged iterate and its weighted-sum closed form.
#[derive(Debug, Clone)]
pub struct XsubOutcome {
    pub x_new: DenseVec,
    pub x_breve_new: DenseVec,
    pub components_used: u64,
    pub inner_avg_gap: Option<f64>,
}

/// Runs `m_k` accelerated stochastic steps on the x-subproblem.
///
/// Each step mixes the auxiliary point into the query point, draws a
/// stochastic direction there, solves the diagonal quadratic
/// `[prox_weight H + rho I] x̆ = prox_weight H x̆_t + rho x^k − d − h`
/// in closed form, projects onto the feasible box, and averages.
#[allow(clippy::too_many_arguments)]
pub fn xsub(
    p: &ProblemSpec,
    sampler: &mut Sampler,
    k: usize,
    x_k: &DenseVec,
    x_breve_k: &DenseVec,
    h: &DenseVec,
    m_k: usize,
    eta_k: f64,
    rho_k: f64,
    metric_h: &DiagMetric,
    record_gap: bool,
) -> Result<XsubOutcome> {
    let n1 = x_k.len();
    let hd = metric_h.diagonal();
    let mut x_t = x_k.clone();
    let mut breve_t = x_breve_k.clone();
    let mut components = 0u64;
    let mut breve_avg = record_gap.then(|| DenseVec::zeros(n1));
    let m_f = m_k as f64;
    let final_avg_weight = 2.0 / (m_f * (m_f + 1.0));

    for t in 1..=m_k {
        let ip = inner_params(t, eta_k);
        let x_hat = DenseVec::lin_comb(ip.mix_weight, &breve_t, 1.0 - ip.mix_weight, &x_t);
        let dir = sampler.draw_direction(p, &x_hat, k, t, m_k)?;
        if !dir.d.all_finite() {
            return Err(Error::NonFinite(format!(
                "stochastic direction at outer iteration {k}, inner step {t}"
            )));
        }
        components += dir.components_used;

        let mut breve_next = DenseVec::zeros(n1);
        for i in 0..n1 {
            let gh = ip.prox_weight * hd[i];
            breve_next[i] = (gh * breve_t[i] + rho_k * x_k[i] - dir.d[i] - h[i]) / (gh + rho_k);
        }
        p.project_x_in_place(&mut breve_next);

        x_t = DenseVec::lin_comb(ip.mix_weight, &breve_next, 1.0 - ip.mix_weight, &x_t);
        if let Some(avg) = breve_avg.as_mut() {
            avg.add_scaled(t as f64 * final_avg_weight, &breve_next);
        }
        breve_t = breve_next;
    }

    let inner_avg_gap = breve_avg.map(|avg| (&avg - &x_t).norm_inf());
    Ok(XsubOutcome {
        x_new: x_t,
        x_breve_new: breve_t,
        components_used: components,
        inner_avg_gap,
    })
}

/// Exact y-step for `B = −I`: `y = prox_{g, beta}(A x^{k+1} − b − λ^k/beta)`.
pub fn y_step(
    p: &ProblemSpec,
    beta: f64,
    ax_new: &DenseVec,
    lambda: &DenseVec,
) -> Result<DenseVec> {
    if !p.b_mat().is_neg_identity() {
        return Err(Error::invalid_config(
            "y_mode",
            "exact prox path requires B = −I",
        ));
    }
    let mut q = ax_new.clone();
    q.add_scaled(-1.0, p.rhs());
    q.add_scaled(-1.0 / beta, lambda);
    Ok(p.g_prox(beta, &q))
}

/// Linearized y-step:
/// `q^k = y^k − Bᵀ[beta (A x^{k+1} + B y^k − b) − λ^k]/tau`, `y = prox_{g, tau}(q^k)`.
pub fn y_step_linearized(
    p: &ProblemSpec,
    beta: f64,
    tau: f64,
    ax_new: &DenseVec,
    y_old: &DenseVec,
    by_old: &DenseVec,
    lambda: &DenseVec,
) -> Result<DenseVec> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid_config(
            "tau",
            format!("must be > 0, got {tau}"),
        ));
    }
    let mut r_mid = ax_new.clone(); // A x^{k+1} + B y^k − b
    r_mid.add_scaled(1.0, by_old);
    r_mid.add_scaled(-1.0, p.rhs());
    r_mid.scale(beta);
    r_mid.add_scaled(-1.0, lambda);
    let pull = p.b_mat().mul_vec_t(&r_mid);
    let mut q = y_old.clone();
    q.add_scaled(-1.0 / tau, &pull);
    Ok(p.g_prox(tau, &q))
}

/// `λ^{k+1} = λ^k − s beta (A x^{k+1} + B y^{k+1} − b)`.
pub fn lambda_step(lambda: &DenseVec, s: f64, beta: f64, residual_new: &DenseVec) -> DenseVec {
    let mut out = lambda.clone();
    out.add_scaled(-s * beta, residual_new);
    out
}

/// Post-run diagnostics kept out of the metrics trace.
#[derive(Debug, Clone, Default)]
pub struct SolveDiagnostics {
    pub rho_bumps: usize,
    pub last_bump_iteration: Option<usize>,
    pub rho_final: f64,
    /// Per-outer-iteration gap of the inner weighted-average identity
    /// (populated when `record_inner_gap` is set).
    pub inner_avg_gaps: Vec<f64>,
    /// Per-outer-iteration `[(x⁺−x)ᵀ(ρI − beta AᵀA)(x⁺−x)] / ‖x⁺−x‖²`;
    /// `NaN` when the displacement is zero.
    pub dk_quadform_ratios: Vec<f64>,
    pub schedule_cap_hit: bool,
    pub anchor_refreshes: u64,
    pub grad_components: u64,
}

/// Full outcome of a solve: final iterate, ergodic means, metrics trace.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub state: IterateState,
    pub ergodic_x: DenseVec,
    pub ergodic_y: DenseVec,
    pub ergodic_lambda: DenseVec,
    pub trace: Vec<MetricsRecord>,
    pub diagnostics: SolveDiagnostics,
    pub converged: bool,
}

/// Stepwise driver owning one run's state; independent runs are isolated and
/// may execute concurrently.
pub struct Solver<'a> {
    p: &'a ProblemSpec,
    cfg: &'a SolverConfig,
    sampler: Sampler,
    reference: Option<&'a SaddleReference>,
    st: IterateState,
    aps: AdaptiveProxState,
    sched: ScheduleState,
    erg: ErgodicAccumulator,
    anchor_sum: DenseVec,
    anchor_count: usize,
    ax_cur: DenseVec,
    by_cur: DenseVec,
    trace: Vec<MetricsRecord>,
    diagnostics: SolveDiagnostics,
    grad_base: u64,
    started: Instant,
    residual_limit: f64,
    converged: bool,
}

impl<'a> Solver<'a> {
    pub fn new(
        p: &'a ProblemSpec,
        cfg: &'a SolverConfig,
        sampler: Sampler,
        reference: Option<&'a SaddleReference>,
    ) -> Result<Self> {
        Self::from_initial(p, cfg, sampler, reference, IterateState::zero(p))
    }

    pub fn from_initial(
        p: &'a ProblemSpec,
        cfg: &'a SolverConfig,
        sampler: Sampler,
        reference: Option<&'a SaddleReference>,
        st: IterateState,
    ) -> Result<Self> {
        cfg.validate(p)?;
        let ax_cur = p.a_mat().mul_vec(&st.x);
        let by_cur = p.b_mat().mul_vec(&st.y);
        let initial_norm = st.residual.norm();
        Ok(Solver {
            p,
            cfg,
            sampler,
            reference,
            aps: AdaptiveProxState::new(&cfg.adaptive),
            sched: ScheduleState::default(),
            erg: ErgodicAccumulator::new(p.dim_x(), p.dim_y(), p.dim_constraint()),
            anchor_sum: DenseVec::zeros(p.dim_x()),
            anchor_count: 0,
            ax_cur,
            by_cur,
            trace: Vec::new(),
            diagnostics: SolveDiagnostics::default(),
            grad_base: p.grad_call_count(),
            started: Instant::now(),
            residual_limit: 1e6 * (initial_norm + 1.0),
            converged: false,
            st,
        })
    }

    pub fn state(&self) -> &IterateState {
        &self.st
    }

    pub fn trace(&self) -> &[MetricsRecord] {
        &self.trace
    }

    pub fn diagnostics(&self) -> &SolveDiagnostics {
        &self.diagnostics
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    fn anchor_candidate(&self) -> DenseVec {
        if self.anchor_count > 0 {
            self.anchor_sum.scaled(1.0 / self.anchor_count as f64)
        } else {
            self.st.x.clone()
        }
    }

    fn wall_seconds(&self, grad_components: u64) -> f64 {
        match self.cfg.timing {
            TimingMode::Measured => self.started.elapsed().as_secs_f64(),
            TimingMode::Modeled {
                seconds_per_component,
            } => grad_components as f64 * seconds_per_component,
        }
    }

    fn errors_at(&self, x: &DenseVec, y: &DenseVec) -> (f64, f64, f64) {
        let equ_err = self.p.constraint_residual(x, y).norm();
        let obj_err = match self.reference {
            Some(r) => (self.p.objective_value(x, y) - r.f_star).abs() / r.f_star.max(1.0),
            None => f64::NAN,
        };
        // f64::max ignores a NaN operand, so this degrades to equ_err
        // when no reference is available
        (obj_err, equ_err, obj_err.max(equ_err))
    }

    /// One full outer cycle: schedule, adaptive coefficient, x-subproblem,
    /// y-step, multiplier step, residual refresh, ergodic update, metrics.
    pub fn outer_iteration(&mut self) -> Result<()> {
        let k = self.st.k;
        let p = self.p;
        let beta = self.cfg.beta;

        let (m_k, eta_k) = schedule_step(
            &self.cfg.schedule,
            &mut self.sched,
            k,
            self.st.x_breve.norm_sq(),
        );
        let rho_k = if self.cfg.adaptive.enabled {
            self.aps.update(p.a_mat(), beta, &self.st.x, k)
        } else {
            self.aps.rho_cur
        };

        if self.sampler.wants_refresh(m_k) {
            let point = self.anchor_candidate();
            self.sampler.refresh_anchor(p, &point);
            self.diagnostics.anchor_refreshes += 1;
        }

        let h = compute_h(p, &self.st, beta);
        let xs = xsub(
            p,
            &mut self.sampler,
            k,
            &self.st.x,
            &self.st.x_breve,
            &h,
            m_k,
            eta_k,
            rho_k,
            &self.cfg.h,
            self.cfg.record_inner_gap,
        )?;
        if let Some(gap) = xs.inner_avg_gap {
            self.diagnostics.inner_avg_gaps.push(gap);
        }

        let ax_new = p.a_mat().mul_vec(&xs.x_new);

        // multiplier surrogate using the *old* y
        let mut lambda_tilde = ax_new.clone();
        lambda_tilde.add_scaled(1.0, &self.by_cur);
        lambda_tilde.add_scaled(-1.0, p.rhs());
        lambda_tilde.scale(-beta);
        lambda_tilde.add_scaled(1.0, &self.st.lambda);

        let y_new = match self.cfg.y_mode {
            YMode::ExactProx => y_step(p, beta, &ax_new, &self.st.lambda)?,
            YMode::Linearized { tau } => y_step_linearized(
                p,
                beta,
                tau,
                &ax_new,
                &self.st.y,
                &self.by_cur,
                &self.st.lambda,
            )?,
        };
        let by_new = p.b_mat().mul_vec(&y_new);

        let mut residual_new = ax_new.clone();
        residual_new.add_scaled(1.0, &by_new);
        residual_new.add_scaled(-1.0, p.rhs());
        let lambda_new = lambda_step(&self.st.lambda, self.cfg.s, beta, &residual_new);

        // quadratic form of the (weakened) proximal-matrix condition
        let dx = &xs.x_new - &self.st.x;
        let d1 = dx.norm_sq();
        let ratio = if d1 > 0.0 {
            let adx = &ax_new - &self.ax_cur;
            (rho_k * d1 - beta * adx.norm_sq()) / d1
        } else {
            f64::NAN
        };
        self.diagnostics.dk_quadform_ratios.push(ratio);

        self.st.x = xs.x_new;
        self.st.x_breve = xs.x_breve_new;
        self.st.y = y_new;
        self.st.lambda = lambda_new;
        self.st.residual = residual_new;
        self.st.k += 1;
        self.ax_cur = ax_new;
        self.by_cur = by_new;

        self.anchor_sum.add_scaled(1.0, &self.st.x);
        self.anchor_count += 1;

        if k >= self.cfg.ergodic_kappa {
            self.erg.push(&self.st.x, &self.st.y, &lambda_tilde);
        }

        let grad_components = p.grad_call_count() - self.grad_base;
        self.diagnostics.grad_components = grad_components;
        let wall = self.wall_seconds(grad_components);

        let (obj_err, equ_err, opt_err) = self.errors_at(&self.st.x, &self.st.y);
        self.trace.push(MetricsRecord {
            k,
            obj_err,
            equ_err,
            opt_err,
            grad_components,
            wall_seconds: wall,
            ergodic_flag: false,
        });
        if self.erg.count() > 0 {
            let (ex, ey, _el) = self.erg.read()?;
            let (obj_err, equ_err, opt_err) = self.errors_at(&ex, &ey);
            self.trace.push(MetricsRecord {
                k,
                obj_err,
                equ_err,
                opt_err,
                grad_components,
                wall_seconds: wall,
                ergodic_flag: true,
            });
            if self.cfg.obj_tol > 0.0 && opt_err <= self.cfg.obj_tol {
                self.converged = true;
            }
        }

        let res_norm = self.st.residual.norm();
        if !res_norm.is_finite() || res_norm > self.residual_limit {
            return Err(Error::Divergence {
                iteration: self.st.k,
                residual: res_norm,
                limit: self.residual_limit,
            });
        }
        Ok(())
    }

    /// Runs to the outer budget or the ergodic stopping tolerance.
    pub fn run(self) -> Result<SolveResult> {
        self.run_with_budget(None)
    }

    /// As [`Solver::run`], additionally stopping once the given wall-time
    /// budget is spent.
    pub fn run_with_budget(mut self, wall_budget_secs: Option<f64>) -> Result<SolveResult> {
        while self.st.k < self.cfg.max_outer && !self.converged {
            self.outer_iteration()?;
            if let Some(budget) = wall_budget_secs {
                if self.started.elapsed().as_secs_f64() >= budget {
                    break;
                }
            }
        }
        self.finish()
    }

    pub fn finish(mut self) -> Result<SolveResult> {
        let (ergodic_x, ergodic_y, ergodic_lambda) = if self.erg.count() > 0 {
            self.erg.read()?
        } else {
            // burn-in never reached: fall back to the last iterate
            (self.st.x.clone(), self.st.y.clone(), self.st.lambda.clone())
        };
        self.diagnostics.rho_bumps = self.aps.bump_count;
        self.diagnostics.last_bump_iteration = self.aps.last_bump_iteration;
        self.diagnostics.rho_final = self.aps.rho_cur;
        self.diagnostics.schedule_cap_hit = self.sched.cap_hit;
        self.diagnostics.anchor_refreshes = self.sampler.refresh_count();
        Ok(SolveResult {
            state: self.st,
            ergodic_x,
            ergodic_y,
            ergodic_lambda,
            trace: self.trace,
            diagnostics: self.diagnostics,
            converged: self.converged,
        })
    }
}

/// Convenience wrapper: build a driver from the zero start and run it.
pub fn solve(
    p: &ProblemSpec,
    cfg: &SolverConfig,
    sampler: Sampler,
    reference: Option<&SaddleReference>,
) -> Result<SolveResult> {
    Solver::new(p, cfg, sampler, reference)?.run()
}

/// [`solve`] with an optional wall-time budget.
pub fn solve_with_budget(
    p: &ProblemSpec,
    cfg: &SolverConfig,
    sampler: Sampler,
    reference: Option<&SaddleReference>,
    wall_budget_secs: Option<f64>,
) -> Result<SolveResult> {
    Solver::new(p, cfg, sampler, reference)?.run_with_budget(wall_budget_secs)
}

#[cfg(test)]
mod tests {
    // dense oracles read more naturally with explicit indices
    #![allow(clippy::needless_range_loop)]

    use super::*;
    use crate::sampler::SamplerConfig;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn quadratic_problem(centers: Vec<Vec<f64>>, a_mat: SparseMat) -> ProblemSpec {
        // f_j(x) = 0.5 ||x - c_j||^2, g = mu |y|_1 with mu = 0 (prox identity)
        let n = centers.len();
        let rows = a_mat.rows();
        let cs: Vec<DenseVec> = centers.into_iter().map(DenseVec::from_vec).collect();
        let cs_val = cs.clone();
        ProblemSpec::new(
            n,
            Arc::new(move |j, x: &DenseVec| x - &cs[j]),
            Arc::new(move |x: &DenseVec| {
                cs_val.iter().map(|c| 0.5 * (x - c).norm_sq()).sum::<f64>() / cs_val.len() as f64
            }),
            Arc::new(|_| 0.0),
            Arc::new(|_tau, q: &DenseVec| q.clone()),
            a_mat,
            SparseMat::neg_identity(rows),
            DenseVec::zeros(rows),
            None,
            1.0,
        )
        .unwrap()
    }

    fn lasso_problem(mu: f64, n: usize) -> ProblemSpec {
        // f(x) = 0.5 ||x||^2 (single component), g = mu |y|_1, x - y = 0
        ProblemSpec::new(
            1,
            Arc::new(|_, x: &DenseVec| x.clone()),
            Arc::new(|x: &DenseVec| 0.5 * x.norm_sq()),
            Arc::new(move |y: &DenseVec| mu * y.iter().map(|v| v.abs()).sum::<f64>()),
            Arc::new(move |tau, q| crate::models::soft_shrink(mu / tau, q)),
            SparseMat::identity(n),
            SparseMat::neg_identity(n),
            DenseVec::zeros(n),
            None,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn inner_params_examples() {
        let p1 = inner_params(1, 0.5);
        assert_eq!(p1.mix_weight, 1.0);
        assert_eq!(p1.prox_weight, 4.0);
        assert_eq!(p1.avg_weight, 1.0);

        let p3 = inner_params(3, 0.5);
        assert_abs_diff_eq!(p3.mix_weight, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p3.prox_weight, 4.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p3.avg_weight, 1.0 / 6.0, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn inner_params_identity(t in 1usize..10_000, eta_exp in -8.0f64..2.0) {
            let eta = 10f64.powf(eta_exp);
            let ip = inner_params(t, eta);
            let lhs = ip.mix_weight * ip.prox_weight / ip.avg_weight;
            prop_assert!((lhs - 2.0 / eta).abs() <= 1e-12 * (2.0 / eta));
        }
    }

    #[test]
    fn power_schedule_examples() {
        let sc = ScheduleConfig {
            kind: ScheduleKind::Power,
            c1: 1.0,
            c2: 0.5,
            c3: 0.01,
            rho_exp: 1.1,
            m_floor: 200,
            eta_const: 0.5,
            theta: 0.1,
            m_cap: 1_000_000,
        };
        let mut state = ScheduleState::default();
        let (m0, _) = schedule_step(&sc, &mut state, 0, 0.0);
        assert_eq!(m0, 200);
        // below the floor the stepsize saturates at c1/(M(M+1)) < c2
        let (_, eta0) = schedule_step(&sc, &mut state, 0, 0.0);
        assert_abs_diff_eq!(eta0, 1.0 / (200.0 * 201.0), epsilon = 1e-18);
        let (m_big, _) = schedule_step(&sc, &mut state, 10_000, 0.0);
        assert_eq!(m_big, 252);
    }

    #[test]
    fn power_schedule_flat_product_past_floor() {
        let nu = 3.0;
        let sc = ScheduleConfig::paper_power(nu, 20);
        let mut state = ScheduleState::default();
        let mut prev_product = 0.0;
        for k in 0..5000 {
            let (m, eta) = schedule_step(&sc, &mut state, k, 0.0);
            let product = eta * m as f64 * (m as f64 + 1.0);
            assert!(product >= prev_product - 1e-12 * product.abs());
            if m > sc.m_floor {
                assert_abs_diff_eq!(product, sc.c1, epsilon = 1e-12 * sc.c1);
            }
            prev_product = product;
        }
    }

    #[test]
    fn constant_schedule() {
        let sc = ScheduleConfig {
            kind: ScheduleKind::Constant,
            eta_const: 0.125,
            m_floor: 7,
            ..ScheduleConfig::paper_power(1.0, 7)
        };
        let mut state = ScheduleState::default();
        for k in 0..10 {
            assert_eq!(schedule_step(&sc, &mut state, k, 3.0), (7, 0.125));
        }
    }

    #[test]
    fn geometric_schedule_growth_and_cap() {
        let sc = ScheduleConfig {
            kind: ScheduleKind::Geometric,
            theta: 0.1,
            m_floor: 12,
            m_cap: 5_000,
            ..ScheduleConfig::paper_power(1.0, 12)
        };
        let mut state = ScheduleState::default();
        let (m0, eta0) = schedule_step(&sc, &mut state, 0, 0.5);
        assert_eq!(m0, 12);
        assert_abs_diff_eq!(eta0, 1.0 / 12.0, epsilon = 1e-15);
        let (m1, eta1) = schedule_step(&sc, &mut state, 1, 0.5);
        assert_eq!(m1, ect((1.1f64).powi(2) * 12.0 * 1.5));
        assert_abs_diff_eq!(eta1, (1.1f64).powi(-1) / m1 as f64, epsilon = 1e-15);
        assert!(!state.cap_hit);
        let mut prev_product = 0.0;
        for k in 2..60 {
            let (m, eta) = schedule_step(&sc, &mut state, k, 0.5);
            assert!(m >= 1);
            assert!(eta > 0.0);
            if !state.cap_hit {
                let product = eta * m as f64 * (m as f64 + 1.0);
                assert!(product >= prev_product - 1e-12 * product);
                prev_product = product;
            }
        }
        assert!(state.cap_hit);
        let (m_capped, _) = schedule_step(&sc, &mut state, 60, 0.5);
        assert_eq!(m_capped, 5_000);
    }

    fn ect(v: f64) -> usize {
        v.ceil() as usize
    }

    #[test]
    fn compute_h_cases() {
        let p = quadratic_problem(vec![vec![0.0, 0.0]], SparseMat::identity(2));
        let mut st = IterateState::zero(&p);
        // lambda = 0, residual = 0 -> h = 0
        assert_eq!(compute_h(&p, &st, 0.3), DenseVec::zeros(2));
        // A = I, lambda = 0 -> h = beta * residual
        st.residual = DenseVec::from_vec(vec![1.0, -2.0]);
        let h = compute_h(&p, &st, 0.3);
        assert_abs_diff_eq!(h[0], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(h[1], -0.6, epsilon = 1e-15);
    }

    #[test]
    fn compute_h_matches_dense_recompute() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut trips = Vec::new();
        for r in 0..6 {
            for c in 0..4 {
                if rng.gen_bool(0.5) {
                    trips.push((r, c, rng.gen_range(-1.0..1.0)));
                }
            }
        }
        let a = SparseMat::from_triplets(6, 4, &trips).unwrap();
        let p = quadratic_problem(vec![vec![0.0; 4]], a.clone());
        let mut st = IterateState::zero(&p);
        st.lambda = DenseVec::from_vec((0..6).map(|_| rng.gen_range(-1.0..1.0)).collect());
        st.residual = DenseVec::from_vec((0..6).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let beta = 0.7;
        let h = compute_h(&p, &st, beta);
        // independent dense recomputation of -A^T (lambda - beta r)
        let mut dense = vec![vec![0.0f64; 4]; 6];
        for r in 0..6 {
            for (c, v) in a.row(r) {
                dense[r][c] = v;
            }
        }
        for i in 0..4 {
            let mut acc = 0.0;
            for r in 0..6 {
                acc -= dense[r][i] * (st.lambda[r] - beta * st.residual[r]);
            }
            assert_abs_diff_eq!(h[i], acc, epsilon = 1e-12);
        }
    }

    #[test]
    fn xsub_single_step_matches_dense_oracle() {
        // N = 1, M_k = 1, breve = x^k: the update is the exact minimizer of
        // <grad f(x^k) + h, x> + (1/eta)|x - x^k|_H^2 + 0.5 |x - x^k|_{rho I}^2
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let n = 4;
            let center: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p = quadratic_problem(vec![center.clone()], SparseMat::identity(n));
            let x_k = DenseVec::from_vec((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let h = DenseVec::from_vec((0..n).map(|_| rng.gen_range(-0.5..0.5)).collect());
            let eta = 0.25;
            let rho = 0.8;
            let metric =
                DiagMetric::new((0..n).map(|_| rng.gen_range(0.5..2.0)).collect()).unwrap();
            let mut sampler = Sampler::new(SamplerConfig::plain(1)).unwrap();
            let out = xsub(
                &p,
                &mut sampler,
                0,
                &x_k,
                &x_k,
                &h,
                1,
                eta,
                rho,
                &metric,
                true,
            )
            .unwrap();

            // dense quadratic minimizer: (gamma H + rho I) x = gamma H x_k + rho x_k - d - h
            let gamma = 2.0 / eta;
            let d = &x_k - &DenseVec::from_vec(center);
            for i in 0..n {
                let lhs = gamma * metric.diagonal()[i] + rho;
                let rhs = gamma * metric.diagonal()[i] * x_k[i] + rho * x_k[i] - d[i] - h[i];
                assert_abs_diff_eq!(out.x_new[i], rhs / lhs, epsilon = 1e-12);
            }
            assert_eq!(out.components_used, 1);
        }
    }

    #[test]
    fn xsub_zero_direction_is_stationary() {
        // f = 0 and h = 0: x stays put for any number of steps
        let n = 3;
        let p = ProblemSpec::new(
            1,
            Arc::new(move |_, x: &DenseVec| DenseVec::zeros(x.len())),
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
            Arc::new(|_t, q: &DenseVec| q.clone()),
            SparseMat::identity(n),
            SparseMat::neg_identity(n),
            DenseVec::zeros(n),
            None,
            1.0,
        )
        .unwrap();
        let x_k = DenseVec::from_vec(vec![0.4, -0.7, 1.2]);
        let metric = DiagMetric::uniform(1.0, n).unwrap();
        let mut sampler = Sampler::new(SamplerConfig::plain(0)).unwrap();
        let out = xsub(
            &p,
            &mut sampler,
            0,
            &x_k,
            &x_k,
            &DenseVec::zeros(n),
            25,
            0.1,
            0.5,
            &metric,
            true,
        )
        .unwrap();
        for i in 0..n {
            assert_abs_diff_eq!(out.x_new[i], x_k[i], epsilon = 1e-13);
        }
        assert!(out.inner_avg_gap.unwrap() <= 1e-13);
    }

    #[test]
    fn xsub_weighted_average_identity() {
        let p = quadratic_problem(
            vec![vec![0.5, -0.5], vec![-0.25, 1.0], vec![1.5, 0.0]],
            SparseMat::identity(2),
        );
        let x_k = DenseVec::from_vec(vec![0.3, 0.3]);
        let metric = DiagMetric::uniform(0.8, 2).unwrap();
        let mut sampler = Sampler::new(SamplerConfig::plain(5)).unwrap();
        let out = xsub(
            &p,
            &mut sampler,
            0,
            &x_k,
            &x_k,
            &DenseVec::zeros(2),
            40,
            0.05,
            1.0,
            &metric,
            true,
        )
        .unwrap();
        assert!(out.inner_avg_gap.unwrap() <= 1e-10);
    }

    #[test]
    fn y_step_shrinkage_and_zero_mu() {
        let n = 3;
        let mu = 0.2;
        let p = lasso_problem(mu, n);
        let beta = 0.5;
        let ax = DenseVec::from_vec(vec![1.0, -0.1, 0.6]);
        let lambda = DenseVec::from_vec(vec![0.05, 0.0, -0.05]);
        let y = y_step(&p, beta, &ax, &lambda).unwrap();
        for i in 0..n {
            let q = ax[i] - lambda[i] / beta;
            let want = q.signum() * (q.abs() - mu / beta).max(0.0);
            assert_abs_diff_eq!(y[i], want, epsilon = 1e-15);
        }

        // mu = 0: prox is the identity, y = Ax - lambda/beta
        let p0 = lasso_problem(0.0, n);
        let y0 = y_step(&p0, beta, &ax, &lambda).unwrap();
        for i in 0..n {
            assert_abs_diff_eq!(y0[i], ax[i] - lambda[i] / beta, epsilon = 1e-15);
        }
    }

    #[test]
    fn y_step_matches_grid_search() {
        let mu = 0.3;
        let p = lasso_problem(mu, 1);
        let beta = 0.7;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let ax = DenseVec::from_vec(vec![rng.gen_range(-2.0..2.0)]);
            let lambda = DenseVec::from_vec(vec![rng.gen_range(-1.0..1.0)]);
            let y = y_step(&p, beta, &ax, &lambda).unwrap();
            // grid search of g(y) + beta/2 |Ax + By - b - lambda/beta|^2, B = -I
            let mut best = f64::INFINITY;
            let mut arg = 0.0;
            let mut cand: f64 = -4.0;
            while cand <= 4.0 {
                let val = mu * cand.abs() + 0.5 * beta * (ax[0] - cand - lambda[0] / beta).powi(2);
                if val < best {
                    best = val;
                    arg = cand;
                }
                cand += 1e-5;
            }
            assert!((y[0] - arg).abs() <= 1e-5);
        }
    }

    #[test]
    fn y_step_requires_neg_identity() {
        let p = quadratic_problem(vec![vec![0.0, 0.0]], SparseMat::identity(2));
        // replace B with +I via a fresh problem
        let p_bad = ProblemSpec::new(
            1,
            Arc::new(|_, x: &DenseVec| x.clone()),
            Arc::new(|x: &DenseVec| 0.5 * x.norm_sq()),
            Arc::new(|_| 0.0),
            Arc::new(|_t, q: &DenseVec| q.clone()),
            SparseMat::identity(2),
            SparseMat::identity(2),
            DenseVec::zeros(2),
            None,
            1.0,
        )
        .unwrap();
        assert!(y_step(&p_bad, 0.5, &DenseVec::zeros(2), &DenseVec::zeros(2)).is_err());
        drop(p);
    }

    #[test]
    fn linearized_y_reduces_to_exact_when_b_neg_identity() {
        let mu = 0.15;
        let p = lasso_problem(mu, 3);
        let beta = 0.4;
        let ax = DenseVec::from_vec(vec![0.9, -1.4, 0.2]);
        let lambda = DenseVec::from_vec(vec![0.1, -0.2, 0.0]);
        let y_old = DenseVec::from_vec(vec![0.3, 0.1, -0.6]);
        let by_old = p.b_mat().mul_vec(&y_old);
        // tau = beta and B = -I collapse q to the exact prox argument
        let lin = y_step_linearized(&p, beta, beta, &ax, &y_old, &by_old, &lambda).unwrap();
        let exact = y_step(&p, beta, &ax, &lambda).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(lin[i], exact[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn linearized_y_with_zero_g_returns_q() {
        let p = quadratic_problem(vec![vec![0.0, 0.0]], SparseMat::identity(2));
        let beta = 0.4;
        let tau = 0.9;
        let ax = DenseVec::from_vec(vec![0.5, -0.5]);
        let y_old = DenseVec::from_vec(vec![0.2, 0.3]);
        let by_old = p.b_mat().mul_vec(&y_old);
        let lambda = DenseVec::from_vec(vec![0.0, 0.1]);
        let y = y_step_linearized(&p, beta, tau, &ax, &y_old, &by_old, &lambda).unwrap();
        // q = y_old - B^T [beta (Ax + B y_old - b) - lambda] / tau with B = -I
        for i in 0..2 {
            let r_mid = ax[i] - y_old[i];
            let q = y_old[i] + (beta * r_mid - lambda[i]) / tau;
            assert_abs_diff_eq!(y[i], q, epsilon = 1e-14);
        }
    }

    #[test]
    fn linearized_y_converges_to_exact_subproblem_fixed_point() {
        // orthonormal-column B, g = 0: the linearized iteration's fixed point
        // solves the exact y-subproblem (dense normal equations oracle)
        let b_mat = SparseMat::from_triplets(
            3,
            2,
            &[
                (0, 0, 1.0 / 2.0f64.sqrt()),
                (1, 0, 1.0 / 2.0f64.sqrt()),
                (2, 1, 1.0),
            ],
        )
        .unwrap();
        let p = ProblemSpec::new(
            1,
            Arc::new(|_, x: &DenseVec| x.clone()),
            Arc::new(|x: &DenseVec| 0.5 * x.norm_sq()),
            Arc::new(|_| 0.0),
            Arc::new(|_t, q: &DenseVec| q.clone()),
            SparseMat::identity(3),
            b_mat.clone(),
            DenseVec::from_vec(vec![0.2, -0.1, 0.4]),
            None,
            1.0,
        )
        .unwrap();
        let beta = 0.6;
        let tau = beta * 1.0; // B^T B = I
        validate_tau(&p, beta, tau).unwrap();
        let ax = DenseVec::from_vec(vec![0.7, 0.1, -0.3]);
        let lambda = DenseVec::from_vec(vec![0.05, -0.15, 0.2]);
        let mut y = DenseVec::zeros(2);
        for _ in 0..50 {
            let by = p.b_mat().mul_vec(&y);
            y = y_step_linearized(&p, beta, tau, &ax, &y, &by, &lambda).unwrap();
        }
        // exact subproblem: B^T B y = -B^T (Ax - b - lambda/beta)
        let mut w = ax.clone();
        w.add_scaled(-1.0, p.rhs());
        w.add_scaled(-1.0 / beta, &lambda);
        let rhs = p.b_mat().mul_vec_t(&w).scaled(-1.0);
        // B^T B = I here, so y_exact = rhs
        for i in 0..2 {
            assert_abs_diff_eq!(y[i], rhs[i], epsilon = 1e-6);
        }
    }

    #[test]
    fn lambda_step_cases() {
        let lambda = DenseVec::from_vec(vec![1.0, -2.0]);
        // feasible point: residual zero, multiplier unchanged
        let same = lambda_step(&lambda, 1.618, 0.04, &DenseVec::zeros(2));
        assert_eq!(same, lambda);

        let r = DenseVec::from_vec(vec![0.5, 1.0]);
        let next = lambda_step(&lambda, 1.618, 0.04, &r);
        for i in 0..2 {
            assert_abs_diff_eq!(next[i], lambda[i] - 0.06472 * r[i], epsilon = 1e-15);
        }
        // consistency: (lambda - lambda_next) / (s beta) = residual
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let l = DenseVec::from_vec((0..4).map(|_| rng.gen_range(-3.0..3.0)).collect());
            let r = DenseVec::from_vec((0..4).map(|_| rng.gen_range(-3.0..3.0)).collect());
            let (s, beta) = (rng.gen_range(0.1..1.6), rng.gen_range(0.01..2.0));
            let next = lambda_step(&l, s, beta, &r);
            for i in 0..4 {
                let back = (l[i] - next[i]) / (s * beta);
                assert!((back - r[i]).abs() <= 1e-12 * (1.0 + r[i].abs()));
            }
        }
    }

    #[test]
    fn adaptive_rho_identity_matrix() {
        let a = SparseMat::identity(3);
        let cfg = AdaptiveProxConfig::default();
        let mut st = AdaptiveProxState::new(&cfg);
        let beta = 0.04;
        let x0 = DenseVec::from_vec(vec![1.0, 0.0, 0.0]);
        let x1 = DenseVec::from_vec(vec![0.5, 0.25, -0.5]);
        assert_eq!(st.update(&a, beta, &x0, 0), cfg.rho0); // no previous x
        let rho = st.update(&a, beta, &x1, 1);
        // A = I: delta2/delta1 = 1, rho = max(rho_min, beta)
        assert_abs_diff_eq!(rho, beta.max(cfg.rho_min), epsilon = 1e-12);
        // no movement: rho unchanged
        let rho2 = st.update(&a, beta, &x1, 2);
        assert_eq!(rho2, rho);
        assert_eq!(st.bump_count, 0);
    }

    #[test]
    fn adaptive_rho_top_eigenvector() {
        // diag(3, 1): top eigenvector e1, lambda_max(A^T A) = 9
        let a = SparseMat::from_triplets(2, 2, &[(0, 0, 3.0), (1, 1, 1.0)]).unwrap();
        let cfg = AdaptiveProxConfig::default();
        let mut st = AdaptiveProxState::new(&cfg);
        let beta = 0.5;
        st.update(&a, beta, &DenseVec::zeros(2), 0);
        let rho = st.update(&a, beta, &DenseVec::from_vec(vec![1.0, 0.0]), 1);
        let lam_max = a.gram_spectral_norm_est(200, 7);
        assert_abs_diff_eq!(rho, beta * lam_max, epsilon = 1e-9);
    }

    #[test]
    fn outer_iteration_fixed_point_stays() {
        // KKT point of f = 0.5|x - c|^2, g = 0, x = y:
        // x* = y* witn grad f(x*) = lambda*, grad g = -lambda* = 0
        // pick c so that x* = c, lambda* = 0 -> feasible stationary start
        let n = 2;
        let c = vec![0.3, -0.4];
        let p = quadratic_problem(vec![c.clone()], SparseMat::identity(n));
        let mut cfg = SolverConfig::paper_defaults(&p).unwrap();
        cfg.schedule = ScheduleConfig::paper_power(1.0, 3);
        cfg.max_outer = 1;
        let x_star = DenseVec::from_vec(c);
        let st = IterateState::from_point(&p, x_star.clone(), x_star.clone(), DenseVec::zeros(n));
        let sampler = Sampler::new(SamplerConfig::plain(0)).unwrap();
        let mut solver = Solver::from_initial(&p, &cfg, sampler, None, st).unwrap();
        solver.outer_iteration().unwrap();
        let moved = (&solver.state().x - &x_star).norm();
        assert!(moved <= 1e-8, "moved {moved}");
    }

    #[test]
    fn metrics_equ_err_matches_independent_recompute() {
        let p = lasso_problem(0.05, 3);
        let mut cfg = SolverConfig::paper_defaults(&p).unwrap();
        cfg.schedule = ScheduleConfig::paper_power(1.0, 5);
        cfg.max_outer = 10;
        cfg.timing = TimingMode::Modeled {
            seconds_per_component: 1e-9,
        };
        let sampler = Sampler::new(SamplerConfig::plain(4)).unwrap();
        let mut solver = Solver::new(&p, &cfg, sampler, None).unwrap();
        for _ in 0..10 {
            solver.outer_iteration().unwrap();
            let raw = solver
                .trace()
                .iter()
                .rev()
                .find(|r| !r.ergodic_flag)
                .unwrap();
            let st = solver.state();
            let recomputed = p.constraint_residual(&st.x, &st.y).norm();
            assert_abs_diff_eq!(raw.equ_err, recomputed, epsilon = 1e-12);
        }
    }

    #[test]
    fn solve_trivial_instance_reaches_origin() {
        let p = lasso_problem(0.0, 4);
        let mut cfg = SolverConfig::paper_defaults(&p).unwrap();
        cfg.schedule = ScheduleConfig::paper_power(1.0, 10);
        cfg.max_outer = 400;
        // hold the proximal coefficient at the curvature scale: quadratic
        // gradients do not saturate, so the adaptive level beta |A^T A| is
        // too weak for a stable inner loop here
        cfg.adaptive.enabled = false;
        cfg.adaptive.rho0 = 2.0;
        cfg.timing = TimingMode::Modeled {
            seconds_per_component: 1e-9,
        };
        let st = IterateState::from_point(
            &p,
            DenseVec::from_vec(vec![1.0, -1.0, 0.5, 2.0]),
            DenseVec::zeros(4),
            DenseVec::zeros(4),
        );
        let sampler = Sampler::new(SamplerConfig::plain(0)).unwrap();
        let res = Solver::from_initial(&p, &cfg, sampler, None, st)
            .unwrap()
            .run()
            .unwrap();
        assert!(res.state.x.norm() <= 1e-6, "x norm {}", res.state.x.norm());
        assert!(res.state.y.norm() <= 1e-6);
        assert!(res.state.lambda.norm() <= 1e-6);
        assert!(res.state.residual.norm() <= 1e-6);
    }

    #[test]
    fn same_seed_identical_traces() {
        let p = quadratic_problem(
            vec![vec![0.4, 0.0], vec![-0.2, 0.6], vec![0.1, -0.3]],
            SparseMat::identity(2),
        );
        let mut cfg = SolverConfig::paper_defaults(&p).unwrap();
        cfg.schedule = ScheduleConfig::paper_power(1.0, 5);
        cfg.adaptive.enabled = false;
        cfg.adaptive.rho0 = 2.0;
        cfg.max_outer = 30;
        cfg.timing = TimingMode::Modeled {
            seconds_per_component: 1e-9,
        };
        let reference = SaddleReference {
            x_star: DenseVec::zeros(2),
            y_star: DenseVec::zeros(2),
            f_star: 0.25,
        };
        let run = |seed: u64| {
            let scfg = SamplerConfig::plain(seed);
            let sampler = Sampler::new(scfg).unwrap();
            solve(&p, &cfg, sampler, Some(&reference)).unwrap()
        };
        let a = run(9);
        let b = run(9);
        assert_eq!(a.state.x, b.state.x);
        assert_eq!(a.trace, b.trace);
        let c = run(10);
        assert_ne!(a.state.x, c.state.x);
    }

    #[test]
    fn ergodic_accumulator_reads_means() {
        let mut acc = ErgodicAccumulator::new(2, 2, 2);
        assert!(acc.read().is_err());
        let one = DenseVec::from_vec(vec![1.0, 2.0]);
        acc.push(&one, &one, &one);
        let (x, _, _) = acc.read().unwrap();
        assert_eq!(x, one); // single entry: the recorded iterate itself
        acc.push(&DenseVec::from_vec(vec![3.0, 4.0]), &one, &one);
        let (x, y, _) = acc.read().unwrap();
        assert_eq!(x.as_slice(), &[2.0, 3.0]);
        assert_eq!(y, one); // constant iterates: same constant
    }

    #[test]
    fn ergodic_matches_recomputation_from_history() {
        let p = lasso_problem(0.01, 2);
        let mut cfg = SolverConfig::paper_defaults(&p).unwrap();
        cfg.schedule = ScheduleConfig::paper_power(1.0, 4);
        cfg.max_outer = 25;
        cfg.ergodic_kappa = 3;
        cfg.timing = TimingMode::Modeled {
            seconds_per_component: 1e-9,
        };
        let st = IterateState::from_point(
            &p,
            DenseVec::from_vec(vec![1.5, -0.7]),
            DenseVec::zeros(2),
            DenseVec::zeros(2),
        );
        let sampler = Sampler::new(SamplerConfig::plain(2)).unwrap();
        let mut solver = Solver::from_initial(&p, &cfg, sampler, None, st).unwrap();
        // replay the tilde-iterate definition from stored history
        let mut xs = Vec::new();
        let mut lambdas = Vec::new();
        for k in 0..25 {
            let (lambda_prev, y_prev) = (solver.state().lambda.clone(), solver.state().y.clone());
            solver.outer_iteration().unwrap();
            if k >= cfg.ergodic_kappa {
                let x_new = solver.state().x.clone();
                let mut lt = p.a_mat().mul_vec(&x_new);
                lt.add_scaled(1.0, &p.b_mat().mul_vec(&y_prev));
                lt.add_scaled(-1.0, p.rhs());
                lt.scale(-cfg.beta);
                lt.add_scaled(1.0, &lambda_prev);
                xs.push(x_new);
                lambdas.push(lt);
            }
        }
        let res = solver.finish().unwrap();
        let count = xs.len() as f64;
        for i in 0..2 {
            let mean_x: f64 = xs.iter().map(|v| v[i]).sum::<f64>() / count;
            let mean_l: f64 = lambdas.iter().map(|v| v[i]).sum::<f64>() / count;
            assert_abs_diff_eq!(res.ergodic_x[i], mean_x, epsilon = 1e-12);
            assert_abs_diff_eq!(res.ergodic_lambda[i], mean_l, epsilon = 1e-12);
        }
    }

    #[test]
    fn dual_residual_identity_along_run() {
        let p = lasso_problem(0.02, 3);
        let mut cfg = SolverConfig::paper_defaults(&p).unwrap();
        cfg.schedule = ScheduleConfig::paper_power(1.0, 5);
        cfg.max_outer = 20;
        cfg.timing = TimingMode::Modeled {
            seconds_per_component: 1e-9,
        };
        let st = IterateState::from_point(
            &p,
            DenseVec::from_vec(vec![1.0, 0.5, -0.5]),
            DenseVec::zeros(3),
            DenseVec::zeros(3),
        );
        let sampler = Sampler::new(SamplerConfig::plain(0)).unwrap();
        let mut solver = Solver::from_initial(&p, &cfg, sampler, None, st).unwrap();
        for _ in 0..20 {
            let lambda_prev = solver.state().lambda.clone();
            solver.outer_iteration().unwrap();
            let st = solver.state();
            for i in 0..3 {
                let back = (lambda_prev[i] - st.lambda[i]) / (cfg.s * cfg.beta);
                assert!((back - st.residual[i]).abs() <= 1e-12 * (1.0 + st.residual[i].abs()));
            }
        }
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let p = lasso_problem(0.1, 2);
        let good = SolverConfig::paper_defaults(&p).unwrap();
        let mut bad = good.clone();
        bad.s = 2.0;
        assert!(bad.validate(&p).is_err());
        let mut bad = good.clone();
        bad.beta = 0.0;
        assert!(bad.validate(&p).is_err());
        let mut bad = good.clone();
        bad.adaptive.growth_eta = 1.0;
        assert!(bad.validate(&p).is_err());
        // exact prox demands B = -I
        let p_bad_b = ProblemSpec::new(
            1,
            Arc::new(|_, x: &DenseVec| x.clone()),
            Arc::new(|x: &DenseVec| 0.5 * x.norm_sq()),
            Arc::new(|_| 0.0),
            Arc::new(|_t, q: &DenseVec| q.clone()),
            SparseMat::identity(2),
            SparseMat::identity(2),
            DenseVec::zeros(2),
            None,
            1.0,
        )
        .unwrap();
        assert!(good.validate(&p_bad_b).is_err());
        // linearized tau below the spectral bound is rejected
        let mut lin = SolverConfig::paper_defaults(&p_bad_b).unwrap();
        lin.y_mode = YMode::Linearized { tau: 1e-6 };
        assert!(lin.validate(&p_bad_b).is_err());
        lin.y_mode = YMode::Linearized { tau: 1.0 };
        assert!(lin.validate(&p_bad_b).is_ok());
    }
}
