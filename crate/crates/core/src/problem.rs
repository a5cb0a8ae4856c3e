//! Problem instances: oracle bundle for the smooth average term, the
//! nonsmooth term's prox, and the linear coupling constraint `Ax + By = b`.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DenseVec, SparseMat};

pub type ComponentGradOracle = dyn Fn(usize, &DenseVec) -> DenseVec + Send + Sync;
pub type ValueOracle = dyn Fn(&DenseVec) -> f64 + Send + Sync;
pub type ProxOracle = dyn Fn(f64, &DenseVec) -> DenseVec + Send + Sync;

/// Axis-aligned box constraint on the x-variable.
///
/// Because the inner proximal metric is diagonal, projecting onto the box in
/// that metric is the componentwise clamp, independent of the weights.
#[derive(Debug, Clone)]
pub struct BoxBounds {
    lo: DenseVec,
    hi: DenseVec,
}

impl BoxBounds {
    pub fn new(lo: DenseVec, hi: DenseVec) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                context: "box bounds",
                expected: lo.len(),
                got: hi.len(),
            });
        }
        for i in 0..lo.len() {
            if lo[i].is_nan() || hi[i].is_nan() || lo[i] > hi[i] {
                return Err(Error::invalid_config(
                    "x_box",
                    format!("lo[{i}] = {} exceeds hi[{i}] = {}", lo[i], hi[i]),
                ));
            }
        }
        Ok(BoxBounds { lo, hi })
    }

    pub fn clamp_in_place(&self, x: &mut DenseVec) {
        for i in 0..x.len() {
            x[i] = x[i].clamp(self.lo[i], self.hi[i]);
        }
    }

    pub fn lo(&self) -> &DenseVec {
        &self.lo
    }

    pub fn hi(&self) -> &DenseVec {
        &self.hi
    }

    /// Diameter of the box in the metric `H`, `sup ‖u − v‖_H`.
    pub fn diameter_h(&self, h: &crate::linalg::DiagMetric) -> f64 {
        self.lo
            .iter()
            .zip(self.hi.iter())
            .zip(h.diagonal())
            .map(|((l, u), m)| m * (u - l) * (u - l))
            .sum::<f64>()
            .sqrt()
    }
}

/// An instance of the separable problem: smooth average of `n_components`
/// convex pieces in x, a prox-friendly convex term in y, and `Ax + By = b`.
#[derive(Clone)]
pub struct ProblemSpec {
    n1: usize,
    n2: usize,
    n: usize,
    n_components: usize,
    component_grad: Arc<ComponentGradOracle>,
    f_value: Arc<ValueOracle>,
    g_value: Arc<ValueOracle>,
    g_prox: Arc<ProxOracle>,
    a_mat: SparseMat,
    b_mat: SparseMat,
    rhs: DenseVec,
    x_box: Option<Arc<BoxBounds>>,
    lipschitz_nu: f64,
    grad_calls: Arc<AtomicU64>,
    // components of the *original* problem charged per oracle call; 1 except
    // for the single-component view, where one call stands for a full gradient
    grad_cost_per_call: u64,
}

impl ProblemSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_components: usize,
        component_grad: Arc<ComponentGradOracle>,
        f_value: Arc<ValueOracle>,
        g_value: Arc<ValueOracle>,
        g_prox: Arc<ProxOracle>,
        a_mat: SparseMat,
        b_mat: SparseMat,
        rhs: DenseVec,
        x_box: Option<BoxBounds>,
        lipschitz_nu: f64,
    ) -> Result<Self> {
        if n_components == 0 {
            return Err(Error::invalid_config("n_components", "must be at least 1"));
        }
        if a_mat.rows() != b_mat.rows() {
            return Err(Error::DimensionMismatch {
                context: "constraint row count (A vs B)",
                expected: a_mat.rows(),
                got: b_mat.rows(),
            });
        }
        if rhs.len() != a_mat.rows() {
            return Err(Error::DimensionMismatch {
                context: "constraint rhs",
                expected: a_mat.rows(),
                got: rhs.len(),
            });
        }
        if let Some(bx) = &x_box {
            if bx.lo.len() != a_mat.cols() {
                return Err(Error::DimensionMismatch {
                    context: "x_box",
                    expected: a_mat.cols(),
                    got: bx.lo.len(),
                });
            }
        }
        if !(lipschitz_nu > 0.0 && lipschitz_nu.is_finite()) {
            return Err(Error::invalid_config(
                "lipschitz_nu",
                format!("must be finite and > 0, got {lipschitz_nu}"),
            ));
        }
        Ok(ProblemSpec {
            n1: a_mat.cols(),
            n2: b_mat.cols(),
            n: a_mat.rows(),
            n_components,
            component_grad,
            f_value,
            g_value,
            g_prox,
            a_mat,
            b_mat,
            rhs,
            x_box: x_box.map(Arc::new),
            lipschitz_nu,
            grad_calls: Arc::new(AtomicU64::new(0)),
            grad_cost_per_call: 1,
        })
    }

    pub fn dim_x(&self) -> usize {
        self.n1
    }

    pub fn dim_y(&self) -> usize {
        self.n2
    }

    pub fn dim_constraint(&self) -> usize {
        self.n
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn a_mat(&self) -> &SparseMat {
        &self.a_mat
    }

    pub fn b_mat(&self) -> &SparseMat {
        &self.b_mat
    }

    pub fn rhs(&self) -> &DenseVec {
        &self.rhs
    }

    pub fn x_box(&self) -> Option<&BoxBounds> {
        self.x_box.as_deref()
    }

    pub fn lipschitz_nu(&self) -> f64 {
        self.lipschitz_nu
    }

    /// Gradient of one component, `0 <= j < n_components`. Every call is
    /// counted toward the cumulative gradient-component tally.
    pub fn component_grad(&self, j: usize, x: &DenseVec) -> DenseVec {
        debug_assert!(j < self.n_components);
        self.grad_calls
            .fetch_add(self.grad_cost_per_call, Ordering::Relaxed);
        (self.component_grad)(j, x)
    }

    /// Mean of all component gradients.
    pub fn full_gradient(&self, x: &DenseVec) -> DenseVec {
        let mut acc = self.component_grad(0, x);
        for j in 1..self.n_components {
            let g = self.component_grad(j, x);
            acc.add_scaled(1.0, &g);
        }
        acc.scale(1.0 / self.n_components as f64);
        acc
    }

    pub fn f_value(&self, x: &DenseVec) -> f64 {
        (self.f_value)(x)
    }

    pub fn g_value(&self, y: &DenseVec) -> f64 {
        (self.g_value)(y)
    }

    /// `f(x) + g(y)`
    pub fn objective_value(&self, x: &DenseVec, y: &DenseVec) -> f64 {
        self.f_value(x) + self.g_value(y)
    }

    /// `argmin_y g(y) + (tau/2) ‖y − q‖²`
    pub fn g_prox(&self, tau: f64, q: &DenseVec) -> DenseVec {
        (self.g_prox)(tau, q)
    }

    /// Projection of `x` onto the feasible x-set; identity when unconstrained.
    pub fn project_x(&self, x: &DenseVec) -> DenseVec {
        let mut out = x.clone();
        self.project_x_in_place(&mut out);
        out
    }

    pub fn project_x_in_place(&self, x: &mut DenseVec) {
        if let Some(bx) = &self.x_box {
            bx.clamp_in_place(x);
        }
    }

    /// `Ax + By − b`
    pub fn constraint_residual(&self, x: &DenseVec, y: &DenseVec) -> DenseVec {
        let mut r = self.a_mat.mul_vec(x);
        r.add_scaled(1.0, &self.b_mat.mul_vec(y));
        r.add_scaled(-1.0, &self.rhs);
        r
    }

    /// Cumulative number of component-gradient oracle calls.
    pub fn grad_call_count(&self) -> u64 {
        self.grad_calls.load(Ordering::Relaxed)
    }

    /// View of the same problem with the full gradient as a single component.
    /// The gradient-call counter is shared and each call charges the cost of
    /// a full gradient, so costs stay expressed in components of the original
    /// problem.
    pub fn as_single_component(&self) -> ProblemSpec {
        let raw = self.component_grad.clone();
        let n = self.n_components;
        let mut single = self.clone();
        single.n_components = 1;
        single.grad_cost_per_call = self.grad_cost_per_call * n as u64;
        single.component_grad = Arc::new(move |_j, x| {
            let mut acc = (raw)(0, x);
            for j in 1..n {
                acc.add_scaled(1.0, &(raw)(j, x));
            }
            acc.scale(1.0 / n as f64);
            acc
        });
        single
    }
}

/// A primal-dual reference solution used for error reporting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SaddleReference {
    pub x_star: DenseVec,
    pub y_star: DenseVec,
    pub f_star: f64,
}

impl SaddleReference {
    /// Checks the feasibility invariant `‖A x* + B y* − b‖ <= tol`.
    pub fn validate(&self, p: &ProblemSpec, tol: f64) -> Result<()> {
        let r = p.constraint_residual(&self.x_star, &self.y_star).norm();
        if r > tol {
            return Err(Error::invalid_config(
                "reference",
                format!("reference point infeasible: ‖Ax*+By*−b‖ = {r:.3e} > {tol:.3e}"),
            ));
        }
        Ok(())
    }
}
