//! Shared helpers for the integration and acceptance suites: independent
//! numeric oracles (least-squares fit, dense Gaussian elimination, power
//! iteration) and standard test-problem constructors.

// dense oracles read more naturally with explicit indices
#![allow(clippy::needless_range_loop)]
#![allow(dead_code)]

use std::sync::Arc;

use asadmm::linalg::{DenseVec, SparseMat};
use asadmm::models::{build_ggfl, synthetic_instance, GgflModel};
use asadmm::problem::ProblemSpec;
use asadmm::solver::{ScheduleConfig, SolverConfig, TimingMode};

/// Least-squares line fit returning `(slope, r_squared)`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert!(xs.len() == ys.len() && xs.len() >= 2);
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    (sxy / sxx, (sxy * sxy) / (sxx * syy))
}

/// Dense linear solve by Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let pv = a[col][col];
        assert!(pv != 0.0, "singular system");
        for r in 0..n {
            if r != col && a[r][col] != 0.0 {
                let f = a[r][col] / pv;
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    (0..n).map(|i| b[i] / a[i][i]).collect()
}

/// Power-iteration estimate of the largest eigenvalue of `MᵀM`, computed on
/// a dense copy so it is independent of the library's sparse kernels.
pub fn dense_gram_lambda_max(m: &SparseMat, iters: usize) -> f64 {
    let (rows, cols) = (m.rows(), m.cols());
    let mut dense = vec![vec![0.0f64; cols]; rows];
    for r in 0..rows {
        for (c, v) in m.row(r) {
            dense[r][c] = v;
        }
    }
    let mut v: Vec<f64> = (0..cols)
        .map(|i| ((i * 7 + 3) % 13) as f64 / 13.0 + 0.1)
        .collect();
    let mut lambda = 0.0;
    for _ in 0..iters {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut v {
            *x /= norm;
        }
        let mut mv = vec![0.0f64; rows];
        for r in 0..rows {
            mv[r] = (0..cols).map(|c| dense[r][c] * v[c]).sum();
        }
        let mut w = vec![0.0f64; cols];
        for r in 0..rows {
            for c in 0..cols {
                w[c] += dense[r][c] * mv[r];
            }
        }
        lambda = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        v = w;
    }
    lambda
}

/// The standard synthetic lasso instance: 500 logistic samples in 50
/// dimensions, identity penalty matrix, `mu = 1e-5`.
pub fn synthetic_lasso() -> ProblemSpec {
    let inst = synthetic_instance(7, 500, 50, 0.1).unwrap();
    build_ggfl(&GgflModel::identity(inst.dataset, 1e-5)).unwrap()
}

/// Reference solver profile with deterministic timing, power schedule with
/// the given inner-iteration floor.
pub fn paper_profile(p: &ProblemSpec, m_floor: usize, max_outer: usize) -> SolverConfig {
    let mut cfg = SolverConfig::paper_defaults(p).unwrap();
    cfg.schedule = ScheduleConfig::paper_power(p.lipschitz_nu(), m_floor);
    cfg.max_outer = max_outer;
    cfg.timing = TimingMode::Modeled {
        seconds_per_component: 1e-9,
    };
    cfg
}

/// Problem with quadratic components `f_j = 0.5 ‖x − c_j‖²` and quadratic
/// `g = 0.5 ‖y − y_c‖²` (both strongly convex with modulus one), coupled by
/// `A x − y = 0`.
pub fn strongly_convex_quadratic(
    centers: Vec<Vec<f64>>,
    y_center: Vec<f64>,
    a_mat: SparseMat,
) -> ProblemSpec {
    let n = centers.len();
    let cs: Vec<DenseVec> = centers.into_iter().map(DenseVec::from_vec).collect();
    let cs_val = cs.clone();
    let yc = DenseVec::from_vec(y_center);
    let yc_prox = yc.clone();
    let yc_val = yc.clone();
    let rows = a_mat.rows();
    ProblemSpec::new(
        n,
        Arc::new(move |j, x: &DenseVec| x - &cs[j]),
        Arc::new(move |x: &DenseVec| {
            cs_val.iter().map(|c| 0.5 * (x - c).norm_sq()).sum::<f64>() / cs_val.len() as f64
        }),
        Arc::new(move |y: &DenseVec| 0.5 * (y - &yc_val).norm_sq()),
        Arc::new(move |tau, q: &DenseVec| {
            DenseVec::lin_comb(1.0 / (1.0 + tau), &yc_prox, tau / (1.0 + tau), q)
        }),
        a_mat,
        SparseMat::neg_identity(rows),
        DenseVec::zeros(rows),
        None,
        1.0,
    )
    .unwrap()
}
