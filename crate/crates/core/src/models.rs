//! Experimental model family: logistic component losses, the l1 regularizer
//! with its soft-shrinkage prox, and graph-guided fused lasso assembly where
//! the penalty acts on `Ax` with `A = I` or `A = [G; I]`.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{DenseVec, SparseMat};
use crate::problem::ProblemSpec;

/// Labeled binary-classification dataset; rows of `features` are the sample
/// vectors and labels are ±1.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: SparseMat,
    labels: Vec<f64>,
}

impl Dataset {
    pub fn new(features: SparseMat, labels: Vec<f64>) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::DimensionMismatch {
                context: "dataset labels",
                expected: features.rows(),
                got: labels.len(),
            });
        }
        if labels.is_empty() {
            return Err(Error::invalid_config(
                "dataset",
                "needs at least one sample",
            ));
        }
        if let Some(bad) = labels.iter().find(|l| **l != 1.0 && **l != -1.0) {
            return Err(Error::invalid_config(
                "labels",
                format!("labels must be ±1, got {bad}"),
            ));
        }
        Ok(Dataset { features, labels })
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &SparseMat {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// `max_j ‖a_j‖² / 4`, the standard smoothness bound for the logistic
    /// component losses under the Euclidean metric.
    pub fn logistic_lipschitz(&self) -> f64 {
        let max_sq = (0..self.n_samples())
            .map(|j| self.features.row_norm_sq(j))
            .fold(0.0f64, f64::max);
        (max_sq / 4.0).max(f64::MIN_POSITIVE)
    }
}

/// Numerically safe `log(1 + exp(z))`.
pub fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Numerically safe logistic sigmoid `1 / (1 + exp(−z))`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Loss of sample `j` at `x`: `log(1 + exp(−b_j aᵀ_j x))`.
pub fn logistic_component_value(ds: &Dataset, j: usize, x: &DenseVec) -> f64 {
    let margin: f64 = ds.features.row(j).map(|(c, v)| v * x[c]).sum();
    log1p_exp(-ds.labels[j] * margin)
}

/// Gradient of sample `j`'s loss at `x`: `−b_j σ(−b_j aᵀ_j x) a_j`.
pub fn logistic_component_grad(ds: &Dataset, j: usize, x: &DenseVec) -> DenseVec {
    let margin: f64 = ds.features.row(j).map(|(c, v)| v * x[c]).sum();
    let b = ds.labels[j];
    let coeff = -b * sigmoid(-b * margin);
    let mut g = DenseVec::zeros(x.len());
    for (c, v) in ds.features.row(j) {
        g[c] = coeff * v;
    }
    g
}

/// Mean logistic loss over the dataset.
pub fn logistic_mean_value(ds: &Dataset, x: &DenseVec) -> f64 {
    let margins = ds.features.mul_vec(x);
    let n = ds.n_samples() as f64;
    ds.labels
        .iter()
        .zip(margins.iter())
        .map(|(b, m)| log1p_exp(-b * m))
        .sum::<f64>()
        / n
}

/// Componentwise `sign(v_i) · max(|v_i| − kappa, 0)`, the prox of `kappa‖·‖₁`.
pub fn soft_shrink(kappa: f64, v: &DenseVec) -> DenseVec {
    debug_assert!(kappa >= 0.0);
    DenseVec::from_vec(
        v.iter()
            .map(|&x| x.signum() * (x.abs() - kappa).max(0.0))
            .collect(),
    )
}

/// Which constraint matrix the fused-lasso model stacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AKind {
    Identity,
    StackedGraph,
}

/// Graph-guided fused lasso: mean logistic loss plus `mu ‖Ax‖₁`, split as
/// `min f(x) + mu‖y‖₁  s.t.  Ax − y = 0`.
#[derive(Debug, Clone)]
pub struct GgflModel {
    pub dataset: Dataset,
    pub mu: f64,
    pub a_kind: AKind,
    pub graph: Option<SparseMat>,
}

impl GgflModel {
    pub fn identity(dataset: Dataset, mu: f64) -> Self {
        GgflModel {
            dataset,
            mu,
            a_kind: AKind::Identity,
            graph: None,
        }
    }

    pub fn stacked(dataset: Dataset, mu: f64, graph: SparseMat) -> Self {
        GgflModel {
            dataset,
            mu,
            a_kind: AKind::StackedGraph,
            graph: Some(graph),
        }
    }
}

/// Assemble the split fused-lasso problem: `B = −I`, `b = 0`, `A` per the
/// model kind, prox of `mu‖·‖₁`, and `nu = max_j ‖a_j‖²/4`.
pub fn build_ggfl(model: &GgflModel) -> Result<ProblemSpec> {
    if !(model.mu.is_finite() && model.mu > 0.0) {
        return Err(Error::invalid_config(
            "mu",
            format!("must be > 0, got {}", model.mu),
        ));
    }
    let l = model.dataset.n_features();
    let a_mat = match model.a_kind {
        AKind::Identity => SparseMat::identity(l),
        AKind::StackedGraph => {
            let g = model.graph.as_ref().ok_or_else(|| {
                Error::invalid_config("graph", "stacked_graph requested but no G supplied")
            })?;
            if g.cols() != l {
                return Err(Error::DimensionMismatch {
                    context: "graph columns",
                    expected: l,
                    got: g.cols(),
                });
            }
            SparseMat::vstack(g, &SparseMat::identity(l))?
        }
    };
    let n_rows = a_mat.rows();
    let ds_grad = model.dataset.clone();
    let ds_val = model.dataset.clone();
    let mu = model.mu;
    let nu = model.dataset.logistic_lipschitz();
    ProblemSpec::new(
        model.dataset.n_samples(),
        Arc::new(move |j, x| logistic_component_grad(&ds_grad, j, x)),
        Arc::new(move |x| logistic_mean_value(&ds_val, x)),
        Arc::new(move |y: &DenseVec| mu * y.iter().map(|v| v.abs()).sum::<f64>()),
        Arc::new(move |tau, q| soft_shrink(mu / tau, q)),
        a_mat,
        SparseMat::neg_identity(n_rows),
        DenseVec::zeros(n_rows),
        None,
        nu,
    )
}

/// Builds a sparse difference matrix from thresholded sample correlations:
/// one row per feature pair `(i, j)`, `i < j`, with `|corr| > threshold`,
/// carrying `+1` at `i` and `−1` at `j`. Constant features are excluded.
pub fn build_graph_g(ds: &Dataset, corr_threshold: f64) -> Result<SparseMat> {
    if !(corr_threshold > 0.0 && corr_threshold < 1.0) {
        return Err(Error::invalid_config(
            "corr_threshold",
            format!("must lie in (0, 1), got {corr_threshold}"),
        ));
    }
    let l = ds.n_features();
    let n = ds.n_samples() as f64;
    let mut sums = vec![0.0f64; l];
    let mut cross = vec![0.0f64; l * l];
    for r in 0..ds.n_samples() {
        let row: Vec<(usize, f64)> = ds.features.row(r).collect();
        for &(i, vi) in &row {
            sums[i] += vi;
            for &(j, vj) in &row {
                if j >= i {
                    cross[i * l + j] += vi * vj;
                }
            }
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / n).collect();
    let vars: Vec<f64> = (0..l)
        .map(|i| cross[i * l + i] / n - means[i] * means[i])
        .collect();

    let mut triplets = Vec::new();
    let mut rows = 0usize;
    for i in 0..l {
        if vars[i] <= 0.0 {
            continue; // constant feature
        }
        for j in (i + 1)..l {
            if vars[j] <= 0.0 {
                continue;
            }
            let cov = cross[i * l + j] / n - means[i] * means[j];
            let corr = cov / (vars[i] * vars[j]).sqrt();
            if corr.abs() > corr_threshold {
                triplets.push((rows, i, 1.0));
                triplets.push((rows, j, -1.0));
                rows += 1;
            }
        }
    }
    SparseMat::from_triplets(rows, l, &triplets)
}

/// A reproducible synthetic dataset with a planted sparse weight vector.
#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub dataset: Dataset,
    pub planted_weights: DenseVec,
}

/// Generates `n_samples` feature vectors with mild block correlation
/// (features within a block of five share a latent factor), plants a sparse
/// weight vector touching `round(sparsity * n_features)` coordinates, and
/// draws labels from the logistic model. `sparsity = 0` gives a zero weight
/// vector and fair-coin labels.
pub fn synthetic_instance(
    seed: u64,
    n_samples: usize,
    n_features: usize,
    sparsity: f64,
) -> Result<SyntheticInstance> {
    if n_samples == 0 || n_features == 0 {
        return Err(Error::invalid_config(
            "synthetic_instance",
            "n_samples and n_features must be at least 1",
        ));
    }
    if !(0.0..=1.0).contains(&sparsity) {
        return Err(Error::invalid_config(
            "sparsity",
            format!("must lie in [0, 1], got {sparsity}"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block = 5usize;
    let n_blocks = n_features.div_ceil(block);
    let shared = 0.5f64.sqrt();

    let mut triplets = Vec::with_capacity(n_samples * n_features);
    let mut rows_dense = vec![vec![0.0f64; n_features]; n_samples];
    for (r, row) in rows_dense.iter_mut().enumerate() {
        let factors: Vec<f64> = (0..n_blocks).map(|_| gaussian(&mut rng)).collect();
        for (c, slot) in row.iter_mut().enumerate() {
            let v = shared * factors[c / block] + shared * gaussian(&mut rng);
            *slot = v;
            triplets.push((r, c, v));
        }
    }

    let support = (sparsity * n_features as f64).round() as usize;
    let mut planted = DenseVec::zeros(n_features);
    if support > 0 {
        let idx = rand::seq::index::sample(&mut rng, n_features, support.min(n_features));
        for i in idx.iter() {
            planted[i] = gaussian(&mut rng);
        }
        let norm = planted.norm();
        if norm > 0.0 {
            planted.scale(2.0 / norm);
        }
    }

    let labels: Vec<f64> = rows_dense
        .iter()
        .map(|row| {
            let logit: f64 = row.iter().zip(planted.iter()).map(|(a, w)| a * w).sum();
            if rng.gen_bool(sigmoid(logit)) {
                1.0
            } else {
                -1.0
            }
        })
        .collect();

    let features = SparseMat::from_triplets(n_samples, n_features, &triplets)?;
    Ok(SyntheticInstance {
        dataset: Dataset::new(features, labels)?,
        planted_weights: planted,
    })
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; one sample per call keeps the draw sequence simple
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
