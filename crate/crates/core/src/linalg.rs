//! Dense vectors, compressed-row sparse matrices, and diagonal metrics.
//!
//! These are the only linear-algebra primitives the solver needs: the inner
//! accelerated steps solve diagonal systems in closed form, and the constraint
//! matrices are applied as sparse matrix-vector products. All types are
//! immutable after construction and safe to share across workers.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense column vector of `f64` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DenseVec(Vec<f64>);

impl DenseVec {
    pub fn zeros(n: usize) -> Self {
        DenseVec(vec![0.0; n])
    }

    pub fn from_vec(entries: Vec<f64>) -> Self {
        DenseVec(entries)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn dot(&self, other: &DenseVec) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.0 {
            *v *= a;
        }
    }

    pub fn scaled(&self, a: f64) -> DenseVec {
        DenseVec(self.0.iter().map(|v| v * a).collect())
    }

    /// `self += a * x`
    pub fn add_scaled(&mut self, a: f64, x: &DenseVec) {
        debug_assert_eq!(self.len(), x.len());
        for (s, v) in self.0.iter_mut().zip(&x.0) {
            *s += a * v;
        }
    }

    /// `a * x + b * y`
    pub fn lin_comb(a: f64, x: &DenseVec, b: f64, y: &DenseVec) -> DenseVec {
        debug_assert_eq!(x.len(), y.len());
        DenseVec(
            x.0.iter()
                .zip(&y.0)
                .map(|(xv, yv)| a * xv + b * yv)
                .collect(),
        )
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<usize> for DenseVec {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for DenseVec {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl std::ops::Add<&DenseVec> for &DenseVec {
    type Output = DenseVec;
    fn add(self, rhs: &DenseVec) -> DenseVec {
        DenseVec::lin_comb(1.0, self, 1.0, rhs)
    }
}

impl std::ops::Sub<&DenseVec> for &DenseVec {
    type Output = DenseVec;
    fn sub(self, rhs: &DenseVec) -> DenseVec {
        DenseVec::lin_comb(1.0, self, -1.0, rhs)
    }
}

impl From<Vec<f64>> for DenseVec {
    fn from(v: Vec<f64>) -> Self {
        DenseVec(v)
    }
}

/// Sparse matrix in compressed-row layout.
///
/// Column indices are strictly increasing within each row; duplicate entries
/// passed to [`SparseMat::from_triplets`] are summed at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMat {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMat {
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            if r >= rows {
                return Err(Error::DimensionMismatch {
                    context: "sparse row index",
                    expected: rows,
                    got: r,
                });
            }
            if c >= cols {
                return Err(Error::DimensionMismatch {
                    context: "sparse column index",
                    expected: cols,
                    got: c,
                });
            }
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("sparse entry ({r}, {c})")));
            }
            entries.push((r, c, v));
        }
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));

        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut prev: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if prev == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                prev = Some((r, c));
            }
            row_ptr[r + 1] = col_idx.len();
        }
        // rows with no entries inherit the running offset
        for r in 0..rows {
            row_ptr[r + 1] = row_ptr[r + 1].max(row_ptr[r]);
        }
        Ok(SparseMat {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        SparseMat {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn neg_identity(n: usize) -> Self {
        SparseMat {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![-1.0; n],
        }
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        SparseMat {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols
            && self.nnz() == self.rows
            && self.col_idx.iter().enumerate().all(|(i, &c)| c == i)
            && self.values.iter().all(|&v| v == 1.0)
    }

    pub fn is_neg_identity(&self) -> bool {
        self.rows == self.cols
            && self.nnz() == self.rows
            && self.col_idx.iter().enumerate().all(|(i, &c)| c == i)
            && self.values.iter().all(|&v| v == -1.0)
    }

    /// Entries of row `i` as `(column, value)` pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    pub fn row_norm_sq(&self, i: usize) -> f64 {
        self.row(i).map(|(_, v)| v * v).sum()
    }

    /// `M v`
    pub fn mul_vec(&self, v: &DenseVec) -> DenseVec {
        debug_assert_eq!(v.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for (r, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * v[self.col_idx[k]];
            }
            *slot = acc;
        }
        DenseVec(out)
    }

    /// `Mᵀ v`
    pub fn mul_vec_t(&self, v: &DenseVec) -> DenseVec {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let vr = v[r];
            if vr == 0.0 {
                continue;
            }
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out[self.col_idx[k]] += self.values[k] * vr;
            }
        }
        DenseVec(out)
    }

    /// Stack `top` above `bottom`; column counts must agree.
    pub fn vstack(top: &SparseMat, bottom: &SparseMat) -> Result<SparseMat> {
        if top.cols != bottom.cols {
            return Err(Error::DimensionMismatch {
                context: "vstack column count",
                expected: top.cols,
                got: bottom.cols,
            });
        }
        let mut row_ptr = Vec::with_capacity(top.rows + bottom.rows + 1);
        row_ptr.extend_from_slice(&top.row_ptr);
        let off = top.nnz();
        row_ptr.extend(bottom.row_ptr[1..].iter().map(|p| p + off));
        let mut col_idx = top.col_idx.clone();
        col_idx.extend_from_slice(&bottom.col_idx);
        let mut values = top.values.clone();
        values.extend_from_slice(&bottom.values);
        Ok(SparseMat {
            rows: top.rows + bottom.rows,
            cols: top.cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Power-iteration estimate of the largest eigenvalue of `MᵀM`
    /// (an underestimate that converges from below).
    pub fn gram_spectral_norm_est(&self, iters: usize, seed: u64) -> f64 {
        if self.cols == 0 || self.nnz() == 0 {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = DenseVec::from_vec((0..self.cols).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let mut lambda = 0.0;
        for _ in 0..iters {
            let nv = v.norm();
            if nv == 0.0 {
                return 0.0;
            }
            v.scale(1.0 / nv);
            let w = self.mul_vec_t(&self.mul_vec(&v));
            lambda = v.dot(&w);
            v = w;
        }
        lambda.max(0.0)
    }
}

/// Positive diagonal metric; `‖v‖_M² = Σ m_i v_i²` is a norm because every
/// diagonal entry is strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DiagMetric(Vec<f64>);

impl DiagMetric {
    pub fn new(diagonal: Vec<f64>) -> Result<Self> {
        if let Some(bad) = diagonal.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::invalid_config(
                "diag_metric",
                format!("diagonal entries must be finite and > 0, got {bad}"),
            ));
        }
        Ok(DiagMetric(diagonal))
    }

    /// `sigma * I` on `n` coordinates.
    pub fn uniform(sigma: f64, n: usize) -> Result<Self> {
        DiagMetric::new(vec![sigma; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.0
    }

    /// `M v`
    pub fn apply(&self, v: &DenseVec) -> DenseVec {
        debug_assert_eq!(v.len(), self.len());
        DenseVec(self.0.iter().zip(v.iter()).map(|(m, x)| m * x).collect())
    }

    /// `‖v‖_{M⁻¹}²`
    pub fn inv_norm_sq(&self, v: &DenseVec) -> Result<f64> {
        if v.len() != self.len() {
            return Err(Error::DimensionMismatch {
                context: "inv_norm_sq",
                expected: self.len(),
                got: v.len(),
            });
        }
        Ok(self.0.iter().zip(v.iter()).map(|(m, x)| x * x / m).sum())
    }
}

/// `‖v‖_M² = Σ m_i v_i²` for a positive diagonal metric.
pub fn weighted_norm_sq(v: &DenseVec, m: &DiagMetric) -> Result<f64> {
    if v.len() != m.len() {
        return Err(Error::DimensionMismatch {
            context: "weighted_norm_sq",
            expected: m.len(),
            got: v.len(),
        });
    }
    Ok(m.diagonal()
        .iter()
        .zip(v.iter())
        .map(|(mi, vi)| mi * vi * vi)
        .sum())
}

/// Solve `(A + B) x = rhs` componentwise for diagonal `A`, `B`.
pub fn diag_metric_solve(a: &DiagMetric, b: &DiagMetric, rhs: &DenseVec) -> Result<DenseVec> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "diag_metric_solve metrics",
            expected: a.len(),
            got: b.len(),
        });
    }
    if rhs.len() != a.len() {
        return Err(Error::DimensionMismatch {
            context: "diag_metric_solve rhs",
            expected: a.len(),
            got: rhs.len(),
        });
    }
    Ok(DenseVec::from_vec(
        a.diagonal()
            .iter()
            .zip(b.diagonal())
            .zip(rhs.iter())
            .map(|((ai, bi), r)| r / (ai + bi))
            .collect(),
    ))
}

/// Sparse matrix-vector product `M v` or `Mᵀ v` with dimension checking.
pub fn spmv(m: &SparseMat, v: &DenseVec, transpose: bool) -> Result<DenseVec> {
    let expected = if transpose { m.rows() } else { m.cols() };
    if v.len() != expected {
        return Err(Error::DimensionMismatch {
            context: "spmv",
            expected,
            got: v.len(),
        });
    }
    Ok(if transpose {
        m.mul_vec_t(v)
    } else {
        m.mul_vec(v)
    })
}
