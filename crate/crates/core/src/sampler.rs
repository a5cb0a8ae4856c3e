//! Stochastic direction construction for the inner accelerated steps.
//!
//! Three flavors: a plain single-component gradient, an anchored correction
//! in the style of variance-reduced stochastic gradients, and an incremental
//! mini-batch whose size grows with the outer iteration. All three are
//! unbiased estimates of the full gradient at the query point.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseVec;
use crate::problem::ProblemSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMode {
    Plain,
    SvrgAnchor,
    Minibatch,
}

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub mode: SamplerMode,
    pub rng_seed: u64,
    /// `c` in the batch-size rule `m_k = min{ceil(c (1+k)^rho), N}`.
    pub batch_c: f64,
    /// Exponent `rho >= 1` of the batch-size rule.
    pub batch_rho: f64,
    /// The anchored correction is applied only when the current inner
    /// iteration count exceeds this threshold (the x-dimension in the
    /// reference experiments).
    pub anchor_threshold: usize,
}

impl SamplerConfig {
    pub fn plain(rng_seed: u64) -> Self {
        SamplerConfig {
            mode: SamplerMode::Plain,
            rng_seed,
            batch_c: 1.0,
            batch_rho: 1.0,
            anchor_threshold: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_c.is_nan() || self.batch_c <= 0.0 {
            return Err(Error::invalid_config(
                "batch_c",
                format!("must be > 0, got {}", self.batch_c),
            ));
        }
        if self.batch_rho.is_nan() || self.batch_rho < 1.0 {
            return Err(Error::invalid_config(
                "batch_rho",
                format!("must be >= 1, got {}", self.batch_rho),
            ));
        }
        Ok(())
    }
}

/// Anchor point with its full gradient and cached per-component gradients,
/// refreshed (never incrementally updated) so the stored full gradient is
/// always the exact mean of the cached components.
#[derive(Debug, Clone)]
pub struct AnchorState {
    point: DenseVec,
    full_grad: DenseVec,
    component_grads: Vec<DenseVec>,
    valid: bool,
}

impl AnchorState {
    fn empty() -> Self {
        AnchorState {
            point: DenseVec::zeros(0),
            full_grad: DenseVec::zeros(0),
            component_grads: Vec::new(),
            valid: false,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.valid
    }

    pub fn point(&self) -> &DenseVec {
        &self.point
    }

    pub fn full_grad(&self) -> &DenseVec {
        &self.full_grad
    }
}

/// One inner-step direction together with its sampling metadata.
#[derive(Debug, Clone)]
pub struct GradientDirection {
    pub d: DenseVec,
    /// Fresh component-gradient evaluations spent on this direction.
    pub components_used: u64,
    pub sample_indices: Vec<usize>,
    /// Whether the anchored correction was applied.
    pub corrected: bool,
}

/// `m_k = min{ceil(c (1+k)^rho), N}`, clamped to at least one sample.
pub fn batch_size(cfg: &SamplerConfig, k: usize, n_components: usize) -> usize {
    let raw = (cfg.batch_c * ((1 + k) as f64).powf(cfg.batch_rho)).ceil();
    let m = if raw.is_finite() && raw >= 1.0 {
        raw as usize
    } else if raw >= 1.0 {
        n_components
    } else {
        1
    };
    m.clamp(1, n_components)
}

/// Owns the RNG stream and the anchor; draws are strictly sequential so a
/// fixed seed reproduces the exact sample sequence.
pub struct Sampler {
    cfg: SamplerConfig,
    rng: ChaCha8Rng,
    anchor: AnchorState,
    refresh_count: u64,
}

impl Sampler {
    pub fn new(cfg: SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        Ok(Sampler {
            cfg,
            rng,
            anchor: AnchorState::empty(),
            refresh_count: 0,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    pub fn anchor(&self) -> &AnchorState {
        &self.anchor
    }

    pub fn refresh_count(&self) -> u64 {
        self.refresh_count
    }

    /// Whether this outer iteration should recompute the anchor before its
    /// inner loop runs. At most one refresh per outer iteration.
    pub fn wants_refresh(&self, m_k: usize) -> bool {
        match self.cfg.mode {
            SamplerMode::Plain => false,
            SamplerMode::SvrgAnchor => m_k > self.cfg.anchor_threshold,
            SamplerMode::Minibatch => true,
        }
    }

    /// Recomputes the anchor's full gradient at `point`, caching component
    /// gradients. Costs exactly `N` component evaluations.
    pub fn refresh_anchor(&mut self, p: &ProblemSpec, point: &DenseVec) {
        let n = p.n_components();
        let mut comps = Vec::with_capacity(n);
        let mut mean = DenseVec::zeros(point.len());
        for j in 0..n {
            let g = p.component_grad(j, point);
            mean.add_scaled(1.0, &g);
            comps.push(g);
        }
        mean.scale(1.0 / n as f64);
        self.anchor = AnchorState {
            point: point.clone(),
            full_grad: mean,
            component_grads: comps,
            valid: true,
        };
        self.refresh_count += 1;
    }

    /// Draws the direction `d_t` for inner step `t` of outer iteration `k`
    /// at the query point `x_hat`; `m_k` is the iteration's inner-step count
    /// used by the anchor-threshold rule.
    pub fn draw_direction(
        &mut self,
        p: &ProblemSpec,
        x_hat: &DenseVec,
        k: usize,
        _t: usize,
        m_k: usize,
    ) -> Result<GradientDirection> {
        let n = p.n_components();
        match self.cfg.mode {
            SamplerMode::Plain => Ok(self.plain_draw(p, x_hat, n)),
            SamplerMode::SvrgAnchor => {
                if m_k <= self.cfg.anchor_threshold {
                    return Ok(self.plain_draw(p, x_hat, n));
                }
                if !self.anchor.valid {
                    return Err(Error::invalid_config(
                        "sampler",
                        "anchored draw requested before any anchor refresh",
                    ));
                }
                let xi = self.rng.gen_range(0..n);
                let mut d = p.component_grad(xi, x_hat);
                d.add_scaled(1.0, &self.anchor.full_grad);
                d.add_scaled(-1.0, &self.anchor.component_grads[xi]);
                Ok(GradientDirection {
                    d,
                    components_used: 1,
                    sample_indices: vec![xi],
                    corrected: true,
                })
            }
            SamplerMode::Minibatch => {
                if !self.anchor.valid {
                    return Err(Error::invalid_config(
                        "sampler",
                        "mini-batch draw requested before any anchor refresh",
                    ));
                }
                let m = batch_size(&self.cfg, k, n);
                // uniform without replacement
                let picks = rand::seq::index::sample(&mut self.rng, n, m);
                let mut d = self.anchor.full_grad.clone();
                let inv_m = 1.0 / m as f64;
                let mut indices = Vec::with_capacity(m);
                for i in picks.iter() {
                    let g = p.component_grad(i, x_hat);
                    d.add_scaled(inv_m, &g);
                    d.add_scaled(-inv_m, &self.anchor.component_grads[i]);
                    indices.push(i);
                }
                Ok(GradientDirection {
                    d,
                    components_used: m as u64,
                    sample_indices: indices,
                    corrected: true,
                })
            }
        }
    }

    fn plain_draw(&mut self, p: &ProblemSpec, x_hat: &DenseVec, n: usize) -> GradientDirection {
        let xi = self.rng.gen_range(0..n);
        GradientDirection {
            d: p.component_grad(xi, x_hat),
            components_used: 1,
            sample_indices: vec![xi],
            corrected: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_ggfl, synthetic_instance, GgflModel};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn quadratic_problem(centers: Vec<Vec<f64>>) -> ProblemSpec {
        // f_j(x) = 0.5 ||x - c_j||^2
        let n1 = centers[0].len();
        let n = centers.len();
        let cs: Vec<DenseVec> = centers.into_iter().map(DenseVec::from_vec).collect();
        let cs_val = cs.clone();
        ProblemSpec::new(
            n,
            Arc::new(move |j, x| DenseVec::lin_comb(1.0, x, -1.0, &cs[j])),
            Arc::new(move |x| {
                cs_val.iter().map(|c| 0.5 * (x - c).norm_sq()).sum::<f64>() / cs_val.len() as f64
            }),
            Arc::new(|_| 0.0),
            Arc::new(|_tau, q| q.clone()),
            crate::linalg::SparseMat::identity(n1),
            crate::linalg::SparseMat::neg_identity(n1),
            DenseVec::zeros(n1),
            None,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn batch_size_examples() {
        let mut cfg = SamplerConfig::plain(0);
        cfg.batch_c = 1.0;
        cfg.batch_rho = 1.0;
        assert_eq!(batch_size(&cfg, 0, 100), 1);
        assert_eq!(batch_size(&cfg, 10_000, 100), 100); // saturates at N

        cfg.batch_c = 2.0;
        cfg.batch_rho = 1.5;
        assert_eq!(batch_size(&cfg, 3, 100), 16); // ceil(2 * 4^1.5)
        assert_eq!(batch_size(&cfg, 3, 10), 10); // capped at N
    }

    #[test]
    fn batch_size_is_nondecreasing() {
        let mut cfg = SamplerConfig::plain(0);
        cfg.batch_c = 0.3;
        cfg.batch_rho = 1.2;
        let mut prev = 0;
        for k in 0..500 {
            let m = batch_size(&cfg, k, 64);
            assert!(m >= prev && (1..=64).contains(&m));
            prev = m;
        }
    }

    #[test]
    fn single_component_all_modes_exact() {
        let p = quadratic_problem(vec![vec![1.0, -2.0]]);
        let x = DenseVec::from_vec(vec![0.5, 0.5]);
        let want = p.full_gradient(&x);
        for mode in [
            SamplerMode::Plain,
            SamplerMode::SvrgAnchor,
            SamplerMode::Minibatch,
        ] {
            let mut cfg = SamplerConfig::plain(7);
            cfg.mode = mode;
            let mut s = Sampler::new(cfg).unwrap();
            s.refresh_anchor(&p, &DenseVec::zeros(2));
            let dir = s.draw_direction(&p, &x, 0, 1, 10).unwrap();
            assert_abs_diff_eq!(dir.d[0], want[0], epsilon = 1e-15);
            assert_abs_diff_eq!(dir.d[1], want[1], epsilon = 1e-15);
        }
    }

    #[test]
    fn full_batch_cancels_anchor() {
        let p = quadratic_problem(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 2.0]]);
        let mut cfg = SamplerConfig::plain(3);
        cfg.mode = SamplerMode::Minibatch;
        cfg.batch_c = 100.0; // m_k = N immediately
        let mut s = Sampler::new(cfg).unwrap();
        s.refresh_anchor(&p, &DenseVec::from_vec(vec![3.0, -3.0]));
        let x = DenseVec::from_vec(vec![0.25, 0.75]);
        let dir = s.draw_direction(&p, &x, 0, 1, 5).unwrap();
        let want = p.full_gradient(&x);
        for i in 0..2 {
            assert_abs_diff_eq!(dir.d[i], want[i], epsilon = 1e-14);
        }
        assert_eq!(dir.components_used, 3);
    }

    #[test]
    fn monte_carlo_mean_matches_full_gradient() {
        // 5-component quadratic, plain sampling: the empirical mean of d over
        // many draws must sit within 4 standard errors of the exact gradient.
        let p = quadratic_problem(vec![
            vec![1.0, 0.0],
            vec![0.0, 2.0],
            vec![-1.0, 1.0],
            vec![0.5, -0.5],
            vec![2.0, 2.0],
        ]);
        let x = DenseVec::from_vec(vec![0.2, -0.4]);
        let exact = p.full_gradient(&x);
        let draws = 10_000;
        let mut cfg = SamplerConfig::plain(1234);
        cfg.mode = SamplerMode::Plain;
        let mut s = Sampler::new(cfg).unwrap();
        let mut sum = DenseVec::zeros(2);
        let mut sum_sq = DenseVec::zeros(2);
        for _ in 0..draws {
            let dir = s.draw_direction(&p, &x, 0, 1, 1).unwrap();
            for i in 0..2 {
                sum[i] += dir.d[i];
                sum_sq[i] += dir.d[i] * dir.d[i];
            }
        }
        for i in 0..2 {
            let mean = sum[i] / draws as f64;
            let var = (sum_sq[i] / draws as f64 - mean * mean).max(0.0);
            let se = (var / draws as f64).sqrt();
            assert!(
                (mean - exact[i]).abs() <= 4.0 * se + 1e-12,
                "coordinate {i}: mean {mean} vs exact {}",
                exact[i]
            );
        }
    }

    #[test]
    fn anchored_draw_is_exact_on_quadratics() {
        // gradient differences of quadratics are component-independent, so
        // the anchored direction reproduces the full gradient exactly
        let p = quadratic_problem(vec![
            vec![1.0, 0.0],
            vec![0.0, 2.0],
            vec![-1.0, 1.0],
            vec![0.5, -0.5],
            vec![2.0, 2.0],
        ]);
        let mut cfg = SamplerConfig::plain(5);
        cfg.mode = SamplerMode::SvrgAnchor;
        cfg.anchor_threshold = 0;
        let mut s = Sampler::new(cfg).unwrap();
        s.refresh_anchor(&p, &DenseVec::from_vec(vec![-1.0, 1.0]));
        let x = DenseVec::from_vec(vec![0.3, 0.9]);
        let want = p.full_gradient(&x);
        for t in 1..=20 {
            let dir = s.draw_direction(&p, &x, 0, t, 10).unwrap();
            assert_abs_diff_eq!(dir.d[0], want[0], epsilon = 1e-14);
            assert_abs_diff_eq!(dir.d[1], want[1], epsilon = 1e-14);
        }
    }

    #[test]
    fn threshold_disables_anchor() {
        let p = quadratic_problem(vec![vec![1.0], vec![-1.0]]);
        let mut cfg = SamplerConfig::plain(2);
        cfg.mode = SamplerMode::SvrgAnchor;
        cfg.anchor_threshold = 50;
        let mut s = Sampler::new(cfg).unwrap();
        assert!(!s.wants_refresh(10));
        assert!(s.wants_refresh(51));
        // below threshold: plain draw works without a valid anchor
        let dir = s.draw_direction(&p, &DenseVec::zeros(1), 0, 1, 10).unwrap();
        assert!(!dir.corrected);
        // above threshold without an anchor: error
        assert!(s.draw_direction(&p, &DenseVec::zeros(1), 0, 1, 60).is_err());
    }

    #[test]
    fn refresh_is_idempotent_and_matches_finite_differences() {
        let inst = synthetic_instance(31, 20, 4, 0.5).unwrap();
        let p = build_ggfl(&GgflModel::identity(inst.dataset, 1e-4)).unwrap();
        let mut cfg = SamplerConfig::plain(0);
        cfg.mode = SamplerMode::SvrgAnchor;
        let mut s = Sampler::new(cfg).unwrap();
        let point = DenseVec::from_vec(vec![0.1, -0.2, 0.3, 0.0]);
        s.refresh_anchor(&p, &point);
        let first = s.anchor().full_grad().clone();
        s.refresh_anchor(&p, &point);
        assert_eq!(s.anchor().full_grad(), &first);
        assert_eq!(s.refresh_count(), 2);

        // finite differences of the mean loss
        let h = 1e-6;
        for i in 0..4 {
            let mut xp = point.clone();
            let mut xm = point.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (p.f_value(&xp) - p.f_value(&xm)) / (2.0 * h);
            assert!(
                (first[i] - fd).abs() <= 1e-6 * (1.0 + fd.abs()),
                "coordinate {i}"
            );
        }
    }

    #[test]
    fn same_seed_same_sequence() {
        let p = quadratic_problem(vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![-1.0, 1.0]]);
        let x = DenseVec::from_vec(vec![0.1, 0.2]);
        let run = |seed: u64| -> Vec<Vec<usize>> {
            let mut cfg = SamplerConfig::plain(seed);
            cfg.mode = SamplerMode::Minibatch;
            cfg.batch_c = 1.0;
            let mut s = Sampler::new(cfg).unwrap();
            s.refresh_anchor(&p, &DenseVec::zeros(2));
            (0..30)
                .map(|k| s.draw_direction(&p, &x, k, 1, 5).unwrap().sample_indices)
                .collect()
        };
        assert_eq!(run(99), run(99));
        assert_ne!(run(99), run(100));
    }
}
