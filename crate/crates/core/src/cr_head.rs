//! Cascading-rejection discriminator heads.
//!
//! A plain discriminator ends in one inner product `s = wᵀv`, which only
//! sees the component of `v` along `w`. The cascading head keeps going:
//!
//! ```text
//! s_i     = w_iᵀ v_i
//! v_{i+1} = v_i − (w_iᵀ v_i / w_iᵀ w_i) · w_i      (rejection of v_i from w_i)
//! ```
//!
//! producing `N` scores from one feature vector, each stage looking only at
//! what the earlier stages ignored. The conditional head replaces every
//! `w_i` with `w_i + w_{c,i}`, where `w_{c,i}` is a per-class embedding.
//!
//! Batches are feature-major (`C_L × B`), so a head maps `C_L × B` features
//! to an `N × B` score matrix, applying the cascade to each column.

use crate::autodiff::{Graph, NodeId};
use crate::error::{Error, Result};
use crate::nn::{glorot_uniform, random_unit, spectral_sigma, Parameters};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Head weights whose squared norm is at or below this are rejected.
pub const DEGENERATE_EPS: f64 = 1e-12;

/// Extra parameters of an `N`-stage head over a single inner product.
pub fn param_overhead(num_scores: usize, feature_dim: usize) -> usize {
    num_scores.saturating_sub(1) * feature_dim
}

/// Vector rejection of `v` from `w` on plain slices.
pub fn reject(v: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    if v.len() != w.len() {
        return Err(Error::dim("reject", crate::Shape(v.len(), 1), crate::Shape(w.len(), 1)));
    }
    let ww: f64 = w.iter().map(|x| x * x).sum();
    if ww <= DEGENERATE_EPS {
        return Err(Error::DegenerateWeight {
            stage: 0,
            norm_sq: ww,
            eps: DEGENERATE_EPS,
        });
    }
    let wv: f64 = w.iter().zip(v).map(|(a, b)| a * b).sum();
    let coef = wv / ww;
    Ok(v.iter().zip(w).map(|(vi, wi)| vi - coef * wi).collect())
}

/// Rejects every column of `v` (`C × B`) from the shared row `w` (`1 × C`),
/// reusing the already computed projections `proj = w·v` (`1 × B`).
fn reject_shared(g: &mut Graph, v: NodeId, w: NodeId, proj: NodeId, stage: usize) -> Result<NodeId> {
    let w_col = g.transpose(w)?;
    let ww = g.matmul(w, w_col)?;
    let norm_sq = g.value(ww).data()[0];
    if norm_sq.is_nan() || norm_sq <= DEGENERATE_EPS {
        return Err(Error::DegenerateWeight {
            stage,
            norm_sq,
            eps: DEGENERATE_EPS,
        });
    }
    let coef = g.div_scalar(proj, ww)?;
    let along = g.matmul(w_col, coef)?;
    g.sub(v, along)
}

/// Rejects column `j` of `v` from column `j` of `u` (both `C × B`).
fn reject_per_sample(g: &mut Graph, v: NodeId, u: NodeId, proj: NodeId, stage: usize) -> Result<NodeId> {
    let uu_terms = g.mul(u, u)?;
    let uu = g.col_sum(uu_terms)?;
    if let Some(&norm_sq) = g.value(uu).data().iter().find(|&&x| x.is_nan() || x <= DEGENERATE_EPS) {
        return Err(Error::DegenerateWeight {
            stage,
            norm_sq,
            eps: DEGENERATE_EPS,
        });
    }
    let coef = g.div(proj, uu)?;
    let along = g.mul_row(u, coef)?;
    g.sub(v, along)
}

/// Graph-level rejection of each column of `v` from the row vector `w`.
pub fn reject_node(g: &mut Graph, v: NodeId, w: NodeId) -> Result<NodeId> {
    let proj = g.matmul(w, v)?;
    reject_shared(g, v, w, proj, 0)
}

/// Unconditional cascading-rejection head: `N` weight rows of width `C_L`,
/// no bias. Each row is its own single-output layer for spectral normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct CRHead {
    /// `N × C_L`, row `i` is `w_{i+1}`.
    pub weights: Tensor,
    pub spectral_norm: bool,
    /// One power-iteration vector per row; each is `1 × 1`.
    pub sn_u: Vec<Tensor>,
}

/// A [`CRHead`] bound to a graph.
#[derive(Clone, Debug)]
pub struct CRBinding {
    pub weights: NodeId,
    pub rows: Vec<NodeId>,
}

impl CRHead {
    /// Independent Glorot rows (fan_in `C_L`, fan_out 1), each followed by its `sn_u` draw.
    pub fn new(num_scores: usize, feature_dim: usize, spectral_norm: bool, rng: &mut Rng) -> Result<Self> {
        if num_scores == 0 || feature_dim == 0 {
            return Err(Error::Contract(format!(
                "head needs N >= 1 and C_L >= 1, got N={num_scores}, C_L={feature_dim}"
            )));
        }
        let mut data = Vec::with_capacity(num_scores * feature_dim);
        let mut sn_u = Vec::with_capacity(num_scores);
        for _ in 0..num_scores {
            data.extend_from_slice(glorot_uniform(1, feature_dim, feature_dim, 1, rng).data());
            sn_u.push(random_unit(1, rng));
        }
        Ok(CRHead {
            weights: Tensor::from_vec(num_scores, feature_dim, data)?,
            spectral_norm,
            sn_u,
        })
    }

    pub fn from_weights(weights: Tensor, spectral_norm: bool) -> Result<Self> {
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(Error::Contract("head needs N >= 1 and C_L >= 1".into()));
        }
        let sn_u = vec![Tensor::scalar(1.0); weights.rows()];
        Ok(CRHead {
            weights,
            spectral_norm,
            sn_u,
        })
    }

    pub fn num_scores(&self) -> usize {
        self.weights.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.cols()
    }

    /// Per-row spectral estimates; with `advance` each row's `u` steps once.
    fn row_sigmas(&mut self, advance: bool) -> Vec<f64> {
        (0..self.num_scores())
            .map(|i| {
                let row = Tensor::row(self.weights.row_slice(i));
                spectral_sigma(&row, &mut self.sn_u[i], advance)
            })
            .collect()
    }

    /// The `w_i` actually used, after spectral normalization if enabled.
    pub fn effective_weights(&self) -> Tensor {
        if !self.spectral_norm {
            return self.weights.clone();
        }
        let mut copy = self.clone();
        let sigmas = copy.row_sigmas(false);
        let mut eff = self.weights.clone();
        for (i, s) in sigmas.iter().enumerate() {
            for x in eff.row_slice_mut(i) {
                *x /= s;
            }
        }
        eff
    }

    pub fn bind(&mut self, g: &mut Graph, training: bool) -> Result<CRBinding> {
        let weights = g.param(self.weights.clone())?;
        let effective = if self.spectral_norm {
            let sigmas = self.row_sigmas(training);
            if let Some(s) = sigmas.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
                return Err(Error::Numeric(format!("head spectral estimate {s}")));
            }
            g.div_rows(weights, sigmas)?
        } else {
            weights
        };
        let rows = (0..self.num_scores())
            .map(|i| g.slice_row(effective, i))
            .collect::<Result<_>>()?;
        Ok(CRBinding { weights, rows })
    }

    /// Scores for a `C_L × B` feature batch, returned as `N × B`.
    pub fn forward(&mut self, g: &mut Graph, features: NodeId, training: bool) -> Result<NodeId> {
        self.bind(g, training)?.forward(g, features)
    }

    /// Plain evaluation without spectral updates: returns `N × B` scores.
    pub fn scores(&self, features: &Tensor) -> Result<Tensor> {
        let mut head = self.clone();
        let mut g = Graph::new();
        let v = g.input(features.clone())?;
        let s = head.forward(&mut g, v, false)?;
        Ok(g.value(s).clone())
    }
}

impl CRBinding {
    pub fn forward(&self, g: &mut Graph, features: NodeId) -> Result<NodeId> {
        let c = g.shape(features).0;
        let dim = g.shape(self.weights).1;
        if c != dim {
            return Err(Error::dim("cr_forward", g.shape(features), g.shape(self.weights)));
        }
        let mut v = features;
        let mut scores = Vec::with_capacity(self.rows.len());
        for (i, &w) in self.rows.iter().enumerate() {
            let s = g.matmul(w, v)?;
            scores.push(s);
            if i + 1 < self.rows.len() {
                v = reject_shared(g, v, w, s, i)?;
            }
        }
        g.concat_rows(&scores)
    }

    pub fn params(&self) -> Vec<NodeId> {
        vec![self.weights]
    }
}

impl Parameters for CRHead {
    fn parameters(&self) -> Vec<&Tensor> {
        vec![&self.weights]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weights]
    }

    fn parameter_names(&self) -> Vec<String> {
        vec!["cr.weights".into()]
    }
}

/// Conditional head: stage `i` uses `w_i + w_{c,i}` for a sample of class `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct CCRHead {
    pub base: CRHead,
    /// One `num_classes × C_L` table per stage; row `c` of table `i` is `w_{c,i}`.
    pub class_embeddings: Vec<Tensor>,
}

#[derive(Clone, Debug)]
pub struct CCRBinding {
    pub base: CRBinding,
    pub tables: Vec<NodeId>,
}

impl CCRHead {
    /// Base rows as in [`CRHead::new`], then Glorot class tables stage by stage.
    pub fn new(
        num_scores: usize,
        feature_dim: usize,
        num_classes: usize,
        spectral_norm: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::Contract("conditional head needs at least one class".into()));
        }
        let base = CRHead::new(num_scores, feature_dim, spectral_norm, rng)?;
        let class_embeddings = (0..num_scores)
            .map(|_| glorot_uniform(num_classes, feature_dim, num_classes, feature_dim, rng))
            .collect();
        Ok(CCRHead { base, class_embeddings })
    }

    pub fn from_parts(base: CRHead, class_embeddings: Vec<Tensor>) -> Result<Self> {
        if class_embeddings.len() != base.num_scores() {
            return Err(Error::Contract(format!(
                "{} stages need {} class tables, got {}",
                base.num_scores(),
                base.num_scores(),
                class_embeddings.len()
            )));
        }
        let classes = class_embeddings.first().map_or(0, Tensor::rows);
        for t in &class_embeddings {
            if t.cols() != base.feature_dim() || t.rows() != classes || classes == 0 {
                return Err(Error::dim("ccr tables", base.weights.shape(), t.shape()));
            }
        }
        Ok(CCRHead { base, class_embeddings })
    }

    pub fn num_scores(&self) -> usize {
        self.base.num_scores()
    }

    pub fn num_classes(&self) -> usize {
        self.class_embeddings[0].rows()
    }

    pub fn bind(&mut self, g: &mut Graph, training: bool) -> Result<CCRBinding> {
        let base = self.base.bind(g, training)?;
        let tables = self
            .class_embeddings
            .iter()
            .map(|t| g.param(t.clone()))
            .collect::<Result<_>>()?;
        Ok(CCRBinding { base, tables })
    }

    pub fn forward(&mut self, g: &mut Graph, features: NodeId, labels: &[usize], training: bool) -> Result<NodeId> {
        self.bind(g, training)?.forward(g, features, labels)
    }

    pub fn scores(&self, features: &Tensor, labels: &[usize]) -> Result<Tensor> {
        let mut head = self.clone();
        let mut g = Graph::new();
        let v = g.input(features.clone())?;
        let s = head.forward(&mut g, v, labels, false)?;
        Ok(g.value(s).clone())
    }
}

impl CCRBinding {
    pub fn forward(&self, g: &mut Graph, features: NodeId, labels: &[usize]) -> Result<NodeId> {
        let (c, b) = (g.shape(features).0, g.shape(features).1);
        let dim = g.shape(self.base.weights).1;
        if c != dim {
            return Err(Error::dim("ccr_forward", g.shape(features), g.shape(self.base.weights)));
        }
        if labels.len() != b {
            return Err(Error::Contract(format!("{} labels for a batch of {b}", labels.len())));
        }
        let n = self.base.rows.len();
        let mut v = features;
        let mut scores = Vec::with_capacity(n);
        for (i, (&w, &table)) in self.base.rows.iter().zip(&self.tables).enumerate() {
            let class_part = g.gather(table, labels)?;
            let w_col = g.transpose(w)?;
            let u = g.add_column(class_part, w_col)?;
            let terms = g.mul(u, v)?;
            let s = g.col_sum(terms)?;
            scores.push(s);
            if i + 1 < n {
                v = reject_per_sample(g, v, u, s, i)?;
            }
        }
        g.concat_rows(&scores)
    }

    pub fn params(&self) -> Vec<NodeId> {
        std::iter::once(self.base.weights)
            .chain(self.tables.iter().copied())
            .collect()
    }
}

impl Parameters for CCRHead {
    fn parameters(&self) -> Vec<&Tensor> {
        std::iter::once(&self.base.weights)
            .chain(self.class_embeddings.iter())
            .collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        std::iter::once(&mut self.base.weights)
            .chain(self.class_embeddings.iter_mut())
            .collect()
    }

    fn parameter_names(&self) -> Vec<String> {
        std::iter::once("ccr.weights".to_string())
            .chain((0..self.class_embeddings.len()).map(|i| format!("ccr.class_table{i}")))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn head(rows: &[&[f64]]) -> CRHead {
        CRHead::from_weights(Tensor::from_rows(rows), false).unwrap()
    }

    #[test]
    fn axis_aligned_rejection() {
        assert_eq!(reject(&[1.0, 1.0], &[1.0, 0.0]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn parallel_vector_rejects_to_zero() {
        let w = [0.3, -1.2, 2.5];
        for alpha in [-3.0, 0.0, 0.5, 7.0] {
            let v: Vec<f64> = w.iter().map(|x| alpha * x).collect();
            let r = reject(&v, &w).unwrap();
            assert!(r.iter().all(|x| x.abs() < 1e-12), "{r:?}");
        }
    }

    #[test]
    fn hand_computed_rejection() {
        // v − (3/3)·w
        assert_eq!(
            reject(&[2.0, 1.0, 0.0], &[1.0, 1.0, 1.0]).unwrap(),
            vec![1.0, 0.0, -1.0]
        );
    }

    #[test]
    fn zero_weight_is_degenerate() {
        assert!(matches!(
            reject(&[1.0, 2.0], &[0.0, 0.0]),
            Err(Error::DegenerateWeight { .. })
        ));
        let mut h = head(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let mut g = Graph::new();
        let v = g.input(Tensor::column(&[1.0, 1.0])).unwrap();
        assert!(matches!(
            h.forward(&mut g, v, false),
            Err(Error::DegenerateWeight { stage: 0, .. })
        ));
    }

    #[test]
    fn single_stage_is_inner_product() {
        let h = head(&[&[1.0, 2.0]]);
        let s = h.scores(&Tensor::column(&[3.0, 4.0])).unwrap();
        assert_eq!(s.data(), &[11.0]);
    }

    #[test]
    fn two_stage_hand_case() {
        let h = head(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let s = h.scores(&Tensor::column(&[3.0, 4.0])).unwrap();
        assert_eq!(s.data(), &[3.0, 4.0]);
    }

    #[test]
    fn repeated_weight_gives_zero_second_score() {
        let h = head(&[&[0.7, -1.3, 2.0], &[0.7, -1.3, 2.0]]);
        let v = Tensor::from_rows(&[&[1.0, -4.0], &[2.5, 0.5], &[-3.0, 9.0]]);
        let s = h.scores(&v).unwrap();
        assert_eq!(s.rows(), 2);
        assert!(s.row_slice(1).iter().all(|x| x.abs() < 1e-12), "{s:?}");
    }

    #[test]
    fn wrong_feature_width_is_dimension_error() {
        let h = head(&[&[1.0, 2.0]]);
        assert!(matches!(
            h.scores(&Tensor::column(&[1.0, 2.0, 3.0])),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn overhead_formula() {
        assert_eq!(param_overhead(1, 5), 0);
        assert_eq!(param_overhead(8, 128), 896);
        let mut rng = Rng::new(0, Stream::Test);
        let one = CRHead::new(1, 16, true, &mut rng).unwrap().param_count();
        for n in [1, 2, 4, 8, 16] {
            let h = CRHead::new(n, 16, true, &mut rng).unwrap();
            assert_eq!(h.param_count() - one, param_overhead(n, 16));
        }
    }

    #[test]
    fn conditional_single_stage_is_projection_score() {
        let base = head(&[&[1.0, 0.0]]);
        let cc = CCRHead::from_parts(base, vec![Tensor::row(&[0.0, 1.0])]).unwrap();
        let s = cc.scores(&Tensor::column(&[2.0, 3.0]), &[0]).unwrap();
        assert_eq!(s.data(), &[5.0]);
    }

    #[test]
    fn conditional_two_stage_matches_straight_line_evaluation() {
        let w1 = [1.0, 2.0, -1.0];
        let w2 = [0.5, -1.0, 3.0];
        let e1 = [[0.2, 0.0, 1.0], [-1.0, 0.5, 0.5]];
        let e2 = [[1.0, 1.0, 0.0], [0.0, -2.0, 1.0]];
        let v = [1.5, -0.5, 2.0];
        let base = head(&[&w1, &w2]);
        let tables = vec![
            Tensor::from_rows(&[&e1[0], &e1[1]]),
            Tensor::from_rows(&[&e2[0], &e2[1]]),
        ];
        let cc = CCRHead::from_parts(base, tables).unwrap();
        let feats = Tensor::from_rows(&[&[v[0], v[0]], &[v[1], v[1]], &[v[2], v[2]]]);
        let got = cc.scores(&feats, &[0, 1]).unwrap();
        for c in 0..2 {
            let u1: Vec<f64> = (0..3).map(|k| w1[k] + e1[c][k]).collect();
            let u2: Vec<f64> = (0..3).map(|k| w2[k] + e2[c][k]).collect();
            let s1: f64 = (0..3).map(|k| u1[k] * v[k]).sum();
            let uu: f64 = u1.iter().map(|x| x * x).sum();
            let v2: Vec<f64> = (0..3).map(|k| v[k] - s1 / uu * u1[k]).collect();
            let s2: f64 = (0..3).map(|k| u2[k] * v2[k]).sum();
            assert!((got.get(0, c) - s1).abs() < 1e-12);
            assert!((got.get(1, c) - s2).abs() < 1e-12);
        }
    }

    #[test]
    fn bad_label_is_domain_error() {
        let base = head(&[&[1.0, 0.0]]);
        let cc = CCRHead::from_parts(base, vec![Tensor::row(&[0.0, 1.0])]).unwrap();
        assert!(matches!(
            cc.scores(&Tensor::column(&[2.0, 3.0]), &[1]),
            Err(Error::Domain(_))
        ));
    }
}
