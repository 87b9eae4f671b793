//! Central finite-difference checks against [`Graph::backward`].

use crate::autodiff::{Graph, NodeId};
use crate::error::Result;
use crate::nn::Parameters;
use crate::tensor::Tensor;

/// Default perturbation for central differences.
pub const FD_STEP: f64 = 1e-5;

/// Floor on the denominator of the relative error, so exact zeros compare absolutely.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    /// Number of scalar entries compared.
    pub entries: usize,
    pub max_rel_error: f64,
    /// `(tensor, flat index)` of the worst entry.
    pub worst: (usize, usize),
}

/// `|a − n| / max(|a|, |n|, REL_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares the gradient of `loss` with respect to every entry of `params`
/// against central differences with step `h`.
///
/// `loss` receives a fresh graph and one leaf per tensor in `params` and must
/// return a scalar node; it is called once for the analytic pass and twice
/// per entry.
pub fn check<F>(params: &[Tensor], h: f64, mut loss: F) -> Result<GradCheck>
where
    F: FnMut(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    let mut eval = |values: &[Tensor]| -> Result<(Graph, Vec<NodeId>, NodeId)> {
        let mut g = Graph::new();
        let ids = values.iter().map(|t| g.param(t.clone())).collect::<Result<Vec<_>>>()?;
        let out = loss(&mut g, &ids)?;
        Ok((g, ids, out))
    };

    let (g, ids, out) = eval(params)?;
    let grads = g.backward(out)?;
    let analytic: Vec<Tensor> = ids.iter().map(|&id| grads.get_or_zero(id)).collect();

    let mut work = params.to_vec();
    let mut result = GradCheck {
        entries: 0,
        max_rel_error: 0.0,
        worst: (0, 0),
    };
    for t in 0..work.len() {
        for k in 0..work[t].len() {
            let orig = work[t].data()[k];
            work[t].data_mut()[k] = orig + h;
            let (gp, _, op) = eval(&work)?;
            let plus = gp.value(op).data()[0];
            work[t].data_mut()[k] = orig - h;
            let (gm, _, om) = eval(&work)?;
            let minus = gm.value(om).data()[0];
            work[t].data_mut()[k] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let err = relative_error(analytic[t].data()[k], numeric);
            result.entries += 1;
            if err > result.max_rel_error || err.is_nan() {
                result.max_rel_error = err;
                result.worst = (t, k);
            }
        }
    }
    Ok(result)
}

/// Like [`check`], but perturbs the parameters of `model` in place.
///
/// `loss` binds `model` into the graph and returns the loss together with the
/// parameter nodes, in the order of [`Parameters::parameters_mut`]. It must not
/// change any state besides the graph (bind spectral layers with `training = false`).
pub fn check_model<M, F>(model: &mut M, h: f64, mut loss: F) -> Result<GradCheck>
where
    M: Parameters,
    F: FnMut(&mut M, &mut Graph) -> Result<(NodeId, Vec<NodeId>)>,
{
    let mut g = Graph::new();
    let (out, ids) = loss(model, &mut g)?;
    let grads = g.backward(out)?;
    let analytic: Vec<Tensor> = ids.iter().map(|&id| grads.get_or_zero(id)).collect();

    let mut eval = |model: &mut M| -> Result<f64> {
        let mut g = Graph::new();
        let (out, _) = loss(model, &mut g)?;
        Ok(g.value(out).data()[0])
    };

    let sizes: Vec<usize> = model.parameters().iter().map(|t| t.len()).collect();
    let mut result = GradCheck {
        entries: 0,
        max_rel_error: 0.0,
        worst: (0, 0),
    };
    for (t, &size) in sizes.iter().enumerate() {
        for k in 0..size {
            let orig = model.parameters()[t].data()[k];
            model.parameters_mut()[t].data_mut()[k] = orig + h;
            let plus = eval(model)?;
            model.parameters_mut()[t].data_mut()[k] = orig - h;
            let minus = eval(model)?;
            model.parameters_mut()[t].data_mut()[k] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let err = relative_error(analytic[t].data()[k], numeric);
            result.entries += 1;
            if err > result.max_rel_error || err.is_nan() {
                result.max_rel_error = err;
                result.worst = (t, k);
            }
        }
    }
    Ok(result)
}
