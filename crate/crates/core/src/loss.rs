//! Adversarial losses over `N × B` score matrices.
//!
//! Every form averages over the `N` scores and over the batch, so each loss
//! is a plain mean over all entries of the score matrix. With `N = 1` they
//! reduce to the usual single-score GAN losses.

use std::fmt;
use std::str::FromStr;

use crate::autodiff::{Graph, NodeId};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LossForm {
    /// `D: E[1/N Σ max(0, 1 − s_x)] + E[1/N Σ max(0, 1 + s_z)]`, `G: −E[1/N Σ s_z]`.
    #[default]
    Hinge,
    /// Literal log form: `D: −E[1/N Σ log σ(s_x)] − E[1/N Σ (1 − log σ(s_z))]`,
    /// `G: E[1/N Σ (1 − log σ(s_z))]`.
    LogPaper,
    /// Classical log form: `D: −E[1/N Σ log σ(s_x)] − E[1/N Σ log(1 − σ(s_z))]`,
    /// non-saturating `G: −E[1/N Σ log σ(s_z)]`.
    LogStandard,
}

impl LossForm {
    pub const ALL: [LossForm; 3] = [LossForm::Hinge, LossForm::LogPaper, LossForm::LogStandard];

    pub fn as_str(self) -> &'static str {
        match self {
            LossForm::Hinge => "hinge",
            LossForm::LogPaper => "log_paper",
            LossForm::LogStandard => "log_standard",
        }
    }
}

impl fmt::Display for LossForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hinge" => Ok(LossForm::Hinge),
            "log_paper" => Ok(LossForm::LogPaper),
            "log_standard" => Ok(LossForm::LogStandard),
            other => Err(Error::Config(format!(
                "unknown loss form `{other}` (expected hinge, log_paper or log_standard)"
            ))),
        }
    }
}

/// Discriminator loss from real and fake score matrices with the same `N`.
pub fn d_loss(g: &mut Graph, form: LossForm, real: NodeId, fake: NodeId) -> Result<NodeId> {
    let (nr, nf) = (g.shape(real).0, g.shape(fake).0);
    if nr != nf {
        return Err(Error::Contract(format!("real scores have N={nr}, fake scores N={nf}")));
    }
    match form {
        LossForm::Hinge => {
            let neg_real = g.neg(real)?;
            let margin_real = g.add_const(neg_real, 1.0)?;
            let hinge_real = g.max0(margin_real)?;
            let margin_fake = g.add_const(fake, 1.0)?;
            let hinge_fake = g.max0(margin_fake)?;
            let a = g.mean(hinge_real)?;
            let b = g.mean(hinge_fake)?;
            g.add(a, b)
        }
        LossForm::LogPaper => {
            let real_term = neg_mean_log_sigmoid(g, real)?;
            let ls_fake = g.log_sigmoid(fake)?;
            let neg = g.neg(ls_fake)?;
            let one_minus = g.add_const(neg, 1.0)?;
            let fake_mean = g.mean(one_minus)?;
            g.sub(real_term, fake_mean)
        }
        LossForm::LogStandard => {
            let real_term = neg_mean_log_sigmoid(g, real)?;
            // log(1 − σ(s)) = log σ(−s)
            let neg_fake = g.neg(fake)?;
            let fake_term = neg_mean_log_sigmoid(g, neg_fake)?;
            g.add(real_term, fake_term)
        }
    }
}

/// Generator loss from the fake score matrix.
pub fn g_loss(g: &mut Graph, form: LossForm, fake: NodeId) -> Result<NodeId> {
    match form {
        LossForm::Hinge => {
            let m = g.mean(fake)?;
            g.neg(m)
        }
        LossForm::LogPaper => {
            let ls = g.log_sigmoid(fake)?;
            let neg = g.neg(ls)?;
            let one_minus = g.add_const(neg, 1.0)?;
            g.mean(one_minus)
        }
        LossForm::LogStandard => neg_mean_log_sigmoid(g, fake),
    }
}

fn neg_mean_log_sigmoid(g: &mut Graph, s: NodeId) -> Result<NodeId> {
    let ls = g.log_sigmoid(s)?;
    let m = g.mean(ls)?;
    g.neg(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn eval_d(form: LossForm, real: Tensor, fake: Tensor) -> f64 {
        let mut g = Graph::new();
        let r = g.input(real).unwrap();
        let f = g.input(fake).unwrap();
        let l = d_loss(&mut g, form, r, f).unwrap();
        g.value(l).item().unwrap()
    }

    fn eval_g(form: LossForm, fake: Tensor) -> f64 {
        let mut g = Graph::new();
        let f = g.input(fake).unwrap();
        let l = g_loss(&mut g, form, f).unwrap();
        g.value(l).item().unwrap()
    }

    #[test]
    fn hinge_inactive_at_margins() {
        let v = eval_d(LossForm::Hinge, Tensor::full(3, 4, 1.0), Tensor::full(3, 4, -1.0));
        assert_eq!(v, 0.0);
    }

    #[test]
    fn hinge_hand_case() {
        // N=2, batch 1: (0.5 + 0)/2 + (0 + 1)/2
        let v = eval_d(
            LossForm::Hinge,
            Tensor::column(&[0.5, 2.0]),
            Tensor::column(&[-2.0, 0.0]),
        );
        assert_eq!(v, 0.75);
    }

    #[test]
    fn log_standard_at_zero() {
        let v = eval_d(LossForm::LogStandard, Tensor::scalar(0.0), Tensor::scalar(0.0));
        assert!((v - 2.0 * std::f64::consts::LN_2).abs() < 1e-15);
        assert!((v - 1.3863).abs() < 1e-4);
    }

    #[test]
    fn hinge_generator_hand_case() {
        assert_eq!(eval_g(LossForm::Hinge, Tensor::column(&[1.0, 2.0, 3.0, 6.0])), -3.0);
    }

    #[test]
    fn single_score_hinge_is_textbook() {
        for s in [-2.0, -0.5, 0.0, 0.3, 1.7] {
            assert_eq!(eval_g(LossForm::Hinge, Tensor::scalar(s)), -s);
            let d = eval_d(LossForm::Hinge, Tensor::scalar(s), Tensor::scalar(s));
            assert_eq!(d, (1.0 - s).max(0.0) + (1.0 + s).max(0.0));
        }
    }

    #[test]
    fn mismatched_heads_is_contract_error() {
        let mut g = Graph::new();
        let r = g.input(Tensor::zeros(2, 3)).unwrap();
        let f = g.input(Tensor::zeros(3, 3)).unwrap();
        assert!(matches!(d_loss(&mut g, LossForm::Hinge, r, f), Err(Error::Contract(_))));
    }

    #[test]
    fn parse_round_trip() {
        for form in LossForm::ALL {
            assert_eq!(form.as_str().parse::<LossForm>().unwrap(), form);
        }
        assert!("wgan".parse::<LossForm>().is_err());
    }
}
