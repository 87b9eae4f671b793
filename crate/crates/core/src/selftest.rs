//! Bundled invariant checks with fixed seeds, run by `crgan selftest`.

use std::time::Instant;

use crate::autodiff::Graph;
use crate::config::{HeadKind, RunConfig};
use crate::cr_head::{param_overhead, reject, CCRHead, CRHead};
use crate::data::GmmSpec;
use crate::error::Result;
use crate::gradcheck::{check_model, FD_STEP};
use crate::linalg::symmetric_eigen;
use crate::loss::{d_loss, LossForm};
use crate::metrics::{frechet_distance, mode_report, GaussianMoments};
use crate::model::Discriminator;
use crate::nn::{Activation, DenseLayer, Mlp, Parameters};
use crate::optim::{AdamConfig, AdamState};
use crate::rng::{Rng, Stream};
use crate::tensor::Tensor;
use crate::train::Trainer;

/// Signature of a vector-rejection routine, so a faulty one can be checked.
pub type RejectFn = fn(&[f64], &[f64]) -> Result<Vec<f64>>;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Check { name, passed, detail }
    }

    fn from_result(name: &'static str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Check::new(name, passed, detail),
            Err(e) => Check::new(name, false, format!("error: {e}")),
        }
    }
}

fn random_vec(n: usize, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| rng.normal()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cascades of up to 16 rejections in dimensions 2–64: every stage output is
/// orthogonal to its weight (relative 1e-9) and no longer than its input.
pub fn orthogonality_check(reject_fn: RejectFn, cascades: usize, seed: u64) -> Check {
    let mut rng = Rng::new(seed, Stream::Test);
    let mut worst = 0.0f64;
    let mut grew = 0usize;
    for _ in 0..cascades {
        let n = 1 + rng.below(16);
        let dim = 2 + rng.below(63);
        let mut v = random_vec(dim, &mut rng);
        for _ in 0..n {
            let w = random_vec(dim, &mut rng);
            let next = match reject_fn(&v, &w) {
                Ok(next) => next,
                Err(e) => return Check::new("rejection orthogonality", false, format!("error: {e}")),
            };
            worst = worst.max(dot(&w, &next).abs() / (norm(&w) * norm(&v)));
            if norm(&next) > norm(&v) {
                grew += 1;
            }
            v = next;
        }
    }
    Check::new(
        "rejection orthogonality",
        worst < 1e-9 && grew == 0,
        format!("max |w·v'|/(|w||v|) = {worst:.2e}, norm increases = {grew}"),
    )
}

fn gradient_check() -> Result<(bool, String)> {
    let mut rng = Rng::new(11, Stream::Test);
    let leaky = Activation::LeakyRelu(Activation::DEFAULT_LEAKY_SLOPE);
    let trunk = Mlp::new(&[2, 12, 12], vec![leaky; 2], false, &mut rng)?;
    let head = crate::model::Head::Cascade(CRHead::new(4, 12, false, &mut rng)?);
    let mut d = Discriminator { trunk, head };
    let real = Tensor::from_vec(2, 5, random_vec(10, &mut rng))?;
    let fake = Tensor::from_vec(2, 5, random_vec(10, &mut rng))?;
    let r = check_model(&mut d, FD_STEP, |d, g| {
        let b = d.bind(g, false)?;
        let xr = g.input(real.clone())?;
        let xf = g.input(fake.clone())?;
        let sr = b.forward(g, xr, None)?;
        let sf = b.forward(g, xf, None)?;
        Ok((d_loss(g, LossForm::LogStandard, sr, sf)?, b.params()))
    })?;
    Ok((
        r.max_rel_error < 1e-4,
        format!("{} entries, max rel err {:.2e}", r.entries, r.max_rel_error),
    ))
}

fn second_score_gradient() -> Result<(bool, String)> {
    let mut rng = Rng::new(12, Stream::Test);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let dim = 2 + rng.below(63);
        let v = random_vec(dim, &mut rng);
        let w1 = random_vec(dim, &mut rng);
        let w2 = random_vec(dim, &mut rng);
        let head = CRHead::from_weights(Tensor::from_rows(&[&w1, &w2]), false)?;
        let mut h = head.clone();
        let mut g = Graph::new();
        let vi = g.input(Tensor::column(&v))?;
        let s = h.forward(&mut g, vi, false)?;
        let s2 = g.slice_row(s, 1)?;
        let f = g.log_sigmoid(s2)?;
        let loss = g.sum(f)?;
        let grads = g.backward(loss)?;
        let got = grads.get_or_zero(vi);
        let s2v = g.value(s2).data()[0];
        let fprime = 1.0 - 1.0 / (1.0 + (-s2v).exp());
        let c = dot(&w1, &w2) / dot(&w1, &w1);
        for k in 0..dim {
            let want = fprime * (w2[k] - c * w1[k]);
            worst = worst.max((got.data()[k] - want).abs());
        }
        worst = worst.max(dot(got.data(), &w1).abs());
    }
    Ok((worst < 1e-9, format!("max abs deviation {worst:.2e}")))
}

fn frechet_oracle() -> Result<(bool, String)> {
    let eye = Tensor::identity(2);
    let origin = Tensor::column(&[0.0, 0.0]);
    let p = GaussianMoments::new(origin.clone(), eye.clone())?;
    let shifted = GaussianMoments::new(Tensor::column(&[1.0, 0.0]), eye.clone())?;
    let four = GaussianMoments::new(origin.clone(), eye.scaled(4.0))?;
    let mut worst = frechet_distance(&p, &p)?
        .abs()
        .max((frechet_distance(&p, &shifted)? - 1.0).abs())
        .max((frechet_distance(&four, &p)? - 2.0).abs());

    let mut rng = Rng::new(13, Stream::Test);
    let random_psd = |rng: &mut Rng| {
        let a = Tensor::from_vec(2, 2, random_vec(4, rng)).expect("2x2");
        a.matmul(&a.transpose()).expect("square")
    };
    for _ in 0..200 {
        let cp = random_psd(&mut rng);
        let cq = random_psd(&mut rng);
        // for 2×2 PSD inputs, tr √(CpCq) = √(tr(CpCq) + 2√(det Cp · det Cq))
        let det = |c: &Tensor| c.get(0, 0) * c.get(1, 1) - c.get(0, 1) * c.get(1, 0);
        let prod = cp.matmul(&cq)?;
        let cross = (prod.get(0, 0) + prod.get(1, 1) + 2.0 * (det(&cp) * det(&cq)).max(0.0).sqrt()).sqrt();
        let want = cp.get(0, 0) + cp.get(1, 1) + cq.get(0, 0) + cq.get(1, 1) - 2.0 * cross;
        let got = frechet_distance(
            &GaussianMoments::new(origin.clone(), cp)?,
            &GaussianMoments::new(origin.clone(), cq)?,
        )?;
        worst = worst.max((got - want.max(0.0)).abs());
    }
    Ok((worst < 1e-8, format!("max abs deviation {worst:.2e}")))
}

fn spectral_oracle() -> Result<(bool, String)> {
    let mut rng = Rng::new(14, Stream::Test);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let rows = 1 + rng.below(16);
        let cols = 1 + rng.below(16);
        let mut layer = DenseLayer::new(cols, rows, false, true, &mut rng);
        layer.warm_up_spectral(50);
        let w = layer.effective_weight();
        let (values, _) = symmetric_eigen(&w.transpose().matmul(&w)?)?;
        let top = values.iter().cloned().fold(0.0, f64::max).sqrt();
        worst = worst.max((top - 1.0).abs());
    }
    Ok((worst <= 0.01, format!("max |σ_max − 1| = {worst:.2e}")))
}

fn zero_embedding_reduction() -> Result<(bool, String)> {
    let mut rng = Rng::new(15, Stream::Test);
    let base = CRHead::new(5, 16, false, &mut rng)?;
    let ccr = CCRHead::from_parts(base.clone(), vec![Tensor::zeros(8, 16); 5])?;
    let v = Tensor::from_vec(16, 7, random_vec(16 * 7, &mut rng))?;
    let labels: Vec<usize> = (0..7).map(|_| rng.below(8)).collect();
    let a = base.scores(&v)?;
    let b = ccr.scores(&v, &labels)?;
    let same = a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits());
    Ok((same, format!("max diff {:.2e}", a.max_abs_diff(&b))))
}

fn overhead() -> Result<(bool, String)> {
    let mut rng = Rng::new(16, Stream::Test);
    let mut ok = true;
    for c in [2, 128] {
        let one = CRHead::new(1, c, true, &mut rng)?.param_count();
        for n in [1, 2, 4, 8, 16] {
            let count = CRHead::new(n, c, true, &mut rng)?.param_count();
            ok &= count - one == param_overhead(n, c) && param_overhead(n, c) == (n - 1) * c;
        }
    }
    Ok((ok, "N in {1,2,4,8,16}, C_L in {2,128}".into()))
}

fn adam_first_step() -> Result<(bool, String)> {
    let mut p = Tensor::column(&[1.0, -2.0]);
    let grad = Tensor::column(&[0.5, -3.0]);
    let mut opt = AdamState::new(AdamConfig::default(), &[&p]);
    opt.step(&mut [&mut p], &[grad], &["p".into()])?;
    let want = [1.0 - 2e-4 / (1.0 + 1e-8 / 0.5), -2.0 + 2e-4 / (1.0 + 1e-8 / 3.0)];
    let err = (p.data()[0] - want[0]).abs().max((p.data()[1] - want[1]).abs());
    Ok((err < 1e-15, format!("deviation {err:.2e}")))
}

fn true_samples_cover() -> Result<(bool, String)> {
    let spec = GmmSpec::ring8();
    let batch = spec.sample(8000, &mut Rng::new(17, Stream::Test));
    let r = mode_report(&batch.points, &spec, None)?;
    Ok((
        r.modes_covered == 8 && r.high_quality_fraction > 0.98,
        format!("{} modes, hq {:.4}", r.modes_covered, r.high_quality_fraction),
    ))
}

fn single_score_reduction() -> Result<(bool, String)> {
    let base = RunConfig {
        g_widths: vec![16, 16],
        d_widths: vec![16],
        n_heads: 1,
        batch_size: 16,
        eval_samples: 64,
        out_dir: None,
        ..RunConfig::default()
    };
    let mut worst = 0.0f64;
    for form in [LossForm::Hinge, LossForm::LogStandard] {
        let mut cr = Trainer::new(RunConfig {
            loss_form: form,
            ..base.clone()
        })?;
        let mut dense = Trainer::new(RunConfig {
            loss_form: form,
            head: HeadKind::Dense,
            ..base.clone()
        })?;
        for step in 0..30 {
            let (a, b) = if step % 6 == 5 {
                (cr.g_step()?, dense.g_step()?)
            } else {
                (cr.d_step()?, dense.d_step()?)
            };
            worst = worst.max((a - b).abs());
        }
    }
    Ok((worst <= 1e-12, format!("max loss difference {worst:.2e}")))
}

/// Runs every check; the returned list is in a fixed order.
pub fn run() -> Vec<Check> {
    let mut checks = vec![
        Check::from_result("gradient vs finite differences", gradient_check()),
        Check::from_result("second-score input gradient", second_score_gradient()),
        orthogonality_check(reject, 300, 10),
    ];
    checks.push(Check::from_result("frechet distance oracles", frechet_oracle()));
    checks.push(Check::from_result("spectral norm oracle", spectral_oracle()));
    checks.push(Check::from_result(
        "zero class embedding reduction",
        zero_embedding_reduction(),
    ));
    checks.push(Check::from_result("head parameter overhead", overhead()));
    checks.push(Check::from_result("adam first step", adam_first_step()));
    checks.push(Check::from_result("true samples cover all modes", true_samples_cover()));
    checks.push(Check::from_result("single-score reduction", single_score_reduction()));
    checks
}

/// Prints one `PASS`/`FAIL` line per check and returns whether all passed.
pub fn report(checks: &[Check], elapsed: std::time::Duration) -> bool {
    for c in checks {
        println!("{} {:<34} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!(
        "{} of {} checks passed in {:.1}s",
        checks.len() - failed,
        checks.len(),
        elapsed.as_secs_f64()
    );
    failed == 0
}

/// [`run`] then [`report`].
pub fn run_and_report() -> bool {
    let start = Instant::now();
    let checks = run();
    report(&checks, start.elapsed())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flipped(v: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        let c = dot(w, v) / dot(w, w);
        Ok(v.iter().zip(w).map(|(a, b)| a + c * b).collect())
    }

    #[test]
    fn correct_reject_passes() {
        assert!(orthogonality_check(reject, 50, 1).passed);
    }

    #[test]
    fn sign_flip_fails() {
        assert!(!orthogonality_check(flipped, 50, 1).passed);
    }
}
