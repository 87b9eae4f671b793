//! Fréchet distance between Gaussian fits, and mode coverage for mixtures.

use crate::data::GmmSpec;
use crate::error::{Error, Result};
use crate::linalg::{psd_eigenvalues, sqrtm_psd, symmetrize, trace};
use crate::tensor::Tensor;

/// Fréchet distances in `[-FD_CLAMP, 0)` are rounding noise and reported as 0.
pub const FD_CLAMP: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMoments {
    /// `d × 1`
    pub mean: Tensor,
    /// `d × d`, symmetric PSD
    pub cov: Tensor,
}

impl GaussianMoments {
    pub fn new(mean: Tensor, cov: Tensor) -> Result<Self> {
        let d = mean.rows();
        if mean.cols() != 1 || cov.rows() != d || cov.cols() != d {
            return Err(Error::dim("gaussian moments", mean.shape(), cov.shape()));
        }
        Ok(GaussianMoments { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.rows()
    }
}

/// Sample mean and unbiased (`1/(n−1)`) covariance of the columns of `samples` (`d × n`).
pub fn fit_moments(samples: &Tensor) -> Result<GaussianMoments> {
    let (d, n) = (samples.rows(), samples.cols());
    if n < 2 || d == 0 {
        return Err(Error::Domain(format!(
            "need at least 2 samples of dimension >= 1, got {n} of dimension {d}"
        )));
    }
    let mean: Vec<f64> = (0..d)
        .map(|k| samples.row_slice(k).iter().sum::<f64>() / n as f64)
        .collect();
    let mut cov = Tensor::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let ra = samples.row_slice(a);
            let rb = samples.row_slice(b);
            let s: f64 = ra.iter().zip(rb).map(|(x, y)| (x - mean[a]) * (y - mean[b])).sum();
            let c = s / (n - 1) as f64;
            cov.set(a, b, c);
            cov.set(b, a, c);
        }
    }
    Ok(GaussianMoments {
        mean: Tensor::column(&mean),
        cov: symmetrize(&cov),
    })
}

/// `‖μ_p − μ_q‖² + tr(C_p) + tr(C_q) − 2·tr(√(√C_p · C_q · √C_p))`.
///
/// The symmetric inner square root has the same trace as `√(C_p C_q)` for PSD
/// inputs and keeps every eigenproblem symmetric.
pub fn frechet_distance(p: &GaussianMoments, q: &GaussianMoments) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::dim("frechet_distance", p.cov.shape(), q.cov.shape()));
    }
    let mean_term: f64 = p
        .mean
        .data()
        .iter()
        .zip(q.mean.data())
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    let root_p = sqrtm_psd(&p.cov)?;
    let inner = root_p.matmul(&q.cov)?.matmul(&root_p)?;
    let cross: f64 = psd_eigenvalues(&inner)?.iter().map(|l| l.sqrt()).sum();
    let fd = mean_term + trace(&p.cov) + trace(&q.cov) - 2.0 * cross;
    if fd >= 0.0 {
        Ok(fd)
    } else if fd >= -FD_CLAMP {
        Ok(0.0)
    } else {
        Err(Error::Numeric(format!("negative Fréchet distance {fd:e}")))
    }
}

/// Fréchet distance between Gaussian fits of two `d × n` sample sets.
pub fn frechet_distance_samples(a: &Tensor, b: &Tensor) -> Result<f64> {
    frechet_distance(&fit_moments(a)?, &fit_moments(b)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeReport {
    pub modes_covered: usize,
    /// Fraction of samples within `3σ` of their nearest center.
    pub high_quality_fraction: f64,
    /// High-quality samples per mode; sums to the high-quality count.
    pub per_mode_counts: Vec<usize>,
    /// Fraction of samples whose nearest center is their conditioning label.
    pub class_accuracy: Option<f64>,
}

/// A mode counts as covered once it holds at least `max(20, 0.2·n/K)` high-quality samples.
pub fn coverage_threshold(n: usize, k: usize) -> usize {
    let frac = (0.2 * n as f64 / k as f64).ceil() as usize;
    frac.max(20)
}

fn nearest_center(spec: &GmmSpec, x: f64, y: f64) -> (usize, f64) {
    spec.centers
        .iter()
        .enumerate()
        .map(|(k, c)| (k, (x - c[0]).hypot(y - c[1])))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// Coverage statistics for `2 × n` samples against the mixture `spec`.
pub fn mode_report(samples: &Tensor, spec: &GmmSpec, labels: Option<&[usize]>) -> Result<ModeReport> {
    if samples.rows() != 2 {
        return Err(Error::dim(
            "mode_report",
            samples.shape(),
            crate::Shape(2, samples.cols()),
        ));
    }
    let n = samples.cols();
    if let Some(l) = labels {
        if l.len() != n {
            return Err(Error::Contract(format!("{} labels for {n} samples", l.len())));
        }
    }
    let k = spec.num_modes();
    let radius = 3.0 * spec.sigma;
    let mut counts = vec![0usize; k];
    let mut high_quality = 0usize;
    let mut correct = 0usize;
    for j in 0..n {
        let (nearest, dist) = nearest_center(spec, samples.get(0, j), samples.get(1, j));
        if dist <= radius {
            counts[nearest] += 1;
            high_quality += 1;
        }
        if labels.is_some_and(|l| l[j] == nearest) {
            correct += 1;
        }
    }
    let threshold = coverage_threshold(n, k);
    let ratio = |num: usize| if n == 0 { 0.0 } else { num as f64 / n as f64 };
    Ok(ModeReport {
        modes_covered: counts.iter().filter(|&&c| c >= threshold).count(),
        high_quality_fraction: ratio(high_quality),
        per_mode_counts: counts,
        class_accuracy: labels.map(|_| ratio(correct)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Rng, Stream};

    fn moments(mean: &[f64], cov: &[&[f64]]) -> GaussianMoments {
        GaussianMoments::new(Tensor::column(mean), Tensor::from_rows(cov)).unwrap()
    }

    #[test]
    fn identical_samples_have_zero_covariance() {
        let s = Tensor::from_rows(&[&[1.5; 5], &[-2.0; 5]]);
        let m = fit_moments(&s).unwrap();
        assert_eq!(m.cov, Tensor::zeros(2, 2));
    }

    #[test]
    fn two_point_hand_case() {
        let s = Tensor::from_rows(&[&[0.0, 2.0], &[0.0, 0.0]]);
        let m = fit_moments(&s).unwrap();
        assert_eq!(m.mean.data(), &[1.0, 0.0]);
        assert_eq!(m.cov.data(), &[2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn too_few_samples_is_domain_error() {
        assert!(matches!(fit_moments(&Tensor::zeros(2, 1)), Err(Error::Domain(_))));
    }

    #[test]
    fn closed_form_cases() {
        let p = moments(&[0.0, 0.0], &[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!(frechet_distance(&p, &p).unwrap() < 1e-12);
        let q = moments(&[1.0, 0.0], &[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!((frechet_distance(&p, &q).unwrap() - 1.0).abs() < 1e-12);
        let four = moments(&[0.0, 0.0], &[&[4.0, 0.0], &[0.0, 4.0]]);
        assert!((frechet_distance(&four, &p).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let p = moments(&[0.0, 0.0], &[&[1.0, 0.0], &[0.0, 1.0]]);
        let q = moments(&[0.0], &[&[1.0]]);
        assert!(frechet_distance(&p, &q).is_err());
    }

    #[test]
    fn true_samples_cover_every_mode() {
        let spec = GmmSpec::ring8();
        let batch = spec.sample(8000, &mut Rng::new(0, Stream::Data));
        let r = mode_report(&batch.points, &spec, None).unwrap();
        assert_eq!(r.modes_covered, 8);
        assert!(r.high_quality_fraction > 0.98, "{}", r.high_quality_fraction);
        assert_eq!(
            r.per_mode_counts.iter().sum::<usize>() as f64,
            r.high_quality_fraction * 8000.0
        );
        assert!(r.class_accuracy.is_none());
    }

    #[test]
    fn collapsed_samples_cover_one_mode() {
        let spec = GmmSpec::ring8();
        let c = spec.centers[3];
        let s = Tensor::from_rows(&[&vec![c[0]; 500], &vec![c[1]; 500]]);
        let r = mode_report(&s, &spec, Some(&vec![3; 500])).unwrap();
        assert_eq!(r.modes_covered, 1);
        assert_eq!(r.class_accuracy, Some(1.0));
    }

    #[test]
    fn far_samples_cover_nothing() {
        let spec = GmmSpec::ring8();
        let s = Tensor::from_rows(&[&[0.0; 100], &[0.0; 100]]);
        let r = mode_report(&s, &spec, None).unwrap();
        assert_eq!(r.modes_covered, 0);
        assert_eq!(r.high_quality_fraction, 0.0);
        let empty = mode_report(&Tensor::zeros(2, 0), &spec, None).unwrap();
        assert_eq!((empty.modes_covered, empty.high_quality_fraction), (0, 0.0));
    }
}
