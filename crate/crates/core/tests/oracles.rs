//! Independent reference computations (nalgebra) for the numeric kernels.

use nalgebra::{DMatrix, DVector};

use crgan::data::LatentSpec;
use crgan::linalg::{sqrtm_psd, symmetric_eigen};
use crgan::metrics::{fit_moments, frechet_distance, GaussianMoments};
use crgan::nn::DenseLayer;
use crgan::{GmmSpec, Rng, Stream, Tensor};

fn to_na(t: &Tensor) -> DMatrix<f64> {
    DMatrix::from_row_slice(t.rows(), t.cols(), t.data())
}

fn random_tensor(rows: usize, cols: usize, rng: &mut Rng) -> Tensor {
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).unwrap()
}

fn random_psd(d: usize, rng: &mut Rng) -> Tensor {
    let a = random_tensor(d, d, rng);
    a.matmul(&a.transpose()).unwrap()
}

#[test]
fn spectral_normalized_weight_has_unit_top_singular_value() {
    let mut rng = Rng::new(100, Stream::Test);
    let mut outside_after_50 = 0;
    for _ in 0..200 {
        let rows = 1 + rng.below(64);
        let cols = 1 + rng.below(64);
        let mut layer = DenseLayer::new(cols, rows, true, true, &mut rng);
        layer.warm_up_spectral(50);
        let top = to_na(&layer.effective_weight()).singular_values().max();
        // power iteration approaches σ_max from below, so W/σ̂ never shrinks under 1
        assert!(top >= 1.0 - 1e-12, "{rows}x{cols}: {top}");
        if top > 1.01 {
            outside_after_50 += 1;
        }
        layer.warm_up_spectral(150);
        let top = to_na(&layer.effective_weight()).singular_values().max();
        assert!((0.99..=1.01).contains(&top), "{rows}x{cols} after 200: {top}");
    }
    // close leading singular values converge slowly; a few percent may lag at 50
    assert!(
        outside_after_50 <= 10,
        "{outside_after_50} of 200 outside 1% after 50 iterations"
    );
}

#[test]
fn jacobi_eigenvalues_match_reference() {
    let mut rng = Rng::new(101, Stream::Test);
    for d in 1..=12 {
        let a = random_psd(d, &mut rng);
        let (mut ours, vecs) = symmetric_eigen(&a).unwrap();
        ours.sort_by(f64::total_cmp);
        let mut reference: Vec<f64> = to_na(&a).symmetric_eigen().eigenvalues.iter().copied().collect();
        reference.sort_by(f64::total_cmp);
        for (x, y) in ours.iter().zip(&reference) {
            assert!((x - y).abs() < 1e-9 * (1.0 + y.abs()), "d={d}: {x} vs {y}");
        }
        let v = to_na(&vecs);
        let gram = v.transpose() * &v;
        assert!((gram - DMatrix::identity(d, d)).abs().max() < 1e-10);
    }
}

#[test]
fn sqrtm_matches_reference() {
    let mut rng = Rng::new(102, Stream::Test);
    for d in 1..=6 {
        let a = random_psd(d, &mut rng);
        let eig = to_na(&a).symmetric_eigen();
        let roots = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
        let reference = &eig.eigenvectors * roots * eig.eigenvectors.transpose();
        let ours = to_na(&sqrtm_psd(&a).unwrap());
        assert!((ours - reference).abs().max() < 1e-9);
    }
}

/// `tr((C_p C_q)^{1/2})` from the eigenvalues of the (non-symmetric) product.
fn product_root_trace(cp: &Tensor, cq: &Tensor) -> f64 {
    let prod = to_na(cp) * to_na(cq);
    prod.complex_eigenvalues().iter().map(|z| z.re.max(0.0).sqrt()).sum()
}

#[test]
fn frechet_matches_product_eigen_evaluation() {
    let mut rng = Rng::new(103, Stream::Test);
    for trial in 0..300 {
        let d = 2 + trial % 3;
        let cp = random_psd(d, &mut rng);
        let cq = random_psd(d, &mut rng);
        let mp = random_tensor(d, 1, &mut rng);
        let mq = random_tensor(d, 1, &mut rng);
        let mean_term = (to_na(&mp) - to_na(&mq)).norm_squared();
        let want = mean_term + to_na(&cp).trace() + to_na(&cq).trace() - 2.0 * product_root_trace(&cp, &cq);
        let got = frechet_distance(
            &GaussianMoments::new(mp, cp).unwrap(),
            &GaussianMoments::new(mq, cq).unwrap(),
        )
        .unwrap();
        assert!(
            (got - want.max(0.0)).abs() < 1e-8 * (1.0 + want.abs()),
            "d={d}: {got} vs {want}"
        );
    }
}

#[test]
fn fit_moments_matches_reference() {
    let mut rng = Rng::new(104, Stream::Test);
    let s = random_tensor(3, 40, &mut rng);
    let m = fit_moments(&s).unwrap();
    let x = to_na(&s);
    let mean: DVector<f64> = x.column_mean();
    let centered = DMatrix::from_fn(3, 40, |r, c| x[(r, c)] - mean[r]);
    let cov = &centered * centered.transpose() / 39.0;
    assert!(
        (to_na(&m.mean) - DMatrix::from_column_slice(3, 1, mean.as_slice()))
            .abs()
            .max()
            < 1e-14
    );
    assert!((to_na(&m.cov) - cov).abs().max() < 1e-12);
}

#[test]
fn standard_normal_covariance_is_near_identity() {
    let z = LatentSpec::new(2)
        .unwrap()
        .sample(100_000, &mut Rng::new(105, Stream::Latent));
    let m = fit_moments(&z).unwrap();
    assert!(m.cov.max_abs_diff(&Tensor::identity(2)) < 0.03, "{:?}", m.cov);
    for k in 0..2 {
        let var = m.cov.get(k, k);
        assert!((0.97..=1.03).contains(&var), "variance {var}");
    }
}

#[test]
fn ring_sample_mean_is_near_origin() {
    let batch = GmmSpec::ring8().sample(100_000, &mut Rng::new(106, Stream::Data));
    let m = fit_moments(&batch.points).unwrap();
    assert!(m.mean.data().iter().all(|x| x.abs() < 0.02), "{:?}", m.mean);
}

#[test]
fn labeled_samples_sit_at_their_own_center() {
    let mut spec = GmmSpec::ring8();
    spec.labeled = true;
    let batch = spec.sample(20_000, &mut Rng::new(107, Stream::Data));
    let labels = batch.labels.as_ref().unwrap();
    for (j, &label) in labels.iter().enumerate() {
        let [x, y] = batch.point(j);
        let nearest = (0..8)
            .min_by(|&a, &b| {
                let da = (x - spec.centers[a][0]).hypot(y - spec.centers[a][1]);
                let db = (x - spec.centers[b][0]).hypot(y - spec.centers[b][1]);
                da.total_cmp(&db)
            })
            .unwrap();
        assert_eq!(nearest, label);
    }
    let mut counts = [0usize; 8];
    for &l in labels {
        counts[l] += 1;
    }
    // multinomial(20000, 1/8): sd ≈ 46.8, allow 5 sd
    assert!(counts.iter().all(|&c| (c as f64 - 2500.0).abs() < 235.0), "{counts:?}");
}

#[test]
fn init_stream_ignores_batch_size() {
    let a = crgan::train::build_models(&crgan::RunConfig::default()).unwrap();
    let b = crgan::train::build_models(&crgan::RunConfig {
        batch_size: 17,
        eval_samples: 99,
        ..crgan::RunConfig::default()
    })
    .unwrap();
    assert_eq!(a, b);
}
