use proptest::prelude::*;

use crgan::checkpoint::Checkpoint;
use crgan::cr_head::{param_overhead, reject};
use crgan::loss::{d_loss, g_loss};
use crgan::metrics::{fit_moments, frechet_distance, frechet_distance_samples, mode_report};
use crgan::model::Head;
use crgan::nn::{DenseLayer, Parameters};
use crgan::train::build_models;
use crgan::{CCRHead, CRHead, GmmSpec, Graph, LossForm, RunConfig, Task, Tensor};

fn vec_of(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, len)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    vec_of(rows * cols).prop_map(move |d| Tensor::from_vec(rows, cols, d).unwrap())
}

fn pair_of_vecs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..64).prop_flat_map(|n| (vec_of(n), vec_of(n)))
}

fn bits_equal(a: &Tensor, b: &Tensor) -> bool {
    a.shape() == b.shape() && a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rejection_is_orthogonal_and_shrinks((v, w) in pair_of_vecs()) {
        prop_assume!(dot(&w, &w) > 1e-6);
        let r = reject(&v, &w).unwrap();
        let scale = dot(&w, &w).sqrt() * dot(&v, &v).sqrt();
        prop_assert!(dot(&w, &r).abs() <= 1e-9 * scale.max(1e-300));
        prop_assert!(dot(&r, &r) <= dot(&v, &v));
    }

    #[test]
    fn rejection_is_idempotent((v, w) in pair_of_vecs()) {
        prop_assume!(dot(&w, &w) > 1e-6);
        let once = reject(&v, &w).unwrap();
        let twice = reject(&once, &w).unwrap();
        let scale = dot(&v, &v).sqrt().max(1.0);
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn zero_class_tables_reduce_to_plain_cascade(
        n in 1usize..6,
        c in 1usize..12,
        b in 1usize..6,
        seed in any::<u64>(),
    ) {
        let mut rng = crgan::Rng::new(seed, crgan::Stream::Test);
        let base = CRHead::new(n, c, false, &mut rng).unwrap();
        let ccr = CCRHead::from_parts(base.clone(), vec![Tensor::zeros(3, c); n]).unwrap();
        let v = Tensor::from_vec(c, b, (0..c * b).map(|_| rng.normal()).collect()).unwrap();
        let labels: Vec<usize> = (0..b).map(|_| rng.below(3)).collect();
        prop_assert!(bits_equal(&base.scores(&v).unwrap(), &ccr.scores(&v, &labels).unwrap()));
    }

    #[test]
    fn single_stage_cascade_is_a_dense_scorer(
        c in 1usize..40,
        b in 1usize..8,
        seed in any::<u64>(),
    ) {
        let mut rng = crgan::Rng::new(seed, crgan::Stream::Test);
        let w = Tensor::from_vec(1, c, (0..c).map(|_| rng.normal()).collect()).unwrap();
        let v = Tensor::from_vec(c, b, (0..c * b).map(|_| rng.normal()).collect()).unwrap();
        let head = CRHead::from_weights(w.clone(), false).unwrap();
        let dense = DenseLayer::from_weights(w, None, false).unwrap();
        let mut g = Graph::new();
        let vi = g.input(v.clone()).unwrap();
        let mut d = dense.clone();
        let s = d.forward(&mut g, vi, false).unwrap();
        prop_assert!(bits_equal(&head.scores(&v).unwrap(), g.value(s)));
    }

    #[test]
    fn backward_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, w in matrix(3, 4), x in matrix(4, 5)) {
        let grad = |ca: f64, cb: f64| {
            let mut g = Graph::new();
            let wi = g.param(w.clone()).unwrap();
            let xi = g.input(x.clone()).unwrap();
            let y = g.matmul(wi, xi).unwrap();
            let t = g.tanh(y).unwrap();
            let f = g.sum(t).unwrap();
            let l = g.leaky_relu(y, 0.1).unwrap();
            let h = g.mean(l).unwrap();
            let fa = g.scale(f, ca).unwrap();
            let hb = g.scale(h, cb).unwrap();
            let total = g.add(fa, hb).unwrap();
            g.backward(total).unwrap().get_or_zero(wi)
        };
        let combined = grad(a, b);
        let separate = grad(1.0, 0.0).scaled(a);
        let other = grad(0.0, 1.0).scaled(b);
        for k in 0..combined.len() {
            let want = separate.data()[k] + other.data()[k];
            prop_assert!((combined.data()[k] - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn hinge_discriminator_loss_is_non_negative(real in matrix(3, 4), fake in matrix(3, 4)) {
        let mut g = Graph::new();
        let r = g.input(real).unwrap();
        let f = g.input(fake.clone()).unwrap();
        let l = d_loss(&mut g, LossForm::Hinge, r, f).unwrap();
        prop_assert!(g.value(l).data()[0] >= 0.0);
        let gl = g_loss(&mut g, LossForm::Hinge, f).unwrap();
        let mean = fake.sum() / fake.len() as f64;
        prop_assert!((g.value(gl).data()[0] + mean).abs() < 1e-12);
    }

    #[test]
    fn frechet_is_symmetric_and_zero_on_self(a in matrix(3, 12), b in matrix(3, 9)) {
        let (p, q) = (fit_moments(&a).unwrap(), fit_moments(&b).unwrap());
        let pq = frechet_distance(&p, &q).unwrap();
        let qp = frechet_distance(&q, &p).unwrap();
        prop_assert!((pq - qp).abs() <= 1e-9);
        prop_assert!(frechet_distance(&p, &p).unwrap() <= 1e-10);
    }

    #[test]
    fn frechet_is_translation_invariant(a in matrix(2, 10), b in matrix(2, 10), dx in -5.0f64..5.0, dy in -5.0f64..5.0) {
        let shift = |t: &Tensor| {
            let mut s = t.clone();
            for x in s.row_slice_mut(0) { *x += dx; }
            for y in s.row_slice_mut(1) { *y += dy; }
            s
        };
        let before = frechet_distance_samples(&a, &b).unwrap();
        let after = frechet_distance_samples(&shift(&a), &shift(&b)).unwrap();
        prop_assert!((before - after).abs() <= 1e-9);
    }

    #[test]
    fn mode_report_ignores_sample_order(seed in any::<u64>(), n in 1usize..300) {
        let spec = GmmSpec::ring8();
        let mut rng = crgan::Rng::new(seed, crgan::Stream::Test);
        let batch = spec.sample(n, &mut rng);
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.below(i + 1));
        }
        let mut shuffled = Tensor::zeros(2, n);
        for (dst, &src) in order.iter().enumerate() {
            shuffled.set(0, dst, batch.points.get(0, src));
            shuffled.set(1, dst, batch.points.get(1, src));
        }
        let a = mode_report(&batch.points, &spec, None).unwrap();
        let b = mode_report(&shuffled, &spec, None).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn head_overhead_is_rows_times_width(n in 1usize..20, c in 1usize..200) {
        let mut rng = crgan::Rng::new(0, crgan::Stream::Test);
        let one = CRHead::new(1, c, true, &mut rng).unwrap().param_count();
        let many = CRHead::new(n, c, true, &mut rng).unwrap().param_count();
        prop_assert_eq!(many - one, param_overhead(n, c));
        prop_assert_eq!(param_overhead(n, c), (n - 1) * c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn config_text_round_trips(
        seed in any::<u64>(),
        n in 1usize..20,
        lr in 1e-6f64..1e-1,
        conditional in any::<bool>(),
        widths in prop::collection::vec(1usize..300, 0..4),
    ) {
        let cfg = RunConfig {
            seed,
            n_heads: n,
            lr,
            task: if conditional { Task::Gmm8Conditional } else { Task::Gmm8 },
            g_widths: widths.clone(),
            d_widths: widths,
            ..RunConfig::default()
        };
        prop_assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn checkpoint_bytes_round_trip(seed in any::<u64>(), n in 1usize..5, conditional in any::<bool>()) {
        let cfg = RunConfig {
            seed,
            n_heads: n,
            g_widths: vec![6, 5],
            d_widths: vec![7],
            task: if conditional { Task::Gmm8Conditional } else { Task::Gmm8 },
            ..RunConfig::default()
        };
        let (generator, discriminator) = build_models(&cfg).unwrap();
        prop_assert_eq!(matches!(discriminator.head, Head::Conditional(_)), conditional);
        let ckpt = Checkpoint {
            config_text: cfg.to_text(),
            g_updates: seed % 1000,
            generator,
            discriminator,
            rng_states: vec![crgan::Rng::new(seed, crgan::Stream::Data).state()],
        };
        let bytes = ckpt.to_bytes();
        prop_assert_eq!(Checkpoint::from_bytes(&bytes).unwrap(), ckpt);
        prop_assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }
}
