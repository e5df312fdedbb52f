use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serkit::nn::*;
use serkit::Error;

fn random(shape: Vec<usize>, seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

fn check(input: &[usize], layers: Vec<LayerSpec>, batch: usize, seed: u64) -> GradCheckReport {
    let net = Network::<f64>::new(input, layers, seed).unwrap();
    let mut shape = vec![batch];
    shape.extend_from_slice(input);
    let x = random(shape, seed + 100);
    let labels: Vec<usize> = (0..batch).map(|i| i % 2).collect();
    grad_check(&net, &x, &labels, GradCheckOptions::default()).unwrap()
}

#[test]
fn dense_identity_passes_input_through() {
    let mut net = Network::<f64>::new(&[4], vec![LayerSpec::dense(4)], 0).unwrap();
    let eye = Tensor::from_fn(vec![4, 4], |i| if i / 4 == i % 4 { 1.0 } else { 0.0 });
    net.set_params(vec![eye, Tensor::zeros(vec![4])]).unwrap();
    let x = random(vec![3, 4], 1);
    assert_eq!(net.predict(&x).unwrap(), x);
}

#[test]
fn ones_kernel_on_constant_input() {
    let mut net = Network::<f64>::new(&[1, 5, 5], vec![LayerSpec::conv_same(1, 3)], 0).unwrap();
    net.set_params(vec![Tensor::filled(vec![1, 9], 1.0), Tensor::zeros(vec![1])]).unwrap();
    let y = net.predict(&Tensor::filled(vec![1, 1, 5, 5], 1.0)).unwrap();
    let at = |r: usize, c: usize| y.data()[r * 5 + c];
    assert_eq!(at(2, 2), 9.0);
    assert_eq!(at(1, 3), 9.0);
    assert_eq!(at(0, 0), 4.0);
    assert_eq!(at(4, 4), 4.0);
    assert_eq!(at(0, 2), 6.0);
}

#[test]
fn dropout_zero_in_train_equals_eval() {
    let layers = vec![LayerSpec::Flatten, LayerSpec::dense(8), LayerSpec::dropout(0.0), LayerSpec::dense(2)];
    let net = Network::<f32>::new(&[1, 4, 4], layers, 3).unwrap();
    let x = random(vec![2, 1, 4, 4], 4).cast::<f32>();
    let train = net.forward(&x, Mode::Train, 9).unwrap().0;
    assert_eq!(train, net.predict(&x).unwrap());
}

#[test]
fn dropout_scales_kept_units() {
    let net = Network::<f64>::new(&[1000], vec![LayerSpec::dropout(0.5)], 0).unwrap();
    let x = Tensor::filled(vec![1, 1000], 1.0);
    let (y, _) = net.forward(&x, Mode::Train, 5).unwrap();
    assert!(y.data().iter().all(|&v| v == 0.0 || v == 2.0));
    let kept = y.data().iter().filter(|&&v| v == 2.0).count();
    assert!((400..600).contains(&kept), "{kept}");
    assert_ne!(y, net.forward(&x, Mode::Train, 6).unwrap().0);
    assert_eq!(y, net.forward(&x, Mode::Train, 5).unwrap().0);
}

#[test]
fn shape_mismatch_names_layer() {
    let err = Network::<f32>::new(&[1, 4, 4], vec![LayerSpec::dense(3)], 0).unwrap_err();
    match err {
        Error::Dimension { at, .. } => assert!(at.contains("layer 0 (Dense)"), "{at}"),
        e => panic!("{e}"),
    }
    let net = Network::<f32>::new(&[3], vec![LayerSpec::dense(2)], 0).unwrap();
    assert!(matches!(net.predict(&Tensor::zeros(vec![1, 4])), Err(Error::Dimension { .. })));
}

#[test]
fn zero_upstream_gives_zero_gradients() {
    let layers = vec![LayerSpec::conv_same(3, 3), LayerSpec::ReLU, LayerSpec::Flatten, LayerSpec::dense(2)];
    let net = Network::<f64>::new(&[1, 6, 6], layers, 1).unwrap();
    let (y, cache) = net.forward(&random(vec![2, 1, 6, 6], 2), Mode::Train, 0).unwrap();
    let grads = net.backward(&cache, &Tensor::zeros(y.shape().to_vec())).unwrap();
    assert!(grads.iter().all(|g| g.data().iter().all(|&v| v == 0.0)));
}

#[test]
fn backward_is_deterministic() {
    let layers = vec![
        LayerSpec::conv_same(4, 3),
        LayerSpec::ReLU,
        LayerSpec::max_pool(2),
        LayerSpec::Flatten,
        LayerSpec::dense(6),
        LayerSpec::dropout(0.3),
        LayerSpec::dense(2),
    ];
    let net = Network::<f32>::new(&[1, 8, 8], layers, 7).unwrap();
    let x = random(vec![3, 1, 8, 8], 8).cast::<f32>();
    let run = || {
        let (y, c) = net.forward(&x, Mode::Train, 42).unwrap();
        let (_, d) = softmax_cross_entropy(&y, &[0, 1, 1]).unwrap();
        net.backward(&c, &d).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn stale_cache_is_rejected() {
    let mut net = Network::<f64>::new(&[3], vec![LayerSpec::dense(2)], 0).unwrap();
    let (y, cache) = net.forward(&random(vec![1, 3], 1), Mode::Train, 0).unwrap();
    let other = net.clone();
    assert!(matches!(other.backward(&cache, &y), Err(Error::StaleCache(_))));
    net.params_mut()[0].data_mut()[0] = 0.5;
    assert!(matches!(net.backward(&cache, &y), Err(Error::StaleCache(_))));
}

#[test]
fn per_layer_gradients_match_finite_differences() {
    use LayerSpec as L;
    let cases: Vec<(&str, Vec<usize>, Vec<L>)> = vec![
        ("dense", vec![5], vec![L::dense(4), L::dense(2)]),
        ("conv", vec![2, 5, 6], vec![L::conv_same(3, 3), L::Flatten, L::dense(2)]),
        ("strided conv", vec![1, 9, 9], vec![L::conv(2, 5, 2, 2), L::Flatten, L::dense(2)]),
        ("relu", vec![6], vec![L::dense(5), L::ReLU, L::dense(2)]),
        ("maxpool", vec![2, 6, 6], vec![L::conv_same(2, 3), L::max_pool(2), L::Flatten, L::dense(2)]),
        ("dropout", vec![6], vec![L::dense(8), L::dropout(0.4), L::dense(2)]),
        ("batchnorm conv", vec![1, 4, 4], vec![L::conv_same(3, 3), L::batch_norm(), L::Flatten, L::dense(2)]),
        ("batchnorm flat", vec![5], vec![L::dense(4), L::batch_norm(), L::dense(2)]),
        ("global pool", vec![2, 4, 5], vec![L::conv_same(3, 3), L::GlobalAvgPool, L::dense(2)]),
        (
            "residual",
            vec![2, 6, 6],
            vec![
                L::Residual {
                    main: vec![L::conv(4, 3, 2, 1), L::batch_norm(), L::ReLU, L::conv_same(4, 3)],
                    shortcut: vec![L::conv(4, 1, 2, 0)],
                },
                L::ReLU,
                L::GlobalAvgPool,
                L::dense(2),
            ],
        ),
    ];
    for (name, input, layers) in cases {
        let r = check(&input, layers, 3, 11);
        assert!(r.checked > 0, "{name}: nothing checked");
        assert!(r.max_rel_error < 1e-3, "{name}: {r:?}");
    }
}

#[test]
fn dense_only_gradients_are_tight() {
    let r = check(&[7], vec![LayerSpec::dense(5), LayerSpec::dense(3), LayerSpec::dense(2)], 4, 3);
    assert!(r.max_rel_error < 1e-6, "{r:?}");
}

#[test]
fn corrupted_gradient_is_detected() {
    let net = Network::<f64>::new(&[5], vec![LayerSpec::dense(4), LayerSpec::ReLU, LayerSpec::dense(2)], 2).unwrap();
    let x = random(vec![4, 5], 3);
    let labels = [0, 1, 1, 0];
    let (y, c) = net.forward(&x, Mode::Train, 0).unwrap();
    let (_, d) = softmax_cross_entropy(&y, &labels).unwrap();
    let mut grads = net.backward(&c, &d).unwrap();
    for v in grads[0].data_mut() {
        *v *= 1.5;
    }
    let r = grad_check_against(&net, &x, &labels, &grads, GradCheckOptions::default()).unwrap();
    assert!(r.max_rel_error > 0.1, "{r:?}");
}

#[test]
fn checkpoint_round_trip() {
    let layers = vec![
        LayerSpec::conv_same(2, 3),
        LayerSpec::batch_norm(),
        LayerSpec::ReLU,
        LayerSpec::Flatten,
        LayerSpec::dense(2),
    ];
    let mut net = Network::<f32>::new(&[1, 4, 4], layers, 5).unwrap();
    let x = random(vec![2, 1, 4, 4], 1).cast::<f32>();
    let (_, cache) = net.forward(&x, Mode::Train, 0).unwrap();
    net.update_running_stats(&cache);
    let meta = serde_json::json!({"model": "test"});
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&net, &meta, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
    let header: serde_json::Value = serde_json::from_slice(&bytes[..nl]).unwrap();
    assert_eq!(header["format"], "serkit-checkpoint");
    assert_eq!(bytes.len() - nl - 1, 4 * (net.param_count() + 4));
    let (back, m) = load_checkpoint::<f32>(&path).unwrap();
    assert_eq!(m, meta);
    assert_eq!(back.params(), net.params());
    assert_eq!(back.buffers(), net.buffers());
    assert_eq!(back.predict(&x).unwrap(), net.predict(&x).unwrap());
    std::fs::write(&path, &bytes[..bytes.len() - 2]).unwrap();
    assert!(matches!(load_checkpoint::<f32>(&path), Err(Error::Format { .. })));
}

#[test]
fn adam_zero_gradient_is_fixed_point() {
    let mut p = vec![random(vec![3, 4], 1).cast::<f32>()];
    let before = p.clone();
    let mut st = AdamState::new(AdamConfig::default(), &p);
    st.step(&mut p, &[Tensor::zeros(vec![3, 4])]).unwrap();
    assert_eq!(p, before);
    assert_eq!(st.steps(), 1);
}

#[test]
fn adam_first_step_magnitude_is_lr() {
    for g in [1.0f64, -3.0, 1e-3, 250.0] {
        let mut p = vec![Tensor::filled(vec![1], 0.25f64)];
        let mut st = AdamState::new(AdamConfig::with_lr(1e-3), &p);
        st.step(&mut p, &[Tensor::filled(vec![1], g)]).unwrap();
        let delta = p[0].data()[0] - 0.25;
        // closed form of the first bias-corrected step: -lr * g / (|g| + eps)
        let expected = -1e-3 * g / (g.abs() + 1e-8);
        assert!((delta - expected).abs() < 1e-15, "g={g}: {delta} vs {expected}");
        assert!((delta.abs() - 1e-3).abs() < 1e-6, "g={g}: {delta}");
    }
}

#[test]
fn adam_zero_lr_is_bit_exact_noop() {
    let mut p = vec![random(vec![10], 3).cast::<f32>(), Tensor::filled(vec![2], -0.0f32)];
    let before = p.clone();
    let mut st = AdamState::new(AdamConfig::with_lr(0.0), &p);
    for s in 0..3 {
        let g = vec![random(vec![10], s).cast::<f32>(), Tensor::filled(vec![2], 1.0f32)];
        st.step(&mut p, &g).unwrap();
    }
    for (a, b) in p.iter().zip(&before) {
        let bits = |t: &Tensor<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a), bits(b));
    }
}

#[test]
fn adam_constant_gradient_steady_state() {
    let mut p = vec![Tensor::filled(vec![1], 0.0f64)];
    let mut st = AdamState::new(AdamConfig::with_lr(1e-3), &p);
    let mut last = 0.0;
    for _ in 0..5000 {
        let before = p[0].data()[0];
        st.step(&mut p, &[Tensor::filled(vec![1], 0.7)]).unwrap();
        last = before - p[0].data()[0];
    }
    assert!((last - 1e-3).abs() < 1e-9, "{last}");
}

#[test]
fn adam_shape_mismatch() {
    let mut p = vec![Tensor::<f64>::zeros(vec![2])];
    let mut st = AdamState::new(AdamConfig::default(), &p);
    assert!(matches!(st.step(&mut p, &[Tensor::zeros(vec![3])]), Err(Error::Dimension { .. })));
}

#[test]
fn softmax_cross_entropy_rejects_bad_label() {
    let z = Tensor::<f32>::zeros(vec![2, 2]);
    assert!(matches!(softmax_cross_entropy(&z, &[0, 5]), Err(Error::Label { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn maxpool_routes_each_gradient_once(seed in any::<u64>(), h in 2usize..9, w in 2usize..9, ties in any::<bool>()) {
        let net = Network::<f64>::new(&[2, h, w], vec![LayerSpec::max_pool(2)], 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // coarse quantization forces ties inside windows
        let x = Tensor::from_fn(vec![2, 2, h, w], |_| {
            let v: f64 = rng.gen_range(-1.0..1.0);
            if ties { v.round() } else { v }
        });
        let (y, cache) = net.forward(&x, Mode::Train, 0).unwrap();
        let dy = Tensor::from_fn(y.shape().to_vec(), |i| i as f64 + 1.0);
        let (_, dx) = net.backward_with_input(&cache, &dy).unwrap();
        let (oh, ow) = (h / 2, w / 2);
        for plane in 0..4 {
            for oy in 0..oh {
                for ox in 0..ow {
                    let idx = |ki: usize, kj: usize| plane * h * w + (2 * oy + ki) * w + 2 * ox + kj;
                    let window = [idx(0, 0), idx(0, 1), idx(1, 0), idx(1, 1)];
                    let first = *window.iter().fold(&window[0], |best, i| if x.data()[*i] > x.data()[*best] { i } else { best });
                    let d = dy.data()[(plane * oh + oy) * ow + ox];
                    for &i in &window {
                        prop_assert_eq!(dx.data()[i], if i == first { d } else { 0.0 });
                    }
                }
            }
        }
        let total: f64 = dy.data().iter().sum();
        prop_assert!((dx.data().iter().sum::<f64>() - total).abs() < 1e-9);
    }

    #[test]
    fn softmax_rows_sum_to_one(seed in any::<u64>(), b in 1usize..6, k in 2usize..6, scale in 0.1f64..200.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = Tensor::from_fn(vec![b, k], |_| rng.gen_range(-scale..scale));
        let p = softmax(&z).unwrap();
        for r in 0..b {
            prop_assert!((p.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
        let labels: Vec<usize> = (0..b).map(|i| i % k).collect();
        let (l, g) = softmax_cross_entropy(&z, &labels).unwrap();
        prop_assert!(l >= 0.0);
        prop_assert!(g.all_finite());
    }
}
