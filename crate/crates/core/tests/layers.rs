use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use salnet::layers::{self, ConvSpec, LayerParams, LayerSpec, Mode};
use salnet::Tensor;

fn uniform(shape: Vec<usize>, rng: &mut impl Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

fn run(spec: &LayerSpec, params: Option<&LayerParams<f64>>, x: &Tensor<f64>) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    layers::forward(spec, params, x, Mode::Test, &mut rng).unwrap().0
}

/// `<conv(x), y> == <x, deconv(y)>` with shared weights and zero biases.
#[test]
fn conv_and_deconv_are_adjoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 50 {
        let k = rng.random_range(1..=4);
        let stride = rng.random_range(1..=3);
        let pad = rng.random_range(0..k);
        let cin = rng.random_range(1..=3);
        let cout = rng.random_range(1..=3);
        let out_h = rng.random_range(1..=5);
        let out_w = rng.random_range(1..=5);
        // input extents that the kernel tiles exactly
        let h = (out_h - 1) * stride + k;
        let w = (out_w - 1) * stride + k;
        if h <= 2 * pad || w <= 2 * pad {
            continue;
        }
        let (h, w) = (h - 2 * pad, w - 2 * pad);
        let conv = ConvSpec {
            kernel: (k, k),
            stride,
            pad,
            out_channels: cout,
        };
        let deconv = ConvSpec { out_channels: cin, ..conv };
        let weights = uniform(vec![cout, cin, k, k], &mut rng);
        let conv_p = LayerParams {
            weights: weights.clone(),
            bias: Tensor::zeros(vec![cout]),
        };
        let deconv_p = LayerParams {
            weights,
            bias: Tensor::zeros(vec![cin]),
        };
        let x = uniform(vec![cin, h, w], &mut rng);
        let y = uniform(vec![cout, out_h, out_w], &mut rng);
        let cx = run(&LayerSpec::Conv(conv), Some(&conv_p), &x);
        assert_eq!(cx.shape(), y.shape());
        let dy = run(&LayerSpec::Deconv(deconv), Some(&deconv_p), &y);
        assert_eq!(dy.shape(), x.shape());
        let (lhs, rhs) = (cx.dot(&y), x.dot(&dy));
        worst = worst.max((lhs - rhs).abs());
        assert!((lhs - rhs).abs() <= 1e-10, "k{k} s{stride} p{pad}: {lhs} vs {rhs}");
        done += 1;
    }
    println!("adjointness: 50 instances, worst gap {worst:.2e}");
}

#[test]
fn conv_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let spec = ConvSpec {
        kernel: (3, 2),
        stride: 2,
        pad: 1,
        out_channels: 2,
    };
    let x = uniform(vec![2, 5, 6], &mut rng);
    let p = LayerParams {
        weights: uniform(vec![2, 2, 3, 2], &mut rng),
        bias: uniform(vec![2], &mut rng),
    };
    let y = run(&LayerSpec::Conv(spec), Some(&p), &x);
    assert_eq!(y.shape(), &[2, 3, 4]);
    for o in 0..2 {
        for oy in 0..3 {
            for ox in 0..4 {
                let mut acc = p.bias.data()[o];
                for c in 0..2 {
                    for ky in 0..3 {
                        for kx in 0..2 {
                            let iy = (oy * 2 + ky) as isize - 1;
                            let ix = (ox * 2 + kx) as isize - 1;
                            if iy < 0 || ix < 0 || iy >= 5 || ix >= 6 {
                                continue;
                            }
                            let wi = ((o * 2 + c) * 3 + ky) * 2 + kx;
                            acc += p.weights.data()[wi] * x.at(c, iy as usize, ix as usize);
                        }
                    }
                }
                assert!((y.at(o, oy, ox) - acc).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn dropout_is_unbiased() {
    let x = Tensor::<f64>::full(vec![1, 40, 50], 1.0);
    let spec = LayerSpec::Dropout { ratio: 0.5 };
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut total = 0.0;
    let rounds = 200;
    for _ in 0..rounds {
        let (y, _) = layers::forward(&spec, None, &x, Mode::Train, &mut rng).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0 || v == 2.0));
        total += y.sum();
    }
    let mean = total / (rounds * x.len()) as f64;
    // 400k Bernoulli(0.5) draws scaled by 2: std of the mean is 1/sqrt(400k)
    assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    let (y, _) = layers::forward(&spec, None, &x, Mode::Test, &mut rng).unwrap();
    assert_eq!(y, x);
}

proptest! {
    #[test]
    fn maxpool_picks_window_maximum(seed in any::<u64>(), c in 1usize..3, oh in 1usize..4, ow in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = uniform(vec![c, oh * 2, ow * 2], &mut rng);
        let y = run(&LayerSpec::pool(2), None, &x);
        for ch in 0..c {
            for i in 0..oh {
                for j in 0..ow {
                    let m = [(0, 0), (0, 1), (1, 0), (1, 1)]
                        .iter()
                        .map(|&(a, b)| x.at(ch, 2 * i + a, 2 * j + b))
                        .fold(f64::NEG_INFINITY, f64::max);
                    prop_assert_eq!(y.at(ch, i, j), m);
                }
            }
        }
    }

    #[test]
    fn relu_is_idempotent(v in prop::collection::vec(-5.0f64..5.0, 1..40)) {
        let x = Tensor::new(vec![v.len()], v).unwrap();
        let once = run(&LayerSpec::Relu, None, &x);
        prop_assert_eq!(run(&LayerSpec::Relu, None, &once), once.clone());
        prop_assert!(once.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn maxout_takes_max_over_contiguous_slices(seed in any::<u64>(), pieces in 2usize..5, units in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = uniform(vec![pieces * units], &mut rng);
        let y = run(&LayerSpec::Maxout { pieces }, None, &x);
        prop_assert_eq!(y.len(), units);
        for u in 0..units {
            let m = (0..pieces).map(|p| x.data()[p * units + u]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(y.data()[u], m);
        }
    }

    #[test]
    fn conv_is_linear_in_its_input(seed in any::<u64>(), a in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = LayerSpec::Conv(ConvSpec::new(3, 2));
        let p = LayerParams { weights: uniform(vec![2, 2, 3, 3], &mut rng), bias: Tensor::zeros(vec![2]) };
        let x1 = uniform(vec![2, 5, 5], &mut rng);
        let x2 = uniform(vec![2, 5, 5], &mut rng);
        let mut combo = x2.clone();
        combo.scale(a);
        combo.add_assign(&x1);
        let mut expect = run(&spec, Some(&p), &x2);
        expect.scale(a);
        expect.add_assign(&run(&spec, Some(&p), &x1));
        prop_assert!(run(&spec, Some(&p), &combo).max_abs_diff(&expect) < 1e-12);
    }
}
