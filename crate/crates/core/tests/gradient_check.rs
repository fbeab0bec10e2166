mod common;

use common::{check_layer, check_network, random_input, randomize_params, GradReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sirentrack::nn::{Layer, LayerSpec, Network, NetworkSpec, Tensor1D};

const H: f64 = 1e-3;
const TOL: f64 = 1e-4;

fn layer(spec: LayerSpec, channels: usize, features: usize, seed: u64) -> Layer<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut l = Layer::<f64>::init(&spec, channels, features, &mut rng);
    for blob in l.params_mut() {
        for v in blob.iter_mut() {
            *v = common::normal(&mut rng, 0.1);
        }
    }
    l
}

/// Input with every element at least 0.05 away from zero so ReLU switches
/// sit outside the probe step.
fn signed_input(channels: usize, len: usize, seed: u64) -> Tensor1D<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..channels * len)
        .map(|_| {
            let m: f64 = rng.random_range(0.05..1.0);
            if rng.random::<bool>() {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor1D::from_vec(channels, len, data)
}

fn assert_clean(name: &str, r: &GradReport) {
    for k in &r.kinks {
        eprintln!("{name}: kink {k}");
    }
    assert!(
        r.failures.is_empty(),
        "{name}: {:?}",
        &r.failures[..r.failures.len().min(5)]
    );
    assert!(r.checked > 0);
}

#[test]
fn conv1d_strided() {
    let l = layer(
        LayerSpec::Conv1d {
            filters: 3,
            kernel: 5,
            stride: 2,
        },
        2,
        0,
        1,
    );
    let r = check_layer(&l, &random_input(2, 41, 2), None, H, TOL);
    assert_clean("conv1d s2", &r);
    assert_eq!(r.passed, r.checked);
}

#[test]
fn conv1d_unit_stride_and_wide_stride() {
    for (k, s, len) in [(3, 1, 20), (4, 3, 29), (1, 1, 7)] {
        let l = layer(
            LayerSpec::Conv1d {
                filters: 2,
                kernel: k,
                stride: s,
            },
            3,
            0,
            k as u64,
        );
        let r = check_layer(&l, &random_input(3, len, 9), None, H, TOL);
        assert_clean("conv1d", &r);
        assert_eq!(r.passed, r.checked);
    }
}

#[test]
fn maxpool_odd_length() {
    let l = Layer::<f64>::MaxPool1d { window: 2 };
    let r = check_layer(&l, &random_input(3, 17, 3), None, H, TOL);
    assert_clean("maxpool", &r);
}

#[test]
fn global_average_pool() {
    let r = check_layer(&Layer::<f64>::GlobalAvgPool, &random_input(4, 13, 4), None, H, TOL);
    assert_clean("gap", &r);
    assert_eq!(r.passed, r.checked);
}

#[test]
fn dense() {
    let l = layer(LayerSpec::Dense { units: 5 }, 7, 7, 5);
    let r = check_layer(&l, &random_input(7, 1, 6), None, H, TOL);
    assert_clean("dense", &r);
    assert_eq!(r.passed, r.checked);
}

#[test]
fn relu() {
    let r = check_layer(&Layer::<f64>::Relu, &signed_input(3, 20, 7), None, H, TOL);
    assert_clean("relu", &r);
    assert_eq!(r.passed, r.checked);
}

#[test]
fn dropout_with_fixed_mask() {
    let l = Layer::<f64>::Dropout { p: 0.25 };
    let x = random_input(10, 1, 8);
    let r = check_layer(&l, &x, Some(42), H, TOL);
    assert_clean("dropout", &r);
    assert_eq!(r.passed, r.checked);
    // the mask actually drops something
    let (y, _) = l.forward_tape(&x, Some(&mut ChaCha8Rng::seed_from_u64(42))).unwrap();
    assert!(y.data().contains(&0.0));
    assert!(y.data().iter().any(|&v| v != 0.0));
}

#[test]
fn sigmoid() {
    let r = check_layer(&Layer::<f64>::Sigmoid, &signed_input(1, 6, 10), None, H, TOL);
    assert_clean("sigmoid", &r);
    assert_eq!(r.passed, r.checked);
}

#[test]
fn composed_network_both_targets() {
    // 128 samples: the shortest input the stack accepts is 102
    let mut net: Network<f64> = Network::new(NetworkSpec::anfnet(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    randomize_params(&mut net, 11);
    let x = random_input(2, 128, 12);
    for target in [0.0, 1.0] {
        let r = check_network(&net, &x, target, H, TOL);
        for k in &r.kinks {
            eprintln!("network t={target}: kink {k}");
        }
        assert_eq!(r.checked, 7671);
        assert!(r.failures.is_empty(), "{:?}", &r.failures[..r.failures.len().min(5)]);
        eprintln!(
            "network t={target}: {} of {} within tolerance ({:.4}), {} kinks",
            r.passed,
            r.checked,
            r.raw_fraction(),
            r.kinks.len()
        );
        assert!(
            r.kinks.len() * 100 <= r.checked,
            "implausibly many kinks: {}",
            r.kinks.len()
        );
        assert!(r.pass_fraction() >= 0.999, "pass fraction {}", r.pass_fraction());
    }
}

#[test]
fn f32_and_f64_backward_agree() {
    let mut net64: Network<f64> = Network::new(NetworkSpec::anfnet(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    randomize_params(&mut net64, 4);
    let net32: Network<f32> = net64.cast();
    let x64 = random_input(2, 300, 5);
    let x32: Tensor1D<f32> = x64.cast();
    let g64 = net64.backward(&net64.forward_eval(&x64).unwrap(), 1.0).unwrap();
    let g32 = net32.backward(&net32.forward_eval(&x32).unwrap(), 1.0).unwrap();
    for (a, b) in g64.iter().flatten().zip(g32.iter().flatten()) {
        assert!((a - f64::from(*b)).abs() <= 1e-4 * a.abs().max(1e-3), "{a} vs {b}");
    }
}
