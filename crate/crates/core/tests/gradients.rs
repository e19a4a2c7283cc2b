//! Analytic gradients against central finite differences in f64.

use lungnet::nn::{build_transfer_model, Backbone, BackwardMode, Layer, LayerKind, Model, Tensor, TINYNET_FEATURE_GAIN};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-6;
const SHAPES: u64 = 24;

fn rel_err(a: &[f64], n: &[f64]) -> f64 {
    let diff = a.iter().zip(n).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = a.iter().chain(n).map(|v| v.abs()).fold(0.0, f64::max);
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn projection(layer: &Layer<f64>, x: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    let y = layer.forward(x).unwrap().0;
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn central(mut f: impl FnMut(f64) -> f64) -> f64 {
    (f(H) - f(-H)) / (2.0 * H)
}

/// Checks input and parameter gradients of a single layer on loss `sum(r * y)`.
fn check_layer(layer: &Layer<f64>, x: &Tensor<f64>, rng: &mut ChaCha8Rng) -> f64 {
    let (y, cache) = layer.forward(x).unwrap();
    let r = random_tensor(rng, y.shape().to_vec());
    let (gx, gp) = layer
        .backward(x, &y, &cache, &r, BackwardMode::Standard, true, true)
        .unwrap();
    let gx = gx.unwrap();
    let mut worst = 0.0f64;

    let numeric: Vec<f64> = (0..x.len())
        .map(|i| {
            central(|d| {
                let mut xp = x.clone();
                xp.data_mut()[i] += d;
                projection(layer, &xp, &r)
            })
        })
        .collect();
    worst = worst.max(rel_err(gx.data(), &numeric));

    for (p, g) in gp.iter().enumerate() {
        let numeric: Vec<f64> = (0..g.len())
            .map(|i| {
                central(|d| {
                    let mut params = layer.params().to_vec();
                    params[p].data_mut()[i] += d;
                    let l = layer.clone().with_params(params).unwrap();
                    projection(&l, x, &r)
                })
            })
            .collect();
        worst = worst.max(rel_err(g.data(), &numeric));
    }
    worst
}

fn with_random_params(layer: Layer<f64>, rng: &mut ChaCha8Rng) -> Layer<f64> {
    let params = layer
        .kind()
        .param_shapes()
        .into_iter()
        .map(|s| random_tensor(rng, s))
        .collect();
    layer.with_params(params).unwrap()
}

#[test]
fn conv2d_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..SHAPES {
        let (kh, kw) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let kind = LayerKind::Conv2d {
            in_channels: rng.gen_range(1..=3),
            out_channels: rng.gen_range(1..=3),
            kernel: (kh, kw),
            stride: rng.gen_range(1..=2),
            padding: rng.gen_range(0..=1),
        };
        let LayerKind::Conv2d { in_channels, .. } = kind else { unreachable!() };
        let layer = with_random_params(Layer::new(kind), &mut rng);
        let shape = vec![rng.gen_range(1..=2), in_channels, kh + rng.gen_range(0..5), kw + rng.gen_range(0..5)];
        let x = random_tensor(&mut rng, shape.clone());
        let e = check_layer(&layer, &x, &mut rng);
        assert!(e < TOL, "conv {kind:?} on {shape:?}: relative error {e:e}");
    }
}

#[test]
fn dense_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..SHAPES {
        let (i, o) = (rng.gen_range(1..=12), rng.gen_range(1..=8));
        let layer = with_random_params(Layer::dense(i, o), &mut rng);
        let batch = rng.gen_range(1..=4);
        let x = random_tensor(&mut rng, vec![batch, i]);
        let e = check_layer(&layer, &x, &mut rng);
        assert!(e < TOL, "dense {i}->{o}: relative error {e:e}");
    }
}

#[test]
fn relu_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..SHAPES {
        let shape = vec![rng.gen_range(1..=3), rng.gen_range(1..=3), rng.gen_range(1..=5), rng.gen_range(1..=5)];
        let n = shape.iter().product();
        // keep inputs away from the kink at zero
        let data = (0..n)
            .map(|_| {
                let v: f64 = rng.gen_range(0.05..1.0);
                if rng.gen() {
                    v
                } else {
                    -v
                }
            })
            .collect();
        let x = Tensor::new(shape.clone(), data).unwrap();
        let e = check_layer(&Layer::relu(), &x, &mut rng);
        assert!(e < TOL, "relu on {shape:?}: relative error {e:e}");
    }
}

#[test]
fn maxpool_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..SHAPES {
        let size = rng.gen_range(1..=3);
        let stride = rng.gen_range(1..=3);
        let shape = vec![
            rng.gen_range(1..=2),
            rng.gen_range(1..=3),
            size + rng.gen_range(0..5),
            size + rng.gen_range(0..5),
        ];
        let n: usize = shape.iter().product();
        // distinct values spaced far wider than the step so no argmax flips
        let mut values: Vec<f64> = (0..n).map(|i| i as f64 * 0.01).collect();
        use rand::seq::SliceRandom;
        values.shuffle(&mut rng);
        let x = Tensor::new(shape.clone(), values).unwrap();
        let e = check_layer(&Layer::max_pool(size, stride), &x, &mut rng);
        assert!(e < TOL, "maxpool {size}/{stride} on {shape:?}: relative error {e:e}");
    }
}

#[test]
fn global_avg_pool_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..SHAPES {
        let shape = vec![rng.gen_range(1..=3), rng.gen_range(1..=4), rng.gen_range(1..=6), rng.gen_range(1..=6)];
        let x = random_tensor(&mut rng, shape.clone());
        let e = check_layer(&Layer::global_avg_pool(), &x, &mut rng);
        assert!(e < TOL, "gap on {shape:?}: relative error {e:e}");
    }
}

#[test]
fn sigmoid_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..SHAPES {
        let shape = vec![rng.gen_range(1..=4), rng.gen_range(1..=6)];
        let n: usize = shape.iter().product();
        let x = Tensor::new(shape.clone(), (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect()).unwrap();
        let e = check_layer(&Layer::sigmoid(), &x, &mut rng);
        assert!(e < TOL, "sigmoid on {shape:?}: relative error {e:e}");
    }
}

const PROBES: usize = 8;
const PROBE_ATTEMPTS: usize = 64;

/// Sign of every ReLU input and the winning offset of every max-pool window.
fn kink_pattern(model: &Model<f64>, x: &Tensor<f64>) -> Vec<usize> {
    let (_, record) = model.forward(x).unwrap();
    let mut pattern = Vec::new();
    for (i, layer) in model.layers().iter().enumerate() {
        let a = record.activation(i).unwrap();
        match layer.kind() {
            LayerKind::Relu => pattern.extend(a.data().iter().map(|&v| (v > 0.0) as usize)),
            LayerKind::MaxPool2d { size, stride } => {
                let s = a.shape();
                let (planes, h, w) = (s[0] * s[1], s[2], s[3]);
                for plane in a.data().chunks(h * w).take(planes) {
                    for oy in 0..(h - size) / stride + 1 {
                        for ox in 0..(w - size) / stride + 1 {
                            let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
                            for k in 0..size * size {
                                let v = plane[(oy * stride + k / size) * w + ox * stride + k % size];
                                if v > best {
                                    best = v;
                                    arg = k;
                                }
                            }
                            pattern.push(arg);
                        }
                    }
                }
            }
            _ => {}
        }
    }
    pattern
}

fn model_projection(model: &Model<f64>, x: &Tensor<f64>, r: &[f64]) -> f64 {
    let p = model.infer(x).unwrap().probabilities;
    p.data().iter().zip(r).map(|(a, b)| a * b).sum()
}

#[test]
fn tinynet_composite_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..SHAPES {
        let shape = [rng.gen_range(1..=2), rng.gen_range(38..=44), rng.gen_range(38..=44)];
        let mut model = build_transfer_model(Backbone::<f64>::tinynet(shape, case), false, case + 100).unwrap();
        // nonzero biases so every parameter tensor carries signal; the last kernel is
        // brought back to unit gain so the sigmoid stays out of saturation
        let last_conv = model.last_conv().unwrap();
        for i in 0..model.len() {
            if model.layers()[i].params().is_empty() {
                continue;
            }
            let mut params = model.layers()[i].params().to_vec();
            for v in params[1].data_mut() {
                *v = rng.gen_range(0.0..0.1);
            }
            if i == last_conv {
                params[0].data_mut().iter_mut().for_each(|v| *v /= TINYNET_FEATURE_GAIN);
            }
            model.layer_mut(i).set_params(params).unwrap();
        }
        let n = rng.gen_range(1..=2);
        let x = Tensor::new(
            vec![n, shape[0], shape[1], shape[2]],
            (0..n * shape.iter().product::<usize>()).map(|_| rng.gen_range(0.0..1.0)).collect(),
        )
        .unwrap();
        let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, record) = model.forward(&x).unwrap();
        let grads = model.backward(&record, &Tensor::new(vec![n], r.clone()).unwrap()).unwrap();
        // central differences are only meaningful when +h and -h land in the same
        // linear piece of every ReLU and max-pool
        let fd = |plus: (&Model<f64>, &Tensor<f64>), minus: (&Model<f64>, &Tensor<f64>)| -> Option<f64> {
            (kink_pattern(plus.0, plus.1) == kink_pattern(minus.0, minus.1))
                .then(|| (model_projection(plus.0, plus.1, &r) - model_projection(minus.0, minus.1, &r)) / (2.0 * H))
        };

        let gx = grads.input.unwrap();
        let (mut analytic, mut numeric) = (Vec::new(), Vec::new());
        for _ in 0..PROBE_ATTEMPTS {
            let i = rng.gen_range(0..x.len());
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp.data_mut()[i] += H;
            xm.data_mut()[i] -= H;
            if let Some(v) = fd((&model, &xp), (&model, &xm)) {
                analytic.push(gx.data()[i]);
                numeric.push(v);
            }
            if analytic.len() == PROBES {
                break;
            }
        }
        assert!(analytic.len() >= PROBES / 2, "case {case}: too many probes straddle a kink");
        let e = rel_err(&analytic, &numeric);
        assert!(e < TOL, "case {case} {shape:?}: input relative error {e:e}");

        for layer in 0..model.len() {
            for (p, g) in grads.params[layer].iter().enumerate() {
                let shifted = |i: usize, d: f64| {
                    let mut m = model.clone();
                    let mut params = m.layers()[layer].params().to_vec();
                    params[p].data_mut()[i] += d;
                    m.layer_mut(layer).set_params(params).unwrap();
                    m
                };
                let (mut analytic, mut numeric) = (Vec::new(), Vec::new());
                for _ in 0..PROBE_ATTEMPTS {
                    let i = rng.gen_range(0..g.len());
                    if let Some(v) = fd((&shifted(i, H), &x), (&shifted(i, -H), &x)) {
                        analytic.push(g.data()[i]);
                        numeric.push(v);
                    }
                    if analytic.len() == PROBES.min(g.len()) {
                        break;
                    }
                }
                assert!(!analytic.is_empty(), "case {case}: every probe of layer {layer} straddles a kink");
                let e = rel_err(&analytic, &numeric);
                assert!(e < TOL, "case {case} {shape:?}: layer {layer} param {p} relative error {e:e}");
            }
        }
    }
}

#[test]
fn zero_upstream_gives_zero_parameter_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let model = build_transfer_model(Backbone::<f64>::tinynet([1, 40, 40], 1), false, 2).unwrap();
    let x = random_tensor(&mut rng, vec![2, 1, 40, 40]);
    let (_, record) = model.forward(&x).unwrap();
    let grads = model.backward(&record, &Tensor::zeros(vec![2])).unwrap();
    for g in grads.params.iter().flatten() {
        assert!(g.data().iter().all(|&v| v == 0.0));
    }
    assert!(grads.input.unwrap().data().iter().all(|&v| v == 0.0));
}

#[test]
fn dead_relu_blocks_input_gradient() {
    let x = Tensor::new(vec![1, 4], vec![-1.0, -0.5, -2.0, -0.1]).unwrap();
    let layer = Layer::<f64>::relu();
    let (y, c) = layer.forward(&x).unwrap();
    let gy = Tensor::full(vec![1, 4], 1.0);
    let gx = layer.backward(&x, &y, &c, &gy, BackwardMode::Standard, true, false).unwrap().0.unwrap();
    assert!(gx.data().iter().all(|&v| v == 0.0));
}
