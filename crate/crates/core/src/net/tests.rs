use super::*;

fn random_image(rng: &mut Rng, h: usize, w: usize) -> Map<f32> {
    Map::from_fn(h, w, 3, |_, _, _| rng.next_f32())
}

fn with_random_biases(mut p: ModelParams<f32>, rng: &mut Rng) -> ModelParams<f32> {
    for conv in &mut p.weights.layers {
        conv.bias.iter_mut().for_each(|b| *b = 0.1 * rng.normal());
    }
    p
}

/// Straight-line f64 evaluation of the network, written independently of
/// the layer code: explicit 4D indexing, zero padding by bounds checks.
fn naive_forward(p: &ModelParams<f32>, img: &Map<f32>) -> Vec<f64> {
    let (h, w, _) = img.shape();
    let conv = |input: &Vec<f64>, ih: usize, iw: usize, layer: &Conv<f32>| -> Vec<f64> {
        let (k, cin, cout) = (layer.kernel as isize, layer.cin, layer.cout);
        let mut out = vec![0.0; ih * iw * cout];
        for y in 0..ih as isize {
            for x in 0..iw as isize {
                for co in 0..cout {
                    let mut s = f64::from(layer.bias[co]);
                    for ky in 0..k {
                        for kx in 0..k {
                            let (sy, sx) = (y + ky - k / 2, x + kx - k / 2);
                            if sy < 0 || sx < 0 || sy >= ih as isize || sx >= iw as isize {
                                continue;
                            }
                            for ci in 0..cin {
                                let wi = (((ky * k + kx) as usize * cin) + ci) * cout + co;
                                let xi = ((sy as usize * iw) + sx as usize) * cin + ci;
                                s += f64::from(layer.weight[wi]) * input[xi];
                            }
                        }
                    }
                    out[((y as usize * iw) + x as usize) * cout + co] = s;
                }
            }
        }
        out
    };
    let relu = |v: Vec<f64>| v.into_iter().map(|x| x.max(0.0)).collect::<Vec<_>>();
    let x: Vec<f64> = img.as_slice().iter().map(|&v| f64::from(v)).collect();
    let l = &p.weights.layers;
    let a1 = relu(conv(&x, h, w, &l[0]));
    let (ph, pw) = (h / 2, w / 2);
    let mut pooled = vec![0.0; ph * pw * 16];
    for y in 0..ph {
        for xx in 0..pw {
            for c in 0..16 {
                let at = |yy: usize, xq: usize| a1[(yy * w + xq) * 16 + c];
                pooled[(y * pw + xx) * 16 + c] =
                    (at(2 * y, 2 * xx) + at(2 * y, 2 * xx + 1) + at(2 * y + 1, 2 * xx) + at(2 * y + 1, 2 * xx + 1)) / 4.0;
            }
        }
    }
    let a2 = relu(conv(&pooled, ph, pw, &l[1]));
    let e = relu(conv(&a2, ph, pw, &l[2]));
    let q: Vec<f64> = conv(&e, ph, pw, &l[3]).into_iter().map(|z| 1.0 / (1.0 + (-z).exp())).collect();
    let mut out = vec![0.0; h * w * 2];
    for y in 0..h {
        for xx in 0..w {
            let sy = y as f64 * (ph - 1) as f64 / (h - 1) as f64;
            let sx = xx as f64 * (pw - 1) as f64 / (w - 1) as f64;
            let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
            let (y1, x1) = ((y0 + 1).min(ph - 1), (x0 + 1).min(pw - 1));
            let (fy, fx) = (sy - y0 as f64, sx - x0 as f64);
            for c in 0..2 {
                let g = |a: usize, b: usize| q[(a * pw + b) * 2 + c];
                out[(y * w + xx) * 2 + c] = (1.0 - fy) * ((1.0 - fx) * g(y0, x0) + fx * g(y0, x1))
                    + fy * ((1.0 - fx) * g(y1, x0) + fx * g(y1, x1));
            }
        }
    }
    out
}

#[test]
fn zero_params_give_half() {
    let p = ModelParams {
        weights: Weights::<f32>::zeros(),
        dropout: 0.5,
    };
    let img = random_image(&mut Rng::new(1), 8, 8);
    let out = p.predict(&img).unwrap();
    assert_eq!(out.shape(), (8, 8, 2));
    assert!(out.as_slice().iter().all(|&v| v == 0.5));
}

#[test]
fn matches_naive_oracle() {
    let mut rng = Rng::new(21);
    let p = with_random_biases(init_params(&mut rng, 0.5), &mut rng);
    let img = random_image(&mut rng, 8, 8);
    let out = p.predict(&img).unwrap();
    let oracle = naive_forward(&p, &img);
    for (a, b) in out.as_slice().iter().zip(&oracle) {
        assert!((f64::from(*a) - b).abs() <= 1e-5 * b.abs().max(1e-3), "{a} vs {b}");
    }
}

#[test]
fn odd_input_is_a_shape_error() {
    let p = init_params(&mut Rng::new(1), 0.5);
    let img = random_image(&mut Rng::new(1), 9, 8);
    assert!(matches!(p.predict(&img), Err(Error::Shape(_))));
}

#[test]
fn eval_is_deterministic_and_dropout_zero_matches_eval() {
    let mut rng = Rng::new(5);
    let mut p = init_params(&mut rng, 0.5);
    let img = random_image(&mut rng, 16, 16);
    assert_eq!(p.predict(&img).unwrap(), p.predict(&img).unwrap());
    p.dropout = 0.0;
    let eval = p.predict(&img).unwrap();
    let mc = p.forward(&img, Mode::Mc(&mut rng)).unwrap().prob;
    assert_eq!(eval, mc);
    let maps = mc_passes(&p, &img, 4, &mut rng).unwrap();
    assert!(maps.iter().all(|m| *m == eval));
}

#[test]
fn mc_passes_are_seeded_and_vary() {
    let mut rng = Rng::new(6);
    let p = init_params(&mut rng, 0.5);
    let img = random_image(&mut rng, 16, 16);
    let a = mc_passes(&p, &img, 10, &mut Rng::new(99)).unwrap();
    let b = mc_passes(&p, &img, 10, &mut Rng::new(99)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a[0], a[1]);
    assert!(mc_passes(&p, &img, 1, &mut Rng::new(1)).is_err());
}

#[test]
fn init_rule() {
    let mut rng = Rng::new(8);
    let mut draws = Vec::new();
    for _ in 0..24 {
        let p = init_params(&mut rng, 0.5);
        assert!(p.weights.layers.iter().all(|c| c.bias.iter().all(|&b| b == 0.0)));
        draws.extend(p.weights.layers[0].weight.iter().map(|&v| f64::from(v)));
    }
    assert!(draws.len() >= 10_000);
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let std = (draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let expected = (2.0f64 / 27.0).sqrt();
    assert!((std / expected - 1.0).abs() < 0.05, "std {std} vs {expected}");
    assert_eq!(init_params(&mut Rng::new(3), 0.5), init_params(&mut Rng::new(3), 0.5));
}

#[test]
fn zero_upstream_gradient_gives_zero_gradients() {
    let mut rng = Rng::new(7);
    let p = init_params(&mut rng, 0.5);
    let img = random_image(&mut rng, 8, 8);
    let out = p.forward(&img, Mode::Train(&mut rng)).unwrap();
    let g = p.backward(&out.cache, &Map::zeros(8, 8, 2)).unwrap();
    assert!(g.slices().flatten().all(|&v| v == 0.0));
    assert!(p.backward(&out.cache, &Map::zeros(8, 8, 3)).is_err());
}

#[test]
fn dropped_channel_blocks_conv2_gradient() {
    let mut rng = Rng::new(9);
    let p = with_random_biases(init_params(&mut rng, 0.5), &mut rng);
    let img = random_image(&mut rng, 8, 8);
    let blocked = 5;
    let mask = Map::from_fn(4, 4, 32, |_, _, k| u8::from(k != blocked));
    let out = p.forward(&img, Mode::Masked(&mask)).unwrap();
    let upstream = Map::from_fn(8, 8, 2, |_, _, _| rng.normal());
    let g = p.backward(&out.cache, &upstream).unwrap();
    let conv2 = &g.layers[1];
    assert_eq!(conv2.bias[blocked], 0.0);
    for (i, &v) in conv2.weight.iter().enumerate() {
        if i % 32 == blocked {
            assert_eq!(v, 0.0);
        }
    }
    assert!(conv2.weight.iter().any(|&v| v != 0.0));
}

#[test]
fn inverted_dropout_preserves_expectation() {
    // E[dropout(a)] = a. The summed dropout output is checked against a
    // 3-sigma Monte Carlo band over 10^4 masks.
    let mut rng = Rng::new(10);
    let p = init_params(&mut rng, 0.5);
    let img = random_image(&mut rng, 8, 8);
    let eval = p.forward(&img, Mode::Eval).unwrap().cache.dropped;
    let target: f64 = eval.as_slice().iter().map(|&v| f64::from(v)).sum();
    // each element is 0 or 2a with equal probability, so var = a^2
    let sigma_one: f64 = eval.as_slice().iter().map(|&v| f64::from(v).powi(2)).sum::<f64>().sqrt();
    let n = 10_000;
    let mut total = 0.0;
    for _ in 0..n {
        let out = p.forward(&img, Mode::Train(&mut rng)).unwrap();
        total += out.cache.dropped.as_slice().iter().map(|&v| f64::from(v)).sum::<f64>();
    }
    let mean = total / n as f64;
    let sigma = sigma_one / (n as f64).sqrt();
    assert!(target > 0.0);
    assert!((mean - target).abs() <= 3.0 * sigma, "{mean} vs {target} (sigma {sigma})");
}

#[test]
fn finite_difference_spot_check() {
    let mut rng = Rng::new(12);
    let p32 = with_random_biases(init_params(&mut rng, 0.5), &mut rng);
    let p: ModelParams<f64> = p32.cast();
    let img = random_image(&mut rng, 8, 8).cast::<f64>();
    let mask = Map::from_fn(4, 4, 32, |_, _, _| u8::from(rng.bernoulli(0.5)));
    let r = Map::from_fn(8, 8, 2, |_, _, _| f64::from(rng.normal()));
    let loss = |p: &ModelParams<f64>| -> f64 {
        let out = p.forward(&img, Mode::Masked(&mask)).unwrap();
        out.prob.as_slice().iter().zip(r.as_slice()).map(|(a, b)| a * b).sum()
    };
    let out = p.forward(&img, Mode::Masked(&mask)).unwrap();
    let g = p.backward(&out.cache, &r).unwrap();
    let h = 1e-4;
    for layer in 0..4 {
        let mut q = p.clone();
        q.weights.layers[layer].bias[0] += h;
        let up = loss(&q);
        q.weights.layers[layer].bias[0] -= 2.0 * h;
        let down = loss(&q);
        let fd = (up - down) / (2.0 * h);
        let an = g.layers[layer].bias[0];
        assert!((fd - an).abs() <= 1e-6 + 1e-4 * an.abs(), "layer {layer}: {fd} vs {an}");
    }
}
