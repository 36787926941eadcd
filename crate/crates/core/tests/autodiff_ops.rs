use listaformer_core::autodiff::{grad_check, Graph, Result, Tensor, TensorError, Var, DEFAULT_FD_STEP};
use listaformer_core::XorShift64Star;

fn random(rng: &mut XorShift64Star, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gaussian(0.0, 1.0)).collect()).unwrap()
}

/// Random weighting makes the scalar loss depend on every output entry with
/// an O(1) gradient.
fn weighted_sum(g: &mut Graph, y: Var, seed: u64) -> Result<Var> {
    let mut rng = XorShift64Star::new(seed);
    let w = random(&mut rng, g.value(y).shape());
    let w = g.constant(w);
    let p = g.mul(y, w)?;
    Ok(g.sum(p))
}

fn check(inputs: &[Tensor], build: impl Fn(&mut Graph, &[Var]) -> Result<Var>) -> f64 {
    grad_check::<_, TensorError>(inputs, build, DEFAULT_FD_STEP).unwrap()
}

/// Entries at least `gap` away from every point in `kinks` (relative to
/// each entry's column threshold).
fn away_from_kinks(rng: &mut XorShift64Star, shape: &[usize], theta: &[f64], gap: f64) -> Tensor {
    let d = *shape.last().unwrap();
    loop {
        let t = random(rng, shape);
        let ok = t.data().iter().enumerate().all(|(i, &v)| {
            let th = theta[i % d];
            (v.abs() - th).abs() >= gap && v.abs() >= gap
        });
        if ok {
            return t;
        }
    }
}

#[test]
fn softmax_of_uniform_logits() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::vector(vec![0.3; 4]));
    let y = g.softmax(x);
    for &p in g.value(y).data() {
        assert!((p - 0.25).abs() < 1e-15);
    }
}

#[test]
fn softmax_rows_sum_to_one() {
    let mut rng = XorShift64Star::new(4);
    let mut g = Graph::new();
    let x = g.constant(random(&mut rng, &[6, 9]).map(|v| 30.0 * v));
    let y = g.softmax(x);
    for r in 0..6 {
        let row = g.value(y).row(r);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(row.iter().all(|&p| p > 0.0 && p < 1.0));
    }
}

#[test]
fn cross_entropy_of_uniform_logits_is_log_c() {
    for classes in [2usize, 4, 7] {
        for label in 0..classes {
            let mut g = Graph::new();
            let x = g.constant(Tensor::vector(vec![-1.5; classes]));
            let l = g.cross_entropy(x, label).unwrap();
            assert!((g.value(l).item() - (classes as f64).ln()).abs() < 1e-14);
        }
    }
}

#[test]
fn cross_entropy_is_stable_for_huge_logits() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::vector(vec![1000.0, 0.0, -1000.0]));
    let l = g.cross_entropy(x, 1).unwrap();
    assert!((g.value(l).item() - 1000.0).abs() < 1e-9);
}

#[test]
fn layernorm_standardizes_rows() {
    let mut rng = XorShift64Star::new(9);
    let d = 16;
    let mut g = Graph::new();
    let x = g.constant(random(&mut rng, &[5, d]).map(|v| 3.0 * v + 2.0));
    let gain = g.constant(Tensor::full(&[d], 1.0));
    let bias = g.constant(Tensor::zeros(&[d]));
    let y = g.layernorm(x, gain, bias).unwrap();
    for r in 0..5 {
        let src = g.value(x).row(r);
        let m = src.iter().sum::<f64>() / d as f64;
        let var = src.iter().map(|v| (v - m).powi(2)).sum::<f64>() / d as f64;
        let row = g.value(y).row(r);
        let mean = row.iter().sum::<f64>() / d as f64;
        let out_var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
        assert!(mean.abs() < 1e-9);
        // ε in the denominator shrinks the variance to var/(var+ε).
        let expected = var / (var + listaformer_core::autodiff::LAYERNORM_EPS);
        assert!((out_var - expected).abs() < 1e-9, "{out_var} vs {expected}");
        assert!((out_var - 1.0).abs() < 1e-4);
    }
}

#[test]
fn backward_of_sum_is_ones() {
    let mut g = Graph::new();
    let x = g.param(Tensor::matrix(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.0, 7.0]).unwrap());
    let s = g.sum(x);
    g.backward(s).unwrap();
    assert_eq!(g.grad(x).unwrap().data(), &[1.0; 6]);
}

#[test]
fn backward_of_half_square_norm_is_identity() {
    let data = vec![0.3, -1.2, 2.5, 4.0];
    let mut g = Graph::new();
    let x = g.param(Tensor::vector(data.clone()));
    let sq = g.mul(x, x).unwrap();
    let s = g.sum(sq);
    let half = g.scale(s, 0.5);
    g.backward(half).unwrap();
    assert_eq!(g.grad(x).unwrap().data(), &data[..]);
}

#[test]
fn non_scalar_loss_is_rejected() {
    let mut g = Graph::new();
    let x = g.param(Tensor::vector(vec![1.0, 2.0]));
    assert_eq!(g.backward(x), Err(TensorError::NonScalarLoss(vec![2])));
}

#[test]
fn shape_errors_report_both_shapes() {
    let mut g = Graph::new();
    let a = g.constant(Tensor::zeros(&[2, 3]));
    let b = g.constant(Tensor::zeros(&[2, 3]));
    let err = g.matmul(a, b).unwrap_err();
    assert_eq!(
        err,
        TensorError::ShapeMismatch {
            op: "matmul",
            lhs: vec![2, 3],
            rhs: vec![2, 3]
        }
    );
    assert!(err.to_string().contains("[2, 3] and [2, 3]"));
    let c = g.constant(Tensor::zeros(&[3]));
    assert!(g.add(a, c).is_err());
    assert!(g.cross_entropy(c, 3).is_err());
}

#[test]
fn shared_subexpression_matches_expanded_graph() {
    let mut rng = XorShift64Star::new(77);
    let x0 = random(&mut rng, &[3, 4]);
    let w0 = random(&mut rng, &[4, 4]);

    // y = tanh-free composite with `h` used three times.
    let mut g = Graph::new();
    let x = g.param(x0.clone());
    let w = g.param(w0.clone());
    let h = g.matmul(x, w).unwrap();
    let h = g.gelu(h);
    let a = g.mul(h, h).unwrap();
    let b = g.add(a, h).unwrap();
    let l = g.sum(b);
    g.backward(l).unwrap();

    let mut e = Graph::new();
    let x2 = e.param(x0);
    let w2 = e.param(w0);
    let h1 = e.matmul(x2, w2).unwrap();
    let h1 = e.gelu(h1);
    let h2 = e.matmul(x2, w2).unwrap();
    let h2 = e.gelu(h2);
    let h3 = e.matmul(x2, w2).unwrap();
    let h3 = e.gelu(h3);
    let a = e.mul(h1, h2).unwrap();
    let b = e.add(a, h3).unwrap();
    let l2 = e.sum(b);
    e.backward(l2).unwrap();

    assert_eq!(g.value(l).item(), e.value(l2).item());
    assert!(g.grad(x).unwrap().max_abs_diff(&e.grad(x2).unwrap()) < 1e-12);
    assert!(g.grad(w).unwrap().max_abs_diff(&e.grad(w2).unwrap()) < 1e-12);
}

#[test]
fn deterministic_forward_and_backward() {
    let run = || {
        let mut rng = XorShift64Star::new(5);
        let mut g = Graph::new();
        let x = g.param(random(&mut rng, &[4, 6]));
        let w = g.param(random(&mut rng, &[6, 3]));
        let h = g.matmul(x, w).unwrap();
        let s = g.softmax(h);
        let l = g.mean(s);
        let l = g.scale(l, 3.0);
        g.backward(l).unwrap();
        (g.value(s).clone(), g.grad(x).unwrap(), g.grad(w).unwrap())
    };
    assert_eq!(run(), run());
}

#[test]
fn grad_check_linear_map_is_exact() {
    // Central differences have no truncation error on a linear map, so a
    // coarse power-of-two step keeps roundoff far below the tolerance.
    let mut rng = XorShift64Star::new(1);
    let w = random(&mut rng, &[5, 2]);
    let err = grad_check::<_, TensorError>(
        &[random(&mut rng, &[3, 5])],
        move |g, v| {
            let w = g.constant(w.clone());
            let y = g.matmul(v[0], w)?;
            weighted_sum(g, y, 10)
        },
        1.0 / 1024.0,
    )
    .unwrap();
    assert!(err < 1e-9, "{err}");
}

#[test]
fn grad_check_softmax_cross_entropy() {
    let mut rng = XorShift64Star::new(2);
    for label in 0..4 {
        let err = check(&[random(&mut rng, &[4])], |g, v| g.cross_entropy(v[0], label));
        assert!(err < 1e-6, "{err}");
    }
}

#[test]
fn grad_check_soft_threshold_off_kink() {
    let mut rng = XorShift64Star::new(3);
    let theta = vec![0.2, 0.5, 0.0, 1.0, 0.7];
    let x = away_from_kinks(&mut rng, &[4, 5], &theta, 0.1);
    let err = check(&[x, Tensor::vector(theta)], |g, v| {
        let y = g.soft_threshold(v[0], v[1])?;
        weighted_sum(g, y, 11)
    });
    assert!(err < 1e-6, "{err}");
}

#[test]
fn soft_threshold_values() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::vector(vec![1.2, -1.2, 0.3, 0.0]));
    let t = g.constant(Tensor::vector(vec![0.5; 4]));
    let y = g.soft_threshold(x, t).unwrap();
    let out = g.value(y).data();
    assert!((out[0] - 0.7).abs() < 1e-15);
    assert!((out[1] + 0.7).abs() < 1e-15);
    assert_eq!(&out[2..], &[0.0, 0.0]);
}

/// Every primitive, each at several random points.
#[test]
fn grad_check_every_primitive() {
    let tol = 1e-4;
    for seed in 0..5u64 {
        let mut rng = XorShift64Star::new(100 + seed);
        let a = random(&mut rng, &[3, 4]);
        let b = random(&mut rng, &[3, 4]);
        let m = random(&mut rng, &[4, 2]);
        let bias = random(&mut rng, &[4]);
        let s = Tensor::scalar(rng.gaussian(0.0, 1.0));
        let ws = 1000 + seed;

        let cases: Vec<(&str, Vec<Tensor>, Box<dyn Fn(&mut Graph, &[Var]) -> Result<Var>>)> = vec![
            ("matmul", vec![a.clone(), m.clone()], Box::new(move |g, v| {
                let y = g.matmul(v[0], v[1])?;
                weighted_sum(g, y, ws)
            })),
            ("add", vec![a.clone(), b.clone()], Box::new(move |g, v| {
                let y = g.add(v[0], v[1])?;
                weighted_sum(g, y, ws)
            })),
            ("sub", vec![a.clone(), b.clone()], Box::new(move |g, v| {
                let y = g.sub(v[0], v[1])?;
                weighted_sum(g, y, ws)
            })),
            ("mul", vec![a.clone(), b.clone()], Box::new(move |g, v| {
                let y = g.mul(v[0], v[1])?;
                weighted_sum(g, y, ws)
            })),
            ("add_bias", vec![a.clone(), bias.clone()], Box::new(move |g, v| {
                let y = g.add_bias(v[0], v[1])?;
                weighted_sum(g, y, ws)
            })),
            ("scale", vec![a.clone()], Box::new(move |g, v| {
                let y = g.scale(v[0], -1.7);
                weighted_sum(g, y, ws)
            })),
            ("scale_by", vec![a.clone(), s.clone()], Box::new(move |g, v| {
                let y = g.scale_by(v[0], v[1])?;
                weighted_sum(g, y, ws)
            })),
            ("transpose", vec![a.clone()], Box::new(move |g, v| {
                let y = g.transpose(v[0])?;
                weighted_sum(g, y, ws)
            })),
            ("reshape", vec![a.clone()], Box::new(move |g, v| {
                let y = g.reshape(v[0], &[2, 6])?;
                weighted_sum(g, y, ws)
            })),
            ("concat0", vec![a.clone(), b.clone()], Box::new(move |g, v| {
                let y = g.concat(&[v[0], v[1], v[0]], 0)?;
                weighted_sum(g, y, ws)
            })),
            ("concat1", vec![a.clone(), m.clone()], Box::new(move |g, v| {
                let t = g.transpose(v[1])?;
                let t = g.reshape(t, &[4, 2])?;
                let t = g.transpose(t)?;
                let t = g.concat(&[t, t], 0)?;
                let t = g.slice(t, 0, 0, 3)?;
                let y = g.concat(&[v[0], t], 1)?;
                weighted_sum(g, y, ws)
            })),
            ("slice", vec![a.clone()], Box::new(move |g, v| {
                let y = g.slice(v[0], 1, 1, 3)?;
                weighted_sum(g, y, ws)
            })),
            ("gelu", vec![a.clone()], Box::new(move |g, v| {
                let y = g.gelu(v[0]);
                weighted_sum(g, y, ws)
            })),
            ("softmax", vec![a.clone()], Box::new(move |g, v| {
                let y = g.softmax(v[0]);
                weighted_sum(g, y, ws)
            })),
            ("layernorm", vec![a.clone(), bias.clone(), bias.map(|x| 0.5 * x)], Box::new(move |g, v| {
                let y = g.layernorm(v[0], v[1], v[2])?;
                weighted_sum(g, y, ws)
            })),
            ("mean", vec![a.clone()], Box::new(move |g, v| {
                let y = g.mul(v[0], v[0])?;
                Ok(g.mean(y))
            })),
            ("cross_entropy", vec![bias.clone()], Box::new(move |g, v| g.cross_entropy(v[0], 2))),
        ];
        for (name, inputs, build) in cases {
            let err = check(&inputs, build);
            assert!(err < tol, "{name} seed {seed}: {err}");
        }

        let x = away_from_kinks(&mut rng, &[3, 4], &[0.0; 4], 1e-3);
        let err = check(&[x], move |g, v| {
            let y = g.relu(v[0]);
            weighted_sum(g, y, ws)
        });
        assert!(err < tol, "relu seed {seed}: {err}");

        let theta: Vec<f64> = (0..4).map(|_| rng.uniform(0.05, 0.8)).collect();
        let x = away_from_kinks(&mut rng, &[3, 4], &theta, 1e-3);
        let err = check(&[x, Tensor::vector(theta)], move |g, v| {
            let y = g.soft_threshold(v[0], v[1])?;
            weighted_sum(g, y, ws)
        });
        assert!(err < tol, "soft_threshold seed {seed}: {err}");
    }
}
