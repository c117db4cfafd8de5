//! Central finite-difference verification of every differentiable op.
//!
//! The oracle is plain arithmetic: rebuild the loss with one input element
//! nudged by ±h and difference the results. Analytic gradients must agree
//! elementwise to a relative error of 1e-5 (1e-6 for the matmul chain),
//! guarded for denominators below 1e-8.

use numkit::{Rng, Tape, Tensor, Var};

const H: f64 = 1e-5;

/// Builds a scalar that feels every output coordinate: sum(w .* f(inputs)).
fn weightedize(tape: &mut Tape, out: Var, weights: &Tensor) -> Var {
    let w = tape.constant(weights.clone());
    let prod = tape.mul(out, w).unwrap();
    tape.reduce_sum(prod).unwrap()
}

struct FdCheck<'a> {
    name: &'static str,
    inputs: Vec<Tensor>,
    build: Box<dyn Fn(&mut Tape, &[Var]) -> Var + 'a>,
    tol: f64,
}

fn run_check(check: FdCheck) {
    // analytic pass
    let mut tape = Tape::new();
    let vars: Vec<Var> = check
        .inputs
        .iter()
        .map(|t| tape.param(t.clone()))
        .collect();
    let loss = (check.build)(&mut tape, &vars);
    tape.backward(loss).unwrap();
    let grads: Vec<Tensor> = vars
        .iter()
        .map(|v| tape.grad(*v).expect("grad missing"))
        .collect();
    for g in &grads {
        assert!(g.is_finite(), "{}: non-finite analytic grad", check.name);
    }

    let eval = |inputs: &[Tensor]| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
        let loss = (check.build)(&mut tape, &vars);
        tape.value(loss).item().unwrap()
    };

    for (i, input) in check.inputs.iter().enumerate() {
        for e in 0..input.numel() {
            let mut plus = check.inputs.clone();
            plus[i].data_mut()[e] += H;
            let mut minus = check.inputs.clone();
            minus[i].data_mut()[e] -= H;
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * H);
            let a = grads[i].data()[e];
            let denom = a.abs().max(fd.abs());
            if denom > 1e-8 {
                let rel = (a - fd).abs() / denom;
                assert!(
                    rel < check.tol,
                    "{}: input {i} elem {e}: analytic {a} vs fd {fd} (rel {rel})",
                    check.name
                );
            } else {
                assert!(
                    (a - fd).abs() < 1e-7,
                    "{}: input {i} elem {e}: tiny grads differ: {a} vs {fd}",
                    check.name
                );
            }
        }
    }
}

fn rand_tensor(rng: &mut Rng, shape: &[usize]) -> Tensor {
    Tensor::gaussian(rng, shape)
}

/// Random values bounded away from the relu kink.
fn rand_tensor_off_zero(rng: &mut Rng, shape: &[usize]) -> Tensor {
    let mut t = Tensor::gaussian(rng, shape);
    for v in t.data_mut() {
        if v.abs() < 0.1 {
            *v += 0.2 * v.signum() + if *v == 0.0 { 0.2 } else { 0.0 };
        }
    }
    t
}

#[test]
fn fd_elementwise_and_reduction_ops() {
    let mut rng = Rng::new(42, 0);
    let w = rand_tensor(&mut rng, &[2, 6]);

    let cases: Vec<(&'static str, Box<dyn Fn(&mut Tape, &[Var]) -> Var>)> = vec![
        ("add", Box::new({
            let w = w.clone();
            move |t: &mut Tape, v: &[Var]| {
                let y = t.add(v[0], v[1]).unwrap();
                weightedize(t, y, &w)
            }
        })),
        ("sub", Box::new({
            let w = w.clone();
            move |t: &mut Tape, v: &[Var]| {
                let y = t.sub(v[0], v[1]).unwrap();
                weightedize(t, y, &w)
            }
        })),
        ("mul", Box::new({
            let w = w.clone();
            move |t: &mut Tape, v: &[Var]| {
                let y = t.mul(v[0], v[1]).unwrap();
                weightedize(t, y, &w)
            }
        })),
        ("lincomb", Box::new({
            let w = w.clone();
            move |t: &mut Tape, v: &[Var]| {
                let y = t.lincomb(v[0], v[1], 0.3, 0.7, "mix").unwrap();
                weightedize(t, y, &w)
            }
        })),
    ];
    for (name, build) in cases {
        let mut rng = Rng::new(7, 1);
        run_check(FdCheck {
            name,
            inputs: vec![rand_tensor(&mut rng, &[2, 6]), rand_tensor(&mut rng, &[2, 6])],
            build,
            tol: 1e-5,
        });
    }

    // single-input ops
    let mut rng = Rng::new(9, 2);
    let x = rand_tensor_off_zero(&mut rng, &[2, 6]);
    let unary: Vec<(&'static str, Box<dyn Fn(&mut Tape, Var) -> Var>)> = vec![
        ("affine", Box::new(|t, v| t.affine(v, -1.7, 0.4).unwrap())),
        ("relu", Box::new(|t, v| t.relu(v).unwrap())),
        ("mish", Box::new(|t, v| t.mish(v).unwrap())),
        ("gelu", Box::new(|t, v| t.gelu(v).unwrap())),
    ];
    for (name, f) in unary {
        let w = w.clone();
        run_check(FdCheck {
            name,
            inputs: vec![x.clone()],
            build: Box::new(move |t, v| {
                let y = f(t, v[0]);
                weightedize(t, y, &w)
            }),
            tol: 1e-5,
        });
    }

    run_check(FdCheck {
        name: "reduce_sum",
        inputs: vec![x.clone()],
        build: Box::new(|t, v| t.reduce_sum(v[0]).unwrap()),
        tol: 1e-5,
    });
    run_check(FdCheck {
        name: "reduce_mean",
        inputs: vec![x],
        build: Box::new(|t, v| t.reduce_mean(v[0]).unwrap()),
        tol: 1e-5,
    });
}

#[test]
fn fd_matmul_and_bias_ops() {
    let mut rng = Rng::new(11, 0);
    let a = rand_tensor(&mut rng, &[3, 4]);
    let b = rand_tensor(&mut rng, &[4, 2]);
    let w = rand_tensor(&mut rng, &[3, 2]);
    run_check(FdCheck {
        name: "matmul",
        inputs: vec![a, b],
        build: Box::new(move |t, v| {
            let y = t.matmul(v[0], v[1]).unwrap();
            weightedize(t, y, &w)
        }),
        tol: 1e-5,
    });

    let mut rng = Rng::new(12, 0);
    let x = rand_tensor(&mut rng, &[3, 5]);
    let bias = rand_tensor(&mut rng, &[5]);
    let w = rand_tensor(&mut rng, &[3, 5]);
    run_check(FdCheck {
        name: "add_bias",
        inputs: vec![x, bias],
        build: Box::new(move |t, v| {
            let y = t.add_bias(v[0], v[1]).unwrap();
            weightedize(t, y, &w)
        }),
        tol: 1e-5,
    });

    let mut rng = Rng::new(13, 0);
    let x = rand_tensor(&mut rng, &[2, 4, 3]);
    let shared = rand_tensor(&mut rng, &[4]);
    let w = rand_tensor(&mut rng, &[2, 4, 3]);
    run_check(FdCheck {
        name: "add_channel_bias_shared",
        inputs: vec![x.clone(), shared],
        build: Box::new({
            let w = w.clone();
            move |t, v| {
                let y = t.add_channel_bias(v[0], v[1]).unwrap();
                weightedize(t, y, &w)
            }
        }),
        tol: 1e-5,
    });
    let mut rng = Rng::new(14, 0);
    let per_sample = rand_tensor(&mut rng, &[2, 4]);
    run_check(FdCheck {
        name: "add_channel_bias_per_sample",
        inputs: vec![x, per_sample],
        build: Box::new(move |t, v| {
            let y = t.add_channel_bias(v[0], v[1]).unwrap();
            weightedize(t, y, &w)
        }),
        tol: 1e-5,
    });
}

#[test]
fn fd_conv_and_group_norm() {
    for pad in [0usize, 2] {
        let mut rng = Rng::new(21 + pad as u64, 0);
        let x = rand_tensor(&mut rng, &[2, 3, 7]);
        let k = rand_tensor(&mut rng, &[4, 3, 3]);
        let lout = 7 + 2 * pad - 3 + 1;
        let w = rand_tensor(&mut rng, &[2, 4, lout]);
        run_check(FdCheck {
            name: "conv1d",
            inputs: vec![x, k],
            build: Box::new(move |t, v| {
                let y = t.conv1d(v[0], v[1], pad).unwrap();
                weightedize(t, y, &w)
            }),
            tol: 1e-5,
        });
    }

    let mut rng = Rng::new(23, 0);
    let x = rand_tensor(&mut rng, &[2, 4, 5]);
    let gamma = rand_tensor(&mut rng, &[4]);
    let beta = rand_tensor(&mut rng, &[4]);
    let w = rand_tensor(&mut rng, &[2, 4, 5]);
    run_check(FdCheck {
        name: "group_norm",
        inputs: vec![x, gamma, beta],
        build: Box::new(move |t, v| {
            let y = t.group_norm(v[0], v[1], v[2], 2, 1e-5).unwrap();
            weightedize(t, y, &w)
        }),
        tol: 1e-5,
    });
}

#[test]
fn fd_shape_ops() {
    let mut rng = Rng::new(31, 0);
    let a = rand_tensor(&mut rng, &[2, 3]);
    let b = rand_tensor(&mut rng, &[2, 2]);
    let w = rand_tensor(&mut rng, &[2, 5]);
    run_check(FdCheck {
        name: "concat",
        inputs: vec![a, b],
        build: Box::new(move |t, v| {
            let y = t.concat(&[v[0], v[1]], 1).unwrap();
            weightedize(t, y, &w)
        }),
        tol: 1e-5,
    });

    let mut rng = Rng::new(32, 0);
    let x = rand_tensor(&mut rng, &[3, 6]);
    let w = rand_tensor(&mut rng, &[3, 3]);
    run_check(FdCheck {
        name: "slice",
        inputs: vec![x.clone()],
        build: Box::new({
            let w = w.clone();
            move |t, v| {
                let y = t.slice(v[0], 1, 2, 3).unwrap();
                weightedize(t, y, &w)
            }
        }),
        tol: 1e-5,
    });

    let w2 = rand_tensor(&mut rng, &[4, 6]);
    run_check(FdCheck {
        name: "gather_rows",
        inputs: vec![x],
        build: Box::new(move |t, v| {
            let y = t.gather_rows(v[0], &[2, 0, 2, 1]).unwrap();
            weightedize(t, y, &w2)
        }),
        tol: 1e-5,
    });
}

/// The worked example: a matmul chain must match finite differences to 1e-6.
#[test]
fn fd_matmul_chain_tight_tolerance() {
    let mut rng = Rng::new(77, 0);
    let x = rand_tensor(&mut rng, &[3, 3]);
    let a = rand_tensor(&mut rng, &[3, 4]);
    let b = rand_tensor(&mut rng, &[4, 2]);
    run_check(FdCheck {
        name: "matmul_chain",
        inputs: vec![x, a, b],
        build: Box::new(|t, v| {
            let xa = t.matmul(v[0], v[1]).unwrap();
            let xab = t.matmul(xa, v[2]).unwrap();
            let sq = t.mul(xab, xab).unwrap();
            t.reduce_sum(sq).unwrap()
        }),
        tol: 1e-6,
    });
}
