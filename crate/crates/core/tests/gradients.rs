use fourier_head::gradcheck::{check, compare, numeric_gradient, tape_gradient};
use fourier_head::{ModelParams, Result, Tape, Tensor, ToyProblem, TrainConfig, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const REL: f64 = 1e-4;
const ABS: f64 = 1e-6;

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::new(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.random_range(-2.0..2.0)).collect(),
    )
    .unwrap()
}

/// Reduces a non-scalar node against fixed random weights so every output
/// element gets a different upstream gradient.
fn weighted_sum(tape: &mut Tape, v: Var, salt: u64) -> Result<Var> {
    let (r, c) = (tape.value(v).rows(), tape.value(v).cols());
    let w = random(&mut ChaCha8Rng::seed_from_u64(salt), r, c);
    let w = tape.leaf(w);
    let p = tape.mul(v, w)?;
    Ok(tape.sum(p))
}

type Build = fn(&mut Tape, &[Var]) -> Result<Var>;
type Case = (&'static str, Vec<(usize, usize)>, Build);

fn cases() -> Vec<Case> {
    vec![
        ("matmul", vec![(3, 4), (4, 5)], |t, v| {
            let y = t.matmul(v[0], v[1])?;
            weighted_sum(t, y, 1)
        }),
        ("add", vec![(3, 4), (3, 4)], |t, v| {
            let y = t.add(v[0], v[1])?;
            weighted_sum(t, y, 2)
        }),
        ("sub", vec![(3, 4), (3, 4)], |t, v| {
            let y = t.sub(v[0], v[1])?;
            weighted_sum(t, y, 3)
        }),
        ("mul", vec![(3, 4), (3, 4)], |t, v| {
            let y = t.mul(v[0], v[1])?;
            weighted_sum(t, y, 4)
        }),
        ("scalar-mul", vec![(3, 4)], |t, v| {
            let y = t.scalar_mul(v[0], -1.7);
            weighted_sum(t, y, 5)
        }),
        ("tanh", vec![(3, 4)], |t, v| {
            let y = t.tanh(v[0]);
            weighted_sum(t, y, 6)
        }),
        ("sin", vec![(3, 4)], |t, v| {
            let y = t.sin(v[0]);
            weighted_sum(t, y, 7)
        }),
        ("cos", vec![(3, 4)], |t, v| {
            let y = t.cos(v[0]);
            weighted_sum(t, y, 8)
        }),
        ("square", vec![(3, 4)], |t, v| {
            let y = t.square(v[0]);
            weighted_sum(t, y, 9)
        }),
        ("sum", vec![(3, 4)], |t, v| Ok(t.sum(v[0]))),
        ("mean", vec![(3, 4)], |t, v| Ok(t.mean(v[0]))),
        ("add-row", vec![(4, 3), (1, 3)], |t, v| {
            let y = t.add_row(v[0], v[1])?;
            weighted_sum(t, y, 10)
        }),
        ("two-layer net", vec![(5, 3), (3, 6), (1, 6), (6, 1)], |t, v| {
            let z = t.matmul(v[0], v[1])?;
            let z = t.add_row(z, v[2])?;
            let h = t.tanh(z);
            let y = t.matmul(h, v[3])?;
            let y = t.square(y);
            Ok(t.mean(y))
        }),
        ("reused node", vec![(2, 2)], |t, v| {
            let s = t.sin(v[0]);
            let c = t.cos(v[0]);
            let y = t.mul(s, c)?;
            let y = t.add(y, v[0])?;
            let y = t.mul(y, v[0])?;
            weighted_sum(t, y, 11)
        }),
    ]
}

#[test]
fn every_op_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for (name, shapes, build) in cases() {
        for trial in 0..5 {
            let inputs: Vec<Tensor> = shapes.iter().map(|&(r, c)| random(&mut rng, r, c)).collect();
            let c = check(&inputs, build, H, REL, ABS).unwrap();
            assert!(c.passed(), "{name} trial {trial}: {c:?}");
        }
    }
}

fn sum_sq(t: &mut Tape, v: &[Var]) -> Result<Var> {
    let s = t.square(v[0]);
    Ok(t.sum(s))
}

#[test]
fn backward_is_linear_in_the_loss() {
    let (alpha, beta) = (2.5, -0.75);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (name, shapes, build) in cases() {
        let inputs: Vec<Tensor> = shapes.iter().map(|&(r, c)| random(&mut rng, r, c)).collect();
        let (_, g1) = tape_gradient(&inputs, build).unwrap();
        let (_, g2) = tape_gradient(&inputs, sum_sq).unwrap();
        let (_, g) = tape_gradient(&inputs, |t, v| {
            let a = build(t, v)?;
            let a = t.scalar_mul(a, alpha);
            let b = sum_sq(t, v)?;
            let b = t.scalar_mul(b, beta);
            t.add(a, b)
        })
        .unwrap();
        for ((x, y), z) in g1.iter().zip(&g2).zip(&g) {
            for ((&x, &y), &z) in x.data().iter().zip(y.data()).zip(z.data()) {
                assert!((alpha * x + beta * y - z).abs() <= 1e-10 * (1.0 + z.abs()), "{name}");
            }
        }
    }
}

#[test]
fn gradients_are_bitwise_reproducible() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for (name, shapes, build) in cases() {
        let inputs: Vec<Tensor> = shapes.iter().map(|&(r, c)| random(&mut rng, r, c)).collect();
        let (v1, g1) = tape_gradient(&inputs, build).unwrap();
        let (v2, g2) = tape_gradient(&inputs, build).unwrap();
        assert_eq!(v1.to_bits(), v2.to_bits(), "{name}");
        for (a, b) in g1.iter().zip(&g2) {
            assert!(
                a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()),
                "{name}"
            );
        }
    }
}

#[test]
fn mean_of_product_example() {
    // L = mean(A B) with A = [[1,2],[3,4]], B = [[0.5],[-1]]:
    // dL/dA = [[0.25,-0.5],[0.25,-0.5]], dL/dB = [[2],[3]].
    let a = Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
    let b = Tensor::column(vec![0.5, -1.0]);
    let build = |t: &mut Tape, v: &[Var]| {
        let y = t.matmul(v[0], v[1])?;
        Ok(t.mean(y))
    };
    let (value, g) = tape_gradient(&[a.clone(), b.clone()], build).unwrap();
    assert_eq!(value, -2.0);
    assert_eq!(g[0], Tensor::from_rows(&[[0.25, -0.5], [0.25, -0.5]]));
    assert_eq!(g[1], Tensor::column(vec![2.0, 3.0]));
    let c = check(&[a, b], build, H, REL, ABS).unwrap();
    assert!(c.passed(), "{c:?}");
}

fn reduced_config() -> TrainConfig {
    TrainConfig {
        n_inputs: 2,
        omega_max: 2,
        grid_n: 32,
        layer_sizes: vec![4, 8, 1],
        ..TrainConfig::default()
    }
}

fn with_tensors(params: &ModelParams, tensors: &[Tensor]) -> ModelParams {
    let mut p = params.clone();
    for (dst, src) in p.tensors_mut().zip(tensors) {
        *dst = src.clone();
    }
    p
}

#[test]
fn toy_loss_gradient_on_reduced_problem() {
    let cfg = reduced_config();
    let problem = ToyProblem::new(&cfg).unwrap();
    for seed in [1, 2, 3] {
        let params = ModelParams::init(&cfg.layer_sizes, seed).unwrap();
        let (_, analytic) = problem.loss_and_grads(&params).unwrap();
        let flat: Vec<Tensor> = params.tensors().cloned().collect();
        let numeric = numeric_gradient(&flat, |ts| problem.loss(&with_tensors(&params, ts)), H).unwrap();
        let c = compare(&analytic, &numeric, REL, ABS);
        assert!(c.passed(), "seed {seed}: {c:?}");
        assert_eq!(c.elements, 4 * 8 + 8 + 8 + 1);
    }
}
