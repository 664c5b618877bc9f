//! Central finite-difference gradients, for checking the tape's backward pass.

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `∂f/∂p ≈ (f(p + h) - f(p - h)) / 2h` for every element of every input.
pub fn numeric_gradient(inputs: &[Tensor], f: impl Fn(&[Tensor]) -> Result<f64>, h: f64) -> Result<Vec<Tensor>> {
    let mut work = inputs.to_vec();
    let mut grads = Vec::with_capacity(inputs.len());
    for t in 0..inputs.len() {
        let mut g = Tensor::zeros(inputs[t].rows(), inputs[t].cols());
        for i in 0..inputs[t].len() {
            let orig = inputs[t].data()[i];
            work[t].data_mut()[i] = orig + h;
            let plus = f(&work)?;
            work[t].data_mut()[i] = orig - h;
            let minus = f(&work)?;
            work[t].data_mut()[i] = orig;
            g.data_mut()[i] = (plus - minus) / (2.0 * h);
        }
        grads.push(g);
    }
    Ok(grads)
}

/// Builds `build(tape, leaves)` on a fresh tape with one leaf per input and
/// returns the scalar value plus the gradient for each input.
pub fn tape_gradient(
    inputs: &[Tensor],
    build: impl Fn(&mut Tape, &[Var]) -> Result<Var>,
) -> Result<(f64, Vec<Tensor>)> {
    let mut tape = Tape::new();
    let leaves: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let loss = build(&mut tape, &leaves)?;
    let value = tape
        .value(loss)
        .as_scalar()
        .ok_or(Error::NonScalarLoss(tape.value(loss).shape()))?;
    let mut grads = tape.backward(loss)?;
    Ok((value, leaves.iter().map(|&v| grads.take(v)).collect()))
}

/// Scalar value of `build` evaluated without a backward pass.
pub fn tape_value(inputs: &[Tensor], build: impl Fn(&mut Tape, &[Var]) -> Result<Var>) -> Result<f64> {
    let mut tape = Tape::new();
    let leaves: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let loss = build(&mut tape, &leaves)?;
    tape.value(loss)
        .as_scalar()
        .ok_or(Error::NonScalarLoss(tape.value(loss).shape()))
}

/// Elementwise agreement between two gradient lists.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GradComparison {
    pub elements: usize,
    pub max_abs_error: f64,
    /// Over elements whose larger magnitude is at least `abs_tol`.
    pub max_rel_error: f64,
    /// Elements where both the absolute and the relative error exceed the
    /// tolerances passed to [`compare`].
    pub failures: usize,
}

impl GradComparison {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Compares `analytic` against `numeric`. An element passes when its absolute
/// error is below `abs_tol` or its relative error
/// `|a - n| / max(|a|, |n|)` is below `rel_tol`.
pub fn compare(analytic: &[Tensor], numeric: &[Tensor], rel_tol: f64, abs_tol: f64) -> GradComparison {
    assert_eq!(analytic.len(), numeric.len(), "gradient lists differ in length");
    let mut out = GradComparison::default();
    for (a, n) in analytic.iter().zip(numeric) {
        assert_eq!(a.shape(), n.shape(), "gradient shapes differ");
        for (&x, &y) in a.data().iter().zip(n.data()) {
            let abs = (x - y).abs();
            let scale = x.abs().max(y.abs());
            let rel = if scale > 0.0 { abs / scale } else { 0.0 };
            out.elements += 1;
            out.max_abs_error = out.max_abs_error.max(abs);
            if scale >= abs_tol {
                out.max_rel_error = out.max_rel_error.max(rel);
            }
            if !(abs < abs_tol || rel < rel_tol) {
                out.failures += 1;
            }
        }
    }
    out
}

/// Runs `build` through both the tape and finite differences.
pub fn check(
    inputs: &[Tensor],
    build: impl Fn(&mut Tape, &[Var]) -> Result<Var>,
    h: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<GradComparison> {
    let (_, analytic) = tape_gradient(inputs, &build)?;
    let numeric = numeric_gradient(inputs, |ts| tape_value(ts, &build), h)?;
    Ok(compare(&analytic, &numeric, rel_tol, abs_tol))
}
