//! Full-batch Adam training on the identity-coefficient toy task: input `x`
//! should produce a waveform whose cosine coefficients are `a_{xω} = δ_{xω}`.

use std::time::Instant;

use crate::autodiff::{Tape, Var};
use crate::config::TrainConfig;
use crate::error::{Error, Result, Shape};
use crate::fourier::{coefficient_matrix, FrequencySet};
use crate::model::{InputEncoding, ModelParams};
use crate::sampler::SampleGrid;
use crate::tensor::Tensor;

/// `n_inputs x n_freqs` target with ones where `x == ω`.
pub fn identity_target(n_inputs: usize, n_freqs: usize) -> Tensor {
    let mut t = Tensor::zeros(n_inputs, n_freqs);
    for i in 0..n_inputs.min(n_freqs) {
        t.data_mut()[i * n_freqs + i] = 1.0;
    }
    t
}

/// Mean squared error between the coefficient rows and `target`, averaged
/// over every `(x, ω)` cell. Rows are summed in index order.
pub fn toy_loss(tape: &mut Tape, a_rows: &[Var], target: &Tensor) -> Result<Var> {
    let found_cols = a_rows.first().map_or(0, |&r| tape.value(r).rows());
    if a_rows.len() != target.rows() || a_rows.is_empty() {
        return Err(Error::ShapeMismatch {
            op: "toy_loss",
            left: Shape(a_rows.len(), found_cols),
            right: target.shape(),
        });
    }
    let mut total: Option<Var> = None;
    for (i, &row) in a_rows.iter().enumerate() {
        let shape = tape.value(row).shape();
        if shape != Shape(target.cols(), 1) {
            return Err(Error::ShapeMismatch {
                op: "toy_loss",
                left: shape,
                right: Shape(target.cols(), 1),
            });
        }
        let t = tape.leaf(Tensor::column(target.row_slice(i).to_vec()));
        let diff = tape.sub(row, t)?;
        let sq = tape.square(diff);
        let s = tape.sum(sq);
        total = Some(match total {
            None => s,
            Some(acc) => tape.add(acc, s)?,
        });
    }
    let total = total.expect("at least one row");
    Ok(tape.scalar_mul(total, 1.0 / target.len() as f64))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl From<&TrainConfig> for AdamConfig {
    fn from(c: &TrainConfig) -> Self {
        Self {
            learning_rate: c.learning_rate,
            beta1: c.adam_beta1,
            beta2: c.adam_beta2,
            epsilon: c.adam_epsilon,
        }
    }
}

/// First and second moment estimates, one tensor per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    pub fn zeros_like<'a>(params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let m: Vec<Tensor> = params.into_iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect();
        Self { v: m.clone(), m }
    }
}

/// One bias-corrected Adam update. `step` counts from 1.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
    step: u64,
    hp: &AdamConfig,
) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::ShapeMismatch {
            op: "adam_step",
            left: Shape(params.len(), 1),
            right: Shape(grads.len(), 1),
        });
    }
    for (i, p) in params.iter().enumerate() {
        for other in [&grads[i], &state.m[i], &state.v[i]] {
            p.expect_same_shape(other, "adam_step")?;
        }
    }
    let c1 = 1.0 - hp.beta1.powi(step as i32);
    let c2 = 1.0 - hp.beta2.powi(step as i32);
    for (i, p) in params.iter_mut().enumerate() {
        let g = grads[i].data();
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (j, w) in p.data_mut().iter_mut().enumerate() {
            m[j] = hp.beta1 * m[j] + (1.0 - hp.beta1) * g[j];
            v[j] = hp.beta2 * v[j] + (1.0 - hp.beta2) * g[j] * g[j];
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            *w -= hp.learning_rate * m_hat / (v_hat.sqrt() + hp.epsilon);
        }
    }
    Ok(())
}

/// Everything a training run produced.
#[derive(Clone, Debug)]
pub struct TrainReport {
    pub config: TrainConfig,
    /// Loss before the update of each step; `losses.len() == steps`.
    pub losses: Vec<f64>,
    /// Cosine coefficients of the final params, `n_inputs x (omega_max + 1)`.
    pub a: Vec<Vec<f64>>,
    /// Sine coefficients of the final params.
    pub b: Vec<Vec<f64>>,
    /// Loss of the final params.
    pub final_loss: f64,
    pub params: ModelParams,
    pub wall_time_secs: f64,
}

impl TrainReport {
    /// Largest `|A[x][ω] - δ_{xω}|`.
    pub fn max_identity_error(&self) -> f64 {
        self.a
            .iter()
            .enumerate()
            .flat_map(|(x, row)| {
                row.iter()
                    .enumerate()
                    .map(move |(w, &v)| (v - if x == w { 1.0 } else { 0.0 }).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Rows indexed by input, columns by frequency.
pub type Matrix = Vec<Vec<f64>>;

/// The toy problem for one config: inputs, grid, frequencies, target.
#[derive(Clone, Debug)]
pub struct ToyProblem {
    pub inputs: Vec<InputEncoding>,
    pub grid: SampleGrid,
    pub freqs: FrequencySet,
    pub target: Tensor,
}

impl ToyProblem {
    pub fn new(config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let inputs = (0..config.n_inputs)
            .map(|x| InputEncoding::one_hot(x, config.n_inputs))
            .collect::<Result<_>>()?;
        let grid = SampleGrid::with_convention(config.grid_n, config.grid_convention)?;
        let freqs = FrequencySet::up_to(config.omega_max);
        let target = identity_target(config.n_inputs, freqs.len());
        Ok(Self {
            inputs,
            grid,
            freqs,
            target,
        })
    }

    /// Loss and gradients (in [`ModelParams::tensors`] order) at `params`.
    pub fn loss_and_grads(&self, params: &ModelParams) -> Result<(f64, Vec<Tensor>)> {
        let mut tape = Tape::new();
        let vars = params.register(&mut tape);
        let coeffs = coefficient_matrix(&mut tape, &vars, &self.inputs, &self.grid, &self.freqs, false)?;
        let loss = toy_loss(&mut tape, &coeffs.a_rows, &self.target)?;
        let mut grads = tape.backward(loss)?;
        let loss = tape.value(loss).data()[0];
        Ok((loss, vars.vars().map(|v| grads.take(v)).collect()))
    }

    pub fn loss(&self, params: &ModelParams) -> Result<f64> {
        let mut tape = Tape::new();
        let vars = params.register(&mut tape);
        let coeffs = coefficient_matrix(&mut tape, &vars, &self.inputs, &self.grid, &self.freqs, false)?;
        let loss = toy_loss(&mut tape, &coeffs.a_rows, &self.target)?;
        Ok(tape.value(loss).data()[0])
    }

    /// `(A, B, loss)` at `params`.
    pub fn evaluate(&self, params: &ModelParams) -> Result<(Matrix, Matrix, f64)> {
        let mut tape = Tape::new();
        let vars = params.register(&mut tape);
        let coeffs = coefficient_matrix(&mut tape, &vars, &self.inputs, &self.grid, &self.freqs, true)?;
        let loss = toy_loss(&mut tape, &coeffs.a_rows, &self.target)?;
        Ok((
            coeffs.a_matrix(&tape),
            coeffs.b_matrix(&tape),
            tape.value(loss).data()[0],
        ))
    }
}

pub fn train(config: &TrainConfig) -> Result<TrainReport> {
    train_with_progress(config, |_, _| {})
}

/// Like [`train`], calling `progress(step, loss)` after every step.
pub fn train_with_progress(config: &TrainConfig, mut progress: impl FnMut(usize, f64)) -> Result<TrainReport> {
    let started = Instant::now();
    let problem = ToyProblem::new(config)?;
    let mut params = ModelParams::init(&config.layer_sizes, config.seed)?;
    let mut state = AdamState::zeros_like(params.tensors());
    let hp = AdamConfig::from(config);
    let mut losses = Vec::with_capacity(config.steps);

    for step in 0..config.steps {
        let (loss, grads) = problem.loss_and_grads(&params)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { step, what: "loss" });
        }
        if !grads.iter().all(Tensor::is_finite) {
            return Err(Error::Diverged { step, what: "gradient" });
        }
        let mut tensors: Vec<&mut Tensor> = params.tensors_mut().collect();
        adam_step(&mut tensors, &grads, &mut state, step as u64 + 1, &hp)?;
        losses.push(loss);
        progress(step, loss);
    }

    let (a, b, final_loss) = problem.evaluate(&params)?;
    if !final_loss.is_finite() {
        return Err(Error::Diverged {
            step: config.steps,
            what: "loss",
        });
    }
    Ok(TrainReport {
        config: config.clone(),
        losses,
        a,
        b,
        final_loss,
        params,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}
