//! Uniform sampling of [-π, π] and materialization of neural waveforms.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::model::{forward_batch, input_matrix, InputEncoding, ModelParams, ParamVars, TimeEmbedding};

/// Which sample points a grid of size `N` holds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum GridConvention {
    /// `N` points `t_n = -π + nΔt`, `n = 0..N-1`. The right endpoint π is
    /// left out because it is the same point as -π for a periodic function.
    #[default]
    Open,
    /// `N + 1` points, `n = 0..=N`, with both -π and π present. Coefficient
    /// sums still use weight `2/N`, so the endpoint is counted twice.
    Paper,
}

impl fmt::Display for GridConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GridConvention::Open => "open",
            GridConvention::Paper => "paper",
        })
    }
}

impl FromStr for GridConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "open" => Ok(Self::Open),
            "paper" => Ok(Self::Paper),
            other => Err(Error::Config(format!(
                "grid-convention must be `open` or `paper`, got `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleGrid {
    n: usize,
    convention: GridConvention,
    delta_t: f64,
    times: Vec<f64>,
}

impl SampleGrid {
    /// Open grid of `n` points.
    pub fn new(n: usize) -> Result<Self> {
        Self::with_convention(n, GridConvention::Open)
    }

    pub fn with_convention(n: usize, convention: GridConvention) -> Result<Self> {
        if n < 2 {
            return Err(Error::GridTooSmall(n));
        }
        let delta_t = TAU / n as f64;
        let count = match convention {
            GridConvention::Open => n,
            GridConvention::Paper => n + 1,
        };
        let times = (0..count).map(|i| -PI + i as f64 * delta_t).collect();
        Ok(Self {
            n,
            convention,
            delta_t,
            times,
        })
    }

    /// The `N` that sets the spacing `Δt = 2π/N`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn convention(&self) -> GridConvention {
        self.convention
    }

    pub fn delta_t(&self) -> f64 {
        self.delta_t
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of sample points (`N`, or `N + 1` for the paper convention).
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Per-sample quadrature weight `Δt / π = 2/N`.
    pub fn weight(&self) -> f64 {
        2.0 / self.n as f64
    }

    /// Time embedding of sample `index`, where indices differing by a multiple
    /// of `N` name the same phase. Exactly periodic in `index`.
    pub fn embedding_at(&self, index: i64) -> TimeEmbedding {
        let n = index.rem_euclid(self.n as i64) as usize;
        TimeEmbedding::new(self.times[n])
    }

    pub fn embeddings(&self) -> impl Iterator<Item = TimeEmbedding> + '_ {
        self.times.iter().map(|&t| TimeEmbedding::new(t))
    }
}

/// A sampled waveform still on the tape: an `len x 1` column node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveformVar {
    pub values: Var,
    pub input_id: Option<usize>,
}

/// Evaluates the network at every grid time for one input.
pub fn sample_waveform(
    tape: &mut Tape,
    params: &ParamVars,
    input: &InputEncoding,
    grid: &SampleGrid,
) -> Result<WaveformVar> {
    let x = tape.leaf(input_matrix(&input.encode(), grid.embeddings()));
    let values = forward_batch(tape, params, x)?;
    Ok(WaveformVar {
        values,
        input_id: input.index(),
    })
}

/// Samples one waveform per input using up to `threads` threads, each with
/// its own tape. Output order follows `inputs`.
pub fn evaluate_waveforms(
    params: &ModelParams,
    inputs: &[InputEncoding],
    grid: &SampleGrid,
    threads: usize,
) -> Result<Vec<Waveform>> {
    let eval_one = |input: &InputEncoding| {
        let mut tape = Tape::new();
        let vars = params.register(&mut tape);
        let wf = sample_waveform(&mut tape, &vars, input, grid)?;
        Waveform::from_tape(&tape, wf, grid)
    };
    let threads = threads.clamp(1, inputs.len().max(1));
    if threads == 1 {
        return inputs.iter().map(eval_one).collect();
    }
    let chunk = inputs.len().div_ceil(threads);
    std::thread::scope(|s| {
        let handles: Vec<_> = inputs
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(eval_one).collect::<Result<Vec<_>>>()))
            .collect();
        let mut out = Vec::with_capacity(inputs.len());
        for h in handles {
            out.extend(h.join().expect("waveform worker panicked")?);
        }
        Ok(out)
    })
}

/// Time-value pairs of a waveform, detached from any tape.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    grid: SampleGrid,
    values: Vec<f64>,
    input_id: Option<usize>,
}

impl Waveform {
    pub fn new(grid: SampleGrid, values: Vec<f64>, input_id: Option<usize>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::BadTensorData {
                rows: grid.len(),
                cols: 1,
                len: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteWaveform(i));
        }
        Ok(Self { grid, values, input_id })
    }

    /// Samples `f(t)` on `grid`.
    pub fn from_fn(grid: SampleGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.times().iter().map(|&t| f(t)).collect();
        Self::new(grid, values, None)
    }

    /// Copies a sampled waveform off the tape.
    pub fn from_tape(tape: &Tape, var: WaveformVar, grid: &SampleGrid) -> Result<Self> {
        Self::new(grid.clone(), tape.value(var.values).data().to_vec(), var.input_id)
    }

    pub fn grid(&self) -> &SampleGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn input_id(&self) -> Option<usize> {
        self.input_id
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.times().iter().copied().zip(self.values.iter().copied())
    }
}
