//! Fourier-coefficient readout of sampled waveforms.
//!
//! For a waveform sampled on a [`SampleGrid`] with spacing `Δt = 2π/N`,
//!
//! ```text
//! a_ω = (2/N) Σ_n s(t_n) cos(ω t_n)
//! b_ω = (2/N) Σ_n s(t_n) sin(ω t_n)
//! ```
//!
//! i.e. the integrals `(1/π) ∫ s(t) cos(ωt) dt` (resp. sin) replaced by their
//! uniform Riemann sums. On the open grid these sums are exact for any
//! waveform whose frequencies are all below `N/2`.
//!
//! `ω = 0` uses the same formula, so `a_0` is twice the mean of the waveform
//! and `b_0` is identically zero.
//!
//! Each coefficient is a matmul of a constant basis row against the waveform
//! column, which keeps the readout differentiable through the tape.

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::model::{InputEncoding, ParamVars};
use crate::sampler::{sample_waveform, SampleGrid, Waveform, WaveformVar};
use crate::tensor::Tensor;

/// Distinct non-negative integer frequencies.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrequencySet {
    omegas: Vec<usize>,
}

impl FrequencySet {
    pub fn new(omegas: Vec<usize>) -> Result<Self> {
        for (i, w) in omegas.iter().enumerate() {
            if omegas[..i].contains(w) {
                return Err(Error::DuplicateFrequency(*w));
            }
        }
        Ok(Self { omegas })
    }

    /// `0, 1, ..., max`.
    pub fn up_to(max: usize) -> Self {
        Self {
            omegas: (0..=max).collect(),
        }
    }

    pub fn omegas(&self) -> &[usize] {
        &self.omegas
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// Fails with [`Error::Aliasing`] unless every `ω < N/2`.
    pub fn check_for(&self, grid: &SampleGrid) -> Result<()> {
        self.omegas.iter().try_for_each(|&w| check_frequency(w, grid))
    }
}

pub fn check_frequency(omega: usize, grid: &SampleGrid) -> Result<()> {
    if 2 * omega >= grid.n() {
        return Err(Error::Aliasing { omega, n: grid.n() });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    Cosine,
    Sine,
}

/// The `|freqs| x grid.len()` matrix whose row `j` holds
/// `(2/N) cos(ω_j t_n)` (or sin). Multiplying it by a waveform column gives
/// the coefficient column.
pub fn basis_matrix(grid: &SampleGrid, freqs: &FrequencySet, basis: Basis) -> Result<Tensor> {
    freqs.check_for(grid)?;
    let weight = grid.weight();
    let mut data = Vec::with_capacity(freqs.len() * grid.len());
    for &omega in freqs.omegas() {
        let w = omega as f64;
        data.extend(grid.times().iter().map(|&t| match basis {
            Basis::Cosine => weight * (w * t).cos(),
            Basis::Sine => weight * (w * t).sin(),
        }));
    }
    Tensor::new(freqs.len(), grid.len(), data)
}

fn coefficient_column(
    tape: &mut Tape,
    waveform: Var,
    grid: &SampleGrid,
    freqs: &FrequencySet,
    basis: Basis,
) -> Result<Var> {
    let rows = tape.leaf(basis_matrix(grid, freqs, basis)?);
    tape.matmul(rows, waveform)
}

/// `a_ω` of a waveform on the tape, as a `1 x 1` node.
pub fn cosine_coefficient(tape: &mut Tape, waveform: &WaveformVar, grid: &SampleGrid, omega: usize) -> Result<Var> {
    coefficient_column(
        tape,
        waveform.values,
        grid,
        &FrequencySet { omegas: vec![omega] },
        Basis::Cosine,
    )
}

/// `b_ω` of a waveform on the tape, as a `1 x 1` node.
pub fn sine_coefficient(tape: &mut Tape, waveform: &WaveformVar, grid: &SampleGrid, omega: usize) -> Result<Var> {
    coefficient_column(
        tape,
        waveform.values,
        grid,
        &FrequencySet { omegas: vec![omega] },
        Basis::Sine,
    )
}

/// All `a_ω` for `freqs`, as a `|freqs| x 1` node.
pub fn cosine_coefficients(
    tape: &mut Tape,
    waveform: &WaveformVar,
    grid: &SampleGrid,
    freqs: &FrequencySet,
) -> Result<Var> {
    coefficient_column(tape, waveform.values, grid, freqs, Basis::Cosine)
}

/// All `b_ω` for `freqs`, as a `|freqs| x 1` node.
pub fn sine_coefficients(
    tape: &mut Tape,
    waveform: &WaveformVar,
    grid: &SampleGrid,
    freqs: &FrequencySet,
) -> Result<Var> {
    coefficient_column(tape, waveform.values, grid, freqs, Basis::Sine)
}

/// Coefficient matrices over several inputs, kept on the tape. Row `i` of
/// `A` is the `|freqs| x 1` node `a_rows[i]`.
#[derive(Clone, Debug)]
pub struct CoefficientVars {
    pub a_rows: Vec<Var>,
    pub b_rows: Vec<Var>,
    pub waveforms: Vec<WaveformVar>,
}

impl CoefficientVars {
    pub fn a_matrix(&self, tape: &Tape) -> Vec<Vec<f64>> {
        self.a_rows.iter().map(|&v| tape.value(v).data().to_vec()).collect()
    }

    pub fn b_matrix(&self, tape: &Tape) -> Vec<Vec<f64>> {
        self.b_rows.iter().map(|&v| tape.value(v).data().to_vec()).collect()
    }
}

/// Samples one waveform per input and reads out `A[i][j] = a_{x_i, ω_j}`
/// and `B` likewise. Set `with_sine = false` to skip `B`.
pub fn coefficient_matrix(
    tape: &mut Tape,
    params: &ParamVars,
    inputs: &[InputEncoding],
    grid: &SampleGrid,
    freqs: &FrequencySet,
    with_sine: bool,
) -> Result<CoefficientVars> {
    freqs.check_for(grid)?;
    let cos = tape.leaf(basis_matrix(grid, freqs, Basis::Cosine)?);
    let sin = if with_sine {
        Some(tape.leaf(basis_matrix(grid, freqs, Basis::Sine)?))
    } else {
        None
    };
    let mut out = CoefficientVars {
        a_rows: Vec::with_capacity(inputs.len()),
        b_rows: Vec::new(),
        waveforms: Vec::with_capacity(inputs.len()),
    };
    for input in inputs {
        let wf = sample_waveform(tape, params, input, grid)?;
        out.a_rows.push(tape.matmul(cos, wf.values)?);
        if let Some(sin) = sin {
            out.b_rows.push(tape.matmul(sin, wf.values)?);
        }
        out.waveforms.push(wf);
    }
    Ok(out)
}

/// `a_ω` and `b_ω` of one waveform for a requested frequency list.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSet {
    pub input_id: Option<usize>,
    pub omegas: Vec<usize>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl CoefficientSet {
    pub fn a(&self, omega: usize) -> Option<f64> {
        self.omegas.iter().position(|&w| w == omega).map(|i| self.a[i])
    }

    pub fn b(&self, omega: usize) -> Option<f64> {
        self.omegas.iter().position(|&w| w == omega).map(|i| self.b[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.omegas
            .iter()
            .zip(self.a.iter().zip(&self.b))
            .map(|(&w, (&a, &b))| (w, a, b))
    }
}

impl Waveform {
    /// Coefficients of an already-sampled waveform.
    pub fn coefficients(&self, freqs: &FrequencySet) -> Result<CoefficientSet> {
        let mut tape = Tape::new();
        let wf = WaveformVar {
            values: tape.leaf(Tensor::column(self.values().to_vec())),
            input_id: self.input_id(),
        };
        let a = cosine_coefficients(&mut tape, &wf, self.grid(), freqs)?;
        let b = sine_coefficients(&mut tape, &wf, self.grid(), freqs)?;
        Ok(CoefficientSet {
            input_id: self.input_id(),
            omegas: freqs.omegas().to_vec(),
            a: tape.value(a).data().to_vec(),
            b: tape.value(b).data().to_vec(),
        })
    }

    pub fn cosine_coefficient(&self, omega: usize) -> Result<f64> {
        Ok(self.coefficients(&FrequencySet { omegas: vec![omega] })?.a[0])
    }

    pub fn sine_coefficient(&self, omega: usize) -> Result<f64> {
        Ok(self.coefficients(&FrequencySet { omegas: vec![omega] })?.b[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    fn grid() -> SampleGrid {
        SampleGrid::new(256).unwrap()
    }

    #[test]
    fn pure_cosine() {
        let wf = Waveform::from_fn(grid(), |t| (3.0 * t).cos()).unwrap();
        assert!((wf.cosine_coefficient(3).unwrap() - 1.0).abs() < 1e-9);
        assert!(wf.cosine_coefficient(5).unwrap().abs() < 1e-9);
    }

    #[test]
    fn pure_sine_and_cross_terms() {
        let wf = Waveform::from_fn(grid(), |t| (7.0 * t).sin()).unwrap();
        assert!((wf.sine_coefficient(7).unwrap() - 1.0).abs() < 1e-9);
        let wf = Waveform::from_fn(grid(), |t| (7.0 * t).cos()).unwrap();
        assert!(wf.sine_coefficient(7).unwrap().abs() < 1e-9);
    }

    #[test]
    fn zero_waveform_and_zero_frequency() {
        let zero = Waveform::from_fn(grid(), |_| 0.0).unwrap();
        for w in [0, 1, 64, 127] {
            assert_eq!(zero.cosine_coefficient(w).unwrap(), 0.0);
        }
        let wf = Waveform::from_fn(grid(), |t| 0.3 + t.sin() - 2.0 * (4.0 * t).cos()).unwrap();
        assert_eq!(wf.sine_coefficient(0).unwrap(), 0.0);
    }

    #[test]
    fn constant_gives_twice_the_mean() {
        let wf = Waveform::from_fn(grid(), |_| 0.5).unwrap();
        assert!((wf.cosine_coefficient(0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn aliasing_is_rejected() {
        let wf = Waveform::from_fn(grid(), |t| t.cos()).unwrap();
        assert!(matches!(
            wf.cosine_coefficient(128),
            Err(Error::Aliasing { omega: 128, n: 256 })
        ));
        assert!(wf.cosine_coefficient(127).is_ok());
        let odd = Waveform::from_fn(SampleGrid::new(255).unwrap(), |t| t.cos()).unwrap();
        assert!(odd.cosine_coefficient(127).is_ok());
        assert!(odd.cosine_coefficient(128).is_err());
    }

    #[test]
    fn duplicate_frequencies_rejected() {
        assert!(matches!(
            FrequencySet::new(vec![1, 2, 1]),
            Err(Error::DuplicateFrequency(1))
        ));
    }

    #[test]
    fn matrix_matches_looped_coefficients() {
        let p = ModelParams::init(&[6, 12, 12, 1], 3).unwrap();
        let g = SampleGrid::new(64).unwrap();
        let freqs = FrequencySet::up_to(5);
        let inputs: Vec<_> = (0..4).map(|i| InputEncoding::one_hot(i, 4).unwrap()).collect();
        let mut tape = Tape::new();
        let vars = p.register(&mut tape);
        let m = coefficient_matrix(&mut tape, &vars, &inputs, &g, &freqs, true).unwrap();
        let (a, b) = (m.a_matrix(&tape), m.b_matrix(&tape));
        for (i, input) in inputs.iter().enumerate() {
            let wf = sample_waveform(&mut tape, &vars, input, &g).unwrap();
            for (j, &w) in freqs.omegas().iter().enumerate() {
                let ca = cosine_coefficient(&mut tape, &wf, &g, w).unwrap();
                let cb = sine_coefficient(&mut tape, &wf, &g, w).unwrap();
                assert!((tape.value(ca).data()[0] - a[i][j]).abs() < 1e-12);
                assert!((tape.value(cb).data()[0] - b[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_params_give_zero_matrices() {
        let p = ModelParams::zeros(&[18, 8, 1]).unwrap();
        let g = grid();
        let inputs: Vec<_> = (0..16).map(|i| InputEncoding::one_hot(i, 16).unwrap()).collect();
        let mut tape = Tape::new();
        let vars = p.register(&mut tape);
        let m = coefficient_matrix(&mut tape, &vars, &inputs, &g, &FrequencySet::up_to(15), true).unwrap();
        assert!(m.a_matrix(&tape).iter().flatten().all(|&v| v == 0.0));
        assert!(m.b_matrix(&tape).iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_wrt_samples_is_the_basis() {
        let g = SampleGrid::new(32).unwrap();
        let mut tape = Tape::new();
        let values = tape.leaf(Tensor::column((0..32).map(|i| (i as f64 * 0.37).sin()).collect()));
        let wf = WaveformVar { values, input_id: None };
        let a = cosine_coefficient(&mut tape, &wf, &g, 3).unwrap();
        let grads = tape.backward(a).unwrap();
        for (n, &t) in g.times().iter().enumerate() {
            assert_eq!(grads[values].data()[n], (2.0 / 32.0) * (3.0 * t).cos());
        }
    }
}
