//! The waveform network: an MLP from `[encoded input, sin t, cos t]` to one
//! waveform value.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result, Shape};
use crate::tensor::Tensor;

/// Number of extra input features taken by the time embedding.
pub const TIME_FEATURES: usize = 2;

/// One dense layer: `y = x W + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// `fan_in x fan_out`
    pub weight: Tensor,
    /// `1 x fan_out`
    pub bias: Tensor,
}

impl Layer {
    pub fn fan_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.cols()
    }
}

/// Learned weights of the waveform network. Hidden layers use tanh, the
/// output layer is linear.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    layers: Vec<Layer>,
    seed: Option<u64>,
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    let fail = |reason| {
        Err(Error::InvalidLayerSizes {
            sizes: sizes.to_vec(),
            reason,
        })
    };
    if sizes.len() < 2 {
        return fail("need at least an input and an output size");
    }
    if sizes.contains(&0) {
        return fail("sizes must be positive");
    }
    if sizes[sizes.len() - 1] != 1 {
        return fail("output size must be 1");
    }
    if sizes[0] <= TIME_FEATURES {
        return fail("input size must exceed the 2 time features");
    }
    Ok(())
}

impl ModelParams {
    /// Xavier-uniform weights with bound `sqrt(6 / (fan_in + fan_out))`,
    /// zero biases. Deterministic in `seed`.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        check_sizes(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..=bound))
                    .collect();
                Layer {
                    weight: Tensor::new(fan_in, fan_out, data).expect("sized above"),
                    bias: Tensor::zeros(1, fan_out),
                }
            })
            .collect();
        Ok(Self {
            layers,
            seed: Some(seed),
        })
    }

    /// All weights and biases zero.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        check_sizes(layer_sizes)?;
        let layers = layer_sizes
            .windows(2)
            .map(|w| Layer {
                weight: Tensor::zeros(w[0], w[1]),
                bias: Tensor::zeros(1, w[1]),
            })
            .collect();
        Ok(Self { layers, seed: None })
    }

    /// Assembles params from explicit layers, checking that dimensions chain.
    pub fn from_layers(layers: Vec<Layer>, seed: Option<u64>) -> Result<Self> {
        let mut sizes: Vec<usize> = layers.first().map(|l| vec![l.fan_in()]).unwrap_or_default();
        for (i, layer) in layers.iter().enumerate() {
            if layer.bias.shape() != Shape(1, layer.fan_out()) {
                return Err(Error::ShapeMismatch {
                    op: "layer bias",
                    left: layer.weight.shape(),
                    right: layer.bias.shape(),
                });
            }
            if i > 0 && layers[i - 1].fan_out() != layer.fan_in() {
                return Err(Error::ShapeMismatch {
                    op: "layer chain",
                    left: layers[i - 1].weight.shape(),
                    right: layer.weight.shape(),
                });
            }
            sizes.push(layer.fan_out());
        }
        check_sizes(&sizes)?;
        Ok(Self { layers, seed })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Seed the weights were drawn from, if they came from [`ModelParams::init`].
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].fan_in()];
        sizes.extend(self.layers.iter().map(Layer::fan_out));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    /// Length of the input encoding this network accepts.
    pub fn encoding_dim(&self) -> usize {
        self.input_dim() - TIME_FEATURES
    }

    pub fn num_values(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Parameter tensors in storage order: `W0, b0, W1, b1, ...`.
    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    /// Records every parameter as a leaf on `tape`.
    pub fn register(&self, tape: &mut Tape) -> ParamVars {
        ParamVars {
            layers: self
                .layers
                .iter()
                .map(|l| (tape.leaf(l.weight.clone()), tape.leaf(l.bias.clone())))
                .collect(),
        }
    }
}

/// Tape handles for each layer's `(weight, bias)`.
#[derive(Clone, Debug)]
pub struct ParamVars {
    layers: Vec<(Var, Var)>,
}

impl ParamVars {
    /// Handles in the same order as [`ModelParams::tensors`].
    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.layers.iter().flat_map(|&(w, b)| [w, b])
    }
}

/// `(sin t, cos t)`. The network never sees `t` itself, so its output is a
/// function of the angle modulo 2π.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeEmbedding {
    pub sin: f64,
    pub cos: f64,
}

impl TimeEmbedding {
    pub fn new(t: f64) -> Self {
        let (sin, cos) = t.sin_cos();
        Self { sin, cos }
    }
}

/// How an input `x` is presented to the network.
#[derive(Clone, Debug, PartialEq)]
pub enum InputEncoding {
    /// `encoded[index] = 1`, all other entries 0.
    OneHot { index: usize, len: usize },
    /// Arbitrary real features.
    Vector(Vec<f64>),
}

impl InputEncoding {
    pub fn one_hot(index: usize, len: usize) -> Result<Self> {
        if index >= len {
            return Err(Error::InputOutOfRange { index, len });
        }
        Ok(Self::OneHot { index, len })
    }

    pub fn len(&self) -> usize {
        match self {
            Self::OneHot { len, .. } => *len,
            Self::Vector(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The integer input, for one-hot encodings.
    pub fn index(&self) -> Option<usize> {
        match self {
            Self::OneHot { index, .. } => Some(*index),
            Self::Vector(_) => None,
        }
    }

    pub fn encode(&self) -> Vec<f64> {
        match self {
            Self::OneHot { index, len } => {
                let mut v = vec![0.0; *len];
                v[*index] = 1.0;
                v
            }
            Self::Vector(v) => v.clone(),
        }
    }
}

/// Builds the `times.len() x (enc + 2)` input matrix: one row per time,
/// `[encoded..., sin t, cos t]`.
pub fn input_matrix(encoded: &[f64], times: impl IntoIterator<Item = TimeEmbedding>) -> Tensor {
    let width = encoded.len() + TIME_FEATURES;
    let mut data = Vec::new();
    let mut rows = 0;
    for e in times {
        data.extend_from_slice(encoded);
        data.push(e.sin);
        data.push(e.cos);
        rows += 1;
    }
    Tensor::new(rows, width, data).expect("rows built to width")
}

/// Runs the network on an `m x fan_in` input node, returning an `m x 1` node.
pub fn forward_batch(tape: &mut Tape, params: &ParamVars, inputs: Var) -> Result<Var> {
    let last = params.layers.len() - 1;
    let mut h = inputs;
    for (i, &(w, b)) in params.layers.iter().enumerate() {
        let z = tape.matmul(h, w)?;
        let z = tape.add_row(z, b)?;
        h = if i < last { tape.tanh(z) } else { z };
    }
    Ok(h)
}

/// `S(θ; x, t)` for a single time: a `1 x 1` node.
pub fn forward_model(tape: &mut Tape, params: &ParamVars, encoded: &[f64], time: TimeEmbedding) -> Result<Var> {
    let input = tape.leaf(input_matrix(encoded, [time]));
    forward_batch(tape, params, input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    const DEFAULT_SIZES: [usize; 4] = [18, 128, 128, 1];

    #[test]
    fn init_is_deterministic_in_seed() {
        let a = ModelParams::init(&DEFAULT_SIZES, 42).unwrap();
        let b = ModelParams::init(&DEFAULT_SIZES, 42).unwrap();
        let c = ModelParams::init(&DEFAULT_SIZES, 43).unwrap();
        let bits = |p: &ModelParams| {
            p.tensors()
                .flat_map(|t| t.data().to_vec())
                .map(f64::to_bits)
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&c));
        assert_eq!(a.seed(), Some(42));
    }

    #[test]
    fn init_respects_xavier_bound() {
        let p = ModelParams::init(&DEFAULT_SIZES, 42).unwrap();
        let w0 = &p.layers()[0].weight;
        assert_eq!(w0.shape(), Shape(18, 128));
        let bound = (6.0f64 / 146.0).sqrt();
        assert!(w0.data().iter().all(|w| w.abs() <= bound));
        // Roughly uniform: the extremes should be near the bound.
        let max = w0.data().iter().fold(0.0f64, |m, w| m.max(w.abs()));
        assert!(max > 0.95 * bound);
        for l in p.layers() {
            let bound = (6.0 / (l.fan_in() + l.fan_out()) as f64).sqrt();
            assert!(l.weight.data().iter().all(|w| w.abs() <= bound));
            assert!(l.bias.data().iter().all(|&b| b == 0.0));
        }
        assert_eq!(p.layer_sizes(), DEFAULT_SIZES);
        assert_eq!(p.num_values(), 18 * 128 + 128 + 128 * 128 + 128 + 128 + 1);
    }

    #[test]
    fn init_rejects_bad_sizes() {
        assert!(ModelParams::init(&[4], 1).is_err());
        assert!(ModelParams::init(&[18, 0, 1], 1).is_err());
        assert!(ModelParams::init(&[18, 8, 2], 1).is_err());
        assert!(ModelParams::init(&[2, 8, 1], 1).is_err());
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = ModelParams::zeros(&DEFAULT_SIZES).unwrap();
        let mut tape = Tape::new();
        let vars = p.register(&mut tape);
        let enc = InputEncoding::one_hot(3, 16).unwrap().encode();
        let y = forward_model(&mut tape, &vars, &enc, TimeEmbedding::new(0.7)).unwrap();
        assert_eq!(tape.value(y).as_scalar(), Some(0.0));
    }

    #[test]
    fn wrong_encoding_length_is_a_shape_error() {
        let p = ModelParams::init(&[6, 4, 1], 0).unwrap();
        let mut tape = Tape::new();
        let vars = p.register(&mut tape);
        let err = forward_model(&mut tape, &vars, &[1.0; 3], TimeEmbedding::new(0.0)).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { op: "matmul", .. }));
    }

    #[test]
    fn batch_matches_loop() {
        let p = ModelParams::init(&[6, 16, 16, 1], 9).unwrap();
        let enc = InputEncoding::one_hot(2, 4).unwrap().encode();
        let times: Vec<f64> = (0..37).map(|n| -3.1 + 0.17 * n as f64).collect();
        let mut tape = Tape::new();
        let vars = p.register(&mut tape);
        let input = tape.leaf(input_matrix(&enc, times.iter().map(|&t| TimeEmbedding::new(t))));
        let batch = forward_batch(&mut tape, &vars, input).unwrap();
        let batch = tape.value(batch).clone();
        for (n, &t) in times.iter().enumerate() {
            let y = forward_model(&mut tape, &vars, &enc, TimeEmbedding::new(t)).unwrap();
            assert!((tape.value(y).as_scalar().unwrap() - batch.get(n, 0)).abs() < 1e-12);
        }
    }

    #[test]
    fn shifted_time_embeds_close_and_equal_embeddings_give_equal_outputs() {
        let p = ModelParams::init(&[6, 16, 1], 5).unwrap();
        let enc = [0.0, 1.0, 0.0, 0.0];
        let mut tape = Tape::new();
        let vars = p.register(&mut tape);
        let t = 1.234;
        let e = TimeEmbedding::new(t);
        let a = forward_model(&mut tape, &vars, &enc, e).unwrap();
        let b = forward_model(&mut tape, &vars, &enc, e).unwrap();
        assert_eq!(tape.value(a).data()[0].to_bits(), tape.value(b).data()[0].to_bits());
        let shifted = forward_model(&mut tape, &vars, &enc, TimeEmbedding::new(t + TAU)).unwrap();
        assert!((tape.value(a).data()[0] - tape.value(shifted).data()[0]).abs() < 1e-12);
    }

    #[test]
    fn one_hot_encoding() {
        let e = InputEncoding::one_hot(3, 16).unwrap();
        let v = e.encode();
        assert_eq!(v.len(), 16);
        assert_eq!(v[3], 1.0);
        assert_eq!(v.iter().sum::<f64>(), 1.0);
        assert!(InputEncoding::one_hot(16, 16).is_err());
    }

    #[test]
    fn from_layers_checks_chain() {
        let l = |i, o| Layer {
            weight: Tensor::zeros(i, o),
            bias: Tensor::zeros(1, o),
        };
        assert!(ModelParams::from_layers(vec![l(4, 3), l(3, 1)], None).is_ok());
        assert!(ModelParams::from_layers(vec![l(4, 3), l(2, 1)], None).is_err());
        assert!(ModelParams::from_layers(vec![l(4, 3)], None).is_err());
    }
}
