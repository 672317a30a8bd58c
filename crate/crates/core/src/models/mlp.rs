use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{feature_vector, EncoderConfig};
use crate::error::{Error, Result};
use crate::models::optim::OptimizerKind;
use crate::solution::{Solution, Width};

pub const DEFAULT_HIDDEN: [usize; 2] = [100, 100];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z < 0.0 {
                    0.0
                } else {
                    z
                }
            }
            Activation::Linear => z,
        }
    }

    fn slope(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

/// Dense layer; `weights` is row-major `outputs × inputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn weight(&self, out: usize, input: usize) -> f64 {
        self.weights[out * self.inputs + input]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_mae: f64,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub encoder: EncoderConfig,
    pub meta: Option<TrainingMeta>,
}

/// Nonzero entries of a feature vector. Encoded solutions are mostly zero
/// padding, so the first layer only visits these.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseInput {
    pub dim: usize,
    pub index: Vec<usize>,
    pub value: Vec<f64>,
}

impl SparseInput {
    pub fn from_dense(x: &[f64]) -> Self {
        let mut s = SparseInput {
            dim: x.len(),
            ..Default::default()
        };
        for (i, &v) in x.iter().enumerate() {
            if v != 0.0 {
                s.index.push(i);
                s.value.push(v);
            }
        }
        s
    }

    pub fn nnz(&self) -> usize {
        self.index.len()
    }
}

/// Gradients laid out like the model's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(m: &MlpModel) -> Self {
        Gradients {
            weights: m.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: m.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn scale(&mut self, f: f64) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            v.iter_mut().for_each(|g| *g *= f);
        }
    }

    pub fn clear(&mut self) {
        self.scale(0.0);
    }
}

/// He-uniform weights in `±sqrt(6 / fan_in)`, zero biases. Hidden layers use
/// ReLU and the output layer is linear.
pub fn mlp_init(dims: &[usize], seed: u64) -> Result<MlpModel> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::ModelFormat(format!("invalid layer dims {dims:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = dims.len() - 2;
    let layers = dims
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            Layer {
                inputs: fan_in,
                outputs: fan_out,
                weights: (0..fan_in * fan_out).map(|_| rng.random_range(-bound..=bound)).collect(),
                bias: vec![0.0; fan_out],
                activation: if i == last { Activation::Linear } else { Activation::Relu },
            }
        })
        .collect();
    Ok(MlpModel {
        layers,
        encoder: EncoderConfig::default(),
        meta: None,
    })
}

/// Pre-activations and activations of every layer for one input.
pub(crate) struct Tape {
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

impl MlpModel {
    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend(self.layers.iter().map(|l| l.outputs));
        d
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Checks that dims chain and every parameter is finite.
    pub fn check(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::ModelFormat("no layers".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::ModelFormat(format!("layer {i} has inconsistent shapes")));
            }
            if i > 0 && self.layers[i - 1].outputs != l.inputs {
                return Err(Error::ModelFormat(format!("layer {i} does not chain")));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::ModelFormat(format!("layer {i} has non-finite parameters")));
            }
        }
        if self.layers.last().unwrap().outputs != 1 {
            return Err(Error::ModelFormat("output layer must have one unit".into()));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.forward_sparse(&SparseInput::from_dense(x))
    }

    pub fn forward_sparse(&self, x: &SparseInput) -> Result<f64> {
        Ok(self.run(x)?.post.last().unwrap()[0])
    }

    /// Encodes `s` with the model's encoder settings and predicts its
    /// reduced pattern count.
    pub fn predict_solution(&self, s: &Solution, master: Width) -> Result<f64> {
        self.forward(&feature_vector(s, master, &self.encoder)?)
    }

    pub(crate) fn run(&self, x: &SparseInput) -> Result<Tape> {
        if x.dim != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: x.dim,
            });
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for (li, l) in self.layers.iter().enumerate() {
            let mut z = l.bias.clone();
            if li == 0 {
                for (o, zo) in z.iter_mut().enumerate() {
                    let row = &l.weights[o * l.inputs..(o + 1) * l.inputs];
                    for (&i, &v) in x.index.iter().zip(&x.value) {
                        *zo += row[i] * v;
                    }
                }
            } else {
                let a = &post[li - 1];
                for (o, zo) in z.iter_mut().enumerate() {
                    let row = &l.weights[o * l.inputs..(o + 1) * l.inputs];
                    *zo += row.iter().zip(a).map(|(w, v)| w * v).sum::<f64>();
                }
            }
            post.push(z.iter().map(|&v| l.activation.apply(v)).collect());
            pre.push(z);
        }
        Ok(Tape { pre, post })
    }

    /// Gradient of `|f(x) − y|` with respect to every parameter, using
    /// `sign(f(x) − y)` with sign(0) = 0.
    pub fn backward(&self, x: &[f64], y: f64) -> Result<Gradients> {
        let mut g = Gradients::zeros_like(self);
        self.accumulate(&SparseInput::from_dense(x), y, 1.0, &mut g)?;
        Ok(g)
    }

    /// Adds `scale ·` the MAE gradient for one example into `g` and
    /// returns the absolute error.
    pub fn accumulate(&self, x: &SparseInput, y: f64, scale: f64, g: &mut Gradients) -> Result<f64> {
        let tape = self.run(x)?;
        let pred = tape.post.last().unwrap()[0];
        let residual = pred - y;
        let sign = if residual > 0.0 {
            1.0
        } else if residual < 0.0 {
            -1.0
        } else {
            0.0
        };
        if sign == 0.0 {
            return Ok(residual.abs());
        }
        let n = self.layers.len();
        let mut delta: Vec<f64> = vec![sign * scale * self.layers[n - 1].activation.slope(tape.pre[n - 1][0])];
        for li in (0..n).rev() {
            let l = &self.layers[li];
            for (o, d) in delta.iter().enumerate() {
                g.biases[li][o] += d;
            }
            if li == 0 {
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &mut g.weights[0][o * l.inputs..(o + 1) * l.inputs];
                    for (&i, &v) in x.index.iter().zip(&x.value) {
                        row[i] += d * v;
                    }
                }
                break;
            }
            let a = &tape.post[li - 1];
            let mut back = vec![0.0; l.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let gw = &mut g.weights[li][o * l.inputs..(o + 1) * l.inputs];
                let row = &l.weights[o * l.inputs..(o + 1) * l.inputs];
                for i in 0..l.inputs {
                    gw[i] += d * a[i];
                    back[i] += d * row[i];
                }
            }
            let prev = &self.layers[li - 1];
            delta = back
                .iter()
                .zip(&tape.pre[li - 1])
                .map(|(b, &z)| b * prev.activation.slope(z))
                .collect();
        }
        Ok(residual.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Straightforward dense evaluator, kept independent of `run`.
    fn reference_forward(m: &MlpModel, x: &[f64]) -> f64 {
        let mut a = x.to_vec();
        for l in &m.layers {
            let mut next = Vec::new();
            for o in 0..l.outputs {
                let mut z = l.bias[o];
                for i in 0..l.inputs {
                    z += l.weight(o, i) * a[i];
                }
                next.push(match l.activation {
                    Activation::Relu => {
                        if z > 0.0 {
                            z
                        } else {
                            0.0
                        }
                    }
                    Activation::Linear => z,
                });
            }
            a = next;
        }
        a[0]
    }

    fn random_input(dim: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..dim)
            .map(|_| if rng.random_bool(0.4) { 0.0 } else { rng.random_range(-2.0..2.0) })
            .collect()
    }

    #[test]
    fn init_is_deterministic() {
        assert_eq!(mlp_init(&[6, 5, 1], 3).unwrap(), mlp_init(&[6, 5, 1], 3).unwrap());
        assert_ne!(mlp_init(&[6, 5, 1], 3).unwrap(), mlp_init(&[6, 5, 1], 4).unwrap());
    }

    #[test]
    fn init_shapes() {
        let m = mlp_init(&[4, 3, 1], 0).unwrap();
        assert_eq!((m.layers[0].outputs, m.layers[0].inputs), (3, 4));
        assert_eq!(m.layers[0].weights.len(), 12);
        assert_eq!((m.layers[1].outputs, m.layers[1].inputs), (1, 3));
        assert_eq!(m.layers[0].activation, Activation::Relu);
        assert_eq!(m.layers[1].activation, Activation::Linear);
        assert_eq!(m.dims(), vec![4, 3, 1]);
        assert!(mlp_init(&[4], 0).is_err());
        assert!(mlp_init(&[4, 0, 1], 0).is_err());
    }

    #[test]
    fn init_bound() {
        let m = mlp_init(&[100, 100, 1], 9).unwrap();
        let bound = (6.0f64 / 100.0).sqrt();
        let w = &m.layers[0].weights;
        assert_eq!(w.len(), 10_000);
        assert!(w.iter().all(|v| v.abs() <= bound));
        // the draws actually spread over the interval
        assert!(w.iter().any(|v| v.abs() > 0.95 * bound));
        assert!(m.layers.iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn zero_network() {
        let mut m = mlp_init(&[5, 4, 4, 1], 1).unwrap();
        for l in &mut m.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        assert_eq!(m.forward(&random_input(5, 2)).unwrap(), 0.0);
    }

    #[test]
    fn hand_computed_chain() {
        let mut m = mlp_init(&[1, 1, 1], 0).unwrap();
        m.layers[0].weights = vec![2.0];
        m.layers[0].bias = vec![-1.0];
        m.layers[1].weights = vec![3.0];
        m.layers[1].bias = vec![0.5];
        // relu(2·4 − 1) · 3 + 0.5
        assert_eq!(m.forward(&[4.0]).unwrap(), 21.5);
        // relu clips: relu(2·0.25 − 1) = 0
        assert_eq!(m.forward(&[0.25]).unwrap(), 0.5);
    }

    #[test]
    fn matches_reference_evaluator() {
        for seed in 0..5 {
            let m = mlp_init(&[30, 12, 7, 1], seed).unwrap();
            for k in 0..10 {
                let x = random_input(30, seed * 100 + k);
                let a = m.forward(&x).unwrap();
                let b = reference_forward(&m, &x);
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = mlp_init(&[3, 2, 1], 0).unwrap();
        assert!(matches!(m.forward(&[1.0, 2.0]), Err(Error::Dimension { expected: 3, got: 2 })));
        assert!(m.backward(&[1.0], 0.0).is_err());
    }

    fn loss(m: &MlpModel, x: &[f64], y: f64) -> f64 {
        (reference_forward(m, x) - y).abs()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-5;
        for seed in 0..3u64 {
            let m = mlp_init(&[8, 6, 5, 1], 40 + seed).unwrap();
            let x = random_input(8, 70 + seed);
            let y = reference_forward(&m, &x) + 0.75;
            let g = m.backward(&x, y).unwrap();
            for li in 0..m.layers.len() {
                for wi in 0..m.layers[li].weights.len() + m.layers[li].bias.len() {
                    let nw = m.layers[li].weights.len();
                    let mut plus = m.clone();
                    let mut minus = m.clone();
                    let (analytic, p, q) = if wi < nw {
                        (g.weights[li][wi], &mut plus.layers[li].weights[wi], &mut minus.layers[li].weights[wi])
                    } else {
                        let bi = wi - nw;
                        (g.biases[li][bi], &mut plus.layers[li].bias[bi], &mut minus.layers[li].bias[bi])
                    };
                    *p += h;
                    *q -= h;
                    let numeric = (loss(&plus, &x, y) - loss(&minus, &x, y)) / (2.0 * h);
                    let denom = analytic.abs().max(numeric.abs()).max(1e-8);
                    assert!(
                        (analytic - numeric).abs() / denom < 1e-4,
                        "seed {seed} layer {li} param {wi}: {analytic} vs {numeric}"
                    );
                }
            }
        }
    }

    #[test]
    fn zero_residual_has_zero_gradient() {
        let m = mlp_init(&[6, 4, 1], 5).unwrap();
        let x = random_input(6, 6);
        let y = m.forward(&x).unwrap();
        assert_eq!(m.backward(&x, y).unwrap(), Gradients::zeros_like(&m));
    }

    #[test]
    fn residual_sign_flips_gradient() {
        let m = mlp_init(&[6, 4, 1], 5).unwrap();
        let x = random_input(6, 8);
        let p = m.forward(&x).unwrap();
        let above = m.backward(&x, p + 1.0).unwrap();
        let mut below = m.backward(&x, p - 2.0).unwrap();
        below.scale(-1.0);
        assert_eq!(above, below);
    }

    #[test]
    fn check_rejects_bad_models() {
        let mut m = mlp_init(&[3, 2, 1], 0).unwrap();
        assert!(m.check().is_ok());
        m.layers[1].bias[0] = f64::NAN;
        assert!(m.check().is_err());
        let mut m = mlp_init(&[3, 2, 1], 0).unwrap();
        m.layers[1].inputs = 3;
        assert!(m.check().is_err());
    }
}
