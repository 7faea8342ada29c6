use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelConfig;

/// Named, row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Clone> Tensor<T> {
    pub fn filled(name: impl Into<String>, shape: &[usize], value: T) -> Self {
        let len = shape.iter().product();
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }
}

impl<T> Tensor<T> {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Weights of one encoder layer. Query/key/value hold one
/// `(d/m) x (d/m)` matrix per head, stacked as `[m, d/m, d/m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub query: Tensor<T>,
    pub key: Tensor<T>,
    pub value: Tensor<T>,
    pub output: Tensor<T>,
    pub norm1_gain: Tensor<T>,
    pub norm1_bias: Tensor<T>,
    pub ffn_w1: Tensor<T>,
    pub ffn_b1: Tensor<T>,
    pub ffn_w2: Tensor<T>,
    pub ffn_b2: Tensor<T>,
    pub norm2_gain: Tensor<T>,
    pub norm2_bias: Tensor<T>,
}

/// Every learnable tensor of the model. Matrices are stored `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T> {
    pub config: ModelConfig,
    pub word_emb: Tensor<T>,
    pub pos_emb: Tensor<T>,
    pub seg_emb: Tensor<T>,
    pub layers: Vec<LayerParams<T>>,
    pub head_w: Tensor<T>,
    pub head_b: Tensor<T>,
}

/// Model weights as stored and checkpointed.
pub type Parameters = ParamSet<f32>;

/// Gradients and optimizer moments.
pub type Gradients = ParamSet<f64>;

impl<T: Clone> ParamSet<T> {
    /// Every tensor with the given fill value; shapes follow `config`.
    pub fn filled(config: &ModelConfig, value: T) -> Self {
        let d = config.d;
        let h = config.head_dim();
        let m = config.heads;
        let layers = (0..config.layers)
            .map(|l| {
                let n = |s: &str| format!("layers.{l}.{s}");
                LayerParams {
                    query: Tensor::filled(n("attention.query"), &[m, h, h], value.clone()),
                    key: Tensor::filled(n("attention.key"), &[m, h, h], value.clone()),
                    value: Tensor::filled(n("attention.value"), &[m, h, h], value.clone()),
                    output: Tensor::filled(n("attention.output"), &[d, d], value.clone()),
                    norm1_gain: Tensor::filled(n("norm1.gain"), &[d], value.clone()),
                    norm1_bias: Tensor::filled(n("norm1.bias"), &[d], value.clone()),
                    ffn_w1: Tensor::filled(n("ffn.w1"), &[d, d], value.clone()),
                    ffn_b1: Tensor::filled(n("ffn.b1"), &[d], value.clone()),
                    ffn_w2: Tensor::filled(n("ffn.w2"), &[d, d], value.clone()),
                    ffn_b2: Tensor::filled(n("ffn.b2"), &[d], value.clone()),
                    norm2_gain: Tensor::filled(n("norm2.gain"), &[d], value.clone()),
                    norm2_bias: Tensor::filled(n("norm2.bias"), &[d], value.clone()),
                }
            })
            .collect();
        Self {
            config: config.clone(),
            word_emb: Tensor::filled("embeddings.word", &[config.vocab_size, d], value.clone()),
            pos_emb: Tensor::filled(
                "embeddings.position",
                &[config.max_positions, d],
                value.clone(),
            ),
            seg_emb: Tensor::filled("embeddings.segment", &[2, d], value.clone()),
            layers,
            head_w: Tensor::filled("head.weight", &[1, d], value.clone()),
            head_b: Tensor::filled("head.bias", &[1], value),
        }
    }
}

impl<T> ParamSet<T> {
    /// Tensors in canonical (checkpoint) order.
    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        let mut out = vec![&self.word_emb, &self.pos_emb, &self.seg_emb];
        for l in &self.layers {
            out.extend([
                &l.query,
                &l.key,
                &l.value,
                &l.output,
                &l.norm1_gain,
                &l.norm1_bias,
                &l.ffn_w1,
                &l.ffn_b1,
                &l.ffn_w2,
                &l.ffn_b2,
                &l.norm2_gain,
                &l.norm2_bias,
            ]);
        }
        out.extend([&self.head_w, &self.head_b]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = vec![&mut self.word_emb, &mut self.pos_emb, &mut self.seg_emb];
        for l in &mut self.layers {
            out.extend([
                &mut l.query,
                &mut l.key,
                &mut l.value,
                &mut l.output,
                &mut l.norm1_gain,
                &mut l.norm1_bias,
                &mut l.ffn_w1,
                &mut l.ffn_b1,
                &mut l.ffn_w2,
                &mut l.ffn_b2,
                &mut l.norm2_gain,
                &mut l.norm2_bias,
            ]);
        }
        out.extend([&mut self.head_w, &mut self.head_b]);
        out
    }

    pub fn num_values(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

fn is_gain(name: &str) -> bool {
    name.ends_with(".gain")
}

fn is_bias(name: &str) -> bool {
    name.ends_with(".bias") || name.ends_with(".b1") || name.ends_with(".b2")
}

impl Parameters {
    /// Seeded initialization: matrices uniform in (-0.05, 0.05), biases
    /// zero, layer-norm gains one.
    pub fn init(config: &ModelConfig) -> Self {
        Self::init_uniform(config, 0.05)
    }

    pub fn init_uniform(config: &ModelConfig, bound: f32) -> Self {
        let mut params = Self::filled(config, 0.0f32);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for t in params.tensors_mut() {
            if is_gain(&t.name) {
                t.data.fill(1.0);
            } else if !is_bias(&t.name) {
                for v in &mut t.data {
                    *v = rng.gen_range(-bound..bound);
                }
            }
        }
        params
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Bitwise equality of every value.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        let a = self.tensors();
        let b = other.tensors();
        self.config == other.config
            && a.len() == b.len()
            && a.iter().zip(&b).all(|(x, y)| {
                x.name == y.name
                    && x.shape == y.shape
                    && x.data
                        .iter()
                        .zip(&y.data)
                        .all(|(p, q)| p.to_bits() == q.to_bits())
            })
    }
}
