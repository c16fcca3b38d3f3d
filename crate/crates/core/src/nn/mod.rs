//! Dense binary32 forward engine for untrained DS, GIN and GCN models.
//!
//! Every message-passing layer `j` holds an aggregation rule followed by an MLP
//! of `σ ∘ W^(j,i)` stages without biases. Weights are drawn from
//! `U(−sqrt(1/m), sqrt(1/m))` with `m` the stage's output width.

pub(crate) mod forward;
mod io;
mod matrix;

pub use forward::{layer_inputs, trace_dataset, ForwardTrace, LayerInputs, LayerTrace};
pub use io::{read_model, write_model, MODEL_FORMAT_VERSION};
pub use matrix::{dot, Matrix32};

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Architecture {
    /// `h_v + Σ_{u∈N(v)} h_u`.
    Ds,
    /// `(1 + ε) h_v + Σ_{u∈N(v)} h_u`.
    Gin,
    /// `D̂^{-1/2} (A + I) D̂^{-1/2} H` followed by a single stage.
    Gcn,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [Architecture::Ds, Architecture::Gin, Architecture::Gcn];

    pub fn code(self) -> u8 {
        match self {
            Architecture::Ds => 0,
            Architecture::Gin => 1,
            Architecture::Gcn => 2,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.code() == code)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::Ds => "DS",
            Architecture::Gin => "GIN",
            Architecture::Gcn => "GCN",
        })
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "DS" => Ok(Architecture::Ds),
            "GIN" => Ok(Architecture::Gin),
            "GCN" => Ok(Architecture::Gcn),
            other => Err(Error::Config(format!("unknown architecture '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Activation {
    Relu,
    Sigmoid,
    Silu,
}

impl Activation {
    pub const ALL: [Activation; 3] = [Activation::Relu, Activation::Sigmoid, Activation::Silu];

    #[inline]
    pub fn apply(self, x: f32) -> f32 {
        match self {
            Activation::Relu => {
                if x > 0.0 || x.is_nan() {
                    x
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => sigmoid(x),
            Activation::Silu => x * sigmoid(x),
        }
    }

    /// Sigmoid is strictly monotone; ReLU and SiLU are not injective.
    pub fn is_injective(self) -> bool {
        matches!(self, Activation::Sigmoid)
    }

    pub fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
            Activation::Silu => 2,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.code() == code)
    }
}

#[inline]
fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Silu => "silu",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "silu" => Ok(Activation::Silu),
            other => Err(Error::Config(format!("unknown activation '{other}'"))),
        }
    }
}

/// Address of the stage `σ ∘ W^(j,i)`: message-passing layer `j`, MLP stage `i`, both 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LayerId {
    pub mp: usize,
    pub stage: usize,
}

impl LayerId {
    pub fn new(mp: usize, stage: usize) -> Self {
        LayerId { mp, stage }
    }
}

impl fmt::Display for LayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.mp, self.stage)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Aggregation {
    /// Self term scaled by `self_weight` (`1 + ε`) plus the plain neighbor sum.
    Sum { self_weight: f32 },
    /// Symmetric degree normalization of `A + I`.
    GcnNorm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub weights: Matrix32,
    pub activation: Activation,
}

impl Stage {
    /// `σ(W · x)`.
    pub fn apply(&self, x: &[f32]) -> Vec<f32> {
        let mut out = vec![0.0; self.weights.rows()];
        self.apply_into(x, &mut out);
        out
    }

    pub fn apply_into(&self, x: &[f32], out: &mut [f32]) {
        self.weights.matvec_into(x, out);
        for o in out.iter_mut() {
            *o = self.activation.apply(*o);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpLayer {
    pub aggregation: Aggregation,
    pub mlp: Vec<Stage>,
}

/// Shape and hyper-parameters of a model, independent of its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub activation: Activation,
    /// Input width `g` (one-hot label alphabet size).
    pub input_dim: usize,
    pub hidden: usize,
    /// Number of message-passing layers `k`.
    pub depth: usize,
    /// Stages per MLP; GCN always uses one.
    pub mlp_depth: usize,
    pub gin_eps: f32,
}

impl ModelSpec {
    pub fn new(
        architecture: Architecture,
        input_dim: usize,
        hidden: usize,
        depth: usize,
        activation: Activation,
    ) -> Self {
        ModelSpec {
            architecture,
            activation,
            input_dim,
            hidden,
            depth,
            mlp_depth: 2,
            gin_eps: 0.0,
        }
    }

    pub fn with_mlp_depth(mut self, mlp_depth: usize) -> Self {
        self.mlp_depth = mlp_depth;
        self
    }

    pub fn with_gin_eps(mut self, eps: f32) -> Self {
        self.gin_eps = eps;
        self
    }

    pub fn stages_per_layer(&self) -> usize {
        match self.architecture {
            Architecture::Gcn => 1,
            _ => self.mlp_depth,
        }
    }

    /// `(rows, cols) = (m_{j,i}, n_{j,i})` of `W^(j,i)`.
    pub fn stage_shape(&self, layer: LayerId) -> (usize, usize) {
        let cols = if layer.mp == 1 && layer.stage == 1 {
            self.input_dim
        } else {
            self.hidden
        };
        (self.hidden, cols)
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden == 0 || self.depth == 0 || self.stages_per_layer() == 0
        {
            return Err(Error::Model(format!(
                "dimensions must be positive (g={}, hidden={}, k={}, mlp depth={})",
                self.input_dim, self.hidden, self.depth, self.mlp_depth
            )));
        }
        Ok(())
    }

    /// Draws weights from ChaCha8 seeded with `seed`.
    ///
    /// Draw order is layer-major, then stage, then row-major within `W^(j,i)`.
    /// Each weight takes one `u32` draw `r`: `u = (r >> 8) · 2^-24`, then
    /// `w = (2u − 1) · sqrt(1/m)` in binary32, so `|w| ≤ sqrt(1/m)` exactly.
    pub fn init(&self, seed: u64) -> Result<GnnModel> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(self.depth);
        for j in 1..=self.depth {
            let mut mlp = Vec::with_capacity(self.stages_per_layer());
            for i in 1..=self.stages_per_layer() {
                let (rows, cols) = self.stage_shape(LayerId::new(j, i));
                let bound = (1.0f32 / rows as f32).sqrt();
                let values = (0..rows * cols)
                    .map(|_| {
                        let u = (rng.next_u32() >> 8) as f32 * (1.0 / (1u32 << 24) as f32);
                        (2.0 * u - 1.0) * bound
                    })
                    .collect();
                mlp.push(Stage {
                    weights: Matrix32::from_vec(rows, cols, values)?,
                    activation: self.activation,
                });
            }
            let aggregation = match self.architecture {
                Architecture::Ds => Aggregation::Sum { self_weight: 1.0 },
                Architecture::Gin => Aggregation::Sum {
                    self_weight: 1.0 + self.gin_eps,
                },
                Architecture::Gcn => Aggregation::GcnNorm,
            };
            layers.push(MpLayer { aggregation, mlp });
        }
        Ok(GnnModel {
            spec: self.clone(),
            seed,
            layers,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    pub spec: ModelSpec,
    pub seed: u64,
    pub layers: Vec<MpLayer>,
}

/// Builds a randomly initialized model; see [`ModelSpec::init`].
pub fn init_model(
    architecture: Architecture,
    input_dim: usize,
    hidden: usize,
    depth: usize,
    activation: Activation,
    seed: u64,
) -> Result<GnnModel> {
    ModelSpec::new(architecture, input_dim, hidden, depth, activation).init(seed)
}

impl GnnModel {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn stage(&self, layer: LayerId) -> Result<&Stage> {
        self.layers
            .get(layer.mp.wrapping_sub(1))
            .and_then(|l| l.mlp.get(layer.stage.wrapping_sub(1)))
            .ok_or_else(|| Error::LayerOutOfRange(layer.to_string()))
    }

    pub fn stage_mut(&mut self, layer: LayerId) -> Result<&mut Stage> {
        self.layers
            .get_mut(layer.mp.wrapping_sub(1))
            .and_then(|l| l.mlp.get_mut(layer.stage.wrapping_sub(1)))
            .ok_or_else(|| Error::LayerOutOfRange(layer.to_string()))
    }

    pub fn weights(&self, layer: LayerId) -> Result<&Matrix32> {
        self.stage(layer).map(|s| &s.weights)
    }

    pub fn weights_mut(&mut self, layer: LayerId) -> Result<&mut Matrix32> {
        self.stage_mut(layer).map(|s| &mut s.weights)
    }

    /// All stage addresses of MP layer `j`, in order.
    pub fn stages_of(&self, j: usize) -> Result<Vec<LayerId>> {
        let layer = self
            .layers
            .get(j.wrapping_sub(1))
            .ok_or_else(|| Error::LayerOutOfRange(format!("MP layer {j}")))?;
        Ok((1..=layer.mlp.len()).map(|i| LayerId::new(j, i)).collect())
    }

    pub fn all_stages(&self) -> Vec<LayerId> {
        (1..=self.depth())
            .flat_map(|j| (1..=self.layers[j - 1].mlp.len()).map(move |i| LayerId::new(j, i)))
            .collect()
    }

    /// Raw bit patterns of every weight, stage by stage.
    pub fn weight_bits(&self) -> Vec<u32> {
        self.layers
            .iter()
            .flat_map(|l| l.mlp.iter())
            .flat_map(|s| s.weights.values().iter().map(|w| w.to_bits()))
            .collect()
    }
}
