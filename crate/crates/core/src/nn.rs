//! Fully-connected layers, spectral normalization and class embeddings.
//!
//! Layers own their parameters as plain tensors. To use one in a forward
//! pass it is first *bound* to a [`Graph`]: binding copies the parameters in
//! as leaves, runs the spectral-norm power iteration when asked to, and
//! returns a handle whose node ids are later used to read gradients back.

use crate::autodiff::{Graph, NodeId};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

const NORM_FLOOR: f64 = 1e-12;

/// Pointwise nonlinearity applied after a dense layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
}

impl Activation {
    pub const DEFAULT_LEAKY_SLOPE: f64 = 0.1;

    pub fn apply(self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        match self {
            Activation::Identity => Ok(x),
            Activation::Relu => g.relu(x),
            Activation::LeakyRelu(alpha) => g.leaky_relu(x, alpha),
            Activation::Tanh => g.tanh(x),
            Activation::Sigmoid => g.sigmoid(x),
        }
    }

    /// Same function on a plain value, without recording anything.
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu(alpha) => {
                if x > 0.0 {
                    x
                } else {
                    alpha * x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }
}

/// Anything that owns trainable tensors, in a fixed order.
pub trait Parameters {
    fn parameters(&self) -> Vec<&Tensor>;
    fn parameters_mut(&mut self) -> Vec<&mut Tensor>;
    fn parameter_names(&self) -> Vec<String>;

    /// Number of stored trainable floats.
    fn param_count(&self) -> usize {
        self.parameters().iter().map(|t| t.len()).sum()
    }
}

/// Uniform Glorot initialization: `±√(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(rows: usize, cols: usize, fan_in: usize, fan_out: usize, rng: &mut Rng) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.uniform_range(-bound, bound)).collect();
    Tensor::from_vec(rows, cols, data).expect("length matches by construction")
}

pub(crate) fn random_unit(n: usize, rng: &mut Rng) -> Tensor {
    let mut t = Tensor::from_vec(n, 1, (0..n).map(|_| rng.normal()).collect()).expect("length matches by construction");
    normalize(&mut t);
    t
}

fn normalize(t: &mut Tensor) {
    let n = t.norm().max(NORM_FLOOR);
    for x in t.data_mut() {
        *x /= n;
    }
}

/// Largest-singular-value estimate for `weight` from the persistent left
/// vector `u`. With `advance` the vector takes one power-iteration step
/// first: `v ← Wᵀu/‖Wᵀu‖`, `u ← Wv/‖Wv‖`. Returns `σ̂ = uᵀWv`.
pub fn spectral_sigma(weight: &Tensor, u: &mut Tensor, advance: bool) -> f64 {
    let mut v = weight.matmul_tn(u).expect("u matches weight rows");
    normalize(&mut v);
    if advance {
        let mut wv = weight.matmul(&v).expect("v matches weight cols");
        normalize(&mut wv);
        *u = wv;
    }
    let wv = weight.matmul(&v).expect("v matches weight cols");
    u.dot(&wv).expect("same length")
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    /// `out × in`
    pub weight: Tensor,
    /// `out × 1`, absent for bias-free scorers.
    pub bias: Option<Tensor>,
    pub spectral_norm: bool,
    /// Persistent power-iteration vector, `out × 1`, unit norm.
    pub sn_u: Tensor,
}

/// A [`DenseLayer`] bound to a graph.
#[derive(Clone, Debug)]
pub struct DenseBinding {
    pub weight: NodeId,
    pub bias: Option<NodeId>,
    /// `W/σ̂` when spectral normalization is on, otherwise `weight`.
    pub effective: NodeId,
    pub sigma: f64,
}

impl DenseLayer {
    /// Glorot-initialized weights, zero bias, random unit `sn_u`. Draw order:
    /// weights row-major, then `sn_u`.
    pub fn new(input: usize, output: usize, bias: bool, spectral_norm: bool, rng: &mut Rng) -> Self {
        let weight = glorot_uniform(output, input, input, output, rng);
        let sn_u = random_unit(output, rng);
        DenseLayer {
            weight,
            bias: bias.then(|| Tensor::zeros(output, 1)),
            spectral_norm,
            sn_u,
        }
    }

    pub fn from_weights(weight: Tensor, bias: Option<Tensor>, spectral_norm: bool) -> Result<Self> {
        if let Some(b) = &bias {
            if b.rows() != weight.rows() || b.cols() != 1 {
                return Err(Error::dim("dense bias", weight.shape(), b.shape()));
            }
        }
        let mut sn_u = Tensor::full(weight.rows(), 1, 1.0);
        normalize(&mut sn_u);
        Ok(DenseLayer {
            weight,
            bias,
            spectral_norm,
            sn_u,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    /// Current `σ̂` without touching `sn_u`.
    pub fn sigma(&self) -> f64 {
        let mut u = self.sn_u.clone();
        spectral_sigma(&self.weight, &mut u, false)
    }

    /// Runs `iters` power iterations on the current weights.
    pub fn warm_up_spectral(&mut self, iters: usize) {
        for _ in 0..iters {
            spectral_sigma(&self.weight, &mut self.sn_u, true);
        }
    }

    /// The weight actually applied: `W/σ̂` with spectral normalization, else `W`.
    pub fn effective_weight(&self) -> Tensor {
        if self.spectral_norm {
            let sigma = self.sigma();
            self.weight.map(|x| x / sigma)
        } else {
            self.weight.clone()
        }
    }

    /// Copies parameters into `g`. With spectral normalization and
    /// `training`, `sn_u` advances exactly one step before `σ̂` is taken;
    /// `σ̂` enters the graph as a constant.
    pub fn bind(&mut self, g: &mut Graph, training: bool) -> Result<DenseBinding> {
        let weight = g.param(self.weight.clone())?;
        let bias = match &self.bias {
            Some(b) => Some(g.param(b.clone())?),
            None => None,
        };
        let (effective, sigma) = if self.spectral_norm {
            let sigma = spectral_sigma(&self.weight, &mut self.sn_u, training);
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::Numeric(format!("spectral norm estimate {sigma}")));
            }
            (g.div_const(weight, sigma)?, sigma)
        } else {
            (weight, 1.0)
        };
        Ok(DenseBinding {
            weight,
            bias,
            effective,
            sigma,
        })
    }

    /// Bind and apply in one go: `W_eff·x + b`.
    pub fn forward(&mut self, g: &mut Graph, x: NodeId, training: bool) -> Result<NodeId> {
        let binding = self.bind(g, training)?;
        binding.forward(g, x)
    }
}

impl DenseBinding {
    pub fn forward(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let y = g.matmul(self.effective, x)?;
        match self.bias {
            Some(b) => g.add_column(y, b),
            None => Ok(y),
        }
    }

    pub fn params(&self) -> Vec<NodeId> {
        std::iter::once(self.weight).chain(self.bias).collect()
    }
}

impl Parameters for DenseLayer {
    fn parameters(&self) -> Vec<&Tensor> {
        std::iter::once(&self.weight).chain(self.bias.as_ref()).collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        std::iter::once(&mut self.weight).chain(self.bias.as_mut()).collect()
    }

    fn parameter_names(&self) -> Vec<String> {
        let mut names = vec!["weight".to_string()];
        if self.bias.is_some() {
            names.push("bias".into());
        }
        names
    }
}

/// Stack of dense layers, each followed by its own activation.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
    pub activations: Vec<Activation>,
}

#[derive(Clone, Debug)]
pub struct MlpBinding {
    pub layers: Vec<DenseBinding>,
    activations: Vec<Activation>,
}

impl Mlp {
    /// `dims = [input, h1, …, output]`; `activations.len() == dims.len() - 1`.
    pub fn new(dims: &[usize], activations: Vec<Activation>, spectral_norm: bool, rng: &mut Rng) -> Result<Self> {
        if dims.is_empty() || activations.len() + 1 != dims.len() {
            return Err(Error::Contract(format!(
                "{} layer widths need {} activations, got {}",
                dims.len(),
                dims.len().saturating_sub(1),
                activations.len()
            )));
        }
        let layers = dims
            .windows(2)
            .map(|w| DenseLayer::new(w[0], w[1], true, spectral_norm, rng))
            .collect();
        Ok(Mlp { layers, activations })
    }

    pub fn from_layers(layers: Vec<DenseLayer>, activations: Vec<Activation>) -> Result<Self> {
        if layers.len() != activations.len() {
            return Err(Error::Contract("one activation per layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::dim("mlp layers", pair[0].weight.shape(), pair[1].weight.shape()));
            }
        }
        Ok(Mlp { layers, activations })
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.layers.first().map(DenseLayer::input_dim)
    }

    pub fn output_dim(&self) -> Option<usize> {
        self.layers.last().map(DenseLayer::output_dim)
    }

    pub fn bind(&mut self, g: &mut Graph, training: bool) -> Result<MlpBinding> {
        let layers = self
            .layers
            .iter_mut()
            .map(|l| l.bind(g, training))
            .collect::<Result<_>>()?;
        Ok(MlpBinding {
            layers,
            activations: self.activations.clone(),
        })
    }

    pub fn forward(&mut self, g: &mut Graph, x: NodeId, training: bool) -> Result<NodeId> {
        self.bind(g, training)?.forward(g, x)
    }

    /// Smallest `|pre-activation|` feeding a ReLU-type activation on input
    /// `x`, or `+∞` if there is none. Finite differences with step `h` are
    /// only meaningful when this clears `h` times the largest upstream gain.
    pub fn kink_margin(&self, x: &Tensor) -> Result<f64> {
        let mut net = self.clone();
        let mut g = Graph::new();
        let b = net.bind(&mut g, false)?;
        let mut h = g.input(x.clone())?;
        let mut margin = f64::INFINITY;
        for (layer, act) in b.layers.iter().zip(&b.activations) {
            h = layer.forward(&mut g, h)?;
            if matches!(act, Activation::Relu | Activation::LeakyRelu(_)) {
                margin = g.value(h).data().iter().fold(margin, |m, v| m.min(v.abs()));
            }
            h = act.apply(&mut g, h)?;
        }
        Ok(margin)
    }
}

impl MlpBinding {
    pub fn forward(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let mut h = x;
        for (layer, act) in self.layers.iter().zip(&self.activations) {
            h = layer.forward(g, h)?;
            h = act.apply(g, h)?;
        }
        Ok(h)
    }

    pub fn params(&self) -> Vec<NodeId> {
        self.layers.iter().flat_map(DenseBinding::params).collect()
    }
}

impl Parameters for Mlp {
    fn parameters(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.parameters()).collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.parameters_mut()).collect()
    }

    fn parameter_names(&self) -> Vec<String> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.parameter_names().into_iter().map(move |n| format!("layer{i}.{n}")))
            .collect()
    }
}

/// Per-class vectors, one row per class.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassEmbedding {
    pub table: Tensor,
}

impl ClassEmbedding {
    pub fn new(num_classes: usize, dim: usize, rng: &mut Rng) -> Self {
        ClassEmbedding {
            table: glorot_uniform(num_classes, dim, num_classes, dim, rng),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.table.rows()
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    pub fn bind(&self, g: &mut Graph) -> Result<NodeId> {
        g.param(self.table.clone())
    }

    /// Looks up one row per label; the result is `dim × labels.len()`.
    pub fn embed(g: &mut Graph, table: NodeId, labels: &[usize]) -> Result<NodeId> {
        g.gather(table, labels)
    }
}

impl Parameters for ClassEmbedding {
    fn parameters(&self) -> Vec<&Tensor> {
        vec![&self.table]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.table]
    }

    fn parameter_names(&self) -> Vec<String> {
        vec!["embedding".into()]
    }
}
