//! Generator and discriminator for the toy mixture task.

use crate::autodiff::{Graph, NodeId};
use crate::cr_head::{CCRBinding, CCRHead, CRBinding, CRHead};
use crate::error::{Error, Result};
use crate::nn::{Activation, ClassEmbedding, DenseBinding, DenseLayer, Mlp, MlpBinding, Parameters};
use crate::tensor::Tensor;

/// Width of the class embedding concatenated to the generator's latent input.
pub const GENERATOR_CLASS_DIM: usize = 8;

/// `z (+ class embedding) → MLP → 2D point`.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub net: Mlp,
    pub class_embedding: Option<ClassEmbedding>,
}

#[derive(Clone, Debug)]
pub struct GeneratorBinding {
    pub net: MlpBinding,
    pub table: Option<NodeId>,
}

impl Generator {
    pub fn latent_dim(&self) -> usize {
        let total = self.net.input_dim().unwrap_or(0);
        total - self.class_embedding.as_ref().map_or(0, ClassEmbedding::dim)
    }

    pub fn is_conditional(&self) -> bool {
        self.class_embedding.is_some()
    }

    pub fn bind(&mut self, g: &mut Graph) -> Result<GeneratorBinding> {
        let net = self.net.bind(g, true)?;
        let table = match &self.class_embedding {
            Some(e) => Some(e.bind(g)?),
            None => None,
        };
        Ok(GeneratorBinding { net, table })
    }

    /// Plain forward pass for sampling: `latent` is `latent_dim × n`.
    pub fn generate(&self, latent: &Tensor, labels: Option<&[usize]>) -> Result<Tensor> {
        let mut gen = self.clone();
        let mut g = Graph::new();
        let binding = gen.bind(&mut g)?;
        let z = g.input(latent.clone())?;
        let out = binding.forward(&mut g, z, labels)?;
        Ok(g.value(out).clone())
    }
}

impl GeneratorBinding {
    pub fn forward(&self, g: &mut Graph, z: NodeId, labels: Option<&[usize]>) -> Result<NodeId> {
        let input = match (self.table, labels) {
            (Some(table), Some(labels)) => {
                let e = ClassEmbedding::embed(g, table, labels)?;
                g.concat_rows(&[z, e])?
            }
            (None, None) => z,
            (Some(_), None) => return Err(Error::Contract("conditional generator needs labels".into())),
            (None, Some(_)) => return Err(Error::Contract("unconditional generator got labels".into())),
        };
        self.net.forward(g, input)
    }

    pub fn params(&self) -> Vec<NodeId> {
        self.net.params().into_iter().chain(self.table).collect()
    }
}

impl Parameters for Generator {
    fn parameters(&self) -> Vec<&Tensor> {
        let mut p = self.net.parameters();
        if let Some(e) = &self.class_embedding {
            p.extend(e.parameters());
        }
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.net.parameters_mut();
        if let Some(e) = &mut self.class_embedding {
            p.extend(e.parameters_mut());
        }
        p
    }

    fn parameter_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .net
            .parameter_names()
            .into_iter()
            .map(|n| format!("G.{n}"))
            .collect();
        if self.class_embedding.is_some() {
            names.push("G.class_embedding".into());
        }
        names
    }
}

/// Final scoring stage of the discriminator.
#[derive(Clone, Debug, PartialEq)]
pub enum Head {
    /// A single bias-free inner product: the traditional discriminator output.
    Dense(DenseLayer),
    Cascade(CRHead),
    Conditional(CCRHead),
}

#[derive(Clone, Debug)]
pub enum HeadBinding {
    Dense(DenseBinding),
    Cascade(CRBinding),
    Conditional(CCRBinding),
}

impl Head {
    pub fn num_scores(&self) -> usize {
        match self {
            Head::Dense(_) => 1,
            Head::Cascade(h) => h.num_scores(),
            Head::Conditional(h) => h.num_scores(),
        }
    }

    pub fn is_conditional(&self) -> bool {
        matches!(self, Head::Conditional(_))
    }

    pub fn bind(&mut self, g: &mut Graph, training: bool) -> Result<HeadBinding> {
        Ok(match self {
            Head::Dense(l) => HeadBinding::Dense(l.bind(g, training)?),
            Head::Cascade(h) => HeadBinding::Cascade(h.bind(g, training)?),
            Head::Conditional(h) => HeadBinding::Conditional(h.bind(g, training)?),
        })
    }

    fn params(&self) -> Vec<&Tensor> {
        match self {
            Head::Dense(l) => l.parameters(),
            Head::Cascade(h) => h.parameters(),
            Head::Conditional(h) => h.parameters(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Head::Dense(l) => l.parameters_mut(),
            Head::Cascade(h) => h.parameters_mut(),
            Head::Conditional(h) => h.parameters_mut(),
        }
    }

    fn names(&self) -> Vec<String> {
        match self {
            Head::Dense(l) => l.parameter_names().into_iter().map(|n| format!("dense.{n}")).collect(),
            Head::Cascade(h) => h.parameter_names(),
            Head::Conditional(h) => h.parameter_names(),
        }
    }
}

impl HeadBinding {
    /// `N × B` scores for `C_L × B` features.
    pub fn forward(&self, g: &mut Graph, features: NodeId, labels: Option<&[usize]>) -> Result<NodeId> {
        match (self, labels) {
            (HeadBinding::Dense(b), None) => b.forward(g, features),
            (HeadBinding::Cascade(b), None) => b.forward(g, features),
            (HeadBinding::Conditional(b), Some(labels)) => b.forward(g, features, labels),
            (HeadBinding::Conditional(_), None) => Err(Error::Contract("conditional head needs labels".into())),
            (_, Some(_)) => Err(Error::Contract("unconditional head got labels".into())),
        }
    }

    pub fn params(&self) -> Vec<NodeId> {
        match self {
            HeadBinding::Dense(b) => b.params(),
            HeadBinding::Cascade(b) => b.params(),
            HeadBinding::Conditional(b) => b.params(),
        }
    }
}

/// MLP trunk producing the feature vector `v₁`, followed by a scoring head.
#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator {
    pub trunk: Mlp,
    pub head: Head,
}

#[derive(Clone, Debug)]
pub struct DiscriminatorBinding {
    pub trunk: MlpBinding,
    pub head: HeadBinding,
}

impl Discriminator {
    pub fn feature_dim(&self) -> usize {
        self.trunk.output_dim().or(self.trunk.input_dim()).unwrap_or(2)
    }

    pub fn bind(&mut self, g: &mut Graph, training: bool) -> Result<DiscriminatorBinding> {
        Ok(DiscriminatorBinding {
            trunk: self.trunk.bind(g, training)?,
            head: self.head.bind(g, training)?,
        })
    }

    /// Scores without updating any spectral-norm state.
    pub fn scores(&self, x: &Tensor, labels: Option<&[usize]>) -> Result<Tensor> {
        let mut d = self.clone();
        let mut g = Graph::new();
        let b = d.bind(&mut g, false)?;
        let xi = g.input(x.clone())?;
        let s = b.forward(&mut g, xi, labels)?;
        Ok(g.value(s).clone())
    }
}

impl DiscriminatorBinding {
    pub fn forward(&self, g: &mut Graph, x: NodeId, labels: Option<&[usize]>) -> Result<NodeId> {
        let features = self.trunk.forward(g, x)?;
        self.head.forward(g, features, labels)
    }

    pub fn params(&self) -> Vec<NodeId> {
        let mut p = self.trunk.params();
        p.extend(self.head.params());
        p
    }
}

impl Parameters for Discriminator {
    fn parameters(&self) -> Vec<&Tensor> {
        let mut p = self.trunk.parameters();
        p.extend(self.head.params());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.trunk.parameters_mut();
        p.extend(self.head.params_mut());
        p
    }

    fn parameter_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .trunk
            .parameter_names()
            .into_iter()
            .map(|n| format!("D.{n}"))
            .collect();
        names.extend(self.head.names().into_iter().map(|n| format!("D.{n}")));
        names
    }
}

/// Activation list for `hidden` layers of `act` followed by one linear output layer.
pub fn hidden_then_linear(hidden: usize, act: Activation) -> Vec<Activation> {
    let mut acts = vec![act; hidden];
    acts.push(Activation::Identity);
    acts
}
