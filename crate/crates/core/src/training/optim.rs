//! Parameter update rules.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, Graph};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

fn default_kind() -> OptimizerKind {
    OptimizerKind::Adam
}
fn default_learning_rate() -> f64 {
    0.001
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}
fn default_epochs() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "default_kind")]
    pub kind: OptimizerKind,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: default_kind(),
            learning_rate: default_learning_rate(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
            epochs: default_epochs(),
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64, epochs: usize) -> Self {
        OptimizerConfig { kind: OptimizerKind::Sgd, learning_rate, epochs, ..Default::default() }
    }

    pub fn adam(learning_rate: f64, epochs: usize) -> Self {
        OptimizerConfig { kind: OptimizerKind::Adam, learning_rate, epochs, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Optimizer state: per-parameter moments and a step counter.
#[derive(Clone, Debug)]
pub struct Optimizer {
    config: OptimizerConfig,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
    steps: u64,
}

impl Optimizer {
    pub fn new(config: &OptimizerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Optimizer { config: config.clone(), first: Vec::new(), second: Vec::new(), steps: 0 })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update to every trainable parameter of `graph`.
    pub fn step(&mut self, graph: &mut Graph, grads: &Gradients) -> Result<()> {
        let params = graph.params_mut();
        if grads.params().len() != params.len() {
            return Err(Error::Config(format!(
                "gradient set has {} tensors but the graph has {} parameters",
                grads.params().len(),
                params.len()
            )));
        }
        for (p, g) in params.iter().zip(grads.params()) {
            if g.shape() != p.value.shape() {
                return Err(Error::shape(format!("gradient of `{}`", p.name), format!("{:?}", p.value.shape()), format!("{:?}", g.shape())));
            }
            if p.trainable && !g.is_finite() {
                return Err(Error::NonFinite(format!("gradient of parameter `{}`", p.name)));
            }
        }
        if self.first.is_empty() {
            self.first = params.iter().map(|p| Tensor::zeros(p.value.shape().to_vec())).collect();
            self.second = self.first.clone();
        }
        self.steps += 1;
        let c = &self.config;
        let lr = c.learning_rate;
        let t = self.steps as i32;
        let (bias1, bias2) = (1.0 - c.beta1.powi(t), 1.0 - c.beta2.powi(t));
        for (i, (p, g)) in params.iter_mut().zip(grads.params()).enumerate() {
            if !p.trainable {
                continue;
            }
            let w = p.value.data_mut();
            match c.kind {
                OptimizerKind::Sgd => {
                    for (w, g) in w.iter_mut().zip(g.data()) {
                        *w -= lr * g;
                    }
                }
                OptimizerKind::Adam => {
                    let m = self.first[i].data_mut();
                    let v = self.second[i].data_mut();
                    for k in 0..w.len() {
                        let gk = g.data()[k];
                        m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * gk;
                        v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * gk * gk;
                        let m_hat = m[k] / bias1;
                        let v_hat = v[k] / bias2;
                        w[k] -= lr * m_hat / (v_hat.sqrt() + c.epsilon);
                    }
                }
            }
        }
        Ok(())
    }
}
