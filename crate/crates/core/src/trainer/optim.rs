use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sgd" => Some(OptimizerKind::Sgd),
            "adam" => Some(OptimizerKind::Adam),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
}

const ADAM_EPS: f64 = 1e-8;

/// Optimizer state for one parameter block. SGD keeps the moment buffers
/// empty.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockOptimizer {
    pub t: u64,
    pub m: Vec<Tensor<f32>>,
    pub v: Vec<Tensor<f32>>,
}

impl BlockOptimizer {
    pub fn new(kind: OptimizerKind, params: &[Tensor<f32>]) -> Self {
        let zeros = || match kind {
            OptimizerKind::Adam => params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            OptimizerKind::Sgd => Vec::new(),
        };
        BlockOptimizer {
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn step(&mut self, cfg: &OptimizerConfig, params: &mut [Tensor<f32>], grads: &[Tensor<f32>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::invalid(format!("{} parameters but {} gradients", params.len(), grads.len())));
        }
        self.t += 1;
        let lr = cfg.lr as f32;
        match cfg.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
                        *pv -= lr * gv;
                    }
                }
            }
            OptimizerKind::Adam => {
                if self.m.len() != params.len() {
                    return Err(Error::invalid("Adam state does not match the parameter block"));
                }
                let (b1, b2) = (cfg.beta1 as f32, cfg.beta2 as f32);
                let c1 = (1.0 - cfg.beta1.powf(self.t as f64)) as f32;
                let c2 = (1.0 - cfg.beta2.powf(self.t as f64)) as f32;
                let eps = ADAM_EPS as f32;
                for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
                    let it = p
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(m.data_mut().iter_mut())
                        .zip(v.data_mut().iter_mut());
                    for (((pv, &gv), mv), vv) in it {
                        *mv = b1 * *mv + (1.0 - b1) * gv;
                        *vv = b2 * *vv + (1.0 - b2) * gv * gv;
                        let mh = *mv / c1;
                        let vh = *vv / c2;
                        *pv -= lr * mh / (vh.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}
