use serde::{Deserialize, Serialize};

use super::{Gradients, Model, NnError, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for every parameter of a model; frozen layers hold none.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T: Scalar = f32> {
    pub config: AdamConfig,
    m: Vec<Vec<Tensor<T>>>,
    v: Vec<Vec<Tensor<T>>>,
    t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(model: &Model<T>, config: AdamConfig) -> Self {
        let zeros = || {
            model
                .layers()
                .iter()
                .map(|l| {
                    if l.frozen {
                        Vec::new()
                    } else {
                        l.params().iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect()
                    }
                })
                .collect::<Vec<_>>()
        };
        Self {
            config,
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update on a flat slice.
///
/// `t` is the 1-based step number.
pub fn adam_update<T: Scalar>(cfg: &AdamConfig, t: u64, param: &mut [T], grad: &[T], m: &mut [T], v: &mut [T]) {
    let b1 = T::from_f64_lossy(cfg.beta1);
    let b2 = T::from_f64_lossy(cfg.beta2);
    let lr = T::from_f64_lossy(cfg.lr);
    let eps = T::from_f64_lossy(cfg.eps);
    let one = T::one();
    let c1 = one - b1.powi(t as i32);
    let c2 = one - b2.powi(t as i32);
    for i in 0..param.len() {
        let g = grad[i];
        m[i] = b1 * m[i] + (one - b1) * g;
        v[i] = b2 * v[i] + (one - b2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Applies one Adam step to every non-frozen parameter of `model`.
pub fn adam_step<T: Scalar>(model: &mut Model<T>, grads: &Gradients<T>, state: &mut AdamState<T>) -> Result<(), NnError> {
    if grads.params.len() != model.len() || state.m.len() != model.len() {
        return Err(NnError::ShapeMismatch("gradient set does not match the model".into()));
    }
    for (i, layer) in model.layers().iter().enumerate() {
        if layer.frozen || layer.params().is_empty() {
            continue;
        }
        let g = &grads.params[i];
        if g.len() != layer.params().len() {
            return Err(NnError::ShapeMismatch(format!("missing gradient for trainable layer {i}")));
        }
        for (p, gp) in layer.params().iter().zip(g) {
            if p.shape() != gp.shape() {
                return Err(NnError::ShapeMismatch(format!(
                    "layer {i}: gradient {:?} vs parameter {:?}",
                    gp.shape(),
                    p.shape()
                )));
            }
        }
    }
    state.t += 1;
    let t = state.t;
    let cfg = state.config;
    for (i, layer) in model.layers_mut().iter_mut().enumerate() {
        if layer.frozen {
            continue;
        }
        for (j, p) in layer.params_mut().iter_mut().enumerate() {
            adam_update(
                &cfg,
                t,
                p.data_mut(),
                grads.params[i][j].data(),
                state.m[i][j].data_mut(),
                state.v[i][j].data_mut(),
            );
        }
    }
    Ok(())
}
