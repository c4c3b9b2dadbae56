use crate::error::{Error, Result};
use crate::layers::LayerParams;
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SgdConfig {
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            momentum: 0.9,
            weight_decay: 5e-4,
        }
    }
}

/// Velocities mirroring the parameter blocks, plus progress counters.
#[derive(Clone, Debug, PartialEq)]
pub struct OptState<T = f32> {
    velocity: Vec<Option<LayerParams<T>>>,
    pub iteration: usize,
    pub epoch: usize,
}

impl<T: Real> OptState<T> {
    pub fn new(params: &[Option<LayerParams<T>>]) -> Self {
        Self {
            velocity: params.iter().map(|p| p.as_ref().map(LayerParams::zeros_like)).collect(),
            iteration: 0,
            epoch: 0,
        }
    }

    pub fn velocity(&self) -> &[Option<LayerParams<T>>] {
        &self.velocity
    }
}

fn step_block<T: Real>(
    p: &mut Tensor<T>,
    g: &Tensor<T>,
    v: &mut Tensor<T>,
    cfg: &SgdConfig,
    lr: f64,
    name: impl Fn() -> String,
) -> Result<()> {
    if p.shape() != g.shape() {
        let (e, a) = (p.len(), g.len());
        return Err(Error::shape(name(), "gradient length", e, a));
    }
    if !g.all_finite() {
        return Err(Error::NonFinite(format!("gradient of {}", name())));
    }
    let (mu, wd, lr) = (T::lit(cfg.momentum), T::lit(cfg.weight_decay), T::lit(lr));
    let mut next = p.data().to_vec();
    let mut vel = v.data().to_vec();
    for ((pi, &gi), vi) in next.iter_mut().zip(g.data()).zip(vel.iter_mut()) {
        let step = gi + wd * *pi;
        *vi = mu * *vi - lr * step;
        *pi += mu * *vi - lr * step;
        if !pi.is_finite() {
            return Err(Error::NonFinite(format!("update of {}", name())));
        }
    }
    p.data_mut().copy_from_slice(&next);
    v.data_mut().copy_from_slice(&vel);
    Ok(())
}

/// One Nesterov momentum step on every parameter block:
///
/// ```text
/// g' = g + weight_decay * p
/// v  = momentum * v - lr * g'
/// p  = p + momentum * v - lr * g'
/// ```
///
/// Weight decay applies to biases too. Nothing is written for a block whose
/// gradient or update is not finite.
pub fn sgd_nesterov_step<T: Real>(
    params: &mut [Option<LayerParams<T>>],
    grads: &[Option<LayerParams<T>>],
    state: &mut OptState<T>,
    cfg: &SgdConfig,
    lr: f64,
) -> Result<()> {
    if !(lr > 0.0) {
        return Err(Error::config(format!("learning rate must be positive, got {lr}")));
    }
    if params.len() != grads.len() || params.len() != state.velocity.len() {
        return Err(Error::shape("optimizer", "parameter blocks", params.len(), grads.len()));
    }
    for (i, ((p, g), v)) in params.iter_mut().zip(grads).zip(&mut state.velocity).enumerate() {
        match (p, g, v) {
            (Some(p), Some(g), Some(v)) => {
                step_block(&mut p.weights, &g.weights, &mut v.weights, cfg, lr, || {
                    format!("layer {} weights", i + 1)
                })?;
                step_block(&mut p.bias, &g.bias, &mut v.bias, cfg, lr, || format!("layer {} bias", i + 1))?;
            }
            (None, None, None) => {}
            _ => {
                return Err(Error::config(format!(
                    "layer {}: parameters, gradients and velocities disagree on presence",
                    i + 1
                )))
            }
        }
    }
    state.iteration += 1;
    Ok(())
}

/// Rescales each weight row (one output unit) whose L2 norm exceeds `cap`
/// down to norm `cap`. Biases are untouched.
pub fn apply_maxnorm<T: Real>(params: &mut LayerParams<T>, cap: f64) {
    let fan_in = params.weights.len() / params.weights.shape()[0];
    for row in params.weights.data_mut().chunks_mut(fan_in) {
        let norm = row.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>().sqrt();
        if norm > cap {
            let s = T::lit(cap / norm);
            for v in row.iter_mut() {
                *v *= s;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(p: f64) -> Vec<Option<LayerParams<f64>>> {
        vec![
            None,
            Some(LayerParams {
                weights: Tensor::new(vec![1, 1], vec![p]).unwrap(),
                bias: Tensor::new(vec![1], vec![p]).unwrap(),
            }),
        ]
    }

    #[test]
    fn nesterov_two_steps() {
        let mut params = scalar(0.0);
        let grads = scalar(1.0);
        let mut state = OptState::new(&params);
        let cfg = SgdConfig {
            momentum: 0.9,
            weight_decay: 0.0,
        };
        sgd_nesterov_step(&mut params, &grads, &mut state, &cfg, 0.1).unwrap();
        let w = |p: &[Option<LayerParams<f64>>]| p[1].as_ref().unwrap().weights.data()[0];
        assert!((w(&params) + 0.19).abs() < 1e-12);
        assert!((w(state.velocity()) + 0.1).abs() < 1e-12);
        sgd_nesterov_step(&mut params, &grads, &mut state, &cfg, 0.1).unwrap();
        assert!((w(&params) + 0.461).abs() < 1e-12);
        assert!((w(state.velocity()) + 0.19).abs() < 1e-12);
        assert_eq!(state.iteration, 2);
    }

    #[test]
    fn plain_sgd_without_momentum() {
        let mut params = scalar(2.0);
        let grads = scalar(0.5);
        let mut state = OptState::new(&params);
        let cfg = SgdConfig {
            momentum: 0.0,
            weight_decay: 0.0,
        };
        sgd_nesterov_step(&mut params, &grads, &mut state, &cfg, 0.1).unwrap();
        assert_eq!(params[1].as_ref().unwrap().weights.data()[0], 2.0 - 0.05);
    }

    #[test]
    fn decay_shrinks_toward_zero() {
        let mut params = scalar(1.0);
        let grads = scalar(0.0);
        let mut state = OptState::new(&params);
        let cfg = SgdConfig {
            momentum: 0.0,
            weight_decay: 0.1,
        };
        let mut prev = 1.0;
        for _ in 0..50 {
            sgd_nesterov_step(&mut params, &grads, &mut state, &cfg, 0.1).unwrap();
            let p = params[1].as_ref().unwrap().weights.data()[0];
            assert!(p < prev && p > 0.0);
            prev = p;
        }
    }

    #[test]
    fn non_finite_gradient_names_block() {
        let mut params = scalar(1.0);
        let mut grads = scalar(0.0);
        grads[1].as_mut().unwrap().bias.data_mut()[0] = f64::NAN;
        let mut state = OptState::new(&params);
        let err = sgd_nesterov_step(&mut params, &grads, &mut state, &SgdConfig::default(), 0.1).unwrap_err();
        assert!(err.to_string().contains("layer 2 bias"), "{err}");
    }

    #[test]
    fn maxnorm_rescales_long_rows() {
        let mut p = LayerParams {
            weights: Tensor::new(vec![2, 2], vec![3.0, 4.0, 0.6, 0.8]).unwrap(),
            bias: Tensor::new(vec![2], vec![10.0, 10.0]).unwrap(),
        };
        apply_maxnorm(&mut p, 2.5);
        assert_eq!(p.weights.data(), &[1.5, 2.0, 0.6, 0.8]);
        assert_eq!(p.bias.data(), &[10.0, 10.0]);
    }
}
