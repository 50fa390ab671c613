use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::net::{DenseNet, Gradients};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm ceiling; gradients above it are rescaled.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: Some(10.0),
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(Error::InvalidConfig("adam needs lr > 0, betas in [0, 1), eps > 0".into()));
        }
        if matches!(self.clip_norm, Some(c) if !(c > 0.0)) {
            return Err(Error::InvalidConfig("clip_norm must be positive".into()));
        }
        Ok(())
    }
}

/// Moment estimates for every parameter of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub(crate) m: Gradients,
    pub(crate) v: Gradients,
}

impl AdamState {
    pub fn new(net: &DenseNet, config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    pub(crate) fn from_parts(config: AdamConfig, step: u64, m: Gradients, v: Gradients) -> Self {
        Self { config, step, m, v }
    }
}

/// Outcome of one optimiser step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    /// Gradient norm before clipping.
    pub grad_norm: f64,
    pub clipped: bool,
}

/// Bias-corrected Adam update after optional global-norm clipping.
pub fn adam_step(net: &mut DenseNet, grads: &Gradients, state: &mut AdamState) -> Result<StepStats> {
    if grads.layers.len() != net.layers().len() || state.m.layers.len() != net.layers().len() {
        return Err(Error::DimensionMismatch {
            expected: net.layers().len(),
            got: grads.layers.len(),
        });
    }
    for ((g, _), l) in grads.layers.iter().zip(net.layers()) {
        if g.shape() != l.weights.shape() {
            return Err(Error::DimensionMismatch {
                expected: l.weights.len(),
                got: g.len(),
            });
        }
    }
    let cfg = state.config;
    let grad_norm = grads.norm();
    let scale = match cfg.clip_norm {
        Some(c) if grad_norm > c => {
            debug!("gradient norm {grad_norm:.3e} clipped to {c}");
            c / grad_norm
        }
        _ => 1.0,
    };
    state.step += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.step as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.step as i32);
    let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        let g = g * scale;
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        *p -= cfg.lr * (*m / bc1) / ((*v / bc2).sqrt() + cfg.eps);
    };
    for (l, layer) in net.layers_mut().iter_mut().enumerate() {
        let (gw, gb) = &grads.layers[l];
        let (mw, mb) = &mut state.m.layers[l];
        let (vw, vb) = &mut state.v.layers[l];
        apply(&mut layer.weights, gw, mw, vw, update);
        apply_vec(&mut layer.bias, gb, mb, vb, update);
    }
    Ok(StepStats {
        grad_norm,
        clipped: scale < 1.0,
    })
}

fn apply(
    p: &mut DMatrix<f64>,
    g: &DMatrix<f64>,
    m: &mut DMatrix<f64>,
    v: &mut DMatrix<f64>,
    f: impl Fn(&mut f64, f64, &mut f64, &mut f64),
) {
    for (((p, g), m), v) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
        f(p, *g, m, v);
    }
}

fn apply_vec(
    p: &mut DVector<f64>,
    g: &DVector<f64>,
    m: &mut DVector<f64>,
    v: &mut DVector<f64>,
    f: impl Fn(&mut f64, f64, &mut f64, &mut f64),
) {
    for (((p, g), m), v) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
        f(p, *g, m, v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Layer};

    fn scalar_net(w: f64) -> DenseNet {
        DenseNet::from_layers(vec![Layer {
            weights: DMatrix::from_element(1, 1, w),
            bias: DVector::from_element(1, 0.0),
            activation: Activation::Identity,
        }])
        .unwrap()
    }

    fn grad(gw: f64, gb: f64) -> Gradients {
        Gradients {
            layers: vec![(DMatrix::from_element(1, 1, gw), DVector::from_element(1, gb))],
        }
    }

    #[test]
    fn zero_gradient_is_no_op() {
        let mut net = scalar_net(0.7);
        let mut st = AdamState::new(&net, AdamConfig::default());
        for _ in 0..5 {
            adam_step(&mut net, &grad(0.0, 0.0), &mut st).unwrap();
        }
        assert_eq!(net.params(), vec![0.7, 0.0]);
    }

    #[test]
    fn first_step_by_hand() {
        let cfg = AdamConfig {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.99,
            eps: 1e-8,
            clip_norm: None,
        };
        let mut net = scalar_net(1.0);
        let mut st = AdamState::new(&net, cfg);
        adam_step(&mut net, &grad(0.5, -2.0), &mut st).unwrap();
        // m_hat = g, v_hat = g^2 after one step
        let expect_w = 1.0 - 0.01 * 0.5 / (0.5 + 1e-8);
        let expect_b = 0.0 + 0.01 * 2.0 / (2.0 + 1e-8);
        let p = net.params();
        assert!((p[0] - expect_w).abs() < 1e-15);
        assert!((p[1] - expect_b).abs() < 1e-15);
    }

    #[test]
    fn constant_gradient_step_tends_to_lr() {
        let cfg = AdamConfig {
            lr: 1e-3,
            clip_norm: None,
            ..AdamConfig::default()
        };
        let mut net = scalar_net(0.0);
        let mut st = AdamState::new(&net, cfg);
        let mut last = 0.0;
        let mut step = 0.0;
        for _ in 0..2000 {
            adam_step(&mut net, &grad(0.3, 0.0), &mut st).unwrap();
            let w = net.params()[0];
            step = last - w;
            last = w;
        }
        assert!((step - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn clipping_bounds_the_update() {
        let cfg = AdamConfig {
            clip_norm: Some(1.0),
            ..AdamConfig::default()
        };
        let mut net = scalar_net(0.0);
        let mut st = AdamState::new(&net, cfg);
        let s = adam_step(&mut net, &grad(30.0, 40.0), &mut st).unwrap();
        assert!(s.clipped);
        assert_eq!(s.grad_norm, 50.0);
        // clipped gradient (0.6, 0.8); m/v scale with it
        assert!((st.m.layers[0].0[(0, 0)] - 0.1 * 0.6).abs() < 1e-15);
    }
}
