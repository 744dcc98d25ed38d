use crate::error::{Error, Result};

use super::{ModelParams, Weights};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f32,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 2e-3,
            beta1: 0.9,
            beta2: 0.99,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Weights<f32>,
    pub v: Weights<f32>,
    pub t: u64,
}

impl Default for AdamState {
    fn default() -> Self {
        AdamState {
            m: Weights::zeros(),
            v: Weights::zeros(),
            t: 0,
        }
    }
}

/// Bias-corrected Adam update. Parameters are left untouched if any
/// gradient is non-finite.
pub fn adam_step(params: &mut ModelParams<f32>, grads: &Weights<f32>, state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    if cfg.lr <= 0.0 {
        return Err(Error::Config(format!("learning rate must be positive, got {}", cfg.lr)));
    }
    if let Some((name, _, _)) = grads
        .tensors()
        .into_iter()
        .find(|(_, _, data)| data.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::NonFinite(format!(
            "gradient of {name} at Adam step {}",
            state.t + 1
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let b1 = cfg.beta1 as f32;
    let b2 = cfg.beta2 as f32;
    let one_minus_b1 = (1.0 - cfg.beta1) as f32;
    let one_minus_b2 = (1.0 - cfg.beta2) as f32;
    let corr1 = (1.0 - cfg.beta1.powi(t)) as f32;
    let corr2 = (1.0 - cfg.beta2.powi(t)) as f32;
    let eps = cfg.eps as f32;

    let slices = params
        .weights
        .slices_mut()
        .zip(grads.slices())
        .zip(state.m.slices_mut().zip(state.v.slices_mut()));
    for ((p, g), (m, v)) in slices {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + one_minus_b1 * g[i];
            v[i] = b2 * v[i] + one_minus_b2 * g[i] * g[i];
            let m_hat = m[i] / corr1;
            let v_hat = v[i] / corr2;
            p[i] -= cfg.lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::init_params;
    use crate::rng::Rng;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut params = init_params(&mut Rng::new(1), 0.5);
        let before = params.clone();
        let mut state = AdamState::default();
        adam_step(&mut params, &Weights::zeros(), &mut state, &AdamConfig::default()).unwrap();
        assert_eq!(params, before);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut params = init_params(&mut Rng::new(1), 0.5);
        let before = params.clone();
        let mut ones = Weights::zeros();
        ones.slices_mut().for_each(|s| s.fill(1.0));
        let mut state = AdamState::default();
        let cfg = AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        };
        adam_step(&mut params, &ones, &mut state, &cfg).unwrap();
        for (a, b) in before.weights.slices().zip(params.weights.slices()) {
            for (x, y) in a.iter().zip(b) {
                assert!(((x - y) - 0.1).abs() < 1e-6, "{x} -> {y}");
            }
        }
        assert_eq!(state.t, 1);
        assert!(state.v.slices().flatten().all(|&v| v >= 0.0));
    }

    #[test]
    fn nan_gradient_aborts() {
        let mut params = init_params(&mut Rng::new(1), 0.5);
        let before = params.clone();
        let mut g = Weights::zeros();
        g.layers[2].bias[3] = f32::NAN;
        let mut state = AdamState::default();
        let err = adam_step(&mut params, &g, &mut state, &AdamConfig::default()).unwrap_err();
        assert!(err.to_string().contains("conv3.bias"));
        assert_eq!(params, before);
        assert_eq!(state.t, 0);
    }
}
