use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// Adam hyperparameters. `weight_decay` adds `weight_decay * theta` to the
/// gradient before the moment updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &[Tensor<T>]) -> Self {
        AdamState {
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update. A non-finite gradient rejects the whole
/// step and leaves parameters and state untouched.
pub fn adam_step<T: Real>(
    params: &mut [Tensor<T>],
    grads: &[Tensor<T>],
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "{} params, {} grads, {} state slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.m[i].shape() {
            return Err(Error::Shape(format!("parameter {i} shape mismatch")));
        }
        if !g.all_finite() {
            return Err(Error::NonFinite(format!("gradient of parameter {i}")));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
    let (one_b1, one_b2) = (T::lit(1.0 - cfg.beta1), T::lit(1.0 - cfg.beta2));
    let wd = T::lit(cfg.weight_decay);
    let step_size = T::lit(cfg.lr / bc1);
    let inv_sqrt_bc2 = T::lit(1.0 / bc2.sqrt());
    let eps = T::lit(cfg.eps);
    for (i, p) in params.iter_mut().enumerate() {
        let g = grads[i].data();
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (j, theta) in p.data_mut().iter_mut().enumerate() {
            let gj = g[j] + wd * *theta;
            m[j] = b1 * m[j] + one_b1 * gj;
            v[j] = b2 * v[j] + one_b2 * gj * gj;
            let denom = v[j].sqrt() * inv_sqrt_bc2 + eps;
            *theta = *theta - step_size * m[j] / denom;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut p = vec![Tensor::<f64>::from_f64(&[1, 3], &[1.0, -2.0, 0.5]).unwrap()];
        let before = p.clone();
        let g = vec![Tensor::zeros(&[1, 3])];
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, &AdamConfig::default()).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_lr_sign() {
        let mut p = vec![Tensor::<f64>::from_f64(&[1, 3], &[0.0, 0.0, 0.0]).unwrap()];
        let g = vec![Tensor::from_f64(&[1, 3], &[3.0, -0.01, 250.0]).unwrap()];
        let mut s = AdamState::new(&p);
        let cfg = AdamConfig { lr: 0.1, ..Default::default() };
        adam_step(&mut p, &g, &mut s, &cfg).unwrap();
        for (x, gv) in p[0].data().iter().zip(g[0].data()) {
            assert!((x + 0.1 * gv.signum()).abs() < 1e-6);
        }
    }

    #[test]
    fn quadratic_bowl_converges() {
        let mut p = vec![Tensor::<f64>::scalar(1.0)];
        let mut s = AdamState::new(&p);
        let cfg = AdamConfig { lr: 0.1, ..Default::default() };
        for _ in 0..200 {
            let theta = p[0].data()[0];
            let g = vec![Tensor::scalar(2.0 * theta)];
            adam_step(&mut p, &g, &mut s, &cfg).unwrap();
        }
        assert!(p[0].data()[0].abs() < 1e-3, "theta = {}", p[0].data()[0]);
    }

    #[test]
    fn non_finite_rejected_without_change() {
        let mut p = vec![Tensor::<f32>::scalar(1.0)];
        let mut s = AdamState::new(&p);
        let g = vec![Tensor::scalar(f32::NAN)];
        assert!(matches!(
            adam_step(&mut p, &g, &mut s, &AdamConfig::default()),
            Err(Error::NonFinite(_))
        ));
        assert_eq!(p[0].data(), &[1.0]);
        assert_eq!(s.step, 0);
    }

    #[test]
    fn weight_decay_shrinks() {
        let mut p = vec![Tensor::<f64>::scalar(2.0)];
        let mut s = AdamState::new(&p);
        let cfg = AdamConfig { weight_decay: 0.5, ..Default::default() };
        adam_step(&mut p, &[Tensor::scalar(0.0)], &mut s, &cfg).unwrap();
        assert!(p[0].data()[0] < 2.0);
    }
}
