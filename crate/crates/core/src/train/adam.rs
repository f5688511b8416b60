use crate::error::{Error, Result};
use crate::numcore::Parameterized;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update with decoupled weight decay, in place. `t` counts from 1.
///
/// ```text
/// p ← p − lr·wd·p                       (only when `decay`)
/// m ← β₁m + (1−β₁)g,  v ← β₂v + (1−β₂)g²
/// p ← p − lr · (m / (1−β₁ᵗ)) / (√(v / (1−β₂ᵗ)) + ε)
/// ```
pub fn adam_step<S: Scalar>(
    params: &mut [S],
    grads: &[S],
    m: &mut [S],
    v: &mut [S],
    cfg: &AdamConfig,
    t: u64,
    decay: bool,
) -> Result<()> {
    if grads.len() != params.len() || m.len() != params.len() || v.len() != params.len() {
        return Err(Error::Shape(format!(
            "adam: {} params, {} grads, {}/{} moments",
            params.len(),
            grads.len(),
            m.len(),
            v.len()
        )));
    }
    if t == 0 {
        return Err(Error::InvalidArgument("adam step count starts at 1".into()));
    }
    let lr = S::lit(cfg.lr);
    let (b1, b2) = (S::lit(cfg.beta1), S::lit(cfg.beta2));
    let c1 = S::one() - S::lit(cfg.beta1.powf(t as f64));
    let c2 = S::one() - S::lit(cfg.beta2.powf(t as f64));
    let shrink = S::one() - S::lit(cfg.lr * cfg.weight_decay);
    let eps = S::lit(cfg.eps);
    for i in 0..params.len() {
        let g = grads[i];
        if decay {
            params[i] *= shrink;
        }
        m[i] = b1 * m[i] + (S::one() - b1) * g;
        v[i] = b2 * v[i] + (S::one() - b2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Moment state shaped like the parameter registry it optimizes.
#[derive(Clone, Debug)]
pub struct Adam<P> {
    m: P,
    v: P,
    t: u64,
    cfg: AdamConfig,
}

impl<P> Adam<P> {
    pub fn steps(&self) -> u64 {
        self.t
    }
}

impl<P> Adam<P> {
    pub fn new<S: Scalar>(params: &P, cfg: AdamConfig) -> Self
    where
        P: Parameterized<S>,
    {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
            cfg,
        }
    }

    /// Weight decay applies to [`ParamKind::Weight`](crate::numcore::ParamKind) tensors only.
    pub fn step<S: Scalar>(&mut self, params: &mut P, grads: &P) -> Result<()>
    where
        P: Parameterized<S>,
    {
        self.t += 1;
        let g = grads.params();
        let mut m = self.m.params_mut();
        let mut v = self.v.params_mut();
        for (k, (info, p)) in params.params_mut().into_iter().enumerate() {
            adam_step(
                p.data_mut(),
                g[k].1.data(),
                m[k].1.data_mut(),
                v[k].1.data_mut(),
                &self.cfg,
                self.t,
                info.kind.decays(),
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Tensor2;

    fn no_decay(lr: f64) -> AdamConfig {
        AdamConfig {
            lr,
            weight_decay: 0.0,
            ..AdamConfig::default()
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = vec![1.0, -2.0, 0.5];
        let (mut m, mut v) = (vec![0.0; 3], vec![0.0; 3]);
        for t in 1..5 {
            adam_step(&mut p, &[0.0; 3], &mut m, &mut v, &no_decay(0.1), t, true).unwrap();
        }
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = vec![1.0f64];
        let (mut m, mut v) = (vec![0.0], vec![0.0]);
        let cfg = no_decay(0.001);
        adam_step(&mut p, &[1.0], &mut m, &mut v, &cfg, 1, true).unwrap();
        let expected = 1.0 - 0.001 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn decoupled_decay_shrinks_before_update() {
        let cfg = AdamConfig {
            lr: 0.01,
            weight_decay: 0.1,
            ..AdamConfig::default()
        };
        let mut p = vec![2.0f64, 2.0];
        let (mut m, mut v) = (vec![0.0; 2], vec![0.0; 2]);
        adam_step(&mut p[..1], &[0.0], &mut m[..1], &mut v[..1], &cfg, 1, true).unwrap();
        adam_step(
            &mut p[1..],
            &[0.0],
            &mut m[1..],
            &mut v[1..],
            &cfg,
            1,
            false,
        )
        .unwrap();
        assert!((p[0] - 2.0 * (1.0 - 0.001)).abs() < 1e-15);
        assert_eq!(p[1], 2.0);
    }

    #[test]
    fn constant_gradient_descends_monotonically() {
        let mut p = vec![0.0f64];
        let (mut m, mut v) = (vec![0.0], vec![0.0]);
        let mut prev = p[0];
        for t in 1..=100 {
            adam_step(
                &mut p,
                &[0.7],
                &mut m,
                &mut v,
                &AdamConfig::default(),
                t,
                true,
            )
            .unwrap();
            assert!(p[0] < prev);
            prev = p[0];
        }
    }

    #[test]
    fn tiny_learning_rate_barely_moves() {
        let mut p = vec![0.3f64, -1.2, 4.0];
        let orig = p.clone();
        let (mut m, mut v) = (vec![0.0; 3], vec![0.0; 3]);
        adam_step(
            &mut p,
            &[5.0, -0.01, 123.0],
            &mut m,
            &mut v,
            &no_decay(1e-12),
            1,
            true,
        )
        .unwrap();
        for (a, b) in p.iter().zip(&orig) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let mut p = vec![0.0f64; 2];
        let (mut m, mut v) = (vec![0.0; 2], vec![0.0; 2]);
        assert!(adam_step(
            &mut p,
            &[0.0],
            &mut m,
            &mut v,
            &AdamConfig::default(),
            1,
            true
        )
        .is_err());
        assert!(adam_step(
            &mut p,
            &[0.0; 2],
            &mut m,
            &mut v,
            &AdamConfig::default(),
            0,
            true
        )
        .is_err());
    }

    #[test]
    fn registry_step_counts_and_updates() {
        let mut w = Tensor2::row_vector(vec![1.0f64, 1.0]);
        let g = Tensor2::row_vector(vec![1.0, -1.0]);
        let mut opt = Adam::new(&w, no_decay(0.5));
        opt.step(&mut w, &g).unwrap();
        assert_eq!(opt.steps(), 1);
        assert!(w.data()[0] < 1.0 && w.data()[1] > 1.0);
    }
}
