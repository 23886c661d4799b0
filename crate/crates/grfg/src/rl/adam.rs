//! Adam with bias correction, one moment pair per network parameter.

use super::mlp::{Mlp, MlpGrads};

pub struct AdamState {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    pub(crate) t: u64,
    pub(crate) m: MlpGrads,
    pub(crate) v: MlpGrads,
}

impl AdamState {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: MlpGrads::zeros_like(net),
            v: MlpGrads::zeros_like(net),
        }
    }

    /// Apply one update from accumulated gradients. The step counter is
    /// shared across all parameter arrays, as in a single optimizer instance.
    pub fn step(&mut self, net: &mut Mlp, grads: &MlpGrads) {
        self.t += 1;
        let (t, lr, b1, b2, eps) = (self.t, self.lr, self.beta1, self.beta2, self.eps);
        update_array(
            &mut net.w1,
            &grads.w1,
            &mut self.m.w1,
            &mut self.v.w1,
            t,
            lr,
            b1,
            b2,
            eps,
        );
        update_array(
            &mut net.b1,
            &grads.b1,
            &mut self.m.b1,
            &mut self.v.b1,
            t,
            lr,
            b1,
            b2,
            eps,
        );
        update_array(
            &mut net.w2,
            &grads.w2,
            &mut self.m.w2,
            &mut self.v.w2,
            t,
            lr,
            b1,
            b2,
            eps,
        );
        update_array(
            &mut net.b2,
            &grads.b2,
            &mut self.m.b2,
            &mut self.v.b2,
            t,
            lr,
            b1,
            b2,
            eps,
        );
    }
}

#[allow(clippy::too_many_arguments)]
fn update_array(
    theta: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) {
    let bc1 = 1.0 - beta1.powi(t as i32);
    let bc2 = 1.0 - beta2.powi(t as i32);
    for i in 0..theta.len() {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_is_almost_lr() {
        // With g = 1 and t = 1 the bias-corrected moments are m_hat = 1 and
        // v_hat = 1, so the update is -lr / (1 + eps).
        let mut theta = [0.0];
        let mut m = [0.0];
        let mut v = [0.0];
        update_array(
            &mut theta,
            &[1.0],
            &mut m,
            &mut v,
            1,
            0.01,
            0.9,
            0.999,
            1e-8,
        );
        let expected = -0.01 / (1.0 + 1e-8);
        assert!((theta[0] - expected).abs() < 1e-18);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point_from_rest() {
        let mut theta = [3.5, -2.0];
        let mut m = [0.0, 0.0];
        let mut v = [0.0, 0.0];
        update_array(
            &mut theta,
            &[0.0, 0.0],
            &mut m,
            &mut v,
            1,
            0.01,
            0.9,
            0.999,
            1e-8,
        );
        assert_eq!(theta, [3.5, -2.0]);
    }

    #[test]
    fn descends_a_quadratic() {
        // Minimize (theta - 2)^2 by gradient steps; Adam should close most of
        // the distance in a few hundred iterations at lr 0.01.
        let mut theta = [0.0f64];
        let mut m = [0.0];
        let mut v = [0.0];
        for t in 1..=800 {
            let g = 2.0 * (theta[0] - 2.0);
            update_array(&mut theta, &[g], &mut m, &mut v, t, 0.01, 0.9, 0.999, 1e-8);
        }
        assert!((theta[0] - 2.0).abs() < 0.05, "theta = {}", theta[0]);
    }
}
