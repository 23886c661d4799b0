//! Two-layer ReLU perceptron with manual backprop. Small enough that a
//! hand-rolled dense implementation beats pulling in a tensor library, and
//! every arithmetic step stays deterministic and inspectable.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Dense `input -> hidden -> output` network, ReLU after the first layer,
/// linear output. Weight matrices are flat row-major: `w1[h * input + i]`
/// connects input `i` to hidden unit `h`.
pub struct Mlp {
    pub(crate) input_dim: usize,
    pub(crate) hidden_dim: usize,
    pub(crate) output_dim: usize,
    pub(crate) w1: Vec<f64>,
    pub(crate) b1: Vec<f64>,
    pub(crate) w2: Vec<f64>,
    pub(crate) b2: Vec<f64>,
}

/// Parameter-shaped gradient accumulator.
pub struct MlpGrads {
    pub(crate) w1: Vec<f64>,
    pub(crate) b1: Vec<f64>,
    pub(crate) w2: Vec<f64>,
    pub(crate) b2: Vec<f64>,
}

impl Mlp {
    /// Fresh network with uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` weights
    /// and biases per layer. Draw order is w1, b1, w2, b2, each row-major, so
    /// identical seeds give identical networks.
    pub fn new(
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        assert!(input_dim > 0 && hidden_dim > 0 && output_dim > 0);
        let bound1 = 1.0 / (input_dim as f64).sqrt();
        let bound2 = 1.0 / (hidden_dim as f64).sqrt();
        let mut draw = |n: usize, bound: f64| -> Vec<f64> {
            (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
        };
        let w1 = draw(hidden_dim * input_dim, bound1);
        let b1 = draw(hidden_dim, bound1);
        let w2 = draw(output_dim * hidden_dim, bound2);
        let b2 = draw(output_dim, bound2);
        Mlp {
            input_dim,
            hidden_dim,
            output_dim,
            w1,
            b1,
            w2,
            b2,
        }
    }

    /// Build a network from explicit parameter arrays (row-major, as
    /// documented on the struct). Lengths must match the dimensions.
    pub fn from_parts(
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: Vec<f64>,
    ) -> crate::Result<Self> {
        if input_dim == 0 || hidden_dim == 0 || output_dim == 0 {
            return Err(crate::Error::Config(
                "network dimensions must be positive".to_string(),
            ));
        }
        for (got, expected) in [
            (w1.len(), hidden_dim * input_dim),
            (b1.len(), hidden_dim),
            (w2.len(), output_dim * hidden_dim),
            (b2.len(), output_dim),
        ] {
            if got != expected {
                return Err(crate::Error::DimMismatch { expected, got });
            }
        }
        Ok(Mlp {
            input_dim,
            hidden_dim,
            output_dim,
            w1,
            b1,
            w2,
            b2,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// The four parameter arrays: w1, b1, w2, b2.
    pub fn params(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    /// Mutable access to the same four arrays, in the same order.
    pub fn params_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cached(x).0
    }

    /// Forward pass returning the output and the post-ReLU hidden activations
    /// needed by `backward`.
    pub fn forward_cached(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        debug_assert_eq!(x.len(), self.input_dim);
        let rows1 = self.w1.chunks_exact(self.input_dim).zip(&self.b1);
        let hidden: Vec<f64> = rows1
            .map(|(row, b)| {
                let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b;
                z.max(0.0)
            })
            .collect();
        let rows2 = self.w2.chunks_exact(self.hidden_dim).zip(&self.b2);
        let out: Vec<f64> = rows2
            .map(|(row, b)| row.iter().zip(&hidden).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect();
        (out, hidden)
    }

    /// Accumulate parameter gradients for one sample into `grads`, given the
    /// input, the cached hidden activations, and `dL/d(output)`. The ReLU
    /// derivative at exactly zero is taken as zero.
    #[allow(clippy::needless_range_loop)] // indexed offsets into five flat buffers
    pub fn backward(&self, x: &[f64], hidden: &[f64], upstream: &[f64], grads: &mut MlpGrads) {
        debug_assert_eq!(x.len(), self.input_dim);
        debug_assert_eq!(hidden.len(), self.hidden_dim);
        debug_assert_eq!(upstream.len(), self.output_dim);
        let mut d_hidden = vec![0.0; self.hidden_dim];
        for o in 0..self.output_dim {
            let u = upstream[o];
            if u == 0.0 {
                continue;
            }
            grads.b2[o] += u;
            let row = o * self.hidden_dim;
            for h in 0..self.hidden_dim {
                grads.w2[row + h] += u * hidden[h];
                d_hidden[h] += u * self.w2[row + h];
            }
        }
        for h in 0..self.hidden_dim {
            if hidden[h] <= 0.0 || d_hidden[h] == 0.0 {
                continue;
            }
            let g = d_hidden[h];
            grads.b1[h] += g;
            let row = h * self.input_dim;
            for (i, &xv) in x.iter().enumerate() {
                grads.w1[row + i] += g * xv;
            }
        }
    }
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        MlpGrads {
            w1: vec![0.0; net.w1.len()],
            b1: vec![0.0; net.b1.len()],
            w2: vec![0.0; net.w2.len()],
            b2: vec![0.0; net.b2.len()],
        }
    }

    /// The four gradient arrays in parameter order: w1, b1, w2, b2.
    pub fn arrays(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn hand_net() -> Mlp {
        // 2 -> 2 -> 2 with pre-activations away from the ReLU kink at the
        // test input so finite differences stay smooth.
        Mlp {
            input_dim: 2,
            hidden_dim: 2,
            output_dim: 2,
            w1: vec![0.5, -0.25, -0.3, 0.4],
            b1: vec![0.1, -0.05],
            w2: vec![1.0, -2.0, 0.5, 0.25],
            b2: vec![0.3, -0.1],
        }
    }

    #[test]
    fn forward_hand_computed() {
        let net = hand_net();
        let x = [1.0, 2.0];
        // z = [0.5 - 0.5 + 0.1, -0.3 + 0.8 - 0.05] = [0.1, 0.45]
        let (out, hidden) = net.forward_cached(&x);
        assert!((hidden[0] - 0.1).abs() < 1e-15);
        assert!((hidden[1] - 0.45).abs() < 1e-15);
        // out0 = 0.1 - 0.9 + 0.3 = -0.5; out1 = 0.05 + 0.1125 - 0.1 = 0.0625
        assert!((out[0] + 0.5).abs() < 1e-15);
        assert!((out[1] - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn relu_blocks_negative_units() {
        let mut net = hand_net();
        net.b1 = vec![-10.0, -10.0];
        let (out, hidden) = net.forward_cached(&[1.0, 2.0]);
        assert_eq!(hidden, vec![0.0, 0.0]);
        assert_eq!(out, vec![0.3, -0.1]);
        // Gradients cannot flow into a dead unit's first-layer weights.
        let mut grads = MlpGrads::zeros_like(&net);
        net.backward(&[1.0, 2.0], &hidden, &[1.0, 1.0], &mut grads);
        assert!(grads.w1.iter().all(|&g| g == 0.0));
        assert!(grads.b1.iter().all(|&g| g == 0.0));
        assert!(grads.w2.iter().all(|&g| g == 0.0));
        assert_eq!(grads.b2, vec![1.0, 1.0]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let net = hand_net();
        let x = [1.0, 2.0];
        let coef = [0.7, -1.3];
        let loss = |net: &Mlp| -> f64 {
            let out = net.forward(&x);
            out.iter().zip(&coef).map(|(o, c)| o * c).sum()
        };
        let mut grads = MlpGrads::zeros_like(&net);
        let (_, hidden) = net.forward_cached(&x);
        net.backward(&x, &hidden, &coef, &mut grads);

        let h = 1e-6;
        #[allow(clippy::needless_range_loop)] // i also indexes the cloned nets' params
        let check = |get: &dyn Fn(&mut Mlp) -> &mut Vec<f64>, analytic: &[f64]| {
            for i in 0..analytic.len() {
                let mut plus = hand_net();
                get(&mut plus)[i] += h;
                let mut minus = hand_net();
                get(&mut minus)[i] -= h;
                let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
                assert!(
                    (numeric - analytic[i]).abs() < 1e-6,
                    "param {i}: numeric {numeric} vs analytic {}",
                    analytic[i]
                );
            }
        };
        check(&|n| &mut n.w1, &grads.w1);
        check(&|n| &mut n.b1, &grads.b1);
        check(&|n| &mut n.w2, &grads.w2);
        check(&|n| &mut n.b2, &grads.b2);
    }

    #[test]
    fn init_is_seed_deterministic_and_bounded() {
        let mut r1 = ChaCha8Rng::seed_from_u64(11);
        let mut r2 = ChaCha8Rng::seed_from_u64(11);
        let a = Mlp::new(5, 4, 3, &mut r1);
        let b = Mlp::new(5, 4, 3, &mut r2);
        assert_eq!(a.w1, b.w1);
        assert_eq!(a.b1, b.b1);
        assert_eq!(a.w2, b.w2);
        assert_eq!(a.b2, b.b2);
        let bound1 = 1.0 / (5.0f64).sqrt();
        assert!(a.w1.iter().chain(&a.b1).all(|&w| w.abs() < bound1));
        let bound2 = 1.0 / (4.0f64).sqrt();
        assert!(a.w2.iter().chain(&a.b2).all(|&w| w.abs() < bound2));
    }
}
