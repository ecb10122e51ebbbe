use rand::Rng;

use crate::augment::AugmentRng;
use crate::error::{Error, Result};
use crate::protocol::Key;

/// Class index of the softmax output: 0 = genuine, 1 = spoof.
pub fn class_index(key: Key) -> usize {
    match key {
        Key::Bonafide => 0,
        Key::Spoof => 1,
    }
}

/// `softmax(W2 relu(W1 x + b1) + b2)` with a two-unit output.
///
/// Weights are row-major: `w1` is `hidden x input`, `w2` is `2 x hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    input_dim: usize,
    hidden: usize,
    pub(crate) w1: Vec<f64>,
    pub(crate) b1: Vec<f64>,
    pub(crate) w2: Vec<f64>,
    pub(crate) b2: [f64; 2],
}

/// Gradient of the loss, laid out like [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: [f64; 2],
}

impl Gradients {
    /// `w1, b1, w2, b2` concatenated, matching [`Mlp::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.w1.len() + self.b1.len() + self.w2.len() + 2);
        out.extend_from_slice(&self.w1);
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.extend_from_slice(&self.b2);
        out
    }
}

fn softmax2(z: [f64; 2]) -> (f64, f64) {
    let m = z[0].max(z[1]);
    let e0 = (z[0] - m).exp();
    let e1 = (z[1] - m).exp();
    let s = e0 + e1;
    (e0 / s, e1 / s)
}

fn log_sum_exp2(z: [f64; 2]) -> f64 {
    let m = z[0].max(z[1]);
    m + ((z[0] - m).exp() + (z[1] - m).exp()).ln()
}

/// `-ln softmax(z)[label]`, computed without forming the probabilities.
pub fn cross_entropy(logits: [f64; 2], label: usize) -> f64 {
    log_sum_exp2(logits) - logits[label]
}

impl Mlp {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            input_dim,
            hidden,
            w1: vec![0.0; hidden * input_dim],
            b1: vec![0.0; hidden],
            w2: vec![0.0; 2 * hidden],
            b2: [0.0; 2],
        }
    }

    /// Glorot-uniform weights, zero biases. Draws are rounded to binary32 so
    /// the initial model is exactly representable in a model file.
    pub fn glorot(input_dim: usize, hidden: usize, rng: &mut AugmentRng) -> Result<Self> {
        if input_dim == 0 || hidden == 0 {
            return Err(Error::InvalidConfig(format!(
                "network dimensions must be positive, got {input_dim} -> {hidden}"
            )));
        }
        let mut m = Self::zeros(input_dim, hidden);
        let mut fill = |w: &mut [f64], fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in w {
                *v = rng.random_range(-limit..limit) as f32 as f64;
            }
        };
        fill(&mut m.w1, input_dim, hidden);
        fill(&mut m.w2, hidden, 2);
        Ok(m)
    }

    pub fn from_parts(
        input_dim: usize,
        hidden: usize,
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: [f64; 2],
    ) -> Result<Self> {
        if w1.len() != hidden * input_dim || b1.len() != hidden || w2.len() != 2 * hidden {
            return Err(Error::Shape(format!(
                "parameter sizes do not match a {input_dim} -> {hidden} -> 2 network"
            )));
        }
        let m = Self {
            input_dim,
            hidden,
            w1,
            b1,
            w2,
            b2,
        };
        if m.parameters().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network parameter".into()));
        }
        Ok(m)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn n_parameters(&self) -> usize {
        self.hidden * self.input_dim + 3 * self.hidden + 2
    }

    /// `w1, b1, w2, b2` concatenated.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_parameters());
        out.extend_from_slice(&self.w1);
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.extend_from_slice(&self.b2);
        out
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.n_parameters() {
            return Err(Error::Shape(format!(
                "{} values for {} parameters",
                values.len(),
                self.n_parameters()
            )));
        }
        let (w1, rest) = values.split_at(self.w1.len());
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, b2) = rest.split_at(2 * self.hidden);
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2 = [b2[0], b2[1]];
        Ok(())
    }

    /// Round every parameter to binary32.
    pub fn to_single_precision(&self) -> Self {
        let round = |v: &[f64]| v.iter().map(|&x| x as f32 as f64).collect::<Vec<_>>();
        Self {
            input_dim: self.input_dim,
            hidden: self.hidden,
            w1: round(&self.w1),
            b1: round(&self.b1),
            w2: round(&self.w2),
            b2: [self.b2[0] as f32 as f64, self.b2[1] as f32 as f64],
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::Shape(format!(
                "network expects {} inputs, got {}",
                self.input_dim,
                x.len()
            )));
        }
        Ok(())
    }

    /// Pre-activations and the output logits.
    fn hidden_and_logits(&self, x: &[f64]) -> (Vec<f64>, [f64; 2]) {
        let pre: Vec<f64> = self
            .w1
            .chunks_exact(self.input_dim)
            .zip(&self.b1)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect();
        let mut z = self.b2;
        for (k, zk) in z.iter_mut().enumerate() {
            let row = &self.w2[k * self.hidden..(k + 1) * self.hidden];
            *zk += row.iter().zip(&pre).map(|(w, h)| w * h.max(0.0)).sum::<f64>();
        }
        (pre, z)
    }

    pub fn logits(&self, x: &[f64]) -> Result<[f64; 2]> {
        self.check_input(x)?;
        Ok(self.hidden_and_logits(x).1)
    }

    /// `(p_genuine, p_spoof)`.
    pub fn forward(&self, x: &[f64]) -> Result<(f64, f64)> {
        Ok(softmax2(self.logits(x)?))
    }

    /// Mean cross-entropy over the batch plus `weight_decay * |W|^2 / 2`
    /// (weights only, biases are not decayed), and its exact gradient.
    pub fn loss_and_grad(&self, batch: &[(&[f64], Key)], weight_decay: f64) -> Result<(f64, Gradients)> {
        if batch.is_empty() {
            return Err(Error::EmptyInput("loss over an empty batch"));
        }
        let mut g = Gradients {
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.hidden],
            w2: vec![0.0; self.w2.len()],
            b2: [0.0; 2],
        };
        let mut loss = 0.0;
        let mut dh = vec![0.0; self.hidden];
        for (x, key) in batch {
            self.check_input(x)?;
            let label = class_index(*key);
            let (pre, z) = self.hidden_and_logits(x);
            loss += cross_entropy(z, label);
            let (p0, p1) = softmax2(z);
            let dz = [p0 - f64::from(label == 0), p1 - f64::from(label == 1)];
            for k in 0..2 {
                g.b2[k] += dz[k];
                let row = &mut g.w2[k * self.hidden..(k + 1) * self.hidden];
                for (gw, h) in row.iter_mut().zip(&pre) {
                    *gw += dz[k] * h.max(0.0);
                }
            }
            for (j, d) in dh.iter_mut().enumerate() {
                *d = if pre[j] > 0.0 {
                    dz[0] * self.w2[j] + dz[1] * self.w2[self.hidden + j]
                } else {
                    0.0
                };
            }
            for (j, &d) in dh.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.b1[j] += d;
                let row = &mut g.w1[j * self.input_dim..(j + 1) * self.input_dim];
                for (gw, v) in row.iter_mut().zip(x.iter()) {
                    *gw += d * v;
                }
            }
        }
        let n = batch.len() as f64;
        loss /= n;
        for v in g.w1.iter_mut().chain(&mut g.b1).chain(&mut g.w2).chain(&mut g.b2) {
            *v /= n;
        }
        if weight_decay != 0.0 {
            let sq: f64 = self.w1.iter().chain(&self.w2).map(|w| w * w).sum();
            loss += 0.5 * weight_decay * sq;
            for (gw, w) in g.w1.iter_mut().zip(&self.w1) {
                *gw += weight_decay * w;
            }
            for (gw, w) in g.w2.iter_mut().zip(&self.w2) {
                *gw += weight_decay * w;
            }
        }
        Ok((loss, g))
    }

    /// `theta -= lr * grad`.
    pub fn step(&mut self, g: &Gradients, lr: f64) {
        let pairs = self
            .w1
            .iter_mut()
            .zip(&g.w1)
            .chain(self.b1.iter_mut().zip(&g.b1))
            .chain(self.w2.iter_mut().zip(&g.w2))
            .chain(self.b2.iter_mut().zip(&g.b2));
        for (p, d) in pairs {
            *p -= lr * d;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::rng_from_seed;
    use proptest::prelude::*;

    fn tiny(seed: u64) -> Mlp {
        let mut m = Mlp::glorot(3, 4, &mut rng_from_seed(seed)).unwrap();
        m.b1 = vec![0.1, -0.2, 0.3, 0.05];
        m.b2 = [0.2, -0.1];
        m
    }

    #[test]
    fn zero_network_is_uniform() {
        let m = Mlp::zeros(5, 3);
        assert_eq!(m.forward(&[1.0, -2.0, 3.0, 0.5, 9.0]).unwrap(), (0.5, 0.5));
        let (loss, _) = m.loss_and_grad(&[(&[0.0; 5][..], Key::Spoof)], 0.0).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn closed_form_softmax() {
        let (p, q) = softmax2([3f64.ln(), 0.0]);
        assert!((p - 0.75).abs() < 1e-15 && (q - 0.25).abs() < 1e-15);
    }

    #[test]
    fn confident_prediction_leaves_weight_decay() {
        let mut m = Mlp::zeros(1, 1);
        m.b2 = [60.0, -60.0];
        m.w1 = vec![0.5];
        let (loss, _) = m.loss_and_grad(&[(&[1.0][..], Key::Bonafide)], 0.2).unwrap();
        assert!((loss - 0.5 * 0.2 * 0.25).abs() < 1e-15);
    }

    #[test]
    fn dimension_and_empty_checks() {
        let m = Mlp::zeros(3, 2);
        assert!(matches!(m.forward(&[1.0, 2.0]), Err(Error::Shape(_))));
        assert!(m.loss_and_grad(&[], 0.0).is_err());
        assert!(Mlp::from_parts(3, 2, vec![0.0; 5], vec![0.0; 2], vec![0.0; 4], [0.0; 2]).is_err());
    }

    #[test]
    fn parameter_round_trip() {
        let m = tiny(3);
        let mut z = Mlp::zeros(3, 4);
        z.set_parameters(&m.parameters()).unwrap();
        assert_eq!(z, m);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let m = tiny(11);
        let xs = [vec![0.3, -1.2, 0.8], vec![-0.5, 0.4, 1.1], vec![1.5, 0.2, -0.7]];
        let batch: Vec<(&[f64], Key)> = vec![
            (&xs[0], Key::Bonafide),
            (&xs[1], Key::Spoof),
            (&xs[2], Key::Spoof),
        ];
        let wd = 0.01;
        let (_, g) = m.loss_and_grad(&batch, wd).unwrap();
        let analytic = g.flatten();
        let theta = m.parameters();
        let eps = 1e-5;
        for i in 0..theta.len() {
            let eval = |delta: f64| {
                let mut t = theta.clone();
                t[i] += delta;
                let mut p = m.clone();
                p.set_parameters(&t).unwrap();
                p.loss_and_grad(&batch, wd).unwrap().0
            };
            let numeric = (eval(eps) - eval(-eps)) / (2.0 * eps);
            let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
            assert!((analytic[i] - numeric).abs() / denom < 1e-4, "param {i}: {} vs {numeric}", analytic[i]);
        }
    }

    proptest! {
        #[test]
        fn probabilities_sum_to_one(z0 in -700.0f64..700.0, z1 in -700.0f64..700.0) {
            let (p, q) = softmax2([z0, z1]);
            prop_assert!(p >= 0.0 && q >= 0.0);
            prop_assert!((p + q - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn loss_is_shift_invariant(z0 in -50.0f64..50.0, z1 in -50.0f64..50.0, c in -50.0f64..50.0, label in 0usize..2) {
            let a = cross_entropy([z0, z1], label);
            let b = cross_entropy([z0 + c, z1 + c], label);
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}
