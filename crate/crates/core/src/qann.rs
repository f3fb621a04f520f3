//! Quantization-clip-floor-shift activations and a minimal quantized MLP.
//!
//! The activation maps a pre-activation `x` to one of `T_q + 1` evenly
//! spaced values in `[0, ϑ]`:
//!
//! ```text
//! a = (ϑ / T_q) · clip(⌊(x·T_q + φ) / ϑ⌋, 0, T_q)
//! ```
//!
//! With the shift `φ = ϑ/2` this equals the average firing rate an IF
//! neuron reaches under constant input current `x` per step for `T_q`
//! steps, starting from `v(0) = φ`. The floor is non-differentiable, so
//! training uses a straight-through estimate: gradients pass unchanged
//! wherever the pre-clip value lies inside `[0, T_q]`, and the scale ϑ
//! receives the output-scale gradient `a/ϑ`.

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::rng::Rng;
use crate::stbp::sgd_step;

/// Quantized-activation constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QcfsConfig {
    /// Quantization level `T_q >= 1`.
    pub t_q: u32,
    /// Learnable scaling factor `ϑ > 0`.
    pub vartheta: f64,
    /// Shift `φ`; fixed at `ϑ/2` throughout.
    pub shift: f64,
}

impl QcfsConfig {
    pub fn new(t_q: u32, vartheta: f64) -> Result<Self> {
        if t_q < 1 {
            return Err(Error::Config("t_q must be >= 1".into()));
        }
        if !(vartheta > 0.0) {
            return Err(Error::Config(format!("vartheta {vartheta} must be > 0")));
        }
        Ok(Self {
            t_q,
            vartheta,
            shift: vartheta / 2.0,
        })
    }
}

fn qcfs_scalar(x: f64, cfg: &QcfsConfig) -> f64 {
    let q = ((x * cfg.t_q as f64 + cfg.shift) / cfg.vartheta)
        .floor()
        .clamp(0.0, cfg.t_q as f64);
    cfg.vartheta / cfg.t_q as f64 * q
}

/// Elementwise quantized activation.
pub fn qcfs_forward(x: &Tensor, cfg: &QcfsConfig) -> Tensor {
    let data = x.data().iter().map(|&v| qcfs_scalar(v, cfg)).collect();
    Tensor::new(x.shape().to_vec(), data).expect("shape preserved")
}

/// Straight-through backward. Returns the input gradient and the
/// accumulated scale gradient.
pub fn qcfs_backward(grad_out: &Tensor, x: &Tensor, cfg: &QcfsConfig) -> (Tensor, f64) {
    let mut grad_in = Tensor::zeros(x.shape().to_vec());
    let mut grad_vartheta = 0.0;
    for i in 0..x.len() {
        let u = (x.data()[i] * cfg.t_q as f64 + cfg.shift) / cfg.vartheta;
        if (0.0..=cfg.t_q as f64).contains(&u) {
            grad_in.data_mut()[i] = grad_out.data()[i];
        }
        let a = qcfs_scalar(x.data()[i], cfg);
        grad_vartheta += grad_out.data()[i] * a / cfg.vartheta;
    }
    (grad_in, grad_vartheta)
}

/// One linear layer with a quantized activation.
#[derive(Debug, Clone)]
pub struct QcfsLayer {
    pub weights: Tensor,
    pub bias: Tensor,
    pub vartheta: f64,
}

/// A multilayer perceptron whose every layer ends in a quantized
/// activation; the last activation doubles as the logits.
#[derive(Debug, Clone)]
pub struct QcfsAnn {
    pub layers: Vec<QcfsLayer>,
    pub t_q: u32,
}

impl QcfsAnn {
    /// Scaled-uniform (Glorot) initialization from a seed.
    pub fn build(arch: &[usize], t_q: u32, seed: u64) -> Result<Self> {
        if arch.len() < 2 {
            return Err(Error::Config("need at least input and output widths".into()));
        }
        if t_q < 1 {
            return Err(Error::Config("t_q must be >= 1".into()));
        }
        let mut rng = Rng::new(seed);
        let mut layers = Vec::new();
        for (l, pair) in arch.windows(2).enumerate() {
            let (w_in, w_out) = (pair[0], pair[1]);
            let bound = (6.0 / (w_in + w_out) as f64).sqrt();
            let mut layer_rng = rng.derive(l as u64);
            let data = (0..w_out * w_in)
                .map(|_| layer_rng.uniform(-bound, bound))
                .collect();
            layers.push(QcfsLayer {
                weights: Tensor::new(vec![w_out, w_in], data)?,
                bias: Tensor::zeros(vec![w_out]),
                vartheta: 1.0,
            });
        }
        let _ = rng.next_u64();
        Ok(Self { layers, t_q })
    }

    pub fn arch(&self) -> Vec<usize> {
        let mut widths = vec![self.layers[0].weights.cols()];
        widths.extend(self.layers.iter().map(|l| l.weights.rows()));
        widths
    }

    /// Forward pass; returns per-layer pre-activations and activations.
    pub fn forward_full(&self, x: &[f64]) -> Result<(Vec<Tensor>, Vec<Tensor>)> {
        let mut act = Tensor::from_vec(x.to_vec());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut acts = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let z = crate::numerics::affine(&layer.weights, &act, &layer.bias)?;
            let cfg = QcfsConfig::new(self.t_q, layer.vartheta)?;
            act = qcfs_forward(&z, &cfg);
            pre.push(z);
            acts.push(act.clone());
        }
        Ok((pre, acts))
    }

    /// Logits for one sample.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (_, acts) = self.forward_full(x)?;
        Ok(acts.last().expect("nonempty network").data().to_vec())
    }
}

/// Training hyperparameters for the quantized MLP.
#[derive(Debug, Clone, Copy)]
pub struct QcfsTrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

/// Per-epoch loss and training accuracy.
#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// Train a quantized MLP with SGD and softmax cross-entropy. Deterministic
/// under the config seed.
pub fn train_qcfs_ann(
    features: &[Vec<f64>],
    labels: &[usize],
    arch: &[usize],
    t_q: u32,
    cfg: &QcfsTrainConfig,
) -> Result<(QcfsAnn, Vec<EpochStats>)> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::Config("dataset empty or mismatched".into()));
    }
    let mut ann = QcfsAnn::build(arch, t_q, cfg.seed)?;
    let n_classes = *arch.last().expect("arch checked nonempty");
    let mut order: Vec<usize> = (0..features.len()).collect();
    let shuffle_root = Rng::new(cfg.seed ^ 0x5157_3ab1);
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        shuffle_root.derive(epoch as u64).shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch_size.max(1)) {
            let mut grads: Vec<(Tensor, Tensor, f64)> = ann
                .layers
                .iter()
                .map(|l| {
                    (
                        Tensor::zeros(l.weights.shape().to_vec()),
                        Tensor::zeros(l.bias.shape().to_vec()),
                        0.0,
                    )
                })
                .collect();
            for &idx in batch {
                let (pre, acts) = ann.forward_full(&features[idx])?;
                let logits = acts.last().expect("network nonempty");
                let (loss, grad_logits) =
                    crate::pipeline::loss_and_grad_single(logits.data(), labels[idx], n_classes)?;
                if !loss.is_finite() {
                    return Err(Error::Training { epoch });
                }
                epoch_loss += loss;
                if crate::pipeline::argmax(logits.data()) == labels[idx] {
                    correct += 1;
                }

                let mut d_act = Tensor::from_vec(grad_logits);
                for l in (0..ann.layers.len()).rev() {
                    let qcfg = QcfsConfig::new(ann.t_q, ann.layers[l].vartheta)?;
                    let (d_z, d_theta) = qcfs_backward(&d_act, &pre[l], &qcfg);
                    grads[l].2 += d_theta;
                    let prev_act = if l == 0 {
                        Tensor::from_vec(features[idx].clone())
                    } else {
                        acts[l - 1].clone()
                    };
                    let layer = &ann.layers[l];
                    let (w_out, w_in) = (layer.weights.rows(), layer.weights.cols());
                    let mut d_prev = Tensor::zeros(vec![w_in]);
                    for u in 0..w_out {
                        let d = d_z.data()[u];
                        grads[l].1.data_mut()[u] += d;
                        for k in 0..w_in {
                            grads[l].0.data_mut()[u * w_in + k] += d * prev_act.data()[k];
                            d_prev.data_mut()[k] += d * layer.weights.at(u, k);
                        }
                    }
                    d_act = d_prev;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for (layer, (gw, gb, gt)) in ann.layers.iter_mut().zip(&mut grads) {
                for g in gw.data_mut().iter_mut() {
                    *g *= scale;
                }
                for g in gb.data_mut().iter_mut() {
                    *g *= scale;
                }
                sgd_step(layer.weights.data_mut(), gw.data(), cfg.lr, cfg.weight_decay);
                sgd_step(layer.bias.data_mut(), gb.data(), cfg.lr, cfg.weight_decay);
                let mut theta = [layer.vartheta];
                sgd_step(&mut theta, &[*gt * scale], cfg.lr, cfg.weight_decay);
                // ϑ must stay positive for the activation to be defined.
                layer.vartheta = theta[0].max(1e-3);
            }
        }
        history.push(EpochStats {
            epoch,
            loss: epoch_loss / features.len() as f64,
            accuracy: correct as f64 / features.len() as f64,
        });
    }
    Ok((ann, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_matches_hand_evaluation() {
        let cfg = QcfsConfig::new(4, 1.0).unwrap();
        // (0.6·4 + 0.5)/1 = 2.9 -> floor 2 -> 0.5
        assert_eq!(qcfs_scalar(0.6, &cfg), 0.5);
        assert_eq!(qcfs_scalar(0.0, &cfg), 0.0);
        assert_eq!(qcfs_scalar(1e9, &cfg), 1.0);
    }

    #[test]
    fn forward_is_staircase() {
        let cfg = QcfsConfig::new(3, 1.5).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..4000 {
            let x = -1.0 + i as f64 * 0.001;
            let a = qcfs_scalar(x, &cfg);
            assert!(a >= prev, "monotone violated at {x}");
            prev = a;
            seen.insert(a.to_bits());
        }
        assert_eq!(seen.len(), 4); // T_q + 1 distinct output values
    }

    #[test]
    fn backward_straight_through() {
        let cfg = QcfsConfig::new(4, 1.0).unwrap();
        let x = Tensor::from_vec(vec![0.5, 50.0, -50.0]);
        let g = Tensor::from_vec(vec![1.0, 1.0, 1.0]);
        let (grad_in, _) = qcfs_backward(&g, &x, &cfg);
        assert_eq!(grad_in.data(), &[1.0, 0.0, 0.0]);

        let g2 = Tensor::from_vec(vec![2.0, 2.0, 2.0]);
        let (grad_in2, _) = qcfs_backward(&g2, &x, &cfg);
        assert_eq!(grad_in2.data()[0], 2.0 * grad_in.data()[0]);
    }

    #[test]
    fn rate_identity_with_if_model() {
        // Constant current x per step over T_q steps from v(0) = φ gives an
        // average rate equal to the quantized activation.
        let mut rng = Rng::new(99);
        for _ in 0..10_000 {
            let t_q = 1 + rng.below(8) as u32;
            let vartheta = rng.uniform(0.5, 2.0);
            let cfg = QcfsConfig::new(t_q, vartheta).unwrap();
            let x = rng.uniform(-0.5 * vartheta, 1.5 * vartheta);
            let (spikes, _) =
                crate::oracle::if_simulate(cfg.shift, &vec![x; t_q as usize], vartheta);
            let total: u32 = spikes.iter().sum();
            let rate = total as f64 * vartheta / t_q as f64;
            let a = qcfs_scalar(x, &cfg);
            assert!(
                (rate - a).abs() < 1e-12,
                "t_q={t_q} vartheta={vartheta} x={x}: rate {rate} vs qcfs {a}"
            );
        }
    }

    #[test]
    fn training_is_deterministic_and_lr_zero_is_identity() {
        let features = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        let labels = vec![0, 1, 0];
        let cfg = QcfsTrainConfig {
            lr: 0.0,
            weight_decay: 0.0,
            epochs: 1,
            batch_size: 2,
            seed: 5,
        };
        let (ann, _) = train_qcfs_ann(&features, &labels, &[2, 4, 2], 4, &cfg).unwrap();
        let fresh = QcfsAnn::build(&[2, 4, 2], 4, 5).unwrap();
        for (a, b) in ann.layers.iter().zip(&fresh.layers) {
            assert_eq!(a.weights.data(), b.weights.data());
            assert_eq!(a.vartheta, b.vartheta);
        }

        let cfg2 = QcfsTrainConfig {
            lr: 0.1,
            ..cfg
        };
        let (run1, _) = train_qcfs_ann(&features, &labels, &[2, 4, 2], 4, &cfg2).unwrap();
        let (run2, _) = train_qcfs_ann(&features, &labels, &[2, 4, 2], 4, &cfg2).unwrap();
        for (a, b) in run1.layers.iter().zip(&run2.layers) {
            assert_eq!(a.weights.data(), b.weights.data());
        }
    }
}
