//! Surrogate-gradient backpropagation for multi-threshold layers.
//!
//! The spike nonlinearity is a staircase; its stand-in derivative is a
//! rectangular window covering the membrane range that can change the fired
//! level: `1` on `[θ/2, (L+1/2)θ]`, `0` elsewhere. Two backward modes exist:
//!
//! * [`backward_layer`] — the temporal recurrence `v(t-1) → m(t)` is
//!   detached, so gradients move between time-steps only through the mixing
//!   matrix and the leak. The leak gradient treats `v(t-1)` as data:
//!   `∂L/∂λ = Σ_t ∂L/∂m(t) ⊙ v(t-1)`, and each mixing weight gets
//!   `∂L/∂ω_tj = ∂L/∂m(t) ⊙ raw(j)`.
//! * [`vanilla_bptt_backward`] — the classic recurrent chain for single-
//!   threshold layers with identity mixing, kept as a reference mode. Here
//!   the reset contributes `∂v/∂m = 1 - θ·surrogate(m)` and the carried
//!   potential contributes `∂m(t)/∂v(t-1) = λ`.
//!
//! Weight gradients flow through the mixing in both modes:
//! `∂L/∂raw(j) = Σ_t ω_tj ∂L/∂m(t)`, then into `W`, the bias, and the
//! upstream spikes by the ordinary affine chain.

use crate::error::{Error, Result};
use crate::numerics::{sigmoid, Tensor};

/// Surrogate spike derivative: 1 where `θ/2 <= m <= (L + 1/2) θ`, else 0.
pub fn surrogate_grad(m: &Tensor, threshold: f64, levels: u32) -> Tensor {
    let lo = 0.5 * threshold;
    let hi = (levels as f64 + 0.5) * threshold;
    let data = m
        .data()
        .iter()
        .map(|&x| if (lo..=hi).contains(&x) { 1.0 } else { 0.0 })
        .collect();
    Tensor::new(m.shape().to_vec(), data).expect("shape preserved")
}

/// Rectangular surrogate for single-threshold neurons:
/// 1 where `|m - θ| <= θ/2`.
pub fn rect_surrogate_grad(m: &Tensor, threshold: f64) -> Tensor {
    let data = m
        .data()
        .iter()
        .map(|&x| {
            if (x - threshold).abs() <= 0.5 * threshold {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Tensor::new(m.shape().to_vec(), data).expect("shape preserved")
}

/// Everything the backward pass needs from one layer's forward pass.
#[derive(Debug, Clone)]
pub struct LayerCache {
    /// Effective affine inputs `[T × w_in]`: upstream spikes times the
    /// emitter threshold, or scaled analog features for the first layer.
    pub x_eff: Tensor,
    /// Factor applied to upstream spikes to form `x_eff` (θ of the previous
    /// layer, or the first-layer current gain).
    pub input_scale: f64,
    /// Weight snapshot `[w_out × w_in]`.
    pub weights: Tensor,
    /// Pre-mix currents `W x_eff + b`, `[T × w_out]`.
    pub raw: Tensor,
    /// Membrane before reset, `[T × w_out]`.
    pub membrane: Tensor,
    /// Carried potential entering each step, `[T × w_out]`.
    pub v_prev: Tensor,
    /// Constrained mixing matrix snapshot `[T × T]`.
    pub omega: Tensor,
    /// Constrained leak snapshot.
    pub leak: f64,
    /// Raw logits behind `omega` (meaningless when frozen).
    pub raw_omega: Tensor,
    /// Raw logit behind `leak`.
    pub raw_leak: f64,
    /// Mixing parameters are frozen exact values; no σ chain.
    pub frozen_tgim: bool,
    /// Constrained matrix is exactly the identity.
    pub identity_tgim: bool,
    pub threshold: f64,
    pub levels: u32,
}

impl LayerCache {
    fn check_grad_shape(&self, grad_spikes: &Tensor) -> Result<()> {
        if grad_spikes.shape() != self.membrane.shape() {
            return Err(Error::Dimension(format!(
                "grad spikes {:?} vs membrane {:?}",
                grad_spikes.shape(),
                self.membrane.shape()
            )));
        }
        Ok(())
    }
}

/// Parameter gradients of one layer.
#[derive(Debug, Clone)]
pub struct GradBundle {
    pub grad_w: Tensor,
    pub grad_b: Tensor,
    pub grad_raw_omega: Tensor,
    pub grad_raw_leak: f64,
    /// Gradient w.r.t. upstream spike counts, `[T × w_in]`.
    pub grad_input_spikes: Tensor,
}

/// Shared tail of both backward modes: from per-step `∂L/∂raw` to the
/// affine parameters and the upstream spikes.
fn affine_chain(cache: &LayerCache, d_raw: &Tensor) -> (Tensor, Tensor, Tensor) {
    let (t_steps, w_out) = (d_raw.rows(), d_raw.cols());
    let w_in = cache.x_eff.cols();
    let mut grad_w = Tensor::zeros(vec![w_out, w_in]);
    let mut grad_b = Tensor::zeros(vec![w_out]);
    let mut grad_in = Tensor::zeros(vec![t_steps, w_in]);
    for t in 0..t_steps {
        for u in 0..w_out {
            let d = d_raw.at(t, u);
            if d == 0.0 {
                continue;
            }
            grad_b.data_mut()[u] += d;
            for k in 0..w_in {
                let gw = d * cache.x_eff.at(t, k);
                grad_w.data_mut()[u * w_in + k] += gw;
                grad_in.data_mut()[t * w_in + k] +=
                    d * cache.weights.at(u, k) * cache.input_scale;
            }
        }
    }
    (grad_w, grad_b, grad_in)
}

/// Detached-chain backward for one layer (the training rule of the
/// learnable multi-threshold model).
pub fn backward_layer(grad_spikes: &Tensor, cache: &LayerCache) -> Result<GradBundle> {
    cache.check_grad_shape(grad_spikes)?;
    let (t_steps, w_out) = (grad_spikes.rows(), grad_spikes.cols());

    // ∂L/∂m(t) = ∂L/∂s(t) ⊙ surrogate(m(t)); no temporal accumulation.
    let surr = surrogate_grad(&cache.membrane, cache.threshold, cache.levels);
    let mut d_m = Tensor::zeros(vec![t_steps, w_out]);
    for i in 0..d_m.len() {
        d_m.data_mut()[i] = grad_spikes.data()[i] * surr.data()[i];
    }

    // ∂L/∂λ = Σ_t ∂L/∂m(t) ⊙ v(t-1), v treated as data.
    let mut d_leak = 0.0;
    for i in 0..d_m.len() {
        d_leak += d_m.data()[i] * cache.v_prev.data()[i];
    }

    // ∂L/∂ω_tj = ∂L/∂m(t) ⊙ raw(j); ∂L/∂raw(j) = Σ_t ω_tj ∂L/∂m(t).
    let mut d_omega = Tensor::zeros(vec![t_steps, t_steps]);
    let mut d_raw = Tensor::zeros(vec![t_steps, w_out]);
    for t in 0..t_steps {
        for j in 0..t_steps {
            let mut acc = 0.0;
            for u in 0..w_out {
                acc += d_m.at(t, u) * cache.raw.at(j, u);
            }
            d_omega.set(t, j, acc);
            let w = cache.omega.at(t, j);
            for u in 0..w_out {
                d_raw.data_mut()[j * w_out + u] += w * d_m.at(t, u);
            }
        }
    }

    // Chain constrained gradients through the sigmoid views.
    let (grad_raw_omega, grad_raw_leak) = if cache.frozen_tgim {
        (Tensor::zeros(vec![t_steps, t_steps]), 0.0)
    } else {
        let mut g = Tensor::zeros(vec![t_steps, t_steps]);
        for i in 0..g.len() {
            let s = sigmoid(cache.raw_omega.data()[i]);
            g.data_mut()[i] = d_omega.data()[i] * s * (1.0 - s);
        }
        let sl = sigmoid(cache.raw_leak);
        (g, d_leak * 2.0 * sl * (1.0 - sl))
    };

    let (grad_w, grad_b, grad_input_spikes) = affine_chain(cache, &d_raw);
    Ok(GradBundle {
        grad_w,
        grad_b,
        grad_raw_omega,
        grad_raw_leak,
        grad_input_spikes,
    })
}

/// Classic recurrent backward for a single-threshold layer with identity
/// mixing. Exists as the comparison baseline; the mixing and leak receive
/// no gradient in this mode.
pub fn vanilla_bptt_backward(grad_spikes: &Tensor, cache: &LayerCache) -> Result<GradBundle> {
    if cache.levels != 1 {
        return Err(Error::Mode(format!(
            "vanilla BPTT requires L = 1, got {}",
            cache.levels
        )));
    }
    if !cache.identity_tgim {
        return Err(Error::Mode("vanilla BPTT requires identity mixing".into()));
    }
    cache.check_grad_shape(grad_spikes)?;
    let (t_steps, w_out) = (grad_spikes.rows(), grad_spikes.cols());

    let surr = rect_surrogate_grad(&cache.membrane, cache.threshold);
    let mut d_m = Tensor::zeros(vec![t_steps, w_out]);
    let mut d_v_next = vec![0.0; w_out]; // λ ∂L/∂m(t+1)
    for t in (0..t_steps).rev() {
        for u in 0..w_out {
            let g = surr.at(t, u);
            // spatial term + temporal term through the soft reset
            let dm = grad_spikes.at(t, u) * g + d_v_next[u] * (1.0 - cache.threshold * g);
            d_m.set(t, u, dm);
            d_v_next[u] = cache.leak * dm;
        }
    }

    // Identity mixing: ∂L/∂raw(t) = ∂L/∂m(t).
    let (grad_w, grad_b, grad_input_spikes) = affine_chain(cache, &d_m);
    Ok(GradBundle {
        grad_w,
        grad_b,
        grad_raw_omega: Tensor::zeros(vec![t_steps, t_steps]),
        grad_raw_leak: 0.0,
        grad_input_spikes,
    })
}

/// Plain SGD update: `p <- p - lr (g + wd p)`.
pub fn sgd_step(params: &mut [f64], grads: &[f64], lr: f64, weight_decay: f64) {
    debug_assert_eq!(params.len(), grads.len());
    for (p, &g) in params.iter_mut().zip(grads) {
        *p -= lr * (g + weight_decay * *p);
    }
}

/// SGD with momentum: `v <- μ v + g + wd p; p <- p - lr v`.
pub fn sgd_step_momentum(
    params: &mut [f64],
    grads: &[f64],
    velocity: &mut [f64],
    lr: f64,
    weight_decay: f64,
    momentum: f64,
) {
    debug_assert_eq!(params.len(), grads.len());
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = momentum * *v + g + weight_decay * *p;
        *p -= lr * *v;
    }
}
