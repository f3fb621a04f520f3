//! Temporal mixing of synaptic currents.
//!
//! A `T × T` matrix Ω weights the raw per-step currents of a layer so every
//! step sees a blend of the whole horizon: `I(t) = Σ_j ω_tj raw(j)`. Ω and
//! the membrane leak λ are learned through sigmoid views that keep them in
//! bounded ranges: `ω = σ(raw)` in `(0,1)` and `λ = 2σ(raw)` in `(0,2)`.
//! The factor 2 lets λ start at exactly 1 (raw 0), which plain σ cannot.
//!
//! A frozen mode stores exact matrix entries and bypasses the sigmoid; it
//! exists for the identity (vanilla) degeneration and for reparameterized
//! networks, and is never trained.

use crate::error::{Error, Result};
use crate::numerics::{logit, sigmoid, Tensor};

/// Absolute clamp on stored logits. `logit(1/T)` at `T = 1` is infinite;
/// ±12 keeps σ within 7e-6 of the ideal endpoint.
pub const LOGIT_CLAMP: f64 = 12.0;

/// Initialization scheme for [`TGimParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TGimInit {
    /// Every constrained entry starts at `1/T`, leak at 1: the uniform
    /// mixing that matches quantized-ANN behaviour.
    Uniform,
    /// Frozen identity matrix: per-step currents pass through unchanged.
    Identity,
}

/// Mixing-matrix parameters: raw pre-sigmoid logits plus a raw leak scalar,
/// or a frozen exact matrix when `frozen` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct TGimParams {
    /// `T × T` logits, or exact mixing weights when frozen.
    pub raw_omega: Tensor,
    /// Pre-sigmoid leak; constrained view is `2 σ(raw_leak)`.
    pub raw_leak: f64,
    /// Horizon this matrix mixes over.
    pub time_steps: usize,
    /// When set, `raw_omega` holds exact weights and σ is bypassed for Ω.
    pub frozen: bool,
}

impl TGimParams {
    /// Initialize for horizon `time_steps` in the given mode.
    pub fn init(mode: TGimInit, time_steps: usize) -> Result<Self> {
        if time_steps < 1 {
            return Err(Error::Config("time_steps must be >= 1".into()));
        }
        match mode {
            TGimInit::Uniform => {
                let raw = logit(1.0 / time_steps as f64).clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
                Ok(Self {
                    raw_omega: Tensor::new(
                        vec![time_steps, time_steps],
                        vec![raw; time_steps * time_steps],
                    )?,
                    raw_leak: 0.0,
                    time_steps,
                    frozen: false,
                })
            }
            TGimInit::Identity => {
                let mut m = Tensor::zeros(vec![time_steps, time_steps]);
                for i in 0..time_steps {
                    m.set(i, i, 1.0);
                }
                Ok(Self {
                    raw_omega: m,
                    raw_leak: 0.0,
                    time_steps,
                    frozen: true,
                })
            }
        }
    }

    /// Frozen matrix with exact weights (reparameterization targets).
    pub fn frozen(omega: Tensor, leak: f64, time_steps: usize) -> Result<Self> {
        if omega.shape() != [time_steps, time_steps] {
            return Err(Error::Dimension(format!(
                "frozen omega shape {:?} for horizon {time_steps}",
                omega.shape()
            )));
        }
        // Invert the 2σ view so constrained_leak reproduces `leak` exactly
        // for leak = 1 and to rounding otherwise.
        let raw_leak = if leak == 1.0 { 0.0 } else { logit(leak / 2.0) };
        Ok(Self {
            raw_omega: omega,
            raw_leak,
            time_steps,
            frozen: true,
        })
    }

    /// Constrained mixing matrix: `σ` elementwise, or the stored exact
    /// weights when frozen.
    pub fn omega(&self) -> Tensor {
        if self.frozen {
            self.raw_omega.clone()
        } else {
            let data = self.raw_omega.data().iter().map(|&x| sigmoid(x)).collect();
            Tensor::new(self.raw_omega.shape().to_vec(), data).expect("shape preserved")
        }
    }

    /// Constrained leak `λ = 2 σ(raw_leak)`.
    pub fn leak(&self) -> f64 {
        2.0 * sigmoid(self.raw_leak)
    }

    /// True when the constrained matrix is exactly the identity.
    pub fn is_identity(&self) -> bool {
        if !self.frozen {
            return false;
        }
        let t = self.time_steps;
        (0..t).all(|i| (0..t).all(|j| self.raw_omega.at(i, j) == if i == j { 1.0 } else { 0.0 }))
    }
}

/// Constrained views `(Ω, λ)` of the parameters.
pub fn constrained_view(params: &TGimParams) -> (Tensor, f64) {
    (params.omega(), params.leak())
}

/// Mix raw per-step currents: `out(t) = Σ_j ω_tj raw(j)`. `raw` is
/// `[T × width]`; the output has the same shape.
pub fn mix_currents(params: &TGimParams, raw: &Tensor) -> Result<Tensor> {
    let t_steps = params.time_steps;
    if raw.rows() != t_steps {
        return Err(Error::Dimension(format!(
            "raw currents have {} steps, matrix mixes {}",
            raw.rows(),
            t_steps
        )));
    }
    let width = raw.cols();
    let omega = params.omega();
    let mut out = Tensor::zeros(vec![t_steps, width]);
    for t in 0..t_steps {
        for u in 0..width {
            let mut acc = 0.0;
            for j in 0..t_steps {
                acc += omega.at(t, j) * raw.at(j, u);
            }
            out.set(t, u, acc);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_init_hits_one_over_t() {
        for t in 2..=8 {
            let p = TGimParams::init(TGimInit::Uniform, t).unwrap();
            let omega = p.omega();
            for &w in omega.data() {
                assert!((w - 1.0 / t as f64).abs() < 1e-9, "T={t}: {w}");
            }
            assert_eq!(p.leak(), 1.0);
        }
    }

    #[test]
    fn uniform_init_t1_clamped() {
        let p = TGimParams::init(TGimInit::Uniform, 1).unwrap();
        assert!((p.omega().at(0, 0) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn identity_mode_is_identity_map() {
        let p = TGimParams::init(TGimInit::Identity, 3).unwrap();
        assert!(p.is_identity());
        let raw = Tensor::new(vec![3, 2], vec![1.0, -2.0, 3.0, 0.5, -0.25, 4.0]).unwrap();
        let mixed = mix_currents(&p, &raw).unwrap();
        assert_eq!(mixed.data(), raw.data());
    }

    #[test]
    fn uniform_averaging() {
        let mut p = TGimParams::init(TGimInit::Uniform, 2).unwrap();
        p.frozen = true;
        p.raw_omega = Tensor::new(vec![2, 2], vec![0.5; 4]).unwrap();
        let raw = Tensor::new(vec![2, 1], vec![1.0, 3.0]).unwrap();
        let mixed = mix_currents(&p, &raw).unwrap();
        assert_eq!(mixed.data(), &[2.0, 2.0]);
    }

    #[test]
    fn hand_dot_products() {
        let p = TGimParams::frozen(
            Tensor::new(vec![2, 2], vec![0.5, 0.5, 0.25, 0.75]).unwrap(),
            1.0,
            2,
        )
        .unwrap();
        let raw = Tensor::new(vec![2, 1], vec![2.0, 4.0]).unwrap();
        let mixed = mix_currents(&p, &raw).unwrap();
        assert_eq!(mixed.data(), &[3.0, 3.5]);
    }

    #[test]
    fn leak_view() {
        let mut p = TGimParams::init(TGimInit::Uniform, 2).unwrap();
        assert_eq!(p.leak(), 1.0);
        p.raw_leak = 3.0;
        assert!(p.leak() > 1.0 && p.leak() < 2.0);
        p.raw_leak = -746.0;
        assert_eq!(p.leak(), 0.0); // σ underflows to exact 0
    }

    #[test]
    fn view_values() {
        let mut p = TGimParams::init(TGimInit::Uniform, 2).unwrap();
        p.raw_omega = Tensor::zeros(vec![2, 2]);
        let (omega, leak) = constrained_view(&p);
        assert!(omega.data().iter().all(|&w| w == 0.5));
        assert_eq!(leak, 1.0);
    }

    #[test]
    fn horizon_mismatch_rejected() {
        let p = TGimParams::init(TGimInit::Uniform, 2).unwrap();
        let raw = Tensor::zeros(vec![3, 1]);
        assert!(matches!(mix_currents(&p, &raw), Err(Error::Dimension(_))));
    }

    #[test]
    fn uniform_rows_make_mixed_current_step_constant() {
        // Identical rows mean every step runs the same dot product, so the
        // mixed current is constant over t bit-for-bit.
        let p = TGimParams::init(TGimInit::Uniform, 4).unwrap();
        let raw = Tensor::new(
            vec![4, 2],
            vec![0.3, -1.7, 2.9, 0.11, -0.6, 1.0, 0.05, 3.3],
        )
        .unwrap();
        let mixed = mix_currents(&p, &raw).unwrap();
        for t in 1..4 {
            for u in 0..2 {
                assert_eq!(mixed.at(t, u).to_bits(), mixed.at(0, u).to_bits());
            }
        }
    }

    proptest! {
        #[test]
        fn mixing_is_linear(
            logits in proptest::collection::vec(-3.0f64..3.0, 4),
            a in proptest::collection::vec(-5.0f64..5.0, 2),
            b in proptest::collection::vec(-5.0f64..5.0, 2),
            c1 in -2.0f64..2.0,
            c2 in -2.0f64..2.0,
        ) {
            let p = TGimParams {
                raw_omega: Tensor::new(vec![2, 2], logits).unwrap(),
                raw_leak: 0.0,
                time_steps: 2,
                frozen: false,
            };
            let ta = Tensor::new(vec![2, 1], a.clone()).unwrap();
            let tb = Tensor::new(vec![2, 1], b.clone()).unwrap();
            let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| c1 * x + c2 * y).collect();
            let lhs = mix_currents(&p, &Tensor::new(vec![2, 1], mix).unwrap()).unwrap();
            let fa = mix_currents(&p, &ta).unwrap();
            let fb = mix_currents(&p, &tb).unwrap();
            for t in 0..2 {
                let rhs = c1 * fa.at(t, 0) + c2 * fb.at(t, 0);
                let scale = lhs.at(t, 0).abs().max(rhs.abs()).max(1.0);
                prop_assert!((lhs.at(t, 0) - rhs).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn constrained_ranges(raw in -50.0f64..50.0) {
            let mut p = TGimParams::init(TGimInit::Uniform, 2).unwrap();
            p.raw_leak = raw;
            prop_assert!(p.leak() >= 0.0 && p.leak() <= 2.0);
            p.raw_omega = Tensor::new(vec![2, 2], vec![raw; 4]).unwrap();
            prop_assert!(p.omega().data().iter().all(|&w| (0.0..=1.0).contains(&w)));
        }

        #[test]
        fn view_monotone(x in -10.0f64..10.0, dx in 0.001f64..5.0) {
            prop_assert!(sigmoid(x + dx) > sigmoid(x));
        }
    }
}
