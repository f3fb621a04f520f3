//! Forward dynamics of IF, LIF and multi-threshold neuron layers.
//!
//! A layer of width `w` integrates input current into a membrane potential
//! and fires integer spike counts against `L` equidistant thresholds
//! `θ, 2θ, ..., Lθ`, subtracting the fired amount from the potential
//! (soft reset). `L = 1` is the vanilla LIF model; `L = 1, λ = 1` is IF.

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Per-layer neuron constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronConfig {
    /// Firing threshold θ, must be positive.
    pub threshold: f64,
    /// Number of threshold levels L, at least 1.
    pub levels: u32,
    /// Membrane leak λ applied to the carried potential each step.
    pub leak: f64,
    /// Initial membrane potential v(0).
    pub v0: f64,
}

impl NeuronConfig {
    pub fn new(threshold: f64, levels: u32, leak: f64, v0: f64) -> Result<Self> {
        if !(threshold > 0.0) {
            return Err(Error::Config(format!("threshold {threshold} must be > 0")));
        }
        if levels < 1 {
            return Err(Error::Config("levels must be >= 1".into()));
        }
        Ok(Self {
            threshold,
            levels,
            leak,
            v0,
        })
    }

    /// IF configuration: single threshold, no leak.
    pub fn if_model(threshold: f64) -> Self {
        Self {
            threshold,
            levels: 1,
            leak: 1.0,
            v0: 0.0,
        }
    }
}

/// Membrane state of one layer after the most recent reset.
#[derive(Debug, Clone)]
pub struct NeuronLayerState {
    /// Post-reset membrane potentials.
    pub v: Tensor,
    /// Number of completed steps.
    pub t: usize,
}

impl NeuronLayerState {
    pub fn new(width: usize, v0: f64) -> Self {
        Self {
            v: Tensor::from_vec(vec![v0; width]),
            t: 0,
        }
    }
}

/// Integer spike counts per (time-step, unit), each in `[0, L]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeTrain {
    pub steps: Vec<Vec<u32>>,
}

impl SpikeTrain {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    /// Total count over all steps and units.
    pub fn total(&self) -> u64 {
        self.steps
            .iter()
            .flat_map(|s| s.iter())
            .map(|&s| s as u64)
            .sum()
    }

    /// Per-unit sum over the step window `[from, to)`.
    pub fn window_sum(&self, from: usize, to: usize) -> Vec<u64> {
        let width = self.steps.first().map_or(0, |s| s.len());
        let mut acc = vec![0u64; width];
        for step in &self.steps[from..to] {
            for (a, &s) in acc.iter_mut().zip(step) {
                *a += s as u64;
            }
        }
        acc
    }
}

/// Fired level for a single membrane value: `L` if `m >= Lθ`, `k` if
/// `kθ <= m < (k+1)θ` for `k = 1..L-1`, and `0` otherwise.
///
/// The candidate from `floor(m/θ)` is corrected against the multiplied
/// thresholds `kθ` themselves, so the result always satisfies the
/// comparison form of the firing rule even when the division rounds.
pub fn fire_level(m: f64, threshold: f64, levels: u32) -> u32 {
    if m < threshold {
        return 0;
    }
    let cap = levels as f64;
    if m >= cap * threshold {
        return levels;
    }
    let mut k = (m / threshold).floor().clamp(0.0, cap) as u32;
    while k < levels && m >= (k + 1) as f64 * threshold {
        k += 1;
    }
    while k > 0 && m < k as f64 * threshold {
        k -= 1;
    }
    k
}

/// Elementwise [`fire_level`] over a membrane tensor.
pub fn mht_fire(m: &Tensor, threshold: f64, levels: u32) -> Vec<u32> {
    m.data()
        .iter()
        .map(|&x| fire_level(x, threshold, levels))
        .collect()
}

/// One multi-threshold step: charge `m = λ v + I`, fire, soft-reset
/// `v' = m - s θ`. Returns the fired counts and mutates the state.
pub fn mht_step(
    state: &mut NeuronLayerState,
    current: &Tensor,
    cfg: &NeuronConfig,
) -> Result<Vec<u32>> {
    if current.len() != state.v.len() {
        return Err(Error::Dimension(format!(
            "current width {} vs state width {}",
            current.len(),
            state.v.len()
        )));
    }
    let mut spikes = vec![0u32; current.len()];
    for (i, s) in spikes.iter_mut().enumerate() {
        let m = cfg.leak * state.v.data()[i] + current.data()[i];
        *s = fire_level(m, cfg.threshold, cfg.levels);
        state.v.data_mut()[i] = m - *s as f64 * cfg.threshold;
    }
    state.t += 1;
    Ok(spikes)
}

/// One vanilla LIF step. Identical to [`mht_step`] with `L = 1`; rejects any
/// other configuration.
pub fn lif_step(
    state: &mut NeuronLayerState,
    current: &Tensor,
    cfg: &NeuronConfig,
) -> Result<Vec<u32>> {
    if cfg.levels != 1 {
        return Err(Error::Config(format!(
            "lif_step requires L = 1, got {}",
            cfg.levels
        )));
    }
    mht_step(state, current, cfg)
}

/// Drive a layer for `T` steps from `v(0) = cfg.v0`. `currents` is `[T × w]`.
/// Returns the spike train and the post-reset potential after each step.
pub fn run_sequence(cfg: &NeuronConfig, currents: &Tensor) -> Result<(SpikeTrain, Vec<Vec<f64>>)> {
    let horizon = currents.rows();
    if horizon < 1 {
        return Err(Error::Dimension("need at least one step".into()));
    }
    let width = currents.cols();
    let mut state = NeuronLayerState::new(width, cfg.v0);
    let mut steps = Vec::with_capacity(horizon);
    let mut trace = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let current = Tensor::from_vec(currents.row(t).to_vec());
        steps.push(mht_step(&mut state, &current, cfg)?);
        trace.push(state.v.data().to_vec());
    }
    Ok((SpikeTrain { steps }, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn scalar(v: f64) -> Tensor {
        Tensor::from_vec(vec![v])
    }

    #[test]
    fn fire_piecewise_cases() {
        assert_eq!(fire_level(2.8, 1.0, 4), 2);
        assert_eq!(fire_level(-0.3, 1.0, 2), 0);
        assert_eq!(fire_level(7.0, 1.0, 2), 2);
        // boundaries fire per the >= rule
        assert_eq!(fire_level(1.0, 1.0, 3), 1);
        assert_eq!(fire_level(3.0, 1.0, 3), 3);
        assert_eq!(fire_level(0.999_999_9, 1.0, 3), 0);
    }

    #[test]
    fn step_fires_two_levels_and_resets() {
        let cfg = NeuronConfig::new(1.0, 2, 1.0, 0.0).unwrap();
        let mut st = NeuronLayerState::new(1, 0.4);
        let s = mht_step(&mut st, &scalar(1.6), &cfg).unwrap();
        assert_eq!(s, vec![2]);
        assert!((st.v.data()[0] - 0.0).abs() < 1e-15);
    }

    #[test]
    fn step_pure_leak() {
        let cfg = NeuronConfig::new(1.0, 2, 0.5, 0.0).unwrap();
        let mut st = NeuronLayerState::new(1, 0.5);
        let s = mht_step(&mut st, &scalar(0.0), &cfg).unwrap();
        assert_eq!(s, vec![0]);
        assert_eq!(st.v.data()[0], 0.25);
    }

    #[test]
    fn step_quiescent() {
        let cfg = NeuronConfig::new(1.0, 2, 1.0, 0.0).unwrap();
        let mut st = NeuronLayerState::new(1, 0.0);
        let s = mht_step(&mut st, &scalar(0.0), &cfg).unwrap();
        assert_eq!(s, vec![0]);
        assert_eq!(st.v.data()[0], 0.0);
    }

    #[test]
    fn lif_single_crossing() {
        let cfg = NeuronConfig::new(1.0, 1, 1.0, 0.0).unwrap();
        let mut st = NeuronLayerState::new(1, 0.6);
        let s = lif_step(&mut st, &scalar(0.5), &cfg).unwrap();
        assert_eq!(s, vec![1]);
        assert!((st.v.data()[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn lif_soft_reset_carries_residual() {
        let cfg = NeuronConfig::new(1.0, 1, 1.0, 0.0).unwrap();
        let mut st = NeuronLayerState::new(1, 0.6);
        let s = lif_step(&mut st, &scalar(5.0), &cfg).unwrap();
        assert_eq!(s, vec![1]);
        assert!((st.v.data()[0] - 4.6).abs() < 1e-15);
    }

    #[test]
    fn lif_rejects_multi_level() {
        let cfg = NeuronConfig::new(1.0, 2, 1.0, 0.0).unwrap();
        let mut st = NeuronLayerState::new(1, 0.0);
        assert!(matches!(
            lif_step(&mut st, &scalar(0.0), &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn if_alternating_trace() {
        // 0.625, 1.25 -> fire -> 0.25, 0.875, 1.5 -> fire -> 0.5
        let cfg = NeuronConfig::new(1.0, 1, 1.0, 0.0).unwrap();
        let currents = Tensor::new(vec![4, 1], vec![0.625; 4]).unwrap();
        let (train, _) = run_sequence(&cfg, &currents).unwrap();
        let flat: Vec<u32> = train.steps.iter().map(|s| s[0]).collect();
        assert_eq!(flat, vec![0, 1, 0, 1]);
    }

    #[test]
    fn sequence_constant_drive() {
        // m=1.4 -> s1 v=0.4; m=1.3 -> s1 v=0.3; m=1.2 -> s1 v=0.2
        let cfg = NeuronConfig::new(1.0, 2, 1.0, 0.5).unwrap();
        let currents = Tensor::new(vec![3, 1], vec![0.9; 3]).unwrap();
        let (train, trace) = run_sequence(&cfg, &currents).unwrap();
        assert_eq!(train.steps, vec![vec![1], vec![1], vec![1]]);
        assert!((trace[2][0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn sequence_zero_currents() {
        let cfg = NeuronConfig::new(1.0, 3, 1.0, 0.0).unwrap();
        let currents = Tensor::zeros(vec![5, 2]);
        let (train, _) = run_sequence(&cfg, &currents).unwrap();
        assert_eq!(train.total(), 0);
    }

    #[test]
    fn lif_path_equals_mht_with_one_level() {
        let mut rng = Rng::new(11);
        for _ in 0..200 {
            let theta = rng.uniform(0.5, 2.0);
            let leak = rng.uniform(0.0, 1.5);
            let v0 = rng.uniform(-1.0, 1.0);
            let cfg = NeuronConfig::new(theta, 1, leak, v0).unwrap();
            let mut a = NeuronLayerState::new(1, v0);
            let mut b = NeuronLayerState::new(1, v0);
            for _ in 0..8 {
                let i = scalar(rng.uniform(-1.0, 3.0));
                let sa = lif_step(&mut a, &i, &cfg).unwrap();
                let sb = mht_step(&mut b, &i, &cfg).unwrap();
                assert_eq!(sa, sb);
                assert_eq!(a.v.data()[0].to_bits(), b.v.data()[0].to_bits());
            }
        }
    }

    #[test]
    fn membrane_bound_holds_on_fuzz_corpus() {
        // λ=1, v0 in [0,θ), per-step I in [0,Lθ) keeps v in [0,θ) exactly.
        let root = Rng::new(20_240_501);
        for trial in 0..10_000u64 {
            let mut rng = root.derive(trial);
            let levels = 1 + rng.below(4) as u32;
            let horizon = 1 + rng.below(6) as usize;
            let theta = rng.uniform(0.5, 2.0);
            let v0 = rng.uniform(0.0, theta);
            let cfg = NeuronConfig::new(theta, levels, 1.0, v0).unwrap();
            let data: Vec<f64> = (0..horizon)
                .map(|_| rng.uniform(0.0, levels as f64 * theta))
                .collect();
            let currents = Tensor::new(vec![horizon, 1], data).unwrap();
            let (_, trace) = run_sequence(&cfg, &currents).unwrap();
            for v in trace.iter().map(|row| row[0]) {
                assert!(
                    (0.0..theta).contains(&v),
                    "trial {trial}: v {v} escaped [0, {theta})"
                );
            }
        }
    }

    proptest! {
        // Soft reset conserves charge: m - v' == s θ.
        #[test]
        fn soft_reset_conservation(
            v0 in -2.0f64..4.0,
            i in -2.0f64..6.0,
            theta in 0.5f64..2.0,
            levels in 1u32..5,
            leak in 0.0f64..1.5,
        ) {
            let cfg = NeuronConfig::new(theta, levels, leak, v0).unwrap();
            let mut st = NeuronLayerState::new(1, v0);
            let m = leak * v0 + i;
            let s = mht_step(&mut st, &Tensor::from_vec(vec![i]), &cfg).unwrap();
            let fired = s[0] as f64 * theta;
            prop_assert!((m - st.v.data()[0] - fired).abs() <= 1e-12 * m.abs().max(1.0));
        }

        // Monotone in m, and invariant under joint scaling of (m, θ).
        #[test]
        fn fire_monotone_and_scale_invariant(
            m1 in -3.0f64..9.0,
            dm in 0.0f64..3.0,
            theta in 0.5f64..2.0,
            levels in 1u32..5,
            c in 0.1f64..10.0,
        ) {
            prop_assert!(fire_level(m1 + dm, theta, levels) >= fire_level(m1, theta, levels));
            prop_assert_eq!(
                fire_level(c * m1, c * theta, levels),
                fire_level(m1, theta, levels)
            );
        }
    }
}
