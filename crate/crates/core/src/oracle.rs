//! Ground truths and randomized trial harnesses for the equivalence
//! theorems.
//!
//! Each check pits the multi-threshold simulator against an independent
//! route to the same quantity: a literal step-by-step IF simulation, a
//! closed-form count, an interval classifier, a Monte-Carlo expectation, or
//! a forward-mode derivative. Spike-count comparisons are exact integer
//! equality; membrane comparisons allow 1e-9 absolute. Every trial is
//! replayable from its `(suite seed, trial id)` pair, and trials sampled
//! outside a theorem's precondition are reported as skipped rather than
//! silently dropped.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Parallelism};
use crate::neuron::{fire_level, run_sequence, NeuronConfig};
use crate::numerics::Tensor;
use crate::pipeline::{
    backward_from_spike_grad, forward, Bias, LayerSpec, NetworkSpec, TrainMode,
};
use crate::refgrad::{loss_grad_wrt, ChainMode, Param};
use crate::reparam::{reparameterize_network, verify_equivalence};
use crate::rng::Rng;
use crate::stbp::GradBundle;
use crate::tgim::{TGimInit, TGimParams};

/// Trial outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// Inputs violated the theorem's precondition; nothing asserted.
    Skip,
}

impl Verdict {
    fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Skip => "skip",
        }
    }
}

/// One oracle trial: inputs, both sides of the equality, and the result.
#[derive(Debug, Clone)]
pub struct TrialReport {
    pub suite: String,
    pub id: u64,
    pub seed: u64,
    pub params: String,
    pub lhs: String,
    pub rhs: String,
    pub verdict: Verdict,
    pub deviation: f64,
}

impl TrialReport {
    /// One-line record, grep- and replay-friendly.
    pub fn line(&self) -> String {
        format!(
            "trial suite={} id={} seed={} {} lhs={} rhs={} verdict={} dev={:?}",
            self.suite,
            self.id,
            self.seed,
            self.params,
            self.lhs,
            self.rhs,
            self.verdict.as_str(),
            self.deviation
        )
    }
}

/// Aggregated outcome of one suite run.
#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: String,
    pub lines: Vec<String>,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub max_dev: f64,
}

impl SuiteResult {
    fn from_reports(name: &str, reports: Vec<TrialReport>) -> Self {
        let mut res = SuiteResult {
            name: name.to_string(),
            lines: Vec::with_capacity(reports.len()),
            passed: 0,
            failed: 0,
            skipped: 0,
            max_dev: 0.0,
        };
        for r in reports {
            match r.verdict {
                Verdict::Pass => res.passed += 1,
                Verdict::Fail => res.failed += 1,
                Verdict::Skip => res.skipped += 1,
            }
            res.max_dev = res.max_dev.max(r.deviation);
            res.lines.push(r.line());
        }
        res
    }

    fn merge(name: &str, parts: Vec<SuiteResult>) -> Self {
        let mut res = SuiteResult {
            name: name.to_string(),
            lines: Vec::new(),
            passed: 0,
            failed: 0,
            skipped: 0,
            max_dev: 0.0,
        };
        for p in parts {
            res.lines.extend(p.lines);
            res.passed += p.passed;
            res.failed += p.failed;
            res.skipped += p.skipped;
            res.max_dev = res.max_dev.max(p.max_dev);
        }
        res
    }

    pub fn ok(&self) -> bool {
        self.failed == 0
    }

    pub fn summary_line(&self) -> String {
        format!(
            "summary suite={} trials={} passed={} failed={} skipped={} max_dev={:?}",
            self.name,
            self.passed + self.failed + self.skipped,
            self.passed,
            self.failed,
            self.skipped,
            self.max_dev
        )
    }

    /// Full line-delimited report body: one line per trial plus a summary.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            out.push_str(line);
            out.push('\n');
        }
        out.push_str(&self.summary_line());
        out.push('\n');
        out
    }
}

// ── Ground-truth simulators ─────────────────────────────────────────────

/// Exact step-by-step IF dynamics (λ = 1, soft reset) for one unit.
/// Returns per-step binary spikes and the post-reset potential trace.
pub fn if_simulate(v0: f64, currents: &[f64], threshold: f64) -> (Vec<u32>, Vec<f64>) {
    let mut v = v0;
    let mut spikes = Vec::with_capacity(currents.len());
    let mut trace = Vec::with_capacity(currents.len());
    for &i in currents {
        let m = v + i;
        let s = (m >= threshold) as u32;
        v = m - s as f64 * threshold;
        spikes.push(s);
        trace.push(v);
    }
    (spikes, trace)
}

/// Closed-form total spike count under uniform drive:
/// `clip(⌊(v0 + ΣI)/θ⌋, 0, cap)`.
pub fn closed_form_count(v0: f64, total_current: f64, threshold: f64, cap: u32) -> u32 {
    ((v0 + total_current) / threshold)
        .floor()
        .clamp(0.0, cap as f64) as u32
}

// ── Single-trial checks ─────────────────────────────────────────────────

/// Single-step equivalence: one `L`-level step equals `L` IF steps of
/// `I/L` equals the closed form, exactly.
pub fn check_lemma41(id: u64, seed: u64, levels: u32, theta: f64, v0: f64, current: f64) -> TrialReport {
    let direct = fire_level(v0 + current, theta, levels);
    let per_step = current / levels as f64;
    let (if_spikes, _) = if_simulate(v0, &vec![per_step; levels as usize], theta);
    let windowed: u32 = if_spikes.iter().sum();
    let closed = closed_form_count(v0, current, theta, levels);
    let pass = direct == windowed && windowed == closed;
    TrialReport {
        suite: "lemma41".into(),
        id,
        seed,
        params: format!("L={levels} theta={theta:?} v0={v0:?} I={current:?}"),
        lhs: format!("{direct}"),
        rhs: format!("{windowed}/{closed}"),
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        deviation: (direct as f64 - windowed as f64)
            .abs()
            .max((windowed as f64 - closed as f64).abs()),
    }
}

/// Window equivalence: `T` multi-threshold steps against `LT` IF steps
/// with each window's current spread uniformly. Per-window counts must
/// match exactly; end-of-window membranes to 1e-9.
pub fn check_thm42_windows(
    id: u64,
    seed: u64,
    levels: u32,
    theta: f64,
    v0: f64,
    currents: &[f64],
) -> TrialReport {
    let horizon = currents.len();
    let cfg = NeuronConfig {
        threshold: theta,
        levels,
        leak: 1.0,
        v0,
    };
    let grid = Tensor::new(vec![horizon, 1], currents.to_vec()).expect("column");
    let (mht, mht_trace) = run_sequence(&cfg, &grid).expect("valid trial");

    let l = levels as usize;
    let mut if_currents = Vec::with_capacity(l * horizon);
    for &i in currents {
        let per = i / levels as f64;
        if_currents.extend(std::iter::repeat(per).take(l));
    }
    let (if_spikes, if_trace) = if_simulate(v0, &if_currents, theta);

    let mut count_ok = true;
    let mut max_vdev: f64 = 0.0;
    let mut windows = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let win: u32 = if_spikes[t * l..(t + 1) * l].iter().sum();
        windows.push(win);
        if mht.steps[t][0] != win {
            count_ok = false;
        }
        max_vdev = max_vdev.max((mht_trace[t][0] - if_trace[(t + 1) * l - 1]).abs());
    }
    let pass = count_ok && max_vdev <= 1e-9;
    TrialReport {
        suite: "thm42.windows".into(),
        id,
        seed,
        params: format!("L={levels} T={horizon} theta={theta:?} v0={v0:?} I={currents:?}"),
        lhs: format!("{:?}", mht.steps.iter().map(|s| s[0]).collect::<Vec<_>>()),
        rhs: format!("{windows:?}"),
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        deviation: max_vdev,
    }
}

/// Uniform-drive closed form: simulated total equals
/// `clip(⌊(v0 + T·I)/θ⌋, 0, LT)` exactly.
pub fn check_thm42_closed(
    id: u64,
    seed: u64,
    levels: u32,
    horizon: usize,
    theta: f64,
    v0: f64,
    current: f64,
) -> TrialReport {
    let cfg = NeuronConfig {
        threshold: theta,
        levels,
        leak: 1.0,
        v0,
    };
    let grid = Tensor::new(vec![horizon, 1], vec![current; horizon]).expect("column");
    let (train, _) = run_sequence(&cfg, &grid).expect("valid trial");
    let simulated = train.total() as u32;
    let mut total_current = 0.0;
    for _ in 0..horizon {
        total_current += current;
    }
    let closed = closed_form_count(v0, total_current, theta, levels * horizon as u32);
    TrialReport {
        suite: "thm42.closed".into(),
        id,
        seed,
        params: format!("L={levels} T={horizon} theta={theta:?} v0={v0:?} I={current:?}"),
        lhs: format!("{simulated}"),
        rhs: format!("{closed}"),
        verdict: if simulated == closed {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        deviation: (simulated as f64 - closed as f64).abs(),
    }
}

/// Firing-pattern region of a constant input current.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiringRegion {
    /// Every step fires the same count.
    Uniform,
    /// Spike counts differ across steps.
    Uneven,
}

/// Interval classifier: uniform iff `I < 0`, `I >= Lθ`, or
/// `I ∈ [kθ, kθ + θ/T)` for some `k = 0..L-1`.
pub fn classify_firing_region(
    current: f64,
    theta: f64,
    levels: u32,
    t_steps: usize,
) -> FiringRegion {
    if current < 0.0 || current >= levels as f64 * theta {
        return FiringRegion::Uniform;
    }
    let k = fire_level(current, theta, levels);
    if current < k as f64 * theta + theta / t_steps as f64 {
        FiringRegion::Uniform
    } else {
        FiringRegion::Uneven
    }
}

/// Simulation-based uniformity: constant drive from `v(0) = 0`, check all
/// per-step counts are equal.
pub fn simulated_region(current: f64, theta: f64, levels: u32, t_steps: usize) -> FiringRegion {
    let cfg = NeuronConfig {
        threshold: theta,
        levels,
        leak: 1.0,
        v0: 0.0,
    };
    let grid = Tensor::new(vec![t_steps, 1], vec![current; t_steps]).expect("column");
    let (train, _) = run_sequence(&cfg, &grid).expect("valid");
    let first = train.steps[0][0];
    if train.steps.iter().all(|s| s[0] == first) {
        FiringRegion::Uniform
    } else {
        FiringRegion::Uneven
    }
}

/// Statistics of a Monte-Carlo expectation check.
#[derive(Debug, Clone, Copy)]
pub struct Thm44Stats {
    pub mean: f64,
    pub std_err: f64,
    pub max_abs_gap: f64,
}

/// Expectation equality between the initialized multi-threshold rate and
/// the shifted quantized activation: sample `x` uniform on `[0, θ)`, drive
/// the neuron with `x·L` per step from `v(0) = θ/2`, and compare the rate
/// `Σs·θ/(LT)` with `(θ/T_q)·clip(⌊x·T_q/θ + 1/2⌋, 0, T_q)`. Passes when
/// the mean gap sits within four standard errors of zero.
pub fn check_thm44_expectation(
    id: u64,
    levels: u32,
    horizon: usize,
    t_q: u32,
    theta: f64,
    n: usize,
    seed: u64,
) -> Result<(TrialReport, Thm44Stats)> {
    if n < 100 {
        return Err(Error::SampleSize { min: 100, got: n });
    }
    let mut rng = Rng::new(seed).derive(id);
    let cfg = NeuronConfig {
        threshold: theta,
        levels,
        leak: 1.0,
        v0: theta / 2.0,
    };
    let norm = levels as f64 * horizon as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut max_abs: f64 = 0.0;
    for _ in 0..n {
        let x = rng.uniform(0.0, theta);
        let drive = x * levels as f64;
        let grid = Tensor::new(vec![horizon, 1], vec![drive; horizon]).expect("column");
        let (train, _) = run_sequence(&cfg, &grid).expect("valid");
        let rate = train.total() as f64 * theta / norm;
        let quant = theta / t_q as f64
            * (x * t_q as f64 / theta + 0.5).floor().clamp(0.0, t_q as f64);
        let gap = rate - quant;
        sum += gap;
        sum_sq += gap * gap;
        max_abs = max_abs.max(gap.abs());
    }
    let mean = sum / n as f64;
    let var = (sum_sq - sum * sum / n as f64) / (n as f64 - 1.0);
    let std_err = var.max(0.0).sqrt() / (n as f64).sqrt();
    let pass = mean.abs() <= 4.0 * std_err;
    let report = TrialReport {
        suite: "thm44".into(),
        id,
        seed,
        params: format!("L={levels} T={horizon} Tq={t_q} theta={theta:?} N={n} max_gap={max_abs:?}"),
        lhs: format!("{mean:?}"),
        rhs: format!("{:?}", 4.0 * std_err),
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        deviation: mean.abs(),
    };
    Ok((report, Thm44Stats { mean, std_err, max_abs_gap: max_abs }))
}

/// Membrane bound: under leak 1, `v(0) ∈ [0,θ)` and per-step currents in
/// `[0, Lθ)`, the potential stays in `[0, θ)` at every step. Trials whose
/// inputs break the precondition are reported as skipped.
pub fn check_lemma_s1(
    id: u64,
    seed: u64,
    levels: u32,
    theta: f64,
    v0: f64,
    currents: &[f64],
) -> TrialReport {
    let params = format!(
        "L={levels} T={} theta={theta:?} v0={v0:?} I={currents:?}",
        currents.len()
    );
    let in_contract = (0.0..theta).contains(&v0)
        && currents
            .iter()
            .all(|&i| (0.0..levels as f64 * theta).contains(&i));
    if !in_contract {
        return TrialReport {
            suite: "lemmas1".into(),
            id,
            seed,
            params,
            lhs: "-".into(),
            rhs: "-".into(),
            verdict: Verdict::Skip,
            deviation: 0.0,
        };
    }
    let cfg = NeuronConfig {
        threshold: theta,
        levels,
        leak: 1.0,
        v0,
    };
    let grid = Tensor::new(vec![currents.len(), 1], currents.to_vec()).expect("column");
    let (_, trace) = run_sequence(&cfg, &grid).expect("valid");
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for v in trace.iter().map(|row| row[0]) {
        if !(0.0..theta).contains(&v) {
            ok = false;
            worst = worst.max(if v < 0.0 { -v } else { v - theta });
        }
    }
    TrialReport {
        suite: "lemmas1".into(),
        id,
        seed,
        params,
        lhs: "v in [0,theta)".into(),
        rhs: "v trace".into(),
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        deviation: worst,
    }
}

// ── Trial sampling ──────────────────────────────────────────────────────

/// Shared sampler for the window-theorem fuzz corpus:
/// `L ∈ 1..=4, T ∈ 1..=8, θ ∈ [0.5, 2), v0 ∈ [0, θ), I(t) ∈ [0, Lθ)`.
fn sample_window_trial(rng: &mut Rng) -> (u32, usize, f64, f64, Vec<f64>) {
    let levels = 1 + rng.below(4) as u32;
    let horizon = 1 + rng.below(8) as usize;
    let theta = rng.uniform(0.5, 2.0);
    let v0 = rng.uniform(0.0, theta);
    let currents = (0..horizon)
        .map(|_| rng.uniform(0.0, levels as f64 * theta))
        .collect();
    (levels, horizon, theta, v0, currents)
}

// ── Suites ──────────────────────────────────────────────────────────────

pub fn lemma41_suite(trials: usize, seed: u64, mode: Parallelism) -> SuiteResult {
    let root = Rng::new(seed);
    let reports = map_indexed(mode, trials, |i| {
        let id = i as u64;
        let mut rng = root.derive(id);
        let levels = 1 + rng.below(4) as u32;
        let theta = rng.uniform(0.5, 2.0);
        let v0 = rng.uniform(0.0, theta);
        let current = rng.uniform(0.0, levels as f64 * theta);
        check_lemma41(id, seed, levels, theta, v0, current)
    });
    SuiteResult::from_reports("lemma41", reports)
}

pub fn thm42_windows_suite(trials: usize, seed: u64, mode: Parallelism) -> SuiteResult {
    let root = Rng::new(seed);
    let reports = map_indexed(mode, trials, |i| {
        let id = i as u64;
        let mut rng = root.derive(id);
        let (levels, horizon, theta, v0, currents) = sample_window_trial(&mut rng);
        let _ = horizon;
        check_thm42_windows(id, seed, levels, theta, v0, &currents)
    });
    SuiteResult::from_reports("thm42.windows", reports)
}

pub fn thm42_closed_suite(trials: usize, seed: u64, mode: Parallelism) -> SuiteResult {
    let root = Rng::new(seed);
    let reports = map_indexed(mode, trials, |i| {
        let id = i as u64;
        // Distinct stream from the windows corpus.
        let mut rng = root.derive(id ^ 0x8000_0000_0000_0000);
        let levels = 1 + rng.below(4) as u32;
        let horizon = 1 + rng.below(8) as usize;
        let theta = rng.uniform(0.5, 2.0);
        let v0 = rng.uniform(0.0, theta);
        // Uniform drive may sit anywhere, including both saturation branches.
        let current = rng.uniform(-theta, (levels as f64 + 1.0) * theta);
        check_thm42_closed(id, seed, levels, horizon, theta, v0, current)
    });
    SuiteResult::from_reports("thm42.closed", reports)
}

/// Grid sweep of the region classifier against simulation for every
/// `(L, T) ∈ {1..4} × {2..6}`, `points` currents per combination over
/// `[-θ, (L+1)θ]`, excluding a 1e-9 band around interval boundaries.
pub fn cor43_suite(points: usize, seed: u64, mode: Parallelism) -> SuiteResult {
    let combos: Vec<(u32, usize)> = (1..=4u32)
        .flat_map(|l| (2..=6usize).map(move |t| (l, t)))
        .collect();
    let root = Rng::new(seed);
    let reports = map_indexed(mode, combos.len(), |ci| {
        let (levels, t_steps) = combos[ci];
        let id = ci as u64;
        let mut rng = root.derive(id);
        let theta = rng.uniform(0.5, 2.0);

        let mut boundaries = vec![0.0, levels as f64 * theta];
        for k in 0..levels {
            boundaries.push(k as f64 * theta);
            boundaries.push(k as f64 * theta + theta / t_steps as f64);
        }

        let lo = -theta;
        let hi = (levels as f64 + 1.0) * theta;
        let step = (hi - lo) / (points.saturating_sub(1).max(1)) as f64;
        let mut checked = 0usize;
        let mut excluded = 0usize;
        let mut disagreements = 0usize;
        for p in 0..points {
            let current = lo + p as f64 * step;
            if boundaries.iter().any(|b| (current - b).abs() <= 1e-9) {
                excluded += 1;
                continue;
            }
            checked += 1;
            let predicted = classify_firing_region(current, theta, levels, t_steps);
            let simulated = simulated_region(current, theta, levels, t_steps);
            if predicted != simulated {
                disagreements += 1;
            }
        }
        TrialReport {
            suite: "cor43".into(),
            id,
            seed,
            params: format!(
                "L={levels} T={t_steps} theta={theta:?} points={points} checked={checked} excluded={excluded}"
            ),
            lhs: format!("{disagreements}"),
            rhs: "0".into(),
            verdict: if disagreements == 0 {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
            deviation: disagreements as f64,
        }
    });
    SuiteResult::from_reports("cor43", reports)
}

/// The four pinned expectation configurations; `n` samples each.
pub fn thm44_suite(n: usize, seed: u64, mode: Parallelism) -> Result<SuiteResult> {
    let configs: [(u32, usize, u32); 4] = [(2, 2, 4), (2, 4, 8), (4, 2, 4), (1, 1, 1)];
    let reports = map_indexed(mode, configs.len(), |i| {
        let (levels, horizon, t_q) = configs[i];
        check_thm44_expectation(i as u64, levels, horizon, t_q, 1.0, n, seed)
            .map(|(report, stats)| {
                // The degenerate config computes the same staircase on both
                // sides; its gap must vanish identically.
                if levels == 1 && horizon == 1 && t_q == 1 && stats.max_abs_gap != 0.0 {
                    let mut r = report;
                    r.verdict = Verdict::Fail;
                    r.deviation = stats.max_abs_gap;
                    r
                } else {
                    report
                }
            })
    });
    let reports: Result<Vec<_>> = reports.into_iter().collect();
    Ok(SuiteResult::from_reports("thm44", reports?))
}

/// Replays the window-corpus sampler and asserts the membrane bound, plus
/// two fixed boundary/pre-condition probes.
pub fn lemma_s1_suite(trials: usize, seed: u64, mode: Parallelism) -> SuiteResult {
    let root = Rng::new(seed);
    let mut reports = map_indexed(mode, trials, |i| {
        let id = i as u64;
        let mut rng = root.derive(id);
        let (levels, _, theta, v0, currents) = sample_window_trial(&mut rng);
        check_lemma_s1(id, seed, levels, theta, v0, &currents)
    });
    // Boundary stress: v0 and I one representable notch under their limits.
    let theta = 1.0;
    let levels = 3u32;
    let v0 = theta - 1e-12;
    let edge = levels as f64 * theta - 1e-12;
    reports.push(check_lemma_s1(
        trials as u64,
        seed,
        levels,
        theta,
        v0,
        &[edge, edge, edge],
    ));
    // Out-of-contract probe: reported as skipped, never asserted.
    reports.push(check_lemma_s1(
        trials as u64 + 1,
        seed,
        levels,
        theta,
        0.5,
        &[levels as f64 * theta + 1e-9],
    ));
    SuiteResult::from_reports("lemmas1", reports)
}

// ── Reparameterization suite ────────────────────────────────────────────

/// Random network inside the window theorems' valid region: every weight
/// and bias non-negative and scaled so each layer's mixed current stays in
/// `[0, Lθ)` for inputs in `[0, 1]`, leak exactly 1, thresholds 1.
pub fn window_safe_network(rng: &mut Rng, levels: u32, horizon: usize) -> NetworkSpec {
    let widths = [
        2 + rng.below(3) as usize,
        2 + rng.below(4) as usize,
        2 + rng.below(4) as usize,
        2 + rng.below(2) as usize,
    ];
    let omega_cap = 0.9; // σ(logits in [-2.2, 2.2]) stays under this
    let mut layers = Vec::new();
    for l in 0..3 {
        let (w_in, w_out) = (widths[l], widths[l + 1]);
        // Per-step raw current budget keeping Σ_j ω_tj raw(j) < 0.95 Lθ.
        let budget = 0.95 * levels as f64 / (omega_cap * horizon as f64);
        let bias_cap = 0.1 * budget;
        let weight_cap = (budget - bias_cap) / (w_in as f64 * levels as f64);
        let weights: Vec<f64> = (0..w_out * w_in)
            .map(|_| rng.uniform(0.0, weight_cap))
            .collect();
        let bias: Vec<f64> = (0..w_out).map(|_| rng.uniform(0.0, bias_cap)).collect();
        let logits: Vec<f64> = (0..horizon * horizon)
            .map(|_| rng.uniform(-2.2, 2.2))
            .collect();
        layers.push(LayerSpec {
            weights: Tensor::new(vec![w_out, w_in], weights).expect("sized"),
            bias: Bias::Shared(Tensor::from_vec(bias)),
            threshold: 1.0,
            levels,
            v0: 0.0,
            tgim: TGimParams {
                raw_omega: Tensor::new(vec![horizon, horizon], logits).expect("sized"),
                raw_leak: 0.0,
                time_steps: horizon,
                frozen: false,
            },
            leak_schedule: None,
        });
    }
    NetworkSpec {
        layers,
        horizon,
        input_gain: levels as f64,
        readout: crate::pipeline::ReadoutMode::Rate,
    }
}

/// Reparameterize random window-safe networks and compare source against
/// target on random inputs: exact window counts, logits to 1e-6, SOPs to
/// 0.1 %.
pub fn reparam_suite(
    nets: usize,
    inputs_per_net: usize,
    seed: u64,
    mode: Parallelism,
) -> SuiteResult {
    let root = Rng::new(seed);
    let reports = map_indexed(mode, nets, |i| {
        let id = i as u64;
        let mut rng = root.derive(id);
        let levels = 2 + rng.below(3) as u32; // {2,3,4}
        let horizon = 2 + rng.below(2) as usize; // {2,3}
        let net = window_safe_network(&mut rng, levels, horizon);
        let params = format!("L={levels} T={horizon} widths={:?}", net_widths(&net));
        match reparameterize_network(&net) {
            Err(e) => TrialReport {
                suite: "reparam".into(),
                id,
                seed,
                params,
                lhs: format!("error: {e}"),
                rhs: "-".into(),
                verdict: Verdict::Fail,
                deviation: f64::INFINITY,
            },
            Ok(dst) => {
                let inputs: Vec<Vec<f64>> = (0..inputs_per_net)
                    .map(|_| (0..net.input_width()).map(|_| rng.next_f64()).collect())
                    .collect();
                match verify_equivalence(&net, &dst, &inputs) {
                    Err(e) => TrialReport {
                        suite: "reparam".into(),
                        id,
                        seed,
                        params,
                        lhs: format!("error: {e}"),
                        rhs: "-".into(),
                        verdict: Verdict::Fail,
                        deviation: f64::INFINITY,
                    },
                    Ok(rep) => TrialReport {
                        suite: "reparam".into(),
                        id,
                        seed,
                        params: format!(
                            "{params} inputs={} sop_rel_dev={:?}",
                            rep.trials, rep.sop_rel_dev
                        ),
                        lhs: format!("mismatches={}", rep.window_count_mismatches),
                        rhs: format!("logit_dev={:?}", rep.max_logit_dev),
                        verdict: if rep.pass { Verdict::Pass } else { Verdict::Fail },
                        deviation: rep.max_logit_dev.max(rep.window_count_mismatches as f64),
                    },
                }
            }
        }
    });
    SuiteResult::from_reports("reparam", reports)
}

fn net_widths(net: &NetworkSpec) -> Vec<usize> {
    let mut w = vec![net.input_width()];
    w.extend(net.layers.iter().map(|l| l.width_out()));
    w
}

// ── Gradient suite ──────────────────────────────────────────────────────

/// Random toy network for gradient checking: up to 3 layers, widths <= 4,
/// horizons <= 4, levels <= 3, signed weights, sampled mixing logits and
/// leak. Vanilla draws get L = 1, identity mixing.
fn toy_network(rng: &mut Rng, vanilla: bool) -> NetworkSpec {
    let depth = 1 + rng.below(3) as usize;
    let horizon = 1 + rng.below(4) as usize;
    let levels = if vanilla { 1 } else { 1 + rng.below(3) as u32 };
    let mut widths = vec![1 + rng.below(4) as usize];
    for _ in 0..depth {
        widths.push(1 + rng.below(4) as usize);
    }
    let mut layers = Vec::new();
    for l in 0..depth {
        let (w_in, w_out) = (widths[l], widths[l + 1]);
        let theta = rng.uniform(0.5, 1.5);
        let weights: Vec<f64> = (0..w_out * w_in).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let bias: Vec<f64> = (0..w_out).map(|_| rng.uniform(-0.5, 0.5)).collect();
        let tgim = if vanilla {
            let mut p = TGimParams::init(TGimInit::Identity, horizon).expect("horizon >= 1");
            // A fixed non-unit leak exercises the temporal term.
            p.raw_leak = rng.uniform(-1.0, 1.0);
            p
        } else {
            TGimParams {
                raw_omega: Tensor::new(
                    vec![horizon, horizon],
                    (0..horizon * horizon).map(|_| rng.uniform(-2.0, 2.0)).collect(),
                )
                .expect("sized"),
                raw_leak: rng.uniform(-1.0, 1.0),
                time_steps: horizon,
                frozen: false,
            }
        };
        layers.push(LayerSpec {
            weights: Tensor::new(vec![w_out, w_in], weights).expect("sized"),
            bias: Bias::Shared(Tensor::from_vec(bias)),
            threshold: theta,
            levels,
            v0: rng.uniform(0.0, theta),
            tgim,
            leak_schedule: None,
        });
    }
    NetworkSpec {
        layers,
        horizon,
        input_gain: if rng.below(2) == 0 { 1.0 } else { levels as f64 },
        readout: crate::pipeline::ReadoutMode::Rate,
    }
}

fn rel_close(a: f64, b: f64) -> bool {
    let diff = (a - b).abs();
    diff <= 1e-10 * a.abs().max(b.abs()) || diff <= 1e-14
}

/// Compare one network's reverse-mode bundles against the forward-mode
/// evaluator. Returns the worst relative deviation observed.
fn compare_network_grads(
    net: &NetworkSpec,
    x: &[f64],
    spike_weights: &Tensor,
    bundles: &[GradBundle],
    chain: ChainMode,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut check = |reverse: f64, param: Param| -> Result<()> {
        let dual = loss_grad_wrt(net, x, spike_weights, param, chain)?;
        let diff = (reverse - dual).abs();
        let denom = reverse.abs().max(dual.abs());
        if !rel_close(reverse, dual) {
            worst = worst.max(if denom > 0.0 { diff / denom } else { diff });
        } else if denom > 0.0 {
            worst = worst.max(diff / denom.max(1.0));
        }
        Ok(())
    };

    for (l, (layer, bundle)) in net.layers.iter().zip(bundles).enumerate() {
        let (w_out, w_in) = (layer.width_out(), layer.width_in());
        for u in 0..w_out {
            for k in 0..w_in {
                check(
                    bundle.grad_w.at(u, k),
                    Param::Weight { layer: l, row: u, col: k },
                )?;
            }
            check(bundle.grad_b.data()[u], Param::BiasAt { layer: l, unit: u })?;
        }
        if chain == ChainMode::Detached && !layer.tgim.frozen {
            for t in 0..net.horizon {
                for j in 0..net.horizon {
                    check(
                        bundle.grad_raw_omega.at(t, j),
                        Param::RawOmega { layer: l, row: t, col: j },
                    )?;
                }
            }
            check(bundle.grad_raw_leak, Param::RawLeak { layer: l })?;
        }
        if l == 0 {
            for t in 0..net.horizon {
                for u in 0..w_in {
                    check(
                        bundle.grad_input_spikes.at(t, u),
                        Param::Input { step: t, unit: u },
                    )?;
                }
            }
        }
    }
    Ok(worst)
}

/// One gradient trial: random toy network, random loss direction, both
/// backward modes against the dual-number evaluator.
fn grad_trial(id: u64, seed: u64, root: &Rng) -> TrialReport {
    let mut rng = root.derive(id);
    let vanilla = id % 2 == 1;
    let net = toy_network(&mut rng, vanilla);
    let x: Vec<f64> = (0..net.input_width())
        .map(|_| rng.uniform(-1.0, 1.0))
        .collect();
    let w_out = net.output_width();
    let spike_weights = Tensor::new(
        vec![net.horizon, w_out],
        (0..net.horizon * w_out)
            .map(|_| rng.uniform(-1.0, 1.0))
            .collect(),
    )
    .expect("sized");

    let run = || -> Result<f64> {
        let out = forward(&net, &x, true)?;
        let caches = out.caches.as_ref().expect("recorded");
        let (mode, chain) = if vanilla {
            (TrainMode::VanillaReference, ChainMode::Recurrent)
        } else {
            (TrainMode::Direct, ChainMode::Detached)
        };
        let bundles = backward_from_spike_grad(&net, caches, &spike_weights, mode)?;
        compare_network_grads(&net, &x, &spike_weights, &bundles, chain)
    };

    let mut params = format!(
        "mode={} layers={} T={} L={} widths={:?}",
        if vanilla { "vanilla" } else { "detached" },
        net.layers.len(),
        net.horizon,
        net.layers[0].levels,
        net_widths(&net)
    );
    match run() {
        Ok(worst) => TrialReport {
            suite: "grad".into(),
            id,
            seed,
            params,
            lhs: "reverse".into(),
            rhs: "forward-mode".into(),
            verdict: if worst <= 1e-10 { Verdict::Pass } else { Verdict::Fail },
            deviation: worst,
        },
        Err(e) => {
            let _ = write!(params, " error={e}");
            TrialReport {
                suite: "grad".into(),
                id,
                seed,
                params,
                lhs: "error".into(),
                rhs: "-".into(),
                verdict: Verdict::Fail,
                deviation: f64::INFINITY,
            }
        }
    }
}

/// Detachment probe: a frozen mixing matrix with one zeroed column blocks
/// every gradient path to that input step; the blocked gradients must be
/// exactly zero.
pub fn detachment_zero_column_report(seed: u64) -> TrialReport {
    let mut rng = Rng::new(seed).derive(0xb10c);
    let horizon = 3usize;
    let blocked = 1usize;
    let mut logits: Vec<f64> = (0..horizon * horizon)
        .map(|_| rng.uniform(0.1, 0.9))
        .collect();
    for t in 0..horizon {
        logits[t * horizon + blocked] = 0.0;
    }
    let w_in = 2;
    let w_out = 2;
    let net = NetworkSpec {
        layers: vec![LayerSpec {
            weights: Tensor::new(
                vec![w_out, w_in],
                (0..w_out * w_in).map(|_| rng.uniform(-1.0, 1.0)).collect(),
            )
            .expect("sized"),
            bias: Bias::Shared(Tensor::from_vec(vec![0.1, -0.2])),
            threshold: 1.0,
            levels: 2,
            v0: 0.25,
            tgim: TGimParams::frozen(
                Tensor::new(vec![horizon, horizon], logits).expect("sized"),
                1.0,
                horizon,
            )
            .expect("square"),
            leak_schedule: None,
        }],
        horizon,
        input_gain: 1.0,
        readout: crate::pipeline::ReadoutMode::Rate,
    };
    let x = [0.8, 0.6];
    let spike_weights = Tensor::new(
        vec![horizon, w_out],
        (0..horizon * w_out).map(|_| rng.uniform(-1.0, 1.0)).collect(),
    )
    .expect("sized");

    let result = forward(&net, &x, true).and_then(|out| {
        backward_from_spike_grad(
            &net,
            out.caches.as_ref().expect("recorded"),
            &spike_weights,
            TrainMode::Direct,
        )
    });
    let (verdict, detail, dev) = match result {
        Ok(bundles) => {
            let row = bundles[0].grad_input_spikes.row(blocked);
            let max = row.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            (
                if max == 0.0 { Verdict::Pass } else { Verdict::Fail },
                format!("{row:?}"),
                max,
            )
        }
        Err(e) => (Verdict::Fail, format!("error: {e}"), f64::INFINITY),
    };
    TrialReport {
        suite: "grad".into(),
        id: u64::MAX,
        seed,
        params: format!("detach_probe blocked_step={blocked} T={horizon}"),
        lhs: detail,
        rhs: "[0.0, 0.0]".into(),
        verdict,
        deviation: dev,
    }
}

/// Gradient oracle suite: `nets` random comparisons plus the detachment
/// probe.
pub fn grad_suite(nets: usize, seed: u64, mode: Parallelism) -> SuiteResult {
    let root = Rng::new(seed);
    let mut reports = map_indexed(mode, nets, |i| grad_trial(i as u64, seed, &root));
    reports.push(detachment_zero_column_report(seed));
    SuiteResult::from_reports("grad", reports)
}

// ── Suite registry ──────────────────────────────────────────────────────

/// Named verification suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Lemma41,
    Thm42,
    Cor43,
    Thm44,
    LemmaS1,
    Reparam,
    Grad,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Lemma41,
        Suite::Thm42,
        Suite::Cor43,
        Suite::Thm44,
        Suite::LemmaS1,
        Suite::Reparam,
        Suite::Grad,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Lemma41 => "lemma41",
            Suite::Thm42 => "thm42",
            Suite::Cor43 => "cor43",
            Suite::Thm44 => "thm44",
            Suite::LemmaS1 => "lemmas1",
            Suite::Reparam => "reparam",
            Suite::Grad => "grad",
        }
    }

    pub fn parse(name: &str) -> Option<Suite> {
        Suite::ALL.iter().copied().find(|s| s.name() == name)
    }

    /// Trial count used when the caller does not specify one; sized to the
    /// acceptance targets.
    pub fn default_trials(self) -> usize {
        match self {
            Suite::Lemma41 | Suite::Thm42 | Suite::LemmaS1 => 10_000,
            Suite::Cor43 => 10_000,
            Suite::Thm44 => 100_000,
            Suite::Reparam => 2_000,
            Suite::Grad => 100,
        }
    }
}

/// Run one suite. The meaning of `trials` follows the suite: raw trial
/// count, sweep points per combination (cor43), Monte-Carlo samples
/// (thm44), net-times-inputs (reparam, 20 nets), or toy networks (grad).
pub fn run_suite(suite: Suite, trials: usize, seed: u64, mode: Parallelism) -> Result<SuiteResult> {
    match suite {
        Suite::Lemma41 => Ok(lemma41_suite(trials, seed, mode)),
        Suite::Thm42 => {
            let windows = thm42_windows_suite(trials, seed, mode);
            let closed = thm42_closed_suite(trials, seed, mode);
            Ok(SuiteResult::merge("thm42", vec![windows, closed]))
        }
        Suite::Cor43 => Ok(cor43_suite(trials, seed, mode)),
        Suite::Thm44 => thm44_suite(trials, seed, mode),
        Suite::LemmaS1 => Ok(lemma_s1_suite(trials, seed, mode)),
        Suite::Reparam => Ok(reparam_suite(20, trials.div_ceil(20).max(1), seed, mode)),
        Suite::Grad => Ok(grad_suite(trials, seed, mode)),
    }
}
