//! Acceptance suite: every release gate as one test, each printing a
//! pass/fail line (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Spike-count equalities are exact integer comparisons; membrane traces
//! allow 1e-9 absolute; gradients 1e-10 relative; readout logits 1e-6;
//! synaptic-operation counts 0.1 % relative; Monte-Carlo means four
//! standard errors. All sizes and tolerances are pinned here.

use std::time::Instant;

use lmht_core::checkpoint::{decode, encode, Checkpoint, CheckpointMeta};
use lmht_core::dataset::{make_dataset, SyntheticDataset};
use lmht_core::exec::Parallelism;
use lmht_core::numerics::affine;
use lmht_core::oracle::{
    check_thm44_expectation, cor43_suite, grad_suite, lemma_s1_suite, reparam_suite, run_suite,
    thm42_closed_suite, thm42_windows_suite, Suite,
};
use lmht_core::pipeline::{
    build_network, evaluate, forward, hybrid_convert, hybrid_finetune, stbp_train, Bias,
    NetworkSpec, TrainConfig, TrainMode,
};
use lmht_core::qann::{train_qcfs_ann, QcfsTrainConfig};
use lmht_core::rng::Rng;
use lmht_core::tgim::{TGimInit, TGimParams};

const SEED: u64 = 1;

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "acceptance {criterion}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion}: {detail}");
}

// Criterion 1: 10,000 randomized window trials, exact per-window counts,
// membranes to 1e-9, under 30 s single-threaded.
#[test]
fn criterion_01_window_equivalence() {
    let start = Instant::now();
    let result = thm42_windows_suite(10_000, SEED, Parallelism::Sequential);
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "1 window-equivalence",
        result.ok() && result.passed == 10_000 && elapsed < 30.0,
        &format!(
            "{} passed, {} failed, max v-dev {:e}, {elapsed:.2}s single-threaded",
            result.passed, result.failed, result.max_dev
        ),
    );
}

// Criterion 2: uniform drive totals equal the closed form exactly.
#[test]
fn criterion_02_closed_form() {
    let result = thm42_closed_suite(10_000, SEED, Parallelism::Parallel);
    report(
        "2 closed-form-count",
        result.ok() && result.passed == 10_000,
        &format!("{} passed, {} failed", result.passed, result.failed),
    );
}

// Criterion 3: region classifier vs simulation, 10,000-point sweeps for
// (L,T) in {1..4}x{2..6}, 1e-9 boundary band, zero disagreements.
#[test]
fn criterion_03_firing_regions() {
    let result = cor43_suite(10_000, SEED, Parallelism::Parallel);
    report(
        "3 firing-regions",
        result.ok() && result.passed == 20,
        &format!(
            "{} combos clean, {} with disagreements",
            result.passed, result.failed
        ),
    );
}

// Criterion 4: expectation gap within 4 SE at N = 1e5 for the four pinned
// configurations; the (1,1,1) case identically zero.
#[test]
fn criterion_04_expectation_identity() {
    let result = run_suite(Suite::Thm44, 100_000, SEED, Parallelism::Parallel).unwrap();
    let (_, degenerate) = check_thm44_expectation(3, 1, 1, 1, 1.0, 100_000, SEED).unwrap();
    report(
        "4 expectation-identity",
        result.ok() && degenerate.max_abs_gap == 0.0,
        &format!(
            "4 configs within 4 SE, degenerate max |gap| = {:?}",
            degenerate.max_abs_gap
        ),
    );
}

// Criterion 5: membrane bound on the criterion-1 corpus, exactly.
#[test]
fn criterion_05_membrane_bound() {
    let result = lemma_s1_suite(10_000, SEED, Parallelism::Parallel);
    report(
        "5 membrane-bound",
        result.ok() && result.passed >= 10_000 && result.skipped == 1,
        &format!(
            "{} passed, {} failed, {} skipped (precondition probe)",
            result.passed, result.failed, result.skipped
        ),
    );
}

// Criterion 6: 20 random 3-layer networks, 100 inputs each: exact window
// counts, logits to 1e-6, SOPs to 0.1 %.
#[test]
fn criterion_06_reparameterization() {
    let result = reparam_suite(20, 100, SEED, Parallelism::Parallel);
    report(
        "6 reparameterization",
        result.ok() && result.passed == 20,
        &format!(
            "{} nets exact, {} failed, max logit dev {:e}",
            result.passed, result.failed, result.max_dev
        ),
    );
}

// Criterion 7: reverse-mode bundles match the forward-mode chain-rule
// evaluator to 1e-10 relative on 100 toy networks; the zero-column
// detachment probe yields exactly-zero blocked gradients.
#[test]
fn criterion_07_gradient_oracle() {
    let result = grad_suite(100, SEED, Parallelism::Parallel);
    report(
        "7 gradient-oracle",
        result.ok() && result.passed == 101,
        &format!(
            "{} comparisons (incl. detachment probe), worst rel dev {:e}",
            result.passed, result.max_dev
        ),
    );
}

// Independent single-threshold reference: plain per-layer loops, no mixing
// machinery, same leak/threshold values.
fn reference_lif_trace(
    net: &NetworkSpec,
    x: &[f64],
) -> (Vec<Vec<Vec<u32>>>, Vec<Vec<Vec<f64>>>) {
    let mut spikes_all = Vec::new();
    let mut traces_all = Vec::new();
    let mut inputs: Vec<Vec<f64>> = (0..net.horizon)
        .map(|_| x.iter().map(|&v| v * net.input_gain).collect())
        .collect();
    for layer in &net.layers {
        let leak = layer.tgim.leak();
        let width = layer.width_out();
        let mut v = vec![layer.v0; width];
        let mut spikes = Vec::new();
        let mut trace = Vec::new();
        for step_input in &inputs {
            let current = affine(
                &layer.weights,
                &lmht_core::numerics::Tensor::from_vec(step_input.clone()),
                match &layer.bias {
                    Bias::Shared(b) => b,
                    Bias::PerStep(_) => unreachable!("test uses shared bias"),
                },
            )
            .unwrap();
            let mut fired = vec![0u32; width];
            for u in 0..width {
                let m = leak * v[u] + current.data()[u];
                let s = (m >= layer.threshold) as u32;
                fired[u] = s;
                v[u] = m - s as f64 * layer.threshold;
            }
            spikes.push(fired);
            trace.push(v.clone());
        }
        inputs = spikes
            .iter()
            .map(|row| row.iter().map(|&s| s as f64 * layer.threshold).collect())
            .collect();
        spikes_all.push(spikes);
        traces_all.push(trace);
    }
    (spikes_all, traces_all)
}

// Criterion 8a: identity-mixing, L = 1 forward reproduces a hand-rolled
// single-threshold trace step for step, bit-exactly.
#[test]
fn criterion_08a_vanilla_degeneration() {
    let mut rng = Rng::new(SEED ^ 0x8a);
    let mut checked = 0usize;
    for _ in 0..200 {
        let mut net = build_network(&[3, 5, 4, 2], 4, 1, rng.next_u64()).unwrap();
        net.input_gain = 1.0;
        for layer in &mut net.layers {
            layer.tgim = TGimParams::init(TGimInit::Identity, 4).unwrap();
            layer.tgim.raw_leak = rng.uniform(-1.0, 1.0);
        }
        let x: Vec<f64> = (0..3).map(|_| rng.uniform(-1.5, 1.5)).collect();
        let out = forward(&net, &x, true).unwrap();
        let (ref_spikes, ref_trace) = reference_lif_trace(&net, &x);
        let trains = out.spikes.as_ref().unwrap();
        let caches = out.caches.as_ref().unwrap();
        for l in 0..net.layers.len() {
            for t in 0..net.horizon {
                assert_eq!(trains[l].steps[t], ref_spikes[l][t], "spikes layer {l} step {t}");
                for u in 0..net.layers[l].width_out() {
                    let sim = caches[l].membrane.at(t, u)
                        - trains[l].steps[t][u] as f64 * net.layers[l].threshold;
                    assert_eq!(
                        sim.to_bits(),
                        ref_trace[l][t][u].to_bits(),
                        "membrane layer {l} step {t} unit {u}"
                    );
                    checked += 1;
                }
            }
        }
    }
    report(
        "8a vanilla-degeneration",
        true,
        &format!("{checked} membrane values bit-identical across 200 networks"),
    );
}

// Criterion 8b: uniform-mixing, leak-1 network equals a T_q = LT quantized
// ANN layer by layer, exactly, over 1e3 random draws.
#[test]
fn criterion_08b_quantized_ann_degeneration() {
    let mut rng = Rng::new(SEED ^ 0x8b);
    let mut mismatches = 0u64;
    let mut values = 0u64;
    for draw in 0..1_000u64 {
        let ann = lmht_core::qann::QcfsAnn::build(&[3, 5, 4, 2], 4, 7_000 + draw).unwrap();
        let snn = hybrid_convert(&ann, 2, 2).unwrap(); // L*T = 4 = T_q
        let x: Vec<f64> = (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let (_, ann_acts) = ann.forward_full(&x).unwrap();
        let out = forward(&snn, &x, true).unwrap();
        for (l, train) in out.spikes.as_ref().unwrap().iter().enumerate() {
            let norm = snn.layers[l].levels as f64 * snn.horizon as f64;
            for u in 0..snn.layers[l].width_out() {
                let total: u64 = train.steps.iter().map(|s| s[u] as u64).sum();
                let rate = total as f64 * snn.layers[l].threshold / norm;
                values += 1;
                if rate != ann_acts[l].data()[u] {
                    mismatches += 1;
                }
            }
        }
    }
    report(
        "8b quantized-ann-degeneration",
        mismatches == 0,
        &format!("{values} layerwise activations compared, {mismatches} mismatches"),
    );
}

// Criterion 9: training smoke. Multi-threshold L=2 T=2 reaches >= 90% on
// the blobs task within 200 epochs; the vanilla L=1 T=4 baseline reaches
// >= 85%; both under 60 s combined. Accuracies reported side by side.
#[test]
fn criterion_09_training_smoke() {
    let (features, labels) = make_dataset(&SyntheticDataset::blobs(600, 3, 7)).unwrap();
    let start = Instant::now();

    let net = build_network(&[2, 32, 32, 3], 2, 2, 7).unwrap();
    let cfg = TrainConfig {
        lr: 0.05,
        weight_decay: 0.0,
        momentum: 0.9,
        epochs: 200,
        batch_size: 64,
        seed: 7,
        mode: TrainMode::Direct,
    };
    let (_, hist) = stbp_train(&net, &features, &labels, &cfg).unwrap();
    let mht_acc = hist.last().unwrap().accuracy;

    let mut vanilla = build_network(&[2, 32, 32, 3], 4, 1, 7).unwrap();
    for layer in &mut vanilla.layers {
        layer.tgim = TGimParams::init(TGimInit::Identity, 4).unwrap();
    }
    let vcfg = TrainConfig {
        mode: TrainMode::VanillaReference,
        ..cfg.clone()
    };
    let (_, vhist) = stbp_train(&vanilla, &features, &labels, &vcfg).unwrap();
    let vanilla_acc = vhist.last().unwrap().accuracy;

    let elapsed = start.elapsed().as_secs_f64();
    let advantage = if mht_acc >= vanilla_acc {
        "multi-threshold >= vanilla"
    } else {
        "vanilla > multi-threshold"
    };
    report(
        "9 training-smoke",
        mht_acc >= 0.90 && vanilla_acc >= 0.85 && elapsed < 60.0,
        &format!(
            "L=2,T=2 acc {mht_acc:.4} (bar 0.90) | L=1,T=4 acc {vanilla_acc:.4} (bar 0.85) | {advantage} | {elapsed:.1}s"
        ),
    );
}

// Criterion 10: hybrid pipeline smoke. Quantized ANN to >= 95%, zero-shot
// conversion within 5 points, 30 fine-tune epochs within 1 point, and the
// converted fields match the expectation-preserving initialization
// exactly.
#[test]
fn criterion_10_hybrid_smoke() {
    let (features, labels) = make_dataset(&SyntheticDataset::blobs(600, 3, 7)).unwrap();
    let qcfg = QcfsTrainConfig {
        lr: 0.1,
        weight_decay: 0.0,
        epochs: 300,
        batch_size: 64,
        seed: 7,
    };
    let (ann, qhist) = train_qcfs_ann(&features, &labels, &[2, 32, 32, 3], 4, &qcfg).unwrap();
    let ann_acc = qhist.last().unwrap().accuracy;

    let snn = hybrid_convert(&ann, 2, 2).unwrap();
    let zero_shot = evaluate(&snn, &features, &labels).unwrap();

    // Field contract: theta = vartheta, v0 = theta/2, leak logit 0 (leak
    // exactly 1), mixing logits exactly logit(1/2) = 0 for T = 2, weights
    // copied, biases scaled by L, first-layer gain L.
    let mut init_ok = snn.input_gain == 2.0;
    for (sl, al) in snn.layers.iter().zip(&ann.layers) {
        init_ok &= sl.threshold == al.vartheta;
        init_ok &= sl.v0 == al.vartheta / 2.0;
        init_ok &= sl.tgim.raw_leak == 0.0 && sl.tgim.leak() == 1.0;
        init_ok &= sl.tgim.raw_omega.data().iter().all(|&w| w == 0.0);
        init_ok &= sl.weights.data() == al.weights.data();
        let Bias::Shared(b) = &sl.bias else {
            panic!("converted bias is shared")
        };
        init_ok &= b
            .data()
            .iter()
            .zip(al.bias.data())
            .all(|(s, a)| *s == a * 2.0);
    }

    let ft_cfg = TrainConfig {
        lr: 5e-4,
        weight_decay: 5e-4,
        momentum: 0.0,
        epochs: 30,
        batch_size: 64,
        seed: 7,
        mode: TrainMode::HybridFinetune,
    };
    let (tuned, _) = hybrid_finetune(&snn, &features, &labels, 30, &ft_cfg).unwrap();
    let tuned_acc = evaluate(&tuned, &features, &labels).unwrap();

    report(
        "10 hybrid-smoke",
        ann_acc >= 0.95
            && (ann_acc - zero_shot).abs() <= 0.05
            && (ann_acc - tuned_acc).abs() <= 0.01
            && init_ok,
        &format!(
            "ann {ann_acc:.4} | zero-shot {zero_shot:.4} | finetuned {tuned_acc:.4} | init fields exact: {init_ok}"
        ),
    );
}

// Expectation identity exercised through the real converted network: for
// each probed unit, inputs are constructed so the unit's pre-activation is
// uniform on [0, theta], the distribution under which the initialization
// is unbiased. LT = 8 here, deliberately different from T_q = 4.
#[test]
fn criterion_10b_expectation_on_real_weights() {
    let (features, labels) = make_dataset(&SyntheticDataset::blobs(600, 3, 7)).unwrap();
    let qcfg = QcfsTrainConfig {
        lr: 0.1,
        weight_decay: 0.0,
        epochs: 100,
        batch_size: 64,
        seed: 7,
    };
    let (ann, _) = train_qcfs_ann(&features, &labels, &[2, 32, 32, 3], 4, &qcfg).unwrap();
    let snn = hybrid_convert(&ann, 4, 2).unwrap();

    let mut rng = Rng::new(SEED ^ 0x10b);
    let theta = snn.layers[0].threshold;
    let w_out = snn.layers[0].width_out();
    let mut gaps = Vec::with_capacity(10_000);
    for _ in 0..10_000 {
        let unit = rng.below(w_out as u64) as usize;
        let target_z = rng.uniform(0.0, theta);
        // Solve W r = target_z - b for the probed unit along its own row.
        let row = snn.layers[0].weights.row(unit).to_vec();
        let norm: f64 = row.iter().map(|w| w * w).sum();
        let ann_bias = ann.layers[0].bias.data()[unit];
        let scale = (target_z - ann_bias) / norm;
        let x: Vec<f64> = row.iter().map(|w| w * scale).collect();

        let out = forward(&snn, &x, true).unwrap();
        let train = &out.spikes.as_ref().unwrap()[0];
        let total: u64 = train.steps.iter().map(|s| s[unit] as u64).sum();
        let rate = total as f64 * theta / (snn.layers[0].levels as f64 * snn.horizon as f64);

        let q = ann.layers[0].vartheta / ann.t_q as f64
            * ((target_z * ann.t_q as f64 / ann.layers[0].vartheta) + 0.5)
                .floor()
                .clamp(0.0, ann.t_q as f64);
        gaps.push(rate - q);
    }
    let n = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / n;
    let var = gaps.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    report(
        "10b expectation-on-real-weights",
        mean.abs() <= 4.0 * se,
        &format!("mean gap {mean:e} vs 4 SE {:e} (LT=8, Tq=4)", 4.0 * se),
    );
}

// Criterion 11: determinism. Same seed, same bytes: suite reports are
// identical across runs and execution modes; checkpoints survive a decode/
// encode round trip byte-for-byte.
#[test]
fn criterion_11_determinism() {
    let mut bodies = Vec::new();
    for mode in [
        Parallelism::Parallel,
        Parallelism::Parallel,
        Parallelism::Sequential,
    ] {
        let mut body = String::new();
        for suite in [Suite::Lemma41, Suite::Thm42, Suite::Grad] {
            let result = run_suite(suite, 500, SEED, mode).unwrap();
            body.push_str(&result.render());
        }
        bodies.push(body);
    }
    let reports_identical = bodies[0] == bodies[1] && bodies[1] == bodies[2];

    let (features, labels) = make_dataset(&SyntheticDataset::blobs(120, 3, 7)).unwrap();
    let net = build_network(&[2, 8, 3], 2, 2, 7).unwrap();
    let cfg = TrainConfig {
        lr: 0.05,
        weight_decay: 0.0,
        momentum: 0.9,
        epochs: 5,
        batch_size: 32,
        seed: 7,
        mode: TrainMode::Direct,
    };
    let (trained, _) = stbp_train(&net, &features, &labels, &cfg).unwrap();
    let meta = CheckpointMeta {
        seed: Some(7),
        command: Some("acceptance".into()),
    };
    let text = encode(&Checkpoint::Snn(trained), &meta);
    let (loaded, meta2) = decode(&text).unwrap();
    let text2 = encode(&loaded, &meta2);
    let round_trip = text == text2;

    report(
        "11 determinism",
        reports_identical && round_trip,
        &format!(
            "reports identical across runs/modes: {reports_identical}, checkpoint byte round trip: {round_trip}"
        ),
    );
}
