//! Network assembly, forward pass, training loops, and instrumentation.
//!
//! A network is a stack of affine layers, each followed by temporal current
//! mixing and a multi-threshold neuron layer. Analog features drive the
//! first layer as a constant current at every step (direct encoding),
//! scaled by `input_gain`; deeper layers receive spike counts weighted by
//! the emitting layer's threshold. The readout is the time- and
//! level-normalized output spike rate `(Σ_t s θ) / (L T)`, which keeps
//! logits comparable across level/horizon configurations.

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Parallelism};
use crate::neuron::{fire_level, SpikeTrain};
use crate::numerics::{affine, Tensor};
use crate::qann::QcfsAnn;
use crate::rng::Rng;
use crate::stbp::{
    backward_layer, sgd_step, sgd_step_momentum, vanilla_bptt_backward, GradBundle, LayerCache,
};
use crate::tgim::{TGimInit, TGimParams};

/// Layer bias: one shared vector applied at every step, or an explicit
/// per-step matrix (produced by reparameterization, inference only).
#[derive(Debug, Clone, PartialEq)]
pub enum Bias {
    Shared(Tensor),
    PerStep(Tensor),
}

impl Bias {
    /// Bias vector for step `t`.
    pub fn at(&self, t: usize) -> Tensor {
        match self {
            Bias::Shared(b) => b.clone(),
            Bias::PerStep(m) => Tensor::from_vec(m.row(t).to_vec()),
        }
    }

    pub fn width(&self) -> usize {
        match self {
            Bias::Shared(b) => b.len(),
            Bias::PerStep(m) => m.cols(),
        }
    }
}

/// One affine + mixing + neuron block.
#[derive(Debug, Clone)]
pub struct LayerSpec {
    /// `[w_out × w_in]`.
    pub weights: Tensor,
    pub bias: Bias,
    pub threshold: f64,
    pub levels: u32,
    pub v0: f64,
    pub tgim: TGimParams,
    /// Per-step leak override; reparameterized networks leak only at
    /// window boundaries.
    pub leak_schedule: Option<Vec<f64>>,
}

impl LayerSpec {
    pub fn width_in(&self) -> usize {
        self.weights.cols()
    }

    pub fn width_out(&self) -> usize {
        self.weights.rows()
    }

    fn leak_at(&self, t: usize) -> f64 {
        match &self.leak_schedule {
            Some(s) => s[t],
            None => self.tgim.leak(),
        }
    }
}

/// How logits are read off the output spike train.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadoutMode {
    /// `(Σ_t s θ) / (L T)`.
    Rate,
}

/// Full serializable network description.
#[derive(Debug, Clone)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
    /// Time-steps every layer runs for.
    pub horizon: usize,
    /// Scale on the first layer's analog drive current.
    pub input_gain: f64,
    pub readout: ReadoutMode,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() || self.horizon == 0 {
            return Err(Error::Config("empty network or zero horizon".into()));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.tgim.time_steps != self.horizon {
                return Err(Error::Config(format!(
                    "layer {l} mixes {} steps, network horizon {}",
                    layer.tgim.time_steps, self.horizon
                )));
            }
            if layer.bias.width() != layer.width_out() {
                return Err(Error::Config(format!("layer {l} bias width mismatch")));
            }
            if let Some(s) = &layer.leak_schedule {
                if s.len() != self.horizon {
                    return Err(Error::Config(format!("layer {l} leak schedule length")));
                }
            }
            if l > 0 && self.layers[l - 1].width_out() != layer.width_in() {
                return Err(Error::Config(format!(
                    "layer {} out {} vs layer {l} in {}",
                    l - 1,
                    self.layers[l - 1].width_out(),
                    layer.width_in()
                )));
            }
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].width_in()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("validated").width_out()
    }
}

/// Build a fresh direct-training network: scaled-uniform weights, bias at
/// θ/2, θ = 1, v(0) = 0, uniform mixing, first-layer gain `L`.
///
/// The half-threshold bias puts every membrane inside the surrogate window
/// at init, and the readout layer's weights start ten times smaller so its
/// units stay there through the early epochs instead of saturating before
/// the features settle; once a membrane leaves `[θ/2, (L+1/2)θ]` for the
/// whole dataset its gradients are hard zero and it cannot come back.
pub fn build_network(arch: &[usize], horizon: usize, levels: u32, seed: u64) -> Result<NetworkSpec> {
    if arch.len() < 2 {
        return Err(Error::Config("need at least input and output widths".into()));
    }
    if horizon == 0 || levels == 0 {
        return Err(Error::Config("horizon and levels must be >= 1".into()));
    }
    let threshold = 1.0;
    let rng = Rng::new(seed);
    let mut layers = Vec::new();
    for (l, pair) in arch.windows(2).enumerate() {
        let (w_in, w_out) = (pair[0], pair[1]);
        let readout_gain = if l + 2 == arch.len() { 0.1 } else { 1.0 };
        let bound = readout_gain * (6.0 / (w_in + w_out) as f64).sqrt();
        let mut layer_rng = rng.derive(l as u64);
        let data = (0..w_out * w_in)
            .map(|_| layer_rng.uniform(-bound, bound))
            .collect();
        layers.push(LayerSpec {
            weights: Tensor::new(vec![w_out, w_in], data)?,
            bias: Bias::Shared(Tensor::from_vec(vec![threshold / 2.0; w_out])),
            threshold,
            levels,
            v0: 0.0,
            tgim: TGimParams::init(TGimInit::Uniform, horizon)?,
            leak_schedule: None,
        });
    }
    Ok(NetworkSpec {
        layers,
        horizon,
        input_gain: levels as f64,
        readout: ReadoutMode::Rate,
    })
}

/// Result of one sample's forward pass.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub logits: Vec<f64>,
    /// Per-layer caches, present when recording was requested.
    pub caches: Option<Vec<LayerCache>>,
    /// Per-layer spike trains, present when recording was requested.
    pub spikes: Option<Vec<SpikeTrain>>,
}

/// Run one sample through the network.
pub fn forward(net: &NetworkSpec, x: &[f64], record: bool) -> Result<ForwardOutput> {
    if x.len() != net.input_width() {
        return Err(Error::Dimension(format!(
            "input width {} vs layer 0 width {}",
            x.len(),
            net.input_width()
        )));
    }
    let horizon = net.horizon;
    let mut caches = record.then(Vec::new);
    let mut trains = record.then(Vec::new);

    // Effective affine input per step for the first layer: scaled features.
    let mut x_eff = Tensor::zeros(vec![horizon, x.len()]);
    for t in 0..horizon {
        for (k, &v) in x.iter().enumerate() {
            x_eff.set(t, k, v * net.input_gain);
        }
    }
    let mut input_scale = net.input_gain;
    let mut logits = Vec::new();

    for (l, layer) in net.layers.iter().enumerate() {
        let w_out = layer.width_out();
        let mut raw = Tensor::zeros(vec![horizon, w_out]);
        for t in 0..horizon {
            let row = affine(
                &layer.weights,
                &Tensor::from_vec(x_eff.row(t).to_vec()),
                &layer.bias.at(t),
            )?;
            raw.row_mut(t).copy_from_slice(row.data());
        }
        let mixed = crate::tgim::mix_currents(&layer.tgim, &raw)?;

        let mut v = vec![layer.v0; w_out];
        let mut membrane = Tensor::zeros(vec![horizon, w_out]);
        let mut v_prev = Tensor::zeros(vec![horizon, w_out]);
        let mut steps = Vec::with_capacity(horizon);
        for t in 0..horizon {
            let leak = layer.leak_at(t);
            let mut fired = vec![0u32; w_out];
            for u in 0..w_out {
                v_prev.set(t, u, v[u]);
                let m = leak * v[u] + mixed.at(t, u);
                membrane.set(t, u, m);
                let s = fire_level(m, layer.threshold, layer.levels);
                fired[u] = s;
                v[u] = m - s as f64 * layer.threshold;
            }
            steps.push(fired);
        }
        let train = SpikeTrain { steps };

        if l + 1 == net.layers.len() {
            let norm = layer.levels as f64 * horizon as f64;
            logits = (0..w_out)
                .map(|u| {
                    let total: u64 = train.steps.iter().map(|s| s[u] as u64).sum();
                    total as f64 * layer.threshold / norm
                })
                .collect();
        }

        if let Some(c) = caches.as_mut() {
            c.push(LayerCache {
                x_eff: x_eff.clone(),
                input_scale,
                weights: layer.weights.clone(),
                raw,
                membrane,
                v_prev,
                omega: layer.tgim.omega(),
                leak: layer.tgim.leak(),
                raw_omega: layer.tgim.raw_omega.clone(),
                raw_leak: layer.tgim.raw_leak,
                frozen_tgim: layer.tgim.frozen,
                identity_tgim: layer.tgim.is_identity(),
                threshold: layer.threshold,
                levels: layer.levels,
            });
        }

        // Next layer's affine input: spike counts times this threshold.
        if l + 1 < net.layers.len() {
            let mut next = Tensor::zeros(vec![horizon, w_out]);
            for t in 0..horizon {
                for u in 0..w_out {
                    next.set(t, u, train.steps[t][u] as f64 * layer.threshold);
                }
            }
            x_eff = next;
            input_scale = layer.threshold;
        }
        if let Some(ts) = trains.as_mut() {
            ts.push(train);
        }
    }

    Ok(ForwardOutput {
        logits,
        caches,
        spikes: trains,
    })
}

/// Forward a batch, optionally in parallel; outputs keep input order.
pub fn forward_batch(
    net: &NetworkSpec,
    xs: &[Vec<f64>],
    record: bool,
    mode: Parallelism,
) -> Result<Vec<ForwardOutput>> {
    map_indexed(mode, xs.len(), |i| forward(net, &xs[i], record))
        .into_iter()
        .collect()
}

/// Index of the largest logit; ties resolve to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Softmax cross-entropy and its logit gradient for one sample.
pub fn loss_and_grad_single(
    logits: &[f64],
    label: usize,
    n_classes: usize,
) -> Result<(f64, Vec<f64>)> {
    if logits.len() != n_classes || label >= n_classes {
        return Err(Error::Dimension(format!(
            "{} logits, {n_classes} classes, label {label}",
            logits.len()
        )));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = -(exps[label] / sum).ln();
    let grad = exps
        .iter()
        .enumerate()
        .map(|(i, &e)| e / sum - if i == label { 1.0 } else { 0.0 })
        .collect();
    Ok((loss, grad))
}

/// Mean softmax cross-entropy over a batch plus per-sample logit gradients
/// (already divided by the batch size).
pub fn loss_and_grad(
    logits: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
) -> Result<(f64, Vec<Vec<f64>>)> {
    if logits.len() != labels.len() {
        return Err(Error::Dimension("logits/labels length mismatch".into()));
    }
    let scale = 1.0 / logits.len() as f64;
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(logits.len());
    for (z, &y) in logits.iter().zip(labels) {
        let (loss, mut g) = loss_and_grad_single(z, y, n_classes)?;
        total += loss * scale;
        for gi in &mut g {
            *gi *= scale;
        }
        grads.push(g);
    }
    Ok((total, grads))
}

/// Training mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    /// Detached-chain backward; mixing and leak learn.
    Direct,
    /// Recurrent reference: L = 1, identity mixing, classic BPTT.
    VanillaReference,
    /// Same mechanics as `Direct`, applied to a converted network.
    HybridFinetune,
}

/// Hyperparameters of the spike-train training loop.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub mode: TrainMode,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr < 0.0 {
            return Err(Error::Config("lr must be >= 0".into()));
        }
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

pub use crate::qann::EpochStats;

/// Momentum buffers per layer.
struct Velocity {
    w: Vec<f64>,
    b: Vec<f64>,
    omega: Vec<f64>,
    leak: f64,
}

/// Gradient of the rate readout: `∂logit_u/∂s(t,u) = θ / (L T)`.
fn readout_grad(net: &NetworkSpec, grad_logits: &[f64]) -> Tensor {
    let last = net.layers.last().expect("validated");
    let factor = last.threshold / (last.levels as f64 * net.horizon as f64);
    let mut g = Tensor::zeros(vec![net.horizon, last.width_out()]);
    for t in 0..net.horizon {
        for (u, &gl) in grad_logits.iter().enumerate() {
            g.set(t, u, gl * factor);
        }
    }
    g
}

/// Backward through the whole stack from an output spike gradient
/// `[T × w_out]`; returns one bundle per layer.
pub fn backward_from_spike_grad(
    net: &NetworkSpec,
    caches: &[LayerCache],
    grad_spikes_out: &Tensor,
    mode: TrainMode,
) -> Result<Vec<GradBundle>> {
    let mut grad_spikes = grad_spikes_out.clone();
    let mut bundles = vec![None; net.layers.len()];
    for l in (0..net.layers.len()).rev() {
        let bundle = match mode {
            TrainMode::VanillaReference => vanilla_bptt_backward(&grad_spikes, &caches[l])?,
            TrainMode::Direct | TrainMode::HybridFinetune => {
                backward_layer(&grad_spikes, &caches[l])?
            }
        };
        grad_spikes = bundle.grad_input_spikes.clone();
        bundles[l] = Some(bundle);
    }
    Ok(bundles.into_iter().map(|b| b.expect("filled")).collect())
}

/// Backward through the whole stack from a logit gradient.
fn backward_network(
    net: &NetworkSpec,
    caches: &[LayerCache],
    grad_logits: &[f64],
    mode: TrainMode,
) -> Result<Vec<GradBundle>> {
    backward_from_spike_grad(net, caches, &readout_grad(net, grad_logits), mode)
}

/// Train a network with minibatch SGD. Deterministic under the config
/// seed regardless of the execution mode or thread count: per-sample
/// gradients are collected in batch order and reduced sequentially.
pub fn stbp_train(
    net: &NetworkSpec,
    features: &[Vec<f64>],
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<(NetworkSpec, Vec<EpochStats>)> {
    cfg.validate()?;
    net.validate()?;
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::Config("dataset empty or mismatched".into()));
    }
    let mut net = net.clone();
    for (l, layer) in net.layers.iter().enumerate() {
        if matches!(layer.bias, Bias::PerStep(_)) || layer.leak_schedule.is_some() {
            return Err(Error::Mode(format!(
                "layer {l}: reparameterized layers are inference-only"
            )));
        }
        if cfg.mode == TrainMode::VanillaReference
            && (layer.levels != 1 || !layer.tgim.is_identity())
        {
            return Err(Error::Mode(format!(
                "layer {l}: vanilla reference mode needs L = 1 and identity mixing"
            )));
        }
    }
    let n_classes = net.output_width();
    let mut order: Vec<usize> = (0..features.len()).collect();
    let shuffle_root = Rng::new(cfg.seed ^ 0x7e57_da7a);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut velocity: Vec<Velocity> = net
        .layers
        .iter()
        .map(|l| Velocity {
            w: vec![0.0; l.weights.len()],
            b: vec![0.0; l.bias.width()],
            omega: vec![0.0; l.tgim.raw_omega.len()],
            leak: 0.0,
        })
        .collect();

    for epoch in 0..cfg.epochs {
        shuffle_root.derive(epoch as u64).shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let per_sample: Vec<Result<(f64, bool, Vec<GradBundle>)>> =
                map_indexed(Parallelism::auto(), batch.len(), |bi| {
                    let idx = batch[bi];
                    let out = forward(&net, &features[idx], true)?;
                    let (loss, grad_logits) =
                        loss_and_grad_single(&out.logits, labels[idx], n_classes)?;
                    let bundles = backward_network(
                        &net,
                        out.caches.as_ref().expect("recorded"),
                        &grad_logits,
                        cfg.mode,
                    )?;
                    Ok((loss, argmax(&out.logits) == labels[idx], bundles))
                });

            let mut acc: Option<Vec<GradBundle>> = None;
            for item in per_sample {
                let (loss, hit, bundles) = item?;
                if !loss.is_finite() {
                    return Err(Error::Training { epoch });
                }
                epoch_loss += loss;
                correct += hit as usize;
                match acc.as_mut() {
                    None => acc = Some(bundles),
                    Some(total) => {
                        for (t, b) in total.iter_mut().zip(bundles) {
                            add_assign(t.grad_w.data_mut(), b.grad_w.data());
                            add_assign(t.grad_b.data_mut(), b.grad_b.data());
                            add_assign(t.grad_raw_omega.data_mut(), b.grad_raw_omega.data());
                            t.grad_raw_leak += b.grad_raw_leak;
                        }
                    }
                }
            }
            let Some(mut grads) = acc else { continue };
            let scale = 1.0 / batch.len() as f64;
            for g in &mut grads {
                scale_assign(g.grad_w.data_mut(), scale);
                scale_assign(g.grad_b.data_mut(), scale);
                scale_assign(g.grad_raw_omega.data_mut(), scale);
                g.grad_raw_leak *= scale;
            }
            apply_updates(&mut net, &grads, &mut velocity, cfg);
        }
        history.push(EpochStats {
            epoch,
            loss: epoch_loss / features.len() as f64,
            accuracy: correct as f64 / features.len() as f64,
        });
    }
    Ok((net, history))
}

fn add_assign(a: &mut [f64], b: &[f64]) {
    for (x, &y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

fn scale_assign(a: &mut [f64], s: f64) {
    for x in a.iter_mut() {
        *x *= s;
    }
}

fn apply_updates(
    net: &mut NetworkSpec,
    grads: &[GradBundle],
    velocity: &mut [Velocity],
    cfg: &TrainConfig,
) {
    let train_tgim = matches!(cfg.mode, TrainMode::Direct | TrainMode::HybridFinetune);
    for ((layer, g), vel) in net.layers.iter_mut().zip(grads).zip(velocity) {
        let bias = match &mut layer.bias {
            Bias::Shared(b) => b,
            Bias::PerStep(_) => unreachable!("rejected before training"),
        };
        if cfg.momentum > 0.0 {
            sgd_step_momentum(
                layer.weights.data_mut(),
                g.grad_w.data(),
                &mut vel.w,
                cfg.lr,
                cfg.weight_decay,
                cfg.momentum,
            );
            sgd_step_momentum(
                bias.data_mut(),
                g.grad_b.data(),
                &mut vel.b,
                cfg.lr,
                cfg.weight_decay,
                cfg.momentum,
            );
        } else {
            sgd_step(layer.weights.data_mut(), g.grad_w.data(), cfg.lr, cfg.weight_decay);
            sgd_step(bias.data_mut(), g.grad_b.data(), cfg.lr, cfg.weight_decay);
        }
        // Mixing and leak logits learn without weight decay.
        if train_tgim && !layer.tgim.frozen {
            if cfg.momentum > 0.0 {
                sgd_step_momentum(
                    layer.tgim.raw_omega.data_mut(),
                    g.grad_raw_omega.data(),
                    &mut vel.omega,
                    cfg.lr,
                    0.0,
                    cfg.momentum,
                );
                let mut leak = [layer.tgim.raw_leak];
                let mut vleak = [vel.leak];
                sgd_step_momentum(&mut leak, &[g.grad_raw_leak], &mut vleak, cfg.lr, 0.0, cfg.momentum);
                layer.tgim.raw_leak = leak[0];
                vel.leak = vleak[0];
            } else {
                sgd_step(layer.tgim.raw_omega.data_mut(), g.grad_raw_omega.data(), cfg.lr, 0.0);
                let mut leak = [layer.tgim.raw_leak];
                sgd_step(&mut leak, &[g.grad_raw_leak], cfg.lr, 0.0);
                layer.tgim.raw_leak = leak[0];
            }
        }
    }
}

/// Fraction of samples whose argmax logit matches the label.
pub fn evaluate(net: &NetworkSpec, features: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    let outs = forward_batch(net, features, false, Parallelism::auto())?;
    let correct = outs
        .iter()
        .zip(labels)
        .filter(|(o, &y)| argmax(&o.logits) == y)
        .count();
    Ok(correct as f64 / features.len() as f64)
}

/// Replace every quantized activation of a trained ANN with a
/// multi-threshold neuron layer under the expectation-preserving
/// initialization: θ = ϑ, uniform mixing, λ = 1, v(0) = θ/2, first-layer
/// current gain `L`, and biases scaled by `L` so per-step currents match
/// the activation's operating point.
pub fn hybrid_convert(ann: &QcfsAnn, horizon: usize, levels: u32) -> Result<NetworkSpec> {
    if horizon == 0 || levels == 0 {
        return Err(Error::Config("horizon and levels must be >= 1".into()));
    }
    let mut layers = Vec::with_capacity(ann.layers.len());
    for l in &ann.layers {
        let scaled_bias: Vec<f64> = l.bias.data().iter().map(|&b| b * levels as f64).collect();
        layers.push(LayerSpec {
            weights: l.weights.clone(),
            bias: Bias::Shared(Tensor::from_vec(scaled_bias)),
            threshold: l.vartheta,
            levels,
            v0: l.vartheta / 2.0,
            tgim: TGimParams::init(TGimInit::Uniform, horizon)?,
            leak_schedule: None,
        });
    }
    Ok(NetworkSpec {
        layers,
        horizon,
        input_gain: levels as f64,
        readout: ReadoutMode::Rate,
    })
}

/// Brief STBP fine-tuning of a converted network.
pub fn hybrid_finetune(
    net: &NetworkSpec,
    features: &[Vec<f64>],
    labels: &[usize],
    epochs: usize,
    cfg: &TrainConfig,
) -> Result<(NetworkSpec, Vec<EpochStats>)> {
    if epochs == 0 {
        return Ok((net.clone(), Vec::new()));
    }
    let cfg = TrainConfig {
        epochs,
        mode: TrainMode::HybridFinetune,
        ..cfg.clone()
    };
    stbp_train(net, features, labels, &cfg)
}

/// Synaptic-operation count and energy estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SopReport {
    pub sops: u64,
    pub energy_mj: f64,
}

/// Energy per synaptic operation, in millijoules (0.9 pJ).
pub const E_PER_SOP_MJ: f64 = 0.9e-9;

/// Synaptic operations of one recorded forward pass: every spike triggers
/// one accumulation per outgoing synapse, so a unit's count is its spike
/// total times its fan-out (the next layer's width). Output-layer spikes
/// have no outgoing synapses.
pub fn sops_of_output(net: &NetworkSpec, out: &ForwardOutput) -> Result<u64> {
    let trains = out.spikes.as_ref().ok_or_else(|| {
        Error::Instrumentation("forward pass did not record spike statistics".into())
    })?;
    let mut sops = 0u64;
    for (l, train) in trains.iter().enumerate() {
        if l + 1 >= net.layers.len() {
            break;
        }
        let fan_out = net.layers[l + 1].width_out() as u64;
        sops += train.total() * fan_out;
    }
    Ok(sops)
}

/// Total SOPs and energy over a batch, with a configurable per-operation
/// energy constant.
pub fn count_sops_with(
    net: &NetworkSpec,
    xs: &[Vec<f64>],
    e_per_sop_mj: f64,
) -> Result<SopReport> {
    let outs = forward_batch(net, xs, true, Parallelism::auto())?;
    let mut sops = 0u64;
    for out in &outs {
        sops += sops_of_output(net, out)?;
    }
    Ok(SopReport {
        sops,
        energy_mj: sops as f64 * e_per_sop_mj,
    })
}

/// [`count_sops_with`] at the default energy constant.
pub fn count_sops(net: &NetworkSpec, xs: &[Vec<f64>]) -> Result<SopReport> {
    count_sops_with(net, xs, E_PER_SOP_MJ)
}
