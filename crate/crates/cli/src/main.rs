//! Command-line driver for the multi-threshold spiking kernel.
//!
//! Subcommands: `verify` (oracle suites), `train` (spike or quantized-ANN
//! training), `convert` (ANN to spiking network), `reparam`
//! (single-threshold rewrite plus equivalence check), and `bench`
//! (forward pass with synaptic-operation accounting). Every command is
//! deterministic given its flags, seed, and input files. `LMHT_THREADS`
//! caps the parallel trial workers.
//!
//! Exit codes: 0 success, 1 verification or training failure, 2 usage
//! error.

mod config;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{FileConfig, RunMode};
use lmht_core::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta};
use lmht_core::dataset::make_dataset;
use lmht_core::exec::{self, Parallelism};
use lmht_core::oracle::{run_suite, Suite};
use lmht_core::pipeline::{
    build_network, count_sops, evaluate, hybrid_convert, stbp_train, NetworkSpec, TrainMode,
};
use lmht_core::qann::{train_qcfs_ann, QcfsAnn};
use lmht_core::reparam::{reparameterize_network, verify_equivalence};
use lmht_core::rng::Rng;
use lmht_core::tgim::{TGimInit, TGimParams};
use lmht_core::{Error, Result};

#[derive(Parser)]
#[command(name = "lmht", version, about = "Multi-threshold spiking network kernel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an oracle suite and write a line-delimited trial report.
    Verify(VerifyArgs),
    /// Train a network described by a config file.
    Train(TrainArgs),
    /// Convert a quantized-ANN checkpoint into a spiking network.
    Convert(ConvertArgs),
    /// Rewrite a multi-threshold checkpoint as single-threshold and verify.
    Reparam(ReparamArgs),
    /// Forward a batch through a checkpoint and report SOPs and energy.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Lemma41,
    Thm42,
    Cor43,
    Thm44,
    Lemmas1,
    Reparam,
    Grad,
    All,
}

impl SuiteArg {
    fn suites(self) -> Vec<Suite> {
        match self {
            SuiteArg::Lemma41 => vec![Suite::Lemma41],
            SuiteArg::Thm42 => vec![Suite::Thm42],
            SuiteArg::Cor43 => vec![Suite::Cor43],
            SuiteArg::Thm44 => vec![Suite::Thm44],
            SuiteArg::Lemmas1 => vec![Suite::LemmaS1],
            SuiteArg::Reparam => vec![Suite::Reparam],
            SuiteArg::Grad => vec![Suite::Grad],
            SuiteArg::All => Suite::ALL.to_vec(),
        }
    }
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite to run.
    #[arg(long, value_enum)]
    suite: SuiteArg,
    /// Trials per suite; defaults to each suite's acceptance size.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Report file (trial lines plus a summary per suite).
    #[arg(long, default_value = "verify-report.txt")]
    out: String,
}

#[derive(Args)]
struct TrainArgs {
    /// Flat key = value config file.
    #[arg(long)]
    config: String,
    /// Output checkpoint path.
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct ConvertArgs {
    /// Quantized-ANN checkpoint to convert.
    #[arg(long)]
    ann: String,
    /// Spiking horizon T.
    #[arg(long, default_value_t = 2)]
    horizon: usize,
    /// Threshold levels L.
    #[arg(long, default_value_t = 2)]
    levels: u32,
    /// Output checkpoint path.
    #[arg(long)]
    out: String,
    /// Optional config naming a dataset for zero-shot accuracy.
    #[arg(long)]
    config: Option<String>,
}

#[derive(Args)]
struct ReparamArgs {
    /// Input multi-threshold checkpoint.
    #[arg(long = "in")]
    input: String,
    /// Output single-threshold checkpoint.
    #[arg(long)]
    out: String,
    /// Random inputs for the equivalence check.
    #[arg(long, default_value_t = 100)]
    verify_trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    /// Checkpoint to benchmark.
    #[arg(long)]
    ckpt: String,
    /// Optional config naming the dataset; random inputs otherwise.
    #[arg(long)]
    config: Option<String>,
    /// Batch size when sampling random inputs.
    #[arg(long, default_value_t = 256)]
    batch: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() {
    if let Ok(v) = std::env::var("LMHT_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                exec::configure_threads(n);
            }
        }
    }
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    };
    std::process::exit(code);
}

/// 2 for problems in what the user handed us, 1 for everything that went
/// wrong while doing the work.
fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::Range(_) => 2,
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Verify(args) => cmd_verify(args),
        Command::Train(args) => cmd_train(args),
        Command::Convert(args) => cmd_convert(args),
        Command::Reparam(args) => cmd_reparam(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<i32> {
    let mut body = String::new();
    let mut ok = true;
    for suite in args.suite.suites() {
        let trials = args.trials.unwrap_or_else(|| suite.default_trials());
        let result = run_suite(suite, trials, args.seed, Parallelism::auto())?;
        println!("{}", result.summary_line());
        body.push_str(&result.render());
        ok &= result.ok();
    }
    std::fs::write(&args.out, body)?;
    println!("report written to {}", args.out);
    Ok(if ok { 0 } else { 1 })
}

fn command_line() -> String {
    std::env::args().skip(1).collect::<Vec<_>>().join(" ")
}

fn cmd_train(args: TrainArgs) -> Result<i32> {
    let cfg = FileConfig::load(&args.config)?;
    let (features, labels) = make_dataset(&cfg.dataset()?)?;
    let meta = CheckpointMeta {
        seed: Some(cfg.seed()?),
        command: Some(command_line()),
    };

    match cfg.mode()? {
        RunMode::Qcfs => {
            let (ann, history) = train_qcfs_ann(
                &features,
                &labels,
                &cfg.arch()?,
                cfg.t_q()?,
                &cfg.qcfs_config()?,
            )?;
            for h in &history {
                println!("epoch={} loss={:.6} acc={:.4}", h.epoch, h.loss, h.accuracy);
            }
            save_checkpoint(&args.out, &Checkpoint::Ann(ann), &meta)?;
        }
        mode @ (RunMode::Direct | RunMode::Vanilla) => {
            let levels = cfg.levels()?;
            let horizon = cfg.horizon()?;
            let mut net = build_network(&cfg.arch()?, horizon, levels, cfg.seed()?)?;
            let train_mode = if mode == RunMode::Vanilla {
                if levels != 1 {
                    return Err(Error::Config(
                        "vanilla mode requires levels = 1".into(),
                    ));
                }
                for layer in &mut net.layers {
                    layer.tgim = TGimParams::init(TGimInit::Identity, horizon)?;
                }
                TrainMode::VanillaReference
            } else {
                TrainMode::Direct
            };
            let (net, history) =
                stbp_train(&net, &features, &labels, &cfg.train_config(train_mode)?)?;
            for h in &history {
                println!("epoch={} loss={:.6} acc={:.4}", h.epoch, h.loss, h.accuracy);
            }
            save_checkpoint(&args.out, &Checkpoint::Snn(net), &meta)?;
        }
        RunMode::HybridFinetune => {
            let init = cfg.init_checkpoint().ok_or_else(|| {
                Error::Config("hybrid-finetune needs init = <snn checkpoint>".into())
            })?;
            let net = load_snn(init)?;
            let (net, history) = stbp_train(
                &net,
                &features,
                &labels,
                &cfg.train_config(TrainMode::HybridFinetune)?,
            )?;
            for h in &history {
                println!("epoch={} loss={:.6} acc={:.4}", h.epoch, h.loss, h.accuracy);
            }
            save_checkpoint(&args.out, &Checkpoint::Snn(net), &meta)?;
        }
    }
    println!("checkpoint written to {}", args.out);
    Ok(0)
}

fn load_snn(path: &str) -> Result<NetworkSpec> {
    match load_checkpoint(path)? {
        (Checkpoint::Snn(net), _) => Ok(net),
        (Checkpoint::Ann(_), _) => Err(Error::Checkpoint(format!(
            "{path} holds a quantized ANN, expected a spiking network"
        ))),
    }
}

fn load_ann(path: &str) -> Result<QcfsAnn> {
    match load_checkpoint(path)? {
        (Checkpoint::Ann(ann), _) => Ok(ann),
        (Checkpoint::Snn(_), _) => Err(Error::Checkpoint(format!(
            "{path} holds a spiking network, expected a quantized ANN"
        ))),
    }
}

fn cmd_convert(args: ConvertArgs) -> Result<i32> {
    let ann = load_ann(&args.ann)?;
    let net = hybrid_convert(&ann, args.horizon, args.levels)?;
    if let Some(path) = &args.config {
        let cfg = FileConfig::load(path)?;
        let (features, labels) = make_dataset(&cfg.dataset()?)?;
        let mut ann_correct = 0usize;
        for (x, &y) in features.iter().zip(&labels) {
            let logits = ann.forward(x)?;
            if lmht_core::pipeline::argmax(&logits) == y {
                ann_correct += 1;
            }
        }
        let ann_acc = ann_correct as f64 / features.len() as f64;
        let snn_acc = evaluate(&net, &features, &labels)?;
        println!("ann_acc={ann_acc:.4} zero_shot_snn_acc={snn_acc:.4}");
    }
    let meta = CheckpointMeta {
        seed: None,
        command: Some(command_line()),
    };
    save_checkpoint(&args.out, &Checkpoint::Snn(net), &meta)?;
    println!("checkpoint written to {}", args.out);
    Ok(0)
}

fn cmd_reparam(args: ReparamArgs) -> Result<i32> {
    let src = load_snn(&args.input)?;
    let dst = reparameterize_network(&src)?;
    let mut rng = Rng::new(args.seed);
    let inputs: Vec<Vec<f64>> = (0..args.verify_trials)
        .map(|_| (0..src.input_width()).map(|_| rng.next_f64()).collect())
        .collect();
    let report = verify_equivalence(&src, &dst, &inputs)?;
    println!(
        "trials={} window_mismatches={} max_logit_dev={:?} sop_rel_dev={:?} pass={}",
        report.trials,
        report.window_count_mismatches,
        report.max_logit_dev,
        report.sop_rel_dev,
        report.pass
    );
    let meta = CheckpointMeta {
        seed: Some(args.seed),
        command: Some(command_line()),
    };
    save_checkpoint(&args.out, &Checkpoint::Snn(dst), &meta)?;
    println!("checkpoint written to {}", args.out);
    Ok(if report.pass { 0 } else { 1 })
}

fn cmd_bench(args: BenchArgs) -> Result<i32> {
    let net = load_snn(&args.ckpt)?;
    let (inputs, labels) = match &args.config {
        Some(path) => {
            let cfg = FileConfig::load(path)?;
            let (features, labels) = make_dataset(&cfg.dataset()?)?;
            (features, Some(labels))
        }
        None => {
            let mut rng = Rng::new(args.seed);
            let inputs = (0..args.batch)
                .map(|_| (0..net.input_width()).map(|_| rng.next_f64()).collect())
                .collect();
            (inputs, None)
        }
    };
    let report = count_sops(&net, &inputs)?;
    println!(
        "batch={} sops={} energy_mj={:?}",
        inputs.len(),
        report.sops,
        report.energy_mj
    );
    if let Some(labels) = labels {
        let acc = evaluate(&net, &inputs, &labels)?;
        println!("acc={acc:.4}");
    }
    Ok(0)
}
