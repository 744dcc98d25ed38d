use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dpl::denoise::DenoiseMode;
use dpl::pipeline::{self, RunConfig};
use dpl::synth::CLASS_NAMES;

/// Source-free domain adaptation by denoised pseudo-labeling.
#[derive(Parser)]
#[command(name = "dpl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overridden by the DPL_SEED environment variable.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write into a non-empty output directory.
    #[arg(long)]
    force: bool,
    /// Any config key, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct Hyper {
    #[arg(long)]
    lr: Option<f32>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    gamma: Option<f32>,
    #[arg(long)]
    eta: Option<f32>,
    #[arg(long)]
    mc_passes: Option<usize>,
    #[arg(long)]
    dropout: Option<f32>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate source, target_train and target_test datasets.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_source: Option<usize>,
        #[arg(long)]
        n_target_train: Option<usize>,
        #[arg(long)]
        n_target_test: Option<usize>,
        #[arg(long)]
        size: Option<usize>,
    },
    /// Supervised training on a labeled dataset directory.
    TrainSource {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        hyper: Hyper,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Fixed pseudo labels, selection masks and uncertainty maps.
    PseudoLabel {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        hyper: Hyper,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        mode: Option<DenoiseMode>,
    },
    /// Self-training on fixed pseudo labels.
    Adapt {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        hyper: Hyper,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        pseudo: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Dice and ASD of a model on a labeled dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// All four denoising modes from one source model.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        hyper: Hyper,
        /// Root written by gen-data.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Existing source checkpoint; trained in-run when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        source_epochs: Option<usize>,
    },
    /// Contour overlays and uncertainty heatmaps.
    Render {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

#[derive(Default)]
struct Overrides(Vec<(String, String)>);

impl Overrides {
    fn put<T: ToString>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.0.push((key.to_string(), v.to_string()));
        }
    }

    fn path(&mut self, key: &str, value: Option<PathBuf>) {
        self.put(key, value.map(|p| p.display().to_string()));
    }

    fn hyper(&mut self, h: Hyper) {
        self.put("lr", h.lr);
        self.put("batch_size", h.batch_size);
        self.put("gamma", h.gamma);
        self.put("eta", h.eta);
        self.put("mc_passes", h.mc_passes);
        self.put("dropout", h.dropout);
    }
}

fn resolve(common: Common, mut o: Overrides) -> dpl::Result<RunConfig> {
    let mut flags = Vec::new();
    for s in &common.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| dpl::Error::Config(format!("--set expects KEY=VALUE, got {s:?}")))?;
        flags.push((k.trim().to_string(), v.trim().to_string()));
    }
    o.put("seed", common.seed);
    o.path("out", common.out);
    flags.extend(o.0);
    let env_seed = std::env::var("DPL_SEED").ok();
    let mut cfg = RunConfig::resolve(common.config.as_deref(), &flags, env_seed.as_deref())?;
    cfg.force = common.force;
    Ok(cfg)
}

fn run(command: Command) -> dpl::Result<()> {
    let mut o = Overrides::default();
    match command {
        Command::GenData { common, n_source, n_target_train, n_target_test, size } => {
            o.put("n_source", n_source);
            o.put("n_target_train", n_target_train);
            o.put("n_target_test", n_target_test);
            o.put("size", size);
            let summary = pipeline::gen_data(&resolve(common, o)?)?;
            for (name, n) in summary.splits {
                println!("{name}: {n} images");
            }
        }
        Command::TrainSource { common, hyper, data, epochs } => {
            o.hyper(hyper);
            o.path("data", data);
            o.put("source_epochs", epochs);
            let (params, log) = pipeline::train_source(&resolve(common, o)?)?;
            if let Some(last) = log.rows.last() {
                println!("final batch loss {:.6}", last.loss);
            }
            println!("model {}", params.fingerprint());
        }
        Command::PseudoLabel { common, hyper, model, data, mode } => {
            o.hyper(hyper);
            o.path("model", model);
            o.path("data", data);
            o.put("mode", mode);
            print!("{}", pipeline::pseudo_label(&resolve(common, o)?)?.diagnostics());
        }
        Command::Adapt { common, hyper, model, data, pseudo, epochs } => {
            o.hyper(hyper);
            o.path("model", model);
            o.path("data", data);
            o.path("pseudo", pseudo);
            o.put("epochs", epochs);
            let cfg = resolve(common, o)?;
            let outcome = pipeline::adapt(&cfg)?;
            if let Some(w) = outcome.warning() {
                eprintln!("warning: {w}");
            }
            print!("{}", outcome.report(&cfg.train));
        }
        Command::Eval { common, model, data } => {
            o.path("model", model);
            o.path("data", data);
            let report = pipeline::eval(&resolve(common, o)?)?;
            for (c, name) in report.classes.iter().zip(CLASS_NAMES) {
                println!("dice {name} {:.4}", c.dice().mean);
            }
            print!("{}", report.to_text());
        }
        Command::Ablate { common, hyper, data, model, epochs, source_epochs } => {
            o.hyper(hyper);
            o.path("data", data);
            o.path("model", model);
            o.put("epochs", epochs);
            o.put("source_epochs", source_epochs);
            print!("{}", pipeline::ablate(&resolve(common, o)?)?.to_text());
        }
        Command::Render { common, model, data } => {
            o.path("model", model);
            o.path("data", data);
            let s = pipeline::render(&resolve(common, o)?)?;
            println!("rendered {} images", s.images);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
