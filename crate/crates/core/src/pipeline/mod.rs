//! The staged experiment pipeline behind the `dpl` command.
//!
//! Every stage reads the previous stage's artifacts from disk and writes its
//! own under `out`, together with `run_config.txt`.

mod config;
mod render;

pub use config::{parse_config_text, RunConfig, KEYS, RUN_CONFIG_FILE};
pub use render::{contours, heatmap, overlay, render, Palette, RenderSummary, HEATMAP_SCALE};

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::adapt::{self, PseudoSet, TrainConfig, TrainLog};
use crate::dataset::Dataset;
use crate::denoise::DenoiseMode;
use crate::error::{Error, Result};
use crate::io;
use crate::metrics::{self, EvalReport, PlAccuracy};
use crate::net::{load_checkpoint, save_checkpoint, ModelParams};
use crate::rng::derive_seed;
use crate::synth::{self, CLASS_NAMES};

pub const MODEL_DIR: &str = "model";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const ADAPT_REPORT_FILE: &str = "adapt_report.txt";
pub const ABLATION_TEXT_FILE: &str = "ablation.txt";
pub const ABLATION_CSV_FILE: &str = "ablation.csv";

/// Dataset splits written by [`gen_data`], plus a held-out source split used
/// only for calibration checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Source,
    SourceHeldOut,
    TargetTrain,
    TargetTest,
}

impl Split {
    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Source => "source",
            Split::SourceHeldOut => "source_test",
            Split::TargetTrain => "target_train",
            Split::TargetTest => "target_test",
        }
    }

    /// Generator seed of this split.
    pub fn seed(self, seed: u64) -> u64 {
        let tag = match self {
            Split::Source => 10,
            Split::SourceHeldOut => 11,
            Split::TargetTrain => 12,
            Split::TargetTest => 13,
        };
        derive_seed(seed, tag)
    }

    pub fn domain(self) -> synth::DomainParams {
        match self {
            Split::Source | Split::SourceHeldOut => synth::default_source_params(),
            Split::TargetTrain | Split::TargetTest => synth::default_target_params(),
        }
    }

    /// Writes `n` samples of this split under `root`.
    pub fn generate(self, seed: u64, n: usize, size: usize, root: &Path) -> Result<PathBuf> {
        let dir = root.join(self.dir_name());
        synth::gen_dataset(self.seed(seed), &self.domain(), n, size, size, &dir)?;
        Ok(dir)
    }
}

/// Creates `dir`, refusing a non-empty one unless `force` is set.
pub fn prepare_out(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() && !force {
        let mut entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        if entries.next().is_some() {
            return Err(Error::Config(format!(
                "output directory {} is not empty (use --force to overwrite)",
                dir.display()
            )));
        }
    }
    io::create_dir_all(dir)
}

fn begin(cfg: &RunConfig, command: &str) -> Result<PathBuf> {
    let out = cfg.out_dir()?;
    prepare_out(&out, cfg.force)?;
    cfg.write(&out, command)?;
    Ok(out)
}

/// Accepts a checkpoint directory or a stage output containing `model/`.
pub fn resolve_model_dir(path: &Path) -> Result<PathBuf> {
    if path.join("index.txt").exists() {
        return Ok(path.to_path_buf());
    }
    let nested = path.join(MODEL_DIR);
    if nested.join("index.txt").exists() {
        return Ok(nested);
    }
    Err(Error::Missing(path.join("index.txt")))
}

pub fn load_model(path: &Path) -> Result<ModelParams<f32>> {
    Ok(load_checkpoint(&resolve_model_dir(path)?)?.params)
}

fn existing_dir(path: PathBuf) -> Result<PathBuf> {
    if path.is_dir() {
        Ok(path)
    } else {
        Err(Error::Missing(path))
    }
}

/// Image counts per generated split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenSummary {
    pub splits: Vec<(String, usize)>,
}

/// `gen-data`: source, target_train and target_test datasets.
pub fn gen_data(cfg: &RunConfig) -> Result<GenSummary> {
    let out = begin(cfg, "gen-data")?;
    let size = cfg.train.image_size.0;
    let mut splits = Vec::new();
    for (split, n) in [
        (Split::Source, cfg.n_source),
        (Split::TargetTrain, cfg.n_target_train),
        (Split::TargetTest, cfg.n_target_test),
    ] {
        let dir = out.join(split.dir_name());
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        split.generate(cfg.train.seed, n, size, &out)?;
        splits.push((split.dir_name().to_string(), n));
    }
    Ok(GenSummary { splits })
}

/// `train-source`: supervised training on a labeled dataset.
pub fn train_source(cfg: &RunConfig) -> Result<(ModelParams<f32>, TrainLog)> {
    let data = existing_dir(cfg.require(&cfg.data, "data")?)?;
    let dataset = Dataset::load(&data)?;
    let out = begin(cfg, "train-source")?;
    let (params, log) = adapt::train_source(&dataset, &cfg.train, Some(&out.join(MODEL_DIR)))?;
    if cfg.train.source_epochs == 0 {
        save_checkpoint(&out.join(MODEL_DIR), &params, None)?;
    }
    log.write_csv(&out.join(TRAIN_LOG_FILE))?;
    Ok((params, log))
}

/// `pseudo-label`: fixed pseudo labels, selection masks and uncertainty.
pub fn pseudo_label(cfg: &RunConfig) -> Result<PseudoSet> {
    let model = load_model(&cfg.require(&cfg.model, "model")?)?;
    let data = existing_dir(cfg.require(&cfg.data, "data")?)?;
    let target = Dataset::load_unlabeled(&data)?;
    let out = begin(cfg, "pseudo-label")?;
    let set = adapt::prepare_pseudo_labels(&model, &target, &cfg.train)?;
    set.save(&out)?;
    Ok(set)
}

#[derive(Debug, Clone)]
pub struct AdaptOutcome {
    pub params: ModelParams<f32>,
    pub log: TrainLog,
    pub mode: DenoiseMode,
    pub source_fingerprint: String,
    pub pseudo_fingerprint: String,
}

impl AdaptOutcome {
    /// Pseudo labels were produced by a different model than the one adapted.
    pub fn provenance_mismatch(&self) -> bool {
        self.source_fingerprint != self.pseudo_fingerprint
    }

    pub fn warning(&self) -> Option<String> {
        self.provenance_mismatch().then(|| {
            format!(
                "pseudo labels were generated by model {} but the model being adapted is {}",
                self.pseudo_fingerprint, self.source_fingerprint
            )
        })
    }

    pub fn report(&self, cfg: &TrainConfig) -> String {
        let mut out = String::new();
        writeln!(out, "mode = {}", self.mode).unwrap();
        writeln!(out, "source_model = {}", self.source_fingerprint).unwrap();
        writeln!(out, "pseudo_model = {}", self.pseudo_fingerprint).unwrap();
        let status = if self.provenance_mismatch() { "mismatch" } else { "ok" };
        writeln!(out, "provenance = {status}").unwrap();
        if let Some(w) = self.warning() {
            writeln!(out, "warning = {w}").unwrap();
        }
        writeln!(out, "adapted_model = {}", self.params.fingerprint()).unwrap();
        writeln!(out, "epochs = {}", cfg.epochs).unwrap();
        writeln!(out, "batches = {}", self.log.rows.len()).unwrap();
        writeln!(out, "empty_masks = {}", self.log.empty_masks).unwrap();
        for e in 0..cfg.epochs {
            if let Some(l) = self.log.epoch_loss(e) {
                writeln!(out, "loss.epoch{e} = {l:.9}").unwrap();
            }
        }
        out
    }
}

/// `adapt`: self-training on fixed pseudo labels. Reads only the model, the
/// target images and the pseudo-label directory.
pub fn adapt(cfg: &RunConfig) -> Result<AdaptOutcome> {
    let source = load_model(&cfg.require(&cfg.model, "model")?)?;
    let data = existing_dir(cfg.require(&cfg.data, "data")?)?;
    let target = Dataset::load_unlabeled(&data)?;
    let pseudo = PseudoSet::load(&cfg.require(&cfg.pseudo, "pseudo")?, false)?;
    let out = begin(cfg, "adapt")?;
    let train = TrainConfig {
        denoise_mode: pseudo.mode,
        ..cfg.train.clone()
    };
    let adapted = adapt::adapt(&source, &target, &pseudo, &train)?;
    save_checkpoint(&out.join(MODEL_DIR), &adapted.params, None)?;
    adapted.log.write_csv(&out.join(TRAIN_LOG_FILE))?;
    let outcome = AdaptOutcome {
        params: adapted.params,
        log: adapted.log,
        mode: pseudo.mode,
        source_fingerprint: source.fingerprint(),
        pseudo_fingerprint: pseudo.model_fingerprint,
    };
    io::write_bytes(&out.join(ADAPT_REPORT_FILE), outcome.report(&train).as_bytes())?;
    Ok(outcome)
}

/// `eval`: Dice and ASD per class on a labeled dataset.
pub fn eval(cfg: &RunConfig) -> Result<EvalReport> {
    let model = load_model(&cfg.require(&cfg.model, "model")?)?;
    let data = existing_dir(cfg.require(&cfg.data, "data")?)?;
    let dataset = Dataset::load(&data)?;
    let out = begin(cfg, "eval")?;
    let report = metrics::evaluate(&model, &dataset)?;
    report.write(&out)?;
    Ok(report)
}

/// Pooled pseudo-label accuracy per class against ground truth.
pub fn pseudo_accuracy(set: &PseudoSet, labels: &[crate::LabelMap]) -> Result<Vec<Option<f64>>> {
    if set.entries.len() != labels.len() {
        return Err(Error::Shape("pseudo set and labels differ in length".into()));
    }
    let mut acc = vec![PlAccuracy::default(); CLASS_NAMES.len()];
    for (e, gt) in set.entries.iter().zip(labels) {
        for (k, a) in acc.iter_mut().enumerate() {
            a.add(&e.pseudo.channel(k), &e.mask.channel(k), &gt.channel(k))?;
        }
    }
    Ok(acc.iter().map(PlAccuracy::value).collect())
}

#[derive(Debug, Clone)]
pub struct AblationRow {
    pub mode: DenoiseMode,
    pub pl_accuracy: Vec<Option<f64>>,
    pub selection_rate: Vec<f64>,
    pub source_fingerprint: String,
    pub report: EvalReport,
}

#[derive(Debug, Clone)]
pub struct AblationTable {
    pub source_fingerprint: String,
    /// The source model on target_test, before adaptation.
    pub baseline: EvalReport,
    pub rows: Vec<AblationRow>,
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
}

fn csv_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.9}"))
}

impl AblationTable {
    pub fn row(&self, mode: DenoiseMode) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.mode == mode)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "source model {}", self.source_fingerprint).unwrap();
        let mut header = format!("{:<8}", "mode");
        for name in CLASS_NAMES {
            write!(header, " {:>10} {:>10} {:>10}", format!("dice.{name}"), format!("asd.{name}"), format!("pl.{name}")).unwrap();
        }
        writeln!(out, "{header}").unwrap();
        let line = |label: &str, report: &EvalReport, pl: &[Option<f64>]| {
            let mut s = format!("{label:<8}");
            for (k, c) in report.classes.iter().enumerate() {
                let asd = c.asd().map(|a| a.mean);
                write!(s, " {:>10.4} {:>10} {:>10}", c.dice().mean, opt(asd, 3), opt(pl.get(k).copied().flatten(), 4)).unwrap();
            }
            s
        };
        writeln!(out, "{}", line("none", &self.baseline, &[])).unwrap();
        for r in &self.rows {
            writeln!(out, "{}", line(r.mode.as_str(), &r.report, &r.pl_accuracy)).unwrap();
        }
        out
    }

    /// One line per mode and class.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mode,class,dice_mean,dice_std,asd_mean,asd_std,asd_undefined,pl_accuracy,selection_rate\n");
        for r in &self.rows {
            for (k, c) in r.report.classes.iter().enumerate() {
                let d = c.dice();
                let a = c.asd();
                writeln!(
                    out,
                    "{},{},{:.9},{:.9},{},{},{},{},{:.9}",
                    r.mode,
                    c.name,
                    d.mean,
                    d.std,
                    csv_opt(a.map(|a| a.mean)),
                    csv_opt(a.map(|a| a.std)),
                    c.asd_undefined(),
                    csv_opt(r.pl_accuracy[k]),
                    r.selection_rate[k],
                )
                .unwrap();
            }
        }
        out
    }
}

/// `ablate`: the four denoising modes from one shared source model.
///
/// `data` is a `gen-data` output root. With no `model`, the source model is
/// trained first into `out/source/`. Each mode writes its stages under
/// `out/<mode>/{pseudo,adapt,eval}`.
pub fn ablate(cfg: &RunConfig) -> Result<AblationTable> {
    let root = existing_dir(cfg.require(&cfg.data, "data")?)?;
    let out = begin(cfg, "ablate")?;
    let model_dir = match &cfg.model {
        Some(m) => resolve_model_dir(m)?,
        None => {
            let src = Dataset::load(&existing_dir(root.join(Split::Source.dir_name()))?)?;
            let dir = out.join("source");
            let (params, log) = adapt::train_source(&src, &cfg.train, Some(&dir.join(MODEL_DIR)))?;
            if cfg.train.source_epochs == 0 {
                save_checkpoint(&dir.join(MODEL_DIR), &params, None)?;
            }
            log.write_csv(&dir.join(TRAIN_LOG_FILE))?;
            dir.join(MODEL_DIR)
        }
    };
    let source = load_model(&model_dir)?;
    let target_train = Dataset::load(&existing_dir(root.join(Split::TargetTrain.dir_name()))?)?;
    let target_test = Dataset::load(&existing_dir(root.join(Split::TargetTest.dir_name()))?)?;

    let baseline = metrics::evaluate(&source, &target_test)?;
    baseline.write(&out.join("baseline"))?;

    let mut rows = Vec::new();
    for mode in DenoiseMode::ALL {
        let arm = out.join(mode.as_str());
        let stage = |name: &str, f: &dyn Fn(&mut RunConfig)| {
            let mut c = cfg.clone();
            c.force = true;
            c.train.denoise_mode = mode;
            c.out = Some(arm.join(name));
            f(&mut c);
            c
        };
        let pseudo_cfg = stage("pseudo", &|c| {
            c.model = Some(model_dir.clone());
            c.data = Some(target_train.dir.clone());
        });
        let set = pseudo_label(&pseudo_cfg)?;
        let adapt_cfg = stage("adapt", &|c| {
            c.model = Some(model_dir.clone());
            c.data = Some(target_train.dir.clone());
            c.pseudo = pseudo_cfg.out.clone();
        });
        let outcome = adapt(&adapt_cfg)?;
        let eval_cfg = stage("eval", &|c| {
            c.model = adapt_cfg.out.clone();
            c.data = Some(target_test.dir.clone());
        });
        let report = eval(&eval_cfg)?;
        rows.push(AblationRow {
            mode,
            pl_accuracy: pseudo_accuracy(&set, target_train.labels()?)?,
            selection_rate: set.selection_rates(),
            source_fingerprint: outcome.source_fingerprint,
            report,
        });
    }
    let table = AblationTable {
        source_fingerprint: source.fingerprint(),
        baseline,
        rows,
    };
    io::write_bytes(&out.join(ABLATION_TEXT_FILE), table.to_text().as_bytes())?;
    io::write_bytes(&out.join(ABLATION_CSV_FILE), table.to_csv().as_bytes())?;
    Ok(table)
}
