//! Source training, one-shot pseudo-label preparation and the self-training
//! adaptation loop.
//!
//! Pseudo labels, uncertainty and selection masks are computed once from the
//! source model on clean target images and stay fixed while the target model
//! (initialized as a copy of the source model) trains on weakly augmented
//! inputs.

mod augment;
mod config;
mod pseudo;

pub use augment::{weak_augment, weak_augment_traced, AugmentTrace, Rect};
pub use config::{AugmentConfig, TrainConfig};
pub use pseudo::{prepare_pseudo_labels, PseudoEntry, PseudoSet};

use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::Dataset;
use crate::denoise::masked_loss;
use crate::error::{Error, Result};
use crate::io;
use crate::map::Map;
use crate::net::{adam_step, init_params, save_checkpoint, AdamState, ModelParams, Mode, Weights};
use crate::rng::{derive_seed, Rng};

// Independent RNG streams per stage.
const STREAM_INIT: u64 = 1;
const STREAM_SOURCE: u64 = 2;
pub(crate) const STREAM_PSEUDO: u64 = 3;
const STREAM_ADAPT: u64 = 4;

/// Per-batch loss record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub epoch: usize,
    pub batch: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
    /// Images whose selection mask was empty, counted per visit.
    pub empty_masks: usize,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,batch,loss\n");
        for r in &self.rows {
            writeln!(out, "{},{},{:.9}", r.epoch, r.batch, r.loss).unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        io::write_bytes(path, self.to_csv().as_bytes())
    }

    /// Mean batch loss of one epoch.
    pub fn epoch_loss(&self, epoch: usize) -> Option<f64> {
        let v: Vec<f64> = self.rows.iter().filter(|r| r.epoch == epoch).map(|r| r.loss).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

fn batches(order: &[usize], size: usize) -> impl Iterator<Item = &[usize]> {
    order.chunks(size)
}

/// One optimizer step over a batch. `sample` returns the per-image loss
/// output and cache.
fn batch_step(
    params: &mut ModelParams<f32>,
    state: &mut AdamState,
    cfg: &TrainConfig,
    batch: &[usize],
    mut sample: impl FnMut(&ModelParams<f32>, usize) -> Result<(f64, Weights<f32>, bool)>,
    log: &mut TrainLog,
) -> Result<f64> {
    let mut grads = Weights::zeros();
    let mut loss = 0.0;
    for &i in batch {
        let (l, g, empty) = sample(params, i)?;
        loss += l;
        log.empty_masks += usize::from(empty);
        grads.add_assign(&g);
    }
    let n = batch.len() as f32;
    grads.scale(1.0 / n);
    let loss = loss / f64::from(n);
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("batch loss {loss}")));
    }
    adam_step(params, &grads, state, &cfg.adam())?;
    if !params.weights.is_finite() {
        return Err(Error::NonFinite("parameters after Adam step".into()));
    }
    Ok(loss)
}

/// Supervised training on labeled source data with full BCE.
///
/// When `checkpoint_dir` is given, a checkpoint with optimizer state is
/// written after every epoch; on a non-finite loss the last one written is
/// the last good state.
pub fn train_source(dataset: &Dataset, cfg: &TrainConfig, checkpoint_dir: Option<&Path>) -> Result<(ModelParams<f32>, TrainLog)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Config("source dataset is empty".into()));
    }
    let labels = dataset.labels()?;
    let mut params = init_params(&mut Rng::derived(cfg.seed, STREAM_INIT), cfg.dropout);
    let mut state = AdamState::default();
    let mut log = TrainLog::default();
    let all = Map::filled(labels[0].height(), labels[0].width(), labels[0].channels(), 1u8);
    let stream = derive_seed(cfg.seed, STREAM_SOURCE);

    for epoch in 0..cfg.source_epochs {
        let mut rng = Rng::derived(stream, epoch as u64);
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        rng.shuffle(&mut order);
        for (b, batch) in batches(&order, cfg.batch_size).enumerate() {
            let loss = batch_step(
                &mut params,
                &mut state,
                cfg,
                batch,
                |p, i| {
                    let out = p.forward(&dataset.images[i], Mode::Train(&mut rng))?;
                    let l = masked_loss(&out.prob, &labels[i], &all)?;
                    Ok((l.loss, p.backward(&out.cache, &l.grad)?, false))
                },
                &mut log,
            )
            .map_err(|e| match e {
                Error::NonFinite(msg) => Error::NonFinite(format!("{msg} (source epoch {epoch}, batch {b})")),
                other => other,
            })?;
            log.rows.push(LogRow { epoch, batch: b, loss });
        }
        if let Some(dir) = checkpoint_dir {
            save_checkpoint(dir, &params, Some(&state))?;
        }
    }
    Ok((params, log))
}

/// Result of [`adapt`].
#[derive(Debug, Clone)]
pub struct Adapted {
    pub params: ModelParams<f32>,
    pub log: TrainLog,
}

/// Self-training of a copy of `source` on fixed denoised pseudo labels.
///
/// Takes only the (unlabeled) target images; no source data is involved.
pub fn adapt(source: &ModelParams<f32>, target: &Dataset, pseudo: &PseudoSet, cfg: &TrainConfig) -> Result<Adapted> {
    cfg.validate()?;
    if pseudo.entries.is_empty() {
        return Err(Error::Config("pseudo-label set is empty".into()));
    }
    if pseudo.stems() != target.stems {
        return Err(Error::Shape(format!(
            "pseudo labels cover {} images, target manifest lists {} (or stems differ)",
            pseudo.entries.len(),
            target.len()
        )));
    }
    for (img, e) in target.images.iter().zip(&pseudo.entries) {
        if (img.height(), img.width()) != (e.pseudo.height(), e.pseudo.width()) {
            return Err(Error::Shape(format!("pseudo labels of {} do not match its image", e.stem)));
        }
    }
    if pseudo.entries.iter().all(|e| e.mask.count_ones() == 0) {
        return Err(Error::Degenerate(
            "every selection mask is empty; nothing to adapt on".into(),
        ));
    }

    let mut params = source.clone();
    let mut state = AdamState::default();
    let mut log = TrainLog::default();
    let stream = derive_seed(cfg.seed, STREAM_ADAPT);
    for epoch in 0..cfg.epochs {
        let mut rng = Rng::derived(stream, epoch as u64);
        let mut order: Vec<usize> = (0..target.len()).collect();
        rng.shuffle(&mut order);
        for (b, batch) in batches(&order, cfg.batch_size).enumerate() {
            let loss = batch_step(
                &mut params,
                &mut state,
                cfg,
                batch,
                |p, i| {
                    let entry = &pseudo.entries[i];
                    let input = weak_augment(&mut rng, &target.images[i], &cfg.augment);
                    let out = p.forward(&input, Mode::Train(&mut rng))?;
                    let l = masked_loss(&out.prob, &entry.pseudo, &entry.mask)?;
                    Ok((l.loss, p.backward(&out.cache, &l.grad)?, l.is_empty()))
                },
                &mut log,
            )?;
            log.rows.push(LogRow { epoch, batch: b, loss });
        }
    }
    Ok(Adapted { params, log })
}
