//! Fixed pseudo-label sets and their on-disk form.
//!
//! Per image: `<stem>.pl.<class>.pgm`, `<stem>.mask.<class>.pgm` and
//! `<stem>.u.tns`; plus `manifest.txt` and `diagnostics.txt`.

use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::{read_manifest, stack_channels, Dataset};
use crate::denoise::{select, uncertainty, DenoiseMode};
use crate::error::{Error, Result};
use crate::io;
use crate::map::{LabelMap, Map, SelectionMask, UncertaintyMap};
use crate::net::{bilinear_upsample, mc_passes, ModelParams, Mode};
use crate::rng::{derive_seed, Rng};
use crate::synth::CLASS_NAMES;

use super::{TrainConfig, STREAM_PSEUDO};

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoEntry {
    pub stem: String,
    pub pseudo: LabelMap,
    pub mask: SelectionMask,
    /// Present when prepared in memory or loaded with uncertainty.
    pub uncertainty: Option<UncertaintyMap>,
    pub degenerate: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSet {
    pub mode: DenoiseMode,
    /// Fingerprint of the model the labels were generated from.
    pub model_fingerprint: String,
    pub entries: Vec<PseudoEntry>,
}

impl PseudoSet {
    pub fn stems(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.stem.clone()).collect()
    }

    /// Fraction of selected entries per class.
    pub fn selection_rates(&self) -> Vec<f64> {
        let classes = self.entries[0].mask.channels();
        (0..classes)
            .map(|k| {
                let (sel, total) = self.entries.iter().fold((0usize, 0usize), |(s, t), e| {
                    let m = e.mask.channel(k);
                    (s + m.count_ones(), t + m.as_slice().len())
                });
                sel as f64 / total as f64
            })
            .collect()
    }

    pub fn degenerate_counts(&self) -> Vec<usize> {
        let classes = self.entries[0].mask.channels();
        (0..classes)
            .map(|k| self.entries.iter().filter(|e| e.degenerate[k]).count())
            .collect()
    }

    pub fn diagnostics(&self) -> String {
        let mut out = String::new();
        writeln!(out, "mode = {}", self.mode).unwrap();
        writeln!(out, "model = {}", self.model_fingerprint).unwrap();
        writeln!(out, "images = {}", self.entries.len()).unwrap();
        for (k, (rate, degen)) in self
            .selection_rates()
            .into_iter()
            .zip(self.degenerate_counts())
            .enumerate()
        {
            let name = CLASS_NAMES[k];
            writeln!(out, "selection_rate.{name} = {rate:.6}").unwrap();
            writeln!(out, "degenerate.{name} = {degen}").unwrap();
        }
        out
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        io::create_dir_all(dir)?;
        let mut manifest = String::new();
        for e in &self.entries {
            for (k, name) in CLASS_NAMES.iter().enumerate() {
                io::write_mask_pgm(&dir.join(format!("{}.pl.{name}.pgm", e.stem)), &e.pseudo.channel(k))?;
                io::write_mask_pgm(&dir.join(format!("{}.mask.{name}.pgm", e.stem)), &e.mask.channel(k))?;
            }
            if let Some(u) = &e.uncertainty {
                let (h, w, c) = u.shape();
                io::write_tensor(&dir.join(format!("{}.u.tns", e.stem)), &[h, w, c], u.as_slice())?;
            }
            let degenerate: Vec<&str> = e.degenerate.iter().map(|&d| if d { "1" } else { "0" }).collect();
            writeln!(manifest, "{} {}", e.stem, degenerate.join(" ")).unwrap();
        }
        io::write_bytes(&dir.join("manifest.txt"), manifest.as_bytes())?;
        io::write_bytes(&dir.join("diagnostics.txt"), self.diagnostics().as_bytes())
    }

    pub fn load(dir: &Path, with_uncertainty: bool) -> Result<Self> {
        let diag_path = dir.join("diagnostics.txt");
        if !diag_path.exists() {
            return Err(Error::Missing(diag_path));
        }
        let diag = io::read_text(&diag_path)?;
        let field = |key: &str| {
            diag.lines()
                .filter_map(|l| l.split_once('='))
                .find(|(k, _)| k.trim() == key)
                .map(|(_, v)| v.trim().to_string())
                .ok_or_else(|| Error::format(&diag_path, format!("missing {key}")))
        };
        let mode: DenoiseMode = field("mode")?.parse()?;
        let model_fingerprint = field("model")?;

        let mut entries = Vec::new();
        for line in read_manifest(dir)? {
            let mut parts = line.split_whitespace();
            let stem = parts.next().unwrap().to_string();
            let degenerate: Vec<bool> = parts.map(|p| p == "1").collect();
            let read = |kind: &str| -> Result<LabelMap> {
                let channels = CLASS_NAMES
                    .iter()
                    .map(|name| {
                        let path = dir.join(format!("{stem}.{kind}.{name}.pgm"));
                        if !path.exists() {
                            return Err(Error::Missing(path));
                        }
                        io::read_mask_pgm(&path)
                    })
                    .collect::<Result<Vec<_>>>()?;
                stack_channels(&channels)
            };
            let pseudo = read("pl")?;
            let mask = read("mask")?;
            let uncertainty = if with_uncertainty {
                let path = dir.join(format!("{stem}.u.tns"));
                if !path.exists() {
                    return Err(Error::Missing(path));
                }
                let (dims, data) = io::read_tensor(&path)?;
                if dims.len() != 3 {
                    return Err(Error::format(&path, "uncertainty must be rank 3"));
                }
                Some(Map::from_vec(dims[0], dims[1], dims[2], data)?)
            } else {
                None
            };
            entries.push(PseudoEntry {
                degenerate: if degenerate.len() == CLASS_NAMES.len() {
                    degenerate
                } else {
                    vec![false; CLASS_NAMES.len()]
                },
                stem,
                pseudo,
                mask,
                uncertainty,
            });
        }
        Ok(PseudoSet {
            mode,
            model_fingerprint,
            entries,
        })
    }
}

/// Applies the source model once to every target image: eval pass for
/// probabilities and features, `K` MC-dropout passes for uncertainty, then
/// pseudo labels and the selection mask of `cfg.denoise_mode`.
pub fn prepare_pseudo_labels(source: &ModelParams<f32>, target: &Dataset, cfg: &TrainConfig) -> Result<PseudoSet> {
    cfg.validate()?;
    if target.is_empty() {
        return Err(Error::Config("target dataset is empty".into()));
    }
    let stream = derive_seed(cfg.seed, STREAM_PSEUDO);
    let entries = target
        .stems
        .iter()
        .zip(&target.images)
        .enumerate()
        .map(|(i, (stem, image))| {
            let (h, w, _) = image.shape();
            let out = source.forward(image, Mode::Eval)?;
            let features = bilinear_upsample(&out.features, h, w)?;
            let maps = mc_passes(source, image, cfg.mc_passes, &mut Rng::derived(stream, i as u64))?;
            let u = uncertainty(&maps)?;
            let sel = select(cfg.denoise_mode, &out.prob, &features, Some(&u), cfg.gamma, cfg.eta)?;
            Ok(PseudoEntry {
                stem: stem.clone(),
                pseudo: sel.pseudo,
                mask: sel.mask,
                uncertainty: Some(u),
                degenerate: sel.degenerate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PseudoSet {
        mode: cfg.denoise_mode,
        model_fingerprint: source.fingerprint(),
        entries,
    })
}
