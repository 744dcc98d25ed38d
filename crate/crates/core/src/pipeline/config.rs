use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::adapt::TrainConfig;
use crate::error::{Error, Result};
use crate::io;

pub const RUN_CONFIG_FILE: &str = "run_config.txt";

/// Every key accepted in a config file or as a flag override, in echo order.
pub const KEYS: &[&str] = &[
    "seed",
    "lr",
    "beta1",
    "beta2",
    "batch_size",
    "epochs",
    "source_epochs",
    "gamma",
    "eta",
    "mc_passes",
    "dropout",
    "size",
    "mode",
    "aug_prob",
    "aug_noise",
    "aug_contrast_min",
    "aug_contrast_max",
    "aug_erase_min",
    "aug_erase_max",
    "n_source",
    "n_target_train",
    "n_target_test",
    "data",
    "model",
    "pseudo",
    "out",
];

/// Fully resolved settings of one command invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub n_source: usize,
    pub n_target_train: usize,
    pub n_target_test: usize,
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub pseudo: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Allow writing into a non-empty output directory.
    pub force: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainConfig::default(),
            n_source: 200,
            n_target_train: 60,
            n_target_test: 40,
            data: None,
            model: None,
            pseudo: None,
            out: None,
            force: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn path_text(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

/// Parses flat `key = value` text. Blank lines and `#` comments are skipped;
/// duplicate keys are rejected.
pub fn parse_config_text(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format(origin, format!("line {}: expected key = value", n + 1)))?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if out.iter().any(|(seen, _)| *seen == k) {
            return Err(Error::format(origin, format!("line {}: duplicate key {k}", n + 1)));
        }
        out.push((k, v));
    }
    Ok(out)
}

impl RunConfig {
    /// Layers defaults, then the config file, then flag overrides, then the
    /// seed from the environment.
    pub fn resolve(file: Option<&Path>, flags: &[(String, String)], env_seed: Option<&str>) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            if !path.exists() {
                return Err(Error::Missing(path.to_path_buf()));
            }
            for (k, v) in parse_config_text(&io::read_text(path)?, path)? {
                cfg.set(&k, &v)?;
            }
        }
        for (k, v) in flags {
            cfg.set(k, v)?;
        }
        if let Some(seed) = env_seed.map(str::trim).filter(|s| !s.is_empty()) {
            cfg.set("seed", seed)?;
        }
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        let a = &mut t.augment;
        match key {
            "seed" => t.seed = parse(key, value)?,
            "lr" => t.lr = parse(key, value)?,
            "beta1" => t.betas.0 = parse(key, value)?,
            "beta2" => t.betas.1 = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "epochs" => t.epochs = parse(key, value)?,
            "source_epochs" => t.source_epochs = parse(key, value)?,
            "gamma" => t.gamma = parse(key, value)?,
            "eta" => t.eta = parse(key, value)?,
            "mc_passes" => t.mc_passes = parse(key, value)?,
            "dropout" => t.dropout = parse(key, value)?,
            "size" => {
                let s: usize = parse(key, value)?;
                t.image_size = (s, s);
            }
            "mode" => t.denoise_mode = value.parse()?,
            "aug_prob" => a.prob = parse(key, value)?,
            "aug_noise" => a.noise_sigma = parse(key, value)?,
            "aug_contrast_min" => a.contrast.0 = parse(key, value)?,
            "aug_contrast_max" => a.contrast.1 = parse(key, value)?,
            "aug_erase_min" => a.erase_area.0 = parse(key, value)?,
            "aug_erase_max" => a.erase_area.1 = parse(key, value)?,
            "n_source" => self.n_source = parse(key, value)?,
            "n_target_train" => self.n_target_train = parse(key, value)?,
            "n_target_test" => self.n_target_test = parse(key, value)?,
            "data" => self.data = opt_path(value),
            "model" => self.model = opt_path(value),
            "pseudo" => self.pseudo = opt_path(value),
            "out" => self.out = opt_path(value),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let t = &self.train;
        let a = &t.augment;
        Some(match key {
            "seed" => t.seed.to_string(),
            "lr" => t.lr.to_string(),
            "beta1" => t.betas.0.to_string(),
            "beta2" => t.betas.1.to_string(),
            "batch_size" => t.batch_size.to_string(),
            "epochs" => t.epochs.to_string(),
            "source_epochs" => t.source_epochs.to_string(),
            "gamma" => t.gamma.to_string(),
            "eta" => t.eta.to_string(),
            "mc_passes" => t.mc_passes.to_string(),
            "dropout" => t.dropout.to_string(),
            "size" => t.image_size.0.to_string(),
            "mode" => t.denoise_mode.to_string(),
            "aug_prob" => a.prob.to_string(),
            "aug_noise" => a.noise_sigma.to_string(),
            "aug_contrast_min" => a.contrast.0.to_string(),
            "aug_contrast_max" => a.contrast.1.to_string(),
            "aug_erase_min" => a.erase_area.0.to_string(),
            "aug_erase_max" => a.erase_area.1.to_string(),
            "n_source" => self.n_source.to_string(),
            "n_target_train" => self.n_target_train.to_string(),
            "n_target_test" => self.n_target_test.to_string(),
            "data" => path_text(&self.data),
            "model" => path_text(&self.model),
            "pseudo" => path_text(&self.pseudo),
            "out" => path_text(&self.out),
            _ => return None,
        })
    }

    /// `key = value` echo of every setting; readable back as a config file.
    pub fn to_text(&self, command: &str) -> String {
        let mut out = format!("# dpl {command}\n");
        for key in KEYS {
            writeln!(out, "{key} = {}", self.get(key).unwrap()).unwrap();
        }
        out
    }

    pub fn write(&self, dir: &Path, command: &str) -> Result<()> {
        io::write_bytes(&dir.join(RUN_CONFIG_FILE), self.to_text(command).as_bytes())
    }

    pub(crate) fn require(&self, which: &Option<PathBuf>, flag: &str) -> Result<PathBuf> {
        which
            .clone()
            .ok_or_else(|| Error::Config(format!("--{flag} is required")))
    }

    pub(crate) fn out_dir(&self) -> Result<PathBuf> {
        self.require(&self.out, "out")
    }
}
