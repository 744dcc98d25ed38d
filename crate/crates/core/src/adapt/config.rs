use crate::denoise::DenoiseMode;
use crate::error::{Error, Result};
use crate::net::AdamConfig;

/// Weak input perturbations applied during adaptation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    /// Independent probability of each of the three perturbations.
    pub prob: f32,
    pub noise_sigma: f32,
    pub contrast: (f32, f32),
    /// Erased rectangle area as a fraction of the image.
    pub erase_area: (f32, f32),
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            prob: 0.5,
            noise_sigma: 0.05,
            contrast: (0.8, 1.2),
            erase_area: (0.02, 0.10),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f32,
    pub betas: (f64, f64),
    pub batch_size: usize,
    /// Adaptation epochs.
    pub epochs: usize,
    pub source_epochs: usize,
    pub gamma: f32,
    pub eta: f32,
    /// Stochastic passes for uncertainty estimation.
    pub mc_passes: usize,
    pub dropout: f32,
    pub seed: u64,
    pub image_size: (usize, usize),
    pub denoise_mode: DenoiseMode,
    pub augment: AugmentConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 2e-3,
            betas: (0.9, 0.99),
            batch_size: 8,
            epochs: 2,
            source_epochs: 40,
            gamma: 0.75,
            eta: 0.05,
            mc_passes: 10,
            dropout: 0.5,
            seed: 42,
            image_size: (64, 64),
            denoise_mode: DenoiseMode::Full,
            augment: AugmentConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(Error::Config(what.to_string())) };
        check(self.lr > 0.0, "lr must be > 0")?;
        check(self.gamma > 0.0 && self.gamma < 1.0, "gamma must be in (0,1)")?;
        check(self.eta > 0.0, "eta must be > 0")?;
        check(self.mc_passes >= 2, "mc_passes must be >= 2")?;
        check(self.batch_size >= 1, "batch_size must be >= 1")?;
        check((0.0..1.0).contains(&self.dropout), "dropout must be in [0,1)")?;
        check(
            (0.0..1.0).contains(&self.betas.0) && (0.0..1.0).contains(&self.betas.1),
            "betas must be in [0,1)",
        )?;
        let (h, w) = self.image_size;
        check(h >= 32 && w >= 32 && h % 2 == 0 && w % 2 == 0, "image_size must be even and >= 32")?;
        let a = &self.augment;
        check((0.0..=1.0).contains(&a.prob), "augment prob must be in [0,1]")?;
        check(a.noise_sigma >= 0.0, "augment noise must be >= 0")?;
        check(a.contrast.0 <= a.contrast.1, "contrast range must be ordered")?;
        check(
            0.0 <= a.erase_area.0 && a.erase_area.0 <= a.erase_area.1 && a.erase_area.1 <= 1.0,
            "erase area range must be ordered within [0,1]",
        )
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.betas.0,
            beta2: self.betas.1,
            eps: 1e-8,
        }
    }
}
