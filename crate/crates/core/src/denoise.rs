//! Pseudo labels and their denoising.
//!
//! Pseudo labels threshold the source model's probabilities. The pixel-level
//! scheme keeps a label only where the MC-dropout standard deviation is below
//! `eta`. The class-level scheme additionally compares each pixel's feature
//! vector with probability-weighted object and background prototypes of the
//! same image and keeps a label only when the feature lies strictly closer to
//! its own side. Selected labels enter a masked binary cross-entropy.

use std::fmt;
use std::str::FromStr;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::map::{LabelMap, Map, ProbMap, SelectionMask, UncertaintyMap};

/// Clamp applied to probabilities before taking logs.
pub const PROB_EPS: f64 = 1e-7;

/// Which denoising scheme builds the selection mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DenoiseMode {
    /// Every pseudo label selected.
    Plain,
    /// Uncertainty threshold only.
    Pixel,
    /// Prototype distance test only.
    Class,
    /// Uncertainty threshold and prototype distance test.
    Full,
}

impl DenoiseMode {
    pub const ALL: [DenoiseMode; 4] = [
        DenoiseMode::Plain,
        DenoiseMode::Pixel,
        DenoiseMode::Class,
        DenoiseMode::Full,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DenoiseMode::Plain => "plain",
            DenoiseMode::Pixel => "pixel",
            DenoiseMode::Class => "class",
            DenoiseMode::Full => "full",
        }
    }

    pub fn uses_uncertainty(self) -> bool {
        matches!(self, DenoiseMode::Pixel | DenoiseMode::Full)
    }
}

impl fmt::Display for DenoiseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DenoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DenoiseMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown denoise mode {s:?} (plain|pixel|class|full)")))
    }
}

pub fn gen_pseudo_labels(prob: &ProbMap, gamma: f32) -> LabelMap {
    prob.map(|p| u8::from(p >= gamma))
}

/// Per-entry binary cross-entropy and its derivative with respect to `p`.
pub fn bce_per_pixel<T: Float>(prob: &Map<T>, label: &LabelMap) -> Result<(Map<T>, Map<T>)> {
    let eps = T::from(PROB_EPS).unwrap();
    let one = T::one();
    let clamped = prob.map(|p| p.max(eps).min(one - eps));
    let loss = clamped.zip_with(label, |p, y| if y != 0 { -p.ln() } else { -(one - p).ln() })?;
    let grad = clamped.zip_with(label, |p, y| {
        let y = if y != 0 { one } else { T::zero() };
        (p - y) / (p * (one - p))
    })?;
    Ok((loss, grad))
}

/// Population standard deviation across `K ≥ 2` maps, per entry.
pub fn uncertainty(maps: &[ProbMap]) -> Result<UncertaintyMap> {
    if maps.len() < 2 {
        return Err(Error::Config(format!("uncertainty needs K >= 2 maps, got {}", maps.len())));
    }
    let first = &maps[0];
    for m in &maps[1..] {
        first.ensure_same_shape(m)?;
    }
    let (h, w, c) = first.shape();
    let mut mean = vec![0.0f64; h * w * c];
    let mut m2 = vec![0.0f64; h * w * c];
    // Welford accumulation
    for (k, map) in maps.iter().enumerate() {
        let n = (k + 1) as f64;
        for ((mu, s), &v) in mean.iter_mut().zip(m2.iter_mut()).zip(map.as_slice()) {
            let v = f64::from(v);
            let delta = v - *mu;
            *mu += delta / n;
            *s += delta * (v - *mu);
        }
    }
    let k = maps.len() as f64;
    Map::from_vec(h, w, c, m2.iter().map(|s| (s.max(0.0) / k).sqrt() as f32).collect())
}

pub fn pixel_mask(u: &UncertaintyMap, eta: f32) -> SelectionMask {
    u.map(|v| u8::from(v < eta))
}

/// Object and background masks restricted to low-uncertainty entries.
pub fn class_masks(pseudo: &LabelMap, u: &UncertaintyMap, eta: f32) -> Result<(SelectionMask, SelectionMask)> {
    let obj = pseudo.zip_with(u, |y, v| u8::from(y != 0 && v < eta))?;
    let bg = pseudo.zip_with(u, |y, v| u8::from(y == 0 && v < eta))?;
    Ok((obj, bg))
}

/// Per-class object and background feature centroids of one image.
/// `None` marks a side with zero weighted mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Prototypes {
    pub obj: Vec<Option<Vec<f32>>>,
    pub bg: Vec<Option<Vec<f32>>>,
}

impl Prototypes {
    pub fn is_degenerate(&self, class: usize) -> bool {
        self.obj[class].is_none() || self.bg[class].is_none()
    }
}

/// Probability-weighted prototypes: object pixels weigh by `p`, background
/// pixels by `1 − p`.
///
/// `features` is `H×W×L`; the masks and `prob` are `H×W×C`.
pub fn prototypes(features: &Map<f32>, b_obj: &SelectionMask, b_bg: &SelectionMask, prob: &ProbMap) -> Result<Prototypes> {
    b_obj.ensure_same_shape(prob)?;
    b_bg.ensure_same_shape(prob)?;
    let (h, w, classes) = prob.shape();
    if (features.height(), features.width()) != (h, w) {
        return Err(Error::Shape(format!(
            "features {:?} do not match probabilities {:?}",
            features.shape(),
            prob.shape()
        )));
    }
    let dim = features.channels();
    let mut obj = Vec::with_capacity(classes);
    let mut bg = Vec::with_capacity(classes);
    for c in 0..classes {
        let mut sum_obj = vec![0.0f64; dim];
        let mut sum_bg = vec![0.0f64; dim];
        let (mut mass_obj, mut mass_bg) = (0.0f64, 0.0f64);
        for y in 0..h {
            for x in 0..w {
                let p = f64::from(prob.get(y, x, c));
                let e = features.pixel(y, x);
                if b_obj.get(y, x, c) != 0 && p > 0.0 {
                    mass_obj += p;
                    sum_obj.iter_mut().zip(e).for_each(|(s, &v)| *s += p * f64::from(v));
                }
                if b_bg.get(y, x, c) != 0 && p < 1.0 {
                    let q = 1.0 - p;
                    mass_bg += q;
                    sum_bg.iter_mut().zip(e).for_each(|(s, &v)| *s += q * f64::from(v));
                }
            }
        }
        let centroid = |sum: Vec<f64>, mass: f64| {
            (mass > 0.0).then(|| sum.into_iter().map(|s| (s / mass) as f32).collect())
        };
        obj.push(centroid(sum_obj, mass_obj));
        bg.push(centroid(sum_bg, mass_bg));
    }
    Ok(Prototypes { obj, bg })
}

/// Euclidean feature distances to each class's prototypes.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMaps {
    pub d_obj: Map<f32>,
    pub d_bg: Map<f32>,
    /// `false` for classes with a degenerate prototype; their distances are
    /// zero-filled and must not be used.
    pub defined: Vec<bool>,
}

pub fn feature_distances(features: &Map<f32>, protos: &Prototypes) -> DistanceMaps {
    let (h, w, _) = features.shape();
    let classes = protos.obj.len();
    let defined: Vec<bool> = (0..classes).map(|c| !protos.is_degenerate(c)).collect();
    let dist = |e: &[f32], z: &Option<Vec<f32>>| -> f32 {
        z.as_ref().map_or(0.0, |z| {
            e.iter()
                .zip(z)
                .map(|(&a, &b)| {
                    let d = f64::from(a) - f64::from(b);
                    d * d
                })
                .sum::<f64>()
                .sqrt() as f32
        })
    };
    let d_obj = Map::from_fn(h, w, classes, |y, x, c| {
        if defined[c] {
            dist(features.pixel(y, x), &protos.obj[c])
        } else {
            0.0
        }
    });
    let d_bg = Map::from_fn(h, w, classes, |y, x, c| {
        if defined[c] {
            dist(features.pixel(y, x), &protos.bg[c])
        } else {
            0.0
        }
    });
    DistanceMaps { d_obj, d_bg, defined }
}

/// Uncertainty gate combined with the prototype distance test. Classes
/// without both prototypes fall back to the uncertainty gate alone.
pub fn combined_mask(u: &UncertaintyMap, eta: f32, pseudo: &LabelMap, d: &DistanceMaps) -> Result<SelectionMask> {
    u.ensure_same_shape(pseudo)?;
    u.ensure_same_shape(&d.d_obj)?;
    u.ensure_same_shape(&d.d_bg)?;
    let (h, w, classes) = u.shape();
    Ok(Map::from_fn(h, w, classes, |y, x, c| {
        let certain = u.get(y, x, c) < eta;
        if !d.defined[c] {
            return u8::from(certain);
        }
        let (obj, bg) = (d.d_obj.get(y, x, c), d.d_bg.get(y, x, c));
        let agrees = if pseudo.get(y, x, c) != 0 { obj < bg } else { obj > bg };
        u8::from(certain && agrees)
    }))
}

#[derive(Debug, Clone)]
pub struct MaskedLoss<T> {
    /// Mean BCE over selected entries; 0 when nothing is selected.
    pub loss: f64,
    pub grad: Map<T>,
    pub selected: usize,
}

impl<T> MaskedLoss<T> {
    pub fn is_empty(&self) -> bool {
        self.selected == 0
    }
}

/// Mean BCE over entries with `m = 1` and its gradient with respect to `p`.
pub fn masked_loss<T: Float>(prob: &Map<T>, pseudo: &LabelMap, mask: &SelectionMask) -> Result<MaskedLoss<T>> {
    prob.ensure_same_shape(mask)?;
    let (loss, grad) = bce_per_pixel(prob, pseudo)?;
    let selected = mask.count_ones();
    let denom = selected.max(1) as f64;
    let total: f64 = loss
        .as_slice()
        .iter()
        .zip(mask.as_slice())
        .filter(|(_, &m)| m != 0)
        .map(|(l, _)| l.to_f64().unwrap())
        .sum();
    let scale = T::from(1.0 / denom).unwrap();
    let grad = grad.zip_with(mask, |g, m| if m != 0 { g * scale } else { T::zero() })?;
    Ok(MaskedLoss {
        loss: total / denom,
        grad,
        selected,
    })
}

/// Pseudo labels and selection mask of one image under a denoising mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub pseudo: LabelMap,
    pub mask: SelectionMask,
    /// Per class: the prototype test was skipped for lack of a prototype.
    pub degenerate: Vec<bool>,
}

/// Builds the selection for one image.
///
/// `features` must already be upsampled to the image size. `u` is required
/// for the pixel and full modes. The class mode replaces the uncertainty gate
/// by an always-true gate in both the prototype masks and the final mask.
pub fn select(mode: DenoiseMode, prob: &ProbMap, features: &Map<f32>, u: Option<&UncertaintyMap>, gamma: f32, eta: f32) -> Result<Selection> {
    let pseudo = gen_pseudo_labels(prob, gamma);
    let (h, w, c) = prob.shape();
    let needs_u = || {
        u.ok_or_else(|| Error::Config(format!("denoise mode {mode} needs an uncertainty map")))
    };
    let class_level = |u: &UncertaintyMap, eta: f32| -> Result<(SelectionMask, Vec<bool>)> {
        let (b_obj, b_bg) = class_masks(&pseudo, u, eta)?;
        let protos = prototypes(features, &b_obj, &b_bg, prob)?;
        let degenerate = (0..c).map(|k| protos.is_degenerate(k)).collect();
        let d = feature_distances(features, &protos);
        Ok((combined_mask(u, eta, &pseudo, &d)?, degenerate))
    };
    let (mask, degenerate) = match mode {
        DenoiseMode::Plain => (Map::filled(h, w, c, 1), vec![false; c]),
        DenoiseMode::Pixel => {
            let u = needs_u()?;
            u.ensure_same_shape(prob)?;
            (pixel_mask(u, eta), vec![false; c])
        }
        DenoiseMode::Class => class_level(&Map::zeros(h, w, c), f32::INFINITY)?,
        DenoiseMode::Full => class_level(needs_u()?, eta)?,
    };
    Ok(Selection {
        pseudo,
        mask,
        degenerate,
    })
}

#[cfg(test)]
mod tests;
