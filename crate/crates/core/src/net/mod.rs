//! Four-layer segmentation network with manual backpropagation.
//!
//! ```text
//! x H×W×3 → conv1 3×3 (16) → ReLU → avgpool 2×2
//!         → conv2 3×3 (32) → ReLU → dropout
//!         → conv3 3×3 (16) → ReLU            = e_l (H/2×W/2×16)
//!         → conv4 1×1 (2)  → sigmoid → bilinear ×2 = p (H×W×2)
//! ```
//!
//! Dropout is inverted (kept units scaled by `1/(1−rate)`), so evaluation is
//! a plain pass. All arithmetic is generic over [`Real`] so the same code
//! runs in `f32` for training and `f64` for gradient checking.

mod adam;
mod bilinear;
mod checkpoint;
mod conv;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use bilinear::{bilinear_upsample, bilinear_upsample_backward};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use conv::Conv;

use std::fmt::Debug;

use num_traits::{Float, NumAssign};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::encode_tensor;
use crate::map::Map;
use crate::rng::Rng;

pub trait Real: Float + NumAssign + Default + Debug + Send + Sync + 'static {}
impl<T: Float + NumAssign + Default + Debug + Send + Sync + 'static> Real for T {}

pub const FEATURE_CHANNELS: usize = 16;
pub const OUTPUT_CHANNELS: usize = 2;
pub const LAYER_NAMES: [&str; 4] = ["conv1", "conv2", "conv3", "conv4"];

/// The four convolution layers. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights<T> {
    pub layers: [Conv<T>; 4],
}

impl<T: Real> Weights<T> {
    pub fn zeros() -> Self {
        Weights {
            layers: [
                Conv::zeros(3, 3, 16),
                Conv::zeros(3, 16, 32),
                Conv::zeros(3, 32, FEATURE_CHANNELS),
                Conv::zeros(1, FEATURE_CHANNELS, OUTPUT_CHANNELS),
            ],
        }
    }

    /// Every parameter tensor as `(name, dims, values)` in a fixed order.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[T])> {
        let mut out = Vec::with_capacity(8);
        for (name, conv) in LAYER_NAMES.iter().zip(&self.layers) {
            out.push((format!("{name}.weight"), conv.weight_dims().to_vec(), &conv.weight[..]));
            out.push((format!("{name}.bias"), vec![conv.cout], &conv.bias[..]));
        }
        out
    }

    pub fn slices_mut(&mut self) -> impl Iterator<Item = &mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|c| [&mut c.weight[..], &mut c.bias[..]])
    }

    pub fn slices(&self) -> impl Iterator<Item = &[T]> {
        self.layers.iter().flat_map(|c| [&c.weight[..], &c.bias[..]])
    }

    pub fn num_params(&self) -> usize {
        self.slices().map(<[T]>::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.slices().flatten().all(|v| v.is_finite())
    }

    pub fn add_assign(&mut self, other: &Weights<T>) {
        for (a, b) in self.slices_mut().zip(other.slices()) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for a in self.slices_mut() {
            a.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn cast<U: Real>(&self) -> Weights<U> {
        let conv = |c: &Conv<T>| Conv {
            kernel: c.kernel,
            cin: c.cin,
            cout: c.cout,
            weight: c.weight.iter().map(|&v| U::from(v).unwrap()).collect(),
            bias: c.bias.iter().map(|&v| U::from(v).unwrap()).collect(),
        };
        Weights {
            layers: [
                conv(&self.layers[0]),
                conv(&self.layers[1]),
                conv(&self.layers[2]),
                conv(&self.layers[3]),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T = f32> {
    pub weights: Weights<T>,
    pub dropout: f32,
}

/// How dropout behaves in a forward pass.
pub enum Mode<'a> {
    /// No dropout.
    Eval,
    /// Dropout sampled from the generator (training).
    Train(&'a mut Rng),
    /// Dropout sampled at inference for MC estimation.
    Mc(&'a mut Rng),
    /// Explicit keep mask over the conv2 activation (`H/2×W/2×32`).
    Masked(&'a Map<u8>),
}

#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    pub input: Map<T>,
    pub z1: Map<T>,
    pub pooled: Map<T>,
    pub z2: Map<T>,
    /// Keep flags of the dropout layer; all ones when dropout was off.
    pub keep: Map<u8>,
    /// Scale applied to kept units (`1/(1−rate)` when dropout was sampled).
    pub keep_scale: T,
    pub dropped: Map<T>,
    pub z3: Map<T>,
    /// Low-resolution sigmoid output before upsampling.
    pub low_prob: Map<T>,
}

#[derive(Debug, Clone)]
pub struct ForwardOutput<T> {
    /// `H×W×2` probabilities.
    pub prob: Map<T>,
    /// `H/2×W/2×16` features before the last convolution.
    pub features: Map<T>,
    pub cache: ForwardCache<T>,
}

pub fn init_params(rng: &mut Rng, dropout: f32) -> ModelParams<f32> {
    let mut weights = Weights::<f32>::zeros();
    for conv in &mut weights.layers {
        let std = (2.0 / (conv.kernel * conv.kernel * conv.cin) as f32).sqrt();
        for w in &mut conv.weight {
            *w = rng.normal() * std;
        }
    }
    ModelParams { weights, dropout }
}

impl<T: Real> ModelParams<T> {
    pub fn forward(&self, image: &Map<T>, mode: Mode<'_>) -> Result<ForwardOutput<T>> {
        let (h, w, c) = image.shape();
        if c != 3 {
            return Err(Error::Shape(format!("expected 3 input channels, got {c}")));
        }
        if h < 2 || w < 2 || h % 2 == 1 || w % 2 == 1 {
            return Err(Error::Shape(format!("input {h}x{w} must have even dims >= 2")));
        }
        let [c1, c2, c3, c4] = &self.weights.layers;
        let z1 = c1.forward(image);
        let pooled = conv::avg_pool2(&conv::relu(&z1));
        let z2 = c2.forward(&pooled);
        let a2 = conv::relu(&z2);

        let (lh, lw, lc) = a2.shape();
        let scale = match mode {
            Mode::Eval => T::one(),
            _ => self.keep_scale(),
        };
        let keep = match mode {
            Mode::Eval => Map::filled(lh, lw, lc, 1u8),
            Mode::Train(rng) | Mode::Mc(rng) => {
                if self.dropout > 0.0 {
                    Map::from_fn(lh, lw, lc, |_, _, _| u8::from(!rng.bernoulli(self.dropout)))
                } else {
                    Map::filled(lh, lw, lc, 1u8)
                }
            }
            Mode::Masked(mask) => {
                a2.ensure_same_shape(mask)?;
                mask.clone()
            }
        };
        let dropped = apply_keep(&a2, &keep, scale);

        let z3 = c3.forward(&dropped);
        let features = conv::relu(&z3);
        let low_prob = c4.forward(&features).map(sigmoid);
        let prob = bilinear_upsample(&low_prob, h, w)?;
        Ok(ForwardOutput {
            prob,
            features,
            cache: ForwardCache {
                input: image.clone(),
                z1,
                pooled,
                z2,
                keep,
                keep_scale: scale,
                dropped,
                z3,
                low_prob,
            },
        })
    }

    /// Eval-mode probabilities only.
    pub fn predict(&self, image: &Map<T>) -> Result<Map<T>> {
        Ok(self.forward(image, Mode::Eval)?.prob)
    }

    /// Parameter gradients given `dL/dp` for the pass that produced `cache`.
    pub fn backward(&self, cache: &ForwardCache<T>, dprob: &Map<T>) -> Result<Weights<T>> {
        let (h, w, _) = cache.input.shape();
        if dprob.shape() != (h, w, OUTPUT_CHANNELS) {
            return Err(Error::Shape(format!(
                "upstream gradient {:?} does not match output {:?}",
                dprob.shape(),
                (h, w, OUTPUT_CHANNELS)
            )));
        }
        let [c1, c2, c3, c4] = &self.weights.layers;
        let mut grads = Weights::zeros();
        let [g1, g2, g3, g4] = &mut grads.layers;

        let dlow = bilinear_upsample_backward(dprob, h / 2, w / 2)?;
        let dz4 = cache
            .low_prob
            .zip_with(&dlow, |q, g| g * q * (T::one() - q))?;
        let features = conv::relu(&cache.z3);
        let dfeat = c4.backward(&features, &dz4, g4, true).unwrap();
        let dz3 = conv::relu_backward(&cache.z3, &dfeat);
        let ddropped = c3.backward(&cache.dropped, &dz3, g3, true).unwrap();
        let da2 = apply_keep(&ddropped, &cache.keep, cache.keep_scale);
        let dz2 = conv::relu_backward(&cache.z2, &da2);
        let dpooled = c2.backward(&cache.pooled, &dz2, g2, true).unwrap();
        let da1 = conv::avg_pool2_backward(&dpooled);
        let dz1 = conv::relu_backward(&cache.z1, &da1);
        c1.backward(&cache.input, &dz1, g1, false);
        Ok(grads)
    }

    fn keep_scale(&self) -> T {
        if self.dropout > 0.0 {
            T::from(1.0 / (1.0 - f64::from(self.dropout))).unwrap()
        } else {
            T::one()
        }
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        ModelParams {
            weights: self.weights.cast(),
            dropout: self.dropout,
        }
    }
}

impl ModelParams<f32> {
    /// SHA-256 over the encoded parameter tensors and the dropout rate.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for (name, dims, data) in self.weights.tensors() {
            hasher.update(name.as_bytes());
            hasher.update(encode_tensor(&dims, data).expect("parameter dims are valid"));
        }
        hasher.update(self.dropout.to_le_bytes());
        hex::encode(hasher.finalize())
    }
}

/// `K` dropout-sampled probability maps of one image.
pub fn mc_passes(params: &ModelParams<f32>, image: &Map<f32>, passes: usize, rng: &mut Rng) -> Result<Vec<Map<f32>>> {
    if passes < 2 {
        return Err(Error::Config(format!("MC estimation needs K >= 2, got {passes}")));
    }
    (0..passes)
        .map(|_| Ok(params.forward(image, Mode::Mc(rng))?.prob))
        .collect()
}

fn apply_keep<T: Real>(map: &Map<T>, keep: &Map<u8>, scale: T) -> Map<T> {
    map.zip_with(keep, |v, k| if k != 0 { v * scale } else { T::zero() })
        .expect("dropout mask shape matches activation")
}

#[inline]
fn sigmoid<T: Real>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

#[cfg(test)]
mod tests;
