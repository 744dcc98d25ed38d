//! Seeded synthetic fundus-like images with exact disc/cup ground truth.
//!
//! Every sample is an axis-aligned disc ellipse with a concentric cup
//! ellipse on a textured background. Geometry and texture are drawn first
//! from the per-sample stream; the domain transform (channel scale, gamma,
//! blur, noise) is applied afterwards, so two domains sharing a seed share
//! their labels exactly and differ only in appearance.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io;
use crate::map::{Image, LabelMap, Map};
use crate::rng::Rng;

pub const DISC: usize = 0;
pub const CUP: usize = 1;
pub const NUM_CLASSES: usize = 2;
pub const CLASS_NAMES: [&str; NUM_CLASSES] = ["disc", "cup"];

/// Brightness added inside the disc and, on top of it, inside the cup.
const DISC_RGB: [f32; 3] = [0.30, 0.25, 0.15];
const CUP_RGB: [f32; 3] = [0.15, 0.25, 0.25];
/// Width of the soft rim in units of the normalized ellipse radius.
const RIM: f32 = 0.08;
const TEXTURE_SIGMA: f32 = 2.0;
const VIGNETTE: f32 = 0.25;
/// Per-sample global brightness and per-channel tint, shared by both domains.
const ILLUMINATION: (f32, f32) = (0.8, 1.2);
const HUE_JITTER: f32 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainParams {
    pub base_intensity: [f32; 3],
    pub gamma: f32,
    pub channel_scale: [f32; 3],
    pub blur_radius: f32,
    pub noise_sigma: f32,
    pub texture_amp: f32,
}

impl DomainParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gamma > 0.0
            && self.noise_sigma >= 0.0
            && self.blur_radius >= 0.0
            && self.texture_amp >= 0.0
            && self.channel_scale.iter().all(|&s| s > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid domain parameters {self:?}")))
        }
    }

    /// Parameters under which [`apply_domain`] is the identity.
    pub fn identity_transform(self) -> Self {
        DomainParams {
            gamma: 1.0,
            channel_scale: [1.0; 3],
            blur_radius: 0.0,
            noise_sigma: 0.0,
            ..self
        }
    }
}

pub fn default_source_params() -> DomainParams {
    DomainParams {
        base_intensity: [0.55, 0.35, 0.25],
        gamma: 1.0,
        channel_scale: [1.0, 1.0, 1.0],
        blur_radius: 0.5,
        noise_sigma: 0.01,
        texture_amp: 0.05,
    }
}

pub fn default_target_params() -> DomainParams {
    DomainParams {
        base_intensity: [0.45, 0.40, 0.30],
        gamma: 1.4,
        channel_scale: [0.85, 1.0, 1.15],
        blur_radius: 1.5,
        noise_sigma: 0.03,
        texture_amp: 0.08,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: Image,
    /// Channel 0 = disc, channel 1 = cup.
    pub label: LabelMap,
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    cx: f32,
    cy: f32,
    disc: (f32, f32),
    cup: (f32, f32),
}

impl Geometry {
    fn draw(rng: &mut Rng, h: usize, w: usize) -> Self {
        let side = h.min(w) as f32;
        let disc = (rng.uniform(0.25, 0.38) * side, rng.uniform(0.25, 0.38) * side);
        let cx = rng.uniform(w as f32 / 3.0, 2.0 * w as f32 / 3.0);
        let cy = rng.uniform(h as f32 / 3.0, 2.0 * h as f32 / 3.0);
        let cup = (disc.0 * rng.uniform(0.4, 0.7), disc.1 * rng.uniform(0.4, 0.7));
        Geometry { cx, cy, disc, cup }
    }

    /// Normalized elliptical radius of pixel center `(y, x)`.
    fn radius(&self, y: usize, x: usize, axes: (f32, f32)) -> f32 {
        let dx = (x as f32 + 0.5 - self.cx) / axes.0;
        let dy = (y as f32 + 0.5 - self.cy) / axes.1;
        (dx * dx + dy * dy).sqrt()
    }
}

fn rim_weight(r: f32) -> f32 {
    ((1.0 - r) / RIM + 0.5).clamp(0.0, 1.0)
}

/// Draws geometry and texture and composes the untransformed image.
pub fn draw_clean(rng: &mut Rng, params: &DomainParams, h: usize, w: usize) -> Sample {
    let geo = Geometry::draw(rng, h, w);
    let disc_gain = rng.uniform(0.85, 1.15);
    let cup_gain = rng.uniform(0.85, 1.15);
    let illum = rng.uniform(ILLUMINATION.0, ILLUMINATION.1);
    let hue: [f32; 3] = std::array::from_fn(|_| 1.0 + HUE_JITTER * (2.0 * rng.next_f32() - 1.0));

    let mut field = Map::from_fn(h, w, 1, |_, _, _| rng.normal());
    field = gaussian_blur(&field, TEXTURE_SIGMA);
    let n = field.as_slice().len() as f32;
    let var = field.as_slice().iter().map(|v| v * v).sum::<f32>() / n;
    let norm = if var > 0.0 { var.sqrt().recip() } else { 0.0 };

    let label = Map::from_fn(h, w, 2, |y, x, k| {
        let axes = if k == DISC { geo.disc } else { geo.cup };
        u8::from(geo.radius(y, x, axes) <= 1.0)
    });

    let half = 0.5 * h.min(w) as f32;
    let image = Map::from_fn(h, w, 3, |y, x, k| {
        let dx = (x as f32 + 0.5 - 0.5 * w as f32) / half;
        let dy = (y as f32 + 0.5 - 0.5 * h as f32) / half;
        let vignette = 1.0 - VIGNETTE * (dx * dx + dy * dy).min(2.0) * 0.5;
        let texture = params.texture_amp * field.get(y, x, 0) * norm;
        let disc = rim_weight(geo.radius(y, x, geo.disc)) * disc_gain * DISC_RGB[k];
        let cup = rim_weight(geo.radius(y, x, geo.cup)) * cup_gain * CUP_RGB[k];
        ((params.base_intensity[k] * vignette + texture + disc + cup) * illum * hue[k]).clamp(0.0, 1.0)
    });
    Sample { image, label }
}

/// Per-channel scale, gamma, Gaussian blur, additive noise, clamp.
pub fn apply_domain(image: &Image, params: &DomainParams, rng: &mut Rng) -> Image {
    let mut out = image.clone();
    for px in out.as_mut_slice().chunks_exact_mut(3) {
        for (v, s) in px.iter_mut().zip(params.channel_scale) {
            *v = (*v * s).clamp(0.0, 1.0).powf(params.gamma);
        }
    }
    if params.blur_radius > 0.0 {
        out = gaussian_blur(&out, params.blur_radius);
    }
    if params.noise_sigma > 0.0 {
        for v in out.as_mut_slice() {
            *v += params.noise_sigma * rng.normal();
        }
    }
    for v in out.as_mut_slice() {
        *v = v.clamp(0.0, 1.0);
    }
    out
}

pub fn gen_sample(rng: &mut Rng, params: &DomainParams, h: usize, w: usize) -> Sample {
    assert!(h >= 32 && w >= 32, "samples need H, W >= 32, got {h}x{w}");
    let clean = draw_clean(rng, params, h, w);
    Sample {
        image: apply_domain(&clean.image, params, rng),
        label: clean.label,
    }
}

pub fn stem(index: usize) -> String {
    format!("img_{index:04}")
}

/// Writes `n` samples plus `manifest.txt` into `out_dir`; returns the stems.
///
/// Sample `i` uses the stream `Rng::derived(seed, i)`.
pub fn gen_dataset(
    seed: u64,
    params: &DomainParams,
    n: usize,
    h: usize,
    w: usize,
    out_dir: &Path,
) -> Result<Vec<String>> {
    params.validate()?;
    if n == 0 {
        return Err(Error::Config("dataset needs at least one sample".into()));
    }
    if h < 32 || w < 32 || h % 2 == 1 || w % 2 == 1 {
        return Err(Error::Config(format!("image size {h}x{w} must be even and >= 32")));
    }
    io::create_dir_all(out_dir)?;
    let mut manifest = String::new();
    let mut stems = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = Rng::derived(seed, i as u64);
        let sample = gen_sample(&mut rng, params, h, w);
        let stem = stem(i);
        io::write_image_ppm(&out_dir.join(format!("{stem}.ppm")), &sample.image)?;
        for (k, name) in CLASS_NAMES.iter().enumerate() {
            io::write_mask_pgm(
                &out_dir.join(format!("{stem}.{name}.pgm")),
                &sample.label.channel(k),
            )?;
        }
        writeln!(manifest, "{stem}").unwrap();
        stems.push(stem);
    }
    io::write_bytes(&out_dir.join("manifest.txt"), manifest.as_bytes())?;
    Ok(stems)
}

/// Separable Gaussian blur with clamp-to-edge borders, truncated at 3σ.
pub fn gaussian_blur(map: &Map<f32>, sigma: f32) -> Map<f32> {
    if sigma <= 0.0 {
        return map.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f32> = (-radius..=radius)
        .map(|i| (-((i * i) as f32) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f32 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);

    let (h, w, c) = map.shape();
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let horiz = Map::from_fn(h, w, c, |y, x, k| {
        kernel
            .iter()
            .enumerate()
            .map(|(j, kv)| kv * map.get(y, clamp(x as isize + j as isize - radius, w), k))
            .sum::<f32>()
    });
    Map::from_fn(h, w, c, |y, x, k| {
        kernel
            .iter()
            .enumerate()
            .map(|(j, kv)| kv * horiz.get(clamp(y as isize + j as isize - radius, h), x, k))
            .sum::<f32>()
    })
}
