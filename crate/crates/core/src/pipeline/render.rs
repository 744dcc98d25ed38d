//! Static figures: contour overlays and uncertainty heatmaps.

use crate::dataset::Dataset;
use crate::denoise::uncertainty;
use crate::error::Result;
use crate::io;
use crate::map::{Image, LabelMap, Map, UncertaintyMap};
use crate::metrics::{boundary, predict_labels};
use crate::net::mc_passes;
use crate::rng::{derive_seed, Rng};
use crate::synth::CLASS_NAMES;

use super::{begin, existing_dir, load_model, RunConfig};

const STREAM_RENDER: u64 = 5;

/// Uncertainty mapped to the top of the color ramp. The population std of
/// values in [0, 1] never exceeds 0.5.
pub const HEATMAP_SCALE: f32 = 0.5;

/// Contour colors per class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Palette {
    pub pred: [[f32; 3]; 2],
    pub truth: [[f32; 3]; 2],
}

impl Default for Palette {
    fn default() -> Self {
        Palette {
            pred: [[0.0, 1.0, 0.0], [0.0, 0.6, 1.0]],
            truth: [[1.0, 1.0, 0.0], [1.0, 0.0, 1.0]],
        }
    }
}

/// Boundary pixels of every class channel.
pub fn contours(labels: &LabelMap) -> Vec<Vec<(usize, usize)>> {
    (0..labels.channels()).map(|k| boundary(&labels.channel(k))).collect()
}

/// Draws ground-truth contours first, then predicted contours on top.
pub fn overlay(image: &Image, pred: &LabelMap, truth: Option<&LabelMap>, palette: &Palette) -> Result<Image> {
    let mut out = image.clone();
    let mut draw = |labels: &LabelMap, colors: &[[f32; 3]; 2]| -> Result<()> {
        if (labels.height(), labels.width()) != (image.height(), image.width()) {
            return Err(crate::Error::Shape(format!(
                "labels {:?} vs image {:?}",
                labels.shape(),
                image.shape()
            )));
        }
        for (k, points) in contours(labels).iter().enumerate() {
            for &(y, x) in points {
                out.pixel_mut(y, x).copy_from_slice(&colors[k % 2]);
            }
        }
        Ok(())
    };
    if let Some(t) = truth {
        draw(t, &palette.truth)?;
    }
    draw(pred, &palette.pred)?;
    Ok(out)
}

fn ramp(t: f32) -> [f32; 3] {
    // black -> red -> yellow -> white
    let t = t.clamp(0.0, 1.0) * 3.0;
    [t.min(1.0), (t - 1.0).clamp(0.0, 1.0), (t - 2.0).clamp(0.0, 1.0)]
}

/// One channel of an uncertainty map as an RGB heatmap.
pub fn heatmap(u: &UncertaintyMap, channel: usize) -> Image {
    Map::from_fn(u.height(), u.width(), 3, |y, x, c| ramp(u.get(y, x, channel) / HEATMAP_SCALE)[c])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderSummary {
    pub images: usize,
    pub with_truth: bool,
}

/// `render`: `<stem>.overlay.ppm` and `<stem>.u.<class>.ppm` per image.
pub fn render(cfg: &RunConfig) -> Result<RenderSummary> {
    let model = load_model(&cfg.require(&cfg.model, "model")?)?;
    let data = existing_dir(cfg.require(&cfg.data, "data")?)?;
    let unlabeled = Dataset::load_unlabeled(&data)?;
    let with_truth = data.join(format!("{}.{}.pgm", unlabeled.stems[0], CLASS_NAMES[0])).exists();
    let dataset = if with_truth { Dataset::load(&data)? } else { unlabeled };
    let out = begin(cfg, "render")?;
    let stream = derive_seed(cfg.train.seed, STREAM_RENDER);
    let palette = Palette::default();
    for (i, (stem, image)) in dataset.stems.iter().zip(&dataset.images).enumerate() {
        let pred = predict_labels(&model, image)?;
        let truth = dataset.labels.as_ref().map(|l| &l[i]);
        io::write_image_ppm(&out.join(format!("{stem}.overlay.ppm")), &overlay(image, &pred, truth, &palette)?)?;
        let maps = mc_passes(&model, image, cfg.train.mc_passes, &mut Rng::derived(stream, i as u64))?;
        let u = uncertainty(&maps)?;
        for (k, name) in CLASS_NAMES.iter().enumerate() {
            io::write_image_ppm(&out.join(format!("{stem}.u.{name}.ppm")), &heatmap(&u, k))?;
        }
    }
    Ok(RenderSummary {
        images: dataset.len(),
        with_truth,
    })
}
