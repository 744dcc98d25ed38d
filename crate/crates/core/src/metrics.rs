//! Dice, average surface distance and pseudo-label selection accuracy.

use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::io;
use crate::map::{LabelMap, Map};
use crate::net::ModelParams;
use crate::synth::CLASS_NAMES;

/// Threshold used to binarize predictions for evaluation.
pub const EVAL_THRESHOLD: f32 = 0.5;

/// `2|A∩B| / (|A|+|B|)`; two empty masks score 1.
pub fn dice(pred: &Map<u8>, gt: &Map<u8>) -> Result<f64> {
    pred.ensure_same_shape(gt)?;
    let (mut inter, mut a, mut b) = (0usize, 0usize, 0usize);
    for (&p, &g) in pred.as_slice().iter().zip(gt.as_slice()) {
        let (p, g) = (p != 0, g != 0);
        a += usize::from(p);
        b += usize::from(g);
        inter += usize::from(p && g);
    }
    if a + b == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (a + b) as f64)
}

/// Foreground pixels of a single-channel mask with a background (or
/// out-of-image) 4-neighbor.
pub fn boundary(mask: &Map<u8>) -> Vec<(usize, usize)> {
    let (h, w, _) = mask.shape();
    let fg = |y: isize, x: isize| {
        y >= 0 && x >= 0 && y < h as isize && x < w as isize && mask.get(y as usize, x as usize, 0) != 0
    };
    let mut out = Vec::new();
    for y in 0..h as isize {
        for x in 0..w as isize {
            if fg(y, x) && !(fg(y - 1, x) && fg(y + 1, x) && fg(y, x - 1) && fg(y, x + 1)) {
                out.push((y as usize, x as usize));
            }
        }
    }
    out
}

/// Symmetric average surface distance in pixels; `None` if either mask is
/// empty.
pub fn asd(pred: &Map<u8>, gt: &Map<u8>) -> Result<Option<f64>> {
    pred.ensure_same_shape(gt)?;
    if pred.channels() != 1 {
        return Err(Error::Shape(format!("asd needs single-channel masks, got {}", pred.channels())));
    }
    let (bp, bg) = (boundary(pred), boundary(gt));
    if bp.is_empty() || bg.is_empty() {
        return Ok(None);
    }
    let (h, w, _) = pred.shape();
    let to_gt = squared_distance_transform(&bg, h, w);
    let to_pred = squared_distance_transform(&bp, h, w);
    let mean = |pts: &[(usize, usize)], dt: &[f64]| {
        pts.iter().map(|&(y, x)| dt[y * w + x].sqrt()).sum::<f64>() / pts.len() as f64
    };
    Ok(Some(0.5 * (mean(&bp, &to_gt) + mean(&bg, &to_pred))))
}

/// Exact squared Euclidean distance from every pixel to the nearest seed,
/// by two passes of the lower-envelope-of-parabolas transform.
fn squared_distance_transform(seeds: &[(usize, usize)], h: usize, w: usize) -> Vec<f64> {
    let mut grid = vec![f64::INFINITY; h * w];
    for &(y, x) in seeds {
        grid[y * w + x] = 0.0;
    }
    let mut line = Vec::new();
    for y in 0..h {
        line.clear();
        line.extend_from_slice(&grid[y * w..(y + 1) * w]);
        let out = transform_1d(&line);
        grid[y * w..(y + 1) * w].copy_from_slice(&out);
    }
    for x in 0..w {
        line.clear();
        line.extend((0..h).map(|y| grid[y * w + x]));
        for (y, v) in transform_1d(&line).into_iter().enumerate() {
            grid[y * w + x] = v;
        }
    }
    grid
}

fn transform_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let finite: Vec<usize> = (0..n).filter(|&i| f[i].is_finite()).collect();
    if finite.is_empty() {
        return vec![f64::INFINITY; n];
    }
    // parabola apexes and the boundaries between their envelope segments
    let mut apex: Vec<usize> = Vec::with_capacity(finite.len());
    let mut bounds: Vec<f64> = Vec::with_capacity(finite.len() + 1);
    let intersect = |q: usize, p: usize| {
        let (q, p) = (q as f64, p as f64);
        ((f[q as usize] + q * q) - (f[p as usize] + p * p)) / (2.0 * q - 2.0 * p)
    };
    for &q in &finite {
        while let Some(&p) = apex.last() {
            let s = intersect(q, p);
            if apex.len() > 1 && s <= bounds[apex.len() - 1] {
                apex.pop();
                bounds.pop();
            } else {
                bounds.push(s);
                break;
            }
        }
        if apex.is_empty() {
            bounds.clear();
            bounds.push(f64::NEG_INFINITY);
        }
        apex.push(q);
    }
    bounds.push(f64::INFINITY);
    let mut out = vec![0.0; n];
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while bounds[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - apex[k] as f64;
        *o = d * d + f[apex[k]];
    }
    out
}

/// Pooled (micro-averaged) accuracy of selected pseudo labels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PlAccuracy {
    pub selected: u64,
    pub correct: u64,
}

impl PlAccuracy {
    pub fn add(&mut self, pseudo: &Map<u8>, mask: &Map<u8>, gt: &Map<u8>) -> Result<()> {
        pseudo.ensure_same_shape(mask)?;
        pseudo.ensure_same_shape(gt)?;
        for ((&y, &m), &g) in pseudo.as_slice().iter().zip(mask.as_slice()).zip(gt.as_slice()) {
            if m != 0 {
                self.selected += 1;
                self.correct += u64::from((y != 0) == (g != 0));
            }
        }
        Ok(())
    }

    /// `None` when nothing was selected.
    pub fn value(&self) -> Option<f64> {
        (self.selected > 0).then(|| self.correct as f64 / self.selected as f64)
    }
}

/// Accuracy of selected pseudo labels for one image and class.
pub fn pl_accuracy(pseudo: &Map<u8>, mask: &Map<u8>, gt: &Map<u8>) -> Result<Option<f64>> {
    let mut acc = PlAccuracy::default();
    acc.add(pseudo, mask, gt)?;
    Ok(acc.value())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageScore {
    pub stem: String,
    pub dice: f64,
    pub asd: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Mean and population standard deviation; `None` for no values.
pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some(Summary {
        mean,
        std: var.sqrt(),
        count: values.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub name: String,
    pub scores: Vec<ImageScore>,
}

impl ClassReport {
    pub fn dice(&self) -> Summary {
        summarize(&self.scores.iter().map(|s| s.dice).collect::<Vec<_>>()).expect("report has images")
    }

    /// Summary over images with a defined ASD.
    pub fn asd(&self) -> Option<Summary> {
        summarize(&self.scores.iter().filter_map(|s| s.asd).collect::<Vec<_>>())
    }

    pub fn asd_undefined(&self) -> usize {
        self.scores.iter().filter(|s| s.asd.is_none()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub classes: Vec<ClassReport>,
}

impl EvalReport {
    /// Dice averaged over classes.
    pub fn mean_dice(&self) -> f64 {
        self.classes.iter().map(|c| c.dice().mean).sum::<f64>() / self.classes.len() as f64
    }

    /// ASD averaged over classes (each over its defined images).
    pub fn mean_asd(&self) -> f64 {
        let v: Vec<f64> = self.classes.iter().filter_map(|c| c.asd().map(|s| s.mean)).collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.classes {
            let d = c.dice();
            write!(out, "{:<5} dice {:.4} ± {:.4}", c.name, d.mean, d.std).unwrap();
            match c.asd() {
                Some(a) => write!(out, "  asd {:.3} ± {:.3} px", a.mean, a.std).unwrap(),
                None => write!(out, "  asd undefined").unwrap(),
            }
            writeln!(out, "  (n={}, asd undefined on {})", d.count, c.asd_undefined()).unwrap();
        }
        writeln!(out, "mean  dice {:.4}  asd {:.3} px", self.mean_dice(), self.mean_asd()).unwrap();
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("stem,class,dice,asd\n");
        let n = self.classes[0].scores.len();
        for i in 0..n {
            for c in &self.classes {
                let s = &c.scores[i];
                let asd = s.asd.map_or(String::new(), |a| format!("{a:.9}"));
                writeln!(out, "{},{},{:.9},{}", s.stem, c.name, s.dice, asd).unwrap();
            }
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        io::create_dir_all(dir)?;
        io::write_bytes(&dir.join("eval_report.txt"), self.to_text().as_bytes())?;
        io::write_bytes(&dir.join("eval_per_image.csv"), self.to_csv().as_bytes())
    }
}

/// Scores binary predictions against ground truth, per class and image.
pub fn evaluate_predictions(stems: &[String], preds: &[LabelMap], gts: &[LabelMap]) -> Result<EvalReport> {
    if preds.is_empty() || preds.len() != gts.len() || stems.len() != preds.len() {
        return Err(Error::Shape(format!(
            "{} stems, {} predictions, {} labels",
            stems.len(),
            preds.len(),
            gts.len()
        )));
    }
    let classes = gts[0].channels();
    let mut report = EvalReport {
        classes: (0..classes)
            .map(|k| ClassReport {
                name: CLASS_NAMES.get(k).map_or_else(|| format!("class{k}"), |s| s.to_string()),
                scores: Vec::with_capacity(preds.len()),
            })
            .collect(),
    };
    for ((stem, pred), gt) in stems.iter().zip(preds).zip(gts) {
        pred.ensure_same_shape(gt)?;
        for (k, class) in report.classes.iter_mut().enumerate() {
            let (p, g) = (pred.channel(k), gt.channel(k));
            class.scores.push(ImageScore {
                stem: stem.clone(),
                dice: dice(&p, &g)?,
                asd: asd(&p, &g)?,
            });
        }
    }
    Ok(report)
}

/// Eval-mode prediction binarized at [`EVAL_THRESHOLD`].
pub fn predict_labels(params: &ModelParams<f32>, image: &Map<f32>) -> Result<LabelMap> {
    Ok(params.predict(image)?.map(|p| u8::from(p >= EVAL_THRESHOLD)))
}

pub fn evaluate(params: &ModelParams<f32>, dataset: &Dataset) -> Result<EvalReport> {
    let preds = dataset
        .images
        .iter()
        .map(|img| predict_labels(params, img))
        .collect::<Result<Vec<_>>>()?;
    evaluate_predictions(&dataset.stems, &preds, dataset.labels()?)
}

#[cfg(test)]
mod tests;
