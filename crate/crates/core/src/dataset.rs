//! Dataset directories: `manifest.txt`, `<stem>.ppm`, `<stem>.<class>.pgm`.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io;
use crate::map::{Image, LabelMap, Map};
use crate::synth::CLASS_NAMES;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub stems: Vec<String>,
    pub images: Vec<Image>,
    /// Ground truth; absent when loaded for source-free adaptation.
    pub labels: Option<Vec<LabelMap>>,
}

pub fn read_manifest(dir: &Path) -> Result<Vec<String>> {
    let path = dir.join("manifest.txt");
    if !path.exists() {
        return Err(Error::Missing(path));
    }
    let stems: Vec<String> = io::read_text(&path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    if stems.is_empty() {
        return Err(Error::format(&path, "empty manifest"));
    }
    Ok(stems)
}

fn read_label(dir: &Path, stem: &str) -> Result<LabelMap> {
    let channels = CLASS_NAMES
        .iter()
        .map(|name| {
            let path = dir.join(format!("{stem}.{name}.pgm"));
            if !path.exists() {
                return Err(Error::Missing(path));
            }
            io::read_mask_pgm(&path)
        })
        .collect::<Result<Vec<_>>>()?;
    stack_channels(&channels)
}

/// Stacks single-channel masks into one multi-channel map.
pub fn stack_channels(channels: &[Map<u8>]) -> Result<LabelMap> {
    let (h, w, _) = channels[0].shape();
    for c in channels {
        if c.shape() != (h, w, 1) {
            return Err(Error::Shape(format!("mask {:?} vs {:?}", c.shape(), (h, w, 1))));
        }
    }
    Ok(Map::from_fn(h, w, channels.len(), |y, x, k| channels[k].get(y, x, 0)))
}

impl Dataset {
    /// Images and ground-truth labels.
    pub fn load(dir: &Path) -> Result<Self> {
        let mut ds = Self::load_unlabeled(dir)?;
        let labels = ds
            .stems
            .iter()
            .map(|stem| read_label(dir, stem))
            .collect::<Result<Vec<_>>>()?;
        for (img, label) in ds.images.iter().zip(&labels) {
            if (img.height(), img.width()) != (label.height(), label.width()) {
                return Err(Error::Shape(format!("label/image mismatch in {}", dir.display())));
            }
        }
        ds.labels = Some(labels);
        Ok(ds)
    }

    /// Images only.
    pub fn load_unlabeled(dir: &Path) -> Result<Self> {
        let stems = read_manifest(dir)?;
        let images = stems
            .iter()
            .map(|stem| {
                let path = dir.join(format!("{stem}.ppm"));
                if !path.exists() {
                    return Err(Error::Missing(path));
                }
                io::read_image_ppm(&path)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            dir: dir.to_path_buf(),
            stems,
            images,
            labels: None,
        })
    }

    pub fn len(&self) -> usize {
        self.stems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stems.is_empty()
    }

    pub fn labels(&self) -> Result<&[LabelMap]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::Config(format!("dataset {} was loaded without labels", self.dir.display())))
    }

    pub fn image_size(&self) -> (usize, usize) {
        (self.images[0].height(), self.images[0].width())
    }
}
