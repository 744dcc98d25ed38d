//! Writes a few source and target samples and prints per-channel means,
//! showing the appearance shift between the two domains.
//!
//!     cargo run --example generate_domains -- [out_dir]

use std::path::PathBuf;

use dpl::dataset::Dataset;
use dpl::pipeline::Split;

fn channel_means(ds: &Dataset) -> [f64; 3] {
    let mut sum = [0.0f64; 3];
    let mut n = 0usize;
    for img in &ds.images {
        for px in img.as_slice().chunks_exact(3) {
            for (s, v) in sum.iter_mut().zip(px) {
                *s += f64::from(*v);
            }
            n += 1;
        }
    }
    sum.map(|s| s / n as f64)
}

fn main() -> dpl::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("dpl_domains"));
    for split in [Split::Source, Split::TargetTrain] {
        let dir = split.generate(42, 8, 64, &out)?;
        let ds = Dataset::load(&dir)?;
        let fg: usize = ds.labels()?.iter().map(|l| l.channel(0).count_ones()).sum();
        let m = channel_means(&ds);
        println!(
            "{:<12} {} images  rgb mean {:.3} {:.3} {:.3}  disc pixels/image {:.0}",
            split.dir_name(),
            ds.len(),
            m[0],
            m[1],
            m[2],
            fg as f64 / ds.len() as f64
        );
    }
    println!("written under {}", out.display());
    Ok(())
}
