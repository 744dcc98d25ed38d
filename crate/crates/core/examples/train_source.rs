//! Trains the segmentation network on a small source set and scores it on
//! held-out source and on target images.
//!
//!     cargo run --release --example train_source

use dpl::adapt::{train_source, TrainConfig};
use dpl::dataset::Dataset;
use dpl::metrics::evaluate;
use dpl::pipeline::Split;

fn main() -> dpl::Result<()> {
    let root = tempfile::tempdir().expect("temp dir");
    let load = |split: Split, n| Dataset::load(&split.generate(7, n, 64, root.path())?);
    let source = load(Split::Source, 48)?;
    let held_out = load(Split::SourceHeldOut, 16)?;
    let target = load(Split::TargetTest, 16)?;

    let cfg = TrainConfig {
        source_epochs: 8,
        seed: 7,
        ..TrainConfig::default()
    };
    let (model, log) = train_source(&source, &cfg, None)?;
    for e in 0..cfg.source_epochs {
        println!("epoch {e}  loss {:.4}", log.epoch_loss(e).unwrap());
    }
    print!("held-out source\n{}", evaluate(&model, &held_out)?.to_text());
    print!("target\n{}", evaluate(&model, &target)?.to_text());
    Ok(())
}
