//! Contour overlays and uncertainty heatmaps for a few target images.
//!
//!     cargo run --release --example render -- [out_dir]

use std::path::PathBuf;

use dpl::pipeline::{gen_data, render, train_source, RunConfig, Split};

fn main() -> dpl::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("dpl_render"));
    let mut cfg = RunConfig {
        n_source: 32,
        n_target_train: 4,
        n_target_test: 4,
        force: true,
        ..RunConfig::default()
    };
    cfg.train.source_epochs = 6;
    cfg.out = Some(out.join("data"));
    gen_data(&cfg)?;

    cfg.data = Some(out.join("data").join(Split::Source.dir_name()));
    cfg.out = Some(out.join("source"));
    train_source(&cfg)?;

    cfg.model = cfg.out.take();
    cfg.data = Some(out.join("data").join(Split::TargetTest.dir_name()));
    cfg.out = Some(out.join("figures"));
    let summary = render(&cfg)?;
    println!("{} overlays and heatmaps in {}", summary.images, out.join("figures").display());
    Ok(())
}
