//! The four denoising modes from one shared source model, through the staged
//! pipeline (artifacts on disk).
//!
//!     cargo run --release --example ablation -- [out_dir]

use std::path::PathBuf;

use dpl::pipeline::{ablate, gen_data, RunConfig};

fn main() -> dpl::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("dpl_ablation"));
    let mut cfg = RunConfig {
        n_source: 48,
        n_target_train: 24,
        n_target_test: 16,
        force: true,
        ..RunConfig::default()
    };
    cfg.train.source_epochs = 8;
    cfg.out = Some(out.join("data"));
    gen_data(&cfg)?;

    cfg.data = cfg.out.take();
    cfg.out = Some(out.join("ablation"));
    let table = ablate(&cfg)?;
    print!("{}", table.to_text());
    println!("artifacts under {}", out.display());
    Ok(())
}
