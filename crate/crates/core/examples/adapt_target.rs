//! Source training, one-shot pseudo labels, then self-training on the target
//! with the full denoising mode. Only target images reach the adaptation.
//!
//!     cargo run --release --example adapt_target

use dpl::adapt::{adapt, prepare_pseudo_labels, train_source, TrainConfig};
use dpl::dataset::Dataset;
use dpl::metrics::evaluate;
use dpl::pipeline::Split;

fn main() -> dpl::Result<()> {
    let root = tempfile::tempdir().expect("temp dir");
    let source = Dataset::load(&Split::Source.generate(5, 64, 64, root.path())?)?;
    let target_train = Dataset::load_unlabeled(&Split::TargetTrain.generate(5, 24, 64, root.path())?)?;
    let target_test = Dataset::load(&Split::TargetTest.generate(5, 16, 64, root.path())?)?;

    let cfg = TrainConfig {
        source_epochs: 10,
        seed: 5,
        ..TrainConfig::default()
    };
    let (model, _) = train_source(&source, &cfg, None)?;
    drop(source);

    let pseudo = prepare_pseudo_labels(&model, &target_train, &cfg)?;
    print!("{}", pseudo.diagnostics());
    let adapted = adapt(&model, &target_train, &pseudo, &cfg)?;
    for row in &adapted.log.rows {
        println!("epoch {} batch {} loss {:.4}", row.epoch, row.batch, row.loss);
    }
    print!("before\n{}", evaluate(&model, &target_test)?.to_text());
    print!("after\n{}", evaluate(&adapted.params, &target_test)?.to_text());
    Ok(())
}
