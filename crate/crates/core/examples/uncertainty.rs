//! MC-dropout uncertainty and the selection masks of the four denoising modes
//! on one target image.
//!
//!     cargo run --release --example uncertainty

use dpl::adapt::{train_source, TrainConfig};
use dpl::dataset::Dataset;
use dpl::denoise::{select, uncertainty, DenoiseMode};
use dpl::net::{bilinear_upsample, mc_passes, Mode};
use dpl::pipeline::Split;
use dpl::synth::CLASS_NAMES;
use dpl::Rng;

fn main() -> dpl::Result<()> {
    let root = tempfile::tempdir().expect("temp dir");
    let source = Dataset::load(&Split::Source.generate(3, 32, 64, root.path())?)?;
    let target = Dataset::load(&Split::TargetTrain.generate(3, 1, 64, root.path())?)?;
    let cfg = TrainConfig {
        source_epochs: 6,
        ..TrainConfig::default()
    };
    let (model, _) = train_source(&source, &cfg, None)?;

    let image = &target.images[0];
    let gt = &target.labels()?[0];
    let out = model.forward(image, Mode::Eval)?;
    let features = bilinear_upsample(&out.features, 64, 64)?;
    let passes = mc_passes(&model, image, cfg.mc_passes, &mut Rng::new(1))?;
    let u = uncertainty(&passes)?;
    let max_u = u.as_slice().iter().cloned().fold(0.0f32, f32::max);
    println!("max uncertainty {max_u:.4}  eta {}", cfg.eta);

    for mode in DenoiseMode::ALL {
        let sel = select(mode, &out.prob, &features, Some(&u), cfg.gamma, cfg.eta)?;
        for (k, name) in CLASS_NAMES.iter().enumerate() {
            let (m, y, g) = (sel.mask.channel(k), sel.pseudo.channel(k), gt.channel(k));
            let picked = m.count_ones();
            let correct = (0..m.as_slice().len())
                .filter(|&i| m.as_slice()[i] == 1 && y.as_slice()[i] == g.as_slice()[i])
                .count();
            println!(
                "{:<5} {name:<4} selected {:5}/{}  correct {:.3}  degenerate {}",
                mode.as_str(),
                picked,
                m.as_slice().len(),
                correct as f64 / picked.max(1) as f64,
                sel.degenerate[k]
            );
        }
    }
    Ok(())
}
