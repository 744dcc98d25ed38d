use super::*;
use crate::rng::Rng;
use proptest::prelude::*;

fn mask(h: usize, w: usize, pts: &[(usize, usize)]) -> Map<u8> {
    let mut m = Map::zeros(h, w, 1);
    for &(y, x) in pts {
        m.set(y, x, 0, 1);
    }
    m
}

fn random_mask(rng: &mut Rng, h: usize, w: usize, density: f32) -> Map<u8> {
    Map::from_fn(h, w, 1, |_, _, _| u8::from(rng.bernoulli(density)))
}

/// All-pairs boundary distances.
fn brute_asd(a: &Map<u8>, b: &Map<u8>) -> Option<f64> {
    let (ba, bb) = (boundary(a), boundary(b));
    if ba.is_empty() || bb.is_empty() {
        return None;
    }
    let directed = |from: &[(usize, usize)], to: &[(usize, usize)]| {
        from.iter()
            .map(|&(y, x)| {
                to.iter()
                    .map(|&(v, u)| ((y as f64 - v as f64).powi(2) + (x as f64 - u as f64).powi(2)).sqrt())
                    .fold(f64::INFINITY, f64::min)
            })
            .sum::<f64>()
            / from.len() as f64
    };
    Some(0.5 * (directed(&ba, &bb) + directed(&bb, &ba)))
}

#[test]
fn dice_examples() {
    let a = mask(4, 4, &[(0, 0), (0, 1), (1, 0), (1, 1)]);
    let b = mask(4, 4, &[(0, 0), (0, 1), (3, 2), (3, 3)]);
    let c = mask(4, 4, &[(3, 0)]);
    assert_eq!(dice(&a, &a).unwrap(), 1.0);
    assert_eq!(dice(&a, &c).unwrap(), 0.0);
    assert_eq!(dice(&a, &b).unwrap(), 0.5);
    assert_eq!(dice(&Map::zeros(3, 3, 1), &Map::zeros(3, 3, 1)).unwrap(), 1.0);
    assert_eq!(dice(&Map::zeros(4, 4, 1), &a).unwrap(), 0.0);
    assert!(dice(&a, &Map::zeros(3, 4, 1)).is_err());
}

#[test]
fn asd_examples() {
    let a = mask(5, 8, &[(2, 1)]);
    let b = mask(5, 8, &[(2, 4)]);
    assert_eq!(asd(&a, &b).unwrap(), Some(3.0));
    assert_eq!(asd(&a, &a).unwrap(), Some(0.0));
    assert_eq!(asd(&a, &Map::zeros(5, 8, 1)).unwrap(), None);
}

#[test]
fn boundary_treats_border_as_background() {
    let full = Map::filled(3, 3, 1, 1u8);
    let b = boundary(&full);
    assert_eq!(b.len(), 8);
    assert!(!b.contains(&(1, 1)));
}

#[test]
fn asd_matches_all_pairs_oracle() {
    let mut rng = Rng::new(77);
    for _ in 0..150 {
        let h = 1 + rng.below(32);
        let w = 1 + rng.below(32);
        let density = rng.uniform(0.02, 0.9);
        let a = random_mask(&mut rng, h, w, density);
        let b = random_mask(&mut rng, h, w, density);
        let got = asd(&a, &b).unwrap();
        let want = brute_asd(&a, &b);
        match (got, want) {
            (Some(g), Some(w)) => assert!((g - w).abs() <= 1e-9, "{g} vs {w}"),
            (g, w) => assert_eq!(g, w),
        }
    }
}

#[test]
fn pl_accuracy_examples() {
    let gt = mask(2, 2, &[(0, 0), (0, 1)]);
    assert_eq!(pl_accuracy(&gt, &Map::filled(2, 2, 1, 1), &gt).unwrap(), Some(1.0));
    let pseudo = mask(2, 2, &[(0, 0), (1, 0)]);
    // (0,0) right, (0,1) wrong, (1,0) wrong, (1,1) right
    assert_eq!(pl_accuracy(&pseudo, &Map::filled(2, 2, 1, 1), &gt).unwrap(), Some(0.5));
    assert_eq!(pl_accuracy(&pseudo, &Map::zeros(2, 2, 1), &gt).unwrap(), None);
}

#[test]
fn ground_truth_predictions_score_perfectly() {
    let mut rng = Rng::new(5);
    let gts: Vec<LabelMap> = (0..3)
        .map(|_| crate::synth::gen_sample(&mut rng, &crate::synth::default_source_params(), 32, 32).label)
        .collect();
    let stems: Vec<String> = (0..3).map(crate::synth::stem).collect();
    let report = evaluate_predictions(&stems, &gts, &gts).unwrap();
    for c in &report.classes {
        assert_eq!(c.dice().mean, 1.0);
        assert_eq!(c.asd().unwrap().mean, 0.0);
    }
    let empty: Vec<LabelMap> = gts.iter().map(|g| Map::zeros(g.height(), g.width(), 2)).collect();
    let report = evaluate_predictions(&stems, &empty, &gts).unwrap();
    for c in &report.classes {
        assert_eq!(c.dice().mean, 0.0);
        assert!(c.asd().is_none());
        assert_eq!(c.asd_undefined(), 3);
    }
}

#[test]
fn report_summary_recomputes_from_csv() {
    let mut rng = Rng::new(6);
    let gts: Vec<LabelMap> = (0..5).map(|_| Map::from_fn(16, 16, 2, |_, _, _| u8::from(rng.bernoulli(0.4)))).collect();
    let preds: Vec<LabelMap> = (0..5).map(|_| Map::from_fn(16, 16, 2, |_, _, _| u8::from(rng.bernoulli(0.4)))).collect();
    let stems: Vec<String> = (0..5).map(crate::synth::stem).collect();
    let report = evaluate_predictions(&stems, &preds, &gts).unwrap();
    let csv = report.to_csv();
    for class in &report.classes {
        let dices: Vec<f64> = csv
            .lines()
            .skip(1)
            .map(|l| l.split(',').collect::<Vec<_>>())
            .filter(|f| f[1] == class.name)
            .map(|f| f[2].parse().unwrap())
            .collect();
        let n = dices.len() as f64;
        let mean = dices.iter().sum::<f64>() / n;
        let std = (dices.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n).sqrt();
        let s = class.dice();
        assert!((s.mean - mean).abs() < 1e-6);
        assert!((s.std - std).abs() < 1e-6);
    }
}

fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() < 1e-12,
        (x, y) => x == y,
    }
}

proptest! {
    #[test]
    fn symmetric_and_translation_invariant(seed: u64, dy in 0usize..4, dx in 0usize..4) {
        let mut rng = Rng::new(seed);
        let a = random_mask(&mut rng, 12, 12, 0.3);
        let b = random_mask(&mut rng, 12, 12, 0.3);
        prop_assert_eq!(dice(&a, &b).unwrap(), dice(&b, &a).unwrap());
        let ab = asd(&a, &b).unwrap();
        let ba = asd(&b, &a).unwrap();
        prop_assert!(close(ab, ba));
        // embed both in a larger canvas with a margin so borders do not move
        let embed = |m: &Map<u8>, oy: usize, ox: usize| {
            let mut out = Map::zeros(20, 20, 1);
            for y in 0..12 { for x in 0..12 { out.set(y + oy, x + ox, 0, m.get(y, x, 0)); } }
            out
        };
        let (a0, b0) = (embed(&a, 2, 2), embed(&b, 2, 2));
        let (a1, b1) = (embed(&a, 2 + dy, 2 + dx), embed(&b, 2 + dy, 2 + dx));
        prop_assert_eq!(dice(&a0, &b0).unwrap(), dice(&a1, &b1).unwrap());
        let (s0, s1) = (asd(&a0, &b0).unwrap(), asd(&a1, &b1).unwrap());
        prop_assert!(close(s0, s1));
        if a.count_ones() > 0 {
            prop_assert_eq!(dice(&a, &a).unwrap(), 1.0);
            prop_assert_eq!(asd(&a, &a).unwrap(), Some(0.0));
        }
    }
}
