use super::*;
use crate::rng::Rng;
use proptest::prelude::*;

fn random_prob(rng: &mut Rng, h: usize, w: usize, c: usize) -> ProbMap {
    Map::from_fn(h, w, c, |_, _, _| rng.next_f32())
}

fn random_binary(rng: &mut Rng, h: usize, w: usize, c: usize) -> Map<u8> {
    Map::from_fn(h, w, c, |_, _, _| u8::from(rng.bernoulli(0.5)))
}

#[test]
fn threshold_is_inclusive() {
    let p = Map::from_vec(1, 2, 1, vec![0.75f32, 0.7499]).unwrap();
    assert_eq!(gen_pseudo_labels(&p, 0.75).as_slice(), &[1, 0]);
}

#[test]
fn pseudo_labels_match_elementwise_comparison() {
    let mut rng = Rng::new(1);
    let p = random_prob(&mut rng, 4, 4, 2);
    let y = gen_pseudo_labels(&p, 0.75);
    for (a, b) in p.as_slice().iter().zip(y.as_slice()) {
        assert_eq!(*b == 1, *a >= 0.75);
    }
}

#[test]
fn bce_values() {
    let p = Map::from_vec(1, 3, 1, vec![0.5f64, 1.0 - 1e-7, 0.9]).unwrap();
    let y = Map::from_vec(1, 3, 1, vec![1u8, 1, 0]).unwrap();
    let (loss, grad) = bce_per_pixel(&p, &y).unwrap();
    assert!((loss.get(0, 0, 0) - std::f64::consts::LN_2).abs() < 1e-12);
    assert!(loss.get(0, 1, 0) < 1e-6);
    assert!((loss.get(0, 2, 0) - 2.302585).abs() < 1e-6);
    assert!((grad.get(0, 0, 0) + 2.0).abs() < 1e-12);
    // clamped at the extremes, never infinite
    let p = Map::from_vec(1, 2, 1, vec![0.0f32, 1.0]).unwrap();
    let y = Map::from_vec(1, 2, 1, vec![1u8, 0]).unwrap();
    let (loss, grad) = bce_per_pixel(&p, &y).unwrap();
    assert!(loss.as_slice().iter().chain(grad.as_slice()).all(|v| v.is_finite()));
}

#[test]
fn uncertainty_examples() {
    let same = vec![Map::filled(2, 2, 2, 0.3f32); 5];
    assert!(uncertainty(&same).unwrap().as_slice().iter().all(|&v| v == 0.0));
    let a = Map::filled(1, 1, 1, 0.2f32);
    let b = Map::filled(1, 1, 1, 0.8f32);
    let u = uncertainty(&[a.clone(), b]).unwrap();
    assert!((u.get(0, 0, 0) - 0.3).abs() < 1e-7);
    assert!(uncertainty(&[a.clone()]).is_err());
    assert!(uncertainty(&[a, Map::filled(1, 2, 1, 0.0)]).is_err());
}

#[test]
fn pixel_mask_is_strict() {
    let u = Map::from_vec(1, 3, 1, vec![0.0f32, 0.05, 0.0499]).unwrap();
    assert_eq!(pixel_mask(&u, 0.05).as_slice(), &[1, 0, 1]);
}

#[test]
fn class_mask_examples() {
    let y = Map::from_vec(1, 2, 1, vec![1u8, 0]).unwrap();
    let u = Map::from_vec(1, 2, 1, vec![0.0f32, 0.1]).unwrap();
    let (obj, bg) = class_masks(&y, &u, 0.05).unwrap();
    assert_eq!(obj.as_slice(), &[1, 0]);
    assert_eq!(bg.as_slice(), &[0, 0]);
}

#[test]
fn single_pixel_prototype_is_that_feature() {
    let e = Map::from_fn(2, 2, 4, |y, x, k| (y * 2 + x) as f32 * 10.0 + k as f32 + 1.0);
    let p = Map::from_vec(2, 2, 1, vec![0.9f32, 0.3, 0.2, 0.1]).unwrap();
    let obj = Map::from_vec(2, 2, 1, vec![1u8, 0, 0, 0]).unwrap();
    let bg = Map::from_vec(2, 2, 1, vec![0u8, 0, 0, 1]).unwrap();
    let z = prototypes(&e, &obj, &bg, &p).unwrap();
    assert_eq!(z.obj[0].as_deref(), Some(&[1.0, 2.0, 3.0, 4.0][..]));
    assert_eq!(z.bg[0].as_deref(), Some(&[31.0, 32.0, 33.0, 34.0][..]));
}

#[test]
fn two_pixel_prototype_is_weighted_mean() {
    let e = Map::from_fn(1, 2, 3, |_, x, _| 2.0 * x as f32);
    let p = Map::filled(1, 2, 1, 0.8f32);
    let obj = Map::filled(1, 2, 1, 1u8);
    let z = prototypes(&e, &obj, &Map::zeros(1, 2, 1), &p).unwrap();
    for v in z.obj[0].as_ref().unwrap() {
        assert!((v - 1.0).abs() < 1e-6);
    }
    assert!(z.bg[0].is_none());
    assert!(z.is_degenerate(0));
}

#[test]
fn distance_examples() {
    let e = Map::from_vec(1, 2, 4, vec![1.0f32, 1.0, 1.0, 1.0, 4.0, 5.0, 1.0, 1.0]).unwrap();
    let z = Prototypes {
        obj: vec![Some(vec![1.0; 4])],
        bg: vec![Some(vec![0.0; 4])],
    };
    let d = feature_distances(&e, &z);
    assert_eq!(d.d_obj.get(0, 0, 0), 0.0);
    assert!((d.d_obj.get(0, 1, 0) - 5.0).abs() < 1e-6);
    assert!((d.d_bg.get(0, 0, 0) - 2.0).abs() < 1e-6);
    assert_eq!(d.defined, vec![true]);
}

fn single(u: f32, y: u8, d_obj: f32, d_bg: f32) -> u8 {
    let one = |v: f32| Map::filled(1, 1, 1, v);
    let d = DistanceMaps {
        d_obj: one(d_obj),
        d_bg: one(d_bg),
        defined: vec![true],
    };
    combined_mask(&one(u), 0.05, &Map::filled(1, 1, 1, y), &d)
        .unwrap()
        .get(0, 0, 0)
}

#[test]
fn combined_mask_examples() {
    assert_eq!(single(0.01, 1, 0.5, 1.0), 1);
    assert_eq!(single(0.01, 1, 0.7, 0.7), 0);
    assert_eq!(single(0.01, 0, 1.0, 0.5), 1);
    assert_eq!(single(0.05, 0, 1.0, 0.5), 0);
}

#[test]
fn degenerate_class_falls_back_to_pixel_mask() {
    let u = Map::from_vec(1, 2, 1, vec![0.0f32, 0.2]).unwrap();
    let d = DistanceMaps {
        d_obj: Map::zeros(1, 2, 1),
        d_bg: Map::zeros(1, 2, 1),
        defined: vec![false],
    };
    let m = combined_mask(&u, 0.05, &Map::zeros(1, 2, 1), &d).unwrap();
    assert_eq!(m, pixel_mask(&u, 0.05));
}

#[test]
fn masked_loss_reductions() {
    let p = Map::from_vec(1, 2, 1, vec![0.5f64, 0.25]).unwrap();
    let y = Map::from_vec(1, 2, 1, vec![1u8, 1]).unwrap();
    // losses ln 2 and 2 ln 2
    let m = Map::from_vec(1, 2, 1, vec![1u8, 0]).unwrap();
    let out = masked_loss(&p, &y, &m).unwrap();
    assert!((out.loss - std::f64::consts::LN_2).abs() < 1e-12);
    assert_eq!(out.grad.get(0, 1, 0), 0.0);
    assert_eq!(out.selected, 1);

    let all = masked_loss(&p, &y, &Map::filled(1, 2, 1, 1)).unwrap();
    assert!((all.loss - 1.5 * std::f64::consts::LN_2).abs() < 1e-12);

    let none = masked_loss(&p, &y, &Map::zeros(1, 2, 1)).unwrap();
    assert_eq!(none.loss, 0.0);
    assert!(none.is_empty());
    assert!(none.grad.as_slice().iter().all(|&g| g == 0.0));
}

#[test]
fn masked_loss_gradient_matches_finite_differences() {
    let mut rng = Rng::new(4);
    let p = Map::from_fn(3, 3, 2, |_, _, _| 0.05 + 0.9 * f64::from(rng.next_f32()));
    let y = random_binary(&mut rng, 3, 3, 2);
    let m = random_binary(&mut rng, 3, 3, 2);
    let out = masked_loss(&p, &y, &m).unwrap();
    let h = 1e-6;
    for i in 0..p.as_slice().len() {
        let mut up = p.clone();
        up.as_mut_slice()[i] += h;
        let mut down = p.clone();
        down.as_mut_slice()[i] -= h;
        let fd = (masked_loss(&up, &y, &m).unwrap().loss - masked_loss(&down, &y, &m).unwrap().loss) / (2.0 * h);
        assert!((fd - out.grad.as_slice()[i]).abs() < 1e-6);
    }
}

#[test]
fn mode_parsing() {
    for m in DenoiseMode::ALL {
        assert_eq!(m.as_str().parse::<DenoiseMode>().unwrap(), m);
    }
    assert!("fancy".parse::<DenoiseMode>().is_err());
}

#[test]
fn select_modes() {
    let mut rng = Rng::new(3);
    let p = random_prob(&mut rng, 6, 6, 2);
    let e = Map::from_fn(6, 6, 4, |_, _, _| rng.normal());
    let u = Map::from_fn(6, 6, 2, |_, _, _| 0.1 * rng.next_f32());
    let plain = select(DenoiseMode::Plain, &p, &e, None, 0.75, 0.05).unwrap();
    assert_eq!(plain.mask.count_ones(), 72);
    let pixel = select(DenoiseMode::Pixel, &p, &e, Some(&u), 0.75, 0.05).unwrap();
    assert_eq!(pixel.mask, pixel_mask(&u, 0.05));
    let full = select(DenoiseMode::Full, &p, &e, Some(&u), 0.75, 0.05).unwrap();
    assert!(full.mask.as_slice().iter().zip(pixel.mask.as_slice()).all(|(a, b)| a <= b));
    let class = select(DenoiseMode::Class, &p, &e, None, 0.75, 0.05).unwrap();
    let no_gate = select(DenoiseMode::Full, &p, &e, Some(&Map::zeros(6, 6, 2)), 0.75, 1.0).unwrap();
    assert_eq!(class.mask, no_gate.mask);
    assert!(select(DenoiseMode::Full, &p, &e, None, 0.75, 0.05).is_err());
}

fn instance(seed: u64) -> (UncertaintyMap, LabelMap, Map<f32>, ProbMap) {
    let mut rng = Rng::new(seed);
    let (h, w) = (1 + rng.below(6), 1 + rng.below(6));
    let u = Map::from_fn(h, w, 2, |_, _, _| 0.1 * rng.next_f32());
    let y = random_binary(&mut rng, h, w, 2);
    let e = Map::from_fn(h, w, 3, |_, _, _| rng.normal());
    let p = random_prob(&mut rng, h, w, 2);
    (u, y, e, p)
}

proptest! {
    #[test]
    fn partition_and_monotonicity(seed: u64) {
        let (u, y, e, p) = instance(seed);
        let (obj, bg) = class_masks(&y, &u, 0.05).unwrap();
        let pm = pixel_mask(&u, 0.05);
        for ((a, b), m) in obj.as_slice().iter().zip(bg.as_slice()).zip(pm.as_slice()) {
            prop_assert!(a & b == 0);
            prop_assert_eq!(a + b, *m);
        }
        let d = feature_distances(&e, &prototypes(&e, &obj, &bg, &p).unwrap());
        let cm = combined_mask(&u, 0.05, &y, &d).unwrap();
        prop_assert!(cm.as_slice().iter().zip(pm.as_slice()).all(|(a, b)| a <= b));
        // idempotent
        prop_assert_eq!(&cm, &combined_mask(&u, 0.05, &y, &d).unwrap());
        prop_assert_eq!(pm, pixel_mask(&u, 0.05));
    }

    #[test]
    fn positive_feature_scaling_keeps_the_mask(seed: u64, scale in 0.1f32..10.0) {
        let (u, y, e, p) = instance(seed);
        let (obj, bg) = class_masks(&y, &u, 0.05).unwrap();
        let z = prototypes(&e, &obj, &bg, &p).unwrap();
        let scaled_z = Prototypes {
            obj: z.obj.iter().map(|v| v.as_ref().map(|v| v.iter().map(|x| x * scale).collect())).collect(),
            bg: z.bg.iter().map(|v| v.as_ref().map(|v| v.iter().map(|x| x * scale).collect())).collect(),
        };
        let a = combined_mask(&u, 0.05, &y, &feature_distances(&e, &z)).unwrap();
        let b = combined_mask(&u, 0.05, &y, &feature_distances(&e.map(|v| v * scale), &scaled_z)).unwrap();
        // exact ties can split under rounding; none occur for continuous draws
        prop_assert_eq!(a, b);
    }
}
