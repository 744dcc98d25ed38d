use crate::map::Image;
use crate::rng::Rng;

use super::AugmentConfig;

/// Axis-aligned rectangle `[y0, y0+h) × [x0, x0+w)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub y0: usize,
    pub x0: usize,
    pub h: usize,
    pub w: usize,
}

/// Which perturbations a call to [`weak_augment_traced`] applied.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AugmentTrace {
    pub noise: bool,
    pub contrast: Option<f32>,
    pub erased: Option<Rect>,
}

/// Gaussian noise, contrast about 0.5 and random erasing, each applied
/// independently with probability `cfg.prob`, then clamped to `[0,1]`.
pub fn weak_augment(rng: &mut Rng, image: &Image, cfg: &AugmentConfig) -> Image {
    weak_augment_traced(rng, image, cfg).0
}

pub fn weak_augment_traced(rng: &mut Rng, image: &Image, cfg: &AugmentConfig) -> (Image, AugmentTrace) {
    let do_noise = rng.next_f32() < cfg.prob;
    let do_contrast = rng.next_f32() < cfg.prob;
    let do_erase = rng.next_f32() < cfg.prob;
    let mut trace = AugmentTrace::default();
    let mut out = image.clone();

    if do_noise {
        for v in out.as_mut_slice() {
            *v += cfg.noise_sigma * rng.normal();
        }
        trace.noise = true;
    }
    if do_contrast {
        let f = rng.uniform(cfg.contrast.0, cfg.contrast.1);
        for v in out.as_mut_slice() {
            *v = 0.5 + f * (*v - 0.5);
        }
        trace.contrast = Some(f);
    }
    for v in out.as_mut_slice() {
        *v = v.clamp(0.0, 1.0);
    }
    if do_erase {
        let (h, w, c) = out.shape();
        let area = rng.uniform(cfg.erase_area.0, cfg.erase_area.1) * (h * w) as f32;
        let aspect = rng.uniform(0.5, 2.0);
        let rh = ((area * aspect).sqrt().round() as usize).clamp(1, h);
        let rw = ((area / rh as f32).round() as usize).clamp(1, w);
        let y0 = rng.below(h - rh + 1);
        let x0 = rng.below(w - rw + 1);
        let mut mean = vec![0.0f64; c];
        for px in out.as_slice().chunks_exact(c) {
            mean.iter_mut().zip(px).for_each(|(m, &v)| *m += f64::from(v));
        }
        let fill: Vec<f32> = mean.iter().map(|m| (m / (h * w) as f64) as f32).collect();
        for y in y0..y0 + rh {
            for x in x0..x0 + rw {
                out.pixel_mut(y, x).copy_from_slice(&fill);
            }
        }
        trace.erased = Some(Rect { y0, x0, h: rh, w: rw });
    }
    (out, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::Map;

    fn image(seed: u64) -> Image {
        let mut rng = Rng::new(seed);
        Map::from_fn(64, 64, 3, |_, _, _| rng.next_f32())
    }

    #[test]
    fn all_off_is_identity() {
        let seed = (0..)
            .find(|&s| {
                let mut r = Rng::new(s);
                (0..3).all(|_| r.next_f32() >= 0.5)
            })
            .unwrap();
        let img = image(1);
        let (out, trace) = weak_augment_traced(&mut Rng::new(seed), &img, &AugmentConfig::default());
        assert_eq!(out, img);
        assert_eq!(trace, AugmentTrace::default());
    }

    #[test]
    fn output_stays_in_range() {
        let img = image(2);
        let cfg = AugmentConfig {
            prob: 1.0,
            noise_sigma: 0.5,
            ..AugmentConfig::default()
        };
        let mut rng = Rng::new(3);
        for _ in 0..20 {
            let out = weak_augment(&mut rng, &img, &cfg);
            assert!(out.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn erase_leaves_one_constant_rectangle_of_bounded_area() {
        let img = image(4);
        let cfg = AugmentConfig {
            prob: 1.0,
            noise_sigma: 0.0,
            contrast: (1.0, 1.0),
            ..AugmentConfig::default()
        };
        let mut rng = Rng::new(5);
        for _ in 0..50 {
            let (out, trace) = weak_augment_traced(&mut rng, &img, &cfg);
            let r = trace.erased.unwrap();
            let frac = (r.h * r.w) as f32 / (64.0 * 64.0);
            // rounding of the sides moves the area by at most one row/column
            assert!(frac > 0.02 - 0.03 && frac < 0.10 + 0.03, "area fraction {frac}");
            let fill = out.pixel(r.y0, r.x0).to_vec();
            for y in 0..64 {
                for x in 0..64 {
                    let inside = (r.y0..r.y0 + r.h).contains(&y) && (r.x0..r.x0 + r.w).contains(&x);
                    if inside {
                        assert_eq!(out.pixel(y, x), &fill[..]);
                    } else {
                        assert_eq!(out.pixel(y, x), img.pixel(y, x));
                    }
                }
            }
        }
    }
}
