//! Align-corners bilinear resampling and its adjoint.
//!
//! Destination index `i` on an axis of length `n` samples the source axis
//! of length `m` at `i·(m−1)/(n−1)`. A source axis of length 1 is
//! replicated.

use crate::error::{Error, Result};
use crate::map::Map;

use super::Real;

#[derive(Debug, Clone, Copy)]
struct Tap {
    lo: usize,
    hi: usize,
    frac: f64,
}

fn taps(src: usize, dst: usize) -> Vec<Tap> {
    (0..dst)
        .map(|i| {
            if src == 1 || dst == 1 {
                return Tap { lo: 0, hi: 0, frac: 0.0 };
            }
            let s = (i * (src - 1)) as f64 / (dst - 1) as f64;
            let lo = (s.floor() as usize).min(src - 1);
            let hi = (lo + 1).min(src - 1);
            Tap { lo, hi, frac: s - lo as f64 }
        })
        .collect()
}

fn check(src: (usize, usize), dst: (usize, usize)) -> Result<()> {
    if src.0 == 0 || src.1 == 0 {
        return Err(Error::Shape("cannot upsample an empty map".into()));
    }
    if dst.0 < src.0 || dst.1 < src.1 {
        return Err(Error::Shape(format!(
            "upsample target {dst:?} smaller than source {src:?}"
        )));
    }
    Ok(())
}

pub fn bilinear_upsample<T: Real>(map: &Map<T>, h: usize, w: usize) -> Result<Map<T>> {
    let (sh, sw, c) = map.shape();
    check((sh, sw), (h, w))?;
    if (sh, sw) == (h, w) {
        return Ok(map.clone());
    }
    let ty = taps(sh, h);
    let tx = taps(sw, w);
    let one = T::one();
    Ok(Map::from_fn(h, w, c, |y, x, k| {
        let (a, b) = (ty[y], tx[x]);
        let fy = T::from(a.frac).unwrap();
        let fx = T::from(b.frac).unwrap();
        let top = map.get(a.lo, b.lo, k) * (one - fx) + map.get(a.lo, b.hi, k) * fx;
        let bottom = map.get(a.hi, b.lo, k) * (one - fx) + map.get(a.hi, b.hi, k) * fx;
        top * (one - fy) + bottom * fy
    }))
}

/// Adjoint of [`bilinear_upsample`]: scatters `grad` (`H×W×C`) back onto a
/// `src_h×src_w×C` map with the same interpolation weights.
pub fn bilinear_upsample_backward<T: Real>(grad: &Map<T>, src_h: usize, src_w: usize) -> Result<Map<T>> {
    let (h, w, c) = grad.shape();
    check((src_h, src_w), (h, w))?;
    if (src_h, src_w) == (h, w) {
        return Ok(grad.clone());
    }
    let ty = taps(src_h, h);
    let tx = taps(src_w, w);
    let one = T::one();
    let mut out = Map::zeros(src_h, src_w, c);
    for (y, a) in ty.iter().enumerate() {
        let fy = T::from(a.frac).unwrap();
        for (x, b) in tx.iter().enumerate() {
            let fx = T::from(b.frac).unwrap();
            let weights = [
                (a.lo, b.lo, (one - fy) * (one - fx)),
                (a.lo, b.hi, (one - fy) * fx),
                (a.hi, b.lo, fy * (one - fx)),
                (a.hi, b.hi, fy * fx),
            ];
            let g = grad.pixel(y, x);
            for (sy, sx, wgt) in weights {
                for (o, &gv) in out.pixel_mut(sy, sx).iter_mut().zip(g) {
                    *o += gv * wgt;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn hand_evaluated_two_by_two() {
        let m = Map::from_vec(2, 2, 1, vec![0.0f64, 1.0, 2.0, 3.0]).unwrap();
        let up = bilinear_upsample(&m, 3, 3).unwrap();
        assert_eq!(up.as_slice(), &[0.0, 0.5, 1.0, 1.0, 1.5, 2.0, 2.0, 2.5, 3.0]);
    }

    #[test]
    fn constants_and_identity() {
        let m = Map::filled(3, 5, 2, 0.7f32);
        let up = bilinear_upsample(&m, 8, 9).unwrap();
        assert!(up.as_slice().iter().all(|v| (v - 0.7).abs() < 1e-6));
        let mut rng = Rng::new(1);
        let r = Map::from_fn(4, 4, 3, |_, _, _| rng.normal());
        let same = bilinear_upsample(&r, 4, 4).unwrap();
        assert!(r.as_slice().iter().zip(same.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn single_pixel_axis_replicates() {
        let m = Map::from_vec(1, 2, 1, vec![4.0f32, 8.0]).unwrap();
        let up = bilinear_upsample(&m, 3, 3).unwrap();
        assert_eq!(up.as_slice(), &[4.0, 6.0, 8.0, 4.0, 6.0, 8.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn shrinking_or_empty_is_an_error() {
        let m = Map::filled(4, 4, 1, 0.0f32);
        assert!(bilinear_upsample(&m, 3, 4).is_err());
        assert!(bilinear_upsample(&Map::<f32>::zeros(0, 4, 1), 4, 4).is_err());
    }

    #[test]
    fn backward_is_the_adjoint() {
        // <up(x), g> == <x, up^T(g)> for random x, g
        let mut rng = Rng::new(2);
        let x = Map::from_fn(4, 5, 2, |_, _, _| f64::from(rng.normal()));
        let g = Map::from_fn(8, 10, 2, |_, _, _| f64::from(rng.normal()));
        let up = bilinear_upsample(&x, 8, 10).unwrap();
        let back = bilinear_upsample_backward(&g, 4, 5).unwrap();
        let lhs: f64 = up.as_slice().iter().zip(g.as_slice()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.as_slice().iter().zip(back.as_slice()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }
}
