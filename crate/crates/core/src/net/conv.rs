//! Same-padded stride-1 convolution over channel-last maps.
//!
//! Weights are laid out `[k][k][cin][cout]` so the innermost loop runs over
//! output channels on contiguous memory.

use crate::map::Map;

use super::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Conv<T> {
    pub kernel: usize,
    pub cin: usize,
    pub cout: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Conv<T> {
    pub fn zeros(kernel: usize, cin: usize, cout: usize) -> Self {
        Conv {
            kernel,
            cin,
            cout,
            weight: vec![T::zero(); kernel * kernel * cin * cout],
            bias: vec![T::zero(); cout],
        }
    }

    pub fn weight_dims(&self) -> [usize; 4] {
        [self.kernel, self.kernel, self.cin, self.cout]
    }

    pub fn forward(&self, input: &Map<T>) -> Map<T> {
        let (h, w, cin) = input.shape();
        debug_assert_eq!(cin, self.cin);
        let (k, cout) = (self.kernel, self.cout);
        let pad = (k / 2) as isize;
        let mut out = Map::zeros(h, w, cout);
        for y in 0..h {
            for x in 0..w {
                let acc = out.pixel_mut(y, x);
                acc.copy_from_slice(&self.bias);
                for ky in 0..k {
                    let iy = y as isize + ky as isize - pad;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = x as isize + kx as isize - pad;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let src = input.pixel(iy as usize, ix as usize);
                        let base = (ky * k + kx) * cin * cout;
                        for (ci, &v) in src.iter().enumerate() {
                            let row = &self.weight[base + ci * cout..base + (ci + 1) * cout];
                            for (a, &wv) in acc.iter_mut().zip(row) {
                                *a += v * wv;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Accumulates parameter gradients into `grad`; returns the input
    /// gradient when `want_input` is set.
    pub fn backward(&self, input: &Map<T>, dout: &Map<T>, grad: &mut Conv<T>, want_input: bool) -> Option<Map<T>> {
        let (h, w, cin) = input.shape();
        let (k, cout) = (self.kernel, self.cout);
        let pad = (k / 2) as isize;
        let mut din = want_input.then(|| Map::zeros(h, w, cin));
        for y in 0..h {
            for x in 0..w {
                let g = dout.pixel(y, x);
                for (b, &gv) in grad.bias.iter_mut().zip(g) {
                    *b += gv;
                }
                for ky in 0..k {
                    let iy = y as isize + ky as isize - pad;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = x as isize + kx as isize - pad;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let (iy, ix) = (iy as usize, ix as usize);
                        let src = input.pixel(iy, ix);
                        let base = (ky * k + kx) * cin * cout;
                        for (ci, &v) in src.iter().enumerate() {
                            let range = base + ci * cout..base + (ci + 1) * cout;
                            for (dw, &gv) in grad.weight[range.clone()].iter_mut().zip(g) {
                                *dw += v * gv;
                            }
                            if let Some(din) = din.as_mut() {
                                let s = self.weight[range]
                                    .iter()
                                    .zip(g)
                                    .fold(T::zero(), |s, (&wv, &gv)| s + wv * gv);
                                din.pixel_mut(iy, ix)[ci] += s;
                            }
                        }
                    }
                }
            }
        }
        din
    }
}

pub(crate) fn relu<T: Real>(z: &Map<T>) -> Map<T> {
    z.map(|v| if v > T::zero() { v } else { T::zero() })
}

pub(crate) fn relu_backward<T: Real>(z: &Map<T>, grad: &Map<T>) -> Map<T> {
    z.zip_with(grad, |v, g| if v > T::zero() { g } else { T::zero() })
        .expect("relu shapes match")
}

pub(crate) fn avg_pool2<T: Real>(input: &Map<T>) -> Map<T> {
    let (h, w, c) = input.shape();
    let quarter = T::from(0.25).unwrap();
    Map::from_fn(h / 2, w / 2, c, |y, x, k| {
        (input.get(2 * y, 2 * x, k)
            + input.get(2 * y, 2 * x + 1, k)
            + input.get(2 * y + 1, 2 * x, k)
            + input.get(2 * y + 1, 2 * x + 1, k))
            * quarter
    })
}

pub(crate) fn avg_pool2_backward<T: Real>(grad: &Map<T>) -> Map<T> {
    let (h, w, c) = grad.shape();
    let quarter = T::from(0.25).unwrap();
    Map::from_fn(2 * h, 2 * w, c, |y, x, k| grad.get(y / 2, x / 2, k) * quarter)
}
