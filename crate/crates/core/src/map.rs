//! Dense `H×W×C` maps stored row-major with the channel index fastest.
//!
//! Images, label maps, probability maps, uncertainty maps, selection masks
//! and feature maps all share this layout, which is also the on-disk layout
//! of a rank-3 `.tns` file.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Map<T> {
    h: usize,
    w: usize,
    c: usize,
    data: Vec<T>,
}

/// `H×W×3` image with values in `[0,1]`.
pub type Image = Map<f32>;
/// Per-pixel, per-class sigmoid outputs.
pub type ProbMap = Map<f32>;
/// Per-pixel, per-class standard deviation over stochastic passes.
pub type UncertaintyMap = Map<f32>;
/// Binary `{0,1}` per-pixel, per-class labels.
pub type LabelMap = Map<u8>;
/// Binary `{0,1}` per-pixel, per-class selection.
pub type SelectionMask = Map<u8>;

impl<T: Copy + Default> Map<T> {
    pub fn zeros(h: usize, w: usize, c: usize) -> Self {
        Self::filled(h, w, c, T::default())
    }
}

impl<T: Copy> Map<T> {
    pub fn filled(h: usize, w: usize, c: usize, value: T) -> Self {
        Map {
            h,
            w,
            c,
            data: vec![value; h * w * c],
        }
    }

    pub fn from_vec(h: usize, w: usize, c: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != h * w * c {
            return Err(Error::Shape(format!(
                "{} values do not fill a {h}x{w}x{c} map",
                data.len()
            )));
        }
        Ok(Map { h, w, c, data })
    }

    pub fn from_fn(h: usize, w: usize, c: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(h * w * c);
        for y in 0..h {
            for x in 0..w {
                for k in 0..c {
                    data.push(f(y, x, k));
                }
            }
        }
        Map { h, w, c, data }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.h
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.w
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.c
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.h, self.w, self.c)
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, k: usize) -> usize {
        (y * self.w + x) * self.c + k
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, k: usize) -> T {
        self.data[self.index(y, x, k)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, k: usize, value: T) {
        let i = self.index(y, x, k);
        self.data[i] = value;
    }

    /// All channels of pixel `(y, x)`.
    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> &[T] {
        let i = self.index(y, x, 0);
        &self.data[i..i + self.c]
    }

    #[inline]
    pub fn pixel_mut(&mut self, y: usize, x: usize) -> &mut [T] {
        let i = self.index(y, x, 0);
        &mut self.data[i..i + self.c]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// Copy of channel `k` as a single-channel map.
    pub fn channel(&self, k: usize) -> Map<T> {
        assert!(k < self.c, "channel {k} out of range for {} channels", self.c);
        Map {
            h: self.h,
            w: self.w,
            c: 1,
            data: self.data.iter().skip(k).step_by(self.c).copied().collect(),
        }
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Map<U> {
        Map {
            h: self.h,
            w: self.w,
            c: self.c,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two maps of identical shape.
    pub fn zip_with<U: Copy, V: Copy>(&self, other: &Map<U>, f: impl Fn(T, U) -> V) -> Result<Map<V>> {
        self.ensure_same_shape(other)?;
        Ok(Map {
            h: self.h,
            w: self.w,
            c: self.c,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn ensure_same_shape<U: Copy>(&self, other: &Map<U>) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "{:?} vs {:?}",
                self.shape(),
                (other.h, other.w, other.c)
            )));
        }
        Ok(())
    }
}

impl Map<f32> {
    pub fn cast<F: num_traits::Float>(&self) -> Map<F> {
        self.map(|v| F::from(v).expect("f32 converts to any float"))
    }
}

impl Map<u8> {
    /// Number of entries equal to 1.
    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }
}
