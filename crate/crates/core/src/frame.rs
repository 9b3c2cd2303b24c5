//! Dense per-pixel containers: intensity frames and flow fields.

use crate::error::{Error, Result};

/// Row-major `height x width` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Shape {
                expected: (height, width),
                actual: (data.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// `(height, width)`
    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut T {
        &mut self.data[y * self.width + x]
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

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }
}

pub type Mask = Grid<bool>;

pub(crate) fn check_shape(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Shape { expected, actual })
    }
}

/// Rendered intensity image in `[0, 1]` taken at `t` (microseconds).
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub intensities: Grid<f64>,
    pub t: i64,
}

impl Frame {
    pub fn new(intensities: Grid<f64>, t: i64) -> Self {
        Self { intensities, t }
    }

    pub fn width(&self) -> usize {
        self.intensities.width()
    }

    pub fn height(&self) -> usize {
        self.intensities.height()
    }

    pub fn is_valid(&self) -> bool {
        self.intensities
            .as_slice()
            .iter()
            .all(|v| v.is_finite() && (0.0..=1.0).contains(v))
    }
}

/// Per-pixel displacement `(u, v)` in pixels with a validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    pub u: Grid<f64>,
    pub v: Grid<f64>,
    pub valid: Mask,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            u: Grid::filled(width, height, 0.0),
            v: Grid::filled(width, height, 0.0),
            valid: Grid::filled(width, height, true),
        }
    }

    pub fn new(u: Grid<f64>, v: Grid<f64>, valid: Mask) -> Result<Self> {
        check_shape(u.shape(), v.shape())?;
        check_shape(u.shape(), valid.shape())?;
        Ok(Self { u, v, valid })
    }

    pub fn width(&self) -> usize {
        self.u.width()
    }

    pub fn height(&self) -> usize {
        self.u.height()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.u.shape()
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        (*self.u.get(x, y), *self.v.get(x, y))
    }

    pub fn valid_count(&self) -> usize {
        self.valid.as_slice().iter().filter(|&&v| v).count()
    }

    /// Largest displacement magnitude over valid pixels.
    pub fn max_magnitude(&self) -> f64 {
        self.u
            .as_slice()
            .iter()
            .zip(self.v.as_slice())
            .zip(self.valid.as_slice())
            .filter(|(_, &ok)| ok)
            .map(|((u, v), _)| u.hypot(*v))
            .fold(0.0, f64::max)
    }

    pub fn is_valid(&self) -> bool {
        self.u
            .as_slice()
            .iter()
            .zip(self.v.as_slice())
            .zip(self.valid.as_slice())
            .all(|((u, v), &ok)| !ok || (u.is_finite() && v.is_finite()))
    }
}
