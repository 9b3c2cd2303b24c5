//! Temporal voxel grids and the valid-pixel density of an event window.

use crate::error::{Error, Result};
use crate::event::EventStream;
use crate::frame::{Grid, Mask};

pub const DEFAULT_BINS: usize = 5;
/// Events per partial grid when voxelising in parallel. Fixed so the
/// summation order, and therefore the result, never depends on threads.
const CHUNK: usize = 1 << 16;

/// `bins x height x width` polarity-weighted event mass.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    pub bins: usize,
    pub width: usize,
    pub height: usize,
    pub t0: i64,
    pub t_n: i64,
    values: Vec<f64>,
}

impl VoxelGrid {
    pub fn zeros(bins: usize, width: usize, height: usize, t0: i64, t_n: i64) -> Result<Self> {
        if bins < 2 {
            return Err(Error::Config(format!("voxel grids need at least 2 bins, got {bins}")));
        }
        Ok(Self {
            bins,
            width,
            height,
            t0,
            t_n,
            values: vec![0.0; bins * width * height],
        })
    }

    pub fn from_values(
        bins: usize,
        width: usize,
        height: usize,
        t0: i64,
        t_n: i64,
        values: Vec<f64>,
    ) -> Result<Self> {
        let mut g = Self::zeros(bins, width, height, t0, t_n)?;
        if values.len() != g.values.len() {
            return Err(Error::Shape {
                expected: (bins * height, width),
                actual: (values.len(), 1),
            });
        }
        g.values = values;
        Ok(g)
    }

    #[inline]
    fn index(&self, b: usize, x: usize, y: usize) -> usize {
        (b * self.height + y) * self.width + x
    }

    pub fn get(&self, b: usize, x: usize, y: usize) -> f64 {
        self.values[self.index(b, x, y)]
    }

    /// Row-major `[b][y][x]` storage.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `sum_b |V(b, y, x)|` per pixel.
    pub fn abs_mass(&self) -> Grid<f64> {
        let plane = self.width * self.height;
        let mut out = vec![0.0; plane];
        for b in 0..self.bins {
            for (o, v) in out.iter_mut().zip(&self.values[b * plane..(b + 1) * plane]) {
                *o += v.abs();
            }
        }
        Grid::from_vec(self.width, self.height, out).expect("plane size")
    }
}

/// Triangular temporal kernel `max(0, 1 - |b - s|)`.
#[inline]
pub fn temporal_kernel(b: usize, s: f64) -> f64 {
    (1.0 - (b as f64 - s).abs()).max(0.0)
}

/// Normalised bin coordinate `s = (t - t0) / (tN - t0) * (B - 1)`.
#[inline]
pub fn bin_coordinate(t: i64, t0: i64, t_n: i64, bins: usize) -> f64 {
    (t - t0) as f64 / (t_n - t0) as f64 * (bins - 1) as f64
}

fn deposit(grid: &mut [f64], events: &[crate::event::Event], t0: i64, t_n: i64, bins: usize, w: usize, h: usize) {
    for e in events {
        let s = bin_coordinate(e.t, t0, t_n, bins);
        let p = e.p.as_f64();
        let lo = s.floor() as usize;
        let pix = usize::from(e.y) * w + usize::from(e.x);
        for b in [lo, lo + 1] {
            if b < bins {
                let k = temporal_kernel(b, s);
                if k > 0.0 {
                    grid[b * w * h + pix] += p * k;
                }
            }
        }
    }
}

/// Deposits every event onto its two neighbouring temporal bins.
pub fn voxelize(stream: &EventStream, t0: i64, t_n: i64, bins: usize) -> Result<VoxelGrid> {
    if t_n <= t0 {
        return Err(Error::InvalidWindow { start: t0, end: t_n });
    }
    let (w, h) = (stream.width as usize, stream.height as usize);
    let mut grid = VoxelGrid::zeros(bins, w, h, t0, t_n)?;
    if let Some((index, e)) = stream
        .events
        .iter()
        .enumerate()
        .find(|(_, e)| e.t < t0 || e.t > t_n || usize::from(e.x) >= w || usize::from(e.y) >= h)
    {
        return Err(Error::EventOutsideWindow {
            index,
            t: e.t,
            start: t0,
            end: t_n,
        });
    }
    let chunks: Vec<&[crate::event::Event]> = stream.events.chunks(CHUNK).collect();
    if chunks.len() <= 1 {
        deposit(&mut grid.values, &stream.events, t0, t_n, bins, w, h);
        return Ok(grid);
    }
    let partials = crate::par::map_indexed(&chunks, |_, c| {
        let mut part = vec![0.0; bins * w * h];
        deposit(&mut part, c, t0, t_n, bins, w, h);
        part
    });
    for part in partials {
        for (g, p) in grid.values.iter_mut().zip(part) {
            *g += p;
        }
    }
    Ok(grid)
}

/// Fraction of pixels whose channel mass `sum_b |V|` is non-zero, in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct DensityValue(f64);

impl DensityValue {
    pub fn new(d: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&d) {
            Ok(Self(d))
        } else {
            Err(Error::Config(format!("density {d} outside [0, 1]")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Pixels that carry any voxel mass.
pub fn valid_mask(grid: &VoxelGrid) -> Mask {
    grid.abs_mass().map(|&m| m > 0.0)
}

pub fn density(grid: &VoxelGrid) -> DensityValue {
    let mask = valid_mask(grid);
    let n = mask.as_slice().len();
    if n == 0 {
        return DensityValue(0.0);
    }
    let active = mask.as_slice().iter().filter(|&&v| v).count();
    DensityValue(active as f64 / n as f64)
}
