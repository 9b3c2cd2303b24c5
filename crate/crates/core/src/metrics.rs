//! End-point error and outlier rate for flow predictions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{check_shape, FlowField, Mask};
use crate::voxel::{valid_mask, VoxelGrid};

/// A pixel is an outlier when its end-point error exceeds both this many
/// pixels and [`OUTLIER_REL`] of the ground-truth magnitude.
pub const OUTLIER_ABS_PX: f64 = 3.0;
pub const OUTLIER_REL: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Dense,
    Sparse,
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalMode::Dense => "dense",
            EvalMode::Sparse => "sparse",
        })
    }
}

impl std::str::FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(EvalMode::Dense),
            "sparse" => Ok(EvalMode::Sparse),
            other => Err(Error::Config(format!("unknown evaluation mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub epe: f64,
    pub out_pct: f64,
    pub n_pixels: usize,
    pub mode: EvalMode,
    /// Set when the mask selected no pixels; both metrics are then 0.
    pub degenerate: bool,
}

fn check(pred: &FlowField, gt: &FlowField, mask: &Mask) -> Result<()> {
    check_shape(gt.shape(), pred.shape())?;
    check_shape(gt.shape(), mask.shape())
}

#[inline]
fn pixel_error(pred: &FlowField, gt: &FlowField, i: usize) -> (f64, f64) {
    let (pu, pv) = (pred.u.as_slice()[i], pred.v.as_slice()[i]);
    let (gu, gv) = (gt.u.as_slice()[i], gt.v.as_slice()[i]);
    ((pu - gu).hypot(pv - gv), gu.hypot(gv))
}

fn masked_errors<'a>(
    pred: &'a FlowField,
    gt: &'a FlowField,
    mask: &'a Mask,
) -> impl Iterator<Item = (f64, f64)> + 'a {
    mask.as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(move |(i, _)| pixel_error(pred, gt, i))
}

/// Mean end-point error over mask-true pixels; 0 for an empty mask.
pub fn epe(pred: &FlowField, gt: &FlowField, mask: &Mask) -> Result<f64> {
    check(pred, gt, mask)?;
    let (sum, n) = masked_errors(pred, gt, mask).fold((0.0, 0usize), |(s, n), (e, _)| (s + e, n + 1));
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

pub fn is_outlier(err: f64, gt_magnitude: f64) -> bool {
    err > OUTLIER_ABS_PX && err > OUTLIER_REL * gt_magnitude
}

/// Percentage of mask-true pixels that are outliers; 0 for an empty mask.
pub fn outlier_pct(pred: &FlowField, gt: &FlowField, mask: &Mask) -> Result<f64> {
    check(pred, gt, mask)?;
    let (out, n) = masked_errors(pred, gt, mask)
        .fold((0usize, 0usize), |(o, n), (e, m)| (o + usize::from(is_outlier(e, m)), n + 1));
    Ok(if n == 0 { 0.0 } else { 100.0 * out as f64 / n as f64 })
}

/// Scores `pred` over valid ground-truth pixels, further restricted to
/// pixels that saw events in sparse mode.
pub fn evaluate(
    pred: &FlowField,
    gt: &FlowField,
    mode: EvalMode,
    events: Option<&VoxelGrid>,
) -> Result<EvalReport> {
    let mask = match (mode, events) {
        (EvalMode::Dense, _) => gt.valid.clone(),
        (EvalMode::Sparse, None) => {
            return Err(Error::Config("sparse evaluation needs an event grid".into()))
        }
        (EvalMode::Sparse, Some(grid)) => {
            let active = valid_mask(grid);
            check_shape(gt.shape(), active.shape())?;
            let mut m = gt.valid.clone();
            for (v, a) in m.as_mut_slice().iter_mut().zip(active.as_slice()) {
                *v &= *a;
            }
            m
        }
    };
    let n_pixels = mask.as_slice().iter().filter(|&&m| m).count();
    Ok(EvalReport {
        epe: epe(pred, gt, &mask)?,
        out_pct: outlier_pct(pred, gt, &mask)?,
        n_pixels,
        mode,
        degenerate: n_pixels == 0,
    })
}

/// Pixel-weighted mean of several reports of the same mode.
pub fn aggregate(reports: &[EvalReport], mode: EvalMode) -> EvalReport {
    let n: usize = reports.iter().map(|r| r.n_pixels).sum();
    let (epe, out) = if n == 0 {
        (0.0, 0.0)
    } else {
        let w = |f: fn(&EvalReport) -> f64| {
            reports.iter().map(|r| f(r) * r.n_pixels as f64).sum::<f64>() / n as f64
        };
        (w(|r| r.epe), w(|r| r.out_pct))
    };
    EvalReport {
        epe,
        out_pct: out,
        n_pixels: n,
        mode,
        degenerate: n == 0,
    }
}
