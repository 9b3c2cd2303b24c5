//! Adaptive render-time selection so that no pixel moves more than a bound
//! between consecutive frames.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::frame::Grid;
use crate::pose::{Pose, Trajectory};
use crate::scene::{one_way_displacement, CameraIntrinsics, CameraView, FlowModel, PlanarScene};

pub const DEFAULT_MAX_DISP: f64 = 1.0;
pub const DEFAULT_MAX_INTERVALS: usize = 100_000;
/// The first interval is this fraction of the window.
pub const INITIAL_DIVISIONS: i64 = 16;

/// Strictly increasing render timestamps covering `[t_i, t_j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSchedule {
    pub times: Vec<i64>,
    pub max_disp: f64,
}

impl SampleSchedule {
    pub fn intervals(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    pub fn start(&self) -> i64 {
        self.times[0]
    }

    pub fn end(&self) -> i64 {
        self.times[self.times.len() - 1]
    }

    /// Joins schedules that share endpoints, e.g. per-label-interval plans.
    pub fn concat(parts: &[SampleSchedule]) -> Result<SampleSchedule> {
        let mut times: Vec<i64> = Vec::new();
        let mut max_disp: f64 = 0.0;
        for p in parts {
            max_disp = max_disp.max(p.max_disp);
            match times.last() {
                Some(&last) if last == p.start() => times.extend_from_slice(&p.times[1..]),
                Some(&last) => {
                    return Err(Error::Config(format!(
                        "schedules are not contiguous: {last} then {}",
                        p.start()
                    )))
                }
                None => times.extend_from_slice(&p.times),
            }
        }
        Ok(SampleSchedule { times, max_disp })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplerOptions {
    pub max_disp: f64,
    pub max_intervals: usize,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            max_disp: DEFAULT_MAX_DISP,
            max_intervals: DEFAULT_MAX_INTERVALS,
        }
    }
}

/// Measures pixel displacement between trajectory times, caching the
/// visible-plane map per time.
struct Probe<'a> {
    scene: &'a PlanarScene,
    traj: &'a Trajectory,
    k: &'a CameraIntrinsics,
    cache: HashMap<i64, (Pose, Grid<Option<u8>>)>,
}

impl<'a> Probe<'a> {
    fn state(&mut self, t: i64) -> Result<&(Pose, Grid<Option<u8>>)> {
        if !self.cache.contains_key(&t) {
            let pose = self.traj.pose_at(t)?;
            let map = CameraView::new(self.scene, pose, *self.k).plane_map();
            self.cache.insert(t, (pose, map));
        }
        Ok(&self.cache[&t])
    }

    fn displacement(&mut self, a: i64, b: i64) -> Result<f64> {
        self.state(a)?;
        self.state(b)?;
        let (pa, ma) = &self.cache[&a];
        let (pb, mb) = &self.cache[&b];
        let fwd = FlowModel::new(self.scene, pa, pb, self.k);
        let bwd = FlowModel::new(self.scene, pb, pa, self.k);
        Ok(one_way_displacement(&fwd, ma).max(one_way_displacement(&bwd, mb)))
    }

    fn forget_before(&mut self, t: i64) {
        self.cache.retain(|&k, _| k >= t);
    }
}

pub fn plan_schedule(
    scene: &PlanarScene,
    traj: &Trajectory,
    k: &CameraIntrinsics,
    t_i: i64,
    t_j: i64,
    max_disp: f64,
) -> Result<SampleSchedule> {
    plan_schedule_with(
        scene,
        traj,
        k,
        t_i,
        t_j,
        SamplerOptions {
            max_disp,
            ..SamplerOptions::default()
        },
    )
}

/// A window whose endpoints are already within `max_disp` of each other is
/// returned as a single interval. Otherwise the planner steps forward with
/// `dt_k = dt_{k-1} / max(1, |F| / max_disp)`, where `|F|` is the largest
/// forward/backward displacement measured over the previous interval,
/// starting from a sixteenth of the window, and halves any candidate
/// interval whose measured displacement exceeds `max_disp`.
pub fn plan_schedule_with(
    scene: &PlanarScene,
    traj: &Trajectory,
    k: &CameraIntrinsics,
    t_i: i64,
    t_j: i64,
    opts: SamplerOptions,
) -> Result<SampleSchedule> {
    if t_i >= t_j {
        return Err(Error::InvalidWindow { start: t_i, end: t_j });
    }
    if !(opts.max_disp > 0.0) {
        return Err(Error::Config(format!("max_disp must be positive, got {}", opts.max_disp)));
    }
    for t in [t_i, t_j] {
        if t < traj.start() || t > traj.end() {
            return Err(Error::OutOfRange {
                t,
                start: traj.start(),
                end: traj.end(),
            });
        }
    }
    let mut probe = Probe {
        scene,
        traj,
        k,
        cache: HashMap::new(),
    };
    if probe.displacement(t_i, t_j)? <= opts.max_disp {
        return Ok(SampleSchedule {
            times: vec![t_i, t_j],
            max_disp: opts.max_disp,
        });
    }
    let mut times = vec![t_i];
    let mut dt = ((t_j - t_i) / INITIAL_DIVISIONS).max(1);
    let mut start = t_i;
    while start < t_j {
        if times.len() > opts.max_intervals {
            return Err(Error::PathologicalMotion {
                cap: opts.max_intervals,
            });
        }
        let mut end = (start + dt).min(t_j);
        let mut disp = probe.displacement(start, end)?;
        while disp > opts.max_disp {
            if end - start <= 1 {
                return Err(Error::UnresolvableMotion {
                    t: start,
                    displacement: disp,
                });
            }
            end = start + (end - start) / 2;
            disp = probe.displacement(start, end)?;
        }
        let len = (end - start) as f64;
        dt = ((len / (disp / opts.max_disp).max(1.0)).floor() as i64).max(1);
        times.push(end);
        start = end;
        probe.forget_before(start);
    }
    Ok(SampleSchedule {
        times,
        max_disp: opts.max_disp,
    })
}

/// Largest analytic flow magnitude (valid pixels, both directions) over the
/// intervals of a schedule.
pub fn verify_schedule(
    scene: &PlanarScene,
    traj: &Trajectory,
    k: &CameraIntrinsics,
    schedule: &SampleSchedule,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for w in schedule.times.windows(2) {
        let (a, b) = (traj.pose_at(w[0])?, traj.pose_at(w[1])?);
        let fwd = crate::scene::analytic_flow(scene, &a, &b, k).max_magnitude();
        let bwd = crate::scene::analytic_flow(scene, &b, &a, k).max_magnitude();
        worst = worst.max(fwd).max(bwd);
    }
    Ok(worst)
}
