//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use evsynth::frame::{FlowField, Frame, Grid};
use evsynth::scene::{CameraIntrinsics, PlanarScene};
use evsynth::simulator::LogFrame;
use evsynth::Pose;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// World-frame ray through pixel `(x, y)`.
fn world_ray(pose: &Pose, k: &CameraIntrinsics, x: f64, y: f64) -> Vector3<f64> {
    let cam = Vector3::new((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
    pose.orientation.to_rotation_matrix() * cam
}

/// Nearest plane hit along a world ray: `(plane, ray parameter, point)`.
/// The ray parameter equals camera depth because the ray has unit z.
fn nearest_hit(scene: &PlanarScene, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<(usize, f64, Point3<f64>)> {
    let mut best: Option<(usize, f64, Point3<f64>)> = None;
    for (i, pl) in scene.planes().iter().enumerate() {
        let n = pl.normal().into_inner();
        let gap = pl.offset() - n.dot(&origin.coords);
        let rate = n.dot(dir);
        if gap <= 0.0 || rate <= 0.0 {
            continue;
        }
        let lambda = gap / rate;
        let p = origin + dir * lambda;
        let (s, t) = pl.plane_coords(&p);
        let e = &pl.extent;
        if s < e.s_min || s > e.s_max || t < e.t_min || t > e.t_max {
            continue;
        }
        if best.is_none_or(|b| lambda < b.1) {
            best = Some((i, lambda, p));
        }
    }
    best
}

/// How close a decision came to its threshold; oracle and implementation
/// may legitimately disagree when this is tiny.
pub const MARGINAL: f64 = 1e-6;

#[derive(Clone, Copy, Debug)]
pub struct OracleFlow {
    pub flow: Option<(f64, f64)>,
    pub marginal: bool,
}

fn extent_margin(scene: &PlanarScene, plane: usize, p: &Point3<f64>) -> f64 {
    let pl = &scene.planes()[plane];
    let (s, t) = pl.plane_coords(p);
    let e = &pl.extent;
    [s - e.s_min, e.s_max - s, t - e.t_min, e.t_max - t]
        .into_iter()
        .map(f64::abs)
        .fold(f64::INFINITY, f64::min)
}

/// Flow by explicit 3D point transfer: back-project through the nearest
/// plane, project into the second camera, then ray-cast back from it to
/// test visibility.
pub fn point_transfer_flow(
    scene: &PlanarScene,
    pose_i: &Pose,
    pose_j: &Pose,
    k: &CameraIntrinsics,
    x: f64,
    y: f64,
) -> OracleFlow {
    let none = |marginal| OracleFlow { flow: None, marginal };
    let Some((plane, _, point)) = nearest_hit(scene, &pose_i.position, &world_ray(pose_i, k, x, y)) else {
        return none(false);
    };
    let mut marginal = extent_margin(scene, plane, &point) < MARGINAL;
    let cam = pose_j.orientation.inverse_transform_vector(&(point - pose_j.position));
    if cam.z <= 0.0 {
        return none(marginal);
    }
    let u = k.fx * cam.x / cam.z + k.cx;
    let v = k.fy * cam.y / cam.z + k.cy;
    let (w, h) = (k.width as f64, k.height as f64);
    let edge = [u + 0.5, w - 0.5 - u, v + 0.5, h - 0.5 - v]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    marginal |= edge.abs() < MARGINAL;
    if edge < 0.0 || edge == 0.0 && (u >= w - 0.5 || v >= h - 0.5) {
        return none(marginal);
    }
    let back = nearest_hit(scene, &pose_j.position, &world_ray(pose_j, k, u, v));
    let visible = match back {
        Some((p2, depth2, _)) if p2 != plane => {
            let ratio = depth2 / cam.z;
            marginal |= (ratio - 1.0).abs() < MARGINAL;
            ratio >= 1.0 - 1e-9
        }
        Some(_) => true,
        // Grazing geometry: the transferred point itself sits on an extent edge.
        None => {
            marginal = true;
            true
        }
    };
    OracleFlow {
        flow: visible.then_some((u - x, v - y)),
        marginal,
    }
}

/// Texture or background seen through pixel `(x, y)`.
pub fn render_pixel(scene: &PlanarScene, pose: &Pose, k: &CameraIntrinsics, x: f64, y: f64) -> f64 {
    match nearest_hit(scene, &pose.position, &world_ray(pose, k, x, y)) {
        Some((i, _, p)) => {
            let pl = &scene.planes()[i];
            let (s, t) = pl.plane_coords(&p);
            pl.texture.eval(s, t)
        }
        None => scene.background,
    }
}

/// Event from the dense oracle: pixel index, time in nanoseconds, polarity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NsEvent {
    pub pixel: usize,
    pub t_ns: i64,
    pub on: bool,
}

/// Steps every pixel's linearly interpolated log intensity at 1 ns and
/// fires whenever it is at least `c` from the reference level, moving the
/// reference by exactly `c`. Returns events and final reference levels.
pub fn dense_oracle(frames: &[LogFrame], c: f64) -> (Vec<NsEvent>, Vec<f64>) {
    let n = frames[0].values.as_slice().len();
    let mut events = Vec::new();
    let mut refs = Vec::with_capacity(n);
    for px in 0..n {
        let base = frames[0].values.as_slice()[px];
        let (mut up, mut down) = (0i64, 0i64);
        let level = |up: i64, down: i64| base + up as f64 * c - down as f64 * c;
        for w in frames.windows(2) {
            let (l0, l1) = (w[0].values.as_slice()[px], w[1].values.as_slice()[px]);
            // L is linear on the interval, so nothing fires unless the end
            // value is already a threshold away from the reference.
            let r = level(up, down);
            if l1 - r < c && r - l1 < c {
                continue;
            }
            let (t0, t1) = (w[0].t * 1000, w[1].t * 1000);
            let span = (t1 - t0) as f64;
            for t in t0 + 1..=t1 {
                let l = if t == t1 { l1 } else { l0 + (l1 - l0) * ((t - t0) as f64 / span) };
                loop {
                    let r = level(up, down);
                    if l - r >= c {
                        up += 1;
                        events.push(NsEvent { pixel: px, t_ns: t, on: true });
                    } else if r - l >= c {
                        down += 1;
                        events.push(NsEvent { pixel: px, t_ns: t, on: false });
                    } else {
                        break;
                    }
                }
            }
        }
        refs.push(level(up, down));
    }
    (events, refs)
}

/// Random smooth video: a few drifting sinusoids per pixel sampled at
/// irregular frame times 5 to 20 us apart.
pub fn smooth_video(seed: u64, w: usize, h: usize, frames: usize) -> Vec<Frame> {
    let mut r = rng(seed);
    let waves: Vec<[f64; 5]> = (0..3)
        .map(|_| {
            [
                r.random_range(0.05..0.2),
                r.random_range(-0.6..0.6),
                r.random_range(-0.6..0.6),
                r.random_range(-0.004..0.004),
                r.random_range(0.0..std::f64::consts::TAU),
            ]
        })
        .collect();
    let bias = r.random_range(0.35..0.65);
    let mut t = r.random_range(0..1000i64);
    let mut out = Vec::with_capacity(frames);
    for _ in 0..frames {
        let img = Grid::from_fn(w, h, |x, y| {
            let v: f64 = waves
                .iter()
                .map(|[a, kx, ky, om, ph]| a * (kx * x as f64 + ky * y as f64 + om * t as f64 + ph).sin())
                .sum();
            (bias + v).clamp(0.0, 1.0)
        });
        out.push(Frame::new(img, t));
        t += r.random_range(5..=20);
    }
    out
}

/// Random flow field whose values are exactly representable as f32.
pub fn random_flow(r: &mut ChaCha8Rng, w: usize, h: usize, scale: f64) -> FlowField {
    let mut g = || Grid::from_fn(w, h, |_, _| (r.random_range(-scale..scale) as f32) as f64);
    let u = g();
    let v = g();
    let valid = Grid::from_fn(w, h, |_, _| r.random_bool(0.8));
    FlowField::new(u, v, valid).unwrap()
}

/// Brute-force end-point error and outlier percentage over a mask.
pub fn metrics_oracle(pred: &FlowField, gt: &FlowField, mask: &Grid<bool>) -> (f64, f64, usize) {
    let (mut sum, mut n, mut out) = (0.0, 0usize, 0usize);
    for y in 0..gt.height() {
        for x in 0..gt.width() {
            if !*mask.get(x, y) {
                continue;
            }
            let (pu, pv) = pred.at(x, y);
            let (gu, gv) = gt.at(x, y);
            let err = (pu - gu).hypot(pv - gv);
            let mag = gu.hypot(gv);
            sum += err;
            n += 1;
            if err > 3.0 && err > 0.05 * mag {
                out += 1;
            }
        }
    }
    if n == 0 {
        (0.0, 0.0, 0)
    } else {
        (sum / n as f64, 100.0 * out as f64 / n as f64, n)
    }
}
