//! WebAssembly bindings for the browser demo in `www/`.
//!
//! A [`Demo`] holds one random scene and camera path. The page asks it for
//! a rendered frame, a colour-coded flow field between two times, and the
//! events simulated over a time window at a chosen contrast threshold. Every
//! image comes back as tightly packed RGBA bytes.

use wasm_bindgen::prelude::*;

use evsynth::frame::{FlowField, Frame};
use evsynth::sampler::plan_schedule;
use evsynth::scene::{analytic_flow, gen_scene, gen_trajectory, render_frame, CameraIntrinsics, PlanarScene, SceneConfig, TrajectoryConfig};
use evsynth::simulator::{generate_events, log_transform, SimulatorConfig};
use evsynth::voxel::{density, voxelize, DEFAULT_BINS};
use evsynth::{EventStream, Trajectory};

fn js_err(e: evsynth::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    scene: PlanarScene,
    trajectory: Trajectory,
    k: CameraIntrinsics,
    last_density: f64,
    last_event_count: usize,
    last_frames: usize,
    last_max_flow: f64,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, width: usize, height: usize) -> Result<Demo, JsError> {
        Self::build(seed, width, height).map_err(js_err)
    }

    fn build(seed: u64, width: usize, height: usize) -> evsynth::Result<Demo> {
        let k = CameraIntrinsics::from_fov(width, height, 60.0)?;
        let scene = gen_scene(&SceneConfig::default(), seed)?;
        let trajectory = gen_trajectory(&TrajectoryConfig::default(), &scene, seed.wrapping_add(1))?;
        Ok(Demo {
            scene,
            trajectory,
            k,
            last_density: 0.0,
            last_event_count: 0,
            last_frames: 0,
            last_max_flow: 0.0,
        })
    }

    pub fn width(&self) -> usize {
        self.k.width
    }

    pub fn height(&self) -> usize {
        self.k.height
    }

    /// Length of the camera path in microseconds.
    pub fn duration(&self) -> f64 {
        (self.trajectory.end() - self.trajectory.start()) as f64
    }

    pub fn plane_count(&self) -> usize {
        self.scene.planes().len()
    }

    /// Grey-scale frame at `t_us`.
    pub fn render(&self, t_us: f64) -> Result<Vec<u8>, JsError> {
        let t = self.clamp_time(t_us);
        let pose = self.trajectory.pose_at(t).map_err(js_err)?;
        Ok(frame_rgba(&render_frame(&self.scene, &pose, &self.k, t)))
    }

    /// Flow from `t0_us` to `t1_us`: hue is direction, saturation is
    /// magnitude relative to the largest vector, invalid pixels are black.
    pub fn flow(&mut self, t0_us: f64, t1_us: f64) -> Result<Vec<u8>, JsError> {
        let (a, b) = (self.clamp_time(t0_us), self.clamp_time(t1_us));
        let pa = self.trajectory.pose_at(a).map_err(js_err)?;
        let pb = self.trajectory.pose_at(b).map_err(js_err)?;
        let f = analytic_flow(&self.scene, &pa, &pb, &self.k);
        self.last_max_flow = f.max_magnitude();
        Ok(flow_rgba(&f))
    }

    /// Events over `[t0_us, t1_us]` at threshold `c`: ON pixels white,
    /// OFF pixels red-ish, silent pixels grey. Also updates the density,
    /// event and frame counters.
    pub fn events(&mut self, t0_us: f64, t1_us: f64, c: f64) -> Result<Vec<u8>, JsError> {
        let stream = self.simulate(t0_us, t1_us, c).map_err(js_err)?;
        Ok(events_rgba(&stream))
    }

    pub fn last_density(&self) -> f64 {
        self.last_density
    }

    pub fn last_event_count(&self) -> usize {
        self.last_event_count
    }

    /// Frames rendered by the adaptive schedule in the last `events` call.
    pub fn last_frames(&self) -> usize {
        self.last_frames
    }

    pub fn last_max_flow(&self) -> f64 {
        self.last_max_flow
    }
}

impl Demo {
    fn clamp_time(&self, t: f64) -> i64 {
        (t.round() as i64).clamp(self.trajectory.start(), self.trajectory.end())
    }

    pub fn simulate(&mut self, t0_us: f64, t1_us: f64, c: f64) -> evsynth::Result<EventStream> {
        let (a, b) = (self.clamp_time(t0_us), self.clamp_time(t1_us));
        let (a, b) = (a.min(b), a.max(b));
        if a == b {
            return Err(evsynth::Error::InvalidWindow { start: a, end: b });
        }
        let schedule = plan_schedule(&self.scene, &self.trajectory, &self.k, a, b, 1.0)?;
        let cfg = SimulatorConfig::with_threshold(c);
        let frames = schedule
            .times
            .iter()
            .map(|&t| {
                let pose = self.trajectory.pose_at(t)?;
                Ok(log_transform(&render_frame(&self.scene, &pose, &self.k, t), cfg.log_floor))
            })
            .collect::<evsynth::Result<Vec<_>>>()?;
        let stream = generate_events(&frames, &schedule, &cfg)?;
        self.last_density = density(&voxelize(&stream, a, b, DEFAULT_BINS)?).get();
        self.last_event_count = stream.len();
        self.last_frames = schedule.times.len();
        Ok(stream)
    }
}

pub fn frame_rgba(frame: &Frame) -> Vec<u8> {
    frame
        .intensities
        .as_slice()
        .iter()
        .flat_map(|&v| {
            let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            [g, g, g, 255]
        })
        .collect()
}

fn hsv(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h = h.rem_euclid(1.0) * 6.0;
    let i = h.floor();
    let f = h - i;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    let (r, g, b) = match i as u8 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [r, g, b].map(|c| (c * 255.0).round() as u8)
}

pub fn flow_rgba(flow: &FlowField) -> Vec<u8> {
    let peak = flow.max_magnitude().max(1e-9);
    let mut out = Vec::with_capacity(flow.u.as_slice().len() * 4);
    for ((u, v), &ok) in flow.u.as_slice().iter().zip(flow.v.as_slice()).zip(flow.valid.as_slice()) {
        let [r, g, b] = if ok {
            let hue = v.atan2(*u) / std::f64::consts::TAU;
            hsv(hue, (u.hypot(*v) / peak).min(1.0), 1.0)
        } else {
            [0, 0, 0]
        };
        out.extend([r, g, b, 255]);
    }
    out
}

pub fn events_rgba(stream: &EventStream) -> Vec<u8> {
    let (w, h) = (stream.width as usize, stream.height as usize);
    let mut net = vec![0i32; w * h];
    for e in &stream.events {
        net[usize::from(e.y) * w + usize::from(e.x)] += i32::from(e.p.as_i8());
    }
    let peak = net.iter().map(|n| n.abs()).max().unwrap_or(0).max(1) as f64;
    net.iter()
        .flat_map(|&n| {
            let a = (n.abs() as f64 / peak).sqrt();
            let lift = (80.0 + 175.0 * a) as u8;
            match n.signum() {
                1 => [lift, lift, lift, 255],
                -1 => [lift, 40, 40, 255],
                _ => [40, 40, 40, 255],
            }
        })
        .collect()
}
