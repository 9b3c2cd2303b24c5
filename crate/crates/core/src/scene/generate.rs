use nalgebra::{Point3, Unit, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Extent, Lattice, PlanarScene, Plane, Sinusoid, Texture, MAX_PLANES, MAX_SINUSOIDS};
use crate::error::{Error, Result};
use crate::pose::{Pose, Trajectory};

/// Texture frequencies are given per radian of visual angle and scaled by
/// each plane's depth, so the projected band limit is roughly uniform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextureConfig {
    pub sinusoids: [usize; 2],
    pub min_frequency: f64,
    pub max_frequency: f64,
    pub sinusoid_amplitude: f64,
    pub lattice_cell: f64,
    pub lattice_period: usize,
    pub lattice_amplitude: f64,
    pub base: [f64; 2],
}

impl Default for TextureConfig {
    fn default() -> Self {
        Self {
            sinusoids: [3, 8],
            min_frequency: 0.5,
            max_frequency: 5.0,
            sinusoid_amplitude: 0.3,
            lattice_cell: 0.12,
            lattice_period: 16,
            lattice_amplitude: 0.15,
            base: [0.35, 0.65],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    /// Inclusive range for the number of planes, far wall included.
    pub planes: [usize; 2],
    /// Depth range (scene units) for plane offsets.
    pub depth: [f64; 2],
    /// Maximum angle between a plane normal and the default viewing axis.
    pub max_tilt_deg: f64,
    /// Half-angle of the cone in which plane centres are placed.
    pub view_half_angle_deg: f64,
    /// Plane half-size range in radians of visual angle.
    pub plane_half_size: [f64; 2],
    pub far_wall: bool,
    pub background: f64,
    pub texture: TextureConfig,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            planes: [3, 6],
            depth: [2.0, 10.0],
            max_tilt_deg: 25.0,
            view_half_angle_deg: 25.0,
            plane_half_size: [0.15, 0.45],
            far_wall: true,
            background: 0.5,
            texture: TextureConfig::default(),
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("scene: {m}")));
        if self.planes[0] < 1 || self.planes[0] > self.planes[1] || self.planes[1] > MAX_PLANES {
            return bad("plane count range must satisfy 1 <= min <= max <= 8");
        }
        if !(self.depth[0] > 0.0 && self.depth[0] < self.depth[1]) {
            return bad("depth range must be positive and non-empty");
        }
        if !(0.0..=1.0).contains(&self.background) {
            return bad("background must lie in [0, 1]");
        }
        if !(self.plane_half_size[0] > 0.0 && self.plane_half_size[0] <= self.plane_half_size[1]) {
            return bad("plane half-size range must be positive and non-empty");
        }
        let t = &self.texture;
        if t.sinusoids[0] > t.sinusoids[1] || t.sinusoids[1] > MAX_SINUSOIDS {
            return bad("sinusoid count range must satisfy min <= max <= 8");
        }
        if !(t.min_frequency > 0.0 && t.min_frequency <= t.max_frequency) {
            return bad("texture frequency range must be positive and non-empty");
        }
        if t.lattice_period == 0 || !(t.lattice_cell > 0.0) {
            return bad("lattice needs a positive cell and period");
        }
        Ok(())
    }
}

fn gen_texture(cfg: &TextureConfig, depth: f64, rng: &mut ChaCha8Rng) -> Texture {
    let n = rng.random_range(cfg.sinusoids[0]..=cfg.sinusoids[1]);
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let sinusoids = weights
        .iter()
        .map(|w| {
            let f = rng.random_range(cfg.min_frequency..=cfg.max_frequency) / depth;
            let dir = rng.random_range(0.0..std::f64::consts::TAU);
            Sinusoid {
                amplitude: cfg.sinusoid_amplitude * w / total,
                frequency: [f * dir.cos(), f * dir.sin()],
                phase: rng.random_range(0.0..std::f64::consts::TAU),
            }
        })
        .collect();
    let lattice = (cfg.lattice_amplitude > 0.0).then(|| Lattice {
        cell: cfg.lattice_cell * depth,
        period: cfg.lattice_period,
        values: (0..cfg.lattice_period * cfg.lattice_period)
            .map(|_| rng.random_range(-cfg.lattice_amplitude..=cfg.lattice_amplitude))
            .collect(),
    });
    Texture {
        base: rng.random_range(cfg.base[0]..=cfg.base[1]),
        sinusoids,
        lattice,
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Unit<Vector3<f64>> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return Unit::new_normalize(v);
        }
    }
}

/// Random depth-ordered planes in front of a camera at the origin looking
/// along +z. Deterministic in `seed`.
pub fn gen_scene(cfg: &SceneConfig, seed: u64) -> Result<PlanarScene> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.random_range(cfg.planes[0]..=cfg.planes[1]);
    let mut planes = Vec::with_capacity(count);
    let (near, far) = (cfg.depth[0], cfg.depth[1]);
    let mut wall_depth = far;
    if cfg.far_wall {
        wall_depth = rng.random_range(0.8 * far..=far);
        let texture = gen_texture(&cfg.texture, wall_depth, &mut rng);
        planes.push(Plane::fronto_parallel(
            wall_depth,
            Extent::centered(3.0 * wall_depth, 3.0 * wall_depth),
            texture,
        )?);
    }
    let cone = cfg.view_half_angle_deg.to_radians().tan();
    let max_tilt = cfg.max_tilt_deg.to_radians();
    let far_limit = if cfg.far_wall { (0.85 * wall_depth).max(near) } else { far };
    while planes.len() < count {
        let tilt_axis = rng.random_range(0.0..std::f64::consts::TAU);
        let tilt = rng.random_range(0.0..=max_tilt);
        let axis = Unit::new_normalize(Vector3::new(tilt_axis.cos(), tilt_axis.sin(), 0.0));
        let normal = UnitQuaternion::from_axis_angle(&axis, tilt) * Vector3::z();
        let offset = rng.random_range(near..=far_limit);
        let dir = Vector3::new(rng.random_range(-cone..=cone), rng.random_range(-cone..=cone), 1.0);
        let depth = offset / normal.dot(&dir);
        let texture = gen_texture(&cfg.texture, depth, &mut rng);
        let hs = rng.random_range(cfg.plane_half_size[0]..=cfg.plane_half_size[1]) * depth;
        let ht = rng.random_range(cfg.plane_half_size[0]..=cfg.plane_half_size[1]) * depth;
        let mut plane = Plane::new(normal, offset, Extent::centered(hs, ht), texture)?;
        let (s, t) = plane.plane_coords(&Point3::from(dir * depth));
        plane.extent = Extent {
            s_min: s - hs,
            s_max: s + hs,
            t_min: t - ht,
            t_max: t + ht,
        };
        planes.push(plane);
    }
    PlanarScene::new(planes, cfg.background)
}

/// Bounds for random smooth camera paths. Speeds are in scene units per
/// second and rotation rates in radians per second.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub duration_us: i64,
    /// Fixed endpoints; when absent they are drawn at random.
    pub start: Option<[f64; 3]>,
    pub end: Option<[f64; 3]>,
    /// Half-size of the cube random start positions are drawn from.
    pub start_box: f64,
    pub speed: [f64; 2],
    pub max_rotation_rate: f64,
    /// Largest rotation away from the initial viewing direction.
    pub max_tilt: f64,
    pub waypoints: [usize; 2],
    /// Lateral waypoint perturbation as a fraction of the segment length.
    pub jitter: f64,
    /// Minimum distance kept from every plane.
    pub clearance: f64,
    pub max_rounds: usize,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            duration_us: 133_333,
            start: None,
            end: None,
            start_box: 0.25,
            speed: [0.5, 3.0],
            max_rotation_rate: 1.0,
            max_tilt: 0.35,
            waypoints: [4, 12],
            jitter: 0.4,
            clearance: 0.5,
            max_rounds: 64,
        }
    }
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("trajectory: {m}")));
        if self.duration_us <= 0 {
            return bad("duration must be positive");
        }
        if !(self.speed[0] >= 0.0 && self.speed[0] <= self.speed[1]) {
            return bad("speed range must be non-negative and non-empty");
        }
        if self.waypoints[0] < 2 || self.waypoints[0] > self.waypoints[1] {
            return bad("waypoint count range must satisfy 2 <= min <= max");
        }
        if self.max_rotation_rate < 0.0 || self.max_tilt < 0.0 || self.jitter < 0.0 {
            return bad("rotation bounds and jitter must be non-negative");
        }
        if self.max_rounds == 0 {
            return bad("max_rounds must be at least 1");
        }
        Ok(())
    }
}

const CHECK_STEP_US: i64 = 1000;

/// Why a candidate path was rejected.
fn check_candidate(cfg: &TrajectoryConfig, scene: &PlanarScene, traj: &Trajectory) -> Option<String> {
    let (t0, t1) = (traj.start(), traj.end());
    let mut t = t0;
    loop {
        let pose = traj.pose_at(t).ok()?;
        let clearance = scene.clearance(&pose.position);
        if clearance < cfg.clearance {
            return Some(format!("clearance {clearance:.3} at t = {t} us"));
        }
        let speed = traj.velocity_at(t as f64).ok()?.norm() * 1e6;
        if speed < cfg.speed[0] - 1e-9 || speed > cfg.speed[1] + 1e-9 {
            return Some(format!("speed {speed:.3} at t = {t} us"));
        }
        if pose.orientation.angle() > cfg.max_tilt + 1e-9 {
            return Some(format!("tilt {:.3} at t = {t} us", pose.orientation.angle()));
        }
        if t == t1 {
            break;
        }
        t = (t + CHECK_STEP_US).min(t1);
    }
    for w in traj.waypoints().windows(2) {
        let rate = w[0].1.orientation.angle_to(&w[1].1.orientation) / (w[1].0 - w[0].0) as f64 * 1e6;
        if rate > cfg.max_rotation_rate + 1e-9 {
            return Some(format!("rotation rate {rate:.3} rad/s"));
        }
    }
    None
}

fn random_point(rng: &mut ChaCha8Rng, half: f64) -> Point3<f64> {
    if half <= 0.0 {
        return Point3::origin();
    }
    Point3::new(
        rng.random_range(-half..=half),
        rng.random_range(-half..=half),
        rng.random_range(-half..=half),
    )
}

/// Smooth random camera path through `scene`, checked at 1 ms resolution for
/// speed bounds, rotation rate, tilt and plane clearance. Rejected candidates
/// are redrawn with shrinking perturbations.
pub fn gen_trajectory(cfg: &TrajectoryConfig, scene: &PlanarScene, seed: u64) -> Result<Trajectory> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let duration = cfg.duration_us;

    if cfg.speed[1] == 0.0 {
        let start = cfg
            .start
            .map(Point3::from)
            .unwrap_or_else(|| random_point(&mut rng, cfg.start_box));
        let traj = Trajectory::constant(Pose::new(start, UnitQuaternion::identity()), 0, duration)?;
        return match check_candidate(cfg, scene, &traj) {
            None => Ok(traj),
            Some(reason) => Err(Error::Generation { rounds: 1, reason }),
        };
    }

    let mut last_reason = String::new();
    for round in 0..cfg.max_rounds {
        let damp = 1.0 - round as f64 / cfg.max_rounds as f64;
        let n = rng.random_range(cfg.waypoints[0]..=cfg.waypoints[1]);
        let start = cfg
            .start
            .map(Point3::from)
            .unwrap_or_else(|| random_point(&mut rng, cfg.start_box));
        let end = match cfg.end {
            Some(e) => Point3::from(e),
            None => {
                let spread = cfg.speed[1] - cfg.speed[0];
                let speed = rng.random_range(cfg.speed[0] + 0.25 * spread..=cfg.speed[1] - 0.25 * spread);
                start + random_unit(&mut rng).into_inner() * speed * duration as f64 * 1e-6
            }
        };
        let segment = (end - start).norm() / (n - 1) as f64;
        let step_angle = cfg.max_rotation_rate * duration as f64 * 1e-6 / (n - 1) as f64;
        let mut rotvec = Vector3::zeros();
        let mut waypoints = Vec::with_capacity(n);
        for k in 0..n {
            let t = (k as i128 * duration as i128 / (n - 1) as i128) as i64;
            let f = k as f64 / (n - 1) as f64;
            let mut pos = start + (end - start) * f;
            if k > 0 && k + 1 < n {
                let r = rng.random_range(0.0..=1.0) * cfg.jitter * damp * segment;
                pos += random_unit(&mut rng).into_inner() * r;
            }
            if k > 0 {
                let step = rng.random_range(0.0..=0.9) * step_angle * damp;
                rotvec += random_unit(&mut rng).into_inner() * step;
                let norm = rotvec.norm();
                if norm > cfg.max_tilt {
                    rotvec *= cfg.max_tilt / norm;
                }
            }
            waypoints.push((t, Pose::new(pos, UnitQuaternion::from_scaled_axis(rotvec))));
        }
        let traj = Trajectory::new(waypoints)?;
        match check_candidate(cfg, scene, &traj) {
            None => return Ok(traj),
            Some(reason) => last_reason = reason,
        }
    }
    Err(Error::Generation {
        rounds: cfg.max_rounds,
        reason: last_reason,
    })
}
