//! Depth-ordered textured planes viewed by a pinhole camera.
//!
//! Rendering, optical flow and occlusion are all closed-form: every visible
//! point lies on a plane, so its motion between two camera poses is the
//! plane-induced homography.

mod generate;
mod render;

use nalgebra::{Point3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generate::{gen_scene, gen_trajectory, SceneConfig, TextureConfig, TrajectoryConfig};
pub use render::{
    analytic_flow, flow_at, max_displacement, render_frame, CameraView, Correspondence, FlowModel,
    Hit, PlaneView,
};
pub(crate) use render::one_way_displacement;

pub const MAX_PLANES: usize = 8;
pub const MAX_SINUSOIDS: usize = 8;

/// Pinhole intrinsics in pixels. Pixel `(x, y)` has its centre at integer
/// coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// Centred principal point and a horizontal field of view in degrees.
    pub fn from_fov(width: usize, height: usize, hfov_deg: f64) -> Result<Self> {
        let f = width as f64 / (2.0 * (hfov_deg.to_radians() / 2.0).tan());
        Self::new(
            f,
            f,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            width,
            height,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.fx.is_finite()
            && self.fy.is_finite()
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid camera intrinsics {self:?}")))
        }
    }

    /// Ray direction (camera frame, unit depth) through a pixel position.
    #[inline]
    pub fn unproject(&self, x: f64, y: f64) -> Vector3<f64> {
        Vector3::new((x - self.cx) / self.fx, (y - self.cy) / self.fy, 1.0)
    }

    /// Pixel position of a camera-frame point, `None` at or behind the camera.
    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        (p.z > 0.0).then(|| (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= -0.5 && y >= -0.5 && x < self.width as f64 - 0.5 && y < self.height as f64 - 0.5
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub amplitude: f64,
    /// Cycles per scene unit along the plane's two in-plane axes.
    pub frequency: [f64; 2],
    pub phase: f64,
}

/// Periodic grid of random values, bilinearly interpolated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub cell: f64,
    pub period: usize,
    pub values: Vec<f64>,
}

impl Lattice {
    pub fn sample(&self, s: f64, t: f64) -> f64 {
        let n = self.period as i64;
        let (gs, gt) = (s / self.cell, t / self.cell);
        let (fs, ft) = (gs.floor(), gt.floor());
        let (ws, wt) = (gs - fs, gt - ft);
        let at = |i: i64, j: i64| {
            let (i, j) = (i.rem_euclid(n) as usize, j.rem_euclid(n) as usize);
            self.values[j * self.period + i]
        };
        let (i, j) = (fs as i64, ft as i64);
        let top = at(i, j) * (1.0 - ws) + at(i + 1, j) * ws;
        let bottom = at(i, j + 1) * (1.0 - ws) + at(i + 1, j + 1) * ws;
        top * (1.0 - wt) + bottom * wt
    }
}

/// Band-limited procedural intensity in plane coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Texture {
    pub base: f64,
    pub sinusoids: Vec<Sinusoid>,
    pub lattice: Option<Lattice>,
}

impl Texture {
    pub fn constant(value: f64) -> Self {
        Self {
            base: value,
            sinusoids: Vec::new(),
            lattice: None,
        }
    }

    pub fn eval(&self, s: f64, t: f64) -> f64 {
        let mut v = self.base;
        for w in &self.sinusoids {
            let arg = std::f64::consts::TAU * (w.frequency[0] * s + w.frequency[1] * t) + w.phase;
            v += w.amplitude * arg.sin();
        }
        if let Some(l) = &self.lattice {
            v += l.sample(s, t);
        }
        v.clamp(0.0, 1.0)
    }
}

/// Axis-aligned rectangle in plane coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub s_min: f64,
    pub s_max: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl Extent {
    pub fn centered(half_s: f64, half_t: f64) -> Self {
        Self {
            s_min: -half_s,
            s_max: half_s,
            t_min: -half_t,
            t_max: half_t,
        }
    }

    #[inline]
    pub fn contains(&self, s: f64, t: f64) -> bool {
        s >= self.s_min && s <= self.s_max && t >= self.t_min && t <= self.t_max
    }
}

/// The plane `{X : n.X = d}`. The scene origin lies on the side `n.X < d`
/// and cameras must stay there.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    normal: Unit<Vector3<f64>>,
    offset: f64,
    axis_s: Vector3<f64>,
    axis_t: Vector3<f64>,
    pub extent: Extent,
    pub texture: Texture,
}

impl Plane {
    pub fn new(normal: Vector3<f64>, offset: f64, extent: Extent, texture: Texture) -> Result<Self> {
        if !(offset > 0.0) {
            return Err(Error::Config(format!("plane offset must be positive, got {offset}")));
        }
        let normal = Unit::try_new(normal, 1e-12)
            .ok_or_else(|| Error::Config("plane normal must be non-zero".into()))?;
        // World y is "down" for the default camera; pick a hint not parallel to n.
        let hint = if normal.y.abs() < 0.9 {
            Vector3::y()
        } else {
            Vector3::x()
        };
        let axis_s = hint.cross(&normal).normalize();
        let axis_t = normal.cross(&axis_s);
        Ok(Self {
            normal,
            offset,
            axis_s,
            axis_t,
            extent,
            texture,
        })
    }

    /// Plane facing the default camera at depth `z`.
    pub fn fronto_parallel(z: f64, extent: Extent, texture: Texture) -> Result<Self> {
        Self::new(Vector3::z(), z, extent, texture)
    }

    pub fn normal(&self) -> &Unit<Vector3<f64>> {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Point of the plane closest to the origin; the plane-coordinate origin.
    pub fn anchor(&self) -> Point3<f64> {
        Point3::from(self.normal.into_inner() * self.offset)
    }

    pub fn axes(&self) -> (&Vector3<f64>, &Vector3<f64>) {
        (&self.axis_s, &self.axis_t)
    }

    /// Positive on the origin side.
    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        self.offset - self.normal.dot(&p.coords)
    }

    pub fn plane_coords(&self, p: &Point3<f64>) -> (f64, f64) {
        let r = p - self.anchor();
        (r.dot(&self.axis_s), r.dot(&self.axis_t))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanarScene {
    planes: Vec<Plane>,
    pub background: f64,
}

impl PlanarScene {
    /// Planes are kept sorted by offset so iteration runs near to far.
    pub fn new(mut planes: Vec<Plane>, background: f64) -> Result<Self> {
        if planes.len() > MAX_PLANES {
            return Err(Error::Config(format!(
                "at most {MAX_PLANES} planes supported, got {}",
                planes.len()
            )));
        }
        if !(0.0..=1.0).contains(&background) {
            return Err(Error::Config(format!("background {background} outside [0, 1]")));
        }
        if planes.iter().any(|p| p.texture.sinusoids.len() > MAX_SINUSOIDS) {
            return Err(Error::Config(format!("textures use at most {MAX_SINUSOIDS} sinusoids")));
        }
        planes.sort_by(|a, b| a.offset.total_cmp(&b.offset));
        Ok(Self { planes, background })
    }

    /// A scene with no geometry; every pixel sees the background.
    pub fn empty(background: f64) -> Self {
        Self {
            planes: Vec::new(),
            background,
        }
    }

    pub fn planes(&self) -> &[Plane] {
        &self.planes
    }

    /// Smallest signed distance from `p` to any plane (infinite if none).
    pub fn clearance(&self, p: &Point3<f64>) -> f64 {
        self.planes
            .iter()
            .map(|pl| pl.signed_distance(p))
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intrinsics_reject_principal_point_outside_image() {
        assert!(CameraIntrinsics::new(10.0, 10.0, 4.0, 2.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(0.0, 10.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(10.0, 10.0, 1.5, 1.5, 4, 4).is_ok());
    }

    #[test]
    fn project_inverts_unproject() {
        let k = CameraIntrinsics::from_fov(64, 48, 70.0).unwrap();
        let ray = k.unproject(10.25, 37.5) * 3.0;
        let (x, y) = k.project(&ray).unwrap();
        assert!((x - 10.25).abs() < 1e-12 && (y - 37.5).abs() < 1e-12);
        assert!(k.project(&Vector3::new(0.0, 0.0, -1.0)).is_none());
    }

    #[test]
    fn plane_axes_are_orthonormal() {
        let p = Plane::new(Vector3::new(0.2, -0.1, 1.0), 3.0, Extent::centered(1.0, 1.0), Texture::constant(0.5)).unwrap();
        let (s, t) = p.axes();
        let n = p.normal();
        assert!(s.dot(t).abs() < 1e-12 && s.dot(n).abs() < 1e-12 && t.dot(n).abs() < 1e-12);
        assert!((s.norm() - 1.0).abs() < 1e-12 && (t.norm() - 1.0).abs() < 1e-12);
        assert_eq!(p.plane_coords(&p.anchor()), (0.0, 0.0));
    }

    #[test]
    fn non_positive_offset_is_rejected() {
        assert!(Plane::fronto_parallel(0.0, Extent::centered(1.0, 1.0), Texture::constant(0.5)).is_err());
    }

    #[test]
    fn too_many_planes_is_rejected() {
        let planes = (0..9)
            .map(|i| Plane::fronto_parallel(1.0 + i as f64, Extent::centered(1.0, 1.0), Texture::constant(0.5)).unwrap())
            .collect();
        assert!(PlanarScene::new(planes, 0.5).is_err());
    }

    #[test]
    fn lattice_is_periodic_and_interpolates() {
        let l = Lattice {
            cell: 0.5,
            period: 2,
            values: vec![0.0, 1.0, 2.0, 3.0],
        };
        assert_eq!(l.sample(0.0, 0.0), 0.0);
        assert_eq!(l.sample(0.5, 0.0), 1.0);
        assert_eq!(l.sample(0.25, 0.0), 0.5);
        assert_eq!(l.sample(0.25, 0.25), 1.5);
        assert_eq!(l.sample(1.0, 1.0), l.sample(0.0, 0.0));
        assert_eq!(l.sample(-0.75, 0.1), l.sample(0.25, 0.1));
    }

    #[test]
    fn texture_is_clamped() {
        let t = Texture {
            base: 0.9,
            sinusoids: vec![Sinusoid {
                amplitude: 0.5,
                frequency: [1.0, 0.0],
                phase: 0.0,
            }],
            lattice: None,
        };
        assert_eq!(t.eval(0.25, 0.0), 1.0);
        assert!((t.eval(0.75, 0.0) - 0.4).abs() < 1e-12);
    }
}
