use nalgebra::{Matrix3, Vector3};

use super::{CameraIntrinsics, PlanarScene};
use crate::frame::{Frame, FlowField, Grid};
use crate::par;
use crate::pose::Pose;

/// A plane expressed in one camera's frame.
#[derive(Clone, Copy, Debug)]
pub struct PlaneView {
    pub normal: Vector3<f64>,
    /// Distance from the camera centre to the plane; positive when visible.
    pub distance: f64,
    axis_s: Vector3<f64>,
    axis_t: Vector3<f64>,
    s0: f64,
    t0: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub plane: usize,
    /// Camera-frame z of the intersection.
    pub depth: f64,
    pub s: f64,
    pub t: f64,
}

/// Scene geometry pre-transformed into the frame of one camera pose.
#[derive(Clone, Debug)]
pub struct CameraView<'a> {
    scene: &'a PlanarScene,
    pub pose: Pose,
    pub intrinsics: CameraIntrinsics,
    planes: Vec<PlaneView>,
}

impl<'a> CameraView<'a> {
    pub fn new(scene: &'a PlanarScene, pose: Pose, intrinsics: CameraIntrinsics) -> Self {
        let rot = pose.orientation;
        let planes = scene
            .planes()
            .iter()
            .map(|pl| {
                let (s, t) = pl.axes();
                let rel = pose.position - pl.anchor();
                PlaneView {
                    normal: rot.inverse_transform_vector(pl.normal()),
                    distance: pl.signed_distance(&pose.position),
                    axis_s: rot.inverse_transform_vector(s),
                    axis_t: rot.inverse_transform_vector(t),
                    s0: rel.dot(s),
                    t0: rel.dot(t),
                }
            })
            .collect();
        Self {
            scene,
            pose,
            intrinsics,
            planes,
        }
    }

    pub fn plane_views(&self) -> &[PlaneView] {
        &self.planes
    }

    #[inline]
    fn intersect(&self, index: usize, ray: &Vector3<f64>) -> Option<Hit> {
        let pv = &self.planes[index];
        if pv.distance <= 0.0 {
            return None;
        }
        let denom = pv.normal.dot(ray);
        if denom <= 0.0 {
            return None;
        }
        let depth = pv.distance / denom;
        let s = pv.s0 + depth * pv.axis_s.dot(ray);
        let t = pv.t0 + depth * pv.axis_t.dot(ray);
        self.scene.planes()[index]
            .extent
            .contains(s, t)
            .then_some(Hit {
                plane: index,
                depth,
                s,
                t,
            })
    }

    /// Nearest plane hit along the ray through pixel position `(x, y)`.
    pub fn cast(&self, x: f64, y: f64) -> Option<Hit> {
        let ray = self.intrinsics.unproject(x, y);
        let mut best: Option<Hit> = None;
        for i in 0..self.planes.len() {
            if let Some(h) = self.intersect(i, &ray) {
                if best.is_none_or(|b| h.depth < b.depth) {
                    best = Some(h);
                }
            }
        }
        best
    }

    /// Whether some plane other than `plane` is hit in front of `depth`.
    pub fn occluded(&self, x: f64, y: f64, depth: f64, plane: usize) -> bool {
        let ray = self.intrinsics.unproject(x, y);
        let limit = depth * (1.0 - 1e-9);
        (0..self.planes.len())
            .filter(|&i| i != plane)
            .filter_map(|i| self.intersect(i, &ray))
            .any(|h| h.depth < limit)
    }

    pub fn intensity(&self, hit: Option<Hit>) -> f64 {
        match hit {
            Some(h) => self.scene.planes()[h.plane].texture.eval(h.s, h.t),
            None => self.scene.background,
        }
    }

    /// Index of the visible plane per pixel.
    pub fn plane_map(&self) -> Grid<Option<u8>> {
        let (w, h) = (self.intrinsics.width, self.intrinsics.height);
        let data = par::collect_rows(h, |y| {
            (0..w)
                .map(|x| self.cast(x as f64, y as f64).map(|h| h.plane as u8))
                .collect()
        });
        Grid::from_vec(w, h, data).expect("row lengths match width")
    }
}

/// Ray-casts every pixel and samples the nearest plane's texture.
pub fn render_frame(scene: &PlanarScene, pose: &Pose, k: &CameraIntrinsics, t: i64) -> Frame {
    let view = CameraView::new(scene, *pose, *k);
    let data = par::collect_rows(k.height, |y| {
        (0..k.width)
            .map(|x| view.intensity(view.cast(x as f64, y as f64)))
            .collect()
    });
    Frame::new(Grid::from_vec(k.width, k.height, data).expect("row lengths match width"), t)
}

/// Homographies mapping pixels from pose `from` to pose `to`, one per plane.
fn plane_homographies(from: &CameraView<'_>, to: &Pose) -> Vec<Option<Matrix3<f64>>> {
    let k = &from.intrinsics;
    let kmat = Matrix3::new(k.fx, 0.0, k.cx, 0.0, k.fy, k.cy, 0.0, 0.0, 1.0);
    let kinv = Matrix3::new(
        1.0 / k.fx,
        0.0,
        -k.cx / k.fx,
        0.0,
        1.0 / k.fy,
        -k.cy / k.fy,
        0.0,
        0.0,
        1.0,
    );
    // X_to = R X_from + t for camera-frame points.
    let rel_rot = (to.orientation.inverse() * from.pose.orientation).to_rotation_matrix();
    let rel_t = to.orientation.inverse_transform_vector(&(from.pose.position - to.position));
    from.plane_views()
        .iter()
        .map(|pv| {
            (pv.distance > 0.0).then(|| {
                kmat * (rel_rot.matrix() + rel_t * pv.normal.transpose() / pv.distance) * kinv
            })
        })
        .collect()
}

/// Pixel correspondences between two poses of the same scene.
pub struct FlowModel<'a> {
    from: CameraView<'a>,
    to: CameraView<'a>,
    homographies: Vec<Option<Matrix3<f64>>>,
}

/// Where a source pixel lands, before occlusion and bounds checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correspondence {
    pub x: f64,
    pub y: f64,
    pub plane: usize,
    /// Depth of the point in the target camera.
    pub depth: f64,
}

impl<'a> FlowModel<'a> {
    pub fn new(scene: &'a PlanarScene, from: &Pose, to: &Pose, k: &CameraIntrinsics) -> Self {
        let from = CameraView::new(scene, *from, *k);
        let to = CameraView::new(scene, *to, *k);
        let homographies = plane_homographies(&from, &to.pose);
        Self {
            from,
            to,
            homographies,
        }
    }

    pub fn source(&self) -> &CameraView<'a> {
        &self.from
    }

    /// Maps a point known to lie on `plane` at source depth `depth`.
    #[inline]
    pub fn map_on_plane(&self, x: f64, y: f64, plane: usize, depth: f64) -> Option<Correspondence> {
        let h = self.homographies[plane].as_ref()?;
        let p = h * Vector3::new(x, y, 1.0);
        (p.z > 0.0).then(|| Correspondence {
            x: p.x / p.z,
            y: p.y / p.z,
            plane,
            depth: depth * p.z,
        })
    }

    pub fn correspond(&self, x: f64, y: f64) -> Option<Correspondence> {
        let hit = self.from.cast(x, y)?;
        self.map_on_plane(x, y, hit.plane, hit.depth)
    }

    /// Flow vector at `(x, y)` when the point stays visible and in view.
    pub fn flow(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let c = self.correspond(x, y)?;
        let k = &self.to.intrinsics;
        (k.contains(c.x, c.y) && !self.to.occluded(c.x, c.y, c.depth, c.plane))
            .then_some((c.x - x, c.y - y))
    }
}

/// Dense flow from `pose_i` to `pose_j`. Invalid where the pixel sees no
/// plane, the point leaves the image, or a nearer plane hides it at `pose_j`.
pub fn analytic_flow(scene: &PlanarScene, pose_i: &Pose, pose_j: &Pose, k: &CameraIntrinsics) -> FlowField {
    let model = FlowModel::new(scene, pose_i, pose_j, k);
    let data = par::collect_rows(k.height, |y| {
        (0..k.width)
            .map(|x| match model.flow(x as f64, y as f64) {
                Some((u, v)) => (u, v, true),
                None => (0.0, 0.0, false),
            })
            .collect()
    });
    let u = Grid::from_vec(k.width, k.height, data.iter().map(|d| d.0).collect()).expect("shape");
    let v = Grid::from_vec(k.width, k.height, data.iter().map(|d| d.1).collect()).expect("shape");
    let valid = Grid::from_vec(k.width, k.height, data.iter().map(|d| d.2).collect()).expect("shape");
    FlowField { u, v, valid }
}

/// Flow at a single (possibly fractional) pixel position.
pub fn flow_at(
    scene: &PlanarScene,
    pose_i: &Pose,
    pose_j: &Pose,
    k: &CameraIntrinsics,
    x: f64,
    y: f64,
) -> Option<(f64, f64)> {
    FlowModel::new(scene, pose_i, pose_j, k).flow(x, y)
}

/// Largest one-way pixel displacement over every pixel that sees a plane,
/// ignoring occlusion and image bounds.
pub(crate) fn one_way_displacement(model: &FlowModel<'_>, planes: &Grid<Option<u8>>) -> f64 {
    let w = planes.width();
    par::max_over_rows(planes.height(), |y| {
        let mut m: f64 = 0.0;
        for x in 0..w {
            if let Some(p) = *planes.get(x, y) {
                let (xf, yf) = (x as f64, y as f64);
                let Some(h) = model.homographies[p as usize].as_ref() else {
                    continue;
                };
                let q = h * Vector3::new(xf, yf, 1.0);
                let d = if q.z > 0.0 {
                    (q.x / q.z - xf).hypot(q.y / q.z - yf)
                } else {
                    f64::INFINITY
                };
                m = m.max(d);
            }
        }
        m
    })
}

/// Maximum displacement between two poses, forward and backward. This
/// bounds the flow magnitude at every valid pixel in both directions.
pub fn max_displacement(scene: &PlanarScene, a: &Pose, b: &Pose, k: &CameraIntrinsics) -> f64 {
    let fwd = FlowModel::new(scene, a, b, k);
    let bwd = FlowModel::new(scene, b, a, k);
    let fa = one_way_displacement(&fwd, &fwd.from.plane_map());
    let fb = one_way_displacement(&bwd, &bwd.from.plane_map());
    fa.max(fb)
}
