//! Camera poses and smooth trajectories through timed waypoints.

use nalgebra::{Point3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

/// Camera placement. `orientation` rotates camera-frame vectors into the
/// world frame; the camera looks along its local +z with +y pointing down.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub position: Point3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn new(position: Point3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Point3::origin(), UnitQuaternion::identity())
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(Point3::new(x, y, z), UnitQuaternion::identity())
    }

    #[inline]
    pub fn world_to_camera(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.orientation.inverse_transform_vector(&(p - self.position))
    }

    #[inline]
    pub fn camera_to_world_dir(&self, d: &Vector3<f64>) -> Vector3<f64> {
        self.orientation.transform_vector(d)
    }

    pub fn is_normalized(&self) -> bool {
        (self.orientation.quaternion().norm() - 1.0).abs() <= 1e-9
    }
}

/// Cubic Hermite position curve (Catmull-Rom tangents, time-parameterised)
/// and per-segment slerp for orientation. Times are microseconds.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    waypoints: Vec<(i64, Pose)>,
    tangents: Vec<Vector3<f64>>,
}

impl Trajectory {
    pub fn new(waypoints: Vec<(i64, Pose)>) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::Config("trajectory needs at least one waypoint".into()));
        }
        if let Some(w) = waypoints.windows(2).find(|w| w[1].0 <= w[0].0) {
            return Err(Error::Config(format!(
                "waypoint times must be strictly increasing ({} then {})",
                w[0].0, w[1].0
            )));
        }
        let n = waypoints.len();
        let pos = |i: usize| waypoints[i].1.position;
        let time = |i: usize| waypoints[i].0 as f64;
        let tangents = (0..n)
            .map(|i| {
                if n == 1 {
                    Vector3::zeros()
                } else {
                    let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
                    (pos(b) - pos(a)) / (time(b) - time(a))
                }
            })
            .collect();
        Ok(Self {
            waypoints,
            tangents,
        })
    }

    /// A trajectory that holds `pose` over `[t0, t1]`.
    pub fn constant(pose: Pose, t0: i64, t1: i64) -> Result<Self> {
        if t1 <= t0 {
            return Self::new(vec![(t0, pose)]);
        }
        Self::new(vec![(t0, pose), (t1, pose)])
    }

    pub fn waypoints(&self) -> &[(i64, Pose)] {
        &self.waypoints
    }

    pub fn start(&self) -> i64 {
        self.waypoints[0].0
    }

    pub fn end(&self) -> i64 {
        self.waypoints[self.waypoints.len() - 1].0
    }

    fn check_range(&self, t: f64) -> Result<()> {
        if t < self.start() as f64 || t > self.end() as f64 || !t.is_finite() {
            return Err(Error::OutOfRange {
                t: t as i64,
                start: self.start(),
                end: self.end(),
            });
        }
        Ok(())
    }

    /// Segment index and local parameter in `[0, 1]`.
    fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.waypoints.len();
        let k = self
            .waypoints
            .partition_point(|(tk, _)| (*tk as f64) <= t)
            .saturating_sub(1)
            .min(n.saturating_sub(2));
        let (t0, t1) = (self.waypoints[k].0 as f64, self.waypoints[k + 1].0 as f64);
        (k, ((t - t0) / (t1 - t0)).clamp(0.0, 1.0))
    }

    pub fn pose_at(&self, t: i64) -> Result<Pose> {
        if let Ok(i) = self.waypoints.binary_search_by_key(&t, |(tk, _)| *tk) {
            return Ok(self.waypoints[i].1);
        }
        self.pose_at_f64(t as f64)
    }

    /// Pose at a fractional microsecond time.
    pub fn pose_at_f64(&self, t: f64) -> Result<Pose> {
        self.check_range(t)?;
        if self.waypoints.len() == 1 {
            return Ok(self.waypoints[0].1);
        }
        let (k, s) = self.locate(t);
        let (t0, a) = self.waypoints[k];
        let (t1, b) = self.waypoints[k + 1];
        if a == b && self.tangents[k] == Vector3::zeros() && self.tangents[k + 1] == Vector3::zeros() {
            return Ok(a);
        }
        let h = (t1 - t0) as f64;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let p = a.position.coords * h00
            + self.tangents[k] * (h10 * h)
            + b.position.coords * h01
            + self.tangents[k + 1] * (h11 * h);
        Ok(Pose::new(Point3::from(p), slerp(&a.orientation, &b.orientation, s)))
    }

    /// Positional velocity in scene units per microsecond.
    pub fn velocity_at(&self, t: f64) -> Result<Vector3<f64>> {
        self.check_range(t)?;
        if self.waypoints.len() == 1 {
            return Ok(Vector3::zeros());
        }
        let (k, s) = self.locate(t);
        let (t0, a) = self.waypoints[k];
        let (t1, b) = self.waypoints[k + 1];
        if a == b && self.tangents[k] == Vector3::zeros() && self.tangents[k + 1] == Vector3::zeros() {
            return Ok(Vector3::zeros());
        }
        let h = (t1 - t0) as f64;
        let s2 = s * s;
        let d00 = 6.0 * s2 - 6.0 * s;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = -6.0 * s2 + 6.0 * s;
        let d11 = 3.0 * s2 - 2.0 * s;
        Ok((a.position.coords * d00 + b.position.coords * d01) / h
            + self.tangents[k] * d10
            + self.tangents[k + 1] * d11)
    }
}

/// Shortest-arc spherical linear interpolation.
pub fn slerp(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>, s: f64) -> UnitQuaternion<f64> {
    a.try_slerp(b, s, 1e-12).unwrap_or(*a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rot_z(angle: f64) -> UnitQuaternion<f64> {
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), angle)
    }

    #[test]
    fn waypoints_are_reproduced_exactly() {
        let wps = vec![
            (0, Pose::new(Point3::new(0.0, 0.0, 0.0), rot_z(0.0))),
            (1000, Pose::new(Point3::new(1.0, 0.3, -0.2), rot_z(0.2))),
            (2500, Pose::new(Point3::new(1.5, -0.1, 0.1), rot_z(-0.1))),
            (4000, Pose::new(Point3::new(2.0, 0.0, 0.4), rot_z(0.3))),
        ];
        let traj = Trajectory::new(wps.clone()).unwrap();
        for (t, pose) in wps {
            assert_eq!(traj.pose_at(t).unwrap(), pose);
        }
    }

    #[test]
    fn two_waypoint_translation_is_linear() {
        let traj = Trajectory::new(vec![
            (0, Pose::from_translation(0.0, 0.0, 0.0)),
            (1000, Pose::from_translation(2.0, -4.0, 6.0)),
        ])
        .unwrap();
        let mid = traj.pose_at(500).unwrap().position;
        assert_relative_eq!(mid, Point3::new(1.0, -2.0, 3.0), epsilon = 1e-12);
        let v = traj.velocity_at(250.0).unwrap();
        assert_relative_eq!(v, Vector3::new(2.0, -4.0, 6.0) / 1000.0, epsilon = 1e-15);
    }

    #[test]
    fn quarter_slerp_of_right_angle_about_z() {
        let traj = Trajectory::new(vec![
            (0, Pose::new(Point3::origin(), rot_z(0.0))),
            (4000, Pose::new(Point3::origin(), rot_z(std::f64::consts::FRAC_PI_2))),
        ])
        .unwrap();
        let q = traj.pose_at(1000).unwrap().orientation;
        // Closed form: slerp(q0, q1, s) = rotation by s * angle about the shared axis.
        let (axis, angle) = q.axis_angle().unwrap();
        assert_relative_eq!(angle, 22.5f64.to_radians(), epsilon = 1e-12);
        assert_relative_eq!(axis.into_inner(), Vector3::z(), epsilon = 1e-12);
    }

    #[test]
    fn position_curve_is_c1_at_interior_waypoints() {
        let traj = Trajectory::new(vec![
            (0, Pose::from_translation(0.0, 0.0, 0.0)),
            (1000, Pose::from_translation(1.0, 0.5, 0.0)),
            (3000, Pose::from_translation(1.5, -0.5, 0.2)),
            (3500, Pose::from_translation(2.0, 0.0, 0.0)),
        ])
        .unwrap();
        for t in [1000.0, 3000.0] {
            let before = traj.velocity_at(t - 1e-6).unwrap();
            let after = traj.velocity_at(t + 1e-6).unwrap();
            assert_relative_eq!(before, after, epsilon = 1e-9);
        }
    }

    #[test]
    fn out_of_range_time_is_an_error() {
        let traj = Trajectory::constant(Pose::identity(), 0, 100).unwrap();
        assert!(matches!(traj.pose_at(101), Err(Error::OutOfRange { .. })));
        assert!(matches!(traj.pose_at(-1), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn non_increasing_waypoints_are_rejected() {
        let r = Trajectory::new(vec![(0, Pose::identity()), (0, Pose::identity())]);
        assert!(r.is_err());
    }

    #[test]
    fn interpolated_orientation_stays_unit() {
        let traj = Trajectory::new(vec![
            (0, Pose::new(Point3::origin(), rot_z(0.0))),
            (
                700,
                Pose::new(
                    Point3::origin(),
                    UnitQuaternion::from_euler_angles(0.3, -0.2, 0.9),
                ),
            ),
        ])
        .unwrap();
        for t in 0..=700 {
            assert!(traj.pose_at(t).unwrap().is_normalized());
        }
    }
}
