//! Keypoint reprojection: a pinhole camera with explicit extrinsics and
//! FOV-derived intrinsics, moved by bounded per-step actions.
//!
//! Camera frame: looks along −z, x right, y up. Pixel origin is the top-left
//! corner with v growing downward. The observed state stores pixels
//! normalised to [−1, 1] about the principal point.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{Quat, Rng, RngError, Vec3};
use crate::tasks::TaskParams;

pub const DEFAULT_KEYPOINTS: usize = 8;
/// Camera translation per unit action, metres per step.
pub const TRANSLATION_STEP_MAX: f64 = 0.05;
/// Camera rotation per unit action, radians per step (2°).
pub const ROTATION_STEP_MAX: f64 = 2.0 * std::f64::consts::PI / 180.0;
pub const Z_NEAR: f64 = 1e-3;
/// Weight of the previous action when generating smoothed camera motion.
pub const ACTION_MOMENTUM: f64 = 0.8;

/// Keypoint scene box in the initial camera frame: x, y, z ranges.
pub const SCENE_BOX: [(f64, f64); 3] = [(-2.0, 2.0), (-1.0, 1.0), (-6.0, -2.0)];

const POSE_LEN: usize = 7;
const KEYPOINT_LEN: usize = 6;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("camera action component {index} = {value} is outside [-1, 1]")]
    ActionOutOfRange { index: usize, value: f64 },
    #[error("camera action must have 6 components, got {0}")]
    ActionShape(usize),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("reprojection state length {0} is not 7 + 6k")]
    StateShape(usize),
    #[error(transparent)]
    Range(#[from] RngError),
    #[error("missing parameter `{0}`")]
    MissingParam(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub position: Vec3<f64>,
    /// World-from-camera rotation.
    pub orientation: Quat<f64>,
}

impl Default for CameraPose {
    fn default() -> Self {
        Self { position: Vec3::zero(), orientation: Quat::identity() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub width: f64,
    pub height: f64,
    pub fov_y: f64,
}

impl Intrinsics {
    pub fn new(width: f64, height: f64, fov_y: f64) -> Result<Self, GeometryError> {
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics(format!("image size {width}x{height}")));
        }
        if !(fov_y > 0.0 && fov_y < std::f64::consts::PI) {
            return Err(GeometryError::InvalidIntrinsics(format!("fov_y {fov_y}")));
        }
        Ok(Self { width, height, fov_y })
    }

    pub fn from_params(p: &TaskParams) -> Result<Self, GeometryError> {
        let get = |k: &str| p.get(k).map_err(|_| GeometryError::MissingParam(k.to_string()));
        Self::new(get("image_width")?, get("image_height")?, get("fov_y")?)
    }

    /// Focal length in pixels.
    pub fn focal(&self) -> f64 {
        self.height / (2.0 * (self.fov_y / 2.0).tan())
    }

    pub fn cx(&self) -> f64 {
        self.width / 2.0
    }

    pub fn cy(&self) -> f64 {
        self.height / 2.0
    }

    pub fn normalize(&self, u: f64, v: f64) -> (f64, f64) {
        ((u - self.cx()) / self.cx(), (v - self.cy()) / self.cy())
    }

    pub fn denormalize(&self, un: f64, vn: f64) -> (f64, f64) {
        (self.cx() + un * self.cx(), self.cy() + vn * self.cy())
    }
}

/// Pixel coordinates of a projected point. `u` and `v` are NaN when the
/// point is not in front of the near plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub visible: bool,
}

pub fn world_to_camera(pose: &CameraPose, p_world: Vec3<f64>) -> Vec3<f64> {
    pose.orientation.inverse_rotate(p_world - pose.position)
}

pub fn project(pose: &CameraPose, intr: &Intrinsics, p_world: Vec3<f64>) -> Projection {
    let pc = world_to_camera(pose, p_world);
    if !(pc.z < -Z_NEAR) {
        return Projection { u: f64::NAN, v: f64::NAN, visible: false };
    }
    let f = intr.focal();
    let depth = -pc.z;
    let u = intr.cx() + f * (pc.x / depth);
    let v = intr.cy() - f * (pc.y / depth);
    let visible = (0.0..=intr.width).contains(&u) && (0.0..=intr.height).contains(&v);
    Projection { u, v, visible }
}

/// Point on the ray through pixel `(u, v)` at the given depth along −z.
pub fn back_project(pose: &CameraPose, intr: &Intrinsics, u: f64, v: f64, depth: f64) -> Vec3<f64> {
    let f = intr.focal();
    let pc = Vec3::new((u - intr.cx()) * depth / f, -(v - intr.cy()) * depth / f, -depth);
    pose.orientation.rotate(pc) + pose.position
}

pub fn check_action(a: &[f64]) -> Result<(), GeometryError> {
    if a.len() != 6 {
        return Err(GeometryError::ActionShape(a.len()));
    }
    match a.iter().enumerate().find(|(_, x)| !(x.abs() <= 1.0)) {
        Some((index, &value)) => Err(GeometryError::ActionOutOfRange { index, value }),
        None => Ok(()),
    }
}

/// Translates in the camera frame, then applies intrinsic yaw (about y),
/// pitch (about x) and roll (about z) increments.
pub fn step_camera(pose: &CameraPose, a: &[f64]) -> Result<CameraPose, GeometryError> {
    check_action(a)?;
    let q = pose.orientation;
    let shift = Vec3::new(a[0], a[1], a[2]).scale(TRANSLATION_STEP_MAX);
    let position = pose.position + q.rotate(shift);
    let orientation = if a[3] == 0.0 && a[4] == 0.0 && a[5] == 0.0 {
        q
    } else {
        let yaw = Quat::from_axis_angle(Vec3::unit_y(), a[3] * ROTATION_STEP_MAX);
        let pitch = Quat::from_axis_angle(Vec3::unit_x(), a[4] * ROTATION_STEP_MAX);
        let roll = Quat::from_axis_angle(Vec3::unit_z(), a[5] * ROTATION_STEP_MAX);
        (q * yaw * pitch * roll).normalized()
    };
    Ok(CameraPose { position, orientation })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub world: Vec3<f64>,
    /// Normalised pixel; holds the last visible value while hidden.
    pub pixel: (f64, f64),
    pub visible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReprojectionState {
    pub camera: CameraPose,
    pub keypoints: Vec<Keypoint>,
}

impl ReprojectionState {
    pub fn from_flat(s: &[f64]) -> Result<Self, GeometryError> {
        if s.len() < POSE_LEN || (s.len() - POSE_LEN) % KEYPOINT_LEN != 0 {
            return Err(GeometryError::StateShape(s.len()));
        }
        let camera = CameraPose { position: Vec3::from_slice(&s[0..3]), orientation: Quat::from_slice(&s[3..7]) };
        let keypoints = s[POSE_LEN..]
            .chunks_exact(KEYPOINT_LEN)
            .map(|c| Keypoint { world: Vec3::from_slice(c), pixel: (c[3], c[4]), visible: c[5] == 1.0 })
            .collect();
        Ok(Self { camera, keypoints })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(POSE_LEN + KEYPOINT_LEN * self.keypoints.len());
        out.extend(self.camera.position.to_array());
        out.extend(self.camera.orientation.to_array());
        for k in &self.keypoints {
            out.extend(k.world.to_array());
            out.extend([k.pixel.0, k.pixel.1, if k.visible { 1.0 } else { 0.0 }]);
        }
        out
    }

    fn reproject(&mut self, intr: &Intrinsics) {
        for k in &mut self.keypoints {
            let p = project(&self.camera, intr, k.world);
            k.visible = p.visible;
            if p.visible {
                k.pixel = intr.normalize(p.u, p.v);
            }
        }
    }
}

pub fn step_reprojection(
    s: &ReprojectionState,
    a: &[f64],
    intr: &Intrinsics,
) -> Result<ReprojectionState, GeometryError> {
    let mut next = s.clone();
    next.camera = step_camera(&s.camera, a)?;
    next.reproject(intr);
    Ok(next)
}

pub(crate) fn step_reprojection_state(p: &TaskParams, s: &[f64], a: &[f64]) -> Result<Vec<f64>, GeometryError> {
    let intr = Intrinsics::from_params(p)?;
    Ok(step_reprojection(&ReprojectionState::from_flat(s)?, a, &intr)?.to_flat())
}

/// Camera at the origin looking down −z, keypoints drawn uniformly in
/// [`SCENE_BOX`]. Keypoints that start hidden hold pixel (0, 0).
pub(crate) fn reprojection_init(p: &TaskParams, rng: &mut Rng) -> Result<Vec<f64>, GeometryError> {
    let intr = Intrinsics::from_params(p)?;
    let mut keypoints = Vec::with_capacity(DEFAULT_KEYPOINTS);
    for _ in 0..DEFAULT_KEYPOINTS {
        let mut c = [0.0; 3];
        for (x, (lo, hi)) in c.iter_mut().zip(SCENE_BOX) {
            *x = rng.uniform(lo, hi)?;
        }
        keypoints.push(Keypoint { world: Vec3::from_slice(&c), pixel: (0.0, 0.0), visible: false });
    }
    let mut s = ReprojectionState { camera: CameraPose::default(), keypoints };
    s.reproject(&intr);
    Ok(s.to_flat())
}

/// Next action of a momentum-smoothed uniform random camera walk.
pub fn smoothed_action(prev: &[f64], rng: &mut Rng) -> Result<Vec<f64>, RngError> {
    prev.iter()
        .map(|&a| Ok(ACTION_MOMENTUM * a + (1.0 - ACTION_MOMENTUM) * rng.uniform(-1.0, 1.0)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intr() -> Intrinsics {
        Intrinsics::new(100.0, 100.0, std::f64::consts::FRAC_PI_2).unwrap()
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let pose = CameraPose::default();
        for depth in [0.01, 1.0, 7.5, 1e4] {
            let p = project(&pose, &intr(), Vec3::new(0.0, 0.0, -depth));
            assert_eq!((p.u, p.v, p.visible), (50.0, 50.0, true));
        }
    }

    #[test]
    fn pinhole_formula() {
        let i = intr();
        assert!((i.focal() - 50.0).abs() < 1e-12);
        let p = project(&CameraPose::default(), &i, Vec3::new(1.0, 0.0, -5.0));
        assert!((p.u - 60.0).abs() < 1e-12, "{}", p.u);
        assert_eq!(p.v, 50.0);
    }

    #[test]
    fn behind_camera_is_invisible() {
        let p = project(&CameraPose::default(), &intr(), Vec3::new(0.0, 0.0, 1.0));
        assert!(!p.visible);
    }

    #[test]
    fn outside_image_is_invisible() {
        let p = project(&CameraPose::default(), &intr(), Vec3::new(10.0, 0.0, -1.0));
        assert!(!p.visible);
    }

    #[test]
    fn zero_action_keeps_pose() {
        let pose = CameraPose {
            position: Vec3::new(0.3, -1.0, 2.0),
            orientation: Quat::from_axis_angle(Vec3::new(1.0, 1.0, 0.0), 0.3),
        };
        assert_eq!(step_camera(&pose, &[0.0; 6]).unwrap(), pose);
    }

    #[test]
    fn unit_x_action_moves_along_camera_x() {
        let q = Quat::from_axis_angle(Vec3::unit_z(), 0.5);
        let pose = CameraPose { position: Vec3::zero(), orientation: q };
        let next = step_camera(&pose, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let expected = q.rotate(Vec3::unit_x()).scale(0.05);
        assert!(next.position.max_abs_diff(expected) < 1e-15);
    }

    #[test]
    fn out_of_range_action() {
        let err = step_camera(&CameraPose::default(), &[0.0, 0.0, 1.01, 0.0, 0.0, 0.0]).unwrap_err();
        assert_eq!(err, GeometryError::ActionOutOfRange { index: 2, value: 1.01 });
    }

    #[test]
    fn yaw_turns_about_camera_up() {
        let next = step_camera(&CameraPose::default(), &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let fwd = next.orientation.rotate(Vec3::new(0.0, 0.0, -1.0));
        // positive yaw about +y swings −z toward −x
        assert!(fwd.x < 0.0 && fwd.y.abs() < 1e-15);
        assert!((next.orientation.angle() - ROTATION_STEP_MAX).abs() < 1e-15);
    }

    #[test]
    fn flat_round_trip() {
        let mut p = TaskParams::default();
        p.set("fov_y", std::f64::consts::FRAC_PI_3);
        p.set("image_width", 640.0);
        p.set("image_height", 480.0);
        let s = reprojection_init(&p, &mut Rng::new(1)).unwrap();
        assert_eq!(s.len(), 7 + 6 * DEFAULT_KEYPOINTS);
        assert_eq!(ReprojectionState::from_flat(&s).unwrap().to_flat(), s);
        let next = step_reprojection_state(&p, &s, &[0.0; 6]).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn hidden_keypoint_keeps_last_pixel() {
        let i = intr();
        let mut s = ReprojectionState {
            camera: CameraPose::default(),
            keypoints: vec![Keypoint { world: Vec3::new(0.0, 0.0, -0.1), pixel: (0.0, 0.0), visible: false }],
        };
        s.reproject(&i);
        assert!(s.keypoints[0].visible);
        // walking forward past the point hides it
        for _ in 0..5 {
            s = step_reprojection(&s, &[0.0, 0.0, -1.0, 0.0, 0.0, 0.0], &i).unwrap();
        }
        let k = s.keypoints[0];
        assert!(!k.visible);
        assert_eq!(k.pixel, (0.0, 0.0));
    }
}
