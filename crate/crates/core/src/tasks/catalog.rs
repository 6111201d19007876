//! Task catalog: state layouts, action layouts and default parameter ranges.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use super::{ActionDim, DimKind, DimSpec, ParamRange, StateLayout, TaskId, TaskSpec};
use crate::geometry::{DEFAULT_KEYPOINTS, ROTATION_STEP_MAX, TRANSLATION_STEP_MAX};

pub const DEFAULT_DT: f64 = 0.02;
pub const DEFAULT_HORIZON: usize = 100;

fn dim(name: &str, unit: &str, kind: DimKind) -> DimSpec {
    DimSpec { name: name.into(), unit: unit.into(), kind, rate: None, mask: None, scored: true }
}

fn with_rate(mut d: DimSpec, rate: usize) -> DimSpec {
    d.rate = Some(rate);
    d
}

fn layout(dims: Vec<DimSpec>) -> StateLayout {
    StateLayout { dims, quat_block: None }
}

fn quat_dims() -> Vec<DimSpec> {
    ["qw", "qx", "qy", "qz"].iter().map(|n| dim(n, "1", DimKind::Quaternion)).collect()
}

pub fn state_layout(task: TaskId) -> StateLayout {
    use DimKind::*;
    match task {
        TaskId::FreeFall | TaskId::Projectile => layout(vec![
            with_rate(dim("px", "m", Position), 3),
            with_rate(dim("py", "m", Position), 4),
            with_rate(dim("pz", "m", Position), 5),
            dim("vx", "m/s", Velocity),
            dim("vy", "m/s", Velocity),
            dim("vz", "m/s", Velocity),
        ]),
        TaskId::BouncingBall | TaskId::Circular => layout(vec![
            with_rate(dim("px", "m", Position), 2),
            with_rate(dim("py", "m", Position), 3),
            dim("vx", "m/s", Velocity),
            dim("vy", "m/s", Velocity),
        ]),
        TaskId::ElasticCollision => layout(vec![
            with_rate(dim("p1x", "m", Position), 2),
            with_rate(dim("p1y", "m", Position), 3),
            dim("v1x", "m/s", Velocity),
            dim("v1y", "m/s", Velocity),
            with_rate(dim("p2x", "m", Position), 6),
            with_rate(dim("p2y", "m", Position), 7),
            dim("v2x", "m/s", Velocity),
            dim("v2y", "m/s", Velocity),
        ]),
        TaskId::InclinedPlane => {
            layout(vec![with_rate(dim("s_along", "m", Position), 1), dim("v_along", "m/s", Velocity)])
        }
        TaskId::Pendulum => {
            layout(vec![with_rate(dim("theta", "rad", Angle), 1), dim("omega", "rad/s", AngularVelocity)])
        }
        TaskId::Rolling => layout(vec![
            with_rate(dim("x", "m", Position), 1),
            dim("v", "m/s", Velocity),
            with_rate(dim("phi", "rad", Angle), 3),
            dim("omega", "rad/s", AngularVelocity),
        ]),
        TaskId::Rotation | TaskId::Spin => {
            let mut dims = quat_dims();
            dims.push(dim("wx", "rad/s", AngularVelocity));
            dims.push(dim("wy", "rad/s", AngularVelocity));
            dims.push(dim("wz", "rad/s", AngularVelocity));
            StateLayout { dims, quat_block: Some(0) }
        }
        TaskId::Reprojection => reprojection_layout(DEFAULT_KEYPOINTS),
    }
}

/// Camera pose (position, world-from-camera quaternion) followed by one
/// `[x, y, z, u, v, visible]` block per keypoint. Only pixels are scored,
/// and only where the keypoint is visible.
pub(crate) fn reprojection_layout(k: usize) -> StateLayout {
    use DimKind::*;
    let mut dims = vec![
        dim("cam_px", "m", Position),
        dim("cam_py", "m", Position),
        dim("cam_pz", "m", Position),
    ];
    dims.extend(["cam_qw", "cam_qx", "cam_qy", "cam_qz"].iter().map(|n| dim(n, "1", Quaternion)));
    for i in 0..k {
        let base = dims.len();
        for axis in ["x", "y", "z"] {
            let mut d = dim(&format!("kp{i}_{axis}"), "m", World);
            d.scored = false;
            dims.push(d);
        }
        for axis in ["u", "v"] {
            let mut d = dim(&format!("kp{i}_{axis}"), "normalized px", Pixel);
            d.mask = Some(base + 5);
            dims.push(d);
        }
        let mut vis = dim(&format!("kp{i}_visible"), "flag", Visibility);
        vis.scored = false;
        dims.push(vis);
    }
    for d in dims.iter_mut().take(7) {
        d.scored = false;
    }
    StateLayout { dims, quat_block: Some(3) }
}

pub fn action_layout(task: TaskId) -> Vec<ActionDim> {
    let a = |name: &str, unit: &str, scale: f64| ActionDim { name: name.into(), unit: unit.into(), scale };
    match task {
        TaskId::Circular => vec![a("tangential_force", "N", 1.0)],
        TaskId::Reprojection => vec![
            a("move_x", "m", TRANSLATION_STEP_MAX),
            a("move_y", "m", TRANSLATION_STEP_MAX),
            a("move_z", "m", TRANSLATION_STEP_MAX),
            a("yaw", "rad", ROTATION_STEP_MAX),
            a("pitch", "rad", ROTATION_STEP_MAX),
            a("roll", "rad", ROTATION_STEP_MAX),
        ],
        _ => Vec::new(),
    }
}

fn ranges(entries: &[(&str, f64, f64)]) -> BTreeMap<String, ParamRange> {
    entries.iter().map(|&(k, lo, hi)| (k.to_string(), ParamRange(lo, hi))).collect()
}

const G: f64 = 9.81;

pub fn default_spec(task: TaskId) -> TaskSpec {
    let deg = PI / 180.0;
    let (substeps, param_ranges) = match task {
        TaskId::FreeFall => (1, ranges(&[("g", G, G), ("height", 0.5, 2.0), ("radius", 0.05, 0.2)])),
        TaskId::Projectile => (
            1,
            ranges(&[("g", G, G), ("height", 0.5, 2.0), ("radius", 0.05, 0.2), ("speed", 0.5, 3.0)]),
        ),
        TaskId::BouncingBall => (
            1,
            ranges(&[
                ("box_side", 2.0, 2.0),
                ("heading", 0.0, TAU),
                ("radius", 0.05, 0.2),
                ("speed", 0.5, 3.0),
                ("x_frac", 0.1, 0.9),
                ("y_frac", 0.1, 0.9),
            ]),
        ),
        TaskId::ElasticCollision => (
            1,
            ranges(&[
                ("box_side", 2.0, 2.0),
                ("heading1", 0.0, TAU),
                ("heading2", 0.0, TAU),
                ("mass1", 0.5, 2.0),
                ("mass2", 0.5, 2.0),
                ("radius", 0.05, 0.2),
                ("speed1", 0.5, 3.0),
                ("speed2", 0.5, 3.0),
                ("x1_frac", 0.1, 0.9),
                ("x2_frac", 0.1, 0.9),
                ("y1_frac", 0.1, 0.9),
                ("y2_frac", 0.1, 0.9),
            ]),
        ),
        TaskId::Circular => (
            1,
            ranges(&[("mass", 0.5, 2.0), ("orbit_radius", 0.5, 1.5), ("phase", 0.0, TAU), ("speed", 0.5, 3.0)]),
        ),
        TaskId::InclinedPlane => (
            1,
            ranges(&[("friction", 0.0, 0.3), ("g", G, G), ("incline", 15.0 * deg, 45.0 * deg), ("speed", 0.5, 3.0)]),
        ),
        TaskId::Pendulum => (8, ranges(&[("amplitude", 0.1, 2.5), ("g", G, G), ("length", 0.5, 1.5)])),
        TaskId::Rolling => (1, ranges(&[("mass", 0.5, 2.0), ("omega", 5.0, 15.0), ("radius", 0.05, 0.2)])),
        TaskId::Rotation => (
            4,
            ranges(&[("omega", 1.0, 6.0), ("pitch", -PI, PI), ("roll", -PI, PI), ("yaw", -PI, PI)]),
        ),
        TaskId::Spin => (
            8,
            ranges(&[
                ("azimuth", 0.0, TAU),
                ("damping", 0.001, 0.01),
                ("g", G, G),
                ("height", 0.05, 0.2),
                ("mass", 0.5, 2.0),
                ("radius", 0.05, 0.2),
                ("spin_rate", 20.0, 60.0),
                ("tilt", 0.05, 0.2),
            ]),
        ),
        TaskId::Reprojection => (
            1,
            ranges(&[
                ("fov_y", PI / 3.0, PI / 3.0),
                ("image_height", 480.0, 480.0),
                ("image_width", 640.0, 640.0),
            ]),
        ),
    };
    let actions = action_layout(task);
    TaskSpec {
        task,
        dt: DEFAULT_DT,
        horizon: DEFAULT_HORIZON,
        substeps,
        param_ranges,
        action_dim: actions.len(),
        action_scale: actions.iter().map(|a| a.scale).collect(),
    }
}
