//! Rigid-body rotation about a fixed symmetry axis, and a damped symmetric
//! top on a fixed pivot that eventually falls and settles.

use std::f64::consts::PI;

use super::{integrate, TaskError, TaskParams, TaskSpec};
use crate::dynamics::EventSpec;
use crate::math::{Quat, Vec3};

/// Tilt at which the top is considered to have fallen over (85°).
pub const TILT_MAX: f64 = 85.0 * PI / 180.0;
/// Below this body rate a settled top is frozen.
pub const SETTLE_OMEGA: f64 = 1e-3;
/// Settling decay time constant in units of the observation step.
pub const SETTLE_TIME_STEPS: f64 = 5.0;
/// Half-width (in cos tilt) of the band identified as the clamped tilt.
const SETTLED_BAND: f64 = 1e-9;

/// `q̇ = ½ q ⊗ (0, ω)` with body-frame ω in components 4..7.
fn quat_rate(s: &[f64], d: &mut [f64]) {
    let q = Quat::from_slice(&s[0..4]);
    let dq = (q * Quat::pure(Vec3::from_slice(&s[4..7]))).scale(0.5);
    d[0..4].copy_from_slice(&dq.to_array());
}

pub(super) fn rotation_init(p: &TaskParams) -> Result<Vec<f64>, TaskError> {
    let q = Quat::from_axis_angle(Vec3::unit_z(), p.get("yaw")?)
        * Quat::from_axis_angle(Vec3::unit_y(), p.get("pitch")?)
        * Quat::from_axis_angle(Vec3::unit_x(), p.get("roll")?);
    let q = q.normalized();
    Ok(vec![q.w, q.x, q.y, q.z, 0.0, 0.0, p.get("omega")?])
}

pub(super) fn step_rotation(spec: &TaskSpec, _p: &TaskParams, s: &[f64]) -> Result<Vec<f64>, TaskError> {
    let deriv = |q: &[f64], d: &mut [f64]| {
        quat_rate(q, d);
        d[4] = 0.0;
        d[5] = 0.0;
        d[6] = 0.0;
    };
    Ok(integrate(spec, &deriv, &[], s, Some(0))?.state)
}

/// Mass properties of a solid cone spinning on its apex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinConstants {
    /// Principal moments about the pivot: (I₁, I₁, I₃).
    pub inertia: Vec3<f64>,
    /// Pivot to centre-of-mass distance along the body axis.
    pub arm: f64,
    pub mass: f64,
    pub g: f64,
    pub damping: f64,
    /// Exponential decay time once settled.
    pub settle_tau: f64,
}

pub fn spin_constants(spec: &TaskSpec, p: &TaskParams) -> Result<SpinConstants, TaskError> {
    let m = p.get("mass")?;
    let r = p.get("radius")?;
    let h = p.get("height")?;
    let transverse = 0.6 * m * h * h + 0.15 * m * r * r;
    Ok(SpinConstants {
        inertia: Vec3::new(transverse, transverse, 0.3 * m * r * r),
        arm: 0.75 * h,
        mass: m,
        g: p.get("g")?,
        damping: p.get("damping")?,
        settle_tau: SETTLE_TIME_STEPS * spec.dt,
    })
}

/// World z-component of the body symmetry axis (cos of the tilt).
fn axis_z(s: &[f64]) -> f64 {
    1.0 - 2.0 * (s[1] * s[1] + s[2] * s[2])
}

pub fn spin_tilt(s: &[f64]) -> f64 {
    axis_z(s).clamp(-1.0, 1.0).acos()
}

fn is_settled(s: &[f64]) -> bool {
    (axis_z(s) - TILT_MAX.cos()).abs() <= SETTLED_BAND
}

/// `½ ωᵀ I ω` about the pivot.
pub fn spin_kinetic_energy(c: &SpinConstants, s: &[f64]) -> f64 {
    let w = Vec3::from_slice(&s[4..7]);
    0.5 * w.hadamard(c.inertia).dot(w)
}

/// Kinetic plus gravitational potential energy.
pub fn spin_energy(c: &SpinConstants, s: &[f64]) -> f64 {
    spin_kinetic_energy(c, s) + c.mass * c.g * c.arm * axis_z(s)
}

pub(super) fn spin_init(p: &TaskParams) -> Result<Vec<f64>, TaskError> {
    let az = p.get("azimuth")?;
    let axis = Vec3::new(-az.sin(), az.cos(), 0.0);
    let q = Quat::from_axis_angle(axis, p.get("tilt")?);
    Ok(vec![q.w, q.x, q.y, q.z, 0.0, 0.0, p.get("spin_rate")?])
}

fn spin_derivative(c: SpinConstants) -> impl Fn(&[f64], &mut [f64]) {
    move |s, d| {
        let w = Vec3::from_slice(&s[4..7]);
        if is_settled(s) {
            d[0..4].fill(0.0);
            let decay = w.scale(-1.0 / c.settle_tau);
            d[4..7].copy_from_slice(&decay.to_array());
            return;
        }
        quat_rate(s, d);
        let q = Quat::from_slice(&s[0..4]);
        let lever = q.rotate(Vec3::new(0.0, 0.0, c.arm));
        let torque_world = lever.cross(Vec3::new(0.0, 0.0, -c.mass * c.g));
        let torque = q.inverse_rotate(torque_world);
        let iw = w.hadamard(c.inertia);
        let rhs = iw.cross(w) + torque - w.scale(c.damping);
        d[4] = rhs.x / c.inertia.x;
        d[5] = rhs.y / c.inertia.y;
        d[6] = rhs.z / c.inertia.z;
    }
}

/// Rotates the body axis in its vertical plane so the tilt is exactly `TILT_MAX`.
fn clamp_tilt(s: &mut [f64]) {
    let q = Quat::from_slice(&s[0..4]);
    let axis = q.rotate(Vec3::unit_z());
    let horiz = axis.x.hypot(axis.y);
    let (hx, hy) = if horiz > 0.0 { (axis.x / horiz, axis.y / horiz) } else { (1.0, 0.0) };
    let (sin, cos) = TILT_MAX.sin_cos();
    let target = Vec3::new(sin * hx, sin * hy, cos);
    let clamped = (Quat::between(axis, target) * q).normalized();
    s[0..4].copy_from_slice(&clamped.to_array());
}

fn spin_events<'a>() -> Vec<EventSpec<'a, f64>> {
    let cos_max = TILT_MAX.cos();
    vec![
        EventSpec::new(
            move |s: &[f64]| if is_settled(s) { 1.0 } else { axis_z(s) - cos_max },
            clamp_tilt,
        ),
        EventSpec::new(
            |s: &[f64]| {
                if is_settled(s) {
                    s[4] * s[4] + s[5] * s[5] + s[6] * s[6] - SETTLE_OMEGA * SETTLE_OMEGA
                } else {
                    1.0
                }
            },
            |s: &mut [f64]| s[4..7].fill(0.0),
        ),
    ]
}

pub(super) fn step_spin(spec: &TaskSpec, p: &TaskParams, s: &[f64]) -> Result<Vec<f64>, TaskError> {
    let c = spin_constants(spec, p)?;
    Ok(integrate(spec, &spin_derivative(c), &spin_events(), s, Some(0))?.state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Rng;
    use crate::tasks::{default_spec, sample_init, step, TaskId};

    #[test]
    fn zero_rate_keeps_orientation() {
        let spec = default_spec(TaskId::Rotation);
        let q = Quat::from_axis_angle(Vec3::new(1.0, 2.0, 3.0), 0.4);
        let s0 = vec![q.w, q.x, q.y, q.z, 0.0, 0.0, 0.0];
        let s = step(&spec, &TaskParams::default(), &s0, &[]).unwrap();
        for i in 0..7 {
            assert!((s[i] - s0[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn half_turn_about_z() {
        let spec = default_spec(TaskId::Rotation);
        let mut s = vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, PI];
        let steps = (1.0 / spec.dt).round() as usize;
        for _ in 0..steps {
            s = step(&spec, &TaskParams::default(), &s, &[]).unwrap();
        }
        let exact = Quat::new(0.0, 0.0, 0.0, 1.0);
        let err = Quat::from_slice(&s[0..4]).angle_to(exact);
        assert!(err <= 1e-9, "angle error {err}");
    }

    #[test]
    fn rotation_rate_is_untouched() {
        let spec = default_spec(TaskId::Rotation);
        let (p, mut s) = sample_init(&spec, &mut Rng::new(5)).unwrap();
        let w0 = s[4..7].to_vec();
        for _ in 0..10_000 {
            s = step(&spec, &p, &s, &[]).unwrap();
            assert_eq!(&s[4..7], w0.as_slice());
            assert!((Quat::from_slice(&s[0..4]).norm() - 1.0).abs() <= 1e-12);
        }
    }

    fn spin_params(damping: f64, tilt: f64) -> TaskParams {
        let mut p = TaskParams::default();
        for (k, v) in [
            ("azimuth", 0.3),
            ("damping", damping),
            ("g", 9.81),
            ("height", 0.1),
            ("mass", 1.0),
            ("radius", 0.1),
            ("spin_rate", 40.0),
            ("tilt", tilt),
        ] {
            p.set(k, v);
        }
        p
    }

    #[test]
    fn upright_undamped_top_stays_upright() {
        let spec = default_spec(TaskId::Spin);
        let p = spin_params(0.0, 0.0);
        let mut s = spin_init(&p).unwrap();
        for _ in 0..1000 {
            s = step(&spec, &p, &s, &[]).unwrap();
            assert!(spin_tilt(&s) <= 1e-9);
        }
    }

    #[test]
    fn damped_top_loses_mechanical_energy() {
        let spec = default_spec(TaskId::Spin);
        let p = spin_params(0.005, 0.1);
        let c = spin_constants(&spec, &p).unwrap();
        let mut s = spin_init(&p).unwrap();
        let mut e = spin_energy(&c, &s);
        for _ in 0..300 {
            s = step(&spec, &p, &s, &[]).unwrap();
            let next = spin_energy(&c, &s);
            assert!(next <= e + 1e-12, "{next} > {e}");
            e = next;
        }
    }

    #[test]
    fn damped_top_settles() {
        let spec = default_spec(TaskId::Spin);
        let p = spin_params(0.01, 0.1);
        let mut s = spin_init(&p).unwrap();
        for _ in 0..2000 {
            s = step(&spec, &p, &s, &[]).unwrap();
        }
        let w = Vec3::from_slice(&s[4..7]).norm();
        assert!(w < SETTLE_OMEGA, "|ω| = {w}");
        assert!((spin_tilt(&s) - TILT_MAX).abs() < 1e-6);
        assert_eq!(step(&spec, &p, &s, &[]).unwrap(), s);
    }

    #[test]
    fn sampled_tops_settle_deterministically() {
        let spec = default_spec(TaskId::Spin);
        let (p, s0) = sample_init(&spec, &mut Rng::new(77)).unwrap();
        let run = |mut s: Vec<f64>| {
            for _ in 0..500 {
                s = step(&spec, &p, &s, &[]).unwrap();
            }
            s
        };
        assert_eq!(run(s0.clone()), run(s0));
    }
}
