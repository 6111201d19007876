//! Translational tasks: free fall, projectile, circular, inclined plane,
//! pendulum and rolling.

use super::{integrate, TaskError, TaskParams, TaskSpec};
use crate::dynamics::EventSpec;

/// Gravity-only derivative for `[px,py,pz,vx,vy,vz]`. A ball sitting on the
/// floor (`pz <= r`) with no downward speed is supported by the normal force.
pub fn free_fall_derivative(g: f64, radius: f64) -> impl Fn(&[f64], &mut [f64]) {
    move |s, d| {
        d[0] = s[3];
        d[1] = s[4];
        d[2] = s[5];
        d[3] = 0.0;
        d[4] = 0.0;
        d[5] = if s[2] <= radius && s[5] <= 0.0 { 0.0 } else { -g };
    }
}

/// Elastic floor at `pz = radius`.
pub fn free_fall_events<'a>(radius: f64) -> Vec<EventSpec<'a, f64>> {
    vec![EventSpec::new(move |s: &[f64]| s[2] - radius, |s: &mut [f64]| s[5] = -s[5])]
}

pub(super) fn step_free_fall(spec: &TaskSpec, p: &TaskParams, s: &[f64]) -> Result<Vec<f64>, TaskError> {
    let g = p.get("g")?;
    let r = p.get("radius")?;
    Ok(integrate(spec, &free_fall_derivative(g, r), &free_fall_events(r), s, None)?.state)
}

pub(super) fn circular_init(p: &TaskParams) -> Result<Vec<f64>, TaskError> {
    let radius = p.get("orbit_radius")?;
    let omega = p.get("speed")? / radius;
    Ok(circular_observe(radius, p.get("phase")?, omega).to_vec())
}

/// Maps generalised coordinates `(θ, ω)` to the observed `[px,py,vx,vy]`.
pub fn circular_observe(radius: f64, theta: f64, omega: f64) -> [f64; 4] {
    let (sin, cos) = theta.sin_cos();
    [radius * cos, radius * sin, -radius * omega * sin, radius * omega * cos]
}

/// Recovers `(θ, ω)` from an observed state.
pub fn circular_internal(radius: f64, s: &[f64]) -> (f64, f64) {
    let theta = s[1].atan2(s[0]);
    let omega = (s[0] * s[3] - s[1] * s[2]) / (radius * radius);
    (theta, omega)
}

pub(super) fn step_circular(spec: &TaskSpec, p: &TaskParams, s: &[f64], a: &[f64]) -> Result<Vec<f64>, TaskError> {
    let m = p.get("mass")?;
    let radius = p.get("orbit_radius")?;
    let force = a[0] * spec.action_scale[0];
    let alpha = force / (m * radius);
    let (theta, omega) = circular_internal(radius, s);
    let deriv = move |q: &[f64], d: &mut [f64]| {
        d[0] = q[1];
        d[1] = alpha;
    };
    let next = integrate(spec, &deriv, &[], &[theta, omega], None)?.state;
    Ok(circular_observe(radius, next[0], next[1]).to_vec())
}

/// Net acceleration down the slope of a sliding block.
pub(super) fn incline_acceleration(p: &TaskParams) -> Result<f64, TaskError> {
    let alpha = p.get("incline")?;
    Ok(p.get("g")? * (alpha.sin() - p.get("friction")? * alpha.cos()))
}

pub(super) fn inclined_init(p: &TaskParams) -> Result<Result<Vec<f64>, String>, TaskError> {
    let alpha = p.get("incline")?;
    let mu = p.get("friction")?;
    // μ ≥ tan α would leave the block at rest or decelerating
    if !(alpha.sin() > mu * alpha.cos()) {
        return Ok(Err(format!("friction {mu} >= tan(incline {alpha})")));
    }
    Ok(Ok(vec![0.0, p.get("speed")?]))
}

pub(super) fn step_inclined(spec: &TaskSpec, p: &TaskParams, s: &[f64]) -> Result<Vec<f64>, TaskError> {
    let acc = incline_acceleration(p)?;
    let deriv = move |q: &[f64], d: &mut [f64]| {
        d[0] = q[1];
        d[1] = if q[1] >= 0.0 { acc } else { 0.0 };
    };
    Ok(integrate(spec, &deriv, &[], s, None)?.state)
}

/// `½L²ω² − gL cos θ` (per unit mass).
pub fn pendulum_energy(g: f64, length: f64, s: &[f64]) -> f64 {
    0.5 * length * length * s[1] * s[1] - g * length * s[0].cos()
}

pub(super) fn step_pendulum(spec: &TaskSpec, p: &TaskParams, s: &[f64]) -> Result<Vec<f64>, TaskError> {
    let k = p.get("g")? / p.get("length")?;
    let deriv = move |q: &[f64], d: &mut [f64]| {
        d[0] = q[1];
        d[1] = -k * q[0].sin();
    };
    Ok(integrate(spec, &deriv, &[], s, None)?.state)
}

pub(super) fn rolling_init(p: &TaskParams) -> Result<Vec<f64>, TaskError> {
    let omega = p.get("omega")?;
    Ok(vec![0.0, omega * p.get("radius")?, 0.0, omega])
}

pub(super) fn step_rolling(spec: &TaskSpec, _p: &TaskParams, s: &[f64]) -> Result<Vec<f64>, TaskError> {
    let deriv = |q: &[f64], d: &mut [f64]| {
        d[0] = q[1];
        d[1] = 0.0;
        d[2] = q[3];
        d[3] = 0.0;
    };
    Ok(integrate(spec, &deriv, &[], s, None)?.state)
}
