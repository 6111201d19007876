//! Uniform motion in a square box with elastic walls, for one ball and for
//! two discs that also collide with each other.

use super::{integrate, TaskError, TaskParams, TaskSpec};
use crate::dynamics::EventSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxParams {
    pub side: f64,
    pub radius: f64,
}

impl BoxParams {
    fn from_params(p: &TaskParams) -> Result<Self, TaskError> {
        Ok(Self { side: p.get("box_side")?, radius: p.get("radius")? })
    }

    fn place(&self, frac: f64) -> f64 {
        self.radius + frac * (self.side - 2.0 * self.radius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscPair {
    pub walls: BoxParams,
    pub mass1: f64,
    pub mass2: f64,
}

fn uniform_motion(n_bodies: usize) -> impl Fn(&[f64], &mut [f64]) {
    move |s, d| {
        for b in 0..n_bodies {
            let o = 4 * b;
            d[o] = s[o + 2];
            d[o + 1] = s[o + 3];
            d[o + 2] = 0.0;
            d[o + 3] = 0.0;
        }
    }
}

/// Four wall guards for the body whose `[px,py,vx,vy]` block starts at `o`.
fn wall_events<'a>(walls: BoxParams, o: usize) -> Vec<EventSpec<'a, f64>> {
    let BoxParams { side, radius } = walls;
    let hi = side - radius;
    vec![
        EventSpec::new(move |s: &[f64]| s[o] - radius, move |s: &mut [f64]| s[o + 2] = -s[o + 2]),
        EventSpec::new(move |s: &[f64]| hi - s[o], move |s: &mut [f64]| s[o + 2] = -s[o + 2]),
        EventSpec::new(move |s: &[f64]| s[o + 1] - radius, move |s: &mut [f64]| s[o + 3] = -s[o + 3]),
        EventSpec::new(move |s: &[f64]| hi - s[o + 1], move |s: &mut [f64]| s[o + 3] = -s[o + 3]),
    ]
}

pub fn bouncing_ball_events<'a>(walls: BoxParams) -> Vec<EventSpec<'a, f64>> {
    wall_events(walls, 0)
}

/// Wall guards for both discs (indices 0..8) followed by the disc-disc
/// contact guard (index 8).
pub fn elastic_collision_events<'a>(pair: DiscPair) -> Vec<EventSpec<'a, f64>> {
    let mut ev = wall_events(pair.walls, 0);
    ev.extend(wall_events(pair.walls, 4));
    let contact = 2.0 * pair.walls.radius;
    let (m1, m2) = (pair.mass1, pair.mass2);
    ev.push(EventSpec::new(
        move |s: &[f64]| {
            let dx = s[0] - s[4];
            let dy = s[1] - s[5];
            dx * dx + dy * dy - contact * contact
        },
        move |s: &mut [f64]| resolve_disc_contact(s, m1, m2),
    ));
    ev
}

/// Exchanges the normal velocity components per the 1D elastic formulas.
fn resolve_disc_contact(s: &mut [f64], m1: f64, m2: f64) {
    let dx = s[0] - s[4];
    let dy = s[1] - s[5];
    let dist = (dx * dx + dy * dy).sqrt();
    let (nx, ny) = (dx / dist, dy / dist);
    let u1 = s[2] * nx + s[3] * ny;
    let u2 = s[6] * nx + s[7] * ny;
    if u1 - u2 >= 0.0 {
        // already separating
        return;
    }
    let total = m1 + m2;
    let w1 = ((m1 - m2) * u1 + 2.0 * m2 * u2) / total;
    let w2 = ((m2 - m1) * u2 + 2.0 * m1 * u1) / total;
    s[2] += (w1 - u1) * nx;
    s[3] += (w1 - u1) * ny;
    s[6] += (w2 - u2) * nx;
    s[7] += (w2 - u2) * ny;
}

pub(super) fn bouncing_ball_init(p: &TaskParams) -> Result<Vec<f64>, TaskError> {
    let walls = BoxParams::from_params(p)?;
    let (sin, cos) = p.get("heading")?.sin_cos();
    let speed = p.get("speed")?;
    Ok(vec![walls.place(p.get("x_frac")?), walls.place(p.get("y_frac")?), speed * cos, speed * sin])
}

pub(super) fn elastic_collision_init(p: &TaskParams) -> Result<Result<Vec<f64>, String>, TaskError> {
    let walls = BoxParams::from_params(p)?;
    let (s1, c1) = p.get("heading1")?.sin_cos();
    let (s2, c2) = p.get("heading2")?.sin_cos();
    let (v1, v2) = (p.get("speed1")?, p.get("speed2")?);
    let state = vec![
        walls.place(p.get("x1_frac")?),
        walls.place(p.get("y1_frac")?),
        v1 * c1,
        v1 * s1,
        walls.place(p.get("x2_frac")?),
        walls.place(p.get("y2_frac")?),
        v2 * c2,
        v2 * s2,
    ];
    let gap = ((state[0] - state[4]).powi(2) + (state[1] - state[5]).powi(2)).sqrt();
    if gap <= 2.2 * walls.radius {
        return Ok(Err(format!("discs overlap (gap {gap})")));
    }
    Ok(Ok(state))
}

pub(super) fn step_bouncing_ball(spec: &TaskSpec, p: &TaskParams, s: &[f64]) -> Result<Vec<f64>, TaskError> {
    let walls = BoxParams::from_params(p)?;
    Ok(integrate(spec, &uniform_motion(1), &bouncing_ball_events(walls), s, None)?.state)
}

pub fn elastic_pair(p: &TaskParams) -> Result<DiscPair, TaskError> {
    Ok(DiscPair { walls: BoxParams::from_params(p)?, mass1: p.get("mass1")?, mass2: p.get("mass2")? })
}

pub(super) fn step_elastic_collision(spec: &TaskSpec, p: &TaskParams, s: &[f64]) -> Result<Vec<f64>, TaskError> {
    let pair = elastic_pair(p)?;
    Ok(integrate(spec, &uniform_motion(2), &elastic_collision_events(pair), s, None)?.state)
}

/// Derivative used by both box tasks; exposed for event-level inspection.
pub fn box_motion(n_bodies: usize) -> impl Fn(&[f64], &mut [f64]) {
    uniform_motion(n_bodies)
}
