//! Quick conservation and closed-form checks behind `wmbench selftest`.

use crate::episodes::generate_episode;
use crate::geometry::{back_project, project, CameraPose, Intrinsics};
use crate::harness::evaluate;
use crate::math::{Quat, Rng, Vec3};
use crate::predictors::Oracle;
use crate::tasks::{self, default_spec, pendulum_energy, TaskId};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, value: f64, tol: f64) -> Check {
    Check { name, passed: value.is_finite() && value <= tol, detail: format!("{value:.3e} (tol {tol:.0e})") }
}

fn max_over<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(0.0, |m, x| if x.is_nan() || m.is_nan() { f64::NAN } else { m.max(x) })
}

fn run(task: TaskId, seed: u64) -> Result<crate::episodes::Episode, String> {
    generate_episode(&default_spec(task), seed).map_err(|e| e.to_string())
}

fn free_fall() -> Result<f64, String> {
    let mut spec = default_spec(TaskId::FreeFall);
    spec.param_ranges.insert("height".into(), tasks::ParamRange::fixed(30.0));
    let e = generate_episode(&spec, 1).map_err(|e| e.to_string())?;
    let z0 = e.states[0][2];
    Ok(max_over(e.states.iter().enumerate().map(|(t, s)| {
        let time = t as f64 * spec.dt;
        (s[2] - (z0 - 0.5 * 9.81 * time * time)).abs()
    })))
}

fn pendulum() -> Result<f64, String> {
    let e = run(TaskId::Pendulum, 3)?;
    let (g, l) = (e.params.get("g").map_err(|e| e.to_string())?, e.params.get("length").map_err(|e| e.to_string())?);
    let e0 = pendulum_energy(g, l, &e.states[0]);
    Ok(max_over(e.states.iter().map(|s| (pendulum_energy(g, l, s) - e0).abs() / (g * l))))
}

fn bouncing_ball() -> Result<f64, String> {
    let e = run(TaskId::BouncingBall, 5)?;
    let speed = |s: &[f64]| s[2].hypot(s[3]);
    let s0 = speed(&e.states[0]);
    Ok(max_over(e.states.iter().map(|s| (speed(s) - s0).abs() / s0)))
}

fn elastic_collision() -> Result<f64, String> {
    let e = run(TaskId::ElasticCollision, 9)?;
    let m1 = e.params.get("mass1").map_err(|e| e.to_string())?;
    let m2 = e.params.get("mass2").map_err(|e| e.to_string())?;
    let energy = |s: &[f64]| 0.5 * m1 * (s[2] * s[2] + s[3] * s[3]) + 0.5 * m2 * (s[6] * s[6] + s[7] * s[7]);
    let k0 = energy(&e.states[0]);
    Ok(max_over(e.states.iter().map(|s| (energy(s) - k0).abs() / k0)))
}

fn rotation() -> Result<f64, String> {
    let e = run(TaskId::Rotation, 2)?;
    let q0 = Quat::from_slice(&e.states[0][..4]);
    let w = Vec3::from_slice(&e.states[0][4..]);
    Ok(max_over(e.states.iter().enumerate().map(|(t, s)| {
        let expected = q0 * Quat::from_rotation_vector(w.scale(t as f64 * e.dt));
        Quat::from_slice(&s[..4]).angle_to(expected)
    })))
}

fn rolling() -> Result<f64, String> {
    let e = run(TaskId::Rolling, 4)?;
    let r = e.params.get("radius").map_err(|e| e.to_string())?;
    Ok(max_over(e.states.iter().map(|s| (s[1] - s[3] * r).abs())))
}

fn projection() -> f64 {
    let intr = Intrinsics::new(640.0, 480.0, std::f64::consts::FRAC_PI_3).expect("valid intrinsics");
    let mut rng = Rng::new(13);
    let mut u = || rng.uniform(-1.0, 1.0).expect("valid range");
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let pose = CameraPose {
            position: Vec3::new(u(), u(), u()),
            orientation: Quat::from_rotation_vector(Vec3::new(u(), u(), u()).scale(0.5)),
        };
        let cam = Vec3::new(u(), u() * 0.5, -3.0 + u());
        let world = pose.position + pose.orientation.rotate(cam);
        let p = project(&pose, &intr, world);
        let back = back_project(&pose, &intr, p.u, p.v, -cam.z);
        worst = worst.max((back - world).norm());
    }
    worst
}

fn oracle() -> Result<f64, String> {
    let eval: Vec<_> = TaskId::ALL.iter().map(|&t| run(t, 6)).collect::<Result<_, _>>()?;
    let r = evaluate(&Oracle, &eval, 10, 90).map_err(|e| e.to_string())?;
    Ok(max_over(r.cells.iter().map(|c| c.mse)))
}

fn lift(name: &'static str, r: Result<f64, String>, tol: f64) -> Check {
    match r {
        Ok(v) => check(name, v, tol),
        Err(e) => Check { name, passed: false, detail: e },
    }
}

pub fn run_all() -> Vec<Check> {
    vec![
        lift("free fall matches z0 − g t²/2", free_fall(), 1e-9),
        lift("pendulum energy drift / (g·L)", pendulum(), 1e-7),
        lift("bouncing ball speed preserved", bouncing_ball(), 1e-12),
        lift("elastic collision kinetic energy", elastic_collision(), 1e-9),
        lift("rotation angle vs closed form", rotation(), 1e-9),
        lift("rolling without slipping", rolling(), 1e-12),
        check("projection round trip", projection(), 1e-9),
        lift("oracle rollout error", oracle(), 0.0),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for c in super::run_all() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
