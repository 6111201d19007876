//! Fixed-step classical RK4 with guard-function event localisation.
//!
//! Guards are scalar functions of the state. An event fires when a guard is
//! non-negative at the start of a (sub)interval and negative at its end; the
//! crossing time is bracketed by bisection, the event's `resolve` map is
//! applied at the last non-negative point and integration resumes for what
//! is left of the step. A guard that dips to zero and comes back inside one
//! interval never shows a sign change at the endpoints, so grazing contacts
//! do not fire.

use thiserror::Error;

use crate::math::Quat;
use crate::real::Real;

/// More events than this inside one step is treated as a modelling error.
pub const MAX_EVENTS_PER_STEP: usize = 16;

/// Bisection stops once the bracket is narrower than this fraction of `dt`.
pub const EVENT_TIME_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("non-finite value in state component {index}")]
    NonFinite { index: usize },
    #[error("event storm: more than {MAX_EVENTS_PER_STEP} events inside one step (last guard {guard})")]
    EventStorm { guard: usize },
    #[error("step size must be positive, got {0}")]
    BadStep(f64),
}

/// A collision or contact rule.
pub struct EventSpec<'a, T> {
    pub guard: Box<dyn Fn(&[T]) -> T + 'a>,
    pub resolve: Box<dyn Fn(&mut [T]) + 'a>,
}

impl<'a, T> EventSpec<'a, T> {
    pub fn new(guard: impl Fn(&[T]) -> T + 'a, resolve: impl Fn(&mut [T]) + 'a) -> Self {
        Self { guard: Box::new(guard), resolve: Box::new(resolve) }
    }
}

/// One fired event: which guard and how far into the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventHit<T> {
    pub guard: usize,
    pub time: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<T> {
    pub state: Vec<T>,
    pub events: Vec<EventHit<T>>,
}

fn check_finite<T: Real>(s: &[T]) -> Result<(), DynamicsError> {
    match s.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(DynamicsError::NonFinite { index }),
        None => Ok(()),
    }
}

/// Renormalises the four components starting at `offset` to a unit quaternion.
pub fn renormalize_quat<T: Real>(s: &mut [T], offset: usize) {
    let q = Quat::from_slice(&s[offset..offset + 4]).normalized();
    s[offset..offset + 4].copy_from_slice(&q.to_array());
}

/// One classical Runge-Kutta step of the autonomous system `ds/dt = deriv(s)`.
/// If `quat_block` is set, those four components are renormalised afterwards.
pub fn rk4_step<T, F>(deriv: &F, s: &[T], dt: T, quat_block: Option<usize>) -> Result<Vec<T>, DynamicsError>
where
    T: Real,
    F: Fn(&[T], &mut [T]) + ?Sized,
{
    if !(dt > T::zero()) {
        return Err(DynamicsError::BadStep(dt.as_f64()));
    }
    let n = s.len();
    let half = dt * T::lit(0.5);
    let mut k1 = vec![T::zero(); n];
    let mut k2 = vec![T::zero(); n];
    let mut k3 = vec![T::zero(); n];
    let mut k4 = vec![T::zero(); n];
    let mut tmp = vec![T::zero(); n];

    deriv(s, &mut k1);
    for i in 0..n {
        tmp[i] = s[i] + half * k1[i];
    }
    deriv(&tmp, &mut k2);
    for i in 0..n {
        tmp[i] = s[i] + half * k2[i];
    }
    deriv(&tmp, &mut k3);
    for i in 0..n {
        tmp[i] = s[i] + dt * k3[i];
    }
    deriv(&tmp, &mut k4);

    let sixth = dt / T::lit(6.0);
    let two = T::lit(2.0);
    let mut out: Vec<T> = (0..n)
        .map(|i| s[i] + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
        .collect();
    if let Some(q) = quat_block {
        renormalize_quat(&mut out, q);
    }
    check_finite(&out)?;
    Ok(out)
}

/// Advances `s` by `dt`, localising and resolving every guard crossing.
pub fn step_with_events<T, F>(
    deriv: &F,
    events: &[EventSpec<'_, T>],
    s: &[T],
    dt: T,
    quat_block: Option<usize>,
) -> Result<StepOutcome<T>, DynamicsError>
where
    T: Real,
    F: Fn(&[T], &mut [T]) + ?Sized,
{
    if !(dt > T::zero()) {
        return Err(DynamicsError::BadStep(dt.as_f64()));
    }
    let tol = dt * T::lit(EVENT_TIME_TOLERANCE);
    let mut state = s.to_vec();
    let mut elapsed = T::zero();
    let mut hits = Vec::new();

    loop {
        let remaining = dt - elapsed;
        if !(remaining > T::zero()) {
            break;
        }
        let end = rk4_step(deriv, &state, remaining, quat_block)?;

        // earliest crossing among all guards: (time, guard, state at time)
        let mut first: Option<(T, usize, Vec<T>)> = None;
        for (gi, ev) in events.iter().enumerate() {
            let g0 = (ev.guard)(&state);
            if !(g0 >= T::zero() && (ev.guard)(&end) < T::zero()) {
                continue;
            }
            let mut lo = T::zero();
            let mut hi = remaining;
            let mut lo_state = state.clone();
            while hi - lo > tol {
                let mid = lo + (hi - lo) * T::lit(0.5);
                if mid <= lo || mid >= hi {
                    break;
                }
                let m = rk4_step(deriv, &state, mid, quat_block)?;
                if (ev.guard)(&m) < T::zero() {
                    hi = mid;
                } else {
                    lo = mid;
                    lo_state = m;
                }
            }
            if first.as_ref().map_or(true, |(t, _, _)| lo < *t) {
                first = Some((lo, gi, lo_state));
            }
        }

        match first {
            None => {
                state = end;
                break;
            }
            Some((t, gi, mut at_event)) => {
                (events[gi].resolve)(&mut at_event);
                if let Some(q) = quat_block {
                    renormalize_quat(&mut at_event, q);
                }
                check_finite(&at_event)?;
                state = at_event;
                elapsed += t;
                hits.push(EventHit { guard: gi, time: elapsed });
                if hits.len() > MAX_EVENTS_PER_STEP {
                    return Err(DynamicsError::EventStorm { guard: gi });
                }
            }
        }
    }
    Ok(StepOutcome { state, events: hits })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free_fall(g: f64) -> impl Fn(&[f64], &mut [f64]) {
        move |s, d| {
            d[0] = s[1];
            d[1] = -g;
        }
    }

    #[test]
    fn zero_derivative_is_identity() {
        let s = vec![1.0, -2.0, 3.0];
        let out = rk4_step(&|_: &[f64], d: &mut [f64]| d.fill(0.0), &s, 0.02, None).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn free_fall_is_exact() {
        let out = rk4_step(&free_fall(9.81), &[1.0, 0.0], 0.1, None).unwrap();
        assert!((out[0] - 0.95095).abs() < 1e-15, "{}", out[0]);
        assert!((out[1] + 0.981).abs() < 1e-15, "{}", out[1]);
    }

    #[test]
    fn works_in_f32() {
        let d = |s: &[f32], d: &mut [f32]| {
            d[0] = s[1];
            d[1] = -9.81;
        };
        let out = rk4_step(&d, &[1.0f32, 0.0], 0.1, None).unwrap();
        assert!((out[0] - 0.95095).abs() < 1e-6);
    }

    #[test]
    fn small_pendulum_energy_drift() {
        let (g, l) = (9.81, 1.0);
        let d = move |s: &[f64], ds: &mut [f64]| {
            ds[0] = s[1];
            ds[1] = -(g / l) * s[0].sin();
        };
        let energy = |s: &[f64]| 0.5 * l * l * s[1] * s[1] - g * l * s[0].cos();
        let mut s = vec![0.1, 0.0];
        let e0 = energy(&s);
        for _ in 0..2000 {
            s = rk4_step(&d, &s, 0.02, None).unwrap();
        }
        assert!(((energy(&s) - e0) / e0).abs() <= 1e-7);
    }

    #[test]
    fn non_finite_is_reported() {
        let d = |_: &[f64], ds: &mut [f64]| ds[0] = f64::NAN;
        assert_eq!(rk4_step(&d, &[0.0], 0.1, None), Err(DynamicsError::NonFinite { index: 0 }));
    }

    #[test]
    fn no_crossing_matches_plain_step() {
        let d = free_fall(9.81);
        let floor = [EventSpec::new(|s: &[f64]| s[0], |s: &mut [f64]| s[1] = -s[1])];
        let plain = rk4_step(&d, &[1.0, 0.0], 0.02, None).unwrap();
        let ev = step_with_events(&d, &floor, &[1.0, 0.0], 0.02, None).unwrap();
        assert_eq!(ev.state, plain);
        assert!(ev.events.is_empty());
    }

    #[test]
    fn floor_reflection() {
        // 2D ball [x, y, vx, vy] moving with v = (1, -2) into the floor y = 0
        let d = |s: &[f64], ds: &mut [f64]| {
            ds[0] = s[2];
            ds[1] = s[3];
            ds[2] = 0.0;
            ds[3] = 0.0;
        };
        let floor = [EventSpec::new(|s: &[f64]| s[1], |s: &mut [f64]| s[3] = -s[3])];
        let out = step_with_events(&d, &floor, &[0.0, 0.01, 1.0, -2.0], 0.02, None).unwrap();
        assert_eq!(&out.state[2..], &[1.0, 2.0]);
        assert_eq!(out.events.len(), 1);
        assert!((out.events[0].time - 0.005).abs() < 1e-12);
        assert!((out.state[1] - 0.03).abs() < 1e-12);
    }

    #[test]
    fn storm_is_detected() {
        // resolve that leaves the guard negative keeps re-firing
        let d = |_: &[f64], ds: &mut [f64]| ds[0] = -1.0;
        let bad = [EventSpec::new(|s: &[f64]| s[0], |_: &mut [f64]| {})];
        let err = step_with_events(&d, &bad, &[0.001], 0.02, None).unwrap_err();
        assert_eq!(err, DynamicsError::EventStorm { guard: 0 });
    }

    #[test]
    fn deterministic() {
        let d = free_fall(9.81);
        let floor = [EventSpec::new(|s: &[f64]| s[0] - 0.1, |s: &mut [f64]| s[1] = -s[1])];
        let a = step_with_events(&d, &floor, &[0.1001, -1.3], 0.02, None).unwrap();
        let b = step_with_events(&d, &floor, &[0.1001, -1.3], 0.02, None).unwrap();
        assert_eq!(a, b);
    }
}
