//! Physics world-model benchmark: task simulators with event handling,
//! seeded episode generation, reference predictors and the rollout
//! evaluation protocol.
//!
//! The numeric kernels are generic over [`real::Real`]; the aliases below pin
//! them to `f64`, which is what every benchmark surface uses.

pub mod cli;
pub mod dynamics;
pub mod episodes;
pub mod geometry;
pub mod harness;
pub mod math;
pub mod predictors;
pub mod real;
pub mod selftest;
pub mod tasks;

pub type Vec3 = math::Vec3<f64>;
pub type Quat = math::Quat<f64>;
pub type Matrix = math::Matrix<f64>;
pub type Mlp = predictors::Mlp<f64>;
