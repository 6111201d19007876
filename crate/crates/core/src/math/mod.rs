//! Small fixed-size geometry, dense SPD solve and the seeded random source.

mod matrix;
mod quat;
mod rng;
mod vec3;

pub use matrix::{solve_spd, Matrix, MatrixError};
pub use quat::Quat;
pub use rng::{child_seed, Rng, RngError};
pub use vec3::Vec3;
