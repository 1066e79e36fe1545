//! Dual-averaging (lazy mirror descent) learning in continuous N-player
//! games with noisy gradient feedback.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the bottom of this file fix it to `f64`.

pub mod analysis;
pub mod engine;
pub mod error;
pub mod games;
pub mod geometry;
pub mod regularizer;
pub mod scalar;
pub mod suites;

pub use error::{Error, Result};
pub use games::Game;
pub use scalar::Scalar;

pub type ConvexSetF64 = geometry::ConvexSet<f64>;
pub type ProductSetF64 = geometry::ProductSet<f64>;
pub type RegularizerF64 = regularizer::Regularizer<f64>;
pub type ProductRegularizerF64 = regularizer::ProductRegularizer<f64>;
pub type CournotF64 = games::Cournot<f64>;
pub type CongestionGameF64 = games::CongestionGame<f64>;
pub type FiniteGameF64 = games::FiniteGame<f64>;
pub type BilinearZeroSumF64 = games::BilinearZeroSum<f64>;
pub type NonConcaveStableF64 = games::NonConcaveStable<f64>;
pub type TrajectoryF64 = engine::Trajectory<f64>;

