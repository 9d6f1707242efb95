//! Numerical laboratory for weighted mixed Lebesgue spaces.
//!
//! The crate discretizes functions on uniform truncated grids and provides
//! Muckenhoupt weight constants, Hardy–Littlewood and sharp maximal
//! operators, Calderón–Zygmund, commutator and pseudodifferential operators,
//! and Fréchet–Kolmogorov style compactness diagnostics built on top of them.
//!
//! All numerics are generic over a [`Real`] scalar (`f32` or `f64`). The
//! aliases at the crate root fix the scalar to `f64`, which is what the
//! experiment runner uses.

pub mod compactness;
pub mod extrapolation;
pub mod fit;
pub mod grid;
pub mod maximal;
pub mod norms;
pub mod operators;
pub mod weights;

mod boxsum;
mod error;
mod fft;
mod scalar;

pub use error::{Error, Result};
pub use scalar::{lit, Real};

pub type Grid = grid::UniformGrid<f64>;
pub type Function = grid::SampledFunction<f64>;
pub type Family = grid::CubeFamily<f64>;
pub type Weight = weights::WeightSpec<f64>;
pub type Pair = weights::CertifiedPair<f64>;
pub type Params = norms::MixedNormParams<f64>;
pub type Operator = operators::OperatorSpec<f64>;
pub type Kernel = operators::KernelSpec<f64>;
pub type Symbol = operators::SymbolSpec<f64>;
pub type Probes = compactness::ProbeFamily<f64>;
pub type Profile = compactness::CompactnessProfile<f64>;

pub type Grid32 = grid::UniformGrid<f32>;
pub type Function32 = grid::SampledFunction<f32>;
