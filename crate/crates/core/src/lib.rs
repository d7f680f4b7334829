//! Numerical differential geometry for the σ₂-curvature.
//!
//! Fields are closed-form functions on coordinate charts, differentiated
//! exactly with truncated Taylor arithmetic ([`jet`]). On top of that sit the
//! curvature pipeline ([`chartcalc`]), the σ₂ operator layer ([`sigma_ops`]),
//! first and second variation formulas with finite-difference oracles
//! ([`variations`]), model geometries ([`models`]), and radial spectral and
//! constraint solvers ([`spectral`]).

pub mod algebra;
pub mod chartcalc;
pub mod error;
pub mod field;
pub mod domain;
pub mod jet;
pub mod linalg;
pub mod models;
pub mod variations;
pub mod ring;
pub mod samples;
pub mod scalar;
pub mod sigma_ops;
pub mod spectral;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Jet64 = jet::Jet<f64>;
pub type Jet32 = jet::Jet<f32>;
pub type Tensor64 = tensor::Tensor<f64>;
pub type Chart64 = field::Chart<f64>;
pub type MetricField64 = field::MetricField<f64>;
pub type MetricField32 = field::MetricField<f32>;
pub type ScalarField64 = field::ScalarField<f64>;
pub type SymTensorField64 = field::SymTensorField<f64>;
pub type CurvaturePack64 = chartcalc::CurvaturePack<f64>;
