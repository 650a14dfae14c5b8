//! Numerical potential theory on finite measure spaces.
//!
//! Kernels are nonnegative matrices over the atoms of a [`FiniteSpace`].
//! On top of them the crate computes maximum-principle and quasi-symmetry
//! constants, Wiener capacities and equilibrium measures, two-sided bounds
//! for the `(p, r)` norm inequality of the potential operator with `r < p`,
//! and solutions of the sublinear equation `u = G(u^q sigma)`. The
//! [`riesz`] module handles radial Riesz potentials on the line and in
//! space, including a family of measures whose functionals stay bounded
//! while the embedding constant grows without bound.
//!
//! All algorithms are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix `f64`, with `F32` variants for single
//! precision.
//!
//! ```
//! use potlab::{capacity::equilibrium, KernelMatrix};
//!
//! let g = KernelMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
//! let eq = equilibrium(&g, &[0, 1]).unwrap();
//! assert!((eq.capacity - 2.0 / 3.0).abs() < 1e-12);
//! ```

// guards are written `!(x > 0)` on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity;
pub mod embedding;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod lp;
pub mod plot;
pub mod potential;
pub mod quadrature;
pub mod riesz;
pub mod scalar;
pub mod solver;
pub mod space;
pub mod suite;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type KernelMatrix = kernel::KernelMatrix<f64>;
pub type FiniteSpace = space::FiniteSpace<f64>;
pub type DiscreteMeasure = space::DiscreteMeasure<f64>;
pub type FunctionOnSpace = space::FunctionOnSpace<f64>;
pub type EquilibriumResult = capacity::EquilibriumResult<f64>;
pub type EmbeddingReport = embedding::EmbeddingReport<f64>;
pub type PicardTrace = solver::PicardTrace<f64>;
pub type GagliardoResult = solver::GagliardoResult<f64>;
pub type CounterexampleConfig = riesz::CounterexampleConfig<f64>;
pub type TruncatedFunctionals = riesz::TruncatedFunctionals<f64>;
pub type Instance = suite::Instance<f64>;

pub type KernelMatrixF32 = kernel::KernelMatrix<f32>;
pub type FiniteSpaceF32 = space::FiniteSpace<f32>;
pub type DiscreteMeasureF32 = space::DiscreteMeasure<f32>;
pub type FunctionOnSpaceF32 = space::FunctionOnSpace<f32>;
pub type EquilibriumResultF32 = capacity::EquilibriumResult<f32>;
pub type PicardTraceF32 = solver::PicardTrace<f32>;
