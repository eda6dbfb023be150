//! Sampling on the Stiefel manifold through the Givens angle
//! parameterization.
//!
//! An `n x p` matrix with orthonormal columns is written as a product of
//! plane rotations applied to the first `p` columns of the identity. The
//! angles are mapped to unconstrained coordinates by [`charts`], the
//! change-of-measure term is [`givens::log_measure`], and [`diff`] provides the
//! exact gradient used by the HMC sampler in [`sampler`].
//!
//! ```
//! use stiefel_givens::{givens_to_matrix, matrix_to_givens, AngleVector, Shape};
//!
//! let shape = Shape::new(4, 2).unwrap();
//! let theta = AngleVector::new(shape, vec![0.3, -0.2, 0.1, 1.0, 0.4]).unwrap();
//! let y = givens_to_matrix(&theta);
//! let back = matrix_to_givens(&y).unwrap();
//! for (a, b) in theta.values().iter().zip(back.values()) {
//!     assert!((a - b).abs() < 1e-12);
//! }
//! ```

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod charts;
pub mod checks;
pub mod diff;
pub mod error;
pub mod givens;
pub mod models;
pub mod oracle;
pub mod sampler;

pub use charts::{constrain, unconstrain, ChartConfig, ChartResult, UnconstrainedVector};
pub use diff::{eval_grad, Evaluator, GradientBundle};
pub use error::{Error, Result};
pub use givens::{
    angle_indices, apply_rotation, givens_to_matrix, log_measure, make_shape, matrix_to_givens, AngleIndex, AngleKind,
    AngleVector, Shape, StiefelMatrix,
};
pub use models::ModelTarget;
pub use sampler::{run, run_potential, ChainOutput, Diagnostics, Fit, HmcConfig, Potential};
