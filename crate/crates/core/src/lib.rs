//! Numerical geometry of generalized Kaluza-Klein bundles E = M x K.
//!
//! Everything is computed in the adapted frame `(delta_alpha, dot)` built from
//! pulled-back Lie algebroid data and a nonlinear connection. Fields are
//! black-box evaluatable; derivatives come from nested forward-mode jets.

pub mod algebroid;
pub mod calculus;
pub mod curvature;
pub mod dconnection;
pub mod error;
pub mod expr;
pub mod lift;
pub mod linalg;
pub mod metric;
pub mod nlconnection;
pub mod report;
pub mod sampling;
pub mod sections;
pub mod tensor;

pub use calculus::{EPoint, Field, Jet, JetPoint, SmoothField};
pub use error::{EvalError, LiftError, SampleError, ShapeError};
pub use sampling::SampleBox;
pub use tensor::Tensor;
