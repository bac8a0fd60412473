#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversarial;
pub mod certificate;
pub mod error;
pub mod formats;
pub mod grouprep;
pub mod matcore;
pub mod protocol;
pub mod random;
pub mod scalar;
pub mod states;
pub mod uhlmann;

pub use error::{Error, Result};
pub use matcore::ComplexMatrix;
pub use scalar::{Real, C};
pub use states::{BipartitePureState, DensityMatrix};

pub type CMatrix = ComplexMatrix<f64>;
pub type CMatrix32 = ComplexMatrix<f32>;
pub type State = BipartitePureState<f64>;
pub type State32 = BipartitePureState<f32>;
