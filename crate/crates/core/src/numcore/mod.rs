//! Dense numerics: tensors, nonlinearities, the parameter registry and the
//! finite-difference gradient oracle.

mod gradcheck;
mod ops;
mod params;
pub mod rng;
mod tensor;

pub use gradcheck::{finite_diff_check, GradCheckReport, ParamCheck};
pub use ops::{logit, masked_softmax, sigmoid, softplus, Activation};
pub use params::{ParamInfo, ParamKind, Parameterized};
pub use tensor::{dot, Tensor2};
