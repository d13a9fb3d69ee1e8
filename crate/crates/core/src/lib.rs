pub mod constitutive;
pub mod integrator;
pub mod refmodels;
pub mod error;
pub mod netfuncs;
pub mod tensor3;
pub mod training;
pub mod verify;

pub use error::{Error, Result};
pub use tensor3::{Mat3, SpectralDecomp, SymTensor3};
