pub mod analysis;
pub mod construct;
pub mod error;
pub mod fixtures;
pub mod interp;
pub mod io;
pub mod linalg;
pub mod quasistat;
pub mod rationalize;
pub mod scalar;
pub mod seq;
pub mod solver;
pub mod transition;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use seq::{FiniteSequence, Mask};
