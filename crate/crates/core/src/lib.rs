pub mod augment;
pub mod data;
pub mod error;
pub mod layers;
pub mod metrics;
pub mod network;
pub mod pipeline;
pub mod survival;
pub mod synth;
pub mod tensor;

pub use data::{Label, LabeledPair, SubjectRecord};
pub use error::{Error, Result};
pub use tensor::{Dims3, Scalar, Tensor4, Volume};
