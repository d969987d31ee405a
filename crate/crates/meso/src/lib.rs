//! Meso: a from-scratch CNN training and inference engine for the Meso
//! family of facial-image-manipulation detectors.
//!
//! The crate covers the full pipeline: landmark-based face alignment, PPM
//! ingestion, the four Meso architectures (binary and multiclass, 4- and
//! 6-block), backpropagation with Adam, binary→multiclass transfer learning,
//! bit-exact model serialization, and the evaluation stack (confusion matrix,
//! classification report, ROC/AUC).

pub mod arch;
pub mod dataset;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod metrics;
pub mod persistence;
pub mod preprocess;
pub mod rng;
pub mod tensor;
pub mod training;
pub mod transfer;

pub use error::{Error, Result};
pub use tensor::Tensor;
