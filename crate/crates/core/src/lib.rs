//! Visual object tracking with an l2-regularized approximated
//! locality-constrained linear coding (LLC) appearance model.
//!
//! Candidates drawn by a particle filter are coded against several local
//! dictionaries of nearest positive and negative templates. Each coder is a
//! closed-form sum-to-one least-squares solve with an l2 penalty that keeps
//! the coefficients nonnegative on image data; the dictionaries are blended by
//! weights learned with the same closed form. Reconstruction errors against
//! the positive and negative template sets score each candidate, and the
//! number of negative templates used by the winner flags severe occlusion.
//!
//! Module map:
//!
//! - [`solver`]: closed-form coders, regularization bounds, dominance checks
//!   and an exact nonnegative oracle.
//! - [`imaging`]: frame decoding, grayscale conversion and affine patch
//!   extraction.
//! - [`templates`]: positive/negative template stores, KNN dictionaries and
//!   the update policy.
//! - [`encoder`]: multi-dictionary encoding with learned weights.
//! - [`tracker`]: particle propagation, confidence and occlusion detection.
//! - [`evaluation`]: center location error, overlap rate, reports and the
//!   regularization sweep.
//! - [`synth`]: synthetic test sequences.
//! - [`config`]: the flat JSON run configuration.

pub mod config;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod imaging;
pub mod sequence;
pub mod solver;
pub mod synth;
pub mod templates;
pub mod tracker;

#[cfg(test)]
pub(crate) mod testutil;

pub use config::RunConfig;
pub use encoder::{encode, EncoderConfig, EncodingResult};
pub use error::{Error, Result};
pub use evaluation::{cle, overlap, BoundingBox, SequenceReport};
pub use imaging::{extract_patch, GrayImage, PatchVector, PATCH_LEN, PATCH_SIDE};
pub use solver::{CodingProblem, CodingSolution, DominanceReport};
pub use templates::{LocalDictionary, TemplateStore, UniformCoefficients};
pub use tracker::{AffineState, FrameResult, MotionModel, Tracker};
