//! Face identification from a fused Gabor magnitude image, modelled with a
//! cyclic hidden Markov model.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! 1. [`gabor`]: a 5 scale × 8 orientation complex Gabor bank is convolved
//!    with the face and the L1 magnitudes of all responses are summed into a
//!    single feature image.
//! 2. [`sampling`]: the feature image is cut into overlapping strips and
//!    k×k blocks, visited in serpentine order.
//! 3. [`features`]: every block contributes one scalar, the sum of its
//!    pixels at or above the global mean of the feature image.
//! 4. [`phmm`]: a cyclic HMM with Gaussian emissions is trained with
//!    Baum-Welch, and every image is represented by its Viterbi path.
//! 5. [`classify`]: nearest class-mean path under L1, L2, Mahalanobis or
//!    cosine distance.
//! 6. [`evaluate`]: identification/verification protocol with confusion
//!    counts, sensitivity, specificity and accuracy.
//!
//! [`pipeline`] wires the stages together; [`config`], [`manifest`],
//! [`image_io`] and [`artifact`] cover configuration and persistence.

pub mod artifact;
pub mod classify;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod features;
pub mod gabor;
pub mod grid;
pub mod image_io;
pub mod manifest;
pub mod phmm;
pub mod pipeline;
pub mod sampling;

pub use error::{Error, Result};
pub use grid::Grid;
