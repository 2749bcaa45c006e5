//! Sentence-type aware intonation tooling: a self-attention pooled
//! statement/question classifier, a parametric boundary-tone contour
//! renderer, and F0-based objective evaluation of synthesized speech.

pub mod align;
pub mod classifier;
pub mod contour;
pub mod corpus;
pub mod metrics;
pub mod pitch;
pub mod signal;
