//! Subject-oriented video captioning.
//!
//! Given a video and a bounding box around one entity on one frame, the
//! pipeline selects frames related to that entity ([`sampler`]), encodes them
//! together with prompt tokens derived from the boxed region and learnable
//! prompt tokens, and generates a caption about the entity ([`model`]).
//! [`data`] defines the on-disk dataset format, [`annotate`] builds such
//! datasets from raw captions and detector output, and [`metrics`] scores
//! generated captions.

pub mod annotate;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod sampler;
pub mod synthetic;
pub mod text;

pub use error::{Error, Result};
