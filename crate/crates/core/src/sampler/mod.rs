//! Subject-oriented frame sampling: per-frame features, k-means clustering
//! of frames, and one softmax-weighted draw per cluster favouring frames that
//! resemble the subject. The regular, similarity-only and interval-constrained
//! strategies are provided for comparison.

mod features;
mod kmeans;
mod rng;
mod sampling;

pub(crate) use features::grid_span;
pub use features::{
    cosine_sim, extract_frame_features, read_sff, write_sff, FrameFeatureExtractor, FrameFeatures,
    ToyExtractor,
};
pub use kmeans::{inertia, kmeans, ClusterAssignment};
pub use rng::SplitMix64;
pub use sampling::{
    cluster_probs, sample_frames, softmax, ClusterProbs, SampleResult, SamplerConfig, Strategy,
};
