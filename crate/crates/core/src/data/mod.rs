//! Subject-oriented dataset format: videos, annotated subject regions and
//! their reference captions, plus frame storage and dataset statistics.

mod frames;
mod stats;
mod types;

pub use frames::{
    crop_subject, load_frames, read_ppm, read_svf, write_ppm, write_ppm_dir, write_svf, Frames,
    Image, ImageView,
};
pub use stats::{dataset_stats, DatasetStats};
pub use types::{
    load_dataset, load_dataset_unvalidated, save_dataset, BBox, Dataset, Split, SubjectRegion,
    SubjectSample, VideoRecord, ANNOTATIONS_FILE, FORMAT_VERSION,
};
