//! Dataset ingestion and generation: CDnet directory trees, image and mask
//! files, nearest-neighbour resizing, training-frame selection and a
//! synthetic scene generator that writes the same layout.

mod cdnet;
mod io;
mod synth;

pub use cdnet::{
    list_numbered, scan_cdnet, select_training_frames, write_video, CdnetIndex, Category, FrameEntry, VideoEntry,
    INPUT_EXTS, MASK_EXTS,
};
pub use io::{load_image, resize_mask_nn, rgb_to_luma, save_image, save_mask};
pub use synth::{
    dilate, erode, synth_generate, Corruption, ObjectSpec, SyntheticConfig, SyntheticVideo, CANDIDATE_NAMES,
};
