//! Square fiducial markers for the four flashcards.
//!
//! Each card carries a 6×6 module marker: a solid black ring around a 4×4
//! payload holding the card's 16-bit codeword. Detection runs
//!
//! 1. box blur + adaptive mean threshold,
//! 2. dark-region boundary tracing and quad fitting,
//! 3. a four-point homography from the canonical marker square,
//! 4. module-center sampling with an Otsu split,
//! 5. nearest-codeword decoding over all four rotations.

mod detect;
pub mod dictionary;
pub mod homography;
mod image;
pub mod quad;
pub mod render;
mod sample;
mod threshold;

pub use detect::{canonical_corners, detect, Detection, DetectionParams};
pub use dictionary::{
    build_dictionary, decode_payload, decode_payload_within, MarkerSpec, PayloadBits, PayloadMatch,
};
pub use homography::{estimate_homography, Homography, Point};
pub use image::{png_dimensions, GrayImage};
pub use quad::{find_quads, find_quads_with, Quad};
pub use render::{random_synthetic_frame, render_marker, render_synthetic_frame, PlacementRange, SyntheticFrame};
pub use sample::{otsu_threshold, sample_grid, GridSample};
pub use threshold::{box_blur, threshold_adaptive};

#[derive(Debug, thiserror::Error)]
pub enum VisionError {
    #[error("invalid image buffer: {width}x{height} with {len} pixels")]
    InvalidImage { width: usize, height: usize, len: usize },
    #[error("threshold window {window} must be odd, at least 3 and fit in {width}x{height}")]
    BadWindow { window: usize, width: usize, height: usize },
    #[error("degenerate point configuration")]
    DegenerateConfiguration,
    #[error("sample point falls outside the frame")]
    OutOfFrame,
    #[error("no dictionary satisfies the distance constraint for seed {seed}")]
    DictionarySearchFailed { seed: u64 },
    #[error("invalid marker spec: {0}")]
    InvalidSpec(String),
    #[error("invalid detection parameters: {0}")]
    InvalidParams(String),
    #[error("cannot decode image: {0}")]
    Decode(String),
    #[error("cannot encode image: {0}")]
    Encode(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
