//! Frame directories on disk.
//!
//! A sequence directory holds its frames either directly or under `img/`
//! (the OTB layout), plus an optional `groundtruth_rect.txt`. Frames are
//! ordered lexicographically by file name.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::evaluation::{read_ground_truth, BoundingBox};
use crate::imaging::GrayImage;
use crate::tracker::FrameSource;

const FRAME_EXTENSIONS: [&str; 5] = ["jpg", "jpeg", "png", "pgm", "pnm"];

#[derive(Debug, Clone)]
pub struct FrameSequence {
    root: PathBuf,
    frames: Vec<PathBuf>,
}

impl FrameSequence {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let root = dir.as_ref().to_path_buf();
        let img = root.join("img");
        let frame_dir = if img.is_dir() { img } else { root.clone() };
        let mut frames: Vec<PathBuf> = fs::read_dir(&frame_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.is_file()
                    && p.extension()
                        .and_then(|e| e.to_str())
                        .is_some_and(|e| FRAME_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
            })
            .collect();
        frames.sort();
        if frames.is_empty() {
            return Err(Error::NoFrames(frame_dir));
        }
        Ok(Self { root, frames })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.frames
    }

    pub fn ground_truth_path(&self) -> PathBuf {
        self.root.join("groundtruth_rect.txt")
    }

    /// Ground truth next to the frames, if present.
    pub fn ground_truth(&self) -> Result<Option<Vec<BoundingBox>>> {
        let p = self.ground_truth_path();
        if p.is_file() {
            read_ground_truth(p).map(Some)
        } else {
            Ok(None)
        }
    }
}

impl FrameSource for FrameSequence {
    fn len(&self) -> usize {
        self.frames.len()
    }

    fn frame(&self, index: usize) -> Result<GrayImage> {
        GrayImage::open(&self.frames[index])
    }
}
