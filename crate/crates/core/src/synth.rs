//! Synthetic sequences for tests and demos.
//!
//! A 40x40 square with fine, high-contrast texture moves at constant velocity
//! over a smooth, low-contrast background; every frame adds independent
//! sensor noise. The occlusion variant hides the right 75% of the target for
//! the middle third of the sequence behind an occluder that shows the
//! background texture, i.e. the same texture the negative templates see.

use std::fs;
use std::ops::Range;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{write_ground_truth, BoundingBox};
use crate::imaging::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    MovingSquare,
    Occlusion,
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moving-square" => Ok(Self::MovingSquare),
            "occlusion" => Ok(Self::Occlusion),
            other => Err(Error::Config(format!(
                "unknown sequence kind {other:?} (expected moving-square or occlusion)"
            ))),
        }
    }
}

/// Smooth value noise: random lattice values blended with a smoothstep.
#[derive(Debug, Clone)]
struct ValueNoise {
    cell: f64,
    cols: usize,
    lattice: Vec<f64>,
}

impl ValueNoise {
    fn new<R: Rng>(rng: &mut R, width: f64, height: f64, cell: f64, lo: f64, hi: f64) -> Self {
        let cols = (width / cell).ceil() as usize + 2;
        let rows = (height / cell).ceil() as usize + 2;
        let lattice = (0..cols * rows).map(|_| rng.random_range(lo..hi)).collect();
        Self {
            cell,
            cols,
            lattice,
        }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let gx = (x / self.cell).max(0.0);
        let gy = (y / self.cell).max(0.0);
        let (ix, iy) = (gx.floor() as usize, gy.floor() as usize);
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        let (tx, ty) = (smooth(gx - ix as f64), smooth(gy - iy as f64));
        let rows = self.lattice.len() / self.cols;
        let ix = ix.min(self.cols - 2);
        let iy = iy.min(rows - 2);
        let v = |c: usize, r: usize| self.lattice[r * self.cols + c];
        let top = v(ix, iy) * (1.0 - tx) + v(ix + 1, iy) * tx;
        let bottom = v(ix, iy + 1) * (1.0 - tx) + v(ix + 1, iy + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

/// A single smooth-textured frame with no target, for tests.
pub fn textured_frame(width: usize, height: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = ValueNoise::new(&mut rng, width as f64, height as f64, 8.0, 0.05, 0.95);
    GrayImage::from_fn(width, height, |x, y| noise.at(x as f64 + 0.5, y as f64 + 0.5))
}

/// Parameters of a synthetic sequence. Frames are indexed from 0.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub frames: usize,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub target_size: f64,
    pub start: (f64, f64),
    pub velocity: (f64, f64),
    pub noise_sigma: f64,
    /// Fraction of the target width hidden by the occluder.
    pub occluded_fraction: f64,
    background: ValueNoise,
    target: ValueNoise,
}

impl SynthSpec {
    pub fn new(kind: SynthKind, frames: usize, seed: u64) -> Self {
        let (width, height) = (320, 240);
        let target_size = 40.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let background = ValueNoise::new(&mut rng, width as f64, height as f64, 16.0, 0.2, 0.5);
        let target = ValueNoise::new(&mut rng, target_size, target_size, 4.0, 0.1, 1.0);
        Self {
            kind,
            frames,
            seed,
            width,
            height,
            target_size,
            start: (60.0, 80.0),
            velocity: (1.5, 0.8),
            noise_sigma: 0.02,
            occluded_fraction: 0.75,
            background,
            target,
        }
    }

    /// Moves the target with the given per-frame displacement, keeping it
    /// inside the frame over the whole sequence.
    pub fn with_velocity(mut self, vx: f64, vy: f64) -> Self {
        self.velocity = (vx, vy);
        self
    }

    pub fn ground_truth(&self, index: usize) -> BoundingBox {
        let t = index as f64;
        BoundingBox::new(
            self.start.0 + self.velocity.0 * t,
            self.start.1 + self.velocity.1 * t,
            self.target_size,
            self.target_size,
        )
    }

    /// 0-based frames carrying the occluder (empty for moving-square).
    pub fn occluded_span(&self) -> Range<usize> {
        match self.kind {
            SynthKind::MovingSquare => 0..0,
            SynthKind::Occlusion => self.frames / 3..2 * self.frames / 3,
        }
    }

    pub fn is_occluded(&self, index: usize) -> bool {
        self.occluded_span().contains(&index)
    }

    pub fn frame(&self, index: usize) -> GrayImage {
        let gt = self.ground_truth(index);
        let occluded = self.is_occluded(index);
        let occluder_x = gt.x + (1.0 - self.occluded_fraction) * gt.w;
        let margin = 4.0;

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64 + 1);
        let sensor = Normal::new(0.0, self.noise_sigma).expect("finite sigma");

        GrayImage::from_fn(self.width, self.height, |x, y| {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let in_target = px >= gt.x && px < gt.x + gt.w && py >= gt.y && py < gt.y + gt.h;
            let in_occluder = occluded
                && px >= occluder_x
                && px < gt.x + gt.w + margin
                && py >= gt.y - margin
                && py < gt.y + gt.h + margin;
            let clean = if in_target && !in_occluder {
                self.target.at(px - gt.x, py - gt.y)
            } else {
                self.background.at(px, py)
            };
            clean + rng.sample(sensor)
        })
    }

    /// Writes `img/0001.pgm ...` and `groundtruth_rect.txt` under `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let img_dir = dir.join("img");
        fs::create_dir_all(&img_dir)?;
        for i in 0..self.frames {
            self.frame(i)
                .save_pgm(img_dir.join(format!("{:04}.pgm", i + 1)))?;
        }
        let boxes: Vec<BoundingBox> = (0..self.frames).map(|i| self.ground_truth(i)).collect();
        write_ground_truth(dir.join("groundtruth_rect.txt"), &boxes)
    }
}
