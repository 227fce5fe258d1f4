//! Grayscale frames and affine patch extraction.
//!
//! Every candidate and template is a 32x32 grid sampled through an affine
//! warp of the template box, flattened row-major and scaled to unit l2 norm.
//! A constant region therefore maps to entries of exactly `1/32`.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder};
use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::tracker::AffineState;

pub const PATCH_SIDE: usize = 32;
pub const PATCH_LEN: usize = PATCH_SIDE * PATCH_SIDE;

/// Row-major intensities in `[0, 1]`.
///
/// Pixel `(x, y)` covers `[x, x + 1) x [y, y + 1)`; its center sits at
/// `(x + 0.5, y + 0.5)` in continuous coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidProblem(format!(
                "image data has {} values, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidProblem(
                "image intensities must lie in [0, 1]".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds an image from `f(x, y)`, clamping into `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    fn get_or_zero(&self, x: i64, y: i64) -> f64 {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            0.0
        } else {
            self.data[y as usize * self.width + x as usize]
        }
    }

    /// Bilinear lookup at continuous coordinates, zero outside the frame.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let px = x - 0.5;
        let py = y - 0.5;
        let x0 = px.floor();
        let y0 = py.floor();
        let fx = px - x0;
        let fy = py - y0;
        let (ix, iy) = (x0 as i64, y0 as i64);
        let top = self.get_or_zero(ix, iy) * (1.0 - fx) + self.get_or_zero(ix + 1, iy) * fx;
        let bottom =
            self.get_or_zero(ix, iy + 1) * (1.0 - fx) + self.get_or_zero(ix + 1, iy + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Decodes PNG, JPEG or binary PGM.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let decoded = image::open(path).map_err(|source| Error::Decode {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(to_gray(&decoded))
    }

    /// Writes an 8-bit binary PGM (P5).
    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|v| (v * 255.0).round() as u8)
            .collect();
        let writer = BufWriter::new(File::create(path.as_ref())?);
        PnmEncoder::new(writer)
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
            .write_image(
                &bytes,
                self.width as u32,
                self.height as u32,
                ExtendedColorType::L8,
            )
            .map_err(|source| Error::Decode {
                path: path.as_ref().to_path_buf(),
                source,
            })
    }
}

/// Luma `0.299 R + 0.587 G + 0.114 B` scaled to `[0, 1]`. Single-channel
/// inputs are used as is.
pub fn to_gray(img: &DynamicImage) -> GrayImage {
    let (width, height) = (img.width() as usize, img.height() as usize);
    let data = match img {
        DynamicImage::ImageLuma8(g) => g.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(g) => g.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        _ => img
            .to_rgb8()
            .pixels()
            .map(|p| {
                let [r, g, b] = p.0.map(f64::from);
                ((0.299 * r + 0.587 * g + 0.114 * b) / 255.0).clamp(0.0, 1.0)
            })
            .collect(),
    };
    GrayImage {
        width,
        height,
        data,
    }
}

/// Unit-norm flattened patch of length [`PATCH_LEN`].
#[derive(Debug, Clone, PartialEq)]
pub struct PatchVector(DVector<f64>);

impl PatchVector {
    /// Normalizes raw intensities. Fails on an all-zero input.
    pub fn from_raw(values: Vec<f64>) -> Result<Self> {
        if values.len() != PATCH_LEN {
            return Err(Error::InvalidProblem(format!(
                "patch must have {PATCH_LEN} entries, got {}",
                values.len()
            )));
        }
        let v = DVector::from_vec(values);
        let norm = v.norm();
        if !(norm > 1e-12 && norm.is_finite()) {
            return Err(Error::ZeroPatch);
        }
        Ok(Self(v / norm))
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn squared_distance(&self, other: &PatchVector) -> f64 {
        squared_distance(self.as_slice(), other.as_slice())
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    // Independent lanes let the compiler vectorize the reduction.
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    for (xa, xb) in ca.zip(cb) {
        for i in 0..8 {
            let d = xa[i] - xb[i];
            acc[i] += d * d;
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Samples the warped template box on a 32x32 grid.
///
/// Grid node `(i, j)` sits at `u = ((i + 0.5) / 32 - 0.5) w`,
/// `v = ((j + 0.5) / 32 - 0.5) h` in box coordinates and maps to
/// `(lx, ly) + R(theta) [1 phi; 0 1] (s u, s alpha v)`.
pub fn extract_patch(
    img: &GrayImage,
    state: &AffineState,
    template_box: (f64, f64),
) -> Result<PatchVector> {
    let (w, h) = template_box;
    let area = state.s * state.s * state.alpha * w * h;
    if !(area.is_finite() && area.abs() > 1e-9) {
        return Err(Error::DegenerateWarp);
    }
    let [m00, m01, m10, m11] = state.linear_part();
    let side = PATCH_SIDE as f64;
    let mut values = Vec::with_capacity(PATCH_LEN);
    for j in 0..PATCH_SIDE {
        let v = ((j as f64 + 0.5) / side - 0.5) * h;
        for i in 0..PATCH_SIDE {
            let u = ((i as f64 + 0.5) / side - 0.5) * w;
            let x = state.lx + m00 * u + m01 * v;
            let y = state.ly + m10 * u + m11 * v;
            values.push(img.sample(x, y));
        }
    }
    PatchVector::from_raw(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{Rgb, RgbImage};

    fn identity_at(lx: f64, ly: f64) -> AffineState {
        AffineState::at(lx, ly)
    }

    #[test]
    fn gray_conversion() {
        let white = DynamicImage::ImageRgb8(RgbImage::from_pixel(3, 2, Rgb([255, 255, 255])));
        assert!(to_gray(&white).data().iter().all(|&v| v == 1.0));

        let red = DynamicImage::ImageRgb8(RgbImage::from_pixel(2, 2, Rgb([255, 0, 0])));
        assert!(to_gray(&red).data().iter().all(|&v| (v - 0.299).abs() < 1e-12));

        let mut bw = RgbImage::new(2, 1);
        bw.put_pixel(1, 0, Rgb([255, 255, 255]));
        let g = to_gray(&DynamicImage::ImageRgb8(bw));
        assert_eq!((g.width(), g.height()), (2, 1));
        assert_eq!(g.data(), &[0.0, 1.0]);
    }

    #[test]
    fn identity_warp_copies_a_32x32_image() {
        let img = GrayImage::from_fn(32, 32, |x, y| (x as f64 + 2.0 * y as f64) / 100.0);
        let patch = extract_patch(&img, &identity_at(16.0, 16.0), (32.0, 32.0)).unwrap();
        let norm = img.data().iter().map(|v| v * v).sum::<f64>().sqrt();
        for (p, v) in patch.as_slice().iter().zip(img.data()) {
            assert!((p - v / norm).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_region_gives_one_over_32() {
        let img = GrayImage::from_fn(100, 80, |_, _| 0.4);
        let patch = extract_patch(&img, &identity_at(50.0, 40.0), (40.0, 30.0)).unwrap();
        for &v in patch.as_slice() {
            assert!((v - 0.03125).abs() < 1e-12);
        }
    }

    #[test]
    fn translation_matches_shifted_image() {
        let f = |x: f64, y: f64| 0.1 + 0.004 * x + 0.002 * y + 0.05 * (0.3 * x).sin();
        let img = GrayImage::from_fn(120, 100, |x, y| f(x as f64, y as f64));
        let shifted = GrayImage::from_fn(120, 100, |x, y| f(x as f64 + 1.0, y as f64));
        let a = extract_patch(&img, &identity_at(51.0, 50.0), (40.0, 40.0)).unwrap();
        let b = extract_patch(&shifted, &identity_at(50.0, 50.0), (40.0, 40.0)).unwrap();
        assert!(a.squared_distance(&b).sqrt() < 1e-6);
    }

    #[test]
    fn bilinear_is_exact_on_planes() {
        let img = GrayImage::from_fn(50, 50, |x, y| 0.01 * x as f64 + 0.005 * y as f64 + 0.1);
        for &(x, y) in &[(10.3, 20.7), (25.5, 25.5), (30.9, 11.1)] {
            let expected = 0.01 * (x - 0.5) + 0.005 * (y - 0.5) + 0.1;
            assert!((img.sample(x, y) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_padding_outside_frame() {
        let img = GrayImage::from_fn(10, 10, |_, _| 1.0);
        assert_eq!(img.sample(-5.0, -5.0), 0.0);
        assert!(matches!(
            extract_patch(&img, &identity_at(-100.0, -100.0), (8.0, 8.0)),
            Err(Error::ZeroPatch)
        ));
    }

    #[test]
    fn degenerate_warp() {
        let img = GrayImage::from_fn(10, 10, |_, _| 1.0);
        let mut s = identity_at(5.0, 5.0);
        s.alpha = 0.0;
        assert!(matches!(
            extract_patch(&img, &s, (8.0, 8.0)),
            Err(Error::DegenerateWarp)
        ));
    }

    #[test]
    fn pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pgm");
        let img = GrayImage::from_fn(7, 5, |x, y| ((x * 5 + y) as f64) / 34.0);
        img.save_pgm(&path).unwrap();
        let raw = std::fs::read(&path).unwrap();
        assert!(raw.starts_with(b"P5"));
        let back = GrayImage::open(&path).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }
}
