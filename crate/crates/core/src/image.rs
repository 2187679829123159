//! Profile-image preprocessing and pixel-level similarity.
//!
//! Images are resampled to 48×48 with a Catmull-Rom cubic kernel (a = −0.5)
//! and converted to 8-bit luma using (0.299, 0.587, 0.114). When shrinking,
//! the kernel is stretched by the scale factor so every source pixel
//! contributes, the same way common image libraries filter on downscale.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::{Error, Result};

pub const SIDE: usize = 48;
pub const PIXELS: usize = SIDE * SIDE;

/// PSNR reported for identical images.
pub const PSNR_CAP: f64 = 100.0;

const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Decoded interleaved RGB8 image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Invalid("image has zero size".into()));
        }
        if data.len() != width * height * 3 {
            return Err(Error::Invalid(format!(
                "RGB buffer holds {} bytes, expected {}",
                data.len(),
                width * height * 3
            )));
        }
        Ok(RgbImage { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// A 48×48 grayscale thumbnail, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GrayImage(Box<[u8; PIXELS]>);

impl std::fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GrayImage({} px)", PIXELS)
    }
}

impl GrayImage {
    pub fn filled(value: u8) -> Self {
        GrayImage(Box::new([value; PIXELS]))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let arr: [u8; PIXELS] = bytes
            .try_into()
            .map_err(|_| Error::Invalid(format!("gray image must be {PIXELS} bytes, got {}", bytes.len())))?;
        Ok(GrayImage(Box::new(arr)))
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut px = Box::new([0u8; PIXELS]);
        for y in 0..SIDE {
            for x in 0..SIDE {
                px[y * SIDE + x] = f(x, y);
            }
        }
        GrayImage(px)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0[..]
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.0[y * SIDE + x]
    }
}

/// Catmull-Rom cubic convolution kernel (a = −0.5).
pub fn cubic_kernel(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x < 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// Resampling weights for one output coordinate: (first source index, weights).
fn axis_weights(src: usize, dst: usize) -> Vec<(usize, Vec<f64>)> {
    let scale = src as f64 / dst as f64;
    let support_scale = scale.max(1.0);
    let radius = 2.0 * support_scale;
    (0..dst)
        .map(|i| {
            let center = (i as f64 + 0.5) * scale;
            let lo = ((center - radius).floor() as isize).max(0) as usize;
            let hi = ((center + radius).ceil() as usize).min(src);
            let mut w: Vec<f64> = (lo..hi)
                .map(|j| cubic_kernel((j as f64 + 0.5 - center) / support_scale))
                .collect();
            let sum: f64 = w.iter().sum();
            if sum != 0.0 {
                w.iter_mut().for_each(|v| *v /= sum);
            }
            (lo, w)
        })
        .collect()
}

/// Downscale (or upscale) to 48×48 and convert to gray.
pub fn preprocess(raw: &RgbImage) -> GrayImage {
    let xw = axis_weights(raw.width, SIDE);
    let yw = axis_weights(raw.height, SIDE);

    // Horizontal pass: height × 48 × 3 floats.
    let mut horiz = vec![0.0f64; raw.height * SIDE * 3];
    for y in 0..raw.height {
        for (ox, (lo, w)) in xw.iter().enumerate() {
            let mut acc = [0.0f64; 3];
            for (k, wk) in w.iter().enumerate() {
                let p = raw.pixel(lo + k, y);
                for c in 0..3 {
                    acc[c] += wk * p[c] as f64;
                }
            }
            horiz[(y * SIDE + ox) * 3..][..3].copy_from_slice(&acc);
        }
    }

    let mut out = Box::new([0u8; PIXELS]);
    for (oy, (lo, w)) in yw.iter().enumerate() {
        for ox in 0..SIDE {
            let mut acc = [0.0f64; 3];
            for (k, wk) in w.iter().enumerate() {
                let px = &horiz[((lo + k) * SIDE + ox) * 3..][..3];
                for c in 0..3 {
                    acc[c] += wk * px[c];
                }
            }
            out[oy * SIDE + ox] = luma(acc.map(|v| v.clamp(0.0, 255.0)));
        }
    }
    GrayImage(out)
}

fn luma(rgb: [f64; 3]) -> u8 {
    let g = LUMA[0] * rgb[0] + LUMA[1] * rgb[1] + LUMA[2] * rgb[2];
    g.round().clamp(0.0, 255.0) as u8
}

/// Mean squared pixel difference.
pub fn mse(a: &GrayImage, b: &GrayImage) -> f64 {
    let sum: u64 = a
        .0
        .iter()
        .zip(b.0.iter())
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    sum as f64 / PIXELS as f64
}

/// PSNR from an MSE value, capped at [`PSNR_CAP`].
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP;
    }
    (10.0 * (255.0f64 * 255.0 / mse).log10()).min(PSNR_CAP)
}

pub fn psnr(a: &GrayImage, b: &GrayImage) -> f64 {
    psnr_from_mse(mse(a, b))
}

/// Edit distance between two byte sequences where symbols within `tolerance`
/// of each other count as equal.
pub fn levenshtein_distance(a: &[u8], b: &[u8], tolerance: u8) -> usize {
    let eq = |x: u8, y: u8| x.abs_diff(y) <= tolerance;
    // Trimming a shared prefix/suffix never changes the distance.
    let prefix = a.iter().zip(b).take_while(|(&x, &y)| eq(x, y)).count();
    let (a, b) = (&a[prefix..], &b[prefix..]);
    let suffix = a.iter().rev().zip(b.iter().rev()).take_while(|(&x, &y)| eq(x, y)).count();
    let (a, b) = (&a[..a.len() - suffix], &b[..b.len() - suffix]);
    if a.is_empty() || b.is_empty() {
        return a.len().max(b.len());
    }

    let mut row: Vec<u32> = (0..=b.len() as u32).collect();
    for (i, &ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i as u32 + 1;
        for (j, &cb) in b.iter().enumerate() {
            let up = row[j + 1];
            let sub = diag + u32::from(!eq(ca, cb));
            let best = sub.min(up + 1).min(row[j] + 1);
            diag = up;
            row[j + 1] = best;
        }
    }
    row[b.len()] as usize
}

/// 1 − distance / 2304 over the two pixel sequences.
pub fn pixel_levenshtein(a: &GrayImage, b: &GrayImage, tolerance: u8) -> f64 {
    1.0 - levenshtein_distance(a.as_bytes(), b.as_bytes(), tolerance) as f64 / PIXELS as f64
}

/// In-memory map from an image reference to its thumbnail.
#[derive(Debug, Clone, Default)]
pub struct ImageStore {
    images: HashMap<String, GrayImage>,
}

impl ImageStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, image_ref: impl Into<String>, image: GrayImage) {
        self.images.insert(image_ref.into(), image);
    }

    pub fn get(&self, image_ref: &str) -> Option<&GrayImage> {
        self.images.get(image_ref)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn read_gray(path: &Path) -> Result<GrayImage> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        GrayImage::from_bytes(&bytes).map_err(|e| Error::parse(path, 1, e.to_string()))
    }

    pub fn write_gray(path: &Path, image: &GrayImage) -> Result<()> {
        fs::write(path, image.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(seed: u8) -> GrayImage {
        GrayImage::from_fn(|x, y| ((x * 7 + y * 13) as u8).wrapping_mul(seed))
    }

    #[test]
    fn constant_images_survive_preprocessing() {
        let img = RgbImage::from_fn(37, 91, |_, _| [100, 100, 100]).unwrap();
        assert_eq!(preprocess(&img), GrayImage::filled(100));
        let red = RgbImage::from_fn(200, 150, |_, _| [255, 0, 0]).unwrap();
        assert_eq!(preprocess(&red), GrayImage::filled(76));
        let tiny = RgbImage::from_fn(1, 1, |_, _| [10, 200, 30]).unwrap();
        assert_eq!(preprocess(&tiny), GrayImage::filled(124));
    }

    #[test]
    fn zero_sized_image_rejected() {
        assert!(RgbImage::new(0, 10, vec![]).is_err());
        assert!(RgbImage::new(2, 2, vec![0; 11]).is_err());
    }

    #[test]
    fn kernel_shape() {
        assert_eq!(cubic_kernel(0.0), 1.0);
        assert_eq!(cubic_kernel(1.0), 0.0);
        assert_eq!(cubic_kernel(2.0), 0.0);
        assert!((cubic_kernel(0.5) - 0.5625).abs() < 1e-12);
        assert!((cubic_kernel(1.5) + 0.0625).abs() < 1e-12);
    }

    #[test]
    fn mse_and_psnr() {
        let black = GrayImage::filled(0);
        let white = GrayImage::filled(255);
        assert_eq!(mse(&black, &black), 0.0);
        assert_eq!(mse(&black, &white), 65025.0);
        let mut px = [0u8; PIXELS];
        px[17] = 10;
        let one = GrayImage::from_bytes(&px).unwrap();
        assert!((mse(&black, &one) - 100.0 / 2304.0).abs() < 1e-15);

        assert_eq!(psnr(&black, &black), 100.0);
        assert_eq!(psnr(&black, &white), 0.0);
        assert!((psnr_from_mse(65.025) - 30.0).abs() < 1e-12);
    }

    #[test]
    fn levenshtein_extremes() {
        let black = GrayImage::filled(0);
        let white = GrayImage::filled(255);
        assert_eq!(pixel_levenshtein(&black, &black, 0), 1.0);
        assert_eq!(pixel_levenshtein(&black, &white, 0), 0.0);
        assert_eq!(pixel_levenshtein(&black, &white, 255), 1.0);
        let p = pattern(3);
        assert_eq!(pixel_levenshtein(&p, &p, 0), 1.0);
    }

    #[test]
    fn levenshtein_small() {
        assert_eq!(levenshtein_distance(b"kitten", b"sitting", 0), 3);
        assert_eq!(levenshtein_distance(b"", b"abc", 0), 3);
        assert_eq!(levenshtein_distance(b"flaw", b"lawn", 0), 2);
        assert_eq!(levenshtein_distance(&[10, 20, 30], &[11, 21, 29], 1), 0);
        assert_eq!(levenshtein_distance(&[10, 20, 30], &[11, 21, 29], 0), 3);
    }

    #[test]
    fn gray_bytes_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.gray");
        let img = pattern(5);
        ImageStore::write_gray(&p, &img).unwrap();
        assert_eq!(ImageStore::read_gray(&p).unwrap(), img);
        assert!(GrayImage::from_bytes(&[0; 10]).is_err());
    }
}
