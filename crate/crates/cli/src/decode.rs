//! Image files to thumbnails, with an on-disk thumbnail cache.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use footprint::image::{preprocess, GrayImage, ImageStore, RgbImage};
use footprint::profile::Corpus;
use rayon::prelude::*;

/// Turns an image file into RGB pixels.
pub trait ImageDecoder: Sync {
    fn decode(&self, path: &Path) -> Result<RgbImage>;
}

/// PNG and JPEG via the `image` crate.
pub struct FileDecoder;

impl ImageDecoder for FileDecoder {
    fn decode(&self, path: &Path) -> Result<RgbImage> {
        let img = image::open(path).with_context(|| format!("decoding {}", path.display()))?.to_rgb8();
        let (w, h) = img.dimensions();
        Ok(RgbImage::new(w as usize, h as usize, img.into_raw())?)
    }
}

fn cache_name(image_ref: &str) -> String {
    let safe: String = image_ref
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect();
    format!("{safe}.gray")
}

/// Thumbnails for every image the corpus references. Cached thumbnails are
/// reused; unreadable or absent files leave that image missing.
pub fn load_images(corpus: &Corpus, dir: &Path, cache: Option<&Path>, decoder: &dyn ImageDecoder) -> Result<ImageStore> {
    if let Some(c) = cache {
        fs::create_dir_all(c).with_context(|| format!("creating {}", c.display()))?;
    }
    let refs: BTreeSet<&str> = corpus.profiles().iter().filter_map(|p| p.image_ref.as_deref()).collect();
    let loaded: Vec<(&str, Option<GrayImage>)> = refs
        .into_par_iter()
        .map(|r| {
            let cached = cache.map(|c| c.join(cache_name(r)));
            if let Some(img) = cached.as_deref().filter(|p| p.exists()).and_then(|p| ImageStore::read_gray(p).ok()) {
                return Ok((r, Some(img)));
            }
            let img = match decoder.decode(&dir.join(r)) {
                Ok(rgb) => preprocess(&rgb),
                Err(e) => {
                    log::warn!("image {r}: {e:#}");
                    return Ok((r, None));
                }
            };
            if let Some(p) = &cached {
                crate::write_atomic(p, img.as_bytes())?;
            }
            Ok((r, Some(img)))
        })
        .collect::<Result<_>>()?;
    let mut store = ImageStore::new();
    let mut missing = 0;
    for (r, img) in loaded {
        match img {
            Some(img) => store.insert(r, img),
            None => missing += 1,
        }
    }
    if missing > 0 {
        log::warn!("{missing} referenced images could not be loaded");
    }
    Ok(store)
}
