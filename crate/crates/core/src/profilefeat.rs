//! Description, follower/friend and profile-image features.

use std::path::Path;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::corpus::WordList;
use crate::error::{Error, Result};
use crate::tweetfeat::{is_url, tokenize_tweet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileFeatures {
    /// -1, 0 or 1.
    pub fp_desc: f64,
    pub tf_desc: u64,
    pub tff: f64,
    /// Mean HSV value in [0, 1].
    pub brightness: f64,
}

/// Drops hashtags, mentions and URLs; the rest is rejoined with single spaces.
pub fn strip_entities(text: &str) -> String {
    text.split_whitespace()
        .filter(|t| !t.starts_with('#') && !t.starts_with('@') && !is_url(t))
        .collect::<Vec<_>>()
        .join(" ")
}

/// 1 if the description uses a first-person word and no brand word, -1 for
/// the reverse, 0 otherwise.
pub fn description_first_person_score(description: &str, first: &WordList, brand: &WordList) -> f64 {
    let tokens = tokenize_tweet(description);
    let f = tokens.iter().any(|t| first.contains(t));
    let b = tokens.iter().any(|t| brand.contains(t));
    match (f, b) {
        (true, false) => 1.0,
        (false, true) => -1.0,
        _ => 0.0,
    }
}

/// Number of tokens left after entity stripping.
pub fn description_term_count(description: &str) -> u64 {
    tokenize_tweet(&strip_entities(description)).len() as u64
}

/// `ln((followers² + 1) / (friends + 1))`.
pub fn tff_score(followers: u64, friends: u64) -> f64 {
    let fo = followers as f64;
    ((fo * fo + 1.0) / (friends as f64 + 1.0)).ln()
}

/// Mean of the per-pixel HSV value `max(r, g, b) / 255`.
pub fn image_brightness(image: &RgbImage) -> Result<f64> {
    let n = image.width() as u64 * image.height() as u64;
    if n == 0 {
        return Err(Error::invalid("image has no pixels"));
    }
    let total: u64 = image
        .pixels()
        .map(|p| p.0.iter().copied().max().unwrap_or(0) as u64)
        .sum();
    Ok(total as f64 / (255.0 * n as f64))
}

/// Decodes a PNG or JPEG, compositing any alpha channel over white.
pub fn load_image(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let rgba = img.to_rgba8();
    let mut out = RgbImage::new(rgba.width(), rgba.height());
    for (dst, src) in out.pixels_mut().zip(rgba.pixels()) {
        let a = src.0[3] as u32;
        for c in 0..3 {
            // over white: c * a + 255 * (255 - a), rounded
            dst.0[c] = ((src.0[c] as u32 * a + 255 * (255 - a) + 127) / 255) as u8;
        }
    }
    Ok(out)
}
