//! The profile-image channel: a per-user class-probability vector taken from
//! an external file, predicted by a fallback forest over simple image
//! statistics, or fixed at uniform.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::corpus::UserRecord;
use crate::error::{Error, Result};
use crate::learners::{Model, ProbabilityVector};
use crate::profilefeat::{image_brightness, load_image};

/// Resolves a user's profile image.
pub trait ImageProvider: Sync {
    /// `Ok(None)` when the user has no image.
    fn image(&self, user: &UserRecord) -> Result<Option<RgbImage>>;
}

/// Reads `image_path` from disk, relative paths resolved against `base`.
#[derive(Debug, Clone)]
pub struct FsImages {
    pub base: PathBuf,
}

impl FsImages {
    pub fn new(base: impl Into<PathBuf>) -> Self {
        FsImages { base: base.into() }
    }
}

impl ImageProvider for FsImages {
    fn image(&self, user: &UserRecord) -> Result<Option<RgbImage>> {
        match &user.image_path {
            None => Ok(None),
            Some(p) => {
                let path = Path::new(p);
                let full = if path.is_absolute() {
                    path.to_path_buf()
                } else {
                    self.base.join(path)
                };
                load_image(&full).map(Some)
            }
        }
    }
}

/// Images held in memory, keyed by user id.
#[derive(Debug, Clone, Default)]
pub struct MemoryImages(pub HashMap<String, RgbImage>);

impl ImageProvider for MemoryImages {
    fn image(&self, user: &UserRecord) -> Result<Option<RgbImage>> {
        Ok(self.0.get(&user.user_id).cloned())
    }
}

/// No user has an image.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoImages;

impl ImageProvider for NoImages {
    fn image(&self, _user: &UserRecord) -> Result<Option<RgbImage>> {
        Ok(None)
    }
}

pub const IMAGE_STAT_DIM: usize = 7;

/// Mean HSV value, then mean and standard deviation of R, G and B, all on a
/// [0, 1] scale.
pub fn image_stat_vector(image: &RgbImage) -> Result<[f64; IMAGE_STAT_DIM]> {
    let brightness = image_brightness(image)?;
    let n = (image.width() as u64 * image.height() as u64) as f64;
    let mut sum = [0.0f64; 3];
    let mut sq = [0.0f64; 3];
    for p in image.pixels() {
        for c in 0..3 {
            let v = p.0[c] as f64 / 255.0;
            sum[c] += v;
            sq[c] += v * v;
        }
    }
    let mut out = [0.0; IMAGE_STAT_DIM];
    out[0] = brightness;
    for c in 0..3 {
        let mean = sum[c] / n;
        let var = (sq[c] / n - mean * mean).max(0.0);
        out[1 + 2 * c] = mean;
        out[2 + 2 * c] = var.sqrt();
    }
    Ok(out)
}

/// Parses `user_id p_male p_female [p_brand]` lines. Rows summing within
/// [0.99, 1.01] are renormalized; other sums are rejected.
pub fn parse_external_probs(text: &str, source_name: &str) -> Result<BTreeMap<String, ProbabilityVector>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let id = fields.next().expect("non-empty line has a field").to_string();
        let probs: Vec<f64> = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::record(source_name, line_no, format!("bad probability: {e}")))?;
        if probs.len() != 2 && probs.len() != 3 {
            return Err(Error::record(
                source_name,
                line_no,
                format!("expected 2 or 3 probabilities, got {}", probs.len()),
            ));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::record(
                source_name,
                line_no,
                "probabilities must be finite and non-negative",
            ));
        }
        let sum: f64 = probs.iter().sum();
        if !(0.99..=1.01).contains(&sum) {
            return Err(Error::record(
                source_name,
                line_no,
                format!("probabilities sum to {sum}"),
            ));
        }
        if out.insert(id.clone(), ProbabilityVector::normalized(&probs)).is_some() {
            return Err(Error::record(source_name, line_no, format!("duplicate user `{id}`")));
        }
    }
    Ok(out)
}

pub fn load_external_probs(path: &Path) -> Result<BTreeMap<String, ProbabilityVector>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_external_probs(&text, &path.display().to_string())
}

/// Fits a probability vector to `n_classes`: extra trailing classes are
/// dropped and the rest renormalized.
pub fn project(p: &ProbabilityVector, n_classes: usize) -> Result<ProbabilityVector> {
    match p.len().cmp(&n_classes) {
        std::cmp::Ordering::Equal => Ok(p.clone()),
        std::cmp::Ordering::Greater => Ok(ProbabilityVector::normalized(&p.as_slice()[..n_classes])),
        std::cmp::Ordering::Less => Err(Error::DimensionMismatch {
            expected: n_classes,
            found: p.len(),
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageMode {
    External,
    #[default]
    Fallback,
    Uniform,
}

impl std::str::FromStr for ImageMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "external" => Ok(ImageMode::External),
            "fallback" => Ok(ImageMode::Fallback),
            "uniform" => Ok(ImageMode::Uniform),
            other => Err(Error::invalid(format!(
                "unknown image mode `{other}` (expected external|fallback|uniform)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ImageProbSource {
    External {
        probs: BTreeMap<String, ProbabilityVector>,
    },
    Fallback {
        model: Model,
        /// Stats used for users without an image; `None` makes that an error.
        imputed: Option<[f64; IMAGE_STAT_DIM]>,
    },
    Uniform,
}

/// A channel output plus whether it had to fall back (user absent from the
/// external map, or image statistics imputed).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelOutput {
    pub probs: ProbabilityVector,
    pub flagged: bool,
}

impl ImageProbSource {
    pub fn mode(&self) -> ImageMode {
        match self {
            ImageProbSource::External { .. } => ImageMode::External,
            ImageProbSource::Fallback { .. } => ImageMode::Fallback,
            ImageProbSource::Uniform => ImageMode::Uniform,
        }
    }

    /// Output for a user whose image statistics (if any) are already known.
    pub fn probs_for(
        &self,
        user_id: &str,
        stats: Option<&[f64; IMAGE_STAT_DIM]>,
        n_classes: usize,
    ) -> Result<ChannelOutput> {
        match self {
            ImageProbSource::Uniform => Ok(ChannelOutput {
                probs: ProbabilityVector::uniform(n_classes),
                flagged: false,
            }),
            ImageProbSource::External { probs } => Ok(match probs.get(user_id) {
                Some(p) => ChannelOutput {
                    probs: project(p, n_classes)?,
                    flagged: false,
                },
                None => ChannelOutput {
                    probs: ProbabilityVector::uniform(n_classes),
                    flagged: true,
                },
            }),
            ImageProbSource::Fallback { model, imputed } => {
                let (x, flagged) = match (stats, imputed) {
                    (Some(s), _) => (*s, false),
                    (None, Some(imp)) => (*imp, true),
                    (None, None) => {
                        return Err(Error::invalid(format!(
                            "user `{user_id}` has no usable image and no imputation is configured"
                        )))
                    }
                };
                Ok(ChannelOutput {
                    probs: model.predict_proba(&x)?,
                    flagged,
                })
            }
        }
    }
}

/// Image-channel probabilities for one user.
pub fn channel_probs(
    user: &UserRecord,
    source: &ImageProbSource,
    images: &dyn ImageProvider,
    n_classes: usize,
) -> Result<ChannelOutput> {
    let stats = match source {
        ImageProbSource::Fallback { imputed, .. } => match images.image(user) {
            Ok(Some(img)) => Some(image_stat_vector(&img)?),
            Ok(None) => None,
            Err(e) if imputed.is_none() => return Err(e),
            Err(_) => None,
        },
        _ => None,
    };
    source.probs_for(&user.user_id, stats.as_ref(), n_classes)
}
