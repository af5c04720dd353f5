//! Feature assembly, the three classifier channels and the stacked final
//! classifier.
//!
//! Training runs in two layers. Each channel (basic features, k-top words,
//! profile image) is fit on the training rows, and its class-probability
//! vectors for those same rows are concatenated into the input of a final
//! classifier. By default the stacking inputs are out-of-fold predictions so
//! the final classifier never sees a channel's resubstitution output.

mod resources;
mod synthetic;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use resources::*;
pub use synthetic::*;

use crate::corpus::{stratified_fold_indices, ClassMode, Role, UserCorpus, UserRecord};
use crate::error::{Error, Result};
use crate::imagechannel::{
    image_stat_vector, project, ChannelOutput, ImageMode, ImageProbSource, ImageProvider, NoImages, IMAGE_STAT_DIM,
};
use crate::learners::{ClassifierSpec, ForestParams, Matrix, Model, ProbabilityVector};
use crate::namefeat::{display_name_score, screen_name_score};
use crate::profilefeat::{description_first_person_score, description_term_count, tff_score};
use crate::tweetfeat::{
    build_ktop_vocabulary, ktop_scores_tokenized, tweet_scores_tokenized, KTopVocabulary, TweetTokens, TweetWindow,
};

pub const BF_DIM: usize = 9;

pub const BF_NAMES: [&str; BF_DIM] = [
    "score_d_name",
    "score_s_name",
    "score_fp_desc",
    "score_tf_desc",
    "score_tff",
    "score_b_image",
    "score_fp_tweet",
    "score_i_tweet",
    "score_e_tweet",
];

pub const BRIGHTNESS: usize = 5;

/// The nine basic features in `BF_NAMES` order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BfVector(pub [f64; BF_DIM]);

/// Feature groups that can be removed in an ablation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureGroup {
    BF1,
    BF2,
    BF3,
    BF4,
    BF5,
    AF1,
    IMG,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 7] = [
        FeatureGroup::BF1,
        FeatureGroup::BF2,
        FeatureGroup::BF3,
        FeatureGroup::BF4,
        FeatureGroup::BF5,
        FeatureGroup::AF1,
        FeatureGroup::IMG,
    ];

    /// Columns of the BF vector owned by this group.
    pub fn bf_columns(self) -> &'static [usize] {
        match self {
            FeatureGroup::BF1 => &[0, 1],
            FeatureGroup::BF2 => &[2, 3],
            FeatureGroup::BF3 => &[4],
            FeatureGroup::BF4 => &[BRIGHTNESS],
            FeatureGroup::BF5 => &[6, 7, 8],
            FeatureGroup::AF1 | FeatureGroup::IMG => &[],
        }
    }

    pub fn topic(self) -> &'static str {
        match self {
            FeatureGroup::BF1 => "name",
            FeatureGroup::BF2 => "description",
            FeatureGroup::BF3 => "relationship",
            FeatureGroup::BF4 | FeatureGroup::IMG => "profile image",
            FeatureGroup::BF5 | FeatureGroup::AF1 => "tweet",
        }
    }

    /// e.g. `BF1 (name)`.
    pub fn label(self) -> String {
        format!("{self} ({})", self.topic())
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for FeatureGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureGroup::ALL
            .into_iter()
            .find(|g| g.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown feature group `{s}` (expected BF1..BF5, AF1 or IMG)")))
    }
}

/// How the final classifier's training inputs are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stacking {
    #[default]
    OutOfFold,
    Resubstitution,
}

impl FromStr for Stacking {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oof" => Ok(Stacking::OutOfFold),
            "resub" => Ok(Stacking::Resubstitution),
            other => Err(Error::invalid(format!(
                "unknown stacking `{other}` (expected oof|resub)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Bf,
    Af,
    /// BF and AF features in one channel (bi mode).
    Merged,
    Image,
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelKind::Bf => "BF",
            ChannelKind::Af => "AF",
            ChannelKind::Merged => "BF+AF",
            ChannelKind::Image => "IMG",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    /// One classifier type for every channel and the final stacker.
    pub classifier: ClassifierSpec,
    pub k: usize,
    pub window: TweetWindow,
    pub image_mode: ImageMode,
    pub mode: ClassMode,
    pub seed: u64,
    pub stacking: Stacking,
    pub inner_folds: usize,
    pub drop: BTreeSet<FeatureGroup>,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig {
            classifier: ClassifierSpec::default(),
            k: 20,
            window: TweetWindow::All,
            image_mode: ImageMode::Fallback,
            mode: ClassMode::Tri,
            seed: 0,
            stacking: Stacking::OutOfFold,
            inner_folds: 5,
            drop: BTreeSet::new(),
        }
    }
}

impl HybridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be >= 1"));
        }
        if self.stacking == Stacking::OutOfFold && self.inner_folds < 2 {
            return Err(Error::invalid(format!(
                "inner_folds must be >= 2, got {}",
                self.inner_folds
            )));
        }
        if self.channel_kinds().is_empty() {
            return Err(Error::invalid("the drop set removes every channel"));
        }
        Ok(())
    }

    /// BF columns that survive the drop set, ascending.
    pub fn bf_columns(&self) -> Vec<usize> {
        let dropped: BTreeSet<usize> = self.drop.iter().flat_map(|g| g.bf_columns().iter().copied()).collect();
        (0..BF_DIM).filter(|c| !dropped.contains(c)).collect()
    }

    pub fn uses_af(&self) -> bool {
        !self.drop.contains(&FeatureGroup::AF1)
    }

    /// Channels in stacking order.
    pub fn channel_kinds(&self) -> Vec<ChannelKind> {
        let has_bf = !self.bf_columns().is_empty();
        let mut kinds = Vec::new();
        match self.mode {
            ClassMode::Tri => {
                if has_bf {
                    kinds.push(ChannelKind::Bf);
                }
                if self.uses_af() {
                    kinds.push(ChannelKind::Af);
                }
            }
            ClassMode::Bi => {
                if has_bf || self.uses_af() {
                    kinds.push(ChannelKind::Merged);
                }
            }
        }
        if !self.drop.contains(&FeatureGroup::IMG) {
            kinds.push(ChannelKind::Image);
        }
        kinds
    }

    /// Final classifier input width.
    pub fn final_width(&self) -> usize {
        self.channel_kinds().len() * self.mode.n_classes()
    }
}

/// Where image data comes from when featurizing.
#[derive(Clone, Copy)]
pub struct ImageInputs<'a> {
    pub provider: &'a dyn ImageProvider,
    /// External probability vectors; an entry here overrides a record's own
    /// `image_probs`.
    pub external: Option<&'a BTreeMap<String, ProbabilityVector>>,
}

impl Default for ImageInputs<'_> {
    fn default() -> Self {
        ImageInputs {
            provider: &NoImages,
            external: None,
        }
    }
}

impl fmt::Debug for ImageInputs<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImageInputs")
            .field("external", &self.external.map(BTreeMap::len))
            .finish()
    }
}

/// Everything about a user that does not depend on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct UserFeatures {
    pub user_id: String,
    /// BF scores; the brightness slot is only meaningful when
    /// `image_stats` is present.
    bf: [f64; BF_DIM],
    pub image_stats: Option<[f64; IMAGE_STAT_DIM]>,
    pub external: Option<ProbabilityVector>,
    pub tokens: TweetTokens,
}

impl UserFeatures {
    pub fn compute(
        user: &UserRecord,
        resources: &Resources,
        window: TweetWindow,
        images: &ImageInputs,
    ) -> Result<Self> {
        let tokens = TweetTokens::from_tweets(&user.tweets);
        let tweets = tweet_scores_tokenized(
            &tokens,
            &resources.first_person,
            &resources.interjection,
            &resources.emotion,
            window,
        )
        .map_err(|e| Error::invalid(format!("user `{}`: {e}", user.user_id)))?;
        let image_stats = match images.provider.image(user)? {
            Some(img) => Some(image_stat_vector(&img)?),
            None => None,
        };
        let external = images
            .external
            .and_then(|m| m.get(&user.user_id).cloned())
            .or_else(|| user.image_probs.map(|p| ProbabilityVector::normalized(&p)));
        Ok(UserFeatures {
            user_id: user.user_id.clone(),
            bf: [
                display_name_score(&user.display_name, &resources.names),
                screen_name_score(&user.screen_name, &resources.names, &resources.lexicon),
                description_first_person_score(&user.description, &resources.first_person, &resources.brand),
                description_term_count(&user.description) as f64,
                tff_score(user.followers, user.friends),
                image_stats.map_or(0.0, |s| s[0]),
                tweets.fp_tweet,
                tweets.i_tweet,
                tweets.e_tweet,
            ],
            image_stats,
            external,
            tokens,
        })
    }

    /// The BF vector, with `imputed_brightness` standing in for a missing
    /// image. The flag is set when imputation happened.
    pub fn bf(&self, imputed_brightness: f64) -> (BfVector, bool) {
        let mut v = self.bf;
        let missing = self.image_stats.is_none();
        if missing {
            v[BRIGHTNESS] = imputed_brightness;
        }
        (BfVector(v), missing)
    }
}

/// Features for every user, in corpus order.
pub fn featurize_corpus(
    corpus: &UserCorpus,
    resources: &Resources,
    window: TweetWindow,
    images: &ImageInputs,
) -> Result<Vec<UserFeatures>> {
    corpus
        .users
        .par_iter()
        .map(|u| UserFeatures::compute(u, resources, window, images))
        .collect()
}

/// The nine BF scores for one user, plus whether brightness was imputed.
pub fn assemble_bf(
    user: &UserRecord,
    resources: &Resources,
    window: TweetWindow,
    images: &ImageInputs,
    imputed_brightness: f64,
) -> Result<(BfVector, bool)> {
    Ok(UserFeatures::compute(user, resources, window, images)?.bf(imputed_brightness))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// An independent seed for a numbered sub-task.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix(seed ^ splitmix(stream))
}

/// Held-out probability vectors for every row of `x`.
///
/// Rows are split into `inner_folds` stratified folds; each fold is
/// predicted by a model trained on the others. `inner_folds == n` is plain
/// leave-one-out.
pub fn out_of_fold_probs(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    spec: &ClassifierSpec,
    inner_folds: usize,
    seed: u64,
) -> Result<Vec<ProbabilityVector>> {
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            found: y.len(),
        });
    }
    if inner_folds < 2 {
        return Err(Error::invalid(format!("inner_folds must be >= 2, got {inner_folds}")));
    }
    let folds = if inner_folds == y.len() {
        (0..y.len()).collect()
    } else {
        stratified_fold_indices(y, inner_folds, seed)?
    };
    let per_fold: Vec<Vec<(usize, ProbabilityVector)>> = (0..inner_folds)
        .into_par_iter()
        .map(|f| {
            let (held, train): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| folds[i] == f);
            if train.is_empty() {
                return Err(Error::invalid("an inner fold leaves no training rows"));
            }
            let y_train: Vec<usize> = train.iter().map(|&i| y[i]).collect();
            let model = spec.fit(&x.select_rows(&train), &y_train, n_classes, derive_seed(seed, f as u64))?;
            held.into_iter()
                .map(|i| Ok((i, model.predict_proba(x.row(i))?)))
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut out: Vec<Option<ProbabilityVector>> = vec![None; y.len()];
    for (i, p) in per_fold.into_iter().flatten() {
        out[i] = Some(p);
    }
    Ok(out
        .into_iter()
        .map(|p| p.expect("every row is in exactly one fold"))
        .collect())
}

/// Training-derived state needed to turn `UserFeatures` into channel inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Featurizer {
    pub bf_columns: Vec<usize>,
    pub vocab: Option<KTopVocabulary>,
    pub imputed_brightness: f64,
    pub imputed_image_stats: [f64; IMAGE_STAT_DIM],
}

impl Featurizer {
    fn inputs(&self, kind: ChannelKind, f: &UserFeatures) -> Result<Vec<f64>> {
        let bf = || {
            let (v, _) = f.bf(self.imputed_brightness);
            self.bf_columns.iter().map(|&c| v.0[c]).collect::<Vec<f64>>()
        };
        let af = || -> Result<Vec<f64>> {
            match &self.vocab {
                Some(vocab) => Ok(ktop_scores_tokenized(&f.tokens, vocab)
                    .map_err(|e| Error::invalid(format!("user `{}`: {e}", f.user_id)))?
                    .values),
                None => Ok(Vec::new()),
            }
        };
        Ok(match kind {
            ChannelKind::Bf => bf(),
            ChannelKind::Af => af()?,
            ChannelKind::Merged => {
                let mut v = bf();
                v.extend(af()?);
                v
            }
            ChannelKind::Image => f.image_stats.unwrap_or(self.imputed_image_stats).to_vec(),
        })
    }

    fn matrix(&self, kind: ChannelKind, feats: &[UserFeatures], rows: &[usize]) -> Result<Matrix> {
        let data: Vec<Vec<f64>> = rows
            .iter()
            .map(|&r| self.inputs(kind, &feats[r]))
            .collect::<Result<_>>()?;
        Matrix::from_rows(&data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelModel {
    Classifier(Model),
    Image(ImageProbSource),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedChannel {
    pub kind: ChannelKind,
    pub model: ChannelModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridModel {
    pub config: HybridConfig,
    /// Fingerprints of the resources used for training.
    pub fingerprints: BTreeMap<String, String>,
    pub featurizer: Featurizer,
    pub channels: Vec<TrainedChannel>,
    pub final_model: Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPrediction {
    pub kind: ChannelKind,
    pub probs: ProbabilityVector,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolePrediction {
    pub user_id: String,
    pub role: Role,
    pub probs: ProbabilityVector,
    pub channels: Vec<ChannelPrediction>,
    /// Brightness or image statistics were imputed, or an external image
    /// vector was missing.
    pub flagged: bool,
}

fn image_channel_output(source: &ImageProbSource, f: &UserFeatures, n_classes: usize) -> Result<ChannelOutput> {
    match (source, &f.external) {
        (ImageProbSource::External { .. }, Some(p)) => Ok(ChannelOutput {
            probs: project(p, n_classes)?,
            flagged: false,
        }),
        _ => source.probs_for(&f.user_id, f.image_stats.as_ref(), n_classes),
    }
}

fn check_labels(feats: &[UserFeatures], labels: &[usize], rows: &[usize], mode: ClassMode) -> Result<Vec<usize>> {
    let n = mode.n_classes();
    let mut counts = vec![0usize; n];
    let mut y = Vec::with_capacity(rows.len());
    for &r in rows {
        let c = labels[r];
        if c >= n {
            let role = Role::from_index(c).map_or_else(|| c.to_string(), |r| r.to_string());
            return Err(Error::invalid(format!(
                "user `{}` is labeled {role}, which {mode:?} mode does not allow",
                feats[r].user_id
            )));
        }
        counts[c] += 1;
        y.push(c);
    }
    if let Some(c) = counts.iter().position(|&k| k == 0) {
        return Err(Error::invalid(format!(
            "role {} is absent from the training data",
            mode.roles()[c]
        )));
    }
    Ok(y)
}

fn mean_stats(feats: &[UserFeatures], rows: &[usize]) -> [f64; IMAGE_STAT_DIM] {
    let mut sum = [0.0; IMAGE_STAT_DIM];
    let mut n = 0usize;
    for s in rows.iter().filter_map(|&r| feats[r].image_stats.as_ref()) {
        for (a, b) in sum.iter_mut().zip(s) {
            *a += b;
        }
        n += 1;
    }
    if n > 0 {
        sum.iter_mut().for_each(|a| *a /= n as f64);
    }
    sum
}

/// Trains a hybrid model on `rows` of precomputed features.
///
/// Only the listed rows are read, so data for other users cannot influence
/// the result.
pub fn train_hybrid_rows(
    feats: &[UserFeatures],
    labels: &[usize],
    rows: &[usize],
    resources: &Resources,
    config: &HybridConfig,
) -> Result<HybridModel> {
    config.validate()?;
    if feats.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: feats.len(),
            found: labels.len(),
        });
    }
    let n_classes = config.mode.n_classes();
    let y = check_labels(feats, labels, rows, config.mode)?;
    let roles = config.mode.roles();

    let vocab = if config.uses_af() {
        let pairs = rows.iter().map(|&r| (roles[labels[r]], &feats[r].tokens));
        Some(build_ktop_vocabulary(pairs, roles, config.k, &resources.stoplist)?)
    } else {
        None
    };
    let imputed_image_stats = mean_stats(feats, rows);
    let featurizer = Featurizer {
        bf_columns: config.bf_columns(),
        vocab,
        imputed_brightness: imputed_image_stats[0],
        imputed_image_stats,
    };

    let stack_inputs =
        |x: &Matrix, spec: &ClassifierSpec, model: &Model, seed: u64| -> Result<Vec<ProbabilityVector>> {
            match config.stacking {
                Stacking::OutOfFold => out_of_fold_probs(x, &y, n_classes, spec, config.inner_folds, seed),
                Stacking::Resubstitution => x.rows().map(|r| model.predict_proba(r)).collect(),
            }
        };

    let mut channels = Vec::new();
    let mut stacked: Vec<Vec<ProbabilityVector>> = Vec::new();
    for (c, kind) in config.channel_kinds().into_iter().enumerate() {
        let seed = derive_seed(config.seed, c as u64);
        let x = featurizer.matrix(kind, feats, rows)?;
        let (model, probs) = match (kind, config.image_mode) {
            (ChannelKind::Image, ImageMode::Uniform) => (
                ChannelModel::Image(ImageProbSource::Uniform),
                vec![ProbabilityVector::uniform(n_classes); rows.len()],
            ),
            (ChannelKind::Image, ImageMode::External) => {
                let source = ImageProbSource::External { probs: BTreeMap::new() };
                let probs = rows
                    .iter()
                    .map(|&r| image_channel_output(&source, &feats[r], n_classes).map(|o| o.probs))
                    .collect::<Result<_>>()?;
                (ChannelModel::Image(source), probs)
            }
            (ChannelKind::Image, ImageMode::Fallback) => {
                let spec = ClassifierSpec::Forest(ForestParams::default());
                let model = spec.fit(&x, &y, n_classes, seed)?;
                let probs = stack_inputs(&x, &spec, &model, derive_seed(seed, 1))?;
                let source = ImageProbSource::Fallback {
                    model,
                    imputed: Some(imputed_image_stats),
                };
                (ChannelModel::Image(source), probs)
            }
            _ => {
                let model = config.classifier.fit(&x, &y, n_classes, seed)?;
                let probs = stack_inputs(&x, &config.classifier, &model, derive_seed(seed, 1))?;
                (ChannelModel::Classifier(model), probs)
            }
        };
        channels.push(TrainedChannel { kind, model });
        stacked.push(probs);
    }

    let z: Vec<Vec<f64>> = (0..rows.len())
        .map(|i| stacked.iter().flat_map(|ch| ch[i].as_slice().iter().copied()).collect())
        .collect();
    let z = Matrix::from_rows(&z)?;
    debug_assert_eq!(z.n_cols(), config.final_width());
    let final_model = config
        .classifier
        .fit(&z, &y, n_classes, derive_seed(config.seed, 1000))?;

    Ok(HybridModel {
        config: config.clone(),
        fingerprints: resources.fingerprints(),
        featurizer,
        channels,
        final_model,
    })
}

/// Featurizes and trains on a whole labeled corpus.
pub fn train_hybrid(
    corpus: &UserCorpus,
    resources: &Resources,
    images: &ImageInputs,
    config: &HybridConfig,
) -> Result<HybridModel> {
    let labels = corpus.labels()?;
    let feats = featurize_corpus(corpus, resources, config.window, images)?;
    let rows: Vec<usize> = (0..feats.len()).collect();
    train_hybrid_rows(&feats, &labels, &rows, resources, config)
}

/// The two-class variant: BF and AF merged into one channel, plus the image
/// channel. Any brand-labeled user is an error.
pub fn train_binary_variant(
    corpus: &UserCorpus,
    resources: &Resources,
    images: &ImageInputs,
    config: &HybridConfig,
) -> Result<HybridModel> {
    if let Some(u) = corpus.users.iter().find(|u| u.label == Some(Role::Brand)) {
        return Err(Error::invalid(format!(
            "user `{}` is labeled brand; the bi variant accepts male and female only",
            u.user_id
        )));
    }
    let config = HybridConfig {
        mode: ClassMode::Bi,
        ..config.clone()
    };
    train_hybrid(corpus, resources, images, &config)
}

impl HybridModel {
    pub fn n_classes(&self) -> usize {
        self.config.mode.n_classes()
    }

    pub fn roles(&self) -> &'static [Role] {
        self.config.mode.roles()
    }

    pub fn final_width(&self) -> usize {
        self.final_model.n_features()
    }

    pub fn predict_features(&self, f: &UserFeatures) -> Result<RolePrediction> {
        let n = self.n_classes();
        let mut channels = Vec::with_capacity(self.channels.len());
        let mut flagged = false;
        for ch in &self.channels {
            let out = match &ch.model {
                ChannelModel::Classifier(m) => {
                    let x = self.featurizer.inputs(ch.kind, f)?;
                    ChannelOutput {
                        probs: m.predict_proba(&x)?,
                        flagged: false,
                    }
                }
                ChannelModel::Image(source) => image_channel_output(source, f, n)?,
            };
            let uses_brightness = matches!(ch.kind, ChannelKind::Bf | ChannelKind::Merged)
                && self.featurizer.bf_columns.contains(&BRIGHTNESS);
            flagged |= out.flagged || (uses_brightness && f.image_stats.is_none());
            channels.push(ChannelPrediction {
                kind: ch.kind,
                probs: out.probs,
                flagged: out.flagged,
            });
        }
        let z: Vec<f64> = channels
            .iter()
            .flat_map(|c| c.probs.as_slice().iter().copied())
            .collect();
        let probs = self.final_model.predict_proba(&z)?;
        Ok(RolePrediction {
            user_id: f.user_id.clone(),
            role: self.roles()[probs.argmax()],
            probs,
            channels,
            flagged,
        })
    }

    pub fn predict_role(
        &self,
        user: &UserRecord,
        resources: &Resources,
        images: &ImageInputs,
    ) -> Result<RolePrediction> {
        let f = UserFeatures::compute(user, resources, self.config.window, images)?;
        self.predict_features(&f)
    }

    /// Predictions for a whole corpus, in corpus order.
    pub fn predict_corpus(
        &self,
        corpus: &UserCorpus,
        resources: &Resources,
        images: &ImageInputs,
    ) -> Result<Vec<RolePrediction>> {
        corpus
            .users
            .par_iter()
            .map(|u| self.predict_role(u, resources, images))
            .collect()
    }
}

pub fn predict_role(
    model: &HybridModel,
    user: &UserRecord,
    resources: &Resources,
    images: &ImageInputs,
) -> Result<RolePrediction> {
    model.predict_role(user, resources, images)
}

pub const HYBRID_FORMAT: &str = "rolecast.hybrid";
pub const HYBRID_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    model: T,
}

pub fn hybrid_to_json(model: &HybridModel) -> String {
    let env = Envelope {
        format: HYBRID_FORMAT.to_string(),
        version: HYBRID_VERSION,
        model,
    };
    serde_json::to_string_pretty(&env).expect("hybrid models always serialize") + "\n"
}

/// Parses a saved model and checks it against `resources`.
pub fn hybrid_from_json(text: &str, resources: &Resources) -> Result<HybridModel> {
    let env: Envelope<HybridModel> = serde_json::from_str(text)?;
    if env.format != HYBRID_FORMAT {
        return Err(Error::Format(format!(
            "expected `{HYBRID_FORMAT}`, found `{}`",
            env.format
        )));
    }
    if env.version != HYBRID_VERSION {
        return Err(Error::Format(format!("unsupported model version {}", env.version)));
    }
    resources.verify(&env.model.fingerprints)?;
    Ok(env.model)
}
