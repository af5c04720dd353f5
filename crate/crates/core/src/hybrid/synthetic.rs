//! Labeled synthetic corpora with tunable role signal, plus the matching
//! resources and in-memory profile images.
//!
//! For every user and feature group the generator draws an "effective role":
//! the user's own role with probability `separability * strength`, otherwise
//! a role chosen uniformly at random. Each group's content is then drawn from
//! the effective role's distribution, so at separability 0 no feature carries
//! any label information.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use image::{Rgb, RgbImage};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Resources;
use crate::corpus::{ClassMode, Gender, NameDictionary, Role, UserCorpus, UserRecord, WordKind, WordList};
use crate::error::{Error, Result};
use crate::imagechannel::MemoryImages;
use crate::namefeat::Lexicon;

const MALE_NAMES: &[&str] = &[
    "james", "john", "robert", "michael", "william", "david", "richard", "joseph", "thomas", "charles", "daniel",
    "matthew",
];
const FEMALE_NAMES: &[&str] = &[
    "mary",
    "patricia",
    "jennifer",
    "linda",
    "elizabeth",
    "barbara",
    "susan",
    "jessica",
    "sarah",
    "karen",
    "nancy",
    "lisa",
];
const SURNAMES: &[&str] = &[
    "smith", "parker", "brown", "jones", "miller", "davis", "garcia", "wilson", "taylor", "clark", "walker", "young",
];
const BRAND_STEMS: &[&str] = &[
    "acme",
    "zentro",
    "bluepeak",
    "nordvik",
    "kroma",
    "vantix",
    "orbly",
    "tessel",
    "quanta",
    "lumio",
    "fizzco",
    "brightway",
];
const BRAND_NOUNS: &[&str] = &[
    "store", "shop", "labs", "foods", "coffee", "studio", "apparel", "tech", "motors", "bank",
];
const HOBBIES: &[&str] = &[
    "music",
    "running",
    "travel",
    "books",
    "movies",
    "cooking",
    "photography",
    "hiking",
    "gaming",
    "yoga",
    "art",
    "gardening",
];
const PRODUCTS: &[&str] = &[
    "shoes", "snacks", "phones", "bikes", "jackets", "tea", "software", "cars", "loans", "lamps",
];
const FILLER: &[&str] = &[
    "today", "night", "morning", "week", "weekend", "time", "people", "city", "friends", "family", "home", "work",
    "game", "news", "world", "life", "day", "year", "thing", "place", "road", "water", "food", "lunch", "dinner",
    "movie", "song", "book", "phone", "photo", "video", "school", "party", "summer", "winter", "rain", "sun", "street",
    "park", "train",
];
const MALE_TOPICS: &[&str] = &[
    "football",
    "beer",
    "gaming",
    "#nfl",
    "grilling",
    "fishing",
    "trucks",
    "poker",
    "garage",
    "barbecue",
    "golf",
    "wrestling",
];
const FEMALE_TOPICS: &[&str] = &[
    "makeup", "fashion", "#beauty", "nails", "shopping", "brunch", "skincare", "pilates", "dresses", "wedding",
    "baking", "candles",
];
const BRAND_TOPICS: &[&str] = &[
    "sale",
    "discount",
    "#deals",
    "order",
    "shipping",
    "customers",
    "promo",
    "offer",
    "launch",
    "coupon",
    "giveaway",
    "checkout",
];
const FIRST_PERSON: &[&str] = &["i", "me", "my", "mine", "myself", "i'm", "i've", "i'll", "i'd", "im"];
const BRAND_WORDS: &[&str] = &[
    "official", "company", "account", "inc", "ltd", "llc", "brand", "support", "service",
];
const INTERJECTIONS: &[&str] = &[
    "wow", "omg", "lol", "ugh", "yay", "oops", "haha", "hey", "whoa", "yikes", "ooh",
];
const EMOTIONS: &[&str] = &[
    "happy", "sad", "angry", "love", "hate", "excited", "scared", "tired", "lonely", "proud", "upset", "grateful",
];
const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are", "as", "at", "be",
    "because", "been", "before", "being", "below", "between", "both", "but", "by", "can", "could", "did", "do", "does",
    "doing", "down", "during", "each", "few", "for", "from", "further", "had", "has", "have", "having", "he", "her",
    "here", "hers", "herself", "him", "himself", "his", "how", "if", "in", "into", "is", "it", "its", "itself", "just",
    "more", "most", "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours", "out",
    "over", "own", "same", "she", "should", "so", "some", "such", "than", "that", "the", "their", "them", "then",
    "there", "these", "they", "this", "those", "through", "to", "too", "under", "until", "up", "very", "was", "we",
    "were", "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with", "would", "you", "your",
    "yours",
];

/// Relative signal strength of each feature group, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStrengths {
    pub name: f64,
    pub description: f64,
    pub relationship: f64,
    /// Drives both brightness and the image channel.
    pub image: f64,
    pub tweet: f64,
    pub ktop: f64,
}

impl GroupStrengths {
    pub const FULL: GroupStrengths = GroupStrengths {
        name: 1.0,
        description: 1.0,
        relationship: 1.0,
        image: 1.0,
        tweet: 1.0,
        ktop: 1.0,
    };

    pub const NONE: GroupStrengths = GroupStrengths {
        name: 0.0,
        description: 0.0,
        relationship: 0.0,
        image: 0.0,
        tweet: 0.0,
        ktop: 0.0,
    };

    fn all(&self) -> [f64; 6] {
        [
            self.name,
            self.description,
            self.relationship,
            self.image,
            self.tweet,
            self.ktop,
        ]
    }
}

impl Default for GroupStrengths {
    fn default() -> Self {
        GroupStrengths::FULL
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Global signal dial in [0, 1].
    pub separability: f64,
    pub strengths: GroupStrengths,
    pub mode: ClassMode,
    /// Fraction of users without a profile image.
    pub missing_image_rate: f64,
    /// Inclusive range of tweets per user.
    pub tweets_per_user: (usize, usize),
    pub image_size: u32,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            separability: 1.0,
            strengths: GroupStrengths::FULL,
            mode: ClassMode::Tri,
            missing_image_rate: 0.0,
            tweets_per_user: (20, 30),
            image_size: 8,
        }
    }
}

impl SyntheticSpec {
    pub fn with_separability(separability: f64) -> Self {
        SyntheticSpec {
            separability,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("separability", self.separability)?;
        unit("missing_image_rate", self.missing_image_rate)?;
        for s in self.strengths.all() {
            unit("group strength", s)?;
        }
        let (lo, hi) = self.tweets_per_user;
        if lo == 0 || lo > hi {
            return Err(Error::invalid(format!("invalid tweets_per_user range ({lo}, {hi})")));
        }
        if self.image_size == 0 {
            return Err(Error::invalid("image_size must be positive"));
        }
        Ok(())
    }
}

/// A generated corpus together with the resources and images it was built
/// against.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: UserCorpus,
    pub resources: Resources,
    pub images: MemoryImages,
}

pub const DATASET_FILE: &str = "users.jsonl";
pub const RESOURCE_DIR: &str = "resources";

impl SyntheticCorpus {
    /// Writes `users.jsonl`, the images under `images/` and the resources
    /// under `resources/`. Image paths in the dataset are relative to `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let img_dir = dir.join("images");
        fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
        self.corpus.write(&dir.join(DATASET_FILE))?;
        for u in &self.corpus.users {
            if let (Some(rel), Some(img)) = (&u.image_path, self.images.0.get(&u.user_id)) {
                let path = dir.join(rel);
                img.save(&path).map_err(|e| Error::Image {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
            }
        }
        self.resources.write_dir(&dir.join(RESOURCE_DIR))
    }
}

/// Resources matching the generator's vocabulary.
pub fn synthetic_resources() -> Resources {
    let mut rows: Vec<(&str, Gender, u64)> = Vec::new();
    for (i, n) in MALE_NAMES.iter().enumerate() {
        rows.push((n, Gender::Male, 10_000 + 997 * i as u64));
        rows.push((n, Gender::Female, 10 + i as u64));
    }
    for (i, n) in FEMALE_NAMES.iter().enumerate() {
        rows.push((n, Gender::Female, 10_000 + 991 * i as u64));
        rows.push((n, Gender::Male, 12 + i as u64));
    }
    let mut lexicon_words: Vec<&str> = STOPWORDS.to_vec();
    lexicon_words.extend(filler().iter().map(String::as_str));
    for pool in [SURNAMES, BRAND_NOUNS, HOBBIES, PRODUCTS, BRAND_STEMS] {
        lexicon_words.extend_from_slice(pool);
    }
    let stoplist: BTreeSet<String> = STOPWORDS
        .iter()
        .chain(FIRST_PERSON)
        .chain(BRAND_WORDS)
        .chain(INTERJECTIONS)
        .chain(EMOTIONS)
        .map(|s| s.to_string())
        .collect();
    let list = |kind, words: &[&str]| WordList::new(kind, words.iter().copied()).expect("non-empty constant list");
    Resources {
        names: NameDictionary::from_rows(rows).expect("valid constant rows"),
        lexicon: Lexicon::from_ranked(lexicon_words),
        first_person: list(WordKind::FirstPerson, FIRST_PERSON),
        brand: list(WordKind::BrandWord, BRAND_WORDS),
        interjection: list(WordKind::Interjection, INTERJECTIONS),
        emotion: list(WordKind::Emotion, EMOTIONS),
        stoplist,
    }
}

/// The shared tweet vocabulary: common words plus generated two-syllable
/// pseudo-words, large enough that no single filler word is used by most
/// users.
fn filler() -> &'static [String] {
    static FILLER_POOL: OnceLock<Vec<String>> = OnceLock::new();
    FILLER_POOL.get_or_init(|| {
        let taken: BTreeSet<&str> = [
            MALE_NAMES,
            FEMALE_NAMES,
            SURNAMES,
            BRAND_STEMS,
            BRAND_NOUNS,
            HOBBIES,
            PRODUCTS,
            MALE_TOPICS,
            FEMALE_TOPICS,
            BRAND_TOPICS,
            FIRST_PERSON,
            BRAND_WORDS,
            INTERJECTIONS,
            EMOTIONS,
            STOPWORDS,
            FILLER,
        ]
        .concat()
        .into_iter()
        .collect();
        let syllables: Vec<String> = "bdfgklmnprstvz"
            .chars()
            .flat_map(|c| "aeiou".chars().map(move |v| format!("{c}{v}")))
            .collect();
        let mut words: Vec<String> = FILLER.iter().map(|w| w.to_string()).collect();
        for (i, a) in syllables.iter().enumerate() {
            for (j, b) in syllables.iter().enumerate() {
                let w = format!("{a}{b}");
                if (i * syllables.len() + j).is_multiple_of(19) && !taken.contains(w.as_str()) {
                    words.push(w);
                }
            }
        }
        words
    })
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map_or_else(String::new, |f| f.to_uppercase().chain(c).collect())
}

struct UserGen<'a> {
    rng: ChaCha8Rng,
    spec: &'a SyntheticSpec,
    roles: &'a [Role],
}

impl UserGen<'_> {
    fn effective(&mut self, own: Role, strength: f64) -> Role {
        if self.rng.random_bool(self.spec.separability * strength) {
            own
        } else {
            *self.roles.choose(&mut self.rng).expect("roles are non-empty")
        }
    }

    fn pick<'b, S: AsRef<str>>(&mut self, pool: &'b [S]) -> &'b str {
        pool.choose(&mut self.rng).expect("pools are non-empty").as_ref()
    }

    fn names(&mut self, role: Role) -> (String, String) {
        match role {
            Role::Male | Role::Female => {
                let pool = if role == Role::Male { MALE_NAMES } else { FEMALE_NAMES };
                let first = self.pick(pool);
                let last = self.pick(SURNAMES);
                let mut screen = format!("{first}{last}");
                if self.rng.random_bool(0.5) {
                    screen.push_str(&self.rng.random_range(1..100).to_string());
                }
                (format!("{} {}", capitalize(first), capitalize(last)), screen)
            }
            Role::Brand => {
                let stem = self.pick(BRAND_STEMS);
                let noun = self.pick(BRAND_NOUNS);
                (
                    format!("{} {}", capitalize(stem), capitalize(noun)),
                    format!("{stem}{noun}"),
                )
            }
        }
    }

    fn description(&mut self, role: Role) -> String {
        match role {
            Role::Male | Role::Female => {
                let (a, b) = (self.pick(HOBBIES), self.pick(HOBBIES));
                match self.rng.random_range(0..4) {
                    0 => format!("i love {a} and {b}"),
                    1 => format!("my days are all about {a}"),
                    2 => format!("{a} fan. i post about {b}"),
                    _ => format!("just me and my {a}"),
                }
            }
            Role::Brand => {
                let stem = self.pick(BRAND_STEMS);
                let noun = self.pick(BRAND_NOUNS);
                let (a, b) = (self.pick(PRODUCTS), self.pick(PRODUCTS));
                let year = self.rng.random_range(1950..2015);
                if self.rng.random_bool(0.5) {
                    format!(
                        "official account of {} {}. we sell {a} and {b} since {year} #{stem}",
                        capitalize(stem),
                        capitalize(noun)
                    )
                } else {
                    format!(
                        "the official {noun} page for {}. shop our {a} at www.{stem}.com",
                        capitalize(stem)
                    )
                }
            }
        }
    }

    fn counts(&mut self, role: Role) -> (u64, u64) {
        match role {
            Role::Male => (self.rng.random_range(50..400), self.rng.random_range(100..600)),
            Role::Female => (self.rng.random_range(200..1500), self.rng.random_range(150..700)),
            Role::Brand => (self.rng.random_range(5_000..80_000), self.rng.random_range(10..400)),
        }
    }

    fn tweets(&mut self, list_role: Role, topic_role: Role) -> Vec<String> {
        let (p_fp, p_i, p_e) = match list_role {
            Role::Male => (0.5, 0.35, 0.1),
            Role::Female => (0.55, 0.2, 0.4),
            Role::Brand => (0.05, 0.05, 0.05),
        };
        let topics = match topic_role {
            Role::Male => MALE_TOPICS,
            Role::Female => FEMALE_TOPICS,
            Role::Brand => BRAND_TOPICS,
        };
        let (lo, hi) = self.spec.tweets_per_user;
        let n = self.rng.random_range(lo..=hi);
        (0..n)
            .map(|_| {
                let len = self.rng.random_range(3..8);
                let mut words: Vec<String> = (0..len).map(|_| self.pick(filler()).to_string()).collect();
                for (p, pool) in [
                    (p_fp, FIRST_PERSON),
                    (p_i, INTERJECTIONS),
                    (p_e, EMOTIONS),
                    (0.6, topics),
                ] {
                    if self.rng.random_bool(p) {
                        let at = self.rng.random_range(0..=words.len());
                        words.insert(at, self.pick(pool).to_string());
                    }
                }
                if topic_role == Role::Brand && self.rng.random_bool(0.3) {
                    words.push(format!("http://t.co/{}", self.rng.random_range(1000..9999)));
                }
                if self.rng.random_bool(0.1) {
                    words.insert(0, format!("@{}", self.pick(SURNAMES)));
                }
                words.join(" ")
            })
            .collect()
    }

    fn image(&mut self, role: Role) -> RgbImage {
        let base: [i32; 3] = match role {
            Role::Male => [60, 95, 165],
            Role::Female => [205, 105, 140],
            Role::Brand => [240, 240, 236],
        };
        let jitter: Vec<i32> = (0..3).map(|_| self.rng.random_range(-30..=30)).collect();
        let size = self.spec.image_size;
        let mut img = RgbImage::new(size, size);
        for p in img.pixels_mut() {
            let mut px = [0u8; 3];
            for c in 0..3 {
                px[c] = (base[c] + jitter[c] + self.rng.random_range(-20..=20)).clamp(0, 255) as u8;
            }
            *p = Rgb(px);
        }
        img
    }
}

/// Generates `n_users` labeled users with roles dealt round-robin.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec, n_users: usize, seed: u64) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let roles = spec.mode.roles();
    if n_users < roles.len() {
        return Err(Error::invalid(format!(
            "need at least {} users, got {n_users}",
            roles.len()
        )));
    }
    let width = n_users.to_string().len().max(4);
    let s = &spec.strengths;
    let mut users = Vec::with_capacity(n_users);
    let mut images = HashMap::new();
    for i in 0..n_users {
        let role = roles[i % roles.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut g = UserGen { rng, spec, roles };
        let name_role = g.effective(role, s.name);
        let desc_role = g.effective(role, s.description);
        let rel_role = g.effective(role, s.relationship);
        let image_role = g.effective(role, s.image);
        let tweet_role = g.effective(role, s.tweet);
        let ktop_role = g.effective(role, s.ktop);

        let user_id = format!("u{i:0width$}");
        let (display_name, screen_name) = g.names(name_role);
        let description = g.description(desc_role);
        let (followers, friends) = g.counts(rel_role);
        let tweets = g.tweets(tweet_role, ktop_role);
        let image = g.image(image_role);
        let has_image = !g.rng.random_bool(spec.missing_image_rate);
        let image_path = has_image.then(|| format!("images/{user_id}.png"));
        if has_image {
            images.insert(user_id.clone(), image);
        }
        users.push(UserRecord {
            user_id,
            label: Some(role),
            display_name,
            screen_name,
            description,
            followers,
            friends,
            tweets,
            image_path,
            image_probs: None,
        });
    }
    Ok(SyntheticCorpus {
        corpus: UserCorpus::new(users)?,
        resources: synthetic_resources(),
        images: MemoryImages(images),
    })
}
