//! Datasets, name dictionaries, word lists and fold assignment.
//!
//! A dataset is UTF-8 text with one JSON object per line:
//!
//! ```text
//! {"user_id":"u1","label":"female","display_name":"Dallis Ray","screen_name":"dallisr",
//!  "description":"I am a runner","followers":120,"friends":80,
//!  "tweets":["so happy today :)"],"image_path":"images/u1.png"}
//! ```
//!
//! `label`, `image_path` and `image_probs` are optional. Tweets are stored
//! newest first. Everything loaded here is immutable afterwards and can be
//! shared between threads.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The user roles. Class indices follow declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Male,
    Female,
    Brand,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Male, Role::Female, Role::Brand];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Role> {
        Role::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Male => "male",
            Role::Female => "female",
            Role::Brand => "brand",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Role::Male => "Male",
            Role::Female => "Female",
            Role::Brand => "Brand",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" => Ok(Role::Male),
            "female" => Ok(Role::Female),
            "brand" => Ok(Role::Brand),
            other => Err(Error::invalid(format!("unknown role `{other}`"))),
        }
    }
}

/// Tri-class (male, female, brand) or bi-class (male, female) operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassMode {
    #[default]
    Tri,
    Bi,
}

impl ClassMode {
    pub fn roles(self) -> &'static [Role] {
        match self {
            ClassMode::Tri => &Role::ALL,
            ClassMode::Bi => &Role::ALL[..2],
        }
    }

    pub fn n_classes(self) -> usize {
        self.roles().len()
    }
}

impl FromStr for ClassMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tri" => Ok(ClassMode::Tri),
            "bi" => Ok(ClassMode::Bi),
            other => Err(Error::invalid(format!("unknown mode `{other}` (expected tri|bi)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Role>,
    pub display_name: String,
    pub screen_name: String,
    pub description: String,
    pub followers: u64,
    pub friends: u64,
    /// Newest first.
    pub tweets: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_probs: Option<[f64; 3]>,
}

// Counts are signed here so that negative values produce a field-level
// diagnostic instead of a serde type error.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    user_id: String,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    display_name: String,
    screen_name: String,
    #[serde(default)]
    description: String,
    followers: i64,
    friends: i64,
    #[serde(default)]
    tweets: Vec<String>,
    #[serde(default)]
    image_path: Option<String>,
    #[serde(default)]
    image_probs: Option<Vec<f64>>,
}

impl RawRecord {
    fn validate(self, require_labels: bool) -> std::result::Result<UserRecord, String> {
        if self.user_id.trim().is_empty() {
            return Err("field `user_id` must be non-empty".into());
        }
        if self.screen_name.trim().is_empty() {
            return Err("field `screen_name` must be non-empty".into());
        }
        if self.followers < 0 {
            return Err(format!("field `followers` must be >= 0, got {}", self.followers));
        }
        if self.friends < 0 {
            return Err(format!("field `friends` must be >= 0, got {}", self.friends));
        }
        let label = match self.label {
            Some(l) => Some(l.parse::<Role>().map_err(|e| format!("field `label`: {e}"))?),
            None if require_labels => return Err("field `label` is required".into()),
            None => None,
        };
        let image_probs = match self.image_probs {
            None => None,
            Some(p) => {
                if p.len() != 3 {
                    return Err(format!("field `image_probs` must have 3 entries, got {}", p.len()));
                }
                if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err("field `image_probs` entries must be finite and >= 0".into());
                }
                let sum: f64 = p.iter().sum();
                if (sum - 1.0).abs() > 1e-6 {
                    return Err(format!("field `image_probs` must sum to 1, got {sum}"));
                }
                Some([p[0], p[1], p[2]])
            }
        };
        Ok(UserRecord {
            user_id: self.user_id,
            label,
            display_name: self.display_name,
            screen_name: self.screen_name,
            description: self.description,
            followers: self.followers as u64,
            friends: self.friends as u64,
            tweets: self.tweets,
            image_path: self.image_path,
            image_probs,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UserCorpus {
    pub users: Vec<UserRecord>,
}

impl UserCorpus {
    pub fn new(users: Vec<UserRecord>) -> Result<Self> {
        let mut seen = HashMap::new();
        for (i, u) in users.iter().enumerate() {
            if let Some(first) = seen.insert(u.user_id.as_str(), i + 1) {
                return Err(Error::DuplicateUser {
                    user_id: u.user_id.clone(),
                    line: i + 1,
                    first_line: first,
                });
            }
        }
        Ok(UserCorpus { users })
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    /// Labels as class indices; fails on the first unlabeled user.
    pub fn labels(&self) -> Result<Vec<usize>> {
        self.users
            .iter()
            .map(|u| {
                u.label
                    .map(Role::index)
                    .ok_or_else(|| Error::invalid(format!("user `{}` has no label", u.user_id)))
            })
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for u in &self.users {
            out.push_str(&serde_json::to_string(u).expect("records always serialize"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub require_labels: bool,
    /// Users with fewer tweets are skipped at ingestion.
    pub min_tweets: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            require_labels: false,
            min_tweets: 1,
        }
    }
}

/// Outcome of parsing a dataset: the accepted corpus, every diagnostic,
/// and the ids skipped by the `min_tweets` gate.
#[derive(Debug, Default)]
pub struct ParseOutcome {
    pub corpus: UserCorpus,
    pub diagnostics: Vec<Error>,
    pub skipped: Vec<String>,
}

/// Parses every line, collecting all diagnostics instead of stopping at the
/// first one.
pub fn parse_dataset(text: &str, source_name: &str, opts: &LoadOptions) -> ParseOutcome {
    let mut out = ParseOutcome::default();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut non_blank = 0usize;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        non_blank += 1;
        let raw: RawRecord = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                out.diagnostics
                    .push(Error::record(source_name, line_no, format!("malformed record: {e}")));
                continue;
            }
        };
        let record = match raw.validate(opts.require_labels) {
            Ok(r) => r,
            Err(msg) => {
                out.diagnostics.push(Error::record(source_name, line_no, msg));
                continue;
            }
        };
        if let Some(&first_line) = seen.get(&record.user_id) {
            out.diagnostics.push(Error::DuplicateUser {
                user_id: record.user_id,
                line: line_no,
                first_line,
            });
            continue;
        }
        seen.insert(record.user_id.clone(), line_no);
        if record.tweets.len() < opts.min_tweets {
            out.skipped.push(record.user_id);
            continue;
        }
        out.corpus.users.push(record);
    }
    if non_blank == 0 {
        out.diagnostics
            .push(Error::record(source_name, 0, "dataset contains no records"));
    }
    out
}

pub fn load_dataset_with(path: &Path, opts: &LoadOptions) -> Result<UserCorpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut outcome = parse_dataset(&text, &path.display().to_string(), opts);
    if !outcome.diagnostics.is_empty() {
        return Err(outcome.diagnostics.swap_remove(0));
    }
    Ok(outcome.corpus)
}

/// Loads a line-delimited dataset with the default `min_tweets` gate of 1.
pub fn load_dataset(path: &Path, require_labels: bool) -> Result<UserCorpus> {
    load_dataset_with(
        path,
        &LoadOptions {
            require_labels,
            ..LoadOptions::default()
        },
    )
}

/// Female and male frequencies for one name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NameCounts {
    pub female: u64,
    pub male: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NameDictionary {
    entries: BTreeMap<String, NameCounts>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gender {
    Female,
    Male,
}

impl NameDictionary {
    /// Rows with the same name and gender accumulate.
    pub fn from_rows<'a>(rows: impl IntoIterator<Item = (&'a str, Gender, u64)>) -> Result<Self> {
        let mut dict = NameDictionary::default();
        for (name, gender, freq) in rows {
            dict.add(name, gender, freq)?;
        }
        Ok(dict)
    }

    fn add(&mut self, name: &str, gender: Gender, freq: u64) -> Result<()> {
        let name = name.trim().to_lowercase();
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::invalid(format!("invalid name `{name}`")));
        }
        if freq == 0 {
            return Err(Error::invalid(format!("non-positive frequency for `{name}`")));
        }
        let counts = self.entries.entry(name).or_default();
        match gender {
            Gender::Female => counts.female += freq,
            Gender::Male => counts.male += freq,
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<NameCounts> {
        self.entries.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, NameCounts)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Canonical CSV rendering (one row per non-zero gender count).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,gender,frequency\n");
        for (name, c) in &self.entries {
            if c.female > 0 {
                out.push_str(&format!("{name},F,{}\n", c.female));
            }
            if c.male > 0 {
                out.push_str(&format!("{name},M,{}\n", c.male));
            }
        }
        out
    }
}

/// Parses `name,gender,frequency` rows into `dict`. A header row is allowed.
pub fn parse_name_csv(text: &str, source_name: &str, dict: &mut NameDictionary) -> Result<()> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::record(source_name, i + 1, format!("malformed row: {e}")))?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(i + 1);
        if row.len() != 3 {
            return Err(Error::record(
                source_name,
                line,
                format!("expected 3 columns, got {}", row.len()),
            ));
        }
        if i == 0 && row[0].eq_ignore_ascii_case("name") && row[1].eq_ignore_ascii_case("gender") {
            continue;
        }
        let gender = match &row[1] {
            "F" | "f" => Gender::Female,
            "M" | "m" => Gender::Male,
            other => {
                return Err(Error::record(
                    source_name,
                    line,
                    format!("unknown gender code `{other}`"),
                ))
            }
        };
        let freq: i64 = row[2]
            .parse()
            .map_err(|_| Error::record(source_name, line, format!("invalid frequency `{}`", &row[2])))?;
        if freq <= 0 {
            return Err(Error::record(
                source_name,
                line,
                format!("non-positive frequency {freq}"),
            ));
        }
        dict.add(&row[0], gender, freq as u64)
            .map_err(|e| Error::record(source_name, line, e.to_string()))?;
    }
    Ok(())
}

/// Loads and merges one or more name CSV files.
pub fn load_name_dictionary<P: AsRef<Path>>(paths: &[P]) -> Result<NameDictionary> {
    if paths.is_empty() {
        return Err(Error::invalid("no name dictionary files given"));
    }
    let mut dict = NameDictionary::default();
    for p in paths {
        let p = p.as_ref();
        let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        parse_name_csv(&text, &p.display().to_string(), &mut dict)?;
    }
    Ok(dict)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WordKind {
    FirstPerson,
    BrandWord,
    Interjection,
    Emotion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordList {
    pub kind: WordKind,
    words: BTreeSet<String>,
}

impl WordList {
    pub fn new<S: AsRef<str>>(kind: WordKind, words: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for w in words {
            let w = w.as_ref().trim();
            if w.chars().any(char::is_whitespace) {
                return Err(Error::invalid(format!("word list token `{w}` contains whitespace")));
            }
            if !w.is_empty() {
                set.insert(w.to_lowercase());
            }
        }
        if set.is_empty() {
            return Err(Error::invalid(format!("{kind:?} word list is empty")));
        }
        Ok(WordList { kind, words: set })
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Non-comment, non-blank lines of a one-token-per-line file, with their
/// 1-based line numbers. Tokens containing whitespace are rejected.
pub(crate) fn token_lines(text: &str, source_name: &str) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if t.chars().any(char::is_whitespace) {
            return Err(Error::record(
                source_name,
                i + 1,
                format!("token `{t}` contains whitespace"),
            ));
        }
        out.push((i + 1, t.to_lowercase()));
    }
    Ok(out)
}

pub fn parse_word_list(text: &str, source_name: &str, kind: WordKind) -> Result<WordList> {
    let tokens = token_lines(text, source_name)?;
    if tokens.is_empty() {
        return Err(Error::record(source_name, 0, "word list has no entries"));
    }
    WordList::new(kind, tokens.into_iter().map(|(_, t)| t))
}

pub fn load_word_list(path: &Path, kind: WordKind) -> Result<WordList> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_word_list(&text, &path.display().to_string(), kind)
}

/// Fold index per user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub n_folds: usize,
    pub assignment: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, user_id: &str) -> Option<usize> {
        self.assignment.get(user_id).copied()
    }

    pub fn members(&self, fold: usize) -> impl Iterator<Item = &str> {
        self.assignment
            .iter()
            .filter(move |(_, f)| **f == fold)
            .map(|(k, _)| k.as_str())
    }
}

/// Stratified fold index for each position of `labels`.
///
/// Members of each class are shuffled and dealt round-robin; the dealing
/// offset carries over between classes so fold sizes stay balanced too.
pub fn stratified_fold_indices(labels: &[usize], n_folds: usize, seed: u64) -> Result<Vec<usize>> {
    if n_folds < 2 {
        return Err(Error::invalid(format!("n_folds must be >= 2, got {n_folds}")));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    for (class, members) in &by_class {
        if members.len() < n_folds {
            return Err(Error::Stratification(format!(
                "class {class} has {} members, fewer than {n_folds} folds",
                members.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0usize; labels.len()];
    let mut offset = 0usize;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for (j, &i) in members.iter().enumerate() {
            folds[i] = (offset + j) % n_folds;
        }
        offset = (offset + members.len()) % n_folds;
    }
    Ok(folds)
}

pub fn stratified_folds(corpus: &UserCorpus, n_folds: usize, seed: u64) -> Result<FoldAssignment> {
    let labels = corpus.labels()?;
    let folds = stratified_fold_indices(&labels, n_folds, seed)?;
    Ok(FoldAssignment {
        n_folds,
        assignment: corpus
            .users
            .iter()
            .zip(folds)
            .map(|(u, f)| (u.user_id.clone(), f))
            .collect(),
    })
}
