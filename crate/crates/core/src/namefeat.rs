//! Display-name and screen-name gender scores.
//!
//! A name scores `(tf_f - tf_m) / max(tf_f, tf_m)` from its female and male
//! frequencies, and 0 when it is not in the dictionary. Display names use
//! the first token that the dictionary knows. Screen names are first split
//! into words by four competing strategies and the split with the fewest
//! tokens wins.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{token_lines, NameDictionary};
use crate::error::{Error, Result};

/// Ranked word list for the cost-based splitter. Rank 1 is the most frequent.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Lexicon {
    words: Vec<String>,
    ranks: HashMap<String, usize>,
    max_len: usize,
}

impl Lexicon {
    /// Builds a lexicon from words in rank order. Repeated words keep their
    /// first (best) rank.
    pub fn from_ranked<S: AsRef<str>>(words: impl IntoIterator<Item = S>) -> Self {
        let mut lex = Lexicon::default();
        for w in words {
            let w = w.as_ref().trim().to_lowercase();
            if w.is_empty() || lex.ranks.contains_key(&w) {
                continue;
            }
            lex.max_len = lex.max_len.max(w.chars().count());
            lex.words.push(w.clone());
            lex.ranks.insert(w, lex.words.len());
        }
        lex
    }

    pub fn rank(&self, word: &str) -> Option<usize> {
        self.ranks.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Cost of a lexicon word: `ln(rank * ln(n + 1))`.
    pub fn word_cost(&self, word: &str) -> Option<f64> {
        self.rank(word).map(|r| self.rank_cost(r))
    }

    fn rank_cost(&self, rank: usize) -> f64 {
        (rank as f64 * ((self.len() + 1) as f64).ln()).ln()
    }

    /// Cost of a single character that is not itself a lexicon word; one more
    /// than the most expensive word.
    pub fn unknown_char_cost(&self) -> f64 {
        if self.is_empty() {
            1.0
        } else {
            self.rank_cost(self.len()) + 1.0
        }
    }
}

pub fn parse_lexicon(text: &str, source_name: &str) -> Result<Lexicon> {
    let tokens = token_lines(text, source_name)?;
    if tokens.is_empty() {
        return Err(Error::record(source_name, 0, "lexicon has no entries"));
    }
    Ok(Lexicon::from_ranked(tokens.into_iter().map(|(_, t)| t)))
}

/// Loads a lexicon file: one word per line, line order defines rank.
pub fn load_lexicon(path: &Path) -> Result<Lexicon> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lexicon(&text, &path.display().to_string())
}

/// Membership test used by the greedy splitter.
pub trait Vocabulary {
    fn contains_word(&self, word: &str) -> bool;
    /// Upper bound on word length in chars.
    fn max_word_chars(&self) -> usize;
}

impl Vocabulary for NameDictionary {
    fn contains_word(&self, word: &str) -> bool {
        self.contains(word)
    }

    fn max_word_chars(&self) -> usize {
        self.iter().map(|(n, _)| n.chars().count()).max().unwrap_or(0)
    }
}

impl Vocabulary for Lexicon {
    fn contains_word(&self, word: &str) -> bool {
        self.ranks.contains_key(word)
    }

    fn max_word_chars(&self) -> usize {
        self.max_len
    }
}

impl Vocabulary for HashSet<String> {
    fn contains_word(&self, word: &str) -> bool {
        self.contains(word)
    }

    fn max_word_chars(&self) -> usize {
        self.iter().map(|w| w.chars().count()).max().unwrap_or(0)
    }
}

impl Vocabulary for BTreeSet<String> {
    fn contains_word(&self, word: &str) -> bool {
        self.contains(word)
    }

    fn max_word_chars(&self) -> usize {
        self.iter().map(|w| w.chars().count()).max().unwrap_or(0)
    }
}

/// Union of two vocabularies.
pub struct Union<'a, A: ?Sized, B: ?Sized>(pub &'a A, pub &'a B);

impl<A: Vocabulary + ?Sized, B: Vocabulary + ?Sized> Vocabulary for Union<'_, A, B> {
    fn contains_word(&self, word: &str) -> bool {
        self.0.contains_word(word) || self.1.contains_word(word)
    }

    fn max_word_chars(&self) -> usize {
        self.0.max_word_chars().max(self.1.max_word_chars())
    }
}

/// `(tf_f - tf_m) / max(tf_f, tf_m)` for a dictionary term, 0 otherwise.
pub fn name_score(term: &str, dict: &NameDictionary) -> f64 {
    match dict.get(term) {
        Some(c) if c.female.max(c.male) > 0 => (c.female as f64 - c.male as f64) / c.female.max(c.male) as f64,
        _ => 0.0,
    }
}

/// Lowercased runs of alphabetic characters.
pub fn name_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Score of the first token found in the dictionary; 0 when none is.
pub fn first_hit_score<S: AsRef<str>>(tokens: &[S], dict: &NameDictionary) -> f64 {
    tokens
        .iter()
        .find(|t| dict.contains(t.as_ref()))
        .map(|t| name_score(t.as_ref(), dict))
        .unwrap_or(0.0)
}

pub fn display_name_score(display_name: &str, dict: &NameDictionary) -> f64 {
    first_hit_score(&name_tokens(display_name), dict)
}

/// Left-to-right longest-match segmentation. Characters that start no
/// vocabulary word become single-character tokens.
pub fn greedy_dictionary_split<V: Vocabulary + ?Sized>(s: &str, vocab: &V) -> Vec<String> {
    let chars: Vec<char> = s.chars().collect();
    let max_len = vocab.max_word_chars();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let longest = (2..=max_len.min(chars.len() - i))
            .rev()
            .find(|&len| vocab.contains_word(&chars[i..i + len].iter().collect::<String>()))
            .unwrap_or(1);
        tokens.push(chars[i..i + longest].iter().collect());
        i += longest;
    }
    tokens
}

/// Minimum-cost segmentation.
///
/// Lexicon words cost `ln(rank * ln(n + 1))`; any other single character
/// costs [`Lexicon::unknown_char_cost`]. Among equal-cost segmentations the
/// one with fewer tokens wins, then the one whose tokens are longest from the
/// left.
pub fn dp_word_split(s: &str, lexicon: &Lexicon) -> Vec<String> {
    dp_split_with_cost(s, lexicon).0
}

const COST_EPS: f64 = 1e-9;

/// Segmentation and its total cost.
pub fn dp_split_with_cost(s: &str, lexicon: &Lexicon) -> (Vec<String>, f64) {
    let chars: Vec<char> = s.chars().collect();
    let n = chars.len();
    let unknown = lexicon.unknown_char_cost();
    let max_len = lexicon.max_word_chars().max(1);
    // best[i] = (cost, tokens, end of first token) for the suffix starting at i
    let mut best: Vec<(f64, usize, usize)> = vec![(0.0, 0, n); n + 1];
    for i in (0..n).rev() {
        let mut choice: Option<(f64, usize, usize)> = None;
        for len in (1..=max_len.min(n - i)).rev() {
            let piece: String = chars[i..i + len].iter().collect();
            let cost = match lexicon.word_cost(&piece) {
                Some(c) => c,
                None if len == 1 => unknown,
                None => continue,
            };
            let (rest_cost, rest_tokens, _) = best[i + len];
            let cand = (cost + rest_cost, rest_tokens + 1, i + len);
            let better = match choice {
                None => true,
                Some((c, t, _)) => cand.0 < c - COST_EPS || ((cand.0 - c).abs() <= COST_EPS && cand.1 < t),
            };
            if better {
                choice = Some(cand);
            }
        }
        best[i] = choice.expect("single characters are always admissible");
    }
    let mut tokens = Vec::with_capacity(best[0].1);
    let mut i = 0;
    while i < n {
        let end = best[i].2;
        tokens.push(chars[i..end].iter().collect());
        i = end;
    }
    (tokens, best[0].0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitMethod {
    NameBased,
    WordBased,
    NameWordBased,
    DpSplit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    pub method: SplitMethod,
    pub tokens: Vec<String>,
}

/// Candidates of all four strategies, in tie-break priority order.
pub fn segmentation_candidates(screen_name: &str, dict: &NameDictionary, lexicon: &Lexicon) -> Vec<Segmentation> {
    let lower = screen_name.to_lowercase();
    let letters: String = lower.chars().filter(|c| c.is_alphabetic()).collect();
    let alnum: String = lower.chars().filter(|c| c.is_alphanumeric()).collect();
    vec![
        Segmentation {
            method: SplitMethod::WordBased,
            tokens: greedy_dictionary_split(&letters, lexicon),
        },
        Segmentation {
            method: SplitMethod::NameWordBased,
            tokens: greedy_dictionary_split(&letters, &Union(dict, lexicon)),
        },
        Segmentation {
            method: SplitMethod::NameBased,
            tokens: greedy_dictionary_split(&letters, dict),
        },
        Segmentation {
            method: SplitMethod::DpSplit,
            tokens: dp_word_split(&alnum, lexicon),
        },
    ]
}

/// The candidate with the fewest tokens. Empty candidates (a screen name
/// with no letters leaves the greedy methods nothing) only win when every
/// candidate is empty.
pub fn segment_screen_name(screen_name: &str, dict: &NameDictionary, lexicon: &Lexicon) -> Segmentation {
    let candidates = segmentation_candidates(screen_name, dict, lexicon);
    let mut best: Option<Segmentation> = None;
    for cand in candidates.iter() {
        if cand.tokens.is_empty() {
            continue;
        }
        if best.as_ref().is_none_or(|b| cand.tokens.len() < b.tokens.len()) {
            best = Some(cand.clone());
        }
    }
    best.unwrap_or_else(|| candidates[0].clone())
}

pub fn screen_name_score(screen_name: &str, dict: &NameDictionary, lexicon: &Lexicon) -> f64 {
    first_hit_score(&segment_screen_name(screen_name, dict, lexicon).tokens, dict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Gender;
    use proptest::prelude::*;

    fn dict(rows: &[(&str, u64, u64)]) -> NameDictionary {
        let mut r = Vec::new();
        for (n, f, m) in rows {
            if *f > 0 {
                r.push((*n, Gender::Female, *f));
            }
            if *m > 0 {
                r.push((*n, Gender::Male, *m));
            }
        }
        NameDictionary::from_rows(r).unwrap()
    }

    #[test]
    fn john_worked_example() {
        let d = dict(&[("john", 445, 256166)]);
        assert!((name_score("john", &d) + 0.998).abs() < 5e-4);
        assert_eq!(name_score("nobody", &d), 0.0);
    }

    #[test]
    fn equal_counts_score_zero_and_dallis() {
        let d = dict(&[("sam", 10, 10), ("dallis", 406, 167)]);
        assert_eq!(name_score("sam", &d), 0.0);
        assert!((name_score("dallis", &d) - (406.0 - 167.0) / 406.0).abs() < 1e-12);
        assert!((name_score("dallis", &d) - 0.5887).abs() < 1e-4);
    }

    #[test]
    fn display_name_first_hit() {
        let d = dict(&[("john", 445, 256166), ("clemson", 0, 3)]);
        let john = name_score("john", &d);
        assert_eq!(display_name_score("John Clemson", &d), john);
        assert_eq!(display_name_score("xqzt77 John", &d), john);
        assert_eq!(display_name_score("", &d), 0.0);
    }

    #[test]
    fn greedy_name_split_of_clemsonjohn() {
        let names: HashSet<String> = ["clem", "son", "john"].iter().map(|s| s.to_string()).collect();
        assert_eq!(
            greedy_dictionary_split("clemsonjohn", &names),
            vec!["clem", "son", "john"]
        );
        let words: HashSet<String> = ["tommy"].iter().map(|s| s.to_string()).collect();
        assert_eq!(greedy_dictionary_split("tommy", &words), vec!["tommy"]);
        assert!(greedy_dictionary_split("", &words).is_empty());
    }

    #[test]
    fn greedy_emits_unknown_characters_singly() {
        let words: HashSet<String> = ["on", "john"].iter().map(|s| s.to_string()).collect();
        assert_eq!(
            greedy_dictionary_split("xonjohnq", &words),
            vec!["x", "on", "john", "q"]
        );
    }

    #[test]
    fn dp_examples() {
        let lex = Lexicon::from_ranked(["the", "john", "on", "clemson", "son"]);
        assert_eq!(dp_word_split("clemsonjohn", &lex), vec!["clemson", "john"]);
        assert_eq!(
            dp_word_split("123tommy", &lex),
            vec!["1", "2", "3", "t", "o", "m", "m", "y"]
        );
        assert_eq!(dp_word_split("john", &lex), vec!["john"]);
        assert!(dp_word_split("", &lex).is_empty());
    }

    #[test]
    fn unknown_char_costs_more_than_any_word() {
        let lex = Lexicon::from_ranked(["a", "bb", "ccc"]);
        let worst = lex
            .words()
            .iter()
            .map(|w| lex.word_cost(w).unwrap())
            .fold(f64::MIN, f64::max);
        assert!(lex.unknown_char_cost() > worst);
    }

    #[test]
    fn segmentation_prefers_fewest_tokens_with_priority() {
        let d = dict(&[
            ("clem", 0, 5),
            ("son", 0, 5),
            ("john", 445, 256166),
            ("tom", 0, 9),
            ("tommy", 12, 9000),
        ]);
        let lex = Lexicon::from_ranked(["john", "on", "clemson", "cl", "ems", "tommy"]);
        let seg = segment_screen_name("clemsonjohn", &d, &lex);
        assert_eq!(seg.tokens, vec!["clemson", "john"]);
        let seg = segment_screen_name("123tommy", &d, &lex);
        assert_eq!(seg.tokens, vec!["tommy"]);
        assert_eq!(seg.method, SplitMethod::WordBased);
        assert!(screen_name_score("123tommy", &d, &lex) < 0.0);
        assert_eq!(screen_name_score("clemsonjohn", &d, &lex), name_score("john", &d));
        assert_eq!(segment_screen_name("john", &d, &lex).tokens, vec!["john"]);
    }

    #[test]
    fn all_digit_screen_name_uses_dp_tokens() {
        let d = dict(&[("ann", 5, 0)]);
        let lex = Lexicon::from_ranked(["ann"]);
        let seg = segment_screen_name("42", &d, &lex);
        assert_eq!(seg.method, SplitMethod::DpSplit);
        assert_eq!(seg.tokens, vec!["4", "2"]);
        assert_eq!(screen_name_score("___", &d, &lex), 0.0);
    }

    proptest! {
        #[test]
        fn name_score_bounds_and_antisymmetry(f in 0u64..10_000, m in 0u64..10_000) {
            prop_assume!(f + m > 0);
            let d = dict(&[("x", f, m)]);
            let swapped = dict(&[("x", m, f)]);
            let s = name_score("x", &d);
            prop_assert!((-1.0..=1.0).contains(&s));
            prop_assert_eq!(s, -name_score("x", &swapped));
            prop_assert_eq!(s.abs() == 1.0, f == 0 || m == 0);
        }

        #[test]
        fn winner_has_fewest_tokens(name in "[a-z0-9_]{1,14}") {
            let d = dict(&[("ann", 5, 1), ("bob", 0, 7), ("an", 2, 2), ("nab", 1, 0)]);
            let lex = Lexicon::from_ranked(["an", "bob", "nab", "a", "banana", "no"]);
            let seg = segment_screen_name(&name, &d, &lex);
            for cand in segmentation_candidates(&name, &d, &lex) {
                if !cand.tokens.is_empty() {
                    prop_assert!(seg.tokens.len() <= cand.tokens.len());
                }
            }
            let alnum: String = name.chars().filter(|c| c.is_alphanumeric()).collect();
            if !alnum.is_empty() {
                prop_assert!(!seg.tokens.is_empty());
            }
        }
    }
}
