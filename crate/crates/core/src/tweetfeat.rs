//! Tweet tokenization, word-list match rates and k-top word scores.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Role, WordList};
use crate::error::{Error, Result};

/// Emoticons kept as single tokens, longest first so that `:-)` wins over `:)`.
pub const EMOTICONS: &[&str] = &[
    ":-)", ":-(", ":-d", ":-p", ";-)", ":'(", ":)", ":(", ":d", ":p", ";)", ":o", ":/", "=)", "<3",
];

fn emoticon_at(chars: &[char], i: usize) -> Option<&'static str> {
    EMOTICONS.iter().copied().find(|e| {
        let n = e.chars().count();
        i + n <= chars.len() && e.chars().zip(&chars[i..i + n]).all(|(a, b)| a == *b)
    })
}

pub fn is_emoticon(token: &str) -> bool {
    EMOTICONS.contains(&token)
}

pub(crate) fn is_url(token: &str) -> bool {
    let t = token.to_lowercase();
    t.contains("://") || t.starts_with("www.")
}

/// Lowercased tweet tokens.
///
/// URLs and `@mentions` are dropped, hashtags keep their `#`, emoticons from
/// [`EMOTICONS`] stay whole, and everything else splits on
/// non-alphanumeric characters with apostrophes kept inside words.
pub fn tokenize_tweet(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        if is_url(chunk) || chunk.starts_with('@') {
            continue;
        }
        let chars: Vec<char> = chunk
            .to_lowercase()
            .chars()
            .map(|c| if c == '\u{2019}' { '\'' } else { c })
            .collect();
        let mut i = 0;
        while i < chars.len() {
            if let Some(e) = emoticon_at(&chars, i) {
                tokens.push(e.to_string());
                i += e.chars().count();
                continue;
            }
            let c = chars[i];
            if c == '#' && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric()) {
                let start = i;
                i += 1;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                tokens.push(chars[start..i].iter().collect());
                continue;
            }
            if c.is_alphanumeric() {
                let start = i;
                while i < chars.len() {
                    let ch = chars[i];
                    let internal_apostrophe = ch == '\'' && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
                    if ch.is_alphanumeric() || internal_apostrophe {
                        i += 1;
                    } else {
                        break;
                    }
                }
                tokens.push(chars[start..i].iter().collect());
                continue;
            }
            i += 1;
        }
    }
    tokens
}

/// Distinct tokens of each tweet of one user, newest tweet first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TweetTokens {
    pub per_tweet: Vec<BTreeSet<String>>,
}

impl TweetTokens {
    pub fn from_tweets<S: AsRef<str>>(tweets: &[S]) -> Self {
        TweetTokens {
            per_tweet: tweets
                .iter()
                .map(|t| tokenize_tweet(t.as_ref()).into_iter().collect())
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.per_tweet.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_tweet.is_empty()
    }

    fn window(&self, window: TweetWindow) -> &[BTreeSet<String>] {
        match window {
            TweetWindow::All => &self.per_tweet,
            TweetWindow::Recent(n) => &self.per_tweet[..n.min(self.per_tweet.len())],
        }
    }

    /// Fraction of tweets in `window` containing any token that `hit` accepts.
    pub fn match_rate(&self, window: TweetWindow, hit: impl Fn(&str) -> bool) -> Result<f64> {
        let tweets = self.window(window);
        if tweets.is_empty() {
            return Err(Error::invalid("empty tweet collection"));
        }
        let matched = tweets.iter().filter(|t| t.iter().any(|tok| hit(tok))).count();
        Ok(matched as f64 / tweets.len() as f64)
    }
}

/// Which tweets the word-list scores look at. Tweets are stored newest
/// first, so `Recent(n)` takes the first `n` (or all, when fewer).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TweetWindow {
    #[default]
    All,
    Recent(usize),
}

impl FromStr for TweetWindow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(TweetWindow::All),
            n => match n.parse::<usize>() {
                Ok(n) if n > 0 => Ok(TweetWindow::Recent(n)),
                _ => Err(Error::invalid(format!(
                    "invalid tweet window `{s}` (expected all or a positive count)"
                ))),
            },
        }
    }
}

impl fmt::Display for TweetWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TweetWindow::All => f.write_str("all"),
            TweetWindow::Recent(n) => write!(f, "{n}"),
        }
    }
}

/// Fraction of tweets in the window that contain at least one listed word.
pub fn list_match_score<S: AsRef<str>>(tweets: &[S], list: &WordList, window: TweetWindow) -> Result<f64> {
    TweetTokens::from_tweets(tweets).match_rate(window, |t| list.contains(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TweetScores {
    pub fp_tweet: f64,
    pub i_tweet: f64,
    pub e_tweet: f64,
}

pub fn tweet_scores_tokenized(
    tokens: &TweetTokens,
    first: &WordList,
    interjections: &WordList,
    emotions: &WordList,
    window: TweetWindow,
) -> Result<TweetScores> {
    Ok(TweetScores {
        fp_tweet: tokens.match_rate(window, |t| first.contains(t))?,
        i_tweet: tokens.match_rate(window, |t| interjections.contains(t))?,
        e_tweet: tokens.match_rate(window, |t| emotions.contains(t))?,
    })
}

pub fn tweet_scores<S: AsRef<str>>(
    tweets: &[S],
    first: &WordList,
    interjections: &WordList,
    emotions: &WordList,
    window: TweetWindow,
) -> Result<TweetScores> {
    tweet_scores_tokenized(
        &TweetTokens::from_tweets(tweets),
        first,
        interjections,
        emotions,
        window,
    )
}

/// Tokens that may enter the k-top vocabulary: hashtags, emoticons, and
/// alphabetic words (apostrophes allowed) outside the stoplist.
pub fn is_content_token(token: &str, stoplist: &BTreeSet<String>) -> bool {
    if token.starts_with('#') || is_emoticon(token) {
        return true;
    }
    token.chars().any(char::is_alphabetic)
        && token.chars().all(|c| c.is_alphabetic() || c == '\'')
        && !stoplist.contains(token)
}

/// Per-role top-k content words, concatenated in role order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KTopVocabulary {
    pub k: usize,
    pub roles: Vec<Role>,
    pub words: Vec<String>,
}

/// Ranks content tokens per role by how many users of that role used them.
///
/// `training` yields one `(role, tokens)` pair per training user. Ties are
/// broken lexicographically; the same word may appear in several role blocks.
pub fn build_ktop_vocabulary<'a>(
    training: impl IntoIterator<Item = (Role, &'a TweetTokens)>,
    roles: &[Role],
    k: usize,
    stoplist: &BTreeSet<String>,
) -> Result<KTopVocabulary> {
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    let mut doc_freq: BTreeMap<Role, BTreeMap<&'a str, usize>> = BTreeMap::new();
    let mut users: BTreeMap<Role, usize> = BTreeMap::new();
    for (role, tokens) in training {
        *users.entry(role).or_default() += 1;
        let distinct: BTreeSet<&str> = tokens
            .per_tweet
            .iter()
            .flatten()
            .map(String::as_str)
            .filter(|t| is_content_token(t, stoplist))
            .collect();
        let freq = doc_freq.entry(role).or_default();
        for t in distinct {
            *freq.entry(t).or_default() += 1;
        }
    }
    let mut words = Vec::with_capacity(k * roles.len());
    for &role in roles {
        if users.get(&role).copied().unwrap_or(0) == 0 {
            return Err(Error::invalid(format!("no training users with role {role}")));
        }
        let mut ranked: Vec<(&str, usize)> = doc_freq
            .get(&role)
            .map(|m| m.iter().map(|(w, c)| (*w, *c)).collect())
            .unwrap_or_default();
        if ranked.len() < k {
            return Err(Error::invalid(format!(
                "role {role} has {} candidate words, fewer than k = {k}",
                ranked.len()
            )));
        }
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        words.extend(ranked[..k].iter().map(|(w, _)| w.to_string()));
    }
    Ok(KTopVocabulary {
        k,
        roles: roles.to_vec(),
        words,
    })
}

impl KTopVocabulary {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Text export: a `[role]` header before each block, one word per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (role, block) in self.roles.iter().zip(self.words.chunks(self.k)) {
            out.push_str(&format!("[{role}]\n"));
            for w in block {
                out.push_str(w);
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut roles = Vec::new();
        let mut blocks: Vec<Vec<String>> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(role) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                roles.push(role.parse::<Role>()?);
                blocks.push(Vec::new());
            } else {
                blocks
                    .last_mut()
                    .ok_or_else(|| Error::record("vocabulary", i + 1, "word before first [role] header"))?
                    .push(line.to_string());
            }
        }
        let k = blocks.first().map(Vec::len).unwrap_or(0);
        if k == 0 || blocks.iter().any(|b| b.len() != k) {
            return Err(Error::invalid("vocabulary blocks must be non-empty and equally sized"));
        }
        Ok(KTopVocabulary {
            k,
            roles,
            words: blocks.into_iter().flatten().collect(),
        })
    }
}

/// Fraction of tweets containing each vocabulary word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KTopScores {
    pub values: Vec<f64>,
}

pub fn ktop_scores_tokenized(tokens: &TweetTokens, vocab: &KTopVocabulary) -> Result<KTopScores> {
    if tokens.is_empty() {
        return Err(Error::invalid("empty tweet collection"));
    }
    let n = tokens.len() as f64;
    Ok(KTopScores {
        values: vocab
            .words
            .iter()
            .map(|w| tokens.per_tweet.iter().filter(|t| t.contains(w)).count() as f64 / n)
            .collect(),
    })
}

pub fn ktop_score_vector<S: AsRef<str>>(tweets: &[S], vocab: &KTopVocabulary) -> Result<KTopScores> {
    ktop_scores_tokenized(&TweetTokens::from_tweets(tweets), vocab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::WordKind;
    use proptest::prelude::*;

    fn list(kind: WordKind, words: &[&str]) -> WordList {
        WordList::new(kind, words.iter().copied()).unwrap()
    }

    #[test]
    fn tokenizer_example() {
        assert_eq!(
            tokenize_tweet("I'm SO happy :) #blessed @bob http://t.co"),
            vec!["i'm", "so", "happy", ":)", "#blessed"]
        );
        assert!(tokenize_tweet("").is_empty());
        assert_eq!(tokenize_tweet("#A #a"), vec!["#a", "#a"]);
    }

    #[test]
    fn tokenizer_edges() {
        assert_eq!(tokenize_tweet("wow!!! <3 www.x.com"), vec!["wow", "<3"]);
        assert_eq!(tokenize_tweet("rock'n'roll 'quoted'"), vec!["rock'n'roll", "quoted"]);
        assert_eq!(tokenize_tweet("great:D # alone"), vec!["great", ":d", "alone"]);
        assert_eq!(tokenize_tweet("don\u{2019}t"), vec!["don't"]);
    }

    #[test]
    fn match_score_examples() {
        let first = list(WordKind::FirstPerson, &["i", "my"]);
        assert_eq!(
            list_match_score(&["i love tea", "rainy day"], &first, TweetWindow::All).unwrap(),
            0.5
        );
        assert_eq!(list_match_score(&["rainy day"], &first, TweetWindow::All).unwrap(), 0.0);
        assert_eq!(
            list_match_score(&["my day", "i i i"], &first, TweetWindow::All).unwrap(),
            1.0
        );
        let empty: [&str; 0] = [];
        assert!(list_match_score(&empty, &first, TweetWindow::All).is_err());
    }

    #[test]
    fn window_selects_newest_and_clamps() {
        let first = list(WordKind::FirstPerson, &["i"]);
        let tweets = ["i run", "tea", "tea", "tea", "i swim"];
        assert_eq!(list_match_score(&tweets, &first, TweetWindow::Recent(2)).unwrap(), 0.5);
        assert_eq!(
            list_match_score(&tweets, &first, TweetWindow::Recent(10)).unwrap(),
            list_match_score(&tweets, &first, TweetWindow::All).unwrap()
        );
    }

    #[test]
    fn tweet_scores_only_emotion() {
        let first = list(WordKind::FirstPerson, &["i", "me"]);
        let interj = list(WordKind::Interjection, &["wow", "oops"]);
        let emot = list(WordKind::Emotion, &["happy", "sad"]);
        let s = tweet_scores(
            &["so happy today", "rain again", "sad news", "tea"],
            &first,
            &interj,
            &emot,
            TweetWindow::All,
        )
        .unwrap();
        assert_eq!(
            s,
            TweetScores {
                fp_tweet: 0.0,
                i_tweet: 0.0,
                e_tweet: 0.5
            }
        );
        let s = tweet_scores(&["tea", "coffee"], &first, &interj, &emot, TweetWindow::All).unwrap();
        assert_eq!(s, TweetScores::default());
    }

    fn tok(tweets: &[&str]) -> TweetTokens {
        TweetTokens::from_tweets(tweets)
    }

    #[test]
    fn vocabulary_ranks_by_user_count_with_lexicographic_ties() {
        let stop: BTreeSet<String> = ["the"].iter().map(|s| s.to_string()).collect();
        let users = [
            (Role::Male, tok(&["football the game", "football again"])),
            (Role::Male, tok(&["football beer"])),
            (Role::Male, tok(&["beer game"])),
            (Role::Female, tok(&["yoga tea"])),
            (Role::Female, tok(&["yoga art"])),
            (Role::Brand, tok(&["#sale deal"])),
            (Role::Brand, tok(&["#sale shop"])),
        ];
        let v = build_ktop_vocabulary(users.iter().map(|(r, t)| (*r, t)), &Role::ALL, 2, &stop).unwrap();
        // male: football 2, beer 2, game 2 -> beer, football
        assert_eq!(v.words, vec!["beer", "football", "yoga", "art", "#sale", "deal"]);
        let v1 = build_ktop_vocabulary(users.iter().map(|(r, t)| (*r, t)), &Role::ALL, 1, &stop).unwrap();
        assert_eq!(v1.len(), 3);
        assert!(build_ktop_vocabulary(users.iter().map(|(r, t)| (*r, t)), &Role::ALL, 4, &stop).is_err());
        let no_brand = &users[..5];
        assert!(build_ktop_vocabulary(no_brand.iter().map(|(r, t)| (*r, t)), &Role::ALL, 1, &stop).is_err());
        assert_eq!(KTopVocabulary::from_text(&v.to_text()).unwrap(), v);
    }

    #[test]
    fn ktop_scores() {
        let v = KTopVocabulary {
            k: 1,
            roles: Role::ALL.to_vec(),
            words: vec!["beer".into(), "yoga".into(), "#sale".into()],
        };
        assert_eq!(ktop_score_vector(&["nothing here"], &v).unwrap().values, vec![0.0; 3]);
        assert_eq!(ktop_score_vector(&["yoga"], &v).unwrap().values, vec![0.0, 1.0, 0.0]);
        let s = ktop_score_vector(&["beer", "beer now", "tea", "more beer beer"], &v).unwrap();
        assert_eq!(s.values[0], 0.75);
        let empty: [&str; 0] = [];
        assert!(ktop_score_vector(&empty, &v).is_err());
    }

    proptest! {
        #[test]
        fn counts_tweets_not_occurrences(words in proptest::collection::vec("[a-c]{1,3}", 1..8), rep in 1usize..4) {
            let first = list(WordKind::FirstPerson, &["ab"]);
            let tweets: Vec<String> = words.clone();
            let doubled: Vec<String> = words.iter().map(|w| vec![w.as_str(); rep].join(" ")).collect();
            prop_assert_eq!(
                list_match_score(&tweets, &first, TweetWindow::All).unwrap(),
                list_match_score(&doubled, &first, TweetWindow::All).unwrap()
            );
        }

        #[test]
        fn appending_non_matching_tweet_decreases(mut words in proptest::collection::vec("[a-c]{1,3}", 0..8)) {
            let first = list(WordKind::FirstPerson, &["ab"]);
            words.push("x ab".into());
            let before = list_match_score(&words, &first, TweetWindow::All).unwrap();
            let mut more = words.clone();
            more.push("zzz".into());
            prop_assert!(list_match_score(&more, &first, TweetWindow::All).unwrap() < before);
        }

        #[test]
        fn ktop_entries_bounded_and_order_invariant(mut tweets in proptest::collection::vec("[a-c ]{0,8}", 1..8)) {
            let v = KTopVocabulary { k: 1, roles: Role::ALL.to_vec(), words: vec!["a".into(), "bc".into(), "c".into()] };
            let s = ktop_score_vector(&tweets, &v).unwrap();
            prop_assert!(s.values.iter().all(|x| (0.0..=1.0).contains(x)));
            tweets.reverse();
            prop_assert_eq!(s, ktop_score_vector(&tweets, &v).unwrap());
        }
    }
}
