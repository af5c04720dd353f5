//! The lexical resources a hybrid model depends on, with content
//! fingerprints so a saved model can refuse mismatched resources.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::corpus::{parse_name_csv, parse_word_list, token_lines, NameDictionary, WordKind, WordList};
use crate::error::{Error, Result};
use crate::namefeat::{parse_lexicon, Lexicon};

pub const NAMES_FILE: &str = "names.csv";
pub const LEXICON_FILE: &str = "lexicon.txt";
pub const FIRST_PERSON_FILE: &str = "first_person.txt";
pub const BRAND_FILE: &str = "brand.txt";
pub const INTERJECTION_FILE: &str = "interjection.txt";
pub const EMOTION_FILE: &str = "emotion.txt";
pub const STOPLIST_FILE: &str = "stoplist.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct Resources {
    pub names: NameDictionary,
    pub lexicon: Lexicon,
    pub first_person: WordList,
    pub brand: WordList,
    pub interjection: WordList,
    pub emotion: WordList,
    pub stoplist: BTreeSet<String>,
}

fn read(dir: &Path, file: &str) -> Result<(String, String)> {
    let path = dir.join(file);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok((text, path.display().to_string()))
}

fn lines<'a>(words: impl IntoIterator<Item = &'a str>) -> String {
    words.into_iter().flat_map(|w| [w, "\n"]).collect()
}

const BUILTIN: [(&str, &str); 7] = [
    (NAMES_FILE, include_str!("../../resources/names.csv")),
    (LEXICON_FILE, include_str!("../../resources/lexicon.txt")),
    (FIRST_PERSON_FILE, include_str!("../../resources/first_person.txt")),
    (BRAND_FILE, include_str!("../../resources/brand.txt")),
    (INTERJECTION_FILE, include_str!("../../resources/interjection.txt")),
    (EMOTION_FILE, include_str!("../../resources/emotion.txt")),
    (STOPLIST_FILE, include_str!("../../resources/stoplist.txt")),
];

impl Resources {
    /// The small illustrative resource set compiled into the crate.
    pub fn builtin() -> Result<Self> {
        Self::from_texts(|file| {
            let text = BUILTIN.iter().find(|(f, _)| *f == file).map(|(_, t)| t.to_string());
            Ok((text.unwrap_or_default(), format!("builtin:{file}")))
        })
    }

    /// Loads the seven resource files from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        Self::from_texts(|file| read(dir, file))
    }

    fn from_texts(read: impl Fn(&str) -> Result<(String, String)>) -> Result<Self> {
        let (text, src) = read(NAMES_FILE)?;
        let mut names = NameDictionary::default();
        parse_name_csv(&text, &src, &mut names)?;
        if names.is_empty() {
            return Err(Error::record(src, 0, "name dictionary has no entries"));
        }
        let (text, src) = read(LEXICON_FILE)?;
        let lexicon = parse_lexicon(&text, &src)?;
        let list = |file: &str, kind: WordKind| -> Result<WordList> {
            let (text, src) = read(file)?;
            parse_word_list(&text, &src, kind)
        };
        let (text, src) = read(STOPLIST_FILE)?;
        let stoplist = token_lines(&text, &src)?.into_iter().map(|(_, t)| t).collect();
        Ok(Resources {
            names,
            lexicon,
            first_person: list(FIRST_PERSON_FILE, WordKind::FirstPerson)?,
            brand: list(BRAND_FILE, WordKind::BrandWord)?,
            interjection: list(INTERJECTION_FILE, WordKind::Interjection)?,
            emotion: list(EMOTION_FILE, WordKind::Emotion)?,
            stoplist,
        })
    }

    /// Canonical text of each resource, keyed by file name.
    pub fn canonical_files(&self) -> BTreeMap<&'static str, String> {
        BTreeMap::from([
            (NAMES_FILE, self.names.to_csv()),
            (LEXICON_FILE, lines(self.lexicon.words().iter().map(String::as_str))),
            (FIRST_PERSON_FILE, lines(self.first_person.words())),
            (BRAND_FILE, lines(self.brand.words())),
            (INTERJECTION_FILE, lines(self.interjection.words())),
            (EMOTION_FILE, lines(self.emotion.words())),
            (STOPLIST_FILE, lines(self.stoplist.iter().map(String::as_str))),
        ])
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (file, text) in self.canonical_files() {
            let path = dir.join(file);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    /// SHA-256 of each resource's canonical text, so formatting differences
    /// in the source files do not matter.
    pub fn fingerprints(&self) -> BTreeMap<String, String> {
        self.canonical_files()
            .into_iter()
            .map(|(file, text)| (file.to_string(), hex::encode(Sha256::digest(text.as_bytes()))))
            .collect()
    }

    /// Fails on the first resource whose fingerprint differs from `expected`.
    pub fn verify(&self, expected: &BTreeMap<String, String>) -> Result<()> {
        let found = self.fingerprints();
        for (name, want) in expected {
            let got = found.get(name).cloned().unwrap_or_default();
            if &got != want {
                return Err(Error::FingerprintMismatch {
                    resource: name.clone(),
                    expected: want.clone(),
                    found: got,
                });
            }
        }
        Ok(())
    }
}
