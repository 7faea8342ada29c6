use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use super::normalize::normalize_text;
use super::TokenSeq;
use crate::error::{Error, Result};

pub const UNK_ID: u32 = 0;
pub const CLS_ID: u32 = 1;
pub const SEP_ID: u32 = 2;

pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";

const RESERVED: [&str; 3] = [UNK, CLS, SEP];

/// Fixed token inventory. Ids 0..=2 are the unknown, sentence-start and
/// boundary markers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        for (id, reserved) in RESERVED.iter().enumerate() {
            if tokens.get(id).map(String::as_str) != Some(*reserved) {
                return Err(Error::Data(format!(
                    "vocabulary line {id} must be `{reserved}`"
                )));
            }
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (id, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), id as u32).is_some() {
                return Err(Error::Data(format!("duplicate vocabulary entry `{tok}`")));
            }
        }
        Ok(Self { tokens, index })
    }

    /// Frequency-ranked vocabulary over `surfaces`. Ties are broken
    /// lexicographically so the result does not depend on input order.
    /// `max_size` counts the three reserved entries.
    pub fn build<'a, I>(surfaces: I, max_size: usize, min_count: usize) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for s in surfaces {
            if !RESERVED.contains(&s) {
                *counts.entry(s).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count.max(1))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(
            ranked
                .into_iter()
                .take(max_size.saturating_sub(RESERVED.len()))
                .map(|(s, _)| s.to_string()),
        );
        Self::from_tokens(tokens).expect("reserved entries present and counts deduplicated")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tokens(text.lines().map(str::to_string).collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = self.tokens.join("\n");
        out.push('\n');
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, surface: &str) -> u32 {
        self.index.get(surface).copied().unwrap_or(UNK_ID)
    }

    pub fn surface(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// File contents as written by [`Vocabulary::save`].
    pub fn to_file_string(&self) -> String {
        let mut out = self.tokens.join("\n");
        out.push('\n');
        out
    }
}

/// Turns text into a token sequence over a fixed vocabulary.
pub trait Tokenizer {
    fn tokenize(&self, text: &str) -> TokenSeq;

    fn vocab(&self) -> &Vocabulary;
}

fn word_pattern() -> &'static Regex {
    static WORD: OnceLock<Regex> = OnceLock::new();
    WORD.get_or_init(|| Regex::new(r"[\p{P}\p{S}]|[^\s\p{P}\p{S}]+").expect("static regex"))
}

/// Splits on whitespace; every punctuation or symbol character is its own
/// token. Case is preserved.
pub fn split_words(text: &str) -> impl Iterator<Item = &str> {
    word_pattern().find_iter(text).map(|m| m.as_str())
}

/// Default tokenizer built on [`split_words`].
#[derive(Debug, Clone)]
pub struct WordTokenizer {
    vocab: Vocabulary,
}

impl WordTokenizer {
    pub fn new(vocab: Vocabulary) -> Self {
        Self { vocab }
    }
}

impl Tokenizer for WordTokenizer {
    fn tokenize(&self, text: &str) -> TokenSeq {
        let surfaces: Vec<String> = split_words(text).map(str::to_string).collect();
        let tokens = surfaces.iter().map(|s| self.vocab.id(s)).collect();
        TokenSeq { tokens, surfaces }
    }

    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }
}

/// Sentence segmentation on a delimiter set. Newlines end a sentence and are
/// dropped; any other delimiter stays attached to the sentence it ends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceSplitter {
    delimiters: Vec<char>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        Self {
            delimiters: vec!['\n', '.', '!', '?'],
        }
    }
}

impl SentenceSplitter {
    pub fn new(delimiters: impl IntoIterator<Item = char>) -> Self {
        Self {
            delimiters: delimiters.into_iter().collect(),
        }
    }

    /// Returns normalized, non-empty sentences. Fragments without any
    /// alphanumeric character are discarded.
    pub fn split(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut current = String::new();
        let mut flush = |buf: &mut String| {
            let s = normalize_text(buf);
            if s.chars().any(char::is_alphanumeric) {
                out.push(s);
            }
            buf.clear();
        };
        for c in text.chars() {
            if self.delimiters.contains(&c) {
                if c != '\n' {
                    current.push(c);
                }
                flush(&mut current);
            } else {
                current.push(c);
            }
        }
        flush(&mut current);
        out
    }
}
