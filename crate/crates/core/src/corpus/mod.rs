//! Article ingestion: loading line-delimited records, text cleanup,
//! sentence splitting, tokenization and corpus filtering.

mod normalize;
mod tokenizer;

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use normalize::normalize_text;
pub use tokenizer::{
    split_words, SentenceSplitter, Tokenizer, Vocabulary, WordTokenizer, CLS, CLS_ID, SEP, SEP_ID,
    UNK, UNK_ID,
};

/// One news item as read from disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawArticle {
    pub id: String,
    pub headline: String,
    pub body: String,
    pub summary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    /// Pre-split body; takes precedence over splitting `body`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_sentences: Option<Vec<String>>,
}

/// Parallel token ids and surface strings.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSeq {
    pub tokens: Vec<u32>,
    pub surfaces: Vec<String>,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Builds a marker-free sequence from surfaces; ids are left unknown.
    pub fn from_surfaces<S: AsRef<str>>(surfaces: &[S]) -> Self {
        Self {
            tokens: vec![UNK_ID; surfaces.len()],
            surfaces: surfaces.iter().map(|s| s.as_ref().to_string()).collect(),
        }
    }

    /// Wraps the sequence in sentence-start and boundary markers.
    pub fn wrapped(mut self) -> Self {
        self.tokens.insert(0, CLS_ID);
        self.surfaces.insert(0, CLS.to_string());
        self.tokens.push(SEP_ID);
        self.surfaces.push(SEP.to_string());
        self
    }

    /// Surfaces of every non-marker token.
    pub fn content(&self) -> impl Iterator<Item = &str> + '_ {
        self.tokens
            .iter()
            .zip(&self.surfaces)
            .filter(|(id, _)| **id != CLS_ID && **id != SEP_ID)
            .map(|(_, s)| s.as_str())
    }

    /// Concatenates the content of several sequences into one marker-free
    /// sequence.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a TokenSeq>) -> TokenSeq {
        let mut out = TokenSeq::default();
        for part in parts {
            for (&id, s) in part.tokens.iter().zip(&part.surfaces) {
                if id != CLS_ID && id != SEP_ID {
                    out.tokens.push(id);
                    out.surfaces.push(s.clone());
                }
            }
        }
        out
    }
}

/// A tokenized article. Headline and body sentences carry markers; summary
/// sentences do not.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub source: Option<String>,
    pub headline: TokenSeq,
    pub sentences: Vec<TokenSeq>,
    pub summary_sentences: Vec<TokenSeq>,
}

impl Document {
    /// Number of body tokens including markers.
    pub fn body_len(&self) -> usize {
        self.sentences.iter().map(TokenSeq::len).sum()
    }

    /// Position of each sentence-start marker in the flattened body.
    pub fn cls_positions(&self) -> Vec<usize> {
        let mut pos = 0;
        self.sentences
            .iter()
            .map(|s| {
                let p = pos;
                pos += s.len();
                p
            })
            .collect()
    }

    /// Drops trailing sentences until the body fits in `max_positions`
    /// tokens. A lone oversized first sentence is cut and re-terminated.
    /// Returns true when anything was removed.
    pub fn truncate_to(&mut self, max_positions: usize) -> bool {
        if self.body_len() <= max_positions {
            return false;
        }
        let mut used = 0;
        let mut keep = 0;
        for s in &self.sentences {
            if used + s.len() > max_positions {
                break;
            }
            used += s.len();
            keep += 1;
        }
        if keep == 0 {
            let first = &mut self.sentences[0];
            let cut = max_positions.max(3) - 1;
            first.tokens.truncate(cut);
            first.surfaces.truncate(cut);
            first.tokens.push(SEP_ID);
            first.surfaces.push(SEP.to_string());
            keep = 1;
        }
        self.sentences.truncate(keep);
        true
    }
}

/// Bounds applied to tokenized articles. Token bounds count every body token
/// including markers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusFilter {
    pub min_sentences: usize,
    pub max_sentences: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
}

impl Default for CorpusFilter {
    fn default() -> Self {
        Self {
            min_sentences: 3,
            max_sentences: 30,
            min_tokens: 300,
            max_tokens: 512,
        }
    }
}

/// The bound a document failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterViolation {
    MinSentences { found: usize, bound: usize },
    MaxSentences { found: usize, bound: usize },
    MinTokens { found: usize, bound: usize },
    MaxTokens { found: usize, bound: usize },
}

impl fmt::Display for FilterViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (name, found, bound) = match *self {
            FilterViolation::MinSentences { found, bound } => ("min_sentences", found, bound),
            FilterViolation::MaxSentences { found, bound } => ("max_sentences", found, bound),
            FilterViolation::MinTokens { found, bound } => ("min_tokens", found, bound),
            FilterViolation::MaxTokens { found, bound } => ("max_tokens", found, bound),
        };
        write!(f, "{name} violated: found {found}, bound {bound}")
    }
}

impl CorpusFilter {
    pub fn validate(&self) -> Result<()> {
        if self.min_sentences > self.max_sentences || self.min_tokens > self.max_tokens {
            return Err(Error::Config(format!(
                "corpus filter bounds out of order: {self:?}"
            )));
        }
        Ok(())
    }

    /// First violated bound, sentence bounds before token bounds.
    pub fn check(&self, doc: &Document) -> Option<FilterViolation> {
        let n = doc.sentences.len();
        let t = doc.body_len();
        if n < self.min_sentences {
            Some(FilterViolation::MinSentences {
                found: n,
                bound: self.min_sentences,
            })
        } else if n > self.max_sentences {
            Some(FilterViolation::MaxSentences {
                found: n,
                bound: self.max_sentences,
            })
        } else if t < self.min_tokens {
            Some(FilterViolation::MinTokens {
                found: t,
                bound: self.min_tokens,
            })
        } else if t > self.max_tokens {
            Some(FilterViolation::MaxTokens {
                found: t,
                bound: self.max_tokens,
            })
        } else {
            None
        }
    }
}

/// Why a line of the corpus file was not turned into an article.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedCorpus {
    pub articles: Vec<RawArticle>,
    pub errors: Vec<RecordError>,
    pub duplicates: usize,
}

impl LoadedCorpus {
    pub fn dropped(&self) -> usize {
        self.errors.len() + self.duplicates
    }
}

#[derive(Deserialize)]
struct Record {
    id: Option<String>,
    headline: Option<String>,
    body: Option<String>,
    summary: Option<String>,
    source: Option<String>,
    body_sentences: Option<Vec<String>>,
}

fn body_key(article: &RawArticle) -> String {
    match &article.body_sentences {
        Some(sents) => sents
            .iter()
            .map(|s| normalize_text(s))
            .collect::<Vec<_>>()
            .join("\n"),
        None => normalize_text(&article.body),
    }
}

fn parse_record(line: &str) -> std::result::Result<RawArticle, String> {
    let rec: Record = serde_json::from_str(line).map_err(|e| format!("malformed record: {e}"))?;
    let required = |name: &str, v: Option<String>| -> std::result::Result<String, String> {
        match v {
            Some(s) if !normalize_text(&s).is_empty() => Ok(s),
            Some(_) => Err(format!("empty field `{name}`")),
            None => Err(format!("missing field `{name}`")),
        }
    };
    let id = required("id", rec.id)?;
    let headline = required("headline", rec.headline)?;
    let summary = required("summary", rec.summary)?;
    let body_sentences = rec.body_sentences.filter(|s| !s.is_empty());
    let body = match (rec.body, &body_sentences) {
        (Some(b), _) if !normalize_text(&b).is_empty() => b,
        (b, Some(sents)) => b.unwrap_or_else(|| sents.join("\n")),
        (b, None) => required("body", b)?,
    };
    Ok(RawArticle {
        id,
        headline,
        body,
        summary,
        source: rec.source.filter(|s| !s.trim().is_empty()),
        body_sentences,
    })
}

/// Reads a line-delimited corpus file. Records with missing or empty
/// required fields, malformed JSON or a repeated id are reported in
/// `errors`; repeated bodies keep their first occurrence.
pub fn load_corpus(path: &Path) -> Result<LoadedCorpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_corpus(&text))
}

pub fn parse_corpus(text: &str) -> LoadedCorpus {
    let mut out = LoadedCorpus::default();
    let mut seen_bodies = HashSet::new();
    let mut seen_ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(line) {
            Ok(article) => {
                if !seen_bodies.insert(body_key(&article)) {
                    out.duplicates += 1;
                } else if !seen_ids.insert(article.id.clone()) {
                    out.errors.push(RecordError {
                        line: i + 1,
                        reason: format!("duplicate id `{}`", article.id),
                    });
                } else {
                    out.articles.push(article);
                }
            }
            Err(reason) => out.errors.push(RecordError {
                line: i + 1,
                reason,
            }),
        }
    }
    out
}

/// Writes articles in the corpus file format.
pub fn write_corpus(path: &Path, articles: &[RawArticle]) -> Result<()> {
    crate::jsonl::write(path, articles)
}

/// Result of tokenizing one article.
#[derive(Debug, Clone)]
pub struct TokenizedDocument {
    pub document: Document,
    /// Set when the document must be excluded by the corpus filter.
    pub violation: Option<FilterViolation>,
}

/// Splits, normalizes and tokenizes an article. A supplied
/// `body_sentences` list bypasses the splitter.
pub fn split_and_tokenize(
    article: &RawArticle,
    tokenizer: &dyn Tokenizer,
    splitter: &SentenceSplitter,
    filter: &CorpusFilter,
) -> Result<TokenizedDocument> {
    let body_sentences: Vec<String> = match &article.body_sentences {
        Some(pre) => pre
            .iter()
            .map(|s| normalize_text(s))
            .filter(|s| !s.is_empty())
            .collect(),
        None => splitter.split(&article.body),
    };
    if body_sentences.is_empty() {
        return Err(Error::Data(format!(
            "article `{}`: sentence splitter produced no sentences",
            article.id
        )));
    }
    let summary_sentences: Vec<TokenSeq> = splitter
        .split(&article.summary)
        .iter()
        .map(|s| tokenizer.tokenize(s))
        .filter(|s| !s.is_empty())
        .collect();
    if summary_sentences.is_empty() {
        return Err(Error::Data(format!(
            "article `{}`: summary has no sentences",
            article.id
        )));
    }

    let document = Document {
        id: article.id.clone(),
        source: article.source.clone(),
        headline: tokenizer
            .tokenize(&normalize_text(&article.headline))
            .wrapped(),
        sentences: body_sentences
            .iter()
            .map(|s| tokenizer.tokenize(s))
            .filter(|s| !s.is_empty())
            .map(TokenSeq::wrapped)
            .collect(),
        summary_sentences,
    };
    let violation = filter.check(&document);
    Ok(TokenizedDocument {
        document,
        violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, body: &str) -> String {
        format!(r#"{{"id":"{id}","headline":"h {id}","body":"{body}","summary":"s {id}."}}"#)
    }

    fn tokenizer_for(words: &[&str]) -> WordTokenizer {
        WordTokenizer::new(Vocabulary::build(words.iter().copied(), 1000, 1))
    }

    #[test]
    fn three_valid_records() {
        let text = [record("a", "x."), record("b", "y."), record("c", "z.")].join("\n");
        let c = parse_corpus(&text);
        assert_eq!(c.articles.len(), 3);
        assert_eq!(c.dropped(), 0);
        let ids: Vec<_> = c.articles.iter().map(|a| a.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn duplicate_body_keeps_first() {
        let text = [record("a", "same body."), record("b", "same  body.")].join("\n");
        let c = parse_corpus(&text);
        assert_eq!(c.articles.len(), 1);
        assert_eq!(c.articles[0].id, "a");
        assert_eq!(c.dropped(), 1);
        assert_eq!(c.duplicates, 1);
    }

    #[test]
    fn missing_summary_is_reported() {
        let text = [
            record("a", "x."),
            r#"{"id":"b","headline":"h","body":"y."}"#.to_string(),
        ]
        .join("\n");
        let c = parse_corpus(&text);
        assert_eq!(c.articles.len(), 1);
        assert_eq!(c.errors.len(), 1);
        assert_eq!(c.errors[0].line, 2);
        assert!(c.errors[0].reason.contains("summary"));
    }

    #[test]
    fn malformed_and_empty_fields() {
        let text = [
            "{not json".to_string(),
            r#"{"id":"x","headline":"<b></b>","body":"y.","summary":"s."}"#.to_string(),
            record("ok", "fine."),
        ]
        .join("\n");
        let c = parse_corpus(&text);
        assert_eq!(c.articles.len(), 1);
        assert_eq!(c.errors.len(), 2);
    }

    #[test]
    fn unreadable_file_is_io_error() {
        let err = load_corpus(Path::new("/nonexistent/corpus.jsonl")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn delimiter_split_wraps_sentences() {
        let tok = tokenizer_for(&["s1", "s2", ".", "h", "sum"]);
        let art = RawArticle {
            id: "d".into(),
            headline: "h".into(),
            body: "s1 . s2 .".into(),
            summary: "sum".into(),
            source: None,
            body_sentences: None,
        };
        let filter = CorpusFilter {
            min_sentences: 1,
            min_tokens: 0,
            ..CorpusFilter::default()
        };
        let out = split_and_tokenize(&art, &tok, &SentenceSplitter::default(), &filter).unwrap();
        let doc = out.document;
        assert_eq!(doc.sentences.len(), 2);
        for s in &doc.sentences {
            assert_eq!(s.tokens[0], CLS_ID);
            assert_eq!(*s.tokens.last().unwrap(), SEP_ID);
            assert_eq!(s.tokens.iter().filter(|&&t| t == CLS_ID).count(), 1);
        }
        assert_eq!(doc.sentences[0].surfaces, ["[CLS]", "s1", ".", "[SEP]"]);
        assert_eq!(doc.headline.surfaces, ["[CLS]", "h", "[SEP]"]);
        assert_eq!(doc.summary_sentences[0].surfaces, ["sum"]);
        assert!(out.violation.is_none());
    }

    #[test]
    fn presplit_sentences_bypass_splitter() {
        let tok = tokenizer_for(&["a", "b", "."]);
        let art = RawArticle {
            id: "d".into(),
            headline: "a".into(),
            body: String::new(),
            summary: "a".into(),
            source: None,
            body_sentences: Some(vec!["a. b".into(), "b".into()]),
        };
        let out = split_and_tokenize(
            &art,
            &tok,
            &SentenceSplitter::default(),
            &CorpusFilter::default(),
        )
        .unwrap();
        assert_eq!(out.document.sentences.len(), 2);
        assert_eq!(
            out.document.sentences[0].surfaces,
            ["[CLS]", "a", ".", "b", "[SEP]"]
        );
    }

    #[test]
    fn thirty_one_sentences_flagged() {
        let tok = tokenizer_for(&["w", "."]);
        let art = RawArticle {
            id: "long".into(),
            headline: "w".into(),
            body: "w . ".repeat(31),
            summary: "w".into(),
            source: None,
            body_sentences: None,
        };
        let filter = CorpusFilter {
            min_tokens: 0,
            ..CorpusFilter::default()
        };
        let out = split_and_tokenize(&art, &tok, &SentenceSplitter::default(), &filter).unwrap();
        assert_eq!(out.document.sentences.len(), 31);
        let v = out.violation.unwrap();
        assert_eq!(
            v,
            FilterViolation::MaxSentences {
                found: 31,
                bound: 30
            }
        );
        assert!(v.to_string().contains("max_sentences"));
    }

    #[test]
    fn empty_body_rejected() {
        let tok = tokenizer_for(&[]);
        let art = RawArticle {
            id: "e".into(),
            headline: "h".into(),
            body: "...".into(),
            summary: "s".into(),
            source: None,
            body_sentences: None,
        };
        let err = split_and_tokenize(
            &art,
            &tok,
            &SentenceSplitter::default(),
            &CorpusFilter::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn token_filter_is_article_level() {
        let tok = tokenizer_for(&["w"]);
        let art = RawArticle {
            id: "t".into(),
            headline: "w".into(),
            body: "w w.\nw.\nw.".into(),
            summary: "w".into(),
            source: None,
            body_sentences: None,
        };
        let filter = CorpusFilter {
            min_tokens: 20,
            ..CorpusFilter::default()
        };
        let out = split_and_tokenize(&art, &tok, &SentenceSplitter::default(), &filter).unwrap();
        assert!(matches!(
            out.violation,
            Some(FilterViolation::MinTokens {
                found: 13,
                bound: 20
            })
        ));
    }

    #[test]
    fn truncation_drops_whole_sentences() {
        let mut doc = Document {
            id: "x".into(),
            source: None,
            headline: TokenSeq::from_surfaces(&["h"]).wrapped(),
            sentences: vec![
                TokenSeq::from_surfaces(&["a", "b"]).wrapped(),
                TokenSeq::from_surfaces(&["c", "d"]).wrapped(),
            ],
            summary_sentences: vec![],
        };
        assert!(!doc.truncate_to(8));
        assert!(doc.truncate_to(7));
        assert_eq!(doc.sentences.len(), 1);
        assert!(doc.truncate_to(3));
        assert_eq!(doc.sentences[0].surfaces, ["[CLS]", "a", "[SEP]"]);
    }
}
