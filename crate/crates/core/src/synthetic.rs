//! Seeded toy corpora with a known extractive answer.
//!
//! Every document has the same layout (fixed sentence count and length) so
//! sentence boundaries fall on the same positions. Summaries repeat the
//! positive sentences verbatim, one per line.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::RawArticle;

/// Marks positive sentences in the cue corpora.
pub const CUE: &str = "cue";

#[derive(Debug, Clone)]
pub struct SyntheticArticle {
    pub article: RawArticle,
    /// 1-based indices of the intended summary sentences.
    pub positives: Vec<usize>,
    /// Positives recognisable only through the headline.
    pub headline_positives: Vec<usize>,
}

/// Layout of a generated corpus.
///
/// Sentences are filler words plus at most one marker word: the cue (always
/// positive), the headline's topic word (positive) or another topic word
/// (a distractor, negative). The body shows that a sentence is topical but
/// only the headline says which topic counts.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticConfig {
    pub documents: usize,
    pub sentences: usize,
    /// Words per sentence, marker included.
    pub sentence_len: usize,
    pub cue_positives: usize,
    /// Sentences carrying the headline's topic word.
    pub headline_positives: usize,
    /// Sentences carrying some other topic word.
    pub distractors: usize,
    pub topics: usize,
    /// Cue sentences also carry a topic word other than the headline's.
    pub cue_topic: bool,
    /// Headline words, markers included.
    pub headline_len: usize,
    pub filler_words: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            documents: 20,
            sentences: 6,
            sentence_len: 4,
            cue_positives: 2,
            headline_positives: 0,
            distractors: 0,
            topics: 8,
            cue_topic: false,
            headline_len: 4,
            filler_words: 40,
            seed: 1,
        }
    }
}

impl SyntheticConfig {
    /// Cue-only corpus: positives are separable from the body alone.
    pub fn separable(documents: usize, seed: u64) -> Self {
        Self {
            documents,
            seed,
            ..Self::default()
        }
    }

    /// Seven sentences: a cue positive (also topical, off-topic), a
    /// headline-topic positive, two off-topic distractors and three plain
    /// fillers.
    pub fn headline_signal(documents: usize, seed: u64) -> Self {
        Self {
            documents,
            sentences: 7,
            cue_positives: 1,
            headline_positives: 1,
            distractors: 2,
            cue_topic: true,
            seed,
            ..Self::default()
        }
    }
}

pub fn topic_word(t: usize) -> String {
    format!("t{t}")
}

pub fn generate(cfg: &SyntheticConfig) -> Vec<SyntheticArticle> {
    assert!(
        cfg.cue_positives + cfg.headline_positives + cfg.distractors <= cfg.sentences,
        "more marked sentences than sentences"
    );
    assert!(cfg.topics >= 2 && cfg.sentence_len >= 2 && cfg.filler_words >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let filler: Vec<String> = (0..cfg.filler_words).map(|i| format!("w{i}")).collect();
    let sentence = |rng: &mut ChaCha8Rng, markers: Vec<String>, len: usize| -> String {
        let mut words: Vec<String> = (0..len.saturating_sub(markers.len()))
            .map(|_| filler.choose(rng).expect("filler words").clone())
            .collect();
        for m in markers {
            let at = rng.gen_range(0..=words.len());
            words.insert(at, m);
        }
        words.join(" ")
    };
    (0..cfg.documents)
        .map(|doc_idx| {
            let topic = rng.gen_range(0..cfg.topics);
            let headline = sentence(&mut rng, vec![topic_word(topic)], cfg.headline_len);
            let mut slots: Vec<usize> = (0..cfg.sentences).collect();
            slots.shuffle(&mut rng);
            let (cue_slots, rest) = slots.split_at(cfg.cue_positives);
            let (hl_slots, rest) = rest.split_at(cfg.headline_positives);
            let distractor_slots = &rest[..cfg.distractors];

            let sentences: Vec<String> = (0..cfg.sentences)
                .map(|s| {
                    let other_topic = |rng: &mut ChaCha8Rng| {
                        topic_word((topic + rng.gen_range(1..cfg.topics)) % cfg.topics)
                    };
                    let marker = if cue_slots.contains(&s) {
                        let mut m = vec![CUE.to_string()];
                        if cfg.cue_topic {
                            m.push(other_topic(&mut rng));
                        }
                        m
                    } else if hl_slots.contains(&s) {
                        vec![topic_word(topic)]
                    } else if distractor_slots.contains(&s) {
                        vec![other_topic(&mut rng)]
                    } else {
                        Vec::new()
                    };
                    sentence(&mut rng, marker, cfg.sentence_len)
                })
                .collect();

            let mut positives: Vec<usize> =
                cue_slots.iter().chain(hl_slots).map(|s| s + 1).collect();
            positives.sort_unstable();
            let mut headline_positives: Vec<usize> = hl_slots.iter().map(|s| s + 1).collect();
            headline_positives.sort_unstable();
            let summary = positives
                .iter()
                .map(|&i| sentences[i - 1].clone())
                .collect::<Vec<_>>()
                .join("\n");
            SyntheticArticle {
                article: RawArticle {
                    id: format!("syn-{:04}", doc_idx),
                    headline,
                    body: sentences.join("\n"),
                    summary,
                    source: Some(if doc_idx % 2 == 0 { "even" } else { "odd" }.to_string()),
                    body_sentences: Some(sentences),
                },
                positives,
                headline_positives,
            }
        })
        .collect()
}
