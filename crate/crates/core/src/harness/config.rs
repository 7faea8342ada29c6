use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusFilter, SentenceSplitter};
use crate::encoder::{ModelConfig, TrainConfig};
use crate::error::{Error, Result};
use crate::oracle::OracleConfig;
use crate::rerank::Aggregation;

/// A system that produces a summary for each test document.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum System {
    /// Oracle labels used as predictions; an upper bound.
    Oracle,
    Lead(usize),
    /// Headline text as the summary. Has no sentence selection.
    Headline,
    HeadlineCos,
    Model(Aggregation),
}

impl System {
    pub fn needs_model(&self) -> bool {
        matches!(self, System::HeadlineCos | System::Model(_))
    }

    /// Whether the system selects sentences (and so has PRF scores).
    pub fn selects(&self) -> bool {
        !matches!(self, System::Headline)
    }

    /// Aggregation rule for model-backed systems.
    pub fn aggregation(&self) -> Option<Aggregation> {
        match *self {
            System::HeadlineCos => Some(Aggregation::SimilarityOnly),
            System::Model(rule) => Some(rule),
            _ => None,
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            System::Oracle => f.write_str("oracle"),
            System::Lead(n) => write!(f, "lead-{n}"),
            System::Headline => f.write_str("hl"),
            System::HeadlineCos => f.write_str("hl-cos"),
            System::Model(rule) => write!(f, "{rule}"),
        }
    }
}

impl FromStr for System {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Ok(match lower.as_str() {
            "oracle" => System::Oracle,
            "hl" | "headline" => System::Headline,
            "hl-cos" | "hl_cos" => System::HeadlineCos,
            other => match other.strip_prefix("lead-") {
                Some(n) => {
                    let n: usize = n
                        .parse()
                        .map_err(|_| Error::Config(format!("bad lead size in `{s}`")))?;
                    if n == 0 {
                        return Err(Error::Config("lead-n needs n >= 1".into()));
                    }
                    System::Lead(n)
                }
                None => System::Model(other.parse()?),
            },
        })
    }
}

/// Parses a comma-separated system list.
pub fn parse_systems(list: &str) -> Result<Vec<System>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// Parses a comma-separated list of alphas.
pub fn parse_alpha_grid(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad alpha `{s}`")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub train: PathBuf,
    pub validation: PathBuf,
    pub test: PathBuf,
    /// Fixed vocabulary file; built from the training split when absent.
    pub vocab: Option<PathBuf>,
    /// Includes the three reserved entries.
    pub vocab_size: usize,
    pub min_count: usize,
    pub delimiters: Vec<String>,
    pub filter: CorpusFilter,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self {
            train: "data/train.jsonl".into(),
            validation: "data/validation.jsonl".into(),
            test: "data/test.jsonl".into(),
            vocab: None,
            vocab_size: 30_000,
            min_count: 1,
            delimiters: ["\n", ".", "!", "?"].map(String::from).to_vec(),
            filter: CorpusFilter::default(),
        }
    }
}

impl CorpusSection {
    pub fn splitter(&self) -> Result<SentenceSplitter> {
        let mut chars = Vec::with_capacity(self.delimiters.len());
        for d in &self.delimiters {
            let mut it = d.chars();
            match (it.next(), it.next()) {
                (Some(c), None) => chars.push(c),
                _ => {
                    return Err(Error::Config(format!(
                        "corpus.delimiters: `{d}` is not a single character"
                    )))
                }
            }
        }
        if chars.is_empty() {
            return Err(Error::Config("corpus.delimiters is empty".into()));
        }
        Ok(SentenceSplitter::new(chars))
    }
}

/// Seeded partition of one corpus file into the three split files named in
/// `[corpus]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub input: PathBuf,
    pub validation_fraction: f64,
    pub test_fraction: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            input: "data/all.jsonl".into(),
            validation_fraction: 0.1,
            test_fraction: 0.1,
        }
    }
}

/// Model dimensions. Vocabulary size and seed come from the corpus and the
/// top-level seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub d: usize,
    pub heads: usize,
    pub layers: usize,
    pub max_positions: usize,
    pub ln_epsilon: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        Self {
            d: m.d,
            heads: m.heads,
            layers: m.layers,
            max_positions: m.max_positions,
            ln_epsilon: m.ln_epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub systems: Vec<String>,
    pub threshold: f64,
    pub alpha_grid: Vec<f64>,
    pub bleu_max_n: usize,
    /// Write per-sentence states with labels for external plotting.
    pub embedding_dump: bool,
    /// Emit the per-sentence-index PRF series in the analysis.
    pub per_index: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            systems: ["oracle", "lead-2", "hl", "hl-cos", "sel-only", "sa", "hm"]
                .map(String::from)
                .to_vec(),
            threshold: 0.5,
            alpha_grid: (0..=10).map(|i| f64::from(i) / 10.0).collect(),
            bleu_max_n: 4,
            embedding_dump: false,
            per_index: true,
        }
    }
}

/// Full experiment description, read from a TOML file. Relative paths are
/// resolved against the directory holding the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub corpus: CorpusSection,
    pub split: SplitSection,
    pub oracle: OracleConfig,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub eval: EvalSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: "runs/default".into(),
            corpus: CorpusSection::default(),
            split: SplitSection::default(),
            oracle: OracleConfig::default(),
            model: ModelSection::default(),
            train: TrainConfig::default(),
            eval: EvalSection::default(),
        }
    }
}

/// Command-line overrides applied on top of a loaded config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub tau: Option<usize>,
    pub alpha_grid: Option<Vec<f64>>,
    pub systems: Option<Vec<String>>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads and validates a config file, resolving relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        fix(&mut self.corpus.train);
        fix(&mut self.corpus.validation);
        fix(&mut self.corpus.test);
        if let Some(v) = self.corpus.vocab.as_mut() {
            fix(v);
        }
        fix(&mut self.split.input);
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(tau) = o.tau {
            self.oracle.tau = tau;
        }
        if let Some(grid) = &o.alpha_grid {
            self.eval.alpha_grid = grid.clone();
        }
        if let Some(systems) = &o.systems {
            self.eval.systems = systems.clone();
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out_dir {
            self.out_dir = out.clone();
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn systems(&self) -> Result<Vec<System>> {
        let systems: Vec<System> = self
            .eval
            .systems
            .iter()
            .map(|s| s.parse())
            .collect::<Result<_>>()?;
        if systems.is_empty() {
            return Err(Error::Config("eval.systems is empty".into()));
        }
        let mut names: Vec<String> = systems.iter().map(System::to_string).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("eval.systems lists a system twice".into()));
        }
        Ok(systems)
    }

    /// Model config for a vocabulary of `vocab_size` entries.
    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            d: self.model.d,
            heads: self.model.heads,
            layers: self.model.layers,
            vocab_size,
            max_positions: self.model.max_positions,
            ln_epsilon: self.model.ln_epsilon,
            seed: self.seed,
        }
    }

    /// Checks everything that can be checked without touching the corpus.
    pub fn validate(&self) -> Result<()> {
        self.corpus.filter.validate()?;
        self.corpus.splitter()?;
        if self.corpus.vocab_size < 4 {
            return Err(Error::Config("corpus.vocab_size must be at least 4".into()));
        }
        if self.oracle.tau == 0 {
            return Err(Error::Config("oracle.tau must be at least 1".into()));
        }
        self.model_config(self.corpus.vocab_size).validate()?;
        self.train.validate()?;
        self.systems()?;
        if !(0.0..=1.0).contains(&self.eval.threshold) {
            return Err(Error::Config("eval.threshold outside [0, 1]".into()));
        }
        if self.eval.bleu_max_n == 0 {
            return Err(Error::Config("eval.bleu_max_n must be at least 1".into()));
        }
        if let Some(a) = self
            .eval
            .alpha_grid
            .iter()
            .find(|a| !(0.0..=1.0).contains(*a))
        {
            return Err(Error::Config(format!(
                "eval.alpha_grid value {a} outside [0, 1]"
            )));
        }
        let (v, t) = (self.split.validation_fraction, self.split.test_fraction);
        if !(v >= 0.0 && t >= 0.0 && v + t < 1.0) {
            return Err(Error::Config(
                "split fractions must be >= 0 and sum below 1".into(),
            ));
        }
        Ok(())
    }

    /// Fails when a split file named by the config is missing.
    pub fn require_splits(&self) -> Result<()> {
        for (name, p) in [
            ("train", &self.corpus.train),
            ("validation", &self.corpus.validation),
            ("test", &self.corpus.test),
        ] {
            if !p.is_file() {
                return Err(Error::Config(format!(
                    "corpus.{name}: {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn system_names_round_trip() {
        for name in [
            "oracle",
            "lead-2",
            "hl",
            "hl-cos",
            "sel-only",
            "sa",
            "hm",
            "weighted:0.25",
        ] {
            let s: System = name.parse().unwrap();
            assert_eq!(s.to_string(), name);
        }
        assert!("lead-0".parse::<System>().is_err());
        assert!("weighted:1.5".parse::<System>().is_err());
    }

    #[test]
    fn defaults_serialize_and_parse_back() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_key_is_config_error() {
        let err = ExperimentConfig::from_toml("sead = 3").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn relative_paths_follow_config_file() {
        let mut cfg =
            ExperimentConfig::from_toml("out_dir = \"o\"\n[corpus]\ntrain = \"/abs.jsonl\"")
                .unwrap();
        cfg.resolve_paths(Path::new("/cfg"));
        assert_eq!(cfg.out_dir, PathBuf::from("/cfg/o"));
        assert_eq!(cfg.corpus.train, PathBuf::from("/abs.jsonl"));
    }

    #[test]
    fn overrides_win() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply(&Overrides {
            tau: Some(2),
            systems: Some(vec!["lead-2".into()]),
            seed: Some(9),
            ..Overrides::default()
        });
        assert_eq!(cfg.oracle.tau, 2);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.systems().unwrap(), vec![System::Lead(2)]);
    }

    #[test]
    fn duplicate_or_empty_systems_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.eval.systems = vec!["sa".into(), "SA".into()];
        assert!(cfg.validate().is_err());
        cfg.eval.systems.clear();
        assert!(cfg.validate().is_err());
    }
}
