//! Declarative evaluation configuration (TOML) and the `evaluate` driver.
//!
//! ```toml
//! seed = 13
//! lambda = 1.0
//! alpha = 0.05
//! test_fraction = 0.2
//!
//! [[dataset]]
//! name = "blm"
//! path = "blm.jsonl"
//! scheme = "binary_moral"
//! balance = true
//!
//! [[lexicon]]
//! name = "cs_blm"
//! path = "cs_blm.tsv"
//!
//! [[method]]
//! name = "CS"
//! kind = "lexicon"
//! lexicons = ["cs_blm"]
//!
//! [[experiment]]
//! name = "blm-in-domain"
//! train = "blm"
//! test = "blm"
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{emit_report, friedman_rank, run_matrix, ExperimentSpec, FeaturizerSpec, FitSource, FriedmanResult, ResultsTable, Workspace};
use crate::corpus::{balance, binarize, load_jsonl, preprocess, split, Scheme, SplitAssignment, Stopwords};
use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;

fn default_seed() -> u64 {
    0
}
fn default_lambda() -> f64 {
    1.0
}
fn default_alpha() -> f64 {
    0.05
}
fn default_test_fraction() -> f64 {
    0.2
}
fn default_stopwords() -> String {
    "english".into()
}
fn default_svd_k() -> usize {
    50
}
fn default_unigram_size() -> usize {
    5000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// `"english"` (bundled list), `"none"`, or a path to a word list.
    #[serde(default = "default_stopwords")]
    pub stopwords: String,
    #[serde(rename = "dataset", default)]
    pub datasets: Vec<DatasetConfig>,
    #[serde(rename = "lexicon", default)]
    pub lexicons: Vec<LexiconConfig>,
    #[serde(rename = "method", default)]
    pub methods: Vec<MethodConfig>,
    #[serde(rename = "experiment", default)]
    pub experiments: Vec<ExperimentConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    pub path: PathBuf,
    pub scheme: String,
    /// Collapse a ternary scheme to moral/neutral.
    #[serde(default)]
    pub binarize: bool,
    /// Undersample to equal class sizes.
    #[serde(default)]
    pub balance: bool,
    /// Optional split manifest; otherwise a stratified split is drawn.
    #[serde(default)]
    pub split: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconConfig {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Lexicon,
    #[serde(rename = "lexicon+stats")]
    LexiconStats,
    Unigram,
    Combined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub name: String,
    pub kind: MethodKind,
    #[serde(default)]
    pub lexicons: Vec<String>,
    #[serde(default = "default_unigram_size")]
    pub unigram_size: usize,
    #[serde(default = "default_svd_k")]
    pub svd_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub train: String,
    pub test: String,
}

impl EvaluationConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::parse(origin, line, e.message().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    fn featurizer(&self, method: &MethodConfig) -> Result<FeaturizerSpec> {
        let single = || match method.lexicons.as_slice() {
            [one] => Ok(one.clone()),
            other => Err(Error::Experiment(format!(
                "method {:?} needs exactly one lexicon, got {}",
                method.name,
                other.len()
            ))),
        };
        Ok(match method.kind {
            MethodKind::Lexicon => FeaturizerSpec::Lexicon { lexicon: single()?, with_stats: false },
            MethodKind::LexiconStats => FeaturizerSpec::Lexicon { lexicon: single()?, with_stats: true },
            MethodKind::Unigram => FeaturizerSpec::Unigram { size: method.unigram_size },
            MethodKind::Combined => {
                if method.lexicons.is_empty() {
                    return Err(Error::Experiment(format!("method {:?} lists no lexicons", method.name)));
                }
                FeaturizerSpec::Combined { lexicons: method.lexicons.clone(), svd_k: method.svd_k }
            }
        })
    }

    /// One spec per (method, experiment) pair, methods outermost.
    pub fn specs(&self) -> Result<Vec<ExperimentSpec>> {
        let mut out = Vec::with_capacity(self.methods.len() * self.experiments.len());
        for m in &self.methods {
            let featurizer = self.featurizer(m)?;
            for e in &self.experiments {
                out.push(ExperimentSpec {
                    method: m.name.clone(),
                    experiment: e.name.clone(),
                    featurizer: featurizer.clone(),
                    train: e.train.clone(),
                    test: e.test.clone(),
                    seed: self.seed,
                    lambda: self.lambda,
                    fit_on: FitSource::TrainSplit,
                });
            }
        }
        Ok(out)
    }

    /// Load, preprocess, binarize/balance and split every dataset; load every lexicon.
    pub fn workspace(&self, base: &Path) -> Result<Workspace> {
        let stopwords = match self.stopwords.as_str() {
            "english" => Stopwords::english(),
            "none" => Stopwords::empty(),
            path => Stopwords::load(&base.join(path))?,
        };
        let mut ws = Workspace::default();
        for d in &self.datasets {
            let scheme: Scheme = d.scheme.parse()?;
            let mut ds = preprocess(&load_jsonl(&base.join(&d.path), scheme)?, &stopwords);
            ds.name = d.name.clone();
            if d.binarize {
                ds = binarize(&ds)?;
            }
            if d.balance {
                ds = balance(&ds, self.seed)?;
            }
            ds = match &d.split {
                Some(p) => ds.with_split(SplitAssignment::load(&base.join(p))?)?,
                None => split(&ds, self.test_fraction, self.seed)?,
            };
            if ws.datasets.insert(d.name.clone(), ds).is_some() {
                return Err(Error::Experiment(format!("dataset {:?} declared twice", d.name)));
            }
        }
        for l in &self.lexicons {
            if ws.lexicons.insert(l.name.clone(), Lexicon::load(&base.join(&l.path))?).is_some() {
                return Err(Error::Experiment(format!("lexicon {:?} declared twice", l.name)));
            }
        }
        ws.svd.seed = self.seed;
        Ok(ws)
    }

    pub fn digest(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

#[derive(Debug, Clone)]
pub struct EvaluationOutcome {
    pub table: ResultsTable,
    pub ranks: FriedmanResult,
    pub files: Vec<PathBuf>,
}

/// Run the full matrix described by `config_path` and write the report to `out`.
pub fn evaluate(config_path: &Path, out: &Path, threads: usize) -> Result<EvaluationOutcome> {
    let config = EvaluationConfig::load(config_path)?;
    let undeclared = undeclared_datasets(&config);
    if !undeclared.is_empty() {
        return Err(Error::Experiment(format!("experiments reference undeclared datasets {undeclared:?}")));
    }
    let base = config_path.parent().unwrap_or_else(|| Path::new("."));
    let ws = config.workspace(base)?;
    let specs = config.specs()?;
    if specs.is_empty() {
        return Err(Error::Experiment("configuration defines no method × experiment cells".into()));
    }
    let table = run_matrix(&ws, &specs, threads);
    let ranks = friedman_rank(&table, config.alpha)?;
    emit_report(&table, &ranks, out)?;
    let files = [super::report::RESULTS_FILE, super::report::RANKS_FILE, super::report::TEXT_FILE]
        .iter()
        .map(|f| out.join(f))
        .collect();
    Ok(EvaluationOutcome { table, ranks, files })
}

/// Dataset names referenced by experiments but not declared.
fn undeclared_datasets(config: &EvaluationConfig) -> Vec<String> {
    let declared: BTreeMap<&str, ()> = config.datasets.iter().map(|d| (d.name.as_str(), ())).collect();
    let mut out: Vec<String> = config
        .experiments
        .iter()
        .flat_map(|e| [e.train.as_str(), e.test.as_str()])
        .filter(|n| !declared.contains_key(n))
        .map(str::to_owned)
        .collect();
    out.sort();
    out.dedup();
    out
}
