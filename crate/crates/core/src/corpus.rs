//! Labeled datasets: ingestion, token normalization, binarization, balancing
//! and train/test or k-fold partitioning.
//!
//! Every transformation returns a new [`LabeledDataset`]; randomized ones are
//! pure functions of their input and seed.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

/// Minimum token length kept by [`preprocess`].
pub const MIN_TOKEN_CHARS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Liberty | Neutral | Oppression
    Ternary,
    /// Moral | Neutral
    BinaryMoral,
    /// Libertarian | Conservative
    BinarySide,
}

impl Scheme {
    pub fn classes(self) -> &'static [&'static str] {
        match self {
            Scheme::Ternary => &["Liberty", "Neutral", "Oppression"],
            Scheme::BinaryMoral => &["Moral", "Neutral"],
            Scheme::BinarySide => &["Libertarian", "Conservative"],
        }
    }

    pub fn is_binary(self) -> bool {
        self.classes().len() == 2
    }

    /// Class treated as label `1` by the binary classifier.
    pub fn positive_class(self) -> Option<&'static str> {
        match self {
            Scheme::Ternary => None,
            Scheme::BinaryMoral => Some("Moral"),
            Scheme::BinarySide => Some("Libertarian"),
        }
    }

    /// Default (liberty-leaning, oppression-leaning) class pair used to orient
    /// lexicon scores.
    pub fn polarity_classes(self) -> (&'static str, &'static str) {
        match self {
            Scheme::Ternary => ("Liberty", "Oppression"),
            Scheme::BinaryMoral => ("Moral", "Neutral"),
            Scheme::BinarySide => ("Libertarian", "Conservative"),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Ternary => "ternary",
            Scheme::BinaryMoral => "binary_moral",
            Scheme::BinarySide => "binary_side",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ternary" => Ok(Scheme::Ternary),
            "binary_moral" => Ok(Scheme::BinaryMoral),
            "binary_side" => Ok(Scheme::BinarySide),
            other => Err(Error::Corpus(format!(
                "unknown scheme {other:?} (expected ternary, binary_moral or binary_side)"
            ))),
        }
    }
}

/// A label value tied to its scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label {
    scheme: Scheme,
    class: usize,
}

impl Label {
    pub fn parse(scheme: Scheme, name: &str) -> Result<Self> {
        scheme
            .classes()
            .iter()
            .position(|c| *c == name)
            .map(|class| Label { scheme, class })
            .ok_or_else(|| {
                Error::Corpus(format!("label {name:?} is not a member of scheme {scheme}"))
            })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Position of the class within [`Scheme::classes`].
    pub fn class_index(&self) -> usize {
        self.class
    }

    pub fn name(&self) -> &'static str {
        self.scheme.classes()[self.class]
    }

    /// `true` for the scheme's positive class. Panics on a ternary label.
    pub fn is_positive(&self) -> bool {
        let positive = self
            .scheme
            .positive_class()
            .expect("binary target requested from a ternary label");
        self.name() == positive
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub raw_text: String,
    pub tokens: Vec<String>,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Train,
    Test,
}

/// How documents are assigned to evaluation partitions.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitAssignment {
    TrainTest(BTreeMap<String, Side>),
    Folds(BTreeMap<String, usize>),
}

impl SplitAssignment {
    pub fn to_json(&self) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = match self {
            SplitAssignment::TrainTest(m) => m
                .iter()
                .map(|(id, side)| {
                    let v = match side {
                        Side::Train => "train",
                        Side::Test => "test",
                    };
                    (id.clone(), serde_json::Value::from(v))
                })
                .collect(),
            SplitAssignment::Folds(m) => m
                .iter()
                .map(|(id, fold)| (id.clone(), serde_json::Value::from(*fold)))
                .collect(),
        };
        serde_json::Value::Object(map)
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Corpus("split manifest must be a JSON object".into()))?;
        let mut sides = BTreeMap::new();
        let mut folds = BTreeMap::new();
        for (id, v) in obj {
            match v {
                serde_json::Value::String(s) if s == "train" => {
                    sides.insert(id.clone(), Side::Train);
                }
                serde_json::Value::String(s) if s == "test" => {
                    sides.insert(id.clone(), Side::Test);
                }
                serde_json::Value::Number(n) if n.as_u64().is_some() => {
                    folds.insert(id.clone(), n.as_u64().unwrap() as usize);
                }
                other => {
                    return Err(Error::Corpus(format!(
                        "split manifest entry {id:?} has invalid value {other}"
                    )))
                }
            }
        }
        match (sides.is_empty(), folds.is_empty()) {
            (false, true) => Ok(SplitAssignment::TrainTest(sides)),
            (true, false) => Ok(SplitAssignment::Folds(folds)),
            (true, true) => Ok(SplitAssignment::TrainTest(sides)),
            (false, false) => Err(Error::Corpus(
                "split manifest mixes train/test sides with fold indices".into(),
            )),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.to_json())
            .map_err(|e| Error::Corpus(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
        Self::from_json(&value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub name: String,
    pub scheme: Scheme,
    pub documents: Vec<Document>,
    pub split_assignment: Option<SplitAssignment>,
}

#[derive(Deserialize)]
struct Record {
    id: String,
    text: String,
    label: String,
    #[serde(default)]
    tokens: Option<Vec<String>>,
}

#[derive(Serialize)]
struct OutRecord<'a> {
    id: &'a str,
    text: &'a str,
    label: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    tokens: Option<&'a [String]>,
}

impl LabeledDataset {
    pub fn new(name: impl Into<String>, scheme: Scheme, documents: Vec<Document>) -> Result<Self> {
        let name = name.into();
        let mut seen = HashSet::new();
        for doc in &documents {
            if doc.label.scheme() != scheme {
                return Err(Error::Corpus(format!(
                    "document {:?} has a {} label in a {} dataset",
                    doc.id,
                    doc.label.scheme(),
                    scheme
                )));
            }
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::Corpus(format!("duplicate document id {:?}", doc.id)));
            }
        }
        Ok(LabeledDataset {
            name,
            scheme,
            documents,
            split_assignment: None,
        })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Number of documents per class, indexed like [`Scheme::classes`].
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.scheme.classes().len()];
        for doc in &self.documents {
            counts[doc.label.class_index()] += 1;
        }
        counts
    }

    /// Ids of documents whose token list is empty.
    pub fn empty_documents(&self) -> Vec<&str> {
        self.documents
            .iter()
            .filter(|d| d.tokens.is_empty())
            .map(|d| d.id.as_str())
            .collect()
    }

    /// Explicit filter removing documents with no tokens.
    pub fn drop_empty(&self) -> LabeledDataset {
        self.filtered(|d| !d.tokens.is_empty())
    }

    pub fn token_lists(&self) -> Vec<&[String]> {
        self.documents.iter().map(|d| d.tokens.as_slice()).collect()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.documents.iter().map(|d| d.id.as_str())
    }

    /// Documents on one side of the train/test assignment.
    pub fn side(&self, side: Side) -> Result<LabeledDataset> {
        match &self.split_assignment {
            Some(SplitAssignment::TrainTest(map)) => {
                let mut out = self.filtered(|d| map.get(&d.id) == Some(&side));
                out.name = format!("{}:{}", self.name, side_name(side));
                Ok(out)
            }
            _ => Err(Error::Corpus(format!(
                "dataset {:?} has no train/test assignment",
                self.name
            ))),
        }
    }

    /// Attach an externally loaded split manifest; every document must be covered.
    pub fn with_split(mut self, assignment: SplitAssignment) -> Result<Self> {
        let covered = |id: &str| match &assignment {
            SplitAssignment::TrainTest(m) => m.contains_key(id),
            SplitAssignment::Folds(m) => m.contains_key(id),
        };
        if let Some(doc) = self.documents.iter().find(|d| !covered(&d.id)) {
            return Err(Error::Corpus(format!(
                "split manifest does not assign document {:?}",
                doc.id
            )));
        }
        self.split_assignment = Some(assignment);
        Ok(self)
    }

    fn filtered(&self, keep: impl Fn(&Document) -> bool) -> LabeledDataset {
        LabeledDataset {
            name: self.name.clone(),
            scheme: self.scheme,
            documents: self.documents.iter().filter(|d| keep(d)).cloned().collect(),
            split_assignment: None,
        }
    }

    /// Write as JSONL. Tokens are included when `with_tokens` is set.
    pub fn save_jsonl(&self, path: &Path, with_tokens: bool) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        for doc in &self.documents {
            let rec = OutRecord {
                id: &doc.id,
                text: &doc.raw_text,
                label: doc.label.name(),
                tokens: with_tokens.then_some(doc.tokens.as_slice()),
            };
            let line = serde_json::to_string(&rec).map_err(|e| Error::Corpus(e.to_string()))?;
            writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

fn side_name(side: Side) -> &'static str {
    match side {
        Side::Train => "train",
        Side::Test => "test",
    }
}

/// Read a JSONL dataset (`{"id", "text", "label"}` per line). An optional
/// `tokens` array (as written by a preprocessing run) is kept; otherwise
/// tokens are left empty.
pub fn load_jsonl(path: &Path, scheme: Scheme) -> Result<LabeledDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut documents = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, lineno, format!("malformed record: {e}")))?;
        let label =
            Label::parse(scheme, &rec.label).map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        if !seen.insert(rec.id.clone()) {
            return Err(Error::parse(
                path,
                lineno,
                format!("duplicate document id {:?}", rec.id),
            ));
        }
        documents.push(Document {
            id: rec.id,
            raw_text: rec.text,
            tokens: rec.tokens.unwrap_or_default(),
            label,
        });
    }
    if documents.is_empty() {
        log::warn!("{}: dataset contains no documents", path.display());
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(LabeledDataset {
        name,
        scheme,
        documents,
        split_assignment: None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords(BTreeSet<String>);

impl Stopwords {
    /// The bundled English list.
    pub fn english() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }

    pub fn empty() -> Self {
        Stopwords(BTreeSet::new())
    }

    pub fn parse(text: &str) -> Self {
        Stopwords(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Lowercase, split on every non-alphabetic character, drop stopwords and
/// tokens shorter than [`MIN_TOKEN_CHARS`].
pub fn tokenize(text: &str, stopwords: &Stopwords) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphabetic())
        .filter(|t| t.chars().count() >= MIN_TOKEN_CHARS && !stopwords.contains(t))
        .map(str::to_owned)
        .collect()
}

pub fn preprocess(dataset: &LabeledDataset, stopwords: &Stopwords) -> LabeledDataset {
    let documents = dataset
        .documents
        .iter()
        .map(|d| Document {
            tokens: tokenize(&d.raw_text, stopwords),
            ..d.clone()
        })
        .collect::<Vec<_>>();
    let empty = documents.iter().filter(|d| d.tokens.is_empty()).count();
    if empty > 0 {
        log::warn!(
            "{}: {empty} document(s) have no tokens after preprocessing",
            dataset.name
        );
    }
    LabeledDataset {
        documents,
        ..dataset.clone()
    }
}

/// Collapse Liberty and Oppression into Moral.
pub fn binarize(dataset: &LabeledDataset) -> Result<LabeledDataset> {
    if dataset.scheme != Scheme::Ternary {
        return Err(Error::Corpus(format!(
            "binarize requires a ternary dataset, got {}",
            dataset.scheme
        )));
    }
    let documents = dataset
        .documents
        .iter()
        .map(|d| {
            let target = if d.label.name() == "Neutral" {
                "Neutral"
            } else {
                "Moral"
            };
            Document {
                label: Label::parse(Scheme::BinaryMoral, target).expect("static label"),
                ..d.clone()
            }
        })
        .collect();
    Ok(LabeledDataset {
        name: dataset.name.clone(),
        scheme: Scheme::BinaryMoral,
        documents,
        split_assignment: dataset.split_assignment.clone(),
    })
}

/// Undersample the majority class to the minority count.
pub fn balance(dataset: &LabeledDataset, seed: u64) -> Result<LabeledDataset> {
    let counts = dataset.class_counts();
    let present: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] > 0).collect();
    if present.len() != 2 {
        return Err(Error::Corpus(format!(
            "balance requires exactly two classes present, found {}",
            present.len()
        )));
    }
    let (a, b) = (present[0], present[1]);
    if counts[a] == counts[b] {
        return Ok(LabeledDataset {
            split_assignment: None,
            ..dataset.clone()
        });
    }
    let (majority, minority) = if counts[a] > counts[b] { (a, b) } else { (b, a) };
    let mut majority_idx: Vec<usize> = dataset
        .documents
        .iter()
        .enumerate()
        .filter(|(_, d)| d.label.class_index() == majority)
        .map(|(i, _)| i)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    majority_idx.shuffle(&mut rng);
    let keep: HashSet<usize> = majority_idx[..counts[minority]].iter().copied().collect();
    let documents = dataset
        .documents
        .iter()
        .enumerate()
        .filter(|(i, d)| d.label.class_index() == minority || keep.contains(i))
        .map(|(_, d)| d.clone())
        .collect();
    Ok(LabeledDataset {
        name: dataset.name.clone(),
        scheme: dataset.scheme,
        documents,
        split_assignment: None,
    })
}

/// Shuffled document indices grouped by class, in class order.
fn shuffled_by_class(dataset: &LabeledDataset, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); dataset.scheme.classes().len()];
    for (i, d) in dataset.documents.iter().enumerate() {
        groups[d.label.class_index()].push(i);
    }
    for g in &mut groups {
        g.shuffle(rng);
    }
    groups
}

/// Stratified random train/test partition.
pub fn split(dataset: &LabeledDataset, test_fraction: f64, seed: u64) -> Result<LabeledDataset> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Corpus(format!(
            "test fraction must lie strictly between 0 and 1, got {test_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = BTreeMap::new();
    for (class, group) in shuffled_by_class(dataset, &mut rng).into_iter().enumerate() {
        if group.is_empty() {
            continue;
        }
        let n_test = (test_fraction * group.len() as f64).round() as usize;
        if n_test == 0 || n_test == group.len() {
            log::warn!(
                "{}: class {} has {} document(s), too few to appear on both sides; all placed in train",
                dataset.name,
                dataset.scheme.classes()[class],
                group.len()
            );
        }
        let both_sides = n_test > 0 && n_test < group.len();
        for (rank, &idx) in group.iter().enumerate() {
            let side = if both_sides && rank < n_test {
                Side::Test
            } else {
                Side::Train
            };
            assignment.insert(dataset.documents[idx].id.clone(), side);
        }
    }
    Ok(LabeledDataset {
        split_assignment: Some(SplitAssignment::TrainTest(assignment)),
        ..dataset.clone()
    })
}

/// Stratified k-fold assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Folds {
    pub k: usize,
    /// Fold index per document, aligned with the dataset's document order.
    pub fold_of: Vec<usize>,
}

impl Folds {
    /// Indices of documents in `fold`.
    pub fn members(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == fold)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn to_assignment(&self, dataset: &LabeledDataset) -> SplitAssignment {
        SplitAssignment::Folds(
            dataset
                .documents
                .iter()
                .zip(&self.fold_of)
                .map(|(d, &f)| (d.id.clone(), f))
                .collect(),
        )
    }
}

pub fn kfold(dataset: &LabeledDataset, k: usize, seed: u64) -> Result<Folds> {
    if k < 2 {
        return Err(Error::Corpus(format!("k-fold requires k >= 2, got {k}")));
    }
    if k > dataset.len() {
        return Err(Error::Corpus(format!(
            "k-fold requires k <= number of documents ({k} > {})",
            dataset.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; dataset.len()];
    // Dealing round-robin across the concatenated class groups keeps folds
    // stratified and within one document of each other in size.
    let order = shuffled_by_class(dataset, &mut rng).concat();
    for (pos, idx) in order.into_iter().enumerate() {
        fold_of[idx] = pos % k;
    }
    Ok(Folds { k, fold_of })
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn arb_dataset() -> impl Strategy<Value = LabeledDataset> {
        prop::collection::vec(any::<bool>(), 2..60).prop_map(|flags| {
            let docs = flags
                .iter()
                .enumerate()
                .map(|(i, &pos)| Document {
                    id: format!("doc{i}"),
                    raw_text: String::new(),
                    tokens: Vec::new(),
                    label: Label::parse(Scheme::BinaryMoral, if pos { "Moral" } else { "Neutral" })
                        .unwrap(),
                })
                .collect();
            LabeledDataset::new("p", Scheme::BinaryMoral, docs).unwrap()
        })
    }

    proptest! {
        #[test]
        fn tokenize_idempotent(text in "\\PC{0,80}") {
            let sw = Stopwords::english();
            let once = tokenize(&text, &sw);
            let twice = tokenize(&once.join(" "), &sw);
            prop_assert_eq!(&once, &twice);
            for t in &once {
                prop_assert!(t.chars().count() >= MIN_TOKEN_CHARS);
                prop_assert!(t.chars().all(char::is_alphabetic));
                prop_assert!(!sw.contains(t));
            }
        }

        #[test]
        fn split_and_kfold_partition(ds in arb_dataset(), seed in 0u64..1000, k in 2usize..6) {
            let s = split(&ds, 0.3, seed).unwrap();
            let mut ids: Vec<String> = s.side(Side::Train).unwrap().ids().map(String::from).collect();
            ids.extend(s.side(Side::Test).unwrap().ids().map(String::from));
            ids.sort();
            let mut all: Vec<String> = ds.ids().map(String::from).collect();
            all.sort();
            prop_assert_eq!(ids, all);

            if k <= ds.len() {
                let folds = kfold(&ds, k, seed).unwrap();
                let sizes = folds.sizes();
                prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
                let total: usize = (0..k).map(|f| folds.members(f).len()).sum();
                prop_assert_eq!(total, ds.len());
            }
        }

        #[test]
        fn balance_counts_equal(ds in arb_dataset(), seed in 0u64..1000) {
            let counts = ds.class_counts();
            if counts.iter().all(|&c| c > 0) {
                let out = balance(&ds, seed).unwrap();
                let c = out.class_counts();
                prop_assert_eq!(c[0], c[1]);
                prop_assert_eq!(c[0], *counts.iter().min().unwrap());
            }
        }
    }
}
