//! Evaluation harness: the train/test experiment matrix, the overlap
//! selection sweep, Friedman ranking and report emission.

mod config;
mod friedman;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::corpus::{kfold, Document, LabeledDataset, Side, SplitAssignment};
use crate::digest::{sha256_hex, short};
use crate::error::{Error, Result};
use crate::features::{fit_reducers, lexicon_schema, lineage_of, Featurizer, UnigramFeaturizer};
use crate::learn::{f1_macro, fit, LogRegConfig};
use crate::lexicon::{overlap_merge, Lexicon, RescaleMode};
use crate::svd::RandomizedSvdConfig;

pub use config::{evaluate, DatasetConfig, EvaluationConfig, EvaluationOutcome, ExperimentConfig, LexiconConfig, MethodConfig, MethodKind};
pub use friedman::{friedman_statistic, friedman_test, rank_descending, FriedmanResult};
pub use report::{emit_report, read_results_csv, ResultRow, RANKS_FILE, RESULTS_FILE, TEXT_FILE};

/// How the document features of one method are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeaturizerSpec {
    Lexicon { lexicon: String, with_stats: bool },
    Unigram { size: usize },
    Combined { lexicons: Vec<String>, svd_k: usize },
}

/// Documents a featurizer is fit on. Anything but `TrainSplit` is rejected
/// by the lineage guard unless it happens to name exactly the train split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FitSource {
    TrainSplit,
    TestSplit,
    Ids(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub method: String,
    pub experiment: String,
    pub featurizer: FeaturizerSpec,
    pub train: String,
    pub test: String,
    pub seed: u64,
    pub lambda: f64,
    pub fit_on: FitSource,
}

impl ExperimentSpec {
    pub fn config_digest(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("spec serializes").as_bytes())
    }
}

/// Loaded datasets (preprocessed, binary, with a train/test split) and
/// lexicons, keyed by name.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    pub datasets: BTreeMap<String, LabeledDataset>,
    pub lexicons: BTreeMap<String, Lexicon>,
    pub svd: RandomizedSvdConfig,
}

impl Workspace {
    fn dataset(&self, name: &str) -> Result<&LabeledDataset> {
        self.datasets
            .get(name)
            .ok_or_else(|| Error::Experiment(format!("unknown dataset {name:?}")))
    }

    fn lexicon(&self, name: &str) -> Result<&Lexicon> {
        self.lexicons
            .get(name)
            .ok_or_else(|| Error::Experiment(format!("unknown lexicon {name:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub score: Option<f64>,
    pub error: Option<String>,
    pub seed: u64,
    pub config_digest: String,
}

/// F1-macro scores, methods by experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub methods: Vec<String>,
    pub experiments: Vec<String>,
    /// `cells[method][experiment]`; `None` where no spec was given.
    pub cells: Vec<Vec<Option<Cell>>>,
}

impl ResultsTable {
    /// Rebuild a table from parsed report rows, keeping first-seen order.
    pub fn from_rows(rows: &[ResultRow]) -> Result<Self> {
        let methods = first_seen(rows.iter().map(|r| r.method.as_str()));
        let experiments = first_seen(rows.iter().map(|r| r.experiment.as_str()));
        let mut cells = vec![vec![None; experiments.len()]; methods.len()];
        for r in rows {
            let m = methods.iter().position(|x| *x == r.method).expect("collected");
            let e = experiments.iter().position(|x| *x == r.experiment).expect("collected");
            if cells[m][e].is_some() {
                return Err(Error::Experiment(format!("duplicate row for ({}, {})", r.method, r.experiment)));
            }
            let score = r.f1_macro.is_finite().then_some(r.f1_macro);
            if let Some(s) = score {
                if !(0.0..=1.0).contains(&s) {
                    return Err(Error::Experiment(format!("score {s} for ({}, {}) lies outside [0, 1]", r.method, r.experiment)));
                }
            }
            cells[m][e] = Some(Cell {
                score,
                error: score.is_none().then(|| "missing score".to_string()),
                seed: r.seed,
                config_digest: r.config_digest.clone(),
            });
        }
        Ok(ResultsTable { methods, experiments, cells })
    }

    pub fn score(&self, method: &str, experiment: &str) -> Option<f64> {
        let m = self.methods.iter().position(|x| x == method)?;
        let e = self.experiments.iter().position(|x| x == experiment)?;
        self.cells[m][e].as_ref()?.score
    }

    /// `(method, experiment, reason)` for every cell without a score.
    pub fn missing(&self) -> Vec<(String, String, String)> {
        let mut out = Vec::new();
        for (m, row) in self.cells.iter().enumerate() {
            for (e, cell) in row.iter().enumerate() {
                let reason = match cell {
                    None => Some("no experiment spec".to_string()),
                    Some(Cell { score: None, error, .. }) => {
                        Some(error.clone().unwrap_or_else(|| "no score".into()))
                    }
                    Some(_) => None,
                };
                if let Some(r) = reason {
                    out.push((self.methods[m].clone(), self.experiments[e].clone(), r));
                }
            }
        }
        out
    }

    /// Scores as `experiments × methods` blocks, failing on any missing cell.
    pub fn complete_blocks(&self) -> Result<Vec<Vec<f64>>> {
        if let Some((m, e, reason)) = self.missing().into_iter().next() {
            return Err(Error::Experiment(format!("cell ({m}, {e}) is missing: {reason}")));
        }
        Ok((0..self.experiments.len())
            .map(|e| {
                (0..self.methods.len())
                    .map(|m| self.cells[m][e].as_ref().and_then(|c| c.score).unwrap_or(f64::NAN))
                    .collect()
            })
            .collect())
    }
}

fn binary_labels(docs: &[Document]) -> Vec<bool> {
    docs.iter().map(|d| d.label.is_positive()).collect()
}

fn test_documents(ds: &LabeledDataset) -> Result<Vec<Document>> {
    match ds.split_assignment {
        Some(SplitAssignment::TrainTest(_)) => Ok(ds.side(Side::Test)?.documents),
        _ => Ok(ds.documents.clone()),
    }
}

/// Documents named by `fit_on`, looked up in the train and test datasets.
/// An id that names any evaluation document is rejected outright, even when
/// a training document shares it.
fn fit_documents(
    spec: &ExperimentSpec,
    train_ds: &LabeledDataset,
    test_ds: &LabeledDataset,
    train_docs: &[Document],
    test_docs: &[Document],
) -> Result<Vec<Document>> {
    match &spec.fit_on {
        FitSource::TrainSplit => Ok(train_docs.to_vec()),
        FitSource::TestSplit => Ok(test_docs.to_vec()),
        FitSource::Ids(ids) => {
            let wanted: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
            if let Some(d) = test_docs.iter().find(|d| wanted.contains(d.id.as_str())) {
                return Err(Error::Leakage(format!(
                    "fit set names evaluation document {} of {}",
                    d.id, spec.test
                )));
            }
            let mut seen = BTreeSet::new();
            Ok(train_ds
                .documents
                .iter()
                .chain(&test_ds.documents)
                .filter(|d| wanted.contains(d.id.as_str()) && seen.insert(d.id.clone()))
                .cloned()
                .collect())
        }
    }
}

fn build_featurizer(ws: &Workspace, spec: &ExperimentSpec, fit_docs: &[Document]) -> Result<Featurizer> {
    match &spec.featurizer {
        FeaturizerSpec::Lexicon { lexicon, with_stats } => Ok(Featurizer::Lexicon {
            lexicon: ws.lexicon(lexicon)?.clone(),
            with_stats: *with_stats,
        }),
        FeaturizerSpec::Unigram { size } => Ok(Featurizer::Unigram(UnigramFeaturizer::fit(*size, fit_docs)?)),
        FeaturizerSpec::Combined { lexicons, svd_k } => {
            let lexicons: Vec<Lexicon> = lexicons.iter().map(|n| ws.lexicon(n).cloned()).collect::<Result<_>>()?;
            let config = RandomizedSvdConfig { seed: spec.seed, ..ws.svd };
            let reducers = fit_reducers(&lexicons, fit_docs, *svd_k, &config)?;
            Ok(Featurizer::Combined { lexicons, reducers })
        }
    }
}

/// Reject featurizers whose fit artifacts, or whose lexicons, derive from
/// documents other than the train split.
fn check_lineage(
    featurizer: &Featurizer,
    train_lineage: &str,
    forbidden: &BTreeMap<String, String>,
) -> Result<()> {
    for lineage in featurizer.lineages() {
        if lineage != train_lineage {
            return Err(Error::Leakage(format!(
                "featurizer was fit on documents {} but the train split is {}",
                short(lineage),
                short(train_lineage)
            )));
        }
    }
    for lex in featurizer.lexicons() {
        if let Some(lineage) = lex.metadata.extra.get("lineage") {
            if let Some(what) = forbidden.get(lineage) {
                return Err(Error::Leakage(format!(
                    "lexicon {} ({}) was built from {what}",
                    short(&lex.digest()),
                    lexicon_schema(lex)
                )));
            }
        }
    }
    Ok(())
}

/// Run one cell: fit the featurizer on the train split, train the
/// classifier, and score the test documents with F1-macro.
pub fn run_cell(ws: &Workspace, spec: &ExperimentSpec) -> Result<f64> {
    let train_ds = ws.dataset(&spec.train)?;
    let test_ds = ws.dataset(&spec.test)?;
    if !train_ds.scheme.is_binary() || train_ds.scheme != test_ds.scheme {
        return Err(Error::Experiment(format!(
            "train ({}) and test ({}) must share a binary label scheme",
            train_ds.scheme, test_ds.scheme
        )));
    }
    let train_docs = train_ds.side(Side::Train)?.documents;
    let test_docs = test_documents(test_ds)?;
    if spec.train == spec.test {
        let train_ids: BTreeSet<&str> = train_docs.iter().map(|d| d.id.as_str()).collect();
        if let Some(d) = test_docs.iter().find(|d| train_ids.contains(d.id.as_str())) {
            return Err(Error::Leakage(format!("document {:?} is on both sides of the split", d.id)));
        }
    }
    if test_docs.is_empty() {
        return Err(Error::Experiment(format!("dataset {:?} has no test documents", spec.test)));
    }

    let train_lineage = lineage_of(&train_docs);
    let fit_docs = fit_documents(spec, train_ds, test_ds, &train_docs, &test_docs)?;
    let fit_lineage = lineage_of(&fit_docs);
    if fit_lineage != train_lineage {
        return Err(Error::Leakage(format!(
            "featurizer fit set {} differs from the train split {}",
            short(&fit_lineage),
            short(&train_lineage)
        )));
    }
    let mut forbidden = BTreeMap::new();
    forbidden.insert(lineage_of(&test_docs), format!("the test documents of {}", spec.test));
    forbidden.insert(lineage_of(&test_ds.documents), format!("all documents of {}", spec.test));

    let featurizer = build_featurizer(ws, spec, &fit_docs)?;
    check_lineage(&featurizer, &train_lineage, &forbidden)?;

    let (train_x, schema) = featurizer.matrix(&train_docs)?;
    let (test_x, test_schema) = featurizer.matrix(&test_docs)?;
    if schema != test_schema {
        return Err(Error::Experiment(format!("train schema {schema} differs from test schema {test_schema}")));
    }
    let config = LogRegConfig {
        lambda: spec.lambda,
        seed: spec.seed,
        ..Default::default()
    };
    let model = fit(&train_x, &binary_labels(&train_docs), &schema, &config)?;
    let predicted = model.predict_rows(&test_x, &schema)?;
    f1_macro(&binary_labels(&test_docs), &predicted)
}

fn first_seen<'a>(items: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = BTreeSet::new();
    items.filter(|s| seen.insert(*s)).map(str::to_owned).collect()
}

/// Run every spec (concurrently when `threads > 1`) and assemble the table in
/// spec order. Failed cells are kept with their error message.
pub fn run_matrix(ws: &Workspace, specs: &[ExperimentSpec], threads: usize) -> ResultsTable {
    let outcomes: Vec<Mutex<Option<Result<f64>>>> = specs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = threads.clamp(1, specs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= specs.len() {
                    break;
                }
                let outcome = run_cell(ws, &specs[i]);
                *outcomes[i].lock().expect("unpoisoned") = Some(outcome);
            });
        }
    });

    let methods = first_seen(specs.iter().map(|s| s.method.as_str()));
    let experiments = first_seen(specs.iter().map(|s| s.experiment.as_str()));
    let mut cells = vec![vec![None; experiments.len()]; methods.len()];
    for (spec, outcome) in specs.iter().zip(outcomes) {
        let m = methods.iter().position(|x| *x == spec.method).expect("collected");
        let e = experiments.iter().position(|x| *x == spec.experiment).expect("collected");
        let outcome = outcome.into_inner().expect("unpoisoned").expect("every spec ran");
        let (score, error) = match outcome {
            Ok(s) => (Some(s), None),
            Err(err) => {
                log::error!("cell ({}, {}) failed: {err}", spec.method, spec.experiment);
                (None, Some(err.to_string()))
            }
        };
        if cells[m][e].is_some() {
            log::warn!("duplicate spec for cell ({}, {}); keeping the last", spec.method, spec.experiment);
        }
        cells[m][e] = Some(Cell {
            score,
            error,
            seed: spec.seed,
            config_digest: spec.config_digest(),
        });
    }
    ResultsTable {
        methods,
        experiments,
        cells,
    }
}

/// Friedman ranking of a complete results table.
pub fn friedman_rank(table: &ResultsTable, alpha: f64) -> Result<FriedmanResult> {
    friedman_test(&table.methods, &table.complete_blocks()?, alpha)
}

/// The selection grid 10, 20, …, 100.
pub fn default_grid() -> Vec<f64> {
    (1..=10).map(|i| f64::from(i * 10)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub selection: f64,
    /// Mean over train sets of the per-set mean CV score.
    pub score: Option<f64>,
    pub per_dataset: Vec<Option<f64>>,
    pub lexicon_size: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub best_selection: f64,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub folds: usize,
    pub seed: u64,
    pub lambda: f64,
    pub rescale: RescaleMode,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            folds: 5,
            seed: 0,
            lambda: 1.0,
            rescale: RescaleMode::None,
        }
    }
}

fn cross_validate(lexicon: &Lexicon, docs: &[Document], ds: &LabeledDataset, options: &SweepOptions) -> Result<f64> {
    let subset = LabeledDataset::new(ds.name.clone(), ds.scheme, docs.to_vec())?;
    let folds = kfold(&subset, options.folds, options.seed)?;
    let featurizer = Featurizer::Lexicon {
        lexicon: lexicon.clone(),
        with_stats: false,
    };
    let (x, schema) = featurizer.matrix(docs)?;
    let y = binary_labels(docs);
    let config = LogRegConfig {
        lambda: options.lambda,
        seed: options.seed,
        ..Default::default()
    };
    let mut total = 0.0;
    for f in 0..folds.k {
        let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (i, &fold) in folds.fold_of.iter().enumerate() {
            if fold == f {
                vx.push(x[i].clone());
                vy.push(y[i]);
            } else {
                tx.push(x[i].clone());
                ty.push(y[i]);
            }
        }
        let model = fit(&tx, &ty, &schema, &config)?;
        total += f1_macro(&vy, &model.predict_rows(&vx, &schema)?)?;
    }
    Ok(total / folds.k as f64)
}

/// For each selection percentage, merge the lexicons, score the merged
/// lexicon's doc vectors by k-fold cross-validation on every train set and
/// average the per-set means. Every grid point is evaluated.
pub fn sweep_selection(
    lexicons: &[Lexicon],
    grid: &[f64],
    train_sets: &[LabeledDataset],
    options: &SweepOptions,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::Experiment("selection grid is empty".into()));
    }
    if options.folds < 2 {
        return Err(Error::Experiment(format!("cross-validation needs k >= 2, got {}", options.folds)));
    }
    if train_sets.is_empty() {
        return Err(Error::Experiment("no train sets given".into()));
    }
    let train_docs: Vec<Vec<Document>> = train_sets
        .iter()
        .map(|ds| match ds.split_assignment {
            Some(SplitAssignment::TrainTest(_)) => Ok(ds.side(Side::Train)?.documents),
            _ => Ok(ds.documents.clone()),
        })
        .collect::<Result<_>>()?;

    let mut points = Vec::with_capacity(grid.len());
    for &p in grid {
        let merged = overlap_merge(lexicons, p, options.rescale);
        let point = match merged {
            Err(e) => SweepPoint {
                selection: p,
                score: None,
                per_dataset: vec![None; train_sets.len()],
                lexicon_size: 0,
                error: Some(e.to_string()),
            },
            Ok(lex) if lex.is_empty() => SweepPoint {
                selection: p,
                score: None,
                per_dataset: vec![None; train_sets.len()],
                lexicon_size: 0,
                error: Some("merged lexicon is empty".into()),
            },
            Ok(lex) => {
                let mut per_dataset = Vec::with_capacity(train_sets.len());
                let mut errors = Vec::new();
                for (ds, docs) in train_sets.iter().zip(&train_docs) {
                    match cross_validate(&lex, docs, ds, options) {
                        Ok(s) => per_dataset.push(Some(s)),
                        Err(e) => {
                            errors.push(format!("{}: {e}", ds.name));
                            per_dataset.push(None);
                        }
                    }
                }
                let ok: Vec<f64> = per_dataset.iter().flatten().copied().collect();
                let score = (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64);
                SweepPoint {
                    selection: p,
                    score,
                    per_dataset,
                    lexicon_size: lex.len(),
                    error: (!errors.is_empty()).then(|| errors.join("; ")),
                }
            }
        };
        if let Some(e) = &point.error {
            log::warn!("selection {p}: {e}");
        }
        points.push(point);
    }
    let best = points
        .iter()
        .filter_map(|pt| pt.score.map(|s| (pt.selection, s)))
        .fold(None, |best: Option<(f64, f64)>, (p, s)| match best {
            Some((bp, bs)) if bs > s || (bs == s && bp <= p) => Some((bp, bs)),
            _ => Some((p, s)),
        });
    match best {
        Some((best_selection, _)) => Ok(SweepResult { best_selection, points }),
        None => Err(Error::Experiment("every selection value failed".into())),
    }
}
