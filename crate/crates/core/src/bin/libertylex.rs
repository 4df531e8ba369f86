use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{ArgAction, Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use libertylex::corpus::{
    balance, binarize, load_jsonl, preprocess, split, LabeledDataset, Scheme, Side, SplitAssignment, Stopwords,
};
use libertylex::cs::{export_matrices, generate_cs};
use libertylex::digest::id_set_digest;
use libertylex::embedding::{train_skipgram, EmbeddingMatrix, SkipGramConfig};
use libertylex::experiments::{
    emit_report, evaluate, friedman_rank, read_results_csv, sweep_selection, ResultsTable, SweepOptions, RANKS_FILE,
    RESULTS_FILE, TEXT_FILE,
};
use libertylex::features::{lineage_of, write_features_csv, Featurizer, UnigramFeaturizer};
use libertylex::learn::{f1_macro, fit, LogRegConfig};
use libertylex::lexicon::{compare, overlap_merge, Lexicon, RescaleMode};
use libertylex::manifest::{ManifestBuilder, RunManifest};
use libertylex::seeds::{frequency_shift, relative_frequencies, select_seeds};
use libertylex::synthetic::{generate, SyntheticConfig};
use libertylex::we::{generate_we, WeOptions};
use libertylex::Error;

/// Induce and evaluate liberty/oppression polarity lexicons.
///
/// Every subcommand writes a run manifest (`<output>.manifest.json`, or
/// `manifest.json` inside an output directory) listing input and output
/// digests.
#[derive(Debug, Parser)]
#[command(name = "libertylex", version)]
struct Cli {
    /// Base random seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads for parallel stages.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Force bit-reproducible execution (single-threaded embedding training).
    #[arg(long, global = true, default_value_t = true, action = ArgAction::Set)]
    deterministic: bool,
    /// Log filter: error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a raw JSONL dataset and write it in canonical form.
    Ingest(IngestArgs),
    /// Tokenize a dataset and write it with a `tokens` field.
    Preprocess(PreprocessArgs),
    /// Train skip-gram embeddings on a dataset.
    TrainEmbeddings(TrainEmbeddingsArgs),
    /// Select liberty and oppression seed words by frequency shift.
    Seeds(SeedsArgs),
    /// Build an embedding-similarity lexicon from embeddings and seeds.
    GenWe(GenWeArgs),
    /// Build a compositional lexicon from document labels.
    GenCs(GenCsArgs),
    /// Merge lexicons into an overlap lexicon.
    Merge(MergeArgs),
    /// Cross-validate the overlap selection parameter.
    Sweep(SweepArgs),
    /// Write document feature vectors as CSV.
    Featurize(FeaturizeArgs),
    /// Train a logistic-regression model on lexicon features.
    Train(TrainArgs),
    /// Run an experiment matrix from a config file and write the report.
    Evaluate(EvaluateArgs),
    /// Compare two lexicons on their shared vocabulary.
    Compare(CompareArgs),
    /// Re-rank a results CSV and write the Friedman report.
    Report(ReportArgs),
    /// Generate a synthetic labeled corpus with planted markers.
    Synthesize(SynthesizeArgs),
}

#[derive(Debug, Args)]
struct DatasetArgs {
    /// Dataset JSONL (`id`, `text`, `label`, optional `tokens`).
    #[arg(long)]
    dataset: PathBuf,
    /// Label scheme: ternary, binary_moral or binary_side.
    #[arg(long, default_value = "ternary")]
    scheme: Scheme,
    /// Stopword list: `english` (bundled), `none`, or a file path.
    #[arg(long, default_value = "english")]
    stopwords: String,
    /// Split manifest; when given, only the train side is used.
    #[arg(long)]
    split: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Raw JSONL input.
    #[arg(long)]
    input: PathBuf,
    /// Label scheme: ternary, binary_moral or binary_side.
    #[arg(long, default_value = "ternary")]
    scheme: Scheme,
    /// Collapse ternary labels to Moral/Neutral.
    #[arg(long)]
    binarize: bool,
    /// Undersample classes to the minority size.
    #[arg(long)]
    balance: bool,
    /// Draw a stratified train/test split with this test fraction.
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Where to write the split manifest (requires --test-fraction).
    #[arg(long)]
    split_out: Option<PathBuf>,
    /// Output JSONL.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PreprocessArgs {
    /// Dataset JSONL.
    #[arg(long)]
    dataset: PathBuf,
    /// Label scheme: ternary, binary_moral or binary_side.
    #[arg(long, default_value = "ternary")]
    scheme: Scheme,
    /// Stopword list: `english` (bundled), `none`, or a file path.
    #[arg(long, default_value = "english")]
    stopwords: String,
    /// Drop documents left without tokens.
    #[arg(long)]
    drop_empty: bool,
    /// Output JSONL with tokens.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainEmbeddingsArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[arg(long, default_value_t = 300)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    window: usize,
    /// Negative samples per positive pair.
    #[arg(long, default_value_t = 5)]
    negative: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    /// Initial learning rate (decays linearly).
    #[arg(long, default_value_t = 0.025)]
    learning_rate: f64,
    #[arg(long, default_value_t = 5)]
    min_count: u64,
    /// Frequent-word subsampling threshold (off by default).
    #[arg(long)]
    subsample: Option<f64>,
    /// Output embedding text file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SeedsArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// Seeds per side.
    #[arg(long, default_value_t = 100)]
    k: usize,
    /// Minimum combined raw frequency.
    #[arg(long, default_value_t = 100)]
    min_freq: u64,
    /// Output seed JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GenWeArgs {
    /// Embedding text file.
    #[arg(long)]
    embeddings: PathBuf,
    /// Seed JSON.
    #[arg(long)]
    seeds: PathBuf,
    /// Keep only words with at least this corpus count (needs --dataset).
    #[arg(long)]
    min_freq: Option<u64>,
    /// Dataset for the frequency filter and provenance.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Label scheme of --dataset.
    #[arg(long, default_value = "ternary")]
    scheme: Scheme,
    /// Stopword list used if --dataset needs tokenizing.
    #[arg(long, default_value = "english")]
    stopwords: String,
    /// Split manifest; when given, only the train side of --dataset is counted.
    #[arg(long)]
    split: Option<PathBuf>,
    /// Divide each similarity sum by its seed count.
    #[arg(long)]
    mean_normalized: bool,
    /// Output lexicon TSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GenCsArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// Minimum word count to enter the lexicon.
    #[arg(long, default_value_t = 10)]
    min_freq: u64,
    /// Also write the word-doc, doc-class and word-class triplet files here.
    #[arg(long)]
    export_matrices: Option<PathBuf>,
    /// Output lexicon TSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MergeArgs {
    /// Constituent lexicon TSVs (two or more).
    #[arg(long, num_args = 2.., required = true)]
    lexicons: Vec<PathBuf>,
    /// Selection percentage: keep words in at least ceil(p N / 100) lexicons.
    #[arg(long, default_value_t = 40.0)]
    selection: f64,
    /// Rescaling before averaging: none, minmax_symmetric or zscore.
    #[arg(long, default_value = "none")]
    rescale: RescaleMode,
    /// Output lexicon TSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Constituent lexicon TSVs (two or more).
    #[arg(long, num_args = 2.., required = true)]
    lexicons: Vec<PathBuf>,
    /// Train-set JSONL files.
    #[arg(long, num_args = 1.., required = true)]
    datasets: Vec<PathBuf>,
    /// Split manifests, one per dataset in the same order; only train sides are used.
    #[arg(long, num_args = 1..)]
    splits: Vec<PathBuf>,
    /// Label scheme of the train sets (binary).
    #[arg(long, default_value = "binary_moral")]
    scheme: Scheme,
    /// Stopword list used if a dataset needs tokenizing.
    #[arg(long, default_value = "english")]
    stopwords: String,
    /// Selection percentages to try.
    #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50,60,70,80,90,100")]
    grid: Vec<f64>,
    /// Cross-validation folds.
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// L2 penalty of the classifier.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Rescaling before averaging: none, minmax_symmetric or zscore.
    #[arg(long, default_value = "none")]
    rescale: RescaleMode,
    /// Output JSON with per-selection scores.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FeaturizeArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// Lexicon TSV (omit with --unigram).
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Append the statistical summary of matched scores.
    #[arg(long)]
    stats: bool,
    /// Unigram presence baseline over this many training words instead of a lexicon.
    #[arg(long)]
    unigram: Option<usize>,
    /// Featurize the test side of --split instead of the train side.
    #[arg(long)]
    test_side: bool,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// Lexicon TSV.
    #[arg(long)]
    lexicon: PathBuf,
    /// Append the statistical summary of matched scores.
    #[arg(long)]
    stats: bool,
    /// L2 penalty on the weights.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Gradient max-norm convergence threshold.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long, default_value_t = 1000)]
    max_iterations: usize,
    /// Output model JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for results.csv, ranks.csv and friedman.txt.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// First lexicon TSV.
    #[arg(long)]
    a: PathBuf,
    /// Second lexicon TSV.
    #[arg(long)]
    b: PathBuf,
    /// Number of most distant words to keep.
    #[arg(long, default_value_t = 50)]
    top: usize,
    /// Output JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// results.csv from a previous evaluation.
    #[arg(long)]
    results: PathBuf,
    /// Significance level of the Friedman test.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthesizeArgs {
    /// Documents per class.
    #[arg(long, default_value_t = 2000)]
    docs_per_class: usize,
    /// Liberty (and, separately, oppression) marker count.
    #[arg(long, default_value_t = 200)]
    markers: usize,
    #[arg(long, default_value_t = 2000)]
    neutral: usize,
    /// Output JSONL (binary_side labels).
    #[arg(long)]
    out: PathBuf,
}

struct Ctx {
    seed: u64,
    threads: usize,
    deterministic: bool,
    manifest: ManifestBuilder,
}

impl Ctx {
    fn finish(&self, anchor: &Path) -> anyhow::Result<()> {
        let manifest = self.manifest.finish()?;
        manifest.save(&RunManifest::path_for(anchor))?;
        Ok(())
    }
}

fn stopwords(spec: &str) -> libertylex::Result<Stopwords> {
    match spec {
        "english" => Ok(Stopwords::english()),
        "none" => Ok(Stopwords::empty()),
        path => Stopwords::load(Path::new(path)),
    }
}

/// Load a dataset, tokenizing it unless it already carries tokens.
fn load_dataset(ctx: &mut Ctx, path: &Path, scheme: Scheme, stop: &str) -> libertylex::Result<LabeledDataset> {
    ctx.manifest.input(path);
    let ds = load_jsonl(path, scheme)?;
    if ds.documents.iter().any(|d| !d.tokens.is_empty()) {
        Ok(ds)
    } else {
        Ok(preprocess(&ds, &stopwords(stop)?))
    }
}

/// The dataset restricted to its train side when a split manifest is given.
fn load_train_side(ctx: &mut Ctx, args: &DatasetArgs) -> libertylex::Result<LabeledDataset> {
    let ds = load_dataset(ctx, &args.dataset, args.scheme, &args.stopwords)?;
    match &args.split {
        Some(p) => {
            ctx.manifest.input(p);
            ds.with_split(SplitAssignment::load(p)?)?.side(Side::Train)
        }
        None => Ok(ds),
    }
}

fn ingest(ctx: &mut Ctx, a: &IngestArgs) -> anyhow::Result<()> {
    ctx.manifest.input(&a.input);
    let mut ds = load_jsonl(&a.input, a.scheme)?;
    if a.binarize {
        ds = binarize(&ds)?;
    }
    if a.balance {
        ds = balance(&ds, ctx.seed)?;
        ctx.manifest.seed("balance", ctx.seed);
    }
    ds.save_jsonl(&a.out, false)?;
    ctx.manifest.output(&a.out);
    match (a.test_fraction, &a.split_out) {
        (Some(f), Some(path)) => {
            let with_split = split(&ds, f, ctx.seed)?;
            with_split.split_assignment.expect("split sets an assignment").save(path)?;
            ctx.manifest.seed("split", ctx.seed).output(path);
        }
        (None, None) => {}
        _ => bail!("--test-fraction and --split-out must be given together"),
    }
    ctx.finish(&a.out)
}

fn run_preprocess(ctx: &mut Ctx, a: &PreprocessArgs) -> anyhow::Result<()> {
    ctx.manifest.input(&a.dataset);
    let ds = load_jsonl(&a.dataset, a.scheme)?;
    let mut out = preprocess(&ds, &stopwords(&a.stopwords)?);
    if a.drop_empty {
        out = out.drop_empty();
    }
    out.save_jsonl(&a.out, true)?;
    ctx.manifest.output(&a.out);
    ctx.finish(&a.out)
}

fn train_embeddings(ctx: &mut Ctx, a: &TrainEmbeddingsArgs) -> anyhow::Result<()> {
    let ds = load_train_side(ctx, &a.data)?;
    let threads = if ctx.deterministic {
        if ctx.threads > 1 {
            log::warn!("--deterministic forces single-threaded embedding training");
        }
        1
    } else {
        ctx.threads
    };
    let config = SkipGramConfig {
        dim: a.dim,
        window: a.window,
        negative_samples: a.negative,
        epochs: a.epochs,
        initial_learning_rate: a.learning_rate,
        min_count: a.min_count,
        seed: ctx.seed,
        subsample: a.subsample,
        threads,
    };
    let corpus: Vec<Vec<String>> = ds.documents.iter().map(|d| d.tokens.clone()).collect();
    let matrix = train_skipgram(&corpus, &config)?;
    matrix.save(&a.out)?;
    ctx.manifest.seed("embedding", ctx.seed).output(&a.out);
    ctx.finish(&a.out)
}

fn run_seeds(ctx: &mut Ctx, a: &SeedsArgs) -> anyhow::Result<()> {
    let ds = load_train_side(ctx, &a.data)?;
    let (lib, opp) = ds.scheme.polarity_classes();
    let side = |class: &str| -> Vec<&[String]> {
        ds.documents
            .iter()
            .filter(|d| d.label.name() == class)
            .map(|d| d.tokens.as_slice())
            .collect()
    };
    let liberty_side = relative_frequencies(&side(lib)).with_context(|| format!("{lib} documents"))?;
    let oppression_side = relative_frequencies(&side(opp)).with_context(|| format!("{opp} documents"))?;
    let seeds = select_seeds(&frequency_shift(&oppression_side, &liberty_side), a.k, a.min_freq, lib)?;
    seeds.save(&a.out)?;
    ctx.manifest.output(&a.out);
    ctx.finish(&a.out)
}

fn gen_we(ctx: &mut Ctx, a: &GenWeArgs) -> anyhow::Result<()> {
    ctx.manifest.input(&a.embeddings).input(&a.seeds);
    let matrix = EmbeddingMatrix::load(&a.embeddings)?;
    let seeds = libertylex::seeds::SeedSets::load(&a.seeds)?;
    if a.dataset.is_none() && (a.min_freq.is_some() || a.split.is_some()) {
        bail!("--min-freq and --split need --dataset");
    }
    let dataset = match &a.dataset {
        Some(p) => Some(load_train_side(
            ctx,
            &DatasetArgs {
                dataset: p.clone(),
                scheme: a.scheme,
                stopwords: a.stopwords.clone(),
                split: a.split.clone(),
            },
        )?),
        None => None,
    };
    let freq = match &dataset {
        Some(ds) => Some(relative_frequencies(&ds.token_lists())?),
        None => None,
    };
    let options = WeOptions {
        min_frequency: a.min_freq.zip(freq.as_ref()),
        mean_normalized: a.mean_normalized,
        source_dataset: dataset.as_ref().map(|d| d.name.clone()).unwrap_or_default(),
    };
    let mut lexicon = generate_we(&matrix, &seeds, &options)?;
    if let Some(ds) = &dataset {
        lexicon.metadata = lexicon.metadata.clone().with("lineage", id_set_digest(ds.ids()));
    }
    lexicon.save(&a.out)?;
    ctx.manifest.output(&a.out);
    ctx.finish(&a.out)
}

fn gen_cs(ctx: &mut Ctx, a: &GenCsArgs) -> anyhow::Result<()> {
    let ds = load_train_side(ctx, &a.data)?;
    let lexicon = generate_cs(&ds, a.min_freq)?;
    lexicon.save(&a.out)?;
    ctx.manifest.output(&a.out);
    if let Some(dir) = &a.export_matrices {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        export_matrices(&ds, a.min_freq, dir)?;
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && !p.to_string_lossy().ends_with(".manifest.json"))
            .collect();
        files.sort();
        for f in files {
            ctx.manifest.output(f);
        }
    }
    ctx.finish(&a.out)
}

fn load_lexicons(ctx: &mut Ctx, paths: &[PathBuf]) -> libertylex::Result<Vec<Lexicon>> {
    paths
        .iter()
        .map(|p| {
            ctx.manifest.input(p);
            Lexicon::load(p)
        })
        .collect()
}

fn merge(ctx: &mut Ctx, a: &MergeArgs) -> anyhow::Result<()> {
    let lexicons = load_lexicons(ctx, &a.lexicons)?;
    let merged = overlap_merge(&lexicons, a.selection, a.rescale)?;
    merged.save(&a.out)?;
    ctx.manifest.output(&a.out);
    ctx.finish(&a.out)
}

fn sweep(ctx: &mut Ctx, a: &SweepArgs) -> anyhow::Result<()> {
    let lexicons = load_lexicons(ctx, &a.lexicons)?;
    if !a.splits.is_empty() && a.splits.len() != a.datasets.len() {
        bail!("--splits needs one manifest per dataset ({} given for {} datasets)", a.splits.len(), a.datasets.len());
    }
    let datasets = a
        .datasets
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let args = DatasetArgs {
                dataset: p.clone(),
                scheme: a.scheme,
                stopwords: a.stopwords.clone(),
                split: a.splits.get(i).cloned(),
            };
            load_train_side(ctx, &args)
        })
        .collect::<libertylex::Result<Vec<_>>>()?;
    let options = SweepOptions {
        folds: a.folds,
        seed: ctx.seed,
        lambda: a.lambda,
        rescale: a.rescale,
    };
    let result = sweep_selection(&lexicons, &a.grid, &datasets, &options)?;
    let mut text = serde_json::to_string_pretty(&result)?;
    text.push('\n');
    std::fs::write(&a.out, text).with_context(|| format!("writing {}", a.out.display()))?;
    ctx.manifest.seed("folds", ctx.seed).output(&a.out);
    println!("best selection: {}", result.best_selection);
    ctx.finish(&a.out)
}

fn featurize(ctx: &mut Ctx, a: &FeaturizeArgs) -> anyhow::Result<()> {
    let full = load_dataset(ctx, &a.data.dataset, a.data.scheme, &a.data.stopwords)?;
    let (train, target) = match &a.data.split {
        Some(p) => {
            ctx.manifest.input(p);
            let ds = full.with_split(SplitAssignment::load(p)?)?;
            let train = ds.side(Side::Train)?;
            let target = if a.test_side { ds.side(Side::Test)? } else { train.clone() };
            (train, target)
        }
        None if a.test_side => bail!("--test-side needs --split"),
        None => (full.clone(), full),
    };
    let featurizer = match (&a.lexicon, a.unigram) {
        (Some(p), None) => Featurizer::Lexicon {
            lexicon: load_lexicons(ctx, std::slice::from_ref(p))?.remove(0),
            with_stats: a.stats,
        },
        (None, Some(n)) => Featurizer::Unigram(UnigramFeaturizer::fit(n, &train.documents)?),
        _ => bail!("give exactly one of --lexicon and --unigram"),
    };
    let (rows, schema) = featurizer.matrix(&target.documents)?;
    write_features_csv(&a.out, &schema, &target.documents, &rows)?;
    ctx.manifest.output(&a.out);
    ctx.finish(&a.out)
}

fn train(ctx: &mut Ctx, a: &TrainArgs) -> anyhow::Result<()> {
    let full = load_dataset(ctx, &a.data.dataset, a.data.scheme, &a.data.stopwords)?;
    if !full.scheme.is_binary() {
        bail!("training needs a binary label scheme, got {}", full.scheme);
    }
    let split_ds = match &a.data.split {
        Some(p) => {
            ctx.manifest.input(p);
            Some(full.clone().with_split(SplitAssignment::load(p)?)?)
        }
        None => None,
    };
    let train_ds = match &split_ds {
        Some(ds) => ds.side(Side::Train)?,
        None => full,
    };
    let featurizer = Featurizer::Lexicon {
        lexicon: load_lexicons(ctx, std::slice::from_ref(&a.lexicon))?.remove(0),
        with_stats: a.stats,
    };
    let (x, schema) = featurizer.matrix(&train_ds.documents)?;
    let y: Vec<bool> = train_ds.documents.iter().map(|d| d.label.is_positive()).collect();
    let config = LogRegConfig {
        lambda: a.lambda,
        tolerance: a.tolerance,
        max_iterations: a.max_iterations,
        seed: ctx.seed,
    };
    let model = fit(&x, &y, &schema, &config)?;
    model.save(&a.out)?;
    ctx.manifest.output(&a.out);
    log::info!("trained on {} documents ({})", train_ds.len(), lineage_of(&train_ds.documents));
    if let Some(ds) = &split_ds {
        let test = ds.side(Side::Test)?;
        if !test.is_empty() {
            let (tx, _) = featurizer.matrix(&test.documents)?;
            let truth: Vec<bool> = test.documents.iter().map(|d| d.label.is_positive()).collect();
            println!("test f1_macro: {:.4}", f1_macro(&truth, &model.predict_rows(&tx, &schema)?)?);
        }
    }
    ctx.finish(&a.out)
}

fn run_evaluate(ctx: &mut Ctx, a: &EvaluateArgs) -> anyhow::Result<()> {
    ctx.manifest.input(&a.config);
    let outcome = evaluate(&a.config, &a.out, ctx.threads)?;
    for f in &outcome.files {
        ctx.manifest.output(f);
    }
    print!("{}", std::fs::read_to_string(a.out.join(TEXT_FILE))?);
    ctx.finish(&a.out)
}

fn run_compare(ctx: &mut Ctx, a: &CompareArgs) -> anyhow::Result<()> {
    let lexicons = load_lexicons(ctx, &[a.a.clone(), a.b.clone()])?;
    let mut comparison = compare(&lexicons[0], &lexicons[1])?;
    comparison.most_distant.truncate(a.top);
    let mut text = serde_json::to_string_pretty(&comparison)?;
    text.push('\n');
    std::fs::write(&a.out, text).with_context(|| format!("writing {}", a.out.display()))?;
    println!("distance: {:.6} over {} shared words", comparison.distance, comparison.shared);
    ctx.manifest.output(&a.out);
    ctx.finish(&a.out)
}

fn report(ctx: &mut Ctx, a: &ReportArgs) -> anyhow::Result<()> {
    ctx.manifest.input(&a.results);
    let table = ResultsTable::from_rows(&read_results_csv(&a.results)?)?;
    let ranks = friedman_rank(&table, a.alpha)?;
    emit_report(&table, &ranks, &a.out)?;
    for f in [RESULTS_FILE, RANKS_FILE, TEXT_FILE] {
        ctx.manifest.output(a.out.join(f));
    }
    ctx.finish(&a.out)
}

fn synthesize(ctx: &mut Ctx, a: &SynthesizeArgs) -> anyhow::Result<()> {
    let config = SyntheticConfig {
        docs_per_class: a.docs_per_class,
        liberty_markers: a.markers,
        oppression_markers: a.markers,
        neutral_tokens: a.neutral,
        seed: ctx.seed,
        ..Default::default()
    };
    let corpus = generate(&config)?;
    corpus.dataset.save_jsonl(&a.out, false)?;
    ctx.manifest.seed("synthetic", ctx.seed).output(&a.out);
    ctx.finish(&a.out)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>().map(Error::module) {
        Some("io") => 3,
        Some("parse") => 4,
        Some("corpus") => 10,
        Some("embedding") => 11,
        Some("seed_selection") => 12,
        Some("we_lexicon") => 13,
        Some("cs_lexicon") => 14,
        Some("lexicon_core") => 15,
        Some("featurize") => 16,
        Some("learn") => 17,
        Some("experiments") => 18,
        Some(_) => 19,
        None => 1,
    }
}

fn main() -> ExitCode {
    let matches = Cli::command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    let command_line: Vec<String> = std::env::args().collect();
    let name = matches.subcommand_name().unwrap_or_default().to_owned();
    let mut ctx = Ctx {
        seed: cli.seed,
        threads: cli.threads.max(1),
        deterministic: cli.deterministic,
        manifest: ManifestBuilder::new(
            &name,
            command_line.clone(),
            &format!("{:?};seed={};deterministic={}", cli.command, cli.seed, cli.deterministic),
            cli.deterministic,
        ),
    };
    ctx.manifest.seed("global", cli.seed);
    let result = match &cli.command {
        Command::Ingest(a) => ingest(&mut ctx, a),
        Command::Preprocess(a) => run_preprocess(&mut ctx, a),
        Command::TrainEmbeddings(a) => train_embeddings(&mut ctx, a),
        Command::Seeds(a) => run_seeds(&mut ctx, a),
        Command::GenWe(a) => gen_we(&mut ctx, a),
        Command::GenCs(a) => gen_cs(&mut ctx, a),
        Command::Merge(a) => merge(&mut ctx, a),
        Command::Sweep(a) => sweep(&mut ctx, a),
        Command::Featurize(a) => featurize(&mut ctx, a),
        Command::Train(a) => train(&mut ctx, a),
        Command::Evaluate(a) => run_evaluate(&mut ctx, a),
        Command::Compare(a) => run_compare(&mut ctx, a),
        Command::Report(a) => report(&mut ctx, a),
        Command::Synthesize(a) => synthesize(&mut ctx, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let module = err.downcast_ref::<Error>().map(Error::module).unwrap_or("cli");
            eprintln!("error [{module}]: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
