//! Skip-gram word embeddings with negative sampling, plain-text vector I/O and
//! cosine similarity queries.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters for [`train_skipgram`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negative_samples: usize,
    pub epochs: usize,
    pub initial_learning_rate: f64,
    pub min_count: u64,
    pub seed: u64,
    /// Frequent-word subsampling threshold; `None` disables subsampling.
    pub subsample: Option<f64>,
    /// Worker count. Anything above one enables lock-free concurrent updates
    /// and makes the result nondeterministic.
    pub threads: usize,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 300,
            window: 5,
            negative_samples: 5,
            epochs: 5,
            initial_learning_rate: 0.025,
            min_count: 5,
            seed: 1,
            subsample: None,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub config: SkipGramConfig,
    /// Mean negative-sampling loss per (word, context) pair, one entry per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Token → dense vector table.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    vocabulary: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    vectors: Vec<f32>,
    train_record: Option<TrainRecord>,
}

impl EmbeddingMatrix {
    pub fn from_rows(vocabulary: Vec<String>, rows: Vec<Vec<f32>>) -> Result<Self> {
        if vocabulary.len() != rows.len() {
            return Err(Error::Embedding(format!(
                "{} tokens but {} rows",
                vocabulary.len(),
                rows.len()
            )));
        }
        let dim = rows.first().map_or(0, Vec::len);
        let mut vectors = Vec::with_capacity(dim * rows.len());
        for (token, row) in vocabulary.iter().zip(&rows) {
            if row.len() != dim {
                return Err(Error::Embedding(format!(
                    "row for {token:?} has {} values, expected {dim}",
                    row.len()
                )));
            }
            vectors.extend_from_slice(row);
        }
        Self::from_parts(vocabulary, dim, vectors, None)
    }

    fn from_parts(
        vocabulary: Vec<String>,
        dim: usize,
        vectors: Vec<f32>,
        train_record: Option<TrainRecord>,
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(vocabulary.len());
        for (i, token) in vocabulary.iter().enumerate() {
            if index.insert(token.clone(), i).is_some() {
                return Err(Error::Embedding(format!("duplicate token {token:?}")));
            }
        }
        Ok(EmbeddingMatrix {
            vocabulary,
            index,
            dim,
            vectors,
            train_record,
        })
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocabulary.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn train_record(&self) -> Option<&TrainRecord> {
        self.train_record.as_ref()
    }

    pub fn vector(&self, token: &str) -> Result<&[f32]> {
        let row = *self
            .index
            .get(token)
            .ok_or_else(|| Error::OutOfVocabulary(token.to_owned()))?;
        Ok(self.row(row))
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn cosine(&self, a: &str, b: &str) -> Result<f64> {
        cosine_slices(self.vector(a)?, self.vector(b)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(out, "{} {}", self.len(), self.dim).map_err(io)?;
        for (i, token) in self.vocabulary.iter().enumerate() {
            write!(out, "{token}").map_err(io)?;
            for v in self.row(i) {
                write!(out, " {v}").map_err(io)?;
            }
            writeln!(out).map_err(io)?;
        }
        out.flush().map_err(io)
    }

    /// Load the plain-text format: a `"<count> <dim>"` header, then one
    /// `token v1 .. vd` line per token.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "missing header"))?
            .map_err(|e| Error::io(path, e))?;
        let mut fields = header.split_whitespace();
        let mut header_num = |what: &str| -> Result<usize> {
            fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| Error::parse(path, 1, format!("header is missing {what}")))
        };
        let count = header_num("vocabulary count")?;
        let dim = header_num("dimension")?;

        let mut vocabulary = Vec::with_capacity(count);
        let mut vectors = Vec::with_capacity(count * dim);
        let mut seen = HashMap::with_capacity(count);
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields.next().expect("nonempty line").to_owned();
            let before = vectors.len();
            for f in fields {
                let v: f32 = f.parse().map_err(|_| {
                    Error::parse(path, lineno, format!("invalid value {f:?} for token {token:?}"))
                })?;
                vectors.push(v);
            }
            let got = vectors.len() - before;
            if got != dim {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("token {token:?} has {got} values, header declares {dim}"),
                ));
            }
            if seen.insert(token.clone(), lineno).is_some() {
                return Err(Error::parse(path, lineno, format!("duplicate token {token:?}")));
            }
            vocabulary.push(token);
        }
        if vocabulary.len() != count {
            return Err(Error::parse(
                path,
                1,
                format!("header declares {count} tokens, found {}", vocabulary.len()),
            ));
        }
        Self::from_parts(vocabulary, dim, vectors, None)
    }
}

pub fn cosine_slices(a: &[f32], b: &[f32]) -> Result<f64> {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Numeric("cosine of a zero-norm vector".into()));
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Vocabulary sorted by descending count, ties broken lexicographically.
fn build_vocabulary<T: AsRef<str>>(corpus: &[Vec<T>], min_count: u64) -> Vec<(String, u64)> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for doc in corpus {
        for t in doc {
            *counts.entry(t.as_ref()).or_default() += 1;
        }
    }
    let mut vocab: Vec<(String, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(t, c)| (t.to_owned(), c))
        .collect();
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    vocab
}

/// Storage for one weight table, either exclusively owned or shared between
/// concurrent workers.
trait Weights {
    fn get(&self, i: usize) -> f32;
    fn add(&mut self, i: usize, delta: f32);
}

impl Weights for &mut [f32] {
    #[inline]
    fn get(&self, i: usize) -> f32 {
        self[i]
    }

    #[inline]
    fn add(&mut self, i: usize, delta: f32) {
        self[i] += delta;
    }
}

/// Lock-free shared table. Concurrent read-modify-write cycles may lose
/// updates; that loss is accepted in concurrent mode.
#[derive(Clone, Copy)]
struct SharedWeights<'a>(&'a [AtomicU32]);

impl Weights for SharedWeights<'_> {
    #[inline]
    fn get(&self, i: usize) -> f32 {
        f32::from_bits(self.0[i].load(Ordering::Relaxed))
    }

    #[inline]
    fn add(&mut self, i: usize, delta: f32) {
        let v = self.get(i) + delta;
        self.0[i].store(v.to_bits(), Ordering::Relaxed);
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `-ln(sigmoid(x))`, stable for large |x|.
#[inline]
fn neg_log_sigmoid(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

struct Trainer<'a> {
    config: &'a SkipGramConfig,
    sampler: &'a WeightedIndex<f64>,
    keep_prob: Option<&'a [f64]>,
    total_steps: f64,
    progress: &'a AtomicU64,
}

impl Trainer<'_> {
    fn learning_rate(&self) -> f64 {
        let done = self.progress.load(Ordering::Relaxed) as f64;
        let lr0 = self.config.initial_learning_rate;
        (lr0 * (1.0 - done / (self.total_steps + 1.0))).max(lr0 * 1e-4)
    }

    /// One pass over `docs`. Returns (summed loss, number of pairs).
    fn run<W: Weights>(
        &self,
        docs: &[Vec<usize>],
        input: &mut W,
        output: &mut W,
        rng: &mut ChaCha8Rng,
    ) -> (f64, u64) {
        let dim = self.config.dim;
        let mut grad = vec![0.0f32; dim];
        let mut sentence = Vec::new();
        let (mut loss, mut pairs) = (0.0, 0u64);
        for doc in docs {
            sentence.clear();
            match self.keep_prob {
                Some(keep) => sentence.extend(doc.iter().copied().filter(|&w| rng.gen::<f64>() < keep[w])),
                None => sentence.extend_from_slice(doc),
            }
            let alpha = self.learning_rate() as f32;
            for (pos, &word) in sentence.iter().enumerate() {
                let reduce = rng.gen_range(0..self.config.window.max(1));
                let half = self.config.window - reduce.min(self.config.window);
                let lo = pos.saturating_sub(half);
                let hi = (pos + half).min(sentence.len() - 1);
                for (ctx_pos, &context) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
                    if ctx_pos == pos {
                        continue;
                    }
                    let in_base = context * dim;
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for d in 0..=self.config.negative_samples {
                        let (target, label) = if d == 0 {
                            (word, 1.0)
                        } else {
                            let t = self.sampler.sample(rng);
                            if t == word {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let out_base = target * dim;
                        let mut f = 0.0f32;
                        for j in 0..dim {
                            f += input.get(in_base + j) * output.get(out_base + j);
                        }
                        let f = f as f64;
                        loss += if label > 0.5 {
                            neg_log_sigmoid(f)
                        } else {
                            neg_log_sigmoid(-f)
                        };
                        let g = ((label - sigmoid(f)) as f32) * alpha;
                        for (j, gj) in grad.iter_mut().enumerate() {
                            *gj += g * output.get(out_base + j);
                            let x = input.get(in_base + j);
                            output.add(out_base + j, g * x);
                        }
                    }
                    for (j, g) in grad.iter().enumerate() {
                        input.add(in_base + j, *g);
                    }
                    pairs += 1;
                }
            }
            self.progress.fetch_add(doc.len() as u64, Ordering::Relaxed);
        }
        (loss, pairs)
    }
}

/// Train skip-gram embeddings with negative sampling.
///
/// With `threads == 1` the result is a pure function of `(corpus, config)`.
pub fn train_skipgram<T: AsRef<str>>(
    corpus: &[Vec<T>],
    config: &SkipGramConfig,
) -> Result<EmbeddingMatrix> {
    if config.dim == 0 || config.epochs == 0 {
        return Err(Error::Embedding("dim and epochs must be positive".into()));
    }
    let vocab = build_vocabulary(corpus, config.min_count);
    if vocab.is_empty() {
        return Err(Error::Embedding(format!(
            "no token reaches min_count={}",
            config.min_count
        )));
    }
    let index: HashMap<&str, usize> = vocab
        .iter()
        .enumerate()
        .map(|(i, (t, _))| (t.as_str(), i))
        .collect();
    let docs: Vec<Vec<usize>> = corpus
        .iter()
        .map(|d| d.iter().filter_map(|t| index.get(t.as_ref()).copied()).collect())
        .filter(|d: &Vec<usize>| d.len() > 1)
        .collect();

    let total_words: u64 = vocab.iter().map(|(_, c)| c).sum();
    let sampler = WeightedIndex::new(vocab.iter().map(|(_, c)| (*c as f64).powf(0.75)))
        .map_err(|e| Error::Embedding(e.to_string()))?;
    let keep_prob: Option<Vec<f64>> = config.subsample.map(|t| {
        vocab
            .iter()
            .map(|(_, c)| {
                let f = *c as f64 / total_words as f64;
                ((f / t).sqrt() + 1.0) * t / f
            })
            .collect()
    });

    let n = vocab.len();
    let dim = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let half = 0.5 / dim as f32;
    let mut input: Vec<f32> = (0..n * dim).map(|_| rng.gen_range(-half..half)).collect();
    let mut output = vec![0.0f32; n * dim];

    let progress = AtomicU64::new(0);
    let trainer = Trainer {
        config,
        sampler: &sampler,
        keep_prob: keep_prob.as_deref(),
        total_steps: (config.epochs as u64 * docs.iter().map(|d| d.len() as u64).sum::<u64>()) as f64,
        progress: &progress,
    };

    let mut epoch_losses = Vec::with_capacity(config.epochs);
    if config.threads <= 1 {
        for _ in 0..config.epochs {
            let (loss, pairs) =
                trainer.run(&docs, &mut input.as_mut_slice(), &mut output.as_mut_slice(), &mut rng);
            epoch_losses.push(loss / pairs.max(1) as f64);
        }
    } else {
        let shared_in: Vec<AtomicU32> = input.iter().map(|v| AtomicU32::new(v.to_bits())).collect();
        let shared_out: Vec<AtomicU32> =
            output.iter().map(|v| AtomicU32::new(v.to_bits())).collect();
        let chunk = docs.len().div_ceil(config.threads).max(1);
        for epoch in 0..config.epochs {
            let results: Vec<(f64, u64)> = std::thread::scope(|scope| {
                let handles: Vec<_> = docs
                    .chunks(chunk)
                    .enumerate()
                    .map(|(worker, part)| {
                        let trainer = &trainer;
                        let mut win = SharedWeights(&shared_in);
                        let mut wout = SharedWeights(&shared_out);
                        let seed = config
                            .seed
                            .wrapping_add(((epoch * config.threads + worker) as u64 + 1) * 0x9E37_79B9);
                        scope.spawn(move || {
                            let mut rng = ChaCha8Rng::seed_from_u64(seed);
                            trainer.run(part, &mut win, &mut wout, &mut rng)
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
            });
            let (loss, pairs) = results
                .iter()
                .fold((0.0, 0u64), |acc, r| (acc.0 + r.0, acc.1 + r.1));
            epoch_losses.push(loss / pairs.max(1) as f64);
        }
        input = shared_in
            .iter()
            .map(|a| f32::from_bits(a.load(Ordering::Relaxed)))
            .collect();
    }

    if let Some(bad) = epoch_losses.iter().find(|l| !l.is_finite()) {
        return Err(Error::Numeric(format!("training loss became {bad}")));
    }
    let vocabulary: Vec<String> = vocab.into_iter().map(|(t, _)| t).collect();
    for (i, token) in vocabulary.iter().enumerate() {
        let row = &input[i * dim..(i + 1) * dim];
        if row.iter().all(|v| *v == 0.0) || row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("degenerate vector for {token:?}")));
        }
    }
    log::info!(
        "trained {} vectors of dim {dim}; loss per epoch {:?}",
        vocabulary.len(),
        epoch_losses
    );
    EmbeddingMatrix::from_parts(
        vocabulary,
        dim,
        input,
        Some(TrainRecord {
            config: config.clone(),
            epoch_losses,
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[(&str, &[f32])]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(
            rows.iter().map(|(t, _)| t.to_string()).collect(),
            rows.iter().map(|(_, v)| v.to_vec()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn cosine_examples() {
        let m = matrix(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0]), ("c", &[1.0, 1.0])]);
        assert_eq!(m.cosine("a", "a").unwrap(), 1.0);
        assert_eq!(m.cosine("a", "b").unwrap(), 0.0);
        assert!((m.cosine("c", "a").unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(matches!(m.cosine("a", "zzz"), Err(Error::OutOfVocabulary(_))));
    }

    #[test]
    fn cosine_zero_vector_is_numeric_error() {
        let m = matrix(&[("a", &[1.0, 0.0]), ("z", &[0.0, 0.0])]);
        assert!(matches!(m.cosine("a", "z"), Err(Error::Numeric(_))));
    }

    fn synthetic_corpus() -> Vec<Vec<String>> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let group_a = ["alpha", "beta", "delta", "epsilon"];
        let group_b = ["gamma", "zeta", "theta", "kappa"];
        (0..400)
            .map(|i| {
                let group = if i % 2 == 0 { &group_a } else { &group_b };
                (0..12)
                    .map(|_| group[rng.gen_range(0..group.len())].to_string())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn training_separates_contexts() {
        let config = SkipGramConfig {
            dim: 20,
            epochs: 5,
            min_count: 1,
            seed: 3,
            ..Default::default()
        };
        let m = train_skipgram(&synthetic_corpus(), &config).unwrap();
        assert_eq!(m.dim(), 20);
        assert!(m.cosine("alpha", "beta").unwrap() > m.cosine("alpha", "gamma").unwrap());
        let losses = &m.train_record().unwrap().epoch_losses;
        assert!(losses.iter().all(|l| l.is_finite()));
        assert!(losses.last().unwrap() < losses.first().unwrap());
    }

    #[test]
    fn default_dimension_is_300() {
        let m = train_skipgram(
            &synthetic_corpus(),
            &SkipGramConfig {
                epochs: 1,
                min_count: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((0..m.len()).all(|i| m.row(i).len() == 300));
    }

    #[test]
    fn training_is_deterministic() {
        let config = SkipGramConfig {
            dim: 8,
            epochs: 2,
            min_count: 1,
            ..Default::default()
        };
        let a = train_skipgram(&synthetic_corpus(), &config).unwrap();
        let b = train_skipgram(&synthetic_corpus(), &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn concurrent_mode_trains() {
        let config = SkipGramConfig {
            dim: 16,
            epochs: 3,
            min_count: 1,
            threads: 4,
            ..Default::default()
        };
        let m = train_skipgram(&synthetic_corpus(), &config).unwrap();
        assert_eq!(m.len(), 8);
        assert!(m.cosine("alpha", "beta").unwrap() > m.cosine("alpha", "gamma").unwrap());
    }

    #[test]
    fn min_count_filters_rare_tokens() {
        let mut corpus = synthetic_corpus();
        corpus[0].push("rare".into());
        let m = train_skipgram(
            &corpus,
            &SkipGramConfig {
                dim: 4,
                epochs: 1,
                min_count: 2,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(!m.contains("rare"));
        assert!(m.contains("alpha"));
        let err = train_skipgram(
            &[vec!["one".to_string()]],
            &SkipGramConfig {
                min_count: 2,
                ..Default::default()
            },
        );
        assert!(err.is_err());
    }

    #[test]
    fn load_format_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.txt");
        std::fs::write(&p, "2 3\na 1 0 0\nb 0 1 0\n").unwrap();
        let m = EmbeddingMatrix::load(&p).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.dim(), 3);
        assert_eq!(m.vector("b").unwrap(), &[0.0, 1.0, 0.0]);

        std::fs::write(&p, "2 3\na 1 0 0\nshort 0 1\n").unwrap();
        let err = EmbeddingMatrix::load(&p).unwrap_err().to_string();
        assert!(err.contains("short"), "{err}");

        std::fs::write(&p, "2 3\na 1 0 0\na 0 1 0\n").unwrap();
        assert!(EmbeddingMatrix::load(&p).unwrap_err().to_string().contains("duplicate"));
    }

    #[test]
    fn save_load_round_trip() {
        let config = SkipGramConfig {
            dim: 7,
            epochs: 1,
            min_count: 1,
            ..Default::default()
        };
        let m = train_skipgram(&synthetic_corpus(), &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.txt");
        m.save(&p).unwrap();
        let back = EmbeddingMatrix::load(&p).unwrap();
        assert_eq!(back.vocabulary(), m.vocabulary());
        for i in 0..m.len() {
            assert_eq!(back.row(i), m.row(i));
        }
    }
}
