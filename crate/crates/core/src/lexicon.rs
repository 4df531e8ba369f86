//! The polarity lexicon model: TSV persistence, rescaling, overlap merging and
//! pairwise comparison.
//!
//! Scores are oriented so that positive values lean towards liberty and
//! negative values towards oppression.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "WE")]
    WordEmbedding,
    #[serde(rename = "CS")]
    Compositional,
    #[serde(rename = "OVERLAP")]
    Overlap,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::WordEmbedding => "WE",
            Method::Compositional => "CS",
            Method::Overlap => "OVERLAP",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "WE" => Ok(Method::WordEmbedding),
            "CS" => Ok(Method::Compositional),
            "OVERLAP" => Ok(Method::Overlap),
            other => Err(Error::Lexicon(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metadata {
    pub method: Method,
    pub source_dataset: String,
    pub config_digest: String,
    pub seed: Option<u64>,
    /// Additional provenance, serialized in key order.
    pub extra: BTreeMap<String, String>,
}

impl Metadata {
    pub fn new(method: Method, source_dataset: impl Into<String>) -> Self {
        Metadata {
            method,
            source_dataset: source_dataset.into(),
            config_digest: String::new(),
            seed: None,
            extra: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.insert(key.to_owned(), value.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub score: f64,
    /// Optional per-class association scores.
    pub aux: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    entries: IndexMap<String, Entry>,
    pub metadata: Metadata,
}

impl Lexicon {
    pub fn new(metadata: Metadata) -> Self {
        Lexicon {
            entries: IndexMap::new(),
            metadata,
        }
    }

    /// Build from `(token, score)` pairs, preserving their order.
    pub fn from_scores<I, S>(metadata: Metadata, scores: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut lex = Lexicon::new(metadata);
        for (token, score) in scores {
            lex.insert(token.into(), score, Vec::new())?;
        }
        Ok(lex)
    }

    pub fn insert(&mut self, token: String, score: f64, aux: Vec<(String, f64)>) -> Result<()> {
        if !score.is_finite() {
            return Err(Error::Lexicon(format!("non-finite score for {token:?}")));
        }
        if self.entries.contains_key(&token) {
            return Err(Error::Lexicon(format!("duplicate token {token:?}")));
        }
        self.entries.insert(token, Entry { score, aux });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn score(&self, token: &str) -> Option<f64> {
        self.entries.get(token).map(|e| e.score)
    }

    pub fn entry(&self, token: &str) -> Option<&Entry> {
        self.entries.get(token)
    }

    /// Position of `token` in the lexicon's order.
    pub fn position(&self, token: &str) -> Option<usize> {
        self.entries.get_index_of(token)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(t, e)| (t.as_str(), e.score))
    }

    pub fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.values().map(|e| e.score)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let m = &self.metadata;
        let _ = writeln!(out, "# method={}", m.method);
        let _ = writeln!(out, "# source_dataset={}", m.source_dataset);
        let _ = writeln!(out, "# config_digest={}", m.config_digest);
        if let Some(seed) = m.seed {
            let _ = writeln!(out, "# seed={seed}");
        }
        for (k, v) in &m.extra {
            let _ = writeln!(out, "# {k}={v}");
        }
        for (token, entry) in &self.entries {
            // `Display` for f64 prints the shortest decimal string that
            // round-trips exactly, never in exponent notation.
            let _ = write!(out, "{token}\t{}", entry.score);
            for (class, v) in &entry.aux {
                let _ = write!(out, "\t{class}:{v}");
            }
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the canonical TSV rendering.
    pub fn digest(&self) -> String {
        sha256_hex(self.to_tsv().as_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&text, path)
    }

    pub fn parse_tsv(text: &str, origin: &Path) -> Result<Self> {
        let mut header: BTreeMap<String, String> = BTreeMap::new();
        let mut rows: Vec<(usize, &str)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest
                    .trim_start()
                    .split_once('=')
                    .ok_or_else(|| Error::parse(origin, lineno, "header line without '='"))?;
                header.insert(k.trim().to_owned(), v.to_owned());
            } else if !line.is_empty() {
                rows.push((lineno, line));
            }
        }
        let method = header
            .remove("method")
            .ok_or_else(|| Error::parse(origin, 1, "missing method header"))?
            .parse()?;
        let mut metadata = Metadata::new(method, header.remove("source_dataset").unwrap_or_default());
        metadata.config_digest = header.remove("config_digest").unwrap_or_default();
        metadata.seed = match header.remove("seed") {
            Some(s) => Some(
                s.parse()
                    .map_err(|_| Error::parse(origin, 1, format!("invalid seed {s:?}")))?,
            ),
            None => None,
        };
        metadata.extra = header;

        let mut lex = Lexicon::new(metadata);
        for (lineno, line) in rows {
            let mut fields = line.split('\t');
            let token = fields.next().unwrap_or_default();
            if token.is_empty() {
                return Err(Error::parse(origin, lineno, "empty token"));
            }
            let score: f64 = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::parse(origin, lineno, format!("missing or invalid score for {token:?}")))?;
            let aux = fields
                .map(|f| {
                    let (class, v) = f.rsplit_once(':').ok_or_else(|| {
                        Error::parse(origin, lineno, format!("malformed class score {f:?}"))
                    })?;
                    let v: f64 = v.parse().map_err(|_| {
                        Error::parse(origin, lineno, format!("malformed class score {f:?}"))
                    })?;
                    Ok((class.to_owned(), v))
                })
                .collect::<Result<Vec<_>>>()?;
            if lex.entries.contains_key(token) {
                return Err(Error::parse(origin, lineno, format!("duplicate token {token:?}")));
            }
            lex.insert(token.to_owned(), score, aux)
                .map_err(|e| Error::parse(origin, lineno, e.to_string()))?;
        }
        Ok(lex)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RescaleMode {
    None,
    MinmaxSymmetric,
    Zscore,
}

impl fmt::Display for RescaleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RescaleMode::None => "none",
            RescaleMode::MinmaxSymmetric => "minmax_symmetric",
            RescaleMode::Zscore => "zscore",
        })
    }
}

impl FromStr for RescaleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(RescaleMode::None),
            "minmax_symmetric" => Ok(RescaleMode::MinmaxSymmetric),
            "zscore" => Ok(RescaleMode::Zscore),
            other => Err(Error::Lexicon(format!("unknown rescale mode {other:?}"))),
        }
    }
}

pub fn rescale(lexicon: &Lexicon, mode: RescaleMode) -> Result<Lexicon> {
    if mode == RescaleMode::None {
        return Ok(lexicon.clone());
    }
    if lexicon.is_empty() {
        return Err(Error::Lexicon("cannot rescale an empty lexicon".into()));
    }
    let map: Box<dyn Fn(f64) -> f64> = match mode {
        RescaleMode::None => unreachable!(),
        RescaleMode::MinmaxSymmetric => {
            let min = lexicon.scores().fold(f64::INFINITY, f64::min);
            let max = lexicon.scores().fold(f64::NEG_INFINITY, f64::max);
            if max <= min {
                return Err(Error::Lexicon("constant scores cannot be min-max rescaled".into()));
            }
            Box::new(move |s| 2.0 * (s - min) / (max - min) - 1.0)
        }
        RescaleMode::Zscore => {
            let n = lexicon.len() as f64;
            let mean = lexicon.scores().sum::<f64>() / n;
            let var = lexicon.scores().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
            if var <= 0.0 {
                return Err(Error::Lexicon("constant scores cannot be standardized".into()));
            }
            let sd = var.sqrt();
            Box::new(move |s| (s - mean) / sd)
        }
    };
    let mut out = lexicon.clone();
    for entry in out.entries.values_mut() {
        entry.score = map(entry.score);
    }
    out.metadata.extra.insert("rescale".into(), mode.to_string());
    Ok(out)
}

/// Smallest appearance count `t` with `t / n >= selection / 100`.
pub fn inclusion_threshold(selection: f64, n: usize) -> usize {
    let exact = selection * n as f64 / 100.0;
    // Guard against 0.1 * 10 style representation error before taking the ceiling.
    let t = (exact - 1e-9).ceil();
    (t as usize).clamp(1, n)
}

/// Merge lexicons: a token enters the result when it appears in at least
/// `ceil(selection/100 * N)` of them, scored by the mean of its available
/// (optionally rescaled) scores.
pub fn overlap_merge(lexicons: &[Lexicon], selection: f64, mode: RescaleMode) -> Result<Lexicon> {
    if lexicons.len() < 2 {
        return Err(Error::Lexicon(format!(
            "overlap merge needs at least two lexicons, got {}",
            lexicons.len()
        )));
    }
    if !(selection > 0.0 && selection <= 100.0) {
        return Err(Error::Lexicon(format!(
            "selection must lie in (0, 100], got {selection}"
        )));
    }
    let threshold = inclusion_threshold(selection, lexicons.len());
    let prepared = lexicons
        .iter()
        .map(|l| rescale(l, mode))
        .collect::<Result<Vec<_>>>()?;

    let mut pooled: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for lex in &prepared {
        for (token, score) in lex.iter() {
            pooled.entry(token).or_default().push(score);
        }
    }
    let mut digests: Vec<String> = lexicons.iter().map(Lexicon::digest).collect();
    digests.sort();
    let constituents = digests.join(",");
    let config = format!("selection={selection};rescale={mode};constituents={constituents}");
    let mut metadata = Metadata::new(Method::Overlap, "overlap")
        .with("constituents", &constituents)
        .with("selection", selection)
        .with("threshold", threshold)
        .with("rescale", mode);
    metadata.config_digest = sha256_hex(config.as_bytes());

    let mut out = Lexicon::new(metadata);
    for (token, mut scores) in pooled {
        if scores.len() >= threshold {
            // Sorting fixes the summation order, so input order cannot leak into the mean.
            scores.sort_by(f64::total_cmp);
            let mean = scores.iter().sum::<f64>() / scores.len() as f64;
            out.insert(token.to_owned(), mean, Vec::new())?;
        }
    }
    if out.is_empty() {
        log::warn!("overlap merge at selection {selection}% produced an empty lexicon");
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    /// Mean absolute score difference over the shared vocabulary.
    pub distance: f64,
    pub shared: usize,
    /// Shared tokens with nonzero difference, sorted by |a - b| descending;
    /// each carries the signed difference `a - b`.
    pub most_distant: Vec<(String, f64)>,
    /// Identifies the metric; this is an approximate domain-comparison score.
    pub metric: &'static str,
}

pub const COMPARISON_METRIC: &str = "mean_abs_diff_minmax (approximate domain comparison)";

fn rescale_for_comparison(lex: &Lexicon) -> Result<Lexicon> {
    match rescale(lex, RescaleMode::MinmaxSymmetric) {
        Ok(l) => Ok(l),
        // A constant lexicon has no range to normalize; keep its raw scores.
        Err(_) if !lex.is_empty() => Ok(lex.clone()),
        Err(e) => Err(e),
    }
}

pub fn compare(a: &Lexicon, b: &Lexicon) -> Result<Comparison> {
    let a = rescale_for_comparison(a)?;
    let b = rescale_for_comparison(b)?;
    let b_scores: HashMap<&str, f64> = b.iter().collect();
    let mut diffs: Vec<(String, f64)> = a
        .iter()
        .filter_map(|(t, sa)| b_scores.get(t).map(|sb| (t.to_owned(), sa - sb)))
        .collect();
    if diffs.is_empty() {
        return Err(Error::Lexicon("lexicons share no tokens".into()));
    }
    let shared = diffs.len();
    let mut abs: Vec<f64> = diffs.iter().map(|(_, d)| d.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let distance = abs.iter().sum::<f64>() / shared as f64;
    diffs.retain(|(_, d)| *d != 0.0);
    diffs.sort_by(|x, y| y.1.abs().total_cmp(&x.1.abs()).then_with(|| x.0.cmp(&y.0)));
    Ok(Comparison {
        distance,
        shared,
        most_distant: diffs,
        metric: COMPARISON_METRIC,
    })
}

/// Vocabulary of a lexicon as a sorted set.
pub fn vocabulary(lex: &Lexicon) -> BTreeSet<String> {
    lex.tokens().map(str::to_owned).collect()
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn arb_lexicon() -> impl Strategy<Value = Lexicon> {
        prop::collection::btree_map("[a-h]{1,2}", -3.0f64..3.0, 1..12).prop_map(|m| {
            Lexicon::from_scores(Metadata::new(Method::WordEmbedding, "p"), m).unwrap()
        })
    }

    proptest! {
        #[test]
        fn compare_is_a_symmetric_distance(a in arb_lexicon(), b in arb_lexicon()) {
            if let Ok(ab) = compare(&a, &b) {
                let ba = compare(&b, &a).unwrap();
                prop_assert!(ab.distance >= 0.0);
                prop_assert!((ab.distance - ba.distance).abs() < 1e-12);
            }
            prop_assert_eq!(compare(&a, &a).unwrap().distance, 0.0);
        }

        #[test]
        fn tsv_round_trip_exact(a in arb_lexicon()) {
            let back = Lexicon::parse_tsv(&a.to_tsv(), Path::new("p")).unwrap();
            prop_assert_eq!(back, a);
        }
    }
}
