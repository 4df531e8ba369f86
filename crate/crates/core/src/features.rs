//! Document featurizers: lexicon-indexed vectors, statistical summaries,
//! unigram presence baselines and the SVD-reduced combined representation.
//!
//! Every vector carries a schema id naming the featurizer and the digest of
//! the lexicon or vocabulary it was built from. Fitted featurizers also carry
//! a lineage digest of the document ids they were fit on.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::corpus::Document;
use crate::digest::{id_set_digest, sha256_hex, short};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::svd::{truncated_svd, RandomizedSvdConfig};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SchemaId(pub String);

impl fmt::Display for SchemaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub schema: SchemaId,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub const STAT_SUMMARY_LEN: usize = 5;

pub fn lexicon_schema(lexicon: &Lexicon) -> SchemaId {
    SchemaId(format!("lex:{}", short(&lexicon.digest())))
}

/// Presence vector in lexicon order: a token's score if it occurs in the
/// document, zero otherwise.
pub fn doc_vector<S: AsRef<str>>(lexicon: &Lexicon, tokens: &[S]) -> FeatureVector {
    FeatureVector {
        values: presence_values(lexicon, tokens),
        schema: lexicon_schema(lexicon),
    }
}

fn presence_values<S: AsRef<str>>(lexicon: &Lexicon, tokens: &[S]) -> Vec<f64> {
    let mut values = vec![0.0; lexicon.len()];
    for t in tokens {
        if let Some(i) = lexicon.position(t.as_ref()) {
            values[i] = lexicon.entry(t.as_ref()).expect("indexed token").score;
        }
    }
    values
}

fn summary_values<S: AsRef<str>>(lexicon: &Lexicon, tokens: &[S]) -> [f64; STAT_SUMMARY_LEN] {
    let mut matched: Vec<f64> = tokens.iter().filter_map(|t| lexicon.score(t.as_ref())).collect();
    if matched.is_empty() {
        return [0.0; STAT_SUMMARY_LEN];
    }
    matched.sort_by(f64::total_cmp);
    let n = matched.len();
    let mean = matched.iter().sum::<f64>() / n as f64;
    let min = matched[0];
    let max = matched[n - 1];
    let median = if n % 2 == 1 {
        matched[n / 2]
    } else {
        (matched[n / 2 - 1] + matched[n / 2]) / 2.0
    };
    let variance = matched.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    [mean, max, median, variance, max - min]
}

/// `[mean, max, median, population variance, max - min]` over the scores of
/// document tokens found in the lexicon, duplicates counted.
pub fn stat_summary<S: AsRef<str>>(lexicon: &Lexicon, tokens: &[S]) -> FeatureVector {
    FeatureVector {
        values: summary_values(lexicon, tokens).to_vec(),
        schema: SchemaId(format!("stat:{}", short(&lexicon.digest()))),
    }
}

/// Lexicon vector followed by the statistical summary.
pub fn extended_vector<S: AsRef<str>>(lexicon: &Lexicon, tokens: &[S]) -> FeatureVector {
    let mut values = presence_values(lexicon, tokens);
    values.extend_from_slice(&summary_values(lexicon, tokens));
    FeatureVector {
        values,
        schema: SchemaId(format!("lex+stat:{}", short(&lexicon.digest()))),
    }
}

/// Lineage digest of the documents a featurizer was fit on.
pub fn lineage_of<'a>(docs: impl IntoIterator<Item = &'a Document>) -> String {
    id_set_digest(docs.into_iter().map(|d| d.id.as_str()))
}

/// Binary presence over the most frequent training tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct UnigramFeaturizer {
    vocabulary: Vec<String>,
    index: HashMap<String, usize>,
    schema: SchemaId,
    lineage: String,
}

impl UnigramFeaturizer {
    /// Vocabulary = top-`size` tokens by training frequency, ties lexicographic.
    pub fn fit(size: usize, train_docs: &[Document]) -> Result<Self> {
        if size == 0 {
            return Err(Error::Features("unigram vocabulary size must be positive".into()));
        }
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for d in train_docs {
            for t in &d.tokens {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        if ranked.len() < size {
            log::warn!(
                "requested {size} unigram features but only {} distinct tokens exist; using all",
                ranked.len()
            );
        }
        let vocabulary: Vec<String> = ranked.into_iter().take(size).map(|(t, _)| t.to_owned()).collect();
        let index = vocabulary.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let schema = SchemaId(format!(
            "unigram:{size}:{}",
            short(&sha256_hex(vocabulary.join("\n").as_bytes()))
        ));
        Ok(UnigramFeaturizer {
            vocabulary,
            index,
            schema,
            lineage: lineage_of(train_docs),
        })
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn lineage(&self) -> &str {
        &self.lineage
    }

    pub fn apply<S: AsRef<str>>(&self, tokens: &[S]) -> FeatureVector {
        let mut values = vec![0.0; self.vocabulary.len()];
        for t in tokens {
            if let Some(&i) = self.index.get(t.as_ref()) {
                values[i] = 1.0;
            }
        }
        FeatureVector {
            values,
            schema: self.schema.clone(),
        }
    }
}

/// Per-lexicon projection onto the leading right singular directions of the
/// training feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdReducer {
    input_schema: SchemaId,
    basis: DMatrix<f64>,
    singular_values: Vec<f64>,
    lineage: String,
}

impl SvdReducer {
    /// Fit on the `n × d` training matrix `rows`.
    pub fn fit(
        rows: &[Vec<f64>],
        k: usize,
        input_schema: SchemaId,
        lineage: String,
        config: &RandomizedSvdConfig,
    ) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if n == 0 || d == 0 {
            return Err(Error::Features(format!("cannot fit SVD on a {n}×{d} matrix")));
        }
        let cap = n.min(d);
        if k > cap {
            log::warn!("SVD target dimension {k} exceeds min(n, d) = {cap}; clamping");
        }
        let a = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
        let svd = truncated_svd(&a, k.min(cap), config)?;
        Ok(SvdReducer {
            input_schema,
            basis: svd.v_t,
            singular_values: svd.singular_values,
            lineage,
        })
    }

    pub fn k(&self) -> usize {
        self.basis.nrows()
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn input_schema(&self) -> &SchemaId {
        &self.input_schema
    }

    pub fn lineage(&self) -> &str {
        &self.lineage
    }

    pub fn schema(&self) -> SchemaId {
        SchemaId(format!("svd{}:{}", self.k(), self.input_schema))
    }

    pub fn reduce(&self, v: &FeatureVector) -> Result<FeatureVector> {
        if v.schema != self.input_schema {
            return Err(Error::Features(format!(
                "reducer fit on {} cannot project a {} vector",
                self.input_schema, v.schema
            )));
        }
        let x = DVector::from_column_slice(&v.values);
        let projected = &self.basis * x;
        Ok(FeatureVector {
            values: projected.iter().copied().collect(),
            schema: self.schema(),
        })
    }
}

/// Fit one reducer per lexicon on the training documents.
pub fn fit_reducers(
    lexicons: &[Lexicon],
    train_docs: &[Document],
    k: usize,
    config: &RandomizedSvdConfig,
) -> Result<Vec<SvdReducer>> {
    let lineage = lineage_of(train_docs);
    lexicons
        .iter()
        .map(|lex| {
            let rows: Vec<Vec<f64>> = train_docs.iter().map(|d| presence_values(lex, &d.tokens)).collect();
            SvdReducer::fit(&rows, k, lexicon_schema(lex), lineage.clone(), config)
        })
        .collect()
}

/// Concatenation of the reduced lexicon vectors, in lexicon order.
pub fn combined_features<S: AsRef<str>>(
    lexicons: &[Lexicon],
    reducers: &[SvdReducer],
    tokens: &[S],
) -> Result<FeatureVector> {
    if lexicons.len() != reducers.len() {
        return Err(Error::Features(format!(
            "{} lexicons but {} reducers",
            lexicons.len(),
            reducers.len()
        )));
    }
    let mut values = Vec::new();
    let mut parts = Vec::with_capacity(lexicons.len());
    for (lex, reducer) in lexicons.iter().zip(reducers) {
        let reduced = reducer.reduce(&doc_vector(lex, tokens))?;
        values.extend(reduced.values);
        parts.push(reduced.schema.0);
    }
    Ok(FeatureVector {
        values,
        schema: SchemaId(format!("combined[{}]", parts.join(","))),
    })
}

/// A featurizer ready to be applied to documents.
#[derive(Debug, Clone)]
pub enum Featurizer {
    Lexicon { lexicon: Lexicon, with_stats: bool },
    Unigram(UnigramFeaturizer),
    Combined { lexicons: Vec<Lexicon>, reducers: Vec<SvdReducer> },
}

impl Featurizer {
    pub fn apply<S: AsRef<str>>(&self, tokens: &[S]) -> Result<FeatureVector> {
        match self {
            Featurizer::Lexicon { lexicon, with_stats: false } => Ok(doc_vector(lexicon, tokens)),
            Featurizer::Lexicon { lexicon, with_stats: true } => Ok(extended_vector(lexicon, tokens)),
            Featurizer::Unigram(u) => Ok(u.apply(tokens)),
            Featurizer::Combined { lexicons, reducers } => combined_features(lexicons, reducers, tokens),
        }
    }

    /// Digests of the document sets this featurizer was fit on. Empty for
    /// featurizers that are not fit on documents.
    pub fn lineages(&self) -> BTreeSet<&str> {
        match self {
            Featurizer::Lexicon { .. } => BTreeSet::new(),
            Featurizer::Unigram(u) => std::iter::once(u.lineage()).collect(),
            Featurizer::Combined { reducers, .. } => reducers.iter().map(SvdReducer::lineage).collect(),
        }
    }

    pub fn lexicons(&self) -> Vec<&Lexicon> {
        match self {
            Featurizer::Lexicon { lexicon, .. } => vec![lexicon],
            Featurizer::Unigram(_) => Vec::new(),
            Featurizer::Combined { lexicons, .. } => lexicons.iter().collect(),
        }
    }

    /// Feature matrix for `docs`, checking that every row shares one schema.
    pub fn matrix(&self, docs: &[Document]) -> Result<(Vec<Vec<f64>>, SchemaId)> {
        let mut rows = Vec::with_capacity(docs.len());
        let mut schema: Option<SchemaId> = None;
        for d in docs {
            let v = self.apply(&d.tokens)?;
            match &schema {
                None => schema = Some(v.schema.clone()),
                Some(s) if *s != v.schema => {
                    return Err(Error::Features(format!("mixed schemas {s} and {}", v.schema)))
                }
                _ => {}
            }
            rows.push(v.values);
        }
        let schema = match schema {
            Some(s) => s,
            None => self.apply::<&str>(&[])?.schema,
        };
        Ok((rows, schema))
    }
}

/// Write a feature matrix as CSV with a schema comment line.
pub fn write_features_csv(
    path: &Path,
    schema: &SchemaId,
    docs: &[Document],
    rows: &[Vec<f64>],
) -> Result<()> {
    let io = |e| Error::io(path, e);
    let file = std::fs::File::create(path).map_err(io)?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "# schema={schema}").map_err(io)?;
    let dim = rows.first().map_or(0, Vec::len);
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend((0..dim).map(|i| format!("f{i}")));
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for (d, row) in docs.iter().zip(rows) {
        write!(out, "{},{}", csv_field(&d.id), d.label.name()).map_err(io)?;
        for v in row {
            write!(out, ",{v}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    out.flush().map_err(io)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Label, Scheme};
    use crate::lexicon::{Metadata, Method};

    fn lex(entries: &[(&str, f64)]) -> Lexicon {
        Lexicon::from_scores(
            Metadata::new(Method::Compositional, "t"),
            entries.iter().map(|(t, s)| (*t, *s)),
        )
        .unwrap()
    }

    fn doc(id: &str, tokens: &[&str]) -> Document {
        Document {
            id: id.into(),
            raw_text: String::new(),
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
            label: Label::parse(Scheme::BinarySide, "Libertarian").unwrap(),
        }
    }

    #[test]
    fn doc_vector_examples() {
        let l = lex(&[("free", 0.8), ("state", -0.5)]);
        assert_eq!(doc_vector(&l, &["free", "people"]).values, vec![0.8, 0.0]);
        assert_eq!(doc_vector(&l, &["nothing"]).values, vec![0.0, 0.0]);
        assert_eq!(doc_vector(&l, &["free", "free", "state"]).values, vec![0.8, -0.5]);
    }

    #[test]
    fn stat_summary_examples() {
        let l = lex(&[("a", 1.0), ("b", 2.0), ("c", 3.0), ("e", 5.0)]);
        let s = stat_summary(&l, &["a", "b", "c"]).values;
        let expect = [2.0, 3.0, 2.0, 2.0 / 3.0, 2.0];
        for (x, y) in s.iter().zip(expect) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(stat_summary(&l, &["e"]).values, vec![5.0, 5.0, 5.0, 0.0, 0.0]);
        assert_eq!(stat_summary(&l, &["zzz"]).values, vec![0.0; 5]);
        // duplicates count, even-length median
        assert_eq!(stat_summary(&l, &["a", "a", "c", "e"]).values[2], 2.0);
    }

    #[test]
    fn extended_vector_appends_summary() {
        let l = lex(&[("free", 0.8), ("state", -0.5)]);
        let v = extended_vector(&l, &["free"]);
        assert_eq!(v.len(), 2 + STAT_SUMMARY_LEN);
        assert_ne!(v.schema, doc_vector(&l, &["free"]).schema);
    }

    #[test]
    fn unigram_examples() {
        let docs = vec![
            doc("1", &["free", "state", "free"]),
            doc("2", &["state", "people", "free"]),
        ];
        let u = UnigramFeaturizer::fit(2, &docs).unwrap();
        assert_eq!(u.vocabulary(), &["free", "state"]);
        assert_eq!(u.apply(&["free", "people"]).values, vec![1.0, 0.0]);
        assert_eq!(u.apply(&["unseen"]).values, vec![0.0, 0.0]);
        let all = UnigramFeaturizer::fit(1000, &docs).unwrap();
        assert_eq!(all.vocabulary().len(), 3);
    }

    #[test]
    fn reducer_rejects_foreign_schema() {
        let l = lex(&[("a", 1.0), ("b", -1.0)]);
        let other = lex(&[("a", 1.0), ("c", 2.0)]);
        let docs = vec![doc("1", &["a"]), doc("2", &["b"]), doc("3", &["a", "b"])];
        let reducers = fit_reducers(std::slice::from_ref(&l), &docs, 2, &RandomizedSvdConfig::default()).unwrap();
        assert!(combined_features(&[other], &reducers, &["a"]).is_err());
        assert!(combined_features(&[l.clone(), l], &reducers, &["a"]).is_err());
    }

    #[test]
    fn combined_single_lexicon_matches_reduce() {
        let l = lex(&[("a", 1.0), ("b", -1.0), ("c", 0.5)]);
        let docs = vec![doc("1", &["a"]), doc("2", &["b", "c"]), doc("3", &["a", "c"])];
        let reducers = fit_reducers(std::slice::from_ref(&l), &docs, 2, &RandomizedSvdConfig::default()).unwrap();
        let direct = reducers[0].reduce(&doc_vector(&l, &["a", "b"])).unwrap();
        let combined = combined_features(std::slice::from_ref(&l), &reducers, &["a", "b"]).unwrap();
        assert_eq!(direct.values, combined.values);
    }

    #[test]
    fn features_csv_has_schema_header() {
        let l = lex(&[("a", 1.0)]);
        let docs = vec![doc("x,1", &["a"])];
        let f = Featurizer::Lexicon { lexicon: l, with_stats: false };
        let (rows, schema) = f.matrix(&docs).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        write_features_csv(&p, &schema, &docs, &rows).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("# schema=lex:"));
        assert!(text.contains("\"x,1\",Libertarian,1"));
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use crate::lexicon::{Metadata, Method};
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn doc_vector_depends_on_token_set(
            scores in prop::collection::btree_map("[a-f]", -2.0f64..2.0, 1..6),
            mut tokens in prop::collection::vec("[a-h]", 0..12),
        ) {
            let l = Lexicon::from_scores(Metadata::new(Method::Compositional, "p"), scores).unwrap();
            let v = doc_vector(&l, &tokens);
            tokens.reverse();
            let doubled: Vec<String> = tokens.iter().chain(tokens.iter()).cloned().collect();
            prop_assert_eq!(&v, &doc_vector(&l, &tokens));
            prop_assert_eq!(&v, &doc_vector(&l, &doubled));

            let s = stat_summary(&l, &tokens).values;
            let (max, median, ptp) = (s[1], s[2], s[4]);
            let min = max - ptp;
            prop_assert!(min <= median + 1e-12 && median <= max + 1e-12);
        }
    }
}
