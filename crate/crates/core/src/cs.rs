//! Compositional-semantics lexicons.
//!
//! Document labels are projected onto words through the product of a
//! word-by-document matrix (per-document relative counts) and a one-hot
//! document-by-class matrix. The resulting word-by-class matrix is normalized
//! column-wise, then row-wise, and scalarized as `liberty - oppression`.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use crate::corpus::LabeledDataset;
use crate::digest::{id_set_digest, sha256_hex};
use crate::error::{Error, Result};
use crate::lexicon::{Lexicon, Metadata, Method};

/// Sparse word × document matrix, stored per document column.
#[derive(Debug, Clone, PartialEq)]
pub struct WordDocMatrix {
    pub words: Vec<String>,
    pub docs: Vec<String>,
    /// `columns[j]` lists `(word index, value)` for document `j`.
    pub columns: Vec<Vec<(usize, f64)>>,
}

impl WordDocMatrix {
    pub fn from_dense(words: Vec<String>, docs: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() != words.len() || rows.iter().any(|r| r.len() != docs.len()) {
            return Err(Error::Compositional("dense word-document matrix has the wrong shape".into()));
        }
        let columns = (0..docs.len())
            .map(|j| {
                (0..words.len())
                    .filter(|&i| rows[i][j] != 0.0)
                    .map(|i| (i, rows[i][j]))
                    .collect()
            })
            .collect();
        Ok(WordDocMatrix { words, docs, columns })
    }

    pub fn get(&self, word: usize, doc: usize) -> f64 {
        self.columns[doc]
            .iter()
            .find(|(w, _)| *w == word)
            .map_or(0.0, |(_, v)| *v)
    }
}

/// Document × class matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DocMoralMatrix {
    pub docs: Vec<String>,
    pub classes: Vec<String>,
    /// Row-major, `docs.len() × classes.len()`.
    pub values: Vec<f64>,
}

impl DocMoralMatrix {
    pub fn get(&self, doc: usize, class: usize) -> f64 {
        self.values[doc * self.classes.len() + class]
    }

    pub fn from_dense(docs: Vec<String>, classes: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() != docs.len() || rows.iter().any(|r| r.len() != classes.len()) {
            return Err(Error::Compositional("dense document-class matrix has the wrong shape".into()));
        }
        Ok(DocMoralMatrix {
            docs,
            classes,
            values: rows.concat(),
        })
    }
}

/// Word × class association matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WordMoralMatrix {
    pub words: Vec<String>,
    pub classes: Vec<String>,
    /// Row-major, `words.len() × classes.len()`.
    pub values: Vec<f64>,
}

impl WordMoralMatrix {
    pub fn row(&self, word: usize) -> &[f64] {
        let c = self.classes.len();
        &self.values[word * c..(word + 1) * c]
    }

    pub fn get(&self, word: usize, class: usize) -> f64 {
        self.values[word * self.classes.len() + class]
    }
}

/// Build the word-document and document-class matrices.
///
/// Documents are ordered by id and empty documents are skipped, so the result
/// does not depend on the dataset's document order. Column values are divided
/// by the document's full token count, before the frequency cut-off.
pub fn build_matrices(dataset: &LabeledDataset, min_frequency: u64) -> Result<(WordDocMatrix, DocMoralMatrix)> {
    let mut docs: Vec<_> = dataset.documents.iter().filter(|d| !d.tokens.is_empty()).collect();
    docs.sort_by(|a, b| a.id.cmp(&b.id));

    let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
    for d in &docs {
        for t in &d.tokens {
            *freq.entry(t).or_default() += 1;
        }
    }
    let words: Vec<String> = freq
        .iter()
        .filter(|(_, &c)| c >= min_frequency)
        .map(|(t, _)| t.to_string())
        .collect();
    if words.is_empty() {
        return Err(Error::Compositional(format!(
            "no token reaches the frequency cut-off of {min_frequency}"
        )));
    }
    let index: HashMap<&str, usize> = words.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();

    let classes: Vec<String> = dataset.scheme.classes().iter().map(|c| c.to_string()).collect();
    let mut columns = Vec::with_capacity(docs.len());
    let mut values = vec![0.0; docs.len() * classes.len()];
    for (j, d) in docs.iter().enumerate() {
        let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
        for t in &d.tokens {
            if let Some(&w) = index.get(t.as_str()) {
                *counts.entry(w).or_default() += 1;
            }
        }
        let len = d.tokens.len() as f64;
        columns.push(counts.into_iter().map(|(w, c)| (w, c as f64 / len)).collect());
        values[j * classes.len() + d.label.class_index()] = 1.0;
    }
    let doc_ids: Vec<String> = docs.iter().map(|d| d.id.clone()).collect();
    Ok((
        WordDocMatrix {
            words,
            docs: doc_ids.clone(),
            columns,
        },
        DocMoralMatrix {
            docs: doc_ids,
            classes,
            values,
        },
    ))
}

/// Raw product of the word-document and document-class matrices.
pub fn compose(wd: &WordDocMatrix, dm: &DocMoralMatrix) -> Result<WordMoralMatrix> {
    if wd.docs != dm.docs {
        return Err(Error::Compositional(format!(
            "document ids differ between matrices ({} vs {} documents)",
            wd.docs.len(),
            dm.docs.len()
        )));
    }
    let nc = dm.classes.len();
    let mut values = vec![0.0; wd.words.len() * nc];
    for (j, column) in wd.columns.iter().enumerate() {
        let label_row = &dm.values[j * nc..(j + 1) * nc];
        for &(w, v) in column {
            for (c, &m) in label_row.iter().enumerate() {
                if m != 0.0 {
                    values[w * nc + c] += v * m;
                }
            }
        }
    }
    Ok(WordMoralMatrix {
        words: wd.words.clone(),
        classes: dm.classes.clone(),
        values,
    })
}

/// Column-wise then row-wise normalization. All-zero rows are dropped.
pub fn normalize(raw: &WordMoralMatrix) -> Result<WordMoralMatrix> {
    let nc = raw.classes.len();
    if raw.values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::Compositional("word-class matrix has negative or non-finite entries".into()));
    }
    let mut col_sums = vec![0.0; nc];
    for w in 0..raw.words.len() {
        for (c, v) in raw.row(w).iter().enumerate() {
            col_sums[c] += v;
        }
    }
    if let Some(c) = col_sums.iter().position(|s| *s == 0.0) {
        return Err(Error::Compositional(format!(
            "class {:?} has no associated words",
            raw.classes[c]
        )));
    }

    let mut words = Vec::with_capacity(raw.words.len());
    let mut values = Vec::with_capacity(raw.values.len());
    let mut dropped = 0usize;
    for (w, word) in raw.words.iter().enumerate() {
        let scaled: Vec<f64> = raw.row(w).iter().zip(&col_sums).map(|(v, s)| v / s).collect();
        let total: f64 = scaled.iter().sum();
        if total == 0.0 {
            dropped += 1;
            continue;
        }
        words.push(word.clone());
        values.extend(scaled.iter().map(|v| v / total));
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} word(s) with no class association");
    }
    Ok(WordMoralMatrix {
        words,
        classes: raw.classes.clone(),
        values,
    })
}

/// Scalarize each row as `row[liberty] - row[oppression]`, keeping the full row
/// as per-class scores.
pub fn to_lexicon(
    wm: &WordMoralMatrix,
    liberty_class: &str,
    oppression_class: &str,
    metadata: Metadata,
) -> Result<Lexicon> {
    let find = |name: &str| {
        wm.classes
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Compositional(format!("unknown class {name:?}")))
    };
    let lib = find(liberty_class)?;
    let opp = find(oppression_class)?;
    let mut metadata = metadata
        .with("liberty_class", liberty_class)
        .with("oppression_class", oppression_class);
    metadata.method = Method::Compositional;
    let mut lexicon = Lexicon::new(metadata);
    for (w, word) in wm.words.iter().enumerate() {
        let row = wm.row(w);
        let aux = wm.classes.iter().cloned().zip(row.iter().copied()).collect();
        lexicon.insert(word.clone(), row[lib] - row[opp], aux)?;
    }
    Ok(lexicon)
}

/// Full pipeline on a preprocessed dataset, oriented by the scheme's default
/// polarity classes.
pub fn generate_cs(dataset: &LabeledDataset, min_frequency: u64) -> Result<Lexicon> {
    let (wd, dm) = build_matrices(dataset, min_frequency)?;
    let wm = normalize(&compose(&wd, &dm)?)?;
    let (lib, opp) = dataset.scheme.polarity_classes();
    let mut metadata = Metadata::new(Method::Compositional, dataset.name.clone())
        .with("min_frequency", min_frequency)
        .with("scheme", dataset.scheme)
        .with("lineage", id_set_digest(dataset.ids()));
    metadata.config_digest = sha256_hex(
        format!("CS;min_frequency={min_frequency};scheme={};liberty={lib};oppression={opp}", dataset.scheme)
            .as_bytes(),
    );
    to_lexicon(&wm, lib, opp, metadata)
}

/// Write `row_id col_id value` triplets for nonzero entries.
pub fn export_triplets<W: Write>(
    out: &mut W,
    rows: &[String],
    cols: &[String],
    entries: impl Iterator<Item = (usize, usize, f64)>,
) -> std::io::Result<()> {
    for (r, c, v) in entries {
        if v != 0.0 {
            writeln!(out, "{} {} {}", rows[r], cols[c], v)?;
        }
    }
    Ok(())
}

/// Dump the three intermediate matrices of a dataset into `dir`.
pub fn export_matrices(dataset: &LabeledDataset, min_frequency: u64, dir: &Path) -> Result<()> {
    let (wd, dm) = build_matrices(dataset, min_frequency)?;
    let wm = compose(&wd, &dm)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, f: &dyn Fn(&mut Vec<u8>) -> std::io::Result<()>| -> Result<()> {
        let path = dir.join(name);
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| Error::io(&path, e))?;
        std::fs::write(&path, buf).map_err(|e| Error::io(&path, e))
    };
    write("word_doc.triplets", &|b| {
        export_triplets(
            b,
            &wd.words,
            &wd.docs,
            wd.columns
                .iter()
                .enumerate()
                .flat_map(|(j, col)| col.iter().map(move |&(w, v)| (w, j, v))),
        )
    })?;
    let nc = dm.classes.len();
    write("doc_class.triplets", &|b| {
        export_triplets(
            b,
            &dm.docs,
            &dm.classes,
            dm.values.iter().enumerate().map(|(i, &v)| (i / nc, i % nc, v)),
        )
    })?;
    write("word_class.triplets", &|b| {
        export_triplets(
            b,
            &wm.words,
            &wm.classes,
            wm.values.iter().enumerate().map(|(i, &v)| (i / nc, i % nc, v)),
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Label, Scheme};

    fn dataset(scheme: Scheme, docs: &[(&str, &[&str])]) -> LabeledDataset {
        let documents = docs
            .iter()
            .enumerate()
            .map(|(i, (label, tokens))| Document {
                id: format!("d{i:02}"),
                raw_text: String::new(),
                tokens: tokens.iter().map(|t| t.to_string()).collect(),
                label: Label::parse(scheme, label).unwrap(),
            })
            .collect();
        LabeledDataset::new("cs", scheme, documents).unwrap()
    }

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn column_normalization_by_document_length() {
        let ds = dataset(Scheme::Ternary, &[("Liberty", &["free", "free", "state"])]);
        let (wd, dm) = build_matrices(&ds, 0).unwrap();
        assert_eq!(wd.words, vec!["free", "state"]);
        assert!((wd.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((wd.get(1, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(dm.classes.len(), 3);
        assert_eq!(dm.get(0, 0), 1.0);
    }

    #[test]
    fn cutoff_removes_rare_words_and_empty_docs() {
        let mut docs: Vec<(&str, &[&str])> = vec![("Liberty", &["common"]); 10];
        docs.push(("Oppression", &["rare"; 9]));
        docs.push(("Neutral", &[]));
        let ds = dataset(Scheme::Ternary, &docs);
        let (wd, dm) = build_matrices(&ds, 10).unwrap();
        assert_eq!(wd.words, vec!["common"]);
        assert_eq!(wd.docs.len(), 11);
        assert_eq!(dm.docs.len(), 11);
        assert!(build_matrices(&ds, 100).is_err());
    }

    #[test]
    fn compose_identity_and_hand_example() {
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let wd = WordDocMatrix::from_dense(strings(&["a", "b"]), strings(&["d1", "d2"]), &id).unwrap();
        let dm = DocMoralMatrix::from_dense(strings(&["d1", "d2"]), strings(&["L", "O"]), &id).unwrap();
        assert_eq!(compose(&wd, &dm).unwrap().values, vec![1.0, 0.0, 0.0, 1.0]);

        let wd = WordDocMatrix::from_dense(strings(&["w"]), strings(&["d1", "d2"]), &[vec![0.5, 0.5]]).unwrap();
        assert_eq!(compose(&wd, &dm).unwrap().values, vec![0.5, 0.5]);

        let other = DocMoralMatrix::from_dense(strings(&["d2", "d1"]), strings(&["L", "O"]), &id).unwrap();
        assert!(compose(&wd, &other).is_err());
    }

    #[test]
    fn normalize_examples() {
        let ds = dataset(
            Scheme::Ternary,
            &[
                ("Liberty", &["free", "vote"]),
                ("Oppression", &["jail", "vote"]),
                ("Neutral", &["weather", "vote"]),
            ],
        );
        let (wd, dm) = build_matrices(&ds, 0).unwrap();
        let wm = normalize(&compose(&wd, &dm).unwrap()).unwrap();
        let free = wm.words.iter().position(|w| w == "free").unwrap();
        assert_eq!(wm.row(free), &[1.0, 0.0, 0.0]);
        for w in 0..wm.words.len() {
            assert!((wm.row(w).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        let single = WordMoralMatrix {
            words: strings(&["x"]),
            classes: strings(&["L"]),
            values: vec![3.5],
        };
        assert_eq!(normalize(&single).unwrap().values, vec![1.0]);
    }

    #[test]
    fn normalize_rejects_empty_class_and_drops_zero_rows() {
        let m = WordMoralMatrix {
            words: strings(&["a", "b"]),
            classes: strings(&["L", "O"]),
            values: vec![1.0, 0.0, 0.0, 0.0],
        };
        assert!(normalize(&m).is_err());
        let m = WordMoralMatrix {
            words: strings(&["a", "b", "c"]),
            classes: strings(&["L", "O"]),
            values: vec![1.0, 0.0, 0.0, 0.0, 0.0, 2.0],
        };
        let n = normalize(&m).unwrap();
        assert_eq!(n.words, vec!["a", "c"]);
    }

    #[test]
    fn scalarization_examples() {
        let wm = WordMoralMatrix {
            words: strings(&["a", "b", "c"]),
            classes: strings(&["Liberty", "Neutral", "Oppression"]),
            values: vec![1.0, 0.0, 0.0, 0.5, 0.0, 0.5, 0.6, 0.1, 0.3],
        };
        let lex = to_lexicon(&wm, "Liberty", "Oppression", Metadata::new(Method::Compositional, "t")).unwrap();
        assert_eq!(lex.score("a"), Some(1.0));
        assert_eq!(lex.score("b"), Some(0.0));
        assert!((lex.score("c").unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(lex.entry("c").unwrap().aux.len(), 3);
        assert!(to_lexicon(&wm, "Liberty", "Nope", Metadata::new(Method::Compositional, "t")).is_err());
    }

    #[test]
    fn generate_orients_scores() {
        let ds = dataset(
            Scheme::BinarySide,
            &[
                ("Libertarian", &["market", "freedom", "tax"]),
                ("Libertarian", &["market", "freedom"]),
                ("Conservative", &["family", "order", "tax"]),
            ],
        );
        let lex = generate_cs(&ds, 0).unwrap();
        assert!(lex.score("freedom").unwrap() > 0.0);
        assert!(lex.score("order").unwrap() < 0.0);
        assert_eq!(lex.metadata.method, Method::Compositional);
        assert_eq!(lex.metadata.extra["liberty_class"], "Libertarian");
    }

    #[test]
    fn triplet_export_writes_files() {
        let ds = dataset(Scheme::BinarySide, &[("Libertarian", &["aaa", "bbb"]), ("Conservative", &["bbb"])]);
        let dir = tempfile::tempdir().unwrap();
        export_matrices(&ds, 0, dir.path()).unwrap();
        let wd = std::fs::read_to_string(dir.path().join("word_doc.triplets")).unwrap();
        assert!(wd.lines().any(|l| l == "aaa d00 0.5"));
        assert!(dir.path().join("word_class.triplets").exists());
    }
}
