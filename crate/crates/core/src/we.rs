//! Embedding-similarity lexicons: each word is scored by its summed cosine
//! similarity to the liberty seeds minus that to the oppression seeds.

use crate::digest::sha256_hex;
use crate::embedding::{cosine_slices, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::lexicon::{Lexicon, Metadata, Method};
use crate::seeds::{FrequencyTable, SeedSets};

#[derive(Debug, Clone, Default)]
pub struct WeOptions<'a> {
    /// Keep only tokens whose corpus count reaches this value.
    pub min_frequency: Option<(u64, &'a FrequencyTable)>,
    /// Divide each similarity sum by its seed set size.
    pub mean_normalized: bool,
    pub source_dataset: String,
}

fn surviving<'s>(matrix: &EmbeddingMatrix, seeds: &'s [String], side: &str) -> Vec<&'s str> {
    let kept: Vec<&str> = seeds
        .iter()
        .map(String::as_str)
        .filter(|s| matrix.contains(s))
        .collect();
    if kept.len() < seeds.len() {
        log::warn!(
            "{} {side} seed(s) missing from the embedding vocabulary were dropped",
            seeds.len() - kept.len()
        );
    }
    kept
}

pub fn generate_we(matrix: &EmbeddingMatrix, seeds: &SeedSets, options: &WeOptions) -> Result<Lexicon> {
    let liberty = surviving(matrix, &seeds.liberty, "liberty");
    let oppression = surviving(matrix, &seeds.oppression, "oppression");
    if liberty.is_empty() || oppression.is_empty() {
        return Err(Error::Seeds(format!(
            "no {} seed is present in the embedding vocabulary",
            if liberty.is_empty() { "liberty" } else { "oppression" }
        )));
    }
    let liberty_rows: Vec<&[f32]> = liberty.iter().map(|s| matrix.vector(s)).collect::<Result<_>>()?;
    let oppression_rows: Vec<&[f32]> = oppression.iter().map(|s| matrix.vector(s)).collect::<Result<_>>()?;
    let (lib_div, opp_div) = if options.mean_normalized {
        (liberty_rows.len() as f64, oppression_rows.len() as f64)
    } else {
        (1.0, 1.0)
    };

    let seeds_digest = seeds.digest();
    let mut metadata = Metadata::new(Method::WordEmbedding, options.source_dataset.clone())
        .with("seeds_digest", &seeds_digest)
        .with("mean_normalized", options.mean_normalized)
        .with("liberty_seeds", liberty.len())
        .with("oppression_seeds", oppression.len());
    if let Some((min, _)) = options.min_frequency {
        metadata = metadata.with("min_frequency", min);
    }
    if let Some(record) = matrix.train_record() {
        metadata.seed = Some(record.config.seed);
    }
    metadata.config_digest = sha256_hex(
        format!(
            "WE;seeds={seeds_digest};mean={};min_frequency={:?}",
            options.mean_normalized,
            options.min_frequency.map(|(m, _)| m)
        )
        .as_bytes(),
    );

    let mut tokens: Vec<(&str, usize)> = matrix
        .vocabulary()
        .iter()
        .enumerate()
        .filter(|(_, t)| match options.min_frequency {
            Some((min, freq)) => freq.count(t) >= min,
            None => true,
        })
        .map(|(i, t)| (t.as_str(), i))
        .collect();
    tokens.sort_unstable();

    let mut lexicon = Lexicon::new(metadata);
    for (token, row) in tokens {
        let v = matrix.row(row);
        let mut toward_liberty = 0.0;
        for s in &liberty_rows {
            toward_liberty += cosine_slices(v, s)?;
        }
        let mut toward_oppression = 0.0;
        for s in &oppression_rows {
            toward_oppression += cosine_slices(v, s)?;
        }
        let score = toward_liberty / lib_div - toward_oppression / opp_div;
        lexicon.insert(token.to_owned(), score, Vec::new())?;
    }
    Ok(lexicon)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seeds(lib: &[&str], opp: &[&str]) -> SeedSets {
        SeedSets {
            liberty: lib.iter().map(|s| s.to_string()).collect(),
            oppression: opp.iter().map(|s| s.to_string()).collect(),
            k: lib.len().max(opp.len()),
            min_frequency: 0,
            side2_name: "lib".into(),
        }
    }

    fn matrix(rows: &[(&str, &[f32])]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(
            rows.iter().map(|(t, _)| t.to_string()).collect(),
            rows.iter().map(|(_, v)| v.to_vec()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn aligned_word_scores_one() {
        let m = matrix(&[("lib", &[1.0, 0.0]), ("opp", &[0.0, 1.0]), ("w", &[2.0, 0.0])]);
        let lex = generate_we(&m, &seeds(&["lib"], &["opp"]), &WeOptions::default()).unwrap();
        assert!((lex.score("w").unwrap() - 1.0).abs() < 1e-12);
        // Seeds are scored too.
        assert!((lex.score("lib").unwrap() - 1.0).abs() < 1e-12);
        assert!((lex.score("opp").unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn equidistant_word_scores_zero() {
        let m = matrix(&[("lib", &[1.0, 0.0]), ("opp", &[0.0, 1.0]), ("w", &[1.0, 1.0])]);
        let lex = generate_we(&m, &seeds(&["lib"], &["opp"]), &WeOptions::default()).unwrap();
        assert!(lex.score("w").unwrap().abs() < 1e-12);
    }

    #[test]
    fn missing_seeds_are_dropped_but_one_side_must_survive() {
        let m = matrix(&[("lib", &[1.0, 0.0]), ("opp", &[0.0, 1.0])]);
        let lex = generate_we(&m, &seeds(&["lib", "ghost"], &["opp"]), &WeOptions::default()).unwrap();
        assert_eq!(lex.metadata.extra["liberty_seeds"], "1");
        assert!(generate_we(&m, &seeds(&["ghost"], &["opp"]), &WeOptions::default()).is_err());
    }

    #[test]
    fn mean_normalization_and_frequency_filter() {
        let m = matrix(&[
            ("l1", &[1.0, 0.0]),
            ("l2", &[1.0, 0.0]),
            ("opp", &[0.0, 1.0]),
            ("rare", &[1.0, 0.0]),
        ]);
        let s = seeds(&["l1", "l2"], &["opp"]);
        let raw = generate_we(&m, &s, &WeOptions::default()).unwrap();
        assert!((raw.score("rare").unwrap() - 2.0).abs() < 1e-12);
        let mean = generate_we(&m, &s, &WeOptions { mean_normalized: true, ..Default::default() }).unwrap();
        assert!((mean.score("rare").unwrap() - 1.0).abs() < 1e-12);

        let docs = vec![vec!["l1", "l1", "l2", "l2", "opp", "opp", "rare"]];
        let freq = crate::seeds::relative_frequencies(&docs).unwrap();
        let filtered = generate_we(
            &m,
            &s,
            &WeOptions { min_frequency: Some((2, &freq)), ..Default::default() },
        )
        .unwrap();
        assert!(filtered.score("rare").is_none());
        assert_eq!(filtered.len(), 3);
        assert_eq!(filtered.metadata.method, Method::WordEmbedding);
    }
}
