//! Synthetic labeled corpus with planted liberty and oppression markers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Document, Label, LabeledDataset, Scheme};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub liberty_markers: usize,
    pub oppression_markers: usize,
    pub neutral_tokens: usize,
    pub docs_per_class: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Per-position probability of drawing a marker of the document's own class.
    pub own_marker_prob: f64,
    /// Per-position probability of drawing a marker of the other class.
    pub other_marker_prob: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            liberty_markers: 200,
            oppression_markers: 200,
            neutral_tokens: 2000,
            docs_per_class: 2000,
            min_len: 20,
            max_len: 50,
            own_marker_prob: 0.3,
            other_marker_prob: 0.03,
            seed: 2023,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    /// `binary_side` labels: Libertarian documents carry liberty markers.
    pub dataset: LabeledDataset,
    pub liberty_markers: Vec<String>,
    pub oppression_markers: Vec<String>,
    pub neutral_tokens: Vec<String>,
}

/// Purely alphabetic names so the tokenizer keeps them intact.
fn token_name(prefix: &str, mut i: usize) -> String {
    let mut letters = [b'a'; 4];
    for slot in letters.iter_mut().rev() {
        *slot = b'a' + (i % 26) as u8;
        i /= 26;
    }
    format!("{prefix}{}", std::str::from_utf8(&letters).expect("ascii"))
}

pub fn generate(config: &SyntheticConfig) -> Result<SyntheticCorpus> {
    if config.min_len == 0 || config.min_len > config.max_len {
        return Err(Error::Corpus(format!(
            "invalid document length range {}..={}",
            config.min_len, config.max_len
        )));
    }
    let total = config.own_marker_prob + config.other_marker_prob;
    if !(config.own_marker_prob >= 0.0 && config.other_marker_prob >= 0.0 && total <= 1.0) {
        return Err(Error::Corpus("marker probabilities must be non-negative and sum to at most 1".into()));
    }
    if config.liberty_markers == 0 || config.oppression_markers == 0 || config.neutral_tokens == 0 {
        return Err(Error::Corpus("every token pool must be nonempty".into()));
    }
    let liberty: Vec<String> = (0..config.liberty_markers).map(|i| token_name("lib", i)).collect();
    let oppression: Vec<String> = (0..config.oppression_markers).map(|i| token_name("opp", i)).collect();
    let neutral: Vec<String> = (0..config.neutral_tokens).map(|i| token_name("neu", i)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut documents = Vec::with_capacity(2 * config.docs_per_class);
    for i in 0..2 * config.docs_per_class {
        let is_liberty = i % 2 == 0;
        let (own, other) = if is_liberty {
            (&liberty, &oppression)
        } else {
            (&oppression, &liberty)
        };
        let len = rng.gen_range(config.min_len..=config.max_len);
        let tokens: Vec<String> = (0..len)
            .map(|_| {
                let r: f64 = rng.gen();
                let pool = if r < config.own_marker_prob {
                    own
                } else if r < total {
                    other
                } else {
                    &neutral
                };
                pool[rng.gen_range(0..pool.len())].clone()
            })
            .collect();
        let label = Label::parse(Scheme::BinarySide, if is_liberty { "Libertarian" } else { "Conservative" })?;
        documents.push(Document {
            id: format!("syn{i:05}"),
            raw_text: tokens.join(" "),
            tokens,
            label,
        });
    }
    Ok(SyntheticCorpus {
        dataset: LabeledDataset::new("synthetic", Scheme::BinarySide, documents)?,
        liberty_markers: liberty,
        oppression_markers: oppression,
        neutral_tokens: neutral,
    })
}
