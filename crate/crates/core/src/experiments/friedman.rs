//! Friedman rank test with tie-averaged ranks.
//!
//! The p-value is exact (a permutation distribution built block by block)
//! when the table is small enough, and uses the chi-square approximation
//! otherwise.

use std::collections::HashMap;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Work budget (state × arrangement combinations per block) for the exact
/// distribution before falling back to the chi-square approximation.
const MAX_EXACT_WORK: usize = 4_000_000;
const MAX_EXACT_METHODS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FriedmanResult {
    pub methods: Vec<String>,
    /// Per block, the rank of each method (1 = best).
    pub block_ranks: Vec<Vec<f64>>,
    pub average_ranks: Vec<f64>,
    pub statistic: f64,
    pub p_value: f64,
    /// Whether `p_value` comes from the exact permutation distribution.
    pub exact: bool,
    pub alpha: f64,
    pub reject_null: bool,
}

impl FriedmanResult {
    /// Method indices ordered best first; ties keep table order.
    pub fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.methods.len()).collect();
        idx.sort_by(|&a, &b| self.average_ranks[a].total_cmp(&self.average_ranks[b]));
        idx
    }
}

/// Ranks by descending score; tied scores share the mean of their positions.
pub fn rank_descending(scores: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ranks = vec![0.0; scores.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && scores[idx[end]] == scores[idx[start]] {
            end += 1;
        }
        // Positions start+1 ..= end.
        let mean = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = mean;
        }
        start = end;
    }
    ranks
}

/// Tie-corrected Friedman statistic for blocks of ranks (`blocks[i][j]` is
/// method `j` in block `i`). Zero when every block is fully tied.
pub fn friedman_statistic(blocks: &[Vec<f64>]) -> f64 {
    let n = blocks.len() as f64;
    let k = blocks.first().map_or(0, Vec::len);
    let kf = k as f64;
    let mut sums = vec![0.0; k];
    let mut squares = 0.0;
    for block in blocks {
        for (j, r) in block.iter().enumerate() {
            sums[j] += r;
            squares += r * r;
        }
    }
    let c = n * kf * (kf + 1.0) * (kf + 1.0) / 4.0;
    let denom = squares - c;
    if denom <= 1e-12 * c.max(1.0) {
        return 0.0;
    }
    let spread: f64 = sums.iter().map(|s| s * s).sum::<f64>() - n * c;
    ((kf - 1.0) * spread / denom).max(0.0)
}

fn permutations(items: &[u32]) -> Vec<Vec<u32>> {
    fn go(prefix: &mut Vec<u32>, rest: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..rest.len() {
            let x = rest.remove(i);
            prefix.push(x);
            go(prefix, rest, out);
            prefix.pop();
            rest.insert(i, x);
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut items.to_vec(), &mut out);
    out
}

/// Exact permutation p-value: within each block the observed ranks are
/// assigned to methods uniformly at random, independently across blocks.
/// Returns `None` when the state space is too large.
fn exact_p_value(blocks: &[Vec<f64>]) -> Option<f64> {
    let k = blocks.first().map_or(0, Vec::len);
    if k > MAX_EXACT_METHODS {
        return None;
    }
    // Doubled ranks are integers even with ties.
    let doubled: Vec<Vec<u32>> = blocks
        .iter()
        .map(|b| b.iter().map(|r| (2.0 * r).round() as u32).collect())
        .collect();
    let observed: u64 = (0..k)
        .map(|j| {
            let s: u64 = doubled.iter().map(|b| u64::from(b[j])).sum();
            s * s
        })
        .sum();

    let mut states: HashMap<Vec<u32>, f64> = HashMap::new();
    states.insert(vec![0; k], 1.0);
    for block in &doubled {
        let mut arrangements: HashMap<Vec<u32>, f64> = HashMap::new();
        let perms = permutations(block);
        let w = 1.0 / perms.len() as f64;
        for p in perms {
            *arrangements.entry(p).or_insert(0.0) += w;
        }
        if states.len() * arrangements.len() > MAX_EXACT_WORK {
            return None;
        }
        let mut next: HashMap<Vec<u32>, f64> = HashMap::with_capacity(states.len() * arrangements.len());
        for (state, p_state) in &states {
            for (arr, p_arr) in &arrangements {
                let mut s = state.clone();
                for (a, b) in s.iter_mut().zip(arr) {
                    *a += b;
                }
                *next.entry(s).or_insert(0.0) += p_state * p_arr;
            }
        }
        states = next;
    }
    let p: f64 = states
        .iter()
        .filter(|(s, _)| s.iter().map(|&x| u64::from(x) * u64::from(x)).sum::<u64>() >= observed)
        .map(|(_, p)| p)
        .sum();
    Some(p.min(1.0))
}

/// Friedman test on a complete `blocks × methods` score table; a higher
/// score is better.
pub fn friedman_test(methods: &[String], scores: &[Vec<f64>], alpha: f64) -> Result<FriedmanResult> {
    let k = methods.len();
    if k < 2 {
        return Err(Error::Experiment(format!("Friedman test needs at least 2 methods, got {k}")));
    }
    if scores.len() < 2 {
        return Err(Error::Experiment(format!(
            "Friedman test needs at least 2 experiment columns, got {}",
            scores.len()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Experiment(format!("significance level must lie in (0, 1), got {alpha}")));
    }
    for (i, block) in scores.iter().enumerate() {
        if block.len() != k {
            return Err(Error::Experiment(format!("column {i} has {} scores, expected {k}", block.len())));
        }
        if block.iter().any(|s| !s.is_finite()) {
            return Err(Error::Experiment(format!("column {i} contains a non-finite score")));
        }
    }
    let block_ranks: Vec<Vec<f64>> = scores.iter().map(|b| rank_descending(b)).collect();
    let n = block_ranks.len() as f64;
    let average_ranks: Vec<f64> = (0..k)
        .map(|j| block_ranks.iter().map(|b| b[j]).sum::<f64>() / n)
        .collect();
    let statistic = friedman_statistic(&block_ranks);
    let (p_value, exact) = match exact_p_value(&block_ranks) {
        Some(p) => (p, true),
        None => {
            let chi = ChiSquared::new((k - 1) as f64).map_err(|e| Error::Numeric(e.to_string()))?;
            (chi.sf(statistic), false)
        }
    };
    Ok(FriedmanResult {
        methods: methods.to_vec(),
        block_ranks,
        average_ranks,
        statistic,
        p_value,
        exact,
        alpha,
        reject_null: p_value < alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("m{i}")).collect()
    }

    #[test]
    fn tie_averaging() {
        assert_eq!(rank_descending(&[3.0, 2.0, 2.0, 1.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(rank_descending(&[1.0, 1.0, 1.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(rank_descending(&[0.1, 0.9]), vec![2.0, 1.0]);
    }

    #[test]
    fn dominant_method_ranks_first() {
        let scores = vec![vec![0.9, 0.5, 0.4], vec![0.8, 0.7, 0.1], vec![0.7, 0.2, 0.6]];
        let r = friedman_test(&names(3), &scores, 0.05).unwrap();
        assert_eq!(r.average_ranks[0], 1.0);
        assert_eq!(r.order()[0], 0);
    }

    #[test]
    fn textbook_statistic_without_ties() {
        // Every block ranks the methods identically: statistic = n (k - 1).
        let scores = vec![vec![3.0, 2.0, 1.0]; 4];
        let r = friedman_test(&names(3), &scores, 0.05).unwrap();
        assert!((r.statistic - 8.0).abs() < 1e-12);
        // Only the 3! identical-order arrangements reach that extreme.
        assert!((r.p_value - 6.0 / 6f64.powi(4)).abs() < 1e-12);
        assert!(r.exact && r.reject_null);
    }

    #[test]
    fn fully_tied_table_is_not_significant() {
        let scores = vec![vec![0.5, 0.5]; 3];
        let r = friedman_test(&names(2), &scores, 0.05).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        assert!(!r.reject_null);
    }

    #[test]
    fn large_tables_use_chi_square() {
        let scores: Vec<Vec<f64>> = (0..30).map(|i| (0..9).map(|j| ((i * 7 + j * 3) % 11) as f64).collect()).collect();
        let r = friedman_test(&names(9), &scores, 0.05).unwrap();
        assert!(!r.exact);
        assert!((0.0..=1.0).contains(&r.p_value));
    }

    #[test]
    fn preconditions() {
        assert!(friedman_test(&names(1), &[vec![1.0], vec![2.0]], 0.05).is_err());
        assert!(friedman_test(&names(2), &[vec![1.0, 2.0]], 0.05).is_err());
        assert!(friedman_test(&names(2), &[vec![1.0, 2.0], vec![1.0]], 0.05).is_err());
    }
}
