//! Relative frequencies, frequency shifts between two document sets, and
//! data-driven seed word selection.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    counts: BTreeMap<String, u64>,
    total: u64,
}

impl FrequencyTable {
    pub fn count(&self, token: &str) -> u64 {
        self.counts.get(token).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Count divided by the total token count; zero for absent tokens.
    pub fn relfreq(&self, token: &str) -> f64 {
        self.count(token) as f64 / self.total as f64
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }
}

pub fn relative_frequencies<D, T>(documents: &[D]) -> Result<FrequencyTable>
where
    D: AsRef<[T]>,
    T: AsRef<str>,
{
    let mut counts = BTreeMap::new();
    let mut total = 0u64;
    for doc in documents {
        for t in doc.as_ref() {
            *counts.entry(t.as_ref().to_owned()).or_insert(0u64) += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::Seeds("documents contain no tokens".into()));
    }
    Ok(FrequencyTable { counts, total })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftTable {
    /// `relfreq_2(w) - relfreq_1(w)` over the union vocabulary.
    pub shifts: BTreeMap<String, f64>,
    pub side1: FrequencyTable,
    pub side2: FrequencyTable,
}

impl ShiftTable {
    pub fn combined_count(&self, token: &str) -> u64 {
        self.side1.count(token) + self.side2.count(token)
    }
}

pub fn frequency_shift(side1: &FrequencyTable, side2: &FrequencyTable) -> ShiftTable {
    let mut shifts = BTreeMap::new();
    for token in side1.counts.keys().chain(side2.counts.keys()) {
        if !shifts.contains_key(token) {
            shifts.insert(token.clone(), side2.relfreq(token) - side1.relfreq(token));
        }
    }
    ShiftTable {
        shifts,
        side1: side1.clone(),
        side2: side2.clone(),
    }
}

/// Liberty (`S_L`) and oppression (`S_C`) seed lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSets {
    pub liberty: Vec<String>,
    pub oppression: Vec<String>,
    pub k: usize,
    pub min_frequency: u64,
    /// Name of the document partition treated as liberty-positive.
    pub side2_name: String,
}

impl SeedSets {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text =
            serde_json::to_string_pretty(self).map_err(|e| Error::Seeds(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }

    pub fn digest(&self) -> String {
        crate::digest::sha256_hex(
            serde_json::to_string(self)
                .expect("seed sets serialize")
                .as_bytes(),
        )
    }
}

/// Pick the `k` tokens with the largest positive shift (liberty) and the `k`
/// with the most negative shift (oppression), among tokens whose combined raw
/// count reaches `min_frequency`. Equal shifts are ordered lexicographically.
pub fn select_seeds(
    shift: &ShiftTable,
    k: usize,
    min_frequency: u64,
    side2_name: &str,
) -> Result<SeedSets> {
    if k == 0 {
        return Err(Error::Seeds("k must be at least 1".into()));
    }
    let qualifying: Vec<(&str, f64)> = shift
        .shifts
        .iter()
        .filter(|(t, _)| shift.combined_count(t) >= min_frequency)
        .map(|(t, &s)| (t.as_str(), s))
        .collect();

    let mut positive: Vec<(&str, f64)> = qualifying.iter().copied().filter(|(_, s)| *s > 0.0).collect();
    positive.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut negative: Vec<(&str, f64)> = qualifying.iter().copied().filter(|(_, s)| *s < 0.0).collect();
    negative.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));

    if positive.is_empty() || negative.is_empty() {
        return Err(Error::Seeds(format!(
            "no qualifying token with a {} shift (min_frequency={min_frequency})",
            if positive.is_empty() { "positive" } else { "negative" }
        )));
    }
    for (name, list) in [("liberty", &positive), ("oppression", &negative)] {
        if list.len() < k {
            log::warn!("only {} {name} seed(s) qualify, fewer than k={k}", list.len());
        }
    }
    let take = |v: Vec<(&str, f64)>| v.into_iter().take(k).map(|(t, _)| t.to_owned()).collect();
    Ok(SeedSets {
        liberty: take(positive),
        oppression: take(negative),
        k,
        min_frequency,
        side2_name: side2_name.to_owned(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(raw: &[&[&str]]) -> Vec<Vec<String>> {
        raw.iter().map(|d| d.iter().map(|s| s.to_string()).collect()).collect()
    }

    fn table(entries: &[(&str, u64)]) -> FrequencyTable {
        let docs: Vec<Vec<String>> = vec![entries
            .iter()
            .flat_map(|(t, c)| std::iter::repeat_n(t.to_string(), *c as usize))
            .collect()];
        relative_frequencies(&docs).unwrap()
    }

    #[test]
    fn relative_frequency_examples() {
        let t = relative_frequencies(&docs(&[&["free", "market", "free"], &["state", "control"]]))
            .unwrap();
        assert_eq!(t.total(), 5);
        assert_eq!(t.relfreq("free"), 0.4);
        let single = relative_frequencies(&docs(&[&["liberty"]])).unwrap();
        assert_eq!(single.relfreq("liberty"), 1.0);
        assert!(relative_frequencies(&docs(&[&[], &[]])).is_err());
    }

    #[test]
    fn relfreq_sums_to_one() {
        let t = relative_frequencies(&docs(&[&["a", "b", "a"], &["c"], &["a", "d", "e"]])).unwrap();
        let sum: f64 = t.counts().keys().map(|k| t.relfreq(k)).sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn shift_examples() {
        // p1(free)=0.1, p2(free)=0.4
        let side1 = table(&[("free", 1), ("other", 9)]);
        let side2 = table(&[("free", 4), ("other", 4), ("only", 2)]);
        let s = frequency_shift(&side1, &side2);
        assert!((s.shifts["free"] - 0.3).abs() < 1e-12);
        assert!((s.shifts["only"] - 0.2).abs() < 1e-12);
        let same = frequency_shift(&side1, &side1);
        assert!(same.shifts.values().all(|v| *v == 0.0));
    }

    fn shift_table(shifts: &[(&str, f64, u64)]) -> ShiftTable {
        let side1 = table(&shifts.iter().map(|(t, _, c)| (*t, *c)).collect::<Vec<_>>());
        ShiftTable {
            shifts: shifts.iter().map(|(t, s, _)| (t.to_string(), *s)).collect(),
            side2: side1.clone(),
            side1,
        }
    }

    #[test]
    fn select_top_each_side() {
        let s = shift_table(&[("a", 0.3, 1), ("b", 0.1, 1), ("c", -0.2, 1), ("d", -0.4, 1)]);
        let seeds = select_seeds(&s, 1, 0, "lib").unwrap();
        assert_eq!(seeds.liberty, vec!["a"]);
        assert_eq!(seeds.oppression, vec!["d"]);
    }

    #[test]
    fn select_respects_min_frequency() {
        // `big` has the largest shift but 99 combined occurrences (side1 + side2 share counts here).
        let mut s = shift_table(&[("big", 0.5, 50), ("ok", 0.1, 60), ("neg", -0.1, 60)]);
        s.side2 = table(&[("big", 49), ("ok", 60), ("neg", 60)]);
        assert_eq!(s.combined_count("big"), 99);
        let seeds = select_seeds(&s, 1, 100, "lib").unwrap();
        assert_eq!(seeds.liberty, vec!["ok"]);
    }

    #[test]
    fn select_ties_lexicographic_and_short_lists() {
        let s = shift_table(&[("zeta", 0.2, 1), ("alpha", 0.2, 1), ("neg", -0.1, 1)]);
        let seeds = select_seeds(&s, 5, 0, "lib").unwrap();
        assert_eq!(seeds.liberty, vec!["alpha", "zeta"]);
        assert_eq!(seeds.oppression, vec!["neg"]);
    }

    #[test]
    fn select_errors_without_signal() {
        let s = shift_table(&[("a", 0.0, 1), ("b", 0.0, 1)]);
        assert!(select_seeds(&s, 1, 0, "lib").is_err());
        assert!(select_seeds(&s, 0, 0, "lib").is_err());
    }

    #[test]
    fn seeds_json_round_trip() {
        let s = shift_table(&[("a", 0.3, 1), ("d", -0.4, 1)]);
        let seeds = select_seeds(&s, 1, 0, "liberty_docs").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        seeds.save(&p).unwrap();
        assert_eq!(SeedSets::load(&p).unwrap(), seeds);
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        for key in ["liberty", "oppression", "k", "min_frequency", "side2_name"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn corpus() -> impl Strategy<Value = Vec<Vec<String>>> {
        prop::collection::vec(
            prop::collection::vec(prop::sample::select(vec!["aa", "bb", "cc", "dd", "ee", "ff"]), 1..15),
            1..8,
        )
        .prop_map(|docs| {
            docs.into_iter()
                .map(|d| d.into_iter().map(String::from).collect())
                .collect()
        })
    }

    proptest! {
        #[test]
        fn swapping_sides_negates_and_swaps(one in corpus(), two in corpus(), k in 1usize..4) {
            let t1 = relative_frequencies(&one).unwrap();
            let t2 = relative_frequencies(&two).unwrap();
            let forward = frequency_shift(&t1, &t2);
            let backward = frequency_shift(&t2, &t1);
            for (tok, s) in &forward.shifts {
                prop_assert_eq!(*s, -backward.shifts[tok]);
            }
            match (select_seeds(&forward, k, 0, "x"), select_seeds(&backward, k, 0, "x")) {
                (Ok(f), Ok(b)) => {
                    prop_assert_eq!(f.liberty, b.oppression);
                    prop_assert_eq!(f.oppression, b.liberty);
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "asymmetric failure"),
            }
        }

        #[test]
        fn relfreq_order_invariant(mut docs in corpus()) {
            let a = relative_frequencies(&docs).unwrap();
            docs.reverse();
            let b = relative_frequencies(&docs).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
