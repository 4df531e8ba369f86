//! Machine (CSV) and human (aligned text) renderings of a results table and
//! its Friedman ranking.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FriedmanResult, ResultsTable};
use crate::digest::short;
use crate::error::{Error, Result};

pub const RESULTS_FILE: &str = "results.csv";
pub const RANKS_FILE: &str = "ranks.csv";
pub const TEXT_FILE: &str = "friedman.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub experiment: String,
    pub f1_macro: f64,
    pub seed: u64,
    pub config_digest: String,
}

#[derive(Serialize)]
struct RankRow<'a> {
    rank_order: usize,
    method: &'a str,
    average_rank: f64,
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, 0, format!("{other:?}")),
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn results_rows(table: &ResultsTable) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for (m, method) in table.methods.iter().enumerate() {
        for (e, experiment) in table.experiments.iter().enumerate() {
            if let Some(cell) = &table.cells[m][e] {
                rows.push(ResultRow {
                    method: method.clone(),
                    experiment: experiment.clone(),
                    f1_macro: cell.score.unwrap_or(f64::NAN),
                    seed: cell.seed,
                    config_digest: cell.config_digest.clone(),
                });
            }
        }
    }
    rows
}

fn render_text(table: &ResultsTable, ranks: &FriedmanResult) -> String {
    let order = ranks.order();
    let method_width = table.methods.iter().map(String::len).max().unwrap_or(0).max("method".len());
    let widths: Vec<usize> = table.experiments.iter().map(|e| e.len().max(6)).collect();
    let mut out = String::new();
    let _ = write!(out, "{:<method_width$}", "method");
    for (e, w) in table.experiments.iter().zip(&widths) {
        let _ = write!(out, "  {e:>w$}");
    }
    let _ = writeln!(out, "  {:>8}", "avg_rank");
    for &m in &order {
        let _ = write!(out, "{:<method_width$}", table.methods[m]);
        for (e, w) in widths.iter().enumerate() {
            let score = table.cells[m][e].as_ref().and_then(|c| c.score).unwrap_or(f64::NAN);
            let _ = write!(out, "  {:>w$.4}", score);
        }
        let _ = writeln!(out, "  {:>8.3}", ranks.average_ranks[m]);
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "friedman_statistic = {:.6}", ranks.statistic);
    let _ = writeln!(
        out,
        "p_value = {:.6} ({})",
        ranks.p_value,
        if ranks.exact { "exact permutation" } else { "chi-square approximation" }
    );
    let _ = writeln!(out, "alpha = {}", ranks.alpha);
    let _ = writeln!(out, "reject_null = {}", ranks.reject_null);
    let _ = writeln!(out);
    let _ = writeln!(out, "provenance (method, experiment, seed, config digest):");
    for &m in &order {
        for (e, exp) in table.experiments.iter().enumerate() {
            if let Some(c) = &table.cells[m][e] {
                let _ = writeln!(out, "  {} {} {} {}", table.methods[m], exp, c.seed, short(&c.config_digest));
            }
        }
    }
    out
}

/// Write `results.csv`, `ranks.csv` and `friedman.txt` into `dir`.
/// Fails before writing anything when the table has missing cells or the
/// ranking does not match the table.
pub fn emit_report(table: &ResultsTable, ranks: &FriedmanResult, dir: &Path) -> Result<()> {
    table.complete_blocks()?;
    if ranks.methods != table.methods {
        return Err(Error::Experiment("ranking methods do not match the results table".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_csv(&dir.join(RESULTS_FILE), results_rows(table))?;
    let order = ranks.order();
    write_csv(
        &dir.join(RANKS_FILE),
        order.iter().enumerate().map(|(i, &m)| RankRow {
            rank_order: i + 1,
            method: &ranks.methods[m],
            average_rank: ranks.average_ranks[m],
        }),
    )?;
    let text_path = dir.join(TEXT_FILE);
    std::fs::write(&text_path, render_text(table, ranks)).map_err(|e| Error::io(&text_path, e))
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}
