//! Summary tables over run records, each written as `.csv` and aligned `.txt`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use citrus_core::eval::{improvement_pct, variance_ratio, wilcoxon_one_sided, Metrics, RunRecord};

use crate::config::INTERP_SUFFIX;
use crate::error::{Result, WbError};
use crate::fsutil::write_atomic;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(
                &r.iter()
                    .map(|c| c.replace(',', ";"))
                    .collect::<Vec<_>>()
                    .join(","),
            );
            s.push('\n');
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, &w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut s = line(&self.header);
        s.push('\n');
        s.push_str(
            &widths
                .iter()
                .map(|&w| "-".repeat(w))
                .collect::<Vec<_>>()
                .join("  "),
        );
        s.push('\n');
        for r in &self.rows {
            s.push_str(&line(r));
            s.push('\n');
        }
        s
    }
}

type Key = (String, String, String, String); // dataset, regime, model, variant

fn regime_key(pct: f64) -> String {
    format!("{pct}")
}

fn group(records: &[RunRecord]) -> BTreeMap<Key, Vec<&RunRecord>> {
    let mut g: BTreeMap<Key, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        g.entry((
            r.dataset.clone(),
            regime_key(r.regime_pct),
            r.model.clone(),
            r.variant.clone(),
        ))
        .or_default()
        .push(r);
    }
    g
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var = if x.len() > 1 {
        x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

/// Rank (1-based) of each value among the three largest distinct values.
pub fn top3_marks(values: &[f64]) -> Vec<Option<usize>> {
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(|a, b| b.total_cmp(a));
    distinct.dedup();
    values
        .iter()
        .map(|v| {
            distinct
                .iter()
                .position(|d| d == v)
                .filter(|&p| p < 3)
                .map(|p| p + 1)
        })
        .collect()
}

fn marked(v: f64, sd: f64, mark: Option<usize>) -> String {
    let s = format!("{v:.2} ± {sd:.2}");
    match mark {
        Some(1) => format!("**{s}**"),
        Some(2) => format!("_{s}_"),
        Some(3) => format!("{s}'"),
        _ => s,
    }
}

fn metrics_tables(groups: &BTreeMap<Key, Vec<&RunRecord>>) -> (Table, Table) {
    let mut csv = Table::new(
        "table1_metrics",
        &[
            "dataset",
            "regime_pct",
            "model",
            "variant",
            "runs",
            "acc_mean",
            "acc_std",
            "roc_mean",
            "roc_std",
            "prc_mean",
            "prc_std",
            "acc_rank",
            "roc_rank",
            "prc_rank",
        ],
    );
    let mut txt = Table::new(
        "table1_metrics",
        &[
            "dataset", "regime %", "model", "variant", "runs", "ACC", "ROC", "PRC",
        ],
    );
    let mut by_setting: BTreeMap<(String, String), Vec<(&Key, &Vec<&RunRecord>)>> = BTreeMap::new();
    for (k, v) in groups {
        by_setting
            .entry((k.0.clone(), k.1.clone()))
            .or_default()
            .push((k, v));
    }
    for rows in by_setting.values() {
        let stats: Vec<[(f64, f64); 3]> = rows
            .iter()
            .map(|(_, rs)| {
                let col = |m: usize| {
                    rs.iter()
                        .map(|r| r.metrics.as_array()[m])
                        .collect::<Vec<_>>()
                };
                [mean_std(&col(0)), mean_std(&col(1)), mean_std(&col(2))]
            })
            .collect();
        let marks: Vec<Vec<Option<usize>>> = (0..3)
            .map(|m| top3_marks(&stats.iter().map(|s| s[m].0).collect::<Vec<_>>()))
            .collect();
        for (i, (k, rs)) in rows.iter().enumerate() {
            let s = stats[i];
            let rank = |m: usize| marks[m][i].map_or(String::new(), |r| r.to_string());
            csv.rows.push(vec![
                k.0.clone(),
                k.1.clone(),
                k.2.clone(),
                k.3.clone(),
                rs.len().to_string(),
                format!("{:.4}", s[0].0),
                format!("{:.4}", s[0].1),
                format!("{:.4}", s[1].0),
                format!("{:.4}", s[1].1),
                format!("{:.4}", s[2].0),
                format!("{:.4}", s[2].1),
                rank(0),
                rank(1),
                rank(2),
            ]);
            txt.rows.push(vec![
                k.0.clone(),
                k.1.clone(),
                k.2.clone(),
                k.3.clone(),
                rs.len().to_string(),
                marked(s[0].0, s[0].1, marks[0][i]),
                marked(s[1].0, s[1].1, marks[1][i]),
                marked(s[2].0, s[2].1, marks[2][i]),
            ]);
        }
    }
    (csv, txt)
}

/// Runs of `a` and `b` sharing a (fold, seed) key; unmatched runs are warned about.
fn paired(a: &[&RunRecord], b: &[&RunRecord]) -> Vec<(Metrics, Metrics)> {
    let index: BTreeMap<(usize, u64), Metrics> =
        b.iter().map(|r| (r.pair_key(), r.metrics)).collect();
    let pairs: Vec<(Metrics, Metrics)> = a
        .iter()
        .filter_map(|r| index.get(&r.pair_key()).map(|m| (r.metrics, *m)))
        .collect();
    if pairs.len() != a.len() || pairs.len() != b.len() {
        log::warn!(
            "{} of {}/{} runs paired; missing cells left out",
            pairs.len(),
            a.len(),
            b.len()
        );
    }
    pairs
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or(String::new(), |v| format!("{v:.digits$}"))
}

fn improvement_cell(pairs: &[(Metrics, Metrics)]) -> String {
    if pairs.is_empty() {
        return String::new();
    }
    match improvement_pct(pairs) {
        Ok(v) => format!("{v:+.2}"),
        Err(e) => {
            log::warn!("improvement undefined: {e}");
            String::new()
        }
    }
}

fn improvement_table(groups: &BTreeMap<Key, Vec<&RunRecord>>) -> Table {
    let mut t = Table::new(
        "table2_pretrain_improvement",
        &[
            "dataset",
            "regime_pct",
            "model",
            "variant",
            "pairs",
            "improvement_pct",
        ],
    );
    for (k, runs) in groups {
        if k.3 == "s" {
            continue;
        }
        let base = (k.0.clone(), k.1.clone(), k.2.clone(), "s".to_string());
        if let Some(scratch) = groups.get(&base) {
            let pairs = paired(runs, scratch);
            t.rows.push(vec![
                k.0.clone(),
                k.1.clone(),
                k.2.clone(),
                k.3.clone(),
                pairs.len().to_string(),
                improvement_cell(&pairs),
            ]);
        }
    }
    t
}

fn multimodal_table(groups: &BTreeMap<Key, Vec<&RunRecord>>) -> Table {
    let mut t = Table::new(
        "table3_multimodal",
        &[
            "dataset",
            "regime_pct",
            "model",
            "pairs",
            "mp_vs_p_pct",
            "mp_vs_s_pct",
        ],
    );
    for (k, mp) in groups.iter().filter(|(k, _)| k.3 == "mp") {
        let other = |v: &str| groups.get(&(k.0.clone(), k.1.clone(), k.2.clone(), v.to_string()));
        let vs_p = other("p").map(|p| paired(mp, p)).unwrap_or_default();
        let vs_s = other("s").map(|s| paired(mp, s)).unwrap_or_default();
        t.rows.push(vec![
            k.0.clone(),
            k.1.clone(),
            k.2.clone(),
            vs_p.len().to_string(),
            improvement_cell(&vs_p),
            improvement_cell(&vs_s),
        ]);
    }
    t
}

fn strategy_table(groups: &BTreeMap<Key, Vec<&RunRecord>>) -> Table {
    let mut t = Table::new(
        "table4_finetune_strategy",
        &[
            "dataset",
            "regime_pct",
            "model",
            "variant",
            "pairs",
            "acc_windows",
            "acc_interp",
            "windows_vs_interp_pct",
        ],
    );
    for (k, interp) in groups {
        let Some(base) = k.2.strip_suffix(INTERP_SUFFIX) else {
            continue;
        };
        let Some(windows) = groups.get(&(k.0.clone(), k.1.clone(), base.to_string(), k.3.clone()))
        else {
            continue;
        };
        let pairs = paired(windows, interp);
        let acc =
            |rs: &[&RunRecord]| mean_std(&rs.iter().map(|r| r.metrics.acc).collect::<Vec<_>>()).0;
        t.rows.push(vec![
            k.0.clone(),
            k.1.clone(),
            base.to_string(),
            k.3.clone(),
            pairs.len().to_string(),
            format!("{:.2}", acc(windows)),
            format!("{:.2}", acc(interp)),
            improvement_cell(&pairs),
        ]);
    }
    t
}

fn variance_table(groups: &BTreeMap<Key, Vec<&RunRecord>>) -> Table {
    let mut t = Table::new(
        "variance",
        &[
            "dataset",
            "regime_pct",
            "model",
            "variant",
            "folds",
            "seeds",
            "variance_ratio_pct",
        ],
    );
    for (k, runs) in groups {
        let mut folds: Vec<usize> = runs.iter().map(|r| r.fold).collect();
        let mut seeds: Vec<u64> = runs.iter().map(|r| r.seed).collect();
        folds.sort_unstable();
        folds.dedup();
        seeds.sort_unstable();
        seeds.dedup();
        let grid = citrus_core::eval::grid_of(
            &runs.iter().map(|r| (*r).clone()).collect::<Vec<_>>(),
            &folds,
            &seeds,
        );
        let complete: Option<Vec<Vec<Metrics>>> = grid
            .into_iter()
            .map(|row| row.into_iter().collect())
            .collect();
        let cell = match complete {
            Some(g) if folds.len() >= 2 && seeds.len() >= 2 => match variance_ratio(&g) {
                Ok(v) => format!("{v:+.2}"),
                Err(e) => {
                    log::warn!("variance ratio for {k:?}: {e}");
                    String::new()
                }
            },
            _ => {
                log::warn!(
                    "variance ratio for {k:?} needs a complete grid of >= 2 folds and seeds"
                );
                String::new()
            }
        };
        t.rows.push(vec![
            k.0.clone(),
            k.1.clone(),
            k.2.clone(),
            k.3.clone(),
            folds.len().to_string(),
            seeds.len().to_string(),
            cell,
        ]);
    }
    t
}

fn significance_table(groups: &BTreeMap<Key, Vec<&RunRecord>>) -> Table {
    let mut t = Table::new(
        "significance",
        &[
            "dataset",
            "regime_pct",
            "model",
            "variant",
            "pairs",
            "p_acc",
            "p_roc",
            "p_prc",
        ],
    );
    for (k, runs) in groups {
        if k.3 == "s" {
            continue;
        }
        let Some(scratch) = groups.get(&(k.0.clone(), k.1.clone(), k.2.clone(), "s".to_string()))
        else {
            continue;
        };
        let pairs = paired(runs, scratch);
        let p = |m: usize| {
            let x: Vec<f64> = pairs.iter().map(|(a, _)| a.as_array()[m]).collect();
            let y: Vec<f64> = pairs.iter().map(|(_, b)| b.as_array()[m]).collect();
            match wilcoxon_one_sided(&x, &y) {
                Ok(w) => Some(w.p),
                Err(e) => {
                    log::warn!("wilcoxon for {k:?} metric {m}: {e}");
                    None
                }
            }
        };
        t.rows.push(vec![
            k.0.clone(),
            k.1.clone(),
            k.2.clone(),
            k.3.clone(),
            pairs.len().to_string(),
            fmt_opt(p(0), 5),
            fmt_opt(p(1), 5),
            fmt_opt(p(2), 5),
        ]);
    }
    t
}

/// All tables for `records`. The metrics table has distinct CSV and text forms.
pub fn build_tables(records: &[RunRecord]) -> Result<Vec<(Table, Table)>> {
    if records.is_empty() {
        return Err(WbError::format("no records to report"));
    }
    let groups = group(records);
    let same = |t: Table| (t.clone(), t);
    Ok(vec![
        metrics_tables(&groups),
        same(improvement_table(&groups)),
        same(multimodal_table(&groups)),
        same(strategy_table(&groups)),
        same(variance_table(&groups)),
        same(significance_table(&groups)),
    ])
}

/// Write every table into `out` and return the written paths.
pub fn emit_report(records: &[RunRecord], out: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (csv, txt) in build_tables(records)? {
        let csv_path = out.join(format!("{}.csv", csv.name));
        let txt_path = out.join(format!("{}.txt", txt.name));
        write_atomic(&csv_path, csv.to_csv().as_bytes())?;
        write_atomic(&txt_path, txt.to_text().as_bytes())?;
        written.push(csv_path);
        written.push(txt_path);
    }
    Ok(written)
}
