use alloc::format;
use alloc::vec::Vec;

use super::metrics::{average_ranks, mean, Metrics};
use crate::error::{Error, Result};

/// Mean relative change of `a` over `b` in percent: per pair and metric,
/// averaged over pairs, then over the three metrics. Pair-metrics with a
/// zero baseline are skipped.
pub fn improvement_pct(pairs: &[(Metrics, Metrics)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("improvement pairs".into()));
    }
    let mut per_metric = Vec::with_capacity(3);
    for m in 0..3 {
        let mut changes = Vec::new();
        for (a, b) in pairs {
            let (a, b) = (a.as_array()[m], b.as_array()[m]);
            if b == 0.0 {
                log::warn!("zero baseline skipped in improvement");
                continue;
            }
            changes.push(100.0 * (a - b) / b);
        }
        if !changes.is_empty() {
            per_metric.push(mean(&changes));
        }
    }
    if per_metric.is_empty() {
        return Err(Error::DegenerateRuns("every baseline is zero".into()));
    }
    Ok(mean(&per_metric))
}

fn sample_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// Fold-versus-seed variance ratio in percent. `grid[f][s]` holds the
/// metrics of fold `f` under seed `s`. Per metric: variance of the fold means
/// over the mean within-fold variance across seeds; the ratio is averaged over
/// metrics and reported as `(ratio − 1)·100`. Variances use `n − 1`.
pub fn variance_ratio(grid: &[Vec<Metrics>]) -> Result<f64> {
    let folds = grid.len();
    let seeds = grid.first().map_or(0, Vec::len);
    if folds < 2 || seeds < 2 || grid.iter().any(|r| r.len() != seeds) {
        return Err(Error::invalid(format!(
            "need a complete grid of >= 2 folds and >= 2 seeds, got {folds} × {seeds}"
        )));
    }
    let mut ratios = Vec::with_capacity(3);
    for m in 0..3 {
        let rows: Vec<Vec<f64>> = grid
            .iter()
            .map(|r| r.iter().map(|x| x.as_array()[m]).collect())
            .collect();
        let fold_means: Vec<f64> = rows.iter().map(|r| mean(r)).collect();
        let seed_var = mean(&rows.iter().map(|r| sample_var(r)).collect::<Vec<_>>());
        if seed_var == 0.0 {
            return Err(Error::DegenerateRuns(format!(
                "metric {m} has zero variance across seeds"
            )));
        }
        ratios.push(sample_var(&fold_means) / seed_var);
    }
    Ok((mean(&ratios) - 1.0) * 100.0)
}

/// Wilcoxon signed-rank result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wilcoxon {
    /// Sum of ranks of positive differences.
    pub w_plus: f64,
    /// Non-zero differences used.
    pub n: usize,
    pub p: f64,
    pub exact: bool,
}

/// Largest sample size handled by full sign enumeration.
pub const EXACT_MAX: usize = 12;

/// One-sided test that `x` tends to exceed `y`. Zero differences are dropped
/// and tied magnitudes share average ranks. Up to [`EXACT_MAX`] differences
/// the p-value enumerates all sign assignments; above, a normal approximation
/// with tie and continuity corrections is used.
pub fn wilcoxon_one_sided(x: &[f64], y: &[f64]) -> Result<Wilcoxon> {
    if x.len() != y.len() {
        return Err(Error::shape(format!(
            "{} vs {} paired samples",
            x.len(),
            y.len()
        )));
    }
    let d: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a - b)
        .filter(|&v| v != 0.0)
        .collect();
    if d.is_empty() {
        return Err(Error::NoEvidence);
    }
    let n = d.len();
    if n < 5 {
        return Err(Error::invalid(format!(
            "{n} non-zero differences, need at least 5"
        )));
    }
    let mags: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = average_ranks(&mags);
    let w_plus: f64 = ranks
        .iter()
        .zip(&d)
        .filter(|(_, &v)| v > 0.0)
        .map(|(r, _)| r)
        .sum();
    if n <= EXACT_MAX {
        // Ranks are multiples of one half; compare doubled integers.
        let twice: Vec<u64> = ranks.iter().map(|r| libm::round(2.0 * r) as u64).collect();
        let observed = libm::round(2.0 * w_plus) as u64;
        let mut hits = 0u64;
        for signs in 0u64..(1 << n) {
            let w: u64 = (0..n)
                .filter(|&i| signs >> i & 1 == 1)
                .map(|i| twice[i])
                .sum();
            hits += u64::from(w >= observed);
        }
        return Ok(Wilcoxon {
            w_plus,
            n,
            p: hits as f64 / (1u64 << n) as f64,
            exact: true,
        });
    }
    let nf = n as f64;
    let mu = nf * (nf + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = mags.clone();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = (w_plus - mu - 0.5) / libm::sqrt(var);
    let p = 0.5 * libm::erfc(z / core::f64::consts::SQRT_2);
    Ok(Wilcoxon {
        w_plus,
        n,
        p,
        exact: false,
    })
}
