use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Accuracy, AUROC and average precision, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub acc: f64,
    pub roc: f64,
    pub prc: f64,
}

impl Metrics {
    pub fn as_array(&self) -> [f64; 3] {
        [self.acc, self.roc, self.prc]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// Average (1-based) ranks of `x`, ties sharing the mean rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = alloc::vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Area under the ROC curve in `[0, 1]`: the probability that a random
/// positive outscores a random negative, ties counting one half.
pub fn auroc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let ranks = average_ranks(scores);
    let sum: f64 = ranks
        .iter()
        .zip(positive)
        .filter(|(_, &p)| p)
        .map(|(r, _)| r)
        .sum();
    let u = sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos * n_neg) as f64)
}

/// Average precision in `[0, 1]`: `Σ (R_i − R_{i−1}) · P_i` over the distinct
/// score thresholds taken in decreasing order.
pub fn average_precision(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    if n_pos == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            tp += usize::from(positive[order[i]]);
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / n_pos as f64;
        ap += (recall - prev_recall) * tp as f64 / seen as f64;
        prev_recall = recall;
    }
    Some(ap)
}

/// ACC, ROC and PRC in percent for `probs: [n][K]`. Binary problems score
/// class 1; multiclass problems average one-vs-rest values over the classes
/// present in `y`.
pub fn metric_suite(y: &[usize], probs: &[Vec<f64>]) -> Result<Metrics> {
    if y.is_empty() || y.len() != probs.len() {
        return Err(Error::shape(format!(
            "{} labels for {} probability rows",
            y.len(),
            probs.len()
        )));
    }
    let k = probs[0].len();
    if k < 2 {
        return Err(Error::invalid("need at least two classes"));
    }
    for (i, row) in probs.iter().enumerate() {
        let s: f64 = row.iter().sum();
        if row.len() != k || (s - 1.0).abs() > 1e-4 || row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "probability row {i} is not a distribution"
            )));
        }
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= k) {
        return Err(Error::invalid(format!("label {bad} outside {k} classes")));
    }
    let hits = probs
        .iter()
        .zip(y)
        .filter(|(p, &c)| crate::transfer::argmax(p) == c)
        .count();
    let acc = 100.0 * hits as f64 / y.len() as f64;
    let one_vs_rest = |c: usize| {
        let scores: Vec<f64> = probs.iter().map(|p| p[c]).collect();
        let pos: Vec<bool> = y.iter().map(|&t| t == c).collect();
        (auroc(&scores, &pos), average_precision(&scores, &pos))
    };
    let (roc, prc) = if k == 2 {
        let (r, p) = one_vs_rest(1);
        match (r, p) {
            (Some(r), Some(p)) => (r, p),
            _ => return Err(Error::invalid("binary labels contain a single class")),
        }
    } else {
        let (mut rs, mut ps) = (Vec::new(), Vec::new());
        for c in 0..k {
            match one_vs_rest(c) {
                (Some(r), Some(p)) => {
                    rs.push(r);
                    ps.push(p);
                }
                _ => log::warn!("class {c} absent from labels; skipped in macro average"),
            }
        }
        if rs.is_empty() {
            return Err(Error::invalid("no class supports a one-vs-rest curve"));
        }
        (mean(&rs), mean(&ps))
    };
    Ok(Metrics {
        acc,
        roc: 100.0 * roc,
        prc: 100.0 * prc,
    })
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn three_of_four_pairs() {
        let pos = [false, false, true, true];
        assert_eq!(auroc(&[0.1, 0.4, 0.35, 0.8], &pos), Some(0.75));
    }

    #[test]
    fn ties_count_half() {
        let pos = [false, true, false, true];
        assert_eq!(auroc(&[0.5; 4], &pos), Some(0.5));
    }

    #[test]
    fn perfect_predictions() {
        let y = [0, 1, 2, 1];
        let probs: Vec<Vec<f64>> = y
            .iter()
            .map(|&c| (0..3).map(|k| f64::from(u8::from(k == c))).collect())
            .collect();
        let m = metric_suite(&y, &probs).unwrap();
        assert_eq!(
            m,
            Metrics {
                acc: 100.0,
                roc: 100.0,
                prc: 100.0
            }
        );
    }

    #[test]
    fn ap_small_case() {
        // ranked: + - + → precision 1 at recall .5, 2/3 at recall 1
        let ap = average_precision(&[0.9, 0.8, 0.7], &[true, false, true]).unwrap();
        assert!((ap - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_unnormalized_rows() {
        assert!(metric_suite(&[0, 1], &[vec![0.5, 0.6], vec![0.5, 0.5]]).is_err());
    }
}
