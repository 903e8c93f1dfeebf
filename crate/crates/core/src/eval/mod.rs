//! Cross-validated evaluation: folds, data regimes, metrics, run records and
//! the paired statistics used to compare runs.

mod folds;
mod metrics;
mod protocol;
mod records;
mod stats;

pub use folds::{
    grouped_folds, stratified_folds, subsample_regime, train_val_split, FoldMode, FoldPlan,
};
pub use metrics::{auroc, average_precision, average_ranks, metric_suite, Metrics};
pub use protocol::{
    evaluate, fold_split, grid_of, run_cell, Evaluation, ProtocolConfig, RunLabels, DATA_SEED,
    MODEL_SEEDS,
};
pub use records::{parse_records, RunRecord, RECORD_HEADER};
pub use stats::{improvement_pct, variance_ratio, wilcoxon_one_sided, Wilcoxon, EXACT_MAX};

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Pair `a` with `b` on (fold, seed); every key must appear on both sides.
pub fn pair_runs(a: &[RunRecord], b: &[RunRecord]) -> Result<Vec<(Metrics, Metrics)>> {
    let index: BTreeMap<(usize, u64), Metrics> =
        b.iter().map(|r| (r.pair_key(), r.metrics)).collect();
    if index.len() != a.len() || b.len() != a.len() {
        return Err(Error::invalid(
            "paired runs must share identical (fold, seed) keys",
        ));
    }
    a.iter()
        .map(|r| {
            index
                .get(&r.pair_key())
                .map(|m| (r.metrics, *m))
                .ok_or_else(|| {
                    Error::invalid(alloc::format!(
                        "no partner for fold {} seed {}",
                        r.fold,
                        r.seed
                    ))
                })
        })
        .collect()
}
