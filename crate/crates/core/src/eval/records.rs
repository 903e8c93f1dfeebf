use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::metrics::Metrics;
use crate::error::{Error, Result};

pub const RECORD_HEADER: &str = "dataset,model,variant,regime_pct,fold,seed,acc,roc,prc";

/// Outcome of one (fold, seed) fine-tuning run. `variant` is `s` for
/// training from scratch, or the pre-training mode (`p`, `fp`, `mp`).
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub dataset: String,
    pub model: String,
    pub variant: String,
    pub regime_pct: f64,
    pub fold: usize,
    pub seed: u64,
    pub metrics: Metrics,
}

impl RunRecord {
    /// Key shared by paired runs.
    pub fn pair_key(&self) -> (usize, u64) {
        (self.fold, self.seed)
    }

    pub fn to_csv(&self) -> Result<String> {
        for field in [&self.dataset, &self.model, &self.variant] {
            if field.is_empty() || field.contains([',', '\n', '\r', '"']) {
                return Err(Error::invalid(format!(
                    "record field {field:?} is not a plain CSV cell"
                )));
            }
        }
        if !self.metrics.is_finite() {
            return Err(Error::NonFinite);
        }
        let m = self.metrics;
        Ok(format!(
            "{},{},{},{},{},{},{},{},{}",
            self.dataset,
            self.model,
            self.variant,
            self.regime_pct,
            self.fold,
            self.seed,
            m.acc,
            m.roc,
            m.prc
        ))
    }

    pub fn from_csv(line: &str) -> Result<Self> {
        let cells: Vec<&str> = line.trim_end_matches(['\r', '\n']).split(',').collect();
        if cells.len() != 9 {
            return Err(Error::invalid(format!(
                "record has {} fields, expected 9: {line:?}",
                cells.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            cells[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("field {i} is not a number: {:?}", cells[i])))
        };
        let int = |i: usize| -> Result<u64> {
            cells[i]
                .trim()
                .parse::<u64>()
                .map_err(|_| Error::invalid(format!("field {i} is not an integer: {:?}", cells[i])))
        };
        let metrics = Metrics {
            acc: num(6)?,
            roc: num(7)?,
            prc: num(8)?,
        };
        if !metrics.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(RunRecord {
            dataset: cells[0].to_string(),
            model: cells[1].to_string(),
            variant: cells[2].to_string(),
            regime_pct: num(3)?,
            fold: int(4)? as usize,
            seed: int(5)?,
            metrics,
        })
    }
}

/// Parse a record file body (header line required).
pub fn parse_records(text: &str) -> Result<Vec<RunRecord>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == RECORD_HEADER => {}
        other => {
            return Err(Error::invalid(format!(
                "missing record header, found {other:?}"
            )))
        }
    }
    lines.map(RunRecord::from_csv).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let r = RunRecord {
            dataset: "toy".into(),
            model: "CiTrus".into(),
            variant: "p".into(),
            regime_pct: 1.0,
            fold: 3,
            seed: 1337,
            metrics: Metrics {
                acc: 51.25,
                roc: 60.0,
                prc: 0.1 + 0.2,
            },
        };
        let line = r.to_csv().unwrap();
        assert_eq!(RunRecord::from_csv(&line).unwrap(), r);
        let body = format!("{RECORD_HEADER}\n{line}\n");
        assert_eq!(parse_records(&body).unwrap(), alloc::vec![r]);
    }

    #[test]
    fn rejects_commas_in_names() {
        let r = RunRecord {
            dataset: "a,b".into(),
            model: "m".into(),
            variant: "s".into(),
            regime_pct: 1.0,
            fold: 0,
            seed: 0,
            metrics: Metrics::default(),
        };
        assert!(r.to_csv().is_err());
    }
}
