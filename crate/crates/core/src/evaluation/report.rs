use std::collections::BTreeMap;
use std::path::Path;

use serde::{Serialize, Serializer};

use super::metrics::{mse_metric, pcc_or_undefined};
use super::predict::Timeline;
use crate::error::{Error, Result};

/// Writes an undefined correlation as the string `"undefined"`.
pub(crate) fn pcc_field<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => s.serialize_f64(*x),
        None => s.serialize_str("undefined"),
    }
}

/// Scores of one fold (or one subject's held-out sequences).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FoldResult {
    pub subject: u32,
    /// Dataset indices of the tested sequences.
    pub test_sequences: Vec<usize>,
    pub train_subjects: Vec<u32>,
    pub frames: usize,
    pub mse: f64,
    #[serde(serialize_with = "pcc_field")]
    pub pcc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub folds: Vec<FoldResult>,
    /// Mean of the per-fold MSEs.
    pub mean_mse: f64,
    /// Mean over folds with a defined correlation.
    #[serde(serialize_with = "pcc_field")]
    pub mean_pcc: Option<f64>,
    /// Metrics over all tested frames pooled together.
    pub pooled_mse: f64,
    #[serde(serialize_with = "pcc_field")]
    pub pooled_pcc: Option<f64>,
    pub frames_per_second: f64,
    pub fold_subjects: BTreeMap<usize, u32>,
}

/// Scores the timelines of one fold.
pub fn score_fold(
    subject: u32,
    test_sequences: Vec<usize>,
    train_subjects: Vec<u32>,
    timelines: &[Timeline],
) -> Result<FoldResult> {
    let pred: Vec<f64> = timelines.iter().flat_map(Timeline::predictions).collect();
    let truth: Vec<f64> = timelines.iter().flat_map(Timeline::truths).collect();
    Ok(FoldResult {
        subject,
        test_sequences,
        train_subjects,
        frames: pred.len(),
        mse: mse_metric(&pred, &truth)?,
        pcc: pcc_or_undefined(&pred, &truth)?,
    })
}

impl EvalReport {
    /// Aggregates folds, given in subject order, with the timelines of every
    /// tested sequence.
    pub fn assemble(folds: Vec<FoldResult>, timelines: &[Timeline], frames_per_second: f64) -> Result<Self> {
        if folds.is_empty() {
            return Err(Error::config("report needs at least one fold"));
        }
        let mean_mse = folds.iter().map(|f| f.mse).sum::<f64>() / folds.len() as f64;
        let defined: Vec<f64> = folds.iter().filter_map(|f| f.pcc).collect();
        let mean_pcc = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
        let pred: Vec<f64> = timelines.iter().flat_map(Timeline::predictions).collect();
        let truth: Vec<f64> = timelines.iter().flat_map(Timeline::truths).collect();
        let fold_subjects = folds.iter().enumerate().map(|(i, f)| (i, f.subject)).collect();
        Ok(EvalReport {
            mean_mse,
            mean_pcc,
            pooled_mse: mse_metric(&pred, &truth)?,
            pooled_pcc: pcc_or_undefined(&pred, &truth)?,
            frames_per_second,
            fold_subjects,
            folds,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}
