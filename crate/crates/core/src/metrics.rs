//! Accuracy and macro-averaged F1 over the three polarity classes.

use std::fmt;

use serde::Serialize;

use crate::data::Polarity;
use crate::error::{Error, Result};
use crate::head::NUM_CLASSES;

fn check(preds: &[usize], golds: &[usize]) -> Result<()> {
    if preds.len() != golds.len() {
        return Err(Error::arg(format!(
            "{} predictions for {} gold labels",
            preds.len(),
            golds.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::arg("no predictions to score"));
    }
    if let Some(bad) = preds.iter().chain(golds).find(|&&c| c >= NUM_CLASSES) {
        return Err(Error::arg(format!("class index {bad} out of range")));
    }
    Ok(())
}

pub fn accuracy(preds: &[usize], golds: &[usize]) -> Result<f64> {
    check(preds, golds)?;
    let hits = preds.iter().zip(golds).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Unweighted mean of per-class F1. A class with `precision + recall = 0`
/// (including one that is neither predicted nor present) scores 0.
pub fn macro_f1(preds: &[usize], golds: &[usize]) -> Result<f64> {
    Ok(EvalReport::new(preds, golds)?.macro_f1)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub precision: [f64; NUM_CLASSES],
    pub recall: [f64; NUM_CLASSES],
    pub f1: [f64; NUM_CLASSES],
    /// `confusion[gold][pred]`
    pub confusion: [[usize; NUM_CLASSES]; NUM_CLASSES],
}

impl EvalReport {
    pub fn new(preds: &[usize], golds: &[usize]) -> Result<Self> {
        check(preds, golds)?;
        let mut confusion = [[0usize; NUM_CLASSES]; NUM_CLASSES];
        for (&p, &g) in preds.iter().zip(golds) {
            confusion[g][p] += 1;
        }
        let mut precision = [0.0; NUM_CLASSES];
        let mut recall = [0.0; NUM_CLASSES];
        let mut f1 = [0.0; NUM_CLASSES];
        for c in 0..NUM_CLASSES {
            let tp = confusion[c][c] as f64;
            let predicted: usize = (0..NUM_CLASSES).map(|g| confusion[g][c]).sum();
            let actual: usize = confusion[c].iter().sum();
            precision[c] = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
            recall[c] = if actual > 0 { tp / actual as f64 } else { 0.0 };
            let denom = precision[c] + recall[c];
            f1[c] = if denom > 0.0 {
                2.0 * precision[c] * recall[c] / denom
            } else {
                0.0
            };
        }
        let trace: usize = (0..NUM_CLASSES).map(|c| confusion[c][c]).sum();
        Ok(EvalReport {
            accuracy: trace as f64 / preds.len() as f64,
            macro_f1: f1.iter().sum::<f64>() / NUM_CLASSES as f64,
            precision,
            recall,
            f1,
            confusion,
        })
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    /// Single-line JSON with keys in the order `accuracy, macro_f1,
    /// precision, recall, f1, confusion`.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "accuracy  {:.4}", self.accuracy)?;
        writeln!(f, "macro-F1  {:.4}", self.macro_f1)?;
        writeln!(f, "{:<10} {:>9} {:>9} {:>9}", "class", "precision", "recall", "f1")?;
        for p in Polarity::ALL {
            let c = p.index();
            writeln!(
                f,
                "{:<10} {:>9.4} {:>9.4} {:>9.4}",
                p.as_str(),
                self.precision[c],
                self.recall[c],
                self.f1[c]
            )?;
        }
        writeln!(f, "confusion (rows = gold, cols = predicted)")?;
        for p in Polarity::ALL {
            let row = &self.confusion[p.index()];
            writeln!(f, "{:<10} {:>6} {:>6} {:>6}", p.as_str(), row[0], row[1], row[2])?;
        }
        Ok(())
    }
}
