//! Binary classification metrics: F1 at a threshold, step-wise average
//! precision (area under the precision-recall curve), and fold aggregation.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// `(probability, is_positive)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    pairs: Vec<(f64, bool)>,
}

impl ScoredSet {
    pub fn new(pairs: Vec<(f64, bool)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::UndefinedMetric("empty scored set".into()));
        }
        if let Some((p, _)) = pairs.iter().find(|(p, _)| !(p.is_finite() && (0.0..=1.0).contains(p))) {
            return Err(Error::UndefinedMetric(format!("probability {p} outside [0, 1]")));
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[(f64, bool)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.pairs.iter().filter(|(_, y)| *y).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    /// A sample is predicted positive when its score is strictly above the
    /// threshold.
    pub fn at(scored: &ScoredSet, threshold: f64) -> Self {
        let mut c = Confusion::default();
        for &(p, y) in scored.pairs() {
            match (p > threshold, y) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// `2TP / (2TP + FP + FN)`, or 1 with the degenerate flag set when there
    /// are no positives among labels or predictions.
    pub fn f1(&self) -> (f64, bool) {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            (1.0, true)
        } else {
            (2.0 * self.tp as f64 / denom as f64, false)
        }
    }
}

pub fn f1(scored: &ScoredSet, threshold: f64) -> f64 {
    Confusion::at(scored, threshold).f1().0
}

/// Average precision `sum_k (R_k - R_{k-1}) P_k` over descending distinct
/// scores; tied scores form a single step.
pub fn auprc(scored: &ScoredSet) -> Result<f64> {
    let total_pos = scored.positives();
    if total_pos == 0 || total_pos == scored.len() {
        return Err(Error::UndefinedMetric(
            "average precision needs both positive and negative examples".into(),
        ));
    }
    let mut sorted = scored.pairs().to_vec();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));

    let mut ap = 0.0;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == score {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let recall = tp as f64 / total_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(ap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub confusion: Confusion,
    pub n: usize,
    pub f1: f64,
    /// Set when F1 fell back to 1 because nothing was positive.
    pub f1_degenerate: bool,
    pub auprc: f64,
}

impl EvalReport {
    pub fn from_scored(scored: &ScoredSet) -> Result<Self> {
        let confusion = Confusion::at(scored, DEFAULT_THRESHOLD);
        let (f1, f1_degenerate) = confusion.f1();
        Ok(Self {
            confusion,
            n: scored.len(),
            f1,
            f1_degenerate,
            auprc: auprc(scored)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation (divisor n).
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> Result<MeanStd> {
    if values.is_empty() {
        return Err(Error::UndefinedMetric("no values to aggregate".into()));
    }
    let n = values.len() as f64;
    // sorted summation keeps the result independent of fold order
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Ok(MeanStd { mean, std: var.sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub folds: usize,
    pub f1: MeanStd,
    pub auprc: MeanStd,
}

pub fn aggregate(reports: &[EvalReport]) -> Result<Aggregate> {
    let f1s: Vec<f64> = reports.iter().map(|r| r.f1).collect();
    let aps: Vec<f64> = reports.iter().map(|r| r.auprc).collect();
    Ok(Aggregate {
        folds: reports.len(),
        f1: mean_std(&f1s)?,
        auprc: mean_std(&aps)?,
    })
}
