//! Accuracy measures: overall accuracy, average accuracy, Cohen's kappa.

use crate::datamodel::ConfusionMatrix;
use crate::error::{Error, Result};

/// Scores of one evaluation run, plus aggregate mean/std over
/// repetitions when produced by [`aggregate`].
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub oa: f64,
    pub aa: f64,
    pub kappa: f64,
    /// diag_c / row_c per class; classes with an empty test row are
    /// skipped (and excluded from AA).
    pub per_class_recall: Vec<Option<f64>>,
    pub matrix: ConfusionMatrix,
}

/// Tally prediction-vs-truth pairs. Truth labels must be > 0; `classes`
/// sizes the matrix (ids 1..=classes).
pub fn confusion(pred: &[u16], truth: &[u16], classes: u16) -> Result<ConfusionMatrix> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions vs {} truth labels",
            pred.len(),
            truth.len()
        )));
    }
    let mut m = ConfusionMatrix::zeros(classes as usize)?;
    for (&p, &t) in pred.iter().zip(truth) {
        if t == 0 || t > classes || p == 0 || p > classes {
            return Err(Error::InvalidData(format!(
                "label pair (pred {p}, truth {t}) outside 1..={classes}"
            )));
        }
        m.increment(t as usize - 1, p as usize - 1);
    }
    Ok(m)
}

/// OA = trace/total; AA = mean per-class recall over classes with a
/// non-empty test row; kappa = (p_o - p_e) / (1 - p_e) with
/// p_e = sum_c row_c * col_c / total^2. When p_e = 1 kappa is reported
/// as 1 if agreement is also perfect, otherwise it is an error.
pub fn oa_aa_kappa(m: &ConfusionMatrix) -> Result<(f64, f64, f64)> {
    let total = m.total();
    if total == 0 {
        return Err(Error::InvalidData("empty confusion matrix".into()));
    }
    let total = total as f64;
    let c = m.classes();
    let mut diag = 0.0;
    let mut pe = 0.0;
    let mut recall_sum = 0.0;
    let mut recall_n = 0usize;
    for i in 0..c {
        let d = m.get(i, i) as f64;
        diag += d;
        let row = m.row_total(i) as f64;
        let col = m.col_total(i) as f64;
        pe += row * col / (total * total);
        if row > 0.0 {
            recall_sum += d / row;
            recall_n += 1;
        }
    }
    let oa = diag / total;
    let aa = recall_sum / recall_n as f64;
    let kappa = if (1.0 - pe).abs() < 1e-15 {
        if (oa - 1.0).abs() < 1e-15 {
            1.0
        } else {
            return Err(Error::InvalidData(
                "kappa undefined: chance agreement is 1 but observed agreement is not".into(),
            ));
        }
    } else {
        (oa - pe) / (1.0 - pe)
    };
    Ok((oa, aa, kappa))
}

pub fn eval_report(m: ConfusionMatrix) -> Result<EvalReport> {
    let (oa, aa, kappa) = oa_aa_kappa(&m)?;
    let per_class_recall = (0..m.classes())
        .map(|i| {
            let row = m.row_total(i);
            (row > 0).then(|| m.get(i, i) as f64 / row as f64)
        })
        .collect();
    Ok(EvalReport {
        oa,
        aa,
        kappa,
        per_class_recall,
        matrix: m,
    })
}

/// Mean and sample (n-1) standard deviation; a single value reports
/// std 0 by convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    MeanStd { mean, std }
}

/// Aggregate OA/AA/kappa over repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub repetitions: usize,
    pub oa: MeanStd,
    pub aa: MeanStd,
    pub kappa: MeanStd,
}

pub fn aggregate(reports: &[EvalReport]) -> Result<AggregateReport> {
    if reports.is_empty() {
        return Err(Error::InvalidData("no reports to aggregate".into()));
    }
    let take = |f: fn(&EvalReport) -> f64| -> Vec<f64> { reports.iter().map(f).collect() };
    Ok(AggregateReport {
        repetitions: reports.len(),
        oa: mean_std(&take(|r| r.oa)),
        aa: mean_std(&take(|r| r.aa)),
        kappa: mean_std(&take(|r| r.kappa)),
    })
}
