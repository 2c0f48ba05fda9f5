use crate::error::{Error, Result};

fn check(predictions: &[usize], labels: &[usize], classes: usize) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::Empty("no labels to score"));
    }
    if predictions.len() != labels.len() {
        return Err(Error::DimMismatch {
            expected: labels.len(),
            actual: predictions.len(),
        });
    }
    if let Some(&bad) = labels.iter().chain(predictions).find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange {
            label: bad,
            classes,
        });
    }
    Ok(())
}

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::Empty("no labels to score"));
    }
    if predictions.len() != labels.len() {
        return Err(Error::DimMismatch {
            expected: labels.len(),
            actual: predictions.len(),
        });
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Per-class F1; a class with no true or predicted members scores 0.
pub fn per_class_f1(predictions: &[usize], labels: &[usize], classes: usize) -> Result<Vec<f64>> {
    check(predictions, labels, classes)?;
    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut fn_ = vec![0usize; classes];
    for (&p, &l) in predictions.iter().zip(labels) {
        if p == l {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[l] += 1;
        }
    }
    Ok((0..classes)
        .map(|k| {
            let denom = 2 * tp[k] + fp[k] + fn_[k];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[k] as f64 / denom as f64
            }
        })
        .collect())
}

/// Unweighted mean of per-class F1 over all `classes`.
pub fn macro_f1(predictions: &[usize], labels: &[usize], classes: usize) -> Result<f64> {
    let f1 = per_class_f1(predictions, labels, classes)?;
    Ok(f1.iter().sum::<f64>() / classes as f64)
}

/// Micro-averaged F1; equals accuracy for single-label classification.
pub fn micro_f1(predictions: &[usize], labels: &[usize], classes: usize) -> Result<f64> {
    check(predictions, labels, classes)?;
    accuracy(predictions, labels)
}

/// Most frequent label, lowest index on ties.
pub fn majority_class(labels: &[usize], classes: usize) -> usize {
    let mut counts = vec![0usize; classes];
    for &l in labels {
        counts[l] += 1;
    }
    counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map_or(0, |(k, _)| k)
}

/// Macro-F1 of the constant predictor that always answers the majority class.
pub fn majority_f1(labels: &[usize], classes: usize) -> Result<f64> {
    let m = majority_class(labels, classes);
    macro_f1(&vec![m; labels.len()], labels, classes)
}

/// Sample variance (n - 1 denominator); 0 for fewer than two values.
pub fn variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}
