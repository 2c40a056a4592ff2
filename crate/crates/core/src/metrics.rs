//! Evaluation indices: DCA, GMPCA, cross-entropy and per-class precision.

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, KlrError, Result};
use crate::klr::{ProbMatrix, PROB_FLOOR};

/// Fraction of exact label matches.
pub fn dca(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return arg_err(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        ));
    }
    if truth.is_empty() {
        return Err(KlrError::EmptyInput("no labels to score".into()));
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

fn chosen_log_probs(prob: &ProbMatrix, truth: &[usize]) -> Result<Vec<f64>> {
    if prob.nrows() != truth.len() {
        return arg_err(format!(
            "{} probability rows for {} labels",
            prob.nrows(),
            truth.len()
        ));
    }
    if truth.is_empty() {
        return Err(KlrError::EmptyInput("no labels to score".into()));
    }
    truth
        .iter()
        .enumerate()
        .map(|(n, &c)| {
            if c >= prob.values.ncols() {
                return arg_err(format!("label {c} outside 0..{}", prob.values.ncols()));
            }
            let p = prob.values[(n, c)].max(PROB_FLOOR);
            if !(p > 0.0) {
                return Err(KlrError::Numeric(format!("chosen probability at row {n} is not positive")));
            }
            Ok(p.ln())
        })
        .collect()
}

/// Cross-entropy: `−mean log p_{n, y_n}`.
pub fn cel(prob: &ProbMatrix, truth: &[usize]) -> Result<f64> {
    let logs = chosen_log_probs(prob, truth)?;
    Ok(-logs.iter().sum::<f64>() / logs.len() as f64)
}

/// Geometric mean of the chosen probabilities, computed in log space.
pub fn gmpca(prob: &ProbMatrix, truth: &[usize]) -> Result<f64> {
    Ok((-cel(prob, truth)?).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Precision {
    pub values: Vec<f64>,
    /// Classes that no sample was assigned to; their precision reads 0.
    pub never_predicted: Vec<usize>,
}

pub fn precision_per_class(predicted: &[usize], truth: &[usize], classes: usize) -> Result<Precision> {
    if predicted.len() != truth.len() {
        return arg_err("prediction and label lengths differ");
    }
    let mut tp = vec![0usize; classes];
    let mut pp = vec![0usize; classes];
    for (&p, &t) in predicted.iter().zip(truth) {
        if p >= classes || t >= classes {
            return arg_err(format!("label outside 0..{classes}"));
        }
        pp[p] += 1;
        if p == t {
            tp[p] += 1;
        }
    }
    let values = (0..classes)
        .map(|c| if pp[c] == 0 { 0.0 } else { tp[c] as f64 / pp[c] as f64 })
        .collect();
    let never_predicted = (0..classes).filter(|&c| pp[c] == 0).collect();
    Ok(Precision { values, never_predicted })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub dca: f64,
    pub gmpca: f64,
    pub cel: f64,
    pub precision_per_class: Vec<f64>,
    pub never_predicted: Vec<usize>,
    pub class_names: Vec<String>,
}

impl EvalReport {
    pub fn compute(prob: &ProbMatrix, truth: &[usize], class_names: &[String]) -> Result<Self> {
        if prob.values.ncols() != class_names.len() {
            return arg_err("probability columns differ from class names");
        }
        let predicted = prob.argmax();
        let cel = cel(prob, truth)?;
        let precision = precision_per_class(&predicted, truth, class_names.len())?;
        Ok(Self {
            n: truth.len(),
            dca: dca(&predicted, truth)?,
            gmpca: (-cel).exp(),
            cel,
            precision_per_class: precision.values,
            never_predicted: precision.never_predicted,
            class_names: class_names.to_vec(),
        })
    }

    /// Percent rendering as printed in result tables.
    pub fn summary(&self) -> String {
        let prec: Vec<String> = self
            .class_names
            .iter()
            .zip(&self.precision_per_class)
            .map(|(c, p)| format!("{c}={:.2}", 100.0 * p))
            .collect();
        format!(
            "n={} DCA={:.2}% GMPCA={:.2}% CEL={:.4} precision[{}]",
            self.n,
            100.0 * self.dca,
            100.0 * self.gmpca,
            self.cel,
            prec.join(" ")
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn probs(rows: &[&[f64]]) -> ProbMatrix {
        let cols = rows[0].len();
        ProbMatrix {
            values: DMatrix::from_row_iterator(rows.len(), cols, rows.iter().flat_map(|r| r.iter().copied())),
        }
    }

    #[test]
    fn dca_counts() {
        assert_eq!(dca(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(dca(&[1, 0], &[0, 1]).unwrap(), 0.0);
        assert_eq!(dca(&[0, 1, 1, 1], &[0, 1, 1, 0]).unwrap(), 0.75);
        assert!(dca(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn gmpca_cases() {
        let p = probs(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(gmpca(&p, &[0, 1]).unwrap(), 1.0);
        let p = probs(&[&[0.5, 0.5], &[0.5, 0.5]]);
        assert!((gmpca(&p, &[0, 1]).unwrap() - 0.5).abs() < 1e-15);
        let p = probs(&[&[0.9, 0.1], &[0.6, 0.4], &[0.4, 0.6]]);
        let expected = ((0.9f64.ln() + 0.4f64.ln() + 0.6f64.ln()) / 3.0).exp();
        assert!((gmpca(&p, &[0, 1, 1]).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.6).abs() < 0.01);
    }

    #[test]
    fn precision_cases() {
        let p = precision_per_class(&[0, 0, 1], &[0, 1, 1], 2).unwrap();
        assert_eq!(p.values, vec![0.5, 1.0]);
        let p = precision_per_class(&[0, 0], &[0, 1], 3).unwrap();
        assert_eq!(p.values, vec![0.5, 0.0, 0.0]);
        assert_eq!(p.never_predicted, vec![1, 2]);
        let p = precision_per_class(&[2, 1, 0], &[2, 1, 0], 3).unwrap();
        assert_eq!(p.values, vec![1.0; 3]);
    }

    #[test]
    fn report_identity() {
        let p = probs(&[&[0.7, 0.3], &[0.2, 0.8], &[0.55, 0.45]]);
        let r = EvalReport::compute(&p, &[0, 1, 1], &["a".into(), "b".into()]).unwrap();
        assert!((r.gmpca * r.cel.exp() - 1.0).abs() < 1e-12);
        assert!((r.dca - 2.0 / 3.0).abs() < 1e-15);
        assert!(r.summary().contains("DCA=66.67%"));
    }
}
