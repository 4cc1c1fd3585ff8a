//! Uncertainty and calibration metrics: accuracy, predictive entropy,
//! binned ECE with reliability-diagram data, OOD ROC/PR AUC, and pairwise
//! prediction diversity.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Natural-log entropy of one probability vector; `0 * ln 0` counts as 0.
pub fn entropy(probs: &[f64]) -> Result<f64> {
    validate_distribution(probs)?;
    Ok(probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum())
}

/// Mean row entropy of a `B x C` probability tensor.
pub fn mean_entropy(probs: &Tensor) -> Result<f64> {
    if probs.rows() == 0 {
        return Err(Error::validation(
            "mean_entropy of empty tensor".to_string(),
        ));
    }
    let mut total = 0.0;
    for row in probs.iter_rows() {
        total += entropy(row)?;
    }
    Ok(total / probs.rows() as f64)
}

fn validate_distribution(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::validation("empty probability vector".to_string()));
    }
    if probs.iter().any(|&p| p.is_nan() || p < 0.0) {
        return Err(Error::validation(
            "probabilities must be nonnegative".to_string(),
        ));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::validation(format!(
            "probabilities sum to {sum}, expected 1 within 1e-6"
        )));
    }
    Ok(())
}

/// Fraction of predictions equal to their labels.
pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    if preds.is_empty() || preds.len() != labels.len() {
        return Err(Error::validation(format!(
            "accuracy needs equal nonempty inputs, got {} and {}",
            preds.len(),
            labels.len()
        )));
    }
    let correct = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / preds.len() as f64)
}

/// Predicted class per row: argmax, first index on ties.
pub fn argmax_rows(probs: &Tensor) -> Vec<usize> {
    probs
        .iter_rows()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Reliability-diagram data: equal-width confidence bins over [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityDiagram {
    pub bin_edges: Vec<f64>,
    pub bin_confidence: Vec<f64>,
    pub bin_accuracy: Vec<f64>,
    pub bin_count: Vec<usize>,
}

impl ReliabilityDiagram {
    pub fn num_bins(&self) -> usize {
        self.bin_count.len()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,confidence,accuracy,count\n");
        for b in 0..self.num_bins() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                self.bin_edges[b],
                self.bin_edges[b + 1],
                self.bin_confidence[b],
                self.bin_accuracy[b],
                self.bin_count[b]
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn from_csv(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format(origin, "empty reliability csv"))?;
        if header != "bin_lo,bin_hi,confidence,accuracy,count" {
            return Err(Error::format(origin, format!("bad header {header:?}")));
        }
        let mut diagram = ReliabilityDiagram {
            bin_edges: Vec::new(),
            bin_confidence: Vec::new(),
            bin_accuracy: Vec::new(),
            bin_count: Vec::new(),
        };
        for line in lines {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(Error::format(origin, format!("bad row {line:?}")));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse()
                    .map_err(|_| Error::format(origin, format!("bad float {s:?}")))
            };
            let lo = parse(f[0])?;
            if diagram.bin_edges.is_empty() {
                diagram.bin_edges.push(lo);
            }
            diagram.bin_edges.push(parse(f[1])?);
            diagram.bin_confidence.push(parse(f[2])?);
            diagram.bin_accuracy.push(parse(f[3])?);
            diagram.bin_count.push(
                f[4].parse()
                    .map_err(|_| Error::format(origin, format!("bad count {:?}", f[4])))?,
            );
        }
        Ok(diagram)
    }
}

/// Expected calibration error with `num_bins` equal-width bins on [0, 1].
///
/// Confidence is the max probability; samples land in bin
/// `min(floor(conf * bins), bins - 1)`; ECE is the count-weighted mean of
/// `|bin accuracy - bin confidence|`.
pub fn ece(probs: &Tensor, labels: &[usize], num_bins: usize) -> Result<(f64, ReliabilityDiagram)> {
    if num_bins < 1 {
        return Err(Error::validation("num_bins must be >= 1".to_string()));
    }
    if probs.rows() == 0 {
        return Err(Error::validation("ece of empty input".to_string()));
    }
    if labels.len() != probs.rows() {
        return Err(Error::validation(format!(
            "{} probability rows vs {} labels",
            probs.rows(),
            labels.len()
        )));
    }
    let preds = argmax_rows(probs);
    let mut conf_sum = vec![0.0; num_bins];
    let mut correct = vec![0usize; num_bins];
    let mut count = vec![0usize; num_bins];
    for (i, row) in probs.iter_rows().enumerate() {
        validate_distribution(row)?;
        let conf = row[preds[i]];
        let bin = ((conf * num_bins as f64) as usize).min(num_bins - 1);
        conf_sum[bin] += conf;
        count[bin] += 1;
        if preds[i] == labels[i] {
            correct[bin] += 1;
        }
    }
    let total = probs.rows() as f64;
    let mut ece_value = 0.0;
    let mut bin_confidence = vec![0.0; num_bins];
    let mut bin_accuracy = vec![0.0; num_bins];
    for b in 0..num_bins {
        if count[b] == 0 {
            continue;
        }
        bin_confidence[b] = conf_sum[b] / count[b] as f64;
        bin_accuracy[b] = correct[b] as f64 / count[b] as f64;
        ece_value += count[b] as f64 / total * (bin_accuracy[b] - bin_confidence[b]).abs();
    }
    let bin_edges = (0..=num_bins).map(|b| b as f64 / num_bins as f64).collect();
    Ok((
        ece_value,
        ReliabilityDiagram {
            bin_edges,
            bin_confidence,
            bin_accuracy,
            bin_count: count,
        },
    ))
}

/// ROC AUC in the Mann-Whitney form: the probability that a random OOD
/// sample scores above a random in-distribution sample, ties worth 1/2.
pub fn roc_auc(scores: &[f64], is_ood: &[bool]) -> Result<f64> {
    check_scores(scores, is_ood)?;
    let pos = is_ood.iter().filter(|&&o| o).count();
    let neg = is_ood.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::validation(
            "roc_auc needs both classes present".to_string(),
        ));
    }
    // Average ranks over ties, then the rank-sum identity.
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0; // 1-based
        for &idx in &order[i..=j] {
            rank[idx] = avg;
        }
        i = j + 1;
    }
    let pos_rank_sum: f64 = is_ood
        .iter()
        .zip(&rank)
        .filter(|(&o, _)| o)
        .map(|(_, &r)| r)
        .sum();
    let p = pos as f64;
    let n = neg as f64;
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Area under the precision-recall curve for the OOD-positive class, using
/// step-wise interpolation over the sorted unique score thresholds.
pub fn pr_auc(scores: &[f64], is_ood: &[bool]) -> Result<f64> {
    check_scores(scores, is_ood)?;
    let pos = is_ood.iter().filter(|&&o| o).count();
    if pos == 0 {
        return Err(Error::validation(
            "pr_auc needs at least one OOD sample".to_string(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut auc = 0.0;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < order.len() {
        // Consume the whole tie group; precision/recall only move at
        // distinct thresholds.
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if is_ood[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        auc += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(auc)
}

fn check_scores(scores: &[f64], flags: &[bool]) -> Result<()> {
    if scores.is_empty() || scores.len() != flags.len() {
        return Err(Error::validation(format!(
            "scores and flags must be equal nonempty slices, got {} and {}",
            scores.len(),
            flags.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores"));
    }
    Ok(())
}

/// Disagreement fraction between two prediction vectors divided by the
/// error rate `1 - accuracy`. Zero for identical predictions; undefined
/// (an error) at accuracy 1.
pub fn diversity(preds_a: &[usize], preds_b: &[usize], accuracy: f64) -> Result<f64> {
    if preds_a.is_empty() || preds_a.len() != preds_b.len() {
        return Err(Error::validation(format!(
            "diversity needs equal nonempty inputs, got {} and {}",
            preds_a.len(),
            preds_b.len()
        )));
    }
    if accuracy >= 1.0 {
        return Err(Error::validation(
            "diversity undefined at accuracy 1.0 (division by zero error rate)".to_string(),
        ));
    }
    let disagreed =
        preds_a.iter().zip(preds_b).filter(|(a, b)| a != b).count() as f64 / preds_a.len() as f64;
    Ok(disagreed / (1.0 - accuracy))
}

/// One evaluated configuration, as one CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub tag: String,
    pub n: usize,
    pub m: usize,
    pub s: f64,
    pub iou: f64,
    pub accuracy: f64,
    pub ece: f64,
    pub entropy_in: f64,
    pub entropy_out: f64,
    pub roc_auc: f64,
    pub pr_auc: f64,
    pub model_size: usize,
    pub wall_time_s: f64,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str =
        "tag,n,m,s,iou,accuracy,ece,entropy_in,entropy_out,roc_auc,pr_auc,model_size,wall_time_s";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.tag,
            self.n,
            self.m,
            self.s,
            self.iou,
            self.accuracy,
            self.ece,
            self.entropy_in,
            self.entropy_out,
            self.roc_auc,
            self.pr_auc,
            self.model_size,
            self.wall_time_s
        )
    }

    pub fn from_csv_row(row: &str, origin: &str) -> Result<Self> {
        let f: Vec<&str> = row.split(',').collect();
        if f.len() != 13 {
            return Err(Error::format(
                origin,
                format!("expected 13 fields, got {}", f.len()),
            ));
        }
        let float = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::format(origin, format!("bad float {s:?}")))
        };
        let int = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::format(origin, format!("bad integer {s:?}")))
        };
        Ok(MetricsReport {
            tag: f[0].to_string(),
            n: int(f[1])?,
            m: int(f[2])?,
            s: float(f[3])?,
            iou: float(f[4])?,
            accuracy: float(f[5])?,
            ece: float(f[6])?,
            entropy_in: float(f[7])?,
            entropy_out: float(f[8])?,
            roc_auc: float(f[9])?,
            pr_auc: float(f[10])?,
            model_size: int(f[11])?,
            wall_time_s: float(f[12])?,
        })
    }
}
