//! `eval`: score a checkpoint on an in-distribution CSV and an OOD CSV,
//! writing the metrics report row, the reliability diagram, and the raw
//! per-sample OOD scores.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use masksembles_core::data::Dataset;
use masksembles_core::error::{Error, Result};
use masksembles_core::metrics::{
    accuracy, argmax_rows, ece, entropy, mean_entropy, pr_auc, roc_auc, MetricsReport,
};
use masksembles_core::tensor::Tensor;
use masksembles_core::MasksemblesMlp;

use super::{master_seed, out_dir};
use crate::config::Config;

/// OOD score of one mixture row; higher means more out-of-distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    /// Predictive entropy of the mixture (the default).
    Entropy,
    /// One minus the max probability.
    MaxProb,
}

impl ScoreKind {
    pub fn parse(raw: &str) -> Result<Self> {
        match raw {
            "entropy" => Ok(ScoreKind::Entropy),
            "maxprob" => Ok(ScoreKind::MaxProb),
            other => Err(Error::validation(format!(
                "score must be entropy or maxprob, got {other:?}"
            ))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ScoreKind::Entropy => "entropy",
            ScoreKind::MaxProb => "maxprob",
        }
    }

    pub fn score_rows(&self, probs: &Tensor) -> Result<Vec<f64>> {
        probs
            .iter_rows()
            .map(|row| match self {
                ScoreKind::Entropy => entropy(row),
                ScoreKind::MaxProb => {
                    Ok(1.0 - row.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
                }
            })
            .collect()
    }
}

/// Command-line keys this command understands.
pub const KEYS: &[&str] = &["checkpoint", "data", "ood", "bins", "score", "tag", "timing"];

pub fn run(cfg: &Config) -> Result<String> {
    let dir = out_dir(cfg)?;
    let _ = master_seed(cfg)?; // eval draws nothing, but validate the flag
    let default_ckpt = dir.join("model.ckpt");
    let default_data = dir.join("test_data.csv");
    let default_ood = dir.join("ood_data.csv");
    let checkpoint = PathBuf::from(cfg.get_str("checkpoint", &default_ckpt.to_string_lossy()));
    let data_path = PathBuf::from(cfg.get_str("data", &default_data.to_string_lossy()));
    let ood_path = PathBuf::from(cfg.get_str("ood", &default_ood.to_string_lossy()));
    let bins = cfg.get_usize("bins", 15)?;
    let score = ScoreKind::parse(&cfg.get_str("score", "entropy"))?;
    let tag = cfg.get_str("tag", "eval");
    if tag.contains(',') || tag.contains('\n') {
        return Err(Error::validation(
            "tag must not contain commas or newlines".to_string(),
        ));
    }
    let timing = cfg.get_bool("timing", false)?;

    let started = Instant::now();
    let model = MasksemblesMlp::load(&checkpoint)?;
    let data = Dataset::read_csv(&data_path)?;
    let ood = Dataset::read_csv(&ood_path)?;

    let outcome = evaluate_model(&model, &data, &ood, bins, score, &tag)?;
    let mut report = outcome.report;
    if timing {
        report.wall_time_s = started.elapsed().as_secs_f64();
    }

    let mut report_csv = String::from(MetricsReport::CSV_HEADER);
    report_csv.push('\n');
    report_csv.push_str(&report.to_csv_row());
    report_csv.push('\n');
    std::fs::write(dir.join("report.csv"), &report_csv)?;
    outcome.diagram.write_csv(&dir.join("reliability.csv"))?;

    let mut scores_csv = String::from("score,is_ood\n");
    for (s, is_ood) in &outcome.scores {
        let _ = writeln!(scores_csv, "{s},{}", u8::from(*is_ood));
    }
    std::fs::write(dir.join("scores.csv"), scores_csv)?;

    Ok(format!(
        "{}\n{}\nwrote {}\n",
        MetricsReport::CSV_HEADER,
        report.to_csv_row(),
        dir.display()
    ))
}

pub struct EvalOutcome {
    pub report: MetricsReport,
    pub diagram: masksembles_core::metrics::ReliabilityDiagram,
    pub scores: Vec<(f64, bool)>,
}

/// Mixture-based evaluation: accuracy/ECE/entropy on `data`, OOD detection
/// of `ood` against `data` by the chosen score.
pub fn evaluate_model(
    model: &MasksemblesMlp,
    data: &Dataset,
    ood: &Dataset,
    bins: usize,
    score: ScoreKind,
    tag: &str,
) -> Result<EvalOutcome> {
    let in_probs = model.predict_ensemble(&data.features)?.mixture().clone();
    let ood_probs = model.predict_ensemble(&ood.features)?.mixture().clone();

    let preds = argmax_rows(&in_probs);
    let acc = accuracy(&preds, &data.labels)?;
    let (ece_value, diagram) = ece(&in_probs, &data.labels, bins)?;

    let mut scores: Vec<(f64, bool)> = Vec::with_capacity(data.len() + ood.len());
    for s in score.score_rows(&in_probs)? {
        scores.push((s, false));
    }
    for s in score.score_rows(&ood_probs)? {
        scores.push((s, true));
    }
    let flat_scores: Vec<f64> = scores.iter().map(|(s, _)| *s).collect();
    let flags: Vec<bool> = scores.iter().map(|(_, o)| *o).collect();

    let spec = model.mask_set().spec();
    let iou = if model.num_masks() >= 2 {
        model.mask_set().empirical_mean_iou()?
    } else {
        1.0
    };
    let report = MetricsReport {
        tag: format!("{tag}:{}", score.label()),
        n: spec.n(),
        m: spec.m(),
        s: spec.s(),
        iou,
        accuracy: acc,
        ece: ece_value,
        entropy_in: mean_entropy(&in_probs)?,
        entropy_out: mean_entropy(&ood_probs)?,
        roc_auc: roc_auc(&flat_scores, &flags)?,
        pr_auc: pr_auc(&flat_scores, &flags)?,
        model_size: model.model_size(),
        wall_time_s: 0.0,
    };
    Ok(EvalOutcome {
        report,
        diagram,
        scores,
    })
}
