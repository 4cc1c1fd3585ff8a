//! `sweep-diversity`: diversity versus accuracy for every unordered pair
//! of components, over a fixed-capacity scale grid plus single-model and
//! ensemble baselines. Pair accuracy is the mean of the two components'
//! accuracies; the analytic bound columns are the trivially correct
//! best/worst reference curves (0 and min(2, 1/(1-acc))), not measured
//! values.

use std::fmt::Write as _;

use masksembles_core::data::Dataset;
use masksembles_core::error::Result;
use masksembles_core::exec;
use masksembles_core::metrics::{accuracy, diversity};
use masksembles_core::rng;
use masksembles_core::{MaskSpec, MasksemblesMlp};

use super::{
    dataset_from_config, master_seed, out_dir, test_dataset_from_config, train_config_from,
    train_ensemble, widths_for, Predictor, SEED_CELL, SEED_TEST_DATA, SEED_TRAIN_DATA,
};
use crate::config::Config;

/// Command-line keys this command understands.
pub const KEYS: &[&str] = &["s_values", "n", "m", "ensemble_members", "hidden_layers"];

/// Default noise for this sweep; high enough that trained models stay
/// below accuracy 1.0, where diversity is undefined.
const DIVERSITY_SIGMA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct DiversityRow {
    pub s: String,
    pub pair_id: String,
    pub accuracy: f64,
    pub diversity: f64,
    pub diversity_min: f64,
    pub diversity_max: f64,
}

impl DiversityRow {
    pub const CSV_HEADER: &'static str = "s,pair_id,accuracy,diversity,diversity_min,diversity_max";

    pub fn parse_csv(text: &str, origin: &str) -> Result<Vec<DiversityRow>> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| masksembles_core::Error::format(origin, "empty diversity csv"))?;
        if header != Self::CSV_HEADER {
            return Err(masksembles_core::Error::format(
                origin,
                format!("bad header {header:?}"),
            ));
        }
        lines
            .map(|line| {
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 6 {
                    return Err(masksembles_core::Error::format(
                        origin,
                        format!("bad row {line:?}"),
                    ));
                }
                let float = |raw: &str| -> Result<f64> {
                    raw.parse().map_err(|_| {
                        masksembles_core::Error::format(origin, format!("bad float {raw:?}"))
                    })
                };
                Ok(DiversityRow {
                    s: f[0].to_string(),
                    pair_id: f[1].to_string(),
                    accuracy: float(f[2])?,
                    diversity: float(f[3])?,
                    diversity_min: float(f[4])?,
                    diversity_max: float(f[5])?,
                })
            })
            .collect()
    }
}

pub fn run(cfg: &Config) -> Result<String> {
    let master = master_seed(cfg)?;
    let dir = out_dir(cfg)?;
    let s_values = cfg.get_f64_list("s_values", &[2.0, 3.0, 4.0, 5.0])?;
    let n = cfg.get_usize("n", 4)?;
    let m = cfg.get_usize("m", 100)?;
    let members = cfg.get_usize("ensemble_members", 4)?;

    let train_data = dataset_from_config(
        cfg,
        DIVERSITY_SIGMA,
        rng::derive_seed(master, &[SEED_TRAIN_DATA]),
    )?;
    let test_data = test_dataset_from_config(
        cfg,
        DIVERSITY_SIGMA,
        rng::derive_seed(master, &[SEED_TEST_DATA]),
    )?;

    #[derive(Clone)]
    enum Cell {
        Single,
        Ensemble,
        Scale(f64),
    }
    let mut cells = vec![Cell::Single, Cell::Ensemble];
    cells.extend(s_values.iter().map(|&s| Cell::Scale(s)));

    let cell_rows: Vec<Result<Vec<DiversityRow>>> = exec::map_collect(cells.len(), |idx| {
        let (label, predictor) = match &cells[idx] {
            Cell::Single => (
                "single".to_string(),
                Predictor::Masked(train_masked(
                    cfg,
                    &train_data,
                    1,
                    m,
                    1.0,
                    master,
                    idx as u64,
                )?),
            ),
            Cell::Ensemble => (
                "ensemble".to_string(),
                train_ensemble(cfg, &train_data, m, members, master)?,
            ),
            Cell::Scale(s) => (
                format!("{s}"),
                Predictor::Masked(train_masked(
                    cfg,
                    &train_data,
                    n,
                    m,
                    *s,
                    master,
                    idx as u64,
                )?),
            ),
        };
        pair_rows(&label, &predictor, &test_data)
    });

    let mut csv = String::from(DiversityRow::CSV_HEADER);
    csv.push('\n');
    for rows in cell_rows {
        for row in rows? {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                row.s,
                row.pair_id,
                row.accuracy,
                row.diversity,
                row.diversity_min,
                row.diversity_max
            );
        }
    }
    std::fs::write(dir.join("diversity.csv"), &csv)?;
    Ok(format!("{csv}wrote {}\n", dir.display()))
}

fn train_masked(
    cfg: &Config,
    data: &Dataset,
    n: usize,
    m: usize,
    s: f64,
    master: u64,
    cell: u64,
) -> Result<MasksemblesMlp> {
    let spec = MaskSpec::new(n, m, s, rng::derive_seed(master, &[SEED_CELL, cell, 0]))?;
    let widths = widths_for(cfg, data, m)?;
    let mut model = MasksemblesMlp::build(
        &widths,
        spec,
        rng::derive_seed(master, &[SEED_CELL, cell, 1]),
    )?;
    model.train(
        data,
        &train_config_from(cfg, rng::derive_seed(master, &[SEED_CELL, cell, 2]))?,
    )?;
    Ok(model)
}

fn pair_rows(label: &str, predictor: &Predictor, test: &Dataset) -> Result<Vec<DiversityRow>> {
    let component_preds = predictor.component_labels(&test.features)?;
    let accs: Vec<f64> = component_preds
        .iter()
        .map(|p| accuracy(p, &test.labels))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    if component_preds.len() == 1 {
        // A lone model never disagrees with itself: diversity 0 by definition.
        rows.push(DiversityRow {
            s: label.to_string(),
            pair_id: "0-0".to_string(),
            accuracy: accs[0],
            diversity: 0.0,
            diversity_min: 0.0,
            diversity_max: bound_max(accs[0]),
        });
        return Ok(rows);
    }
    for a in 0..component_preds.len() {
        for b in (a + 1)..component_preds.len() {
            let pair_acc = (accs[a] + accs[b]) / 2.0;
            let value = diversity(&component_preds[a], &component_preds[b], pair_acc)?;
            rows.push(DiversityRow {
                s: label.to_string(),
                pair_id: format!("{a}-{b}"),
                accuracy: pair_acc,
                diversity: value,
                diversity_min: 0.0,
                diversity_max: bound_max(pair_acc),
            });
        }
    }
    Ok(rows)
}

/// Disagreement can exceed neither 1 nor twice the error rate.
fn bound_max(acc: f64) -> f64 {
    (1.0 / (1.0 - acc)).min(2.0)
}
