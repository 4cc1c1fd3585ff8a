//! `sweep-transition`: the single-model-to-ensemble transition on the
//! two-sinusoid task. Trains one mask-ensemble model per scale value plus
//! a single-model and an explicit-ensemble baseline (all with the same
//! per-pass capacity), then maps predictive entropy over an evaluation
//! grid that extends beyond the training range.

use std::fmt::Write as _;

use masksembles_core::data::gen_ood_grid;
use masksembles_core::error::Result;
use masksembles_core::exec;
use masksembles_core::metrics::entropy;
use masksembles_core::rng;
use masksembles_core::{MaskSpec, MasksemblesMlp};

use super::{
    dataset_from_config, master_seed, mixture_accuracy, out_dir, test_dataset_from_config,
    train_config_from, train_ensemble, widths_for, Predictor, SEED_CELL, SEED_TEST_DATA,
    SEED_TRAIN_DATA,
};
use crate::config::Config;

/// Command-line keys this command understands.
pub const KEYS: &[&str] = &["s_values", "n", "m", "ensemble_members", "hidden_layers"];

#[derive(Debug, Clone)]
enum Cell {
    Single,
    Ensemble,
    Scale(f64),
}

impl Cell {
    fn label(&self) -> String {
        match self {
            Cell::Single => "single".to_string(),
            Cell::Ensemble => "ensemble".to_string(),
            Cell::Scale(s) => format!("{s}"),
        }
    }
}

struct CellOutcome {
    label: String,
    accuracy: f64,
    mean_entropy_in: f64,
    mean_entropy_ood: f64,
    model_size: usize,
    grid_csv: String,
}

pub fn run(cfg: &Config) -> Result<String> {
    let master = master_seed(cfg)?;
    let dir = out_dir(cfg)?;
    let s_values = cfg.get_f64_list("s_values", &[1.1, 2.0, 3.0, 10.0])?;
    let n = cfg.get_usize("n", 4)?;
    let m = cfg.get_usize("m", 100)?;
    let members = cfg.get_usize("ensemble_members", 4)?;

    let x_lo = cfg.get_f64("x_lo", -5.0)?;
    let x_hi = cfg.get_f64("x_hi", 5.0)?;
    let grid = gen_ood_grid(
        (
            cfg.get_f64("grid_x_lo", -10.0)?,
            cfg.get_f64("grid_x_hi", 10.0)?,
        ),
        (
            cfg.get_f64("grid_y_lo", -4.0)?,
            cfg.get_f64("grid_y_hi", 4.0)?,
        ),
        (
            cfg.get_usize("grid_res_x", 61)?,
            cfg.get_usize("grid_res_y", 31)?,
        ),
        (x_lo, x_hi),
    )?;

    let train_data = dataset_from_config(cfg, 0.3, rng::derive_seed(master, &[SEED_TRAIN_DATA]))?;
    let test_data =
        test_dataset_from_config(cfg, 0.3, rng::derive_seed(master, &[SEED_TEST_DATA]))?;

    let mut cells = vec![Cell::Single, Cell::Ensemble];
    cells.extend(s_values.iter().map(|&s| Cell::Scale(s)));

    let outcomes: Vec<Result<CellOutcome>> = exec::map_collect(cells.len(), |idx| {
        let cell = &cells[idx];
        let predictor = match cell {
            Cell::Single => Predictor::Masked(train_cell_model(
                cfg,
                &train_data,
                1,
                m,
                1.0,
                master,
                idx as u64,
            )?),
            Cell::Ensemble => train_ensemble(cfg, &train_data, m, members, master)?,
            Cell::Scale(s) => Predictor::Masked(train_cell_model(
                cfg,
                &train_data,
                n,
                m,
                *s,
                master,
                idx as u64,
            )?),
        };
        let accuracy = mixture_accuracy(&predictor, &test_data)?;
        let grid_probs = predictor.mixture_probs(&grid.features)?;

        let mut grid_csv = String::from("x0,x1,in_distribution,entropy\n");
        let mut sum_in = 0.0;
        let mut count_in = 0usize;
        let mut sum_ood = 0.0;
        let mut count_ood = 0usize;
        for (i, row) in grid_probs.iter_rows().enumerate() {
            let h = entropy(row)?;
            let flag = grid.labels[i];
            if flag == 1 {
                sum_in += h;
                count_in += 1;
            } else {
                sum_ood += h;
                count_ood += 1;
            }
            let point = grid.features.row(i);
            let _ = writeln!(grid_csv, "{},{},{flag},{h}", point[0], point[1]);
        }
        Ok(CellOutcome {
            label: cell.label(),
            accuracy,
            mean_entropy_in: sum_in / count_in.max(1) as f64,
            mean_entropy_ood: sum_ood / count_ood.max(1) as f64,
            model_size: predictor.model_size(),
            grid_csv,
        })
    });
    let outcomes: Vec<CellOutcome> = outcomes.into_iter().collect::<Result<_>>()?;

    let mut summary = String::from("s,accuracy,mean_entropy_in,mean_entropy_ood,model_size\n");
    for outcome in &outcomes {
        let _ = writeln!(
            summary,
            "{},{},{},{},{}",
            outcome.label,
            outcome.accuracy,
            outcome.mean_entropy_in,
            outcome.mean_entropy_ood,
            outcome.model_size
        );
        std::fs::write(
            dir.join(format!("entropy_{}.csv", outcome.label)),
            &outcome.grid_csv,
        )?;
    }
    std::fs::write(dir.join("transition_summary.csv"), &summary)?;
    Ok(format!("{summary}wrote {}\n", dir.display()))
}

fn train_cell_model(
    cfg: &Config,
    data: &masksembles_core::data::Dataset,
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
    let train_config = train_config_from(cfg, rng::derive_seed(master, &[SEED_CELL, cell, 2]))?;
    model.train(data, &train_config)?;
    Ok(model)
}
