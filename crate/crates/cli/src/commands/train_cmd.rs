//! `train`: build the configured model, fit it, write the checkpoint, the
//! per-epoch loss history, and the train/test/OOD dataset CSVs that `eval`
//! consumes.

use std::fmt::Write as _;

use masksembles_core::data::{corrupt_gaussian, gen_uniform_box, Dataset};
use masksembles_core::error::Result;
use masksembles_core::rng;

use super::{
    dataset_from_config, master_seed, model_from_config, out_dir, test_dataset_from_config,
    train_config_from, SEED_INIT, SEED_MASKS, SEED_TEST_DATA, SEED_TRAIN, SEED_TRAIN_DATA,
};
use crate::config::Config;

/// Command-line keys this command understands.
pub const KEYS: &[&str] = &["ood_severity"];

/// Seed tag for the OOD dataset draw.
const SEED_OOD: u64 = 8;

/// OOD split for `eval`: for sinusoid data, uniform samples over the
/// extended evaluation box (a different dataset sharing the feature
/// space); for blob data, a heavily corrupted copy of the test set.
fn ood_dataset(cfg: &Config, test: &Dataset, seed: u64) -> Result<Dataset> {
    match cfg.get_str("dataset", "two_sinusoids").as_str() {
        "two_sinusoids" => {
            let count = 2 * cfg.get_usize("test_count_per_class", 500)?;
            gen_uniform_box(
                count,
                (
                    cfg.get_f64("grid_x_lo", -10.0)?,
                    cfg.get_f64("grid_x_hi", 10.0)?,
                ),
                (
                    cfg.get_f64("grid_y_lo", -4.0)?,
                    cfg.get_f64("grid_y_hi", 4.0)?,
                ),
                seed,
            )
        }
        _ => {
            let severity = cfg.get_usize("ood_severity", 4)? as u8;
            corrupt_gaussian(test, severity, seed)
        }
    }
}

pub fn run(cfg: &Config) -> Result<String> {
    let master = master_seed(cfg)?;
    let dir = out_dir(cfg)?;

    let data = dataset_from_config(cfg, 0.3, rng::derive_seed(master, &[SEED_TRAIN_DATA]))?;
    let test = test_dataset_from_config(cfg, 0.3, rng::derive_seed(master, &[SEED_TEST_DATA]))?;
    let ood = ood_dataset(cfg, &test, rng::derive_seed(master, &[SEED_OOD]))?;

    let mut model = model_from_config(
        cfg,
        &data,
        rng::derive_seed(master, &[SEED_MASKS]),
        rng::derive_seed(master, &[SEED_INIT]),
    )?;
    let train_config = train_config_from(cfg, rng::derive_seed(master, &[SEED_TRAIN]))?;
    let report = model.train(&data, &train_config)?;

    let ckpt = dir.join("model.ckpt");
    model.save(&ckpt)?;
    data.write_csv(&dir.join("train_data.csv"))?;
    test.write_csv(&dir.join("test_data.csv"))?;
    ood.write_csv(&dir.join("ood_data.csv"))?;

    let mut history = String::from("epoch,loss\n");
    for (epoch, loss) in report.epoch_loss.iter().enumerate() {
        let _ = writeln!(history, "{epoch},{loss}");
    }
    std::fs::write(dir.join("loss_history.csv"), history)?;

    let final_loss = report.epoch_loss.last().copied().unwrap_or(f64::NAN);
    Ok(format!(
        "trained {} epochs on {} samples\nfinal_loss {final_loss}\nwrote {}\n",
        train_config.epochs,
        data.len(),
        ckpt.display()
    ))
}
