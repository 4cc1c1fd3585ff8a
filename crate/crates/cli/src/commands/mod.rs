//! Shared plumbing for the experiment subcommands: config-driven dataset
//! and model construction, seed derivation, and the predictor abstraction
//! that unifies single models, mask ensembles, and explicit ensembles.

pub mod eval_cmd;
pub mod masks_cmd;
pub mod sweep_diversity;
pub mod sweep_surface;
pub mod sweep_transition;
pub mod train_cmd;

use std::path::{Path, PathBuf};

use masksembles_core::data::{gen_blobs, gen_two_sinusoids, Dataset};
use masksembles_core::error::{Error, Result};
use masksembles_core::metrics::argmax_rows;
use masksembles_core::model::PredictionSet;
use masksembles_core::rng;
use masksembles_core::tensor::Tensor;
use masksembles_core::{MaskSpec, MasksemblesMlp, TrainConfig};

use crate::config::Config;

// Seed-derivation tags: every consumer of the master seed gets its own
// stream so commands stay reproducible as features are added.
pub const SEED_MASKS: u64 = 1;
pub const SEED_TRAIN_DATA: u64 = 2;
pub const SEED_TEST_DATA: u64 = 3;
pub const SEED_INIT: u64 = 4;
pub const SEED_TRAIN: u64 = 5;
pub const SEED_CELL: u64 = 6;
pub const SEED_MEMBER: u64 = 7;

// Config keys recognized by every command.
pub const GLOBAL_KEYS: &[&str] = &["seed", "out", "config"];
pub const DATA_KEYS: &[&str] = &[
    "dataset",
    "count_per_class",
    "test_count_per_class",
    "noise_sigma",
    "x_lo",
    "x_hi",
    "blob_separation",
    "blob_sigma",
];
pub const TRAIN_KEYS: &[&str] = &["epochs", "batch_size", "lr", "momentum"];
pub const MODEL_KEYS: &[&str] = &["n", "m", "s", "fixed_width", "hidden", "hidden_layers"];
pub const GRID_KEYS: &[&str] = &[
    "grid_x_lo",
    "grid_x_hi",
    "grid_y_lo",
    "grid_y_hi",
    "grid_res_x",
    "grid_res_y",
];

/// Rejects command-line flags no part of the command reads. Keys coming
/// from a config file stay permissive so one file can drive several
/// commands.
pub fn check_flag_keys(flags: &[(String, String)], known: &[&[&str]]) -> Result<()> {
    for (key, _) in flags {
        let recognized = GLOBAL_KEYS.contains(&key.as_str())
            || known.iter().any(|set| set.contains(&key.as_str()));
        if !recognized {
            return Err(Error::validation(format!("unknown flag --{key}")));
        }
    }
    Ok(())
}

pub fn master_seed(cfg: &Config) -> Result<u64> {
    cfg.get_u64("seed", 0)
}

pub fn out_dir(cfg: &Config) -> Result<PathBuf> {
    let dir = PathBuf::from(cfg.get_str("out", "out"));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Training dataset described by the config (`dataset`, counts, noise).
pub fn dataset_from_config(cfg: &Config, default_sigma: f64, seed: u64) -> Result<Dataset> {
    let count = cfg.get_usize("count_per_class", 256)?;
    match cfg.get_str("dataset", "two_sinusoids").as_str() {
        "two_sinusoids" => {
            let sigma = cfg.get_f64("noise_sigma", default_sigma)?;
            let x_lo = cfg.get_f64("x_lo", -5.0)?;
            let x_hi = cfg.get_f64("x_hi", 5.0)?;
            gen_two_sinusoids(count, sigma, (x_lo, x_hi), seed)
        }
        "blobs" => {
            let sep = cfg.get_f64("blob_separation", 2.0)?;
            let sigma = cfg.get_f64("blob_sigma", 0.5)?;
            gen_blobs(count, sep, sigma, seed)
        }
        other => Err(Error::validation(format!(
            "unknown dataset {other:?} (expected two_sinusoids or blobs)"
        ))),
    }
}

/// Test split: same generator, its own seed and count.
pub fn test_dataset_from_config(cfg: &Config, default_sigma: f64, seed: u64) -> Result<Dataset> {
    let mut test_cfg = cfg.clone();
    let count = cfg.get_usize("test_count_per_class", 500)?;
    test_cfg.set("count_per_class", &count.to_string());
    dataset_from_config(&test_cfg, default_sigma, seed)
}

pub fn train_config_from(cfg: &Config, seed: u64) -> Result<TrainConfig> {
    let config = TrainConfig {
        epochs: cfg.get_usize("epochs", 150)?,
        batch_size: cfg.get_usize("batch_size", 32)?,
        learning_rate: cfg.get_f64("lr", 0.05)?,
        momentum: cfg.get_f64("momentum", 0.9)?,
        seed,
    };
    config.validate()?;
    Ok(config)
}

/// Layer widths for a dataset: input features, `hidden_layers` hidden
/// entries (placeholders in widen mode), output classes.
pub fn widths_for(cfg: &Config, data: &Dataset, hidden: usize) -> Result<Vec<usize>> {
    let hidden_layers = cfg.get_usize("hidden_layers", 1)?;
    if hidden_layers < 1 {
        return Err(Error::validation("hidden_layers must be >= 1".to_string()));
    }
    let mut widths = vec![data.num_features()];
    widths.extend(std::iter::repeat_n(hidden, hidden_layers));
    widths.push(data.num_classes().max(2));
    Ok(widths)
}

/// Builds the model the config asks for: widen mode (`n`, `m`, `s`) or
/// fixed-width mode (`fixed_width=true`, `hidden`, `n`, `s`).
pub fn model_from_config(
    cfg: &Config,
    data: &Dataset,
    mask_seed: u64,
    init_seed: u64,
) -> Result<MasksemblesMlp> {
    let n = cfg.get_usize("n", 4)?;
    let s = cfg.get_f64("s", 2.0)?;
    if cfg.get_bool("fixed_width", false)? {
        let hidden = cfg.get_usize("hidden", 100)?;
        let widths = widths_for(cfg, data, hidden)?;
        MasksemblesMlp::build_fixed_width(&widths, n, s, mask_seed, init_seed)
    } else {
        let m = cfg.get_usize("m", 100)?;
        let spec = MaskSpec::new(n, m, s, mask_seed)?;
        let widths = widths_for(cfg, data, m)?;
        MasksemblesMlp::build(&widths, spec, init_seed)
    }
}

/// A trained model family that can answer with a probability mixture.
pub enum Predictor {
    /// One mask-ensemble model (covers the single-model case at N=1, S=1).
    Masked(MasksemblesMlp),
    /// Independently trained members, mixture-averaged.
    Ensemble(Vec<MasksemblesMlp>),
}

impl Predictor {
    pub fn mixture_probs(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Predictor::Masked(model) => Ok(model.predict_ensemble(x)?.mixture().clone()),
            Predictor::Ensemble(members) => {
                let per_member: Vec<Tensor> = members
                    .iter()
                    .map(|m| m.predict_ensemble(x).map(|p| p.mixture().clone()))
                    .collect::<Result<_>>()?;
                Ok(PredictionSet::from_per_mask(per_member)?.mixture().clone())
            }
        }
    }

    /// Predicted labels of each component (mask or member) separately.
    pub fn component_labels(&self, x: &Tensor) -> Result<Vec<Vec<usize>>> {
        match self {
            Predictor::Masked(model) => (0..model.num_masks())
                .map(|k| Ok(argmax_rows(&model.forward(x, k)?)))
                .collect(),
            Predictor::Ensemble(members) => members
                .iter()
                .map(|m| Ok(argmax_rows(m.predict_ensemble(x)?.mixture())))
                .collect(),
        }
    }

    pub fn model_size(&self) -> usize {
        match self {
            Predictor::Masked(model) => model.model_size(),
            Predictor::Ensemble(members) => members.iter().map(|m| m.model_size()).sum(),
        }
    }
}

/// Trains a capacity-`m` single model (one all-ones mask).
pub fn train_single_model(
    cfg: &Config,
    data: &Dataset,
    m: usize,
    mask_seed: u64,
    init_seed: u64,
    train_seed: u64,
) -> Result<MasksemblesMlp> {
    let spec = MaskSpec::new(1, m, 1.0, mask_seed)?;
    let widths = widths_for(cfg, data, m)?;
    let mut model = MasksemblesMlp::build(&widths, spec, init_seed)?;
    model.train(data, &train_config_from(cfg, train_seed)?)?;
    Ok(model)
}

/// Trains the explicit ensemble baseline: `members` independently seeded
/// capacity-`m` single models.
pub fn train_ensemble(
    cfg: &Config,
    data: &Dataset,
    m: usize,
    members: usize,
    master: u64,
) -> Result<Predictor> {
    if members < 2 {
        return Err(Error::validation(
            "ensemble_members must be >= 2".to_string(),
        ));
    }
    let models: Vec<Result<MasksemblesMlp>> = masksembles_core::exec::map_collect(members, |j| {
        train_single_model(
            cfg,
            data,
            m,
            rng::derive_seed(master, &[SEED_MEMBER, j as u64, SEED_MASKS]),
            rng::derive_seed(master, &[SEED_MEMBER, j as u64, SEED_INIT]),
            rng::derive_seed(master, &[SEED_MEMBER, j as u64, SEED_TRAIN]),
        )
    });
    Ok(Predictor::Ensemble(
        models.into_iter().collect::<Result<_>>()?,
    ))
}

pub fn mixture_accuracy(predictor: &Predictor, data: &Dataset) -> Result<f64> {
    let probs = predictor.mixture_probs(&data.features)?;
    masksembles_core::metrics::accuracy(&argmax_rows(&probs), &data.labels)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)?;
    Ok(())
}
