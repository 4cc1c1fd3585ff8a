//! `sweep-surface`: model size and mask IoU as functions of N and S with
//! M fixed. No training; each grid cell draws pools, builds the widened
//! toy model, and reports empirical values next to the closed forms,
//! everything normalized to the N=1, S=1 model.

use masksembles_core::error::Result;
use masksembles_core::exec;
use masksembles_core::masks::{expected_iou, generate_masks};
use masksembles_core::rng;
use masksembles_core::{MaskSpec, MasksemblesMlp};

use super::{master_seed, out_dir, SEED_CELL};
use crate::config::Config;

/// Command-line keys this command understands.
pub const KEYS: &[&str] = &["n_values", "s_values", "m", "iou_seeds"];

pub fn run(cfg: &Config) -> Result<String> {
    let master = master_seed(cfg)?;
    let dir = out_dir(cfg)?;
    let n_values = cfg.get_usize_list("n_values", &[1, 2, 4, 8])?;
    let s_values = cfg.get_f64_list("s_values", &[1.0, 1.5, 2.0, 3.0, 4.0, 6.0])?;
    let m = cfg.get_usize("m", 128)?;
    let draws = cfg.get_usize("iou_seeds", 20)?;
    if n_values.is_empty() || s_values.is_empty() || draws == 0 {
        return Err(masksembles_core::Error::validation(
            "n_values, s_values and iou_seeds must be nonempty".to_string(),
        ));
    }

    // The 1x reference: at N=1, S=1 the retained width is exactly M.
    let baseline_spec = MaskSpec::new(1, m, 1.0, 0)?;
    let baseline_size =
        MasksemblesMlp::with_mask_set(&[2, m, 2], generate_masks(&baseline_spec, true), 0)?
            .model_size();

    let cells: Vec<(usize, f64)> = n_values
        .iter()
        .flat_map(|&n| s_values.iter().map(move |&s| (n, s)))
        .collect();

    let rows: Vec<Result<String>> = exec::map_collect(cells.len(), |idx| {
        let (n, s) = cells[idx];
        let spec = MaskSpec::new(n, m, s, 0)?;
        let mut size_sum = 0.0;
        let mut iou_sum = 0.0;
        for d in 0..draws {
            let seed = rng::derive_seed(master, &[SEED_CELL, idx as u64, d as u64]);
            let set = generate_masks(&spec.with_seed(seed), true);
            // Single-mask pools count as fully overlapping.
            iou_sum += if n >= 2 {
                set.empirical_mean_iou()?
            } else {
                1.0
            };
            let model = MasksemblesMlp::with_mask_set(&[2, m, 2], set, 0)?;
            size_sum += model.model_size() as f64;
        }
        let relative_size = size_sum / draws as f64 / baseline_size as f64;
        let empirical_iou = iou_sum / draws as f64;
        // Closed forms, normalized the same way (the expected size at
        // S=1, N=1 is exactly M).
        let analytical_size = spec.expected_size() / m as f64;
        let analytical_iou = expected_iou(s)?;
        Ok(format!(
            "{n},{s},{relative_size},{analytical_size},{empirical_iou},{analytical_iou}\n"
        ))
    });

    let mut csv = String::from("n,s,relative_size,analytical_size,empirical_iou,analytical_iou\n");
    for row in rows {
        csv.push_str(&row?);
    }
    std::fs::write(dir.join("surface.csv"), &csv)?;
    Ok(format!("{csv}wrote {}\n", dir.display()))
}

/// Parsed row of `surface.csv`, for sweep consumers.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceRow {
    pub n: usize,
    pub s: f64,
    pub relative_size: f64,
    pub analytical_size: f64,
    pub empirical_iou: f64,
    pub analytical_iou: f64,
}

impl SurfaceRow {
    pub fn parse_csv(text: &str, origin: &str) -> Result<Vec<SurfaceRow>> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| masksembles_core::Error::format(origin, "empty surface csv"))?;
        if header != "n,s,relative_size,analytical_size,empirical_iou,analytical_iou" {
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
                Ok(SurfaceRow {
                    n: f[0].parse().map_err(|_| {
                        masksembles_core::Error::format(origin, format!("bad n {:?}", f[0]))
                    })?,
                    s: float(f[1])?,
                    relative_size: float(f[2])?,
                    analytical_size: float(f[3])?,
                    empirical_iou: float(f[4])?,
                    analytical_iou: float(f[5])?,
                })
            })
            .collect()
    }
}
