//! `masks`: generate a pool, write the mask file, print its properties.

use std::path::PathBuf;

use masksembles_core::error::Result;
use masksembles_core::masks::{expected_iou, generate_masks};
use masksembles_core::MaskSpec;

use crate::config::Config;

/// Command-line keys this command understands.
pub const KEYS: &[&str] = &["n", "m", "s", "trim"];

pub fn run(cfg: &Config) -> Result<String> {
    let n = cfg.get_usize("n", 4)?;
    let m = cfg.get_usize("m", 2)?;
    let s = cfg.get_f64("s", 2.0)?;
    let seed = cfg.get_u64("seed", 0)?;
    let trim = cfg.get_bool("trim", true)?;
    let out = PathBuf::from(cfg.get_str("out", "masks.txt"));

    let spec = MaskSpec::new(n, m, s, seed)?;
    let set = generate_masks(&spec, trim);
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    set.write_to(&out)?;

    // Single-mask pools report IoU 1 (fully overlapping with itself).
    let empirical = if n >= 2 {
        set.empirical_mean_iou()?
    } else {
        1.0
    };
    let mut summary = String::new();
    summary.push_str(&format!("wrote {}\n", out.display()));
    summary.push_str(&format!("k {}\n", set.k()));
    summary.push_str(&format!("d {}\n", set.dropped()));
    summary.push_str(&format!("empirical_iou {empirical}\n"));
    summary.push_str(&format!("expected_iou {}\n", expected_iou(s)?));
    summary.push_str(&format!("expected_size {}\n", spec.expected_size()));
    summary.push_str(&format!(
        "dropout_rate {}\n",
        spec.dropout_rate_equivalent()
    ));
    Ok(summary)
}
