//! Fixed pools of binary masks with controllable overlap.
//!
//! A pool is described by `(N, M, S)`: `N` masks, `M` ones per mask, and a
//! scale `S >= 1` that sets the pre-trim width `W = round(M * S)` and hence
//! how much the masks overlap. `S = 1` gives `N` identical all-ones masks;
//! large `S` gives nearly disjoint masks. Columns that end up zero in every
//! mask can be trimmed away, which is where the expected retained width
//! `M * S * (1 - (1 - 1/S)^N)` and the mean pairwise IoU approximation
//! `1 / (2S - 1)` come from.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::exec;
use crate::rng;

/// Substream tag for mask-row draws.
const ROW_DOMAIN: u64 = 0x4d41_534b;

/// Pool parameters: `n` masks, `m` ones per mask, scale `s`, PRNG seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskSpec {
    n: usize,
    m: usize,
    s: f64,
    seed: u64,
    /// Pre-trim width. `round(m * s)` unless fixed-width construction pinned it.
    pre_trim_width: usize,
}

impl MaskSpec {
    pub fn new(n: usize, m: usize, s: f64, seed: u64) -> Result<Self> {
        if n < 1 {
            return Err(Error::validation(format!("n must be >= 1, got {n}")));
        }
        if m < 1 {
            return Err(Error::validation(format!("m must be >= 1, got {m}")));
        }
        if !s.is_finite() || s < 1.0 {
            return Err(Error::validation(format!("s must be >= 1, got {s}")));
        }
        let w = (m as f64 * s).round() as usize;
        if w < m {
            return Err(Error::validation(format!(
                "pre-trim width {w} is smaller than m = {m}"
            )));
        }
        Ok(MaskSpec {
            n,
            m,
            s,
            seed,
            pre_trim_width: w,
        })
    }

    /// Solves `m` so the pool keeps a host layer of `target_width` units
    /// unchanged: `m = round(target_width / s)` and the pre-trim width is
    /// pinned to `target_width` exactly. Meant to be generated with
    /// `trim = false` so the layer width never moves.
    pub fn for_fixed_width(target_width: usize, n: usize, s: f64, seed: u64) -> Result<Self> {
        if target_width < 1 {
            return Err(Error::validation(format!(
                "target width must be >= 1, got {target_width}"
            )));
        }
        if !s.is_finite() || s < 1.0 {
            return Err(Error::validation(format!("s must be >= 1, got {s}")));
        }
        let m = (target_width as f64 / s).round() as usize;
        if m < 1 {
            return Err(Error::validation(format!(
                "target width {target_width} at scale {s} leaves m = 0"
            )));
        }
        let mut spec = MaskSpec::new(n, m, s, seed)?;
        spec.pre_trim_width = target_width;
        Ok(spec)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Width of each mask before all-zero columns are removed.
    pub fn pre_trim_width(&self) -> usize {
        self.pre_trim_width
    }

    /// Expected retained width after trimming: `M*S*(1 - (1 - 1/S)^N)`.
    pub fn expected_size(&self) -> f64 {
        let (m, s, n) = (self.m as f64, self.s, self.n as f64);
        m * s * (1.0 - (1.0 - 1.0 / s).powf(n))
    }

    /// Fraction of zeros per pre-trim row: `1 - 1/S`.
    pub fn dropout_rate_equivalent(&self) -> f64 {
        1.0 - 1.0 / self.s
    }
}

/// Analytical approximation of the mean pairwise mask IoU: `1 / (2S - 1)`.
pub fn expected_iou(s: f64) -> Result<f64> {
    if !s.is_finite() || s < 1.0 {
        return Err(Error::validation(format!("s must be >= 1, got {s}")));
    }
    Ok(1.0 / (2.0 * s - 1.0))
}

/// A generated pool: `n` binary rows of retained width `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    spec: MaskSpec,
    /// Row-major `n x k` matrix of 0/1 entries.
    rows: Vec<u8>,
    k: usize,
    pre_trim_width: usize,
    dropped: usize,
    trimmed: bool,
}

impl MaskSet {
    /// Builds a set from explicit rows, checking the row-sum and trim invariants.
    pub fn from_rows(spec: MaskSpec, rows: Vec<Vec<u8>>, trimmed: bool) -> Result<Self> {
        if rows.len() != spec.n {
            return Err(Error::validation(format!(
                "expected {} rows, got {}",
                spec.n,
                rows.len()
            )));
        }
        let k = rows.first().map_or(0, Vec::len);
        if k == 0 {
            return Err(Error::validation("mask rows must be nonempty".to_string()));
        }
        let mut flat = Vec::with_capacity(spec.n * k);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::validation(format!(
                    "row {i} has width {}, expected {k}",
                    row.len()
                )));
            }
            let ones = row.iter().map(|&b| b as usize).sum::<usize>();
            if ones != spec.m {
                return Err(Error::validation(format!(
                    "row {i} has {ones} ones, expected m = {}",
                    spec.m
                )));
            }
            if row.iter().any(|&b| b > 1) {
                return Err(Error::validation(format!("row {i} has a non-binary entry")));
            }
            flat.extend_from_slice(row);
        }
        let pre_trim_width = if trimmed { spec.pre_trim_width } else { k };
        if trimmed {
            for col in 0..k {
                if (0..spec.n).all(|r| flat[r * k + col] == 0) {
                    return Err(Error::validation(format!(
                        "trimmed set has an all-zero column at {col}"
                    )));
                }
            }
            if pre_trim_width < k {
                return Err(Error::validation(format!(
                    "retained width {k} exceeds pre-trim width {pre_trim_width}"
                )));
            }
        }
        Ok(MaskSet {
            spec,
            rows: flat,
            k,
            pre_trim_width,
            dropped: pre_trim_width - k,
            trimmed,
        })
    }

    pub fn spec(&self) -> &MaskSpec {
        &self.spec
    }

    /// Retained width (columns per mask).
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn pre_trim_width(&self) -> usize {
        self.pre_trim_width
    }

    /// Number of trimmed columns, `D = W - K`.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn trimmed(&self) -> bool {
        self.trimmed
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.rows[i * self.k..(i + 1) * self.k]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[u8]> {
        self.rows.chunks_exact(self.k)
    }

    /// Mean pairwise intersection-over-union across all unordered row pairs.
    pub fn empirical_mean_iou(&self) -> Result<f64> {
        empirical_mean_iou(self)
    }

    /// Writes the documented text format (see [`MaskSet::read_from`]).
    pub fn write_to(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Text form: line 1 `N M S seed trim`, then one '0'/'1' string per mask.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            self.spec.n, self.spec.m, self.spec.s, self.spec.seed, self.trimmed
        );
        for row in self.iter_rows() {
            for &b in row {
                out.push(if b == 1 { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text, &path.display().to_string())
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format(origin, "empty mask file"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::format(
                origin,
                format!("header needs `N M S seed trim`, got {header:?}"),
            ));
        }
        let n: usize = fields[0]
            .parse()
            .map_err(|_| Error::format(origin, "bad N"))?;
        let m: usize = fields[1]
            .parse()
            .map_err(|_| Error::format(origin, "bad M"))?;
        let s: f64 = fields[2]
            .parse()
            .map_err(|_| Error::format(origin, "bad S"))?;
        let seed: u64 = fields[3]
            .parse()
            .map_err(|_| Error::format(origin, "bad seed"))?;
        let trimmed: bool = fields[4]
            .parse()
            .map_err(|_| Error::format(origin, "bad trim flag"))?;
        let mut rows = Vec::with_capacity(n);
        for line in lines {
            let row: Vec<u8> = line
                .chars()
                .map(|c| match c {
                    '0' => Ok(0u8),
                    '1' => Ok(1u8),
                    other => Err(Error::format(origin, format!("bad mask char {other:?}"))),
                })
                .collect::<Result<_>>()?;
            rows.push(row);
        }
        if rows.len() != n {
            return Err(Error::format(
                origin,
                format!("expected {n} mask rows, found {}", rows.len()),
            ));
        }
        let mut spec = MaskSpec::new(n, m, s, seed)?;
        if !trimmed {
            // Untrimmed rows carry the full width, which may have been pinned.
            spec.pre_trim_width = rows[0].len();
        }
        MaskSet::from_rows(spec, rows, trimmed)
    }
}

/// Draws the pool: each row independently places `m` ones uniformly among
/// the `W` pre-trim positions, from its own seeded substream. With `trim`,
/// columns that are zero in every row are removed (original order kept).
/// Identical `(spec, trim)` always produce an identical set.
pub fn generate_masks(spec: &MaskSpec, trim: bool) -> MaskSet {
    let w = spec.pre_trim_width;
    let n = spec.n;
    let mut rows = vec![0u8; n * w];
    for i in 0..n {
        let mut row_rng = rng::stream(spec.seed, &[ROW_DOMAIN, i as u64]);
        for pos in rng::uniform_subset(&mut row_rng, w, spec.m) {
            rows[i * w + pos] = 1;
        }
    }
    if !trim {
        return MaskSet {
            spec: *spec,
            rows,
            k: w,
            pre_trim_width: w,
            dropped: 0,
            trimmed: false,
        };
    }
    let keep: Vec<usize> = (0..w)
        .filter(|&col| (0..n).any(|r| rows[r * w + col] == 1))
        .collect();
    let k = keep.len();
    let mut kept_rows = vec![0u8; n * k];
    for r in 0..n {
        for (out_col, &col) in keep.iter().enumerate() {
            kept_rows[r * k + out_col] = rows[r * w + col];
        }
    }
    MaskSet {
        spec: *spec,
        rows: kept_rows,
        k,
        pre_trim_width: w,
        dropped: w - k,
        trimmed: true,
    }
}

/// Mean of `|a and b| / |a or b|` over all unordered row pairs.
pub fn empirical_mean_iou(set: &MaskSet) -> Result<f64> {
    let n = set.n();
    if n < 2 {
        return Err(Error::validation(format!(
            "mean IoU needs at least 2 masks, got {n}"
        )));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for a in 0..n {
        for b in (a + 1)..n {
            let (ra, rb) = (set.row(a), set.row(b));
            let mut inter = 0usize;
            let mut union = 0usize;
            for (&x, &y) in ra.iter().zip(rb) {
                inter += (x & y) as usize;
                union += (x | y) as usize;
            }
            total += inter as f64 / union as f64;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Monte Carlo mean and standard error of the retained width `K` over
/// `draws` trimmed pools, re-seeding each draw from the spec seed.
pub fn mc_retained_width(spec: &MaskSpec, draws: usize) -> (f64, f64) {
    let widths = exec::map_collect(draws, |d| {
        let draw_spec = spec.with_seed(rng::derive_seed(spec.seed, &[d as u64]));
        generate_masks(&draw_spec, true).k() as f64
    });
    mean_and_stderr(&widths)
}

/// Mean empirical pairwise IoU over `seeds` independently drawn pools.
pub fn mc_mean_iou(spec: &MaskSpec, seeds: usize) -> f64 {
    let ious = exec::map_collect(seeds, |d| {
        let draw_spec = spec.with_seed(rng::derive_seed(spec.seed, &[d as u64]));
        generate_masks(&draw_spec, true)
            .empirical_mean_iou()
            .expect("n >= 2")
    });
    ious.iter().sum::<f64>() / ious.len() as f64
}

pub(crate) fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
