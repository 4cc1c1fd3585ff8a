//! Synthetic datasets for the toy experiments: two noisy sinusoid classes,
//! Gaussian blob sanity sets, evaluation grids with an in-distribution band,
//! and severity-scaled additive-noise corruption.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

/// Vertical offsets of the two sinusoid classes.
pub const SINUSOID_OFFSETS: (f64, f64) = (1.0, -1.0);

/// Default noise level for the sinusoid task.
pub const SINUSOID_DEFAULT_SIGMA: f64 = 0.3;

/// Default training range on the x axis.
pub const SINUSOID_DEFAULT_X_RANGE: (f64, f64) = (-5.0, 5.0);

/// Corruption base sigma as a fraction of each feature's standard deviation.
pub const CORRUPT_BASE_FRACTION: f64 = 0.2;

const DATA_DOMAIN: u64 = 0x4441_5441;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub generator: String,
    pub params: String,
    pub seed: u64,
}

/// Feature matrix plus integer labels. Grid datasets store the
/// in-distribution flag (1 = inside the training band) in `labels`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Tensor,
    pub labels: Vec<usize>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m + 1)
    }

    /// Rows selected by index, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let cols = self.num_features();
        let mut data = Vec::with_capacity(indices.len() * cols);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.features.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features: Tensor::new(indices.len(), cols, data),
            labels,
            meta: self.meta.clone(),
        }
    }

    /// `x0,...,xF-1,label` with full-precision (shortest round-trip) floats.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let cols = self.num_features();
        for j in 0..cols {
            let _ = write!(out, "x{j},");
        }
        out.push_str("label\n");
        for (row, &label) in self.features.iter_rows().zip(&self.labels) {
            for v in row {
                let _ = write!(out, "{v},");
            }
            let _ = writeln!(out, "{label}");
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Dataset> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format(&origin, "empty dataset file"))?;
        let cols = header.split(',').count() - 1;
        if cols == 0 {
            return Err(Error::format(&origin, "no feature columns"));
        }
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols + 1 {
                return Err(Error::format(
                    &origin,
                    format!("line {}: expected {} fields", lineno + 2, cols + 1),
                ));
            }
            for f in &fields[..cols] {
                let v: f64 = f
                    .parse()
                    .map_err(|_| Error::format(&origin, format!("bad float {f:?}")))?;
                data.push(v);
            }
            let label: usize = fields[cols]
                .parse()
                .map_err(|_| Error::format(&origin, format!("bad label {:?}", fields[cols])))?;
            labels.push(label);
        }
        let rows = labels.len();
        Ok(Dataset {
            features: Tensor::new(rows, cols, data),
            labels,
            meta: DatasetMeta {
                generator: "csv".to_string(),
                params: origin,
                seed: 0,
            },
        })
    }
}

/// Two classes on `y = sin(x) + offset + noise`, x uniform over `x_range`,
/// offsets `+1`/`-1`. Classes are exactly balanced: `count_per_class` each,
/// class 0 rows first.
pub fn gen_two_sinusoids(
    count_per_class: usize,
    noise_sigma: f64,
    x_range: (f64, f64),
    seed: u64,
) -> Result<Dataset> {
    if count_per_class < 1 {
        return Err(Error::validation(
            "count_per_class must be >= 1".to_string(),
        ));
    }
    if noise_sigma < 0.0 {
        return Err(Error::validation(format!(
            "noise_sigma must be >= 0, got {noise_sigma}"
        )));
    }
    if x_range.0 >= x_range.1 {
        return Err(Error::validation(format!(
            "empty x range [{}, {}]",
            x_range.0, x_range.1
        )));
    }
    let mut r = rng::stream(seed, &[DATA_DOMAIN, 1]);
    let mut data = Vec::with_capacity(count_per_class * 4);
    let mut labels = Vec::with_capacity(count_per_class * 2);
    for (class, offset) in [SINUSOID_OFFSETS.0, SINUSOID_OFFSETS.1].iter().enumerate() {
        for _ in 0..count_per_class {
            let x = uniform_in(&mut r, x_range);
            let y = x.sin() + offset + noise_sigma * rng::standard_normal(&mut r);
            data.extend_from_slice(&[x, y]);
            labels.push(class);
        }
    }
    Ok(Dataset {
        features: Tensor::new(count_per_class * 2, 2, data),
        labels,
        meta: DatasetMeta {
            generator: "two_sinusoids".to_string(),
            params: format!(
                "count_per_class={count_per_class} sigma={noise_sigma} x=[{},{}]",
                x_range.0, x_range.1
            ),
            seed,
        },
    })
}

/// Two isotropic Gaussian blobs centered at `(-separation, 0)` and
/// `(+separation, 0)`.
pub fn gen_blobs(
    count_per_class: usize,
    separation: f64,
    sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    if count_per_class < 1 {
        return Err(Error::validation(
            "count_per_class must be >= 1".to_string(),
        ));
    }
    if sigma < 0.0 || separation <= 0.0 {
        return Err(Error::validation(
            "separation must be > 0 and sigma >= 0".to_string(),
        ));
    }
    let mut r = rng::stream(seed, &[DATA_DOMAIN, 2]);
    let mut data = Vec::with_capacity(count_per_class * 4);
    let mut labels = Vec::with_capacity(count_per_class * 2);
    for class in 0..2usize {
        let cx = if class == 0 { -separation } else { separation };
        for _ in 0..count_per_class {
            data.push(cx + sigma * rng::standard_normal(&mut r));
            data.push(sigma * rng::standard_normal(&mut r));
            labels.push(class);
        }
    }
    Ok(Dataset {
        features: Tensor::new(count_per_class * 2, 2, data),
        labels,
        meta: DatasetMeta {
            generator: "blobs".to_string(),
            params: format!("count_per_class={count_per_class} sep={separation} sigma={sigma}"),
            seed,
        },
    })
}

/// Uniform random points over the `x_range x y_range` box, labels all 0.
/// The OOD probe set: a "different dataset" sharing the feature space.
pub fn gen_uniform_box(
    count: usize,
    x_range: (f64, f64),
    y_range: (f64, f64),
    seed: u64,
) -> Result<Dataset> {
    if count < 1 {
        return Err(Error::validation("count must be >= 1".to_string()));
    }
    if x_range.0 >= x_range.1 || y_range.0 >= y_range.1 {
        return Err(Error::validation("degenerate box range".to_string()));
    }
    let mut r = rng::stream(seed, &[DATA_DOMAIN, 4]);
    let mut data = Vec::with_capacity(count * 2);
    for _ in 0..count {
        data.push(uniform_in(&mut r, x_range));
        data.push(uniform_in(&mut r, y_range));
    }
    Ok(Dataset {
        features: Tensor::new(count, 2, data),
        labels: vec![0; count],
        meta: DatasetMeta {
            generator: "uniform_box".to_string(),
            params: format!(
                "count={count} x=[{},{}] y=[{},{}]",
                x_range.0, x_range.1, y_range.0, y_range.1
            ),
            seed,
        },
    })
}

/// Regular `resolution.0 x resolution.1` grid over `x_range x y_range`
/// (endpoints included). The label column flags points whose x lies inside
/// `in_dist_x` with 1, everything else with 0.
pub fn gen_ood_grid(
    x_range: (f64, f64),
    y_range: (f64, f64),
    resolution: (usize, usize),
    in_dist_x: (f64, f64),
) -> Result<Dataset> {
    if resolution.0 < 2 || resolution.1 < 2 {
        return Err(Error::validation(format!(
            "resolution must be >= 2 per axis, got {}x{}",
            resolution.0, resolution.1
        )));
    }
    if x_range.0 >= x_range.1 || y_range.0 >= y_range.1 {
        return Err(Error::validation("degenerate grid range".to_string()));
    }
    let (nx, ny) = resolution;
    let mut data = Vec::with_capacity(nx * ny * 2);
    let mut labels = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        let y = y_range.0 + (y_range.1 - y_range.0) * iy as f64 / (ny - 1) as f64;
        for ix in 0..nx {
            let x = x_range.0 + (x_range.1 - x_range.0) * ix as f64 / (nx - 1) as f64;
            data.extend_from_slice(&[x, y]);
            labels.push(usize::from(x >= in_dist_x.0 && x <= in_dist_x.1));
        }
    }
    Ok(Dataset {
        features: Tensor::new(nx * ny, 2, data),
        labels,
        meta: DatasetMeta {
            generator: "ood_grid".to_string(),
            params: format!(
                "x=[{},{}] y=[{},{}] res={nx}x{ny} band=[{},{}]",
                x_range.0, x_range.1, y_range.0, y_range.1, in_dist_x.0, in_dist_x.1
            ),
            seed: 0,
        },
    })
}

/// Adds i.i.d. Gaussian noise with per-feature sigma
/// `severity * 0.2 * std(feature)`. Severity 0 returns a bit-identical copy;
/// labels are never touched.
pub fn corrupt_gaussian(dataset: &Dataset, severity: u8, seed: u64) -> Result<Dataset> {
    if severity > 5 {
        return Err(Error::validation(format!(
            "severity must be in [0, 5], got {severity}"
        )));
    }
    let mut out = dataset.clone();
    out.meta.generator = format!("{}+corrupt", dataset.meta.generator);
    out.meta.params = format!("{} severity={severity}", dataset.meta.params);
    if severity == 0 {
        return Ok(out);
    }
    let stds = feature_stds(&dataset.features);
    let mut r = rng::stream(seed, &[DATA_DOMAIN, 3]);
    for row in 0..out.features.rows() {
        for (col, &std) in stds.iter().enumerate() {
            let sigma = severity as f64 * CORRUPT_BASE_FRACTION * std;
            let v = out.features.get(row, col) + sigma * rng::standard_normal(&mut r);
            out.features.set(row, col, v);
        }
    }
    Ok(out)
}

fn feature_stds(features: &Tensor) -> Vec<f64> {
    let (rows, cols) = features.shape();
    let mut means = vec![0.0; cols];
    for row in features.iter_rows() {
        for (m, &v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= rows as f64;
    }
    let mut vars = vec![0.0; cols];
    for row in features.iter_rows() {
        for ((var, &m), &v) in vars.iter_mut().zip(&means).zip(row) {
            *var += (v - m) * (v - m);
        }
    }
    vars.iter().map(|v| (v / rows as f64).sqrt()).collect()
}

fn uniform_in(r: &mut rand_chacha::ChaCha8Rng, range: (f64, f64)) -> f64 {
    use rand::Rng;
    range.0 + (range.1 - range.0) * r.random::<f64>()
}
