//! MLP classifier with mask-ensemble layers.
//!
//! One fixed mask pool is applied after every hidden layer's activation,
//! indexed by the same mask per sample. Training picks a uniformly random
//! mask per sample and groups each batch into per-mask sub-batches, which
//! is mathematically identical to per-sample masking. Inference runs one
//! forward pass per mask and averages the probabilities.

use std::fmt::Write as _;
use std::path::Path;

use crate::autodiff::Tape;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exec;
use crate::masks::{generate_masks, MaskSet, MaskSpec};
use crate::rng;
use crate::tensor::Tensor;

/// Substream tags; public so external reimplementations (oracles, tools)
/// can reproduce the exact draw sequences.
pub const INIT_DOMAIN: u64 = 0x494e_4954;
pub const SHUFFLE_DOMAIN: u64 = 0x5348_5546;
pub const ASSIGN_DOMAIN: u64 = 0x4153_4753;

/// Weight matrix (`in x out`) and bias row (`1 x out`) of one dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Layer {
    fn zeros_like(&self) -> Layer {
        Layer {
            weight: Tensor::zeros(self.weight.rows(), self.weight.cols()),
            bias: Tensor::zeros(1, self.bias.cols()),
        }
    }

    fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

/// SGD settings. Plain SGD with optional momentum; `learning_rate = 0` is
/// allowed and leaves weights untouched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 32,
            learning_rate: 0.05,
            momentum: 0.9,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::validation("epochs must be >= 1".to_string()));
        }
        if self.batch_size < 1 {
            return Err(Error::validation("batch_size must be >= 1".to_string()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::validation(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::validation(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }
}

/// Per-epoch and per-optimizer-step mean losses from one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epoch_loss: Vec<f64>,
    pub step_loss: Vec<f64>,
}

/// Per-mask probabilities for a batch plus their unweighted mean.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    per_mask: Vec<Tensor>,
    mixture: Tensor,
}

impl PredictionSet {
    /// Validates shapes and row sums, then averages in mask order.
    pub fn from_per_mask(per_mask: Vec<Tensor>) -> Result<Self> {
        let first = per_mask
            .first()
            .ok_or_else(|| Error::validation("no per-mask predictions".to_string()))?;
        let shape = first.shape();
        for t in &per_mask {
            if t.shape() != shape {
                return Err(Error::Shape {
                    op: "prediction_set",
                    left: first.shape_string(),
                    right: t.shape_string(),
                });
            }
            for row in t.iter_rows() {
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::validation(format!(
                        "probability row sums to {sum}, expected 1 within 1e-9"
                    )));
                }
            }
        }
        let mut mixture = Tensor::zeros(shape.0, shape.1);
        for t in &per_mask {
            mixture.add_assign(t);
        }
        let mixture = mixture.scale(1.0 / per_mask.len() as f64);
        Ok(PredictionSet { per_mask, mixture })
    }

    pub fn per_mask(&self) -> &[Tensor] {
        &self.per_mask
    }

    pub fn mixture(&self) -> &Tensor {
        &self.mixture
    }

    pub fn num_masks(&self) -> usize {
        self.per_mask.len()
    }
}

/// MLP with relu hidden layers, each followed by the mask layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MasksemblesMlp {
    widths: Vec<usize>,
    layers: Vec<Layer>,
    mask_set: MaskSet,
    init_seed: u64,
}

impl MasksemblesMlp {
    /// Widening construction: every hidden width in `layer_widths` is
    /// replaced by the retained mask width `K` (trim enabled), so each
    /// forward pass touches exactly `M` units per hidden layer.
    pub fn build(layer_widths: &[usize], mask_spec: MaskSpec, seed: u64) -> Result<Self> {
        let mask_set = generate_masks(&mask_spec, true);
        Self::assemble(layer_widths, mask_set, seed)
    }

    /// Fixed-width construction: hidden widths stay exactly as given;
    /// `m = round(width / s)` is solved per layer width and trimming is
    /// disabled, leaving never-used units as dead columns.
    pub fn build_fixed_width(
        layer_widths: &[usize],
        n: usize,
        s: f64,
        mask_seed: u64,
        seed: u64,
    ) -> Result<Self> {
        let hidden = validate_widths(layer_widths)?;
        if hidden.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::validation(format!(
                "fixed-width mode shares one mask pool, so all hidden widths must match; got {hidden:?}"
            )));
        }
        let spec = MaskSpec::for_fixed_width(hidden[0], n, s, mask_seed)?;
        let mask_set = generate_masks(&spec, false);
        Self::assemble(layer_widths, mask_set, seed)
    }

    /// Builds from an existing mask set (hidden widths become `K`).
    pub fn with_mask_set(layer_widths: &[usize], mask_set: MaskSet, seed: u64) -> Result<Self> {
        Self::assemble(layer_widths, mask_set, seed)
    }

    fn assemble(layer_widths: &[usize], mask_set: MaskSet, seed: u64) -> Result<Self> {
        validate_widths(layer_widths)?;
        let k = mask_set.k();
        let mut widths = layer_widths.to_vec();
        for w in widths.iter_mut().take(layer_widths.len() - 1).skip(1) {
            *w = k;
        }
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for l in 0..widths.len() - 1 {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut r = rng::stream(seed, &[INIT_DOMAIN, l as u64]);
            let data = (0..fan_in * fan_out)
                .map(|_| {
                    use rand::Rng;
                    bound * (2.0 * r.random::<f64>() - 1.0)
                })
                .collect();
            layers.push(Layer {
                weight: Tensor::new(fan_in, fan_out, data),
                bias: Tensor::zeros(1, fan_out),
            });
        }
        Ok(MasksemblesMlp {
            widths,
            layers,
            mask_set,
            init_seed: seed,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn mask_set(&self) -> &MaskSet {
        &self.mask_set
    }

    pub fn num_masks(&self) -> usize {
        self.mask_set.n()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    #[cfg(test)]
    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    /// Total number of weights and biases, dead columns included.
    pub fn model_size(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Class probabilities for `x` under mask `mask_index`.
    pub fn forward(&self, x: &Tensor, mask_index: usize) -> Result<Tensor> {
        let logits = self.forward_logits(x, mask_index)?;
        Ok(logits.softmax_rows())
    }

    fn forward_logits(&self, x: &Tensor, mask_index: usize) -> Result<Tensor> {
        if mask_index >= self.mask_set.n() {
            return Err(Error::validation(format!(
                "mask index {mask_index} out of range for {} masks",
                self.mask_set.n()
            )));
        }
        if x.cols() != self.widths[0] {
            return Err(Error::Shape {
                op: "forward",
                left: x.shape_string(),
                right: format!("input width {}", self.widths[0]),
            });
        }
        let mask = self.mask_set.row(mask_index);
        let mut h = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            h = h.matmul(&layer.weight)?.add_bias(&layer.bias)?;
            if l + 1 < self.layers.len() {
                h = h.relu().mask_mul(mask)?;
            }
        }
        h.ensure_finite("forward_logits")?;
        Ok(h)
    }

    /// One forward pass per mask, averaged in mask order.
    pub fn predict_ensemble(&self, x: &Tensor) -> Result<PredictionSet> {
        let per_mask: Vec<Result<Tensor>> =
            exec::map_collect(self.mask_set.n(), |k| self.forward(x, k));
        let per_mask: Vec<Tensor> = per_mask.into_iter().collect::<Result<_>>()?;
        PredictionSet::from_per_mask(per_mask)
    }

    /// Mean cross-entropy loss and parameter gradients for one sub-batch
    /// evaluated under a single mask.
    pub fn loss_gradients(
        &self,
        x: &Tensor,
        labels: &[usize],
        mask_index: usize,
    ) -> Result<(f64, Vec<Layer>)> {
        if mask_index >= self.mask_set.n() {
            return Err(Error::validation(format!(
                "mask index {mask_index} out of range for {} masks",
                self.mask_set.n()
            )));
        }
        let mask = self.mask_set.row(mask_index);
        let mut tape = Tape::new();
        let x_var = tape.leaf(x.clone());
        let params: Vec<(crate::autodiff::Var, crate::autodiff::Var)> = self
            .layers
            .iter()
            .map(|l| (tape.leaf(l.weight.clone()), tape.leaf(l.bias.clone())))
            .collect();
        let mut h = x_var;
        for (l, &(w, b)) in params.iter().enumerate() {
            h = tape.matmul(h, w)?;
            h = tape.add_bias(h, b)?;
            if l + 1 < params.len() {
                h = tape.relu(h)?;
                h = tape.mask_mul(h, mask)?;
            }
        }
        let (loss_var, _probs) = tape.softmax_cross_entropy(h, labels)?;
        let loss = tape.value(loss_var).get(0, 0);
        let grads = tape.backward(loss_var)?;
        let layer_grads = params
            .iter()
            .map(|&(w, b)| Layer {
                weight: grads.wrt(w),
                bias: grads.wrt(b),
            })
            .collect();
        Ok((loss, layer_grads))
    }

    /// Trains in place. Each epoch shuffles with the seeded stream, assigns
    /// each sample a uniformly random mask, and steps SGD once per batch on
    /// the size-weighted mean of the per-mask sub-batch losses.
    pub fn train(&mut self, dataset: &Dataset, config: &TrainConfig) -> Result<TrainReport> {
        config.validate()?;
        if dataset.is_empty() {
            return Err(Error::validation("training dataset is empty".to_string()));
        }
        if dataset.num_classes() > self.widths[self.widths.len() - 1] {
            return Err(Error::validation(format!(
                "dataset has {} classes but the model outputs {}",
                dataset.num_classes(),
                self.widths[self.widths.len() - 1]
            )));
        }
        let total = dataset.len();
        let n_masks = self.mask_set.n();
        let mut velocity: Vec<Layer> = self.layers.iter().map(Layer::zeros_like).collect();
        let mut report = TrainReport {
            epoch_loss: Vec::with_capacity(config.epochs),
            step_loss: Vec::new(),
        };

        for epoch in 0..config.epochs {
            let mut order: Vec<usize> = (0..total).collect();
            let mut shuffle_rng = rng::stream(config.seed, &[SHUFFLE_DOMAIN, epoch as u64]);
            rng::shuffle(&mut shuffle_rng, &mut order);

            let mut assign_rng = rng::stream(config.seed, &[ASSIGN_DOMAIN, epoch as u64]);
            let assignment: Vec<usize> = (0..total)
                .map(|_| {
                    use rand::Rng;
                    assign_rng.random_range(0..n_masks)
                })
                .collect();

            let mut epoch_loss = 0.0;
            for batch in order.chunks(config.batch_size) {
                let batch_loss =
                    self.train_step(dataset, batch, &assignment, config, &mut velocity, epoch)?;
                report.step_loss.push(batch_loss);
                epoch_loss += batch_loss * batch.len() as f64;
            }
            let epoch_loss = epoch_loss / total as f64;
            if !epoch_loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            report.epoch_loss.push(epoch_loss);
        }
        Ok(report)
    }

    fn train_step(
        &mut self,
        dataset: &Dataset,
        batch: &[usize],
        assignment: &[usize],
        config: &TrainConfig,
        velocity: &mut [Layer],
        epoch: usize,
    ) -> Result<f64> {
        let n_masks = self.mask_set.n();
        let batch_len = batch.len() as f64;
        let mut grad_acc: Vec<Layer> = self.layers.iter().map(Layer::zeros_like).collect();
        let mut batch_loss = 0.0;

        for k in 0..n_masks {
            let members: Vec<usize> = batch
                .iter()
                .copied()
                .filter(|&i| assignment[i] == k)
                .collect();
            if members.is_empty() {
                continue;
            }
            let sub = dataset.subset(&members);
            let weight = members.len() as f64 / batch_len;
            let (loss, grads) =
                self.loss_gradients(&sub.features, &sub.labels, k)
                    .map_err(|e| match e {
                        Error::NonFinite(_) => Error::Diverged { epoch },
                        other => other,
                    })?;
            batch_loss += weight * loss;
            for (acc, g) in grad_acc.iter_mut().zip(&grads) {
                acc.weight.add_scaled(&g.weight, weight);
                acc.bias.add_scaled(&g.bias, weight);
            }
        }
        if !batch_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }

        for ((layer, v), g) in self.layers.iter_mut().zip(velocity).zip(&grad_acc) {
            v.weight = v.weight.scale(config.momentum);
            v.weight.add_assign(&g.weight);
            v.bias = v.bias.scale(config.momentum);
            v.bias.add_assign(&g.bias);
            layer.weight.add_scaled(&v.weight, -config.learning_rate);
            layer.bias.add_scaled(&v.bias, -config.learning_rate);
        }
        Ok(batch_loss)
    }

    /// Writes the checkpoint at `path` plus a sibling `<stem>.masks` file
    /// that the checkpoint references.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mask_name = mask_file_name(path);
        let mask_path = path.with_file_name(&mask_name);
        self.mask_set.write_to(&mask_path)?;

        let mut out = String::from("masksembles-mlp v1\n");
        let _ = writeln!(
            out,
            "widths {}",
            self.widths
                .iter()
                .map(|w| w.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        );
        let _ = writeln!(out, "masks {mask_name}");
        let _ = writeln!(out, "seed {}", self.init_seed);
        for (l, layer) in self.layers.iter().enumerate() {
            write_tensor(&mut out, &format!("weight{l}"), &layer.weight);
            write_tensor(&mut out, &format!("bias{l}"), &layer.bias);
        }
        out.push_str("end\n");
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        match lines.next() {
            Some("masksembles-mlp v1") => {}
            other => {
                return Err(Error::format(
                    &origin,
                    format!("bad checkpoint magic {other:?}"),
                ))
            }
        }
        let widths_line = lines
            .next()
            .ok_or_else(|| Error::format(&origin, "missing widths"))?;
        let widths: Vec<usize> = widths_line
            .strip_prefix("widths ")
            .ok_or_else(|| Error::format(&origin, "missing widths"))?
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::format(&origin, format!("bad width {t:?}")))
            })
            .collect::<Result<_>>()?;
        let mask_line = lines
            .next()
            .ok_or_else(|| Error::format(&origin, "missing mask reference"))?;
        let mask_name = mask_line
            .strip_prefix("masks ")
            .ok_or_else(|| Error::format(&origin, "missing mask reference"))?;
        let seed_line = lines
            .next()
            .ok_or_else(|| Error::format(&origin, "missing seed"))?;
        let init_seed: u64 = seed_line
            .strip_prefix("seed ")
            .ok_or_else(|| Error::format(&origin, "missing seed"))?
            .parse()
            .map_err(|_| Error::format(&origin, "bad seed"))?;

        let mask_path = path.with_file_name(mask_name);
        let mask_set = MaskSet::read_from(&mask_path)?;

        let mut layers = Vec::with_capacity(widths.len().saturating_sub(1));
        for l in 0..widths.len().saturating_sub(1) {
            let weight = read_tensor(&mut lines, &format!("weight{l}"), &origin)?;
            let bias = read_tensor(&mut lines, &format!("bias{l}"), &origin)?;
            if weight.shape() != (widths[l], widths[l + 1]) || bias.shape() != (1, widths[l + 1]) {
                return Err(Error::format(&origin, format!("layer {l} shape mismatch")));
            }
            layers.push(Layer { weight, bias });
        }
        if lines.next() != Some("end") {
            return Err(Error::format(&origin, "missing end marker"));
        }
        let hidden_widths = &widths[1..widths.len() - 1];
        if hidden_widths.iter().any(|&w| w != mask_set.k()) {
            return Err(Error::format(
                &origin,
                format!(
                    "hidden widths {hidden_widths:?} do not match mask width {}",
                    mask_set.k()
                ),
            ));
        }
        Ok(MasksemblesMlp {
            widths,
            layers,
            mask_set,
            init_seed,
        })
    }
}

fn validate_widths(layer_widths: &[usize]) -> Result<Vec<usize>> {
    if layer_widths.len() < 3 {
        return Err(Error::validation(format!(
            "need input, at least one hidden, and output width; got {layer_widths:?}"
        )));
    }
    if layer_widths.iter().any(|&w| w < 1) {
        return Err(Error::validation(format!(
            "all layer widths must be >= 1, got {layer_widths:?}"
        )));
    }
    Ok(layer_widths[1..layer_widths.len() - 1].to_vec())
}

fn mask_file_name(ckpt: &Path) -> String {
    let stem = ckpt
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "model".to_string());
    format!("{stem}.masks")
}

fn write_tensor(out: &mut String, name: &str, t: &Tensor) {
    let _ = writeln!(out, "tensor {name} {} {}", t.rows(), t.cols());
    for row in t.iter_rows() {
        let words: Vec<String> = row
            .iter()
            .map(|v| format!("{:016x}", v.to_bits()))
            .collect();
        let _ = writeln!(out, "{}", words.join(" "));
    }
}

fn read_tensor<'a>(
    lines: &mut impl Iterator<Item = &'a str>,
    expected_name: &str,
    origin: &str,
) -> Result<Tensor> {
    let header = lines
        .next()
        .ok_or_else(|| Error::format(origin, format!("missing tensor {expected_name}")))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "tensor" || fields[1] != expected_name {
        return Err(Error::format(
            origin,
            format!("expected `tensor {expected_name} rows cols`, got {header:?}"),
        ));
    }
    let rows: usize = fields[2]
        .parse()
        .map_err(|_| Error::format(origin, "bad tensor rows"))?;
    let cols: usize = fields[3]
        .parse()
        .map_err(|_| Error::format(origin, "bad tensor cols"))?;
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| Error::format(origin, "truncated tensor block"))?;
        for word in line.split_whitespace() {
            let bits = u64::from_str_radix(word, 16)
                .map_err(|_| Error::format(origin, format!("bad hex word {word:?}")))?;
            data.push(f64::from_bits(bits));
        }
    }
    if data.len() != rows * cols {
        return Err(Error::format(
            origin,
            format!(
                "tensor {expected_name} has {} values, expected {}",
                data.len(),
                rows * cols
            ),
        ));
    }
    Ok(Tensor::new(rows, cols, data))
}
