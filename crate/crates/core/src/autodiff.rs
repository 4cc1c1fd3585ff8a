//! Reverse-mode automatic differentiation over a flat tape.
//!
//! The op set is deliberately tiny: what a masked MLP classifier needs
//! (matmul, bias add, relu, mask multiply, softmax cross-entropy) plus
//! square/sum/mean for losses and gradient checks. Ops are recorded in
//! construction order, which is already topological, so the backward pass
//! is a single reverse sweep. Each op validates its output for NaN/Inf.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Relu(Var),
    MaskMul(Var, Vec<u8>),
    Square(Var),
    Sum(Var),
    Mean(Var),
    SoftmaxCrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Tensor,
    },
}

struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Records an input or parameter leaf.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        out.ensure_finite("matmul")?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let out = self.value(x).add_bias(self.value(bias))?;
        out.ensure_finite("add_bias")?;
        Ok(self.push(out, Op::AddBias(x, bias)))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).relu();
        out.ensure_finite("relu")?;
        Ok(self.push(out, Op::Relu(x)))
    }

    pub fn mask_mul(&mut self, x: Var, mask: &[u8]) -> Result<Var> {
        let out = self.value(x).mask_mul(mask)?;
        out.ensure_finite("mask_mul")?;
        Ok(self.push(out, Op::MaskMul(x, mask.to_vec())))
    }

    pub fn square(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let data = v.data().iter().map(|&a| a * a).collect();
        let out = Tensor::new(v.rows(), v.cols(), data);
        out.ensure_finite("square")?;
        Ok(self.push(out, Op::Square(x)))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let total: f64 = self.value(x).data().iter().sum();
        let out = Tensor::new(1, 1, vec![total]);
        out.ensure_finite("sum")?;
        Ok(self.push(out, Op::Sum(x)))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let mean = v.data().iter().sum::<f64>() / v.len() as f64;
        let out = Tensor::new(1, 1, vec![mean]);
        out.ensure_finite("mean")?;
        Ok(self.push(out, Op::Mean(x)))
    }

    /// Mean negative log-likelihood of `labels` under row-wise softmax.
    ///
    /// The loss goes through log-sum-exp so extreme logits neither overflow
    /// nor produce log(0). Returns the scalar loss node and a copy of the
    /// probabilities (rows sum to 1).
    pub fn softmax_cross_entropy(
        &mut self,
        logits: Var,
        labels: &[usize],
    ) -> Result<(Var, Tensor)> {
        let z = self.value(logits);
        let (b, c) = z.shape();
        if labels.len() != b {
            return Err(Error::Shape {
                op: "softmax_cross_entropy",
                left: z.shape_string(),
                right: format!("labels[{}]", labels.len()),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
            return Err(Error::validation(format!(
                "label {bad} out of range for {c} classes"
            )));
        }
        let mut probs = Tensor::zeros(b, c);
        let mut nll_sum = 0.0;
        for i in 0..b {
            let row = z.row(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (j, &v) in row.iter().enumerate() {
                let e = (v - max).exp();
                probs.set(i, j, e);
                sum += e;
            }
            for j in 0..c {
                probs.set(i, j, probs.get(i, j) / sum);
            }
            // lse - z[y] in shifted coordinates
            nll_sum += sum.ln() - (row[labels[i]] - max);
        }
        let loss = Tensor::new(1, 1, vec![nll_sum / b as f64]);
        loss.ensure_finite("softmax_cross_entropy")?;
        let node = self.push(
            loss,
            Op::SoftmaxCrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs: probs.clone(),
            },
        );
        Ok((node, probs))
    }

    /// Reverse sweep from a scalar loss. Leaves that do not reach the loss
    /// get zero gradients.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let loss_val = self.value(loss);
        if loss_val.shape() != (1, 1) {
            return Err(Error::validation(format!(
                "backward needs a scalar loss, got {}",
                loss_val.shape_string()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::new(1, 1, vec![1.0]));

        for id in (0..=loss.0).rev() {
            let Some(out_grad) = grads[id].take() else {
                continue;
            };
            match &self.nodes[id].op {
                Op::Leaf => {
                    grads[id] = Some(out_grad);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let da = out_grad.matmul(&self.value(*b).transpose())?;
                    let db = self.value(*a).transpose().matmul(&out_grad)?;
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::AddBias(x, bias) => {
                    let cols = out_grad.cols();
                    let mut db = vec![0.0; cols];
                    for row in out_grad.iter_rows() {
                        for (acc, &g) in db.iter_mut().zip(row) {
                            *acc += g;
                        }
                    }
                    accumulate(&mut grads, *bias, Tensor::row_vector(db));
                    accumulate(&mut grads, *x, out_grad);
                }
                Op::Relu(x) => {
                    let input = self.value(*x);
                    let mut dx = out_grad;
                    for (g, &v) in dx.data_mut().iter_mut().zip(input.data()) {
                        if v <= 0.0 {
                            *g = 0.0;
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::MaskMul(x, mask) => {
                    let dx = out_grad.mask_mul(mask)?;
                    accumulate(&mut grads, *x, dx);
                }
                Op::Square(x) => {
                    let input = self.value(*x);
                    let mut dx = out_grad;
                    for (g, &v) in dx.data_mut().iter_mut().zip(input.data()) {
                        *g *= 2.0 * v;
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::Sum(x) => {
                    let g = out_grad.get(0, 0);
                    let shape = self.value(*x).shape();
                    let dx = Tensor::new(shape.0, shape.1, vec![g; shape.0 * shape.1]);
                    accumulate(&mut grads, *x, dx);
                }
                Op::Mean(x) => {
                    let shape = self.value(*x).shape();
                    let len = (shape.0 * shape.1) as f64;
                    let g = out_grad.get(0, 0) / len;
                    let dx = Tensor::new(shape.0, shape.1, vec![g; shape.0 * shape.1]);
                    accumulate(&mut grads, *x, dx);
                }
                Op::SoftmaxCrossEntropy {
                    logits,
                    labels,
                    probs,
                } => {
                    let g = out_grad.get(0, 0);
                    let b = probs.rows() as f64;
                    let mut dz = probs.clone();
                    for (i, &y) in labels.iter().enumerate() {
                        dz.set(i, y, dz.get(i, y) - 1.0);
                    }
                    let dz = dz.scale(g / b);
                    accumulate(&mut grads, *logits, dz);
                }
            }
        }

        let shapes = self.nodes.iter().map(|n| n.value.shape()).collect();
        Ok(Gradients { grads, shapes })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, delta: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&delta),
        slot => *slot = Some(delta),
    }
}

/// Per-node gradients from one backward sweep.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// Gradient with respect to `v`; zeros when `v` never reached the loss.
    pub fn wrt(&self, v: Var) -> Tensor {
        match &self.grads[v.0] {
            Some(t) => t.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                Tensor::zeros(r, c)
            }
        }
    }
}
