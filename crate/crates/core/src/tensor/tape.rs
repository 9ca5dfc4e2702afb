//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every operation appends a node holding its forward value. Nodes are only ever
//! appended after their inputs, so tape order is a topological order and the
//! backward pass is a single reverse sweep.

use super::{mismatch, Tensor, TensorError};
use crate::scalar::Scalar;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Batch-normalisation statistics source.
#[derive(Debug, Clone, Copy)]
pub enum BnMode<'a, T> {
    /// Normalise with the statistics of the current batch.
    Batch,
    /// Normalise with externally tracked running statistics.
    Running { mean: &'a [T], var: &'a [T] },
}

/// Biased per-column statistics of a training batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BnStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

pub(crate) const BN_EPS: f64 = 1e-5;

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Detach,
    MatMul(usize, usize),
    Add(usize, usize),
    AddRow(usize, usize),
    Scale(usize, T),
    Concat(usize, usize),
    Relu(usize),
    SegmentMean {
        input: usize,
        segments: Vec<usize>,
        counts: Vec<usize>,
    },
    GatherRows {
        input: usize,
        idx: Vec<usize>,
    },
    ScatterAddRows {
        input: usize,
        idx: Vec<usize>,
    },
    BatchNorm {
        input: usize,
        gamma: usize,
        beta: usize,
        xhat: Tensor<T>,
        inv_std: Vec<T>,
        batch_stats: bool,
    },
    RowSqDist {
        pred: usize,
        target: Tensor<T>,
        weights: Vec<T>,
    },
    ReplaceRows {
        base: usize,
        token: usize,
        rows: Vec<usize>,
    },
    BceLogits {
        logits: usize,
        labels: Vec<T>,
        weights: Vec<T>,
    },
    SoftmaxXent {
        logits: usize,
        labels: Vec<usize>,
        weights: Vec<T>,
        probs: Tensor<T>,
    },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// `None` means the value did not influence the differentiated output.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Non-differentiable input.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Same value, but gradients stop here.
    pub fn detach(&mut self, x: Var) -> Var {
        let value = self.value(x).clone();
        self.push(value, Op::Detach, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMul(a.0, b.0), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(mismatch("add", format!("{:?} + {:?}", va.shape(), vb.shape())));
        }
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| x + y).collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Add(a.0, b.0), rg))
    }

    /// Adds a length-`c` vector to every row of an `r×c` matrix.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var, TensorError> {
        let (va, vb) = (self.value(a), self.value(bias));
        if va.shape().len() != 2 || vb.len() != va.cols() {
            return Err(mismatch("add_row", format!("{:?} + {:?}", va.shape(), vb.shape())));
        }
        let c = va.cols();
        let mut data = va.data().to_vec();
        for row in data.chunks_mut(c.max(1)) {
            for (x, &b) in row.iter_mut().zip(vb.data()) {
                *x += b;
            }
        }
        let value = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(bias);
        Ok(self.push(value, Op::AddRow(a.0, bias.0), rg))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let value = self.value(a).map(|x| x * s);
        let rg = self.rg(a);
        self.push(value, Op::Scale(a.0, s), rg)
    }

    /// Concatenation along the last dimension of two matrices with equal row counts.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape().len() != 2 || vb.shape().len() != 2 || va.rows() != vb.rows() {
            return Err(mismatch("concat", format!("{:?} | {:?}", va.shape(), vb.shape())));
        }
        let (r, ca, cb) = (va.rows(), va.cols(), vb.cols());
        let mut data = Vec::with_capacity(r * (ca + cb));
        for i in 0..r {
            data.extend_from_slice(va.row(i));
            data.extend_from_slice(vb.row(i));
        }
        let value = Tensor::new(vec![r, ca + cb], data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Concat(a.0, b.0), rg))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| if x > T::zero() { x } else { T::zero() });
        let rg = self.rg(a);
        self.push(value, Op::Relu(a.0), rg)
    }

    /// Row means grouped by segment id: output row `s` is the mean of the input
    /// rows `i` with `segments[i] == s`.
    pub fn segment_mean(
        &mut self,
        values: Var,
        segments: &[usize],
        num_segments: usize,
    ) -> Result<Var, TensorError> {
        let v = self.value(values);
        if v.shape().len() != 2 || segments.len() != v.rows() {
            return Err(mismatch(
                "segment_mean",
                format!("{} segment ids for shape {:?}", segments.len(), v.shape()),
            ));
        }
        let c = v.cols();
        let mut counts = vec![0usize; num_segments];
        let mut out = vec![T::zero(); num_segments * c];
        for (i, &s) in segments.iter().enumerate() {
            if s >= num_segments {
                return Err(TensorError::InvalidIndex {
                    index: s,
                    bound: num_segments,
                });
            }
            counts[s] += 1;
            for (o, &x) in out[s * c..(s + 1) * c].iter_mut().zip(v.row(i)) {
                *o += x;
            }
        }
        for (s, &n) in counts.iter().enumerate() {
            if n == 0 {
                return Err(TensorError::EmptySegment { segment: s });
            }
            let inv = T::one() / T::from_usize(n).unwrap();
            out[s * c..(s + 1) * c].iter_mut().for_each(|o| *o *= inv);
        }
        let value = Tensor::new(vec![num_segments, c], out)?;
        let rg = self.rg(values);
        Ok(self.push(
            value,
            Op::SegmentMean {
                input: values.0,
                segments: segments.to_vec(),
                counts,
            },
            rg,
        ))
    }

    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var, TensorError> {
        let value = self.value(x).select_rows(idx)?;
        let rg = self.rg(x);
        Ok(self.push(
            value,
            Op::GatherRows {
                input: x.0,
                idx: idx.to_vec(),
            },
            rg,
        ))
    }

    /// Output row `idx[i]` accumulates input row `i`; output has `out_rows` rows.
    pub fn scatter_add_rows(
        &mut self,
        x: Var,
        idx: &[usize],
        out_rows: usize,
    ) -> Result<Var, TensorError> {
        let v = self.value(x);
        if v.shape().len() != 2 || idx.len() != v.rows() {
            return Err(mismatch(
                "scatter_add_rows",
                format!("{} indices for shape {:?}", idx.len(), v.shape()),
            ));
        }
        let c = v.cols();
        let mut out = vec![T::zero(); out_rows * c];
        for (i, &t) in idx.iter().enumerate() {
            if t >= out_rows {
                return Err(TensorError::InvalidIndex {
                    index: t,
                    bound: out_rows,
                });
            }
            for (o, &x) in out[t * c..(t + 1) * c].iter_mut().zip(v.row(i)) {
                *o += x;
            }
        }
        let value = Tensor::new(vec![out_rows, c], out)?;
        let rg = self.rg(x);
        Ok(self.push(
            value,
            Op::ScatterAddRows {
                input: x.0,
                idx: idx.to_vec(),
            },
            rg,
        ))
    }

    /// Per-column batch normalisation `γ·(x−μ)/√(σ²+ε) + β`. In [`BnMode::Batch`]
    /// the batch statistics are returned so the caller can track running values.
    pub fn batchnorm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        mode: BnMode<'_, T>,
    ) -> Result<(Var, Option<BnStats<T>>), TensorError> {
        let (vx, vg, vb) = (self.value(x), self.value(gamma), self.value(beta));
        let c = vx.cols();
        if vx.shape().len() != 2 || vg.len() != c || vb.len() != c {
            return Err(mismatch(
                "batchnorm",
                format!("x {:?}, gamma {:?}, beta {:?}", vx.shape(), vg.shape(), vb.shape()),
            ));
        }
        let r = vx.rows();
        let eps = T::lit(BN_EPS);
        let (mean, var, stats) = match mode {
            BnMode::Batch => {
                if r == 0 {
                    let value = vx.clone();
                    return Ok((self.push(value, Op::Detach, false), None));
                }
                let var = vx.column_variance();
                let n = T::from_usize(r).unwrap();
                let mut mean = vec![T::zero(); c];
                for i in 0..r {
                    for (m, &v) in mean.iter_mut().zip(vx.row(i)) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n);
                let stats = BnStats {
                    mean: mean.clone(),
                    var: var.clone(),
                };
                (mean, var, Some(stats))
            }
            BnMode::Running { mean, var } => {
                if mean.len() != c || var.len() != c {
                    return Err(mismatch("batchnorm", "running statistics length"));
                }
                (mean.to_vec(), var.to_vec(), None)
            }
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let mut xhat = vec![T::zero(); r * c];
        let mut out = vec![T::zero(); r * c];
        for i in 0..r {
            let row = vx.row(i);
            for j in 0..c {
                let h = (row[j] - mean[j]) * inv_std[j];
                xhat[i * c + j] = h;
                out[i * c + j] = vg.data()[j] * h + vb.data()[j];
            }
        }
        let value = Tensor::new(vec![r, c], out)?;
        let xhat = Tensor::new(vec![r, c], xhat)?;
        let rg = self.rg(x) || self.rg(gamma) || self.rg(beta);
        let batch_stats = stats.is_some();
        let v = self.push(
            value,
            Op::BatchNorm {
                input: x.0,
                gamma: gamma.0,
                beta: beta.0,
                xhat,
                inv_std,
                batch_stats,
            },
            rg,
        );
        Ok((v, stats))
    }

    /// Weighted squared distance `Σᵢ wᵢ‖predᵢ − targetᵢ‖²` against a constant target.
    pub fn row_sq_dist(
        &mut self,
        pred: Var,
        target: &Tensor<T>,
        weights: &[T],
    ) -> Result<Var, TensorError> {
        let vp = self.value(pred);
        if vp.shape() != target.shape() || weights.len() != vp.rows() {
            return Err(mismatch(
                "row_sq_dist",
                format!("pred {:?}, target {:?}, {} weights", vp.shape(), target.shape(), weights.len()),
            ));
        }
        let mut total = T::zero();
        for (i, &w) in weights.iter().enumerate() {
            if w == T::zero() {
                continue;
            }
            let d: T = vp
                .row(i)
                .iter()
                .zip(target.row(i))
                .map(|(&p, &t)| (p - t) * (p - t))
                .sum();
            total += w * d;
        }
        let rg = self.rg(pred);
        Ok(self.push(
            Tensor::scalar(total),
            Op::RowSqDist {
                pred: pred.0,
                target: target.clone(),
                weights: weights.to_vec(),
            },
            rg,
        ))
    }

    /// Mean over `rows` of `‖predᵢ − targetᵢ‖²`; zero when `rows` is empty.
    pub fn mse_masked(
        &mut self,
        pred: Var,
        target: &Tensor<T>,
        rows: &[usize],
    ) -> Result<Var, TensorError> {
        let r = self.value(pred).rows();
        let mut weights = vec![T::zero(); r];
        if !rows.is_empty() {
            let w = T::one() / T::from_usize(rows.len()).unwrap();
            for &i in rows {
                if i >= r {
                    return Err(TensorError::InvalidIndex { index: i, bound: r });
                }
                weights[i] += w;
            }
        }
        self.row_sq_dist(pred, target, &weights)
    }

    /// Copy of `base` with each listed row overwritten by the vector `token`.
    pub fn replace_rows(&mut self, base: Var, token: Var, rows: &[usize]) -> Result<Var, TensorError> {
        let (vb, vt) = (self.value(base), self.value(token));
        let c = vb.cols();
        if vb.shape().len() != 2 || vt.len() != c {
            return Err(mismatch("replace_rows", format!("{:?} <- {:?}", vb.shape(), vt.shape())));
        }
        let mut data = vb.data().to_vec();
        let mut seen = vec![false; vb.rows()];
        for &i in rows {
            if i >= vb.rows() {
                return Err(TensorError::InvalidIndex {
                    index: i,
                    bound: vb.rows(),
                });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(mismatch("replace_rows", format!("row {i} listed twice")));
            }
            data[i * c..(i + 1) * c].copy_from_slice(vt.data());
        }
        let value = Tensor::new(vb.shape().to_vec(), data)?;
        let rg = self.rg(base) || self.rg(token);
        Ok(self.push(
            value,
            Op::ReplaceRows {
                base: base.0,
                token: token.0,
                rows: rows.to_vec(),
            },
            rg,
        ))
    }

    /// `Σ w·(softplus(z) − y·z)`, the weighted logistic loss on logits.
    pub fn bce_with_logits(
        &mut self,
        logits: Var,
        labels: &[T],
        weights: &[T],
    ) -> Result<Var, TensorError> {
        let z = self.value(logits);
        if labels.len() != z.len() || weights.len() != z.len() {
            return Err(mismatch("bce_with_logits", "labels/weights length"));
        }
        let mut total = T::zero();
        for ((&x, &y), &w) in z.data().iter().zip(labels).zip(weights) {
            if w != T::zero() {
                total += w * (softplus(x) - y * x);
            }
        }
        let rg = self.rg(logits);
        Ok(self.push(
            Tensor::scalar(total),
            Op::BceLogits {
                logits: logits.0,
                labels: labels.to_vec(),
                weights: weights.to_vec(),
            },
            rg,
        ))
    }

    /// `Σᵢ wᵢ·(−log softmax(zᵢ)[yᵢ])` over the rows of an `r×k` logit matrix.
    pub fn softmax_xent(
        &mut self,
        logits: Var,
        labels: &[usize],
        weights: &[T],
    ) -> Result<Var, TensorError> {
        let z = self.value(logits);
        let (r, k) = (z.rows(), z.cols());
        if z.shape().len() != 2 || labels.len() != r || weights.len() != r {
            return Err(mismatch("softmax_xent", "labels/weights length"));
        }
        let mut probs = vec![T::zero(); r * k];
        let mut total = T::zero();
        for i in 0..r {
            let row = z.row(i);
            if labels[i] >= k {
                return Err(TensorError::InvalidIndex {
                    index: labels[i],
                    bound: k,
                });
            }
            let mx = row.iter().copied().fold(T::neg_infinity(), T::max);
            let sum: T = row.iter().map(|&x| (x - mx).exp()).sum();
            for j in 0..k {
                probs[i * k + j] = (row[j] - mx).exp() / sum;
            }
            total += weights[i] * (sum.ln() + mx - row[labels[i]]);
        }
        let rg = self.rg(logits);
        Ok(self.push(
            Tensor::scalar(total),
            Op::SoftmaxXent {
                logits: logits.0,
                labels: labels.to_vec(),
                weights: weights.to_vec(),
                probs: Tensor::new(vec![r, k], probs)?,
            },
            rg,
        ))
    }

    /// Back-propagates from a scalar output.
    pub fn backward(&self, output: Var) -> Gradients<T> {
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        let out = &self.nodes[output.0].value;
        grads[output.0] = Some(Tensor::full(out.shape(), T::one()));
        for id in (0..=output.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.propagate(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        Gradients { grads }
    }

    fn propagate(&self, id: usize, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let node = &self.nodes[id];
        let wants = |i: usize| self.nodes[i].requires_grad;
        match &node.op {
            Op::Leaf | Op::Detach => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                let (m, k, n) = (va.rows(), va.cols(), vb.cols());
                if wants(*a) {
                    let mut ga = vec![T::zero(); m * k];
                    T::gemm(m, n, k, g.data(), false, vb.data(), true, &mut ga, false);
                    accumulate(grads, *a, va.shape(), ga);
                }
                if wants(*b) {
                    let mut gb = vec![T::zero(); k * n];
                    T::gemm(k, m, n, va.data(), true, g.data(), false, &mut gb, false);
                    accumulate(grads, *b, vb.shape(), gb);
                }
            }
            Op::Add(a, b) => {
                for &i in &[*a, *b] {
                    if wants(i) {
                        accumulate(grads, i, g.shape(), g.data().to_vec());
                    }
                }
            }
            Op::AddRow(a, bias) => {
                if wants(*a) {
                    accumulate(grads, *a, g.shape(), g.data().to_vec());
                }
                if wants(*bias) {
                    let c = g.cols();
                    let mut gb = vec![T::zero(); c];
                    for i in 0..g.rows() {
                        for (s, &x) in gb.iter_mut().zip(g.row(i)) {
                            *s += x;
                        }
                    }
                    accumulate(grads, *bias, self.nodes[*bias].value.shape(), gb);
                }
            }
            Op::Scale(a, s) => {
                if wants(*a) {
                    accumulate(grads, *a, g.shape(), g.data().iter().map(|&x| x * *s).collect());
                }
            }
            Op::Concat(a, b) => {
                let (ca, cb) = (self.nodes[*a].value.cols(), self.nodes[*b].value.cols());
                let r = g.rows();
                if wants(*a) {
                    let ga = (0..r).flat_map(|i| g.row(i)[..ca].to_vec()).collect();
                    accumulate(grads, *a, self.nodes[*a].value.shape(), ga);
                }
                if wants(*b) {
                    let gb = (0..r).flat_map(|i| g.row(i)[ca..ca + cb].to_vec()).collect();
                    accumulate(grads, *b, self.nodes[*b].value.shape(), gb);
                }
            }
            Op::Relu(a) => {
                if wants(*a) {
                    let x = &self.nodes[*a].value;
                    let ga = x
                        .data()
                        .iter()
                        .zip(g.data())
                        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
                        .collect();
                    accumulate(grads, *a, x.shape(), ga);
                }
            }
            Op::SegmentMean {
                input,
                segments,
                counts,
            } => {
                if wants(*input) {
                    let c = g.cols();
                    let inv: Vec<T> = counts
                        .iter()
                        .map(|&n| T::one() / T::from_usize(n).unwrap())
                        .collect();
                    let mut gi = Vec::with_capacity(segments.len() * c);
                    for &s in segments {
                        gi.extend(g.row(s).iter().map(|&x| x * inv[s]));
                    }
                    accumulate(grads, *input, self.nodes[*input].value.shape(), gi);
                }
            }
            Op::GatherRows { input, idx } => {
                if wants(*input) {
                    let src = &self.nodes[*input].value;
                    let c = src.cols();
                    let mut gi = vec![T::zero(); src.len()];
                    for (k, &i) in idx.iter().enumerate() {
                        for (o, &x) in gi[i * c..(i + 1) * c].iter_mut().zip(g.row(k)) {
                            *o += x;
                        }
                    }
                    accumulate(grads, *input, src.shape(), gi);
                }
            }
            Op::ScatterAddRows { input, idx } => {
                if wants(*input) {
                    let gi = idx.iter().flat_map(|&t| g.row(t).to_vec()).collect();
                    accumulate(grads, *input, self.nodes[*input].value.shape(), gi);
                }
            }
            Op::BatchNorm {
                input,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            } => {
                let (r, c) = (g.rows(), g.cols());
                let mut sum_g = vec![T::zero(); c];
                let mut sum_gx = vec![T::zero(); c];
                for i in 0..r {
                    for j in 0..c {
                        let gij = g.data()[i * c + j];
                        sum_g[j] += gij;
                        sum_gx[j] += gij * xhat.data()[i * c + j];
                    }
                }
                if wants(*beta) {
                    accumulate(grads, *beta, self.nodes[*beta].value.shape(), sum_g.clone());
                }
                if wants(*gamma) {
                    accumulate(grads, *gamma, self.nodes[*gamma].value.shape(), sum_gx.clone());
                }
                if wants(*input) {
                    let gam = self.nodes[*gamma].value.data();
                    let mut gi = vec![T::zero(); r * c];
                    if *batch_stats {
                        let n = T::from_usize(r).unwrap();
                        for i in 0..r {
                            for j in 0..c {
                                let k = i * c + j;
                                gi[k] = gam[j] * inv_std[j] / n
                                    * (n * g.data()[k] - sum_g[j] - xhat.data()[k] * sum_gx[j]);
                            }
                        }
                    } else {
                        for i in 0..r {
                            for j in 0..c {
                                let k = i * c + j;
                                gi[k] = gam[j] * inv_std[j] * g.data()[k];
                            }
                        }
                    }
                    accumulate(grads, *input, self.nodes[*input].value.shape(), gi);
                }
            }
            Op::RowSqDist {
                pred,
                target,
                weights,
            } => {
                if wants(*pred) {
                    let p = &self.nodes[*pred].value;
                    let c = p.cols();
                    let two = T::lit(2.0) * g.item();
                    let mut gp = vec![T::zero(); p.len()];
                    for (i, &w) in weights.iter().enumerate() {
                        if w == T::zero() {
                            continue;
                        }
                        for j in 0..c {
                            gp[i * c + j] = two * w * (p.row(i)[j] - target.row(i)[j]);
                        }
                    }
                    accumulate(grads, *pred, p.shape(), gp);
                }
            }
            Op::ReplaceRows { base, token, rows } => {
                let c = g.cols();
                if wants(*base) {
                    let mut gb = g.data().to_vec();
                    for &i in rows {
                        gb[i * c..(i + 1) * c].iter_mut().for_each(|x| *x = T::zero());
                    }
                    accumulate(grads, *base, g.shape(), gb);
                }
                if wants(*token) {
                    let mut gt = vec![T::zero(); c];
                    for &i in rows {
                        for (s, &x) in gt.iter_mut().zip(g.row(i)) {
                            *s += x;
                        }
                    }
                    accumulate(grads, *token, self.nodes[*token].value.shape(), gt);
                }
            }
            Op::BceLogits {
                logits,
                labels,
                weights,
            } => {
                if wants(*logits) {
                    let z = &self.nodes[*logits].value;
                    let gz = z
                        .data()
                        .iter()
                        .zip(labels)
                        .zip(weights)
                        .map(|((&x, &y), &w)| g.item() * w * (sigmoid(x) - y))
                        .collect();
                    accumulate(grads, *logits, z.shape(), gz);
                }
            }
            Op::SoftmaxXent {
                logits,
                labels,
                weights,
                probs,
            } => {
                if wants(*logits) {
                    let k = probs.cols();
                    let mut gz = probs.data().to_vec();
                    for (i, (&y, &w)) in labels.iter().zip(weights).enumerate() {
                        gz[i * k + y] -= T::one();
                        gz[i * k..(i + 1) * k]
                            .iter_mut()
                            .for_each(|x| *x = *x * w * g.item());
                    }
                    accumulate(grads, *logits, probs.shape(), gz);
                }
            }
        }
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<Tensor<T>>], id: usize, shape: &[usize], data: Vec<T>) {
    match &mut grads[id] {
        Some(existing) => {
            for (e, d) in existing.data_mut().iter_mut().zip(data) {
                *e += d;
            }
        }
        slot @ None => {
            *slot = Some(Tensor::new(shape.to_vec(), data).expect("gradient shape"));
        }
    }
}

pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (T::one() + (-x.abs()).exp()).ln()
}
