use std::fmt::Write;

use rand::seq::SliceRandom;

use super::{roc_auc, rmse, DownstreamConfig, DownstreamError, Partition, Sample, SplitAssignment, TaskKind, TaskSpec};
use crate::encoder::{BnUsage, GraphBatch, HierarchicalEncoder, Linear};
use crate::scalar::Scalar;
use crate::tensor::{seeded_rng, AdamState, ParamStore, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    /// Task index, or `mean` for the average over tasks with a defined metric.
    pub task: String,
    pub split: Partition,
    pub metric: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneReport {
    /// Metrics at the selected epoch.
    pub rows: Vec<MetricRow>,
    /// 1-based epoch with the best validation score.
    pub selected_epoch: usize,
    /// Mean training metric after every epoch.
    pub train_history: Vec<f64>,
}

impl FinetuneReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("task,split,metric,value\n");
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", r.task, r.split.name(), r.metric, r.value).unwrap();
        }
        out
    }

    pub fn value(&self, task: &str, split: Partition) -> Option<f64> {
        self.rows.iter().find(|r| r.task == task && r.split == split).map(|r| r.value)
    }
}

/// Mean-pooled encoder followed by a linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyModel<T> {
    pub encoder: HierarchicalEncoder<T>,
    pub head_params: ParamStore<T>,
    head: Linear,
}

impl<T: Scalar> PropertyModel<T> {
    pub fn new(encoder: HierarchicalEncoder<T>, outputs: usize, seed: u64) -> Self {
        let mut head_params = ParamStore::new();
        let head = Linear::new(&mut head_params, "head", encoder.config().hidden, outputs, &mut seeded_rng(seed));
        Self {
            encoder,
            head_params,
            head,
        }
    }

    /// Evaluation-mode outputs, one row per sample.
    pub fn predict(&self, data: &[&Sample], chunk: usize) -> Result<Vec<Vec<f64>>, DownstreamError> {
        let mut out = Vec::with_capacity(data.len());
        for part in data.chunks(chunk.max(1)) {
            let batch = batch_of(part);
            let mut tape = Tape::new();
            let ev = self.encoder.params().bind_frozen(&mut tape);
            let hv = self.head_params.bind_frozen(&mut tape);
            let (enc, _) = self.encoder.forward(&mut tape, &ev, &batch, None, BnUsage::Running)?;
            let y = self.head.apply(&mut tape, &hv, enc.graph)?;
            let y = tape.value(y);
            out.extend((0..y.rows()).map(|i| y.row(i).iter().map(|v| v.as_f64()).collect()));
        }
        Ok(out)
    }
}

fn batch_of<T: Scalar>(part: &[&Sample]) -> GraphBatch<T> {
    let items: Vec<_> = part.iter().map(|s| (&s.graph, &s.decomp)).collect();
    GraphBatch::new(&items)
}

/// Per-task metric over `idx`; `None` where the labels make it undefined.
fn task_metrics(task: &TaskSpec, data: &[Sample], idx: &[usize], preds: &[Vec<f64>]) -> Vec<Option<f64>> {
    (0..task.num_tasks)
        .map(|t| {
            let (mut s, mut y) = (Vec::new(), Vec::new());
            for (k, &i) in idx.iter().enumerate() {
                if let Some(label) = data[i].labels[t] {
                    s.push(preds[k][t]);
                    y.push(label);
                }
            }
            match task.kind {
                TaskKind::Classification => {
                    let y: Vec<bool> = y.iter().map(|&v| v > 0.5).collect();
                    roc_auc(&s, &y).ok()
                }
                TaskKind::Regression => rmse(&s, &y).ok(),
            }
        })
        .collect()
}

fn mean_defined(values: &[Option<f64>]) -> Option<f64> {
    let v: Vec<f64> = values.iter().flatten().copied().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Records the batch loss: logistic per present label, or squared error per
/// present label, averaged over present labels.
fn batch_loss<T: Scalar>(tape: &mut Tape<T>, out: Var, task: &TaskSpec, part: &[&Sample]) -> Result<Var, DownstreamError> {
    let k = task.num_tasks;
    let present = part.iter().flat_map(|s| &s.labels).filter(|l| l.is_some()).count();
    let w = if present == 0 { T::zero() } else { T::one() / T::from_usize(present).unwrap() };
    match task.kind {
        TaskKind::Classification => {
            let mut labels = Vec::with_capacity(part.len() * k);
            let mut weights = Vec::with_capacity(part.len() * k);
            for s in part {
                for l in &s.labels {
                    labels.push(T::lit(l.unwrap_or(0.0)));
                    weights.push(if l.is_some() { w } else { T::zero() });
                }
            }
            Ok(tape.bce_with_logits(out, &labels, &weights)?)
        }
        TaskKind::Regression => {
            // Missing entries copy the prediction, so they add neither loss nor gradient.
            let pred = tape.value(out);
            let mut target = pred.clone();
            for (i, s) in part.iter().enumerate() {
                for (t, l) in s.labels.iter().enumerate() {
                    if let Some(v) = l {
                        target.data_mut()[i * k + t] = T::lit(*v);
                    }
                }
            }
            Ok(tape.row_sq_dist(out, &target, &vec![w; part.len()])?)
        }
    }
}

/// Fine-tunes encoder and head on the train partition; after every epoch the
/// validation score is computed and the best epoch's metrics are reported.
pub fn finetune<T: Scalar>(
    encoder: HierarchicalEncoder<T>,
    data: &[Sample],
    task: &TaskSpec,
    split: &SplitAssignment,
    config: &DownstreamConfig,
    seed: u64,
) -> Result<(PropertyModel<T>, FinetuneReport), DownstreamError> {
    task.validate()?;
    if data.is_empty() {
        return Err(DownstreamError::EmptyDataset);
    }
    if split.parts.len() != data.len() {
        return Err(DownstreamError::LengthMismatch(split.parts.len(), data.len()));
    }
    for s in data {
        task.check_labels(&s.labels)?;
    }
    let mut train = split.indices(Partition::Train);
    if train.is_empty() {
        return Err(DownstreamError::EmptyDataset);
    }
    let mut rng = seeded_rng(seed);
    let mut model = PropertyModel::new(encoder, task.num_tasks, seed);
    let mut adam_enc = AdamState::new(model.encoder.params().values().iter().map(Tensor::shape));
    let mut adam_head = AdamState::new(model.head_params.values().iter().map(Tensor::shape));

    let better = |a: f64, b: f64| match task.kind {
        TaskKind::Classification => a > b,
        TaskKind::Regression => a < b,
    };
    let mut best: Option<(f64, usize, Vec<MetricRow>)> = None;
    let mut train_history = Vec::new();
    for epoch in 1..=config.finetune_epochs {
        train.shuffle(&mut rng);
        for chunk in train.chunks(config.finetune_batch_size) {
            let part: Vec<&Sample> = chunk.iter().map(|&i| &data[i]).collect();
            let batch = batch_of(&part);
            let mut tape = Tape::new();
            let ev = model.encoder.params().bind(&mut tape);
            let hv = model.head_params.bind(&mut tape);
            let (enc, stats) = model.encoder.forward(&mut tape, &ev, &batch, None, BnUsage::Batch)?;
            let out = model.head.apply(&mut tape, &hv, enc.graph)?;
            let loss = batch_loss(&mut tape, out, task, &part)?;
            let mut grads = tape.backward(loss);
            let ge: Vec<_> = ev.iter().map(|&v| grads.take(v)).collect();
            let gh: Vec<_> = hv.iter().map(|&v| grads.take(v)).collect();
            adam_enc.step(model.encoder.params_mut().values_mut(), &ge, config.finetune_lr)?;
            adam_head.step(model.head_params.values_mut(), &gh, config.finetune_lr)?;
            model.encoder.update_running_stats(&stats);
        }

        let all: Vec<&Sample> = data.iter().collect();
        let preds = model.predict(&all, config.finetune_batch_size)?;
        let mut rows = Vec::new();
        let mut summary = [None; 3];
        for (pi, part) in Partition::ALL.into_iter().enumerate() {
            let idx = split.indices(part);
            let p: Vec<Vec<f64>> = idx.iter().map(|&i| preds[i].clone()).collect();
            let per_task = task_metrics(task, data, &idx, &p);
            summary[pi] = mean_defined(&per_task);
            for (t, v) in per_task.iter().enumerate() {
                if let Some(v) = v {
                    rows.push(MetricRow { task: t.to_string(), split: part, metric: task.metric_name(), value: *v });
                }
            }
            if let Some(m) = summary[pi] {
                rows.push(MetricRow { task: "mean".into(), split: part, metric: task.metric_name(), value: m });
            }
        }
        train_history.push(summary[0].unwrap_or(f64::NAN));
        // Without a usable validation score the latest epoch wins.
        let score = summary[1];
        let replace = match (&best, score) {
            (None, _) => true,
            (Some((b, _, _)), Some(s)) => b.is_nan() || better(s, *b),
            (Some(_), None) => true,
        };
        if replace {
            best = Some((score.unwrap_or(f64::NAN), epoch, rows));
        }
    }
    let (_, selected_epoch, rows) = best.ok_or(DownstreamError::EmptyDataset)?;
    Ok((
        model,
        FinetuneReport {
            rows,
            selected_epoch,
            train_history,
        },
    ))
}
