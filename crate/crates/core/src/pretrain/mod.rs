//! Masked embedding prediction: a context encoder sees masked graphs, a
//! gradient-free EMA prefix of it encodes the clean graphs, and small
//! predictors regress the target embeddings of the masked nodes and fragments.

mod checkpoint;
mod predictor;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CheckpointError, CHECKPOINT_VERSION,
};
pub use predictor::Predictors;

use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::Rng as _;
use thiserror::Error;

use crate::encoder::{BnUsage, EncoderConfig, EncoderError, GraphBatch, HierarchicalEncoder, MaskPlan};
use crate::fragmenter::{fragment, FragmentConfig, FragmentDecomposition, FragmentError};
use crate::molgraph::MolecularGraph;
use crate::scalar::Scalar;
use crate::tensor::{ema_update, seeded_rng, AdamState, BnStats, Rng, Tape, Tensor, TensorError, Var};

#[derive(Debug, Error)]
pub enum PretrainError {
    #[error("mask ratio must lie in [0, 1), got {0}")]
    InvalidRatio(f64),
    #[error("invalid trainer config: {0}")]
    InvalidConfig(String),
    #[error("config mismatch: {0}")]
    ConfigMismatch(String),
    #[error("dataset has no molecules")]
    EmptyDataset,
    #[error("empty batch")]
    EmptyBatch,
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Fragment(#[from] FragmentError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    /// Bernoulli masking probability, shared by nodes and fragments.
    pub mask_ratio: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub tau_start: f64,
    pub tau_end: f64,
    /// Weight of the node term; the fragment term gets `1 − loss_weight`.
    pub loss_weight: f64,
    /// Message-passing depth of the node predictor and MLP depth of the fragment predictor.
    pub predictor_depth: usize,
    /// Node layers kept by the target encoder.
    pub target_layers: usize,
    pub seed: u64,
    /// Checkpoint cadence in epochs; 0 writes only the final checkpoint.
    pub checkpoint_every: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            mask_ratio: 0.35,
            lr: 1e-4,
            batch_size: 32,
            epochs: 100,
            tau_start: 0.996,
            tau_end: 1.0,
            loss_weight: 0.5,
            predictor_depth: 2,
            target_layers: 1,
            seed: 0,
            checkpoint_every: 0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self, encoder: &EncoderConfig) -> Result<(), PretrainError> {
        let bad = |m: String| Err(PretrainError::InvalidConfig(m));
        if !(0.0..1.0).contains(&self.mask_ratio) {
            return Err(PretrainError::InvalidRatio(self.mask_ratio));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.loss_weight) {
            return bad(format!("loss_weight must lie in [0, 1], got {}", self.loss_weight));
        }
        let unit = 0.0..=1.0;
        if !unit.contains(&self.tau_start) || !unit.contains(&self.tau_end) || self.tau_start > self.tau_end {
            return bad(format!(
                "tau schedule {} -> {} must be non-decreasing within [0, 1]",
                self.tau_start, self.tau_end
            ));
        }
        if self.predictor_depth == 0 {
            return bad("predictor_depth must be at least 1".into());
        }
        if self.target_layers == 0 || self.target_layers > encoder.node_layers {
            return Err(PretrainError::ConfigMismatch(format!(
                "target_layers {} outside 1..={}",
                self.target_layers, encoder.node_layers
            )));
        }
        Ok(())
    }

    /// EMA decay at `step` (0-based) of `total`: linear from `tau_start` to `tau_end`.
    pub fn tau(&self, step: u64, total: u64) -> f64 {
        if total <= 1 {
            return self.tau_end;
        }
        let s = step.min(total - 1) as f64 / (total - 1) as f64;
        self.tau_start + (self.tau_end - self.tau_start) * s
    }
}

/// Independent Bernoulli(`p`) draws over the graph's nodes, then its fragments.
pub fn sample_mask(
    graph: &MolecularGraph,
    decomp: &FragmentDecomposition,
    p: f64,
    rng: &mut Rng,
) -> Result<MaskPlan, PretrainError> {
    sample_mask_counts(graph.atom_count(), decomp.fragment_count(), p, rng)
}

pub fn sample_mask_counts(nodes: usize, fragments: usize, p: f64, rng: &mut Rng) -> Result<MaskPlan, PretrainError> {
    if !(0.0..1.0).contains(&p) {
        return Err(PretrainError::InvalidRatio(p));
    }
    let mut draw = |n: usize| (0..n).filter(|_| rng.random::<f64>() < p).collect();
    let nodes = draw(nodes);
    let fragments = draw(fragments);
    Ok(MaskPlan { nodes, fragments })
}

/// Per-graph plans concatenated with batch offsets, in graph order.
pub fn sample_batch_mask<T: Scalar>(batch: &GraphBatch<T>, p: f64, rng: &mut Rng) -> Result<MaskPlan, PretrainError> {
    let mut plan = MaskPlan::default();
    for g in 0..batch.graph_count() {
        let (n0, f0) = (batch.node_offsets[g], batch.frag_offsets[g]);
        let n = batch.node_offsets[g + 1] - n0;
        let m = batch.frag_offsets[g + 1] - f0;
        let local = sample_mask_counts(n, m, p, rng)?;
        plan.nodes.extend(local.nodes.iter().map(|v| v + n0));
        plan.fragments.extend(local.fragments.iter().map(|f| f + f0));
    }
    Ok(plan)
}

/// Row weights realising `mean over graphs of [α·mean_{V_m} + (1−α)·mean_{F_m}]`
/// for the masked rows in plan order. A graph with no masked rows of a kind
/// contributes nothing to that term.
pub fn loss_weights<T: Scalar>(batch: &GraphBatch<T>, plan: &MaskPlan, alpha: f64) -> (Vec<T>, Vec<T>) {
    let g = batch.graph_count();
    let weigh = |rows: &[usize], owner: &[usize], share: f64| {
        let mut count = vec![0usize; g];
        rows.iter().for_each(|&r| count[owner[r]] += 1);
        rows.iter()
            .map(|&r| T::lit(share / (count[owner[r]] * g) as f64))
            .collect::<Vec<T>>()
    };
    (
        weigh(&plan.nodes, &batch.node_graph, alpha),
        weigh(&plan.fragments, &batch.frag_graph, 1.0 - alpha),
    )
}

/// Tape handles of one recorded objective.
#[derive(Debug, Clone)]
pub struct Objective<T> {
    pub loss: Var,
    pub context_vars: Vec<Var>,
    pub predictor_vars: Vec<Var>,
    pub target_vars: Vec<Var>,
    /// Context batch-norm statistics for the running-stat update.
    pub bn_stats: Vec<BnStats<T>>,
    /// Target node embeddings of the clean batch.
    pub target_nodes: Tensor<T>,
}

/// One row of the metrics CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub step: u64,
    pub epoch: usize,
    pub loss: f64,
    pub tau: f64,
    /// Mean per-dimension variance of the target node embeddings.
    pub target_var: f64,
    /// Largest absolute gradient reaching any target parameter.
    pub target_grad_max: f64,
}

pub fn metrics_csv(rows: &[StepReport]) -> String {
    let mut out = String::from("step,epoch,loss,tau,target_var\n");
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.step, r.epoch, r.loss, r.tau, r.target_var).unwrap();
    }
    out
}

/// Context encoder, EMA target, predictors and their optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Pretrainer<T> {
    pub(crate) config: TrainerConfig,
    pub(crate) fragment_config: FragmentConfig,
    pub(crate) context: HierarchicalEncoder<T>,
    pub(crate) target: HierarchicalEncoder<T>,
    pub(crate) predictors: Predictors<T>,
    pub(crate) adam_context: AdamState<T>,
    pub(crate) adam_predictor: AdamState<T>,
    /// Completed train steps; drives the τ schedule.
    pub(crate) step: u64,
    pub(crate) total_steps: u64,
    rng: Rng,
}

fn adam_for<T: Scalar>(values: &[Tensor<T>]) -> AdamState<T> {
    AdamState::new(values.iter().map(Tensor::shape))
}

impl<T: Scalar> Pretrainer<T> {
    /// Parameters are drawn from `seeded_rng(config.seed)` in a fixed order
    /// (context, then predictors); the same stream then drives masks and shuffles.
    pub fn new(
        encoder: EncoderConfig,
        config: TrainerConfig,
        fragment_config: FragmentConfig,
    ) -> Result<Self, PretrainError> {
        encoder.validate()?;
        config.validate(&encoder)?;
        let mut rng = seeded_rng(config.seed);
        let context = HierarchicalEncoder::new(encoder, &mut rng)?;
        let target = context.prefix(config.target_layers)?;
        let predictors = Predictors::new(context.config(), config.predictor_depth, &mut rng);
        Ok(Self {
            adam_context: adam_for(context.params().values()),
            adam_predictor: adam_for(predictors.params().values()),
            config,
            fragment_config,
            context,
            target,
            predictors,
            step: 0,
            total_steps: 0,
            rng,
        })
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn fragment_config(&self) -> &FragmentConfig {
        &self.fragment_config
    }

    pub fn context(&self) -> &HierarchicalEncoder<T> {
        &self.context
    }

    pub fn context_mut(&mut self) -> &mut HierarchicalEncoder<T> {
        &mut self.context
    }

    pub fn target(&self) -> &HierarchicalEncoder<T> {
        &self.target
    }

    pub fn predictors(&self) -> &Predictors<T> {
        &self.predictors
    }

    pub fn predictors_mut(&mut self) -> &mut Predictors<T> {
        &mut self.predictors
    }

    pub fn adam_states(&self) -> (&AdamState<T>, &AdamState<T>) {
        (&self.adam_context, &self.adam_predictor)
    }

    pub fn steps_done(&self) -> u64 {
        self.step
    }

    /// Horizon of the τ schedule; set by [`Pretrainer::fit`], or manually for single steps.
    pub fn set_total_steps(&mut self, total: u64) {
        self.total_steps = total;
    }

    pub fn current_tau(&self) -> f64 {
        self.config.tau(self.step, self.total_steps.max(self.step + 1))
    }

    pub fn into_context(self) -> HierarchicalEncoder<T> {
        self.context
    }

    /// Records context (masked), target (clean, detached), predictors and the loss on `tape`.
    pub fn objective(&self, tape: &mut Tape<T>, batch: &GraphBatch<T>, plan: &MaskPlan) -> Result<Objective<T>, PretrainError> {
        let target_vars = self.target.params().bind(tape);
        let (tgt, _) = self.target.forward(tape, &target_vars, batch, None, BnUsage::Batch)?;
        let target_nodes = tape.value(tgt.nodes).clone();
        let target_frags = tgt.fragments.map(|f| tape.value(f).clone());

        let context_vars = self.context.params().bind(tape);
        let (ctx, bn_stats) = self.context.forward(tape, &context_vars, batch, Some(plan), BnUsage::Batch)?;
        let predictor_vars = self.predictors.params().bind(tape);
        let (wn, wf) = loss_weights(batch, plan, self.config.loss_weight);

        let mut terms = Vec::new();
        if let Some(pred) = self.predictors.predict_nodes(tape, &predictor_vars, ctx.nodes, &plan.nodes, batch)? {
            let target = target_nodes.select_rows(&plan.nodes)?;
            terms.push(tape.row_sq_dist(pred, &target, &wn)?);
        }
        if let (Some(f), Some(tf)) = (ctx.fragments, &target_frags) {
            if let Some(pred) = self.predictors.predict_fragments(tape, &predictor_vars, f, &plan.fragments)? {
                let target = tf.select_rows(&plan.fragments)?;
                terms.push(tape.row_sq_dist(pred, &target, &wf)?);
            }
        }
        let mut loss = match terms.first() {
            Some(&t) => t,
            None => tape.constant(Tensor::scalar(T::zero())),
        };
        for &t in terms.iter().skip(1) {
            loss = tape.add(loss, t)?;
        }
        Ok(Objective {
            loss,
            context_vars,
            predictor_vars,
            target_vars,
            bn_stats,
            target_nodes,
        })
    }

    /// One optimisation step on a fixed mask.
    pub fn train_step_with_plan(&mut self, batch: &GraphBatch<T>, plan: &MaskPlan, epoch: usize) -> Result<StepReport, PretrainError> {
        if batch.graph_count() == 0 {
            return Err(PretrainError::EmptyBatch);
        }
        let mut tape = Tape::new();
        let obj = self.objective(&mut tape, batch, plan)?;
        let mut grads = tape.backward(obj.loss);
        let target_grad_max = obj
            .target_vars
            .iter()
            .filter_map(|&v| grads.get(v))
            .flat_map(|g| g.data().iter().map(|x| x.abs().as_f64()))
            .fold(0.0, f64::max);
        let gc: Vec<_> = obj.context_vars.iter().map(|&v| grads.take(v)).collect();
        let gp: Vec<_> = obj.predictor_vars.iter().map(|&v| grads.take(v)).collect();
        let loss = tape.value(obj.loss).item().as_f64();

        let lr = self.config.lr;
        self.adam_context.step(self.context.params_mut().values_mut(), &gc, lr)?;
        self.adam_predictor.step(self.predictors.params_mut().values_mut(), &gp, lr)?;
        self.context.update_running_stats(&obj.bn_stats);

        let tau = self.current_tau();
        self.ema_step(tau)?;
        let var = obj.target_nodes.column_variance();
        let target_var = var.iter().map(|v| v.as_f64()).sum::<f64>() / var.len().max(1) as f64;
        let report = StepReport {
            step: self.step,
            epoch,
            loss,
            tau,
            target_var,
            target_grad_max,
        };
        self.step += 1;
        Ok(report)
    }

    /// Samples a mask from the trainer's stream and takes one step.
    pub fn train_step(&mut self, batch: &GraphBatch<T>, epoch: usize) -> Result<StepReport, PretrainError> {
        let mut plan = sample_batch_mask(batch, self.config.mask_ratio, &mut self.rng)?;
        if !self.context.config().use_fragments {
            plan.fragments.clear();
        }
        self.train_step_with_plan(batch, &plan, epoch)
    }

    /// `target ← τ·target + (1−τ)·context`, pairing parameters by name.
    pub fn ema_step(&mut self, tau: f64) -> Result<(), PretrainError> {
        let names = self.target.params().names().to_vec();
        for (i, name) in names.iter().enumerate() {
            let src = self
                .context
                .params()
                .by_name(name)
                .ok_or_else(|| PretrainError::ConfigMismatch(format!("context lacks {name}")))?;
            ema_update(&mut self.target.params_mut().values_mut()[i], src, tau)?;
        }
        Ok(())
    }

    /// Epoch loop with shuffled batches (the last one may be short).
    /// `on_epoch` runs after each epoch with the 1-based epoch number.
    pub fn fit(
        &mut self,
        data: &[(MolecularGraph, FragmentDecomposition)],
        mut on_epoch: impl FnMut(&Self, usize) -> Result<(), PretrainError>,
    ) -> Result<Vec<StepReport>, PretrainError> {
        if data.is_empty() {
            return Err(PretrainError::EmptyDataset);
        }
        let bs = self.config.batch_size;
        let per_epoch = data.len().div_ceil(bs) as u64;
        self.total_steps = self.step + per_epoch * self.config.epochs as u64;
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut rows = Vec::new();
        for epoch in 1..=self.config.epochs {
            order.shuffle(&mut self.rng);
            for chunk in order.chunks(bs) {
                let items: Vec<_> = chunk.iter().map(|&i| (&data[i].0, &data[i].1)).collect();
                let batch = GraphBatch::new(&items);
                rows.push(self.train_step(&batch, epoch)?);
            }
            on_epoch(self, epoch)?;
        }
        Ok(rows)
    }
}

/// Fragments every molecule with `config`.
pub fn decompose_all(
    graphs: impl IntoIterator<Item = MolecularGraph>,
    config: &FragmentConfig,
) -> Result<Vec<(MolecularGraph, FragmentDecomposition)>, PretrainError> {
    graphs
        .into_iter()
        .map(|g| {
            let d = fragment(&g, config)?;
            Ok((g, d))
        })
        .collect()
}

/// Builds a trainer and runs the full schedule over `graphs`.
pub fn pretrain<T: Scalar>(
    graphs: Vec<MolecularGraph>,
    encoder: EncoderConfig,
    trainer: TrainerConfig,
    fragment_config: FragmentConfig,
    on_epoch: impl FnMut(&Pretrainer<T>, usize) -> Result<(), PretrainError>,
) -> Result<(Pretrainer<T>, Vec<StepReport>), PretrainError> {
    if graphs.is_empty() {
        return Err(PretrainError::EmptyDataset);
    }
    let data = decompose_all(graphs, &fragment_config)?;
    let mut p = Pretrainer::new(encoder, trainer, fragment_config)?;
    let rows = p.fit(&data, on_epoch)?;
    Ok((p, rows))
}
