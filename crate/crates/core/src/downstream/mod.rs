//! Transfer evaluation: fragment-based scaffold splits, fine-tuning with a
//! linear head on mean-pooled node embeddings, and frozen-embedding probes.

mod finetune;
mod metrics;
mod probe;
mod split;

pub use finetune::{finetune, FinetuneReport, MetricRow, PropertyModel};
pub use metrics::{rmse, roc_auc};
pub use probe::{
    count_bucket, graph_embeddings, holdout_split, linear_probe, probe_csv, probe_fragment_counts, ProbeRow,
    COUNT_BUCKETS,
};
pub use split::{scaffold_keys, scaffold_split, Partition, ScaffoldKey, SplitAssignment, SplitFractions};

use thiserror::Error;

use crate::encoder::{EncoderConfig, EncoderError};
use crate::fragmenter::{FragmentDecomposition, FragmentError};
use crate::molgraph::MolecularGraph;
use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum DownstreamError {
    #[error("dataset has no usable molecules")]
    EmptyDataset,
    #[error("labels contain a single class")]
    DegenerateLabels,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("config mismatch: {0}")]
    ConfigMismatch(String),
    #[error("invalid label: {0}")]
    InvalidLabel(String),
    #[error("invalid downstream config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Fragment(#[from] FragmentError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Classification,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub num_tasks: usize,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<(), DownstreamError> {
        if self.num_tasks == 0 {
            return Err(DownstreamError::InvalidConfig("num_tasks must be at least 1".into()));
        }
        Ok(())
    }

    pub fn metric_name(&self) -> &'static str {
        match self.kind {
            TaskKind::Classification => "roc_auc",
            TaskKind::Regression => "rmse",
        }
    }

    /// One entry per task; classification labels must be 0 or 1.
    pub fn check_labels(&self, labels: &[Option<f64>]) -> Result<(), DownstreamError> {
        if labels.len() != self.num_tasks {
            return Err(DownstreamError::InvalidLabel(format!(
                "{} labels for {} tasks",
                labels.len(),
                self.num_tasks
            )));
        }
        if self.kind == TaskKind::Classification {
            if let Some(v) = labels.iter().flatten().find(|&&v| v != 0.0 && v != 1.0) {
                return Err(DownstreamError::InvalidLabel(format!("class label {v} is not 0 or 1")));
            }
        }
        Ok(())
    }
}

/// A fragmented molecule with per-task labels (`None` = missing).
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub graph: MolecularGraph,
    pub decomp: FragmentDecomposition,
    pub labels: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DownstreamConfig {
    pub finetune_lr: f64,
    pub finetune_epochs: usize,
    pub finetune_batch_size: usize,
    pub probe_lr: f64,
    pub probe_epochs: usize,
    /// Fraction of molecules held out for probe accuracy.
    pub probe_holdout: f64,
}

impl Default for DownstreamConfig {
    fn default() -> Self {
        Self {
            finetune_lr: 1e-3,
            finetune_epochs: 100,
            finetune_batch_size: 32,
            probe_lr: 1e-2,
            probe_epochs: 300,
            probe_holdout: 0.2,
        }
    }
}

impl DownstreamConfig {
    pub fn validate(&self) -> Result<(), DownstreamError> {
        let bad = |m: &str| Err(DownstreamError::InvalidConfig(m.into()));
        if !(self.finetune_lr > 0.0 && self.finetune_lr.is_finite()) || !(self.probe_lr > 0.0 && self.probe_lr.is_finite()) {
            return bad("learning rates must be positive");
        }
        if self.finetune_epochs == 0 || self.finetune_batch_size == 0 {
            return bad("finetune_epochs and finetune_batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.probe_holdout) || self.probe_holdout == 0.0 {
            return bad("probe_holdout must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Rejects an encoder whose width differs from the one a caller expects.
pub fn check_encoder(expected: &EncoderConfig, found: &EncoderConfig) -> Result<(), DownstreamError> {
    if expected != found {
        return Err(DownstreamError::ConfigMismatch(format!(
            "expected hidden={} layers={}, checkpoint has hidden={} layers={}",
            expected.hidden, expected.node_layers, found.hidden, found.node_layers
        )));
    }
    Ok(())
}
