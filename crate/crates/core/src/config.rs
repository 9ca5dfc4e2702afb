//! Line-based `key=value` run configuration with `#` comments.

use std::fmt::Write;

use thiserror::Error;

use crate::downstream::DownstreamConfig;
use crate::encoder::EncoderConfig;
use crate::fragmenter::{AdjacencyMode, FragmentConfig};
use crate::pretrain::TrainerConfig;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected key=value, got '{text}'")]
    Syntax { line: usize, text: String },
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("invalid value '{value}' for '{key}': {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("duplicate config key '{0}'")]
    DuplicateKey(String),
}

/// Everything a pipeline run is parameterised by.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub encoder: EncoderConfig,
    pub trainer: TrainerConfig,
    pub fragment: FragmentConfig,
    pub downstream: DownstreamConfig,
}

fn parse<V: std::str::FromStr>(key: &str, value: &str) -> Result<V, ConfigError>
where
    V::Err: std::fmt::Display,
{
    value.parse().map_err(|e: V::Err| ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>, ConfigError> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Every key with its current value, in a stable order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let (e, t, f, d) = (&self.encoder, &self.trainer, &self.fragment, &self.downstream);
        vec![
            ("node_layers", e.node_layers.to_string()),
            ("hidden", e.hidden.to_string()),
            ("fragment_layer_positions", join(&e.fragment_layer_positions)),
            ("frag_gnn_layers", e.frag_gnn_layers.to_string()),
            ("use_fragments", e.use_fragments.to_string()),
            ("use_fragment_mp", e.use_fragment_mp.to_string()),
            ("gin_epsilon", e.gin_epsilon.to_string()),
            ("mask_ratio", t.mask_ratio.to_string()),
            ("lr", t.lr.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("epochs", t.epochs.to_string()),
            ("tau_start", t.tau_start.to_string()),
            ("tau_end", t.tau_end.to_string()),
            ("loss_weight", t.loss_weight.to_string()),
            ("predictor_depth", t.predictor_depth.to_string()),
            ("target_layers", t.target_layers.to_string()),
            ("seed", t.seed.to_string()),
            ("checkpoint_every", t.checkpoint_every.to_string()),
            (
                "adjacency_mode",
                match f.mode {
                    AdjacencyMode::Literal => "literal",
                    AdjacencyMode::ArticulationRouted => "routed",
                }
                .to_string(),
            ),
            ("articulation", f.articulation.to_string()),
            ("junction_threshold", f.junction_threshold.to_string()),
            ("finetune_lr", d.finetune_lr.to_string()),
            ("finetune_epochs", d.finetune_epochs.to_string()),
            ("finetune_batch_size", d.finetune_batch_size.to_string()),
            ("probe_lr", d.probe_lr.to_string()),
            ("probe_epochs", d.probe_epochs.to_string()),
            ("probe_holdout", d.probe_holdout.to_string()),
        ]
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        let (e, t, f, d) = (
            &mut self.encoder,
            &mut self.trainer,
            &mut self.fragment,
            &mut self.downstream,
        );
        match key {
            "node_layers" => e.node_layers = parse(key, v)?,
            "hidden" => e.hidden = parse(key, v)?,
            "fragment_layer_positions" => e.fragment_layer_positions = parse_list(key, v)?,
            "frag_gnn_layers" => e.frag_gnn_layers = parse(key, v)?,
            "use_fragments" => e.use_fragments = parse(key, v)?,
            "use_fragment_mp" => e.use_fragment_mp = parse(key, v)?,
            "gin_epsilon" => e.gin_epsilon = parse(key, v)?,
            "mask_ratio" => t.mask_ratio = parse(key, v)?,
            "lr" => t.lr = parse(key, v)?,
            "batch_size" => t.batch_size = parse(key, v)?,
            "epochs" => t.epochs = parse(key, v)?,
            "tau_start" => t.tau_start = parse(key, v)?,
            "tau_end" => t.tau_end = parse(key, v)?,
            "loss_weight" => t.loss_weight = parse(key, v)?,
            "predictor_depth" => t.predictor_depth = parse(key, v)?,
            "target_layers" => t.target_layers = parse(key, v)?,
            "seed" => t.seed = parse(key, v)?,
            "checkpoint_every" => t.checkpoint_every = parse(key, v)?,
            "adjacency_mode" => {
                f.mode = match v {
                    "literal" => AdjacencyMode::Literal,
                    "routed" => AdjacencyMode::ArticulationRouted,
                    _ => {
                        return Err(ConfigError::InvalidValue {
                            key: key.into(),
                            value: v.into(),
                            reason: "expected literal or routed".into(),
                        })
                    }
                }
            }
            "articulation" => f.articulation = parse(key, v)?,
            "junction_threshold" => f.junction_threshold = parse(key, v)?,
            "finetune_lr" => d.finetune_lr = parse(key, v)?,
            "finetune_epochs" => d.finetune_epochs = parse(key, v)?,
            "finetune_batch_size" => d.finetune_batch_size = parse(key, v)?,
            "probe_lr" => d.probe_lr = parse(key, v)?,
            "probe_epochs" => d.probe_epochs = parse(key, v)?,
            "probe_holdout" => d.probe_holdout = parse(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Checks cross-field constraints once all keys are applied.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key: &str, reason: String| ConfigError::InvalidValue {
            key: key.into(),
            value: String::new(),
            reason,
        };
        self.encoder
            .validate()
            .map_err(|e| invalid("encoder", e.to_string()))?;
        self.trainer
            .validate(&self.encoder)
            .map_err(|e| invalid("trainer", e.to_string()))?;
        if self.fragment.junction_threshold < 2 {
            return Err(invalid("junction_threshold", "must be at least 2".into()));
        }
        self.downstream
            .validate()
            .map_err(|e| invalid("downstream", e.to_string()))?;
        Ok(())
    }

    /// Applies `key=value` lines over the defaults; blank lines and `#` comments are skipped.
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut seen = std::collections::BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: raw.to_string(),
                });
            };
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(ConfigError::DuplicateKey(k.to_string()));
            }
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            writeln!(out, "{k}={v}").unwrap();
        }
        out
    }
}
