//! Two-level encoder: GIN message passing over atoms, interleaved with
//! node↔fragment exchange and fragment-graph message passing.
//!
//! Layer schedule for `l = 1..=L`:
//!
//! ```text
//! H ← BN(ReLU(MLP((1+ε)·H + A·H)))
//! if l ∈ positions:
//!     F ← MLP(concat[F, mean of member nodes])          node → fragment
//!     F ← ReLU(MLP((1+ε)·F + A_frag·F))  (repeated)     fragment → fragment
//!     H ← H + MLP(mean of containing fragments)         fragment → node
//! ```
//!
//! Initial fragment rows are `concat[X(f)·W₁, |f|·X(f)·W₂]`, each half `d/2` wide.

mod batch;
mod layers;

pub use batch::{GraphBatch, MaskPlan};
pub use layers::{gin_aggregate, EdgeIndex, Linear, Mlp};

use thiserror::Error;

use crate::fragmenter::VOCAB_SIZE;
use crate::molgraph::FEATURE_DIM;
use crate::scalar::Scalar;
use crate::tensor::{glorot_init, BnMode, BnStats, ParamId, ParamStore, Rng, Tape, Tensor, TensorError, Var};

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("invalid encoder config: {0}")]
    InvalidConfig(String),
    #[error("readout over an empty graph")]
    EmptyGraph,
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub node_layers: usize,
    pub hidden: usize,
    /// 1-based node-layer indices followed by a fragment interaction.
    pub fragment_layer_positions: Vec<usize>,
    pub frag_gnn_layers: usize,
    pub use_fragments: bool,
    pub use_fragment_mp: bool,
    pub gin_epsilon: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            node_layers: 5,
            hidden: 300,
            fragment_layer_positions: vec![2, 3],
            frag_gnn_layers: 2,
            use_fragments: true,
            use_fragment_mp: true,
            gin_epsilon: 0.0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), EncoderError> {
        let bad = |m: String| Err(EncoderError::InvalidConfig(m));
        if self.node_layers == 0 {
            return bad("node_layers must be at least 1".into());
        }
        if self.hidden == 0 || !self.hidden.is_multiple_of(2) {
            return bad(format!("hidden must be a positive even number, got {}", self.hidden));
        }
        if let Some(&p) = self
            .fragment_layer_positions
            .iter()
            .find(|&&p| p == 0 || p > self.node_layers)
        {
            return bad(format!("fragment layer position {p} outside 1..={}", self.node_layers));
        }
        if !self.gin_epsilon.is_finite() {
            return bad("gin_epsilon must be finite".into());
        }
        Ok(())
    }

    /// Same architecture truncated to the first `layers` node layers; fragment
    /// positions beyond the prefix are dropped.
    pub fn prefix(&self, layers: usize) -> Self {
        Self {
            node_layers: layers,
            fragment_layer_positions: self
                .fragment_layer_positions
                .iter()
                .copied()
                .filter(|&p| p <= layers)
                .collect(),
            ..self.clone()
        }
    }

    fn has_fragment_layer(&self, l: usize) -> bool {
        self.use_fragments && self.fragment_layer_positions.contains(&l)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct NodeLayer {
    mlp: Mlp,
    gamma: ParamId,
    beta: ParamId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct FragmentLayer {
    node_to_frag: Mlp,
    frag_gnn: Vec<Mlp>,
    frag_to_node: Mlp,
}

/// Batch-norm statistics source for a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnUsage {
    /// Current batch statistics; they are returned for running-stat tracking.
    Batch,
    /// Tracked running statistics (evaluation).
    Running,
}

/// Forward outputs as tape handles.
#[derive(Debug, Clone, Copy)]
pub struct EncoderVars {
    /// `N×d`.
    pub nodes: Var,
    /// `m×d`; absent when fragments are disabled.
    pub fragments: Option<Var>,
    /// `G×d`, one row per graph.
    pub graph: Var,
}

/// Forward outputs as plain tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput<T> {
    pub nodes: Tensor<T>,
    pub fragments: Tensor<T>,
    pub graph: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalEncoder<T> {
    config: EncoderConfig,
    params: ParamStore<T>,
    /// Running mean/variance per node layer.
    running: Vec<BnStats<T>>,
    embed: Linear,
    node_mask: ParamId,
    frag_mask: ParamId,
    frag_w1: ParamId,
    frag_w2: ParamId,
    node_layers: Vec<NodeLayer>,
    /// Indexed by node layer; `None` where no interaction follows.
    frag_layers: Vec<Option<FragmentLayer>>,
}

pub const BN_MOMENTUM: f64 = 0.9;

impl<T: Scalar> HierarchicalEncoder<T> {
    /// Parameter names are stable across configs, so a prefix encoder shares
    /// names with the corresponding layers of a deeper one.
    pub fn new(config: EncoderConfig, rng: &mut Rng) -> Result<Self, EncoderError> {
        config.validate()?;
        let d = config.hidden;
        let mut p = ParamStore::new();
        let embed = Linear::new(&mut p, "embed", FEATURE_DIM, d, rng);
        let node_mask = p.add("mask.node", glorot_init(1, d, rng).reshape(vec![d])?);
        let frag_mask = p.add("mask.frag", glorot_init(1, d, rng).reshape(vec![d])?);
        let frag_w1 = p.add("frag_enc.w1", glorot_init(VOCAB_SIZE, d / 2, rng));
        let frag_w2 = p.add("frag_enc.w2", glorot_init(VOCAB_SIZE, d / 2, rng));
        let mut node_layers = Vec::new();
        let mut frag_layers = Vec::new();
        let mut running = Vec::new();
        for l in 1..=config.node_layers {
            let mlp = Mlp::new(&mut p, &format!("node.{l}.mlp"), &[d, d, d], rng);
            let gamma = p.add(format!("node.{l}.bn.gamma"), Tensor::full(&[d], T::one()));
            let beta = p.add(format!("node.{l}.bn.beta"), Tensor::zeros(&[d]));
            node_layers.push(NodeLayer { mlp, gamma, beta });
            running.push(BnStats {
                mean: vec![T::zero(); d],
                var: vec![T::one(); d],
            });
            frag_layers.push(config.has_fragment_layer(l).then(|| FragmentLayer {
                node_to_frag: Mlp::new(&mut p, &format!("frag.{l}.n2f"), &[2 * d, d, d], rng),
                frag_gnn: (0..config.frag_gnn_layers)
                    .map(|k| Mlp::new(&mut p, &format!("frag.{l}.gnn.{k}"), &[d, d, d], rng))
                    .collect(),
                frag_to_node: Mlp::new(&mut p, &format!("frag.{l}.f2n"), &[d, d, d], rng),
            }));
        }
        Ok(Self {
            config,
            params: p,
            running,
            embed,
            node_mask,
            frag_mask,
            frag_w1,
            frag_w2,
            node_layers,
            frag_layers,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn running_stats(&self) -> &[BnStats<T>] {
        &self.running
    }

    pub fn running_stats_mut(&mut self) -> &mut [BnStats<T>] {
        &mut self.running
    }

    /// `running = m·running + (1−m)·batch` per node layer.
    pub fn update_running_stats(&mut self, batch: &[BnStats<T>]) {
        let m = T::lit(BN_MOMENTUM);
        let one_m = T::one() - m;
        for (r, b) in self.running.iter_mut().zip(batch) {
            for (x, &y) in r.mean.iter_mut().zip(&b.mean) {
                *x = m * *x + one_m * y;
            }
            for (x, &y) in r.var.iter_mut().zip(&b.var) {
                *x = m * *x + one_m * y;
            }
        }
    }

    /// Encoder restricted to its first `layers` node layers, with parameters and
    /// running statistics copied by name.
    pub fn prefix(&self, layers: usize) -> Result<Self, EncoderError> {
        if layers == 0 || layers > self.config.node_layers {
            return Err(EncoderError::InvalidConfig(format!(
                "prefix of {layers} layers from a {}-layer encoder",
                self.config.node_layers
            )));
        }
        // Construction only fixes the layout; every value is overwritten below.
        let mut out = Self::new(self.config.prefix(layers), &mut crate::tensor::seeded_rng(0))?;
        for i in 0..out.params.len() {
            let id = ParamId(i);
            let name = out.params.name(id).to_string();
            let src = self.params.by_name(&name).expect("prefix parameter exists in source");
            *out.params.get_mut(id) = src.clone();
        }
        out.running.clone_from_slice(&self.running[..layers]);
        Ok(out)
    }

    /// Initial fragment rows `concat[X·W₁, (|f|·X)·W₂]`.
    pub fn encode_fragments(&self, tape: &mut Tape<T>, vars: &[Var], batch: &GraphBatch<T>) -> Result<Var, EncoderError> {
        let x = tape.constant(batch.frag_onehot.clone());
        let xs = tape.constant(batch.frag_onehot_sized.clone());
        let a = tape.matmul(x, vars[self.frag_w1.0])?;
        let b = tape.matmul(xs, vars[self.frag_w2.0])?;
        Ok(tape.concat(a, b)?)
    }

    /// Affine node embedding `X·W + b`.
    pub fn embed_nodes(&self, tape: &mut Tape<T>, vars: &[Var], batch: &GraphBatch<T>) -> Result<Var, EncoderError> {
        let x = tape.constant(batch.features.clone());
        Ok(self.embed.apply(tape, vars, x)?)
    }

    fn epsilon(&self) -> T {
        T::lit(self.config.gin_epsilon)
    }

    fn node_layer(
        &self,
        tape: &mut Tape<T>,
        vars: &[Var],
        l: usize,
        h: Var,
        batch: &GraphBatch<T>,
        bn: BnUsage,
    ) -> Result<(Var, Option<BnStats<T>>), EncoderError> {
        let layer = &self.node_layers[l];
        let agg = gin_aggregate(tape, h, &batch.node_edges, self.epsilon())?;
        let z = layer.mlp.apply(tape, vars, agg)?;
        let z = tape.relu(z);
        let mode = match bn {
            BnUsage::Batch => BnMode::Batch,
            BnUsage::Running => BnMode::Running {
                mean: &self.running[l].mean,
                var: &self.running[l].var,
            },
        };
        Ok(tape.batchnorm(z, vars[layer.gamma.0], vars[layer.beta.0], mode)?)
    }

    fn fragment_interaction(
        &self,
        tape: &mut Tape<T>,
        vars: &[Var],
        layer: &FragmentLayer,
        h: Var,
        f: Var,
        batch: &GraphBatch<T>,
    ) -> Result<(Var, Var), EncoderError> {
        let (n, m) = (batch.node_count(), batch.fragment_count());
        let members = tape.gather_rows(h, &batch.inc_node)?;
        let pooled = tape.segment_mean(members, &batch.inc_frag, m)?;
        let joined = tape.concat(f, pooled)?;
        let mut f = layer.node_to_frag.apply(tape, vars, joined)?;
        if self.config.use_fragment_mp {
            for mlp in &layer.frag_gnn {
                let agg = gin_aggregate(tape, f, &batch.frag_edges, self.epsilon())?;
                let z = mlp.apply(tape, vars, agg)?;
                f = tape.relu(z);
            }
        }
        let owners = tape.gather_rows(f, &batch.inc_frag)?;
        let back = tape.segment_mean(owners, &batch.inc_node, n)?;
        let inject = layer.frag_to_node.apply(tape, vars, back)?;
        Ok((tape.add(h, inject)?, f))
    }

    /// Records a forward pass on `tape`. With [`BnUsage::Batch`] the per-layer
    /// batch statistics are returned in layer order.
    pub fn forward(
        &self,
        tape: &mut Tape<T>,
        vars: &[Var],
        batch: &GraphBatch<T>,
        mask: Option<&MaskPlan>,
        bn: BnUsage,
    ) -> Result<(EncoderVars, Vec<BnStats<T>>), EncoderError> {
        if batch.node_count() == 0 {
            return Err(EncoderError::EmptyGraph);
        }
        let mut h = self.embed_nodes(tape, vars, batch)?;
        if let Some(plan) = mask.filter(|p| !p.nodes.is_empty()) {
            h = tape.replace_rows(h, vars[self.node_mask.0], &plan.nodes)?;
        }
        let mut f = None;
        if self.config.use_fragments {
            let mut init = self.encode_fragments(tape, vars, batch)?;
            if let Some(plan) = mask.filter(|p| !p.fragments.is_empty()) {
                init = tape.replace_rows(init, vars[self.frag_mask.0], &plan.fragments)?;
            }
            f = Some(init);
        }
        let mut stats = Vec::new();
        for l in 0..self.config.node_layers {
            let (next, s) = self.node_layer(tape, vars, l, h, batch, bn)?;
            h = next;
            stats.extend(s);
            if let (Some(layer), Some(fv)) = (&self.frag_layers[l], f) {
                let (nh, nf) = self.fragment_interaction(tape, vars, layer, h, fv, batch)?;
                h = nh;
                f = Some(nf);
            }
        }
        let graph = readout(tape, h, batch)?;
        Ok((
            EncoderVars {
                nodes: h,
                fragments: f,
                graph,
            },
            stats,
        ))
    }

    /// Gradient-free forward pass returning plain tensors.
    pub fn encode(&self, batch: &GraphBatch<T>, mask: Option<&MaskPlan>, bn: BnUsage) -> Result<EncoderOutput<T>, EncoderError> {
        let mut tape = Tape::new();
        let vars = self.params.bind_frozen(&mut tape);
        let (out, _) = self.forward(&mut tape, &vars, batch, mask, bn)?;
        let d = self.config.hidden;
        Ok(EncoderOutput {
            nodes: tape.value(out.nodes).clone(),
            fragments: out
                .fragments
                .map(|f| tape.value(f).clone())
                .unwrap_or_else(|| Tensor::zeros(&[0, d])),
            graph: tape.value(out.graph).clone(),
        })
    }
}

/// Mean of node rows per graph.
pub fn readout<T: Scalar>(tape: &mut Tape<T>, z: Var, batch: &GraphBatch<T>) -> Result<Var, EncoderError> {
    match tape.segment_mean(z, &batch.node_graph, batch.graph_count()) {
        Err(TensorError::EmptySegment { .. }) => Err(EncoderError::EmptyGraph),
        other => Ok(other?),
    }
}

/// Row mean of a single graph's node embeddings.
pub fn readout_rows<T: Scalar>(z: &Tensor<T>) -> Result<Vec<T>, EncoderError> {
    if z.rows() == 0 {
        return Err(EncoderError::EmptyGraph);
    }
    let n = T::from_usize(z.rows()).unwrap();
    let mut out = vec![T::zero(); z.cols()];
    for i in 0..z.rows() {
        out.iter_mut().zip(z.row(i)).for_each(|(o, &x)| *o += x);
    }
    out.iter_mut().for_each(|o| *o /= n);
    Ok(out)
}
