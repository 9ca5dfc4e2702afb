use super::layers::EdgeIndex;
use crate::fragmenter::{FragmentDecomposition, FragmentVocabulary, VOCAB_SIZE};
use crate::molgraph::{featurize, MolecularGraph, FEATURE_DIM};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Disjoint union of graphs with per-graph bookkeeping. Node and fragment
/// indices are batch-global; `node_offsets[g]..node_offsets[g+1]` are graph `g`'s nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphBatch<T> {
    pub features: Tensor<T>,
    pub node_edges: EdgeIndex,
    pub node_graph: Vec<usize>,
    pub node_offsets: Vec<usize>,
    /// One-hot fragment types, `m×|Voc|`.
    pub frag_onehot: Tensor<T>,
    /// One-hot scaled by fragment size.
    pub frag_onehot_sized: Tensor<T>,
    pub frag_edges: EdgeIndex,
    pub frag_graph: Vec<usize>,
    pub frag_offsets: Vec<usize>,
    /// Node side of each node–fragment incidence pair.
    pub inc_node: Vec<usize>,
    /// Fragment side of each incidence pair.
    pub inc_frag: Vec<usize>,
}

impl<T: Scalar> GraphBatch<T> {
    pub fn new(items: &[(&MolecularGraph, &FragmentDecomposition)]) -> Self {
        let vocab = FragmentVocabulary;
        let mut feats = Vec::new();
        let (mut node_graph, mut frag_graph) = (Vec::new(), Vec::new());
        let (mut node_offsets, mut frag_offsets) = (vec![0], vec![0]);
        let (mut nsrc, mut nsrc_edges) = (0, Vec::new());
        let mut fedges = Vec::new();
        let (mut onehot, mut sized) = (Vec::new(), Vec::new());
        let (mut inc_node, mut inc_frag) = (Vec::new(), Vec::new());
        let mut foff = 0;
        for (g, (graph, d)) in items.iter().enumerate() {
            let n = graph.atom_count();
            feats.extend_from_slice(featurize::<T>(graph).data());
            node_graph.extend(std::iter::repeat_n(g, n));
            nsrc_edges.extend(graph.bonds().iter().map(|b| (b.a + nsrc, b.b + nsrc)));
            for f in &d.fragments {
                let mut row = vec![T::zero(); VOCAB_SIZE];
                row[vocab.vocab_index(f)] = T::one();
                onehot.extend_from_slice(&row);
                row[vocab.vocab_index(f)] = T::from_usize(f.nodes.len()).unwrap();
                sized.extend_from_slice(&row);
            }
            fedges.extend(d.frag_edges().into_iter().map(|(a, b)| (a + foff, b + foff)));
            for (v, p) in d.incidence_pairs() {
                inc_node.push(v + nsrc);
                inc_frag.push(p + foff);
            }
            frag_graph.extend(std::iter::repeat_n(g, d.fragments.len()));
            nsrc += n;
            foff += d.fragments.len();
            node_offsets.push(nsrc);
            frag_offsets.push(foff);
        }
        Self {
            features: Tensor::new(vec![nsrc, FEATURE_DIM], feats).expect("feature rows"),
            node_edges: EdgeIndex::undirected(nsrc, nsrc_edges),
            node_graph,
            node_offsets,
            frag_onehot: Tensor::new(vec![foff, VOCAB_SIZE], onehot).expect("fragment rows"),
            frag_onehot_sized: Tensor::new(vec![foff, VOCAB_SIZE], sized).expect("fragment rows"),
            frag_edges: EdgeIndex::undirected(foff, fedges),
            frag_graph,
            frag_offsets,
            inc_node,
            inc_frag,
        }
    }

    pub fn graph_count(&self) -> usize {
        self.node_offsets.len() - 1
    }

    pub fn node_count(&self) -> usize {
        self.node_graph.len()
    }

    pub fn fragment_count(&self) -> usize {
        self.frag_graph.len()
    }
}

/// Masked node and fragment indices (batch-global, ascending).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MaskPlan {
    pub nodes: Vec<usize>,
    pub fragments: Vec<usize>,
}

impl MaskPlan {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.fragments.is_empty()
    }
}
