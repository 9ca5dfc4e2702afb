//! Vocabulary-free decomposition of a molecular graph into rings, paths and
//! articulation points, plus the fragment-level graph built from it.
//!
//! The three stages run in order:
//!
//! 1. **Rings**: a minimum cycle basis (see [`find_minimal_rings`]).
//! 2. **Paths**: on the residual graph (edges in no ring), maximal chains whose
//!    interior nodes have residual degree 2 and belong to no ring.
//! 3. **Articulation points**: singleton fragments for nodes shared by at least
//!    `junction_threshold` fragments, and for any node still uncovered.
//!
//! Fragments overlap only at connector nodes. The fragment adjacency `A^f`
//! either marks every overlapping pair ([`AdjacencyMode::Literal`]) or routes
//! overlaps through articulation fragments ([`AdjacencyMode::ArticulationRouted`]).

mod rings;
mod stats;
mod vocab;

pub use rings::find_minimal_rings;
pub use stats::{decomposition_stats, overlap_cut_report, CutReport, StatsReport};
pub use vocab::{FragmentVocabulary, VocabEntry, VOCAB_SIZE};

use std::collections::BTreeSet;

use thiserror::Error;

use crate::molgraph::MolecularGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FragmentKind {
    Ring(usize),
    Path(usize),
    Articulation,
}

impl FragmentKind {
    pub fn size(self) -> usize {
        match self {
            FragmentKind::Ring(k) | FragmentKind::Path(k) => k,
            FragmentKind::Articulation => 1,
        }
    }

    pub fn class_name(self) -> &'static str {
        match self {
            FragmentKind::Ring(_) => "ring",
            FragmentKind::Path(_) => "path",
            FragmentKind::Articulation => "articulation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fragment {
    pub kind: FragmentKind,
    /// Rings are in cycle order, paths in walk order.
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdjacencyMode {
    /// Fragments are adjacent iff they share a node.
    Literal,
    /// Fragments that overlap only at articulation-fragment nodes connect through
    /// that articulation fragment instead of directly.
    #[default]
    ArticulationRouted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FragmentConfig {
    pub mode: AdjacencyMode,
    /// Promote junction nodes to articulation fragments.
    pub articulation: bool,
    /// Minimum number of containing fragments that triggers promotion.
    pub junction_threshold: usize,
}

impl Default for FragmentConfig {
    fn default() -> Self {
        Self {
            mode: AdjacencyMode::default(),
            articulation: true,
            junction_threshold: 3,
        }
    }
}

impl FragmentConfig {
    pub fn with_mode(mode: AdjacencyMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FragmentError {
    #[error("input graph has {0} connected components")]
    DisconnectedInput(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FragmentDecomposition {
    pub fragments: Vec<Fragment>,
    /// Symmetric `m×m`, zero diagonal.
    pub frag_adjacency: Vec<Vec<bool>>,
    /// Fragment indices containing each node, ascending.
    pub memberships: Vec<Vec<usize>>,
    pub connectors: BTreeSet<usize>,
    pub owner: Vec<usize>,
}

impl FragmentDecomposition {
    pub fn fragment_count(&self) -> usize {
        self.fragments.len()
    }

    pub fn node_count(&self) -> usize {
        self.memberships.len()
    }

    /// Dense node–fragment incidence `A^nf`.
    pub fn incidence(&self) -> Vec<Vec<bool>> {
        let m = self.fragments.len();
        self.memberships
            .iter()
            .map(|fs| {
                let mut row = vec![false; m];
                fs.iter().for_each(|&f| row[f] = true);
                row
            })
            .collect()
    }

    /// Upper-triangle fragment edges `(i, j)` with `i < j`.
    pub fn frag_edges(&self) -> Vec<(usize, usize)> {
        let m = self.fragments.len();
        let mut out = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                if self.frag_adjacency[i][j] {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// `(node, fragment)` incidence pairs in node-major order.
    pub fn incidence_pairs(&self) -> Vec<(usize, usize)> {
        self.memberships
            .iter()
            .enumerate()
            .flat_map(|(v, fs)| fs.iter().map(move |&f| (v, f)))
            .collect()
    }

    /// True if the fragment graph contains a cycle.
    pub fn frag_graph_has_cycle(&self) -> bool {
        let m = self.fragments.len();
        let edges = self.frag_edges().len();
        let mut seen = vec![false; m];
        let mut comps = 0;
        for s in 0..m {
            if seen[s] {
                continue;
            }
            comps += 1;
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(v) = stack.pop() {
                for (w, &adjacent) in self.frag_adjacency[v].iter().enumerate() {
                    if adjacent && !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        edges + comps > m
    }

    pub fn count_kind(&self, pred: impl Fn(FragmentKind) -> bool) -> usize {
        self.fragments.iter().filter(|f| pred(f.kind)).count()
    }
}

/// Paths over the residual graph left after ring extraction.
pub fn extract_paths(graph: &MolecularGraph, rings: &[Fragment]) -> Vec<Fragment> {
    let n = graph.atom_count();
    let mut in_ring = vec![false; n];
    let mut ring_edges = BTreeSet::new();
    for r in rings {
        let k = r.nodes.len();
        for i in 0..k {
            in_ring[r.nodes[i]] = true;
            let (a, b) = (r.nodes[i], r.nodes[(i + 1) % k]);
            ring_edges.insert((a.min(b), a.max(b)));
        }
    }
    let residual: Vec<Vec<usize>> = (0..n)
        .map(|v| {
            graph
                .neighbors(v)
                .iter()
                .copied()
                .filter(|&w| !ring_edges.contains(&(v.min(w), v.max(w))))
                .collect()
        })
        .collect();
    let interior = |v: usize| !in_ring[v] && residual[v].len() == 2;
    let mut used = BTreeSet::new();
    let mut paths = Vec::new();
    for start in 0..n {
        if interior(start) {
            continue;
        }
        if residual[start].is_empty() {
            if !in_ring[start] {
                paths.push(Fragment {
                    kind: FragmentKind::Path(1),
                    nodes: vec![start],
                });
            }
            continue;
        }
        for &first in &residual[start] {
            if used.contains(&(start.min(first), start.max(first))) {
                continue;
            }
            let mut nodes = vec![start];
            let (mut prev, mut cur) = (start, first);
            loop {
                used.insert((prev.min(cur), prev.max(cur)));
                nodes.push(cur);
                if !interior(cur) {
                    break;
                }
                let next = residual[cur].iter().copied().find(|&w| w != prev).unwrap();
                prev = cur;
                cur = next;
            }
            paths.push(Fragment {
                kind: FragmentKind::Path(nodes.len()),
                nodes,
            });
        }
    }
    // Every residual edge lies on a path: the residual graph is a forest
    // because every cycle edge is covered by some basis ring.
    debug_assert_eq!(
        used.len(),
        residual.iter().map(Vec::len).sum::<usize>() / 2,
        "residual cycle of interior nodes"
    );
    paths
}

/// Articulation fragments for uncovered nodes and (if enabled) junctions.
pub fn extract_articulation(
    graph: &MolecularGraph,
    fragments: &[Fragment],
    config: &FragmentConfig,
) -> Vec<Fragment> {
    let mut count = vec![0usize; graph.atom_count()];
    for f in fragments {
        for &v in &f.nodes {
            count[v] += 1;
        }
    }
    count
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c == 0 || (config.articulation && c >= config.junction_threshold))
        .map(|(v, _)| Fragment {
            kind: FragmentKind::Articulation,
            nodes: vec![v],
        })
        .collect()
}

/// Runs ring, path and articulation extraction and builds `A^f`, `A^nf`,
/// connectors and node owners.
pub fn fragment(graph: &MolecularGraph, config: &FragmentConfig) -> Result<FragmentDecomposition, FragmentError> {
    let comps = graph.component_count();
    if comps > 1 && !graph.allows_components() {
        return Err(FragmentError::DisconnectedInput(comps));
    }
    let mut fragments = find_minimal_rings(graph);
    let paths = extract_paths(graph, &fragments);
    fragments.extend(paths);
    let artic = extract_articulation(graph, &fragments, config);
    fragments.extend(artic);

    let n = graph.atom_count();
    let m = fragments.len();
    let mut memberships = vec![Vec::new(); n];
    for (p, f) in fragments.iter().enumerate() {
        for &v in &f.nodes {
            memberships[v].push(p);
        }
    }
    let connectors: BTreeSet<usize> = (0..n).filter(|&v| memberships[v].len() > 1).collect();
    let artic_at: Vec<Option<usize>> = memberships
        .iter()
        .map(|fs| {
            fs.iter()
                .copied()
                .find(|&p| fragments[p].kind == FragmentKind::Articulation)
        })
        .collect();
    let owner = (0..n).map(|v| artic_at[v].unwrap_or(memberships[v][0])).collect();

    let mut frag_adjacency = vec![vec![false; m]; m];
    let node_sets: Vec<BTreeSet<usize>> = fragments.iter().map(|f| f.nodes.iter().copied().collect()).collect();
    for i in 0..m {
        for j in i + 1..m {
            let shared: Vec<usize> = node_sets[i].intersection(&node_sets[j]).copied().collect();
            if shared.is_empty() {
                continue;
            }
            let routed_away = config.mode == AdjacencyMode::ArticulationRouted
                && fragments[i].kind != FragmentKind::Articulation
                && fragments[j].kind != FragmentKind::Articulation
                && shared.iter().all(|&v| artic_at[v].is_some());
            if !routed_away {
                frag_adjacency[i][j] = true;
                frag_adjacency[j][i] = true;
            }
        }
    }
    Ok(FragmentDecomposition {
        fragments,
        frag_adjacency,
        memberships,
        connectors,
        owner,
    })
}
