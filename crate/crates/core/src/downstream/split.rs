use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::DownstreamError;
use crate::fragmenter::{FragmentDecomposition, FragmentKind, FragmentVocabulary};
use crate::fragwl::{ColorHistogram, WlInterner};
use crate::molgraph::GenericGraph;
use crate::tensor::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Partition {
    Train,
    Valid,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Valid, Partition::Test];

    pub fn name(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Valid => "valid",
            Self::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.8,
            valid: 0.1,
            test: 0.1,
        }
    }
}

/// Ring-size multiset plus the fragment-graph WL colouring.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScaffoldKey {
    pub ring_sizes: Vec<usize>,
    pub fragment_colors: ColorHistogram,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    pub parts: Vec<Partition>,
    /// Molecule indices per scaffold group, in assignment order.
    pub groups: Vec<Vec<usize>>,
}

impl SplitAssignment {
    pub fn indices(&self, part: Partition) -> Vec<usize> {
        (0..self.parts.len()).filter(|&i| self.parts[i] == part).collect()
    }

    pub fn count(&self, part: Partition) -> usize {
        self.parts.iter().filter(|&&p| p == part).count()
    }
}

fn fragment_graph(d: &FragmentDecomposition) -> GenericGraph {
    let labels = d.fragments.iter().map(|f| FragmentVocabulary.vocab_index(f) as u32).collect();
    GenericGraph::labelled(labels, d.frag_edges()).expect("fragment adjacency is simple")
}

/// Keys for a whole dataset. Colour ids come from one shared interner, so equal
/// keys mean WL-equivalent fragment graphs.
pub fn scaffold_keys(decomps: &[&FragmentDecomposition]) -> Vec<ScaffoldKey> {
    let graphs: Vec<GenericGraph> = decomps.iter().map(|d| fragment_graph(d)).collect();
    let refs: Vec<&GenericGraph> = graphs.iter().collect();
    let iters = graphs.iter().map(GenericGraph::node_count).max().unwrap_or(1).max(1);
    let colors = WlInterner::new().refine_joint(&refs, iters);
    decomps
        .iter()
        .zip(colors)
        .map(|(d, fragment_colors)| {
            let mut ring_sizes: Vec<usize> = d
                .fragments
                .iter()
                .filter_map(|f| match f.kind {
                    FragmentKind::Ring(k) => Some(k),
                    _ => None,
                })
                .collect();
            ring_sizes.sort_unstable();
            ScaffoldKey {
                ring_sizes,
                fragment_colors,
            }
        })
        .collect()
}

/// Groups by scaffold key, orders groups by descending size (ties in seeded
/// random order), and fills train up to `round(f_train·n)` molecules, then
/// valid up to `round((f_train+f_valid)·n)`, then test. A group is never split,
/// so it may overshoot a boundary.
pub fn scaffold_split(
    decomps: &[&FragmentDecomposition],
    fractions: SplitFractions,
    seed: u64,
) -> Result<SplitAssignment, DownstreamError> {
    let n = decomps.len();
    if n == 0 {
        return Err(DownstreamError::EmptyDataset);
    }
    let mut by_key: BTreeMap<ScaffoldKey, Vec<usize>> = BTreeMap::new();
    for (i, k) in scaffold_keys(decomps).into_iter().enumerate() {
        by_key.entry(k).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = by_key.into_values().collect();
    groups.shuffle(&mut seeded_rng(seed));
    groups.sort_by_key(|g| std::cmp::Reverse(g.len()));

    let total = fractions.train + fractions.valid + fractions.test;
    let train_end = (fractions.train / total * n as f64).round() as usize;
    let valid_end = ((fractions.train + fractions.valid) / total * n as f64).round() as usize;
    let mut parts = vec![Partition::Test; n];
    let mut filled = 0;
    for g in &groups {
        let part = if filled < train_end {
            Partition::Train
        } else if filled < valid_end {
            Partition::Valid
        } else {
            Partition::Test
        };
        g.iter().for_each(|&i| parts[i] = part);
        filled += g.len();
    }
    Ok(SplitAssignment { parts, groups })
}
