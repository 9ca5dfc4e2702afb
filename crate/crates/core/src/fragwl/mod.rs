//! 1-WL colour refinement on atom graphs and fragment graphs.
//!
//! Colour signatures are interned to dense ids rather than hashed, so two
//! histograms produced with the same [`WlInterner`] differ iff the underlying
//! colour multisets differ.

mod iso;

pub use iso::{are_isomorphic, find_isomorphism};

use std::collections::HashMap;
use std::fmt::Write;

use crate::fragmenter::{fragment, FragmentConfig, FragmentError, FragmentVocabulary};
use crate::molgraph::{GenericGraph, MolecularGraph};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Signature {
    Initial(u32),
    Refined(u32, Vec<u32>),
}

/// Injective map from colour signatures to dense ids.
///
/// New signatures within one refinement round are interned in sorted order, so
/// a fresh interner yields ids that depend only on the isomorphism class.
/// Histograms are comparable only when they come from the same interner.
#[derive(Debug, Default, Clone)]
pub struct WlInterner {
    ids: HashMap<Signature, u32>,
}

/// Sorted `(colour, count)` pairs for each iteration; entry 0 is the initial labelling.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ColorHistogram {
    pub iterations: Vec<Vec<(u32, usize)>>,
}

impl ColorHistogram {
    pub fn iteration_count(&self) -> usize {
        self.iterations.len().saturating_sub(1)
    }

    pub fn color_count(&self, iteration: usize) -> usize {
        self.iterations[iteration].len()
    }

    pub fn last(&self) -> &[(u32, usize)] {
        self.iterations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

fn histogram(colors: &[u32]) -> Vec<(u32, usize)> {
    let mut h: Vec<(u32, usize)> = Vec::new();
    let mut sorted = colors.to_vec();
    sorted.sort_unstable();
    for c in sorted {
        match h.last_mut() {
            Some((last, n)) if *last == c => *n += 1,
            _ => h.push((c, 1)),
        }
    }
    h
}

fn distinct(colors: &[u32]) -> usize {
    histogram(colors).len()
}

impl WlInterner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn intern_round(&mut self, sigs: Vec<Signature>) -> Vec<u32> {
        let mut fresh: Vec<&Signature> = sigs.iter().filter(|s| !self.ids.contains_key(*s)).collect();
        fresh.sort();
        fresh.dedup();
        let fresh: Vec<Signature> = fresh.into_iter().cloned().collect();
        for s in fresh {
            let id = self.ids.len() as u32;
            self.ids.insert(s, id);
        }
        sigs.iter().map(|s| self.ids[s]).collect()
    }

    /// Refines the disjoint union of `graphs` jointly until the union partition
    /// stabilises or `max_iters` rounds have run; returns one histogram per graph.
    pub fn refine_joint(&mut self, graphs: &[&GenericGraph], max_iters: usize) -> Vec<ColorHistogram> {
        let mut offsets = vec![0];
        for g in graphs {
            offsets.push(offsets.last().unwrap() + g.node_count());
        }
        let neighbors: Vec<Vec<usize>> = graphs
            .iter()
            .zip(&offsets)
            .flat_map(|(g, &off)| g.neighbor_lists().into_iter().map(move |nb| nb.into_iter().map(|w| w + off).collect()))
            .collect();
        let initial = graphs
            .iter()
            .flat_map(|g| g.node_labels.iter().map(|&l| Signature::Initial(l)))
            .collect();
        let mut colors = self.intern_round(initial);
        let split = |colors: &[u32], out: &mut Vec<ColorHistogram>| {
            for (k, h) in out.iter_mut().enumerate() {
                h.iterations.push(histogram(&colors[offsets[k]..offsets[k + 1]]));
            }
        };
        let mut out = vec![ColorHistogram::default(); graphs.len()];
        split(&colors, &mut out);
        for _ in 0..max_iters {
            let sigs = (0..colors.len())
                .map(|v| {
                    let mut nb: Vec<u32> = neighbors[v].iter().map(|&w| colors[w]).collect();
                    nb.sort_unstable();
                    Signature::Refined(colors[v], nb)
                })
                .collect();
            let next = self.intern_round(sigs);
            let stable = distinct(&next) == distinct(&colors);
            colors = next;
            split(&colors, &mut out);
            if stable {
                break;
            }
        }
        out
    }

    pub fn refine(&mut self, graph: &GenericGraph, max_iters: usize) -> ColorHistogram {
        self.refine_joint(&[graph], max_iters).pop().unwrap()
    }
}

/// Per-iteration colour histogram with a fresh interner; `max_iters` defaults to `|V|`.
pub fn wl_refine(graph: &GenericGraph, max_iters: Option<usize>) -> ColorHistogram {
    let iters = max_iters.unwrap_or(graph.node_count()).max(1);
    WlInterner::new().refine(graph, iters)
}

/// True iff 1-WL separates the graphs within `max_iters` rounds (default `|V|`).
pub fn wl_distinguish(g1: &GenericGraph, g2: &GenericGraph, max_iters: Option<usize>) -> bool {
    if g1.node_count() != g2.node_count() {
        return true;
    }
    let iters = max_iters.unwrap_or(g1.node_count()).max(1);
    let h = WlInterner::new().refine_joint(&[g1, g2], iters);
    h[0] != h[1]
}

/// One node per fragment labelled with its vocabulary index; edges follow `A^f`.
pub fn build_fragment_graph(graph: &MolecularGraph, config: &FragmentConfig) -> Result<GenericGraph, FragmentError> {
    let d = fragment(graph, config)?;
    let vocab = FragmentVocabulary;
    let labels = d.fragments.iter().map(|f| vocab.vocab_index(f) as u32).collect();
    Ok(GenericGraph::labelled(labels, d.frag_edges()).expect("fragment adjacency is simple"))
}

/// Node-level WL on atom-labelled graphs OR WL on the fragment graphs.
pub fn fragment_wl_distinguish(
    g1: &MolecularGraph,
    g2: &MolecularGraph,
    config: &FragmentConfig,
) -> Result<bool, FragmentError> {
    if wl_distinguish(&g1.to_generic(), &g2.to_generic(), None) {
        return Ok(true);
    }
    let (f1, f2) = (build_fragment_graph(g1, config)?, build_fragment_graph(g2, config)?);
    Ok(wl_distinguish(&f1, &f2, None))
}

/// Two non-isomorphic 8-node, 12-edge graphs with identical 1-WL colourings.
///
/// In the first, each triangle fragment touches a single 4-ring among the ring
/// fragments; in the second, a triangle touches another triangle and a 4-ring.
pub fn triangle_context_pair() -> (GenericGraph, GenericGraph) {
    const G1: [(usize, usize); 12] = [
        (0, 1), (0, 3), (0, 4), (0, 5), (1, 6), (2, 3),
        (2, 7), (3, 5), (4, 6), (4, 7), (5, 7), (6, 7),
    ];
    const G2: [(usize, usize); 12] = [
        (0, 1), (0, 2), (0, 5), (0, 6), (1, 4), (1, 7),
        (2, 5), (2, 6), (3, 4), (3, 7), (4, 5), (4, 7),
    ];
    (
        GenericGraph::new(8, G1.to_vec()).unwrap(),
        GenericGraph::new(8, G2.to_vec()).unwrap(),
    )
}

/// `graph,iteration,color,count` rows for a set of jointly refined graphs.
pub fn histograms_csv(histograms: &[(&str, &ColorHistogram)]) -> String {
    let mut out = String::from("graph,iteration,color,count\n");
    for (name, h) in histograms {
        for (t, it) in h.iterations.iter().enumerate() {
            for (c, n) in it {
                writeln!(out, "{name},{t},{c},{n}").unwrap();
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn cycle(n: usize) -> GenericGraph {
        GenericGraph::new(n, (0..n).map(|i| (i, (i + 1) % n)).collect()).unwrap()
    }

    fn two_triangles() -> GenericGraph {
        GenericGraph::new(6, vec![(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)]).unwrap()
    }

    #[test]
    fn hexagon_single_colour() {
        let h = wl_refine(&cycle(6), None);
        assert!(h.iterations.iter().all(|it| it.len() == 1 && it[0].1 == 6));
    }

    #[test]
    fn path_three_two_colours() {
        let g = GenericGraph::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let h = wl_refine(&g, None);
        assert_eq!(h.color_count(1), 2);
        let mut counts: Vec<usize> = h.iterations[1].iter().map(|c| c.1).collect();
        counts.sort();
        assert_eq!(counts, vec![1, 2]);
    }

    #[test]
    fn triangles_vs_hexagon() {
        let mut it = WlInterner::new();
        let h = it.refine_joint(&[&two_triangles(), &cycle(6)], 6);
        assert_eq!(h[0], h[1]);
        assert!(!wl_distinguish(&two_triangles(), &cycle(6), None));
        assert!(wl_distinguish(&cycle(3), &cycle(4), None));
    }

    #[test]
    fn fresh_refinement_is_permutation_invariant() {
        let g = parse_smiles("CC(=O)Oc1ccccc1C(=O)O").unwrap().to_generic();
        let n = g.node_count();
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
        assert_eq!(wl_refine(&g, None), wl_refine(&g.permuted(&perm), None));
        assert!(!wl_distinguish(&g, &g.permuted(&perm), None));
    }

    #[test]
    fn fragment_graphs() {
        let cfg = FragmentConfig::default();
        let b = build_fragment_graph(&parse_smiles("c1ccccc1").unwrap(), &cfg).unwrap();
        assert_eq!((b.node_count(), b.edges.len()), (1, 0));
        let n = build_fragment_graph(&parse_smiles("c1ccc2ccccc2c1").unwrap(), &cfg).unwrap();
        assert_eq!(n.node_labels, vec![3, 3]);
        assert_eq!(n.edges.len(), 1);
        let t = build_fragment_graph(&parse_smiles("Cc1ccccc1").unwrap(), &cfg).unwrap();
        assert_eq!(t.node_labels, vec![3, 8]);
        assert_eq!(t.edges.len(), 1);
    }

    #[test]
    fn identical_molecules_not_distinguished() {
        let g = parse_smiles("c1ccccc1CCN").unwrap();
        assert!(!fragment_wl_distinguish(&g, &g.clone(), &FragmentConfig::default()).unwrap());
    }

    #[test]
    fn triangle_context_pair_separated_by_fragments_only() {
        let (g1, g2) = triangle_context_pair();
        assert!(!wl_distinguish(&g1, &g2, None));
        assert!(!are_isomorphic(&g1, &g2));
        let cfg = FragmentConfig::default();
        assert!(fragment_wl_distinguish(&g1.to_skeleton(), &g2.to_skeleton(), &cfg).unwrap());
    }

    #[test]
    fn csv_layout() {
        let h = wl_refine(&cycle(3), None);
        let csv = histograms_csv(&[("g", &h)]);
        assert!(csv.starts_with("graph,iteration,color,count\ng,0,0,3\n"));
    }
}
