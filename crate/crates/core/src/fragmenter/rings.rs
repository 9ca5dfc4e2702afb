//! Minimum cycle basis over GF(2) from Horton-style candidates.
//!
//! For every root `v` a BFS tree gives consistent shortest paths; each edge
//! `(x, y)` off the tree yields the candidate `P(v,x) + (x,y) + P(y,v)` when the
//! two paths meet only at `v`. Candidates are sorted by length and then
//! lexicographically, and greedily kept while linearly independent.

use std::collections::{BTreeMap, VecDeque};

use super::{Fragment, FragmentKind};
use crate::molgraph::MolecularGraph;

struct Candidate {
    sorted_nodes: Vec<usize>,
    cycle: Vec<usize>,
    edges: Vec<u64>,
}

fn bfs_tree(graph: &MolecularGraph, root: usize) -> (Vec<usize>, Vec<usize>) {
    let n = graph.atom_count();
    let mut dist = vec![usize::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut queue = VecDeque::from([root]);
    dist[root] = 0;
    while let Some(v) = queue.pop_front() {
        for &w in graph.neighbors(v) {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                parent[w] = v;
                queue.push_back(w);
            }
        }
    }
    (dist, parent)
}

fn path_to_root(parent: &[usize], mut v: usize, root: usize) -> Vec<usize> {
    let mut path = vec![v];
    while v != root {
        v = parent[v];
        path.push(v);
    }
    path.reverse();
    path
}

/// Rotates a cycle to start at its smallest node and walk towards the smaller neighbour.
pub(crate) fn normalize_cycle(cycle: &[usize]) -> Vec<usize> {
    let k = cycle.len();
    let start = (0..k).min_by_key(|&i| cycle[i]).unwrap();
    let fwd = cycle[(start + 1) % k];
    let bwd = cycle[(start + k - 1) % k];
    if fwd <= bwd {
        (0..k).map(|i| cycle[(start + i) % k]).collect()
    } else {
        (0..k).map(|i| cycle[(start + k - i) % k]).collect()
    }
}

/// Independent smallest cycles, `|E| − |V| + components` of them.
pub fn find_minimal_rings(graph: &MolecularGraph) -> Vec<Fragment> {
    let n = graph.atom_count();
    let m = graph.bond_count();
    let target = (m + graph.component_count()).saturating_sub(n);
    if target == 0 {
        return Vec::new();
    }
    let edge_id: BTreeMap<(usize, usize), usize> = graph
        .bonds()
        .iter()
        .enumerate()
        .map(|(i, b)| ((b.a.min(b.b), b.a.max(b.b)), i))
        .collect();
    let words = m.div_ceil(64);

    let mut seen = std::collections::BTreeSet::new();
    let mut candidates = Vec::new();
    for root in 0..n {
        let (dist, parent) = bfs_tree(graph, root);
        for b in graph.bonds() {
            let (x, y) = (b.a, b.b);
            if dist[x] == usize::MAX || parent[x] == y || parent[y] == x {
                continue;
            }
            let px = path_to_root(&parent, x, root);
            let py = path_to_root(&parent, y, root);
            // Paths must share only the root.
            if px.iter().skip(1).any(|v| py[1..].contains(v)) {
                continue;
            }
            let mut cycle = px.clone();
            cycle.extend(py.iter().skip(1).rev());
            if cycle.len() < 3 {
                continue;
            }
            let cycle = normalize_cycle(&cycle);
            if !seen.insert(cycle.clone()) {
                continue;
            }
            let mut edges = vec![0u64; words];
            for i in 0..cycle.len() {
                let (a, c) = (cycle[i], cycle[(i + 1) % cycle.len()]);
                let id = edge_id[&(a.min(c), a.max(c))];
                edges[id / 64] |= 1 << (id % 64);
            }
            let mut sorted_nodes = cycle.clone();
            sorted_nodes.sort_unstable();
            candidates.push(Candidate {
                sorted_nodes,
                cycle,
                edges,
            });
        }
    }
    candidates.sort_by(|a, b| {
        (a.cycle.len(), &a.sorted_nodes, &a.cycle).cmp(&(b.cycle.len(), &b.sorted_nodes, &b.cycle))
    });

    // Greedy GF(2) elimination; `basis` holds reduced vectors keyed by pivot bit.
    let mut basis: Vec<(usize, Vec<u64>)> = Vec::new();
    let mut rings = Vec::new();
    for cand in candidates {
        let mut v = cand.edges.clone();
        for (pivot, row) in &basis {
            if v[pivot / 64] >> (pivot % 64) & 1 == 1 {
                v.iter_mut().zip(row).for_each(|(a, b)| *a ^= b);
            }
        }
        let Some(pivot) = lowest_bit(&v) else { continue };
        // Keep rows reduced so later candidates eliminate in one pass.
        for (_, row) in basis.iter_mut() {
            if row[pivot / 64] >> (pivot % 64) & 1 == 1 {
                row.iter_mut().zip(&v).for_each(|(a, b)| *a ^= b);
            }
        }
        basis.push((pivot, v));
        rings.push(Fragment {
            kind: FragmentKind::Ring(cand.cycle.len()),
            nodes: cand.cycle,
        });
        if rings.len() == target {
            break;
        }
    }
    rings
}

fn lowest_bit(v: &[u64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
}
