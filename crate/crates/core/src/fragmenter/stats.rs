use std::collections::BTreeMap;
use std::fmt::Write;

use super::{fragment, FragmentConfig, FragmentDecomposition, FragmentError, FragmentKind};
use crate::molgraph::MolecularGraph;

pub type Histogram = BTreeMap<usize, usize>;

/// Exact fragment histograms over a dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StatsReport {
    pub graphs: usize,
    pub ring_size: Histogram,
    pub path_length: Histogram,
    pub rings_per_graph: Histogram,
    pub paths_per_graph: Histogram,
    pub articulations_per_graph: Histogram,
}

fn mode(h: &Histogram) -> Option<usize> {
    // Ties resolve to the smaller bucket.
    h.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(&k, _)| k)
}

impl StatsReport {
    pub fn add(&mut self, d: &FragmentDecomposition) {
        self.graphs += 1;
        let (mut rings, mut paths, mut artic) = (0, 0, 0);
        for f in &d.fragments {
            match f.kind {
                FragmentKind::Ring(k) => {
                    rings += 1;
                    *self.ring_size.entry(k).or_default() += 1;
                }
                FragmentKind::Path(k) => {
                    paths += 1;
                    *self.path_length.entry(k).or_default() += 1;
                }
                FragmentKind::Articulation => artic += 1,
            }
        }
        *self.rings_per_graph.entry(rings).or_default() += 1;
        *self.paths_per_graph.entry(paths).or_default() += 1;
        *self.articulations_per_graph.entry(artic).or_default() += 1;
    }

    pub fn modal_ring_size(&self) -> Option<usize> {
        mode(&self.ring_size)
    }

    pub fn modal_path_length(&self) -> Option<usize> {
        mode(&self.path_length)
    }

    fn sections(&self) -> [(&'static str, &Histogram); 5] {
        [
            ("ring_size", &self.ring_size),
            ("path_length", &self.path_length),
            ("rings_per_graph", &self.rings_per_graph),
            ("paths_per_graph", &self.paths_per_graph),
            ("articulations_per_graph", &self.articulations_per_graph),
        ]
    }

    /// `statistic,bucket,count` rows; modal values follow the histograms.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("statistic,bucket,count\n");
        writeln!(out, "graphs,all,{}", self.graphs).unwrap();
        for (name, h) in self.sections() {
            for (bucket, count) in h {
                writeln!(out, "{name},{bucket},{count}").unwrap();
            }
        }
        if let Some(k) = self.modal_ring_size() {
            writeln!(out, "modal_ring_size,{k},{}", self.ring_size[&k]).unwrap();
        }
        if let Some(k) = self.modal_path_length() {
            writeln!(out, "modal_path_length,{k},{}", self.path_length[&k]).unwrap();
        }
        out
    }
}

pub fn decomposition_stats<'a>(
    graphs: impl IntoIterator<Item = &'a MolecularGraph>,
    config: &FragmentConfig,
) -> Result<StatsReport, FragmentError> {
    let mut report = StatsReport::default();
    for g in graphs {
        report.add(&fragment(g, config)?);
    }
    Ok(report)
}

/// Agreement between fragment overlap size and the minimum vertex cut
/// separating the two fragments' private nodes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CutReport {
    pub pairs: usize,
    pub agree: usize,
    pub cut_smaller: usize,
    pub cut_larger: usize,
    /// Pairs where one fragment has no private node, so no cut exists.
    pub skipped: usize,
}

impl CutReport {
    pub fn merge(&mut self, o: &CutReport) {
        self.pairs += o.pairs;
        self.agree += o.agree;
        self.cut_smaller += o.cut_smaller;
        self.cut_larger += o.cut_larger;
        self.skipped += o.skipped;
    }
}

/// Brute-force comparison over every overlapping fragment pair. Candidate cuts
/// are enumerated up to the overlap size, so cost is `O(n^overlap)` per pair.
pub fn overlap_cut_report(graph: &MolecularGraph, d: &FragmentDecomposition) -> CutReport {
    let n = graph.atom_count();
    let mut report = CutReport::default();
    let m = d.fragments.len();
    for i in 0..m {
        for j in i + 1..m {
            let a = &d.fragments[i].nodes;
            let b = &d.fragments[j].nodes;
            let shared: Vec<usize> = a.iter().copied().filter(|v| b.contains(v)).collect();
            if shared.is_empty() {
                continue;
            }
            report.pairs += 1;
            let src: Vec<usize> = a.iter().copied().filter(|v| !shared.contains(v)).collect();
            let dst: Vec<usize> = b.iter().copied().filter(|v| !shared.contains(v)).collect();
            if src.is_empty() || dst.is_empty() {
                report.skipped += 1;
                continue;
            }
            let mut terminal = vec![false; n];
            src.iter().chain(&dst).for_each(|&v| terminal[v] = true);
            let pool: Vec<usize> = (0..n).filter(|&v| !terminal[v]).collect();
            match smallest_cut(graph, &src, &dst, &pool, shared.len()) {
                Some(k) if k < shared.len() => report.cut_smaller += 1,
                Some(_) => report.agree += 1,
                None => report.cut_larger += 1,
            }
        }
    }
    report
}

fn smallest_cut(graph: &MolecularGraph, src: &[usize], dst: &[usize], pool: &[usize], limit: usize) -> Option<usize> {
    let mut removed = vec![false; graph.atom_count()];
    (0..=limit.min(pool.len())).find(|&k| {
        let mut chosen = Vec::with_capacity(k);
        search(graph, src, dst, pool, 0, k, &mut chosen, &mut removed)
    })
}

#[allow(clippy::too_many_arguments)]
fn search(
    graph: &MolecularGraph,
    src: &[usize],
    dst: &[usize],
    pool: &[usize],
    from: usize,
    k: usize,
    chosen: &mut Vec<usize>,
    removed: &mut [bool],
) -> bool {
    if chosen.len() == k {
        return !connected(graph, src, dst, removed);
    }
    for idx in from..pool.len() {
        let v = pool[idx];
        removed[v] = true;
        chosen.push(v);
        let hit = search(graph, src, dst, pool, idx + 1, k, chosen, removed);
        chosen.pop();
        removed[v] = false;
        if hit {
            return true;
        }
    }
    false
}

fn connected(graph: &MolecularGraph, src: &[usize], dst: &[usize], removed: &[bool]) -> bool {
    let mut seen = removed.to_vec();
    let mut stack: Vec<usize> = src.to_vec();
    src.iter().for_each(|&v| seen[v] = true);
    while let Some(v) = stack.pop() {
        if dst.contains(&v) {
            return true;
        }
        for &w in graph.neighbors(v) {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    false
}
