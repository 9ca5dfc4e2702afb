//! Helpers shared by the integration test targets. Every oracle here is
//! written against the raw fragment node lists, not the library's derived
//! fields, so it checks the fragmenter rather than restating it.
#![allow(dead_code)]

pub mod grad;

use std::collections::BTreeSet;
use std::path::PathBuf;

use fragpredict::fragmenter::{FragmentDecomposition, FragmentKind};
use fragpredict::molgraph::{load_smiles_dataset, LoadMode, MolecularGraph};
use fragpredict::tensor::{seeded_rng, Tape, Tensor, Var};
use rand::Rng;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

pub fn load_graphs(name: &str) -> Vec<MolecularGraph> {
    load_smiles_dataset(data_path(name), LoadMode::Strict)
        .unwrap_or_else(|e| panic!("{name}: {e}"))
        .records
        .into_iter()
        .map(|r| r.graph)
        .collect()
}

/// Connected simple graph on 1..=max_n nodes with degree ≤ 4: a random tree
/// plus a few chords, so rings, fused systems and junctions all occur.
pub fn random_graph(rng: &mut impl Rng, max_n: usize) -> MolecularGraph {
    let n = rng.random_range(1..=max_n);
    let mut deg = vec![0usize; n];
    let mut edges = BTreeSet::new();
    for v in 1..n {
        let open: Vec<usize> = (0..v).filter(|&u| deg[u] < 4).collect();
        let u = open[rng.random_range(0..open.len())];
        edges.insert((u, v));
        deg[u] += 1;
        deg[v] += 1;
    }
    let chords = if n >= 3 { rng.random_range(0..=n / 2) } else { 0 };
    for _ in 0..chords {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        let e = (a.min(b), a.max(b));
        if a != b && deg[a] < 4 && deg[b] < 4 && edges.insert(e) {
            deg[a] += 1;
            deg[b] += 1;
        }
    }
    let edges: Vec<_> = edges.into_iter().collect();
    MolecularGraph::skeleton(n, &edges, false).expect("random graph is simple and connected")
}

fn fragment_edges(kind: FragmentKind, nodes: &[usize]) -> Vec<(usize, usize)> {
    let norm = |a: usize, b: usize| (a.min(b), a.max(b));
    match kind {
        FragmentKind::Ring(_) => (0..nodes.len()).map(|i| norm(nodes[i], nodes[(i + 1) % nodes.len()])).collect(),
        FragmentKind::Path(_) => nodes.windows(2).map(|w| norm(w[0], w[1])).collect(),
        FragmentKind::Articulation => Vec::new(),
    }
}

/// Coverage, non-connector exclusivity and edge partition; one message per violation.
pub fn invariant_violations(graph: &MolecularGraph, d: &FragmentDecomposition) -> Vec<String> {
    let n = graph.atom_count();
    let mut out = Vec::new();
    let mut count = vec![0usize; n];
    for f in &d.fragments {
        for &v in &f.nodes {
            count[v] += 1;
        }
    }
    for v in 0..n {
        if count[v] == 0 {
            out.push(format!("node {v} uncovered"));
        }
        if count[v] > 1 && !d.connectors.contains(&v) {
            out.push(format!("node {v} in {} fragments but not a connector", count[v]));
        }
    }
    let (mut ring_hits, mut path_hits) = (std::collections::BTreeMap::new(), std::collections::BTreeMap::new());
    for f in &d.fragments {
        for e in fragment_edges(f.kind, &f.nodes) {
            if !graph.has_bond(e.0, e.1) {
                out.push(format!("fragment edge {e:?} is not a bond"));
            }
            let hits = if matches!(f.kind, FragmentKind::Ring(_)) { &mut ring_hits } else { &mut path_hits };
            *hits.entry(e).or_insert(0usize) += 1;
        }
    }
    for b in graph.bonds() {
        let e = (b.a.min(b.b), b.a.max(b.b));
        let r = ring_hits.get(&e).copied().unwrap_or(0);
        let p = path_hits.get(&e).copied().unwrap_or(0);
        if r == 0 && p != 1 {
            out.push(format!("edge {e:?} in no ring and {p} paths"));
        }
    }
    out
}

/// `M[i][j]` iff fragments `i ≠ j` share a node.
pub fn intersection_matrix(d: &FragmentDecomposition) -> Vec<Vec<bool>> {
    let sets: Vec<BTreeSet<usize>> = d.fragments.iter().map(|f| f.nodes.iter().copied().collect()).collect();
    let m = sets.len();
    (0..m)
        .map(|i| (0..m).map(|j| i != j && !sets[i].is_disjoint(&sets[j])).collect())
        .collect()
}

/// True iff the undirected graph given by a symmetric matrix has a cycle.
pub fn has_cycle(adj: &[Vec<bool>]) -> bool {
    let m = adj.len();
    let edges: usize = adj.iter().map(|r| r.iter().filter(|&&x| x).count()).sum::<usize>() / 2;
    let mut seen = vec![false; m];
    let mut components = 0;
    for s in 0..m {
        if seen[s] {
            continue;
        }
        components += 1;
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(u) = stack.pop() {
            for v in 0..m {
                if adj[u][v] && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    edges + components > m
}

pub const FD_STEP: f64 = 1e-5;

/// Entries where both gradients are below this are compared absolutely:
/// central-difference round-off at `h = 1e-5` on losses of order 10–100 is
/// a few 1e-10, which a smaller floor would inflate past the tolerance.
pub const REL_FLOOR: f64 = 1e-5;

/// `|a − n| / max(|a|, |n|, REL_FLOOR)`.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

/// Max relative error between reverse-mode gradients and central differences
/// for every entry of every input of `f`.
pub fn gradcheck(inputs: &[Tensor<f64>], f: impl Fn(&mut Tape<f64>, &[Var]) -> Var) -> f64 {
    let eval = |xs: &[Tensor<f64>]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.param(x.clone())).collect();
        let out = f(&mut tape, &vars);
        tape.value(out).item()
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.param(x.clone())).collect();
    let out = f(&mut tape, &vars);
    let grads = tape.backward(out);
    let mut worst = 0.0f64;
    for (k, x) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[k]).cloned().unwrap_or_else(|| Tensor::zeros(x.shape()));
        for j in 0..x.len() {
            let mut xs = inputs.to_vec();
            xs[k].data_mut()[j] = x.data()[j] + FD_STEP;
            let up = eval(&xs);
            xs[k].data_mut()[j] = x.data()[j] - FD_STEP;
            let down = eval(&xs);
            worst = worst.max(rel_err(analytic.data()[j], (up - down) / (2.0 * FD_STEP)));
        }
    }
    worst
}

pub fn random_tensor(rng: &mut impl Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Same as [`random_tensor`] but with every entry at least `gap` away from zero,
/// keeping ReLU inputs off their kink under finite differences.
pub fn random_tensor_off_zero(rng: &mut impl Rng, shape: &[usize], gap: f64) -> Tensor<f64> {
    random_tensor(rng, shape).map(|x| if x.abs() < gap { x.signum() * gap + x } else { x })
}

/// Collapses any tensor to a scalar via a fixed quadratic probe so gradients
/// of vector-valued ops can be checked.
pub fn reduce(tape: &mut Tape<f64>, x: Var, rng_seed: u64) -> Var {
    let shape = tape.value(x).shape().to_vec();
    assert_eq!(shape.len(), 2, "reduce expects a matrix");
    let mut rng = seeded_rng(rng_seed);
    let target = random_tensor(&mut rng, &shape);
    let rows = shape[0];
    let weights: Vec<f64> = (0..rows).map(|i| 0.5 + i as f64 / rows as f64).collect();
    tape.row_sq_dist(x, &target, &weights).unwrap()
}

/// Plain GIN stack written with raw tensor loops: embed, then per layer
/// `MLP((1+ε)h + Σ_neighbours h)`, ReLU and running-statistics batch norm.
/// Reads the weights of `enc` by name and ignores everything fragment-related.
/// Returns node rows and their mean.
pub fn plain_gin(
    enc: &fragpredict::encoder::HierarchicalEncoder<f64>,
    graph: &MolecularGraph,
) -> (Tensor<f64>, Vec<f64>) {
    let p = enc.params();
    let get = |name: &str| p.by_name(name).unwrap_or_else(|| panic!("missing {name}"));
    let linear = |x: &Tensor<f64>, name: &str| {
        let mut y = x.matmul(get(&format!("{name}.w"))).unwrap();
        let b = get(&format!("{name}.b")).data().to_vec();
        let c = y.cols();
        for (i, v) in y.data_mut().iter_mut().enumerate() {
            *v += b[i % c];
        }
        y
    };
    let cfg = enc.config();
    let eps = cfg.gin_epsilon;
    let mut h = linear(&fragpredict::molgraph::featurize::<f64>(graph), "embed");
    let n = graph.atom_count();
    for l in 1..=cfg.node_layers {
        let c = h.cols();
        let mut agg = vec![0.0; n * c];
        for b in graph.bonds() {
            for (s, t) in [(b.a, b.b), (b.b, b.a)] {
                for j in 0..c {
                    agg[t * c + j] += h.data()[s * c + j];
                }
            }
        }
        let mixed: Vec<f64> = h
            .data()
            .iter()
            .zip(&agg)
            .map(|(&x, &a)| if eps == 0.0 { x + a } else { (1.0 + eps) * x + a })
            .collect();
        let z = Tensor::new(vec![n, c], mixed).unwrap();
        let z = linear(&z, &format!("node.{l}.mlp.0")).map(|x| x.max(0.0));
        let z = linear(&z, &format!("node.{l}.mlp.1")).map(|x| x.max(0.0));
        let stats = &enc.running_stats()[l - 1];
        let gamma = get(&format!("node.{l}.bn.gamma")).data();
        let beta = get(&format!("node.{l}.bn.beta")).data();
        let mut out = z.clone();
        for i in 0..n {
            for j in 0..c {
                let inv = 1.0 / (stats.var[j] + 1e-5).sqrt();
                let xhat = (z.data()[i * c + j] - stats.mean[j]) * inv;
                out.data_mut()[i * c + j] = gamma[j] * xhat + beta[j];
            }
        }
        h = out;
    }
    let c = h.cols();
    let mut mean = vec![0.0; c];
    for i in 0..n {
        mean.iter_mut().zip(h.row(i)).for_each(|(m, &x)| *m += x);
    }
    let inv = 1.0 / n as f64;
    mean.iter_mut().for_each(|m| *m *= inv);
    (h, mean)
}

/// Uniform random permutation of `0..n` (`perm[old] = new`).
pub fn random_perm(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}
