use std::fmt::Write;

use super::{Atom, BondOrder, Element, MolecularGraph};

/// Depth-first SMILES writer: starts from the lowest-index atom of each
/// component, visits neighbours in index order, and numbers ring closures with
/// the smallest free label.
pub fn write_smiles(graph: &MolecularGraph) -> String {
    let n = graph.atom_count();
    let mut order = Vec::with_capacity(n);
    let mut parent = vec![usize::MAX; n];
    let mut visited = vec![false; n];
    let mut children = vec![Vec::new(); n];
    let mut roots = Vec::new();
    for root in 0..n {
        if visited[root] {
            continue;
        }
        roots.push(root);
        dfs(graph, root, &mut visited, &mut parent, &mut children, &mut order);
    }
    let mut rank = vec![0; n];
    for (i, &v) in order.iter().enumerate() {
        rank[v] = i;
    }
    // Ring bonds: non-tree edges, opened at the endpoint visited first.
    let mut opens = vec![Vec::new(); n];
    let mut closes = vec![Vec::new(); n];
    for b in graph.bonds() {
        let (a, c) = (b.a, b.b);
        if parent[a] == c || parent[c] == a {
            continue;
        }
        let (first, second) = if rank[a] < rank[c] { (a, c) } else { (c, a) };
        opens[first].push(second);
        closes[second].push(first);
    }
    for v in 0..n {
        opens[v].sort_by_key(|&w| rank[w]);
        closes[v].sort_by_key(|&w| rank[w]);
    }

    let mut out = String::new();
    let mut labels: Vec<Option<(usize, usize)>> = Vec::new();
    for (k, &root) in roots.iter().enumerate() {
        if k > 0 {
            out.push('.');
        }
        emit(graph, root, &children, &opens, &closes, &mut labels, &mut out);
    }
    out
}

fn dfs(
    graph: &MolecularGraph,
    root: usize,
    visited: &mut [bool],
    parent: &mut [usize],
    children: &mut [Vec<usize>],
    order: &mut Vec<usize>,
) {
    // Explicit stack of (node, next neighbour position) to mirror recursive DFS.
    let mut stack = vec![(root, 0usize)];
    visited[root] = true;
    order.push(root);
    while let Some(&mut (v, ref mut pos)) = stack.last_mut() {
        let nb = graph.neighbors(v);
        if *pos < nb.len() {
            let w = nb[*pos];
            *pos += 1;
            if !visited[w] {
                visited[w] = true;
                parent[w] = v;
                children[v].push(w);
                order.push(w);
                stack.push((w, 0));
            }
        } else {
            stack.pop();
        }
    }
}

fn emit(
    graph: &MolecularGraph,
    root: usize,
    children: &[Vec<usize>],
    opens: &[Vec<usize>],
    closes: &[Vec<usize>],
    labels: &mut Vec<Option<(usize, usize)>>,
    out: &mut String,
) {
    enum Step {
        Atom(usize, Option<usize>),
        Open,
        Close,
    }
    let mut stack = vec![Step::Atom(root, None)];
    while let Some(step) = stack.pop() {
        match step {
            Step::Open => out.push('('),
            Step::Close => out.push(')'),
            Step::Atom(v, from) => {
                if let Some(u) = from {
                    out.push_str(bond_symbol(graph, u, v));
                }
                out.push_str(&atom_symbol(&graph.atoms()[v]));
                for &u in &closes[v] {
                    let slot = labels
                        .iter()
                        .position(|l| *l == Some((u, v)))
                        .expect("ring bond was opened");
                    labels[slot] = None;
                    push_label(out, slot + 1);
                }
                for &w in &opens[v] {
                    let slot = match labels.iter().position(Option::is_none) {
                        Some(s) => s,
                        None => {
                            labels.push(None);
                            labels.len() - 1
                        }
                    };
                    labels[slot] = Some((v, w));
                    out.push_str(bond_symbol(graph, v, w));
                    push_label(out, slot + 1);
                }
                let kids = &children[v];
                if let Some((&last, rest)) = kids.split_last() {
                    stack.push(Step::Atom(last, Some(v)));
                    for &c in rest.iter().rev() {
                        stack.push(Step::Close);
                        stack.push(Step::Atom(c, Some(v)));
                        stack.push(Step::Open);
                    }
                }
            }
        }
    }
}

fn push_label(out: &mut String, label: usize) {
    if label < 10 {
        write!(out, "{label}").unwrap();
    } else {
        write!(out, "%{label:02}").unwrap();
    }
}

fn bond_symbol(graph: &MolecularGraph, u: usize, v: usize) -> &'static str {
    let both_aromatic = graph.atoms()[u].aromatic && graph.atoms()[v].aromatic;
    match graph.bond_between(u, v).expect("bond exists").order {
        BondOrder::Single if both_aromatic => "-",
        BondOrder::Single => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic if both_aromatic => "",
        BondOrder::Aromatic => ":",
    }
}

fn atom_symbol(atom: &Atom) -> String {
    let organic = atom.element != Element::Other
        && atom.formal_charge == 0
        && atom.hydrogens.is_none()
        && (!atom.aromatic || atom.element.can_be_aromatic());
    let sym = atom.element.symbol();
    let sym = if atom.aromatic && atom.element == Element::Other {
        // Any aromatic representative of the catch-all category will do.
        "se".to_string()
    } else if atom.aromatic && atom.element.can_be_aromatic() {
        sym.to_ascii_lowercase()
    } else {
        sym.to_string()
    };
    if organic {
        return sym;
    }
    let mut s = String::from("[");
    s.push_str(&sym);
    if let Some(h) = atom.hydrogens {
        s.push('H');
        if h != 1 {
            write!(s, "{h}").unwrap();
        }
    }
    match atom.formal_charge {
        0 => {}
        1 => s.push('+'),
        -1 => s.push('-'),
        c if c > 0 => write!(s, "+{c}").unwrap(),
        c => write!(s, "-{}", -c).unwrap(),
    }
    s.push(']');
    s
}
