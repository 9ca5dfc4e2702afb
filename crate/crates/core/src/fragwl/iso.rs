use crate::molgraph::GenericGraph;

/// Exact label-preserving isomorphism by backtracking; returns `map` with
/// `map[v]` the image in `g2` of node `v` of `g1`.
pub fn find_isomorphism(g1: &GenericGraph, g2: &GenericGraph) -> Option<Vec<usize>> {
    let n = g1.node_count();
    if n != g2.node_count() || g1.edges.len() != g2.edges.len() {
        return None;
    }
    let (nb1, nb2) = (g1.neighbor_lists(), g2.neighbor_lists());
    let adj2: Vec<Vec<bool>> = (0..n)
        .map(|v| {
            let mut row = vec![false; n];
            nb2[v].iter().for_each(|&w| row[w] = true);
            row
        })
        .collect();
    // BFS order keeps each new node adjacent to an already mapped one when possible.
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    for s in 0..n {
        if placed[s] {
            continue;
        }
        placed[s] = true;
        order.push(s);
        let mut head = order.len() - 1;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for &w in &nb1[v] {
                if !placed[w] {
                    placed[w] = true;
                    order.push(w);
                }
            }
        }
    }
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    let ctx = Ctx { g1, g2, nb1: &nb1, nb2: &nb2, adj2: &adj2, order: &order };
    ctx.extend(0, &mut map, &mut used).then_some(map)
}

pub fn are_isomorphic(g1: &GenericGraph, g2: &GenericGraph) -> bool {
    find_isomorphism(g1, g2).is_some()
}

struct Ctx<'a> {
    g1: &'a GenericGraph,
    g2: &'a GenericGraph,
    nb1: &'a [Vec<usize>],
    nb2: &'a [Vec<usize>],
    adj2: &'a [Vec<bool>],
    order: &'a [usize],
}

impl Ctx<'_> {
    fn extend(&self, depth: usize, map: &mut [usize], used: &mut [bool]) -> bool {
        let Some(&v) = self.order.get(depth) else { return true };
        for c in 0..map.len() {
            if used[c]
                || self.g1.node_labels[v] != self.g2.node_labels[c]
                || self.nb1[v].len() != self.nb2[c].len()
            {
                continue;
            }
            // Mapped neighbours of v must map to neighbours of c, and vice versa by counting.
            let mut mapped = 0;
            let ok = self.nb1[v].iter().all(|&w| {
                if map[w] == usize::MAX {
                    true
                } else {
                    mapped += 1;
                    self.adj2[c][map[w]]
                }
            });
            if !ok {
                continue;
            }
            let mapped_c = self.nb2[c].iter().filter(|&&w| used[w]).count();
            if mapped != mapped_c {
                continue;
            }
            map[v] = c;
            used[c] = true;
            if self.extend(depth + 1, map, used) {
                return true;
            }
            map[v] = usize::MAX;
            used[c] = false;
        }
        false
    }
}
