//! Molecular and generic graph types, the SMILES subset parser/writer, atom
//! featurisation and the text loaders.

mod features;
mod io;
mod smiles;
mod writer;

pub use features::{featurize, FEATURE_DIM};
pub use io::{
    load_generic_graph, load_smiles_dataset, parse_generic_graph, parse_smiles_dataset, DatasetError,
    GraphFileError, LoadMode, LoadedDataset, Record, SkippedLine,
};
pub use smiles::{parse_smiles, parse_smiles_with, ParseOptions, SmilesError};
pub use writer::write_smiles;

use thiserror::Error;

/// Element categories distinguished by the feature scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    B,
    C,
    N,
    O,
    P,
    S,
    F,
    Cl,
    Br,
    I,
    Other,
}

impl Element {
    pub const ALL: [Element; 11] = [
        Element::B,
        Element::C,
        Element::N,
        Element::O,
        Element::P,
        Element::S,
        Element::F,
        Element::Cl,
        Element::Br,
        Element::I,
        Element::Other,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::P => "P",
            Element::S => "S",
            Element::F => "F",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
            Element::Other => "*",
        }
    }

    /// Elements that have a lowercase aromatic spelling in the subset.
    pub fn can_be_aromatic(self) -> bool {
        matches!(
            self,
            Element::B | Element::C | Element::N | Element::O | Element::P | Element::S
        )
    }
}

pub const MIN_CHARGE: i8 = -2;
pub const MAX_CHARGE: i8 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: Element,
    pub aromatic: bool,
    /// Clamped to `[-2, 2]`.
    pub formal_charge: i8,
    /// Explicit hydrogen count from a bracket atom; never materialised as nodes.
    pub hydrogens: Option<u8>,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Self {
            element,
            aromatic: false,
            formal_charge: 0,
            hydrogens: None,
        }
    }

    pub fn aromatic(element: Element) -> Self {
        Self {
            aromatic: true,
            ..Self::new(element)
        }
    }

    pub fn with_charge(mut self, charge: i32) -> Self {
        self.formal_charge = charge.clamp(MIN_CHARGE as i32, MAX_CHARGE as i32) as i8;
        self
    }

    /// Dense integer label used for node-level colour refinement.
    pub fn label(&self) -> u32 {
        let charge = (self.formal_charge - MIN_CHARGE) as u32;
        (self.element.index() as u32 * 2 + self.aromatic as u32) * 5 + charge
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("bond {a}-{b} references a missing atom (graph has {n})")]
    EndpointOutOfRange { a: usize, b: usize, n: usize },
    #[error("self-loop on atom {0}")]
    SelfLoop(usize),
    #[error("duplicate bond {0}-{1}")]
    DuplicateBond(usize, usize),
    #[error("graph has {0} connected components")]
    Disconnected(usize),
}

/// Heavy-atom molecular graph. Node order is the order atoms were added.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MolecularGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    neighbors: Vec<Vec<usize>>,
    allow_components: bool,
}

impl MolecularGraph {
    /// Validates the bond list and, unless `allow_components`, connectivity.
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>, allow_components: bool) -> Result<Self, GraphError> {
        let n = atoms.len();
        let mut neighbors = vec![Vec::new(); n];
        for bond in &bonds {
            let (a, b) = (bond.a, bond.b);
            if a >= n || b >= n {
                return Err(GraphError::EndpointOutOfRange { a, b, n });
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            if neighbors[a].contains(&b) {
                return Err(GraphError::DuplicateBond(a.min(b), a.max(b)));
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        neighbors.iter_mut().for_each(|nb| nb.sort_unstable());
        let graph = Self {
            atoms,
            bonds,
            neighbors,
            allow_components,
        };
        let comps = graph.component_count();
        if comps > 1 && !allow_components {
            return Err(GraphError::Disconnected(comps));
        }
        Ok(graph)
    }

    /// All-carbon skeleton with single bonds; handy for abstract topologies.
    pub fn skeleton(n: usize, edges: &[(usize, usize)], allow_components: bool) -> Result<Self, GraphError> {
        let atoms = vec![Atom::new(Element::C); n];
        let bonds = edges
            .iter()
            .map(|&(a, b)| Bond {
                a,
                b,
                order: BondOrder::Single,
            })
            .collect();
        Self::new(atoms, bonds, allow_components)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    /// Sorted neighbour list of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn has_bond(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.bonds
            .iter()
            .find(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a))
    }

    pub fn allows_components(&self) -> bool {
        self.allow_components
    }

    /// Dense symmetric adjacency matrix.
    pub fn adjacency(&self) -> Vec<Vec<bool>> {
        let n = self.atoms.len();
        let mut adj = vec![vec![false; n]; n];
        for b in &self.bonds {
            adj[b.a][b.b] = true;
            adj[b.b][b.a] = true;
        }
        adj
    }

    /// Component id per node, numbered in order of first appearance.
    pub fn components(&self) -> Vec<usize> {
        let n = self.atoms.len();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            comp[s] = next;
            while let Some(v) = stack.pop() {
                for &w in &self.neighbors[v] {
                    if comp[w] == usize::MAX {
                        comp[w] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn component_count(&self) -> usize {
        self.components().into_iter().max().map_or(0, |m| m + 1)
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() <= 1
    }

    /// Node-labelled view for colour refinement; labels come from [`Atom::label`].
    pub fn to_generic(&self) -> GenericGraph {
        GenericGraph {
            node_labels: self.atoms.iter().map(Atom::label).collect(),
            edges: self.bonds.iter().map(|b| (b.a, b.b)).collect(),
        }
    }

    /// Relabels nodes: node `i` of `self` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.atoms.len();
        let mut atoms = vec![Atom::new(Element::C); n];
        for (i, a) in self.atoms.iter().enumerate() {
            atoms[perm[i]] = a.clone();
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond {
                a: perm[b.a],
                b: perm[b.b],
                order: b.order,
            })
            .collect();
        Self::new(atoms, bonds, self.allow_components).expect("permutation preserves validity")
    }
}

/// Simple undirected graph with non-negative integer node labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenericGraph {
    pub node_labels: Vec<u32>,
    pub edges: Vec<(usize, usize)>,
}

impl GenericGraph {
    /// Unlabelled (all zero) graph after validating simplicity.
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self, GraphError> {
        Self::labelled(vec![0; n], edges)
    }

    pub fn labelled(node_labels: Vec<u32>, edges: Vec<(usize, usize)>) -> Result<Self, GraphError> {
        let n = node_labels.len();
        let mut seen = std::collections::BTreeSet::new();
        for &(a, b) in &edges {
            if a >= n || b >= n {
                return Err(GraphError::EndpointOutOfRange { a, b, n });
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(GraphError::DuplicateBond(a.min(b), a.max(b)));
            }
        }
        Ok(Self { node_labels, edges })
    }

    pub fn node_count(&self) -> usize {
        self.node_labels.len()
    }

    pub fn neighbor_lists(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.node_count()];
        for &(a, b) in &self.edges {
            nb[a].push(b);
            nb[b].push(a);
        }
        nb.iter_mut().for_each(|l| l.sort_unstable());
        nb
    }

    /// Node `i` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut labels = vec![0; self.node_count()];
        for (i, &l) in self.node_labels.iter().enumerate() {
            labels[perm[i]] = l;
        }
        Self {
            node_labels: labels,
            edges: self.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect(),
        }
    }

    /// All-carbon molecular skeleton of this topology; labels are dropped.
    pub fn to_skeleton(&self) -> MolecularGraph {
        MolecularGraph::skeleton(self.node_count(), &self.edges, true).expect("validated graph")
    }
}
