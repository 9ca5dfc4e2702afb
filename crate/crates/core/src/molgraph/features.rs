use super::{MolecularGraph, MIN_CHARGE};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Element one-hot (11) + degree one-hot 0..=6 (7) + charge one-hot −2..=2 (5) + aromatic flag (1).
pub const FEATURE_DIM: usize = 24;

const ELEMENT_OFFSET: usize = 0;
const DEGREE_OFFSET: usize = 11;
const CHARGE_OFFSET: usize = 18;
const AROMATIC_OFFSET: usize = 23;
const MAX_DEGREE: usize = 6;

/// `N×24` node feature matrix; degrees above 6 share the last slot.
pub fn featurize<T: Scalar>(graph: &MolecularGraph) -> Tensor<T> {
    let n = graph.atom_count();
    let mut data = vec![T::zero(); n * FEATURE_DIM];
    for (i, atom) in graph.atoms().iter().enumerate() {
        let row = &mut data[i * FEATURE_DIM..(i + 1) * FEATURE_DIM];
        row[ELEMENT_OFFSET + atom.element.index()] = T::one();
        row[DEGREE_OFFSET + graph.degree(i).min(MAX_DEGREE)] = T::one();
        row[CHARGE_OFFSET + (atom.formal_charge - MIN_CHARGE) as usize] = T::one();
        if atom.aromatic {
            row[AROMATIC_OFFSET] = T::one();
        }
    }
    Tensor::new(vec![n, FEATURE_DIM], data).expect("feature shape")
}
