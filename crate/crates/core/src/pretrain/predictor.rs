use crate::encoder::{gin_aggregate, EncoderConfig, GraphBatch, Mlp};
use crate::scalar::Scalar;
use crate::tensor::{glorot_init, ParamId, ParamStore, Rng, Tape, TensorError, Var};

/// Node predictor: masked context rows become a learned token, then `k` GIN
/// layers over the atom adjacency. Fragment predictor: a `k`-layer row MLP.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictors<T> {
    params: ParamStore<T>,
    token: ParamId,
    node_layers: Vec<Mlp>,
    /// Absent when the encoder has no fragment channel.
    fragment: Option<Mlp>,
    epsilon: f64,
}

impl<T: Scalar> Predictors<T> {
    pub fn new(encoder: &EncoderConfig, depth: usize, rng: &mut Rng) -> Self {
        let d = encoder.hidden;
        let mut params = ParamStore::new();
        let token = params.add(
            "pred.node.token",
            glorot_init(1, d, rng).reshape(vec![d]).expect("token shape"),
        );
        let node_layers = (0..depth)
            .map(|i| Mlp::new(&mut params, &format!("pred.node.{i}"), &[d, d, d], rng))
            .collect();
        let fragment = encoder
            .use_fragments
            .then(|| Mlp::new(&mut params, "pred.frag", &vec![d; depth + 1], rng));
        Self {
            params,
            token,
            node_layers,
            fragment,
            epsilon: encoder.gin_epsilon,
        }
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    /// Predictions at `masked` rows, in that order; `None` for an empty mask.
    pub fn predict_nodes(
        &self,
        tape: &mut Tape<T>,
        vars: &[Var],
        context_nodes: Var,
        masked: &[usize],
        batch: &GraphBatch<T>,
    ) -> Result<Option<Var>, TensorError> {
        if masked.is_empty() {
            return Ok(None);
        }
        let mut h = tape.replace_rows(context_nodes, vars[self.token.0], masked)?;
        for (i, mlp) in self.node_layers.iter().enumerate() {
            if i > 0 {
                h = tape.relu(h);
            }
            let agg = gin_aggregate(tape, h, &batch.node_edges, T::lit(self.epsilon))?;
            h = mlp.apply(tape, vars, agg)?;
        }
        Ok(Some(tape.gather_rows(h, masked)?))
    }

    /// Row-wise MLP on the masked fragment rows; `None` for an empty mask or
    /// when there is no fragment predictor.
    pub fn predict_fragments(
        &self,
        tape: &mut Tape<T>,
        vars: &[Var],
        context_fragments: Var,
        masked: &[usize],
    ) -> Result<Option<Var>, TensorError> {
        let Some(mlp) = self.fragment.as_ref().filter(|_| !masked.is_empty()) else {
            return Ok(None);
        };
        let rows = tape.gather_rows(context_fragments, masked)?;
        Ok(Some(mlp.apply(tape, vars, rows)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fragmenter::{fragment, FragmentConfig};
    use crate::molgraph::parse_smiles;
    use crate::tensor::{seeded_rng, Tensor};

    fn setup(smiles: &str) -> (Predictors<f64>, GraphBatch<f64>) {
        let g = parse_smiles(smiles).unwrap();
        let d = fragment(&g, &FragmentConfig::default()).unwrap();
        let cfg = EncoderConfig { hidden: 4, ..Default::default() };
        (Predictors::new(&cfg, 2, &mut seeded_rng(9)), GraphBatch::new(&[(&g, &d)]))
    }

    #[test]
    fn empty_masks_give_nothing() {
        let (p, b) = setup("CCO");
        let mut tape = Tape::new();
        let vars = p.params().bind_frozen(&mut tape);
        let z = tape.constant(Tensor::zeros(&[3, 4]));
        assert!(p.predict_nodes(&mut tape, &vars, z, &[], &b).unwrap().is_none());
        assert!(p.predict_fragments(&mut tape, &vars, z, &[]).unwrap().is_none());
    }

    #[test]
    fn lone_masked_atom_sees_only_the_token() {
        let (p, b) = setup("C");
        let mut tape = Tape::new();
        let vars = p.params().bind_frozen(&mut tape);
        let z1 = tape.constant(Tensor::full(&[1, 4], 3.0));
        let z2 = tape.constant(Tensor::full(&[1, 4], -7.0));
        let a = p.predict_nodes(&mut tape, &vars, z1, &[0], &b).unwrap().unwrap();
        let c = p.predict_nodes(&mut tape, &vars, z2, &[0], &b).unwrap().unwrap();
        assert_eq!(tape.value(a).shape(), &[1, 4]);
        assert_eq!(tape.value(a), tape.value(c));
    }

    #[test]
    fn identical_fragment_rows_identical_predictions() {
        let (p, _) = setup("CCO");
        let mut tape = Tape::new();
        let vars = p.params().bind_frozen(&mut tape);
        let f = tape.constant(Tensor::from_rows(&vec![vec![0.5, 1.0, -1.0, 2.0]; 3]).unwrap());
        let out = p.predict_fragments(&mut tape, &vars, f, &[0, 2]).unwrap().unwrap();
        let out = tape.value(out);
        assert_eq!(out.shape(), &[2, 4]);
        assert_eq!(out.row(0), out.row(1));
    }
}
