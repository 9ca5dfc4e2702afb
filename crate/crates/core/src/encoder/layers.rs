use crate::scalar::Scalar;
use crate::tensor::{glorot_init, ParamId, ParamStore, Rng, Tape, Tensor, TensorError, Var};

/// `x·W + b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, fan_in: usize, fan_out: usize, rng: &mut Rng) -> Self {
        let w = store.add(format!("{name}.w"), glorot_init(fan_in, fan_out, rng));
        let b = store.add(format!("{name}.b"), Tensor::zeros(&[fan_out]));
        Self { w, b }
    }

    pub fn apply<T: Scalar>(&self, tape: &mut Tape<T>, vars: &[Var], x: Var) -> Result<Var, TensorError> {
        let h = tape.matmul(x, vars[self.w.0])?;
        tape.add_row(h, vars[self.b.0])
    }
}

/// Linear layers with ReLU between them (none after the last).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    /// `widths = [in, hidden.., out]`.
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, widths: &[usize], rng: &mut Rng) -> Self {
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        Self { layers }
    }

    pub fn apply<T: Scalar>(&self, tape: &mut Tape<T>, vars: &[Var], x: Var) -> Result<Var, TensorError> {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                h = tape.relu(h);
            }
            h = layer.apply(tape, vars, h)?;
        }
        Ok(h)
    }
}

/// Directed edge lists for neighbour sums `A·H`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeIndex {
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    pub rows: usize,
}

impl EdgeIndex {
    /// Both directions of every undirected edge.
    pub fn undirected(rows: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut out = Self {
            rows,
            ..Self::default()
        };
        for (a, b) in edges {
            out.src.extend([a, b]);
            out.dst.extend([b, a]);
        }
        out
    }
}

/// `(1+ε)·H + A·H`.
pub fn gin_aggregate<T: Scalar>(tape: &mut Tape<T>, h: Var, edges: &EdgeIndex, epsilon: T) -> Result<Var, TensorError> {
    let msgs = tape.gather_rows(h, &edges.src)?;
    let agg = tape.scatter_add_rows(msgs, &edges.dst, edges.rows)?;
    let own = if epsilon == T::zero() { h } else { tape.scale(h, T::one() + epsilon) };
    tape.add(own, agg)
}
