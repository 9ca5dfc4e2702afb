use std::fmt::Write;

use rand::seq::SliceRandom;

use super::{DownstreamConfig, DownstreamError};
use crate::encoder::{BnUsage, GraphBatch, HierarchicalEncoder};
use crate::fragmenter::{FragmentDecomposition, FragmentVocabulary, VocabEntry};
use crate::molgraph::MolecularGraph;
use crate::scalar::Scalar;
use crate::tensor::{seeded_rng, AdamState, Tape, Tensor};

/// Count buckets `0, 1, 2, ≥3`.
pub const COUNT_BUCKETS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    pub query: VocabEntry,
    /// Held-out accuracy; `None` when every molecule falls in one bucket.
    pub accuracy: Option<f64>,
    /// Molecules containing the fragment at least once.
    pub n_pos: usize,
}

pub fn probe_csv(rows: &[ProbeRow]) -> String {
    let mut out = String::from("query,accuracy,n_pos\n");
    for r in rows {
        match &r.accuracy {
            Some(a) => writeln!(out, "{},{},{}", r.query, a, r.n_pos).unwrap(),
            None => writeln!(out, "{},DegenerateLabels,{}", r.query, r.n_pos).unwrap(),
        }
    }
    out
}

/// Frozen graph embeddings `H_G` (running batch-norm statistics), one row per molecule.
pub fn graph_embeddings<T: Scalar>(
    encoder: &HierarchicalEncoder<T>,
    data: &[(&MolecularGraph, &FragmentDecomposition)],
    chunk: usize,
) -> Result<Vec<Vec<f64>>, DownstreamError> {
    let mut out = Vec::with_capacity(data.len());
    for part in data.chunks(chunk.max(1)) {
        let batch = GraphBatch::new(part);
        let g = encoder.encode(&batch, None, BnUsage::Running)?.graph;
        out.extend((0..g.rows()).map(|i| g.row(i).iter().map(|v| v.as_f64()).collect()));
    }
    Ok(out)
}

pub fn count_bucket(decomp: &FragmentDecomposition, query: VocabEntry) -> usize {
    let idx = query.index();
    let n = decomp.fragments.iter().filter(|f| FragmentVocabulary.vocab_index(f) == idx).count();
    n.min(COUNT_BUCKETS - 1)
}

/// Seeded shuffle; the first `round(holdout·n)` indices are held out. Both
/// sides keep at least one molecule.
pub fn holdout_split(n: usize, holdout: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded_rng(seed));
    let k = ((holdout * n as f64).round() as usize).clamp(1.min(n), n.saturating_sub(1).max(1));
    let test = idx[..k].to_vec();
    let train = idx[k..].to_vec();
    (train, test)
}

/// Multinomial logistic regression on standardised features, trained with
/// full-batch Adam from zero weights. Returns held-out accuracy.
pub fn linear_probe(
    features: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
    train: &[usize],
    test: &[usize],
    config: &DownstreamConfig,
) -> Result<f64, DownstreamError> {
    let d = features.first().map_or(0, Vec::len);
    let n = train.len() as f64;
    let mut mean = vec![0.0; d];
    let mut std = vec![0.0; d];
    for &i in train {
        features[i].iter().zip(&mut mean).for_each(|(x, m)| *m += x / n);
    }
    for &i in train {
        features[i].iter().zip(&mean).zip(&mut std).for_each(|((x, m), s)| *s += (x - m) * (x - m) / n);
    }
    // Constant columns are centred but not scaled.
    let std: Vec<f64> = std.iter().map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 }).collect();
    let design = |rows: &[usize]| -> Result<Tensor<f64>, DownstreamError> {
        let data = rows
            .iter()
            .flat_map(|&i| features[i].iter().zip(&mean).zip(&std).map(|((x, m), s)| (x - m) / s))
            .collect();
        Ok(Tensor::new(vec![rows.len(), d], data)?)
    };
    let (xtr, xte) = (design(train)?, design(test)?);
    let ytr: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let mut params = vec![Tensor::zeros(&[d, classes]), Tensor::zeros(&[classes])];
    let mut adam = AdamState::new(params.iter().map(Tensor::shape));
    let weights = vec![1.0 / n; train.len()];
    for _ in 0..config.probe_epochs {
        let mut tape = Tape::new();
        let w = tape.param(params[0].clone());
        let b = tape.param(params[1].clone());
        let x = tape.constant(xtr.clone());
        let z = tape.matmul(x, w)?;
        let z = tape.add_row(z, b)?;
        let loss = tape.softmax_xent(z, &ytr, &weights)?;
        let mut g = tape.backward(loss);
        let grads = [g.take(w), g.take(b)];
        adam.step(&mut params, &grads, config.probe_lr)?;
    }
    let logits = xte.matmul(&params[0])?;
    let correct = test
        .iter()
        .enumerate()
        .filter(|&(r, &i)| {
            let row: Vec<f64> = logits.row(r).iter().zip(params[1].data()).map(|(a, b)| a + b).collect();
            let best = (0..classes).max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a))).unwrap();
            best == labels[i]
        })
        .count();
    Ok(correct as f64 / test.len() as f64)
}

/// Per query, a linear classifier on frozen `H_G` predicts the count bucket of
/// that fragment type. The encoder is only read.
pub fn probe_fragment_counts<T: Scalar>(
    encoder: &HierarchicalEncoder<T>,
    data: &[(&MolecularGraph, &FragmentDecomposition)],
    queries: &[VocabEntry],
    config: &DownstreamConfig,
    seed: u64,
) -> Result<Vec<ProbeRow>, DownstreamError> {
    if data.len() < 2 {
        return Err(DownstreamError::EmptyDataset);
    }
    let features = graph_embeddings(encoder, data, 64)?;
    let (train, test) = holdout_split(data.len(), config.probe_holdout, seed);
    let mut rows = Vec::new();
    for &query in queries {
        let labels: Vec<usize> = data.iter().map(|(_, d)| count_bucket(d, query)).collect();
        let n_pos = labels.iter().filter(|&&l| l > 0).count();
        let distinct = (0..COUNT_BUCKETS).filter(|b| labels.contains(b)).count();
        let accuracy = if distinct < 2 {
            None
        } else {
            Some(linear_probe(&features, &labels, COUNT_BUCKETS, &train, &test, config)?)
        };
        rows.push(ProbeRow { query, accuracy, n_pos });
    }
    Ok(rows)
}
