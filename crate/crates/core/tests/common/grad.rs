//! Finite-difference checks for every tape op and three composite graphs.

use fragpredict::encoder::{EncoderConfig, GraphBatch, MaskPlan};
use fragpredict::fragmenter::{fragment, FragmentConfig};
use fragpredict::molgraph::parse_smiles;
use fragpredict::pretrain::{Pretrainer, TrainerConfig};
use fragpredict::tensor::{seeded_rng, BnMode, Tape, Tensor};

use super::{gradcheck, random_tensor, random_tensor_off_zero, reduce, rel_err, FD_STEP};

/// `(op name, max relative error)` for every op that records a backward rule.
/// `detach` has no backward rule by design; its entry is 0 iff no gradient
/// crosses it.
pub fn op_errors() -> Vec<(&'static str, f64)> {
    let mut rng = seeded_rng(42);
    let mut out = Vec::new();
    let a = random_tensor(&mut rng, &[4, 3]);
    let b = random_tensor(&mut rng, &[3, 5]);
    let c = random_tensor(&mut rng, &[4, 3]);
    let row = random_tensor(&mut rng, &[3]);
    let e = random_tensor(&mut rng, &[4, 2]);

    out.push(("matmul", gradcheck(&[a.clone(), b.clone()], |t, v| {
        let y = t.matmul(v[0], v[1]).unwrap();
        reduce(t, y, 1)
    })));
    out.push(("add", gradcheck(&[a.clone(), c.clone()], |t, v| {
        let y = t.add(v[0], v[1]).unwrap();
        reduce(t, y, 2)
    })));
    out.push(("add_row", gradcheck(&[a.clone(), row.clone()], |t, v| {
        let y = t.add_row(v[0], v[1]).unwrap();
        reduce(t, y, 3)
    })));
    out.push(("scale", gradcheck(std::slice::from_ref(&a), |t, v| {
        let y = t.scale(v[0], -1.7);
        reduce(t, y, 4)
    })));
    out.push(("concat", gradcheck(&[a.clone(), e.clone()], |t, v| {
        let y = t.concat(v[0], v[1]).unwrap();
        reduce(t, y, 5)
    })));
    let off = random_tensor_off_zero(&mut rng, &[4, 3], 1e-3);
    out.push(("relu", gradcheck(&[off], |t, v| {
        let y = t.relu(v[0]);
        reduce(t, y, 6)
    })));
    out.push(("segment_mean", gradcheck(std::slice::from_ref(&a), |t, v| {
        let y = t.segment_mean(v[0], &[2, 0, 2, 1], 3).unwrap();
        reduce(t, y, 7)
    })));
    out.push(("gather_rows", gradcheck(std::slice::from_ref(&a), |t, v| {
        let y = t.gather_rows(v[0], &[3, 0, 3, 1, 1]).unwrap();
        reduce(t, y, 8)
    })));
    out.push(("scatter_add_rows", gradcheck(std::slice::from_ref(&a), |t, v| {
        let y = t.scatter_add_rows(v[0], &[1, 1, 0, 4], 5).unwrap();
        reduce(t, y, 9)
    })));
    let gamma = random_tensor(&mut rng, &[3]);
    let beta = random_tensor(&mut rng, &[3]);
    out.push(("batchnorm_batch", gradcheck(&[a.clone(), gamma.clone(), beta.clone()], |t, v| {
        let (y, _) = t.batchnorm(v[0], v[1], v[2], BnMode::Batch).unwrap();
        reduce(t, y, 10)
    })));
    let (mean, var) = (vec![0.1, -0.3, 0.2], vec![0.5, 1.5, 0.9]);
    out.push(("batchnorm_running", gradcheck(&[a.clone(), gamma, beta], |t, v| {
        let (y, _) = t
            .batchnorm(v[0], v[1], v[2], BnMode::Running { mean: &mean, var: &var })
            .unwrap();
        reduce(t, y, 11)
    })));
    let target = random_tensor(&mut rng, &[4, 3]);
    out.push(("row_sq_dist", gradcheck(std::slice::from_ref(&a), |t, v| {
        t.row_sq_dist(v[0], &target, &[0.3, 0.0, 1.2, 0.7]).unwrap()
    })));
    out.push(("mse_masked", gradcheck(std::slice::from_ref(&a), |t, v| {
        t.mse_masked(v[0], &target, &[0, 2]).unwrap()
    })));
    out.push(("replace_rows", gradcheck(&[a.clone(), row], |t, v| {
        let y = t.replace_rows(v[0], v[1], &[1, 3]).unwrap();
        reduce(t, y, 12)
    })));
    out.push(("bce_with_logits", gradcheck(std::slice::from_ref(&e), |t, v| {
        t.bce_with_logits(v[0], &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0], &[0.5, 1.0, 0.0, 0.25, 1.0, 1.0, 0.5, 0.1])
            .unwrap()
    })));
    out.push(("softmax_xent", gradcheck(std::slice::from_ref(&a), |t, v| {
        t.softmax_xent(v[0], &[2, 0, 1, 2], &[0.25, 0.5, 1.0, 0.0]).unwrap()
    })));

    // Stop-gradient: nothing may flow back through a detached copy.
    let mut tape = Tape::new();
    let x = tape.param(a);
    let d = tape.detach(x);
    let y = reduce(&mut tape, d, 13);
    let g = tape.backward(y);
    let leak = g.get(x).map_or(0.0, |t| t.data().iter().fold(0.0f64, |m, v| m.max(v.abs())));
    out.push(("detach", leak));
    out
}

/// Two small hand-wired composites plus a full encoder, predictor and loss pass.
pub fn composite_errors() -> Vec<(&'static str, f64)> {
    let mut rng = seeded_rng(7);
    let mut out = Vec::new();

    let x = random_tensor(&mut rng, &[6, 4]);
    let w1 = random_tensor(&mut rng, &[4, 5]);
    let b1 = random_tensor(&mut rng, &[5]);
    let w2 = random_tensor(&mut rng, &[5, 3]);
    let b2 = random_tensor(&mut rng, &[3]);
    let gamma = random_tensor(&mut rng, &[5]);
    let beta = random_tensor(&mut rng, &[5]);
    out.push((
        "mlp_batchnorm_softmax",
        gradcheck(&[x, w1, b1, gamma, beta, w2, b2], |t, v| {
            let h = t.matmul(v[0], v[1]).unwrap();
            let h = t.add_row(h, v[2]).unwrap();
            let h = t.relu(h);
            let (h, _) = t.batchnorm(h, v[3], v[4], BnMode::Batch).unwrap();
            let z = t.matmul(h, v[5]).unwrap();
            let z = t.add_row(z, v[6]).unwrap();
            t.softmax_xent(z, &[0, 2, 1, 1, 0, 2], &[1.0 / 6.0; 6]).unwrap()
        }),
    ));

    // Five-node ring with a pendant: message passing, pooling and masking.
    let src = [0, 1, 1, 2, 2, 3, 3, 4, 4, 0, 2, 5];
    let dst = [1, 0, 2, 1, 3, 2, 4, 3, 0, 4, 5, 2];
    let h = random_tensor(&mut rng, &[6, 3]);
    let w = random_tensor(&mut rng, &[6, 1]);
    let token = random_tensor(&mut rng, &[3]);
    out.push((
        "message_passing_bce",
        gradcheck(&[h, token, w], |t, v| {
            let msgs = t.gather_rows(v[0], &src).unwrap();
            let agg = t.scatter_add_rows(msgs, &dst, 6).unwrap();
            let own = t.scale(v[0], 1.1);
            let z = t.add(own, agg).unwrap();
            let z = t.replace_rows(z, v[1], &[1, 4]).unwrap();
            let pooled = t.segment_mean(z, &[0, 0, 1, 1, 1, 2], 3).unwrap();
            let back = t.gather_rows(pooled, &[0, 0, 1, 1, 1, 2]).unwrap();
            let joined = t.concat(z, back).unwrap();
            let logits = t.matmul(joined, v[2]).unwrap();
            t.bce_with_logits(logits, &[1.0, 0.0, 1.0, 1.0, 0.0, 0.0], &[1.0 / 6.0; 6]).unwrap()
        }),
    ));

    out.push(("encoder_predictor_loss", encoder_pass_error()));
    out
}

/// Every context-encoder and predictor parameter of a narrow model on two
/// molecules, with a fixed mask hitting nodes and fragments.
pub fn encoder_pass_error() -> f64 {
    let smiles = ["Cc1ccc(O)cc1", "CC1CCN(C)C1"];
    let gs: Vec<_> = smiles.iter().map(|s| parse_smiles(s).unwrap()).collect();
    let ds: Vec<_> = gs.iter().map(|g| fragment(g, &FragmentConfig::default()).unwrap()).collect();
    let items: Vec<_> = gs.iter().zip(&ds).collect();
    let batch = GraphBatch::<f64>::new(&items);
    let plan = MaskPlan {
        nodes: vec![1, 5, 9, 12],
        fragments: vec![0, 3],
    };
    let enc = EncoderConfig {
        hidden: 6,
        node_layers: 3,
        fragment_layer_positions: vec![1, 2],
        ..Default::default()
    };
    let trainer = TrainerConfig {
        target_layers: 2,
        seed: 5,
        ..Default::default()
    };
    let mut p = Pretrainer::<f64>::new(enc, trainer, FragmentConfig::default()).unwrap();
    // Zero-initialised biases put all-zero rows exactly on a ReLU kink; jitter
    // every parameter so finite differences see a smooth neighbourhood.
    let mut rng = seeded_rng(11);
    let jitter = |t: &mut Tensor<f64>, rng: &mut _| {
        let noise = random_tensor(rng, t.shape());
        t.data_mut().iter_mut().zip(noise.data()).for_each(|(x, n)| *x += 0.3 * n);
    };
    p.context_mut().params_mut().values_mut().iter_mut().for_each(|t| jitter(t, &mut rng));
    p.predictors_mut().params_mut().values_mut().iter_mut().for_each(|t| jitter(t, &mut rng));
    let loss_of = |q: &Pretrainer<f64>| {
        let mut tape = Tape::new();
        let obj = q.objective(&mut tape, &batch, &plan).unwrap();
        tape.value(obj.loss).item()
    };
    let mut tape = Tape::new();
    let obj = p.objective(&mut tape, &batch, &plan).unwrap();
    let grads = tape.backward(obj.loss);

    let mut worst = 0.0f64;
    let sides: [(&[_], bool); 2] = [(&obj.context_vars, true), (&obj.predictor_vars, false)];
    for (vars, context) in sides {
        for (k, &var) in vars.iter().enumerate() {
            let value = |q: &Pretrainer<f64>| -> Tensor<f64> {
                if context {
                    q.context().params().values()[k].clone()
                } else {
                    q.predictors().params().values()[k].clone()
                }
            };
            let base = value(&p);
            let analytic = grads.get(var).cloned().unwrap_or_else(|| Tensor::zeros(base.shape()));
            for j in 0..base.len() {
                let eval = |delta: f64| {
                    let mut q = p.clone();
                    let store = if context { q.context_mut().params_mut() } else { q.predictors_mut().params_mut() };
                    store.values_mut()[k].data_mut()[j] = base.data()[j] + delta;
                    loss_of(&q)
                };
                let numeric = (eval(FD_STEP) - eval(-FD_STEP)) / (2.0 * FD_STEP);
                worst = worst.max(rel_err(analytic.data()[j], numeric));
            }
        }
    }
    worst
}
