//! Binary checkpoint: `"GRSP"`, u32 version, u32-length-prefixed config text,
//! then `[u32 name len, name, u32 rank, u64 dims.., f64 payload]` blocks until
//! end of file. Everything is little-endian.

use std::collections::BTreeMap;
use std::io::{self, Read};
use std::path::Path;

use thiserror::Error;

use super::{PretrainError, Pretrainer};
use crate::config::RunConfig;
use crate::encoder::HierarchicalEncoder;
use crate::scalar::Scalar;
use crate::tensor::{AdamState, ParamStore, Tensor};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"GRSP";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a checkpoint (bad magic bytes)")]
    BadMagic,
    #[error("checkpoint version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("tensor shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("bad checkpoint config: {0}")]
    Config(String),
}

fn blocks<T: Scalar>(p: &Pretrainer<T>) -> Vec<(String, Tensor<T>)> {
    let mut out = Vec::new();
    let params = |out: &mut Vec<_>, prefix: &str, store: &ParamStore<T>| {
        for (name, v) in store.iter() {
            out.push((format!("{prefix}/{name}"), v.clone()));
        }
    };
    let running = |out: &mut Vec<_>, prefix: &str, enc: &HierarchicalEncoder<T>| {
        for (l, s) in enc.running_stats().iter().enumerate() {
            let d = s.mean.len();
            out.push((format!("{prefix}.bn_mean/{l}"), Tensor::new(vec![d], s.mean.clone()).unwrap()));
            out.push((format!("{prefix}.bn_var/{l}"), Tensor::new(vec![d], s.var.clone()).unwrap()));
        }
    };
    let adam = |out: &mut Vec<_>, prefix: &str, store: &ParamStore<T>, st: &AdamState<T>| {
        for (i, name) in store.names().iter().enumerate() {
            out.push((format!("adam.{prefix}.m/{name}"), st.m[i].clone()));
            out.push((format!("adam.{prefix}.v/{name}"), st.v[i].clone()));
        }
        out.push((format!("adam.{prefix}.step"), Tensor::scalar(T::lit(st.step as f64))));
    };
    params(&mut out, "context", p.context.params());
    running(&mut out, "context", &p.context);
    params(&mut out, "target", p.target.params());
    running(&mut out, "target", &p.target);
    params(&mut out, "predictor", p.predictors.params());
    adam(&mut out, "context", p.context.params(), &p.adam_context);
    adam(&mut out, "predictor", p.predictors.params(), &p.adam_predictor);
    out.push(("trainer.step".into(), Tensor::scalar(T::lit(p.step as f64))));
    out.push(("trainer.total_steps".into(), Tensor::scalar(T::lit(p.total_steps as f64))));
    out
}

fn config_text<T: Scalar>(p: &Pretrainer<T>) -> String {
    let run = RunConfig {
        encoder: p.context.config().clone(),
        trainer: p.config.clone(),
        fragment: p.fragment_config,
        ..Default::default()
    };
    format!("scalar={}\n{}", T::NAME, run.to_text())
}

/// Serialises the full trainer state.
pub fn encode_checkpoint<T: Scalar>(p: &Pretrainer<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let cfg = config_text(p);
    out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    out.extend_from_slice(cfg.as_bytes());
    for (name, t) in blocks(p) {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &x in t.data() {
            out.extend_from_slice(&x.as_f64().to_le_bytes());
        }
    }
    out
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut b = [0; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_string(r: &mut impl Read, len: usize) -> Result<String, CheckpointError> {
    let mut b = vec![0; len];
    r.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|_| CheckpointError::Config("non-UTF-8 text".into()))
}

fn parse_config(text: &str, scalar: &str) -> Result<RunConfig, CheckpointError> {
    let mut rest = String::new();
    let mut found = None;
    for line in text.lines() {
        match line.strip_prefix("scalar=") {
            Some(s) => found = Some(s.trim().to_string()),
            None => {
                rest.push_str(line);
                rest.push('\n');
            }
        }
    }
    match found {
        Some(s) if s == scalar => {}
        Some(s) => return Err(CheckpointError::Config(format!("scalar type {s}, expected {scalar}"))),
        None => return Err(CheckpointError::Config("missing scalar key".into())),
    }
    RunConfig::from_text(&rest).map_err(|e| CheckpointError::Config(e.to_string()))
}

/// Parses a checkpoint, rebuilding the trainer from its embedded config and
/// requiring every tensor to be present with the expected shape.
pub fn decode_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<Pretrainer<T>, CheckpointError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut r = &bytes[4..];
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::VersionMismatch {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let len = read_u32(&mut r)? as usize;
    let cfg = parse_config(&read_string(&mut r, len)?, T::NAME)?;
    let mut stored = BTreeMap::new();
    while !r.is_empty() {
        let len = read_u32(&mut r)? as usize;
        let name = read_string(&mut r, len)?;
        let rank = read_u32(&mut r)? as usize;
        let dims = (0..rank).map(|_| read_u64(&mut r).map(|d| d as usize)).collect::<io::Result<Vec<_>>>()?;
        let count: usize = dims.iter().product();
        if count.saturating_mul(8) > r.len() {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, format!("payload of {name} truncated")).into());
        }
        let data = (0..count)
            .map(|_| read_u64(&mut r).map(|b| T::lit(f64::from_bits(b))))
            .collect::<io::Result<Vec<_>>>()?;
        stored.insert(name, Tensor::new(dims, data).expect("dims match payload"));
    }

    let mut p = Pretrainer::new(cfg.encoder, cfg.trainer, cfg.fragment).map_err(|e| match e {
        PretrainError::Checkpoint(c) => c,
        other => CheckpointError::Config(other.to_string()),
    })?;
    let template = blocks(&p);
    for (name, t) in &template {
        match stored.get(name) {
            None => return Err(CheckpointError::ShapeMismatch(format!("missing tensor {name}"))),
            Some(s) if s.shape() != t.shape() => {
                return Err(CheckpointError::ShapeMismatch(format!(
                    "{name}: stored {:?}, expected {:?}",
                    s.shape(),
                    t.shape()
                )))
            }
            Some(_) => {}
        }
    }
    if stored.len() != template.len() {
        let extra = stored.keys().find(|k| !template.iter().any(|(n, _)| n == *k)).unwrap();
        return Err(CheckpointError::ShapeMismatch(format!("unexpected tensor {extra}")));
    }
    let mut take = |name: String| stored.remove(&name).expect("validated above");
    let step = |t: Tensor<T>| t.item().as_f64() as u64;

    let fill = |take: &mut dyn FnMut(String) -> Tensor<T>, prefix: &str, store: &mut ParamStore<T>| {
        let names = store.names().to_vec();
        for (v, name) in store.values_mut().iter_mut().zip(names) {
            *v = take(format!("{prefix}/{name}"));
        }
    };
    let fill_running = |take: &mut dyn FnMut(String) -> Tensor<T>, prefix: &str, enc: &mut HierarchicalEncoder<T>| {
        for (l, s) in enc.running_stats_mut().iter_mut().enumerate() {
            s.mean = take(format!("{prefix}.bn_mean/{l}")).into_data();
            s.var = take(format!("{prefix}.bn_var/{l}")).into_data();
        }
    };
    let fill_adam = |take: &mut dyn FnMut(String) -> Tensor<T>, prefix: &str, names: &[String], st: &mut AdamState<T>| {
        for (i, name) in names.iter().enumerate() {
            st.m[i] = take(format!("adam.{prefix}.m/{name}"));
            st.v[i] = take(format!("adam.{prefix}.v/{name}"));
        }
        st.step = step(take(format!("adam.{prefix}.step")));
    };
    fill(&mut take, "context", p.context.params_mut());
    fill_running(&mut take, "context", &mut p.context);
    fill(&mut take, "target", p.target.params_mut());
    fill_running(&mut take, "target", &mut p.target);
    fill(&mut take, "predictor", p.predictors.params_mut());
    let names = p.context.params().names().to_vec();
    fill_adam(&mut take, "context", &names, &mut p.adam_context);
    let names = p.predictors.params().names().to_vec();
    fill_adam(&mut take, "predictor", &names, &mut p.adam_predictor);
    p.step = step(take("trainer.step".into()));
    p.total_steps = step(take("trainer.total_steps".into()));
    Ok(p)
}

pub fn save_checkpoint<T: Scalar>(p: &Pretrainer<T>, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    std::fs::write(path, encode_checkpoint(p))?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<Pretrainer<T>, CheckpointError> {
    decode_checkpoint(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{EncoderConfig, GraphBatch};
    use crate::fragmenter::{fragment, FragmentConfig};
    use crate::molgraph::parse_smiles;
    use crate::pretrain::TrainerConfig;

    fn trained() -> Pretrainer<f64> {
        let enc = EncoderConfig { hidden: 6, ..Default::default() };
        let mut p = Pretrainer::new(enc, TrainerConfig { mask_ratio: 0.5, ..Default::default() }, FragmentConfig::default()).unwrap();
        let g = parse_smiles("c1ccccc1CCO").unwrap();
        let d = fragment(&g, &FragmentConfig::default()).unwrap();
        let b = GraphBatch::new(&[(&g, &d)]);
        p.set_total_steps(10);
        p.train_step(&b, 1).unwrap();
        p.train_step(&b, 1).unwrap();
        p
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let p = trained();
        let bytes = encode_checkpoint(&p);
        let q: Pretrainer<f64> = decode_checkpoint(&bytes).unwrap();
        assert_eq!(encode_checkpoint(&q), bytes);
        assert_eq!(q.context, p.context);
        assert_eq!(q.adam_predictor, p.adam_predictor);
        assert_eq!(q.steps_done(), 2);
    }

    #[test]
    fn rejects_damage() {
        let bytes = encode_checkpoint(&trained());
        assert!(matches!(decode_checkpoint::<f64>(&bytes[..3]), Err(CheckpointError::BadMagic)));
        assert!(matches!(decode_checkpoint::<f64>(b"NOPE1234"), Err(CheckpointError::BadMagic)));
        let mut v = bytes.clone();
        v[4] = 9;
        assert!(matches!(decode_checkpoint::<f64>(&v), Err(CheckpointError::VersionMismatch { found: 9, .. })));
        assert!(matches!(decode_checkpoint::<f64>(&bytes[..bytes.len() - 5]), Err(CheckpointError::Io(_))));
        assert!(matches!(decode_checkpoint::<f32>(&bytes), Err(CheckpointError::Config(_))));
    }

    #[test]
    fn rejects_shape_change() {
        let bytes = encode_checkpoint(&trained());
        let at = bytes.windows(8).position(|w| w == b"hidden=6").unwrap();
        let mut v = bytes.clone();
        v[at + 7] = b'8';
        let r = decode_checkpoint::<f64>(&v);
        assert!(matches!(r, Err(CheckpointError::ShapeMismatch(_))), "{:?}", r.err());
    }
}
