use std::path::Path;

use thiserror::Error;

use super::smiles::SmilesError;
use super::{parse_smiles, GenericGraph, GraphError, MolecularGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadMode {
    /// Abort on the first bad line.
    #[default]
    Strict,
    /// Skip bad lines and report them.
    Lenient,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse { line: usize, source: SmilesError },
    #[error("line {line}: bad label '{field}'")]
    BadLabel { line: usize, field: String },
}

/// One parsed dataset line. `None` labels are missing values.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub line: usize,
    pub smiles: String,
    pub graph: MolecularGraph,
    pub labels: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedLine {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadedDataset {
    pub records: Vec<Record>,
    pub skipped: Vec<SkippedLine>,
}

impl LoadedDataset {
    pub fn graphs(&self) -> impl Iterator<Item = &MolecularGraph> {
        self.records.iter().map(|r| &r.graph)
    }
}

pub fn load_smiles_dataset(path: impl AsRef<Path>, mode: LoadMode) -> Result<LoadedDataset, DatasetError> {
    let text = std::fs::read_to_string(path)?;
    parse_smiles_dataset(&text, mode)
}

/// Parses `SMILES[\tlabel...]` lines; blank lines and `#` comments are ignored.
pub fn parse_smiles_dataset(text: &str, mode: LoadMode) -> Result<LoadedDataset, DatasetError> {
    let mut out = LoadedDataset::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let mut fields = raw.split('\t');
        let smiles = fields.next().unwrap_or_default().trim();
        let parsed = parse_smiles(smiles)
            .map_err(|source| DatasetError::Parse { line, source })
            .and_then(|graph| {
                let labels = fields
                    .map(|f| parse_label(f).ok_or_else(|| DatasetError::BadLabel {
                        line,
                        field: f.to_string(),
                    }))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((graph, labels))
            });
        match parsed {
            Ok((graph, labels)) => out.records.push(Record {
                line,
                smiles: smiles.to_string(),
                graph,
                labels,
            }),
            Err(e) if mode == LoadMode::Lenient => out.skipped.push(SkippedLine {
                line,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn parse_label(field: &str) -> Option<Option<f64>> {
    let f = field.trim();
    if f.is_empty() {
        return Some(None);
    }
    f.parse::<f64>().ok().filter(|x| x.is_finite()).map(Some)
}

#[derive(Debug, Error)]
pub enum GraphFileError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed '{text}'")]
    MalformedLine { line: usize, text: String },
    #[error("line {line}: node {index} out of range for {nodes} nodes")]
    IndexOutOfRange { line: usize, index: usize, nodes: usize },
    #[error("line {line}: {source}")]
    InvalidEdge { line: usize, source: GraphError },
}

pub fn load_generic_graph(path: impl AsRef<Path>) -> Result<GenericGraph, GraphFileError> {
    parse_generic_graph(&std::fs::read_to_string(path)?)
}

/// Header `N M`, then `M` edge lines `u v`, then optional `label u L` lines.
pub fn parse_generic_graph(text: &str) -> Result<GenericGraph, GraphFileError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let malformed = |line: usize, text: &str| GraphFileError::MalformedLine {
        line,
        text: text.to_string(),
    };
    let (hline, header) = lines.next().ok_or_else(|| malformed(0, ""))?;
    let nums = parse_usizes(header).filter(|v| v.len() == 2).ok_or_else(|| malformed(hline, header))?;
    let (n, m) = (nums[0], nums[1]);
    let mut labels = vec![0u32; n];
    let mut edges = Vec::with_capacity(m);
    let mut seen = std::collections::BTreeSet::new();
    for (line, text) in lines {
        let check = |index: usize| {
            if index < n {
                Ok(index)
            } else {
                Err(GraphFileError::IndexOutOfRange { line, index, nodes: n })
            }
        };
        if let Some(rest) = text.strip_prefix("label") {
            let v = parse_usizes(rest).filter(|v| v.len() == 2).ok_or_else(|| malformed(line, text))?;
            let label = u32::try_from(v[1]).map_err(|_| malformed(line, text))?;
            labels[check(v[0])?] = label;
            continue;
        }
        if edges.len() == m {
            return Err(malformed(line, text));
        }
        let v = parse_usizes(text).filter(|v| v.len() == 2).ok_or_else(|| malformed(line, text))?;
        let (a, b) = (check(v[0])?, check(v[1])?);
        if a == b {
            return Err(GraphFileError::InvalidEdge {
                line,
                source: GraphError::SelfLoop(a),
            });
        }
        if !seen.insert((a.min(b), a.max(b))) {
            return Err(GraphFileError::InvalidEdge {
                line,
                source: GraphError::DuplicateBond(a.min(b), a.max(b)),
            });
        }
        edges.push((a, b));
    }
    if edges.len() != m {
        return Err(malformed(hline, header));
    }
    GenericGraph::labelled(labels, edges).map_err(|source| GraphFileError::InvalidEdge { line: 0, source })
}

fn parse_usizes(s: &str) -> Option<Vec<usize>> {
    s.split_whitespace().map(|t| t.parse().ok()).collect()
}
