use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use fragpredict::config::RunConfig;
use fragpredict::downstream::{
    finetune as run_finetune, probe_csv, probe_fragment_counts, scaffold_split, Sample, SplitFractions, TaskKind,
    TaskSpec,
};
use fragpredict::encoder::HierarchicalEncoder;
use fragpredict::fragmenter::{decomposition_stats, fragment as decompose, FragmentConfig, FragmentDecomposition, VocabEntry};
use fragpredict::fragwl::{build_fragment_graph, histograms_csv, wl_distinguish, WlInterner};
use fragpredict::molgraph::{load_generic_graph, load_smiles_dataset, parse_smiles, GenericGraph, LoadMode, LoadedDataset, MolecularGraph};
use fragpredict::pretrain::{encode_checkpoint, load_checkpoint, metrics_csv, Pretrainer};
use fragpredict::tensor::seeded_rng;
use fragpredict::Encoder64;

use crate::io::{write_atomic, CliResult, Classify};
use crate::{FinetuneArgs, FragmentArgs, InputArgs, PretrainArgs, ProbeArgs, RunArgs, StatsArgs, Task, WlArgs};

fn load(path: &Path, opts: &InputArgs) -> CliResult<LoadedDataset> {
    let mode = if opts.lenient { LoadMode::Lenient } else { LoadMode::Strict };
    let data = load_smiles_dataset(path, mode)
        .with_context(|| format!("reading {}", path.display()))
        .data()?;
    for s in &data.skipped {
        eprintln!("warning: {}: line {}: skipped: {}", path.display(), s.line, s.reason);
    }
    if data.records.is_empty() {
        return Err(anyhow!("{} contains no molecules", path.display())).data();
    }
    Ok(data)
}

fn write(path: &Path, text: impl AsRef<[u8]>) -> CliResult<()> {
    write_atomic(path, text.as_ref()).data()
}

/// Defaults, then the config file, then `--set` overrides, then `--seed`;
/// validated before any work starts.
fn run_config(args: &RunArgs) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .data()?;
        cfg.apply_text(&text)
            .with_context(|| format!("config {}", path.display()))
            .usage()?;
    }
    for s in &args.sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got '{s}'"))
            .usage()?;
        cfg.set(k.trim(), v).usage()?;
    }
    if let Some(seed) = args.seed {
        cfg.trainer.seed = seed;
    }
    cfg.validate().usage()?;
    Ok(cfg)
}

fn decompose_records(data: &LoadedDataset, cfg: &FragmentConfig) -> CliResult<Vec<(MolecularGraph, FragmentDecomposition)>> {
    data.records
        .iter()
        .map(|r| {
            let d = decompose(&r.graph, cfg)
                .with_context(|| format!("line {}", r.line))
                .data()?;
            Ok((r.graph.clone(), d))
        })
        .collect()
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>, sep: &str) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

pub fn fragment(args: FragmentArgs) -> CliResult<()> {
    let data = load(&args.input, &args.input_opts)?;
    let cfg = FragmentConfig::with_mode(args.mode.into());
    let mut out = String::from("index,m,fragments,edges,connectors\n");
    for (i, (_, d)) in decompose_records(&data, &cfg)?.iter().enumerate() {
        let frags = join(
            d.fragments
                .iter()
                .map(|f| format!("{}:{}:{}", f.kind.class_name(), f.kind.size(), join(&f.nodes, " "))),
            ";",
        );
        let edges = join(d.frag_edges().iter().map(|(a, b)| format!("{a}-{b}")), " ");
        writeln!(out, "{i},{},{frags},{edges},{}", d.fragments.len(), join(&d.connectors, " ")).unwrap();
    }
    write(&args.out, out)
}

pub fn stats(args: StatsArgs) -> CliResult<()> {
    let data = load(&args.input, &args.input_opts)?;
    let report = decomposition_stats(data.graphs(), &FragmentConfig::with_mode(args.mode.into())).data()?;
    write(&args.out, report.to_csv())
}

/// A graph argument: `smiles:STRING` or a path to a generic graph file.
fn graph_arg(arg: &str) -> CliResult<(GenericGraph, MolecularGraph)> {
    match arg.strip_prefix("smiles:") {
        Some(s) => {
            let g = parse_smiles(s).with_context(|| format!("SMILES '{s}'")).data()?;
            Ok((g.to_generic(), g))
        }
        None => {
            let g = load_generic_graph(arg).with_context(|| format!("reading {arg}")).data()?;
            let skeleton = g.to_skeleton();
            Ok((g, skeleton))
        }
    }
}

pub fn wl(args: WlArgs) -> CliResult<()> {
    let (g1, m1) = graph_arg(&args.g1)?;
    let (g2, m2) = graph_arg(&args.g2)?;
    let yes_no = |b: bool| if b { "yes" } else { "no" };
    let node = wl_distinguish(&g1, &g2, None);
    println!("node: distinguishable: {}", yes_no(node));
    let cfg = FragmentConfig::with_mode(args.mode.into());
    let mut graphs = vec![("g1", g1), ("g2", g2)];
    if args.fragment {
        let f1 = build_fragment_graph(&m1, &cfg).data()?;
        let f2 = build_fragment_graph(&m2, &cfg).data()?;
        // Fragment-level separation includes the node level.
        let frag = node || wl_distinguish(&f1, &f2, None);
        println!("fragment: distinguishable: {}", yes_no(frag));
        graphs.push(("g1_fragments", f1));
        graphs.push(("g2_fragments", f2));
    }
    if let Some(path) = &args.histograms {
        let mut rows = Vec::new();
        for pair in graphs.chunks(2) {
            let iters = pair[0].1.node_count().max(pair[1].1.node_count()).max(1);
            let hs = WlInterner::new().refine_joint(&[&pair[0].1, &pair[1].1], iters);
            rows.push((pair[0].0, hs[0].clone()));
            rows.push((pair[1].0, hs[1].clone()));
        }
        let refs: Vec<_> = rows.iter().map(|(n, h)| (*n, h)).collect();
        write(path, histograms_csv(&refs))?;
    }
    Ok(())
}

/// Progress line per epoch; checkpoints every `checkpoint_every` epochs.
pub fn pretrain(args: PretrainArgs) -> CliResult<()> {
    let cfg = run_config(&args.run)?;
    let data = load(&args.data, &args.input_opts)?;
    let decomposed = decompose_records(&data, &cfg.fragment)?;
    let mut trainer = Pretrainer::<f64>::new(cfg.encoder.clone(), cfg.trainer.clone(), cfg.fragment).usage()?;
    let epochs = cfg.trainer.epochs;
    let every = cfg.trainer.checkpoint_every;
    let out = args.out.clone();
    let mut snapshot_error = None;
    let rows = trainer
        .fit(&decomposed, |p, epoch| {
            eprintln!("epoch {epoch}/{epochs}: {} steps", p.steps_done());
            if every > 0 && epoch % every == 0 && epoch < epochs {
                let path = PathBuf::from(format!("{}.epoch{epoch}", out.display()));
                if let Err(e) = write_atomic(&path, &encode_checkpoint(p)) {
                    snapshot_error.get_or_insert(e);
                }
            }
            Ok(())
        })
        .internal()?;
    if let Some(e) = snapshot_error {
        return Err(e).data();
    }
    write(&args.out, encode_checkpoint(&trainer))?;
    write(&args.metrics, metrics_csv(&rows))?;
    let last = rows.last().map_or(f64::NAN, |r| r.loss);
    eprintln!("pretrained {} steps, final loss {last:.6}", rows.len());
    Ok(())
}

/// Checkpointed encoder and its fragmentation settings, or a fresh one from `cfg`.
fn encoder(checkpoint: Option<&PathBuf>, cfg: &RunConfig) -> CliResult<(Encoder64, FragmentConfig)> {
    match checkpoint {
        Some(path) => {
            let p = load_checkpoint::<f64>(path)
                .with_context(|| format!("loading checkpoint {}", path.display()))
                .data()?;
            let frag = *p.fragment_config();
            Ok((p.into_context(), frag))
        }
        None => {
            let enc = HierarchicalEncoder::new(cfg.encoder.clone(), &mut seeded_rng(cfg.trainer.seed)).usage()?;
            Ok((enc, cfg.fragment))
        }
    }
}

pub fn finetune(args: FinetuneArgs) -> CliResult<()> {
    let cfg = run_config(&args.run)?;
    let data = load(&args.data, &args.input_opts)?;
    let (enc, frag) = encoder(args.checkpoint.as_ref(), &cfg)?;
    let num_tasks = data.records[0].labels.len();
    if num_tasks == 0 {
        return Err(anyhow!("{} has no label columns", args.data.display())).data();
    }
    let samples: Vec<Sample> = decompose_records(&data, &frag)?
        .into_iter()
        .zip(&data.records)
        .map(|((graph, decomp), r)| Sample {
            graph,
            decomp,
            labels: r.labels.clone(),
        })
        .collect();
    let decomps: Vec<_> = samples.iter().map(|s| &s.decomp).collect();
    let seed = cfg.trainer.seed;
    let split = scaffold_split(&decomps, SplitFractions::default(), seed).data()?;
    let kind = match args.task {
        Task::Classification => TaskKind::Classification,
        Task::Regression => TaskKind::Regression,
    };
    let task = TaskSpec { kind, num_tasks };
    let (_, report) = run_finetune(enc, &samples, &task, &split, &cfg.downstream, seed).data()?;
    write(&args.out, report.to_csv())?;
    eprintln!("selected epoch {}", report.selected_epoch);
    Ok(())
}

pub fn probe(args: ProbeArgs) -> CliResult<()> {
    let cfg = run_config(&args.run)?;
    let queries = args
        .queries
        .split(',')
        .map(|q| q.parse::<VocabEntry>().map_err(|e| anyhow!(e)))
        .collect::<anyhow::Result<Vec<_>>>()
        .usage()?;
    let data = load(&args.data, &args.input_opts)?;
    let (enc, frag) = encoder(args.checkpoint.as_ref(), &cfg)?;
    let decomposed = decompose_records(&data, &frag)?;
    let items: Vec<_> = decomposed.iter().map(|(g, d)| (g, d)).collect();
    let rows = probe_fragment_counts(&enc, &items, &queries, &cfg.downstream, cfg.trainer.seed).data()?;
    write(&args.out, probe_csv(&rows))
}
