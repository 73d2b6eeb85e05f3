use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use dagmm::formats::{self, PosteriorFile, RunConfig, RunWriteOptions, SummaryFile, TruthFile};
use dagmm::graph::{self, CitationGraph, DensityMode, NodeMeta};
use dagmm::posterior::{self, series_diagnostics};
use dagmm::sampler::{self, Chain};
use dagmm::synth::{self, MembershipSpec, SynthSpec, YearMode};
use dagmm::{ChainConfig, Error, Hyperparams, NodeId, Result};

use crate::manifest::ManifestBuilder;
use crate::{CleanArgs, FitArgs, SimulateArgs, StatsArgs, SummarizeArgs};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into()
    })
}

fn load_graph(nodes: &Path, edges: &Path) -> Result<CitationGraph> {
    let nodes = graph::parse_nodes(&read(nodes)?)?;
    let edges = graph::parse_edges(&read(edges)?)?;
    CitationGraph::new(nodes, &edges)
}

/// Refuses to write an output file over one of the inputs.
fn guard_inputs(out: &Path, names: &[&str], inputs: &[&Path]) -> Result<()> {
    for name in names {
        let target = out.join(name);
        let Ok(target) = target.canonicalize() else { continue };
        for input in inputs {
            if input.canonicalize().is_ok_and(|i| i == target) {
                return Err(Error::InvalidConfig(format!(
                    "output {} would overwrite an input",
                    target.display()
                )));
            }
        }
    }
    Ok(())
}

fn put(dir: &Path, name: &str, body: impl AsRef<[u8]>, files: &mut Vec<String>) -> Result<()> {
    fs::write(dir.join(name), body)?;
    files.push(name.to_string());
    Ok(())
}

fn json(value: &impl Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

pub fn clean(args: &CleanArgs) -> Result<()> {
    let manifest = ManifestBuilder::start("clean", &[&args.nodes, &args.edges], args, Some(args.seed));
    let input = load_graph(&args.nodes, &args.edges)?;
    let (cleaned, report) = graph::remove_mutual_edges(&input, args.seed);
    graph::assert_dag(&cleaned)?;

    fs::create_dir_all(&args.out)?;
    guard_inputs(&args.out, &["edges.csv"], &[&args.nodes, &args.edges])?;
    let mut files = Vec::new();
    put(&args.out, "edges.csv", graph::write_edges_csv(&cleaned.edge_list())?, &mut files)?;
    put(&args.out, "clean-report.json", json(&report)?, &mut files)?;
    println!(
        "removed {} of {} edges; {} nodes, {} edges remain",
        report.removed.len(),
        input.m(),
        cleaned.n(),
        cleaned.m()
    );
    manifest.finish(&args.out, files)
}

#[derive(Debug, Serialize)]
struct DegreeSummary {
    min: usize,
    max: usize,
    mean: f64,
    zero: usize,
}

impl DegreeSummary {
    fn of(degrees: &[usize]) -> Self {
        DegreeSummary {
            min: degrees.iter().copied().min().unwrap_or(0),
            max: degrees.iter().copied().max().unwrap_or(0),
            mean: if degrees.is_empty() {
                0.0
            } else {
                degrees.iter().sum::<usize>() as f64 / degrees.len() as f64
            },
            zero: degrees.iter().filter(|&&d| d == 0).count(),
        }
    }
}

#[derive(Debug, Serialize)]
struct Stats {
    n: usize,
    m: usize,
    density_dag: f64,
    density_directed: f64,
    out_degree: DegreeSummary,
    in_degree: DegreeSummary,
    topological_order: Vec<String>,
}

pub fn stats(args: &StatsArgs) -> Result<()> {
    let mut inputs: Vec<&Path> = vec![&args.nodes, &args.edges];
    if let Some(s) = &args.subgraph {
        inputs.push(s);
    }
    let manifest = ManifestBuilder::start("stats", &inputs, args, None);
    let mut g = load_graph(&args.nodes, &args.edges)?;
    if let Some(path) = &args.subgraph {
        let text = read(path)?;
        let keep = text.lines().map(str::trim).filter(|l| !l.is_empty());
        g = graph::induced_subgraph(&g, keep)?;
    }
    let order = graph::topological_order(&g)?;
    let stats = Stats {
        n: g.n(),
        m: g.m(),
        density_dag: graph::density(&g, DensityMode::DagHalved)?,
        density_directed: graph::density(&g, DensityMode::DirectedFull)?,
        out_degree: DegreeSummary::of(&g.out_degrees()),
        in_degree: DegreeSummary::of(&g.in_degrees()),
        topological_order: order.as_slice().iter().map(|&v| g.id(v).to_string()).collect(),
    };
    fs::create_dir_all(&args.out)?;
    let mut files = Vec::new();
    put(&args.out, "stats.json", json(&stats)?, &mut files)?;
    println!(
        "n = {}, m = {}, density = {:.6} (DAG) / {:.6} (directed)",
        stats.n, stats.m, stats.density_dag, stats.density_directed
    );
    manifest.finish(&args.out, files)
}

fn fit_one(
    y: &graph::Adjacency,
    h: &Hyperparams,
    cfg: &ChainConfig,
    run: &RunConfig,
    dir: &Path,
    args: &FitArgs,
) -> Result<(Chain, Vec<String>)> {
    let chain = sampler::run_chain(y, h, cfg)?;
    let summary = posterior::summarize(&chain)?;
    let opts = RunWriteOptions {
        snapshots: args.snapshots,
        snapshots_z: args.snapshots_z,
    };
    let files = formats::write_run(dir, &chain, run, &summary, &opts)?;
    Ok((chain, files))
}

pub fn fit(args: &FitArgs) -> Result<()> {
    if args.k < 2 {
        return Err(Error::InvalidConfig(format!("K must be at least 2, got {}", args.k)));
    }
    if args.chains == 0 {
        return Err(Error::InvalidConfig("--chains must be positive".into()));
    }
    let h = Hyperparams::new(args.k);
    h.validate()?;
    let cfg = ChainConfig {
        iterations_retained: args.iters,
        burn_in: args.burnin,
        thin: args.thin,
        seed: args.seed,
        s_alpha: args.s_alpha,
        o_swaps_per_sweep: args.swaps,
        kernels: Default::default(),
    };
    cfg.validate()?;

    let mut inputs: Vec<&Path> = vec![&args.edges];
    if let Some(n) = &args.nodes {
        inputs.push(n);
    }
    let manifest = ManifestBuilder::start("fit", &inputs, args, Some(args.seed));
    let edges = graph::parse_edges(&read(&args.edges)?)?;
    let g = match &args.nodes {
        Some(path) => CitationGraph::new(graph::parse_nodes(&read(path)?)?, &edges)?,
        None => CitationGraph::from_edges(&edges),
    };
    graph::assert_dag(&g)?;
    if g.n() < 2 {
        return Err(Error::TooFewNodes(g.n()));
    }
    let y = g.adjacency().clone();

    fs::create_dir_all(&args.out)?;
    if args.chains == 1 {
        let run = RunConfig {
            k: args.k,
            n: g.n(),
            node_ids: g.ids(),
            hyperparams: h.clone(),
            chain: cfg.clone(),
        };
        let (chain, files) = fit_one(&y, &h, &cfg, &run, &args.out, args)?;
        report_acceptance(None, &chain);
        return manifest.finish(&args.out, files);
    }

    let results: Vec<Result<(PathBuf, Chain, Vec<String>)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..args.chains)
            .map(|i| {
                let (y, h, g) = (&y, &h, &g);
                let mut cfg = cfg.clone();
                cfg.seed = args.seed.wrapping_add(i as u64);
                scope.spawn(move || {
                    let dir = args.out.join(format!("chain-{}", i + 1));
                    let run = RunConfig {
                        k: args.k,
                        n: g.n(),
                        node_ids: g.ids(),
                        hyperparams: h.clone(),
                        chain: cfg.clone(),
                    };
                    let (chain, files) = fit_one(y, h, &cfg, &run, &dir, args)?;
                    Ok((dir, chain, files))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    });

    let mut all_files = Vec::new();
    for (i, result) in results.into_iter().enumerate() {
        let (dir, chain, files) = result?;
        report_acceptance(Some(i + 1), &chain);
        let sub = dir.file_name().expect("chain dir").to_string_lossy().into_owned();
        all_files.extend(files.iter().map(|f| format!("{sub}/{f}")));
        let chain_manifest = ManifestBuilder::start("fit", &inputs, args, Some(chain.config.seed));
        chain_manifest.finish(&dir, files)?;
    }
    manifest.finish(&args.out, all_files)
}

fn report_acceptance(chain_no: Option<usize>, chain: &Chain) {
    let a = chain.acceptance();
    let label = chain_no.map(|i| format!("chain {i}: ")).unwrap_or_default();
    println!(
        "{label}{} samples; alpha acceptance {:.3}; order swap acceptance {:.3}",
        chain.len(),
        a.alpha_rate,
        a.o_swap_rate
    );
}

#[derive(Debug, Serialize)]
struct SeriesDiagnostics {
    ess: f64,
    degenerate: bool,
    acf: Vec<f64>,
}

/// Node metadata lined up with the run's node ids; ids missing from the
/// table get no metadata.
fn align_nodes(ids: &[String], table: Vec<NodeMeta>) -> Vec<NodeMeta> {
    let mut by_id: HashMap<String, NodeMeta> = table
        .into_iter()
        .map(|m| (m.id.to_string(), m))
        .collect();
    ids.iter()
        .map(|id| {
            by_id
                .remove(id)
                .unwrap_or_else(|| NodeMeta::bare(NodeId::new(id.clone()).expect("non-empty id")))
        })
        .collect()
}

pub fn summarize(args: &SummarizeArgs) -> Result<()> {
    if !(args.threshold.is_finite() && args.threshold >= 0.0) {
        return Err(Error::InvalidConfig("threshold must be a non-negative number".into()));
    }
    let manifest = ManifestBuilder::start("summarize", &[&args.run, &args.nodes], args, None);
    let run: RunConfig = formats::read_json(&args.run.join(formats::CONFIG_FILE))?;
    let post: PosteriorFile = formats::read_json(&args.run.join(formats::POSTERIOR_FILE))?;
    let trace = formats::parse_trace(&read(&args.run.join(formats::TRACE_FILE))?)?;
    if post.node_ids != run.node_ids || post.summary.d_mean.nrows() != run.n {
        return Err(Error::Parse {
            row: 0,
            msg: "posterior.json does not match config.json".into(),
        });
    }
    let nodes = align_nodes(&run.node_ids, graph::parse_nodes(&read(&args.nodes)?)?);
    let summary = post.summary.with_threshold(args.threshold);

    let out = args.out.clone().unwrap_or_else(|| args.run.clone());
    fs::create_dir_all(&out)?;
    let ids = &run.node_ids;
    let mut files = Vec::new();
    put(&out, "summary.json", json(&SummaryFile::new(&summary, ids))?, &mut files)?;
    put(&out, "heatmap.csv", formats::heatmap_csv(&summary, ids), &mut files)?;
    put(&out, "simplex.csv", formats::simplex_csv(&formats::simplex_for(&summary), ids), &mut files)?;
    put(&out, "positions.csv", formats::positions_csv(&summary, &nodes, args.histogram), &mut files)?;
    let table = posterior::position_vs_year(&summary, &nodes)?;
    put(&out, "position-vs-year.json", formats::position_table_json(&table)?, &mut files)?;

    let diag: BTreeMap<&str, SeriesDiagnostics> = trace
        .columns
        .iter()
        .zip(&trace.values)
        .skip(1)
        .map(|(name, values)| {
            let d = series_diagnostics(values);
            (name.as_str(), SeriesDiagnostics { ess: d.ess, degenerate: d.degenerate, acf: d.acf })
        })
        .collect();
    put(&out, "diagnostics.json", json(&diag)?, &mut files)?;

    for (g, kind) in summary.group_kind.iter().enumerate() {
        let size = summary.assignment.iter().filter(|&&a| a == g).count();
        println!(
            "group {}: {:?}, C[{0},{0}] = {:.3}, {} nodes",
            g + 1,
            kind,
            summary.c_mean[[g, g]],
            size
        );
    }
    manifest.finish(&out, files)
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    if args.k == 0 {
        return Err(Error::InvalidConfig("K must be positive".into()));
    }
    let membership = if args.hard_membership {
        MembershipSpec::Explicit(synth::near_hard_membership(args.n, args.k, 1.0))
    } else if let Some(purity) = args.purity {
        if !(0.0..=1.0).contains(&purity) {
            return Err(Error::InvalidConfig("purity must lie in [0, 1]".into()));
        }
        MembershipSpec::Explicit(synth::near_hard_membership(args.n, args.k, purity))
    } else {
        MembershipSpec::Dirichlet { alpha: args.alpha }
    };
    let spec = SynthSpec {
        n: args.n,
        k: args.k,
        c_true: synth::diagonal_block_matrix(args.k, args.c_diag, args.c_off),
        membership,
        seed: args.seed,
        year_mode: match args.years {
            Some(base_year) => YearMode::PositionLinked { base_year },
            None => YearMode::None,
        },
    };
    let manifest = ManifestBuilder::start("simulate", &[], args, Some(args.seed));
    let truth = synth::generate(&spec)?;
    let g = truth.graph();

    fs::create_dir_all(&args.out)?;
    let mut files = Vec::new();
    put(&args.out, "nodes.csv", graph::write_nodes_csv(g.nodes())?, &mut files)?;
    put(&args.out, "edges.csv", graph::write_edges_csv(&g.edge_list())?, &mut files)?;
    put(&args.out, "truth.json", json(&TruthFile::new(&truth, args.with_z))?, &mut files)?;
    println!("simulated {} nodes and {} edges", g.n(), g.m());
    manifest.finish(&args.out, files)
}
