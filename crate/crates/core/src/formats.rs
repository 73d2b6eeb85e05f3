//! On-disk formats: run directories written by a fit, summary outputs,
//! simulation truth, and the cleaning report.
//!
//! Every group index and position written here is 1-based; the diagonal of
//! `Z` is written as `-1`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeMeta;
use crate::model::{Hyperparams, ModelState, DIAG_SENTINEL};
use crate::posterior::{project_simplex, GroupKind, PosteriorSummary, PositionTable, SimplexProjection};
use crate::sampler::{Chain, ChainConfig, Tallies};
use crate::synth::SynthTruth;

pub const CONFIG_FILE: &str = "config.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const SNAPSHOTS_FILE: &str = "snapshots.jsonl";
pub const POSTERIOR_FILE: &str = "posterior.json";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn matrix_rows<T: Clone>(m: &Array2<T>) -> Vec<Vec<T>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::dims(format!("{c} columns"), "ragged rows"));
    }
    Ok(Array2::from_shape_fn((r, c), |(i, j)| rows[i][j]))
}

/// Node-indexed `Z` with 1-based groups and `-1` on the diagonal.
pub fn z_to_external(z: &Array2<u8>) -> Vec<Vec<i32>> {
    z.rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .map(|&g| if g == DIAG_SENTINEL { -1 } else { g as i32 + 1 })
                .collect()
        })
        .collect()
}

/// Everything a later `summarize` needs to know about a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub k: usize,
    pub n: usize,
    pub node_ids: Vec<String>,
    pub hyperparams: Hyperparams,
    pub chain: ChainConfig,
}

pub fn trace_header(k: usize) -> String {
    let mut header = String::from("iter,log_joint,alpha");
    for i in 1..=k {
        for j in 1..=k {
            write!(header, ",C_{i}_{j}").unwrap();
        }
    }
    header
}

/// `trace.csv`: one row per retained sample.
pub fn trace_csv(chain: &Chain) -> String {
    let k = chain.samples.first().map_or(0, ModelState::k);
    let mut out = trace_header(k);
    out.push('\n');
    for ((s, lj), iter) in chain.samples.iter().zip(&chain.log_joint_trace).zip(&chain.iterations) {
        write!(out, "{iter},{lj},{}", s.alpha).unwrap();
        for v in s.c.iter() {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Columns of a `trace.csv`, by header name.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub columns: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl Trace {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().position(|c| c == name).map(|i| &self.values[i][..])
    }
}

pub fn parse_trace(text: &str) -> Result<Trace> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let columns: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if columns.len() < 3 || columns[0] != "iter" {
        return Err(Error::Parse {
            row: 1,
            msg: "not a trace file".into(),
        });
    }
    let mut values = vec![Vec::new(); columns.len()];
    for record in reader.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        for (i, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row,
                msg: format!("bad number `{field}`"),
            })?;
            values[i].push(v);
        }
    }
    Ok(Trace { columns, values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub iter: usize,
    pub log_joint: f64,
    pub alpha: f64,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    /// Node-indexed memberships.
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
    /// Node ids from the front of the order to the back.
    pub o: Vec<String>,
    #[serde(rename = "Z", skip_serializing_if = "Option::is_none", default)]
    pub z: Option<Vec<Vec<i32>>>,
}

impl Snapshot {
    pub fn new(state: &ModelState, iter: usize, log_joint: f64, ids: &[String], with_z: bool) -> Self {
        Snapshot {
            iter,
            log_joint,
            alpha: state.alpha,
            c: matrix_rows(&state.c),
            d: matrix_rows(&state.membership()),
            o: state.order.as_slice().iter().map(|&v| ids[v].clone()).collect(),
            z: with_z.then(|| z_to_external(&state.interactions())),
        }
    }
}

pub fn snapshots_jsonl(chain: &Chain, ids: &[String], with_z: bool) -> Result<String> {
    let mut out = String::new();
    for ((s, lj), iter) in chain.samples.iter().zip(&chain.log_joint_trace).zip(&chain.iterations) {
        out.push_str(&serde_json::to_string(&Snapshot::new(s, *iter, *lj, ids, with_z))?);
        out.push('\n');
    }
    Ok(out)
}

/// Persisted posterior moments of a fit, read back by `summarize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorFile {
    pub node_ids: Vec<String>,
    pub summary: PosteriorSummary,
    pub tallies: Tallies,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutputs {
    pub files: Vec<String>,
}

pub struct RunWriteOptions {
    pub snapshots: bool,
    pub snapshots_z: bool,
}

/// Writes `config.json`, `trace.csv`, `posterior.json` and optionally
/// `snapshots.jsonl`; returns the file names written.
pub fn write_run(
    dir: &Path,
    chain: &Chain,
    config: &RunConfig,
    summary: &PosteriorSummary,
    opts: &RunWriteOptions,
) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut put = |name: &str, body: String| -> Result<()> {
        fs::write(dir.join(name), body)?;
        files.push(name.to_string());
        Ok(())
    };
    put(CONFIG_FILE, serde_json::to_string_pretty(config)? + "\n")?;
    put(TRACE_FILE, trace_csv(chain))?;
    let posterior = PosteriorFile {
        node_ids: config.node_ids.clone(),
        summary: summary.clone(),
        tallies: chain.tallies,
    };
    put(POSTERIOR_FILE, serde_json::to_string(&posterior)? + "\n")?;
    if opts.snapshots {
        put(SNAPSHOTS_FILE, snapshots_jsonl(chain, &config.node_ids, opts.snapshots_z)?)?;
    }
    Ok(files)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub samples: usize,
    pub threshold: f64,
    #[serde(rename = "C_mean")]
    pub c_mean: Vec<Vec<f64>>,
    #[serde(rename = "D_mean")]
    pub d_mean: Vec<Vec<f64>>,
    pub alpha_mean: f64,
    pub alpha_sd: f64,
    pub group_kind: Vec<GroupKind>,
    /// 1-based group per node, in node order.
    pub assignment: Vec<usize>,
    pub node_ids: Vec<String>,
}

impl SummaryFile {
    pub fn new(summary: &PosteriorSummary, ids: &[String]) -> Self {
        SummaryFile {
            samples: summary.samples,
            threshold: summary.threshold,
            c_mean: matrix_rows(&summary.c_mean),
            d_mean: matrix_rows(&summary.d_mean),
            alpha_mean: summary.alpha_mean,
            alpha_sd: summary.alpha_sd,
            group_kind: summary.group_kind.clone(),
            assignment: summary.assignment.iter().map(|g| g + 1).collect(),
            node_ids: ids.to_vec(),
        }
    }
}

/// `heatmap.csv`: node id, then one membership column per group.
pub fn heatmap_csv(summary: &PosteriorSummary, ids: &[String]) -> String {
    let k = summary.d_mean.ncols();
    let mut out = String::from("id");
    for g in 1..=k {
        write!(out, ",group_{g}").unwrap();
    }
    out.push('\n');
    for (id, row) in ids.iter().zip(summary.d_mean.rows()) {
        out.push_str(&csv_field(id));
        for v in row {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// `simplex.csv`: node id, barycentric coordinates over the main groups,
/// and the main-surface distance.
pub fn simplex_csv(proj: &SimplexProjection, ids: &[String]) -> String {
    let mut out = String::from("id");
    for g in &proj.main_groups {
        write!(out, ",b_{}", g + 1).unwrap();
    }
    out.push_str(",surface_distance\n");
    for ((id, row), dist) in ids.iter().zip(proj.coords.rows()).zip(&proj.surface_distance) {
        out.push_str(&csv_field(id));
        for v in row {
            write!(out, ",{v}").unwrap();
        }
        writeln!(out, ",{dist}").unwrap();
    }
    out
}

/// Projection onto the main groups, or onto all groups when none is main.
pub fn simplex_for(summary: &PosteriorSummary) -> SimplexProjection {
    let mains = summary.main_groups();
    if mains.is_empty() {
        let all: Vec<usize> = (0..summary.c_mean.nrows()).collect();
        project_simplex(&summary.d_mean, &all)
    } else {
        project_simplex(&summary.d_mean, &mains)
    }
}

/// `positions.csv`: node id, year (empty if unknown), mean position and
/// optionally the full position histogram (`p_1..p_n`).
pub fn positions_csv(summary: &PosteriorSummary, nodes: &[NodeMeta], histogram: bool) -> String {
    let n = summary.position_hist.ncols();
    let mut out = String::from("id,year,mean_position");
    if histogram {
        for p in 1..=n {
            write!(out, ",p_{p}").unwrap();
        }
    }
    out.push('\n');
    let means = summary.mean_positions();
    for (r, node) in nodes.iter().enumerate() {
        out.push_str(&csv_field(node.id.as_str()));
        let year = node.year.map(|y| y.to_string()).unwrap_or_default();
        write!(out, ",{year},{}", means[r]).unwrap();
        if histogram {
            for v in summary.position_hist.row(r) {
                write!(out, ",{v}").unwrap();
            }
        }
        out.push('\n');
    }
    out
}

pub fn position_table_json(table: &PositionTable) -> Result<String> {
    Ok(serde_json::to_string_pretty(table)? + "\n")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    #[serde(rename = "C_true")]
    pub c_true: Vec<Vec<f64>>,
    #[serde(rename = "D_true")]
    pub d_true: Vec<Vec<f64>>,
    #[serde(rename = "Z_true", skip_serializing_if = "Option::is_none", default)]
    pub z_true: Option<Vec<Vec<i32>>>,
    pub o_true: Vec<String>,
    pub alpha_true: Option<f64>,
}

impl TruthFile {
    pub fn new(truth: &SynthTruth, with_z: bool) -> Self {
        TruthFile {
            c_true: matrix_rows(&truth.c),
            d_true: matrix_rows(&truth.d),
            z_true: with_z.then(|| z_to_external(&truth.z)),
            o_true: truth
                .order
                .as_slice()
                .iter()
                .map(|&v| truth.nodes[v].id.to_string())
                .collect(),
            alpha_true: truth.alpha,
        }
    }
}
