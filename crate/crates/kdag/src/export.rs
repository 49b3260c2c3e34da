//! Serialization of realized k-DAGs.
//!
//! - CSV: `child,parent` edge rows, plus a companion `vertex,color` table.
//! - DOT: a `digraph` with one node per vertex carrying its color.
//! - JSON: everything needed to rebuild the graph.
//!
//! Vertices are labelled by their 0-based index; vertices `0..k` are the roots.

use std::fmt::Write as _;
use std::str::FromStr;

use kdag_core::dag_sim::KDag;
use kdag_core::{Color, ModelParams};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("unknown export format `{0}` (expected csv, dot or json)")]
    UnknownFormat(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] kdag_core::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    EdgeListCsv,
    Dot,
    Json,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::EdgeListCsv => "csv",
            ExportFormat::Dot => "dot",
            ExportFormat::Json => "json",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = ExportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" | "edges" | "edgelistcsv" => Ok(ExportFormat::EdgeListCsv),
            "dot" => Ok(ExportFormat::Dot),
            "json" => Ok(ExportFormat::Json),
            _ => Err(ExportError::UnknownFormat(s.to_string())),
        }
    }
}

const INDEXING_NOTE: &str = "vertices are 0-based; vertices 0..k are the roots and vertex i is the (i+1)-th vertex in time";

#[derive(Debug, Serialize, Deserialize)]
struct DagJson {
    n: u64,
    k: u32,
    p: f64,
    ell: u32,
    colors: Vec<String>,
    parents: Vec<Vec<u32>>,
    seed: Option<u64>,
    stream_id: Option<u64>,
    indexing: String,
}

pub fn export_edges(dag: &KDag, format: ExportFormat) -> Result<Vec<u8>, ExportError> {
    Ok(match format {
        ExportFormat::EdgeListCsv => edge_list_csv(dag).into_bytes(),
        ExportFormat::Dot => dot(dag).into_bytes(),
        ExportFormat::Json => {
            let mut bytes = serde_json::to_vec_pretty(&to_json(dag))?;
            bytes.push(b'\n');
            bytes
        }
    })
}

fn edge_list_csv(dag: &KDag) -> String {
    let mut out = String::from("child,parent\n");
    for (child, parent) in dag.edges() {
        writeln!(out, "{child},{parent}").unwrap();
    }
    out
}

/// `vertex,color` rows, one per vertex.
pub fn vertex_colors_csv(dag: &KDag) -> Vec<u8> {
    let mut out = String::from("vertex,color\n");
    for (v, c) in dag.colors().iter().enumerate() {
        writeln!(out, "{v},{c}").unwrap();
    }
    out.into_bytes()
}

fn dot(dag: &KDag) -> String {
    let p = dag.params();
    let mut out = String::new();
    writeln!(out, "digraph kdag {{").unwrap();
    writeln!(out, "  // k={} p={} ell={} n={}", p.k(), p.p(), p.ell(), dag.n()).unwrap();
    for (v, c) in dag.colors().iter().enumerate() {
        let root = if v < p.k() as usize { ", shape=doublecircle" } else { "" };
        writeln!(out, "  {v} [color={c}, fillcolor={c}, style=filled{root}];").unwrap();
    }
    for (child, parent) in dag.edges() {
        writeln!(out, "  {child} -> {parent};").unwrap();
    }
    writeln!(out, "}}").unwrap();
    out
}

fn to_json(dag: &KDag) -> DagJson {
    let p = dag.params();
    DagJson {
        n: dag.n(),
        k: p.k(),
        p: p.p(),
        ell: p.ell(),
        colors: dag.colors().iter().map(|c| c.as_str().to_string()).collect(),
        parents: (0..dag.n() as usize).map(|v| dag.parents(v).to_vec()).collect(),
        seed: dag.stream().map(|s| s.seed),
        stream_id: dag.stream().map(|s| s.stream_id),
        indexing: INDEXING_NOTE.to_string(),
    }
}

fn parse_color(s: &str) -> Result<Color, ExportError> {
    match s.trim() {
        "red" => Ok(Color::Red),
        "blue" => Ok(Color::Blue),
        other => Err(ExportError::Malformed(format!("unknown color `{other}`"))),
    }
}

pub fn parse_json(bytes: &[u8]) -> Result<KDag, ExportError> {
    let doc: DagJson = serde_json::from_slice(bytes)?;
    let params = ModelParams::new(doc.k, doc.p, doc.ell)?;
    let colors = doc.colors.iter().map(|c| parse_color(c)).collect::<Result<Vec<_>, _>>()?;
    if colors.len() as u64 != doc.n {
        return Err(ExportError::Malformed("n does not match the color count".into()));
    }
    Ok(KDag::from_parts(params, colors, &doc.parents)?)
}

/// Rebuilds a graph from the edge list and the vertex color table.
pub fn parse_csv(params: ModelParams, edges: &[u8], colors: &[u8]) -> Result<KDag, ExportError> {
    let text = |b: &[u8]| std::str::from_utf8(b).map_err(|e| ExportError::Malformed(e.to_string())).map(str::to_owned);
    let colors_text = text(colors)?;
    let mut lines = colors_text.lines();
    if lines.next() != Some("vertex,color") {
        return Err(ExportError::Malformed("expected header `vertex,color`".into()));
    }
    let mut vertex_colors = Vec::new();
    for (i, line) in lines.enumerate() {
        let (v, c) = line
            .split_once(',')
            .ok_or_else(|| ExportError::Malformed(format!("bad color row `{line}`")))?;
        if v.parse::<usize>().ok() != Some(i) {
            return Err(ExportError::Malformed(format!("vertex rows must be consecutive, got `{v}`")));
        }
        vertex_colors.push(parse_color(c)?);
    }

    let edges_text = text(edges)?;
    let mut lines = edges_text.lines();
    if lines.next() != Some("child,parent") {
        return Err(ExportError::Malformed("expected header `child,parent`".into()));
    }
    let mut parents = vec![Vec::new(); vertex_colors.len()];
    for line in lines {
        let (c, p) = line
            .split_once(',')
            .ok_or_else(|| ExportError::Malformed(format!("bad edge row `{line}`")))?;
        let child: usize = c.parse().map_err(|_| ExportError::Malformed(format!("bad child `{c}`")))?;
        let parent: u32 = p.parse().map_err(|_| ExportError::Malformed(format!("bad parent `{p}`")))?;
        parents
            .get_mut(child)
            .ok_or_else(|| ExportError::Malformed(format!("child {child} has no color row")))?
            .push(parent);
    }
    Ok(KDag::from_parts(params, vertex_colors, &parents)?)
}
