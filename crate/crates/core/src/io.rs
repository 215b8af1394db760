//! Text formats for graph and schedule exchange.
//!
//! Edge-list graphs: header `n m sink`, then `m` lines `u v` with
//! `0 <= u < v < n`. Schedules: header `n sink latency`, then `n - 1` lines
//! `v parent(v) slot(v)`. Blank lines and lines starting with `#` are
//! ignored in both formats.

use thiserror::Error;

use crate::graph::{Graph, GraphError, Vertex};
use crate::tree::{AggregationTree, Schedule};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}: malformed header: {msg}")]
    MalformedHeader { line: usize, msg: String },
    #[error("line {line}: malformed line: {msg}")]
    MalformedLine { line: usize, msg: String },
    #[error("line {line}: vertex {v} out of range for {n} vertices")]
    VertexOutOfRange { line: usize, v: usize, n: usize },
    #[error("line {line}: sink {sink} out of range for {n} vertices")]
    SinkOutOfRange { line: usize, sink: usize, n: usize },
    #[error("line {line}: edge endpoints must satisfy u < v")]
    EdgeOrder { line: usize },
    #[error("line {line}: duplicate edge ({u}, {v})")]
    DuplicateEdge { line: usize, u: usize, v: usize },
    #[error("line {line}: duplicate entry for vertex {v}")]
    DuplicateVertex { line: usize, v: usize },
    #[error("declared {declared} entries but found {found}")]
    CountMismatch { declared: usize, found: usize },
    #[error("graph is not connected")]
    Disconnected,
}

/// Numbered content lines, with blanks and `#` comments skipped.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_fields<const K: usize>(line: usize, text: &str) -> Result<[usize; K], ParseError> {
    let mut out = [0usize; K];
    let mut parts = text.split_whitespace();
    for slot in out.iter_mut() {
        let tok = parts.next().ok_or_else(|| ParseError::MalformedLine {
            line,
            msg: format!("expected {K} fields"),
        })?;
        *slot = tok.parse().map_err(|_| ParseError::MalformedLine {
            line,
            msg: format!("`{tok}` is not a nonnegative integer"),
        })?;
    }
    if parts.next().is_some() {
        return Err(ParseError::MalformedLine {
            line,
            msg: format!("expected exactly {K} fields"),
        });
    }
    Ok(out)
}

/// Parses the edge-list format into a validated graph.
pub fn read_graph(text: &str) -> Result<Graph, ParseError> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or(ParseError::MalformedHeader {
        line: 1,
        msg: "empty input".into(),
    })?;
    let [n, m, sink] = parse_fields(hline, header).map_err(|e| match e {
        ParseError::MalformedLine { line, msg } => ParseError::MalformedHeader { line, msg },
        other => other,
    })?;
    if n == 0 {
        return Err(ParseError::MalformedHeader {
            line: hline,
            msg: "vertex count must be positive".into(),
        });
    }
    if sink >= n {
        return Err(ParseError::SinkOutOfRange {
            line: hline,
            sink,
            n,
        });
    }
    let mut edges = Vec::with_capacity(m);
    let mut seen = std::collections::HashSet::new();
    for (line, text) in lines {
        let [u, v] = parse_fields(line, text)?;
        if u >= n || v >= n {
            return Err(ParseError::VertexOutOfRange {
                line,
                v: u.max(v),
                n,
            });
        }
        if u >= v {
            return Err(ParseError::EdgeOrder { line });
        }
        if !seen.insert((u, v)) {
            return Err(ParseError::DuplicateEdge { line, u, v });
        }
        edges.push((u, v));
    }
    if edges.len() != m {
        return Err(ParseError::CountMismatch {
            declared: m,
            found: edges.len(),
        });
    }
    Graph::from_edges(n, sink, &edges).map_err(|e| match e {
        GraphError::Disconnected => ParseError::Disconnected,
        other => ParseError::MalformedHeader {
            line: hline,
            msg: other.to_string(),
        },
    })
}

/// Serializes a graph; edges come out sorted, so equal graphs produce
/// byte-identical text.
pub fn write_graph(g: &Graph) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{} {} {}\n",
        g.vertex_count(),
        g.edge_count(),
        g.sink()
    ));
    for (u, v) in g.edges() {
        out.push_str(&format!("{u} {v}\n"));
    }
    out
}

/// Schedule file contents before feasibility checking. Kept raw so the
/// checker can report violations instead of refusing to parse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawSchedule {
    pub n: usize,
    pub sink: Vertex,
    pub latency: u32,
    pub parent: Vec<Option<Vertex>>,
    pub slot: Vec<u32>,
}

impl RawSchedule {
    pub fn from_parts(t: &AggregationTree, s: &Schedule) -> Self {
        RawSchedule {
            n: t.vertex_count(),
            sink: t.sink(),
            latency: s.latency,
            parent: t.parents().to_vec(),
            slot: s.slot.clone(),
        }
    }
}

/// Parses the schedule format. Structural problems (counts, ranges,
/// duplicates) are parse errors; feasibility is the checker's concern.
pub fn read_schedule(text: &str) -> Result<RawSchedule, ParseError> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or(ParseError::MalformedHeader {
        line: 1,
        msg: "empty input".into(),
    })?;
    let [n, sink, latency] = parse_fields(hline, header).map_err(|e| match e {
        ParseError::MalformedLine { line, msg } => ParseError::MalformedHeader { line, msg },
        other => other,
    })?;
    if n == 0 {
        return Err(ParseError::MalformedHeader {
            line: hline,
            msg: "vertex count must be positive".into(),
        });
    }
    if sink >= n {
        return Err(ParseError::SinkOutOfRange {
            line: hline,
            sink,
            n,
        });
    }
    let mut parent = vec![None; n];
    let mut slot = vec![0u32; n];
    let mut filled = vec![false; n];
    let mut count = 0usize;
    for (line, text) in lines {
        let [v, p, s] = parse_fields(line, text)?;
        if v >= n {
            return Err(ParseError::VertexOutOfRange { line, v, n });
        }
        if p >= n {
            return Err(ParseError::VertexOutOfRange { line, v: p, n });
        }
        if v == sink {
            return Err(ParseError::MalformedLine {
                line,
                msg: format!("sink {sink} must not appear as a sender"),
            });
        }
        if filled[v] {
            return Err(ParseError::DuplicateVertex { line, v });
        }
        filled[v] = true;
        parent[v] = Some(p);
        slot[v] = u32::try_from(s).map_err(|_| ParseError::MalformedLine {
            line,
            msg: format!("slot {s} too large"),
        })?;
        count += 1;
    }
    if count != n - 1 {
        return Err(ParseError::CountMismatch {
            declared: n - 1,
            found: count,
        });
    }
    Ok(RawSchedule {
        n,
        sink,
        latency: latency as u32,
        parent,
        slot,
    })
}

/// Serializes a schedule, senders in ascending vertex order.
pub fn write_schedule(raw: &RawSchedule) -> String {
    let mut out = String::new();
    out.push_str(&format!("{} {} {}\n", raw.n, raw.sink, raw.latency));
    for v in 0..raw.n {
        if v == raw.sink {
            continue;
        }
        let p = raw.parent[v].expect("schedule covers every sender");
        out.push_str(&format!("{} {} {}\n", v, p, raw.slot[v]));
    }
    out
}
