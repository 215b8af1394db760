//! Benchmark topology families and random graph models.
//!
//! The interconnection families (cube-connected cycles, wrapped butterfly,
//! shuffle-exchange) are deterministic; the random models redraw the whole
//! graph until a connected sample appears, so the distribution is the nominal
//! one conditioned on connectivity. Vertex numbering is lexicographic over
//! (ring position / level, corner bitstring) so runs are reproducible, and
//! the sink defaults to vertex 0 everywhere.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use thiserror::Error;

use crate::graph::{Graph, Vertex};

/// Redraw budget for the random models before giving up on connectivity.
const MAX_CONNECT_ATTEMPTS: u32 = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(u32),
    #[error("need at least 2 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("probability {0} outside (0, 1]")]
    BadProbability(f64),
    #[error("parameter {name} = {value} outside (0, 1]")]
    BadParameter { name: &'static str, value: f64 },
    #[error("no connected graph after {0} draws; raise the edge probability")]
    ConnectivityFailure(u32),
}

/// Cube-connected cycles of dimension `d`: a ring of `d` vertices replaces
/// each corner of the `d`-cube. `n = d * 2^d`; for `d >= 3` the ring edges
/// are distinct and `m = 3d * 2^(d-1)`.
pub fn ccc(d: u32) -> Result<Graph, GenError> {
    if d < 2 {
        return Err(GenError::DimensionTooSmall(d));
    }
    let corners = 1usize << d;
    let id = |pos: usize, w: usize| pos * corners + w;
    let mut edges = BTreeSet::new();
    for pos in 0..d as usize {
        for w in 0..corners {
            add(&mut edges, id(pos, w), id((pos + 1) % d as usize, w));
            add(&mut edges, id(pos, w), id(pos, w ^ (1 << pos)));
        }
    }
    build(d as usize * corners, edges)
}

/// Wrapped butterfly of dimension `d`: levels `0..d` of `2^d` corners with
/// straight and crossing edges to the next level (mod d). `n = d * 2^d` and,
/// for `d >= 3` where no generated pair repeats, `m = d * 2^(d+1)`.
pub fn butterfly(d: u32) -> Result<Graph, GenError> {
    if d < 2 {
        return Err(GenError::DimensionTooSmall(d));
    }
    let corners = 1usize << d;
    let id = |level: usize, w: usize| level * corners + w;
    let mut edges = BTreeSet::new();
    for level in 0..d as usize {
        let next = (level + 1) % d as usize;
        for w in 0..corners {
            add(&mut edges, id(level, w), id(next, w));
            add(&mut edges, id(level, w), id(next, w ^ (1 << level)));
        }
    }
    build(d as usize * corners, edges)
}

/// Shuffle-exchange graph on the length-`d` bitstrings: exchange edges flip
/// the lowest bit, shuffle edges rotate the string left by one (identity
/// rotations skipped).
pub fn shuffle_exchange(d: u32) -> Result<Graph, GenError> {
    if d < 2 {
        return Err(GenError::DimensionTooSmall(d));
    }
    let n = 1usize << d;
    let mask = n - 1;
    let mut edges = BTreeSet::new();
    for w in 0..n {
        add(&mut edges, w, w ^ 1);
        let rotated = ((w << 1) | (w >> (d - 1))) & mask;
        if rotated != w {
            add(&mut edges, w, rotated);
        }
    }
    build(n, edges)
}

/// Erdos-Renyi draw: every unordered pair becomes an edge with probability
/// `p`, redrawn entirely until connected. Deterministic given `(n, p, seed)`.
pub fn pure_random(n: usize, p: f64, seed: u64) -> Result<Graph, GenError> {
    if n < 2 {
        return Err(GenError::TooFewVertices(n));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(GenError::BadProbability(p));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_CONNECT_ATTEMPTS {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        if connected(n, &edges) {
            return Ok(Graph::from_edges(n, 0, &edges).expect("validated draw"));
        }
    }
    Err(GenError::ConnectivityFailure(MAX_CONNECT_ATTEMPTS))
}

/// Waxman model: `n` points uniform in the unit square, pair `(u, v)` joined
/// with probability `alpha * exp(-dist(u, v) / (beta * sqrt(2)))`. Points and
/// coins are redrawn together until the sample is connected.
pub fn waxman(n: usize, alpha: f64, beta: f64, seed: u64) -> Result<Graph, GenError> {
    if n < 2 {
        return Err(GenError::TooFewVertices(n));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(GenError::BadParameter {
            name: "alpha",
            value: alpha,
        });
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(GenError::BadParameter {
            name: "beta",
            value: beta,
        });
    }
    let scale = beta * std::f64::consts::SQRT_2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_CONNECT_ATTEMPTS {
        let points: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                let dx = points[u].0 - points[v].0;
                let dy = points[u].1 - points[v].1;
                let dist = (dx * dx + dy * dy).sqrt();
                if rng.random::<f64>() < alpha * (-dist / scale).exp() {
                    edges.push((u, v));
                }
            }
        }
        if connected(n, &edges) {
            return Ok(Graph::from_edges(n, 0, &edges).expect("validated draw"));
        }
    }
    Err(GenError::ConnectivityFailure(MAX_CONNECT_ATTEMPTS))
}

fn add(edges: &mut BTreeSet<(Vertex, Vertex)>, u: Vertex, v: Vertex) {
    if u != v {
        edges.insert((u.min(v), u.max(v)));
    }
}

fn build(n: usize, edges: BTreeSet<(Vertex, Vertex)>) -> Result<Graph, GenError> {
    let edges: Vec<_> = edges.into_iter().collect();
    Ok(Graph::from_edges(n, 0, &edges).expect("family construction is simple and connected"))
}

fn connected(n: usize, edges: &[(Vertex, Vertex)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == n
}
