//! Undirected communication graphs with a distinguished sink vertex.
//!
//! Every graph in this crate is simple, connected and immutable after
//! construction, so values can be shared freely across worker threads.

use std::collections::VecDeque;

use thiserror::Error;

/// Vertex identifier; vertices of an `n`-vertex graph are `0..n`.
pub type Vertex = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph needs at least one vertex")]
    Empty,
    #[error("sink {sink} out of range for {n} vertices")]
    SinkOutOfRange { sink: Vertex, n: usize },
    #[error("edge endpoint {v} out of range for {n} vertices")]
    EndpointOutOfRange { v: Vertex, n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(Vertex),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(Vertex, Vertex),
    #[error("graph is not connected")]
    Disconnected,
}

/// Simple connected graph plus the sink all data is collected to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    sink: Vertex,
    adj: Vec<Vec<Vertex>>,
    m: usize,
}

impl Graph {
    /// Builds a graph from an undirected edge list, validating simplicity,
    /// connectivity and the sink id.
    pub fn from_edges(
        n: usize,
        sink: Vertex,
        edges: &[(Vertex, Vertex)],
    ) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        if sink >= n {
            return Err(GraphError::SinkOutOfRange { sink, n });
        }
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n {
                return Err(GraphError::EndpointOutOfRange { v: u, n });
            }
            if v >= n {
                return Err(GraphError::EndpointOutOfRange { v, n });
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        for (v, list) in adj.iter_mut().enumerate() {
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                return Err(GraphError::DuplicateEdge(v.min(w[0]), v.max(w[0])));
            }
        }
        let g = Graph {
            n,
            sink,
            adj,
            m: edges.len(),
        };
        if !g.is_connected() {
            return Err(GraphError::Disconnected);
        }
        Ok(g)
    }

    /// Same topology with a different sink.
    pub fn with_sink(mut self, sink: Vertex) -> Result<Self, GraphError> {
        if sink >= self.n {
            return Err(GraphError::SinkOutOfRange { sink, n: self.n });
        }
        self.sink = sink;
        Ok(self)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.m
    }

    pub fn sink(&self) -> Vertex {
        self.sink
    }

    pub fn vertices(&self) -> std::ops::Range<Vertex> {
        0..self.n
    }

    /// Neighbor list of `v`, sorted ascending.
    pub fn neighbors(&self, v: Vertex) -> &[Vertex] {
        &self.adj[v]
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, u: Vertex, v: Vertex) -> bool {
        u < self.n && v < self.n && self.adj[u].binary_search(&v).is_ok()
    }

    /// Iterates each undirected edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (Vertex, Vertex)> + '_ {
        self.adj.iter().enumerate().flat_map(|(u, list)| {
            list.iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    /// Hop distances from every vertex to the sink.
    pub fn bfs_levels(&self) -> Levels {
        let mut dist = vec![u32::MAX; self.n];
        let mut queue = VecDeque::new();
        dist[self.sink] = 0;
        queue.push_back(self.sink);
        while let Some(v) = queue.pop_front() {
            for &w in &self.adj[v] {
                if dist[w] == u32::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        debug_assert!(dist.iter().all(|&d| d != u32::MAX));
        Levels { dist }
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::new();
        seen[self.sink] = true;
        queue.push_back(self.sink);
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &self.adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.n
    }
}

/// Per-vertex hop distance to the sink (`dist(sink) = 0`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Levels {
    dist: Vec<u32>,
}

impl Levels {
    pub fn dist(&self, v: Vertex) -> u32 {
        self.dist[v]
    }

    /// Maximum hop distance from the sink to any vertex.
    pub fn eccentricity(&self) -> u32 {
        self.dist.iter().copied().max().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Graph {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        Graph::from_edges(n, 0, &edges).unwrap()
    }

    #[test]
    fn construction_validates() {
        assert_eq!(Graph::from_edges(0, 0, &[]), Err(GraphError::Empty));
        assert_eq!(
            Graph::from_edges(2, 5, &[(0, 1)]),
            Err(GraphError::SinkOutOfRange { sink: 5, n: 2 })
        );
        assert_eq!(
            Graph::from_edges(2, 0, &[(0, 2)]),
            Err(GraphError::EndpointOutOfRange { v: 2, n: 2 })
        );
        assert_eq!(
            Graph::from_edges(2, 0, &[(1, 1)]),
            Err(GraphError::SelfLoop(1))
        );
        assert_eq!(
            Graph::from_edges(2, 0, &[(0, 1), (1, 0)]),
            Err(GraphError::DuplicateEdge(0, 1))
        );
        assert_eq!(
            Graph::from_edges(3, 0, &[(0, 1)]),
            Err(GraphError::Disconnected)
        );
    }

    #[test]
    fn adjacency_is_sorted_and_symmetric() {
        let g = Graph::from_edges(4, 0, &[(2, 1), (0, 3), (0, 1), (3, 2)]).unwrap();
        assert_eq!(g.edge_count(), 4);
        for v in g.vertices() {
            assert!(g.neighbors(v).windows(2).all(|w| w[0] < w[1]));
            for &w in g.neighbors(v) {
                assert!(g.has_edge(w, v));
            }
        }
        let total: usize = g.vertices().map(|v| g.degree(v)).sum();
        assert_eq!(total, 2 * g.edge_count());
    }

    #[test]
    fn levels_on_path_and_star() {
        let g = path(3);
        let l = g.bfs_levels();
        assert_eq!((l.dist(0), l.dist(1), l.dist(2)), (0, 1, 2));
        assert_eq!(l.eccentricity(), 2);

        let star = Graph::from_edges(5, 0, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        let l = star.bfs_levels();
        assert_eq!(l.dist(0), 0);
        assert!((1..5).all(|v| l.dist(v) == 1));
    }

    #[test]
    fn levels_differ_by_at_most_one_across_edges() {
        let g = Graph::from_edges(6, 2, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)]).unwrap();
        let l = g.bfs_levels();
        for (u, v) in g.edges() {
            assert!(l.dist(u).abs_diff(l.dist(v)) <= 1);
        }
        for v in g.vertices() {
            if v != g.sink() {
                assert!(g
                    .neighbors(v)
                    .iter()
                    .any(|&w| l.dist(w) + 1 == l.dist(v)));
            }
        }
    }

    #[test]
    fn resinking_keeps_topology() {
        let g = path(4).with_sink(3).unwrap();
        assert_eq!(g.sink(), 3);
        assert_eq!(g.bfs_levels().dist(0), 3);
        assert!(path(4).with_sink(9).is_err());
    }
}
