//! Aggregation trees and conflict-free slot assignment on a fixed tree.
//!
//! A tree is stored as a parent link per non-sink vertex; arcs point towards
//! the sink (transmission direction). The schedule length of a fixed tree
//! follows a bottom-up recursion: a leaf needs no slots below it, and an
//! internal vertex with children sorted by their own requirement descending
//! needs `max_i (r(child_i) + i)`. A deadline-driven top-down pass turns that
//! number into an explicit slot per vertex.

use std::collections::VecDeque;

use thiserror::Error;

use crate::graph::{Graph, Vertex};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("parent vector length {got} does not match vertex count {want}")]
    WrongLength { got: usize, want: usize },
    #[error("sink {0} must not have a parent")]
    SinkHasParent(Vertex),
    #[error("vertex {0} has no parent")]
    MissingParent(Vertex),
    #[error("parent link ({child}, {parent}) is not a graph edge")]
    NotAnEdge { child: Vertex, parent: Vertex },
    #[error("parent links of vertex {0} form a cycle")]
    Cycle(Vertex),
    #[error("vertex {0} cannot be re-parented: it is the sink")]
    ReattachSink(Vertex),
    #[error("re-parenting {child} under {parent} would create a cycle")]
    WouldCreateCycle { child: Vertex, parent: Vertex },
    #[error("vertex {child} is already a child of {parent}")]
    AlreadyParent { child: Vertex, parent: Vertex },
}

/// Spanning tree rooted at the sink, one parent link per non-sink vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AggregationTree {
    parent: Vec<Option<Vertex>>,
    sink: Vertex,
}

impl AggregationTree {
    /// Validates the parent assignment against the graph: every non-sink
    /// vertex has exactly one parent, every link is an edge, and following
    /// parents always reaches the sink.
    pub fn new(g: &Graph, parent: Vec<Option<Vertex>>) -> Result<Self, TreeError> {
        let n = g.vertex_count();
        if parent.len() != n {
            return Err(TreeError::WrongLength {
                got: parent.len(),
                want: n,
            });
        }
        let sink = g.sink();
        if parent[sink].is_some() {
            return Err(TreeError::SinkHasParent(sink));
        }
        for v in g.vertices() {
            if v == sink {
                continue;
            }
            match parent[v] {
                None => return Err(TreeError::MissingParent(v)),
                Some(p) => {
                    if !g.has_edge(v, p) {
                        return Err(TreeError::NotAnEdge { child: v, parent: p });
                    }
                }
            }
        }
        // Walk every parent chain; a chain longer than n vertices is a cycle.
        let mut reaches_sink = vec![false; n];
        reaches_sink[sink] = true;
        for v in g.vertices() {
            let mut trail = Vec::new();
            let mut cur = v;
            while !reaches_sink[cur] {
                trail.push(cur);
                if trail.len() > n {
                    return Err(TreeError::Cycle(v));
                }
                cur = parent[cur].expect("non-sink checked above");
            }
            for t in trail {
                reaches_sink[t] = true;
            }
        }
        Ok(AggregationTree { parent, sink })
    }

    pub(crate) fn from_parts_unchecked(parent: Vec<Option<Vertex>>, sink: Vertex) -> Self {
        AggregationTree { parent, sink }
    }

    pub fn vertex_count(&self) -> usize {
        self.parent.len()
    }

    pub fn sink(&self) -> Vertex {
        self.sink
    }

    pub fn parent(&self, v: Vertex) -> Option<Vertex> {
        self.parent[v]
    }

    pub fn parents(&self) -> &[Option<Vertex>] {
        &self.parent
    }

    /// Children lists derived from the parent links.
    pub fn children(&self) -> Vec<Vec<Vertex>> {
        let mut children = vec![Vec::new(); self.parent.len()];
        for (v, p) in self.parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(v);
            }
        }
        children
    }

    /// Hop distance from each vertex to the sink along tree arcs.
    pub fn depths(&self) -> Vec<u32> {
        let mut depth = vec![u32::MAX; self.parent.len()];
        depth[self.sink] = 0;
        for v in 0..self.parent.len() {
            let mut chain = Vec::new();
            let mut cur = v;
            while depth[cur] == u32::MAX {
                chain.push(cur);
                cur = self.parent[cur].expect("valid tree");
            }
            let mut d = depth[cur];
            for &c in chain.iter().rev() {
                d += 1;
                depth[c] = d;
            }
        }
        depth
    }

    /// True when `v` lies in the subtree hanging off `root` (including
    /// `v == root`).
    pub fn in_subtree(&self, root: Vertex, v: Vertex) -> bool {
        let mut cur = v;
        loop {
            if cur == root {
                return true;
            }
            match self.parent[cur] {
                Some(p) => cur = p,
                None => return false,
            }
        }
    }
}

/// Transmission slot per non-sink vertex; `slot[sink]` is unused and held 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub slot: Vec<u32>,
    pub latency: u32,
}

/// Minimum schedule length of the fixed tree.
pub fn latency(t: &AggregationTree) -> u32 {
    SubtreeDemand::of(t).demand[t.sink()]
}

/// Bottom-up per-subtree slot demand, computed in one pass over vertices
/// ordered deepest first.
struct SubtreeDemand {
    demand: Vec<u32>,
    children: Vec<Vec<Vertex>>,
    depth: Vec<u32>,
}

impl SubtreeDemand {
    fn of(t: &AggregationTree) -> Self {
        let children = t.children();
        let depth = t.depths();
        let n = t.vertex_count();
        let mut order: Vec<Vertex> = (0..n).collect();
        order.sort_unstable_by_key(|&v| std::cmp::Reverse(depth[v]));
        let mut demand = vec![0u32; n];
        for &v in &order {
            demand[v] = merge_children(children[v].iter().map(|&c| demand[c]));
        }
        SubtreeDemand {
            demand,
            children,
            depth,
        }
    }
}

/// Demand of a vertex from its children's demands: sort descending and take
/// `max_i (demand_i + i)` with 1-based `i`.
fn merge_children(demands: impl Iterator<Item = u32>) -> u32 {
    let mut sorted: Vec<u32> = demands.collect();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    sorted
        .iter()
        .enumerate()
        .map(|(i, &d)| d + i as u32 + 1)
        .max()
        .unwrap_or(0)
}

/// Explicit slot assignment realizing `latency(t)`: walk top-down handing the
/// busiest child the latest slot below the current deadline. Ties between
/// equally demanding children break towards the smaller vertex id.
pub fn assign_slots(t: &AggregationTree) -> Schedule {
    let state = SubtreeDemand::of(t);
    let n = t.vertex_count();
    let total = state.demand[t.sink()];
    let mut slot = vec![0u32; n];
    let mut deadline = vec![0u32; n];
    deadline[t.sink()] = total;
    let mut queue = VecDeque::new();
    queue.push_back(t.sink());
    while let Some(v) = queue.pop_front() {
        let mut kids = state.children[v].clone();
        kids.sort_unstable_by_key(|&c| (std::cmp::Reverse(state.demand[c]), c));
        for (i, &c) in kids.iter().enumerate() {
            let s = deadline[v] - i as u32;
            debug_assert!(s > state.demand[c], "deadline must cover the subtree");
            slot[c] = s;
            deadline[c] = s - 1;
            queue.push_back(c);
        }
    }
    Schedule {
        slot,
        latency: total,
    }
}

/// A feasibility breach found by [`check_schedule`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Vertex has no parent link (or the sink has one).
    NotSpanning { vertex: Vertex },
    /// Parent chain from this vertex never reaches the sink.
    Cycle { vertex: Vertex },
    /// Parent link is not an edge of the communication graph.
    NonEdgeParent { child: Vertex, parent: Vertex },
    /// Two children of one parent transmit in the same slot.
    SiblingClash {
        parent: Vertex,
        first: Vertex,
        second: Vertex,
        slot: u32,
    },
    /// A vertex transmits no later than one of its children, so it would
    /// send and receive in one slot (or earlier).
    ChildNotBeforeParent {
        child: Vertex,
        parent: Vertex,
        child_slot: u32,
        parent_slot: u32,
    },
    /// Slots start at 1.
    NonpositiveSlot { vertex: Vertex, slot: u32 },
    /// Declared latency is not the maximum slot.
    LatencyMismatch { declared: u32, max_slot: u32 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NotSpanning { vertex } => {
                write!(f, "vertex {vertex} breaks the spanning structure")
            }
            Violation::Cycle { vertex } => {
                write!(f, "parent chain from vertex {vertex} loops without reaching the sink")
            }
            Violation::NonEdgeParent { child, parent } => {
                write!(f, "parent link ({child}, {parent}) is not a graph edge")
            }
            Violation::SiblingClash {
                parent,
                first,
                second,
                slot,
            } => write!(
                f,
                "children {first} and {second} of {parent} both transmit in slot {slot}"
            ),
            Violation::ChildNotBeforeParent {
                child,
                parent,
                child_slot,
                parent_slot,
            } => write!(
                f,
                "child {child} (slot {child_slot}) does not precede parent {parent} (slot {parent_slot})"
            ),
            Violation::NonpositiveSlot { vertex, slot } => {
                write!(f, "vertex {vertex} has nonpositive slot {slot}")
            }
            Violation::LatencyMismatch { declared, max_slot } => {
                write!(f, "declared latency {declared} but maximum slot is {max_slot}")
            }
        }
    }
}

/// Validates a raw (parent, slot) assignment against the three scheduling
/// conditions. Accepts arbitrary input and reports every violation; an empty
/// list means the schedule is feasible.
pub fn check_schedule(
    g: &Graph,
    parent: &[Option<Vertex>],
    slot: &[u32],
    declared_latency: u32,
) -> Vec<Violation> {
    let n = g.vertex_count();
    let sink = g.sink();
    let mut out = Vec::new();
    if parent.len() != n || slot.len() != n {
        out.push(Violation::NotSpanning { vertex: sink });
        return out;
    }
    if parent[sink].is_some() {
        out.push(Violation::NotSpanning { vertex: sink });
    }
    for v in 0..n {
        if v == sink {
            continue;
        }
        match parent[v] {
            None => out.push(Violation::NotSpanning { vertex: v }),
            Some(p) => {
                if p >= n || !g.has_edge(v, p) {
                    out.push(Violation::NonEdgeParent { child: v, parent: p });
                }
            }
        }
    }
    // Cycle detection: walk up with a step budget of n.
    for v in 0..n {
        let mut cur = v;
        let mut steps = 0;
        loop {
            if cur == sink {
                break;
            }
            match parent.get(cur).copied().flatten() {
                Some(p) if p < n => {
                    cur = p;
                    steps += 1;
                    if steps > n {
                        out.push(Violation::Cycle { vertex: v });
                        break;
                    }
                }
                _ => break, // missing parent already reported
            }
        }
    }
    for v in 0..n {
        if v != sink && slot[v] == 0 {
            out.push(Violation::NonpositiveSlot { vertex: v, slot: 0 });
        }
    }
    // Sibling clashes, children of the sink included.
    let mut by_parent: Vec<Vec<Vertex>> = vec![Vec::new(); n];
    for v in 0..n {
        if v == sink {
            continue;
        }
        if let Some(p) = parent[v] {
            if p < n {
                by_parent[p].push(v);
            }
        }
    }
    for (p, kids) in by_parent.iter().enumerate() {
        for (i, &a) in kids.iter().enumerate() {
            for &b in &kids[i + 1..] {
                if slot[a] == slot[b] {
                    out.push(Violation::SiblingClash {
                        parent: p,
                        first: a,
                        second: b,
                        slot: slot[a],
                    });
                }
            }
        }
        if p != sink {
            for &c in kids {
                if slot[c] >= slot[p] {
                    out.push(Violation::ChildNotBeforeParent {
                        child: c,
                        parent: p,
                        child_slot: slot[c],
                        parent_slot: slot[p],
                    });
                }
            }
        }
    }
    let max_slot = (0..n)
        .filter(|&v| v != sink)
        .map(|v| slot[v])
        .max()
        .unwrap_or(0);
    if max_slot != declared_latency {
        out.push(Violation::LatencyMismatch {
            declared: declared_latency,
            max_slot,
        });
    }
    out
}

/// Convenience wrapper checking a validated tree plus schedule pair.
pub fn check_tree_schedule(g: &Graph, t: &AggregationTree, s: &Schedule) -> Vec<Violation> {
    check_schedule(g, t.parents(), &s.slot, s.latency)
}

/// Latency change caused by detaching `v` from its parent and re-attaching it
/// under `u`, without modifying the tree. Negative means improvement.
///
/// Only the two parent chains touched by the move are re-evaluated; the
/// equivalence with full recomputation is covered by tests.
pub fn reattach_effect(
    g: &Graph,
    t: &AggregationTree,
    v: Vertex,
    u: Vertex,
) -> Result<i64, TreeError> {
    validate_reattach(g, t, v, u)?;
    let state = ScheduledTree::new(t);
    Ok(state.reattach_effect(v, u))
}

/// New tree with `parent(v) = u`; everything else unchanged.
pub fn apply_reattach(
    t: &AggregationTree,
    v: Vertex,
    u: Vertex,
) -> Result<AggregationTree, TreeError> {
    if v == t.sink() {
        return Err(TreeError::ReattachSink(v));
    }
    if t.parent(v) == Some(u) {
        return Err(TreeError::AlreadyParent { child: v, parent: u });
    }
    if t.in_subtree(v, u) {
        return Err(TreeError::WouldCreateCycle { child: v, parent: u });
    }
    let mut parent = t.parents().to_vec();
    parent[v] = Some(u);
    Ok(AggregationTree::from_parts_unchecked(parent, t.sink()))
}

fn validate_reattach(
    g: &Graph,
    t: &AggregationTree,
    v: Vertex,
    u: Vertex,
) -> Result<(), TreeError> {
    if v == t.sink() {
        return Err(TreeError::ReattachSink(v));
    }
    if !g.has_edge(v, u) {
        return Err(TreeError::NotAnEdge { child: v, parent: u });
    }
    if t.parent(v) == Some(u) {
        return Err(TreeError::AlreadyParent { child: v, parent: u });
    }
    if t.in_subtree(v, u) {
        return Err(TreeError::WouldCreateCycle { child: v, parent: u });
    }
    Ok(())
}

/// Mutable tree with cached children lists, depths and subtree demands.
/// Backs the local search, where thousands of candidate moves are priced
/// per improvement round.
pub(crate) struct ScheduledTree {
    parent: Vec<Option<Vertex>>,
    sink: Vertex,
    children: Vec<Vec<Vertex>>,
    depth: Vec<u32>,
    demand: Vec<u32>,
}

impl ScheduledTree {
    pub(crate) fn new(t: &AggregationTree) -> Self {
        let state = SubtreeDemand::of(t);
        ScheduledTree {
            parent: t.parents().to_vec(),
            sink: t.sink(),
            children: state.children,
            depth: state.depth,
            demand: state.demand,
        }
    }

    pub(crate) fn parent(&self, v: Vertex) -> Option<Vertex> {
        self.parent[v]
    }

    pub(crate) fn is_descendant(&self, v: Vertex, root: Vertex) -> bool {
        let mut cur = v;
        loop {
            if cur == root {
                return true;
            }
            match self.parent[cur] {
                Some(p) => cur = p,
                None => return false,
            }
        }
    }

    /// Chain of vertices from `start` (inclusive) up to the sink.
    fn chain_to_sink(&self, start: Vertex) -> Vec<Vertex> {
        let mut chain = vec![start];
        let mut cur = start;
        while let Some(p) = self.parent[cur] {
            chain.push(p);
            cur = p;
        }
        chain
    }

    /// Recomputed demands for every vertex whose subtree changes when `v`
    /// moves under `u`: the old parent chain and the new one.
    fn recompute_chains(&self, v: Vertex, u: Vertex) -> Vec<(Vertex, u32)> {
        let old_parent = self.parent[v].expect("v is not the sink");
        let mut affected = self.chain_to_sink(old_parent);
        affected.extend(self.chain_to_sink(u));
        affected.sort_unstable_by_key(|&x| (std::cmp::Reverse(self.depth[x]), x));
        affected.dedup();

        let mut updated: Vec<(Vertex, u32)> = Vec::with_capacity(affected.len());
        let lookup = |updated: &Vec<(Vertex, u32)>, x: Vertex, base: &[u32]| {
            updated
                .iter()
                .find(|(y, _)| *y == x)
                .map(|&(_, d)| d)
                .unwrap_or(base[x])
        };
        for &x in &affected {
            let demands = self.children[x]
                .iter()
                .copied()
                .filter(|&c| !(x == old_parent && c == v))
                .chain((x == u).then_some(v))
                .map(|c| lookup(&updated, c, &self.demand));
            updated.push((x, merge_children(demands)));
        }
        updated
    }

    /// Latency delta of the move, leaving the tree untouched. The caller
    /// guarantees `u` is outside the subtree of `v`.
    pub(crate) fn reattach_effect(&self, v: Vertex, u: Vertex) -> i64 {
        debug_assert!(!self.is_descendant(u, v));
        let updated = self.recompute_chains(v, u);
        let new_total = updated
            .iter()
            .rev()
            .find(|(x, _)| *x == self.sink)
            .map(|&(_, d)| d)
            .expect("both chains end at the sink");
        new_total as i64 - self.demand[self.sink] as i64
    }

    /// Commits the move and refreshes the cached demands and depths.
    pub(crate) fn apply_reattach(&mut self, v: Vertex, u: Vertex) {
        debug_assert!(!self.is_descendant(u, v));
        let updated = self.recompute_chains(v, u);
        let old_parent = self.parent[v].expect("v is not the sink");
        self.children[old_parent].retain(|&c| c != v);
        self.children[u].push(v);
        self.parent[v] = Some(u);
        for (x, d) in updated {
            self.demand[x] = d;
        }
        // Depths shift uniformly across the moved subtree.
        let new_depth = self.depth[u] + 1;
        let delta = new_depth as i64 - self.depth[v] as i64;
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            self.depth[x] = (self.depth[x] as i64 + delta) as u32;
            stack.extend(self.children[x].iter().copied());
        }
    }

    pub(crate) fn into_tree(self) -> AggregationTree {
        AggregationTree::from_parts_unchecked(self.parent, self.sink)
    }
}
