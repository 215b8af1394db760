//! Ground truth for small instances: exact optimum via search over informed
//! vertex sets, exhaustive spanning-tree search, and the general lower bound.
//!
//! The convergecast problem with only parent-side conflicts is the time
//! reversal of single-message broadcasting: run the optimal schedule
//! backwards and every transmission becomes an informing call, each informed
//! vertex calling at most one uninformed neighbor per round.

use std::collections::HashMap;

use thiserror::Error;

use crate::graph::{Graph, Vertex};
use crate::tree::{AggregationTree, Schedule};

/// State-space cap for the informed-set search.
pub const EXACT_VERTEX_CAP: usize = 16;
/// Cap for exhaustive spanning-tree enumeration.
pub const EXHAUSTIVE_VERTEX_CAP: usize = 9;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("instance has {n} vertices, above the cap of {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("time limit exceeded after {0} rounds")]
    Timeout(u32),
}

/// One node of the informed-set search: which vertices already hold the
/// message and how many rounds have elapsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubsetState {
    pub informed: u32,
    pub rounds: u32,
}

/// Bounds of `lower_bound`: the information-doubling bound and the sink
/// eccentricity, with `lb` their maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundReport {
    pub lb_log: u32,
    pub lb_ecc: u32,
    pub lb: u32,
}

/// `max(ceil(log2 n), eccentricity of the sink)`. Sound for every instance:
/// the informed set can at most double per slot, and each vertex needs at
/// least its hop count in relay slots.
pub fn lower_bound(g: &Graph) -> BoundReport {
    let n = g.vertex_count();
    let lb_log = usize::BITS - (n - 1).leading_zeros();
    let lb_ecc = g.bfs_levels().eccentricity();
    BoundReport {
        lb_log,
        lb_ecc,
        lb: lb_log.max(lb_ecc),
    }
}

/// Minimum number of slots for any feasible schedule on `g`, by breadth-first
/// search over informed sets. Capped at 16 vertices.
pub fn broadcast_time_exact(g: &Graph) -> Result<u32, OracleError> {
    search(g, false, None, |_| {}).map(|(rounds, _)| rounds)
}

/// Like [`broadcast_time_exact`] but with a wall-clock budget.
pub fn broadcast_time_exact_within(
    g: &Graph,
    limit: std::time::Duration,
) -> Result<u32, OracleError> {
    search(g, false, Some(limit), |_| {}).map(|(rounds, _)| rounds)
}

/// Exact optimum together with a witness tree and schedule achieving it.
pub fn broadcast_schedule_exact(
    g: &Graph,
) -> Result<(AggregationTree, Schedule), OracleError> {
    let (rounds, preds) = search(g, true, None, |_| {})?;
    let preds = preds.expect("witness tracking requested");
    let n = g.vertex_count();
    let sink = g.sink();
    let full: u32 = (1u32 << n) - 1;

    // Walk the predecessor chain back to the start state, recording who
    // informed whom and in which round.
    let mut parent = vec![None; n];
    let mut round = vec![0u32; n];
    let mut state = full;
    let mut layer = rounds;
    while state != 1 << sink {
        let (prev, calls) = &preds[&state];
        for &(informer, target) in calls {
            parent[target as usize] = Some(informer as usize);
            round[target as usize] = layer;
        }
        state = *prev;
        layer -= 1;
    }
    let tree = AggregationTree::new(g, parent).expect("informing links form a spanning tree");
    // Time reversal: informed in round r  =>  transmits in slot rounds+1-r.
    let mut slot = vec![0u32; n];
    for v in 0..n {
        if v != sink {
            slot[v] = rounds + 1 - round[v];
        }
    }
    let schedule = Schedule {
        slot,
        latency: rounds,
    };
    debug_assert!(crate::tree::check_tree_schedule(g, &tree, &schedule).is_empty());
    Ok((tree, schedule))
}

type Predecessors = HashMap<u32, (u32, Vec<(u8, u8)>)>;

/// Core search. Layer `k` of the BFS holds every informed set reachable in
/// `k` rounds; a transition adds a set of uninformed frontier vertices that
/// admits a matching into the current set (one informer each).
fn search(
    g: &Graph,
    witness: bool,
    limit: Option<std::time::Duration>,
    mut on_pop: impl FnMut(SubsetState),
) -> Result<(u32, Option<Predecessors>), OracleError> {
    let n = g.vertex_count();
    if n > EXACT_VERTEX_CAP {
        return Err(OracleError::TooLarge {
            n,
            cap: EXACT_VERTEX_CAP,
        });
    }
    let start = std::time::Instant::now();
    let full: u32 = (1u32 << n) - 1;
    let adj_mask: Vec<u32> = g
        .vertices()
        .map(|v| g.neighbors(v).iter().fold(0u32, |m, &w| m | (1 << w)))
        .collect();

    let initial: u32 = 1 << g.sink();
    if initial == full {
        return Ok((0, witness.then(HashMap::new)));
    }
    let mut visited = vec![false; 1 << n];
    visited[initial as usize] = true;
    let mut preds: Predecessors = HashMap::new();
    let mut current = vec![initial];
    let mut rounds = 0u32;

    while !current.is_empty() {
        rounds += 1;
        if let Some(limit) = limit {
            if start.elapsed() > limit {
                return Err(OracleError::Timeout(rounds));
            }
        }
        let mut next = Vec::new();
        for &informed in &current {
            on_pop(SubsetState {
                informed,
                rounds: rounds - 1,
            });
            let senders = informed;
            let frontier = {
                let mut f = 0u32;
                let mut rest = informed;
                while rest != 0 {
                    let v = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    f |= adj_mask[v];
                }
                f & !informed
            };
            if frontier == 0 {
                continue;
            }
            let budget = senders.count_ones();
            // Every nonempty subset of the frontier is a candidate batch.
            let mut batch = frontier;
            while batch != 0 {
                if batch.count_ones() <= budget && has_matching(batch, senders, &adj_mask) {
                    let state = informed | batch;
                    if !visited[state as usize] {
                        visited[state as usize] = true;
                        if witness {
                            let calls = matching_pairs(batch, senders, &adj_mask);
                            preds.insert(state, (informed, calls));
                        }
                        if state == full {
                            return Ok((rounds, witness.then_some(preds)));
                        }
                        next.push(state);
                    }
                }
                batch = (batch - 1) & frontier;
            }
        }
        current = next;
    }
    unreachable!("connected graphs always reach the full set");
}

/// Augmenting-path matching: can every target in `batch` be assigned its own
/// informer from `senders`?
fn has_matching(batch: u32, senders: u32, adj_mask: &[u32]) -> bool {
    matching_size(batch, senders, adj_mask, None) == batch.count_ones() as usize
}

/// The matched (informer, target) pairs for a feasible batch.
fn matching_pairs(batch: u32, senders: u32, adj_mask: &[u32]) -> Vec<(u8, u8)> {
    let mut pairs = Vec::new();
    matching_size(batch, senders, adj_mask, Some(&mut pairs));
    pairs
}

fn matching_size(
    batch: u32,
    senders: u32,
    adj_mask: &[u32],
    mut record: Option<&mut Vec<(u8, u8)>>,
) -> usize {
    let targets: Vec<usize> = bits(batch).collect();
    // matched_to[s] = index into targets currently served by sender s
    let mut matched_to: [Option<usize>; EXACT_VERTEX_CAP] = [None; EXACT_VERTEX_CAP];
    let mut size = 0;
    for (ti, &t) in targets.iter().enumerate() {
        let mut seen = 0u32;
        if augment(ti, t, senders, adj_mask, &targets, &mut matched_to, &mut seen) {
            size += 1;
        }
    }
    if let Some(pairs) = record.as_deref_mut() {
        for (s, slot) in matched_to.iter().enumerate() {
            if let Some(ti) = slot {
                pairs.push((s as u8, targets[*ti] as u8));
            }
        }
    }
    size
}

fn augment(
    ti: usize,
    target: usize,
    senders: u32,
    adj_mask: &[u32],
    targets: &[usize],
    matched_to: &mut [Option<usize>; EXACT_VERTEX_CAP],
    seen: &mut u32,
) -> bool {
    let candidates = adj_mask[target] & senders & !*seen;
    for s in bits(candidates) {
        *seen |= 1 << s;
        let free = match matched_to[s] {
            None => true,
            Some(other) => augment(
                other,
                targets[other],
                senders,
                adj_mask,
                targets,
                matched_to,
                seen,
            ),
        };
        if free {
            matched_to[s] = Some(ti);
            return true;
        }
    }
    false
}

fn bits(mut mask: u32) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let v = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(v)
        }
    })
}

/// Enumerates every spanning tree (edge inclusion/exclusion with
/// connectivity pruning) and returns one of minimum latency. Capped at 9
/// vertices; the state space is exponential in the edge count.
pub fn best_tree_exhaustive(g: &Graph) -> Result<(AggregationTree, u32), OracleError> {
    let n = g.vertex_count();
    if n > EXHAUSTIVE_VERTEX_CAP {
        return Err(OracleError::TooLarge {
            n,
            cap: EXHAUSTIVE_VERTEX_CAP,
        });
    }
    let edges: Vec<(Vertex, Vertex)> = g.edges().collect();
    let mut chosen: Vec<(Vertex, Vertex)> = Vec::with_capacity(n - 1);
    let mut best: Option<(u32, Vec<Option<Vertex>>)> = None;
    let dsu: Vec<usize> = (0..n).collect();
    enumerate_trees(g, &edges, 0, dsu, &mut chosen, &mut best);
    let (latency, parent) = best.expect("connected graphs have a spanning tree");
    let tree = AggregationTree::new(g, parent).expect("enumeration yields valid trees");
    Ok((tree, latency))
}

fn enumerate_trees(
    g: &Graph,
    edges: &[(Vertex, Vertex)],
    idx: usize,
    dsu: Vec<usize>,
    chosen: &mut Vec<(Vertex, Vertex)>,
    best: &mut Option<(u32, Vec<Option<Vertex>>)>,
) {
    let n = g.vertex_count();
    if chosen.len() == n - 1 {
        let (latency, parent) = evaluate_tree(g, chosen);
        if best.as_ref().map_or(true, |(b, _)| latency < *b) {
            *best = Some((latency, parent));
        }
        return;
    }
    if idx == edges.len() {
        return;
    }
    // Prune: the chosen forest plus all remaining edges must still connect.
    {
        let mut probe = dsu.clone();
        for &(u, v) in &edges[idx..] {
            union(&mut probe, u, v);
        }
        let root = find(&mut probe, 0);
        if (1..n).any(|v| find(&mut probe, v) != root) {
            return;
        }
    }
    let (u, v) = edges[idx];
    let mut with_edge = dsu.clone();
    if union(&mut with_edge, u, v) {
        chosen.push((u, v));
        enumerate_trees(g, edges, idx + 1, with_edge, chosen, best);
        chosen.pop();
    }
    enumerate_trees(g, edges, idx + 1, dsu, chosen, best);
}

fn find(dsu: &mut [usize], v: usize) -> usize {
    let mut root = v;
    while dsu[root] != root {
        root = dsu[root];
    }
    let mut cur = v;
    while dsu[cur] != root {
        let next = dsu[cur];
        dsu[cur] = root;
        cur = next;
    }
    root
}

fn union(dsu: &mut [usize], u: usize, v: usize) -> bool {
    let (ru, rv) = (find(dsu, u), find(dsu, v));
    if ru == rv {
        false
    } else {
        dsu[ru] = rv;
        true
    }
}

/// Orient the chosen edge set away from the sink and compute its latency.
fn evaluate_tree(g: &Graph, edges: &[(Vertex, Vertex)]) -> (u32, Vec<Option<Vertex>>) {
    let n = g.vertex_count();
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let sink = g.sink();
    let mut parent = vec![None; n];
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    seen[sink] = true;
    order.push(sink);
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                parent[w] = Some(v);
                order.push(w);
            }
        }
    }
    let mut demand = vec![0u32; n];
    for &v in order.iter().rev() {
        let mut kids: Vec<u32> = adj[v]
            .iter()
            .filter(|&&w| parent[w] == Some(v))
            .map(|&w| demand[w])
            .collect();
        kids.sort_unstable_by(|a, b| b.cmp(a));
        demand[v] = kids
            .iter()
            .enumerate()
            .map(|(i, &d)| d + i as u32 + 1)
            .max()
            .unwrap_or(0);
    }
    (demand[sink], parent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::tree::latency;

    fn complete(n: usize) -> Graph {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v));
            }
        }
        Graph::from_edges(n, 0, &edges).unwrap()
    }

    fn star(k: usize) -> Graph {
        let edges: Vec<_> = (1..=k).map(|v| (0, v)).collect();
        Graph::from_edges(k + 1, 0, &edges).unwrap()
    }

    #[test]
    fn star_takes_one_slot_per_leaf() {
        for k in 1..=6 {
            assert_eq!(broadcast_time_exact(&star(k)).unwrap(), k as u32);
        }
    }

    #[test]
    fn complete_graphs_double_each_round() {
        assert_eq!(broadcast_time_exact(&complete(2)).unwrap(), 1);
        assert_eq!(broadcast_time_exact(&complete(4)).unwrap(), 2);
        assert_eq!(broadcast_time_exact(&complete(8)).unwrap(), 3);
    }

    #[test]
    fn shuffle_exchange_three_matches_published_optimum() {
        let g = generators::shuffle_exchange(3).unwrap();
        assert_eq!(broadcast_time_exact(&g).unwrap(), 5);
    }

    #[test]
    fn vertex_cap_is_enforced() {
        let g = generators::shuffle_exchange(5).unwrap();
        assert!(matches!(
            broadcast_time_exact(&g),
            Err(OracleError::TooLarge { n: 32, cap: 16 })
        ));
        assert!(matches!(
            best_tree_exhaustive(&generators::pure_random(10, 0.5, 1).unwrap()),
            Err(OracleError::TooLarge { n: 10, cap: 9 })
        ));
    }

    #[test]
    fn witness_schedule_is_feasible_and_optimal() {
        for g in [
            generators::shuffle_exchange(3).unwrap(),
            complete(8),
            generators::pure_random(9, 0.4, 2).unwrap(),
        ] {
            let opt = broadcast_time_exact(&g).unwrap();
            let (tree, schedule) = broadcast_schedule_exact(&g).unwrap();
            assert_eq!(schedule.latency, opt);
            assert!(crate::tree::check_tree_schedule(&g, &tree, &schedule).is_empty());
            assert_eq!(latency(&tree), opt);
        }
    }

    #[test]
    fn doubling_invariant_holds_for_every_popped_state() {
        let g = generators::pure_random(10, 0.45, 7).unwrap();
        search(&g, false, None, |state: SubsetState| {
            assert!(state.informed.count_ones() <= 1 << state.rounds.min(31));
            assert!(state.informed & (1 << g.sink()) != 0);
        })
        .unwrap();
    }

    #[test]
    fn exhaustive_search_on_a_tree_returns_the_tree() {
        let g = Graph::from_edges(5, 0, &[(0, 1), (1, 2), (1, 3), (0, 4)]).unwrap();
        let (tree, latency_found) = best_tree_exhaustive(&g).unwrap();
        for v in 1..5 {
            assert!(g.has_edge(v, tree.parent(v).unwrap()));
        }
        assert_eq!(latency_found, latency(&tree));
        assert_eq!(latency_found, broadcast_time_exact(&g).unwrap());
    }

    #[test]
    fn five_cycle_needs_three_slots() {
        let g = Graph::from_edges(5, 0, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)]).unwrap();
        let (_, latency_found) = best_tree_exhaustive(&g).unwrap();
        assert_eq!(latency_found, 3);
        assert_eq!(broadcast_time_exact(&g).unwrap(), 3);
    }

    #[test]
    fn oracles_agree_on_small_random_graphs() {
        for seed in 0..25 {
            let g = generators::pure_random(7, 0.45, seed).unwrap();
            let (_, by_trees) = best_tree_exhaustive(&g).unwrap();
            assert_eq!(by_trees, broadcast_time_exact(&g).unwrap(), "seed {seed}");
        }
    }

    #[test]
    fn lower_bound_components() {
        let bf8_size = 2048usize;
        let lb_log = (usize::BITS - (bf8_size - 1).leading_zeros()) as u32;
        assert_eq!(lb_log, 11);

        let path_edges: Vec<_> = (0..9).map(|i| (i, i + 1)).collect();
        let path = Graph::from_edges(10, 0, &path_edges).unwrap();
        let report = lower_bound(&path);
        assert_eq!(report.lb_ecc, 9);
        assert_eq!(report.lb, 9);

        let report = lower_bound(&generators::ccc(3).unwrap());
        assert_eq!(report.lb_log, 5);
        assert!(report.lb >= 5 && report.lb <= 6);
        assert_eq!(report.lb, report.lb_log.max(report.lb_ecc));
    }

    #[test]
    fn bound_never_exceeds_exact_optimum() {
        for seed in 0..20 {
            let g = generators::pure_random(9, 0.4, seed).unwrap();
            assert!(lower_bound(&g).lb <= broadcast_time_exact(&g).unwrap());
        }
    }
}
