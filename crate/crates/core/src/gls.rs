//! Genetic local search over aggregation trees.
//!
//! The engine keeps a population of spanning trees, breeds offspring by a
//! per-vertex parent-link crossover, perturbs them with bounded random
//! reattachments, polishes a fraction with a best-improvement local search,
//! and keeps the fittest trees each generation. Fitness is exactly
//! `1 / latency`; latencies are integers, so fitness values are compared as
//! rationals and every random choice over them uses integer rejection
//! sampling rather than floating-point weights.
//!
//! Offspring construction draws from RNG streams derived from
//! `(seed, generation, offspring index)`, so serial and parallel runs are
//! bit-identical.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{Graph, Levels, Vertex};
use crate::tree::{assign_slots, latency, AggregationTree, Schedule, ScheduledTree};

/// Generations the population extremes must sit still before stopping.
const STALL_GENERATIONS: u32 = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("pop_size must be at least 2, got {0}")]
    PopSize(usize),
    #[error("offsp_size must be at least 1, got {0}")]
    OffspSize(usize),
    #[error("{name} = {value} outside [0, 1]")]
    Probability { name: &'static str, value: f64 },
}

/// Tunable knobs of the search plus the RNG seed and a generation cap.
#[derive(Debug, Clone, PartialEq)]
pub struct GlsParams {
    pub pop_size: usize,
    pub offsp_size: usize,
    /// Budget of failed (clone) draws while building the first population.
    pub fp_it_count: u32,
    /// Share of initial trees drawn from the shortest-path construction.
    pub sp_proportion: f64,
    pub p_m: f64,
    pub p_ls: f64,
    /// Mutation distance cap; `None` means `n / 3` for the instance at hand.
    pub k_max: Option<usize>,
    pub seed: u64,
    pub max_generations: u32,
}

impl Default for GlsParams {
    fn default() -> Self {
        GlsParams {
            pop_size: 50,
            offsp_size: 25,
            fp_it_count: 3,
            sp_proportion: 0.6,
            p_m: 0.6,
            p_ls: 0.8,
            k_max: None,
            seed: 0,
            max_generations: 1000,
        }
    }
}

impl GlsParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if self.pop_size < 2 {
            return Err(ParamError::PopSize(self.pop_size));
        }
        if self.offsp_size < 1 {
            return Err(ParamError::OffspSize(self.offsp_size));
        }
        for (name, value) in [
            ("sp_proportion", self.sp_proportion),
            ("p_m", self.p_m),
            ("p_ls", self.p_ls),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ParamError::Probability { name, value });
            }
        }
        Ok(())
    }

    fn k_max_for(&self, n: usize) -> usize {
        self.k_max.unwrap_or(n / 3)
    }
}

/// Exact solution quality `1 / latency`, ordered as a rational: smaller
/// latency means higher fitness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fitness {
    latency: u32,
}

impl Fitness {
    pub fn from_latency(latency: u32) -> Self {
        Fitness { latency }
    }

    pub fn latency(&self) -> u32 {
        self.latency
    }

    /// Float view for reporting only; comparisons never touch this.
    pub fn value(&self) -> f64 {
        1.0 / self.latency as f64
    }
}

impl Ord for Fitness {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.latency.cmp(&self.latency)
    }
}

impl PartialOrd for Fitness {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
pub struct Member {
    pub tree: AggregationTree,
    pub latency: u32,
    pub fitness: Fitness,
    age: u64,
}

impl Member {
    fn new(tree: AggregationTree, age: u64) -> Self {
        let latency = latency(&tree);
        Member {
            tree,
            latency,
            fitness: Fitness::from_latency(latency),
            age,
        }
    }
}

/// Population of candidate trees, kept sorted best-first; ties in fitness
/// break towards the older member.
#[derive(Debug, Clone)]
pub struct Population {
    pub members: Vec<Member>,
    pub generation: u32,
    /// `(min fitness, max fitness)` after each generation, entry 0 from
    /// initialization.
    pub history: Vec<(Fitness, Fitness)>,
    next_age: u64,
}

impl Population {
    pub fn best(&self) -> &Member {
        &self.members[0]
    }

    pub fn extremes(&self) -> (Fitness, Fitness) {
        let min = self.members.iter().map(|m| m.fitness).min().unwrap();
        let max = self.members.iter().map(|m| m.fitness).max().unwrap();
        (min, max)
    }

    fn sort(&mut self) {
        self.members.sort_by_key(|m| (m.latency, m.age));
    }

    /// Elitist join: keep the `pop_size` fittest of population plus
    /// offspring. Clones are allowed here; only initialization forbids them.
    fn join(&mut self, offspring: Vec<AggregationTree>, pop_size: usize) {
        for tree in offspring {
            let age = self.next_age;
            self.next_age += 1;
            self.members.push(Member::new(tree, age));
        }
        self.sort();
        self.members.truncate(pop_size);
    }
}

/// Deterministic shortest-path tree: every vertex picks its lowest-numbered
/// neighbor one level closer to the sink.
pub fn spt_tree(g: &Graph) -> AggregationTree {
    let levels = g.bfs_levels();
    let mut parent = vec![None; g.vertex_count()];
    for v in g.vertices() {
        if v == g.sink() {
            continue;
        }
        let p = g
            .neighbors(v)
            .iter()
            .copied()
            .find(|&w| levels.dist(w) + 1 == levels.dist(v))
            .expect("connected graph has a next-hop towards the sink");
        parent[v] = Some(p);
    }
    debug_assert!(AggregationTree::new(g, parent.clone()).is_ok());
    AggregationTree::from_parts_unchecked(parent, g.sink())
}

/// Random shortest-path tree: grow from the sink choosing uniformly among
/// the frontier arcs that respect the level structure. Every output is a
/// shortest-path tree.
pub fn random_shortest_path_tree(g: &Graph, rng: &mut impl Rng) -> AggregationTree {
    let levels = g.bfs_levels();
    grow_tree(g, rng, |u, w| levels.dist(u) == levels.dist(w) + 1, |_| 0)
}

/// Random tree biased against high-degree attachment points: a frontier arc
/// into tree vertex `w` is accepted with probability `1 / (deg_T(w) + 1)`.
pub fn random_min_degree_tree(g: &Graph, rng: &mut impl Rng) -> AggregationTree {
    grow_tree(g, rng, |_, _| true, |deg| deg)
}

/// Shared tree-growing loop. `admit` filters frontier arcs `(outside u,
/// inside w)`; `weight_degree` maps the attachment point's current tree
/// degree to the rejection bound (accept probability `1 / (bound + 1)`).
fn grow_tree(
    g: &Graph,
    rng: &mut impl Rng,
    admit: impl Fn(Vertex, Vertex) -> bool,
    weight_degree: impl Fn(u32) -> u32,
) -> AggregationTree {
    let n = g.vertex_count();
    let sink = g.sink();
    let mut parent = vec![None; n];
    let mut in_tree = vec![false; n];
    let mut tree_degree = vec![0u32; n];
    in_tree[sink] = true;
    for _ in 1..n {
        let mut arcs = Vec::new();
        for w in 0..n {
            if !in_tree[w] {
                continue;
            }
            for &u in g.neighbors(w) {
                if !in_tree[u] && admit(u, w) {
                    arcs.push((u, w));
                }
            }
        }
        debug_assert!(!arcs.is_empty(), "connected graph always has a frontier");
        let (u, w) = loop {
            let candidate = arcs[rng.random_range(0..arcs.len())];
            let bound = weight_degree(tree_degree[candidate.1]);
            if bound == 0 || rng.random_range(0..=bound) == 0 {
                break candidate;
            }
        };
        parent[u] = Some(w);
        in_tree[u] = true;
        tree_degree[u] += 1;
        tree_degree[w] += 1;
    }
    debug_assert!(AggregationTree::new(g, parent.clone()).is_ok());
    AggregationTree::from_parts_unchecked(parent, sink)
}

/// Builds the starting population: the deterministic shortest-path tree
/// first, then random draws until `pop_size` trees exist or `fp_it_count`
/// draws came out as clones. The failure budget is never replenished, so
/// small instances may legally stop with a single tree.
pub fn init_population(g: &Graph, params: &GlsParams, rng: &mut impl Rng) -> Population {
    let mut members = vec![Member::new(spt_tree(g), 0)];
    let mut seen: HashSet<Vec<Option<Vertex>>> =
        HashSet::from([members[0].tree.parents().to_vec()]);
    let mut next_age = 1;
    let mut failures = 0;
    while failures < params.fp_it_count && members.len() < params.pop_size {
        let tree = if rng.random::<f64>() < params.sp_proportion {
            random_shortest_path_tree(g, rng)
        } else {
            random_min_degree_tree(g, rng)
        };
        if seen.insert(tree.parents().to_vec()) {
            members.push(Member::new(tree, next_age));
            next_age += 1;
        } else {
            failures += 1;
        }
    }
    let mut pop = Population {
        members,
        generation: 0,
        history: Vec::new(),
        next_age,
    };
    pop.sort();
    let extremes = pop.extremes();
    pop.history.push(extremes);
    pop
}

/// Roulette selection with replacement: member `i` is drawn with probability
/// proportional to `1 / latency_i`. Implemented by uniform proposal plus
/// integer rejection (accept with probability `latency_min / latency_i`), so
/// the weights stay exact.
pub fn select_parents(pop: &Population, count: usize, rng: &mut impl Rng) -> Vec<usize> {
    let min_latency = pop.members.iter().map(|m| m.latency).min().unwrap();
    (0..count)
        .map(|_| loop {
            let i = rng.random_range(0..pop.members.len());
            if min_latency == 0 || rng.random_range(0..pop.members[i].latency) < min_latency {
                break i;
            }
        })
        .collect()
}

/// Undirected degree of every vertex within its own tree.
fn tree_degrees(t: &AggregationTree) -> Vec<u32> {
    let mut deg = vec![0u32; t.vertex_count()];
    for v in 0..t.vertex_count() {
        if let Some(p) = t.parent(v) {
            deg[v] += 1;
            deg[p] += 1;
        }
    }
    deg
}

/// Per-vertex parent-link crossover. Where the parents agree the link is
/// inherited; where exactly one choice keeps the partial child acyclic it is
/// forced; otherwise the two links are drawn with weights favoring
/// low-degree, level-decreasing attachment points.
///
/// Vertices are processed by increasing level under a random shuffle. If
/// both candidate links of some vertex would close a cycle, the vertex falls
/// back to a random safe neighbor; if none exists the whole pass restarts
/// with a fresh shuffle (at most 5 times) before surrendering to a copy of
/// the first parent.
pub fn crossover(
    g: &Graph,
    t1: &AggregationTree,
    t2: &AggregationTree,
    levels: &Levels,
    rng: &mut impl Rng,
) -> AggregationTree {
    let n = g.vertex_count();
    let sink = g.sink();
    let deg = [tree_degrees(t1), tree_degrees(t2)];

    let weight = |v: Vertex, p: Vertex, which: usize| -> f64 {
        let gap = (levels.dist(v) as i64 - levels.dist(p) as i64 - 2).abs();
        debug_assert!((1..=3).contains(&gap));
        1.0 / deg[which][p] as f64 + 1.0 / gap as f64
    };

    let mut order: Vec<Vertex> = (0..n).filter(|&v| v != sink).collect();
    for _attempt in 0..=5 {
        order.shuffle(rng);
        order.sort_by_key(|&v| levels.dist(v));

        let mut parent: Vec<Option<Vertex>> = vec![None; n];
        // Adding (v -> p) closes a cycle iff the partial parent chain from p
        // leads back to v.
        let closes_cycle = |parent: &[Option<Vertex>], v: Vertex, p: Vertex| -> bool {
            let mut cur = p;
            loop {
                if cur == v {
                    return true;
                }
                match parent[cur] {
                    Some(next) => cur = next,
                    None => return false,
                }
            }
        };

        let mut stuck = false;
        for &v in &order {
            let p1 = t1.parent(v).expect("non-sink vertex");
            let p2 = t2.parent(v).expect("non-sink vertex");
            let ok1 = !closes_cycle(&parent, v, p1);
            let ok2 = !closes_cycle(&parent, v, p2);
            let choice = if p1 == p2 {
                ok1.then_some(p1)
            } else {
                match (ok1, ok2) {
                    (true, false) => Some(p1),
                    (false, true) => Some(p2),
                    (true, true) => {
                        let w1 = weight(v, p1, 0);
                        let w2 = weight(v, p2, 1);
                        Some(if rng.random_bool(w1 / (w1 + w2)) { p1 } else { p2 })
                    }
                    (false, false) => None,
                }
            };
            let choice = choice.or_else(|| {
                let safe: Vec<Vertex> = g
                    .neighbors(v)
                    .iter()
                    .copied()
                    .filter(|&u| !closes_cycle(&parent, v, u))
                    .collect();
                if safe.is_empty() {
                    None
                } else {
                    Some(safe[rng.random_range(0..safe.len())])
                }
            });
            match choice {
                Some(p) => parent[v] = Some(p),
                None => {
                    stuck = true;
                    break;
                }
            }
        }
        if !stuck {
            debug_assert!(AggregationTree::new(g, parent.clone()).is_ok());
            return AggregationTree::from_parts_unchecked(parent, sink);
        }
    }
    t1.clone()
}

/// Random perturbation: draw a distance budget `k` from `{0..k_max}` with
/// probability proportional to `1 / (k + 1)`, then `k` times pick a uniform
/// non-tree arc `(i, j)` and re-parent `i` under `j` unless `j` sits in the
/// subtree of `i`. Rejected picks still consume their iteration.
pub fn mutate(
    g: &Graph,
    t: &AggregationTree,
    params: &GlsParams,
    rng: &mut impl Rng,
) -> AggregationTree {
    let n = g.vertex_count();
    let sink = g.sink();
    let k_max = params.k_max_for(n);
    let k = loop {
        let k = rng.random_range(0..=k_max);
        if rng.random_range(0..=k) == 0 {
            break k;
        }
    };
    let mut parent = t.parents().to_vec();
    let in_subtree = |parent: &[Option<Vertex>], root: Vertex, mut v: Vertex| -> bool {
        loop {
            if v == root {
                return true;
            }
            match parent[v] {
                Some(p) => v = p,
                None => return false,
            }
        }
    };
    for _ in 0..k {
        let mut candidates: Vec<(Vertex, Vertex)> = Vec::new();
        for i in 0..n {
            if i == sink {
                continue;
            }
            for &j in g.neighbors(i) {
                if parent[i] != Some(j) {
                    candidates.push((i, j));
                }
            }
        }
        if candidates.is_empty() {
            continue;
        }
        let (i, j) = candidates[rng.random_range(0..candidates.len())];
        if !in_subtree(&parent, i, j) {
            parent[i] = Some(j);
        }
    }
    debug_assert!(AggregationTree::new(g, parent.clone()).is_ok());
    AggregationTree::from_parts_unchecked(parent, sink)
}

/// Best-improvement local search: repeatedly scan every re-parenting move
/// `(v, u)` over graph arcs and apply the one with the largest latency drop,
/// until no move strictly improves. The result is 1-move optimal.
pub fn local_search(g: &Graph, t: &AggregationTree) -> AggregationTree {
    let mut state = ScheduledTree::new(t);
    let sink = g.sink();
    loop {
        let mut best: Option<(i64, Vertex, Vertex)> = None;
        for v in g.vertices() {
            if v == sink {
                continue;
            }
            let current = state.parent(v).expect("non-sink vertex");
            for &u in g.neighbors(v) {
                if u == current || state.is_descendant(u, v) {
                    continue;
                }
                let delta = state.reattach_effect(v, u);
                if delta < best.map_or(0, |(d, _, _)| d) {
                    best = Some((delta, v, u));
                }
            }
        }
        match best {
            Some((_, v, u)) => state.apply_reattach(v, u),
            None => return state.into_tree(),
        }
    }
}

/// Execution options orthogonal to the search parameters.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads for offspring construction; 0 or 1 means serial.
    pub jobs: usize,
    /// Wall-clock budget, checked between generations.
    pub time_limit: Option<Duration>,
}

/// Outcome of a full run: the best tree, a feasible schedule realizing its
/// latency, and run statistics.
#[derive(Debug, Clone)]
pub struct GlsResult {
    pub tree: AggregationTree,
    pub schedule: Schedule,
    pub latency: u32,
    pub generations: u32,
    pub elapsed_ms: u64,
    pub seed: u64,
    pub initial_population_size: usize,
}

impl GlsResult {
    /// One-line run summary: `latency generations elapsed_ms seed`.
    pub fn summary_line(&self) -> String {
        format!(
            "{} {} {} {}",
            self.latency, self.generations, self.elapsed_ms, self.seed
        )
    }
}

/// Runs the full search single-threaded with no time limit.
pub fn run_gls(g: &Graph, params: &GlsParams) -> Result<GlsResult, ParamError> {
    run_gls_with(g, params, &RunOptions::default())
}

/// Runs the full search. Equal `(graph, params.seed)` produce identical
/// results for every `jobs` setting.
pub fn run_gls_with(
    g: &Graph,
    params: &GlsParams,
    opts: &RunOptions,
) -> Result<GlsResult, ParamError> {
    params.validate()?;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut pop = init_population(g, params, &mut rng);
    let initial_population_size = pop.members.len();
    let levels = g.bfs_levels();
    let pool = (opts.jobs > 1).then(|| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .expect("thread pool")
    });

    let mut stall = 0;
    while pop.generation < params.max_generations {
        if opts
            .time_limit
            .is_some_and(|limit| started.elapsed() > limit)
        {
            break;
        }
        let generation = pop.generation + 1;
        let mut chosen = select_parents(&pop, 2 * params.offsp_size, &mut rng);
        chosen.shuffle(&mut rng);
        let pairs: Vec<(usize, usize)> = chosen.chunks_exact(2).map(|c| (c[0], c[1])).collect();

        let breed = |(index, (a, b)): (usize, (usize, usize))| -> AggregationTree {
            let mut orng = offspring_rng(params.seed, generation, index);
            let mut child = crossover(
                g,
                &pop.members[a].tree,
                &pop.members[b].tree,
                &levels,
                &mut orng,
            );
            if orng.random::<f64>() < params.p_m {
                child = mutate(g, &child, params, &mut orng);
            }
            if orng.random::<f64>() < params.p_ls {
                child = local_search(g, &child);
            }
            child
        };
        let offspring: Vec<AggregationTree> = match &pool {
            Some(pool) => pool.install(|| {
                use rayon::prelude::*;
                pairs
                    .par_iter()
                    .copied()
                    .enumerate()
                    .map(breed)
                    .collect()
            }),
            None => pairs.iter().copied().enumerate().map(breed).collect(),
        };

        pop.join(offspring, params.pop_size);
        pop.generation = generation;
        let extremes = pop.extremes();
        if pop.history.last() == Some(&extremes) {
            stall += 1;
        } else {
            stall = 0;
        }
        pop.history.push(extremes);
        if stall >= STALL_GENERATIONS {
            break;
        }
    }

    // The returned tree is always 1-move optimal; for best members that
    // skipped the in-loop local search this can only help.
    let tree = local_search(g, &pop.best().tree);
    let best_latency = latency(&tree);
    let schedule = assign_slots(&tree);
    debug_assert!(crate::tree::check_tree_schedule(g, &tree, &schedule).is_empty());
    Ok(GlsResult {
        tree,
        schedule,
        latency: best_latency,
        generations: pop.generation,
        elapsed_ms: started.elapsed().as_millis() as u64,
        seed: params.seed,
        initial_population_size,
    })
}

/// Independent stream per offspring so parallel construction stays
/// deterministic.
fn offspring_rng(seed: u64, generation: u32, index: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&generation.to_le_bytes());
    key[12..20].copy_from_slice(&(index as u64).to_le_bytes());
    key[24..].copy_from_slice(b"offsprng");
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::graph::Graph;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn star(k: usize) -> Graph {
        let edges: Vec<_> = (1..=k).map(|v| (0, v)).collect();
        Graph::from_edges(k + 1, 0, &edges).unwrap()
    }

    fn path(n: usize) -> Graph {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        Graph::from_edges(n, 0, &edges).unwrap()
    }

    #[test]
    fn spt_tree_on_path_and_star() {
        let g = path(4);
        let t = spt_tree(&g);
        assert_eq!(t.parents(), &[None, Some(0), Some(1), Some(2)]);
        let g = star(4);
        let t = spt_tree(&g);
        assert!((1..=4).all(|v| t.parent(v) == Some(0)));
    }

    #[test]
    fn spt_tree_depth_equals_eccentricity() {
        for g in [
            generators::ccc(3).unwrap(),
            generators::shuffle_exchange(4).unwrap(),
            generators::pure_random(20, 0.3, 9).unwrap(),
        ] {
            let depth = *spt_tree(&g).depths().iter().max().unwrap();
            assert_eq!(depth, g.bfs_levels().eccentricity());
        }
    }

    #[test]
    fn random_spt_respects_levels_and_varies() {
        let g = generators::shuffle_exchange(4).unwrap();
        let levels = g.bfs_levels();
        let mut distinct = HashSet::new();
        for seed in 0..100 {
            let t = random_shortest_path_tree(&g, &mut rng(seed));
            for v in g.vertices() {
                if let Some(p) = t.parent(v) {
                    assert_eq!(levels.dist(p) + 1, levels.dist(v));
                }
            }
            assert_eq!(
                *t.depths().iter().max().unwrap(),
                levels.eccentricity(),
                "shortest-path trees reach exactly the eccentricity"
            );
            distinct.insert(t.parents().to_vec());
        }
        assert!(distinct.len() >= 2);
    }

    #[test]
    fn random_trees_on_a_tree_graph_are_the_tree() {
        let g = path(5);
        for seed in 0..10 {
            assert_eq!(
                random_shortest_path_tree(&g, &mut rng(seed)).parents(),
                spt_tree(&g).parents()
            );
            assert_eq!(
                random_min_degree_tree(&g, &mut rng(seed)).parents(),
                spt_tree(&g).parents()
            );
        }
    }

    #[test]
    fn min_degree_growth_spreads_load_off_the_sink() {
        // Sink 0 joined to five spokes which are also chained to each other,
        // so trees can route around the sink.
        let mut edges: Vec<_> = (1..=5).map(|v| (0, v)).collect();
        edges.extend((1..5).map(|v| (v, v + 1)));
        let g = Graph::from_edges(6, 0, &edges).unwrap();

        let uniform_grow = |rng: &mut ChaCha8Rng| grow_tree(&g, rng, |_, _| true, |_| 0);
        let trials = 300;
        let mut deg_uniform = 0usize;
        let mut deg_weighted = 0usize;
        for seed in 0..trials {
            let t = uniform_grow(&mut rng(seed));
            deg_uniform += t.children()[0].len();
            let t = random_min_degree_tree(&g, &mut rng(seed + 10_000));
            deg_weighted += t.children()[0].len();
        }
        assert!(
            deg_weighted < deg_uniform,
            "weighted {deg_weighted} vs uniform {deg_uniform}"
        );
    }

    #[test]
    fn init_population_respects_failure_budget() {
        let g = generators::ccc(3).unwrap();
        let params = GlsParams {
            fp_it_count: 0,
            ..GlsParams::default()
        };
        let pop = init_population(&g, &params, &mut rng(1));
        assert_eq!(pop.members.len(), 1);
        assert_eq!(pop.members[0].tree.parents(), spt_tree(&g).parents());

        // A tree graph has one spanning tree: every draw is a clone.
        let pop = init_population(&path(6), &GlsParams::default(), &mut rng(1));
        assert_eq!(pop.members.len(), 1);
    }

    #[test]
    fn init_population_usually_fills_up() {
        let g = generators::ccc(3).unwrap();
        let mut filled = 0;
        for seed in 0..100 {
            let pop = init_population(&g, &GlsParams::default(), &mut rng(seed));
            assert!(pop
                .members
                .iter()
                .map(|m| m.tree.parents().to_vec())
                .collect::<HashSet<_>>()
                .len()
                .eq(&pop.members.len()));
            if pop.members.len() == 50 {
                filled += 1;
            }
        }
        assert!(filled >= 95, "only {filled} of 100 seeds filled");
    }

    #[test]
    fn selection_is_uniform_on_equal_fitness_and_repeats_singletons() {
        let g = star(3);
        let pop = init_population(
            &g,
            &GlsParams {
                pop_size: 2,
                ..GlsParams::default()
            },
            &mut rng(2),
        );
        assert_eq!(pop.members.len(), 1);
        let picks = select_parents(&pop, 6, &mut rng(3));
        assert_eq!(picks, vec![0; 6]);
    }

    #[test]
    fn selection_matches_inverse_latency_weights() {
        // Two members with latencies 5 and 10 must be drawn 2:1.
        let g = generators::pure_random(12, 0.5, 4).unwrap();
        let t = spt_tree(&g);
        let make = |latency: u32| Member {
            tree: t.clone(),
            latency,
            fitness: Fitness::from_latency(latency),
            age: 0,
        };
        let pop = Population {
            members: vec![make(5), make(10)],
            generation: 0,
            history: vec![],
            next_age: 2,
        };
        let draws = 100_000;
        let picks = select_parents(&pop, draws, &mut rng(5));
        let first = picks.iter().filter(|&&i| i == 0).count() as f64;
        let ratio = first / draws as f64;
        assert!(
            (ratio - 2.0 / 3.0).abs() < 0.05 * (2.0 / 3.0),
            "ratio {ratio}"
        );
    }

    #[test]
    fn crossover_of_identical_parents_is_identity() {
        let g = generators::shuffle_exchange(3).unwrap();
        let levels = g.bfs_levels();
        let t = spt_tree(&g);
        for seed in 0..20 {
            let child = crossover(&g, &t, &t, &levels, &mut rng(seed));
            assert_eq!(child.parents(), t.parents());
        }
    }

    #[test]
    fn crossover_children_are_valid_trees() {
        for seed in 0..200u64 {
            let g = generators::pure_random(4 + (seed as usize * 7) % 37, 0.35, seed).unwrap();
            let levels = g.bfs_levels();
            let mut r = rng(seed ^ 0xc0ffee);
            let t1 = random_min_degree_tree(&g, &mut r);
            let t2 = random_shortest_path_tree(&g, &mut r);
            let child = crossover(&g, &t1, &t2, &levels, &mut r);
            assert!(AggregationTree::new(&g, child.parents().to_vec()).is_ok());
        }
    }

    #[test]
    fn crossover_weights_prefer_links_dropping_a_level() {
        // Diamond 0-1, 0-2, 1-3, 2-3 plus rung 1-2. The trees differ only at
        // vertex 2: parent 0 (one level down, gap 1) versus parent 1 (same
        // level, gap 2). Degrees are 2 on both sides, so the weights are
        // w1 = 1/2 + 1 and w2 = 1/2 + 1/2 and link (2, 0) should win with
        // probability 1.5 / 2.5.
        let g = Graph::from_edges(4, 0, &[(0, 1), (0, 2), (1, 3), (2, 3), (1, 2)]).unwrap();
        let levels = g.bfs_levels();
        let t1 = AggregationTree::new(&g, vec![None, Some(0), Some(0), Some(2)]).unwrap();
        let t2 = AggregationTree::new(&g, vec![None, Some(0), Some(1), Some(2)]).unwrap();
        let expect = 1.5 / 2.5;
        let trials = 20_000;
        let mut chose_down = 0;
        for seed in 0..trials {
            let child = crossover(&g, &t1, &t2, &levels, &mut rng(seed));
            assert_eq!(child.parent(3), Some(2));
            if child.parent(2) == Some(0) {
                chose_down += 1;
            }
        }
        let rate = chose_down as f64 / trials as f64;
        assert!((rate - expect).abs() < 0.02, "rate {rate}, expected {expect}");
    }

    #[test]
    fn crossover_weights_penalize_links_climbing_a_level() {
        // Vertex 1 chooses between the sink (gap 1) and vertex 3 one level
        // above it (gap 3). With both degrees 2: w_a = 1.5, w_b = 1/2 + 1/3.
        let g = Graph::from_edges(4, 0, &[(0, 1), (0, 2), (2, 3), (1, 3)]).unwrap();
        let levels = g.bfs_levels();
        assert_eq!((levels.dist(1), levels.dist(3)), (1, 2));
        let ta = AggregationTree::new(&g, vec![None, Some(0), Some(0), Some(2)]).unwrap();
        let tb = AggregationTree::new(&g, vec![None, Some(3), Some(0), Some(2)]).unwrap();
        let (wa, wb) = (1.5, 0.5 + 1.0 / 3.0);
        let expect = wa / (wa + wb);
        let trials = 20_000;
        let mut chose_sink = 0;
        for seed in 0..trials {
            let child = crossover(&g, &ta, &tb, &levels, &mut rng(seed));
            if child.parent(1) == Some(0) {
                chose_sink += 1;
            }
        }
        let rate = chose_sink as f64 / trials as f64;
        assert!((rate - expect).abs() < 0.02, "rate {rate}, expected {expect}");
    }

    #[test]
    fn mutation_with_zero_budget_is_identity() {
        let g = generators::shuffle_exchange(3).unwrap();
        let t = spt_tree(&g);
        let params = GlsParams {
            k_max: Some(0),
            ..GlsParams::default()
        };
        for seed in 0..10 {
            assert_eq!(mutate(&g, &t, &params, &mut rng(seed)).parents(), t.parents());
        }
    }

    #[test]
    fn mutation_on_tree_graph_is_identity() {
        let g = path(6);
        let t = spt_tree(&g);
        for seed in 0..10 {
            let m = mutate(&g, &t, &GlsParams::default(), &mut rng(seed));
            assert_eq!(m.parents(), t.parents());
        }
    }

    #[test]
    fn mutation_stays_within_distance_budget() {
        for seed in 0..300u64 {
            let n = 6 + (seed as usize % 25);
            let g = generators::pure_random(n, 0.4, seed).unwrap();
            let t = spt_tree(&g);
            let k_max = 4;
            let params = GlsParams {
                k_max: Some(k_max),
                ..GlsParams::default()
            };
            let m = mutate(&g, &t, &params, &mut rng(seed));
            assert!(AggregationTree::new(&g, m.parents().to_vec()).is_ok());
            let differing = (0..n).filter(|&v| m.parent(v) != t.parent(v)).count();
            assert!(differing <= k_max, "distance {differing} exceeds {k_max}");
        }
    }

    #[test]
    fn local_search_reaches_one_move_optimum() {
        let g = generators::pure_random(15, 0.35, 11).unwrap();
        let start = random_min_degree_tree(&g, &mut rng(0));
        let improved = local_search(&g, &start);
        assert!(latency(&improved) <= latency(&start));
        for v in g.vertices() {
            if v == g.sink() {
                continue;
            }
            for &u in g.neighbors(v) {
                if Some(u) == improved.parent(v) || improved.in_subtree(v, u) {
                    continue;
                }
                assert!(
                    crate::tree::reattach_effect(&g, &improved, v, u).unwrap() >= 0,
                    "move ({v}, {u}) still improves"
                );
            }
        }
    }

    #[test]
    fn local_search_on_path_with_sink_shortcuts() {
        // Path over 8 vertices plus every edge back to the sink. Starting
        // from the pure path (latency 7) the search must reach the true
        // optimum of this gadget, which balances chains hanging off the sink
        // rather than collapsing into the latency-7 star.
        let mut edges: Vec<_> = (0..7).map(|i| (i, i + 1)).collect();
        edges.extend((2..8).map(|v| (0, v)));
        let g = Graph::from_edges(8, 0, &edges).unwrap();
        let path_tree = {
            let mut parent = vec![None; 8];
            for v in 1..8 {
                parent[v] = Some(v - 1);
            }
            AggregationTree::new(&g, parent).unwrap()
        };
        assert_eq!(latency(&path_tree), 7);
        let improved = local_search(&g, &path_tree);
        let best = crate::oracle::best_tree_exhaustive(&g).unwrap().1;
        assert!(latency(&improved) < 7);
        assert_eq!(latency(&improved), best);
    }

    #[test]
    fn gls_on_star_terminates_quickly_at_the_forced_latency() {
        let g = star(6);
        let params = GlsParams {
            seed: 42,
            ..GlsParams::default()
        };
        let out = run_gls(&g, &params).unwrap();
        assert_eq!(out.latency, 6);
        assert!(out.generations <= 11, "took {} generations", out.generations);
    }

    #[test]
    fn gls_runs_are_deterministic_across_jobs() {
        let g = generators::shuffle_exchange(3).unwrap();
        let params = GlsParams {
            seed: 7,
            ..GlsParams::default()
        };
        let serial = run_gls(&g, &params).unwrap();
        let serial_again = run_gls(&g, &params).unwrap();
        let parallel = run_gls_with(
            &g,
            &params,
            &RunOptions {
                jobs: 4,
                time_limit: None,
            },
        )
        .unwrap();
        assert_eq!(serial.tree, serial_again.tree);
        assert_eq!(serial.schedule, serial_again.schedule);
        assert_eq!(serial.tree, parallel.tree);
        assert_eq!(serial.schedule, parallel.schedule);
        assert_eq!(serial.generations, parallel.generations);
    }

    #[test]
    fn gls_best_latency_never_increases() {
        let g = generators::pure_random(16, 0.3, 3).unwrap();
        let params = GlsParams {
            seed: 5,
            max_generations: 30,
            ..GlsParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut pop = init_population(&g, &params, &mut rng);
        let levels = g.bfs_levels();
        let mut best = pop.best().latency;
        for generation in 1..=10 {
            let mut chosen = select_parents(&pop, 2 * params.offsp_size, &mut rng);
            chosen.shuffle(&mut rng);
            let offspring: Vec<AggregationTree> = chosen
                .chunks_exact(2)
                .enumerate()
                .map(|(index, pair)| {
                    let mut orng = offspring_rng(params.seed, generation, index);
                    let mut child = crossover(
                        &g,
                        &pop.members[pair[0]].tree,
                        &pop.members[pair[1]].tree,
                        &levels,
                        &mut orng,
                    );
                    if orng.random::<f64>() < params.p_m {
                        child = mutate(&g, &child, &params, &mut orng);
                    }
                    if orng.random::<f64>() < params.p_ls {
                        child = local_search(&g, &child);
                    }
                    child
                })
                .collect();
            pop.join(offspring, params.pop_size);
            assert!(pop.best().latency <= best);
            best = pop.best().latency;
            for m in &pop.members {
                assert!(AggregationTree::new(&g, m.tree.parents().to_vec()).is_ok());
                assert_eq!(m.fitness, Fitness::from_latency(m.latency));
            }
        }
    }

    #[test]
    fn fitness_orders_as_exact_rationals() {
        let a = Fitness::from_latency(3);
        let b = Fitness::from_latency(4);
        assert!(a > b);
        assert_eq!(a, Fitness::from_latency(3));
        assert!(a.value() > b.value());
    }
}
