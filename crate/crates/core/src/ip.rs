//! Integer-programming views of the scheduling problem: two formulations,
//! LP-format emission, and exact evaluation of variable assignments.
//!
//! Formulation 1 schedules arc transmissions over discrete slots: binaries
//! `x_u_v_t` say arc `(u, v)` fires in slot `t`. A fictive collector hangs
//! off the sink and the objective is the slot of that final transmission, so
//! its optimum sits one above the schedule latency.
//!
//! Formulation 2 is vertex-centric: integer send slots `t_i`, tree depths
//! `u_i`, binaries `x_i_j` for the parent choice and `y_i_j` for the slot
//! order, big-M coupling with `M = n + 1`, and latency `L` as objective.
//! All coefficients are integers and evaluation is exact.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::graph::{Graph, Vertex};
use crate::tree::{check_tree_schedule, AggregationTree, Schedule};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IpError {
    #[error("assignment is missing variable {0}")]
    MissingVariable(String),
    #[error("schedule is infeasible: {0}")]
    InfeasibleSchedule(String),
    #[error("slot {slot} of vertex {vertex} exceeds the model horizon {horizon}")]
    SlotBeyondHorizon {
        vertex: Vertex,
        slot: u32,
        horizon: u32,
    },
    #[error("line {line}: malformed assignment entry: {msg}")]
    MalformedAssignment { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Integer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn token(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }

    fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            Sense::Le => lhs <= rhs,
            Sense::Eq => lhs == rhs,
            Sense::Ge => lhs >= rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: i64,
    pub upper: i64,
}

/// `terms` hold `(coefficient, variable index)` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearConstraint {
    pub name: String,
    pub terms: Vec<(i64, usize)>,
    pub sense: Sense,
    pub rhs: i64,
}

/// Solver-agnostic model; the objective is always minimized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IpModel {
    pub name: String,
    pub variables: Vec<Variable>,
    pub constraints: Vec<LinearConstraint>,
    pub objective: Vec<(i64, usize)>,
}

impl IpModel {
    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }
}

struct ModelBuilder {
    model: IpModel,
    index: HashMap<String, usize>,
}

impl ModelBuilder {
    fn new(name: &str) -> Self {
        ModelBuilder {
            model: IpModel {
                name: name.to_string(),
                variables: Vec::new(),
                constraints: Vec::new(),
                objective: Vec::new(),
            },
            index: HashMap::new(),
        }
    }

    fn variable(&mut self, name: String, kind: VarKind, lower: i64, upper: i64) -> usize {
        let id = self.model.variables.len();
        let previous = self.index.insert(name.clone(), id);
        assert!(previous.is_none(), "duplicate variable {name}");
        self.model.variables.push(Variable {
            name,
            kind,
            lower,
            upper,
        });
        id
    }

    fn constraint(&mut self, name: String, terms: Vec<(i64, usize)>, sense: Sense, rhs: i64) {
        debug_assert!(terms.iter().all(|&(_, v)| v < self.model.variables.len()));
        self.model.constraints.push(LinearConstraint {
            name,
            terms,
            sense,
            rhs,
        });
    }
}

/// Arcs of the transmission digraph: both directions of every edge except
/// those leaving the sink, sorted lexicographically.
fn transmission_arcs(g: &Graph) -> Vec<(Vertex, Vertex)> {
    let mut arcs = Vec::with_capacity(2 * g.edge_count());
    for v in g.vertices() {
        if v == g.sink() {
            continue;
        }
        for &w in g.neighbors(v) {
            arcs.push((v, w));
        }
    }
    arcs
}

/// Slot-indexed arc formulation. `(2m - deg(sink) + 1) * n` binaries; the
/// fictive collector is rendered as vertex id `n`.
pub fn build_ip1(g: &Graph) -> IpModel {
    let n = g.vertex_count();
    let sink = g.sink();
    let fictive = n;
    let mut arcs = transmission_arcs(g);
    arcs.push((sink, fictive));
    let arc_count = arcs.len();

    let mut b = ModelBuilder::new("ip1");
    // x[a][t - 1] for t in 1..=n
    let x: Vec<Vec<usize>> = arcs
        .iter()
        .map(|&(u, v)| {
            (1..=n)
                .map(|t| b.variable(format!("x_{u}_{v}_{t}"), VarKind::Binary, 0, 1))
                .collect()
        })
        .collect();

    let mut out_arcs = vec![Vec::new(); n + 1];
    let mut in_arcs = vec![Vec::new(); n + 1];
    for (a, &(u, v)) in arcs.iter().enumerate() {
        out_arcs[u].push(a);
        in_arcs[v].push(a);
    }

    b.model.objective = (1..=n)
        .map(|t| (t as i64, x[arc_count - 1][t - 1]))
        .collect();

    // Each vertex, the sink included, transmits exactly once.
    for v in 0..n {
        let terms = out_arcs[v]
            .iter()
            .flat_map(|&a| (1..=n).map(move |t| (1, a, t)))
            .map(|(c, a, t)| (c, x[a][t - 1]))
            .collect();
        b.constraint(format!("send_once_{v}"), terms, Sense::Eq, 1);
    }
    // No reception after the receiver has transmitted.
    for v in 0..=n {
        for &a_in in &in_arcs[v] {
            let (u, w) = arcs[a_in];
            for t in 1..=n {
                let mut terms: Vec<(i64, usize)> =
                    (t + 1..=n).map(|t2| (1, x[a_in][t2 - 1])).collect();
                terms.extend(out_arcs[v].iter().map(|&a| (1, x[a][t - 1])));
                b.constraint(format!("norecv_{u}_{w}_{t}"), terms, Sense::Le, 1);
            }
        }
    }
    // Per slot, a vertex either sends or receives one message, not both.
    for v in 0..=n {
        for t in 1..=n {
            let terms = out_arcs[v]
                .iter()
                .chain(in_arcs[v].iter())
                .map(|&a| (1, x[a][t - 1]))
                .collect();
            b.constraint(format!("halfduplex_{v}_{t}"), terms, Sense::Le, 1);
        }
    }
    b.model
}

/// Vertex-centric formulation with big-M `n + 1`.
pub fn build_ip2(g: &Graph) -> IpModel {
    let n = g.vertex_count();
    let sink = g.sink();
    let big_m = (n + 1) as i64;
    let horizon = (n - 1) as i64;
    let senders: Vec<Vertex> = g.vertices().filter(|&v| v != sink).collect();

    let mut b = ModelBuilder::new("ip2");
    let mut t_var = vec![usize::MAX; n];
    let mut u_var = vec![usize::MAX; n];
    for &i in &senders {
        t_var[i] = b.variable(format!("t_{i}"), VarKind::Integer, 1, horizon);
    }
    for &i in &senders {
        u_var[i] = b.variable(format!("u_{i}"), VarKind::Integer, 0, horizon);
    }
    let l_var = b.variable("L".to_string(), VarKind::Integer, 1, horizon);
    let arcs = transmission_arcs(g);
    let mut x_var = HashMap::new();
    for &(i, j) in &arcs {
        x_var.insert((i, j), b.variable(format!("x_{i}_{j}"), VarKind::Binary, 0, 1));
    }
    let mut y_var = HashMap::new();
    for &i in &senders {
        for &j in &senders {
            if i < j {
                y_var.insert((i, j), b.variable(format!("y_{i}_{j}"), VarKind::Binary, 0, 1));
            }
        }
    }

    b.model.objective = vec![(1, l_var)];

    // The schedule length covers every send slot.
    for &i in &senders {
        b.constraint(
            format!("len_{i}"),
            vec![(1, l_var), (-1, t_var[i])],
            Sense::Ge,
            0,
        );
    }
    // Exactly one parent per sender.
    for &i in &senders {
        let terms = g
            .neighbors(i)
            .iter()
            .map(|&j| (1, x_var[&(i, j)]))
            .collect();
        b.constraint(format!("parent_{i}"), terms, Sense::Eq, 1);
    }
    // Chosen arcs step the depth by exactly one (u of the sink is the
    // constant 0 and drops out).
    for &(i, j) in &arcs {
        let x = x_var[&(i, j)];
        let mut lo = vec![(1, u_var[i]), (-big_m, x)];
        let mut hi = vec![(1, u_var[i]), (big_m, x)];
        if j != sink {
            lo.push((-1, u_var[j]));
            hi.push((-1, u_var[j]));
        }
        b.constraint(format!("depth_lo_{i}_{j}"), lo, Sense::Ge, 1 - big_m);
        b.constraint(format!("depth_hi_{i}_{j}"), hi, Sense::Le, 1 + big_m);
    }
    // Children of a common parent use distinct slots. Generated only for
    // triples whose two arcs exist; the parent k may be the sink.
    for k in g.vertices() {
        let kids: Vec<Vertex> = g
            .neighbors(k)
            .iter()
            .copied()
            .filter(|&v| v != sink)
            .collect();
        for (a, &i) in kids.iter().enumerate() {
            for &j in &kids[a + 1..] {
                let terms = vec![
                    (1, t_var[j]),
                    (-1, t_var[i]),
                    (big_m, x_var[&(i, k)]),
                    (big_m, x_var[&(j, k)]),
                    (big_m, y_var[&(i.min(j), i.max(j))]),
                ];
                b.constraint(format!("sib_{i}_{j}_{k}"), terms, Sense::Le, 3 * big_m - 1);
            }
        }
    }
    // y_i_j = 1 exactly when t_i >= t_j.
    for &i in &senders {
        for &j in &senders {
            if i >= j {
                continue;
            }
            let y = y_var[&(i, j)];
            b.constraint(
                format!("order_lo_{i}_{j}"),
                vec![(1, t_var[j]), (-1, t_var[i]), (big_m, y)],
                Sense::Ge,
                1,
            );
            b.constraint(
                format!("order_hi_{i}_{j}"),
                vec![(1, t_var[j]), (-1, t_var[i]), (big_m, y)],
                Sense::Le,
                big_m,
            );
        }
    }
    // A parent transmits strictly after each of its children.
    for &(i, j) in &arcs {
        if j == sink {
            continue;
        }
        b.constraint(
            format!("relay_{i}_{j}"),
            vec![(1, t_var[i]), (-1, t_var[j]), (big_m, x_var[&(i, j)])],
            Sense::Le,
            big_m - 1,
        );
    }
    b.model
}

/// Variable values keyed by name. `BTreeMap` keeps serialization sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment(pub BTreeMap<String, i64>);

impl Assignment {
    pub fn set(&mut self, name: String, value: i64) {
        self.0.insert(name, value);
    }

    pub fn get(&self, name: &str) -> Option<i64> {
        self.0.get(name).copied()
    }
}

/// A constraint or variable bound the assignment breaks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViolatedConstraint {
    pub name: String,
    pub lhs: i64,
    pub sense: Sense,
    pub rhs: i64,
}

impl std::fmt::Display for ViolatedConstraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: {} {} {} fails",
            self.name,
            self.lhs,
            self.sense.token(),
            self.rhs
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalReport {
    pub feasible: bool,
    pub violations: Vec<ViolatedConstraint>,
    pub objective: i64,
}

/// Exact integer evaluation of an assignment against a model: checks every
/// bound and constraint and totals the objective.
pub fn evaluate(model: &IpModel, assignment: &Assignment) -> Result<EvalReport, IpError> {
    let values: Vec<i64> = model
        .variables
        .iter()
        .map(|v| {
            assignment
                .get(&v.name)
                .ok_or_else(|| IpError::MissingVariable(v.name.clone()))
        })
        .collect::<Result<_, _>>()?;
    let mut violations = Vec::new();
    for (v, &value) in model.variables.iter().zip(&values) {
        if value < v.lower {
            violations.push(ViolatedConstraint {
                name: format!("bound_{}", v.name),
                lhs: value,
                sense: Sense::Ge,
                rhs: v.lower,
            });
        }
        if value > v.upper {
            violations.push(ViolatedConstraint {
                name: format!("bound_{}", v.name),
                lhs: value,
                sense: Sense::Le,
                rhs: v.upper,
            });
        }
    }
    for c in &model.constraints {
        let lhs: i64 = c.terms.iter().map(|&(coef, var)| coef * values[var]).sum();
        if !c.sense.holds(lhs, c.rhs) {
            violations.push(ViolatedConstraint {
                name: c.name.clone(),
                lhs,
                sense: c.sense,
                rhs: c.rhs,
            });
        }
    }
    let objective = model
        .objective
        .iter()
        .map(|&(coef, var)| coef * values[var])
        .sum();
    Ok(EvalReport {
        feasible: violations.is_empty(),
        violations,
        objective,
    })
}

/// Encodes a feasible tree schedule into the second formulation's variables.
pub fn encode_ip2_solution(
    g: &Graph,
    tree: &AggregationTree,
    schedule: &Schedule,
) -> Result<Assignment, IpError> {
    reject_infeasible(g, tree, schedule)?;
    let sink = g.sink();
    let depth = tree.depths();
    let mut a = Assignment::default();
    for v in g.vertices() {
        if v == sink {
            continue;
        }
        a.set(format!("t_{v}"), schedule.slot[v] as i64);
        a.set(format!("u_{v}"), depth[v] as i64);
    }
    a.set("L".to_string(), schedule.latency as i64);
    for (i, j) in transmission_arcs(g) {
        a.set(
            format!("x_{i}_{j}"),
            (tree.parent(i) == Some(j)) as i64,
        );
    }
    for i in g.vertices() {
        for j in g.vertices() {
            if i < j && i != sink && j != sink {
                a.set(
                    format!("y_{i}_{j}"),
                    (schedule.slot[i] >= schedule.slot[j]) as i64,
                );
            }
        }
    }
    Ok(a)
}

/// Encodes a feasible tree schedule into the first formulation's variables.
/// The fictive collector transmission lands in slot `latency + 1`.
pub fn encode_ip1_solution(
    g: &Graph,
    tree: &AggregationTree,
    schedule: &Schedule,
) -> Result<Assignment, IpError> {
    reject_infeasible(g, tree, schedule)?;
    let n = g.vertex_count() as u32;
    let sink = g.sink();
    for v in g.vertices() {
        if v != sink && schedule.slot[v] >= n {
            return Err(IpError::SlotBeyondHorizon {
                vertex: v,
                slot: schedule.slot[v],
                horizon: n,
            });
        }
    }
    let mut a = Assignment::default();
    let fictive = g.vertex_count();
    let mut arcs = transmission_arcs(g);
    arcs.push((sink, fictive));
    for &(u, v) in &arcs {
        for t in 1..=g.vertex_count() {
            a.set(format!("x_{u}_{v}_{t}"), 0);
        }
    }
    for v in g.vertices() {
        if v == sink {
            continue;
        }
        let p = tree.parent(v).expect("feasible schedule");
        a.set(format!("x_{}_{}_{}", v, p, schedule.slot[v]), 1);
    }
    a.set(
        format!("x_{}_{}_{}", sink, fictive, schedule.latency + 1),
        1,
    );
    Ok(a)
}

fn reject_infeasible(
    g: &Graph,
    tree: &AggregationTree,
    schedule: &Schedule,
) -> Result<(), IpError> {
    let violations = check_tree_schedule(g, tree, schedule);
    match violations.first() {
        None => Ok(()),
        Some(first) => Err(IpError::InfeasibleSchedule(format!(
            "{first} ({} violations)",
            violations.len()
        ))),
    }
}

const TERMS_PER_LINE: usize = 8;
const NAMES_PER_LINE: usize = 10;

/// Emits the model as LP-format text with a fixed section order
/// (`Minimize`, `Subject To`, `Bounds`, `Generals`, `Binaries`, `End`).
/// Output is byte-identical for equal models.
pub fn write_lp(model: &IpModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ {}", model.name);
    out.push_str("Minimize\n");
    out.push_str(" obj:");
    append_terms(&mut out, &model.objective, &model.variables);
    out.push('\n');
    out.push_str("Subject To\n");
    for c in &model.constraints {
        let _ = write!(out, " {}:", c.name);
        append_terms(&mut out, &c.terms, &model.variables);
        let _ = writeln!(out, " {} {}", c.sense.token(), c.rhs);
    }
    out.push_str("Bounds\n");
    for v in &model.variables {
        if v.kind == VarKind::Integer {
            let _ = writeln!(out, " {} <= {} <= {}", v.lower, v.name, v.upper);
        }
    }
    for (title, kind) in [("Generals", VarKind::Integer), ("Binaries", VarKind::Binary)] {
        let names: Vec<&str> = model
            .variables
            .iter()
            .filter(|v| v.kind == kind)
            .map(|v| v.name.as_str())
            .collect();
        if names.is_empty() {
            continue;
        }
        out.push_str(title);
        out.push('\n');
        for chunk in names.chunks(NAMES_PER_LINE) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

fn append_terms(out: &mut String, terms: &[(i64, usize)], variables: &[Variable]) {
    for (i, &(coef, var)) in terms.iter().enumerate() {
        if i > 0 && i % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let name = &variables[var].name;
        let sign = if coef < 0 {
            " -"
        } else if i == 0 {
            ""
        } else {
            " +"
        };
        let magnitude = coef.abs();
        if magnitude == 1 {
            let _ = write!(out, "{sign} {name}");
        } else {
            let _ = write!(out, "{sign} {magnitude} {name}");
        }
    }
}

/// Parses `name value` lines; `#` comments and blanks are skipped.
pub fn read_assignment(text: &str) -> Result<Assignment, IpError> {
    let mut a = Assignment::default();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (name, value) = match (parts.next(), parts.next(), parts.next()) {
            (Some(name), Some(value), None) => (name, value),
            _ => {
                return Err(IpError::MalformedAssignment {
                    line: i + 1,
                    msg: "expected `name value`".into(),
                })
            }
        };
        let value: i64 = value.parse().map_err(|_| IpError::MalformedAssignment {
            line: i + 1,
            msg: format!("`{value}` is not an integer"),
        })?;
        a.set(name.to_string(), value);
    }
    Ok(a)
}

/// Serializes an assignment as sorted `name value` lines.
pub fn write_assignment(a: &Assignment) -> String {
    let mut out = String::new();
    for (name, value) in &a.0 {
        let _ = writeln!(out, "{name} {value}");
    }
    out
}
