//! Generic problem instance: topology, per-pair processes, assignments and
//! feasibility checking of the coupling constraints.
//!
//! An instance consists of I*J independent finite-horizon MDPs ("pairs",
//! one per area and agent type) whose action variables are tied together by
//! linear constraints: each destination sub-area admits at most one incoming
//! agent per type, and every area's outgoing movements must match its supply
//! of present agents.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Row-sum / distribution tolerance used by validation and feasibility.
pub const PROB_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// One per-pair state: an opaque knowledge id plus the presence indicator.
/// The indicator records whether the sub-area was patrolled in the previous
/// slot, i.e. whether it currently hosts an agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubState {
    pub knowledge: u16,
    pub indicator: u8,
}

/// Sparse kernel row: list of (successor state index, probability).
pub type KernelRow = Vec<(usize, f64)>;

/// Per-state costs indexed by activation e in {0,1}; optionally per slot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum CostTable {
    Static(Vec<[f64; 2]>),
    PerSlot(Vec<Vec<[f64; 2]>>),
}

/// Transition kernel rows indexed by activation; optionally per slot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum KernelTable {
    Static(Vec<[KernelRow; 2]>),
    PerSlot(Vec<Vec<[KernelRow; 2]>>),
}

/// Everything describing a single (area, agent type) process: enumerated
/// state space, costs, kernel, coupling values g(s) and initial distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairProcessSpec {
    pub states: Vec<SubState>,
    pub costs: CostTable,
    pub kernel: KernelTable,
    pub coupling: Vec<f64>,
    pub initial: Vec<f64>,
}

impl PairProcessSpec {
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn cost(&self, s: usize, e: usize, t: usize) -> f64 {
        match &self.costs {
            CostTable::Static(c) => c[s][e],
            CostTable::PerSlot(c) => c[t][s][e],
        }
    }

    /// Cost at fractional activation, defined as the linear mix.
    pub fn cost_mixed(&self, s: usize, e: f64, t: usize) -> f64 {
        e * self.cost(s, 1, t) + (1.0 - e) * self.cost(s, 0, t)
    }

    pub fn row(&self, s: usize, e: usize, t: usize) -> &[(usize, f64)] {
        match &self.kernel {
            KernelTable::Static(k) => &k[s][e],
            KernelTable::PerSlot(k) => &k[t][s][e],
        }
    }

    /// Kernel row at fractional activation (convex combination of the two
    /// pure rows), returned dense over state indices.
    pub fn row_mixed(&self, s: usize, e: f64, t: usize) -> Vec<f64> {
        let mut dense = vec![0.0; self.state_count()];
        for &(sp, p) in self.row(s, 0, t) {
            dense[sp] += (1.0 - e) * p;
        }
        for &(sp, p) in self.row(s, 1, t) {
            dense[sp] += e * p;
        }
        dense
    }
}

/// Area adjacency per agent type, plus the coupling maps: `bbar(i, j)` lists
/// the destination areas whose incoming movements consume supply of area i,
/// and `weights` holds the per-movement coupling weight w(dest, origin, type).
/// In the patrol specialization bbar equals the neighborhood and all w = 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Topology {
    pub area_count: usize,
    pub type_count: usize,
    neighbors: Vec<Vec<usize>>,
    bbar: Vec<Vec<usize>>,
    bbar_inv: Vec<Vec<usize>>,
    weights: Vec<f64>,
}

impl Topology {
    /// Patrol topology from an undirected edge list; self-loops are implied,
    /// the coupling map equals the neighborhood and all weights are 1.
    pub fn patrol(area_count: usize, type_count: usize, edges: &[(usize, usize)]) -> Topology {
        let mut adj = vec![Vec::new(); area_count];
        for i in 0..area_count {
            adj[i].push(i);
        }
        for &(a, b) in edges {
            assert!(a < area_count && b < area_count, "edge endpoint out of range");
            if a != b {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
        }
        let neighbors: Vec<Vec<usize>> = (0..area_count * type_count)
            .map(|p| adj[p / type_count].clone())
            .collect();
        let bbar = neighbors.clone();
        let weights = vec![1.0; area_count * area_count * type_count];
        Topology::assemble(area_count, type_count, neighbors, bbar, weights)
    }

    /// Fully general constructor; `neighbors` and `bbar` are indexed by
    /// i * type_count + j, `weights` by (dest * I + origin) * J + j.
    pub fn custom(
        area_count: usize,
        type_count: usize,
        neighbors: Vec<Vec<usize>>,
        bbar: Vec<Vec<usize>>,
        weights: Vec<f64>,
    ) -> Topology {
        Topology::assemble(area_count, type_count, neighbors, bbar, weights)
    }

    fn assemble(
        area_count: usize,
        type_count: usize,
        mut neighbors: Vec<Vec<usize>>,
        mut bbar: Vec<Vec<usize>>,
        weights: Vec<f64>,
    ) -> Topology {
        assert_eq!(neighbors.len(), area_count * type_count);
        assert_eq!(bbar.len(), area_count * type_count);
        assert_eq!(weights.len(), area_count * area_count * type_count);
        for row in neighbors.iter_mut().chain(bbar.iter_mut()) {
            row.sort_unstable();
            row.dedup();
        }
        let mut bbar_inv = vec![Vec::new(); area_count * type_count];
        for origin in 0..area_count {
            for j in 0..type_count {
                for &dest in &bbar[origin * type_count + j] {
                    bbar_inv[dest * type_count + j].push(origin);
                }
            }
        }
        for row in &mut bbar_inv {
            row.sort_unstable();
        }
        Topology {
            area_count,
            type_count,
            neighbors,
            bbar,
            bbar_inv,
            weights,
        }
    }

    pub fn neighbors(&self, i: usize, j: usize) -> &[usize] {
        &self.neighbors[i * self.type_count + j]
    }

    /// Destination areas whose incoming movements draw on area i's supply.
    pub fn bbar(&self, i: usize, j: usize) -> &[usize] {
        &self.bbar[i * self.type_count + j]
    }

    /// Origin areas whose supply constraint mentions destination i.
    pub fn bbar_inv(&self, i: usize, j: usize) -> &[usize] {
        &self.bbar_inv[i * self.type_count + j]
    }

    pub fn in_bbar(&self, dest: usize, origin: usize, j: usize) -> bool {
        self.bbar(origin, j).binary_search(&dest).is_ok()
    }

    pub fn weight(&self, dest: usize, origin: usize, j: usize) -> f64 {
        self.weights[(dest * self.area_count + origin) * self.type_count + j]
    }
}

/// The full problem description. `specs` is indexed by i * J + j.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MabMlInstance {
    pub topology: Topology,
    pub horizon: usize,
    pub specs: Vec<PairProcessSpec>,
    pub agent_base_counts: Vec<usize>,
}

impl MabMlInstance {
    pub fn area_count(&self) -> usize {
        self.topology.area_count
    }

    pub fn type_count(&self) -> usize {
        self.topology.type_count
    }

    pub fn pair(&self, i: usize, j: usize) -> &PairProcessSpec {
        &self.specs[i * self.type_count() + j]
    }

    pub fn max_cost(&self) -> f64 {
        let mut m: f64 = 0.0;
        for spec in &self.specs {
            for t in 0..self.horizon {
                for s in 0..spec.state_count() {
                    m = m.max(spec.cost(s, 0, t)).max(spec.cost(s, 1, t));
                }
            }
        }
        m
    }

    pub fn mean_abs_cost(&self) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for spec in &self.specs {
            for s in 0..spec.state_count() {
                sum += spec.cost(s, 0, 0).abs() + spec.cost(s, 1, 0).abs();
                n += 2;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// Structural hash tying solve artifacts to the instance they came from.
    pub fn fingerprint(&self) -> u64 {
        let mut acc = crate::rng::mix64(0x6d61626d_6c5f6669, self.horizon as u64);
        acc = crate::rng::mix64(acc, self.area_count() as u64);
        acc = crate::rng::mix64(acc, self.type_count() as u64);
        for &m in &self.agent_base_counts {
            acc = crate::rng::mix64(acc, m as u64);
        }
        for (p, spec) in self.specs.iter().enumerate() {
            acc = crate::rng::mix64(acc, p as u64);
            for (s, st) in spec.states.iter().enumerate() {
                acc = crate::rng::mix64(acc, (st.knowledge as u64) << 8 | st.indicator as u64);
                acc = crate::rng::mix64(acc, spec.initial[s].to_bits());
                acc = crate::rng::mix64(acc, spec.coupling[s].to_bits());
                for e in 0..2 {
                    acc = crate::rng::mix64(acc, spec.cost(s, e, 0).to_bits());
                    for &(sp, pr) in spec.row(s, e, 0) {
                        acc = crate::rng::mix64(acc, sp as u64 ^ pr.to_bits());
                    }
                }
            }
        }
        for i in 0..self.area_count() {
            for j in 0..self.type_count() {
                for &n in self.topology.neighbors(i, j) {
                    acc = crate::rng::mix64(acc, (i * 131 + j * 7 + n) as u64);
                }
            }
        }
        acc
    }
}

/// Joint state of all I*J*h sub-processes at one time slot. States are
/// stored as dense indices into each pair's state space, laid out
/// [(i * J + j) * h + k].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaledWorldState {
    pub area_count: usize,
    pub type_count: usize,
    pub h: usize,
    pub slot: usize,
    pub states: Vec<usize>,
}

impl ScaledWorldState {
    pub fn new(area_count: usize, type_count: usize, h: usize) -> ScaledWorldState {
        ScaledWorldState {
            area_count,
            type_count,
            h,
            slot: 0,
            states: vec![0; area_count * type_count * h],
        }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.type_count + j) * self.h + k
    }

    #[inline]
    pub fn state(&self, i: usize, j: usize, k: usize) -> usize {
        self.states[self.idx(i, j, k)]
    }

    pub fn set_state(&mut self, i: usize, j: usize, k: usize, s: usize) {
        let idx = self.idx(i, j, k);
        self.states[idx] = s;
    }
}

/// Per-slot movement assignment: for every destination sub-area (i, k) and
/// type j, either the origin area of the incoming agent or None (free).
/// The map representation makes the at-most-one-incoming constraint
/// structural.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentVector {
    pub area_count: usize,
    pub type_count: usize,
    pub h: usize,
    slots: Vec<Option<usize>>,
}

impl AssignmentVector {
    pub fn new_free(area_count: usize, type_count: usize, h: usize) -> AssignmentVector {
        AssignmentVector {
            area_count,
            type_count,
            h,
            slots: vec![None; area_count * type_count * h],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.type_count + j) * self.h + k
    }

    /// Origin area assigned into destination sub-area (i, k) for type j.
    #[inline]
    pub fn origin(&self, i: usize, j: usize, k: usize) -> Option<usize> {
        self.slots[self.idx(i, j, k)]
    }

    pub fn assign(&mut self, i: usize, j: usize, k: usize, origin: usize) {
        let idx = self.idx(i, j, k);
        self.slots[idx] = Some(origin);
    }

    pub fn clear(&mut self, i: usize, j: usize, k: usize) {
        let idx = self.idx(i, j, k);
        self.slots[idx] = None;
    }

    /// Number of assignments with the given origin area, over all
    /// destination sub-areas of type j.
    pub fn outgoing_count(&self, origin: usize, j: usize) -> usize {
        let mut n = 0;
        for i in 0..self.area_count {
            for k in 0..self.h {
                if self.origin(i, j, k) == Some(origin) {
                    n += 1;
                }
            }
        }
        n
    }

    /// Count of sub-areas of (i, j) receiving an incoming agent.
    pub fn incoming_count(&self, i: usize, j: usize) -> usize {
        (0..self.h).filter(|&k| self.origin(i, j, k).is_some()).count()
    }

    /// Number of differing destination slots between two assignments.
    pub fn diff_count(&self, other: &AssignmentVector) -> usize {
        self.slots
            .iter()
            .zip(&other.slots)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// One failed instance invariant; which rule broke and where.
#[derive(Debug, Clone)]
pub struct Violation {
    pub rule: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule, self.detail)
    }
}

/// Checks every structural invariant of the instance; returns one entry per
/// broken rule (empty means valid).
pub fn validate_instance(inst: &MabMlInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    let ii = inst.area_count();
    let jj = inst.type_count();
    let tt = inst.horizon;

    if inst.specs.len() != ii * jj {
        out.push(Violation {
            rule: "spec-count",
            detail: format!("expected {} pair specs, found {}", ii * jj, inst.specs.len()),
        });
        return out;
    }
    if inst.agent_base_counts.len() != jj {
        out.push(Violation {
            rule: "agent-count-dim",
            detail: format!("expected {} base counts, found {}", jj, inst.agent_base_counts.len()),
        });
    }
    for (j, &m) in inst.agent_base_counts.iter().enumerate() {
        if m < 1 || m > ii {
            out.push(Violation {
                rule: "agent-count-range",
                detail: format!("type {}: base count {} outside 1..={}", j, m, ii),
            });
        }
    }

    for i in 0..ii {
        for j in 0..jj {
            if !inst.topology.neighbors(i, j).contains(&i) {
                out.push(Violation {
                    rule: "self-loop",
                    detail: format!("area {} type {}: i not in its own neighborhood", i, j),
                });
            }
            for &n in inst.topology.neighbors(i, j) {
                if n >= ii {
                    out.push(Violation {
                        rule: "neighbor-range",
                        detail: format!("area {} type {}: neighbor {} out of range", i, j, n),
                    });
                } else if !inst.topology.neighbors(n, j).contains(&i) {
                    out.push(Violation {
                        rule: "symmetry",
                        detail: format!("type {}: {} in B({}) but {} not in B({})", j, n, i, i, n),
                    });
                }
            }
        }
    }

    // connectivity per type (movement adaption needs a reachable vacancy)
    for j in 0..jj {
        let mut seen = vec![false; ii];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &n in inst.topology.neighbors(i, j) {
                if n < ii && !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }
        if !seen.iter().all(|&s| s) {
            out.push(Violation {
                rule: "connectivity",
                detail: format!("type {}: area graph is not connected", j),
            });
        }
    }

    for i in 0..ii {
        for j in 0..jj {
            let spec = inst.pair(i, j);
            let sc = spec.state_count();
            if sc == 0 {
                out.push(Violation {
                    rule: "empty-state-space",
                    detail: format!("pair ({}, {})", i, j),
                });
                continue;
            }
            let pi_sum: f64 = spec.initial.iter().sum();
            if (pi_sum - 1.0).abs() > PROB_TOL || spec.initial.iter().any(|&p| p < 0.0) {
                out.push(Violation {
                    rule: "initial-distribution",
                    detail: format!("pair ({}, {}): sums to {}", i, j, pi_sum),
                });
            }
            if spec.coupling.iter().any(|&g| g < 0.0) {
                out.push(Violation {
                    rule: "coupling-sign",
                    detail: format!("pair ({}, {}): negative g(s)", i, j),
                });
            }
            for t in 0..tt {
                for s in 0..sc {
                    for e in 0..2 {
                        if spec.cost(s, e, t) < 0.0 {
                            out.push(Violation {
                                rule: "cost-sign",
                                detail: format!("pair ({}, {}), s={}, e={}, t={}", i, j, s, e, t),
                            });
                        }
                        let row = spec.row(s, e, t);
                        let sum: f64 = row.iter().map(|&(_, p)| p).sum();
                        if (sum - 1.0).abs() > PROB_TOL {
                            out.push(Violation {
                                rule: "row-stochasticity",
                                detail: format!(
                                    "pair ({}, {}), s={}, e={}, t={}: row sums to {}",
                                    i, j, s, e, t, sum
                                ),
                            });
                        }
                        for &(sp, p) in row {
                            if sp >= sc {
                                out.push(Violation {
                                    rule: "successor-range",
                                    detail: format!("pair ({}, {}), s={}, e={}: successor {}", i, j, s, e, sp),
                                });
                            } else if p > 0.0 && spec.states[sp].indicator as usize != e {
                                out.push(Violation {
                                    rule: "indicator-consistency",
                                    detail: format!(
                                        "pair ({}, {}), s={}, e={}, t={}: successor {} has indicator {}",
                                        i, j, s, e, t, sp, spec.states[sp].indicator
                                    ),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// True iff the assignment is feasible against the coupling constraints:
/// (a) at most one incoming agent per destination sub-area and type (held
/// structurally by the map representation, plus origins must be neighbors),
/// and (b) for every (area, type), the weighted outgoing movements equal the
/// area's supply of present agents.
pub fn check_feasibility(
    inst: &MabMlInstance,
    h: usize,
    world: &ScaledWorldState,
    assignment: &AssignmentVector,
) -> Result<bool, ModelError> {
    let ii = inst.area_count();
    let jj = inst.type_count();
    if world.h != h || world.area_count != ii || world.type_count != jj {
        return Err(ModelError::DimensionMismatch(format!(
            "world is ({}, {}, h={}), instance needs ({}, {}, h={})",
            world.area_count, world.type_count, world.h, ii, jj, h
        )));
    }
    if assignment.h != h || assignment.area_count != ii || assignment.type_count != jj {
        return Err(ModelError::DimensionMismatch(format!(
            "assignment is ({}, {}, h={}), instance needs ({}, {}, h={})",
            assignment.area_count, assignment.type_count, assignment.h, ii, jj, h
        )));
    }

    for j in 0..jj {
        for i in 0..ii {
            for k in 0..h {
                if let Some(o) = assignment.origin(i, j, k) {
                    if !inst.topology.neighbors(i, j).contains(&o) {
                        return Ok(false);
                    }
                }
            }
        }
        for i in 0..ii {
            let spec = inst.pair(i, j);
            let supply: f64 = (0..h).map(|k| spec.coupling[world.state(i, j, k)]).sum();
            let mut used = 0.0;
            for &dest in inst.topology.bbar(i, j) {
                for k in 0..h {
                    if assignment.origin(dest, j, k) == Some(i) {
                        used += inst.topology.weight(dest, i, j);
                    }
                }
            }
            if (used - supply).abs() > PROB_TOL {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
