//! Crime-detection specialization: beta-parameter knowledge states over a
//! fixed mass alpha + beta = 50, the four detection/report transition rules,
//! normalized crime-rate costs, the three shipped case topologies, and
//! randomized or fixed initializations.

use crate::model::{
    CostTable, KernelRow, KernelTable, MabMlInstance, PairProcessSpec, SubState, Topology,
};
use crate::rng::mix64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Fixed knowledge mass: alpha + beta.
pub const TOTAL: u32 = 50;
/// Cost is the crime rate alpha / TOTAL scaled by this factor.
pub const COST_SCALE: f64 = 100.0;
/// Virtual agents per base agent in the initial-position sampler.
pub const VIRTUAL_PER_AGENT: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum CrimeError {
    #[error("alpha + beta must be positive")]
    ZeroMass,
    #[error("unknown case id {0}; expected 6, 10 or 14")]
    UnknownCase(u32),
    #[error("cannot place {agents} virtual agents into {areas} areas (cap {cap} per area)")]
    TooManyAgents { agents: usize, areas: usize, cap: usize },
    #[error("knowledge set not closed: alpha {from} transitions to {to} outside the set")]
    NotClosed { from: u32, to: u32 },
}

/// Knowledge-update increments; alpha gains on detection misses or unseen
/// reports, beta gains on confirmed detections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaParams {
    pub delta1_alpha: u32,
    pub delta2_alpha: u32,
    pub delta_beta: u32,
}

/// Full parameterization of one crime-model instance draw.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrimeParams {
    pub area_count: usize,
    pub type_count: usize,
    pub horizon: usize,
    pub deltas: DeltaParams,
    /// Optional per-(i, j) override of the global deltas, indexed i * J + j.
    pub delta_overrides: Vec<Option<DeltaParams>>,
    /// Initial alpha per (i, j); beta0 = TOTAL - alpha0.
    pub alpha0: Vec<u32>,
    /// Probability that a sub-area of (i, j) hosts an agent at the start.
    pub indicator_init: Vec<f64>,
}

impl CrimeParams {
    pub fn deltas_for(&self, i: usize, j: usize) -> DeltaParams {
        self.delta_overrides[i * self.type_count + j].unwrap_or(self.deltas)
    }

    pub fn alpha0_at(&self, i: usize, j: usize) -> u32 {
        self.alpha0[i * self.type_count + j]
    }

    pub fn indicator_init_at(&self, i: usize, j: usize) -> f64 {
        self.indicator_init[i * self.type_count + j]
    }
}

/// Renormalizes a knowledge pair back onto the fixed mass:
/// floor(TOTAL * alpha / (alpha + beta)).
pub fn normalize(alpha: u32, beta: u32) -> Result<u32, CrimeError> {
    if alpha + beta == 0 {
        return Err(CrimeError::ZeroMass);
    }
    Ok(TOTAL * alpha / (alpha + beta))
}

#[inline]
fn state_index(alpha: u32, indicator: u8) -> usize {
    alpha as usize * 2 + indicator as usize
}

/// Successor rows for a source alpha, independent of the source indicator.
/// Returned as [row for e=0, row for e=1]; duplicate successors merged and
/// probabilities arranged so each row sums to exactly 1.0.
fn crime_rows(alpha: u32, d: DeltaParams, index_of: &dyn Fn(u32, u8) -> Option<usize>) -> Result<[KernelRow; 2], CrimeError> {
    let beta = TOTAL - alpha;
    let q = alpha as f64 / TOTAL as f64;
    let lookup = |a: u32, ind: u8| index_of(a, ind).ok_or(CrimeError::NotClosed { from: alpha, to: a });

    // e = 1: detection confirmed with probability q (beta reinforced),
    // otherwise a miss reinforces alpha.
    let a_hit = normalize(alpha, beta + d.delta_beta)?;
    let a_miss = normalize(alpha + d.delta1_alpha, beta)?;
    let row1 = merge_row(lookup(a_hit, 1)?, q, lookup(a_miss, 1)?);

    // e = 0: an unpatrolled crime is reported with probability q and
    // reinforces alpha; otherwise knowledge is unchanged.
    let a_rep = normalize(alpha + d.delta2_alpha, beta)?;
    let row0 = merge_row(lookup(a_rep, 0)?, q, lookup(alpha, 0)?);

    Ok([row0, row1])
}

// The complement probability is written as 1 - p so the f64 row sum is
// exactly 1.0 regardless of rounding in p.
fn merge_row(s_hi: usize, p_hi: f64, s_lo: usize) -> KernelRow {
    if s_hi == s_lo {
        vec![(s_hi, 1.0)]
    } else {
        let mut row = vec![(s_hi, p_hi), (s_lo, 1.0 - p_hi)];
        row.sort_unstable_by_key(|&(s, _)| s);
        row
    }
}

/// Builds the full 102-state pair process (51 alpha values times the
/// indicator bit) for pair (i, j).
pub fn crime_kernel(params: &CrimeParams, i: usize, j: usize) -> PairProcessSpec {
    let d = params.deltas_for(i, j);
    let mut states = Vec::with_capacity(102);
    for alpha in 0..=TOTAL {
        for ind in 0..2u8 {
            states.push(SubState { knowledge: alpha as u16, indicator: ind });
        }
    }
    let index_of = |a: u32, ind: u8| {
        if a <= TOTAL {
            Some(state_index(a, ind))
        } else {
            None
        }
    };
    let mut kernel = Vec::with_capacity(states.len());
    let mut costs = Vec::with_capacity(states.len());
    let mut coupling = Vec::with_capacity(states.len());
    for st in &states {
        let alpha = st.knowledge as u32;
        // normalize() keeps alpha within [0, TOTAL], so closure cannot fail
        let rows = crime_rows(alpha, d, &index_of).expect("full alpha range is closed");
        kernel.push(rows);
        let c = COST_SCALE * alpha as f64 / TOTAL as f64;
        costs.push([c, c]);
        coupling.push(st.indicator as f64);
    }
    let mut initial = vec![0.0; states.len()];
    let p = params.indicator_init_at(i, j);
    let a0 = params.alpha0_at(i, j);
    initial[state_index(a0, 1)] = p;
    initial[state_index(a0, 0)] = 1.0 - p;
    PairProcessSpec {
        states,
        costs: CostTable::Static(costs),
        kernel: KernelTable::Static(kernel),
        coupling,
        initial,
    }
}

/// Pair process restricted to a subset of alpha values; fails if the subset
/// is not closed under the transition rules. Used to build instances small
/// enough for exact joint-state solving.
pub fn reduced_crime_pair(
    alphas: &[u32],
    deltas: DeltaParams,
    alpha0: u32,
    indicator_init: f64,
) -> Result<PairProcessSpec, CrimeError> {
    let mut sorted: Vec<u32> = alphas.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let pos = |a: u32| sorted.binary_search(&a).ok();
    let mut states = Vec::with_capacity(sorted.len() * 2);
    for &alpha in &sorted {
        for ind in 0..2u8 {
            states.push(SubState { knowledge: alpha as u16, indicator: ind });
        }
    }
    let index_of = |a: u32, ind: u8| pos(a).map(|p| p * 2 + ind as usize);
    let mut kernel = Vec::new();
    let mut costs = Vec::new();
    let mut coupling = Vec::new();
    for st in &states {
        let rows = crime_rows(st.knowledge as u32, deltas, &index_of)?;
        kernel.push(rows);
        let c = COST_SCALE * st.knowledge as f64 / TOTAL as f64;
        costs.push([c, c]);
        coupling.push(st.indicator as f64);
    }
    let mut initial = vec![0.0; states.len()];
    let p0 = pos(alpha0).ok_or(CrimeError::NotClosed { from: alpha0, to: alpha0 })?;
    initial[p0 * 2 + 1] = indicator_init;
    initial[p0 * 2] = 1.0 - indicator_init;
    Ok(PairProcessSpec {
        states,
        costs: CostTable::Static(costs),
        kernel: KernelTable::Static(kernel),
        coupling,
        initial,
    })
}

// Initial alpha values per area (1-based rows of the shipped cases),
// for the two agent types. Case I uses rows 1..=6, Case II rows 1..=10,
// Case III all 14 rows.
const ALPHA0_TYPE1: [u32; 14] = [2, 2, 4, 3, 4, 3, 4, 3, 3, 5, 4, 2, 2, 4];
const ALPHA0_TYPE2: [u32; 14] = [4, 4, 32, 33, 50, 34, 26, 11, 9, 10, 22, 22, 22, 25];

// Fixed initial presence probabilities per area for the reproducible
// instances (probability that a sub-area hosts an agent at t = 1).
const INIT_PROB_6: [[f64; 6]; 2] = [
    [0.10, 0.25, 0.10, 0.15, 0.20, 0.20],
    [0.50, 0.50, 0.65, 0.20, 0.45, 0.70],
];
const INIT_PROB_10: [[f64; 10]; 2] = [
    [0.05, 0.10, 0.45, 0.15, 0.10, 0.20, 0.15, 0.40, 0.30, 0.10],
    [0.30, 0.60, 0.30, 0.55, 0.45, 0.75, 0.65, 0.60, 0.35, 0.45],
];
const INIT_PROB_14: [[f64; 14]; 2] = [
    [0.25, 0.00, 0.15, 0.05, 0.15, 0.20, 0.15, 0.10, 0.10, 0.15, 0.25, 0.20, 0.10, 0.15],
    [0.35, 0.35, 0.25, 0.25, 0.35, 0.30, 0.45, 0.20, 0.35, 0.30, 0.35, 0.45, 0.45, 0.60],
];

const CASE6_EDGES: &str = include_str!("../data/case6.txt");
const CASE10_EDGES: &str = include_str!("../data/case10.txt");
const CASE14_EDGES: &str = include_str!("../data/case14.txt");

/// Parses "i j" edge lines with 1-based area ids into 0-based pairs.
pub fn parse_topology(text: &str) -> Vec<(usize, usize)> {
    text.lines()
        .filter_map(|line| {
            let mut it = line.split_whitespace();
            let a: usize = it.next()?.parse().ok()?;
            let b: usize = it.next()?.parse().ok()?;
            Some((a - 1, b - 1))
        })
        .collect()
}

fn case_edges(case_id: u32) -> Result<Vec<(usize, usize)>, CrimeError> {
    match case_id {
        6 => Ok(parse_topology(CASE6_EDGES)),
        10 => Ok(parse_topology(CASE10_EDGES)),
        14 => Ok(parse_topology(CASE14_EDGES)),
        other => Err(CrimeError::UnknownCase(other)),
    }
}

/// Draws initial agent positions: VIRTUAL_PER_AGENT * m0[j] virtual agents
/// placed uniformly at random over areas with a per-area cap of
/// VIRTUAL_PER_AGENT (capped areas leave the candidate set). Returns the
/// per-(i, j) presence probability M_(i,j) / VIRTUAL_PER_AGENT, flattened
/// as i * J + j.
pub fn sample_initial_indicators(
    m0: &[usize],
    area_count: usize,
    seed: u64,
) -> Result<Vec<f64>, CrimeError> {
    let type_count = m0.len();
    let mut out = vec![0.0; area_count * type_count];
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed, 0x76697274)); // "virt"
    for (j, &m) in m0.iter().enumerate() {
        let agents = VIRTUAL_PER_AGENT * m;
        if agents > VIRTUAL_PER_AGENT * area_count {
            return Err(CrimeError::TooManyAgents {
                agents,
                areas: area_count,
                cap: VIRTUAL_PER_AGENT,
            });
        }
        let mut counts = vec![0usize; area_count];
        let mut candidates: Vec<usize> = (0..area_count).collect();
        for _ in 0..agents {
            let pick = rng.gen_range(0..candidates.len());
            let area = candidates[pick];
            counts[area] += 1;
            if counts[area] == VIRTUAL_PER_AGENT {
                candidates.swap_remove(pick);
            }
        }
        for i in 0..area_count {
            out[i * type_count + j] = counts[i] as f64 / VIRTUAL_PER_AGENT as f64;
        }
    }
    Ok(out)
}

fn case_params(
    case_id: u32,
    seed: u64,
    fixed_init: bool,
) -> Result<(CrimeParams, Vec<usize>), CrimeError> {
    case_edges(case_id)?;
    let area_count = case_id as usize;
    let type_count = 2;
    let horizon = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed, case_id as u64));
    let deltas = DeltaParams {
        delta1_alpha: rng.gen_range(2..=6),
        delta2_alpha: rng.gen_range(5..=9),
        delta_beta: rng.gen_range(1..=5),
    };
    // every pair draws its own increments; heterogeneous dynamics is what
    // separates index-driven ranking from plain rate chasing
    let delta_overrides: Vec<Option<DeltaParams>> = (0..area_count * type_count)
        .map(|_| {
            Some(DeltaParams {
                delta1_alpha: rng.gen_range(2..=6),
                delta2_alpha: rng.gen_range(5..=9),
                delta_beta: rng.gen_range(1..=5),
            })
        })
        .collect();
    let mut alpha0 = vec![0u32; area_count * type_count];
    for i in 0..area_count {
        alpha0[i * type_count] = ALPHA0_TYPE1[i];
        alpha0[i * type_count + 1] = ALPHA0_TYPE2[i];
    }
    let (indicator_init, m0) = if fixed_init {
        let table: [&[f64]; 2] = match case_id {
            6 => [&INIT_PROB_6[0], &INIT_PROB_6[1]],
            10 => [&INIT_PROB_10[0], &INIT_PROB_10[1]],
            14 => [&INIT_PROB_14[0], &INIT_PROB_14[1]],
            other => return Err(CrimeError::UnknownCase(other)),
        };
        let mut init = vec![0.0; area_count * type_count];
        let mut m0 = vec![0usize; type_count];
        for j in 0..type_count {
            let probs = table[j];
            let sum: f64 = probs.iter().sum();
            m0[j] = (sum.round() as usize).max(1);
            for i in 0..area_count {
                init[i * type_count + j] = probs[i];
            }
        }
        (init, m0)
    } else {
        let m0: Vec<usize> = (0..type_count)
            .map(|_| rng.gen_range(1..=(area_count / 2).max(1)))
            .collect();
        let init = sample_initial_indicators(&m0, area_count, rng.gen())?;
        (init, m0)
    };
    Ok((
        CrimeParams {
            area_count,
            type_count,
            horizon,
            deltas,
            delta_overrides,
            alpha0,
            indicator_init,
        },
        m0,
    ))
}

fn assemble(case_id: u32, params: CrimeParams, m0: Vec<usize>) -> Result<MabMlInstance, CrimeError> {
    let edges = case_edges(case_id)?;
    let topology = Topology::patrol(params.area_count, params.type_count, &edges);
    let mut specs = Vec::with_capacity(params.area_count * params.type_count);
    for i in 0..params.area_count {
        for j in 0..params.type_count {
            specs.push(crime_kernel(&params, i, j));
        }
    }
    Ok(MabMlInstance {
        topology,
        horizon: params.horizon,
        specs,
        agent_base_counts: m0,
    })
}

/// Builds one of the shipped cases (case_id = area count: 6, 10 or 14) with
/// seed-drawn delta parameters, agent counts and initial positions.
pub fn build_case(case_id: u32, seed: u64) -> Result<(MabMlInstance, CrimeParams), CrimeError> {
    build_case_opts(case_id, seed, false)
}

/// Like `build_case`, with `fixed_init` selecting the tabulated initial
/// presence probabilities instead of the virtual-agent draw.
pub fn build_case_opts(
    case_id: u32,
    seed: u64,
    fixed_init: bool,
) -> Result<(MabMlInstance, CrimeParams), CrimeError> {
    let (params, m0) = case_params(case_id, seed, fixed_init)?;
    let inst = assemble(case_id, params.clone(), m0)?;
    Ok((inst, params))
}
