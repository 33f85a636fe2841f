//! Exact brute-force solver for tiny instances: backward induction over the
//! joint state of all pairs at h = 1, minimizing over every feasible
//! assignment. Used to sandwich the relaxation lower bound against the true
//! optimum and to cross-check the per-pair DP.

use crate::crime::{reduced_crime_pair, CrimeError, DeltaParams};
use crate::model::{AssignmentVector, MabMlInstance, Topology};

const MAX_JOINT_STATES: usize = 2_000_000;
const MAX_AGENTS_PER_TYPE: usize = 4;
const MAX_AREAS: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("instance too large for exact solving: {0}")]
    GuardExceeded(String),
    #[error(transparent)]
    Crime(#[from] CrimeError),
}

/// Exact solution: the optimal expected total cost and, per slot, the index
/// of the chosen assignment (within the per-joint-state enumeration order).
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub opt: f64,
    pub policy: Vec<Vec<u32>>,
    pub joint_state_count: usize,
}

fn guards(inst: &MabMlInstance) -> Result<(usize, Vec<usize>), OracleError> {
    if inst.area_count() > MAX_AREAS {
        return Err(OracleError::GuardExceeded(format!(
            "{} areas (max {})",
            inst.area_count(),
            MAX_AREAS
        )));
    }
    let mut strides = Vec::with_capacity(inst.specs.len());
    let mut count: usize = 1;
    for spec in &inst.specs {
        strides.push(count);
        count = count
            .checked_mul(spec.state_count())
            .filter(|&c| c <= MAX_JOINT_STATES)
            .ok_or_else(|| {
                OracleError::GuardExceeded(format!("more than {} joint states", MAX_JOINT_STATES))
            })?;
    }
    Ok((count, strides))
}

fn decode(inst: &MabMlInstance, strides: &[usize], joint: usize) -> Vec<usize> {
    inst.specs
        .iter()
        .enumerate()
        .map(|(p, spec)| joint / strides[p] % spec.state_count())
        .collect()
}

/// All assignments feasible at the given per-pair states (h = 1): per type,
/// every injective map from occupied areas to distinct neighbor
/// destinations, crossed over types.
pub fn enumerate_feasible_assignments(
    inst: &MabMlInstance,
    pair_states: &[usize],
) -> Result<Vec<AssignmentVector>, OracleError> {
    let ii = inst.area_count();
    let jj = inst.type_count();
    if ii > MAX_AREAS {
        return Err(OracleError::GuardExceeded(format!("{} areas", ii)));
    }
    let mut per_type: Vec<Vec<Vec<(usize, usize)>>> = Vec::with_capacity(jj);
    for j in 0..jj {
        let occupied: Vec<usize> = (0..ii)
            .filter(|&i| inst.pair(i, j).coupling[pair_states[i * jj + j]] > 0.0)
            .collect();
        if occupied.len() > MAX_AGENTS_PER_TYPE {
            return Err(OracleError::GuardExceeded(format!(
                "{} agents of type {}",
                occupied.len(),
                j
            )));
        }
        // injective maps origin -> destination, built origin by origin
        let mut maps: Vec<Vec<(usize, usize)>> = vec![Vec::new()];
        for &origin in &occupied {
            let mut next = Vec::new();
            for partial in &maps {
                for &dest in inst.topology.neighbors(origin, j) {
                    if partial.iter().all(|&(_, d)| d != dest) {
                        let mut m = partial.clone();
                        m.push((origin, dest));
                        next.push(m);
                    }
                }
            }
            maps = next;
        }
        per_type.push(maps);
    }
    // cross product over types
    let mut out = vec![AssignmentVector::new_free(ii, jj, 1)];
    for (j, maps) in per_type.iter().enumerate() {
        let mut next = Vec::with_capacity(out.len() * maps.len());
        for base in &out {
            for map in maps {
                let mut a = base.clone();
                for &(origin, dest) in map {
                    a.assign(dest, j, 0, origin);
                }
                next.push(a);
            }
        }
        out = next;
    }
    Ok(out)
}

/// Exact optimum by backward induction over (joint state, slot). OPT is the
/// initial-distribution-weighted value at the first slot.
pub fn exact_optimum(inst: &MabMlInstance) -> Result<OracleResult, OracleError> {
    let (count, strides) = guards(inst)?;
    let jj = inst.type_count();
    let tt = inst.horizon;
    let pairs = inst.specs.len();
    let mut v_next = vec![0.0f64; count];
    let mut policy = vec![vec![0u32; count]; tt];
    for t in (0..tt).rev() {
        let mut v_cur = vec![0.0f64; count];
        for joint in 0..count {
            let states = decode(inst, &strides, joint);
            let assignments = enumerate_feasible_assignments(inst, &states)?;
            let mut best = f64::INFINITY;
            let mut best_a = 0u32;
            for (ai, a) in assignments.iter().enumerate() {
                let mut cost = 0.0;
                for (p, &s) in states.iter().enumerate() {
                    let (i, j) = (p / jj, p % jj);
                    cost += inst.specs[p].cost(s, usize::from(a.origin(i, j, 0).is_some()), t);
                }
                // expected continuation: product over pairs of kernel rows
                let mut terms: Vec<(usize, f64)> = vec![(0, 1.0)];
                for (p, &s) in states.iter().enumerate() {
                    let (i, j) = (p / jj, p % jj);
                    let e = usize::from(a.origin(i, j, 0).is_some());
                    let row = inst.specs[p].row(s, e, t);
                    let mut next_terms = Vec::with_capacity(terms.len() * row.len());
                    for &(base, prob) in &terms {
                        for &(sp, pr) in row {
                            if pr > 0.0 {
                                next_terms.push((base + sp * strides[p], prob * pr));
                            }
                        }
                    }
                    terms = next_terms;
                }
                let cont: f64 = terms.iter().map(|&(idx, pr)| pr * v_next[idx]).sum();
                let total = cost + cont;
                if total < best {
                    best = total;
                    best_a = ai as u32;
                }
            }
            v_cur[joint] = best;
            policy[t][joint] = best_a;
        }
        v_next = v_cur;
    }
    // weight by the product initial distribution
    let mut opt = 0.0;
    let mut mass: Vec<(usize, f64)> = vec![(0, 1.0)];
    for p in 0..pairs {
        let spec = &inst.specs[p];
        let mut next = Vec::new();
        for &(base, prob) in &mass {
            for (s, &pi) in spec.initial.iter().enumerate() {
                if pi > 0.0 {
                    next.push((base + s * strides[p], prob * pi));
                }
            }
        }
        mass = next;
    }
    for &(joint, prob) in &mass {
        opt += prob * v_next[joint];
    }
    Ok(OracleResult {
        opt,
        policy,
        joint_state_count: count,
    })
}

/// Catalog of reduced crime instances small enough for exact solving:
/// single agent type, at most 3 areas and 3 knowledge values, horizon at
/// most 3. Knowledge subsets are closed under unit alpha increments.
pub fn catalog_len() -> usize {
    5
}

pub fn catalog_instance(idx: usize) -> Result<MabMlInstance, OracleError> {
    let spec = |alphas: &[u32], db: u32, a0: u32, p: f64| {
        reduced_crime_pair(
            alphas,
            DeltaParams {
                delta1_alpha: 1,
                delta2_alpha: 1,
                delta_beta: db,
            },
            a0,
            p,
        )
    };
    let inst = match idx {
        0 => MabMlInstance {
            topology: Topology::patrol(1, 1, &[]),
            horizon: 3,
            specs: vec![spec(&[0, 1, 2], 1, 2, 1.0)?],
            agent_base_counts: vec![1],
        },
        1 => MabMlInstance {
            topology: Topology::patrol(2, 1, &[(0, 1)]),
            horizon: 3,
            specs: vec![spec(&[0, 1, 2], 2, 2, 1.0)?, spec(&[0, 1, 2], 2, 1, 0.0)?],
            agent_base_counts: vec![1],
        },
        2 => MabMlInstance {
            topology: Topology::patrol(3, 1, &[(0, 1), (1, 2)]),
            horizon: 3,
            specs: vec![
                spec(&[0, 1, 3], 26, 3, 1.0)?,
                spec(&[0, 1, 3], 26, 3, 0.0)?,
                spec(&[0, 1, 3], 26, 1, 1.0)?,
            ],
            agent_base_counts: vec![2],
        },
        3 => MabMlInstance {
            topology: Topology::patrol(3, 1, &[(0, 1), (1, 2), (0, 2)]),
            horizon: 2,
            specs: vec![
                spec(&[0, 1, 2], 4, 2, 0.5)?,
                spec(&[0, 1, 2], 4, 2, 0.5)?,
                spec(&[0, 1, 2], 4, 2, 0.0)?,
            ],
            agent_base_counts: vec![1],
        },
        4 => MabMlInstance {
            topology: Topology::patrol(2, 1, &[(0, 1)]),
            horizon: 3,
            specs: vec![spec(&[0, 1], 3, 1, 1.0)?, spec(&[0, 1], 3, 1, 0.5)?],
            agent_base_counts: vec![1],
        },
        other => {
            return Err(OracleError::GuardExceeded(format!(
                "no catalog instance {} (have {})",
                other,
                catalog_len()
            )))
        }
    };
    Ok(inst)
}
