//! Index computation and per-slot movement ranking. The index of a movement
//! (destination i, origin i') is the destination pair's marginal activation
//! value minus the origin's price at the solved multipliers; lower is
//! better, +infinity for non-neighbors.

use crate::model::{MabMlInstance, ScaledWorldState};
use crate::solver::{theta, DualSolution, SolverContext};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("dual solution does not match the instance: {0}")]
    Mismatch(String),
}

/// Index values eta over (dest area, origin area, type, state, slot).
/// Flattened per pair as (origin * S + s) * T + t.
#[derive(Debug, Clone)]
pub struct IndexTable {
    pub area_count: usize,
    pub type_count: usize,
    pub horizon: usize,
    pub fingerprint: u64,
    per_pair: Vec<Vec<f64>>,
}

impl IndexTable {
    #[inline]
    pub fn eta(&self, i: usize, i_prime: usize, j: usize, s: usize, t: usize) -> f64 {
        let pair = &self.per_pair[i * self.type_count + j];
        let states = pair.len() / (self.area_count * self.horizon);
        pair[(i_prime * states + s) * self.horizon + t]
    }
}

/// JSON form of the table; +infinity entries map to null.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexTableFile {
    pub area_count: usize,
    pub type_count: usize,
    pub horizon: usize,
    pub fingerprint: u64,
    pub eta: Vec<Vec<Option<f64>>>,
}

impl From<&IndexTable> for IndexTableFile {
    fn from(t: &IndexTable) -> IndexTableFile {
        IndexTableFile {
            area_count: t.area_count,
            type_count: t.type_count,
            horizon: t.horizon,
            fingerprint: t.fingerprint,
            eta: t
                .per_pair
                .iter()
                .map(|p| p.iter().map(|&v| if v.is_finite() { Some(v) } else { None }).collect())
                .collect(),
        }
    }
}

impl From<IndexTableFile> for IndexTable {
    fn from(f: IndexTableFile) -> IndexTable {
        IndexTable {
            area_count: f.area_count,
            type_count: f.type_count,
            horizon: f.horizon,
            fingerprint: f.fingerprint,
            per_pair: f
                .eta
                .into_iter()
                .map(|p| p.into_iter().map(|v| v.unwrap_or(f64::INFINITY)).collect())
                .collect(),
        }
    }
}

/// Computes the full index table from a solved dual. The marginal activation
/// values are recomputed from the stored value tables with the same jitter
/// the solver used, so indices are consistent with the recorded choices.
pub fn compute_indices(inst: &MabMlInstance, dual: &DualSolution) -> Result<IndexTable, IndexError> {
    if dual.fingerprint != inst.fingerprint() {
        return Err(IndexError::Mismatch(format!(
            "fingerprint {:#x} vs instance {:#x}",
            dual.fingerprint,
            inst.fingerprint()
        )));
    }
    let ii = inst.area_count();
    let jj = inst.type_count();
    let tt = inst.horizon;
    if dual.gamma.area_count != ii || dual.gamma.type_count != jj || dual.gamma.horizon != tt {
        return Err(IndexError::Mismatch("multiplier dimensions".into()));
    }
    let ctx = SolverContext::with_eps0(inst, dual.jitter_eps0);
    let mut per_pair = Vec::with_capacity(ii * jj);
    for i in 0..ii {
        for j in 0..jj {
            let spec = inst.pair(i, j);
            let sc = spec.state_count();
            let mut table = vec![f64::INFINITY; ii * sc * tt];
            let v = &dual.values.per_pair[i * jj + j];
            for t in 0..tt {
                for s in 0..sc {
                    let marginal = ctx.vartheta(i, j, s, t, &v[t + 1]);
                    for &ip in inst.topology.neighbors(i, j) {
                        table[(ip * sc + s) * tt + t] =
                            marginal - theta(&inst.topology, &dual.gamma, i, ip, j, t);
                    }
                }
            }
            per_pair.push(table);
        }
    }
    Ok(IndexTable {
        area_count: ii,
        type_count: jj,
        horizon: tt,
        fingerprint: dual.fingerprint,
        per_pair,
    })
}

/// One candidate movement: origin area into destination sub-area (dest, sub).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Movement {
    pub dest: usize,
    pub sub: usize,
    pub origin: usize,
    pub key: f64,
}

/// Candidate movements per agent type, in the order the assignment pass
/// consumes them.
#[derive(Debug, Clone)]
pub struct RankedMovements {
    pub per_type: Vec<Vec<Movement>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankOrdering {
    /// Ascending by index value.
    Index,
    /// Descending by the destination sub-area's active cost rate (in the
    /// crime model this is the crime rate).
    Greedy,
}

fn candidate_set(inst: &MabMlInstance, h: usize, world: &ScaledWorldState, j: usize) -> Vec<(usize, usize, usize)> {
    let ii = inst.area_count();
    // areas that still hold at least one agent of this type
    let mut supply = vec![false; ii];
    for i in 0..ii {
        let spec = inst.pair(i, j);
        supply[i] = (0..h).any(|k| spec.coupling[world.state(i, j, k)] > 0.0);
    }
    let mut out = Vec::new();
    for dest in 0..ii {
        for &origin in inst.topology.neighbors(dest, j) {
            if !supply[origin] {
                continue;
            }
            for sub in 0..h {
                out.push((dest, sub, origin));
            }
        }
    }
    out
}

/// Builds and sorts the per-type candidate movements for slot t. Index
/// ordering is ascending by eta at the destination sub-area's current state;
/// greedy is descending by the destination's active cost. Ties break on
/// (destination, origin, state index, sub-area), making the order total and
/// reproducible.
pub fn rank_movements(
    inst: &MabMlInstance,
    h: usize,
    world: &ScaledWorldState,
    indices: &IndexTable,
    t: usize,
    ordering: RankOrdering,
) -> RankedMovements {
    if ordering == RankOrdering::Greedy {
        return rank_movements_greedy(inst, h, world, t);
    }
    let jj = inst.type_count();
    let mut per_type = Vec::with_capacity(jj);
    for j in 0..jj {
        let mut moves: Vec<(f64, usize, usize, usize, usize)> = candidate_set(inst, h, world, j)
            .into_iter()
            .map(|(dest, sub, origin)| {
                let s = world.state(dest, j, sub);
                let key = indices.eta(dest, origin, j, s, t);
                (key, dest, origin, s, sub)
            })
            .collect();
        moves.sort_unstable_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
                .then(a.3.cmp(&b.3))
                .then(a.4.cmp(&b.4))
        });
        per_type.push(
            moves
                .into_iter()
                .map(|(key, dest, origin, _s, sub)| Movement { dest, sub, origin, key })
                .collect(),
        );
    }
    RankedMovements { per_type }
}

/// Greedy ranking without an index table (descending destination active
/// cost); same tie rules as `rank_movements`.
pub fn rank_movements_greedy(
    inst: &MabMlInstance,
    h: usize,
    world: &ScaledWorldState,
    t: usize,
) -> RankedMovements {
    let jj = inst.type_count();
    let mut per_type = Vec::with_capacity(jj);
    for j in 0..jj {
        let mut moves: Vec<(f64, usize, usize, usize, usize)> = candidate_set(inst, h, world, j)
            .into_iter()
            .map(|(dest, sub, origin)| {
                let s = world.state(dest, j, sub);
                (-inst.pair(dest, j).cost(s, 1, t), dest, origin, s, sub)
            })
            .collect();
        moves.sort_unstable_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
                .then(a.3.cmp(&b.3))
                .then(a.4.cmp(&b.4))
        });
        per_type.push(
            moves
                .into_iter()
                .map(|(key, dest, origin, _s, sub)| Movement { dest, sub, origin, key })
                .collect(),
        );
    }
    RankedMovements { per_type }
}

/// Uniformly shuffled candidate movements, fed through the same assignment
/// pipeline as the ranked orderings (baseline policy).
pub fn rank_movements_random<R: Rng>(
    inst: &MabMlInstance,
    h: usize,
    world: &ScaledWorldState,
    rng: &mut R,
) -> RankedMovements {
    let jj = inst.type_count();
    let mut per_type = Vec::with_capacity(jj);
    for j in 0..jj {
        let mut moves: Vec<Movement> = candidate_set(inst, h, world, j)
            .into_iter()
            .map(|(dest, sub, origin)| Movement { dest, sub, origin, key: 0.0 })
            .collect();
        moves.shuffle(rng);
        per_type.push(moves);
    }
    RankedMovements { per_type }
}
