//! Per-slot assignment policies: the index policy's single admission pass
//! (which may strand agents), the movement adaption that repairs stranding
//! by walking replacements toward vacancies, and the greedy and random
//! baselines that reuse the same pipeline.

use crate::index::{rank_movements_greedy, rank_movements_random, RankedMovements};
use crate::model::{AssignmentVector, MabMlInstance, ScaledWorldState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const UNREACHABLE: usize = usize::MAX;

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("no vacancy reachable for type {j} from area {area}")]
    NoVacancyReachable { j: usize, area: usize },
}

/// A repaired assignment plus how many destination slots the adaption
/// changed relative to the raw index pass.
#[derive(Debug, Clone)]
pub struct AdaptOutcome {
    pub assignment: AssignmentVector,
    pub adapted: usize,
}

/// Single admission pass over the ranked movements: a movement is taken iff
/// its destination sub-area is unclaimed and, when the movement draws on the
/// origin's supply, enough supply remains. Output can leave agents without
/// an outgoing move.
pub fn index_assign(
    inst: &MabMlInstance,
    h: usize,
    world: &ScaledWorldState,
    ranked: &RankedMovements,
) -> AssignmentVector {
    let ii = inst.area_count();
    let jj = inst.type_count();
    let mut asg = AssignmentVector::new_free(ii, jj, h);
    for j in 0..jj {
        let mut supply: Vec<f64> = (0..ii)
            .map(|i| {
                let spec = inst.pair(i, j);
                (0..h).map(|k| spec.coupling[world.state(i, j, k)]).sum()
            })
            .collect();
        let mut claimed = vec![false; ii * h];
        for m in &ranked.per_type[j] {
            if claimed[m.dest * h + m.sub] {
                continue;
            }
            let coupled = inst.topology.in_bbar(m.dest, m.origin, j);
            let w = if coupled {
                inst.topology.weight(m.dest, m.origin, j)
            } else {
                0.0
            };
            if coupled && supply[m.origin] + 1e-9 < w {
                continue;
            }
            asg.assign(m.dest, j, m.sub, m.origin);
            claimed[m.dest * h + m.sub] = true;
            supply[m.origin] -= w;
        }
    }
    asg
}

/// Replacement-walk distance per area for type j: 0 for areas holding an
/// agent with a free neighbor sub-area, +infinity for agent-less areas,
/// otherwise 1 + the minimum over origins currently assigned into the
/// neighborhood (excluding the area's own outgoing moves). Realized as a
/// multi-source BFS from the zero-distance areas.
fn distances(
    inst: &MabMlInstance,
    h: usize,
    world: &ScaledWorldState,
    asg: &AssignmentVector,
    j: usize,
) -> Vec<usize> {
    let ii = inst.area_count();
    let present: Vec<bool> = (0..ii)
        .map(|i| {
            let spec = inst.pair(i, j);
            (0..h).any(|k| spec.coupling[world.state(i, j, k)] > 0.0)
        })
        .collect();
    let mut takes_from: Vec<Vec<usize>> = vec![Vec::new(); ii];
    for dest in 0..ii {
        for k in 0..h {
            if let Some(o) = asg.origin(dest, j, k) {
                takes_from[o].push(dest);
            }
        }
    }
    let mut d = vec![UNREACHABLE; ii];
    let mut queue = std::collections::VecDeque::new();
    for i in 0..ii {
        if !present[i] {
            continue;
        }
        let has_free_nbr = inst
            .topology
            .neighbors(i, j)
            .iter()
            .any(|&n| (0..h).any(|k| asg.origin(n, j, k).is_none()));
        if has_free_nbr {
            d[i] = 0;
            queue.push_back(i);
        }
    }
    while let Some(o) = queue.pop_front() {
        for &dest in &takes_from[o] {
            for &i in inst.topology.neighbors(dest, j) {
                if present[i] && i != o && d[i] == UNREACHABLE {
                    d[i] = d[o] + 1;
                    queue.push_back(i);
                }
            }
        }
    }
    d
}

/// One replacement walk: starting from a stranded area, repeatedly steal the
/// neighbor sub-area whose assigned origin is closest to a vacancy (ties:
/// smallest destination area, then sub-area), handing the stolen slot to the
/// walker; a displaced agent at distance 0 exits into the smallest free
/// neighbor sub-area, otherwise it becomes the next walker.
fn walk(
    inst: &MabMlInstance,
    h: usize,
    j: usize,
    start: usize,
    asg: &mut AssignmentVector,
    d: &[usize],
) -> Result<usize, PolicyError> {
    let mut cur = start;
    let mut steps = 0usize;
    for _ in 0..=inst.area_count() {
        let mut best: Option<(usize, usize, usize, usize)> = None;
        for &dest in inst.topology.neighbors(cur, j) {
            for k in 0..h {
                if let Some(o) = asg.origin(dest, j, k) {
                    if o == cur {
                        continue;
                    }
                    let cand = (d[o], dest, k, o);
                    if best.map_or(true, |b| (cand.0, cand.1, cand.2) < (b.0, b.1, b.2)) {
                        best = Some(cand);
                    }
                }
            }
        }
        let Some((dist, dest, k, o)) = best else {
            return Err(PolicyError::NoVacancyReachable { j, area: cur });
        };
        if dist == UNREACHABLE {
            return Err(PolicyError::NoVacancyReachable { j, area: cur });
        }
        asg.assign(dest, j, k, cur);
        steps += 1;
        if dist == 0 {
            for &i2 in inst.topology.neighbors(o, j) {
                for k2 in 0..h {
                    if asg.origin(i2, j, k2).is_none() {
                        asg.assign(i2, j, k2, o);
                        return Ok(steps + 1);
                    }
                }
            }
            return Err(PolicyError::NoVacancyReachable { j, area: o });
        }
        cur = o;
    }
    Err(PolicyError::NoVacancyReachable { j, area: cur })
}

/// Repairs an index-pass assignment in place until every present agent has
/// an outgoing move. Stranded areas are processed in ascending id; distances
/// are recomputed after each completed walk.
pub fn adapt(
    inst: &MabMlInstance,
    h: usize,
    world: &ScaledWorldState,
    asg: &mut AssignmentVector,
) -> Result<(), PolicyError> {
    let ii = inst.area_count();
    let jj = inst.type_count();
    for j in 0..jj {
        let leftover: Vec<usize> = (0..ii)
            .map(|i| {
                let spec = inst.pair(i, j);
                let present = (0..h)
                    .filter(|&k| spec.coupling[world.state(i, j, k)] > 0.0)
                    .count();
                present.saturating_sub(asg.outgoing_count(i, j))
            })
            .collect();
        let mut d = distances(inst, h, world, asg, j);
        for i in 0..ii {
            for _ in 0..leftover[i] {
                walk(inst, h, j, i, asg, &d)?;
                d = distances(inst, h, world, asg, j);
            }
        }
    }
    Ok(())
}

/// Index policy with movement adaption: always feasible on connected
/// topologies with spare capacity.
pub fn mai_assign(
    inst: &MabMlInstance,
    h: usize,
    world: &ScaledWorldState,
    ranked: &RankedMovements,
) -> Result<AdaptOutcome, PolicyError> {
    let base = index_assign(inst, h, world, ranked);
    let mut assignment = base.clone();
    adapt(inst, h, world, &mut assignment)?;
    let adapted = assignment.diff_count(&base);
    Ok(AdaptOutcome { assignment, adapted })
}

/// Greedy baseline: descending destination cost ranking through the same
/// admission + adaption pipeline.
pub fn greedy_assign(
    inst: &MabMlInstance,
    h: usize,
    world: &ScaledWorldState,
    t: usize,
) -> Result<AdaptOutcome, PolicyError> {
    let ranked = rank_movements_greedy(inst, h, world, t);
    mai_assign(inst, h, world, &ranked)
}

/// Random baseline: uniformly shuffled ranking through the same pipeline;
/// feasible by construction.
pub fn random_feasible_assign(
    inst: &MabMlInstance,
    h: usize,
    world: &ScaledWorldState,
    seed: u64,
) -> Result<AdaptOutcome, PolicyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ranked = rank_movements_random(inst, h, world, &mut rng);
    mai_assign(inst, h, world, &ranked)
}
