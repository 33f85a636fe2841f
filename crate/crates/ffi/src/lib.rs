//! C ABI over the core solver and simulator: opaque handles, integer error
//! codes, no panics across the boundary. The header is generated into
//! include/mabml.h at build time.

use mabml::crime::build_case_opts;
use mabml::index::{compute_indices, IndexTable};
use mabml::model::{validate_instance, MabMlInstance};
use mabml::sim::{monte_carlo, PolicyKind};
use mabml::solver::{maximize_dual, DualSolution, SolverOptions};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MabmlStatus {
    Ok = 0,
    NullArgument = 1,
    UnknownCase = 2,
    InvalidInstance = 3,
    SolveFailed = 4,
    UnknownPolicy = 5,
    SimulationFailed = 6,
    InvalidArgument = 7,
}

/// Policy selector for simulation.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MabmlPolicy {
    Index = 0,
    Mai = 1,
    Greedy = 2,
    Random = 3,
}

/// Opaque problem instance.
pub struct MabmlInstance {
    inner: MabMlInstance,
}

/// Opaque solved relaxation: multipliers, lower bound and index table.
pub struct MabmlSolution {
    dual: DualSolution,
    indices: IndexTable,
}

/// Monte Carlo aggregate returned by value.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MabmlSummary {
    pub runs: usize,
    pub mean: f64,
    pub ci_halfwidth: f64,
    pub lower_bound: f64,
    pub deviation: f64,
    pub all_feasible: bool,
}

/// Builds one of the shipped cases (6, 10 or 14 areas). On success stores a
/// heap-allocated handle in `out`; release it with `mabml_instance_free`.
#[no_mangle]
pub extern "C" fn mabml_instance_build_case(
    case_id: u32,
    seed: u64,
    fixed_init: bool,
    out: *mut *mut MabmlInstance,
) -> MabmlStatus {
    if out.is_null() {
        return MabmlStatus::NullArgument;
    }
    let inst = match build_case_opts(case_id, seed, fixed_init) {
        Ok((inst, _params)) => inst,
        Err(_) => return MabmlStatus::UnknownCase,
    };
    if !validate_instance(&inst).is_empty() {
        return MabmlStatus::InvalidInstance;
    }
    let handle = Box::new(MabmlInstance { inner: inst });
    unsafe { *out = Box::into_raw(handle) };
    MabmlStatus::Ok
}

/// Releases an instance handle. Null is a no-op.
#[no_mangle]
pub extern "C" fn mabml_instance_free(instance: *mut MabmlInstance) {
    if !instance.is_null() {
        drop(unsafe { Box::from_raw(instance) });
    }
}

/// Solves the relaxation with `max_iters` subgradient iterations (0 picks
/// the default) and stores a solution handle in `out`.
#[no_mangle]
pub extern "C" fn mabml_solve(
    instance: *const MabmlInstance,
    max_iters: usize,
    out: *mut *mut MabmlSolution,
) -> MabmlStatus {
    if instance.is_null() || out.is_null() {
        return MabmlStatus::NullArgument;
    }
    let inst = unsafe { &(*instance).inner };
    let mut options = SolverOptions::default();
    if max_iters > 0 {
        options.max_iters = max_iters;
    }
    let dual = match maximize_dual(inst, &options) {
        Ok(d) => d,
        Err(_) => return MabmlStatus::SolveFailed,
    };
    let indices = match compute_indices(inst, &dual) {
        Ok(i) => i,
        Err(_) => return MabmlStatus::SolveFailed,
    };
    let handle = Box::new(MabmlSolution { dual, indices });
    unsafe { *out = Box::into_raw(handle) };
    MabmlStatus::Ok
}

/// Releases a solution handle. Null is a no-op.
#[no_mangle]
pub extern "C" fn mabml_solution_free(solution: *mut MabmlSolution) {
    if !solution.is_null() {
        drop(unsafe { Box::from_raw(solution) });
    }
}

/// Reads the certified lower bound out of a solution.
#[no_mangle]
pub extern "C" fn mabml_solution_lower_bound(
    solution: *const MabmlSolution,
    out: *mut f64,
) -> MabmlStatus {
    if solution.is_null() || out.is_null() {
        return MabmlStatus::NullArgument;
    }
    unsafe { *out = (*solution).dual.lower_bound };
    MabmlStatus::Ok
}

/// Runs `runs` seeded Monte Carlo episodes of `policy` at scale `h` and
/// fills `out` with the aggregate.
#[no_mangle]
pub extern "C" fn mabml_simulate(
    instance: *const MabmlInstance,
    solution: *const MabmlSolution,
    h: usize,
    policy: MabmlPolicy,
    runs: usize,
    master_seed: u64,
    out: *mut MabmlSummary,
) -> MabmlStatus {
    if instance.is_null() || solution.is_null() || out.is_null() {
        return MabmlStatus::NullArgument;
    }
    if h == 0 || runs < 2 {
        return MabmlStatus::InvalidArgument;
    }
    let inst = unsafe { &(*instance).inner };
    let sol = unsafe { &*solution };
    let kind = match policy {
        MabmlPolicy::Index => PolicyKind::Index,
        MabmlPolicy::Mai => PolicyKind::Mai,
        MabmlPolicy::Greedy => PolicyKind::Greedy,
        MabmlPolicy::Random => PolicyKind::Random,
    };
    let summary = match monte_carlo(inst, h, kind, &sol.indices, runs, master_seed, sol.dual.lower_bound) {
        Ok(s) => s,
        Err(_) => return MabmlStatus::SimulationFailed,
    };
    unsafe {
        *out = MabmlSummary {
            runs: summary.runs,
            mean: summary.mean,
            ci_halfwidth: summary.ci_halfwidth,
            lower_bound: summary.lower_bound,
            deviation: summary.deviation,
            all_feasible: summary.all_feasible,
        };
    }
    MabmlStatus::Ok
}
