//! Small hand-built instances used by tests and examples.

use crate::model::{CostTable, KernelTable, MabMlInstance, PairProcessSpec, SubState, Topology};

fn states4() -> Vec<SubState> {
    // index = knowledge * 2 + indicator
    vec![
        SubState { knowledge: 0, indicator: 0 },
        SubState { knowledge: 0, indicator: 1 },
        SubState { knowledge: 1, indicator: 0 },
        SubState { knowledge: 1, indicator: 1 },
    ]
}

/// One area, one type, self-loop only, two knowledge values, horizon 2.
/// Activation is cheap in the high-cost knowledge state and improves the
/// knowledge drift, so the optimal sub-policy is state-dependent.
pub fn tiny_pair() -> MabMlInstance {
    let states = states4();
    // costs by (knowledge, e)
    let costs = vec![[1.0, 2.0], [1.0, 2.0], [4.0, 3.0], [4.0, 3.0]];
    // kernel rows by source knowledge; successor indicator equals e
    let row = |k: usize, e: usize| -> Vec<(usize, f64)> {
        let (p_low, p_high) = match (k, e) {
            (0, 1) => (0.7, 0.3),
            (0, 0) => (0.5, 0.5),
            (1, 1) => (0.2, 0.8),
            (1, 0) => (0.0, 1.0),
            _ => unreachable!(),
        };
        let mut r = Vec::new();
        if p_low > 0.0 {
            r.push((e, p_low));
        }
        if p_high > 0.0 {
            r.push((2 + e, p_high));
        }
        r
    };
    let kernel: Vec<[Vec<(usize, f64)>; 2]> = (0..4)
        .map(|s| {
            let k = s / 2;
            [row(k, 0), row(k, 1)]
        })
        .collect();
    let spec = PairProcessSpec {
        states,
        costs: CostTable::Static(costs),
        kernel: KernelTable::Static(kernel),
        coupling: vec![0.0, 1.0, 0.0, 1.0],
        initial: vec![0.0, 0.6, 0.4, 0.0],
    };
    MabMlInstance {
        topology: Topology::patrol(1, 1, &[]),
        horizon: 2,
        specs: vec![spec],
        agent_base_counts: vec![1],
    }
}

/// One area, one type, constant knowledge; staying active while present and
/// passive while absent is strictly optimal and satisfies the coupling
/// constraint with zero residual, so zero multipliers are already optimal.
pub fn stay_put_instance() -> MabMlInstance {
    let states = vec![
        SubState { knowledge: 0, indicator: 0 },
        SubState { knowledge: 0, indicator: 1 },
    ];
    let costs = vec![[0.0, 1.0], [1.0, 0.0]];
    let kernel = vec![[vec![(0usize, 1.0)], vec![(1usize, 1.0)]]; 2];
    let spec = PairProcessSpec {
        states,
        costs: CostTable::Static(costs),
        kernel: KernelTable::Static(kernel),
        coupling: vec![0.0, 1.0],
        initial: vec![0.5, 0.5],
    };
    MabMlInstance {
        topology: Topology::patrol(1, 1, &[]),
        horizon: 4,
        specs: vec![spec],
        agent_base_counts: vec![1],
    }
}

/// Single pair with no coupling at all (g = 0, empty coupling map) whose
/// costs and knowledge transitions ignore the activation, so the relaxed
/// sub-problem at zero multipliers equals the exact optimum.
pub fn uncoupled_pair() -> MabMlInstance {
    let states = states4();
    let costs = vec![[1.0, 1.0], [1.0, 1.0], [5.0, 5.0], [5.0, 5.0]];
    // knowledge successor distribution depends only on knowledge
    let row = |k: usize, e: usize| -> Vec<(usize, f64)> {
        match k {
            0 => vec![(e, 0.8), (2 + e, 0.2)],
            _ => vec![(e, 0.4), (2 + e, 0.6)],
        }
    };
    let kernel: Vec<[Vec<(usize, f64)>; 2]> =
        (0..4).map(|s| [row(s / 2, 0), row(s / 2, 1)]).collect();
    let spec = PairProcessSpec {
        states,
        costs: CostTable::Static(costs),
        kernel: KernelTable::Static(kernel),
        coupling: vec![0.0; 4],
        initial: vec![0.25, 0.25, 0.25, 0.25],
    };
    MabMlInstance {
        topology: Topology::custom(1, 1, vec![vec![0]], vec![vec![]], vec![1.0]),
        horizon: 3,
        specs: vec![spec],
        agent_base_counts: vec![1],
    }
}
