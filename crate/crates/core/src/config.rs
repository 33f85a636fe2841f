//! Experiment configuration (JSON) and artifact serialization: the solved
//! dual in a shape-stable JSON layout, and helpers shared by the CLI.

use crate::sim::PolicyKind;
use crate::solver::{DualSolution, MultiplierVector, SolverOptions, ValueTable};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid JSON in {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub tol: f64,
    pub step_scale: Option<f64>,
    pub window: usize,
    pub jitter_scale: f64,
}

impl Default for SolverConfig {
    fn default() -> SolverConfig {
        let o = SolverOptions::default();
        SolverConfig {
            max_iters: o.max_iters,
            tol: o.tol,
            step_scale: o.step_scale,
            window: o.window,
            jitter_scale: o.jitter_scale,
        }
    }
}

impl SolverConfig {
    pub fn to_options(&self) -> SolverOptions {
        SolverOptions {
            max_iters: self.max_iters,
            tol: self.tol,
            step_scale: self.step_scale,
            window: self.window,
            jitter_scale: self.jitter_scale,
        }
    }
}

fn default_draws() -> usize {
    30
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// One of the shipped cases: 6, 10 or 14 areas.
    pub case_id: u32,
    pub seed: u64,
    pub h_list: Vec<usize>,
    pub runs: usize,
    pub policies: Vec<PolicyKind>,
    /// Instance draws for the sweep command.
    #[serde(default = "default_draws")]
    pub draws: usize,
    /// Use the tabulated initial presence probabilities instead of the
    /// virtual-agent draw.
    #[serde(default)]
    pub fixed_init: bool,
    #[serde(default)]
    pub solver: SolverConfig,
    pub out_dir: String,
    /// Restrict the oracle command to one catalog instance.
    #[serde(default)]
    pub oracle_instance: Option<usize>,
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let cfg: ExperimentConfig =
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })?;
    validate_config(&cfg)?;
    Ok(cfg)
}

pub fn validate_config(cfg: &ExperimentConfig) -> Result<(), ConfigError> {
    if !matches!(cfg.case_id, 6 | 10 | 14) {
        return Err(ConfigError::Invalid(format!(
            "case_id {} not one of 6, 10, 14",
            cfg.case_id
        )));
    }
    if cfg.h_list.is_empty() {
        return Err(ConfigError::Invalid("h_list is empty".into()));
    }
    if cfg.h_list.iter().any(|&h| h == 0) {
        return Err(ConfigError::Invalid("h values must be positive".into()));
    }
    if cfg.runs < 2 {
        return Err(ConfigError::Invalid(format!("runs = {} (need >= 2)", cfg.runs)));
    }
    if cfg.policies.is_empty() {
        return Err(ConfigError::Invalid("policies is empty".into()));
    }
    if cfg.draws == 0 {
        return Err(ConfigError::Invalid("draws must be positive".into()));
    }
    Ok(())
}

/// On-disk layout of a solved dual: multipliers as [area][type][slot],
/// values as [area][type][state][slot].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualSolutionFile {
    pub gamma: Vec<Vec<Vec<f64>>>,
    pub v: Vec<Vec<Vec<Vec<f64>>>>,
    pub lower_bound: f64,
    pub iterations: usize,
    pub best_dual_trace: Vec<f64>,
    pub final_residual: f64,
    pub jitter_eps0: f64,
    pub fingerprint: u64,
}

impl From<&DualSolution> for DualSolutionFile {
    fn from(d: &DualSolution) -> DualSolutionFile {
        let ii = d.gamma.area_count;
        let jj = d.gamma.type_count;
        let tt = d.gamma.horizon;
        let gamma = (0..ii)
            .map(|i| {
                (0..jj)
                    .map(|j| (0..tt).map(|t| d.gamma.at(i, j, t)).collect())
                    .collect()
            })
            .collect();
        let v = (0..ii)
            .map(|i| {
                (0..jj)
                    .map(|j| {
                        let cols = &d.values.per_pair[i * jj + j];
                        let sc = cols[0].len();
                        (0..sc)
                            .map(|s| (0..=tt).map(|t| cols[t][s]).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        DualSolutionFile {
            gamma,
            v,
            lower_bound: d.lower_bound,
            iterations: d.iterations,
            best_dual_trace: d.best_dual_trace.clone(),
            final_residual: d.final_residual,
            jitter_eps0: d.jitter_eps0,
            fingerprint: d.fingerprint,
        }
    }
}

impl From<DualSolutionFile> for DualSolution {
    fn from(f: DualSolutionFile) -> DualSolution {
        let ii = f.gamma.len();
        let jj = if ii > 0 { f.gamma[0].len() } else { 0 };
        let tt = if jj > 0 { f.gamma[0][0].len() } else { 0 };
        let mut gamma = MultiplierVector::zeros(ii, jj, tt);
        for i in 0..ii {
            for j in 0..jj {
                for t in 0..tt {
                    *gamma.at_mut(i, j, t) = f.gamma[i][j][t];
                }
            }
        }
        let mut per_pair = Vec::with_capacity(ii * jj);
        for i in 0..ii {
            for j in 0..jj {
                let by_state = &f.v[i][j];
                let sc = by_state.len();
                let cols = (0..=tt)
                    .map(|t| (0..sc).map(|s| by_state[s][t]).collect())
                    .collect();
                per_pair.push(cols);
            }
        }
        DualSolution {
            gamma,
            values: ValueTable { per_pair },
            lower_bound: f.lower_bound,
            iterations: f.iterations,
            best_dual_trace: f.best_dual_trace,
            final_residual: f.final_residual,
            jitter_eps0: f.jitter_eps0,
            fingerprint: f.fingerprint,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::maximize_dual;

    fn base_config() -> ExperimentConfig {
        serde_json::from_str(
            r#"{
                "case_id": 6,
                "seed": 1,
                "h_list": [1, 5],
                "runs": 10,
                "policies": ["mai", "greedy"],
                "out_dir": "/tmp/x"
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn defaults_fill_in_optional_fields() {
        let cfg = base_config();
        assert_eq!(cfg.draws, 30);
        assert!(!cfg.fixed_init);
        assert_eq!(cfg.solver.max_iters, 2000);
        assert!(cfg.oracle_instance.is_none());
        assert!(validate_config(&cfg).is_ok());
    }

    #[test]
    fn validation_rejects_each_bad_field() {
        let mut c = base_config();
        c.case_id = 7;
        assert!(validate_config(&c).is_err());
        let mut c = base_config();
        c.h_list.clear();
        assert!(validate_config(&c).is_err());
        let mut c = base_config();
        c.h_list = vec![0];
        assert!(validate_config(&c).is_err());
        let mut c = base_config();
        c.runs = 1;
        assert!(validate_config(&c).is_err());
        let mut c = base_config();
        c.policies.clear();
        assert!(validate_config(&c).is_err());
        let mut c = base_config();
        c.draws = 0;
        assert!(validate_config(&c).is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let r: Result<ExperimentConfig, _> = serde_json::from_str(
            r#"{"case_id": 6, "seed": 1, "h_list": [1], "runs": 2,
                "policies": ["mai"], "out_dir": "x", "typo_field": 3}"#,
        );
        assert!(r.is_err());
    }

    #[test]
    fn load_config_reports_io_and_parse_errors() {
        assert!(matches!(
            load_config(Path::new("/nonexistent/config.json")),
            Err(ConfigError::Io { .. })
        ));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.json");
        std::fs::write(&p, "{ not json").unwrap();
        assert!(matches!(load_config(&p), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn dual_solution_roundtrips_through_the_file_layout() {
        let inst = crate::oracle::catalog_instance(1).unwrap();
        let dual = maximize_dual(
            &inst,
            &crate::solver::SolverOptions { max_iters: 20, ..Default::default() },
        )
        .unwrap();
        let file = DualSolutionFile::from(&dual);
        let json = serde_json::to_string(&file).unwrap();
        let back: DualSolution = serde_json::from_str::<DualSolutionFile>(&json).unwrap().into();
        assert_eq!(back.gamma, dual.gamma);
        assert_eq!(back.values.per_pair, dual.values.per_pair);
        assert_eq!(back.lower_bound, dual.lower_bound);
        assert_eq!(back.jitter_eps0, dual.jitter_eps0);
        assert_eq!(back.fingerprint, dual.fingerprint);
        assert_eq!(back.best_dual_trace, dual.best_dual_trace);
    }
}
