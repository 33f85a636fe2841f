//! Command-line entry point: solve an instance's relaxation, simulate
//! policies at a chosen scale, sweep instance draws for deviation
//! distributions, or sandwich the lower bound against the exact optimum on
//! the reduced catalog instances.

use clap::{Parser, Subcommand};
use mabml::config::{load_config, DualSolutionFile, ExperimentConfig};
use mabml::crime::build_case_opts;
use mabml::index::{compute_indices, IndexTable, IndexTableFile};
use mabml::model::{validate_instance, MabMlInstance};
use mabml::oracle::{catalog_instance, catalog_len, exact_optimum};
use mabml::rng::mix64;
use mabml::sim::{monte_carlo, MonteCarloSummary, PolicyKind};
use mabml::solver::{maximize_dual, DualSolution};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_VALIDATION: u8 = 1;
const EXIT_INVARIANT: u8 = 2;

#[derive(Parser)]
#[command(name = "mabml", about = "Relaxation solver and patrol-policy simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the relaxation and write dual.json + indices.json.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Simulate one policy at one scale against existing solve artifacts.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        h: usize,
        #[arg(long)]
        policy: PolicyKind,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-draw instances and emit the long-format deviation dataset.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact-optimum sandwich report on the reduced catalog instances.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    msg: String,
}

fn fail(code: u8, msg: impl Into<String>) -> Failure {
    Failure { code, msg: msg.into() }
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Failure {
        fail(EXIT_VALIDATION, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Solve { config, out, seed } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let out_dir = out.unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
            cmd_solve(&cfg, &out_dir)
        }
        Cmd::Simulate { config, h, policy, runs, seed, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = runs {
                cfg.runs = r;
            }
            let out_dir = out.unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
            cmd_simulate(&cfg, h, policy, &out_dir)
        }
        Cmd::Sweep { config, seed, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let out_dir = out.unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
            cmd_sweep(&cfg, &out_dir)
        }
        Cmd::Oracle { config, out } => {
            let cfg = load_config(&config)?;
            let out_dir = out.unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
            cmd_oracle(&cfg, &out_dir)
        }
    }
}

fn build_instance(cfg: &ExperimentConfig) -> Result<MabMlInstance, Failure> {
    let (inst, _params) = build_case_opts(cfg.case_id, cfg.seed, cfg.fixed_init)?;
    let violations = validate_instance(&inst);
    if !violations.is_empty() {
        let lines: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(fail(EXIT_VALIDATION, format!("instance invalid:\n{}", lines.join("\n"))));
    }
    Ok(inst)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| fail(EXIT_VALIDATION, e.to_string()))?;
    std::fs::write(path, text + "\n")
        .map_err(|e| fail(EXIT_VALIDATION, format!("cannot write {}: {}", path.display(), e)))
}

fn cmd_solve(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(), Failure> {
    let inst = build_instance(cfg)?;
    let dual = maximize_dual(&inst, &cfg.solver.to_options())?;
    let indices = compute_indices(&inst, &dual)?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| fail(EXIT_VALIDATION, format!("cannot create {}: {}", out_dir.display(), e)))?;
    write_json(&out_dir.join("dual.json"), &DualSolutionFile::from(&dual))?;
    write_json(&out_dir.join("indices.json"), &IndexTableFile::from(&indices))?;
    println!(
        "lower_bound {:.6}  iterations {}  residual {:.6}",
        dual.lower_bound, dual.iterations, dual.final_residual
    );
    Ok(())
}

fn load_artifacts(inst: &MabMlInstance, out_dir: &Path) -> Result<(DualSolution, IndexTable), Failure> {
    let dual_path = out_dir.join("dual.json");
    let idx_path = out_dir.join("indices.json");
    for p in [&dual_path, &idx_path] {
        if !p.exists() {
            return Err(fail(
                EXIT_VALIDATION,
                format!("missing artifact {} (run solve first)", p.display()),
            ));
        }
    }
    let dual: DualSolutionFile = serde_json::from_str(
        &std::fs::read_to_string(&dual_path).map_err(|e| fail(EXIT_VALIDATION, e.to_string()))?,
    )
    .map_err(|e| fail(EXIT_VALIDATION, format!("bad dual.json: {}", e)))?;
    let idx: IndexTableFile = serde_json::from_str(
        &std::fs::read_to_string(&idx_path).map_err(|e| fail(EXIT_VALIDATION, e.to_string()))?,
    )
    .map_err(|e| fail(EXIT_VALIDATION, format!("bad indices.json: {}", e)))?;
    let dual: DualSolution = dual.into();
    let idx: IndexTable = idx.into();
    let fp = inst.fingerprint();
    if dual.fingerprint != fp || idx.fingerprint != fp {
        return Err(fail(
            EXIT_VALIDATION,
            "artifacts were solved for a different instance (fingerprint mismatch)",
        ));
    }
    Ok((dual, idx))
}

fn sim_master_seed(seed: u64, h: usize, policy: PolicyKind) -> u64 {
    mix64(mix64(seed, h as u64), policy as u64 + 1)
}

fn write_run_csvs(
    out_dir: &Path,
    h: usize,
    policy: PolicyKind,
    results: &[mabml::sim::EpisodeResult],
    summary: &MonteCarloSummary,
) -> Result<(), Failure> {
    let runs_path = out_dir.join(format!("runs_h{}_{}.csv", h, policy.name()));
    let mut w = csv::Writer::from_path(&runs_path).map_err(|e| fail(EXIT_VALIDATION, e.to_string()))?;
    w.write_record(["h", "policy", "run_index", "normalized_cost", "feasible", "adapted_fraction"])?;
    for (r, res) in results.iter().enumerate() {
        w.write_record([
            h.to_string(),
            policy.name().to_string(),
            r.to_string(),
            format!("{}", res.normalized_total_cost),
            res.all_feasible().to_string(),
            format!("{}", res.adapted_fraction),
        ])?;
    }
    w.flush().map_err(|e| fail(EXIT_VALIDATION, e.to_string()))?;

    let summary_path = out_dir.join(format!("summary_h{}_{}.csv", h, policy.name()));
    let mut w = csv::Writer::from_path(&summary_path).map_err(|e| fail(EXIT_VALIDATION, e.to_string()))?;
    w.write_record(["h", "policy", "runs", "mean", "ci_halfwidth", "lower_bound", "deviation"])?;
    w.write_record([
        h.to_string(),
        policy.name().to_string(),
        summary.runs.to_string(),
        format!("{}", summary.mean),
        format!("{}", summary.ci_halfwidth),
        format!("{}", summary.lower_bound),
        format!("{}", summary.deviation),
    ])?;
    w.flush().map_err(|e| fail(EXIT_VALIDATION, e.to_string()))?;
    Ok(())
}

fn cmd_simulate(cfg: &ExperimentConfig, h: usize, policy: PolicyKind, out_dir: &Path) -> Result<(), Failure> {
    if h == 0 {
        return Err(fail(EXIT_VALIDATION, "h must be positive"));
    }
    let inst = build_instance(cfg)?;
    let (dual, indices) = load_artifacts(&inst, out_dir)?;
    let master = sim_master_seed(cfg.seed, h, policy);
    let results = mabml::sim::episodes(&inst, h, policy, &indices, cfg.runs, master)?;
    let summary = mabml::sim::summarize(&results, dual.lower_bound)?;
    write_run_csvs(out_dir, h, policy, &results, &summary)?;
    println!(
        "h {}  policy {}  runs {}  mean {:.4}  ci {:.4}  deviation {:.4}",
        h, policy.name(), summary.runs, summary.mean, summary.ci_halfwidth, summary.deviation
    );
    if !summary.all_feasible && matches!(policy, PolicyKind::Mai | PolicyKind::Greedy) {
        return Err(fail(EXIT_INVARIANT, "feasibility violation under a repaired policy"));
    }
    Ok(())
}

fn cmd_sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| fail(EXIT_VALIDATION, format!("cannot create {}: {}", out_dir.display(), e)))?;
    let sweep_path = out_dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&sweep_path).map_err(|e| fail(EXIT_VALIDATION, e.to_string()))?;
    w.write_record(["draw", "h", "policy", "runs", "mean", "ci_halfwidth", "lower_bound", "deviation"])?;
    for draw in 0..cfg.draws {
        let draw_seed = mix64(cfg.seed, 1000 + draw as u64);
        let (inst, _params) = build_case_opts(cfg.case_id, draw_seed, cfg.fixed_init)?;
        let violations = validate_instance(&inst);
        if !violations.is_empty() {
            return Err(fail(EXIT_VALIDATION, format!("draw {}: invalid instance", draw)));
        }
        let dual = maximize_dual(&inst, &cfg.solver.to_options())?;
        let indices = compute_indices(&inst, &dual)?;
        for &h in &cfg.h_list {
            for &policy in &cfg.policies {
                let master = sim_master_seed(draw_seed, h, policy);
                let summary =
                    monte_carlo(&inst, h, policy, &indices, cfg.runs, master, dual.lower_bound)?;
                w.write_record([
                    draw.to_string(),
                    h.to_string(),
                    policy.name().to_string(),
                    summary.runs.to_string(),
                    format!("{}", summary.mean),
                    format!("{}", summary.ci_halfwidth),
                    format!("{}", summary.lower_bound),
                    format!("{}", summary.deviation),
                ])?;
            }
        }
        eprintln!("draw {}/{} done (lower bound {:.4})", draw + 1, cfg.draws, dual.lower_bound);
    }
    w.flush().map_err(|e| fail(EXIT_VALIDATION, e.to_string()))?;
    Ok(())
}

#[derive(Serialize)]
struct OracleEntry {
    instance: usize,
    joint_states: usize,
    lower_bound: f64,
    opt: f64,
    gap: f64,
    mai_mean: f64,
    mai_ci_halfwidth: f64,
    sandwich_ok: bool,
}

fn cmd_oracle(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| fail(EXIT_VALIDATION, format!("cannot create {}: {}", out_dir.display(), e)))?;
    let ids: Vec<usize> = match cfg.oracle_instance {
        Some(i) => vec![i],
        None => (0..catalog_len()).collect(),
    };
    let mut entries = Vec::new();
    let mut all_ok = true;
    for idx in ids {
        let inst = catalog_instance(idx)?;
        let exact = exact_optimum(&inst)?;
        let dual = maximize_dual(&inst, &cfg.solver.to_options())?;
        let indices = compute_indices(&inst, &dual)?;
        let master = mix64(cfg.seed, 0x6f72_6163 + idx as u64);
        let summary = monte_carlo(&inst, 1, PolicyKind::Mai, &indices, 10_000, master, dual.lower_bound)?;
        let sandwich_ok = dual.lower_bound <= exact.opt + 1e-6
            && exact.opt <= summary.mean + 3.0 * summary.ci_halfwidth;
        all_ok &= sandwich_ok;
        println!(
            "instance {}  lower_bound {:.6}  opt {:.6}  mai {:.6} +- {:.6}  {}",
            idx,
            dual.lower_bound,
            exact.opt,
            summary.mean,
            summary.ci_halfwidth,
            if sandwich_ok { "ok" } else { "VIOLATED" }
        );
        entries.push(OracleEntry {
            instance: idx,
            joint_states: exact.joint_state_count,
            lower_bound: dual.lower_bound,
            opt: exact.opt,
            gap: exact.opt - dual.lower_bound,
            mai_mean: summary.mean,
            mai_ci_halfwidth: summary.ci_halfwidth,
            sandwich_ok,
        });
    }
    write_json(&out_dir.join("oracle_report.json"), &entries)?;
    if !all_ok {
        return Err(fail(EXIT_INVARIANT, "sandwich violated on a catalog instance"));
    }
    Ok(())
}
