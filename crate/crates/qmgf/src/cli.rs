//! Command-line front end.
//!
//! Subcommands and their artifacts:
//!
//! * `build <network>`  - model.qubo, model.ising, build.json, manifest.json
//! * `solve <network>`  - samples.csv, histogram.csv, solution.json,
//!   manifest.json
//! * `verify <network> <bits>` - prints the checked solution as JSON
//! * `sweep`            - sweep.csv, manifest.json over the standard roster
//!
//! Every artifact is deterministic for a given input and flag set, so
//! reruns are byte-identical; manifest.json records a hash per output plus
//! the configuration hash. Exit codes: 0 success, 2 bad input, 3 verified
//! infeasible, 4 model too large for the requested solver (1 for I/O).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::analysis::{qmgf_budget, scale_sweep, standard_roster, sweep_csv, EncodingSpec};
use crate::formulation::assemble;
use crate::lowering::{lower, to_ising, LoweredModel};
use crate::network::{load_network, NetworkModel};
use crate::solvers::{
    histogram_csv, sample_sa, solve_exact_bb, solve_exhaustive, SaParams, SampleSet,
    DEFAULT_BIT_LIMIT, DEFAULT_DECISION_LIMIT,
};
use crate::verify::{load_served_ratio, verify_solution};

#[derive(Debug, Parser)]
#[command(name = "qmgf", version, about = "Compact QUBO compiler and solvers for microgrid formation")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile a network into QUBO and Ising artifacts.
    Build {
        network: PathBuf,
        /// Power of ten applied to the objective (constraints use less when
        /// they can).
        #[arg(long, default_value_t = 3)]
        scale: u32,
        /// Uniform penalty weight; derived as objective bound + 1 if absent.
        #[arg(long)]
        penalty: Option<i64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Compile and solve, writing samples and the decoded best solution.
    Solve {
        network: PathBuf,
        #[arg(long, value_enum, default_value_t = SolverKind::Sa)]
        solver: SolverKind,
        #[arg(long, default_value_t = 3)]
        scale: u32,
        #[arg(long)]
        penalty: Option<i64>,
        #[arg(long, default_value_t = 200)]
        samples: u32,
        #[arg(long, default_value_t = 1000)]
        sweeps: u32,
        /// Required for sa so runs are reproducible.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, default_value_t = 16)]
        bins: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Check a bitstring (or @file holding one) against the original rules.
    Verify {
        network: PathBuf,
        bits: String,
        #[arg(long, default_value_t = 3)]
        scale: u32,
        #[arg(long)]
        penalty: Option<i64>,
    },
    /// Budget and annealing sweep over the generated fixture roster.
    Sweep {
        #[arg(long, default_value_t = 3)]
        scale: u32,
        #[arg(long, default_value_t = 200)]
        samples: u32,
        #[arg(long, default_value_t = 1000)]
        sweeps: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    /// Exact: full enumeration when it fits, branch and bound otherwise.
    Exhaustive,
    /// Simulated annealing.
    Sa,
}

type CliResult = Result<(), (i32, String)>;

/// Runs a parsed command; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.cmd {
        Command::Build { network, scale, penalty, out } => run_build(&network, scale, penalty, &out),
        Command::Solve { network, solver, scale, penalty, samples, sweeps, seed, threads, bins, out } => {
            run_solve(&network, solver, scale, penalty, samples, sweeps, seed, threads, bins, &out)
        }
        Command::Verify { network, bits, scale, penalty } => run_verify(&network, &bits, scale, penalty),
        Command::Sweep { scale, samples, sweeps, seed, threads, out } => {
            run_sweep(scale, samples, sweeps, seed, threads, &out)
        }
    };
    match result {
        Ok(()) => 0,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            code
        }
    }
}

fn sha256_hex(data: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(data).iter().map(|b| format!("{b:02x}")).collect()
}

/// manifest.json body: configuration, its hash, and a hash per artifact.
fn manifest(config: serde_json::Value, outputs: &[(&str, &str)]) -> String {
    let config_text = serde_json::to_string(&config).expect("config");
    let files: BTreeMap<&str, String> =
        outputs.iter().map(|(name, content)| (*name, sha256_hex(content.as_bytes()))).collect();
    let doc = json!({
        "config": config,
        "config_sha256": sha256_hex(config_text.as_bytes()),
        "outputs": files,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("manifest");
    text.push('\n');
    text
}

fn read_to_string(path: &Path) -> Result<String, (i32, String)> {
    fs::read_to_string(path).map_err(|e| (2, format!("cannot read {}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<(String, NetworkModel), (i32, String)> {
    let text = read_to_string(path)?;
    let net = load_network(&text).map_err(|e| (2, format!("{}: {e}", path.display())))?;
    Ok((text, net))
}

fn lower_network(net: &NetworkModel, scale: u32, penalty: Option<i64>) -> Result<LoweredModel, (i32, String)> {
    lower(&assemble(net), scale, penalty).map_err(|e| (2, e.to_string()))
}

fn write_outputs(dir: &Path, outputs: &[(&str, &str)]) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| (1, format!("cannot create {}: {e}", dir.display())))?;
    for (name, content) in outputs {
        let path = dir.join(name);
        fs::write(&path, content).map_err(|e| (1, format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

/// build.json body: the slacked program plus scaling and penalty metadata.
fn build_report(lowered: &LoweredModel) -> String {
    let program: serde_json::Value =
        serde_json::from_str(&lowered.program.debug_json()).expect("program dump parses");
    let doc = json!({
        "program": program,
        "objective_power": lowered.objective_power,
        "constraint_powers": lowered.constraint_powers,
        "slack_ranges": lowered.slack_ranges.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
        "penalty": {
            "constraint": lowered.plan.constraint_weight.to_string(),
            "gate": lowered.plan.gate_weight.to_string(),
        },
        "qubo": {
            "dim": lowered.qubo.dim,
            "terms": lowered.qubo.coeffs.len(),
            "offset": lowered.qubo.offset,
            "max_abs_coeff": lowered.qubo.max_abs_coeff(),
        },
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("report");
    text.push('\n');
    text
}

fn run_build(network: &Path, scale: u32, penalty: Option<i64>, out: &Path) -> CliResult {
    let (text, net) = load_model(network)?;
    let lowered = lower_network(&net, scale, penalty)?;
    let budget = qmgf_budget(&net, &lowered);

    let qubo_text = lowered.qubo.to_qubo_string();
    let ising_text = to_ising(&lowered.qubo).to_ising_string();
    let report = build_report(&lowered);
    let config = json!({
        "command": "build",
        "network_sha256": sha256_hex(text.as_bytes()),
        "scale": scale,
        "penalty": lowered.plan.constraint_weight.to_string(),
    });
    let outputs = [
        ("model.qubo", qubo_text.as_str()),
        ("model.ising", ising_text.as_str()),
        ("build.json", report.as_str()),
    ];
    let manifest_text = manifest(config, &outputs);
    let mut all = outputs.to_vec();
    all.push(("manifest.json", manifest_text.as_str()));
    write_outputs(out, &all)?;

    println!(
        "qubits: {} (primary {}, aux {}, slack {})",
        budget.total(),
        budget.primary,
        budget.aux,
        budget.slack
    );
    println!("couplers: {}", lowered.qubo.coeffs.len());
    println!("penalty: {}", lowered.plan.constraint_weight);
    println!("out: {}", out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_solve(
    network: &Path,
    solver: SolverKind,
    scale: u32,
    penalty: Option<i64>,
    samples: u32,
    sweeps: u32,
    seed: Option<u64>,
    threads: Option<usize>,
    bins: usize,
    out: &Path,
) -> CliResult {
    let (text, net) = load_model(network)?;
    let lowered = lower_network(&net, scale, penalty)?;

    let set: SampleSet = match solver {
        SolverKind::Exhaustive => {
            if lowered.qubo.dim <= DEFAULT_BIT_LIMIT {
                println!("solver: exhaustive");
                solve_exhaustive(&lowered.qubo, DEFAULT_BIT_LIMIT)
                    .map_err(|e| (4, e.to_string()))?
            } else {
                let n_dec = lowered.program.registry.first_slack();
                println!("solver: exact (branch and bound over {n_dec} decision bits)");
                solve_exact_bb(&lowered, DEFAULT_DECISION_LIMIT)
                    .map_err(|e| (4, e.to_string()))?
            }
        }
        SolverKind::Sa => {
            let seed =
                seed.ok_or((2, "sa needs --seed for reproducible sampling".to_string()))?;
            println!("solver: sa");
            let params = SaParams { samples, sweeps, seed, ..Default::default() };
            match threads {
                Some(t) => rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build()
                    .map_err(|e| (1, e.to_string()))?
                    .install(|| sample_sa(&lowered.qubo, &params)),
                None => sample_sa(&lowered.qubo, &params),
            }
        }
    };

    let best = set.best().ok_or((1, "no samples produced".to_string()))?;
    let solution = verify_solution(&net, &lowered.program.registry, &best.bits)
        .map_err(|e| (1, e.to_string()))?;
    let served = load_served_ratio(&net, &solution.restored);

    let samples_text = set.to_csv();
    let histogram_text = histogram_csv(&set.energy_histogram(bins));
    let solution_text = solution.to_json_string();
    let config = json!({
        "command": "solve",
        "network_sha256": sha256_hex(text.as_bytes()),
        "scale": scale,
        "penalty": lowered.plan.constraint_weight.to_string(),
        "solver": match solver { SolverKind::Exhaustive => "exhaustive", SolverKind::Sa => "sa" },
        "samples": samples,
        "sweeps": sweeps,
        "seed": seed,
    });
    let outputs = [
        ("samples.csv", samples_text.as_str()),
        ("histogram.csv", histogram_text.as_str()),
        ("solution.json", solution_text.as_str()),
    ];
    let manifest_text = manifest(config, &outputs);
    let mut all = outputs.to_vec();
    all.push(("manifest.json", manifest_text.as_str()));
    write_outputs(out, &all)?;

    println!("dim: {}", lowered.qubo.dim);
    println!("ground_energy: {}", best.energy);
    if solver == SolverKind::Sa {
        println!("ground_prob: {:.4}", set.ground_probability());
    }
    println!("feasible: {}", solution.feasible);
    println!("objective: {}", crate::decimal::format_rat(&solution.objective_value));
    println!("served_pct: {served}");
    println!("violations: {}", solution.violations.len());
    println!("out: {}", out.display());
    Ok(())
}

/// Literal 0/1 string, or @path to a file holding one.
fn parse_bits(spec: &str) -> Result<Vec<bool>, (i32, String)> {
    let text = if let Some(path) = spec.strip_prefix('@') {
        read_to_string(Path::new(path))?
    } else {
        spec.to_string()
    };
    let text = text.trim();
    let mut bits = Vec::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '0' => bits.push(false),
            '1' => bits.push(true),
            _ => return Err((2, format!("bitstring holds {c:?}, expected 0 or 1"))),
        }
    }
    Ok(bits)
}

fn run_verify(network: &Path, bits: &str, scale: u32, penalty: Option<i64>) -> CliResult {
    let (_, net) = load_model(network)?;
    let lowered = lower_network(&net, scale, penalty)?;
    let bits = parse_bits(bits)?;
    let solution = verify_solution(&net, &lowered.program.registry, &bits)
        .map_err(|e| (2, e.to_string()))?;
    print!("{}", solution.to_json_string());
    if solution.feasible {
        Ok(())
    } else {
        Err((3, format!("{} rule violations", solution.violations.len())))
    }
}

fn run_sweep(
    scale: u32,
    samples: u32,
    sweeps: u32,
    seed: u64,
    threads: Option<usize>,
    out: &Path,
) -> CliResult {
    let roster = standard_roster();
    let params = SaParams { samples, sweeps, seed, ..Default::default() };
    let enc = EncodingSpec::default();
    let rows = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| (1, e.to_string()))?
            .install(|| scale_sweep(&roster, &enc, scale, &params)),
        None => scale_sweep(&roster, &enc, scale, &params),
    }
    .map_err(|e| (2, e.to_string()))?;

    let csv = sweep_csv(&rows);
    let config = json!({
        "command": "sweep",
        "scale": scale,
        "samples": samples,
        "sweeps": sweeps,
        "seed": seed,
        "fixtures": roster.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
    });
    let outputs = [("sweep.csv", csv.as_str())];
    let manifest_text = manifest(config, &outputs);
    write_outputs(out, &[("sweep.csv", csv.as_str()), ("manifest.json", manifest_text.as_str())])?;
    print!("{csv}");
    Ok(())
}
