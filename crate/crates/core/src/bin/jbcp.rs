use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use jbcp::bench::{
    generate_instance, paper_config, resolve_workers, run_method, run_sweep, write_sweep, ExperimentConfig,
    Method, MethodOutcome, RunStatus, WORKERS_ENV,
};
use jbcp::dual::OptimizerSettings;
use jbcp::network::BeamformingDesign;
use jbcp::recovery::certify;
use jbcp::sdr::{build_inner_program, build_sdr_program};
use jbcp::NetworkInstance;

#[derive(Parser)]
#[command(name = "jbcp", version, about = "Joint beamforming and fronthaul compression under per-antenna power budgets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance with one method and print the outcome as JSON.
    Solve {
        instance: PathBuf,
        #[arg(long, default_value = "pega")]
        algo: Method,
        /// Experiment config whose optimizer settings and tolerance are used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        opt: OptimizerFlags,
        /// Write outcome.json, design.json and trace.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte-Carlo sweep and write CSV + JSON records.
    Sweep {
        /// Experiment config (JSON); the built-in reference setup when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Restrict to these methods (repeatable).
        #[arg(long)]
        algo: Vec<Method>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long, env = WORKERS_ENV)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        opt: OptimizerFlags,
    },
    /// Certify a saved beamforming design against an instance.
    Check {
        instance: PathBuf,
        design: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Relaxation optimum to report the objective gap against.
        #[arg(long)]
        sdr_objective: Option<f64>,
    },
    /// Emit the cone program of an instance as JSON.
    DumpCone {
        instance: PathBuf,
        /// Dualize the power budgets with these multipliers (comma separated).
        #[arg(long, value_delimiter = ',')]
        multipliers: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw one instance from a config and print it as JSON.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// SINR target (defaults to the config's first).
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the built-in reference configuration.
    Config,
}

#[derive(Args)]
struct OptimizerFlags {
    #[arg(long)]
    eps_out: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
}

impl OptimizerFlags {
    fn apply(&self, s: &mut OptimizerSettings) {
        if let Some(e) = self.eps_out {
            s.eps_out = e;
        }
        if let Some(n) = self.max_outer {
            s.max_outer = n;
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

type CliResult = Result<ExitCode, Box<dyn std::error::Error>>;

fn load_config(path: Option<&Path>) -> jbcp::Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(paper_config()),
    }
}

fn emit(text: &str, out: Option<&Path>) -> io::Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text)
        }
        None => writeln!(io::stdout().lock(), "{text}"),
    }
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Solve { instance, algo, config, opt, out } => {
            let inst = NetworkInstance::load(&instance)?;
            let cfg = load_config(config.as_deref())?;
            let mut settings = cfg.optimizer.clone();
            opt.apply(&mut settings);
            settings.validate()?;
            let outcome = run_method(&inst, algo, &settings, cfg.feasibility_tolerance);
            let json = serde_json::to_string_pretty(&outcome)?;
            if let Some(dir) = out {
                write_solve_outputs(&dir, &outcome, &json)?;
            }
            println!("{json}");
            Ok(match outcome.status {
                RunStatus::Ok => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            })
        }
        Command::Sweep { config, algo, seed, runs, workers, out, opt } => {
            let mut cfg = load_config(config.as_deref())?;
            if !algo.is_empty() {
                cfg.algorithms = algo;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = runs {
                cfg.runs = r;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            opt.apply(&mut cfg.optimizer);
            cfg.validate()?;
            let workers = resolve_workers(workers);
            eprintln!(
                "sweep: {} runs x {} targets x {} methods on {workers} workers",
                cfg.runs,
                cfg.sinr_targets.len(),
                cfg.algorithms.len()
            );
            let res = run_sweep(&cfg, workers)?;
            let files = write_sweep(&res, &cfg.output_dir, cfg.write_traces)?;
            for a in &res.aggregates {
                println!(
                    "{:<5} gamma={:<8} runs={:<3} infeasible={:<3} failed={:<3} mean_obj={:.6e} mean_outer={:.1} mean_s={:.3}",
                    a.algorithm,
                    a.gamma,
                    a.runs,
                    a.infeasible_instances,
                    a.failures,
                    a.mean_objective,
                    a.mean_outer_iterations,
                    a.mean_wall_seconds
                );
            }
            eprintln!("wrote {} files under {}", files.len(), cfg.output_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { instance, design, tol, sdr_objective } => {
            let inst = NetworkInstance::load(&instance)?;
            let bf: BeamformingDesign = serde_json::from_str(&fs::read_to_string(&design)?)?;
            let cert = certify(&inst, &bf, tol, sdr_objective)?;
            println!("{}", serde_json::to_string_pretty(&cert)?);
            Ok(if cert.report.feasible { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::DumpCone { instance, multipliers, out } => {
            let inst = NetworkInstance::load(&instance)?;
            let program = match multipliers {
                Some(mu) => build_inner_program(&inst, &mu)?,
                None => build_sdr_program(&inst)?,
            };
            emit(&program.to_json()?, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Generate { config, seed, gamma, out } => {
            let cfg = load_config(config.as_deref())?;
            let inst = generate_instance(seed.unwrap_or(cfg.seed), &cfg)?;
            let inst = match gamma {
                Some(g) => inst.with_sinr_target(g)?,
                None => inst,
            };
            emit(&inst.to_json()?, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Config => {
            println!("{}", paper_config().to_json()?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn write_solve_outputs(dir: &Path, outcome: &MethodOutcome, json: &str) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("outcome.json"), json)?;
    if let Some(bf) = &outcome.beamformers {
        fs::write(dir.join("design.json"), serde_json::to_string_pretty(bf)?)?;
    }
    if !outcome.trace.is_empty() {
        let mut w = csv::Writer::from_path(dir.join("trace.csv"))?;
        for row in &outcome.trace {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    Ok(())
}
