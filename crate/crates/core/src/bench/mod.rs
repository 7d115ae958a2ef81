//! Experiment configuration, random instance generation, single-method runs,
//! and Monte-Carlo sweeps.

mod sweep;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::conic::{solve, SolveStatus, SolverSettings};
use crate::dual::{self, Algorithm, OptimizerSettings, Termination, TraceRow};
use crate::error::{Error, Result};
use crate::hermitian::{ComplexVector, C64};
use crate::network::{BeamformingDesign, CovarianceDesign, NetworkInstance, TransmitDesign};
use crate::recovery::{certify, extract_beamformers, Certificate, TightnessDiagnostics};
use crate::sdr::{build_sdr_program, extract_solution};

pub use sweep::{run_sweep, write_sweep, AggregateRow, ResultRecord, SweepOutput};

/// Environment variable holding the default sweep worker count.
pub const WORKERS_ENV: &str = "JBCP_WORKERS";

/// A solution method: one of the dual ascents or the direct relaxation solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pega,
    Piga,
    Psga,
    Sdr,
}

impl Method {
    pub fn algorithm(self) -> Option<Algorithm> {
        match self {
            Method::Pega => Some(Algorithm::Pega),
            Method::Piga => Some(Algorithm::Piga),
            Method::Psga => Some(Algorithm::Psga),
            Method::Sdr => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Pega => "pega",
            Method::Piga => "piga",
            Method::Psga => "psga",
            Method::Sdr => "sdr",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sdr" => Ok(Method::Sdr),
            other => other.parse::<Algorithm>().map(|a| match a {
                Algorithm::Pega => Method::Pega,
                Algorithm::Piga => Method::Piga,
                Algorithm::Psga => Method::Psga,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub num_bs: usize,
    pub num_users: usize,
    /// Base channel seed; Monte-Carlo run `r` uses `seed + r`.
    pub seed: u64,
    /// SINR targets swept (applied to every user).
    pub sinr_targets: Vec<f64>,
    /// Fronthaul capacity per BS in bits.
    pub fronthaul_caps: Vec<f64>,
    pub noise_powers: Vec<f64>,
    pub power_budgets: Vec<f64>,
    pub algorithms: Vec<Method>,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
    pub runs: usize,
    pub output_dir: PathBuf,
    /// Constraint tolerance for the feasibility verdict and the active set.
    #[serde(default = "default_feasibility_tolerance")]
    pub feasibility_tolerance: f64,
    /// Write one per-iteration trace CSV per dual run.
    #[serde(default = "default_true")]
    pub write_traces: bool,
}

fn default_feasibility_tolerance() -> f64 {
    1e-3
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |what: &str, v: &[f64]| -> Result<()> {
            if v.iter().all(|x| x.is_finite() && *x > 0.0) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must be positive")))
            }
        };
        if self.num_bs == 0 || self.num_users == 0 {
            return Err(Error::invalid("network needs at least one BS and one user"));
        }
        if self.sinr_targets.is_empty() {
            return Err(Error::invalid("SINR sweep list is empty"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::invalid("algorithm list is empty"));
        }
        if self.runs == 0 {
            return Err(Error::invalid("run count must be positive"));
        }
        for (what, v, n) in [
            ("fronthaul_caps", &self.fronthaul_caps, self.num_bs),
            ("power_budgets", &self.power_budgets, self.num_bs),
            ("noise_powers", &self.noise_powers, self.num_users),
        ] {
            if v.len() != n {
                return Err(Error::invalid(format!("{what} needs {n} entries, got {}", v.len())));
            }
            positive(what, v)?;
        }
        positive("sinr_targets", &self.sinr_targets)?;
        if self.feasibility_tolerance.is_nan() || self.feasibility_tolerance <= 0.0 {
            return Err(Error::invalid("feasibility tolerance must be positive"));
        }
        self.optimizer.validate()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// The reference experiment: 8 BSs, 10 users, `C̄ = log₂ 1.1`, unit noise,
/// `γ ∈ {0.03, …, 0.06}`, budgets 8.5 except `P̄₁ = 8.5e-3`, 200 runs.
pub fn paper_config() -> ExperimentConfig {
    let (m, k) = (8, 10);
    let mut power_budgets = vec![8.5; m];
    power_budgets[0] = 8.5e-3;
    ExperimentConfig {
        num_bs: m,
        num_users: k,
        seed: 0,
        sinr_targets: vec![0.03, 0.04, 0.05, 0.06],
        fronthaul_caps: vec![1.1f64.log2(); m],
        noise_powers: vec![1.0; k],
        power_budgets,
        algorithms: vec![Method::Pega, Method::Piga, Method::Psga, Method::Sdr],
        optimizer: OptimizerSettings::default(),
        runs: 200,
        output_dir: PathBuf::from("results"),
        feasibility_tolerance: default_feasibility_tolerance(),
        write_traces: true,
    }
}

/// Draws i.i.d. `CN(0, 1)` channels (real and imaginary parts each with
/// variance ½) from a ChaCha stream seeded by `seed`. Every user gets the
/// first SINR target of the sweep.
pub fn generate_instance(seed: u64, config: &ExperimentConfig) -> Result<NetworkInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid normal");
    let channels: Vec<ComplexVector> = (0..config.num_users)
        .map(|_| {
            ComplexVector::from_fn(config.num_bs, |_, _| {
                let re = normal.sample(&mut rng);
                let im = normal.sample(&mut rng);
                C64::new(re, im)
            })
        })
        .collect();
    let gamma = *config
        .sinr_targets
        .first()
        .ok_or_else(|| Error::invalid("SINR sweep list is empty"))?;
    NetworkInstance::new(
        channels,
        config.noise_powers.clone(),
        vec![gamma; config.num_users],
        config.fronthaul_caps.clone(),
        config.power_budgets.clone(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    /// Dual ascent stopped at the outer-iteration cap.
    MaxIterations,
    /// The relaxation (hence the instance) is infeasible.
    Infeasible,
    Failed,
}

impl RunStatus {
    pub fn name(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::MaxIterations => "max_iterations",
            RunStatus::Infeasible => "infeasible",
            RunStatus::Failed => "failed",
        }
    }
}

/// Everything one method produced on one instance.
#[derive(Debug, Clone, Serialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub status: RunStatus,
    pub message: Option<String>,
    /// Dual value for the ascents, relaxation optimum for the direct solve.
    pub objective: f64,
    /// Total power of the returned design.
    pub design_power: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub wall_seconds: f64,
    pub multipliers: Option<Vec<f64>>,
    pub antenna_power: Vec<f64>,
    pub design: Option<CovarianceDesign>,
    pub beamformers: Option<BeamformingDesign>,
    pub tightness: Option<TightnessDiagnostics>,
    pub certificate: Option<Certificate>,
    /// BSs whose budget slack is at most the feasibility tolerance.
    pub active_papc: Vec<usize>,
    /// Constraints met at the tolerance and every covariance rank one.
    pub feasible: bool,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

impl MethodOutcome {
    fn failed(method: Method, status: RunStatus, message: String, seconds: f64) -> Self {
        Self {
            method,
            status,
            message: Some(message),
            objective: f64::NAN,
            design_power: f64::NAN,
            outer_iterations: 0,
            inner_iterations: 0,
            wall_seconds: seconds,
            multipliers: None,
            antenna_power: vec![],
            design: None,
            beamformers: None,
            tightness: None,
            certificate: None,
            active_papc: vec![],
            feasible: false,
            trace: vec![],
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }
}

/// Runs one method on one instance; failures become a status, never an
/// error.
pub fn run_method(
    instance: &NetworkInstance,
    method: Method,
    settings: &OptimizerSettings,
    feasibility_tolerance: f64,
) -> MethodOutcome {
    let start = Instant::now();
    let result = match method.algorithm() {
        Some(alg) => run_dual(instance, alg, settings),
        None => run_sdr(instance, settings),
    };
    let seconds = start.elapsed().as_secs_f64();
    let raw = match result {
        Ok(raw) => raw,
        Err(Error::InstanceInfeasible) | Err(Error::NotConverged(SolveStatus::Infeasible)) => {
            return MethodOutcome::failed(method, RunStatus::Infeasible, "instance infeasible".into(), seconds)
        }
        Err(e) => return MethodOutcome::failed(method, RunStatus::Failed, e.to_string(), seconds),
    };
    finish(instance, method, raw, feasibility_tolerance, seconds)
}

struct RawOutcome {
    objective: f64,
    outer: usize,
    inner: usize,
    multipliers: Option<Vec<f64>>,
    design: CovarianceDesign,
    termination: Termination,
    trace: Vec<TraceRow>,
}

fn run_dual(instance: &NetworkInstance, alg: Algorithm, settings: &OptimizerSettings) -> Result<RawOutcome> {
    let o = dual::run(instance, settings, alg)?;
    Ok(RawOutcome {
        objective: o.dual_value,
        outer: o.outer_iterations(),
        inner: o.inner_iterations(),
        multipliers: Some(o.multipliers),
        design: o.design,
        termination: o.termination,
        trace: o.trace,
    })
}

fn run_sdr(instance: &NetworkInstance, settings: &OptimizerSettings) -> Result<RawOutcome> {
    let program = build_sdr_program(instance)?;
    let solver = SolverSettings {
        tolerance: settings.exact_tolerance,
        max_iterations: settings.inner_max_iterations,
        ..SolverSettings::default()
    };
    let res = solve(&program, &solver);
    let sol = extract_solution(&program, &res)?;
    Ok(RawOutcome {
        objective: sol.objective_value,
        outer: 0,
        inner: res.iterations,
        multipliers: None,
        design: sol.design,
        termination: Termination::Converged,
        trace: vec![],
    })
}

fn finish(
    instance: &NetworkInstance,
    method: Method,
    raw: RawOutcome,
    tol: f64,
    seconds: f64,
) -> MethodOutcome {
    let antenna_power: Vec<f64> = (0..instance.num_bs())
        .map(|m| raw.design.signal_power_at(m) + raw.design.compression_cov.diag(m))
        .collect();
    let active_papc = antenna_power
        .iter()
        .zip(instance.power_budgets())
        .enumerate()
        .filter(|(_, (p, b))| *b - *p <= tol)
        .map(|(m, _)| m)
        .collect();
    let status = match raw.termination {
        Termination::Converged => RunStatus::Ok,
        Termination::MaxIterations => RunStatus::MaxIterations,
    };
    let mut out = MethodOutcome {
        method,
        status,
        message: None,
        objective: raw.objective,
        design_power: raw.design.total_power(),
        outer_iterations: raw.outer,
        inner_iterations: raw.inner,
        wall_seconds: seconds,
        multipliers: raw.multipliers,
        antenna_power,
        design: None,
        beamformers: None,
        tightness: None,
        certificate: None,
        active_papc,
        feasible: false,
        trace: raw.trace,
    };
    match extract_beamformers(instance, &raw.design) {
        Ok((bf, diag)) => {
            match certify(instance, &bf, tol, Some(raw.objective)) {
                Ok(cert) => {
                    out.feasible = status == RunStatus::Ok && cert.report.feasible && diag.is_tight();
                    out.certificate = Some(cert);
                }
                Err(e) => out.message = Some(e.to_string()),
            }
            out.beamformers = Some(bf);
            out.tightness = Some(diag);
        }
        Err(e) => out.message = Some(e.to_string()),
    }
    out.design = Some(raw.design);
    out
}

/// Worker count from an explicit value, else the environment, else all
/// cores.
pub fn resolve_workers(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|s| s.parse().ok()))
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}
