//! Projected dual ascent on the per-antenna power multipliers.
//!
//! The dual function `f(μ) = d(μ) − μᵀP̄`, where `d(μ)` is the optimal value
//! of the inner problem with objective weight `1 + μ_m` on antenna `m`, is
//! concave and differentiable with `∇f(μ)_m = p_m(μ) − P̄_m`. Three ascent
//! schemes are provided:
//!
//! * [`Algorithm::Pega`]: exact gradients, alternating Barzilai–Borwein
//!   stepsize, nonmonotone (GLL) backtracking.
//! * [`Algorithm::Piga`]: same control flow with inner tolerance
//!   `a·(i+1)^(−b)` and warm-started inner solves; the final point is
//!   re-solved at the exact tolerance.
//! * [`Algorithm::Psga`]: diminishing stepsize `α⁰(i+1)^(−0.1)`, no line
//!   search.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::conic::{self, SolveStatus, SolverSettings, WarmStart};
use crate::error::{Error, Result};
use crate::hermitian::hvec_diag_index;
use crate::network::{CovarianceDesign, NetworkInstance, TransmitDesign};
use crate::sdr::{build_inner_program, decode_design, reweight_inner, ConeProgram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Pega,
    Piga,
    Psga,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Pega, Algorithm::Piga, Algorithm::Psga];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Pega => "pega",
            Algorithm::Piga => "piga",
            Algorithm::Psga => "psga",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pega" => Ok(Algorithm::Pega),
            "piga" => Ok(Algorithm::Piga),
            "psga" => Ok(Algorithm::Psga),
            other => Err(Error::invalid(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    /// Termination threshold on `‖[μ + g]₊ − μ‖`.
    pub eps_out: f64,
    /// GLL window length `N`.
    pub window: usize,
    /// GLL sufficient-increase parameter `θ`.
    pub theta: f64,
    /// Backtracking factor `ρ`.
    pub rho: f64,
    pub alpha0: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Inner tolerance for exact gradients.
    pub exact_tolerance: f64,
    /// Inexact schedule `ε_in(i) = a·(i+1)^(−b)`.
    pub schedule_a: f64,
    pub schedule_b: f64,
    /// Diminishing stepsize exponent of the subgradient baseline.
    pub subgradient_exponent: f64,
    pub max_outer: usize,
    pub max_backtracks: usize,
    pub inner_max_iterations: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            eps_out: 1e-3,
            window: 10,
            theta: 1e-4,
            rho: 0.25,
            alpha0: 300.0,
            alpha_min: 1e-4,
            alpha_max: 1e12,
            exact_tolerance: 1e-8,
            schedule_a: 1e-3,
            schedule_b: 2.0,
            subgradient_exponent: 0.1,
            max_outer: 500,
            max_backtracks: 60,
            inner_max_iterations: 100,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.eps_out > 0.0
            && self.window >= 1
            && self.theta > 0.0
            && self.theta < 1.0
            && self.rho > 0.0
            && self.rho < 1.0
            && self.alpha0 > 0.0
            && self.alpha_min > 0.0
            && self.alpha_min < self.alpha_max
            && self.exact_tolerance > 0.0
            && self.schedule_a > 0.0
            && self.schedule_b >= 0.0
            && self.subgradient_exponent >= 0.0
            && self.inner_max_iterations > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("optimizer settings out of range"))
        }
    }

    /// Inner tolerance at outer iteration `i`. The inexact schedule is
    /// floored at the exact tolerance.
    pub fn inner_tolerance(&self, algorithm: Algorithm, i: usize) -> f64 {
        match algorithm {
            Algorithm::Pega | Algorithm::Psga => self.exact_tolerance,
            Algorithm::Piga => {
                (self.schedule_a * ((i + 1) as f64).powf(-self.schedule_b)).max(self.exact_tolerance)
            }
        }
    }

    /// Subgradient stepsize at iteration `i`.
    pub fn subgradient_step(&self, i: usize) -> f64 {
        self.alpha0 * ((i + 1) as f64).powf(-self.subgradient_exponent)
    }
}

/// Value, gradient, and inner solution of the dual function at one `μ`.
#[derive(Debug, Clone)]
pub struct DualEvaluation {
    pub multipliers: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Per-antenna power `p_m` of the inner solution.
    pub antenna_power: Vec<f64>,
    pub design: CovarianceDesign,
    pub inner_iterations: usize,
    pub warm_start: WarmStart,
}

/// Reusable inner-problem state: the program is built once and reweighted
/// for every new multiplier vector.
pub struct DualEvaluator<'a> {
    instance: &'a NetworkInstance,
    program: ConeProgram,
    inner_max_iterations: usize,
}

impl<'a> DualEvaluator<'a> {
    pub fn new(instance: &'a NetworkInstance) -> Result<Self> {
        let program = build_inner_program(instance, &vec![0.0; instance.num_bs()])?;
        Ok(Self {
            instance,
            program,
            inner_max_iterations: OptimizerSettings::default().inner_max_iterations,
        })
    }

    pub fn with_inner_max_iterations(mut self, n: usize) -> Self {
        self.inner_max_iterations = n;
        self
    }

    pub fn evaluate(
        &mut self,
        multipliers: &[f64],
        tolerance: f64,
        warm: Option<&WarmStart>,
    ) -> Result<DualEvaluation> {
        if multipliers.iter().any(|&m| m.is_nan() || m < 0.0) {
            return Err(Error::invalid("multipliers must be finite and nonnegative"));
        }
        reweight_inner(&mut self.program, multipliers)?;
        let settings = SolverSettings {
            tolerance,
            max_iterations: self.inner_max_iterations,
            warm_start: warm.cloned(),
            ..SolverSettings::default()
        };
        let res = conic::solve(&self.program, &settings);
        match res.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => return Err(Error::InstanceInfeasible),
            s => return Err(Error::NotConverged(s)),
        }
        let inst = self.instance;
        let (m, k) = (inst.num_bs(), inst.num_users());
        let block = m * m;
        let antenna_power: Vec<f64> = (0..m)
            .map(|a| {
                let d = hvec_diag_index(m, a);
                (0..=k).map(|blk| res.x[blk * block + d]).sum()
            })
            .collect();
        let budgets = inst.power_budgets();
        let gradient = antenna_power.iter().zip(budgets).map(|(p, b)| p - b).collect();
        let value = res.objective - multipliers.iter().zip(budgets).map(|(u, b)| u * b).sum::<f64>();
        Ok(DualEvaluation {
            multipliers: multipliers.to_vec(),
            value,
            gradient,
            antenna_power,
            design: decode_design(&self.program, &res.x)?,
            inner_iterations: res.iterations,
            warm_start: res.warm_start(),
        })
    }
}

/// One-shot dual evaluation (cold inner solve).
pub fn evaluate_dual(instance: &NetworkInstance, multipliers: &[f64], tolerance: f64) -> Result<DualEvaluation> {
    DualEvaluator::new(instance)?.evaluate(multipliers, tolerance, None)
}

/// Alternating Barzilai–Borwein stepsize for iteration `i ≥ 1`, clipped to
/// `[α_min, α_max]`. `dmu = μⁱ − μⁱ⁻¹`, `dg = gⁱ⁻¹ − gⁱ`.
pub fn abb_stepsize(i: usize, dmu: &[f64], dg: &[f64], alpha_min: f64, alpha_max: f64) -> f64 {
    let s: f64 = dmu.iter().zip(dg).map(|(a, b)| a * b).sum::<f64>().abs();
    let raw = if i.is_multiple_of(2) {
        ratio(dot(dmu, dmu), s)
    } else {
        ratio(s, dot(dg, dg))
    };
    raw.clamp(alpha_min, alpha_max)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 || !den.is_finite() {
        f64::INFINITY
    } else {
        num / den
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `max(μ + direction, 0)` componentwise.
pub fn project_step(mu: &[f64], direction: &[f64]) -> Vec<f64> {
    mu.iter().zip(direction).map(|(m, d)| (m + d).max(0.0)).collect()
}

/// Nonmonotone sufficient-increase test `f_new ≥ min(window) + θ gᵀΔμ`.
pub fn gll_accepts(f_new: f64, window: &[f64], gradient: &[f64], dmu: &[f64], theta: f64) -> bool {
    let reference = window.iter().copied().fold(f64::INFINITY, f64::min);
    f_new >= reference + theta * dot(gradient, dmu)
}

/// `‖[μ + g]₊ − μ‖₂`.
pub fn projected_residual(mu: &[f64], gradient: &[f64]) -> f64 {
    mu.iter()
        .zip(gradient)
        .map(|(m, g)| {
            let d = (m + g).max(0.0) - m;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

pub fn terminated(mu: &[f64], gradient: &[f64], eps_out: f64) -> bool {
    projected_residual(mu, gradient) <= eps_out
}

/// State of the ascent between outer iterations.
#[derive(Debug, Clone)]
pub struct DualState {
    pub multipliers: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Accepted dual values, newest last, at most `N` long.
    pub value_window: Vec<f64>,
    pub prev_multipliers: Option<Vec<f64>>,
    pub prev_gradient: Option<Vec<f64>>,
    pub alpha: f64,
    pub iteration: usize,
}

impl DualState {
    fn new(eval: &DualEvaluation, alpha0: f64) -> Self {
        Self {
            multipliers: eval.multipliers.clone(),
            value: eval.value,
            gradient: eval.gradient.clone(),
            value_window: vec![eval.value],
            prev_multipliers: None,
            prev_gradient: None,
            alpha: alpha0,
            iteration: 0,
        }
    }

    fn accept(&mut self, eval: &DualEvaluation, window: usize) {
        self.prev_multipliers = Some(std::mem::replace(&mut self.multipliers, eval.multipliers.clone()));
        self.prev_gradient = Some(std::mem::replace(&mut self.gradient, eval.gradient.clone()));
        self.value = eval.value;
        self.value_window.push(eval.value);
        if self.value_window.len() > window {
            self.value_window.remove(0);
        }
        self.iteration += 1;
    }

    /// ABB stepsize from the one-step memory.
    fn update_alpha(&mut self, s: &OptimizerSettings) {
        if let (Some(pm), Some(pg)) = (&self.prev_multipliers, &self.prev_gradient) {
            let dmu: Vec<f64> = self.multipliers.iter().zip(pm).map(|(a, b)| a - b).collect();
            let dg: Vec<f64> = pg.iter().zip(&self.gradient).map(|(a, b)| a - b).collect();
            self.alpha = abb_stepsize(self.iteration, &dmu, &dg, s.alpha_min, s.alpha_max);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
}

/// One row per visited iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub f: f64,
    pub projected_residual: f64,
    /// Backtracking factor of the step that produced this iterate.
    pub lambda: Option<f64>,
    /// Base stepsize of the step that produced this iterate.
    pub alpha: Option<f64>,
    /// Inner solver iterations spent reaching this iterate, rejected trials
    /// included.
    pub inner_iterations: usize,
    pub cumulative_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct OutcomeReport {
    pub algorithm: Algorithm,
    pub multipliers: Vec<f64>,
    /// `f` at the final multipliers, always from an inner solve at the exact
    /// tolerance (PIGA re-solves once after termination).
    pub dual_value: f64,
    pub gradient: Vec<f64>,
    pub antenna_power: Vec<f64>,
    pub design: CovarianceDesign,
    pub trace: Vec<TraceRow>,
    pub termination: Termination,
}

impl OutcomeReport {
    /// Iterates visited (μ⁰ included).
    pub fn outer_iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn inner_iterations(&self) -> usize {
        self.trace.iter().map(|r| r.inner_iterations).sum()
    }

    pub fn seconds(&self) -> f64 {
        self.trace.last().map_or(0.0, |r| r.cumulative_seconds)
    }

    /// Total transmit power of the returned design.
    pub fn objective(&self) -> f64 {
        self.design.total_power()
    }

    pub fn projected_residual(&self) -> f64 {
        projected_residual(&self.multipliers, &self.gradient)
    }

    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for row in &self.trace {
            wtr.serialize(row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Runs the chosen ascent from `μ⁰ = 0`.
pub fn run(instance: &NetworkInstance, settings: &OptimizerSettings, algorithm: Algorithm) -> Result<OutcomeReport> {
    settings.validate()?;
    let start = Instant::now();
    let mut evaluator = DualEvaluator::new(instance)?.with_inner_max_iterations(settings.inner_max_iterations);
    let warm_inner = algorithm == Algorithm::Piga;

    let mut current = evaluator.evaluate(
        &vec![0.0; instance.num_bs()],
        settings.inner_tolerance(algorithm, 0),
        None,
    )?;
    let mut state = DualState::new(&current, settings.alpha0);
    let mut trace = vec![TraceRow {
        iteration: 0,
        f: current.value,
        projected_residual: projected_residual(&state.multipliers, &state.gradient),
        lambda: None,
        alpha: None,
        inner_iterations: current.inner_iterations,
        cumulative_seconds: start.elapsed().as_secs_f64(),
    }];

    let termination = loop {
        let i = state.iteration;
        if terminated(&state.multipliers, &state.gradient, settings.eps_out) {
            break Termination::Converged;
        }
        if i + 1 >= settings.max_outer {
            break Termination::MaxIterations;
        }
        let tol = settings.inner_tolerance(algorithm, i);
        let mut spent = 0;
        let (next, lambda, alpha) = match algorithm {
            Algorithm::Psga => {
                let alpha = settings.subgradient_step(i);
                let step: Vec<f64> = state.gradient.iter().map(|g| alpha * g).collect();
                let mu = project_step(&state.multipliers, &step);
                let e = evaluator.evaluate(&mu, tol, None)?;
                spent += e.inner_iterations;
                (e, 1.0, alpha)
            }
            Algorithm::Pega | Algorithm::Piga => {
                let alpha = state.alpha;
                let mut lambda = 1.0;
                let mut accepted = None;
                for _ in 0..=settings.max_backtracks {
                    let step: Vec<f64> = state.gradient.iter().map(|g| lambda * alpha * g).collect();
                    let mu = project_step(&state.multipliers, &step);
                    let warm = warm_inner.then_some(&current.warm_start);
                    let e = evaluator.evaluate(&mu, tol, warm)?;
                    spent += e.inner_iterations;
                    let dmu: Vec<f64> = mu.iter().zip(&state.multipliers).map(|(a, b)| a - b).collect();
                    if gll_accepts(e.value, &state.value_window, &state.gradient, &dmu, settings.theta) {
                        accepted = Some(e);
                        break;
                    }
                    lambda *= settings.rho;
                }
                let Some(e) = accepted else {
                    return Err(Error::LineSearchFailed {
                        iteration: i,
                        backtracks: settings.max_backtracks,
                    });
                };
                (e, lambda, alpha)
            }
        };
        state.accept(&next, settings.window);
        if algorithm != Algorithm::Psga {
            state.update_alpha(settings);
        }
        current = next;
        trace.push(TraceRow {
            iteration: state.iteration,
            f: current.value,
            projected_residual: projected_residual(&state.multipliers, &state.gradient),
            lambda: Some(lambda),
            alpha: Some(alpha),
            inner_iterations: spent,
            cumulative_seconds: start.elapsed().as_secs_f64(),
        });
    };

    // An inexact inner solve can overestimate f; re-solve at the final μ so the
    // reported value is a valid dual bound. Its cost goes on the last row.
    let last_tol = settings.inner_tolerance(algorithm, state.iteration.saturating_sub(1));
    if algorithm == Algorithm::Piga && last_tol > settings.exact_tolerance {
        let e = evaluator.evaluate(&state.multipliers, settings.exact_tolerance, Some(&current.warm_start))?;
        if let Some(last) = trace.last_mut() {
            last.inner_iterations += e.inner_iterations;
        }
        current = e;
    }

    Ok(OutcomeReport {
        algorithm,
        multipliers: state.multipliers,
        dual_value: current.value,
        gradient: current.gradient,
        antenna_power: current.antenna_power,
        design: current.design,
        trace,
        termination,
    })
}
