//! Residual-controlled solver for [`ConeProgram`]s.
//!
//! The backend is a primal-dual interior-point method (HKM direction,
//! Mehrotra predictor-corrector) run on an internal block form in which
//! every variable block of the program becomes a cone variable and every
//! constraint block a slack cone variable tied to the variables by
//! equality rows. Complex PSD blocks live in their real symmetric
//! embedding of doubled order.
//!
//! Termination is decided on the program-level KKT residuals of
//! [`kkt_residuals`], so the reported numbers are the ones callers see.

mod ipm;

use serde::{Deserialize, Serialize};

use crate::sdr::ConeProgram;

pub use ipm::solve_cold;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// All three KKT residuals at or below the requested tolerance.
    Optimal,
    /// Iteration budget exhausted (or progress stalled) before convergence.
    MaxIterations,
    /// A primal infeasibility certificate (improving dual ray) was found.
    Infeasible,
    /// A dual infeasibility certificate (improving primal ray) was found.
    Unbounded,
}

/// Primal point and dual point from an earlier solve of a program with the
/// same constraint data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmStart {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SolverSettings {
    /// Target for each relative KKT residual.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub warm_start: Option<WarmStart>,
    /// Threshold on the normalized certificate residual.
    pub infeasibility_tolerance: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 100,
            warm_start: None,
            infeasibility_tolerance: 1e-7,
        }
    }
}

impl SolverSettings {
    pub fn with_tolerance(tolerance: f64) -> Self {
        Self {
            tolerance,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x: Vec<f64>,
    /// Dual variable per program row, in the dual cone.
    pub y: Vec<f64>,
    pub status: SolveStatus,
    pub residuals: KktResiduals,
    /// Interior-point iterations, including any discarded warm-start attempt.
    pub iterations: usize,
    pub objective: f64,
}

impl SolveResult {
    pub fn warm_start(&self) -> WarmStart {
        WarmStart {
            x: self.x.clone(),
            y: self.y.clone(),
        }
    }
}

/// Solves `program`. A warm start that fails to reach the optimal status is
/// discarded and the solve is repeated from the default starting point, so
/// a warm start never yields a worse status than a cold solve.
pub fn solve(program: &ConeProgram, settings: &SolverSettings) -> SolveResult {
    let Some(ws) = settings.warm_start.as_ref() else {
        return ipm::solve_with(program, settings, None);
    };
    if ws.x.len() != program.num_vars || ws.y.len() != program.num_rows() {
        return ipm::solve_with(program, settings, None);
    }
    let warm = ipm::solve_with(program, settings, Some(ws));
    if warm.status == SolveStatus::Optimal {
        return warm;
    }
    let mut cold = ipm::solve_with(program, settings, None);
    cold.iterations += warm.iterations;
    cold
}

/// Relative KKT residuals of `(x, y)` for
/// `min cᵀx  s.t. b − Ax ∈ K` with dual `max −bᵀy  s.t. Aᵀy + c = 0, y ∈ K*`:
///
/// * primal: `dist(b − Ax, K) / (1 + ‖b‖)`
/// * dual: `(‖Aᵀy + c‖ + dist(y, K*)) / (1 + ‖c‖)`
/// * gap: `|cᵀx + bᵀy| / (1 + |cᵀx| + |bᵀy|)`
pub fn kkt_residuals(program: &ConeProgram, x: &[f64], y: &[f64]) -> KktResiduals {
    let s = program.slack(x);
    let mut primal_sq = 0.0;
    let mut dual_cone_sq = 0.0;
    for blk in &program.blocks {
        let r = blk.rows();
        primal_sq += blk.cone.distance(&s[r.clone()]).powi(2);
        dual_cone_sq += blk.cone.distance(&y[r]).powi(2);
    }
    let aty = program.a.matvec_transpose(y);
    let dual_eq = aty
        .iter()
        .zip(&program.objective)
        .map(|(a, c)| (a + c) * (a + c))
        .sum::<f64>()
        .sqrt();
    let cx = program.objective_value(x);
    let by: f64 = program.b.iter().zip(y).map(|(b, y)| b * y).sum();
    let nb = norm(&program.b);
    let nc = norm(&program.objective);
    KktResiduals {
        primal: primal_sq.sqrt() / (1.0 + nb),
        dual: (dual_eq + dual_cone_sq.sqrt()) / (1.0 + nc),
        gap: (cx + by).abs() / (1.0 + cx.abs() + by.abs()),
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
