//! Cone-program builders for the semidefinite relaxation and for the inner
//! problem with per-antenna power rows moved into the objective.
//!
//! Variable layout: `V_k` occupies `hermitian_vec` coordinates
//! `k·M² .. (k+1)·M²`, and `Q` follows at `K·M²`.
//!
//! Constraint rows:
//! * SINR `k` (scalar): `(1/γ̄_k) hᴴV_k h − Σ_{j≠k} hᴴV_j h − hᴴQh − σ_k² ≥ 0`.
//! * fronthaul `m` (LMI of order `M − m`): `2^{C̄_m} Q[m.., m..] − p_m E₁₁ ⪰ 0`
//!   with `p_m = Σ_k V_k^{(m,m)} + Q^{(m,m)}`; the last BS gives a scalar row.
//! * power budget `m` (scalar): `P̄_m − p_m ≥ 0`, only in the full relaxation.

mod program;

pub use program::{
    BlockLabel, BlockSpec, Cone, ConeBlock, ConeProgram, ProblemShape, ProgramKind, SparseMatrix,
};
pub(crate) use program::psd_block_matrix;

use serde::Serialize;

use crate::conic::{SolveResult, SolveStatus};
use crate::error::{Error, Result};
use crate::hermitian::{eigh, hermitian_unvec, hermitian_vec, hvec_diag_index, HermitianMatrix};
use crate::network::{CovarianceDesign, NetworkInstance};

/// Eigenvalues of recovered blocks below this are clipped to zero.
const CLIP_BELOW: f64 = -1e-9;

pub fn build_sdr_program(inst: &NetworkInstance) -> Result<ConeProgram> {
    let weights = vec![1.0; inst.num_bs()];
    build(inst, &weights, true, ProgramKind::Sdr)
}

pub fn build_inner_program(inst: &NetworkInstance, multipliers: &[f64]) -> Result<ConeProgram> {
    check_multipliers(inst.num_bs(), multipliers)?;
    let weights: Vec<f64> = multipliers.iter().map(|m| 1.0 + m).collect();
    build(
        inst,
        &weights,
        false,
        ProgramKind::Inner {
            multipliers: multipliers.to_vec(),
        },
    )
}

/// Replaces the objective of an inner program with the one for new
/// multipliers. Constraint data is untouched.
pub fn reweight_inner(program: &mut ConeProgram, multipliers: &[f64]) -> Result<()> {
    let Some(shape) = program.shape else {
        return Err(Error::invalid("program was not built from a network instance"));
    };
    if !matches!(program.kind, ProgramKind::Inner { .. }) {
        return Err(Error::invalid("only inner programs can be reweighted"));
    }
    check_multipliers(shape.num_bs, multipliers)?;
    let weights: Vec<f64> = multipliers.iter().map(|m| 1.0 + m).collect();
    program.objective = weighted_objective(shape, &weights);
    program.kind = ProgramKind::Inner {
        multipliers: multipliers.to_vec(),
    };
    Ok(())
}

fn check_multipliers(num_bs: usize, mu: &[f64]) -> Result<()> {
    if mu.len() != num_bs {
        return Err(Error::DimensionMismatch {
            what: "multiplier vector",
            expected: num_bs,
            got: mu.len(),
        });
    }
    if mu.iter().any(|m| !m.is_finite() || *m < 0.0) {
        return Err(Error::invalid("multipliers must be finite and nonnegative"));
    }
    Ok(())
}

fn block_len(shape: ProblemShape) -> usize {
    shape.num_bs * shape.num_bs
}

fn user_offset(shape: ProblemShape, k: usize) -> usize {
    k * block_len(shape)
}

fn q_offset(shape: ProblemShape) -> usize {
    shape.num_users * block_len(shape)
}

fn num_vars(shape: ProblemShape) -> usize {
    (shape.num_users + 1) * block_len(shape)
}

fn weighted_objective(shape: ProblemShape, weights: &[f64]) -> Vec<f64> {
    let n = shape.num_bs;
    let mut c = vec![0.0; num_vars(shape)];
    for blk in 0..=shape.num_users {
        let off = blk * block_len(shape);
        for (m, w) in weights.iter().enumerate() {
            c[off + hvec_diag_index(n, m)] = *w;
        }
    }
    c
}

/// `(col, coeff)` pairs of `p_m = Σ_k V_k^{(m,m)} + Q^{(m,m)}`.
fn antenna_power_terms(shape: ProblemShape, m: usize) -> impl Iterator<Item = usize> {
    let d = hvec_diag_index(shape.num_bs, m);
    (0..=shape.num_users).map(move |blk| blk * block_len(shape) + d)
}

fn build(
    inst: &NetworkInstance,
    weights: &[f64],
    with_power_rows: bool,
    kind: ProgramKind,
) -> Result<ConeProgram> {
    let shape = ProblemShape {
        num_bs: inst.num_bs(),
        num_users: inst.num_users(),
    };
    let (n, k_users) = (shape.num_bs, shape.num_users);
    let cov_cone = if n == 1 { Cone::nonneg(1) } else { Cone::psd(n, true) };

    let mut specs = Vec::new();
    for k in 0..k_users {
        specs.push(BlockSpec::variable(
            cov_cone,
            BlockLabel::UserCovariance(k),
            user_offset(shape, k),
        ));
    }
    specs.push(BlockSpec::variable(
        cov_cone,
        BlockLabel::CompressionCovariance,
        q_offset(shape),
    ));

    for k in 0..k_users {
        let hk = hermitian_vec(&HermitianMatrix::outer(inst.channel(k)));
        let gamma = inst.sinr_targets()[k];
        let mut rows = Vec::new();
        for blk in 0..=k_users {
            let coef = if blk == k { 1.0 / gamma } else { -1.0 };
            let off = blk * block_len(shape);
            for (i, &h) in hk.iter().enumerate() {
                if h != 0.0 {
                    rows.push((0, off + i, -coef * h));
                }
            }
        }
        specs.push(BlockSpec::constraint(
            Cone::nonneg(1),
            BlockLabel::Sinr(k),
            rows,
            vec![-inst.noise_powers()[k]],
        ));
    }

    let qoff = q_offset(shape);
    for m in 0..n {
        let order = n - m;
        let scale = 2f64.powf(inst.fronthaul_caps()[m]);
        let mut rows = Vec::new();
        // slack entry (i, j) of the LMI maps onto Q entry (m + i, m + j)
        let mut local = 0;
        for i in 0..order {
            rows.push((local, qoff + hvec_diag_index(n, m + i), -scale));
            local += 1;
            for j in i + 1..order {
                let (re, im) = crate::hermitian::hvec_offdiag_index(n, m + i, m + j);
                rows.push((local, qoff + re, -scale));
                rows.push((local + 1, qoff + im, -scale));
                local += 2;
            }
        }
        debug_assert_eq!(local, order * order);
        for col in antenna_power_terms(shape, m) {
            rows.push((0, col, 1.0));
        }
        let cone = if order == 1 { Cone::nonneg(1) } else { Cone::psd(order, true) };
        specs.push(BlockSpec::constraint(
            cone,
            BlockLabel::Fronthaul(m),
            rows,
            vec![0.0; order * order],
        ));
    }

    if with_power_rows {
        for m in 0..n {
            let rows = antenna_power_terms(shape, m).map(|col| (0, col, 1.0)).collect();
            specs.push(BlockSpec::constraint(
                Cone::nonneg(1),
                BlockLabel::PowerBudget(m),
                rows,
                vec![inst.power_budgets()[m]],
            ));
        }
    }

    let mut p = ConeProgram::assemble(
        num_vars(shape),
        weighted_objective(shape, weights),
        specs,
        kind,
        Some(shape),
    )?;
    p.normalize_rows();
    Ok(p)
}

/// Variable vector of a covariance design in the builders' layout.
pub fn encode_design(program: &ConeProgram, design: &CovarianceDesign) -> Result<Vec<f64>> {
    let shape = program
        .shape
        .ok_or_else(|| Error::invalid("program was not built from a network instance"))?;
    if design.covariances.len() != shape.num_users || design.compression_cov.order() != shape.num_bs {
        return Err(Error::invalid("design does not match program dimensions"));
    }
    let mut x = Vec::with_capacity(num_vars(shape));
    for v in &design.covariances {
        x.extend(hermitian_vec(v));
    }
    x.extend(hermitian_vec(&design.compression_cov));
    Ok(x)
}

/// Reassembles the Hermitian blocks of `x`, clipping eigenvalues below
/// `−1e-9` to zero.
pub fn decode_design(program: &ConeProgram, x: &[f64]) -> Result<CovarianceDesign> {
    let shape = program
        .shape
        .ok_or_else(|| Error::invalid("program was not built from a network instance"))?;
    if x.len() != num_vars(shape) {
        return Err(Error::DimensionMismatch {
            what: "solution vector",
            expected: num_vars(shape),
            got: x.len(),
        });
    }
    let n = shape.num_bs;
    let len = block_len(shape);
    let block = |blk: usize| -> Result<HermitianMatrix> {
        let h = hermitian_unvec(&x[blk * len..(blk + 1) * len], n)?;
        clip_negative(h)
    };
    Ok(CovarianceDesign {
        covariances: (0..shape.num_users).map(block).collect::<Result<_>>()?,
        compression_cov: block(shape.num_users)?,
    })
}

fn clip_negative(h: HermitianMatrix) -> Result<HermitianMatrix> {
    let mut e = eigh(&h)?;
    if e.values.iter().all(|&l| l >= CLIP_BELOW) {
        return Ok(h);
    }
    for l in e.values.iter_mut() {
        if *l < CLIP_BELOW {
            *l = 0.0;
        }
    }
    Ok(HermitianMatrix::symmetrized(e.reconstruct()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Multiplier {
    Scalar(f64),
    Vector(Vec<f64>),
    Matrix(HermitianMatrix),
}

impl Multiplier {
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Multiplier::Scalar(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionExtract {
    pub design: CovarianceDesign,
    /// `cᵀx` in physical (unscaled) units.
    pub objective_value: f64,
    pub dual_multipliers: Vec<(BlockLabel, Multiplier)>,
}

impl SolutionExtract {
    pub fn multiplier(&self, label: &BlockLabel) -> Option<&Multiplier> {
        self.dual_multipliers
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, m)| m)
    }
}

pub fn extract_solution(program: &ConeProgram, result: &SolveResult) -> Result<SolutionExtract> {
    if result.status != SolveStatus::Optimal {
        return Err(Error::NotConverged(result.status));
    }
    let design = decode_design(program, &result.x)?;
    let objective_value = program.objective_value(&result.x);
    let dual_multipliers = unscaled_multipliers(program, &result.y);
    Ok(SolutionExtract {
        design,
        objective_value,
        dual_multipliers,
    })
}

/// Per-block dual variables in physical units (scaled rows divided back).
pub fn unscaled_multipliers(program: &ConeProgram, y: &[f64]) -> Vec<(BlockLabel, Multiplier)> {
    program
        .blocks
        .iter()
        .map(|blk| {
            let vals: Vec<f64> = blk.rows().map(|r| y[r] / program.row_scale[r]).collect();
            let m = match blk.cone {
                Cone::Nonneg { size: 1 } => Multiplier::Scalar(vals[0]),
                Cone::Nonneg { .. } => Multiplier::Vector(vals),
                Cone::Psd { order, complex } => Multiplier::Matrix(psd_block_matrix(&vals, order, complex)),
            };
            (blk.label.clone(), m)
        })
        .collect()
}
