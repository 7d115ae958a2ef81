//! Rank-one beamformer extraction from relaxation solutions and end-to-end
//! certification of the extracted design.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::{eigh, ComplexVector, HermitianMatrix, C64};
use crate::network::{check_feasibility, BeamformingDesign, CovarianceDesign, FeasibilityReport, NetworkInstance, TransmitDesign};

/// Largest `λ₂/λ₁` for which a covariance counts as rank one.
pub const TIGHTNESS_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessDiagnostics {
    /// `λ₂/λ₁` of each `V_k` (0 for single-antenna networks).
    pub eigenvalue_ratios: Vec<f64>,
    /// `‖V_k − v_k v_kᴴ‖_F / ‖V_k‖_F`.
    pub extraction_residuals: Vec<f64>,
    /// `Σ_{j≥2} λ_j(V_k)` summed over users: bounds the objective change.
    pub discarded_power: f64,
}

impl TightnessDiagnostics {
    pub fn max_ratio(&self) -> f64 {
        self.eigenvalue_ratios.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_tight(&self) -> bool {
        self.max_ratio() <= TIGHTNESS_THRESHOLD
    }
}

/// `v_k = √λ₁ u₁` from each `V_k`, with the phase chosen so `h_kᴴ v_k` is
/// real and nonnegative. `Q` passes through.
pub fn extract_beamformers(
    instance: &NetworkInstance,
    design: &CovarianceDesign,
) -> Result<(BeamformingDesign, TightnessDiagnostics)> {
    if design.covariances.len() != instance.num_users() || design.compression_cov.order() != instance.num_bs() {
        return Err(Error::invalid("design does not match instance dimensions"));
    }
    let mut beamformers = Vec::with_capacity(design.covariances.len());
    let mut ratios = Vec::with_capacity(design.covariances.len());
    let mut residuals = Vec::with_capacity(design.covariances.len());
    let mut discarded = 0.0;
    for (k, vk) in design.covariances.iter().enumerate() {
        let e = eigh(vk)?;
        let l1 = e.values[0];
        if l1.is_nan() || l1 <= 0.0 {
            return Err(Error::DegenerateUser(k));
        }
        let l2 = e.values.get(1).copied().unwrap_or(0.0).max(0.0);
        ratios.push((l2 / l1).min(1.0));
        discarded += e.values[1..].iter().map(|l| l.max(0.0)).sum::<f64>();
        let v: ComplexVector = e.vectors.column(0) * C64::new(l1.sqrt(), 0.0);
        let v = fix_phase(v, instance.channel(k));
        let rank_one = HermitianMatrix::outer(&v);
        residuals.push(vk.sub(&rank_one).frobenius_norm() / vk.frobenius_norm());
        beamformers.push(v);
    }
    Ok((
        BeamformingDesign {
            beamformers,
            compression_cov: design.compression_cov.clone(),
        },
        TightnessDiagnostics {
            eigenvalue_ratios: ratios,
            extraction_residuals: residuals,
            discarded_power: discarded,
        },
    ))
}

/// Rotates `v` so that `hᴴv ≥ 0`; if `hᴴv` vanishes, the first nonzero
/// entry of `v` is made real positive instead.
fn fix_phase(v: ComplexVector, h: &ComplexVector) -> ComplexVector {
    let z = h.dotc(&v);
    let scale = h.norm() * v.norm();
    let anchor = if z.norm() > 1e-14 * scale {
        z
    } else {
        match v.iter().find(|c| c.norm() > 0.0) {
            Some(&c) => c,
            None => return v,
        }
    };
    let rot = anchor.conj() / anchor.norm();
    v * rot
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub report: FeasibilityReport,
    /// `Σ‖v_k‖² + tr Q`.
    pub objective: f64,
    pub sdr_objective: Option<f64>,
    /// `|objective − sdr_objective| / max(1, |sdr_objective|)`.
    pub relative_gap: Option<f64>,
}

/// Re-evaluates every constraint on the extracted vectors and compares the
/// objective with the relaxation value when one is given.
pub fn certify(
    instance: &NetworkInstance,
    design: &BeamformingDesign,
    tol: f64,
    sdr_objective: Option<f64>,
) -> Result<Certificate> {
    let report = check_feasibility(instance, design, tol)?;
    let objective = design.total_power();
    let relative_gap = sdr_objective.map(|s| (objective - s).abs() / s.abs().max(1.0));
    Ok(Certificate {
        report,
        objective,
        sdr_objective,
        relative_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{solve, SolveStatus, SolverSettings};
    use crate::network::complex_vec;
    use crate::sdr::{build_sdr_program, extract_solution};
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn instance(channels: Vec<ComplexVector>, gamma: f64, cap: f64, budget: f64) -> NetworkInstance {
        let (k, m) = (channels.len(), channels[0].len());
        NetworkInstance::new(channels, vec![1.0; k], vec![gamma; k], vec![cap; m], vec![budget; m]).unwrap()
    }

    fn random_instance(seed: u64) -> NetworkInstance {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let chans = (0..2)
            .map(|_| ComplexVector::from_fn(3, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
            .collect();
        instance(chans, 0.2, 1.0, 20.0)
    }

    #[test]
    fn exact_rank_one_with_phase_from_channel() {
        let inst = instance(vec![complex_vec(&[(1.0, 0.0), (0.0, 0.0)])], 0.5, 1.0, 10.0);
        let v = HermitianMatrix::from_real(&DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])).unwrap();
        let d = CovarianceDesign {
            covariances: vec![v],
            compression_cov: HermitianMatrix::zeros(2),
        };
        let (bf, diag) = extract_beamformers(&inst, &d).unwrap();
        let b = &bf.beamformers[0];
        assert!((b[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((b[1] - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(diag.eigenvalue_ratios[0] < 1e-12);
    }

    #[test]
    fn zero_inner_product_falls_back_to_first_entry() {
        let inst = instance(vec![complex_vec(&[(1.0, 0.0), (0.0, 0.0)])], 0.5, 1.0, 10.0);
        let v = complex_vec(&[(0.0, 0.0), (0.0, 2.0)]);
        let d = CovarianceDesign {
            covariances: vec![HermitianMatrix::outer(&v)],
            compression_cov: HermitianMatrix::zeros(2),
        };
        let (bf, _) = extract_beamformers(&inst, &d).unwrap();
        let b = &bf.beamformers[0];
        assert!(b[0].norm() < 1e-12);
        assert!((b[1] - C64::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn zero_covariance_is_degenerate() {
        let inst = instance(vec![complex_vec(&[(1.0, 0.0), (0.5, 0.0)])], 0.5, 1.0, 10.0);
        let d = CovarianceDesign {
            covariances: vec![HermitianMatrix::zeros(2)],
            compression_cov: HermitianMatrix::zeros(2),
        };
        assert!(matches!(extract_beamformers(&inst, &d), Err(Error::DegenerateUser(0))));
    }

    #[test]
    fn rank_two_is_flagged_not_repaired() {
        let inst = instance(vec![complex_vec(&[(1.0, 0.0), (0.5, 0.0)])], 0.5, 1.0, 10.0);
        let d = CovarianceDesign {
            covariances: vec![HermitianMatrix::from_real_diagonal(&[2.0, 1.0])],
            compression_cov: HermitianMatrix::zeros(2),
        };
        let (_, diag) = extract_beamformers(&inst, &d).unwrap();
        assert!((diag.eigenvalue_ratios[0] - 0.5).abs() < 1e-12);
        assert!(!diag.is_tight());
        assert!((diag.discarded_power - 1.0).abs() < 1e-12);
    }

    #[test]
    fn relaxation_solutions_are_rank_one_and_certify() {
        for seed in 0..4 {
            let inst = random_instance(seed);
            let p = build_sdr_program(&inst).unwrap();
            let r = solve(&p, &SolverSettings::default());
            assert_eq!(r.status, SolveStatus::Optimal);
            let sol = extract_solution(&p, &r).unwrap();
            let (bf, diag) = extract_beamformers(&inst, &sol.design).unwrap();
            assert!(diag.max_ratio() <= 1e-5, "seed {seed}: ratio {}", diag.max_ratio());
            let cert = certify(&inst, &bf, 1e-6, Some(sol.objective_value)).unwrap();
            assert!(cert.report.feasible, "seed {seed}: {:?}", cert.report);
            assert!(cert.relative_gap.unwrap() <= 1e-6);
        }
    }

    #[test]
    fn shrinking_beamformers_breaks_sinr() {
        let inst = random_instance(7);
        let p = build_sdr_program(&inst).unwrap();
        let r = solve(&p, &SolverSettings::default());
        let sol = extract_solution(&p, &r).unwrap();
        let (mut bf, _) = extract_beamformers(&inst, &sol.design).unwrap();
        for v in &mut bf.beamformers {
            *v *= C64::new(0.9, 0.0);
        }
        let cert = certify(&inst, &bf, 1e-6, None).unwrap();
        assert!(cert.report.sinr_slack.iter().all(|&s| s < 0.0));
    }

    #[test]
    fn doubling_compression_noise_frees_the_fronthaul() {
        let inst = random_instance(3);
        let p = build_sdr_program(&inst).unwrap();
        let r = solve(&p, &SolverSettings::default());
        let sol = extract_solution(&p, &r).unwrap();
        let (mut bf, _) = extract_beamformers(&inst, &sol.design).unwrap();
        let before = certify(&inst, &bf, 1e-6, None).unwrap();
        let binding: Vec<usize> = (0..inst.num_bs())
            .filter(|&m| before.report.fronthaul_slack[m].abs() < 1e-5)
            .collect();
        assert!(!binding.is_empty());
        bf.compression_cov = bf.compression_cov.scale(2.0);
        let after = certify(&inst, &bf, 1e-6, None).unwrap();
        for m in binding {
            assert!(after.report.fronthaul_slack[m] > 1e-3, "BS {m}");
        }
    }

    proptest! {
        #[test]
        fn round_trip_of_rank_one(parts in prop::collection::vec(-2.0f64..2.0, 6), hp in prop::collection::vec(-2.0f64..2.0, 6)) {
            let v = ComplexVector::from_fn(3, |i, _| C64::new(parts[2 * i], parts[2 * i + 1]));
            let h = ComplexVector::from_fn(3, |i, _| C64::new(hp[2 * i], hp[2 * i + 1]));
            prop_assume!(v.norm() > 1e-3 && h.norm() > 1e-3);
            let inst = instance(vec![h.clone()], 0.5, 1.0, 10.0);
            let vv = HermitianMatrix::outer(&v);
            let d = CovarianceDesign { covariances: vec![vv.clone()], compression_cov: HermitianMatrix::zeros(3) };
            let (bf, diag) = extract_beamformers(&inst, &d).unwrap();
            let b = &bf.beamformers[0];
            prop_assert!(diag.extraction_residuals[0] <= 1e-12);
            // phase rotation keeps norms and received magnitudes
            prop_assert!((b.norm() - v.norm()).abs() <= 1e-12 * v.norm().max(1.0));
            let (zb, zv) = (h.dotc(b), h.dotc(&v));
            prop_assert!((zb.norm() - zv.norm()).abs() <= 1e-10 * (1.0 + zv.norm()));
            prop_assert!(zb.im.abs() <= 1e-10 * (1.0 + zb.norm()) && zb.re >= -1e-12);
            // objective identity
            let lifted = bf.total_power();
            prop_assert!((lifted - d.total_power()).abs() <= diag.discarded_power + 1e-12 * lifted.max(1.0));
        }
    }
}
