//! Problem data and exact evaluators for the cooperative cellular network:
//! SINR, multivariate-compression fronthaul rate, per-antenna power and
//! feasibility of a design.
//!
//! Indices are 0-based throughout the API; BS `m` here is BS `m + 1` in the
//! usual 1-based notation. The compression order runs from the last BS to
//! the first, so BS `m`'s rate conditions on BSs `m+1..M`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::{trailing_schur_complement, ComplexVector, HermitianMatrix, C64};

/// Full data of one network: channels, noise, SINR targets, fronthaul
/// capacities (bits) and per-antenna power budgets.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkInstance {
    channels: Vec<ComplexVector>,
    noise_powers: Vec<f64>,
    sinr_targets: Vec<f64>,
    fronthaul_caps: Vec<f64>,
    power_budgets: Vec<f64>,
}

impl NetworkInstance {
    pub fn new(
        channels: Vec<ComplexVector>,
        noise_powers: Vec<f64>,
        sinr_targets: Vec<f64>,
        fronthaul_caps: Vec<f64>,
        power_budgets: Vec<f64>,
    ) -> Result<Self> {
        let k = channels.len();
        if k == 0 {
            return Err(Error::invalid("instance needs at least one user"));
        }
        let m = channels[0].len();
        if m == 0 {
            return Err(Error::invalid("instance needs at least one BS"));
        }
        for h in &channels {
            if h.len() != m {
                return Err(Error::DimensionMismatch {
                    what: "channel vector",
                    expected: m,
                    got: h.len(),
                });
            }
            if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite("channel vector"));
            }
        }
        check_params("noise_powers", &noise_powers, k)?;
        check_params("sinr_targets", &sinr_targets, k)?;
        check_params("fronthaul_caps", &fronthaul_caps, m)?;
        check_params("power_budgets", &power_budgets, m)?;
        Ok(Self {
            channels,
            noise_powers,
            sinr_targets,
            fronthaul_caps,
            power_budgets,
        })
    }

    pub fn num_bs(&self) -> usize {
        self.channels[0].len()
    }

    pub fn num_users(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, k: usize) -> &ComplexVector {
        &self.channels[k]
    }

    pub fn channels(&self) -> &[ComplexVector] {
        &self.channels
    }

    pub fn noise_powers(&self) -> &[f64] {
        &self.noise_powers
    }

    pub fn sinr_targets(&self) -> &[f64] {
        &self.sinr_targets
    }

    pub fn fronthaul_caps(&self) -> &[f64] {
        &self.fronthaul_caps
    }

    pub fn power_budgets(&self) -> &[f64] {
        &self.power_budgets
    }

    /// Same channels and parameters with every user's SINR target set to `gamma`.
    pub fn with_sinr_target(&self, gamma: f64) -> Result<Self> {
        let mut out = self.clone();
        out.sinr_targets = vec![gamma; self.num_users()];
        check_params("sinr_targets", &out.sinr_targets, self.num_users())?;
        Ok(out)
    }

    pub fn with_power_budgets(&self, budgets: Vec<f64>) -> Result<Self> {
        check_params("power_budgets", &budgets, self.num_bs())?;
        let mut out = self.clone();
        out.power_budgets = budgets;
        Ok(out)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: InstanceJson = serde_json::from_str(s)?;
        raw.try_into()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&InstanceJson::from(self))?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

fn check_params(what: &'static str, v: &[f64], len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::DimensionMismatch {
            what,
            expected: len,
            got: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite() || *x <= 0.0) {
        return Err(Error::invalid(format!(
            "{what} must be strictly positive and finite"
        )));
    }
    Ok(())
}

/// Wire form of [`NetworkInstance`]; complex numbers are `[re, im]` pairs and
/// `channels[k][m]` is the coefficient from BS `m` to user `k`.
#[derive(Debug, Serialize, Deserialize)]
pub struct InstanceJson {
    pub num_bs: usize,
    pub num_users: usize,
    pub channels: Vec<Vec<[f64; 2]>>,
    pub noise_powers: Vec<f64>,
    pub sinr_targets: Vec<f64>,
    pub fronthaul_caps: Vec<f64>,
    pub power_budgets: Vec<f64>,
}

impl From<&NetworkInstance> for InstanceJson {
    fn from(inst: &NetworkInstance) -> Self {
        Self {
            num_bs: inst.num_bs(),
            num_users: inst.num_users(),
            channels: inst
                .channels
                .iter()
                .map(|h| h.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
            noise_powers: inst.noise_powers.clone(),
            sinr_targets: inst.sinr_targets.clone(),
            fronthaul_caps: inst.fronthaul_caps.clone(),
            power_budgets: inst.power_budgets.clone(),
        }
    }
}

impl TryFrom<InstanceJson> for NetworkInstance {
    type Error = Error;

    fn try_from(raw: InstanceJson) -> Result<Self> {
        if raw.channels.len() != raw.num_users {
            return Err(Error::DimensionMismatch {
                what: "channels (users)",
                expected: raw.num_users,
                got: raw.channels.len(),
            });
        }
        let channels = raw
            .channels
            .iter()
            .map(|h| {
                if h.len() != raw.num_bs {
                    return Err(Error::DimensionMismatch {
                        what: "channels (BSs)",
                        expected: raw.num_bs,
                        got: h.len(),
                    });
                }
                Ok(ComplexVector::from_iterator(
                    h.len(),
                    h.iter().map(|p| C64::new(p[0], p[1])),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        NetworkInstance::new(
            channels,
            raw.noise_powers,
            raw.sinr_targets,
            raw.fronthaul_caps,
            raw.power_budgets,
        )
    }
}

/// Beamformers `v_k` and compression covariance `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingDesign {
    pub beamformers: Vec<ComplexVector>,
    pub compression_cov: HermitianMatrix,
}

/// The lifted variables `V_k` (ideally `v_k v_k^H`) and `Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceDesign {
    pub covariances: Vec<HermitianMatrix>,
    pub compression_cov: HermitianMatrix,
}

#[derive(Serialize, Deserialize)]
struct BeamformingJson {
    beamformers: Vec<Vec<[f64; 2]>>,
    compression_cov: HermitianMatrix,
}

impl Serialize for BeamformingDesign {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BeamformingJson {
            beamformers: self
                .beamformers
                .iter()
                .map(|v| v.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
            compression_cov: self.compression_cov.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BeamformingDesign {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = BeamformingJson::deserialize(d)?;
        Ok(Self {
            beamformers: raw
                .beamformers
                .iter()
                .map(|v| {
                    ComplexVector::from_iterator(v.len(), v.iter().map(|p| C64::new(p[0], p[1])))
                })
                .collect(),
            compression_cov: raw.compression_cov,
        })
    }
}

impl BeamformingDesign {
    pub fn zeros(num_bs: usize, num_users: usize) -> Self {
        Self {
            beamformers: vec![ComplexVector::zeros(num_bs); num_users],
            compression_cov: HermitianMatrix::zeros(num_bs),
        }
    }

    /// Lifts to `V_k = v_k v_k^H`.
    pub fn lift(&self) -> CovarianceDesign {
        CovarianceDesign {
            covariances: self.beamformers.iter().map(HermitianMatrix::outer).collect(),
            compression_cov: self.compression_cov.clone(),
        }
    }
}

/// Common view of the two design representations used by the evaluators.
pub trait TransmitDesign {
    fn num_users(&self) -> usize;
    fn num_bs(&self) -> usize;
    fn compression_cov(&self) -> &HermitianMatrix;
    /// `|h^H v_j|²` or `h^H V_j h`.
    fn received_power(&self, h: &ComplexVector, j: usize) -> f64;
    /// `Σ_k |v_{k,m}|²` or `Σ_k V_k^{(m,m)}`.
    fn signal_power_at(&self, m: usize) -> f64;
    /// `Σ_k ‖v_k‖²` or `Σ_k tr V_k`.
    fn signal_power(&self) -> f64;

    /// Objective of the power minimization: signal power plus `tr Q`.
    fn total_power(&self) -> f64 {
        self.signal_power() + self.compression_cov().trace()
    }
}

impl TransmitDesign for BeamformingDesign {
    fn num_users(&self) -> usize {
        self.beamformers.len()
    }
    fn num_bs(&self) -> usize {
        self.compression_cov.order()
    }
    fn compression_cov(&self) -> &HermitianMatrix {
        &self.compression_cov
    }
    fn received_power(&self, h: &ComplexVector, j: usize) -> f64 {
        h.dotc(&self.beamformers[j]).norm_sqr()
    }
    fn signal_power_at(&self, m: usize) -> f64 {
        self.beamformers.iter().map(|v| v[m].norm_sqr()).sum()
    }
    fn signal_power(&self) -> f64 {
        self.beamformers.iter().map(|v| v.norm_squared()).sum()
    }
}

impl TransmitDesign for CovarianceDesign {
    fn num_users(&self) -> usize {
        self.covariances.len()
    }
    fn num_bs(&self) -> usize {
        self.compression_cov.order()
    }
    fn compression_cov(&self) -> &HermitianMatrix {
        &self.compression_cov
    }
    fn received_power(&self, h: &ComplexVector, j: usize) -> f64 {
        self.covariances[j].quad_form(h)
    }
    fn signal_power_at(&self, m: usize) -> f64 {
        self.covariances.iter().map(|v| v.diag(m)).sum()
    }
    fn signal_power(&self) -> f64 {
        self.covariances.iter().map(|v| v.trace()).sum()
    }
}

fn check_dims<D: TransmitDesign + ?Sized>(inst: &NetworkInstance, d: &D) -> Result<()> {
    if d.num_users() != inst.num_users() {
        return Err(Error::DimensionMismatch {
            what: "design users",
            expected: inst.num_users(),
            got: d.num_users(),
        });
    }
    if d.num_bs() != inst.num_bs() {
        return Err(Error::DimensionMismatch {
            what: "design BSs",
            expected: inst.num_bs(),
            got: d.num_bs(),
        });
    }
    Ok(())
}

pub fn sinr<D: TransmitDesign + ?Sized>(inst: &NetworkInstance, d: &D, k: usize) -> Result<f64> {
    check_dims(inst, d)?;
    if k >= inst.num_users() {
        return Err(Error::IndexOutOfRange {
            what: "user",
            index: k,
            len: inst.num_users(),
        });
    }
    let h = inst.channel(k);
    let signal = d.received_power(h, k);
    let interference: f64 = (0..d.num_users())
        .filter(|&j| j != k)
        .map(|j| d.received_power(h, j))
        .sum();
    let denom = interference + d.compression_cov().quad_form(h) + inst.noise_powers[k];
    Ok(signal / denom)
}

pub fn antenna_power<D: TransmitDesign + ?Sized>(
    inst: &NetworkInstance,
    d: &D,
    m: usize,
) -> Result<f64> {
    check_dims(inst, d)?;
    check_bs(inst, m)?;
    Ok(d.signal_power_at(m) + d.compression_cov().diag(m))
}

/// Fronthaul rate of BS `m` in bits, plus whether the Schur complement had
/// to be regularized. A zero Schur complement with positive antenna power
/// yields `+∞`.
pub fn fronthaul_rate_detail<D: TransmitDesign + ?Sized>(
    inst: &NetworkInstance,
    d: &D,
    m: usize,
) -> Result<(f64, bool)> {
    let power = antenna_power(inst, d, m)?;
    let schur = trailing_schur_complement(d.compression_cov(), m)?;
    let rate = if power <= 0.0 {
        // nothing is transmitted from this BS
        0.0
    } else if schur.value <= 0.0 {
        f64::INFINITY
    } else {
        (power / schur.value).log2()
    };
    Ok((rate, schur.regularized))
}

pub fn fronthaul_rate<D: TransmitDesign + ?Sized>(
    inst: &NetworkInstance,
    d: &D,
    m: usize,
) -> Result<f64> {
    fronthaul_rate_detail(inst, d, m).map(|(r, _)| r)
}

fn check_bs(inst: &NetworkInstance, m: usize) -> Result<()> {
    if m >= inst.num_bs() {
        return Err(Error::IndexOutOfRange {
            what: "BS",
            index: m,
            len: inst.num_bs(),
        });
    }
    Ok(())
}

/// Constraint slacks of a design; positive means satisfied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub sinr_slack: Vec<f64>,
    /// `C̄_m − C_m` in bits.
    pub fronthaul_slack: Vec<f64>,
    pub power_slack: Vec<f64>,
    /// BSs whose Schur complement needed jitter.
    pub regularized_bs: Vec<usize>,
    pub tolerance: f64,
    pub feasible: bool,
}

impl FeasibilityReport {
    pub fn worst_slack(&self) -> f64 {
        self.sinr_slack
            .iter()
            .chain(&self.fronthaul_slack)
            .chain(&self.power_slack)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn check_feasibility<D: TransmitDesign + ?Sized>(
    inst: &NetworkInstance,
    d: &D,
    tol: f64,
) -> Result<FeasibilityReport> {
    check_dims(inst, d)?;
    let sinr_slack = (0..inst.num_users())
        .map(|k| sinr(inst, d, k).map(|s| s - inst.sinr_targets[k]))
        .collect::<Result<Vec<_>>>()?;
    let mut fronthaul_slack = Vec::with_capacity(inst.num_bs());
    let mut power_slack = Vec::with_capacity(inst.num_bs());
    let mut regularized_bs = Vec::new();
    for m in 0..inst.num_bs() {
        let (rate, reg) = fronthaul_rate_detail(inst, d, m)?;
        if reg {
            regularized_bs.push(m);
        }
        fronthaul_slack.push(inst.fronthaul_caps[m] - rate);
        power_slack.push(inst.power_budgets[m] - antenna_power(inst, d, m)?);
    }
    let mut report = FeasibilityReport {
        sinr_slack,
        fronthaul_slack,
        power_slack,
        regularized_bs,
        tolerance: tol,
        feasible: false,
    };
    report.feasible = report.worst_slack() >= -tol;
    Ok(report)
}

/// Checks a covariance design's blocks are PSD up to `tol` (relative to the
/// block's largest eigenvalue magnitude, floored at one).
pub fn covariance_is_psd(d: &CovarianceDesign, tol: f64) -> Result<bool> {
    for b in d.covariances.iter().chain(std::iter::once(&d.compression_cov)) {
        let e = crate::hermitian::eigh(b)?;
        let scale = e.values.first().copied().unwrap_or(0.0).abs().max(1.0);
        if e.values.last().copied().unwrap_or(0.0) < -tol * scale {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
pub(crate) fn complex_vec(entries: &[(f64, f64)]) -> ComplexVector {
    ComplexVector::from_iterator(entries.len(), entries.iter().map(|&(r, i)| C64::new(r, i)))
}

#[cfg(test)]
fn real_hermitian(rows: usize, data: &[f64]) -> HermitianMatrix {
    HermitianMatrix::from_real(&nalgebra::DMatrix::from_row_slice(rows, rows, data)).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn inst(channels: Vec<ComplexVector>, sigma2: f64, gamma: f64, cap: f64, budget: f64) -> NetworkInstance {
        let k = channels.len();
        let m = channels[0].len();
        NetworkInstance::new(
            channels,
            vec![sigma2; k],
            vec![gamma; k],
            vec![cap; m],
            vec![budget; m],
        )
        .unwrap()
    }

    #[test]
    fn sinr_examples() {
        let i1 = inst(vec![complex_vec(&[(1., 0.)])], 1.0, 1.0, 1.0, 10.0);
        let d = BeamformingDesign {
            beamformers: vec![complex_vec(&[(2., 0.)])],
            compression_cov: HermitianMatrix::zeros(1),
        };
        assert_abs_diff_eq!(sinr(&i1, &d, 0).unwrap(), 4.0);

        let i2 = inst(vec![complex_vec(&[(1., 0.)]); 2], 1.0, 1.0, 1.0, 10.0);
        let d = BeamformingDesign {
            beamformers: vec![complex_vec(&[(1., 0.)]); 2],
            compression_cov: HermitianMatrix::identity(1),
        };
        assert_abs_diff_eq!(sinr(&i2, &d, 0).unwrap(), 1.0 / 3.0, epsilon = 1e-15);

        let i3 = inst(vec![complex_vec(&[(1., 0.), (1., 0.)])], 1.0, 1.0, 1.0, 10.0);
        let d = BeamformingDesign {
            beamformers: vec![complex_vec(&[(1., 0.), (0., 1.)])],
            compression_cov: HermitianMatrix::identity(2),
        };
        assert_abs_diff_eq!(sinr(&i3, &d, 0).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        assert!(matches!(sinr(&i3, &d, 1), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn fronthaul_examples() {
        let i = inst(vec![complex_vec(&[(1., 0.), (1., 0.)])], 1.0, 1.0, 1.0, 10.0);
        let d = BeamformingDesign {
            beamformers: vec![complex_vec(&[(1., 0.), (0., 0.)])],
            compression_cov: HermitianMatrix::identity(2),
        };
        assert_abs_diff_eq!(fronthaul_rate(&i, &d, 0).unwrap(), 1.0, epsilon = 1e-15);

        let d = BeamformingDesign {
            beamformers: vec![complex_vec(&[(0., 0.), (2f64.sqrt(), 0.)])],
            compression_cov: HermitianMatrix::from_real_diagonal(&[1.0, 2.0]),
        };
        assert_abs_diff_eq!(fronthaul_rate(&i, &d, 1).unwrap(), 1.0, epsilon = 1e-15);

        let d = BeamformingDesign {
            beamformers: vec![complex_vec(&[(0., 0.), (0., 0.)])],
            compression_cov: real_hermitian(2, &[2., 1., 1., 1.]),
        };
        assert_abs_diff_eq!(fronthaul_rate(&i, &d, 0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn fronthaul_zero_schur_is_infinite() {
        let i = inst(vec![complex_vec(&[(1., 0.), (1., 0.)])], 1.0, 1.0, 1.0, 10.0);
        let d = BeamformingDesign {
            beamformers: vec![complex_vec(&[(1., 0.), (0., 0.)])],
            compression_cov: HermitianMatrix::zeros(2),
        };
        assert_eq!(fronthaul_rate(&i, &d, 1).unwrap(), 0.0);
        let (r, reg) = fronthaul_rate_detail(&i, &d, 0).unwrap();
        assert!(r.is_infinite() && reg);
        let rep = check_feasibility(&i, &d, 1e-6).unwrap();
        assert!(!rep.feasible);
        assert_eq!(rep.regularized_bs, vec![0]);
    }

    #[test]
    fn antenna_power_examples() {
        let i = inst(vec![complex_vec(&[(1., 0.), (1., 0.)]); 2], 1.0, 1.0, 1.0, 10.0);
        let d = BeamformingDesign {
            beamformers: vec![complex_vec(&[(1., 0.), (0., 0.)]); 2],
            compression_cov: HermitianMatrix::from_real_diagonal(&[0.5, 0.0]),
        };
        assert_abs_diff_eq!(antenna_power(&i, &d, 0).unwrap(), 2.5);
        let z = BeamformingDesign::zeros(2, 2);
        assert_eq!(antenna_power(&i, &z, 1).unwrap(), 0.0);
        assert!(antenna_power(&i, &z, 2).is_err());
    }

    #[test]
    fn zero_design_is_infeasible_by_sinr_target() {
        let i = inst(vec![complex_vec(&[(1., 0.), (0.5, 0.5)]); 2], 1.0, 0.3, 1.0, 10.0);
        let rep = check_feasibility(&i, &BeamformingDesign::zeros(2, 2), 1e-9).unwrap();
        assert!(!rep.feasible);
        for s in rep.sinr_slack {
            assert_abs_diff_eq!(s, -0.3);
        }
    }

    #[test]
    fn loose_constraints_are_feasible() {
        let h = vec![complex_vec(&[(1., 0.), (0., 0.)]), complex_vec(&[(0., 0.), (1., 0.)])];
        let i = inst(h, 1.0, 1e-3, 100.0, 10.0);
        let d = BeamformingDesign {
            beamformers: vec![complex_vec(&[(1., 0.), (0., 0.)]), complex_vec(&[(0., 0.), (1., 0.)])],
            compression_cov: HermitianMatrix::from_real_diagonal(&[0.1, 0.1]),
        };
        assert!(check_feasibility(&i, &d, 0.0).unwrap().feasible);
    }

    #[test]
    fn instance_validation() {
        let h = vec![complex_vec(&[(1., 0.)])];
        assert!(NetworkInstance::new(h.clone(), vec![0.0], vec![1.0], vec![1.0], vec![1.0]).is_err());
        assert!(NetworkInstance::new(h.clone(), vec![1.0], vec![1.0], vec![1.0, 2.0], vec![1.0]).is_err());
        assert!(NetworkInstance::new(h, vec![1.0], vec![f64::NAN], vec![1.0], vec![1.0]).is_err());
    }

    #[test]
    fn instance_json_round_trip() {
        let i = inst(vec![complex_vec(&[(1., -0.5), (0.25, 2.0)]); 3], 1.0, 0.5, 0.7, 3.0);
        let back = NetworkInstance::from_json(&i.to_json().unwrap()).unwrap();
        assert_eq!(i, back);
        let bad = r#"{"num_bs":2,"num_users":1,"channels":[[[1,0]]],"noise_powers":[1],
                      "sinr_targets":[1],"fronthaul_caps":[1,1],"power_budgets":[1,1]}"#;
        assert!(NetworkInstance::from_json(bad).is_err());
    }

    fn arb_design(m: usize, k: usize) -> impl Strategy<Value = BeamformingDesign> {
        (
            prop::collection::vec(-2.0f64..2.0, 2 * m * k),
            prop::collection::vec(-1.0f64..1.0, 2 * m * m),
        )
            .prop_map(move |(v, q)| {
                let beamformers = (0..k)
                    .map(|j| {
                        ComplexVector::from_fn(m, |i, _| {
                            C64::new(v[2 * (j * m + i)], v[2 * (j * m + i) + 1])
                        })
                    })
                    .collect();
                let b = DMatrix::from_fn(m, m, |i, j| C64::new(q[2 * (i * m + j)], q[2 * (i * m + j) + 1]));
                let qm = &b * b.adjoint() + DMatrix::identity(m, m) * C64::new(0.1, 0.0);
                BeamformingDesign {
                    beamformers,
                    compression_cov: HermitianMatrix::symmetrized(qm),
                }
            })
    }

    fn arb_instance(m: usize, k: usize) -> impl Strategy<Value = NetworkInstance> {
        prop::collection::vec(-1.5f64..1.5, 2 * m * k).prop_map(move |h| {
            let ch = (0..k)
                .map(|j| ComplexVector::from_fn(m, |i, _| C64::new(h[2 * (j * m + i)], h[2 * (j * m + i) + 1])))
                .collect();
            inst(ch, 1.0, 0.1, 1.0, 5.0)
        })
    }

    proptest! {
        #[test]
        fn lifted_design_agrees(i in arb_instance(3, 2), d in arb_design(3, 2)) {
            let l = d.lift();
            for k in 0..2 {
                let a = sinr(&i, &d, k).unwrap();
                let b = sinr(&i, &l, k).unwrap();
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
            }
            for m in 0..3 {
                let a = fronthaul_rate(&i, &d, m).unwrap();
                let b = fronthaul_rate(&i, &l, m).unwrap();
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
                let a = antenna_power(&i, &d, m).unwrap();
                let b = antenna_power(&i, &l, m).unwrap();
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
            }
            let total: f64 = (0..3).map(|m| antenna_power(&i, &d, m).unwrap()).sum();
            prop_assert!((total - d.total_power()).abs() <= 1e-10 * (1.0 + total));
        }

        #[test]
        fn fronthaul_scale_invariant(i in arb_instance(3, 2), d in arb_design(3, 2), c in 0.1f64..10.0) {
            let scaled = BeamformingDesign {
                beamformers: d.beamformers.iter().map(|v| v * C64::new(c, 0.0)).collect(),
                compression_cov: d.compression_cov.scale(c * c),
            };
            for m in 0..3 {
                let a = fronthaul_rate(&i, &d, m).unwrap();
                let b = fronthaul_rate(&i, &scaled, m).unwrap();
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn sinr_decreases_with_noise(i in arb_instance(2, 2), d in arb_design(2, 2), bump in 0.0f64..5.0) {
            let mut noisy = i.clone();
            noisy.noise_powers[0] += bump;
            prop_assert!(sinr(&noisy, &d, 0).unwrap() <= sinr(&i, &d, 0).unwrap() + 1e-15);
        }
    }
}
