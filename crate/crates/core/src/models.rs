//! Constructive models on `𝒯_{η,κ}`: subnormal shifts from Berger-type
//! measures, completely hyperexpansive shifts from representing measures on
//! `[0,1]`, and backward extendibility of classical shifts.

use thiserror::Error;

use crate::family::{FamilyKind, Kappa, TreeFamily};
use crate::measure::AtomicMeasure;
use crate::shift::WeightedShift;
use crate::weights::{Tail, WeightSystem};

const MODEL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("measure {0} is not a probability measure")]
    NotProbability(usize),
    #[error("measure {0} is not supported in [0,1]")]
    NotOnUnitInterval(usize),
    #[error("no admissible first-level weights: measure {0} has infinite negative moments")]
    NoAdmissibleLambda1(usize),
    #[error("first-level weights violate {0}")]
    Lambda1Rejected(String),
    #[error("theta {theta} outside the admissible range [{lo}, {hi}]")]
    ThetaOutOfRange { theta: f64, lo: f64, hi: f64 },
    #[error("first-level weights violate {0:?}")]
    TConditionsViolated(TCondition),
    #[error("no first-level weights satisfy the conditions for these measures")]
    NoSolution,
    #[error("impossible: {reason}")]
    Impossible { reason: String, branch: Option<usize> },
}

/// Conditions on the first-level weights `t` of a completely hyperexpansive model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TCondition {
    /// `Σ t_i² < ∞` with finite negative moments of order `κ+1`.
    Summable,
    /// `Σ t_i² ≥ 1 + Σ t_i² ∫ s⁻¹ dτ_i`, equality when `κ > 0`.
    FirstLevel,
    /// `Σ t_i² > Σ t_i² ∫ (s⁻¹ + ... + s^-(κ+1)) dτ_i`.
    Strict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubnormalModelSpec {
    pub eta: usize,
    pub kappa: Kappa,
    pub measures: Vec<AtomicMeasure>,
    pub lambda1: Option<Vec<f64>>,
    pub theta: Option<f64>,
    pub extremal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChexModelSpec {
    pub eta: usize,
    pub kappa: usize,
    pub measures: Vec<AtomicMeasure>,
    pub t: Option<Vec<f64>>,
    pub theta: Option<f64>,
    pub extremal: bool,
}

/// A constructed weight system with its closed-form norm.
#[derive(Debug, Clone)]
pub struct Model {
    pub kind: FamilyKind,
    pub weights: WeightSystem,
    pub norm: f64,
    pub first_level: Vec<f64>,
    /// `λ_0, λ_{-1}, ...` as far as they are finitely many.
    pub trunk: Vec<f64>,
    pub theta: Option<f64>,
    /// The admissible range of the free trunk weight.
    pub theta_range: Option<(f64, f64)>,
}

impl Model {
    pub fn shift(&self, depth: usize) -> WeightedShift {
        let tree = TreeFamily::new(self.kind.clone(), depth).materialize();
        WeightedShift::new(tree, self.weights.clone()).expect("model weights resolve on every truncation")
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= MODEL_TOL * a.abs().max(b.abs()).max(1.0)
}

fn family(eta: usize, kappa: Kappa, count: usize) -> Result<FamilyKind, ModelError> {
    if count != eta {
        return Err(ModelError::InvalidSpec(format!("{eta} branches but {count} measures")));
    }
    FamilyKind::t_eta_kappa(eta, kappa).map_err(|e| ModelError::InvalidSpec(e.to_string()))
}

/// `t_k = Σ λ_i² ∫ s^{-k} dμ_i`.
fn negative_moment_sum(lambda1: &[f64], measures: &[AtomicMeasure], k: i32) -> f64 {
    lambda1.iter().zip(measures).map(|(l, m)| l * l * m.moment(-k)).sum()
}

/// First-level weights satisfying the normalization and finiteness conditions
/// of the subnormal model, or the first branch that rules them out.
pub fn exists_lambda1(measures: &[AtomicMeasure], kappa: Kappa) -> Result<Vec<f64>, usize> {
    if let Some(i) = measures.iter().position(|m| m.has_atom_at_zero() || m.is_zero()) {
        return Err(i + 1);
    }
    let raw: Vec<f64> = match kappa {
        Kappa::Finite(_) => vec![1.0; measures.len()],
        Kappa::Infinite => measures
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let peak = (1..=i as i32 + 1).map(|k| m.moment(-k)).fold(0.0, f64::max);
                0.5f64.powi(i as i32 + 1) / peak.sqrt()
            })
            .collect(),
    };
    let t1 = negative_moment_sum(&raw, measures, 1);
    Ok(raw.iter().map(|l| l / t1.sqrt()).collect())
}

/// Subnormal shift on `𝒯_{η,κ}` whose branch measures are `μ_1..μ_η`.
pub fn construct_subnormal(spec: &SubnormalModelSpec) -> Result<Model, ModelError> {
    let kind = family(spec.eta, spec.kappa, spec.measures.len())?;
    for (i, m) in spec.measures.iter().enumerate() {
        if !close(m.total_mass(), 1.0) {
            return Err(ModelError::NotProbability(i + 1));
        }
    }
    let mu = &spec.measures;
    let lambda1 = match &spec.lambda1 {
        Some(l) => {
            if l.len() != spec.eta || l.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(ModelError::InvalidSpec("first-level weights must be η positive numbers".into()));
            }
            if let Some(i) = mu.iter().position(|m| m.has_atom_at_zero()) {
                return Err(ModelError::NoAdmissibleLambda1(i + 1));
            }
            let t1 = negative_moment_sum(l, mu, 1);
            match spec.kappa {
                Kappa::Finite(0) if t1 > 1.0 + MODEL_TOL => {
                    return Err(ModelError::Lambda1Rejected(format!(
                        "Σ λ_(i,1)² ∫ s⁻¹ dμ_i ≤ 1 (value {t1})"
                    )))
                }
                Kappa::Finite(0) => {}
                _ if !close(t1, 1.0) => {
                    return Err(ModelError::Lambda1Rejected(format!(
                        "Σ λ_(i,1)² ∫ s⁻¹ dμ_i = 1 (value {t1})"
                    )))
                }
                _ => {}
            }
            l.clone()
        }
        None => exists_lambda1(mu, spec.kappa).map_err(ModelError::NoAdmissibleLambda1)?,
    };
    let mut weights = WeightSystem::default();
    for (i, m) in mu.iter().enumerate() {
        weights = weights.tail(i + 1, &[lambda1[i]], Tail::MomentRatio(m.clone()));
    }
    let t = |k: i32| negative_moment_sum(&lambda1, mu, k);
    let mut trunk = Vec::new();
    let mut theta = None;
    let mut theta_range = None;
    match spec.kappa {
        Kappa::Finite(0) => {
            if spec.theta.is_some() {
                return Err(ModelError::InvalidSpec("theta needs 0 < κ < ∞".into()));
            }
        }
        Kappa::Finite(kappa) => {
            for k in 0..kappa - 1 {
                trunk.push((t(k as i32 + 1) / t(k as i32 + 2)).sqrt());
            }
            let hi = (t(kappa as i32) / t(kappa as i32 + 1)).sqrt();
            let chosen = match spec.theta {
                None => hi,
                Some(x) if x > 0.0 && x <= hi * (1.0 + MODEL_TOL) && (!spec.extremal || close(x, hi)) => x,
                Some(x) => return Err(ModelError::ThetaOutOfRange { theta: x, lo: 0.0, hi }),
            };
            trunk.push(chosen);
            theta = Some(chosen);
            theta_range = Some((0.0, hi));
            for (k, &w) in trunk.iter().enumerate() {
                weights = weights.set(&trunk_id(k), w);
            }
        }
        Kappa::Infinite => {
            if spec.theta.is_some() {
                return Err(ModelError::InvalidSpec("theta needs 0 < κ < ∞".into()));
            }
            let parts: Vec<(f64, &AtomicMeasure)> = lambda1.iter().map(|l| l * l).zip(mu.iter()).collect();
            weights = weights.tail(0, &[], Tail::InverseMomentRatio(AtomicMeasure::combine(&parts)));
        }
    }
    let norm = mu.iter().map(|m| m.support_max()).fold(0.0, f64::max).sqrt();
    Ok(Model { kind, weights, norm, first_level: lambda1, trunk, theta, theta_range })
}

fn trunk_id(k: usize) -> String {
    if k == 0 {
        "0".into()
    } else {
        format!("-{k}")
    }
}

/// `ζ_k = Σ t_i² (1 - ∫ (s⁻¹ + ... + s⁻ᵏ) dτ_i)` for `k = 1..=up_to`, index 0 unused.
fn zetas(t: &[f64], tau: &[AtomicMeasure], up_to: usize) -> Vec<f64> {
    let mut z = vec![f64::NAN];
    for k in 1..=up_to as u32 {
        z.push(t.iter().zip(tau).map(|(ti, m)| ti * ti * (1.0 - m.inverse_power_sum(k))).sum());
    }
    z
}

fn check_t(t: &[f64], tau: &[AtomicMeasure], kappa: usize) -> Result<(), TCondition> {
    let sq: f64 = t.iter().map(|x| x * x).sum();
    let finite = tau.iter().all(|m| m.moment(-(kappa as i32 + 1)).is_finite());
    if !sq.is_finite() || !finite {
        return Err(TCondition::Summable);
    }
    let rhs = 1.0 + negative_moment_sum(t, tau, 1);
    let first_ok = if kappa == 0 { sq >= rhs - MODEL_TOL * rhs } else { close(sq, rhs) };
    if !first_ok {
        return Err(TCondition::FirstLevel);
    }
    let z = zetas(t, tau, kappa + 1);
    if z[kappa + 1] <= MODEL_TOL * sq {
        return Err(TCondition::Strict);
    }
    Ok(())
}

/// Completely hyperexpansive shift on `𝒯_{η,κ}` with branch representing measures `τ_i`.
pub fn construct_chex(spec: &ChexModelSpec) -> Result<Model, ModelError> {
    let kappa = spec.kappa;
    let kind = family(spec.eta, Kappa::Finite(kappa), spec.measures.len())?;
    let tau = &spec.measures;
    for (i, m) in tau.iter().enumerate() {
        if m.within_unit_interval().is_err() {
            return Err(ModelError::NotOnUnitInterval(i + 1));
        }
    }
    let t = match &spec.t {
        Some(t) => {
            if t.len() != spec.eta || t.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(ModelError::InvalidSpec("t must be η positive numbers".into()));
            }
            t.clone()
        }
        None => solve_t_sequence(tau, kappa).ok_or(ModelError::NoSolution)?,
    };
    check_t(&t, tau, kappa).map_err(ModelError::TConditionsViolated)?;
    let mut weights = WeightSystem::default();
    for (i, m) in tau.iter().enumerate() {
        weights = weights.tail(i + 1, &[t[i]], Tail::AlternatingRatio(m.clone()));
    }
    let sq: f64 = t.iter().map(|x| x * x).sum();
    let branch_sup = tau.iter().map(|m| 1.0 + m.total_mass()).fold(0.0, f64::max);
    let mut trunk = Vec::new();
    let mut theta = None;
    let mut theta_range = None;
    let norm_sq = if kappa == 0 {
        if spec.theta.is_some() {
            return Err(ModelError::InvalidSpec("theta needs κ ≥ 1".into()));
        }
        sq.max(branch_sup)
    } else {
        let z = zetas(&t, tau, kappa + 1);
        for k in 0..kappa - 1 {
            trunk.push((z[k + 1] / z[k + 2]).sqrt());
        }
        let lo = (z[kappa] / z[kappa + 1]).sqrt();
        let chosen = match spec.theta {
            None => lo,
            Some(x) if x >= lo * (1.0 - MODEL_TOL) && x.is_finite() && (!spec.extremal || close(x, lo)) => x,
            Some(x) => return Err(ModelError::ThetaOutOfRange { theta: x, lo, hi: f64::INFINITY }),
        };
        trunk.push(chosen);
        theta = Some(chosen);
        theta_range = Some((lo, f64::INFINITY));
        for (k, &w) in trunk.iter().enumerate() {
            weights = weights.set(&trunk_id(k), w);
        }
        (chosen * chosen).max(branch_sup)
    };
    Ok(Model { kind, weights, norm: norm_sq.sqrt(), first_level: t, trunk, theta, theta_range })
}

/// First-level weights for a completely hyperexpansive model, built from the
/// partition of branches by the signs of `1 - ∫ s⁻¹ dτ_i` and
/// `1 - ∫ (s⁻¹ + ... + s^-(κ+1)) dτ_i`. `None` when no such weights exist.
///
/// Within each class the unscaled weights are 1, except that the first class is
/// normalized so that `Σ t̃_i² (1 - ∫ s⁻¹ dτ_i) = 1`. The second and third classes
/// share the scale `r` with `r² = α₀ / (2 max(α₁ + α₂ + (ϑ₁ - ϑ₂) α₀, α₀ / 2))`,
/// and the first class gets `r₀² = 1 - r² (ϑ₁ - ϑ₂)`.
pub fn solve_t_sequence(tau: &[AtomicMeasure], kappa: usize) -> Option<Vec<f64>> {
    let order = kappa as u32 + 1;
    if tau.iter().any(|m| !m.moment(-(order as i32)).is_finite()) {
        return None;
    }
    let first: Vec<f64> = tau.iter().map(|m| 1.0 - m.moment(-1)).collect();
    let full: Vec<f64> = tau.iter().map(|m| 1.0 - m.inverse_power_sum(order)).collect();
    let pp: Vec<usize> = (0..tau.len()).filter(|&i| full[i] > 0.0).collect();
    if pp.is_empty() {
        return None;
    }
    let pm: Vec<usize> = (0..tau.len()).filter(|&i| first[i] > 0.0 && full[i] <= 0.0).collect();
    let mm: Vec<usize> = (0..tau.len()).filter(|&i| first[i] <= 0.0).collect();
    let norm: f64 = pp.iter().map(|&i| first[i]).sum();
    let base = 1.0 / norm.sqrt();
    let alpha0: f64 = pp.iter().map(|&i| base * base * full[i]).sum();
    let theta1: f64 = pm.iter().map(|&i| first[i]).sum();
    let theta2: f64 = mm.iter().map(|&i| -first[i]).sum();
    let a: f64 = pm.iter().chain(&mm).map(|&i| -full[i]).sum();
    let d = theta1 - theta2;
    let r2 = alpha0 / (2.0 * (a + d * alpha0).max(alpha0 / 2.0));
    let r02 = 1.0 - r2 * d;
    let mut t = vec![0.0; tau.len()];
    for &i in &pp {
        t[i] = r02.sqrt() * base;
    }
    for &i in pm.iter().chain(&mm) {
        t[i] = r2.sqrt();
    }
    Some(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    Subnormal,
    Chex,
}

/// Outcome of a backward-extension test, with the quantity it was decided on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extension {
    pub extendible: bool,
    /// Largest negative moment (subnormal) or `∫ Σ_(l ≤ k) s^-l dτ` (chex).
    pub value: f64,
}

/// `k`-step backward extendibility of a classical shift from its Berger measure
/// (subnormal) or its representing measure (chex). `k = None` means every `k`.
pub fn backward_extension(
    measure: &AtomicMeasure,
    k: Option<usize>,
    flavor: Flavor,
) -> Result<Extension, ModelError> {
    if k == Some(0) {
        return Err(ModelError::InvalidSpec("k must be at least 1".into()));
    }
    match flavor {
        Flavor::Subnormal => {
            let top = k.unwrap_or(1) as i32;
            let value = measure.moment(-top);
            Ok(Extension { extendible: !measure.has_atom_at_zero() && value.is_finite(), value })
        }
        Flavor::Chex => {
            let k = k.ok_or_else(|| ModelError::InvalidSpec("chex extensions need finite k".into()))?;
            measure.within_unit_interval().map_err(|_| ModelError::NotOnUnitInterval(1))?;
            let value = measure.inverse_power_sum(k as u32);
            Ok(Extension { extendible: value < 1.0, value })
        }
    }
}

/// A tree model whose branches reproduce given classical shifts, described by
/// their Berger measures (subnormal) or representing measures (chex).
pub fn bridge_classical(
    branches: &[AtomicMeasure],
    kappa: Kappa,
    flavor: Flavor,
) -> Result<Model, ModelError> {
    match flavor {
        Flavor::Subnormal => {
            let steps = match kappa {
                Kappa::Finite(k) => Some(k + 1),
                Kappa::Infinite => None,
            };
            for (i, m) in branches.iter().enumerate() {
                if !backward_extension(m, steps, Flavor::Subnormal)?.extendible {
                    return Err(ModelError::Impossible {
                        reason: format!("branch {} has no subnormal backward extension of the needed length", i + 1),
                        branch: Some(i + 1),
                    });
                }
            }
            construct_subnormal(&SubnormalModelSpec {
                eta: branches.len(),
                kappa,
                measures: branches.to_vec(),
                lambda1: None,
                theta: None,
                extremal: true,
            })
        }
        Flavor::Chex => {
            let Kappa::Finite(k) = kappa else {
                return Err(ModelError::Impossible {
                    reason: "completely hyperexpansive shifts on a rootless tree of this kind are isometries".into(),
                    branch: None,
                });
            };
            for (i, m) in branches.iter().enumerate() {
                if !m.moment(-(k as i32 + 1)).is_finite() {
                    return Err(ModelError::Impossible {
                        reason: format!("branch {} has an infinite negative moment of order {}", i + 1, k + 1),
                        branch: Some(i + 1),
                    });
                }
            }
            let any = branches.iter().any(|m| {
                backward_extension(m, Some(k + 1), Flavor::Chex).is_ok_and(|e| e.extendible)
            });
            if !any {
                return Err(ModelError::Impossible {
                    reason: format!("no branch has a completely hyperexpansive {}-step backward extension", k + 1),
                    branch: None,
                });
            }
            construct_chex(&ChexModelSpec {
                eta: branches.len(),
                kappa: k,
                measures: branches.to_vec(),
                t: None,
                theta: None,
                extremal: true,
            })
        }
    }
}
