//! Finitely atomic measures, moment sequences and their positivity tests.

use std::fmt;

use thiserror::Error;

use crate::linalg::symmetric_eigenvalues;

/// Slack allowed in the mass conditions of the backward extensions.
pub const EXTENSION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("atom at {0} is not a finite nonnegative point")]
    InvalidPoint(f64),
    #[error("atom at {point} has non-positive or non-finite mass {mass}")]
    InvalidMass { point: f64, mass: f64 },
    #[error("two atoms at {0}")]
    DuplicatePoint(f64),
    #[error("empty moment prefix")]
    EmptyPrefix,
    #[error("moment prefix too short for the requested Hankel order")]
    InsufficientLength,
    #[error("measure has an atom outside [0,1] at {0}")]
    OutsideUnitInterval(f64),
    #[error("extension condition violated: required quantity is {0}")]
    ConditionViolated(f64),
}

/// Positive measure with finitely many atoms, sorted by point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AtomicMeasure {
    atoms: Vec<(f64, f64)>,
}

impl AtomicMeasure {
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Result<Self, MeasureError> {
        for &(x, m) in &atoms {
            if !(x.is_finite() && x >= 0.0) {
                return Err(MeasureError::InvalidPoint(x));
            }
            if !(m.is_finite() && m > 0.0) {
                return Err(MeasureError::InvalidMass { point: x, mass: m });
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(w) = atoms.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(MeasureError::DuplicatePoint(w[0].0));
        }
        Ok(Self { atoms })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn dirac(x: f64) -> Self {
        Self::new(vec![(x, 1.0)]).expect("valid dirac point")
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// Largest support point; 0 for the zero measure.
    pub fn support_max(&self) -> f64 {
        self.atoms.last().map_or(0.0, |a| a.0)
    }

    pub fn has_atom_at_zero(&self) -> bool {
        self.atoms.first().is_some_and(|a| a.0 == 0.0)
    }

    pub fn within_unit_interval(&self) -> Result<(), MeasureError> {
        match self.atoms.iter().find(|a| a.0 > 1.0) {
            Some(a) => Err(MeasureError::OutsideUnitInterval(a.0)),
            None => Ok(()),
        }
    }

    /// `∫ s^n dμ`, with `1/0 = ∞` for negative orders.
    pub fn moment(&self, n: i32) -> f64 {
        if n < 0 && self.has_atom_at_zero() {
            return f64::INFINITY;
        }
        self.atoms.iter().map(|&(x, m)| m * x.powi(n)).sum()
    }

    /// `∫ (s^{-1} + ... + s^{-k}) dτ`.
    pub fn inverse_power_sum(&self, k: u32) -> f64 {
        (1..=k as i32).map(|l| self.moment(-l)).sum()
    }

    pub fn moments(&self, n: usize) -> MomentPrefix {
        MomentPrefix::new((0..=n as i32).map(|k| self.moment(k)).collect())
    }

    /// Terms `a_n = a0 + ∫ (1 + s + ... + s^{n-1}) dτ` for `n = 0..=len`.
    pub fn alternating_sequence(&self, a0: f64, len: usize) -> MomentPrefix {
        let mut values = Vec::with_capacity(len + 1);
        let mut acc = a0;
        values.push(acc);
        for n in 0..len {
            acc += self.moment(n as i32);
            values.push(acc);
        }
        MomentPrefix::new(values)
    }

    /// Linear combination `Σ c_i μ_i`, merging equal points; zero terms vanish.
    pub fn combine(parts: &[(f64, &AtomicMeasure)]) -> AtomicMeasure {
        let mut atoms: Vec<(f64, f64)> = parts
            .iter()
            .flat_map(|(c, m)| m.atoms.iter().map(move |&(x, w)| (x, c * w)))
            .filter(|a| a.1 > 0.0)
            .collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += w,
                _ => merged.push((x, w)),
            }
        }
        AtomicMeasure { atoms: merged }
    }
}

impl fmt::Display for AtomicMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.atoms.iter().map(|(x, m)| format!("{m}δ{x}")).collect();
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

/// Finite sequence `t_offset, ..., t_{offset+N}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentPrefix {
    pub values: Vec<f64>,
    pub offset: i64,
}

impl MomentPrefix {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, offset: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StieltjesVerdict {
    /// No violation among all Hankel matrices built from the prefix.
    PassUpTo(usize),
    /// Smallest order `k` whose Hankel matrix (shifted or not) is not PSD.
    Fail { order: usize, shifted: bool, min_eig: f64 },
}

impl StieltjesVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, StieltjesVerdict::PassUpTo(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlternatingVerdict {
    PassUpTo(usize),
    /// `Σ_j (-1)^j C(n,j) a_{m+j} > 0`.
    Fail { m: usize, n: usize, value: f64 },
}

impl AlternatingVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, AlternatingVerdict::PassUpTo(_))
    }
}

/// Hankel matrix `[t_{i+j+shift}]` of order `k` (size `k+1`).
pub fn hankel(values: &[f64], k: usize, shift: usize) -> Result<Vec<Vec<f64>>, MeasureError> {
    if 2 * k + shift >= values.len() {
        return Err(MeasureError::InsufficientLength);
    }
    Ok((0..=k)
        .map(|i| (0..=k).map(|j| values[i + j + shift]).collect())
        .collect())
}

fn psd_margin(h: &[Vec<f64>], tol: f64) -> (f64, bool) {
    let scale = h.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
    let min = symmetric_eigenvalues(h)[0];
    (min, min >= -tol * (1.0 + scale))
}

/// Positive semidefiniteness of both Hankel families over the available window.
pub fn is_stieltjes(p: &MomentPrefix, tol: f64) -> Result<StieltjesVerdict, MeasureError> {
    let t = &p.values;
    if t.is_empty() {
        return Err(MeasureError::EmptyPrefix);
    }
    let n = t.len() - 1;
    let mut k = 0;
    while 2 * k <= n {
        for shift in [0, 1] {
            if 2 * k + shift > n {
                continue;
            }
            let h = hankel(t, k, shift)?;
            let (min, ok) = psd_margin(&h, tol);
            if !ok {
                return Ok(StieltjesVerdict::Fail { order: k, shifted: shift == 1, min_eig: min });
            }
        }
        k += 1;
    }
    Ok(StieltjesVerdict::PassUpTo(n))
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Nonpositivity of all iterated differences `Σ_j (-1)^j C(n,j) a_{m+j}`, `n ≥ 1`.
pub fn is_completely_alternating(
    p: &MomentPrefix,
    tol: f64,
) -> Result<AlternatingVerdict, MeasureError> {
    let a = &p.values;
    if a.is_empty() {
        return Err(MeasureError::EmptyPrefix);
    }
    let last = a.len() - 1;
    for n in 1..=last {
        for m in 0..=last - n {
            let mut value = 0.0;
            let mut scale = 0.0;
            for j in 0..=n {
                let term = binomial(n, j) * a[m + j];
                value += if j % 2 == 0 { term } else { -term };
                scale += term.abs();
            }
            if value > tol * (1.0 + scale) {
                return Ok(AlternatingVerdict::Fail { m, n, value });
            }
        }
    }
    Ok(AlternatingVerdict::PassUpTo(last))
}

/// `ν = (1/s)·μ + (1 - ∫ 1/s dμ)·δ₀`, whose moments are those of `μ` shifted by one.
pub fn backward_extend_stieltjes(m: &AtomicMeasure) -> Result<AtomicMeasure, MeasureError> {
    let inv = m.moment(-1);
    if !(inv <= 1.0 + EXTENSION_TOL) {
        return Err(MeasureError::ConditionViolated(inv));
    }
    let mut atoms: Vec<(f64, f64)> = m.atoms.iter().map(|&(x, w)| (x, w / x)).collect();
    let deficit = 1.0 - inv;
    if deficit > EXTENSION_TOL {
        atoms.push((0.0, deficit));
    }
    AtomicMeasure::new(atoms)
}

/// `ϱ = (1/s)·τ + (a0 - 1 - ∫ 1/s dτ)·δ₀` for a measure `τ` on `[0,1]`.
pub fn backward_extend_ca(a0: f64, t: &AtomicMeasure) -> Result<AtomicMeasure, MeasureError> {
    t.within_unit_interval()?;
    let need = 1.0 + t.moment(-1);
    if !(need <= a0 + EXTENSION_TOL) {
        return Err(MeasureError::ConditionViolated(need));
    }
    let mut atoms: Vec<(f64, f64)> = t.atoms.iter().map(|&(x, w)| (x, w / x)).collect();
    let deficit = a0 - need;
    if deficit > EXTENSION_TOL {
        atoms.push((0.0, deficit));
    }
    AtomicMeasure::new(atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn m(atoms: &[(f64, f64)]) -> AtomicMeasure {
        AtomicMeasure::new(atoms.to_vec()).unwrap()
    }

    fn oracle_min_eig(values: &[f64], k: usize, shift: usize) -> f64 {
        let h = DMatrix::from_fn(k + 1, k + 1, |i, j| values[i + j + shift]);
        h.symmetric_eigen().eigenvalues.min()
    }

    #[test]
    fn simple_moments() {
        assert_eq!(AtomicMeasure::dirac(1.0).moment(7), 1.0);
        assert_eq!(m(&[(1.0, 0.5), (4.0, 0.5)]).moment(1), 2.5);
        assert_eq!(AtomicMeasure::dirac(0.0).moment(-1), f64::INFINITY);
        assert_eq!(AtomicMeasure::dirac(0.0).moment(0), 1.0);
    }

    #[test]
    fn invalid_atoms() {
        assert!(AtomicMeasure::new(vec![(-1.0, 1.0)]).is_err());
        assert!(AtomicMeasure::new(vec![(1.0, 0.0)]).is_err());
        assert!(AtomicMeasure::new(vec![(1.0, 1.0), (1.0, 2.0)]).is_err());
    }

    #[test]
    fn constant_prefix_is_stieltjes() {
        let v = is_stieltjes(&MomentPrefix::new(vec![1.0; 5]), 1e-9).unwrap();
        assert_eq!(v, StieltjesVerdict::PassUpTo(4));
    }

    #[test]
    fn two_branch_counterexample_fails() {
        let (a, b) = (0.6f64, 0.8f64);
        let r = (b / a).powi(2);
        let p = MomentPrefix::new(vec![1.0, r, 1.0, 1.0, 1.0]);
        match is_stieltjes(&p, 1e-9).unwrap() {
            StieltjesVerdict::Fail { order, shifted, .. } => {
                assert_eq!((order, shifted), (1, false));
                assert!(oracle_min_eig(&p.values, 1, 0) < 0.0);
            }
            other => panic!("expected failure, got {other:?}"),
        }
        let q = MomentPrefix::new(vec![1.0, r, 1.0, 1.0]);
        assert_eq!(
            is_completely_alternating(&q, 1e-9).unwrap(),
            AlternatingVerdict::Fail { m: 1, n: 1, value: r - 1.0 }
        );
    }

    #[test]
    fn two_atom_moments_pass_with_oracle_agreement() {
        let mu = m(&[(1.0, 0.5), (2.0, 0.5)]);
        let p = mu.moments(8);
        assert!(is_stieltjes(&p, 1e-9).unwrap().passed());
        for k in 0..=3 {
            for shift in [0, 1] {
                let h = hankel(&p.values, k, shift).unwrap();
                let ours = symmetric_eigenvalues(&h)[0];
                let theirs = oracle_min_eig(&p.values, k, shift);
                assert!((ours - theirs).abs() < 1e-10 * (1.0 + p.values[8]));
                assert!(theirs > -1e-9 * (1.0 + p.values[8]));
            }
        }
    }

    #[test]
    fn alternating_examples() {
        let pass = |v: Vec<f64>| is_completely_alternating(&MomentPrefix::new(v), 1e-9).unwrap();
        assert!(pass(vec![1.0; 4]).passed());
        assert!(pass(vec![1.0, 2.0, 3.0, 4.0, 5.0]).passed());
        assert_eq!(
            AtomicMeasure::dirac(1.0).alternating_sequence(1.0, 4).values,
            vec![1.0, 2.0, 3.0, 4.0, 5.0]
        );
        assert!(matches!(
            is_completely_alternating(&MomentPrefix::new(vec![]), 1e-9),
            Err(MeasureError::EmptyPrefix)
        ));
    }

    #[test]
    fn stieltjes_backward_extension() {
        assert_eq!(
            backward_extend_stieltjes(&AtomicMeasure::dirac(1.0)).unwrap(),
            AtomicMeasure::dirac(1.0)
        );
        let nu = backward_extend_stieltjes(&AtomicMeasure::dirac(2.0)).unwrap();
        assert_eq!(nu.atoms(), &[(0.0, 0.5), (2.0, 0.5)]);
        for n in 0..=6 {
            assert_eq!(nu.moment(n + 1), AtomicMeasure::dirac(2.0).moment(n));
        }
        assert_eq!(nu.moment(0), 1.0);
        assert_eq!(
            backward_extend_stieltjes(&AtomicMeasure::dirac(0.5)),
            Err(MeasureError::ConditionViolated(2.0))
        );
    }

    #[test]
    fn alternating_backward_extension() {
        assert!(backward_extend_ca(1.0, &AtomicMeasure::zero()).unwrap().is_zero());
        let d1 = AtomicMeasure::dirac(1.0);
        assert_eq!(backward_extend_ca(2.0, &d1).unwrap(), d1);
        let tau = m(&[(0.5, 0.5)]);
        let rho = backward_extend_ca(2.0, &tau).unwrap();
        assert_eq!(rho.atoms(), &[(0.5, 1.0)]);
        // a_{-1} = 1 prepended to a_n gives the sequence represented by rho
        let a = tau.alternating_sequence(2.0, 6).values;
        let b = rho.alternating_sequence(1.0, 7).values;
        for n in 0..=6 {
            assert!((b[n + 1] - a[n]).abs() < 1e-14);
        }
        assert!(backward_extend_ca(1.5, &d1).is_err());
        assert!(backward_extend_ca(3.0, &AtomicMeasure::dirac(2.0)).is_err());
    }
}
