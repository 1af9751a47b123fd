//! The weighted shift on a (possibly truncated) directed tree.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::family::FamilyKind;
use crate::linalg::symmetric_eigenvalues;
use crate::tree::{Coord, DirectedTree, Direction, IndexError, OpenEnd};
use crate::weights::{Tail, Trend, WeightError, WeightSystem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShiftError {
    #[error(transparent)]
    Weights(#[from] WeightError),
    #[error("children of {0} are not materialized")]
    IncompleteTruncation(String),
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("exponent must be positive, got {0}")]
    InvalidExponent(f64),
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Finitely supported vector on the vertices of a tree, keyed by vertex index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FiniteVector {
    support: BTreeMap<usize, Complex64>,
}

impl FiniteVector {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn basis(v: usize) -> Self {
        let mut f = Self::zero();
        f.add(v, Complex64::new(1.0, 0.0));
        f
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, Complex64)>) -> Self {
        let mut f = Self::zero();
        for (v, c) in pairs {
            f.add(v, c);
        }
        f
    }

    pub fn add(&mut self, v: usize, c: Complex64) {
        let entry = self.support.entry(v).or_insert(ZERO);
        *entry += c;
        if *entry == ZERO {
            self.support.remove(&v);
        }
    }

    pub fn get(&self, v: usize) -> Complex64 {
        self.support.get(&v).copied().unwrap_or(ZERO)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        self.support.iter().map(|(&v, &c)| (v, c))
    }

    pub fn is_zero(&self) -> bool {
        self.support.is_empty()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn norm_squared(&self) -> f64 {
        self.support.values().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// `⟨self, g⟩`, linear in the first argument.
    pub fn inner(&self, g: &FiniteVector) -> Complex64 {
        self.iter().map(|(v, c)| c * g.get(v).conj()).sum()
    }
}

/// Cardinal that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Card {
    Finite(u64),
    Infinite,
}

impl Card {
    fn plus(self, n: u64) -> Card {
        match self {
            Card::Finite(a) => Card::Finite(a + n),
            Card::Infinite => Card::Infinite,
        }
    }
}

impl fmt::Display for Card {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Card::Finite(n) => write!(f, "{n}"),
            Card::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FredholmData {
    pub a: Card,
    pub b: Card,
    pub c: f64,
    pub is_fredholm: bool,
    pub index: Option<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormValue {
    pub value: f64,
    /// False when `value` is only a lower bound from the materialized part.
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polar {
    /// `‖S e_u‖`, for complete vertices.
    pub modulus: Vec<Option<f64>>,
    /// Weights of the partial isometry; zero where the parent is not in `V⁺`
    /// or not complete.
    pub pi: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtDepth {
    Bounded,
    Growing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainCriterion {
    pub sup: f64,
    pub witness: Option<String>,
    /// Largest value among tested vertices of each level, `NaN` if none.
    pub level_sups: Vec<f64>,
    /// Level maxima nondecreasing over the last half of the levels.
    pub monotone: bool,
    pub verdict: AtDepth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainInclusion {
    /// `D(S) ⊆ D(S*)`
    pub fwd: DomainCriterion,
    /// `D(S*) ⊆ D(S)` through `sup ‖T_u‖`.
    pub bwd: DomainCriterion,
    /// Hilbert-Schmidt norms of `T_u`.
    pub bwd_hs: DomainCriterion,
    /// Traces of `T_u`.
    pub bwd_trace: DomainCriterion,
    pub depth: usize,
}

#[derive(Debug, Clone)]
pub struct WeightedShift {
    tree: DirectedTree,
    weights: WeightSystem,
    lambda: Vec<Complex64>,
}

impl WeightedShift {
    pub fn new(tree: DirectedTree, weights: WeightSystem) -> Result<Self, ShiftError> {
        let lambda = weights.resolve(&tree)?;
        Ok(Self { tree, weights, lambda })
    }

    pub fn tree(&self) -> &DirectedTree {
        &self.tree
    }

    pub fn weights(&self) -> &WeightSystem {
        &self.weights
    }

    pub fn lambda(&self, v: usize) -> Complex64 {
        self.lambda[v]
    }

    pub fn lambdas(&self) -> &[Complex64] {
        &self.lambda
    }

    fn vertex(&self, id: &str) -> Result<usize, ShiftError> {
        self.tree.get(id).ok_or_else(|| ShiftError::UnknownVertex(id.into()))
    }

    fn require_complete(&self, u: usize) -> Result<(), ShiftError> {
        if self.tree.is_complete(u) {
            Ok(())
        } else {
            Err(ShiftError::IncompleteTruncation(self.tree.id(u).into()))
        }
    }

    /// Weight of any family vertex, materialized or not.
    fn weight_in(&self, family: &FamilyKind, c: Coord) -> Option<Complex64> {
        let id = family.id_of(c)?;
        match self.tree.get(&id) {
            Some(v) => Some(self.lambda[v]),
            None => self.weights.weight_of(&self.tree, &id),
        }
    }

    /// Weight at branch coordinates of the underlying family.
    pub fn weight_at(&self, c: Coord) -> Option<Complex64> {
        self.weight_in(self.tree.family()?, c)
    }

    /// `‖S e_v‖²`, also for the last vertex of an open straight branch,
    /// whose only child is the next vertex of the branch.
    pub fn norm_squared_ext(&self, v: usize) -> Option<f64> {
        if let Some(s) = self.column_norm_squared(v) {
            return Some(s);
        }
        let c = self.tree.coord(v)?;
        let on_end = self.tree.open_ends()?.iter().any(|e| {
            e.direction == Direction::Forward && e.branch == c.branch && e.last == c.pos
        });
        if !on_end {
            return None;
        }
        self.weight_at(Coord { branch: c.branch, pos: c.pos + 1 }).map(|w| w.norm_sqr())
    }

    pub fn apply(&self, f: &FiniteVector) -> Result<FiniteVector, ShiftError> {
        let mut out = FiniteVector::zero();
        for (u, c) in f.iter() {
            self.require_complete(u)?;
            for &v in self.tree.children(u) {
                out.add(v, self.lambda[v] * c);
            }
        }
        Ok(out)
    }

    pub fn apply_adjoint(&self, f: &FiniteVector) -> Result<FiniteVector, ShiftError> {
        let mut out = FiniteVector::zero();
        for (v, c) in f.iter() {
            match self.tree.parent(v) {
                Some(p) => out.add(p, self.lambda[v].conj() * c),
                None if self.tree.open_top() => {
                    return Err(ShiftError::IncompleteTruncation(self.tree.id(v).into()))
                }
                None => {}
            }
        }
        Ok(out)
    }

    /// `‖S e_u‖²` for a complete vertex.
    pub fn column_norm_squared(&self, u: usize) -> Option<f64> {
        self.tree.is_complete(u).then(|| {
            self.tree.children(u).iter().map(|&v| self.lambda[v].norm_sqr()).sum()
        })
    }

    /// `V⁺` membership for complete vertices.
    pub fn in_v_plus(&self, u: usize) -> Option<bool> {
        self.column_norm_squared(u).map(|s| s > 0.0)
    }

    pub fn norm(&self) -> NormValue {
        let mut value = (0..self.tree.len())
            .filter_map(|u| self.column_norm_squared(u))
            .fold(0.0_f64, f64::max)
            .sqrt();
        if !self.tree.is_truncated() {
            return NormValue { value, exact: true };
        }
        let (Some(family), Some(rules)) = (self.tree.family(), self.weights.beyond(&self.tree))
        else {
            return NormValue { value, exact: false };
        };
        let mut exact = true;
        for rule in rules {
            // every vertex past the materialized part has a single child
            let from = match rule.end.direction {
                Direction::Forward => rule.end.last + 1,
                Direction::Backward => rule.end.last,
            };
            for pos in from..rule.start.max(from) {
                let w = self.weight_in(family, Coord { branch: rule.end.branch, pos });
                value = value.max(w.map_or(f64::NAN, |w| w.norm()));
            }
            value = value.max(rule.tail.sup_from(rule.start.max(from)));
            exact &= rule.tail.trend() != Trend::Unknown || matches!(rule.tail, Tail::Affine { .. });
        }
        NormValue { value, exact: exact && !value.is_nan() }
    }

    /// `‖Sⁿ e_u‖²` as the sum of squared path products over the `n`-th generation.
    pub fn power_norm_squared(&self, u: usize, n: usize) -> Result<f64, ShiftError> {
        let mut total = 0.0;
        let mut stack = vec![(u, 0usize, 1.0_f64)];
        while let Some((v, k, w)) = stack.pop() {
            if k == n {
                total += w;
                continue;
            }
            self.require_complete(v)?;
            for &c in self.tree.children(v) {
                stack.push((c, k + 1, w * self.lambda[c].norm_sqr()));
            }
        }
        Ok(total)
    }

    pub fn power_norm_squared_of(&self, id: &str, n: usize) -> Result<f64, ShiftError> {
        self.power_norm_squared(self.vertex(id)?, n)
    }

    /// `‖S*ⁿ e_u‖`: the product of weights along the path up from `u`.
    pub fn adjoint_power_norm(&self, u: usize, n: usize) -> Result<f64, ShiftError> {
        let mut v = u;
        let mut acc = 1.0;
        for _ in 0..n {
            match self.tree.parent(v) {
                Some(p) => {
                    acc *= self.lambda[v].norm();
                    v = p;
                }
                None if self.tree.open_top() => {
                    return Err(ShiftError::IncompleteTruncation(self.tree.id(v).into()))
                }
                None => return Ok(0.0),
            }
        }
        Ok(acc)
    }

    pub fn polar(&self) -> Polar {
        let modulus: Vec<Option<f64>> = (0..self.tree.len())
            .map(|u| self.column_norm_squared(u).map(f64::sqrt))
            .collect();
        let pi = (0..self.tree.len())
            .map(|v| match self.tree.parent(v).and_then(|p| modulus[p]) {
                Some(m) if m > 0.0 => self.lambda[v] / m,
                _ => ZERO,
            })
            .collect();
        Polar { modulus, pi }
    }

    /// The partial isometry of the polar decomposition as a shift on the same tree.
    pub fn polar_isometry(&self) -> Result<WeightedShift, ShiftError> {
        let polar = self.polar();
        let mut w = WeightSystem::default();
        for v in 0..self.tree.len() {
            if Some(v) != self.tree.root() {
                w.base.insert(self.tree.id(v).into(), polar.pi[v]);
            }
        }
        WeightedShift::new(self.tree.clone(), w)
    }

    /// `u ↦ ‖S e_u‖^α` on complete vertices.
    pub fn modulus_power(&self, alpha: f64) -> Result<Vec<Option<f64>>, ShiftError> {
        if !(alpha > 0.0) {
            return Err(ShiftError::InvalidExponent(alpha));
        }
        Ok((0..self.tree.len())
            .map(|u| self.column_norm_squared(u).map(|s| s.powf(alpha / 2.0)))
            .collect())
    }

    pub fn fredholm_data(&self) -> Result<FredholmData, IndexError> {
        if matches!(self.tree.family(), Some(FamilyKind::Binary { .. })) {
            return Ok(FredholmData {
                a: Card::Finite(0),
                b: Card::Infinite,
                c: self.materialized_c(),
                is_fredholm: false,
                index: None,
            });
        }
        let mut a = Card::Finite(0);
        let mut b = Card::Finite(0);
        let mut c = self.materialized_c();
        for u in 0..self.tree.len() {
            let Some(s) = self.column_norm_squared(u) else { continue };
            let k = self.tree.children(u).len() as u64;
            if s > 0.0 {
                b = b.plus(k - 1);
            } else {
                a = a.plus(1);
                b = b.plus(k);
            }
        }
        if self.tree.is_truncated() {
            let (Some(family), Some(rules)) = (self.tree.family(), self.weights.beyond(&self.tree))
            else {
                return Err(IndexError::Indeterminate(
                    "weights past the truncation follow no single rule".into(),
                ));
            };
            for rule in rules {
                let (ea, ec) = self.beyond_zero_data(family, rule.end, rule.start, &rule.tail)?;
                if ea == Card::Infinite {
                    a = Card::Infinite;
                    b = Card::Infinite;
                } else if let Card::Finite(n) = ea {
                    a = a.plus(n);
                    b = b.plus(n);
                }
                c = c.min(ec);
            }
        }
        let is_fredholm = c > 0.0 && b != Card::Infinite;
        let index = match (is_fredholm, a, b) {
            (true, Card::Finite(a), Card::Finite(b)) => {
                Some(a as i64 - b as i64 - i64::from(self.tree.root().is_some()))
            }
            _ => None,
        };
        Ok(FredholmData { a, b, c, is_fredholm, index })
    }

    fn materialized_c(&self) -> f64 {
        let mut c = f64::INFINITY;
        for v in 0..self.tree.len() {
            let Some(p) = self.tree.parent(v) else { continue };
            if self.tree.is_complete(p) && self.tree.children(p).len() == 1 {
                let w = self.lambda[v].norm();
                if w > 0.0 {
                    c = c.min(w);
                }
            }
        }
        c
    }

    /// Zero-norm vertices and the contribution to `𝔠` past an open end. Every
    /// vertex there has exactly one child.
    fn beyond_zero_data(
        &self,
        family: &FamilyKind,
        end: OpenEnd,
        start: usize,
        tail: &Tail,
    ) -> Result<(Card, f64), IndexError> {
        let from = match end.direction {
            Direction::Forward => end.last + 1,
            Direction::Backward => end.last,
        };
        let mut zeros = 0u64;
        let mut c = f64::INFINITY;
        for pos in from..start.max(from) {
            let w = self
                .weight_in(family, Coord { branch: end.branch, pos })
                .ok_or_else(|| IndexError::Indeterminate(format!("no weight at {pos}")))?
                .norm();
            if w == 0.0 {
                zeros += 1;
            } else {
                c = c.min(w);
            }
        }
        let s = start.max(from);
        let always_zero = matches!(tail.trend(), Trend::Constant(m) if m == 0.0)
            || matches!(tail, Tail::Power(q) if *q == 0.0);
        if always_zero {
            return Ok((Card::Infinite, c));
        }
        let known = tail.trend() != Trend::Unknown || matches!(tail, Tail::Affine { .. });
        let inf = tail.inf_from(s);
        let never_zero = known && (inf > 0.0 || tail_never_vanishes(tail));
        if !never_zero {
            return Err(IndexError::Indeterminate(format!(
                "zero pattern of branch {} past the truncation",
                end.branch
            )));
        }
        Ok((Card::Finite(zeros), c.min(inf)))
    }

    /// Unitarily equivalent shift with weights `|λ|`, and the phases `β` with
    /// `λ_v β_v conj(β_{pa v}) = |λ_v|`.
    pub fn normalize_weights(&self) -> Result<(WeightedShift, Vec<Complex64>), ShiftError> {
        let one = Complex64::new(1.0, 0.0);
        let mut beta = vec![one; self.tree.len()];
        for v in self.tree.bfs() {
            if let Some(p) = self.tree.parent(v) {
                let l = self.lambda[v];
                beta[v] = if l == ZERO { one } else { l.conj() / l.norm() * beta[p] };
            }
        }
        let abs = WeightedShift::new(self.tree.clone(), self.weights.modulus())?;
        Ok((abs, beta))
    }

    pub fn domain_inclusion_criteria(&self) -> DomainInclusion {
        let tree = &self.tree;
        let depth = (0..tree.len()).map(|v| tree.level(v)).max().unwrap_or(0);
        let mut rows: Vec<(usize, usize, [f64; 4])> = Vec::new();
        for u in 0..tree.len() {
            let Some(su) = self.column_norm_squared(u) else { continue };
            let kids = tree.children(u);
            if kids.is_empty() {
                continue;
            }
            let d: Option<Vec<f64>> = kids.iter().map(|&v| self.column_norm_squared(v)).collect();
            let Some(d) = d else { continue };
            let l2: Vec<f64> = kids.iter().map(|&v| self.lambda[v].norm_sqr()).collect();
            let fwd: f64 = l2.iter().zip(&d).map(|(l, dv)| l / (1.0 + dv)).sum();
            let t = t_matrix(&d, &l2, su);
            let top = symmetric_eigenvalues(&t).last().copied().unwrap_or(0.0);
            let hs = t.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
            let trace = (0..t.len()).map(|i| t[i][i]).sum::<f64>();
            rows.push((u, tree.level(u), [fwd, top, hs, trace]));
        }
        let crit = |k: usize| summarize(tree, depth, rows.iter().map(|(u, l, x)| (*u, *l, x[k])));
        DomainInclusion { fwd: crit(0), bwd: crit(1), bwd_hs: crit(2), bwd_trace: crit(3), depth }
    }

    /// Solution `θ` of `θ_{pa v} − θ_v = c` on all materialized edges with
    /// `θ_anchor = value`.
    pub fn solve_grading(
        tree: &DirectedTree,
        c: f64,
        anchor: (&str, f64),
    ) -> Result<Vec<f64>, ShiftError> {
        let start = tree.get(anchor.0).ok_or_else(|| ShiftError::UnknownVertex(anchor.0.into()))?;
        let mut theta = vec![f64::NAN; tree.len()];
        theta[start] = anchor.1;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            if let Some(p) = tree.parent(v) {
                if theta[p].is_nan() {
                    theta[p] = theta[v] + c;
                    queue.push_back(p);
                }
            }
            for &w in tree.children(v) {
                if theta[w].is_nan() {
                    theta[w] = theta[v] - c;
                    queue.push_back(w);
                }
            }
        }
        Ok(theta)
    }
}

fn tail_never_vanishes(tail: &Tail) -> bool {
    match tail {
        Tail::Constant(c) => *c != ZERO,
        Tail::Power(q) => *q != 0.0,
        Tail::Factorial | Tail::PowerLaw(_) => true,
        _ => false,
    }
}

/// `T_u = ρ D^{1/2} ((1+s) I − λλ*) D^{1/2}` with `ρ = 1/(1+s)`, `s = ‖S e_u‖²`,
/// after removing phases. This form avoids the cancellation in `D − ρ w w*`.
fn t_matrix(d: &[f64], l2: &[f64], s: f64) -> Vec<Vec<f64>> {
    let rho = 1.0 / (1.0 + s);
    let n = d.len();
    (0..n)
        .map(|i| {
            // sibling sum taken directly: `total - l2[i]` cancels for large weights
            let others: f64 = l2.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, x)| x).sum();
            (0..n)
                .map(|j| {
                    if i == j {
                        rho * d[i] * (1.0 + others)
                    } else {
                        -rho * (d[i] * d[j] * l2[i] * l2[j]).sqrt()
                    }
                })
                .collect()
        })
        .collect()
}

const BOUNDED_REL_TOL: f64 = 1e-6;

fn summarize(
    tree: &DirectedTree,
    depth: usize,
    rows: impl Iterator<Item = (usize, usize, f64)>,
) -> DomainCriterion {
    let mut level_sups = vec![f64::NAN; depth + 1];
    let mut sup = f64::NEG_INFINITY;
    let mut witness = None;
    for (u, l, x) in rows {
        if !(level_sups[l] >= x) {
            level_sups[l] = x;
        }
        if x > sup {
            sup = x;
            witness = Some(tree.id(u).to_string());
        }
    }
    let tested: Vec<f64> = level_sups.iter().copied().filter(|x| !x.is_nan()).collect();
    let n = tested.len();
    let half = &tested[n / 2..];
    let monotone = half.windows(2).all(|w| w[1] >= w[0]);
    let mut running = tested.clone();
    for i in 1..n {
        running[i] = running[i].max(running[i - 1]);
    }
    let verdict = if n < 2 {
        AtDepth::Bounded
    } else {
        let q = n - 1 - (n / 4).max(1);
        let (a, b) = (running[q], running[n - 1]);
        if b - a <= BOUNDED_REL_TOL * a.abs().max(f64::MIN_POSITIVE) {
            AtDepth::Bounded
        } else {
            AtDepth::Growing
        }
    };
    DomainCriterion {
        sup: if sup.is_finite() { sup } else { 0.0 },
        witness,
        level_sups,
        monotone,
        verdict,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{Kappa, TreeFamily};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn two_branch(depth: usize) -> WeightedShift {
        let tree = TreeFamily::new(FamilyKind::t_eta_kappa(2, Kappa::Finite(1)).unwrap(), depth)
            .materialize();
        let w = WeightSystem::with_base([("0", 4.0)])
            .tail(1, &[4.0], Tail::Constant(c(8.0)))
            .tail(2, &[1.0], Tail::Constant(c(1.9)));
        WeightedShift::new(tree, w).unwrap()
    }

    #[test]
    fn apply_on_basis_vectors() {
        let s = two_branch(4);
        let zero = s.tree().get("0").unwrap();
        let out = s.apply(&FiniteVector::basis(zero)).unwrap();
        let t = s.tree();
        assert_eq!(out.get(t.get("(1,1)").unwrap()), c(4.0));
        assert_eq!(out.get(t.get("(2,1)").unwrap()), c(1.0));
        assert_eq!(out.len(), 2);
        assert!(s.apply(&FiniteVector::zero()).unwrap().is_zero());
    }

    #[test]
    fn root_maps_to_first_vertex_on_z_plus() {
        let tree = TreeFamily::new(FamilyKind::ZPlus, 3).materialize();
        let s = WeightedShift::new(tree, WeightSystem::constant(1.0)).unwrap();
        let out = s.apply(&FiniteVector::basis(0)).unwrap();
        assert_eq!(out, FiniteVector::basis(1));
        assert!(s.apply_adjoint(&FiniteVector::basis(0)).unwrap().is_zero());
        let last = s.tree().get("3").unwrap();
        assert_eq!(
            s.apply(&FiniteVector::basis(last)),
            Err(ShiftError::IncompleteTruncation("3".into()))
        );
    }

    #[test]
    fn power_norms_on_two_branches() {
        let s = two_branch(6);
        let v = s.tree().get("(2,1)").unwrap();
        assert_eq!(s.power_norm_squared(v, 0).unwrap(), 1.0);
        assert!((s.power_norm_squared(v, 2).unwrap() - 1.9f64.powi(4)).abs() < 1e-12);
        assert_eq!(s.adjoint_power_norm(v, 2).unwrap(), 4.0);
        assert_eq!(s.adjoint_power_norm(v, 3).unwrap(), 0.0);
    }

    #[test]
    fn norm_is_exact_for_constant_tails() {
        let n = two_branch(5).norm();
        assert!(n.exact);
        assert!((n.value - 8.0).abs() < 1e-15);
        let tree = TreeFamily::new(FamilyKind::ZPlus, 5).materialize();
        let w = WeightSystem::default().tail(1, &[], Tail::Power(2.0));
        let n = WeightedShift::new(tree, w).unwrap().norm();
        assert_eq!(n, NormValue { value: f64::INFINITY, exact: true });
    }

    #[test]
    fn polar_of_constant_two() {
        let tree = TreeFamily::new(FamilyKind::ZPlus, 4).materialize();
        let s = WeightedShift::new(tree, WeightSystem::constant(2.0)).unwrap();
        let p = s.polar();
        for v in 1..4 {
            assert_eq!(p.pi[v], c(1.0));
        }
        assert_eq!(s.modulus_power(2.0).unwrap()[0], Some(4.0));
        assert!(s.modulus_power(0.0).is_err());
    }

    #[test]
    fn fredholm_on_classical_trees() {
        let one = |kind: FamilyKind| {
            let tree = TreeFamily::new(kind, 6).materialize();
            WeightedShift::new(tree, WeightSystem::constant(1.0)).unwrap().fredholm_data().unwrap()
        };
        assert_eq!(one(FamilyKind::Z).index, Some(0));
        assert_eq!(one(FamilyKind::ZPlus).index, Some(-1));
        assert_eq!(one(FamilyKind::ZMinus).index, Some(1));
        assert_eq!(one(FamilyKind::t_eta_kappa(2, Kappa::Finite(0)).unwrap()).index, Some(-2));
        assert_eq!(one(FamilyKind::t_eta_kappa(3, Kappa::Infinite).unwrap()).index, Some(-2));
        let tree = TreeFamily::new(FamilyKind::ZPlus, 6).materialize();
        let w = WeightSystem::default().tail(1, &[], Tail::PowerLaw(-1.0));
        let data = WeightedShift::new(tree, w).unwrap().fredholm_data().unwrap();
        assert_eq!(data.c, 0.0);
        assert!(!data.is_fredholm);
    }

    #[test]
    fn phases_for_negative_weights() {
        let tree = TreeFamily::new(FamilyKind::ZPlus, 5).materialize();
        let s = WeightedShift::new(tree, WeightSystem::constant(-1.0)).unwrap();
        let (abs, beta) = s.normalize_weights().unwrap();
        for n in 0..=5 {
            assert_eq!(beta[n], c(if n % 2 == 0 { 1.0 } else { -1.0 }));
        }
        assert_eq!(abs.lambda(3), c(1.0));
    }

    #[test]
    fn grading_on_z_plus() {
        let tree = TreeFamily::new(FamilyKind::ZPlus, 4).materialize();
        let theta = WeightedShift::solve_grading(&tree, 1.0, ("0", 0.0)).unwrap();
        assert_eq!(theta, vec![0.0, -1.0, -2.0, -3.0, -4.0]);
        assert!(WeightedShift::solve_grading(&tree, 1.0, ("x", 0.0)).is_err());
    }

    #[test]
    fn t_matrix_agrees_with_rank_one_form() {
        let d = [3.0, 0.5, 2.0];
        let l2 = [0.4, 1.5, 0.9];
        let s: f64 = l2.iter().sum();
        let t = t_matrix(&d, &l2, s);
        let rho = 1.0 / (1.0 + s);
        for i in 0..3 {
            for j in 0..3 {
                let w = (d[i] * l2[i]).sqrt() * (d[j] * l2[j]).sqrt();
                let want = if i == j { d[i] } else { 0.0 } - rho * w;
                assert!((t[i][j] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn t_matrix_keeps_small_siblings_beside_huge_weights() {
        let big = 1e20;
        let t = t_matrix(&[1.0 + big, 2.0], &[big, 1.0], big + 1.0);
        let rho = 1.0 / (2.0 + big);
        assert!((t[0][0] - rho * (1.0 + big) * 2.0).abs() < 1e-12 * t[0][0]);
    }
}
