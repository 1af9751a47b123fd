//! Operator-class predicates for weighted shifts on directed trees.
//!
//! Every check runs over the materialized vertices first. A violation there is
//! final. A clean pass is promoted to `Yes` only when the rules governing the
//! weights past the truncation make the remaining conditions provable;
//! otherwise the verdict is `NecessaryPass` at the materialization depth.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::family::{FamilyKind, Kappa};
use crate::measure::{
    is_completely_alternating, is_stieltjes, AlternatingVerdict, AtomicMeasure, MomentPrefix,
    StieltjesVerdict,
};
use crate::shift::{FiniteVector, ShiftError, WeightedShift};
use crate::tree::{Coord, DirectedTree, Direction};
use crate::weights::{Tail, Trend};

pub const CLASSIFY_TOL: f64 = 1e-10;

/// Default bound on the trunk conditions checked when `κ = ∞`.
pub const DEFAULT_K_CAP: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Yes,
    No,
    NecessaryPass(usize),
    Indeterminate(usize),
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Yes => "yes",
            Verdict::No => "no",
            Verdict::NecessaryPass(_) => "necessary-pass",
            Verdict::Indeterminate(_) => "indeterminate",
        }
    }

    /// Not refuted.
    pub fn passes(&self) -> bool {
        matches!(self, Verdict::Yes | Verdict::NecessaryPass(_))
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A concrete failed relation `lhs ≤ rhs` (or `lhs = rhs`) at a vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub vertex: String,
    pub partner: Option<String>,
    pub relation: String,
    pub lhs: f64,
    pub rhs: f64,
}

impl Witness {
    fn new(vertex: &str, relation: &str, lhs: f64, rhs: f64) -> Self {
        Self { vertex: vertex.into(), partner: None, relation: relation.into(), lhs, rhs }
    }

    fn with_partner(mut self, partner: &str) -> Self {
        self.partner = Some(partner.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub predicate: String,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub exact: bool,
    pub depth: usize,
    pub extremal: Option<bool>,
    pub chain: Option<Vec<String>>,
    pub notes: Vec<String>,
}

impl Entry {
    fn new(predicate: &str, verdict: Verdict, witness: Option<Witness>, depth: usize) -> Self {
        Self {
            predicate: predicate.into(),
            exact: matches!(verdict, Verdict::Yes | Verdict::No),
            verdict,
            witness,
            depth,
            extremal: None,
            chain: None,
            notes: Vec::new(),
        }
    }

    fn settle(predicate: &str, found: Option<Witness>, exact: bool, depth: usize) -> Self {
        let verdict = match (&found, exact) {
            (Some(_), _) => Verdict::No,
            (None, true) => Verdict::Yes,
            (None, false) => Verdict::NecessaryPass(depth),
        };
        Self::new(predicate, verdict, found, depth)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassificationReport {
    pub entries: Vec<Entry>,
}

impl ClassificationReport {
    pub fn get(&self, predicate: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.predicate == predicate)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelCheckError {
    #[error("model checks need a tree of the T_eta_kappa family")]
    NotTFamily,
    #[error("expected {expected} measures, got {got}")]
    MeasureCount { expected: usize, got: usize },
    #[error("measure {0} is not a probability measure")]
    NotProbability(usize),
    #[error("measure {0} is not supported in [0,1]")]
    NotOnUnitInterval(usize),
    #[error("moments of measure {branch} disagree with the weights at order {n}")]
    MeasureMismatch { branch: usize, n: usize },
    #[error("weight at {0} is zero or undefined")]
    ZeroWeight(String),
}

fn le(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs || lhs - rhs <= CLASSIFY_TOL * lhs.abs().max(rhs.abs())
}

fn approx_eq(lhs: f64, rhs: f64) -> bool {
    lhs == rhs || (lhs - rhs).abs() <= CLASSIFY_TOL * lhs.abs().max(rhs.abs())
}

/// Requirements on the moduli along open straight branches.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Along {
    Hyponormal,
    Isometry,
    Quasinormal,
    Cohyponormal,
    Vanishing,
}

fn trend_ok(req: Along, direction: Direction, trend: Trend) -> bool {
    use Direction::*;
    match (req, trend) {
        (_, Trend::Unknown) => false,
        (Along::Vanishing, t) => t == Trend::Constant(0.0),
        (Along::Isometry, Trend::Constant(c)) => approx_eq(c, 1.0),
        (Along::Isometry, _) => false,
        (_, Trend::Constant(_)) => true,
        (Along::Quasinormal, _) => false,
        (Along::Hyponormal, t) => match direction {
            Forward => t == Trend::Nondecreasing,
            Backward => t == Trend::Nonincreasing,
        },
        (Along::Cohyponormal, t) => match direction {
            Forward => t == Trend::Nonincreasing,
            Backward => t == Trend::Nondecreasing,
        },
    }
}

/// Whether passing every materialized check settles the predicate.
fn settled_beyond(s: &WeightedShift, req: Along) -> bool {
    let tree = s.tree();
    if !tree.is_truncated() {
        return true;
    }
    match tree.family() {
        Some(FamilyKind::Binary { .. }) => homogeneous_binary(s, req),
        Some(FamilyKind::Custom(_)) | None => false,
        Some(_) => match s.weights().beyond(tree) {
            Some(rules) => rules.iter().all(|r| {
                r.end.last > r.start && trend_ok(req, r.end.direction, r.tail.trend())
            }),
            None => false,
        },
    }
}

/// On the binary family with only default and subtree rules, every vertex below
/// the deepest rule anchor sits in one constant region together with all its
/// descendants; testing every vertex one level below the anchors covers all types.
fn homogeneous_binary(s: &WeightedShift, req: Along) -> bool {
    let tree = s.tree();
    let w = s.weights();
    if !w.tails.is_empty() {
        return false;
    }
    let Some(FamilyKind::Binary { single_stem, .. }) = tree.family() else { return false };
    let level_of = |id: &str| -> Option<usize> {
        if id == "root" {
            return Some(0);
        }
        tree.get(id).map(|v| tree.level(v))
    };
    let mut anchor = 0;
    for id in w.base.keys().chain(w.subtrees.iter().map(|r| &r.vertex)) {
        match level_of(id) {
            Some(l) => anchor = anchor.max(l),
            None => return false,
        }
    }
    if req == Along::Vanishing {
        let values = w.subtrees.iter().map(|r| r.value).chain(w.default);
        return values.chain(w.base.values().copied()).all(|c| c == Complex64::new(0.0, 0.0));
    }
    let probe = anchor + 1;
    let full = if *single_stem { 1usize << (probe - 1) } else { 1usize << probe };
    let row: Vec<usize> = (0..tree.len()).filter(|&v| tree.level(v) == probe).collect();
    row.len() == full
        && row.iter().all(|&u| {
            tree.is_complete(u) && tree.children(u).iter().all(|&v| tree.is_complete(v))
        })
}

struct Norms {
    sq: Vec<Option<f64>>,
}

impl Norms {
    fn of(s: &WeightedShift) -> Self {
        Self { sq: (0..s.tree().len()).map(|v| s.norm_squared_ext(v)).collect() }
    }

    /// Squared norms of all children of a complete vertex, if known.
    fn children(&self, tree: &DirectedTree, u: usize) -> Option<Vec<f64>> {
        if !tree.is_complete(u) {
            return None;
        }
        tree.children(u).iter().map(|&v| self.sq[v]).collect()
    }
}

fn hyponormal_violation(s: &WeightedShift, p: f64) -> Option<Witness> {
    let tree = s.tree();
    let norms = Norms::of(s);
    for u in tree.bfs() {
        let Some(kids) = norms.children(tree, u) else { continue };
        let ids = tree.children(u);
        for (&v, &nv) in ids.iter().zip(&kids) {
            let l = s.lambda(v).norm();
            if nv == 0.0 && l != 0.0 {
                return Some(Witness::new(tree.id(v), "|λ_v| = 0 when ‖S e_v‖ = 0", l, 0.0));
            }
        }
        let su = norms.sq[u].unwrap_or(0.0);
        if su == 0.0 {
            continue;
        }
        let mut sum = 0.0;
        for (&v, &nv) in ids.iter().zip(&kids) {
            if nv > 0.0 {
                sum += s.lambda(v).norm_sqr() / su * (su / nv).powf(p);
            }
        }
        if !le(sum, 1.0) {
            if p == 1.0 {
                let single = ids.iter().zip(&kids).find(|(&v, &nv)| {
                    nv > 0.0 && !le(s.lambda(v).norm_sqr(), nv)
                });
                if let Some((&v, &nv)) = single {
                    return Some(Witness::new(
                        tree.id(v),
                        "‖S* e_v‖ ≤ ‖S e_v‖",
                        s.lambda(v).norm(),
                        nv.sqrt(),
                    ));
                }
            }
            let relation = if p == 1.0 {
                "Σ |λ_v|²/‖S e_v‖² ≤ 1".to_string()
            } else {
                format!("‖S e_u‖^(2(p-1)) Σ |λ_v|²/‖S e_v‖^(2p) ≤ 1, p = {p}")
            };
            return Some(Witness::new(tree.id(u), &relation, sum, 1.0));
        }
    }
    None
}

pub fn is_hyponormal(s: &WeightedShift) -> Entry {
    let found = hyponormal_violation(s, 1.0);
    let exact = settled_beyond(s, Along::Hyponormal);
    Entry::settle("hyponormal", found, exact, s.tree().depth())
}

pub fn is_p_hyponormal(s: &WeightedShift, p: f64) -> Entry {
    assert!(p > 0.0, "p must be positive");
    let found = hyponormal_violation(s, p);
    let exact = settled_beyond(s, Along::Hyponormal);
    let mut e = Entry::settle("p_hyponormal", found, exact, s.tree().depth());
    e.notes.push(format!("p = {p}"));
    e
}

pub fn is_isometry(s: &WeightedShift) -> Entry {
    let tree = s.tree();
    let found = tree.bfs().into_iter().find_map(|u| {
        let n = s.column_norm_squared(u)?;
        (!approx_eq(n, 1.0)).then(|| Witness::new(tree.id(u), "‖S e_u‖² = 1", n, 1.0))
    });
    Entry::settle("isometry", found, settled_beyond(s, Along::Isometry), tree.depth())
}

pub fn is_quasinormal(s: &WeightedShift) -> Entry {
    let tree = s.tree();
    let norms = Norms::of(s);
    let mut found = None;
    'outer: for u in tree.bfs() {
        let Some(nu) = s.column_norm_squared(u) else { continue };
        for &v in tree.children(u) {
            if s.lambda(v).norm() == 0.0 {
                continue;
            }
            let Some(nv) = norms.sq[v] else { continue };
            if !approx_eq(nu, nv) {
                found = Some(
                    Witness::new(tree.id(u), "‖S e_u‖ = ‖S e_v‖", nu.sqrt(), nv.sqrt())
                        .with_partner(tree.id(v)),
                );
                break 'outer;
            }
        }
    }
    let mut e = Entry::settle("quasinormal", found, settled_beyond(s, Along::Quasinormal), tree.depth());
    if e.verdict.passes() && s.lambdas().iter().enumerate().all(|(v, l)| Some(v) == tree.root() || l.norm() > 0.0) {
        let values: Vec<f64> = (0..tree.len()).filter_map(|u| s.column_norm_squared(u)).collect();
        if let Some(&first) = values.first() {
            if values.iter().all(|&x| approx_eq(x, first)) {
                e.notes.push(format!("scalar multiple of an isometry, factor {}", first.sqrt()));
            }
        }
    }
    e
}

/// Chain `{u_n}` carrying the nonzero weights of a cohyponormal shift, read from
/// the top of the truncation, and the final broom children if any.
fn extract_chain(s: &WeightedShift, norms: &Norms) -> (Vec<String>, Vec<String>) {
    let tree = s.tree();
    let mut chain = vec![tree.top()];
    let mut broom = Vec::new();
    loop {
        let u = *chain.last().unwrap();
        let ids = tree.children(u);
        let Some(kids) = norms.children(tree, u) else {
            // unknown column norms below: the chain continues through the only nonzero weight
            let nonzero: Vec<usize> = ids.iter().copied().filter(|&v| s.lambda(v).norm() > 0.0).collect();
            if let [v] = nonzero[..] {
                chain.push(v);
            }
            break;
        };
        let plus: Vec<usize> =
            ids.iter().zip(&kids).filter(|(_, &n)| n > 0.0).map(|(&v, _)| v).collect();
        if plus.len() == 1 {
            chain.push(plus[0]);
        } else {
            if plus.is_empty() {
                broom = ids.iter().copied().filter(|&v| s.lambda(v).norm() > 0.0).collect();
            }
            break;
        }
    }
    let name = |v: &usize| tree.id(*v).to_string();
    (chain.iter().map(name).collect(), broom.iter().map(name).collect())
}

fn cohyponormal_violation(s: &WeightedShift, norms: &Norms) -> Option<Witness> {
    let tree = s.tree();
    if tree.root().is_some() {
        return tree.bfs().into_iter().find_map(|v| {
            let l = s.lambda(v).norm();
            (Some(v) != tree.root() && l != 0.0)
                .then(|| Witness::new(tree.id(v), "λ_v = 0 on a rooted tree", l, 0.0))
        });
    }
    for u in tree.bfs() {
        let Some(kids) = norms.children(tree, u) else { continue };
        let ids = tree.children(u);
        let plus: Vec<(usize, f64)> =
            ids.iter().zip(&kids).filter(|(_, &n)| n > 0.0).map(|(&v, &n)| (v, n)).collect();
        if plus.len() > 1 {
            return Some(Witness::new(tree.id(u), "card Chi⁺(u) ≤ 1", plus.len() as f64, 1.0));
        }
        if let Some(&(v, nv)) = plus.first() {
            let l = s.lambda(v).norm_sqr();
            if !le(nv, l) {
                return Some(Witness::new(tree.id(v), "‖S e_v‖ ≤ |λ_v|", nv.sqrt(), l.sqrt()));
            }
            if let Some(&w) = ids.iter().find(|&&w| w != v && s.lambda(w).norm() != 0.0) {
                return Some(
                    Witness::new(tree.id(w), "λ_w = 0 beside the chain", s.lambda(w).norm(), 0.0)
                        .with_partner(tree.id(v)),
                );
            }
        }
    }
    None
}

pub fn is_cohyponormal(s: &WeightedShift) -> Entry {
    let tree = s.tree();
    let norms = Norms::of(s);
    let found = cohyponormal_violation(s, &norms);
    let req = if tree.root().is_some() { Along::Vanishing } else { Along::Cohyponormal };
    let mut e = Entry::settle("cohyponormal", found, settled_beyond(s, req), tree.depth());
    if e.verdict.passes() && tree.root().is_none() {
        let (chain, broom) = extract_chain(s, &norms);
        if !broom.is_empty() {
            e.notes.push(format!("chain ends in children {}", broom.join(", ")));
        }
        e.chain = Some(chain);
    }
    e
}

pub fn is_normal(s: &WeightedShift) -> Entry {
    let tree = s.tree();
    let hyp = is_hyponormal(s);
    let co = is_cohyponormal(s);
    let depth = tree.depth();
    let verdict = match (hyp.verdict, co.verdict) {
        (Verdict::No, _) | (_, Verdict::No) => Verdict::No,
        (Verdict::Yes, Verdict::Yes) => Verdict::Yes,
        _ => Verdict::NecessaryPass(depth),
    };
    let witness = hyp.witness.or(co.witness);
    let mut e = Entry::new("normal", verdict, witness, depth);
    e.chain = co.chain;
    e
}

/// Hyponormality of `S^n` through the dense matrix power.
pub fn power_hyponormal(s: &WeightedShift, n: u32, tol: f64) -> Entry {
    let tr = crate::oracle::truncate(s);
    let depth = s.tree().depth();
    let name = if n == 2 { "square_hyponormal".to_string() } else { format!("power_{n}_hyponormal") };
    match crate::oracle::power_selfcommutator_check(&tr, n, tol) {
        Ok(check) if check.passed => {
            let mut e = Entry::new(&name, Verdict::NecessaryPass(depth), None, depth);
            e.notes.push(format!("min eigenvalue {:.3e}", check.min_eig));
            e
        }
        Ok(check) => {
            let vertex = check.witness.unwrap_or_default();
            let mut witness = Witness::new(&vertex, "‖S*ⁿ f‖ ≤ ‖Sⁿ f‖", f64::NAN, f64::NAN);
            if let Some(v) = s.tree().get(&vertex) {
                let (down, up) = tr.power_vector_norms(v, n as usize);
                witness.lhs = up;
                witness.rhs = down.sqrt();
            }
            Entry::new(&name, Verdict::No, Some(witness), depth)
        }
        Err(_) => Entry::new(&name, Verdict::Indeterminate(depth), None, depth),
    }
}

/// The predicates that need no extra input.
pub fn classify(s: &WeightedShift, p: Option<f64>) -> ClassificationReport {
    let mut entries = vec![
        is_isometry(s),
        is_quasinormal(s),
        is_normal(s),
        is_cohyponormal(s),
        is_hyponormal(s),
    ];
    if let Some(p) = p {
        entries.push(is_p_hyponormal(s, p));
    }
    ClassificationReport { entries }
}

fn model_shape(s: &WeightedShift, n: usize) -> Result<(usize, Kappa), ModelCheckError> {
    match s.tree().family() {
        Some(FamilyKind::TEtaKappa { eta, kappa }) => {
            if *eta != n {
                return Err(ModelCheckError::MeasureCount { expected: *eta, got: n });
            }
            Ok((*eta, *kappa))
        }
        _ => Err(ModelCheckError::NotTFamily),
    }
}

fn modulus_at(s: &WeightedShift, branch: usize, pos: usize) -> Result<f64, ModelCheckError> {
    let c = Coord { branch, pos };
    match s.weight_at(c).map(|w| w.norm()) {
        Some(w) if w > 0.0 => Ok(w),
        _ => Err(ModelCheckError::ZeroWeight(
            s.tree().family().and_then(|f| f.id_of(c)).unwrap_or_else(|| format!("{c:?}")),
        )),
    }
}

fn same_measure(a: &AtomicMeasure, b: &AtomicMeasure) -> bool {
    a.atoms().len() == b.atoms().len()
        && a.atoms().iter().zip(b.atoms()).all(|(x, y)| approx_eq(x.0, y.0) && approx_eq(x.1, y.1))
}

/// Whether branch `i`'s weights past its head are generated by `target`.
fn branch_generated_by(
    s: &WeightedShift,
    branch: usize,
    covered: usize,
    matches: impl Fn(&Tail) -> bool,
) -> bool {
    let Some(rules) = s.weights().beyond(s.tree()) else { return false };
    rules.iter().any(|r| r.end.branch == branch && r.start <= covered && matches(&r.tail))
}

/// Products `P_k = ∏_{j<k} |λ_{-j}|` for `k = 0..=up_to`.
fn trunk_products(s: &WeightedShift, up_to: usize) -> Result<Vec<f64>, ModelCheckError> {
    let mut p = vec![1.0];
    for j in 0..up_to {
        let w = modulus_at(s, 0, j)?;
        p.push(p[j] * w);
    }
    Ok(p)
}

fn check_moment_match(
    s: &WeightedShift,
    measures: &[AtomicMeasure],
    n_max: usize,
    target: impl Fn(&AtomicMeasure, usize) -> f64,
) -> Result<(), ModelCheckError> {
    for (i, m) in measures.iter().enumerate() {
        let mut prod = 1.0;
        for n in 1..=n_max {
            let w = modulus_at(s, i + 1, n + 1)?;
            prod *= w * w;
            if !approx_eq(target(m, n), prod) {
                return Err(ModelCheckError::MeasureMismatch { branch: i + 1, n });
            }
        }
    }
    Ok(())
}

/// Subnormality on `𝒯_{η,κ}` against candidate measures `μ_1..μ_η` for the branches.
pub fn subnormal_on_t(
    s: &WeightedShift,
    measures: &[AtomicMeasure],
    k_cap: usize,
) -> Result<Entry, ModelCheckError> {
    let (eta, kappa) = model_shape(s, measures.len())?;
    for (i, m) in measures.iter().enumerate() {
        if !approx_eq(m.total_mass(), 1.0) {
            return Err(ModelCheckError::NotProbability(i + 1));
        }
    }
    let depth = s.tree().depth();
    let n_max = depth.max(k_cap) + 2;
    check_moment_match(s, measures, n_max, |m, n| m.moment(n as i32))?;
    let mut exact = (1..=eta).all(|i| {
        let mu = &measures[i - 1];
        branch_generated_by(s, i, n_max, |t| match t {
            Tail::MomentRatio(m) => same_measure(m, mu),
            Tail::Constant(c) => mu.atoms().len() == 1 && approx_eq(c.norm_sqr(), mu.atoms()[0].0),
            _ => false,
        })
    });
    let first: Vec<f64> = (1..=eta).map(|i| modulus_at(s, i, 1)).collect::<Result<_, _>>()?;
    let t = |k: i32| -> f64 {
        first.iter().zip(measures).map(|(l, m)| l * l * m.moment(-k)).sum()
    };
    let mut found = None;
    let mut extremal = None;
    let rel_first = "Σ |λ_{i,1}|² ∫ s⁻¹ dμ_i";
    match kappa {
        Kappa::Finite(0) => {
            let t1 = t(1);
            if !le(t1, 1.0) {
                found = Some(Witness::new("0", &format!("{rel_first} ≤ 1"), t1, 1.0));
            }
            extremal = Some(approx_eq(t1, 1.0));
        }
        Kappa::Finite(k) => {
            let prods = trunk_products(s, k)?;
            let t1 = t(1);
            if !approx_eq(t1, 1.0) {
                found = Some(Witness::new("0", &format!("{rel_first} = 1"), t1, 1.0));
            }
            for j in 1..k {
                if found.is_some() {
                    break;
                }
                let lhs = 1.0 / (prods[j] * prods[j]);
                let rhs = t(j as i32 + 1);
                if !approx_eq(lhs, rhs) {
                    let rel = format!("|∏_(j<{j}) λ_(-j)|⁻² = Σ |λ_(i,1)|² ∫ s^-{} dμ_i", j + 1);
                    found = Some(Witness::new(&trunk_id(j), &rel, lhs, rhs));
                }
            }
            let lhs = t(k as i32 + 1);
            let rhs = 1.0 / (prods[k] * prods[k]);
            if found.is_none() && !le(lhs, rhs) {
                let rel = format!("Σ |λ_(i,1)|² ∫ s^-{} dμ_i ≤ |∏_(j<{k}) λ_(-j)|⁻²", k + 1);
                found = Some(Witness::new(&trunk_id(k), &rel, lhs, rhs));
            }
            extremal = Some(approx_eq(lhs, rhs));
        }
        Kappa::Infinite => {
            let prods = trunk_products(s, k_cap)?;
            let t1 = t(1);
            if !approx_eq(t1, 1.0) {
                found = Some(Witness::new("0", &format!("{rel_first} = 1"), t1, 1.0));
            }
            for j in 1..=k_cap {
                if found.is_some() {
                    break;
                }
                let lhs = 1.0 / (prods[j] * prods[j]);
                let rhs = t(j as i32 + 1);
                if !approx_eq(lhs, rhs) {
                    let rel = format!("|∏_(j<{j}) λ_(-j)|⁻² = Σ |λ_(i,1)|² ∫ s^-{} dμ_i", j + 1);
                    found = Some(Witness::new(&trunk_id(j), &rel, lhs, rhs));
                }
            }
            let combined: Vec<(f64, &AtomicMeasure)> =
                first.iter().map(|l| l * l).zip(measures.iter()).collect();
            let rho = AtomicMeasure::combine(&combined);
            exact &= branch_generated_by(s, 0, k_cap, |tail| match tail {
                Tail::InverseMomentRatio(m) => same_measure(m, &rho),
                _ => false,
            });
        }
    }
    let mut e = Entry::settle("subnormal", found, exact, depth);
    e.extremal = extremal;
    if kappa == Kappa::Infinite && !exact {
        e.notes.push(format!("trunk conditions checked for k ≤ {k_cap}"));
    }
    Ok(e)
}

fn trunk_id(k: usize) -> String {
    if k == 0 {
        "0".into()
    } else {
        format!("-{k}")
    }
}

/// Complete hyperexpansivity on `𝒯_{η,κ}` against candidate measures `τ_1..τ_η` on `[0,1]`.
pub fn chex_on_t(
    s: &WeightedShift,
    measures: &[AtomicMeasure],
) -> Result<Entry, ModelCheckError> {
    let (eta, kappa) = model_shape(s, measures.len())?;
    for (i, m) in measures.iter().enumerate() {
        if m.within_unit_interval().is_err() {
            return Err(ModelCheckError::NotOnUnitInterval(i + 1));
        }
    }
    let depth = s.tree().depth();
    if kappa == Kappa::Infinite {
        let mut e = is_isometry(s);
        e.predicate = "chex".into();
        return Ok(e);
    }
    let n_max = depth + 2;
    check_moment_match(s, measures, n_max, |m, n| m.alternating_sequence(1.0, n).values[n])?;
    let exact = (1..=eta).all(|i| {
        let tau = &measures[i - 1];
        branch_generated_by(s, i, n_max, |t| match t {
            Tail::AlternatingRatio(m) => same_measure(m, tau),
            Tail::Constant(c) => tau.is_zero() && approx_eq(c.norm(), 1.0),
            _ => false,
        })
    });
    let first: Vec<f64> = (1..=eta).map(|i| modulus_at(s, i, 1)).collect::<Result<_, _>>()?;
    let sq: f64 = first.iter().map(|l| l * l).sum();
    let t = |k: i32| -> f64 {
        first.iter().zip(measures).map(|(l, m)| l * l * m.moment(-k)).sum()
    };
    let mut found = None;
    let extremal;
    match kappa {
        Kappa::Finite(0) => {
            let rhs = 1.0 + t(1);
            if !le(rhs, sq) {
                found = Some(Witness::new("0", "1 + Σ |λ_(i,1)|² ∫ s⁻¹ dτ_i ≤ Σ |λ_(i,1)|²", rhs, sq));
            }
            extremal = approx_eq(rhs, sq);
        }
        Kappa::Finite(k) => {
            let prods = trunk_products(s, k)?;
            let rhs = 1.0 + t(1);
            if !approx_eq(sq, rhs) {
                found = Some(Witness::new("0", "Σ |λ_(i,1)|² = 1 + Σ |λ_(i,1)|² ∫ s⁻¹ dτ_i", sq, rhs));
            }
            for j in 1..k {
                if found.is_some() {
                    break;
                }
                let lhs = modulus_at(s, 0, j - 1)?.powi(2);
                let rhs = 1.0 + prods[j] * prods[j] * t(j as i32 + 1);
                if !approx_eq(lhs, rhs) {
                    let rel = format!("|λ_(-{})|² = 1 + |∏_(j<{j}) λ_(-j)|² Σ |λ_(i,1)|² ∫ s^-{} dτ_i", j - 1, j + 1);
                    found = Some(Witness::new(&trunk_id(j - 1), &rel, lhs, rhs));
                }
            }
            let top = modulus_at(s, 0, k - 1)?.powi(2);
            let need = 1.0 + prods[k] * prods[k] * t(k as i32 + 1);
            if found.is_none() && !le(need, top) {
                let rel = format!("1 + |∏_(j<{k}) λ_(-j)|² Σ |λ_(i,1)|² ∫ s^-{} dτ_i ≤ |λ_(-{})|²", k + 1, k - 1);
                found = Some(Witness::new(&trunk_id(k - 1), &rel, need, top));
            }
            extremal = approx_eq(need, top);
        }
        Kappa::Infinite => unreachable!(),
    }
    let mut e = Entry::settle("chex", found, exact, depth);
    e.extremal = Some(extremal);
    Ok(e)
}

/// Vertices whose `n`-generation subtree is fully materialized.
pub fn vertices_with_generations(tree: &DirectedTree, n: usize) -> Vec<usize> {
    tree.bfs()
        .into_iter()
        .filter(|&u| {
            let mut frontier = vec![u];
            for _ in 0..n {
                if frontier.iter().any(|&w| !tree.is_complete(w)) {
                    return false;
                }
                frontier = frontier.iter().flat_map(|&w| tree.children(w).to_vec()).collect();
            }
            true
        })
        .collect()
}

fn power_sequence(s: &WeightedShift, u: usize, n: usize) -> Result<MomentPrefix, ShiftError> {
    let values = (0..=n).map(|k| s.power_norm_squared(u, k)).collect::<Result<_, _>>()?;
    Ok(MomentPrefix::new(values))
}

/// Stieltjes test of `{‖Sⁿ e_u‖²}_{n ≤ N}`, a necessary condition for subnormality.
pub fn stieltjes_necessary(s: &WeightedShift, u: usize, n: usize, tol: f64) -> Result<Entry, ShiftError> {
    let seq = power_sequence(s, u, n)?;
    let id = s.tree().id(u);
    let verdict = is_stieltjes(&seq, tol).expect("prefix is nonempty");
    Ok(match verdict {
        StieltjesVerdict::PassUpTo(_) => Entry::new("stieltjes", Verdict::NecessaryPass(n), None, n),
        StieltjesVerdict::Fail { order, shifted, min_eig } => {
            let rel = format!(
                "{}Hankel matrix of order {order} of ‖Sⁿ e_u‖² is positive semidefinite",
                if shifted { "shifted " } else { "" }
            );
            Entry::new("stieltjes", Verdict::No, Some(Witness::new(id, &rel, -min_eig, 0.0)), n)
        }
    })
}

/// Complete alternation of `{‖Sⁿ e_u‖²}_{n ≤ N}`, a necessary condition for
/// complete hyperexpansivity.
pub fn ca_necessary(s: &WeightedShift, u: usize, n: usize, tol: f64) -> Result<Entry, ShiftError> {
    let seq = power_sequence(s, u, n)?;
    let id = s.tree().id(u);
    let verdict = is_completely_alternating(&seq, tol).expect("prefix is nonempty");
    Ok(match verdict {
        AlternatingVerdict::PassUpTo(_) => {
            Entry::new("completely_alternating", Verdict::NecessaryPass(n), None, n)
        }
        AlternatingVerdict::Fail { m, n: order, value } => {
            let rel = format!("alternating difference of order {order} at {m} is nonpositive");
            Entry::new(
                "completely_alternating",
                Verdict::No,
                Some(Witness::new(id, &rel, value, 0.0)),
                n,
            )
        }
    })
}

/// Runs a per-vertex necessary test at every vertex with `n` materialized generations.
pub fn necessary_everywhere(
    s: &WeightedShift,
    n: usize,
    tol: f64,
    test: fn(&WeightedShift, usize, usize, f64) -> Result<Entry, ShiftError>,
) -> Entry {
    let vertices = vertices_with_generations(s.tree(), n);
    let mut last = None;
    for &u in &vertices {
        let e = test(s, u, n, tol).expect("generations are materialized");
        if e.verdict == Verdict::No {
            return e;
        }
        last = Some(e);
    }
    let mut e = last.unwrap_or_else(|| Entry::new("necessary", Verdict::Indeterminate(n), None, n));
    e.notes.push(format!("{} vertices tested", vertices.len()));
    e
}

/// `‖S f‖² ≤ ‖S² f‖ ‖f‖` for one vector.
pub fn paranormal_witness(s: &WeightedShift, f: &FiniteVector) -> Result<Entry, ShiftError> {
    let sf = s.apply(f)?;
    let s2f = s.apply(&sf)?;
    let lhs = sf.norm_squared();
    let rhs = s2f.norm() * f.norm();
    let depth = s.tree().depth();
    Ok(if le(lhs, rhs) {
        Entry::new("paranormal", Verdict::NecessaryPass(depth), None, depth)
    } else {
        let at = f.iter().next().map(|(v, _)| s.tree().id(v).to_string()).unwrap_or_default();
        Entry::new("paranormal", Verdict::No, Some(Witness::new(&at, "‖Sf‖² ≤ ‖S²f‖ ‖f‖", lhs, rhs)), depth)
    })
}

/// Paranormality inequality over random finite vectors supported where two
/// generations are materialized, plus every basis vector there.
pub fn paranormal_sample(s: &WeightedShift, samples: usize, seed: u64) -> Entry {
    let support = vertices_with_generations(s.tree(), 2);
    let depth = s.tree().depth();
    if support.is_empty() {
        return Entry::new("paranormal", Verdict::Indeterminate(depth), None, depth);
    }
    for &u in &support {
        let e = paranormal_witness(s, &FiniteVector::basis(u)).expect("two generations present");
        if e.verdict == Verdict::No {
            return e;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let k = rng.random_range(1..=support.len().min(8));
        let f = FiniteVector::from_pairs((0..k).map(|_| {
            let v = support[rng.random_range(0..support.len())];
            (v, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        }));
        let e = paranormal_witness(s, &f).expect("two generations present");
        if e.verdict == Verdict::No {
            return e;
        }
    }
    let mut e = Entry::new("paranormal", Verdict::NecessaryPass(depth), None, depth);
    e.notes.push(format!("{} random vectors and {} basis vectors", samples, support.len()));
    e
}

/// Classes a tree admits, from its structure alone.
#[derive(Debug, Clone, PartialEq)]
pub struct Admissibility {
    pub leafless_countable: Option<bool>,
    /// Bounded hyponormal, subnormal, isometric and completely hyperexpansive
    /// shifts with nonzero weights.
    pub injective_classes: Option<bool>,
    pub coisometric: Option<bool>,
    pub unitary: Option<bool>,
    /// Nonzero normal shifts.
    pub normal: Option<bool>,
    pub dense_range: Option<bool>,
}

pub fn admissibility(tree: &DirectedTree) -> Admissibility {
    let line = |z: bool, zm: bool| match tree.family() {
        Some(FamilyKind::Z) => Some(z),
        Some(FamilyKind::ZMinus) => Some(zm),
        Some(FamilyKind::Custom(_)) => None,
        Some(_) => Some(false),
        None if tree.root().is_some() => Some(false),
        None => None,
    };
    let leafless = match tree.family() {
        Some(FamilyKind::ZMinus) => Some(false),
        Some(FamilyKind::Custom(_)) => None,
        Some(_) => Some(true),
        None => {
            let real_leaf = (0..tree.len()).any(|v| tree.is_complete(v) && tree.children(v).is_empty());
            if real_leaf {
                Some(false)
            } else if tree.is_truncated() {
                None
            } else {
                Some(false)
            }
        }
    };
    let normal = match tree.family() {
        Some(FamilyKind::Z) => Some(true),
        Some(FamilyKind::TEtaKappa { kappa: Kappa::Infinite, .. }) => Some(true),
        Some(FamilyKind::Custom(_)) => None,
        Some(_) => Some(false),
        None if tree.root().is_some() => Some(false),
        None => None,
    };
    Admissibility {
        leafless_countable: leafless,
        injective_classes: leafless,
        coisometric: line(true, true),
        unitary: line(true, false),
        normal,
        dense_range: line(true, true),
    }
}
