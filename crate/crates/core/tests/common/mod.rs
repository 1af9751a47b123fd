#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use treeshift::classify::{is_hyponormal, is_p_hyponormal, Verdict};
use treeshift::family::{FamilyKind, Kappa, TreeFamily};
use treeshift::measure::{is_stieltjes, MomentPrefix, StieltjesVerdict};
use treeshift::shift::{FiniteVector, WeightedShift};
use treeshift::tree::DirectedTree;
use treeshift::weights::{Tail, WeightSystem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Collects failed expectations instead of panicking on the first one.
#[derive(Default)]
pub struct Check {
    pub failures: Vec<String>,
}

impl Check {
    pub fn that(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    pub fn near(&mut self, got: f64, want: f64, tol: f64, what: &str) {
        self.that((got - want).abs() <= tol, format!("{what}: got {got:e}, want {want:e}"));
    }

    pub fn rel(&mut self, got: f64, want: f64, tol: f64, what: &str) {
        let ok = (got - want).abs() <= tol * want.abs().max(f64::MIN_POSITIVE);
        self.that(ok, format!("{what}: got {got:e}, want {want:e}"));
    }

    pub fn merge(&mut self, r: Result<(), String>) {
        if let Err(e) = r {
            self.failures.push(e);
        }
    }
}

/// Finite rooted tree on `n` vertices with uniformly random parents.
pub fn random_tree(r: &mut ChaCha8Rng, n: usize) -> DirectedTree {
    let ids: Vec<String> = (0..n).map(|k| format!("v{k}")).collect();
    let edges: Vec<(String, String)> =
        (1..n).map(|k| (ids[r.random_range(0..k)].clone(), ids[k].clone())).collect();
    DirectedTree::validate(&ids, &edges).unwrap()
}

pub fn random_weights(r: &mut ChaCha8Rng, tree: &DirectedTree, max: f64, complex: bool) -> WeightSystem {
    let mut w = WeightSystem::default();
    for v in 0..tree.len() {
        if Some(v) == tree.root() {
            continue;
        }
        let re = r.random_range(0.0..max);
        let im = if complex { r.random_range(-max..max) } else { 0.0 };
        w.base.insert(tree.id(v).to_string(), Complex64::new(re, im));
    }
    w
}

pub fn random_shift(r: &mut ChaCha8Rng, n: usize, max: f64, complex: bool) -> WeightedShift {
    let tree = random_tree(r, n);
    let w = random_weights(r, &tree, max, complex);
    WeightedShift::new(tree, w).unwrap()
}

pub fn t_shift(eta: usize, kappa: Kappa, depth: usize, w: WeightSystem) -> WeightedShift {
    let tree = TreeFamily::new(FamilyKind::t_eta_kappa(eta, kappa).unwrap(), depth).materialize();
    WeightedShift::new(tree, w).unwrap()
}

/// Shift on `𝒯_{2,1}` with root weight `λ₀`, first-level weights `1/√2` and
/// constant branch tails `1/a`, `1/b`.
pub fn two_branch_shift(lambda0: f64, a: f64, b: f64, depth: usize) -> WeightedShift {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let w = WeightSystem::with_base([("0", lambda0)])
        .tail(1, &[h], Tail::Constant(c(1.0 / a)))
        .tail(2, &[h], Tail::Constant(c(1.0 / b)));
    t_shift(2, Kappa::Finite(1), depth, w)
}

/// Random parameters of a `𝒯_{2,1}` shift with constant branch tails.
#[derive(Debug, Clone, Copy)]
pub struct TwoBranch {
    pub lambda0: f64,
    pub first: [f64; 2],
    pub tails: [f64; 2],
}

impl TwoBranch {
    pub fn random(r: &mut ChaCha8Rng) -> Self {
        let mut x = |lo: f64, hi: f64| r.random_range(lo..hi);
        Self {
            lambda0: x(0.3, 1.2),
            first: [x(0.4, 0.9), x(0.4, 0.9)],
            tails: [x(0.7, 1.6), x(0.7, 1.6)],
        }
    }

    pub fn shift(&self, scale: f64, depth: usize) -> WeightedShift {
        let w = WeightSystem::with_base([("0", scale * self.lambda0)])
            .tail(1, &[scale * self.first[0]], Tail::Constant(c(scale * self.tails[0])))
            .tail(2, &[scale * self.first[1]], Tail::Constant(c(scale * self.tails[1])));
        t_shift(2, Kappa::Finite(1), depth, w)
    }
}

pub fn random_vector(r: &mut ChaCha8Rng, support: &[usize], k: usize) -> FiniteVector {
    FiniteVector::from_pairs((0..k).map(|_| {
        let v = support[r.random_range(0..support.len())];
        (v, Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
    }))
}

fn close(a: Complex64, b: Complex64, scale: f64) -> bool {
    (a - b).norm() <= 1e-12 * (1.0 + scale)
}

/// Every non-root vertex is the child of exactly one vertex and the root of none.
pub fn partition_identity(tree: &DirectedTree) -> Result<(), String> {
    let mut seen = vec![0usize; tree.len()];
    for u in 0..tree.len() {
        for &v in tree.children(u) {
            seen[v] += 1;
            if tree.parent(v) != Some(u) {
                return Err(format!("{} listed under {} but has another parent", tree.id(v), tree.id(u)));
            }
        }
    }
    for v in 0..tree.len() {
        let want = usize::from(Some(v) != tree.root());
        if seen[v] != want {
            return Err(format!("{} appears {} times among children", tree.id(v), seen[v]));
        }
    }
    Ok(())
}

/// `⟨S f, g⟩ = ⟨f, S* g⟩` for finite vectors.
pub fn adjoint_identity(s: &WeightedShift, f: &FiniteVector, g: &FiniteVector) -> Result<(), String> {
    let lhs = s.apply(f).map_err(|e| e.to_string())?.inner(g);
    let rhs = f.inner(&s.apply_adjoint(g).map_err(|e| e.to_string())?);
    let scale = f.norm() * g.norm() * s.norm().value;
    if close(lhs, rhs, scale) {
        Ok(())
    } else {
        Err(format!("<Sf,g> = {lhs} but <f,S*g> = {rhs}"))
    }
}

/// `S e_u = ‖S e_u‖ U e_u` with `U` a partial isometry.
pub fn polar_identity(s: &WeightedShift) -> Result<(), String> {
    let polar = s.polar();
    let u = s.polar_isometry().map_err(|e| e.to_string())?;
    for v in 0..s.tree().len() {
        let Some(m) = polar.modulus[v] else { continue };
        let e = FiniteVector::basis(v);
        let direct = s.apply(&e).map_err(|e| e.to_string())?;
        let ue = u.apply(&e).map_err(|e| e.to_string())?;
        for &w in s.tree().children(v) {
            if !close(direct.get(w), ue.get(w) * m, m) {
                return Err(format!("S e_u differs from |S| U e_u at {}", s.tree().id(w)));
            }
        }
        let n = ue.norm();
        if !(n.abs() < 1e-12 || (n - 1.0).abs() < 1e-12) {
            return Err(format!("‖U e_u‖ = {n} at {}", s.tree().id(v)));
        }
    }
    Ok(())
}

pub fn scaling_invariance(p: &TwoBranch, scale: f64) -> Result<(), String> {
    let a = is_hyponormal(&p.shift(1.0, 6)).verdict;
    let b = is_hyponormal(&p.shift(scale, 6)).verdict;
    if a == b {
        Ok(())
    } else {
        Err(format!("{p:?}: {a:?} at scale 1, {b:?} at scale {scale}"))
    }
}

/// `q`-hyponormal implies `p`-hyponormal for `p < q`.
pub fn p_monotonicity(p: &TwoBranch, lo: f64, hi: f64) -> Result<(), String> {
    let s = p.shift(1.0, 6);
    let strong = is_p_hyponormal(&s, hi).verdict;
    let weak = is_p_hyponormal(&s, lo).verdict;
    if strong.passes() && !weak.passes() {
        Err(format!("{p:?}: {hi}-hyponormal but not {lo}-hyponormal"))
    } else {
        Ok(())
    }
}

/// On `ℤ₊` every `p` gives the same answer: moduli nondecreasing.
pub fn classical_collapse(head: &[f64], tail: f64) -> Result<(), String> {
    let tree = TreeFamily::new(FamilyKind::ZPlus, head.len() + 3).materialize();
    let w = WeightSystem::default().tail(1, head, Tail::Constant(c(tail)));
    let s = WeightedShift::new(tree, w).unwrap();
    let mut moduli = head.to_vec();
    moduli.push(tail);
    let want = moduli.windows(2).all(|x| x[0] <= x[1]);
    for p in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let got = is_p_hyponormal(&s, p).verdict;
        let expected = if want { Verdict::Yes } else { Verdict::No };
        if got != expected {
            return Err(format!("head {head:?}, tail {tail}, p = {p}: {got:?}"));
        }
    }
    Ok(())
}

fn failure_order(values: &[f64]) -> Option<usize> {
    match is_stieltjes(&MomentPrefix::new(values.to_vec()), 1e-10).unwrap() {
        StieltjesVerdict::PassUpTo(_) => None,
        StieltjesVerdict::Fail { order, .. } => Some(order),
    }
}

/// Once a prefix fails the Hankel test, every longer prefix fails at an order
/// no larger.
pub fn hankel_failure_monotone(values: &[f64]) -> Result<(), String> {
    let mut first: Option<usize> = None;
    for len in 1..=values.len() {
        let now = failure_order(&values[..len]);
        match (first, now) {
            (Some(k), None) => return Err(format!("prefix of length {len} passes after failing at order {k}")),
            (Some(k), Some(j)) if j > k => {
                return Err(format!("failure order rose from {k} to {j} at length {len}"))
            }
            (None, Some(j)) => first = Some(j),
            _ => {}
        }
    }
    Ok(())
}

/// Moments of a random atomic measure, with one entry optionally perturbed.
pub fn random_moments(r: &mut ChaCha8Rng, len: usize, perturb: bool) -> Vec<f64> {
    let atoms: Vec<(f64, f64)> =
        (0..r.random_range(1..4)).map(|_| (r.random_range(0.1..2.0), r.random_range(0.1..1.0))).collect();
    let mut v: Vec<f64> =
        (0..len).map(|n| atoms.iter().map(|(x, w)| w * x.powi(n as i32)).sum()).collect();
    if perturb {
        let i = r.random_range(0..len);
        v[i] *= r.random_range(0.3..1.7);
    }
    v
}
