mod common;

use std::time::{Duration, Instant};

use rand::Rng;

use common::*;
use treeshift::classify::{
    ca_necessary, chex_on_t, is_cohyponormal, is_hyponormal, is_isometry, is_p_hyponormal,
    necessary_everywhere, paranormal_sample, power_hyponormal, stieltjes_necessary, subnormal_on_t,
    Verdict,
};
use treeshift::family::{FamilyKind, Kappa, TreeFamily};
use treeshift::measure::{AtomicMeasure, MomentPrefix};
use treeshift::models::{
    backward_extension, construct_chex, construct_subnormal, ChexModelSpec, Flavor,
    SubnormalModelSpec,
};
use treeshift::oracle::{
    hankel_min_eig, kernel_index, operator_norm, selfcommutator_check, truncate,
};
use treeshift::shift::{AtDepth, FiniteVector, WeightedShift};
use treeshift::tree::DirectedTree;
use treeshift::weights::{Tail, WeightSystem};

type Outcome = Vec<String>;

fn tree_indices() -> Outcome {
    let mut ck = Check::default();
    let families = [
        (FamilyKind::ZMinus, 1),
        (FamilyKind::Z, 0),
        (FamilyKind::ZPlus, -1),
        (FamilyKind::t_eta_kappa(2, Kappa::Finite(0)).unwrap(), -2),
    ];
    let budget = Duration::from_millis(1);
    for (kind, want) in families {
        let fam = TreeFamily::new(kind.clone(), 8);
        let start = Instant::now();
        let got = fam.tree_index();
        let took = start.elapsed();
        ck.that(got == Ok(want), format!("{}: index {got:?}, want {want}", kind.name()));
        ck.that(took < budget, format!("{}: took {took:?}", kind.name()));
        let tree = fam.materialize();
        let s = WeightedShift::new(tree, WeightSystem::constant(1.0)).unwrap();
        let oracle = kernel_index(&truncate(&s));
        ck.that(oracle == want, format!("{}: kernel oracle gives {oracle}", kind.name()));
    }
    let mut r = rng(1);
    for k in 0..20 {
        let n = r.random_range(1..60);
        let s = random_shift(&mut r, n, 3.0, false);
        let start = Instant::now();
        let got = s.tree().tree_index();
        let took = start.elapsed();
        ck.that(got == Ok(0), format!("random tree {k}: index {got:?}"));
        ck.that(took < budget, format!("random tree {k}: took {took:?}"));
    }
    ck.failures
}

fn two_branch(depth: usize) -> WeightedShift {
    let w = WeightSystem::with_base([("0", 4.0)])
        .tail(1, &[4.0], Tail::Constant(c(8.0)))
        .tail(2, &[1.0], Tail::Constant(c(1.9)));
    t_shift(2, Kappa::Finite(1), depth, w)
}

fn square_on_two_branches() -> Outcome {
    let mut ck = Check::default();
    let s = two_branch(8);
    ck.that(is_hyponormal(&s).verdict == Verdict::Yes, "first power not settled as hyponormal");
    let tr = truncate(&s);
    let u = s.tree().index_of("(2,1)").unwrap();
    let (fwd2, adj) = tr.power_vector_norms(u, 2);
    ck.near(fwd2.sqrt(), 3.61, 1e-12, "‖S² e_(2,1)‖");
    ck.near(adj, 4.0, 1e-12, "‖S*² e_(2,1)‖");
    ck.near(s.power_norm_squared(u, 2).unwrap().sqrt(), 3.61, 1e-12, "tree-side ‖S² e_(2,1)‖");
    ck.near(s.adjoint_power_norm(u, 2).unwrap(), 4.0, 1e-12, "tree-side ‖S*² e_(2,1)‖");
    ck.that(power_hyponormal(&s, 2, 1e-9).verdict == Verdict::No, "square reported hyponormal");
    ck.failures
}

fn square_on_binary_tree() -> Outcome {
    let mut ck = Check::default();
    let kind = FamilyKind::Binary { single_stem: true, side_depth: None };
    let tree = TreeFamily::new(kind, 6).materialize();
    let w = WeightSystem::constant(3.0).subtree("(2,2)", 1.0);
    let s = WeightedShift::new(tree, w).unwrap();
    let u = s.tree().index_of("(2,2)").unwrap();
    let (fwd2, adj) = truncate(&s).power_vector_norms(u, 2);
    ck.near(adj, 3.0, 1e-12, "‖S*² e_(2,2)‖");
    ck.near(fwd2.sqrt(), 2.0, 1e-12, "‖S² e_(2,2)‖");
    ck.near(s.adjoint_power_norm(u, 2).unwrap(), 3.0, 1e-12, "tree-side ‖S*² e_(2,2)‖");
    ck.near(s.power_norm_squared(u, 2).unwrap().sqrt(), 2.0, 1e-12, "tree-side ‖S² e_(2,2)‖");
    let e = is_hyponormal(&s);
    ck.that(e.verdict == Verdict::Yes, format!("hyponormal verdict {:?}", e.verdict));
    ck.failures
}

fn paranormal_shift(depth: usize) -> WeightedShift {
    let w = WeightSystem::default()
        .tail(1, &[1.0], Tail::Constant(c(2.0)))
        .tail(2, &[1.0, 0.5], Tail::Constant(c(1.0)));
    t_shift(2, Kappa::Finite(0), depth, w)
}

fn paranormal_not_hyponormal() -> Outcome {
    let mut ck = Check::default();
    let s = paranormal_shift(8);
    let u = s.tree().index_of("(2,1)").unwrap();
    ck.that(s.column_norm_squared(u).map(f64::sqrt) == Some(0.5), "‖S e_(2,1)‖ is not 0.5");
    ck.that(s.adjoint_power_norm(u, 1) == Ok(1.0), "‖S* e_(2,1)‖ is not 1");
    let e = is_hyponormal(&s);
    ck.that(e.verdict == Verdict::No, format!("hyponormal verdict {:?}", e.verdict));
    ck.that(
        e.witness.as_ref().map(|w| w.vertex.as_str()) == Some("(2,1)"),
        format!("witness {:?}", e.witness),
    );
    let p = paranormal_sample(&s, 1000, 2024);
    ck.that(p.verdict.passes(), format!("paranormal violation {:?}", p.witness));
    ck.failures
}

fn two_branch_grid() -> Outcome {
    let mut ck = Check::default();
    let grid = [0.6, 0.8, 1.0, 1.2, 1.4];
    for &a in &grid {
        for &b in &grid {
            for lambda0 in [0.5, 1.0, 1.1] {
                let s = two_branch_shift(lambda0, a, b, 10);
                let tr = truncate(&s);
                for p in [0.5, 1.0, 2.0] {
                    let want = lambda0 <= 1.0 && a.powf(2.0 * p) + b.powf(2.0 * p) <= 2.0 + 1e-10;
                    let got = is_p_hyponormal(&s, p).verdict;
                    let tag = format!("λ₀={lambda0} a={a} b={b} p={p}");
                    ck.that(got.passes() == want, format!("{tag}: classifier {got:?}"));
                    ck.that(got.passes() == (got == Verdict::Yes), format!("{tag}: not settled, {got:?}"));
                    let oracle = selfcommutator_check(&tr, p, 1e-9).unwrap();
                    ck.that(oracle.passed == want, format!("{tag}: oracle min eig {:e}", oracle.min_eig));
                }
                let measures = [AtomicMeasure::dirac(1.0 / (a * a)), AtomicMeasure::dirac(1.0 / (b * b))];
                let want = (a * a + b * b - 2.0).abs() <= 1e-10
                    && (a.powi(4) + b.powi(4)) / 2.0 <= 1.0 / (lambda0 * lambda0) + 1e-10;
                let tag = format!("λ₀={lambda0} a={a} b={b}");
                match subnormal_on_t(&s, &measures, 25) {
                    Ok(e) => {
                        ck.that(e.verdict.passes() == want, format!("{tag}: subnormal {:?}", e.verdict))
                    }
                    Err(err) => ck.that(false, format!("{tag}: {err}")),
                }
            }
        }
    }
    ck.failures
}

fn norm_exactness() -> Outcome {
    let mut ck = Check::default();
    let mut r = rng(6);
    for k in 0..25 {
        let n = r.random_range(2..=150);
        let s = random_shift(&mut r, n, 3.0, false);
        let got = s.norm();
        ck.that(got.exact, format!("tree {k}: norm not flagged exact"));
        let oracle = operator_norm(&truncate(&s), 1e-14).unwrap();
        ck.rel(got.value, oracle, 1e-6, &format!("tree {k} ({n} vertices) norm"));
    }
    ck.failures
}

fn power_norms() -> Outcome {
    let mut ck = Check::default();
    let mut r = rng(7);
    for k in 0..10 {
        let n = r.random_range(10..=80);
        let s = random_shift(&mut r, n, 2.0, true);
        let tr = truncate(&s);
        for u in 0..s.tree().len() {
            for p in 0..=8 {
                let tree_side = s.power_norm_squared(u, p).unwrap();
                let dense = tr.power_vector_norms(u, p).0;
                let ok = (tree_side - dense).abs() <= 1e-10 * dense.abs().max(1e-300);
                ck.that(ok, format!("tree {k} vertex {u} n={p}: {tree_side:e} vs {dense:e}"));
            }
        }
    }
    ck.failures
}

fn mixed_measures() -> Vec<AtomicMeasure> {
    vec![AtomicMeasure::dirac(1.0), AtomicMeasure::new(vec![(0.5, 0.5), (1.0, 0.5)]).unwrap()]
}

/// Stieltjes check of `‖Sⁿ e_u‖²` at each vertex of `shallow`, evaluated on
/// `deep`, which has the `n` further generations.
fn hankel_everywhere(shallow: &WeightedShift, deep: &WeightedShift, n: usize, ck: &mut Check, tag: &str) {
    for v in 0..shallow.tree().len() {
        let id = shallow.tree().id(v);
        let u = deep.tree().index_of(id).unwrap();
        match stieltjes_necessary(deep, u, n, 1e-9) {
            Ok(e) => ck.that(e.verdict.passes(), format!("{tag}: Stieltjes fails at {id}")),
            Err(err) => ck.that(false, format!("{tag}: {id}: {err}")),
        }
        let values: Vec<f64> = (0..=n).map(|k| deep.power_norm_squared(u, k).unwrap()).collect();
        let scale = values.iter().fold(1.0f64, |a, x| a.max(*x));
        let p = MomentPrefix::new(values);
        for shift in [0, 1] {
            let m = hankel_min_eig(&p, shift).unwrap();
            ck.that(m >= -1e-9 * scale, format!("{tag}: Hankel oracle {m:e} at {id} (shift {shift})"));
        }
    }
}

fn subnormal_round_trip() -> Outcome {
    let mut ck = Check::default();
    for kappa in [0, 1, 2] {
        let tag = format!("κ={kappa}");
        let spec = SubnormalModelSpec {
            eta: 2,
            kappa: Kappa::Finite(kappa),
            measures: mixed_measures(),
            lambda1: None,
            theta: None,
            extremal: true,
        };
        let model = match construct_subnormal(&spec) {
            Ok(m) => m,
            Err(e) => {
                ck.that(false, format!("{tag}: {e}"));
                continue;
            }
        };
        let shallow = model.shift(10);
        let deep = model.shift(20);
        let e = subnormal_on_t(&shallow, &spec.measures, 25).unwrap();
        ck.that(e.verdict == Verdict::Yes, format!("{tag}: model check {:?}", e.verdict));
        hankel_everywhere(&shallow, &deep, 10, &mut ck, &tag);
        ck.near(model.norm, 1.0, 1e-12, &format!("{tag}: model norm"));
        let n = shallow.norm();
        ck.near(n.value, 1.0, 1e-12, &format!("{tag}: shift norm"));
        ck.that(n.exact, format!("{tag}: shift norm not exact"));

        let iso = SubnormalModelSpec {
            measures: vec![AtomicMeasure::dirac(1.0); 2],
            lambda1: Some(vec![0.6, 0.8]),
            ..spec.clone()
        };
        match construct_subnormal(&iso) {
            Ok(m) => {
                let v = is_isometry(&m.shift(10)).verdict;
                ck.that(v == Verdict::Yes, format!("{tag}: isometric model gives {v:?}"));
            }
            Err(e) => ck.that(false, format!("{tag}: isometric model: {e}")),
        }
    }
    ck.failures
}

fn chex_round_trip() -> Outcome {
    let mut ck = Check::default();
    let spec = ChexModelSpec {
        eta: 2,
        kappa: 1,
        measures: vec![AtomicMeasure::zero(), AtomicMeasure::dirac(1.0)],
        t: Some(vec![1.0, 0.6]),
        theta: None,
        extremal: true,
    };
    let model = match construct_chex(&spec) {
        Ok(m) => m,
        Err(e) => return vec![e.to_string()],
    };
    ck.near(model.trunk[0], 1.25, 1e-15, "λ₀");
    let s = model.shift(10);
    let deep = model.shift(20);
    let e = chex_on_t(&s, &spec.measures).unwrap();
    ck.that(e.verdict == Verdict::Yes, format!("model check {:?}", e.verdict));
    ck.that(e.extremal == Some(true), "model not extremal");
    for v in 0..s.tree().len() {
        let id = s.tree().id(v);
        let u = deep.tree().index_of(id).unwrap();
        let e = ca_necessary(&deep, u, 10, 1e-9).unwrap();
        ck.that(e.verdict.passes(), format!("complete alternation fails at {id}"));
    }
    let all = necessary_everywhere(&deep, 10, 1e-9, ca_necessary);
    ck.that(all.verdict.passes(), format!("sweep verdict {:?}", all.verdict));
    let root = deep.tree().index_of("-1").unwrap();
    let seq: Vec<f64> = (0..=18).map(|n| deep.power_norm_squared(root, n).unwrap()).collect();
    let quotients: Vec<f64> = seq.windows(2).map(|w| w[1] / w[0]).collect();
    ck.near(quotients[0], 1.5625, 1e-12, "first quotient");
    for (n, w) in quotients.windows(2).enumerate() {
        ck.that(w[1] <= w[0] * (1.0 + 1e-12), format!("quotient rises at n={n}: {} > {}", w[1], w[0]));
    }
    ck.failures
}

fn backward_extensions() -> Outcome {
    let mut ck = Check::default();
    let hardy = backward_extension(&AtomicMeasure::dirac(1.0), None, Flavor::Subnormal).unwrap();
    ck.that(hardy.extendible, "δ₁ not extendible");
    let with_zero = [
        AtomicMeasure::dirac(0.0),
        AtomicMeasure::new(vec![(0.0, 0.5), (1.0, 0.5)]).unwrap(),
        AtomicMeasure::new(vec![(0.0, 0.1), (0.4, 0.3), (2.0, 0.6)]).unwrap(),
    ];
    for m in &with_zero {
        let e = backward_extension(m, Some(1), Flavor::Subnormal).unwrap();
        ck.that(!e.extendible, format!("{:?} extends one step", m.atoms()));
    }
    let mut r = rng(10);
    let (mut yes, mut no) = (0, 0);
    for _ in 0..20 {
        let atoms: Vec<(f64, f64)> = (0..r.random_range(1..4))
            .map(|_| (r.random_range(0.3..=1.0), r.random_range(0.01..0.4)))
            .collect();
        let k = r.random_range(1..=4usize);
        let tau = AtomicMeasure::new(atoms.clone()).unwrap();
        let direct: f64 =
            atoms.iter().map(|(x, w)| w * (1..=k).map(|l| x.powi(-(l as i32))).sum::<f64>()).sum();
        let e = backward_extension(&tau, Some(k), Flavor::Chex).unwrap();
        ck.that(e.extendible == (direct < 1.0), format!("τ={atoms:?} k={k}: value {direct}"));
        ck.near(e.value, direct, 1e-12 * direct.max(1.0), "extension value");
        if direct < 1.0 {
            yes += 1;
        } else {
            no += 1;
        }
    }
    ck.that(yes > 0 && no > 0, format!("sample covers one side only ({yes} yes, {no} no)"));
    ck.failures
}

fn chain_tree() -> (DirectedTree, Vec<String>) {
    let chain: Vec<String> = (0..20).map(|k| format!("c{k}")).collect();
    let side: Vec<String> = (0..10).map(|k| format!("s{k}")).collect();
    let mut edges: Vec<(String, String)> =
        chain.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
    for k in 0..10 {
        edges.push((chain[2 * k].clone(), side[k].clone()));
    }
    let ids: Vec<String> = chain.iter().chain(&side).cloned().collect();
    let tree = DirectedTree::validate(&ids, &edges)
        .unwrap()
        .open_above()
        .mark_incomplete(&["c19"])
        .unwrap();
    (tree, chain)
}

fn cohyponormal_structure() -> Outcome {
    let mut ck = Check::default();
    let (tree, chain) = chain_tree();
    ck.that(tree.len() == 30, format!("{} vertices", tree.len()));
    let mut w = WeightSystem::constant(0.0);
    for (k, id) in chain.iter().enumerate() {
        w = w.set(id, 2.0 * 0.9f64.powi(k as i32));
    }
    let s = WeightedShift::new(tree.clone(), w.clone()).unwrap();
    let e = is_cohyponormal(&s);
    ck.that(e.verdict.passes(), format!("verdict {:?} witness {:?}", e.verdict, e.witness));
    ck.that(e.chain.as_ref() == Some(&chain), format!("chain {:?}", e.chain));
    let s = WeightedShift::new(tree, w.set("s4", 0.3)).unwrap();
    let e = is_cohyponormal(&s);
    ck.that(e.verdict == Verdict::No, format!("perturbed verdict {:?}", e.verdict));
    ck.that(
        e.witness.as_ref().map(|w| w.vertex.as_str()) == Some("s4"),
        format!("perturbed witness {:?}", e.witness),
    );
    ck.failures
}

fn binary_spine(tail: Tail) -> WeightedShift {
    let kind = FamilyKind::Binary { single_stem: false, side_depth: Some(2) };
    let tree = TreeFamily::new(kind, 20).materialize();
    let w = WeightSystem::constant(1.0).tail(1, &[], tail);
    WeightedShift::new(tree, w).unwrap()
}

fn domain_inclusion() -> Outcome {
    let mut ck = Check::default();
    let d = binary_spine(Tail::Factorial).domain_inclusion_criteria();
    ck.that(d.fwd.verdict == AtDepth::Bounded, format!("factorial fwd {:?}", d.fwd.verdict));
    ck.that(d.bwd.verdict == AtDepth::Growing, format!("factorial bwd {:?}", d.bwd.verdict));
    ck.that(d.bwd.monotone, "factorial bwd level maxima not monotone");
    ck.that(d.bwd.sup > 1e6, format!("factorial bwd value at depth 20 is {:.1}, not above 1e6", d.bwd.sup));
    let d = binary_spine(Tail::Power(2.0)).domain_inclusion_criteria();
    ck.that(d.fwd.verdict == AtDepth::Bounded, format!("geometric fwd {:?}", d.fwd.verdict));
    ck.that(d.bwd.verdict == AtDepth::Bounded, format!("geometric bwd {:?}", d.bwd.verdict));
    ck.failures
}

fn property_suites() -> Outcome {
    let mut ck = Check::default();
    let mut r = rng(13);
    for _ in 0..40 {
        let n = r.random_range(1..80);
        let s = random_shift(&mut r, n, 2.0, true);
        ck.merge(partition_identity(s.tree()));
        let support: Vec<usize> = (0..n).collect();
        let f = random_vector(&mut r, &support, 5);
        let g = random_vector(&mut r, &support, 5);
        ck.merge(adjoint_identity(&s, &f, &g));
        ck.merge(polar_identity(&s));
    }
    let zero = FiniteVector::zero();
    let s = two_branch(5);
    ck.merge(adjoint_identity(&s, &zero, &FiniteVector::basis(0)));
    ck.merge(partition_identity(s.tree()));
    for _ in 0..40 {
        let p = TwoBranch::random(&mut r);
        ck.merge(scaling_invariance(&p, r.random_range(0.1..10.0)));
        let lo = r.random_range(0.1..2.0);
        ck.merge(p_monotonicity(&p, lo, lo + r.random_range(0.1..2.0)));
    }
    for _ in 0..40 {
        let mut head: Vec<f64> = (0..5).map(|_| r.random_range(0.2..2.0)).collect();
        if r.random_bool(0.5) {
            head.sort_by(f64::total_cmp);
        }
        let last = head[4];
        let tail = if r.random_bool(0.5) { last + r.random_range(0.0..1.0) } else { r.random_range(0.2..2.0) };
        ck.merge(classical_collapse(&head, tail));
    }
    for _ in 0..60 {
        let perturb = r.random_bool(0.7);
        let v = random_moments(&mut r, 12, perturb);
        ck.merge(hankel_failure_monotone(&v));
    }
    ck.failures
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("tree indices", tree_indices),
        ("square of a hyponormal two-branch shift", square_on_two_branches),
        ("square of a hyponormal binary shift", square_on_binary_tree),
        ("paranormal but not hyponormal", paranormal_not_hyponormal),
        ("p-hyponormality and subnormality grid", two_branch_grid),
        ("norm exactness", norm_exactness),
        ("power norms against dense matrices", power_norms),
        ("subnormal model round trip", subnormal_round_trip),
        ("chex round trip", chex_round_trip),
        ("backward extensions", backward_extensions),
        ("cohyponormal chain structure", cohyponormal_structure),
        ("domain inclusion on the binary tree", domain_inclusion),
        ("property suites", property_suites),
    ];
    let mut failed = Vec::new();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let failures = run();
        let status = if failures.is_empty() { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {status} {name} ({:.0?})", k + 1, start.elapsed());
        for f in failures.iter().take(10) {
            println!("    {f}");
        }
        if failures.len() > 10 {
            println!("    ... {} more", failures.len() - 10);
        }
        if !failures.is_empty() {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
