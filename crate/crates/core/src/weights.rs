//! Weight systems: explicit weights plus rules that extend them along
//! family branches and subtrees.

use std::collections::BTreeMap;

use num_complex::Complex64;
use thiserror::Error;

use crate::family::FamilyKind;
use crate::measure::AtomicMeasure;
use crate::tree::{Coord, DirectedTree, Direction, OpenEnd};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeightError {
    #[error("no weight rule covers vertex {0}")]
    Unresolved(String),
    #[error("weight given for unknown vertex {0}")]
    UnknownVertex(String),
    #[error("weight given for the root {0}")]
    RootWeight(String),
    #[error("tail rules need a family tree")]
    TailWithoutFamily,
    #[error("duplicate tail rule for branch {0}")]
    DuplicateTail(usize),
    #[error("invalid tail rule: {0}")]
    InvalidTail(String),
}

/// Monotonicity of weight moduli along increasing positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trend {
    Constant(f64),
    Nondecreasing,
    Nonincreasing,
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tail {
    Constant(Complex64),
    /// `q^pos`
    Power(f64),
    /// `pos!`
    Factorial,
    /// `pos^s`
    PowerLaw(f64),
    /// Sawtooth `c + pos + 1 - k`, where `k` is the largest break `≤ pos` (1 if none).
    Affine { c: f64, breaks: Vec<usize> },
    /// `sqrt(m_{pos-1} / m_{pos-2})` with `m_n = ∫ s^n dμ`.
    MomentRatio(AtomicMeasure),
    /// `sqrt(a_{pos-1} / a_{pos-2})` with `a_n = 1 + ∫ (1 + ... + s^{n-1}) dτ`.
    AlternatingRatio(AtomicMeasure),
    /// `sqrt(∫ s^{-(pos+1)} dρ / ∫ s^{-(pos+2)} dρ)`.
    InverseMomentRatio(AtomicMeasure),
}

fn scaled_moment_ratio(m: &AtomicMeasure, n: i32) -> f64 {
    // ∫ s^{n+1} / ∫ s^n, evaluated relative to the largest atom
    let top = m.support_max();
    let (num, den) = m.atoms().iter().fold((0.0, 0.0), |(a, b), &(x, w)| {
        let r = x / top;
        (a + w * r.powi(n + 1), b + w * r.powi(n))
    });
    top * num / den
}

fn scaled_inverse_ratio(m: &AtomicMeasure, k: i32) -> f64 {
    // ∫ s^{-k} / ∫ s^{-(k+1)}, evaluated relative to the smallest atom
    let low = m.atoms().first().map_or(0.0, |a| a.0);
    let (num, den) = m.atoms().iter().fold((0.0, 0.0), |(a, b), &(x, w)| {
        let r = low / x;
        (a + w * r.powi(k), b + w * r.powi(k + 1))
    });
    low * num / den
}

impl Tail {
    pub fn value(&self, pos: usize) -> Complex64 {
        let p = pos as f64;
        let real = match self {
            Tail::Constant(c) => return *c,
            Tail::Power(q) => q.powi(pos as i32),
            Tail::Factorial => (1..=pos).map(|k| k as f64).product(),
            Tail::PowerLaw(s) => p.powf(*s),
            Tail::Affine { c, breaks } => {
                let k = breaks.iter().copied().filter(|&b| b <= pos).max().unwrap_or(1);
                c + p + 1.0 - k as f64
            }
            Tail::MomentRatio(m) => scaled_moment_ratio(m, pos as i32 - 2).sqrt(),
            Tail::AlternatingRatio(t) => {
                let a = t.alternating_sequence(1.0, pos.saturating_sub(1)).values;
                let n = pos.saturating_sub(1);
                (a[n] / a[n.saturating_sub(1)]).sqrt()
            }
            Tail::InverseMomentRatio(m) => scaled_inverse_ratio(m, pos as i32 + 1).sqrt(),
        };
        Complex64::new(real, 0.0)
    }

    pub fn trend(&self) -> Trend {
        let by = |x: f64, one: f64| {
            if x > one {
                Trend::Nondecreasing
            } else if x < one {
                Trend::Nonincreasing
            } else {
                Trend::Constant(1.0)
            }
        };
        match self {
            Tail::Constant(c) => Trend::Constant(c.norm()),
            Tail::Power(q) => by(q.abs(), 1.0),
            Tail::Factorial => Trend::Nondecreasing,
            Tail::PowerLaw(s) => by(*s, 0.0),
            Tail::Affine { .. } => Trend::Unknown,
            Tail::MomentRatio(m) | Tail::InverseMomentRatio(m) if m.atoms().len() == 1 => {
                Trend::Constant(m.atoms()[0].0.sqrt())
            }
            Tail::MomentRatio(_) => Trend::Nondecreasing,
            Tail::InverseMomentRatio(_) => Trend::Nonincreasing,
            Tail::AlternatingRatio(t) if t.is_zero() => Trend::Constant(1.0),
            Tail::AlternatingRatio(_) => Trend::Nonincreasing,
        }
    }

    /// Supremum of moduli over positions `≥ start`.
    pub fn sup_from(&self, start: usize) -> f64 {
        let here = self.value(start).norm();
        match self.trend() {
            Trend::Constant(c) => c,
            Trend::Nonincreasing => here,
            Trend::Nondecreasing => match self {
                Tail::MomentRatio(m) => m.support_max().sqrt(),
                _ => f64::INFINITY,
            },
            Trend::Unknown => f64::INFINITY,
        }
    }

    /// Infimum of moduli over positions `≥ start`.
    pub fn inf_from(&self, start: usize) -> f64 {
        let here = self.value(start).norm();
        match self.trend() {
            Trend::Constant(c) => c,
            Trend::Nondecreasing => here,
            Trend::Nonincreasing => match self {
                Tail::AlternatingRatio(_) => 1.0,
                Tail::InverseMomentRatio(m) => m.atoms().first().map_or(0.0, |a| a.0.sqrt()),
                _ => 0.0,
            },
            Trend::Unknown => match self {
                Tail::Affine { c, breaks } => {
                    let later = breaks.iter().any(|&b| b > start);
                    if later {
                        here.min(c + 1.0)
                    } else {
                        here
                    }
                }
                _ => 0.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubtreeRule {
    pub vertex: String,
    pub value: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailRule {
    pub branch: usize,
    pub head: Vec<Complex64>,
    pub tail: Tail,
}

impl TailRule {
    fn first(&self) -> usize {
        usize::from(self.branch != 0)
    }

    pub fn value(&self, pos: usize) -> Complex64 {
        let off = pos - self.first();
        self.head.get(off).copied().unwrap_or_else(|| self.tail.value(pos))
    }

    /// First position governed by the tail generator.
    pub fn tail_start(&self) -> usize {
        self.first() + self.head.len()
    }
}

/// Weights of a shift. Precedence, strongest first: `base`, `tails`,
/// `subtrees` (later rules win), `default`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightSystem {
    pub base: BTreeMap<String, Complex64>,
    pub default: Option<Complex64>,
    pub subtrees: Vec<SubtreeRule>,
    pub tails: Vec<TailRule>,
}

/// The single rule that fixes the weights of an open branch from `start` on.
#[derive(Debug, Clone, PartialEq)]
pub struct BeyondRule {
    pub end: OpenEnd,
    pub start: usize,
    pub tail: Tail,
}

impl WeightSystem {
    pub fn constant(c: f64) -> Self {
        Self { default: Some(Complex64::new(c, 0.0)), ..Self::default() }
    }

    pub fn with_base<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        Self {
            base: entries
                .into_iter()
                .map(|(k, v)| (k.into(), Complex64::new(v, 0.0)))
                .collect(),
            ..Self::default()
        }
    }

    pub fn tail(mut self, branch: usize, head: &[f64], tail: Tail) -> Self {
        self.tails.push(TailRule {
            branch,
            head: head.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            tail,
        });
        self
    }

    pub fn subtree(mut self, vertex: &str, value: f64) -> Self {
        self.subtrees.push(SubtreeRule { vertex: vertex.into(), value: Complex64::new(value, 0.0) });
        self
    }

    pub fn set(mut self, id: &str, value: f64) -> Self {
        self.base.insert(id.into(), Complex64::new(value, 0.0));
        self
    }

    pub fn set_default(mut self, value: f64) -> Self {
        self.default = Some(Complex64::new(value, 0.0));
        self
    }

    /// The same rules with every weight replaced by its modulus.
    pub fn modulus(&self) -> Self {
        let abs = |c: &Complex64| Complex64::new(c.norm(), 0.0);
        Self {
            base: self.base.iter().map(|(k, v)| (k.clone(), abs(v))).collect(),
            default: self.default.as_ref().map(abs),
            subtrees: self
                .subtrees
                .iter()
                .map(|r| SubtreeRule { vertex: r.vertex.clone(), value: abs(&r.value) })
                .collect(),
            tails: self
                .tails
                .iter()
                .map(|t| TailRule {
                    branch: t.branch,
                    head: t.head.iter().map(abs).collect(),
                    tail: match &t.tail {
                        Tail::Constant(c) => Tail::Constant(abs(c)),
                        Tail::Power(q) => Tail::Power(q.abs()),
                        other => other.clone(),
                    },
                })
                .collect(),
        }
    }

    fn tail_for(&self, branch: usize) -> Option<&TailRule> {
        self.tails.iter().find(|t| t.branch == branch)
    }

    fn covers(tree: &DirectedTree, rule_vertex: &str, id: &str) -> bool {
        match (tree.get(rule_vertex), tree.get(id)) {
            (Some(a), Some(b)) => tree.is_ancestor_or_self(a, b),
            _ => tree
                .family()
                .and_then(|f| f.is_ancestor_or_self(rule_vertex, id))
                .unwrap_or(false),
        }
    }

    /// Weight of the vertex with the given id, which need not be materialized
    /// when the tree comes from a family.
    pub fn weight_of(&self, tree: &DirectedTree, id: &str) -> Option<Complex64> {
        if let Some(w) = self.base.get(id) {
            return Some(*w);
        }
        let coord = match tree.get(id) {
            Some(v) => tree.coord(v),
            None => tree.family().and_then(|f| f.coord_of(id)),
        };
        if let Some(Coord { branch, pos }) = coord {
            if let Some(rule) = self.tail_for(branch) {
                if pos >= rule.first() {
                    return Some(rule.value(pos));
                }
            }
        }
        if let Some(rule) = self.subtrees.iter().rev().find(|r| Self::covers(tree, &r.vertex, id)) {
            return Some(rule.value);
        }
        self.default
    }

    fn check(&self, tree: &DirectedTree) -> Result<(), WeightError> {
        let mut seen = std::collections::BTreeSet::new();
        for t in &self.tails {
            if !seen.insert(t.branch) {
                return Err(WeightError::DuplicateTail(t.branch));
            }
            if let Tail::MomentRatio(m) | Tail::InverseMomentRatio(m) = &t.tail {
                if m.is_zero() || m.atoms().iter().all(|a| a.0 == 0.0) {
                    return Err(WeightError::InvalidTail("ratio of a measure with no positive atom".into()));
                }
            }
        }
        if !self.tails.is_empty() && tree.family().is_none() {
            return Err(WeightError::TailWithoutFamily);
        }
        for id in self.base.keys() {
            match tree.get(id) {
                Some(v) if Some(v) == tree.root() => {
                    return Err(WeightError::RootWeight(id.clone()))
                }
                Some(_) => {}
                None if tree.family().is_some() => {}
                None => return Err(WeightError::UnknownVertex(id.clone())),
            }
        }
        Ok(())
    }

    /// Weights of all materialized vertices; the root carries 0.
    pub fn resolve(&self, tree: &DirectedTree) -> Result<Vec<Complex64>, WeightError> {
        self.check(tree)?;
        (0..tree.len())
            .map(|v| {
                if Some(v) == tree.root() {
                    Ok(Complex64::new(0.0, 0.0))
                } else {
                    self.weight_of(tree, tree.id(v))
                        .ok_or_else(|| WeightError::Unresolved(tree.id(v).to_string()))
                }
            })
            .collect()
    }

    /// For each open end of a family truncation, the rule governing the weights
    /// from some position on. `None` when the truncation is not described by
    /// open ends or some branch has no single governing rule.
    pub fn beyond(&self, tree: &DirectedTree) -> Option<Vec<BeyondRule>> {
        let family = tree.family()?;
        let ends = tree.open_ends()?;
        ends.iter().map(|end| self.beyond_end(family, *end)).collect()
    }

    fn beyond_end(&self, family: &FamilyKind, end: OpenEnd) -> Option<BeyondRule> {
        let branch = end.branch;
        let first = usize::from(branch != 0);
        let mut start = first;
        for id in self.base.keys() {
            if let Some(c) = family.coord_of(id) {
                if c.branch == branch {
                    start = start.max(c.pos + 1);
                }
            }
        }
        if let Some(rule) = self.tail_for(branch) {
            return Some(BeyondRule {
                end,
                start: start.max(rule.tail_start()),
                tail: rule.tail.clone(),
            });
        }
        let far = match end.direction {
            Direction::Forward => far_id(family, branch)?,
            Direction::Backward => {
                return self.default.map(|c| BeyondRule { end, start, tail: Tail::Constant(c) })
            }
        };
        let covering = self
            .subtrees
            .iter()
            .filter(|r| family.is_ancestor_or_self(&r.vertex, &far) == Some(true))
            .collect::<Vec<_>>();
        for r in &covering {
            if let Some(c) = family.coord_of(&r.vertex) {
                if c.branch == branch {
                    start = start.max(c.pos);
                }
            }
        }
        let value = covering.last().map(|r| r.value).or(self.default)?;
        Some(BeyondRule { end, start, tail: Tail::Constant(value) })
    }
}

fn far_id(family: &FamilyKind, branch: usize) -> Option<String> {
    family.id_of(Coord { branch, pos: 1 << 40 })
}
