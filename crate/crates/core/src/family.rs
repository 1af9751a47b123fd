//! Parameterized infinite trees and their depth-bounded materialization.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::tree::{Coord, DirectedTree, Direction, IndexError, OpenEnd, TreeParts};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kappa {
    Finite(usize),
    Infinite,
}

impl fmt::Display for Kappa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kappa::Finite(k) => write!(f, "{k}"),
            Kappa::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FamilyError {
    #[error("eta must be a finite integer >= 2, got {0}")]
    InvalidEta(String),
}

/// Leaf and branching counts of an infinite tree, enough to evaluate its index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyStructure {
    pub rooted: bool,
    pub leaves: usize,
    /// Number of children of each branching vertex.
    pub branching: Vec<usize>,
}

/// User-supplied rooted tree generator.
pub trait TreeGenerator: Send + Sync + fmt::Debug {
    fn root(&self) -> String;
    fn children(&self, v: &str) -> Vec<String>;
    /// Finitely determined structural data, when the generator knows it.
    fn structure(&self) -> Option<FamilyStructure> {
        None
    }
}

#[derive(Debug, Clone)]
pub enum FamilyKind {
    ZPlus,
    Z,
    ZMinus,
    TEtaKappa {
        eta: usize,
        kappa: Kappa,
    },
    /// Binary tree with vertices `(i,j)` below `root`; level `i` holds `2^i`
    /// vertices, or `2^(i-1)` with a single stem. The spine is `(i,1)`.
    /// Off-spine subtrees are cut `side_depth` levels below the spine.
    Binary {
        single_stem: bool,
        side_depth: Option<usize>,
    },
    Custom(Arc<dyn TreeGenerator>),
}

#[derive(Debug, Clone)]
pub struct TreeFamily {
    pub kind: FamilyKind,
    pub depth: usize,
}

fn parse_pair(id: &str) -> Option<(usize, usize)> {
    let inner = id.strip_prefix('(')?.strip_suffix(')')?;
    let (a, b) = inner.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

fn pair_id(i: usize, j: usize) -> String {
    format!("({i},{j})")
}

impl FamilyKind {
    pub fn t_eta_kappa(eta: usize, kappa: Kappa) -> Result<Self, FamilyError> {
        if eta < 2 {
            return Err(FamilyError::InvalidEta(eta.to_string()));
        }
        Ok(FamilyKind::TEtaKappa { eta, kappa })
    }

    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::ZPlus => "z_plus",
            FamilyKind::Z => "z",
            FamilyKind::ZMinus => "z_minus",
            FamilyKind::TEtaKappa { .. } => "T_eta_kappa",
            FamilyKind::Binary { .. } => "binary",
            FamilyKind::Custom(_) => "custom",
        }
    }

    /// Branch coordinates of a vertex id, if the id belongs to a straight branch.
    pub fn coord_of(&self, id: &str) -> Option<Coord> {
        match self {
            FamilyKind::ZPlus | FamilyKind::Z | FamilyKind::ZMinus => {
                let n: i64 = id.parse().ok()?;
                let ok = match self {
                    FamilyKind::ZPlus => n >= 1,
                    FamilyKind::ZMinus => n <= 0,
                    _ => true,
                };
                ok.then(|| {
                    if n >= 1 {
                        Coord { branch: 1, pos: n as usize }
                    } else {
                        Coord { branch: 0, pos: n.unsigned_abs() as usize }
                    }
                })
            }
            FamilyKind::TEtaKappa { eta, kappa } => {
                if let Some((i, j)) = parse_pair(id) {
                    return (i >= 1 && i <= *eta && j >= 1).then_some(Coord { branch: i, pos: j });
                }
                let n: i64 = id.parse().ok()?;
                let k = (-n) as usize;
                let inside = n <= 0
                    && match kappa {
                        Kappa::Finite(kk) => k < *kk,
                        Kappa::Infinite => true,
                    };
                inside.then_some(Coord { branch: 0, pos: k })
            }
            FamilyKind::Binary { .. } => {
                let (i, j) = parse_pair(id)?;
                (i >= 1 && j == 1).then_some(Coord { branch: 1, pos: i })
            }
            FamilyKind::Custom(_) => None,
        }
    }

    /// Vertex id at branch coordinates; inverse of [`FamilyKind::coord_of`].
    pub fn id_of(&self, c: Coord) -> Option<String> {
        let trunk = |k: usize| if k == 0 { "0".to_string() } else { format!("-{k}") };
        let id = match self {
            FamilyKind::ZPlus | FamilyKind::Z | FamilyKind::ZMinus => {
                if c.branch == 1 {
                    c.pos.to_string()
                } else {
                    trunk(c.pos)
                }
            }
            FamilyKind::TEtaKappa { .. } => {
                if c.branch == 0 {
                    trunk(c.pos)
                } else {
                    pair_id(c.branch, c.pos)
                }
            }
            FamilyKind::Binary { .. } => pair_id(c.pos, 1),
            FamilyKind::Custom(_) => return None,
        };
        (self.coord_of(&id) == Some(c)).then_some(id)
    }

    /// Ancestry between two vertex ids of the full infinite tree.
    pub fn is_ancestor_or_self(&self, a: &str, b: &str) -> Option<bool> {
        if a == b {
            return Some(true);
        }
        match self {
            FamilyKind::ZPlus | FamilyKind::Z | FamilyKind::ZMinus => {
                let x: i64 = a.parse().ok()?;
                let y: i64 = b.parse().ok()?;
                Some(x <= y)
            }
            FamilyKind::TEtaKappa { .. } => {
                let level = |s: &str| -> Option<(Option<usize>, i64)> {
                    match parse_pair(s) {
                        Some((i, j)) => Some((Some(i), j as i64)),
                        None => s.parse::<i64>().ok().map(|n| (None, n)),
                    }
                };
                let (ba, la) = level(a)?;
                let (bb, lb) = level(b)?;
                Some(match (ba, bb) {
                    (None, _) => la <= lb,
                    (Some(_), None) => false,
                    (Some(x), Some(y)) => x == y && la <= lb,
                })
            }
            FamilyKind::Binary { .. } => {
                if a == "root" {
                    return Some(true);
                }
                let (ia, ja) = parse_pair(a)?;
                let (mut ib, mut jb) = parse_pair(b)?;
                while ib > ia {
                    ib -= 1;
                    jb = jb.div_ceil(2);
                }
                Some(ib == ia && jb == ja)
            }
            FamilyKind::Custom(_) => None,
        }
    }

    pub fn structure(&self) -> Result<FamilyStructure, IndexError> {
        Ok(match self {
            FamilyKind::ZPlus => FamilyStructure { rooted: true, leaves: 0, branching: vec![] },
            FamilyKind::Z => FamilyStructure { rooted: false, leaves: 0, branching: vec![] },
            FamilyKind::ZMinus => FamilyStructure { rooted: false, leaves: 1, branching: vec![] },
            FamilyKind::TEtaKappa { eta, kappa } => FamilyStructure {
                rooted: matches!(kappa, Kappa::Finite(_)),
                leaves: 0,
                branching: vec![*eta],
            },
            FamilyKind::Binary { .. } => {
                return Err(IndexError::NotFredholm(
                    "infinitely many branching vertices".into(),
                ))
            }
            FamilyKind::Custom(g) => g.structure().ok_or_else(|| {
                IndexError::Indeterminate("generator does not report structural data".into())
            })?,
        })
    }
}

impl TreeFamily {
    pub fn new(kind: FamilyKind, depth: usize) -> Self {
        Self { kind, depth }
    }

    /// Index of the infinite tree, from its finitely many leaves and branchings.
    pub fn tree_index(&self) -> Result<i64, IndexError> {
        let s = self.kind.structure()?;
        let count = (s.leaves + s.branching.len()) as i64;
        let outflow: i64 = s.branching.iter().map(|&k| k as i64).sum();
        Ok(count - outflow - i64::from(s.rooted))
    }

    pub fn materialize(&self) -> DirectedTree {
        let d = self.depth;
        let mut b = Builder::default();
        match &self.kind {
            FamilyKind::ZPlus => {
                for k in 0..=d {
                    let p = k.checked_sub(1);
                    let coord = (k >= 1).then_some(Coord { branch: 1, pos: k });
                    b.push(k.to_string(), p, k < d, coord);
                }
                b.ends = Some(vec![forward(1, d)]);
            }
            FamilyKind::Z | FamilyKind::ZMinus => {
                let bilateral = matches!(self.kind, FamilyKind::Z);
                let hi = if bilateral { d } else { 0 };
                for (i, n) in (-(d as i64)..=hi as i64).enumerate() {
                    let coord = if n >= 1 {
                        Coord { branch: 1, pos: n as usize }
                    } else {
                        Coord { branch: 0, pos: n.unsigned_abs() as usize }
                    };
                    let complete = !bilateral || n < hi as i64;
                    b.push(n.to_string(), i.checked_sub(1), complete, Some(coord));
                }
                b.open_top = true;
                let mut ends = vec![backward(d)];
                if bilateral {
                    ends.push(forward(1, d));
                }
                b.ends = Some(ends);
            }
            FamilyKind::TEtaKappa { eta, kappa } => {
                let top = match kappa {
                    Kappa::Finite(k) => *k,
                    Kappa::Infinite => d,
                };
                for k in (0..=top).rev() {
                    let idx = top - k;
                    let id = if k == 0 { "0".to_string() } else { format!("-{k}") };
                    let is_root = matches!(kappa, Kappa::Finite(kk) if k == *kk);
                    let coord = (!is_root).then_some(Coord { branch: 0, pos: k });
                    let complete = k > 0 || d >= 1;
                    b.push(id, idx.checked_sub(1), complete, coord);
                }
                let zero = top;
                for j in 1..=d {
                    for i in 1..=*eta {
                        let p = if j == 1 { zero } else { b.len() - eta };
                        b.push(pair_id(i, j), Some(p), j < d, Some(Coord { branch: i, pos: j }));
                    }
                }
                let mut ends: Vec<OpenEnd> = (1..=*eta).map(|i| forward(i, d)).collect();
                if *kappa == Kappa::Infinite {
                    b.open_top = true;
                    ends.insert(0, backward(d));
                }
                b.ends = Some(ends);
            }
            FamilyKind::Binary { single_stem, side_depth } => {
                b.push("root".into(), None, d >= 1, None);
                let width1 = if *single_stem { 1 } else { 2 };
                // (index, level i, position j, distance from spine)
                let mut queue: VecDeque<(usize, usize, usize, usize)> = VecDeque::new();
                if d >= 1 {
                    for j in 1..=width1 {
                        queue.push_back((0, 1, j, usize::from(j != 1)));
                    }
                }
                while let Some((p, i, j, off)) = queue.pop_front() {
                    let expand = i < d && side_depth.is_none_or(|s| off < s);
                    let coord = (j == 1).then_some(Coord { branch: 1, pos: i });
                    let me = b.len();
                    b.push(pair_id(i, j), Some(p), expand, coord);
                    if expand {
                        for jj in [2 * j - 1, 2 * j] {
                            let o = if jj == 1 { 0 } else { off + 1 };
                            queue.push_back((me, i + 1, jj, o));
                        }
                    }
                }
            }
            FamilyKind::Custom(g) => {
                let mut queue = VecDeque::from([(g.root(), None::<usize>, 0usize)]);
                while let Some((id, p, lvl)) = queue.pop_front() {
                    let me = b.len();
                    b.push(id.clone(), p, lvl < d, None);
                    if lvl < d {
                        for c in g.children(&id) {
                            queue.push_back((c, Some(me), lvl + 1));
                        }
                    }
                }
            }
        }
        b.finish(self.kind.clone())
    }
}

fn forward(branch: usize, last: usize) -> OpenEnd {
    OpenEnd { branch, direction: Direction::Forward, last }
}

fn backward(last: usize) -> OpenEnd {
    OpenEnd { branch: 0, direction: Direction::Backward, last }
}

#[derive(Default)]
struct Builder {
    ids: Vec<String>,
    parent: Vec<Option<usize>>,
    complete: Vec<bool>,
    coords: Vec<Option<Coord>>,
    open_top: bool,
    ends: Option<Vec<OpenEnd>>,
}

impl Builder {
    fn len(&self) -> usize {
        self.ids.len()
    }

    fn push(&mut self, id: String, parent: Option<usize>, complete: bool, coord: Option<Coord>) {
        self.ids.push(id);
        self.parent.push(parent);
        self.complete.push(complete);
        self.coords.push(coord);
    }

    fn finish(self, kind: FamilyKind) -> DirectedTree {
        DirectedTree::from_parts(TreeParts {
            ids: self.ids,
            parent: self.parent,
            complete: self.complete,
            open_top: self.open_top,
            coords: self.coords,
            family: Some(kind),
            ends: self.ends,
        })
    }
}
