//! Directed trees: validation, navigation, structural sets and the tree index.
//!
//! A [`DirectedTree`] is always finite. Infinite trees enter through
//! [`crate::family::TreeFamily`], which materializes a prefix and marks each
//! vertex as complete when all of its children are present.

use std::cmp::Ordering;
use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::family::FamilyKind;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("tree has no vertices")]
    Empty,
    #[error("duplicate vertex {0}")]
    DuplicateVertex(String),
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("vertex {0} has more than one parent")]
    MultipleParents(String),
    #[error("circuit through {}", .0.join(" -> "))]
    CircuitFound(Vec<String>),
    #[error("graph is not connected")]
    Disconnected,
    #[error("more than one parentless vertex: {}", .0.join(", "))]
    MultipleRoots(Vec<String>),
    #[error("complement of the subtree at {0} is empty")]
    EmptyComplement(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IndexError {
    #[error("not Fredholm: {0}")]
    NotFredholm(String),
    #[error("indeterminate: {0}")]
    Indeterminate(String),
}

/// Position of a vertex on a named branch of a family tree.
///
/// Branch 0 is the trunk above the branching vertex (position `k` is the
/// vertex `-k`); branches `1..` run forward from the branching vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Coord {
    pub branch: usize,
    pub pos: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// An infinite straight branch cut off by materialization; `last` is the
/// last materialized position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpenEnd {
    pub branch: usize,
    pub direction: Direction,
    pub last: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StructuralSets {
    pub leaves: Vec<String>,
    pub branching: Vec<String>,
    pub vprime: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct DirectedTree {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    level: Vec<usize>,
    top: usize,
    complete: Vec<bool>,
    open_top: bool,
    coords: Vec<Option<Coord>>,
    family: Option<FamilyKind>,
    ends: Option<Vec<OpenEnd>>,
}

/// Parts of a materialized tree handed over by a family generator.
pub(crate) struct TreeParts {
    pub ids: Vec<String>,
    pub parent: Vec<Option<usize>>,
    pub complete: Vec<bool>,
    pub open_top: bool,
    pub coords: Vec<Option<Coord>>,
    pub family: Option<FamilyKind>,
    pub ends: Option<Vec<OpenEnd>>,
}

impl DirectedTree {
    /// Validates a finite vertex/edge list and builds the tree.
    pub fn validate<S: AsRef<str>>(vertices: &[S], edges: &[(S, S)]) -> Result<Self, TreeError> {
        if vertices.is_empty() {
            return Err(TreeError::Empty);
        }
        let mut index = HashMap::with_capacity(vertices.len());
        let ids: Vec<String> = vertices.iter().map(|v| v.as_ref().to_string()).collect();
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(TreeError::DuplicateVertex(id.clone()));
            }
        }
        let n = ids.len();
        let lookup = |s: &str| {
            index
                .get(s)
                .copied()
                .ok_or_else(|| TreeError::UnknownVertex(s.to_string()))
        };
        let mut parent: Vec<Option<usize>> = vec![None; n];
        for (a, b) in edges {
            let u = lookup(a.as_ref())?;
            let v = lookup(b.as_ref())?;
            if u == v {
                return Err(TreeError::CircuitFound(vec![ids[u].clone()]));
            }
            match parent[v] {
                Some(p) if p != u => return Err(TreeError::MultipleParents(ids[v].clone())),
                _ => parent[v] = Some(u),
            }
        }
        if let Some(cycle) = find_circuit(&parent) {
            return Err(TreeError::CircuitFound(
                cycle.into_iter().map(|i| ids[i].clone()).collect(),
            ));
        }
        let mut adj = vec![Vec::new(); n];
        for (v, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                adj[p].push(v);
                adj[v].push(p);
            }
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &w in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        if count < n {
            return Err(TreeError::Disconnected);
        }
        let roots: Vec<usize> = (0..n).filter(|&v| parent[v].is_none()).collect();
        if roots.len() > 1 {
            return Err(TreeError::MultipleRoots(
                roots.into_iter().map(|i| ids[i].clone()).collect(),
            ));
        }
        let mut tree = Self::from_parts(TreeParts {
            ids,
            parent,
            complete: vec![true; n],
            open_top: false,
            coords: vec![None; n],
            family: None,
            ends: Some(Vec::new()),
        });
        let ids = &tree.ids;
        for ch in tree.children.iter_mut() {
            ch.sort_by(|&a, &b| canonical_cmp(&ids[a], &ids[b]));
        }
        Ok(tree)
    }

    /// Declares the top vertex a truncation point: its parent exists but is not listed.
    pub fn open_above(mut self) -> Self {
        self.open_top = true;
        self.ends = None;
        self
    }

    /// Declares vertices whose children are only partly listed.
    pub fn mark_incomplete<S: AsRef<str>>(mut self, ids: &[S]) -> Result<Self, TreeError> {
        for id in ids {
            let v = self.index_of(id.as_ref())?;
            self.complete[v] = false;
        }
        if !ids.is_empty() {
            self.ends = None;
        }
        Ok(self)
    }

    pub(crate) fn from_parts(parts: TreeParts) -> Self {
        let n = parts.ids.len();
        let mut children = vec![Vec::new(); n];
        let mut top = 0;
        for (v, p) in parts.parent.iter().enumerate() {
            match p {
                Some(p) => children[*p].push(v),
                None => top = v,
            }
        }
        let index = parts
            .ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        let mut level = vec![0; n];
        let mut queue = VecDeque::from([top]);
        while let Some(u) = queue.pop_front() {
            for &v in &children[u] {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
        Self {
            ids: parts.ids,
            index,
            parent: parts.parent,
            children,
            level,
            top,
            complete: parts.complete,
            open_top: parts.open_top,
            coords: parts.coords,
            family: parts.family,
            ends: parts.ends,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, v: usize) -> &str {
        &self.ids[v]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn index_of(&self, id: &str) -> Result<usize, TreeError> {
        self.get(id)
            .ok_or_else(|| TreeError::UnknownVertex(id.to_string()))
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    /// The root of the underlying tree, or `None` when the tree is rootless
    /// and this is a truncation of it.
    pub fn root(&self) -> Option<usize> {
        (!self.open_top).then_some(self.top)
    }

    /// The parentless vertex of this finite tree.
    pub fn top(&self) -> usize {
        self.top
    }

    /// True when the top vertex has a parent outside the materialized part.
    pub fn open_top(&self) -> bool {
        self.open_top
    }

    pub fn is_complete(&self, v: usize) -> bool {
        self.complete[v]
    }

    /// True when this is a proper prefix of a larger tree.
    pub fn is_truncated(&self) -> bool {
        self.open_top || self.complete.iter().any(|c| !c)
    }

    /// Whether the parent of `v` is known: either present or `v` is the true root.
    pub fn parent_known(&self, v: usize) -> bool {
        self.parent[v].is_some() || !self.open_top
    }

    pub fn coord(&self, v: usize) -> Option<Coord> {
        self.coords[v]
    }

    pub fn family(&self) -> Option<&FamilyKind> {
        self.family.as_ref()
    }

    /// Straight infinite branches cut by materialization. `None` means the
    /// unmaterialized part is not described by open ends alone.
    pub fn open_ends(&self) -> Option<&[OpenEnd]> {
        self.ends.as_deref()
    }

    /// Distance from the top vertex.
    /// Materialization depth: the extent of the open ends, else the height.
    pub fn depth(&self) -> usize {
        match self.ends.as_deref() {
            Some(ends) if !ends.is_empty() => ends.iter().map(|e| e.last).max().unwrap_or(0),
            _ => self.level.iter().copied().max().unwrap_or(0),
        }
    }

    pub fn level(&self, v: usize) -> usize {
        self.level[v]
    }

    pub fn bfs(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.len());
        let mut queue = VecDeque::from([self.top]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            queue.extend(self.children[u].iter().copied());
        }
        order
    }

    /// Materialized part of the `n`-th generation of children of `u`.
    pub fn descendants(&self, u: usize, n: usize) -> Vec<usize> {
        let mut layer = vec![u];
        for _ in 0..n {
            layer = layer
                .iter()
                .flat_map(|&w| self.children[w].iter().copied())
                .collect();
        }
        layer
    }

    pub fn descendants_of(&self, id: &str, n: usize) -> Result<Vec<String>, TreeError> {
        let u = self.index_of(id)?;
        Ok(self.sorted_ids(self.descendants(u, n)))
    }

    /// All materialized descendants of `u`, including `u`.
    pub fn subtree(&self, u: usize) -> Vec<usize> {
        let mut out = vec![u];
        let mut i = 0;
        while i < out.len() {
            out.extend(self.children[out[i]].iter().copied());
            i += 1;
        }
        out
    }

    pub fn is_ancestor_or_self(&self, a: usize, mut b: usize) -> bool {
        loop {
            if a == b {
                return true;
            }
            match self.parent[b] {
                Some(p) => b = p,
                None => return false,
            }
        }
    }

    pub fn sorted_ids(&self, set: impl IntoIterator<Item = usize>) -> Vec<String> {
        let mut out: Vec<String> = set.into_iter().map(|v| self.ids[v].clone()).collect();
        out.sort_by(|a, b| canonical_cmp(a, b));
        out
    }

    /// Leaves, branching vertices and non-leaves among complete vertices.
    pub fn structural_sets(&self) -> StructuralSets {
        let complete = (0..self.len()).filter(|&v| self.complete[v]);
        let mut sets = StructuralSets::default();
        for v in complete {
            match self.children[v].len() {
                0 => sets.leaves.push(self.ids[v].clone()),
                1 => sets.vprime.push(self.ids[v].clone()),
                _ => {
                    sets.branching.push(self.ids[v].clone());
                    sets.vprime.push(self.ids[v].clone());
                }
            }
        }
        sets.leaves.sort_by(|a, b| canonical_cmp(a, b));
        sets.branching.sort_by(|a, b| canonical_cmp(a, b));
        sets.vprime.sort_by(|a, b| canonical_cmp(a, b));
        sets
    }

    /// Index of a finite tree. Truncations of infinite trees are refused;
    /// use [`crate::family::TreeFamily::tree_index`] for those.
    pub fn tree_index(&self) -> Result<i64, IndexError> {
        if self.is_truncated() {
            return Err(IndexError::Indeterminate(
                "truncated tree; evaluate the family instead".into(),
            ));
        }
        let mut count = 0i64;
        let mut outflow = 0i64;
        for v in 0..self.len() {
            let k = self.children[v].len() as i64;
            if k == 0 {
                count += 1;
            } else if k >= 2 {
                count += 1;
                outflow += k;
            }
        }
        Ok(count - 1 - outflow)
    }

    /// Splits into the subtree of descendants of `u` and its complement.
    pub fn split_at(&self, id: &str) -> Result<(DirectedTree, DirectedTree), TreeError> {
        let u = self.index_of(id)?;
        let mut inside = vec![false; self.len()];
        for v in self.subtree(u) {
            inside[v] = true;
        }
        if inside.iter().all(|&x| x) {
            return Err(TreeError::EmptyComplement(id.to_string()));
        }
        let keep_ends = self.ends.as_ref().filter(|e| e.is_empty()).cloned();
        let build = |mask: &dyn Fn(usize) -> bool, open_top: bool| {
            let members: Vec<usize> = self.bfs().into_iter().filter(|&v| mask(v)).collect();
            let local: HashMap<usize, usize> =
                members.iter().enumerate().map(|(i, &v)| (v, i)).collect();
            DirectedTree::from_parts(TreeParts {
                ids: members.iter().map(|&v| self.ids[v].clone()).collect(),
                parent: members
                    .iter()
                    .map(|&v| self.parent[v].and_then(|p| local.get(&p).copied()))
                    .collect(),
                complete: members.iter().map(|&v| self.complete[v]).collect(),
                open_top,
                coords: members.iter().map(|&v| self.coords[v]).collect(),
                family: None,
                ends: keep_ends.clone(),
            })
        };
        let first = build(&|v| inside[v], false);
        let second = build(&|v| !inside[v], self.open_top);
        Ok((first, second))
    }
}

fn find_circuit(parent: &[Option<usize>]) -> Option<Vec<usize>> {
    // 0 = unvisited, 1 = on current walk, 2 = finished
    let mut state = vec![0u8; parent.len()];
    for start in 0..parent.len() {
        let mut walk = Vec::new();
        let mut v = start;
        loop {
            match state[v] {
                2 => break,
                1 => {
                    let pos = walk.iter().position(|&w| w == v).unwrap_or(0);
                    let mut cycle: Vec<usize> = walk[pos..].to_vec();
                    cycle.reverse();
                    return Some(cycle);
                }
                _ => {}
            }
            state[v] = 1;
            walk.push(v);
            match parent[v] {
                Some(p) => v = p,
                None => break,
            }
        }
        for w in walk {
            state[w] = 2;
        }
    }
    None
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
enum Token<'a> {
    Num(i64),
    Text(&'a str),
}

fn tokens(s: &str) -> Vec<Token<'_>> {
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let neg = bytes[i] == b'-' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit();
        let start = i;
        if neg || bytes[i].is_ascii_digit() {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            match s[start..i].parse() {
                Ok(n) => out.push(Token::Num(n)),
                Err(_) => out.push(Token::Text(&s[start..i])),
            }
        } else {
            i += 1;
            while i < bytes.len() && !bytes[i].is_ascii_digit() && bytes[i] != b'-' {
                i += 1;
            }
            out.push(Token::Text(&s[start..i]));
        }
    }
    out
}

/// Natural ordering of vertex ids: embedded integers compare numerically.
pub fn canonical_cmp(a: &str, b: &str) -> Ordering {
    tokens(a).cmp(&tokens(b)).then_with(|| a.cmp(b))
}
