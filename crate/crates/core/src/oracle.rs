//! Brute-force dense-matrix checks, independent of the tree formulas.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::measure::{hankel, MeasureError, MomentPrefix};
use crate::shift::WeightedShift;
use crate::tree::DirectedTree;

pub const MAX_POWER_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("power iteration did not converge in {0} iterations")]
    NonConvergence(usize),
    #[error("no interior vertices")]
    EmptyInterior,
    #[error("exponent must be positive, got {0}")]
    InvalidExponent(f64),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

#[derive(Debug, Clone)]
pub struct Truncation {
    pub tree: DirectedTree,
    /// Vertex at each matrix position, in BFS order.
    pub ordering: Vec<usize>,
    /// Matrix position of each vertex.
    pub position: Vec<usize>,
    pub matrix: DMatrix<Complex64>,
    /// Children and parent all materialized (the true root counts as having its parent).
    pub interior: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommutatorCheck {
    pub min_eig: f64,
    pub passed: bool,
    /// Interior vertex with the most negative diagonal entry, if any is negative.
    pub witness: Option<String>,
}

pub fn truncate(shift: &WeightedShift) -> Truncation {
    let tree = shift.tree().clone();
    let ordering = tree.bfs();
    let n = ordering.len();
    let mut position = vec![0; n];
    for (i, &v) in ordering.iter().enumerate() {
        position[v] = i;
    }
    let mut matrix = DMatrix::zeros(n, n);
    for (i, &v) in ordering.iter().enumerate() {
        if let Some(p) = tree.parent(v) {
            matrix[(i, position[p])] = shift.lambda(v);
        }
    }
    let interior = (0..n)
        .map(|v| tree.is_complete(v) && (tree.parent(v).is_some() || !tree.open_top()))
        .collect();
    Truncation { tree, ordering, position, matrix, interior }
}

impl Truncation {
    pub fn len(&self) -> usize {
        self.ordering.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordering.is_empty()
    }

    fn basis(&self, v: usize) -> DVector<Complex64> {
        let mut e = DVector::zeros(self.len());
        e[self.position[v]] = Complex64::new(1.0, 0.0);
        e
    }

    /// `‖Aⁿ e_u‖²` and `‖A*ⁿ e_u‖` from repeated matrix-vector products.
    pub fn power_vector_norms(&self, u: usize, n: usize) -> (f64, f64) {
        let mut x = self.basis(u);
        let mut y = x.clone();
        let adj = self.matrix.adjoint();
        for _ in 0..n {
            x = &self.matrix * x;
            y = &adj * y;
        }
        (x.norm_squared(), y.norm())
    }

    /// Vertices whose `k`-step neighbourhoods up and down are materialized.
    fn interior_for_power(&self, k: usize) -> Vec<bool> {
        let tree = &self.tree;
        (0..self.len())
            .map(|v| {
                let mut frontier = vec![v];
                for _ in 0..k {
                    if frontier.iter().any(|&w| !tree.is_complete(w)) {
                        return false;
                    }
                    frontier = frontier.iter().flat_map(|&w| tree.children(w).to_vec()).collect();
                }
                let mut w = v;
                for _ in 0..k {
                    match tree.parent(w) {
                        Some(p) => w = p,
                        None => return !tree.open_top(),
                    }
                }
                true
            })
            .collect()
    }
}

/// Largest singular value by power iteration on `A*A` from the normalized all-ones vector.
pub fn operator_norm(tr: &Truncation, tol: f64) -> Result<f64, OracleError> {
    let n = tr.len();
    if n == 0 {
        return Ok(0.0);
    }
    let gram = tr.matrix.adjoint() * &tr.matrix;
    let mut x = DVector::from_element(n, Complex64::new(1.0, 0.0)).normalize();
    let mut estimate = 0.0_f64;
    for _ in 0..MAX_POWER_ITERATIONS {
        let y = &gram * &x;
        let next = y.norm();
        if next == 0.0 {
            return Ok(0.0);
        }
        if (next - estimate).abs() <= tol * next {
            return Ok(next.sqrt());
        }
        estimate = next;
        x = y / Complex64::new(next, 0.0);
    }
    Err(OracleError::NonConvergence(MAX_POWER_ITERATIONS))
}

fn hermitian_power(m: &DMatrix<Complex64>, p: f64) -> DMatrix<Complex64> {
    let eig = m.clone().symmetric_eigen();
    let d = eig.eigenvalues.map(|x| Complex64::new(x.max(0.0).powf(p), 0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.adjoint()
}

fn pseudo_inverse_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = m.clone().symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let d = eig.eigenvalues.map(|x| {
        if x > 1e-14 * top.max(1.0) {
            Complex64::new(1.0 / x.sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.adjoint()
}

fn compress(
    tr: &Truncation,
    m: &DMatrix<Complex64>,
    keep: &[bool],
    tol: f64,
) -> Result<CommutatorCheck, OracleError> {
    let idx: Vec<usize> = tr.ordering.iter().filter(|&&v| keep[v]).map(|&v| tr.position[v]).collect();
    if idx.is_empty() {
        return Err(OracleError::EmptyInterior);
    }
    let k = idx.len();
    let sub = DMatrix::from_fn(k, k, |i, j| m[(idx[i], idx[j])]);
    let sub = (&sub + sub.adjoint()) * Complex64::new(0.5, 0.0);
    let scale = sub.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    let min_eig = sub.clone().symmetric_eigen().eigenvalues.min();
    let passed = min_eig >= -tol * (1.0 + scale);
    let witness = (!passed)
        .then(|| {
            (0..k)
                .min_by(|&a, &b| sub[(a, a)].re.total_cmp(&sub[(b, b)].re))
                .filter(|&i| sub[(i, i)].re < 0.0)
                .map(|i| tr.tree.id(tr.ordering[idx[i]]).to_string())
        })
        .flatten();
    Ok(CommutatorCheck { min_eig, passed, witness })
}

/// Positivity of `|A|^{2p} − U|A|^{2p}U*` compressed to interior vertices.
pub fn selfcommutator_check(tr: &Truncation, p: f64, tol: f64) -> Result<CommutatorCheck, OracleError> {
    if !(p > 0.0) {
        return Err(OracleError::InvalidExponent(p));
    }
    let a = &tr.matrix;
    let gram = a.adjoint() * a;
    let modulus_2p = hermitian_power(&gram, p);
    let u = a * pseudo_inverse_sqrt(&gram);
    let adj_2p = &u * &modulus_2p * u.adjoint();
    compress(tr, &(modulus_2p - adj_2p), &tr.interior, tol)
}

/// Hyponormality test `(Aⁿ)*Aⁿ − Aⁿ(Aⁿ)* ≥ 0` for the `n`-th matrix power,
/// compressed to vertices with `n` materialized generations around them.
pub fn power_selfcommutator_check(
    tr: &Truncation,
    n: u32,
    tol: f64,
) -> Result<CommutatorCheck, OracleError> {
    let mut an = DMatrix::identity(tr.len(), tr.len());
    for _ in 0..n {
        an = &tr.matrix * an;
    }
    let m = an.adjoint() * &an - &an * an.adjoint();
    compress(tr, &m, &tr.interior_for_power(n as usize), tol)
}

/// Smallest eigenvalue of the largest Hankel matrix the prefix supports.
pub fn hankel_min_eig(p: &MomentPrefix, shift: usize) -> Result<f64, OracleError> {
    let len = p.values.len();
    if len < shift + 1 {
        return Err(MeasureError::InsufficientLength.into());
    }
    let k = (len - 1 - shift) / 2;
    let h = hankel(&p.values, k, shift)?;
    let m = DMatrix::from_fn(k + 1, k + 1, |i, j| h[i][j]);
    Ok(m.symmetric_eigen().eigenvalues.min())
}

fn nullity(m: &DMatrix<Complex64>) -> usize {
    let (r, c) = m.shape();
    if c == 0 {
        return 0;
    }
    if r == 0 {
        return c;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.max();
    let rank = sv.iter().filter(|&&s| s > 1e-10 * top.max(1.0)).count();
    c - rank
}

/// `dim ker S − dim ker S*` restricted to vectors the truncation represents
/// faithfully: complete vertices for `S`, vertices with a complete parent
/// (or the true root) for `S*`.
pub fn kernel_index(tr: &Truncation) -> i64 {
    let tree = &tr.tree;
    let cols = |keep: &dyn Fn(usize) -> bool| -> Vec<usize> {
        tr.ordering.iter().filter(|&&v| keep(v)).map(|&v| tr.position[v]).collect()
    };
    let select = |m: &DMatrix<Complex64>, idx: &[usize]| {
        DMatrix::from_fn(m.nrows(), idx.len(), |i, j| m[(i, idx[j])])
    };
    let complete = cols(&|v| tree.is_complete(v));
    let reachable = cols(&|v| match tree.parent(v) {
        Some(p) => tree.is_complete(p),
        None => !tree.open_top(),
    });
    let ker = nullity(&select(&tr.matrix, &complete));
    let coker = nullity(&select(&tr.matrix.adjoint(), &reachable));
    ker as i64 - coker as i64
}
