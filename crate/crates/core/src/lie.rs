//! Finite-dimensional nilpotent Lie algebras given by structure constants,
//! their centers, central quotients and the section/projection pair between
//! `h` and `k = h/z`.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{gram_schmidt, invert, jacobi_svd, mat_t_vec, mat_vec};
use crate::scalar::{max_abs, Scalar};
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

/// Largest algebra dimension accepted anywhere in the crate.
pub const MAX_DIM: usize = 16;

const ANTISYMMETRY_TOL: f64 = 1e-12;
const JACOBI_TOL: f64 = 1e-9;
const RANK_CUTOFF: f64 = 1e-10;

/// A Lie algebra with basis `e_0 .. e_{n-1}` and
/// `[e_i, e_j] = sum_k c[i][j][k] e_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LieAlgebra<T> {
    dim: usize,
    structure: Vec<T>,
    labels: Vec<String>,
    // (i, j, k, c_ij^k) for i < j and nonzero c
    sparse: Vec<(usize, usize, usize, T)>,
    step: usize,
}

impl<T: Scalar> LieAlgebra<T> {
    /// Validates antisymmetry, the Jacobi identity and nilpotency.
    ///
    /// `structure` is the flattened cube, index `(i * n + j) * n + k`.
    pub fn new(dim: usize, structure: Vec<T>, labels: Vec<String>) -> Result<Self> {
        if dim > MAX_DIM {
            return Err(Error::TooLarge { dim, cap: MAX_DIM });
        }
        check_dim(dim * dim * dim, structure.len())?;
        let labels = if labels.is_empty() {
            (1..=dim).map(|i| format!("e{i}")).collect()
        } else {
            check_dim(dim, labels.len())?;
            labels
        };
        let scale = max_abs(&structure).max(T::one());
        let n = dim;
        let tol = T::lit(ANTISYMMETRY_TOL) * scale;
        for i in 0..n {
            for j in i..n {
                for k in 0..n {
                    let a = structure[(i * n + j) * n + k];
                    let b = structure[(j * n + i) * n + k];
                    if (a + b).abs() > tol {
                        return Err(Error::NotAntisymmetric {
                            i,
                            j,
                            k,
                            residual: (a + b).to_f64_lossy(),
                        });
                    }
                }
            }
        }
        let mut sparse = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                for k in 0..n {
                    let c = structure[(i * n + j) * n + k];
                    if c != T::zero() {
                        sparse.push((i, j, k, c));
                    }
                }
            }
        }
        let mut alg = LieAlgebra {
            dim,
            structure,
            labels,
            sparse,
            step: 0,
        };
        let jac = alg.jacobi_residual();
        if jac > T::lit(JACOBI_TOL) * scale * scale {
            return Err(Error::JacobiViolation {
                residual: jac.to_f64_lossy(),
            });
        }
        alg.step = alg.lower_central_step()?;
        Ok(alg)
    }

    /// Builds from `(i, j, [(k, value)])` triples; the `(j, i)` entries are
    /// filled by antisymmetry unless given explicitly.
    pub fn from_brackets(
        dim: usize,
        brackets: &[(usize, usize, Vec<(usize, T)>)],
        labels: Vec<String>,
    ) -> Result<Self> {
        if dim > MAX_DIM {
            return Err(Error::TooLarge { dim, cap: MAX_DIM });
        }
        let n = dim;
        let mut c = vec![T::zero(); n * n * n];
        let mut given = vec![false; n * n];
        for (i, j, terms) in brackets {
            let (i, j) = (*i, *j);
            if i >= n || j >= n {
                return Err(Error::InvalidInput(format!(
                    "bracket index ({i},{j}) out of range for dim {n}"
                )));
            }
            given[i * n + j] = true;
            for (k, v) in terms {
                if *k >= n {
                    return Err(Error::InvalidInput(format!(
                        "bracket target {k} out of range for dim {n}"
                    )));
                }
                c[(i * n + j) * n + k] = *v;
            }
        }
        for i in 0..n {
            for j in 0..n {
                if given[i * n + j] && !given[j * n + i] {
                    for k in 0..n {
                        c[(j * n + i) * n + k] = -c[(i * n + j) * n + k];
                    }
                }
            }
        }
        Self::new(n, c, labels)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Nilpotency step: length of the lower central series (abelian = 1,
    /// the zero algebra = 0).
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn is_abelian(&self) -> bool {
        self.sparse.is_empty()
    }

    #[inline]
    pub fn c(&self, i: usize, j: usize, k: usize) -> T {
        self.structure[(i * self.dim + j) * self.dim + k]
    }

    pub fn structure(&self) -> &[T] {
        &self.structure
    }

    /// `[X, Y]` by contraction with the structure constants.
    pub fn bracket(&self, x: &[T], y: &[T]) -> Result<Vec<T>> {
        check_dim(self.dim, x.len())?;
        check_dim(self.dim, y.len())?;
        Ok(self.bracket_unchecked(x, y))
    }

    pub(crate) fn bracket_unchecked(&self, x: &[T], y: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        for &(i, j, k, c) in &self.sparse {
            out[k] += (x[i] * y[j] - x[j] * y[i]) * c;
        }
        out
    }

    /// The same contraction over any coefficient ring that real scalars act
    /// on (complex numbers, polynomials).
    pub fn bracket_in<R>(&self, x: &[R], y: &[R]) -> Vec<R>
    where
        R: Clone + Add<Output = R> + Sub<Output = R> + Mul<T, Output = R> + Mul<Output = R>,
        R: num_traits::Zero,
    {
        let mut out = vec![R::zero(); self.dim];
        for &(i, j, k, c) in &self.sparse {
            let t = (x[i].clone() * y[j].clone() - x[j].clone() * y[i].clone()) * c;
            out[k] = out[k].clone() + t;
        }
        out
    }

    /// Max over basis triples and components of the cyclic Jacobi sum.
    pub fn jacobi_residual(&self) -> T {
        let n = self.dim;
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    for m in 0..n {
                        let mut s = T::zero();
                        for k in 0..n {
                            s += self.c(i, j, k) * self.c(k, l, m)
                                + self.c(j, l, k) * self.c(k, i, m)
                                + self.c(l, i, k) * self.c(k, j, m);
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    fn lower_central_step(&self) -> Result<usize> {
        let n = self.dim;
        if n == 0 {
            return Ok(0);
        }
        let scale = max_abs(&self.structure).max(T::one());
        let tol = T::lit(RANK_CUTOFF) * scale;
        let mut current: Vec<Vec<T>> = (0..n)
            .map(|i| {
                let mut e = vec![T::zero(); n];
                e[i] = T::one();
                e
            })
            .collect();
        let mut step = 1;
        loop {
            let mut cands = Vec::new();
            for i in 0..n {
                let mut e = vec![T::zero(); n];
                e[i] = T::one();
                for b in &current {
                    cands.push(self.bracket_unchecked(&e, b));
                }
            }
            let next = gram_schmidt(&cands, tol);
            if next.is_empty() {
                return Ok(step);
            }
            if next.len() == current.len() {
                return Err(Error::NotNilpotent {
                    stalled_dim: next.len(),
                });
            }
            current = next;
            step += 1;
        }
    }

    /// Serializable form with 0-based `[i, j, [[k, value], ...]]` entries.
    pub fn to_doc(&self) -> AlgebraDoc {
        let n = self.dim;
        let mut brackets = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let terms: Vec<(usize, f64)> = (0..n)
                    .filter(|&k| self.c(i, j, k) != T::zero())
                    .map(|k| (k, self.c(i, j, k).to_f64_lossy()))
                    .collect();
                if !terms.is_empty() {
                    brackets.push((i, j, terms));
                }
            }
        }
        AlgebraDoc {
            dim: n,
            brackets,
            labels: Some(self.labels.clone()),
        }
    }

    pub fn from_doc(doc: &AlgebraDoc) -> Result<Self> {
        let brackets: Vec<(usize, usize, Vec<(usize, T)>)> = doc
            .brackets
            .iter()
            .map(|(i, j, t)| (*i, *j, t.iter().map(|(k, v)| (*k, T::lit(*v))).collect()))
            .collect();
        Self::from_brackets(doc.dim, &brackets, doc.labels.clone().unwrap_or_default())
    }
}

/// JSON document `{"dim": n, "brackets": [[i, j, [[k, v], ...]], ...], "labels": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgebraDoc {
    pub dim: usize,
    #[serde(default)]
    pub brackets: Vec<(usize, usize, Vec<(usize, f64)>)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

/// Named algebras in a Malcev-compatible basis (center on trailing vectors):
/// `abelian(n)`, `heisenberg3`, `engel4`, `filiform(n)`.
pub fn catalog<T: Scalar>(name: &str) -> Result<LieAlgebra<T>> {
    let name = name.trim();
    let parse_arg = |prefix: &str| -> Option<usize> {
        name.strip_prefix(prefix)?
            .strip_prefix('(')?
            .strip_suffix(')')?
            .trim()
            .parse()
            .ok()
    };
    let one = T::one();
    if let Some(n) = parse_arg("abelian") {
        return LieAlgebra::from_brackets(n, &[], vec![]);
    }
    if let Some(n) = parse_arg("filiform") {
        if n < 3 {
            return Err(Error::UnknownName(format!(
                "{name} (filiform needs n >= 3)"
            )));
        }
        // [e1, e_i] = e_{i+1}, i = 2..n-1 (1-based)
        let br: Vec<_> = (1..n - 1).map(|i| (0, i, vec![(i + 1, one)])).collect();
        return LieAlgebra::from_brackets(n, &br, vec![]);
    }
    match name {
        "heisenberg3" => LieAlgebra::from_brackets(3, &[(0, 1, vec![(2, one)])], vec![]),
        "engel4" => {
            LieAlgebra::from_brackets(4, &[(0, 1, vec![(2, one)]), (0, 2, vec![(3, one)])], vec![])
        }
        _ => Err(Error::UnknownName(name.to_string())),
    }
}

/// `h = tau(k) (+) z` together with the quotient algebra `k = h/z`.
///
/// Coordinates: `X = tau(x) + iota(z)`, and dually `mu = (q, r)` with
/// `<X, mu> = <x, q> + <z, r>`, so `q` lives on `q = z^perp` and `r` on
/// `g/q`.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralSplit<T> {
    parent: LieAlgebra<T>,
    center_basis: Vec<Vec<T>>,
    complement_basis: Vec<Vec<T>>,
    quotient: LieAlgebra<T>,
    // inverse of the column matrix [complement | center]
    to_split: Vec<T>,
}

impl<T: Scalar> CentralSplit<T> {
    /// Center from the rank-thresholded null space of the stacked ad-maps;
    /// complement is its Euclidean orthogonal complement, both bases picked
    /// by Gram-Schmidt on projected coordinate vectors so aligned subspaces
    /// keep their coordinate axes.
    pub fn new(parent: &LieAlgebra<T>) -> Result<Self> {
        let center = center_basis(parent);
        if center.is_empty() {
            return Err(Error::TrivialCenter);
        }
        let n = parent.dim();
        let tol = T::lit(1e-8);
        let proj_out = |v: &[T]| -> Vec<T> {
            let mut w = v.to_vec();
            for c in &center {
                let d = crate::scalar::dot(&w, c);
                for (wi, ci) in w.iter_mut().zip(c) {
                    *wi -= d * *ci;
                }
            }
            w
        };
        let units: Vec<Vec<T>> = (0..n)
            .map(|i| {
                let mut e = vec![T::zero(); n];
                e[i] = T::one();
                e
            })
            .collect();
        let complement = gram_schmidt(&units.iter().map(|e| proj_out(e)).collect::<Vec<_>>(), tol);
        Self::with_complement(parent, center, complement)
    }

    /// Uses the given complement vectors for `tau`; they must span a
    /// complement of the center.
    pub fn with_complement(
        parent: &LieAlgebra<T>,
        center: Vec<Vec<T>>,
        complement: Vec<Vec<T>>,
    ) -> Result<Self> {
        let n = parent.dim();
        if center.is_empty() {
            return Err(Error::TrivialCenter);
        }
        check_dim(n, center.len() + complement.len())?;
        for v in center.iter().chain(&complement) {
            check_dim(n, v.len())?;
        }
        for z in &center {
            for i in 0..n {
                let mut e = vec![T::zero(); n];
                e[i] = T::one();
                let b = parent.bracket_unchecked(z, &e);
                if max_abs(&b) > T::lit(1e-10) * max_abs(parent.structure()).max(T::one()) {
                    return Err(Error::InvalidInput(
                        "supplied center vector is not central".into(),
                    ));
                }
            }
        }
        // columns: complement then center
        let mut m = vec![T::zero(); n * n];
        for (col, v) in complement.iter().chain(&center).enumerate() {
            for row in 0..n {
                m[row * n + col] = v[row];
            }
        }
        let to_split = invert(&m, n, T::lit(1e-12)).ok_or_else(|| {
            Error::InvalidInput("complement does not span a complement of the center".into())
        })?;
        let k = complement.len();
        let mut qc = vec![T::zero(); k * k * k];
        for a in 0..k {
            for b in 0..k {
                let br = parent.bracket_unchecked(&complement[a], &complement[b]);
                let rho = mat_vec(&to_split, n, n, &br);
                for d in 0..k {
                    qc[(a * k + b) * k + d] = rho[d];
                }
            }
        }
        // drop rounding noise so the quotient's sparsity is exact
        let scale = max_abs(&qc).max(T::one());
        for v in qc.iter_mut() {
            if v.abs() < T::lit(1e-14) * scale {
                *v = T::zero();
            }
        }
        let quotient = LieAlgebra::new(k, qc, vec![])?;
        Ok(CentralSplit {
            parent: parent.clone(),
            center_basis: center,
            complement_basis: complement,
            quotient,
            to_split,
        })
    }

    pub fn parent(&self) -> &LieAlgebra<T> {
        &self.parent
    }

    pub fn quotient(&self) -> &LieAlgebra<T> {
        &self.quotient
    }

    pub fn center_basis(&self) -> &[Vec<T>] {
        &self.center_basis
    }

    pub fn complement_basis(&self) -> &[Vec<T>] {
        &self.complement_basis
    }

    /// `dim k = dim h/z`.
    pub fn quotient_dim(&self) -> usize {
        self.complement_basis.len()
    }

    /// `dim z = dim g/q`.
    pub fn center_dim(&self) -> usize {
        self.center_basis.len()
    }

    pub fn dim(&self) -> usize {
        self.parent.dim()
    }

    /// `tau: k -> h`.
    pub fn tau(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        for (xi, v) in x.iter().zip(&self.complement_basis) {
            for (o, vi) in out.iter_mut().zip(v) {
                *o += *xi * *vi;
            }
        }
        out
    }

    /// `iota: z -> h` in center coordinates.
    pub fn iota(&self, z: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        for (zi, v) in z.iter().zip(&self.center_basis) {
            for (o, vi) in out.iter_mut().zip(v) {
                *o += *zi * *vi;
            }
        }
        out
    }

    /// `(x, z)` with `X = tau(x) + iota(z)`.
    pub fn decompose(&self, big_x: &[T]) -> (Vec<T>, Vec<T>) {
        let n = self.dim();
        let c = mat_vec(&self.to_split, n, n, big_x);
        let k = self.quotient_dim();
        (c[..k].to_vec(), c[k..].to_vec())
    }

    /// `rho: h -> k`.
    pub fn rho(&self, big_x: &[T]) -> Vec<T> {
        self.decompose(big_x).0
    }

    /// `mu -> (q, r)` for `mu` in dual-basis coordinates of `g = h*`.
    pub fn split_dual(&self, mu: &[T]) -> (Vec<T>, Vec<T>) {
        let n = self.dim();
        let k = self.quotient_dim();
        let mut q = Vec::with_capacity(k);
        let mut r = Vec::with_capacity(n - k);
        for v in &self.complement_basis {
            q.push(crate::scalar::dot(v, mu));
        }
        for v in &self.center_basis {
            r.push(crate::scalar::dot(v, mu));
        }
        (q, r)
    }

    /// Inverse of [`split_dual`](Self::split_dual).
    pub fn join_dual(&self, q: &[T], r: &[T]) -> Vec<T> {
        let n = self.dim();
        let qr: Vec<T> = q.iter().chain(r).copied().collect();
        mat_t_vec(&self.to_split, n, n, &qr)
    }
}

/// Orthonormal basis of the center, ordered like the coordinate axes.
pub fn center_basis<T: Scalar>(alg: &LieAlgebra<T>) -> Vec<Vec<T>> {
    let n = alg.dim();
    if n == 0 {
        return vec![];
    }
    // row (j, k), column i: coefficient of e_k in [e_i, e_j]
    let mut a = vec![T::zero(); n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                a[(j * n + k) * n + i] = alg.c(i, j, k);
            }
        }
    }
    let (sv, v) = jacobi_svd(&a, n * n, n);
    let smax = sv.iter().fold(T::zero(), |m, s| m.max(*s));
    let cut = T::lit(RANK_CUTOFF) * smax;
    let null: Vec<Vec<T>> = (0..n)
        .filter(|&j| sv[j] <= cut)
        .map(|j| (0..n).map(|i| v[i * n + j]).collect())
        .collect();
    let projected: Vec<Vec<T>> = (0..n)
        .map(|i| {
            let mut w = vec![T::zero(); n];
            for nv in &null {
                for (wl, nl) in w.iter_mut().zip(nv) {
                    *wl += nv[i] * *nl;
                }
            }
            w
        })
        .collect();
    gram_schmidt(&projected, T::lit(1e-8))
}
