//! Lie algebra 2-cocycles on `k = h/z` with values in functions of `r`.

use crate::error::{check_dim, Error, Result};
use crate::expr::ScalarFieldExpr;
use crate::lie::CentralSplit;
use crate::scalar::Scalar;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Number of random `r` samples used to certify pointwise identities.
pub const CERTIFY_SAMPLES: usize = 20;
const CERTIFY_SEED: u64 = 0x0c0c_7c1e;
const CERTIFY_RADIUS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CocycleKind {
    Omega0,
    Perturbation,
    Sum,
}

/// Skew matrix of scalar fields, entry `(i, j)` = `w(e_i, e_j; .)`.
#[derive(Debug, Clone)]
pub struct Cocycle<T> {
    split: Arc<CentralSplit<T>>,
    // upper triangle i < j, row-major
    entries: Vec<ScalarFieldExpr<T>>,
    kind: CocycleKind,
    identity_residual: T,
}

#[inline]
fn tri(k: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < k);
    i * k - i * (i + 1) / 2 + (j - i - 1)
}

fn sample_r<T: Scalar>(m: usize, count: usize, seed: u64) -> Vec<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (0..m)
                .map(|_| T::lit(rng.gen_range(-CERTIFY_RADIUS..CERTIFY_RADIUS)))
                .collect()
        })
        .collect()
}

fn rel_tol<T: Scalar>(base: f64, scale: T) -> T {
    T::lit(base).max(T::epsilon() * T::lit(1e3)) * scale.max(T::one())
}

impl<T: Scalar> Cocycle<T> {
    /// The extension cocycle of the section `tau`:
    /// `w0(x, y) = iota^-1([tau x, tau y] - tau [x, y]_k)`, linear in `r`.
    pub fn omega0(split: &Arc<CentralSplit<T>>) -> Self {
        let k = split.quotient_dim();
        let mut entries = Vec::with_capacity(k * k.saturating_sub(1) / 2);
        let unit = |i: usize| {
            let mut e = vec![T::zero(); k];
            e[i] = T::one();
            e
        };
        for i in 0..k {
            for j in (i + 1)..k {
                let (ei, ej) = (unit(i), unit(j));
                let big = split
                    .parent()
                    .bracket_unchecked(&split.tau(&ei), &split.tau(&ej));
                let (_, z) = split.decompose(&big);
                let e = if z.iter().all(|v| *v == T::zero()) {
                    ScalarFieldExpr::zero()
                } else {
                    ScalarFieldExpr::lin(z)
                };
                entries.push(e);
            }
        }
        let mut c = Cocycle {
            split: split.clone(),
            entries,
            kind: CocycleKind::Omega0,
            identity_residual: T::zero(),
        };
        c.identity_residual = c.identity_residual_sampled(CERTIFY_SAMPLES, CERTIFY_SEED);
        c
    }

    /// The zero cocycle, tagged as a perturbation.
    pub fn zero(split: &Arc<CentralSplit<T>>) -> Self {
        let k = split.quotient_dim();
        Cocycle {
            split: split.clone(),
            entries: vec![ScalarFieldExpr::zero(); k * k.saturating_sub(1) / 2],
            kind: CocycleKind::Perturbation,
            identity_residual: T::zero(),
        }
    }

    /// A user perturbation from `(i, j, expr)` entries. Entries given in
    /// both orders must agree up to sign; the cocycle identity is checked on
    /// basis triples at sampled `r`.
    pub fn perturbation(
        split: &Arc<CentralSplit<T>>,
        given: Vec<(usize, usize, ScalarFieldExpr<T>)>,
    ) -> Result<Self> {
        let k = split.quotient_dim();
        let m = split.center_dim();
        let samples = sample_r::<T>(m, CERTIFY_SAMPLES, CERTIFY_SEED);
        let mut slots: Vec<Option<ScalarFieldExpr<T>>> = vec![None; k * k];
        for (i, j, e) in given {
            if i >= k || j >= k {
                return Err(Error::InvalidInput(format!(
                    "cocycle entry ({i},{j}) out of range for dim {k}"
                )));
            }
            e.check_arity(m)?;
            let slot = &mut slots[i * k + j];
            *slot = Some(match slot.take() {
                Some(prev) => prev.plus(&e),
                None => e,
            });
        }
        let mut entries = Vec::with_capacity(k * k.saturating_sub(1) / 2);
        for i in 0..k {
            if let Some(d) = &slots[i * k + i] {
                let res = samples
                    .iter()
                    .fold(T::zero(), |w, r| w.max(d.eval(r).abs()));
                if res > rel_tol(1e-12, T::one()) {
                    return Err(Error::NotSkew {
                        i,
                        j: i,
                        residual: res.to_f64_lossy(),
                    });
                }
            }
            for j in (i + 1)..k {
                let e = match (&slots[i * k + j], &slots[j * k + i]) {
                    (Some(a), Some(b)) => {
                        let mut res = T::zero();
                        let mut scale = T::zero();
                        for r in &samples {
                            let (va, vb) = (a.eval(r), b.eval(r));
                            res = res.max((va + vb).abs());
                            scale = scale.max(va.abs());
                        }
                        if res > rel_tol(1e-12, scale) {
                            return Err(Error::NotSkew {
                                i,
                                j,
                                residual: res.to_f64_lossy(),
                            });
                        }
                        a.clone()
                    }
                    (Some(a), None) => a.clone(),
                    (None, Some(b)) => b.neg(),
                    (None, None) => ScalarFieldExpr::zero(),
                };
                entries.push(e);
            }
        }
        let mut c = Cocycle {
            split: split.clone(),
            entries,
            kind: CocycleKind::Perturbation,
            identity_residual: T::zero(),
        };
        c.certify()?;
        Ok(c)
    }

    /// `w0 + W`, entrywise.
    pub fn total(omega0: &Self, perturbation: &Self) -> Result<Self> {
        if !(Arc::ptr_eq(&omega0.split, &perturbation.split) || omega0.split == perturbation.split)
        {
            return Err(Error::SplitMismatch);
        }
        let entries = omega0
            .entries
            .iter()
            .zip(&perturbation.entries)
            .map(|(a, b)| a.plus(b))
            .collect();
        let mut c = Cocycle {
            split: omega0.split.clone(),
            entries,
            kind: CocycleKind::Sum,
            identity_residual: T::zero(),
        };
        c.certify()?;
        Ok(c)
    }

    /// `c * w` with the same kind and split.
    pub fn scaled(&self, c: T) -> Self {
        Cocycle {
            split: self.split.clone(),
            entries: self.entries.iter().map(|e| e.scaled(c)).collect(),
            kind: self.kind,
            identity_residual: self.identity_residual * c.abs(),
        }
    }

    fn certify(&mut self) -> Result<()> {
        let res = self.identity_residual_sampled(CERTIFY_SAMPLES, CERTIFY_SEED);
        let scale = self.sample_scale(CERTIFY_SAMPLES, CERTIFY_SEED);
        if res > rel_tol(1e-10, scale) {
            return Err(Error::CocycleIdentityViolation {
                residual: res.to_f64_lossy(),
            });
        }
        self.identity_residual = res;
        Ok(())
    }

    fn sample_scale(&self, count: usize, seed: u64) -> T {
        let samples = sample_r::<T>(self.split.center_dim(), count, seed);
        let mut s = T::zero();
        for r in &samples {
            for e in &self.entries {
                s = s.max(e.eval(r).abs());
            }
        }
        s
    }

    /// Max over basis triples and sampled `r` of
    /// `|w(x,[y,z]) + w(y,[z,x]) + w(z,[x,y])|`.
    pub fn identity_residual_sampled(&self, count: usize, seed: u64) -> T {
        let k = self.dim();
        let quot = self.split.quotient();
        let unit = |i: usize| {
            let mut e = vec![T::zero(); k];
            e[i] = T::one();
            e
        };
        let samples = sample_r::<T>(self.split.center_dim(), count, seed);
        let mut worst = T::zero();
        for r in &samples {
            let w = self.eval_matrix(r);
            let form = |x: &[T], y: &[T]| -> T {
                let mut s = T::zero();
                for i in 0..k {
                    for j in 0..k {
                        s += x[i] * w[i * k + j] * y[j];
                    }
                }
                s
            };
            for a in 0..k {
                for b in (a + 1)..k {
                    for c in (b + 1)..k {
                        let (x, y, z) = (unit(a), unit(b), unit(c));
                        let v = form(&x, &quot.bracket_unchecked(&y, &z))
                            + form(&y, &quot.bracket_unchecked(&z, &x))
                            + form(&z, &quot.bracket_unchecked(&x, &y));
                        worst = worst.max(v.abs());
                    }
                }
            }
        }
        worst
    }

    /// Residual recorded when the cocycle was certified.
    pub fn certified_residual(&self) -> T {
        self.identity_residual
    }

    pub fn kind(&self) -> CocycleKind {
        self.kind
    }

    pub fn split(&self) -> &Arc<CentralSplit<T>> {
        &self.split
    }

    /// `dim k`.
    pub fn dim(&self) -> usize {
        self.split.quotient_dim()
    }

    /// Entry `w(e_i, e_j; .)` for any `i, j`.
    pub fn entry(&self, i: usize, j: usize) -> ScalarFieldExpr<T> {
        let k = self.dim();
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.entries[tri(k, i, j)].clone(),
            std::cmp::Ordering::Greater => self.entries[tri(k, j, i)].neg(),
            std::cmp::Ordering::Equal => ScalarFieldExpr::zero(),
        }
    }

    /// Upper-triangle entries in row-major order.
    pub fn upper_entries(&self) -> &[ScalarFieldExpr<T>] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.is_zero())
    }

    /// True unless some entry contains an `exp` of an unbounded argument.
    pub fn is_bounded(&self) -> bool {
        self.entries.iter().all(|e| e.is_bounded())
    }

    /// Sum over `i < j` of `|entry_ij|` bounded on the box `|r| <= half`.
    pub fn bound(&self, half: &[T]) -> T {
        self.entries.iter().map(|e| e.bound(half)).sum()
    }

    /// Upper-triangle values at `r`.
    pub fn eval_upper(&self, r: &[T]) -> Vec<T> {
        self.entries.iter().map(|e| e.eval(r)).collect()
    }

    /// Full skew `k x k` matrix at `r`.
    pub fn eval_matrix(&self, r: &[T]) -> Vec<T> {
        let k = self.dim();
        let mut w = vec![T::zero(); k * k];
        let mut t = 0;
        for i in 0..k {
            for j in (i + 1)..k {
                let v = self.entries[t].eval(r);
                w[i * k + j] = v;
                w[j * k + i] = -v;
                t += 1;
            }
        }
        w
    }

    /// `w(x, y; r) = sum_{i<j} (x_i y_j - x_j y_i) w_ij(r)`.
    pub fn eval(&self, x: &[T], y: &[T], r: &[T]) -> Result<T> {
        let k = self.dim();
        check_dim(k, x.len())?;
        check_dim(k, y.len())?;
        check_dim(self.split.center_dim(), r.len())?;
        Ok(contract(k, &self.eval_upper(r), x, y))
    }

    /// Complex-bilinear extension of [`eval`](Self::eval).
    pub fn eval_complex(&self, x: &[Complex<T>], y: &[Complex<T>], r: &[T]) -> Result<Complex<T>> {
        let k = self.dim();
        check_dim(k, x.len())?;
        check_dim(k, y.len())?;
        check_dim(self.split.center_dim(), r.len())?;
        let w = self.eval_upper(r);
        let mut s = Complex::new(T::zero(), T::zero());
        let mut t = 0;
        for i in 0..k {
            for j in (i + 1)..k {
                s += (x[i] * y[j] - x[j] * y[i]) * w[t];
                t += 1;
            }
        }
        Ok(s)
    }

    pub fn to_doc(&self) -> CocycleDoc {
        let k = self.dim();
        let mut entries = Vec::new();
        let mut t = 0;
        for i in 0..k {
            for j in (i + 1)..k {
                if !self.entries[t].is_zero() {
                    entries.push((i, j, self.entries[t].to_json()));
                }
                t += 1;
            }
        }
        CocycleDoc {
            kind: self.kind,
            entries,
        }
    }

    /// A perturbation from its document. `omega0` documents rebuild the
    /// canonical cocycle and ignore `entries`.
    pub fn from_doc(split: &Arc<CentralSplit<T>>, doc: &CocycleDoc) -> Result<Self> {
        let given = doc
            .entries
            .iter()
            .map(|(i, j, v)| Ok((*i, *j, ScalarFieldExpr::from_json(v)?)))
            .collect::<Result<Vec<_>>>()?;
        match doc.kind {
            CocycleKind::Omega0 => Ok(Self::omega0(split)),
            CocycleKind::Perturbation => Self::perturbation(split, given),
            CocycleKind::Sum => {
                let mut c = Self::perturbation(split, given)?;
                c.kind = CocycleKind::Sum;
                Ok(c)
            }
        }
    }
}

/// `sum_{i<j} (x_i y_j - x_j y_i) w[t(i,j)]` over upper-triangle values.
#[inline]
pub(crate) fn contract<T: Scalar>(k: usize, upper: &[T], x: &[T], y: &[T]) -> T {
    let mut s = T::zero();
    let mut t = 0;
    for i in 0..k {
        for j in (i + 1)..k {
            s += (x[i] * y[j] - x[j] * y[i]) * upper[t];
            t += 1;
        }
    }
    s
}

/// `{"kind": ..., "entries": [[i, j, expr], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocycleDoc {
    pub kind: CocycleKind,
    #[serde(default)]
    pub entries: Vec<(usize, usize, serde_json::Value)>,
}
