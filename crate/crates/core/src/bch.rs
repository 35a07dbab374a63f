//! Truncated Baker-Campbell-Hausdorff series for nilpotent algebras, with
//! the central-extension part collected as a bivector over `k`.
//!
//! `S_h(X, Y) = S(hX, hY) / h` is summed in Dynkin's right-nested form; a
//! word of length `d` carries the factor `h^(d-1)`. On `k (+) V` with `V`
//! central only the outermost bracket of a word has a `V`-part,
//! `w(a_1, B)` with `B` the `k`-part of the inner bracket, so the whole
//! `V`-part is `sum_ij M_ij w(e_i, e_j)` for a bivector `M`.

use crate::cocycle::Cocycle;
use crate::error::{check_dim, Error, Result};
use crate::lie::{CentralSplit, LieAlgebra};
use crate::poly::{CompiledPoly, Poly, PowerTable};
use crate::scalar::{e_bar, Scalar};
use num_complex::Complex;
use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::Serialize;
use std::collections::HashMap;
use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

/// Longest bracket word the engine will expand.
pub const MAX_DEPTH: usize = 8;

/// Coefficient ring for the expansion: plain scalars or polynomials.
pub trait Coeff<T>:
    Clone + Zero + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Mul<T, Output = Self>
{
}

impl<T, R> Coeff<T> for R where
    R: Clone + Zero + Add<Output = R> + Sub<Output = R> + Mul<Output = R> + Mul<T, Output = R>
{
}

/// A word over `{X, Y}` packed as `(length, bits)` with bit `i` set when
/// letter `i` is `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    pub len: u8,
    pub bits: u16,
}

impl Word {
    pub fn letter(&self, i: usize) -> bool {
        self.bits >> i & 1 == 1
    }

    fn prepend(&self, y: bool) -> Word {
        Word {
            len: self.len + 1,
            bits: (self.bits << 1) | y as u16,
        }
    }

    pub fn render(&self) -> String {
        (0..self.len as usize)
            .map(|i| if self.letter(i) { 'Y' } else { 'X' })
            .collect()
    }
}

fn factorial(n: usize) -> i128 {
    (1..=n as i128).product()
}

/// Dynkin coefficient of the right-nested bracket of `word`:
/// sum over splittings into blocks `X^a Y^b` (a + b > 0) of
/// `(-1)^(n-1) / (n * d * prod a! b!)`.
pub fn dynkin_coefficient(word: Word) -> Ratio<i128> {
    let d = word.len as usize;
    // by_blocks[pos][n]: weight of splitting the first pos letters into n blocks
    let mut by_blocks = vec![vec![Ratio::<i128>::zero(); d + 1]; d + 1];
    by_blocks[0][0] = Ratio::one();
    for start in 0..d {
        for n in 0..d {
            let w = by_blocks[start][n];
            if w.is_zero() {
                continue;
            }
            let (mut a, mut b) = (0usize, 0usize);
            for end in start..d {
                if word.letter(end) {
                    b += 1;
                } else if b == 0 {
                    a += 1;
                } else {
                    break;
                }
                let add = w / Ratio::from_integer(factorial(a) * factorial(b));
                by_blocks[end + 1][n + 1] += add;
            }
        }
    }
    let mut total = Ratio::zero();
    for n in 1..=d {
        let sign = if n % 2 == 1 { 1 } else { -1 };
        total += by_blocks[d][n] * Ratio::new(sign, (n * d) as i128);
    }
    total
}

/// All nonzero coefficients up to [`MAX_DEPTH`], skipping words whose
/// nested bracket vanishes identically (last two letters equal).
pub fn dynkin_table() -> &'static [(Word, Ratio<i128>)] {
    static TABLE: OnceLock<Vec<(Word, Ratio<i128>)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut out = Vec::new();
        for len in 1..=MAX_DEPTH as u8 {
            for bits in 0u16..(1 << len) {
                let w = Word { len, bits };
                if len >= 2 && w.letter(len as usize - 1) == w.letter(len as usize - 2) {
                    continue;
                }
                let c = dynkin_coefficient(w);
                if !c.is_zero() {
                    out.push((w, c));
                }
            }
        }
        out
    })
}

fn coeff_map<T: Scalar>(hbar: T, depth: usize) -> HashMap<Word, T> {
    dynkin_table()
        .iter()
        .filter(|(w, _)| (w.len as usize) <= depth)
        .map(|(w, c)| {
            let v = T::lit(*c.numer() as f64) / T::lit(*c.denom() as f64);
            (*w, v * hbar.powi(w.len as i32 - 1))
        })
        .collect()
}

fn depth_for(step: usize, track: bool) -> Result<usize> {
    let depth = step + track as usize;
    if depth > MAX_DEPTH {
        return Err(Error::StepTooLarge {
            step,
            max_depth: MAX_DEPTH,
        });
    }
    Ok(depth)
}

/// `(S, M)`: the `k`-part and, if `track`, the row-major `k x k` bivector.
fn expand<T: Scalar, R: Coeff<T>>(
    alg: &LieAlgebra<T>,
    hbar: T,
    x: &[R],
    y: &[R],
    track: bool,
) -> Result<(Vec<R>, Vec<R>)> {
    let k = alg.dim();
    let sum: Vec<R> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a.clone() + b.clone())
        .collect();
    let mut m = if track {
        vec![R::zero(); k * k]
    } else {
        vec![]
    };
    if hbar == T::zero() {
        return Ok((sum, m));
    }
    let depth = depth_for(alg.step(), track)?;
    let coeffs = coeff_map(hbar, depth);
    let mut s = sum;
    // explicit stack: (suffix word, k-part of its nested bracket)
    let mut stack: Vec<(Word, Vec<R>)> = vec![
        (Word { len: 1, bits: 0 }, x.to_vec()),
        (Word { len: 1, bits: 1 }, y.to_vec()),
    ];
    while let Some((suffix, b)) = stack.pop() {
        if suffix.len as usize >= depth {
            continue;
        }
        for letter in [false, true] {
            let word = suffix.prepend(letter);
            let a = if letter { y } else { x };
            let c = coeffs.get(&word).copied();
            let nb = alg.bracket_in(a, &b);
            let nonzero = nb.iter().any(|v| !v.is_zero());
            if let Some(c) = c {
                for (si, v) in s.iter_mut().zip(&nb) {
                    *si = si.clone() + v.clone() * c;
                }
                if track {
                    for i in 0..k {
                        if a[i].is_zero() {
                            continue;
                        }
                        for j in 0..k {
                            if b[j].is_zero() {
                                continue;
                            }
                            let t = a[i].clone() * b[j].clone() * c;
                            m[i * k + j] = m[i * k + j].clone() + t;
                        }
                    }
                }
            }
            if nonzero {
                stack.push((word, nb));
            }
        }
    }
    Ok((s, m))
}

/// Group law of the simply connected group of `alg` in exponential
/// coordinates, `S_h(X, Y)`; `S_0(X, Y) = X + Y`.
pub fn bch_full<T: Scalar>(alg: &LieAlgebra<T>, hbar: T, x: &[T], y: &[T]) -> Result<Vec<T>> {
    check_dim(alg.dim(), x.len())?;
    check_dim(alg.dim(), y.len())?;
    Ok(expand(alg, hbar, x, y, false)?.0)
}

/// `x *_h y` on the quotient `k`.
pub fn group_mul<T: Scalar>(split: &CentralSplit<T>, hbar: T, x: &[T], y: &[T]) -> Result<Vec<T>> {
    bch_full(split.quotient(), hbar, x, y)
}

/// Inverse in exponential coordinates.
pub fn group_inv<T: Scalar>(x: &[T]) -> Vec<T> {
    x.iter().map(|v| -*v).collect()
}

/// `R_h(x, y; r) = sum_{i<j} coeffs_ij w(e_i, e_j; r)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BivectorCocycle<T> {
    pub dim: usize,
    /// Full antisymmetric matrix, row-major.
    pub coeffs: Vec<T>,
}

impl<T: Scalar> BivectorCocycle<T> {
    pub fn coeff(&self, i: usize, j: usize) -> T {
        self.coeffs[i * self.dim + j]
    }

    pub fn upper(&self) -> Vec<T> {
        let k = self.dim;
        let mut out = Vec::with_capacity(k * k.saturating_sub(1) / 2);
        for i in 0..k {
            for j in (i + 1)..k {
                out.push(self.coeffs[i * k + j]);
            }
        }
        out
    }

    /// Contracts with `w(., .; r)`.
    pub fn eval(&self, omega: &Cocycle<T>, r: &[T]) -> Result<T> {
        check_dim(omega.dim(), self.dim)?;
        check_dim(omega.split().center_dim(), r.len())?;
        let w = omega.eval_upper(r);
        Ok(self.upper().iter().zip(&w).map(|(a, b)| *a * *b).sum())
    }
}

/// The group cocycle `R_h(x, y; .)` as a bivector.
pub fn r_cocycle<T: Scalar>(
    omega: &Cocycle<T>,
    hbar: T,
    x: &[T],
    y: &[T],
) -> Result<BivectorCocycle<T>> {
    let k = omega.dim();
    check_dim(k, x.len())?;
    check_dim(k, y.len())?;
    let (_, m) = expand(omega.split().quotient(), hbar, x, y, true)?;
    let mut coeffs = vec![T::zero(); k * k];
    for i in 0..k {
        for j in 0..k {
            coeffs[i * k + j] = m[i * k + j] - m[j * k + i];
        }
    }
    Ok(BivectorCocycle { dim: k, coeffs })
}

/// `sigma_h^r(x, y) = e-bar[R_h(x, y; r)]`, unit modulus by construction.
pub fn sigma<T: Scalar>(
    omega: &Cocycle<T>,
    hbar: T,
    x: &[T],
    y: &[T],
    r: &[T],
) -> Result<Complex<T>> {
    let phase = r_cocycle(omega, hbar, x, y)?.eval(omega, r)?;
    Ok(e_bar(phase))
}

/// `S_h` and the upper-triangle bivector `P_ij(x, y)` of `R_h` compiled to
/// polynomials in `(x_1..x_k, y_1..y_k)` for one fixed `h`.
#[derive(Debug, Clone)]
pub struct CompiledGroupLaw<T> {
    k: usize,
    hbar: T,
    product: Vec<CompiledPoly<T>>,
    bivector: Vec<CompiledPoly<T>>,
    max_power: usize,
}

impl<T: Scalar> CompiledGroupLaw<T> {
    pub fn new(quotient: &LieAlgebra<T>, hbar: T) -> Result<Self> {
        let k = quotient.dim();
        let xs: Vec<Poly<T>> = (0..k).map(Poly::var).collect();
        let ys: Vec<Poly<T>> = (0..k).map(|i| Poly::var(k + i)).collect();
        let (s, m) = expand(quotient, hbar, &xs, &ys, true)?;
        let rel = T::lit(1e-15);
        let product: Vec<CompiledPoly<T>> =
            s.iter().map(|p| p.clone().pruned(rel).compile()).collect();
        let mut bivector = Vec::new();
        for i in 0..k {
            for j in (i + 1)..k {
                let p = m[i * k + j].clone() - m[j * k + i].clone();
                bivector.push(p.pruned(rel).compile());
            }
        }
        let max_power = product
            .iter()
            .chain(&bivector)
            .map(|p| p.max_power())
            .max()
            .unwrap_or(1)
            .max(1);
        Ok(CompiledGroupLaw {
            k,
            hbar,
            product,
            bivector,
            max_power,
        })
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn hbar(&self) -> T {
        self.hbar
    }

    /// Number of upper-triangle bivector slots, `k (k - 1) / 2`.
    pub fn pairs(&self) -> usize {
        self.bivector.len()
    }

    pub fn table(&self) -> PowerTable<T> {
        PowerTable::new(2 * self.k, self.max_power)
    }

    /// Loads `(x, y)` into `table` for the evaluators below.
    #[inline]
    pub fn load(&self, table: &mut PowerTable<T>, x: &[T], y: &[T]) {
        let mut both = [T::zero(); 2 * crate::lie::MAX_DIM];
        both[..self.k].copy_from_slice(x);
        both[self.k..2 * self.k].copy_from_slice(y);
        table.fill(&both[..2 * self.k]);
    }

    #[inline]
    pub fn product_into(&self, table: &PowerTable<T>, out: &mut [T]) {
        for (o, p) in out.iter_mut().zip(&self.product) {
            *o = p.eval(table);
        }
    }

    #[inline]
    pub fn bivector_into(&self, table: &PowerTable<T>, out: &mut [T]) {
        for (o, p) in out.iter_mut().zip(&self.bivector) {
            *o = p.eval(table);
        }
    }

    /// `x *_h y`.
    pub fn mul(&self, x: &[T], y: &[T]) -> Vec<T> {
        let mut t = self.table();
        self.load(&mut t, x, y);
        let mut out = vec![T::zero(); self.k];
        self.product_into(&t, &mut out);
        out
    }

    /// Upper-triangle bivector of `R_h(x, y)`.
    pub fn bivector(&self, x: &[T], y: &[T]) -> Vec<T> {
        let mut t = self.table();
        self.load(&mut t, x, y);
        let mut out = vec![T::zero(); self.pairs()];
        self.bivector_into(&t, &mut out);
        out
    }

    /// `R_h(x, y; r)` given the cocycle's upper-triangle values at `r`.
    pub fn phase(&self, x: &[T], y: &[T], w_upper: &[T]) -> T {
        self.bivector(x, y)
            .iter()
            .zip(w_upper)
            .map(|(a, b)| *a * *b)
            .sum()
    }
}
