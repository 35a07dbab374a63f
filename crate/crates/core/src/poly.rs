//! Sparse multivariate polynomials, used to compile BCH expansions once per
//! deformation parameter instead of re-expanding at every quadrature node.

use crate::scalar::Scalar;
use num_traits::Zero;
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

/// Exponent vectors are stored with trailing zeros trimmed, so the variable
/// count never has to be known up front.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly<T> {
    terms: BTreeMap<Vec<u8>, T>,
}

fn trim(mut e: Vec<u8>) -> Vec<u8> {
    while e.last() == Some(&0) {
        e.pop();
    }
    e
}

impl<T: Scalar> Poly<T> {
    pub fn constant(c: T) -> Self {
        let mut terms = BTreeMap::new();
        if c != T::zero() {
            terms.insert(Vec::new(), c);
        }
        Poly { terms }
    }

    /// The variable `v_i`.
    pub fn var(i: usize) -> Self {
        let mut e = vec![0u8; i + 1];
        e[i] = 1;
        let mut terms = BTreeMap::new();
        terms.insert(e, T::one());
        Poly { terms }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms
            .keys()
            .map(|e| e.iter().map(|p| *p as usize).sum())
            .max()
            .unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u8], T)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), *c))
    }

    fn accumulate(&mut self, e: Vec<u8>, c: T) {
        match self.terms.entry(e) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == T::zero() {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                if c != T::zero() {
                    v.insert(c);
                }
            }
        }
    }

    pub fn eval(&self, vars: &[T]) -> T {
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .enumerate()
                    .fold(*c, |p, (i, k)| p * vars[i].powi(*k as i32))
            })
            .sum()
    }

    /// Drops terms below `rel * max|coeff|` (float cancellation debris).
    pub fn pruned(mut self, rel: T) -> Self {
        let big = self.terms.values().fold(T::zero(), |m, c| m.max(c.abs()));
        self.terms.retain(|_, c| c.abs() > rel * big);
        self
    }

    pub fn compile(&self) -> CompiledPoly<T> {
        let terms = self
            .terms
            .iter()
            .map(|(e, c)| {
                let f = e
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p > 0)
                    .map(|(i, p)| (i as u16, *p))
                    .collect();
                (*c, f)
            })
            .collect();
        CompiledPoly { terms }
    }
}

impl<T: Scalar> Zero for Poly<T> {
    fn zero() -> Self {
        Poly {
            terms: BTreeMap::new(),
        }
    }

    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

impl<T: Scalar> Add for Poly<T> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for (e, c) in rhs.terms {
            self.accumulate(e, c);
        }
        self
    }
}

impl<T: Scalar> Sub for Poly<T> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for (e, c) in rhs.terms {
            self.accumulate(e, -c);
        }
        self
    }
}

impl<T: Scalar> Neg for Poly<T> {
    type Output = Self;
    fn neg(mut self) -> Self {
        for c in self.terms.values_mut() {
            *c = -*c;
        }
        self
    }
}

impl<T: Scalar> Mul<T> for Poly<T> {
    type Output = Self;
    fn mul(mut self, rhs: T) -> Self {
        if rhs == T::zero() {
            return Self::zero();
        }
        for c in self.terms.values_mut() {
            *c *= rhs;
        }
        self
    }
}

impl<T: Scalar> Mul for Poly<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zero();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let n = ea.len().max(eb.len());
                let e: Vec<u8> = (0..n)
                    .map(|i| ea.get(i).copied().unwrap_or(0) + eb.get(i).copied().unwrap_or(0))
                    .collect();
                out.accumulate(trim(e), *ca * *cb);
            }
        }
        out
    }
}

/// Flattened polynomial for fast repeated evaluation against a
/// [`PowerTable`].
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledPoly<T> {
    terms: Vec<(T, Vec<(u16, u8)>)>,
}

impl<T: Scalar> CompiledPoly<T> {
    #[inline]
    pub fn eval(&self, table: &PowerTable<T>) -> T {
        let mut s = T::zero();
        for (c, f) in &self.terms {
            let mut p = *c;
            for &(v, k) in f {
                p *= table.get(v as usize, k as usize);
            }
            s += p;
        }
        s
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_power(&self) -> usize {
        self.terms
            .iter()
            .flat_map(|(_, f)| f.iter().map(|(_, k)| *k as usize))
            .max()
            .unwrap_or(0)
    }
}

/// `v_i^p` for all variables and `p <= max_power`, row-major.
#[derive(Debug, Clone)]
pub struct PowerTable<T> {
    stride: usize,
    data: Vec<T>,
}

impl<T: Scalar> PowerTable<T> {
    pub fn new(nvars: usize, max_power: usize) -> Self {
        let stride = max_power + 1;
        PowerTable {
            stride,
            data: vec![T::one(); nvars * stride],
        }
    }

    /// Refills the table from `vars`.
    #[inline]
    pub fn fill(&mut self, vars: &[T]) {
        for (i, v) in vars.iter().enumerate() {
            let row = &mut self.data[i * self.stride..(i + 1) * self.stride];
            let mut p = T::one();
            for slot in row.iter_mut() {
                *slot = p;
                p *= *v;
            }
        }
    }

    #[inline]
    pub fn get(&self, var: usize, power: usize) -> T {
        self.data[var * self.stride + power]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_eval() {
        let x = Poly::<f64>::var(0);
        let y = Poly::<f64>::var(1);
        let p = (x.clone() + y.clone()) * (x.clone() - y.clone());
        assert_eq!(p.len(), 2);
        assert_eq!(p.degree(), 2);
        assert_eq!(p.eval(&[3.0, 2.0]), 5.0);
        let c = p.compile();
        let mut t = PowerTable::new(2, c.max_power());
        t.fill(&[3.0, 2.0]);
        assert_eq!(c.eval(&t), 5.0);
    }

    #[test]
    fn cancellation_leaves_zero() {
        let x = Poly::<f64>::var(2);
        assert!((x.clone() - x).is_zero());
        assert!((Poly::<f64>::var(0) * 0.0).is_zero());
    }
}
