//! Gaussian atom sums with closed-form gradients and Fourier transforms,
//! tensor trapezoid grids, and grid norms.
//!
//! An atom is `A exp(-pi sum((u - c)/w)^2) e[xi . (u - c)]` with
//! `e(t) = exp(2 pi i t)`. Coordinates are split as `(x; r)` on the
//! `k`-side, `(q; r)` on the dual side and `(x; z)` on `h`; the first `k`
//! coordinates are the ones a partial transform acts on.

use crate::error::{check_dim, Error, Result};
use crate::lie::CentralSplit;
use crate::scalar::{e_bar, e_phase, Scalar};
use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Minimum fraction of every atom's mass a grid box must contain.
pub const MASS_COVERAGE: f64 = 1.0 - 1e-10;
/// Minimum points per grid dimension.
pub const MIN_POINTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `k x g/q`, the convolution side.
    Xr,
    /// `q x g/q`, i.e. functions on `g`.
    Qr,
    /// `h` in split coordinates.
    Xz,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Xr => "xr",
            Side::Qr => "qr",
            Side::Xz => "xz",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianAtom<T> {
    pub amp: Complex<T>,
    pub center: Vec<T>,
    pub width: Vec<T>,
    pub modulation: Vec<T>,
}

impl<T: Scalar> GaussianAtom<T> {
    pub fn new(amp: Complex<T>, center: Vec<T>, width: Vec<T>, modulation: Vec<T>) -> Result<Self> {
        let n = center.len();
        check_dim(n, width.len())?;
        check_dim(n, modulation.len())?;
        if let Some(w) = width.iter().find(|w| !(**w > T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "atom width must be positive, got {w}"
            )));
        }
        let finite = center.iter().chain(&modulation).all(|v| v.is_finite())
            && amp.re.is_finite()
            && amp.im.is_finite();
        if !finite {
            return Err(Error::InvalidInput("atom parameters must be finite".into()));
        }
        Ok(GaussianAtom {
            amp,
            center,
            width,
            modulation,
        })
    }

    /// Unmodulated atom of unit amplitude.
    pub fn plain(center: Vec<T>, width: Vec<T>) -> Self {
        let n = center.len();
        GaussianAtom {
            amp: Complex::new(T::one(), T::zero()),
            center,
            width,
            modulation: vec![T::zero(); n],
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `sum((u - c)/w)^2`; the magnitude is `|A| exp(-pi * this)`.
    #[inline]
    pub fn spread(&self, u: &[T]) -> T {
        let mut s = T::zero();
        for d in 0..self.center.len() {
            let t = (u[d] - self.center[d]) / self.width[d];
            s += t * t;
        }
        s
    }

    /// Per-coordinate factor without the amplitude.
    #[inline]
    pub fn factor(&self, d: usize, v: T) -> Complex<T> {
        let t = v - self.center[d];
        let g = (-T::PI() * (t / self.width[d]) * (t / self.width[d])).exp();
        if self.modulation[d] == T::zero() {
            Complex::new(g, T::zero())
        } else {
            e_phase(self.modulation[d] * t) * g
        }
    }

    pub fn eval(&self, u: &[T]) -> Complex<T> {
        let mut ph = T::zero();
        for d in 0..self.center.len() {
            ph += self.modulation[d] * (u[d] - self.center[d]);
        }
        e_phase(ph) * (self.amp * (-T::PI() * self.spread(u)).exp())
    }

    /// Value and gradient at `u`.
    pub fn eval_grad(&self, u: &[T]) -> (Complex<T>, Vec<Complex<T>>) {
        let v = self.eval(u);
        let two_pi = T::two_pi();
        let g = (0..self.dim())
            .map(|d| {
                let t = u[d] - self.center[d];
                let w2 = self.width[d] * self.width[d];
                v * Complex::new(-two_pi * t / w2, two_pi * self.modulation[d])
            })
            .collect();
        (v, g)
    }

    /// Transform in the coordinates where `mask` is set; `inverse` selects
    /// the `e` kernel, otherwise `e-bar`.
    pub fn transform(&self, mask: &[bool], inverse: bool) -> Self {
        let mut a = self.clone();
        for d in 0..self.dim() {
            if !mask[d] {
                continue;
            }
            let (c, w, xi) = (self.center[d], self.width[d], self.modulation[d]);
            a.amp = a.amp * e_bar(c * xi) * w;
            a.center[d] = if inverse { -xi } else { xi };
            a.modulation[d] = if inverse { c } else { -c };
            a.width[d] = T::one() / w;
        }
        a
    }

    /// Pointwise product, again a single atom.
    pub fn product(&self, other: &Self) -> Self {
        let n = self.dim();
        let mut amp = self.amp * other.amp;
        let mut center = Vec::with_capacity(n);
        let mut width = Vec::with_capacity(n);
        let mut modulation = Vec::with_capacity(n);
        let mut ph = T::zero();
        let mut decay = T::zero();
        for d in 0..n {
            let (c1, w1, x1) = (self.center[d], self.width[d], self.modulation[d]);
            let (c2, w2, x2) = (other.center[d], other.width[d], other.modulation[d]);
            let (p1, p2) = (T::one() / (w1 * w1), T::one() / (w2 * w2));
            let p = p1 + p2;
            let c = (c1 * p1 + c2 * p2) / p;
            decay += (c1 - c2) * (c1 - c2) / (w1 * w1 + w2 * w2);
            ph += x1 * (c - c1) + x2 * (c - c2);
            center.push(c);
            width.push(T::one() / p.sqrt());
            modulation.push(x1 + x2);
        }
        amp = amp * e_phase(ph) * (-T::PI() * decay).exp();
        GaussianAtom {
            amp,
            center,
            width,
            modulation,
        }
    }

    pub fn conj(&self) -> Self {
        GaussianAtom {
            amp: self.amp.conj(),
            center: self.center.clone(),
            width: self.width.clone(),
            modulation: self.modulation.iter().map(|v| -*v).collect(),
        }
    }

    /// `u -> f(u - shift)`.
    pub fn translated(&self, shift: &[T]) -> Self {
        let mut a = self.clone();
        for (c, s) in a.center.iter_mut().zip(shift) {
            *c += *s;
        }
        a
    }

    /// `u -> f(-u)`.
    pub fn reflected(&self) -> Self {
        GaussianAtom {
            amp: self.amp,
            center: self.center.iter().map(|v| -*v).collect(),
            width: self.width.clone(),
            modulation: self.modulation.iter().map(|v| -*v).collect(),
        }
    }

    /// Exact integral of `|f|`.
    pub fn l1_norm(&self) -> T {
        self.width.iter().fold(self.amp.norm(), |p, w| p * *w)
    }

    /// Fraction of `|f|`'s mass in `[lo, hi]` along coordinate `d`.
    pub fn mass_fraction(&self, d: usize, lo: T, hi: T) -> f64 {
        let s = std::f64::consts::PI.sqrt() / self.width[d].to_f64_lossy();
        let c = self.center[d].to_f64_lossy();
        let upper = 0.5 * statrs::function::erf::erfc(s * (hi.to_f64_lossy() - c));
        let lower = 0.5 * statrs::function::erf::erfc(s * (c - lo.to_f64_lossy()));
        1.0 - upper - lower
    }
}

/// A finite atom sum on one side.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction<T> {
    side: Side,
    k: usize,
    m: usize,
    atoms: Vec<GaussianAtom<T>>,
}

impl<T: Scalar> TestFunction<T> {
    /// `k` transformable coordinates followed by `m` central ones.
    pub fn new(side: Side, k: usize, m: usize, atoms: Vec<GaussianAtom<T>>) -> Result<Self> {
        for a in &atoms {
            check_dim(k + m, a.dim())?;
        }
        Ok(TestFunction { side, k, m, atoms })
    }

    pub fn zero(side: Side, k: usize, m: usize) -> Self {
        TestFunction {
            side,
            k,
            m,
            atoms: vec![],
        }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.k + self.m
    }

    pub fn atoms(&self) -> &[GaussianAtom<T>] {
        &self.atoms
    }

    pub fn is_zero(&self) -> bool {
        self.atoms
            .iter()
            .all(|a| a.amp == Complex::new(T::zero(), T::zero()))
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.side != other.side {
            return Err(Error::WrongSide {
                expected: self.side.name(),
                got: other.side.name(),
            });
        }
        check_dim(self.k, other.k)?;
        check_dim(self.m, other.m)
    }

    pub fn expect_side(&self, side: Side) -> Result<()> {
        if self.side != side {
            return Err(Error::WrongSide {
                expected: side.name(),
                got: self.side.name(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        Ok(TestFunction {
            atoms,
            ..self.clone()
        })
    }

    pub fn scaled(&self, c: Complex<T>) -> Self {
        let atoms = self
            .atoms
            .iter()
            .map(|a| GaussianAtom {
                amp: a.amp * c,
                ..a.clone()
            })
            .collect();
        TestFunction {
            atoms,
            ..self.clone()
        }
    }

    /// Pointwise product; atom count multiplies.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let mut atoms = Vec::with_capacity(self.atoms.len() * other.atoms.len());
        for a in &self.atoms {
            for b in &other.atoms {
                atoms.push(a.product(b));
            }
        }
        Ok(TestFunction {
            atoms,
            ..self.clone()
        })
    }

    pub fn conj(&self) -> Self {
        TestFunction {
            atoms: self.atoms.iter().map(|a| a.conj()).collect(),
            ..self.clone()
        }
    }

    pub fn translated(&self, shift: &[T]) -> Result<Self> {
        check_dim(self.dim(), shift.len())?;
        Ok(TestFunction {
            atoms: self.atoms.iter().map(|a| a.translated(shift)).collect(),
            ..self.clone()
        })
    }

    /// `u -> f(-u)` in every coordinate.
    pub fn reflected(&self) -> Self {
        TestFunction {
            atoms: self.atoms.iter().map(|a| a.reflected()).collect(),
            ..self.clone()
        }
    }

    pub fn eval(&self, u: &[T]) -> Result<Complex<T>> {
        check_dim(self.dim(), u.len())?;
        Ok(self.eval_unchecked(u))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, u: &[T]) -> Complex<T> {
        self.atoms
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |s, a| s + a.eval(u))
    }

    /// Analytic gradient in this function's own coordinates.
    pub fn gradient(&self, u: &[T]) -> Result<Vec<Complex<T>>> {
        check_dim(self.dim(), u.len())?;
        Ok(self.value_and_gradient(u).1)
    }

    pub(crate) fn value_and_gradient(&self, u: &[T]) -> (Complex<T>, Vec<Complex<T>>) {
        let mut g = vec![Complex::new(T::zero(), T::zero()); self.dim()];
        let mut v = Complex::new(T::zero(), T::zero());
        for a in &self.atoms {
            let (av, ag) = a.eval_grad(u);
            v += av;
            for (gi, ai) in g.iter_mut().zip(ag) {
                *gi += ai;
            }
        }
        (v, g)
    }

    /// `d phi(mu)` realized in `h` (basis coordinates) for a function on
    /// `g`, with `mu` in dual-basis coordinates.
    pub fn gradient_in_h(&self, split: &CentralSplit<T>, mu: &[T]) -> Result<Vec<Complex<T>>> {
        self.expect_side(Side::Qr)?;
        check_dim(split.quotient_dim(), self.k)?;
        check_dim(split.center_dim(), self.m)?;
        check_dim(split.dim(), mu.len())?;
        let (q, r) = split.split_dual(mu);
        let u: Vec<T> = q.into_iter().chain(r).collect();
        let g = self.value_and_gradient(&u).1;
        let mut out = vec![Complex::new(T::zero(), T::zero()); split.dim()];
        let basis = split.complement_basis().iter().chain(split.center_basis());
        for (gi, v) in g.iter().zip(basis) {
            for (o, vi) in out.iter_mut().zip(v) {
                *o += *gi * *vi;
            }
        }
        Ok(out)
    }

    fn transformed(&self, mask: &[bool], inverse: bool, side: Side) -> Self {
        TestFunction {
            side,
            k: self.k,
            m: self.m,
            atoms: self
                .atoms
                .iter()
                .map(|a| a.transform(mask, inverse))
                .collect(),
        }
    }

    fn first_k_mask(&self) -> Vec<bool> {
        (0..self.dim()).map(|d| d < self.k).collect()
    }

    /// `f^(q; r) = int f(x; r) e-bar[x . q] dx`.
    pub fn partial_fourier(&self) -> Result<Self> {
        self.expect_side(Side::Xr)?;
        Ok(self.transformed(&self.first_k_mask(), false, Side::Qr))
    }

    /// `phi^v(x; r) = int phi(q; r) e[x . q] dq`.
    pub fn partial_inverse(&self) -> Result<Self> {
        self.expect_side(Side::Qr)?;
        Ok(self.transformed(&self.first_k_mask(), true, Side::Xr))
    }

    /// `F(x, z) = int phi(q, r) e[x . q + z . r] dq dr`.
    pub fn full_fourier_inverse(&self) -> Result<Self> {
        self.expect_side(Side::Qr)?;
        Ok(self.transformed(&vec![true; self.dim()], true, Side::Xz))
    }

    /// Inverse of [`full_fourier_inverse`](Self::full_fourier_inverse).
    pub fn full_fourier(&self) -> Result<Self> {
        self.expect_side(Side::Xz)?;
        Ok(self.transformed(&vec![true; self.dim()], false, Side::Qr))
    }

    /// Transform in an arbitrary coordinate subset; the side tag is kept.
    pub fn transform_coords(&self, mask: &[bool], inverse: bool) -> Result<Self> {
        check_dim(self.dim(), mask.len())?;
        Ok(self.transformed(mask, inverse, self.side))
    }

    /// Exact `L1` bound `sum |A| prod w` (equality for a single atom).
    pub fn l1_bound(&self) -> T {
        self.atoms.iter().map(|a| a.l1_norm()).sum()
    }

    pub fn to_docs(&self) -> Vec<AtomDoc> {
        self.atoms
            .iter()
            .map(|a| AtomDoc {
                amp: [a.amp.re.to_f64_lossy(), a.amp.im.to_f64_lossy()],
                center: a.center.iter().map(|v| v.to_f64_lossy()).collect(),
                width: a.width.iter().map(|v| v.to_f64_lossy()).collect(),
                modulation: a.modulation.iter().map(|v| v.to_f64_lossy()).collect(),
                side: self.side,
            })
            .collect()
    }

    pub fn from_docs(k: usize, m: usize, docs: &[AtomDoc]) -> Result<Self> {
        let side = docs.first().map(|d| d.side).unwrap_or(Side::Qr);
        let mut atoms = Vec::with_capacity(docs.len());
        for d in docs {
            if d.side != side {
                return Err(Error::WrongSide {
                    expected: side.name(),
                    got: d.side.name(),
                });
            }
            let v = |xs: &[f64]| xs.iter().map(|x| T::lit(*x)).collect::<Vec<T>>();
            atoms.push(GaussianAtom::new(
                Complex::new(T::lit(d.amp[0]), T::lit(d.amp[1])),
                v(&d.center),
                v(&d.width),
                v(&d.modulation),
            )?);
        }
        Self::new(side, k, m, atoms)
    }
}

/// `{amp: [re, im], center, width, mod, side}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomDoc {
    pub amp: [f64; 2],
    pub center: Vec<f64>,
    pub width: Vec<f64>,
    #[serde(rename = "mod")]
    pub modulation: Vec<f64>,
    pub side: Side,
}

/// Uniform tensor grid with the trapezoid rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec<T> {
    pub center: Vec<T>,
    pub half_width: Vec<T>,
    pub points: Vec<usize>,
}

impl<T: Scalar> QuadratureSpec<T> {
    pub fn new(center: Vec<T>, half_width: Vec<T>, points: Vec<usize>) -> Result<Self> {
        check_dim(center.len(), half_width.len())?;
        check_dim(center.len(), points.len())?;
        if let Some(n) = points.iter().find(|n| **n < MIN_POINTS) {
            return Err(Error::GridTooSmall(format!(
                "{n} points per dimension, need at least {MIN_POINTS}"
            )));
        }
        if half_width.iter().any(|l| !(*l > T::zero())) {
            return Err(Error::InvalidInput(
                "grid half-widths must be positive".into(),
            ));
        }
        Ok(QuadratureSpec {
            center,
            half_width,
            points,
        })
    }

    /// Grid centered at the origin.
    pub fn symmetric(half_width: Vec<T>, points: Vec<usize>) -> Result<Self> {
        Self::new(vec![T::zero(); half_width.len()], half_width, points)
    }

    pub fn dims(&self) -> usize {
        self.points.len()
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step(&self, d: usize) -> T {
        T::lit(2.0) * self.half_width[d] / T::lit((self.points[d] - 1) as f64)
    }

    pub fn nodes(&self, d: usize) -> Vec<T> {
        let (lo, h) = (self.center[d] - self.half_width[d], self.step(d));
        (0..self.points[d])
            .map(|i| lo + h * T::lit(i as f64))
            .collect()
    }

    /// Trapezoid weights including the spacing.
    pub fn weights(&self, d: usize) -> Vec<T> {
        let h = self.step(d);
        let n = self.points[d];
        (0..n)
            .map(|i| {
                if i == 0 || i + 1 == n {
                    h / T::lit(2.0)
                } else {
                    h
                }
            })
            .collect()
    }

    /// Same box, `factor` times the points per dimension.
    pub fn refined(&self, factor: usize) -> Self {
        QuadratureSpec {
            points: self.points.iter().map(|n| n * factor).collect(),
            ..self.clone()
        }
    }

    /// Row-major (last dimension fastest) multi-index of a flat index.
    pub fn unflatten(&self, mut idx: usize, out: &mut [usize]) {
        for d in (0..self.dims()).rev() {
            out[d] = idx % self.points[d];
            idx /= self.points[d];
        }
    }

    pub fn point(&self, idx: usize) -> Vec<T> {
        let mut mi = vec![0; self.dims()];
        self.unflatten(idx, &mut mi);
        (0..self.dims())
            .map(|d| self.center[d] - self.half_width[d] + self.step(d) * T::lit(mi[d] as f64))
            .collect()
    }

    pub fn weight(&self, idx: usize) -> T {
        let mut mi = vec![0; self.dims()];
        self.unflatten(idx, &mut mi);
        (0..self.dims()).fold(T::one(), |p, d| {
            let n = self.points[d];
            let h = self.step(d);
            p * if mi[d] == 0 || mi[d] + 1 == n {
                h / T::lit(2.0)
            } else {
                h
            }
        })
    }

    /// Tensor product grid `self x other`.
    pub fn concat(&self, other: &Self) -> Self {
        QuadratureSpec {
            center: self.center.iter().chain(&other.center).copied().collect(),
            half_width: self
                .half_width
                .iter()
                .chain(&other.half_width)
                .copied()
                .collect(),
            points: self.points.iter().chain(&other.points).copied().collect(),
        }
    }

    /// The sub-grid over the listed dimensions.
    pub fn select(&self, dims: &[usize]) -> Self {
        QuadratureSpec {
            center: dims.iter().map(|d| self.center[*d]).collect(),
            half_width: dims.iter().map(|d| self.half_width[*d]).collect(),
            points: dims.iter().map(|d| self.points[*d]).collect(),
        }
    }

    /// All nodes, flattened row-major.
    pub fn points_flat(&self) -> Vec<Vec<T>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// All product weights, flattened row-major.
    pub fn weights_flat(&self) -> Vec<T> {
        let ws: Vec<Vec<T>> = (0..self.dims()).map(|d| self.weights(d)).collect();
        let mut mi = vec![0; self.dims()];
        (0..self.len())
            .map(|i| {
                self.unflatten(i, &mut mi);
                mi.iter()
                    .enumerate()
                    .fold(T::one(), |p, (d, j)| p * ws[d][*j])
            })
            .collect()
    }

    /// True when every dimension is centered at the origin.
    pub fn is_symmetric(&self) -> bool {
        self.center.iter().all(|c| *c == T::zero())
    }

    /// Mass rule: every atom keeps at least [`MASS_COVERAGE`] of its mass
    /// inside the box (coordinates `offset..offset + dims`).
    pub fn check_coverage(&self, f: &TestFunction<T>, offset: usize) -> Result<()> {
        let coords: Vec<usize> = (offset..offset + self.dims()).collect();
        self.check_coverage_at(f, &coords)
    }

    /// Mass rule with grid dimension `d` matched to atom coordinate
    /// `coords[d]`.
    pub fn check_coverage_at(&self, f: &TestFunction<T>, coords: &[usize]) -> Result<()> {
        check_dim(self.dims(), coords.len())?;
        for (ai, a) in f.atoms().iter().enumerate() {
            let mut frac = 1.0;
            for (d, c) in coords.iter().enumerate() {
                let lo = self.center[d] - self.half_width[d];
                let hi = self.center[d] + self.half_width[d];
                frac *= a.mass_fraction(*c, lo, hi);
            }
            if frac < MASS_COVERAGE {
                return Err(Error::GridTooSmall(format!(
                    "atom {ai} keeps only {frac:.3e} of its mass inside the grid box"
                )));
            }
        }
        Ok(())
    }
}

/// Complex samples on a [`QuadratureSpec`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T> {
    pub spec: QuadratureSpec<T>,
    pub values: Vec<Complex<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    Sup,
    L1,
}

impl<T: Scalar> GridFunction<T> {
    pub fn from_fn(spec: QuadratureSpec<T>, f: impl Fn(&[T]) -> Complex<T> + Sync) -> Self {
        let values = (0..spec.len())
            .into_par_iter()
            .map(|i| f(&spec.point(i)))
            .collect();
        GridFunction { spec, values }
    }

    /// Samples `f` after checking the mass rule.
    pub fn sample(spec: QuadratureSpec<T>, f: &TestFunction<T>) -> Result<Self> {
        check_dim(f.dim(), spec.dims())?;
        spec.check_coverage(f, 0)?;
        Ok(Self::from_fn(spec, |u| f.eval_unchecked(u)))
    }

    pub fn zeros(spec: QuadratureSpec<T>) -> Self {
        let n = spec.len();
        GridFunction {
            spec,
            values: vec![Complex::new(T::zero(), T::zero()); n],
        }
    }

    pub fn norm(&self, kind: NormKind) -> T {
        match kind {
            NormKind::Sup => self.values.iter().fold(T::zero(), |m, v| m.max(v.norm())),
            NormKind::L1 => {
                let ws: Vec<Vec<T>> = (0..self.spec.dims())
                    .map(|d| self.spec.weights(d))
                    .collect();
                let mut mi = vec![0; self.spec.dims()];
                let mut s = T::zero();
                for (i, v) in self.values.iter().enumerate() {
                    self.spec.unflatten(i, &mut mi);
                    let w = mi
                        .iter()
                        .enumerate()
                        .fold(T::one(), |p, (d, j)| p * ws[d][*j]);
                    s += v.norm() * w;
                }
                s
            }
        }
    }

    pub fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>,
    ) -> Result<Self> {
        if self.spec != other.spec {
            return Err(Error::InvalidInput(
                "grid functions live on different grids".into(),
            ));
        }
        Ok(GridFunction {
            spec: self.spec.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn map(&self, f: impl Fn(Complex<T>) -> Complex<T>) -> Self {
        GridFunction {
            spec: self.spec.clone(),
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    /// `sup |self - other|`.
    pub fn sup_diff(&self, other: &Self) -> Result<T> {
        Ok(self.sub(other)?.norm(NormKind::Sup))
    }

    /// CSV with one row per node: coordinates, then `re`, `im`.
    pub fn to_csv(&self, labels: &[&str]) -> String {
        let mut out = String::new();
        for l in labels {
            out.push_str(l);
            out.push(',');
        }
        out.push_str("re,im\n");
        for (i, v) in self.values.iter().enumerate() {
            for c in self.spec.point(i) {
                out.push_str(&format!("{},", c.to_f64_lossy()));
            }
            out.push_str(&format!(
                "{},{}\n",
                v.re.to_f64_lossy(),
                v.im.to_f64_lossy()
            ));
        }
        out
    }
}

/// Grid norm of an atom sum, after checking the mass rule.
pub fn norm<T: Scalar>(f: &TestFunction<T>, spec: &QuadratureSpec<T>, kind: NormKind) -> Result<T> {
    Ok(GridFunction::sample(spec.clone(), f)?.norm(kind))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn atom() -> GaussianAtom<f64> {
        GaussianAtom::new(
            c(0.7, -0.2),
            vec![0.3, -1.1],
            vec![0.8, 1.3],
            vec![0.5, -0.25],
        )
        .unwrap()
    }

    #[test]
    fn one_dim_transform_table() {
        // width a Gaussian at the origin goes to amplitude a, width 1/a
        let g = GaussianAtom::plain(vec![0.0], vec![2.0]);
        let t = g.transform(&[true], false);
        assert!((t.amp - c(2.0, 0.0)).norm() < 1e-15);
        assert_eq!(t.width, vec![0.5]);
    }

    #[test]
    fn transform_matches_quadrature() {
        let a = GaussianAtom::new(c(1.0, 0.5), vec![0.4], vec![0.9], vec![0.7]).unwrap();
        let t = a.transform(&[true], false);
        let spec = QuadratureSpec::symmetric(vec![6.0], vec![400]).unwrap();
        for q in [-0.5, 0.2, 1.3] {
            let num: Complex<f64> = (0..spec.len())
                .map(|i| {
                    let x = spec.point(i)[0];
                    a.eval(&[x]) * e_bar(x * q) * spec.weight(i)
                })
                .sum();
            assert!((num - t.eval(&[q])).norm() < 1e-12, "q={q}");
        }
    }

    #[test]
    fn round_trips() {
        let f = TestFunction::new(Side::Xr, 1, 1, vec![atom()]).unwrap();
        let back = f.partial_fourier().unwrap().partial_inverse().unwrap();
        let u = [0.2, -0.4];
        assert!((back.eval(&u).unwrap() - f.eval(&u).unwrap()).norm() < 1e-14);
        let g = TestFunction::new(Side::Qr, 1, 1, vec![atom()]).unwrap();
        let back = g.full_fourier_inverse().unwrap().full_fourier().unwrap();
        assert!((back.eval(&u).unwrap() - g.eval(&u).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn wrong_side_rejected() {
        let g = TestFunction::new(Side::Qr, 1, 1, vec![atom()]).unwrap();
        assert!(matches!(g.partial_fourier(), Err(Error::WrongSide { .. })));
    }

    #[test]
    fn product_is_pointwise() {
        let a = atom();
        let b = GaussianAtom::new(
            c(-0.3, 1.0),
            vec![-0.5, 0.2],
            vec![1.1, 0.6],
            vec![-1.0, 0.3],
        )
        .unwrap();
        let p = a.product(&b);
        for u in [[0.0, 0.0], [0.7, -0.3], [-1.2, 0.9]] {
            assert!((p.eval(&u) - a.eval(&u) * b.eval(&u)).norm() < 1e-15);
        }
    }

    #[test]
    fn gradient_matches_differences() {
        let a = atom();
        let u = [0.1, -0.6];
        let (_, g) = a.eval_grad(&u);
        let h = 1e-6;
        for d in 0..2 {
            let mut up = u;
            let mut dn = u;
            up[d] += h;
            dn[d] -= h;
            let fd = (a.eval(&up) - a.eval(&dn)) / (2.0 * h);
            assert!((fd - g[d]).norm() < 1e-8);
        }
    }

    #[test]
    fn unit_gaussian_l1() {
        let f = TestFunction::new(
            Side::Qr,
            1,
            0,
            vec![GaussianAtom::plain(vec![0.2], vec![1.0])],
        )
        .unwrap();
        let spec = QuadratureSpec::symmetric(vec![4.0], vec![64]).unwrap();
        let l1: f64 = norm(&f, &spec, NormKind::L1).unwrap();
        assert!((l1 - 1.0).abs() < 1e-8);
        let small = QuadratureSpec::symmetric(vec![1.0], vec![64]).unwrap();
        assert!(matches!(
            norm(&f, &small, NormKind::L1),
            Err(Error::GridTooSmall(_))
        ));
    }

    #[test]
    fn grid_needs_sixteen_points() {
        assert!(matches!(
            QuadratureSpec::<f64>::symmetric(vec![1.0], vec![8]),
            Err(Error::GridTooSmall(_))
        ));
    }

    #[test]
    fn atom_json() {
        let f = TestFunction::new(Side::Xr, 1, 1, vec![atom()]).unwrap();
        let text = serde_json::to_string(&f.to_docs()).unwrap();
        assert!(text.contains("\"mod\":[0.5,-0.25]") && text.contains("\"side\":\"xr\""));
        let docs: Vec<AtomDoc> = serde_json::from_str(&text).unwrap();
        assert_eq!(TestFunction::from_docs(1, 1, &docs).unwrap(), f);
    }
}
