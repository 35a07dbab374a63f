//! Twisted group convolution and the deformed product `x_h` it induces on
//! `(q, r)`-side test functions.
//!
//! Two evaluation routes share one plan. The direct route integrates the
//! full `k`-dimensional convolution variable by the trapezoid rule. The
//! central route applies when some trailing coordinates `C` of the quotient
//! are central, pairwise cocycle-isotropic and contain every bracket: then
//! the group law is additive on the remaining coordinates `N`, the phase is
//! affine in `x_C` and `u_C`, and those two integrals are done in closed form
//! by transforming the operands only along `N`.

use crate::bch::CompiledGroupLaw;
use crate::cocycle::Cocycle;
use crate::error::{check_dim, Error, Result};
use crate::lie::CentralSplit;
use crate::scalar::{e_bar, e_phase, Scalar};
use crate::schwartz::{GridFunction, QuadratureSpec, Side, TestFunction};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Integrand terms below this fraction of the peak product are skipped.
const PRUNE: f64 = 1e-18;
/// Tolerated `||sigma| - 1|`.
const UNIT_TOL: f64 = 1e-12;

/// Automatic grid rules. All integration grids are symmetric about 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRules {
    /// Box half-width in atom widths beyond the farthest center.
    pub coverage: f64,
    /// Spectral head-room per unit inverse width of the narrowest atom.
    pub spectral_margin: f64,
    /// Band of the convolution output in units of the output `q` extent.
    pub y_band: f64,
    /// Spacing must resolve `nyquist` samples per phase period.
    pub nyquist: f64,
    /// Output spacing is at most `width / output_per_width`.
    pub output_per_width: f64,
    /// Multiplies the integration point counts.
    pub resolution: f64,
    pub min_points: usize,
    /// Random probes used to estimate phase frequencies and the image box.
    pub probes: usize,
}

impl Default for GridRules {
    fn default() -> Self {
        GridRules {
            coverage: 2.9,
            spectral_margin: 4.0,
            y_band: 1.75,
            nyquist: 4.0,
            output_per_width: 2.0,
            resolution: 1.0,
            min_points: crate::schwartz::MIN_POINTS,
            probes: 512,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProductRoute {
    Direct,
    Central,
}

/// Grids of a product evaluation: `x` is the convolution variable, `y` the
/// convolution output, `q` and `r` the output of the deformed product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanGrids<T> {
    pub x: QuadratureSpec<T>,
    pub y: QuadratureSpec<T>,
    pub q: QuadratureSpec<T>,
    pub r: QuadratureSpec<T>,
}

#[derive(Debug, Clone)]
pub struct DeformedProductPlan<T> {
    cocycle: Cocycle<T>,
    hbar: T,
    law: Arc<CompiledGroupLaw<T>>,
    grids: PlanGrids<T>,
    central: Vec<usize>,
    route: ProductRoute,
}

/// Largest trailing block of quotient coordinates that are central, pairwise
/// isotropic for `omega`, and contain every bracket. Empty if none.
pub fn central_block<T: Scalar>(omega: &Cocycle<T>) -> Vec<usize> {
    let q = omega.split().quotient();
    let k = q.dim();
    let is_central = |c: usize| (0..k).all(|j| (0..k).all(|l| q.c(c, j, l) == T::zero()));
    let mut block: Vec<usize> = Vec::new();
    for c in (0..k).rev() {
        if !is_central(c) || !block.iter().all(|b| omega.entry(c, *b).is_zero()) {
            break;
        }
        block.insert(0, c);
    }
    // brackets must land inside the block
    while let Some(&first) = block.first() {
        let ok = (0..k).all(|i| (0..k).all(|j| (0..first).all(|l| q.c(i, j, l) == T::zero())));
        if ok {
            break;
        }
        block.remove(0);
    }
    block
}

fn zero_c<T: Scalar>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// `[atom][point]` table of per-atom factors over `coords`.
fn factor_table<T: Scalar>(
    f: &TestFunction<T>,
    coords: &[usize],
    pts: &[Vec<T>],
    with_amp: bool,
) -> Vec<Vec<Complex<T>>> {
    f.atoms()
        .iter()
        .map(|a| {
            pts.iter()
                .map(|p| {
                    let init = if with_amp {
                        a.amp
                    } else {
                        Complex::new(T::one(), T::zero())
                    };
                    coords
                        .iter()
                        .zip(p)
                        .fold(init, |acc, (c, v)| acc * a.factor(*c, *v))
                })
                .collect()
        })
        .collect()
}

fn row_max<T: Scalar>(t: &[Vec<Complex<T>>]) -> Vec<T> {
    t.iter()
        .map(|row| row.iter().fold(T::zero(), |m, v| m.max(v.norm())))
        .collect()
}

/// Contracts axis `axis` of a row-major array with `kernel` (`n_out x n_in`).
fn apply_axis<T: Scalar>(
    vals: &[Complex<T>],
    shape: &mut [usize],
    axis: usize,
    kernel: &[Complex<T>],
    n_out: usize,
) -> Vec<Complex<T>> {
    let n_in = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut out = vec![zero_c(); outer * n_out * inner];
    out.par_chunks_mut((n_out * inner).max(1))
        .enumerate()
        .for_each(|(o, chunk)| {
            for j in 0..n_out {
                let dst = &mut chunk[j * inner..(j + 1) * inner];
                for l in 0..n_in {
                    let kv = kernel[j * n_in + l];
                    let src = &vals[(o * n_in + l) * inner..(o * n_in + l + 1) * inner];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += kv * *s;
                    }
                }
            }
        });
    shape[axis] = n_out;
    out
}

/// Kernel `w_y e-bar[y q]` from `y` nodes to `q` nodes.
fn fourier_kernel<T: Scalar>(
    y: &QuadratureSpec<T>,
    yd: usize,
    q: &QuadratureSpec<T>,
    qd: usize,
) -> Vec<Complex<T>> {
    let (ys, ws, qs) = (y.nodes(yd), y.weights(yd), q.nodes(qd));
    let mut k = Vec::with_capacity(ys.len() * qs.len());
    for qv in &qs {
        for (yv, w) in ys.iter().zip(&ws) {
            k.push(e_bar(*yv * *qv) * *w);
        }
    }
    k
}

impl<T: Scalar> DeformedProductPlan<T> {
    /// Plan on explicit grids. Takes the central route when available.
    pub fn new(cocycle: &Cocycle<T>, hbar: T, grids: PlanGrids<T>) -> Result<Self> {
        let split = cocycle.split();
        let (k, m) = (split.quotient_dim(), split.center_dim());
        check_dim(k, grids.x.dims())?;
        check_dim(k, grids.y.dims())?;
        check_dim(k, grids.q.dims())?;
        check_dim(m, grids.r.dims())?;
        if !(hbar >= T::zero()) || !hbar.is_finite() {
            return Err(Error::InvalidInput(format!(
                "hbar must be finite and >= 0, got {hbar}"
            )));
        }
        let law = Arc::new(CompiledGroupLaw::new(split.quotient(), hbar)?);
        let central = central_block(cocycle);
        let route = if central.is_empty() {
            ProductRoute::Direct
        } else {
            ProductRoute::Central
        };
        Ok(DeformedProductPlan {
            cocycle: cocycle.clone(),
            hbar,
            law,
            grids,
            central,
            route,
        })
    }

    /// Plan with grids chosen by `rules` to cover every operand.
    pub fn auto(
        cocycle: &Cocycle<T>,
        hbar: T,
        operands: &[&TestFunction<T>],
        rules: &GridRules,
    ) -> Result<Self> {
        let split = cocycle.split();
        let (k, m) = (split.quotient_dim(), split.center_dim());
        if operands.is_empty() {
            return Err(Error::InvalidInput(
                "automatic grids need at least one operand".into(),
            ));
        }
        let z = T::lit(rules.coverage);
        let mut atoms = Vec::new();
        for f in operands {
            f.expect_side(Side::Qr)?;
            check_dim(k, f.k())?;
            check_dim(m, f.m())?;
            atoms.extend(f.atoms());
        }
        if atoms.is_empty() {
            return Err(Error::InvalidInput(
                "automatic grids need a nonzero operand".into(),
            ));
        }
        // convolution variable: the x-side atoms sit at -modulation with
        // inverse widths and carry the q-centers as modulations
        let mut lx = vec![T::zero(); k];
        let (mut wx_min, mut mod_x) = (T::infinity(), T::zero());
        for a in &atoms {
            for d in 0..k {
                lx[d] = lx[d].max(a.modulation[d].abs() + z / a.width[d]);
                wx_min = wx_min.min(T::one() / a.width[d]);
                mod_x = mod_x.max(a.center[d].abs());
            }
        }
        // outputs and the convolution image are bounded through atom pairs
        let (mut lq, mut lr, mut ly) = (vec![T::zero(); k], vec![T::zero(); m], vec![T::zero(); k]);
        let (mut wq_min, mut wr_min) = (T::infinity(), T::infinity());
        let mut qr_balls = Vec::new();
        for a in &atoms {
            for b in &atoms {
                let p = a.product(b);
                for d in 0..k {
                    lq[d] = lq[d].max(p.center[d].abs() + z * p.width[d]);
                    wq_min = wq_min.min(p.width[d]);
                    let spread = (T::one() / (a.width[d] * a.width[d])
                        + T::one() / (b.width[d] * b.width[d]))
                        .sqrt();
                    ly[d] = ly[d].max(a.modulation[d].abs() + b.modulation[d].abs() + z * spread);
                }
                for j in 0..m {
                    lr[j] = lr[j].max(p.center[k + j].abs() + z * p.width[k + j]);
                    wr_min = wr_min.min(p.width[k + j]);
                }
                qr_balls.push((p.center.clone(), p.width.iter().map(|w| z * *w).collect()));
            }
        }
        let x_balls = atoms
            .iter()
            .map(|a| {
                let c = (0..k).map(|d| -a.modulation[d]).collect();
                let r = (0..k).map(|d| z / a.width[d]).collect();
                (c, r)
            })
            .collect();
        let law = CompiledGroupLaw::new(split.quotient(), hbar)?;
        let (freq, bend) = probe_law(
            &law,
            cocycle,
            &Support { balls: x_balls },
            &Support { balls: qr_balls },
            rules,
        );
        for (l, b) in ly.iter_mut().zip(&bend) {
            *l += *b;
        }

        let count = |len: T, h: T, scale: f64| -> usize {
            let n = (T::lit(2.0) * len / h).to_f64_lossy().ceil() as usize + 1;
            ((n as f64 * scale).ceil() as usize).max(rules.min_points)
        };
        let nyq = T::lit(rules.nyquist) * freq;
        let inv_hx = (T::lit(2.0) * mod_x + T::lit(rules.spectral_margin) / wx_min + freq).max(nyq);
        let lq_max = lq.iter().fold(T::zero(), |a, b| a.max(*b));
        let inv_hy = (T::lit(rules.y_band) * lq_max + freq).max(nyq);
        let out = T::lit(rules.output_per_width);
        let x = QuadratureSpec::symmetric(
            lx.clone(),
            lx.iter()
                .map(|l| count(*l, T::one() / inv_hx, rules.resolution))
                .collect(),
        )?;
        let y = QuadratureSpec::symmetric(
            ly.clone(),
            ly.iter()
                .map(|l| count(*l, T::one() / inv_hy, rules.resolution))
                .collect(),
        )?;
        let q = QuadratureSpec::symmetric(
            lq.clone(),
            lq.iter().map(|l| count(*l, wq_min / out, 1.0)).collect(),
        )?;
        let r = QuadratureSpec::symmetric(
            lr.clone(),
            lr.iter().map(|l| count(*l, wr_min / out, 1.0)).collect(),
        )?;
        Self::new(cocycle, hbar, PlanGrids { x, y, q, r })
    }

    /// Forces a route; the central one must be available.
    pub fn with_route(mut self, route: ProductRoute) -> Result<Self> {
        if route == ProductRoute::Central && self.central.is_empty() {
            return Err(Error::InvalidInput(
                "no central isotropic coordinate block for this cocycle".into(),
            ));
        }
        self.route = route;
        Ok(self)
    }

    /// Same plan with the integration grids (`x`, `y`) refined; the output
    /// grids are kept so results stay comparable node by node.
    pub fn refined(&self, factor: usize) -> Self {
        let mut p = self.clone();
        p.grids.x = p.grids.x.refined(factor);
        p.grids.y = p.grids.y.refined(factor);
        p
    }

    pub fn grids(&self) -> &PlanGrids<T> {
        &self.grids
    }

    pub fn route(&self) -> ProductRoute {
        self.route
    }

    /// Coordinates integrated in closed form on the central route.
    pub fn central_coords(&self) -> &[usize] {
        &self.central
    }

    pub fn hbar(&self) -> T {
        self.hbar
    }

    pub fn cocycle(&self) -> &Cocycle<T> {
        &self.cocycle
    }

    pub fn split(&self) -> &Arc<CentralSplit<T>> {
        self.cocycle.split()
    }

    pub fn law(&self) -> &CompiledGroupLaw<T> {
        &self.law
    }

    fn k(&self) -> usize {
        self.law.dim()
    }

    fn m(&self) -> usize {
        self.grids.r.dims()
    }

    fn check_operand(&self, f: &TestFunction<T>, side: Side) -> Result<()> {
        f.expect_side(side)?;
        check_dim(self.k(), f.k())?;
        check_dim(self.m(), f.m())
    }

    /// Output grid `(y, r)` of [`twisted_convolution`](Self::twisted_convolution).
    pub fn convolution_spec(&self) -> QuadratureSpec<T> {
        self.grids.y.concat(&self.grids.r)
    }

    /// Output grid `(q, r)` of [`deformed_product`](Self::deformed_product).
    pub fn product_spec(&self) -> QuadratureSpec<T> {
        self.grids.q.concat(&self.grids.r)
    }

    /// `(f *_sigma g)(y; r) = int f(x; r) g(x^{-1} y; r) sigma(x, x^{-1} y; r) dx`
    /// on the `(y, r)` grid, always by the direct route.
    pub fn twisted_convolution(
        &self,
        f: &TestFunction<T>,
        g: &TestFunction<T>,
    ) -> Result<GridFunction<T>> {
        self.check_operand(f, Side::Xr)?;
        self.check_operand(g, Side::Xr)?;
        let k = self.k();
        let kd: Vec<usize> = (0..k).collect();
        self.grids.x.check_coverage_at(f, &kd)?;
        self.check_image_coverage(f, g, &kd)?;
        let vals = self.convolve_direct(f, g)?;
        Ok(GridFunction {
            spec: self.convolution_spec(),
            values: vals,
        })
    }

    /// `phi x_h psi` on the `(q, r)` grid.
    pub fn deformed_product(
        &self,
        phi: &TestFunction<T>,
        psi: &TestFunction<T>,
    ) -> Result<GridFunction<T>> {
        self.check_operand(phi, Side::Qr)?;
        self.check_operand(psi, Side::Qr)?;
        let spec = self.product_spec();
        spec.check_coverage(&phi.mul(psi)?, 0)?;
        let k = self.k();
        let values = match self.route {
            ProductRoute::Direct => {
                let (f, g) = (phi.partial_inverse()?, psi.partial_inverse()?);
                let kd: Vec<usize> = (0..k).collect();
                self.grids.x.check_coverage_at(&f, &kd)?;
                self.check_image_coverage(&f, &g, &kd)?;
                let conv = self.convolve_direct(&f, &g)?;
                let mut shape: Vec<usize> = self.convolution_spec().points.clone();
                let mut vals = conv;
                for d in 0..k {
                    let kern = fourier_kernel(&self.grids.y, d, &self.grids.q, d);
                    vals = apply_axis(&vals, &mut shape, d, &kern, self.grids.q.points[d]);
                }
                vals
            }
            ProductRoute::Central => self.product_central(phi, psi)?,
        };
        Ok(GridFunction { spec, values })
    }

    /// The convolution of two atom sums has (at `h = 0`) the atoms of
    /// `(f^ g^)^v`; the `y` grid must hold their mass along `dims`.
    fn check_image_coverage(
        &self,
        f: &TestFunction<T>,
        g: &TestFunction<T>,
        dims: &[usize],
    ) -> Result<()> {
        let conv = f
            .partial_fourier()?
            .mul(&g.partial_fourier()?)?
            .partial_inverse()?;
        self.grids.y.select(dims).check_coverage_at(&conv, dims)
    }

    fn convolve_direct(&self, f: &TestFunction<T>, g: &TestFunction<T>) -> Result<Vec<Complex<T>>> {
        self.convolve_points(f, g, &self.grids.y.points_flat())
    }

    /// Twisted convolution at arbitrary `y` points, for every `r` node;
    /// row-major `[y][r]`.
    pub fn twisted_convolution_at(
        &self,
        f: &TestFunction<T>,
        g: &TestFunction<T>,
        ys: &[Vec<T>],
    ) -> Result<Vec<Complex<T>>> {
        self.check_operand(f, Side::Xr)?;
        self.check_operand(g, Side::Xr)?;
        let kd: Vec<usize> = (0..self.k()).collect();
        self.grids.x.check_coverage_at(f, &kd)?;
        for y in ys {
            check_dim(self.k(), y.len())?;
        }
        self.convolve_points(f, g, ys)
    }

    fn convolve_points(
        &self,
        f: &TestFunction<T>,
        g: &TestFunction<T>,
        ys: &[Vec<T>],
    ) -> Result<Vec<Complex<T>>> {
        let (k, m) = (self.k(), self.m());
        let law = &*self.law;
        let xs = self.grids.x.points_flat();
        let wx = self.grids.x.weights_flat();
        let rs = self.grids.r.points_flat();
        let nr = rs.len();
        let wr: Vec<Vec<T>> = rs.iter().map(|r| self.cocycle.eval_upper(r)).collect();
        let kd: Vec<usize> = (0..k).collect();
        let rd: Vec<usize> = (k..k + m).collect();
        let fx = factor_table(f, &kd, &xs, true);
        let fr = factor_table(f, &rd, &rs, false);
        let gr = factor_table(g, &rd, &rs, false);
        let (fr_max, gr_max) = (row_max(&fr), row_max(&gr));
        let fmag: Vec<T> = (0..xs.len())
            .map(|ix| {
                fx.iter()
                    .zip(&fr_max)
                    .map(|(row, b)| row[ix].norm() * *b)
                    .sum()
            })
            .collect();
        let fpeak = fmag.iter().fold(T::zero(), |a, b| a.max(*b));
        let gpeak: T = g
            .atoms()
            .iter()
            .zip(&gr_max)
            .map(|(a, b)| a.amp.norm() * *b)
            .sum();
        let cut = T::lit(PRUNE) * fpeak * gpeak;
        let ga = g.atoms();

        let rows: Vec<(Vec<Complex<T>>, T)> = ys
            .par_iter()
            .map(|y| {
                let mut acc = vec![zero_c(); nr];
                let mut tab = law.table();
                let mut u = vec![T::zero(); k];
                let mut neg = vec![T::zero(); k];
                let mut p = vec![T::zero(); law.pairs()];
                let mut gu = vec![zero_c(); ga.len()];
                let mut dev = T::zero();
                for ix in 0..xs.len() {
                    if fmag[ix] * gpeak <= cut {
                        continue;
                    }
                    for (n, v) in neg.iter_mut().zip(&xs[ix]) {
                        *n = -*v;
                    }
                    law.load(&mut tab, &neg, y);
                    law.product_into(&tab, &mut u);
                    let mut gmag = T::zero();
                    for (b, a) in ga.iter().enumerate() {
                        gu[b] = (0..k).fold(a.amp, |acc, d| acc * a.factor(d, u[d]));
                        gmag += gu[b].norm() * gr_max[b];
                    }
                    if fmag[ix] * gmag <= cut {
                        continue;
                    }
                    law.load(&mut tab, &xs[ix], &u);
                    law.bivector_into(&tab, &mut p);
                    for ir in 0..nr {
                        let ph: T = p.iter().zip(&wr[ir]).map(|(a, b)| *a * *b).sum();
                        let s = e_bar(ph);
                        dev = dev.max((s.norm_sqr() - T::one()).abs());
                        let fv = fx
                            .iter()
                            .zip(&fr)
                            .fold(zero_c::<T>(), |t, (a, b)| t + a[ix] * b[ir]);
                        let gv = gu
                            .iter()
                            .zip(&gr)
                            .fold(zero_c::<T>(), |t, (a, b)| t + *a * b[ir]);
                        acc[ir] += fv * gv * s * wx[ix];
                    }
                }
                (acc, dev)
            })
            .collect();
        collect_rows(rows)
    }

    fn product_central(
        &self,
        phi: &TestFunction<T>,
        psi: &TestFunction<T>,
    ) -> Result<Vec<Complex<T>>> {
        let (k, m) = (self.k(), self.m());
        let cc = &self.central;
        let nd: Vec<usize> = (0..k).filter(|d| !cc.contains(d)).collect();
        let mask: Vec<bool> = (0..k + m).map(|d| nd.contains(&d)).collect();
        let big_f = phi.transform_coords(&mask, true)?;
        let big_g = psi.transform_coords(&mask, true)?;
        let xgrid = self.grids.x.select(&nd);
        let ygrid = self.grids.y.select(&nd);
        let qc_grid = self.grids.q.select(cc);
        xgrid.check_coverage_at(&big_f, &nd)?;
        {
            let f = phi.partial_inverse()?;
            let g = psi.partial_inverse()?;
            self.check_image_coverage(&f, &g, &nd)?;
        }

        let law = &*self.law;
        let xs = xgrid.points_flat();
        let wx = xgrid.weights_flat();
        let ys = ygrid.points_flat();
        let qcs = qc_grid.points_flat();
        let rs = self.grids.r.points_flat();
        let (nr, nq) = (rs.len(), qcs.len());
        let wr: Vec<Vec<T>> = rs.iter().map(|r| self.cocycle.eval_upper(r)).collect();
        let rd: Vec<usize> = (k..k + m).collect();
        let fx = factor_table(&big_f, &nd, &xs, true);
        let fr = factor_table(&big_f, &rd, &rs, false);
        let gr = factor_table(&big_g, &rd, &rs, false);
        // C-factors are bounded by 1, so the N and r parts bound the magnitude
        let (fr_max, gr_max) = (row_max(&fr), row_max(&gr));
        let fmag: Vec<T> = (0..xs.len())
            .map(|ix| {
                fx.iter()
                    .zip(&fr_max)
                    .map(|(row, b)| row[ix].norm() * *b)
                    .sum()
            })
            .collect();
        let fpeak = fmag.iter().fold(T::zero(), |a, b| a.max(*b));
        let gpeak: T = big_g
            .atoms()
            .iter()
            .zip(&gr_max)
            .map(|(a, b)| a.amp.norm() * *b)
            .sum();
        let cut = T::lit(PRUNE) * fpeak * gpeak;
        let (fa, ga) = (big_f.atoms(), big_g.atoms());
        let npairs = law.pairs();
        let ncc = cc.len();
        // with one central coordinate the q_C sweep runs as a Gaussian ladder
        let rec = ncc == 1;
        let (q0, dq) = if rec {
            (qc_grid.nodes(0)[0], qc_grid.step(0))
        } else {
            (T::zero(), T::zero())
        };
        let limit = -T::min_positive_value().ln() * T::lit(0.5);
        let ladder_ratio = |f: &TestFunction<T>| -> Vec<T> {
            f.atoms()
                .iter()
                .map(|a| {
                    let w = a.width[cc[0]];
                    (-T::two_pi() * dq * dq / (w * w)).exp()
                })
                .collect()
        };
        let ladder_turn = |f: &TestFunction<T>| -> Vec<Complex<T>> {
            f.atoms()
                .iter()
                .map(|a| e_phase(a.modulation[cc[0]] * dq))
                .collect()
        };
        let (kf, kg) = if rec {
            (ladder_ratio(&big_f), ladder_ratio(&big_g))
        } else {
            (vec![], vec![])
        };
        let (tf, tg) = if rec {
            (ladder_turn(&big_f), ladder_turn(&big_g))
        } else {
            (vec![], vec![])
        };

        let rows: Vec<(Vec<Complex<T>>, T)> = ys
            .par_iter()
            .map(|yn| {
                let mut acc = vec![zero_c(); nq * nr];
                let mut tab = law.table();
                let mut xf = vec![T::zero(); k];
                let mut uf = vec![T::zero(); k];
                let mut s = vec![T::zero(); k];
                let mut p0 = vec![T::zero(); npairs];
                let mut pa = vec![T::zero(); npairs * ncc];
                let mut pb = vec![T::zero(); npairs * ncc];
                let mut gn = vec![zero_c(); ga.len()];
                let mut alpha = vec![zero_c(); fa.len()];
                let mut beta = vec![zero_c(); ga.len()];
                let mut sa = vec![T::zero(); ncc];
                let mut sb = vec![T::zero(); ncc];
                let mut zfm = vec![(zero_c::<T>(), zero_c::<T>()); fa.len()];
                let mut zgm = vec![(zero_c::<T>(), zero_c::<T>()); ga.len()];
                let mut dev = T::zero();
                for ix in 0..xs.len() {
                    if fmag[ix] * gpeak <= cut {
                        continue;
                    }
                    let mut gmag = T::zero();
                    for (j, d) in nd.iter().enumerate() {
                        xf[*d] = xs[ix][j];
                        uf[*d] = yn[j] - xs[ix][j];
                    }
                    for (b, a) in ga.iter().enumerate() {
                        gn[b] = nd.iter().fold(a.amp, |acc, d| acc * a.factor(*d, uf[*d]));
                        gmag += gn[b].norm() * gr_max[b];
                    }
                    if fmag[ix] * gmag <= cut {
                        continue;
                    }
                    law.load(&mut tab, &xf, &uf);
                    law.product_into(&tab, &mut s);
                    law.bivector_into(&tab, &mut p0);
                    for (c, d) in cc.iter().enumerate() {
                        xf[*d] = T::one();
                        law.load(&mut tab, &xf, &uf);
                        law.bivector_into(&tab, &mut pa[c * npairs..(c + 1) * npairs]);
                        xf[*d] = T::zero();
                        uf[*d] = T::one();
                        law.load(&mut tab, &xf, &uf);
                        law.bivector_into(&tab, &mut pb[c * npairs..(c + 1) * npairs]);
                        uf[*d] = T::zero();
                    }
                    for ir in 0..nr {
                        let w = &wr[ir];
                        let r0: T = p0.iter().zip(w).map(|(a, b)| *a * *b).sum();
                        for c in 0..ncc {
                            let sl = c * npairs..(c + 1) * npairs;
                            sa[c] = pa[sl.clone()]
                                .iter()
                                .zip(w)
                                .map(|(a, b)| *a * *b)
                                .sum::<T>()
                                - r0;
                            sb[c] = pb[sl].iter().zip(w).map(|(a, b)| *a * *b).sum::<T>() - r0;
                        }
                        for (a, (row, rr)) in alpha.iter_mut().zip(fx.iter().zip(&fr)) {
                            *a = row[ix] * rr[ir];
                        }
                        for (b, (g0, rr)) in beta.iter_mut().zip(gn.iter().zip(&gr)) {
                            *b = *g0 * rr[ir];
                        }
                        if rec {
                            let zf = ladder_start(
                                fa, &alpha, &tf, cc[0], q0, dq, sa[0], limit, &mut zfm,
                            );
                            let zg =
                                ladder_start(ga, &beta, &tg, cc[0], q0, dq, sb[0], limit, &mut zgm);
                            if zf && zg {
                                let mut e = e_bar(q0 * s[cc[0]] + r0);
                                let step = e_bar(dq * s[cc[0]]);
                                for iq in 0..nq {
                                    let fv = zfm.iter().fold(zero_c::<T>(), |t, (z, _)| t + *z);
                                    let gv = zgm.iter().fold(zero_c::<T>(), |t, (z, _)| t + *z);
                                    acc[iq * nr + ir] += fv * gv * e * wx[ix];
                                    for ((z, mm), kk) in zfm.iter_mut().zip(&kf) {
                                        *z *= *mm;
                                        *mm *= *kk;
                                    }
                                    for ((z, mm), kk) in zgm.iter_mut().zip(&kg) {
                                        *z *= *mm;
                                        *mm *= *kk;
                                    }
                                    e *= step;
                                }
                                dev = dev.max((e.norm_sqr() - T::one()).abs());
                                continue;
                            }
                        }
                        for (iq, qc) in qcs.iter().enumerate() {
                            let mut fv = zero_c::<T>();
                            for (a, at) in alpha.iter().zip(fa) {
                                fv += (0..ncc).fold(*a, |t, c| t * at.factor(cc[c], qc[c] + sa[c]));
                            }
                            let mut gv = zero_c::<T>();
                            for (b, at) in beta.iter().zip(ga) {
                                gv += (0..ncc).fold(*b, |t, c| t * at.factor(cc[c], qc[c] + sb[c]));
                            }
                            let ph = (0..ncc).fold(r0, |t, c| t + qc[c] * s[cc[c]]);
                            let e = e_bar(ph);
                            dev = dev.max((e.norm_sqr() - T::one()).abs());
                            acc[iq * nr + ir] += fv * gv * e * wx[ix];
                        }
                    }
                }
                (acc, dev)
            })
            .collect();
        let vals = collect_rows(rows)?;

        let mut shape: Vec<usize> = ygrid.points.clone();
        shape.extend(&qc_grid.points);
        shape.extend(&self.grids.r.points);
        let mut vals = vals;
        for (j, d) in nd.iter().enumerate() {
            let kern = fourier_kernel(&ygrid, j, &self.grids.q, *d);
            vals = apply_axis(&vals, &mut shape, j, &kern, self.grids.q.points[*d]);
        }
        Ok(vals)
    }

    /// `f*(x; r) = conj(f(x^{-1}; r) sigma(x, x^{-1}; r))` on the `(y, r)`
    /// grid. The phase factor is evaluated and must be unimodular.
    pub fn involution(&self, f: &TestFunction<T>) -> Result<GridFunction<T>> {
        self.check_operand(f, Side::Xr)?;
        let k = self.k();
        let spec = self.convolution_spec();
        let law = &*self.law;
        let rows: Vec<(Complex<T>, T)> = (0..spec.len())
            .into_par_iter()
            .map(|i| {
                let pt = spec.point(i);
                let (x, r) = pt.split_at(k);
                let inv: Vec<T> = x.iter().map(|v| -*v).collect();
                let s = e_bar(law.phase(x, &inv, &self.cocycle.eval_upper(r)));
                let mut arg = inv;
                arg.extend_from_slice(r);
                (
                    (f.eval_unchecked(&arg) * s).conj(),
                    (s.norm() - T::one()).abs(),
                )
            })
            .collect();
        let dev = rows.iter().fold(T::zero(), |a, (_, d)| a.max(*d));
        unit_guard(dev)?;
        Ok(GridFunction {
            spec,
            values: rows.into_iter().map(|(v, _)| v).collect(),
        })
    }

    /// Involution of sampled data; the grid must be symmetric in `x` so that
    /// `x^{-1} = -x` is again a node.
    pub fn involution_grid(&self, f: &GridFunction<T>) -> Result<GridFunction<T>> {
        let k = self.k();
        check_dim(k + self.m(), f.spec.dims())?;
        if !f.spec.select(&(0..k).collect::<Vec<_>>()).is_symmetric() {
            return Err(Error::InvalidInput(
                "grid involution needs a grid symmetric in x".into(),
            ));
        }
        let spec = f.spec.clone();
        let law = &*self.law;
        let rows: Vec<(Complex<T>, T)> = (0..spec.len())
            .into_par_iter()
            .map(|i| {
                let mut mi = vec![0; spec.dims()];
                spec.unflatten(i, &mut mi);
                let mut j = 0;
                for d in 0..spec.dims() {
                    let idx = if d < k {
                        spec.points[d] - 1 - mi[d]
                    } else {
                        mi[d]
                    };
                    j = j * spec.points[d] + idx;
                }
                let pt = spec.point(i);
                let (x, r) = pt.split_at(k);
                let inv: Vec<T> = x.iter().map(|v| -*v).collect();
                let s = e_bar(law.phase(x, &inv, &self.cocycle.eval_upper(r)));
                ((f.values[j] * s).conj(), (s.norm() - T::one()).abs())
            })
            .collect();
        let dev = rows.iter().fold(T::zero(), |a, (_, d)| a.max(*d));
        unit_guard(dev)?;
        Ok(GridFunction {
            spec,
            values: rows.into_iter().map(|(v, _)| v).collect(),
        })
    }
}

/// Atom-sum form of the involution, `conj(f(-x; r))`; exact because
/// `sigma(x, x^{-1}) = 1` for the BCH group law.
pub fn star<T: Scalar>(f: &TestFunction<T>) -> Result<TestFunction<T>> {
    f.expect_side(Side::Xr)?;
    let k = f.k();
    let atoms = f
        .atoms()
        .iter()
        .map(|a| {
            let mut b = a.conj();
            for d in 0..k {
                b.center[d] = -b.center[d];
                b.modulation[d] = -b.modulation[d];
            }
            b
        })
        .collect();
    TestFunction::new(Side::Xr, k, f.m(), atoms)
}

/// Seeds `z_j = coef * factor(q0 + j dq + shift)` as `z_{j+1} = z_j m_j`,
/// `m_{j+1} = m_j K`. Returns false when the start underflows.
#[allow(clippy::too_many_arguments)]
#[inline]
fn ladder_start<T: Scalar>(
    atoms: &[crate::schwartz::GaussianAtom<T>],
    coef: &[Complex<T>],
    turn: &[Complex<T>],
    d: usize,
    q0: T,
    dq: T,
    shift: T,
    limit: T,
    out: &mut [(Complex<T>, Complex<T>)],
) -> bool {
    for (((at, c), tn), slot) in atoms.iter().zip(coef).zip(turn).zip(out.iter_mut()) {
        let (w, xi) = (at.width[d], at.modulation[d]);
        let t0 = q0 + shift - at.center[d];
        let decay = T::PI() * (t0 / w) * (t0 / w);
        if decay > limit {
            return false;
        }
        let z = *c * e_phase(xi * t0) * (-decay).exp();
        let m = *tn * (-T::PI() * (T::lit(2.0) * t0 * dq + dq * dq) / (w * w)).exp();
        *slot = (z, m);
    }
    true
}

fn unit_guard<T: Scalar>(dev: T) -> Result<()> {
    if dev > T::lit(UNIT_TOL) {
        Err(Error::NonUnitPhase {
            deviation: dev.to_f64_lossy(),
        })
    } else {
        Ok(())
    }
}

fn collect_rows<T: Scalar>(rows: Vec<(Vec<Complex<T>>, T)>) -> Result<Vec<Complex<T>>> {
    let dev = rows.iter().fold(T::zero(), |a, (_, d)| a.max(*d));
    unit_guard(dev)?;
    Ok(rows.into_iter().flat_map(|(v, _)| v).collect())
}

/// Ellipsoids `center +- radius` around each atom's effective support.
struct Support<T> {
    balls: Vec<(Vec<T>, Vec<T>)>,
}

impl<T: Scalar> Support<T> {
    /// A random point of a random ball; cube samples are pulled back into
    /// the unit ball, which favours the boundary where extremes live.
    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<T> {
        let (c, rad) = &self.balls[rng.gen_range(0..self.balls.len())];
        let t: Vec<f64> = (0..c.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let n = t.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        c.iter()
            .zip(rad)
            .zip(&t)
            .map(|((c, r), t)| *c + *r * T::lit(t / n))
            .collect()
    }
}

/// Probes the compiled law where the convolution integrand is not
/// negligible. Returns the largest phase frequency
/// `|grad (R + q . (S - x - u))|_inf` and the per-coordinate size of the
/// nonlinear part `S(x, u) - x - u`.
fn probe_law<T: Scalar>(
    law: &CompiledGroupLaw<T>,
    omega: &Cocycle<T>,
    xs: &Support<T>,
    qr: &Support<T>,
    rules: &GridRules,
) -> (T, Vec<T>) {
    let k = law.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e1d_5eed);
    let theta = |x: &[T], u: &[T], q: &[T], w: &[T]| -> T {
        let s = law.mul(x, u);
        let bend: T = (0..k).map(|d| q[d] * (s[d] - x[d] - u[d])).sum();
        law.phase(x, u, w) + bend
    };
    let mut freq = T::zero();
    let mut ext = vec![T::zero(); k];
    let h = T::lit(1e-5);
    for _ in 0..rules.probes.max(1) {
        let (x, u) = (xs.draw(&mut rng), xs.draw(&mut rng));
        let qr_pt = qr.draw(&mut rng);
        let (q, r) = qr_pt.split_at(k);
        let w = omega.eval_upper(r);
        let s = law.mul(&x, &u);
        for d in 0..k {
            ext[d] = ext[d].max((s[d] - x[d] - u[d]).abs());
        }
        for d in 0..k {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[d] += h;
            xm[d] -= h;
            let gx = (theta(&xp, &u, q, &w) - theta(&xm, &u, q, &w)) / (h + h);
            let (mut up, mut um) = (u.clone(), u.clone());
            up[d] += h;
            um[d] -= h;
            let gu = (theta(&x, &up, q, &w) - theta(&x, &um, q, &w)) / (h + h);
            freq = freq.max(gx.abs()).max(gu.abs());
        }
    }
    (freq, ext)
}
