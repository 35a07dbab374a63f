//! Experiment harness for the classical limit of the deformed product:
//! commutator defects over an `h`-sweep, log-log slope fits with a
//! self-convergence error budget, and two independent oracles.
//!
//! Norms are the grid sup norm and the trapezoid `L1` norm on the output
//! grid. Neither is the C*-norm of the completed algebra; reports say so.

use crate::bch::CompiledGroupLaw;
use crate::cocycle::{Cocycle, CocycleDoc, CocycleKind};
use crate::error::{check_dim, Error, Result};
use crate::lie::AlgebraDoc;
use crate::poisson::PoissonContext;
use crate::quantizer::{DeformedProductPlan, GridRules, PlanGrids};
use crate::scalar::{e_bar, e_phase, Scalar};
use crate::schwartz::{
    AtomDoc, GaussianAtom, GridFunction, NormKind, QuadratureSpec, Side, TestFunction,
};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Points whose defect is below `FLOOR_FACTOR` times the N vs 2N gap are
/// excluded from the slope fit.
pub const FLOOR_FACTOR: f64 = 10.0;
/// Smallest accepted `h_max / h_min`.
pub const MIN_SPAN: f64 = 8.0;
pub const MIN_SWEEP_POINTS: usize = 4;
pub const NORM_NOTE: &str =
    "defects are sup and L1 norms on the output grid; the C*-norm of the completed algebra is not computed";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Defect {
    pub sup_defect: f64,
    pub l1_defect: f64,
}

fn zero_c<T: Scalar>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// The bracket context matched to a plan's cocycle.
fn bracket_context<T: Scalar>(omega: &Cocycle<T>) -> Result<PoissonContext<T>> {
    if omega.kind() == CocycleKind::Perturbation {
        return Err(Error::InvalidInput(
            "the deformed product needs the total cocycle, not a bare perturbation".into(),
        ));
    }
    PoissonContext::extended(omega)
}

/// `(phi x psi - psi x phi) / h - (i / 2 pi) {phi, psi}` on the plan's
/// output grid.
pub fn commutator_defect_grid<T: Scalar>(
    plan: &DeformedProductPlan<T>,
    phi: &TestFunction<T>,
    psi: &TestFunction<T>,
) -> Result<GridFunction<T>> {
    let h = plan.hbar();
    if h == T::zero() {
        return Err(Error::InvalidInput(
            "the commutator defect is undefined at h = 0".into(),
        ));
    }
    let ctx = bracket_context(plan.cocycle())?;
    let ab = plan.deformed_product(phi, psi)?;
    let ba = plan.deformed_product(psi, phi)?;
    let spec = plan.product_spec();
    let k = plan.split().quotient_dim();
    let coef = Complex::new(T::zero(), T::one() / T::two_pi());
    let values = (0..spec.len())
        .into_par_iter()
        .map(|i| {
            let pt = spec.point(i);
            let (q, r) = pt.split_at(k);
            let br = ctx.bracket_qr(phi, psi, q, r);
            (ab.values[i] - ba.values[i]) / h - coef * br
        })
        .collect();
    Ok(GridFunction { spec, values })
}

pub fn commutator_defect<T: Scalar>(
    plan: &DeformedProductPlan<T>,
    phi: &TestFunction<T>,
    psi: &TestFunction<T>,
) -> Result<Defect> {
    let d = commutator_defect_grid(plan, phi, psi)?;
    Ok(Defect {
        sup_defect: d.norm(NormKind::Sup).to_f64_lossy(),
        l1_defect: d.norm(NormKind::L1).to_f64_lossy(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub rules: GridRules,
    /// Integration refinement used for the error budget and slope check.
    pub refine: usize,
    /// Attach oracle residuals at the largest `h` when they apply.
    pub oracles: bool,
    /// Sample count and seed of the sampled oracle.
    pub oracle_samples: usize,
    pub seed: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            rules: GridRules::default(),
            refine: 2,
            oracles: true,
            oracle_samples: 16,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub hbar: f64,
    pub defect: Defect,
    /// Same defect with refined integration grids.
    pub refined: Defect,
    /// `FLOOR_FACTOR` times the sup gap between the two.
    pub sup_floor: f64,
    pub l1_floor: f64,
    pub x_points: Vec<usize>,
    pub y_points: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub sup: Option<f64>,
    pub l1: Option<f64>,
    pub sup_points_used: usize,
    pub l1_points_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResidual {
    pub name: String,
    pub hbar: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub algebra: AlgebraDoc,
    pub cocycle: CocycleDoc,
    pub operands: [Vec<AtomDoc>; 2],
    pub rules: GridRules,
    pub output_grid: (QuadratureSpec<f64>, QuadratureSpec<f64>),
    pub route: String,
    pub norm_note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub hbar_values: Vec<f64>,
    pub points: Vec<SweepPoint>,
    pub slope: SlopeFit,
    pub refined_slope: SlopeFit,
    pub sup_strictly_decreasing: bool,
    pub l1_strictly_decreasing: bool,
    pub oracle_residuals: Vec<OracleResidual>,
    pub provenance: Provenance,
}

impl SweepReport {
    /// Columns `hbar,sup_defect,l1_defect`, full round-trip precision.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("hbar,sup_defect,l1_defect\n");
        for p in &self.points {
            s.push_str(&format!(
                "{:e},{:e},{:e}\n",
                p.hbar, p.defect.sup_defect, p.defect.l1_defect
            ));
        }
        s
    }

    /// Largest change of either slope under refinement.
    pub fn slope_shift(&self) -> Option<f64> {
        let d = |a: Option<f64>, b: Option<f64>| Some((a? - b?).abs());
        match (
            d(self.slope.sup, self.refined_slope.sup),
            d(self.slope.l1, self.refined_slope.l1),
        ) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        }
    }
}

/// Least squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() || ys.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn fit(points: &[SweepPoint], pick: impl Fn(&SweepPoint) -> Defect) -> SlopeFit {
    let keep = |f: &dyn Fn(&SweepPoint) -> (f64, f64)| -> (Vec<f64>, Vec<f64>) {
        points
            .iter()
            .filter(|p| {
                let (v, floor) = f(p);
                v > floor
            })
            .map(|p| (p.hbar, f(p).0))
            .unzip()
    };
    let (hs, sup) = keep(&|p| (pick(p).sup_defect, p.sup_floor));
    let (hl, l1) = keep(&|p| (pick(p).l1_defect, p.l1_floor));
    SlopeFit {
        sup: loglog_slope(&hs, &sup),
        l1: loglog_slope(&hl, &l1),
        sup_points_used: hs.len(),
        l1_points_used: hl.len(),
    }
}

/// Checks and orders an `h` list: at least four distinct positive values
/// spanning a factor of [`MIN_SPAN`]; returned strictly decreasing.
pub fn validate_hbars(hbars: &[f64]) -> Result<Vec<f64>> {
    if let Some(h) = hbars.iter().find(|h| !(**h > 0.0) || !h.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "sweep values must be finite and positive, got {h}; use the product-table experiment for h = 0"
        )));
    }
    let mut v = hbars.to_vec();
    v.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    v.dedup();
    if v.len() < MIN_SWEEP_POINTS {
        return Err(Error::InsufficientSweep(format!(
            "{} distinct values, need at least {MIN_SWEEP_POINTS}",
            v.len()
        )));
    }
    let span = v[0] / v[v.len() - 1];
    if span < MIN_SPAN {
        return Err(Error::InsufficientSweep(format!(
            "h range spans a factor {span}, need at least {MIN_SPAN}"
        )));
    }
    Ok(v)
}

fn gap(a: &GridFunction<f64>, b: &GridFunction<f64>) -> Result<Defect> {
    let d = a.sub(b)?;
    Ok(Defect {
        sup_defect: d.norm(NormKind::Sup),
        l1_defect: d.norm(NormKind::L1),
    })
}

/// Runs the commutator defect at each `h` with automatic grids, once as
/// planned and once with refined integration grids; fits slopes above the
/// error-budget floor.
pub fn sweep(
    omega: &Cocycle<f64>,
    phi: &TestFunction<f64>,
    psi: &TestFunction<f64>,
    hbars: &[f64],
    opts: &SweepOptions,
) -> Result<SweepReport> {
    let hbars = validate_hbars(hbars)?;
    bracket_context(omega)?;
    let plans = hbars
        .iter()
        .map(|h| DeformedProductPlan::auto(omega, *h, &[phi, psi], &opts.rules))
        .collect::<Result<Vec<_>>>()?;
    sweep_plans(&plans, phi, psi, opts)
}

/// [`sweep`] over prepared plans, one per `h`, sharing one cocycle.
pub fn sweep_plans(
    plans: &[DeformedProductPlan<f64>],
    phi: &TestFunction<f64>,
    psi: &TestFunction<f64>,
    opts: &SweepOptions,
) -> Result<SweepReport> {
    let first = plans
        .first()
        .ok_or_else(|| Error::InsufficientSweep("no plans".into()))?;
    let omega = first.cocycle();
    let given: Vec<f64> = plans.iter().map(|p| p.hbar()).collect();
    let hbars = validate_hbars(&given)?;
    if hbars != given {
        return Err(Error::InvalidInput(
            "plans must be ordered by strictly decreasing h".into(),
        ));
    }
    if opts.refine < 2 {
        return Err(Error::InvalidInput(
            "refinement factor must be at least 2".into(),
        ));
    }
    bracket_context(omega)?;
    let points = plans
        .par_iter()
        .map(|plan| -> Result<SweepPoint> {
            let coarse = commutator_defect_grid(plan, phi, psi)?;
            let fine = commutator_defect_grid(&plan.refined(opts.refine), phi, psi)?;
            let g = gap(&coarse, &fine)?;
            let grids: &PlanGrids<f64> = plan.grids();
            Ok(SweepPoint {
                hbar: plan.hbar(),
                defect: Defect {
                    sup_defect: coarse.norm(NormKind::Sup),
                    l1_defect: coarse.norm(NormKind::L1),
                },
                refined: Defect {
                    sup_defect: fine.norm(NormKind::Sup),
                    l1_defect: fine.norm(NormKind::L1),
                },
                sup_floor: FLOOR_FACTOR * g.sup_defect,
                l1_floor: FLOOR_FACTOR * g.l1_defect,
                x_points: grids.x.points.clone(),
                y_points: grids.y.points.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let above =
        |p: &SweepPoint| p.defect.sup_defect > p.sup_floor || p.defect.l1_defect > p.l1_floor;
    if !points.iter().any(above) {
        return Err(Error::BudgetFloorReached(
            "every defect is below ten times its N vs 2N quadrature gap".into(),
        ));
    }
    let slope = fit(&points, |p| p.defect);
    let refined_slope = fit(&points, |p| p.refined);
    let sups: Vec<f64> = points.iter().map(|p| p.defect.sup_defect).collect();
    let l1s: Vec<f64> = points.iter().map(|p| p.defect.l1_defect).collect();

    let mut oracle_residuals = Vec::new();
    if opts.oracles {
        let top = &plans[0];
        if omega.split().quotient().is_abelian() && omega.split().quotient_dim() == 2 {
            oracle_residuals.push(OracleResidual {
                name: "moyal".into(),
                hbar: top.hbar(),
                residual: moyal_residual(top, phi, psi)?,
            });
        }
        if omega.kind() == CocycleKind::Omega0 {
            let check = rieffel_oracle(top, phi, psi, opts.oracle_samples, opts.seed)?;
            oracle_residuals.push(OracleResidual {
                name: "rieffel".into(),
                hbar: top.hbar(),
                residual: check.residual,
            });
        }
    }

    let grids = plans[0].grids();
    Ok(SweepReport {
        hbar_values: hbars,
        sup_strictly_decreasing: strictly_decreasing(&sups),
        l1_strictly_decreasing: strictly_decreasing(&l1s),
        points,
        slope,
        refined_slope,
        oracle_residuals,
        provenance: Provenance {
            algebra: omega.split().parent().to_doc(),
            cocycle: omega.to_doc(),
            operands: [phi.to_docs(), psi.to_docs()],
            rules: opts.rules,
            output_grid: (grids.q.clone(), grids.r.clone()),
            route: format!("{:?}", plans[0].route()).to_lowercase(),
            norm_note: NORM_NOTE.into(),
        },
    })
}

/// Midpoint nodes of `[c - l, c + l]` with `n` cells.
fn midpoints<T: Scalar>(c: T, l: T, n: usize) -> (Vec<T>, T) {
    let h = T::lit(2.0) * l / T::lit(n as f64);
    (
        (0..n)
            .map(|i| c - l + h * (T::lit(i as f64) + T::lit(0.5)))
            .collect(),
        h,
    )
}

fn cells<T: Scalar>(len: T, inv_h: T) -> usize {
    ((T::lit(2.0) * len * inv_h).to_f64_lossy().ceil() as usize).max(16)
}

/// Phase-space evaluation of the product for an abelian two-dimensional
/// quotient, at one `r` slice. With `theta = h omega_{12}(r)`,
/// `(phi x psi)(q) = int Phi(x) e-bar[x . q] psi(q + theta/2 (-x2, x1)) dx`
/// where `Phi(x) = int phi(a, r) e[x . a] da`. Both integrals use the
/// midpoint rule.
pub fn moyal_oracle<T: Scalar>(
    omega: &Cocycle<T>,
    phi: &TestFunction<T>,
    psi: &TestFunction<T>,
    hbar: T,
    r: &[T],
    q_grid: &QuadratureSpec<T>,
) -> Result<Vec<Complex<T>>> {
    let split = omega.split();
    if split.quotient_dim() != 2 || !split.quotient().is_abelian() {
        return Err(Error::WrongAlgebra(
            "the phase-space oracle needs an abelian two-dimensional quotient".into(),
        ));
    }
    for f in [phi, psi] {
        f.expect_side(Side::Qr)?;
        check_dim(2, f.k())?;
        check_dim(split.center_dim(), f.m())?;
    }
    check_dim(2, q_grid.dims())?;
    check_dim(split.center_dim(), r.len())?;
    let theta = hbar * omega.eval_upper(r)[0];
    let z = T::lit(3.0);
    // boxes: a covers phi, x covers phi^v
    let (mut la, mut lx, mut wmin, mut lq) =
        ([T::zero(); 2], [T::zero(); 2], T::infinity(), T::zero());
    let mut band = T::zero();
    for a in phi.atoms().iter().chain(psi.atoms()) {
        for d in 0..2 {
            la[d] = la[d].max(a.center[d].abs() + z * a.width[d]);
            lx[d] = lx[d].max(a.modulation[d].abs() + z / a.width[d]);
            wmin = wmin.min(a.width[d]);
            lq = lq.max(a.center[d].abs() + z * a.width[d]);
            band = band.max(a.modulation[d].abs() + T::lit(4.0) / a.width[d]);
        }
    }
    for d in 0..2 {
        lq = lq.max(q_grid.center[d].abs() + q_grid.half_width[d]);
    }
    let lx_max = lx[0].max(lx[1]);
    let inv_ha = T::lit(2.0) * lx_max + T::lit(4.0) / wmin;
    let inv_hx = T::lit(2.0) * lq + theta.abs() * T::lit(0.5) * band + T::lit(2.0);
    let (a0, ha0) = midpoints(T::zero(), la[0], cells(la[0], inv_ha));
    let (a1, ha1) = midpoints(T::zero(), la[1], cells(la[1], inv_ha));
    let (x0, hx0) = midpoints(T::zero(), lx[0], cells(lx[0], inv_hx));
    let (x1, hx1) = midpoints(T::zero(), lx[1], cells(lx[1], inv_hx));

    // Phi on the x grid by two one-dimensional sums
    let mut tmp = vec![zero_c::<T>(); x0.len() * a1.len()];
    tmp.par_chunks_mut(a1.len())
        .enumerate()
        .for_each(|(i, row)| {
            for (j, b) in a1.iter().enumerate() {
                let mut s = zero_c::<T>();
                for a in &a0 {
                    let mut u = vec![*a, *b];
                    u.extend_from_slice(r);
                    s += phi.eval_unchecked(&u) * e_phase(x0[i] * *a);
                }
                row[j] = s * ha0;
            }
        });
    let mut big_phi = vec![zero_c::<T>(); x0.len() * x1.len()];
    big_phi
        .par_chunks_mut(x1.len())
        .enumerate()
        .for_each(|(i, row)| {
            for (j, xv) in x1.iter().enumerate() {
                let mut s = zero_c::<T>();
                for (l, b) in a1.iter().enumerate() {
                    s += tmp[i * a1.len() + l] * e_phase(*xv * *b);
                }
                row[j] = s * ha1;
            }
        });

    let half = theta * T::lit(0.5);
    let out = (0..q_grid.len())
        .into_par_iter()
        .map(|iq| {
            let q = q_grid.point(iq);
            let mut s = zero_c::<T>();
            for (i, xa) in x0.iter().enumerate() {
                for (j, xb) in x1.iter().enumerate() {
                    let v = big_phi[i * x1.len() + j];
                    if v.norm() == T::zero() {
                        continue;
                    }
                    let mut u = vec![q[0] - half * *xb, q[1] + half * *xa];
                    u.extend_from_slice(r);
                    s += v * e_bar(*xa * q[0] + *xb * q[1]) * psi.eval_unchecked(&u);
                }
            }
            s * hx0 * hx1
        })
        .collect();
    Ok(out)
}

/// Relative sup residual between the plan's product and the phase-space
/// oracle over every `r` node of the plan.
pub fn moyal_residual<T: Scalar>(
    plan: &DeformedProductPlan<T>,
    phi: &TestFunction<T>,
    psi: &TestFunction<T>,
) -> Result<f64> {
    let prod = plan.deformed_product(phi, psi)?;
    let grids = plan.grids();
    let nr = grids.r.len();
    let (mut diff, mut scale) = (T::zero(), T::zero());
    for ir in 0..nr {
        let r = grids.r.point(ir);
        let slice = moyal_oracle(plan.cocycle(), phi, psi, plan.hbar(), &r, &grids.q)?;
        for (iq, v) in slice.iter().enumerate() {
            let p = prod.values[iq * nr + ir];
            diff = diff.max((p - *v).norm());
            scale = scale.max(p.norm());
        }
    }
    Ok((diff / scale).to_f64_lossy())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RieffelCheck {
    /// `max |oracle - plan| / max |plan|` over the sampled `(y, r)`.
    pub residual: f64,
    pub samples: usize,
    pub x_points: Vec<usize>,
    pub z_points: Vec<usize>,
}

/// Sub-atom over coordinates `from..from + n`, unit amplitude.
fn sub_atom<T: Scalar>(a: &GaussianAtom<T>, from: usize, n: usize) -> GaussianAtom<T> {
    GaussianAtom {
        amp: Complex::new(T::one(), T::zero()),
        center: a.center[from..from + n].to_vec(),
        width: a.width[from..from + n].to_vec(),
        modulation: a.modulation[from..from + n].to_vec(),
    }
}

/// Ordinary group convolution on the group of the parent algebra, checked
/// against the twisted convolution. Only valid for the canonical cocycle.
///
/// `F`, `G` are the full inverse transforms of `phi`, `psi`. For sampled
/// `y` the oracle evaluates `(F * G)(y, z) = int F(X) G(X^{-1} Y) dX` with
/// the parent group law, doing the central `z_X` integral in closed form
/// (a Gaussian convolution) and the `x` integral by the midpoint rule on a
/// `z` grid; the `z -> r` transform is again a midpoint sum. The plan's
/// twisted convolution at the same `(y, r)` is the reference.
pub fn rieffel_oracle(
    plan: &DeformedProductPlan<f64>,
    phi: &TestFunction<f64>,
    psi: &TestFunction<f64>,
    samples: usize,
    seed: u64,
) -> Result<RieffelCheck> {
    let omega = plan.cocycle();
    if omega.kind() != CocycleKind::Omega0 {
        return Err(Error::WrongCocycle(
            "the group-convolution oracle applies to the canonical cocycle only".into(),
        ));
    }
    let split = omega.split();
    let (k, m) = (split.quotient_dim(), split.center_dim());
    let hbar = plan.hbar();
    let f = phi.partial_inverse()?;
    let g = psi.partial_inverse()?;
    let big_f = phi.full_fourier_inverse()?;
    let big_g = psi.full_fourier_inverse()?;

    // sample y = x u with x, u drawn from the operands' x-side supports
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xa: Vec<&GaussianAtom<f64>> = f.atoms().iter().chain(g.atoms()).collect();
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let a = xa[rng.gen_range(0..xa.len())];
        (0..k)
            .map(|d| a.center[d] + a.width[d] * rng.gen_range(-1.0..=1.0))
            .collect()
    };
    let ys: Vec<Vec<f64>> = (0..samples.max(1))
        .map(|_| {
            let (x, u) = (draw(&mut rng), draw(&mut rng));
            plan.law().mul(&x, &u)
        })
        .collect();
    let reference = plan.twisted_convolution_at(&f, &g, &ys)?;

    // closed-form z convolutions C_ab(s) = int F_a^z(z) G_b^z(s - z) dz
    let all = vec![true; m];
    let conv: Vec<Vec<GaussianAtom<f64>>> = big_f
        .atoms()
        .iter()
        .map(|a| {
            big_g
                .atoms()
                .iter()
                .map(|b| {
                    let fa = sub_atom(a, k, m).transform(&all, false);
                    let gb = sub_atom(b, k, m).transform(&all, false);
                    fa.product(&gb).transform(&all, true)
                })
                .collect()
        })
        .collect();

    // grids: x as the plan's box with midpoint cells; z wide enough for
    // the convolutions shifted by the central part of the group law
    let grids = plan.grids();
    let parent = split.parent();
    let law = CompiledGroupLaw::new(parent, hbar)?;
    let xs_axes: Vec<(Vec<f64>, f64)> = (0..k)
        .map(|d| midpoints(0.0, grids.x.half_width[d], grids.x.points[d]))
        .collect();
    let xw: f64 = xs_axes.iter().map(|(_, h)| *h).product();
    let xspec_points: Vec<usize> = grids.x.points.clone();
    let nx: usize = xspec_points.iter().product();
    let x_at = |i: usize| -> Vec<f64> {
        let mut idx = i;
        let mut out = vec![0.0; k];
        for d in (0..k).rev() {
            out[d] = xs_axes[d].0[idx % xspec_points[d]];
            idx /= xspec_points[d];
        }
        out
    };
    let central = |x: &[f64], y: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let w = law.mul(&split.tau(&neg), &split.tau(y));
        split.decompose(&w)
    };
    let z = 3.0;
    let mut lz = vec![0.0f64; m];
    let mut band = vec![0.0f64; m];
    for row in &conv {
        for c in row {
            for j in 0..m {
                lz[j] = lz[j].max(c.center[j].abs() + z * c.width[j]);
                band[j] = band[j].max(c.modulation[j].abs() + 4.0 / c.width[j]);
            }
        }
    }
    let mut pmax = vec![0.0f64; m];
    for y in &ys {
        for i in (0..nx).step_by((nx / 512).max(1)) {
            let (_, p) = central(&x_at(i), y);
            for j in 0..m {
                pmax[j] = pmax[j].max(p[j].abs());
            }
        }
    }
    let rgrid = &grids.r;
    let z_axes: Vec<(Vec<f64>, f64)> = (0..m)
        .map(|j| {
            let l = lz[j] + pmax[j];
            let lr = rgrid.center[j].abs() + rgrid.half_width[j];
            midpoints(0.0, l, cells(l, lr + band[j]))
        })
        .collect();
    let z_points: Vec<usize> = z_axes.iter().map(|(v, _)| v.len()).collect();
    let nz: usize = z_points.iter().product();
    let zw: f64 = z_axes.iter().map(|(_, h)| *h).product();
    let z_at = |i: usize| -> Vec<f64> {
        let mut idx = i;
        let mut out = vec![0.0; m];
        for j in (0..m).rev() {
            out[j] = z_axes[j].0[idx % z_points[j]];
            idx /= z_points[j];
        }
        out
    };
    let zs: Vec<Vec<f64>> = (0..nz).map(z_at).collect();
    let rs = rgrid.points_flat();

    let fa = big_f.atoms();
    let ga = big_g.atoms();
    let oracle: Vec<Vec<Complex<f64>>> = ys
        .par_iter()
        .map(|y| {
            let mut fg = vec![zero_c::<f64>(); nz];
            let mut s = vec![0.0; m];
            for i in 0..nx {
                let x = x_at(i);
                let fx: Vec<Complex<f64>> = fa
                    .iter()
                    .map(|a| (0..k).fold(a.amp, |t, d| t * a.factor(d, x[d])))
                    .collect();
                if fx.iter().all(|v| v.norm() < 1e-300) {
                    continue;
                }
                let (u, p) = central(&x, y);
                let gu: Vec<Complex<f64>> = ga
                    .iter()
                    .map(|b| (0..k).fold(b.amp, |t, d| t * b.factor(d, u[d])))
                    .collect();
                for (iz, zv) in zs.iter().enumerate() {
                    for j in 0..m {
                        s[j] = p[j] + zv[j];
                    }
                    let mut acc = zero_c::<f64>();
                    for (a, fv) in fx.iter().enumerate() {
                        for (b, gv) in gu.iter().enumerate() {
                            acc += *fv * *gv * conv[a][b].eval(&s);
                        }
                    }
                    fg[iz] += acc;
                }
            }
            rs.iter()
                .map(|r| {
                    let mut t = zero_c::<f64>();
                    for (iz, zv) in zs.iter().enumerate() {
                        let ph: f64 = zv.iter().zip(r).map(|(a, b)| a * b).sum();
                        t += fg[iz] * e_bar(ph);
                    }
                    t * xw * zw
                })
                .collect()
        })
        .collect();

    let nr = rs.len();
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for (iy, row) in oracle.iter().enumerate() {
        for (ir, v) in row.iter().enumerate() {
            let p = reference[iy * nr + ir];
            diff = diff.max((p - *v).norm());
            scale = scale.max(p.norm());
        }
    }
    Ok(RieffelCheck {
        residual: if scale > 0.0 { diff / scale } else { diff },
        samples: ys.len(),
        x_points: xspec_points,
        z_points,
    })
}

/// `(f *_sigma g)* = g* *_sigma f*` at sampled `y` nodes of the plan's
/// convolution grid. The left side uses the involution formula at `y`,
/// which needs the convolution only at `y^{-1} = -y`. Returns
/// `max |lhs - rhs| / max |rhs|` over the samples and every `r` node.
///
/// A full-grid check costs `|y| |x| |r|` integrand nodes, out of reach on
/// three-dimensional quotients at moderate `h`.
pub fn antihomomorphism_residual(
    plan: &DeformedProductPlan<f64>,
    f: &TestFunction<f64>,
    g: &TestFunction<f64>,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let k = plan.split().quotient_dim();
    let ygrid = &plan.grids().y;
    if !ygrid.is_symmetric() {
        return Err(Error::InvalidInput(
            "the involution needs a y grid symmetric about 0".into(),
        ));
    }
    let (fs, gs) = (crate::quantizer::star(f)?, crate::quantizer::star(g)?);

    // draw y = x u from the operands' supports, snapped to grid nodes
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xa: Vec<&GaussianAtom<f64>> = f.atoms().iter().chain(g.atoms()).collect();
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let a = xa[rng.gen_range(0..xa.len())];
        (0..k)
            .map(|d| a.center[d] + a.width[d] * rng.gen_range(-1.0..=1.0))
            .collect()
    };
    let ys: Vec<Vec<f64>> = (0..samples.max(1))
        .map(|_| {
            let (x, u) = (draw(&mut rng), draw(&mut rng));
            let y = plan.law().mul(&x, &u);
            (0..k)
                .map(|d| {
                    let nodes = ygrid.nodes(d);
                    let i = ((y[d] - nodes[0]) / ygrid.step(d))
                        .round()
                        .clamp(0.0, (nodes.len() - 1) as f64);
                    nodes[i as usize]
                })
                .collect()
        })
        .collect();
    let neg: Vec<Vec<f64>> = ys.iter().map(|y| y.iter().map(|v| -v).collect()).collect();
    let at_neg = plan.twisted_convolution_at(f, g, &neg)?;
    let rhs = plan.twisted_convolution_at(&gs, &fs, &ys)?;

    let rs = plan.grids().r.points_flat();
    let nr = rs.len();
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for (i, (y, yn)) in ys.iter().zip(&neg).enumerate() {
        for (j, r) in rs.iter().enumerate() {
            let s = crate::bch::sigma(plan.cocycle(), plan.hbar(), y, yn, r)?;
            let lhs = (at_neg[i * nr + j] * s).conj();
            diff = diff.max((lhs - rhs[i * nr + j]).norm());
            scale = scale.max(rhs[i * nr + j].norm());
        }
    }
    Ok(diff / scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CocycleCheck {
    pub samples: usize,
    /// `max |R(x,y) + R(xy,z) - R(y,z) - R(x,yz)|`.
    pub group_cocycle: f64,
    /// Same identity for `sigma`, multiplicatively.
    pub sigma: f64,
    /// `max ||sigma| - 1|`.
    pub unit: f64,
}

/// Samples `(x, y, z, r, h)` uniformly from `[-1.5, 1.5]` boxes and
/// `h` from `[0, 1]`, and evaluates the group-cocycle identities through
/// the BCH series.
pub fn cocycle_identity_check(
    omega: &Cocycle<f64>,
    samples: usize,
    seed: u64,
) -> Result<CocycleCheck> {
    use crate::bch::{group_mul, r_cocycle, sigma};
    let split = omega.split();
    let (k, m) = (split.quotient_dim(), split.center_dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect() };
    let mut out = CocycleCheck {
        samples,
        group_cocycle: 0.0,
        sigma: 0.0,
        unit: 0.0,
    };
    for _ in 0..samples {
        let (x, y, z, r) = (draw(k), draw(k), draw(k), draw(m));
        let h = (draw(1)[0] + 1.5) / 3.0;
        let xy = group_mul(split, h, &x, &y)?;
        let yz = group_mul(split, h, &y, &z)?;
        let rv =
            |a: &[f64], b: &[f64]| -> Result<f64> { r_cocycle(omega, h, a, b)?.eval(omega, &r) };
        let res = rv(&x, &y)? + rv(&xy, &z)? - rv(&y, &z)? - rv(&x, &yz)?;
        out.group_cocycle = out.group_cocycle.max(res.abs());
        let sg = |a: &[f64], b: &[f64]| sigma(omega, h, a, b, &r);
        let (a, b) = (sg(&x, &y)?, sg(&xy, &z)?);
        let d = a * b - sg(&y, &z)? * sg(&x, &yz)?;
        out.sigma = out.sigma.max(d.norm());
        out.unit = out
            .unit
            .max((a.norm() - 1.0).abs())
            .max((b.norm() - 1.0).abs());
    }
    Ok(out)
}
