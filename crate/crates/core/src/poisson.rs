//! The linear, cocycle-perturbed and central-extension Poisson brackets,
//! evaluated pointwise on atom sums, plus Jacobi and Leibniz residuals.

use crate::cocycle::{Cocycle, CocycleKind};
use crate::error::{check_dim, Error, Result};
use crate::lie::CentralSplit;
use crate::scalar::Scalar;
use crate::schwartz::{Side, TestFunction};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Samples are kept where every atom is at least this fraction of its peak.
pub const SAMPLE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BracketMode {
    /// `<[d phi, d psi]_h, mu>`.
    #[serde(rename = "linear")]
    Linear,
    /// Linear bracket plus `W(rho d phi, rho d psi; r)`.
    #[serde(rename = "Omega")]
    Perturbed,
    /// `<[rho d phi, rho d psi]_k, q> + w(rho d phi, rho d psi; r)`.
    #[serde(rename = "omega")]
    Extended,
}

#[derive(Debug, Clone)]
pub struct PoissonContext<T> {
    split: Arc<CentralSplit<T>>,
    cocycle: Option<Cocycle<T>>,
    mode: BracketMode,
}

type C<T> = Complex<T>;

impl<T: Scalar> PoissonContext<T> {
    pub fn linear(split: &Arc<CentralSplit<T>>) -> Self {
        PoissonContext {
            split: split.clone(),
            cocycle: None,
            mode: BracketMode::Linear,
        }
    }

    /// `{,}_W` for a perturbation `W`.
    pub fn perturbed(omega: &Cocycle<T>) -> Result<Self> {
        if omega.kind() != CocycleKind::Perturbation {
            return Err(Error::InvalidInput(format!(
                "perturbed bracket needs a perturbation cocycle, got {:?}",
                omega.kind()
            )));
        }
        Ok(PoissonContext {
            split: omega.split().clone(),
            cocycle: Some(omega.clone()),
            mode: BracketMode::Perturbed,
        })
    }

    /// `{,}_w` for `w = w0 + W` (or `w0` alone).
    pub fn extended(omega: &Cocycle<T>) -> Result<Self> {
        if omega.kind() == CocycleKind::Perturbation {
            return Err(Error::InvalidInput(
                "extended bracket needs w0 or a sum cocycle".into(),
            ));
        }
        Ok(PoissonContext {
            split: omega.split().clone(),
            cocycle: Some(omega.clone()),
            mode: BracketMode::Extended,
        })
    }

    pub fn mode(&self) -> BracketMode {
        self.mode
    }

    pub fn split(&self) -> &Arc<CentralSplit<T>> {
        &self.split
    }

    fn check_operand(&self, f: &TestFunction<T>) -> Result<()> {
        f.expect_side(Side::Qr)?;
        check_dim(self.split.quotient_dim(), f.k())?;
        check_dim(self.split.center_dim(), f.m())
    }

    /// Bracket at `mu` (dual-basis coordinates of `g`).
    pub fn bracket_at(
        &self,
        phi: &TestFunction<T>,
        psi: &TestFunction<T>,
        mu: &[T],
    ) -> Result<C<T>> {
        self.check_operand(phi)?;
        self.check_operand(psi)?;
        check_dim(self.split.dim(), mu.len())?;
        let (q, r) = self.split.split_dual(mu);
        Ok(self.bracket_qr(phi, psi, &q, &r))
    }

    /// Bracket at split coordinates `(q, r)`.
    pub fn bracket_qr(
        &self,
        phi: &TestFunction<T>,
        psi: &TestFunction<T>,
        q: &[T],
        r: &[T],
    ) -> C<T> {
        let u: Vec<T> = q.iter().chain(r).copied().collect();
        let (_, ga) = phi.value_and_gradient(&u);
        let (_, gb) = psi.value_and_gradient(&u);
        self.bracket_from_grads(&ga, &gb, q, r)
    }

    /// Bracket from gradients given in split coordinates `(d_q, d_r)`.
    pub fn bracket_from_grads(&self, ga: &[C<T>], gb: &[C<T>], q: &[T], r: &[T]) -> C<T> {
        let k = self.split.quotient_dim();
        match self.mode {
            BracketMode::Linear => self.linear_part(ga, gb, q, r),
            BracketMode::Perturbed => {
                let w = self
                    .cocycle
                    .as_ref()
                    .expect("perturbed mode carries a cocycle");
                self.linear_part(ga, gb, q, r)
                    + w.eval_complex(&ga[..k], &gb[..k], r)
                        .expect("dimensions checked")
            }
            BracketMode::Extended => {
                let w = self
                    .cocycle
                    .as_ref()
                    .expect("extended mode carries a cocycle");
                let br = self.split.quotient().bracket_in(&ga[..k], &gb[..k]);
                let pair = br
                    .iter()
                    .zip(q)
                    .fold(C::new(T::zero(), T::zero()), |s, (b, qi)| s + *b * *qi);
                pair + w
                    .eval_complex(&ga[..k], &gb[..k], r)
                    .expect("dimensions checked")
            }
        }
    }

    fn linear_part(&self, ga: &[C<T>], gb: &[C<T>], q: &[T], r: &[T]) -> C<T> {
        let da = self.to_h(ga);
        let db = self.to_h(gb);
        let br = self.split.parent().bracket_in(&da, &db);
        let mu = self.split.join_dual(q, r);
        br.iter()
            .zip(&mu)
            .fold(C::new(T::zero(), T::zero()), |s, (b, m)| s + *b * *m)
    }

    // split-coordinate gradient -> h basis coordinates
    fn to_h(&self, g: &[C<T>]) -> Vec<C<T>> {
        let n = self.split.dim();
        let mut out = vec![C::new(T::zero(), T::zero()); n];
        let basis = self
            .split
            .complement_basis()
            .iter()
            .chain(self.split.center_basis());
        for (gi, v) in g.iter().zip(basis) {
            for (o, vi) in out.iter_mut().zip(v) {
                *o += *gi * *vi;
            }
        }
        out
    }

    /// `{a, {b, c}}` with the inner bracket differentiated by central
    /// differences of step `h`.
    fn outer_fd(
        &self,
        a: &TestFunction<T>,
        b: &TestFunction<T>,
        c: &TestFunction<T>,
        u: &[T],
        h: T,
    ) -> C<T> {
        let k = self.split.quotient_dim();
        let n = u.len();
        let inner = |p: &[T]| self.bracket_qr(b, c, &p[..k], &p[k..]);
        let mut g = vec![C::new(T::zero(), T::zero()); n];
        let mut p = u.to_vec();
        for d in 0..n {
            p[d] = u[d] + h;
            let up = inner(&p);
            p[d] = u[d] - h;
            let dn = inner(&p);
            p[d] = u[d];
            g[d] = (up - dn) / (T::lit(2.0) * h);
        }
        let (_, ga) = a.value_and_gradient(u);
        self.bracket_from_grads(&ga, &g, &u[..k], &u[k..])
    }

    /// Max over `samples` (dual-basis `mu`) of the cyclic Jacobi sum.
    pub fn jacobi_residual(
        &self,
        f1: &TestFunction<T>,
        f2: &TestFunction<T>,
        f3: &TestFunction<T>,
        samples: &[Vec<T>],
        h_fd: T,
    ) -> Result<T> {
        for f in [f1, f2, f3] {
            self.check_operand(f)?;
        }
        if !(h_fd > T::zero()) {
            return Err(Error::InvalidInput(
                "finite-difference step must be positive".into(),
            ));
        }
        let mut worst = T::zero();
        for mu in samples {
            check_dim(self.split.dim(), mu.len())?;
            let (q, r) = self.split.split_dual(mu);
            let u: Vec<T> = q.into_iter().chain(r).collect();
            let j = self.outer_fd(f1, f2, f3, &u, h_fd)
                + self.outer_fd(f2, f3, f1, &u, h_fd)
                + self.outer_fd(f3, f1, f2, &u, h_fd);
            worst = worst.max(j.norm());
        }
        Ok(worst)
    }

    /// Max of `|{phi, psi chi} - {phi, psi} chi - psi {phi, chi}|`.
    pub fn leibniz_residual(
        &self,
        phi: &TestFunction<T>,
        psi: &TestFunction<T>,
        chi: &TestFunction<T>,
        samples: &[Vec<T>],
    ) -> Result<T> {
        let prod = psi.mul(chi)?;
        let mut worst = T::zero();
        for mu in samples {
            let lhs = self.bracket_at(phi, &prod, mu)?;
            let (q, r) = self.split.split_dual(mu);
            let u: Vec<T> = q.iter().chain(&r).copied().collect();
            let rhs = self.bracket_qr(phi, psi, &q, &r) * chi.eval_unchecked(&u)
                + psi.eval_unchecked(&u) * self.bracket_qr(phi, chi, &q, &r);
            worst = worst.max((lhs - rhs).norm());
        }
        Ok(worst)
    }
}

/// `count` points `mu` (dual-basis coordinates) where every atom of every
/// function is at least [`SAMPLE_FLOOR`] of its peak.
pub fn sample_support<T: Scalar>(
    split: &CentralSplit<T>,
    funcs: &[&TestFunction<T>],
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<T>>> {
    let atoms: Vec<_> = funcs.iter().flat_map(|f| f.atoms()).collect();
    let first = atoms
        .first()
        .ok_or_else(|| Error::InvalidInput("no atoms to sample around".into()))?;
    let limit = (1.0 / SAMPLE_FLOOR).ln() / std::f64::consts::PI;
    let reach = limit.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0usize;
    while out.len() < count {
        tries += 1;
        if tries > 100_000 * count.max(1) {
            return Err(Error::InvalidInput(
                "operands share no region where all atoms are significant".into(),
            ));
        }
        let u: Vec<T> = first
            .center
            .iter()
            .zip(&first.width)
            .map(|(c, w)| *c + *w * T::lit(reach * rng.gen_range(-1.0..1.0)))
            .collect();
        if atoms.iter().all(|a| a.spread(&u).to_f64_lossy() <= limit) {
            let k = split.quotient_dim();
            out.push(split.join_dual(&u[..k], &u[k..]));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ScalarFieldExpr;
    use crate::lie::catalog;
    use crate::schwartz::GaussianAtom;

    fn split(name: &str) -> Arc<CentralSplit<f64>> {
        Arc::new(CentralSplit::new(&catalog(name).unwrap()).unwrap())
    }

    fn gauss(
        center: Vec<f64>,
        width: Vec<f64>,
        modulation: Vec<f64>,
        k: usize,
    ) -> TestFunction<f64> {
        let m = center.len() - k;
        let a = GaussianAtom::new(Complex::new(1.0, 0.3), center, width, modulation).unwrap();
        TestFunction::new(Side::Qr, k, m, vec![a]).unwrap()
    }

    #[test]
    fn abelian_bracket_vanishes() {
        let s = split("abelian(3)");
        let ctx = PoissonContext::linear(&s);
        let f = gauss(vec![0.1, 0.2, 0.3], vec![1.0; 3], vec![0.2, 0.0, -0.1], 0);
        let g = gauss(vec![0.0, -0.2, 0.1], vec![0.8; 3], vec![0.0; 3], 0);
        assert_eq!(
            ctx.bracket_at(&f, &g, &[0.3, 0.1, -0.2]).unwrap(),
            Complex::new(0.0, 0.0)
        );
    }

    #[test]
    fn windowed_coordinates_give_center_pairing() {
        // q_i ~ sin(2 pi eps q_i) / (2 pi eps) under a very wide window
        let s = split("heisenberg3");
        let ctx = PoissonContext::linear(&s);
        let (eps, wide) = (3e-4, 1e4);
        let coord = |i: usize| {
            let amp = Complex::new(0.0, -1.0 / (4.0 * std::f64::consts::PI * eps));
            let mut xi = vec![0.0; 3];
            xi[i] = eps;
            let plus = GaussianAtom::new(amp, vec![0.0; 3], vec![wide; 3], xi.clone()).unwrap();
            let minus = GaussianAtom::new(
                -amp,
                vec![0.0; 3],
                vec![wide; 3],
                xi.iter().map(|v| -v).collect(),
            )
            .unwrap();
            TestFunction::new(Side::Qr, 2, 1, vec![plus, minus]).unwrap()
        };
        let mu = [0.4, -0.3, 1.2];
        let b = ctx.bracket_at(&coord(0), &coord(1), &mu).unwrap();
        assert!((b - Complex::new(1.2, 0.0)).norm() < 1e-6, "{b}");
    }

    #[test]
    fn extended_equals_perturbed() {
        let s = split("heisenberg3");
        let pert =
            Cocycle::perturbation(&s, vec![(0, 1, ScalarFieldExpr::lin(vec![1.0]).sin())]).unwrap();
        let total = Cocycle::total(&Cocycle::omega0(&s), &pert).unwrap();
        let a = PoissonContext::perturbed(&pert).unwrap();
        let b = PoissonContext::extended(&total).unwrap();
        let f = gauss(
            vec![0.2, -0.1, 0.5],
            vec![0.9, 1.1, 0.7],
            vec![0.3, 0.0, -0.2],
            2,
        );
        let g = gauss(
            vec![-0.3, 0.4, 0.1],
            vec![1.2, 0.8, 1.0],
            vec![0.0, 0.5, 0.1],
            2,
        );
        let mu = [0.1, 0.2, 0.7];
        let d = a.bracket_at(&f, &g, &mu).unwrap() - b.bracket_at(&f, &g, &mu).unwrap();
        assert!(d.norm() < 1e-12);
    }

    #[test]
    fn mode_kind_checked() {
        let s = split("heisenberg3");
        assert!(PoissonContext::perturbed(&Cocycle::omega0(&s)).is_err());
        assert!(PoissonContext::extended(&Cocycle::zero(&s)).is_err());
    }

    #[test]
    fn samples_stay_in_support() {
        let s = split("heisenberg3");
        let f = gauss(vec![0.2, -0.1, 0.5], vec![0.9, 1.1, 0.7], vec![0.0; 3], 2);
        let g = gauss(vec![-0.3, 0.4, 0.1], vec![1.2, 0.8, 1.0], vec![0.0; 3], 2);
        let pts = sample_support(&s, &[&f, &g], 10, 7).unwrap();
        let limit = (1e6f64).ln() / std::f64::consts::PI;
        for mu in pts {
            for a in f.atoms().iter().chain(g.atoms()) {
                assert!(a.spread(&mu) <= limit);
            }
        }
    }
}
