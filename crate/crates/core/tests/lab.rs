use nilquant::lab::{loglog_slope, validate_hbars};
use nilquant::*;
use num_complex::Complex;
use std::sync::Arc;

fn split(name: &str) -> Arc<CentralSplitF64> {
    Arc::new(CentralSplit::new(&catalog(name).unwrap()).unwrap())
}

fn sin_pert(s: &Arc<CentralSplitF64>) -> CocycleF64 {
    Cocycle::perturbation(s, vec![(0, 1, ScalarFieldExpr::lin(vec![1.0]).sin())]).unwrap()
}

fn atom(c: Vec<f64>, w: Vec<f64>, m: Vec<f64>, a: (f64, f64)) -> GaussianAtom<f64> {
    GaussianAtom::new(Complex::new(a.0, a.1), c, w, m).unwrap()
}

fn operand(k: usize, s: f64) -> TestFunctionF64 {
    let mut c = vec![0.3 * s; k + 1];
    c[k] = 0.2;
    let a1 = atom(
        c.clone(),
        vec![1.0; k + 1],
        vec![0.2 * s; k + 1],
        (1.0, 0.0),
    );
    c[0] = -0.4 * s;
    let a2 = atom(c, vec![0.8; k + 1], vec![-0.1; k + 1], (0.3, 0.5 * s));
    TestFunction::new(Side::Qr, k, 1, vec![a1, a2]).unwrap()
}

#[test]
fn defect_is_swap_invariant() {
    let s = split("heisenberg3");
    let w = Cocycle::total(&Cocycle::omega0(&s), &sin_pert(&s)).unwrap();
    let (phi, psi) = (operand(2, 1.0), operand(2, -1.0));
    let plan = DeformedProductPlan::auto(&w, 0.1, &[&phi, &psi], &GridRules::default()).unwrap();
    let a = commutator_defect_grid(&plan, &phi, &psi).unwrap();
    let b = commutator_defect_grid(&plan, &psi, &phi).unwrap();
    let d = a.zip_with(&b, |u, v| u + v).unwrap().norm(NormKind::Sup);
    assert!(d < 1e-12, "{d:e}");
    let (da, db) = (
        commutator_defect(&plan, &phi, &psi).unwrap(),
        commutator_defect(&plan, &psi, &phi).unwrap(),
    );
    assert!((da.sup_defect - db.sup_defect).abs() < 1e-12);
}

#[test]
fn heisenberg_defect_ratio() {
    let s = split("heisenberg3");
    let w = Cocycle::omega0(&s);
    let (phi, psi) = (operand(2, 1.0), operand(2, -1.0));
    let d = |h: f64| {
        let plan = DeformedProductPlan::auto(&w, h, &[&phi, &psi], &GridRules::default()).unwrap();
        commutator_defect(&plan, &phi, &psi).unwrap().sup_defect
    };
    let ratio = d(0.1) / d(0.0125);
    assert!(ratio >= 6.0, "{ratio}");
}

#[test]
fn heisenberg_sweep_report() {
    let s = split("heisenberg3");
    let w = Cocycle::total(&Cocycle::omega0(&s), &sin_pert(&s)).unwrap();
    let (phi, psi) = (operand(2, 1.0), operand(2, -1.0));
    let rep = sweep(
        &w,
        &phi,
        &psi,
        &[0.0125, 0.1, 0.025, 0.05],
        &SweepOptions::default(),
    )
    .unwrap();
    assert_eq!(rep.hbar_values, vec![0.1, 0.05, 0.025, 0.0125]);
    assert!(rep.sup_strictly_decreasing && rep.l1_strictly_decreasing);
    assert!(rep.slope.sup.unwrap() >= 0.9 && rep.slope.l1.unwrap() >= 0.9);
    assert!(rep.slope_shift().unwrap() < 0.1);
    let moyal = rep
        .oracle_residuals
        .iter()
        .find(|o| o.name == "moyal")
        .unwrap();
    assert!(moyal.residual < 1e-5);
    assert!(rep.oracle_residuals.iter().all(|o| o.name != "rieffel"));
    let csv = rep.to_csv();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("hbar,sup_defect,l1_defect\n1e-1,"));
    let json = serde_json::to_string(&rep).unwrap();
    let back: SweepReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, rep);
}

#[test]
fn sweep_preconditions() {
    let s = split("heisenberg3");
    let w = Cocycle::omega0(&s);
    let (phi, psi) = (operand(2, 1.0), operand(2, -1.0));
    let opts = SweepOptions::default();
    assert!(matches!(
        sweep(&w, &phi, &psi, &[0.1], &opts),
        Err(Error::InsufficientSweep(_))
    ));
    assert!(matches!(
        sweep(&w, &phi, &psi, &[0.1, 0.09, 0.08, 0.07], &opts),
        Err(Error::InsufficientSweep(_))
    ));
    assert!(matches!(
        sweep(&w, &phi, &psi, &[0.1, 0.05, 0.0, 0.0125], &opts),
        Err(Error::InvalidInput(_))
    ));
    assert!(sweep(
        &sin_pert(&s),
        &phi,
        &psi,
        &[0.1, 0.05, 0.025, 0.0125],
        &opts
    )
    .is_err());
    assert_eq!(
        validate_hbars(&[0.1, 0.1, 0.05, 0.025, 0.0125])
            .unwrap()
            .len(),
        4
    );
}

#[test]
fn self_commutator_hits_the_floor() {
    let s = split("heisenberg3");
    let w = Cocycle::omega0(&s);
    let phi = operand(2, 1.0);
    let opts = SweepOptions {
        oracles: false,
        ..SweepOptions::default()
    };
    let r = sweep(&w, &phi, &phi, &[0.1, 0.05, 0.025, 0.0125], &opts);
    assert!(matches!(r, Err(Error::BudgetFloorReached(_))), "{r:?}");
}

#[test]
fn slope_fit() {
    let h = [0.1, 0.05, 0.025];
    let y: Vec<f64> = h.iter().map(|v| 3.0 * v * v).collect();
    assert!((loglog_slope(&h, &y).unwrap() - 2.0).abs() < 1e-12);
    assert!(loglog_slope(&h[..1], &y[..1]).is_none());
}

#[test]
fn moyal_oracle_agrees() {
    let s = split("heisenberg3");
    let w = Cocycle::omega0(&s);
    let (phi, psi) = (operand(2, 1.0), operand(2, -1.0));
    for h in [0.5, 1.0] {
        let plan = DeformedProductPlan::auto(&w, h, &[&phi, &psi], &GridRules::default()).unwrap();
        let r = moyal_residual(&plan, &phi, &psi).unwrap();
        assert!(r < 1e-5, "h={h}: {r:e}");
    }
}

#[test]
fn moyal_slices() {
    let s = split("heisenberg3");
    let w = Cocycle::omega0(&s);
    let (phi, psi) = (operand(2, 1.0), operand(2, -1.0));
    let q = QuadratureSpec::symmetric(vec![2.0, 2.0], vec![17, 17]).unwrap();
    // r = 0: no phase, pointwise product
    let at0 = moyal_oracle(&w, &phi, &psi, 1.0, &[0.0], &q).unwrap();
    for (i, v) in at0.iter().enumerate() {
        let mut u = q.point(i);
        u.push(0.0);
        let want = phi.eval(&u).unwrap() * psi.eval(&u).unwrap();
        assert!((v - want).norm() < 1e-8);
    }
    // small h: commutator / h follows the bracket at this leaf
    let (h, r) = (1e-3, 0.7);
    let ab = moyal_oracle(&w, &phi, &psi, h, &[r], &q).unwrap();
    let ba = moyal_oracle(&w, &psi, &phi, h, &[r], &q).unwrap();
    let ctx = PoissonContext::extended(&w).unwrap();
    let i2pi = Complex::new(0.0, 1.0 / (2.0 * std::f64::consts::PI));
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for i in 0..q.len() {
        let b = i2pi * ctx.bracket_qr(&phi, &psi, &q.point(i), &[r]);
        diff = diff.max(((ab[i] - ba[i]) / h - b).norm());
        scale = scale.max(b.norm());
    }
    assert!(diff / scale < 1e-2, "{:e}", diff / scale);
    let e = split("engel4");
    let (f3, g3) = (operand(3, 1.0), operand(3, -1.0));
    let q3 = QuadratureSpec::symmetric(vec![1.0; 3], vec![16; 3]).unwrap();
    assert!(matches!(
        moyal_oracle(&Cocycle::omega0(&e), &f3, &g3, 0.5, &[0.0], &q3),
        Err(Error::WrongAlgebra(_))
    ));
}

#[test]
fn group_convolution_oracle_agrees() {
    for (name, h, tol) in [
        ("heisenberg3", 1.0, 1e-5),
        ("heisenberg3", 0.5, 1e-5),
        ("heisenberg3", 0.0, 1e-6),
        ("engel4", 0.5, 1e-4),
    ] {
        let s = split(name);
        let k = s.quotient_dim();
        let (phi, psi) = (operand(k, 1.0), operand(k, -1.0));
        let plan = DeformedProductPlan::auto(
            &Cocycle::omega0(&s),
            h,
            &[&phi, &psi],
            &GridRules::default(),
        )
        .unwrap();
        let check = rieffel_oracle(&plan, &phi, &psi, 8, 5).unwrap();
        assert!(check.residual < tol, "{name} h={h}: {:e}", check.residual);
    }
    let s = split("heisenberg3");
    let w = Cocycle::total(&Cocycle::omega0(&s), &sin_pert(&s)).unwrap();
    let (phi, psi) = (operand(2, 1.0), operand(2, -1.0));
    let plan = DeformedProductPlan::auto(&w, 1.0, &[&phi, &psi], &GridRules::default()).unwrap();
    assert!(matches!(
        rieffel_oracle(&plan, &phi, &psi, 4, 5),
        Err(Error::WrongCocycle(_))
    ));
}
