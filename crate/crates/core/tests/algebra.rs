use nilquant::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn split(name: &str) -> Arc<CentralSplitF64> {
    Arc::new(CentralSplit::new(&catalog(name).unwrap()).unwrap())
}

fn sin_total(s: &Arc<CentralSplitF64>) -> CocycleF64 {
    let p = Cocycle::perturbation(s, vec![(0, 1, ScalarFieldExpr::lin(vec![1.0]).sin())]).unwrap();
    Cocycle::total(&Cocycle::omega0(s), &p).unwrap()
}

fn vec_in(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn catalog_structure_constants_satisfy_jacobi() {
    for name in ["heisenberg3", "engel4", "filiform(5)", "abelian(3)"] {
        assert!(
            catalog::<f64>(name).unwrap().jacobi_residual() < 1e-12,
            "{name}"
        );
    }
}

#[test]
fn rho_tau_and_reassembly() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for name in ["heisenberg3", "engel4"] {
        let s = split(name);
        let w0 = Cocycle::omega0(&s);
        let (k, m) = (s.quotient_dim(), s.center_dim());
        for _ in 0..100 {
            let (x, y) = (vec_in(&mut rng, k), vec_in(&mut rng, k));
            let h: f64 = rng.gen_range(0.0..1.0);
            assert!(max_diff(&s.rho(&s.tau(&x)), &x) < 1e-12);
            // S on h, split into (x *_h y, R_h(x, y; .))
            let whole = bch_full(s.parent(), h, &s.tau(&x), &s.tau(&y)).unwrap();
            let (u, z) = s.decompose(&whole);
            assert!(max_diff(&u, &group_mul(&s, h, &x, &y).unwrap()) < 1e-10);
            let rc = r_cocycle(&w0, h, &x, &y).unwrap();
            for c in 0..m {
                let mut r = vec![0.0; m];
                r[c] = 1.0;
                assert!((rc.eval(&w0, &r).unwrap() - z[c]).abs() < 1e-10, "{name}");
            }
        }
    }
}

#[test]
fn group_law_associative_with_exact_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for name in ["heisenberg3", "engel4", "filiform(5)"] {
        let alg = catalog::<f64>(name).unwrap();
        let n = alg.dim();
        for h in [0.0, 0.1, 1.0] {
            for _ in 0..200 {
                let (x, y, z) = (
                    vec_in(&mut rng, n),
                    vec_in(&mut rng, n),
                    vec_in(&mut rng, n),
                );
                let left = bch_full(&alg, h, &bch_full(&alg, h, &x, &y).unwrap(), &z).unwrap();
                let right = bch_full(&alg, h, &x, &bch_full(&alg, h, &y, &z).unwrap()).unwrap();
                assert!(max_diff(&left, &right) < 1e-10, "{name} h={h}");
                let e = bch_full(&alg, h, &x, &group_inv(&x)).unwrap();
                assert!(e.iter().all(|v| *v == 0.0), "{name}: {e:?}");
            }
        }
    }
}

#[test]
fn engel_r_closed_form() {
    let s = split("engel4");
    let w0 = Cocycle::omega0(&s);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let (x, y) = (vec_in(&mut rng, 3), vec_in(&mut rng, 3));
        let r = [rng.gen_range(-2.0..2.0)];
        let h: f64 = rng.gen_range(0.0..1.5);
        let got = r_cocycle(&w0, h, &x, &y).unwrap().eval(&w0, &r).unwrap();
        let expect = r[0]
            * (h / 2.0 * (x[0] * y[2] - x[2] * y[0])
                + h * h / 12.0
                    * (x[0] * (x[0] * y[1] - x[1] * y[0]) + y[0] * (y[0] * x[1] - y[1] * x[0])));
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
    }
}

#[test]
fn group_cocycle_and_sigma_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for name in ["heisenberg3", "engel4"] {
        let s = split(name);
        let (k, m) = (s.quotient_dim(), s.center_dim());
        for w in [Cocycle::omega0(&s), sin_total(&s)] {
            for _ in 0..200 {
                let (x, y, z) = (
                    vec_in(&mut rng, k),
                    vec_in(&mut rng, k),
                    vec_in(&mut rng, k),
                );
                let r = vec_in(&mut rng, m);
                let h = rng.gen_range(0.0..1.0);
                let xy = group_mul(&s, h, &x, &y).unwrap();
                let yz = group_mul(&s, h, &y, &z).unwrap();
                let rv =
                    |a: &[f64], b: &[f64]| r_cocycle(&w, h, a, b).unwrap().eval(&w, &r).unwrap();
                let res = rv(&x, &y) + rv(&xy, &z) - rv(&y, &z) - rv(&x, &yz);
                assert!(res.abs() < 1e-10, "{name}: {res}");
                let sg = |a: &[f64], b: &[f64]| sigma(&w, h, a, b, &r).unwrap();
                let d = sg(&x, &y) * sg(&xy, &z) - sg(&y, &z) * sg(&x, &yz);
                assert!(d.norm() < 1e-9, "{name}: {d}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sigma_is_unit_and_trivial_on_inverses(
        x in prop::collection::vec(-2.0f64..2.0, 3),
        y in prop::collection::vec(-2.0f64..2.0, 3),
        r in -3.0f64..3.0,
        h in 0.0f64..1.0,
    ) {
        let s = split("engel4");
        let w = sin_total(&s);
        let v = sigma(&w, h, &x, &y, &[r]).unwrap();
        prop_assert!((v.norm() - 1.0).abs() < 1e-12);
        let inv = sigma(&w, h, &x, &group_inv(&x), &[r]).unwrap();
        prop_assert_eq!(inv.re, 1.0);
        prop_assert_eq!(inv.im, 0.0);
    }

    #[test]
    fn compiled_law_matches_series(
        x in prop::collection::vec(-2.0f64..2.0, 3),
        y in prop::collection::vec(-2.0f64..2.0, 3),
        h in 0.0f64..1.5,
    ) {
        let s = split("engel4");
        let law = CompiledGroupLaw::new(s.quotient(), h).unwrap();
        let direct = group_mul(&s, h, &x, &y).unwrap();
        prop_assert!(max_diff(&law.mul(&x, &y), &direct) < 1e-12);
    }

    #[test]
    fn zero_hbar_is_addition(
        x in prop::collection::vec(-5.0f64..5.0, 4),
        y in prop::collection::vec(-5.0f64..5.0, 4),
    ) {
        let alg = catalog::<f64>("engel4").unwrap();
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        prop_assert_eq!(bch_full(&alg, 0.0, &x, &y).unwrap(), sum);
    }
}

#[test]
fn split_dual_round_trip_and_pairing() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for name in ["heisenberg3", "engel4", "filiform(5)"] {
        let s = split(name);
        let (k, m) = (s.quotient_dim(), s.center_dim());
        for _ in 0..50 {
            let (x, z) = (vec_in(&mut rng, k), vec_in(&mut rng, m));
            let (q, r) = (vec_in(&mut rng, k), vec_in(&mut rng, m));
            let mu = s.join_dual(&q, &r);
            let (q2, r2) = s.split_dual(&mu);
            assert!(max_diff(&q, &q2) < 1e-12 && max_diff(&r, &r2) < 1e-12);
            let big: Vec<f64> = s
                .tau(&x)
                .iter()
                .zip(s.iota(&z))
                .map(|(a, b)| a + b)
                .collect();
            let lhs: f64 = big.iter().zip(&mu).map(|(a, b)| a * b).sum();
            let rhs: f64 = x
                .iter()
                .zip(&q)
                .chain(z.iter().zip(&r))
                .map(|(a, b)| a * b)
                .sum();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
