//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//! Every tolerance and time budget is pinned below.

use nilquant::poisson::sample_support;
use nilquant::*;
use nilquant_cli::{load, run};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

const JACOBI_CATALOG: f64 = 1e-12;
const RHO_TAU: f64 = 1e-12;
const REASSEMBLY: f64 = 1e-10;
const ASSOCIATIVITY: f64 = 1e-10;
const ENGEL_R: f64 = 1e-12;
const GROUP_COCYCLE: f64 = 1e-10;
const SIGMA_IDENTITY: f64 = 1e-9;
const SKEW: f64 = 1e-12;
const LEIBNIZ: f64 = 1e-8;
const REALITY: f64 = 1e-10;
const MODE_EQUIVALENCE: f64 = 1e-9;
const JACOBI_FD: f64 = 5e-5;
const JACOBI_STEP: f64 = 1e-4;
const JACOBI_RATIO: (f64, f64) = (3.0, 5.0);
const POINTWISE: f64 = 1e-6;
const INVOLUTIVITY: f64 = 1e-12;
const ANTIHOMOMORPHISM: f64 = 1e-5;
const MOYAL: f64 = 1e-5;
const RIEFFEL_HEISENBERG: f64 = 1e-5;
const RIEFFEL_ENGEL: f64 = 1e-4;
const MIN_SLOPE: f64 = 0.9;
const MAX_SLOPE_SHIFT: f64 = 0.1;

struct Measure {
    label: String,
    ok: bool,
    text: String,
}

fn below(label: &str, value: f64, limit: f64) -> Measure {
    Measure {
        label: label.into(),
        ok: value < limit,
        text: format!("{value:.3e} < {limit:.0e}"),
    }
}

fn holds(label: &str, ok: bool) -> Measure {
    Measure {
        label: label.into(),
        ok,
        text: ok.to_string(),
    }
}

fn split(name: &str) -> Arc<CentralSplitF64> {
    Arc::new(CentralSplit::new(&catalog(name).unwrap()).unwrap())
}

fn sin_total(s: &Arc<CentralSplitF64>) -> CocycleF64 {
    Cocycle::total(&Cocycle::omega0(s), &sin_pert(s)).unwrap()
}

fn sin_pert(s: &Arc<CentralSplitF64>) -> CocycleF64 {
    Cocycle::perturbation(s, vec![(0, 1, ScalarFieldExpr::lin(vec![1.0]).sin())]).unwrap()
}

fn draw(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn operand(k: usize, s: f64) -> TestFunctionF64 {
    let atom = |c: Vec<f64>, w: f64, m: f64, a: (f64, f64)| {
        GaussianAtom::new(Complex::new(a.0, a.1), c, vec![w; k + 1], vec![m; k + 1]).unwrap()
    };
    let mut c = vec![0.3 * s; k + 1];
    c[k] = 0.2;
    let a1 = atom(c.clone(), 1.0, 0.2 * s, (1.0, 0.0));
    c[0] = -0.4 * s;
    let a2 = atom(c, 0.8, -0.1, (0.3, 0.5 * s));
    TestFunction::new(Side::Qr, k, 1, vec![a1, a2]).unwrap()
}

fn criterion_1() -> Vec<Measure> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut jac, mut rt, mut re) = (0.0f64, 0.0f64, 0.0f64);
    for name in ["heisenberg3", "engel4"] {
        let s = split(name);
        jac = jac.max(s.parent().jacobi_residual());
        let w0 = Cocycle::omega0(&s);
        let (k, m) = (s.quotient_dim(), s.center_dim());
        for _ in 0..100 {
            let (x, y) = (draw(&mut rng, k), draw(&mut rng, k));
            rt = rt.max(max_diff(&s.rho(&s.tau(&x)), &x));
            let h = 1.0;
            let whole = bch_full(s.parent(), h, &s.tau(&x), &s.tau(&y)).unwrap();
            let (u, z) = s.decompose(&whole);
            re = re.max(max_diff(&u, &group_mul(&s, h, &x, &y).unwrap()));
            let rc = r_cocycle(&w0, h, &x, &y).unwrap();
            for c in 0..m {
                let mut r = vec![0.0; m];
                r[c] = 1.0;
                re = re.max((rc.eval(&w0, &r).unwrap() - z[c]).abs());
            }
        }
    }
    vec![
        below("catalog Jacobi", jac, JACOBI_CATALOG),
        below("rho tau = id", rt, RHO_TAU),
        below("reassembly", re, REASSEMBLY),
    ]
}

fn criterion_2() -> Vec<Measure> {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let (mut assoc, mut inverse_exact) = (0.0f64, true);
    for name in ["heisenberg3", "engel4"] {
        let alg = catalog::<f64>(name).unwrap();
        let n = alg.dim();
        for h in [0.0, 0.1, 1.0] {
            for _ in 0..200 {
                let (x, y, z) = (draw(&mut rng, n), draw(&mut rng, n), draw(&mut rng, n));
                let l = bch_full(&alg, h, &bch_full(&alg, h, &x, &y).unwrap(), &z).unwrap();
                let r = bch_full(&alg, h, &x, &bch_full(&alg, h, &y, &z).unwrap()).unwrap();
                assoc = assoc.max(max_diff(&l, &r));
                inverse_exact &= bch_full(&alg, h, &x, &group_inv(&x))
                    .unwrap()
                    .iter()
                    .all(|v| *v == 0.0);
            }
        }
    }
    let s = split("engel4");
    let w0 = Cocycle::omega0(&s);
    let mut engel = 0.0f64;
    for _ in 0..100 {
        let (x, y) = (draw(&mut rng, 3), draw(&mut rng, 3));
        let r = rng.gen_range(-2.0..2.0);
        let h: f64 = rng.gen_range(0.0..1.5);
        let got = r_cocycle(&w0, h, &x, &y).unwrap().eval(&w0, &[r]).unwrap();
        let want = r
            * (h / 2.0 * (x[0] * y[2] - x[2] * y[0])
                + h * h / 12.0
                    * (x[0] * (x[0] * y[1] - x[1] * y[0]) + y[0] * (y[0] * x[1] - y[1] * x[0])));
        engel = engel.max((got - want).abs());
    }
    vec![
        below("associativity", assoc, ASSOCIATIVITY),
        holds("S(x, -x) = 0 exactly", inverse_exact),
        below("engel4 R closed form", engel, ENGEL_R),
    ]
}

fn criterion_3() -> Vec<Measure> {
    let mut out = Vec::new();
    for name in ["heisenberg3", "engel4"] {
        let s = split(name);
        for (tag, w) in [("w0", Cocycle::omega0(&s)), ("w0+sin", sin_total(&s))] {
            let c = cocycle_identity_check(&w, 200, 103).unwrap();
            out.push(below(
                &format!("{name} {tag} group cocycle"),
                c.group_cocycle,
                GROUP_COCYCLE,
            ));
            out.push(below(
                &format!("{name} {tag} sigma"),
                c.sigma,
                SIGMA_IDENTITY,
            ));
        }
    }
    out
}

fn poisson_trio(s: &CentralSplitF64, real: bool) -> [TestFunctionF64; 3] {
    let n = s.dim();
    let (m, amp) = if real {
        (0.0, Complex::new(1.0, 0.0))
    } else {
        (0.3, Complex::new(0.8, 0.4))
    };
    let g = |c: Vec<f64>, w: f64, md: f64, a: Complex<f64>| {
        let mods = (0..n).map(|d| md * (d as f64 - 0.5)).collect();
        let at = GaussianAtom::new(a, c, vec![w; n], mods).unwrap();
        TestFunction::new(Side::Qr, s.quotient_dim(), s.center_dim(), vec![at]).unwrap()
    };
    [
        g((0..n).map(|d| 0.1 * d as f64).collect(), 1.1, m, amp),
        g(
            (0..n).map(|d| 0.2 - 0.15 * d as f64).collect(),
            0.9,
            -m,
            amp,
        ),
        g(
            (0..n).map(|d| -0.1 + 0.05 * d as f64).collect(),
            1.3,
            m,
            amp.conj(),
        ),
    ]
}

fn criterion_4() -> Vec<Measure> {
    let (mut skew, mut leib, mut real, mut equiv, mut jac) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut ratio_ok = true;
    let mut ratios = Vec::new();
    for name in ["heisenberg3", "engel4"] {
        let s = split(name);
        let [f, g, h] = poisson_trio(&s, false);
        let [a, b, _] = poisson_trio(&s, true);
        let mus = sample_support(&s, &[&f, &g, &h], 40, 104).unwrap();
        let p = sin_pert(&s);
        let pert = PoissonContext::perturbed(&p).unwrap();
        let ext = PoissonContext::extended(&sin_total(&s)).unwrap();
        let lin = PoissonContext::linear(&s);
        let plain = PoissonContext::extended(&Cocycle::omega0(&s)).unwrap();
        for ctx in [&lin, &pert, &ext] {
            for mu in &mus {
                skew = skew.max(
                    (ctx.bracket_at(&f, &g, mu).unwrap() + ctx.bracket_at(&g, &f, mu).unwrap())
                        .norm(),
                );
                real = real.max(ctx.bracket_at(&a, &b, mu).unwrap().im.abs());
            }
            leib = leib.max(ctx.leibniz_residual(&f, &g, &h, &mus).unwrap());
        }
        for mu in &mus {
            equiv = equiv.max(
                (pert.bracket_at(&f, &g, mu).unwrap() - ext.bracket_at(&f, &g, mu).unwrap()).norm(),
            );
            equiv = equiv.max(
                (lin.bracket_at(&f, &g, mu).unwrap() - plain.bracket_at(&f, &g, mu).unwrap())
                    .norm(),
            );
        }
        for ctx in [&pert, &ext] {
            let coarse = ctx.jacobi_residual(&f, &g, &h, &mus, JACOBI_STEP).unwrap();
            let fine = ctx
                .jacobi_residual(&f, &g, &h, &mus, JACOBI_STEP / 2.0)
                .unwrap();
            jac = jac.max(coarse);
            let r = coarse / fine;
            ratio_ok &= (JACOBI_RATIO.0..=JACOBI_RATIO.1).contains(&r);
            ratios.push(format!("{r:.2}"));
        }
    }
    vec![
        below("skewness", skew, SKEW),
        below("Leibniz", leib, LEIBNIZ),
        below("reality", real, REALITY),
        below("omega / Omega equivalence", equiv, MODE_EQUIVALENCE),
        below("Jacobi at h_fd = 1e-4", jac, JACOBI_FD),
        Measure {
            label: "Jacobi halving ratio in [3, 5]".into(),
            ok: ratio_ok,
            text: ratios.join(" "),
        },
    ]
}

fn criterion_5() -> Vec<Measure> {
    let (mut point, mut invol, mut anti) = (0.0f64, 0.0f64, 0.0f64);
    for (name, h) in [("heisenberg3", 1.0), ("engel4", 0.5)] {
        let s = split(name);
        let k = s.quotient_dim();
        let (phi, psi) = (operand(k, 1.0), operand(k, -1.0));
        for w in [Cocycle::omega0(&s), sin_total(&s)] {
            let plan =
                DeformedProductPlan::auto(&w, 0.0, &[&phi, &psi], &GridRules::default()).unwrap();
            let got = plan.deformed_product(&phi, &psi).unwrap();
            let want = GridFunction::sample(plan.product_spec(), &phi.mul(&psi).unwrap()).unwrap();
            point = point.max(got.sup_diff(&want).unwrap());
        }
        let w = sin_total(&s);
        let (f, g) = (
            phi.partial_inverse().unwrap(),
            psi.partial_inverse().unwrap(),
        );
        let (fs, gs) = (star(&f).unwrap(), star(&g).unwrap());
        let (fsq, gsq) = (fs.partial_fourier().unwrap(), gs.partial_fourier().unwrap());
        let plan =
            DeformedProductPlan::auto(&w, h, &[&phi, &psi, &fsq, &gsq], &GridRules::default())
                .unwrap();
        let twice = plan.involution_grid(&plan.involution(&f).unwrap()).unwrap();
        let orig = GridFunction::from_fn(plan.convolution_spec(), |u| f.eval(u).unwrap());
        invol = invol.max(twice.sup_diff(&orig).unwrap());
        anti = anti.max(antihomomorphism_residual(&plan, &f, &g, 12, 105).unwrap());
    }
    vec![
        below("h = 0 product vs pointwise", point, POINTWISE),
        below("involutivity", invol, INVOLUTIVITY),
        below("antihomomorphism (relative)", anti, ANTIHOMOMORPHISM),
    ]
}

fn criterion_6() -> Vec<Measure> {
    let mut out = Vec::new();
    let s = split("heisenberg3");
    let w0 = Cocycle::omega0(&s);
    let (phi, psi) = (operand(2, 1.0), operand(2, -1.0));
    for h in [0.5, 1.0] {
        let plan = DeformedProductPlan::auto(&w0, h, &[&phi, &psi], &GridRules::default()).unwrap();
        out.push(below(
            &format!("Moyal heisenberg3 h={h}"),
            moyal_residual(&plan, &phi, &psi).unwrap(),
            MOYAL,
        ));
        let r = rieffel_oracle(&plan, &phi, &psi, 16, 106).unwrap().residual;
        out.push(below(
            &format!("group convolution heisenberg3 h={h}"),
            r,
            RIEFFEL_HEISENBERG,
        ));
    }
    let e = split("engel4");
    let (f3, g3) = (operand(3, 1.0), operand(3, -1.0));
    let plan = DeformedProductPlan::auto(
        &Cocycle::omega0(&e),
        0.5,
        &[&f3, &g3],
        &GridRules::default(),
    )
    .unwrap();
    let r = rieffel_oracle(&plan, &f3, &g3, 16, 106).unwrap().residual;
    out.push(below("group convolution engel4 h=0.5", r, RIEFFEL_ENGEL));
    out
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn sweep_csv(name: &str) -> (String, Vec<Measure>) {
    let cfg = load(&config(name), None, None).unwrap();
    let outcome = run(&cfg).unwrap();
    let rep: SweepReport = serde_json::from_value(outcome.report.result.clone()).unwrap();
    let tag = name.trim_end_matches(".json");
    let mut m = Vec::new();
    m.push(holds(
        &format!("{tag} sup strictly decreasing"),
        rep.sup_strictly_decreasing,
    ));
    m.push(holds(
        &format!("{tag} L1 strictly decreasing"),
        rep.l1_strictly_decreasing,
    ));
    for (n, v) in [("sup", rep.slope.sup), ("L1", rep.slope.l1)] {
        let v = v.unwrap_or(f64::NAN);
        m.push(Measure {
            label: format!("{tag} {n} slope"),
            ok: v >= MIN_SLOPE,
            text: format!("{v:.4} >= {MIN_SLOPE}"),
        });
    }
    m.push(below(
        &format!("{tag} slope shift N->2N"),
        rep.slope_shift().unwrap_or(f64::NAN),
        MAX_SLOPE_SHIFT,
    ));
    (outcome.csv, m)
}

// first run of the shipped config, kept for the determinism check
static FIRST_CSV: OnceLock<String> = OnceLock::new();

fn criterion_7() -> Vec<Measure> {
    let (csv, mut m) = sweep_csv("heisenberg-sweep.json");
    let _ = FIRST_CSV.set(csv);
    let (_, e) = sweep_csv("engel4-sweep.json");
    m.extend(e);
    m
}

fn criterion_8() -> Vec<Measure> {
    let cfg = load(&config("heisenberg-sweep.json"), None, None).unwrap();
    let second = run(&cfg).unwrap().csv;
    let first = FIRST_CSV
        .get()
        .cloned()
        .unwrap_or_else(|| run(&cfg).unwrap().csv);
    vec![holds(
        "heisenberg-sweep CSV bitwise identical across runs",
        first == second,
    )]
}

fn main() {
    let suite: [(u32, &str, Duration, fn() -> Vec<Measure>); 8] = [
        (
            1,
            "algebraic exactness",
            Duration::from_secs(5),
            criterion_1,
        ),
        (2, "BCH group law", Duration::from_secs(10), criterion_2),
        (3, "group cocycles", Duration::from_secs(10), criterion_3),
        (4, "Poisson brackets", Duration::from_secs(60), criterion_4),
        (
            5,
            "quantizer degeneration",
            Duration::from_secs(120),
            criterion_5,
        ),
        (
            6,
            "oracle equivalence",
            Duration::from_secs(600),
            criterion_6,
        ),
        (
            7,
            "strict-deformation limit",
            Duration::from_secs(1800),
            criterion_7,
        ),
        (8, "determinism", Duration::from_secs(1800), criterion_8),
    ];
    let mut failed = 0;
    for (n, name, budget, f) in suite {
        let t = Instant::now();
        let measures = f();
        let took = t.elapsed();
        let in_time = took <= budget;
        let ok = in_time && measures.iter().all(|m| m.ok);
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {n} {:<26} {} ({:.1} s of {} s)",
            name,
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs()
        );
        for m in measures
            .iter()
            .filter(|m| !m.ok || std::env::var_os("ACCEPTANCE_VERBOSE").is_some())
        {
            println!(
                "    {} {}: {}",
                if m.ok { "ok  " } else { "FAIL" },
                m.label,
                m.text
            );
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
