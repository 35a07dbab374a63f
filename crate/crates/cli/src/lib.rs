//! Experiment runner behind the `nilquant` binary: validated JSON configs
//! in, JSON reports and flat CSV tables out.
//!
//! Exit codes: 0 success, 2 validation error, 3 threshold failure,
//! 4 numeric guard (grid too small, error-budget floor).

pub mod config;
pub mod defaults;

use config::{AlgebraSpec, Experiment, ExperimentConfig, Setup};
use nilquant::poisson::sample_support;
use nilquant::{
    catalog, cocycle_identity_check, moyal_residual, rieffel_oracle, sweep, sweep_plans,
    DeformedProductPlan, Error, GridFunction, NormKind, PoissonContext, TestFunction,
};
use serde::Serialize;
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error as ThisError;

#[derive(Debug, ThisError)]
pub enum RunError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numeric(String),
    #[error("IoError: {0}")]
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) | RunError::Io(_) => 2,
            RunError::Numeric(_) => 4,
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::GridTooSmall(_) | Error::BudgetFloorReached(_) | Error::NonUnitPhase { .. } => {
                RunError::Numeric(e.to_string())
            }
            _ => RunError::Validation(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: u32,
    pub experiment: Experiment,
    pub passed: bool,
    pub failures: Vec<String>,
    pub result: Value,
    /// The config with every default filled in.
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub csv: String,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.passed {
            0
        } else {
            3
        }
    }

    /// Writes `<dir>/<stem>.json` and `<dir>/<stem>.csv`.
    pub fn write(&self) -> Result<(PathBuf, PathBuf), RunError> {
        let out = self.report.config.output.as_ref().expect("resolved config");
        let dir = Path::new(&out.dir);
        std::fs::create_dir_all(dir)
            .map_err(|e| RunError::Io(format!("{}: {e}", dir.display())))?;
        let json_path = dir.join(format!("{}.json", out.stem));
        let csv_path = dir.join(format!("{}.csv", out.stem));
        let text = serde_json::to_string_pretty(&self.report).expect("report serializes");
        std::fs::write(&json_path, text + "\n")
            .map_err(|e| RunError::Io(format!("{}: {e}", json_path.display())))?;
        std::fs::write(&csv_path, &self.csv)
            .map_err(|e| RunError::Io(format!("{}: {e}", csv_path.display())))?;
        Ok((json_path, csv_path))
    }
}

/// Loads and resolves a config file; outputs default to the file's stem.
pub fn load(
    path: &Path,
    out_dir: Option<&str>,
    seed: Option<u64>,
) -> Result<ExperimentConfig, RunError> {
    let cfg = ExperimentConfig::load(path)?;
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("report");
    Ok(cfg.resolve(stem, out_dir, seed))
}

struct Checks(Vec<String>);

impl Checks {
    fn below(&mut self, what: &str, value: f64, limit: f64) {
        if !(value < limit) {
            self.0
                .push(format!("{what} = {value:e} is not below {limit:e}"));
        }
    }

    fn holds(&mut self, what: &str, ok: bool) {
        if !ok {
            self.0.push(what.to_string());
        }
    }
}

fn plans(
    cfg: &ExperimentConfig,
    setup: &Setup,
    hbars: &[f64],
) -> Result<Vec<DeformedProductPlan<f64>>, RunError> {
    let ops: Vec<&TestFunction<f64>> = setup.operands.iter().collect();
    hbars
        .iter()
        .map(|h| match cfg.quadrature.explicit() {
            Some(g) => DeformedProductPlan::new(&setup.cocycle, *h, g.clone()),
            None => DeformedProductPlan::auto(&setup.cocycle, *h, &ops, &cfg.rules()),
        })
        .collect::<nilquant::Result<Vec<_>>>()
        .map_err(RunError::from)
}

/// Runs a resolved config.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let setup = cfg.setup()?;
    let th = cfg.thresholds();
    let mut checks = Checks(vec![]);
    let seed = cfg.seed();
    let samples = cfg.samples.unwrap_or(defaults::SAMPLES);
    let oracle_samples = cfg.oracle_samples.unwrap_or(defaults::ORACLE_SAMPLES);
    let (result, csv) = match cfg.experiment {
        Experiment::Sweep => {
            let (phi, psi) = (&setup.operands[0], &setup.operands[1]);
            let opts = defaults::sweep_options(cfg.rules(), seed, oracle_samples);
            let rep = match cfg.quadrature.explicit() {
                None => sweep(&setup.cocycle, phi, psi, &cfg.hbars(), &opts)?,
                Some(_) => {
                    let hs = nilquant::lab::validate_hbars(&cfg.hbars())?;
                    sweep_plans(&plans(cfg, &setup, &hs)?, phi, psi, &opts)?
                }
            };
            checks.holds(
                "sup defects are not strictly decreasing",
                rep.sup_strictly_decreasing,
            );
            checks.holds(
                "L1 defects are not strictly decreasing",
                rep.l1_strictly_decreasing,
            );
            for (name, s) in [("sup slope", rep.slope.sup), ("L1 slope", rep.slope.l1)] {
                match s {
                    Some(v) if v >= th.min_slope => {}
                    Some(v) => checks
                        .0
                        .push(format!("{name} = {v} is below {}", th.min_slope)),
                    None => checks
                        .0
                        .push(format!("{name} has fewer than two points above the floor")),
                }
            }
            match rep.slope_shift() {
                Some(v) => checks.below("slope shift under refinement", v, th.max_slope_shift),
                None => checks.0.push("slope shift is undefined".into()),
            }
            for o in &rep.oracle_residuals {
                let lim = if o.name == "moyal" {
                    th.moyal
                } else {
                    th.rieffel
                };
                checks.below(&format!("{} oracle residual", o.name), o.residual, lim);
            }
            let csv = rep.to_csv();
            (serde_json::to_value(&rep).expect("serializable"), csv)
        }
        Experiment::Jacobi => {
            let ops: Vec<&TestFunction<f64>> = setup.operands.iter().collect();
            let ctx = match (cfg.cocycle.omega0, &setup.perturbation) {
                (false, Some(p)) => PoissonContext::perturbed(p)?,
                _ => PoissonContext::extended(&setup.cocycle)?,
            };
            let mus = sample_support(&setup.split, &ops, samples, seed)?;
            let h = defaults::JACOBI_STEP;
            let coarse = ctx.jacobi_residual(ops[0], ops[1], ops[2], &mus, h)?;
            let fine = ctx.jacobi_residual(ops[0], ops[1], ops[2], &mus, h / 2.0)?;
            let leibniz = ctx.leibniz_residual(ops[0], ops[1], ops[2], &mus)?;
            let ratio = coarse / fine;
            checks.below("Jacobi residual", coarse, th.jacobi);
            checks.below("Leibniz residual", leibniz, th.leibniz);
            checks.holds(
                &format!(
                    "refinement ratio {ratio} outside [{}, {}]",
                    th.jacobi_ratio.0, th.jacobi_ratio.1
                ),
                ratio >= th.jacobi_ratio.0 && ratio <= th.jacobi_ratio.1,
            );
            let csv = format!(
                "h_fd,residual\n{:e},{:e}\n{:e},{:e}\n",
                h,
                coarse,
                h / 2.0,
                fine
            );
            let result = json!({
                "mode": format!("{:?}", ctx.mode()).to_lowercase(),
                "samples": mus.len(),
                "h_fd": h,
                "residual": coarse,
                "half_step_residual": fine,
                "ratio": ratio,
                "leibniz": leibniz,
            });
            (result, csv)
        }
        Experiment::CocycleCheck => {
            let c = cocycle_identity_check(&setup.cocycle, samples, seed)?;
            checks.below(
                "group-cocycle identity residual",
                c.group_cocycle,
                th.group_cocycle,
            );
            checks.below("sigma identity residual", c.sigma, th.sigma);
            let csv = format!(
                "check,residual\ngroup_cocycle,{:e}\nsigma,{:e}\nunit,{:e}\ncertified,{:e}\n",
                c.group_cocycle,
                c.sigma,
                c.unit,
                setup.cocycle.certified_residual()
            );
            let mut v = serde_json::to_value(c).expect("serializable");
            v["certified"] = json!(setup.cocycle.certified_residual());
            (v, csv)
        }
        Experiment::OracleMoyal | Experiment::OracleRieffel => {
            let (phi, psi) = (&setup.operands[0], &setup.operands[1]);
            let moyal = cfg.experiment == Experiment::OracleMoyal;
            let mut rows = Vec::new();
            let mut csv = String::from("hbar,residual\n");
            for plan in plans(cfg, &setup, &cfg.hbars())? {
                let h = plan.hbar();
                let v = if moyal {
                    let r = moyal_residual(&plan, phi, psi)?;
                    checks.below(
                        &format!("phase-space oracle residual at h={h}"),
                        r,
                        th.moyal,
                    );
                    json!({"hbar": h, "residual": r})
                } else {
                    let c = rieffel_oracle(&plan, phi, psi, oracle_samples, seed)?;
                    checks.below(
                        &format!("group-convolution oracle residual at h={h}"),
                        c.residual,
                        th.rieffel,
                    );
                    serde_json::to_value(json!({"hbar": h, "check": c})).expect("serializable")
                };
                let r = if moyal {
                    v["residual"].as_f64()
                } else {
                    v["check"]["residual"].as_f64()
                };
                let _ = writeln!(csv, "{:e},{:e}", h, r.unwrap_or(f64::NAN));
                rows.push(v);
            }
            (json!({ "runs": rows }), csv)
        }
        Experiment::ProductTable => {
            let (phi, psi) = (&setup.operands[0], &setup.operands[1]);
            let k = setup.split.quotient_dim();
            let m = setup.split.center_dim();
            let mut header = String::from("hbar");
            for i in 0..k {
                let _ = write!(header, ",q{}", i + 1);
            }
            for j in 0..m {
                let _ = write!(header, ",r{}", j + 1);
            }
            let mut csv = header + ",re,im\n";
            let mut rows = Vec::new();
            for plan in plans(cfg, &setup, &cfg.hbars())? {
                let h = plan.hbar();
                let prod = plan.deformed_product(phi, psi)?;
                let mut row = json!({
                    "hbar": h,
                    "route": plan.route(),
                    "grids": plan.grids(),
                    "sup": prod.norm(NormKind::Sup),
                    "l1": prod.norm(NormKind::L1),
                });
                if h == 0.0 {
                    let exact = GridFunction::sample(prod.spec.clone(), &phi.mul(psi)?)?;
                    let r = prod.sup_diff(&exact)?;
                    checks.below("pointwise residual at h=0", r, th.pointwise);
                    row["pointwise_residual"] = json!(r);
                }
                for (i, v) in prod.values.iter().enumerate() {
                    let _ = write!(csv, "{:e}", h);
                    for c in prod.spec.point(i) {
                        let _ = write!(csv, ",{:e}", c);
                    }
                    let _ = writeln!(csv, ",{:e},{:e}", v.re, v.im);
                }
                rows.push(row);
            }
            (json!({ "products": rows }), csv)
        }
    };
    let failures = checks.0;
    Ok(Outcome {
        report: Report {
            schema: defaults::SCHEMA,
            experiment: cfg.experiment,
            passed: failures.is_empty(),
            failures,
            result,
            config: cfg.clone(),
        },
        csv,
    })
}

/// Catalog names the quotient is identical to, basis for basis.
fn identify(alg: &nilquant::LieAlgebra<f64>) -> Option<String> {
    let n = alg.dim();
    let names = [
        format!("abelian({n})"),
        "heisenberg3".into(),
        "engel4".into(),
        format!("filiform({n})"),
    ];
    let doc = alg.to_doc();
    names.into_iter().find(|name| {
        catalog::<f64>(name)
            .map(|c| c.dim() == n && c.to_doc().brackets == doc.brackets)
            .unwrap_or(false)
    })
}

fn brackets_text(alg: &nilquant::LieAlgebra<f64>) -> String {
    let doc = alg.to_doc();
    if doc.brackets.is_empty() {
        return "none".into();
    }
    doc.brackets
        .iter()
        .map(|(i, j, terms)| {
            let rhs: Vec<String> = terms
                .iter()
                .map(|(k, v)| {
                    if *v == 1.0 {
                        format!("e{}", k + 1)
                    } else {
                        format!("{v}*e{}", k + 1)
                    }
                })
                .collect();
            format!("[e{},e{}] = {}", i + 1, j + 1, rhs.join(" + "))
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn dims(points: &[usize]) -> String {
    points
        .iter()
        .map(|p| p.to_string())
        .collect::<Vec<_>>()
        .join("x")
}

/// Seconds per integrand node and atom pair, a rough single-core figure.
const NODE_COST: f64 = 5e-9;

/// The resolved plan as text, without running any product.
pub fn describe(cfg: &ExperimentConfig) -> Result<String, RunError> {
    let setup = cfg.setup()?;
    let s = &setup.split;
    let mut out = String::new();
    let name = match &cfg.algebra {
        AlgebraSpec::Name(n) => n.clone(),
        AlgebraSpec::Inline(_) => "inline".into(),
    };
    let parent = s.parent();
    let _ = writeln!(
        out,
        "algebra: {name} (dim {}, step {})",
        parent.dim(),
        parent.step()
    );
    let _ = writeln!(out, "  brackets: {}", brackets_text(parent));
    let q = s.quotient();
    let _ = writeln!(
        out,
        "center: dim {} (r-dim {})",
        s.center_dim(),
        s.center_dim()
    );
    let _ = writeln!(
        out,
        "quotient K: dim {}{}",
        s.quotient_dim(),
        identify(q).map(|n| format!(" = {n}")).unwrap_or_default()
    );
    let _ = writeln!(out, "  brackets: {}", brackets_text(q));
    let doc = setup.cocycle.to_doc();
    let _ = writeln!(out, "cocycle: {:?}", doc.kind);
    for (i, j, e) in &doc.entries {
        let _ = writeln!(out, "  w(e{}, e{}) = {}", i + 1, j + 1, e);
    }
    let _ = writeln!(out, "experiment: {:?}", cfg.experiment);
    let _ = writeln!(out, "operands: {}", setup.operands.len());
    let hbars = cfg.hbars();
    if !hbars.is_empty() && setup.operands.len() >= 2 {
        let pairs: usize = setup.operands[0].atoms().len() * setup.operands[1].atoms().len();
        let mut total = 0.0;
        let mut refine_exp = 0;
        for plan in plans(cfg, &setup, &hbars)? {
            let g = plan.grids();
            let cc = match plan.route() {
                nilquant::ProductRoute::Central => plan.central_coords(),
                _ => &[],
            };
            // the central route integrates x and y over the central block in
            // closed form and walks the q nodes of that block instead
            let axes = |spec: &nilquant::QuadratureSpec<f64>| -> usize {
                (0..spec.dims())
                    .filter(|d| !cc.contains(d))
                    .map(|d| spec.points[d])
                    .product()
            };
            let nodes = axes(&g.x)
                * axes(&g.y)
                * g.r.len()
                * cc.iter().map(|d| g.q.points[*d]).product::<usize>();
            refine_exp = refine_exp.max(2 * (s.quotient_dim() - cc.len()));
            total += nodes as f64 * pairs as f64 * NODE_COST;
            let _ = writeln!(
                out,
                "h = {}: route {:?}, x {}, y {}, q {}, r {}; {} integrand nodes per product",
                plan.hbar(),
                plan.route(),
                dims(&g.x.points),
                dims(&g.y.points),
                dims(&g.q.points),
                dims(&g.r.points),
                nodes
            );
        }
        let repeats = match cfg.experiment {
            Experiment::Sweep => 2.0 * (1.0 + (defaults::REFINE as f64).powi(refine_exp as i32)),
            _ => 1.0,
        };
        let _ = writeln!(
            out,
            "estimated runtime: {:.1} s single-core",
            total * repeats
        );
    }
    Ok(out)
}
