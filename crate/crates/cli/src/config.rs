//! Experiment configuration: parsing, validation and default resolution.

use crate::defaults::{self, Thresholds};
use crate::RunError;
use nilquant::schwartz::AtomDoc;
use nilquant::{
    catalog, AlgebraDoc, CentralSplit, Cocycle, GridRules, LieAlgebra, PlanGrids, QuadratureSpec,
    ScalarFieldExpr, TestFunction,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Sweep,
    Jacobi,
    CocycleCheck,
    OracleMoyal,
    OracleRieffel,
    ProductTable,
}

impl Experiment {
    /// Operand count the experiment reads.
    pub fn operands(self) -> usize {
        match self {
            Experiment::CocycleCheck => 0,
            Experiment::Jacobi => 3,
            _ => 2,
        }
    }

    pub fn default_hbars(self) -> Vec<f64> {
        match self {
            Experiment::Sweep => defaults::SWEEP_HBARS.to_vec(),
            Experiment::OracleMoyal | Experiment::OracleRieffel => defaults::ORACLE_HBARS.to_vec(),
            Experiment::ProductTable => defaults::TABLE_HBARS.to_vec(),
            Experiment::Jacobi | Experiment::CocycleCheck => vec![],
        }
    }
}

/// A catalog name or inline structure constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlgebraSpec {
    Name(String),
    Inline(AlgebraDoc),
}

impl AlgebraSpec {
    pub fn build(&self) -> nilquant::Result<LieAlgebra<f64>> {
        match self {
            AlgebraSpec::Name(n) => catalog(n),
            AlgebraSpec::Inline(doc) => LieAlgebra::from_doc(doc),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CocycleConfig {
    #[serde(default = "yes")]
    pub omega0: bool,
    /// `[i, j, expr]` entries of the perturbation.
    #[serde(default)]
    pub perturbation: Vec<(usize, usize, Value)>,
}

fn yes() -> bool {
    true
}

impl Default for CocycleConfig {
    fn default() -> Self {
        CocycleConfig {
            omega0: true,
            perturbation: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quadrature {
    /// The string `"auto"`.
    Auto(String),
    Explicit(PlanGrids<f64>),
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature::Auto("auto".into())
    }
}

impl Quadrature {
    pub fn explicit(&self) -> Option<&PlanGrids<f64>> {
        match self {
            Quadrature::Auto(_) => None,
            Quadrature::Explicit(g) => Some(g),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub stem: String,
}

/// The config file. Optional fields are filled by [`ExperimentConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub experiment: Experiment,
    pub algebra: AlgebraSpec,
    #[serde(default)]
    pub cocycle: CocycleConfig,
    #[serde(default)]
    pub operands: Vec<Vec<AtomDoc>>,
    #[serde(default)]
    pub hbars: Option<Vec<f64>>,
    #[serde(default)]
    pub quadrature: Quadrature,
    #[serde(default)]
    pub rules: Option<GridRules>,
    #[serde(default)]
    pub thresholds: Option<Thresholds>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub oracle_samples: Option<usize>,
    #[serde(default)]
    pub output: Option<OutputConfig>,
}

/// Built objects of a validated config.
pub struct Setup {
    pub split: Arc<CentralSplit<f64>>,
    pub cocycle: Cocycle<f64>,
    /// The perturbation alone, when one is given.
    pub perturbation: Option<Cocycle<f64>>,
    pub operands: Vec<TestFunction<f64>>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, RunError> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| RunError::Validation(format!("MalformedConfig: {e}")))?;
        if cfg.schema != defaults::SCHEMA {
            return Err(RunError::Validation(format!(
                "UnsupportedSchema: schema {} (this build reads {})",
                cfg.schema,
                defaults::SCHEMA
            )));
        }
        if let Quadrature::Auto(s) = &cfg.quadrature {
            if s != "auto" {
                return Err(RunError::Validation(format!(
                    "MalformedConfig: quadrature \"{s}\" is not \"auto\""
                )));
            }
        }
        Ok(cfg)
    }

    /// Copy with every default written out; `stem` names the outputs when
    /// the config does not.
    pub fn resolve(&self, stem: &str, out_dir: Option<&str>, seed: Option<u64>) -> Self {
        let mut c = self.clone();
        c.hbars = Some(c.hbars.unwrap_or_else(|| self.experiment.default_hbars()));
        c.rules = Some(c.rules.unwrap_or_else(defaults::rules));
        c.thresholds = Some(c.thresholds.unwrap_or_default());
        c.seed = Some(seed.or(c.seed).unwrap_or(defaults::SEED));
        c.samples = Some(c.samples.unwrap_or(defaults::SAMPLES));
        c.oracle_samples = Some(c.oracle_samples.unwrap_or(defaults::ORACLE_SAMPLES));
        let mut out = c.output.take().unwrap_or(OutputConfig {
            dir: ".".into(),
            stem: stem.into(),
        });
        if let Some(d) = out_dir {
            out.dir = d.into();
        }
        c.output = Some(out);
        c
    }

    pub fn hbars(&self) -> Vec<f64> {
        self.hbars
            .clone()
            .unwrap_or_else(|| self.experiment.default_hbars())
    }

    pub fn rules(&self) -> GridRules {
        self.rules.unwrap_or_else(defaults::rules)
    }

    pub fn thresholds(&self) -> Thresholds {
        self.thresholds.unwrap_or_default()
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(defaults::SEED)
    }

    /// Builds the algebra, split, cocycle and operands, checking counts,
    /// dimensions and the `h` list.
    pub fn setup(&self) -> Result<Setup, RunError> {
        let alg = self.algebra.build()?;
        let split = Arc::new(CentralSplit::new(&alg)?);
        let (k, m) = (split.quotient_dim(), split.center_dim());
        let given = self
            .cocycle
            .perturbation
            .iter()
            .map(|(i, j, v)| Ok((*i, *j, ScalarFieldExpr::from_json(v)?)))
            .collect::<nilquant::Result<Vec<_>>>()?;
        let perturbation = if given.is_empty() {
            None
        } else {
            Some(Cocycle::perturbation(&split, given)?)
        };
        let cocycle = match (self.cocycle.omega0, &perturbation) {
            (true, None) => Cocycle::omega0(&split),
            (true, Some(p)) => Cocycle::total(&Cocycle::omega0(&split), p)?,
            (false, Some(p)) => p.clone(),
            (false, None) => {
                return Err(RunError::Validation(
                    "EmptyCocycle: omega0 is off and no perturbation is given".into(),
                ))
            }
        };
        let need = self.experiment.operands();
        if self.operands.len() < need {
            return Err(RunError::Validation(format!(
                "MissingOperands: {:?} needs {need} operands, got {}",
                self.experiment,
                self.operands.len()
            )));
        }
        let operands = self.operands[..need]
            .iter()
            .map(|docs| TestFunction::from_docs(k, m, docs))
            .collect::<nilquant::Result<Vec<_>>>()?;
        for h in self.hbars() {
            if !(h >= 0.0) || !h.is_finite() {
                return Err(RunError::Validation(format!(
                    "InvalidInput: h = {h} must be finite and >= 0"
                )));
            }
            if h == 0.0 && self.experiment == Experiment::Sweep {
                return Err(RunError::Validation(
                    "InvalidInput: the commutator defect is undefined at h = 0; use product-table"
                        .into(),
                ));
            }
        }
        if let Some(g) = self.quadrature.explicit() {
            for s in [&g.x, &g.y, &g.q, &g.r] {
                QuadratureSpec::new(s.center.clone(), s.half_width.clone(), s.points.clone())?;
            }
            for (name, dims) in [("x", g.x.dims()), ("y", g.y.dims()), ("q", g.q.dims())] {
                if dims != k {
                    return Err(RunError::Validation(format!(
                        "DimensionMismatch: grid {name} has {dims} dims, the quotient has {k}"
                    )));
                }
            }
            if g.r.dims() != m {
                return Err(RunError::Validation(format!(
                    "DimensionMismatch: grid r has {} dims, the center has {m}",
                    g.r.dims()
                )));
            }
        }
        Ok(Setup {
            split,
            cocycle,
            perturbation,
            operands,
        })
    }
}
