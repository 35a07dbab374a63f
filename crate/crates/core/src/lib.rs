//! Cocycle-perturbed Poisson brackets on duals of nilpotent Lie algebras and
//! their strict deformation quantization by twisted group convolution.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*F64` aliases below name the common double-precision instantiations.

pub mod bch;
pub mod cocycle;
pub mod error;
pub mod expr;
pub mod lab;
pub mod lie;
pub mod linalg;
pub mod poisson;
pub mod poly;
pub mod quantizer;
pub mod scalar;
pub mod schwartz;

pub use bch::{
    bch_full, group_inv, group_mul, r_cocycle, sigma, BivectorCocycle, CompiledGroupLaw,
};
pub use cocycle::{Cocycle, CocycleDoc, CocycleKind};
pub use error::{Error, Result};
pub use expr::ScalarFieldExpr;
pub use lab::{
    antihomomorphism_residual, cocycle_identity_check, commutator_defect, commutator_defect_grid,
    moyal_oracle, moyal_residual, rieffel_oracle, sweep, sweep_plans, CocycleCheck, Defect,
    RieffelCheck, SweepOptions, SweepReport,
};
pub use lie::{catalog, AlgebraDoc, CentralSplit, LieAlgebra};
pub use poisson::{BracketMode, PoissonContext};
pub use quantizer::{star, DeformedProductPlan, GridRules, PlanGrids, ProductRoute};
pub use scalar::Scalar;
pub use schwartz::{GaussianAtom, GridFunction, NormKind, QuadratureSpec, Side, TestFunction};

pub type LieAlgebraF64 = LieAlgebra<f64>;
pub type CentralSplitF64 = CentralSplit<f64>;
pub type CocycleF64 = Cocycle<f64>;
pub type ExprF64 = ScalarFieldExpr<f64>;
pub type TestFunctionF64 = TestFunction<f64>;
pub type QuadratureSpecF64 = QuadratureSpec<f64>;
pub type PoissonContextF64 = PoissonContext<f64>;
pub type DeformedProductPlanF64 = DeformedProductPlan<f64>;
