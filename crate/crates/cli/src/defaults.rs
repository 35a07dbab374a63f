//! Every default the runner applies, in one place. A resolved config
//! written into a report carries these values explicitly.

use nilquant::{GridRules, SweepOptions};
use serde::{Deserialize, Serialize};

pub const SCHEMA: u32 = 1;

/// `h` values of a sweep.
pub const SWEEP_HBARS: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];
/// `h` values of the two oracle experiments.
pub const ORACLE_HBARS: [f64; 2] = [0.5, 1.0];
/// `h` values of a product table.
pub const TABLE_HBARS: [f64; 2] = [0.0, 0.5];

pub const SEED: u64 = 7;
/// Random samples for cocycle and bracket checks.
pub const SAMPLES: usize = 200;
/// Sampled `y` points of the group-convolution oracle.
pub const ORACLE_SAMPLES: usize = 16;
/// Integration refinement of a sweep's self-convergence pass.
pub const REFINE: usize = 2;
/// Finite-difference step of the Jacobi experiment; it also runs at half.
pub const JACOBI_STEP: f64 = 1e-4;

/// Pass/fail thresholds of every experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub min_slope: f64,
    pub max_slope_shift: f64,
    pub moyal: f64,
    pub rieffel: f64,
    pub pointwise: f64,
    pub jacobi: f64,
    pub jacobi_ratio: (f64, f64),
    pub leibniz: f64,
    pub group_cocycle: f64,
    pub sigma: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            min_slope: 0.9,
            max_slope_shift: 0.1,
            moyal: 1e-5,
            rieffel: 1e-5,
            pointwise: 1e-6,
            jacobi: 5e-5,
            jacobi_ratio: (3.0, 5.0),
            leibniz: 1e-8,
            group_cocycle: 1e-10,
            sigma: 1e-9,
        }
    }
}

pub fn rules() -> GridRules {
    GridRules::default()
}

pub fn sweep_options(rules: GridRules, seed: u64, samples: usize) -> SweepOptions {
    SweepOptions {
        rules,
        refine: REFINE,
        oracles: true,
        oracle_samples: samples,
        seed,
    }
}
