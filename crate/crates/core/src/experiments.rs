// SPDX-License-Identifier: MIT OR Apache-2.0

//! Monte Carlo size and power studies.
//!
//! Run `i` of an experiment seeded with `master_seed` owns the seed
//! `derive_seed(master_seed, i)`: its data come from stream 0 of that seed and
//! its bootstrap replicates from `derive_seed(run_seed, 1)`. Runs are spread
//! over the rayon pool and counted afterwards, so the rejection count does not
//! depend on scheduling. Two experiments that differ only in the statistic see
//! identical simulated datasets.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{run_test_with, BlockRule, BootstrapConfig, Execution, TestData};
use crate::error::{CpbError, Result};
use crate::hilbert::{Curve, FunctionalSample, Grid};
use crate::rng::{self, derive_seed};
use crate::simulation::{
    apply_alternative_functional, apply_alternative_vector, ar1_generate, ar1_pair,
    calibrate_kernel, far1_generate, AlternativeSpec, Far1Spec, KernelKind, Shift, DEFAULT_BURN_IN,
    DEFAULT_GRID_SIZE,
};
use crate::statistics::{VectorSample, WeightSpec};

/// Data-generating model of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Model {
    Far1 {
        kernel: KernelKind,
        psi_norm: f64,
        grid_size: usize,
        burn_in: usize,
    },
    Ar1 {
        a1: f64,
    },
    /// Every observation equals `value`; a degenerate control.
    Constant {
        value: f64,
    },
}

impl Model {
    pub fn far1(kernel: KernelKind, psi_norm: f64) -> Self {
        Model::Far1 {
            kernel,
            psi_norm,
            grid_size: DEFAULT_GRID_SIZE,
            burn_in: DEFAULT_BURN_IN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftShape {
    /// `μ` added to every value.
    Constant,
    /// `μ · sin(t)` added to functional observations.
    Sine,
}

/// Structural change of an experiment, located at `⌊n · fraction⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "change", rename_all = "snake_case")]
pub enum Change {
    None,
    MeanShift {
        mu: f64,
        shape: ShiftShape,
        fraction: f64,
    },
    Skewness {
        fraction: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "statistic", rename_all = "snake_case")]
pub enum StatisticKind {
    Cusum,
    Cvm { weight: WeightSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub model: Model,
    pub change: Change,
    pub n: usize,
    pub block: BlockRule,
    /// Bootstrap replicates per test.
    pub replicates: usize,
    pub alpha: f64,
    pub runs: usize,
    pub master_seed: u64,
    pub statistic: StatisticKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rejections: usize,
    pub runs: usize,
    pub rejection_rate: f64,
    /// `3·√(r(1−r)/runs)`.
    pub ci_halfwidth: f64,
    pub master_seed: u64,
    pub wall_time_secs: f64,
}

impl ExperimentReport {
    /// True when both reports agree on everything but timing.
    pub fn same_outcome(&self, other: &ExperimentReport) -> bool {
        self.rejections == other.rejections
            && self.runs == other.runs
            && self.master_seed == other.master_seed
    }
}

/// Seed of run `run` of an experiment.
pub fn run_seed(master_seed: u64, run: usize) -> u64 {
    derive_seed(master_seed, run as u64)
}

enum Dataset {
    Functional(FunctionalSample),
    Vector(VectorSample),
}

fn change_index(n: usize, fraction: f64) -> Result<usize> {
    let at = (n as f64 * fraction).floor() as usize;
    if at == 0 || at >= n {
        return Err(CpbError::argument(format!(
            "change fraction {fraction} puts the change outside 1..={} for n = {n}",
            n - 1
        )));
    }
    Ok(at)
}

/// Prepared generator: everything that does not depend on the run.
enum Generator {
    Far1 {
        spec: Far1Spec,
        alternative: AlternativeSpec,
    },
    Ar1 {
        a1: f64,
        alternative: AlternativeSpec,
        skewness: bool,
    },
    Constant {
        value: f64,
    },
}

impl Generator {
    fn new(spec: &ExperimentSpec) -> Result<Self> {
        let n = spec.n;
        Ok(match &spec.model {
            Model::Far1 {
                kernel,
                psi_norm,
                grid_size,
                burn_in,
            } => {
                let grid = Arc::new(Grid::unit_interval(*grid_size)?);
                let mut far = Far1Spec::new(calibrate_kernel(*kernel, *psi_norm)?, grid.clone());
                far.burn_in = *burn_in;
                let alternative = match spec.change {
                    Change::None => AlternativeSpec::None,
                    Change::MeanShift {
                        mu,
                        shape,
                        fraction,
                    } => {
                        let shift = match shape {
                            ShiftShape::Constant => Shift::Scalar(mu),
                            ShiftShape::Sine => {
                                Shift::Curve(Curve::from_fn(grid, |t| mu * t.sin())?)
                            }
                        };
                        AlternativeSpec::MeanShift {
                            shift,
                            at: change_index(n, fraction)?,
                        }
                    }
                    Change::Skewness { .. } => {
                        return Err(CpbError::argument(
                            "the skewness change is defined for AR(1) data only",
                        ))
                    }
                };
                Generator::Far1 {
                    spec: far,
                    alternative,
                }
            }
            Model::Ar1 { a1 } => {
                let (alternative, skewness) = match spec.change {
                    Change::None => (AlternativeSpec::None, false),
                    Change::MeanShift {
                        mu,
                        shape,
                        fraction,
                    } => {
                        if shape != ShiftShape::Constant {
                            return Err(CpbError::argument(
                                "real-valued data only take constant shifts",
                            ));
                        }
                        (
                            AlternativeSpec::MeanShift {
                                shift: Shift::Scalar(mu),
                                at: change_index(n, fraction)?,
                            },
                            false,
                        )
                    }
                    Change::Skewness { fraction } => (
                        AlternativeSpec::SkewnessChange {
                            at: change_index(n, fraction)?,
                        },
                        true,
                    ),
                };
                Generator::Ar1 {
                    a1: *a1,
                    alternative,
                    skewness,
                }
            }
            Model::Constant { value } => Generator::Constant { value: *value },
        })
    }

    fn generate(&self, n: usize, seed: u64) -> Result<Dataset> {
        let mut rng = rng::stream(seed, 0);
        match self {
            Generator::Far1 { spec, alternative } => {
                let s = far1_generate(spec, n, &mut rng)?;
                Ok(Dataset::Functional(apply_alternative_functional(
                    &s,
                    alternative,
                )?))
            }
            Generator::Ar1 {
                a1,
                alternative,
                skewness,
            } => {
                let v = if *skewness {
                    ar1_pair(*a1, n, &mut rng)?
                } else {
                    ar1_generate(*a1, n, &mut rng)?
                };
                Ok(Dataset::Vector(apply_alternative_vector(&v, alternative)?))
            }
            Generator::Constant { value } => {
                Ok(Dataset::Vector(VectorSample::from_scalars(vec![
                    *value;
                    n
                ])?))
            }
        }
    }
}

fn one_run(spec: &ExperimentSpec, generator: &Generator, run: usize) -> Result<bool> {
    let seed = run_seed(spec.master_seed, run);
    let data = generator.generate(spec.n, seed)?;
    let config = BootstrapConfig {
        block_rule: spec.block,
        replicates: spec.replicates,
        seed: derive_seed(seed, 1),
        alpha: spec.alpha,
    };
    let report = match (&spec.statistic, &data) {
        (StatisticKind::Cusum, Dataset::Functional(s)) => {
            run_test_with(TestData::Cusum(s), &config, Execution::Sequential)?
        }
        (StatisticKind::Cusum, Dataset::Vector(v)) => {
            let s = v.to_functional()?;
            run_test_with(TestData::Cusum(&s), &config, Execution::Sequential)?
        }
        (StatisticKind::Cvm { weight }, Dataset::Vector(v)) => {
            run_test_with(TestData::Cvm(v, weight), &config, Execution::Sequential)?
        }
        (StatisticKind::Cvm { .. }, Dataset::Functional(_)) => {
            return Err(CpbError::argument(
                "the Cramér–von Mises test needs vector-valued data",
            ))
        }
    };
    Ok(report.reject)
}

/// Runs all Monte Carlo repetitions of `spec` and reports the rejection rate.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    if spec.runs == 0 {
        return Err(CpbError::argument("runs must be >= 1"));
    }
    let started = Instant::now();
    let generator = Generator::new(spec)?;
    // Fail fast on an invalid block rule before spawning work.
    spec.block.plan(spec.n)?;
    let outcomes: Vec<bool> = (0..spec.runs)
        .into_par_iter()
        .map(|run| one_run(spec, &generator, run))
        .collect::<Result<_>>()?;
    let rejections = outcomes.iter().filter(|r| **r).count();
    let rate = rejections as f64 / spec.runs as f64;
    Ok(ExperimentReport {
        rejections,
        runs: spec.runs,
        rejection_rate: rate,
        ci_halfwidth: 3.0 * (rate * (1.0 - rate) / spec.runs as f64).sqrt(),
        master_seed: spec.master_seed,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

/// Workload of a table reproduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// 500 runs with 499 replicates per test.
    Desk,
    /// 1000 runs with 499 (tables 1–2) or 999 (tables 3–5) replicates.
    Full,
}

impl std::str::FromStr for Scale {
    type Err = CpbError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            other => Err(CpbError::argument(format!(
                "unknown scale {other:?}; expected desk or full"
            ))),
        }
    }
}

pub const DESK_RUNS: usize = 500;
pub const DESK_REPLICATES: usize = 499;

/// Which of the two values printed in a table cell a row refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    GaussianKernel,
    WienerKernel,
    Cvm,
    Cusum,
}

impl Variant {
    pub fn label(&self) -> &'static str {
        match self {
            Variant::GaussianKernel => "gaussian",
            Variant::WienerKernel => "wiener",
            Variant::Cvm => "cvm",
            Variant::Cusum => "cusum",
        }
    }
}

/// One reference value with its table coordinates. Comparison only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCell {
    pub table: u8,
    pub n: usize,
    pub p: usize,
    /// `‖ψ‖` for tables 1–2, `a₁` for tables 3–5.
    pub dependence: f64,
    /// Shift height for tables 2 and 4.
    pub mu: Option<f64>,
    pub variant: Variant,
    pub value: f64,
}

const PSI_NORMS: [f64; 5] = [0.0, 0.1, 0.2, 0.4, 0.6];
const AR_COEFFS: [f64; 3] = [0.2, 0.5, 0.8];

// (n, p, [(gaussian, wiener); 5 kernel norms])
type KernelRow = (usize, usize, [(f64, f64); 5]);
// (n, p, [(cvm, cusum); 3 AR coefficients])
type ArRow = (usize, usize, [(f64, f64); 3]);

#[rustfmt::skip]
const TABLE1: &[KernelRow] = &[
    (50, 4, [(0.110, 0.106), (0.118, 0.122), (0.138, 0.154), (0.171, 0.189), (0.274, 0.263)]),
    (50, 5, [(0.098, 0.117), (0.106, 0.124), (0.131, 0.099), (0.159, 0.149), (0.214, 0.235)]),
    (50, 6, [(0.138, 0.111), (0.120, 0.133), (0.143, 0.120), (0.151, 0.168), (0.193, 0.216)]),
    (50, 7, [(0.121, 0.110), (0.117, 0.110), (0.149, 0.116), (0.153, 0.142), (0.209, 0.203)]),
    (50, 8, [(0.104, 0.111), (0.139, 0.125), (0.157, 0.144), (0.164, 0.146), (0.195, 0.211)]),
    (100, 6, [(0.107, 0.107), (0.102, 0.123), (0.139, 0.131), (0.157, 0.177), (0.236, 0.222)]),
    (100, 8, [(0.121, 0.097), (0.118, 0.119), (0.117, 0.133), (0.162, 0.136), (0.199, 0.187)]),
    (100, 10, [(0.105, 0.111), (0.107, 0.113), (0.114, 0.116), (0.123, 0.128), (0.151, 0.170)]),
    (100, 11, [(0.112, 0.089), (0.128, 0.114), (0.104, 0.131), (0.135, 0.120), (0.170, 0.169)]),
    (100, 13, [(0.123, 0.132), (0.138, 0.132), (0.146, 0.133), (0.178, 0.183), (0.204, 0.201)]),
];

#[rustfmt::skip]
const TABLE2: &[KernelRow] = &[
    (50, 4, [(1.000, 1.000), (1.000, 1.000), (0.997, 1.000), (0.988, 0.986), (0.927, 0.894)]),
    (50, 5, [(1.000, 1.000), (0.999, 0.999), (0.998, 0.999), (0.975, 0.972), (0.861, 0.850)]),
    (50, 6, [(1.000, 1.000), (1.000, 0.999), (0.996, 0.998), (0.968, 0.971), (0.859, 0.830)]),
    (50, 7, [(1.000, 1.000), (1.000, 1.000), (0.996, 0.999), (0.969, 0.957), (0.858, 0.828)]),
    (50, 8, [(0.998, 0.998), (0.998, 0.998), (0.989, 0.990), (0.961, 0.949), (0.808, 0.808)]),
];

// The n = 200, p = 12, a1 = 0.8 CUSUM entry is printed as 0.0140 and kept
// verbatim.
#[allow(clippy::approx_constant)]
#[rustfmt::skip]
const TABLE3: &[ArRow] = &[
    (50, 4, [(0.05, 0.064), (0.127, 0.14), (0.23, 0.318)]),
    (50, 5, [(0.044, 0.063), (0.085, 0.097), (0.212, 0.226)]),
    (50, 7, [(0.046, 0.051), (0.076, 0.075), (0.155, 0.145)]),
    (100, 6, [(0.035, 0.078), (0.082, 0.111), (0.254, 0.225)]),
    (100, 8, [(0.056, 0.062), (0.059, 0.079), (0.171, 0.173)]),
    (100, 10, [(0.047, 0.048), (0.072, 0.054), (0.131, 0.123)]),
    (100, 12, [(0.056, 0.064), (0.074, 0.085), (0.122, 0.126)]),
    (200, 8, [(0.061, 0.078), (0.091, 0.061), (0.201, 0.208)]),
    (200, 10, [(0.04, 0.061), (0.064, 0.085), (0.149, 0.156)]),
    (200, 12, [(0.055, 0.061), (0.067, 0.057), (0.137, 0.0140)]),
    (200, 15, [(0.042, 0.057), (0.066, 0.063), (0.1, 0.104)]),
];

// Block lengths per (n, a1) used for the power tables.
const POWER_BLOCKS: [(usize, [usize; 3]); 3] =
    [(50, [4, 7, 7]), (100, [10, 8, 12]), (200, [12, 12, 15])];

// (mu, n, [(cvm, cusum); a1 = 0.2, 0.5, 0.8])
#[allow(clippy::type_complexity)]
#[rustfmt::skip]
const TABLE4: &[(f64, usize, [(f64, f64); 3])] = &[
    (0.5, 50, [(0.23, 0.233), (0.161, 0.156), (0.207, 0.194)]),
    (0.5, 100, [(0.302, 0.315), (0.28, 0.262), (0.206, 0.206)]),
    (0.5, 200, [(0.669, 0.7), (0.456, 0.462), (0.258, 0.295)]),
    (1.0, 50, [(0.686, 0.678), (0.313, 0.431), (0.351, 0.335)]),
    (1.0, 100, [(0.847, 0.851), (0.695, 0.708), (0.419, 0.373)]),
    (1.0, 200, [(0.995, 0.998), (0.937, 0.945), (0.64, 0.630)]),
];

#[rustfmt::skip]
const TABLE5: &[(usize, [(f64, f64); 3])] = &[
    (50, [(0.323, 0.047), (0.244, 0.062), (0.196, 0.08)]),
    (100, [(0.546, 0.033), (0.461, 0.045), (0.223, 0.076)]),
    (200, [(0.945, 0.04), (0.846, 0.045), (0.375, 0.065)]),
];

fn power_block(n: usize, a_index: usize) -> usize {
    POWER_BLOCKS
        .iter()
        .find(|(m, _)| *m == n)
        .map(|(_, ps)| ps[a_index])
        .expect("power tables only use n in {50, 100, 200}")
}

/// All reference values of a table, in reading order.
pub fn reference_cells(table: u8) -> Result<Vec<ReferenceCell>> {
    let mut out = Vec::new();
    match table {
        1 | 2 => {
            let rows = if table == 1 { TABLE1 } else { TABLE2 };
            let mu = (table == 2).then_some(1.0);
            for &(n, p, cols) in rows {
                for (&psi, &(g, w)) in PSI_NORMS.iter().zip(&cols) {
                    for (variant, value) in
                        [(Variant::GaussianKernel, g), (Variant::WienerKernel, w)]
                    {
                        out.push(ReferenceCell {
                            table,
                            n,
                            p,
                            dependence: psi,
                            mu,
                            variant,
                            value,
                        });
                    }
                }
            }
        }
        3 => {
            for &(n, p, cols) in TABLE3 {
                for (&a1, &(c, u)) in AR_COEFFS.iter().zip(&cols) {
                    for (variant, value) in [(Variant::Cvm, c), (Variant::Cusum, u)] {
                        out.push(ReferenceCell {
                            table,
                            n,
                            p,
                            dependence: a1,
                            mu: None,
                            variant,
                            value,
                        });
                    }
                }
            }
        }
        4 => {
            for &(mu, n, cols) in TABLE4 {
                for (a_index, (&a1, &(c, u))) in AR_COEFFS.iter().zip(&cols).enumerate() {
                    let p = power_block(n, a_index);
                    for (variant, value) in [(Variant::Cvm, c), (Variant::Cusum, u)] {
                        out.push(ReferenceCell {
                            table,
                            n,
                            p,
                            dependence: a1,
                            mu: Some(mu),
                            variant,
                            value,
                        });
                    }
                }
            }
        }
        5 => {
            for &(n, cols) in TABLE5 {
                for (a_index, (&a1, &(c, u))) in AR_COEFFS.iter().zip(&cols).enumerate() {
                    let p = power_block(n, a_index);
                    for (variant, value) in [(Variant::Cvm, c), (Variant::Cusum, u)] {
                        out.push(ReferenceCell {
                            table,
                            n,
                            p,
                            dependence: a1,
                            mu: None,
                            variant,
                            value,
                        });
                    }
                }
            }
        }
        other => {
            return Err(CpbError::argument(format!(
                "table id must be 1..=5, got {other}"
            )))
        }
    }
    Ok(out)
}

/// Nominal level of a table.
pub fn table_alpha(table: u8) -> f64 {
    if table <= 2 {
        0.1
    } else {
        0.05
    }
}

/// Weight of the Cramér–von Mises simulations: the standard normal density.
pub fn simulation_weight() -> WeightSpec {
    WeightSpec::gaussian_1d(0.0, 1.0).expect("standard normal weight is valid")
}

/// A reference cell together with the experiment that estimates it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub reference: ReferenceCell,
    pub spec: ExperimentSpec,
}

/// Experiment for a reference cell. Cells that differ only in the variant or
/// the shift height share a master seed and therefore their simulated noise.
pub fn cell_experiment(cell: &ReferenceCell, scale: Scale, seed: u64) -> ExperimentSpec {
    let (runs, replicates) = match scale {
        Scale::Desk => (DESK_RUNS, DESK_REPLICATES),
        Scale::Full => (1000, if cell.table <= 2 { 499 } else { 999 }),
    };
    let model = match cell.variant {
        Variant::GaussianKernel => Model::far1(KernelKind::Gaussian, cell.dependence),
        Variant::WienerKernel => Model::far1(KernelKind::Wiener, cell.dependence),
        Variant::Cvm | Variant::Cusum => Model::Ar1 {
            a1: cell.dependence,
        },
    };
    let change = match (cell.table, cell.mu) {
        (2, Some(mu)) => Change::MeanShift {
            mu,
            shape: ShiftShape::Sine,
            fraction: 0.5,
        },
        (4, Some(mu)) => Change::MeanShift {
            mu,
            shape: ShiftShape::Constant,
            fraction: 0.5,
        },
        (5, _) => Change::Skewness { fraction: 0.5 },
        _ => Change::None,
    };
    let statistic = match cell.variant {
        Variant::Cvm => StatisticKind::Cvm {
            weight: simulation_weight(),
        },
        _ => StatisticKind::Cusum,
    };
    // Kernel and test variants, and shift heights, reuse the same noise.
    let data_key = [
        u64::from(cell.table),
        cell.n as u64,
        cell.p as u64,
        cell.dependence.to_bits(),
    ]
    .iter()
    .fold(seed, |acc, k| derive_seed(acc, *k));
    ExperimentSpec {
        model,
        change,
        n: cell.n,
        block: BlockRule::Fixed { p: cell.p },
        replicates,
        alpha: table_alpha(cell.table),
        runs,
        master_seed: data_key,
        statistic,
    }
}

pub fn table_cells(table: u8, scale: Scale, seed: u64) -> Result<Vec<TableCell>> {
    Ok(reference_cells(table)?
        .into_iter()
        .map(|reference| TableCell {
            spec: cell_experiment(&reference, scale, seed),
            reference,
        })
        .collect())
}

/// One line of a reproduced table. Timing is left out so that output files
/// depend on the seed only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub table: u8,
    pub n: usize,
    pub p: usize,
    pub dependence: f64,
    pub mu: Option<f64>,
    pub variant: Variant,
    pub alpha: f64,
    pub runs: usize,
    pub replicates: usize,
    pub estimate: f64,
    pub ci_halfwidth: f64,
    pub reference: f64,
    pub abs_diff: f64,
}

pub fn run_cell(cell: &TableCell) -> Result<TableRow> {
    let report = run_experiment(&cell.spec)?;
    let r = &cell.reference;
    Ok(TableRow {
        table: r.table,
        n: r.n,
        p: r.p,
        dependence: r.dependence,
        mu: r.mu,
        variant: r.variant,
        alpha: cell.spec.alpha,
        runs: report.runs,
        replicates: cell.spec.replicates,
        estimate: report.rejection_rate,
        ci_halfwidth: report.ci_halfwidth,
        reference: r.value,
        abs_diff: (report.rejection_rate - r.value).abs(),
    })
}

/// Estimates every cell of a table.
pub fn reproduce_table(table: u8, scale: Scale, seed: u64) -> Result<Vec<TableRow>> {
    table_cells(table, scale, seed)?
        .iter()
        .map(run_cell)
        .collect()
}
