// SPDX-License-Identifier: MIT OR Apache-2.0

//! Non-overlapping block bootstrap for change-point statistics.
//!
//! The sample is cut into `k = ⌊n/p⌋` consecutive blocks of length `p`; a
//! resample concatenates `k` blocks drawn uniformly with replacement. The
//! `n − kp` trailing observations never enter a resample, while the observed
//! statistic still uses all `n` of them.
//!
//! Replicate `j` of a test seeded with `seed` draws from
//! [`rng::stream(seed, j)`](crate::rng::stream), so the replicate vector does
//! not depend on how replicates are scheduled across threads.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CpbError, Result};
use crate::hilbert::{Curve, FunctionalSample};
use crate::rng::{self, StreamRng};
use crate::statistics::{
    cusum_statistic, cvm_process_from_gram, first_max, indicator_gram, max_cusum_indexed,
    max_cvm_indexed, Gram, VectorSample, WeightSpec,
};

/// Block layout of a sample of size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPlan {
    pub n: usize,
    /// Block length.
    pub p: usize,
    /// Number of blocks, `⌊n/p⌋`.
    pub k: usize,
    /// Observations covered by blocks, `k·p`.
    pub used: usize,
    pub discarded_tail: usize,
}

impl BlockPlan {
    /// 0-based index range of block `i` (0-based).
    pub fn block(&self, i: usize) -> std::ops::Range<usize> {
        i * self.p..(i + 1) * self.p
    }
}

/// Splits `n` observations into blocks of length `p`. At least two blocks are
/// required; with a single block every resample equals the data.
pub fn block_partition(n: usize, p: usize) -> Result<BlockPlan> {
    if p == 0 {
        return Err(CpbError::argument("block length must be >= 1"));
    }
    if p > n {
        return Err(CpbError::argument(format!(
            "block length p = {p} exceeds sample size n = {n}"
        )));
    }
    let k = n / p;
    if k < 2 {
        return Err(CpbError::argument(format!(
            "block length p = {p} leaves only k = {k} block(s) for n = {n}; need k >= 2"
        )));
    }
    Ok(BlockPlan {
        n,
        p,
        k,
        used: k * p,
        discarded_tail: n - k * p,
    })
}

/// Block length that is constant on dyadic ranges `(2^{l−1}, 2^l]`:
/// `⌈c · (2^l)^e⌉` with `l = ⌈log₂ n⌉`. Nondecreasing in `n`, and `O(n^e)`.
pub fn dyadic_block_length(n: usize, base_constant: f64, exponent: f64) -> Result<usize> {
    if n < 2 {
        return Err(CpbError::argument(format!(
            "sample size must be >= 2, got {n}"
        )));
    }
    if !(exponent > 0.0 && exponent < 1.0) {
        return Err(CpbError::argument(format!(
            "dyadic exponent must lie in (0, 1), got {exponent}"
        )));
    }
    if !(base_constant.is_finite() && base_constant > 0.0) {
        return Err(CpbError::argument(format!(
            "dyadic constant must be positive, got {base_constant}"
        )));
    }
    let l = usize::BITS - (n - 1).leading_zeros();
    let raw = base_constant * 2f64.powf(l as f64 * exponent);
    // Absorb powf rounding, e.g. 64^(1/3) = 3.9999999999999996.
    let p = (raw - 1e-9).ceil().max(1.0);
    Ok(p as usize)
}

/// How the block length is chosen for a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BlockRule {
    Fixed { p: usize },
    Dyadic { constant: f64, exponent: f64 },
}

impl BlockRule {
    pub fn plan(&self, n: usize) -> Result<BlockPlan> {
        match *self {
            BlockRule::Fixed { p } => block_partition(n, p),
            BlockRule::Dyadic { constant, exponent } => {
                block_partition(n, dyadic_block_length(n, constant, exponent)?)
            }
        }
    }
}

impl std::str::FromStr for BlockRule {
    type Err = CpbError;

    /// Parses `<p>` or `dyadic:<c>,<e>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("dyadic:") {
            let (c, e) = rest
                .split_once(',')
                .ok_or_else(|| CpbError::argument(format!("expected dyadic:<c>,<e>, got {s}")))?;
            let constant: f64 = c
                .trim()
                .parse()
                .map_err(|_| CpbError::argument(format!("bad dyadic constant {c:?}")))?;
            let exponent: f64 = e
                .trim()
                .parse()
                .map_err(|_| CpbError::argument(format!("bad dyadic exponent {e:?}")))?;
            return Ok(BlockRule::Dyadic { constant, exponent });
        }
        let p: usize = s
            .parse()
            .map_err(|_| CpbError::argument(format!("bad block length {s:?}")))?;
        Ok(BlockRule::Fixed { p })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub block_rule: BlockRule,
    /// Number of bootstrap replicates `J`.
    pub replicates: usize,
    pub seed: u64,
    pub alpha: f64,
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(CpbError::argument("replicate count must be >= 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CpbError::argument(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Outcome of a bootstrap change-point test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub argmax_m: usize,
    pub quantile: f64,
    pub p_value: f64,
    pub reject: bool,
    pub replicates: Vec<f64>,
    pub plan: BlockPlan,
    pub seed: u64,
    pub alpha: f64,
    /// Observed process, one entry per split point.
    pub process: Vec<f64>,
}

/// Draws `k` block ids uniformly with replacement and returns the source
/// indices of the concatenated blocks.
pub fn resample_indices(plan: &BlockPlan, rng: &mut StreamRng) -> Vec<usize> {
    let mut out = Vec::with_capacity(plan.used);
    for _ in 0..plan.k {
        let b = rng.random_range(0..plan.k);
        out.extend(plan.block(b));
    }
    out
}

fn check_plan(plan: &BlockPlan, n: usize) -> Result<()> {
    if plan.n != n {
        return Err(CpbError::structural(format!(
            "block plan is for n = {} but the sample has {n} observations",
            plan.n
        )));
    }
    Ok(())
}

/// One bootstrap replicate of the functional CUSUM statistic, normalised by
/// the resample length `kp`.
pub fn bootstrap_cusum_statistic(
    s: &FunctionalSample,
    plan: &BlockPlan,
    rng: &mut StreamRng,
) -> Result<f64> {
    check_plan(plan, s.len())?;
    let idx = resample_indices(plan, rng);
    Ok(max_cusum_indexed(s, &idx))
}

/// One bootstrap replicate of the Cramér–von Mises statistic, evaluated by
/// remapping entries of the Gram matrix of the original sample.
pub fn bootstrap_cvm_statistic(
    v: &VectorSample,
    gram: &Gram,
    plan: &BlockPlan,
    rng: &mut StreamRng,
) -> Result<f64> {
    if gram.len() != v.len() {
        return Err(CpbError::structural(format!(
            "Gram matrix is {0}x{0} but the sample has {1} observations",
            gram.len(),
            v.len()
        )));
    }
    check_plan(plan, v.len())?;
    let idx = resample_indices(plan, rng);
    Ok(max_cvm_indexed(gram, &idx))
}

/// Bootstrapped partial-sum process
/// `W*(t) = (kp)^{-1/2} Σ_{i ≤ ⌊kpt⌋} (X*_i − E*X*_i)`, evaluated at each `t`.
///
/// `E*X*_i` depends only on the position `r` of `i` inside its block: it is
/// the average over blocks of the `r`-th observation of each block.
pub fn bootstrap_partial_sum_process(
    s: &FunctionalSample,
    plan: &BlockPlan,
    rng: &mut StreamRng,
    t_grid: &[f64],
) -> Result<Vec<Curve>> {
    check_plan(plan, s.len())?;
    if let Some(t) = t_grid.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(CpbError::argument(format!("t = {t} outside [0, 1]")));
    }
    let grid = s.grid().clone();
    let g = grid.len();
    let kp = plan.used;

    let mut position_mean = vec![vec![0.0; g]; plan.p];
    for b in 0..plan.k {
        for (r, i) in plan.block(b).enumerate() {
            for (acc, x) in position_mean[r].iter_mut().zip(s.values(i)) {
                *acc += x;
            }
        }
    }
    let inv_k = 1.0 / plan.k as f64;
    position_mean
        .iter_mut()
        .for_each(|row| row.iter_mut().for_each(|x| *x *= inv_k));

    let idx = resample_indices(plan, rng);
    // partial[c] = Σ_{i < c} (X*_i − E*X*_i), c = 0..=kp
    let mut partial = Vec::with_capacity(kp + 1);
    let mut acc = vec![0.0; g];
    partial.push(acc.clone());
    for (pos, &i) in idx.iter().enumerate() {
        let centre = &position_mean[pos % plan.p];
        for ((a, x), c) in acc.iter_mut().zip(s.values(i)).zip(centre) {
            *a += x - c;
        }
        partial.push(acc.clone());
    }
    let scale = 1.0 / (kp as f64).sqrt();
    t_grid
        .iter()
        .map(|&t| {
            let count = ((kp as f64 * t).floor() as usize).min(kp);
            let values = partial[count].iter().map(|x| x * scale).collect();
            Curve::new(Arc::clone(&grid), values)
        })
        .collect()
}

/// `r`-th order statistic of the replicates with `r = ⌈(1−α)(J+1)⌉`, clamped to `[1, J]`.
pub fn empirical_quantile(replicates: &[f64], alpha: f64) -> Result<f64> {
    if replicates.is_empty() {
        return Err(CpbError::argument("no replicates"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CpbError::argument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let j = replicates.len();
    let mut sorted = replicates.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[quantile_rank(j, alpha) - 1])
}

/// 1-based rank used by [`empirical_quantile`].
pub fn quantile_rank(j: usize, alpha: f64) -> usize {
    let r = ((1.0 - alpha) * (j + 1) as f64 - 1e-9).ceil();
    (r.max(1.0) as usize).min(j)
}

/// Add-one bootstrap p-value `(1 + #{T*_j ≥ T}) / (J + 1)`.
pub fn p_value(statistic: f64, replicates: &[f64]) -> f64 {
    let exceed = replicates.iter().filter(|r| **r >= statistic).count();
    (1 + exceed) as f64 / (replicates.len() + 1) as f64
}

/// Input of [`run_test`]; the variant selects the statistic.
#[derive(Debug, Clone, Copy)]
pub enum TestData<'a> {
    /// Mean change of functional (or vector) data, CUSUM statistic.
    Cusum(&'a FunctionalSample),
    /// Change in marginal distribution, Cramér–von Mises statistic.
    Cvm(&'a VectorSample, &'a WeightSpec),
}

/// Whether replicates may be spread over the rayon pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Parallel,
    Sequential,
}

/// Full bootstrap test: observed statistic, `J` replicates, quantile, p-value
/// and the decision `statistic > quantile`.
pub fn run_test(data: TestData<'_>, config: &BootstrapConfig) -> Result<TestReport> {
    run_test_with(data, config, Execution::Parallel)
}

pub fn run_test_with(
    data: TestData<'_>,
    config: &BootstrapConfig,
    execution: Execution,
) -> Result<TestReport> {
    config.validate()?;
    match data {
        TestData::Cusum(s) => {
            let plan = config.block_rule.plan(s.len())?;
            let observed = cusum_statistic(s);
            let replicates = replicate(config, execution, |rng| {
                max_cusum_indexed(s, &resample_indices(&plan, rng))
            });
            assemble(
                observed.statistic,
                observed.argmax_m,
                observed.process.unwrap_or_default(),
                replicates,
                plan,
                config,
            )
        }
        TestData::Cvm(v, w) => {
            let plan = config.block_rule.plan(v.len())?;
            let gram = indicator_gram(v, w)?;
            let process = cvm_process_from_gram(&gram);
            let (argmax_m, statistic) = first_max(&process);
            let replicates = replicate(config, execution, |rng| {
                max_cvm_indexed(&gram, &resample_indices(&plan, rng))
            });
            assemble(statistic, argmax_m, process, replicates, plan, config)
        }
    }
}

fn replicate<F>(config: &BootstrapConfig, execution: Execution, one: F) -> Vec<f64>
where
    F: Fn(&mut StreamRng) -> f64 + Sync,
{
    let draw = |j: usize| one(&mut rng::stream(config.seed, j as u64));
    match execution {
        Execution::Parallel => (0..config.replicates).into_par_iter().map(draw).collect(),
        Execution::Sequential => (0..config.replicates).map(draw).collect(),
    }
}

fn assemble(
    statistic: f64,
    argmax_m: usize,
    process: Vec<f64>,
    replicates: Vec<f64>,
    plan: BlockPlan,
    config: &BootstrapConfig,
) -> Result<TestReport> {
    let quantile = empirical_quantile(&replicates, config.alpha)?;
    Ok(TestReport {
        statistic,
        argmax_m,
        quantile,
        p_value: p_value(statistic, &replicates),
        reject: statistic > quantile,
        replicates,
        plan,
        seed: config.seed,
        alpha: config.alpha,
        process,
    })
}

/// Block-sum estimate of `⟨Sh, h⟩`, the long-run variance of `⟨X_i, h⟩`:
/// `(1/k) Σ_b (⟨B_b − p·X̄, h⟩ / √p)²` with `B_b` the `b`-th block sum and `X̄`
/// the mean of the `kp` observations covered by blocks.
pub fn long_run_variance_diagnostic(
    s: &FunctionalSample,
    plan: &BlockPlan,
    h: &Curve,
) -> Result<f64> {
    check_plan(plan, s.len())?;
    if crate::hilbert::norm(h) == 0.0 {
        return Err(CpbError::argument("direction h must be nonzero"));
    }
    // ⟨X_i, h⟩ is linear, so project first and work with scalars.
    let proj: Vec<f64> = (0..plan.used)
        .map(|i| {
            let c = &s.curves()[i];
            crate::hilbert::inner_product(c, h)
        })
        .collect::<Result<_>>()?;
    let mean = proj.iter().sum::<f64>() / plan.used as f64;
    let p = plan.p as f64;
    let spread = (0..plan.k)
        .map(|b| {
            let block_sum: f64 = proj[plan.block(b)].iter().sum();
            let centred = (block_sum - p * mean) / p.sqrt();
            centred * centred
        })
        .sum::<f64>();
    let var = spread / plan.k as f64;
    // Constant data leaves only rounding noise.
    let scale: f64 = proj.iter().map(|x| x * x).sum::<f64>() / plan.used as f64;
    Ok(if var <= 64.0 * f64::EPSILON * scale * p {
        0.0
    } else {
        var
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::Grid;
    use crate::statistics::cvm_statistic;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn block_partition_examples() {
        let plan = block_partition(50, 5).unwrap();
        assert_eq!((plan.k, plan.used, plan.discarded_tail), (10, 50, 0));
        let plan = block_partition(103, 8).unwrap();
        assert_eq!((plan.k, plan.used, plan.discarded_tail), (12, 96, 7));
        assert_eq!(plan.block(1), 8..16);
        assert!(block_partition(7, 8).is_err());
        assert!(block_partition(7, 0).is_err());
        let err = block_partition(10, 6).unwrap_err().to_string();
        assert!(err.contains("k = 1"), "{err}");
    }

    #[test]
    fn dyadic_examples() {
        assert_eq!(dyadic_block_length(50, 1.0, 1.0 / 3.0).unwrap(), 4);
        assert_eq!(dyadic_block_length(64, 1.0, 1.0 / 3.0).unwrap(), 4);
        assert_eq!(dyadic_block_length(65, 1.0, 1.0 / 3.0).unwrap(), 6);
        assert_eq!(dyadic_block_length(2, 1.0, 1.0 / 3.0).unwrap(), 2);
        assert!(dyadic_block_length(50, 1.0, 1.0).is_err());
        assert!(dyadic_block_length(50, 1.0, 0.0).is_err());
        assert!(dyadic_block_length(50, 0.0, 0.5).is_err());
    }

    #[test]
    fn dyadic_is_nondecreasing_and_dyadically_constant() {
        let mut prev = 0;
        for n in 2..5000 {
            let p = dyadic_block_length(n, 1.5, 0.4).unwrap();
            assert!(p >= prev);
            let upper = n.next_power_of_two();
            assert_eq!(p, dyadic_block_length(upper, 1.5, 0.4).unwrap());
            prev = p;
        }
    }

    #[test]
    fn block_rule_parsing() {
        assert_eq!("8".parse::<BlockRule>().unwrap(), BlockRule::Fixed { p: 8 });
        assert_eq!(
            "dyadic:1.5,0.333".parse::<BlockRule>().unwrap(),
            BlockRule::Dyadic {
                constant: 1.5,
                exponent: 0.333
            }
        );
        assert!("dyadic:1".parse::<BlockRule>().is_err());
        assert!("x".parse::<BlockRule>().is_err());
    }

    #[test]
    fn resample_is_whole_blocks_and_deterministic() {
        let plan = block_partition(23, 4).unwrap();
        let a = resample_indices(&plan, &mut rng::stream(5, 0));
        let b = resample_indices(&plan, &mut rng::stream(5, 0));
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
        for chunk in a.chunks(plan.p) {
            assert_eq!(chunk[0] % plan.p, 0);
            assert!(chunk[0] < plan.used);
            assert!(chunk.windows(2).all(|w| w[1] == w[0] + 1));
        }
    }

    #[test]
    fn two_point_resample_law() {
        // p = 1, k = 2: the outcomes (a,a),(a,b),(b,a),(b,b) each have probability 1/4.
        let plan = block_partition(2, 1).unwrap();
        let mut rng = rng::stream(11, 0);
        let draws = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            let idx = resample_indices(&plan, &mut rng);
            counts[idx[0] * 2 + idx[1]] += 1;
        }
        let expected = draws as f64 / 4.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 99.9% point of chi-square with 3 degrees of freedom.
        assert!(chi2 < 16.27, "chi2 = {chi2}, counts = {counts:?}");
        let sigma = (draws as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - expected).abs() < 3.0 * sigma);
        }
    }

    #[test]
    fn block_slot_frequencies() {
        let plan = block_partition(15, 3).unwrap();
        let k = plan.k;
        let draws = 20_000;
        let mut counts = vec![vec![0usize; k]; k];
        let mut rng = rng::stream(3, 9);
        for _ in 0..draws {
            let idx = resample_indices(&plan, &mut rng);
            for slot in 0..k {
                counts[idx[slot * plan.p] / plan.p][slot] += 1;
            }
        }
        let p = 1.0 / k as f64;
        let tol = 3.0 * (p * (1.0 - p) / draws as f64).sqrt();
        // 25 cells: allow for the 3-sigma band with a small margin.
        for row in &counts {
            for &c in row {
                assert!((c as f64 / draws as f64 - p).abs() < tol * 1.3);
            }
        }
    }

    #[test]
    fn constant_sample_replicates_are_zero() {
        let s = FunctionalSample::from_scalars(&[2.5; 12]).unwrap();
        let plan = block_partition(12, 5).unwrap();
        let mut r = rng::stream(1, 1);
        for _ in 0..20 {
            assert_eq!(bootstrap_cusum_statistic(&s, &plan, &mut r).unwrap(), 0.0);
        }
        let v = VectorSample::from_scalars(vec![0.7; 12]).unwrap();
        let w = WeightSpec::gaussian_1d(0.0, 1.0).unwrap();
        let gram = indicator_gram(&v, &w).unwrap();
        for _ in 0..20 {
            assert_eq!(
                bootstrap_cvm_statistic(&v, &gram, &plan, &mut r).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn bootstrap_cusum_equals_statistic_of_materialised_resample() {
        let xs: Vec<f64> = (0..30).map(|i| ((i * 37) % 17) as f64 * 0.3).collect();
        let s = FunctionalSample::from_scalars(&xs).unwrap();
        let plan = block_partition(30, 4).unwrap();
        for j in 0..10 {
            let value = bootstrap_cusum_statistic(&s, &plan, &mut rng::stream(2, j)).unwrap();
            let idx = resample_indices(&plan, &mut rng::stream(2, j));
            let direct = cusum_statistic(&s.select(&idx).unwrap()).statistic;
            assert_eq!(value, direct);
        }
    }

    #[test]
    fn bootstrap_cvm_via_gram_equals_direct_evaluation() {
        let mut g = rng::stream(8, 8);
        let xs: Vec<f64> = (0..41).map(|_| StandardNormal.sample(&mut g)).collect();
        let v = VectorSample::from_scalars(xs).unwrap();
        let w = WeightSpec::gaussian_1d(0.0, 1.0).unwrap();
        let gram = indicator_gram(&v, &w).unwrap();
        let plan = block_partition(41, 3).unwrap();
        for j in 0..50 {
            let value = bootstrap_cvm_statistic(&v, &gram, &plan, &mut rng::stream(4, j)).unwrap();
            let idx = resample_indices(&plan, &mut rng::stream(4, j));
            let direct = cvm_statistic(&v.select(&idx).unwrap(), &w)
                .unwrap()
                .statistic;
            assert!((value - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn bootstrap_cvm_two_point_outcomes() {
        let v = VectorSample::from_scalars(vec![0.0, 1.0]).unwrap();
        let w = WeightSpec::uniform_box(vec![0.0], vec![2.0]).unwrap();
        let gram = indicator_gram(&v, &w).unwrap();
        let plan = block_partition(2, 1).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        let mut r = rng::stream(0, 0);
        for _ in 0..200 {
            let x = bootstrap_cvm_statistic(&v, &gram, &plan, &mut r).unwrap();
            assert!(x == 0.0 || x == 0.0625, "{x}");
            seen.insert(x.to_bits());
        }
        assert_eq!(seen.len(), 2);
    }

    #[test]
    fn gram_shape_mismatch() {
        let v = VectorSample::from_scalars(vec![0.0, 1.0, 2.0]).unwrap();
        let w = WeightSpec::gaussian_1d(0.0, 1.0).unwrap();
        let gram =
            indicator_gram(&VectorSample::from_scalars(vec![0.0, 1.0]).unwrap(), &w).unwrap();
        let plan = block_partition(3, 1).unwrap();
        assert!(matches!(
            bootstrap_cvm_statistic(&v, &gram, &plan, &mut rng::stream(0, 0)),
            Err(CpbError::Structural(_))
        ));
    }

    #[test]
    fn partial_sum_process_endpoints() {
        let grid = Arc::new(Grid::unit_interval(5).unwrap());
        let c = Curve::from_fn(grid.clone(), |t| t + 1.0).unwrap();
        let s = FunctionalSample::new(grid, vec![c; 12]).unwrap();
        let plan = block_partition(12, 3).unwrap();
        let w = bootstrap_partial_sum_process(&s, &plan, &mut rng::stream(0, 0), &[0.0, 0.5, 1.0])
            .unwrap();
        assert!(w.iter().all(|c| c.values().iter().all(|v| v.abs() < 1e-15)));
        assert!(bootstrap_partial_sum_process(&s, &plan, &mut rng::stream(0, 0), &[1.5]).is_err());
    }

    #[test]
    fn partial_sum_with_unit_blocks_is_iid_bootstrap_sum() {
        let xs: Vec<f64> = (0..17).map(|i| (i as f64 * 0.91).sin() * 3.0).collect();
        let s = FunctionalSample::from_scalars(&xs).unwrap();
        let plan = block_partition(17, 1).unwrap();
        let w =
            bootstrap_partial_sum_process(&s, &plan, &mut rng::stream(6, 2), &[0.0, 1.0]).unwrap();
        assert_eq!(w[0].values(), &[0.0]);
        let idx = resample_indices(&plan, &mut rng::stream(6, 2));
        let grand = xs.iter().sum::<f64>() / 17.0;
        let expect = idx.iter().map(|&i| xs[i] - grand).sum::<f64>() / 17f64.sqrt();
        assert!((w[1].values()[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn partial_sum_centres_by_position() {
        // Period-2 data with p = 2: every block is (a, b), so E*X*_i reproduces
        // the data and W* vanishes at every t.
        let xs: Vec<f64> = (0..10)
            .map(|i| if i % 2 == 0 { 1.0 } else { -3.0 })
            .collect();
        let s = FunctionalSample::from_scalars(&xs).unwrap();
        let plan = block_partition(10, 2).unwrap();
        let t: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let w = bootstrap_partial_sum_process(&s, &plan, &mut rng::stream(1, 0), &t).unwrap();
        assert!(w.iter().all(|c| c.values()[0] == 0.0));
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(quantile_rank(999, 0.05), 950);
        assert_eq!(quantile_rank(499, 0.10), 450);
        assert_eq!(quantile_rank(499, 0.05), 475);
        assert_eq!(quantile_rank(1, 0.05), 1);
        let reps: Vec<f64> = (1..=999).rev().map(f64::from).collect();
        assert_eq!(empirical_quantile(&reps, 0.05).unwrap(), 950.0);
        assert_eq!(empirical_quantile(&[3.0; 7], 0.2).unwrap(), 3.0);
        assert!(empirical_quantile(&[], 0.1).is_err());
        assert!(empirical_quantile(&[1.0], 1.0).is_err());
    }

    #[test]
    fn run_test_on_constant_data_never_rejects() {
        let s = FunctionalSample::from_scalars(&[1.0; 20]).unwrap();
        let cfg = BootstrapConfig {
            block_rule: BlockRule::Fixed { p: 3 },
            replicates: 99,
            seed: 1,
            alpha: 0.05,
        };
        let r = run_test(TestData::Cusum(&s), &cfg).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(!r.reject);
        let v = VectorSample::from_scalars(vec![4.0; 20]).unwrap();
        let w = WeightSpec::gaussian_1d(0.0, 1.0).unwrap();
        let r = run_test(TestData::Cvm(&v, &w), &cfg).unwrap();
        assert_eq!((r.p_value, r.reject), (1.0, false));
    }

    #[test]
    fn run_test_is_deterministic_and_schedule_independent() {
        let mut g = rng::stream(99, 0);
        let xs: Vec<f64> = (0..60).map(|_| StandardNormal.sample(&mut g)).collect();
        let s = FunctionalSample::from_scalars(&xs).unwrap();
        let cfg = BootstrapConfig {
            block_rule: BlockRule::Dyadic {
                constant: 1.0,
                exponent: 1.0 / 3.0,
            },
            replicates: 199,
            seed: 42,
            alpha: 0.1,
        };
        let a = run_test(TestData::Cusum(&s), &cfg).unwrap();
        let b = run_test(TestData::Cusum(&s), &cfg).unwrap();
        let c = run_test_with(TestData::Cusum(&s), &cfg, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a.plan.p, 4);
    }

    #[test]
    fn strong_change_gives_minimal_p_value() {
        let xs: Vec<f64> = (0..40)
            .map(|i| if i < 20 { 0.0 } else { 10.0 } + (i % 3) as f64 * 0.1)
            .collect();
        let s = FunctionalSample::from_scalars(&xs).unwrap();
        let cfg = BootstrapConfig {
            block_rule: BlockRule::Fixed { p: 4 },
            replicates: 99,
            seed: 3,
            alpha: 0.05,
        };
        let r = run_test(TestData::Cusum(&s), &cfg).unwrap();
        assert!(r.replicates.iter().all(|x| *x < r.statistic));
        assert_eq!(r.p_value, 0.01);
        assert!(r.reject);
        assert_eq!(r.argmax_m, 20);
    }

    #[test]
    fn long_run_variance_examples() {
        let s = FunctionalSample::from_scalars(&[3.0; 64]).unwrap();
        let plan = block_partition(64, 4).unwrap();
        let one = Curve::constant(s.grid().clone(), 1.0);
        assert_eq!(long_run_variance_diagnostic(&s, &plan, &one).unwrap(), 0.0);
        let zero = Curve::zeros(s.grid().clone());
        assert!(long_run_variance_diagnostic(&s, &plan, &zero).is_err());

        let n = 200_000;
        let mut g = rng::stream(12, 0);
        let xs: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut g)).collect();
        let s = FunctionalSample::from_scalars(&xs).unwrap();
        let plan = block_partition(n, (n as f64).cbrt().ceil() as usize).unwrap();
        let one = Curve::constant(s.grid().clone(), 1.0);
        let est = long_run_variance_diagnostic(&s, &plan, &one).unwrap();
        // sd of the estimate is about sqrt(2/k) = 0.044.
        assert!((est - 1.0).abs() < 0.15, "{est}");

        // AR(1) with a = 0.5 and unit marginal variance: (1 + a)/(1 − a) = 3.
        let xs = crate::simulation::ar1_series(0.5, n, &mut rng::stream(13, 0)).unwrap();
        let s = FunctionalSample::from_scalars(&xs).unwrap();
        let plan = block_partition(n, 200).unwrap();
        let est = long_run_variance_diagnostic(&s, &plan, &one).unwrap();
        // Bias about -0.02, sd about 3 * sqrt(2/1000) = 0.13.
        assert!((est - 3.0).abs() < 0.4, "{est}");
    }
}
