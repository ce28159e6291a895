// SPDX-License-Identifier: MIT OR Apache-2.0

//! Change-point statistics.
//!
//! Two statistics share one shape, `max_m` of a nonnegative process over split
//! points `m = 1..n−1`:
//!
//! - the CUSUM statistic of a [`FunctionalSample`], `n^{-1/2} ‖Σ_{i≤m} X_i − (m/n) Σ X_i‖`;
//! - the Cramér–von Mises statistic of a [`VectorSample`], the same CUSUM form
//!   applied to the indicator curves `t ↦ 1{X_i ≤ t}` in `L²(w)`, divided by `n`
//!   instead of `√n` and without the square root.
//!
//! For the Cramér–von Mises statistic every inner product of two indicator
//! curves is an entry of the [`Gram`] matrix, so the process reduces to the
//! quadratic forms `aᵀKa / n`. The Gram matrix is built once per dataset; the
//! bootstrap evaluates resamples by index remapping into it.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{CpbError, Result};
use crate::hilbert::{FunctionalSample, Grid};

/// Maximum of a change-point process with its location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CusumResult {
    pub statistic: f64,
    /// 1-based split point: the first `argmax_m` observations form the
    /// pre-change segment. Ties resolve to the smallest index.
    pub argmax_m: usize,
    /// Entry `m − 1` holds the process value at split point `m`.
    pub process: Option<Vec<f64>>,
}

impl CusumResult {
    fn from_process(process: Vec<f64>) -> Self {
        let (argmax_m, statistic) = first_max(&process);
        Self {
            statistic,
            argmax_m,
            process: Some(process),
        }
    }
}

/// Smallest 1-based index attaining the maximum.
pub(crate) fn first_max(process: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (i, v) in process.iter().enumerate() {
        if *v > process[best] {
            best = i;
        }
    }
    (best + 1, process[best])
}

fn max_of(process: &[f64]) -> f64 {
    process.iter().copied().fold(0.0, f64::max)
}

/// `n` observations in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSample {
    dim: usize,
    data: Vec<f64>,
}

impl VectorSample {
    pub fn new(dim: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(CpbError::argument("vector sample dimension must be >= 1"));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(CpbError::structural(format!(
                    "row {i} has length {} but dimension is {dim}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(dim, data)
    }

    /// Real-valued series (`d = 1`).
    pub fn from_scalars(values: Vec<f64>) -> Result<Self> {
        Self::from_flat(1, values)
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(CpbError::structural(format!(
                "{} values do not form rows of dimension {dim}",
                data.len()
            )));
        }
        let n = data.len() / dim;
        if n < 2 {
            return Err(CpbError::argument(format!(
                "a vector sample needs at least 2 observations, got {n}"
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(CpbError::argument(format!(
                "observation {} has a non-finite coordinate",
                pos / dim
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Coordinate `r` of every observation.
    pub fn column(&self, r: usize) -> Vec<f64> {
        self.rows().map(|row| row[r]).collect()
    }

    pub fn select(&self, indices: &[usize]) -> Result<VectorSample> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.len() {
                return Err(CpbError::argument(format!("index {i} out of range")));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::from_flat(self.dim, data)
    }

    /// The same observations as curves on the Euclidean grid of `R^d`, for the
    /// ordinary (mean-change) CUSUM test.
    pub fn to_functional(&self) -> Result<FunctionalSample> {
        let grid = std::sync::Arc::new(Grid::euclidean(self.dim)?);
        FunctionalSample::from_rows(grid, self.rows().map(<[f64]>::to_vec).collect())
    }
}

impl std::str::FromStr for WeightSpec {
    type Err = CpbError;

    /// Parses `gaussian:<mean>,<sd>` or `uniform:<lo>,<hi>` (one dimension).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| CpbError::argument(format!("expected <kind>:<a>,<b>, got {s:?}")))?;
        let parsed: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| CpbError::argument(format!("bad weight parameters {args:?}")))?;
        let [a, b] = parsed[..] else {
            return Err(CpbError::argument(format!(
                "weight {kind} takes two parameters, got {args:?}"
            )));
        };
        match kind {
            "gaussian" => WeightSpec::gaussian_1d(a, b),
            "uniform" => WeightSpec::uniform_box(vec![a], vec![b]),
            other => Err(CpbError::argument(format!(
                "unknown weight {other:?}; expected gaussian or uniform"
            ))),
        }
    }
}

/// Shape of a weight function on `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightKind {
    /// Product of normal densities.
    GaussianProduct { means: Vec<f64>, sds: Vec<f64> },
    /// Product of uniform densities on `[lo_r, hi_r]`.
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    /// Density values on a grid in one dimension, linearly interpolated between
    /// grid points and zero outside.
    Tabulated { points: Vec<f64>, density: Vec<f64> },
}

/// Weight function `w` of the `L²(w)` inner product on indicator curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub kind: WeightKind,
    /// `∫ w`. The analytic kinds are probability densities scaled by this mass.
    pub total_mass: f64,
}

impl WeightSpec {
    pub fn gaussian(means: Vec<f64>, sds: Vec<f64>) -> Result<Self> {
        if means.is_empty() || means.len() != sds.len() {
            return Err(CpbError::argument(
                "gaussian weight needs equally many (>= 1) means and sds",
            ));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(CpbError::argument("gaussian weight means must be finite"));
        }
        if sds.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(CpbError::argument("gaussian weight sds must be positive"));
        }
        Ok(Self {
            kind: WeightKind::GaussianProduct { means, sds },
            total_mass: 1.0,
        })
    }

    /// One-dimensional normal density.
    pub fn gaussian_1d(mean: f64, sd: f64) -> Result<Self> {
        Self::gaussian(vec![mean], vec![sd])
    }

    pub fn uniform_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(CpbError::argument(
                "uniform weight needs equally many (>= 1) lower and upper bounds",
            ));
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b))
        {
            return Err(CpbError::argument(
                "uniform weight needs finite lo < hi in every coordinate",
            ));
        }
        Ok(Self {
            kind: WeightKind::UniformBox { lo, hi },
            total_mass: 1.0,
        })
    }

    pub fn tabulated(points: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if points.len() < 2 || points.len() != density.len() {
            return Err(CpbError::argument(
                "tabulated weight needs >= 2 points and one density value per point",
            ));
        }
        if points.windows(2).any(|w| !(w[0] < w[1])) || points.iter().any(|p| !p.is_finite()) {
            return Err(CpbError::argument(
                "tabulated weight points must be finite and strictly increasing",
            ));
        }
        if density.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(CpbError::argument(
                "tabulated weight density must be finite and nonnegative",
            ));
        }
        let total_mass = TabulatedTail::new(&points, &density).total();
        if !(total_mass > 0.0) {
            return Err(CpbError::argument("tabulated weight has zero mass"));
        }
        Ok(Self {
            kind: WeightKind::Tabulated { points, density },
            total_mass,
        })
    }

    /// Rescales an analytic weight to integrate to `mass`.
    pub fn with_total_mass(mut self, mass: f64) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(CpbError::argument("total mass must be finite and positive"));
        }
        if matches!(self.kind, WeightKind::Tabulated { .. }) {
            return Err(CpbError::argument(
                "the mass of a tabulated weight is fixed by its density values",
            ));
        }
        self.total_mass = mass;
        Ok(self)
    }

    /// Dimension the weight lives on.
    pub fn dim(&self) -> usize {
        match &self.kind {
            WeightKind::GaussianProduct { means, .. } => means.len(),
            WeightKind::UniformBox { lo, .. } => lo.len(),
            WeightKind::Tabulated { .. } => 1,
        }
    }

    /// `∫_{t ≥ x} w(t) dt` coordinatewise, i.e. the inner product of two
    /// indicator curves whose componentwise maximum is `x`, normalised by the
    /// total mass per coordinate.
    fn tail_fractions(&self, sample: &VectorSample) -> Vec<f64> {
        match &self.kind {
            WeightKind::GaussianProduct { means, sds } => sample
                .rows()
                .flat_map(|row| {
                    row.iter()
                        .zip(means.iter().zip(sds))
                        .map(|(x, (m, s))| 0.5 * erfc((x - m) / (s * std::f64::consts::SQRT_2)))
                })
                .collect(),
            WeightKind::UniformBox { lo, hi } => sample
                .rows()
                .flat_map(|row| {
                    row.iter()
                        .zip(lo.iter().zip(hi))
                        .map(|(x, (a, b))| ((b - x) / (b - a)).clamp(0.0, 1.0))
                })
                .collect(),
            WeightKind::Tabulated { points, density } => {
                let tail = TabulatedTail::new(points, density);
                let total = tail.total();
                sample.rows().map(|row| tail.eval(row[0]) / total).collect()
            }
        }
    }
}

/// Exact tail integrals of the piecewise-linear interpolant of a tabulated density.
struct TabulatedTail<'a> {
    points: &'a [f64],
    density: &'a [f64],
    /// `cum[j] = ∫_{t_j}^{t_last}`.
    cum: Vec<f64>,
}

impl<'a> TabulatedTail<'a> {
    fn new(points: &'a [f64], density: &'a [f64]) -> Self {
        let g = points.len();
        let mut cum = vec![0.0; g];
        for j in (0..g - 1).rev() {
            let h = points[j + 1] - points[j];
            cum[j] = cum[j + 1] + 0.5 * h * (density[j] + density[j + 1]);
        }
        Self {
            points,
            density,
            cum,
        }
    }

    fn total(&self) -> f64 {
        self.cum[0]
    }

    fn eval(&self, x: f64) -> f64 {
        let pts = self.points;
        if x <= pts[0] {
            return self.cum[0];
        }
        if x >= pts[pts.len() - 1] {
            return 0.0;
        }
        // pts[l] <= x < pts[l + 1]
        let l = pts.partition_point(|&t| t <= x) - 1;
        let h = pts[l + 1] - pts[l];
        let frac = (x - pts[l]) / h;
        let wx = self.density[l] + frac * (self.density[l + 1] - self.density[l]);
        0.5 * (pts[l + 1] - x) * (wx + self.density[l + 1]) + self.cum[l + 1]
    }
}

/// Symmetric `n × n` matrix of indicator inner products `⟨1{X_i ≤ ·}, 1{X_j ≤ ·}⟩_w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    n: usize,
    data: Vec<f64>,
}

impl Gram {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// Builds the indicator Gram matrix.
///
/// Since `1 − F` is nonincreasing, `∫ 1{X_i ≤ t} 1{X_j ≤ t} w(t) dt` equals
/// `mass · ∏_r min(T_{i,r}, T_{j,r})` with `T_{i,r} = 1 − F_r(X_{i,r})`, where
/// `F_r` is the normalised CDF of the `r`-th weight factor. For analytic
/// weights `F_r` is evaluated in closed form; for tabulated weights it is the
/// exact integral of the interpolated density.
pub fn indicator_gram(v: &VectorSample, w: &WeightSpec) -> Result<Gram> {
    if w.dim() != v.dim() {
        return Err(CpbError::argument(format!(
            "weight has dimension {} but data has dimension {}",
            w.dim(),
            v.dim()
        )));
    }
    let n = v.len();
    let d = v.dim();
    let tails = w.tail_fractions(v);
    let mass = w.total_mass;
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        let ti = &tails[i * d..(i + 1) * d];
        for j in i..n {
            let tj = &tails[j * d..(j + 1) * d];
            let k = mass * ti.iter().zip(tj).map(|(a, b)| a.min(*b)).product::<f64>();
            data[i * n + j] = k;
            data[j * n + i] = k;
        }
    }
    Ok(Gram { n, data })
}

/// CUSUM process `m ↦ N^{-1/2} ‖Σ_{i≤m} Y_i − (m/N) Σ_{i≤N} Y_i‖` where
/// `Y_i = X_{indices[i]}` and `N = indices.len()`.
///
/// Coordinates of the deviation within the rounding-error bound of the
/// partial sums are treated as exact zeros, so that constant data gives an
/// identically zero process.
pub(crate) fn cusum_process_indexed(s: &FunctionalSample, indices: &[usize]) -> Vec<f64> {
    let n_obs = indices.len();
    let grid = s.grid();
    let g = grid.len();
    let mut total = vec![0.0; g];
    let mut total_abs = vec![0.0; g];
    for &i in indices {
        for ((t, ta), x) in total.iter_mut().zip(&mut total_abs).zip(s.values(i)) {
            *t += x;
            *ta += x.abs();
        }
    }
    let noise = 4.0 * n_obs as f64 * f64::EPSILON;
    let inv_sqrt_n = 1.0 / (n_obs as f64).sqrt();
    let weights = grid.quad_weights();
    let mut head = vec![0.0; g];
    let mut head_abs = vec![0.0; g];
    let mut out = Vec::with_capacity(n_obs.saturating_sub(1));
    for (m, &i) in indices.iter().enumerate().take(n_obs.saturating_sub(1)) {
        let ratio = (m + 1) as f64 / n_obs as f64;
        let mut sq = 0.0;
        for (j, x) in s.values(i).iter().enumerate() {
            head[j] += x;
            head_abs[j] += x.abs();
            let dev = head[j] - ratio * total[j];
            if dev.abs() > noise * (head_abs[j] + ratio * total_abs[j]) {
                sq += dev * dev * weights[j];
            }
        }
        out.push(sq.sqrt() * inv_sqrt_n);
    }
    out
}

/// Cramér–von Mises process `m ↦ aᵀKa / N` over the remapped Gram entries
/// `K_{ij} = gram[indices[i], indices[j]]`, with `a_i = 1{i ≤ m} − m/N`.
///
/// Expanding `aᵀKa = A_m − 2(m/N) B_m + (m/N)² T` with `A_m` the leading
/// `m × m` block sum, `B_m` the sum of the first `m` row sums and `T` the grand
/// total gives an `O(N²)` sweep over all split points.
pub(crate) fn cvm_process_indexed(gram: &Gram, indices: &[usize]) -> Vec<f64> {
    let n_obs = indices.len();
    let mut prefix = vec![0.0; n_obs];
    let mut row_sum = vec![0.0; n_obs];
    for (a, &u) in indices.iter().enumerate() {
        let row = gram.row(u);
        let mut before = 0.0;
        let mut all = 0.0;
        for (b, &v) in indices.iter().enumerate() {
            let k = row[v];
            if b < a {
                before += k;
            }
            all += k;
        }
        prefix[a] = before;
        row_sum[a] = all;
    }
    let total: f64 = row_sum.iter().sum();
    let noise = 4.0 * (n_obs * n_obs) as f64 * f64::EPSILON;
    let inv_n = 1.0 / n_obs as f64;
    let mut block = 0.0;
    let mut head_rows = 0.0;
    let mut out = Vec::with_capacity(n_obs.saturating_sub(1));
    for a in 0..n_obs.saturating_sub(1) {
        let u = indices[a];
        block += 2.0 * prefix[a] + gram.get(u, u);
        head_rows += row_sum[a];
        let ratio = (a + 1) as f64 * inv_n;
        let q = block - 2.0 * ratio * head_rows + ratio * ratio * total;
        let scale = block + 2.0 * ratio * head_rows + ratio * ratio * total;
        out.push(if q > noise * scale { q * inv_n } else { 0.0 });
    }
    out
}

pub(crate) fn identity_indices(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// Functional CUSUM process, one entry per split point `m = 1..n−1`.
pub fn cusum_process(s: &FunctionalSample) -> Vec<f64> {
    cusum_process_indexed(s, &identity_indices(s.len()))
}

pub fn cusum_statistic(s: &FunctionalSample) -> CusumResult {
    CusumResult::from_process(cusum_process(s))
}

/// Cramér–von Mises process from a precomputed Gram matrix.
pub fn cvm_process_from_gram(gram: &Gram) -> Vec<f64> {
    cvm_process_indexed(gram, &identity_indices(gram.len()))
}

pub fn cvm_process(v: &VectorSample, w: &WeightSpec) -> Result<Vec<f64>> {
    Ok(cvm_process_from_gram(&indicator_gram(v, w)?))
}

pub fn cvm_statistic(v: &VectorSample, w: &WeightSpec) -> Result<CusumResult> {
    Ok(CusumResult::from_process(cvm_process(v, w)?))
}

pub(crate) fn max_cusum_indexed(s: &FunctionalSample, indices: &[usize]) -> f64 {
    max_of(&cusum_process_indexed(s, indices))
}

pub(crate) fn max_cvm_indexed(gram: &Gram, indices: &[usize]) -> f64 {
    max_of(&cvm_process_indexed(gram, indices))
}

/// Drift profile of a local alternative with relative change location `tau`:
/// `t(1−τ)` up to `τ`, `(1−t)τ` after.
pub fn phi_tau(t: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(CpbError::argument(format!(
            "tau must lie in (0, 1), got {tau}"
        )));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(CpbError::argument(format!("t must lie in [0, 1], got {t}")));
    }
    Ok(if t <= tau {
        t * (1.0 - tau)
    } else {
        (1.0 - t) * tau
    })
}
