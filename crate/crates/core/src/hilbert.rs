// SPDX-License-Identifier: MIT OR Apache-2.0

//! Discretised Hilbert-space arithmetic.
//!
//! An element of `L²` is stored as its values on a [`Grid`]; integrals become
//! weighted sums with the grid's quadrature weights. Curves on different grids
//! never mix: every binary operation checks that both sides share a grid.

use std::sync::Arc;

use crate::error::{CpbError, Result};

/// Quadrature grid shared by a family of curves.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    quad_weights: Vec<f64>,
}

impl Grid {
    /// Builds a grid from explicit points and quadrature weights.
    ///
    /// A single point is accepted so that real-valued data can be handled as a
    /// one-point "curve" with unit weight.
    pub fn new(points: Vec<f64>, quad_weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(CpbError::argument("grid must contain at least one point"));
        }
        if points.len() != quad_weights.len() {
            return Err(CpbError::structural(format!(
                "grid has {} points but {} quadrature weights",
                points.len(),
                quad_weights.len()
            )));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(CpbError::argument("grid points must be finite"));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CpbError::argument(
                "grid points must be strictly increasing",
            ));
        }
        if quad_weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(CpbError::argument(
                "quadrature weights must be finite and nonnegative",
            ));
        }
        Ok(Self {
            points,
            quad_weights,
        })
    }

    /// Trapezoidal rule on arbitrary strictly increasing points (at least two).
    pub fn trapezoid(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(CpbError::argument(format!(
                "trapezoidal grid needs at least 2 points, got {}",
                points.len()
            )));
        }
        let g = points.len();
        let mut weights = vec![0.0; g];
        for j in 0..g - 1 {
            let h = points[j + 1] - points[j];
            weights[j] += 0.5 * h;
            weights[j + 1] += 0.5 * h;
        }
        Self::new(points, weights)
    }

    /// `size` equally spaced points on `[lo, hi]` with trapezoidal weights
    /// (`h` inside, `h/2` at both ends).
    pub fn uniform(lo: f64, hi: f64, size: usize) -> Result<Self> {
        if size < 2 {
            return Err(CpbError::argument(format!(
                "uniform grid needs at least 2 points, got {size}"
            )));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(CpbError::argument(format!(
                "uniform grid needs finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        let h = (hi - lo) / (size - 1) as f64;
        let mut points: Vec<f64> = (0..size).map(|j| lo + j as f64 * h).collect();
        // Pin the right endpoint exactly; curves rely on t = 1 being representable.
        points[size - 1] = hi;
        let mut weights = vec![h; size];
        weights[0] = 0.5 * h;
        weights[size - 1] = 0.5 * h;
        Self::new(points, weights)
    }

    /// The default grid for functional simulations: 100 uniform points on `[0, 1]`.
    pub fn unit_interval(size: usize) -> Result<Self> {
        Self::uniform(0.0, 1.0, size)
    }

    /// Index grid `1..=size` with weights `1/size`: a mean-type inner product on
    /// `R^size`, used for annual curves of daily observations.
    pub fn discrete_mean(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(CpbError::argument("discrete grid needs at least 1 point"));
        }
        let w = 1.0 / size as f64;
        Self::new((1..=size).map(|j| j as f64).collect(), vec![w; size])
    }

    /// Index grid with unit weights: the Euclidean inner product on `R^dim`.
    pub fn euclidean(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(CpbError::argument("euclidean grid needs dim >= 1"));
        }
        Self::new((0..dim).map(|j| j as f64).collect(), vec![1.0; dim])
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    /// Weighted sum `Σ_j a_j b_j w_j`, always accumulated left to right.
    pub(crate) fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.quad_weights)
            .map(|((x, y), w)| x * y * w)
            .sum()
    }

    /// `Σ_j a_j² w_j`.
    pub(crate) fn sq_norm(&self, a: &[f64]) -> f64 {
        a.iter()
            .zip(&self.quad_weights)
            .map(|(x, w)| x * x * w)
            .sum()
    }
}

/// True when two grids are the same object or have identical points and weights.
pub fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// A function sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(CpbError::structural(format!(
                "curve has {} values but grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(CpbError::argument(format!(
                "curve value at grid index {j} is not finite"
            )));
        }
        Ok(Self { grid, values })
    }

    /// Evaluates `f` at every grid point.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Pointwise `a·self + b·other`.
    pub fn linear_combination(&self, a: f64, other: &Curve, b: f64) -> Result<Curve> {
        check_grids(&self.grid, &other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Curve::new(self.grid.clone(), values)
    }

    pub fn scaled(&self, a: f64) -> Curve {
        Curve {
            grid: self.grid.clone(),
            values: self.values.iter().map(|x| a * x).collect(),
        }
    }
}

fn check_grids(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if same_grid(a, b) {
        Ok(())
    } else {
        Err(CpbError::structural(
            "curves are defined on different grids",
        ))
    }
}

/// Quadrature inner product `Σ_j f(t_j) g(t_j) w_j`.
pub fn inner_product(f: &Curve, g: &Curve) -> Result<f64> {
    check_grids(&f.grid, &g.grid)?;
    Ok(f.grid.dot(&f.values, &g.values))
}

pub fn norm(f: &Curve) -> f64 {
    f.grid.sq_norm(&f.values).sqrt()
}

/// An ordered sequence of curves on one shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSample {
    grid: Arc<Grid>,
    curves: Vec<Curve>,
}

impl FunctionalSample {
    /// Wraps curves that must all live on `grid`. At least two are required.
    pub fn new(grid: Arc<Grid>, curves: Vec<Curve>) -> Result<Self> {
        if curves.len() < 2 {
            return Err(CpbError::argument(format!(
                "a functional sample needs at least 2 curves, got {}",
                curves.len()
            )));
        }
        for (i, c) in curves.iter().enumerate() {
            if !same_grid(&grid, &c.grid) {
                return Err(CpbError::structural(format!(
                    "curve {i} is not on the sample grid"
                )));
            }
        }
        Ok(Self { grid, curves })
    }

    /// Builds a sample from raw value rows.
    pub fn from_rows(grid: Arc<Grid>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let curves = rows
            .into_iter()
            .map(|r| Curve::new(grid.clone(), r))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, curves)
    }

    /// Real-valued observations as one-point curves with unit weight, so that
    /// the norm is the absolute value.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        let grid = Arc::new(Grid::euclidean(1)?);
        Self::from_rows(grid, values.iter().map(|&v| vec![v]).collect())
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub(crate) fn values(&self, i: usize) -> &[f64] {
        &self.curves[i].values
    }

    /// Selects curves by index (repetitions allowed). The result may have
    /// fewer than two curves only if `indices` does.
    pub fn select(&self, indices: &[usize]) -> Result<FunctionalSample> {
        let curves = indices
            .iter()
            .map(|&i| {
                self.curves
                    .get(i)
                    .cloned()
                    .ok_or_else(|| CpbError::argument(format!("index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        FunctionalSample::new(self.grid.clone(), curves)
    }

    /// Applies `f(i, values)` to every curve, producing a sample on the same grid.
    pub fn map_curves(&self, mut f: impl FnMut(usize, &[f64]) -> Vec<f64>) -> Result<Self> {
        let rows = self
            .curves
            .iter()
            .enumerate()
            .map(|(i, c)| f(i, &c.values))
            .collect();
        Self::from_rows(self.grid.clone(), rows)
    }
}

/// Pointwise arithmetic mean of the curves.
pub fn sample_mean(s: &FunctionalSample) -> Result<Curve> {
    mean_of(&s.grid, s.curves.iter().map(|c| c.values.as_slice()))
}

pub(crate) fn mean_of<'a>(
    grid: &Arc<Grid>,
    rows: impl ExactSizeIterator<Item = &'a [f64]>,
) -> Result<Curve> {
    let n = rows.len();
    if n == 0 {
        return Err(CpbError::structural("mean of an empty sample"));
    }
    let mut acc = vec![0.0; grid.len()];
    for row in rows {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    let inv = 1.0 / n as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    Curve::new(grid.clone(), acc)
}

/// Unnormalised CUSUM deviation `Σ_{i≤m} X_i − (m/n) Σ_{i≤n} X_i` for `1 ≤ m ≤ n−1`.
pub fn cusum_deviation(s: &FunctionalSample, m: usize) -> Result<Curve> {
    let n = s.len();
    if m == 0 || m >= n {
        return Err(CpbError::argument(format!(
            "split point m = {m} outside 1..={}",
            n - 1
        )));
    }
    let g = s.grid.len();
    let mut head = vec![0.0; g];
    let mut total = vec![0.0; g];
    for (i, c) in s.curves.iter().enumerate() {
        for j in 0..g {
            total[j] += c.values[j];
            if i < m {
                head[j] += c.values[j];
            }
        }
    }
    let ratio = m as f64 / n as f64;
    let values = head
        .iter()
        .zip(&total)
        .map(|(h, t)| h - ratio * t)
        .collect();
    Curve::new(s.grid.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(g: usize) -> Arc<Grid> {
        Arc::new(Grid::unit_interval(g).unwrap())
    }

    #[test]
    fn uniform_grid_weights_sum_to_length() {
        let g = Grid::uniform(0.0, 2.0, 11).unwrap();
        let total: f64 = g.quad_weights().iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        assert_eq!(g.quad_weights()[0], 0.1);
        assert_eq!(*g.points().last().unwrap(), 2.0);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(Grid::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(Grid::new(vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
        assert!(Grid::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(Grid::uniform(0.0, 1.0, 1).is_err());
        assert!(Grid::uniform(1.0, 0.0, 5).is_err());
    }

    #[test]
    fn inner_product_of_ones_is_domain_length() {
        let g = unit(50);
        let one = Curve::constant(g.clone(), 1.0);
        assert!((inner_product(&one, &one).unwrap() - 1.0).abs() < 1e-14);
        let zero = Curve::zeros(g);
        assert_eq!(inner_product(&zero, &one).unwrap(), 0.0);
    }

    #[test]
    fn inner_product_of_identity_converges_to_one_third() {
        // Trapezoid error for ∫t² is h²/6 exactly.
        let mut prev = f64::INFINITY;
        for g in [11, 101, 1001] {
            let grid = unit(g);
            let f = Curve::from_fn(grid, |t| t).unwrap();
            let err = (inner_product(&f, &f).unwrap() - 1.0 / 3.0).abs();
            let h = 1.0 / (g - 1) as f64;
            assert!((err - h * h / 6.0).abs() < 1e-12);
            assert!(err < prev);
            prev = err;
        }
    }

    #[test]
    fn norm_examples() {
        let g = unit(1000);
        assert_eq!(norm(&Curve::zeros(g.clone())), 0.0);
        assert!((norm(&Curve::constant(g.clone(), -3.0)) - 3.0).abs() < 1e-12);
        let s = Curve::from_fn(g, f64::sin).unwrap();
        let exact = (0.5 - (2.0f64).sin() / 4.0).sqrt();
        assert!((norm(&s) - exact).abs() < 1e-4);
        assert!((exact - 0.522_18).abs() < 1e-5);
    }

    #[test]
    fn grid_mismatch_is_structural() {
        let a = Curve::constant(unit(10), 1.0);
        let b = Curve::constant(unit(11), 1.0);
        assert!(matches!(
            inner_product(&a, &b),
            Err(CpbError::Structural(_))
        ));
        // Equal-but-distinct grids are accepted.
        let c = Curve::constant(unit(10), 2.0);
        assert!((inner_product(&a, &c).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sample_mean_examples() {
        let g = unit(5);
        let c = Curve::from_fn(g.clone(), |t| t * t).unwrap();
        let s = FunctionalSample::new(g.clone(), vec![c.clone(), c.clone(), c.clone()]).unwrap();
        assert_eq!(sample_mean(&s).unwrap(), c);

        let s = FunctionalSample::new(g.clone(), vec![c.clone(), c.scaled(-1.0)]).unwrap();
        assert!(sample_mean(&s).unwrap().values().iter().all(|v| *v == 0.0));

        let s = FunctionalSample::from_scalars(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(sample_mean(&s).unwrap().values(), &[2.0]);
    }

    #[test]
    fn cusum_deviation_scalar_example() {
        let s = FunctionalSample::from_scalars(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(cusum_deviation(&s, 2).unwrap().values(), &[-2.0]);
        assert!(cusum_deviation(&s, 0).is_err());
        assert!(cusum_deviation(&s, 4).is_err());
    }

    #[test]
    fn cusum_deviation_of_constant_sample_is_zero() {
        let g = unit(7);
        let c = Curve::from_fn(g.clone(), f64::cos).unwrap();
        let s = FunctionalSample::new(g, vec![c; 6]).unwrap();
        for m in 1..6 {
            let d = cusum_deviation(&s, m).unwrap();
            assert!(d.values().iter().all(|v| v.abs() < 1e-14));
        }
    }

    fn small_ints(len: usize) -> impl Strategy<Value = Vec<f64>> {
        // Small integers keep every partial sum exact in f64.
        proptest::collection::vec((-50i32..50).prop_map(f64::from), len)
    }

    proptest! {
        #[test]
        fn inner_product_is_symmetric_and_bilinear(
            f in proptest::collection::vec(-10.0f64..10.0, 8),
            g in proptest::collection::vec(-10.0f64..10.0, 8),
            h in proptest::collection::vec(-10.0f64..10.0, 8),
            a in -5.0f64..5.0,
            b in -5.0f64..5.0,
        ) {
            let grid = unit(8);
            let f = Curve::new(grid.clone(), f).unwrap();
            let g = Curve::new(grid.clone(), g).unwrap();
            let h = Curve::new(grid.clone(), h).unwrap();
            prop_assert_eq!(inner_product(&f, &g).unwrap(), inner_product(&g, &f).unwrap());
            let lhs = inner_product(&f.linear_combination(a, &g, b).unwrap(), &h).unwrap();
            let rhs = a * inner_product(&f, &h).unwrap() + b * inner_product(&g, &h).unwrap();
            let scale = 1.0 + lhs.abs().max(rhs.abs()) + (a.abs() * norm(&f) + b.abs() * norm(&g)) * norm(&h);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
            let fg = inner_product(&f, &g).unwrap();
            prop_assert!(fg.abs() <= norm(&f) * norm(&g) + 1e-12);
            prop_assert!(inner_product(&f, &f).unwrap() >= 0.0);
        }

        #[test]
        fn cusum_deviation_translation_and_homogeneity(
            rows in proptest::collection::vec(small_ints(4), 4..12),
            shift in small_ints(4),
            lambda in (-4i32..5).prop_map(f64::from),
        ) {
            // n = 4 or 8 curves keep m/n dyadic, so both identities hold bit for bit.
            let n = if rows.len() >= 8 { 8 } else { 4 };
            let rows: Vec<Vec<f64>> = rows.into_iter().take(n).collect();
            let grid = unit(4);
            let s = FunctionalSample::from_rows(grid.clone(), rows.clone()).unwrap();
            let shifted = s.map_curves(|_, v| v.iter().zip(&shift).map(|(x, c)| x + c).collect()).unwrap();
            let scaled = s.map_curves(|_, v| v.iter().map(|x| lambda * x).collect()).unwrap();
            for m in 1..n {
                let d = cusum_deviation(&s, m).unwrap();
                prop_assert_eq!(&d, &cusum_deviation(&shifted, m).unwrap());
                prop_assert_eq!(d.scaled(lambda), cusum_deviation(&scaled, m).unwrap());
            }
        }
    }
}
