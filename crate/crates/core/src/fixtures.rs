// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic stand-ins for gauge records, with planted changes.
//!
//! [`DailyFixture`] produces daily discharges with a seasonal cycle and
//! autocorrelated noise; every day from `change_year` on is raised by `shift`.
//! [`AnnualFixture`] produces Gumbel-distributed annual maxima whose location
//! and scale change at `change_year`.

use chrono::{Datelike, NaiveDate};
use rand_distr::{Distribution, Gumbel, StandardNormal};

use crate::error::{CpbError, Result};
use crate::io::{daily_records_to_curves, DailyFlowRecord, LabeledCurves, LabeledSeries};
use crate::rng;
use crate::statistics::VectorSample;

#[derive(Debug, Clone, PartialEq)]
pub struct DailyFixture {
    pub first_year: i32,
    pub last_year: i32,
    /// First year carrying the shift.
    pub change_year: i32,
    /// Level added to every day from `change_year` on.
    pub shift: f64,
    /// Mean level of the seasonal cycle.
    pub base: f64,
    /// Half range of the seasonal cycle.
    pub amplitude: f64,
    /// Marginal standard deviation of the daily noise.
    pub noise_sd: f64,
    /// Lag-one autocorrelation of the daily noise.
    pub persistence: f64,
    pub seed: u64,
}

impl Default for DailyFixture {
    /// 1910–2012 with the last unshifted year 1964 and a shift of twice the
    /// noise level.
    fn default() -> Self {
        Self {
            first_year: 1910,
            last_year: 2012,
            change_year: 1965,
            shift: 4.0,
            base: 20.0,
            amplitude: 8.0,
            noise_sd: 2.0,
            persistence: 0.5,
            seed: 1964,
        }
    }
}

impl DailyFixture {
    fn validate(&self) -> Result<()> {
        if self.first_year >= self.last_year {
            return Err(CpbError::argument("fixture needs at least two years"));
        }
        if !(self.persistence.abs() < 1.0) || !(self.noise_sd >= 0.0) {
            return Err(CpbError::argument(
                "noise needs |persistence| < 1 and noise_sd >= 0",
            ));
        }
        Ok(())
    }

    /// One record per calendar day, February 29 included. Flows are clipped
    /// at zero.
    pub fn records(&self) -> Result<Vec<DailyFlowRecord>> {
        self.validate()?;
        let mut rng = rng::stream(self.seed, 0);
        let start = NaiveDate::from_ymd_opt(self.first_year, 1, 1)
            .ok_or_else(|| CpbError::argument("first year out of range"))?;
        let end = NaiveDate::from_ymd_opt(self.last_year, 12, 31)
            .ok_or_else(|| CpbError::argument("last year out of range"))?;
        let innovation_sd = self.noise_sd * (1.0 - self.persistence * self.persistence).sqrt();
        let z0: f64 = StandardNormal.sample(&mut rng);
        let mut noise = self.noise_sd * z0;
        let mut out = Vec::new();
        for date in start.iter_days().take_while(|d| *d <= end) {
            let phase = 2.0 * std::f64::consts::PI * f64::from(date.ordinal0()) / 365.0;
            let level = self.base
                + self.amplitude * phase.cos()
                + if date.year() >= self.change_year {
                    self.shift
                } else {
                    0.0
                };
            out.push(DailyFlowRecord {
                date,
                flow: (level + noise).max(0.0),
            });
            let z: f64 = StandardNormal.sample(&mut rng);
            noise = self.persistence * noise + innovation_sd * z;
        }
        Ok(out)
    }

    pub fn curves(&self) -> Result<LabeledCurves> {
        daily_records_to_curves(&self.records()?)
    }

    /// Split point whose pre-change segment ends with the last unshifted year.
    pub fn planted_split(&self) -> usize {
        (self.change_year - self.first_year) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnualFixture {
    pub first_year: i32,
    pub last_year: i32,
    /// First year drawn from the post-change law.
    pub change_year: i32,
    /// Gumbel location and scale before the change.
    pub before: (f64, f64),
    /// Gumbel location and scale from `change_year` on.
    pub after: (f64, f64),
    pub seed: u64,
}

impl Default for AnnualFixture {
    /// 163 annual maxima, 1850–2012, changing law from 1900.
    fn default() -> Self {
        Self {
            first_year: 1850,
            last_year: 2012,
            change_year: 1900,
            before: (2300.0, 900.0),
            after: (1600.0, 600.0),
            seed: 1900,
        }
    }
}

impl AnnualFixture {
    /// Values rounded to whole m³/s and clipped at zero.
    pub fn series(&self) -> Result<LabeledSeries> {
        if self.first_year >= self.last_year {
            return Err(CpbError::argument("fixture needs at least two years"));
        }
        let gumbel = |(loc, scale): (f64, f64)| {
            Gumbel::new(loc, scale).map_err(|e| CpbError::argument(format!("gumbel law: {e}")))
        };
        let (before, after) = (gumbel(self.before)?, gumbel(self.after)?);
        let mut rng = rng::stream(self.seed, 0);
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for year in self.first_year..=self.last_year {
            let law = if year >= self.change_year {
                &after
            } else {
                &before
            };
            values.push(law.sample(&mut rng).round().max(0.0));
            labels.push(i64::from(year));
        }
        Ok(LabeledSeries {
            sample: VectorSample::from_scalars(values)?,
            labels,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statistics::cusum_statistic;

    #[test]
    fn daily_fixture_shape() {
        let f = DailyFixture::default();
        let recs = f.records().unwrap();
        assert_eq!(recs.len(), 103 * 365 + 26);
        let c = f.curves().unwrap();
        assert_eq!(c.sample.len(), 103);
        assert_eq!(c.labels[f.planted_split() - 1], 1964);
        assert_eq!(f.records().unwrap(), recs);
    }

    #[test]
    fn daily_fixture_change_is_found() {
        let f = DailyFixture::default();
        let c = f.curves().unwrap();
        let r = cusum_statistic(&c.sample);
        assert_eq!(r.argmax_m, f.planted_split());
    }

    #[test]
    fn annual_fixture_shape() {
        let s = AnnualFixture::default().series().unwrap();
        assert_eq!(s.sample.len(), 163);
        assert_eq!(s.labels[50], 1900);
        let v = s.sample.column(0);
        let pre: f64 = v[..50].iter().sum::<f64>() / 50.0;
        let post: f64 = v[50..].iter().sum::<f64>() / 113.0;
        assert!(pre > post);
    }
}
