// SPDX-License-Identifier: MIT OR Apache-2.0

//! File formats: daily flow records, annual series, curve tables and
//! versioned reports.
//!
//! All CSV inputs carry a header row. Daily flows (`date,flow`) become one
//! 365-point curve per calendar year with February 29 dropped. Annual series
//! use `year,value`; curve tables use `label,<t_1>,…,<t_G>`. Reports are JSON
//! documents tagged with the schema identifier [`SCHEMA`].

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::sync::Arc;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bootstrap::TestReport;
use crate::error::{CpbError, Result};
use crate::experiments::{Scale, TableRow};
use crate::hilbert::{FunctionalSample, Grid};
use crate::statistics::{VectorSample, WeightSpec};

pub const SCHEMA: &str = "cpb/1";
pub const DAYS_PER_YEAR: usize = 365;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyFlowRecord {
    pub date: NaiveDate,
    /// Mean daily discharge in m³/s.
    pub flow: f64,
}

/// Curves with one integer label per observation (usually a year).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCurves {
    pub sample: FunctionalSample,
    pub labels: Vec<i64>,
}

/// Real-valued series with one integer label per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSeries {
    pub sample: VectorSample,
    pub labels: Vec<i64>,
}

/// Hex SHA-256 of raw input bytes, recorded in report metadata.
pub fn input_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn line_of(record: &csv::StringRecord) -> String {
    record
        .position()
        .map(|p| format!("line {}", p.line()))
        .unwrap_or_else(|| "input".to_string())
}

fn reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(source)
}

fn expect_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers()?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(CpbError::parse(
            "line 1",
            format!(
                "expected header {:?}, found {:?}",
                expected.join(","),
                got.join(",")
            ),
        ));
    }
    Ok(())
}

fn parse_f64(field: &str, what: &str, location: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| CpbError::parse(location, format!("{what} {field:?} is not a number")))?;
    if !v.is_finite() {
        return Err(CpbError::parse(
            location,
            format!("{what} {field:?} is not finite"),
        ));
    }
    Ok(v)
}

fn parse_i64(field: &str, what: &str, location: &str) -> Result<i64> {
    field
        .parse()
        .map_err(|_| CpbError::parse(location, format!("{what} {field:?} is not an integer")))
}

fn is_leap_day(d: NaiveDate) -> bool {
    d.month() == 2 && d.day() == 29
}

/// Reads `date,flow` rows and checks that dates increase strictly.
pub fn read_daily_records<R: Read>(source: R) -> Result<Vec<DailyFlowRecord>> {
    let mut rdr = reader(source);
    expect_header(&mut rdr, &["date", "flow"])?;
    let mut out: Vec<DailyFlowRecord> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let loc = line_of(&record);
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d").map_err(|_| {
            CpbError::parse(&loc, format!("date {:?} is not YYYY-MM-DD", &record[0]))
        })?;
        let flow = parse_f64(&record[1], "flow", &loc)?;
        if flow < 0.0 {
            return Err(CpbError::parse(
                &loc,
                format!("negative flow {flow} on {date}"),
            ));
        }
        if let Some(prev) = out.last() {
            if date <= prev.date {
                return Err(CpbError::parse(
                    &loc,
                    format!("date {date} does not follow {}", prev.date),
                ));
            }
        }
        out.push(DailyFlowRecord { date, flow });
    }
    Ok(out)
}

/// Groups complete calendar years of daily records into 365-point curves on
/// [`Grid::discrete_mean`], dropping February 29.
///
/// Every year between the first and the last record must be complete: a
/// missing day, including one before the first or after the last record of
/// its year, is a parse error naming that date.
pub fn daily_records_to_curves(records: &[DailyFlowRecord]) -> Result<LabeledCurves> {
    let (Some(first), Some(last)) = (records.first(), records.last()) else {
        return Err(CpbError::argument("no daily records"));
    };
    let missing = |d: NaiveDate| CpbError::parse(d.to_string(), format!("missing day {d}"));
    let year_start = |y: i32| NaiveDate::from_ymd_opt(y, 1, 1).expect("valid year");
    let year_end = |y: i32| NaiveDate::from_ymd_opt(y, 12, 31).expect("valid year");

    let mut expected = year_start(first.date.year());
    let mut years: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    for rec in records {
        while expected < rec.date {
            if !is_leap_day(expected) {
                return Err(missing(expected));
            }
            expected = expected.succ_opt().expect("date in range");
        }
        if rec.date < expected {
            return Err(CpbError::parse(rec.date.to_string(), "dates out of order"));
        }
        if !is_leap_day(rec.date) {
            years.entry(rec.date.year()).or_default().push(rec.flow);
        }
        expected = rec.date.succ_opt().expect("date in range");
    }
    let end = year_end(last.date.year());
    if last.date < end {
        return Err(missing(last.date.succ_opt().expect("date in range")));
    }
    if years.len() < 2 {
        return Err(CpbError::argument(format!(
            "need at least 2 complete years, found {}",
            years.len()
        )));
    }
    let grid = Arc::new(Grid::discrete_mean(DAYS_PER_YEAR)?);
    let labels = years.keys().map(|y| i64::from(*y)).collect();
    let rows: Vec<Vec<f64>> = years.into_values().collect();
    debug_assert!(rows.iter().all(|r| r.len() == DAYS_PER_YEAR));
    Ok(LabeledCurves {
        sample: FunctionalSample::from_rows(grid, rows)?,
        labels,
    })
}

/// Parses a `date,flow` CSV into annual curves.
pub fn parse_daily_flows<R: Read>(source: R) -> Result<LabeledCurves> {
    daily_records_to_curves(&read_daily_records(source)?)
}

/// Inverse of [`parse_daily_flows`] for curves labelled by year: writes one row
/// per non-leap day.
pub fn write_daily_flows<W: Write>(sink: W, curves: &LabeledCurves) -> Result<()> {
    if curves.sample.grid().len() != DAYS_PER_YEAR {
        return Err(CpbError::structural("daily flows need 365-point curves"));
    }
    let mut wtr = csv::Writer::from_writer(sink);
    wtr.write_record(["date", "flow"])?;
    for (curve, &year) in curves.sample.curves().iter().zip(&curves.labels) {
        let year = i32::try_from(year)
            .map_err(|_| CpbError::argument(format!("label {year} is not a year")))?;
        let mut day = NaiveDate::from_ymd_opt(year, 1, 1)
            .ok_or_else(|| CpbError::argument(format!("label {year} is not a year")))?;
        for v in curve.values() {
            if is_leap_day(day) {
                day = day.succ_opt().expect("date in range");
            }
            wtr.write_record([day.to_string(), v.to_string()])?;
            day = day.succ_opt().expect("date in range");
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Parses a `year,value` CSV with strictly increasing years.
pub fn parse_annual_series<R: Read>(source: R) -> Result<LabeledSeries> {
    let mut rdr = reader(source);
    expect_header(&mut rdr, &["year", "value"])?;
    let mut labels: Vec<i64> = Vec::new();
    let mut values = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let loc = line_of(&record);
        let year = parse_i64(&record[0], "year", &loc)?;
        if let Some(&prev) = labels.last() {
            if year <= prev {
                return Err(CpbError::parse(
                    &loc,
                    format!("year {year} does not follow {prev}"),
                ));
            }
        }
        values.push(parse_f64(&record[1], "value", &loc)?);
        labels.push(year);
    }
    if values.len() < 2 {
        return Err(CpbError::argument(format!(
            "need at least 2 observations, found {}",
            values.len()
        )));
    }
    Ok(LabeledSeries {
        sample: VectorSample::from_scalars(values)?,
        labels,
    })
}

/// Writes a one-column sample as `year,value`.
pub fn write_annual_series<W: Write>(sink: W, series: &LabeledSeries) -> Result<()> {
    if series.sample.dim() != 1 {
        return Err(CpbError::structural(format!(
            "series files hold one column, sample has {}",
            series.sample.dim()
        )));
    }
    let mut wtr = csv::Writer::from_writer(sink);
    wtr.write_record(["year", "value"])?;
    for (row, label) in series.sample.rows().zip(&series.labels) {
        wtr.write_record([label.to_string(), row[0].to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Grid reconstructed from the evaluation points in a curve table header.
///
/// Points `1, 2, …, G` denote day or index positions and get the averaging
/// weights `1/G`; any other strictly increasing points get trapezoid weights.
pub fn grid_from_points(points: Vec<f64>) -> Result<Grid> {
    let indexed = points.iter().enumerate().all(|(i, &t)| t == (i + 1) as f64);
    if indexed && points.len() > 1 {
        Grid::discrete_mean(points.len())
    } else {
        Grid::trapezoid(points)
    }
}

/// Parses a `label,<t_1>,…,<t_G>` curve table.
pub fn read_curves<R: Read>(source: R) -> Result<LabeledCurves> {
    let mut rdr = reader(source);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("label") || header.len() < 2 {
        return Err(CpbError::parse(
            "line 1",
            "expected header label,<t_1>,...,<t_G>",
        ));
    }
    let points = header
        .iter()
        .skip(1)
        .map(|f| parse_f64(f, "grid point", "line 1"))
        .collect::<Result<Vec<_>>>()?;
    let grid =
        Arc::new(grid_from_points(points).map_err(|e| CpbError::parse("line 1", e.to_string()))?);
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let loc = line_of(&record);
        labels.push(parse_i64(&record[0], "label", &loc)?);
        rows.push(
            record
                .iter()
                .skip(1)
                .map(|f| parse_f64(f, "value", &loc))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    if rows.len() < 2 {
        return Err(CpbError::argument(format!(
            "need at least 2 curves, found {}",
            rows.len()
        )));
    }
    Ok(LabeledCurves {
        sample: FunctionalSample::from_rows(grid, rows)?,
        labels,
    })
}

pub fn write_curves<W: Write>(sink: W, curves: &LabeledCurves) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(sink);
    let mut header = vec!["label".to_string()];
    header.extend(curves.sample.grid().points().iter().map(|t| t.to_string()));
    wtr.write_record(&header)?;
    for (curve, label) in curves.sample.curves().iter().zip(&curves.labels) {
        let mut row = vec![label.to_string()];
        row.extend(curve.values().iter().map(|v| v.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Layout of a CSV input, told apart by its header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    DailyFlows,
    AnnualSeries,
    Curves,
}

pub fn detect_format(bytes: &[u8]) -> Result<InputFormat> {
    let first_line = bytes.split(|b| *b == b'\n').next().unwrap_or_default();
    let first_field = String::from_utf8_lossy(first_line)
        .split(',')
        .next()
        .unwrap_or_default()
        .trim()
        .trim_start_matches('\u{feff}')
        .to_string();
    match first_field.as_str() {
        "date" => Ok(InputFormat::DailyFlows),
        "year" => Ok(InputFormat::AnnualSeries),
        "label" => Ok(InputFormat::Curves),
        other => Err(CpbError::parse(
            "line 1",
            format!("unrecognised header starting with {other:?}; expected date, year or label"),
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    /// SHA-256 of the input file, absent for generated data.
    pub input_digest: Option<String>,
    pub seed: u64,
    /// Version of the producing library.
    pub version: String,
}

impl Metadata {
    pub fn new(input_digest: Option<String>, seed: u64) -> Self {
        Self {
            input_digest,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Cusum,
    Cvm,
}

/// A bootstrap test on labelled data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestPayload {
    pub test: TestKind,
    pub weight: Option<WeightSpec>,
    pub n: usize,
    /// Label of observation `argmax_m`, the last one before the estimated change.
    pub change_label: i64,
    /// Label of observation `argmax_m + 1`.
    pub first_post_change_label: Option<i64>,
    pub report: TestReport,
}

impl TestPayload {
    pub fn new(
        test: TestKind,
        weight: Option<WeightSpec>,
        labels: &[i64],
        report: TestReport,
    ) -> Result<Self> {
        if labels.len() != report.process.len() + 1 {
            return Err(CpbError::structural(format!(
                "{} labels for a sample of size {}",
                labels.len(),
                report.process.len() + 1
            )));
        }
        let m = report.argmax_m;
        Ok(Self {
            test,
            weight,
            n: labels.len(),
            change_label: labels[m - 1],
            first_post_change_label: labels.get(m).copied(),
            report,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// Split point `m`.
    pub index: usize,
    /// Label of observation `m`.
    pub label: i64,
    pub value: f64,
}

/// Observed process of a test with its bootstrap critical value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessTrace {
    pub test: TestKind,
    pub threshold: f64,
    pub rows: Vec<TraceRow>,
}

impl ProcessTrace {
    pub fn new(test: TestKind, labels: &[i64], report: &TestReport) -> Result<Self> {
        if labels.len() != report.process.len() + 1 {
            return Err(CpbError::structural(
                "label count does not match the process",
            ));
        }
        let rows = report
            .process
            .iter()
            .enumerate()
            .map(|(i, &value)| TraceRow {
                index: i + 1,
                label: labels[i],
                value,
            })
            .collect();
        Ok(Self {
            test,
            threshold: report.quantile,
            rows,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub table: u8,
    pub scale: Scale,
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Report {
    TestReport(TestPayload),
    ProcessTrace(ProcessTrace),
    ExperimentTable(ExperimentTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema: String,
    pub metadata: Metadata,
    pub report: Report,
}

impl ReportDocument {
    pub fn new(metadata: Metadata, report: Report) -> Self {
        Self {
            schema: SCHEMA.to_string(),
            metadata,
            report,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

impl OutputFormat {
    /// JSON for a `.json` extension, CSV otherwise.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => OutputFormat::Json,
            _ => OutputFormat::Csv,
        }
    }
}

fn opt_to_string<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Serializes a report. JSON keeps every field; CSV flattens the payload into
/// a table and leaves metadata out.
pub fn emit_report<W: Write>(
    doc: &ReportDocument,
    format: OutputFormat,
    mut sink: W,
) -> Result<()> {
    match format {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut sink, doc)?;
            sink.write_all(b"\n")?;
        }
        OutputFormat::Csv => {
            let mut wtr = csv::Writer::from_writer(sink);
            match &doc.report {
                Report::TestReport(t) => {
                    let r = &t.report;
                    wtr.write_record([
                        "test",
                        "n",
                        "statistic",
                        "argmax_m",
                        "change_label",
                        "first_post_change_label",
                        "quantile",
                        "p_value",
                        "reject",
                        "alpha",
                        "replicates",
                        "block_length",
                        "blocks",
                        "seed",
                    ])?;
                    wtr.write_record([
                        match t.test {
                            TestKind::Cusum => "cusum".to_string(),
                            TestKind::Cvm => "cvm".to_string(),
                        },
                        t.n.to_string(),
                        r.statistic.to_string(),
                        r.argmax_m.to_string(),
                        t.change_label.to_string(),
                        opt_to_string(t.first_post_change_label),
                        r.quantile.to_string(),
                        r.p_value.to_string(),
                        r.reject.to_string(),
                        r.alpha.to_string(),
                        r.replicates.len().to_string(),
                        r.plan.p.to_string(),
                        r.plan.k.to_string(),
                        r.seed.to_string(),
                    ])?;
                }
                Report::ProcessTrace(trace) => {
                    wtr.write_record(["index", "label", "value", "threshold"])?;
                    for row in &trace.rows {
                        wtr.write_record([
                            row.index.to_string(),
                            row.label.to_string(),
                            row.value.to_string(),
                            trace.threshold.to_string(),
                        ])?;
                    }
                }
                Report::ExperimentTable(table) => {
                    wtr.write_record([
                        "table",
                        "n",
                        "p",
                        "dependence",
                        "mu",
                        "variant",
                        "alpha",
                        "runs",
                        "replicates",
                        "estimate",
                        "ci_halfwidth",
                        "reference",
                        "abs_diff",
                    ])?;
                    for r in &table.rows {
                        wtr.write_record([
                            r.table.to_string(),
                            r.n.to_string(),
                            r.p.to_string(),
                            r.dependence.to_string(),
                            opt_to_string(r.mu),
                            r.variant.label().to_string(),
                            r.alpha.to_string(),
                            r.runs.to_string(),
                            r.replicates.to_string(),
                            r.estimate.to_string(),
                            r.ci_halfwidth.to_string(),
                            r.reference.to_string(),
                            r.abs_diff.to_string(),
                        ])?;
                    }
                }
            }
            wtr.flush()?;
        }
    }
    Ok(())
}

/// Parses a JSON report and checks its schema tag.
pub fn parse_report_json(text: &str) -> Result<ReportDocument> {
    let doc: ReportDocument = serde_json::from_str(text)?;
    if doc.schema != SCHEMA {
        return Err(CpbError::Serialization(format!(
            "unsupported schema {:?}, expected {SCHEMA:?}",
            doc.schema
        )));
    }
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bootstrap::{run_test, BlockRule, BootstrapConfig, TestData};

    fn daily_csv(first: i32, last: i32, skip: Option<&str>) -> String {
        let mut s = String::from("date,flow\n");
        let mut d = NaiveDate::from_ymd_opt(first, 1, 1).unwrap();
        let end = NaiveDate::from_ymd_opt(last, 12, 31).unwrap();
        let mut i = 0u32;
        while d <= end {
            if skip != Some(d.to_string().as_str()) {
                s.push_str(&format!("{d},{}\n", 1.0 + f64::from(i % 7)));
            }
            i += 1;
            d = d.succ_opt().unwrap();
        }
        s
    }

    #[test]
    fn daily_flows_drop_leap_days() {
        let c = parse_daily_flows(daily_csv(1911, 1913, None).as_bytes()).unwrap();
        assert_eq!(c.labels, vec![1911, 1912, 1913]);
        assert_eq!(c.sample.len(), 3);
        assert_eq!(c.sample.grid().len(), 365);
        // 1912-03-01 is day 60 of the curve; in the file it follows 1912-02-29.
        let day_index = 365 + 31 + 29; // records before 1912-03-01
        let expected = 1.0 + f64::from(day_index % 7);
        assert_eq!(c.sample.curves()[1].values()[59], expected);
        assert_eq!(c.sample.grid().quad_weights()[0], 1.0 / 365.0);
    }

    #[test]
    fn missing_day_is_named() {
        let err =
            parse_daily_flows(daily_csv(1910, 1912, Some("1911-07-04")).as_bytes()).unwrap_err();
        assert!(err.is_data_error());
        assert!(err.to_string().contains("1911-07-04"), "{err}");
        let err =
            parse_daily_flows(daily_csv(1910, 1912, Some("1910-01-01")).as_bytes()).unwrap_err();
        assert!(err.to_string().contains("1910-01-01"), "{err}");
        let err =
            parse_daily_flows(daily_csv(1910, 1912, Some("1912-12-31")).as_bytes()).unwrap_err();
        assert!(err.to_string().contains("1912-12-31"), "{err}");
        // A missing Feb 29 is not an error.
        assert!(parse_daily_flows(daily_csv(1910, 1912, Some("1912-02-29")).as_bytes()).is_ok());
    }

    #[test]
    fn daily_flow_errors() {
        let err = parse_daily_flows(daily_csv(1910, 1910, None).as_bytes()).unwrap_err();
        assert!(matches!(err, CpbError::Argument(_)));
        let swapped = "date,flow\n1910-01-02,1\n1910-01-01,1\n";
        assert!(matches!(
            parse_daily_flows(swapped.as_bytes()).unwrap_err(),
            CpbError::Parse { .. }
        ));
        let bad = "date,flow\n1910-01-01,-1\n";
        assert!(parse_daily_flows(bad.as_bytes())
            .unwrap_err()
            .is_data_error());
        let header = "day,flow\n1910-01-01,1\n";
        assert!(parse_daily_flows(header.as_bytes())
            .unwrap_err()
            .is_data_error());
    }

    #[test]
    fn daily_round_trip() {
        let text = daily_csv(1911, 1913, None);
        let c = parse_daily_flows(text.as_bytes()).unwrap();
        let mut out = Vec::new();
        write_daily_flows(&mut out, &c).unwrap();
        let back = parse_daily_flows(out.as_slice()).unwrap();
        assert_eq!(back, c);
        let without_leap: String = text
            .lines()
            .filter(|l| !l.starts_with("1912-02-29"))
            .map(|l| format!("{l}\n"))
            .collect();
        assert_eq!(String::from_utf8(out).unwrap(), without_leap);
    }

    #[test]
    fn annual_series_parsing() {
        let mut text = String::from("year,value\n");
        for y in 1850..=2012 {
            text.push_str(&format!("{y},{}\n", 1000 + y));
        }
        let s = parse_annual_series(text.as_bytes()).unwrap();
        assert_eq!(s.sample.len(), 163);
        // Split point 50 ends in 1899; the change is reported from 1900.
        assert_eq!(s.labels[50 - 1], 1899);
        assert_eq!(s.labels[50], 1900);
        assert!(matches!(
            parse_annual_series("year,value\n1850,3\n".as_bytes()).unwrap_err(),
            CpbError::Argument(_)
        ));
        let dup = "year,value\n1850,3\n1850,4\n";
        let err = parse_annual_series(dup.as_bytes()).unwrap_err();
        assert!(
            matches!(err, CpbError::Parse { ref location, .. } if location == "line 3"),
            "{err}"
        );
    }

    #[test]
    fn curves_round_trip_and_grid_choice() {
        let grid = Arc::new(Grid::unit_interval(5).unwrap());
        let rows = vec![
            vec![0.1, 0.2, 0.3, 0.4, 0.5],
            vec![1.0 / 3.0, -2.5, 0.0, 1e-300, 7.0],
        ];
        let c = LabeledCurves {
            sample: FunctionalSample::from_rows(grid, rows).unwrap(),
            labels: vec![1, 2],
        };
        let mut out = Vec::new();
        write_curves(&mut out, &c).unwrap();
        assert_eq!(read_curves(out.as_slice()).unwrap(), c);
        let indexed = grid_from_points(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(indexed, Grid::discrete_mean(3).unwrap());
    }

    #[test]
    fn format_detection() {
        assert_eq!(
            detect_format(b"date,flow\n").unwrap(),
            InputFormat::DailyFlows
        );
        assert_eq!(
            detect_format(b"year,value\n").unwrap(),
            InputFormat::AnnualSeries
        );
        assert_eq!(detect_format(b"label,0,1\n").unwrap(), InputFormat::Curves);
        assert!(detect_format(b"x,y\n").is_err());
    }

    fn sample_report(values: Vec<f64>) -> (Vec<i64>, TestReport) {
        let labels: Vec<i64> = (0..values.len() as i64).map(|i| 1900 + i).collect();
        let s = FunctionalSample::from_scalars(&values).unwrap();
        let config = BootstrapConfig {
            block_rule: BlockRule::Fixed { p: 2 },
            replicates: 99,
            seed: 5,
            alpha: 0.05,
        };
        (labels, run_test(TestData::Cusum(&s), &config).unwrap())
    }

    #[test]
    fn json_round_trip() {
        let (labels, report) = sample_report((0..20).map(|i| (i as f64 * 0.37).sin()).collect());
        let docs = [
            Report::TestReport(
                TestPayload::new(TestKind::Cusum, None, &labels, report.clone()).unwrap(),
            ),
            Report::ProcessTrace(ProcessTrace::new(TestKind::Cusum, &labels, &report).unwrap()),
        ];
        for report in docs {
            let doc =
                ReportDocument::new(Metadata::new(Some(input_digest(b"abc")), u64::MAX), report);
            let mut out = Vec::new();
            emit_report(&doc, OutputFormat::Json, &mut out).unwrap();
            let text = String::from_utf8(out).unwrap();
            assert_eq!(parse_report_json(&text).unwrap(), doc);
        }
        let bad = r#"{"schema":"cpb/0","metadata":{"input_digest":null,"seed":1,"version":"x"},"report":{"kind":"process_trace","payload":{"test":"cusum","threshold":0,"rows":[]}}}"#;
        assert!(parse_report_json(bad).is_err());
    }

    #[test]
    fn constant_trace_is_zero() {
        let (labels, report) = sample_report(vec![4.0; 12]);
        let trace = ProcessTrace::new(TestKind::Cusum, &labels, &report).unwrap();
        let doc = ReportDocument::new(Metadata::new(None, 5), Report::ProcessTrace(trace));
        let mut out = Vec::new();
        emit_report(&doc, OutputFormat::Csv, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("index,label,value,threshold"));
        assert_eq!(lines.next(), Some("1,1900,0,0"));
        assert_eq!(text.lines().count(), 12);
        assert!(text.lines().skip(1).all(|l| l.ends_with(",0,0")));
    }

    #[test]
    fn change_labels() {
        let mut values = vec![0.0; 10];
        values.extend(vec![5.0; 10]);
        let (labels, report) = sample_report(values);
        let t = TestPayload::new(TestKind::Cusum, None, &labels, report).unwrap();
        assert_eq!(t.report.argmax_m, 10);
        assert_eq!(
            (t.change_label, t.first_post_change_label),
            (1909, Some(1910))
        );
    }

    #[test]
    fn digest_is_sha256() {
        assert_eq!(
            input_digest(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
