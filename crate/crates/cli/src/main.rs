// SPDX-License-Identifier: MIT OR Apache-2.0

//! `cpb`: bootstrap change-point tests for curves and annual series.
//!
//! Exit status is 0 on success, 2 for invalid arguments and 1 for unreadable
//! or malformed data.

#![forbid(unsafe_code)]

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use cpb_core::bootstrap::{run_test, BlockRule, BootstrapConfig, TestData};
use cpb_core::experiments::{run_cell, table_cells, Scale};
use cpb_core::fixtures::{AnnualFixture, DailyFixture};
use cpb_core::io::{
    detect_format, emit_report, input_digest, parse_annual_series, parse_daily_flows, read_curves,
    write_annual_series, write_curves, write_daily_flows, ExperimentTable, InputFormat,
    LabeledCurves, LabeledSeries, Metadata, OutputFormat, ProcessTrace, Report, ReportDocument,
    TestKind, TestPayload,
};
use cpb_core::rng;
use cpb_core::simulation::{
    apply_alternative_vector, ar1_generate, ar1_pair, calibrate_kernel, far1_generate,
    AlternativeSpec, Far1Spec, KernelKind, Shift,
};
use cpb_core::{CpbError, Grid, WeightSpec};

#[derive(Parser)]
#[command(
    name = "cpb",
    version,
    about = "Bootstrap change-point tests in Hilbert spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// CUSUM test on curves, daily flows or an annual series.
    Cusum(CusumArgs),
    /// Cramér–von Mises test on an annual series.
    Cvm(CvmArgs),
    /// Generate synthetic data.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Re-estimate a reference simulation table.
    Table(TableArgs),
    /// Write a synthetic gauge record with a planted change.
    Fixture(FixtureArgs),
}

#[derive(Args)]
struct TestArgs {
    /// Input CSV.
    #[arg(long)]
    input: PathBuf,
    /// Block length `p` or `dyadic:<c>,<e>`.
    #[arg(long, value_parser = parse_block_rule)]
    block_length: BlockRule,
    /// Bootstrap replicates.
    #[arg(long, default_value_t = 999)]
    boot: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report file; `.json` gives JSON, any other extension CSV. Defaults to
    /// JSON on stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CusumArgs {
    #[command(flatten)]
    test: TestArgs,
    /// Write the observed process with its critical value as CSV.
    #[arg(long)]
    emit_process: Option<PathBuf>,
}

#[derive(Args)]
struct CvmArgs {
    #[command(flatten)]
    test: TestArgs,
    /// `gaussian:<mean>,<sd>` or `uniform:<lo>,<hi>`.
    #[arg(long, default_value = "gaussian:2000,2000", value_parser = parse_weight)]
    weight: WeightSpec,
    #[arg(long)]
    emit_process: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SimulateCommand {
    /// Functional autoregression on [0, 1].
    Far1(Far1Args),
    /// Real-valued AR(1) series.
    Ar1(Ar1Args),
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Gaussian,
    Wiener,
}

#[derive(Args)]
struct Far1Args {
    #[arg(long, value_enum)]
    psi_kernel: KernelArg,
    /// Hilbert–Schmidt norm of the kernel, in [0, 1).
    #[arg(long)]
    psi_norm: f64,
    #[arg(long)]
    n: usize,
    /// Number of grid points.
    #[arg(long, default_value_t = 100)]
    grid: usize,
    #[arg(long, default_value_t = 100)]
    burn_in: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Ar1Args {
    #[arg(long)]
    a1: f64,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Add `mu` to observations after `--at`.
    #[arg(long, requires = "at", conflicts_with = "skewness")]
    shift: Option<f64>,
    /// Switch from `X² + X'²` to `4 − (X² + X'²)` after `--at`.
    #[arg(long, requires = "at")]
    skewness: bool,
    /// Last observation before the change.
    #[arg(long)]
    at: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
    id: u8,
    #[arg(long, value_enum, default_value_t = ScaleArg::Desk)]
    scale: ScaleArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the number of runs per cell.
    #[arg(long)]
    runs: Option<usize>,
    /// Override the bootstrap replicates per test.
    #[arg(long)]
    boot: Option<usize>,
    /// `.json` gives JSON, any other extension CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureKind {
    /// Daily flows 1910–2012, shifted from 1965.
    Daily,
    /// Annual maxima 1850–2012, changing law from 1900.
    Annual,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(value_enum)]
    kind: FixtureKind,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_block_rule(s: &str) -> Result<BlockRule, String> {
    s.parse().map_err(|e: CpbError| e.to_string())
}

fn parse_weight(s: &str) -> Result<WeightSpec, String> {
    s.parse().map_err(|e: CpbError| e.to_string())
}

/// Failure classified for the exit status.
enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl From<CpbError> for Failure {
    fn from(e: CpbError) -> Self {
        if e.is_data_error() {
            Failure::Data(e.into())
        } else {
            Failure::Usage(e.into())
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn read_input(path: &Path) -> Outcome<Vec<u8>> {
    fs::read(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::Data)
}

fn write_output(path: &Path, bytes: &[u8]) -> Outcome<()> {
    fs::write(path, bytes)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::Data)
}

fn render(doc: &ReportDocument, format: OutputFormat) -> Outcome<Vec<u8>> {
    let mut buf = Vec::new();
    emit_report(doc, format, &mut buf)?;
    Ok(buf)
}

fn emit(doc: &ReportDocument, out: Option<&Path>) -> Outcome<()> {
    match out {
        Some(path) => write_output(path, &render(doc, OutputFormat::from_path(path))?),
        None => std::io::stdout()
            .write_all(&render(doc, OutputFormat::Json)?)
            .context("cannot write to stdout")
            .map_err(Failure::Data),
    }
}

fn with_context(e: CpbError, path: &Path) -> Failure {
    let data = e.is_data_error();
    let err = anyhow::Error::from(e).context(format!("in {}", path.display()));
    if data {
        Failure::Data(err)
    } else {
        Failure::Usage(err)
    }
}

fn run_and_report(
    test: TestKind,
    data: TestData<'_>,
    weight: Option<WeightSpec>,
    labels: &[i64],
    args: &TestArgs,
    digest: String,
    emit_process: Option<&Path>,
) -> Outcome<()> {
    let config = BootstrapConfig {
        block_rule: args.block_length,
        replicates: args.boot,
        seed: args.seed,
        alpha: args.alpha,
    };
    let report = run_test(data, &config)?;
    let metadata = Metadata::new(Some(digest), args.seed);
    if let Some(path) = emit_process {
        let trace = ProcessTrace::new(test, labels, &report)?;
        let doc = ReportDocument::new(metadata.clone(), Report::ProcessTrace(trace));
        write_output(path, &render(&doc, OutputFormat::Csv)?)?;
    }
    let payload = TestPayload::new(test, weight, labels, report)?;
    eprintln!(
        "statistic {:.6} at split {} (label {}), critical value {:.6}, p-value {:.4}: {}",
        payload.report.statistic,
        payload.report.argmax_m,
        payload.change_label,
        payload.report.quantile,
        payload.report.p_value,
        if payload.report.reject {
            "reject"
        } else {
            "no rejection"
        }
    );
    emit(
        &ReportDocument::new(metadata, Report::TestReport(payload)),
        args.out.as_deref(),
    )
}

fn cusum(args: &CusumArgs) -> Outcome<()> {
    let path = &args.test.input;
    let bytes = read_input(path)?;
    let digest = input_digest(&bytes);
    let format = detect_format(&bytes).map_err(|e| with_context(e, path))?;
    let LabeledCurves { sample, labels } = match format {
        InputFormat::DailyFlows => parse_daily_flows(bytes.as_slice()),
        InputFormat::Curves => read_curves(bytes.as_slice()),
        InputFormat::AnnualSeries => parse_annual_series(bytes.as_slice()).and_then(|s| {
            Ok(LabeledCurves {
                sample: s.sample.to_functional()?,
                labels: s.labels,
            })
        }),
    }
    .map_err(|e| with_context(e, path))?;
    run_and_report(
        TestKind::Cusum,
        TestData::Cusum(&sample),
        None,
        &labels,
        &args.test,
        digest,
        args.emit_process.as_deref(),
    )
}

fn cvm(args: &CvmArgs) -> Outcome<()> {
    let path = &args.test.input;
    let bytes = read_input(path)?;
    let digest = input_digest(&bytes);
    let series = parse_annual_series(bytes.as_slice()).map_err(|e| with_context(e, path))?;
    run_and_report(
        TestKind::Cvm,
        TestData::Cvm(&series.sample, &args.weight),
        Some(args.weight.clone()),
        &series.labels,
        &args.test,
        digest,
        args.emit_process.as_deref(),
    )
}

fn index_labels(n: usize) -> Vec<i64> {
    (1..=n as i64).collect()
}

fn simulate_far1(args: &Far1Args) -> Outcome<()> {
    let kind = match args.psi_kernel {
        KernelArg::Gaussian => KernelKind::Gaussian,
        KernelArg::Wiener => KernelKind::Wiener,
    };
    let grid = Arc::new(Grid::unit_interval(args.grid)?);
    let mut spec = Far1Spec::new(calibrate_kernel(kind, args.psi_norm)?, grid);
    spec.burn_in = args.burn_in;
    let sample = far1_generate(&spec, args.n, &mut rng::stream(args.seed, 0))?;
    let mut buf = Vec::new();
    write_curves(
        &mut buf,
        &LabeledCurves {
            labels: index_labels(sample.len()),
            sample,
        },
    )?;
    write_output(&args.out, &buf)
}

fn simulate_ar1(args: &Ar1Args) -> Outcome<()> {
    let mut rng = rng::stream(args.seed, 0);
    let sample = match (args.shift, args.skewness, args.at) {
        (Some(mu), _, Some(at)) => apply_alternative_vector(
            &ar1_generate(args.a1, args.n, &mut rng)?,
            &AlternativeSpec::MeanShift {
                shift: Shift::Scalar(mu),
                at,
            },
        )?,
        (None, true, Some(at)) => apply_alternative_vector(
            &ar1_pair(args.a1, args.n, &mut rng)?,
            &AlternativeSpec::SkewnessChange { at },
        )?,
        (None, false, Some(_)) => {
            return Err(Failure::Usage(anyhow::anyhow!(
                "--at needs --shift or --skewness"
            )))
        }
        _ => ar1_generate(args.a1, args.n, &mut rng)?,
    };
    let mut buf = Vec::new();
    write_annual_series(
        &mut buf,
        &LabeledSeries {
            labels: index_labels(sample.len()),
            sample,
        },
    )?;
    write_output(&args.out, &buf)
}

fn table(args: &TableArgs) -> Outcome<()> {
    let scale = match args.scale {
        ScaleArg::Desk => Scale::Desk,
        ScaleArg::Full => Scale::Full,
    };
    if args.runs == Some(0) || args.boot == Some(0) {
        return Err(Failure::Usage(anyhow::anyhow!(
            "--runs and --boot must be positive"
        )));
    }
    let mut cells = table_cells(args.id, scale, args.seed)?;
    for cell in &mut cells {
        if let Some(runs) = args.runs {
            cell.spec.runs = runs;
        }
        if let Some(boot) = args.boot {
            cell.spec.replicates = boot;
        }
    }
    let mut rows = Vec::with_capacity(cells.len());
    for (i, cell) in cells.iter().enumerate() {
        let started = std::time::Instant::now();
        let row = run_cell(cell)?;
        eprintln!(
            "[{}/{}] n={} p={} dep={} {}: {:.3} (ref {}) {:.1}s",
            i + 1,
            cells.len(),
            row.n,
            row.p,
            row.dependence,
            row.variant.label(),
            row.estimate,
            row.reference,
            started.elapsed().as_secs_f64()
        );
        rows.push(row);
    }
    let doc = ReportDocument::new(
        Metadata::new(None, args.seed),
        Report::ExperimentTable(ExperimentTable {
            table: args.id,
            scale,
            rows,
        }),
    );
    write_output(
        &args.out,
        &render(&doc, OutputFormat::from_path(&args.out))?,
    )
}

fn fixture(args: &FixtureArgs) -> Outcome<()> {
    let mut buf = Vec::new();
    match args.kind {
        FixtureKind::Daily => {
            let mut f = DailyFixture::default();
            if let Some(seed) = args.seed {
                f.seed = seed;
            }
            write_daily_flows(&mut buf, &f.curves()?)?;
        }
        FixtureKind::Annual => {
            let mut f = AnnualFixture::default();
            if let Some(seed) = args.seed {
                f.seed = seed;
            }
            write_annual_series(&mut buf, &f.series()?)?;
        }
    }
    write_output(&args.out, &buf)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Cusum(a) => cusum(a),
        Command::Cvm(a) => cvm(a),
        Command::Simulate(SimulateCommand::Far1(a)) => simulate_far1(a),
        Command::Simulate(SimulateCommand::Ar1(a)) => simulate_ar1(a),
        Command::Table(a) => table(a),
        Command::Fixture(a) => fixture(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
