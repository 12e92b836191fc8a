//! Command-line driver: trace ingestion, metric analysis, synthetic trace
//! generation, contact-event export and occupancy heatmaps.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use mobitrace_core::contact::{
    all_intervals, contact_times, extract_contacts, extract_sessions, first_contact_times,
    inter_contact_times, CensorPolicy,
};
use mobitrace_core::graph::{aggregate_graph_metrics, LeafRule};
use mobitrace_core::io::{
    parse_trace, write_contact_events, write_trace, IngestPolicy, ParseError, TraceSummary,
};
use mobitrace_core::model::{DistanceMode, ModelError, RadioRange, TraceSet};
use mobitrace_core::spatial::{
    per_user_totals, trip_records, write_heatmap_mean, write_heatmap_peak, zone_occupation,
    GridSpec, SpatialError, DEFAULT_CELL_SIZE, DEFAULT_PAUSE_EPSILON,
};
use mobitrace_core::stats::{write_distribution, DistributionKind, EmpiricalDistribution};
use mobitrace_core::synth::{parse_model_config, ConfigError};

#[derive(Parser)]
#[command(
    name = "mobitrace",
    version,
    about = "Contact, graph and trip analytics over time-sampled position traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print ingest statistics of a trace file
    Summary(SummaryArgs),
    /// Write plottable CCDF/CDF files for the full metric suite
    Analyze(AnalyzeArgs),
    /// Generate a synthetic trace from a model config
    Generate(GenerateArgs),
    /// Export contact events for trace-driven simulation
    ExportContacts(ExportContactsArgs),
    /// Write zone-occupancy heatmaps (mean and peak)
    Heatmap(HeatmapArgs),
}

#[derive(Args)]
struct RangeArgs {
    /// Use the bluetooth-class preset (10 m)
    #[arg(long)]
    bluetooth: bool,
    /// Use the wifi-class preset (80 m)
    #[arg(long)]
    wifi: bool,
    /// Use an arbitrary range in meters; repeatable
    #[arg(long, value_name = "m")]
    range: Vec<f64>,
}

impl RangeArgs {
    fn ranges(&self) -> Result<Vec<RadioRange>, CliError> {
        let mut out = Vec::new();
        if self.bluetooth {
            out.push(RadioRange::BLUETOOTH);
        }
        if self.wifi {
            out.push(RadioRange::WIFI);
        }
        for &m in &self.range {
            out.push(RadioRange::new(m)?);
        }
        out.dedup_by(|a, b| a.meters() == b.meters());
        if out.is_empty() {
            return Err(CliError::Validation(
                "no range specified (use --bluetooth, --wifi or --range <m>)".into(),
            ));
        }
        Ok(out)
    }
}

#[derive(Args)]
struct CensorArgs {
    /// Keep boundary-truncated contacts in the samples (default)
    #[arg(long, conflicts_with = "exclude_censored")]
    include_censored: bool,
    /// Drop boundary-truncated contacts from the samples
    #[arg(long)]
    exclude_censored: bool,
}

impl CensorArgs {
    fn policy(&self) -> CensorPolicy {
        if self.exclude_censored {
            CensorPolicy::ExcludeCensored
        } else {
            CensorPolicy::Include
        }
    }
}

#[derive(Args)]
struct SummaryArgs {
    /// Trace file to read
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Trace file to read
    #[arg(long)]
    input: PathBuf,
    /// Directory for the output files
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    ranges: RangeArgs,
    #[command(flatten)]
    censor: CensorArgs,
    /// Missing snapshots tolerated inside a session
    #[arg(long, value_name = "n", default_value_t = 0)]
    gap_tolerance: usize,
    /// Per-step displacement at or below which a step counts as a pause
    #[arg(long, value_name = "m", default_value_t = DEFAULT_PAUSE_EPSILON)]
    pause_epsilon: f64,
    /// Measure distances on the ground plane, ignoring elevation
    #[arg(long = "2d")]
    two_d: bool,
    /// Drop per-step displacements above this many meters as teleports
    #[arg(long, value_name = "m")]
    teleport_cutoff: Option<f64>,
    /// Count degree-0/1 nodes as clustering 0 instead of excluding them
    #[arg(long)]
    cc_zero_for_leaves: bool,
}

#[derive(Args)]
struct GenerateArgs {
    /// Model config file (flat key=value)
    #[arg(long)]
    model_config: PathBuf,
    /// Directory for trace.csv
    #[arg(long)]
    out_dir: PathBuf,
    /// Override the config's RNG seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ExportContactsArgs {
    /// Trace file to read
    #[arg(long)]
    input: PathBuf,
    /// Directory for the output files
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    ranges: RangeArgs,
    #[command(flatten)]
    censor: CensorArgs,
    /// Measure distances on the ground plane, ignoring elevation
    #[arg(long = "2d")]
    two_d: bool,
}

#[derive(Args)]
struct HeatmapArgs {
    /// Trace file to read
    #[arg(long)]
    input: PathBuf,
    /// Directory for the output files
    #[arg(long)]
    out_dir: PathBuf,
    /// Occupancy cell side in meters
    #[arg(long, value_name = "m", default_value_t = DEFAULT_CELL_SIZE)]
    grid_l: f64,
}

/// Exit code 1: validation problems (missing files, bad parameters, no
/// samples). Exit code 2: malformed file formats. Clap reports usage errors
/// with exit code 2 on its own.
enum CliError {
    Validation(String),
    Format(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Format(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Format(m) => m,
        }
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        match e {
            ParseError::Io(io) => CliError::Validation(io.to_string()),
            other => CliError::Format(other.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::InvalidValue { .. } => CliError::Validation(e.to_string()),
            ConfigError::Io(io) => CliError::Validation(io.to_string()),
            other => CliError::Format(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<SpatialError> for CliError {
    fn from(e: SpatialError) -> Self {
        match e {
            SpatialError::Format(_) => CliError::Format(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        eprintln!("mobitrace: {}", e.message());
        std::process::exit(e.code());
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Summary(args) => summary(args),
        Command::Analyze(args) => analyze(args),
        Command::Generate(args) => generate(args),
        Command::ExportContacts(args) => export_contacts(args),
        Command::Heatmap(args) => heatmap(args),
    }
}

fn load_trace(path: &Path) -> Result<(TraceSet, TraceSummary), CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::Validation(format!("{}: {}", path.display(), e)))?;
    Ok(parse_trace(BufReader::new(file), &IngestPolicy::default())?)
}

fn create_out_file(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let file = File::create(&path)
        .map_err(|e| CliError::Validation(format!("{}: {}", path.display(), e)))?;
    Ok(BufWriter::new(file))
}

// Writes one metric's distribution file; empty sample sets produce a
// header-only file and a note on stderr.
fn write_metric(
    dir: &Path,
    name: &str,
    samples: Vec<f64>,
    kind: DistributionKind,
) -> Result<(), CliError> {
    let mut w = create_out_file(dir, name)?;
    if samples.is_empty() {
        eprintln!("mobitrace: {name}: no samples");
        write_distribution(&[], kind, &mut w)?;
    } else {
        let dist = EmpiricalDistribution::new(samples)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        let points = match kind {
            DistributionKind::Ccdf => dist.ccdf_points(),
            DistributionKind::Cdf => dist.cdf_points(),
        }
        .map_err(|e| CliError::Validation(e.to_string()))?;
        write_distribution(&points, kind, &mut w)?;
    }
    w.flush()?;
    Ok(())
}

fn summary(args: SummaryArgs) -> Result<(), CliError> {
    let (trace, summary) = load_trace(&args.input)?;
    println!("land={}", trace.land().name);
    println!("extent={}", trace.land().extent);
    println!("tau={}", trace.tau());
    println!("snapshot_count={}", summary.snapshot_count);
    println!("duration={}", summary.duration);
    println!("unique_users={}", summary.unique_users);
    println!("mean_concurrency={}", summary.mean_concurrency);
    println!("malformed_rows={}", summary.malformed_rows);
    println!("seated_rows={}", summary.seated_rows);
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let ranges = args.ranges.ranges()?;
    let (trace, _) = load_trace(&args.input)?;
    if trace.snapshot_count() == 0 || trace.users().is_empty() {
        return Err(CliError::Validation("no samples".into()));
    }
    let mode = if args.two_d {
        DistanceMode::TwoD
    } else {
        DistanceMode::ThreeD
    };
    let leaf_rule = if args.cc_zero_for_leaves {
        LeafRule::CountAsZero
    } else {
        LeafRule::Exclude
    };
    let policy = args.censor.policy();
    let sessions = extract_sessions(&trace, args.gap_tolerance);

    for r in &ranges {
        let timelines = extract_contacts(&trace, *r, mode);

        let ct: Vec<f64> = contact_times(&timelines, policy)
            .into_iter()
            .map(|v| v as f64)
            .collect();
        write_metric(&args.out_dir, &format!("ct-r{r}.csv"), ct, DistributionKind::Ccdf)?;

        let ict: Vec<f64> = inter_contact_times(&timelines)
            .into_iter()
            .map(|v| v as f64)
            .collect();
        write_metric(&args.out_dir, &format!("ict-r{r}.csv"), ict, DistributionKind::Ccdf)?;

        let ft = first_contact_times(&timelines, &sessions);
        if ft.never_contacted > 0 {
            eprintln!(
                "mobitrace: ft-r{r}.csv: {} users never contacted anyone",
                ft.never_contacted
            );
        }
        let ft_samples: Vec<f64> = ft.times.values().map(|&v| v as f64).collect();
        write_metric(
            &args.out_dir,
            &format!("ft-r{r}.csv"),
            ft_samples,
            DistributionKind::Ccdf,
        )?;

        let agg = aggregate_graph_metrics(&trace, *r, mode, leaf_rule);
        let degree: Vec<f64> = agg.degree_samples.iter().map(|&v| v as f64).collect();
        write_metric(
            &args.out_dir,
            &format!("degree-r{r}.csv"),
            degree,
            DistributionKind::Ccdf,
        )?;
        let diam: Vec<f64> = agg.diameter_samples.iter().map(|&v| v as f64).collect();
        write_metric(
            &args.out_dir,
            &format!("diameter-r{r}.csv"),
            diam,
            DistributionKind::Cdf,
        )?;
        write_metric(
            &args.out_dir,
            &format!("clustering-r{r}.csv"),
            agg.clustering_samples.clone(),
            DistributionKind::Cdf,
        )?;
    }

    let records = trip_records(
        &trace,
        &sessions,
        mode,
        args.pause_epsilon,
        args.teleport_cutoff,
    );
    let totals = per_user_totals(&records);
    let lengths: Vec<f64> = totals.values().map(|t| t.travel_length).collect();
    let effective: Vec<f64> = totals
        .values()
        .map(|t| t.effective_travel_time as f64)
        .collect();
    let times: Vec<f64> = totals.values().map(|t| t.travel_time as f64).collect();
    write_metric(&args.out_dir, "travel-length.csv", lengths, DistributionKind::Cdf)?;
    write_metric(
        &args.out_dir,
        "effective-travel-time.csv",
        effective,
        DistributionKind::Cdf,
    )?;
    write_metric(&args.out_dir, "travel-time.csv", times, DistributionKind::Cdf)?;
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<(), CliError> {
    let file = File::open(&args.model_config)
        .map_err(|e| CliError::Validation(format!("{}: {}", args.model_config.display(), e)))?;
    let mut cfg = parse_model_config(BufReader::new(file))?;
    if let Some(seed) = args.seed {
        cfg.set_seed(seed);
    }
    let trace = cfg.generate()?;
    let mut w = create_out_file(&args.out_dir, "trace.csv")?;
    write_trace(&trace, &mut w)?;
    w.flush()?;
    // the file spans the first to the last populated snapshot
    let written = trace.trimmed();
    println!(
        "wrote {} ({} snapshots, {} users)",
        args.out_dir.join("trace.csv").display(),
        written.snapshot_count(),
        written.users().len()
    );
    Ok(())
}

fn export_contacts(args: ExportContactsArgs) -> Result<(), CliError> {
    let ranges = args.ranges.ranges()?;
    let (trace, _) = load_trace(&args.input)?;
    let mode = if args.two_d {
        DistanceMode::TwoD
    } else {
        DistanceMode::ThreeD
    };
    let policy = args.censor.policy();
    for r in &ranges {
        let timelines = extract_contacts(&trace, *r, mode);
        let mut intervals = all_intervals(&timelines);
        if policy == CensorPolicy::ExcludeCensored {
            intervals.retain(|c| !c.is_censored());
        }
        let mut w = create_out_file(&args.out_dir, &format!("contacts-r{r}.csv"))?;
        write_contact_events(&intervals, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn heatmap(args: HeatmapArgs) -> Result<(), CliError> {
    let (trace, _) = load_trace(&args.input)?;
    let spec = GridSpec::new(args.grid_l, trace.land().extent)?;
    let grid = zone_occupation(&trace, &spec)?;
    let mut w = create_out_file(&args.out_dir, "heatmap-mean.csv")?;
    write_heatmap_mean(&grid, &mut w)?;
    w.flush()?;
    let mut w = create_out_file(&args.out_dir, "heatmap-peak.csv")?;
    write_heatmap_peak(&grid, &mut w)?;
    w.flush()?;
    Ok(())
}
