use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use fcvbw::artifact::{self, DesignArtifact};
use fcvbw::complexity::{baseline_rows_narrow, baseline_rows_wide, comparison_table, rates, TableFormat, TableRow};
use fcvbw::lptv::ResponseGrid;
use fcvbw::metrics::{evaluate, stopband_metrics, Evaluation, METRIC_GRID_DENSITY};
use fcvbw::{build_coefficients, design, DesignOptions, EngineMode, OlsEngine, PhaseLimitMode, PtvirSet, TailPolicy};

#[derive(Parser)]
#[command(name = "fcvbw", version, about = "Variable-bandwidth fast-convolution filter design and streaming")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design transition values from a spec JSON file and write an artifact.
    Design {
        spec: PathBuf,
        /// Re-solve once with weights from the stopband energy profile.
        #[arg(long)]
        weighted: bool,
        #[arg(long, value_enum, default_value_t = PhaseArg::Block)]
        phase_limit_mode: PhaseArg,
        /// Artifact path, `-` for stdout.
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Recompute metrics from an artifact and export plot data.
    Analyze {
        artifact: PathBuf,
        /// Single bandwidth in radians (clamped to the design range).
        #[arg(long, conflicts_with_all = ["b_over_pi", "all"])]
        b: Option<f64>,
        /// Single bandwidth as a fraction of π.
        #[arg(long, conflicts_with = "all")]
        b_over_pi: Option<f64>,
        /// Every design bin plus the original-range evaluation (default).
        #[arg(long)]
        all: bool,
        /// Write `omega_over_pi,n,b_bin,magnitude_db` rows here.
        #[arg(long)]
        grid_csv: Option<PathBuf>,
        /// Frequencies on [0, π] in the response grid.
        #[arg(long, default_value_t = 513)]
        grid_points: usize,
        /// Write `n,b_over_pi,b_bin,sbe_db` rows here.
        #[arg(long)]
        profile_csv: Option<PathBuf>,
        /// Refuse to run unless the artifact was designed from this spec.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Metrics JSON path, `-` for stdout.
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Filter a raw little-endian f64 stream.
    Filter {
        artifact: PathBuf,
        /// Input samples, `-` for stdin.
        #[arg(long = "in", default_value = "-")]
        input: String,
        /// Output samples, `-` for stdout.
        #[arg(long, default_value = "-")]
        out: String,
        /// CSV of `sample_index,b_over_pi` retune requests.
        #[arg(long)]
        retune: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModeArg::Symmetric)]
        mode: ModeArg,
        /// Initial bandwidth in radians; defaults to the upper design bin.
        #[arg(long)]
        b: Option<f64>,
        #[arg(long, value_enum, default_value_t = TailArg::Full)]
        tail: TailArg,
    },
    /// Complexity and error table for one or more artifacts.
    Report {
        #[arg(required = true)]
        artifacts: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = FormatArg::Md)]
        format: FormatArg,
        /// Reference comparison rows to prepend.
        #[arg(long, value_enum, default_value_t = BaselineArg::None)]
        baseline: BaselineArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PhaseArg {
    Block,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Symmetric,
    Conventional,
}

#[derive(Clone, Copy, ValueEnum)]
enum TailArg {
    Full,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Md,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    /// Δ = 0.25π, b ∈ [0.75π, 0.859π].
    Narrow,
    /// Δ = 0.27π, b ∈ [0.76π, 0.85π].
    Wide,
    None,
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn open_output(path: &str) -> Result<Box<dyn Write>> {
    if path == "-" {
        Ok(Box::new(BufWriter::new(io::stdout().lock())))
    } else {
        let file = File::create(path).with_context(|| format!("creating {path}"))?;
        Ok(Box::new(BufWriter::new(file)))
    }
}

fn write_json(path: &str, value: &impl Serialize) -> Result<()> {
    let mut out = open_output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn load_artifact(path: &Path) -> Result<DesignArtifact> {
    DesignArtifact::from_json(&read_text(path)?).with_context(|| format!("loading artifact {}", path.display()))
}

fn cmd_design(spec_path: &Path, weighted: bool, phase: PhaseArg, out: &str) -> Result<()> {
    let spec = artifact::read_spec(&read_text(spec_path)?).with_context(|| format!("spec {}", spec_path.display()))?;
    let mode = match phase {
        PhaseArg::Block => PhaseLimitMode::Block,
        PhaseArg::Full => PhaseLimitMode::Full,
    };
    let d = design::<f64>(&spec, DesignOptions { weighted, mode })?;
    let a = DesignArtifact::from_design(&d, mode)?;
    let m = a.reported_metrics();
    eprintln!(
        "designed N={} L={} M={} K={} bins {}..={}: SBML {:.2} dB, SBE {:.2} dB (max {:.2} dB)",
        a.disc.n_fft,
        a.disc.filter_length,
        a.disc.block_advance,
        a.disc.k_transition_count,
        a.disc.b_bins_lower,
        a.disc.b_bins_upper,
        m.aggregate.sbml_db,
        m.aggregate.sbe_db,
        m.aggregate.sbe_max_db
    );
    let mut w = open_output(out)?;
    w.write_all(a.to_json()?.as_bytes())?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SingleBin {
    b_bin: i64,
    clamped: bool,
    sbml_db: f64,
    sbe_db: f64,
    sbe_db_per_phase: Vec<f64>,
}

#[derive(Serialize)]
struct FullAnalysis<'a> {
    design: &'a fcvbw::DesignMetrics,
    specification: &'a fcvbw::DesignMetrics,
    /// Largest relative difference from the metrics stored at design time.
    max_relative_deviation: f64,
}

fn relative_deviation(a: &fcvbw::DesignMetrics, b: &fcvbw::DesignMetrics) -> f64 {
    let rel = |x: f64, y: f64| if x == y { 0.0 } else { (x - y).abs() / x.abs().max(y.abs()) };
    let mut worst = rel(a.aggregate.sbml_db, b.aggregate.sbml_db).max(rel(a.aggregate.sbe_db, b.aggregate.sbe_db));
    for (ra, rb) in a.profile.iter().zip(&b.profile) {
        for (x, y) in ra.iter().zip(rb) {
            worst = worst.max(rel(*x, *y));
        }
    }
    if a.profile.len() != b.profile.len() {
        worst = f64::INFINITY;
    }
    worst
}

#[allow(clippy::too_many_arguments)]
fn cmd_analyze(
    path: &Path,
    b: Option<f64>,
    b_over_pi: Option<f64>,
    grid_csv: Option<&Path>,
    grid_points: usize,
    profile_csv: Option<&Path>,
    spec: Option<&Path>,
    out: &str,
) -> Result<()> {
    let a = load_artifact(path)?;
    if let Some(spec_path) = spec {
        let spec = artifact::read_spec(&read_text(spec_path)?)?;
        a.check_spec(&spec).context("artifact was not designed from this spec")?;
    }
    let v = a.values()?;
    let disc = &a.disc;
    let single = b.or(b_over_pi.map(|x| x * std::f64::consts::PI));
    let bins: Vec<i64> = match single {
        Some(b_rad) => {
            let assignment = disc.bin_for(b_rad);
            if assignment.clamped {
                eprintln!(
                    "warning: b = {:.6}π is outside the design range, clamped to bin {}",
                    b_rad / std::f64::consts::PI,
                    assignment.bin
                );
            }
            let set = PtvirSet::new(&build_coefficients(disc, &v, assignment.bin)?, disc.block_advance)?;
            let s = stopband_metrics(&set, disc, METRIC_GRID_DENSITY)?;
            let summary = s.summary();
            write_json(
                out,
                &SingleBin {
                    b_bin: assignment.bin,
                    clamped: assignment.clamped,
                    sbml_db: summary.sbml_db,
                    sbe_db: summary.sbe_db,
                    sbe_db_per_phase: s.energies.iter().map(|&e| fcvbw::scalar::power_db(e)).collect(),
                },
            )?;
            vec![assignment.bin]
        }
        None => {
            let design_m = evaluate(disc, &v, &Evaluation::Design, METRIC_GRID_DENSITY)?;
            let spec_m = evaluate(disc, &v, &Evaluation::specification(&a.spec, disc), METRIC_GRID_DENSITY)?;
            let deviation = relative_deviation(&design_m, &a.metrics.design)
                .max(relative_deviation(&spec_m, &a.metrics.specification));
            eprintln!("recomputed metrics differ from the artifact by at most {deviation:.1e} (relative)");
            if let Some(p) = profile_csv {
                let file = File::create(p).with_context(|| format!("creating {}", p.display()))?;
                artifact::profile_csv(&design_m, BufWriter::new(file))?;
            }
            write_json(
                out,
                &FullAnalysis {
                    design: &design_m,
                    specification: &spec_m,
                    max_relative_deviation: deviation,
                },
            )?;
            disc.bins().collect()
        }
    };
    if single.is_some() && profile_csv.is_some() {
        eprintln!("warning: --profile-csv needs --all; skipped");
    }
    if let Some(p) = grid_csv {
        let file = File::create(p).with_context(|| format!("creating {}", p.display()))?;
        artifact::response_grid_csv(disc, &v, &bins, &ResponseGrid::uniform(grid_points), BufWriter::new(file))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_filter(
    path: &Path,
    input: &str,
    out: &str,
    retune: Option<&Path>,
    mode: ModeArg,
    b: Option<f64>,
    tail: TailArg,
) -> Result<()> {
    let a = load_artifact(path)?;
    let v = a.values()?;
    let disc = &a.disc;
    let mode = match mode {
        ModeArg::Symmetric => EngineMode::Symmetric,
        ModeArg::Conventional => EngineMode::Conventional,
    };
    let start_bin = match b {
        Some(b_rad) => {
            let assignment = disc.bin_for(b_rad);
            if assignment.clamped {
                eprintln!("warning: initial b clamped to bin {}", assignment.bin);
            }
            assignment.bin
        }
        None => disc.b_bins_upper,
    };
    let schedule = match retune {
        Some(p) => {
            let events = artifact::parse_schedule(&read_text(p)?, disc)
                .with_context(|| format!("schedule {}", p.display()))?;
            for e in events.iter().filter(|e| e.clamped) {
                eprintln!(
                    "warning: schedule line {}: b = {}π clamped to bin {}",
                    e.line, e.b_over_pi, e.bin
                );
            }
            events.iter().map(|e| (e.sample_index, e.bin)).collect()
        }
        None => Vec::new(),
    };
    let samples = if input == "-" {
        artifact::read_f64_le(io::stdin().lock())?
    } else {
        let mut bytes = Vec::new();
        File::open(input)
            .with_context(|| format!("opening {input}"))?
            .read_to_end(&mut bytes)?;
        artifact::read_f64_le(&bytes[..])?
    };
    let mut engine = OlsEngine::<f64>::new(disc, &v, start_bin, mode)?;
    let tail = match tail {
        TailArg::Full => TailPolicy::Full,
        TailArg::None => TailPolicy::None,
    };
    let blocks = samples.len().div_ceil(disc.block_advance);
    let retunes = schedule.len();
    let y = engine.run(&samples, &schedule, tail)?;
    artifact::write_f64_le(open_output(out)?, &y)?;
    eprintln!(
        "{mode} mode: {} samples in, {} out, {blocks} input blocks, {retunes} retune requests; group delay {} samples, block latency {} samples",
        samples.len(),
        y.len(),
        disc.delay_design,
        disc.delay_system
    );
    Ok(())
}

fn cmd_report(paths: &[PathBuf], format: FormatArg, baseline: BaselineArg) -> Result<()> {
    let mut rows: Vec<TableRow> = match baseline {
        BaselineArg::Narrow => baseline_rows_narrow(),
        BaselineArg::Wide => baseline_rows_wide(),
        BaselineArg::None => Vec::new(),
    };
    for p in paths {
        let a = load_artifact(p)?;
        let r = rates(a.disc.n_fft, a.disc.filter_length, a.disc.k_transition_count)?;
        let m = a.reported_metrics();
        let label = p.file_stem().map_or_else(|| "design".to_string(), |s| s.to_string_lossy().into_owned());
        rows.push(TableRow::from_report(
            &label,
            &r,
            Some(m.aggregate.sbml_db),
            Some(m.aggregate.sbe_db),
        ));
    }
    let format = match format {
        FormatArg::Md => TableFormat::Markdown,
        FormatArg::Csv => TableFormat::Csv,
    };
    let mut out = io::stdout().lock();
    out.write_all(comparison_table(&rows, format).as_bytes())?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Design {
            spec,
            weighted,
            phase_limit_mode,
            out,
        } => cmd_design(&spec, weighted, phase_limit_mode, &out),
        Command::Analyze {
            artifact,
            b,
            b_over_pi,
            all: _,
            grid_csv,
            grid_points,
            profile_csv,
            spec,
            out,
        } => {
            if grid_points < 2 {
                bail!("--grid-points must be at least 2");
            }
            cmd_analyze(
                &artifact,
                b,
                b_over_pi,
                grid_csv.as_deref(),
                grid_points,
                profile_csv.as_deref(),
                spec.as_deref(),
                &out,
            )
        }
        Command::Filter {
            artifact,
            input,
            out,
            retune,
            mode,
            b,
            tail,
        } => cmd_filter(&artifact, &input, &out, retune.as_deref(), mode, b, tail),
        Command::Report {
            artifacts,
            format,
            baseline,
        } => cmd_report(&artifacts, format, baseline),
    }
}

/// 1 for numerical failures (an ill-conditioned system), 2 for everything
/// else the user can fix.
fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<fcvbw::Error>())
        .any(fcvbw::Error::is_numerical);
    if numerical {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
