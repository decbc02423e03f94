//! `hos`: label tachograph logs, analyse infractions, cluster driving days
//! and profile drivers.

mod diag;

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use hos_core::activity_log::{parse_log, serialize_log, ParseOptions};
use hos_core::infraction::render_text;
use hos_core::labeller::{parse_labelled, write_labelled};
use hos_core::pipeline::{self, ClusterOutput, PipelineConfig};
use hos_core::synth::InjectionKind;
use hos_core::Execution;

use diag::{Failure, EXIT_INPUT};

#[derive(Debug, Parser)]
#[command(
    name = "hos",
    version,
    about = "Hours-of-service compliance and driver behaviour analysis"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// TOML pipeline configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every randomized stage; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Relaxation margin in minutes; repeat to try several.
    #[arg(long = "epsilon", global = true)]
    epsilons: Vec<u32>,
    /// Target number of clusters.
    #[arg(long, global = true)]
    clusters: Option<usize>,
    /// Fill gaps between records with Idle instead of rejecting the input.
    #[arg(long, global = true)]
    fill_gaps: bool,
    /// Count illegal days when profiling drivers.
    #[arg(long, global = true)]
    include_infractions: bool,
    /// Cluster legal and illegal days with a single model.
    #[arg(long, global = true)]
    joint: bool,
    /// Allow randomized stages to run without a seed.
    #[arg(long, global = true)]
    nondeterministic: bool,
    /// Run on one thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic legal corpus with its ground truth.
    Generate {
        /// Directory receiving corpus.csv and truth.json.
        #[arg(short, long)]
        out_dir: PathBuf,
        #[arg(long)]
        drivers: Option<usize>,
        #[arg(long)]
        weeks: Option<usize>,
        #[arg(long)]
        days_per_week: Option<usize>,
        /// Injection kinds (e.g. ndd_driving); one of each per block of drivers.
        #[arg(long, value_delimiter = ',')]
        inject: Vec<String>,
        #[arg(long)]
        inject_every: Option<usize>,
    },
    /// Label a raw activity log.
    Label {
        /// Raw CSV log; stdin when omitted or "-".
        input: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Analyse infractions of a labelled log.
    Infractions {
        input: Option<PathBuf>,
        /// JSON report; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Labelled CSV with the Infraction column.
        #[arg(long)]
        annotated: Option<PathBuf>,
        /// Human-readable report.
        #[arg(long)]
        text: Option<PathBuf>,
    },
    /// Embed and cluster the driving days of a labelled log.
    Clusterize {
        input: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write the validity-index sweep here.
        #[arg(long)]
        sweep: Option<PathBuf>,
    },
    /// Profile drivers from a clustering result.
    Profile {
        /// clusters.json written by `clusterize`.
        input: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write the frequency table as CSV.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Score every (method, k) pair of the configured grid.
    Sweep {
        input: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

impl Command {
    fn randomized(&self) -> bool {
        matches!(
            self,
            Command::Generate { .. }
                | Command::Clusterize { .. }
                | Command::Profile { .. }
                | Command::Sweep { .. }
        )
    }
}

fn read_input(path: Option<&Path>) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    match path {
        None => io::stdin().read_to_end(&mut buf).map(|_| ()),
        Some(p) if p.as_os_str() == "-" => io::stdin().read_to_end(&mut buf).map(|_| ()),
        Some(p) => File::open(p)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map(|_| ()),
    }
    .map_err(|e| {
        Failure::input(format!(
            "cannot read {}: {e}",
            path.map_or("stdin".into(), |p| p.display().to_string())
        ))
    })?;
    Ok(buf)
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match path {
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(p) if p.as_os_str() == "-" => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(p) => File::create(p)
            .map(|f| Box::new(BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| Failure::internal(format!("cannot create {}: {e}", p.display()))),
    }
}

fn write_json<T: serde::Serialize>(value: &T, path: Option<&Path>) -> Result<(), Failure> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)
        .and_then(|_| out.flush())
        .map_err(|e| Failure::internal(e.to_string()))
}

fn finish(mut out: Box<dyn Write>) -> Result<(), Failure> {
    out.flush().map_err(|e| Failure::internal(e.to_string()))
}

fn load_config(g: &Global) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &g.config {
        Some(p) => PipelineConfig::from_file(p)?,
        None => PipelineConfig::default(),
    };
    if g.seed.is_some() {
        cfg.seed = g.seed;
    }
    if !g.epsilons.is_empty() {
        cfg.epsilons = g.epsilons.clone();
    }
    if let Some(k) = g.clusters {
        if k == 0 {
            return Err(Failure::input("--clusters must be positive"));
        }
        cfg.clustering.params.k = Some(k);
    }
    cfg.fill_gaps |= g.fill_gaps;
    cfg.profiles.include_infractions |= g.include_infractions;
    cfg.clustering.joint |= g.joint;
    Ok(cfg)
}

/// The configured seed, or a clock-derived one when nondeterminism is allowed.
fn resolve_seed(cfg: &PipelineConfig, nondeterministic: bool) -> Result<u64, Failure> {
    if let Some(s) = cfg.seed {
        return Ok(s);
    }
    if !nondeterministic {
        return Err(Failure::input("this stage is randomized: pass --seed, set `seed` in the config, or pass --nondeterministic"));
    }
    let nanos = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_nanos());
    let seed = nanos as u64 ^ u64::from(std::process::id()).rotate_left(32);
    diag::info(format!("running nondeterministically with seed {seed}"));
    Ok(seed)
}

fn read_labelled(input: Option<&Path>) -> Result<Vec<Vec<hos_core::LabeledActivity>>, Failure> {
    Ok(parse_labelled(read_input(input)?.as_slice())?)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load_config(&cli.global)?;
    let exec = if cli.global.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let seed = if cli.command.randomized() {
        resolve_seed(&cfg, cli.global.nondeterministic)?
    } else {
        0
    };
    match cli.command {
        Command::Generate {
            out_dir,
            drivers,
            weeks,
            days_per_week,
            inject,
            inject_every,
        } => {
            let mut cfg = cfg;
            let g = &mut cfg.generate;
            g.corpus.drivers = drivers.unwrap_or(g.corpus.drivers);
            g.corpus.weeks = weeks.unwrap_or(g.corpus.weeks);
            g.corpus.days_per_week = days_per_week.unwrap_or(g.corpus.days_per_week);
            g.inject_every = inject_every.unwrap_or(g.inject_every);
            if !inject.is_empty() {
                g.inject = inject
                    .iter()
                    .map(|k| {
                        serde_json::from_value::<InjectionKind>(serde_json::Value::String(
                            k.clone(),
                        ))
                        .map_err(|_| Failure::input(format!("unknown injection kind '{k}'")))
                    })
                    .collect::<Result<_, _>>()?;
            }
            if g.inject_every == 0 {
                return Err(Failure::input("--inject-every must be positive"));
            }
            let corpus = pipeline::generate(&cfg, seed, exec)?;
            std::fs::create_dir_all(&out_dir).map_err(|e| {
                Failure::internal(format!("cannot create {}: {e}", out_dir.display()))
            })?;
            let mut out = sink(Some(&out_dir.join("corpus.csv")))?;
            serialize_log(&corpus.logs(), &mut out)?;
            finish(out)?;
            write_json(&corpus.truth(), Some(&out_dir.join("truth.json")))
        }
        Command::Label { input, output } => {
            let raw = read_input(input.as_deref())?;
            let mut out = sink(output.as_deref())?;
            if raw.iter().all(u8::is_ascii_whitespace) {
                // An empty log labels to an empty table.
                write_labelled(&[], false, &mut out)?;
                return finish(out);
            }
            let logs = parse_log(
                raw.as_slice(),
                ParseOptions {
                    fill_gaps: cfg.fill_gaps,
                },
            )?;
            write_labelled(&pipeline::label(&logs, &cfg, exec), false, &mut out)?;
            finish(out)
        }
        Command::Infractions {
            input,
            output,
            annotated,
            text,
        } => {
            let labelled = read_labelled(input.as_deref())?;
            let (logs, reports) = pipeline::infractions(&labelled, &cfg, exec)?;
            if let Some(path) = annotated {
                let mut out = sink(Some(&path))?;
                write_labelled(&logs, true, &mut out)?;
                finish(out)?;
            }
            if let Some(path) = text {
                let mut out = sink(Some(&path))?;
                out.write_all(render_text(&reports).as_bytes())
                    .map_err(|e| Failure::internal(e.to_string()))?;
                finish(out)?;
            }
            write_json(&reports, output.as_deref())
        }
        Command::Clusterize {
            input,
            output,
            sweep,
        } => {
            let labelled = read_labelled(input.as_deref())?;
            let result = pipeline::clusterize(&labelled, &cfg, seed)?;
            result.warnings.iter().for_each(diag::warn);
            if let Some(path) = sweep {
                let rows = pipeline::sweep_splits(&labelled, &cfg, seed, exec)?;
                let mut out = sink(Some(&path))?;
                pipeline::write_sweeps_csv(&rows, &mut out)?;
                finish(out)?;
            }
            write_json(&result, output.as_deref())
        }
        Command::Profile {
            input,
            output,
            table,
        } => {
            let raw = read_input(input.as_deref())?;
            let clusters: ClusterOutput = serde_json::from_slice(&raw)
                .map_err(|e| Failure::input(format!("not a clustering result: {e}")))?;
            let result = pipeline::profile(&clusters, &cfg, seed, exec)?;
            result.warnings.iter().for_each(diag::warn);
            if let Some(path) = table {
                let mut out = sink(Some(&path))?;
                result.table.write_csv(&mut out)?;
                finish(out)?;
            }
            write_json(&result, output.as_deref())
        }
        Command::Sweep { input, output } => {
            let labelled = read_labelled(input.as_deref())?;
            let rows = pipeline::sweep_splits(&labelled, &cfg, seed, exec)?;
            let mut out = sink(output.as_deref())?;
            pipeline::write_sweeps_csv(&rows, &mut out)?;
            finish(out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            Failure::input(e.to_string().trim_end()).report();
            return ExitCode::from(EXIT_INPUT as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            f.report();
            ExitCode::from(f.code as u8)
        }
    }
}
