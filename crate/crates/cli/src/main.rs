use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lossy_anneal::algorithms::{run, write_trace_csv, Algorithm, RunSpec, TraceLevel};
use lossy_anneal::analysis::DEFAULT_MATRIX_CAP;
use lossy_anneal::experiment::{cmd_analyze, cmd_run, cmd_sweep, RunOptions};
use lossy_anneal::queueing::{write_queue_trace, QueueSpec};
use lossy_anneal::scenario::{bundled, drop_model, AxisSpec, Metric, Scenario, BUNDLED};

#[derive(Parser)]
#[command(name = "lossy-anneal", version, about = "Simulated annealing link scheduling under message loss")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file, or the name of a bundled scenario.
    scenario: String,
    /// Use this single seed instead of the scenario's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (all cores by default).
    #[arg(long)]
    threads: Option<usize>,
    /// Largest state space analysed exactly.
    #[arg(long, default_value_t = DEFAULT_MATRIX_CAP)]
    cap: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of a scenario and write tidy CSV.
    Run(Common),
    /// Exact chain analysis with a pass/fail report.
    Analyze(Common),
    /// Override swept parameters, then run.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `name=v1,v2`, `name=a..b` or `name=a..b:step`; name is one of
        /// p, arrival, beta, d, cmax, seed. Repeatable.
        #[arg(long = "axis", required = true)]
        axes: Vec<String>,
    },
    /// Per-slot trace of the first grid point for one algorithm.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        algorithm: Algorithm,
    },
    /// List bundled scenarios.
    ListScenarios,
}

fn load(name: &str) -> Result<(Scenario, PathBuf)> {
    let path = Path::new(name);
    if path.exists() {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let scenario = Scenario::parse(&text).with_context(|| format!("in {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        return Ok((scenario, base));
    }
    match bundled(name) {
        Some(b) => Ok((Scenario::parse(b.text)?, std::env::current_dir()?)),
        None => {
            let names: Vec<&str> = BUNDLED.iter().map(|b| b.name).collect();
            bail!("no scenario file `{name}` and no bundled scenario of that name (bundled: {})", names.join(", "))
        }
    }
}

fn output(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn setup(common: &Common) -> Result<(Scenario, PathBuf, RunOptions)> {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let (scenario, base) = load(&common.scenario)?;
    let options = RunOptions {
        cap: common.cap,
        seed: common.seed,
    };
    Ok((scenario, base, options))
}

fn trace(common: &Common, algorithm: Algorithm) -> Result<()> {
    let (scenario, base, _) = setup(common)?;
    let model = scenario.build_model(&base)?;
    let weights = scenario.weight_vector(model.links())?;
    let point = scenario.points()[0];
    let drop = drop_model(&point)?;
    let seed = common.seed.unwrap_or(scenario.seeds[0]);
    let mut out = output(&common.out)?;
    if scenario.metrics.contains(&Metric::Queue) {
        let n = model.links();
        let spec = QueueSpec {
            algorithm,
            drop: &drop,
            schedule: point.schedule,
            arrivals: vec![point.arrival.unwrap_or(0.0); n],
            c_max: vec![point.c_max.unwrap_or_else(|| model.max_rate()); n],
            horizon: scenario.horizon,
            seed,
        };
        write_queue_trace(&model, &spec, &mut out)?;
    } else {
        let bounds = match algorithm {
            Algorithm::Rsa => Some(scenario.bound_table(&model, &weights, &point, &base)?),
            _ => None,
        };
        let spec = RunSpec {
            algorithm,
            weights: &weights,
            bounds: bounds.as_ref(),
            drop: &drop,
            schedule: point.schedule,
            x0: Some(scenario.initial_state(model.links())),
            horizon: scenario.horizon,
            seed,
            trace: TraceLevel::Slots,
        };
        let result = run(&model, &spec)?;
        write_trace_csv(&model, &weights, &result.records, &mut out)?;
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(common) => {
            let (scenario, base, options) = setup(&common)?;
            let results = cmd_run(&scenario, &base, &options)?;
            let mut out = output(&common.out)?;
            results.write_csv(&mut out)?;
            out.flush()?;
        }
        Command::Sweep { common, axes } => {
            let axes: Vec<AxisSpec> = axes
                .iter()
                .map(|a| a.parse().with_context(|| format!("axis `{a}`")))
                .collect::<Result<_>>()?;
            let (scenario, base, options) = setup(&common)?;
            let results = cmd_sweep(&scenario, &base, &axes, &options)?;
            let mut out = output(&common.out)?;
            results.write_csv(&mut out)?;
            out.flush()?;
        }
        Command::Analyze(common) => {
            let (scenario, base, options) = setup(&common)?;
            let report = cmd_analyze(&scenario, &base, &options)?;
            let mut out = output(&common.out)?;
            report.write_csv(&mut out)?;
            out.flush()?;
            if report.failed() {
                eprintln!("error: analysis reported failing checks");
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Trace { common, algorithm } => trace(&common, algorithm)?,
        Command::ListScenarios => {
            let mut out = io::stdout().lock();
            for b in BUNDLED {
                writeln!(out, "{:<8} {}", b.name, b.summary)?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
