use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use neurocore::bg::{self, Condition};
use neurocore::config::RunConfig;
use neurocore::export::{self, Metadata, Summary};
use neurocore::network::Backend;
use neurocore::neuron::schedule::BlockSchedule;
use neurocore::neuron::{NeuronParams, DT_MS};
use neurocore::regimes::{self, Regime};

#[derive(Parser, Debug)]
#[command(
    name = "neurocore",
    version,
    about = "Fixed-point Izhikevich neurocore emulator"
)]
struct Cli {
    /// Run configuration (TOML). Defaults to the built-in basal ganglia circuit.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "NEUROCORE_SEED")]
    seed: Option<u64>,
    #[arg(long, global = true, value_parser = parse_backend)]
    backend: Option<Backend>,
    #[arg(long = "duration-ms", global = true)]
    duration_ms: Option<f64>,
    /// Output directory; every file is written below it.
    #[arg(long, global = true, env = "NEUROCORE_OUT")]
    out: Option<PathBuf>,
    /// Engine worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Six canonical firing regimes on both backends, with voltage traces.
    Regimes,
    /// Float vs fixed spike-timing error for RS and FS neurons.
    Errt,
    /// Basal ganglia circuit under baseline, high and low dopamine.
    Gonogo,
    /// Checks that every block of a schedule touches one state word.
    ValidateSchedule {
        /// Schedule file; the shipped Izhikevich schedule when omitted.
        file: Option<PathBuf>,
    },
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    s.parse()
}

/// Usage and configuration problems exit with 2, everything else with 1.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Returns whether every check in the command passed.
fn run(cli: Cli) -> Result<bool, Failure> {
    match &cli.command {
        Command::Regimes => Ok(cmd_regimes(&out_dir(&cli, None))?),
        Command::Errt => Ok(cmd_errt()?),
        Command::Gonogo => cmd_gonogo(&cli),
        Command::ValidateSchedule { file } => cmd_validate(file.as_deref()),
    }
}

fn out_dir(cli: &Cli, config: Option<&RunConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| config.map(|c| c.output.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn create(path: &Path) -> Result<fs::File> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn cmd_regimes(out: &Path) -> Result<bool> {
    let dir = out.join("regimes");
    let results = regimes::run_regimes()?;
    let mut report = String::from("regime  backend  spikes  result  detail\n");
    for (check, _) in &results {
        report.push_str(&format!(
            "{:<7} {:<8} {:>6}  {:<6}  {}\n",
            check.regime.short(),
            check.backend,
            check.spikes,
            if check.passed { "PASS" } else { "FAIL" },
            check.detail
        ));
    }
    for pair in results.chunks(2) {
        let (float, fixed) = (&pair[0].1, &pair[1].1);
        let path = dir.join(format!("{}.csv", pair[0].0.regime.short()));
        regimes::write_trace_csv(float, fixed, create(&path)?)?;
    }
    fs::write(dir.join("report.txt"), &report)?;
    print!("{report}");
    Ok(results.iter().all(|(c, _)| c.passed))
}

fn cmd_errt() -> Result<bool> {
    let rows = [
        regimes::errt_experiment("RS", Regime::RegularSpiking.params())?,
        regimes::errt_experiment("FS", NeuronParams::fast_spiking())?,
    ];
    println!(
        "I = {} for {} ms, dt = {} ms",
        regimes::TEST_CURRENT,
        regimes::TEST_DURATION_MS,
        DT_MS
    );
    println!("neuron  float t1..t2 (ms)     fixed t1..t2 (ms)     ERRt");
    for r in &rows {
        let f = r.float.times();
        let x = r.fixed.times();
        println!(
            "{:<6}  {:>8.3} .. {:>8.3}  {:>8.3} .. {:>8.3}  {:.3}%",
            r.label, f[0], f[1], x[0], x[1], r.errt_percent
        );
    }
    Ok(true)
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| Failure::Usage(e.into()))?,
        None => RunConfig::default_bg(),
    };
    if let Some(seed) = cli.seed {
        cfg.simulation.seed = seed;
    }
    if let Some(b) = cli.backend {
        cfg.simulation.backend = b;
    }
    if let Some(d) = cli.duration_ms {
        cfg.simulation.duration_ms = d;
    }
    if let Some(t) = cli.threads {
        cfg.simulation.threads = t;
    }
    // re-check the overridden values
    RunConfig::parse(&cfg.to_toml(), "command line").map_err(|e| Failure::Usage(e.into()))
}

fn cmd_gonogo(cli: &Cli) -> Result<bool, Failure> {
    let cfg = load_config(cli)?;
    let out = out_dir(cli, Some(&cfg)).join("gonogo");
    let bg_cfg = cfg.bg_config();
    let started = Instant::now();
    let results = bg::run_gonogo(&bg_cfg).map_err(anyhow::Error::from)?;
    let elapsed = started.elapsed().as_secs_f64();

    for r in &results {
        export::export_raster(
            &r.record,
            DT_MS,
            bg_cfg.duration_ms,
            &out,
            r.condition.name(),
        )
        .map_err(anyhow::Error::from)?;
    }
    let summary = Summary::new(
        &results,
        Metadata {
            seed: bg_cfg.seed,
            backend: bg_cfg.backend,
            duration_ms: bg_cfg.duration_ms,
            analysis_start_ms: bg_cfg.analysis_start_ms,
        },
    );
    let json = summary.to_json().map_err(anyhow::Error::from)?;
    create(&out.join("summary.json"))
        .and_then(|mut f| f.write_all(json.as_bytes()).context("writing summary"))?;

    let names: Vec<&str> = bg_cfg.circuit.population_names();
    print!("{:<10}", "rate (Hz)");
    for c in Condition::ALL {
        print!("{:>10}", c.name());
    }
    println!();
    for name in names {
        print!("{name:<10}");
        for r in &results {
            print!("{:>10.2}", r.rate(name));
        }
        println!();
    }
    let steps = bg_cfg.steps() as f64 * results.len() as f64;
    println!(
        "{} steps in {elapsed:.2} s ({:.0} steps/s); output in {}",
        steps,
        steps / elapsed,
        out.display()
    );
    Ok(true)
}

fn cmd_validate(file: Option<&Path>) -> Result<bool, Failure> {
    let (schedule, origin) = match file {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::Usage)?;
            let s: BlockSchedule = text
                .parse()
                .map_err(|e| Failure::Usage(anyhow::anyhow!("{}: {e}", path.display())))?;
            (s, path.display().to_string())
        }
        None => (
            BlockSchedule::izhikevich(),
            "built-in izhikevich schedule".to_string(),
        ),
    };
    let violations = schedule
        .validate()
        .map_err(|e| Failure::Usage(anyhow::anyhow!("{origin}: {e}")))?;
    println!("{origin}: {} blocks", schedule.blocks.len());
    for v in &violations {
        println!("violation: {v}");
    }
    println!("{} violations", violations.len());
    Ok(violations.is_empty())
}
