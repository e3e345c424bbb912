//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage, 3 configuration, 4 I/O, 5 simulation.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{dump_config, load_config, ConfigError, EnvSelection, ScenarioConfig};
use crate::kinematics::{calibrate_single_reference, ArmTarget};
use crate::mission::{run_trials, run_trials_traced, ExecMode, MissionError, TrialJob};
use crate::report::{render_report, write_trace_csv, write_trials_csv, ResultsFile};

#[derive(Debug, Parser)]
#[command(
    name = "irrigation",
    version,
    about = "Seeded simulator for a leveling irrigation robot"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run seeded trials and write results.json and trials.csv.
    Run(RunArgs),
    /// Fit the camera-to-arm offset from one pixel/arm correspondence.
    CalibrateArm(CalibrateArgs),
    /// Find the ultimate gain of the configured plant and print PID gains.
    Tune(TuneArgs),
    /// Print the tables stored in a results.json.
    Replay { results: PathBuf },
    /// Print the scenario with every default filled in.
    DumpConfig {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Environment name, comma-separated names, or "all".
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Also write trace.csv with every phase change.
    #[arg(long)]
    trace: bool,
    /// Run trials on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// Observed pixel column of the reference point.
    u: f64,
    /// Observed pixel row of the reference point.
    v: f64,
    /// Reference point in the arm frame, mm.
    x: f64,
    y: f64,
    z: f64,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TuneArgs {
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Sim(#[from] MissionError),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Config(ConfigError::Io { .. }) | CliError::Io(_) => 4,
            CliError::Config(_) => 3,
            CliError::Sim(_) => 5,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn scenario(path: Option<&Path>) -> Result<ScenarioConfig, CliError> {
    Ok(match path {
        Some(p) => load_config(p)?,
        None => ScenarioConfig::default(),
    })
}

fn write_file(path: &Path, f: impl FnOnce(&mut fs::File) -> Result<(), String>) -> Result<(), CliError> {
    let mut file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    f(&mut file).map_err(|e| io_err(path, e))?;
    file.flush().map_err(|e| io_err(path, e))
}

fn run(args: RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = scenario(args.config.as_deref())?;
    if let Some(env) = &args.env {
        cfg.environment = EnvSelection::parse(env);
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let envs = cfg.resolve_environments()?;
    let gains = cfg.robot.leveling.resolve_gains().map_err(MissionError::from)?;
    let jobs: Vec<TrialJob> = envs
        .iter()
        .flat_map(|e| {
            (0..cfg.trials).map(move |i| TrialJob {
                environment: e.clone(),
                trial: i,
                seed: cfg.seed.wrapping_add(i as u64),
            })
        })
        .collect();
    let mode = if args.sequential {
        ExecMode::Sequential
    } else {
        ExecMode::Parallel
    };
    fs::create_dir_all(&args.out_dir).map_err(|e| io_err(&args.out_dir, e))?;
    let trials = if args.trace {
        let runs = run_trials_traced(&jobs, &cfg.robot, gains, mode)?;
        let path = args.out_dir.join("trace.csv");
        let refs: Vec<_> = runs.iter().map(|(r, t)| (r, t.as_slice())).collect();
        write_file(&path, |f| write_trace_csv(&refs, f).map_err(|e| e.to_string()))?;
        runs.into_iter().map(|(r, _)| r).collect()
    } else {
        run_trials(&jobs, &cfg.robot, gains, mode)?
    };
    let results = ResultsFile::new(cfg, gains, trials);
    let json_path = args.out_dir.join("results.json");
    let json = results.to_json().map_err(|e| io_err(&json_path, e))?;
    write_file(&json_path, |f| f.write_all(json.as_bytes()).map_err(|e| e.to_string()))?;
    let csv_path = args.out_dir.join("trials.csv");
    write_file(&csv_path, |f| {
        write_trials_csv(&results.trials, f).map_err(|e| e.to_string())
    })?;
    write!(out, "{}", render_report(&results)).map_err(|e| CliError::Io(e.to_string()))
}

fn calibrate(args: CalibrateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = scenario(args.config.as_deref())?;
    let nominal = cfg.robot.arm.calibration;
    let target = ArmTarget::new(args.x, args.y, args.z);
    let cal = calibrate_single_reference((args.u, args.v), &target, nominal.scale, nominal.u0, nominal.v0)
        .map_err(MissionError::from)?;
    let mut table = toml::Table::new();
    let body = toml::Table::try_from(cal).map_err(|e| CliError::Io(e.to_string()))?;
    table.insert("calibration".into(), toml::Value::Table(body));
    let text = toml::to_string_pretty(&table).map_err(|e| CliError::Io(e.to_string()))?;
    let text = text.replacen("[calibration]", "[robot.arm.calibration]", 1);
    write!(out, "{text}").map_err(|e| CliError::Io(e.to_string()))
}

fn tune(args: TuneArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = scenario(args.config.as_deref())?;
    let (ug, g) = cfg.robot.leveling.tune().map_err(MissionError::from)?;
    writeln!(
        out,
        "Ku = {:.4}\nTu = {:.4} s\nKp = {:.4}\nKi = {:.4}\nKd = {:.4}",
        ug.ku, ug.tu, g.kp, g.ki, g.kd
    )
    .map_err(|e| CliError::Io(e.to_string()))
}

fn replay(path: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let results = ResultsFile::from_json(&text).map_err(|e| CliError::Config(ConfigError::Parse(e.to_string())))?;
    write!(out, "{}", render_report(&results)).map_err(|e| CliError::Io(e.to_string()))
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = if code == 0 {
                write!(out, "{}", e.render())
            } else {
                write!(err, "{}", e.render())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(a, out),
        Command::CalibrateArm(a) => calibrate(a, out),
        Command::Tune(a) => tune(a, out),
        Command::Replay { results } => replay(&results, out),
        Command::DumpConfig { config } => scenario(config.as_deref())
            .and_then(|c| dump_config(&c).map_err(CliError::from))
            .and_then(|s| write!(out, "{s}").map_err(|e| CliError::Io(e.to_string()))),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code()
        }
    }
}
