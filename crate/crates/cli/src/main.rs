//! `ionsim`: run pulse-sequence files, fit data files and regenerate the
//! reference figures.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ionsim_core::analysis::{
    fit_contrast_decay, fit_exponential_decay, fit_fringe, fit_line_center, fit_linear, fit_sine_drift, Series,
};
use ionsim_core::config::RunConfig;
use ionsim_core::figures::{run_figure, FIGURES};
use ionsim_core::output::{format_scan, read_scan, Manifest};
use ionsim_core::pulse::{run_scan, Observable, ScanAxis};
use ionsim_core::seqlang::{parse_str, validate, SeqError};
use ionsim_core::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "ionsim", version, about = "Trapped-ion optical qubit simulator")]
struct Cli {
    /// Master random seed (defaults to run.seed of the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Shots per scan point, overriding sequence and preset values.
    #[arg(long, global = true)]
    shots: Option<usize>,
    /// Output directory (run, figure) or report file (fit).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; falls back to IONSIM_WORKERS, then to all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Configuration file (TOML); the built-in reference configuration otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every experiment of a sequence file.
    Run { sequence: PathBuf },
    /// Fit a data file.
    Fit {
        data: PathBuf,
        #[arg(long, value_enum)]
        model: Model,
        /// Probe pulse length in μs (line model).
        #[arg(long, default_value_t = 1000.0)]
        pulse_time: f64,
        /// Fit 1 − p (line model), for spectra that are bright on resonance.
        #[arg(long)]
        inverted: bool,
        /// Transition susceptibility in kHz/mGauss (sine50 model).
        #[arg(long, default_value_t = 2.8)]
        susceptibility: f64,
    },
    /// Regenerate a reference figure: data, fits and a comparison line.
    Figure { name: String },
    /// Parse and check a sequence file without running it.
    Validate { sequence: PathBuf },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Model {
    /// Rabi lineshape: centre and width of a spectrum.
    Line,
    /// Sinusoidal Ramsey fringe: contrast and period.
    Fringe,
    /// Gaussian and exponential contrast decay, with the preferred model.
    GaussianVsExponential,
    /// Exponential survival: lifetime in ms.
    Lifetime,
    /// Straight line, e.g. phonon number versus delay.
    Linear,
    /// 50 Hz sine through line centres versus trigger delay.
    Sine50,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(m: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: m.into() }
    }

    fn invalid(m: impl Into<String>) -> Self {
        Self { code: EXIT_INVALID, message: m.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Seq(_) | Error::Config(_) | Error::Data(_) => EXIT_INVALID,
            _ => EXIT_RUNTIME,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self { code: EXIT_RUNTIME, message: e.to_string() }
    }
}

fn seq_failure(path: &Path, e: SeqError) -> Failure {
    Failure::invalid(format!("{}:{e}", path.display()))
}

fn workers(cli: &Cli) -> Result<Option<usize>, Failure> {
    let n = match (cli.workers, std::env::var("IONSIM_WORKERS")) {
        (Some(n), _) => Some(n),
        (None, Ok(v)) => Some(v.trim().parse::<usize>().map_err(|_| Failure::usage(format!("IONSIM_WORKERS must be a positive integer, got '{v}'")))?),
        (None, Err(_)) => None,
    };
    if n == Some(0) {
        return Err(Failure::usage("the worker count must be > 0"));
    }
    Ok(n)
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    match &cli.config {
        Some(p) => Ok(RunConfig::load(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn write(path: &Path, contents: &str, manifest: &mut Manifest, root: &Path) -> Result<(), Failure> {
    fs::write(path, contents)?;
    let rel = path.strip_prefix(root).unwrap_or(path).to_string_lossy().replace('\\', "/");
    manifest.add_file(&rel, contents.as_bytes());
    Ok(())
}

fn cmd_run(cli: &Cli, path: &Path) -> Result<(), Failure> {
    let rc = load_config(cli)?;
    let cfg = rc.sim();
    let source = fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    let program = parse_str(&source).map_err(|e| seq_failure(path, e))?;
    let compiled = validate(&program, &cfg).map_err(|e| seq_failure(path, e))?;
    for c in &compiled {
        for w in &c.warnings {
            eprintln!("{}:{}:{}: warning: {}", path.display(), w.line, w.col, w.message);
        }
    }
    let seed = cli.seed.unwrap_or(rc.run.seed);
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(&rc.run.out_dir));
    fs::create_dir_all(&out)?;
    let mut manifest = Manifest::new(format!("run {}", path.display()), seed, cli.shots, &rc.to_toml()).with_sequence(&source);
    for (i, c) in compiled.iter().enumerate() {
        let shots = cli.shots.or(c.shots).unwrap_or(rc.run.shots);
        // every block gets its own stream family
        let block_seed = ionsim_core::noise::derive_seed(seed, i as u64);
        let result = run_scan(&c.sequence, &c.scan, shots, &cfg, block_seed)?;
        let mut meta = BTreeMap::new();
        meta.insert("experiment".to_string(), c.name.clone());
        if let Some(k) = c.kind {
            meta.insert("kind".to_string(), k.name().to_string());
        }
        meta.insert("seed".to_string(), seed.to_string());
        meta.insert("shots".to_string(), shots.to_string());
        let text = format_scan(&result, &meta)?;
        write(&out.join(format!("{}.csv", c.name)), &text, &mut manifest, &out)?;
        println!("{}: {} points written to {}", c.name, result.points.len(), out.join(format!("{}.csv", c.name)).display());
    }
    fs::write(out.join("manifest.json"), manifest.to_json())?;
    Ok(())
}

fn ms_axis(s: &mut Series, axis: ScanAxis) {
    if axis.unit() == "us" {
        s.x.iter_mut().for_each(|x| *x *= 1e-3);
    }
}

fn require(ok: bool, model: &str, what: &str) -> Result<(), Failure> {
    if ok {
        Ok(())
    } else {
        Err(Failure::invalid(format!("model '{model}' needs {what}")))
    }
}

fn cmd_fit(cli: &Cli, data: &Path, model: Model, pulse_time: f64, inverted: bool, susceptibility: f64) -> Result<(), Failure> {
    let file = read_scan(data)?;
    let r = &file.result;
    let name = model.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    let mut s = Series::from_scan(r);
    let (reports, preferred) = match model {
        Model::Line => {
            require(r.axis == ScanAxis::Detuning && r.observable == Observable::DarkProbability, &name, "a detuning scan of dark probabilities")?;
            if inverted {
                s.y.iter_mut().for_each(|y| *y = 1.0 - *y);
            }
            (vec![fit_line_center(&s, pulse_time)?], None)
        }
        Model::Fringe => {
            require(r.observable == Observable::DarkProbability, &name, "dark probabilities")?;
            (vec![fit_fringe(&s)?], None)
        }
        Model::GaussianVsExponential => {
            require(r.observable == Observable::Contrast, &name, "contrast data")?;
            ms_axis(&mut s, r.axis);
            let f = fit_contrast_decay(&s)?;
            (vec![f.gaussian, f.exponential], Some(f.preferred))
        }
        Model::Lifetime => {
            require(r.axis == ScanAxis::Wait && r.observable == Observable::DarkProbability, &name, "a wait scan of dark probabilities")?;
            ms_axis(&mut s, r.axis);
            (vec![fit_exponential_decay(&s)?], None)
        }
        Model::Linear => {
            ms_axis(&mut s, r.axis);
            (vec![fit_linear(&s)?], None)
        }
        Model::Sine50 => {
            require(r.axis == ScanAxis::Delay && r.observable == Observable::LineCenter, &name, "line centres versus trigger delay")?;
            s.y.iter_mut().for_each(|y| *y *= 1e-3);
            if let Some(sig) = s.sigma.as_mut() {
                sig.iter_mut().for_each(|v| *v *= 1e-3);
            }
            if !(susceptibility > 0.0) {
                return Err(Failure::usage("--susceptibility must be > 0"));
            }
            (vec![fit_sine_drift(&s, susceptibility)?], None)
        }
    };
    let mut text = String::new();
    for rep in &reports {
        text.push_str(&rep.to_string());
        text.push('\n');
    }
    if let Some(p) = &preferred {
        text.push_str(&format!("preferred model: {p}\n\n"));
    }
    let machine = serde_json::json!({ "model": name, "preferred": preferred, "fits": reports });
    text.push_str("--- json ---\n");
    text.push_str(&serde_json::to_string_pretty(&machine).expect("fit reports serialise"));
    text.push('\n');
    match &cli.out {
        Some(p) => fs::write(p, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_figure(cli: &Cli, name: &str) -> Result<(), Failure> {
    if !FIGURES.contains(&name) {
        return Err(Failure::usage(format!("unknown figure '{name}'; available: {}", FIGURES.join(", "))));
    }
    let rc = load_config(cli)?;
    let seed = cli.seed.unwrap_or(rc.run.seed);
    let report = run_figure(name, &rc.sim(), cli.shots, seed)?;
    let out = cli.out.clone().unwrap_or_else(|| Path::new(&rc.run.out_dir).join(name));
    fs::create_dir_all(&out)?;
    let mut manifest = Manifest::new(format!("figure {name}"), seed, cli.shots, &rc.to_toml());
    for d in &report.datasets {
        let mut meta = BTreeMap::new();
        meta.insert("figure".to_string(), name.to_string());
        meta.insert("dataset".to_string(), d.name.clone());
        meta.insert("seed".to_string(), seed.to_string());
        write(&out.join(format!("{}.csv", d.name)), &format_scan(&d.result, &meta)?, &mut manifest, &out)?;
    }
    let fits = serde_json::to_string_pretty(&report.fits).expect("fit reports serialise") + "\n";
    write(&out.join("fits.json"), &fits, &mut manifest, &out)?;
    let summary: String = report.comparisons.iter().map(|l| format!("{l}\n")).collect();
    write(&out.join("summary.txt"), &summary, &mut manifest, &out)?;
    fs::write(out.join("manifest.json"), manifest.to_json())?;
    print!("{summary}");
    Ok(())
}

fn cmd_validate(cli: &Cli, path: &Path) -> Result<(), Failure> {
    let cfg = load_config(cli)?.sim();
    let source = fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    let program = parse_str(&source).map_err(|e| seq_failure(path, e))?;
    let compiled = validate(&program, &cfg).map_err(|e| seq_failure(path, e))?;
    for c in &compiled {
        for w in &c.warnings {
            eprintln!("{}:{}:{}: warning: {}", path.display(), w.line, w.col, w.message);
        }
        let kind = c.kind.map_or(String::new(), |k| format!(" ({k})"));
        println!("{}{kind}: {} points on axis {}", c.name, c.scan.values.len(), c.scan.axis.name());
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = workers(cli)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure { code: EXIT_RUNTIME, message: e.to_string() })?;
    }
    match &cli.command {
        Command::Run { sequence } => cmd_run(cli, sequence),
        Command::Fit { data, model, pulse_time, inverted, susceptibility } => {
            cmd_fit(cli, data, *model, *pulse_time, *inverted, *susceptibility)
        }
        Command::Figure { name } => cmd_figure(cli, name),
        Command::Validate { sequence } => cmd_validate(cli, sequence),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
