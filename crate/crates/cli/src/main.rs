//! `spinsim`: waveform synthesis, average-Hamiltonian checks, sequence
//! simulation and parameter sweeps driven by a flat config file.

mod config;

use std::f64::consts::TAU;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use spinsim_core::experiment::{
    powder_average, run_detected, sweep_omega1, sweep_retention, write_metadata, RunOptions, SweepParam,
};
use spinsim_core::hamiltonian::{
    average_dipolar_closed, average_dipolar_numeric, static_average_check, RecouplingCondition,
};
use spinsim_core::propagation::{spectrum, write_fid_csv, write_spectrum_csv};
use spinsim_core::sequence::{Detection, SequenceKind};
use spinsim_core::spin::OperatorMatrix;
use spinsim_core::waveform::write_waveform_csv;

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<spinsim_core::Error> for CliError {
    fn from(e: spinsim_core::Error) -> Self {
        match e {
            spinsim_core::Error::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "spinsim", version, about = "Nutating-frame dipolar-order spin dynamics")]
struct Cli {
    /// Worker threads; 0 picks the number of cores. Falls back to SPINSIM_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ParamArg {
    Omega1,
    Retention,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample the ADNF / retention / ARNF waveform to CSV.
    Waveform {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the numeric nutating-frame dipolar average with its closed form.
    Avgham {
        #[arg(long)]
        config: PathBuf,
        /// CSV of matrix entries.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the phase-cycled, powder-averaged sequence.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Recovered magnetization versus omega1 (Hz) or retention time (s).
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        param: Option<ParamArg>,
        /// Comma-separated values; overrides `sweep.values`.
        #[arg(long)]
        values: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn thread_count(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var("SPINSIM_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("SPINSIM_THREADS: expected a thread count, got `{v}`"))),
        Err(_) => Ok(0),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Writes the resolved config and metadata next to an output.
fn echo(cfg: &RunConfig, config_path: &Path, meta_path: &Path, command: &str, extra: &[String]) -> Result<(), CliError> {
    fs::write(config_path, cfg.echo())?;
    let mut lines = vec![format!("spinsim_version={}", env!("CARGO_PKG_VERSION")), format!("command={command}")];
    lines.extend_from_slice(extra);
    lines.extend(cfg.sequence().metadata_lines());
    write_metadata(&lines, meta_path)?;
    Ok(())
}

fn cmd_waveform(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    if cfg.kind != SequenceKind::AdnfArnf {
        return Err(CliError::Config("sequence.kind: waveform synthesis needs adnf_arnf".into()));
    }
    let program = spinsim_core::waveform::synthesize(&cfg.sequence())?;
    let mut w = create(out)?;
    write_waveform_csv(&program, &mut w)?;
    w.flush()?;
    echo(cfg, &with_suffix(out, ".config"), &with_suffix(out, ".meta"), "waveform", &[])?;
    println!(
        "samples={} min_amplitude_rad_per_s={:.6e} max_amplitude_rad_per_s={:.6e} duration_s={:.6e}",
        program.samples.len(),
        program.min_amplitude(),
        program.max_amplitude(),
        program.duration()
    );
    Ok(())
}

fn print_matrix(label: &str, m: &OperatorMatrix<f64>) {
    println!("{label}:");
    for r in 0..m.dim() {
        let row: Vec<String> = (0..m.dim())
            .map(|c| format!("{:+.6e}{:+.6e}i", m[(r, c)].re, m[(r, c)].im))
            .collect();
        println!("  {}", row.join("  "));
    }
}

fn cmd_avgham(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let sys = cfg.system()?;
    if sys.n_spins != 2 || sys.couplings.len() != 1 {
        return Err(CliError::Config(
            "spins.n: avgham needs two spins with coupling.count = 1".into(),
        ));
    }
    let c = &sys.couplings[0];
    let spec = cfg.sequence();
    let (label, numeric, closed) = if spec.static_mode {
        let (lhs, rhs) = static_average_check(c, spec.omega1)?;
        ("static".to_string(), lhs, rhs)
    } else {
        let numeric = average_dipolar_numeric(c, spec.omega1, spec.omega_r, cfg.avgham_periods)?;
        match RecouplingCondition::<f64>::detect(spec.omega1, spec.omega_r) {
            Some(k) => (format!("mas k={k}"), numeric, average_dipolar_closed(c, k)?),
            None => ("mas off-condition".to_string(), numeric, OperatorMatrix::zeros(4)),
        }
    };
    let distance = numeric.distance(&closed);
    let scale = numeric.frobenius_norm().max(closed.frobenius_norm());
    let relative = if scale > 0.0 { distance / scale } else { 0.0 };
    println!("regime={label}");
    print_matrix("numeric", &numeric);
    print_matrix("closed_form", &closed);
    println!("numeric_norm_rad_per_s={:.6e}", numeric.frobenius_norm());
    println!("closed_norm_rad_per_s={:.6e}", closed.frobenius_norm());
    println!("distance_rad_per_s={distance:.6e}");
    println!("relative_distance={relative:.6e}");
    if let Some(out) = out {
        let mut w = create(out)?;
        writeln!(w, "row,col,numeric_re,numeric_im,closed_re,closed_im")?;
        for r in 0..4 {
            for col in 0..4 {
                let (a, b) = (numeric[(r, col)], closed[(r, col)]);
                writeln!(w, "{r},{col},{:.16e},{:.16e},{:.16e},{:.16e}", a.re, a.im, b.re, b.im)?;
            }
        }
        w.flush()?;
        let extra = [format!("regime={label}"), format!("distance_rad_per_s={distance:e}")];
        echo(cfg, &with_suffix(out, ".config"), &with_suffix(out, ".meta"), "avgham", &extra)?;
    }
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let spec = cfg.sequence();
    let sys = cfg.system()?;
    let scheme = cfg.powder_scheme()?;
    fs::create_dir_all(out)?;
    let options = RunOptions::default();
    let result = powder_average(|s, y, o| run_detected(s, y, o, &options), &scheme, &spec, &sys)?;
    let mut w = create(&out.join("trajectory.csv"))?;
    result.trajectory.write_csv(&mut w)?;
    w.flush()?;
    if spec.detect == Detection::Fid {
        let fid = result
            .fid
            .as_ref()
            .ok_or_else(|| CliError::Numeric("FID requested but not recorded".into()))?;
        let mut w = create(&out.join("fid.csv"))?;
        write_fid_csv(fid, spec.fid_dwell, &mut w)?;
        w.flush()?;
        let (freqs, amps) = spectrum(fid, spec.fid_dwell)?;
        let mut w = create(&out.join("spectrum.csv"))?;
        write_spectrum_csv(&freqs, &amps, &mut w)?;
        w.flush()?;
    }
    let m = result.recovered_m;
    let extra = [
        format!("powder_scheme={}", scheme.kind),
        format!("powder_n={}", scheme.len()),
        format!("recovered_m={:e}{:+e}i", m.re, m.im),
    ];
    echo(cfg, &out.join("run.config"), &out.join("run.meta"), "simulate", &extra)?;
    println!(
        "recovered_m={:.6e}{:+.6e}i abs={:.6e} mz={:.6e} x_rotation_rad={:.6e}",
        m.re,
        m.im,
        m.norm(),
        result.magnetization[2],
        result.x_rotation()
    );
    Ok(())
}

fn cmd_sweep(
    mut cfg: RunConfig,
    param: Option<ParamArg>,
    values: Option<&str>,
    out: &Path,
) -> Result<(), CliError> {
    if let Some(p) = param {
        cfg.sweep_param = Some(match p {
            ParamArg::Omega1 => SweepParam::Omega1,
            ParamArg::Retention => SweepParam::Retention,
        });
    }
    if let Some(v) = values {
        cfg.sweep_values = config::parse_values("--values", v)?;
    }
    let Some(param) = cfg.sweep_param else {
        return Err(CliError::Config("sweep.param: no sweep parameter given".into()));
    };
    if cfg.sweep_values.is_empty() {
        return Err(CliError::Config("sweep.values: empty value list".into()));
    }
    let spec = cfg.sequence();
    let sys = cfg.system()?;
    let scheme = cfg.powder_scheme()?;
    let result = match param {
        SweepParam::Omega1 => {
            let w: Vec<f64> = cfg.sweep_values.iter().map(|hz| TAU * hz).collect();
            sweep_omega1(&spec, &sys, &scheme, &w)
        }
        SweepParam::Retention => sweep_retention(&spec, &sys, &scheme, &cfg.sweep_values, cfg.sweep_compensate),
    };
    let mut result = result.map_err(|e| match e {
        spinsim_core::Error::Argument(msg) => CliError::Config(format!("sweep.values: {msg}")),
        other => other.into(),
    })?;
    // report the values exactly as given, not round-tripped through rad/s
    result.values.clone_from(&cfg.sweep_values);
    let mut w = create(out)?;
    result.write_csv(1.0, &mut w)?;
    w.flush()?;
    echo(
        &cfg,
        &with_suffix(out, ".config"),
        &with_suffix(out, ".meta"),
        "sweep",
        &result.metadata_lines()[..3],
    )?;
    println!("sweep_param={param} points={}", result.values.len());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = thread_count(cli.threads)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Numeric(format!("thread pool: {e}")))?;
    match cli.command {
        Command::Waveform { config, out } => cmd_waveform(&RunConfig::load(&config)?, &out),
        Command::Avgham { config, out } => cmd_avgham(&RunConfig::load(&config)?, out.as_deref()),
        Command::Simulate { config, out } => cmd_simulate(&RunConfig::load(&config)?, &out),
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => cmd_sweep(RunConfig::load(&config)?, param, values.as_deref(), &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spinsim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
