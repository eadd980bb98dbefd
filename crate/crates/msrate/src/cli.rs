//! Batch front-end: subcommand implementations, CSV emitters, and the
//! run manifest.
//!
//! Exit codes: 0 success, 1 domain failure (degenerate system, no
//! converged stage, oracle breakdown), 2 usage or parse error.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::certify::{self, BoundsCertificate};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{self, SystemSpec};
use crate::rnvi::{self, RnviConfig};
use crate::simulate::{self, SimConfig};

#[derive(Parser, Debug)]
#[command(
    name = "msrate",
    version,
    about = "Certified two-sided bounds on the optimal mean-square stabilizing rate"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Continuation parameters shared by every solver-backed subcommand.
#[derive(Args, Debug, Clone)]
pub struct RnviArgs {
    /// First (largest) regularization weight of the continuation.
    #[arg(long, default_value_t = 0.5)]
    pub tau_start: f64,
    /// Last (smallest) regularization weight.
    #[arg(long, default_value_t = 1e-5)]
    pub tau_end: f64,
    /// Number of geometric grid points.
    #[arg(long, default_value_t = 40)]
    pub tau_count: usize,
    /// Inner fixed-point tolerance.
    #[arg(long, default_value_t = 1e-12)]
    pub epsilon: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Override the noise level per value.
    Sigma,
    /// Scale the drift matrix `A` per value.
    Theta,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate a config and report the nondegeneracy check.
    Check { config: PathBuf },
    /// Run the continuation and write the bounds certificate.
    Bounds {
        config: PathBuf,
        #[command(flatten)]
        rnvi: RnviArgs,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Re-run the certificate across a sigma or theta grid.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: SweepMode,
        /// Explicit comma-separated grid values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
        /// Uniform grid alternative: smallest value.
        #[arg(long, requires_all = ["value_max", "value_count"])]
        value_min: Option<f64>,
        /// Uniform grid alternative: largest value.
        #[arg(long)]
        value_max: Option<f64>,
        /// Uniform grid alternative: number of points.
        #[arg(long)]
        value_count: Option<usize>,
        #[command(flatten)]
        rnvi: RnviArgs,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Simulate the closed loop under a gain: exact moments + Monte Carlo.
    Simulate {
        config: PathBuf,
        /// CSV file holding the gain matrix (one row per input).
        #[arg(long, conflicts_with = "gain_from_bounds")]
        gain: Option<PathBuf>,
        /// Compute the gain from a fresh bounds run instead.
        #[arg(long)]
        gain_from_bounds: bool,
        /// Initial state, comma-separated.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        x0: Vec<f64>,
        #[arg(long, default_value_t = 60)]
        horizon: usize,
        #[arg(long, default_value_t = 10_000)]
        num_traj: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// First step of the slope-fit window.
        #[arg(long, default_value_t = 10)]
        fit_start: usize,
        /// One past the last step of the slope-fit window.
        #[arg(long, default_value_t = 60)]
        fit_end: usize,
        #[command(flatten)]
        rnvi: RnviArgs,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Print the exact closed-loop mean-square rate for a given gain.
    Rate {
        config: PathBuf,
        #[arg(long)]
        gain: PathBuf,
    },
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    parameters: serde_json::Value,
    config_sha256: String,
    outputs: Vec<String>,
    wall_time_seconds: f64,
}

/// Dispatch a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Check { config } => cmd_check(&config),
        Command::Bounds {
            config,
            rnvi,
            out_dir,
        } => cmd_bounds(&config, &rnvi, &out_dir),
        Command::Sweep {
            config,
            mode,
            values,
            value_min,
            value_max,
            value_count,
            rnvi,
            out_dir,
        } => {
            let grid = resolve_grid(values, value_min, value_max, value_count);
            grid.and_then(|g| cmd_sweep(&config, mode, &g, &rnvi, &out_dir))
        }
        Command::Simulate {
            config,
            gain,
            gain_from_bounds,
            x0,
            horizon,
            num_traj,
            seed,
            fit_start,
            fit_end,
            rnvi,
            out_dir,
        } => cmd_simulate(
            &config,
            gain.as_deref(),
            gain_from_bounds,
            &x0,
            horizon,
            num_traj,
            seed,
            (fit_start, fit_end),
            &rnvi,
            &out_dir,
        ),
        Command::Rate { config, gain } => cmd_rate(&config, &gain),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::ParseError(_)
        | Error::ConfigError(_)
        | Error::DimensionMismatch(_)
        | Error::InvalidSigma(_)
        | Error::Io(_) => 2,
        _ => 1,
    }
}

/// 17 significant digits; round-trip exact for 64-bit floats.
fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write via a sibling temp file and rename, so readers never observe
/// a partial file.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn config_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

fn write_manifest(
    out_dir: &Path,
    command: &str,
    parameters: serde_json::Value,
    config_path: &Path,
    outputs: &[String],
    started: Instant,
) -> Result<()> {
    let manifest = RunManifest {
        command: command.to_string(),
        parameters,
        config_sha256: config_sha256(config_path)?,
        outputs: outputs.to_vec(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialization");
    write_atomic(&out_dir.join("manifest.json"), &text)
}

fn rnvi_config(args: &RnviArgs) -> Result<RnviConfig> {
    let grid = rnvi::default_tau_grid(args.tau_start, args.tau_end, args.tau_count)?;
    let mut cfg = RnviConfig::new(grid)?;
    cfg.epsilon = args.epsilon;
    Ok(cfg)
}

fn rnvi_params_json(args: &RnviArgs) -> serde_json::Value {
    serde_json::json!({
        "tau_start": args.tau_start,
        "tau_end": args.tau_end,
        "tau_count": args.tau_count,
        "epsilon": args.epsilon,
    })
}

fn certificate_for(spec: &SystemSpec, args: &RnviArgs) -> Result<BoundsCertificate> {
    let cfg = rnvi_config(args)?;
    let result = rnvi::run_continuation(spec, &cfg)?;
    certify::aggregate(spec, &result)
}

fn per_tau_csv(cert: &BoundsCertificate) -> String {
    let mut out =
        String::from("tau,J_low,J_up,rho_low,rho_up,Delta,lambda_max_Pinv,inner_iters,converged\n");
    for d in &cert.per_tau {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt(d.tau),
            fmt(d.j_low),
            fmt(d.j_up),
            fmt((d.j_low / 2.0).exp()),
            fmt((d.j_up / 2.0).exp()),
            fmt(d.delta),
            fmt(d.lambda_max_p_inv),
            d.inner_iters,
            d.converged
        ));
    }
    out
}

fn certificate_csv(cert: &BoundsCertificate) -> String {
    format!(
        "J_low,J_up,rho_low,rho_up,tau_low,tau_up\n{},{},{},{},{},{}\n",
        fmt(cert.j_low_best),
        fmt(cert.j_up_best),
        fmt(cert.rho_low),
        fmt(cert.rho_up),
        fmt(cert.tau_low),
        fmt(cert.tau_up)
    )
}

fn gain_csv(k: &Matrix) -> String {
    let mut out = (0..k.cols())
        .map(|j| format!("k{j}"))
        .collect::<Vec<_>>()
        .join(",");
    out.push('\n');
    for i in 0..k.rows() {
        let row = (0..k.cols())
            .map(|j| fmt(k.get(i, j)))
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&row);
        out.push('\n');
    }
    out
}

/// Parse a gain written by [`gain_csv`]: a header line, then one CSV
/// row of floats per input channel.
pub fn parse_gain_csv(text: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => rows.push(row),
            // the single header line
            Err(_) if rows.is_empty() => continue,
            Err(e) => return Err(Error::ParseError(format!("gain csv: {e}"))),
        }
    }
    if rows.is_empty() {
        return Err(Error::ParseError("gain csv holds no numeric rows".into()));
    }
    Matrix::from_rows(&rows)
}

fn load_gain(path: &Path) -> Result<Matrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::ParseError(format!("{}: {e}", path.display())))?;
    parse_gain_csv(&text)
}

fn energy_csv(energies: &[f64]) -> String {
    let mut out = String::from("k,energy\n");
    for (k, e) in energies.iter().enumerate() {
        out.push_str(&format!("{k},{}\n", fmt(*e)));
    }
    out
}

pub fn cmd_check(config_path: &Path) -> Result<i32> {
    let spec = model::load_spec(config_path)?;
    let report = model::validate(&spec);
    println!("n = {}, m = {}, sigma = {}", spec.n, spec.m, spec.sigma);
    println!(
        "stacked input rank: {} of {} ({})",
        report.stacked_rank,
        spec.m,
        if report.nondegenerate {
            "nondegenerate"
        } else {
            "DEGENERATE"
        }
    );
    println!("C_A = {:.6e}", report.c_a);
    println!("lambda_min(R_0) = {:.6e}", report.r0_min_eig);
    Ok(if report.nondegenerate { 0 } else { 1 })
}

pub fn cmd_bounds(config_path: &Path, args: &RnviArgs, out_dir: &Path) -> Result<i32> {
    let started = Instant::now();
    let spec = model::load_spec(config_path)?;
    if !model::validate(&spec).nondegenerate {
        return Err(Error::Degenerate);
    }
    let cert = certificate_for(&spec, args)?;

    std::fs::create_dir_all(out_dir)?;
    write_atomic(&out_dir.join("per_tau.csv"), &per_tau_csv(&cert))?;
    write_atomic(&out_dir.join("certificate.csv"), &certificate_csv(&cert))?;
    write_atomic(&out_dir.join("gain.csv"), &gain_csv(&cert.k_up))?;
    let outputs = vec![
        "per_tau.csv".into(),
        "certificate.csv".into(),
        "gain.csv".into(),
    ];
    write_manifest(
        out_dir,
        "bounds",
        serde_json::json!({
            "config": config_path.display().to_string(),
            "rnvi": rnvi_params_json(args),
            "out_dir": out_dir.display().to_string(),
        }),
        config_path,
        &outputs,
        started,
    )?;

    println!(
        "J* in [{:.4}, {:.4}]   rho* in [{:.4}, {:.4}]",
        cert.j_low_best, cert.j_up_best, cert.rho_low, cert.rho_up
    );
    println!(
        "best stages: tau_low = {:.3e}, tau_up = {:.3e}",
        cert.tau_low, cert.tau_up
    );
    Ok(0)
}

fn resolve_grid(
    values: Vec<f64>,
    value_min: Option<f64>,
    value_max: Option<f64>,
    value_count: Option<usize>,
) -> Result<Vec<f64>> {
    if !values.is_empty() {
        if value_min.is_some() {
            return Err(Error::ConfigError(
                "give either --values or --value-min/--value-max/--value-count".into(),
            ));
        }
        return Ok(values);
    }
    match (value_min, value_max, value_count) {
        (Some(lo), Some(hi), Some(count)) => {
            if count < 2 || !(hi > lo) {
                return Err(Error::ConfigError(
                    "uniform grid needs value_min < value_max and at least 2 points".into(),
                ));
            }
            let step = (hi - lo) / (count - 1) as f64;
            Ok((0..count).map(|i| lo + step * i as f64).collect())
        }
        _ => Err(Error::ConfigError("sweep values list is empty".into())),
    }
}

fn apply_sweep_value(spec: &SystemSpec, mode: SweepMode, value: f64) -> Result<SystemSpec> {
    match mode {
        SweepMode::Sigma => spec.with_sigma(value),
        SweepMode::Theta => {
            if !(value > 0.0) {
                return Err(Error::ConfigError(format!(
                    "theta must be positive, got {value}"
                )));
            }
            Ok(spec.scale_a(value))
        }
    }
}

fn sequential_requested() -> bool {
    matches!(
        std::env::var("MSRATE_THREADS").map(|v| v.parse::<usize>()),
        Ok(Ok(0))
    )
}

fn sweep_certificates(
    spec: &SystemSpec,
    mode: SweepMode,
    values: &[f64],
    args: &RnviArgs,
) -> Vec<Result<BoundsCertificate>> {
    let one = |v: &f64| apply_sweep_value(spec, mode, *v).and_then(|s| certificate_for(&s, args));
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if !sequential_requested() {
            return values.par_iter().map(one).collect();
        }
    }
    values.iter().map(one).collect()
}

pub fn cmd_sweep(
    config_path: &Path,
    mode: SweepMode,
    values: &[f64],
    args: &RnviArgs,
    out_dir: &Path,
) -> Result<i32> {
    let started = Instant::now();
    if values.is_empty() {
        return Err(Error::ConfigError("sweep values list is empty".into()));
    }
    let spec = model::load_spec(config_path)?;
    let results = sweep_certificates(&spec, mode, values, args);

    std::fs::create_dir_all(out_dir)?;
    let mode_name = match mode {
        SweepMode::Sigma => "sigma",
        SweepMode::Theta => "theta",
    };
    let mut sweep = String::from("value,rho_low,rho_up,J_low,J_up,width,status\n");
    let mut outputs = Vec::new();
    for (i, (value, result)) in values.iter().zip(&results).enumerate() {
        match result {
            Ok(cert) => {
                sweep.push_str(&format!(
                    "{},{},{},{},{},{},ok\n",
                    fmt(*value),
                    fmt(cert.rho_low),
                    fmt(cert.rho_up),
                    fmt(cert.j_low_best),
                    fmt(cert.j_up_best),
                    fmt(cert.rho_up - cert.rho_low)
                ));
                let name = format!("per_tau_{mode_name}_{i:03}.csv");
                write_atomic(&out_dir.join(&name), &per_tau_csv(cert))?;
                outputs.push(name);
                println!(
                    "{mode_name} = {value:.4}: rho* in [{:.4}, {:.4}]",
                    cert.rho_low, cert.rho_up
                );
            }
            Err(e) => {
                let status = e.to_string().replace(',', ";");
                sweep.push_str(&format!(
                    "{},nan,nan,nan,nan,nan,{status}\n",
                    fmt(*value)
                ));
                println!("{mode_name} = {value:.4}: failed ({e})");
            }
        }
    }
    write_atomic(&out_dir.join("sweep.csv"), &sweep)?;
    outputs.push("sweep.csv".into());
    write_manifest(
        out_dir,
        "sweep",
        serde_json::json!({
            "config": config_path.display().to_string(),
            "mode": mode_name,
            "values": values,
            "rnvi": rnvi_params_json(args),
            "out_dir": out_dir.display().to_string(),
        }),
        config_path,
        &outputs,
        started,
    )?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_simulate(
    config_path: &Path,
    gain_path: Option<&Path>,
    gain_from_bounds: bool,
    x0: &[f64],
    horizon: usize,
    num_traj: usize,
    seed: u64,
    fit_window: (usize, usize),
    args: &RnviArgs,
    out_dir: &Path,
) -> Result<i32> {
    let started = Instant::now();
    let spec = model::load_spec(config_path)?;
    if x0.len() != spec.n {
        return Err(Error::ConfigError(format!(
            "x0 has {} entries but the system has dimension {}",
            x0.len(),
            spec.n
        )));
    }
    if horizon < 1 || num_traj < 1 {
        return Err(Error::ConfigError(
            "horizon and num_traj must be at least 1".into(),
        ));
    }
    let k = match (gain_path, gain_from_bounds) {
        (Some(path), false) => load_gain(path)?,
        (None, true) => certificate_for(&spec, args)?.k_up,
        _ => {
            return Err(Error::ConfigError(
                "give exactly one of --gain or --gain-from-bounds".into(),
            ))
        }
    };
    if k.rows() != spec.m || k.cols() != spec.n {
        return Err(Error::DimensionMismatch(format!(
            "gain must be {}x{}, got {}x{}",
            spec.m,
            spec.n,
            k.rows(),
            k.cols()
        )));
    }
    let window = (fit_window.0, fit_window.1.min(horizon + 1));
    if window.0 + 2 > window.1 {
        return Err(Error::ConfigError(format!(
            "fit window [{}, {}) is too short for the horizon",
            fit_window.0, fit_window.1
        )));
    }

    let exact = simulate::propagate_exact(&spec, &k, x0, horizon);
    let cfg = SimConfig {
        x0: x0.to_vec(),
        k: k.clone(),
        horizon,
        num_traj,
        seed,
        fit_window: window,
    };
    let mc = if sequential_requested() {
        simulate::monte_carlo_sequential(&spec, &cfg)
    } else {
        simulate::monte_carlo(&spec, &cfg)
    };

    let rho = certify::closed_loop_rate(&spec, &k)?;
    let reference = 2.0 * rho.ln();
    let mut slopes = String::from("source,slope,stderr,reference\n");
    for (name, traj) in [("exact", &exact), ("mc", &mc)] {
        let end = window.1.min(traj.energies.len());
        let (slope, stderr) = simulate::fit_slope(traj, (window.0, end))?;
        slopes.push_str(&format!(
            "{name},{},{},{}\n",
            fmt(slope),
            fmt(stderr),
            fmt(reference)
        ));
        println!(
            "{name}: slope = {slope:.6} per step (reference 2 log rho = {reference:.6})"
        );
    }
    if exact.diverged || mc.diverged {
        println!("warning: energies overflowed; trajectories truncated");
    }

    std::fs::create_dir_all(out_dir)?;
    write_atomic(&out_dir.join("energy_exact.csv"), &energy_csv(&exact.energies))?;
    write_atomic(&out_dir.join("energy_mc.csv"), &energy_csv(&mc.energies))?;
    write_atomic(&out_dir.join("slopes.csv"), &slopes)?;
    let outputs = vec![
        "energy_exact.csv".into(),
        "energy_mc.csv".into(),
        "slopes.csv".into(),
    ];
    write_manifest(
        out_dir,
        "simulate",
        serde_json::json!({
            "config": config_path.display().to_string(),
            "gain": gain_path.map(|p| p.display().to_string()),
            "gain_from_bounds": gain_from_bounds,
            "x0": x0,
            "horizon": horizon,
            "num_traj": num_traj,
            "seed": seed,
            "fit_window": [window.0, window.1],
            "rnvi": rnvi_params_json(args),
            "out_dir": out_dir.display().to_string(),
        }),
        config_path,
        &outputs,
        started,
    )?;
    Ok(0)
}

pub fn cmd_rate(config_path: &Path, gain_path: &Path) -> Result<i32> {
    let spec = model::load_spec(config_path)?;
    let k = load_gain(gain_path)?;
    if k.rows() != spec.m || k.cols() != spec.n {
        return Err(Error::DimensionMismatch(format!(
            "gain must be {}x{}, got {}x{}",
            spec.m,
            spec.n,
            k.rows(),
            k.cols()
        )));
    }
    let rho = certify::closed_loop_rate(&spec, &k)?;
    println!("rho(K) = {rho:.10}");
    println!("2 log rho(K) = {:.10}", 2.0 * rho.ln());
    println!(
        "verdict: {}",
        if rho < 1.0 {
            "mean-square stable (rho < 1)"
        } else {
            "NOT mean-square stable (rho >= 1)"
        }
    );
    Ok(0)
}
