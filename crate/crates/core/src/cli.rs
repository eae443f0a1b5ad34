//! Command-line front end.
//!
//! Exit codes: 0 success, 1 tolerance or convergence failure, 2 usage or
//! configuration error.

use crate::analytic::{q_grid, sweep, solve_fixed_point, ModelParams, UplinkMode};
use crate::config::{Config, ConfigError};
use crate::output::fmt_num;
use crate::sim::markov::{run_saturated, SaturatedConfig};
use crate::sim::{self, RunMetrics};
use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const ANALYTIC_HEADER: &str = "q,p_tx_wifi,p_tx_cat4,access_sul,access_gul,p_b,converged";
pub const VALIDATE_HEADER: &str = "class,nodes,simulated,analytic,rel_error,within_tolerance";

#[derive(Debug, Parser)]
#[command(name = "coexsim", version, about = "LBT coexistence: analytic sweeps, simulation, validation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML config file; defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Seed for simulate and validate.
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Dotted-key override, e.g. scenario.mcot_ms=4. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep the access model over q and print the CSV table.
    Analytic {
        #[command(flatten)]
        common: Common,
        /// Grid as START:STOP:STEP (inclusive).
        #[arg(long, value_name = "START:STOP:STEP")]
        q_grid: Option<String>,
    },
    /// Run one scenario; CSV metrics plus a JSON summary.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// JSON summary path; defaults to the CSV path with a .json extension.
        #[arg(long, value_name = "PATH")]
        summary: Option<PathBuf>,
    },
    /// Compare saturated-network attempt rates with the fixed point.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Relative error bound per class.
        #[arg(long, value_name = "FLOAT")]
        tolerance: Option<f64>,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Check(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

/// Parse `args` (program name first) and run. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Analytic { common, q_grid } => cmd_analytic(&common, q_grid.as_deref()),
        Command::Simulate { common, summary } => cmd_simulate(&common, summary.as_deref()),
        Command::Validate { common, tolerance } => cmd_validate(&common, tolerance),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Check(m)) => {
            eprintln!("fail: {m}");
            EXIT_FAIL
        }
    }
}

fn load(common: &Common) -> Result<Config, Failure> {
    let mut cfg = Config::load(common.config.as_deref(), &common.overrides)?;
    if let Some(s) = common.seed {
        cfg.scenario.seed = s;
        cfg.validate.seed = s;
    }
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).map_err(|e| Failure::Usage(e.to_string()))
        }
    }
}

fn parse_grid(text: &str) -> Result<(f64, f64, f64), Failure> {
    let bad = || Failure::Usage(format!("bad --q-grid '{text}', expected START:STOP:STEP"));
    let v: Vec<f64> = text.split(':').map(|s| s.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    match v[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(bad()),
    }
}

/// CSV table of a q sweep.
pub fn analytic_csv(params: &ModelParams, grid: &[f64]) -> Result<(String, bool), String> {
    let rows = sweep(params, grid).map_err(|e| e.to_string())?;
    let mut out = String::from(ANALYTIC_HEADER);
    out.push('\n');
    let mut all = true;
    for r in &rows {
        all &= r.converged;
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_num(r.q),
            fmt_num(r.p_tx_wifi),
            fmt_num(r.p_tx_cat4),
            fmt_num(r.access_sul),
            fmt_num(r.access_gul),
            fmt_num(r.p_b),
            r.converged
        ));
    }
    Ok((out, all))
}

fn cmd_analytic(common: &Common, grid: Option<&str>) -> Result<(), Failure> {
    let cfg = load(common)?;
    let (a, b, c) = match grid {
        Some(g) => parse_grid(g)?,
        None => (cfg.analytic.q_start, cfg.analytic.q_stop, cfg.analytic.q_step),
    };
    let grid = q_grid(a, b, c).map_err(|e| Failure::Usage(e.to_string()))?;
    let (csv, converged) = analytic_csv(&cfg.model, &grid).map_err(Failure::Usage)?;
    emit(common.out.as_deref(), &csv)?;
    if converged {
        Ok(())
    } else {
        Err(Failure::Check("some grid points did not converge".into()))
    }
}

/// JSON summary: config echo, seed and aggregate metrics.
pub fn simulate_summary(cfg: &sim::ScenarioConfig, m: &RunMetrics) -> serde_json::Value {
    serde_json::json!({
        "seed": cfg.seed,
        "config": cfg,
        "metrics": m.summary(),
    })
}

fn cmd_simulate(common: &Common, summary: Option<&Path>) -> Result<(), Failure> {
    let cfg = load(common)?;
    if cfg.scenario.sim_duration_s == 0.0 {
        eprintln!("warning: sim_duration_s = 0, metrics are empty");
    }
    let m = sim::run(&cfg.scenario).map_err(|e| Failure::Usage(e.to_string()))?;
    emit(common.out.as_deref(), &m.to_csv())?;
    let json_path = summary.map(Path::to_path_buf).or_else(|| common.out.as_ref().map(|p| p.with_extension("json")));
    if let Some(p) = json_path {
        let text = serde_json::to_string_pretty(&simulate_summary(&cfg.scenario, &m)).expect("json");
        std::fs::write(&p, text + "\n").map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display())))?;
    }
    Ok(())
}

/// One class of a validate report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidateLine {
    pub class: &'static str,
    pub nodes: u32,
    pub simulated: f64,
    pub analytic: f64,
    pub rel_error: f64,
}

/// Saturated simulation against the fixed point, for every populated class.
pub fn validate_report(cfg: &Config) -> Result<Vec<ValidateLine>, String> {
    let v = &cfg.validate;
    let mut params = cfg.model.clone();
    params.n_wifi = v.n_wifi;
    params.n_enb = v.n_cat4;
    params.n_ue = 0;
    params.uplink_mode = UplinkMode::Sul;
    params.sensing = v.sensing;
    let sol = solve_fixed_point(&params).map_err(|e| e.to_string())?;
    let sat = SaturatedConfig {
        n_wifi: v.n_wifi,
        n_cat4: v.n_cat4,
        w0: params.w0,
        m: params.m,
        q: params.q,
        slots: v.slots,
        seed: v.seed,
        channel: params.channel(),
    };
    let r = run_saturated(&sat).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for (class, nodes, simulated, analytic) in [
        ("wifi", v.n_wifi, r.wifi.attempt_rate, sol.p_tx_wifi),
        ("cat4", v.n_cat4, r.cat4.attempt_rate, sol.p_tx_cat4),
    ] {
        if nodes > 0 {
            let rel_error = (simulated - analytic).abs() / analytic;
            out.push(ValidateLine { class, nodes, simulated, analytic, rel_error });
        }
    }
    Ok(out)
}

fn cmd_validate(common: &Common, tolerance: Option<f64>) -> Result<(), Failure> {
    let cfg = load(common)?;
    let tol = tolerance.unwrap_or(cfg.validate.tolerance);
    if !(tol >= 0.0) {
        return Err(Failure::Usage(format!("tolerance {tol} must be non-negative")));
    }
    let lines = validate_report(&cfg).map_err(Failure::Check)?;
    let mut text = String::from(VALIDATE_HEADER);
    text.push('\n');
    let mut ok = !lines.is_empty();
    for l in &lines {
        let within = l.rel_error < tol;
        ok &= within;
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            l.class,
            l.nodes,
            fmt_num(l.simulated),
            fmt_num(l.analytic),
            fmt_num(l.rel_error),
            within
        ));
    }
    emit(common.out.as_deref(), &text)?;
    if ok {
        Ok(())
    } else {
        Err(Failure::Check(format!("relative error above tolerance {tol}")))
    }
}
