//! The four experiment commands and their exit-code policy.

use crate::config::{CliConfig, Mode};
use gridtune_core::{
    landscape_sweep, read_history_csv, run_episode, run_tuning, write_history_csv,
    write_landscape_csv, write_posterior_csv, EnvError, ExperimentConfig, HistoryRow, PiGains,
    PlantError, RunnerError, SafeOptError, SafeOptState, TuningHistory,
};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

/// Command failure with its process exit code: 1 usage/config, 2
/// runtime/numerical, 3 safe-set-empty terminal.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
    Terminal(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Terminal(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) | CliError::Terminal(m) => write!(f, "{m}"),
        }
    }
}

fn env_err(e: EnvError) -> CliError {
    match e {
        EnvError::InvalidConfig(_) | EnvError::Plant(PlantError::InvalidParameter(_)) => {
            CliError::Usage(e.to_string())
        }
        _ => CliError::Runtime(e.to_string()),
    }
}

fn safeopt_err(e: SafeOptError) -> CliError {
    match e {
        SafeOptError::SafeSetEmpty => CliError::Terminal(e.to_string()),
        SafeOptError::InvalidBounds(_) | SafeOptError::InvalidBeta
        | SafeOptError::DimensionMismatch => CliError::Usage(e.to_string()),
        _ => CliError::Runtime(e.to_string()),
    }
}

fn runner_err(e: RunnerError) -> CliError {
    match e {
        RunnerError::InvalidConfig(_) => CliError::Usage(e.to_string()),
        RunnerError::Env(e) => env_err(e),
        RunnerError::SafeOpt(e) => safeopt_err(e),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", path.display())))
}

fn wrote(e: std::io::Error, path: &Path) -> CliError {
    CliError::Runtime(format!("writing {}: {e}", path.display()))
}

/// One episode at fixed gains: waveform CSV plus J on stdout.
pub fn cmd_episode(
    cfg: &CliConfig,
    kp: Option<f64>,
    ki: Option<f64>,
    out: &Path,
) -> Result<(), CliError> {
    let gains = PiGains::new(kp.unwrap_or(cfg.seed_kp), ki.unwrap_or(cfg.seed_ki));
    let rec = run_episode(&cfg.env, gains).map_err(env_err)?;
    let mut w = create(out)?;
    rec.write_csv(&mut w).map_err(|e| wrote(e, out))?;
    w.flush().map_err(|e| wrote(e, out))?;
    if rec.aborted {
        eprintln!("episode aborted at step {}", rec.abort_step.unwrap_or(0));
    }
    println!("J = {:.4}", rec.j);
    Ok(())
}

/// Reconstructs the optimizer state after the first `rows.len()`
/// measurements of an experiment by replaying them through the surrogate.
/// Measurement order fully determines the GP, so this reproduces the
/// in-run state exactly.
fn replay_state(
    exp: &ExperimentConfig,
    rows: &[(Vec<f64>, f64, bool)],
) -> Result<SafeOptState, CliError> {
    let j_init = rows[0].1;
    let kernel = exp.resolve_kernel(j_init);
    let mut state = SafeOptState::init(
        &exp.active_bounds(),
        &rows[0].0,
        j_init,
        2.0 * j_init,
        &kernel,
        exp.beta,
    )
    .map_err(safeopt_err)?;
    for (params, j, aborted) in &rows[1..] {
        state.add_measurement(params, *j, *aborted).map_err(safeopt_err)?;
    }
    Ok(state)
}

fn active_params(exp: &ExperimentConfig, gains: PiGains) -> Vec<f64> {
    let full = [gains.kp, gains.ki];
    exp.active_dims().iter().map(|&d| full[d]).collect()
}

fn axis_names(exp: &ExperimentConfig) -> Vec<&'static str> {
    let all = ["kp", "ki"];
    exp.active_dims().iter().map(|&d| all[d]).collect()
}

fn dump_snapshot(
    exp: &ExperimentConfig,
    rows: &[(Vec<f64>, f64, bool)],
    out: &Path,
) -> Result<(), CliError> {
    let state = replay_state(exp, rows)?;
    let mut w = create(out)?;
    write_posterior_csv(&state, &axis_names(exp), &mut w).map_err(|e| wrote(e, out))?;
    w.flush().map_err(|e| wrote(e, out))
}

/// The tuning loop: history CSV plus one GP posterior dump per snapshot
/// episode, all under `out_dir`.
pub fn cmd_tune(cfg: &CliConfig, mode: Mode, out_dir: &Path) -> Result<(), CliError> {
    let exp = cfg.experiment(mode);
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", out_dir.display())))?;

    let history: TuningHistory = run_tuning(&exp).map_err(runner_err)?;

    let history_path = out_dir.join("history.csv");
    let mut w = create(&history_path)?;
    write_history_csv(&history, &mode.to_string(), cfg.rng_seed, &mut w)
        .map_err(|e| wrote(e, &history_path))?;
    w.flush().map_err(|e| wrote(e, &history_path))?;

    let rows: Vec<(Vec<f64>, f64, bool)> = history
        .entries
        .iter()
        .map(|e| (active_params(&exp, e.gains), e.j, e.aborted))
        .collect();
    for snap in &history.snapshots {
        let path = out_dir.join(format!("gp_ep{}.csv", snap.episode));
        dump_snapshot(&exp, &rows[..=snap.episode], &path)?;
    }

    println!("episodes: {}", history.entries.len());
    println!("j_min = {:.4}", history.j_min);
    println!(
        "best: kp = {}, ki = {}, J = {:.4}",
        history.best_gains.kp, history.best_gains.ki, history.best_j
    );
    if history.terminal_safe_empty {
        return Err(CliError::Terminal(format!(
            "safe set emptied after episode {}; partial history written to {}",
            history.entries.last().map(|e| e.episode).unwrap_or(0),
            history_path.display()
        )));
    }
    Ok(())
}

fn parse_resolution(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("invalid resolution {s:?} (expected e.g. 60x60)"));
    let parse = |t: &str| t.parse::<usize>().ok().filter(|&n| n >= 1).ok_or_else(bad);
    match s.split_once('x') {
        Some((a, b)) => Ok((parse(a)?, parse(b)?)),
        None => {
            let n = parse(s)?;
            Ok((n, n))
        }
    }
}

/// Brute-force J landscape over the configured gain box.
pub fn cmd_landscape(
    cfg: &CliConfig,
    resolution: Option<&str>,
    out: &Path,
) -> Result<(), CliError> {
    let res = match resolution {
        Some(s) => parse_resolution(s)?,
        None => (cfg.kp_grid_points, cfg.ki_grid_points(Mode::TwoD)),
    };
    let points = landscape_sweep(
        &cfg.env,
        (cfg.kp_low, cfg.kp_high),
        (cfg.ki_low, cfg.ki_high),
        res,
    )
    .map_err(env_err)?;
    let mut w = create(out)?;
    write_landscape_csv(&points, &mut w).map_err(|e| wrote(e, out))?;
    w.flush().map_err(|e| wrote(e, out))?;
    let best = points
        .iter()
        .reduce(|a, b| if b.j > a.j { b } else { a })
        .expect("at least one grid point");
    println!(
        "{} points; max J = {:.4} at kp = {}, ki = {}",
        points.len(),
        best.j,
        best.kp,
        best.ki
    );
    Ok(())
}

/// Rebuilds the surrogate as of a recorded episode and dumps mean/bounds
/// plus the safe flag over the search grid.
pub fn cmd_gp_dump(
    cfg: &CliConfig,
    history_path: &Path,
    episode_index: usize,
    out: &Path,
) -> Result<(), CliError> {
    let file = File::open(history_path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", history_path.display())))?;
    let history = read_history_csv(BufReader::new(file))
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mode: Mode = history.mode.parse().map_err(CliError::Usage)?;
    if episode_index >= history.rows.len() {
        return Err(CliError::Usage(format!(
            "episode index {episode_index} out of range (history has {} episodes)",
            history.rows.len()
        )));
    }
    let exp = cfg.experiment(mode);
    let rows: Vec<(Vec<f64>, f64, bool)> = history.rows[..=episode_index]
        .iter()
        .map(|r: &HistoryRow| {
            (active_params(&exp, PiGains::new(r.kp, r.ki)), r.j, r.aborted)
        })
        .collect();
    dump_snapshot(&exp, &rows, out)?;
    println!(
        "wrote {} (episode {}, {} observations)",
        out.display(),
        episode_index,
        rows.len()
    );
    Ok(())
}
