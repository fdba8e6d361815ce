//! Flat `key = value` configuration files.
//!
//! Every key is optional; unspecified keys take the built-in defaults (the
//! reference inverter setup). Unknown and duplicate keys are rejected. Lines
//! starting with `#` and blank lines are ignored.
//!
//! | key                 | unit      | default    |
//! |---------------------|-----------|------------|
//! | v_dc                | V         | 1000       |
//! | f_grid              | Hz        | 50         |
//! | l_filt              | H         | 2e-3       |
//! | c_filt              | F         | 20e-6      |
//! | r_filt              | Ω         | 0          |
//! | r_load              | Ω         | 20         |
//! | l_load              | H         | 1e-3       |
//! | i_ref_d / _q / _0   | A         | 15 / 0 / 0 |
//! | i_nom               | A         | 20         |
//! | i_limit             | A         | 30         |
//! | dt                  | s         | 50e-6      |
//! | n_steps             | —         | 300        |
//! | mu                  | —         | 2          |
//! | backend             | —         | zoh (or rk4)        |
//! | rk4_substeps        | —         | 4          |
//! | mapping             | —         | full-link (or half-link) |
//! | kp_low / kp_high    | V/A       | 0 / 0.03   |
//! | kp_grid_points      | —         | 100        |
//! | ki_low / ki_high    | V/(A·s)   | 0 / 300    |
//! | ki_grid_points      | —         | 1000 (1d) / 100 (2d) |
//! | seed_kp             | V/A       | 0.005      |
//! | seed_ki             | V/(A·s)   | 10         |
//! | n_episodes          | —         | 15 (1d) / 50 (2d) |
//! | gp_lengthscale_kp   | normalized| 0.05       |
//! | gp_lengthscale_ki   | normalized| 0.05       |
//! | gp_signal_std       | J units   | derived: \|J_init\| |
//! | gp_noise_std        | J units   | derived: 1% of signal |
//! | beta                | —         | 2          |
//! | rng_seed            | —         | 0          |

use gridtune_core::{
    AxisBounds, Backend, EnvConfig, ExperimentConfig, KernelConfig, ModulationMapping,
    ParamBounds, PiGains,
};
use std::collections::HashSet;
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    #[value(name = "1d")]
    OneD,
    #[value(name = "2d")]
    TwoD,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::OneD => write!(f, "1d"),
            Mode::TwoD => write!(f, "2d"),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1d" => Ok(Mode::OneD),
            "2d" => Ok(Mode::TwoD),
            other => Err(format!("unknown mode {other:?} (expected 1d or 2d)")),
        }
    }
}

/// Fully parsed configuration. Mode-dependent defaults (K_i resolution,
/// episode count) stay unresolved until [`CliConfig::experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub env: EnvConfig,
    pub rk4_substeps: u32,
    pub kp_low: f64,
    pub kp_high: f64,
    pub kp_grid_points: usize,
    pub ki_low: f64,
    pub ki_high: f64,
    pub ki_grid_points: Option<usize>,
    pub seed_kp: f64,
    pub seed_ki: f64,
    pub n_episodes: Option<usize>,
    pub kernel: KernelConfig,
    pub beta: f64,
    pub rng_seed: u64,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            rk4_substeps: 4,
            kp_low: 0.0,
            kp_high: 0.03,
            kp_grid_points: 100,
            ki_low: 0.0,
            ki_high: 300.0,
            ki_grid_points: None,
            seed_kp: 0.005,
            seed_ki: 10.0,
            n_episodes: None,
            kernel: KernelConfig::default(),
            beta: 2.0,
            rng_seed: 0,
        }
    }
}

impl CliConfig {
    pub fn from_file(path: &Path) -> Result<CliConfig, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<CliConfig, String> {
        let mut cfg = CliConfig::default();
        let mut rk4_requested = false;
        let mut seen = HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", lineno + 1))?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(format!("line {}: duplicate key {key:?}", lineno + 1));
            }
            let bad =
                |what: &str| format!("line {}: invalid {what} value {value:?}", lineno + 1);
            macro_rules! num {
                ($ty:ty) => {
                    value.parse::<$ty>().map_err(|_| bad(key))?
                };
            }
            match key {
                "v_dc" => cfg.env.grid.v_dc = num!(f64),
                "f_grid" => cfg.env.grid.f_grid = num!(f64),
                "l_filt" => cfg.env.grid.l_filt = num!(f64),
                "c_filt" => cfg.env.grid.c_filt = num!(f64),
                "r_filt" => cfg.env.grid.r_filt = num!(f64),
                "r_load" => cfg.env.grid.r_load = num!(f64),
                "l_load" => cfg.env.grid.l_load = num!(f64),
                "i_ref_d" => cfg.env.i_ref_dq0.d = num!(f64),
                "i_ref_q" => cfg.env.i_ref_dq0.q = num!(f64),
                "i_ref_0" => cfg.env.i_ref_dq0.zero = num!(f64),
                "i_nom" => cfg.env.i_nom = num!(f64),
                "i_limit" => cfg.env.i_limit = num!(f64),
                "dt" => cfg.env.dt = num!(f64),
                "n_steps" => cfg.env.n_steps = num!(usize),
                "mu" => cfg.env.mu = num!(f64),
                "backend" => match value {
                    "zoh" => rk4_requested = false,
                    "rk4" => rk4_requested = true,
                    _ => return Err(bad("backend (zoh|rk4)")),
                },
                "rk4_substeps" => cfg.rk4_substeps = num!(u32),
                "mapping" => {
                    cfg.env.mapping = match value {
                        "full-link" => ModulationMapping::FullLink,
                        "half-link" => ModulationMapping::HalfLink,
                        _ => return Err(bad("mapping (full-link|half-link)")),
                    }
                }
                "kp_low" => cfg.kp_low = num!(f64),
                "kp_high" => cfg.kp_high = num!(f64),
                "kp_grid_points" => cfg.kp_grid_points = num!(usize),
                "ki_low" => cfg.ki_low = num!(f64),
                "ki_high" => cfg.ki_high = num!(f64),
                "ki_grid_points" => cfg.ki_grid_points = Some(num!(usize)),
                "seed_kp" => cfg.seed_kp = num!(f64),
                "seed_ki" => cfg.seed_ki = num!(f64),
                "n_episodes" => cfg.n_episodes = Some(num!(usize)),
                "gp_lengthscale_kp" => cfg.kernel.lengthscale_kp = num!(f64),
                "gp_lengthscale_ki" => cfg.kernel.lengthscale_ki = num!(f64),
                "gp_signal_std" => cfg.kernel.signal_std = Some(num!(f64)),
                "gp_noise_std" => cfg.kernel.noise_std = Some(num!(f64)),
                "beta" => cfg.beta = num!(f64),
                "rng_seed" => cfg.rng_seed = num!(u64),
                other => return Err(format!("line {}: unknown key {other:?}", lineno + 1)),
            }
        }
        cfg.env.backend = if rk4_requested {
            Backend::Rk4 { substeps: cfg.rk4_substeps }
        } else {
            Backend::Zoh
        };
        Ok(cfg)
    }

    pub fn seed_gains(&self) -> PiGains {
        PiGains::new(self.seed_kp, self.seed_ki)
    }

    /// K_i grid resolution; the 1D study defaults finer than the 2D one.
    pub fn ki_grid_points(&self, mode: Mode) -> usize {
        self.ki_grid_points.unwrap_or(match mode {
            Mode::OneD => 1000,
            Mode::TwoD => 100,
        })
    }

    pub fn n_episodes(&self, mode: Mode) -> usize {
        self.n_episodes.unwrap_or(match mode {
            Mode::OneD => 15,
            Mode::TwoD => 50,
        })
    }

    pub fn bounds(&self, mode: Mode) -> ParamBounds {
        ParamBounds {
            axes: vec![
                AxisBounds {
                    low: self.kp_low,
                    high: self.kp_high,
                    grid_points: self.kp_grid_points,
                },
                AxisBounds {
                    low: self.ki_low,
                    high: self.ki_high,
                    grid_points: self.ki_grid_points(mode),
                },
            ],
        }
    }

    /// The tuning experiment for a mode; 1d pins K_p at the seed value.
    pub fn experiment(&self, mode: Mode) -> ExperimentConfig {
        ExperimentConfig {
            env: self.env.clone(),
            bounds: self.bounds(mode),
            fixed_params: match mode {
                Mode::OneD => [Some(self.seed_kp), None],
                Mode::TwoD => [None, None],
            },
            seed_gains: self.seed_gains(),
            n_episodes: self.n_episodes(mode),
            kernel: self.kernel.clone(),
            beta: self.beta,
            rng_seed: self.rng_seed,
        }
    }
}
