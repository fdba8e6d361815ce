//! Gym-style episodic environment around the LC-filter plant: reset/step
//! interface, tracking reward with a logarithmic overcurrent barrier,
//! abort on hard overcurrent, and the per-episode performance J.
//!
//! Reward per step, summed over the three phases and negated:
//!
//! ```text
//! r = −Σ_p [ √(|i*_p − i_p| / i_limit)
//!            − μ·ln(max(1 − max(|i_p| − i_nom, 0)/(i_limit − i_nom), ε)) ]
//! ```
//!
//! The square-root term is a mean-root-error that keeps pressure on small
//! steady-state errors; the barrier term is zero below `i_nom` and diverges
//! (clamped at ε) as |i| approaches `i_limit`.

use crate::frames::{grid_angle, inverse_park, Angle, Dq0Frame, ThreePhase};
use crate::plant::{
    build_lc_plant, step_rk4, step_zoh, zoh_discretize, DiscretePlant, GridParams, PlantError,
    PlantModel, PlantState,
};
use std::fmt;
use std::io::{self, Write};

/// Clamp for the barrier's log argument.
const BARRIER_EPS: f64 = 1e-6;

/// Time-stepping backend for the plant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    /// Exact zero-order-hold discretization (default).
    Zoh,
    /// Fixed-step classical RK4 with the given substep count; independent
    /// cross-check of the ZOH path.
    Rk4 { substeps: u32 },
}

/// How modulation indices scale into inverter phase voltages.
///
/// Full-link (v_inv = m·v_dc) is the calibrated default; half-link
/// (v_inv = m·v_dc/2) is the phase-leg convention kept as an option.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModulationMapping {
    FullLink,
    HalfLink,
}

impl ModulationMapping {
    pub fn link_scale(self, v_dc: f64) -> f64 {
        match self {
            ModulationMapping::FullLink => v_dc,
            ModulationMapping::HalfLink => v_dc / 2.0,
        }
    }
}

/// Episode configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub grid: GridParams,
    /// Nominal current above which the barrier activates, amperes.
    pub i_nom: f64,
    /// Hard current limit; exceeding it aborts the episode, amperes.
    pub i_limit: f64,
    /// Current setpoint in dq0, amperes.
    pub i_ref_dq0: Dq0Frame,
    /// Control period, seconds.
    pub dt: f64,
    /// Episode length in steps.
    pub n_steps: usize,
    /// Barrier weight.
    pub mu: f64,
    pub backend: Backend,
    pub mapping: ModulationMapping,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            grid: GridParams::default(),
            i_nom: 20.0,
            i_limit: 30.0,
            i_ref_dq0: Dq0Frame::new(15.0, 0.0, 0.0),
            dt: 50e-6,
            n_steps: 300,
            mu: 2.0,
            backend: Backend::Zoh,
            mapping: ModulationMapping::FullLink,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        self.grid.validate().map_err(EnvError::Plant)?;
        if !(self.i_nom > 0.0 && self.i_limit > self.i_nom) {
            return Err(EnvError::InvalidConfig("require 0 < i_nom < i_limit"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(EnvError::InvalidConfig("dt must be positive"));
        }
        if self.n_steps < 1 {
            return Err(EnvError::InvalidConfig("n_steps must be at least 1"));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(EnvError::InvalidConfig("mu must be non-negative"));
        }
        if let Backend::Rk4 { substeps } = self.backend {
            if substeps < 1 {
                return Err(EnvError::InvalidConfig("rk4 substeps must be at least 1"));
            }
        }
        Ok(())
    }
}

#[derive(Debug)]
pub enum EnvError {
    InvalidConfig(&'static str),
    Plant(PlantError),
    /// `step` was called after the episode finished.
    EpisodeFinished,
}

impl fmt::Display for EnvError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvError::InvalidConfig(msg) => write!(f, "invalid environment config: {msg}"),
            EnvError::Plant(e) => write!(f, "plant error: {e}"),
            EnvError::EpisodeFinished => write!(f, "episode already finished"),
        }
    }
}

impl std::error::Error for EnvError {}

/// What the controller sees after each step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub i_f_abc: ThreePhase,
    pub v_c_abc: ThreePhase,
    pub t: f64,
    pub theta: Angle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
    pub aborted: bool,
}

/// One recorded step: the post-step time and state, the action that drove
/// it, and the step's reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub t: f64,
    pub i_f: ThreePhase,
    pub v_c: ThreePhase,
    pub i_l: ThreePhase,
    pub m: ThreePhase,
    pub reward: f64,
}

/// Full episode telemetry plus the scalar performance J.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub trace: Vec<TraceStep>,
    pub j: f64,
    pub aborted: bool,
    pub abort_step: Option<usize>,
}

impl EpisodeRecord {
    /// Writes the trace as CSV with header
    /// `t,i_f_a,i_f_b,i_f_c,v_c_a,v_c_b,v_c_c,i_l_a,i_l_b,i_l_c,m_a,m_b,m_c,reward`,
    /// one row per recorded step.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "t,i_f_a,i_f_b,i_f_c,v_c_a,v_c_b,v_c_c,i_l_a,i_l_b,i_l_c,m_a,m_b,m_c,reward"
        )?;
        for s in &self.trace {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                s.t,
                s.i_f.a, s.i_f.b, s.i_f.c,
                s.v_c.a, s.v_c.b, s.v_c.c,
                s.i_l.a, s.i_l.b, s.i_l.c,
                s.m.a, s.m.b, s.m.c,
                s.reward
            )?;
        }
        Ok(())
    }
}

/// A single in-flight episode. One handle per episode; distinct episodes
/// are independent and may run in parallel.
#[derive(Debug, Clone)]
pub struct Env {
    cfg: EnvConfig,
    model: PlantModel,
    disc: Option<DiscretePlant>,
    state: PlantState,
    step_idx: usize,
    done: bool,
    aborted: bool,
}

impl Env {
    /// Builds the plant and returns the blackstart observation (all zeros).
    pub fn reset(cfg: &EnvConfig) -> Result<(Env, Observation), EnvError> {
        cfg.validate()?;
        let model = build_lc_plant(&cfg.grid).map_err(EnvError::Plant)?;
        let disc = match cfg.backend {
            Backend::Zoh => Some(zoh_discretize(&model, cfg.dt).map_err(EnvError::Plant)?),
            Backend::Rk4 { .. } => None,
        };
        let n = model.n_states();
        let env = Env {
            cfg: cfg.clone(),
            model,
            disc,
            state: PlantState::zero(n),
            step_idx: 0,
            done: false,
            aborted: false,
        };
        let obs = env.observe();
        Ok((env, obs))
    }

    fn observe(&self) -> Observation {
        let x = &self.state.x;
        Observation {
            i_f_abc: ThreePhase::new(x[0], x[1], x[2]),
            v_c_abc: ThreePhase::new(x[3], x[4], x[5]),
            t: self.state.t,
            theta: grid_angle(self.state.t, self.cfg.grid.f_grid),
        }
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Load-side currents of the current state (not part of the controller's
    /// observation; recorded for telemetry).
    pub fn load_currents(&self) -> ThreePhase {
        let x = &self.state.x;
        ThreePhase::new(x[6], x[7], x[8])
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    /// Applies the modulation indices for one control period.
    ///
    /// The action scales into phase voltages through the mapping config,
    /// the plant advances by `dt`, and the reward scores the new filter
    /// currents against the setpoint's abc image at the step's angle (the
    /// angle the action was issued at). Exceeding `i_limit` on any phase
    /// aborts.
    pub fn step(&mut self, action: ThreePhase) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        let theta_step = grid_angle(self.state.t, self.cfg.grid.f_grid);
        let scale = self.cfg.mapping.link_scale(self.cfg.grid.v_dc);
        let v = [action.a * scale, action.b * scale, action.c * scale];
        self.state = match self.cfg.backend {
            Backend::Zoh => step_zoh(self.disc.as_ref().expect("zoh backend"), &self.state, &v),
            Backend::Rk4 { substeps } => {
                step_rk4(&self.model, &self.state, &v, self.cfg.dt, substeps)
            }
        };
        // Times accumulate as n·dt exactly, avoiding drift over the episode.
        self.step_idx += 1;
        self.state.t = self.step_idx as f64 * self.cfg.dt;

        let obs = self.observe();
        let i_ref_abc = inverse_park(self.cfg.i_ref_dq0, theta_step);
        let r = reward(obs.i_f_abc, i_ref_abc, &self.cfg);
        self.aborted = obs.i_f_abc.max_abs() > self.cfg.i_limit;
        self.done = self.aborted || self.step_idx >= self.cfg.n_steps;
        Ok(StepResult { obs, reward: r, done: self.done, aborted: self.aborted })
    }
}

/// Per-step reward of measured phase currents against their references.
/// Always ≤ 0; exactly 0 only for perfect tracking within the nominal band.
pub fn reward(i_abc: ThreePhase, i_ref_abc: ThreePhase, cfg: &EnvConfig) -> f64 {
    let mut r = 0.0;
    for (i, i_ref) in i_abc.as_array().into_iter().zip(i_ref_abc.as_array()) {
        r -= ((i_ref - i).abs() / cfg.i_limit).sqrt();
        let overshoot = (i.abs() - cfg.i_nom).max(0.0);
        let arg = (1.0 - overshoot / (cfg.i_limit - cfg.i_nom)).max(BARRIER_EPS);
        r += cfg.mu * arg.ln();
    }
    r
}

/// Per-episode performance: the mean reward over all `n_steps` slots.
/// Aborted episodes fill every remaining slot with the abort-step reward,
/// so failing early never scores better than completing.
pub fn episode_performance(rec: &EpisodeRecord, cfg: &EnvConfig) -> f64 {
    let n = cfg.n_steps;
    let recorded = rec.trace.len();
    debug_assert!(recorded <= n);
    debug_assert!(rec.aborted || recorded == n, "record must be complete or aborted");
    let sum: f64 = rec.trace.iter().map(|s| s.reward).sum();
    let fill = match rec.trace.last() {
        Some(last) => (n - recorded) as f64 * last.reward,
        None => 0.0,
    };
    (sum + fill) / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> EnvConfig {
        EnvConfig::default()
    }

    #[test]
    fn reset_is_blackstart() {
        let (_, obs) = Env::reset(&cfg()).unwrap();
        assert_eq!(obs.i_f_abc, ThreePhase::ZERO);
        assert_eq!(obs.v_c_abc, ThreePhase::ZERO);
        assert_eq!(obs.t, 0.0);
        assert_eq!(obs.theta.radians, 0.0);
    }

    #[test]
    fn reset_twice_is_identical() {
        let (_, o1) = Env::reset(&cfg()).unwrap();
        let (_, o2) = Env::reset(&cfg()).unwrap();
        assert_eq!(o1, o2);
    }

    #[test]
    fn reset_after_completed_episode_restores_zero() {
        let c = EnvConfig { n_steps: 3, ..cfg() };
        let (mut env, _) = Env::reset(&c).unwrap();
        for _ in 0..3 {
            env.step(ThreePhase::new(0.1, 0.0, -0.1)).unwrap();
        }
        assert!(env.is_done());
        let (_, obs) = Env::reset(&c).unwrap();
        assert_eq!(obs.i_f_abc, ThreePhase::ZERO);
        assert_eq!(obs.t, 0.0);
    }

    #[test]
    fn invalid_config_rejected() {
        let bad = EnvConfig { i_nom: 30.0, i_limit: 20.0, ..cfg() };
        assert!(Env::reset(&bad).is_err());
    }

    #[test]
    fn zero_action_keeps_state_zero() {
        let (mut env, _) = Env::reset(&cfg()).unwrap();
        let res = env.step(ThreePhase::ZERO).unwrap();
        assert_eq!(res.obs.i_f_abc, ThreePhase::ZERO);
        // Reward equals the pure-reference reward at θ = 0.
        let i_ref = inverse_park(Dq0Frame::new(15.0, 0.0, 0.0), Angle::new(0.0));
        let want = reward(ThreePhase::ZERO, i_ref, &cfg());
        assert_eq!(res.reward, want);
    }

    #[test]
    fn done_exactly_at_n_steps() {
        let c = EnvConfig { n_steps: 5, ..cfg() };
        let (mut env, _) = Env::reset(&c).unwrap();
        for n in 1..=5 {
            let res = env.step(ThreePhase::ZERO).unwrap();
            assert_eq!(res.done, n == 5);
            assert!(!res.aborted);
        }
        assert!(env.step(ThreePhase::ZERO).is_err());
    }

    #[test]
    fn saturated_common_mode_keeps_phases_equal() {
        let (mut env, _) = Env::reset(&cfg()).unwrap();
        for _ in 0..50 {
            let res = env.step(ThreePhase::new(1.0, 1.0, 1.0)).unwrap();
            let i = res.obs.i_f_abc;
            assert_eq!(i.a, i.b);
            assert_eq!(i.b, i.c);
            if res.done {
                break;
            }
        }
    }

    #[test]
    // -0.70711 is the documented reference value, not an approximation of 1/sqrt(2).
    #[allow(clippy::approx_constant)]
    fn reward_examples() {
        let c = cfg();
        // Perfect tracking within the nominal band.
        let r0 = reward(
            ThreePhase::new(15.0, -7.5, -7.5),
            ThreePhase::new(15.0, -7.5, -7.5),
            &c,
        );
        assert!(r0.abs() <= 1e-9);

        // Single active tracking term: |15 − 0|/30.
        let r1 = reward(
            ThreePhase::new(0.0, -7.5, -7.5),
            ThreePhase::new(15.0, -7.5, -7.5),
            &c,
        );
        assert!((r1 - -(15.0f64 / 30.0).sqrt()).abs() <= 1e-9);
        assert!((r1 - -0.70711).abs() <= 1e-5);

        // Tracking term plus active barrier: i = 25 overshoots by 5 of 10.
        let r2 = reward(
            ThreePhase::new(25.0, -7.5, -7.5),
            ThreePhase::new(15.0, -7.5, -7.5),
            &c,
        );
        let want = -((10.0f64 / 30.0).sqrt() + 2.0 * 2.0f64.ln());
        assert!((r2 - want).abs() <= 1e-9);
        assert!((r2 - -1.96364).abs() <= 1e-5);
    }

    #[test]
    fn reward_nonpositive_and_barrier_inactive_below_nominal() {
        let c = cfg();
        for i in [-19.9f64, -5.0, 0.0, 5.0, 19.9] {
            let r = reward(ThreePhase::new(i, 0.0, 0.0), ThreePhase::new(i, 0.0, 0.0), &c);
            assert_eq!(r, 0.0, "barrier must be inactive at |i| = {i}");
        }
        let r = reward(ThreePhase::new(29.999, 0.0, 0.0), ThreePhase::new(15.0, 0.0, 0.0), &c);
        assert!(r < -10.0, "barrier must dominate near the limit, got {r}");
    }

    #[test]
    fn abort_on_overcurrent_and_flags_consistent() {
        // Full drive on phase a ramps the filter current past the limit.
        let (mut env, _) = Env::reset(&cfg()).unwrap();
        let mut aborted_at = None;
        for n in 1..=300 {
            let res = env.step(ThreePhase::new(1.0, -0.5, -0.5)).unwrap();
            if res.aborted {
                assert!(res.done, "aborted implies done");
                assert!(res.obs.i_f_abc.max_abs() > 30.0);
                aborted_at = Some(n);
                break;
            }
        }
        assert!(aborted_at.is_some(), "saturated drive must trip the limit");
    }

    #[test]
    fn episode_performance_fill_rule() {
        let c = cfg();
        let mk = |r: f64, t: f64| TraceStep {
            t,
            i_f: ThreePhase::ZERO,
            v_c: ThreePhase::ZERO,
            i_l: ThreePhase::ZERO,
            m: ThreePhase::ZERO,
            reward: r,
        };
        // 99 steps at −0.4, abort step at −3.0: the −3.0 fills the 200
        // missing slots on top of being recorded itself.
        let mut trace: Vec<_> = (0..99).map(|n| mk(-0.4, n as f64)).collect();
        trace.push(mk(-3.0, 99.0));
        let rec = EpisodeRecord { trace, j: 0.0, aborted: true, abort_step: Some(99) };
        let j = episode_performance(&rec, &c);
        assert!((j - (99.0 * -0.4 + 201.0 * -3.0) / 300.0).abs() < 1e-12);

        // Hand value: recorded sum −40 over 100 steps, abort reward −3.0
        // → (−40 + 200·(−3.0))/300 = −2.1333…
        let mut trace: Vec<_> = (0..99).map(|n| mk(-37.0 / 99.0, n as f64)).collect();
        trace.push(mk(-3.0, 99.0));
        let rec = EpisodeRecord { trace, j: 0.0, aborted: true, abort_step: Some(99) };
        let j = episode_performance(&rec, &c);
        assert!((j - -2.1333).abs() < 1e-4);
        assert!((j - -(40.0 + 600.0) / 300.0).abs() < 1e-12);
    }

    #[test]
    fn episode_performance_constant_rewards() {
        let c = cfg();
        let mk = |r: f64, t: f64| TraceStep {
            t,
            i_f: ThreePhase::ZERO,
            v_c: ThreePhase::ZERO,
            i_l: ThreePhase::ZERO,
            m: ThreePhase::ZERO,
            reward: r,
        };
        let zeros: Vec<_> = (0..300).map(|n| mk(0.0, n as f64)).collect();
        let rec = EpisodeRecord { trace: zeros, j: 0.0, aborted: false, abort_step: None };
        assert_eq!(episode_performance(&rec, &c), 0.0);

        let halves: Vec<_> = (0..300).map(|n| mk(-0.5, n as f64)).collect();
        let rec = EpisodeRecord { trace: halves, j: 0.0, aborted: false, abort_step: None };
        assert!((episode_performance(&rec, &c) - -0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_current_episode_matches_waveform_oracle() {
        // J of an all-zero-current episode is computable from the reference
        // waveform alone: −(1/N)·Σ_n Σ_p √(|i*_p(θ_n)|/i_limit).
        let c = cfg();
        let mut oracle = 0.0;
        for n in 0..c.n_steps {
            let theta = grid_angle(n as f64 * c.dt, c.grid.f_grid);
            let i_ref = inverse_park(c.i_ref_dq0, theta);
            for phase in i_ref.as_array() {
                oracle -= (phase.abs() / c.i_limit).sqrt();
            }
        }
        oracle /= c.n_steps as f64;

        let (mut env, _) = Env::reset(&c).unwrap();
        let mut trace = Vec::new();
        loop {
            let res = env.step(ThreePhase::ZERO).unwrap();
            trace.push(TraceStep {
                t: res.obs.t,
                i_f: res.obs.i_f_abc,
                v_c: res.obs.v_c_abc,
                i_l: ThreePhase::ZERO,
                m: ThreePhase::ZERO,
                reward: res.reward,
            });
            if res.done {
                break;
            }
        }
        let rec = EpisodeRecord { trace, j: 0.0, aborted: false, abort_step: None };
        let j = episode_performance(&rec, &c);
        assert!((j - oracle).abs() < 1e-12, "J {j} vs oracle {oracle}");
    }

    #[test]
    fn csv_roundtrip_header_and_rows() {
        let (mut env, _) = Env::reset(&EnvConfig { n_steps: 4, ..cfg() }).unwrap();
        let mut trace = Vec::new();
        loop {
            let res = env.step(ThreePhase::new(0.3, -0.15, -0.15)).unwrap();
            trace.push(TraceStep {
                t: res.obs.t,
                i_f: res.obs.i_f_abc,
                v_c: res.obs.v_c_abc,
                i_l: ThreePhase::ZERO,
                m: ThreePhase::new(0.3, -0.15, -0.15),
                reward: res.reward,
            });
            if res.done {
                break;
            }
        }
        let rec = EpisodeRecord { trace, j: -0.5, aborted: false, abort_step: None };
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,i_f_a,i_f_b,i_f_c,v_c_a,v_c_b,v_c_c,i_l_a,i_l_b,i_l_c,m_a,m_b,m_c,reward"
        );
        let rows: Vec<_> = lines.collect();
        assert_eq!(rows.len(), 4);
        for row in rows {
            let fields: Vec<_> = row.split(',').collect();
            assert_eq!(fields.len(), 14);
            for f in fields {
                f.parse::<f64>().unwrap();
            }
        }
    }

    proptest! {
        #[test]
        fn prop_reward_nonpositive(ia in -40.0..40.0f64, ib in -40.0..40.0f64,
                                   ic in -40.0..40.0f64, ra in -20.0..20.0f64,
                                   rb in -20.0..20.0f64, rc in -20.0..20.0f64) {
            let r = reward(ThreePhase::new(ia, ib, ic), ThreePhase::new(ra, rb, rc), &cfg());
            prop_assert!(r <= 0.0);
        }

        #[test]
        fn prop_reward_phase_permutation_invariant(
            ia in -40.0..40.0f64, ib in -40.0..40.0f64, ic in -40.0..40.0f64,
            ra in -20.0..20.0f64, rb in -20.0..20.0f64, rc in -20.0..20.0f64) {
            let c = cfg();
            let base = reward(ThreePhase::new(ia, ib, ic), ThreePhase::new(ra, rb, rc), &c);
            // All cyclic and swap permutations applied jointly.
            let perms = [
                ([ib, ic, ia], [rb, rc, ra]),
                ([ic, ia, ib], [rc, ra, rb]),
                ([ib, ia, ic], [rb, ra, rc]),
                ([ia, ic, ib], [ra, rc, rb]),
                ([ic, ib, ia], [rc, rb, ra]),
            ];
            for (i, r) in perms {
                let v = reward(ThreePhase::from_array(i), ThreePhase::from_array(r), &c);
                prop_assert!((v - base).abs() <= 1e-12 * (1.0 + base.abs()));
            }
        }
    }
}
