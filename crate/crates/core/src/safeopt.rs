//! SafeOpt-style safe Bayesian optimization over a discretized gain grid,
//! in the GP-only variant (no Lipschitz constant): safety, expansion, and
//! maximization are all decided from confidence bounds.
//!
//! Definitions, with lower/upper the β-confidence bounds of the surrogate:
//! - safe set: grid points with lower ≥ j_min;
//! - potential maximizers: safe points whose upper bound reaches the best
//!   lower bound over the safe set;
//! - expanders: safe points for which an optimistic fictitious observation
//!   (x, upper(x)) would certify at least one currently-unsafe point safe.
//!
//! The next candidate is the widest-interval member of the union of the two
//! sets. Expander status is the expensive test, so it is decided lazily in
//! the proposal's descending-width scan and memoized; the first qualifying
//! point is exactly the union's argmax, so laziness never changes the
//! result. The fictitious observation is evaluated by an exact rank-1
//! posterior update, not a distance heuristic.

use crate::gp::{kernel_eval, GpError, GpModel, KernelParams};
use rayon::prelude::*;
use std::fmt;
use std::io::{self, Write};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisBounds {
    pub low: f64,
    pub high: f64,
    pub grid_points: usize,
}

/// Physical-unit search box with per-dimension grid resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBounds {
    pub axes: Vec<AxisBounds>,
}

impl ParamBounds {
    pub fn validate(&self) -> Result<(), SafeOptError> {
        if self.axes.is_empty() {
            return Err(SafeOptError::InvalidBounds("at least one axis required"));
        }
        for ax in &self.axes {
            if !(ax.low.is_finite() && ax.high.is_finite() && ax.low < ax.high) {
                return Err(SafeOptError::InvalidBounds("require low < high"));
            }
            if ax.grid_points < 2 {
                return Err(SafeOptError::InvalidBounds("require grid_points >= 2"));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }
}

/// Uniform candidate grid, bounds inclusive, flattened in C order (first
/// axis outermost). Carries both physical and normalized ([0,1]^d)
/// coordinates for every point.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dims: Vec<usize>,
    points_physical: Vec<Vec<f64>>,
    points_normalized: Vec<Vec<f64>>,
    axes: Vec<AxisBounds>,
}

impl Grid {
    pub fn build(bounds: &ParamBounds) -> Result<Grid, SafeOptError> {
        bounds.validate()?;
        let dims: Vec<usize> = bounds.axes.iter().map(|a| a.grid_points).collect();
        let len: usize = dims.iter().product();
        let d = dims.len();
        let mut points_physical = Vec::with_capacity(len);
        let mut points_normalized = Vec::with_capacity(len);
        let mut idx = vec![0usize; d];
        for _ in 0..len {
            let mut phys = Vec::with_capacity(d);
            let mut norm = Vec::with_capacity(d);
            for (k, ax) in bounds.axes.iter().enumerate() {
                let t = idx[k] as f64 / (dims[k] - 1) as f64;
                norm.push(t);
                phys.push(ax.low + (ax.high - ax.low) * t);
            }
            points_physical.push(phys);
            points_normalized.push(norm);
            // C-order increment: last axis fastest.
            for k in (0..d).rev() {
                idx[k] += 1;
                if idx[k] < dims[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(Grid { dims, points_physical, points_normalized, axes: bounds.axes.clone() })
    }

    pub fn len(&self) -> usize {
        self.points_physical.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points_physical.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn physical(&self, i: usize) -> &[f64] {
        &self.points_physical[i]
    }

    pub fn normalized(&self, i: usize) -> &[f64] {
        &self.points_normalized[i]
    }

    pub fn normalized_points(&self) -> &[Vec<f64>] {
        &self.points_normalized
    }

    /// Index of the grid point nearest to a physical-unit vector; exact
    /// midpoints resolve to the lower index.
    pub fn snap(&self, x_physical: &[f64]) -> usize {
        assert_eq!(x_physical.len(), self.dim(), "dimension mismatch");
        let mut flat = 0usize;
        for (k, ax) in self.axes.iter().enumerate() {
            let n = self.dims[k];
            let t = (x_physical[k] - ax.low) / (ax.high - ax.low);
            let s = (t * (n - 1) as f64).clamp(0.0, (n - 1) as f64);
            let base = s.floor();
            let i = if s - base > 0.5 { base as usize + 1 } else { base as usize };
            flat = flat * n + i.min(n - 1);
        }
        flat
    }
}

/// Which acquisition set the proposal came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetTag {
    Maximizer,
    Expander,
    ExploitFallback,
}

impl fmt::Display for SetTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetTag::Maximizer => write!(f, "maximizer"),
            SetTag::Expander => write!(f, "expander"),
            SetTag::ExploitFallback => write!(f, "exploit-fallback"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    /// Physical-unit candidate; always in the current safe set.
    pub params: Vec<f64>,
    /// upper − lower at the candidate.
    pub width: f64,
    pub set: SetTag,
    pub grid_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRecord {
    pub params: Vec<f64>,
    pub j: f64,
    pub aborted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SafeOptError {
    InvalidBounds(&'static str),
    InvalidBeta,
    DimensionMismatch,
    UnsafeSeed { seed_j: f64, j_min: f64 },
    /// No grid point currently certifies as safe: terminal condition.
    SafeSetEmpty,
    Gp(GpError),
}

impl fmt::Display for SafeOptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SafeOptError::InvalidBounds(msg) => write!(f, "invalid bounds: {msg}"),
            SafeOptError::InvalidBeta => write!(f, "beta must be positive"),
            SafeOptError::DimensionMismatch => write!(f, "dimension mismatch"),
            SafeOptError::UnsafeSeed { seed_j, j_min } => {
                write!(f, "seed performance {seed_j} violates the safety threshold {j_min}")
            }
            SafeOptError::SafeSetEmpty => write!(f, "safe set is empty (terminal)"),
            SafeOptError::Gp(e) => write!(f, "surrogate error: {e}"),
        }
    }
}

impl std::error::Error for SafeOptError {}

/// Full optimizer state: grid, surrogate, confidence bounds, and the
/// safe/maximizer masks (dense) plus the lazily memoized expander status.
#[derive(Debug, Clone)]
pub struct SafeOptState {
    grid: Grid,
    gp: GpModel,
    j_min: f64,
    beta: f64,
    observations: Vec<ObservationRecord>,
    means: Vec<f64>,
    vars: Vec<f64>,
    lowers: Vec<f64>,
    uppers: Vec<f64>,
    /// Whitened cross-covariance column L⁻¹k★ per grid point, reused by the
    /// rank-1 fictitious updates.
    whitened: Vec<Vec<f64>>,
    safe_mask: Vec<bool>,
    maximizer_mask: Vec<bool>,
    expander_memo: Vec<Option<bool>>,
}

impl SafeOptState {
    /// Seeds the optimizer with one safe measurement. The seed is snapped to
    /// the nearest grid point; callers must have measured at the snapped
    /// parameters.
    pub fn init(
        bounds: &ParamBounds,
        seed_params: &[f64],
        seed_j: f64,
        j_min: f64,
        kernel: &KernelParams,
        beta: f64,
    ) -> Result<SafeOptState, SafeOptError> {
        let grid = Grid::build(bounds)?;
        if kernel.dim() != grid.dim() || seed_params.len() != grid.dim() {
            return Err(SafeOptError::DimensionMismatch);
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(SafeOptError::InvalidBeta);
        }
        if !(seed_j >= j_min) {
            return Err(SafeOptError::UnsafeSeed { seed_j, j_min });
        }
        let seed_idx = grid.snap(seed_params);
        let gp = GpModel::fit(
            &[grid.normalized(seed_idx).to_vec()],
            &[seed_j],
            kernel,
        )
        .map_err(SafeOptError::Gp)?;
        let n = grid.len();
        let mut state = SafeOptState {
            grid,
            gp,
            j_min,
            beta,
            observations: Vec::new(),
            means: vec![0.0; n],
            vars: vec![0.0; n],
            lowers: vec![0.0; n],
            uppers: vec![0.0; n],
            whitened: vec![Vec::new(); n],
            safe_mask: vec![false; n],
            maximizer_mask: vec![false; n],
            expander_memo: vec![None; n],
        };
        state.observations.push(ObservationRecord {
            params: state.grid.physical(seed_idx).to_vec(),
            j: seed_j,
            aborted: false,
        });
        state.compute_sets()?;
        Ok(state)
    }

    /// Refreshes posteriors and masks over the whole grid. Grid queries are
    /// independent read-only GP evaluations and run in parallel.
    pub fn compute_sets(&mut self) -> Result<(), SafeOptError> {
        let gp = &self.gp;
        let results: Vec<_> = self
            .grid
            .normalized_points()
            .par_iter()
            .map(|x| gp.posterior_with_whitened(x))
            .collect();
        for (i, (p, v)) in results.into_iter().enumerate() {
            self.means[i] = p.mean;
            self.vars[i] = p.variance;
            let half = self.beta * p.variance.sqrt();
            self.lowers[i] = p.mean - half;
            self.uppers[i] = p.mean + half;
            self.whitened[i] = v;
        }
        let mut max_safe_lower = f64::NEG_INFINITY;
        for i in 0..self.grid.len() {
            self.safe_mask[i] = self.lowers[i] >= self.j_min;
            if self.safe_mask[i] && self.lowers[i] > max_safe_lower {
                max_safe_lower = self.lowers[i];
            }
        }
        for i in 0..self.grid.len() {
            self.maximizer_mask[i] = self.safe_mask[i] && self.uppers[i] >= max_safe_lower;
        }
        self.expander_memo = vec![None; self.grid.len()];
        if !self.safe_mask.iter().any(|&s| s) {
            return Err(SafeOptError::SafeSetEmpty);
        }
        Ok(())
    }

    /// Whether an optimistic fictitious observation (x_c, upper(x_c)) would
    /// lift some unsafe point's lower bound to j_min, decided by an exact
    /// rank-1 posterior update and memoized until the next measurement.
    pub fn expander_status(&mut self, c: usize) -> bool {
        if let Some(b) = self.expander_memo[c] {
            return b;
        }
        let verdict = self.expander_test(c);
        self.expander_memo[c] = Some(verdict);
        verdict
    }

    fn expander_test(&self, c: usize) -> bool {
        let noise = self.gp.noise_variance() + self.gp.jitter();
        let den = self.vars[c] + noise;
        if !(den > 0.0) {
            return false;
        }
        let sigma_c = self.vars[c].sqrt();
        let xc = self.grid.normalized(c);
        let vc = &self.whitened[c];
        for u in 0..self.grid.len() {
            if self.safe_mask[u] {
                continue;
            }
            // A fictitious observation can never push lower'(u) above
            // upper(u), so points with upper < j_min are unliftable.
            if self.uppers[u] < self.j_min {
                continue;
            }
            let vu = &self.whitened[u];
            let mut cross = 0.0;
            for (a, b) in vc.iter().zip(vu) {
                cross += a * b;
            }
            let k_post = kernel_eval(self.gp.kernel(), xc, self.grid.normalized(u)) - cross;
            let mean_new = self.means[u] + k_post * self.beta * sigma_c / den;
            let var_new = (self.vars[u] - k_post * k_post / den).max(0.0);
            if mean_new - self.beta * var_new.sqrt() >= self.j_min {
                return true;
            }
        }
        false
    }

    /// Widest-interval member of maximizers ∪ expanders; scanning safe
    /// points by descending width (ties: lowest index) makes the first hit
    /// the union's argmax. Falls back to the widest safe point if the union
    /// is empty.
    pub fn propose_next(&mut self) -> Result<Proposal, SafeOptError> {
        let mut order: Vec<usize> = (0..self.grid.len()).filter(|&i| self.safe_mask[i]).collect();
        if order.is_empty() {
            return Err(SafeOptError::SafeSetEmpty);
        }
        order.sort_by(|&a, &b| {
            let wa = self.uppers[a] - self.lowers[a];
            let wb = self.uppers[b] - self.lowers[b];
            wb.partial_cmp(&wa).unwrap().then(a.cmp(&b))
        });
        let mut chosen = (order[0], SetTag::ExploitFallback);
        for &i in &order {
            if self.maximizer_mask[i] {
                chosen = (i, SetTag::Maximizer);
                break;
            }
            if self.expander_status(i) {
                chosen = (i, SetTag::Expander);
                break;
            }
        }
        let (i, set) = chosen;
        Ok(Proposal {
            params: self.grid.physical(i).to_vec(),
            width: self.uppers[i] - self.lowers[i],
            set,
            grid_index: i,
        })
    }

    /// Folds one measurement into the surrogate and refreshes all masks.
    /// The parameters must lie on the grid (they are snapped to it). An
    /// emptied safe set is not an error here; it surfaces as terminal on
    /// the next proposal.
    pub fn add_measurement(
        &mut self,
        params: &[f64],
        j: f64,
        aborted: bool,
    ) -> Result<(), SafeOptError> {
        let idx = self.grid.snap(params);
        let x = self.grid.normalized(idx).to_vec();
        self.gp = self.gp.add_observation(&x, j).map_err(SafeOptError::Gp)?;
        self.observations.push(ObservationRecord {
            params: self.grid.physical(idx).to_vec(),
            j,
            aborted,
        });
        match self.compute_sets() {
            Ok(()) | Err(SafeOptError::SafeSetEmpty) => Ok(()),
            Err(e) => Err(e),
        }
    }

    /// Observation with the highest J; ties resolve to the earliest.
    pub fn best_observed(&self) -> (&[f64], f64) {
        let mut best = &self.observations[0];
        for o in &self.observations[1..] {
            if o.j > best.j {
                best = o;
            }
        }
        (&best.params, best.j)
    }

    pub fn safe_set_size(&self) -> usize {
        self.safe_mask.iter().filter(|&&s| s).count()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn gp(&self) -> &GpModel {
        &self.gp
    }

    pub fn j_min(&self) -> f64 {
        self.j_min
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn observations(&self) -> &[ObservationRecord] {
        &self.observations
    }

    pub fn safe_mask(&self) -> &[bool] {
        &self.safe_mask
    }

    pub fn maximizer_mask(&self) -> &[bool] {
        &self.maximizer_mask
    }

    pub fn lower(&self, i: usize) -> f64 {
        self.lowers[i]
    }

    pub fn upper(&self, i: usize) -> f64 {
        self.uppers[i]
    }

    pub fn width(&self, i: usize) -> f64 {
        self.uppers[i] - self.lowers[i]
    }
}

/// Posterior dump over the whole grid: `<names...>,mean,lower,upper,safe`,
/// one row per grid point in C order.
pub fn write_posterior_csv<W: Write>(
    state: &SafeOptState,
    names: &[&str],
    mut w: W,
) -> io::Result<()> {
    assert_eq!(names.len(), state.grid.dim(), "one column name per axis");
    writeln!(w, "{},mean,lower,upper,safe", names.join(","))?;
    for i in 0..state.grid.len() {
        for x in state.grid.physical(i) {
            write!(w, "{x},")?;
        }
        writeln!(w, "{},{},{},{}", state.means[i], state.lowers[i], state.uppers[i], state.safe_mask[i])?;
    }
    Ok(())
}
