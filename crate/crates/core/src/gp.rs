//! Exact Gaussian-process regression with an anisotropic Matérn ν = 3/2
//! kernel, used as the performance surrogate.
//!
//! The implementation is deliberately small and deterministic: a hand-rolled
//! row-by-row Cholesky (Cholesky–Banachiewicz) factors K + σ_n²·I, so that
//! appending one observation re-runs exactly the float operations the full
//! refactorization would run for the new row. Incremental updates are
//! therefore bitwise identical to a fresh fit, which keeps replays and
//! persisted optimizer state reproducible.
//!
//! Inputs are expected in normalized [0,1]^d coordinates (the caller maps
//! physical units); lengthscales are in the same normalized units. Targets
//! are centered by `prior_offset` (the first observation), so the prior mean
//! equals the safe seed's performance instead of zero.
//!
//! See Rasmussen & Williams, "Gaussian Processes for Machine Learning",
//! ch. 2–4 for the standard formulas.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    /// Per-dimension lengthscales, normalized input units. All positive.
    pub lengthscales: Vec<f64>,
    /// Prior standard deviation, performance units. Positive.
    pub signal_std: f64,
    /// Observation noise standard deviation, performance units.
    pub noise_std: f64,
}

impl KernelParams {
    pub fn validate(&self) -> Result<(), GpError> {
        if self.lengthscales.is_empty() || self.lengthscales.iter().any(|&l| !(l > 0.0)) {
            return Err(GpError::InvalidKernel("lengthscales must be positive"));
        }
        if !(self.signal_std > 0.0 && self.signal_std.is_finite()) {
            return Err(GpError::InvalidKernel("signal_std must be positive"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(GpError::InvalidKernel("noise_std must be non-negative"));
        }
        Ok(())
    }

    /// Default hyperparameters scaled from the seed performance: lengthscale
    /// 0.05 per normalized dimension (steep landscapes demand short scales),
    /// signal_std = |j_seed|, noise_std = 1% of that.
    pub fn for_seed(dim: usize, j_seed: f64) -> KernelParams {
        let s = j_seed.abs().max(1e-9);
        KernelParams {
            lengthscales: vec![0.05; dim],
            signal_std: s,
            noise_std: 0.01 * s,
        }
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }
}

/// Matérn ν = 3/2 covariance with per-dimension lengthscales:
/// k = signal_std²·(1 + √3·d)·exp(−√3·d), d = √(Σ((x1_i − x2_i)/ℓ_i)²).
pub fn kernel_eval(k: &KernelParams, x1: &[f64], x2: &[f64]) -> f64 {
    assert_eq!(x1.len(), k.lengthscales.len(), "dimension mismatch");
    assert_eq!(x2.len(), k.lengthscales.len(), "dimension mismatch");
    let mut d2 = 0.0;
    for i in 0..x1.len() {
        let r = (x1[i] - x2[i]) / k.lengthscales[i];
        d2 += r * r;
    }
    let sd = 3f64.sqrt() * d2.sqrt();
    k.signal_std * k.signal_std * (1.0 + sd) * (-sd).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub mean: f64,
    /// Floored at zero.
    pub variance: f64,
}

/// lower = mean − beta·σ, upper = mean + beta·σ.
pub fn confidence_bounds(p: &Posterior, beta: f64) -> (f64, f64) {
    debug_assert!(beta > 0.0);
    let half = beta * p.variance.sqrt();
    (p.mean - half, p.mean + half)
}

#[derive(Debug, Clone, PartialEq)]
pub enum GpError {
    InvalidKernel(&'static str),
    Empty,
    DimensionMismatch,
    NonFinite,
    /// Gram matrix not positive definite even after jitter escalation;
    /// usually duplicate inputs with zero noise.
    IllConditioned,
}

impl fmt::Display for GpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GpError::InvalidKernel(msg) => write!(f, "invalid kernel: {msg}"),
            GpError::Empty => write!(f, "at least one observation required"),
            GpError::DimensionMismatch => write!(f, "input dimension mismatch"),
            GpError::NonFinite => write!(f, "non-finite input or target"),
            GpError::IllConditioned => {
                write!(f, "Gram matrix not positive definite (duplicate inputs with zero noise?)")
            }
        }
    }
}

impl std::error::Error for GpError {}

/// Jitter escalation ladder relative to signal_std²: start tiny, multiply
/// by 10 until the factorization succeeds or the cap is hit.
const JITTER_FLOOR: f64 = 1e-12;
const JITTER_CAP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GpModel {
    inputs: Vec<Vec<f64>>,
    /// Centered targets (raw − prior_offset).
    targets: Vec<f64>,
    kernel: KernelParams,
    /// Lower-triangular Cholesky factor of K + (noise² + jitter)·I,
    /// stored as ragged rows (row i holds i+1 entries).
    chol: Vec<Vec<f64>>,
    /// (K + noise²I)⁻¹·targets via the factor.
    alpha: Vec<f64>,
    /// Centering constant: the first raw target.
    prior_offset: f64,
    /// Diagonal jitter actually used (0 when none was needed).
    jitter: f64,
}

/// Extends a ragged lower-triangular factor by one row for the symmetric
/// matrix whose new row is `row` (length n+1, diagonal last). Returns false
/// if the pivot is not strictly positive.
fn chol_push_row(chol: &mut Vec<Vec<f64>>, row: &[f64]) -> bool {
    let n = chol.len();
    debug_assert_eq!(row.len(), n + 1);
    let mut new_row = Vec::with_capacity(n + 1);
    for j in 0..n {
        let mut s = row[j];
        for k in 0..j {
            s -= new_row[k] * chol[j][k];
        }
        new_row.push(s / chol[j][j]);
    }
    let mut s = row[n];
    for k in 0..n {
        s -= new_row[k] * new_row[k];
    }
    if !(s > 0.0 && s.is_finite()) {
        return false;
    }
    new_row.push(s.sqrt());
    chol.push(new_row);
    true
}

/// Solves L·y = b by forward substitution.
fn forward_solve(chol: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= chol[i][k] * y[k];
        }
        y.push(s / chol[i][i]);
    }
    y
}

/// Solves Lᵀ·x = y by back substitution.
fn backward_solve(chol: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= chol[k][i] * x[k];
        }
        x[i] = s / chol[i][i];
    }
    x
}

impl GpModel {
    /// Fits an exact GP. Targets are centered by the first value; the Gram
    /// matrix gets escalating diagonal jitter only if K + noise²·I fails to
    /// factor as-is.
    pub fn fit(inputs: &[Vec<f64>], targets: &[f64], kernel: &KernelParams) -> Result<GpModel, GpError> {
        kernel.validate()?;
        if inputs.is_empty() || targets.is_empty() {
            return Err(GpError::Empty);
        }
        if inputs.len() != targets.len() {
            return Err(GpError::DimensionMismatch);
        }
        let dim = kernel.dim();
        for x in inputs {
            if x.len() != dim {
                return Err(GpError::DimensionMismatch);
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(GpError::NonFinite);
            }
        }
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(GpError::NonFinite);
        }

        let prior_offset = targets[0];
        let centered: Vec<f64> = targets.iter().map(|t| t - prior_offset).collect();
        let mut model = GpModel {
            inputs: inputs.to_vec(),
            targets: centered,
            kernel: kernel.clone(),
            chol: Vec::new(),
            alpha: Vec::new(),
            prior_offset,
            jitter: 0.0,
        };
        model.refactor_from(0.0)?;
        model.refresh_alpha();
        Ok(model)
    }

    /// Gram row for input index i against inputs 0..=i, with the diagonal
    /// regularization applied to the last entry.
    fn gram_row(&self, i: usize, jitter: f64) -> Vec<f64> {
        let noise_var = self.kernel.noise_std * self.kernel.noise_std;
        let mut row = Vec::with_capacity(i + 1);
        for j in 0..=i {
            let mut v = kernel_eval(&self.kernel, &self.inputs[i], &self.inputs[j]);
            if j == i {
                v += noise_var + jitter;
            }
            row.push(v);
        }
        row
    }

    /// Factors the full Gram matrix, escalating jitter from `start` through
    /// the ladder until it succeeds.
    fn refactor_from(&mut self, start: f64) -> Result<(), GpError> {
        let s2 = self.kernel.signal_std * self.kernel.signal_std;
        let mut jitter = start;
        loop {
            self.chol.clear();
            let mut ok = true;
            for i in 0..self.inputs.len() {
                let row = self.gram_row(i, jitter);
                if !chol_push_row(&mut self.chol, &row) {
                    ok = false;
                    break;
                }
            }
            if ok {
                self.jitter = jitter;
                return Ok(());
            }
            jitter = if jitter == 0.0 { JITTER_FLOOR * s2 } else { jitter * 10.0 };
            if jitter > JITTER_CAP * s2 {
                return Err(GpError::IllConditioned);
            }
        }
    }

    fn refresh_alpha(&mut self) {
        let y = forward_solve(&self.chol, &self.targets);
        self.alpha = backward_solve(&self.chol, &y);
    }

    /// Returns a model extended by one observation, equivalent to refitting
    /// on the enlarged dataset (bitwise, thanks to the row-append factor).
    pub fn add_observation(&self, x: &[f64], y: f64) -> Result<GpModel, GpError> {
        if x.len() != self.kernel.dim() {
            return Err(GpError::DimensionMismatch);
        }
        if x.iter().any(|v| !v.is_finite()) || !y.is_finite() {
            return Err(GpError::NonFinite);
        }
        let mut next = self.clone();
        next.inputs.push(x.to_vec());
        next.targets.push(y - next.prior_offset);
        let i = next.inputs.len() - 1;
        let row = next.gram_row(i, next.jitter);
        if !chol_push_row(&mut next.chol, &row) {
            // Pivot lost under the current jitter: refactor everything at
            // the next rung, exactly as a fresh fit would end up doing.
            next.chol.clear();
            let s2 = next.kernel.signal_std * next.kernel.signal_std;
            let bumped = if next.jitter == 0.0 {
                JITTER_FLOOR * s2
            } else {
                next.jitter * 10.0
            };
            if bumped > JITTER_CAP * s2 {
                return Err(GpError::IllConditioned);
            }
            next.refactor_from(bumped)?;
        }
        next.refresh_alpha();
        Ok(next)
    }

    /// Posterior mean and variance at one query point.
    pub fn posterior_at(&self, x: &[f64]) -> Posterior {
        let (p, _) = self.posterior_with_whitened(x);
        p
    }

    /// Posterior plus the whitened cross-covariance column v = L⁻¹·k★,
    /// which downstream code reuses for rank-1 what-if updates.
    pub fn posterior_with_whitened(&self, x: &[f64]) -> (Posterior, Vec<f64>) {
        assert_eq!(x.len(), self.kernel.dim(), "dimension mismatch");
        let n = self.inputs.len();
        let mut k_star = Vec::with_capacity(n);
        for xi in &self.inputs {
            k_star.push(kernel_eval(&self.kernel, x, xi));
        }
        let v = forward_solve(&self.chol, &k_star);
        let mut mean = self.prior_offset;
        for i in 0..n {
            mean += k_star[i] * self.alpha[i];
        }
        let prior_var = self.kernel.signal_std * self.kernel.signal_std;
        let explained: f64 = v.iter().map(|w| w * w).sum();
        let variance = (prior_var - explained).max(0.0);
        (Posterior { mean, variance }, v)
    }

    /// Pointwise posteriors over a batch of query points.
    pub fn posterior_batch(&self, xs: &[Vec<f64>]) -> Vec<Posterior> {
        xs.iter().map(|x| self.posterior_at(x)).collect()
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    /// Raw (uncentered) target values.
    pub fn raw_targets(&self) -> Vec<f64> {
        self.targets.iter().map(|t| t + self.prior_offset).collect()
    }

    pub fn kernel(&self) -> &KernelParams {
        &self.kernel
    }

    pub fn prior_offset(&self) -> f64 {
        self.prior_offset
    }

    pub fn noise_variance(&self) -> f64 {
        self.kernel.noise_std * self.kernel.noise_std
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }
}
