//! Continuous LTI state-space models of the simulated circuits and their
//! time stepping.
//!
//! Two topologies are provided: a three-phase series RL branch (3 states)
//! and an inverter LC filter feeding an ohmic-inductive load (9 states,
//! three identical uncoupled per-phase blocks). Stepping is exact
//! zero-order-hold discretization through the matrix exponential by
//! default, with fixed-step RK4 as an independent cross-check backend.

use crate::expm::expm;
use nalgebra::{DMatrix, DVector};
use std::fmt;

/// Electrical parameters of the inverter/filter/load circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    /// DC link voltage, volts.
    pub v_dc: f64,
    /// Grid frequency, hertz.
    pub f_grid: f64,
    /// Filter inductance per phase, henries.
    pub l_filt: f64,
    /// Filter capacitance per phase, farads.
    pub c_filt: f64,
    /// Filter series resistance per phase, ohms.
    pub r_filt: f64,
    /// Load resistance per phase, ohms.
    pub r_load: f64,
    /// Load inductance per phase, henries.
    pub l_load: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            v_dc: 1000.0,
            f_grid: 50.0,
            l_filt: 2e-3,
            c_filt: 20e-6,
            r_filt: 0.0,
            r_load: 20.0,
            l_load: 1e-3,
        }
    }
}

impl GridParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        if !(self.v_dc > 0.0 && self.f_grid > 0.0) {
            return Err(PlantError::InvalidParameter("v_dc and f_grid must be positive"));
        }
        if !(self.l_filt > 0.0 && self.c_filt > 0.0 && self.l_load > 0.0) {
            return Err(PlantError::InvalidParameter("l_filt, c_filt, l_load must be positive"));
        }
        if self.r_filt < 0.0 || self.r_load < 0.0 {
            return Err(PlantError::InvalidParameter("resistances must be non-negative"));
        }
        if [self.v_dc, self.f_grid, self.l_filt, self.c_filt, self.r_filt, self.r_load, self.l_load]
            .iter()
            .any(|v| !v.is_finite())
        {
            return Err(PlantError::InvalidParameter("parameters must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlantError {
    InvalidParameter(&'static str),
    /// The matrix exponential failed, signalling an ill-conditioned model.
    IllConditioned,
}

impl fmt::Display for PlantError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlantError::InvalidParameter(msg) => write!(f, "invalid plant parameter: {msg}"),
            PlantError::IllConditioned => write!(f, "matrix exponential failed; model is ill-conditioned"),
        }
    }
}

impl std::error::Error for PlantError {}

/// Continuous model dx/dt = A·x + B·u.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    pub a_matrix: DMatrix<f64>,
    pub b_matrix: DMatrix<f64>,
    pub state_labels: Vec<&'static str>,
}

impl PlantModel {
    pub fn n_states(&self) -> usize {
        self.a_matrix.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b_matrix.ncols()
    }
}

/// Exact discrete form x' = a_d·x + b_d·u with inputs held over `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePlant {
    pub a_d: DMatrix<f64>,
    pub b_d: DMatrix<f64>,
    pub dt: f64,
}

/// State vector plus simulation time.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub x: DVector<f64>,
    pub t: f64,
}

impl PlantState {
    /// All-zero state at t = 0 (blackstart).
    pub fn zero(n_states: usize) -> Self {
        Self { x: DVector::zeros(n_states), t: 0.0 }
    }
}

/// Three independent series RL branches: state [i_a, i_b, i_c], input the
/// phase voltages. A = diag(−r_p/l_p), B = diag(1/l_p).
pub fn build_rl_plant(r: [f64; 3], l: [f64; 3]) -> Result<PlantModel, PlantError> {
    if l.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(PlantError::InvalidParameter("inductances must be positive"));
    }
    if r.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(PlantError::InvalidParameter("resistances must be non-negative"));
    }
    let mut a = DMatrix::zeros(3, 3);
    let mut b = DMatrix::zeros(3, 3);
    for p in 0..3 {
        a[(p, p)] = -r[p] / l[p];
        b[(p, p)] = 1.0 / l[p];
    }
    Ok(PlantModel { a_matrix: a, b_matrix: b, state_labels: vec!["i_a", "i_b", "i_c"] })
}

/// Inverter LC filter with ohmic-inductive load, three uncoupled phase legs.
/// State layout [i_f,abc | v_c,abc | i_l,abc]; input the inverter phase
/// voltages. Per phase:
///
/// ```text
/// di_f/dt = (v_inv − v_c − r_filt·i_f) / l_filt
/// dv_c/dt = (i_f − i_l) / c_filt
/// di_l/dt = (v_c − r_load·i_l) / l_load
/// ```
pub fn build_lc_plant(p: &GridParams) -> Result<PlantModel, PlantError> {
    p.validate()?;
    let mut a = DMatrix::zeros(9, 9);
    let mut b = DMatrix::zeros(9, 3);
    for ph in 0..3 {
        let (i_f, v_c, i_l) = (ph, 3 + ph, 6 + ph);
        a[(i_f, i_f)] = -p.r_filt / p.l_filt;
        a[(i_f, v_c)] = -1.0 / p.l_filt;
        a[(v_c, i_f)] = 1.0 / p.c_filt;
        a[(v_c, i_l)] = -1.0 / p.c_filt;
        a[(i_l, v_c)] = 1.0 / p.l_load;
        a[(i_l, i_l)] = -p.r_load / p.l_load;
        b[(i_f, ph)] = 1.0 / p.l_filt;
    }
    Ok(PlantModel {
        a_matrix: a,
        b_matrix: b,
        state_labels: vec![
            "i_f_a", "i_f_b", "i_f_c", "v_c_a", "v_c_b", "v_c_c", "i_l_a", "i_l_b", "i_l_c",
        ],
    })
}

/// Exact ZOH discretization: [a_d, b_d] is read off the matrix exponential
/// of the augmented matrix [[A, B], [0, 0]]·dt.
pub fn zoh_discretize(m: &PlantModel, dt: f64) -> Result<DiscretePlant, PlantError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(PlantError::InvalidParameter("dt must be positive"));
    }
    let n = m.n_states();
    let ni = m.n_inputs();
    let mut aug = DMatrix::zeros(n + ni, n + ni);
    aug.view_mut((0, 0), (n, n)).copy_from(&(&m.a_matrix * dt));
    aug.view_mut((0, n), (n, ni)).copy_from(&(&m.b_matrix * dt));
    let e = expm(&aug).ok_or(PlantError::IllConditioned)?;
    Ok(DiscretePlant {
        a_d: e.view((0, 0), (n, n)).into_owned(),
        b_d: e.view((0, n), (n, ni)).into_owned(),
        dt,
    })
}

/// One exact discrete step: x' = a_d·x + b_d·u, t' = t + dt.
pub fn step_zoh(d: &DiscretePlant, s: &PlantState, u: &[f64]) -> PlantState {
    debug_assert_eq!(u.len(), d.b_d.ncols());
    let u = DVector::from_column_slice(u);
    PlantState { x: &d.a_d * &s.x + &d.b_d * u, t: s.t + d.dt }
}

/// Classical RK4 applied `substeps` times over `dt` with the input held
/// constant (ZOH semantics), as an independent check on `step_zoh`.
pub fn step_rk4(m: &PlantModel, s: &PlantState, u: &[f64], dt: f64, substeps: u32) -> PlantState {
    assert!(substeps >= 1, "substeps must be at least 1");
    debug_assert_eq!(u.len(), m.n_inputs());
    let u = DVector::from_column_slice(u);
    let bu = &m.b_matrix * &u;
    let f = |x: &DVector<f64>| &m.a_matrix * x + &bu;
    let h = dt / substeps as f64;
    let mut x = s.x.clone();
    for _ in 0..substeps {
        let k1 = f(&x);
        let k2 = f(&(&x + &k1 * (h / 2.0)));
        let k3 = f(&(&x + &k2 * (h / 2.0)));
        let k4 = f(&(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    PlantState { x, t: s.t + dt }
}
