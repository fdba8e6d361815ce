//! Per-axis PI current controllers operating in dq0, producing inverter
//! modulation indices.
//!
//! The measured currents are rotated into dq0, one PI law acts per axis,
//! and the command is rotated back to abc and saturated at ±1. There is no
//! dq cross-coupling feedforward and no anti-windup; the integrators use
//! plain forward-Euler accumulation, one update per control period.

use crate::frames::{inverse_park, park, Angle, Dq0Frame, ThreePhase};

/// Tunable controller gains shared by the three dq0 axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiGains {
    pub kp: f64,
    pub ki: f64,
}

impl PiGains {
    pub fn new(kp: f64, ki: f64) -> Self {
        Self { kp, ki }
    }
}

/// Integrator state, one accumulator per dq0 axis (ampere·seconds).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PiState {
    pub integrators: Dq0Frame,
}

/// Controller output for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    /// Modulation indices after saturation, each in [−1, 1].
    pub m_abc: ThreePhase,
    /// Raw per-axis PI output before transformation and saturation.
    pub v_cmd_dq0: Dq0Frame,
}

/// Zeroed integrators.
pub fn pi_reset() -> PiState {
    PiState::default()
}

///// One control period: rotate the measurement, accumulate the error,
/// apply the PI law per axis, rotate back, saturate.
///
/// e = i_ref − park(i_meas, θ); integrators += e·dt;
/// v_cmd = kp·e + ki·integrators; m_abc = clamp(inverse_park(v_cmd, θ), ±1).
pub fn pi_step(
    g: PiGains,
    s: PiState,
    i_meas_abc: ThreePhase,
    i_ref_dq0: Dq0Frame,
    theta: Angle,
    dt: f64,
) -> (ControlOutput, PiState) {
    debug_assert!(dt > 0.0);
    let i_dq0 = park(i_meas_abc, theta);
    let e = Dq0Frame::new(
        i_ref_dq0.d - i_dq0.d,
        i_ref_dq0.q - i_dq0.q,
        i_ref_dq0.zero - i_dq0.zero,
    );
    let integ = Dq0Frame::new(
        s.integrators.d + e.d * dt,
        s.integrators.q + e.q * dt,
        s.integrators.zero + e.zero * dt,
    );
    let v_cmd = Dq0Frame::new(
        g.kp * e.d + g.ki * integ.d,
        g.kp * e.q + g.ki * integ.q,
        g.kp * e.zero + g.ki * integ.zero,
    );
    let m_abc = inverse_park(v_cmd, theta).clamp_symmetric(1.0);
    (ControlOutput { m_abc, v_cmd_dq0: v_cmd }, PiState { integrators: integ })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reset_zeroes_integrators() {
        let s = pi_reset();
        assert_eq!(s.integrators, Dq0Frame::ZERO);
        assert_eq!(pi_reset(), s);
    }

    #[test]
    fn zero_error_zero_integrators_gives_zero_modulation() {
        let (out, s2) = pi_step(
            PiGains::new(0.5, 100.0),
            pi_reset(),
            ThreePhase::ZERO,
            Dq0Frame::ZERO,
            Angle::new(0.3),
            50e-6,
        );
        assert_eq!(out.m_abc, ThreePhase::ZERO);
        assert_eq!(s2.integrators, Dq0Frame::ZERO);
    }

    #[test]
    fn unit_gain_plumbing_through_inverse_park() {
        // kp = 1, ki = 0, θ = 0, e = (1,0,0): the command is the first
        // column of the inverse Park matrix.
        let (out, _) = pi_step(
            PiGains::new(1.0, 0.0),
            pi_reset(),
            ThreePhase::ZERO,
            Dq0Frame::new(1.0, 0.0, 0.0),
            Angle::new(0.0),
            50e-6,
        );
        assert!((out.v_cmd_dq0.d - 1.0).abs() < 1e-15);
        assert!((out.m_abc.a - 1.0).abs() < 1e-12);
        assert!((out.m_abc.b + 0.5).abs() < 1e-12);
        assert!((out.m_abc.c + 0.5).abs() < 1e-12);
    }

    #[test]
    fn first_blackstart_step_with_default_gains() {
        // kp = 0.005, ki = 10, i_ref = (15,0,0), i_meas = 0, dt = 50 µs:
        // v_cmd_d = 0.005·15 + 10·15·50e−6 = 0.0825.
        let (out, s2) = pi_step(
            PiGains::new(0.005, 10.0),
            pi_reset(),
            ThreePhase::ZERO,
            Dq0Frame::new(15.0, 0.0, 0.0),
            Angle::new(0.0),
            50e-6,
        );
        assert!((out.v_cmd_dq0.d - 0.0825).abs() < 1e-12);
        assert!((s2.integrators.d - 15.0 * 50e-6).abs() < 1e-15);
    }

    #[test]
    fn saturation_clamps_every_phase() {
        let (out, _) = pi_step(
            PiGains::new(1.0, 0.0),
            pi_reset(),
            ThreePhase::ZERO,
            Dq0Frame::new(100.0, -50.0, 0.0),
            Angle::new(1.0),
            50e-6,
        );
        assert!(out.m_abc.max_abs() <= 1.0);
        assert!(out.m_abc.a.abs() == 1.0 || out.m_abc.b.abs() == 1.0 || out.m_abc.c.abs() == 1.0);
    }

    #[test]
    fn pure_proportional_has_no_state_drift() {
        let g = PiGains::new(0.02, 0.0);
        let meas = ThreePhase::new(3.0, -1.0, 0.5);
        let refs = Dq0Frame::new(15.0, 0.0, 0.0);
        let th = Angle::new(0.8);
        let (o1, s1) = pi_step(g, pi_reset(), meas, refs, th, 50e-6);
        let (o2, s2) = pi_step(g, s1, meas, refs, th, 50e-6);
        assert_eq!(o1.m_abc, o2.m_abc);
        // Integrators advance but do not feed back with ki = 0.
        assert_ne!(s1.integrators, s2.integrators);
    }

    #[test]
    fn setpoint_reached_integrators_hold() {
        let refs = Dq0Frame::new(15.0, 0.0, 0.0);
        let th = Angle::new(0.4);
        let meas = inverse_park(refs, th);
        let s0 = PiState { integrators: Dq0Frame::new(0.03, -0.01, 0.0) };
        let (_, s1) = pi_step(PiGains::new(0.005, 10.0), s0, meas, refs, th, 50e-6);
        let d = &s1.integrators;
        assert!((d.d - 0.03).abs() < 1e-12);
        assert!((d.q + 0.01).abs() < 1e-12);
        assert!(d.zero.abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn prop_modulation_always_saturated(kp in 0.0..10.0f64, ki in 0.0..1000.0f64,
                                            d in -100.0..100.0f64, q in -100.0..100.0f64,
                                            th in -10.0..10.0f64) {
            let (out, _) = pi_step(
                PiGains::new(kp, ki),
                PiState { integrators: Dq0Frame::new(d / 100.0, q / 100.0, 0.0) },
                ThreePhase::ZERO,
                Dq0Frame::new(d, q, 0.0),
                Angle::new(th),
                50e-6,
            );
            prop_assert!(out.m_abc.max_abs() <= 1.0);
        }

        #[test]
        fn prop_homogeneity_below_saturation(kp in 0.001..0.01f64, ki in 1.0..50.0f64,
                                             d in -5.0..5.0f64, q in -5.0..5.0f64,
                                             th in -10.0..10.0f64) {
            // Doubling both gains and halving the error leaves v_cmd unchanged.
            let r1 = Dq0Frame::new(d, q, 0.0);
            let r2 = Dq0Frame::new(d / 2.0, q / 2.0, 0.0);
            let (o1, _) = pi_step(PiGains::new(kp, ki), pi_reset(), ThreePhase::ZERO,
                                  r1, Angle::new(th), 50e-6);
            let (o2, _) = pi_step(PiGains::new(2.0 * kp, 2.0 * ki), pi_reset(), ThreePhase::ZERO,
                                  r2, Angle::new(th), 50e-6);
            prop_assert!((o1.v_cmd_dq0.d - o2.v_cmd_dq0.d).abs() <= 1e-12 * (1.0 + o1.v_cmd_dq0.d.abs()));
            prop_assert!((o1.v_cmd_dq0.q - o2.v_cmd_dq0.q).abs() <= 1e-12 * (1.0 + o1.v_cmd_dq0.q.abs()));
        }
    }
}
