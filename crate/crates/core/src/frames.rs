//! Amplitude-invariant Park transformation between the stationary abc frame
//! and the rotating dq0 frame.
//!
//! With the 2/3 (amplitude-invariant) scaling, a balanced cosine set of
//! amplitude A aligned with the rotation angle maps to (A, 0, 0), so grid-
//! frequency sinusoids become DC quantities in dq0.

use std::f64::consts::PI;

const PHASE_B: f64 = 2.0 * PI / 3.0;
const PHASE_C: f64 = 4.0 * PI / 3.0;

/// One sample of a three-phase signal (amperes or volts, context-dependent).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ThreePhase {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ThreePhase {
    pub const ZERO: Self = Self { a: 0.0, b: 0.0, c: 0.0 };

    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn as_array(self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self { a: v[0], b: v[1], c: v[2] }
    }

    /// Largest absolute component.
    pub fn max_abs(self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs())
    }

    /// Component-wise clamp to [-limit, limit].
    pub fn clamp_symmetric(self, limit: f64) -> Self {
        Self {
            a: self.a.clamp(-limit, limit),
            b: self.b.clamp(-limit, limit),
            c: self.c.clamp(-limit, limit),
        }
    }

    pub fn scale(self, k: f64) -> Self {
        Self { a: k * self.a, b: k * self.b, c: k * self.c }
    }
}

/// The same sample expressed in the rotating dq0 frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dq0Frame {
    pub d: f64,
    pub q: f64,
    pub zero: f64,
}

impl Dq0Frame {
    pub const ZERO: Self = Self { d: 0.0, q: 0.0, zero: 0.0 };

    pub fn new(d: f64, q: f64, zero: f64) -> Self {
        Self { d, q, zero }
    }

    pub fn as_array(self) -> [f64; 3] {
        [self.d, self.q, self.zero]
    }
}

/// Electrical angle in radians. Unbounded; trigonometry handles wrapping.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Angle {
    pub radians: f64,
}

impl Angle {
    pub fn new(radians: f64) -> Self {
        Self { radians }
    }
}

/// Open-loop reference angle θ = 2π·f_grid·t, so θ(0) = 0 at blackstart.
pub fn grid_angle(t: f64, f_grid: f64) -> Angle {
    Angle::new(2.0 * PI * f_grid * t)
}

/// abc → dq0 with amplitude-invariant scaling:
///
/// ```text
///       2  [  cos θ     cos(θ−2π/3)   cos(θ−4π/3) ]
/// M(θ) = − [ −sin θ    −sin(θ−2π/3)  −sin(θ−4π/3) ]
///       3  [  1/2        1/2           1/2        ]
/// ```
pub fn park(x: ThreePhase, theta: Angle) -> Dq0Frame {
    let th = theta.radians;
    let (ca, cb, cc) = (th.cos(), (th - PHASE_B).cos(), (th - PHASE_C).cos());
    let (sa, sb, sc) = (th.sin(), (th - PHASE_B).sin(), (th - PHASE_C).sin());
    Dq0Frame {
        d: 2.0 / 3.0 * (ca * x.a + cb * x.b + cc * x.c),
        q: -2.0 / 3.0 * (sa * x.a + sb * x.b + sc * x.c),
        zero: (x.a + x.b + x.c) / 3.0,
    }
}

/// dq0 → abc, the algebraic inverse of `park`: phase p is
/// `cos(θ−φ_p)·d − sin(θ−φ_p)·q + zero` with φ_p ∈ {0, 2π/3, 4π/3}.
pub fn inverse_park(x: Dq0Frame, theta: Angle) -> ThreePhase {
    let th = theta.radians;
    let phase = |phi: f64| (th - phi).cos() * x.d - (th - phi).sin() * x.q + x.zero;
    ThreePhase {
        a: phase(0.0),
        b: phase(PHASE_B),
        c: phase(PHASE_C),
    }
}
