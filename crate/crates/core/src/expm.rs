//! Dense matrix exponential via scaling-and-squaring with the diagonal
//! Padé approximant of order 13 (Higham, "The scaling and squaring method
//! for the matrix exponential revisited", SIAM J. Matrix Anal. Appl. 2005).
//!
//! The matrices here are small (≤ 12×12 augmented plant matrices), so the
//! single order-13 approximant with norm-based scaling is used throughout
//! rather than the full order-selection ladder.

use nalgebra::DMatrix;

/// Padé-13 numerator coefficients b_0..b_13.
const B: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Largest 1-norm for which the order-13 approximant meets double precision.
const THETA_13: f64 = 5.371920351148152;

fn one_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// exp(A) for a square matrix with finite entries.
///
/// Returns `None` if the Padé denominator is singular or the result is
/// non-finite, which signals an ill-conditioned input.
pub fn expm(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    assert_eq!(a.nrows(), a.ncols(), "expm requires a square matrix");
    let n = a.nrows();
    if a.iter().any(|v| !v.is_finite()) {
        return None;
    }

    let norm = one_norm(a);
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as u32
    } else {
        0
    };
    let a = a * 2f64.powi(-(s as i32));

    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let eye = DMatrix::<f64>::identity(n, n);

    // U = A·(A6·(b13·A6 + b11·A4 + b9·A2) + b7·A6 + b5·A4 + b3·A2 + b1·I)
    let u_inner = &a6 * (&a6 * B[13] + &a4 * B[11] + &a2 * B[9])
        + &a6 * B[7]
        + &a4 * B[5]
        + &a2 * B[3]
        + &eye * B[1];
    let u = &a * u_inner;
    // V = A6·(b12·A6 + b10·A4 + b8·A2) + b6·A6 + b4·A4 + b2·A2 + b0·I
    let v = &a6 * (&a6 * B[12] + &a4 * B[10] + &a2 * B[8])
        + &a6 * B[6]
        + &a4 * B[4]
        + &a2 * B[2]
        + &eye * B[0];

    // (V − U)·exp(A) = (V + U)
    let mut r = (&v - &u).lu().solve(&(&v + &u))?;
    for _ in 0..s {
        r = &r * &r;
    }
    if r.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(r)
}
