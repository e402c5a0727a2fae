//! Bounded rational reconstruction of reals.

use num_rational::Rational64;

/// Closest rational to `x` with denominator at most `max_den`.
///
/// Walks the continued-fraction convergents and finishes with the best
/// semiconvergent, so the result is the best approximation in that class.
/// Returns `None` for non-finite input or when a numerator would overflow.
pub fn best_rational(x: f64, max_den: i64) -> Option<Rational64> {
    if !x.is_finite() || max_den < 1 {
        return None;
    }
    let (mut p0, mut q0, mut p1, mut q1) = (0i128, 1i128, 1i128, 0i128);
    let mut r = x;
    let max_den = max_den as i128;
    loop {
        let a = r.floor();
        if a.abs() > 1e18 {
            return None;
        }
        let a = a as i128;
        let q2 = q0 + a * q1;
        if q2 > max_den {
            break;
        }
        let p2 = p0 + a * p1;
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = r - a as f64;
        if frac == 0.0 || (p1 as f64 / q1 as f64) == x {
            break;
        }
        r = 1.0 / frac;
    }
    // Best semiconvergent below the bound versus the last convergent.
    let (num, den) = if q1 == 0 {
        (p1, 1)
    } else {
        let k = (max_den - q0) / q1;
        let (ps, qs) = (p0 + k * p1, q0 + k * q1);
        if k > 0 && (ps as f64 / qs as f64 - x).abs() < (p1 as f64 / q1 as f64 - x).abs() {
            (ps, qs)
        } else {
            (p1, q1)
        }
    };
    let num = i64::try_from(num).ok()?;
    let den = i64::try_from(den).ok()?;
    Some(Rational64::new(num, den))
}

pub fn to_f64(r: &Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}
