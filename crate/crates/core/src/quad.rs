//! Quadrature: fixed Gauss–Legendre panels, adaptive refinement, and
//! improper-integral helpers for tails and endpoint singularities.
//!
//! Tail integrals `∫_a^∞ f` are evaluated over doubling segments; once the
//! per-segment contributions decay geometrically the remainder is bounded by
//! the observed ratio, so integrands with exponential or power decay
//! (exponent > 1) terminate without a closed tail form.  The returned bound
//! is one-sided and assumes monotone decay of segment contributions.

use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

// Positive half of the symmetric Gauss–Legendre rules on [-1, 1].
const X8: [f64; 4] = [
    1.83434642495649780e-1,
    5.25532409916328991e-1,
    7.96666477413626728e-1,
    9.60289856497536176e-1,
];
const W8: [f64; 4] = [
    3.62683783378361768e-1,
    3.13706645877887047e-1,
    2.22381034453374343e-1,
    1.01228536290376689e-1,
];
const X16: [f64; 8] = [
    9.50125098376374544e-2,
    2.81603550779258915e-1,
    4.58016777657227370e-1,
    6.17876244402643771e-1,
    7.55404408355002999e-1,
    8.65631202387831755e-1,
    9.44575023073232600e-1,
    9.89400934991649939e-1,
];
const W16: [f64; 8] = [
    1.89450610455068585e-1,
    1.82603415044923612e-1,
    1.69156519395002619e-1,
    1.49595988816576764e-1,
    1.24628971255534030e-1,
    9.51585116824925914e-2,
    6.22535239386477063e-2,
    2.71524594117540374e-2,
];

macro_rules! gauss_rule {
    ($name:ident, $xs:ident, $ws:ident) => {
        /// Fixed Gauss–Legendre panel on `[a, b]`.
        pub fn $name<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
            let c = 0.5 * (a + b);
            let h = 0.5 * (b - a);
            let mut acc = 0.0;
            for (&x, &w) in $xs.iter().zip($ws.iter()) {
                acc += w * (f(c + h * x) + f(c - h * x));
            }
            acc * h
        }
    };
}

gauss_rule!(gauss8, X8, W8);
gauss_rule!(gauss16, X16, W16);

/// Adaptive quadrature on a finite interval: bisects until the GL16 value of
/// a panel agrees with the sum of its halves within the local tolerance
/// share.  Returns the value and an error estimate.
///
/// Refinement stops once a panel's disagreement reaches the floating-point
/// noise floor of its own magnitude, so integrands with mild cancellation
/// noise cannot force the recursion into exponential splitting.
pub fn adaptive<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<(f64, f64), QuadError> {
    const MAX_DEPTH: usize = 28;
    #[allow(clippy::too_many_arguments)]
    fn rec<F: FnMut(f64) -> f64>(
        f: &mut F,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: usize,
        err: &mut f64,
        budget: &mut u32,
    ) -> Result<f64, QuadError> {
        let m = 0.5 * (a + b);
        let left = gauss16(&mut *f, a, m);
        let right = gauss16(&mut *f, m, b);
        let delta = left + right - whole;
        let noise_floor = 1e-14 * (left.abs() + right.abs());
        let width_floor = (b - a).abs() <= 1e-13 * (a.abs() + b.abs() + 1e-300);
        if delta.abs() <= tol.max(noise_floor)
            || depth >= MAX_DEPTH
            || width_floor
            || *budget == 0
        {
            *err += delta.abs() / 15.0;
            if depth >= MAX_DEPTH || *budget == 0 {
                *err += delta.abs();
            }
            return Ok(left + right + delta / 15.0);
        }
        *budget -= 1;
        let l = rec(f, a, m, left, 0.5 * tol, depth + 1, err, budget)?;
        let r = rec(f, m, b, right, 0.5 * tol, depth + 1, err, budget)?;
        Ok(l + r)
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(QuadError::NonFiniteLimit);
    }
    if a == b {
        return Ok((0.0, 0.0));
    }
    let whole = gauss16(&mut *f, a, b);
    let mut err = 0.0;
    let mut budget = 4000u32;
    let v = rec(f, a, b, whole, tol, 0, &mut err, &mut budget)?;
    if !v.is_finite() {
        return Err(QuadError::NonFiniteValue);
    }
    Ok((v, err))
}

/// Result of an improper-tail integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailIntegral {
    pub value: f64,
    /// One-sided bound on the neglected remainder.
    pub remainder_bound: f64,
    /// Where integration stopped.
    pub cutoff: f64,
}

/// `∫_a^∞ f(y) dy` over doubling segments `[a + w(2^k - 1), a + w(2^{k+1} - 1)]`.
///
/// Terminates when the segment contribution falls below `tol` and the
/// contributions are decaying; the remainder is then bounded by the geometric
/// extrapolation `s·ρ/(1-ρ)` of the observed ratio ρ.  Fails when the
/// contributions do not decay (integral presumed divergent).
pub fn tail_doubling<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    initial_width: f64,
    tol: f64,
) -> Result<TailIntegral, QuadError> {
    const MAX_SEGS: usize = 220;
    let mut total = 0.0;
    let mut lo = a;
    let mut w = initial_width.max(1e-300);
    let mut prev = f64::INFINITY;
    let mut rising = 0usize;
    for _ in 0..MAX_SEGS {
        let hi = lo + w;
        let s = gauss16(&mut *f, lo, hi);
        total += s;
        if s.abs() <= tol && s.abs() <= prev {
            let ratio = if prev.is_finite() && prev.abs() > 0.0 {
                (s.abs() / prev.abs()).min(0.9)
            } else {
                0.5
            };
            let bound = s.abs() * ratio / (1.0 - ratio);
            return Ok(TailIntegral {
                value: total,
                remainder_bound: bound.max(s.abs()),
                cutoff: hi,
            });
        }
        if s.abs() > prev.abs() {
            rising += 1;
            if rising > 8 {
                return Err(QuadError::TailNotDecaying { at: hi });
            }
        }
        prev = s.abs().max(1e-300);
        lo = hi;
        w *= 2.0;
    }
    Err(QuadError::TailNotDecaying { at: lo })
}

/// `∫_{-∞}^b f(y) dy` by mirrored doubling segments.
pub fn tail_doubling_down<F: FnMut(f64) -> f64>(
    f: &mut F,
    b: f64,
    initial_width: f64,
    tol: f64,
) -> Result<TailIntegral, QuadError> {
    let mut g = |y: f64| f(b - y);
    let t = tail_doubling(&mut g, 0.0, initial_width, tol)?;
    Ok(TailIntegral {
        value: t.value,
        remainder_bound: t.remainder_bound,
        cutoff: b - t.cutoff,
    })
}

/// `∫_a^b f` where `f` has an integrable singularity at the left endpoint
/// `a`: geometric panels shrinking toward `a`, with the unresolved sliver
/// bounded by ratio extrapolation.  Assumes `f` is smooth away from `a`.
pub fn left_singular<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<TailIntegral, QuadError> {
    const MAX_SEGS: usize = 200;
    if b <= a {
        return Ok(TailIntegral {
            value: 0.0,
            remainder_bound: 0.0,
            cutoff: a,
        });
    }
    let mut total = 0.0;
    let mut hi = b;
    let mut prev = f64::INFINITY;
    for _ in 0..MAX_SEGS {
        let lo = a + 0.5 * (hi - a);
        let s = gauss16(&mut *f, lo, hi);
        total += s;
        if s.abs() <= tol && s.abs() <= prev {
            let ratio = if prev.is_finite() && prev.abs() > 0.0 {
                (s.abs() / prev.abs()).min(0.9)
            } else {
                0.5
            };
            let bound = s.abs() * ratio / (1.0 - ratio);
            return Ok(TailIntegral {
                value: total,
                remainder_bound: bound.max(s.abs()),
                cutoff: lo,
            });
        }
        prev = s.abs().max(1e-300);
        hi = lo;
    }
    Err(QuadError::SingularityNotIntegrable { at: a })
}

/// Cumulative integrals of `f` between consecutive knots:
/// `out[i] = ∫_{knots[i]}^{knots[i+1]} f`, each by adaptive quadrature.
pub fn panel_integrals<F: FnMut(f64) -> f64>(
    f: &mut F,
    knots: &[f64],
    tol: f64,
) -> Result<(Vec<f64>, f64), QuadError> {
    let mut out = Vec::with_capacity(knots.len().saturating_sub(1));
    let mut err = 0.0;
    for w in knots.windows(2) {
        let (v, e) = adaptive(f, w[0], w[1], tol)?;
        out.push(v);
        err += e;
    }
    Ok((out, err))
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuadError {
    NonFiniteLimit,
    NonFiniteValue,
    TailNotDecaying { at: f64 },
    SingularityNotIntegrable { at: f64 },
}

impl fmt::Display for QuadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuadError::NonFiniteLimit => write!(f, "integration limit not finite"),
            QuadError::NonFiniteValue => write!(f, "integral evaluated to a non-finite value"),
            QuadError::TailNotDecaying { at } => {
                write!(f, "tail contributions not decaying near y = {at} (divergent integral?)")
            }
            QuadError::SingularityNotIntegrable { at } => {
                write!(f, "endpoint singularity at {at} did not resolve")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for QuadError {}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_is_exact_for_polynomials() {
        // GL16 integrates degree-31 polynomials exactly
        let v = gauss16(|x| x.powi(7) - 3.0 * x.powi(2) + 1.0, -1.0, 3.0);
        let exact = |x: f64| x.powi(8) / 8.0 - x.powi(3) + x;
        assert_abs_diff_eq!(v, exact(3.0) - exact(-1.0), epsilon = 1e-11);
    }

    #[test]
    fn adaptive_handles_peaks() {
        let mut f = |x: f64| (-(x * x) * 400.0).exp();
        let (v, _e) = adaptive(&mut f, -10.0, 10.0, 1e-12).unwrap();
        // sqrt(pi/400)
        assert_abs_diff_eq!(v, (core::f64::consts::PI / 400.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn exponential_tail() {
        let t = tail_doubling(&mut |y: f64| (-y).exp(), 1.0, 1.0, 1e-14).unwrap();
        assert_abs_diff_eq!(t.value, (-1.0f64).exp(), epsilon = 1e-12);
        assert!(t.remainder_bound < 1e-12);
    }

    #[test]
    fn power_tail() {
        // ∫_2^∞ y^-2 = 0.5
        let t = tail_doubling(&mut |y: f64| y.powi(-2), 2.0, 2.0, 1e-13).unwrap();
        assert_abs_diff_eq!(t.value + t.remainder_bound * 0.0, 0.5, epsilon = 1e-10);
    }

    #[test]
    fn divergent_tail_detected() {
        let r = tail_doubling(&mut |y: f64| 1.0 / y.max(1.0), 1.0, 1.0, 1e-12);
        assert!(matches!(r, Err(QuadError::TailNotDecaying { .. })));
    }

    #[test]
    fn left_singularity_sqrt() {
        // ∫_0^1 y^{-1/2} dy = 2
        let t = left_singular(&mut |y: f64| y.sqrt().recip(), 0.0, 1.0, 1e-13).unwrap();
        assert_abs_diff_eq!(t.value, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn down_tail() {
        // ∫_{-∞}^0 e^{y} dy = 1
        let t = tail_doubling_down(&mut |y: f64| y.exp(), 0.0, 1.0, 1e-14).unwrap();
        assert_abs_diff_eq!(t.value, 1.0, epsilon = 1e-12);
    }
}
