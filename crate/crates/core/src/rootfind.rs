//! Bracketing and Brent root finding.

use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

/// Brent's method on a sign-changing bracket `[a, b]`.
pub fn brent<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<f64, RootError> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(RootError::NoSignChange { a, b });
    }
    if fa.abs() < fb.abs() {
        core::mem::swap(&mut a, &mut b);
        core::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut mflag = true;
    for _ in 0..max_iter {
        if fb == 0.0 || (b - a).abs() <= xtol {
            return Ok(b);
        }
        let mut s = if fa != fc && fb != fc {
            // inverse quadratic interpolation
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lo = 0.25 * (3.0 * a + b);
        let between = (s > lo.min(b)) && (s < lo.max(b));
        let cond = !between
            || (mflag && (s - b).abs() >= 0.5 * (b - c).abs())
            || (!mflag && (s - b).abs() >= 0.5 * (c - d).abs())
            || (mflag && (b - c).abs() < xtol)
            || (!mflag && (c - d).abs() < xtol);
        if cond {
            s = 0.5 * (a + b);
            mflag = true;
        } else {
            mflag = false;
        }
        let fs = f(s);
        d = c;
        c = b;
        fc = fb;
        if fa * fs < 0.0 {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            core::mem::swap(&mut a, &mut b);
            core::mem::swap(&mut fa, &mut fb);
        }
    }
    Err(RootError::NoConvergence { last: b })
}

/// Expands geometrically from `start` in direction `dir` (+1 / -1) until the
/// sign of `f` differs from `f(start)`, returning the bracket.
pub fn expand_bracket<F: FnMut(f64) -> f64>(
    mut f: F,
    start: f64,
    initial_step: f64,
    dir: f64,
    max_expand: usize,
) -> Result<(f64, f64), RootError> {
    let f0 = f(start);
    if f0 == 0.0 {
        return Ok((start, start));
    }
    let mut step = initial_step.abs() * dir.signum();
    let mut prev = start;
    for _ in 0..max_expand {
        let x = prev + step;
        let fx = f(x);
        if fx == 0.0 || fx * f0 < 0.0 {
            return Ok(if prev < x { (prev, x) } else { (x, prev) });
        }
        prev = x;
        step *= 2.0;
    }
    Err(RootError::BracketNotFound { from: start })
}

/// Expands from `a` toward `b` by repeated halving of the remaining gap
/// (`x_k = b - (b - a)/2^k`) until the sign changes; for roots confined to a
/// known open interval.
pub fn bracket_within<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    max_steps: usize,
) -> Result<(f64, f64), RootError> {
    let fa = f(a);
    if fa == 0.0 {
        return Ok((a, a));
    }
    let mut prev = a;
    for k in 1..=max_steps {
        let x = b - (b - a) / (1u64 << k.min(62)) as f64;
        let fx = f(x);
        if fx == 0.0 || fx * fa < 0.0 {
            return Ok((prev, x));
        }
        prev = x;
    }
    Err(RootError::BracketNotFound { from: a })
}

#[derive(Debug, Clone, PartialEq)]
pub enum RootError {
    NoSignChange { a: f64, b: f64 },
    BracketNotFound { from: f64 },
    NoConvergence { last: f64 },
}

impl fmt::Display for RootError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RootError::NoSignChange { a, b } => write!(f, "no sign change on [{a}, {b}]"),
            RootError::BracketNotFound { from } => {
                write!(f, "no sign change found expanding from {from}")
            }
            RootError::NoConvergence { last } => write!(f, "root iteration stalled near {last}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for RootError {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_cubic() {
        let r = brent(|x| x * x * x - 2.0 * x - 5.0, 2.0, 3.0, 1e-14, 100).unwrap();
        assert!((r - 2.0945514815423265).abs() < 1e-12);
    }

    #[test]
    fn expand_and_solve() {
        let f = |x: f64| x.exp() - 10.0;
        let (a, b) = expand_bracket(f, 0.0, 0.5, 1.0, 60).unwrap();
        let r = brent(f, a, b, 1e-14, 100).unwrap();
        assert!((r - 10.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn bracket_within_interval() {
        // root at -1.1656… of 3x + 4 ln(2/(2+x)) inside (-2, 0)
        let f = |x: f64| 3.0 * x + 4.0 * (2.0 / (2.0 + x)).ln();
        let (a, b) = bracket_within(f, -2.0 + 1e-9, 0.0, 60).unwrap();
        let r = brent(f, a, b, 1e-14, 200).unwrap();
        assert!((r - (-1.1656232877316226)).abs() < 1e-10);
    }
}
