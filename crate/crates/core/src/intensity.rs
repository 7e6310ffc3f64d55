//! Intensity models of the planar Poisson limit.
//!
//! `G(t, y)` is the tail intensity: the expected number of points per unit
//! time above level `y` at time `t`.  The named kinds cover the three
//! extreme-value domains after normalization:
//!
//! - Fréchet:  `G(t,y) = t^{cα} (y − d·t^{c+1/α})^{−α}`, lower boundary `d`
//! - Weibull:  `G(t,y) = t^{−cα} (d·t^{c−1/α} − y)^{α}` for `y` below the
//!   moving boundary, lower boundary `−∞`
//! - Gumbel:   `G(t,y) = e^{−y} t^{−(c+d)}`, lower boundary `−∞`
//!
//! A model may additionally carry a scaling-class tag `(case, H, v)` under
//! which `G` decomposes as `H(y/v(t))·|v′(t)|/v(t)` (cases 1–2) or
//! `H(y−v(t))·|v′(t)|` (case 3); the closed-form engine consumes the tag,
//! and [`IntensityModel::validate`] checks the decomposition numerically.

use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::quad::{self, QuadError, TailIntegral};
use crate::rootfind;
use crate::types::Guarantee;

// ---------------------------------------------------------------------------
// Scaling classes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseTag {
    /// `v` nonincreasing, `v(1) = 0`, boundary `c = 0`.
    Case1,
    /// `v` nondecreasing, `v(1) = ∞`, boundary `c = −∞`, `H` supported on `x < 0`.
    Case2,
    /// Shift form, `v` nonincreasing, `v(1) = −∞`, boundary `c = −∞`.
    Case3,
}

/// Named monotone nonincreasing tail shapes `H`.
#[derive(Debug, Clone, PartialEq)]
pub enum HFamily {
    /// `K·x^{−α}` on `(0, ∞)` (power tail, case 1).
    PowerDecay { coeff: f64, alpha: f64 },
    /// `K·(−x)^{α}` for `x < 0`, zero for `x ≥ 0` (case 2; `α = K = 1` is the
    /// truncated-linear shape).
    NegPower { coeff: f64, alpha: f64 },
    /// `e^{−x}` on all of ℝ (case 3).
    ExpDecay,
    /// User-supplied nonincreasing piecewise-linear table; zero beyond the
    /// last knot.
    Table { points: Vec<(f64, f64)> },
}

impl HFamily {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            HFamily::PowerDecay { coeff, alpha } => {
                if x <= 0.0 {
                    f64::INFINITY
                } else {
                    coeff * x.powf(-alpha)
                }
            }
            HFamily::NegPower { coeff, alpha } => {
                if x >= 0.0 {
                    0.0
                } else {
                    coeff * (-x).powf(*alpha)
                }
            }
            HFamily::ExpDecay => (-x).exp(),
            HFamily::Table { points } => {
                if points.is_empty() {
                    return 0.0;
                }
                if x <= points[0].0 {
                    return points[0].1;
                }
                if x >= points[points.len() - 1].0 {
                    return 0.0;
                }
                let idx = points.partition_point(|p| p.0 <= x) - 1;
                let (x0, h0) = points[idx];
                let (x1, h1) = points[idx + 1];
                h0 + (h1 - h0) * (x - x0) / (x1 - x0)
            }
        }
    }
}

/// Named scaling functions `v(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VFamily {
    /// `K·(1 − t^β)^p`; `p > 0` fits case 1 (`v(1) = 0`), `p < 0` case 2.
    PowerOneMinusT { coeff: f64, beta: f64, p: f64 },
    /// `ln((1 − t^β)/β)`; case 3.
    LogScaled { beta: f64 },
}

impl VFamily {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            VFamily::PowerOneMinusT { coeff, beta, p } => {
                let s = 1.0 - t.powf(beta);
                if s <= 0.0 {
                    if p > 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    coeff * s.powf(p)
                }
            }
            VFamily::LogScaled { beta } => {
                let s = 1.0 - t.powf(beta);
                if s <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    (s / beta).ln()
                }
            }
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        match *self {
            VFamily::PowerOneMinusT { coeff, beta, p } => {
                let s = 1.0 - t.powf(beta);
                -coeff * p * beta * t.powf(beta - 1.0) * s.powf(p - 1.0)
            }
            VFamily::LogScaled { beta } => {
                let s = 1.0 - t.powf(beta);
                -beta * t.powf(beta - 1.0) / s
            }
        }
    }
}

/// A `(case, H, v)` decomposition of the intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormClass {
    pub case: CaseTag,
    pub h: HFamily,
    pub v: VFamily,
}

impl ClosedFormClass {
    /// The intensity implied by the decomposition.
    pub fn g(&self, t: f64, y: f64) -> f64 {
        let v = self.v.eval(t);
        let dv = self.v.deriv(t).abs();
        match self.case {
            CaseTag::Case1 | CaseTag::Case2 => {
                if v == 0.0 || !v.is_finite() {
                    return f64::NAN;
                }
                self.h.eval(y / v) * dv / v
            }
            CaseTag::Case3 => {
                if !v.is_finite() {
                    return f64::NAN;
                }
                self.h.eval(y - v) * dv
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Intensity kinds and the model
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum GKind {
    FrechetPower { alpha: f64, c: f64, d: f64 },
    WeibullPower { alpha: f64, c: f64, d: f64 },
    GumbelExp { c: f64, d: f64 },
    /// Evaluate through the attached class decomposition.
    ClassForm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityModel {
    pub kind: GKind,
    /// Constant lower envelope of the point-value domain.
    pub lower: Guarantee,
    pub class: Option<ClosedFormClass>,
}

impl IntensityModel {
    /// Gumbel-domain limit `G(t,y) = e^{−y} t^{−(c+d)}`, requires `c + d < 1`.
    pub fn gumbel(c: f64, d: f64) -> Result<Self, IntensityError> {
        let beta = 1.0 - (c + d);
        if beta <= 0.0 {
            return Err(IntensityError::BadParams {
                what: "gumbel requires c + d < 1",
            });
        }
        Ok(IntensityModel {
            kind: GKind::GumbelExp { c, d },
            lower: Guarantee::NegInf,
            class: Some(ClosedFormClass {
                case: CaseTag::Case3,
                h: HFamily::ExpDecay,
                v: VFamily::LogScaled { beta },
            }),
        })
    }

    /// Fréchet-domain limit; the homogeneous sub-case `c = d = 0` carries the
    /// case-1 tag with `H(x) = α·x^{−α}`, `v(t) = (1−t)^{1/α}`.
    pub fn frechet(alpha: f64, c: f64, d: f64) -> Result<Self, IntensityError> {
        if alpha <= 1.0 || c <= -1.0 / alpha {
            return Err(IntensityError::BadParams {
                what: "frechet requires alpha > 1 and c > -1/alpha",
            });
        }
        let class = if c == 0.0 && d == 0.0 {
            Some(ClosedFormClass {
                case: CaseTag::Case1,
                h: HFamily::PowerDecay {
                    coeff: alpha,
                    alpha,
                },
                v: VFamily::PowerOneMinusT {
                    coeff: 1.0,
                    beta: 1.0,
                    p: 1.0 / alpha,
                },
            })
        } else {
            None
        };
        Ok(IntensityModel {
            kind: GKind::FrechetPower { alpha, c, d },
            lower: Guarantee::Finite(d),
            class,
        })
    }

    /// Weibull-domain limit; for `d = 0`, `c < 1/α` the case-2 tag applies
    /// with `H(x) = α/(1−cα)·(−x)^α`, `v(t) = (1 − t^{1−cα})^{−1/α}`.
    pub fn weibull(alpha: f64, c: f64, d: f64) -> Result<Self, IntensityError> {
        if alpha <= 0.0 {
            return Err(IntensityError::BadParams {
                what: "weibull requires alpha > 0",
            });
        }
        let class = if d == 0.0 && c < 1.0 / alpha {
            let beta = 1.0 - c * alpha;
            Some(ClosedFormClass {
                case: CaseTag::Case2,
                h: HFamily::NegPower {
                    coeff: alpha / beta,
                    alpha,
                },
                v: VFamily::PowerOneMinusT {
                    coeff: 1.0,
                    beta,
                    p: -1.0 / alpha,
                },
            })
        } else {
            None
        };
        Ok(IntensityModel {
            kind: GKind::WeibullPower { alpha, c, d },
            lower: Guarantee::NegInf,
            class,
        })
    }

    /// A model defined only through its class decomposition.
    pub fn from_class(class: ClosedFormClass) -> Self {
        let lower = match class.case {
            CaseTag::Case1 => Guarantee::Finite(0.0),
            CaseTag::Case2 | CaseTag::Case3 => Guarantee::NegInf,
        };
        IntensityModel {
            kind: GKind::ClassForm,
            lower,
            class: Some(class),
        }
    }

    /// Tail intensity `G(t, y)`.  Returns `+∞` below the (possibly moving)
    /// boundary of the point domain.
    pub fn g(&self, t: f64, y: f64) -> f64 {
        match &self.kind {
            GKind::FrechetPower { alpha, c, d } => {
                let b = d * t.powf(c + 1.0 / alpha);
                if y <= b {
                    f64::INFINITY
                } else {
                    t.powf(c * alpha) * (y - b).powf(-alpha)
                }
            }
            GKind::WeibullPower { alpha, c, d } => {
                let b = if *d == 0.0 {
                    0.0
                } else {
                    d * t.powf(c - 1.0 / alpha)
                };
                if y >= b {
                    0.0
                } else {
                    t.powf(-c * alpha) * (b - y).powf(*alpha)
                }
            }
            GKind::GumbelExp { c, d } => (-y).exp() * t.powf(-(c + d)),
            GKind::ClassForm => self
                .class
                .as_ref()
                .map(|cl| cl.g(t, y))
                .unwrap_or(f64::NAN),
        }
    }

    /// `∫_{y0}^∞ G(t, y) dy` with truncation point and remainder bound.
    pub fn g_tail(&self, t: f64, y0: f64, tol: f64) -> Result<TailIntegral, QuadError> {
        let width = self.tail_width_hint(t, y0);
        quad::tail_doubling(&mut |y| self.g(t, y), y0, width, tol)
    }

    fn tail_width_hint(&self, t: f64, y0: f64) -> f64 {
        match &self.kind {
            GKind::GumbelExp { .. } => 1.0,
            GKind::FrechetPower { alpha, c, d } => {
                let b = d * t.powf(c + 1.0 / alpha);
                (y0 - b).abs().max(1e-6)
            }
            GKind::WeibullPower { .. } => (y0.abs()).max(1.0) * 0.5,
            GKind::ClassForm => (y0.abs()).max(1.0) * 0.5,
        }
    }

    /// Solves `G(t, y) = target` for `y` (the level with a prescribed tail
    /// intensity); used by the inverse-transform sampler.
    pub fn tail_quantile(&self, t: f64, target: f64) -> Result<f64, IntensityError> {
        if !(target > 0.0) {
            return Err(IntensityError::BadParams {
                what: "tail quantile target must be positive",
            });
        }
        match &self.kind {
            GKind::GumbelExp { c, d } => Ok(-(target.ln() + (c + d) * t.ln().max(-700.0))),
            GKind::FrechetPower { alpha, c, d } => {
                let b = d * t.powf(c + 1.0 / alpha);
                Ok(b + (t.powf(c * alpha) / target).powf(1.0 / alpha))
            }
            GKind::WeibullPower { alpha, c, d } => {
                let b = if *d == 0.0 {
                    0.0
                } else {
                    d * t.powf(c - 1.0 / alpha)
                };
                Ok(b - (target * t.powf(c * alpha)).powf(1.0 / alpha))
            }
            GKind::ClassForm => {
                // Bracket downward from a level with small G.
                let mut f = |y: f64| self.g(t, y) - target;
                let (a, b) = rootfind::expand_bracket(&mut f, 0.0, 1.0, -1.0, 200)
                    .or_else(|_| rootfind::expand_bracket(&mut f, 0.0, 1.0, 1.0, 200))
                    .map_err(|_| IntensityError::QuantileBracket { t, target })?;
                rootfind::brent(&mut f, a, b, 1e-12, 200)
                    .map_err(|_| IntensityError::QuantileBracket { t, target })
            }
        }
    }

    /// Numeric sanity check of the model invariants on a sample grid:
    /// `G(t, ·)` nonincreasing and vanishing at `+∞`, and agreement of the
    /// class decomposition with the direct kind where both exist.
    pub fn validate(&self) -> Result<(), IntensityError> {
        let ts = [0.05, 0.3, 0.5, 0.8, 0.95];
        for &t in &ts {
            let base = match self.lower {
                Guarantee::NegInf => -8.0,
                Guarantee::Finite(c) => c + 1e-6,
            };
            let mut prev = f64::INFINITY;
            for k in 0..40 {
                let y = base + k as f64 * 0.5;
                let g = self.g(t, y);
                if g.is_nan() {
                    return Err(IntensityError::NotEvaluable { t, y });
                }
                if g > prev * (1.0 + 1e-12) {
                    return Err(IntensityError::NotMonotone { t, y });
                }
                prev = g;
            }
            let far = base + 60.0;
            if self.g(t, far) > self.g(t, base + 20.0).max(1e-12) {
                return Err(IntensityError::TailNotVanishing { t });
            }
            if !matches!(self.kind, GKind::ClassForm) {
                if let Some(class) = &self.class {
                    for k in 0..30 {
                        let y = base + 0.3 + k as f64 * 0.7;
                        let a = self.g(t, y);
                        let b = class.g(t, y);
                        if a.is_finite() && b.is_finite() {
                            let scale = a.abs().max(b.abs()).max(1e-12);
                            if (a - b).abs() / scale > 1e-8 {
                                return Err(IntensityError::ClassMismatch { t, y });
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IntensityError {
    BadParams { what: &'static str },
    NotMonotone { t: f64, y: f64 },
    TailNotVanishing { t: f64 },
    NotEvaluable { t: f64, y: f64 },
    ClassMismatch { t: f64, y: f64 },
    QuantileBracket { t: f64, target: f64 },
}

impl fmt::Display for IntensityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntensityError::BadParams { what } => write!(f, "invalid parameters: {what}"),
            IntensityError::NotMonotone { t, y } => {
                write!(f, "G(t, .) increases at t = {t}, y = {y}")
            }
            IntensityError::TailNotVanishing { t } => {
                write!(f, "G(t, y) does not vanish for large y at t = {t}")
            }
            IntensityError::NotEvaluable { t, y } => {
                write!(f, "G not evaluable at t = {t}, y = {y}")
            }
            IntensityError::ClassMismatch { t, y } => write!(
                f,
                "class decomposition disagrees with intensity at t = {t}, y = {y}"
            ),
            IntensityError::QuantileBracket { t, target } => {
                write!(f, "could not bracket tail quantile at t = {t}, target {target}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for IntensityError {}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn homogeneous_kinds_match_their_classes() {
        for m in [
            IntensityModel::gumbel(0.0, 0.0).unwrap(),
            IntensityModel::frechet(2.0, 0.0, 0.0).unwrap(),
            IntensityModel::weibull(1.0, 0.0, 0.0).unwrap(),
        ] {
            m.validate().unwrap();
        }
    }

    #[test]
    fn gumbel_values() {
        let m = IntensityModel::gumbel(0.0, 0.0).unwrap();
        assert_abs_diff_eq!(m.g(0.3, 1.5), (-1.5f64).exp(), epsilon = 1e-15);
        let t = m.g_tail(0.4, 0.0, 1e-13).unwrap();
        assert_abs_diff_eq!(t.value, 1.0, epsilon = 1e-11);
        // quantile inverse
        let y = m.tail_quantile(0.4, 0.25).unwrap();
        assert_abs_diff_eq!(m.g(0.4, y), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn frechet_boundary_and_tail() {
        let m = IntensityModel::frechet(2.0, 0.0, 0.0).unwrap();
        assert_eq!(m.g(0.5, -1.0), f64::INFINITY);
        assert_abs_diff_eq!(m.g(0.5, 2.0), 0.25, epsilon = 1e-15);
        let t = m.g_tail(0.5, 1.0, 1e-13).unwrap();
        assert_abs_diff_eq!(t.value, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn weibull_support() {
        let m = IntensityModel::weibull(1.0, 0.0, 0.0).unwrap();
        assert_eq!(m.g(0.5, 0.5), 0.0);
        assert_abs_diff_eq!(m.g(0.5, -3.0), 3.0, epsilon = 1e-15);
        let y = m.tail_quantile(0.5, 2.0).unwrap();
        assert_abs_diff_eq!(y, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn inhomogeneous_gumbel_time_factor() {
        let m = IntensityModel::gumbel(0.25, 0.25).unwrap();
        assert_abs_diff_eq!(
            m.g(0.25, 0.0),
            0.25f64.powf(-0.5),
            epsilon = 1e-14
        );
        m.validate().unwrap();
    }
}
