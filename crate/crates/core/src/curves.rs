//! Tabulated optimal stopping curves and threshold surfaces.
//!
//! A [`StoppingCurveFamily`] holds the levels `u^0 … u^m` on a shared
//! `t × x` grid: `u^j(t, x)` is the supremum expected reward using `j` stops
//! strictly after time `t` with guarantee value `x`, and `u^j(t)` is the
//! guarantee-free curve `u^j(t, c)`.  Level 0 is the identity `u^0(t,x) = x`
//! and is not stored.  A [`ThresholdFamily`] carries the derived acceptance
//! boundaries `γ^j(t, x) = ξ^{j-1}(t, u^j(t, x))`, where `ξ^j` inverts
//! `u^j(t, ·)` in the value argument.
//!
//! Interpolation is monotone piecewise-linear in each argument.  Queries
//! outside the tabulated `x` range use constant extension below and
//! identity-slope extension above; inverse queries outside the tabulated
//! `u` range clamp to the range endpoints.  Both set a flag, since the
//! thresholds diverge near `t = 1` and extrapolation there is meaningless.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::grid;
use crate::types::{Guarantee, TimePoint};

/// One tabulated level `u^j` (or `γ^j`).
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSurface {
    /// Row-major `[t][x]`, length `t_grid.len() * x_grid.len()`.
    pub values: Vec<f64>,
    /// The guarantee-free curve at `x = c` (may hold `-∞` at `t = 1` for
    /// models with boundary `-∞`).
    pub boundary: Vec<f64>,
}

impl LevelSurface {
    #[inline]
    pub fn row(&self, ti: usize, width: usize) -> &[f64] {
        &self.values[ti * width..(ti + 1) * width]
    }
}

/// Diagnostics attached to a solved family.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FamilyDiagnostics {
    /// Terminal offset ε: integration seeded at `1 - ε`.
    pub terminal_offset: f64,
    /// "closed-form" or "asymptotic".
    pub seed_mode: String,
    /// For `c = -∞`, `j ≥ 2`: max divergence over the grid of the two
    /// bracket solves enclosing the boundary seed.
    pub boundary_seed_bracket: Option<f64>,
    /// `|u(1-ε) - u(1-ε/2 path)|` style seed sensitivity when requested.
    pub seed_sensitivity: Option<f64>,
    /// Largest one-sided tail remainder bound encountered in the RHS.
    pub max_tail_bound: f64,
    /// Number of RHS evaluations that clamped below the tabulated inverse.
    pub clamped_low: u64,
    /// Free-form notes (assumptions that were not verified numerically).
    pub notes: Vec<String>,
}

/// Tabulated optimal `j`-stopping curves, `j = 1 … m`.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingCurveFamily {
    pub m: usize,
    /// Lower boundary `c` of the point-value domain.
    pub lower: Guarantee,
    /// Strictly increasing, refined near 1; last node is exactly 1.
    pub t_grid: Vec<f64>,
    /// Strictly increasing finite guarantee values.  When `c` is finite the
    /// first node equals `c` and the boundary curve is column 0.
    pub x_grid: Vec<f64>,
    /// Levels `j = 1 …= m` (index `j - 1`).
    pub levels: Vec<LevelSurface>,
    pub diagnostics: FamilyDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalFlags {
    /// Query fell outside the tabulated range and was clamped/extended.
    pub extrapolated: bool,
}

impl StoppingCurveFamily {
    #[inline]
    pub fn width(&self) -> usize {
        self.x_grid.len()
    }

    /// Interpolates the level-`j` guarantee-free curve at `t`.
    pub fn boundary_at(&self, j: usize, t: f64) -> Result<f64, CurveError> {
        self.check_level(j)?;
        if j == 0 {
            return Ok(self.lower.as_f64());
        }
        let b = &self.levels[j - 1].boundary;
        Ok(interp_t_guarded(&self.t_grid, b, t))
    }

    /// `u^j(t, x)` with monotone piecewise-bilinear interpolation.
    pub fn eval(&self, j: usize, t: f64, x: Guarantee) -> Result<(f64, EvalFlags), CurveError> {
        self.check_level(j)?;
        match x {
            Guarantee::NegInf => {
                if !self.lower.is_neg_inf() {
                    return Err(CurveError::BelowBoundary {
                        x: f64::NEG_INFINITY,
                        c: self.lower.as_f64(),
                    });
                }
                if j == 0 {
                    return Ok((f64::NEG_INFINITY, EvalFlags::default()));
                }
                Ok((self.boundary_at(j, t)?, EvalFlags::default()))
            }
            Guarantee::Finite(xv) => {
                if Guarantee::Finite(xv) < self.lower {
                    return Err(CurveError::BelowBoundary {
                        x: xv,
                        c: self.lower.as_f64(),
                    });
                }
                if j == 0 {
                    return Ok((xv, EvalFlags::default()));
                }
                let mut flags = EvalFlags::default();
                let xs = &self.x_grid;
                let top = *xs.last().unwrap();
                if xv > top {
                    // identity-slope extension: the guarantee dominates far
                    // above the tabulated range
                    let base = self.eval(j, t, Guarantee::Finite(top))?.0;
                    flags.extrapolated = true;
                    return Ok((base + (xv - top), flags));
                }
                if xv < xs[0] {
                    flags.extrapolated = true;
                    let v = self.eval(j, t, Guarantee::Finite(xs[0]))?.0;
                    let floor = if self.lower.is_neg_inf() {
                        self.boundary_at(j, t)?
                    } else {
                        f64::NEG_INFINITY
                    };
                    return Ok((v.max(floor), flags));
                }
                let surf = &self.levels[j - 1];
                let w = self.width();
                let ti = grid::locate(&self.t_grid, t);
                let xi = grid::locate(xs, xv);
                let v = bilinear(
                    &self.t_grid,
                    xs,
                    surf,
                    w,
                    ti,
                    xi,
                    t,
                    xv,
                );
                Ok((v, flags))
            }
        }
    }

    /// Inverse curve `ξ^j(t, y)`: the guarantee `x` with `u^j(t, x) = y`.
    /// Clamps to the tabulated `x` range below and extends with identity
    /// slope above, flagging both.
    pub fn xi(&self, j: usize, t: f64, y: f64) -> Result<(f64, EvalFlags), CurveError> {
        self.check_level(j)?;
        if j == 0 {
            return Ok((y, EvalFlags::default()));
        }
        let row = self.row_at(j, t);
        let n = row.len();
        let mut flags = EvalFlags::default();
        if y > row[n - 1] {
            flags.extrapolated = true;
            return Ok((self.x_grid[n - 1] + (y - row[n - 1]), flags));
        }
        if y < row[0] {
            flags.extrapolated = true;
            return Ok((self.x_grid[0], flags));
        }
        let (x, clamped) = grid::inverse_interp(&self.x_grid, &row, y);
        flags.extrapolated |= clamped;
        Ok((x, flags))
    }

    /// The interpolated row `u^j(t, x_k)` over the x grid, made nondecreasing.
    pub fn row_at(&self, j: usize, t: f64) -> Vec<f64> {
        debug_assert!(j >= 1 && j <= self.m);
        let surf = &self.levels[j - 1];
        let w = self.width();
        let ti = grid::locate(&self.t_grid, t);
        let (t0, t1) = (self.t_grid[ti], self.t_grid[ti + 1]);
        let frac = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let r0 = surf.row(ti, w);
        let r1 = surf.row(ti + 1, w);
        let mut out = Vec::with_capacity(w);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..w {
            let mut v = r0[k] + frac * (r1[k] - r0[k]);
            if v < prev {
                v = prev;
            }
            out.push(v);
            prev = v;
        }
        out
    }

    fn check_level(&self, j: usize) -> Result<(), CurveError> {
        if j > self.m {
            Err(CurveError::LevelOutOfRange { j, m: self.m })
        } else {
            Ok(())
        }
    }
}

/// Interpolate a boundary curve in `t`, guarding the final interval where
/// the node value at `t = 1` may be `-∞`.
fn interp_t_guarded(t_grid: &[f64], values: &[f64], t: f64) -> f64 {
    let i = grid::locate(t_grid, t);
    let (v0, v1) = (values[i], values[i + 1]);
    if t <= t_grid[i] {
        return v0;
    }
    if v1 == f64::NEG_INFINITY {
        // inside the terminal layer: clamp to the last finite node
        return v0;
    }
    if t >= t_grid[i + 1] {
        return v1;
    }
    let w = (t - t_grid[i]) / (t_grid[i + 1] - t_grid[i]);
    v0 + w * (v1 - v0)
}

#[allow(clippy::too_many_arguments)]
fn bilinear(
    t_grid: &[f64],
    x_grid: &[f64],
    surf: &LevelSurface,
    width: usize,
    ti: usize,
    xi: usize,
    t: f64,
    x: f64,
) -> f64 {
    let ft = ((t - t_grid[ti]) / (t_grid[ti + 1] - t_grid[ti])).clamp(0.0, 1.0);
    let fx = ((x - x_grid[xi]) / (x_grid[xi + 1] - x_grid[xi])).clamp(0.0, 1.0);
    let r0 = surf.row(ti, width);
    let r1 = surf.row(ti + 1, width);
    let a = r0[xi] + fx * (r0[xi + 1] - r0[xi]);
    let b = r1[xi] + fx * (r1[xi + 1] - r1[xi]);
    a + ft * (b - a)
}

/// Threshold surfaces `γ^1 … γ^m` derived from a curve family, with the
/// family retained for inverse queries.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdFamily {
    pub family: StoppingCurveFamily,
    /// `γ^j` on the same grids (index `j - 1`).
    pub gammas: Vec<LevelSurface>,
    /// Fraction of grid nodes where the inverse clamped during construction.
    pub clamped_fraction: f64,
}

impl ThresholdFamily {
    /// `γ^j(t, x)`; errors at `t = 1` where thresholds are undefined.
    pub fn eval(&self, j: usize, t: f64, x: Guarantee) -> Result<f64, CurveError> {
        if j == 0 || j > self.family.m {
            return Err(CurveError::LevelOutOfRange {
                j,
                m: self.family.m,
            });
        }
        if t >= 1.0 {
            return Err(CurveError::ThresholdAtHorizon);
        }
        let fam = &self.family;
        match x {
            Guarantee::NegInf => {
                if !fam.lower.is_neg_inf() {
                    return Err(CurveError::BelowBoundary {
                        x: f64::NEG_INFINITY,
                        c: fam.lower.as_f64(),
                    });
                }
                Ok(interp_t_guarded(&fam.t_grid, &self.gammas[j - 1].boundary, t))
            }
            Guarantee::Finite(xv) => {
                if Guarantee::Finite(xv) < fam.lower {
                    return Err(CurveError::BelowBoundary {
                        x: xv,
                        c: fam.lower.as_f64(),
                    });
                }
                let xs = &fam.x_grid;
                let top = *xs.last().unwrap();
                let v = if xv > top {
                    // γ(t, x) → x far above the point cloud
                    let base = self.eval(j, t, Guarantee::Finite(top))?;
                    base + (xv - top)
                } else if xv < xs[0] {
                    self.eval(j, t, Guarantee::Finite(xs[0]))?
                        .min(f64::INFINITY)
                } else {
                    let ti = grid::locate(&fam.t_grid, t);
                    let xi = grid::locate(xs, xv);
                    bilinear(&fam.t_grid, xs, &self.gammas[j - 1], fam.width(), ti, xi, t, xv)
                };
                // γ^j(t, x) ≥ x always
                Ok(v.max(xv))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Spec operations
// ---------------------------------------------------------------------------

/// Monotone-interpolated `u^j(t, x)`.
pub fn eval_curve(
    family: &StoppingCurveFamily,
    j: usize,
    t: TimePoint,
    x: Guarantee,
) -> Result<f64, CurveError> {
    family.eval(j, t.get(), x).map(|(v, _)| v)
}

/// Interpolated threshold `γ^j(t, x)`.
pub fn eval_threshold(
    thresholds: &ThresholdFamily,
    j: usize,
    t: TimePoint,
    x: Guarantee,
) -> Result<f64, CurveError> {
    thresholds.eval(j, t.get(), x)
}

/// Materialized inverse table for one level.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseLevel {
    pub j: usize,
    pub t_grid: Vec<f64>,
    pub x_grid: Vec<f64>,
    /// `u^j(t_i, x_k)` rows, nondecreasing in `k`.
    pub rows: Vec<Vec<f64>>,
}

impl InverseLevel {
    /// `ξ^j(t, y)` by per-node inversion and linear blending in `t`.
    pub fn xi(&self, t: f64, y: f64) -> (f64, EvalFlags) {
        let ti = grid::locate(&self.t_grid, t);
        let (t0, t1) = (self.t_grid[ti], self.t_grid[ti + 1]);
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let (a, fa) = invert_row(&self.x_grid, &self.rows[ti], y);
        let (b, fb) = invert_row(&self.x_grid, &self.rows[ti + 1], y);
        (
            a + w * (b - a),
            EvalFlags {
                extrapolated: fa || fb,
            },
        )
    }
}

fn invert_row(x_grid: &[f64], row: &[f64], y: f64) -> (f64, bool) {
    let n = row.len();
    if y > row[n - 1] {
        return (x_grid[n - 1] + (y - row[n - 1]), true);
    }
    if y < row[0] {
        return (x_grid[0], true);
    }
    grid::inverse_interp(x_grid, row, y)
}

/// Builds the inverse table `ξ^j`; reports degenerate (entirely flat) rows.
pub fn invert_level(
    family: &StoppingCurveFamily,
    j: usize,
) -> Result<InverseLevel, CurveError> {
    if j == 0 || j > family.m {
        return Err(CurveError::LevelOutOfRange { j, m: family.m });
    }
    let w = family.width();
    let surf = &family.levels[j - 1];
    let mut rows = Vec::with_capacity(family.t_grid.len());
    for (ti, &t) in family.t_grid.iter().enumerate() {
        let raw = surf.row(ti, w);
        let mut row = Vec::with_capacity(w);
        let mut prev = f64::NEG_INFINITY;
        for &v in raw {
            let v = if v < prev { prev } else { v };
            row.push(v);
            prev = v;
        }
        if t < 1.0 && row[w - 1] - row[0] <= 0.0 {
            return Err(CurveError::DegenerateLevel { j, t });
        }
        rows.push(row);
    }
    Ok(InverseLevel {
        j,
        t_grid: family.t_grid.clone(),
        x_grid: family.x_grid.clone(),
        rows,
    })
}

/// Derives the threshold family `γ^j(t,x) = ξ^{j-1}(t, u^j(t,x))` on the
/// family's own grid.
pub fn thresholds_from_family(family: &StoppingCurveFamily) -> Result<ThresholdFamily, CurveError> {
    let w = family.width();
    let tn = family.t_grid.len();
    let mut gammas = Vec::with_capacity(family.m);
    let mut clamped = 0u64;
    let mut total = 0u64;
    for j in 1..=family.m {
        let mut values = Vec::with_capacity(tn * w);
        let mut boundary = Vec::with_capacity(tn);
        for (ti, &t) in family.t_grid.iter().enumerate() {
            let urow = family.levels[j - 1].row(ti, w);
            // inverse through level j-1 at the same time node
            let prev_row: Vec<f64>;
            let prev: &[f64] = if j == 1 {
                &family.x_grid
            } else {
                prev_row = family.levels[j - 2].row(ti, w).to_vec();
                &prev_row
            };
            let mut iso = Vec::with_capacity(w);
            let mut p = f64::NEG_INFINITY;
            for &v in prev {
                let v = if v < p { p } else { v };
                iso.push(v);
                p = v;
            }
            for (k, &u) in urow.iter().enumerate() {
                let (mut g, fl) = invert_row(&family.x_grid, &iso, u);
                total += 1;
                if fl {
                    clamped += 1;
                }
                if t < 1.0 {
                    g = g.max(family.x_grid[k]);
                } else {
                    g = family.x_grid[k];
                }
                values.push(g);
            }
            let ub = family.levels[j - 1].boundary[ti];
            let gb = if ub == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else if j == 1 {
                ub
            } else {
                let (g, fl) = invert_row(&family.x_grid, &iso, ub);
                total += 1;
                if fl {
                    clamped += 1;
                }
                g
            };
            boundary.push(gb);
        }
        gammas.push(LevelSurface { values, boundary });
    }
    Ok(ThresholdFamily {
        family: family.clone(),
        gammas,
        clamped_fraction: if total > 0 {
            clamped as f64 / total as f64
        } else {
            0.0
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum CurveError {
    LevelOutOfRange { j: usize, m: usize },
    BelowBoundary { x: f64, c: f64 },
    ThresholdAtHorizon,
    DegenerateLevel { j: usize, t: f64 },
}

impl fmt::Display for CurveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveError::LevelOutOfRange { j, m } => {
                write!(f, "level {j} outside the solved range 0..={m}")
            }
            CurveError::BelowBoundary { x, c } => {
                write!(f, "guarantee {x} below the model boundary {c}")
            }
            CurveError::ThresholdAtHorizon => {
                write!(f, "thresholds are undefined at t = 1")
            }
            CurveError::DegenerateLevel { j, t } => {
                write!(f, "u^{j}(t, .) is flat at t = {t}; model degenerate")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CurveError {}
