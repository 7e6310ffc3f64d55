//! Explicit solution classes for the optimal stopping curve system.
//!
//! For intensities of scaled form `G(t,y) = H(y/v(t))·|v′(t)|/v(t)` (cases
//! 1–2) or shift form `G(t,y) = H(y−v(t))·|v′(t)|` (case 3), the level-`j`
//! stopping curves reduce to a scalar root `r_j` and a transform `Φ^j` with
//! inverse `φ^j`:
//!
//! - case 1 (`v(1)=0`, boundary 0):   `R^j(x) = x − ∫_x^∞ H(Φ^{j-1})`,
//!   `Φ^j(x) = x·exp(−∫_x^∞ (1/R^j(y) − 1/y) dy)` on `(r_j, ∞)`,
//!   `u^j(t,x) = φ^j(x/v(t))·v(t)`, `u^j(t) = r_j·v(t)`.
//! - case 2 (`v(1)=∞`, boundary −∞):  `R^j(x) = x + ∫_x^0 H(Φ^{j-1})`,
//!   `Φ^j(x) = x·exp(∫_x^0 (1/y − 1/R^j(y)) dy)` on `(r_j, 0)`,
//!   `u^j(t,x) = x` for `x ≥ 0`, else `φ^j(x/v(t))·v(t)`.
//! - case 3 (`v(1)=−∞`, boundary −∞): `R^j(x) = 1 − ∫_x^∞ H(Φ^{j-1})`,
//!   `Φ^j(x) = x − ∫_x^∞ (1/R^j(y) − 1) dy` on `(r_j, ∞)`,
//!   `u^j(t,x) = φ^j(x−v(t)) + v(t)`, `u^j(t) = r_j + v(t)`.
//!
//! Each level has exactly one root in the open interval above the previous
//! root.  Numerically the level is carried by two cumulative tables on a
//! log-spaced knot ladder: the tail integral `T = ∫ H(Φ^{j-1})` and the
//! root-anchored integral `S(z) = ∫_{r_j}^z H(Φ^{j-1})`.  `R^j` is then
//! evaluated through `S` near its root — `R = (z−r) ± S(z)` (cases 1–2) or
//! `R = S(z)` (case 3) — which avoids the catastrophic cancellation of the
//! textbook form `1 − T(z)`, and the Φ integrands are used in the
//! rearranged forms `T/(zR)`, `T/R` for the same reason.  The log ladder
//! resolves the logarithmic singularity of `1/R` at the root; tails use
//! doubling segments with a ratio bound; below the tabulation floor a
//! power/log continuation seeded by the analytic slope `R^j′(r_j)` applies.
//!
//! Roots are located by bracket + Brent against the table-backed `R^j`,
//! then Newton-polished against the re-integrated previous level.
//!
//! Thresholds compose through the previous level's inverse curve:
//! `γ^j(t,x) = ξ^{j-1}(t, u^j(t,x))`, i.e. `v·Φ^{j-1}(u^j/v)` (cases 1–2)
//! or `Φ^{j-1}(u^j−v) + v` (case 3); in particular `γ^j(t) = Φ^{j-1}(r_j)·v(t)`
//! resp. `Φ^{j-1}(r_j) + v(t)`.

use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::grid;
use crate::intensity::{CaseTag, ClosedFormClass, HFamily};
use crate::quad::{self, QuadError};
use crate::rootfind::{self, RootError};
use crate::types::Guarantee;

/// Quadrature/tabulation controls for [`build_case`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfSpec {
    /// Absolute tolerance for the assembled integrals.
    pub tol: f64,
    /// Knots per decade of offset in the level tables.
    pub knots_per_decade: usize,
    /// Smallest tabulated offset from the root (relative to the root scale).
    pub table_floor: f64,
    /// Root residual target `|R^j(r_j)|`.
    pub root_residual: f64,
}

impl Default for CfSpec {
    fn default() -> Self {
        CfSpec {
            tol: 1e-12,
            knots_per_decade: 128,
            table_floor: 1e-9,
            root_residual: 1e-10,
        }
    }
}

/// One solved level: root, slope at the root, and the transform tables.
#[derive(Debug, Clone, PartialEq)]
pub struct CfLevel {
    pub r: f64,
    /// `R^j′(r_j)` from the analytic per-case formula.
    pub rho: f64,
    /// Table arguments (ascending, starting just above `r`).
    xs: Vec<f64>,
    /// `Φ^j` at the arguments (ascending).
    phis: Vec<f64>,
    /// The Φ integral at the arguments (`I`/`J` per case), for anchored
    /// precise evaluation.
    aux: Vec<f64>,
    /// `T = ∫ H(Φ^{j-1})` (to `∞`, or to `0` in case 2) at the arguments.
    t_tab: Vec<f64>,
    /// `S(z) = ∫_{r_j}^z H(Φ^{j-1})` at the arguments.
    s_tab: Vec<f64>,
    /// Accumulated quadrature error estimate for the level.
    pub quad_err: f64,
}

/// The solved closed-form family for one intensity class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormSolution {
    pub class: ClosedFormClass,
    pub m: usize,
    levels: Vec<CfLevel>,
}

// ---------------------------------------------------------------------------
// Case-generic internals
// ---------------------------------------------------------------------------

#[derive(Clone, Copy)]
struct CaseCtx<'a> {
    case: CaseTag,
    h: &'a HFamily,
    spec: CfSpec,
    /// Solved levels `1 .. j-1`.
    done: &'a [CfLevel],
}

impl<'a> CaseCtx<'a> {
    fn level(&self) -> usize {
        self.done.len() + 1
    }

    fn prev_root(&self) -> Option<f64> {
        self.done.last().map(|l| l.r)
    }

    /// `H(Φ^{j-1}(y))` through the tabulated previous level.
    fn hc_fast(&self, y: f64) -> f64 {
        match self.done.last() {
            None => self.h.eval(y),
            Some(prev) => self.h.eval(phi_from_table(self.case, prev, y)),
        }
    }

    /// `H(Φ^{j-1}(y))` with the previous Φ re-integrated from its anchor
    /// knot (one quadrature level deeper than the table).
    fn hc_precise(&self, y: f64) -> f64 {
        match self.done.split_last() {
            None => self.h.eval(y),
            Some((prev, earlier)) => {
                let sub = CaseCtx {
                    done: earlier,
                    ..*self
                };
                self.h.eval(phi_precise(prev, &sub, y))
            }
        }
    }

    /// Tail integral of `hc` per case: `∫_x^∞` (cases 1, 3) or `∫_x^0`
    /// (case 2).
    fn t_full<F: FnMut(f64) -> f64>(&self, mut hc: F, x: f64) -> Result<f64, CfError> {
        let tol = self.spec.tol;
        match self.case {
            CaseTag::Case1 | CaseTag::Case3 => {
                let w = x.abs().max(0.5);
                let t = quad::tail_doubling(&mut hc, x, w, tol).map_err(CfError::Quad)?;
                Ok(t.value)
            }
            CaseTag::Case2 => {
                if x >= 0.0 {
                    return Ok(0.0);
                }
                let t = quad::left_singular(&mut |u: f64| hc(-u), 0.0, -x, tol)
                    .map_err(CfError::Quad)?;
                Ok(t.value)
            }
        }
    }

    fn combine(&self, x: f64, t: f64) -> f64 {
        match self.case {
            CaseTag::Case1 => x - t,
            CaseTag::Case2 => x + t,
            CaseTag::Case3 => 1.0 - t,
        }
    }

    /// `R^j(x)` via a full fast-path tail integral (bracketing only; the
    /// cancellation near the root does not matter for sign scans).
    fn r_fast_full(&self, x: f64) -> f64 {
        match self.t_full(|y| self.hc_fast(y), x) {
            Ok(t) => self.combine(x, t),
            Err(_) => f64::NAN,
        }
    }

    /// `R^j(x)` with the precise `Hc`; used for the Newton polish.
    fn r_precise(&self, x: f64) -> Result<f64, CfError> {
        let t = self.t_full(|y| self.hc_precise(y), x)?;
        Ok(self.combine(x, t))
    }

    fn r_slope_fast(&self, x: f64) -> f64 {
        let hc = self.hc_fast(x);
        match self.case {
            CaseTag::Case1 => 1.0 + hc,
            CaseTag::Case2 => 1.0 - hc,
            CaseTag::Case3 => hc,
        }
    }
}

/// Shared well-conditioned evaluators over a knot ladder with `T`/`S`
/// tables — used both while a level is being built and afterwards through
/// the stored [`CfLevel`].
struct Tables<'a> {
    case: CaseTag,
    r: f64,
    xs: &'a [f64],
    t_tab: &'a [f64],
    s_tab: &'a [f64],
}

impl<'a> Tables<'a> {
    fn from_level(level: &'a CfLevel, case: CaseTag) -> Self {
        Tables {
            case,
            r: level.r,
            xs: &level.xs,
            t_tab: &level.t_tab,
            s_tab: &level.s_tab,
        }
    }

    fn anchor(&self, z: f64) -> usize {
        let n = self.xs.len();
        if z >= self.xs[n - 1] {
            n - 1
        } else {
            self.xs.partition_point(|&x| x <= z)
        }
    }

    /// Anchored `T(z)` (`∫_z^∞` or `∫_z^0` of Hc).
    fn t_at<F: FnMut(f64) -> f64>(&self, hc: &mut F, z: f64) -> f64 {
        let n = self.xs.len();
        let k = self.anchor(z);
        let xa = self.xs[k.min(n - 1)];
        let seg = quad::gauss16(&mut *hc, z.min(xa), z.max(xa));
        if z <= xa {
            self.t_tab[k.min(n - 1)] + seg
        } else {
            (self.t_tab[n - 1] - seg).max(0.0)
        }
    }

    /// Anchored root integral `S(z) = ∫_r^z Hc`.
    fn s_at<F: FnMut(f64) -> f64>(&self, hc: &mut F, z: f64) -> f64 {
        let n = self.xs.len();
        let k = self.anchor(z);
        let xa = self.xs[k.min(n - 1)];
        let seg = quad::gauss16(&mut *hc, z.min(xa), z.max(xa));
        if z <= xa {
            if z >= self.r {
                self.s_tab[k.min(n - 1)] - seg
            } else {
                // below the ladder start: direct panel from the root
                quad::gauss16(&mut *hc, self.r, z)
            }
        } else {
            self.s_tab[n - 1] + seg
        }
    }

    /// Well-conditioned `R(z)`: root-anchored near the root, end-anchored
    /// near the vanishing far end of case 2.
    fn r_at<F: FnMut(f64) -> f64>(&self, hc: &mut F, z: f64) -> f64 {
        match self.case {
            CaseTag::Case1 => (z - self.r) + self.s_at(hc, z),
            CaseTag::Case2 => {
                if z - self.r <= 0.5 * (0.0 - self.r) {
                    (z - self.r) - self.s_at(hc, z)
                } else {
                    z + self.t_at(hc, z)
                }
            }
            CaseTag::Case3 => self.s_at(hc, z),
        }
    }

    /// Φ integrand in the cancellation-free rearranged form.
    fn integrand<F: FnMut(f64) -> f64>(&self, hc: &mut F, z: f64) -> f64 {
        let r = self.r_at(hc, z);
        match self.case {
            // 1/R − 1/z = T/(zR)
            CaseTag::Case1 => self.t_at(hc, z) / (z * r),
            // 1/z − 1/R = T/(zR) with T = ∫_z^0
            CaseTag::Case2 => self.t_at(hc, z) / (z * r),
            // 1/R − 1 = T/R
            CaseTag::Case3 => self.t_at(hc, z) / r,
        }
    }
}

/// Φ from a solved level's table, with closed-form continuations beyond the
/// tabulated range.
fn phi_from_table(case: CaseTag, level: &CfLevel, y: f64) -> f64 {
    let n = level.xs.len();
    if y <= level.xs[0] {
        return phi_below_floor(case, level, y);
    }
    if y >= level.xs[n - 1] {
        return match case {
            CaseTag::Case1 | CaseTag::Case2 => y * (level.phis[n - 1] / level.xs[n - 1]),
            CaseTag::Case3 => y + (level.phis[n - 1] - level.xs[n - 1]),
        };
    }
    grid::interp_clamped(&level.xs, &level.phis, y)
}

/// Power/log continuation of Φ below the tabulation floor, seeded by the
/// root slope ρ.
fn phi_below_floor(case: CaseTag, level: &CfLevel, y: f64) -> f64 {
    let off0 = level.xs[0] - level.r;
    let off = (y - level.r).max(off0 * 1e-9);
    match case {
        CaseTag::Case1 => level.phis[0] * (off / off0).powf(1.0 / level.rho),
        CaseTag::Case2 => level.phis[0] * (off0 / off).powf(1.0 / level.rho.abs()),
        CaseTag::Case3 => level.phis[0] - (off0 / off).ln() / level.rho,
    }
}

/// φ^j = Φ^j⁻¹ from the table, with the inverted continuations.
fn phi_inverse(case: CaseTag, level: &CfLevel, y: f64) -> f64 {
    let n = level.xs.len();
    if y <= level.phis[0] {
        let off0 = level.xs[0] - level.r;
        return match case {
            CaseTag::Case1 => {
                if y <= 0.0 {
                    level.r
                } else {
                    level.r + off0 * (y / level.phis[0]).powf(level.rho)
                }
            }
            CaseTag::Case2 => {
                if y == f64::NEG_INFINITY {
                    level.r
                } else {
                    level.r + off0 * (level.phis[0] / y).powf(level.rho.abs())
                }
            }
            CaseTag::Case3 => {
                if y == f64::NEG_INFINITY {
                    level.r
                } else {
                    level.r + off0 * (level.rho * (y - level.phis[0])).exp()
                }
            }
        };
    }
    if y >= level.phis[n - 1] {
        return match case {
            CaseTag::Case1 | CaseTag::Case2 => y * (level.xs[n - 1] / level.phis[n - 1]),
            CaseTag::Case3 => y - (level.phis[n - 1] - level.xs[n - 1]),
        };
    }
    let (x, _) = grid::inverse_interp(&level.xs, &level.phis, y);
    x
}

/// Anchored `Φ^j(y)`: the level's aux integral extended from the nearest
/// tabulated knot by adaptive quadrature of the conditioned integrand.
fn phi_precise(level: &CfLevel, ctx_prev: &CaseCtx<'_>, y: f64) -> f64 {
    let case = ctx_prev.case;
    let n = level.xs.len();
    if y <= level.xs[0] {
        return phi_below_floor(case, level, y);
    }
    let k = if y >= level.xs[n - 1] {
        n - 1
    } else {
        level.xs.partition_point(|&x| x <= y)
    };
    let xa = level.xs[k];
    let tables = Tables::from_level(level, case);
    let mut hc = |z: f64| ctx_prev.hc_fast(z);
    let mut integrand = |z: f64| tables.integrand(&mut hc, z);
    let seg = match quad::adaptive(&mut integrand, y.min(xa), y.max(xa), 1e-13) {
        Ok((v, _)) => v,
        Err(_) => return phi_from_table(case, level, y),
    };
    // aux is oriented as ∫_x^{far end}: lowering the evaluation point adds
    let aux = if y <= xa {
        level.aux[k] + seg
    } else {
        level.aux[k] - seg
    };
    phi_from_aux(case, y, aux)
}

fn phi_from_aux(case: CaseTag, x: f64, aux: f64) -> f64 {
    match case {
        CaseTag::Case1 => x * (-aux).exp(),
        CaseTag::Case2 => x * aux.exp(),
        CaseTag::Case3 => x - aux,
    }
}

// ---------------------------------------------------------------------------
// Level construction
// ---------------------------------------------------------------------------

fn find_root(ctx: &CaseCtx<'_>) -> Result<(f64, f64), CfError> {
    let spec = ctx.spec;
    let j = ctx.level();
    let mut f = |x: f64| ctx.r_fast_full(x);

    let bracket: (f64, f64) = match (ctx.case, ctx.prev_root()) {
        (CaseTag::Case1, prev) => {
            let anchor = prev.unwrap_or(0.0);
            let scale = anchor.abs().max(1.0);
            let mut g = scale;
            let mut lo = None;
            for _ in 0..90 {
                let x = anchor + g;
                if f(x) < 0.0 {
                    lo = Some(x);
                    break;
                }
                g *= 0.5;
            }
            let lo = lo.ok_or(CfError::ConditionsUnmet {
                case: ctx.case,
                what: "R has no negative value above the previous root",
                level: j,
            })?;
            rootfind::expand_bracket(&mut f, lo, (lo - anchor).max(0.25 * scale), 1.0, 200)
                .map_err(|e| CfError::Root { level: j, source: e })?
        }
        (CaseTag::Case2, prev) => {
            // R > 0 toward the lower end of the interval, R < 0 near 0
            let pos = match prev {
                Some(r0) => {
                    let mut g = -r0 * 0.5;
                    let mut found = None;
                    for _ in 0..90 {
                        let x = r0 + g;
                        if x < 0.0 && f(x) > 0.0 {
                            found = Some(x);
                            break;
                        }
                        g *= 0.5;
                    }
                    found
                }
                None => {
                    let mut x = -1.0;
                    let mut found = None;
                    for _ in 0..90 {
                        if f(x) > 0.0 {
                            found = Some(x);
                            break;
                        }
                        x *= 2.0;
                    }
                    found
                }
            }
            .ok_or(CfError::ConditionsUnmet {
                case: ctx.case,
                what: "R has no positive value above the previous root",
                level: j,
            })?;
            let mut neg = None;
            let mut x = pos * 0.5;
            for _ in 0..90 {
                if f(x) < 0.0 {
                    neg = Some(x);
                    break;
                }
                x *= 0.5;
                if x > -1e-14 {
                    break;
                }
            }
            let neg = neg.ok_or(CfError::ConditionsUnmet {
                case: ctx.case,
                what: "R does not change sign inside (previous root, 0)",
                level: j,
            })?;
            (pos, neg)
        }
        (CaseTag::Case3, prev) => {
            let mut hi = None;
            let mut x = match prev {
                Some(r0) => r0 + 1.0,
                None => 1.0,
            };
            for _ in 0..200 {
                if f(x) > 0.0 {
                    hi = Some(x);
                    break;
                }
                x += x.abs().max(1.0).min(8.0);
            }
            let hi = hi.ok_or(CfError::ConditionsUnmet {
                case: ctx.case,
                what: "R stays nonpositive; no root",
                level: j,
            })?;
            let lo = match prev {
                Some(r0) => {
                    let mut g = (hi - r0).max(1e-3) * 0.5;
                    let mut found = None;
                    for _ in 0..120 {
                        let x = r0 + g;
                        if x < hi && f(x) < 0.0 {
                            found = Some(x);
                            break;
                        }
                        g *= 0.5;
                        if g < 1e-13 * r0.abs().max(1.0) {
                            break;
                        }
                    }
                    found
                }
                None => {
                    let mut x = hi - 1.0;
                    let mut found = None;
                    for _ in 0..200 {
                        if f(x) < 0.0 {
                            found = Some(x);
                            break;
                        }
                        x -= x.abs().max(1.0).min(8.0);
                    }
                    found
                }
            }
            .ok_or(CfError::ConditionsUnmet {
                case: ctx.case,
                what: "R does not change sign above the previous root",
                level: j,
            })?;
            (lo, hi)
        }
    };

    let scale = bracket.0.abs().max(bracket.1.abs()).max(1.0);
    let mut r = rootfind::brent(
        &mut f,
        bracket.0.min(bracket.1),
        bracket.0.max(bracket.1),
        1e-14 * scale,
        200,
    )
    .map_err(|e| CfError::Root { level: j, source: e })?;

    // Newton polish against the precise R; for level 1 the fast path is
    // already exact up to the tail tolerance.
    let mut resid = 0.0;
    for _ in 0..3 {
        resid = ctx.r_precise(r)?;
        let slope = ctx.r_slope_fast(r);
        if !(slope.is_finite() && slope.abs() > 1e-300) {
            break;
        }
        let step = resid / slope;
        r -= step;
        if step.abs() <= 1e-13 * scale {
            resid = ctx.r_precise(r)?;
            break;
        }
    }
    if resid.abs() > spec.root_residual {
        return Err(CfError::ResidualTooLarge {
            level: j,
            resid: resid.abs(),
            target: spec.root_residual,
        });
    }
    Ok((r, ctx.r_slope_fast(r)))
}

/// Log-spaced offsets from `floor` up to and including `far`.
fn offset_ladder(floor: f64, far: f64, per_decade: usize) -> Vec<f64> {
    let mut offs = Vec::new();
    let ratio = 10f64.powf(1.0 / per_decade as f64);
    let mut o = floor;
    while o < far {
        offs.push(o);
        o *= ratio;
    }
    offs.push(far);
    offs
}

fn build_level(ctx: &CaseCtx<'_>) -> Result<CfLevel, CfError> {
    let (r, rho) = find_root(ctx)?;
    let spec = ctx.spec;
    let j = ctx.level();
    let scale = r.abs().max(1.0);
    let floor = spec.table_floor * scale;

    // Knot ladder over the level domain.
    let xs: Vec<f64> = match ctx.case {
        CaseTag::Case1 | CaseTag::Case3 => {
            // probe the far end until the remaining Φ integrand (≈ T/R per
            // unit, times the decay width) is below the asymptote tolerance
            let mut far = r + 4.0 * scale;
            loop {
                let t = ctx.t_full(|y| ctx.hc_fast(y), far)?;
                let rr = ctx.combine(far, t);
                let proxy = match ctx.case {
                    CaseTag::Case1 => (t / (rr * far.max(1e-300))).abs() * far.abs().max(1.0),
                    _ => (t / rr).abs() * 2.0,
                };
                if proxy <= 1e-9 || far - r > 1e12 * scale {
                    break;
                }
                far = r + (far - r) * 2.0;
            }
            offset_ladder(floor, far - r, spec.knots_per_decade)
                .iter()
                .map(|o| r + o)
                .collect()
        }
        CaseTag::Case2 => {
            let gap = -r;
            let mut offs = offset_ladder(floor, gap * 0.5, spec.knots_per_decade);
            let from_zero =
                offset_ladder((gap * 1e-10).min(floor), gap * 0.5, spec.knots_per_decade);
            for o in from_zero.iter().rev().skip(1) {
                offs.push(gap - o);
            }
            offs.iter().map(|o| r + o).collect()
        }
    };
    let n = xs.len();

    let mut hc = |y: f64| ctx.hc_fast(y);

    // T table (far/zero-anchored) on the knots.
    let mut t_tab = alloc::vec![0.0; n];
    t_tab[n - 1] = ctx.t_full(&mut hc, xs[n - 1])?;
    for i in (0..n - 1).rev() {
        let (seg, _) =
            quad::adaptive(&mut hc, xs[i], xs[i + 1], spec.tol).map_err(CfError::Quad)?;
        t_tab[i] = t_tab[i + 1] + seg;
    }

    // S table (root-anchored) on the knots.
    let mut s_tab = alloc::vec![0.0; n];
    s_tab[0] = quad::gauss16(&mut hc, r, xs[0]);
    for i in 1..n {
        let (seg, _) =
            quad::adaptive(&mut hc, xs[i - 1], xs[i], spec.tol).map_err(CfError::Quad)?;
        s_tab[i] = s_tab[i - 1] + seg;
    }

    let tables = Tables {
        case: ctx.case,
        r,
        xs: &xs,
        t_tab: &t_tab,
        s_tab: &s_tab,
    };
    let mut integrand = |z: f64| tables.integrand(&mut |y| ctx.hc_fast(y), z);

    // aux = the Φ integral, cumulative from the far end toward the root.
    let mut aux = alloc::vec![0.0; n];
    let mut quad_err = 0.0_f64;
    aux[n - 1] = match ctx.case {
        CaseTag::Case1 | CaseTag::Case3 => {
            let t = quad::tail_doubling(
                &mut integrand,
                xs[n - 1],
                xs[n - 1].abs().max(1.0),
                spec.tol,
            )
            .map_err(CfError::Quad)?;
            quad_err += t.remainder_bound;
            t.value
        }
        CaseTag::Case2 => {
            let t = quad::left_singular(&mut |u: f64| integrand(-u), 0.0, -xs[n - 1], spec.tol)
                .map_err(CfError::Quad)?;
            quad_err += t.remainder_bound;
            t.value
        }
    };
    for i in (0..n - 1).rev() {
        let (seg, e) =
            quad::adaptive(&mut integrand, xs[i], xs[i + 1], spec.tol).map_err(CfError::Quad)?;
        aux[i] = aux[i + 1] + seg;
        quad_err += e;
    }
    let phis: Vec<f64> = xs
        .iter()
        .zip(aux.iter())
        .map(|(&x, &a)| phi_from_aux(ctx.case, x, a))
        .collect();

    if !grid::strictly_increasing(&phis) {
        return Err(CfError::ConditionsUnmet {
            case: ctx.case,
            what: "tabulated transform not strictly increasing",
            level: j,
        });
    }
    Ok(CfLevel {
        r,
        rho,
        xs,
        phis,
        aux,
        t_tab,
        s_tab,
        quad_err,
    })
}

fn check_conditions(class: &ClosedFormClass) -> Result<(), CfError> {
    let h = &class.h;
    let sample: &[f64] = match class.case {
        CaseTag::Case1 => &[0.1, 0.5, 1.0, 2.0, 5.0, 20.0],
        _ => &[-20.0, -5.0, -1.0, -0.1, 0.0, 1.0, 5.0],
    };
    let mut prev = f64::INFINITY;
    for &x in sample {
        let v = h.eval(x);
        if v > prev * (1.0 + 1e-12) {
            return Err(CfError::ConditionsUnmet {
                case: class.case,
                what: "H is not nonincreasing",
                level: 1,
            });
        }
        prev = v;
    }
    match class.case {
        CaseTag::Case1 => {
            if h.eval(1.0) <= 0.0 && h.eval(0.5) <= 0.0 {
                return Err(CfError::ConditionsUnmet {
                    case: class.case,
                    what: "∫_0^∞ H must be positive",
                    level: 1,
                });
            }
        }
        CaseTag::Case2 => {
            for &x in &[0.0, 0.5, 3.0] {
                if h.eval(x) != 0.0 {
                    return Err(CfError::ConditionsUnmet {
                        case: class.case,
                        what: "H must vanish on [0, ∞)",
                        level: 1,
                    });
                }
            }
            if h.eval(-1.0) <= 0.0 && h.eval(-3.0) <= 0.0 {
                return Err(CfError::ConditionsUnmet {
                    case: class.case,
                    what: "∫_{-∞}^0 H must be positive",
                    level: 1,
                });
            }
            if quad::left_singular(&mut |u: f64| h.eval(-u) / u, 0.0, 1.0, 1e-10).is_err() {
                return Err(CfError::ConditionsUnmet {
                    case: class.case,
                    what: "∫_y^0 H(x)/(-x) dx diverges",
                    level: 1,
                });
            }
        }
        CaseTag::Case3 => {
            if quad::tail_doubling(&mut |y| h.eval(y), 0.0, 1.0, 1e-10).is_err() {
                return Err(CfError::ConditionsUnmet {
                    case: class.case,
                    what: "∫_z^∞ H diverges",
                    level: 1,
                });
            }
        }
    }
    Ok(())
}

/// Builds roots, transforms, and inverses for `m` stops.
pub fn build_case(
    class: &ClosedFormClass,
    m: usize,
    spec: CfSpec,
) -> Result<ClosedFormSolution, CfError> {
    if m == 0 {
        return Err(CfError::BadLevel { j: 0, m });
    }
    check_conditions(class)?;
    let mut levels: Vec<CfLevel> = Vec::with_capacity(m);
    for _ in 0..m {
        let ctx = CaseCtx {
            case: class.case,
            h: &class.h,
            spec,
            done: &levels,
        };
        let lvl = build_level(&ctx)?;
        if let Some(prev) = levels.last() {
            if lvl.r <= prev.r {
                return Err(CfError::ConditionsUnmet {
                    case: class.case,
                    what: "roots not strictly increasing",
                    level: levels.len() + 1,
                });
            }
        }
        levels.push(lvl);
    }
    Ok(ClosedFormSolution {
        class: class.clone(),
        m,
        levels,
    })
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

impl ClosedFormSolution {
    pub fn root(&self, j: usize) -> Result<f64, CfError> {
        self.check_level(j)?;
        Ok(self.levels[j - 1].r)
    }

    pub fn roots(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.r).collect()
    }

    pub fn quad_err(&self, j: usize) -> Result<f64, CfError> {
        self.check_level(j)?;
        Ok(self.levels[j - 1].quad_err)
    }

    /// Table-backed `Φ^j(x)` (`Φ^0` is the identity).
    pub fn phi_table(&self, j: usize, x: f64) -> Result<f64, CfError> {
        if j == 0 {
            return Ok(x);
        }
        self.check_level(j)?;
        Ok(phi_from_table(self.class.case, &self.levels[j - 1], x))
    }

    /// Anchored-quadrature `Φ^j(x)`; slower, verification-grade.
    pub fn phi(&self, j: usize, x: f64) -> Result<f64, CfError> {
        if j == 0 {
            return Ok(x);
        }
        self.check_level(j)?;
        let ctx = CaseCtx {
            case: self.class.case,
            h: &self.class.h,
            spec: CfSpec::default(),
            done: &self.levels[..j - 1],
        };
        Ok(phi_precise(&self.levels[j - 1], &ctx, x))
    }

    /// Table-backed inverse `φ^j(y)` (`φ^0` is the identity).
    pub fn phi_inv(&self, j: usize, y: f64) -> Result<f64, CfError> {
        if j == 0 {
            return Ok(y);
        }
        self.check_level(j)?;
        Ok(phi_inverse(self.class.case, &self.levels[j - 1], y))
    }

    /// `u^j(t, x)` by the case formula; `t = 1` returns `x`.
    pub fn eval_u(&self, j: usize, t: f64, x: Guarantee) -> Result<f64, CfError> {
        if j == 0 {
            return Ok(x.as_f64());
        }
        self.check_level(j)?;
        if t >= 1.0 {
            return Ok(x.as_f64());
        }
        let v = self.class.v.eval(t);
        let case = self.class.case;
        let r = self.levels[j - 1].r;
        match (case, x) {
            (CaseTag::Case1, Guarantee::NegInf) => Err(CfError::GuaranteeOutsideDomain {
                case,
                x: f64::NEG_INFINITY,
            }),
            (CaseTag::Case1, Guarantee::Finite(xv)) => {
                if xv < 0.0 {
                    return Err(CfError::GuaranteeOutsideDomain { case, x: xv });
                }
                if xv == 0.0 {
                    return Ok(r * v);
                }
                Ok(self.phi_inv(j, xv / v)? * v)
            }
            (CaseTag::Case2, Guarantee::NegInf) => Ok(r * v),
            (CaseTag::Case2, Guarantee::Finite(xv)) => {
                if xv >= 0.0 {
                    Ok(xv)
                } else {
                    Ok(self.phi_inv(j, xv / v)? * v)
                }
            }
            (CaseTag::Case3, Guarantee::NegInf) => Ok(r + v),
            (CaseTag::Case3, Guarantee::Finite(xv)) => Ok(self.phi_inv(j, xv - v)? + v),
        }
    }

    /// Threshold `γ^j(t, x) = ξ^{j-1}(t, u^j(t, x))` by the composed case
    /// formulas; `γ^1 = u^1` since `ξ^0` is the identity.
    pub fn eval_gamma(&self, j: usize, t: f64, x: Guarantee) -> Result<f64, CfError> {
        if j == 0 || j > self.m {
            return Err(CfError::BadLevel { j, m: self.m });
        }
        if t >= 1.0 {
            return Err(CfError::ThresholdAtHorizon);
        }
        let case = self.class.case;
        let v = self.class.v.eval(t);
        // Case 2 above zero: all levels coincide with x there, so γ = x.
        if case == CaseTag::Case2 {
            if let Guarantee::Finite(xv) = x {
                if xv >= 0.0 {
                    return Ok(xv);
                }
            }
        }
        let u = self.eval_u(j, t, x)?;
        let g = match case {
            CaseTag::Case1 | CaseTag::Case2 => v * self.phi_table(j - 1, u / v)?,
            CaseTag::Case3 => self.phi_table(j - 1, u - v)? + v,
        };
        Ok(match x {
            Guarantee::Finite(xv) => g.max(xv),
            Guarantee::NegInf => g,
        })
    }

    fn check_level(&self, j: usize) -> Result<(), CfError> {
        if j == 0 || j > self.m {
            Err(CfError::BadLevel { j, m: self.m })
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CfError {
    BadLevel {
        j: usize,
        m: usize,
    },
    ConditionsUnmet {
        case: CaseTag,
        what: &'static str,
        level: usize,
    },
    ResidualTooLarge {
        level: usize,
        resid: f64,
        target: f64,
    },
    Root {
        level: usize,
        source: RootError,
    },
    Quad(QuadError),
    GuaranteeOutsideDomain {
        case: CaseTag,
        x: f64,
    },
    ThresholdAtHorizon,
}

impl fmt::Display for CfError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CfError::BadLevel { j, m } => write!(f, "level {j} outside 1..={m}"),
            CfError::ConditionsUnmet { case, what, level } => {
                write!(f, "class conditions unmet ({case:?}, level {level}): {what}")
            }
            CfError::ResidualTooLarge {
                level,
                resid,
                target,
            } => write!(
                f,
                "root residual {resid:.2e} above target {target:.2e} at level {level}"
            ),
            CfError::Root { level, source } => {
                write!(f, "root search failed at level {level}: {source}")
            }
            CfError::Quad(e) => write!(f, "quadrature failure: {e}"),
            CfError::GuaranteeOutsideDomain { case, x } => {
                write!(f, "guarantee {x} outside the {case:?} domain")
            }
            CfError::ThresholdAtHorizon => write!(f, "thresholds are undefined at t = 1"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CfError {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intensity::{IntensityModel, VFamily};
    use approx::assert_abs_diff_eq;

    // Independent oracle: plain bisection on a hand-integrated R.
    fn bisect(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let fa = f(a);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if f(m) * fa.signum() > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn case1_frechet_alpha2() {
        let class = IntensityModel::frechet(2.0, 0.0, 0.0).unwrap().class.unwrap();
        let sol = build_case(&class, 2, CfSpec::default()).unwrap();
        // r1 = sqrt(2): root of x - 2/x
        assert_abs_diff_eq!(sol.root(1).unwrap(), 2f64.sqrt(), epsilon = 1e-10);
        // Phi^1(x) = sqrt(x^2 - 2), hand integration of 1/R - 1/y
        for &x in &[1.5, 2.0, 3.0, 7.0, 15.0, 50.0] {
            let exact = (x * x - 2.0).sqrt();
            assert_abs_diff_eq!(sol.phi(1, x).unwrap(), exact, epsilon = 1e-8);
        }
        // r2: root of x - (1/sqrt2) ln((x+sqrt2)/(x-sqrt2)) by bisection
        let s2 = 2f64.sqrt();
        let r2_oracle = bisect(|x| x - (1.0 / s2) * ((x + s2) / (x - s2)).ln(), 1.5, 2.5);
        assert_abs_diff_eq!(r2_oracle, 1.6966018035418005, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.root(2).unwrap(), r2_oracle, epsilon = 1e-9);
        for &t in &[0.0, 0.3, 0.7, 0.95] {
            // u^1(t, 0) = sqrt(2 (1 - t)) and surface sqrt(x^2 + 2(1-t))
            let u = sol.eval_u(1, t, Guarantee::Finite(0.0)).unwrap();
            assert_abs_diff_eq!(u, (2.0 * (1.0 - t)).sqrt(), epsilon = 1e-12);
            let us = sol.eval_u(1, t, Guarantee::Finite(1.3)).unwrap();
            assert_abs_diff_eq!(us, (1.3f64 * 1.3 + 2.0 * (1.0 - t)).sqrt(), epsilon = 5e-5);
            // gamma^2(t, 0) = Phi^1(r2) v(t) = sqrt(r2^2 - 2) sqrt(1-t)
            let g = sol.eval_gamma(2, t, Guarantee::Finite(0.0)).unwrap();
            let expect = (r2_oracle * r2_oracle - 2.0).sqrt() * (1.0 - t).sqrt();
            assert_abs_diff_eq!(g, expect, epsilon = 5e-5);
        }
    }

    #[test]
    fn case2_weibull_alpha1() {
        let class = IntensityModel::weibull(1.0, 0.0, 0.0).unwrap().class.unwrap();
        let sol = build_case(&class, 3, CfSpec::default()).unwrap();
        assert_abs_diff_eq!(sol.root(1).unwrap(), -2.0, epsilon = 1e-10);
        // Phi^1(x) = 2x/(2+x)
        for &x in &[-1.9, -1.0, -0.3, -0.05] {
            assert_abs_diff_eq!(sol.phi(1, x).unwrap(), 2.0 * x / (2.0 + x), epsilon = 1e-8);
        }
        // r2: root of 3x + 4 ln(2/(2+x)) by independent bisection
        let r2_oracle = bisect(|x| 3.0 * x + 4.0 * (2.0 / (2.0 + x)).ln(), -1.9, -0.5);
        assert_abs_diff_eq!(r2_oracle, -1.1656232877316226, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.root(2).unwrap(), r2_oracle, epsilon = 1e-8);
        assert!(sol.root(3).unwrap() > sol.root(2).unwrap());
        assert!(sol.root(3).unwrap() < 0.0);
        // guarantee branch: x >= 0 gives u = x and gamma = x
        assert_eq!(sol.eval_u(2, 0.4, Guarantee::Finite(0.7)).unwrap(), 0.7);
        assert_eq!(sol.eval_gamma(2, 0.4, Guarantee::Finite(0.7)).unwrap(), 0.7);
        for &t in &[0.0, 0.5, 0.9] {
            // u^1(t) = -2/(1-t); surface u^1(t,x) = 2x/(2 - x(1-t))
            let u = sol.eval_u(1, t, Guarantee::NegInf).unwrap();
            assert_abs_diff_eq!(u, -2.0 / (1.0 - t), epsilon = 1e-9);
            let x = -0.8;
            let us = sol.eval_u(1, t, Guarantee::Finite(x)).unwrap();
            assert_abs_diff_eq!(us, 2.0 * x / (2.0 - x * (1.0 - t)), epsilon = 5e-5);
        }
    }

    #[test]
    fn case3_gumbel() {
        let class = IntensityModel::gumbel(0.0, 0.0).unwrap().class.unwrap();
        let sol = build_case(&class, 3, CfSpec::default()).unwrap();
        assert!(sol.root(1).unwrap().abs() <= 1e-10);
        // Phi^1(x) = x + ln(1 - e^{-x})
        for &x in &[0.05, 0.3, 1.0, 3.0, 10.0] {
            let exact = x + (1.0 - (-x).exp()).ln();
            assert_abs_diff_eq!(sol.phi(1, x).unwrap(), exact, epsilon = 1e-8);
        }
        let r2 = -(1.0 - (-1f64).exp()).ln();
        assert_abs_diff_eq!(sol.root(2).unwrap(), r2, epsilon = 1e-9);
        for &t in &[0.0, 0.5, 0.9] {
            // u^2(t) = r2 + ln(1-t); u^1(t,x) = ln(e^x + 1 - t)
            assert_abs_diff_eq!(
                sol.eval_u(2, t, Guarantee::NegInf).unwrap(),
                r2 + (1.0 - t).ln(),
                epsilon = 1e-9
            );
            let x = -0.4f64;
            assert_abs_diff_eq!(
                sol.eval_u(1, t, Guarantee::Finite(x)).unwrap(),
                (x.exp() + 1.0 - t).ln(),
                epsilon = 5e-5
            );
            // gamma^2(t) = Phi^1(r2) + v(t)
            let g = sol.eval_gamma(2, t, Guarantee::NegInf).unwrap();
            assert_abs_diff_eq!(
                g,
                (r2 + (1.0 - (-r2).exp()).ln()) + (1.0 - t).ln(),
                epsilon = 5e-5
            );
        }
        // gamma^1 = u^1 (identity inverse)
        assert_abs_diff_eq!(
            sol.eval_gamma(1, 0.5, Guarantee::NegInf).unwrap(),
            0.5f64.ln(),
            epsilon = 1e-9
        );
        let rs = sol.roots();
        assert!(rs[0] < rs[1] && rs[1] < rs[2]);
        assert_abs_diff_eq!(rs[2], 0.549251618325, epsilon = 1e-5);
    }

    #[test]
    fn inversion_round_trip() {
        let class = IntensityModel::gumbel(0.0, 0.0).unwrap().class.unwrap();
        let sol = build_case(&class, 2, CfSpec::default()).unwrap();
        for j in 1..=2 {
            let lvl = &sol.levels[j - 1];
            for k in (0..lvl.xs.len()).step_by(7) {
                let x = lvl.xs[k];
                let y = sol.phi_table(j, x).unwrap();
                let back = sol.phi_inv(j, y).unwrap();
                assert!(
                    (back - x).abs() <= 1e-8 * x.abs().max(1.0),
                    "j={j} x={x} back={back}"
                );
            }
        }
    }

    #[test]
    fn bracketing_invariant() {
        // sign convention per case: R below the root and above it differ
        let class = IntensityModel::frechet(2.0, 0.0, 0.0).unwrap().class.unwrap();
        let sol = build_case(&class, 2, CfSpec::default()).unwrap();
        let ctx = CaseCtx {
            case: CaseTag::Case1,
            h: &sol.class.h,
            spec: CfSpec::default(),
            done: &sol.levels[..1],
        };
        let r1 = sol.root(1).unwrap();
        assert!(ctx.r_precise(r1 + 1e-4).unwrap() < 0.0);
        assert!(ctx.r_precise(50.0).unwrap() > 0.0);
        assert!(ctx.r_precise(sol.root(2).unwrap()).unwrap().abs() <= 1e-10);
    }

    #[test]
    fn conditions_rejected() {
        let class = ClosedFormClass {
            case: CaseTag::Case3,
            h: HFamily::Table {
                points: alloc::vec![(-1.0, 0.1), (0.0, 0.5), (1.0, 0.2)],
            },
            v: VFamily::LogScaled { beta: 1.0 },
        };
        assert!(matches!(
            build_case(&class, 1, CfSpec::default()),
            Err(CfError::ConditionsUnmet { .. })
        ));
    }
}
