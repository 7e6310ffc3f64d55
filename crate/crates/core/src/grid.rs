//! Grids and monotone piecewise-linear interpolation.
//!
//! Curves are tabulated on a time grid geometrically refined toward `t = 1`,
//! where the stopping curves are steep or singular.  Interpolation is
//! monotone piecewise-linear in each argument: it is exact at nodes and
//! preserves the monotonicity invariants the engines rely on, which
//! unconstrained cubic fits do not.

use alloc::vec::Vec;
use core::fmt;

/// Locate `x` in the sorted knot vector: returns `i` such that
/// `knots[i] <= x < knots[i+1]`, clamped to `[0, len-2]`.
#[inline]
pub fn locate(knots: &[f64], x: f64) -> usize {
    debug_assert!(knots.len() >= 2);
    let n = knots.len();
    if x <= knots[0] {
        return 0;
    }
    if x >= knots[n - 2] {
        return n - 2;
    }
    // partition_point returns the first index with knot > x
    let hi = knots.partition_point(|&k| k <= x);
    hi - 1
}

/// Piecewise-linear interpolation with clamping outside the knot range.
#[inline]
pub fn interp_clamped(knots: &[f64], values: &[f64], x: f64) -> f64 {
    let i = locate(knots, x);
    let (x0, x1) = (knots[i], knots[i + 1]);
    if x <= x0 {
        return values[i];
    }
    if x >= x1 {
        return values[i + 1];
    }
    let w = (x - x0) / (x1 - x0);
    values[i] + w * (values[i + 1] - values[i])
}

/// Inverse interpolation of a nondecreasing tabulated function:
/// finds `x` with `values(x) = y`, where `values` are the function values at
/// `knots`.  Returns the clamped endpoint and a flag when `y` is outside the
/// tabulated range.  Flat segments resolve to their left edge.
pub fn inverse_interp(knots: &[f64], values: &[f64], y: f64) -> (f64, bool) {
    let n = values.len();
    if y <= values[0] {
        return (knots[0], y < values[0]);
    }
    if y >= values[n - 1] {
        return (knots[n - 1], y > values[n - 1]);
    }
    let hi = values.partition_point(|&v| v < y);
    // values[hi-1] < y <= values[hi]
    let (y0, y1) = (values[hi - 1], values[hi]);
    if y1 <= y0 {
        return (knots[hi - 1], false);
    }
    let w = (y - y0) / (y1 - y0);
    (knots[hi - 1] + w * (knots[hi] - knots[hi - 1]), false)
}

/// Returns true when the slice is strictly increasing.
pub fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] > w[0])
}

/// Time grid on `[t_start, 1]`, geometrically refined toward `t = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    /// Builds a grid whose spacing near `t` is roughly `ratio * (1 - t)`,
    /// with the last interior node at `1 - s_min` and the final node at
    /// exactly 1.  `max_step` caps the spacing away from the boundary.
    pub fn geometric(t_start: f64, s_min: f64, ratio: f64, max_step: f64) -> Result<Self, GridError> {
        if !(s_min > 0.0 && s_min < 1.0 && ratio > 0.0 && max_step > 0.0 && t_start < 1.0 - s_min) {
            return Err(GridError::BadSpec);
        }
        let mut rev = Vec::new();
        rev.push(1.0);
        let mut s = s_min;
        while 1.0 - s > t_start {
            rev.push(1.0 - s);
            let step = (s * ratio).min(max_step);
            s += step;
        }
        rev.push(t_start);
        rev.reverse();
        rev.dedup();
        Ok(TimeGrid { points: rev })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridError {
    BadSpec,
    NotIncreasing,
}

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridError::BadSpec => write!(f, "invalid grid specification"),
            GridError::NotIncreasing => write!(f, "grid points must be strictly increasing"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for GridError {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interp_exact_at_nodes() {
        let xs = [0.0, 1.0, 2.0, 4.0];
        let ys = [1.0, 3.0, 3.0, 5.0];
        for (x, y) in xs.iter().zip(ys.iter()) {
            assert_eq!(interp_clamped(&xs, &ys, *x), *y);
        }
        assert_eq!(interp_clamped(&xs, &ys, 0.5), 2.0);
        assert_eq!(interp_clamped(&xs, &ys, -1.0), 1.0);
        assert_eq!(interp_clamped(&xs, &ys, 9.0), 5.0);
    }

    #[test]
    fn inverse_roundtrip() {
        let xs = [0.0, 1.0, 2.0, 4.0];
        let ys = [1.0, 3.0, 3.5, 5.0];
        for x in [0.0, 0.3, 1.7, 3.9, 4.0] {
            let y = interp_clamped(&xs, &ys, x);
            let (back, flag) = inverse_interp(&xs, &ys, y);
            assert!(!flag);
            assert!((back - x).abs() < 1e-12, "{back} vs {x}");
        }
        let (lo, clamped) = inverse_interp(&xs, &ys, 0.0);
        assert_eq!(lo, 0.0);
        assert!(clamped);
    }

    #[test]
    fn geometric_grid_shape() {
        let g = TimeGrid::geometric(0.0, 1e-5, 0.01, 0.01).unwrap();
        let p = g.points();
        assert_eq!(p[0], 0.0);
        assert_eq!(*p.last().unwrap(), 1.0);
        assert!(strictly_increasing(p));
        // refined near 1: last interior gap equals s_min
        let n = p.len();
        assert!((1.0 - p[n - 2] - 1e-5).abs() < 1e-12);
    }
}
