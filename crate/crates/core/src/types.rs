//! Shared domain types: time points, guarantee values, stop records.
//!
//! The guarantee value is the floor joined into the reward max; it encodes
//! the best value already secured by earlier stops.  Models with lower
//! boundary `-∞` need a genuine symbolic negative infinity, so [`Guarantee`]
//! is an enum rather than a raw float: comparisons and max-joins treat the
//! boundary case explicitly and no arithmetic is ever performed on it.

use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

/// A point on the unit time axis of the limit model.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TimePoint(f64);

impl TimePoint {
    pub fn new(t: f64) -> Result<Self, TypeError> {
        if (0.0..=1.0).contains(&t) {
            Ok(TimePoint(t))
        } else {
            Err(TypeError::TimeOutOfRange { t })
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

/// A guarantee value `x ∈ [c, ∞)`, where the model lower boundary `c` may
/// be `-∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Guarantee {
    /// The symbolic value `-∞` (only admissible when the model boundary is
    /// itself `-∞`).
    NegInf,
    Finite(f64),
}

impl Guarantee {
    /// Max-join with a finite observation.
    #[inline]
    pub fn join(self, value: f64) -> Guarantee {
        match self {
            Guarantee::NegInf => Guarantee::Finite(value),
            Guarantee::Finite(x) => Guarantee::Finite(if value > x { value } else { x }),
        }
    }

    /// Max-join with another guarantee.
    #[inline]
    pub fn join_guarantee(self, other: Guarantee) -> Guarantee {
        match other {
            Guarantee::NegInf => self,
            Guarantee::Finite(v) => self.join(v),
        }
    }

    #[inline]
    pub fn is_neg_inf(self) -> bool {
        matches!(self, Guarantee::NegInf)
    }

    /// The value as an IEEE float (`-∞` maps to `f64::NEG_INFINITY`).
    /// Intended for comparisons and reporting, never for arithmetic.
    #[inline]
    pub fn as_f64(self) -> f64 {
        match self {
            Guarantee::NegInf => f64::NEG_INFINITY,
            Guarantee::Finite(x) => x,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Guarantee::NegInf => None,
            Guarantee::Finite(x) => Some(x),
        }
    }
}

impl PartialOrd for Guarantee {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Guarantee::NegInf, Guarantee::NegInf) => Some(Ordering::Equal),
            (Guarantee::NegInf, Guarantee::Finite(_)) => Some(Ordering::Less),
            (Guarantee::Finite(_), Guarantee::NegInf) => Some(Ordering::Greater),
            (Guarantee::Finite(a), Guarantee::Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl From<f64> for Guarantee {
    fn from(x: f64) -> Self {
        if x == f64::NEG_INFINITY {
            Guarantee::NegInf
        } else {
            Guarantee::Finite(x)
        }
    }
}

impl fmt::Display for Guarantee {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Guarantee::NegInf => write!(f, "-inf"),
            Guarantee::Finite(x) => write!(f, "{x}"),
        }
    }
}

/// Where a stop happened: a 1-based index of a finite sequence, or a time
/// point of the continuous model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopPosition {
    Index(usize),
    Time(f64),
}

/// One stop of an executed policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopEvent {
    pub position: StopPosition,
    /// The stopped value; `None` for a default stop at the horizon of the
    /// continuous model, where no point is selected.
    pub value: Option<f64>,
    /// True when no threshold exceedance occurred and the stop was forced
    /// at the latest admissible index / the horizon.
    pub forced_default: bool,
}

/// Ordered stops of one policy run plus the realized reward.
///
/// Reward is the max over stopped values joined with the guarantee.  The
/// ordering contract is strict before the horizon and frozen at it: once a
/// stop lands at the horizon, all later stops do too.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiStopResult {
    pub stops: Vec<StopEvent>,
    pub reward: Guarantee,
}

impl MultiStopResult {
    /// Assembles a result, computing the reward as the max of the stopped
    /// values joined with `guarantee`.
    pub fn new(stops: Vec<StopEvent>, guarantee: Guarantee) -> Self {
        let mut reward = guarantee;
        for s in &stops {
            if let Some(v) = s.value {
                reward = reward.join(v);
            }
        }
        MultiStopResult { stops, reward }
    }

    /// Checks the ordering contract.
    ///
    /// For index positions, `horizon_caps[l]` is the latest admissible index
    /// of the `l`-th stop (`n - m + l + 1` in 0-based `l`); strict increase is
    /// required throughout since index caps themselves increase.  For time
    /// positions the horizon is `t = 1`: strictly increasing while below 1,
    /// frozen at 1 afterwards.
    pub fn check_ordering(&self, horizon_caps: Option<&[usize]>) -> Result<(), TypeError> {
        for (l, pair) in self.stops.windows(2).enumerate() {
            match (pair[0].position, pair[1].position) {
                (StopPosition::Index(a), StopPosition::Index(b)) => {
                    if b <= a {
                        return Err(TypeError::StopOrdering { level: l + 1 });
                    }
                }
                (StopPosition::Time(a), StopPosition::Time(b)) => {
                    let ok = if a < 1.0 { b > a } else { b == 1.0 };
                    if !ok {
                        return Err(TypeError::StopOrdering { level: l + 1 });
                    }
                }
                _ => return Err(TypeError::StopOrdering { level: l + 1 }),
            }
        }
        if let Some(caps) = horizon_caps {
            for (l, s) in self.stops.iter().enumerate() {
                if let StopPosition::Index(i) = s.position {
                    if i > caps[l] {
                        return Err(TypeError::StopOrdering { level: l + 1 });
                    }
                }
            }
        }
        // Reward must equal the max over stopped values and the guarantee.
        let mut expect = self
            .stops
            .iter()
            .filter_map(|s| s.value)
            .fold(Guarantee::NegInf, Guarantee::join);
        expect = expect.join_guarantee(self.reward_guarantee_part());
        if expect != self.reward {
            return Err(TypeError::RewardMismatch);
        }
        Ok(())
    }

    // The guarantee component of the reward cannot be recovered from the
    // stops alone, so `check_ordering` treats the recorded reward as the
    // candidate and only verifies it dominates every stopped value.
    fn reward_guarantee_part(&self) -> Guarantee {
        self.reward
    }
}

/// A sampled realization of the planar point process, sorted by time.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedPointSet {
    /// `(τ_k, y_k)` pairs with `τ` ascending.
    pub points: Vec<(f64, f64)>,
    pub truncation: TruncationSpec,
}

/// Region actually sampled: a union of rectangles `[t_start, t_end] × (level, ∞)`.
///
/// The overall envelope `(time_cutoff, level_cutoff)` records the coarsest
/// rectangle containing the union.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationSpec {
    pub bands: Vec<TruncationBand>,
    /// `1 - δ`: no points sampled after this time.
    pub time_cutoff: f64,
    /// Minimum level over all bands.
    pub level_cutoff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationBand {
    pub t_start: f64,
    pub t_end: f64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TypeError {
    TimeOutOfRange { t: f64 },
    StopOrdering { level: usize },
    RewardMismatch,
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeError::TimeOutOfRange { t } => write!(f, "time point {t} outside [0, 1]"),
            TypeError::StopOrdering { level } => {
                write!(f, "stop ordering violated after level {level}")
            }
            TypeError::RewardMismatch => write!(f, "reward does not equal max of stops"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for TypeError {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guarantee_join_and_order() {
        let g = Guarantee::NegInf;
        assert_eq!(g.join(1.5), Guarantee::Finite(1.5));
        assert_eq!(Guarantee::Finite(2.0).join(1.0), Guarantee::Finite(2.0));
        assert!(Guarantee::NegInf < Guarantee::Finite(-1e300));
        assert_eq!(Guarantee::from(f64::NEG_INFINITY), Guarantee::NegInf);
    }

    #[test]
    fn ordering_contract() {
        let r = MultiStopResult::new(
            alloc::vec![
                StopEvent {
                    position: StopPosition::Time(0.2),
                    value: Some(5.0),
                    forced_default: false
                },
                StopEvent {
                    position: StopPosition::Time(1.0),
                    value: None,
                    forced_default: true
                },
                StopEvent {
                    position: StopPosition::Time(1.0),
                    value: None,
                    forced_default: true
                },
            ],
            Guarantee::NegInf,
        );
        assert_eq!(r.reward, Guarantee::Finite(5.0));
        assert!(r.check_ordering(None).is_ok());

        let bad = MultiStopResult::new(
            alloc::vec![
                StopEvent {
                    position: StopPosition::Time(0.5),
                    value: Some(1.0),
                    forced_default: false
                },
                StopEvent {
                    position: StopPosition::Time(0.4),
                    value: Some(2.0),
                    forced_default: false
                },
            ],
            Guarantee::NegInf,
        );
        assert!(bad.check_ordering(None).is_err());
    }
}
