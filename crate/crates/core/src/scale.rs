//! Integer scales `j ∈ Z ∪ {±∞}` and exact suprema over monotone predicates.
//!
//! Every label in the crate (`j₀`, `j_n^μ(t)`, `k_n^Z(t)`, tree labels) is the
//! supremum of a set `{j : P(j)}` where `P` is downward closed: `P(j)` implies
//! `P(j - 1)`. [`sup_scale`] finds it exactly using a [`ScaleWindow`] beyond
//! which the distance family is saturated.

use std::fmt;

use serde::{Serialize, Serializer};

/// An extended integer scale. Larger values probe finer resolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scale {
    NegInf,
    Finite(i32),
    PosInf,
}

impl Scale {
    /// `r^(-j)`, with `r^(-∞) = 0` and `r^(+∞) = ∞`.
    pub fn weight(self, r: f64) -> f64 {
        match self {
            Scale::NegInf => f64::INFINITY,
            Scale::Finite(j) => r.powi(-j),
            Scale::PosInf => 0.0,
        }
    }

    pub fn shift(self, by: i32) -> Scale {
        match self {
            Scale::Finite(j) => Scale::Finite(j + by),
            other => other,
        }
    }

    pub fn finite(self) -> Option<i32> {
        match self {
            Scale::Finite(j) => Some(j),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Scale::Finite(_))
    }

    /// Parses `"+inf"`, `"-inf"` or a decimal integer.
    pub fn parse(s: &str) -> Option<Scale> {
        match s.trim() {
            "+inf" | "inf" => Some(Scale::PosInf),
            "-inf" => Some(Scale::NegInf),
            other => other.parse().ok().map(Scale::Finite),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scale::NegInf => write!(f, "-inf"),
            Scale::Finite(j) => write!(f, "{j}"),
            Scale::PosInf => write!(f, "+inf"),
        }
    }
}

impl Serialize for Scale {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Scale::Finite(j) => serializer.serialize_i32(*j),
            other => serializer.serialize_str(&other.to_string()),
        }
    }
}

/// Bracket for scale searches.
///
/// For `j >= saturated` every nonzero term `r^(2j)·δ²` exceeds 1, so the
/// family is constant there. For `j <= linear` no term saturates. `None`
/// means every difference is zero and the family vanishes identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScaleWindow {
    pub linear: i32,
    pub saturated: i32,
}

impl ScaleWindow {
    /// Window for absolute differences in `[min_nonzero, max]`.
    pub fn from_diff_range(r: f64, min_nonzero: f64, max: f64) -> Option<ScaleWindow> {
        if !(max > 0.0) || !(min_nonzero > 0.0) {
            return None;
        }
        let ln_r = r.ln();
        let linear = (-(max.ln()) / ln_r).floor() as i32 - 2;
        let saturated = (-(min_nonzero.ln()) / ln_r).ceil() as i32 + 2;
        Some(ScaleWindow { linear, saturated })
    }
}

const SEARCH_FLOOR: i32 = -100_000;

/// `sup{j ∈ Z : pred(j)}` for a downward-closed predicate.
///
/// `pred` must be constant for `j >= window.saturated`; it is only evaluated
/// at finitely many points. Returns `PosInf` when the predicate holds in the
/// saturated regime and `NegInf` when it never holds down to a very deep floor.
pub fn sup_scale(window: Option<ScaleWindow>, mut pred: impl FnMut(Scale) -> bool) -> Scale {
    let Some(window) = window else {
        return if pred(Scale::PosInf) {
            Scale::PosInf
        } else {
            Scale::NegInf
        };
    };
    if pred(Scale::Finite(window.saturated)) {
        return Scale::PosInf;
    }
    let mut hi = window.saturated;
    let mut lo = window.linear.min(hi - 1);
    let mut step = 1i32;
    while !pred(Scale::Finite(lo)) {
        hi = lo;
        lo = lo.saturating_sub(step);
        step = step.saturating_mul(2);
        if lo <= SEARCH_FLOOR {
            return Scale::NegInf;
        }
    }
    // invariant: pred(lo) && !pred(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(Scale::Finite(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Scale::Finite(lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_places_infinities_at_the_ends() {
        assert!(Scale::NegInf < Scale::Finite(-1000));
        assert!(Scale::Finite(3) < Scale::Finite(4));
        assert!(Scale::Finite(i32::MAX) < Scale::PosInf);
    }

    #[test]
    fn weights() {
        assert_eq!(Scale::PosInf.weight(4.0), 0.0);
        assert_eq!(Scale::Finite(1).weight(4.0), 0.25);
        assert_eq!(Scale::Finite(-2).weight(4.0), 16.0);
        assert!(Scale::NegInf.weight(4.0).is_infinite());
    }

    #[test]
    fn sup_matches_linear_scan() {
        let window = Some(ScaleWindow {
            linear: -3,
            saturated: 5,
        });
        for cut in -40..5 {
            let got = sup_scale(window, |j| j <= Scale::Finite(cut));
            assert_eq!(got, Scale::Finite(cut));
        }
        assert_eq!(sup_scale(window, |_| true), Scale::PosInf);
        assert_eq!(sup_scale(window, |_| false), Scale::NegInf);
        assert_eq!(sup_scale(None, |_| true), Scale::PosInf);
    }

    #[test]
    fn parse_round_trips_display() {
        for s in [Scale::NegInf, Scale::Finite(-7), Scale::Finite(0), Scale::PosInf] {
            assert_eq!(Scale::parse(&s.to_string()), Some(s));
        }
    }
}
