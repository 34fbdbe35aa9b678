//! Lines tangent to a convex curve on both `(-∞, a]` and `[b, ∞)`.
//!
//! For slopes `s` on the left and `total - s` on the right, the function
//!
//! `g(s) = inf_{x ≤ a} {f(x) - s x} + inf_{x ≥ b} {f(x) - (total - s) x} - offset`
//!
//! is continuous and increasing with one-sided derivative `x_R - x_L` (the
//! two optimisers). Its root is the bi-tangent slope. Conjugates are exact;
//! the root is found by safeguarded Newton, which is exact on piecewise
//! linear stretches and stops at the floating-point fixed point.

use crate::curve::{Extremum, Pick, PiecewiseCurve, Side};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tangency {
    /// Slope on the left region.
    pub slope: f64,
    pub left: Extremum,
    pub right: Extremum,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TwoSided<'c> {
    pub curve: &'c PiecewiseCurve,
    pub a: f64,
    pub b: f64,
    pub pick_left: Pick,
    pub pick_right: Pick,
}

impl TwoSided<'_> {
    fn eval(&self, s: f64, total: f64, offset: f64, picks: (Pick, Pick)) -> Result<(f64, Extremum, Extremum)> {
        let l = self.curve.inf_affine(f64::NEG_INFINITY, self.a, s, picks.0)?;
        let r = self.curve.inf_affine(self.b, f64::INFINITY, total - s, picks.1)?;
        Ok((l.value + r.value - offset, l, r))
    }

    pub fn solve(&self, total: f64, offset: f64) -> Result<Tangency> {
        let picks = (self.pick_left, self.pick_right);
        let left_limit = self.curve.slope(f64::NEG_INFINITY, Side::Right);
        let right_limit = self.curve.slope(f64::INFINITY, Side::Left);
        let s_min = left_limit.max(total - right_limit);
        if !s_min.is_finite() {
            return Err(Error::SlopeRange { theta: s_min });
        }

        let (g_min, _, _) = self.eval(s_min, total, offset, picks)?;
        let root = if g_min >= 0.0 {
            s_min
        } else {
            let mut lo = s_min;
            let mut step = 1.0_f64.max(s_min.abs());
            let mut hi = s_min + step;
            let mut g_hi = self.eval(hi, total, offset, picks)?.0;
            let mut expand = 0;
            while g_hi < 0.0 {
                lo = hi;
                step *= 2.0;
                hi = s_min + step;
                g_hi = self.eval(hi, total, offset, picks)?.0;
                expand += 1;
                if expand > 200 {
                    return Err(Error::SlopeRange { theta: hi });
                }
            }
            self.newton(lo, hi, total, offset, picks)?
        };
        let (_, left, right) = self.eval(root, total, offset, picks)?;
        Ok(Tangency { slope: root, left, right })
    }

    /// Root of `g` in `[lo, hi]` with `g(lo) < 0 <= g(hi)`.
    fn newton(&self, mut lo: f64, mut hi: f64, total: f64, offset: f64, picks: (Pick, Pick)) -> Result<f64> {
        let mut s = hi;
        let mut best = (f64::INFINITY, hi);
        for _ in 0..400 {
            let (g, l, r) = self.eval(s, total, offset, picks)?;
            if g.abs() < best.0 || (g.abs() == best.0 && s < best.1) {
                best = (g.abs(), s);
            }
            if g == 0.0 {
                return Ok(s);
            }
            if g < 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            let slope = r.at - l.at;
            let newton = s - g / slope;
            let next = if slope.is_finite() && slope > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if next == s || next <= lo || next >= hi {
                break;
            }
            s = next;
        }
        Ok(best.1)
    }
}
