//! Piecewise closed-form curves `quad·x² + lin·x + cst + inv/x`.
//!
//! Call functions of atoms, uniform pieces and inverse-cube pieces are of
//! this form between consecutive breakpoints, and so is every difference of
//! call functions. Conjugates `inf_x {f(x) - θx}` over a convex stretch are
//! computed by scanning one-sided slopes, which pins down the whole set of
//! minimisers without comparing function values.

use crate::error::{Error, Result};

/// Coefficients of `quad·x² + lin·x + cst + inv/x` on one segment.
///
/// A segment with `inv != 0` never contains the origin.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Coeffs {
    pub quad: f64,
    pub lin: f64,
    pub cst: f64,
    pub inv: f64,
}

impl Coeffs {
    pub fn value(&self, x: f64) -> f64 {
        let base = (self.quad * x + self.lin) * x + self.cst;
        if self.inv == 0.0 {
            base
        } else {
            base + self.inv / x
        }
    }

    pub fn slope(&self, x: f64) -> f64 {
        let base = 2.0 * self.quad * x + self.lin;
        if self.inv == 0.0 {
            base
        } else {
            base - self.inv / (x * x)
        }
    }

    pub fn curvature(&self, x: f64) -> f64 {
        if self.inv == 0.0 {
            2.0 * self.quad
        } else {
            2.0 * self.quad + 2.0 * self.inv / (x * x * x)
        }
    }

    /// Slope as `x` runs off to `dir·∞`.
    pub fn slope_limit(&self, dir: f64) -> f64 {
        if self.quad == 0.0 {
            self.lin
        } else if self.quad * dir > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Slope at `x`, allowing `x = ±∞`.
    fn slope_at(&self, x: f64) -> f64 {
        if x.is_infinite() {
            self.slope_limit(x.signum())
        } else {
            self.slope(x)
        }
    }

    pub(crate) fn add_scaled(&mut self, other: &Coeffs, s: f64) {
        self.quad += s * other.quad;
        self.lin += s * other.lin;
        self.cst += s * other.cst;
        self.inv += s * other.inv;
    }

    pub(crate) fn scaled(&self, s: f64) -> Coeffs {
        Coeffs {
            quad: s * self.quad,
            lin: s * self.lin,
            cst: s * self.cst,
            inv: s * self.inv,
        }
    }

    /// Point of `[l, r]` where the slope equals `target`, given that the slope
    /// is monotone on `[l, r]` and brackets `target`. Returns the infinite end
    /// when the crossing only happens in the limit.
    fn solve_slope(&self, target: f64, l: f64, r: f64) -> f64 {
        let x = if self.inv == 0.0 {
            if self.quad == 0.0 {
                l
            } else {
                (target - self.lin) / (2.0 * self.quad)
            }
        } else if self.quad == 0.0 {
            let ratio = self.inv / (self.lin - target);
            let side = if l.is_finite() && r.is_finite() {
                (l + r).signum()
            } else if l.is_finite() {
                1.0
            } else {
                -1.0
            };
            if ratio > 0.0 && ratio.is_finite() {
                side * ratio.sqrt()
            } else if l.is_infinite() {
                l
            } else {
                r
            }
        } else {
            bisect_slope(self, target, l, r)
        };
        x.clamp(l, r)
    }
}

fn bisect_slope(c: &Coeffs, target: f64, l: f64, r: f64) -> f64 {
    let (mut lo, mut hi) = (l, r);
    if !lo.is_finite() || !hi.is_finite() {
        return if lo.is_finite() { lo } else { hi };
    }
    let increasing = c.slope(hi) >= c.slope(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let below = c.slope(mid) < target;
        if below == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Which end of a tied set of optimisers to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pick {
    Largest,
    Smallest,
}

impl Pick {
    pub fn opposite(self) -> Pick {
        match self {
            Pick::Largest => Pick::Smallest,
            Pick::Smallest => Pick::Largest,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Optimal value and optimiser of an affine-shifted curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub value: f64,
    pub at: f64,
}

/// A continuous piecewise curve; segment `i` covers `[breaks[i-1], breaks[i]]`
/// with `breaks[-1] = -∞` and `breaks[len] = +∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseCurve {
    breaks: Vec<f64>,
    segs: Vec<Coeffs>,
}

impl PiecewiseCurve {
    pub(crate) fn new(breaks: Vec<f64>, segs: Vec<Coeffs>) -> Self {
        debug_assert_eq!(segs.len(), breaks.len() + 1);
        debug_assert!(breaks.windows(2).all(|w| w[0] < w[1]));
        PiecewiseCurve { breaks, segs }
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    /// Segments as `(lo, hi, coeffs)`.
    pub fn segments(&self) -> impl DoubleEndedIterator<Item = (f64, f64, &Coeffs)> + '_ {
        self.segs.iter().enumerate().map(move |(i, c)| {
            let (lo, hi) = self.bounds(i);
            (lo, hi, c)
        })
    }

    fn bounds(&self, i: usize) -> (f64, f64) {
        let lo = if i == 0 {
            f64::NEG_INFINITY
        } else {
            self.breaks[i - 1]
        };
        let hi = if i == self.breaks.len() {
            f64::INFINITY
        } else {
            self.breaks[i]
        };
        (lo, hi)
    }

    fn index(&self, x: f64, side: Side) -> usize {
        match side {
            // segment with lo < x <= hi
            Side::Left => self.breaks.partition_point(|&b| b < x),
            // segment with lo <= x < hi
            Side::Right => self.breaks.partition_point(|&b| b <= x),
        }
    }

    pub fn coeffs_at(&self, x: f64, side: Side) -> &Coeffs {
        &self.segs[self.index(x, side)]
    }

    pub fn value(&self, x: f64) -> f64 {
        if x.is_infinite() {
            let c = if x < 0.0 {
                &self.segs[0]
            } else {
                &self.segs[self.segs.len() - 1]
            };
            return if c.quad == 0.0 && c.lin == 0.0 {
                c.cst
            } else {
                f64::NAN
            };
        }
        self.segs[self.index(x, Side::Left)].value(x)
    }

    /// One-sided derivative; at a breakpoint the side decides which segment is used.
    pub fn slope(&self, x: f64, side: Side) -> f64 {
        self.segs[self.index(x, side)].slope_at(x)
    }

    /// `s1·self + s2·other` on the union of breakpoints.
    pub fn combine(&self, s1: f64, other: &PiecewiseCurve, s2: f64) -> PiecewiseCurve {
        let mut breaks: Vec<f64> = self.breaks.iter().chain(&other.breaks).copied().collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let mut segs = Vec::with_capacity(breaks.len() + 1);
        for i in 0..=breaks.len() {
            let mid = cell_probe(&breaks, i);
            let mut c = self.coeffs_at(mid, Side::Right).scaled(s1);
            c.add_scaled(other.coeffs_at(mid, Side::Right), s2);
            segs.push(c);
        }
        PiecewiseCurve { breaks, segs }
    }

    pub fn scaled(&self, s: f64) -> PiecewiseCurve {
        PiecewiseCurve {
            breaks: self.breaks.clone(),
            segs: self.segs.iter().map(|c| c.scaled(s)).collect(),
        }
    }

    /// Forces the two unbounded segments to vanish at infinity by dropping
    /// `lin`/`cst` roundoff below `tol`.
    pub(crate) fn snap_tails(&mut self, tol: f64) {
        let last = self.segs.len() - 1;
        for i in [0, last] {
            let c = &mut self.segs[i];
            if c.quad == 0.0 && c.lin.abs() <= tol && c.cst.abs() <= tol {
                c.lin = 0.0;
                c.cst = 0.0;
            }
        }
    }

    /// `inf_{x ∈ [lo, hi]} f(x) − θx` for `f` convex on `[lo, hi]`; `pick`
    /// chooses the end of the set of minimisers.
    pub fn inf_affine(&self, lo: f64, hi: f64, theta: f64, pick: Pick) -> Result<Extremum> {
        self.scan(1.0, lo, hi, theta, pick)
    }

    /// `sup_{x ∈ [lo, hi]} f(x) − θx` for `f` concave on `[lo, hi]`.
    pub fn sup_affine(&self, lo: f64, hi: f64, theta: f64, pick: Pick) -> Result<Extremum> {
        let e = self.scan(-1.0, lo, hi, -theta, pick)?;
        Ok(Extremum {
            value: -e.value,
            at: e.at,
        })
    }

    /// Minimises `g − θx` with `g = sign·f` convex on `[lo, hi]`.
    fn scan(&self, sign: f64, lo: f64, hi: f64, theta: f64, pick: Pick) -> Result<Extremum> {
        if !(lo <= hi) {
            return Err(Error::domain("interval", lo, "lo <= hi"));
        }
        let first = self.index(lo, Side::Right);
        let last = self.index(hi, Side::Left);
        if lo == hi {
            let c = &self.segs[first];
            return Ok(Extremum {
                value: sign * c.value(lo) - theta * lo,
                at: lo,
            });
        }
        let clip = |i: usize| {
            let (l, r) = self.bounds(i);
            (l.max(lo), r.min(hi), &self.segs[i])
        };
        let gslope = |c: &Coeffs, x: f64| sign * c.slope_at(x);
        let out_of_range = || Error::SlopeRange { theta: sign * theta };

        let found: Option<(f64, &Coeffs)> = match pick {
            Pick::Largest => {
                let mut hit = None;
                for i in (first..=last).rev() {
                    let (l, r, c) = clip(i);
                    if !(l < r) {
                        continue;
                    }
                    let sr = gslope(c, r);
                    if sr <= theta {
                        if r.is_infinite() && sr < theta {
                            return Err(out_of_range());
                        }
                        hit = Some((r, c));
                        break;
                    }
                    if gslope(c, l) <= theta {
                        hit = Some((c.solve_slope(sign * theta, l, r), c));
                        break;
                    }
                }
                hit
            }
            Pick::Smallest => {
                let mut hit = None;
                for i in first..=last {
                    let (l, r, c) = clip(i);
                    if !(l < r) {
                        continue;
                    }
                    let sl = gslope(c, l);
                    if sl >= theta {
                        if l.is_infinite() && sl > theta {
                            return Err(out_of_range());
                        }
                        hit = Some((l, c));
                        break;
                    }
                    if gslope(c, r) >= theta {
                        hit = Some((c.solve_slope(sign * theta, l, r), c));
                        break;
                    }
                }
                hit
            }
        };

        let (at, c) = match found {
            Some(hit) => hit,
            None => {
                // every slope is on one side of θ: optimum at the finite end
                let end = match pick {
                    Pick::Largest => lo,
                    Pick::Smallest => hi,
                };
                if end.is_infinite() {
                    return Err(out_of_range());
                }
                (end, &self.segs[self.index(end, Side::Right).min(last)])
            }
        };
        let value = if at.is_infinite() {
            // slope limit equals θ here, so the affine part has cancelled
            sign * c.cst
        } else {
            sign * c.value(at) - theta * at
        };
        Ok(Extremum { value, at })
    }

    /// Global minimum over the real line (limits at ±∞ included), found by
    /// enumerating breakpoints and stationary points of every segment.
    pub fn global_min(&self) -> Extremum {
        let mut best = Extremum {
            value: f64::INFINITY,
            at: f64::NAN,
        };
        let mut consider = |x: f64, v: f64| {
            if v < best.value {
                best = Extremum { value: v, at: x };
            }
        };
        for (lo, hi, c) in self.segments() {
            if lo.is_finite() {
                consider(lo, c.value(lo));
            }
            if hi.is_finite() {
                consider(hi, c.value(hi));
            }
            for x in stationary_points(c, lo, hi) {
                consider(x, c.value(x));
            }
            for (end, dir) in [(lo, -1.0), (hi, 1.0)] {
                if end.is_infinite() {
                    if c.quad == 0.0 && c.lin == 0.0 {
                        consider(end, c.cst);
                    } else if c.quad * dir < 0.0 || (c.quad == 0.0 && c.lin * dir < 0.0) {
                        consider(end, f64::NEG_INFINITY);
                    }
                }
            }
        }
        best
    }
}

/// Representative interior point of cell `i` of a break list.
pub(crate) fn cell_probe(breaks: &[f64], i: usize) -> f64 {
    match (i, breaks.len()) {
        (_, 0) => 0.0,
        (0, _) => breaks[0] - 1.0,
        (i, n) if i == n => breaks[n - 1] + 1.0,
        (i, _) => 0.5 * (breaks[i - 1] + breaks[i]),
    }
}

/// Interior zeros of the slope of one segment.
fn stationary_points(c: &Coeffs, lo: f64, hi: f64) -> Vec<f64> {
    let inside = |x: f64| x.is_finite() && x > lo && x < hi;
    let mut out = Vec::new();
    if c.inv == 0.0 {
        if c.quad != 0.0 {
            let x = -c.lin / (2.0 * c.quad) + 0.0;
            if inside(x) {
                out.push(x);
            }
        }
    } else if c.quad == 0.0 {
        let ratio = c.inv / c.lin;
        if ratio > 0.0 {
            for x in [ratio.sqrt(), -ratio.sqrt()] {
                if inside(x) {
                    out.push(x);
                }
            }
        }
    } else {
        // 2q x³ + l x² − inv = 0: bracket sign changes on a fine sample
        let (l, r) = (lo.max(-1e6), hi.min(1e6));
        if l < r {
            let n = 256;
            let mut prev_x = l;
            let mut prev = c.slope(l);
            for k in 1..=n {
                let x = l + (r - l) * k as f64 / n as f64;
                let s = c.slope(x);
                if prev == 0.0 {
                    out.push(prev_x);
                } else if prev * s < 0.0 {
                    out.push(bisect_slope(c, 0.0, prev_x, x));
                }
                prev_x = x;
                prev = s;
            }
        }
        out.retain(|&x| inside(x));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// max(|x|, 1) − 1 shifted: convex, flat on [-1, 1].
    fn bowl() -> PiecewiseCurve {
        PiecewiseCurve::new(
            vec![-1.0, 1.0],
            vec![
                Coeffs { lin: -1.0, cst: -1.0, ..Coeffs::default() },
                Coeffs::default(),
                Coeffs { lin: 1.0, cst: -1.0, ..Coeffs::default() },
            ],
        )
    }

    #[test]
    fn ties_resolved_by_pick() {
        let c = bowl();
        let big = c.inf_affine(f64::NEG_INFINITY, f64::INFINITY, 0.0, Pick::Largest).unwrap();
        let small = c.inf_affine(f64::NEG_INFINITY, f64::INFINITY, 0.0, Pick::Smallest).unwrap();
        assert_eq!((big.at, big.value), (1.0, 0.0));
        assert_eq!((small.at, small.value), (-1.0, 0.0));
    }

    #[test]
    fn kink_absorbs_slope_range() {
        let c = bowl();
        for theta in [0.25, 0.5, 0.999] {
            let e = c.inf_affine(-10.0, 10.0, theta, Pick::Largest).unwrap();
            assert_eq!(e.at, 1.0);
            assert!((e.value + theta).abs() < 1e-15);
        }
        // slope beyond every segment: unbounded on the full line
        assert!(c.inf_affine(f64::NEG_INFINITY, f64::INFINITY, 2.0, Pick::Largest).is_err());
        // but fine on a bounded region
        let e = c.inf_affine(-10.0, 5.0, 2.0, Pick::Largest).unwrap();
        assert_eq!(e.at, 5.0);
    }

    #[test]
    fn quadratic_stationary_point() {
        let c = PiecewiseCurve::new(vec![], vec![Coeffs { quad: 0.5, ..Coeffs::default() }]);
        let e = c.inf_affine(f64::NEG_INFINITY, f64::INFINITY, 0.3, Pick::Smallest).unwrap();
        assert!((e.at - 0.3).abs() < 1e-15);
        assert!((e.value + 0.045).abs() < 1e-15);
        let s = c.scaled(-1.0).sup_affine(-1.0, 1.0, -0.3, Pick::Largest).unwrap();
        assert!((s.at - 0.3).abs() < 1e-15);
        assert!((s.value - 0.045).abs() < 1e-15);
    }

    #[test]
    fn inverse_tail_limit() {
        // 1/(2|x|) on (-∞, -1]: slopes tend to 0, infimum at θ = 0 is not attained
        let c = PiecewiseCurve::new(
            vec![-1.0],
            vec![
                Coeffs { inv: -0.5, ..Coeffs::default() },
                Coeffs { lin: 0.5, cst: 1.0, ..Coeffs::default() },
            ],
        );
        let e = c.inf_affine(f64::NEG_INFINITY, -1.0, 0.0, Pick::Largest).unwrap();
        assert_eq!(e.at, f64::NEG_INFINITY);
        assert_eq!(e.value, 0.0);
        let e = c.inf_affine(f64::NEG_INFINITY, -1.0, 0.125, Pick::Largest).unwrap();
        assert!((e.at + 2.0).abs() < 1e-15);
        assert!((e.value - (0.25 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn global_min_finds_interior_dip() {
        let c = PiecewiseCurve::new(
            vec![-1.0, 1.0],
            vec![
                Coeffs::default(),
                Coeffs { quad: 0.25, cst: -0.25, ..Coeffs::default() },
                Coeffs::default(),
            ],
        );
        let m = c.global_min();
        assert_eq!(m.at, 0.0);
        assert_eq!(m.value, -0.25);
    }
}
