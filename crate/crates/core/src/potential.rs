//! The potential `D = C_ν - C_μ`: evaluation, one-sided slopes, the shape
//! test behind the dispersion assumption and conjugates on each region.

use crate::curve::{Extremum, Pick, PiecewiseCurve, Side};
use crate::error::Result;
use crate::measure::{order::difference_curve, MarginalPair, Measure};

const SHAPE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// `(-∞, a]`, where `D` is convex; conjugate is an infimum.
    BelowA,
    /// `[b, ∞)`, where `D` is convex; conjugate is an infimum.
    AboveB,
    /// `[a, b]`, where `D` is concave; conjugate is a supremum.
    Inside,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShapeVerdict {
    Ok,
    Violation(f64),
}

#[derive(Debug, Clone)]
pub struct Potential {
    curve: PiecewiseCurve,
    a: f64,
    b: f64,
}

impl Potential {
    /// `D = C_ν - C_μ` for a decomposed pair.
    pub fn new(pair: &MarginalPair) -> Potential {
        Potential::from_parts(&pair.mu, &pair.nu, pair.a, pair.b)
    }

    /// `D̄ = C_γ̄ - C_η̄ = D / (1 - κ)`, the potential of the residual problem.
    pub fn residual(pair: &MarginalPair) -> Potential {
        Potential::from_parts(&pair.eta_bar, &pair.gamma_bar, pair.a, pair.b)
    }

    /// Potential of an arbitrary pair with a caller-chosen interval `[a, b]`.
    pub fn from_parts(mu: &Measure, nu: &Measure, a: f64, b: f64) -> Potential {
        Potential {
            curve: difference_curve(mu, nu),
            a,
            b,
        }
    }

    pub fn curve(&self) -> &PiecewiseCurve {
        &self.curve
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.curve.value(x)
    }

    pub fn slope(&self, x: f64, side: Side) -> f64 {
        self.curve.slope(x, side)
    }

    /// Concavity on `(a, b)` and convexity off it, from segment curvatures and
    /// slope jumps at breakpoints.
    pub fn shape_check(&self) -> ShapeVerdict {
        let (a, b) = (self.a, self.b);
        for (lo, hi, c) in self.curve.segments() {
            for (rlo, rhi, concave) in [(f64::NEG_INFINITY, a, false), (a, b, true), (b, f64::INFINITY, false)] {
                let (l, r) = (lo.max(rlo), hi.min(rhi));
                if !(l < r) {
                    continue;
                }
                for x in [l, r] {
                    let curv = if x.is_infinite() { 2.0 * c.quad } else { c.curvature(x) };
                    let bad = if concave { curv > SHAPE_TOL } else { curv < -SHAPE_TOL };
                    if bad {
                        let at = if x.is_finite() { x } else if l.is_finite() { l } else { r };
                        return ShapeVerdict::Violation(at);
                    }
                }
            }
        }
        for &x in self.curve.breaks() {
            if x == a || x == b {
                continue;
            }
            let jump = self.slope(x, Side::Right) - self.slope(x, Side::Left);
            let inside = x > a && x < b;
            if (inside && jump > SHAPE_TOL) || (!inside && jump < -SHAPE_TOL) {
                return ShapeVerdict::Violation(x);
            }
        }
        ShapeVerdict::Ok
    }

    /// `inf_{x ≤ a} {D(x) - θx}`, `inf_{x ≥ b} {D(x) - θx}` or
    /// `sup_{a ≤ x ≤ b} {D(x) - θx}` with its optimiser.
    pub fn conjugate(&self, region: Region, theta: f64, pick: Pick) -> Result<Extremum> {
        match region {
            Region::BelowA => self.curve.inf_affine(f64::NEG_INFINITY, self.a, theta, pick),
            Region::AboveB => self.curve.inf_affine(self.b, f64::INFINITY, theta, pick),
            Region::Inside => self.curve.sup_affine(self.a, self.b, theta, pick),
        }
    }

    /// Global maximum of `D`.
    pub fn max(&self) -> Extremum {
        let m = self.curve.scaled(-1.0).global_min();
        Extremum {
            value: -m.value,
            at: m.at,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{decompose, Atom, TailPiece, UniformPiece};
    use proptest::prelude::*;

    fn uniform_pair() -> MarginalPair {
        decompose(&Measure::uniform(-1.0, 1.0), &Measure::uniform(-2.0, 2.0)).unwrap()
    }

    fn moduniform_pair() -> MarginalPair {
        let nu = Measure::new(
            vec![],
            vec![
                UniformPiece { lo: -2.0, hi: -1.0, w: 0.625 },
                UniformPiece { lo: 1.0, hi: 4.0, w: 0.375 },
            ],
        )
        .unwrap();
        decompose(&Measure::uniform(-1.0, 1.0), &nu).unwrap()
    }

    fn discrete_pair() -> MarginalPair {
        let third = 1.0 / 3.0;
        let nu = Measure::discrete(&[(-2.0, third), (-1.0, third), (3.0, third)]).unwrap();
        decompose(&Measure::uniform(-1.0, 1.0), &nu).unwrap()
    }

    fn atoms_pair() -> MarginalPair {
        let mu = Measure::new(
            vec![Atom { x: -0.5, w: 0.5 }],
            vec![UniformPiece { lo: 0.0, hi: 1.0, w: 0.5 }],
        )
        .unwrap();
        let nu = Measure::with_tails(
            vec![],
            vec![],
            vec![TailPiece::from_edge(-1.0, 0.5), TailPiece::from_edge(1.0, 0.5)],
        )
        .unwrap();
        decompose(&mu, &nu).unwrap()
    }

    #[test]
    fn uniform_values() {
        let d = Potential::new(&uniform_pair());
        assert!((d.value(0.0) - 0.25).abs() < 1e-15);
        assert!(d.value(-2.0).abs() < 1e-15);
        // 1/8 x² + 1/2 x + 1/2 on [-2, -1]
        assert!((d.value(-1.5) - (0.28125 - 0.75 + 0.5)).abs() < 1e-15);
        assert!((d.slope(-1.0, Side::Left) - 0.25).abs() < 1e-15);
        assert!((d.slope(-1.0, Side::Right) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn moduniform_value() {
        let d = Potential::new(&moduniform_pair());
        assert!((d.value(1.0) - 9.0 / 16.0).abs() < 1e-15);
        for x in [-1.5, 0.3, 2.5] {
            let closed = if x <= -1.0 {
                5.0 / 16.0 * (x + 2.0) * (x + 2.0)
            } else if x <= 1.0 {
                11.0 / 16.0 + x / 8.0 - x * x / 4.0
            } else {
                (4.0 - x) * (4.0 - x) / 16.0
            };
            assert!((d.value(x) - closed).abs() < 1e-15);
        }
    }

    #[test]
    fn slope_jump_equals_atom_difference() {
        let p = discrete_pair();
        let d = Potential::new(&p);
        // D' = F_ν - F_μ jumps by ν({x}) - μ({x})
        for x in [-2.0, -1.0, 3.0] {
            let jump = d.slope(x, Side::Right) - d.slope(x, Side::Left);
            assert!((jump - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((d.value(-1.5) - (-1.5 + 2.0) / 3.0).abs() < 1e-15);
        assert!((d.value(2.0) - (1.0 - 2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn shape_checks() {
        assert_eq!(Potential::new(&uniform_pair()).shape_check(), ShapeVerdict::Ok);
        assert_eq!(Potential::new(&discrete_pair()).shape_check(), ShapeVerdict::Ok);
        assert_eq!(Potential::new(&atoms_pair()).shape_check(), ShapeVerdict::Ok);
        // D is concave on (-1, 1) but the chosen interval is only [-1/2, 1/2]
        let bad = Potential::from_parts(&Measure::uniform(-1.0, 1.0), &Measure::uniform(-2.0, 2.0), -0.5, 0.5);
        match bad.shape_check() {
            ShapeVerdict::Violation(x) => assert!((-1.0..=-0.5).contains(&x) || (0.5..=1.0).contains(&x)),
            ShapeVerdict::Ok => panic!("expected a violation"),
        }
    }

    #[test]
    fn conjugate_below_a_matches_grid() {
        let d = Potential::new(&uniform_pair());
        let e = d.conjugate(Region::BelowA, 0.5, Pick::Largest).unwrap();
        // dense-grid oracle over (-∞, -1]; D vanishes below -2
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=200_000 {
            let x = -6.0 + 5.0 * i as f64 / 200_000.0;
            let v = d.value(x) - 0.5 * x;
            if v < best.0 {
                best = (v, x);
            }
        }
        assert!((e.value - best.0).abs() < 1e-9);
        assert!((e.at - best.1).abs() < 1e-4);
        assert!((e.value - 0.625).abs() < 1e-15);
        assert_eq!(e.at, -1.0);
    }

    #[test]
    fn conjugate_at_zero_slope() {
        let d = Potential::new(&uniform_pair());
        let e = d.conjugate(Region::BelowA, 0.0, Pick::Largest).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.at, -2.0);
        assert!(d.conjugate(Region::BelowA, -0.1, Pick::Largest).is_err());
    }

    #[test]
    fn inside_conjugate_on_atom_plateau() {
        let p = atoms_pair();
        let d = Potential::new(&p);
        // D = 3/4 on (-1/2, 0) in the normalisation of the example (κ = 0)
        assert!((d.value(-0.25) - 0.75).abs() < 1e-15);
        for u in [0.05, 0.2, 0.4, 0.5] {
            let theta = 0.5 - u;
            let e = d.conjugate(Region::Inside, theta, Pick::Largest).unwrap();
            let xu = -0.5;
            assert!((e.value - (d.value(xu) - xu * theta)).abs() < 1e-15);
        }
    }

    #[test]
    fn invariants_on_fixtures() {
        for p in [uniform_pair(), moduniform_pair(), discrete_pair()] {
            let d = Potential::new(&p);
            let m = d.max();
            assert!(m.at >= p.a - 1e-12 && m.at <= p.b + 1e-12);
            for i in 0..=400 {
                let x = -5.0 + 10.0 * i as f64 / 400.0;
                for side in [Side::Left, Side::Right] {
                    assert!(d.slope(x, side).abs() <= 1.0 + 1e-15);
                }
                assert!(d.value(x) >= -1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn conjugate_is_concave(t1 in 0.0..0.5f64, t2 in 0.0..0.5f64) {
            let d = Potential::new(&moduniform_pair());
            let f = |t: f64| d.conjugate(Region::BelowA, t, Pick::Largest).unwrap().value;
            prop_assert!(f(0.5 * (t1 + t2)) >= 0.5 * (f(t1) + f(t2)) - 1e-14);
            let g = |t: f64| d.conjugate(Region::AboveB, -t, Pick::Smallest).unwrap().value;
            prop_assert!(g(0.5 * (t1 + t2)) >= 0.5 * (g(t1) + g(t2)) - 1e-14);
        }
    }
}
