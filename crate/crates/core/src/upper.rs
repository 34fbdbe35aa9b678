//! The maximising martingale coupling under the strengthened dispersion
//! assumption: no common mass, `μ` on an interval `[a, b]`, `ν` off `(a, b)`.
//!
//! `X = F_μ^{-1}(U)` moves to `G(U) ≤ a` or `H(U) ≥ b`, the touching points of
//! the line of slope `φ̂(u)` lying under `C_ν` on `(-∞, a]` and over `F_u` on
//! `[b, ∞)`. `G` and `H` are non-decreasing.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::curve::{Pick, PiecewiseCurve, Side};
use crate::error::{Error, Result};
use crate::lower::{residual_cdf, slope_crossings};
use crate::measure::{decompose_with, MarginalPair, Measure, MASS_TOL, ORDER_TOL};
use crate::quadrature::Quadrature;
use crate::tangent::TwoSided;
use crate::transport::{open_unit, Kernel, Split, Table};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpperRecord {
    pub u: f64,
    /// `F_μ^{-1}(u)`.
    pub x: f64,
    pub g: f64,
    pub h: f64,
    pub phi: f64,
}

impl UpperRecord {
    fn from_split(s: &Split) -> UpperRecord {
        UpperRecord {
            u: s.u,
            x: s.x,
            g: s.lo,
            h: s.hi,
            phi: s.slope_lo,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpperVerdict {
    Holds,
    /// `μ` is a point mass; the coupling is forced.
    PointMass(f64),
    CommonMass(f64),
    /// `ν` charges the open hull `(a, b)` of the support of `μ`.
    NuInsideHull { a: f64, b: f64, mass: f64 },
}

impl UpperVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, UpperVerdict::Holds | UpperVerdict::PointMass(_))
    }
}

/// Checks the strengthened dispersion assumption for a validated pair.
pub fn check_strengthened(pair: &MarginalPair) -> UpperVerdict {
    let Some((a, b)) = pair.mu.support() else {
        return UpperVerdict::CommonMass(pair.kappa);
    };
    if a == b {
        return UpperVerdict::PointMass(a);
    }
    if pair.kappa > MASS_TOL {
        return UpperVerdict::CommonMass(pair.kappa);
    }
    let mass = pair.nu.cdf_left(b) - pair.nu.cdf(a);
    if mass > MASS_TOL {
        return UpperVerdict::NuInsideHull { a, b, mass };
    }
    UpperVerdict::Holds
}

/// `sqrt(∫y² dν - ∫x² dμ)`, an upper bound for any martingale coupling.
pub fn jensen_bound(mu: &Measure, nu: &Measure) -> f64 {
    (nu.second_moment() - mu.second_moment()).max(0.0).sqrt()
}

#[derive(Debug, Clone)]
struct UpperKernel {
    call_nu: PiecewiseCurve,
    call_mu: PiecewiseCurve,
    mu: Measure,
    a: f64,
    b: f64,
    /// `C_ν(b) - b C'_ν(b+)` and `C'_ν(b+)`.
    b_intercept: f64,
    b_slope: f64,
    /// Nearest support points of `ν` on either side of `[a, b]`.
    nu_ends: (f64, f64),
    /// Right end of the support of `ν`.
    nu_top: f64,
}

impl UpperKernel {
    fn x_at(&self, u: f64) -> f64 {
        if u <= 0.0 {
            self.a
        } else if u >= 1.0 {
            self.b
        } else {
            self.mu.quantile_mass(u * self.mu.mass())
        }
    }

    fn f_u(&self, u: f64, y: f64) -> f64 {
        let x = self.x_at(u);
        self.call_mu.value(x) + (y - x) * (u - 1.0) + self.b_intercept + y * self.b_slope - self.call_nu.value(y)
    }
}

impl Kernel for UpperKernel {
    fn split(&self, u: f64) -> Result<Split> {
        let x = self.x_at(u);
        let total = u - 1.0 + self.b_slope;
        let offset = self.call_mu.value(x) - x * (u - 1.0) + self.b_intercept;
        let t = TwoSided {
            curve: &self.call_nu,
            a: self.a,
            b: self.b,
            pick_left: Pick::Largest,
            pick_right: Pick::Largest,
        }
        .solve(total, offset)?;
        Ok(Split {
            u,
            x,
            // outside supp ν every point of a flat stretch ties; roundoff near u = 1 can pick +∞
            lo: t.left.at.min(self.nu_ends.0),
            hi: t.right.at.max(self.nu_ends.1).min(self.nu_top),
            slope_lo: t.slope,
            slope_hi: total - t.slope,
        })
    }
}

#[derive(Debug, Clone)]
enum Body {
    Forced(f64),
    Bitangent { kernel: UpperKernel, table: Table },
}

#[derive(Debug, Clone)]
pub struct UpperCouplingMap {
    pair: MarginalPair,
    body: Body,
}

const TABLE_TOL: f64 = 1e-13;

impl UpperCouplingMap {
    /// Validates the pair and the strengthened assumption, then builds the map.
    pub fn from_marginals(mu: &Measure, nu: &Measure) -> Result<UpperCouplingMap> {
        UpperCouplingMap::from_marginals_with(mu, nu, ORDER_TOL)
    }

    /// [`from_marginals`](Self::from_marginals) with a caller-chosen convex-order slack.
    pub fn from_marginals_with(mu: &Measure, nu: &Measure, order_tol: f64) -> Result<UpperCouplingMap> {
        let pair = match decompose_with(mu, nu, order_tol) {
            Err(Error::Dispersion { .. }) => Err(Error::Strengthened(
                "the dispersion assumption fails, so the strengthened one does too".into(),
            )),
            other => other,
        }?;
        UpperCouplingMap::build(&pair)
    }

    pub fn build(pair: &MarginalPair) -> Result<UpperCouplingMap> {
        let body = match check_strengthened(pair) {
            UpperVerdict::Holds => {
                let (a, b) = pair.mu.support().expect("non-null measure");
                let call_nu = pair.nu.call_curve();
                let b_slope = call_nu.slope(b, Side::Right);
                let kernel = UpperKernel {
                    call_mu: pair.mu.call_curve(),
                    mu: pair.mu.clone(),
                    a,
                    b,
                    b_intercept: call_nu.value(b) - b * b_slope,
                    b_slope,
                    nu_ends: pair.nu.inner_ends(a, b),
                    nu_top: pair.nu.support().map_or(f64::INFINITY, |s| s.1),
                    call_nu,
                };
                let mut breaks = Vec::new();
                for z in pair.mu.breakpoints() {
                    breaks.push(pair.mu.cdf_left(z));
                    breaks.push(pair.mu.cdf(z));
                }
                slope_crossings(&kernel, &kernel.call_nu, a, b, &mut breaks)?;
                let table = Table::build(&kernel, &breaks, Quadrature::with_tol(TABLE_TOL))?;
                Body::Bitangent { kernel, table }
            }
            UpperVerdict::PointMass(x) => Body::Forced(x),
            UpperVerdict::CommonMass(k) => {
                return Err(Error::Strengthened(format!("common mass {k:e} is positive")));
            }
            UpperVerdict::NuInsideHull { a, b, mass } => {
                return Err(Error::Strengthened(format!(
                    "nu puts mass {mass:e} inside the support hull ({a}, {b}) of mu"
                )));
            }
        };
        Ok(UpperCouplingMap { pair: pair.clone(), body })
    }

    pub fn pair(&self) -> &MarginalPair {
        &self.pair
    }

    fn bitangent(&self) -> Result<(&UpperKernel, &Table)> {
        match &self.body {
            Body::Bitangent { kernel, table } => Ok((kernel, table)),
            Body::Forced(_) => Err(Error::Unsupported("mu is a point mass; the coupling is forced".into())),
        }
    }

    /// `(x_u, G, H, φ̂)` at `u ∈ (0, 1)`.
    pub fn record(&self, u: f64) -> Result<UpperRecord> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain("u", u, "(0, 1)"));
        }
        Ok(UpperRecord::from_split(&self.bitangent()?.0.split(u)?))
    }

    /// `F_u(y)` for `u ∈ (0, 1)`, `y ≥ b`.
    pub fn f_u(&self, u: f64, y: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain("u", u, "(0, 1)"));
        }
        let k = self.bitangent()?.0;
        if !(y >= k.b) {
            return Err(Error::domain("y", y, "[b, ∞)"));
        }
        Ok(k.f_u(u, y))
    }

    pub fn records(&self) -> Vec<UpperRecord> {
        match &self.body {
            Body::Bitangent { table, .. } => table
                .nodes
                .iter()
                .filter(|s| s.u > 0.0 && s.u < 1.0)
                .map(UpperRecord::from_split)
                .collect(),
            Body::Forced(_) => Vec::new(),
        }
    }

    /// `sup E|Y - X|` over martingale couplings.
    pub fn price(&self) -> f64 {
        match &self.body {
            Body::Bitangent { table, .. } => table.totals()[2],
            Body::Forced(x) => {
                let x = *x;
                self.pair.nu.integrate(|y| (y - x).abs(), &[x], Quadrature::with_tol(1e-12))
            }
        }
    }

    pub fn sample(&self, seed: u64, n: usize) -> Result<Vec<(f64, f64)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            match &self.body {
                Body::Bitangent { kernel, .. } => out.push(Table::sample_pair(kernel, &mut rng)?),
                Body::Forced(x) => {
                    let nu = &self.pair.nu;
                    out.push((*x, nu.quantile_mass(open_unit(&mut rng) * nu.mass())));
                }
            }
        }
        Ok(out)
    }

    /// `P(Y ≤ y)` under the coupling.
    pub fn pushforward_cdf(&self, y: f64) -> Result<f64> {
        match &self.body {
            Body::Bitangent { kernel, table } => residual_cdf(kernel, table, kernel.a, kernel.b, y),
            Body::Forced(_) => Ok(self.pair.nu.cdf(y)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{decompose, UniformPiece};

    fn example() -> UpperCouplingMap {
        let nu = Measure::new(
            vec![],
            vec![UniformPiece { lo: -3.0, hi: -1.0, w: 0.5 }, UniformPiece { lo: 1.0, hi: 3.0, w: 0.5 }],
        )
        .unwrap();
        UpperCouplingMap::from_marginals(&Measure::uniform(-1.0, 1.0), &nu).unwrap()
    }

    #[test]
    fn example_closed_forms() {
        let m = example();
        for i in 1..200 {
            let u = i as f64 / 200.0;
            let r = m.record(u).unwrap();
            let x = 2.0 * u - 1.0;
            assert!((r.x - x).abs() < 1e-14);
            assert!((r.g - (x - 2.0)).abs() < 1e-10, "u={u}: G={}", r.g);
            assert!((r.h - (x + 2.0)).abs() < 1e-10, "u={u}: H={}", r.h);
        }
        assert!((m.price() - 2.0).abs() < 1e-10);
        assert!((jensen_bound(&m.pair().mu, &m.pair().nu) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn example_f_u() {
        let m = example();
        for u in [0.1, 0.5, 0.8] {
            let x = 2.0 * u - 1.0;
            for y in [1.0, 1.7, 2.9, 4.0] {
                let closed = (1.0 - 2.0 * x * x - 2.0 * y + 4.0 * x * y - y * y) / 8.0;
                if y <= 3.0 {
                    assert!((m.f_u(u, y).unwrap() - closed).abs() < 1e-14);
                }
            }
        }
        assert!(m.f_u(0.5, 0.0).is_err());
    }

    #[test]
    fn pushforward_and_martingale() {
        let m = example();
        for i in 0..=60 {
            let y = -4.0 + 8.0 * i as f64 / 60.0;
            assert!((m.pushforward_cdf(y).unwrap() - m.pair().nu.cdf(y)).abs() < 1e-9);
        }
        for r in m.records() {
            let w = (r.h - r.x) / (r.h - r.g);
            assert!((w * r.g + (1.0 - w) * r.h - r.x).abs() < 1e-10);
        }
    }

    #[test]
    fn verdicts() {
        let pair = decompose(&Measure::uniform(-1.0, 1.0), &Measure::uniform(-2.0, 2.0)).unwrap();
        assert_eq!(check_strengthened(&pair), UpperVerdict::CommonMass(0.5));
        assert!(matches!(UpperCouplingMap::build(&pair), Err(Error::Strengthened(_))));
        let nu = Measure::discrete(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        let m = UpperCouplingMap::from_marginals(&Measure::dirac(0.0), &nu).unwrap();
        assert!((m.price() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn above_lower_bound() {
        let m = example();
        let lower = crate::lower::CouplingMap::build(m.pair()).unwrap();
        assert!(m.price() >= lower.primal_price());
    }
}
