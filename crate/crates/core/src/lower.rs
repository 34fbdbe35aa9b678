//! The minimising martingale coupling.
//!
//! With probability `κ` the common mass stays put (`Y = X`). Otherwise
//! `X = F_η̄^{-1}(U)` and `Y ∈ {P(U), Q(U)}`, where `P(u) ≤ a`, `Q(u) ≥ b` are
//! the touching points of the line of slope `φ(u)` tangent to `D̄` on
//! `(-∞, a]` and to `E_u` on `[b, ∞)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::curve::{Pick, PiecewiseCurve, Side};
use crate::error::{Error, Result};
use crate::measure::{MarginalPair, Measure};
use crate::potential::Potential;
use crate::quadrature::Quadrature;
use crate::tangent::TwoSided;
use crate::transport::{bisect_level, open_unit, Jump, Kernel, Split, Table};

/// Values of the construction at one level `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerRecord {
    pub u: f64,
    /// `F_η̄^{-1}(u)`.
    pub x: f64,
    pub p: f64,
    pub q: f64,
    pub phi: f64,
    pub zeta: f64,
}

impl LowerRecord {
    fn from_split(s: &Split) -> LowerRecord {
        LowerRecord {
            u: s.u,
            x: s.x,
            p: s.lo,
            q: s.hi,
            phi: s.slope_lo,
            zeta: s.slope_hi,
        }
    }

    fn split(&self) -> Split {
        Split {
            u: self.u,
            x: self.x,
            lo: self.p,
            hi: self.q,
            slope_lo: self.phi,
            slope_hi: self.zeta,
        }
    }

    /// `w(u) = (Q - x)/(Q - P)`.
    pub fn down_weight(&self) -> f64 {
        self.split().down_weight()
    }
}

/// Which end of a non-unique set of tangency points to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub p: Pick,
    pub q: Pick,
}

impl Default for Selection {
    fn default() -> Self {
        Selection {
            p: Pick::Largest,
            q: Pick::Smallest,
        }
    }
}

impl Selection {
    pub fn opposite(self) -> Selection {
        Selection {
            p: self.p.opposite(),
            q: self.q.opposite(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LowerKernel {
    curve: PiecewiseCurve,
    eta_bar: Measure,
    a: f64,
    b: f64,
    gamma_a: f64,
    /// Nearest support points of `γ̄` on either side of `[a, b]`.
    gamma_ends: (f64, f64),
    selection: Selection,
}

impl LowerKernel {
    fn x_at(&self, u: f64) -> f64 {
        if u <= 0.0 {
            self.a
        } else if u >= 1.0 {
            self.b
        } else {
            self.eta_bar.quantile_mass(u * self.eta_bar.mass())
        }
    }
}

impl Kernel for LowerKernel {
    fn split(&self, u: f64) -> Result<Split> {
        let x = self.x_at(u);
        let total = self.gamma_a - u;
        let offset = self.curve.value(x) - x * total;
        let t = TwoSided {
            curve: &self.curve,
            a: self.a,
            b: self.b,
            pick_left: self.selection.p,
            pick_right: self.selection.q,
        }
        .solve(total, offset)?;
        Ok(Split {
            u,
            x,
            // flat stretches of D̄ outside supp γ̄ tie with its ends
            lo: t.left.at.min(self.gamma_ends.0),
            hi: t.right.at.max(self.gamma_ends.1),
            slope_lo: t.slope,
            slope_hi: total - t.slope,
        })
    }
}

#[derive(Debug, Clone)]
struct Residual {
    kernel: LowerKernel,
    table: Table,
}

/// The optimal lower coupling of a pair satisfying the dispersion assumption.
#[derive(Debug, Clone)]
pub struct CouplingMap {
    pair: MarginalPair,
    common_bar: Option<Measure>,
    residual: Option<Residual>,
}

const TABLE_TOL: f64 = 1e-13;

impl CouplingMap {
    pub fn build(pair: &MarginalPair) -> Result<CouplingMap> {
        CouplingMap::build_with(pair, Selection::default())
    }

    pub fn build_with(pair: &MarginalPair, selection: Selection) -> Result<CouplingMap> {
        let common_bar = (pair.kappa > 0.0).then(|| pair.common.scaled(1.0 / pair.common.mass()));
        if pair.identical() {
            return Ok(CouplingMap {
                pair: pair.clone(),
                common_bar,
                residual: None,
            });
        }
        let potential = Potential::residual(pair);
        let kernel = LowerKernel {
            curve: potential.curve().clone(),
            eta_bar: pair.eta_bar.clone(),
            a: pair.a,
            b: pair.b,
            gamma_a: pair.gamma_a,
            gamma_ends: pair.gamma_bar.inner_ends(pair.a, pair.b),
            selection,
        };
        let breaks = level_breaks(&kernel, &pair.eta_bar)?;
        let table = Table::build(&kernel, &breaks, Quadrature::with_tol(TABLE_TOL))?;
        Ok(CouplingMap {
            pair: pair.clone(),
            common_bar,
            residual: Some(Residual { kernel, table }),
        })
    }

    pub fn pair(&self) -> &MarginalPair {
        &self.pair
    }

    pub fn kappa(&self) -> f64 {
        self.pair.kappa
    }

    /// True when `μ = ν` and the coupling is the identity.
    pub fn is_identity(&self) -> bool {
        self.residual.is_none()
    }

    fn residual(&self) -> Result<&Residual> {
        self.residual
            .as_ref()
            .ok_or_else(|| Error::Unsupported("identical marginals have no residual map".into()))
    }

    /// `(x_u, P, Q, φ, ζ)` at `u ∈ (0, 1)`.
    pub fn record(&self, u: f64) -> Result<LowerRecord> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain("u", u, "(0, 1)"));
        }
        Ok(LowerRecord::from_split(&self.residual()?.kernel.split(u)?))
    }

    /// `(φ(u), P(u), Q(u))`.
    pub fn phi(&self, u: f64) -> Result<(f64, f64, f64)> {
        let r = self.record(u)?;
        Ok((r.phi, r.p, r.q))
    }

    /// `ζ(u) = γ_a - u - φ(u)`.
    pub fn zeta(&self, u: f64) -> Result<f64> {
        Ok(self.record(u)?.zeta)
    }

    /// `w(u)`, the probability of moving down to `P(u)`.
    pub fn down_probability(&self, u: f64) -> Result<f64> {
        Ok(self.record(u)?.down_weight())
    }

    /// `E_u(y) = D̄(x_u) + (y - x_u)(γ_a - u) - D̄(y)` on the residual potential.
    pub fn e_u(&self, u: f64, y: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain("u", u, "(0, 1)"));
        }
        let k = &self.residual()?.kernel;
        let x = k.x_at(u);
        Ok(k.curve.value(x) + (y - x) * (k.gamma_a - u) - k.curve.value(y))
    }

    /// `(p(z), q(z)) = (P(F_η̄(z)), Q(F_η̄(z)))` for `z ∈ [a, b]`.
    pub fn pq_at(&self, z: f64) -> Result<(f64, f64)> {
        let s = self.split_at_point(z)?;
        Ok((s.lo, s.hi))
    }

    pub(crate) fn split_at_point(&self, z: f64) -> Result<Split> {
        let r = self.residual()?;
        let u = r.kernel.eta_bar.cdf(z).clamp(0.0, 1.0);
        let mut s = r.kernel.split(u)?;
        s.x = z;
        Ok(s)
    }

    /// Levels where `P`, `Q` or `x_u` may kink or jump.
    pub fn u_breaks(&self) -> &[f64] {
        self.residual.as_ref().map_or(&[], |r| &r.table.breaks)
    }

    /// Jumps of `P` or `Q`.
    pub fn jumps(&self) -> &[Jump] {
        self.residual.as_ref().map_or(&[], |r| &r.table.jumps)
    }

    /// The tabulation grid, interior levels only.
    pub fn records(&self) -> Vec<LowerRecord> {
        self.residual.as_ref().map_or_else(Vec::new, |r| {
            r.table
                .nodes
                .iter()
                .filter(|s| s.u > 0.0 && s.u < 1.0)
                .map(LowerRecord::from_split)
                .collect()
        })
    }

    /// `E|Y - X|` under the coupling.
    pub fn primal_price(&self) -> f64 {
        self.residual
            .as_ref()
            .map_or(0.0, |r| (1.0 - self.pair.kappa) * r.table.totals()[2])
    }

    /// `n` draws of `(X, Y)`, reproducible from `seed`.
    pub fn sample(&self, seed: u64, n: usize) -> Result<Vec<(f64, f64)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let stay = open_unit(&mut rng) < self.pair.kappa;
            if stay || self.residual.is_none() {
                let m = self.common_bar.as_ref().unwrap_or(&self.pair.mu);
                let x = m.quantile_mass(open_unit(&mut rng) * m.mass());
                out.push((x, x));
            } else {
                out.push(Table::sample_pair(&self.residual()?.kernel, &mut rng)?);
            }
        }
        Ok(out)
    }

    /// The law of `Y` under the coupling.
    pub fn pushforward_law(&self) -> PushforwardLaw<'_> {
        PushforwardLaw { map: self }
    }

    /// Largest residual of the coupled differential equations for `p`, `q`
    /// over `grid` (central differences of step `h`). `None` when either
    /// marginal has atoms.
    pub fn ode_residual(&self, grid: &[f64], h: f64) -> Result<Option<f64>> {
        let (mu, nu) = (&self.pair.mu, &self.pair.nu);
        if mu.has_atoms() || nu.has_atoms() || self.residual.is_none() {
            return Ok(None);
        }
        let eta = &self.pair.eta_bar;
        let gamma = &self.pair.gamma_bar;
        let mut worst = 0.0_f64;
        for &x in grid {
            let s = self.split_at_point(x)?;
            let up = self.split_at_point(x + h)?;
            let down = self.split_at_point(x - h)?;
            let dp = (up.lo - down.lo) / (2.0 * h);
            let dq = (up.hi - down.hi) / (2.0 * h);
            let (p, q) = (s.lo, s.hi);
            let f = eta.density(x);
            let rp = dp + (q - x) / (q - p) * f / gamma.density(p);
            let rq = dq + (x - p) / (q - p) * f / gamma.density(q);
            worst = worst.max(rp.abs()).max(rq.abs());
        }
        Ok(Some(worst))
    }
}

/// The law of `Y` under a [`CouplingMap`].
#[derive(Debug, Clone, Copy)]
pub struct PushforwardLaw<'m> {
    map: &'m CouplingMap,
}

impl PushforwardLaw<'_> {
    /// `P(Y ≤ y)`.
    pub fn cdf(&self, y: f64) -> Result<f64> {
        let pair = &self.map.pair;
        let common = self.map.common_bar.as_ref().map_or(0.0, |m| m.cdf(y));
        let Some(r) = &self.map.residual else {
            return Ok(pair.mu.cdf(y));
        };
        let residual = residual_cdf(&r.kernel, &r.table, pair.a, pair.b, y)?;
        Ok(pair.kappa * common + (1.0 - pair.kappa) * residual)
    }
}

/// `P(Y ≤ y)` for a two-point map with targets below `a` and above `b`.
pub(crate) fn residual_cdf<K: Kernel>(kernel: &K, table: &Table, a: f64, b: f64, y: f64) -> Result<f64> {
    if y < a {
        mass_where(kernel, table, |s| s.lo <= y, 0)
    } else if y >= b {
        Ok(1.0 - mass_where(kernel, table, |s| s.hi > y, 1)?)
    } else {
        Ok(table.totals()[0])
    }
}

/// `∫ 1{pred} · integrand_k du` for a predicate monotone in `u`.
fn mass_where<K: Kernel, F: Fn(&Split) -> bool>(kernel: &K, table: &Table, pred: F, k: usize) -> Result<f64> {
    let first = pred(&table.nodes[0]);
    let last = pred(&table.nodes[table.nodes.len() - 1]);
    if first == last {
        return Ok(if first { table.totals()[k] } else { 0.0 });
    }
    let t = table.threshold(kernel, &pred)?;
    let below = table.cumulative(kernel, t)[k];
    Ok(if first { below } else { table.totals()[k] - below })
}

/// Levels where the construction can kink: CDF values of `η̄` at its
/// breakpoints, and levels where a tangent slope crosses a one-sided slope of
/// `D̄` at a breakpoint outside `(a, b)`.
fn level_breaks(kernel: &LowerKernel, eta_bar: &Measure) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for z in eta_bar.breakpoints() {
        out.push(eta_bar.cdf_left(z));
        out.push(eta_bar.cdf(z));
    }
    slope_crossings(kernel, &kernel.curve, kernel.a, kernel.b, &mut out)?;
    Ok(out)
}

/// Appends the levels where `slope_lo` (resp. `slope_hi`) equals a one-sided
/// slope of `curve` at a breakpoint `≤ a` (resp. `≥ b`).
pub(crate) fn slope_crossings<K: Kernel>(
    kernel: &K,
    curve: &PiecewiseCurve,
    a: f64,
    b: f64,
    out: &mut Vec<f64>,
) -> Result<()> {
    let s0 = kernel.split(0.0)?;
    let s1 = kernel.split(1.0)?;
    let mut targets: Vec<(f64, bool)> = Vec::new();
    for &z in curve.breaks().iter().chain([a, b].iter()) {
        for side in [Side::Left, Side::Right] {
            let v = curve.slope(z, side);
            if z <= a {
                targets.push((v, true));
            }
            if z >= b {
                targets.push((v, false));
            }
        }
    }
    targets.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
    targets.dedup();
    for (v, left) in targets {
        let pred = |s: &Split| if left { s.slope_lo >= v } else { s.slope_hi >= v };
        let first = pred(&s0);
        if first != pred(&s1) {
            out.push(bisect_level(kernel, &pred, 0.0, 1.0, first)?);
        }
    }
    Ok(())
}
