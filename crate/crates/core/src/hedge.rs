//! The semi-static subhedge `(ψ, δ)` attached to a lower coupling.
//!
//! On `[a, b]`, `θ(x) = ∫_{x0}^x 2/(q - p)` and `α(x) = xθ(x) - ∫_{x0}^x (q + p)/(q - p)`
//! with `p = P∘F_η̄`, `q = Q∘F_η̄`. Off `[a, b]` both are extended through the
//! right-continuous inverse of `p` (below `a`) and the left-continuous inverse
//! of `q` (above `b`).

use crate::error::{Error, Result};
use crate::lower::CouplingMap;
use crate::measure::Measure;
use crate::quadrature::{integrate_n, Quadrature};
use crate::transport::Split;

const UNIFORM_NODES: usize = 512;
const CELL_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy)]
struct Node {
    z: f64,
    p: f64,
    q: f64,
    /// `∫_a^z 2/(q - p)` and `∫_a^z (q + p)/(q - p)`.
    cum: [f64; 2],
}

fn integrand(s: &Split) -> [f64; 2] {
    match (s.lo.is_infinite(), s.hi.is_infinite()) {
        (true, true) => [0.0, 0.0],
        (true, false) => [0.0, -1.0],
        (false, true) => [0.0, 1.0],
        _ => {
            let w = s.hi - s.lo;
            if w > 0.0 {
                [2.0 / w, (s.hi + s.lo) / w]
            } else {
                [0.0, 0.0]
            }
        }
    }
}

/// Minimum of the Lagrangian over a grid plus the support of the coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubhedgeCertificate {
    pub min_lagrangian: f64,
    pub argmin: (f64, f64),
    /// Largest `|L|` over points `(x, y)` charged by the coupling.
    pub support_max_abs: f64,
    pub passed: bool,
}

pub const SUBHEDGE_TOL: f64 = 1e-9;

/// `(ψ, δ)` normalised by `ψ(x0) = δ(x0) = 0`.
#[derive(Debug, Clone)]
pub struct HedgePair<'m> {
    map: &'m CouplingMap,
    x0: f64,
    a: f64,
    b: f64,
    nodes: Vec<Node>,
    base: [f64; 2],
}

impl<'m> HedgePair<'m> {
    /// Hedge with `x0 = (a + b)/2`.
    pub fn new(map: &'m CouplingMap) -> Result<HedgePair<'m>> {
        let p = map.pair();
        HedgePair::with_x0(map, 0.5 * (p.a + p.b))
    }

    pub fn with_x0(map: &'m CouplingMap, x0: f64) -> Result<HedgePair<'m>> {
        let pair = map.pair();
        let (a, b) = (pair.a, pair.b);
        if !(x0 >= a && x0 <= b) {
            return Err(Error::domain("x0", x0, "[a, b]"));
        }
        let mut h = HedgePair {
            map,
            x0,
            a,
            b,
            nodes: Vec::new(),
            base: [0.0; 2],
        };
        if map.is_identity() || a == b {
            return Ok(h);
        }
        let eta = &pair.eta_bar;
        let mut zs: Vec<f64> = (0..=UNIFORM_NODES)
            .map(|i| a + (b - a) * i as f64 / UNIFORM_NODES as f64)
            .collect();
        zs.push(x0);
        zs.extend(eta.breakpoints());
        for &u in map.u_breaks() {
            zs.push(eta.quantile_mass(u * eta.mass()));
        }
        zs.retain(|&z| z >= a && z <= b);
        zs.sort_by(f64::total_cmp);
        zs.dedup();

        let mut nodes: Vec<Node> = Vec::with_capacity(zs.len());
        let mut acc = [0.0; 2];
        for (i, &z) in zs.iter().enumerate() {
            if i > 0 {
                let est = h.cell_integral(zs[i - 1], z)?;
                acc[0] += est[0];
                acc[1] += est[1];
            }
            let s = map.split_at_point(z)?;
            nodes.push(Node { z, p: s.lo, q: s.hi, cum: acc });
        }
        h.nodes = nodes;
        h.base = h.cumulative(x0)?;
        Ok(h)
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    fn cell_integral(&self, lo: f64, hi: f64) -> Result<[f64; 2]> {
        let mut failure = None;
        let est = integrate_n(
            |z| match self.map.split_at_point(z) {
                Ok(s) => integrand(&s),
                Err(e) => {
                    failure.get_or_insert(e);
                    [0.0; 2]
                }
            },
            lo,
            hi,
            &[],
            Quadrature::with_tol(CELL_TOL),
        );
        match failure {
            Some(e) => Err(e),
            None => Ok(est.value),
        }
    }

    fn cumulative(&self, z: f64) -> Result<[f64; 2]> {
        let i = self.nodes.partition_point(|n| n.z <= z).saturating_sub(1);
        let n = &self.nodes[i];
        if z <= n.z {
            return Ok(n.cum);
        }
        let d = self.cell_integral(n.z, z)?;
        Ok([n.cum[0] + d[0], n.cum[1] + d[1]])
    }

    fn theta_alpha(&self, z: f64) -> Result<(f64, f64)> {
        if self.nodes.is_empty() {
            return Ok((0.0, 0.0));
        }
        let c = self.cumulative(z)?;
        let theta = c[0] - self.base[0];
        let int = c[1] - self.base[1];
        Ok((theta, z * theta - int))
    }

    fn check_inside(&self, x: f64) -> Result<()> {
        if x >= self.a && x <= self.b {
            Ok(())
        } else {
            Err(Error::domain("x", x, "[a, b]"))
        }
    }

    pub fn theta(&self, x: f64) -> Result<f64> {
        self.check_inside(x)?;
        Ok(self.theta_alpha(x)?.0)
    }

    pub fn alpha(&self, x: f64) -> Result<f64> {
        self.check_inside(x)?;
        Ok(self.theta_alpha(x)?.1)
    }

    /// `p_R^{-1}(y) = inf {z ∈ [a, b] : p(z) ≤ y}`, `b` when empty.
    pub fn p_inverse(&self, y: f64) -> Result<f64> {
        self.inverse(y, true)
    }

    /// `q_L^{-1}(y) = sup {z ∈ [a, b] : q(z) ≥ y}`, `a` when `q(a) < y`.
    pub fn q_inverse(&self, y: f64) -> Result<f64> {
        self.inverse(y, false)
    }

    fn inverse(&self, y: f64, lower: bool) -> Result<f64> {
        if self.nodes.is_empty() {
            return Ok(self.a);
        }
        // `inside(z)` holds on a suffix (lower) or prefix (upper) of [a, b]
        let inside = |p: f64, q: f64| if lower { p <= y } else { q >= y };
        let first = inside(self.nodes[0].p, self.nodes[0].q);
        let last = self.nodes[self.nodes.len() - 1];
        if lower {
            if first {
                return Ok(self.a);
            }
            if !inside(last.p, last.q) {
                return Ok(self.b);
            }
        } else {
            if !first {
                return Ok(self.a);
            }
            if inside(last.p, last.q) {
                return Ok(self.b);
            }
        }
        let j = self.nodes.partition_point(|n| inside(n.p, n.q) == first);
        let (mut lo, mut hi) = (self.nodes[j - 1].z, self.nodes[j].z);
        // invariant: inside(lo) == first, inside(hi) != first
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let s = self.map.split_at_point(mid)?;
            if inside(s.lo, s.hi) == first {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // lower: first z with p ≤ y; upper: last z with q ≥ y
        Ok(if lower { hi } else { lo })
    }

    pub fn psi(&self, y: f64) -> Result<f64> {
        if self.map.is_identity() {
            return Ok(0.0);
        }
        if y < self.a {
            let z = self.p_inverse(y)?;
            let (t, al) = self.theta_alpha(z)?;
            Ok(al + (z - y) * (1.0 - t))
        } else if y > self.b {
            let z = self.q_inverse(y)?;
            let (t, al) = self.theta_alpha(z)?;
            Ok(al + (z - y) * (-1.0 - t))
        } else {
            Ok(self.theta_alpha(y)?.1)
        }
    }

    pub fn delta(&self, x: f64) -> Result<f64> {
        if self.map.is_identity() {
            return Ok(0.0);
        }
        let z = if x < self.a {
            self.p_inverse(x)?
        } else if x > self.b {
            self.q_inverse(x)?
        } else {
            x
        };
        Ok(self.theta_alpha(z)?.0)
    }

    /// `ψ` and `δ` together, sharing the inverse.
    fn psi_delta(&self, x: f64) -> Result<(f64, f64)> {
        if self.map.is_identity() {
            return Ok((0.0, 0.0));
        }
        if x < self.a {
            let z = self.p_inverse(x)?;
            let (t, al) = self.theta_alpha(z)?;
            Ok((al + (z - x) * (1.0 - t), t))
        } else if x > self.b {
            let z = self.q_inverse(x)?;
            let (t, al) = self.theta_alpha(z)?;
            Ok((al + (z - x) * (-1.0 - t), t))
        } else {
            let (t, al) = self.theta_alpha(x)?;
            Ok((al, t))
        }
    }

    /// `L(x, y) = |y - x| + ψ(x) - ψ(y) + δ(x)(y - x)`.
    pub fn lagrangian(&self, x: f64, y: f64) -> Result<f64> {
        let (px, dx) = self.psi_delta(x)?;
        Ok(lagrangian_from(x, y, px, dx, self.psi(y)?))
    }

    /// `∫ψ dν - ∫ψ dμ`.
    pub fn dual_value(&self) -> Result<f64> {
        if self.map.is_identity() {
            return Ok(0.0);
        }
        let seeds = self.seeds();
        let pair = self.map.pair();
        let nu = self.integrate(&pair.nu, &seeds)?;
        let mu = self.integrate(&pair.mu, &seeds)?;
        Ok(nu - mu)
    }

    fn integrate(&self, m: &Measure, seeds: &[f64]) -> Result<f64> {
        let mut failure = None;
        let v = m.integrate(
            |y| match self.psi(y) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            },
            seeds,
            Quadrature::with_tol(1e-11),
        );
        match failure {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }

    /// Points where `ψ` may kink: `a`, `b` and the images of the breaks.
    fn seeds(&self) -> Vec<f64> {
        let mut s = vec![self.a, self.b];
        for j in self.map.jumps() {
            s.extend([j.before.lo, j.after.lo, j.before.hi, j.after.hi]);
        }
        for &u in self.map.u_breaks() {
            if let Ok(r) = self.map.record(u) {
                s.extend([r.p, r.q]);
            }
        }
        s.retain(|x| x.is_finite());
        s
    }

    /// Points `(x, y)` charged by the coupling: `(x_u, P(u))`, `(x_u, x_u)`,
    /// `(x_u, Q(u))` over the tabulation grid, and the gaps of every jump.
    pub fn support_points(&self) -> Vec<(f64, f64)> {
        let mut pts = Vec::new();
        for r in self.map.records() {
            for y in [r.p, r.x, r.q] {
                if y.is_finite() {
                    pts.push((r.x, y));
                }
            }
        }
        for j in self.map.jumps() {
            let x = self.map.record(j.u).map_or(j.before.x, |r| r.x);
            for (y0, y1) in [(j.before.lo, j.after.lo), (j.before.hi, j.after.hi)] {
                if y0 != y1 && y0.is_finite() && y1.is_finite() {
                    for t in [0.25, 0.5, 0.75] {
                        pts.push((x, y0 + t * (y1 - y0)));
                    }
                }
            }
        }
        pts
    }

    /// Box used for grid verification: hull of both supports padded by 2,
    /// with unbounded ends replaced by the `1e-3` and `1 - 1e-3` quantiles of `ν`.
    pub fn verification_box(&self) -> (f64, f64) {
        let pair = self.map.pair();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for m in [&pair.mu, &pair.nu] {
            if let Some((l, h)) = m.support() {
                lo = lo.min(l);
                hi = hi.max(h);
            }
        }
        if lo.is_infinite() {
            lo = pair.nu.quantile_mass(1e-3 * pair.nu.mass());
        }
        if hi.is_infinite() {
            hi = pair.nu.quantile_mass((1.0 - 1e-3) * pair.nu.mass());
        }
        (lo - 2.0, hi + 2.0)
    }

    /// Checks `L ≥ -1e-9` on an `nx × ny` grid over [`verification_box`](Self::verification_box)
    /// and `|L| ≤ 1e-9` on [`support_points`](Self::support_points).
    pub fn verify_subhedge(&self, nx: usize, ny: usize) -> Result<SubhedgeCertificate> {
        if nx < 2 || ny < 2 {
            return Err(Error::domain("grid", nx.min(ny) as f64, "at least 2 points per axis"));
        }
        let (lo, hi) = self.verification_box();
        let axis = |n: usize| -> Vec<f64> { (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect() };
        let xs = axis(nx);
        let ys = axis(ny);
        let xv = xs.iter().map(|&x| self.psi_delta(x)).collect::<Result<Vec<_>>>()?;
        let yv = ys.iter().map(|&y| self.psi(y)).collect::<Result<Vec<_>>>()?;
        let mut min = f64::INFINITY;
        let mut argmin = (f64::NAN, f64::NAN);
        for (i, &x) in xs.iter().enumerate() {
            let (px, dx) = xv[i];
            for (j, &y) in ys.iter().enumerate() {
                let l = lagrangian_from(x, y, px, dx, yv[j]);
                if l < min {
                    min = l;
                    argmin = (x, y);
                }
            }
        }
        let mut support_max_abs = 0.0_f64;
        for (x, y) in self.support_points() {
            let l = self.lagrangian(x, y)?;
            support_max_abs = support_max_abs.max(l.abs());
            if l < min {
                min = l;
                argmin = (x, y);
            }
        }
        Ok(SubhedgeCertificate {
            min_lagrangian: min,
            argmin,
            support_max_abs,
            passed: min >= -SUBHEDGE_TOL && support_max_abs <= SUBHEDGE_TOL,
        })
    }
}

fn lagrangian_from(x: f64, y: f64, psi_x: f64, delta_x: f64, psi_y: f64) -> f64 {
    (y - x).abs() + psi_x - psi_y + delta_x * (y - x)
}
