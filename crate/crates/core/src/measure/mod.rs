//! One-dimensional measures made of point atoms, uniform pieces and
//! inverse-cube pieces (density `k/|x|^3` on an interval avoiding the origin).
//!
//! Every quantity used downstream (CDF, quantiles, moments, call function)
//! has a closed form for these components. Overlapping pieces are allowed;
//! internally everything is refined onto one partition of disjoint cells.

pub(crate) mod order;
mod spec;

pub use order::{convex_order_leq, convex_order_leq_with, decompose, decompose_with, MarginalPair, OrderVerdict, ORDER_TOL};
pub use spec::{AtomSpec, MeasureSpec, TailSpec, UniformSpec};

use crate::curve::{cell_probe, Coeffs, PiecewiseCurve};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, Quadrature};

/// Tolerance on total mass for a probability measure.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub x: f64,
    pub w: f64,
}

/// `w · Uniform[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformPiece {
    pub lo: f64,
    pub hi: f64,
    pub w: f64,
}

/// Density `k/|x|^3` on `[lo, hi]`; one end may be infinite, `0 ∉ [lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailPiece {
    pub lo: f64,
    pub hi: f64,
    pub k: f64,
}

impl TailPiece {
    /// Right tail `[edge, ∞)` (`edge > 0`) or left tail `(-∞, edge]`
    /// (`edge < 0`) carrying mass `w`.
    pub fn from_edge(edge: f64, w: f64) -> TailPiece {
        let k = 2.0 * w * edge * edge;
        if edge > 0.0 {
            TailPiece { lo: edge, hi: f64::INFINITY, k }
        } else {
            TailPiece { lo: f64::NEG_INFINITY, hi: edge, k }
        }
    }

    pub fn mass(&self) -> f64 {
        self.k * (a0(self.hi) - a0(self.lo))
    }
}

/// Antiderivatives of `|y|^-3`, `y|y|^-3`, `y²|y|^-3`; the first two vanish at ±∞.
fn a0(y: f64) -> f64 {
    if y.is_infinite() {
        0.0
    } else {
        -y.signum() / (2.0 * y * y)
    }
}

fn a1(y: f64) -> f64 {
    if y.is_infinite() {
        0.0
    } else {
        -1.0 / y.abs()
    }
}

fn a2(y: f64) -> f64 {
    y.signum() * y.abs().ln()
}

/// A maximal interval on which the density is `dens + k/|x|^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Cell {
    pub lo: f64,
    pub hi: f64,
    pub dens: f64,
    pub k: f64,
}

impl Cell {
    /// Mass of `[lo, t]`.
    pub fn mass_to(&self, t: f64) -> f64 {
        let t = t.min(self.hi);
        if t <= self.lo {
            return 0.0;
        }
        let mut m = 0.0;
        if self.dens > 0.0 {
            m += self.dens * (t - self.lo);
        }
        if self.k > 0.0 {
            m += self.k * (a0(t) - a0(self.lo));
        }
        m
    }

    pub fn mass(&self) -> f64 {
        self.mass_to(self.hi)
    }

    pub fn density(&self, x: f64) -> f64 {
        let mut d = self.dens;
        if self.k > 0.0 {
            d += self.k / (x.abs() * x * x);
        }
        d
    }

    /// Point `t` of the cell with `mass_to(t) = r`.
    fn solve_mass(&self, r: f64) -> f64 {
        let t = if self.k == 0.0 {
            self.lo + r / self.dens
        } else if self.dens == 0.0 {
            let v = a0(self.lo) + r / self.k;
            if self.lo >= 0.0 || self.hi > 0.0 {
                (-0.5 / v).sqrt()
            } else {
                -(0.5 / v).sqrt()
            }
        } else {
            let (mut l, mut h) = (self.lo, self.hi);
            for _ in 0..200 {
                let mid = 0.5 * (l + h);
                if mid <= l || mid >= h {
                    break;
                }
                if self.mass_to(mid) < r {
                    l = mid;
                } else {
                    h = mid;
                }
            }
            h
        };
        if t.is_nan() {
            self.hi
        } else {
            t.clamp(self.lo, self.hi)
        }
    }
}

/// A finite measure; immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    atoms: Vec<Atom>,
    pieces: Vec<UniformPiece>,
    tails: Vec<TailPiece>,
    cells: Vec<Cell>,
    mass: f64,
}

impl Measure {
    pub fn new(atoms: Vec<Atom>, pieces: Vec<UniformPiece>) -> Result<Measure> {
        Measure::with_tails(atoms, pieces, Vec::new())
    }

    pub fn with_tails(
        atoms: Vec<Atom>,
        pieces: Vec<UniformPiece>,
        tails: Vec<TailPiece>,
    ) -> Result<Measure> {
        for a in &atoms {
            if !a.x.is_finite() || !a.w.is_finite() || a.w < 0.0 {
                return Err(Error::InvalidMeasure(format!("atom at {} with weight {}", a.x, a.w)));
            }
        }
        for p in &pieces {
            if !(p.lo.is_finite() && p.hi.is_finite() && p.lo < p.hi) || !(p.w >= 0.0) || !p.w.is_finite() {
                return Err(Error::InvalidMeasure(format!(
                    "uniform piece [{}, {}] with weight {}",
                    p.lo, p.hi, p.w
                )));
            }
        }
        for t in &tails {
            let ok = t.lo < t.hi
                && !(t.lo.is_infinite() && t.hi.is_infinite())
                && (t.lo > 0.0 || t.hi < 0.0)
                && t.k >= 0.0
                && t.k.is_finite();
            if !ok {
                return Err(Error::InvalidMeasure(format!(
                    "tail piece [{}, {}] with k = {}",
                    t.lo, t.hi, t.k
                )));
            }
        }

        let mut atoms: Vec<Atom> = atoms.into_iter().filter(|a| a.w > 0.0).collect();
        atoms.sort_by(|p, q| p.x.total_cmp(&q.x));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(last) if last.x == a.x => last.w += a.w,
                _ => merged.push(a),
            }
        }
        let pieces: Vec<UniformPiece> = pieces.into_iter().filter(|p| p.w > 0.0).collect();
        let tails: Vec<TailPiece> = tails.into_iter().filter(|t| t.k > 0.0).collect();

        let cells = build_cells(&merged, &pieces, &tails);
        let mass = merged.iter().map(|a| a.w).sum::<f64>() + cells.iter().map(Cell::mass).sum::<f64>() + 0.0;
        Ok(Measure {
            atoms: merged,
            pieces,
            tails,
            cells,
            mass,
        })
    }

    pub fn empty() -> Measure {
        Measure {
            atoms: Vec::new(),
            pieces: Vec::new(),
            tails: Vec::new(),
            cells: Vec::new(),
            mass: 0.0,
        }
    }

    /// `Uniform[lo, hi]`; panics unless `lo < hi` are finite.
    pub fn uniform(lo: f64, hi: f64) -> Measure {
        Measure::new(vec![], vec![UniformPiece { lo, hi, w: 1.0 }]).expect("valid uniform")
    }

    pub fn dirac(x: f64) -> Measure {
        Measure::new(vec![Atom { x, w: 1.0 }], vec![]).expect("valid atom")
    }

    /// Discrete measure from `(location, weight)` pairs.
    pub fn discrete(points: &[(f64, f64)]) -> Result<Measure> {
        Measure::new(points.iter().map(|&(x, w)| Atom { x, w }).collect(), vec![])
    }

    /// Sum of weighted measures.
    pub fn mixture(parts: &[(f64, &Measure)]) -> Result<Measure> {
        let mut atoms = Vec::new();
        let mut pieces = Vec::new();
        let mut tails = Vec::new();
        for &(s, m) in parts {
            if !(s >= 0.0) {
                return Err(Error::domain("mixture weight", s, ">= 0"));
            }
            atoms.extend(m.atoms.iter().map(|a| Atom { x: a.x, w: s * a.w }));
            pieces.extend(m.pieces.iter().map(|p| UniformPiece { w: s * p.w, ..*p }));
            tails.extend(m.tails.iter().map(|t| TailPiece { k: s * t.k, ..*t }));
        }
        Measure::with_tails(atoms, pieces, tails)
    }

    pub fn scaled(&self, s: f64) -> Measure {
        Measure::mixture(&[(s, self)]).expect("non-negative scale")
    }

    /// Piecewise-constant approximation of a density on `[lo, hi]` with `n`
    /// equal-width cells; cell masses are integrated to `tol`.
    pub fn from_density<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, n: usize, tol: f64) -> Result<Measure> {
        if !(lo < hi) || n == 0 {
            return Err(Error::domain("cells", n as f64, ">= 1 on a non-empty interval"));
        }
        let h = (hi - lo) / n as f64;
        let opts = Quadrature::with_tol(tol / n as f64);
        let mut pieces = Vec::with_capacity(n);
        for i in 0..n {
            let l = lo + h * i as f64;
            let r = if i + 1 == n { hi } else { l + h };
            let w = integrate(&mut f, l, r, &[], opts);
            if w < 0.0 {
                return Err(Error::InvalidMeasure(format!("negative density mass {w} on [{l}, {r}]")));
            }
            pieces.push(UniformPiece { lo: l, hi: r, w });
        }
        Measure::new(vec![], pieces)
    }

    /// Builds a measure from disjoint cells and atoms.
    pub(crate) fn from_cells(atoms: Vec<Atom>, cells: &[Cell]) -> Result<Measure> {
        let mut pieces = Vec::new();
        let mut tails = Vec::new();
        for c in cells {
            if c.dens > 0.0 {
                pieces.push(UniformPiece {
                    lo: c.lo,
                    hi: c.hi,
                    w: c.dens * (c.hi - c.lo),
                });
            }
            if c.k > 0.0 {
                tails.push(TailPiece { lo: c.lo, hi: c.hi, k: c.k });
            }
        }
        Measure::with_tails(atoms, pieces, tails)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn pieces(&self) -> &[UniformPiece] {
        &self.pieces
    }

    pub fn tails(&self) -> &[TailPiece] {
        &self.tails
    }

    pub(crate) fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Support points nearest to `[a, b]` from outside: the largest one `≤ a`
    /// and the smallest one `≥ b` (`∓∞` when there are none).
    pub(crate) fn inner_ends(&self, a: f64, b: f64) -> (f64, f64) {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        let points = self.atoms.iter().map(|t| (t.x, t.x));
        let cells = self.cells.iter().filter(|c| c.mass() > 0.0).map(|c| (c.lo, c.hi));
        for (l, h) in points.chain(cells) {
            if h <= a {
                lo = lo.max(h);
            }
            if l >= b {
                hi = hi.min(l);
            }
        }
        (lo, hi)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn is_probability(&self) -> bool {
        (self.mass - 1.0).abs() <= MASS_TOL
    }

    pub fn has_atoms(&self) -> bool {
        !self.atoms.is_empty()
    }

    /// Sorted finite locations where the measure changes form.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.atoms.iter().map(|a| a.x).collect();
        for c in &self.cells {
            b.push(c.lo);
            b.push(c.hi);
        }
        b.retain(|x| x.is_finite());
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// Smallest closed interval carrying all the mass.
    pub fn support(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for a in &self.atoms {
            lo = lo.min(a.x);
            hi = hi.max(a.x);
        }
        for c in &self.cells {
            lo = lo.min(c.lo);
            hi = hi.max(c.hi);
        }
        (lo <= hi).then_some((lo, hi))
    }

    /// Right-continuous distribution function `m((-∞, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        let atoms: f64 = self.atoms.iter().take_while(|a| a.x <= x).map(|a| a.w).sum();
        atoms + self.cells_below(x)
    }

    /// `m((-∞, x))`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        let atoms: f64 = self.atoms.iter().take_while(|a| a.x < x).map(|a| a.w).sum();
        atoms + self.cells_below(x)
    }

    fn cells_below(&self, x: f64) -> f64 {
        let mut m = 0.0;
        for c in &self.cells {
            if c.lo >= x {
                break;
            }
            m += c.mass_to(x);
        }
        m
    }

    /// Left-continuous inverse `inf {x : F(x) >= u}` of the normalised CDF.
    pub fn quantile_left(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain("u", u, "(0, 1)"));
        }
        if self.mass <= 0.0 {
            return Err(Error::InvalidMeasure("quantile of a null measure".into()));
        }
        Ok(self.quantile_mass(u * self.mass))
    }

    /// `inf {x : F(x) >= t}` for an unnormalised level `t ∈ (0, mass]`.
    pub(crate) fn quantile_mass(&self, t: f64) -> f64 {
        // levels within a few ulps of a cumulative mass count as reaching it
        let reach = t * (1.0 - 4.0 * f64::EPSILON);
        let mut cum = 0.0;
        let mut ai = 0;
        let mut last = f64::NAN;
        for c in &self.cells {
            while ai < self.atoms.len() && self.atoms[ai].x <= c.lo {
                cum += self.atoms[ai].w;
                last = self.atoms[ai].x;
                if cum >= reach {
                    return last;
                }
                ai += 1;
            }
            let m = c.mass();
            if m > 0.0 {
                if cum + m >= reach {
                    return c.solve_mass((t - cum).min(m));
                }
                cum += m;
                last = c.hi;
            }
        }
        for a in &self.atoms[ai..] {
            cum += a.w;
            last = a.x;
            if cum >= reach {
                return last;
            }
        }
        // roundoff at t ≈ mass
        last
    }

    /// Each uniform and inverse-cube piece cut into `n` cells of equal mass;
    /// returns `(conditional mean, mass, width)` per cell, atoms verbatim with
    /// width 0.
    pub(crate) fn equal_mass_cells(&self, n: usize) -> Vec<(f64, f64, f64)> {
        let mut out: Vec<(f64, f64, f64)> = self.atoms.iter().map(|a| (a.x, a.w, 0.0)).collect();
        for p in &self.pieces {
            let h = (p.hi - p.lo) / n as f64;
            for i in 0..n {
                let lo = p.lo + h * i as f64;
                out.push((lo + 0.5 * h, p.w / n as f64, h));
            }
        }
        for t in &self.tails {
            let cell = Cell { lo: t.lo, hi: t.hi, dens: 0.0, k: t.k };
            let m = cell.mass();
            let mut lo = t.lo;
            for i in 1..=n {
                let hi = if i == n { t.hi } else { cell.solve_mass(m * i as f64 / n as f64) };
                let mean = t.k * (a1(hi) - a1(lo)) / (m / n as f64);
                out.push((mean, m / n as f64, hi - lo));
                lo = hi;
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    pub fn mean(&self) -> f64 {
        let mut m: f64 = self.atoms.iter().map(|a| a.w * a.x).sum();
        m += self.pieces.iter().map(|p| p.w * 0.5 * (p.lo + p.hi)).sum::<f64>();
        m += self.tails.iter().map(|t| t.k * (a1(t.hi) - a1(t.lo))).sum::<f64>();
        m
    }

    /// `∫ x² m(dx)`; infinite when an unbounded tail is present.
    pub fn second_moment(&self) -> f64 {
        let mut m: f64 = self.atoms.iter().map(|a| a.w * a.x * a.x).sum();
        m += self
            .pieces
            .iter()
            .map(|p| p.w * (p.lo * p.lo + p.lo * p.hi + p.hi * p.hi) / 3.0)
            .sum::<f64>();
        for t in &self.tails {
            if t.lo.is_infinite() || t.hi.is_infinite() {
                return f64::INFINITY;
            }
            m += t.k * (a2(t.hi) - a2(t.lo));
        }
        m
    }

    /// Density of the absolutely continuous part (right-continuous at cell edges).
    pub fn density(&self, x: f64) -> f64 {
        self.cells
            .iter()
            .find(|c| c.lo <= x && x < c.hi)
            .map_or(0.0, |c| c.density(x))
    }

    /// Call function `C(x) = ∫ (y - x)^+ m(dy)`.
    pub fn call(&self, x: f64) -> f64 {
        let mut acc = Coeffs::default();
        self.add_call_coeffs(&mut acc, x);
        acc.value(x)
    }

    /// The call function as a piecewise closed-form curve.
    pub fn call_curve(&self) -> PiecewiseCurve {
        let breaks = self.breakpoints();
        let segs = (0..=breaks.len())
            .map(|i| {
                let mut acc = Coeffs::default();
                self.add_call_coeffs(&mut acc, cell_probe(&breaks, i));
                acc
            })
            .collect();
        PiecewiseCurve::new(breaks, segs)
    }

    /// Adds the coefficients of the call function on the segment containing `x`
    /// (`x` is assumed not to be a breakpoint).
    fn add_call_coeffs(&self, acc: &mut Coeffs, x: f64) {
        for a in &self.atoms {
            if x < a.x {
                acc.lin -= a.w;
                acc.cst += a.w * a.x;
            }
        }
        for c in &self.cells {
            if x >= c.hi {
                continue;
            }
            if c.dens > 0.0 {
                let (lo, hi, d) = (c.lo, c.hi, c.dens);
                if x <= lo {
                    let w = d * (hi - lo);
                    acc.lin -= w;
                    acc.cst += w * 0.5 * (lo + hi);
                } else {
                    acc.quad += 0.5 * d;
                    acc.lin -= d * hi;
                    acc.cst += 0.5 * d * hi * hi;
                }
            }
            if c.k > 0.0 {
                let k = c.k;
                if x <= c.lo {
                    acc.lin -= k * (a0(c.hi) - a0(c.lo));
                    acc.cst += k * (a1(c.hi) - a1(c.lo));
                } else {
                    let s = if c.lo >= 0.0 { 1.0 } else { -1.0 };
                    acc.lin -= k * a0(c.hi);
                    acc.cst += k * a1(c.hi);
                    acc.inv += 0.5 * s * k;
                }
            }
        }
    }

    /// `∫ f dm`: atoms summed exactly, cells by adaptive quadrature seeded with
    /// `seeds` (kinks of `f`). Unbounded cells are mapped onto `(0, 1]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, seeds: &[f64], opts: Quadrature) -> f64 {
        let mut total: f64 = self.atoms.iter().map(|a| a.w * f(a.x)).sum();
        for c in &self.cells {
            if c.lo.is_finite() && c.hi.is_finite() {
                total += integrate(|y| f(y) * c.density(y), c.lo, c.hi, seeds, opts);
            } else {
                // y = e/s with e the finite end; density is k|y|^-3 only
                let e = if c.lo.is_finite() { c.lo } else { c.hi };
                let k = c.k;
                let s_seeds: Vec<f64> = seeds
                    .iter()
                    .filter(|&&y| y * e > 0.0 && y.abs() > e.abs())
                    .map(|&y| e / y)
                    .collect();
                total += integrate(|s| f(e / s) * k * s / (e * e), 0.0, 1.0, &s_seeds, opts);
            }
        }
        total
    }
}

/// Refines pieces and tails onto disjoint cells, split at atom locations too.
fn build_cells(atoms: &[Atom], pieces: &[UniformPiece], tails: &[TailPiece]) -> Vec<Cell> {
    let mut cuts: Vec<f64> = Vec::new();
    for p in pieces {
        cuts.push(p.lo);
        cuts.push(p.hi);
    }
    for t in tails {
        cuts.push(t.lo);
        cuts.push(t.hi);
    }
    if cuts.is_empty() {
        return Vec::new();
    }
    cuts.extend(atoms.iter().map(|a| a.x));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut cells = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mid = if lo.is_infinite() {
            hi - 1.0
        } else if hi.is_infinite() {
            lo + 1.0
        } else {
            0.5 * (lo + hi)
        };
        let dens: f64 = pieces
            .iter()
            .filter(|p| p.lo <= mid && mid <= p.hi)
            .map(|p| p.w / (p.hi - p.lo))
            .sum();
        let k: f64 = tails.iter().filter(|t| t.lo <= mid && mid <= t.hi).map(|t| t.k).sum();
        if dens > 0.0 || k > 0.0 {
            cells.push(Cell { lo, hi, dens, k });
        }
    }
    cells
}
