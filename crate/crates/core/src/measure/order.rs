//! Convex order and the split `μ = μ∧ν + η`, `ν = μ∧ν + γ`.

use super::{Atom, Cell, Measure, MASS_TOL};
use crate::curve::PiecewiseCurve;
use crate::error::{Error, Result};

/// Slack allowed in `C_μ <= C_ν`.
pub const ORDER_TOL: f64 = 1e-12;

/// Relative size below which two densities or atom weights count as equal.
const SNAP: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrderVerdict {
    Holds,
    /// A point where `C_μ > C_ν`; `±∞` when masses or means differ.
    ViolatedAt(f64),
}

impl OrderVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, OrderVerdict::Holds)
    }
}

/// `C_ν - C_μ` as a piecewise curve, with roundoff in the limits at ±∞ removed.
pub(crate) fn difference_curve(mu: &Measure, nu: &Measure) -> PiecewiseCurve {
    let mut d = nu.call_curve().combine(1.0, &mu.call_curve(), -1.0);
    d.snap_tails(MASS_TOL);
    d
}

pub fn convex_order_leq(mu: &Measure, nu: &Measure) -> OrderVerdict {
    convex_order_leq_with(mu, nu, ORDER_TOL)
}

/// Exact check: `C_ν - C_μ` is minimised segment by segment in closed form.
pub fn convex_order_leq_with(mu: &Measure, nu: &Measure, tol: f64) -> OrderVerdict {
    let dm = nu.mean() - mu.mean();
    if (nu.mass() - mu.mass()).abs() > tol || dm.abs() > tol {
        return OrderVerdict::ViolatedAt(if dm < 0.0 { f64::NEG_INFINITY } else { f64::INFINITY });
    }
    let min = difference_curve(mu, nu).global_min();
    if min.value < -tol {
        OrderVerdict::ViolatedAt(min.at)
    } else {
        OrderVerdict::Holds
    }
}

/// A validated pair of marginals with its common-mass decomposition.
#[derive(Debug, Clone)]
pub struct MarginalPair {
    pub mu: Measure,
    pub nu: Measure,
    /// Mass of `μ∧ν`.
    pub kappa: f64,
    pub common: Measure,
    /// `(μ-ν)^+` normalised to a probability measure.
    pub eta_bar: Measure,
    /// `(ν-μ)^+` normalised to a probability measure.
    pub gamma_bar: Measure,
    /// Closed hull `[a, b]` of the support of `η̄`.
    pub a: f64,
    pub b: f64,
    /// `γ̄((-∞, a])`.
    pub gamma_a: f64,
}

impl MarginalPair {
    /// `μ = ν` up to roundoff; the residual fields are then empty.
    pub fn identical(&self) -> bool {
        self.kappa >= 1.0 - MASS_TOL
    }
}

fn cell_at(cells: &[Cell], x: f64) -> (f64, f64) {
    cells
        .iter()
        .find(|c| c.lo <= x && x <= c.hi)
        .map_or((0.0, 0.0), |c| (c.dens, c.k))
}

fn snap_min(p: f64, q: f64) -> (f64, f64, f64) {
    let m = p.min(q);
    if (p - q).abs() <= SNAP * p.abs().max(q.abs()) {
        (p.max(q), 0.0, 0.0)
    } else {
        (m, p - m, q - m)
    }
}

/// Splits off the common mass `μ∧ν` and checks the dispersion assumption:
/// `γ` must not charge the open interval `(a, b)`.
pub fn decompose(mu: &Measure, nu: &Measure) -> Result<MarginalPair> {
    decompose_with(mu, nu, ORDER_TOL)
}

/// [`decompose`] with a caller-chosen slack in the convex-order check.
pub fn decompose_with(mu: &Measure, nu: &Measure, order_tol: f64) -> Result<MarginalPair> {
    for (name, m) in [("mu", mu), ("nu", nu)] {
        if !m.is_probability() {
            return Err(Error::InvalidMeasure(format!("{name} has mass {}", m.mass())));
        }
    }
    if let OrderVerdict::ViolatedAt(at) = convex_order_leq_with(mu, nu, order_tol) {
        return Err(Error::ConvexOrder { at });
    }

    let mut cuts: Vec<f64> = mu
        .breakpoints()
        .into_iter()
        .chain(nu.breakpoints())
        .chain(mu.cells().iter().flat_map(|c| [c.lo, c.hi]))
        .chain(nu.cells().iter().flat_map(|c| [c.lo, c.hi]))
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut common = Vec::new();
    let mut eta = Vec::new();
    let mut gamma = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mid = if lo.is_infinite() {
            hi - 1.0
        } else if hi.is_infinite() {
            lo + 1.0
        } else {
            0.5 * (lo + hi)
        };
        let (cm, km) = cell_at(mu.cells(), mid);
        let (cn, kn) = cell_at(nu.cells(), mid);
        let (c_common, c_eta, c_gamma, k_common, k_eta, k_gamma);
        if km == 0.0 && kn == 0.0 {
            (c_common, c_eta, c_gamma) = snap_min(cm, cn);
            (k_common, k_eta, k_gamma) = (0.0, km, kn);
        } else if cm == 0.0 && cn == 0.0 {
            (c_common, c_eta, c_gamma) = (0.0, 0.0, 0.0);
            (k_common, k_eta, k_gamma) = snap_min(km, kn);
        } else if (cm == 0.0 && km == 0.0) || (cn == 0.0 && kn == 0.0) {
            (c_common, c_eta, c_gamma) = (0.0, cm, cn);
            (k_common, k_eta, k_gamma) = (0.0, km, kn);
        } else {
            return Err(Error::Unsupported(format!(
                "minimum of a constant and an inverse-cube density on [{lo}, {hi}]"
            )));
        }
        for (out, dens, k) in [
            (&mut common, c_common, k_common),
            (&mut eta, c_eta, k_eta),
            (&mut gamma, c_gamma, k_gamma),
        ] {
            if dens > 0.0 || k > 0.0 {
                out.push(Cell { lo, hi, dens, k });
            }
        }
    }

    let mut common_atoms = Vec::new();
    let mut eta_atoms = Vec::new();
    let mut gamma_atoms = Vec::new();
    let mut locs: Vec<f64> = mu.atoms().iter().chain(nu.atoms()).map(|a| a.x).collect();
    locs.sort_by(f64::total_cmp);
    locs.dedup();
    let weight = |m: &Measure, x: f64| m.atoms().iter().find(|a| a.x == x).map_or(0.0, |a| a.w);
    for x in locs {
        let (c, e, g) = snap_min(weight(mu, x), weight(nu, x));
        for (out, w) in [(&mut common_atoms, c), (&mut eta_atoms, e), (&mut gamma_atoms, g)] {
            if w > 0.0 {
                out.push(Atom { x, w });
            }
        }
    }

    let common = Measure::from_cells(common_atoms, &common)?;
    let eta = Measure::from_cells(eta_atoms, &eta)?;
    let gamma = Measure::from_cells(gamma_atoms, &gamma)?;
    let kappa = common.mass().clamp(0.0, 1.0) + 0.0;

    if kappa >= 1.0 - MASS_TOL || eta.mass() <= MASS_TOL || gamma.mass() <= MASS_TOL {
        let m = mu.mean();
        return Ok(MarginalPair {
            mu: mu.clone(),
            nu: nu.clone(),
            kappa,
            common,
            eta_bar: Measure::empty(),
            gamma_bar: Measure::empty(),
            a: m,
            b: m,
            gamma_a: 0.0,
        });
    }

    let eta_bar = eta.scaled(1.0 / eta.mass());
    let gamma_bar = gamma.scaled(1.0 / gamma.mass());
    let (a, b) = eta_bar.support().expect("non-null residual");

    for g in gamma_bar.atoms() {
        if g.x > a && g.x < b {
            return Err(Error::Dispersion { lo: g.x, hi: g.x });
        }
    }
    for c in gamma_bar.cells() {
        let (lo, hi) = (c.lo.max(a), c.hi.min(b));
        if lo < hi && c.mass() > 0.0 {
            return Err(Error::Dispersion { lo, hi });
        }
    }
    let gamma_a = gamma_bar.cdf(a);

    Ok(MarginalPair {
        mu: mu.clone(),
        nu: nu.clone(),
        kappa,
        common,
        eta_bar,
        gamma_bar,
        a,
        b,
        gamma_a,
    })
}
