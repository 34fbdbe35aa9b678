//! Brute-force cross-check: discretise both marginals and solve the
//! martingale transport linear program for `min` or `max E|Y - X|`.

mod simplex;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::Measure;
use simplex::{solve, LpFailure, SparseLp};

pub const DEFAULT_CELLS: usize = 120;
const PIVOT_BUDGET: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Min,
    Max,
}

/// Atoms `(x, w)` in increasing order: every uniform or inverse-cube piece is
/// cut into `n` cells of equal mass, each replaced by its conditional mean.
/// Atoms are kept as they are.
pub fn discretize(m: &Measure, n: usize) -> Result<Vec<(f64, f64)>> {
    Ok(cells(m, n)?.into_iter().map(|(x, w, _)| (x, w)).collect())
}

fn cells(m: &Measure, n: usize) -> Result<Vec<(f64, f64, f64)>> {
    if n < 2 {
        return Err(Error::domain("n", n as f64, "at least 2"));
    }
    Ok(m.equal_mass_cells(n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLP {
    pub xs: Vec<(f64, f64)>,
    pub ys: Vec<(f64, f64)>,
    pub sense: Sense,
    /// Allowed conditional drift: `|Σ_j π_ij (y_j - x_i)| ≤ ε μ_i`.
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub value: f64,
    /// Nonzero entries `(i, j, π_ij)`.
    pub plan: Vec<(usize, usize, f64)>,
    pub pivots: usize,
}

pub fn solve_lp(p: &DiscreteLP) -> Result<LpResult> {
    let (nx, ny) = (p.xs.len(), p.ys.len());
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidMeasure("empty discretisation".into()));
    }
    // rows: x masses, y masses (last one dropped as redundant), martingale rows
    let mart = nx + ny - 1;
    let two_sided = p.epsilon > 0.0;
    let rows = mart + if two_sided { 2 * nx } else { nx };
    let mut cols = Vec::with_capacity(nx * ny + if two_sided { 2 * nx } else { 0 });
    let mut cost = Vec::with_capacity(cols.capacity());
    let flip = if p.sense == Sense::Max { -1.0 } else { 1.0 };
    for (i, &(x, _)) in p.xs.iter().enumerate() {
        for (j, &(y, _)) in p.ys.iter().enumerate() {
            let mut c = vec![(i, 1.0)];
            if j + 1 < ny {
                c.push((nx + j, 1.0));
            }
            let d = y - x;
            if d != 0.0 {
                c.push((mart + i, d));
                if two_sided {
                    c.push((mart + nx + i, d));
                }
            }
            cols.push(c);
            cost.push(flip * (y - x).abs());
        }
    }
    let mut rhs: Vec<f64> = p.xs.iter().map(|a| a.1).collect();
    rhs.extend(p.ys[..ny - 1].iter().map(|a| a.1));
    if two_sided {
        // Σ π d + s = ε μ_i  and  Σ π d - s' = -ε μ_i
        for (i, &(_, w)) in p.xs.iter().enumerate() {
            rhs.push(p.epsilon * w);
            cols.push(vec![(mart + i, 1.0)]);
            cost.push(0.0);
        }
        for (i, &(_, w)) in p.xs.iter().enumerate() {
            rhs.push(-p.epsilon * w);
            cols.push(vec![(mart + nx + i, -1.0)]);
            cost.push(0.0);
        }
    } else {
        rhs.extend(std::iter::repeat(0.0).take(nx));
    }
    let lp = SparseLp { rows, cols, cost, rhs };
    match solve(&lp, PIVOT_BUDGET) {
        Ok(s) => {
            let plan = (0..nx * ny)
                .filter(|&k| s.x[k] > 0.0)
                .map(|k| (k / ny, k % ny, s.x[k]))
                .collect();
            Ok(LpResult {
                value: flip * s.value,
                plan,
                pivots: s.pivots,
            })
        }
        Err(LpFailure::Infeasible(bad)) => {
            let family = if bad.iter().any(|&r| r >= mart) { "martingale" } else { "marginal" };
            Err(Error::Infeasible { family: family.into() })
        }
        Err(LpFailure::Unbounded) => Err(Error::Unsupported("unbounded transport problem".into())),
        Err(LpFailure::PivotLimit(k)) => Err(Error::PivotLimit(k)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleReport {
    pub value: f64,
    pub epsilon: f64,
    pub n: usize,
}

/// Discretises with `n` cells per piece and solves with `ε = 0`; when that is
/// infeasible retries once with `ε = 2·(widest finite cell)²`.
pub fn oracle_bound(mu: &Measure, nu: &Measure, n: usize, sense: Sense) -> Result<OracleReport> {
    let cx = cells(mu, n)?;
    let cy = cells(nu, n)?;
    let strip = |c: &[(f64, f64, f64)]| c.iter().map(|&(x, w, _)| (x, w)).collect::<Vec<_>>();
    let mut lp = DiscreteLP {
        xs: strip(&cx),
        ys: strip(&cy),
        sense,
        epsilon: 0.0,
    };
    match solve_lp(&lp) {
        Ok(r) => Ok(OracleReport { value: r.value, epsilon: 0.0, n }),
        Err(Error::Infeasible { .. }) => {
            let width = cx
                .iter()
                .chain(&cy)
                .map(|c| c.2)
                .filter(|w| w.is_finite())
                .fold(0.0_f64, f64::max);
            lp.epsilon = 2.0 * width * width;
            let r = solve_lp(&lp)?;
            Ok(OracleReport {
                value: r.value,
                epsilon: lp.epsilon,
                n,
            })
        }
        Err(e) => Err(e),
    }
}
