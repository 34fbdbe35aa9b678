//! End-to-end lower bound: coupling, hedge, duality gap and certificate.

use serde::Serialize;

use crate::error::Result;
use crate::hedge::HedgePair;
use crate::lower::CouplingMap;
use crate::measure::{decompose, Measure};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub primal_price: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub min_lagrangian: f64,
    pub marginal_error: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundOptions {
    /// Lagrangian grid, points per axis.
    pub grid_nx: usize,
    pub grid_ny: usize,
    /// Number of `ν`-quantiles at which the pushforward CDF is compared.
    pub quantiles: usize,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions {
            grid_nx: 200,
            grid_ny: 200,
            quantiles: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LowerBound {
    pub map: CouplingMap,
    pub report: BoundReport,
}

pub fn lower_bound(mu: &Measure, nu: &Measure, opts: &BoundOptions) -> Result<LowerBound> {
    let pair = decompose(mu, nu)?;
    let map = CouplingMap::build(&pair)?;
    let report = report_for(&map, opts)?;
    Ok(LowerBound { map, report })
}

pub fn report_for(map: &CouplingMap, opts: &BoundOptions) -> Result<BoundReport> {
    let hedge = HedgePair::new(map)?;
    let primal_price = map.primal_price();
    let dual_value = hedge.dual_value()?;
    let cert = hedge.verify_subhedge(opts.grid_nx, opts.grid_ny)?;
    Ok(BoundReport {
        primal_price,
        dual_value,
        gap: primal_price - dual_value,
        min_lagrangian: cert.min_lagrangian,
        marginal_error: marginal_error(map, opts.quantiles)?,
        kappa: map.kappa(),
    })
}

/// Largest CDF difference between the law of `Y` and `ν`, over `n` interior
/// quantiles of `ν` and its finite breakpoints.
pub fn marginal_error(map: &CouplingMap, n: usize) -> Result<f64> {
    let nu = &map.pair().nu;
    let law = map.pushforward_law();
    let mut ys: Vec<f64> = (1..=n)
        .map(|i| nu.quantile_mass(i as f64 / (n + 1) as f64 * nu.mass()))
        .collect();
    ys.extend(nu.breakpoints().into_iter().filter(|y| y.is_finite()));
    let mut worst = 0.0_f64;
    for y in ys {
        worst = worst.max((law.cdf(y)? - nu.cdf(y)).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_report() {
        let b = lower_bound(&Measure::uniform(-1.0, 1.0), &Measure::uniform(-2.0, 2.0), &BoundOptions::default()).unwrap();
        let r = b.report;
        assert!((r.primal_price - (1.5 - std::f64::consts::PI / (2.0 * 3f64.sqrt()))).abs() < 1e-9);
        assert!(r.gap.abs() < 1e-8);
        assert!(r.min_lagrangian >= -1e-9);
        assert!(r.marginal_error < 1e-9);
        assert_eq!(r.kappa, 0.5);
    }
}
