//! Two-point transport maps `u ↦ (x_u, lo_u, hi_u)`: given `U` uniform, `X = x_U`
//! moves to `lo_U` with probability `w = (hi - x)/(hi - lo)` and to `hi_U`
//! otherwise, which keeps the conditional mean at `x`. Shared by the lower
//! and upper constructions.

use rand::Rng;

use crate::error::Result;
use crate::quadrature::{integrate_n, Quadrature};

/// One evaluation of a map at level `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub u: f64,
    pub x: f64,
    /// Lower target (`P` or `G`).
    pub lo: f64,
    /// Upper target (`Q` or `H`).
    pub hi: f64,
    /// Tangent slope at `lo`.
    pub slope_lo: f64,
    /// Tangent slope at `hi`.
    pub slope_hi: f64,
}

impl Split {
    /// Probability of moving down to `lo`.
    pub fn down_weight(&self) -> f64 {
        if self.hi.is_infinite() {
            1.0
        } else if self.lo.is_infinite() {
            0.0
        } else if self.hi == self.lo {
            1.0
        } else {
            ((self.hi - self.x) / (self.hi - self.lo)).clamp(0.0, 1.0)
        }
    }

    /// `E|Y - x|` given `X = x`.
    pub fn expected_move(&self) -> f64 {
        if self.lo.is_infinite() {
            2.0 * (self.hi - self.x)
        } else if self.hi.is_infinite() {
            2.0 * (self.x - self.lo)
        } else if self.hi == self.lo {
            0.0
        } else {
            2.0 * (self.x - self.lo) * (self.hi - self.x) / (self.hi - self.lo)
        }
    }

    /// `w·lo + (1-w)·hi - x`; zero up to roundoff (and in the limit when one
    /// target is infinite).
    pub fn martingale_defect(&self) -> f64 {
        if self.lo.is_infinite() || self.hi.is_infinite() || self.hi == self.lo {
            return 0.0;
        }
        let w = self.down_weight();
        w * self.lo + (1.0 - w) * self.hi - self.x
    }
}

pub(crate) trait Kernel {
    fn split(&self, u: f64) -> Result<Split>;
}

/// A jump of `lo` or `hi` at level `u`: values just before and just after.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub u: f64,
    pub before: Split,
    pub after: Split,
}

/// Tabulation of a map on a `u`-grid with cumulative integrals of
/// `w`, `1 - w` and the expected move.
#[derive(Debug, Clone)]
pub(crate) struct Table {
    pub nodes: Vec<Split>,
    cum: Vec<[f64; 3]>,
    pub breaks: Vec<f64>,
    pub jumps: Vec<Jump>,
    opts: Quadrature,
}

const UNIFORM_NODES: usize = 512;
const PROBE: f64 = 1e-9;
const MERGE: f64 = 1e-12;

fn integrand(s: &Split) -> [f64; 3] {
    let w = s.down_weight();
    [w, 1.0 - w, s.expected_move()]
}

impl Table {
    /// `breaks` are the levels where the map may kink or jump.
    pub fn build<K: Kernel>(kernel: &K, breaks: &[f64], opts: Quadrature) -> Result<Table> {
        let mut breaks: Vec<f64> = breaks.iter().copied().filter(|&u| u > 0.0 && u < 1.0).collect();
        breaks.sort_by(f64::total_cmp);
        // levels found by different routes agree only to a few ulps
        breaks.dedup_by(|b, a| *b - *a <= MERGE);

        let mut us: Vec<f64> = (0..=UNIFORM_NODES).map(|i| i as f64 / UNIFORM_NODES as f64).collect();
        us.extend(&breaks);
        us.sort_by(f64::total_cmp);
        us.dedup();
        let mut nodes = us.iter().map(|&u| kernel.split(u)).collect::<Result<Vec<_>>>()?;

        // refine where the down weight moves fast between neighbours
        let mut refined = Vec::with_capacity(nodes.len());
        for pair in nodes.windows(2) {
            refined.push(pair[0]);
            let dw = (pair[1].down_weight() - pair[0].down_weight()).abs();
            let jumped = breaks.iter().any(|&b| b >= pair[0].u && b <= pair[1].u);
            if dw > 0.02 && !jumped {
                let k = ((dw / 0.02).ceil() as usize).min(16);
                for j in 1..k {
                    let u = pair[0].u + (pair[1].u - pair[0].u) * j as f64 / k as f64;
                    refined.push(kernel.split(u)?);
                }
            }
        }
        refined.push(*nodes.last().expect("non-empty grid"));
        nodes = refined;

        let mut cum = Vec::with_capacity(nodes.len());
        let mut acc = [0.0; 3];
        cum.push(acc);
        let mut failure = None;
        for pair in nodes.windows(2) {
            let est = integrate_n(
                |u| match kernel.split(u) {
                    Ok(s) => integrand(&s),
                    Err(e) => {
                        failure.get_or_insert(e);
                        [0.0; 3]
                    }
                },
                pair[0].u,
                pair[1].u,
                &[],
                opts,
            );
            for k in 0..3 {
                acc[k] += est.value[k];
            }
            cum.push(acc);
        }
        if let Some(e) = failure {
            return Err(e);
        }

        let mut jumps = Vec::new();
        for &u in &breaks {
            let before = kernel.split((u - PROBE).max(0.0))?;
            let after = kernel.split((u + PROBE).min(1.0))?;
            let gap = |p: f64, q: f64| (p - q).abs() > 1e-7 * (1.0 + p.abs().max(q.abs()));
            if gap(before.lo, after.lo) || gap(before.hi, after.hi) {
                jumps.push(Jump { u, before, after });
            }
        }

        Ok(Table {
            nodes,
            cum,
            breaks,
            jumps,
            opts,
        })
    }

    fn node_index(&self, u: f64) -> usize {
        self.nodes.partition_point(|s| s.u <= u).saturating_sub(1).min(self.nodes.len() - 2)
    }

    /// `∫_0^u (w, 1-w, move) dv`.
    pub fn cumulative<K: Kernel>(&self, kernel: &K, u: f64) -> [f64; 3] {
        let u = u.clamp(0.0, 1.0);
        let i = self.node_index(u);
        let base = self.cum[i];
        let start = self.nodes[i].u;
        if u <= start {
            return base;
        }
        let est = integrate_n(
            |v| kernel.split(v).map(|s| integrand(&s)).unwrap_or([0.0; 3]),
            start,
            u,
            &[],
            self.opts,
        );
        [base[0] + est.value[0], base[1] + est.value[1], base[2] + est.value[2]]
    }

    pub fn totals(&self) -> [f64; 3] {
        *self.cum.last().expect("non-empty grid")
    }

    /// Boundary level where `pred` changes value. `pred` must be monotone in
    /// `u`; returns 0 or 1 when it never changes.
    pub fn threshold<K: Kernel, F: Fn(&Split) -> bool>(&self, kernel: &K, pred: F) -> Result<f64> {
        let first = pred(&self.nodes[0]);
        let n = self.nodes.len();
        if pred(&self.nodes[n - 1]) == first {
            return Ok(if first { 1.0 } else { 0.0 });
        }
        let j = self.nodes.partition_point(|s| pred(s) == first);
        bisect_level(kernel, &pred, self.nodes[j - 1].u, self.nodes[j].u, first)
    }

    /// Draws `(x, y)` pairs; `lo`/`hi` are chosen with an independent uniform.
    pub fn sample_pair<K: Kernel, R: Rng>(kernel: &K, rng: &mut R) -> Result<(f64, f64)> {
        let u = open_unit(rng);
        let v = open_unit(rng);
        let s = kernel.split(u)?;
        let y = if v <= s.down_weight() { s.lo } else { s.hi };
        Ok((s.x, y))
    }
}

/// Uniform draw on `(0, 1)`, never hitting the endpoints.
pub(crate) fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Bisection for the level in `[lo, hi]` where a monotone predicate flips
/// from `first` to `!first`.
pub(crate) fn bisect_level<K: Kernel, F: Fn(&Split) -> bool>(
    kernel: &K,
    pred: &F,
    mut lo: f64,
    mut hi: f64,
    first: bool,
) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(&kernel.split(mid)?) == first {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// x = 2u - 1 moved symmetrically by ±1.
    struct Shift;
    impl Kernel for Shift {
        fn split(&self, u: f64) -> Result<Split> {
            let x = 2.0 * u - 1.0;
            Ok(Split { u, x, lo: x - 1.0, hi: x + 1.0, slope_lo: 0.0, slope_hi: 0.0 })
        }
    }

    #[test]
    fn table_integrals() {
        let t = Table::build(&Shift, &[0.5], Quadrature::default()).unwrap();
        let [w, up, mv] = t.totals();
        assert!((w - 0.5).abs() < 1e-14);
        assert!((up - 0.5).abs() < 1e-14);
        assert!((mv - 1.0).abs() < 1e-14);
        let c = t.cumulative(&Shift, 0.3);
        assert!((c[0] - 0.15).abs() < 1e-14);
        let u = t.threshold(&Shift, |s| s.lo <= -1.0).unwrap();
        assert!((u - 0.5).abs() < 1e-12);
        assert!(t.jumps.is_empty());
    }

    #[test]
    fn split_limits() {
        let s = Split { u: 0.5, x: 0.0, lo: f64::NEG_INFINITY, hi: 2.0, slope_lo: 0.0, slope_hi: 0.0 };
        assert_eq!(s.down_weight(), 0.0);
        assert_eq!(s.expected_move(), 4.0);
        let s = Split { lo: -1.0, hi: 3.0, ..s };
        assert_eq!(s.down_weight(), 0.75);
        assert_eq!(s.martingale_defect(), 0.0);
    }
}
