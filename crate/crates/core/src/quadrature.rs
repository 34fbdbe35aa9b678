//! Adaptive Gauss–Kronrod quadrature on finite intervals.
//!
//! Every integrand in this crate is piecewise smooth with kinks (or jumps) at
//! points that are known in advance, so the integrator takes a list of seed
//! breakpoints and only bisects panels whose Kronrod/Gauss discrepancy is
//! largest. Endpoints are never evaluated.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Kronrod abscissae for the 15-point rule (the 7-point Gauss nodes are the odd entries).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Options for [`integrate`] and [`integrate_n`].
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    /// Target absolute error of the whole integral.
    pub abs_tol: f64,
    /// Hard cap on the number of panels.
    pub max_panels: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            abs_tol: 1e-10,
            max_panels: 20_000,
        }
    }
}

impl Quadrature {
    pub fn with_tol(abs_tol: f64) -> Self {
        Quadrature {
            abs_tol,
            ..Quadrature::default()
        }
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Estimate<const N: usize> {
    pub value: [f64; N],
    pub error: f64,
    pub panels: usize,
}

/// One 15-point Kronrod panel; returns the Kronrod estimate and the
/// max-norm difference to the embedded Gauss estimate.
pub fn gk15<const N: usize, F>(f: &mut F, lo: f64, hi: f64) -> ([f64; N], f64)
where
    F: FnMut(f64) -> [f64; N],
{
    let centre = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut kronrod = [0.0; N];
    let mut gauss = [0.0; N];

    let fc = f(centre);
    for k in 0..N {
        kronrod[k] = WGK[7] * fc[k];
        gauss[k] = WG[3] * fc[k];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        for k in 0..N {
            let s = f1[k] + f2[k];
            kronrod[k] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * s;
            }
        }
    }
    let mut err = 0.0_f64;
    for k in 0..N {
        kronrod[k] *= half;
        gauss[k] *= half;
        err = err.max((kronrod[k] - gauss[k]).abs());
    }
    (kronrod, err)
}

struct Panel<const N: usize> {
    lo: f64,
    hi: f64,
    value: [f64; N],
    error: f64,
}

impl<const N: usize> PartialEq for Panel<N> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<const N: usize> Eq for Panel<N> {}
impl<const N: usize> PartialOrd for Panel<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Panel<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

/// Integrates a vector-valued `f` over `[lo, hi]`, starting from panels split
/// at every seed strictly inside the interval.
pub fn integrate_n<const N: usize, F>(
    mut f: F,
    lo: f64,
    hi: f64,
    seeds: &[f64],
    opts: Quadrature,
) -> Estimate<N>
where
    F: FnMut(f64) -> [f64; N],
{
    if !(hi > lo) {
        return Estimate {
            value: [0.0; N],
            error: 0.0,
            panels: 0,
        };
    }
    let mut cuts: Vec<f64> = seeds
        .iter()
        .copied()
        .filter(|s| s.is_finite() && *s > lo && *s < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut heap = BinaryHeap::new();
    let mut left = lo;
    for right in cuts.into_iter().chain(std::iter::once(hi)) {
        if right > left {
            let (value, error) = gk15(&mut f, left, right);
            heap.push(Panel {
                lo: left,
                hi: right,
                value,
                error,
            });
            left = right;
        }
    }

    let mut total_err: f64 = heap.iter().map(|p| p.error).sum();
    while total_err > opts.abs_tol && heap.len() < opts.max_panels {
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let mid = 0.5 * (worst.lo + worst.hi);
        if !(mid > worst.lo && mid < worst.hi) {
            // interval at floating-point resolution; keep its estimate
            heap.push(Panel {
                error: 0.0,
                ..worst
            });
            total_err = heap.iter().map(|p| p.error).sum();
            continue;
        }
        let (v1, e1) = gk15(&mut f, worst.lo, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.hi);
        total_err += e1 + e2 - worst.error;
        heap.push(Panel {
            lo: worst.lo,
            hi: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            lo: mid,
            hi: worst.hi,
            value: v2,
            error: e2,
        });
    }

    // re-sum in interval order for reproducibility
    let mut panels = heap.into_vec();
    panels.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut value = [0.0; N];
    let mut error = 0.0;
    for p in &panels {
        for k in 0..N {
            value[k] += p.value[k];
        }
        error += p.error;
    }
    Estimate {
        value,
        error,
        panels: panels.len(),
    }
}

/// Scalar convenience wrapper around [`integrate_n`].
pub fn integrate<F>(mut f: F, lo: f64, hi: f64, seeds: &[f64], opts: Quadrature) -> f64
where
    F: FnMut(f64) -> f64,
{
    integrate_n(|x| [f(x)], lo, hi, seeds, opts).value[0]
}
