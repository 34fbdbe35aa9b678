//! Closed forms, reference CDFs and small numerical oracles shared by the
//! integration tests. Nothing here calls into the library.

#![allow(dead_code)]

use std::path::PathBuf;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * i as f64);
    }
    s * h / 3.0
}

/// Mean of `|Y - x|` when `Y ∈ {p, q}` has mean `x`.
pub fn two_point_move(x: f64, p: f64, q: f64) -> f64 {
    2.0 * (x - p) * (q - x) / (q - p)
}

pub fn uniform_pq(x: f64) -> (f64, f64) {
    let r = (12.0 - 3.0 * x * x).sqrt();
    ((-x - r) / 2.0, (-x + r) / 2.0)
}

pub fn moduniform_pq(x: f64) -> (f64, f64) {
    let r = (25.0 - 8.0 * x - 8.0 * x * x).sqrt();
    (-(5.0 + 4.0 * x + r) / 6.0, -(5.0 + 4.0 * x - 5.0 * r) / 6.0)
}

/// `(P(u), Q(u))` for `μ = ½δ_{-1/2} + ½U[0,1]` against the `|x|^-3` tails.
pub fn atoms_pq(u: f64) -> (f64, f64) {
    let u2 = u * u;
    if u <= 0.5 {
        (-(2.0 - u) / (2.0 - 3.0 * u + u2 / 4.0), (2.0 - u) / (u + u2 / 4.0))
    } else {
        // 2 - 4u + 3u² - 2u³ + u⁴ = (1 - u)²(u² + 2), factored to avoid cancellation near u = 1
        let n = 2.0 * (1.0 - u + u2);
        let v = 1.0 - u;
        (-n / (v * v * (u2 + 2.0)), n / (u2 * (3.0 - 2.0 * u + u2)))
    }
}

pub fn discrete_threshold() -> f64 {
    3.0 - 4.0 * (2.0f64 / 3.0).sqrt()
}

/// Lower price on the uniform fixture: half the mass stays, the rest moves
/// along `(p, q)`.
pub fn uniform_price() -> f64 {
    let f = |x| {
        let (p, q) = uniform_pq(x);
        0.5 * two_point_move(x, p, q)
    };
    0.5 * simpson(f, -1.0, 1.0, 20_000)
}

pub fn moduniform_price() -> f64 {
    let f = |x| {
        let (p, q) = moduniform_pq(x);
        0.5 * two_point_move(x, p, q)
    };
    simpson(f, -1.0, 1.0, 20_000)
}

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

pub fn cdf_uniform(lo: f64, hi: f64, y: f64) -> f64 {
    clamp01((y - lo) / (hi - lo))
}

pub type Cdf = fn(f64) -> f64;

pub fn mu_u11(y: f64) -> f64 {
    cdf_uniform(-1.0, 1.0, y)
}

pub fn nu_u22(y: f64) -> f64 {
    cdf_uniform(-2.0, 2.0, y)
}

pub fn nu_moduniform(y: f64) -> f64 {
    0.625 * cdf_uniform(-2.0, -1.0, y) + 0.375 * cdf_uniform(1.0, 4.0, y)
}

pub fn mu_atoms(y: f64) -> f64 {
    0.5 * f64::from(u8::from(y >= -0.5)) + 0.5 * cdf_uniform(0.0, 1.0, y)
}

pub fn nu_tails(y: f64) -> f64 {
    if y <= -1.0 {
        0.5 / (y * y)
    } else if y < 1.0 {
        0.5
    } else {
        1.0 - 0.5 / (y * y)
    }
}

pub fn nu_discrete(y: f64) -> f64 {
    [-2.0, -1.0, 3.0].iter().filter(|&&a| a <= y).count() as f64 / 3.0
}

pub fn nu_upper(y: f64) -> f64 {
    0.5 * cdf_uniform(-3.0, -1.0, y) + 0.5 * cdf_uniform(1.0, 3.0, y)
}

/// `(name, F_μ, F_ν)` for the five reference pairs.
pub fn reference_cdfs() -> Vec<(&'static str, Cdf, Cdf)> {
    vec![
        ("uniform", mu_u11 as Cdf, nu_u22 as Cdf),
        ("moduniform", mu_u11, nu_moduniform),
        ("atoms", mu_atoms, nu_tails),
        ("discrete_nu", mu_u11, nu_discrete),
        ("upper_example", mu_u11, nu_upper),
    ]
}

/// Left limit of a right-continuous CDF.
fn left(f: Cdf, y: f64) -> f64 {
    f(y - 1e-12 * (1.0 + y.abs()))
}

/// Kolmogorov distance between the empirical law of `xs` and `f`.
pub fn ks_distance(mut xs: Vec<f64>, f: Cdf) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut worst = 0.0_f64;
    let mut i = 0;
    while i < xs.len() {
        let v = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == v {
            j += 1;
        }
        worst = worst.max((i as f64 / n - left(f, v)).abs());
        worst = worst.max((j as f64 / n - f(v)).abs());
        i = j;
    }
    worst
}

/// Smallest `y` with `f(y) ≥ t`, by bisection on a bracket.
pub fn quantile(f: Cdf, t: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if f(m) >= t {
            hi = m;
        } else {
            lo = m;
        }
    }
    hi
}
