//! Reference marginal pairs with known answers, and a generator of random
//! pairs that satisfy the dispersion assumption by construction.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::measure::{Atom, Measure, TailPiece, UniformPiece};

fn piece(lo: f64, hi: f64, w: f64) -> UniformPiece {
    UniformPiece { lo, hi, w }
}

/// `μ = U[-1, 1]`, `ν = U[-2, 2]`.
pub fn uniform() -> (Measure, Measure) {
    (Measure::uniform(-1.0, 1.0), Measure::uniform(-2.0, 2.0))
}

/// `μ = U[-1, 1]`, `ν = ⅝ U[-2, -1] + ⅜ U[1, 4]`.
pub fn moduniform() -> (Measure, Measure) {
    let nu = Measure::new(vec![], vec![piece(-2.0, -1.0, 0.625), piece(1.0, 4.0, 0.375)]).expect("valid");
    (Measure::uniform(-1.0, 1.0), nu)
}

/// `μ = ½δ_{-1/2} + ½U[0, 1]`, `ν(dx) = |x|^{-3} dx` on `|x| > 1`.
pub fn atoms() -> (Measure, Measure) {
    let mu = Measure::new(vec![Atom { x: -0.5, w: 0.5 }], vec![piece(0.0, 1.0, 0.5)]).expect("valid");
    let nu = Measure::with_tails(vec![], vec![], vec![TailPiece::from_edge(-1.0, 0.5), TailPiece::from_edge(1.0, 0.5)])
        .expect("valid");
    (mu, nu)
}

/// `μ = U[-1, 1]`, `ν` uniform on `{-2, -1, 3}`.
pub fn discrete_nu() -> (Measure, Measure) {
    let third = 1.0 / 3.0;
    let nu = Measure::discrete(&[(-2.0, third), (-1.0, third), (3.0, third)]).expect("valid");
    (Measure::uniform(-1.0, 1.0), nu)
}

/// `μ = U[-1, 1]`, `ν = ½U[-3, -1] + ½U[1, 3]`; satisfies the strengthened assumption.
pub fn upper_example() -> (Measure, Measure) {
    let nu = Measure::new(vec![], vec![piece(-3.0, -1.0, 0.5), piece(1.0, 3.0, 0.5)]).expect("valid");
    (Measure::uniform(-1.0, 1.0), nu)
}

/// The fixtures with a lower-bound construction, by name.
pub fn named() -> Vec<(&'static str, (Measure, Measure))> {
    vec![
        ("uniform", uniform()),
        ("moduniform", moduniform()),
        ("atoms", atoms()),
        ("discrete_nu", discrete_nu()),
        ("upper_example", upper_example()),
    ]
}

/// Random atoms and pieces of total mass `w` inside `[lo, hi]`.
fn random_part<R: Rng>(rng: &mut R, lo: f64, hi: f64, w: f64) -> Measure {
    let n_atoms = rng.gen_range(0..=2);
    let n_pieces = rng.gen_range(if n_atoms == 0 { 1 } else { 0 }..=2);
    let raw: Vec<f64> = (0..n_atoms + n_pieces).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut atoms = Vec::new();
    let mut pieces = Vec::new();
    for (i, r) in raw.iter().enumerate() {
        let share = w * r / total;
        if i < n_atoms {
            atoms.push(Atom { x: rng.gen_range(lo..hi), w: share });
        } else {
            let a = rng.gen_range(lo..hi - 1e-3);
            let b = rng.gen_range(a + 1e-3..=hi);
            pieces.push(piece(a, b, share));
        }
    }
    Measure::new(atoms, pieces).expect("valid random part")
}

/// Random pair `(μ, ν)` with `ν = λμ + (1 - λ)ρ`: `μ` is made of atoms and
/// uniform pieces on `[c - w, c + w]` and `ρ`, with the same mean, lives
/// outside `(c - W, c + W)`, `W > w`. Such a pair is in convex order and
/// satisfies the dispersion assumption with `κ = λ`. `common = false` gives
/// `λ = 0`, which also satisfies the strengthened assumption.
pub fn random_dispersed(seed: u64, common: bool) -> (Measure, Measure) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c0 = rng.gen_range(-1.0..1.0);
    let w = rng.gen_range(0.3..1.5);
    let mu = random_part(&mut rng, c0 - w, c0 + w, 1.0);
    let c = mu.mean();
    let gap = rng.gen_range(0.05..1.0);
    // W measured from c so that (c - W, c + W) covers [c0 - w, c0 + w]
    let big_w = w + (c - c0).abs() + gap;
    let (hl, hr) = (rng.gen_range(0.3..2.0), rng.gen_range(0.3..2.0));
    let left = random_part(&mut rng, c - big_w - hl, c - big_w, 1.0);
    let right = random_part(&mut rng, c + big_w, c + big_w + hr, 1.0);
    let (ml, mr) = (left.mean(), right.mean());
    let alpha = (mr - c) / (mr - ml);
    let lambda = if common { rng.gen_range(0.1..0.6) } else { 0.0 };
    let nu = Measure::mixture(&[(lambda, &mu), ((1.0 - lambda) * alpha, &left), ((1.0 - lambda) * (1.0 - alpha), &right)])
        .expect("valid mixture");
    (mu, nu)
}
