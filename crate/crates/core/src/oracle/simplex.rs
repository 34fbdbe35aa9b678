//! Revised simplex for `min cᵀx, Ax = b, x ≥ 0` with sparse columns and an
//! explicit dense basis inverse. Two phases with one artificial per row.
//! Dantzig pricing, switching to Bland's rule after a run of degenerate pivots.

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 1000;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone)]
pub(crate) struct SparseLp {
    pub rows: usize,
    pub cols: Vec<Vec<(usize, f64)>>,
    pub cost: Vec<f64>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub pivots: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpFailure {
    /// Rows whose artificial could not be driven to zero.
    Infeasible(Vec<usize>),
    Unbounded,
    PivotLimit(usize),
}

struct Solver<'a> {
    lp: &'a SparseLp,
    m: usize,
    n: usize,
    sign: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    pivots: usize,
    max_pivots: usize,
}

impl<'a> Solver<'a> {
    fn new(lp: &'a SparseLp, max_pivots: usize) -> Solver<'a> {
        let m = lp.rows;
        let n = lp.cols.len();
        let sign: Vec<f64> = lp.rhs.iter().map(|&b| if b < 0.0 { -1.0 } else { 1.0 }).collect();
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        let mut is_basic = vec![false; n + m];
        for flag in &mut is_basic[n..] {
            *flag = true;
        }
        Solver {
            lp,
            m,
            n,
            xb: lp.rhs.iter().map(|b| b.abs()).collect(),
            sign,
            basis: (n..n + m).collect(),
            is_basic,
            binv,
            pivots: 0,
            max_pivots,
        }
    }

    fn column(&self, q: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        if q < self.n {
            out.extend(self.lp.cols[q].iter().map(|&(r, a)| (r, a * self.sign[r])));
        } else {
            out.push((q - self.n, 1.0));
        }
    }

    fn is_artificial(&self, q: usize) -> bool {
        q >= self.n
    }

    fn duals(&self, cost: &dyn Fn(usize) -> f64) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for i in 0..m {
            let cb = cost(self.basis[i]);
            if cb != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yj, &b) in y.iter_mut().zip(row) {
                    *yj += cb * b;
                }
            }
        }
        y
    }

    fn ftran(&self, col: &[(usize, f64)]) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for (i, a) in alpha.iter_mut().enumerate() {
            let row = &self.binv[i * m..(i + 1) * m];
            *a = col.iter().map(|&(r, v)| row[r] * v).sum();
        }
        alpha
    }

    fn pivot(&mut self, p: usize, q: usize, alpha: &[f64], step: f64) {
        let m = self.m;
        for i in 0..m {
            if i != p {
                self.xb[i] -= step * alpha[i];
                if self.xb[i] < 0.0 && self.xb[i] > -FEAS_TOL {
                    self.xb[i] = 0.0;
                }
            }
        }
        self.xb[p] = step;
        let ap = alpha[p];
        let prow: Vec<f64> = self.binv[p * m..(p + 1) * m].iter().map(|v| v / ap).collect();
        for i in 0..m {
            let f = alpha[i];
            if i == p || f == 0.0 {
                continue;
            }
            let row = &mut self.binv[i * m..(i + 1) * m];
            for (r, &pv) in row.iter_mut().zip(&prow) {
                *r -= f * pv;
            }
        }
        self.binv[p * m..(p + 1) * m].copy_from_slice(&prow);
        self.is_basic[self.basis[p]] = false;
        self.is_basic[q] = true;
        self.basis[p] = q;
        self.pivots += 1;
        if self.pivots % REFACTOR_EVERY == 0 {
            self.refactor();
        }
    }

    /// Rebuilds `B^{-1}` by Gauss-Jordan with partial pivoting, then `x_B`.
    fn refactor(&mut self) {
        let m = self.m;
        let mut b = vec![0.0; m * m];
        let mut col = Vec::new();
        for (j, &q) in self.basis.iter().enumerate() {
            self.column(q, &mut col);
            for &(r, v) in &col {
                b[r * m + j] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let piv = (c..m)
                .max_by(|&i, &j| b[i * m + c].abs().total_cmp(&b[j * m + c].abs()))
                .expect("non-empty range");
            if b[piv * m + c] == 0.0 {
                // singular basis; keep the updated inverse
                return;
            }
            if piv != c {
                for k in 0..m {
                    b.swap(piv * m + k, c * m + k);
                    inv.swap(piv * m + k, c * m + k);
                }
            }
            let d = b[c * m + c];
            for k in 0..m {
                b[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for i in 0..m {
                let f = b[i * m + c];
                if i == c || f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    b[i * m + k] -= f * b[c * m + k];
                    inv[i * m + k] -= f * inv[c * m + k];
                }
            }
        }
        self.binv = inv;
        let rhs: Vec<f64> = self.lp.rhs.iter().map(|v| v.abs()).collect();
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            self.xb[i] = row.iter().zip(&rhs).map(|(a, b)| a * b).sum::<f64>().max(0.0);
        }
    }

    /// Runs simplex iterations for `cost`; artificials never enter. In
    /// phase 2 basic artificials are held at zero.
    fn run(&mut self, cost: &dyn Fn(usize) -> f64, phase_two: bool) -> Result<(), LpFailure> {
        let mut col = Vec::new();
        let mut degenerate = 0;
        loop {
            if self.pivots >= self.max_pivots {
                return Err(LpFailure::PivotLimit(self.pivots));
            }
            let y = self.duals(cost);
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter = None;
            let mut best = -COST_TOL;
            for q in 0..self.n {
                if self.is_basic[q] {
                    continue;
                }
                let d = cost(q) - self.lp.cols[q].iter().map(|&(r, a)| y[r] * a * self.sign[r]).sum::<f64>();
                if d < best {
                    enter = Some(q);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(q) = enter else {
                return Ok(());
            };
            self.column(q, &mut col);
            let alpha = self.ftran(&col);

            let Some((p, step)) = self.ratio_test(&alpha, phase_two, bland) else {
                return Err(LpFailure::Unbounded);
            };
            if step <= 1e-14 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(p, q, &alpha, step.max(0.0));
        }
    }

    /// Harris two-pass ratio test: bound the step with relaxed bounds, then
    /// take the largest pivot among rows reaching it.
    fn ratio_test(&self, alpha: &[f64], phase_two: bool, bland: bool) -> Option<(usize, f64)> {
        let mut bound = f64::INFINITY;
        for i in 0..self.m {
            let a = alpha[i];
            if phase_two && self.is_artificial(self.basis[i]) && a.abs() > PIVOT_TOL {
                return Some((i, 0.0));
            }
            if a > PIVOT_TOL {
                bound = bound.min((self.xb[i].max(0.0) + FEAS_TOL) / a);
            }
        }
        if bound.is_infinite() {
            return None;
        }
        let mut pick: Option<usize> = None;
        for i in 0..self.m {
            let a = alpha[i];
            if a > PIVOT_TOL && self.xb[i].max(0.0) / a <= bound {
                let better = match pick {
                    None => true,
                    Some(j) => {
                        if bland {
                            self.basis[i] < self.basis[j]
                        } else {
                            a > alpha[j]
                        }
                    }
                };
                if better {
                    pick = Some(i);
                }
            }
        }
        pick.map(|p| (p, self.xb[p].max(0.0) / alpha[p]))
    }

    /// Pivots zero-level artificials out of the basis where a structural
    /// column can replace them.
    fn drive_out_artificials(&mut self) {
        let m = self.m;
        let mut col = Vec::new();
        for p in 0..m {
            if !self.is_artificial(self.basis[p]) {
                continue;
            }
            let row: Vec<f64> = self.binv[p * m..(p + 1) * m].to_vec();
            let found = (0..self.n).find(|&q| {
                !self.is_basic[q]
                    && self.lp.cols[q]
                        .iter()
                        .map(|&(r, a)| row[r] * a * self.sign[r])
                        .sum::<f64>()
                        .abs()
                        > 1e-7
            });
            if let Some(q) = found {
                self.column(q, &mut col);
                let alpha = self.ftran(&col);
                self.xb[p] = 0.0;
                self.pivot(p, q, &alpha, 0.0);
            }
        }
    }
}

pub(crate) fn solve(lp: &SparseLp, max_pivots: usize) -> Result<LpSolution, LpFailure> {
    let mut s = Solver::new(lp, max_pivots);
    let n = s.n;
    s.run(&|q| if q >= n { 1.0 } else { 0.0 }, false)?;
    let bad: Vec<usize> = (0..s.m)
        .filter(|&i| s.is_artificial(s.basis[i]) && s.xb[i] > FEAS_TOL)
        .map(|i| s.basis[i] - n)
        .collect();
    if !bad.is_empty() {
        return Err(LpFailure::Infeasible(bad));
    }
    s.drive_out_artificials();
    s.run(&|q| if q >= n { 0.0 } else { lp.cost[q] }, true)?;
    s.refactor();
    let mut x = vec![0.0; n];
    for (i, &q) in s.basis.iter().enumerate() {
        if q < n {
            x[q] = s.xb[i];
        }
    }
    let value = x.iter().zip(&lp.cost).map(|(x, c)| x * c).sum();
    Ok(LpSolution {
        x,
        value,
        pivots: s.pivots,
    })
}
