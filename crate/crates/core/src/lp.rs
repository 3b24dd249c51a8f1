//! Dense two-phase simplex for the small feasibility problems of linear
//! families: `max c^T x` subject to `A x = b`, `x >= 0`.

use nalgebra::DMatrix;

const EPS: f64 = 1e-11;
/// A symbol is in the support when some member puts at least this mass on it.
pub const SUPPORT_TOL: f64 = 1e-10;

struct Tableau {
    /// `rows x (cols + 1)`; last column is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let row = self.t[r].clone();
        for (i, line) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let factor = line[c];
            if factor != 0.0 {
                for (v, rv) in line.iter_mut().zip(&row) {
                    *v -= factor * rv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Maximizes `obj^T x` over the columns in `allowed`. Bland's rule.
    /// Returns `false` when unbounded.
    fn optimize(&mut self, obj: &[f64], allowed: &[bool]) -> bool {
        for _ in 0..10_000 {
            // reduced cost: obj_j - sum_r obj_{basis r} t[r][j]
            let entering = (0..self.cols).find(|&j| {
                allowed[j] && !self.basis.contains(&j) && {
                    let rc = obj[j] - self.t.iter().zip(&self.basis).map(|(row, &b)| obj[b] * row[j]).sum::<f64>();
                    rc > EPS
                }
            });
            let Some(c) = entering else {
                return true;
            };
            let rhs = self.cols;
            let mut best: Option<(usize, f64)> = None;
            for (r, row) in self.t.iter().enumerate() {
                if row[c] > EPS {
                    let ratio = row[rhs] / row[c];
                    match best {
                        Some((br, bv))
                            if ratio > bv + EPS || ((ratio - bv).abs() <= EPS && self.basis[r] > self.basis[br]) => {}
                        _ => best = Some((r, ratio)),
                    }
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, c),
                None => return false,
            }
        }
        true
    }

    fn value(&self, n: usize) -> Vec<f64> {
        let mut x = vec![0.0; n];
        for (r, &b) in self.basis.iter().enumerate() {
            if b < n {
                x[b] = self.t[r][self.cols].max(0.0);
            }
        }
        x
    }
}

/// Feasible tableau for `A x = b, x >= 0`, or `None` when infeasible.
fn phase_one(a: &DMatrix<f64>, b: &[f64]) -> Option<Tableau> {
    let (p, n) = (a.nrows(), a.ncols());
    let cols = n + p;
    let mut t = Vec::with_capacity(p);
    for r in 0..p {
        let sign = if b[r] < 0.0 { -1.0 } else { 1.0 };
        let mut row = vec![0.0; cols + 1];
        for j in 0..n {
            row[j] = sign * a[(r, j)];
        }
        row[n + r] = 1.0;
        row[cols] = sign * b[r];
        t.push(row);
    }
    let mut tab = Tableau { t, basis: (n..n + p).collect(), cols };
    let obj: Vec<f64> = (0..cols).map(|j| if j >= n { -1.0 } else { 0.0 }).collect();
    tab.optimize(&obj, &vec![true; cols]);
    let infeas: f64 = tab.basis.iter().enumerate().filter(|(_, &bc)| bc >= n).map(|(r, _)| tab.t[r][cols]).sum();
    if infeas > 1e-9 {
        return None;
    }
    // drive artificials out of the basis, dropping redundant rows
    let mut r = 0;
    while r < tab.basis.len() {
        if tab.basis[r] >= n {
            if let Some(c) = (0..n).find(|&j| tab.t[r][j].abs() > 1e-9) {
                tab.pivot(r, c);
                r += 1;
            } else {
                tab.t.remove(r);
                tab.basis.remove(r);
            }
        } else {
            r += 1;
        }
    }
    Some(tab)
}

/// `max c^T x` over `A x = b, x >= 0`. `None` when infeasible or unbounded.
pub fn maximize(c: &[f64], a: &DMatrix<f64>, b: &[f64]) -> Option<(f64, Vec<f64>)> {
    let n = a.ncols();
    let mut tab = phase_one(a, b)?;
    let mut obj = c.to_vec();
    obj.resize(tab.cols, 0.0);
    let allowed: Vec<bool> = (0..tab.cols).map(|j| j < n).collect();
    if !tab.optimize(&obj, &allowed) {
        return None;
    }
    let x = tab.value(n);
    let v = c.iter().zip(&x).map(|(c, x)| c * x).sum();
    Some((v, x))
}

/// Constraint matrix `[f; 1]` and right-hand side `[a; 1]`.
fn simplex_system(f: &DMatrix<f64>, a: &[f64]) -> (DMatrix<f64>, Vec<f64>) {
    let (k, m) = (f.nrows(), f.ncols());
    let mat = DMatrix::from_fn(k + 1, m, |i, j| if i < k { f[(i, j)] } else { 1.0 });
    let mut rhs = a.to_vec();
    rhs.push(1.0);
    (mat, rhs)
}

/// Symbols charged by at least one member of `{P : f P = a}`; `None` if empty.
pub fn linear_family_support(f: &DMatrix<f64>, a: &[f64]) -> Option<Vec<bool>> {
    let (mat, rhs) = simplex_system(f, a);
    phase_one(&mat, &rhs)?;
    let m = f.ncols();
    let mut support = vec![false; m];
    for x in 0..m {
        if support[x] {
            continue;
        }
        let mut c = vec![0.0; m];
        c[x] = 1.0;
        let (_, point) = maximize(&c, &mat, &rhs)?;
        for (s, p) in support.iter_mut().zip(&point) {
            if *p > SUPPORT_TOL {
                *s = true;
            }
        }
    }
    Some(support)
}
