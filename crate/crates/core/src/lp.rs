//! Dense two-phase primal simplex for small equality-form programs
//! `min cᵗx` subject to `Ax = b`, `x ≥ 0`.
//!
//! Pivoting follows Bland's smallest-index rule in both phases, so the
//! method terminates on degenerate problems.

use nalgebra::DMatrix;

const PIVOT_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
    /// A nonbasic column had zero reduced cost at the optimum. Best-effort
    /// hint that other optimal vertices may exist.
    pub zero_reduced_cost: bool,
}

struct Tableau {
    // rows 0..m are constraints, row m is the objective; last column is rhs
    t: DMatrix<f64>,
    basis: Vec<usize>,
    m: usize,
    ncols: usize,
    pivots: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[(row, col)];
        let width = self.ncols + 1;
        for j in 0..width {
            self.t[(row, j)] /= p;
        }
        for i in 0..=self.m {
            if i == row {
                continue;
            }
            let f = self.t[(i, col)];
            if f != 0.0 {
                for j in 0..width {
                    let v = self.t[(row, j)];
                    self.t[(i, j)] -= f * v;
                }
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Runs Bland's rule over the columns in `allowed`. Returns false when
    /// the objective is unbounded below.
    fn optimize(&mut self, allowed: usize, tol: f64) -> bool {
        loop {
            let obj = self.m;
            let entering = (0..allowed).find(|&j| self.t[(obj, j)] < -tol);
            let Some(col) = entering else {
                return true;
            };
            let rhs = self.ncols;
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 0..self.m {
                let a = self.t[(i, col)];
                if a > PIVOT_TOL {
                    let ratio = self.t[(i, rhs)] / a;
                    let cand = (ratio, self.basis[i], i);
                    best = match best {
                        None => Some(cand),
                        Some(b) if ratio < b.0 - 1e-13 * (1.0 + b.0.abs()) => Some(cand),
                        Some(b) if (ratio - b.0).abs() <= 1e-13 * (1.0 + b.0.abs()) && cand.1 < b.1 => Some(cand),
                        Some(b) => Some(b),
                    };
                }
            }
            match best {
                None => return false,
                Some((_, _, row)) => self.pivot(row, col),
            }
        }
    }
}

/// Solves `min cᵗx, Ax = b, x ≥ 0`.
pub fn solve_standard_form(a: &DMatrix<f64>, b: &[f64], c: &[f64]) -> LpOutcome {
    let (m, n) = a.shape();
    assert_eq!(b.len(), m);
    assert_eq!(c.len(), n);
    let scale = a.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let tol = 1e-10 * scale;

    // Columns: n structural, m artificial, then rhs.
    let ncols = n + m;
    let mut t = DMatrix::<f64>::zeros(m + 1, ncols + 1);
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[(i, j)] = sign * a[(i, j)];
        }
        t[(i, n + i)] = 1.0;
        t[(i, ncols)] = sign * b[i];
    }
    // Phase-one objective: sum of artificials, expressed in nonbasic terms.
    for j in 0..=ncols {
        if j >= n && j < ncols {
            continue;
        }
        let s: f64 = (0..m).map(|i| t[(i, j)]).sum();
        t[(m, j)] = -s;
    }
    let mut tab = Tableau {
        t,
        basis: (n..n + m).collect(),
        m,
        ncols,
        pivots: 0,
    };
    tab.optimize(n, tol);
    let infeasibility = -tab.t[(m, ncols)];
    let b_scale = b.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    if infeasibility > 1e-9 * b_scale {
        return LpOutcome::Infeasible;
    }

    // Drive remaining artificials out of the basis; rows where that is
    // impossible are redundant and are neutralized.
    let mut redundant = vec![false; m];
    for i in 0..m {
        if tab.basis[i] >= n {
            match (0..n).find(|&j| tab.t[(i, j)].abs() > 1e-9) {
                Some(j) => tab.pivot(i, j),
                None => redundant[i] = true,
            }
        }
    }
    for (i, &r) in redundant.iter().enumerate() {
        if r {
            for j in 0..=ncols {
                tab.t[(i, j)] = 0.0;
            }
            // keep the artificial basic at zero so it never re-enters
            tab.t[(i, tab.basis[i])] = 1.0;
        }
    }

    // Phase two objective row.
    for j in 0..=ncols {
        tab.t[(m, j)] = if j < n { c[j] } else { 0.0 };
    }
    for i in 0..m {
        let bj = tab.basis[i];
        if bj < n && c[bj] != 0.0 {
            let f = c[bj];
            for j in 0..=ncols {
                let v = tab.t[(i, j)];
                tab.t[(m, j)] -= f * v;
            }
        }
    }
    if !tab.optimize(n, tol) {
        return LpOutcome::Unbounded;
    }

    let mut x = vec![0.0; n];
    for i in 0..m {
        if tab.basis[i] < n {
            x[tab.basis[i]] = tab.t[(i, ncols)].max(0.0);
        }
    }
    let in_basis: Vec<bool> = {
        let mut v = vec![false; n];
        for &bj in &tab.basis {
            if bj < n {
                v[bj] = true;
            }
        }
        v
    };
    let zero_reduced_cost = (0..n).any(|j| !in_basis[j] && tab.t[(m, j)].abs() <= tol);
    let objective = x.iter().zip(c).map(|(a, b)| a * b).sum();
    LpOutcome::Optimal(LpSolution {
        x,
        objective,
        pivots: tab.pivots,
        zero_reduced_cost,
    })
}
