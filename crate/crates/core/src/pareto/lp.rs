//! Dense two-phase simplex with Bland's rule, for the tiny programs of the
//! common-ascent search.

use super::ParetoError;

const EPS: f64 = 1e-10;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub cmp: Cmp,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

struct Tableau {
    /// `rows × (cols + 1)`, last column is the right-hand side.
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.a[r][c];
        for v in &mut self.a[r] {
            *v /= p;
        }
        let pivot_row = self.a[r].clone();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Maximizes `obj · x` over the columns in `allowed`. Returns false when
    /// unbounded.
    fn optimize(&mut self, obj: &[f64], allowed: &[bool]) -> Result<bool, ParetoError> {
        let n_cols = allowed.len();
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(ParetoError::LpNumericalFailure(format!(
                    "more than {MAX_PIVOTS} pivots"
                )));
            }
            // Reduced cost of column j: obj_j − Σ_i obj_{basis_i} a_ij.
            let entering = (0..n_cols).find(|&j| {
                allowed[j] && !self.basis.contains(&j) && {
                    let z: f64 = self
                        .a
                        .iter()
                        .zip(&self.basis)
                        .map(|(row, &b)| obj[b] * row[j])
                        .sum();
                    obj[j] - z > EPS
                }
            });
            let Some(c) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.a.iter().enumerate() {
                if row[c] > EPS {
                    let ratio = row[n_cols] / row[c];
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < lr - EPS
                                || (ratio <= lr + EPS && self.basis[i] < self.basis[li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Ok(false);
            };
            self.pivot(r, c);
        }
    }
}

/// Maximizes `c · x` subject to `constraints` and `x ≥ 0`.
pub fn maximize(c: &[f64], constraints: &[Constraint]) -> Result<LpOutcome, ParetoError> {
    let n = c.len();
    let m = constraints.len();
    // Column layout: originals, one slack per inequality, one artificial per
    // ≥ or = row.
    let mut n_slack = 0;
    let mut n_art = 0;
    let rows: Vec<(Vec<f64>, Cmp, f64)> = constraints
        .iter()
        .map(|con| {
            if con.rhs < 0.0 {
                let flipped = match con.cmp {
                    Cmp::Le => Cmp::Ge,
                    Cmp::Ge => Cmp::Le,
                    Cmp::Eq => Cmp::Eq,
                };
                (con.coeffs.iter().map(|v| -v).collect(), flipped, -con.rhs)
            } else {
                (con.coeffs.clone(), con.cmp, con.rhs)
            }
        })
        .collect();
    for (_, cmp, _) in &rows {
        if *cmp != Cmp::Eq {
            n_slack += 1;
        }
        if *cmp != Cmp::Le {
            n_art += 1;
        }
    }
    let n_cols = n + n_slack + n_art;
    let mut a = vec![vec![0.0; n_cols + 1]; m];
    let mut basis = vec![0; m];
    let (mut si, mut ai) = (n, n + n_slack);
    for (i, (coeffs, cmp, rhs)) in rows.iter().enumerate() {
        assert_eq!(coeffs.len(), n, "constraint width");
        a[i][..n].copy_from_slice(coeffs);
        a[i][n_cols] = *rhs;
        match cmp {
            Cmp::Le => {
                a[i][si] = 1.0;
                basis[i] = si;
                si += 1;
            }
            Cmp::Ge => {
                a[i][si] = -1.0;
                si += 1;
                a[i][ai] = 1.0;
                basis[i] = ai;
                ai += 1;
            }
            Cmp::Eq => {
                a[i][ai] = 1.0;
                basis[i] = ai;
                ai += 1;
            }
        }
    }
    let mut t = Tableau {
        a,
        basis,
        pivots: 0,
    };

    let is_art = |j: usize| j >= n + n_slack && j < n_cols;
    if n_art > 0 {
        let obj1: Vec<f64> = (0..n_cols)
            .map(|j| if is_art(j) { -1.0 } else { 0.0 })
            .collect();
        t.optimize(&obj1, &vec![true; n_cols])?;
        let infeas: f64 =
            t.a.iter()
                .zip(&t.basis)
                .filter(|(_, &b)| is_art(b))
                .map(|(row, _)| row[n_cols])
                .sum();
        if infeas > 1e-9 {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive remaining artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < t.a.len() {
            if is_art(t.basis[i]) {
                match (0..n + n_slack).find(|&j| t.a[i][j].abs() > EPS) {
                    Some(j) => {
                        t.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        t.a.remove(i);
                        t.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
    }
    let mut obj2 = vec![0.0; n_cols];
    obj2[..n].copy_from_slice(c);
    let allowed: Vec<bool> = (0..n_cols).map(|j| !is_art(j)).collect();
    if !t.optimize(&obj2, &allowed)? {
        return Ok(LpOutcome::Unbounded);
    }
    let mut x = vec![0.0; n];
    for (row, &b) in t.a.iter().zip(&t.basis) {
        if b < n {
            x[b] = row[n_cols];
        }
    }
    let value = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    Ok(LpOutcome::Optimal { x, value })
}
