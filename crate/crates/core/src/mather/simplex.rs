//! Dense two-phase simplex with Bland's rule.
//!
//! Problems are in standard form: minimize `cᵀx` subject to `Ax = b`,
//! `x ≥ 0`. Sizes here are small (a few hundred columns at most), so a
//! full tableau is kept and every pivot touches it entirely.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-10;
const FEASIBILITY_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 200_000;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self {
            objective,
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_equality(&mut self, row: Vec<f64>, rhs: f64) {
        assert_eq!(row.len(), self.objective.len(), "constraint width");
        self.rows.push(row);
        self.rhs.push(rhs);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// Basic columns of the final tableau, one per non-redundant row.
    pub basis: Vec<usize>,
}

struct Tableau {
    /// rows of `[A | b]`
    rows: Vec<Vec<f64>>,
    /// reduced costs and `-z` in the last slot
    cost: Vec<f64>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.rows[r][j];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[j];
            if f != 0.0 {
                for (v, &pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[j] = 0.0;
            }
        }
        let f = self.cost[j];
        if f != 0.0 {
            for (v, &pv) in self.cost.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.cost[j] = 0.0;
        }
        self.basis[r] = j;
    }

    fn price(&mut self, c: &[f64]) {
        let w = self.width;
        self.cost = vec![0.0; w + 1];
        self.cost[..c.len()].copy_from_slice(c);
        for (i, row) in self.rows.iter().enumerate() {
            let cb = c.get(self.basis[i]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for (v, &a) in self.cost.iter_mut().zip(row) {
                    *v -= cb * a;
                }
            }
        }
    }

    /// Bland's rule iterations over columns `< allowed`.
    fn run(&mut self, allowed: usize, pivots: &mut usize) -> Result<()> {
        loop {
            let Some(j) = (0..allowed).find(|&j| self.cost[j] < -COST_EPS) else {
                return Ok(());
            };
            let w = self.width;
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[j] > PIVOT_EPS {
                    let ratio = row[w] / row[j];
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            if ratio < best - 1e-12
                                || (ratio <= best + 1e-12 && self.basis[i] < self.basis[k])
                            {
                                Some((i, ratio))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::Unbounded);
            };
            self.pivot(r, j);
            *pivots += 1;
            if *pivots > MAX_PIVOTS {
                return Err(Error::LpIterationLimit(MAX_PIVOTS));
            }
        }
    }
}

/// Minimizes `cᵀx` over `Ax = b, x ≥ 0`.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    let n = lp.num_vars();
    let m = lp.rows.len();
    if lp.rhs.len() != m {
        return Err(Error::Dimension {
            expected: m,
            found: lp.rhs.len(),
        });
    }
    let width = n + m;
    let mut rows = Vec::with_capacity(m);
    for (i, (row, &b)) in lp.rows.iter().zip(&lp.rhs).enumerate() {
        if row.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: row.len(),
            });
        }
        let sign = if b < 0.0 { -1.0 } else { 1.0 };
        let mut t = vec![0.0; width + 1];
        for (dst, &a) in t.iter_mut().zip(row) {
            *dst = sign * a;
        }
        t[n + i] = 1.0;
        t[width] = sign * b;
        rows.push(t);
    }
    let mut tab = Tableau {
        rows,
        cost: Vec::new(),
        basis: (n..n + m).collect(),
        width,
    };

    // phase 1: minimize the sum of artificials
    let mut phase1 = vec![0.0; width];
    for c in phase1.iter_mut().skip(n) {
        *c = 1.0;
    }
    tab.price(&phase1);
    let mut pivots = 0;
    tab.run(width, &mut pivots)?;
    if -tab.cost[width] > FEASIBILITY_TOL {
        return Err(Error::Infeasible);
    }

    // drive artificials out of the basis; rows that cannot be cleared are redundant
    let mut r = 0;
    while r < tab.rows.len() {
        if tab.basis[r] >= n {
            match (0..n).find(|&j| tab.rows[r][j].abs() > 1e-9) {
                Some(j) => {
                    tab.pivot(r, j);
                    r += 1;
                }
                None => {
                    tab.rows.remove(r);
                    tab.basis.remove(r);
                }
            }
        } else {
            r += 1;
        }
    }

    // phase 2 on the original columns
    tab.price(&lp.objective);
    tab.run(n, &mut pivots)?;

    let mut x = vec![0.0; n];
    for (i, &j) in tab.basis.iter().enumerate() {
        if j < n {
            x[j] = tab.rows[i][width].max(0.0);
        }
    }
    let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        x,
        value,
        basis: tab.basis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_equality() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_equality(vec![1.0], 1.0);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.value, 1.0);
        assert_eq!(s.x, vec![1.0]);
    }

    #[test]
    fn unbounded_direction() {
        // minimize -x subject to x = y: x grows along with y
        let mut lp = LinearProgram::new(vec![-1.0, 0.0]);
        lp.add_equality(vec![1.0, -1.0], 0.0);
        assert!(matches!(solve_lp(&lp), Err(Error::Unbounded)));
    }

    #[test]
    fn infeasible_system() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add_equality(vec![1.0, 1.0], 1.0);
        lp.add_equality(vec![1.0, 1.0], 2.0);
        assert!(matches!(solve_lp(&lp), Err(Error::Infeasible)));
    }

    #[test]
    fn redundant_rows_and_negative_rhs() {
        // min x0 + 2 x1 + 3 x2 with x0 + x1 + x2 = 1 stated twice, and -x2 = -0.25
        let mut lp = LinearProgram::new(vec![1.0, 2.0, 3.0]);
        lp.add_equality(vec![1.0, 1.0, 1.0], 1.0);
        lp.add_equality(vec![1.0, 1.0, 1.0], 1.0);
        lp.add_equality(vec![0.0, 0.0, -1.0], -0.25);
        let s = solve_lp(&lp).unwrap();
        assert!((s.value - 1.5).abs() < 1e-12, "{}", s.value);
        assert!((s.x[0] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6)
        let mut lp = LinearProgram::new(vec![-3.0, -5.0, 0.0, 0.0, 0.0]);
        lp.add_equality(vec![1.0, 0.0, 1.0, 0.0, 0.0], 4.0);
        lp.add_equality(vec![0.0, 2.0, 0.0, 1.0, 0.0], 12.0);
        lp.add_equality(vec![3.0, 2.0, 0.0, 0.0, 1.0], 18.0);
        let s = solve_lp(&lp).unwrap();
        assert!((s.value + 36.0).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's example, cycles under the largest-coefficient rule
        let mut lp = LinearProgram::new(vec![-0.75, 150.0, -0.02, 6.0, 0.0, 0.0, 0.0]);
        lp.add_equality(vec![0.25, -60.0, -0.04, 9.0, 1.0, 0.0, 0.0], 0.0);
        lp.add_equality(vec![0.5, -90.0, -0.02, 3.0, 0.0, 1.0, 0.0], 0.0);
        lp.add_equality(vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], 1.0);
        let s = solve_lp(&lp).unwrap();
        assert!((s.value + 0.05).abs() < 1e-12, "{}", s.value);
    }
}
