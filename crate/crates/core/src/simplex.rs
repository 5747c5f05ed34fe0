//! Dense two-phase tableau simplex over exact rationals.
//!
//! Solves `min c·z  s.t.  A z = b, z >= 0` with Bland's rule (lowest-index
//! entering column, lowest-index basic variable among tied ratios), so it
//! terminates on degenerate problems. Duals are read off `c_B B^-1`, with
//! `B^-1` taken from the columns that formed the starting identity basis.

use num_traits::{Signed, Zero};

use crate::error::{FtfpError, Result};
use crate::rational::Rational;

#[derive(Clone, Debug)]
pub struct StandardLp {
    pub a: Vec<Vec<Rational>>,
    pub b: Vec<Rational>,
    pub c: Vec<Rational>,
}

#[derive(Clone, Debug)]
pub struct LpOptimum {
    pub x: Vec<Rational>,
    /// One dual value per row of `A`, in the row's original orientation.
    pub duals: Vec<Rational>,
    pub objective: Rational,
    pub pivots: usize,
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn pivot(
        &mut self,
        pr: usize,
        pc: usize,
        objective: &mut [Rational],
        obj_value: &mut Rational,
    ) {
        let piv = self.rows[pr][pc].clone();
        let nz: Vec<usize> = (0..self.rows[pr].len())
            .filter(|&k| !self.rows[pr][k].is_zero())
            .collect();
        for &k in &nz {
            self.rows[pr][k] /= &piv;
        }
        self.rhs[pr] /= &piv;
        let prow: Vec<(usize, Rational)> =
            nz.iter().map(|&k| (k, self.rows[pr][k].clone())).collect();
        let prhs = self.rhs[pr].clone();
        for r in 0..self.rows.len() {
            if r == pr || self.rows[r][pc].is_zero() {
                continue;
            }
            let factor = self.rows[r][pc].clone();
            for (k, v) in &prow {
                self.rows[r][*k] -= &factor * v;
            }
            self.rhs[r] -= &factor * &prhs;
        }
        if !objective[pc].is_zero() {
            let factor = objective[pc].clone();
            for (k, v) in &prow {
                objective[*k] -= &factor * v;
            }
            // The objective row stores -z in its rhs slot.
            *obj_value -= &factor * &prhs;
        }
        self.basis[pr] = pc;
        self.pivots += 1;
    }

    /// Runs Bland's rule on the given reduced-cost row until optimal.
    fn optimize(
        &mut self,
        objective: &mut [Rational],
        obj_value: &mut Rational,
        allowed: usize,
    ) -> Result<()> {
        loop {
            let entering = (0..allowed).find(|&k| objective[k].is_negative());
            let Some(pc) = entering else {
                return Ok(());
            };
            let mut best: Option<(usize, Rational)> = None;
            for r in 0..self.rows.len() {
                let coef = &self.rows[r][pc];
                if !coef.is_positive() {
                    continue;
                }
                let ratio = &self.rhs[r] / coef;
                let better = match &best {
                    None => true,
                    Some((br, bv)) => {
                        ratio < *bv || (ratio == *bv && self.basis[r] < self.basis[*br])
                    }
                };
                if better {
                    best = Some((r, ratio));
                }
            }
            let Some((pr, _)) = best else {
                return Err(FtfpError::Solver("LP is unbounded".to_string()));
            };
            self.pivot(pr, pc, objective, obj_value);
        }
    }
}

pub fn solve(lp: &StandardLp) -> Result<LpOptimum> {
    let m = lp.b.len();
    let n = lp.c.len();
    if lp.a.len() != m || lp.a.iter().any(|row| row.len() != n) {
        return Err(FtfpError::Solver(
            "constraint matrix has the wrong shape".to_string(),
        ));
    }

    let mut rows = lp.a.clone();
    let mut rhs = lp.b.clone();
    let mut sign = vec![1i8; m];
    for r in 0..m {
        if rhs[r].is_negative() {
            sign[r] = -1;
            rhs[r] = -rhs[r].clone();
            for v in rows[r].iter_mut() {
                *v = -v.clone();
            }
        }
    }

    // Reuse unit columns as the starting basis; add artificials elsewhere.
    let mut start_col: Vec<Option<usize>> = vec![None; m];
    for col in 0..n {
        let mut hit = None;
        let mut unit = true;
        for (r, row) in rows.iter().enumerate() {
            let v = &row[col];
            if v.is_zero() {
                continue;
            }
            if hit.is_some() || *v != Rational::from_integer(1.into()) {
                unit = false;
                break;
            }
            hit = Some(r);
        }
        if let (true, Some(r)) = (unit, hit) {
            if start_col[r].is_none() {
                start_col[r] = Some(col);
            }
        }
    }
    let art_rows: Vec<usize> = (0..m).filter(|&r| start_col[r].is_none()).collect();
    let total = n + art_rows.len();
    for row in rows.iter_mut() {
        row.resize(total, Rational::zero());
    }
    for (k, &r) in art_rows.iter().enumerate() {
        rows[r][n + k] = Rational::from_integer(1.into());
        start_col[r] = Some(n + k);
    }
    let start_col: Vec<usize> = start_col
        .into_iter()
        .map(|c| c.expect("every row has a start column"))
        .collect();

    let mut tab = Tableau {
        rows,
        rhs,
        basis: start_col.clone(),
        pivots: 0,
    };

    // Phase 1: minimise the sum of artificials.
    if !art_rows.is_empty() {
        let mut obj = vec![Rational::zero(); total];
        let mut value = Rational::zero();
        for k in 0..art_rows.len() {
            obj[n + k] = Rational::from_integer(1.into());
        }
        for &r in &art_rows {
            for k in 0..total {
                if !tab.rows[r][k].is_zero() {
                    obj[k] -= &tab.rows[r][k];
                }
            }
            value -= &tab.rhs[r];
        }
        tab.optimize(&mut obj, &mut value, total)?;
        if !value.is_zero() {
            return Err(FtfpError::Solver("LP is infeasible".to_string()));
        }
        // Drive zero-level artificials out of the basis where possible.
        for r in 0..m {
            if tab.basis[r] < n {
                continue;
            }
            if let Some(pc) = (0..n).find(|&k| !tab.rows[r][k].is_zero()) {
                tab.pivot(r, pc, &mut obj, &mut value);
            }
        }
    }

    // Phase 2 on the true costs; artificials may not re-enter.
    let cost = |k: usize| -> Rational {
        if k < n {
            lp.c[k].clone()
        } else {
            Rational::zero()
        }
    };
    let mut obj: Vec<Rational> = (0..total).map(cost).collect();
    let mut value = Rational::zero();
    for r in 0..m {
        let cb = cost(tab.basis[r]);
        if cb.is_zero() {
            continue;
        }
        for k in 0..total {
            if !tab.rows[r][k].is_zero() {
                obj[k] -= &cb * &tab.rows[r][k];
            }
        }
        value -= &cb * &tab.rhs[r];
    }
    tab.optimize(&mut obj, &mut value, n)?;

    let mut x = vec![Rational::zero(); n];
    for r in 0..m {
        if tab.basis[r] < n {
            x[tab.basis[r]] = tab.rhs[r].clone();
        }
    }
    let objective: Rational = x.iter().zip(&lp.c).map(|(v, c)| v * c).sum();
    debug_assert_eq!(objective, -value);

    let duals = (0..m)
        .map(|row| {
            let col = start_col[row];
            let mut pi = Rational::zero();
            for r in 0..m {
                let entry = &tab.rows[r][col];
                if !entry.is_zero() {
                    pi += cost(tab.basis[r]) * entry;
                }
            }
            if sign[row] < 0 {
                -pi
            } else {
                pi
            }
        })
        .collect();

    Ok(LpOptimum {
        x,
        duals,
        objective,
        pivots: tab.pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn lp(a: Vec<Vec<i64>>, b: Vec<i64>, c: Vec<i64>) -> StandardLp {
        StandardLp {
            a: a.into_iter()
                .map(|r| r.into_iter().map(int).collect())
                .collect(),
            b: b.into_iter().map(int).collect(),
            c: c.into_iter().map(int).collect(),
        }
    }

    #[test]
    fn small_textbook_problem() {
        // min -x1 - x2  s.t. x1 + 2x2 + s1 = 4, 3x1 + x2 + s2 = 6.
        let p = lp(
            vec![vec![1, 2, 1, 0], vec![3, 1, 0, 1]],
            vec![4, 6],
            vec![-1, -1, 0, 0],
        );
        let opt = solve(&p).unwrap();
        assert_eq!(opt.x[0], ratio(8, 5));
        assert_eq!(opt.x[1], ratio(6, 5));
        assert_eq!(opt.objective, ratio(-14, 5));
        // Strong duality: b·pi = c·x.
        let dual_obj = &opt.duals[0] * int(4) + &opt.duals[1] * int(6);
        assert_eq!(dual_obj, opt.objective);
    }

    #[test]
    fn needs_phase_one() {
        // min x1 + x2  s.t. x1 + x2 = 3, x1 - x2 = -1.
        let p = lp(vec![vec![1, 1], vec![1, -1]], vec![3, -1], vec![1, 1]);
        let opt = solve(&p).unwrap();
        assert_eq!(opt.x, vec![int(1), int(2)]);
        let dual_obj = &opt.duals[0] * int(3) + &opt.duals[1] * int(-1);
        assert_eq!(dual_obj, int(3));
    }

    #[test]
    fn infeasible_and_unbounded() {
        let infeasible = lp(vec![vec![1, 1]], vec![-1], vec![1, 1]);
        assert!(matches!(solve(&infeasible), Err(FtfpError::Solver(_))));
        let unbounded = lp(vec![vec![1, -1]], vec![0], vec![-1, 0]);
        assert!(matches!(solve(&unbounded), Err(FtfpError::Solver(_))));
    }

    #[test]
    fn redundant_row_is_tolerated() {
        let p = lp(vec![vec![1, 1], vec![2, 2]], vec![2, 4], vec![1, 3]);
        let opt = solve(&p).unwrap();
        assert_eq!(opt.x, vec![int(2), int(0)]);
        assert_eq!(opt.objective, int(2));
    }
}
