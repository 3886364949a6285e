//! Dense-tableau two-phase simplex over exact rationals; Bland's rule guards
//! against cycling on degenerate stretches.
//!
//! Solves `min c·x` subject to the given rows and `x ≥ 0`.

use crate::rational::Rational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }

    pub fn holds(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            Sense::Le => lhs <= rhs,
            Sense::Ge => lhs >= rhs,
            Sense::Eq => lhs == rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub coeffs: Vec<Rational>,
    pub sense: Sense,
    pub rhs: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Optimal {
        x: Vec<Rational>,
        objective: Rational,
        /// Structural variables basic at the optimum.
        basis: Vec<usize>,
    },
    /// Row multipliers `y` with `y·A ≤ 0` columnwise, `y·b > 0`, `y_r ≤ 0` on
    /// `≤` rows and `y_r ≥ 0` on `≥` rows.
    Infeasible { certificate: Vec<Rational> },
    /// `d ≥ 0` with `A·d` respecting each row's sense at rhs 0 and `c·d < 0`.
    Unbounded { ray: Vec<Rational> },
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter()
        .zip(b)
        .filter(|(x, y)| !x.is_zero() && !y.is_zero())
        .map(|(x, y)| x * y)
        .sum()
}

/// True when `y` proves the rows have no non-negative solution.
pub fn verify_infeasibility(rows: &[Row], nvars: usize, y: &[Rational]) -> bool {
    if y.len() != rows.len() {
        return false;
    }
    let signs_ok = rows.iter().zip(y).all(|(r, yr)| match r.sense {
        Sense::Le => !yr.is_positive(),
        Sense::Ge => !yr.is_negative(),
        Sense::Eq => true,
    });
    let columns_ok = (0..nvars).all(|j| {
        let s: Rational = rows
            .iter()
            .zip(y)
            .filter(|(_, yr)| !yr.is_zero())
            .map(|(r, yr)| yr * &r.coeffs[j])
            .sum();
        !s.is_positive()
    });
    let b: Vec<Rational> = rows.iter().map(|r| r.rhs.clone()).collect();
    signs_ok && columns_ok && dot(y, &b).is_positive()
}

/// True when `d` is an improving ray of the feasible region's recession cone.
pub fn verify_unbounded_ray(objective: &[Rational], rows: &[Row], d: &[Rational]) -> bool {
    d.len() == objective.len()
        && d.iter().all(|v| !v.is_negative())
        && rows
            .iter()
            .all(|r| r.sense.holds(&dot(&r.coeffs, d), &Rational::zero()))
        && dot(objective, d).is_negative()
}

const BLAND_AFTER: usize = 8;

struct Tableau {
    rows: Vec<Vec<Rational>>,
    /// Reduced costs; the last entry is minus the current objective.
    z: Vec<Rational>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> &Rational {
        &self.rows[r][self.width]
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let piv = self.rows[r][e].clone();
        let nz: Vec<usize> = (0..=self.width)
            .filter(|&j| !self.rows[r][j].is_zero())
            .collect();
        for &j in &nz {
            self.rows[r][j] /= &piv;
        }
        let pivot_row = std::mem::take(&mut self.rows[r]);
        let eliminate = |target: &mut Vec<Rational>| {
            if target[e].is_zero() {
                return;
            }
            let f = target[e].clone();
            for &j in &nz {
                target[j] -= &f * &pivot_row[j];
            }
        };
        for (s, row) in self.rows.iter_mut().enumerate() {
            if s != r {
                eliminate(row);
            }
        }
        eliminate(&mut self.z);
        self.rows[r] = pivot_row;
        self.basis[r] = e;
    }

    fn price(&mut self, cost: &[Rational]) {
        let mut z: Vec<Rational> = cost.to_vec();
        z.push(Rational::zero());
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = &cost[b];
            if cb.is_zero() {
                continue;
            }
            for (zj, t) in z.iter_mut().zip(&self.rows[r]) {
                if !t.is_zero() {
                    *zj -= cb * t;
                }
            }
        }
        self.z = z;
    }

    /// Runs simplex iterations; returns the unbounded column if any.
    ///
    /// Entering columns are chosen by most negative reduced cost, except that
    /// after `BLAND_AFTER` consecutive degenerate pivots Bland's rule takes
    /// over until the objective moves again, which rules out cycling.
    fn optimize(&mut self, allowed: impl Fn(usize) -> bool) -> Option<usize> {
        let mut degenerate_run = 0usize;
        loop {
            let bland = degenerate_run >= BLAND_AFTER;
            let mut entering: Option<usize> = None;
            for j in (0..self.width).filter(|&j| allowed(j) && self.z[j].is_negative()) {
                if bland {
                    entering = Some(j);
                    break;
                }
                if entering.is_none_or(|e| self.z[j] < self.z[e]) {
                    entering = Some(j);
                }
            }
            let e = entering?;
            let mut best: Option<(usize, Rational)> = None;
            for r in 0..self.rows.len() {
                let a = &self.rows[r][e];
                if !a.is_positive() {
                    continue;
                }
                let ratio = self.rhs(r) / a;
                let better = match &best {
                    None => true,
                    Some((br, bv)) => ratio < *bv || (ratio == *bv && self.basis[r] < self.basis[*br]),
                };
                if better {
                    best = Some((r, ratio));
                }
            }
            match best {
                Some((r, step)) => {
                    degenerate_run = if step.is_zero() { degenerate_run + 1 } else { 0 };
                    self.pivot(r, e);
                }
                None => return Some(e),
            }
        }
    }
}

pub fn solve(objective: &[Rational], rows: &[Row]) -> Outcome {
    let nv = objective.len();
    let m = rows.len();
    // Normalize to non-negative right-hand sides.
    let mut flipped = vec![false; m];
    let mut senses = Vec::with_capacity(m);
    for (r, row) in rows.iter().enumerate() {
        let flip = row.rhs.is_negative();
        flipped[r] = flip;
        senses.push(match (row.sense, flip) {
            (Sense::Le, true) => Sense::Ge,
            (Sense::Ge, true) => Sense::Le,
            (s, _) => s,
        });
    }
    let n_slack = senses.iter().filter(|s| **s != Sense::Eq).count();
    let n_art = senses.iter().filter(|s| **s != Sense::Le).count();
    let width = nv + n_slack + n_art;
    let art_start = nv + n_slack;

    let mut table = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut identity = Vec::with_capacity(m);
    let (mut next_slack, mut next_art) = (nv, art_start);
    for (r, row) in rows.iter().enumerate() {
        let mut t = vec![Rational::zero(); width + 1];
        for (j, c) in row.coeffs.iter().enumerate() {
            t[j] = if flipped[r] { -c } else { c.clone() };
        }
        t[width] = row.rhs.abs();
        match senses[r] {
            Sense::Le => {
                t[next_slack] = Rational::from_integer(1.into());
                basis.push(next_slack);
                identity.push(next_slack);
                next_slack += 1;
            }
            Sense::Ge => {
                t[next_slack] = Rational::from_integer((-1).into());
                next_slack += 1;
                t[next_art] = Rational::from_integer(1.into());
                basis.push(next_art);
                identity.push(next_art);
                next_art += 1;
            }
            Sense::Eq => {
                t[next_art] = Rational::from_integer(1.into());
                basis.push(next_art);
                identity.push(next_art);
                next_art += 1;
            }
        }
        table.push(t);
    }
    let mut tab = Tableau {
        rows: table,
        z: Vec::new(),
        basis,
        width,
    };

    let phase1: Vec<Rational> = (0..width)
        .map(|j| Rational::from_integer(u8::from(j >= art_start).into()))
        .collect();
    if n_art > 0 {
        tab.price(&phase1);
        tab.optimize(|_| true);
        if tab.z[width].is_negative() {
            let certificate = (0..m)
                .map(|r| {
                    let c = identity[r];
                    let y = &phase1[c] - &tab.z[c];
                    if flipped[r] {
                        -y
                    } else {
                        y
                    }
                })
                .collect();
            return Outcome::Infeasible { certificate };
        }
        // Drive zero-level artificials out of the basis where possible.
        for r in 0..m {
            if tab.basis[r] >= art_start {
                if let Some(j) = (0..art_start).find(|&j| !tab.rows[r][j].is_zero()) {
                    tab.pivot(r, j);
                }
            }
        }
    }

    let mut phase2: Vec<Rational> = objective.to_vec();
    phase2.resize(width, Rational::zero());
    tab.price(&phase2);
    if let Some(e) = tab.optimize(|j| j < art_start) {
        let mut d = vec![Rational::zero(); width];
        d[e] = Rational::from_integer(1.into());
        for (r, &b) in tab.basis.iter().enumerate() {
            d[b] = -&tab.rows[r][e];
        }
        d.truncate(nv);
        return Outcome::Unbounded { ray: d };
    }
    let mut x = vec![Rational::zero(); nv];
    let mut basic = Vec::new();
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < nv {
            x[b] = tab.rhs(r).clone();
            basic.push(b);
        }
    }
    basic.sort_unstable();
    Outcome::Optimal {
        objective: dot(objective, &x),
        x,
        basis: basic,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn row(coeffs: &[i64], sense: Sense, rhs: Rational) -> Row {
        Row {
            coeffs: coeffs.iter().map(|&c| int(c)).collect(),
            sense,
            rhs,
        }
    }

    #[test]
    fn small_optimum() {
        // min -x - y  s.t. x + 2y <= 4, 3x + y <= 6
        let obj = vec![int(-1), int(-1)];
        let rows = vec![row(&[1, 2], Sense::Le, int(4)), row(&[3, 1], Sense::Le, int(6))];
        match solve(&obj, &rows) {
            Outcome::Optimal { x, objective, .. } => {
                assert_eq!(x, vec![ratio(8, 5), ratio(6, 5)]);
                assert_eq!(objective, ratio(-14, 5));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + 2y  s.t. x + y = 1, x >= 1/3 (as -x <= -1/3), y >= 1/4
        let obj = vec![int(1), int(2)];
        let rows = vec![
            row(&[1, 1], Sense::Eq, int(1)),
            row(&[-1, 0], Sense::Le, ratio(-1, 3)),
            row(&[0, 1], Sense::Ge, ratio(1, 4)),
        ];
        match solve(&obj, &rows) {
            Outcome::Optimal { x, objective, .. } => {
                assert_eq!(x, vec![ratio(3, 4), ratio(1, 4)]);
                assert_eq!(objective, ratio(5, 4));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn contradictory_rows_certificate() {
        let obj = vec![int(0), int(0)];
        let rows = vec![row(&[1, 1], Sense::Le, int(1)), row(&[1, 1], Sense::Ge, int(2))];
        match solve(&obj, &rows) {
            Outcome::Infeasible { certificate } => {
                assert!(verify_infeasibility(&rows, 2, &certificate));
            }
            other => panic!("{other:?}"),
        }
        let rows = vec![row(&[1, -1], Sense::Eq, int(1)), row(&[-1, 1], Sense::Eq, int(1))];
        match solve(&obj, &rows) {
            Outcome::Infeasible { certificate } => assert!(verify_infeasibility(&rows, 2, &certificate)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unbounded_ray() {
        let obj = vec![int(-1), int(0)];
        let rows = vec![row(&[1, -1], Sense::Le, int(1))];
        match solve(&obj, &rows) {
            Outcome::Unbounded { ray } => assert!(verify_unbounded_ray(&obj, &rows, &ray)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn degenerate_redundant_equalities() {
        let obj = vec![int(1), int(1)];
        let rows = vec![
            row(&[1, 1], Sense::Eq, int(1)),
            row(&[2, 2], Sense::Eq, int(2)),
            row(&[1, 0], Sense::Le, int(0)),
        ];
        match solve(&obj, &rows) {
            Outcome::Optimal { x, .. } => assert_eq!(x, vec![int(0), int(1)]),
            other => panic!("{other:?}"),
        }
    }
}
