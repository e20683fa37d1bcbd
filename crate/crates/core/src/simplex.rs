//! Dense two-phase primal simplex over exact rationals with Bland's rule.

use num_traits::{One, Signed, Zero};

use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<Rational>,
    pub sense: Sense,
    pub rhs: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Optimal { x: Vec<Rational>, value: Rational },
    Infeasible,
    Unbounded,
}

struct Tableau {
    /// Constraint rows, each `width + 1` long with the rhs last.
    rows: Vec<Vec<Rational>>,
    /// Reduced-cost row in the same layout; its last entry is minus the objective value.
    cost: Vec<Rational>,
    basis: Vec<usize>,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cost.len() - 1
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col].clone();
        for v in &mut self.rows[r] {
            *v /= &p;
        }
        let pivot_row = self.rows[r].clone();
        let eliminate = |row: &mut Vec<Rational>| {
            let f = row[col].clone();
            if !f.is_zero() {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    if !pv.is_zero() {
                        *v -= &f * pv;
                    }
                }
            }
        };
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                eliminate(row);
            }
        }
        eliminate(&mut self.cost);
        self.basis[r] = col;
    }

    /// Maximizes over the columns in `allowed`; `false` means unbounded.
    fn optimize(&mut self, allowed: impl Fn(usize) -> bool) -> bool {
        let w = self.width();
        loop {
            // Bland: lowest-index improving column.
            let Some(col) = (0..w).find(|&j| allowed(j) && self.cost[j].is_positive()) else {
                return true;
            };
            let mut leave: Option<(usize, Rational)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                if row[col].is_positive() {
                    let ratio = &row[w] / &row[col];
                    let better = match &leave {
                        None => true,
                        Some((lr, best)) => {
                            ratio < *best || (ratio == *best && self.basis[r] < self.basis[*lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, col),
                None => return false,
            }
        }
    }

    fn set_objective(&mut self, objective: &[Rational]) {
        let w = self.width();
        let mut cost = vec![Rational::zero(); w + 1];
        cost[..objective.len()].clone_from_slice(objective);
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = cost[b].clone();
            if !cb.is_zero() {
                for (c, v) in cost.iter_mut().zip(&self.rows[r]) {
                    *c -= &cb * v;
                }
            }
        }
        self.cost = cost;
    }
}

/// Maximizes `objective · x` subject to `constraints` and `x >= 0`.
pub fn maximize(objective: &[Rational], constraints: &[Constraint]) -> Outcome {
    let nv = objective.len();
    let rows = constraints.len();
    // Normalize to nonnegative right-hand sides.
    let normalized: Vec<(Vec<Rational>, Sense, Rational)> = constraints
        .iter()
        .map(|c| {
            if c.rhs.is_negative() {
                let sense = match c.sense {
                    Sense::Le => Sense::Ge,
                    Sense::Ge => Sense::Le,
                    Sense::Eq => Sense::Eq,
                };
                (c.coeffs.iter().map(|v| -v).collect(), sense, -c.rhs.clone())
            } else {
                (c.coeffs.clone(), c.sense, c.rhs.clone())
            }
        })
        .collect();
    let slack_count = normalized.iter().filter(|c| c.1 != Sense::Eq).count();
    let artificial_count = normalized.iter().filter(|c| c.1 != Sense::Le).count();
    let first_artificial = nv + slack_count;
    let w = first_artificial + artificial_count;

    let mut table = Vec::with_capacity(rows);
    let mut basis = Vec::with_capacity(rows);
    let (mut slack, mut art) = (nv, first_artificial);
    for (coeffs, sense, rhs) in &normalized {
        let mut row = vec![Rational::zero(); w + 1];
        row[..nv].clone_from_slice(coeffs);
        row[w] = rhs.clone();
        match sense {
            Sense::Le => {
                row[slack] = Rational::one();
                basis.push(slack);
                slack += 1;
            }
            Sense::Ge => {
                row[slack] = -Rational::one();
                slack += 1;
                row[art] = Rational::one();
                basis.push(art);
                art += 1;
            }
            Sense::Eq => {
                row[art] = Rational::one();
                basis.push(art);
                art += 1;
            }
        }
        table.push(row);
    }
    let mut t = Tableau {
        rows: table,
        cost: vec![Rational::zero(); w + 1],
        basis,
    };

    if artificial_count > 0 {
        let mut phase_one = vec![Rational::zero(); w];
        for c in &mut phase_one[first_artificial..] {
            *c = -Rational::one();
        }
        t.set_objective(&phase_one);
        t.optimize(|_| true);
        if !t.cost[w].is_zero() {
            return Outcome::Infeasible;
        }
        // Drive artificials out of the basis or drop their redundant rows.
        let mut r = 0;
        while r < t.rows.len() {
            if t.basis[r] >= first_artificial {
                match (0..first_artificial).find(|&j| !t.rows[r][j].is_zero()) {
                    Some(col) => {
                        t.pivot(r, col);
                        r += 1;
                    }
                    None => {
                        t.rows.remove(r);
                        t.basis.remove(r);
                    }
                }
            } else {
                r += 1;
            }
        }
    }

    t.set_objective(objective);
    if !t.optimize(|j| j < first_artificial) {
        return Outcome::Unbounded;
    }
    let mut x = vec![Rational::zero(); nv];
    for (r, &b) in t.basis.iter().enumerate() {
        if b < nv {
            x[b] = t.rows[r][w].clone();
        }
    }
    let value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Outcome::Optimal { x, value }
}
