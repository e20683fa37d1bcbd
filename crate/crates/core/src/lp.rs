//! The small-item allocation LP: fractional shares of the small items that
//! give every agent its required extra value while maximizing total welfare.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::simplex::{maximize, Constraint, Outcome, Sense};

/// One LP instance. Column `j` is the `j`-th small item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmallLpSpec {
    /// `values[i][j]`: agent `i`'s value for small item `j`.
    pub values: Vec<Vec<Rational>>,
    /// Items every agent values negatively must be fully assigned; others at most once.
    pub is_chore: Vec<bool>,
    /// Value each agent still needs from the small items.
    pub c: Vec<Rational>,
}

impl SmallLpSpec {
    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn k(&self) -> usize {
        self.is_chore.len()
    }

    fn check(&self) -> Result<()> {
        if self.values.len() != self.n() || self.values.iter().any(|r| r.len() != self.k()) {
            return Err(Error::Dimension(format!(
                "LP values must be {} x {}",
                self.n(),
                self.k()
            )));
        }
        Ok(())
    }
}

/// Share matrix `x[i][j]` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FractionalAllocation {
    pub x: Vec<Vec<Rational>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal(FractionalAllocation),
    Infeasible,
}

pub fn solve_small_lp(spec: &SmallLpSpec) -> Result<LpOutcome> {
    spec.check()?;
    let (n, k) = (spec.n(), spec.k());
    let var = |i: usize, j: usize| i * k + j;
    let mut objective = vec![Rational::zero(); n * k];
    for i in 0..n {
        for j in 0..k {
            objective[var(i, j)] = spec.values[i][j].clone();
        }
    }
    let mut constraints = Vec::with_capacity(n + k);
    for i in 0..n {
        let mut coeffs = vec![Rational::zero(); n * k];
        coeffs[i * k..(i + 1) * k].clone_from_slice(&spec.values[i]);
        constraints.push(Constraint {
            coeffs,
            sense: Sense::Ge,
            rhs: spec.c[i].clone(),
        });
    }
    for j in 0..k {
        let mut coeffs = vec![Rational::zero(); n * k];
        for i in 0..n {
            coeffs[var(i, j)] = Rational::one();
        }
        constraints.push(Constraint {
            coeffs,
            sense: if spec.is_chore[j] {
                Sense::Ge
            } else {
                Sense::Le
            },
            rhs: Rational::one(),
        });
    }
    match maximize(&objective, &constraints) {
        Outcome::Optimal { x, .. } => Ok(LpOutcome::Optimal(FractionalAllocation {
            x: (0..n).map(|i| x[i * k..(i + 1) * k].to_vec()).collect(),
        })),
        Outcome::Infeasible => Ok(LpOutcome::Infeasible),
        Outcome::Unbounded => Err(Error::Invariant(
            "small-item LP is unbounded; some chore has a non-negative value".into(),
        )),
    }
}

/// Total signed value of the shares, summed over agents.
pub fn lp_objective(spec: &SmallLpSpec, x: &FractionalAllocation) -> Result<Rational> {
    spec.check()?;
    if x.x.len() != spec.n() || x.x.iter().any(|r| r.len() != spec.k()) {
        return Err(Error::Dimension(format!(
            "share matrix must be {} x {}",
            spec.n(),
            spec.k()
        )));
    }
    Ok(spec
        .values
        .iter()
        .zip(&x.x)
        .flat_map(|(vr, xr)| vr.iter().zip(xr).map(|(v, s)| v * s))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};
    use proptest::prelude::*;

    fn optimal(spec: &SmallLpSpec) -> FractionalAllocation {
        match solve_small_lp(spec).unwrap() {
            LpOutcome::Optimal(x) => x,
            LpOutcome::Infeasible => panic!("infeasible"),
        }
    }

    #[test]
    fn single_good() {
        let spec = SmallLpSpec {
            values: vec![vec![frac(1, 2)]],
            is_chore: vec![false],
            c: vec![frac(1, 4)],
        };
        let x = optimal(&spec);
        assert_eq!(x.x, vec![vec![int(1)]]);
        assert_eq!(lp_objective(&spec, &x).unwrap(), frac(1, 2));
    }

    #[test]
    fn chore_goes_to_the_agent_with_slack() {
        let spec = SmallLpSpec {
            values: vec![vec![int(-1)], vec![int(-1)]],
            is_chore: vec![true],
            c: vec![int(0), int(-1)],
        };
        let x = optimal(&spec);
        assert_eq!(x.x, vec![vec![int(0)], vec![int(1)]]);
        assert_eq!(lp_objective(&spec, &x).unwrap(), int(-1));
    }

    #[test]
    fn unreachable_requirement_is_infeasible() {
        let spec = SmallLpSpec {
            values: vec![vec![int(1)]],
            is_chore: vec![false],
            c: vec![int(10)],
        };
        assert_eq!(solve_small_lp(&spec).unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn no_small_items() {
        let feasible = SmallLpSpec {
            values: vec![vec![], vec![]],
            is_chore: vec![],
            c: vec![int(0), int(-1)],
        };
        assert_eq!(
            solve_small_lp(&feasible).unwrap(),
            LpOutcome::Optimal(FractionalAllocation {
                x: vec![vec![], vec![]]
            })
        );
        let infeasible = SmallLpSpec {
            c: vec![int(0), frac(1, 3)],
            ..feasible
        };
        assert_eq!(solve_small_lp(&infeasible).unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn objective_examples() {
        let spec = SmallLpSpec {
            values: vec![vec![frac(3, 4), int(2)]],
            is_chore: vec![false, false],
            c: vec![int(0)],
        };
        let zero = FractionalAllocation {
            x: vec![vec![int(0), int(0)]],
        };
        assert_eq!(lp_objective(&spec, &zero).unwrap(), int(0));
        let one = FractionalAllocation {
            x: vec![vec![int(1), int(0)]],
        };
        assert_eq!(lp_objective(&spec, &one).unwrap(), frac(3, 4));
        let bad = FractionalAllocation { x: vec![vec![]] };
        assert!(lp_objective(&spec, &bad).is_err());
    }

    fn spec_strategy() -> impl Strategy<Value = SmallLpSpec> {
        (1usize..4, 0usize..5).prop_flat_map(|(n, k)| {
            (
                prop::collection::vec(prop::collection::vec(-6i64..=6, k), n),
                prop::collection::vec(any::<bool>(), k),
                prop::collection::vec(-4i64..=4, n),
            )
                .prop_map(move |(vals, chore, c)| {
                    let mut values: Vec<Vec<Rational>> = vals
                        .iter()
                        .map(|r| r.iter().map(|&v| int(v)).collect())
                        .collect();
                    for (j, &is_chore) in chore.iter().enumerate() {
                        for row in values.iter_mut() {
                            let v = row[j].clone();
                            row[j] = if is_chore {
                                -(num_traits::Signed::abs(&v) + int(1))
                            } else {
                                num_traits::Signed::abs(&v)
                            };
                        }
                    }
                    SmallLpSpec {
                        values,
                        is_chore: chore,
                        c: c.into_iter().map(|v| frac(v, 2)).collect(),
                    }
                })
        })
    }

    proptest! {
        #[test]
        fn solutions_satisfy_every_constraint(spec in spec_strategy()) {
            if let LpOutcome::Optimal(x) = solve_small_lp(&spec).unwrap() {
                for i in 0..spec.n() {
                    let got: Rational = (0..spec.k()).map(|j| &spec.values[i][j] * &x.x[i][j]).sum();
                    prop_assert!(got >= spec.c[i]);
                }
                for j in 0..spec.k() {
                    let total: Rational = x.x.iter().map(|r| r[j].clone()).sum();
                    if spec.is_chore[j] {
                        prop_assert!(total >= int(1));
                    } else {
                        prop_assert!(total <= int(1));
                    }
                    prop_assert!(x.x.iter().all(|r| r[j] >= int(0)));
                }
                prop_assert_eq!(solve_small_lp(&spec).unwrap(), LpOutcome::Optimal(x));
            }
        }

        #[test]
        fn integral_witness_implies_feasible(
            spec in spec_strategy(),
            owners in prop::collection::vec(0usize..3, 4),
        ) {
            let n = spec.n();
            let owner: Vec<usize> = (0..spec.k()).map(|j| owners[j] % n).collect();
            let mut witness = spec.clone();
            for i in 0..n {
                witness.c[i] = (0..spec.k())
                    .filter(|&j| owner[j] == i)
                    .map(|j| spec.values[i][j].clone())
                    .sum();
            }
            prop_assert!(matches!(solve_small_lp(&witness).unwrap(), LpOutcome::Optimal(_)));
        }
    }
}
