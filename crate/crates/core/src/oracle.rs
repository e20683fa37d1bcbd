//! Brute-force reference answers: exact MMS values, the best achievable alpha,
//! and gamma-Pareto dominance.
//!
//! Every search scales each agent's row to integers first and runs on `i128`
//! when the magnitudes allow it, falling back to `BigInt` otherwise.

use std::ops::{AddAssign, Mul, SubAssign};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{check_budget, Error, Result};
use crate::model::{Allocation, Instance};
use crate::rational::Rational;

trait Scalar:
    Clone + Ord + Zero + One + for<'a> AddAssign<&'a Self> + for<'a> SubAssign<&'a Self>
where
    for<'a> &'a Self: Mul<&'a Self, Output = Self>,
{
}

impl Scalar for i128 {}
impl Scalar for BigInt {}

/// Multiplies `row` and `extra` by the lcm of all their denominators.
fn integer_scale(row: &[Rational], extra: &[Rational]) -> (Vec<BigInt>, Vec<BigInt>) {
    let lcm = row
        .iter()
        .chain(extra)
        .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
    let scale = |v: &Rational| v.numer() * (&lcm / v.denom());
    (
        row.iter().map(scale).collect(),
        extra.iter().map(scale).collect(),
    )
}

/// Converts to `i128` when every partial sum and pairwise product stays far from overflow.
fn narrow(rows: &[Vec<BigInt>]) -> Option<Vec<Vec<i128>>> {
    let limit = BigInt::one() << 60;
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let total: BigInt = row.iter().map(|v| v.abs()).sum();
        if total >= limit {
            return None;
        }
        out.push(row.iter().map(|v| v.to_i128().expect("bounded")).collect());
    }
    Some(out)
}

// ---------------------------------------------------------------------------
// MMS

/// Exact MMS of one valuation row split into `n` bundles.
///
/// The witness is the lexicographically smallest optimal assignment vector.
pub fn exact_mms(values: &[Rational], n: usize, budget: u64) -> Result<(Rational, Allocation)> {
    if n == 0 {
        return Err(Error::Param("bundle count must be at least 1".into()));
    }
    check_budget(n, values.len(), budget)?;
    let (row, _) = integer_scale(values, &[]);
    let lcm = values
        .iter()
        .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
    let (best, owner) = match narrow(std::slice::from_ref(&row)) {
        Some(small) => {
            let (best, owner) = mms_search(&small[0], n);
            (BigInt::from(best), owner)
        }
        None => mms_search(&row, n),
    };
    Ok((Rational::new(best, lcm), Allocation::from_owners(&owner, n)))
}

/// Enumerates restricted-growth strings: bundle labels appear in first-use order.
fn mms_search<T: Scalar>(row: &[T], n: usize) -> (T, Vec<usize>)
where
    for<'a> &'a T: Mul<&'a T, Output = T>,
{
    struct Search<'r, T> {
        row: &'r [T],
        n: usize,
        sums: Vec<T>,
        owner: Vec<usize>,
        best: Option<(T, Vec<usize>)>,
    }
    impl<T: Scalar> Search<'_, T>
    where
        for<'a> &'a T: Mul<&'a T, Output = T>,
    {
        fn go(&mut self, j: usize, used: usize) {
            if j == self.row.len() {
                let min = if used < self.n {
                    self.sums[..used]
                        .iter()
                        .fold(T::zero(), |acc, s| if *s < acc { s.clone() } else { acc })
                } else {
                    self.sums.iter().min().expect("n >= 1").clone()
                };
                if self.best.as_ref().map_or(true, |(b, _)| min > *b) {
                    self.best = Some((min, self.owner.clone()));
                }
                return;
            }
            for b in 0..(used + 1).min(self.n) {
                self.sums[b] += &self.row[j];
                self.owner[j] = b;
                self.go(j + 1, used.max(b + 1));
                self.sums[b] -= &self.row[j];
            }
        }
    }
    let mut s = Search {
        row,
        n,
        sums: vec![T::zero(); n],
        owner: vec![0; row.len()],
        best: None,
    };
    s.go(0, 0);
    s.best.expect("at least one partition")
}

// ---------------------------------------------------------------------------
// Best achievable alpha

/// Nonnegative fraction `num / den` with `den > 0`.
#[derive(Clone)]
struct Ratio<T> {
    num: T,
    den: T,
}

impl<T: Scalar> Ratio<T>
where
    for<'a> &'a T: Mul<&'a T, Output = T>,
{
    fn less(&self, other: &Self) -> bool {
        &self.num * &other.den < &other.num * &self.den
    }
}

/// Largest alpha an agent with share `mms` is satisfied at with bundle value `v`, capped at 1.
fn contribution<T: Scalar>(v: &T, mms: &T) -> Ratio<T>
where
    for<'a> &'a T: Mul<&'a T, Output = T>,
{
    let zero = T::zero();
    let one = || Ratio {
        num: T::one(),
        den: T::one(),
    };
    if *mms > zero {
        if v >= mms {
            one()
        } else if *v >= zero {
            Ratio {
                num: v.clone(),
                den: mms.clone(),
            }
        } else {
            Ratio {
                num: T::zero(),
                den: T::one(),
            }
        }
    } else if *v >= zero || (*mms < zero && v >= mms) {
        one()
    } else if mms.is_zero() {
        Ratio {
            num: T::zero(),
            den: T::one(),
        }
    } else {
        let mut num = T::zero();
        num -= mms;
        let mut den = T::zero();
        den -= v;
        Ratio { num, den }
    }
}

/// Largest `alpha <= 1` such that some allocation is alpha-MMS for the given shares.
pub fn exact_alpha_star(inst: &Instance, mms: &[Rational], budget: u64) -> Result<Rational> {
    if mms.len() != inst.n() {
        return Err(Error::Dimension(format!(
            "{} agents but {} MMS values",
            inst.n(),
            mms.len()
        )));
    }
    check_budget(inst.n(), inst.m(), budget)?;
    let mut rows = Vec::with_capacity(inst.n());
    let mut shares = Vec::with_capacity(inst.n());
    for (i, mu) in mms.iter().enumerate() {
        let (row, extra) = integer_scale(inst.row(i), std::slice::from_ref(mu));
        let mut row = row;
        row.push(extra[0].clone());
        rows.push(row);
    }
    for row in &mut rows {
        shares.push(row.pop().expect("share appended"));
    }
    let mut with_shares = rows.clone();
    for (row, s) in with_shares.iter_mut().zip(&shares) {
        row.push(s.clone());
    }
    let (num, den) = match narrow(&with_shares) {
        Some(small) => {
            let rows: Vec<Vec<i128>> = small.iter().map(|r| r[..r.len() - 1].to_vec()).collect();
            let shares: Vec<i128> = small.iter().map(|r| r[r.len() - 1]).collect();
            let best = alpha_search(&rows, &shares);
            (BigInt::from(best.num), BigInt::from(best.den))
        }
        None => {
            let best = alpha_search(&rows, &shares);
            (best.num, best.den)
        }
    };
    Ok(Rational::new(num, den))
}

fn alpha_search<T: Scalar>(rows: &[Vec<T>], shares: &[T]) -> Ratio<T>
where
    for<'a> &'a T: Mul<&'a T, Output = T>,
{
    let n = rows.len();
    let m = rows[0].len();
    // positive_suffix[i][j]: the most agent i can still gain from items j..
    let positive_suffix: Vec<Vec<T>> = rows
        .iter()
        .map(|row| {
            let mut acc = vec![T::zero(); m + 1];
            for j in (0..m).rev() {
                acc[j] = acc[j + 1].clone();
                if row[j] > T::zero() {
                    acc[j] += &row[j];
                }
            }
            acc
        })
        .collect();

    struct Search<'a, T> {
        rows: &'a [Vec<T>],
        shares: &'a [T],
        suffix: &'a [Vec<T>],
        sums: Vec<T>,
        best: Ratio<T>,
        done: bool,
    }
    impl<T: Scalar> Search<'_, T>
    where
        for<'a> &'a T: Mul<&'a T, Output = T>,
    {
        fn bound(&self, j: usize) -> Ratio<T> {
            let mut worst: Option<Ratio<T>> = None;
            for (i, sum) in self.sums.iter().enumerate() {
                let mut top = sum.clone();
                top += &self.suffix[i][j];
                let c = contribution(&top, &self.shares[i]);
                if worst.as_ref().map_or(true, |w| c.less(w)) {
                    worst = Some(c);
                }
            }
            worst.expect("n >= 1")
        }

        fn go(&mut self, j: usize) {
            if self.done || !self.best.less(&self.bound(j)) {
                return;
            }
            if j == self.rows[0].len() {
                self.best = self.bound(j);
                self.done = self.best.num == self.best.den;
                return;
            }
            for i in 0..self.rows.len() {
                self.sums[i] += &self.rows[i][j];
                self.go(j + 1);
                self.sums[i] -= &self.rows[i][j];
            }
        }
    }

    let mut s = Search {
        rows,
        shares,
        suffix: &positive_suffix,
        sums: vec![T::zero(); n],
        best: Ratio {
            num: T::zero(),
            den: T::one(),
        },
        done: false,
    };
    s.go(0);
    s.best
}

// ---------------------------------------------------------------------------
// Pareto dominance

/// Per-agent bar `B` must clear: `(1+gamma) v_i(A_i)` or `v_i(A_i) / (1+gamma)`.
fn dominance_thresholds(inst: &Instance, a: &Allocation, gamma: &Rational) -> Vec<Rational> {
    let factor = Rational::one() + gamma;
    inst.own_values(a)
        .into_iter()
        .map(|v| {
            if v.is_negative() {
                v / &factor
            } else {
                v * &factor
            }
        })
        .collect()
}

pub fn gamma_dominates(inst: &Instance, b: &Allocation, a: &Allocation, gamma: &Rational) -> bool {
    let bars = dominance_thresholds(inst, a, gamma);
    let values = inst.own_values(b);
    values.iter().zip(&bars).all(|(v, t)| v >= t) && values.iter().zip(&bars).any(|(v, t)| v > t)
}

/// First allocation in assignment-vector order that gamma-dominates `a`.
pub fn find_gamma_dominator(
    inst: &Instance,
    a: &Allocation,
    gamma: &Rational,
    budget: u64,
) -> Result<Option<Allocation>> {
    if a.n() != inst.n() {
        return Err(Error::Dimension(format!(
            "{} agents but {} bundles",
            inst.n(),
            a.n()
        )));
    }
    check_budget(inst.n(), inst.m(), budget)?;
    let bars = dominance_thresholds(inst, a, gamma);
    let mut rows = Vec::with_capacity(inst.n());
    for (i, bar) in bars.iter().enumerate() {
        let (mut row, extra) = integer_scale(inst.row(i), std::slice::from_ref(bar));
        row.push(extra[0].clone());
        rows.push(row);
    }
    let owner = match narrow(&rows) {
        Some(small) => dominator_search(&small),
        None => dominator_search(&rows),
    };
    Ok(owner.map(|o| Allocation::from_owners(&o, inst.n())))
}

pub fn is_gamma_po(inst: &Instance, a: &Allocation, gamma: &Rational, budget: u64) -> Result<bool> {
    Ok(find_gamma_dominator(inst, a, gamma, budget)?.is_none())
}

/// Each row carries its bar as a trailing entry.
fn dominator_search<T: Scalar>(rows_with_bars: &[Vec<T>]) -> Option<Vec<usize>>
where
    for<'a> &'a T: Mul<&'a T, Output = T>,
{
    let n = rows_with_bars.len();
    let m = rows_with_bars[0].len() - 1;
    let rows: Vec<&[T]> = rows_with_bars.iter().map(|r| &r[..m]).collect();
    let bars: Vec<&T> = rows_with_bars.iter().map(|r| &r[m]).collect();
    let suffix: Vec<Vec<T>> = rows
        .iter()
        .map(|row| {
            let mut acc = vec![T::zero(); m + 1];
            for j in (0..m).rev() {
                acc[j] = acc[j + 1].clone();
                if row[j] > T::zero() {
                    acc[j] += &row[j];
                }
            }
            acc
        })
        .collect();

    struct Search<'a, T> {
        rows: &'a [&'a [T]],
        bars: &'a [&'a T],
        suffix: &'a [Vec<T>],
        sums: Vec<T>,
        owner: Vec<usize>,
    }
    impl<T: Scalar> Search<'_, T>
    where
        for<'a> &'a T: Mul<&'a T, Output = T>,
    {
        fn go(&mut self, j: usize) -> bool {
            let n = self.sums.len();
            for i in 0..n {
                let mut top = self.sums[i].clone();
                top += &self.suffix[i][j];
                if top < *self.bars[i] {
                    return false;
                }
            }
            if j == self.owner.len() {
                return (0..n).any(|i| self.sums[i] > *self.bars[i]);
            }
            for i in 0..n {
                self.sums[i] += &self.rows[i][j];
                self.owner[j] = i;
                if self.go(j + 1) {
                    return true;
                }
                self.sums[i] -= &self.rows[i][j];
            }
            false
        }
    }

    let mut s = Search {
        rows: &rows,
        bars: &bars,
        suffix: &suffix,
        sums: vec![T::zero(); n],
        owner: vec![0; m],
    };
    s.go(0).then_some(s.owner)
}
