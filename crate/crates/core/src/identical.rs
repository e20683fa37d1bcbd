//! Approximate MMS values for a single valuation split into `n` bundles.
//!
//! Nonnegative totals go through big-item enumeration, a chore drain, and
//! either bag filling or a goods-only reduction. Negative totals use a
//! simpler greedy completion of every big-item partition.

use std::ops::ControlFlow;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::enumerate::{bundles_of, for_each_set_partition};
use crate::error::{check_budget, Error, Result};
use crate::model::Allocation;
use crate::rational::Rational;

fn check_epsilon(epsilon: &Rational) -> Result<()> {
    if !epsilon.is_positive() || *epsilon >= Rational::one() {
        return Err(Error::Param(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    Ok(())
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Param("bundle count must be at least 1".into()));
    }
    Ok(())
}

fn sum_of(values: &[Rational], items: &[usize]) -> Rational {
    fast_sum(values, items).unwrap_or_else(|| items.iter().map(|&j| &values[j]).sum())
}

/// Machine-integer sum for items sharing one denominator; this is the hot path
/// of every partition search.
fn fast_sum(values: &[Rational], items: &[usize]) -> Option<Rational> {
    let Some(&first) = items.first() else {
        return Some(Rational::zero());
    };
    let den = values[first].denom();
    let mut acc: i128 = 0;
    for &j in items {
        if values[j].denom() != den {
            return None;
        }
        acc = acc.checked_add(values[j].numer().to_i128()?)?;
    }
    if den.is_one() {
        return Some(Rational::from_integer(BigInt::from(acc)));
    }
    Some(Rational::new(BigInt::from(acc), den.clone()))
}

fn min_bundle(values: &[Rational], bundles: &[Vec<usize>]) -> Rational {
    bundles
        .iter()
        .map(|b| sum_of(values, b))
        .min()
        .unwrap_or_else(Rational::zero)
}

/// Rescales so the absolute total is `n`.
fn normalized(values: &[Rational], n: usize) -> Vec<Rational> {
    let total: Rational = values.iter().sum();
    let c = Rational::from_integer(n.into()) / total.abs();
    values.iter().map(|v| v * &c).collect()
}

fn everything_in_first(m: usize, n: usize) -> Allocation {
    Allocation::from_owners(&vec![0; m], n)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BigSmallSplit {
    pub big: Vec<usize>,
    pub small_goods: Vec<usize>,
    pub small_chores: Vec<usize>,
    pub threshold: Rational,
}

/// Items with `|v| >= threshold` are big; the rest split by sign.
pub fn split_items(values: &[Rational], threshold: &Rational) -> BigSmallSplit {
    let mut split = BigSmallSplit {
        big: Vec::new(),
        small_goods: Vec::new(),
        small_chores: Vec::new(),
        threshold: threshold.clone(),
    };
    for (j, v) in values.iter().enumerate() {
        if v.abs() >= *threshold {
            split.big.push(j);
        } else if v.is_negative() {
            split.small_chores.push(j);
        } else {
            split.small_goods.push(j);
        }
    }
    split
}

/// Upper bounds on the number of big goods and big chores after normalizing to total `n`,
/// for an instance satisfying the tau-condition.
pub fn big_size_bounds(n: usize, epsilon: &Rational, tau: &Rational) -> (Rational, Rational) {
    let two_n = Rational::from_integer((2 * n).into());
    let goods = &two_n * (Rational::one() + tau) / (epsilon * tau);
    let chores = two_n / (epsilon * tau);
    (goods, chores)
}

/// Bundle classes by value: above 1, within `[1-eps, 1]`, within `[0, 1-eps)`, negative.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BSets {
    pub b1: Vec<usize>,
    pub b2: Vec<usize>,
    pub b3: Vec<usize>,
    pub b4: Vec<usize>,
}

pub fn classify_bsets(bundle_values: &[Rational], epsilon: &Rational) -> BSets {
    let one = Rational::one();
    let floor = &one - epsilon;
    let mut sets = BSets::default();
    for (k, v) in bundle_values.iter().enumerate() {
        if *v > one {
            sets.b1.push(k);
        } else if *v >= floor {
            sets.b2.push(k);
        } else if !v.is_negative() {
            sets.b3.push(k);
        } else {
            sets.b4.push(k);
        }
    }
    sets
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionSet {
    /// Total at least `n`, bags at most 1, small items below `eps`.
    One,
    /// Total at least `n(1-eps/2)`, bags at most `1-eps/2`, small items below `eps/2`.
    Two,
}

/// Greedy bag filling: bags `0..n-1` take the cheapest remaining small item
/// until they reach `1-eps`; the last bag takes whatever is left.
pub fn bag_fill(
    values: &[Rational],
    bags: &[Vec<usize>],
    smalls: &[usize],
    epsilon: &Rational,
    condition: ConditionSet,
) -> Result<Vec<Vec<usize>>> {
    check_epsilon(epsilon)?;
    let n = bags.len();
    check_n(n)?;
    if let Some(&j) = bags
        .iter()
        .flatten()
        .chain(smalls)
        .find(|&&j| j >= values.len())
    {
        return Err(Error::Dimension(format!(
            "item {j} out of range for {} values",
            values.len()
        )));
    }
    let one = Rational::one();
    let half = epsilon / Rational::from_integer(2.into());
    let nr = Rational::from_integer(n.into());
    let (label, need, bag_cap, item_cap) = match condition {
        ConditionSet::One => ("condition set 1", nr, one.clone(), epsilon.clone()),
        ConditionSet::Two => (
            "condition set 2",
            nr * (&one - &half),
            &one - &half,
            half.clone(),
        ),
    };
    let mut bag_values: Vec<Rational> = bags.iter().map(|b| sum_of(values, b)).collect();
    let total: Rational = bag_values.iter().sum::<Rational>() + sum_of(values, smalls);
    if total < need {
        return Err(Error::Precondition(format!(
            "{label}: total value {total} is below {need}"
        )));
    }
    if let Some(k) = bag_values.iter().position(|v| *v > bag_cap) {
        return Err(Error::Precondition(format!(
            "{label}: bag {k} has value {} above {bag_cap}",
            bag_values[k]
        )));
    }
    if let Some(&j) = smalls.iter().find(|&&j| values[j].abs() >= item_cap) {
        return Err(Error::Precondition(format!(
            "{label}: small item {j} has absolute value {}, not below {item_cap}",
            values[j].abs()
        )));
    }

    let floor = &one - epsilon;
    let mut queue: Vec<usize> = smalls.to_vec();
    queue.sort_by(|&a, &b| values[a].cmp(&values[b]).then(a.cmp(&b)));
    let mut queue = queue.into_iter();
    let mut out: Vec<Vec<usize>> = bags.to_vec();
    for k in 0..n - 1 {
        while bag_values[k] < floor {
            let j = queue.next().ok_or_else(|| {
                Error::Invariant(format!("bag filling ran out of small items at bag {k}"))
            })?;
            bag_values[k] += &values[j];
            out[k].push(j);
        }
    }
    for j in queue {
        bag_values[n - 1] += &values[j];
        out[n - 1].push(j);
    }
    if let Some(k) = bag_values.iter().position(|v| *v < floor) {
        return Err(Error::Invariant(format!(
            "bag filling left bag {k} at {} below {floor}",
            bag_values[k]
        )));
    }
    for bundle in &mut out {
        bundle.sort_unstable();
    }
    Ok(out)
}

struct Drained {
    bags: Vec<Vec<usize>>,
    values: Vec<Rational>,
    chores_left: Vec<usize>,
    touched: Vec<bool>,
}

/// Moves small chores, lowest index first, into the lowest-index bag worth more than 1.
fn drain(values: &[Rational], bags: Vec<Vec<usize>>, small_chores: &[usize]) -> Drained {
    let one = Rational::one();
    let mut bag_values: Vec<Rational> = bags.iter().map(|b| sum_of(values, b)).collect();
    let mut touched = vec![false; bags.len()];
    let mut bags = bags;
    let mut chores = small_chores.iter().copied().peekable();
    while let Some(k) = bag_values.iter().position(|v| *v > one) {
        let Some(j) = chores.next() else { break };
        bag_values[k] += &values[j];
        bags[k].push(j);
        touched[k] = true;
    }
    Drained {
        bags,
        values: bag_values,
        chores_left: chores.collect(),
        touched,
    }
}

/// False when, after draining, some bag still exceeds 1, some bag is negative,
/// and the low bags plus small goods cannot reach `1-eps/2` on average.
pub fn is_partition_valid(
    values: &[Rational],
    big_partition: &[Vec<usize>],
    split: &BigSmallSplit,
    epsilon: &Rational,
) -> bool {
    let drained = drain(values, big_partition.to_vec(), &split.small_chores);
    let sets = classify_bsets(&drained.values, epsilon);
    if sets.b1.is_empty() || sets.b4.is_empty() {
        return true;
    }
    let low = sets.b3.len() + sets.b4.len();
    let available: Rational = sets
        .b3
        .iter()
        .chain(&sets.b4)
        .map(|&k| drained.values[k].clone())
        .sum::<Rational>()
        + sum_of(values, &split.small_goods);
    let half = epsilon / Rational::from_integer(2.into());
    available >= (Rational::one() - half) * Rational::from_integer(low.into())
}

/// Allocation of nonnegative items whose minimum bundle is at least `(1-eps)` times the MMS.
pub fn goods_only_mms(
    values: &[Rational],
    n: usize,
    epsilon: &Rational,
    budget: u64,
) -> Result<Allocation> {
    check_epsilon(epsilon)?;
    check_n(n)?;
    if let Some(j) = values.iter().position(Signed::is_negative) {
        return Err(Error::Precondition(format!(
            "goods-only instance has negative item {j}"
        )));
    }
    let owner = if check_budget(n, values.len(), budget).is_ok() {
        exact_max_min(values, n)
    } else {
        rounded_max_min(values, n, epsilon, budget)?
    };
    Ok(Allocation::from_owners(&owner, n))
}

/// Longest-processing-time greedy: descending values, each to the lightest bundle.
fn lpt(values: &[Rational], n: usize) -> (Vec<usize>, Rational) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].cmp(&values[a]).then(a.cmp(&b)));
    let mut sums = vec![Rational::zero(); n];
    let mut owner = vec![0; values.len()];
    for j in order {
        let k = lightest(&sums);
        sums[k] += &values[j];
        owner[j] = k;
    }
    let min = sums.into_iter().min().expect("n >= 1");
    (owner, min)
}

fn lightest(sums: &[Rational]) -> usize {
    let mut k = 0;
    for (i, s) in sums.iter().enumerate() {
        if *s < sums[k] {
            k = i;
        }
    }
    k
}

/// Branch and bound for the max-min partition of nonnegative values.
fn exact_max_min(values: &[Rational], n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].cmp(&values[a]).then(a.cmp(&b)));
    let total: Rational = values.iter().sum();
    let ceiling = &total / Rational::from_integer(n.into());
    let (owner, best) = lpt(values, n);

    struct Search<'a> {
        values: &'a [Rational],
        order: &'a [usize],
        ceiling: Rational,
        sums: Vec<Rational>,
        owner: Vec<usize>,
        best: Rational,
        best_owner: Vec<usize>,
    }
    impl Search<'_> {
        fn go(&mut self, pos: usize, remaining: &Rational) {
            if self.best == self.ceiling {
                return;
            }
            if pos == self.order.len() {
                let min = self.sums.iter().min().expect("n >= 1").clone();
                if min > self.best {
                    self.best = min;
                    self.best_owner = self.owner.clone();
                }
                return;
            }
            let deficit: Rational = self
                .sums
                .iter()
                .filter(|s| **s <= self.best)
                .map(|s| &self.best - s)
                .sum();
            if self.sums.iter().any(|s| *s <= self.best) && *remaining <= deficit {
                return;
            }
            let j = self.order[pos];
            let rest = remaining - &self.values[j];
            for k in 0..self.sums.len() {
                if self.sums[..k].contains(&self.sums[k]) {
                    continue;
                }
                self.sums[k] += &self.values[j];
                self.owner[j] = k;
                self.go(pos + 1, &rest);
                self.sums[k] -= &self.values[j];
            }
        }
    }

    let mut s = Search {
        values,
        order: &order,
        ceiling,
        sums: vec![Rational::zero(); n],
        owner: vec![0; values.len()],
        best,
        best_owner: owner,
    };
    s.go(0, &total);
    s.best_owner
}

/// Enumerates only items worth at least `eps` times a lower bound on the MMS and
/// fills the rest greedily into the lightest bundle.
fn rounded_max_min(
    values: &[Rational],
    n: usize,
    epsilon: &Rational,
    budget: u64,
) -> Result<Vec<usize>> {
    let (lpt_owner, lower) = lpt(values, n);
    if lower.is_zero() {
        return Ok(lpt_owner);
    }
    let cut = epsilon * &lower;
    let (big, small): (Vec<usize>, Vec<usize>) = (0..values.len()).partition(|&j| values[j] >= cut);
    check_budget(n, big.len(), budget)?;
    let mut best: Option<(Rational, Vec<usize>)> = None;
    for_each_set_partition(big.len(), n, |digits| {
        let mut sums = vec![Rational::zero(); n];
        let mut owner = vec![0; values.len()];
        for (&d, &j) in digits.iter().zip(&big) {
            sums[d] += &values[j];
            owner[j] = d;
        }
        for &j in &small {
            let k = lightest(&sums);
            sums[k] += &values[j];
            owner[j] = k;
        }
        let min = sums.into_iter().min().expect("n >= 1");
        if best.as_ref().map_or(true, |(b, _)| min > *b) {
            best = Some((min, owner));
        }
        ControlFlow::Continue(())
    });
    Ok(best.expect("at least one assignment").1)
}

/// One candidate per big-item partition; `None` marks an invalid partition.
fn nonneg_candidate(
    w: &[Rational],
    bags: Vec<Vec<usize>>,
    split: &BigSmallSplit,
    epsilon: &Rational,
    budget: u64,
) -> Result<Option<Vec<Vec<usize>>>> {
    let one = Rational::one();
    let half = epsilon / Rational::from_integer(2.into());
    let drained = drain(w, bags, &split.small_chores);
    for (k, v) in drained.values.iter().enumerate() {
        if drained.touched[k] && *v < &one - &half {
            return Err(Error::Invariant(format!(
                "draining small chores left bag {k} at {v}, below 1 - eps/2"
            )));
        }
    }
    let sets = classify_bsets(&drained.values, epsilon);
    if sets.b1.is_empty() {
        let mut smalls = split.small_goods.clone();
        smalls.extend(&drained.chores_left);
        return bag_fill(w, &drained.bags, &smalls, epsilon, ConditionSet::One).map(Some);
    }
    let mut rest: Vec<usize> = sets.b3.iter().chain(&sets.b4).copied().collect();
    rest.sort_unstable();
    let mut out = drained.bags.clone();
    if !sets.b4.is_empty() {
        let low = Rational::from_integer(rest.len().into());
        let available: Rational = rest
            .iter()
            .map(|&k| drained.values[k].clone())
            .sum::<Rational>()
            + sum_of(w, &split.small_goods);
        if available < low * (&one - &half) {
            return Ok(None);
        }
        let bags: Vec<Vec<usize>> = rest.iter().map(|&k| drained.bags[k].clone()).collect();
        let filled = bag_fill(w, &bags, &split.small_goods, epsilon, ConditionSet::Two)?;
        for (k, bundle) in rest.iter().zip(filled) {
            out[*k] = bundle;
        }
        return Ok(Some(out));
    }
    if rest.is_empty() {
        let k = lightest(&drained.values);
        out[k].extend(&split.small_goods);
        out[k].sort_unstable();
        return Ok(Some(out));
    }
    let mut row: Vec<Rational> = rest.iter().map(|&k| drained.values[k].clone()).collect();
    row.extend(split.small_goods.iter().map(|&j| w[j].clone()));
    let reduced = goods_only_mms(&row, rest.len(), epsilon, budget)?;
    for (pos, pseudo) in reduced.bundles().iter().enumerate() {
        let mut bundle = Vec::new();
        for &p in pseudo {
            if p < rest.len() {
                bundle.extend(&drained.bags[rest[p]]);
            } else {
                bundle.push(split.small_goods[p - rest.len()]);
            }
        }
        bundle.sort_unstable();
        out[rest[pos]] = bundle;
    }
    Ok(Some(out))
}

/// Best-of-candidates search shared by both signs; stops once `ceiling` is reached.
fn best_over_partitions<F>(
    w: &[Rational],
    big: &[usize],
    n: usize,
    ceiling: &Rational,
    mut candidate: F,
) -> Result<Option<Vec<Vec<usize>>>>
where
    F: FnMut(Vec<Vec<usize>>) -> Result<Option<Vec<Vec<usize>>>>,
{
    let mut best: Option<(Rational, Vec<Vec<usize>>)> = None;
    let mut failure = None;
    for_each_set_partition(big.len(), n, |digits| {
        match candidate(bundles_of(digits, big, n)) {
            Err(e) => {
                failure = Some(e);
                return ControlFlow::Break(());
            }
            Ok(None) => {}
            Ok(Some(bundles)) => {
                let min = min_bundle(w, &bundles);
                if best.as_ref().map_or(true, |(b, _)| min > *b) {
                    best = Some((min, bundles));
                }
            }
        }
        match &best {
            Some((b, _)) if b >= ceiling => ControlFlow::Break(()),
            _ => ControlFlow::Continue(()),
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(best.map(|(_, b)| b)),
    }
}

/// Allocation whose minimum bundle is at least `(1-eps)` times the MMS, for a nonnegative total.
pub fn approx_mms_nonneg(
    values: &[Rational],
    n: usize,
    epsilon: &Rational,
    budget: u64,
) -> Result<Allocation> {
    check_epsilon(epsilon)?;
    check_n(n)?;
    let total: Rational = values.iter().sum();
    if total.is_negative() {
        return Err(Error::Precondition(format!(
            "total value {total} is negative"
        )));
    }
    if total.is_zero() {
        return Ok(everything_in_first(values.len(), n));
    }
    let w = normalized(values, n);
    let split = split_items(&w, &(epsilon / Rational::from_integer(2.into())));
    check_budget(n, split.big.len(), budget)?;
    let best = best_over_partitions(&w, &split.big, n, &Rational::one(), |bags| {
        nonneg_candidate(&w, bags, &split, epsilon, budget)
    })?;
    let bundles =
        best.ok_or_else(|| Error::Invariant("every big-item partition was invalid".into()))?;
    Allocation::new(bundles, values.len())
}

/// Allocation whose minimum bundle is at least the MMS divided by `(1-eps)`, for a negative total.
pub fn approx_mms_negative(
    values: &[Rational],
    n: usize,
    epsilon: &Rational,
    budget: u64,
) -> Result<Allocation> {
    check_epsilon(epsilon)?;
    check_n(n)?;
    let total: Rational = values.iter().sum();
    if !total.is_negative() {
        return Err(Error::Precondition(format!(
            "total value {total} is not negative"
        )));
    }
    let w = normalized(values, n);
    let one = Rational::one();
    let sigma = &one / (&one - epsilon) - &one;
    let split = split_items(&w, &sigma);
    check_budget(n, split.big.len(), budget)?;
    let best = best_over_partitions(&w, &split.big, n, &-one, |mut bags| {
        let mut sums: Vec<Rational> = bags.iter().map(|b| sum_of(&w, b)).collect();
        for &j in &split.small_goods {
            let k = lightest(&sums);
            sums[k] += &w[j];
            bags[k].push(j);
        }
        for &j in &split.small_chores {
            let mut k = 0;
            for (i, s) in sums.iter().enumerate() {
                if *s > sums[k] {
                    k = i;
                }
            }
            sums[k] += &w[j];
            bags[k].push(j);
        }
        Ok(Some(bags))
    })?;
    Allocation::new(best.expect("some partition is always stored"), values.len())
}

/// Approximate MMS of `values` over `n` bundles and the allocation attaining it.
///
/// The value is the minimum bundle under the given (unscaled) values.
pub fn approx_mms(
    values: &[Rational],
    n: usize,
    epsilon: &Rational,
    budget: u64,
) -> Result<(Rational, Allocation)> {
    check_epsilon(epsilon)?;
    check_n(n)?;
    let total: Rational = values.iter().sum();
    let alloc = if total.is_zero() {
        everything_in_first(values.len(), n)
    } else if total.is_positive() {
        approx_mms_nonneg(values, n, epsilon, budget)?
    } else {
        approx_mms_negative(values, n, epsilon, budget)?
    };
    Ok((min_bundle(values, alloc.bundles()), alloc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exact_mms;
    use crate::rational::{frac, int};
    use crate::DEFAULT_BUDGET;
    use proptest::prelude::*;

    fn ints(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&x| int(x)).collect()
    }

    #[test]
    fn approx_examples() {
        let (v, a) = approx_mms(&ints(&[1, 1]), 2, &frac(1, 10), DEFAULT_BUDGET).unwrap();
        assert_eq!(v, int(1));
        assert_eq!(a.bundles(), &[vec![0], vec![1]]);
        let (v, _) = approx_mms(&ints(&[-1, -1]), 2, &frac(1, 10), DEFAULT_BUDGET).unwrap();
        assert_eq!(v, int(-1));
        let (v, a) = approx_mms(&ints(&[0, 0, 0]), 2, &frac(1, 10), DEFAULT_BUDGET).unwrap();
        assert_eq!(v, int(0));
        assert_eq!(a.bundles(), &[vec![0, 1, 2], vec![]]);
        assert!(matches!(
            approx_mms(&ints(&[1]), 2, &int(1), DEFAULT_BUDGET),
            Err(Error::Param(_))
        ));
    }

    #[test]
    fn nonneg_keeps_the_exact_split() {
        let row: Vec<Rational> = [5, 5, 4, 4].iter().map(|&v| frac(v, 9)).collect();
        let a = approx_mms_nonneg(&row, 2, &frac(1, 5), DEFAULT_BUDGET).unwrap();
        assert_eq!(min_bundle(&row, a.bundles()), int(1));
    }

    #[test]
    fn drain_keeps_touched_bags_high() {
        // One big good worth more than 1 after normalizing; tiny chores drain into it.
        let mut row = vec![int(40), int(30)];
        row.extend(std::iter::repeat(int(-1)).take(6));
        let w = normalized(&row, 2);
        let eps = frac(1, 5);
        let split = split_items(&w, &(&eps / int(2)));
        assert_eq!(split.big, vec![0, 1]);
        assert_eq!(split.small_chores.len(), 6);
        let drained = drain(&w, vec![vec![0], vec![1]], &split.small_chores);
        assert!(drained.touched[0]);
        for (k, v) in drained.values.iter().enumerate() {
            if drained.touched[k] {
                assert!(*v >= int(1) - &eps / int(2));
            }
        }
        let a = approx_mms_nonneg(&row, 2, &eps, DEFAULT_BUDGET).unwrap();
        let (mms, _) = exact_mms(&row, 2, DEFAULT_BUDGET).unwrap();
        assert!(min_bundle(&row, a.bundles()) >= (int(1) - eps) * mms);
    }

    #[test]
    fn bsets_boundaries() {
        let eps = frac(1, 5);
        let sets = classify_bsets(&[frac(3, 2), int(1), frac(1, 2), frac(-1, 4)], &eps);
        assert_eq!(
            sets,
            BSets {
                b1: vec![0],
                b2: vec![1],
                b3: vec![2],
                b4: vec![3]
            }
        );
        assert_eq!(classify_bsets(&[frac(4, 5)], &eps).b2, vec![0]);
        assert_eq!(classify_bsets(&[int(0)], &eps).b3, vec![0]);
    }

    #[test]
    fn bag_fill_examples() {
        let eps = frac(1, 5);
        let values = vec![frac(1, 10); 20];
        let out = bag_fill(
            &values,
            &[vec![], vec![]],
            &(0..20).collect::<Vec<_>>(),
            &eps,
            ConditionSet::One,
        )
        .unwrap();
        for b in &out {
            assert!(sum_of(&values, b) >= frac(4, 5));
        }
        assert_eq!(out.iter().map(Vec::len).sum::<usize>(), 20);

        let values = vec![frac(4, 5)];
        let out = bag_fill(&values, &[vec![0]], &[], &eps, ConditionSet::One);
        // total 4/5 is below n = 1
        assert!(matches!(out, Err(Error::Precondition(_))));
        let values = vec![int(1)];
        assert_eq!(
            bag_fill(&values, &[vec![0]], &[], &eps, ConditionSet::One).unwrap(),
            vec![vec![0]]
        );

        let values = vec![frac(1, 5), frac(9, 5)];
        match bag_fill(&values, &[vec![], vec![]], &[0, 1], &eps, ConditionSet::One) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("small item"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let values = vec![frac(3, 2), frac(1, 2)];
        match bag_fill(&values, &[vec![0], vec![1]], &[], &eps, ConditionSet::One) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("bag 0"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn partition_validity() {
        let eps = frac(1, 5);
        let w = vec![frac(1, 2), frac(1, 2), frac(1, 2), frac(1, 2)];
        let split = split_items(&w, &frac(1, 10));
        assert!(is_partition_valid(
            &w,
            &[vec![0, 1], vec![2, 3]],
            &split,
            &eps
        ));
        let w = vec![int(2), int(0)];
        let split = split_items(&w, &frac(1, 10));
        assert!(is_partition_valid(&w, &[vec![0], vec![1]], &split, &eps));
        // B1 = {0} at 5/2, B4 = {1} at -1/2, and nothing small to rescue it.
        let w = vec![frac(5, 2), frac(-1, 2)];
        let split = split_items(&w, &frac(1, 10));
        assert!(!is_partition_valid(&w, &[vec![0], vec![1]], &split, &eps));
    }

    #[test]
    fn goods_only_examples() {
        let eps = frac(1, 10);
        let a = goods_only_mms(&ints(&[1, 1, 1]), 3, &eps, DEFAULT_BUDGET).unwrap();
        assert_eq!(min_bundle(&ints(&[1, 1, 1]), a.bundles()), int(1));
        let a = goods_only_mms(&ints(&[4, 3, 3, 2]), 2, &eps, DEFAULT_BUDGET).unwrap();
        assert_eq!(min_bundle(&ints(&[4, 3, 3, 2]), a.bundles()), int(6));
        let a = goods_only_mms(&ints(&[1]), 3, &eps, DEFAULT_BUDGET).unwrap();
        assert_eq!(min_bundle(&ints(&[1]), a.bundles()), int(0));
        assert!(goods_only_mms(&ints(&[-1]), 1, &eps, DEFAULT_BUDGET).is_err());
    }

    #[test]
    fn negative_examples() {
        let eps = frac(1, 10);
        let a = approx_mms_negative(&ints(&[-1, -1]), 2, &eps, DEFAULT_BUDGET).unwrap();
        assert_eq!(a.bundles(), &[vec![0], vec![1]]);
        let row = vec![frac(-3, 2), frac(-1, 2)];
        let (v, _) = approx_mms(&row, 2, &eps, DEFAULT_BUDGET).unwrap();
        assert_eq!(v, frac(-3, 2));
        assert_eq!(exact_mms(&row, 2, DEFAULT_BUDGET).unwrap().0, frac(-3, 2));

        let mut row = ints(&[-100, -100]);
        row.extend(std::iter::repeat(int(1)).take(20));
        let (v, _) = approx_mms(&row, 2, &eps, DEFAULT_BUDGET).unwrap();
        let mms = exact_mms(&row, 2, DEFAULT_BUDGET).unwrap().0;
        assert!(v >= mms / (int(1) - eps));
    }

    #[test]
    fn big_bounds() {
        let (g, c) = big_size_bounds(2, &frac(1, 10), &frac(1, 4));
        assert_eq!(g, int(200));
        assert_eq!(c, int(160));
    }

    fn meets(value: &Rational, mms: &Rational, eps: &Rational) -> bool {
        if mms.is_negative() {
            *value >= mms / (int(1) - eps)
        } else {
            *value >= (int(1) - eps) * mms
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn approx_meets_guarantee(
            row in prop::collection::vec(-20i64..=20, 0..8),
            n in 1usize..4,
            e in prop::sample::select(vec![(1i64, 10i64), (1, 4), (1, 2)]),
        ) {
            let values = ints(&row);
            let eps = frac(e.0, e.1);
            let (v, a) = approx_mms(&values, n, &eps, DEFAULT_BUDGET).unwrap();
            let (mms, _) = exact_mms(&values, n, DEFAULT_BUDGET).unwrap();
            prop_assert!(meets(&v, &mms, &eps), "value {} mms {}", v, mms);
            prop_assert_eq!(a.bundles().iter().map(Vec::len).sum::<usize>(), values.len());
            prop_assert_eq!(approx_mms(&values, n, &eps, DEFAULT_BUDGET).unwrap().1, a);
        }

        #[test]
        fn goods_only_fallback_meets_guarantee(
            row in prop::collection::vec(0i64..=30, 0..9),
            n in 1usize..4,
        ) {
            let values = ints(&row);
            let eps = frac(1, 4);
            let (mms, _) = exact_mms(&values, n, DEFAULT_BUDGET).unwrap();
            for budget in [DEFAULT_BUDGET, 40] {
                match goods_only_mms(&values, n, &eps, budget) {
                    Ok(a) => prop_assert!(min_bundle(&values, a.bundles()) >= (int(1) - &eps) * &mms),
                    Err(Error::Budget { .. }) => prop_assert!(budget < DEFAULT_BUDGET),
                    Err(e) => prop_assert!(false, "{e}"),
                }
            }
            let exact = goods_only_mms(&values, n, &eps, DEFAULT_BUDGET).unwrap();
            prop_assert_eq!(min_bundle(&values, exact.bundles()), mms);
        }

        #[test]
        fn bag_fill_condition_one(
            raw in prop::collection::vec(-3i64..=9, 1..25),
            n in 1usize..4,
        ) {
            // Scale items below eps = 1/5 and top up so the total reaches n.
            let eps = frac(1, 5);
            let mut values: Vec<Rational> = raw.iter().map(|&v| frac(v, 50)).collect();
            let total: Rational = values.iter().sum();
            let mut need = Rational::from_integer(n.into()) - total;
            while need.is_positive() {
                values.push(frac(9, 50));
                need -= frac(9, 50);
            }
            let smalls: Vec<usize> = (0..values.len()).collect();
            let out = bag_fill(&values, &vec![vec![]; n], &smalls, &eps, ConditionSet::One).unwrap();
            for b in &out {
                prop_assert!(sum_of(&values, b) >= int(1) - &eps);
            }
        }
    }
}
