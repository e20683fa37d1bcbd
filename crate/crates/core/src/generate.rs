//! Instance generators: the three-agent non-existence example, PARTITION
//! reductions, and seeded random instances.

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{check_tau_condition, Instance};
use crate::rational::{frac, int, Rational};

const OFFSETS: [[i64; 4]; 3] = [[17, 25, 12, 1], [2, 22, 3, 28], [11, 0, 21, 23]];

const NOISE: [[[i64; 4]; 3]; 3] = [
    [[3, -1, -1, -1], [0, 0, 0, 0], [0, 0, 0, 0]],
    [[3, -1, 0, 0], [-1, 0, 0, 0], [-1, 0, 0, 0]],
    [[3, 0, -1, 0], [0, 0, -1, 0], [0, 0, 0, -1]],
];

/// Three agents, twelve goods `g11..g34` and three chores `c1..c3` with no
/// alpha-MMS allocation for any alpha > 0.
pub fn gen_nonexistence() -> Instance {
    let mut labels = Vec::with_capacity(15);
    for j in 1..=3 {
        for k in 1..=4 {
            labels.push(format!("g{j}{k}"));
        }
    }
    labels.extend((1..=3).map(|c| format!("c{c}")));
    let chore = frac(-16_219_999, 4);
    let values = NOISE
        .iter()
        .map(|noise| {
            let mut row: Vec<Rational> = Vec::with_capacity(15);
            for j in 0..3 {
                for k in 0..4 {
                    row.push(int(1_000_000 + 1_000 * OFFSETS[j][k] + noise[j][k]));
                }
            }
            row.extend(std::iter::repeat(chore.clone()).take(3));
            row
        })
        .collect();
    Instance::new(labels, values).expect("fixed instance is well formed")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartitionVariant {
    TwoAgent,
    /// `n` identical agents whose instance satisfies the tau-condition.
    Tau {
        n: usize,
        tau: Rational,
    },
}

/// Identical-agent instance whose MMS is 1/4 exactly when `weights` split into two equal halves.
pub fn gen_partition_reduction(weights: &[u64], variant: &PartitionVariant) -> Result<Instance> {
    if weights.is_empty() {
        return Err(Error::Param("weights must be nonempty".into()));
    }
    let beta = frac(1, 4);
    let total: Rational = weights
        .iter()
        .map(|&w| Rational::from_integer(w.into()))
        .sum();
    let chore = -(&total / int(2)) + &beta;
    let mut row: Vec<Rational> = weights
        .iter()
        .map(|&w| Rational::from_integer(w.into()))
        .collect();
    let n = match variant {
        PartitionVariant::TwoAgent => 2,
        PartitionVariant::Tau { n, tau } => {
            let minimal = minimal_agents(&total, tau);
            if Rational::from_integer((*n).into()) < minimal {
                return Err(Error::Param(format!(
                    "tau-variant needs at least {minimal} agents, got {n}"
                )));
            }
            row.extend(std::iter::repeat(beta.clone()).take(n - 2));
            *n
        }
    };
    row.push(chore.clone());
    row.push(chore);
    Ok(Instance::identical(n, row))
}

/// Smallest `n` with `(n-2)/4 + S >= (1+tau)(S + 1/2)`.
fn minimal_agents(total: &Rational, tau: &Rational) -> Rational {
    let one = Rational::one();
    let needed = int(4) * ((&one + tau) * (total + frac(1, 2)) - total);
    let extra = needed.ceil();
    if extra < Rational::zero() {
        int(2)
    } else {
        extra + int(2)
    }
}

/// Integer values uniform in `[lo, hi]`, each agent redrawn until the tau-condition holds.
pub fn gen_random(
    n: usize,
    m: usize,
    lo: i64,
    hi: i64,
    tau: &Rational,
    seed: u64,
) -> Result<Instance> {
    const ATTEMPTS: usize = 100_000;
    if n == 0 {
        return Err(Error::Param("need at least one agent".into()));
    }
    if lo > hi {
        return Err(Error::Param(format!("empty value range [{lo}, {hi}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n);
    for agent in 0..n {
        let row = (0..ATTEMPTS)
            .map(|_| {
                (0..m)
                    .map(|_| int(rng.gen_range(lo..=hi)))
                    .collect::<Vec<_>>()
            })
            .find(|row| {
                check_tau_condition(
                    &Instance::from_rows(vec![row.clone()]).expect("one row"),
                    tau,
                )[0]
            })
            .ok_or_else(|| {
                Error::Param(format!(
                    "no row for agent {agent} met the tau-condition after {ATTEMPTS} draws"
                ))
            })?;
        values.push(row);
    }
    Ok(Instance::from_rows(values).expect("rectangular"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DEFAULT_BUDGET;

    #[test]
    fn nonexistence_values() {
        let inst = gen_nonexistence();
        assert_eq!((inst.n(), inst.m()), (3, 15));
        assert_eq!(inst.value(0, 0), &int(1_017_003));
        let g32 = inst.item_index("g32").unwrap();
        assert_eq!(inst.value(1, g32), &int(1_000_000));
        for i in 0..3 {
            for c in 12..15 {
                assert_eq!(inst.value(i, c), &frac(-16_219_999, 4));
            }
            assert_eq!(
                inst.bundle_value(i, &(0..15).collect::<Vec<_>>()).unwrap(),
                frac(3, 4)
            );
        }
    }

    #[test]
    fn partition_reduction_two_agent() {
        let inst = gen_partition_reduction(&[3, 1, 2], &PartitionVariant::TwoAgent).unwrap();
        assert_eq!(inst.n(), 2);
        assert_eq!(
            inst.row(0),
            &[int(3), int(1), int(2), frac(-11, 4), frac(-11, 4)]
        );
        let (mms, _) = crate::oracle::exact_mms(inst.row(0), 2, DEFAULT_BUDGET).unwrap();
        assert_eq!(mms, frac(1, 4));
        let odd = gen_partition_reduction(&[1, 1, 1], &PartitionVariant::TwoAgent).unwrap();
        let (mms, _) = crate::oracle::exact_mms(odd.row(0), 2, DEFAULT_BUDGET).unwrap();
        assert_eq!(mms, int(0));
    }

    #[test]
    fn partition_reduction_tau_variant() {
        let tau = frac(1, 4);
        // weights sum to 2: need (n-2)/4 + 2 >= 5/4 * 5/2, so n >= 7.
        let err = gen_partition_reduction(
            &[1, 1],
            &PartitionVariant::Tau {
                n: 6,
                tau: tau.clone(),
            },
        );
        match err {
            Err(Error::Param(msg)) => assert!(msg.contains("at least 7"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let inst = gen_partition_reduction(
            &[1, 1],
            &PartitionVariant::Tau {
                n: 7,
                tau: tau.clone(),
            },
        )
        .unwrap();
        assert_eq!((inst.n(), inst.m()), (7, 9));
        assert!(check_tau_condition(&inst, &tau).iter().all(|&ok| ok));
        assert_eq!(inst.total(0), frac(7, 4));
    }

    #[test]
    fn random_is_seeded_and_tau_clean() {
        let one = int(1);
        let a = gen_random(3, 6, -20, 20, &one, 7).unwrap();
        assert_eq!(a, gen_random(3, 6, -20, 20, &one, 7).unwrap());
        assert_ne!(a, gen_random(3, 6, -20, 20, &one, 8).unwrap());
        assert!(check_tau_condition(&a, &one).iter().all(|&ok| ok));
        assert_eq!(gen_random(2, 0, -1, 1, &one, 0).unwrap().m(), 0);
        assert!(gen_random(1, 2, 3, 1, &one, 0).is_err());
    }
}
