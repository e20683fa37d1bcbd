//! Searching for the largest alpha the mixed solver can certify.

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::mixed::{solve_alpha_mms_po, Outcome, SolverParams};
use crate::model::{Allocation, Instance};
use crate::rational::{frac, Rational};

/// Each item goes to an agent valuing it most; ties go to the lowest index.
pub fn welfare_max_allocation(inst: &Instance) -> Allocation {
    let owners: Vec<usize> = (0..inst.m())
        .map(|j| {
            let mut best = 0;
            for i in 1..inst.n() {
                if inst.value(i, j) > inst.value(best, j) {
                    best = i;
                }
            }
            best
        })
        .collect();
    Allocation::from_owners(&owners, inst.n())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchParams {
    pub epsilon: Rational,
    pub gamma: Rational,
    /// Bisection stops once the bracket is no wider than this.
    pub delta: Rational,
    pub tau: Option<Rational>,
    pub big_budget: u64,
    pub threads: usize,
}

impl SearchParams {
    pub fn new(epsilon: Rational, gamma: Rational) -> Self {
        Self {
            epsilon,
            gamma,
            delta: frac(1, 1024),
            tau: None,
            big_budget: crate::DEFAULT_BUDGET,
            threads: 1,
        }
    }

    fn solver(&self, alpha: Rational) -> SolverParams {
        SolverParams {
            alpha,
            epsilon: self.epsilon.clone(),
            gamma: self.gamma.clone(),
            tau: self.tau.clone(),
            big_budget: self.big_budget,
            threads: self.threads,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchResult {
    /// Largest probed alpha that succeeded, or zero when none did.
    pub alpha: Rational,
    pub allocation: Allocation,
    /// Every probe in order, with whether it found an allocation.
    pub probes: Vec<(Rational, bool)>,
}

/// Probes alpha = 1, then bisects `[eps, 1]` until the bracket is within `delta`.
pub fn opt_alpha_mms_po(inst: &Instance, params: &SearchParams) -> Result<SearchResult> {
    if !params.delta.is_positive() {
        return Err(Error::Param(format!(
            "delta must be positive, got {}",
            params.delta
        )));
    }
    let mut probes = Vec::new();
    let mut probe = |alpha: &Rational| -> Result<Option<Allocation>> {
        let found = match solve_alpha_mms_po(inst, &params.solver(alpha.clone()))? {
            Outcome::Found(s) => Some(s.allocation),
            Outcome::NoAlphaMms => None,
        };
        probes.push((alpha.clone(), found.is_some()));
        Ok(found)
    };
    let one = Rational::one();
    if let Some(allocation) = probe(&one)? {
        return Ok(SearchResult {
            alpha: one,
            allocation,
            probes,
        });
    }
    let two = Rational::from_integer(2.into());
    let (mut lo, mut hi) = (params.epsilon.clone(), one);
    let mut best = None;
    while &hi - &lo > params.delta {
        let mid = (&lo + &hi) / &two;
        match probe(&mid)? {
            Some(allocation) => {
                best = Some((mid.clone(), allocation));
                lo = mid;
            }
            None => hi = mid,
        }
    }
    let (alpha, allocation) =
        best.unwrap_or_else(|| (Rational::zero(), welfare_max_allocation(inst)));
    Ok(SearchResult {
        alpha,
        allocation,
        probes,
    })
}
