//! (alpha - eps)-MMS allocations with approximate Pareto optimality for agents
//! with different valuations over goods and chores.
//!
//! The pipeline: drop all-zero agents, normalize, estimate every MMS, enumerate
//! partitions of the big items, complete each with the small-item LP, keep the
//! highest-welfare fractional allocation, then make it acyclic, round it, and
//! apply the Pareto fix-up.

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::enumerate::decode;
use crate::error::{check_budget, Error, Result};
use crate::identical::approx_mms;
use crate::lp::{solve_small_lp, FractionalAllocation, LpOutcome, SmallLpSpec};
use crate::model::{check_tau_condition, classify_items, normalize, Allocation, Instance};
use crate::rational::Rational;
use crate::search::welfare_max_allocation;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverParams {
    pub alpha: Rational,
    pub epsilon: Rational,
    pub gamma: Rational,
    /// When set, every agent must satisfy the tau-condition. Zero-total agents
    /// with nonzero values are rejected either way.
    pub tau: Option<Rational>,
    /// Cap on enumerated partitions, for both the MMS estimates and the big items.
    pub big_budget: u64,
    pub threads: usize,
}

impl SolverParams {
    pub fn new(alpha: Rational, epsilon: Rational, gamma: Rational) -> Self {
        Self {
            alpha,
            epsilon,
            gamma,
            tau: None,
            big_budget: crate::DEFAULT_BUDGET,
            threads: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        let one = Rational::one();
        if !self.alpha.is_positive() || self.alpha > one {
            return Err(Error::Param(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        let named = [
            ("epsilon", Some(&self.epsilon)),
            ("gamma", Some(&self.gamma)),
            ("tau", self.tau.as_ref()),
        ];
        for (name, v) in named.into_iter().filter_map(|(name, v)| Some((name, v?))) {
            if !v.is_positive() {
                return Err(Error::Param(format!("{name} must be positive, got {v}")));
            }
        }
        if self.epsilon >= one {
            return Err(Error::Param(format!(
                "epsilon must be below 1, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Preprocessing

/// A reduced, normalized instance plus the bookkeeping to map results back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reduction {
    /// `min(eps, gamma * alpha / (1 + gamma))`.
    pub epsilon: Rational,
    /// Original index of each remaining agent.
    pub agents: Vec<usize>,
    /// Original index of each remaining item.
    pub items: Vec<usize>,
    /// `(item, agent)` pairs, in original indices, handed to all-zero agents.
    pub absorbed: Vec<(usize, usize)>,
    /// Remaining agents and items, scaled so `|v_i(M)| = n`.
    pub instance: Instance,
    pub scales: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Preprocessed {
    /// `alpha <= eps`: the welfare-maximizing allocation already qualifies.
    Trivial,
    /// Every agent values every item at zero; the allocation is fixed.
    Settled(Allocation),
    Reduced(Reduction),
}

pub fn reduced_epsilon(params: &SolverParams) -> Rational {
    let one = Rational::one();
    let cap = &params.gamma * &params.alpha / (&one + &params.gamma);
    params.epsilon.clone().min(cap)
}

pub fn preprocess(inst: &Instance, params: &SolverParams) -> Result<Preprocessed> {
    params.validate()?;
    if params.alpha <= params.epsilon {
        return Ok(Preprocessed::Trivial);
    }
    let epsilon = reduced_epsilon(params);
    let mut agents: Vec<usize> = (0..inst.n()).collect();
    let mut items: Vec<usize> = (0..inst.m()).collect();
    let mut absorbed = Vec::new();
    loop {
        let total = |i: usize| -> Rational { items.iter().map(|&j| inst.value(i, j)).sum() };
        let unbalanced: Vec<usize> = agents
            .iter()
            .copied()
            .filter(|&i| total(i).is_zero() && items.iter().any(|&j| !inst.value(i, j).is_zero()))
            .collect();
        if !unbalanced.is_empty() {
            return Err(Error::TauViolation { agents: unbalanced });
        }
        let (zero, rest): (Vec<usize>, Vec<usize>) = agents
            .iter()
            .partition(|&&i| items.iter().all(|&j| inst.value(i, j).is_zero()));
        let Some(&sink) = zero.first() else { break };
        let (chores, kept): (Vec<usize>, Vec<usize>) = items
            .iter()
            .partition(|&&j| rest.iter().all(|&i| inst.value(i, j).is_negative()));
        absorbed.extend(chores.into_iter().map(|j| (j, sink)));
        items = kept;
        agents = rest;
        if agents.is_empty() {
            break;
        }
    }
    if agents.is_empty() {
        let mut owner = vec![0; inst.m()];
        for &(j, i) in &absorbed {
            owner[j] = i;
        }
        return Ok(Preprocessed::Settled(Allocation::from_owners(
            &owner,
            inst.n(),
        )));
    }
    let (instance, scales) = normalize(&inst.restrict(&agents, &items))?;
    Ok(Preprocessed::Reduced(Reduction {
        epsilon,
        agents,
        items,
        absorbed,
        instance,
        scales,
    }))
}

// ---------------------------------------------------------------------------
// MMS estimates and big items

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MmsProfile {
    pub mu_tilde: Vec<Rational>,
    pub negative: Vec<bool>,
    /// Accuracy passed to the identical-agent solver.
    pub epsilon: Rational,
}

/// Estimates every agent's MMS at accuracy `eps/2` on a normalized instance.
pub fn compute_mms_profile(inst: &Instance, epsilon: &Rational, budget: u64) -> Result<MmsProfile> {
    let accuracy = epsilon / Rational::from_integer(2.into());
    let n = inst.n();
    let mut mu_tilde = Vec::with_capacity(n);
    let mut negative = Vec::with_capacity(n);
    for i in 0..n {
        let (mu, _) = approx_mms(inst.row(i), n, &accuracy, budget)?;
        let neg = inst.total(i).is_negative();
        let bound = if neg {
            -Rational::one()
        } else {
            Rational::one()
        };
        if mu > bound {
            return Err(Error::Invariant(format!(
                "estimated MMS {mu} of agent {i} exceeds {bound} after normalizing"
            )));
        }
        mu_tilde.push(mu);
        negative.push(neg);
    }
    Ok(MmsProfile {
        mu_tilde,
        negative,
        epsilon: accuracy,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BigSmallProfile {
    pub big_goods_of: Vec<Vec<usize>>,
    pub big_chores_of: Vec<Vec<usize>>,
    /// Largest absolute value first; partitions are ranked in this order.
    pub big: Vec<usize>,
    pub small: Vec<usize>,
    pub small_goods_of: Vec<Vec<usize>>,
    pub small_chores_of: Vec<Vec<usize>>,
}

/// Big goods clear `eps * mu_i / 2n` (or `eps / 2n` when `mu_i < 0`); big chores exceed `eps / 2n` in size.
pub fn classify_big(inst: &Instance, profile: &MmsProfile, epsilon: &Rational) -> BigSmallProfile {
    let n = inst.n();
    let class = classify_items(inst);
    let unit = epsilon / Rational::from_integer((2 * n).into());
    let mut is_big = vec![false; inst.m()];
    let mut big_goods_of = vec![Vec::new(); n];
    let mut big_chores_of = vec![Vec::new(); n];
    for i in 0..n {
        let mu = &profile.mu_tilde[i];
        let good_cut = if mu.is_negative() {
            unit.clone()
        } else {
            &unit * mu
        };
        for &j in &class.global_goods {
            if *inst.value(i, j) > good_cut {
                big_goods_of[i].push(j);
                is_big[j] = true;
            }
        }
        for &j in &class.global_chores {
            if -inst.value(i, j) > unit {
                big_chores_of[i].push(j);
                is_big[j] = true;
            }
        }
    }
    let (mut big, small): (Vec<usize>, Vec<usize>) = (0..inst.m()).partition(|&j| is_big[j]);
    // Heaviest first, so the partition search prunes early.
    let weight = |j: usize| {
        (0..n)
            .map(|i| inst.value(i, j).abs())
            .max()
            .expect("n >= 1")
    };
    big.sort_by(|&a, &b| weight(b).cmp(&weight(a)).then(a.cmp(&b)));
    let small_goods_of = (0..n)
        .map(|i| {
            class.goods_of[i]
                .iter()
                .copied()
                .filter(|&j| !big_goods_of[i].contains(&j))
                .collect()
        })
        .collect();
    let small_chores_of = (0..n)
        .map(|i| {
            class.chores_of[i]
                .iter()
                .copied()
                .filter(|&j| !big_chores_of[i].contains(&j))
                .collect()
        })
        .collect();
    BigSmallProfile {
        big_goods_of,
        big_chores_of,
        big,
        small,
        small_goods_of,
        small_chores_of,
    }
}

// ---------------------------------------------------------------------------
// Acyclic fractional allocations

fn share_totals(x: &FractionalAllocation, k: usize) -> Vec<Rational> {
    (0..k)
        .map(|j| x.x.iter().map(|r| r[j].clone()).sum())
        .collect()
}

/// Alternating agent/item cycle `[a1, o1, a2, o2, ...]` in the support of `x`, if any.
fn allocation_cycle(x: &[Vec<Rational>], n: usize, k: usize) -> Option<Vec<usize>> {
    // Nodes: agents 0..n, items n..n+k.
    let neighbors = |v: usize| -> Vec<usize> {
        if v < n {
            (0..k)
                .filter(|&j| x[v][j].is_positive())
                .map(|j| n + j)
                .collect()
        } else {
            (0..n).filter(|&i| x[i][v - n].is_positive()).collect()
        }
    };
    let mut state = vec![0u8; n + k];
    let mut parent = vec![usize::MAX; n + k];
    for root in 0..n {
        if state[root] != 0 {
            continue;
        }
        let mut stack: Vec<(usize, Vec<usize>, usize)> = vec![(root, neighbors(root), 0)];
        state[root] = 1;
        while let Some((v, adj, pos)) = stack.last_mut() {
            let v = *v;
            if *pos == adj.len() {
                state[v] = 2;
                stack.pop();
                continue;
            }
            let w = adj[*pos];
            *pos += 1;
            if w == parent[v] {
                continue;
            }
            if state[w] == 1 {
                let mut cycle: Vec<usize> = stack.iter().map(|(u, _, _)| *u).collect();
                let start = cycle.iter().position(|&u| u == w).expect("on stack");
                cycle.drain(..start);
                if cycle[0] >= n {
                    cycle.rotate_left(1);
                }
                return Some(cycle);
            }
            if state[w] == 0 {
                state[w] = 1;
                parent[w] = v;
                stack.push((w, neighbors(w), 0));
            }
        }
    }
    None
}

/// Removes every cycle from the support of `x` without lowering any agent's value
/// or changing any item's total share.
pub fn acyclify(spec: &SmallLpSpec, x: &FractionalAllocation) -> Result<FractionalAllocation> {
    let (n, k) = (spec.n(), spec.k());
    let v = &spec.values;
    let mut x = x.clone();
    let totals = share_totals(&x, k);
    while let Some(cycle) = allocation_cycle(&x.x, n, k) {
        let len = cycle.len();
        let half = len / 2;
        // Edge 2t is agent t's link to its incoming item, 2t+1 to its outgoing item.
        let edge = |e: usize| -> (usize, usize) {
            let t = e / 2;
            let agent = cycle[2 * t];
            let item = if e % 2 == 1 {
                cycle[2 * t + 1]
            } else if t == 0 {
                cycle[len - 1]
            } else {
                cycle[2 * t - 1]
            };
            (agent, item - n)
        };

        // Shares of items the two holders disagree on, or value at zero, move first.
        let mut shortcut = None;
        for t in 0..half {
            let item = cycle[2 * t + 1] - n;
            let a = cycle[2 * t];
            let b = cycle[(2 * t + 2) % len];
            let (va, vb) = (&v[a][item], &v[b][item]);
            let (ga, gb) = (!va.is_negative(), !vb.is_negative());
            if ga != gb {
                shortcut = Some(if ga { (b, a, item) } else { (a, b, item) });
            } else if ga && vb.is_zero() {
                shortcut = Some((b, a, item));
            } else if ga && va.is_zero() {
                shortcut = Some((a, b, item));
            }
            if shortcut.is_some() {
                break;
            }
        }
        if let Some((from, to, item)) = shortcut {
            let moved = std::mem::replace(&mut x.x[from][item], Rational::zero());
            x.x[to][item] += moved;
            continue;
        }

        let mut ratio = vec![Rational::zero(); len];
        ratio[0] = Rational::one();
        for t in 0..half {
            let (a, incoming) = edge(2 * t);
            let (_, outgoing) = edge(2 * t + 1);
            ratio[2 * t + 1] = -&ratio[2 * t] * &v[a][incoming] / &v[a][outgoing];
            if t + 1 < half {
                ratio[2 * t + 2] = -ratio[2 * t + 1].clone();
            }
        }
        let (first, closing) = edge(0);
        let closing_is_good = v[first][closing].is_positive();
        let net = &ratio[0] + &ratio[len - 1];
        let sign =
            if (closing_is_good && net.is_positive()) || (!closing_is_good && net.is_negative()) {
                -Rational::one()
            } else {
                Rational::one()
            };
        let step = (0..len)
            .filter(|&e| (&sign * &ratio[e]).is_negative())
            .map(|e| {
                let (a, j) = edge(e);
                &x.x[a][j] / ratio[e].abs()
            })
            .min()
            .ok_or_else(|| Error::Invariant("cycle step has no decreasing edge".into()))?;
        for (e, r) in ratio.iter().enumerate() {
            let (a, j) = edge(e);
            x.x[a][j] += &sign * &step * r;
            if x.x[a][j].is_negative() {
                return Err(Error::Invariant(
                    "cycle step produced a negative share".into(),
                ));
            }
        }

        let drift = &sign * &step * &net;
        if closing_is_good && drift.is_negative() {
            let holder = (0..n)
                .filter(|&i| x.x[i][closing].is_positive() && !v[i][closing].is_negative())
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if x.x[b][closing] >= x.x[i][closing] => Some(b),
                    _ => Some(i),
                })
                .unwrap_or_else(|| argmax_agent(v, closing));
            x.x[holder][closing] -= drift;
        } else if !closing_is_good && drift.is_positive() {
            let mut excess = drift;
            while excess.is_positive() {
                let holder = (0..n)
                    .fold(None, |best: Option<usize>, i| match best {
                        Some(b) if x.x[b][closing] >= x.x[i][closing] => Some(b),
                        _ => Some(i),
                    })
                    .expect("n >= 1");
                let take = excess.clone().min(x.x[holder][closing].clone());
                if !take.is_positive() {
                    return Err(Error::Invariant("chore excess exceeds its holders".into()));
                }
                x.x[holder][closing] -= &take;
                excess -= take;
            }
        }
    }
    if share_totals(&x, k) != totals {
        return Err(Error::Invariant(
            "acyclification changed an item's total share".into(),
        ));
    }
    for j in 0..k {
        if spec.is_chore[j] && totals[j] != Rational::one() {
            return Err(Error::Invariant(format!(
                "small chore {j} is assigned {} times",
                totals[j]
            )));
        }
    }
    Ok(x)
}

fn argmax_agent(values: &[Vec<Rational>], item: usize) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i][item] > values[best][item] {
            best = i;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Envy graph

fn bundle_value(inst: &Instance, agent: usize, bundle: &[usize]) -> Rational {
    bundle.iter().map(|&j| inst.value(agent, j)).sum()
}

/// `graph[i]` lists the agents whose bundle `i` strictly prefers to its own.
pub fn build_envy_graph(inst: &Instance, bundles: &[Vec<usize>]) -> Vec<Vec<usize>> {
    (0..bundles.len())
        .map(|i| {
            let own = bundle_value(inst, i, &bundles[i]);
            (0..bundles.len())
                .filter(|&k| k != i && bundle_value(inst, i, &bundles[k]) > own)
                .collect()
        })
        .collect()
}

/// First directed cycle found by depth-first search from the lowest-index node.
fn directed_cycle(graph: &[Vec<usize>]) -> Option<Vec<usize>> {
    let n = graph.len();
    let mut state = vec![0u8; n];
    for root in 0..n {
        if state[root] != 0 {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        state[root] = 1;
        while let Some((v, pos)) = stack.last_mut() {
            let v = *v;
            if *pos == graph[v].len() {
                state[v] = 2;
                stack.pop();
                continue;
            }
            let w = graph[v][*pos];
            *pos += 1;
            match state[w] {
                0 => {
                    state[w] = 1;
                    stack.push((w, 0));
                }
                1 => {
                    let path: Vec<usize> = stack.iter().map(|(u, _)| *u).collect();
                    let start = path.iter().position(|&u| u == w).expect("on stack");
                    return Some(path[start..].to_vec());
                }
                _ => {}
            }
        }
    }
    None
}

/// Each agent on `cycle` takes its successor's bundle.
fn rotate(bundles: &mut [Vec<usize>], cycle: &[usize]) {
    let taken: Vec<Vec<usize>> = cycle
        .iter()
        .enumerate()
        .map(|(p, _)| std::mem::take(&mut bundles[cycle[(p + 1) % cycle.len()]]))
        .collect();
    // Bundles were taken from successors; hand them to predecessors.
    for (p, bundle) in taken.into_iter().enumerate() {
        bundles[cycle[p]] = bundle;
    }
}

/// Rotates bundles along envy cycles until the envy graph is acyclic.
pub fn eliminate_envy_cycles(inst: &Instance, bundles: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut bundles = bundles.to_vec();
    while let Some(cycle) = directed_cycle(&build_envy_graph(inst, &bundles)) {
        rotate(&mut bundles, &cycle);
    }
    bundles
}

// ---------------------------------------------------------------------------
// Rounding

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundingTrace {
    /// Items split between two or more agents in the acyclic solution.
    pub shared: Vec<usize>,
    pub s_plus: Vec<usize>,
    pub s_minus_eps: Vec<usize>,
    pub sink: Option<usize>,
    /// Sink's value after cycle elimination, before it takes the large shared chores.
    pub sink_value: Option<Rational>,
    pub pre_round_values: Vec<Rational>,
    pub post_round_values: Vec<Rational>,
}

/// Rounds big bundles plus an acyclic small-item share matrix to an integral allocation.
///
/// `small[p]` is the item behind column `p` of `x`; every agent's value only
/// drops by the bounded amounts the rounding permits, or an error is raised.
pub fn round_fractional(
    inst: &Instance,
    bags: &[Vec<usize>],
    small: &[usize],
    x: &FractionalAllocation,
    profile: &MmsProfile,
    epsilon: &Rational,
) -> Result<(Vec<Vec<usize>>, RoundingTrace)> {
    let n = inst.n();
    let class = classify_items(inst);
    let holders: Vec<Vec<usize>> = (0..small.len())
        .map(|p| (0..n).filter(|&i| x.x[i][p].is_positive()).collect())
        .collect();
    let shared_pos: Vec<usize> = (0..small.len())
        .filter(|&p| holders[p].len() >= 2)
        .collect();
    if shared_pos.len() + 1 > n {
        return Err(Error::Invariant(format!(
            "{} shared items among {n} agents",
            shared_pos.len()
        )));
    }
    let two_n = Rational::from_integer((2 * n).into());
    let large_for_someone = |j: usize| {
        (0..n).any(|i| inst.value(i, j).abs() > epsilon * profile.mu_tilde[i].abs() / &two_n)
    };
    let (s_minus_pos, s_plus_pos): (Vec<usize>, Vec<usize>) = shared_pos
        .iter()
        .partition(|&&p| class.global_chores.contains(&small[p]) && large_for_someone(small[p]));

    let mut bundles = bags.to_vec();
    for (p, who) in holders.iter().enumerate() {
        match who.as_slice() {
            [] => {
                return Err(Error::Invariant(format!(
                    "small item {} has no holder",
                    small[p]
                )))
            }
            [only] => bundles[*only].push(small[p]),
            _ => {}
        }
    }
    for &p in &s_plus_pos {
        let j = small[p];
        let mut best = 0;
        for i in 1..n {
            if inst.value(i, j) > inst.value(best, j) {
                best = i;
            }
        }
        bundles[best].push(j);
    }
    let mut bundles = eliminate_envy_cycles(inst, &bundles);

    let mut sink = None;
    let mut sink_value = None;
    if !s_minus_pos.is_empty() {
        if !(0..n).any(|i| inst.total(i).is_positive()) {
            return Err(Error::Invariant(
                "large shared chores exist but no agent has a positive total".into(),
            ));
        }
        let graph = build_envy_graph(inst, &bundles);
        let t = (0..n)
            .find(|&i| graph[i].is_empty())
            .ok_or_else(|| Error::Invariant("envy graph has no sink".into()))?;
        let value = bundle_value(inst, t, &bundles[t]);
        let floor = if inst.total(t).is_positive() {
            Rational::one()
        } else {
            -Rational::one()
        };
        if value < floor {
            return Err(Error::Invariant(format!(
                "sink agent {t} holds {value}, below {floor}"
            )));
        }
        bundles[t].extend(s_minus_pos.iter().map(|&p| small[p]));
        sink = Some(t);
        sink_value = Some(value);
    }
    for b in &mut bundles {
        b.sort_unstable();
    }

    let pre: Vec<Rational> = (0..n)
        .map(|i| {
            bundle_value(inst, i, &bags[i])
                + (0..small.len())
                    .map(|p| inst.value(i, small[p]) * &x.x[i][p])
                    .sum::<Rational>()
        })
        .collect();
    let post: Vec<Rational> = (0..n).map(|i| bundle_value(inst, i, &bundles[i])).collect();
    let half = epsilon / Rational::from_integer(2.into());
    for i in 0..n {
        let allowed = if Some(i) == sink {
            half.clone()
        } else {
            &half * profile.mu_tilde[i].abs()
        };
        if &pre[i] - &post[i] > allowed {
            return Err(Error::Invariant(format!(
                "rounding cost agent {i} {}, more than {allowed}",
                &pre[i] - &post[i]
            )));
        }
    }
    let slack = if s_minus_pos.is_empty() {
        Rational::zero()
    } else {
        epsilon.clone()
    };
    let before: Rational = pre.iter().sum();
    let after: Rational = post.iter().sum();
    if after < &before - &slack {
        return Err(Error::Invariant(format!(
            "rounding dropped welfare from {before} to {after}"
        )));
    }
    Ok((
        bundles,
        RoundingTrace {
            shared: shared_pos.iter().map(|&p| small[p]).collect(),
            s_plus: s_plus_pos.iter().map(|&p| small[p]).collect(),
            s_minus_eps: s_minus_pos.iter().map(|&p| small[p]).collect(),
            sink,
            sink_value,
            pre_round_values: pre,
            post_round_values: post,
        },
    ))
}

// ---------------------------------------------------------------------------
// Pareto fix-up

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fixup {
    Unchanged,
    /// Agent `to` (positive total) also takes the bundle of `from` (negative total).
    Transfer {
        from: usize,
        to: usize,
    },
    /// Agents on the cycle take their successor's bundle.
    Rotate {
        cycle: Vec<usize>,
    },
}

/// Makes sure some agent with a positive total holds at least `alpha` whenever the
/// absolute values add up to less than `alpha`.
pub fn gamma_po_fixup(
    inst: &Instance,
    bundles: &[Vec<usize>],
    alpha: &Rational,
) -> Result<(Vec<Vec<usize>>, Fixup)> {
    let n = inst.n();
    let mut bundles = bundles.to_vec();
    let own: Vec<Rational> = (0..n).map(|i| bundle_value(inst, i, &bundles[i])).collect();
    let total_abs: Rational = own.iter().map(|v| v.abs()).sum();
    let positive: Vec<usize> = (0..n).filter(|&i| inst.total(i).is_positive()).collect();
    if total_abs >= *alpha || positive.is_empty() {
        return Ok((bundles, Fixup::Unchanged));
    }
    let one = Rational::one();
    for &i in &positive {
        for k in (0..n).filter(|k| !positive.contains(k)) {
            if bundle_value(inst, i, &bundles[k]) >= one {
                let moved = std::mem::take(&mut bundles[k]);
                bundles[i].extend(moved);
                bundles[i].sort_unstable();
                return Ok((bundles, Fixup::Transfer { from: k, to: i }));
            }
        }
    }
    // Graph on positive agents, in local indices.
    let graph: Vec<Vec<usize>> = positive
        .iter()
        .map(|&i| {
            if own[i] >= *alpha {
                return Vec::new();
            }
            (0..positive.len())
                .filter(|&q| {
                    positive[q] != i && bundle_value(inst, i, &bundles[positive[q]]) >= one
                })
                .collect()
        })
        .collect();
    let local = directed_cycle(&graph).ok_or_else(|| {
        Error::Invariant("Pareto fix-up found no cycle among positive agents".into())
    })?;
    let cycle: Vec<usize> = local.iter().map(|&q| positive[q]).collect();
    rotate(&mut bundles, &cycle);
    Ok((bundles, Fixup::Rotate { cycle }))
}

// ---------------------------------------------------------------------------
// Driver

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveReport {
    pub reduction: Reduction,
    pub profile: MmsProfile,
    /// Big items, as indices into the reduced instance.
    pub big: Vec<usize>,
    pub partition_rank: u64,
    /// Welfare of the chosen fractional allocation, in normalized values.
    pub fractional_welfare: Rational,
    pub trace: RoundingTrace,
    /// Normalized welfare after rounding and before the fix-up.
    pub rounded_welfare: Rational,
    pub fixup: Fixup,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub allocation: Allocation,
    /// Absent on the welfare-maximizing shortcut and when every agent is all-zero.
    pub report: Option<Box<SolveReport>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Found(Solution),
    NoAlphaMms,
}

struct Candidate {
    rank: u64,
    welfare: Rational,
    bags: Vec<Vec<usize>>,
    x: FractionalAllocation,
}

impl Candidate {
    /// Higher welfare wins; earlier partitions win ties.
    fn beats(&self, other: &Candidate) -> bool {
        self.welfare > other.welfare || (self.welfare == other.welfare && self.rank < other.rank)
    }
}

fn pick(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if b.beats(&a) { b } else { a }),
        (a, b) => a.or(b),
    }
}

struct Evaluator<'a> {
    inst: &'a Instance,
    requirement: Vec<Rational>,
    big: &'a [usize],
    small: &'a [usize],
    is_chore: Vec<bool>,
    small_values: Vec<Vec<Rational>>,
    /// `reach[i][d]`: the most agent `i` can still gain from big items `d..` and all small goods.
    reach: Vec<Vec<Rational>>,
}

impl<'a> Evaluator<'a> {
    fn new(
        inst: &'a Instance,
        requirement: Vec<Rational>,
        big: &'a [usize],
        small: &'a [usize],
        is_chore: Vec<bool>,
    ) -> Self {
        let n = inst.n();
        let small_values: Vec<Vec<Rational>> = (0..n)
            .map(|i| small.iter().map(|&j| inst.value(i, j).clone()).collect())
            .collect();
        let reach = (0..n)
            .map(|i| {
                let mut acc: Rational = small_values[i].iter().filter(|v| v.is_positive()).sum();
                let mut col = vec![acc.clone()];
                for &j in big.iter().rev() {
                    if inst.value(i, j).is_positive() {
                        acc += inst.value(i, j);
                    }
                    col.push(acc.clone());
                }
                col.reverse();
                col
            })
            .collect();
        Self {
            inst,
            requirement,
            big,
            small,
            is_chore,
            small_values,
            reach,
        }
    }

    fn spec(&self, c: Vec<Rational>) -> SmallLpSpec {
        SmallLpSpec {
            values: self.small_values.clone(),
            is_chore: self.is_chore.clone(),
            c,
        }
    }

    /// False once some agent cannot reach its requirement whatever happens next.
    fn viable(&self, values: &[Rational], depth: usize) -> bool {
        (0..values.len()).all(|i| &values[i] + &self.reach[i][depth] >= self.requirement[i])
    }

    fn evaluate(&self, digits: &[usize], big_values: &[Rational]) -> Result<Option<Candidate>> {
        let n = self.inst.n();
        let rank = digits.iter().fold(0u64, |r, &d| r * n as u64 + d as u64);
        let mut bags = vec![Vec::new(); n];
        for (&d, &j) in digits.iter().zip(self.big) {
            bags[d].push(j);
        }
        let c = self
            .requirement
            .iter()
            .zip(big_values)
            .map(|(req, got)| req - got)
            .collect();
        let spec = self.spec(c);
        let mut x = match solve_small_lp(&spec)? {
            LpOutcome::Infeasible => return Ok(None),
            LpOutcome::Optimal(x) => x,
        };
        // Goods the LP left partly unassigned go to an agent valuing them most.
        for (p, total) in share_totals(&x, self.small.len()).into_iter().enumerate() {
            if !self.is_chore[p] && total < Rational::one() {
                let i = argmax_agent(&self.small_values, p);
                x.x[i][p] += Rational::one() - total;
            }
        }
        let welfare = big_values.iter().sum::<Rational>()
            + (0..n)
                .flat_map(|i| (0..self.small.len()).map(move |p| (i, p)))
                .map(|(i, p)| &self.small_values[i][p] * &x.x[i][p])
                .sum::<Rational>();
        Ok(Some(Candidate {
            rank,
            welfare,
            bags,
            x,
        }))
    }

    /// Depth-first over big-item owners in rank order, skipping hopeless branches.
    fn search(
        &self,
        digits: &mut Vec<usize>,
        values: &mut [Rational],
        best: &mut Option<Candidate>,
    ) -> Result<()> {
        let depth = digits.len();
        if depth == self.big.len() {
            let found = self.evaluate(digits, values)?;
            *best = pick(best.take(), found);
            return Ok(());
        }
        let j = self.big[depth];
        for d in 0..values.len() {
            values[d] += self.inst.value(d, j);
            if self.viable(values, depth + 1) {
                digits.push(d);
                self.search(digits, values, best)?;
                digits.pop();
            }
            values[d] -= self.inst.value(d, j);
        }
        Ok(())
    }

    fn start(&self, prefix: &[usize]) -> Result<Option<Candidate>> {
        let mut values = vec![Rational::zero(); self.inst.n()];
        for (&d, &j) in prefix.iter().zip(self.big) {
            values[d] += self.inst.value(d, j);
        }
        let mut best = None;
        if self.viable(&values, prefix.len()) {
            self.search(&mut prefix.to_vec(), &mut values, &mut best)?;
        }
        Ok(best)
    }
}

fn best_candidate(eval: &Evaluator<'_>, threads: usize) -> Result<Option<Candidate>> {
    if threads <= 1 {
        return eval.start(&[]);
    }
    let n = eval.inst.n();
    let mut depth = 0;
    while depth < eval.big.len() && n.pow(depth as u32) < 8 * threads {
        depth += 1;
    }
    let prefixes: Vec<Vec<usize>> = (0..n.pow(depth as u32) as u64)
        .map(|r| decode(r, n, depth))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Param(format!("cannot start {threads} threads: {e}")))?;
    pool.install(|| {
        prefixes
            .par_iter()
            .map(|p| eval.start(p))
            .try_reduce(|| None, |a, b| Ok(pick(a, b)))
    })
}

/// Finds an (alpha - eps)-MMS allocation that is gamma-Pareto optimal, or
/// reports that no alpha-MMS allocation exists.
pub fn solve_alpha_mms_po(inst: &Instance, params: &SolverParams) -> Result<Outcome> {
    params.validate()?;
    if let Some(tau) = &params.tau {
        let violators: Vec<usize> = check_tau_condition(inst, tau)
            .iter()
            .enumerate()
            .filter(|(_, ok)| !**ok)
            .map(|(i, _)| i)
            .collect();
        if !violators.is_empty() {
            return Err(Error::TauViolation { agents: violators });
        }
    }
    let reduction = match preprocess(inst, params)? {
        Preprocessed::Trivial => {
            return Ok(Outcome::Found(Solution {
                allocation: welfare_max_allocation(inst),
                report: None,
            }))
        }
        Preprocessed::Settled(allocation) => {
            return Ok(Outcome::Found(Solution {
                allocation,
                report: None,
            }))
        }
        Preprocessed::Reduced(r) => r,
    };
    let red = &reduction.instance;
    let n = red.n();
    let epsilon = &reduction.epsilon;
    let profile = compute_mms_profile(red, epsilon, params.big_budget)?;
    let sizes = classify_big(red, &profile, epsilon);
    check_budget(n, sizes.big.len(), params.big_budget).map_err(|e| match e {
        Error::Budget { required, budget } => Error::Budget {
            required: format!("{required} partitions of {} big items", sizes.big.len()),
            budget,
        },
        other => other,
    })?;
    let class = classify_items(red);
    let requirement: Vec<Rational> = profile
        .mu_tilde
        .iter()
        .map(|mu| (mu / &params.alpha).min(mu * &params.alpha))
        .collect();
    let eval = Evaluator::new(
        red,
        requirement,
        &sizes.big,
        &sizes.small,
        sizes
            .small
            .iter()
            .map(|j| class.global_chores.contains(j))
            .collect(),
    );
    let Some(best) = best_candidate(&eval, params.threads)? else {
        return Ok(Outcome::NoAlphaMms);
    };

    let spec = eval.spec(vec![Rational::zero(); n]);
    let acyclic = acyclify(&spec, &best.x)?;
    let (rounded, trace) =
        round_fractional(red, &best.bags, &sizes.small, &acyclic, &profile, epsilon)?;
    let rounded_welfare: Rational = (0..n).map(|i| bundle_value(red, i, &rounded[i])).sum();
    let (fixed, fixup) = gamma_po_fixup(red, &rounded, &params.alpha)?;

    let mut bundles = vec![Vec::new(); inst.n()];
    for (r, bundle) in fixed.iter().enumerate() {
        bundles[reduction.agents[r]] = bundle.iter().map(|&j| reduction.items[j]).collect();
    }
    for &(j, i) in &reduction.absorbed {
        bundles[i].push(j);
    }
    let allocation = Allocation::new(bundles, inst.m())?;
    Ok(Outcome::Found(Solution {
        allocation,
        report: Some(Box::new(SolveReport {
            big: sizes.big.clone(),
            partition_rank: best.rank,
            fractional_welfare: best.welfare,
            trace,
            rounded_welfare,
            fixup,
            profile,
            reduction,
        })),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::satisfies_alpha_mms;
    use crate::oracle::{exact_alpha_star, exact_mms, is_gamma_po};
    use crate::rational::{frac, int};
    use proptest::prelude::*;

    const BUDGET: u64 = 20_000_000;

    fn inst(rows: &[&[i64]]) -> Instance {
        Instance::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&v| int(v)).collect())
                .collect(),
        )
        .unwrap()
    }

    fn params(alpha: Rational) -> SolverParams {
        SolverParams::new(alpha, frac(1, 10), frac(1, 10))
    }

    fn mms_of(inst: &Instance) -> Vec<Rational> {
        (0..inst.n())
            .map(|i| exact_mms(inst.row(i), inst.n(), BUDGET).unwrap().0)
            .collect()
    }

    fn ints(rows: &[&[i64]]) -> Vec<Vec<Rational>> {
        rows.iter()
            .map(|r| r.iter().map(|&v| int(v)).collect())
            .collect()
    }

    #[test]
    fn reduced_epsilon_caps_by_gamma() {
        let p = SolverParams::new(int(1), frac(1, 2), int(1));
        assert_eq!(reduced_epsilon(&p), frac(1, 2));
        let p = SolverParams::new(frac(1, 2), frac(1, 2), int(1));
        assert_eq!(reduced_epsilon(&p), frac(1, 4));
    }

    #[test]
    fn bad_params_are_rejected() {
        let i = inst(&[&[1, 2]]);
        for p in [
            SolverParams::new(int(0), frac(1, 10), int(1)),
            SolverParams::new(int(2), frac(1, 10), int(1)),
            SolverParams::new(int(1), int(0), int(1)),
            SolverParams::new(int(1), frac(1, 10), int(0)),
        ] {
            assert!(matches!(solve_alpha_mms_po(&i, &p), Err(Error::Param(_))));
        }
    }

    #[test]
    fn small_alpha_takes_the_welfare_maximum() {
        let i = inst(&[&[3, -1, 2], &[1, -2, 5]]);
        let p = SolverParams::new(frac(1, 20), frac(1, 10), int(1));
        assert_eq!(preprocess(&i, &p).unwrap(), Preprocessed::Trivial);
        let Outcome::Found(s) = solve_alpha_mms_po(&i, &p).unwrap() else {
            panic!()
        };
        assert_eq!(s.allocation, welfare_max_allocation(&i));
        assert!(s.report.is_none());
    }

    #[test]
    fn zero_agents_absorb_common_chores() {
        let i = inst(&[&[4, -1, -2], &[0, 0, 0], &[3, 1, -1]]);
        let Preprocessed::Reduced(r) = preprocess(&i, &params(int(1))).unwrap() else {
            panic!()
        };
        assert_eq!(r.agents, vec![0, 2]);
        assert_eq!(r.items, vec![0, 1]);
        assert_eq!(r.absorbed, vec![(2, 1)]);
        for a in 0..2 {
            assert_eq!(r.instance.total(a).abs(), int(2));
        }
        let all_zero = inst(&[&[0, 0], &[0, 0]]);
        let Preprocessed::Settled(a) = preprocess(&all_zero, &params(int(1))).unwrap() else {
            panic!()
        };
        assert_eq!(a.bundles(), &[vec![0, 1], vec![]]);
    }

    #[test]
    fn unbalanced_agents_violate_tau() {
        let i = inst(&[&[1, -1], &[1, 1]]);
        assert_eq!(
            solve_alpha_mms_po(&i, &params(int(1))),
            Err(Error::TauViolation { agents: vec![0] })
        );
    }

    #[test]
    fn acyclify_breaks_a_two_agent_cycle() {
        let spec = SmallLpSpec {
            values: ints(&[&[2, 1], &[1, 3]]),
            is_chore: vec![false, false],
            c: vec![int(0), int(0)],
        };
        let half = frac(1, 2);
        let x = FractionalAllocation {
            x: vec![vec![half.clone(), half.clone()], vec![half.clone(), half]],
        };
        let y = acyclify(&spec, &x).unwrap();
        assert!(allocation_cycle(&y.x, 2, 2).is_none());
        for i in 0..2 {
            let before: Rational = (0..2).map(|j| &spec.values[i][j] * &x.x[i][j]).sum();
            let after: Rational = (0..2).map(|j| &spec.values[i][j] * &y.x[i][j]).sum();
            assert!(after >= before);
        }
        assert_eq!(share_totals(&y, 2), vec![int(1), int(1)]);
    }

    #[test]
    fn acyclify_moves_disputed_shares_to_the_agent_who_likes_them() {
        let spec = SmallLpSpec {
            values: ints(&[&[1, -1], &[-1, 1]]),
            is_chore: vec![false, false],
            c: vec![int(0), int(0)],
        };
        let half = frac(1, 2);
        let x = FractionalAllocation {
            x: vec![vec![half.clone(), half.clone()], vec![half.clone(), half]],
        };
        let y = acyclify(&spec, &x).unwrap();
        assert_eq!((&y.x[0][0], &y.x[1][0]), (&int(1), &int(0)));
        assert!(allocation_cycle(&y.x, 2, 2).is_none());
    }

    #[test]
    fn envy_cycles_are_rotated_away() {
        let i = inst(&[&[1, 5], &[5, 1]]);
        let out = eliminate_envy_cycles(&i, &[vec![0], vec![1]]);
        assert_eq!(out, vec![vec![1], vec![0]]);
        assert!(build_envy_graph(&i, &out).iter().all(Vec::is_empty));
    }

    #[test]
    fn fixup_rotates_when_everyone_is_poor() {
        // Normalized: totals 2 each; both hold the item the other wants.
        let i = inst(&[&[0, 2], &[2, 0]]);
        let (b, f) = gamma_po_fixup(&i, &[vec![0], vec![1]], &int(1)).unwrap();
        assert_eq!(b, vec![vec![1], vec![0]]);
        assert_eq!(f, Fixup::Rotate { cycle: vec![0, 1] });
        let (b, f) = gamma_po_fixup(&i, &[vec![1], vec![0]], &int(1)).unwrap();
        assert_eq!(b, vec![vec![1], vec![0]]);
        assert_eq!(f, Fixup::Unchanged);
    }

    #[test]
    fn fixup_transfers_from_a_negative_agent() {
        let i = inst(&[&[2, 0], &[0, -2]]);
        let (b, f) = gamma_po_fixup(&i, &[vec![1], vec![0]], &int(1)).unwrap();
        assert_eq!(b, vec![vec![0, 1], vec![]]);
        assert_eq!(f, Fixup::Transfer { from: 1, to: 0 });
    }

    #[test]
    fn nonexistence_instance_has_no_full_mms() {
        let i = crate::generate::gen_nonexistence();
        let p = SolverParams {
            tau: Some(frac(1, 100_000_000)),
            ..params(frac(1, 2))
        };
        let out = solve_alpha_mms_po(&i, &p);
        assert!(matches!(out, Ok(Outcome::NoAlphaMms)), "{out:?}");
    }

    #[test]
    fn threads_do_not_change_the_answer() {
        let i = inst(&[&[5, -2, 3, 1, -1], &[2, -3, 4, 4, -2], &[1, -1, 6, 2, -1]]);
        let one = solve_alpha_mms_po(&i, &params(frac(3, 4))).unwrap();
        let four = solve_alpha_mms_po(
            &i,
            &SolverParams {
                threads: 4,
                ..params(frac(3, 4))
            },
        )
        .unwrap();
        assert_eq!(one, four);
    }

    fn instance_strategy() -> impl Strategy<Value = Instance> {
        (2usize..=3, 2usize..=6, any::<u64>())
            .prop_filter_map("generation failed", |(n, m, seed)| {
                crate::generate::gen_random(n, m, -12, 12, &frac(1, 4), seed).ok()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn solutions_are_sound_and_pareto(i in instance_strategy(), alpha_q in 2i64..=4) {
            let alpha = frac(alpha_q, 4);
            let p = SolverParams { tau: Some(frac(1, 4)), ..params(alpha.clone()) };
            let mms = mms_of(&i);
            match solve_alpha_mms_po(&i, &p).unwrap() {
                Outcome::Found(s) => {
                    let weaker = &alpha - &p.epsilon;
                    prop_assert!(satisfies_alpha_mms(&i, &s.allocation, &mms, &weaker).unwrap());
                    prop_assert!(is_gamma_po(&i, &s.allocation, &p.gamma, BUDGET).unwrap());
                }
                Outcome::NoAlphaMms => {
                    let star = exact_alpha_star(&i, &mms, BUDGET).unwrap();
                    prop_assert!(star < alpha);
                }
            }
        }
    }
}
