//! Instances, allocations and the definitional predicates over them.

use std::collections::HashSet;

use num_traits::{Signed, Zero};
use serde_json::{json, Value};

use crate::error::{Error, FormatError, Result};
use crate::rational::{format_rational, parse_rational, ParseRationalError, Rational};

/// `n` agents with additive valuations over `m` labeled items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    item_labels: Vec<String>,
    values: Vec<Vec<Rational>>,
}

impl Instance {
    pub fn new(item_labels: Vec<String>, values: Vec<Vec<Rational>>) -> Result<Self, FormatError> {
        if values.is_empty() {
            return Err(FormatError::NoAgents);
        }
        let m = item_labels.len();
        for (row, entries) in values.iter().enumerate() {
            if entries.len() != m {
                return Err(FormatError::Ragged {
                    row,
                    expected: m,
                    found: entries.len(),
                });
            }
        }
        let mut seen = HashSet::new();
        for label in &item_labels {
            if !seen.insert(label.as_str()) {
                return Err(FormatError::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self {
            item_labels,
            values,
        })
    }

    /// Instance with items labeled `"0"`, `"1"`, ...
    pub fn from_rows(values: Vec<Vec<Rational>>) -> Result<Self, FormatError> {
        let m = values.first().map_or(0, Vec::len);
        Self::new((0..m).map(|j| j.to_string()).collect(), values)
    }

    /// Every agent shares the same valuation row.
    pub fn identical(n: usize, row: Vec<Rational>) -> Self {
        Self::from_rows(vec![row; n.max(1)]).expect("identical rows are rectangular")
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn m(&self) -> usize {
        self.item_labels.len()
    }

    pub fn item_labels(&self) -> &[String] {
        &self.item_labels
    }

    pub fn values(&self) -> &[Vec<Rational>] {
        &self.values
    }

    pub fn row(&self, agent: usize) -> &[Rational] {
        &self.values[agent]
    }

    pub fn value(&self, agent: usize, item: usize) -> &Rational {
        &self.values[agent][item]
    }

    pub fn total(&self, agent: usize) -> Rational {
        self.values[agent].iter().sum()
    }

    pub fn item_index(&self, label: &str) -> Option<usize> {
        self.item_labels.iter().position(|l| l == label)
    }

    /// Multiplies row `i` by `factors[i]`.
    pub fn scaled(&self, factors: &[Rational]) -> Self {
        let values = self
            .values
            .iter()
            .zip(factors)
            .map(|(row, c)| row.iter().map(|v| v * c).collect())
            .collect();
        Self {
            item_labels: self.item_labels.clone(),
            values,
        }
    }

    /// Keeps the listed agents and items, in the given order.
    pub fn restrict(&self, agents: &[usize], items: &[usize]) -> Self {
        let item_labels = items.iter().map(|&j| self.item_labels[j].clone()).collect();
        let values = agents
            .iter()
            .map(|&i| items.iter().map(|&j| self.values[i][j].clone()).collect())
            .collect();
        Self {
            item_labels,
            values,
        }
    }

    pub fn bundle_value(&self, agent: usize, bundle: &[usize]) -> Result<Rational> {
        if agent >= self.n() {
            return Err(Error::Dimension(format!(
                "agent {agent} out of range for {} agents",
                self.n()
            )));
        }
        let row = &self.values[agent];
        bundle.iter().try_fold(Rational::zero(), |acc, &j| {
            row.get(j).map(|v| acc + v).ok_or_else(|| {
                Error::Dimension(format!("item {j} out of range for {} items", row.len()))
            })
        })
    }

    /// Own-bundle value of every agent.
    pub fn own_values(&self, alloc: &Allocation) -> Vec<Rational> {
        alloc
            .bundles()
            .iter()
            .enumerate()
            .map(|(i, bundle)| bundle.iter().map(|&j| &self.values[i][j]).sum())
            .collect()
    }
}

/// Integral partition of all items into one bundle per agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Allocation {
    bundles: Vec<Vec<usize>>,
}

impl Allocation {
    /// Checks that `bundles` partition `0..m`; items are kept sorted.
    pub fn new(mut bundles: Vec<Vec<usize>>, m: usize) -> Result<Self> {
        let mut owner = vec![false; m];
        for bundle in &mut bundles {
            bundle.sort_unstable();
            for &j in bundle.iter() {
                if j >= m {
                    return Err(Error::Dimension(format!(
                        "item {j} out of range for {m} items"
                    )));
                }
                if std::mem::replace(&mut owner[j], true) {
                    return Err(FormatError::Duplicated(j.to_string()).into());
                }
            }
        }
        if let Some(j) = owner.iter().position(|&taken| !taken) {
            return Err(FormatError::Missing(j.to_string()).into());
        }
        Ok(Self { bundles })
    }

    /// `owner[j]` is the bundle receiving item `j`.
    pub fn from_owners(owner: &[usize], n: usize) -> Self {
        let mut bundles = vec![Vec::new(); n];
        for (j, &i) in owner.iter().enumerate() {
            bundles[i].push(j);
        }
        Self { bundles }
    }

    pub fn n(&self) -> usize {
        self.bundles.len()
    }

    pub fn bundles(&self) -> &[Vec<usize>] {
        &self.bundles
    }

    pub fn bundle(&self, agent: usize) -> &[usize] {
        &self.bundles[agent]
    }

    pub fn owners(&self, m: usize) -> Vec<usize> {
        let mut owner = vec![0; m];
        for (i, bundle) in self.bundles.iter().enumerate() {
            for &j in bundle {
                owner[j] = i;
            }
        }
        owner
    }

    pub(crate) fn from_bundles_unchecked(mut bundles: Vec<Vec<usize>>) -> Self {
        for bundle in &mut bundles {
            bundle.sort_unstable();
        }
        Self { bundles }
    }
}

/// Sign split of the items, per agent and globally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemClassification {
    pub goods_of: Vec<Vec<usize>>,
    pub chores_of: Vec<Vec<usize>>,
    /// Items some agent values non-negatively.
    pub global_goods: Vec<usize>,
    /// Items every agent values negatively.
    pub global_chores: Vec<usize>,
    pub v_plus: Vec<Rational>,
    pub v_minus: Vec<Rational>,
}

/// Zero-valued items count as goods.
pub fn classify_items(inst: &Instance) -> ItemClassification {
    let n = inst.n();
    let mut goods_of = vec![Vec::new(); n];
    let mut chores_of = vec![Vec::new(); n];
    let mut v_plus = vec![Rational::zero(); n];
    let mut v_minus = vec![Rational::zero(); n];
    for i in 0..n {
        for (j, v) in inst.row(i).iter().enumerate() {
            if v.is_negative() {
                chores_of[i].push(j);
                v_minus[i] -= v;
            } else {
                goods_of[i].push(j);
                v_plus[i] += v;
            }
        }
    }
    let (global_chores, global_goods): (Vec<usize>, Vec<usize>) =
        (0..inst.m()).partition(|&j| (0..n).all(|i| inst.value(i, j).is_negative()));
    ItemClassification {
        goods_of,
        chores_of,
        global_goods,
        global_chores,
        v_plus,
        v_minus,
    }
}

/// Rescales each agent so that `|v_i(M)| = n`; returns the instance and the factors.
pub fn normalize(inst: &Instance) -> Result<(Instance, Vec<Rational>)> {
    let n = Rational::from_integer(inst.n().into());
    let mut scales = Vec::with_capacity(inst.n());
    for i in 0..inst.n() {
        let total = inst.total(i);
        if total.is_zero() {
            return Err(Error::ZeroTotal { agent: i });
        }
        scales.push(&n / total.abs());
    }
    Ok((inst.scaled(&scales), scales))
}

/// Entry `i` holds iff `|v_i(M)| >= tau * min(v_i^+, v_i^-)`.
pub fn check_tau_condition(inst: &Instance, tau: &Rational) -> Vec<bool> {
    let class = classify_items(inst);
    (0..inst.n())
        .map(|i| {
            let smaller = class.v_plus[i].clone().min(class.v_minus[i].clone());
            inst.total(i).abs() >= tau * smaller
        })
        .collect()
}

/// `min(alpha * mms, mms / alpha)`, the value an alpha-MMS bundle must reach.
pub fn alpha_mms_threshold(mms: &Rational, alpha: &Rational) -> Rational {
    if mms.is_negative() {
        mms / alpha
    } else {
        mms * alpha
    }
}

pub fn satisfies_alpha_mms(
    inst: &Instance,
    alloc: &Allocation,
    mms: &[Rational],
    alpha: &Rational,
) -> Result<bool> {
    if mms.len() != inst.n() || alloc.n() != inst.n() {
        return Err(Error::Dimension(format!(
            "{} agents, {} MMS values, {} bundles",
            inst.n(),
            mms.len(),
            alloc.n()
        )));
    }
    if !alpha.is_positive() {
        return Ok(true);
    }
    Ok(inst
        .own_values(alloc)
        .iter()
        .zip(mms)
        .all(|(value, mu)| *value >= alpha_mms_threshold(mu, alpha)))
}

pub fn welfare(inst: &Instance, alloc: &Allocation) -> Rational {
    inst.own_values(alloc).into_iter().sum()
}

// ---------------------------------------------------------------------------
// JSON documents

pub fn parse_instance(text: &str) -> Result<Instance, FormatError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| FormatError::Json(e.to_string()))?;
    let agents = doc
        .get("agents")
        .and_then(Value::as_u64)
        .ok_or(FormatError::Field("agents"))? as usize;
    if agents == 0 {
        return Err(FormatError::NoAgents);
    }
    let items = doc
        .get("items")
        .and_then(Value::as_array)
        .ok_or(FormatError::Field("items"))?;
    let labels = items
        .iter()
        .map(|v| {
            v.as_str()
                .map(str::to_owned)
                .ok_or(FormatError::Field("items"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rows = doc
        .get("values")
        .and_then(Value::as_array)
        .ok_or(FormatError::Field("values"))?;
    if rows.len() != agents {
        return Err(FormatError::RowCount {
            declared: agents,
            rows: rows.len(),
        });
    }
    let mut values = Vec::with_capacity(agents);
    for (row, entries) in rows.iter().enumerate() {
        let entries = entries.as_array().ok_or(FormatError::Field("values"))?;
        if entries.len() != labels.len() {
            return Err(FormatError::Ragged {
                row,
                expected: labels.len(),
                found: entries.len(),
            });
        }
        let parsed = entries
            .iter()
            .enumerate()
            .map(|(col, v)| parse_value(v, row, col))
            .collect::<Result<Vec<_>, _>>()?;
        values.push(parsed);
    }
    Instance::new(labels, values)
}

fn parse_value(v: &Value, row: usize, col: usize) -> Result<Rational, FormatError> {
    let bad = |text: String| FormatError::BadValue { row, col, text };
    let text = match v {
        Value::String(s) => s.clone(),
        // Non-integer JSON numbers have already been through binary floating point.
        Value::Number(num) if num.is_i64() || num.is_u64() => num.to_string(),
        other => return Err(bad(other.to_string())),
    };
    parse_rational(&text).map_err(|e| match e {
        ParseRationalError::ZeroDenominator => FormatError::ZeroDenominator { row, col },
        ParseRationalError::Syntax => bad(text.clone()),
    })
}

pub fn instance_to_json(inst: &Instance) -> Value {
    let values: Vec<Vec<String>> = inst
        .values()
        .iter()
        .map(|row| row.iter().map(format_rational).collect())
        .collect();
    json!({
        "agents": inst.n(),
        "items": inst.item_labels(),
        "values": values,
    })
}

pub fn serialize_instance(inst: &Instance) -> String {
    instance_to_json(inst).to_string()
}

pub fn allocation_to_json(inst: &Instance, alloc: &Allocation) -> Value {
    let bundles: Vec<Vec<&str>> = alloc
        .bundles()
        .iter()
        .map(|b| b.iter().map(|&j| inst.item_labels()[j].as_str()).collect())
        .collect();
    json!({ "bundles": bundles })
}

pub fn serialize_allocation(inst: &Instance, alloc: &Allocation) -> String {
    allocation_to_json(inst, alloc).to_string()
}

/// Reads `{"bundles": [[label, ...], ...]}` against the item labels of `inst`.
pub fn parse_allocation(inst: &Instance, text: &str) -> Result<Allocation, FormatError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| FormatError::Json(e.to_string()))?;
    let bundles = doc
        .get("bundles")
        .and_then(Value::as_array)
        .ok_or(FormatError::Field("bundles"))?;
    if bundles.len() != inst.n() {
        return Err(FormatError::BundleCount {
            expected: inst.n(),
            found: bundles.len(),
        });
    }
    let mut owner: Vec<Option<usize>> = vec![None; inst.m()];
    let mut out = vec![Vec::new(); inst.n()];
    for (i, bundle) in bundles.iter().enumerate() {
        for label in bundle.as_array().ok_or(FormatError::Field("bundles"))? {
            let label = label.as_str().ok_or(FormatError::Field("bundles"))?;
            let j = inst
                .item_index(label)
                .ok_or_else(|| FormatError::UnknownLabel(label.to_owned()))?;
            if owner[j].replace(i).is_some() {
                return Err(FormatError::Duplicated(label.to_owned()));
            }
            out[i].push(j);
        }
    }
    if let Some(j) = owner.iter().position(Option::is_none) {
        return Err(FormatError::Missing(inst.item_labels()[j].clone()));
    }
    Ok(Allocation::from_bundles_unchecked(out))
}
