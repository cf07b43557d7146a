//! Ranked-list comparison metrics.
//!
//! [`rds`] is the Ranking Distance Score: over the union of both lists, a
//! shared item contributes the absolute difference of its log-discounted
//! positions, and an item found in only one list contributes a length-dependent
//! penalty plus its own discounted position. Raw scores are normalized by
//! [`rds_max`], the score two fully disjoint lists of the same lengths would get.
//!
//! The baseline correlations ([`kendall_tau`], [`tau_ap`], [`spearman_rho`]) only
//! look at the items the two lists have in common, which is exactly why they
//! miss differences in the tail. [`with_appended_missing`] builds the
//! "append what's missing" variant that is sometimes proposed as a workaround.

use std::borrow::Borrow;
use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{invalid, Result};

/// Opaque item identifier.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(String);

impl ItemId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for ItemId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for ItemId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for ItemId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

impl From<u32> for ItemId {
    fn from(n: u32) -> Self {
        Self(n.to_string())
    }
}

/// A non-empty ordered list of distinct items; the item at index `j` has rank `j + 1`.
#[derive(Clone, Debug)]
pub struct RankedList {
    items: Vec<ItemId>,
    ranks: HashMap<ItemId, usize>,
}

impl PartialEq for RankedList {
    fn eq(&self, other: &Self) -> bool {
        self.items == other.items
    }
}

impl Eq for RankedList {}

impl RankedList {
    pub fn new<I, T>(items: I) -> Result<Self>
    where
        I: IntoIterator<Item = T>,
        T: Into<ItemId>,
    {
        let items: Vec<ItemId> = items.into_iter().map(Into::into).collect();
        if items.is_empty() {
            return Err(invalid("ranked list must contain at least one item"));
        }
        let mut ranks = HashMap::with_capacity(items.len());
        for (idx, item) in items.iter().enumerate() {
            if ranks.insert(item.clone(), idx + 1).is_some() {
                return Err(invalid(format!("duplicate item {item} in ranked list")));
            }
        }
        Ok(Self { items, ranks })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    /// Always false; kept for API symmetry with slices.
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    /// 1-based rank of `item`, if present.
    pub fn rank_of(&self, item: &str) -> Option<usize> {
        self.ranks.get(item).copied()
    }

    pub fn contains(&self, item: &str) -> bool {
        self.ranks.contains_key(item)
    }

    /// Keeps the top `len` items.
    pub fn truncated(&self, len: usize) -> Result<Self> {
        Self::new(self.items.iter().take(len).cloned())
    }
}

impl fmt::Display for RankedList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<")?;
        for (i, item) in self.items.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{item}")?;
        }
        f.write_str(">")
    }
}

/// Raw and normalized RDS for one pair of lists.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdsResult {
    pub raw: f64,
    /// Score of two disjoint lists with the same lengths.
    pub max_possible: f64,
    /// `raw / max_possible`, in `[0, 1]`.
    pub normalized: f64,
    /// `1 - normalized`.
    pub similarity: f64,
}

impl RdsResult {
    fn from_parts(raw: f64, max_possible: f64) -> Self {
        let normalized = (raw / max_possible).clamp(0.0, 1.0);
        Self {
            raw,
            max_possible,
            normalized,
            similarity: 1.0 - normalized,
        }
    }
}

/// Value of a correlation-style metric plus the number of items it was computed over.
///
/// `value` is `None` when the metric is undefined (fewer than two common items).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricOutcome {
    pub value: Option<f64>,
    pub support: usize,
}

impl MetricOutcome {
    fn undefined(support: usize) -> Self {
        Self {
            value: None,
            support,
        }
    }

    pub fn is_defined(&self) -> bool {
        self.value.is_some()
    }
}

#[inline]
fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

/// Contribution of an item at `rank` in a list of length `len` that is absent from the other list.
#[inline]
fn missing_term(rank: usize, len: usize) -> f64 {
    (discount(1) - discount(len)).abs() + discount(rank)
}

#[inline]
fn shared_term(rank_a: usize, rank_b: usize) -> f64 {
    (discount(rank_a) - discount(rank_b)).abs()
}

// Terms are summed in ascending order so the total does not depend on which
// list is iterated first.
fn sum_terms(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

/// Unnormalized RDS between two lists. Symmetric; zero iff the lists are identical.
pub fn rds_raw(a: &RankedList, b: &RankedList) -> f64 {
    let mut terms = Vec::with_capacity(a.len() + b.len());
    for (idx, item) in a.items.iter().enumerate() {
        let rank_a = idx + 1;
        terms.push(match b.rank_of(item.as_str()) {
            Some(rank_b) => shared_term(rank_a, rank_b),
            None => missing_term(rank_a, a.len()),
        });
    }
    for (idx, item) in b.items.iter().enumerate() {
        if !a.contains(item.as_str()) {
            terms.push(missing_term(idx + 1, b.len()));
        }
    }
    sum_terms(terms)
}

/// RDS of two fully disjoint lists with lengths `len_a` and `len_b`.
///
/// This upper-bounds [`rds_raw`] for every pair of lists with those lengths.
pub fn rds_max(len_a: usize, len_b: usize) -> Result<f64> {
    if len_a == 0 || len_b == 0 {
        return Err(invalid("list lengths must be positive"));
    }
    let terms = (1..=len_a)
        .map(|rank| missing_term(rank, len_a))
        .chain((1..=len_b).map(|rank| missing_term(rank, len_b)))
        .collect();
    Ok(sum_terms(terms))
}

/// RDS normalized to `[0, 1]` by [`rds_max`].
pub fn rds(a: &RankedList, b: &RankedList) -> RdsResult {
    let raw = rds_raw(a, b);
    // Both lists are non-empty by construction.
    let max = rds_max(a.len(), b.len()).expect("ranked lists are non-empty");
    RdsResult::from_parts(raw, max)
}

/// Items of `a` that also occur in `b`, in `a`'s order.
fn common_in_order<'a>(a: &'a RankedList, b: &RankedList) -> Vec<&'a ItemId> {
    a.items
        .iter()
        .filter(|it| b.contains(it.as_str()))
        .collect()
}

/// Kendall's tau over the items common to both lists.
pub fn kendall_tau(a: &RankedList, b: &RankedList) -> MetricOutcome {
    let common = common_in_order(a, b);
    let k = common.len();
    if k < 2 {
        return MetricOutcome::undefined(k);
    }
    let b_ranks: Vec<usize> = common
        .iter()
        .map(|it| b.rank_of(it.as_str()).unwrap())
        .collect();
    let mut balance: i64 = 0;
    for i in 0..k {
        for j in (i + 1)..k {
            balance += if b_ranks[i] < b_ranks[j] { 1 } else { -1 };
        }
    }
    let pairs = (k * (k - 1) / 2) as f64;
    MetricOutcome {
        value: Some(balance as f64 / pairs),
        support: k,
    }
}

/// AP rank correlation of `other` against `reference`, over their common items.
///
/// Asymmetric: errors near the top of `other` cost more. See [`tau_ap_symmetric`].
pub fn tau_ap(reference: &RankedList, other: &RankedList) -> MetricOutcome {
    let ordered = common_in_order(other, reference);
    let k = ordered.len();
    if k < 2 {
        return MetricOutcome::undefined(k);
    }
    let ref_ranks: Vec<usize> = ordered
        .iter()
        .map(|it| reference.rank_of(it.as_str()).unwrap())
        .collect();
    let mut acc = 0.0;
    for i in 1..k {
        let correct = ref_ranks[..i]
            .iter()
            .filter(|&&above| above < ref_ranks[i])
            .count();
        acc += correct as f64 / i as f64;
    }
    MetricOutcome {
        value: Some(2.0 / (k - 1) as f64 * acc - 1.0),
        support: k,
    }
}

/// Mean of [`tau_ap`] taken in both directions.
pub fn tau_ap_symmetric(a: &RankedList, b: &RankedList) -> MetricOutcome {
    let ab = tau_ap(a, b);
    let ba = tau_ap(b, a);
    MetricOutcome {
        value: ab.value.zip(ba.value).map(|(x, y)| 0.5 * (x + y)),
        support: ab.support,
    }
}

/// Spearman's rho over the common items, re-ranked within the intersection.
pub fn spearman_rho(a: &RankedList, b: &RankedList) -> MetricOutcome {
    let in_a = common_in_order(a, b);
    let k = in_a.len();
    if k < 2 {
        return MetricOutcome::undefined(k);
    }
    let in_b = common_in_order(b, a);
    let rank_in_b: HashMap<&str, usize> = in_b
        .iter()
        .enumerate()
        .map(|(idx, it)| (it.as_str(), idx))
        .collect();
    let sum_sq: i64 = in_a
        .iter()
        .enumerate()
        .map(|(idx, it)| {
            let d = idx as i64 - rank_in_b[it.as_str()] as i64;
            d * d
        })
        .sum();
    let k = k as f64;
    MetricOutcome {
        value: Some(1.0 - 6.0 * sum_sq as f64 / (k * (k * k - 1.0))),
        support: in_a.len(),
    }
}

/// Extends each list with the items only the other list has, in the other list's order.
pub fn with_appended_missing(a: &RankedList, b: &RankedList) -> (RankedList, RankedList) {
    let extend = |base: &RankedList, from: &RankedList| {
        let items = base.items.iter().cloned().chain(
            from.items
                .iter()
                .filter(|it| !base.contains(it.as_str()))
                .cloned(),
        );
        RankedList::new(items).expect("union of two valid lists is valid")
    };
    (extend(a, b), extend(b, a))
}

/// Sample Pearson correlation with a two-sided p-value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pearson {
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Pearson's r between two equally long samples (n >= 3, both non-constant).
///
/// The p-value comes from Student's t with `n - 2` degrees of freedom.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Pearson> {
    if xs.len() != ys.len() {
        return Err(invalid(format!(
            "length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len();
    if n < 3 {
        return Err(invalid("pearson correlation needs at least 3 observations"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(invalid("non-finite observation"));
    }
    let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    if constant(xs) || constant(ys) {
        return Err(invalid("zero variance"));
    }
    let mean_x = xs.iter().sum::<f64>() / n as f64;
    let mean_y = ys.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mean_x, y - mean_y);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(invalid("zero variance"));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let rest = 1.0 - r * r;
    let p_value = if rest <= 0.0 {
        0.0
    } else {
        let t = r * (df / rest).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| invalid(e.to_string()))?;
        (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
    };
    Ok(Pearson { r, p_value, n })
}
