//! Snapshot ensembling: re-rank items by their mean position across weeks.

use std::collections::{BTreeMap, HashMap};

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::ingest::DatasetCollection;
use crate::metrics::{rds, ItemId, RankedList, RdsResult};
use crate::pairs::QueryPair;
use crate::report::{histogram, HistogramReport};

/// Bin width of the comparison histograms.
pub const COMPARISON_BIN_WIDTH: f64 = 0.2;

/// One query's ranked lists over several weeks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SnapshotSeries {
    pub query: String,
    snapshots: Vec<(NaiveDate, RankedList)>,
}

impl SnapshotSeries {
    /// Weeks must be strictly increasing.
    pub fn new(query: impl Into<String>, snapshots: Vec<(NaiveDate, RankedList)>) -> Result<Self> {
        if snapshots.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(invalid("snapshot weeks must be strictly increasing"));
        }
        Ok(Self {
            query: query.into(),
            snapshots,
        })
    }

    pub fn snapshots(&self) -> &[(NaiveDate, RankedList)] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn at(&self, week: NaiveDate) -> Option<&RankedList> {
        self.snapshots
            .binary_search_by_key(&week, |(w, _)| *w)
            .ok()
            .map(|i| &self.snapshots[i].1)
    }
}

/// Most frequent length; ties go to the longer length.
fn modal_length(lists: &[&RankedList]) -> usize {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for l in lists {
        *counts.entry(l.len()).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(len, _)| len)
        .unwrap_or(0)
}

/// Mean-rank ensemble of several lists.
///
/// Each item's mean is taken over the lists that contain it. Ties break by
/// item id and the result is cut to the modal input length.
pub fn ensemble_rankings(lists: &[&RankedList]) -> Result<RankedList> {
    if lists.is_empty() {
        return Err(invalid("ensemble of zero lists"));
    }
    let mut acc: HashMap<&ItemId, (u64, u64)> = HashMap::new();
    for l in lists {
        for (i, item) in l.items().iter().enumerate() {
            let e = acc.entry(item).or_default();
            e.0 += i as u64 + 1;
            e.1 += 1;
        }
    }
    let mut items: Vec<(&ItemId, (u64, u64))> = acc.into_iter().collect();
    // Compare sum_a / n_a with sum_b / n_b exactly.
    items.sort_by(|(ia, (sa, na)), (ib, (sb, nb))| {
        (sa * nb).cmp(&(sb * na)).then_with(|| ia.cmp(ib))
    });
    let len = modal_length(lists);
    RankedList::new(items.into_iter().take(len).map(|(i, _)| i.clone()))
}

pub fn ensemble_list(series: &SnapshotSeries) -> Result<RankedList> {
    let lists: Vec<&RankedList> = series.snapshots.iter().map(|(_, l)| l).collect();
    ensemble_rankings(&lists).map_err(|_| invalid(format!("empty series for {:?}", series.query)))
}

/// Regroups weekly datasets into one series per query.
pub fn series_from_datasets(data: &DatasetCollection) -> BTreeMap<String, SnapshotSeries> {
    let mut by_query: BTreeMap<String, Vec<(NaiveDate, RankedList)>> = BTreeMap::new();
    for ds in data.iter() {
        for (q, l) in &ds.lists {
            by_query
                .entry(q.clone())
                .or_default()
                .push((ds.week, l.clone()));
        }
    }
    by_query
        .into_iter()
        .map(|(q, snaps)| {
            // Weeks arrive in increasing order from the BTreeMap.
            let s = SnapshotSeries {
                query: q.clone(),
                snapshots: snaps,
            };
            (q, s)
        })
        .collect()
}

/// Histograms of normalized RDS with and without ensembling.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleComparison {
    pub single: HistogramReport,
    pub ensemble: HistogramReport,
    pub evaluated: usize,
    pub skipped: usize,
}

impl EnsembleComparison {
    /// `variant,bin_lo,bin_hi,rate`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant,bin_lo,bin_hi,rate\n");
        for (name, h) in [("no_ensemble", &self.single), ("ensemble", &self.ensemble)] {
            for b in &h.bins {
                out.push_str(&format!("{name},{},{},{}\n", b.lo, b.hi, b.rate));
            }
        }
        out
    }
}

fn compare_pair(
    pair: &QueryPair,
    series: &BTreeMap<String, SnapshotSeries>,
    week: NaiveDate,
) -> Option<(RdsResult, RdsResult)> {
    let s1 = series.get(&pair.q1)?;
    let s2 = series.get(&pair.q2)?;
    let single = rds(s1.at(week)?, s2.at(week)?);
    let smoothed = rds(&ensemble_list(s1).ok()?, &ensemble_list(s2).ok()?);
    Some((single, smoothed))
}

/// RDS on `single_week` lists versus RDS on ensembled lists, per pair.
///
/// Pairs are deduplicated by query; a pair whose queries lack a snapshot for
/// `single_week` is skipped.
pub fn smoothed_vs_single(
    pairs: &[QueryPair],
    series_by_query: &BTreeMap<String, SnapshotSeries>,
    single_week: NaiveDate,
) -> Result<EnsembleComparison> {
    let mut keys: Vec<(&str, &str, &QueryPair)> = pairs
        .iter()
        .map(|p| (p.q1.as_str(), p.q2.as_str(), p))
        .collect();
    keys.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    keys.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);

    let scored: Vec<Option<(RdsResult, RdsResult)>> = keys
        .par_iter()
        .map(|(_, _, p)| compare_pair(p, series_by_query, single_week))
        .collect();
    let mut single = Vec::new();
    let mut smoothed = Vec::new();
    let mut skipped = 0;
    for s in scored {
        match s {
            Some((a, b)) => {
                single.push(a);
                smoothed.push(b);
            }
            None => skipped += 1,
        }
    }
    let week = Some(single_week);
    let mut single_h = histogram(&single, COMPARISON_BIN_WIDTH)?;
    single_h.week = week;
    let mut ensemble_h = histogram(&smoothed, COMPARISON_BIN_WIDTH)?;
    ensemble_h.week = week;
    Ok(EnsembleComparison {
        single: single_h,
        ensemble: ensemble_h,
        evaluated: single.len(),
        skipped,
    })
}

/// Mean rank of `item` over the lists holding it.
pub fn mean_rank(lists: &[&RankedList], item: &str) -> Option<f64> {
    let ranks: Vec<usize> = lists.iter().filter_map(|l| l.rank_of(item)).collect();
    if ranks.is_empty() {
        None
    } else {
        Some(ranks.iter().sum::<usize>() as f64 / ranks.len() as f64)
    }
}
