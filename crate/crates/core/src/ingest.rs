//! Weekly search-log parsing and data filters.
//!
//! Log lines are tab-separated:
//! `week<TAB>locale<TAB>query<TAB>item_id<TAB>avg_position<TAB>frequency`.
//! Blank lines and lines starting with `#` are ignored.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::metrics::{ItemId, RankedList};
use crate::normalize::{normalize_query, NormalizationConfig, TpsKey};
use crate::report::SCHEMA_VERSION;
use crate::tsv;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub week: NaiveDate,
    pub locale: String,
    pub query: String,
    pub item: ItemId,
    /// Mean displayed position over the week, `>= 1`.
    pub avg_position: f64,
    /// Searches that week.
    pub frequency: u64,
}

impl QueryRecord {
    pub fn parse_line(line: &str, line_no: usize) -> Result<Self> {
        let f = tsv::fields(line, 6, line_no)?;
        let bad = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let week = tsv::parse_date(f[0], line_no)?;
        let (locale, query, item) = (f[1].trim(), f[2].trim(), f[3].trim());
        if locale.is_empty() || query.is_empty() || item.is_empty() {
            return Err(bad("empty locale, query or item field".into()));
        }
        let avg_position = tsv::parse_f64(f[4], "avg_position", line_no)?;
        if avg_position < 1.0 {
            return Err(bad(format!("avg_position {avg_position} is below 1")));
        }
        let frequency = f[5]
            .trim()
            .parse::<u64>()
            .map_err(|_| bad(format!("invalid frequency {:?}", f[5])))?;
        Ok(Self {
            week,
            locale: locale.to_owned(),
            query: query.to_owned(),
            item: ItemId::from(item),
            avg_position,
            frequency,
        })
    }

    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.week, self.locale, self.query, self.item, self.avg_position, self.frequency
        )
    }
}

/// Records parsed from a log plus the malformed lines that were skipped.
#[derive(Clone, Debug, Default)]
pub struct ParsedLog {
    pub records: Vec<QueryRecord>,
    pub malformed: usize,
    /// Line numbers of the first malformed lines (at most 100).
    pub malformed_lines: Vec<usize>,
}

/// Parses a log stream. With `strict`, the first malformed line is an error.
pub fn parse_log<R: BufRead>(reader: R, strict: bool) -> Result<ParsedLog> {
    let mut out = ParsedLog::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if tsv::is_skippable(&line) {
            continue;
        }
        match QueryRecord::parse_line(&line, line_no) {
            Ok(rec) => out.records.push(rec),
            Err(e) if strict => return Err(e),
            Err(_) => {
                out.malformed += 1;
                if out.malformed_lines.len() < 100 {
                    out.malformed_lines.push(line_no);
                }
            }
        }
    }
    Ok(out)
}

pub fn parse_log_file(path: impl AsRef<Path>, strict: bool) -> Result<ParsedLog> {
    parse_log(BufReader::new(File::open(path)?), strict)
}

/// Groups records by week.
pub fn split_by_week(records: Vec<QueryRecord>) -> BTreeMap<NaiveDate, Vec<QueryRecord>> {
    let mut weeks: BTreeMap<NaiveDate, Vec<QueryRecord>> = BTreeMap::new();
    for rec in records {
        weeks.entry(rec.week).or_default().push(rec);
    }
    weeks
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    pub locale_allow: BTreeSet<String>,
    /// Fraction of (query, item) records dropped from the low-frequency end.
    pub bottom_cut: f64,
    /// Minimum list length; longer lists are truncated to it.
    pub min_len: usize,
    /// Queries kept per TPS group, by weekly frequency.
    pub top_k_queries_per_tps: usize,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            locale_allow: BTreeSet::from(["en-US".to_owned()]),
            bottom_cut: 0.20,
            min_len: 20,
            top_k_queries_per_tps: 3,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.bottom_cut) {
            return Err(invalid(format!(
                "bottom_cut must be in [0, 1), got {}",
                self.bottom_cut
            )));
        }
        if self.min_len == 0 {
            return Err(invalid("min_len must be at least 1"));
        }
        if self.top_k_queries_per_tps == 0 {
            return Err(invalid("top_k_queries_per_tps must be at least 1"));
        }
        if self.locale_allow.is_empty() {
            return Err(invalid("locale allow-list is empty"));
        }
        Ok(())
    }
}

/// Counts of what each filter stage removed, for the manifest.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStats {
    pub input_records: usize,
    pub after_locale: usize,
    pub after_frequency_cut: usize,
    pub queries_built: usize,
    pub queries_too_short: usize,
    pub queries_empty_key: usize,
    pub queries_over_group_limit: usize,
    pub queries_kept: usize,
}

/// One week of ranked lists, keyed by query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeeklyDataset {
    pub week: NaiveDate,
    pub lists: BTreeMap<String, RankedList>,
    pub frequencies: BTreeMap<String, u64>,
}

impl WeeklyDataset {
    pub fn empty(week: NaiveDate) -> Self {
        Self {
            week,
            lists: BTreeMap::new(),
            frequencies: BTreeMap::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn list(&self, query: &str) -> Option<&RankedList> {
        self.lists.get(query)
    }

    pub fn record_count(&self) -> usize {
        self.lists.values().map(RankedList::len).sum()
    }

    /// Writes `query<TAB>rank<TAB>item_id<TAB>frequency` rows, sorted by query then rank.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        for (query, list) in &self.lists {
            let freq = self.frequencies.get(query).copied().unwrap_or(0);
            for (idx, item) in list.items().iter().enumerate() {
                writeln!(w, "{query}\t{}\t{item}\t{freq}", idx + 1)?;
            }
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(week: NaiveDate, reader: R) -> Result<Self> {
        let mut rows: BTreeMap<String, (u64, Vec<(usize, String)>)> = BTreeMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            if tsv::is_skippable(&line) {
                continue;
            }
            let f = tsv::fields(&line, 4, line_no)?;
            let bad = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            let rank = f[1]
                .parse::<usize>()
                .map_err(|_| bad(format!("invalid rank {:?}", f[1])))?;
            let freq = f[3]
                .parse::<u64>()
                .map_err(|_| bad(format!("invalid frequency {:?}", f[3])))?;
            let entry = rows.entry(f[0].to_owned()).or_insert((freq, Vec::new()));
            entry.1.push((rank, f[2].to_owned()));
        }
        let mut ds = Self::empty(week);
        for (query, (freq, mut items)) in rows {
            items.sort();
            if items
                .iter()
                .enumerate()
                .any(|(i, (rank, _))| *rank != i + 1)
            {
                return Err(invalid(format!(
                    "ranks for query {query:?} in week {week} are not 1..n"
                )));
            }
            let list = RankedList::new(items.into_iter().map(|(_, item)| item))?;
            ds.lists.insert(query.clone(), list);
            ds.frequencies.insert(query, freq);
        }
        Ok(ds)
    }
}

/// Lookup of a query's ranked list in a given week.
pub trait ListSource {
    fn ranked_list(&self, week: NaiveDate, query: &str) -> Option<&RankedList>;
}

impl ListSource for WeeklyDataset {
    fn ranked_list(&self, week: NaiveDate, query: &str) -> Option<&RankedList> {
        if week == self.week {
            self.list(query)
        } else {
            None
        }
    }
}

/// Several weekly datasets indexed by week.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetCollection {
    pub weeks: BTreeMap<NaiveDate, WeeklyDataset>,
}

impl DatasetCollection {
    pub fn insert(&mut self, ds: WeeklyDataset) {
        self.weeks.insert(ds.week, ds);
    }

    pub fn iter(&self) -> impl Iterator<Item = &WeeklyDataset> {
        self.weeks.values()
    }

    pub fn get(&self, week: NaiveDate) -> Option<&WeeklyDataset> {
        self.weeks.get(&week)
    }
}

impl FromIterator<WeeklyDataset> for DatasetCollection {
    fn from_iter<T: IntoIterator<Item = WeeklyDataset>>(iter: T) -> Self {
        let mut c = Self::default();
        for ds in iter {
            c.insert(ds);
        }
        c
    }
}

impl ListSource for DatasetCollection {
    fn ranked_list(&self, week: NaiveDate, query: &str) -> Option<&RankedList> {
        self.weeks.get(&week).and_then(|ds| ds.list(query))
    }
}

/// A filtered week together with its filter statistics.
#[derive(Clone, Debug)]
pub struct FilteredWeek {
    pub dataset: WeeklyDataset,
    pub stats: FilterStats,
}

/// Applies the four data filters to one week of records, in order:
///
/// 1. keep records whose locale is allowed;
/// 2. drop the lowest-frequency `bottom_cut` fraction of (query, item) records,
///    keeping every record tied with the first surviving frequency;
/// 3. rank each query's items by average position (ties by item id), drop
///    queries with fewer than `min_len` items and truncate the rest;
/// 4. group queries by TPS key and keep the `top_k_queries_per_tps` most
///    frequent per group (ties by query string).
pub fn filter_week(
    records: &[QueryRecord],
    params: &FilterParams,
    cfg: &NormalizationConfig,
) -> Result<FilteredWeek> {
    params.validate()?;
    let week = records
        .first()
        .map(|r| r.week)
        .ok_or_else(|| invalid("no records to filter"))?;
    if records.iter().any(|r| r.week != week) {
        return Err(invalid("records span more than one week"));
    }
    let mut stats = FilterStats {
        input_records: records.len(),
        ..FilterStats::default()
    };

    // (1) locale, deduplicating (query, item) deterministically.
    let mut by_pair: BTreeMap<(&str, &ItemId), &QueryRecord> = BTreeMap::new();
    for rec in records
        .iter()
        .filter(|r| params.locale_allow.contains(&r.locale))
    {
        stats.after_locale += 1;
        by_pair
            .entry((rec.query.as_str(), &rec.item))
            .and_modify(|cur| {
                let better = rec.frequency > cur.frequency
                    || (rec.frequency == cur.frequency
                        && (rec.avg_position, &rec.locale) < (cur.avg_position, &cur.locale));
                if better {
                    *cur = rec;
                }
            })
            .or_insert(rec);
    }

    let mut query_freq: BTreeMap<&str, u64> = BTreeMap::new();
    for rec in by_pair.values() {
        let f = query_freq.entry(rec.query.as_str()).or_insert(0);
        *f = (*f).max(rec.frequency);
    }

    // (2) frequency cut.
    let threshold = frequency_threshold(by_pair.values().map(|r| r.frequency), params.bottom_cut);
    let kept: Vec<&QueryRecord> = by_pair
        .into_values()
        .filter(|r| threshold.is_some_and(|t| r.frequency >= t))
        .collect();
    stats.after_frequency_cut = kept.len();

    // (3) ranked lists.
    let mut per_query: BTreeMap<&str, Vec<&QueryRecord>> = BTreeMap::new();
    for rec in kept {
        per_query.entry(rec.query.as_str()).or_default().push(rec);
    }
    stats.queries_built = per_query.len();
    let mut lists: BTreeMap<&str, RankedList> = BTreeMap::new();
    for (query, mut recs) in per_query {
        if recs.len() < params.min_len {
            stats.queries_too_short += 1;
            continue;
        }
        recs.sort_by(|a, b| {
            a.avg_position
                .total_cmp(&b.avg_position)
                .then_with(|| a.item.cmp(&b.item))
        });
        let list = RankedList::new(recs.iter().take(params.min_len).map(|r| r.item.clone()))?;
        lists.insert(query, list);
    }

    // (4) top-k queries per TPS group.
    let mut groups: BTreeMap<TpsKey, Vec<&str>> = BTreeMap::new();
    for &query in lists.keys() {
        match normalize_query(query, cfg) {
            Ok(key) => groups.entry(key).or_default().push(query),
            Err(Error::EmptyKey(_)) => stats.queries_empty_key += 1,
            Err(e) => return Err(e),
        }
    }
    let mut dataset = WeeklyDataset::empty(week);
    for (_, mut members) in groups {
        members.sort_by(|a, b| query_freq[b].cmp(&query_freq[a]).then_with(|| a.cmp(b)));
        stats.queries_over_group_limit +=
            members.len().saturating_sub(params.top_k_queries_per_tps);
        for query in members.into_iter().take(params.top_k_queries_per_tps) {
            dataset
                .lists
                .insert(query.to_owned(), lists.remove(query).unwrap());
            dataset
                .frequencies
                .insert(query.to_owned(), query_freq[query]);
        }
    }
    stats.queries_kept = dataset.lists.len();
    if dataset.is_empty() {
        warn!("week {week}: no queries survived filtering");
    }
    Ok(FilteredWeek { dataset, stats })
}

/// [`filter_week`] without the statistics.
pub fn apply_filters(
    records: &[QueryRecord],
    params: &FilterParams,
    cfg: &NormalizationConfig,
) -> Result<WeeklyDataset> {
    filter_week(records, params, cfg).map(|f| f.dataset)
}

/// Smallest frequency that survives the cut, or `None` when nothing does.
fn frequency_threshold(freqs: impl Iterator<Item = u64>, cut: f64) -> Option<u64> {
    let mut freqs: Vec<u64> = freqs.collect();
    if freqs.is_empty() {
        return None;
    }
    freqs.sort_unstable();
    let n = freqs.len();
    // The epsilon keeps products like 0.29 * 100 from flooring to 28.
    let n_drop = ((cut * n as f64) + 1e-9).floor() as usize;
    freqs.get(n_drop.min(n)).copied()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestWeek {
    pub week: NaiveDate,
    pub file: String,
    pub queries: usize,
    pub records: usize,
    pub stats: FilterStats,
}

/// Describes a dataset directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub filter: FilterParams,
    pub malformed_lines: usize,
    pub weeks: Vec<ManifestWeek>,
}

fn week_file(week: NaiveDate) -> String {
    format!("{week}.tsv")
}

/// Persists filtered weeks as `<dir>/<week>.tsv` plus `<dir>/manifest.json`.
pub fn write_dataset_dir(
    dir: impl AsRef<Path>,
    weeks: &[FilteredWeek],
    params: &FilterParams,
    malformed_lines: usize,
) -> Result<Manifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        filter: params.clone(),
        malformed_lines,
        weeks: Vec::with_capacity(weeks.len()),
    };
    for fw in weeks {
        let ds = &fw.dataset;
        let file = week_file(ds.week);
        let mut w = BufWriter::new(File::create(dir.join(&file))?);
        ds.write_tsv(&mut w)?;
        w.flush()?;
        manifest.weeks.push(ManifestWeek {
            week: ds.week,
            file,
            queries: ds.lists.len(),
            records: ds.record_count(),
            stats: fw.stats.clone(),
        });
    }
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(dir.join(MANIFEST_FILE), json)?;
    Ok(manifest)
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    let text = fs::read_to_string(dir.as_ref().join(MANIFEST_FILE))?;
    Ok(serde_json::from_str(&text)?)
}

/// Loads every week listed in `<dir>/manifest.json`.
pub fn read_dataset_dir(dir: impl AsRef<Path>) -> Result<DatasetCollection> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let mut out = DatasetCollection::default();
    for entry in &manifest.weeks {
        let reader = BufReader::new(File::open(dir.join(&entry.file))?);
        out.insert(WeeklyDataset::read_tsv(entry.week, reader)?);
    }
    Ok(out)
}
