//! Semantically identical query pairs: generation, scoring and TSV I/O.
//!
//! Pairs come from two sources. TPS pairs join queries that share a TPS key
//! within a week. SIM pairs come from an external query-to-query similarity
//! table: each query is held fixed and paired with its `k` best-scoring partners.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ingest::{ListSource, WeeklyDataset};
use crate::metrics::{rds, RdsResult};
use crate::normalize::{normalize_query, NormalizationConfig, TpsKey};
use crate::tsv;

/// Default number of partners per query for SIM pairing.
pub const DEFAULT_TOP_K: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PairSource {
    #[serde(rename = "TPS")]
    Tps,
    #[serde(rename = "SIM")]
    Sim,
}

impl fmt::Display for PairSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Tps => "TPS",
            Self::Sim => "SIM",
        })
    }
}

impl FromStr for PairSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "TPS" => Ok(Self::Tps),
            "SIM" => Ok(Self::Sim),
            other => Err(invalid(format!("unknown pair source {other:?}"))),
        }
    }
}

/// Two distinct queries with `q1 < q2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryPair {
    pub q1: String,
    pub q2: String,
    pub source: PairSource,
    /// Present exactly when `source` is SIM.
    pub sim_score: Option<f64>,
    pub week: NaiveDate,
}

impl QueryPair {
    /// Builds a pair, putting the lexicographically smaller query first.
    pub fn new(
        a: &str,
        b: &str,
        source: PairSource,
        sim_score: Option<f64>,
        week: NaiveDate,
    ) -> Result<Self> {
        if a == b {
            return Err(invalid(format!("pair of identical queries {a:?}")));
        }
        match (source, sim_score) {
            (PairSource::Tps, Some(_)) => return Err(invalid("TPS pairs carry no score")),
            (PairSource::Sim, None) => return Err(invalid("SIM pairs need a score")),
            (_, Some(s)) if !(0.0..=1.0).contains(&s) => {
                return Err(invalid(format!("similarity score {s} outside [0, 1]")))
            }
            _ => {}
        }
        let (q1, q2) = if a < b { (a, b) } else { (b, a) };
        Ok(Self {
            q1: q1.to_owned(),
            q2: q2.to_owned(),
            source,
            sim_score,
            week,
        })
    }

    /// Sort and deduplication key.
    pub fn key(&self) -> (&str, &str, NaiveDate, PairSource) {
        (&self.q1, &self.q2, self.week, self.source)
    }

    /// `q1<TAB>q2<TAB>source<TAB>score<TAB>week`; the score is empty for TPS pairs.
    pub fn to_tsv(&self) -> String {
        let score = self.sim_score.map(|s| s.to_string()).unwrap_or_default();
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.q1, self.q2, self.source, score, self.week
        )
    }

    fn from_fields(f: &[&str], line_no: usize) -> Result<Self> {
        let source: PairSource = f[2].parse().map_err(|e: Error| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let score = if f[3].trim().is_empty() {
            None
        } else {
            Some(tsv::parse_f64(f[3], "score", line_no)?)
        };
        let week = tsv::parse_date(f[4], line_no)?;
        Self::new(f[0], f[1], source, score, week).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })
    }

    pub fn parse_tsv(line: &str, line_no: usize) -> Result<Self> {
        Self::from_fields(&tsv::fields(line, 5, line_no)?, line_no)
    }
}

pub fn sort_canonical(pairs: &mut [QueryPair]) {
    pairs.sort_by(|a, b| a.key().cmp(&b.key()));
}

/// All pairs of distinct queries sharing a TPS key in `ds`, sorted canonically.
///
/// A group of `g` queries yields `g(g-1)/2` pairs. Queries with an empty key are skipped.
pub fn tps_pairs(ds: &WeeklyDataset, cfg: &NormalizationConfig) -> Vec<QueryPair> {
    let mut groups: BTreeMap<TpsKey, Vec<&str>> = BTreeMap::new();
    for query in ds.lists.keys() {
        if let Ok(key) = normalize_query(query, cfg) {
            groups.entry(key).or_default().push(query);
        }
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for members in groups.values() {
        for (i, a) in members.iter().enumerate() {
            for b in &members[i + 1..] {
                let pair = QueryPair::new(a, b, PairSource::Tps, None, ds.week)
                    .expect("distinct map keys");
                if seen.insert((pair.q1.clone(), pair.q2.clone())) {
                    out.push(pair);
                }
            }
        }
    }
    sort_canonical(&mut out);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimScore {
    pub query_a: String,
    pub query_b: String,
    pub score: f64,
}

/// Query-to-query similarity scores produced by an external model.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimScoreTable {
    records: Vec<SimScore>,
}

impl SimScoreTable {
    pub fn new(records: Vec<SimScore>) -> Result<Self> {
        for r in &records {
            if r.query_a == r.query_b {
                return Err(invalid(format!("self-pair {:?}", r.query_a)));
            }
            if !(0.0..=1.0).contains(&r.score) {
                return Err(invalid(format!("score {} outside [0, 1]", r.score)));
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[SimScore] {
        &self.records
    }

    /// Reads `query_a<TAB>query_b<TAB>score` lines.
    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut records = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            if tsv::is_skippable(&line) {
                continue;
            }
            let f = tsv::fields(&line, 3, line_no)?;
            records.push(SimScore {
                query_a: f[0].to_owned(),
                query_b: f[1].to_owned(),
                score: tsv::parse_f64(f[2], "score", line_no)?,
            });
        }
        Self::new(records)
    }
}

/// For every `query_a`, pairs with its `k` best partners scoring at least `min_score`.
///
/// Ties are broken by partner name. Reciprocal pairs collapse to one canonical
/// pair carrying the higher score.
pub fn topk_pairs(
    table: &SimScoreTable,
    k: usize,
    min_score: f64,
    week: NaiveDate,
) -> Result<Vec<QueryPair>> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let mut partners: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for r in &table.records {
        if r.score < min_score {
            continue;
        }
        let best = partners
            .entry(&r.query_a)
            .or_default()
            .entry(&r.query_b)
            .or_insert(r.score);
        *best = best.max(r.score);
    }
    let mut chosen: BTreeMap<(String, String), f64> = BTreeMap::new();
    for (a, cands) in partners {
        let mut cands: Vec<(&str, f64)> = cands.into_iter().collect();
        cands.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(y.0)));
        for (b, score) in cands.into_iter().take(k) {
            let key = if a < b { (a, b) } else { (b, a) };
            let slot = chosen
                .entry((key.0.to_owned(), key.1.to_owned()))
                .or_insert(score);
            *slot = slot.max(score);
        }
    }
    chosen
        .into_iter()
        .map(|((q1, q2), s)| QueryPair::new(&q1, &q2, PairSource::Sim, Some(s), week))
        .collect()
}

/// Scored pairs plus the number skipped because a side had no list.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Evaluation {
    pub results: Vec<(QueryPair, RdsResult)>,
    pub skipped: usize,
}

pub fn evaluate_pair(pair: &QueryPair, lists: &impl ListSource) -> Option<RdsResult> {
    let a = lists.ranked_list(pair.week, &pair.q1)?;
    let b = lists.ranked_list(pair.week, &pair.q2)?;
    Some(rds(a, b))
}

/// Scores every pair whose two queries have lists for the pair's week.
///
/// Output is in canonical pair order regardless of input order.
pub fn evaluate_pairs<L: ListSource + Sync>(pairs: &[QueryPair], lists: &L) -> Evaluation {
    let mut sorted = pairs.to_vec();
    sort_canonical(&mut sorted);
    let scored: Vec<Option<RdsResult>> =
        sorted.par_iter().map(|p| evaluate_pair(p, lists)).collect();
    let mut out = Evaluation::default();
    for (pair, res) in sorted.into_iter().zip(scored) {
        match res {
            Some(r) => out.results.push((pair, r)),
            None => out.skipped += 1,
        }
    }
    out
}

pub fn write_pairs<W: Write>(mut w: W, pairs: &[QueryPair]) -> Result<()> {
    for p in pairs {
        writeln!(w, "{}", p.to_tsv())?;
    }
    Ok(())
}

pub fn read_pairs<R: BufRead>(reader: R) -> Result<Vec<QueryPair>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if tsv::is_skippable(&line) {
            continue;
        }
        out.push(QueryPair::parse_tsv(&line, idx + 1)?);
    }
    Ok(out)
}

/// One line of the evaluation TSV: the pair columns followed by `raw`, `normalized`, `similarity`.
pub fn evaluation_row(pair: &QueryPair, r: &RdsResult) -> String {
    format!(
        "{}\t{}\t{}\t{}",
        pair.to_tsv(),
        r.raw,
        r.normalized,
        r.similarity
    )
}

pub fn parse_evaluation_row(line: &str, line_no: usize) -> Result<(QueryPair, RdsResult)> {
    let f = tsv::fields(line, 8, line_no)?;
    let pair = QueryPair::from_fields(&f[..5], line_no)?;
    let raw = tsv::parse_f64(f[5], "raw", line_no)?;
    let normalized = tsv::parse_f64(f[6], "normalized", line_no)?;
    let similarity = tsv::parse_f64(f[7], "similarity", line_no)?;
    if !(0.0..=1.0).contains(&normalized) {
        return Err(Error::Parse {
            line: line_no,
            message: format!("normalized RDS {normalized} outside [0, 1]"),
        });
    }
    let max_possible = if normalized > 0.0 {
        raw / normalized
    } else {
        f64::NAN
    };
    Ok((
        pair,
        RdsResult {
            raw,
            max_possible,
            normalized,
            similarity,
        },
    ))
}
