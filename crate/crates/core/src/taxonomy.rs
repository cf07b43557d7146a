//! Labels a query pair with the kind of surface difference separating the two queries.
//!
//! Each category is a single transform applied to both (lowercased) queries.
//! Transforms are tried from the most superficial to the most structural and
//! the first one that makes the queries equal wins:
//!
//! | order | label | transform |
//! |-------|-------|-----------|
//! | 1 | C7 space | delete all whitespace |
//! | 2 | C6 punctuation | delete punctuation |
//! | 3 | C8 words connection | connector characters (`+ - / _`, `x` between digits) become spaces |
//! | 4 | C5 article | drop `a`, `an`, `the` |
//! | 5 | C1 preposition | drop prepositions, ignoring word order |
//! | 6 | C2 abbreviation | expand the abbreviation table |
//! | 7 | C3 singular/plural | fold plurals to singular |
//! | 8 | C4 word order | sort tokens |
//!
//! C1 ignores order because rewriting "x for y" as "y x" moves the modifier; it
//! only fires when prepositions actually differ, so pure reorderings stay C4.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::normalize::{plural_stem, NormalizationConfig, ARTICLES, PREPOSITIONS};
use crate::pairs::QueryPair;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaxonomyLabel {
    Preposition,
    Abbreviation,
    SingularPlural,
    WordOrder,
    Article,
    Punctuation,
    Space,
    WordsConnection,
    Unclassified,
}

impl TaxonomyLabel {
    pub const ALL: [TaxonomyLabel; 9] = [
        Self::Preposition,
        Self::Abbreviation,
        Self::SingularPlural,
        Self::WordOrder,
        Self::Article,
        Self::Punctuation,
        Self::Space,
        Self::WordsConnection,
        Self::Unclassified,
    ];

    /// `C1`..`C8`, or `unclassified`.
    pub fn code(self) -> &'static str {
        match self {
            Self::Preposition => "C1",
            Self::Abbreviation => "C2",
            Self::SingularPlural => "C3",
            Self::WordOrder => "C4",
            Self::Article => "C5",
            Self::Punctuation => "C6",
            Self::Space => "C7",
            Self::WordsConnection => "C8",
            Self::Unclassified => "unclassified",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Preposition => "preposition",
            Self::Abbreviation => "abbreviation",
            Self::SingularPlural => "singular/plural",
            Self::WordOrder => "word order",
            Self::Article => "article",
            Self::Punctuation => "punctuation",
            Self::Space => "space",
            Self::WordsConnection => "words connection",
            Self::Unclassified => "unclassified",
        }
    }
}

impl fmt::Display for TaxonomyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for TaxonomyLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid(format!("unknown taxonomy label {s:?}")))
    }
}

const CONNECTORS: &[char] = &['+', '-', '/', '_'];

fn words(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

fn without_spaces(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

fn without_punctuation(s: &str) -> String {
    let kept: String = s
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    words(&kept).join(" ")
}

fn connectors_as_spaces(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mapped: String = chars
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let dimension_x = c == 'x'
                && i > 0
                && i + 1 < chars.len()
                && chars[i - 1].is_ascii_digit()
                && chars[i + 1].is_ascii_digit();
            if CONNECTORS.contains(&c) || dimension_x {
                ' '
            } else {
                c
            }
        })
        .collect();
    words(&mapped).join(" ")
}

fn without_articles(s: &str) -> String {
    words(s)
        .into_iter()
        .filter(|w| !ARTICLES.contains(w))
        .collect::<Vec<_>>()
        .join(" ")
}

fn sorted_words(s: &str) -> Vec<&str> {
    let mut w = words(s);
    w.sort_unstable();
    w
}

fn sorted_without_prepositions(s: &str) -> Vec<&str> {
    let mut w: Vec<&str> = words(s)
        .into_iter()
        .filter(|w| !PREPOSITIONS.contains(w))
        .collect();
    w.sort_unstable();
    w
}

fn expanded_abbreviations(s: &str, cfg: &NormalizationConfig) -> String {
    let marked = cfg.expand_marks(s);
    let tokens: Vec<String> = marked.split_whitespace().map(str::to_owned).collect();
    cfg.expand_abbreviations(&tokens).join(" ")
}

fn plural_folded(s: &str, cfg: &NormalizationConfig) -> String {
    words(s)
        .into_iter()
        .map(|w| {
            let base = cfg.irregular_singular(w).unwrap_or(w);
            plural_stem(base).into_owned()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Labels the surface difference between two distinct queries.
///
/// Symmetric in its arguments. Pairs that differ only in letter case, or that
/// need more than one transform, are [`TaxonomyLabel::Unclassified`].
pub fn classify(q1: &str, q2: &str, cfg: &NormalizationConfig) -> Result<TaxonomyLabel> {
    if q1 == q2 {
        return Err(invalid(format!("cannot classify identical queries {q1:?}")));
    }
    let a = q1.trim().to_lowercase();
    let b = q2.trim().to_lowercase();
    if a == b {
        return Ok(TaxonomyLabel::Unclassified);
    }
    let label = if without_spaces(&a) == without_spaces(&b) {
        TaxonomyLabel::Space
    } else if without_punctuation(&a) == without_punctuation(&b) {
        TaxonomyLabel::Punctuation
    } else if connectors_as_spaces(&a) == connectors_as_spaces(&b) {
        TaxonomyLabel::WordsConnection
    } else if without_articles(&a) == without_articles(&b) {
        TaxonomyLabel::Article
    } else if sorted_words(&a) != sorted_words(&b)
        && sorted_without_prepositions(&a) == sorted_without_prepositions(&b)
    {
        TaxonomyLabel::Preposition
    } else if expanded_abbreviations(&a, cfg) == expanded_abbreviations(&b, cfg) {
        TaxonomyLabel::Abbreviation
    } else if plural_folded(&a, cfg) == plural_folded(&b, cfg) {
        TaxonomyLabel::SingularPlural
    } else if sorted_words(&a) == sorted_words(&b) {
        TaxonomyLabel::WordOrder
    } else {
        TaxonomyLabel::Unclassified
    };
    Ok(label)
}

/// Per-label counts over a corpus of pairs, plus the unclassified pairs for manual triage.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelTable {
    counts: BTreeMap<TaxonomyLabel, usize>,
    total: usize,
    pub overflow: Vec<QueryPair>,
}

impl LabelTable {
    pub fn count(&self, label: TaxonomyLabel) -> usize {
        self.counts.get(&label).copied().unwrap_or(0)
    }

    pub fn rate(&self, label: TaxonomyLabel) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(label) as f64 / self.total as f64
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// `label,count,rate` CSV, one row per label in C1..C8, unclassified order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,count,rate\n");
        for label in TaxonomyLabel::ALL {
            out.push_str(&format!(
                "{},{},{}\n",
                label.code(),
                self.count(label),
                self.rate(label)
            ));
        }
        out
    }
}

pub fn classify_corpus(pairs: &[QueryPair], cfg: &NormalizationConfig) -> Result<LabelTable> {
    if pairs.is_empty() {
        return Err(invalid("no pairs to classify"));
    }
    let labels: Vec<TaxonomyLabel> = pairs
        .par_iter()
        .map(|p| classify(&p.q1, &p.q2, cfg))
        .collect::<Result<_>>()?;
    let mut counts: BTreeMap<TaxonomyLabel, usize> =
        TaxonomyLabel::ALL.iter().map(|&l| (l, 0)).collect();
    let mut overflow = Vec::new();
    for (pair, label) in pairs.iter().zip(labels) {
        *counts.entry(label).or_default() += 1;
        if label == TaxonomyLabel::Unclassified {
            overflow.push(pair.clone());
        }
    }
    Ok(LabelTable {
        counts,
        total: pairs.len(),
        overflow,
    })
}

#[cfg(test)]
mod tests {
    use chrono::NaiveDate;

    use super::*;
    use crate::pairs::PairSource;

    pub(crate) const CASE_STUDY: [(&str, &str, TaxonomyLabel); 8] = [
        (
            "purple dress for women",
            "women purple dress",
            TaxonomyLabel::Preposition,
        ),
        (
            "30'' marble top",
            "30 inch marble top",
            TaxonomyLabel::Abbreviation,
        ),
        (
            "electric thing for kids",
            "electric things for kids",
            TaxonomyLabel::SingularPlural,
        ),
        ("red watch", "watch red", TaxonomyLabel::WordOrder),
        ("heels", "the heels", TaxonomyLabel::Article),
        ("funding", "funding.", TaxonomyLabel::Punctuation),
        (
            "24 x 20 outdoor cushion",
            "24x20 outdoor cushion",
            TaxonomyLabel::Space,
        ),
        (
            "black swing coat",
            "black+swing+coat",
            TaxonomyLabel::WordsConnection,
        ),
    ];

    #[test]
    fn case_study_rows() {
        let cfg = NormalizationConfig::default();
        for (a, b, label) in CASE_STUDY {
            assert_eq!(classify(a, b, &cfg).unwrap(), label, "{a:?} / {b:?}");
            assert_eq!(classify(b, a, &cfg).unwrap(), label, "{b:?} / {a:?}");
        }
    }

    #[test]
    fn other_examples() {
        let cfg = NormalizationConfig::default();
        let cases = [
            ("T-shirt for men", "men T-shirt", TaxonomyLabel::Preposition),
            (
                "T-shirt for man",
                "T-shirts for men",
                TaxonomyLabel::SingularPlural,
            ),
            ("battery AA", "AA battery", TaxonomyLabel::WordOrder),
            ("1 mm ring", "1mm ring", TaxonomyLabel::Space),
            (
                "12 v battery",
                "12 volt battery",
                TaxonomyLabel::Abbreviation,
            ),
            ("t-shirt", "t shirt", TaxonomyLabel::WordsConnection),
            ("red  watch", "red watch", TaxonomyLabel::Space),
            ("Red Watch", "red watch", TaxonomyLabel::Unclassified),
            ("the red watch", "watch red", TaxonomyLabel::Unclassified),
            ("red watch", "blue watch", TaxonomyLabel::Unclassified),
        ];
        for (a, b, label) in cases {
            assert_eq!(classify(a, b, &cfg).unwrap(), label, "{a:?} / {b:?}");
        }
        assert!(classify("x", "x", &cfg).is_err());
    }

    #[test]
    fn corpus_table() {
        let cfg = NormalizationConfig::default();
        let week = NaiveDate::from_ymd_opt(2023, 4, 15).unwrap();
        let mut pairs: Vec<QueryPair> = CASE_STUDY
            .iter()
            .map(|(a, b, _)| QueryPair::new(a, b, PairSource::Tps, None, week).unwrap())
            .collect();
        let table = classify_corpus(&pairs, &cfg).unwrap();
        for (_, _, label) in CASE_STUDY {
            assert_eq!(table.count(label), 1);
        }
        assert_eq!(table.count(TaxonomyLabel::Unclassified), 0);
        assert!(table.overflow.is_empty());
        assert_eq!(table.to_csv().lines().next(), Some("label,count,rate"));
        assert_eq!(table.to_csv().lines().count(), 10);

        pairs.push(QueryPair::new("red watch", "blue watch", PairSource::Tps, None, week).unwrap());
        let table = classify_corpus(&pairs, &cfg).unwrap();
        assert_eq!(table.overflow.len(), 1);
        assert!((table.rate(TaxonomyLabel::Unclassified) - 1.0 / 9.0).abs() < 1e-12);

        let only_order: Vec<QueryPair> = ["red watch", "blue lamp", "oak table"]
            .iter()
            .map(|q| {
                let rev: Vec<&str> = q.split(' ').rev().collect();
                QueryPair::new(q, &rev.join(" "), PairSource::Tps, None, week).unwrap()
            })
            .collect();
        let table = classify_corpus(&only_order, &cfg).unwrap();
        assert_eq!(table.rate(TaxonomyLabel::WordOrder), 1.0);

        assert!(classify_corpus(&[], &cfg).is_err());
    }

    #[test]
    fn label_codes_parse() {
        for l in TaxonomyLabel::ALL {
            assert_eq!(l.code().parse::<TaxonomyLabel>().unwrap(), l);
        }
    }
}
