//! Query normalization into TPS (text processing and sorting) keys.
//!
//! Two queries with the same key are treated as a semantically identical pair.
//! The pipeline is: lowercase, expand unit marks glued to numbers (`30''`),
//! turn every non-alphanumeric character into a space, split glued dimension
//! tokens (`24x20`, `1mm`), drop a standalone `x` between two numbers, expand
//! abbreviations, drop stopwords, stem, and sort.
//!
//! An abbreviation whose variant is also a stopword (`in`) is only expanded
//! right after a number; elsewhere the stopword reading wins.

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const ARTICLES: &[&str] = &["a", "an", "the"];

pub const PREPOSITIONS: &[&str] = &[
    "about",
    "above",
    "across",
    "after",
    "against",
    "along",
    "among",
    "around",
    "at",
    "before",
    "behind",
    "below",
    "beneath",
    "beside",
    "between",
    "beyond",
    "by",
    "during",
    "for",
    "from",
    "in",
    "inside",
    "into",
    "near",
    "of",
    "on",
    "onto",
    "outside",
    "through",
    "to",
    "toward",
    "towards",
    "under",
    "underneath",
    "upon",
    "with",
    "within",
    "without",
];

pub const CONJUNCTIONS: &[&str] = &["and", "or", "nor", "but"];

const DEFAULT_ABBREVIATIONS: &[(&str, &str)] = &[
    ("''", "inch"),
    ("\"", "inch"),
    ("\u{2033}", "inch"),
    ("\u{201d}", "inch"),
    ("in", "inch"),
    ("inches", "inch"),
    ("v", "volt"),
    ("ft", "foot"),
    ("lb", "pound"),
    ("lbs", "pound"),
    ("oz", "ounce"),
];

const DEFAULT_PLURALS: &[(&str, &str)] = &[
    ("men", "man"),
    ("women", "woman"),
    ("children", "child"),
    ("feet", "foot"),
    ("teeth", "tooth"),
    ("mice", "mouse"),
    ("geese", "goose"),
];

// Guards against pathological configs whose abbreviation and stem maps cycle.
const MAX_TOKEN_PASSES: usize = 8;

/// Which stemmer runs after the irregular-plural table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StemmerKind {
    /// Snowball English (Porter2) suffix stripping.
    #[default]
    Snowball,
    /// Plural folding only (the "S" stemmer).
    Plural,
    None,
}

impl FromStr for StemmerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "snowball" | "porter" => Ok(Self::Snowball),
            "plural" | "s" => Ok(Self::Plural),
            "none" => Ok(Self::None),
            other => Err(invalid(format!("unknown stemmer {other:?}"))),
        }
    }
}

impl fmt::Display for StemmerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Snowball => "snowball",
            Self::Plural => "plural",
            Self::None => "none",
        })
    }
}

fn snowball() -> &'static Stemmer {
    static STEMMER: OnceLock<Stemmer> = OnceLock::new();
    STEMMER.get_or_init(|| Stemmer::create(Algorithm::English))
}

/// Harman's S stemmer: strips regular English plural endings and nothing else.
pub fn plural_stem(word: &str) -> Cow<'_, str> {
    if word.chars().count() < 3 || !word.ends_with('s') {
        return Cow::Borrowed(word);
    }
    if word.ends_with("us") || word.ends_with("ss") {
        return Cow::Borrowed(word);
    }
    if let Some(stem) = word.strip_suffix("ies") {
        if !stem.ends_with('a') && !stem.ends_with('e') {
            return Cow::Owned(format!("{stem}y"));
        }
        return Cow::Borrowed(word);
    }
    if word.ends_with("aes") || word.ends_with("ees") || word.ends_with("oes") {
        return Cow::Borrowed(word);
    }
    Cow::Borrowed(&word[..word.len() - 1])
}

/// Stopwords, abbreviations, irregular plurals and the stemmer choice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalizationConfig {
    stopwords: BTreeSet<String>,
    /// Word abbreviations, matched on whole tokens.
    abbreviations: BTreeMap<String, String>,
    /// Symbolic unit marks (`''`, `"`), matched right after a digit.
    marks: Vec<(String, String)>,
    plurals: BTreeMap<String, String>,
    stemmer: StemmerKind,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        let mut cfg = Self::empty();
        for w in ARTICLES.iter().chain(PREPOSITIONS).chain(CONJUNCTIONS) {
            cfg.add_stopword(w);
        }
        for (variant, canonical) in DEFAULT_ABBREVIATIONS {
            cfg.add_abbreviation(variant, canonical)
                .expect("default abbreviation table is consistent");
        }
        for (irregular, singular) in DEFAULT_PLURALS {
            cfg.add_plural(irregular, singular);
        }
        cfg
    }
}

impl NormalizationConfig {
    /// No stopwords, abbreviations or plurals; Snowball stemming.
    pub fn empty() -> Self {
        Self {
            stopwords: BTreeSet::new(),
            abbreviations: BTreeMap::new(),
            marks: Vec::new(),
            plurals: BTreeMap::new(),
            stemmer: StemmerKind::default(),
        }
    }

    pub fn add_stopword(&mut self, word: &str) {
        self.stopwords.insert(word.to_lowercase());
    }

    /// Registers `variant -> canonical`. A variant may map to only one canonical form.
    pub fn add_abbreviation(&mut self, variant: &str, canonical: &str) -> Result<()> {
        let variant = variant.to_lowercase();
        let canonical = canonical.to_lowercase();
        if variant.is_empty() || canonical.trim().is_empty() {
            return Err(invalid("abbreviation needs a variant and a canonical form"));
        }
        let existing = if variant.chars().all(char::is_alphanumeric) {
            self.abbreviations.get(&variant).cloned()
        } else {
            self.marks
                .iter()
                .find(|(v, _)| *v == variant)
                .map(|(_, c)| c.clone())
        };
        match existing {
            Some(c) if c == canonical => return Ok(()),
            Some(c) => {
                return Err(invalid(format!(
                    "abbreviation {variant:?} already maps to {c:?}"
                )))
            }
            None => {}
        }
        if variant.chars().all(char::is_alphanumeric) {
            self.abbreviations.insert(variant, canonical);
        } else {
            self.marks.push((variant, canonical));
            // Longest marks first so `''` wins over `'`.
            self.marks
                .sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        }
        Ok(())
    }

    pub fn add_plural(&mut self, irregular: &str, singular: &str) {
        self.plurals
            .insert(irregular.to_lowercase(), singular.to_lowercase());
    }

    pub fn with_stemmer(mut self, stemmer: StemmerKind) -> Self {
        self.stemmer = stemmer;
        self
    }

    pub fn stemmer(&self) -> StemmerKind {
        self.stemmer
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    /// Canonical form of a whole-token abbreviation, if any.
    pub fn abbreviation(&self, token: &str) -> Option<&str> {
        self.abbreviations.get(token).map(String::as_str)
    }

    pub fn irregular_singular(&self, token: &str) -> Option<&str> {
        self.plurals.get(token).map(String::as_str)
    }

    /// Parses the line-oriented config format:
    ///
    /// ```text
    /// # comment
    /// stemmer snowball|plural|none
    /// stopword <word>
    /// abbrev <variant> <canonical...>
    /// plural <irregular> <singular>
    /// ```
    ///
    /// Directives are applied on top of an empty config.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::empty();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            let mut parts = line.split_whitespace();
            let directive = parts.next().unwrap_or_default();
            let args: Vec<&str> = parts.collect();
            match (directive, args.as_slice()) {
                ("stopword", [word]) => cfg.add_stopword(word),
                ("abbrev", [variant, canonical @ ..]) if !canonical.is_empty() => cfg
                    .add_abbreviation(variant, &canonical.join(" "))
                    .map_err(|e| err(e.to_string()))?,
                ("plural", [irregular, singular]) => cfg.add_plural(irregular, singular),
                ("stemmer", [kind]) => {
                    cfg.stemmer = kind.parse().map_err(|e: Error| err(e.to_string()))?
                }
                _ => return Err(err(format!("unrecognized directive {line:?}"))),
            }
        }
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Renders the config in the format accepted by [`parse`](Self::parse).
    pub fn to_directives(&self) -> String {
        let mut out = format!("stemmer {}\n", self.stemmer);
        for w in &self.stopwords {
            out.push_str(&format!("stopword {w}\n"));
        }
        for (v, c) in &self.marks {
            out.push_str(&format!("abbrev {v} {c}\n"));
        }
        for (v, c) in &self.abbreviations {
            out.push_str(&format!("abbrev {v} {c}\n"));
        }
        for (p, s) in &self.plurals {
            out.push_str(&format!("plural {p} {s}\n"));
        }
        out
    }

    /// Replaces unit marks that directly follow a digit with ` <canonical> `.
    pub(crate) fn expand_marks(&self, text: &str) -> String {
        if self.marks.is_empty() {
            return text.to_owned();
        }
        let mut out = String::with_capacity(text.len() + 8);
        let mut rest = text;
        let mut prev_digit = false;
        while let Some(c) = rest.chars().next() {
            if prev_digit {
                if let Some((v, canon)) = self
                    .marks
                    .iter()
                    .find(|(v, _)| rest.starts_with(v.as_str()))
                {
                    out.push(' ');
                    out.push_str(canon);
                    out.push(' ');
                    rest = &rest[v.len()..];
                    prev_digit = false;
                    continue;
                }
            }
            out.push(c);
            prev_digit = c.is_ascii_digit();
            rest = &rest[c.len_utf8()..];
        }
        out
    }

    /// Expands whole-token abbreviations. Variants that are also stopwords
    /// only expand after a numeral.
    pub(crate) fn expand_abbreviations(&self, tokens: &[String]) -> Vec<String> {
        let mut out = Vec::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            match self.abbreviations.get(tok) {
                Some(canon) if !self.is_stopword(tok) || (i > 0 && is_numeral(&tokens[i - 1])) => {
                    out.extend(canon.split_whitespace().map(str::to_owned))
                }
                _ => out.push(tok.clone()),
            }
        }
        out
    }

    /// Irregular-plural lookup, then the configured stemmer.
    pub fn stem(&self, token: &str) -> String {
        let base = self.plurals.get(token).map_or(token, String::as_str);
        match self.stemmer {
            StemmerKind::Snowball => snowball().stem(base).into_owned(),
            StemmerKind::Plural => plural_stem(base).into_owned(),
            StemmerKind::None => base.to_owned(),
        }
    }
}

/// Sorted normalized tokens of a query.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TpsKey {
    tokens: Vec<String>,
}

impl TpsKey {
    pub const SEPARATOR: char = ' ';

    /// Builds a key from tokens, sorting them.
    pub fn from_tokens(mut tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(invalid("TPS key needs at least one token"));
        }
        if tokens
            .iter()
            .any(|t| t.is_empty() || !t.chars().all(char::is_alphanumeric))
        {
            return Err(invalid("TPS key tokens must be non-empty and alphanumeric"));
        }
        tokens.sort();
        Ok(Self { tokens })
    }

    /// Inverse of [`key`](Self::key).
    pub fn from_key(key: &str) -> Result<Self> {
        Self::from_tokens(key.split(Self::SEPARATOR).map(str::to_owned).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn key(&self) -> String {
        self.tokens.join(" ")
    }
}

impl fmt::Display for TpsKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

pub(crate) fn is_numeral(token: &str) -> bool {
    !token.is_empty() && token.bytes().all(|b| b.is_ascii_digit())
}

/// Splits digit-led tokens into digit and non-digit runs: `24x20` -> `24 x 20`, `1mm` -> `1 mm`.
fn split_glued(token: &str) -> Vec<String> {
    if !token.starts_with(|c: char| c.is_ascii_digit()) {
        return vec![token.to_owned()];
    }
    let mut runs: Vec<String> = Vec::new();
    let mut current = String::new();
    let mut current_digit = true;
    for c in token.chars() {
        let d = c.is_ascii_digit();
        if !current.is_empty() && d != current_digit {
            runs.push(std::mem::take(&mut current));
        }
        current_digit = d;
        current.push(c);
    }
    runs.push(current);
    runs
}

/// Drops an `x` token sitting between two numerals.
fn drop_dimension_x(tokens: Vec<String>) -> Vec<String> {
    (0..tokens.len())
        .filter(|&i| {
            !(tokens[i] == "x"
                && i > 0
                && i + 1 < tokens.len()
                && is_numeral(&tokens[i - 1])
                && is_numeral(&tokens[i + 1]))
        })
        .map(|i| tokens[i].clone())
        .collect()
}

/// Lowercases and splits on every non-alphanumeric code point, after unit marks are expanded.
pub(crate) fn tokenize(query: &str, cfg: &NormalizationConfig) -> Vec<String> {
    let lowered = query.to_lowercase();
    let marked = cfg.expand_marks(&lowered);
    let spaced: String = marked
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    let split: Vec<String> = spaced.split_whitespace().flat_map(split_glued).collect();
    drop_dimension_x(split)
}

fn token_pass(tokens: &[String], cfg: &NormalizationConfig) -> Vec<String> {
    cfg.expand_abbreviations(tokens)
        .into_iter()
        .filter(|t| !cfg.is_stopword(t))
        .map(|t| cfg.stem(&t))
        .filter(|t| !t.is_empty())
        .collect()
}

/// Normalizes a raw query into its TPS key.
///
/// Returns [`Error::EmptyKey`] when nothing survives (e.g. a query of only stopwords).
pub fn normalize_query(query: &str, cfg: &NormalizationConfig) -> Result<TpsKey> {
    let mut tokens = tokenize(query, cfg);
    // Re-run the token stage until it settles so keys are fixed points.
    for _ in 0..MAX_TOKEN_PASSES {
        let next = token_pass(&tokens, cfg);
        if next == tokens {
            break;
        }
        tokens = next;
    }
    if tokens.is_empty() {
        return Err(Error::EmptyKey(query.to_owned()));
    }
    TpsKey::from_tokens(tokens)
}

/// Whether two queries share a TPS key.
pub fn same_tps(q1: &str, q2: &str, cfg: &NormalizationConfig) -> Result<bool> {
    Ok(normalize_query(q1, cfg)? == normalize_query(q2, cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(q: &str) -> String {
        normalize_query(q, &NormalizationConfig::default())
            .unwrap()
            .key()
    }

    #[test]
    fn worked_pairs_share_keys() {
        let pairs = [
            ("purple dress for women", "women purple dress"),
            ("battery AA", "AA battery"),
            ("24 x 20 outdoor cushion", "24x20 outdoor cushion"),
            ("30'' marble top", "30 inch marble top"),
            ("electric thing for kids", "electric things for kids"),
            ("red watch", "watch red"),
            ("heels", "the heels"),
            ("funding", "funding."),
            ("black swing coat", "black+swing+coat"),
            ("1 mm ring", "1mm ring"),
            ("T-shirt for man", "T-shirts for men"),
            ("12v battery", "12 volt battery"),
            ("30 in marble top", "30 inch marble top"),
        ];
        for (a, b) in pairs {
            assert_eq!(key(a), key(b), "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn distinct_content_differs() {
        let cfg = NormalizationConfig::default();
        assert!(!same_tps("red watch", "blue watch", &cfg).unwrap());
        assert!(same_tps("heels", "the heels", &cfg).unwrap());
        assert!(same_tps("funding", "funding.", &cfg).unwrap());
    }

    #[test]
    fn dimension_x_and_content_x() {
        assert_eq!(key("24 x 20"), "20 24");
        assert_eq!(key("24x20"), "20 24");
        assert!(key("xbox controller").contains("xbox"));
        assert!(key("x marks the spot").split(' ').any(|t| t == "x"));
    }

    #[test]
    fn in_is_a_preposition_unless_after_a_number() {
        assert_eq!(key("dress in red"), key("red dress"));
        assert_eq!(key("30 in table"), key("30 inch table"));
    }

    #[test]
    fn empty_after_normalization() {
        let cfg = NormalizationConfig::default();
        assert!(matches!(
            normalize_query("the of and", &cfg),
            Err(Error::EmptyKey(_))
        ));
        assert!(matches!(
            normalize_query("  ...  ", &cfg),
            Err(Error::EmptyKey(_))
        ));
        assert!(same_tps("the", "heels", &cfg).is_err());
    }

    #[test]
    fn key_roundtrip() {
        let k = normalize_query("Purple Dress for Women", &NormalizationConfig::default()).unwrap();
        assert_eq!(TpsKey::from_key(&k.key()).unwrap(), k);
        assert!(TpsKey::from_key("").is_err());
    }

    #[test]
    fn plural_stemmer() {
        for (w, s) in [
            ("queries", "query"),
            ("phrases", "phrase"),
            ("corpus", "corpus"),
            ("stress", "stress"),
            ("kings", "king"),
            ("things", "thing"),
            ("toys", "toy"),
            ("is", "is"),
            ("shoes", "shoes"),
        ] {
            assert_eq!(plural_stem(w), s, "{w}");
        }
    }

    #[test]
    fn config_roundtrip_and_errors() {
        let cfg = NormalizationConfig::default();
        let again = NormalizationConfig::parse(&cfg.to_directives()).unwrap();
        assert_eq!(again, cfg);

        let custom = NormalizationConfig::parse(
            "# units\nstemmer plural\nstopword with\nabbrev qt quart\nplural oxen ox\n",
        )
        .unwrap();
        assert_eq!(custom.stemmer(), StemmerKind::Plural);
        assert!(custom.is_stopword("with"));
        assert_eq!(custom.abbreviation("qt"), Some("quart"));
        assert_eq!(custom.irregular_singular("oxen"), Some("ox"));

        let err = NormalizationConfig::parse("stopword a\nbogus x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = NormalizationConfig::parse("abbrev v volt\nabbrev v vee\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn marks_only_after_digits() {
        let cfg = NormalizationConfig::default();
        assert_eq!(cfg.expand_marks("30'' top"), "30 inch  top");
        assert_eq!(cfg.expand_marks("\"the heels\""), "\"the heels\"");
    }
}
