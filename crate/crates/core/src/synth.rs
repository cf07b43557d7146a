//! Seeded generators: list perturbations, labeled query pairs and whole search logs
//! with a ground-truth sidecar.
//!
//! Every generator is a pure function of its spec and seed. The random source is
//! ChaCha8 seeded through `SeedableRng::seed_from_u64`.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::{Duration, NaiveDate};
use rand::seq::{index, SliceRandom};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::metrics::{ItemId, RankedList};
use crate::normalize::{normalize_query, plural_stem, NormalizationConfig, PREPOSITIONS};
use crate::taxonomy::{classify, TaxonomyLabel};

/// Locale used for the records that the default locale filter removes.
pub const FOREIGN_LOCALE: &str = "es-US";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PerturbationKind {
    /// Swap ranks `j` and `j + 1` (1-based).
    AdjacentSwap(usize),
    /// Swap ranks 1 and 2.
    TopSwap,
    /// Replace the last `m` items with items absent from the list.
    TailReplace(usize),
    /// Keep the first `m` items.
    Truncate(usize),
    /// Uniform random permutation.
    Shuffle,
    Identity,
}

impl fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::AdjacentSwap(j) => write!(f, "adjacent_swap:{j}"),
            Self::TopSwap => f.write_str("top_swap"),
            Self::TailReplace(m) => write!(f, "tail_replace:{m}"),
            Self::Truncate(m) => write!(f, "truncate:{m}"),
            Self::Shuffle => f.write_str("permute"),
            Self::Identity => f.write_str("identity"),
        }
    }
}

impl FromStr for PerturbationKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = || -> Result<usize> {
            arg.ok_or_else(|| invalid(format!("{name} needs a parameter, e.g. {name}:2")))?
                .parse()
                .map_err(|_| invalid(format!("bad parameter in {s:?}")))
        };
        let kind = match name {
            "adjacent_swap" => Self::AdjacentSwap(num()?),
            "tail_replace" => Self::TailReplace(num()?),
            "truncate" => Self::Truncate(num()?),
            "top_swap" | "permute" | "identity" if arg.is_some() => {
                return Err(invalid(format!("{name} takes no parameter")))
            }
            "top_swap" => Self::TopSwap,
            "permute" => Self::Shuffle,
            "identity" => Self::Identity,
            _ => return Err(invalid(format!("unknown perturbation {s:?}"))),
        };
        Ok(kind)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn new(kind: PerturbationKind, seed: u64) -> Self {
        Self { kind, seed }
    }
}

/// Smallest positive integers, as ids, that are not already in the list.
fn fresh_items(list: &RankedList, n: usize) -> Vec<ItemId> {
    let mut out = Vec::with_capacity(n);
    let mut k: u64 = 1;
    while out.len() < n {
        let id = k.to_string();
        if !list.contains(&id) {
            out.push(ItemId::new(id));
        }
        k += 1;
    }
    out
}

pub fn perturb(list: &RankedList, spec: &PerturbationSpec) -> Result<RankedList> {
    let n = list.len();
    let mut items = list.items().to_vec();
    match spec.kind {
        PerturbationKind::AdjacentSwap(j) => {
            if j == 0 || j >= n {
                return Err(invalid(format!("adjacent_swap({j}) needs 1 <= j < {n}")));
            }
            items.swap(j - 1, j);
        }
        PerturbationKind::TopSwap => {
            if n < 2 {
                return Err(invalid("top_swap needs at least two items"));
            }
            items.swap(0, 1);
        }
        PerturbationKind::TailReplace(m) => {
            if m == 0 || m > n {
                return Err(invalid(format!("tail_replace({m}) needs 1 <= m <= {n}")));
            }
            items.truncate(n - m);
            items.extend(fresh_items(list, m));
        }
        PerturbationKind::Truncate(m) => {
            if m == 0 || m > n {
                return Err(invalid(format!("truncate({m}) needs 1 <= m <= {n}")));
            }
            items.truncate(m);
        }
        PerturbationKind::Shuffle => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            items.shuffle(&mut rng);
        }
        PerturbationKind::Identity => {}
    }
    RankedList::new(items)
}

/// Word lists the query generators draw from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    pub adjectives: Vec<String>,
    /// Singular nouns whose plural the plural stemmer folds back.
    pub nouns: Vec<String>,
    pub audiences: Vec<String>,
    /// Unit words written next to a number, such as `mm`.
    pub units: Vec<String>,
}

fn owned(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| (*w).to_owned()).collect()
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self {
            adjectives: owned(&[
                "red",
                "blue",
                "black",
                "white",
                "green",
                "purple",
                "pink",
                "silver",
                "golden",
                "wooden",
                "leather",
                "cotton",
                "wireless",
                "electric",
                "portable",
                "vintage",
                "modern",
                "rustic",
                "outdoor",
                "indoor",
                "waterproof",
                "small",
                "large",
                "soft",
                "round",
                "square",
                "slim",
                "heavy",
                "bright",
                "warm",
                "cozy",
                "classic",
            ]),
            nouns: owned(&[
                "lamp", "chair", "table", "jacket", "blanket", "pillow", "mug", "bottle",
                "backpack", "speaker", "charger", "cable", "candle", "mirror", "rug", "towel",
                "sweater", "boot", "sneaker", "sandal", "helmet", "guitar", "drone", "camera",
                "keyboard", "monitor", "router", "printer", "tent", "hammock", "kettle", "blender",
                "toaster", "heater", "fan", "umbrella", "wallet", "necklace", "ring", "bracelet",
                "earring", "battery", "toy", "cushion", "coat", "dress", "heel",
            ]),
            audiences: owned(&["kids", "women", "men", "girls", "boys", "toddlers", "teens"]),
            units: owned(&["mm", "cm", "gb", "ml", "kg", "mah"]),
        }
    }
}

impl Vocabulary {
    fn check(&self) -> Result<()> {
        if self.adjectives.is_empty()
            || self.nouns.is_empty()
            || self.audiences.is_empty()
            || self.units.is_empty()
        {
            return Err(invalid("vocabulary word lists must be non-empty"));
        }
        Ok(())
    }

    fn pick<'a, R: Rng>(words: &'a [String], rng: &mut R) -> &'a str {
        &words[rng.gen_range(0..words.len())]
    }

    /// A short product query such as `wooden lamp` or `kids red boot`.
    pub fn base_query<R: Rng>(&self, rng: &mut R) -> String {
        let adj = Self::pick(&self.adjectives, rng);
        let noun = Self::pick(&self.nouns, rng);
        match rng.gen_range(0..4) {
            0 => {
                let adj2 = Self::pick(&self.adjectives, rng);
                if adj2 == adj {
                    format!("{adj} {noun}")
                } else {
                    format!("{adj2} {adj} {noun}")
                }
            }
            1 => format!("{} {adj} {noun}", Self::pick(&self.audiences, rng)),
            _ => format!("{adj} {noun}"),
        }
    }
}

/// Request for one labeled pair.
#[derive(Clone, Debug)]
pub struct SynthPairSpec<'a> {
    /// Query to transform; a vocabulary query is used when absent or unsuitable.
    pub base: Option<&'a str>,
    pub label: TaxonomyLabel,
    pub vocabulary: &'a Vocabulary,
    pub seed: u64,
}

fn tokens(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}

fn pluralize(word: &str) -> Option<String> {
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    if n >= 2 && chars[n - 1] == 'y' && !"aeiou".contains(chars[n - 2]) {
        return Some(format!("{}ies", &word[..word.len() - 1]));
    }
    let regular = format!("{word}s");
    (plural_stem(&regular) == word).then_some(regular)
}

fn singular_plural(base: &str, cfg: &NormalizationConfig) -> Option<(String, String)> {
    let toks = tokens(base);
    // The head noun sits before any prepositional phrase.
    let head_end = toks
        .iter()
        .position(|t| PREPOSITIONS.contains(&t.as_str()))
        .filter(|&p| p > 0)
        .unwrap_or(toks.len());
    for i in (0..head_end).rev() {
        let t = &toks[i];
        let singular = cfg.irregular_singular(t).map(str::to_owned).or_else(|| {
            let s = plural_stem(t);
            (s != t.as_str()).then(|| s.into_owned())
        });
        if let Some(s) = singular {
            let mut one = toks.clone();
            one[i] = s;
            return Some((one.join(" "), base.to_owned()));
        }
        if let Some(p) = pluralize(t) {
            let mut many = toks.clone();
            many[i] = p;
            return Some((base.to_owned(), many.join(" ")));
        }
    }
    None
}

fn is_number(t: &str) -> bool {
    !t.is_empty() && t.chars().all(|c| c.is_ascii_digit())
}

fn space_variant<R: Rng>(base: &str, vocab: &Vocabulary, rng: &mut R) -> (String, String) {
    let toks = tokens(base);
    for i in 0..toks.len().saturating_sub(1) {
        if is_number(&toks[i]) && toks[i + 1].chars().all(|c| c.is_alphabetic()) {
            let mut glued = toks.clone();
            let unit = glued.remove(i + 1);
            glued[i].push_str(&unit);
            return (base.to_owned(), glued.join(" "));
        }
    }
    let n = rng.gen_range(1..=60);
    if rng.gen_bool(0.5) {
        let unit = Vocabulary::pick(&vocab.units, rng);
        (format!("{n} {unit} {base}"), format!("{n}{unit} {base}"))
    } else {
        let m = rng.gen_range(1..=60);
        (format!("{n} x {m} {base}"), format!("{n}x{m} {base}"))
    }
}

fn candidate<R: Rng>(
    base: &str,
    label: TaxonomyLabel,
    vocab: &Vocabulary,
    cfg: &NormalizationConfig,
    rng: &mut R,
) -> Option<(String, String)> {
    let toks = tokens(base);
    if toks.is_empty() {
        return None;
    }
    let pair = match label {
        TaxonomyLabel::Preposition => {
            let aud = Vocabulary::pick(&vocab.audiences, rng);
            (format!("{base} for {aud}"), format!("{aud} {base}"))
        }
        TaxonomyLabel::Abbreviation => {
            let n = rng.gen_range(1..=60);
            let (short, long) = match rng.gen_range(0..3) {
                0 => ("''", "inch"),
                1 => (" in", "inch"),
                _ => (" v", "volt"),
            };
            (format!("{n}{short} {base}"), format!("{n} {long} {base}"))
        }
        TaxonomyLabel::SingularPlural => singular_plural(base, cfg)?,
        TaxonomyLabel::WordOrder => {
            let mut t = toks.clone();
            if t.len() == 1 {
                t.insert(0, Vocabulary::pick(&vocab.adjectives, rng).to_owned());
            }
            let original = t.join(" ");
            t.rotate_left(1);
            (original, t.join(" "))
        }
        TaxonomyLabel::Article => (base.to_owned(), format!("the {base}")),
        TaxonomyLabel::Punctuation => {
            let mark = [".", "!", "?"][rng.gen_range(0..3)];
            (base.to_owned(), format!("{base}{mark}"))
        }
        TaxonomyLabel::Space => space_variant(base, vocab, rng),
        TaxonomyLabel::WordsConnection => {
            let mut t = toks.clone();
            if t.len() == 1 {
                t.insert(0, Vocabulary::pick(&vocab.adjectives, rng).to_owned());
            }
            (t.join(" "), t.join("+"))
        }
        TaxonomyLabel::Unclassified => return None,
    };
    Some(pair)
}

const PAIR_ATTEMPTS: usize = 64;

/// Generates `(q1, q2, label)` where `classify(q1, q2)` is `label`.
pub fn gen_pair_with(
    spec: &SynthPairSpec<'_>,
    cfg: &NormalizationConfig,
) -> Result<(String, String, TaxonomyLabel)> {
    if spec.label == TaxonomyLabel::Unclassified {
        return Err(invalid("cannot generate an unclassified pair"));
    }
    spec.vocabulary.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let given = spec.base.map(|b| b.trim().to_lowercase());
    for attempt in 0..PAIR_ATTEMPTS {
        let base = match (&given, attempt) {
            (Some(b), 0) => b.clone(),
            _ => spec.vocabulary.base_query(&mut rng),
        };
        if let Some((q1, q2)) = candidate(&base, spec.label, spec.vocabulary, cfg, &mut rng) {
            if q1 != q2 && classify(&q1, &q2, cfg).ok() == Some(spec.label) {
                return Ok((q1, q2, spec.label));
            }
        }
    }
    Err(invalid(format!(
        "no {} pair found for the vocabulary",
        spec.label.code()
    )))
}

/// [`gen_pair_with`] under the default normalization config.
pub fn gen_pair(spec: &SynthPairSpec<'_>) -> Result<(String, String, TaxonomyLabel)> {
    gen_pair_with(spec, &NormalizationConfig::default())
}

/// How each week's observed list departs from the ground truth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseModel {
    /// Every week shows the ground truth.
    Identity,
    /// Every week shows a random selection from the query group's item pool.
    Shuffle,
    /// A fixed perturbation of the ground truth, freshly seeded per query and week.
    Perturb(PerturbationKind),
    /// Item scores are the true rank plus Gaussian noise; each query group draws
    /// its noise scale log-uniformly from `[sigma_min, sigma_max]`.
    Jitter { sigma_min: f64, sigma_max: f64 },
    /// Each true item survives a week with the group's retention rate, drawn
    /// uniformly from `[keep_min, keep_max]`. Survivors keep their true order and
    /// the rest of the list is filled with other pool items in random order.
    Dropout { keep_min: f64, keep_max: f64 },
}

impl NoiseModel {
    pub const DEFAULT_JITTER: NoiseModel = NoiseModel::Jitter {
        sigma_min: 1.0,
        sigma_max: 200.0,
    };

    pub const DEFAULT_DROPOUT: NoiseModel = NoiseModel::Dropout {
        keep_min: 0.1,
        keep_max: 1.0,
    };

    fn validate(&self) -> Result<()> {
        if let Self::Jitter {
            sigma_min,
            sigma_max,
        } = *self
        {
            if !(sigma_min > 0.0 && sigma_min <= sigma_max && sigma_max.is_finite()) {
                return Err(invalid("jitter needs 0 < sigma_min <= sigma_max"));
            }
        }
        if let Self::Dropout { keep_min, keep_max } = *self {
            if !(0.0 <= keep_min && keep_min <= keep_max && keep_max <= 1.0) {
                return Err(invalid("dropout needs 0 <= keep_min <= keep_max <= 1"));
            }
        }
        Ok(())
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => f.write_str("identity"),
            Self::Shuffle => f.write_str("shuffle"),
            Self::Perturb(k) => write!(f, "{k}"),
            Self::Jitter {
                sigma_min,
                sigma_max,
            } => write!(f, "jitter:{sigma_min}:{sigma_max}"),
            Self::Dropout { keep_min, keep_max } => write!(f, "dropout:{keep_min}:{keep_max}"),
        }
    }
}

impl FromStr for NoiseModel {
    type Err = crate::Error;

    /// `identity`, `shuffle`, `jitter[:MIN:MAX]`, `dropout[:MIN:MAX]` or a perturbation kind.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => return Ok(Self::Identity),
            "shuffle" => return Ok(Self::Shuffle),
            "jitter" => return Ok(Self::DEFAULT_JITTER),
            "dropout" => return Ok(Self::DEFAULT_DROPOUT),
            _ => {}
        }
        let range = |rest: &str| -> Result<(f64, f64)> {
            let (a, b) = rest
                .split_once(':')
                .ok_or_else(|| invalid(format!("expected MIN:MAX in {s:?}")))?;
            let parse = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| invalid(format!("bad number {v:?}")))
            };
            Ok((parse(a)?, parse(b)?))
        };
        let model = if let Some(rest) = s.strip_prefix("jitter:") {
            let (sigma_min, sigma_max) = range(rest)?;
            Self::Jitter {
                sigma_min,
                sigma_max,
            }
        } else if let Some(rest) = s.strip_prefix("dropout:") {
            let (keep_min, keep_max) = range(rest)?;
            Self::Dropout { keep_min, keep_max }
        } else {
            Self::Perturb(s.parse()?)
        };
        model.validate()?;
        Ok(model)
    }
}

/// Parameters of a synthetic multi-week log.
#[derive(Clone, Debug, PartialEq)]
pub struct LogSpec {
    /// Number of query groups; each group shares one TPS key and one true ranking.
    pub queries: usize,
    pub weeks: usize,
    pub start_week: NaiveDate,
    pub step_days: i64,
    pub list_len: usize,
    /// Item pool size per group, as a multiple of `list_len`.
    pub pool_factor: usize,
    pub noise: NoiseModel,
    pub seed: u64,
    /// Share of queries also logged under [`FOREIGN_LOCALE`].
    pub foreign_rate: f64,
}

impl Default for LogSpec {
    fn default() -> Self {
        Self {
            queries: 100,
            weeks: 5,
            start_week: NaiveDate::from_ymd_opt(2023, 4, 15).expect("valid date"),
            step_days: 7,
            list_len: 20,
            pool_factor: 10,
            noise: NoiseModel::Identity,
            seed: 0,
            foreign_rate: 0.05,
        }
    }
}

impl LogSpec {
    pub fn validate(&self) -> Result<()> {
        if self.queries == 0 || self.weeks == 0 || self.list_len == 0 || self.pool_factor == 0 {
            return Err(invalid(
                "queries, weeks, list_len and pool_factor must be positive",
            ));
        }
        if self.step_days <= 0 {
            return Err(invalid("step_days must be positive"));
        }
        if !(0.0..=1.0).contains(&self.foreign_rate) {
            return Err(invalid("foreign_rate must be in [0, 1]"));
        }
        self.noise.validate()
    }

    pub fn week(&self, i: usize) -> NaiveDate {
        self.start_week + Duration::days(self.step_days * i as i64)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LogSummary {
    pub groups: usize,
    pub queries: usize,
    pub weeks: usize,
    pub records: usize,
    pub foreign_records: usize,
}

struct Group {
    queries: Vec<(String, u64)>,
    pool: Vec<ItemId>,
    /// Noise scale for jitter, retention rate for dropout.
    level: f64,
}

const VARIANT_LABELS: [TaxonomyLabel; 5] = [
    TaxonomyLabel::SingularPlural,
    TaxonomyLabel::WordOrder,
    TaxonomyLabel::Article,
    TaxonomyLabel::Punctuation,
    TaxonomyLabel::WordsConnection,
];

const BASE_ATTEMPTS: usize = 1000;

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..=hi.ln())).exp()
}

fn build_groups(spec: &LogSpec, vocab: &Vocabulary, rng: &mut ChaCha8Rng) -> Result<Vec<Group>> {
    let cfg = NormalizationConfig::default();
    let mut keys = HashSet::new();
    let mut groups = Vec::with_capacity(spec.queries);
    let pool_len = spec.list_len * spec.pool_factor;
    for g in 0..spec.queries {
        let mut base = None;
        for _ in 0..BASE_ATTEMPTS {
            let candidate = vocab.base_query(rng);
            let key = normalize_query(&candidate, &cfg)?.key();
            if keys.insert(key) {
                base = Some(candidate);
                break;
            }
        }
        let base = base.ok_or_else(|| invalid("vocabulary too small for the query count"))?;
        let key = normalize_query(&base, &cfg)?;

        let mut names = BTreeSet::from([base.clone()]);
        let wanted = rng.gen_range(1..=3);
        let mut labels = VARIANT_LABELS;
        labels.shuffle(rng);
        for label in labels {
            if names.len() > wanted {
                break;
            }
            let pair_spec = SynthPairSpec {
                base: Some(&base),
                label,
                vocabulary: vocab,
                seed: rng.next_u64(),
            };
            let Ok((q1, q2, _)) = gen_pair_with(&pair_spec, &cfg) else {
                continue;
            };
            for q in [q1, q2] {
                if normalize_query(&q, &cfg).ok().as_ref() == Some(&key) {
                    names.insert(q);
                }
            }
        }

        let queries = names
            .into_iter()
            .take(wanted + 1)
            .map(|q| (q, log_uniform(rng, 10.0, 10_000.0).round() as u64))
            .collect();
        let mut pool: Vec<ItemId> = (0..pool_len)
            .map(|i| ItemId::new(format!("g{g}i{i}")))
            .collect();
        pool.shuffle(rng);
        let level = match spec.noise {
            NoiseModel::Jitter {
                sigma_min,
                sigma_max,
            } => log_uniform(rng, sigma_min, sigma_max),
            NoiseModel::Dropout { keep_min, keep_max } => rng.gen_range(keep_min..=keep_max),
            _ => 0.0,
        };
        groups.push(Group {
            queries,
            pool,
            level,
        });
    }
    Ok(groups)
}

fn observe(
    spec: &LogSpec,
    group: &Group,
    truth: &RankedList,
    rng: &mut ChaCha8Rng,
) -> Result<RankedList> {
    let n = spec.list_len;
    match spec.noise {
        NoiseModel::Identity => Ok(truth.clone()),
        NoiseModel::Shuffle => {
            let picked = index::sample(rng, group.pool.len(), n);
            RankedList::new(picked.into_iter().map(|i| group.pool[i].clone()))
        }
        NoiseModel::Perturb(kind) => perturb(truth, &PerturbationSpec::new(kind, rng.next_u64())),
        NoiseModel::Jitter { .. } => {
            let mut scored: Vec<(f64, usize)> = (0..group.pool.len())
                .map(|i| {
                    let z: f64 = StandardNormal.sample(rng);
                    (i as f64 + group.level * z, i)
                })
                .collect();
            scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            RankedList::new(
                scored
                    .into_iter()
                    .take(n)
                    .map(|(_, i)| group.pool[i].clone()),
            )
        }
        NoiseModel::Dropout { .. } => {
            let mut items: Vec<ItemId> = truth
                .items()
                .iter()
                .filter(|_| rng.gen_bool(group.level))
                .cloned()
                .collect();
            let others = &group.pool[truth.len()..];
            let fill = index::sample(rng, others.len(), n - items.len());
            items.extend(fill.into_iter().map(|i| others[i].clone()));
            RankedList::new(items)
        }
    }
}

/// Writes a multi-week log in ingest format and a `query<TAB>item<TAB>true_rank` sidecar.
pub fn gen_log<W: Write, T: Write>(spec: &LogSpec, mut log: W, mut truth: T) -> Result<LogSummary> {
    spec.validate()?;
    let vocab = Vocabulary::default();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let groups = build_groups(spec, &vocab, &mut rng)?;

    let truths: Vec<RankedList> = groups
        .iter()
        .map(|g| RankedList::new(g.pool.iter().take(spec.list_len).cloned()))
        .collect::<Result<_>>()?;
    for (g, t) in groups.iter().zip(&truths) {
        for (q, _) in &g.queries {
            for (r, item) in t.items().iter().enumerate() {
                writeln!(truth, "{q}\t{item}\t{}", r + 1)?;
            }
        }
    }

    let mut summary = LogSummary {
        groups: groups.len(),
        queries: groups.iter().map(|g| g.queries.len()).sum(),
        weeks: spec.weeks,
        ..LogSummary::default()
    };
    for w in 0..spec.weeks {
        let week = spec.week(w);
        for (g, t) in groups.iter().zip(&truths) {
            for (q, freq) in &g.queries {
                let observed = observe(spec, g, t, &mut rng)?;
                let foreign = rng.gen_bool(spec.foreign_rate);
                for (r, item) in observed.items().iter().enumerate() {
                    let pos = (r + 1) as f64 + rng.gen_range(0.0..0.49);
                    writeln!(log, "{week}\ten-US\t{q}\t{item}\t{pos:.2}\t{freq}")?;
                    summary.records += 1;
                }
                if foreign {
                    let shown = index::sample(&mut rng, g.pool.len(), spec.list_len);
                    for (r, i) in shown.into_iter().enumerate() {
                        let pos = (r + 1) as f64 + rng.gen_range(0.0..0.49);
                        let item = &g.pool[i];
                        writeln!(
                            log,
                            "{week}\t{FOREIGN_LOCALE}\t{q}\t{item}\t{pos:.2}\t{freq}"
                        )?;
                        summary.foreign_records += 1;
                    }
                }
            }
        }
    }
    log.flush()?;
    truth.flush()?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_log;

    fn r(items: &[&str]) -> RankedList {
        RankedList::new(items.iter().copied()).unwrap()
    }

    fn apply(kind: PerturbationKind) -> Result<RankedList> {
        perturb(&r(&["1", "2", "3", "4"]), &PerturbationSpec::new(kind, 9))
    }

    #[test]
    fn constructed_lists() {
        assert_eq!(
            apply(PerturbationKind::AdjacentSwap(3)).unwrap(),
            r(&["1", "2", "4", "3"])
        );
        assert_eq!(
            apply(PerturbationKind::TailReplace(2)).unwrap(),
            r(&["1", "2", "5", "6"])
        );
        assert_eq!(
            apply(PerturbationKind::Identity).unwrap(),
            r(&["1", "2", "3", "4"])
        );
        assert_eq!(
            apply(PerturbationKind::TopSwap).unwrap(),
            r(&["2", "1", "3", "4"])
        );
        assert_eq!(
            apply(PerturbationKind::Truncate(2)).unwrap(),
            r(&["1", "2"])
        );
    }

    #[test]
    fn out_of_bounds_parameters() {
        for kind in [
            PerturbationKind::AdjacentSwap(0),
            PerturbationKind::AdjacentSwap(4),
            PerturbationKind::TailReplace(5),
            PerturbationKind::Truncate(0),
        ] {
            assert!(apply(kind).is_err(), "{kind}");
        }
        assert!(perturb(
            &r(&["a"]),
            &PerturbationSpec::new(PerturbationKind::TopSwap, 0)
        )
        .is_err());
    }

    #[test]
    fn fresh_items_skip_existing_ids() {
        let l = r(&["2", "x", "1"]);
        let out = perturb(
            &l,
            &PerturbationSpec::new(PerturbationKind::TailReplace(1), 0),
        )
        .unwrap();
        assert_eq!(out, r(&["2", "x", "3"]));
    }

    #[test]
    fn permute_is_seeded() {
        let l = RankedList::new((1..=30u32).map(ItemId::from)).unwrap();
        let a = perturb(&l, &PerturbationSpec::new(PerturbationKind::Shuffle, 5)).unwrap();
        let b = perturb(&l, &PerturbationSpec::new(PerturbationKind::Shuffle, 5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, l);
    }

    #[test]
    fn kinds_roundtrip_through_text() {
        for kind in [
            PerturbationKind::AdjacentSwap(3),
            PerturbationKind::TopSwap,
            PerturbationKind::TailReplace(2),
            PerturbationKind::Truncate(7),
            PerturbationKind::Shuffle,
            PerturbationKind::Identity,
        ] {
            assert_eq!(kind.to_string().parse::<PerturbationKind>().unwrap(), kind);
        }
        assert!("swap".parse::<PerturbationKind>().is_err());
        assert!("truncate".parse::<PerturbationKind>().is_err());
        assert_eq!(
            "jitter:1:5".parse::<NoiseModel>().unwrap().to_string(),
            "jitter:1:5"
        );
        assert!("jitter:5:1".parse::<NoiseModel>().is_err());
    }

    fn pair(base: &str, label: TaxonomyLabel) -> (String, String, TaxonomyLabel) {
        let vocab = Vocabulary::default();
        gen_pair(&SynthPairSpec {
            base: Some(base),
            label,
            vocabulary: &vocab,
            seed: 1,
        })
        .unwrap()
    }

    #[test]
    fn table_templates() {
        assert_eq!(
            pair("heels", TaxonomyLabel::Article),
            ("heels".into(), "the heels".into(), TaxonomyLabel::Article)
        );
        assert_eq!(
            pair("red watch", TaxonomyLabel::WordOrder),
            (
                "red watch".into(),
                "watch red".into(),
                TaxonomyLabel::WordOrder
            )
        );
        assert_eq!(
            pair("1 mm ring", TaxonomyLabel::Space),
            ("1 mm ring".into(), "1mm ring".into(), TaxonomyLabel::Space)
        );
        assert_eq!(
            pair("black swing coat", TaxonomyLabel::WordsConnection).1,
            "black+swing+coat"
        );
        assert_eq!(
            pair("electric things for kids", TaxonomyLabel::SingularPlural).0,
            "electric thing for kids"
        );
    }

    #[test]
    fn every_label_roundtrips() {
        let vocab = Vocabulary::default();
        let cfg = NormalizationConfig::default();
        for label in &TaxonomyLabel::ALL[..8] {
            for seed in 0..50 {
                let spec = SynthPairSpec {
                    base: None,
                    label: *label,
                    vocabulary: &vocab,
                    seed,
                };
                let (q1, q2, l) = gen_pair(&spec).unwrap();
                assert_eq!(l, *label);
                assert_eq!(classify(&q1, &q2, &cfg).unwrap(), *label, "{q1:?} / {q2:?}");
                assert_eq!(gen_pair(&spec).unwrap(), (q1, q2, l));
            }
        }
    }

    #[test]
    fn unclassified_and_empty_vocabulary_fail() {
        let vocab = Vocabulary::default();
        let spec = SynthPairSpec {
            base: None,
            label: TaxonomyLabel::Unclassified,
            vocabulary: &vocab,
            seed: 0,
        };
        assert!(gen_pair(&spec).is_err());
        let empty = Vocabulary {
            nouns: vec![],
            ..Vocabulary::default()
        };
        let spec = SynthPairSpec {
            label: TaxonomyLabel::Article,
            vocabulary: &empty,
            ..spec
        };
        assert!(gen_pair(&spec).is_err());
    }

    fn small_log(noise: NoiseModel, seed: u64) -> (Vec<u8>, Vec<u8>, LogSummary) {
        let spec = LogSpec {
            queries: 12,
            weeks: 2,
            noise,
            seed,
            ..LogSpec::default()
        };
        let (mut log, mut truth) = (Vec::new(), Vec::new());
        let summary = gen_log(&spec, &mut log, &mut truth).unwrap();
        (log, truth, summary)
    }

    #[test]
    fn log_is_deterministic_and_parses() {
        let a = small_log(NoiseModel::DEFAULT_JITTER, 4);
        let b = small_log(NoiseModel::DEFAULT_JITTER, 4);
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_ne!(a.0, small_log(NoiseModel::DEFAULT_JITTER, 5).0);
        let parsed = parse_log(&a.0[..], true).unwrap();
        assert_eq!(parsed.malformed, 0);
        assert_eq!(parsed.records.len(), a.2.records + a.2.foreign_records);
        assert_eq!(a.2.groups, 12);
        assert!(a.2.queries >= 24 && a.2.queries <= 48);
        let truth_rows = String::from_utf8(a.1).unwrap().lines().count();
        assert_eq!(truth_rows, a.2.queries * 20);
    }

    #[test]
    fn group_queries_share_a_key() {
        let (log, _, _) = small_log(NoiseModel::Identity, 8);
        let parsed = parse_log(&log[..], true).unwrap();
        let cfg = NormalizationConfig::default();
        let mut by_group: std::collections::BTreeMap<String, BTreeSet<String>> = Default::default();
        for rec in &parsed.records {
            let group = rec.item.as_str().split('i').next().unwrap().to_owned();
            by_group.entry(group).or_default().insert(rec.query.clone());
        }
        let mut keys = HashSet::new();
        for qs in by_group.values() {
            let ks: BTreeSet<String> = qs
                .iter()
                .map(|q| normalize_query(q, &cfg).unwrap().key())
                .collect();
            assert_eq!(ks.len(), 1, "{qs:?}");
            assert!(keys.insert(ks.into_iter().next().unwrap()));
        }
    }
}
