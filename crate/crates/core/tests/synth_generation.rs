use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rankrobust::ingest::{
    apply_filters, parse_log, split_by_week, DatasetCollection, FilterParams,
};
use rankrobust::pairs::{evaluate_pairs, tps_pairs, PairSource};
use rankrobust::synth::{gen_log, gen_pair, LogSpec, NoiseModel, SynthPairSpec, Vocabulary};
use rankrobust::taxonomy::{classify, classify_corpus};
use rankrobust::{NormalizationConfig, QueryPair, TaxonomyLabel};

const LABELS: [TaxonomyLabel; 8] = [
    TaxonomyLabel::Preposition,
    TaxonomyLabel::Abbreviation,
    TaxonomyLabel::SingularPlural,
    TaxonomyLabel::WordOrder,
    TaxonomyLabel::Article,
    TaxonomyLabel::Punctuation,
    TaxonomyLabel::Space,
    TaxonomyLabel::WordsConnection,
];

proptest! {
    #[test]
    fn generated_pairs_classify_to_their_label(seed in any::<u64>(), idx in 0usize..8) {
        let vocab = Vocabulary::default();
        let spec = SynthPairSpec { base: None, label: LABELS[idx], vocabulary: &vocab, seed };
        let (q1, q2, label) = gen_pair(&spec).unwrap();
        prop_assert_eq!(label, LABELS[idx]);
        prop_assert_eq!(classify(&q1, &q2, &NormalizationConfig::default()).unwrap(), label);
    }
}

#[test]
fn recovered_label_distribution_matches_generation() {
    let vocab = Vocabulary::default();
    let cfg = NormalizationConfig::default();
    let week = chrono::NaiveDate::from_ymd_opt(2023, 4, 15).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut expected: BTreeMap<TaxonomyLabel, usize> = BTreeMap::new();
    let mut pairs = Vec::new();
    for _ in 0..1000 {
        let label = LABELS[rng.gen_range(0..8)];
        let spec = SynthPairSpec {
            base: None,
            label,
            vocabulary: &vocab,
            seed: rng.gen(),
        };
        let (q1, q2, l) = gen_pair(&spec).unwrap();
        *expected.entry(l).or_default() += 1;
        pairs.push(QueryPair::new(&q1, &q2, PairSource::Tps, None, week).unwrap());
    }
    let table = classify_corpus(&pairs, &cfg).unwrap();
    for label in LABELS {
        assert_eq!(
            table.count(label),
            expected.get(&label).copied().unwrap_or(0),
            "{label}"
        );
    }
    assert_eq!(table.count(TaxonomyLabel::Unclassified), 0);
    assert!(table.overflow.is_empty());
}

fn generate(noise: NoiseModel, seed: u64) -> (Vec<u8>, Vec<u8>) {
    let spec = LogSpec {
        queries: 60,
        weeks: 3,
        noise,
        seed,
        ..LogSpec::default()
    };
    let (mut log, mut truth) = (Vec::new(), Vec::new());
    gen_log(&spec, &mut log, &mut truth).unwrap();
    (log, truth)
}

fn dataset(log: &[u8]) -> DatasetCollection {
    let parsed = parse_log(log, true).unwrap();
    assert_eq!(parsed.malformed, 0);
    let cfg = NormalizationConfig::default();
    split_by_week(parsed.records)
        .into_values()
        .map(|recs| apply_filters(&recs, &FilterParams::default(), &cfg).unwrap())
        .collect()
}

#[test]
fn every_noise_model_parses_cleanly() {
    for noise in [
        "identity",
        "shuffle",
        "jitter",
        "dropout",
        "adjacent_swap:3",
        "permute",
    ] {
        let (log, _) = generate(noise.parse().unwrap(), 3);
        let parsed = parse_log(&log[..], true).unwrap();
        assert_eq!(parsed.malformed, 0, "{noise}");
        assert!(!parsed.records.is_empty());
    }
}

#[test]
fn identity_noise_gives_perfect_similarity() {
    let (log, truth) = generate(NoiseModel::Identity, 21);
    let data = dataset(&log);
    let cfg = NormalizationConfig::default();
    let mut n = 0;
    for ds in data.iter() {
        let ev = evaluate_pairs(&tps_pairs(ds, &cfg), &data);
        assert_eq!(ev.skipped, 0);
        for (pair, r) in &ev.results {
            assert_eq!(r.similarity, 1.0, "{pair:?}");
            n += 1;
        }
    }
    assert!(n > 0);

    // Observed lists match the sidecar ranking.
    let truth = String::from_utf8(truth).unwrap();
    let ds = data.iter().next().unwrap();
    for line in truth.lines() {
        let f: Vec<&str> = line.split('\t').collect();
        if let Some(list) = ds.list(f[0]) {
            assert_eq!(list.rank_of(f[1]), Some(f[2].parse().unwrap()));
        }
    }
}

#[test]
fn same_seed_same_bytes() {
    let noise: NoiseModel = "dropout".parse().unwrap();
    assert_eq!(generate(noise, 9), generate(noise, 9));
    assert_ne!(generate(noise, 9).0, generate(noise, 10).0);
}
