use std::collections::BTreeMap;

use chrono::NaiveDate;
use proptest::prelude::*;
use proptest::sample::subsequence;

use rankrobust::ensemble::{
    ensemble_list, ensemble_rankings, mean_rank, series_from_datasets, smoothed_vs_single,
    SnapshotSeries,
};
use rankrobust::ingest::{
    apply_filters, parse_log, split_by_week, DatasetCollection, FilterParams,
};
use rankrobust::pairs::tps_pairs;
use rankrobust::synth::{gen_log, LogSpec, NoiseModel};
use rankrobust::{ItemId, NormalizationConfig, RankedList};

fn list_strategy() -> impl Strategy<Value = RankedList> {
    subsequence((0u32..15).collect::<Vec<_>>(), 1..=8)
        .prop_shuffle()
        .prop_map(|v| RankedList::new(v.into_iter().map(ItemId::from)).unwrap())
}

proptest! {
    #[test]
    fn snapshot_order_is_irrelevant(lists in prop::collection::vec(list_strategy(), 1..6)) {
        let refs: Vec<&RankedList> = lists.iter().collect();
        let mut rev = refs.clone();
        rev.reverse();
        prop_assert_eq!(ensemble_rankings(&refs).unwrap(), ensemble_rankings(&rev).unwrap());
    }

    #[test]
    fn single_snapshot_is_unchanged(l in list_strategy()) {
        prop_assert_eq!(ensemble_rankings(&[&l]).unwrap(), l);
    }

    #[test]
    fn output_is_sorted_by_mean_rank(lists in prop::collection::vec(list_strategy(), 1..6)) {
        let refs: Vec<&RankedList> = lists.iter().collect();
        let out = ensemble_rankings(&refs).unwrap();
        let means: Vec<f64> = out.items().iter().map(|i| mean_rank(&refs, i.as_str()).unwrap()).collect();
        prop_assert!(means.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        // Every item left out has a mean no better than the last one kept.
        let worst = *means.last().unwrap();
        for l in &refs {
            for item in l.items() {
                if !out.contains(item.as_str()) {
                    prop_assert!(mean_rank(&refs, item.as_str()).unwrap() >= worst - 1e-12);
                }
            }
        }
    }
}

fn noisy_collection(seed: u64) -> DatasetCollection {
    let spec = LogSpec {
        queries: 400,
        weeks: 5,
        noise: NoiseModel::DEFAULT_DROPOUT,
        seed,
        ..LogSpec::default()
    };
    let mut log = Vec::new();
    gen_log(&spec, &mut log, std::io::sink()).unwrap();
    let parsed = parse_log(&log[..], true).unwrap();
    let cfg = NormalizationConfig::default();
    split_by_week(parsed.records)
        .into_values()
        .map(|recs| apply_filters(&recs, &FilterParams::default(), &cfg).unwrap())
        .collect()
}

#[test]
fn smoothing_lowers_mean_distance() {
    let data = noisy_collection(17);
    let cfg = NormalizationConfig::default();
    let week = *data.weeks.keys().last().unwrap();
    let series = series_from_datasets(&data);
    let pairs: Vec<_> = tps_pairs(data.get(week).unwrap(), &cfg)
        .into_iter()
        .filter(|p| series[&p.q1].len() == 5 && series[&p.q2].len() == 5)
        .collect();
    assert!(pairs.len() >= 500, "{} pairs", pairs.len());
    let cmp = smoothed_vs_single(&pairs, &series, week).unwrap();
    assert_eq!(cmp.evaluated, pairs.len());
    assert!(
        cmp.ensemble.mean <= cmp.single.mean,
        "{} > {}",
        cmp.ensemble.mean,
        cmp.single.mean
    );
}

#[test]
fn static_series_ensemble_to_themselves() {
    let l = RankedList::new(["c", "a", "b"]).unwrap();
    let snaps = (0..4)
        .map(|i| {
            (
                NaiveDate::from_ymd_opt(2023, 1, 1 + 7 * i).unwrap(),
                l.clone(),
            )
        })
        .collect();
    let s = SnapshotSeries::new("q", snaps).unwrap();
    assert_eq!(ensemble_list(&s).unwrap(), l);
    let by_query: BTreeMap<String, SnapshotSeries> = BTreeMap::from([("q".to_owned(), s)]);
    assert!(by_query["q"]
        .at(NaiveDate::from_ymd_opt(2023, 1, 8).unwrap())
        .is_some());
}
