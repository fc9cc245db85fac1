mod common;

use std::io::Write;

use common::{corpus, replay};
use nl2fol::eval::{
    balanced_sample, evaluate, load_dataset, read_report, render_table, write_report, DatasetError, DatasetFormat,
    EvalOptions, ExampleRecord, Gold, MetricsReport, Predicted, UnknownAs, DEFAULT_CONNECTIVE,
};
use nl2fol::pipeline::RunSettings;
use proptest::prelude::*;

fn settings() -> RunSettings {
    replay().settings()
}

fn record(i: usize, gold: Gold, predicted: Predicted, policy: UnknownAs) -> ExampleRecord {
    ExampleRecord {
        id: format!("e{i}"),
        gold,
        predicted,
        counted_as: predicted.counted(policy),
        trace: None,
        note: None,
    }
}

/// `tp` true positives and so on, in that order.
fn records(tp: usize, fp: usize, tn: usize, fn_: usize) -> Vec<ExampleRecord> {
    let rows = [
        (tp, Gold::Fallacy, Predicted::Fallacy),
        (fp, Gold::Valid, Predicted::Fallacy),
        (tn, Gold::Valid, Predicted::Valid),
        (fn_, Gold::Fallacy, Predicted::Valid),
    ];
    rows.iter()
        .flat_map(|&(n, g, p)| std::iter::repeat_n((g, p), n))
        .enumerate()
        .map(|(i, (g, p))| record(i, g, p, UnknownAs::Fallacy))
        .collect()
}

fn file(name: &str, body: &str) -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(name);
    std::fs::File::create(&path).unwrap().write_all(body.as_bytes()).unwrap();
    (dir, path)
}

#[test]
fn balanced_fixture_scores_point_eight() {
    let r = MetricsReport::from_records("nl2fol", "fixture", UnknownAs::Fallacy, records(8, 2, 8, 2), settings());
    let m = r.metrics;
    for v in [m.accuracy, m.precision, m.recall, m.f1] {
        assert_eq!(v, Some(0.80));
    }
}

#[test]
fn all_dropped_is_null() {
    let recs: Vec<_> = (0..4)
        .map(|i| record(i, Gold::Fallacy, Predicted::Inconclusive, UnknownAs::Drop))
        .collect();
    let r = MetricsReport::from_records("nl2fol", "fixture", UnknownAs::Drop, recs, settings());
    assert_eq!((r.counts.dropped, r.counts.inconclusive), (4, 4));
    assert!(r.metrics.accuracy.is_none() && r.metrics.f1.is_none());
    let json = serde_json::to_value(&r).unwrap();
    assert!(json["metrics"]["accuracy"].is_null());
    assert!(render_table(&r, None).contains("null"));
}

#[test]
fn inconclusive_policies() {
    let recs = |p| vec![record(0, Gold::Valid, Predicted::Inconclusive, p), record(1, Gold::Fallacy, Predicted::Fallacy, p)];
    let as_fallacy = MetricsReport::from_records("m", "d", UnknownAs::Fallacy, recs(UnknownAs::Fallacy), settings());
    assert_eq!((as_fallacy.counts.tp, as_fallacy.counts.fp), (1, 1));
    let as_valid = MetricsReport::from_records("m", "d", UnknownAs::Valid, recs(UnknownAs::Valid), settings());
    assert_eq!((as_valid.counts.tp, as_valid.counts.tn), (1, 1));
    let dropped = MetricsReport::from_records("m", "d", UnknownAs::Drop, recs(UnknownAs::Drop), settings());
    assert_eq!((dropped.counts.tp, dropped.counts.dropped, dropped.size), (1, 1, 2));
}

#[test]
fn report_round_trip_and_comparison() {
    let a = MetricsReport::from_records("nl2fol", "fixture", UnknownAs::Fallacy, records(8, 2, 8, 2), settings());
    let b = MetricsReport::from_records("end_to_end", "fixture", UnknownAs::Fallacy, records(6, 4, 6, 4), settings());
    let dir = tempfile::tempdir().unwrap();
    let (json, txt) = write_report(dir.path(), &a, Some(&b)).unwrap();
    assert_eq!(read_report(&json).unwrap(), a);
    let table = std::fs::read_to_string(txt).unwrap();
    assert!(table.contains("end_to_end"), "{table}");
    let f1 = table.lines().find(|l| l.starts_with("f1")).unwrap();
    assert_eq!(f1.split_whitespace().collect::<Vec<_>>(), ["f1", "0.8000", "0.6000", "+0.2000"]);
    let tp = table.lines().find(|l| l.starts_with("TP")).unwrap();
    assert_eq!(tp.split_whitespace().collect::<Vec<_>>(), ["TP", "8", "6", "+2"]);
}

#[test]
fn csv_without_text_column() {
    let (_d, path) = file("bad.csv", "id,label\n1,VALID\n");
    assert!(matches!(
        load_dataset(&path, DatasetFormat::Csv, DEFAULT_CONNECTIVE),
        Err(DatasetError::MissingColumn(c)) if c == "text"
    ));
}

#[test]
fn csv_and_snli_rows() {
    let (_d, path) = file(
        "logic.csv",
        "source_article,updated_label\n\"Everyone uses it, so it must be good.\",ad populum\n",
    );
    let ex = load_dataset(&path, DatasetFormat::Csv, DEFAULT_CONNECTIVE).unwrap();
    assert_eq!((ex[0].id.as_str(), ex[0].label), ("row-2", Gold::Fallacy));

    let (_d, path) = file(
        "snli.jsonl",
        concat!(
            r#"{"pairID":"p1","sentence1":"A man plays a guitar.","sentence2":"A man plays music.","gold_label":"entailment"}"#,
            "\n",
            r#"{"pairID":"p2","sentence1":"A dog runs.","sentence2":"A cat sleeps.","gold_label":"contradiction"}"#,
            "\n"
        ),
    );
    let ex = load_dataset(&path, DatasetFormat::Snli, DEFAULT_CONNECTIVE).unwrap();
    assert_eq!(ex.len(), 1);
    assert_eq!(ex[0].text, "A man plays a guitar. Thus, a man plays music.");
    assert_eq!(ex[0].label, Gold::Valid);
}

#[test]
fn duplicate_ids_are_rejected() {
    let (_d, path) = file("d.jsonl", "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n");
    assert!(matches!(load_dataset(&path, DatasetFormat::Jsonl, DEFAULT_CONNECTIVE), Err(DatasetError::DuplicateId(_))));
}

#[test]
fn sampling_is_balanced_and_seeded() {
    let all = corpus();
    let a = balanced_sample(&all, Some(5), 3);
    assert_eq!(a.len(), 10);
    assert_eq!(a.iter().filter(|e| e.label == Gold::Valid).count(), 5);
    assert_eq!(a, balanced_sample(&all, Some(5), 3));
    assert_ne!(a, balanced_sample(&all, Some(5), 4));
}

fn corpus_opts(parallelism: usize) -> EvalOptions {
    EvalOptions {
        unknown_as: UnknownAs::Fallacy,
        parallelism,
        trace_dir: None,
        dataset_name: "corpus".into(),
    }
}

#[test]
fn replay_report_ignores_parallelism() {
    let p = replay();
    let data = corpus();
    let one = evaluate(&data, &p, &corpus_opts(1));
    let many = evaluate(&data, &p, &corpus_opts(8));
    assert_eq!(serde_json::to_string(&one).unwrap(), serde_json::to_string(&many).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn counts_add_up(
        rows in prop::collection::vec((any::<bool>(), 0..3u8), 0..60),
        policy in prop_oneof![Just(UnknownAs::Fallacy), Just(UnknownAs::Valid), Just(UnknownAs::Drop)],
        seed in any::<u64>(),
    ) {
        let recs: Vec<_> = rows
            .iter()
            .enumerate()
            .map(|(i, &(g, p))| {
                let gold = if g { Gold::Fallacy } else { Gold::Valid };
                let predicted = [Predicted::Fallacy, Predicted::Valid, Predicted::Inconclusive][p as usize];
                record(i, gold, predicted, policy)
            })
            .collect();
        let r = MetricsReport::from_records("m", "d", policy, recs.clone(), settings());
        let c = r.counts;
        prop_assert_eq!((c.tp + c.fp + c.tn + c.fn_ + c.dropped) as usize, r.size);

        let mut shuffled = recs;
        use rand::{seq::SliceRandom, SeedableRng};
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let s = MetricsReport::from_records("m", "d", policy, shuffled, settings());
        prop_assert_eq!(s.counts, r.counts);
        prop_assert_eq!(s.metrics, r.metrics);
    }
}

