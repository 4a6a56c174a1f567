use std::fs;
use std::path::PathBuf;

use proptest::prelude::*;

use overuse_core::classify::{classify_all, LabeledTrajectory};
use overuse_core::ingest::{read_jsonl, read_queries, read_trajectories, write_jsonl};
use overuse_core::profile::{bin_summaries, build_profiles, profile_files, ProfileOptions};
use overuse_core::report::{
    overuse_counts, parse_bins_csv, parse_overuse_csv, parse_table1_csv, table1, write_bins_csv,
    write_overuse_csv, write_table1_csv,
};
use overuse_core::{KnowledgeProfile, Mode, Trajectory, TrajectoryRecord, Turn};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../cli/tests/fixtures/golden")
        .join(name)
}

#[test]
fn streaming_and_in_memory_profiles_agree() {
    let corpus = read_queries(fixture("queries.jsonl")).unwrap();
    let mut trajs = read_trajectories(fixture("no_tool.jsonl"), Some(&corpus)).unwrap();
    trajs.extend(read_trajectories(fixture("with_tool.jsonl"), Some(&corpus)).unwrap());
    let options = ProfileOptions::default();
    let in_memory = build_profiles(&trajs, &corpus, options).unwrap();
    let streamed = profile_files(
        &corpus,
        &fixture("no_tool.jsonl"),
        Some(&fixture("with_tool.jsonl")),
        options,
    )
    .unwrap();
    assert_eq!(in_memory, streamed);
    assert_eq!(streamed.profiles.len(), corpus.len());
    assert!(streamed.skipped.is_empty());
}

#[test]
fn fixture_pipeline_matches_expected_reports() {
    let corpus = read_queries(fixture("queries.jsonl")).unwrap();
    let set = profile_files(
        &corpus,
        &fixture("no_tool.jsonl"),
        Some(&fixture("with_tool.jsonl")),
        ProfileOptions::default(),
    )
    .unwrap();

    let rows = table1(&corpus, &set.profiles).unwrap();
    let expected = fs::read_to_string(fixture("expected/table1.csv")).unwrap();
    assert_eq!(write_table1_csv(&rows), expected);

    let bins = bin_summaries(&set.profiles);
    assert_eq!(bins.iter().map(|b| b.query_count).sum::<usize>(), corpus.len());
    assert_eq!(write_bins_csv(&bins), fs::read_to_string(fixture("expected/bins.csv")).unwrap());

    let with_tool = read_trajectories(fixture("with_tool.jsonl"), Some(&corpus)).unwrap();
    let labels = classify_all(&with_tool, &set.profiles, &corpus, 0.8).unwrap();
    let counts = overuse_counts(&labels);
    assert_eq!(counts.iter().map(|(_, n)| n).sum::<usize>(), with_tool.len());
    assert_eq!(
        write_overuse_csv(&labels).unwrap(),
        fs::read_to_string(fixture("expected/overuse.csv")).unwrap()
    );
}

#[test]
fn report_csvs_parse_back() {
    let table = fs::read_to_string(fixture("expected/table1.csv")).unwrap();
    let rows = parse_table1_csv(&table).unwrap();
    assert_eq!(rows.last().unwrap().benchmark, "all");
    assert_eq!(write_table1_csv(&rows), table);

    let bins = fs::read_to_string(fixture("expected/bins.csv")).unwrap();
    assert_eq!(write_bins_csv(&parse_bins_csv(&bins).unwrap()), bins);

    let overuse = parse_overuse_csv(&fs::read_to_string(fixture("expected/overuse.csv")).unwrap()).unwrap();
    let total: f64 = overuse.iter().map(|(_, _, f)| f).sum();
    assert!((total - 1.0).abs() < 1e-5);
}

#[test]
fn profiles_and_labels_survive_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = read_queries(fixture("queries.jsonl")).unwrap();
    let set = profile_files(&corpus, &fixture("no_tool.jsonl"), Some(&fixture("with_tool.jsonl")), ProfileOptions::default())
        .unwrap();
    let path = dir.path().join("profiles.jsonl");
    write_jsonl(&path, &set.profiles).unwrap();
    let back: Vec<KnowledgeProfile> = read_jsonl(&path).unwrap();
    assert_eq!(back, set.profiles);

    let with_tool = read_trajectories(fixture("with_tool.jsonl"), Some(&corpus)).unwrap();
    let labels = classify_all(&with_tool, &set.profiles, &corpus, 0.8).unwrap();
    let path = dir.path().join("labels.jsonl");
    write_jsonl(&path, &labels).unwrap();
    let back: Vec<LabeledTrajectory> = read_jsonl(&path).unwrap();
    assert_eq!(back, labels);
}

#[test]
fn fixture_ingest_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = read_queries(fixture("queries.jsonl")).unwrap();
    for name in ["no_tool.jsonl", "with_tool.jsonl"] {
        let original = fs::read_to_string(fixture(name)).unwrap();
        let trajs = read_trajectories(fixture(name), Some(&corpus)).unwrap();
        let records: Vec<TrajectoryRecord> = trajs.iter().map(Trajectory::to_record).collect();
        let path = dir.path().join(name);
        write_jsonl(&path, &records).unwrap();
        let written = fs::read_to_string(&path).unwrap();
        let a: Vec<serde_json::Value> = original.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        let b: Vec<serde_json::Value> = written.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(a, b, "{name}");
    }
}

fn arb_turn() -> impl Strategy<Value = Turn> {
    prop_oneof![
        "[a-z ]{0,12}".prop_map(Turn::generation),
        ("[a-z_]{1,8}", "[ -~]{0,12}").prop_map(|(n, a)| Turn::tool_call(n, a)),
        "[ -~]{0,12}".prop_map(Turn::tool_result),
    ]
}

fn arb_record() -> impl Strategy<Value = TrajectoryRecord> {
    (
        "[a-z0-9]{1,6}",
        0u32..64,
        prop::collection::vec(arb_turn(), 0..8),
        "[ -~]{0,10}",
        prop::option::of(any::<bool>()),
    )
        .prop_map(|(query_id, sample_index, turns, final_answer, correct)| TrajectoryRecord {
            query_id,
            mode: Mode::WithTool,
            sample_index,
            turns,
            final_answer,
            correct,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ingest_is_lossless(records in prop::collection::vec(arb_record(), 1..12)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        write_jsonl(&path, &records).unwrap();
        let queries = dir.path().join("q.jsonl");
        let mut ids: Vec<&str> = records.iter().map(|r| r.query_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        let lines: String = ids
            .iter()
            .map(|id| format!("{{\"query_id\":\"{id}\",\"benchmark\":\"b\",\"prompt\":\"p\",\"gold_answer\":\"1\"}}\n"))
            .collect();
        fs::write(&queries, lines).unwrap();
        let corpus = read_queries(&queries).unwrap();
        let back: Vec<TrajectoryRecord> = read_trajectories(&path, Some(&corpus))
            .unwrap()
            .iter()
            .map(Trajectory::to_record)
            .collect();
        prop_assert_eq!(back, records);
    }
}
