use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use coded_mrpt::cluster::Strategy;
use coded_mrpt::{exact_knn, recall, RngSeed};
use mrpt_bench::spec::{DataSource, Distribution};
use mrpt_bench::{
    gen_synthetic, ground_truth, load_fvecs, read_fvecs, run, write_fvecs, ExperimentSpec, QueryOutput, RunSummary,
    SyntheticKind, TruthRow,
};
use proptest::prelude::*;

fn small_spec(dir: &Path) -> ExperimentSpec {
    let mut s = ExperimentSpec::default();
    s.dataset.n = 600;
    s.dataset.d = 16;
    s.dataset.clusters = 12;
    s.queries = 20;
    s.runs = 2;
    s.cluster.workers = 7;
    s.index.trees = Some(20);
    s.index.depth = Some(4);
    s.out_dir = dir.to_path_buf();
    s
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mrpt-bench"))
}

#[test]
fn fvecs_round_trip_is_exact_at_f32() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.fvecs");
    let pts = vec![vec![0.1, -2.5, 1e-30], vec![3.0, 4.0, f64::from(f32::MAX)]];
    write_fvecs(&path, &pts).unwrap();
    let back = read_fvecs(&path).unwrap();
    for (p, b) in pts.iter().zip(&back) {
        let narrow: Vec<f32> = p.iter().map(|&x| x as f32).collect();
        assert_eq!(&narrow, b);
    }
    let data = load_fvecs(&path).unwrap();
    assert_eq!(data.point(1)[..2], [3.0, 4.0]);
    fs::write(&path, b"").unwrap();
    assert!(load_fvecs(&path).is_err());
}

#[test]
fn separated_blobs_keep_nearest_neighbors_inside() {
    let kind = SyntheticKind::Clustered { clusters: 2 };
    let data = gen_synthetic(200, 40, kind, RngSeed(5)).unwrap();
    let g = mrpt_bench::Generator::new(40, kind, RngSeed(5)).unwrap();
    let c = g.centers();
    let gap: f64 = c[0].iter().zip(&c[1]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    assert!(gap > 30.0, "centers too close: {gap}");
    let blob = |p: &[f64]| {
        let d = |m: &Vec<f64>| p.iter().zip(m).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        usize::from(d(&c[1]) < d(&c[0]))
    };
    let queries: Vec<Vec<f64>> = (0..data.len()).map(|j| data.point(j).to_vec()).collect();
    let truth = ground_truth(&data, &queries, 2).unwrap();
    for (j, t) in truth.iter().enumerate() {
        assert_eq!(t.entries[0].0, j);
        assert_eq!(blob(data.point(t.entries[1].0)), blob(data.point(j)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ground_truth_agrees_with_exact_knn(n in 1usize..120, d in 1usize..10, k in 1usize..12, seed: u64) {
        prop_assume!(k <= n);
        let data = gen_synthetic(n, d, SyntheticKind::Gaussian, RngSeed(seed)).unwrap();
        let qs: Vec<Vec<f64>> = gen_synthetic(3, d, SyntheticKind::Gaussian, RngSeed(seed ^ 1))
            .unwrap()
            .transposed()
            .entries()
            .chunks(d)
            .map(<[f64]>::to_vec)
            .collect();
        let all: Vec<usize> = (0..n).collect();
        for (q, t) in qs.iter().zip(ground_truth(&data, &qs, k).unwrap()) {
            let e = exact_knn(&data, q, k, &all).unwrap();
            prop_assert_eq!(recall(&e, &t, k).unwrap(), 1.0);
        }
    }
}

#[test]
fn run_writes_consistent_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec(dir.path());
    let summary = run(&spec).unwrap();

    let text = fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    let schema: serde_json::Value =
        serde_json::from_str(include_str!("../schema/summary.schema.json")).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    assert!(validator.is_valid(&json));
    assert_eq!(serde_json::from_value::<RunSummary>(json).unwrap(), summary);

    let truth: HashMap<usize, Vec<usize>> = fs::read_to_string(dir.path().join("truth.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<TruthRow>(l).unwrap())
        .map(|t| (t.query_id, t.neighbors))
        .collect();
    let outputs: Vec<QueryOutput> = fs::read_to_string(dir.path().join("neighbors.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(outputs.len(), 5 * 2 * 20);
    for o in &outputs {
        let t = &truth[&o.query_id];
        let hits = o.neighbors.iter().filter(|j| t.contains(j)).count();
        assert_eq!(hits as f64 / spec.k as f64, o.recall);
    }
    for s in &summary.strategies {
        let rs: Vec<f64> = outputs.iter().filter(|o| o.strategy == s.name).map(|o| o.recall).collect();
        let mean = rs.iter().sum::<f64>() / rs.len() as f64;
        assert!((mean - s.mean_recall).abs() < 1e-12);
    }

    for s in Strategy::ALL {
        for r in 0..2 {
            let t = fs::read_to_string(dir.path().join(format!("traces/{}_run{r:03}.jsonl", s.name()))).unwrap();
            let workers = if s == Strategy::Single { 1 } else { 7 };
            assert_eq!(t.lines().count(), 20 * workers);
            for line in t.lines() {
                serde_json::from_str::<coded_mrpt::cluster::TraceRecord>(line).unwrap();
            }
        }
    }
    let csv = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5 * 3);
    let dat = fs::read_to_string(dir.path().join("latency.dat")).unwrap();
    assert_eq!(dat.lines().count(), 6);
}

#[test]
fn zero_queries_give_well_formed_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small_spec(dir.path());
    spec.queries = 0;
    spec.runs = 1;
    let summary = run(&spec).unwrap();
    assert!(summary.strategies.iter().all(|s| s.runs.len() == 1 && s.mean_latency == 0.0));
    assert_eq!(fs::read_to_string(dir.path().join("neighbors.jsonl")).unwrap(), "");
}

#[test]
fn file_sources_and_in_dataset_queries() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_synthetic(300, 8, SyntheticKind::Gaussian, RngSeed(2)).unwrap();
    let pts: Vec<&[f64]> = (0..300).map(|j| data.point(j)).collect();
    let path = dir.path().join("base.fvecs");
    write_fvecs(&path, &pts).unwrap();

    let mut spec = small_spec(&dir.path().join("out"));
    spec.dataset.source = DataSource::Fvecs;
    spec.dataset.path = Some(path.clone());
    spec.strategies = vec![Strategy::Single, Strategy::MpMatdot];
    spec.in_dataset = true;
    let w = mrpt_bench::prepare(&spec).unwrap();
    assert_eq!(w.data.len(), 300);
    assert!(w.truth.iter().all(|t| t.entries[0].1 == 0.0));

    spec.in_dataset = false;
    let w = mrpt_bench::prepare(&spec).unwrap();
    assert_eq!(w.data.len(), 280);
    assert_eq!(w.queries[0], data.point(280).iter().map(|&x| x as f32 as f64).collect::<Vec<_>>());

    let csv = dir.path().join("tiny.csv");
    fs::write(&csv, "d=2\n0,0\n1,0\n0,1\n5,5\n").unwrap();
    let mut spec = small_spec(&dir.path().join("out2"));
    spec.dataset = mrpt_bench::spec::DatasetSpec {
        source: DataSource::Csv,
        n: 0,
        d: 0,
        distribution: Distribution::Gaussian,
        clusters: 0,
        path: Some(csv),
        queries_path: None,
    };
    spec.k = 2;
    spec.queries = 2;
    spec.in_dataset = true;
    spec.strategies = vec![Strategy::Single];
    spec.index.depth = Some(1);
    spec.index.trees = Some(4);
    spec.index.vote_threshold = Some(1);
    let w = mrpt_bench::prepare(&spec).unwrap();
    assert_eq!(w.data.len(), 4);
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let status = |args: &[&str]| bin().args(args).output().unwrap();

    let ok = status(&[
        "run", "--queries", "5", "--runs", "1", "--workers", "5", "--m", "2", "--strategy", "mp_matdot,mp_uncoded",
        "--straggler", "weibull", "--out-dir", out.to_str().unwrap(),
    ]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(out.join("summary.json").exists());

    // coded strategy with too few workers is rejected before any index build
    let bad = status(&["run", "--workers", "4", "--m", "3", "--strategy", "mp_matdot", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    let bad = status(&["run", "--strategy", "quantum"]);
    assert_eq!(bad.status.code(), Some(2));

    let cfg = dir.path().join("missing.toml");
    fs::write(&cfg, ExperimentSpec::default().to_toml().replace("source = \"synthetic\"", "source = \"fvecs\"\npath = \"/nonexistent.fvecs\"")).unwrap();
    let data_err = status(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(data_err.status.code(), Some(3), "{}", String::from_utf8_lossy(&data_err.stderr));

    let mut spec = ExperimentSpec::default();
    spec.cluster.extra_delay = vec![0.0; 16];
    spec.cluster.extra_delay[3] = f64::INFINITY;
    spec.strategies = vec![Strategy::MpUncoded];
    spec.queries = 2;
    spec.runs = 1;
    spec.out_dir = out.clone();
    let cfg = dir.path().join("stuck.toml");
    fs::write(&cfg, spec.to_toml()).unwrap();
    let timeout = status(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(timeout.status.code(), Some(4), "{}", String::from_utf8_lossy(&timeout.stderr));
    assert!(String::from_utf8_lossy(&timeout.stderr).contains("query"));

    let init = status(&["init"]);
    assert_eq!(String::from_utf8(init.stdout).unwrap(), mrpt_bench::DEFAULT_CONFIG);
}

#[test]
fn cli_generate_encode_and_conditioning() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("b.fvecs");
    let qs = dir.path().join("q.fvecs");
    let o = bin()
        .args(["generate", "--n", "40", "--d", "6", "--distribution", "clustered", "--clusters", "3"])
        .args(["--out", base.to_str().unwrap(), "--queries", "4", "--queries-out", qs.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(read_fvecs(&qs).unwrap().len(), 4);

    let shards = dir.path().join("shards");
    let o = bin()
        .args(["encode", "--input", base.to_str().unwrap(), "--out-dir", shards.to_str().unwrap()])
        .args(["--m", "2", "--workers", "4", "--systematic"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let data = load_fvecs(&base).unwrap();
    let mut f = fs::File::open(shards.join("shard_000.bin")).unwrap();
    let (header, shard) = coded_mrpt::matdot::read_shard::<f64, _>(&mut f).unwrap();
    assert_eq!((header.m, header.workers), (2, 4));
    assert_eq!(shard.matrix.row(5), &data.point(5)[..3]);

    let o = bin().args(["conditioning", "--m", "8", "--workers", "15", "--betas", "integer"]).output().unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}
