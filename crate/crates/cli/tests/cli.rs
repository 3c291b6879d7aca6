use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn ivkg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ivkg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Vec<u8> {
    let out = ivkg(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn code(args: &[&str]) -> (i32, String) {
    let out = ivkg(args);
    (
        out.status.code().expect("exited normally"),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn worked_example(dir: &Path) -> (PathBuf, PathBuf) {
    let d = dir.join("fig");
    ok(&["synth", "worked-example", "--out-dir", p(&d)]);
    (d.join("nodes.tsv"), d.join("edges.tsv"))
}

fn rows(tsv: &[u8]) -> Vec<(u64, u64, u64)> {
    String::from_utf8_lossy(tsv)
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<u64> = l.split('\t').take(3).map(|x| x.parse().unwrap()).collect();
            (f[0], f[1], f[2])
        })
        .collect()
}

#[test]
fn one_hop_mining_lists_five_pairs_for_368() {
    let t = TempDir::new().unwrap();
    let (n, e) = worked_example(t.path());
    for mode in ["a-removed", "literal"] {
        let out = ok(&[
            "mine",
            "--nodes",
            p(&n),
            "--edges",
            p(&e),
            "--hops",
            "1",
            "--exclusion",
            mode,
        ]);
        let z368: Vec<_> = rows(&out).into_iter().filter(|r| r.0 == 368).collect();
        assert_eq!(
            z368,
            vec![
                (368, 1308, 322),
                (368, 1308, 1630),
                (368, 1308, 2000),
                (368, 1402, 322),
                (368, 1402, 2000)
            ]
        );
    }
}

#[test]
fn edgeless_graph_gives_header_and_zero_stats() {
    let t = TempDir::new().unwrap();
    let (n, e) = (t.path().join("n.tsv"), t.path().join("e.tsv"));
    fs::write(&n, "id\tterm\n1\talpha\n2\tbeta\n").unwrap();
    fs::write(&e, "src\tdst\tweight\n").unwrap();
    let out_dir = t.path().join("out");
    ok(&[
        "mine",
        "--nodes",
        p(&n),
        "--edges",
        p(&e),
        "--out-dir",
        p(&out_dir),
    ]);
    let tsv = fs::read_to_string(out_dir.join("triples.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 1);
    let stats: Value =
        serde_json::from_slice(&fs::read(out_dir.join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats["stats"]["n_zab_triples"], 0);
    assert_eq!(stats["stats"]["n_za_pairs"], 0);
    assert_eq!(stats["stats"]["per_z"]["max"], 0.0);
    assert_eq!(stats["tool_version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(stats["format_version"], 1);
    let q: Value =
        serde_json::from_slice(&fs::read(out_dir.join("quality.json")).unwrap()).unwrap();
    assert_eq!(q["n_triples"], 0);
}

#[test]
fn oracle_flag_matches_miner() {
    let t = TempDir::new().unwrap();
    let g = t.path().join("g");
    ok(&[
        "synth",
        "graph",
        "--n-nodes",
        "100",
        "--edge-prob",
        "0.04",
        "--seed",
        "17",
        "--out-dir",
        p(&g),
    ]);
    let (n, e) = (g.join("nodes.tsv"), g.join("edges.tsv"));
    for mode in ["a-removed", "literal"] {
        let fast = ok(&[
            "mine",
            "--nodes",
            p(&n),
            "--edges",
            p(&e),
            "--exclusion",
            mode,
        ]);
        let slow = ok(&[
            "mine",
            "--nodes",
            p(&n),
            "--edges",
            p(&e),
            "--exclusion",
            mode,
            "--oracle",
        ]);
        assert_eq!(fast, slow);
        assert!(rows(&fast).len() > 10);
    }
}

#[test]
fn compare_reports_overlap() {
    let t = TempDir::new().unwrap();
    let (n, e) = worked_example(t.path());
    let (l, r) = (t.path().join("l.tsv"), t.path().join("r.tsv"));
    fs::write(
        &l,
        ok(&["mine", "--nodes", p(&n), "--edges", p(&e), "--hops", "1"]),
    )
    .unwrap();
    fs::write(&r, ok(&["mine", "--nodes", p(&n), "--edges", p(&e)])).unwrap();
    let v: Value =
        serde_json::from_slice(&ok(&["compare", "--left", p(&l), "--right", p(&r)])).unwrap();
    assert_eq!(v["shared"], serde_json::json!([368, 2179]));
    assert_eq!(v["exclusive_right"], serde_json::json!([1308]));
    assert_eq!(v["n_exclusive_left"], 0);
    assert!(v["tool_version"].is_string());
}

fn write_doc_corpus(dir: &Path, docs: &[(&str, &str)]) {
    fs::create_dir_all(dir).unwrap();
    for (id, text) in docs {
        fs::write(dir.join(format!("{id}.txt")), text).unwrap();
    }
}

fn read_matrix(csv: &[u8]) -> Vec<Vec<f64>> {
    String::from_utf8_lossy(csv)
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn weighted_graph_features_scale_unweighted_ones() {
    let t = TempDir::new().unwrap();
    let (n, e) = (t.path().join("n.tsv"), t.path().join("e.tsv"));
    fs::write(
        &n,
        "id\tterm\n1\tcarbon tax\n2\tEmissions!\n3\tthe profit\n",
    )
    .unwrap();
    fs::write(&e, "src\tdst\tweight\n1\t2\t7.5\n2\t3\t2.25\n").unwrap();
    let corpus = t.path().join("c");
    write_doc_corpus(
        &corpus,
        &[
            ("a", "A carbon tax cuts emissions; emissions fall."),
            ("b", "Profit, profit and the profit."),
        ],
    );
    let w = ok(&[
        "features",
        "--corpus",
        p(&corpus),
        "--nodes",
        p(&n),
        "--edges",
        p(&e),
    ]);
    let u = ok(&[
        "features",
        "--corpus",
        p(&corpus),
        "--nodes",
        p(&n),
        "--edges",
        p(&e),
        "--unweighted",
    ]);
    assert!(String::from_utf8_lossy(&w).starts_with("id,carbon tax,emissions,the profit\n"));
    let (w, u) = (read_matrix(&w), read_matrix(&u));
    assert_eq!(u, vec![vec![1.0, 2.0, 0.0], vec![0.0, 0.0, 3.0]]);
    let scale = [7.5, 7.5, 2.25];
    for (wr, ur) in w.iter().zip(&u) {
        for j in 0..3 {
            assert_eq!(wr[j], ur[j] * scale[j]);
        }
    }
}

#[test]
fn classify_rejects_unlabelled_matrix() {
    let t = TempDir::new().unwrap();
    let corpus = t.path().join("c");
    write_doc_corpus(&corpus, &[("a", "dividend"), ("b", "community")]);
    let sim = t.path().join("sim.tsv");
    fs::write(&sim, "term\tscore\ndividend\t0.9\ncommunity\t0.8\n").unwrap();
    let m = t.path().join("m.csv");
    ok(&[
        "features",
        "--corpus",
        p(&corpus),
        "--similarity",
        p(&sim),
        "--out",
        p(&m),
    ]);
    let (c, err) = code(&["classify", "--features", p(&m)]);
    assert_eq!(c, 2);
    assert!(err.contains("label"), "{err}");
}

#[test]
fn classify_end_to_end_writes_metrics_and_model() {
    let t = TempDir::new().unwrap();
    let corpus = t.path().join("corpus");
    ok(&[
        "synth",
        "corpus",
        "--n-docs",
        "200",
        "--seed",
        "4",
        "--out-dir",
        p(&corpus),
    ]);
    let m = t.path().join("m.csv");
    ok(&[
        "features",
        "--corpus",
        p(&corpus),
        "--similarity",
        p(&corpus.join("similarity.tsv")),
        "--out",
        p(&m),
    ]);
    let model = t.path().join("model.json");
    let metrics: Value = serde_json::from_slice(&ok(&[
        "classify",
        "--features",
        p(&m),
        "--seed",
        "4",
        "--model-out",
        p(&model),
    ]))
    .unwrap();
    assert_eq!(metrics["n_validation"], 40);
    assert!(metrics["metrics"]["accuracy"].as_f64().unwrap() >= 0.95);
    let model: Value = serde_json::from_slice(&fs::read(&model).unwrap()).unwrap();
    assert_eq!(model["format_version"], 1);
    assert_eq!(model["tool_version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(model["trees"].as_array().unwrap().len(), 100);
}

#[test]
fn tsls_strong_instrument_table_has_stars() {
    let t = TempDir::new().unwrap();
    let panel = t.path().join("p.csv");
    ok(&["synth", "panel", "--n", "10000", "--out", p(&panel)]);
    let table = String::from_utf8(ok(&[
        "tsls",
        "--panel",
        p(&panel),
        "--outcome",
        "b",
        "--endogenous",
        "a",
        "--instrument",
        "z",
    ]))
    .unwrap();
    let line = |label: &str| {
        table
            .lines()
            .find(|l| l.starts_with(label))
            .unwrap()
            .trim_end()
            .to_string()
    };
    assert!(line("z ").ends_with("***"), "{table}");
    assert!(line("a ").ends_with("***"), "{table}");
    assert!(table.contains("Robust (HC1) t-statistics in parentheses"));
    let v: Value = serde_json::from_slice(&ok(&[
        "tsls",
        "--panel",
        p(&panel),
        "--outcome",
        "b",
        "--endogenous",
        "a",
        "--instrument",
        "z",
        "--format",
        "json",
    ]))
    .unwrap();
    assert!(v["cragg_donald_f"].as_f64().unwrap() > 10.0);
    assert!(v["anderson_lm"]["p_value"].as_f64().unwrap() < 0.01);
}

#[test]
fn tsls_spec_file_with_fixed_effects() {
    let t = TempDir::new().unwrap();
    let panel = t.path().join("p.csv");
    ok(&[
        "synth",
        "panel",
        "--n",
        "3000",
        "--industries",
        "4",
        "--years",
        "3",
        "--seed",
        "2",
        "--out",
        p(&panel),
    ]);
    let spec = t.path().join("spec.json");
    fs::write(&spec, r#"{"outcome":"b","endogenous":"a","instruments":["z"],"fixed_effects":["industry","year"]}"#).unwrap();
    let table = String::from_utf8(ok(&["tsls", "--panel", p(&panel), "--spec", p(&spec)])).unwrap();
    assert!(table.contains("industry fixed effects"));
    assert!(table.contains("year fixed effects"));
}

#[test]
fn tsls_errors_map_to_exit_codes() {
    let t = TempDir::new().unwrap();
    let panel = t.path().join("p.csv");
    ok(&["synth", "panel", "--n", "500", "--out", p(&panel)]);
    let (c, err) = code(&[
        "tsls",
        "--panel",
        p(&panel),
        "--outcome",
        "b",
        "--endogenous",
        "a",
        "--instrument",
        "w",
    ]);
    assert_eq!(c, 2);
    assert!(err.contains("`w`"), "{err}");

    let flat = t.path().join("flat.csv");
    fs::write(
        &flat,
        "z,a,b,k\n1,2,3,5\n2,3,5,5\n3,5,7,5\n4,4,9,5\n5,7,8,5\n",
    )
    .unwrap();
    let (c, err) = code(&[
        "tsls",
        "--panel",
        p(&flat),
        "--outcome",
        "b",
        "--endogenous",
        "a",
        "--instrument",
        "k",
    ]);
    assert_eq!(c, 3, "{err}");
    assert!(err.contains("`k`"), "{err}");

    let same = String::from_utf8(ok(&[
        "tsls",
        "--panel",
        p(&panel),
        "--outcome",
        "b",
        "--endogenous",
        "a",
        "--instrument",
        "a",
    ]))
    .unwrap();
    assert!(same.contains("coincides with OLS"), "{same}");
}

#[test]
fn malformed_inputs_exit_two() {
    let t = TempDir::new().unwrap();
    let (n, e) = (t.path().join("n.tsv"), t.path().join("e.tsv"));
    fs::write(&n, "id\tterm\n1\ta\n2\tb\n").unwrap();
    for bad in [
        "src\tdst\tweight\n1\t9\t1.0\n",
        "src\tdst\tweight\n1\t2\tx\n",
        "garbage\n",
        "src\tdst\tweight\n1\t2\t-1\n",
    ] {
        fs::write(&e, bad).unwrap();
        let (c, err) = code(&["mine", "--nodes", p(&n), "--edges", p(&e)]);
        assert_eq!(c, 2, "{bad:?}: {err}");
        assert!(!err.contains("panicked"));
    }
    assert_eq!(
        code(&[
            "mine",
            "--nodes",
            p(&n),
            "--edges",
            p(&e),
            "--direction",
            "sideways"
        ])
        .0,
        2
    );
    assert_eq!(
        code(&["mine", "--nodes", p(&n), "--edges", p(&e), "--hops", "0"]).0,
        2
    );
    assert_eq!(
        code(&[
            "--workers",
            "0",
            "synth",
            "worked-example",
            "--out-dir",
            p(t.path())
        ])
        .0,
        2
    );
    let bad_panel = t.path().join("bad.csv");
    fs::write(&bad_panel, "z,a\n1,2,3\n").unwrap();
    assert_eq!(
        code(&[
            "tsls",
            "--panel",
            p(&bad_panel),
            "--outcome",
            "b",
            "--endogenous",
            "a",
            "--instrument",
            "z"
        ])
        .0,
        2
    );
    let bad_triples = t.path().join("t.tsv");
    fs::write(&bad_triples, "not a header\n").unwrap();
    assert_eq!(
        code(&[
            "compare",
            "--left",
            p(&bad_triples),
            "--right",
            p(&bad_triples)
        ])
        .0,
        2
    );
}

#[test]
fn outputs_do_not_depend_on_workers() {
    let t = TempDir::new().unwrap();
    let g = t.path().join("g");
    ok(&[
        "synth",
        "graph",
        "--n-nodes",
        "150",
        "--edge-prob",
        "0.03",
        "--seed",
        "5",
        "--out-dir",
        p(&g),
    ]);
    let (n, e) = (g.join("nodes.tsv"), g.join("edges.tsv"));
    let one = ok(&[
        "--workers",
        "1",
        "mine",
        "--nodes",
        p(&n),
        "--edges",
        p(&e),
        "--format",
        "json",
    ]);
    let four = ok(&[
        "--workers",
        "4",
        "mine",
        "--nodes",
        p(&n),
        "--edges",
        p(&e),
        "--format",
        "json",
    ]);
    assert_eq!(one, four);
}

#[test]
fn synth_is_deterministic_per_seed() {
    let t = TempDir::new().unwrap();
    let a = ok(&["synth", "panel", "--n", "100", "--seed", "9"]);
    assert_eq!(a, ok(&["synth", "panel", "--n", "100", "--seed", "9"]));
    assert_ne!(a, ok(&["synth", "panel", "--n", "100", "--seed", "10"]));
    let (d1, d2) = (t.path().join("1"), t.path().join("2"));
    ok(&["synth", "graph", "--seed", "3", "--out-dir", p(&d1)]);
    ok(&["synth", "graph", "--seed", "3", "--out-dir", p(&d2)]);
    assert_eq!(
        fs::read(d1.join("edges.tsv")).unwrap(),
        fs::read(d2.join("edges.tsv")).unwrap()
    );
}
