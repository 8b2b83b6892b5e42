use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bigmeans(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bigmeans"))
        .args(args)
        .current_dir(dir)
        .env_remove("BIGMEANS_THREADS")
        .output()
        .expect("binary runs")
}

fn blob_csv(dir: &Path) {
    let mut text = String::from("x,y\n");
    for i in 0..60 {
        let (cx, cy) = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)][i % 3];
        let dx = ((i * 7919) % 13) as f64 / 13.0;
        let dy = ((i * 104_729) % 17) as f64 / 17.0;
        text.push_str(&format!("{},{}\n", cx + dx, cy + dy));
    }
    fs::write(dir.join("blobs.csv"), text).unwrap();
}

#[test]
fn fixed_seed_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    blob_csv(dir.path());
    for tag in ["a", "b"] {
        let out = bigmeans(
            &[
                "cluster", "--input", "blobs.csv", "--format", "csv", "--header", "--k", "3",
                "--chunk-size", "20", "--max-chunks", "15", "--seed", "42",
                "--out-centroids", &format!("c_{tag}.csv"),
                "--out-labels", &format!("l_{tag}.csv"),
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let read = |f: &str| fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("c_a.csv"), read("c_b.csv"));
    assert_eq!(read("l_a.csv"), read("l_b.csv"));
    assert_eq!(String::from_utf8(read("l_a.csv")).unwrap().lines().count(), 60);
}

#[test]
fn one_cluster_centroid_is_column_means() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p.csv"), "1,2\n3,4\n5,9\n7,1\n").unwrap();
    let out = bigmeans(
        &[
            "cluster", "--algo", "big-means", "--input", "p.csv", "--format", "csv", "--k", "1",
            "--out-centroids", "c.csv", "--out-json", "r.json",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let row = fs::read_to_string(dir.path().join("c.csv")).unwrap();
    let vals: Vec<f64> = row.trim().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(vals, vec![4.0, 4.0]);

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    for key in ["objective", "iterations", "n_d", "cpu_init", "cpu_full", "n_s", "seed", "config"] {
        assert!(report.get(key).is_some(), "report lacks {key}");
    }
    let stdout: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert_eq!(stdout, report["objective"].as_f64().unwrap());
    assert_eq!(stdout, 20.0 + 38.0);
}

#[test]
fn empty_algorithm_list_exits_with_configuration_status() {
    let dir = tempfile::tempdir().unwrap();
    blob_csv(dir.path());
    fs::write(
        dir.path().join("plan.json"),
        r#"{"datasets":[{"name":"blobs","spec":{"path":"blobs.csv","format":"csv","has_header":true},"chunk_size":20,"max_chunks":5}],
            "algorithms":[],"k_values":[3],"n_exec":2}"#,
    )
    .unwrap();
    let out = bigmeans(&["bench", "--plan", "plan.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no algorithms"));
    assert!(out.stdout.is_empty());
}

#[test]
fn single_cell_plan_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    blob_csv(dir.path());
    fs::write(
        dir.path().join("plan.json"),
        r#"{"datasets":[{"name":"blobs","spec":{"path":"blobs.csv","format":"csv","has_header":true},"chunk_size":20,"max_chunks":5}],
            "algorithms":["big_means"],"k_values":[3],"n_exec":2}"#,
    )
    .unwrap();
    let out = bigmeans(
        &["bench", "--plan", "plan.json", "--out-csv", "s.csv", "--out-runs", "r.csv", "--out-json", "r.json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("algorithm,dataset,k,"));
    assert!(lines[1].starts_with("big_means,blobs,3,"));
    let runs = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(runs.lines().count(), 3);
    assert!(String::from_utf8(out.stdout).unwrap().contains("big_means,1.000,1.000,1.000,100,100,100"));
}

#[test]
fn conflicting_budgets_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    blob_csv(dir.path());
    let out = bigmeans(
        &[
            "cluster", "--input", "blobs.csv", "--format", "csv", "--header", "--k", "3",
            "--max-seconds", "1", "--max-chunks", "3",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn bad_seed_and_bad_k_exit_2_missing_file_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    blob_csv(dir.path());
    let base = ["cluster", "--input", "blobs.csv", "--format", "csv", "--header"];
    let run = |extra: &[&str]| {
        let args: Vec<&str> = base.iter().chain(extra).copied().collect();
        bigmeans(&args, dir.path()).status.code()
    };
    assert_eq!(run(&["--k", "3", "--seed", "abc"]), Some(2));
    assert_eq!(run(&["--k", "0"]), Some(2));
    assert_eq!(run(&["--k", "61"]), Some(2));
    let missing = bigmeans(&["cluster", "--input", "none.csv", "--format", "csv", "--k", "2"], dir.path());
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn normalize_maps_columns_to_unit_interval() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p.txt"), "0 5\n2 5\n4 5\n").unwrap();
    let out = bigmeans(&["normalize", "--input", "p.txt", "--format", "whitespace"], dir.path());
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "0.0,0.0\n0.5,0.0\n1.0,0.0\n");
}

#[test]
fn hint_prints_a_ladder_size() {
    let dir = tempfile::tempdir().unwrap();
    blob_csv(dir.path());
    let out = bigmeans(
        &[
            "hint-chunk-size", "--input", "blobs.csv", "--format", "csv", "--header", "--k", "3",
            "--rungs", "3", "--chunks-per-run", "3", "--runs", "2",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s: usize = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!([15, 30, 60].contains(&s));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    blob_csv(dir.path());
    let mut outputs = Vec::new();
    for t in ["1", "3"] {
        let out = bigmeans(
            &[
                "--threads", t, "cluster", "--input", "blobs.csv", "--format", "csv", "--header",
                "--k", "3", "--chunk-size", "30", "--max-chunks", "5",
            ],
            dir.path(),
        );
        assert!(out.status.success());
        outputs.push(out.stdout);
    }
    assert_eq!(outputs[0], outputs[1]);
}
