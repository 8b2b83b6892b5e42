//! Acceptance criteria. Each test prints one `PASS` or `FAIL` line to stderr
//! (uncaptured) and then asserts the same condition.
//!
//! Criteria 4 to 6 need the TSPLIB files `d15112.tsp` and `pla85900.tsp` in
//! `$BIGMEANS_DATA_DIR` (default: `data/` at the workspace root).

use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use bigmeans::bigmeans::big_means;
use bigmeans::init::{kmeanspp_fill, seeded_rng};
use bigmeans::io::{load, Registry};
use bigmeans::metrics::{aggregate_scores, relative_error, AlgorithmScore, DatasetScores};
use bigmeans::oracle::{exact_mssc, TinyInstance};
use bigmeans::{
    kmeans, BigMeansConfig, Centroids, ClusteringOutcome, Dataset, EvalCounter, InitConfig,
    InitMethod, SearchConfig,
};
use rand::Rng;

fn report(id: u32, title: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "{status} criterion {id} ({title}): {detail}");
    assert!(pass, "criterion {id} ({title}) failed: {detail}");
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed <= Duration::from_secs(limit_secs)
}

fn random_dataset(rng: &mut impl Rng, m: usize, n: usize, scale: f64) -> Dataset {
    let values = (0..m * n).map(|_| rng.random_range(-scale..scale)).collect();
    Dataset::new(m, n, values).unwrap()
}

fn clustered_dataset(rng: &mut impl Rng, m: usize, n: usize, groups: usize) -> Dataset {
    let centers: Vec<Vec<f64>> = (0..groups)
        .map(|_| (0..n).map(|_| rng.random_range(-50.0..50.0)).collect())
        .collect();
    let mut values = Vec::with_capacity(m * n);
    for i in 0..m {
        let c = &centers[i % groups];
        values.extend(c.iter().map(|x| x + rng.random_range(-8.0..8.0)));
    }
    Dataset::new(m, n, values).unwrap()
}

#[test]
fn criterion_1_oracle_equivalence() {
    let t0 = Instant::now();
    let mut rng = seeded_rng(1);
    let mut below_optimum = 0usize;
    let mut hits = 0usize;
    let mut starts = 0usize;
    for _ in 0..200 {
        let k = rng.random_range(1..=3usize);
        let m = rng.random_range(k.max(2)..=10usize);
        let n = rng.random_range(1..=3usize);
        let data = random_dataset(&mut rng, m, n, 10.0);
        let opt = exact_mssc(&TinyInstance::new(data.clone(), k).unwrap())
            .unwrap()
            .objective;
        for seed in 0..20u64 {
            let init = InitConfig { seed, ..InitConfig::default() };
            let f = kmeans(&data, k, &init, &SearchConfig::default()).unwrap().objective;
            let slack = 1e-9 * opt.max(1e-300);
            if f < opt - slack {
                below_optimum += 1;
            }
            if (f - opt).abs() <= slack {
                hits += 1;
            }
            starts += 1;
        }
    }
    let rate = hits as f64 / starts as f64;
    let elapsed = t0.elapsed();
    report(
        1,
        "oracle equivalence",
        below_optimum == 0 && rate >= 0.60 && within(elapsed, 30),
        &format!(
            "{below_optimum} runs below optimum, optimum reached in {:.1}% of {starts} starts, {:.2?}",
            100.0 * rate,
            elapsed
        ),
    );
}

#[test]
fn criterion_2_monotonicity() {
    let t0 = Instant::now();
    let mut rng = seeded_rng(2);
    let mut lloyd_runs = 0usize;
    let mut lloyd_violations = 0usize;
    let mut bm_runs = 0usize;
    let mut bm_violations = 0usize;
    let mut check_history = |h: &[f64]| {
        lloyd_runs += 1;
        if h.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12)) {
            lloyd_violations += 1;
        }
    };
    for case in 0..60u64 {
        let m = rng.random_range(20..400usize);
        let n = rng.random_range(1..6usize);
        let groups = rng.random_range(1..6usize);
        let data = clustered_dataset(&mut rng, m, n, groups);
        let k = rng.random_range(1..8usize);
        for method in [InitMethod::Forgy, InitMethod::KmeansPp, InitMethod::KmeansParallel] {
            let init = InitConfig { seed: case, ..InitConfig::with_method(method) };
            let out = kmeans(&data, k, &init, &SearchConfig::default()).unwrap();
            check_history(&out.objective_history);
        }
        let s = rng.random_range(k..=m);
        let cfg = BigMeansConfig::new(k, s).with_max_chunks(15).with_seed(case);
        let (_, trace) = big_means(&data, &cfg).unwrap();
        for chunk in &trace.chunks {
            check_history(&chunk.lloyd_history);
        }
        bm_runs += 1;
        let inc: Vec<f64> = trace.incumbent_objectives().collect();
        if inc.windows(2).any(|w| w[1] > w[0]) {
            bm_violations += 1;
        }
    }
    let elapsed = t0.elapsed();
    report(
        2,
        "monotonicity",
        lloyd_violations == 0 && bm_violations == 0 && within(elapsed, 10),
        &format!(
            "{lloyd_violations}/{lloyd_runs} Lloyd runs and {bm_violations}/{bm_runs} Big-means traces increased, {elapsed:.2?}"
        ),
    );
}

fn same_bits(a: &ClusteringOutcome, b: &ClusteringOutcome) -> bool {
    let rows = |o: &ClusteringOutcome| -> Vec<Option<Vec<u64>>> {
        (0..o.centroids.k())
            .map(|j| {
                (!o.centroids.is_degenerate(j))
                    .then(|| o.centroids.row(j).iter().map(|v| v.to_bits()).collect())
            })
            .collect()
    };
    rows(a) == rows(b)
        && a.assignment == b.assignment
        && a.objective.to_bits() == b.objective.to_bits()
}

#[test]
fn criterion_3_degenerate_parameterization_identity() {
    let t0 = Instant::now();
    let mut rng = seeded_rng(3);
    let mut identical = 0;
    for case in 0..10u64 {
        let m = rng.random_range(50..600usize);
        let n = rng.random_range(1..5usize);
        let groups = rng.random_range(2..6usize);
        let data = clustered_dataset(&mut rng, m, n, groups);
        let k = rng.random_range(1..7usize);
        let seed = 1000 + case;
        let cfg = BigMeansConfig::new(k, m).with_max_chunks(1).with_seed(seed);
        let bm = big_means(&data, &cfg).unwrap().0;
        let init = InitConfig { seed, ..InitConfig::with_method(InitMethod::KmeansPp) };
        let km = kmeans(&data, k, &init, &SearchConfig::default()).unwrap();
        if same_bits(&bm, &km) {
            identical += 1;
        }
    }
    let elapsed = t0.elapsed();
    report(
        3,
        "s = m, one chunk equals K-means++ then Lloyd",
        identical == 10 && within(elapsed, 10),
        &format!("{identical}/10 datasets bit-identical, {elapsed:.2?}"),
    );
}

fn data_dir() -> PathBuf {
    std::env::var_os("BIGMEANS_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

/// Loads a registry dataset, or reports the criterion as failed when the
/// file is not available.
fn registry_dataset(id: u32, title: &str, name: &str) -> (Dataset, bigmeans::io::RegistryEntry) {
    let entry = Registry::builtin().get(name).unwrap().clone();
    let spec = entry.spec(&data_dir());
    match load(&spec) {
        Ok(d) => (d, entry),
        Err(e) => {
            report(
                id,
                title,
                false,
                &format!(
                    "dataset {} unavailable ({e}); set BIGMEANS_DATA_DIR to a directory holding it",
                    spec.path.display()
                ),
            );
            unreachable!()
        }
    }
}

fn big_means_errors(data: &Dataset, k: usize, s: usize, cpu: f64, runs: u64, f_best: f64) -> Vec<f64> {
    (0..runs)
        .map(|seed| {
            let cfg = BigMeansConfig::new(k, s).with_max_cpu_seconds(cpu).with_seed(seed);
            let f = big_means(data, &cfg).unwrap().0.objective;
            relative_error(f, f_best).unwrap()
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn criterion_4_d15112_reproduction() {
    let title = "D15112 reproduction";
    let t0 = Instant::now();
    let (data, entry) = registry_dataset(4, title, "d15112");
    let reference = [(2, 0.02), (3, 0.04), (5, 2.26), (10, 1.33), (15, 1.25), (20, 1.25), (25, 0.84)];
    let mut ok = true;
    let mut parts = Vec::new();
    let mut means = Vec::new();
    for (k, expected) in reference {
        let f_best = entry.f_best(k).unwrap();
        let e = mean(&big_means_errors(&data, k, 8000, 2.0, 15, f_best));
        let inside = e >= expected - 1.0 && e <= expected + 1.5;
        ok &= inside;
        means.push(e);
        parts.push(format!("k={k}: {e:.2}{}", if inside { "" } else { " (out of band)" }));
    }
    let overall = mean(&means);
    let elapsed = t0.elapsed();
    ok &= (0.2..=2.5).contains(&overall) && within(elapsed, 300);
    report(
        4,
        title,
        ok,
        &format!("mean E_A {}; overall {overall:.2}%, {elapsed:.1?}", parts.join(", ")),
    );
}

#[test]
fn criterion_5_pla85900_spot_check() {
    let title = "Pla85900 spot check";
    let t0 = Instant::now();
    let (data, entry) = registry_dataset(5, title, "pla85900");
    let f_best = entry.f_best(10).unwrap();
    let errors = big_means_errors(&data, 10, 14_000, 1.0, 15, f_best);
    let e = mean(&errors);
    let elapsed = t0.elapsed();
    report(
        5,
        title,
        e <= 1.5 && within(elapsed, 60),
        &format!("mean E_A {e:.3}% over 15 runs (limit 1.5%), {elapsed:.1?}"),
    );
}

#[test]
fn criterion_6_baseline_sanity() {
    let title = "Big-means beats K-means|| on D15112, k = 25";
    let t0 = Instant::now();
    let (data, entry) = registry_dataset(6, title, "d15112");
    let f_best = entry.f_best(25).unwrap();
    let bm = mean(&big_means_errors(&data, 25, 8000, 2.0, 15, f_best));
    let par: Vec<f64> = (0..15u64)
        .map(|seed| {
            let init = InitConfig { seed, ..InitConfig::with_method(InitMethod::KmeansParallel) };
            let f = kmeans(&data, 25, &init, &SearchConfig::default()).unwrap().objective;
            relative_error(f, f_best).unwrap()
        })
        .collect();
    let par = mean(&par);
    let elapsed = t0.elapsed();
    report(
        6,
        title,
        bm < par && within(elapsed, 120),
        &format!("mean E_A Big-means {bm:.2}% vs K-means|| {par:.2}%, {elapsed:.1?}"),
    );
}

#[test]
fn criterion_7_kmeanspp_distribution() {
    let t0 = Instant::now();
    let data = Dataset::from_rows(&[[0.0], [1.0], [10.0]]).unwrap();
    let mut start = Centroids::all_degenerate(2, 1);
    start.set_row(0, &[0.0]);
    let cfg = InitConfig { candidates_per_step: 1, ..InitConfig::default() };
    let trials = 10_000;
    let mut rng = seeded_rng(7);
    let (mut far, mut near) = (0usize, 0usize);
    for _ in 0..trials {
        let out = kmeanspp_fill(&data, &start, &cfg, &mut rng, &mut EvalCounter::default()).unwrap();
        let x = out.row(1)[0];
        if x == 10.0 {
            far += 1;
        } else if x == 1.0 {
            near += 1;
        } else {
            panic!("picked an existing center {x}");
        }
    }
    let p_far = far as f64 / trials as f64;
    let p_near = near as f64 / trials as f64;
    let elapsed = t0.elapsed();
    report(
        7,
        "K-means++ D² distribution",
        (p_far - 100.0 / 101.0).abs() <= 0.02
            && (p_near - 1.0 / 101.0).abs() <= 0.02
            && within(elapsed, 5),
        &format!("P(10) = {p_far:.4} (expect 0.9901), P(1) = {p_near:.4} (expect 0.0099), {elapsed:.2?}"),
    );
}

#[test]
fn criterion_8_score_regression() {
    let t0 = Instant::now();
    let table: [(&str, f64, f64); 23] = [
        ("CORD-19 Embeddings", 0.997, 1.000),
        ("HEPMASS", 0.999, 1.000),
        ("US Census Data 1990", 0.964, 1.000),
        ("Gisette", 1.000, 0.980),
        ("Music Analysis", 0.919, 1.000),
        ("Protein Homology", 1.000, 0.993),
        ("MiniBooNE Particle Identification", 1.000, 0.988),
        ("MiniBooNE Particle Identification (normalized)", 1.000, 1.000),
        ("MFCCs for Speech Emotion Recognition", 0.973, 1.000),
        ("ISOLET", 0.902, 0.964),
        ("Sensorless Drive Diagnosis", 0.978, 0.998),
        ("Sensorless Drive Diagnosis (normalized)", 0.936, 1.000),
        ("Online News Popularity", 0.993, 1.000),
        ("Gas Sensor Array Drift", 0.908, 0.947),
        ("3D Road Network", 0.971, 1.000),
        ("Skin Segmentation", 1.000, 1.000),
        ("KEGG Metabolic Relation Network (Directed)", 0.970, 0.998),
        ("Shuttle Control", 0.965, 0.998),
        ("Shuttle Control (normalized)", 0.892, 1.000),
        ("EEG Eye State", 1.000, 0.826),
        ("EEG Eye State (normalized)", 0.990, 0.946),
        ("Pla85900", 1.000, 0.999),
        ("D15112", 0.867, 0.883),
    ];
    let scores: Vec<DatasetScores> = table
        .iter()
        .map(|&(name, acc, cpu)| DatasetScores {
            dataset: name.to_string(),
            algorithms: vec![AlgorithmScore {
                algorithm: "big_means".into(),
                accuracy: Some(acc),
                cpu: Some(cpu),
                failed: false,
            }],
        })
        .collect();
    let totals = aggregate_scores(&scores).unwrap().totals_for("big_means").unwrap().clone();
    let acc_sum = format!("{:.3}", totals.accuracy_sum);
    let cpu_sum = format!("{:.3}", totals.cpu_sum);
    let acc_pct = totals.accuracy_pct.round();
    let cpu_pct = totals.cpu_pct.round();
    let elapsed = t0.elapsed();
    report(
        8,
        "score-system regression",
        acc_sum == "22.222"
            && cpu_sum == "22.519"
            && acc_pct == 97.0
            && cpu_pct == 98.0
            && within(elapsed, 1),
        &format!(
            "sums {acc_sum} / {cpu_sum} (expect 22.222 / 22.519), percentages {acc_pct}% / {cpu_pct}% (expect 97% / 98%)"
        ),
    );
}

#[test]
fn criterion_9_determinism_across_threads() {
    let t0 = Instant::now();
    let mut rng = seeded_rng(9);
    let data = clustered_dataset(&mut rng, 6000, 4, 6);
    let max_threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut pools: Vec<usize> = vec![1, 2, max_threads, 8];
    pools.sort_unstable();
    pools.dedup();

    let runs = |threads: usize| -> Vec<ClusteringOutcome> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut out = Vec::new();
            let cfg = BigMeansConfig::new(6, 1500).with_max_chunks(6).with_seed(17);
            out.push(big_means(&data, &cfg).unwrap().0);
            for method in [InitMethod::Forgy, InitMethod::KmeansPp, InitMethod::KmeansParallel] {
                let init = InitConfig { seed: 17, ..InitConfig::with_method(method) };
                out.push(kmeans(&data, 6, &init, &SearchConfig::default()).unwrap());
            }
            out
        })
    };
    let reference = runs(1);
    let mut mismatches = 0;
    for &t in &pools[1..] {
        for (a, b) in reference.iter().zip(runs(t)) {
            if !same_bits(a, &b) {
                mismatches += 1;
            }
        }
    }
    let elapsed = t0.elapsed();
    report(
        9,
        "determinism across thread counts",
        mismatches == 0 && within(elapsed, 30),
        &format!("{mismatches} mismatches over thread pools {pools:?}, {elapsed:.2?}"),
    );
}
