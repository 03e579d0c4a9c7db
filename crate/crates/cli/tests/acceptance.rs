//! Acceptance suite. Each test implements one numbered criterion at its
//! stated tolerance and prints a PASS line; cargo prints the fail line if
//! an assertion trips. Criteria that need ground truth build it from
//! self-contained oracles (planted configurations, brute-force references,
//! closed forms) rather than from the code under test.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use benchembed::{
    compare_geometries, dataset_quality, error_by_degree, fit, run_splits, DeltaMatrix, EvalReport,
    FitConfig, Geometry, GeometryKind, ModelKey, PerformanceRecord, PredictionRow, ResultsDb,
    SplitPlan, TaskKey, TaskStats,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

// ---- shared oracle helpers ----

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Seeded orthogonal matrix via Gram-Schmidt.
fn rotation(seed: u64, dim: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while basis.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for b in &basis {
            let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= proj * bi;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            for x in v.iter_mut() {
                *x /= norm;
            }
            basis.push(v);
        }
    }
    basis
}

/// The planted instance shared by criteria 2-4: 8 model + 8 task points in
/// R^5, seeded. The points span a 2-plane (then rotated so every ambient
/// coordinate is populated): with 16 points a 5-dimensional fit has 65
/// rigid-motion-adjusted degrees of freedom, so the ~51 training distances
/// of the sparse protocol can only determine the held-out ones when the
/// configuration itself is lower-rank; full-rank instances are
/// information-theoretically unrecoverable at this size.
fn planted_delta(seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, DeltaMatrix) {
    const AMBIENT: usize = 5;
    const INTRINSIC: usize = 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = |n: usize| -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..INTRINSIC).map(|_| rng.gen_range(-0.5..0.5)).collect()).collect()
    };
    let raw_models = sample(8);
    let raw_tasks = sample(8);
    let mut max_d = 0.0f64;
    for m in &raw_models {
        for t in &raw_tasks {
            max_d = max_d.max(euclid(m, t));
        }
    }
    // scale the configuration so every pairwise gap lands inside [0, 1]
    let scale = 0.999 / max_d;
    let q = rotation(seed ^ 0xA5A5_5A5A, AMBIENT);
    let lift = |p: &Vec<f64>| -> Vec<f64> {
        let mut padded = [0.0; AMBIENT];
        for (slot, c) in padded.iter_mut().zip(p) {
            *slot = c * scale;
        }
        (0..AMBIENT).map(|i| (0..AMBIENT).map(|j| q[j][i] * padded[j]).sum()).collect()
    };
    let model_points: Vec<Vec<f64>> = raw_models.iter().map(&lift).collect();
    let task_points: Vec<Vec<f64>> = raw_tasks.iter().map(&lift).collect();

    let models: Vec<ModelKey> =
        (0..8).map(|i| ModelKey::new(format!("m{i}"), "").unwrap()).collect();
    let tasks: Vec<TaskKey> =
        (0..8).map(|i| TaskKey::new(format!("t{i}"), 100.0, "OA").unwrap()).collect();
    let mut entries = Vec::new();
    for (mi, m) in model_points.iter().enumerate() {
        for (ti, t) in task_points.iter().enumerate() {
            entries.push(((mi, ti), euclid(m, t)));
        }
    }
    let stats = vec![TaskStats { best_value: 100.0, max_delta: 10.0, degenerate: false }; 8];
    let delta = DeltaMatrix::from_parts(models, tasks, entries, stats).unwrap();
    (model_points, task_points, delta)
}

fn assert_runtime(elapsed: Duration, bound_secs: u64, criterion: &str) {
    assert!(
        elapsed < Duration::from_secs(bound_secs),
        "{criterion} exceeded its {bound_secs}s budget: {elapsed:?}"
    );
}

// ---- criteria ----

#[test]
fn c01_normalization_golden_values() {
    let start = Instant::now();
    let corpus = "method,backbone,dataset,fraction,metric,value,source,arch_family,param_count\n\
        ResNet50 IN,,Potsdam,100,mF1,89.7,a,CNN,\n\
        SkySense,,Potsdam,100,mF1,94.1,b,Swin,\n\
        RingMo,,Potsdam,100,mF1,93.2,c,ViT,\n";
    let db = ResultsDb::ingest_csv(corpus).unwrap();
    let delta = DeltaMatrix::normalize(&db).unwrap();
    let stats = &delta.task_stats()[0];

    // raw gaps, exact to the f64 arithmetic on the printed decimals
    assert_eq!(stats.best_value, 94.1);
    assert_eq!(stats.max_delta, 94.1 - 89.7);
    let gap = |m: usize| stats.best_value - db.records()[m].value;
    assert_eq!(gap(0), 94.1 - 89.7);
    assert!((gap(0) - 4.4).abs() < 1e-9);
    assert_eq!(gap(1), 0.0);
    assert!((gap(2) - 0.9).abs() < 1e-9);

    // normalized gaps
    assert_eq!(delta.entry(0, 0), Some(1.0));
    assert_eq!(delta.entry(1, 0), Some(0.0));
    let ringmo = delta.entry(2, 0).unwrap();
    assert!((ringmo - 0.9 / 4.4).abs() < 1e-9, "{ringmo}");

    assert_runtime(start.elapsed(), 1, "criterion 1");
    println!("PASS criterion 1: normalization golden values (gaps 4.4/0.0/0.9, 0.2045... to 1e-9)");
}

#[test]
fn c02_planted_embedding_recovery() {
    let start = Instant::now();
    let (_, _, delta) = planted_delta(7);
    let geometry = Geometry::euclidean(5).unwrap();
    let space = fit(&delta, geometry, &FitConfig::default()).unwrap();
    let loss = space.fit_report().final_loss;
    assert!(loss < 1e-4, "fit loss {loss} >= 1e-4");
    let mut worst = 0.0f64;
    for (&(m, t), &target) in delta.entries() {
        let d = geometry
            .distance(
                space.model_point(&format!("m{m}")).unwrap(),
                space.task_point(&format!("t{t}@100%/OA")).unwrap(),
            )
            .unwrap();
        worst = worst.max((d - target).abs());
    }
    assert!(worst < 0.02, "worst pair deviation {worst} >= 0.02");
    assert_runtime(start.elapsed(), 30, "criterion 2");
    println!("PASS criterion 2: planted recovery (loss {loss:.2e}, worst pair {worst:.4})");
}

#[test]
fn c03_sparse_holdout_generalization() {
    let start = Instant::now();
    let (_, _, delta) = planted_delta(7);
    // 13 of 64 entries held out per split (20%)
    let plan = SplitPlan::new(10, 13, 42).unwrap();
    let mut summary = Vec::new();
    for kind in [GeometryKind::Euclidean, GeometryKind::Poincare] {
        let geometry = Geometry::new(kind, 5).unwrap();
        let report = run_splits(&delta, geometry, &plan, &FitConfig::default()).unwrap();
        let rmse = report.rmse.unwrap();
        assert!(rmse < 0.05, "{kind} holdout rmse {rmse} >= 0.05");
        summary.push(format!("{kind} {rmse:.4}"));
    }
    assert_runtime(start.elapsed(), 300, "criterion 3");
    println!("PASS criterion 3: sparse holdout rmse < 0.05 ({})", summary.join(", "));
}

#[test]
fn c04_geometry_comparison_ordering() {
    let start = Instant::now();
    let (_, _, delta) = planted_delta(7);
    let plan = SplitPlan::new(10, 13, 42).unwrap();
    let cmp = compare_geometries(&delta, 5, &plan, &FitConfig::default()).unwrap();
    let euclidean = cmp.euclidean.rmse.unwrap();
    let cosine = cmp.cosine.rmse.unwrap();
    assert!(
        euclidean <= cosine,
        "euclidean rmse {euclidean} should not exceed cosine rmse {cosine}"
    );
    assert_runtime(start.elapsed(), 300, "criterion 4");
    println!("PASS criterion 4: euclidean rmse {euclidean:.4} <= cosine rmse {cosine:.4}");
}

#[test]
fn c05_gradient_correctness() {
    let start = Instant::now();
    const H: f64 = 1e-6;
    for kind in GeometryKind::ALL {
        let g = Geometry::new(kind, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0xFD ^ kind as u64);
        let sample = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            loop {
                let p: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let norm = p.iter().map(|c| c * c).sum::<f64>().sqrt();
                if norm < 0.05 {
                    continue;
                }
                return match kind {
                    GeometryKind::Poincare => {
                        let r = rng.gen_range(0.05..0.8);
                        p.iter().map(|c| c / norm * r).collect()
                    }
                    _ => p,
                };
            }
        };
        let mut failures = 0;
        let mut checked = 0;
        while checked < 1000 {
            let u = sample(&mut rng);
            let v = sample(&mut rng);
            if euclid(&u, &v) < 0.05 {
                continue; // keep the stencil away from the kink at coincidence
            }
            checked += 1;
            let grad = g.distance_gradient(&u, &v).unwrap();
            let numeric = |point: &[f64], other: &[f64], first: bool| -> Vec<f64> {
                (0..5)
                    .map(|i| {
                        let mut hi = point.to_vec();
                        let mut lo = point.to_vec();
                        hi[i] += H;
                        lo[i] -= H;
                        let (dh, dl) = if first {
                            (g.distance(&hi, other).unwrap(), g.distance(&lo, other).unwrap())
                        } else {
                            (g.distance(other, &hi).unwrap(), g.distance(other, &lo).unwrap())
                        };
                        (dh - dl) / (2.0 * H)
                    })
                    .collect()
            };
            let rel = |a: &[f64], n: &[f64]| -> f64 {
                let diff: f64 = a.iter().zip(n).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                let scale: f64 = n.iter().map(|x| x * x).sum::<f64>().sqrt();
                diff / scale.max(1e-12)
            };
            if rel(&grad.wrt_u, &numeric(&u, &v, true)) >= 1e-5
                || rel(&grad.wrt_v, &numeric(&v, &u, false)) >= 1e-5
            {
                failures += 1;
            }
        }
        assert_eq!(failures, 0, "{kind}: {failures}/1000 gradient checks failed");
    }
    assert_runtime(start.elapsed(), 10, "criterion 5");
    println!("PASS criterion 5: 3x1000 gradient checks vs central differences, zero failures");
}

#[test]
fn c06_metric_properties() {
    let start = Instant::now();
    // symmetry (exact) and self-distance (exact zero) for all geometries
    for kind in GeometryKind::ALL {
        let g = Geometry::new(kind, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5E ^ kind as u64);
        for _ in 0..1000 {
            let p: Vec<f64> = (0..5).map(|_| rng.gen_range(-0.4..0.4)).collect();
            let q: Vec<f64> = (0..5).map(|_| rng.gen_range(-0.4..0.4)).collect();
            if p.iter().map(|c| c * c).sum::<f64>() == 0.0
                || q.iter().map(|c| c * c).sum::<f64>() == 0.0
            {
                continue;
            }
            let pq = g.distance(&p, &q).unwrap();
            let qp = g.distance(&q, &p).unwrap();
            assert_eq!(pq.to_bits(), qp.to_bits(), "{kind}: symmetry must be exact");
            assert!(pq >= 0.0);
            assert_eq!(g.distance(&p, &p).unwrap(), 0.0, "{kind}: d(u,u) must be 0");
        }
    }
    // triangle inequality for the two actual metrics
    for kind in [GeometryKind::Euclidean, GeometryKind::Poincare] {
        let g = Geometry::new(kind, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0x7A ^ kind as u64);
        for _ in 0..1000 {
            let mut point = || -> Vec<f64> { (0..5).map(|_| rng.gen_range(-0.4..0.4)).collect() };
            let (u, v, w) = (point(), point(), point());
            let direct = g.distance(&u, &w).unwrap();
            let via = g.distance(&u, &v).unwrap() + g.distance(&v, &w).unwrap();
            assert!(direct <= via + 1e-9, "{kind}: {direct} > {via}");
        }
    }
    // radial closed form
    let g = Geometry::poincare(5).unwrap();
    let origin = [0.0; 5];
    for i in 1..=90 {
        let r = i as f64 / 100.0;
        let v = [r, 0.0, 0.0, 0.0, 0.0];
        let d = g.distance(&origin, &v).unwrap();
        assert!((d - 2.0 * r.atanh()).abs() < 1e-9, "radial mismatch at r={r}");
    }
    assert_runtime(start.elapsed(), 10, "criterion 6");
    println!("PASS criterion 6: symmetry exact, self-distance zero, triangles to 1e-9, radial closed form to 1e-9");
}

#[test]
fn c07_poincare_domain_safety() {
    let start = Instant::now();
    let mut checked = 0usize;
    for seed in [1u64, 7, 42, 1234] {
        let (_, _, delta) = planted_delta(seed);
        let geometry = Geometry::poincare(5).unwrap();
        let config = FitConfig { seed, ..FitConfig::default() };
        let bound = 1.0 - geometry.ball_epsilon;

        // full fit plus sparse refits with a fifth of the entries removed
        let keys: Vec<(usize, usize)> = delta.entries().keys().copied().collect();
        let sparse = delta.without_entries(&keys.iter().copied().step_by(5).collect::<Vec<_>>());
        for matrix in [&delta, &sparse] {
            let space = fit(matrix, geometry, &config).unwrap();
            space.validate_domain().unwrap();
            for p in space.model_points().values().chain(space.task_points().values()) {
                let norm = p.iter().map(|c| c * c).sum::<f64>().sqrt();
                assert!(norm <= bound, "norm {norm} exceeds {bound}");
                checked += 1;
            }
        }
    }
    assert_runtime(start.elapsed(), 60, "criterion 7");
    println!(
        "PASS criterion 7: {checked} fitted points all inside the shrunk ball, zero violations"
    );
}

#[test]
fn c08_degree_error_trend() {
    let start = Instant::now();
    // synthetic holdout report: degrees 2-30, fixed noise amplitude shaped
    // as amplitude/degree, alternating sign
    let mut rows = Vec::new();
    let amplitude = 0.6;
    for degree in 2..=30usize {
        for rep in 0..4 {
            let error = amplitude / degree as f64
                * (0.6 + 0.2 * rep as f64)
                * if rep % 2 == 0 { 1.0 } else { -1.0 };
            rows.push(PredictionRow {
                split: 0,
                model: format!("m{degree}_{rep}"),
                task: "t".into(),
                true_delta: 0.5,
                predicted_delta: 0.5 + error,
                model_degree: degree,
            });
        }
    }
    let report = EvalReport {
        geometry: Geometry::euclidean(5).unwrap(),
        rows,
        skipped: Vec::new(),
        rmse: None,
        mae: None,
        pearson_r: None,
    };
    let table = error_by_degree(&report);
    let means: Vec<f64> = table.buckets.iter().map(|b| b.mean_abs_error.unwrap()).collect();
    for pair in means.windows(2) {
        assert!(pair[1] < pair[0], "mean |error| must not increase with degree bucket: {means:?}");
    }
    assert_eq!(table.pairs.len(), report.rows.len());
    assert_runtime(start.elapsed(), 10, "criterion 8");
    println!("PASS criterion 8: bucket mean |error| strictly decreasing: {means:?}");
}

fn run_ok(args: &[&str]) {
    let output =
        Command::new(env!("CARGO_BIN_EXE_benchembed")).args(args).output().expect("binary runs");
    assert!(
        output.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&output.stderr)
    );
}

fn run_pipeline(corpus: &Path, out: &Path) {
    let path = |name: &str| out.join(name).to_str().unwrap().to_string();
    run_ok(&[
        "ingest",
        "--input",
        corpus.to_str().unwrap(),
        "--aggregate",
        "--min-degree",
        "5",
        "--out",
        &path("db.csv"),
    ]);
    run_ok(&["embed", "--db", &path("db.csv"), "--seed", "42", "--out", &path("embedding.json")]);
    run_ok(&[
        "eval",
        "--db",
        &path("db.csv"),
        "--splits",
        "3",
        "--holdout",
        "5",
        "--seed",
        "42",
        "--out",
        &path("eval"),
    ]);
    run_ok(&[
        "analyze",
        "--db",
        &path("db.csv"),
        "--embedding",
        &path("embedding.json"),
        "--out",
        &path("analysis"),
    ]);
}

fn collect_files(root: &Path) -> HashMap<String, PathBuf> {
    let mut out = HashMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, path);
            }
        }
    }
    out
}

#[test]
fn c09_end_to_end_determinism() {
    let start = Instant::now();
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sample_corpus.csv");
    let run_a = TempDir::new().unwrap();
    let run_b = TempDir::new().unwrap();
    run_pipeline(&corpus, run_a.path());
    run_pipeline(&corpus, run_b.path());

    let files_a = collect_files(run_a.path());
    let files_b = collect_files(run_b.path());
    let mut names: Vec<&String> = files_a.keys().collect();
    names.sort();
    assert_eq!(files_a.len(), files_b.len(), "runs produced different file sets");

    let mut compared = 0usize;
    for name in names {
        let bytes_a = fs::read(&files_a[name]).unwrap();
        let bytes_b = fs::read(&files_b[name]).unwrap();
        if name.ends_with("manifest.json") {
            // wall-clock duration is the one legitimately varying field
            let strip = |bytes: &[u8]| -> serde_json::Value {
                let mut v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
                let obj = v.as_object_mut().unwrap();
                assert!(obj.remove("duration_seconds").is_some());
                // input paths embed the temp dir; digests must still agree
                let inputs = obj.remove("inputs").unwrap();
                let digests: Vec<&serde_json::Value> =
                    inputs.as_object().unwrap().values().collect();
                obj.insert("input_digests".into(), serde_json::json!(digests));
                let config = obj.get_mut("config").unwrap().as_object_mut().unwrap();
                for key in ["input", "out", "db", "embedding"] {
                    config.remove(key);
                }
                v
            };
            assert_eq!(strip(&bytes_a), strip(&bytes_b), "{name} differs beyond duration");
        } else {
            assert_eq!(bytes_a, bytes_b, "{name} differs between runs");
        }
        compared += 1;
    }
    assert!(compared >= 14, "expected the full artifact set, saw {compared}");
    assert_runtime(start.elapsed(), 300, "criterion 9");
    println!("PASS criterion 9: {compared} pipeline artifacts byte-identical across reruns");
}

#[test]
fn c10_filtering_matches_brute_force() {
    let start = Instant::now();
    let brute_force = |db: &ResultsDb| -> ResultsDb {
        let mut current = db.clone();
        loop {
            let mut model_deg: HashMap<ModelKey, usize> = HashMap::new();
            let mut task_deg: HashMap<TaskKey, usize> = HashMap::new();
            for r in current.records() {
                *model_deg.entry(r.model.clone()).or_insert(0) += 1;
                *task_deg.entry(r.task.clone()).or_insert(0) += 1;
            }
            let kept: Vec<PerformanceRecord> = current
                .records()
                .iter()
                .filter(|r| model_deg[&r.model] >= 5 && task_deg[&r.task] >= 5)
                .cloned()
                .collect();
            if kept.len() == current.len() {
                return current;
            }
            current = ResultsDb::from_records(kept);
        }
    };

    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_models = rng.gen_range(2..=30);
        let n_tasks = rng.gen_range(2..=30);
        let n_records = rng.gen_range(1..=(n_models * n_tasks).min(200));
        let mut records = Vec::new();
        for _ in 0..n_records {
            let m = rng.gen_range(0..n_models);
            let t = rng.gen_range(0..n_tasks);
            records.push(PerformanceRecord {
                model: ModelKey::new(format!("m{m}"), "").unwrap(),
                task: TaskKey::new(format!("t{t}"), 100.0, "OA").unwrap(),
                value: rng.gen_range(0.0..100.0),
                source: String::new(),
                arch_family: None,
                param_count: None,
            });
        }
        let db = ResultsDb::from_records(records);
        assert_eq!(db.filter_min_degree(5, 5), brute_force(&db), "seed {seed}");
    }
    assert_runtime(start.elapsed(), 60, "criterion 10");
    println!(
        "PASS criterion 10: degree filter matches brute-force fixed point on 100 random corpora"
    );
}

#[test]
fn c11_quality_statistics_oracle() {
    let start = Instant::now();
    // two-pass reference arithmetic on random corpora
    for seed in 0..30u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut records = Vec::new();
        let mut values = Vec::new();
        let n = rng.gen_range(1..15);
        for m in 0..n {
            let value = rng.gen_range(0.0..100.0);
            values.push(value);
            records.push(PerformanceRecord {
                model: ModelKey::new(format!("m{m}"), "").unwrap(),
                task: TaskKey::new("t", 100.0, "OA").unwrap(),
                value,
                source: String::new(),
                arch_family: None,
                param_count: None,
            });
        }
        let rows = dataset_quality(&ResultsDb::from_records(records)).unwrap();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let sigma = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / values.len() as f64)
            .sqrt();
        assert!((rows[0].mu - mean).abs() < 1e-12, "seed {seed}: mu");
        assert!((rows[0].sigma - sigma).abs() < 1e-12, "seed {seed}: sigma");
    }

    // saturation flag on a task engineered to mean 99.19, sigma 0.6
    let records = vec![
        PerformanceRecord {
            model: ModelKey::new("a", "").unwrap(),
            task: TaskKey::new("UCMerced", 100.0, "OA").unwrap(),
            value: 98.59,
            source: String::new(),
            arch_family: None,
            param_count: None,
        },
        PerformanceRecord {
            model: ModelKey::new("b", "").unwrap(),
            task: TaskKey::new("UCMerced", 100.0, "OA").unwrap(),
            value: 99.79,
            source: String::new(),
            arch_family: None,
            param_count: None,
        },
    ];
    let rows = dataset_quality(&ResultsDb::from_records(records)).unwrap();
    assert!((rows[0].mu - 99.19).abs() < 1e-9);
    assert!((rows[0].sigma - 0.6).abs() < 1e-9);
    assert!(rows[0].saturated, "mean 99.19 / sigma 0.6 must be flagged saturated");

    assert_runtime(start.elapsed(), 10, "criterion 11");
    println!(
        "PASS criterion 11: sigma/mu match two-pass arithmetic to 1e-12; saturation rule fires"
    );
}
