//! Shared fixtures: planted configurations and independent reference
//! arithmetic. Everything here stays deliberately naive so it can serve as
//! an oracle for the optimized implementation.
#![allow(dead_code)] // each test binary uses a different subset

use benchembed::{DeltaMatrix, ModelKey, TaskKey, TaskStats};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Reference Euclidean distance, independent of the geometry module.
pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub struct Planted {
    pub model_points: Vec<Vec<f64>>,
    pub task_points: Vec<Vec<f64>>,
    pub delta: DeltaMatrix,
}

/// Sample model and task points in a cube, rescale the configuration so the
/// largest model-task distance sits just inside 1, and expose the exact
/// pairwise distances as a fully observed gap matrix.
pub fn planted_instance(seed: u64, n_models: usize, n_tasks: usize, dim: usize) -> Planted {
    planted_rank(seed, n_models, n_tasks, dim, dim)
}

/// Planted configuration of intrinsic rank `intrinsic` living in
/// `ambient`-dimensional space (zero-padded, then rotated by a seeded
/// orthogonal matrix so every coordinate is populated).
///
/// The low-rank variant matters for holdout experiments: with 8 + 8 points
/// in 5 dimensions a fit has 65 effective degrees of freedom, so ~51
/// training distances cannot pin the held-out ones for a full-rank
/// configuration no matter how well the optimizer does. A rank-2
/// configuration is over-determined by the same training set, which is the
/// regime sparse completion actually targets.
pub fn planted_rank(
    seed: u64,
    n_models: usize,
    n_tasks: usize,
    ambient: usize,
    intrinsic: usize,
) -> Planted {
    assert!(intrinsic >= 1 && intrinsic <= ambient);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = |n: usize| -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..intrinsic).map(|_| rng.gen_range(-0.5..0.5)).collect()).collect()
    };
    let mut model_points = sample(n_models);
    let mut task_points = sample(n_tasks);

    let mut max_d = 0.0f64;
    for m in &model_points {
        for t in &task_points {
            max_d = max_d.max(euclid(m, t));
        }
    }
    let scale = 0.999 / max_d;
    let (rotation, _) = rigid_motion(seed ^ 0xA5A5_5A5A, ambient);
    let no_shift = vec![0.0; ambient];
    let lift = |p: &Vec<f64>| -> Vec<f64> {
        let mut q: Vec<f64> = p.iter().map(|c| c * scale).collect();
        q.resize(ambient, 0.0);
        if intrinsic == ambient {
            q
        } else {
            apply_rigid(&q, &rotation, &no_shift)
        }
    };
    model_points = model_points.iter().map(&lift).collect();
    task_points = task_points.iter().map(&lift).collect();

    let models: Vec<ModelKey> =
        (0..n_models).map(|i| ModelKey::new(format!("m{i}"), "").unwrap()).collect();
    let tasks: Vec<TaskKey> =
        (0..n_tasks).map(|i| TaskKey::new(format!("t{i}"), 100.0, "OA").unwrap()).collect();
    let mut entries = Vec::with_capacity(n_models * n_tasks);
    for (mi, m) in model_points.iter().enumerate() {
        for (ti, t) in task_points.iter().enumerate() {
            entries.push(((mi, ti), euclid(m, t)));
        }
    }
    let stats = vec![TaskStats { best_value: 100.0, max_delta: 10.0, degenerate: false }; n_tasks];
    let delta = DeltaMatrix::from_parts(models, tasks, entries, stats).unwrap();
    Planted { model_points, task_points, delta }
}

/// Random rigid motion of R^dim: an orthogonal matrix from Gram-Schmidt on
/// Gaussian-ish columns, plus a translation.
pub fn rigid_motion(seed: u64, dim: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim);
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
    let translation: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
    (basis, translation)
}

pub fn apply_rigid(point: &[f64], rotation: &[Vec<f64>], translation: &[f64]) -> Vec<f64> {
    (0..point.len())
        .map(|i| {
            let rotated: f64 = (0..point.len()).map(|j| rotation[j][i] * point[j]).sum();
            rotated + translation[i]
        })
        .collect()
}
