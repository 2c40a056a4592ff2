//! Mini-batch k-means in the input space, seeded with k-means++.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{check_count, stream_rng, LandmarkSelection, Sketch, Strategy, SAMPLING_STREAM};
use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub struct KmeansOptions {
    pub batch: usize,
    pub iters: usize,
    /// Perturbation applied to coincident centroids.
    pub jitter: f64,
}

impl Default for KmeansOptions {
    fn default() -> Self {
        Self {
            batch: 1024,
            iters: 100,
            jitter: 1e-8,
        }
    }
}

fn sq_dist(x: &DMatrix<f64>, i: usize, c: &DMatrix<f64>, j: usize) -> f64 {
    let mut s = 0.0;
    for k in 0..x.ncols() {
        let d = x[(i, k)] - c[(j, k)];
        s += d * d;
    }
    s
}

fn nearest(x: &DMatrix<f64>, i: usize, centers: &DMatrix<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for j in 0..centers.nrows() {
        let d = sq_dist(x, i, centers, j);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_init(x: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = x.nrows();
    let mut centers = DMatrix::zeros(k, x.ncols());
    let first = rng.random_range(0..n);
    centers.set_row(0, &x.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x, i, &centers, 0)).collect();
    for j in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && u < d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.set_row(j, &x.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x, i, &centers, j));
        }
    }
    centers
}

/// Landmarks from mini-batch k-means with default jitter.
pub fn select_kmeans(x: &DMatrix<f64>, c: usize, batch: usize, iters: usize, seed: u64) -> Result<LandmarkSelection> {
    select_kmeans_with(
        x,
        c,
        &KmeansOptions {
            batch,
            iters,
            ..KmeansOptions::default()
        },
        seed,
    )
}

pub fn select_kmeans_with(x: &DMatrix<f64>, c: usize, opts: &KmeansOptions, seed: u64) -> Result<LandmarkSelection> {
    let n = x.nrows();
    check_count(n, c)?;
    let mut rng = stream_rng(seed, SAMPLING_STREAM);
    let mut centers = plus_plus_init(x, c, &mut rng);
    let mut counts = vec![0usize; c];
    let batch = opts.batch.max(1);
    let full_batch = batch >= n;
    let mut last_assign: Vec<usize> = Vec::new();

    for _ in 0..opts.iters {
        let rows: Vec<usize> = if full_batch {
            (0..n).collect()
        } else {
            index::sample(&mut rng, n, batch).into_vec()
        };
        let assign: Vec<usize> = rows.iter().map(|&i| nearest(x, i, &centers).0).collect();
        if full_batch && assign == last_assign {
            break;
        }
        for (&i, &j) in rows.iter().zip(&assign) {
            counts[j] += 1;
            let eta = 1.0 / counts[j] as f64;
            for k in 0..x.ncols() {
                centers[(j, k)] = (1.0 - eta) * centers[(j, k)] + eta * x[(i, k)];
            }
        }
        if full_batch {
            last_assign = assign;
        }
    }

    reseed_empty(x, &mut centers);
    separate_duplicates(x, &mut centers, opts.jitter);
    Ok(LandmarkSelection {
        strategy: Strategy::Kmeans,
        seed,
        sketch: Sketch::Points { centroids: centers },
    })
}

/// Move clusters that own no point onto the point farthest from its centre.
fn reseed_empty(x: &DMatrix<f64>, centers: &mut DMatrix<f64>) {
    let n = x.nrows();
    let k = centers.nrows();
    let mut taken = vec![false; n];
    loop {
        let mut owned = vec![0usize; k];
        let mut far = (usize::MAX, -1.0);
        for i in 0..n {
            let (j, d) = nearest(x, i, centers);
            owned[j] += 1;
            if !taken[i] && d > far.1 {
                far = (i, d);
            }
        }
        let Some(empty) = owned.iter().position(|&o| o == 0) else {
            return;
        };
        if far.0 == usize::MAX || far.1 <= 0.0 {
            return;
        }
        taken[far.0] = true;
        centers.set_row(empty, &x.row(far.0));
    }
}

/// Nudge exact duplicates apart, towards the data mean, so K_YY stays
/// non-singular.
fn separate_duplicates(x: &DMatrix<f64>, centers: &mut DMatrix<f64>, jitter: f64) {
    let k = centers.nrows();
    let m = centers.ncols();
    let mean: Vec<f64> = (0..m).map(|j| x.column(j).mean()).collect();
    for a in 1..k {
        let dups = (0..a)
            .filter(|&b| sq_dist(centers, a, centers, b) == 0.0)
            .count();
        if dups == 0 {
            continue;
        }
        for j in 0..m {
            let dir = if mean[j] >= centers[(a, j)] { 1.0 } else { -1.0 };
            centers[(a, j)] += dir * jitter * dups as f64;
        }
    }
}
