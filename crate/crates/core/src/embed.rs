//! Spectral similarity embedding: Euclidean distances between PMU spectra,
//! exact 2-D t-SNE, circle collision resolution and average-hop rings.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GridTopology, PmuId};

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub n: usize,
    pub values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

pub fn distance_matrix(vectors: &[Vec<f64>]) -> Result<DistanceMatrix> {
    let n = vectors.len();
    if let Some(first) = vectors.first() {
        if vectors.iter().any(|v| v.len() != first.len()) {
            return Err(Error::arg("spectra differ in length"));
        }
    }
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = vectors[i]
                .iter()
                .zip(&vectors[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    Ok(DistanceMatrix { n, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch_iter: usize,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub init_std: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 10.0,
            iterations: 1000,
            learning_rate: 100.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch_iter: 250,
            exaggeration: 4.0,
            exaggeration_iters: 100,
            init_std: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub points: Vec<[f64; 2]>,
    /// KL(P || Q) after every iteration, measured against the unexaggerated P.
    pub kl_history: Vec<f64>,
}

impl Embedding {
    /// Whether KL never rises by more than `tol` (relative) from `from_iter` on.
    pub fn kl_non_increasing_from(&self, from_iter: usize, tol: f64) -> bool {
        self.kl_history
            .get(from_iter..)
            .unwrap_or(&[])
            .windows(2)
            .all(|w| w[1] <= w[0] + tol * w[0].abs().max(1e-12))
    }
}

/// Conditional affinities for one row, bisecting the Gaussian precision until
/// the row's perplexity matches.
fn row_affinities(d2: &[f64], i: usize, perplexity: f64) -> Vec<f64> {
    let n = d2.len();
    let target = perplexity.ln();
    let mut beta = 1.0;
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    let min_d = (0..n).filter(|&j| j != i).map(|j| d2[j]).fold(f64::INFINITY, f64::min);
    let mut p = vec![0.0; n];
    for _ in 0..200 {
        let mut sum = 0.0;
        for j in 0..n {
            // shifting by the nearest distance keeps exp() away from underflow
            p[j] = if j == i { 0.0 } else { (-(d2[j] - min_d) * beta).exp() };
            sum += p[j];
        }
        let mut weighted = 0.0;
        for j in 0..n {
            p[j] /= sum;
            weighted += p[j] * (d2[j] - min_d);
        }
        let entropy = sum.ln() + beta * weighted;
        let diff = entropy - target;
        if diff.abs() < 1e-10 {
            break;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = (beta + lo) / 2.0;
        }
    }
    p
}

fn joint_affinities(d: &DistanceMatrix, perplexity: f64) -> Vec<f64> {
    let n = d.n;
    let d2: Vec<f64> = d.values.iter().map(|v| v * v).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| row_affinities(&d2[i * n..(i + 1) * n], i, perplexity))
        .collect();
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = ((rows[i][j] + rows[j][i]) / (2.0 * n as f64)).max(1e-12);
            }
        }
    }
    p
}

/// Exact t-SNE on a precomputed distance matrix. The output is centred on
/// the origin.
pub fn tsne_embed(d: &DistanceMatrix, cfg: &TsneConfig) -> Result<Embedding> {
    let n = d.n;
    if n < 2 {
        return Err(Error::arg("t-SNE needs at least two points"));
    }
    if !(cfg.perplexity > 0.0) || cfg.perplexity >= n as f64 {
        return Err(Error::arg(format!(
            "perplexity {} must be positive and below the point count {n}",
            cfg.perplexity
        )));
    }
    let p = joint_affinities(d, cfg.perplexity);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, cfg.init_std).map_err(|e| Error::arg(e.to_string()))?;
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)]).collect();
    center(&mut y);
    let mut velocity = vec![[0.0; 2]; n];
    let mut num = vec![0.0; n * n];
    let mut grad = vec![[0.0; 2]; n];
    let mut kl_history = Vec::with_capacity(cfg.iterations);

    for iter in 0..cfg.iterations {
        let exaggeration = if iter < cfg.exaggeration_iters { cfg.exaggeration } else { 1.0 };
        let momentum = if iter < cfg.momentum_switch_iter { cfg.initial_momentum } else { cfg.final_momentum };
        let z = student_kernel(&y, &mut num);
        for i in 0..n {
            let mut g = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let k = i * n + j;
                let coeff = 4.0 * (exaggeration * p[k] - num[k] / z) * num[k];
                g[0] += coeff * (y[i][0] - y[j][0]);
                g[1] += coeff * (y[i][1] - y[j][1]);
            }
            grad[i] = g;
        }
        let previous = y.clone();
        for i in 0..n {
            for a in 0..2 {
                velocity[i][a] = momentum * velocity[i][a] - cfg.learning_rate * grad[i][a];
                y[i][a] += velocity[i][a];
            }
        }
        center(&mut y);
        let z = student_kernel(&y, &mut num);
        let mut cost = kl(&p, &num, z);
        let last = kl_history.last().copied().unwrap_or(f64::INFINITY);
        if iter >= cfg.exaggeration_iters && cost > last {
            // restart: drop the momentum and backtrack a plain gradient step
            velocity.iter_mut().for_each(|v| *v = [0.0; 2]);
            let mut step = cfg.learning_rate;
            y.copy_from_slice(&previous);
            cost = last;
            for _ in 0..40 {
                let mut trial = previous.clone();
                for i in 0..n {
                    trial[i][0] -= step * grad[i][0];
                    trial[i][1] -= step * grad[i][1];
                }
                center(&mut trial);
                let z = student_kernel(&trial, &mut num);
                let c = kl(&p, &num, z);
                if c <= last {
                    y = trial;
                    cost = c;
                    break;
                }
                step /= 2.0;
            }
        }
        kl_history.push(cost);
    }
    Ok(Embedding { points: y, kl_history })
}

fn center(y: &mut [[f64; 2]]) {
    let n = y.len() as f64;
    let cx = y.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = y.iter().map(|p| p[1]).sum::<f64>() / n;
    for p in y.iter_mut() {
        p[0] -= cx;
        p[1] -= cy;
    }
}

/// Fills `num` with `1 / (1 + |y_i - y_j|²)` and returns its off-diagonal sum.
fn student_kernel(y: &[[f64; 2]], num: &mut [f64]) -> f64 {
    let n = y.len();
    let mut z = 0.0;
    for i in 0..n {
        num[i * n + i] = 0.0;
        for j in i + 1..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = v;
            num[j * n + i] = v;
            z += 2.0 * v;
        }
    }
    z
}

fn kl(p: &[f64], num: &[f64], z: f64) -> f64 {
    let n = (p.len() as f64).sqrt() as usize;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let k = i * n + j;
                let q = (num[k] / z).max(1e-300);
                total += p[k] * (p[k] / q).ln();
            }
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub points: Vec<[f64; 2]>,
    pub iterations: usize,
    /// Pairs still closer than two radii when the pass gave up.
    pub overlaps: usize,
}

fn jitter_axis(a: PmuId, b: PmuId) -> [f64; 2] {
    let mut h = (u64::from(a.0) << 32 | u64::from(b.0)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    h ^= h >> 29;
    let angle = (h % 1_000_003) as f64 / 1_000_003.0 * std::f64::consts::TAU;
    [angle.cos(), angle.sin()]
}

fn count_overlaps(points: &[[f64; 2]], min_dist: f64) -> usize {
    let mut count = 0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if dist(points[i], points[j]) < min_dist {
                count += 1;
            }
        }
    }
    count
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Pushes overlapping circles apart until every pair is at least `2 * radius`
/// apart or `max_iters` sweeps have run. Each overlapping pair moves
/// symmetrically along its axis; coincident pairs use an axis derived from
/// their ids.
pub fn resolve_collisions(ids: &[PmuId], points: &[[f64; 2]], radius: f64, max_iters: usize) -> Resolved {
    let mut pts = points.to_vec();
    if !(radius > 0.0) || ids.len() != pts.len() {
        return Resolved {
            overlaps: 0,
            iterations: 0,
            points: pts,
        };
    }
    let min_dist = 2.0 * radius;
    // overshoot so dense piles do not re-collide every sweep
    let target = min_dist * 1.1;
    let mut iterations = 0;
    while iterations < max_iters && count_overlaps(&pts, min_dist) > 0 {
        iterations += 1;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let d = dist(pts[i], pts[j]);
                if d >= min_dist {
                    continue;
                }
                let axis = if d > 1e-12 {
                    [(pts[j][0] - pts[i][0]) / d, (pts[j][1] - pts[i][1]) / d]
                } else {
                    jitter_axis(ids[i], ids[j])
                };
                let half = (target - d) / 2.0;
                pts[i][0] -= axis[0] * half;
                pts[i][1] -= axis[1] * half;
                pts[j][0] += axis[0] * half;
                pts[j][1] += axis[1] * half;
            }
        }
    }
    Resolved {
        overlaps: count_overlaps(&pts, min_dist),
        iterations,
        points: pts,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    pub hop: u32,
    pub radius: f64,
    pub count: usize,
}

/// Mean embedded distance from the epicenter's point to the PMUs at each hop.
/// Hops without PMUs, and unreachable PMUs, produce no ring.
pub fn hop_rings(topology: &GridTopology, epicenter: PmuId, ids: &[PmuId], points: &[[f64; 2]]) -> Result<Vec<Ring>> {
    if ids.len() != points.len() {
        return Err(Error::arg("one point per PMU is required"));
    }
    let origin = ids
        .iter()
        .position(|&p| p == epicenter)
        .map(|i| points[i])
        .ok_or_else(|| Error::arg(format!("epicenter {epicenter} is not in the embedding")))?;
    let hops = topology.hop_distances_from(topology.pmu(epicenter)?.bus_id)?;
    let mut acc: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
    for (&p, &pt) in ids.iter().zip(points) {
        if p == epicenter {
            continue;
        }
        if let Some(&h) = hops.get(&topology.pmu(p)?.bus_id) {
            let e = acc.entry(h).or_default();
            e.0 += dist(origin, pt);
            e.1 += 1;
        }
    }
    Ok(acc
        .into_iter()
        .map(|(hop, (sum, count))| Ring {
            hop,
            radius: sum / count as f64,
            count,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_examples() {
        let d = distance_matrix(&[vec![0.0, 3.0], vec![4.0, 0.0], vec![0.0, 3.0]]).unwrap();
        assert_eq!(d.get(0, 1), 5.0);
        assert_eq!(d.get(1, 0), 5.0);
        assert_eq!(d.get(0, 2), 0.0);
        assert_eq!(d.get(1, 1), 0.0);
        assert!(distance_matrix(&[vec![0.0], vec![1.0, 2.0]]).is_err());
    }

    fn two_clusters() -> (DistanceMatrix, Vec<usize>) {
        let mut v = Vec::new();
        let mut labels = Vec::new();
        for c in 0..2 {
            for k in 0..5 {
                v.push(vec![c as f64 * 100.0 + k as f64 * 0.3, (k % 2) as f64 * 0.5]);
                labels.push(c);
            }
        }
        (distance_matrix(&v).unwrap(), labels)
    }

    #[test]
    fn separated_clusters_stay_pure() {
        let (d, labels) = two_clusters();
        let cfg = TsneConfig {
            perplexity: 3.0,
            seed: 7,
            ..Default::default()
        };
        let e = tsne_embed(&d, &cfg).unwrap();
        for i in 0..10 {
            let mut others: Vec<usize> = (0..10).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| dist(e.points[i], e.points[a]).total_cmp(&dist(e.points[i], e.points[b])));
            for &j in &others[..4] {
                assert_eq!(labels[i], labels[j]);
            }
        }
    }

    #[test]
    fn two_points_separate_and_runs_repeat() {
        let d = distance_matrix(&[vec![0.0], vec![1.0]]).unwrap();
        let cfg = TsneConfig {
            perplexity: 1.0,
            ..Default::default()
        };
        let a = tsne_embed(&d, &cfg).unwrap();
        assert!(dist(a.points[0], a.points[1]) > 1e-6);
        let b = tsne_embed(&d, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn perplexity_must_be_below_n() {
        let d = distance_matrix(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        assert!(tsne_embed(&d, &TsneConfig::default()).is_err());
    }

    #[test]
    fn centroid_at_origin() {
        let (d, _) = two_clusters();
        let e = tsne_embed(&d, &TsneConfig { perplexity: 3.0, ..Default::default() }).unwrap();
        let cx: f64 = e.points.iter().map(|p| p[0]).sum();
        let cy: f64 = e.points.iter().map(|p| p[1]).sum();
        assert!(cx.abs() < 1e-9 && cy.abs() < 1e-9);
    }

    #[test]
    fn coincident_points_are_separated() {
        let ids = [PmuId(1), PmuId(2)];
        let r = resolve_collisions(&ids, &[[0.0, 0.0], [0.0, 0.0]], 1.0, 50);
        assert_eq!(r.overlaps, 0);
        assert!(dist(r.points[0], r.points[1]) >= 2.0);

        let ids: Vec<PmuId> = (1..=10).map(PmuId).collect();
        let r = resolve_collisions(&ids, &[[3.0, 3.0]; 10], 0.5, 50);
        assert_eq!(r.overlaps, 0);
    }

    #[test]
    fn separated_set_is_a_fixed_point() {
        let ids = [PmuId(1), PmuId(2), PmuId(3)];
        let pts = [[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]];
        let r = resolve_collisions(&ids, &pts, 1.0, 50);
        assert_eq!(r.points, pts.to_vec());
        assert_eq!(r.iterations, 0);
    }
}
