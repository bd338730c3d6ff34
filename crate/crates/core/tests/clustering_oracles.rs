use std::collections::{BTreeMap, BTreeSet};

use gridpulse::embed::{distance_matrix, hop_rings};
use gridpulse::epicluster::{build_dendrogram, cluster_layer, kmeans, KPolicy};
use gridpulse::model::{timestamp_at, PmuId};
use gridpulse::spectral::{PmuSpectrum, SpectrumFrame};
use gridpulse::synthgen::{generate_topology, TopologyParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Textbook silhouette, written independently of the library.
fn silhouette_oracle(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = points.len();
    let clusters: BTreeSet<usize> = labels.iter().copied().collect();
    let mut s = 0.0;
    for i in 0..n {
        let same: Vec<usize> = (0..n).filter(|&j| j != i && labels[j] == labels[i]).collect();
        if same.is_empty() {
            continue;
        }
        let a = same.iter().map(|&j| euclid(&points[i], &points[j])).sum::<f64>() / same.len() as f64;
        let mut b = f64::INFINITY;
        for &c in &clusters {
            if c == labels[i] {
                continue;
            }
            let other: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
            let d = other.iter().map(|&j| euclid(&points[i], &points[j])).sum::<f64>() / other.len() as f64;
            b = b.min(d);
        }
        if a.max(b) > 0.0 {
            s += (b - a) / a.max(b);
        }
    }
    s / n as f64
}

fn peaked(rng: &mut ChaCha8Rng, bin: usize, dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..0.01)).collect();
    v[bin - 1] += 1.0 + rng.random_range(-0.05..0.05);
    v
}

fn same_partition(a: &[usize], b: &[usize]) -> bool {
    (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

#[test]
fn two_groups_match_exhaustive_partition_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut pts = Vec::new();
    for i in 0..6 {
        pts.push(peaked(&mut rng, if i % 2 == 0 { 5 } else { 10 }, 30));
    }
    let n = pts.len();
    let mut best = (f64::NEG_INFINITY, vec![0; n]);
    // every 2-partition; fixing point 0 in group 0 avoids mirror duplicates
    for mask in 0u32..(1 << (n - 1)) {
        let labels: Vec<usize> = (0..n).map(|i| if i == 0 { 0 } else { ((mask >> (i - 1)) & 1) as usize }).collect();
        if labels.iter().all(|&l| l == 0) {
            continue;
        }
        let s = silhouette_oracle(&pts, &labels);
        if s > best.0 {
            best = (s, labels);
        }
    }
    let c = cluster_layer(&pts, KPolicy::Auto).unwrap();
    assert_eq!(c.k, 2);
    assert!(same_partition(&c.assignments, &best.1));
    assert!(c.silhouette.unwrap() > 0.8);
    assert!((c.silhouette.unwrap() - best.0).abs() < 1e-12);
}

#[test]
fn manual_three_on_triplets_is_pure() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut pts = Vec::new();
    let mut truth = Vec::new();
    for g in 0..3 {
        for _ in 0..3 {
            pts.push(peaked(&mut rng, [3, 12, 25][g], 30));
            truth.push(g);
        }
    }
    let c = cluster_layer(&pts, KPolicy::Fixed(3)).unwrap();
    assert_eq!(c.k, 3);
    assert!(same_partition(&c.assignments, &truth));
}

#[test]
fn auto_k_is_silhouette_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..60 {
        let n = rng.random_range(3..=8);
        let groups = rng.random_range(1..=4);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let g = rng.random_range(0..groups);
                peaked(&mut rng, 2 + 4 * g, 20)
            })
            .collect();
        let auto = cluster_layer(&pts, KPolicy::Auto).unwrap();
        let mut best = (0, f64::NEG_INFINITY);
        for k in 2..=6.min(n - 1) {
            let (labels, _) = kmeans(&pts, k).unwrap();
            let s = silhouette_oracle(&pts, &labels);
            if s > best.1 + 1e-12 {
                best = (k, s);
            }
        }
        assert_eq!(auto.k, best.0, "trial {trial}");
    }
}

#[test]
fn distance_matrix_matches_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let v: Vec<Vec<f64>> = (0..10).map(|_| (0..150).map(|_| rng.random::<f64>()).collect()).collect();
    let d = distance_matrix(&v).unwrap();
    for i in 0..10 {
        for j in 0..10 {
            let mut acc = 0.0;
            for b in 0..150 {
                acc += (v[i][b] - v[j][b]) * (v[i][b] - v[j][b]);
            }
            assert!((d.get(i, j) - acc.sqrt()).abs() < 1e-12);
        }
    }
}

#[test]
fn hop_rings_are_arithmetic_means() {
    let topo = generate_topology(8, 12, &TopologyParams::default()).unwrap();
    let ids: Vec<PmuId> = topo.pmus().iter().map(|p| p.id).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pts: Vec<[f64; 2]> = ids.iter().map(|_| [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]).collect();
    let epi = ids[0];
    let rings = hop_rings(&topo, epi, &ids, &pts).unwrap();
    let epi_bus = topo.pmu(epi).unwrap().bus_id;
    let mut expect: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for (k, &p) in ids.iter().enumerate().skip(1) {
        let h = topo.hop_distance(epi_bus, topo.pmu(p).unwrap().bus_id).unwrap().unwrap();
        expect.entry(h).or_default().push(euclid(&pts[0], &pts[k]));
    }
    assert_eq!(rings.len(), expect.len());
    for r in &rings {
        let d = &expect[&r.hop];
        assert_eq!(r.count, d.len());
        assert!((r.radius - d.iter().sum::<f64>() / d.len() as f64).abs() < 1e-12);
    }
}

#[test]
fn dendrogram_partitions_selection_and_normalizes_flows() {
    for seed in 0..10 {
        let topo = generate_topology(seed, 14, &TopologyParams { pmu_coverage: 0.8, ..Default::default() }).unwrap();
        let ids: Vec<PmuId> = topo.pmus().iter().map(|p| p.id).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spectra = ids
            .iter()
            .map(|&p| {
                let bin = rng.random_range(1..8);
                PmuSpectrum {
                    pmu: p,
                    valid: true,
                    magnitudes: peaked(&mut rng, bin, 30),
                }
            })
            .collect();
        let frame = SpectrumFrame::from_spectra(timestamp_at(chrono::NaiveDate::from_ymd_opt(2017, 1, 1).unwrap(), 0), 60, spectra);
        let epi = [ids[0]];
        let m = build_dendrogram(&topo, &epi, &ids, &frame, KPolicy::Auto).unwrap();
        let mut seen = BTreeSet::new();
        for c in m.layers.iter().flat_map(|l| l.clusters.iter()) {
            for p in &c.pmus {
                assert!(seen.insert(*p), "PMU {p} in two clusters");
            }
        }
        let expected: BTreeSet<PmuId> = ids[1..].iter().copied().filter(|p| !m.unreachable.contains(p)).collect();
        assert_eq!(seen, expected);
        let mut incoming: BTreeMap<&str, f64> = BTreeMap::new();
        for f in &m.flows {
            *incoming.entry(f.to.as_str()).or_default() += f.weight;
        }
        for c in m.layers.iter().flat_map(|l| l.clusters.iter()) {
            assert!((incoming[c.id.as_str()] - 1.0).abs() < 1e-9);
        }
        let again = build_dendrogram(&topo, &epi, &ids, &frame, KPolicy::Auto).unwrap();
        assert_eq!(serde_json::to_vec(&m).unwrap(), serde_json::to_vec(&again).unwrap());
    }
}
