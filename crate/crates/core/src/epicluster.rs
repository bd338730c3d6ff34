//! Epicentric cluster dendrograms.
//!
//! Selected PMUs are layered by hop distance from the epicenter PMU(s); each
//! layer is clustered with k-means on the PMUs' magnitude spectra (k picked by
//! silhouette unless fixed). Clusters are then linked three ways from the
//! physical adjacency of their members (self, intra-hop, inter-hop), and every
//! pair of clusters on consecutive layers carries a flow weight derived from
//! the L1 distance between their averaged spectra, normalized over the
//! upstream clusters feeding each downstream cluster.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::NaiveDateTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GridTopology, PmuId};
use crate::spectral::{pearson, SpectrumFrame};

pub const KMEANS_SEED: u64 = 0x5EED_C1A5;
pub const KMEANS_RESTARTS: usize = 10;
pub const KMEANS_MAX_ITERS: usize = 100;
pub const AUTO_K_MAX: usize = 6;
pub const FLOW_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KPolicy {
    #[default]
    Auto,
    Fixed(usize),
}

impl Serialize for KPolicy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            KPolicy::Auto => s.serialize_str("auto"),
            KPolicy::Fixed(k) => s.serialize_u64(*k as u64),
        }
    }
}

impl<'de> Deserialize<'de> for KPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(usize),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(k) => Ok(KPolicy::Fixed(k)),
            Raw::Text(s) if s == "auto" => Ok(KPolicy::Auto),
            Raw::Text(s) => s
                .parse()
                .map(KPolicy::Fixed)
                .map_err(|_| serde::de::Error::custom(format!("k must be \"auto\" or an integer, got {s}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopLayers {
    /// Epicenter PMUs, sorted.
    pub root: Vec<PmuId>,
    /// Non-epicenter selected PMUs by hop distance (min over epicenters).
    pub layers: BTreeMap<u32, Vec<PmuId>>,
    pub unreachable: Vec<PmuId>,
}

pub fn hop_layers(topology: &GridTopology, epicenters: &[PmuId], selected: &[PmuId]) -> Result<HopLayers> {
    if epicenters.is_empty() {
        return Err(Error::arg("at least one epicenter PMU is required"));
    }
    let root: Vec<PmuId> = epicenters.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let mut distance_maps = Vec::with_capacity(root.len());
    for &e in &root {
        distance_maps.push(topology.hop_distances_from(topology.pmu(e)?.bus_id)?);
    }
    let mut layers: BTreeMap<u32, Vec<PmuId>> = BTreeMap::new();
    let mut unreachable = Vec::new();
    let others: BTreeSet<PmuId> = selected.iter().copied().filter(|p| !root.contains(p)).collect();
    for p in others {
        let bus = topology.pmu(p)?.bus_id;
        match distance_maps.iter().filter_map(|m| m.get(&bus).copied()).min() {
            Some(h) => layers.entry(h).or_default().push(p),
            None => unreachable.push(p),
        }
    }
    Ok(HopLayers {
        root,
        layers,
        unreachable,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Renumbers labels in order of first appearance.
fn canonical_labels(assignments: &[usize]) -> Vec<usize> {
    let mut map = HashMap::new();
    assignments
        .iter()
        .map(|&a| {
            let next = map.len();
            *map.entry(a).or_insert(next)
        })
        .collect()
}

/// One k-means run from farthest-point seeding, first center chosen by `rng`.
fn kmeans_once(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let n = points.len();
    let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..n)].clone()];
    while centers.len() < k {
        let far = (0..n)
            .map(|i| {
                let d = centers.iter().map(|c| sq_dist(&points[i], c)).fold(f64::INFINITY, f64::min);
                (i, d)
            })
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        centers.push(points[far.0].clone());
    }

    let mut assign = vec![usize::MAX; n];
    for _ in 0..KMEANS_MAX_ITERS {
        let next: Vec<usize> = points
            .iter()
            .map(|p| {
                (0..k)
                    .map(|c| (c, sq_dist(p, &centers[c])))
                    .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
                    .0
            })
            .collect();
        let mut next = next;
        fill_empty_clusters(points, &centers, &mut next, k);
        if next == assign {
            break;
        }
        assign = next;
        centers = means(points, &assign, k);
    }
    let inertia = points
        .iter()
        .zip(&assign)
        .map(|(p, &a)| sq_dist(p, &centers[a]))
        .sum();
    (assign, inertia)
}

/// Moves the point farthest from its center into any empty cluster.
fn fill_empty_clusters(points: &[Vec<f64>], centers: &[Vec<f64>], assign: &mut [usize], k: usize) {
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assign.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let donor = (0..points.len())
            .filter(|&i| sizes[assign[i]] > 1)
            .map(|i| (i, sq_dist(&points[i], &centers[assign[i]])))
            .fold(None, |best: Option<(usize, f64)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        match donor {
            Some((i, _)) => assign[i] = empty,
            None => return,
        }
    }
}

fn means(points: &[Vec<f64>], assign: &[usize], k: usize) -> Vec<Vec<f64>> {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assign) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    sums
}

/// Deterministic k-means: [`KMEANS_RESTARTS`] seeded restarts, lowest inertia
/// kept. Labels are canonical (cluster 0 holds the first point).
pub fn kmeans(points: &[Vec<f64>], k: usize) -> Result<(Vec<usize>, f64)> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::arg(format!("k = {k} is not within 1..={n}")));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::arg("feature vectors differ in length"));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for r in 0..KMEANS_RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(KMEANS_SEED.wrapping_add(r as u64));
        let (assign, inertia) = kmeans_once(points, k, &mut rng);
        if best.as_ref().is_none_or(|b| inertia < b.1) {
            best = Some((assign, inertia));
        }
    }
    let (assign, inertia) = best.expect("at least one restart");
    Ok((canonical_labels(&assign), inertia))
}

/// Mean silhouette with Euclidean distance. `None` unless `2 <= k <= n - 1`.
/// Singleton clusters score 0.
pub fn silhouette(points: &[Vec<f64>], assign: &[usize]) -> Option<f64> {
    let n = points.len();
    let k = assign.iter().copied().max().map_or(0, |m| m + 1);
    if k < 2 || k >= n {
        return None;
    }
    let mut sizes = vec![0usize; k];
    for &a in assign {
        sizes[a] += 1;
    }
    let mut total = 0.0;
    for i in 0..n {
        let own = assign[i];
        if sizes[own] <= 1 {
            continue;
        }
        let mut sums = vec![0.0; k];
        for j in 0..n {
            if j != i {
                sums[assign[j]] += euclid(&points[i], &points[j]);
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Some(total / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerClustering {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub silhouette: Option<f64>,
    pub inertia: f64,
    /// Silhouette of every k tried in auto mode.
    pub candidates: Vec<(usize, Option<f64>)>,
}

/// Clusters one layer. Auto mode tries `k` in `2..=min(6, n-1)` and keeps the
/// best silhouette (smaller k on ties); layers of one or two PMUs form a
/// single cluster.
pub fn cluster_layer(features: &[Vec<f64>], policy: KPolicy) -> Result<LayerClustering> {
    let n = features.len();
    if n == 0 {
        return Err(Error::arg("cannot cluster an empty layer"));
    }
    match policy {
        KPolicy::Fixed(k) => {
            if k == 0 || k > n {
                return Err(Error::arg(format!("k = {k} exceeds the {n} PMUs in the layer")));
            }
            let (assignments, inertia) = kmeans(features, k)?;
            let silhouette = silhouette(features, &assignments);
            Ok(LayerClustering {
                k,
                assignments,
                silhouette,
                inertia,
                candidates: vec![(k, silhouette)],
            })
        }
        KPolicy::Auto if n <= 2 => Ok(LayerClustering {
            k: 1,
            assignments: vec![0; n],
            silhouette: None,
            inertia: kmeans(features, 1)?.1,
            candidates: Vec::new(),
        }),
        KPolicy::Auto => {
            let mut best: Option<LayerClustering> = None;
            let mut candidates = Vec::new();
            for k in 2..=AUTO_K_MAX.min(n - 1) {
                let (assignments, inertia) = kmeans(features, k)?;
                let score = silhouette(features, &assignments);
                candidates.push((k, score));
                let s = score.unwrap_or(f64::NEG_INFINITY);
                if best
                    .as_ref()
                    .is_none_or(|b| s > b.silhouette.unwrap_or(f64::NEG_INFINITY))
                {
                    best = Some(LayerClustering {
                        k,
                        assignments,
                        silhouette: score,
                        inertia,
                        candidates: Vec::new(),
                    });
                }
            }
            let mut best = best.expect("n >= 3 gives at least one candidate");
            best.candidates = candidates;
            Ok(best)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl BoxStats {
    /// Five-number summary with linearly interpolated quartiles.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(BoxStats {
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterNode {
    pub id: String,
    pub hop: u32,
    pub pmus: Vec<PmuId>,
    pub mean_spectrum: Vec<f64>,
    /// Pearson correlation of the averaged spectrum with the root's.
    pub swatch: f64,
    /// Distribution of member magnitudes at the dominant frequency.
    pub box_stats: Option<BoxStats>,
    pub self_links: usize,
    pub intra_hop_links: usize,
    pub inter_hop_links: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub hop: u32,
    pub k: usize,
    pub silhouette: Option<f64>,
    pub total_pmus: usize,
    pub candidates: Vec<(usize, Option<f64>)>,
    pub clusters: Vec<ClusterNode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    #[serde(rename = "self")]
    SelfLink,
    IntraHop,
    InterHop,
}

/// Aggregated physical links between (or within) clusters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub kind: LinkKind,
    pub from: String,
    pub to: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub from: String,
    pub to: String,
    pub l1_distance: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DendrogramModel {
    pub at: NaiveDateTime,
    pub frequency_hz: f64,
    pub root: ClusterNode,
    pub layers: Vec<Layer>,
    pub links: Vec<Link>,
    pub flows: Vec<Flow>,
    pub unreachable: Vec<PmuId>,
    /// Selected PMUs whose window was invalid; clustered with a zero spectrum.
    pub no_data: Vec<PmuId>,
}

impl DendrogramModel {
    pub fn clusters(&self) -> impl Iterator<Item = &ClusterNode> {
        std::iter::once(&self.root).chain(self.layers.iter().flat_map(|l| l.clusters.iter()))
    }

    pub fn cluster(&self, id: &str) -> Option<&ClusterNode> {
        self.clusters().find(|c| c.id == id)
    }
}

fn mean_vector(rows: &[&[f64]], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    if rows.is_empty() {
        return out;
    }
    for r in rows {
        for (o, v) in out.iter_mut().zip(r.iter()) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|v| *v /= rows.len() as f64);
    out
}

/// Assembles the full dendrogram for one spectrum frame.
pub fn build_dendrogram(
    topology: &GridTopology,
    epicenters: &[PmuId],
    selected: &[PmuId],
    frame: &SpectrumFrame,
    policy: KPolicy,
) -> Result<DendrogramModel> {
    if policy == KPolicy::Fixed(0) {
        return Err(Error::arg("k must be at least 1"));
    }
    let dominant = frame
        .dominant
        .ok_or_else(|| Error::arg("frame has no valid spectra"))?;
    let layers_by_hop = hop_layers(topology, epicenters, selected)?;
    let dim = frame.n_bins();
    let zero = vec![0.0; dim];
    let mut no_data = Vec::new();
    let mut feature: HashMap<PmuId, &[f64]> = HashMap::new();
    for &p in layers_by_hop.root.iter().chain(selected) {
        let s = frame
            .spectrum(p)
            .ok_or_else(|| Error::arg(format!("frame does not cover PMU {p}")))?;
        if s.valid {
            feature.insert(p, &s.magnitudes);
        } else {
            if !no_data.contains(&p) {
                no_data.push(p);
            }
            feature.insert(p, &zero);
        }
    }
    no_data.sort();
    let valid_rows = |pmus: &[PmuId]| -> Vec<&[f64]> {
        pmus.iter()
            .filter(|p| !no_data.contains(p))
            .map(|p| feature[p])
            .collect()
    };
    let box_of = |pmus: &[PmuId]| {
        let mags: Vec<f64> = pmus.iter().filter_map(|&p| frame.magnitude_at_dominant(p)).collect();
        BoxStats::of(&mags)
    };

    let root_mean = mean_vector(&valid_rows(&layers_by_hop.root), dim);
    let root = ClusterNode {
        id: "root".into(),
        hop: 0,
        pmus: layers_by_hop.root.clone(),
        swatch: pearson(&root_mean, &root_mean),
        mean_spectrum: root_mean.clone(),
        box_stats: box_of(&layers_by_hop.root),
        self_links: 0,
        intra_hop_links: 0,
        inter_hop_links: 0,
    };

    let clustered: Vec<(u32, Vec<PmuId>, LayerClustering)> = layers_by_hop
        .layers
        .par_iter()
        .map(|(&hop, pmus)| {
            let features: Vec<Vec<f64>> = pmus.iter().map(|p| feature[p].to_vec()).collect();
            // a fixed k applies to every hop; thin outer layers get fewer clusters
            let layer_policy = match policy {
                KPolicy::Fixed(k) => KPolicy::Fixed(k.min(pmus.len())),
                KPolicy::Auto => KPolicy::Auto,
            };
            cluster_layer(&features, layer_policy).map(|c| (hop, pmus.clone(), c))
        })
        .collect::<Result<_>>()?;

    let mut layers = Vec::with_capacity(clustered.len());
    for (hop, pmus, c) in clustered {
        let mut clusters = Vec::with_capacity(c.k);
        for label in 0..c.k {
            let members: Vec<PmuId> = pmus
                .iter()
                .zip(&c.assignments)
                .filter(|&(_, &a)| a == label)
                .map(|(&p, _)| p)
                .collect();
            let mean = mean_vector(&valid_rows(&members), dim);
            clusters.push(ClusterNode {
                id: format!("h{hop}c{label}"),
                hop,
                swatch: pearson(&mean, &root_mean),
                box_stats: box_of(&members),
                mean_spectrum: mean,
                pmus: members,
                self_links: 0,
                intra_hop_links: 0,
                inter_hop_links: 0,
            });
        }
        layers.push(Layer {
            hop,
            k: c.k,
            silhouette: c.silhouette,
            total_pmus: pmus.len(),
            candidates: c.candidates,
            clusters,
        });
    }

    // physical links
    let mut owner: HashMap<PmuId, (String, u32)> = HashMap::new();
    for &p in &root.pmus {
        owner.insert(p, (root.id.clone(), 0));
    }
    for layer in &layers {
        for c in &layer.clusters {
            for &p in &c.pmus {
                owner.insert(p, (c.id.clone(), c.hop));
            }
        }
    }
    let universe: Vec<PmuId> = owner.keys().copied().collect();
    let mut link_counts: BTreeMap<(LinkKind, String, String), usize> = BTreeMap::new();
    for (p, q) in topology.pmu_adjacency(&universe)? {
        let (cp, hp) = &owner[&p];
        let (cq, hq) = &owner[&q];
        let key = if cp == cq {
            (LinkKind::SelfLink, cp.clone(), cq.clone())
        } else if hp == hq {
            let (a, b) = if cp < cq { (cp, cq) } else { (cq, cp) };
            (LinkKind::IntraHop, a.clone(), b.clone())
        } else if hp < hq {
            (LinkKind::InterHop, cp.clone(), cq.clone())
        } else {
            (LinkKind::InterHop, cq.clone(), cp.clone())
        };
        *link_counts.entry(key).or_default() += 1;
    }
    let links: Vec<Link> = link_counts
        .into_iter()
        .map(|((kind, from, to), count)| Link { kind, from, to, count })
        .collect();

    let mut root = root;
    {
        let mut tally = |id: &str, kind: LinkKind, count: usize| {
            let node = if id == root.id {
                &mut root
            } else {
                match layers.iter_mut().flat_map(|l| l.clusters.iter_mut()).find(|c| c.id == id) {
                    Some(n) => n,
                    None => return,
                }
            };
            match kind {
                LinkKind::SelfLink => node.self_links += count,
                LinkKind::IntraHop => node.intra_hop_links += count,
                LinkKind::InterHop => node.inter_hop_links += count,
            }
        };
        for l in &links {
            tally(&l.from, l.kind, l.count);
            if l.kind != LinkKind::SelfLink {
                tally(&l.to, l.kind, l.count);
            }
        }
    }

    // flows: each downstream cluster draws from the nearest populated level
    // below it; layer-0 clusters (co-located with an epicenter) draw from root
    let mut flows = Vec::new();
    let mut push_flows = |upstream: &[&ClusterNode], d: &ClusterNode| {
        let dists: Vec<f64> = upstream.iter().map(|c| l1(&c.mean_spectrum, &d.mean_spectrum)).collect();
        let inv: Vec<f64> = dists.iter().map(|x| 1.0 / (FLOW_EPSILON + x)).collect();
        let total: f64 = inv.iter().sum();
        for ((c, dist), w) in upstream.iter().zip(dists).zip(inv) {
            flows.push(Flow {
                from: c.id.clone(),
                to: d.id.clone(),
                l1_distance: dist,
                weight: w / total,
            });
        }
    };
    let mut previous: Vec<&ClusterNode> = vec![&root];
    for layer in &layers {
        let upstream: Vec<&ClusterNode> = if layer.hop == 0 { vec![&root] } else { previous.clone() };
        for d in &layer.clusters {
            push_flows(&upstream, d);
        }
        previous = if layer.hop == 0 {
            std::iter::once(&root).chain(layer.clusters.iter()).collect()
        } else {
            layer.clusters.iter().collect()
        };
    }

    Ok(DendrogramModel {
        at: frame.start,
        frequency_hz: dominant.frequency_hz,
        root,
        layers,
        links,
        flows,
        unreachable: layers_by_hop.unreachable,
        no_data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Bus, BusId, Edge, EdgeId, EdgeKind, Pmu, Position, Substation, SubstationId, VoltageLevel};
    use crate::spectral::PmuSpectrum;
    use chrono::NaiveDate;

    fn chain(n: u32) -> GridTopology {
        let subs = (1..=n)
            .map(|i| Substation {
                id: SubstationId(i),
                name: format!("S{i}"),
                position: Position { x: i as f64, y: 0.0 },
            })
            .collect();
        let buses = (1..=n)
            .map(|i| Bus {
                id: BusId(i),
                substation_id: SubstationId(i),
                voltage: VoltageLevel::Kv345,
            })
            .collect();
        let edges = (1..n)
            .map(|i| Edge {
                id: EdgeId(i),
                kind: EdgeKind::Line,
                bus_a: BusId(i),
                bus_b: BusId(i + 1),
            })
            .collect();
        let pmus = (1..=n)
            .map(|i| Pmu {
                id: PmuId(i),
                bus_id: BusId(i),
                label: String::new(),
            })
            .collect();
        GridTopology::new(subs, buses, edges, pmus).unwrap()
    }

    fn peaked(bin: usize, height: f64) -> Vec<f64> {
        let mut v = vec![0.01; 30];
        v[bin - 1] = height;
        v
    }

    fn frame(spectra: Vec<(u32, Vec<f64>)>) -> SpectrumFrame {
        let t = NaiveDate::from_ymd_opt(2017, 4, 20).unwrap().and_hms_opt(21, 45, 0).unwrap();
        SpectrumFrame::from_spectra(
            t,
            60,
            spectra
                .into_iter()
                .map(|(id, magnitudes)| PmuSpectrum {
                    pmu: PmuId(id),
                    valid: true,
                    magnitudes,
                })
                .collect(),
        )
    }

    #[test]
    fn hop_layer_examples() {
        let t = chain(3);
        let l = hop_layers(&t, &[PmuId(1)], &[PmuId(1), PmuId(2), PmuId(3)]).unwrap();
        assert_eq!(l.root, vec![PmuId(1)]);
        assert_eq!(l.layers[&1], vec![PmuId(2)]);
        assert_eq!(l.layers[&2], vec![PmuId(3)]);
        let l = hop_layers(&t, &[PmuId(1), PmuId(3)], &[PmuId(2)]).unwrap();
        assert_eq!(l.layers.len(), 1);
        assert_eq!(l.layers[&1], vec![PmuId(2)]);
        assert!(hop_layers(&t, &[], &[PmuId(2)]).is_err());
    }

    #[test]
    fn singleton_layer_has_no_silhouette() {
        let c = cluster_layer(&[vec![1.0, 2.0]], KPolicy::Auto).unwrap();
        assert_eq!(c.k, 1);
        assert_eq!(c.silhouette, None);
        let c = cluster_layer(&[vec![1.0], vec![5.0]], KPolicy::Auto).unwrap();
        assert_eq!(c.k, 1);
        assert_eq!(c.assignments, vec![0, 0]);
    }

    #[test]
    fn manual_k_bounds() {
        let pts = vec![vec![0.0], vec![1.0]];
        assert!(cluster_layer(&pts, KPolicy::Fixed(3)).is_err());
        assert!(cluster_layer(&pts, KPolicy::Fixed(0)).is_err());
        assert_eq!(cluster_layer(&pts, KPolicy::Fixed(2)).unwrap().assignments, vec![0, 1]);
    }

    #[test]
    fn identical_points_still_fill_k_clusters() {
        let pts = vec![vec![1.0, 1.0]; 5];
        let (a, inertia) = kmeans(&pts, 3).unwrap();
        assert_eq!(a.iter().collect::<BTreeSet<_>>().len(), 3);
        assert_eq!(inertia, 0.0);
        assert_eq!(silhouette(&pts, &a), Some(0.0));
    }

    #[test]
    fn box_stats_quartiles() {
        let b = BoxStats::of(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!((b.min, b.q1, b.median, b.q3, b.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        assert!(BoxStats::of(&[]).is_none());
    }

    #[test]
    fn chain_flows_are_unit_weight() {
        let t = chain(4);
        let f = frame((1..=4).map(|i| (i, peaked(5, 1.0 / i as f64))).collect());
        let m = build_dendrogram(&t, &[PmuId(1)], &[PmuId(2), PmuId(3), PmuId(4)], &f, KPolicy::Auto).unwrap();
        assert_eq!(m.layers.len(), 3);
        assert_eq!(m.flows.len(), 3);
        for flow in &m.flows {
            assert!((flow.weight - 1.0).abs() < 1e-12);
        }
        // each adjacent hop pair contributes one structural inter-hop link
        assert_eq!(m.links.iter().filter(|l| l.kind == LinkKind::InterHop).count(), 3);
        assert!((m.root.swatch - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_upstream_clusters_split_flow_evenly() {
        // star: 1 is the epicenter, 2..=5 at hop 1, 6 at hop 2 behind 2 and 3
        let subs: Vec<Substation> = (1..=6)
            .map(|i| Substation {
                id: SubstationId(i),
                name: format!("S{i}"),
                position: Position { x: 0.0, y: i as f64 },
            })
            .collect();
        let buses = (1..=6)
            .map(|i| Bus {
                id: BusId(i),
                substation_id: SubstationId(i),
                voltage: VoltageLevel::Kv345,
            })
            .collect();
        let pairs = [(1, 2), (1, 3), (1, 4), (1, 5), (2, 6), (3, 6)];
        let edges = pairs
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| Edge {
                id: EdgeId(i as u32),
                kind: EdgeKind::Line,
                bus_a: BusId(a),
                bus_b: BusId(b),
            })
            .collect();
        let pmus = (1..=6)
            .map(|i| Pmu {
                id: PmuId(i),
                bus_id: BusId(i),
                label: String::new(),
            })
            .collect();
        let t = GridTopology::new(subs, buses, edges, pmus).unwrap();
        // hop 1: two identical pairs, far apart from each other
        let f = frame(vec![
            (1, peaked(5, 1.0)),
            (2, peaked(5, 0.5)),
            (3, peaked(5, 0.5)),
            (4, peaked(10, 0.5)),
            (5, peaked(10, 0.5)),
            (6, peaked(5, 0.2)),
        ]);
        let selected: Vec<PmuId> = (2..=6).map(PmuId).collect();
        let m = build_dendrogram(&t, &[PmuId(1)], &selected, &f, KPolicy::Fixed(2)).unwrap();
        let hop1 = &m.layers[0];
        assert_eq!(hop1.k, 2);
        // different spectra -> unequal; now force two identical upstream clusters
        let f2 = frame(vec![
            (1, peaked(5, 1.0)),
            (2, peaked(5, 0.5)),
            (3, peaked(5, 0.5)),
            (4, peaked(5, 0.5)),
            (5, peaked(5, 0.5)),
            (6, peaked(5, 0.2)),
        ]);
        let m2 = build_dendrogram(&t, &[PmuId(1)], &selected, &f2, KPolicy::Fixed(2)).unwrap();
        let into_hop2: Vec<&Flow> = m2.flows.iter().filter(|f| f.to.starts_with("h2")).collect();
        assert_eq!(into_hop2.len(), 2);
        for f in into_hop2 {
            assert!((f.weight - 0.5).abs() < 1e-12, "{}", f.weight);
        }
        let _ = m;
    }

    #[test]
    fn frame_must_cover_selection() {
        let t = chain(3);
        let f = frame(vec![(1, peaked(5, 1.0)), (2, peaked(5, 0.5))]);
        assert!(build_dendrogram(&t, &[PmuId(1)], &[PmuId(2), PmuId(3)], &f, KPolicy::Auto).is_err());
    }

    #[test]
    fn k_policy_serde() {
        assert_eq!(serde_json::from_str::<KPolicy>("\"auto\"").unwrap(), KPolicy::Auto);
        assert_eq!(serde_json::from_str::<KPolicy>("3").unwrap(), KPolicy::Fixed(3));
        assert_eq!(serde_json::to_string(&KPolicy::Fixed(2)).unwrap(), "2");
        assert!(serde_json::from_str::<KPolicy>("\"many\"").is_err());
    }
}
