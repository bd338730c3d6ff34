//! Request resolution, analysis and response caching shared by the HTTP
//! server and the command line.

use std::collections::BTreeMap;
use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use chrono::{Duration, NaiveDateTime};
use gridpulse::embed::{distance_matrix, hop_rings, resolve_collisions, tsne_embed, TsneConfig};
use gridpulse::epicluster::{build_dendrogram, KPolicy};
use gridpulse::localize::{frame_kde, rank_epicenter_candidates};
use gridpulse::model::{Attribute, PmuId};
use gridpulse::spectral::{
    analyze_windows, correlation_to_reference, flag_pmus, SpectrumConfig, SpectrumFrame, TimelineEntry, WindowSpec,
    WINDOW_SECONDS,
};
use lru::LruCache;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::api::*;
use crate::config::ServiceConfig;
use crate::dataset::Dataset;
use crate::error::{ApiError, ApiResult};

type Body = Arc<Vec<u8>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub entries: usize,
}

pub struct Engine {
    data: Dataset,
    config: ServiceConfig,
    spectrum: SpectrumConfig,
    cache: Mutex<LruCache<[u8; 32], Body>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl Engine {
    pub fn new(data: Dataset, config: ServiceConfig) -> Self {
        let capacity = NonZeroUsize::new(config.cache_entries.max(1)).expect("nonzero");
        Engine {
            data,
            config,
            spectrum: SpectrumConfig::default(),
            cache: Mutex::new(LruCache::new(capacity)),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn cache_stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            entries: self.cache.lock().map(|c| c.len()).unwrap_or(0),
        }
    }

    fn cached<P: Serialize, T: Serialize>(
        &self,
        kind: &str,
        params: &P,
        compute: impl FnOnce() -> ApiResult<T>,
    ) -> ApiResult<Body> {
        let mut h = Sha256::new();
        h.update(kind.as_bytes());
        h.update([0]);
        h.update(serde_json::to_vec(params).map_err(|e| ApiError::internal(e.to_string()))?);
        let key: [u8; 32] = h.finalize().into();
        if let Some(body) = self.cache.lock().ok().and_then(|mut c| c.get(&key).cloned()) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(body);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        // computed outside the lock; concurrent misses produce the same bytes
        let body = Arc::new(serde_json::to_vec(&compute()?).map_err(|e| ApiError::internal(e.to_string()))?);
        if let Ok(mut c) = self.cache.lock() {
            c.put(key, body.clone());
        }
        Ok(body)
    }

    fn window(&self, w: Option<u32>) -> ApiResult<u32> {
        let w = w.unwrap_or(self.config.default_window_s);
        if WINDOW_SECONDS.contains(&w) {
            Ok(w)
        } else {
            Err(ApiError::bad_request(format!("window_s must be one of {WINDOW_SECONDS:?}, got {w}")))
        }
    }

    /// Sorted, deduplicated and checked against the topology; `None` means all.
    fn pmus(&self, ids: Option<Vec<PmuId>>) -> ApiResult<Vec<PmuId>> {
        let mut ids = match ids {
            Some(v) => v,
            None => self.data.topology.pmus().iter().map(|p| p.id).collect(),
        };
        ids.sort();
        ids.dedup();
        if ids.is_empty() {
            return Err(ApiError::bad_request("PMU list is empty"));
        }
        for &p in &ids {
            if !self.data.topology.contains_pmu(p) {
                return Err(ApiError::not_found(format!("unknown PMU {p}")));
            }
        }
        Ok(ids)
    }

    fn frames(&self, spec: &WindowSpec, pmus: &[PmuId]) -> ApiResult<Vec<SpectrumFrame>> {
        Ok(analyze_windows(&self.data.store, spec, pmus, &self.spectrum)?)
    }

    fn single_frame(&self, at: NaiveDateTime, window_s: u32, attribute: Attribute, pmus: &[PmuId]) -> ApiResult<SpectrumFrame> {
        let spec = WindowSpec::new(window_s, at, at + Duration::seconds(i64::from(window_s)), attribute);
        let frame = self
            .frames(&spec, pmus)?
            .pop()
            .ok_or_else(|| ApiError::internal("window produced no frame"))?;
        if frame.dominant.is_none() {
            return Err(ApiError::out_of_range(format!("no valid data in the {window_s} s window at {at}")));
        }
        Ok(frame)
    }

    // ---- topology and events

    pub fn topology(&self) -> TopologyResponse {
        let t = &self.data.topology;
        let counts = BTreeMap::from([
            ("substations".to_string(), t.substations().len()),
            ("buses".to_string(), t.buses().len()),
            ("edges".to_string(), t.edges().len()),
            ("pmus".to_string(), t.pmus().len()),
        ]);
        TopologyResponse {
            schema_version: SCHEMA_VERSION.into(),
            counts,
            topology: t.clone(),
        }
    }

    pub fn topology_body(&self) -> ApiResult<Body> {
        self.cached("topology", &(), || Ok(self.topology()))
    }

    pub fn events(&self) -> EventsResponse {
        EventsResponse {
            schema_version: SCHEMA_VERSION.into(),
            events: self.data.events.clone(),
            reports: self.data.reports.clone(),
        }
    }

    pub fn events_body(&self) -> ApiResult<Body> {
        self.cached("events", &(), || Ok(self.events()))
    }

    // ---- analyze

    pub fn resolve_analyze(&self, req: AnalyzeRequest) -> ApiResult<AnalyzeParams> {
        let window_s = self.window(req.window_s)?;
        let span = Duration::seconds(i64::from(window_s));
        let (from, to) = match &req.event_id {
            Some(id) => {
                let ev = self
                    .data
                    .find_event(id)
                    .ok_or_else(|| ApiError::not_found(format!("unknown event {id}")))?;
                let from = req
                    .from
                    .or(ev.t_start)
                    .ok_or_else(|| ApiError::out_of_range(format!("event {id} has no time; pass from/to")))?;
                let to = req.to.or(ev.t_end).unwrap_or(from + span).max(from + span);
                (from, to)
            }
            None => match (req.from, req.to) {
                (Some(f), Some(t)) => (f, t),
                _ => return Err(ApiError::bad_request("from and to are required unless event_id is given")),
            },
        };
        if to - from < span {
            return Err(ApiError::bad_request("range is shorter than one window"));
        }
        let threshold_pct = req.threshold_pct.unwrap_or(self.config.default_threshold_pct);
        if !(threshold_pct > 0.0 && threshold_pct <= 100.0) {
            return Err(ApiError::bad_request(format!("threshold_pct {threshold_pct} is outside (0, 100]")));
        }
        let stride_s = req.stride_s.unwrap_or(window_s);
        if stride_s == 0 {
            return Err(ApiError::bad_request("stride_s must be positive"));
        }
        if let Some(at) = req.at {
            if at < from || at >= to {
                return Err(ApiError::out_of_range(format!("focus time {at} is outside [{from}, {to})")));
            }
        }
        let resolution = req.resolution.unwrap_or(self.config.kde_resolution);
        if !(16..=1024).contains(&resolution) {
            return Err(ApiError::bad_request("resolution must be within 16..=1024"));
        }
        if req.bandwidth.is_some_and(|b| !(b > 0.0)) {
            return Err(ApiError::bad_request("bandwidth must be positive"));
        }
        Ok(AnalyzeParams {
            event_id: req.event_id,
            from,
            to,
            window_s,
            stride_s,
            attribute: req.attribute.unwrap_or(self.config.default_attribute),
            threshold_pct,
            pmu_ids: self.pmus(req.pmu_ids)?,
            at: req.at,
            bandwidth: req.bandwidth,
            resolution,
        })
    }

    /// Raw spectrum frames for resolved analysis parameters.
    pub fn analysis_frames(&self, p: &AnalyzeParams) -> ApiResult<Vec<SpectrumFrame>> {
        let spec = WindowSpec {
            window_seconds: p.window_s,
            stride_seconds: p.stride_s,
            t_start: p.from,
            t_end: p.to,
            attribute: p.attribute,
        };
        self.frames(&spec, &p.pmu_ids)
    }

    pub fn compute_analyze(&self, p: &AnalyzeParams) -> ApiResult<AnalyzeResponse> {
        let frames = self.analysis_frames(p)?;
        let summaries = frames
            .iter()
            .map(|f| {
                Ok(FrameSummary {
                    start: f.start,
                    frequency_hz: f.dominant.map(|d| d.frequency_hz),
                    peak_pmu: f.dominant.map(|d| d.peak_pmu),
                    peak_magnitude: f.dominant.map(|d| d.peak_magnitude),
                    valid_pmus: f.valid_spectra().count(),
                    flags: flag_pmus(f, p.threshold_pct)?,
                    ranking: rank_epicenter_candidates(f),
                })
            })
            .collect::<ApiResult<Vec<_>>>()?;

        let focus_index = match p.at {
            Some(at) => frames.iter().rposition(|f| f.start <= at),
            None => frames
                .iter()
                .enumerate()
                .filter_map(|(i, f)| f.dominant.map(|d| (i, d.peak_magnitude)))
                .fold(None, |best: Option<(usize, f64)>, cur| match best {
                    Some(b) if b.1 >= cur.1 => Some(b),
                    _ => Some(cur),
                })
                .map(|(i, _)| i),
        };
        let focus = match focus_index {
            Some(i) => {
                let f = &frames[i];
                let correlation = match f.dominant {
                    Some(d) => correlation_to_reference(f, d.peak_pmu)?,
                    None => BTreeMap::new(),
                };
                Some(FocusFrame {
                    index: i,
                    start: f.start,
                    frequency_hz: f.dominant.map(|d| d.frequency_hz),
                    bin_hz: f.bin_hz,
                    peak_pmu: f.dominant.map(|d| d.peak_pmu),
                    spectra: f.spectra.clone(),
                    correlation,
                    kde: frame_kde(&self.data.topology, f, p.bandwidth, p.resolution)?,
                })
            }
            None => None,
        };
        Ok(AnalyzeResponse {
            schema_version: SCHEMA_VERSION.into(),
            params: p.clone(),
            frames: summaries,
            focus,
        })
    }

    pub fn analyze(&self, req: AnalyzeRequest) -> ApiResult<AnalyzeResponse> {
        self.compute_analyze(&self.resolve_analyze(req)?)
    }

    pub fn analyze_body(&self, req: AnalyzeRequest) -> ApiResult<Body> {
        let p = self.resolve_analyze(req)?;
        self.cached("analyze", &p, || self.compute_analyze(&p))
    }

    // ---- dendrogram

    pub fn resolve_dendrogram(&self, req: DendrogramRequest) -> ApiResult<DendrogramParams> {
        let epicenter_ids = self.pmus(Some(req.epicenter_ids))?;
        let mut selected = self.pmus(req.selected_ids)?;
        selected.retain(|p| !epicenter_ids.contains(p));
        let at = req.at.ok_or_else(|| ApiError::bad_request("at is required"))?;
        let k = req.k.unwrap_or_default();
        if k == KPolicy::Fixed(0) {
            return Err(ApiError::bad_request("k must be \"auto\" or at least 1"));
        }
        Ok(DendrogramParams {
            epicenter_ids,
            selected_ids: selected,
            at,
            window_s: self.window(req.window_s)?,
            attribute: req.attribute.unwrap_or(self.config.default_attribute),
            k,
        })
    }

    pub fn compute_dendrogram(&self, p: &DendrogramParams) -> ApiResult<DendrogramResponse> {
        let mut all = p.epicenter_ids.clone();
        all.extend(&p.selected_ids);
        all.sort();
        let frame = self.single_frame(p.at, p.window_s, p.attribute, &all)?;
        let model = build_dendrogram(&self.data.topology, &p.epicenter_ids, &p.selected_ids, &frame, p.k)?;
        Ok(DendrogramResponse {
            schema_version: SCHEMA_VERSION.into(),
            params: p.clone(),
            model,
        })
    }

    pub fn dendrogram(&self, req: DendrogramRequest) -> ApiResult<DendrogramResponse> {
        self.compute_dendrogram(&self.resolve_dendrogram(req)?)
    }

    pub fn dendrogram_body(&self, req: DendrogramRequest) -> ApiResult<Body> {
        let p = self.resolve_dendrogram(req)?;
        self.cached("dendrogram", &p, || self.compute_dendrogram(&p))
    }

    // ---- embedding

    pub fn resolve_embedding(&self, req: EmbeddingRequest) -> ApiResult<EmbeddingParams> {
        let selected_ids = self.pmus(req.selected_ids)?;
        if selected_ids.len() < 2 {
            return Err(ApiError::bad_request("embedding needs at least two PMUs"));
        }
        let perplexity = match req.perplexity {
            Some(p) if !(p > 0.0) || p >= selected_ids.len() as f64 => {
                return Err(ApiError::bad_request(format!(
                    "perplexity {p} must be positive and below the {} selected PMUs",
                    selected_ids.len()
                )))
            }
            Some(p) => p,
            None => TsneConfig::default()
                .perplexity
                .min(((selected_ids.len() - 1) as f64 / 3.0).max(1.0)),
        };
        if let Some(e) = req.epicenter_id {
            if !selected_ids.contains(&e) {
                return Err(ApiError::bad_request(format!("epicenter {e} is not among the selected PMUs")));
            }
        }
        if req.collision_radius.is_some_and(|r| !(r > 0.0)) {
            return Err(ApiError::bad_request("collision_radius must be positive"));
        }
        Ok(EmbeddingParams {
            selected_ids,
            at: req.at.ok_or_else(|| ApiError::bad_request("at is required"))?,
            window_s: self.window(req.window_s)?,
            attribute: req.attribute.unwrap_or(self.config.default_attribute),
            perplexity,
            seed: req.seed.unwrap_or(0),
            epicenter_id: req.epicenter_id,
            collision_radius: req.collision_radius,
        })
    }

    pub fn compute_embedding(&self, p: &EmbeddingParams) -> ApiResult<EmbeddingResponse> {
        let frame = self.single_frame(p.at, p.window_s, p.attribute, &p.selected_ids)?;
        let mut ids = Vec::new();
        let mut vectors = Vec::new();
        let mut no_data = Vec::new();
        for s in &frame.spectra {
            if s.valid {
                ids.push(s.pmu);
                vectors.push(s.magnitudes.clone());
            } else {
                no_data.push(s.pmu);
            }
        }
        if ids.len() < 2 || p.perplexity >= ids.len() as f64 {
            return Err(ApiError::out_of_range(format!(
                "only {} PMUs have valid data in this window",
                ids.len()
            )));
        }
        let d = distance_matrix(&vectors)?;
        let cfg = TsneConfig {
            perplexity: p.perplexity,
            seed: p.seed,
            ..Default::default()
        };
        let emb = tsne_embed(&d, &cfg)?;
        let (points, overlaps) = match p.collision_radius {
            Some(r) => {
                let res = resolve_collisions(&ids, &emb.points, r, 50);
                (res.points, res.overlaps)
            }
            None => (emb.points.clone(), 0),
        };
        let epicenter = p
            .epicenter_id
            .filter(|e| ids.contains(e))
            .or(frame.dominant.map(|d| d.peak_pmu));
        let rings = match epicenter {
            Some(e) => hop_rings(&self.data.topology, e, &ids, &points)?,
            None => Vec::new(),
        };
        let mut params = p.clone();
        params.epicenter_id = epicenter;
        Ok(EmbeddingResponse {
            schema_version: SCHEMA_VERSION.into(),
            params,
            points: ids
                .iter()
                .zip(&points)
                .map(|(&pmu, pt)| EmbeddedPoint { pmu, x: pt[0], y: pt[1] })
                .collect(),
            rings,
            kl_divergence: emb.kl_history.last().copied().unwrap_or(0.0),
            overlaps,
            no_data,
        })
    }

    pub fn embedding(&self, req: EmbeddingRequest) -> ApiResult<EmbeddingResponse> {
        self.compute_embedding(&self.resolve_embedding(req)?)
    }

    pub fn embedding_body(&self, req: EmbeddingRequest) -> ApiResult<Body> {
        let p = self.resolve_embedding(req)?;
        self.cached("embedding", &p, || self.compute_embedding(&p))
    }

    // ---- timeline

    pub fn resolve_timeline(&self, q: TimelineQuery) -> ApiResult<TimelineParams> {
        let (from, to) = match (q.from, q.to) {
            (Some(f), Some(t)) => (f, t),
            _ => return Err(ApiError::bad_request("from and to are required")),
        };
        let window_s = self.window(q.window_s)?;
        if to - from < Duration::seconds(i64::from(window_s)) {
            return Err(ApiError::bad_request("range is shorter than one window"));
        }
        let stride_s = q.stride_s.unwrap_or(window_s);
        if stride_s == 0 {
            return Err(ApiError::bad_request("stride_s must be positive"));
        }
        let pmu_ids = match q.pmu_ids.as_deref().map(str::trim).filter(|s| !s.is_empty()) {
            Some(list) => Some(
                list.split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<u32>()
                            .map(PmuId)
                            .map_err(|_| ApiError::bad_request(format!("bad PMU id {s:?}")))
                    })
                    .collect::<ApiResult<Vec<_>>>()?,
            ),
            None => None,
        };
        Ok(TimelineParams {
            from,
            to,
            window_s,
            stride_s,
            attribute: q.attribute.unwrap_or(self.config.default_attribute),
            pmu_ids: self.pmus(pmu_ids)?,
        })
    }

    pub fn compute_timeline(&self, p: &TimelineParams) -> ApiResult<TimelineResponse> {
        let spec = WindowSpec {
            window_seconds: p.window_s,
            stride_seconds: p.stride_s,
            t_start: p.from,
            t_end: p.to,
            attribute: p.attribute,
        };
        let entries = self.frames(&spec, &p.pmu_ids)?.iter().map(TimelineEntry::from).collect();
        Ok(TimelineResponse {
            schema_version: SCHEMA_VERSION.into(),
            params: p.clone(),
            entries,
        })
    }

    pub fn timeline(&self, q: TimelineQuery) -> ApiResult<TimelineResponse> {
        self.compute_timeline(&self.resolve_timeline(q)?)
    }

    pub fn timeline_body(&self, q: TimelineQuery) -> ApiResult<Body> {
        let p = self.resolve_timeline(q)?;
        self.cached("timeline", &p, || self.compute_timeline(&p))
    }
}
