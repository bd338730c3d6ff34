//! Request bodies, resolved parameter echoes and response payloads.
//!
//! Every response carries a `params` object holding the fully resolved
//! request (defaults filled in), so clients can mirror the settings that
//! produced it.

use std::collections::BTreeMap;

use chrono::NaiveDateTime;
use gridpulse::embed::Ring;
use gridpulse::epicluster::{DendrogramModel, KPolicy};
use gridpulse::localize::{Candidate, KdeField};
use gridpulse::model::{Attribute, EventRecord, GridTopology, PmuId};
use gridpulse::reports::LinkedReport;
use gridpulse::spectral::{Flag, PmuSpectrum, TimelineEntry};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeRequest {
    pub event_id: Option<String>,
    pub from: Option<NaiveDateTime>,
    pub to: Option<NaiveDateTime>,
    pub window_s: Option<u32>,
    pub stride_s: Option<u32>,
    pub attribute: Option<Attribute>,
    pub threshold_pct: Option<f64>,
    pub pmu_ids: Option<Vec<PmuId>>,
    /// Time inside the range whose frame gets the full detail payload.
    pub at: Option<NaiveDateTime>,
    pub bandwidth: Option<f64>,
    pub resolution: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeParams {
    pub event_id: Option<String>,
    pub from: NaiveDateTime,
    pub to: NaiveDateTime,
    pub window_s: u32,
    pub stride_s: u32,
    pub attribute: Attribute,
    pub threshold_pct: f64,
    pub pmu_ids: Vec<PmuId>,
    pub at: Option<NaiveDateTime>,
    pub bandwidth: Option<f64>,
    pub resolution: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSummary {
    pub start: NaiveDateTime,
    pub frequency_hz: Option<f64>,
    pub peak_pmu: Option<PmuId>,
    pub peak_magnitude: Option<f64>,
    pub valid_pmus: usize,
    pub flags: Vec<Flag>,
    pub ranking: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocusFrame {
    pub index: usize,
    pub start: NaiveDateTime,
    pub frequency_hz: Option<f64>,
    pub bin_hz: f64,
    pub peak_pmu: Option<PmuId>,
    pub spectra: Vec<PmuSpectrum>,
    /// Spectrum correlation of each PMU against the peak PMU.
    pub correlation: BTreeMap<PmuId, f64>,
    pub kde: KdeField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeResponse {
    pub schema_version: String,
    pub params: AnalyzeParams,
    pub frames: Vec<FrameSummary>,
    pub focus: Option<FocusFrame>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DendrogramRequest {
    pub epicenter_ids: Vec<PmuId>,
    pub selected_ids: Option<Vec<PmuId>>,
    pub at: Option<NaiveDateTime>,
    pub window_s: Option<u32>,
    pub attribute: Option<Attribute>,
    pub k: Option<KPolicy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DendrogramParams {
    pub epicenter_ids: Vec<PmuId>,
    pub selected_ids: Vec<PmuId>,
    pub at: NaiveDateTime,
    pub window_s: u32,
    pub attribute: Attribute,
    pub k: KPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DendrogramResponse {
    pub schema_version: String,
    pub params: DendrogramParams,
    pub model: DendrogramModel,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingRequest {
    pub selected_ids: Option<Vec<PmuId>>,
    pub at: Option<NaiveDateTime>,
    pub window_s: Option<u32>,
    pub attribute: Option<Attribute>,
    pub perplexity: Option<f64>,
    pub seed: Option<u64>,
    pub epicenter_id: Option<PmuId>,
    /// Circle radius for collision resolution; omitted means no resolution.
    pub collision_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingParams {
    pub selected_ids: Vec<PmuId>,
    pub at: NaiveDateTime,
    pub window_s: u32,
    pub attribute: Attribute,
    pub perplexity: f64,
    pub seed: u64,
    pub epicenter_id: Option<PmuId>,
    pub collision_radius: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedPoint {
    pub pmu: PmuId,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingResponse {
    pub schema_version: String,
    pub params: EmbeddingParams,
    pub points: Vec<EmbeddedPoint>,
    pub rings: Vec<Ring>,
    pub kl_divergence: f64,
    pub overlaps: usize,
    /// Selected PMUs left out because their window was invalid.
    pub no_data: Vec<PmuId>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimelineQuery {
    pub from: Option<NaiveDateTime>,
    pub to: Option<NaiveDateTime>,
    pub window_s: Option<u32>,
    pub stride_s: Option<u32>,
    pub attribute: Option<Attribute>,
    /// Comma-separated PMU ids.
    pub pmu_ids: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineParams {
    pub from: NaiveDateTime,
    pub to: NaiveDateTime,
    pub window_s: u32,
    pub stride_s: u32,
    pub attribute: Attribute,
    pub pmu_ids: Vec<PmuId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineResponse {
    pub schema_version: String,
    pub params: TimelineParams,
    pub entries: Vec<TimelineEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyResponse {
    pub schema_version: String,
    pub counts: BTreeMap<String, usize>,
    pub topology: GridTopology,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventsResponse {
    pub schema_version: String,
    pub events: Vec<EventRecord>,
    pub reports: Vec<LinkedReport>,
}
