//! Links free-text operator reports to epicenter PMUs.
//!
//! Explicit PMU ids win; otherwise substation names found in the text expand
//! to every PMU at that substation. Timestamps, a frequency and an event kind
//! are pulled out when present.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::LazyLock;

use chrono::{NaiveDate, NaiveDateTime};
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{EventKind, EventRecord, GridTopology, PmuId, Provenance, SubstationId};

static PMU_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bPMU\s*#?\s*(\d+)").expect("valid regex"));
static HZ_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)(\d+(?:\.\d+)?)\s*Hz\b").expect("valid regex"));
static ISO_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b(\d{4}-\d{2}-\d{2})[T ](\d{2}:\d{2}:\d{2}(?:\.\d+)?)").expect("valid regex")
});
static US_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b(\d{1,2}):(\d{2}):(\d{2}),\s*(\d{1,2})/(\d{1,2})/(\d{4})\b").expect("valid regex")
});
static TRANSIENT_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(transient|fault)").expect("valid regex"));
static OSCILLATION_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\boscillat").expect("valid regex"));

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "warning", rename_all = "snake_case")]
pub enum ReportWarning {
    NoTimestamp,
    Unlinked,
    UnknownPmu { id: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedReport {
    #[serde(flatten)]
    pub record: EventRecord,
    pub matched_substations: Vec<SubstationId>,
    pub warnings: Vec<ReportWarning>,
}

/// Precompiled dictionary of one topology's substation names.
pub struct ReportLinker<'a> {
    topology: &'a GridTopology,
    names: Option<Regex>,
    by_name: HashMap<String, Vec<SubstationId>>,
}

impl<'a> ReportLinker<'a> {
    pub fn new(topology: &'a GridTopology) -> Self {
        let mut by_name: HashMap<String, Vec<SubstationId>> = HashMap::new();
        for s in topology.substations() {
            by_name.entry(s.name.to_lowercase()).or_default().push(s.id);
        }
        let mut names: Vec<&String> = by_name.keys().filter(|n| !n.trim().is_empty()).collect();
        // longest first so "Flange 2" wins over "Flange"
        names.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        let names = (!names.is_empty()).then(|| {
            let alt = names.iter().map(|n| regex::escape(n)).collect::<Vec<_>>().join("|");
            Regex::new(&format!(r"(?i)\b(?:{alt})\b")).expect("escaped names form a valid regex")
        });
        ReportLinker {
            topology,
            names,
            by_name,
        }
    }

    pub fn link(&self, id: &str, text: &str) -> LinkedReport {
        let mut warnings = Vec::new();

        let mut pmus = BTreeSet::new();
        for cap in PMU_RE.captures_iter(text) {
            match cap[1].parse::<u32>() {
                Ok(n) if self.topology.contains_pmu(PmuId(n)) => {
                    pmus.insert(PmuId(n));
                }
                Ok(n) => warnings.push(ReportWarning::UnknownPmu { id: n }),
                Err(_) => {}
            }
        }

        let mut subs = BTreeSet::new();
        if let Some(re) = &self.names {
            for m in re.find_iter(text) {
                if let Some(ids) = self.by_name.get(&m.as_str().to_lowercase()) {
                    subs.extend(ids.iter().copied());
                }
            }
        }
        if pmus.is_empty() {
            for &s in &subs {
                pmus.extend(self.topology.pmus_at_substation(s));
            }
        }

        let times = timestamps(text);
        if times.is_empty() {
            warnings.push(ReportWarning::NoTimestamp);
        }
        if pmus.is_empty() {
            warnings.push(ReportWarning::Unlinked);
        }
        let oscillation_hz = HZ_RE
            .captures(text)
            .and_then(|c| c[1].parse::<f64>().ok())
            .filter(|f| *f > 0.0);
        let kind = if TRANSIENT_RE.is_match(text) {
            EventKind::Transient
        } else if OSCILLATION_RE.is_match(text) && oscillation_hz.is_some() {
            EventKind::Forced
        } else {
            EventKind::Unknown
        };

        LinkedReport {
            record: EventRecord {
                id: id.to_string(),
                t_start: times.first().copied(),
                t_end: times.last().copied(),
                oscillation_hz,
                epicenter_pmus: pmus.into_iter().collect(),
                kind,
                provenance: Provenance::ReportText { text: text.to_string() },
            },
            matched_substations: subs.into_iter().collect(),
            warnings,
        }
    }
}

/// All recognised timestamps in the text, sorted.
fn timestamps(text: &str) -> Vec<NaiveDateTime> {
    let mut out = Vec::new();
    for c in ISO_RE.captures_iter(text) {
        let s = format!("{}T{}", &c[1], &c[2]);
        if let Ok(t) = NaiveDateTime::parse_from_str(&s, "%Y-%m-%dT%H:%M:%S%.f") {
            out.push(t);
        }
    }
    for c in US_RE.captures_iter(text) {
        let n = |i: usize| c[i].parse::<u32>().unwrap_or(u32::MAX);
        let t = NaiveDate::from_ymd_opt(n(6) as i32, n(4), n(5)).and_then(|d| d.and_hms_opt(n(1), n(2), n(3)));
        if let Some(t) = t {
            out.push(t);
        }
    }
    out.sort();
    out
}

/// Stable id for a report derived from its text.
pub fn report_id(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    format!("rpt-{hex}")
}

pub fn link_report(text: &str, topology: &GridTopology) -> LinkedReport {
    ReportLinker::new(topology).link(&report_id(text), text)
}

/// Links every `*.txt` file in `dir`, using file stems as record ids. Output
/// is sorted by id.
pub fn link_report_dir(dir: &Path, topology: &GridTopology) -> Result<Vec<LinkedReport>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "txt") {
            files.push(path);
        }
    }
    files.sort();
    let linker = ReportLinker::new(topology);
    let mut out: Vec<LinkedReport> = files
        .par_iter()
        .map(|p| {
            let text = std::fs::read_to_string(p)?;
            let stem = p
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::Format(format!("unreadable file name {}", p.display())))?;
            Ok(linker.link(stem, text.trim_end()))
        })
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| a.record.id.cmp(&b.record.id));
    Ok(out)
}
