//! On-disk dataset layout and the synthetic dataset generator.
//!
//! ```text
//! DIR/topology.json
//! DIR/ground_truth.json      per-day ground truth
//! DIR/events.json            event records
//! DIR/reports/*.txt          operator report texts
//! DIR/days/YYYY-MM-DD/ATTR.pmuc
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use gridpulse::model::{Attribute, EventRecord, GridTopology, SAMPLE_RATE_HZ, TICKS_PER_DAY};
use gridpulse::reports::{link_report_dir, LinkedReport};
use gridpulse::store::{Store, WriteOptions};
use gridpulse::synthgen::{
    generate_topology, ground_truth, report_for_event, simulate_attribute, EventSpec, GroundTruth, ReportStyle,
    ScenarioSpec, TopologyParams,
};
use gridpulse::{Error, Result};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const TOPOLOGY_FILE: &str = "topology.json";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const EVENTS_FILE: &str = "events.json";
pub const REPORTS_DIR: &str = "reports";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateOptions {
    pub seed: u64,
    pub substations: usize,
    pub days: u32,
    pub start_date: NaiveDate,
    /// Hour of day the simulated span starts.
    pub start_hour: u32,
    /// Simulated span per day, in minutes; the rest of the day is stored as nulls.
    pub minutes: u32,
    pub noise_sigma: f64,
    pub attributes: Vec<Attribute>,
    pub dense: bool,
    pub topology: TopologyParams,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions {
            seed: 1,
            substations: 10,
            days: 1,
            start_date: NaiveDate::from_ymd_opt(2017, 4, 20).expect("valid date"),
            start_hour: 20,
            minutes: 60,
            noise_sigma: 5e-4,
            attributes: Attribute::ALL.to_vec(),
            dense: false,
            topology: TopologyParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayTruth {
    pub date: NaiveDate,
    pub truth: GroundTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub substations: usize,
    pub buses: usize,
    pub edges: usize,
    pub pmus: usize,
    pub days: Vec<NaiveDate>,
    pub files_written: usize,
    pub events: usize,
    pub reports: usize,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(value)?)?;
    Ok(())
}

/// One forced oscillation per day, placed at a random PMU bus inside the span.
fn day_scenario(topology: &GridTopology, opts: &GenerateOptions, day: u32) -> Result<ScenarioSpec> {
    let date = opts.start_date + Duration::days(i64::from(day));
    let seed = opts.seed.wrapping_mul(1_000_003).wrapping_add(u64::from(day));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start_tick = opts.start_hour * 3600 * SAMPLE_RATE_HZ;
    let n_ticks = opts.minutes * 60 * SAMPLE_RATE_HZ;
    if opts.minutes == 0 || start_tick + n_ticks > TICKS_PER_DAY {
        return Err(Error::InvalidArgument("simulated span must be non-empty and inside the day".into()));
    }
    let span = f64::from(opts.minutes * 60);
    let source = topology
        .pmus()
        .choose(&mut rng)
        .ok_or_else(|| Error::Generation("topology has no PMUs".into()))?
        .bus_id;
    let f0 = (rng.random_range(5..=30) as f64) / 10.0;
    let duration = (span * 0.5).min(600.0);
    let offset = rng.random_range(0.0..(span - duration)).floor();
    let mut spec = ScenarioSpec::new(seed, date);
    spec.start_tick = start_tick;
    spec.n_ticks = n_ticks;
    spec.noise_sigma = opts.noise_sigma;
    spec.events.push(EventSpec::forced(
        source,
        f0,
        0.02,
        f64::from(opts.start_hour * 3600) + offset,
        duration,
    ));
    Ok(spec)
}

/// Generates a complete synthetic dataset under `out`.
pub fn generate_dataset(out: &Path, opts: &GenerateOptions) -> Result<GenerateSummary> {
    if opts.days == 0 {
        return Err(Error::InvalidArgument("at least one day is required".into()));
    }
    let topology = generate_topology(opts.seed, opts.substations, &opts.topology)?;
    fs::create_dir_all(out.join(REPORTS_DIR))?;
    write_json(&out.join(TOPOLOGY_FILE), &topology)?;

    let store = Store::new(out);
    let write = WriteOptions {
        dense: opts.dense,
        ..Default::default()
    };
    let mut truths = Vec::new();
    let mut events = Vec::new();
    let mut days = Vec::new();
    let mut files = 0;
    for day in 0..opts.days {
        let spec = day_scenario(&topology, opts, day)?;
        let (truth, records) = ground_truth(&topology, &spec)?;
        for &attr in &opts.attributes {
            let m = simulate_attribute(&topology, &spec, attr)?;
            store.write_day(&m, write)?;
            files += 1;
        }
        days.push(spec.date);
        truths.push(DayTruth { date: spec.date, truth });
        events.extend(records);
    }
    write_json(&out.join(GROUND_TRUTH_FILE), &truths)?;
    write_json(&out.join(EVENTS_FILE), &events)?;

    let styles = [ReportStyle::PmuIds, ReportStyle::Both, ReportStyle::Substation];
    let mut reports = 0;
    for (i, rec) in events.iter().enumerate() {
        let r = report_for_event(&topology, rec, styles[i % styles.len()])?;
        fs::write(out.join(REPORTS_DIR).join(format!("{}.txt", rec.id)), &r.text)?;
        reports += 1;
    }
    if let Some(first) = events.first() {
        let note = report_for_event(&topology, first, ReportStyle::Unlinked)?;
        fs::write(out.join(REPORTS_DIR).join("maintenance-note.txt"), &note.text)?;
        reports += 1;
    }

    Ok(GenerateSummary {
        substations: topology.substations().len(),
        buses: topology.buses().len(),
        edges: topology.edges().len(),
        pmus: topology.pmus().len(),
        days,
        files_written: files,
        events: events.len(),
        reports,
    })
}

/// A loaded data directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub topology: GridTopology,
    pub store: Store,
    pub events: Vec<EventRecord>,
    pub reports: Vec<LinkedReport>,
}

impl Dataset {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let topo_path = root.join(TOPOLOGY_FILE);
        if !topo_path.exists() {
            return Err(Error::Format(format!("{} not found", topo_path.display())));
        }
        let topology: GridTopology = serde_json::from_slice(&fs::read(&topo_path)?)?;
        let events_path = root.join(EVENTS_FILE);
        let events: Vec<EventRecord> = if events_path.exists() {
            serde_json::from_slice(&fs::read(&events_path)?)?
        } else {
            Vec::new()
        };
        let reports_dir = root.join(REPORTS_DIR);
        let reports = if reports_dir.is_dir() {
            link_report_dir(&reports_dir, &topology)?
        } else {
            Vec::new()
        };
        Ok(Dataset {
            store: Store::new(&root),
            root,
            topology,
            events,
            reports,
        })
    }

    /// Stored events first, then records linked from report texts.
    pub fn find_event(&self, id: &str) -> Option<&EventRecord> {
        self.events
            .iter()
            .chain(self.reports.iter().map(|r| &r.record))
            .find(|e| e.id == id)
    }
}
