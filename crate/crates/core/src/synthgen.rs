//! Reproducible synthetic grids and 30 Hz sensor data with known oscillation
//! sources.
//!
//! Every random draw comes from a ChaCha stream keyed by the scenario seed and
//! a purpose tag, so attributes and PMUs can be generated independently (and
//! in any order) while staying bit-identical to a single full run.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use chrono::{Duration, NaiveDate};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    timestamp_at, Attribute, Bus, BusId, Edge, EdgeId, EdgeKind, EventKind, EventRecord,
    GridTopology, Pmu, PmuId, Position, Provenance, SeriesMatrix, Substation, SubstationId,
    VoltageLevel, SAMPLE_RATE_HZ, TICKS_PER_DAY, TICKS_PER_ROW_GROUP,
};

const NYQUIST_HZ: f64 = SAMPLE_RATE_HZ as f64 / 2.0;

const SUBSTATION_NAMES: &[&str] = &[
    "Yearling", "Delcino", "Flange", "Sturgeon", "Marrow", "Quillan", "Borden", "Tamsin",
    "Ravel", "Corvid", "Halloway", "Pennock", "Ostler", "Vantry", "Kestrel", "Larchmont",
    "Wicket", "Brambly", "Sallow", "Thistle", "Morrow", "Caddis", "Fennick", "Glaston",
    "Harrow", "Ibbet", "Jessop", "Kinloch", "Lurvey", "Mallory", "Nettleby", "Orrin",
    "Pilcrow", "Quarry", "Rookwood", "Selden", "Tolliver", "Umber", "Verlaine", "Wrenfield",
    "Yarrow", "Zephyrine", "Ashgrove", "Birchall", "Coldwater", "Dunmore", "Elderby", "Foxhollow",
];

fn substation_name(i: usize) -> String {
    let base = SUBSTATION_NAMES[i % SUBSTATION_NAMES.len()];
    match i / SUBSTATION_NAMES.len() {
        0 => base.to_string(),
        n => format!("{base}{}", n + 1),
    }
}

/// Mixes a seed with purpose tags into an independent RNG stream.
fn stream(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut state = seed ^ 0x9E37_79B9_7F4A_7C15;
    for &t in tags {
        state = splitmix(state ^ splitmix(t.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    ChaCha8Rng::seed_from_u64(state)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

mod tag {
    pub const TOPOLOGY: u64 = 1;
    pub const PHASE: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const DROPOUT: u64 = 4;
    pub const BASELINE: u64 = 5;
    pub const FREQUENCY: u64 = 6;
    pub const REPORTS: u64 = 7;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyParams {
    /// Inclusive range of buses per substation, within 1..=3.
    pub buses_per_substation: (u32, u32),
    /// Fraction of buses hosting a PMU, in (0, 1].
    pub pmu_coverage: f64,
    /// Extra inter-substation lines as a fraction of the spanning-tree size.
    pub chord_fraction: f64,
    /// Side length of the square the substations are scattered over, in km.
    pub area_km: f64,
}

impl Default for TopologyParams {
    fn default() -> Self {
        TopologyParams {
            buses_per_substation: (1, 3),
            pmu_coverage: 0.5,
            chord_fraction: 0.3,
            area_km: 100.0,
        }
    }
}

/// Random geometric spanning tree over substations plus short chords; each
/// substation stacks its buses down the 345/138/69 kV ladder joined by
/// transformers.
pub fn generate_topology(
    seed: u64,
    n_substations: usize,
    params: &TopologyParams,
) -> Result<GridTopology> {
    if n_substations < 2 {
        return Err(Error::Generation("at least two substations are required".into()));
    }
    let (lo, hi) = params.buses_per_substation;
    if lo < 1 || hi > 3 || lo > hi {
        return Err(Error::Generation(format!(
            "buses per substation range ({lo}, {hi}) must lie within 1..=3"
        )));
    }
    if !(params.pmu_coverage > 0.0 && params.pmu_coverage <= 1.0) {
        return Err(Error::Generation("PMU coverage must be in (0, 1]".into()));
    }
    if !(params.chord_fraction >= 0.0) || !(params.area_km > 0.0) {
        return Err(Error::Generation("chord fraction and area must be non-negative".into()));
    }

    let mut rng = stream(seed, &[tag::TOPOLOGY]);
    let positions: Vec<Position> = (0..n_substations)
        .map(|_| Position {
            x: rng.random::<f64>() * params.area_km,
            y: rng.random::<f64>() * params.area_km,
        })
        .collect();
    let dist = |a: usize, b: usize| {
        (positions[a].x - positions[b].x).hypot(positions[a].y - positions[b].y)
    };

    // Prim over the complete Euclidean graph.
    let mut links: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut in_tree = vec![false; n_substations];
    let mut best = vec![(f64::INFINITY, 0usize); n_substations];
    in_tree[0] = true;
    for v in 1..n_substations {
        best[v] = (dist(0, v), 0);
    }
    for _ in 1..n_substations {
        let (v, _) = (0..n_substations)
            .filter(|&v| !in_tree[v])
            .map(|v| (v, best[v].0))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or_else(|| Error::Generation("spanning tree construction failed".into()))?;
        in_tree[v] = true;
        let u = best[v].1;
        links.insert((u.min(v), u.max(v)));
        for w in 0..n_substations {
            if !in_tree[w] && dist(v, w) < best[w].0 {
                best[w] = (dist(v, w), v);
            }
        }
    }

    let n_chords = (params.chord_fraction * (n_substations - 1) as f64).round() as usize;
    for _ in 0..n_chords {
        let u = rng.random_range(0..n_substations);
        let candidate = (0..n_substations)
            .filter(|&v| v != u && !links.contains(&(u.min(v), u.max(v))))
            .min_by(|&a, &b| dist(u, a).total_cmp(&dist(u, b)));
        if let Some(v) = candidate {
            links.insert((u.min(v), u.max(v)));
        }
    }

    let substations: Vec<Substation> = positions
        .iter()
        .enumerate()
        .map(|(i, &position)| Substation {
            id: SubstationId(i as u32 + 1),
            name: substation_name(i),
            position,
        })
        .collect();

    let mut buses = Vec::new();
    let mut edges = Vec::new();
    // per substation: bus ids ordered by descending voltage
    let mut ladder: Vec<Vec<BusId>> = Vec::with_capacity(n_substations);
    for sub in &substations {
        let count = rng.random_range(lo..=hi) as usize;
        let mut ids = Vec::with_capacity(count);
        for &level in VoltageLevel::ALL.iter().take(count) {
            let id = BusId(buses.len() as u32 + 1);
            buses.push(Bus {
                id,
                substation_id: sub.id,
                voltage: level,
            });
            ids.push(id);
        }
        for pair in ids.windows(2) {
            edges.push(Edge {
                id: EdgeId(edges.len() as u32 + 1),
                kind: EdgeKind::Transformer,
                bus_a: pair[0],
                bus_b: pair[1],
            });
        }
        ladder.push(ids);
    }
    for &(u, v) in &links {
        let shared = ladder[u].len().min(ladder[v].len());
        let level = rng.random_range(0..shared);
        edges.push(Edge {
            id: EdgeId(edges.len() as u32 + 1),
            kind: EdgeKind::Line,
            bus_a: ladder[u][level],
            bus_b: ladder[v][level],
        });
    }

    let n_pmus = (params.pmu_coverage * buses.len() as f64).ceil() as usize;
    let mut hosts: Vec<usize> = (0..buses.len()).collect();
    hosts.shuffle(&mut rng);
    hosts.truncate(n_pmus);
    hosts.sort_unstable();
    let pmus = hosts
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let bus = &buses[b];
            let sub = &substations[(bus.substation_id.0 - 1) as usize];
            Pmu {
                id: PmuId(101 + i as u32),
                bus_id: bus.id,
                label: format!("{} {} kV", sub.name, bus.voltage.kv()),
            }
        })
        .collect();

    GridTopology::new(substations, buses, edges, pmus)
        .map_err(|e| Error::Generation(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OscillationKind {
    Forced,
    Transient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub kind: OscillationKind,
    pub source_bus: BusId,
    /// Oscillation frequency in Hz.
    pub f0: f64,
    /// Per-unit amplitude at the source bus.
    pub amplitude: f64,
    /// Seconds since midnight of the scenario date.
    pub t_start: f64,
    pub duration: f64,
    /// Envelope decay constant in seconds, transients only.
    pub decay_tau: Option<f64>,
}

impl EventSpec {
    pub fn forced(source_bus: BusId, f0: f64, amplitude: f64, t_start: f64, duration: f64) -> Self {
        EventSpec {
            kind: OscillationKind::Forced,
            source_bus,
            f0,
            amplitude,
            t_start,
            duration,
            decay_tau: None,
        }
    }

    pub fn transient(
        source_bus: BusId,
        f0: f64,
        amplitude: f64,
        t_start: f64,
        duration: f64,
        decay_tau: f64,
    ) -> Self {
        EventSpec {
            kind: OscillationKind::Transient,
            source_bus,
            f0,
            amplitude,
            t_start,
            duration,
            decay_tau: Some(decay_tau),
        }
    }

    /// Envelope g(t): 1 inside a forced window, exponential decay for a
    /// transient, 0 outside the event.
    pub fn envelope(&self, t: f64) -> f64 {
        if t < self.t_start || t >= self.t_start + self.duration {
            return 0.0;
        }
        match (self.kind, self.decay_tau) {
            (OscillationKind::Transient, Some(tau)) => (-(t - self.t_start) / tau).exp(),
            _ => 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.f0 < NYQUIST_HZ) {
            return Err(Error::Nyquist(self.f0));
        }
        if !(self.f0 > 0.0) {
            return Err(Error::arg("event frequency must be positive"));
        }
        if !(self.amplitude > 0.0) {
            return Err(Error::arg("event amplitude must be positive"));
        }
        if !(self.duration > 0.0) || !(self.t_start >= 0.0) {
            return Err(Error::arg("event duration must be positive and start non-negative"));
        }
        if self.kind == OscillationKind::Transient && !self.decay_tau.is_some_and(|t| t > 0.0) {
            return Err(Error::arg("transient events need a positive decay constant"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutSpec {
    /// Chance that a PMU drops out somewhere inside a given 15-minute block.
    pub probability: f64,
    /// Inclusive range of null-run lengths, in ticks.
    pub run_length: (u32, u32),
}

impl Default for DropoutSpec {
    fn default() -> Self {
        DropoutSpec {
            probability: 0.0,
            run_length: (30, 300),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Damping {
    /// Amplitude factor per hop away from the source.
    pub per_hop: f64,
    /// Extra factor per transformer crossed on the path.
    pub transformer: f64,
}

impl Default for Damping {
    fn default() -> Self {
        Damping {
            per_hop: 0.6,
            transformer: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub date: NaiveDate,
    /// First simulated tick of the day.
    pub start_tick: u32,
    /// Number of ticks to simulate.
    pub n_ticks: u32,
    pub events: Vec<EventSpec>,
    pub noise_sigma: f64,
    pub dropout: DropoutSpec,
    pub damping: Damping,
}

impl ScenarioSpec {
    /// One quiet hour starting at midnight.
    pub fn new(seed: u64, date: NaiveDate) -> Self {
        ScenarioSpec {
            seed,
            date,
            start_tick: 0,
            n_ticks: 3600 * SAMPLE_RATE_HZ,
            events: Vec::new(),
            noise_sigma: 0.0,
            dropout: DropoutSpec::default(),
            damping: Damping::default(),
        }
    }

    pub fn end_tick(&self) -> u32 {
        self.start_tick + self.n_ticks
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropoutRun {
    pub pmu: PmuId,
    pub start_tick: u32,
    pub end_tick: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTruth {
    pub event_id: String,
    pub kind: OscillationKind,
    pub source_bus: BusId,
    /// PMUs with the largest expected amplitude (at or nearest the source).
    pub nearest_pmus: Vec<PmuId>,
    pub f0: f64,
    pub expected_amplitude: BTreeMap<PmuId, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub events: Vec<EventTruth>,
    pub dropouts: Vec<DropoutRun>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub matrices: BTreeMap<Attribute, SeriesMatrix>,
    pub truth: GroundTruth,
    pub events: Vec<EventRecord>,
}

/// Expected per-PMU oscillation amplitude for an event source under the
/// damping model `A · per_hop^hops · transformer^crossings`.
pub fn expected_amplitudes(
    topology: &GridTopology,
    event: &EventSpec,
    damping: &Damping,
) -> Result<BTreeMap<PmuId, f64>> {
    let reach = topology.hops_and_crossings_from(event.source_bus)?;
    Ok(topology
        .pmus()
        .iter()
        .map(|p| {
            let amp = reach.get(&p.bus_id).map_or(0.0, |&(d, x)| {
                event.amplitude * damping.per_hop.powi(d as i32) * damping.transformer.powi(x as i32)
            });
            (p.id, amp)
        })
        .collect())
}

fn validate_scenario(topology: &GridTopology, spec: &ScenarioSpec) -> Result<()> {
    if spec.end_tick() > TICKS_PER_DAY {
        return Err(Error::arg("scenario extends past the end of the day"));
    }
    for ev in &spec.events {
        ev.validate()?;
        topology.bus(ev.source_bus)?;
    }
    let (lo, hi) = spec.dropout.run_length;
    if !(0.0..=1.0).contains(&spec.dropout.probability) || lo == 0 || lo > hi {
        return Err(Error::arg("invalid dropout specification"));
    }
    if !(spec.noise_sigma >= 0.0) {
        return Err(Error::arg("noise sigma must be non-negative"));
    }
    Ok(())
}

/// Ground truth and event records without generating any samples.
pub fn ground_truth(topology: &GridTopology, spec: &ScenarioSpec) -> Result<(GroundTruth, Vec<EventRecord>)> {
    validate_scenario(topology, spec)?;
    let mut truths = Vec::with_capacity(spec.events.len());
    let mut records = Vec::with_capacity(spec.events.len());
    for (i, ev) in spec.events.iter().enumerate() {
        let expected = expected_amplitudes(topology, ev, &spec.damping)?;
        let peak = expected.values().copied().fold(0.0, f64::max);
        let nearest: Vec<PmuId> = expected
            .iter()
            .filter(|&(_, &a)| peak > 0.0 && a == peak)
            .map(|(&p, _)| p)
            .collect();
        let id = format!("evt-{}-{}", spec.seed, i + 1);
        let midnight = spec.date.and_time(chrono::NaiveTime::MIN);
        let start = midnight + Duration::milliseconds((ev.t_start * 1000.0).round() as i64);
        let end = start + Duration::milliseconds((ev.duration * 1000.0).round() as i64);
        records.push(EventRecord {
            id: id.clone(),
            t_start: Some(start),
            t_end: Some(end),
            oscillation_hz: Some(ev.f0),
            epicenter_pmus: nearest.clone(),
            kind: match ev.kind {
                OscillationKind::Forced => EventKind::Forced,
                OscillationKind::Transient => EventKind::Transient,
            },
            provenance: Provenance::SyntheticGroundTruth,
        });
        truths.push(EventTruth {
            event_id: id,
            kind: ev.kind,
            source_bus: ev.source_bus,
            nearest_pmus: nearest,
            f0: ev.f0,
            expected_amplitude: expected,
        });
    }
    let dropouts = topology
        .pmus()
        .iter()
        .flat_map(|p| dropout_runs(spec, p.id))
        .collect();
    Ok((GroundTruth { events: truths, dropouts }, records))
}

fn dropout_runs(spec: &ScenarioSpec, pmu: PmuId) -> Vec<DropoutRun> {
    if spec.dropout.probability <= 0.0 || spec.n_ticks == 0 {
        return Vec::new();
    }
    let (lo, hi) = spec.dropout.run_length;
    let first_block = spec.start_tick / TICKS_PER_ROW_GROUP;
    let last_block = (spec.end_tick() - 1) / TICKS_PER_ROW_GROUP;
    let mut runs = Vec::new();
    for block in first_block..=last_block {
        // keyed by absolute block so a run does not depend on the simulated span
        let mut rng = stream(spec.seed, &[tag::DROPOUT, u64::from(pmu.0), u64::from(block)]);
        if rng.random::<f64>() >= spec.dropout.probability {
            continue;
        }
        let len = rng.random_range(lo..=hi);
        let offset = rng.random_range(0..TICKS_PER_ROW_GROUP);
        let start = block * TICKS_PER_ROW_GROUP + offset;
        let end = (start + len).min((block + 1) * TICKS_PER_ROW_GROUP);
        let start = start.max(spec.start_tick);
        let end = end.min(spec.end_tick());
        if start < end {
            runs.push(DropoutRun {
                pmu,
                start_tick: start,
                end_tick: end,
            });
        }
    }
    runs
}

struct Component {
    amplitude: f64,
    phase: f64,
    event: usize,
}

/// Simulates one attribute for every PMU in the topology (columns sorted by PMU id).
pub fn simulate_attribute(
    topology: &GridTopology,
    spec: &ScenarioSpec,
    attribute: Attribute,
) -> Result<SeriesMatrix> {
    validate_scenario(topology, spec)?;
    let mut pmus: Vec<&Pmu> = topology.pmus().iter().collect();
    pmus.sort_by_key(|p| p.id);
    let amplitudes: Vec<BTreeMap<PmuId, f64>> = spec
        .events
        .iter()
        .map(|ev| expected_amplitudes(topology, ev, &spec.damping))
        .collect::<Result<_>>()?;

    let n = spec.n_ticks as usize;
    let attr_tag = attribute.index() as u64;
    let shared_frequency = if matches!(attribute, Attribute::F | Attribute::DF) {
        Some(frequency_drift(spec))
    } else {
        None
    };

    let columns: Vec<Vec<Option<f64>>> = pmus
        .iter()
        .map(|pmu| {
            let components: Vec<Component> = spec
                .events
                .iter()
                .enumerate()
                .filter(|(_, ev)| {
                    attribute.is_voltage_magnitude()
                        || (attribute.is_current_magnitude() && ev.kind == OscillationKind::Transient)
                })
                .map(|(e, _)| {
                    let mut rng = stream(spec.seed, &[tag::PHASE, e as u64, u64::from(pmu.id.0)]);
                    Component {
                        amplitude: amplitudes[e][&pmu.id],
                        phase: rng.random::<f64>() * 2.0 * PI,
                        event: e,
                    }
                })
                .filter(|c| c.amplitude > 0.0)
                .collect();

            let mut base_rng = stream(spec.seed, &[tag::BASELINE, attr_tag, u64::from(pmu.id.0)]);
            let baseline = if attribute.is_voltage_magnitude() {
                1.0
            } else if attribute.is_current_magnitude() {
                0.3 + 0.4 * base_rng.random::<f64>()
            } else if attribute.is_angle() {
                base_rng.random_range(-30.0..30.0)
            } else {
                0.0
            };

            let mut noise_rng = stream(spec.seed, &[tag::NOISE, attr_tag, u64::from(pmu.id.0)]);
            let sigma = match attribute {
                Attribute::F | Attribute::DF => 0.0002,
                _ => spec.noise_sigma,
            };
            let noise = Normal::new(0.0, sigma).ok();

            let mut column = Vec::with_capacity(n);
            for i in 0..n {
                let tick = spec.start_tick + i as u32;
                let t = f64::from(tick) / f64::from(SAMPLE_RATE_HZ);
                let mut value = baseline;
                for c in &components {
                    let ev = &spec.events[c.event];
                    let g = ev.envelope(t);
                    if g > 0.0 {
                        value += c.amplitude * g * (2.0 * PI * ev.f0 * (t - ev.t_start) + c.phase).sin();
                    }
                }
                let eps = match noise {
                    Some(d) if sigma > 0.0 => d.sample(&mut noise_rng),
                    _ => 0.0,
                };
                value = match (attribute, &shared_frequency) {
                    (Attribute::F, Some(f)) => 60.0 + f[i + 1] + eps,
                    (Attribute::DF, Some(f)) => (f[i + 1] - f[i]) * f64::from(SAMPLE_RATE_HZ) + eps,
                    _ => value + eps,
                };
                column.push(Some(value));
            }
            for run in dropout_runs(spec, pmu.id) {
                for tick in run.start_tick..run.end_tick {
                    column[(tick - spec.start_tick) as usize] = None;
                }
            }
            column
        })
        .collect();

    SeriesMatrix::from_columns(
        attribute,
        spec.date,
        spec.start_tick,
        pmus.iter().map(|p| p.id).collect(),
        &columns,
    )
}

/// Shared slow frequency deviation, one sample before the span plus the span.
fn frequency_drift(spec: &ScenarioSpec) -> Vec<f64> {
    let mut rng = stream(spec.seed, &[tag::FREQUENCY]);
    let step = Normal::new(0.0, 0.0005).expect("valid sigma");
    let mut x = 0.0;
    let mut out = Vec::with_capacity(spec.n_ticks as usize + 1);
    for _ in 0..=spec.n_ticks {
        x = 0.999 * x + step.sample(&mut rng);
        out.push(x);
    }
    out
}

/// Simulates the requested attributes plus ground truth.
pub fn simulate(
    topology: &GridTopology,
    spec: &ScenarioSpec,
    attributes: &[Attribute],
) -> Result<Simulation> {
    let (truth, events) = ground_truth(topology, spec)?;
    let matrices = attributes
        .iter()
        .map(|&a| simulate_attribute(topology, spec, a).map(|m| (a, m)))
        .collect::<Result<_>>()?;
    Ok(Simulation {
        matrices,
        truth,
        events,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStyle {
    /// Names the epicenter PMU ids explicitly.
    PmuIds,
    /// Names only the substation; links expand to all its PMUs.
    Substation,
    /// Names both; PMU ids take precedence.
    Both,
    /// No linkable reference.
    Unlinked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticReport {
    pub id: String,
    pub text: String,
    pub style: ReportStyle,
    pub expected_pmus: Vec<PmuId>,
    pub expected_hz: Option<f64>,
}

fn format_us_time(ts: chrono::NaiveDateTime) -> String {
    use chrono::Datelike;
    format!(
        "{}, {}/{}/{}",
        ts.format("%H:%M:%S"),
        ts.month(),
        ts.day(),
        ts.year()
    )
}

/// Operator-style report text for a simulated event.
pub fn report_for_event(
    topology: &GridTopology,
    record: &EventRecord,
    style: ReportStyle,
) -> Result<SyntheticReport> {
    let first = *record
        .epicenter_pmus
        .first()
        .ok_or_else(|| Error::arg("event has no epicenter PMU"))?;
    let sub_id = topology.bus(topology.pmu(first)?.bus_id)?.substation_id;
    let sub = topology.substation(sub_id)?;
    let when = record.t_start.map(format_us_time).unwrap_or_else(|| "time unknown".into());
    let hz = record.oscillation_hz.unwrap_or(0.0);
    let kind = match record.kind {
        EventKind::Transient => "Transient voltage disturbance",
        _ => "System Voltage Oscillation",
    };
    let pmu_list = record
        .epicenter_pmus
        .iter()
        .map(|p| format!("PMU #{p}"))
        .collect::<Vec<_>>()
        .join(" and ");
    let (text, expected) = match style {
        ReportStyle::PmuIds => (
            format!(
                "{kind} reported, {when}. Largest swing recorded by {pmu_list}; observed frequency {hz:.2}Hz. Dispatch notified."
            ),
            record.epicenter_pmus.clone(),
        ),
        ReportStyle::Substation => (
            format!(
                "{kind} at {} Substation, {when}. Oscillation near {hz:.2} Hz persisted; crews sent to inspect generator controls.",
                sub.name
            ),
            topology.pmus_at_substation(sub_id),
        ),
        ReportStyle::Both => (
            format!(
                "{kind} at {} Substation, {when}. Epicenter flagged at {pmu_list}, frequency {hz:.2}Hz.",
                sub.name
            ),
            record.epicenter_pmus.clone(),
        ),
        ReportStyle::Unlinked => (
            format!("Routine maintenance note, {when}. No abnormal readings; 345 kV breaker test completed."),
            Vec::new(),
        ),
    };
    let expected_hz = match style {
        ReportStyle::Unlinked => None,
        _ => Some((hz * 100.0).round() / 100.0),
    };
    let mut expected = expected;
    expected.sort();
    Ok(SyntheticReport {
        id: record.id.clone(),
        text,
        style,
        expected_pmus: expected,
        expected_hz,
    })
}

/// A labelled corpus of `n` reports over random epicenters and times.
pub fn report_corpus(topology: &GridTopology, n: usize, seed: u64) -> Result<Vec<SyntheticReport>> {
    let mut rng = stream(seed, &[tag::REPORTS]);
    let day0 = NaiveDate::from_ymd_opt(2017, 1, 1).expect("valid date");
    let styles = [
        ReportStyle::PmuIds,
        ReportStyle::Substation,
        ReportStyle::Both,
        ReportStyle::Unlinked,
    ];
    (0..n)
        .map(|i| {
            let day = day0 + Duration::days(rng.random_range(0..365));
            let tick = rng.random_range(0..TICKS_PER_DAY / 30) * 30;
            let n_epi = if rng.random::<f64>() < 0.2 { 2 } else { 1 };
            let mut epicenters: Vec<PmuId> = topology
                .pmus()
                .choose_multiple(&mut rng, n_epi)
                .map(|p| p.id)
                .collect();
            epicenters.sort();
            // keep multi-PMU reports on one substation so substation text stays truthful
            let sub_of = |p: PmuId| -> Result<SubstationId> {
                Ok(topology.bus(topology.pmu(p)?.bus_id)?.substation_id)
            };
            let home = sub_of(epicenters[0])?;
            let mut same_sub = Vec::with_capacity(epicenters.len());
            for p in epicenters {
                if sub_of(p)? == home {
                    same_sub.push(p);
                }
            }
            let epicenters = same_sub;
            let hz = (rng.random_range(10..140) as f64) / 10.0;
            let record = EventRecord {
                id: format!("rpt-{seed}-{i:03}"),
                t_start: Some(timestamp_at(day, u64::from(tick))),
                t_end: Some(timestamp_at(day, u64::from(tick))),
                oscillation_hz: Some(hz),
                epicenter_pmus: epicenters,
                kind: if rng.random::<f64>() < 0.3 {
                    EventKind::Transient
                } else {
                    EventKind::Forced
                },
                provenance: Provenance::SyntheticGroundTruth,
            };
            let style = styles[rng.random_range(0..styles.len())];
            report_for_event(topology, &record, style)
        })
        .collect()
}
