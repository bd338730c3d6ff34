//! A 0.2 Hz background oscillation interrupted by a decaying 2.5 Hz transient,
//! tracked window by window.

use chrono::NaiveDate;
use gridpulse::model::{timestamp_at, Attribute, SAMPLE_RATE_HZ};
use gridpulse::spectral::{main_frequency_timeline, MemorySource, SpectrumConfig, WindowSpec};
use gridpulse::synthgen::{generate_topology, simulate, EventSpec, ScenarioSpec, TopologyParams};

fn main() -> gridpulse::Result<()> {
    let day = NaiveDate::from_ymd_opt(2017, 4, 20).unwrap();
    let topo = generate_topology(3, 8, &TopologyParams { pmu_coverage: 1.0, ..Default::default() })?;
    let src = topo.pmus()[0].bus_id;
    let mut spec = ScenarioSpec::new(3, day);
    spec.n_ticks = 180 * SAMPLE_RATE_HZ;
    spec.noise_sigma = 2e-4;
    spec.events.push(EventSpec::forced(src, 0.2, 0.01, 0.0, 180.0));
    spec.events.push(EventSpec::transient(src, 2.5, 0.03, 60.0, 90.0, 20.0));
    let sim = simulate(&topo, &spec, &[Attribute::VPm])?;
    let ids = sim.matrices[&Attribute::VPm].pmu_ids().to_vec();
    let source = MemorySource::new(sim.matrices);

    let window = WindowSpec::new(10, timestamp_at(day, 0), timestamp_at(day, u64::from(spec.n_ticks)), Attribute::VPm);
    for e in main_frequency_timeline(&source, &window, &ids, &SpectrumConfig::default())? {
        let bar = "#".repeat((e.peak_magnitude.unwrap_or(0.0) * 2000.0) as usize);
        println!(
            "{}  {:>4.1} Hz  peak PMU {:>4}  {bar}",
            e.t.format("%H:%M:%S"),
            e.frequency_hz.unwrap_or(f64::NAN),
            e.peak_pmu.map_or("-".into(), |p| p.to_string())
        );
    }
    Ok(())
}
