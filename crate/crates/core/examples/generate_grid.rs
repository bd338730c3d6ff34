//! Builds a synthetic grid, injects a forced oscillation and prints the
//! expected amplitude at every PMU.
//!
//! ```bash
//! cargo run -p gridpulse --example generate_grid -- 12
//! ```

use chrono::NaiveDate;
use gridpulse::model::{Attribute, SAMPLE_RATE_HZ};
use gridpulse::synthgen::{generate_topology, simulate, EventSpec, ScenarioSpec, TopologyParams};

fn main() -> gridpulse::Result<()> {
    let substations: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let topo = generate_topology(7, substations, &TopologyParams::default())?;
    println!(
        "{} substations, {} buses, {} edges, {} PMUs",
        topo.substations().len(),
        topo.buses().len(),
        topo.edges().len(),
        topo.pmus().len()
    );

    let source = topo.pmus()[0].bus_id;
    let mut spec = ScenarioSpec::new(7, NaiveDate::from_ymd_opt(2017, 4, 20).unwrap());
    spec.n_ticks = 60 * SAMPLE_RATE_HZ;
    spec.noise_sigma = 5e-4;
    spec.events.push(EventSpec::forced(source, 0.8, 0.02, 10.0, 40.0));
    let sim = simulate(&topo, &spec, &[Attribute::VPm])?;

    let truth = &sim.truth.events[0];
    println!("event {} at bus {} ({} Hz), nearest PMUs {:?}", truth.event_id, truth.source_bus, truth.f0, truth.nearest_pmus);
    let mut amps: Vec<_> = truth.expected_amplitude.iter().collect();
    amps.sort_by(|a, b| b.1.total_cmp(a.1));
    for (pmu, a) in amps {
        let hop = topo.hop_distance(source, topo.pmu(*pmu)?.bus_id)?;
        println!("  PMU {pmu:>4}  hop {:>2}  expected {a:.5}", hop.map_or("-".into(), |h| h.to_string()));
    }
    println!("simulated {} x {} samples", sim.matrices[&Attribute::VPm].rows(), sim.matrices[&Attribute::VPm].cols());
    Ok(())
}
