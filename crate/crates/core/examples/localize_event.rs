//! Localizes a forced oscillation: dominant frequency, flagged PMUs, ranked
//! candidates and the hotspot of the magnitude density field.

use chrono::NaiveDate;
use gridpulse::localize::{frame_kde, rank_epicenter_candidates};
use gridpulse::model::{timestamp_at, Attribute, SAMPLE_RATE_HZ};
use gridpulse::spectral::{correlation_to_reference, flag_pmus, SpectrumConfig, SpectrumFrame};
use gridpulse::synthgen::{generate_topology, simulate, EventSpec, ScenarioSpec, TopologyParams};

fn main() -> gridpulse::Result<()> {
    let day = NaiveDate::from_ymd_opt(2017, 4, 20).unwrap();
    let topo = generate_topology(21, 10, &TopologyParams { buses_per_substation: (2, 3), pmu_coverage: 1.0, ..Default::default() })?;
    let source = topo.pmus()[topo.pmus().len() / 2].bus_id;
    let mut spec = ScenarioSpec::new(21, day);
    spec.n_ticks = 20 * SAMPLE_RATE_HZ;
    spec.noise_sigma = 2.5e-3;
    spec.events.push(EventSpec::forced(source, 1.3, 0.01, 0.0, 20.0));
    let sim = simulate(&topo, &spec, &[Attribute::VPm])?;
    let m = &sim.matrices[&Attribute::VPm];
    let cols: Vec<Vec<Option<f64>>> = m.columns().iter().map(|c| c[150..450].to_vec()).collect();
    let frame = SpectrumFrame::from_columns(timestamp_at(day, 150), m.pmu_ids(), &cols, &SpectrumConfig::default())?;

    let d = frame.dominant.expect("oscillation present");
    println!("dominant {:.2} Hz, peak PMU {} ({:.4})", d.frequency_hz, d.peak_pmu, d.peak_magnitude);
    println!("ground truth source PMU(s): {:?}", sim.truth.events[0].nearest_pmus);

    let flags: Vec<_> = flag_pmus(&frame, 50.0)?.iter().map(|f| f.pmu).collect();
    println!("flagged at 50%: {flags:?}");
    let corr = correlation_to_reference(&frame, d.peak_pmu)?;
    for c in rank_epicenter_candidates(&frame).iter().take(5) {
        println!("  #{} PMU {:>4}  {:.4}  r={:+.3}", c.rank, c.pmu, c.magnitude, corr[&c.pmu]);
    }

    let kde = frame_kde(&topo, &frame, None, 64)?;
    let (i, j) = kde.argmax();
    let hot = kde.cell_center(i, j);
    let src_pos = topo.substation(topo.bus(source)?.substation_id)?.position;
    println!(
        "density hotspot at ({:.1}, {:.1}) km, source substation at ({:.1}, {:.1}) km",
        hot.x, hot.y, src_pos.x, src_pos.y
    );
    Ok(())
}
