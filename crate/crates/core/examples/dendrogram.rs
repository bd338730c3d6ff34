//! Hop-layered clustering outward from an epicenter PMU, printed as a tree.

use chrono::NaiveDate;
use gridpulse::epicluster::{build_dendrogram, KPolicy};
use gridpulse::model::{timestamp_at, Attribute, PmuId, SAMPLE_RATE_HZ};
use gridpulse::spectral::{SpectrumConfig, SpectrumFrame};
use gridpulse::synthgen::{generate_topology, simulate, EventSpec, ScenarioSpec, TopologyParams};

fn main() -> gridpulse::Result<()> {
    let k = match std::env::args().nth(1).as_deref() {
        None | Some("auto") => KPolicy::Auto,
        Some(n) => KPolicy::Fixed(n.parse().expect("k must be a number or `auto`")),
    };
    let day = NaiveDate::from_ymd_opt(2017, 4, 20).unwrap();
    let topo = generate_topology(5, 14, &TopologyParams { pmu_coverage: 0.8, ..Default::default() })?;
    let epicenter = topo.pmus()[0].id;
    let mut spec = ScenarioSpec::new(5, day);
    spec.n_ticks = 10 * SAMPLE_RATE_HZ;
    spec.noise_sigma = 1e-3;
    spec.events.push(EventSpec::forced(topo.pmus()[0].bus_id, 1.1, 0.02, 0.0, 10.0));
    let sim = simulate(&topo, &spec, &[Attribute::VPm])?;
    let m = &sim.matrices[&Attribute::VPm];
    let frame = SpectrumFrame::from_columns(timestamp_at(day, 0), m.pmu_ids(), &m.columns(), &SpectrumConfig::default())?;

    let all: Vec<PmuId> = topo.pmus().iter().map(|p| p.id).collect();
    let d = build_dendrogram(&topo, &[epicenter], &all, &frame, k)?;
    println!("root {:?} at {:.2} Hz", d.root.pmus, d.frequency_hz);
    for layer in &d.layers {
        println!(
            "hop {} ({} PMUs) k={} silhouette={}",
            layer.hop,
            layer.total_pmus,
            layer.k,
            layer.silhouette.map_or("-".into(), |s| format!("{s:.3}"))
        );
        for c in &layer.clusters {
            let median = c.box_stats.as_ref().map_or(0.0, |b| b.median);
            println!(
                "  {:<6} swatch {:+.3}  median {:.4}  links self/intra/inter {}/{}/{}  {:?}",
                c.id, c.swatch, median, c.self_links, c.intra_hop_links, c.inter_hop_links, c.pmus
            );
        }
    }
    for f in d.flows.iter().filter(|f| f.weight > 0.2) {
        println!("flow {} -> {} weight {:.2}", f.from, f.to, f.weight);
    }
    Ok(())
}
