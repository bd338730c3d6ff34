//! 2-D similarity layout of PMU spectra with hop rings and collision
//! resolution, drawn as a coarse character plot.

use chrono::NaiveDate;
use gridpulse::embed::{distance_matrix, hop_rings, resolve_collisions, tsne_embed, TsneConfig};
use gridpulse::model::{timestamp_at, Attribute, PmuId, SAMPLE_RATE_HZ};
use gridpulse::spectral::{SpectrumConfig, SpectrumFrame};
use gridpulse::synthgen::{generate_topology, simulate, EventSpec, ScenarioSpec, TopologyParams};

fn main() -> gridpulse::Result<()> {
    let day = NaiveDate::from_ymd_opt(2017, 4, 20).unwrap();
    let topo = generate_topology(9, 14, &TopologyParams { pmu_coverage: 0.9, ..Default::default() })?;
    let epicenter = topo.pmus()[0].id;
    let mut spec = ScenarioSpec::new(9, day);
    spec.n_ticks = 10 * SAMPLE_RATE_HZ;
    spec.noise_sigma = 1e-3;
    spec.events.push(EventSpec::forced(topo.pmus()[0].bus_id, 0.7, 0.02, 0.0, 10.0));
    let sim = simulate(&topo, &spec, &[Attribute::VPm])?;
    let m = &sim.matrices[&Attribute::VPm];
    let frame = SpectrumFrame::from_columns(timestamp_at(day, 0), m.pmu_ids(), &m.columns(), &SpectrumConfig::default())?;

    let ids: Vec<PmuId> = frame.valid_spectra().map(|s| s.pmu).collect();
    let vectors: Vec<Vec<f64>> = frame.valid_spectra().map(|s| s.magnitudes.clone()).collect();
    let emb = tsne_embed(&distance_matrix(&vectors)?, &TsneConfig { perplexity: 5.0, ..Default::default() })?;
    println!("{} PMUs, final KL {:.4}", ids.len(), emb.kl_history.last().unwrap());

    let resolved = resolve_collisions(&ids, &emb.points, 1.0, 50);
    println!("collision pass: {} sweeps, {} overlaps left", resolved.iterations, resolved.overlaps);
    for r in hop_rings(&topo, epicenter, &ids, &resolved.points)? {
        println!("hop {} ring radius {:.2} ({} PMUs)", r.hop, r.radius, r.count);
    }

    let (w, h) = (60usize, 20usize);
    let (mut lo, mut hi) = ([f64::MAX; 2], [f64::MIN; 2]);
    for p in &resolved.points {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let mut grid = vec![vec![' '; w]; h];
    for (id, p) in ids.iter().zip(&resolved.points) {
        let x = ((p[0] - lo[0]) / (hi[0] - lo[0]).max(1e-9) * (w - 1) as f64) as usize;
        let y = ((p[1] - lo[1]) / (hi[1] - lo[1]).max(1e-9) * (h - 1) as f64) as usize;
        let hop = topo.hop_distance(topo.pmu(epicenter)?.bus_id, topo.pmu(*id)?.bus_id)?.unwrap_or(9);
        grid[y][x] = if *id == epicenter { '*' } else { char::from_digit(hop.min(9), 10).unwrap() };
    }
    for row in grid {
        println!("|{}|", row.into_iter().collect::<String>());
    }
    Ok(())
}
