//! Generates a small dataset in a temp directory and answers the analysis
//! queries directly through the engine, without HTTP.

use gridpulse::epicluster::KPolicy;
use gridpulse_service::api::{AnalyzeRequest, DendrogramRequest, EmbeddingRequest};
use gridpulse_service::config::ServiceConfig;
use gridpulse_service::dataset::{generate_dataset, Dataset, GenerateOptions};
use gridpulse_service::Engine;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let opts = GenerateOptions { seed: 3, substations: 12, days: 1, minutes: 10, dense: true, ..Default::default() };
    generate_dataset(dir.path(), &opts)?;
    let engine = Engine::new(Dataset::open(dir.path())?, ServiceConfig::default());

    let event = engine.dataset().events[0].clone();
    println!("event {} at {:?}, truth {:?}", event.id, event.t_start, event.epicenter_pmus);

    let analysis = engine.analyze(AnalyzeRequest { event_id: Some(event.id.clone()), ..Default::default() })?;
    let focus = analysis.focus.as_ref().expect("event window has data");
    println!(
        "{} frames, focus {:?} Hz, peak PMU {:?}",
        analysis.frames.len(),
        focus.frequency_hz,
        focus.peak_pmu
    );
    for f in analysis.frames.iter().filter(|f| !f.flags.is_empty()).take(3) {
        let flagged: Vec<_> = f.flags.iter().map(|x| x.pmu.0).collect();
        println!("  {} flagged {flagged:?}", f.start);
    }

    let epicenter = focus.peak_pmu.unwrap();
    let tree = engine.dendrogram(DendrogramRequest {
        epicenter_ids: vec![epicenter],
        at: Some(focus.start),
        k: Some(KPolicy::Auto),
        ..Default::default()
    })?;
    for l in &tree.model.layers {
        println!("  hop {} -> {} clusters over {} PMUs", l.hop, l.clusters.len(), l.total_pmus);
    }

    let layout = engine.embedding(EmbeddingRequest {
        at: Some(focus.start),
        epicenter_id: Some(epicenter),
        collision_radius: Some(1.0),
        ..Default::default()
    })?;
    println!(
        "embedding: {} points, perplexity {}, KL {:.4}, {} rings",
        layout.points.len(),
        layout.params.perplexity,
        layout.kl_divergence,
        layout.rings.len()
    );

    let req = AnalyzeRequest { event_id: Some(event.id), ..Default::default() };
    let first = engine.analyze_body(req.clone())?;
    let second = engine.analyze_body(req)?;
    println!("serialized body {} bytes, repeat identical: {}", first.len(), first == second);
    let s = engine.cache_stats();
    println!("cache: {} hits, {} misses, {} entries", s.hits, s.misses, s.entries);
    Ok(())
}
