//! Links free-text operator reports to PMUs and substations.

use gridpulse::reports::link_report;
use gridpulse::synthgen::{generate_topology, report_corpus, TopologyParams};

fn main() -> gridpulse::Result<()> {
    let topo = generate_topology(4, 10, &TopologyParams::default())?;
    let sub = &topo.substations()[2];
    let pmu = topo.pmus()[1].id;
    let handwritten = [
        format!("System Voltage Oscillation at {} Substation, 20:44:00, 4/20/2017. Around 0.8 Hz.", sub.name),
        format!("2017-05-02 13:10:00 fault cleared near pmu#{pmu}; transient ringing observed."),
        "Oscillation seen by PMU 99999 at 1.2Hz".to_string(),
        "Shift handover, nothing to report.".to_string(),
    ];
    for text in &handwritten {
        let r = link_report(text, &topo);
        println!("{text}");
        println!(
            "  -> {:?} pmus={:?} subs={:?} hz={:?} t={:?} warnings={:?}",
            r.record.kind, r.record.epicenter_pmus, r.matched_substations, r.record.oscillation_hz, r.record.t_start, r.warnings
        );
    }

    let corpus = report_corpus(&topo, 40, 1)?;
    let exact = corpus
        .iter()
        .filter(|r| link_report(&r.text, &topo).record.epicenter_pmus == r.expected_pmus)
        .count();
    println!("synthetic corpus: {exact}/{} reports linked to the expected PMUs", corpus.len());
    Ok(())
}
