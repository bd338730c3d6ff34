//! `gridpulse` command line.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{NaiveDate, NaiveDateTime};
use clap::{Args, Parser, Subcommand};
use gridpulse::epicluster::KPolicy;
use gridpulse::model::{Attribute, GridTopology, PmuId};
use gridpulse::reports::link_report_dir;
use gridpulse::spectral::flag_pmus;
use gridpulse::store::{DayFile, WriteOptions};
use serde::Serialize;
use serde_json::json;

use crate::api::{AnalyzeRequest, DendrogramRequest, EmbeddingRequest};
use crate::config::{ServiceConfig, DATA_ENV};
use crate::dataset::{generate_dataset, Dataset, GenerateOptions, TOPOLOGY_FILE};
use crate::engine::Engine;
use crate::ingest::ingest_csv;

#[derive(Debug, Parser)]
#[command(name = "gridpulse", version, about = "PMU oscillation analysis toolkit")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct DataArg {
    /// Data directory (falls back to the config file, then GRIDPULSE_DATA).
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset: topology, day files, ground truth, events and reports.
    Generate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        substations: usize,
        #[arg(long, default_value_t = 1)]
        days: u32,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "2017-04-20")]
        start_date: NaiveDate,
        #[arg(long, default_value_t = 20)]
        start_hour: u32,
        /// Simulated minutes per day; the rest of each day is stored as nulls.
        #[arg(long, default_value_t = 60)]
        minutes: u32,
        #[arg(long, default_value_t = 5e-4)]
        noise: f64,
        /// Comma-separated attribute codes (default: all 18).
        #[arg(long, value_delimiter = ',')]
        attrs: Vec<Attribute>,
        /// Only write row groups that hold data.
        #[arg(long)]
        dense: bool,
    },
    /// Import a wide CSV (tick or timestamp column, one column per PMU).
    Ingest {
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        attr: Attribute,
        /// Day of a tick-indexed file.
        #[arg(long)]
        date: Option<NaiveDate>,
        #[arg(long)]
        dense: bool,
        csv: PathBuf,
    },
    /// Describe stored days, or one day file in detail.
    Inspect {
        #[command(flatten)]
        data: DataArg,
        /// Per-file sizes, compression and row-group statistics.
        #[arg(long)]
        stats: bool,
        #[arg(long)]
        date: Option<NaiveDate>,
        #[arg(long)]
        attr: Option<Attribute>,
        /// Inspect a single day file instead of a data directory.
        #[arg(long, conflicts_with_all = ["date", "attr"])]
        file: Option<PathBuf>,
    },
    /// Stream spectrum frames with flags as JSON lines.
    Analyze {
        #[command(flatten)]
        data: DataArg,
        #[arg(long, conflicts_with_all = ["from", "to"])]
        event: Option<String>,
        #[arg(long, requires = "to")]
        from: Option<NaiveDateTime>,
        #[arg(long, requires = "from")]
        to: Option<NaiveDateTime>,
        #[arg(long)]
        window: Option<u32>,
        #[arg(long)]
        stride: Option<u32>,
        #[arg(long)]
        attr: Option<Attribute>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        pmus: Vec<u32>,
    },
    /// Build the epicentric dendrogram for one window.
    Dendrogram {
        #[command(flatten)]
        data: DataArg,
        #[arg(long, value_delimiter = ',', required = true)]
        epicenter: Vec<u32>,
        #[arg(long, value_delimiter = ',')]
        select: Vec<u32>,
        #[arg(long)]
        at: NaiveDateTime,
        #[arg(long)]
        window: Option<u32>,
        #[arg(long)]
        attr: Option<Attribute>,
        /// Clusters per hop layer, or `auto`.
        #[arg(long, value_parser = parse_k)]
        k: Option<KPolicy>,
    },
    /// Embed PMU spectra in 2-D with hop rings.
    Embed {
        #[command(flatten)]
        data: DataArg,
        #[arg(long, value_delimiter = ',')]
        select: Vec<u32>,
        #[arg(long)]
        at: NaiveDateTime,
        #[arg(long)]
        window: Option<u32>,
        #[arg(long)]
        attr: Option<Attribute>,
        #[arg(long)]
        perplexity: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epicenter: Option<u32>,
        #[arg(long)]
        collision_radius: Option<f64>,
    },
    /// Parse report texts in DIR into event records.
    LinkReports {
        dir: PathBuf,
        /// Topology JSON; defaults to DIR/topology.json, then DIR/../topology.json.
        #[arg(long)]
        topology: Option<PathBuf>,
    },
    /// Run the HTTP/JSON service.
    Serve {
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        host: Option<String>,
        #[arg(long)]
        cache_entries: Option<usize>,
    },
}

fn parse_k(s: &str) -> Result<KPolicy, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(KPolicy::Auto);
    }
    match s.parse::<usize>() {
        Ok(0) | Err(_) => Err(format!("expected `auto` or a positive integer, got {s:?}")),
        Ok(k) => Ok(KPolicy::Fixed(k)),
    }
}

type CliResult = Result<(), Box<dyn std::error::Error>>;

fn pmu_ids(v: &[u32]) -> Option<Vec<PmuId>> {
    (!v.is_empty()).then(|| v.iter().copied().map(PmuId).collect())
}

fn print_json<T: Serialize>(value: &T) -> CliResult {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<ServiceConfig, Box<dyn std::error::Error>> {
    Ok(match path {
        Some(p) => ServiceConfig::from_file(p)?,
        None => ServiceConfig::default(),
    })
}

fn engine(config: &mut ServiceConfig, data: &DataArg) -> Result<Engine, Box<dyn std::error::Error>> {
    if data.data.is_some() {
        config.data.clone_from(&data.data);
    }
    let dir = config
        .data_dir()
        .ok_or_else(|| format!("no data directory: pass --data, set it in the config file, or set {DATA_ENV}"))?;
    Ok(Engine::new(Dataset::open(dir)?, config.clone()))
}

fn topology_for(dir: &Path, explicit: Option<&Path>) -> Result<GridTopology, Box<dyn std::error::Error>> {
    let mut candidates: Vec<PathBuf> = explicit.map(Path::to_path_buf).into_iter().collect();
    if explicit.is_none() {
        candidates.push(dir.join(TOPOLOGY_FILE));
        if let Some(parent) = dir.parent() {
            candidates.push(parent.join(TOPOLOGY_FILE));
        }
        if let Some(env) = std::env::var_os(DATA_ENV) {
            candidates.push(PathBuf::from(env).join(TOPOLOGY_FILE));
        }
    }
    for c in &candidates {
        if c.exists() {
            return Ok(serde_json::from_slice(&std::fs::read(c)?)?);
        }
    }
    Err(format!("no topology found (tried {candidates:?}); pass --topology").into())
}

pub fn run(cli: Cli) -> CliResult {
    let mut config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Generate {
            seed,
            substations,
            days,
            out,
            start_date,
            start_hour,
            minutes,
            noise,
            attrs,
            dense,
        } => {
            let opts = GenerateOptions {
                seed,
                substations,
                days,
                start_date,
                start_hour,
                minutes,
                noise_sigma: noise,
                attributes: if attrs.is_empty() { Attribute::ALL.to_vec() } else { attrs },
                dense,
                ..Default::default()
            };
            print_json(&generate_dataset(&out, &opts)?)
        }
        Command::Ingest {
            data,
            attr,
            date,
            dense,
            csv,
        } => {
            if data.data.is_some() {
                config.data = data.data;
            }
            let dir = config.data_dir().ok_or("no data directory")?;
            let topo_path = dir.join(TOPOLOGY_FILE);
            let topology: Option<GridTopology> = if topo_path.exists() {
                Some(serde_json::from_slice(&std::fs::read(&topo_path)?)?)
            } else {
                None
            };
            let store = gridpulse::store::Store::new(&dir);
            let options = WriteOptions {
                dense,
                ..Default::default()
            };
            let summary = ingest_csv(&store, File::open(&csv)?, attr, date, topology.as_ref(), options)?;
            print_json(&summary)
        }
        Command::Inspect {
            data,
            stats,
            date,
            attr,
            file,
        } => {
            if let Some(path) = file {
                let f = DayFile::open(&path)?;
                return if stats { print_json(&f.stats()) } else { print_json(f.header()) };
            }
            if data.data.is_some() {
                config.data = data.data;
            }
            let dir = config.data_dir().ok_or("no data directory")?;
            let store = gridpulse::store::Store::new(&dir);
            let mut days = Vec::new();
            for d in store.days()? {
                if date.is_some_and(|want| want != d) {
                    continue;
                }
                let mut files = Vec::new();
                for a in store.attributes(d)? {
                    if attr.is_some_and(|want| want != a) {
                        continue;
                    }
                    let f = store.open_day(a, d)?;
                    files.push(if stats {
                        json!({"attribute": a, "stats": f.stats()})
                    } else {
                        json!({"attribute": a, "header": f.header()})
                    });
                }
                days.push(json!({"date": d, "files": files}));
            }
            print_json(&json!({"root": dir, "days": days}))
        }
        Command::Analyze {
            data,
            event,
            from,
            to,
            window,
            stride,
            attr,
            threshold,
            pmus,
        } => {
            let engine = engine(&mut config, &data)?;
            let params = engine.resolve_analyze(AnalyzeRequest {
                event_id: event,
                from,
                to,
                window_s: window,
                stride_s: stride,
                attribute: attr,
                threshold_pct: threshold,
                pmu_ids: pmu_ids(&pmus),
                ..Default::default()
            })?;
            let mut out = BufWriter::new(io::stdout().lock());
            for frame in engine.analysis_frames(&params)? {
                let flags = flag_pmus(&frame, params.threshold_pct)?;
                serde_json::to_writer(&mut out, &json!({"frame": frame, "flags": flags}))?;
                writeln!(out)?;
            }
            out.flush()?;
            Ok(())
        }
        Command::Dendrogram {
            data,
            epicenter,
            select,
            at,
            window,
            attr,
            k,
        } => {
            let engine = engine(&mut config, &data)?;
            print_json(&engine.dendrogram(DendrogramRequest {
                epicenter_ids: epicenter.into_iter().map(PmuId).collect(),
                selected_ids: pmu_ids(&select),
                at: Some(at),
                window_s: window,
                attribute: attr,
                k,
            })?)
        }
        Command::Embed {
            data,
            select,
            at,
            window,
            attr,
            perplexity,
            seed,
            epicenter,
            collision_radius,
        } => {
            let engine = engine(&mut config, &data)?;
            print_json(&engine.embedding(EmbeddingRequest {
                selected_ids: pmu_ids(&select),
                at: Some(at),
                window_s: window,
                attribute: attr,
                perplexity,
                seed,
                epicenter_id: epicenter.map(PmuId),
                collision_radius,
            })?)
        }
        Command::LinkReports { dir, topology } => {
            let topo = topology_for(&dir, topology.as_deref())?;
            let linked = link_report_dir(&dir, &topo)?;
            let events: Vec<_> = linked.iter().map(|r| &r.record).collect();
            print_json(&json!({"events": events, "reports": linked}))
        }
        Command::Serve {
            data,
            port,
            host,
            cache_entries,
        } => {
            if let Some(p) = port {
                config.port = p;
            }
            if let Some(h) = host {
                config.host = h;
            }
            if let Some(c) = cache_entries {
                config.cache_entries = c;
            }
            let engine = Arc::new(engine(&mut config, &data)?);
            let addr = format!("{}:{}", config.host, config.port);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::http::serve(engine, &addr))?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn k_parsing() {
        assert_eq!(parse_k("auto").unwrap(), KPolicy::Auto);
        assert_eq!(parse_k("3").unwrap(), KPolicy::Fixed(3));
        assert!(parse_k("0").is_err());
        assert!(parse_k("x").is_err());
    }
}
