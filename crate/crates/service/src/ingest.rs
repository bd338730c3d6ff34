//! Wide CSV import into day files.
//!
//! The first column is either `tick` (sample index within the day, requires a
//! date) or `timestamp` (ISO 8601, all rows on one day). Remaining headers are
//! PMU ids, bare (`12`) or prefixed (`PMU12`, `pmu 12`). Empty cells and
//! `null`/`NaN` are stored as nulls; missing ticks between rows become null rows.

use std::collections::BTreeMap;
use std::io::Read;

use chrono::{NaiveDate, NaiveDateTime};
use gridpulse::model::{tick_of, Attribute, GridTopology, PmuId, SeriesMatrix, TICKS_PER_DAY};
use gridpulse::store::{DayHeader, Store, WriteOptions};
use gridpulse::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestSummary {
    pub attribute: Attribute,
    pub date: NaiveDate,
    pub pmus: usize,
    pub rows: usize,
    pub start_tick: u32,
    pub end_tick: u32,
    pub null_cells: usize,
    pub header: DayHeader,
}

fn parse_pmu(header: &str) -> Result<PmuId> {
    let h = header.trim();
    let digits = h
        .strip_prefix("PMU")
        .or_else(|| h.strip_prefix("pmu"))
        .unwrap_or(h)
        .trim_start_matches([' ', '#', '_', '-']);
    digits
        .parse()
        .map(PmuId)
        .map_err(|_| Error::Format(format!("column header {header:?} is not a PMU id")))
}

fn parse_cell(cell: &str, line: usize) -> Result<Option<f64>> {
    let c = cell.trim();
    if c.is_empty() || c.eq_ignore_ascii_case("null") || c.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    let v: f64 = c
        .parse()
        .map_err(|_| Error::Format(format!("line {line}: {c:?} is not a number")))?;
    Ok(v.is_finite().then_some(v))
}

/// Parses a wide CSV into a matrix for one day.
pub fn parse_wide_csv(reader: impl Read, attribute: Attribute, date: Option<NaiveDate>) -> Result<SeriesMatrix> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
    let first = headers.get(0).unwrap_or("").to_ascii_lowercase();
    let by_timestamp = match first.as_str() {
        "tick" => false,
        "timestamp" | "time" => true,
        _ => return Err(Error::Format("first column must be `tick` or `timestamp`".into())),
    };
    if !by_timestamp && date.is_none() {
        return Err(Error::arg("a date is required for tick-indexed CSV"));
    }
    let ids: Vec<PmuId> = headers.iter().skip(1).map(parse_pmu).collect::<Result<_>>()?;
    if ids.is_empty() {
        return Err(Error::Format("no PMU columns".into()));
    }
    let mut seen = ids.clone();
    seen.sort();
    seen.dedup();
    if seen.len() != ids.len() {
        return Err(Error::Format("duplicate PMU column".into()));
    }

    let mut day = date;
    let mut rows: BTreeMap<u32, Vec<Option<f64>>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Format(format!("line {line}: {e}")))?;
        if rec.len() != ids.len() + 1 {
            return Err(Error::Format(format!("line {line}: expected {} cells", ids.len() + 1)));
        }
        let key = &rec[0];
        let tick = if by_timestamp {
            let ts: NaiveDateTime = key
                .parse()
                .map_err(|_| Error::Format(format!("line {line}: bad timestamp {key:?}")))?;
            match day {
                Some(d) if d != ts.date() => {
                    return Err(Error::Format(format!("line {line}: rows span more than one day")))
                }
                _ => day = Some(ts.date()),
            }
            tick_of(ts.time())
        } else {
            key.parse::<u32>()
                .map_err(|_| Error::Format(format!("line {line}: bad tick {key:?}")))?
        };
        if tick >= TICKS_PER_DAY {
            return Err(Error::Format(format!("line {line}: tick {tick} is past the end of the day")));
        }
        let values = rec.iter().skip(1).map(|c| parse_cell(c, line)).collect::<Result<Vec<_>>>()?;
        if rows.insert(tick, values).is_some() {
            return Err(Error::Format(format!("line {line}: duplicate tick {tick}")));
        }
    }
    let (Some(&start), Some(&last)) = (rows.keys().next(), rows.keys().next_back()) else {
        return Err(Error::Format("no data rows".into()));
    };
    let width = ids.len();
    let mut values = Vec::with_capacity((last - start + 1) as usize * width);
    for t in start..=last {
        match rows.get(&t) {
            Some(r) => values.extend_from_slice(r),
            None => values.extend(std::iter::repeat_n(None, width)),
        }
    }
    SeriesMatrix::new(attribute, day.expect("date resolved"), start, last + 1, ids, values)
}

/// Parses and stores one CSV, checking PMU ids against `topology` when given.
pub fn ingest_csv(
    store: &Store,
    reader: impl Read,
    attribute: Attribute,
    date: Option<NaiveDate>,
    topology: Option<&GridTopology>,
    options: WriteOptions,
) -> Result<IngestSummary> {
    let m = parse_wide_csv(reader, attribute, date)?;
    if let Some(t) = topology {
        if let Some(&p) = m.pmu_ids().iter().find(|&&p| !t.contains_pmu(p)) {
            return Err(Error::unknown("PMU", p));
        }
    }
    let header = store.write_day(&m, options)?;
    Ok(IngestSummary {
        attribute,
        date: m.day(),
        pmus: m.cols(),
        rows: m.rows(),
        start_tick: m.start_tick(),
        end_tick: m.end_tick(),
        null_cells: m.values().iter().filter(|v| v.is_none()).count(),
        header,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tick_csv_with_gaps_and_nulls() {
        let csv = "tick,PMU1,2\n10,1.5,\n12,null,4\n";
        let d = NaiveDate::from_ymd_opt(2017, 4, 20).unwrap();
        let m = parse_wide_csv(csv.as_bytes(), Attribute::VPm, Some(d)).unwrap();
        assert_eq!(m.pmu_ids(), &[PmuId(1), PmuId(2)]);
        assert_eq!((m.start_tick(), m.end_tick()), (10, 13));
        assert_eq!(m.values(), &[Some(1.5), None, None, None, None, Some(4.0)]);
    }

    #[test]
    fn timestamp_csv_derives_day() {
        let csv = "timestamp,7\n2017-04-20T00:00:01,1\n2017-04-20T00:00:01.033333333,2\n";
        let m = parse_wide_csv(csv.as_bytes(), Attribute::F, None).unwrap();
        assert_eq!(m.day(), NaiveDate::from_ymd_opt(2017, 4, 20).unwrap());
        assert_eq!((m.start_tick(), m.end_tick()), (30, 32));
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        let d = NaiveDate::from_ymd_opt(2017, 4, 20).unwrap();
        assert!(parse_wide_csv("when,1\n0,1\n".as_bytes(), Attribute::F, Some(d)).is_err());
        assert!(parse_wide_csv("tick,x\n0,1\n".as_bytes(), Attribute::F, Some(d)).is_err());
        assert!(parse_wide_csv("tick,1\n0,abc\n".as_bytes(), Attribute::F, Some(d)).is_err());
        assert!(parse_wide_csv("tick,1\n0,1\n0,2\n".as_bytes(), Attribute::F, Some(d)).is_err());
        assert!(parse_wide_csv("tick,1\n0,1\n".as_bytes(), Attribute::F, None).is_err());
        let two_days = "timestamp,1\n2017-04-20T00:00:00,1\n2017-04-21T00:00:00,1\n";
        assert!(parse_wide_csv(two_days.as_bytes(), Attribute::F, None).is_err());
    }
}
