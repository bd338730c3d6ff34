//! Writes a day file with dropouts, reads back a narrow range and prints the
//! I/O counters that show row-group and column pruning.

use chrono::NaiveDate;
use gridpulse::model::{Attribute, PmuId, SeriesMatrix, TICKS_PER_ROW_GROUP};
use gridpulse::store::{Store, WriteOptions};

fn main() -> gridpulse::Result<()> {
    let dir = std::env::temp_dir().join(format!("gridpulse-store-{}", std::process::id()));
    let store = Store::new(&dir);
    let day = NaiveDate::from_ymd_opt(2017, 4, 20).unwrap();
    let ids: Vec<PmuId> = (1..=12).map(PmuId).collect();
    let rows = 2 * TICKS_PER_ROW_GROUP;
    let columns: Vec<Vec<Option<f64>>> = ids
        .iter()
        .map(|p| {
            (0..rows)
                .map(|t| (t % 997 != u32::from(p.0 as u16)).then(|| 1.0 + 1e-3 * f64::from(t % 60)))
                .collect()
        })
        .collect();
    let m = SeriesMatrix::from_columns(Attribute::VPm, day, 0, ids.clone(), &columns)?;
    let header = store.write_day(&m, WriteOptions::default())?;
    println!("wrote {} ({} row groups)", store.day_path(Attribute::VPm, day).display(), header.row_group_count);

    let file = store.open_day(Attribute::VPm, day)?;
    let stats = file.stats();
    println!(
        "{} bytes on disk, {:.1}x compression, {} nulls",
        stats.file_bytes, stats.compression_ratio, stats.null_cells
    );

    let edge = TICKS_PER_ROW_GROUP;
    for (label, pmus, t0, t1) in [
        ("one column, inside a group", &ids[..1], 100, 400),
        ("one column, across a boundary", &ids[..1], edge - 150, edge + 150),
        ("all columns, across a boundary", &ids[..], edge - 150, edge + 150),
    ] {
        let (slice, io) = store.read_range(Attribute::VPm, day, pmus, t0, t1)?;
        println!(
            "{label:<32} rows {:>4}  groups {}  columns {:>2}  bytes {:>8}",
            slice.rows(),
            io.row_groups_touched,
            io.columns_decoded,
            io.bytes_read
        );
    }
    let (back, _) = file.read_range(&ids, 0, rows)?;
    println!("round trip equal: {}", back.values() == m.values());
    std::fs::remove_dir_all(dir)?;
    Ok(())
}
