//! Day-partitioned columnar storage.
//!
//! One file holds one attribute for every PMU over one day, split into
//! fifteen-minute row groups. Inside a row group each PMU column is stored as a
//! separately compressed chunk (presence bitmap + byte-split payload of the
//! present values), and the footer indexes every chunk so a range read seeks
//! straight to the chunks it needs.
//!
//! Byte layout (all integers little-endian):
//!
//! ```text
//! "PMUC1"                         magic, 5 bytes
//! u8                              format version (1)
//! u16 + bytes                     attribute code (UTF-8)
//! u16 year, u8 month, u8 day      calendar date
//! u16                             sample rate (30)
//! u16                             row group count
//! u32                             covered tick count (ticks [0, n) are readable)
//! u32 + u32 * n                   PMU ids, column order
//! chunk data                      row group 0 columns 0..n, row group 1, ...
//!   chunk := deflate(bitmap) ++ deflate(payload)
//!   bitmap: one bit per row, LSB first, 1 = present
//!   payload: present values as f64, byte-split (all byte 0s, then byte 1s, ...)
//!            empty when no value is present
//! footer, per row group:
//!   u64 group offset, u32 first tick, u32 end tick (exclusive)
//!   per column: u64 chunk offset, u32 bitmap bytes, u32 payload bytes,
//!               u32 present count, u32 CRC-32 of the chunk bytes
//! u32                             CRC-32 of header ++ footer (excluding this field)
//! u64 footer offset, u32 footer length, "PMUC1"
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, NaiveDateTime};
use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    absolute_tick, Attribute, PmuId, SeriesMatrix, SAMPLE_RATE_HZ,
    TICKS_PER_DAY, TICKS_PER_ROW_GROUP,
};
use crate::spectral::SampleSource;

pub const MAGIC: &[u8; 5] = b"PMUC1";
pub const FORMAT_VERSION: u8 = 1;
const TRAILER_LEN: u64 = 8 + 4 + 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WriteOptions {
    /// Write only the row groups covering the data instead of all 96.
    pub dense: bool,
    /// Deflate level 0..=9.
    pub level: u32,
}

impl Default for WriteOptions {
    fn default() -> Self {
        WriteOptions { dense: false, level: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayHeader {
    pub attribute: Attribute,
    pub date: NaiveDate,
    pub sample_rate: u16,
    pub row_group_count: u16,
    pub tick_count: u32,
    pub pmu_ids: Vec<PmuId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkMeta {
    pub offset: u64,
    pub bitmap_len: u32,
    pub payload_len: u32,
    pub present: u32,
    pub crc: u32,
}

impl ChunkMeta {
    pub fn len(&self) -> u64 {
        u64::from(self.bitmap_len) + u64::from(self.payload_len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowGroupMeta {
    pub offset: u64,
    pub tick_start: u32,
    pub tick_end: u32,
    pub chunks: Vec<ChunkMeta>,
}

/// Per-query I/O counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadStats {
    pub row_groups_touched: u64,
    pub bytes_read: u64,
    pub columns_decoded: u64,
}

impl ReadStats {
    pub fn merge(&mut self, other: ReadStats) {
        self.row_groups_touched += other.row_groups_touched;
        self.bytes_read += other.bytes_read;
        self.columns_decoded += other.columns_decoded;
    }
}

fn deflate(bytes: &[u8], level: u32) -> Result<Vec<u8>> {
    let mut enc = DeflateEncoder::new(Vec::with_capacity(bytes.len() / 2), Compression::new(level));
    enc.write_all(bytes)?;
    Ok(enc.finish()?)
}

fn inflate(bytes: &[u8], expected: usize) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(expected);
    DeflateDecoder::new(bytes)
        .read_to_end(&mut out)
        .map_err(|e| Error::Integrity(format!("corrupt deflate stream: {e}")))?;
    Ok(out)
}

fn encode_chunk(cells: &[Option<f64>], level: u32) -> Result<(Vec<u8>, u32, u32, u32)> {
    let mut bitmap = vec![0u8; cells.len().div_ceil(8)];
    let mut present = Vec::with_capacity(cells.len());
    for (i, cell) in cells.iter().enumerate() {
        if let Some(v) = cell {
            bitmap[i / 8] |= 1 << (i % 8);
            present.push(v.to_bits().to_le_bytes());
        }
    }
    let bitmap = deflate(&bitmap, level)?;
    let payload = if present.is_empty() {
        Vec::new()
    } else {
        let mut split = Vec::with_capacity(present.len() * 8);
        for byte in 0..8 {
            split.extend(present.iter().map(|b| b[byte]));
        }
        deflate(&split, level)?
    };
    let (b, p, n) = (bitmap.len() as u32, payload.len() as u32, present.len() as u32);
    let mut chunk = bitmap;
    chunk.extend_from_slice(&payload);
    Ok((chunk, b, p, n))
}

fn decode_chunk(bytes: &[u8], meta: &ChunkMeta, rows: usize) -> Result<Vec<Option<f64>>> {
    let (bitmap_bytes, payload_bytes) = bytes.split_at(meta.bitmap_len as usize);
    let bitmap = inflate(bitmap_bytes, rows.div_ceil(8))?;
    if bitmap.len() != rows.div_ceil(8) {
        return Err(Error::Integrity("presence bitmap has the wrong length".into()));
    }
    let n = meta.present as usize;
    let split = if n == 0 { Vec::new() } else { inflate(payload_bytes, n * 8)? };
    if split.len() != n * 8 {
        return Err(Error::Integrity("value payload has the wrong length".into()));
    }
    let mut bits = vec![0u64; n];
    for (byte, plane) in split.chunks_exact(n.max(1)).enumerate() {
        for (b, &x) in bits.iter_mut().zip(plane) {
            *b |= u64::from(x) << (8 * byte);
        }
    }
    let mut out = Vec::with_capacity(rows);
    let mut k = 0;
    for i in 0..rows {
        if bitmap[i / 8] & (1 << (i % 8)) != 0 {
            if k >= n {
                return Err(Error::Integrity("bitmap marks more values than stored".into()));
            }
            out.push(Some(f64::from_bits(bits[k])));
            k += 1;
        } else {
            out.push(None);
        }
    }
    if k != n {
        return Err(Error::Integrity("bitmap marks fewer values than stored".into()));
    }
    Ok(out)
}

fn encode_header(h: &DayHeader) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    let code = h.attribute.code().as_bytes();
    out.extend_from_slice(&(code.len() as u16).to_le_bytes());
    out.extend_from_slice(code);
    out.extend_from_slice(&(h.date.year() as u16).to_le_bytes());
    out.push(h.date.month() as u8);
    out.push(h.date.day() as u8);
    out.extend_from_slice(&h.sample_rate.to_le_bytes());
    out.extend_from_slice(&h.row_group_count.to_le_bytes());
    out.extend_from_slice(&h.tick_count.to_le_bytes());
    out.extend_from_slice(&(h.pmu_ids.len() as u32).to_le_bytes());
    for p in &h.pmu_ids {
        out.extend_from_slice(&p.0.to_le_bytes());
    }
    out
}

fn encode_footer(groups: &[RowGroupMeta]) -> Vec<u8> {
    let mut out = Vec::new();
    for g in groups {
        out.extend_from_slice(&g.offset.to_le_bytes());
        out.extend_from_slice(&g.tick_start.to_le_bytes());
        out.extend_from_slice(&g.tick_end.to_le_bytes());
        for c in &g.chunks {
            out.extend_from_slice(&c.offset.to_le_bytes());
            out.extend_from_slice(&c.bitmap_len.to_le_bytes());
            out.extend_from_slice(&c.payload_len.to_le_bytes());
            out.extend_from_slice(&c.present.to_le_bytes());
            out.extend_from_slice(&c.crc.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format("truncated metadata".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

fn decode_header(buf: &[u8]) -> Result<(DayHeader, usize)> {
    let mut c = Cursor { buf, pos: 0 };
    if c.take(5)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = c.u8()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let code_len = c.u16()? as usize;
    let code = std::str::from_utf8(c.take(code_len)?)
        .map_err(|_| Error::Format("attribute code is not UTF-8".into()))?;
    let attribute: Attribute = code
        .parse()
        .map_err(|_| Error::Format(format!("unknown attribute code {code}")))?;
    let (y, m, d) = (c.u16()?, c.u8()?, c.u8()?);
    let date = NaiveDate::from_ymd_opt(i32::from(y), u32::from(m), u32::from(d))
        .ok_or_else(|| Error::Format("invalid date".into()))?;
    let sample_rate = c.u16()?;
    let row_group_count = c.u16()?;
    let tick_count = c.u32()?;
    let n = c.u32()? as usize;
    let pmu_ids = (0..n).map(|_| c.u32().map(PmuId)).collect::<Result<Vec<_>>>()?;
    if u32::from(sample_rate) != SAMPLE_RATE_HZ
        || tick_count > TICKS_PER_DAY
        || u32::from(row_group_count) != tick_count.div_ceil(TICKS_PER_ROW_GROUP)
    {
        return Err(Error::Format("inconsistent header".into()));
    }
    Ok((
        DayHeader {
            attribute,
            date,
            sample_rate,
            row_group_count,
            tick_count,
            pmu_ids,
        },
        c.pos,
    ))
}

fn decode_footer(buf: &[u8], header: &DayHeader) -> Result<Vec<RowGroupMeta>> {
    let mut c = Cursor { buf, pos: 0 };
    let mut groups = Vec::with_capacity(header.row_group_count as usize);
    for g in 0..u32::from(header.row_group_count) {
        let offset = c.u64()?;
        let tick_start = c.u32()?;
        let tick_end = c.u32()?;
        if tick_start != g * TICKS_PER_ROW_GROUP
            || tick_end != ((g + 1) * TICKS_PER_ROW_GROUP).min(header.tick_count)
        {
            return Err(Error::Format(format!("row group {g} has an unexpected tick range")));
        }
        let chunks = (0..header.pmu_ids.len())
            .map(|_| {
                Ok(ChunkMeta {
                    offset: c.u64()?,
                    bitmap_len: c.u32()?,
                    payload_len: c.u32()?,
                    present: c.u32()?,
                    crc: c.u32()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        groups.push(RowGroupMeta {
            offset,
            tick_start,
            tick_end,
            chunks,
        });
    }
    if c.pos != buf.len() {
        return Err(Error::Format("trailing bytes in footer".into()));
    }
    if groups.windows(2).any(|w| w[0].offset >= w[1].offset) {
        return Err(Error::Format("row group offsets are not strictly increasing".into()));
    }
    Ok(groups)
}

/// Writes one attribute-day. The matrix may cover any tick range inside the
/// day; ticks outside it are stored as nulls.
pub fn write_day_file(path: &Path, matrix: &SeriesMatrix, options: WriteOptions) -> Result<DayHeader> {
    let tick_count = if options.dense { matrix.end_tick() } else { TICKS_PER_DAY };
    let header = DayHeader {
        attribute: matrix.attribute(),
        date: matrix.day(),
        sample_rate: SAMPLE_RATE_HZ as u16,
        row_group_count: tick_count.div_ceil(TICKS_PER_ROW_GROUP) as u16,
        tick_count,
        pmu_ids: matrix.pmu_ids().to_vec(),
    };
    DayFileWriter::create(path, header, options.level)?.write(matrix)
}

/// Writer bound to a fixed header; publishes by rename once complete.
pub struct DayFileWriter {
    path: PathBuf,
    header: DayHeader,
    level: u32,
}

impl DayFileWriter {
    pub fn create(path: &Path, header: DayHeader, level: u32) -> Result<Self> {
        if level > 9 {
            return Err(Error::arg("deflate level must be 0..=9"));
        }
        if header.tick_count > TICKS_PER_DAY
            || u32::from(header.row_group_count) != header.tick_count.div_ceil(TICKS_PER_ROW_GROUP)
        {
            return Err(Error::Format("row group count does not match tick count".into()));
        }
        Ok(DayFileWriter {
            path: path.to_path_buf(),
            header,
            level,
        })
    }

    pub fn write(self, matrix: &SeriesMatrix) -> Result<DayHeader> {
        let h = &self.header;
        if matrix.pmu_ids() != h.pmu_ids.as_slice() {
            return Err(Error::Format(format!(
                "matrix has {} columns but the header declares {}",
                matrix.cols(),
                h.pmu_ids.len()
            )));
        }
        if matrix.attribute() != h.attribute || matrix.day() != h.date {
            return Err(Error::Format("matrix attribute or date differs from header".into()));
        }
        if matrix.end_tick() > h.tick_count {
            return Err(Error::Format("matrix extends past the declared tick count".into()));
        }

        let header_bytes = encode_header(h);
        let cols = matrix.cols();
        let encoded: Vec<Vec<(Vec<u8>, u32, u32, u32)>> = (0..u32::from(h.row_group_count))
            .into_par_iter()
            .map(|g| {
                let t0 = g * TICKS_PER_ROW_GROUP;
                let t1 = ((g + 1) * TICKS_PER_ROW_GROUP).min(h.tick_count);
                (0..cols)
                    .map(|c| {
                        let cells: Vec<Option<f64>> = (t0..t1)
                            .map(|t| {
                                if t >= matrix.start_tick() && t < matrix.end_tick() {
                                    matrix.get((t - matrix.start_tick()) as usize, c)
                                } else {
                                    None
                                }
                            })
                            .collect();
                        encode_chunk(&cells, self.level)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;

        if let Some(parent) = self.path.parent() {
            fs::create_dir_all(parent)?;
        }
        let tmp = self.path.with_extension("tmp");
        let mut out = BufWriter::new(File::create(&tmp)?);
        out.write_all(&header_bytes)?;
        let mut offset = header_bytes.len() as u64;
        let mut groups = Vec::with_capacity(encoded.len());
        for (g, chunks) in encoded.into_iter().enumerate() {
            let g = g as u32;
            let mut metas = Vec::with_capacity(chunks.len());
            let group_offset = offset;
            for (bytes, bitmap_len, payload_len, present) in chunks {
                out.write_all(&bytes)?;
                metas.push(ChunkMeta {
                    offset,
                    bitmap_len,
                    payload_len,
                    present,
                    crc: crc32fast::hash(&bytes),
                });
                offset += bytes.len() as u64;
            }
            groups.push(RowGroupMeta {
                offset: group_offset,
                tick_start: g * TICKS_PER_ROW_GROUP,
                tick_end: ((g + 1) * TICKS_PER_ROW_GROUP).min(h.tick_count),
                chunks: metas,
            });
        }
        let footer = encode_footer(&groups);
        let mut hasher = crc32fast::Hasher::new();
        hasher.update(&header_bytes);
        hasher.update(&footer);
        out.write_all(&footer)?;
        out.write_all(&hasher.finalize().to_le_bytes())?;
        out.write_all(&offset.to_le_bytes())?;
        out.write_all(&((footer.len() + 4) as u32).to_le_bytes())?;
        out.write_all(MAGIC)?;
        out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, &self.path)?;
        Ok(self.header)
    }
}

/// Reads exactly the header bytes, field by field.
fn read_header_bytes(f: &mut File, limit: u64) -> Result<Vec<u8>> {
    let mut head = Vec::new();
    let mut pull = |head: &mut Vec<u8>, n: usize| -> Result<()> {
        if (head.len() + n) as u64 > limit {
            return Err(Error::Format("header overruns chunk data".into()));
        }
        let start = head.len();
        head.resize(start + n, 0);
        f.read_exact(&mut head[start..])?;
        Ok(())
    };
    pull(&mut head, 8)?;
    let code_len = u16::from_le_bytes([head[6], head[7]]) as usize;
    pull(&mut head, code_len + 2 + 1 + 1 + 2 + 2 + 4 + 4)?;
    let n = u32::from_le_bytes(head[head.len() - 4..].try_into().expect("4 bytes")) as usize;
    pull(&mut head, n * 4)?;
    Ok(head)
}

/// An opened day file: header and footer decoded, chunk data left on disk.
#[derive(Debug, Clone)]
pub struct DayFile {
    path: PathBuf,
    header: DayHeader,
    groups: Vec<RowGroupMeta>,
    metadata_bytes: u64,
    file_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub index: u32,
    pub tick_start: u32,
    pub tick_end: u32,
    pub compressed_bytes: u64,
    pub present_cells: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileStats {
    pub header: DayHeader,
    pub file_bytes: u64,
    pub metadata_bytes: u64,
    pub raw_bytes: u64,
    pub compression_ratio: f64,
    pub present_cells: u64,
    pub null_cells: u64,
    pub groups: Vec<GroupStats>,
}

impl DayFile {
    pub fn open(path: &Path) -> Result<Self> {
        let mut f = File::open(path)?;
        let file_bytes = f.metadata()?.len();
        if file_bytes < TRAILER_LEN + MAGIC.len() as u64 {
            return Err(Error::Format("file too short".into()));
        }
        f.seek(SeekFrom::End(-(TRAILER_LEN as i64)))?;
        let mut trailer = [0u8; TRAILER_LEN as usize];
        f.read_exact(&mut trailer)?;
        if &trailer[12..] != MAGIC {
            return Err(Error::Format("bad trailing magic".into()));
        }
        let footer_offset = u64::from_le_bytes(trailer[..8].try_into().expect("8 bytes"));
        let footer_len = u32::from_le_bytes(trailer[8..12].try_into().expect("4 bytes")) as u64;
        if footer_len < 4 || footer_offset + footer_len + TRAILER_LEN != file_bytes {
            return Err(Error::Format("footer location is inconsistent".into()));
        }

        f.seek(SeekFrom::Start(0))?;
        let head = read_header_bytes(&mut f, footer_offset)?;
        let (header, header_len) = decode_header(&head)?;

        f.seek(SeekFrom::Start(footer_offset))?;
        let mut footer = vec![0u8; footer_len as usize];
        f.read_exact(&mut footer)?;
        let (body, crc) = footer.split_at(footer.len() - 4);
        let mut hasher = crc32fast::Hasher::new();
        hasher.update(&head);
        hasher.update(body);
        if hasher.finalize() != u32::from_le_bytes(crc.try_into().expect("4 bytes")) {
            return Err(Error::Integrity("metadata checksum mismatch".into()));
        }
        let groups = decode_footer(body, &header)?;
        for g in &groups {
            for c in &g.chunks {
                if c.offset + c.len() > footer_offset {
                    return Err(Error::Format("chunk extends into the footer".into()));
                }
            }
        }
        Ok(DayFile {
            path: path.to_path_buf(),
            header,
            groups,
            metadata_bytes: header_len as u64 + footer_len + TRAILER_LEN,
            file_bytes,
        })
    }

    pub fn header(&self) -> &DayHeader {
        &self.header
    }

    pub fn row_groups(&self) -> &[RowGroupMeta] {
        &self.groups
    }

    /// Bytes spent reading header, footer and trailer on open.
    pub fn metadata_bytes(&self) -> u64 {
        self.metadata_bytes
    }

    /// Reads ticks `[t0, t1)` for the requested PMUs, touching only the
    /// row groups and column chunks that overlap the request.
    pub fn read_range(&self, pmu_ids: &[PmuId], t0: u32, t1: u32) -> Result<(SeriesMatrix, ReadStats)> {
        if t0 >= t1 {
            return Err(Error::arg(format!("empty tick range [{t0}, {t1})")));
        }
        if t1 > self.header.tick_count {
            return Err(Error::OutOfRange(format!(
                "ticks [{t0}, {t1}) exceed the {} stored ticks",
                self.header.tick_count
            )));
        }
        let cols: Vec<usize> = pmu_ids
            .iter()
            .map(|p| {
                self.header
                    .pmu_ids
                    .iter()
                    .position(|q| q == p)
                    .ok_or_else(|| Error::unknown("PMU", p))
            })
            .collect::<Result<_>>()?;

        let g0 = t0 / TICKS_PER_ROW_GROUP;
        let g1 = (t1 - 1) / TICKS_PER_ROW_GROUP;
        let rows = (t1 - t0) as usize;
        let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(rows); cols.len()];
        let mut stats = ReadStats::default();
        let mut file = File::open(&self.path)?;
        let mut buf = Vec::new();
        for g in g0..=g1 {
            let group = &self.groups[g as usize];
            stats.row_groups_touched += 1;
            let lo = t0.max(group.tick_start);
            let hi = t1.min(group.tick_end);
            for (out, &c) in columns.iter_mut().zip(&cols) {
                let meta = &group.chunks[c];
                buf.resize(meta.len() as usize, 0);
                file.seek(SeekFrom::Start(meta.offset))?;
                file.read_exact(&mut buf)?;
                stats.bytes_read += meta.len();
                if crc32fast::hash(&buf) != meta.crc {
                    return Err(Error::Integrity(format!(
                        "checksum mismatch in row group {g}, PMU {}",
                        self.header.pmu_ids[c]
                    )));
                }
                let cells = decode_chunk(&buf, meta, (group.tick_end - group.tick_start) as usize)?;
                stats.columns_decoded += 1;
                out.extend_from_slice(
                    &cells[(lo - group.tick_start) as usize..(hi - group.tick_start) as usize],
                );
            }
        }
        let matrix = SeriesMatrix::from_columns(
            self.header.attribute,
            self.header.date,
            t0,
            pmu_ids.to_vec(),
            &columns,
        )?;
        Ok((matrix, stats))
    }

    pub fn read_all(&self) -> Result<(SeriesMatrix, ReadStats)> {
        let ids = self.header.pmu_ids.clone();
        if self.header.tick_count == 0 {
            let m = SeriesMatrix::new(self.header.attribute, self.header.date, 0, 0, ids, Vec::new())?;
            return Ok((m, ReadStats::default()));
        }
        self.read_range(&ids, 0, self.header.tick_count)
    }

    pub fn stats(&self) -> FileStats {
        let groups: Vec<GroupStats> = self
            .groups
            .iter()
            .enumerate()
            .map(|(i, g)| GroupStats {
                index: i as u32,
                tick_start: g.tick_start,
                tick_end: g.tick_end,
                compressed_bytes: g.chunks.iter().map(ChunkMeta::len).sum(),
                present_cells: g.chunks.iter().map(|c| u64::from(c.present)).sum(),
            })
            .collect();
        let cells = u64::from(self.header.tick_count) * self.header.pmu_ids.len() as u64;
        let present: u64 = groups.iter().map(|g| g.present_cells).sum();
        let raw = cells * 8;
        FileStats {
            header: self.header.clone(),
            file_bytes: self.file_bytes,
            metadata_bytes: self.metadata_bytes,
            raw_bytes: raw,
            compression_ratio: if self.file_bytes > 0 {
                raw as f64 / self.file_bytes as f64
            } else {
                0.0
            },
            present_cells: present,
            null_cells: cells - present,
            groups,
        }
    }
}

/// A directory of day files laid out as `days/<YYYY-MM-DD>/<ATTR>.pmuc`.
#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Store { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn day_path(&self, attribute: Attribute, date: NaiveDate) -> PathBuf {
        self.root
            .join("days")
            .join(date.format("%Y-%m-%d").to_string())
            .join(format!("{}.pmuc", attribute.code()))
    }

    pub fn write_day(&self, matrix: &SeriesMatrix, options: WriteOptions) -> Result<DayHeader> {
        write_day_file(&self.day_path(matrix.attribute(), matrix.day()), matrix, options)
    }

    pub fn open_day(&self, attribute: Attribute, date: NaiveDate) -> Result<DayFile> {
        let path = self.day_path(attribute, date);
        if !path.exists() {
            return Err(Error::OutOfRange(format!("no {attribute} data stored for {date}")));
        }
        DayFile::open(&path)
    }

    /// Range read whose stats include the metadata read on open.
    pub fn read_range(
        &self,
        attribute: Attribute,
        date: NaiveDate,
        pmu_ids: &[PmuId],
        t0: u32,
        t1: u32,
    ) -> Result<(SeriesMatrix, ReadStats)> {
        let file = self.open_day(attribute, date)?;
        let (m, mut stats) = file.read_range(pmu_ids, t0, t1)?;
        stats.bytes_read += file.metadata_bytes();
        Ok((m, stats))
    }

    /// Days with at least one stored attribute, ascending.
    pub fn days(&self) -> Result<Vec<NaiveDate>> {
        let dir = self.root.join("days");
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut days: Vec<NaiveDate> = fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .filter_map(|e| NaiveDate::parse_from_str(&e.file_name().to_string_lossy(), "%Y-%m-%d").ok())
            .collect();
        days.sort();
        Ok(days)
    }

    /// Attributes stored for a day.
    pub fn attributes(&self, date: NaiveDate) -> Result<Vec<Attribute>> {
        Ok(Attribute::ALL
            .iter()
            .copied()
            .filter(|&a| self.day_path(a, date).exists())
            .collect())
    }

    /// Reads `[from, to)` across as many day files as the span touches,
    /// returning one column per requested PMU.
    pub fn fetch_columns(
        &self,
        attribute: Attribute,
        pmu_ids: &[PmuId],
        from: NaiveDateTime,
        to: NaiveDateTime,
    ) -> Result<(Vec<Vec<Option<f64>>>, ReadStats)> {
        if from >= to {
            return Err(Error::arg("empty time range"));
        }
        let epoch = from.date();
        let start = absolute_tick(epoch, from);
        let end = absolute_tick(epoch, to);
        let mut columns = vec![Vec::with_capacity((end - start) as usize); pmu_ids.len()];
        let mut stats = ReadStats::default();
        let mut cursor = start;
        while cursor < end {
            let day_index = cursor.div_euclid(i64::from(TICKS_PER_DAY));
            let date = epoch + chrono::Duration::days(day_index);
            let t0 = (cursor - day_index * i64::from(TICKS_PER_DAY)) as u32;
            let t1 = (end - day_index * i64::from(TICKS_PER_DAY)).min(i64::from(TICKS_PER_DAY)) as u32;
            let (m, s) = self.read_range(attribute, date, pmu_ids, t0, t1)?;
            stats.merge(s);
            for (c, col) in columns.iter_mut().enumerate() {
                col.extend(m.column(c));
            }
            cursor += i64::from(t1 - t0);
        }
        Ok((columns, stats))
    }
}

impl SampleSource for Store {
    fn fetch(
        &self,
        attribute: Attribute,
        pmu_ids: &[PmuId],
        from: NaiveDateTime,
        to: NaiveDateTime,
    ) -> Result<Vec<Vec<Option<f64>>>> {
        self.fetch_columns(attribute, pmu_ids, from, to).map(|(c, _)| c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ROW_GROUPS_PER_DAY;

    fn day() -> NaiveDate {
        NaiveDate::from_ymd_opt(2017, 4, 20).unwrap()
    }

    fn matrix(cols: usize, rows: u32, f: impl Fn(u32, usize) -> Option<f64>) -> SeriesMatrix {
        let ids: Vec<PmuId> = (0..cols).map(|c| PmuId(100 + c as u32)).collect();
        let mut values = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                values.push(f(r, c));
            }
        }
        SeriesMatrix::new(Attribute::VPm, day(), 0, rows, ids, values).unwrap()
    }

    fn dense() -> WriteOptions {
        WriteOptions { dense: true, level: 1 }
    }

    #[test]
    fn constant_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = matrix(4, 3 * TICKS_PER_ROW_GROUP / 2, |_, c| Some(1.0 + c as f64));
        let path = dir.path().join("a.pmuc");
        write_day_file(&path, &m, dense()).unwrap();
        let f = DayFile::open(&path).unwrap();
        assert_eq!(f.header().row_group_count, 2);
        let (back, _) = f.read_all().unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn full_day_layout_has_96_groups() {
        let dir = tempfile::tempdir().unwrap();
        let m = matrix(2, 100, |r, _| Some(r as f64));
        let path = dir.path().join("a.pmuc");
        write_day_file(&path, &m, WriteOptions::default()).unwrap();
        let f = DayFile::open(&path).unwrap();
        assert_eq!(u32::from(f.header().row_group_count), ROW_GROUPS_PER_DAY);
        for (g, meta) in f.row_groups().iter().enumerate() {
            assert_eq!(meta.tick_start, g as u32 * TICKS_PER_ROW_GROUP);
        }
        let (tail, _) = f.read_range(&[PmuId(100)], TICKS_PER_DAY - 10, TICKS_PER_DAY).unwrap();
        assert!(tail.values().iter().all(Option::is_none));
    }

    #[test]
    fn all_null_column_has_empty_payload() {
        let dir = tempfile::tempdir().unwrap();
        let m = matrix(2, 500, |r, c| if c == 1 { None } else { Some(r as f64) });
        let path = dir.path().join("a.pmuc");
        write_day_file(&path, &m, dense()).unwrap();
        let f = DayFile::open(&path).unwrap();
        let meta = f.row_groups()[0].chunks[1];
        assert_eq!(meta.payload_len, 0);
        assert_eq!(meta.present, 0);
        assert!(meta.bitmap_len > 0);
        assert_eq!(f.read_all().unwrap().0, m);
    }

    #[test]
    fn row_group_touch_counts() {
        let dir = tempfile::tempdir().unwrap();
        let m = matrix(3, 2 * TICKS_PER_ROW_GROUP, |r, c| Some((r as f64) * 0.001 + c as f64));
        let path = dir.path().join("a.pmuc");
        write_day_file(&path, &m, dense()).unwrap();
        let f = DayFile::open(&path).unwrap();
        let (_, s) = f.read_range(&[PmuId(100)], 0, 27_000).unwrap();
        assert_eq!(s.row_groups_touched, 1);
        assert_eq!(s.columns_decoded, 1);
        let (w, s) = f.read_range(&[PmuId(100)], 26_999, 27_001).unwrap();
        assert_eq!(s.row_groups_touched, 2);
        assert_eq!(w.rows(), 2);
        assert_eq!(w.get(0, 0), m.get(26_999, 0));
        assert_eq!(w.get(1, 0), m.get(27_000, 0));
    }

    #[test]
    fn read_errors() {
        let dir = tempfile::tempdir().unwrap();
        let m = matrix(2, 1000, |r, _| Some(r as f64));
        let path = dir.path().join("a.pmuc");
        write_day_file(&path, &m, dense()).unwrap();
        let f = DayFile::open(&path).unwrap();
        assert!(matches!(f.read_range(&[PmuId(5)], 0, 10), Err(Error::UnknownId { .. })));
        assert!(matches!(f.read_range(&[PmuId(100)], 0, 1001), Err(Error::OutOfRange(_))));
        assert!(f.read_range(&[PmuId(100)], 10, 10).is_err());
    }

    #[test]
    fn header_column_mismatch_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let m = matrix(2, 10, |_, _| Some(0.0));
        let header = DayHeader {
            attribute: Attribute::VPm,
            date: day(),
            sample_rate: 30,
            row_group_count: 1,
            tick_count: 10,
            pmu_ids: vec![PmuId(100)],
        };
        let w = DayFileWriter::create(&dir.path().join("x.pmuc"), header, 1).unwrap();
        assert!(matches!(w.write(&m), Err(Error::Format(_))));
    }

    #[test]
    fn corrupt_chunk_is_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        let m = matrix(2, 1000, |r, _| Some((r as f64).sin()));
        let path = dir.path().join("a.pmuc");
        write_day_file(&path, &m, dense()).unwrap();
        let chunk = DayFile::open(&path).unwrap().row_groups()[0].chunks[1];
        let mut bytes = fs::read(&path).unwrap();
        bytes[chunk.offset as usize + 3] ^= 0xFF;
        fs::write(&path, &bytes).unwrap();
        let f = DayFile::open(&path).unwrap();
        // untouched column still reads
        assert!(f.read_range(&[PmuId(100)], 0, 1000).is_ok());
        assert!(matches!(f.read_range(&[PmuId(101)], 0, 1000), Err(Error::Integrity(_))));
    }

    #[test]
    fn corrupt_footer_is_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        let m = matrix(2, 100, |r, _| Some(r as f64));
        let path = dir.path().join("a.pmuc");
        write_day_file(&path, &m, dense()).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        let n = bytes.len();
        bytes[n - TRAILER_LEN as usize - 6] ^= 0x01;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(DayFile::open(&path), Err(Error::Integrity(_))));
    }

    #[test]
    fn store_paths_and_listing() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::new(dir.path());
        let m = matrix(2, 100, |r, _| Some(r as f64));
        store.write_day(&m, dense()).unwrap();
        assert_eq!(store.days().unwrap(), vec![day()]);
        assert_eq!(store.attributes(day()).unwrap(), vec![Attribute::VPm]);
        assert!(!store.day_path(Attribute::VPm, day()).with_extension("tmp").exists());
        let (_, s) = store.read_range(Attribute::VPm, day(), &[PmuId(101)], 0, 50).unwrap();
        assert!(s.bytes_read > 0);
    }
}
