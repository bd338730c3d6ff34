//! Sliding-window spectra over PMU series, the dominant-frequency timeline,
//! threshold flagging and spectrum-domain correlation shading.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::{Duration, NaiveDateTime};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{absolute_tick, Attribute, PmuId, SeriesMatrix, SAMPLE_RATE_HZ};

/// Window lengths, in samples, the analysis accepts (2, 5 and 10 s at 30 Hz).
pub const SUPPORTED_LENGTHS: [usize; 3] = [60, 150, 300];
pub const WINDOW_SECONDS: [u32; 3] = [2, 5, 10];
/// Peak amplitude (per unit) below which a frame is treated as quiet.
pub const DEFAULT_MIN_PEAK: f64 = 1e-3;

/// Anything that can hand back aligned sample columns for a time span.
pub trait SampleSource {
    /// One column per requested PMU covering `[from, to)` at 30 Hz.
    fn fetch(
        &self,
        attribute: Attribute,
        pmu_ids: &[PmuId],
        from: NaiveDateTime,
        to: NaiveDateTime,
    ) -> Result<Vec<Vec<Option<f64>>>>;
}

/// In-memory source over single-day matrices, e.g. straight from the generator.
#[derive(Debug, Clone, Default)]
pub struct MemorySource {
    matrices: BTreeMap<Attribute, SeriesMatrix>,
}

impl MemorySource {
    pub fn new(matrices: BTreeMap<Attribute, SeriesMatrix>) -> Self {
        MemorySource { matrices }
    }

    pub fn insert(&mut self, matrix: SeriesMatrix) {
        self.matrices.insert(matrix.attribute(), matrix);
    }
}

impl SampleSource for MemorySource {
    fn fetch(
        &self,
        attribute: Attribute,
        pmu_ids: &[PmuId],
        from: NaiveDateTime,
        to: NaiveDateTime,
    ) -> Result<Vec<Vec<Option<f64>>>> {
        let m = self
            .matrices
            .get(&attribute)
            .ok_or_else(|| Error::OutOfRange(format!("no {attribute} data loaded")))?;
        let start = absolute_tick(m.day(), from);
        let end = absolute_tick(m.day(), to);
        if start < i64::from(m.start_tick()) || end > i64::from(m.end_tick()) || start >= end {
            return Err(Error::OutOfRange(format!("{from} .. {to} is outside the loaded span")));
        }
        let (r0, r1) = (
            (start - i64::from(m.start_tick())) as usize,
            (end - i64::from(m.start_tick())) as usize,
        );
        pmu_ids
            .iter()
            .map(|&p| {
                m.column_of(p)
                    .map(|c| c[r0..r1].to_vec())
                    .ok_or_else(|| Error::unknown("PMU", p))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Taper {
    #[default]
    Rectangular,
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConfig {
    pub taper: Taper,
    /// Largest fraction of nulls that is interpolated before a window is
    /// declared invalid.
    pub max_gap_fraction: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            taper: Taper::Rectangular,
            max_gap_fraction: 0.1,
        }
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

/// Fills null runs by linear interpolation (edges take the nearest value).
/// Returns `None` when nothing is present.
pub fn interpolate_gaps(samples: &[Option<f64>]) -> Option<Vec<f64>> {
    let present: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].is_some()).collect();
    let (&first, &last) = (present.first()?, present.last()?);
    let mut out = Vec::with_capacity(samples.len());
    let mut next = 0;
    for (i, s) in samples.iter().enumerate() {
        match s {
            Some(v) => {
                out.push(*v);
                next += 1;
            }
            None if i < first => out.push(samples[first].unwrap_or(0.0)),
            None if i > last => out.push(samples[last].unwrap_or(0.0)),
            None => {
                let (l, r) = (present[next - 1], present[next]);
                let (vl, vr) = (samples[l].unwrap_or(0.0), samples[r].unwrap_or(0.0));
                out.push(vl + (vr - vl) * (i - l) as f64 / (r - l) as f64);
            }
        }
    }
    Some(out)
}

/// One-sided amplitude spectrum over bins `1..=N/2` (DC excluded), scaled by
/// `2/N` after mean removal. `Ok(None)` marks an invalid window (all null, or
/// more nulls than the gap policy allows).
pub fn compute_spectrum(samples: &[Option<f64>], config: &SpectrumConfig) -> Result<Option<Vec<f64>>> {
    let n = samples.len();
    if !SUPPORTED_LENGTHS.contains(&n) {
        return Err(Error::arg(format!(
            "window of {n} samples; expected one of {SUPPORTED_LENGTHS:?}"
        )));
    }
    let nulls = samples.iter().filter(|s| s.is_none()).count();
    if nulls as f64 > config.max_gap_fraction * n as f64 {
        return Ok(None);
    }
    let Some(filled) = interpolate_gaps(samples) else {
        return Ok(None);
    };
    Ok(Some(amplitude_spectrum(&filled, config.taper)))
}

fn amplitude_spectrum(x: &[f64], taper: Taper) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let weights: Vec<f64> = match taper {
        Taper::Rectangular => vec![1.0; n],
        Taper::Hann => (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
            .collect(),
    };
    let gain: f64 = weights.iter().sum();
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .zip(&weights)
        .map(|(&v, &w)| Complex::new((v - mean) * w, 0.0))
        .collect();
    plan(n).process(&mut buf);
    buf[1..=n / 2].iter().map(|c| 2.0 * c.norm() / gain).collect()
}

/// Center frequency of a 1-based bin for an `n`-sample window.
pub fn bin_frequency(bin: usize, n: usize) -> f64 {
    bin as f64 * f64::from(SAMPLE_RATE_HZ) / n as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub window_seconds: u32,
    pub stride_seconds: u32,
    pub t_start: NaiveDateTime,
    pub t_end: NaiveDateTime,
    pub attribute: Attribute,
}

impl WindowSpec {
    /// Non-overlapping windows (stride = window length).
    pub fn new(window_seconds: u32, t_start: NaiveDateTime, t_end: NaiveDateTime, attribute: Attribute) -> Self {
        WindowSpec {
            window_seconds,
            stride_seconds: window_seconds,
            t_start,
            t_end,
            attribute,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !WINDOW_SECONDS.contains(&self.window_seconds) {
            return Err(Error::arg(format!(
                "window must be one of {WINDOW_SECONDS:?} seconds, got {}",
                self.window_seconds
            )));
        }
        if self.stride_seconds == 0 {
            return Err(Error::arg("stride must be positive"));
        }
        if self.t_end - self.t_start < Duration::seconds(i64::from(self.window_seconds)) {
            return Err(Error::arg("time range is shorter than one window"));
        }
        Ok(())
    }

    pub fn samples_per_window(&self) -> usize {
        (self.window_seconds * SAMPLE_RATE_HZ) as usize
    }

    /// Start timestamps of every window that fits inside the range.
    pub fn window_starts(&self) -> Vec<NaiveDateTime> {
        let window = Duration::seconds(i64::from(self.window_seconds));
        let stride = Duration::seconds(i64::from(self.stride_seconds));
        let mut starts = Vec::new();
        let mut t = self.t_start;
        while t + window <= self.t_end {
            starts.push(t);
            t += stride;
        }
        starts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmuSpectrum {
    pub pmu: PmuId,
    pub valid: bool,
    /// Amplitudes for bins 1..=N/2; empty when invalid.
    pub magnitudes: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dominant {
    /// 1-based bin index.
    pub bin: usize,
    pub frequency_hz: f64,
    pub peak_pmu: PmuId,
    pub peak_magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFrame {
    pub start: NaiveDateTime,
    pub window_seconds: u32,
    pub bin_hz: f64,
    pub spectra: Vec<PmuSpectrum>,
    /// `None` when no PMU has a valid window.
    pub dominant: Option<Dominant>,
}

impl SpectrumFrame {
    /// Builds a frame from raw window columns, one per PMU.
    pub fn from_columns(
        start: NaiveDateTime,
        pmu_ids: &[PmuId],
        columns: &[Vec<Option<f64>>],
        config: &SpectrumConfig,
    ) -> Result<Self> {
        if pmu_ids.len() != columns.len() {
            return Err(Error::arg("one column per PMU is required"));
        }
        let n = columns.first().map_or(0, Vec::len);
        let spectra = pmu_ids
            .iter()
            .zip(columns)
            .map(|(&pmu, col)| {
                Ok(match compute_spectrum(col, config)? {
                    Some(magnitudes) => PmuSpectrum {
                        pmu,
                        valid: true,
                        magnitudes,
                    },
                    None => PmuSpectrum {
                        pmu,
                        valid: false,
                        magnitudes: Vec::new(),
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SpectrumFrame::from_spectra(start, n, spectra))
    }

    /// Assembles a frame from precomputed spectra of `n`-sample windows and
    /// locates the global maximum over valid PMUs (ties: lower bin, then lower id).
    pub fn from_spectra(start: NaiveDateTime, n: usize, spectra: Vec<PmuSpectrum>) -> Self {
        let mut best: Option<(f64, usize, PmuId)> = None;
        for s in spectra.iter().filter(|s| s.valid) {
            for (i, &m) in s.magnitudes.iter().enumerate() {
                let cand = (m, i + 1, s.pmu);
                let better = match best {
                    None => true,
                    Some((bm, bb, bp)) => m > bm || (m == bm && (cand.1, cand.2) < (bb, bp)),
                };
                if better {
                    best = Some(cand);
                }
            }
        }
        SpectrumFrame {
            start,
            window_seconds: (n as u32) / SAMPLE_RATE_HZ,
            bin_hz: f64::from(SAMPLE_RATE_HZ) / n.max(1) as f64,
            spectra,
            dominant: best.map(|(m, bin, pmu)| Dominant {
                bin,
                frequency_hz: bin_frequency(bin, n),
                peak_pmu: pmu,
                peak_magnitude: m,
            }),
        }
    }

    pub fn spectrum(&self, pmu: PmuId) -> Option<&PmuSpectrum> {
        self.spectra.iter().find(|s| s.pmu == pmu)
    }

    pub fn valid_spectra(&self) -> impl Iterator<Item = &PmuSpectrum> {
        self.spectra.iter().filter(|s| s.valid)
    }

    /// Magnitude at the dominant bin for a valid PMU.
    pub fn magnitude_at_dominant(&self, pmu: PmuId) -> Option<f64> {
        let d = self.dominant?;
        let s = self.spectrum(pmu).filter(|s| s.valid)?;
        s.magnitudes.get(d.bin - 1).copied()
    }

    /// Whether the frame peak reaches `min_peak`.
    pub fn detects(&self, min_peak: f64) -> bool {
        self.dominant.is_some_and(|d| d.peak_magnitude >= min_peak)
    }

    pub fn n_bins(&self) -> usize {
        self.valid_spectra().next().map_or(0, |s| s.magnitudes.len())
    }
}

/// Spectrum frames for every window in the spec, computed in parallel.
pub fn analyze_windows(
    source: &dyn SampleSourceSync,
    spec: &WindowSpec,
    pmu_ids: &[PmuId],
    config: &SpectrumConfig,
) -> Result<Vec<SpectrumFrame>> {
    if pmu_ids.is_empty() {
        return Err(Error::arg("at least one PMU is required"));
    }
    spec.validate()?;
    let starts = spec.window_starts();
    let Some(&last) = starts.last() else {
        return Ok(Vec::new());
    };
    let span_end = last + Duration::seconds(i64::from(spec.window_seconds));
    let columns = source.fetch(spec.attribute, pmu_ids, spec.t_start, span_end)?;
    let n = spec.samples_per_window();
    let stride = (spec.stride_seconds * SAMPLE_RATE_HZ) as usize;
    (0..starts.len())
        .into_par_iter()
        .map(|w| {
            let offset = w * stride;
            let window: Vec<Vec<Option<f64>>> =
                columns.iter().map(|c| c[offset..offset + n].to_vec()).collect();
            SpectrumFrame::from_columns(starts[w], pmu_ids, &window, config)
        })
        .collect()
}

/// [`SampleSource`] usable from worker threads.
pub trait SampleSourceSync: SampleSource + Sync {}
impl<T: SampleSource + Sync> SampleSourceSync for T {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub t: NaiveDateTime,
    pub frequency_hz: Option<f64>,
    pub peak_pmu: Option<PmuId>,
    pub peak_magnitude: Option<f64>,
    /// No PMU had a valid window here.
    pub gap: bool,
}

impl From<&SpectrumFrame> for TimelineEntry {
    fn from(f: &SpectrumFrame) -> Self {
        TimelineEntry {
            t: f.start,
            frequency_hz: f.dominant.map(|d| d.frequency_hz),
            peak_pmu: f.dominant.map(|d| d.peak_pmu),
            peak_magnitude: f.dominant.map(|d| d.peak_magnitude),
            gap: f.dominant.is_none(),
        }
    }
}

/// Dominant frequency per stride step.
pub fn main_frequency_timeline(
    source: &dyn SampleSourceSync,
    spec: &WindowSpec,
    pmu_ids: &[PmuId],
    config: &SpectrumConfig,
) -> Result<Vec<TimelineEntry>> {
    Ok(analyze_windows(source, spec, pmu_ids, config)?
        .iter()
        .map(TimelineEntry::from)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flag {
    pub pmu: PmuId,
    pub magnitude: f64,
    /// 1-based position in the flag list.
    pub rank: usize,
}

/// PMUs whose magnitude at the dominant bin reaches `threshold_pct` percent of
/// the frame peak, strongest first (ties by id).
pub fn flag_pmus(frame: &SpectrumFrame, threshold_pct: f64) -> Result<Vec<Flag>> {
    if !(threshold_pct > 0.0 && threshold_pct <= 100.0) {
        return Err(Error::arg(format!("threshold {threshold_pct}% is outside (0, 100]")));
    }
    let Some(d) = frame.dominant else {
        return Ok(Vec::new());
    };
    let cutoff = threshold_pct / 100.0 * d.peak_magnitude;
    let mut hits: Vec<(PmuId, f64)> = frame
        .valid_spectra()
        .filter_map(|s| s.magnitudes.get(d.bin - 1).map(|&m| (s.pmu, m)))
        .filter(|&(_, m)| m >= cutoff)
        .collect();
    hits.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(hits
        .into_iter()
        .enumerate()
        .map(|(i, (pmu, magnitude))| Flag {
            pmu,
            magnitude,
            rank: i + 1,
        })
        .collect())
}

/// Pearson correlation; 0 when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (da, db) = (a[i] - ma, b[i] - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// Spectrum-domain Pearson correlation of every valid PMU against `reference`.
pub fn correlation_to_reference(frame: &SpectrumFrame, reference: PmuId) -> Result<BTreeMap<PmuId, f64>> {
    let r = frame
        .spectrum(reference)
        .filter(|s| s.valid)
        .ok_or_else(|| Error::arg(format!("reference PMU {reference} has no valid spectrum")))?;
    Ok(frame
        .valid_spectra()
        .map(|s| (s.pmu, pearson(&r.magnitudes, &s.magnitudes)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use std::f64::consts::PI;

    fn t0() -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2017, 4, 20).unwrap().and_hms_opt(20, 44, 0).unwrap()
    }

    fn sine(n: usize, f: f64, amp: f64) -> Vec<Option<f64>> {
        (0..n)
            .map(|i| Some(amp * (2.0 * PI * f * i as f64 / 30.0).sin()))
            .collect()
    }

    #[test]
    fn exact_bin_sinusoid() {
        let s = compute_spectrum(&sine(60, 2.5, 1.0), &SpectrumConfig::default())
            .unwrap()
            .unwrap();
        assert_eq!(s.len(), 30);
        assert!((s[4] - 1.0).abs() < 1e-9, "bin 5 = {}", s[4]);
        for (i, &m) in s.iter().enumerate() {
            if i != 4 {
                assert!(m < 1e-9, "bin {} = {m}", i + 1);
            }
        }
    }

    #[test]
    fn constant_series_is_flat() {
        let s = compute_spectrum(&vec![Some(1.0); 150], &SpectrumConfig::default())
            .unwrap()
            .unwrap();
        assert!(s.iter().all(|&m| m < 1e-12));
    }

    #[test]
    fn gap_policy() {
        let cfg = SpectrumConfig::default();
        let mut x = sine(60, 2.5, 1.0);
        for v in x.iter_mut().take(6) {
            *v = None;
        }
        assert!(compute_spectrum(&x, &cfg).unwrap().is_some());
        x[30] = None;
        assert!(compute_spectrum(&x, &cfg).unwrap().is_none());
        assert!(compute_spectrum(&[None; 60], &cfg).unwrap().is_none());
        assert!(compute_spectrum(&[Some(0.0); 64], &cfg).is_err());
    }

    #[test]
    fn interpolation_is_linear() {
        let x = [None, Some(1.0), None, None, Some(4.0), None];
        assert_eq!(interpolate_gaps(&x).unwrap(), vec![1.0, 1.0, 2.0, 3.0, 4.0, 4.0]);
    }

    #[test]
    fn hann_taper_keeps_peak_bin() {
        let cfg = SpectrumConfig {
            taper: Taper::Hann,
            ..SpectrumConfig::default()
        };
        let s = compute_spectrum(&sine(300, 2.5, 1.0), &cfg).unwrap().unwrap();
        let argmax = (0..s.len()).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
        assert_eq!(argmax + 1, 25);
        assert!((s[24] - 1.0).abs() < 1e-9);
    }

    fn frame(mags: &[f64]) -> SpectrumFrame {
        // each PMU has a single spike at bin 3 of height m
        let spectra = mags
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                let mut v = vec![0.0; 30];
                v[2] = m;
                PmuSpectrum {
                    pmu: PmuId(100 + i as u32),
                    valid: true,
                    magnitudes: v,
                }
            })
            .collect();
        SpectrumFrame::from_spectra(t0(), 60, spectra)
    }

    #[test]
    fn dominant_of_frame() {
        let f = frame(&[0.2, 0.9, 0.5]);
        let d = f.dominant.unwrap();
        assert_eq!(d.bin, 3);
        assert!((d.frequency_hz - 1.5).abs() < 1e-12);
        assert_eq!(d.peak_pmu, PmuId(101));
    }

    #[test]
    fn flag_examples() {
        let f = frame(&[1.0, 0.6, 0.4]);
        let flags = flag_pmus(&f, 50.0).unwrap();
        assert_eq!(flags.iter().map(|f| f.pmu).collect::<Vec<_>>(), vec![PmuId(100), PmuId(101)]);
        assert_eq!(flags[1].rank, 2);
        let top = flag_pmus(&f, 100.0).unwrap();
        assert_eq!(top.len(), 1);
        let tied = frame(&[0.7, 0.7, 0.1]);
        assert_eq!(flag_pmus(&tied, 100.0).unwrap().len(), 2);
        assert!(flag_pmus(&f, 0.0).is_err());
        assert!(flag_pmus(&f, 100.5).is_err());
    }

    #[test]
    fn flags_empty_without_valid_pmus() {
        let f = SpectrumFrame::from_spectra(
            t0(),
            60,
            vec![PmuSpectrum {
                pmu: PmuId(1),
                valid: false,
                magnitudes: vec![],
            }],
        );
        assert!(f.dominant.is_none());
        assert!(flag_pmus(&f, 50.0).unwrap().is_empty());
    }

    #[test]
    fn correlation_examples() {
        let r: Vec<f64> = (0..30).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let twice: Vec<f64> = r.iter().map(|v| 2.0 * v).collect();
        let anti: Vec<f64> = r.iter().map(|v| 1.0 - v).collect();
        let flat = vec![0.5; 30];
        let spectra = [&r, &twice, &anti, &flat]
            .iter()
            .enumerate()
            .map(|(i, v)| PmuSpectrum {
                pmu: PmuId(i as u32),
                valid: true,
                magnitudes: (*v).clone(),
            })
            .collect();
        let f = SpectrumFrame::from_spectra(t0(), 60, spectra);
        let c = correlation_to_reference(&f, PmuId(0)).unwrap();
        assert!((c[&PmuId(0)] - 1.0).abs() < 1e-12);
        assert!((c[&PmuId(1)] - 1.0).abs() < 1e-12);
        assert!((c[&PmuId(2)] + 1.0).abs() < 1e-12);
        assert_eq!(c[&PmuId(3)], 0.0);
        assert!(correlation_to_reference(&f, PmuId(9)).is_err());
    }

    #[test]
    fn window_spec_validation() {
        let spec = WindowSpec::new(3, t0(), t0() + Duration::seconds(30), Attribute::VPm);
        assert!(spec.validate().is_err());
        let spec = WindowSpec::new(10, t0(), t0() + Duration::seconds(5), Attribute::VPm);
        assert!(spec.validate().is_err());
        let mut spec = WindowSpec::new(2, t0(), t0() + Duration::seconds(7), Attribute::VPm);
        assert_eq!(spec.window_starts().len(), 3);
        spec.stride_seconds = 1;
        assert_eq!(spec.window_starts().len(), 6);
    }
}
