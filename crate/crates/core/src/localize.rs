//! Epicenter candidate ranking and the Gaussian density field drawn under the
//! network view.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GridTopology, PmuId, Position};
use crate::spectral::SpectrumFrame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub pmu: PmuId,
    pub magnitude: f64,
    pub rank: usize,
}

/// Valid PMUs ordered by magnitude at the frame's dominant frequency,
/// strongest first, ties broken by PMU id.
pub fn rank_epicenter_candidates(frame: &SpectrumFrame) -> Vec<Candidate> {
    let Some(d) = frame.dominant else {
        return Vec::new();
    };
    let mut scored: Vec<(PmuId, f64)> = frame
        .valid_spectra()
        .filter_map(|s| s.magnitudes.get(d.bin - 1).map(|&m| (s.pmu, m)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored
        .into_iter()
        .enumerate()
        .map(|(i, (pmu, magnitude))| Candidate {
            pmu,
            magnitude,
            rank: i + 1,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BoundingBox {
    pub fn of(points: &[Position]) -> Option<Self> {
        let first = points.first()?;
        let mut b = BoundingBox {
            min_x: first.x,
            min_y: first.y,
            max_x: first.x,
            max_y: first.y,
        };
        for p in points {
            b.min_x = b.min_x.min(p.x);
            b.min_y = b.min_y.min(p.y);
            b.max_x = b.max_x.max(p.x);
            b.max_y = b.max_y.max(p.y);
        }
        Some(b)
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }
}

/// Row-major scalar grid. Row `j` sits at `y = bbox.min_y + j * dy`, column
/// `i` at `x = bbox.min_x + i * dx`; the box includes the margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeField {
    pub bbox: BoundingBox,
    pub nx: usize,
    pub ny: usize,
    pub bandwidth: f64,
    pub values: Vec<f64>,
}

impl KdeField {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Position {
        let dx = self.bbox.width() / (self.nx - 1) as f64;
        let dy = self.bbox.height() / (self.ny - 1) as f64;
        Position {
            x: self.bbox.min_x + i as f64 * dx,
            y: self.bbox.min_y + j as f64 * dy,
        }
    }

    /// Grid index of the largest value (first in row-major order on ties).
    pub fn argmax(&self) -> (usize, usize) {
        let k = (0..self.values.len())
            .fold(0, |best, k| if self.values[k] > self.values[best] { k } else { best });
        (k % self.nx, k / self.nx)
    }
}

pub const DEFAULT_RESOLUTION: usize = 128;
/// Default bandwidth as a fraction of the point bounding-box diagonal.
pub const DEFAULT_BANDWIDTH_FRACTION: f64 = 0.08;

/// `field(g) = Σ w_p · exp(-|g - p|² / (2 bw²))` over a `resolution²` grid
/// spanning the point bounding box plus a 10% margin.
pub fn kde_field(
    positions: &[Position],
    weights: &[f64],
    bandwidth: Option<f64>,
    resolution: usize,
) -> Result<KdeField> {
    if positions.len() != weights.len() {
        return Err(Error::arg("one weight per position is required"));
    }
    if resolution < 16 {
        return Err(Error::arg("resolution must be at least 16"));
    }
    if let Some(bw) = bandwidth {
        if !(bw > 0.0) {
            return Err(Error::arg("bandwidth must be positive"));
        }
    }
    let Some(raw) = BoundingBox::of(positions) else {
        return Ok(KdeField {
            bbox: BoundingBox {
                min_x: 0.0,
                min_y: 0.0,
                max_x: 1.0,
                max_y: 1.0,
            },
            nx: resolution,
            ny: resolution,
            bandwidth: bandwidth.unwrap_or(1.0),
            values: vec![0.0; resolution * resolution],
        });
    };
    let bw = bandwidth.unwrap_or_else(|| {
        let d = raw.diagonal();
        if d > 0.0 {
            DEFAULT_BANDWIDTH_FRACTION * d
        } else {
            1.0
        }
    });
    // a degenerate extent gets a span of a few bandwidths so the grid is not a point
    let pad = |extent: f64| if extent > 0.0 { 0.1 * extent } else { 2.0 * bw };
    let (mx, my) = (pad(raw.width()), pad(raw.height()));
    let bbox = BoundingBox {
        min_x: raw.min_x - mx,
        min_y: raw.min_y - my,
        max_x: raw.max_x + mx,
        max_y: raw.max_y + my,
    };
    let n = resolution;
    let coord = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
    let inv = 1.0 / (2.0 * bw * bw);
    let mut values = vec![0.0; n * n];
    for j in 0..n {
        let y = coord(bbox.min_y, bbox.max_y, j);
        for i in 0..n {
            let x = coord(bbox.min_x, bbox.max_x, i);
            values[j * n + i] = positions
                .iter()
                .zip(weights)
                .map(|(p, &w)| {
                    let d2 = (x - p.x).powi(2) + (y - p.y).powi(2);
                    w * (-d2 * inv).exp()
                })
                .sum();
        }
    }
    Ok(KdeField {
        bbox,
        nx: n,
        ny: n,
        bandwidth: bw,
        values,
    })
}

/// Density field of the frame's per-PMU magnitude at the dominant frequency,
/// placed at each PMU's substation.
pub fn frame_kde(
    topology: &GridTopology,
    frame: &SpectrumFrame,
    bandwidth: Option<f64>,
    resolution: usize,
) -> Result<KdeField> {
    let mut positions = Vec::new();
    let mut weights = Vec::new();
    for s in frame.valid_spectra() {
        if let Some(m) = frame.magnitude_at_dominant(s.pmu) {
            positions.push(topology.pmu_position(s.pmu)?);
            weights.push(m);
        }
    }
    kde_field(&positions, &weights, bandwidth, resolution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::PmuSpectrum;
    use chrono::NaiveDate;

    fn frame(mags: &[(u32, f64)]) -> SpectrumFrame {
        let spectra = mags
            .iter()
            .map(|&(id, m)| {
                let mut v = vec![0.001; 150];
                v[24] = m;
                PmuSpectrum {
                    pmu: PmuId(id),
                    valid: true,
                    magnitudes: v,
                }
            })
            .collect();
        let t = NaiveDate::from_ymd_opt(2017, 4, 20).unwrap().and_hms_opt(21, 45, 0).unwrap();
        SpectrumFrame::from_spectra(t, 300, spectra)
    }

    #[test]
    fn five_pmu_frame_ranks_largest_peak_first() {
        // A..E with a common 2.5 Hz peak, D strongest
        let f = frame(&[(1, 0.004), (2, 0.006), (3, 0.003), (4, 0.0095), (5, 0.005)]);
        assert!((f.dominant.unwrap().frequency_hz - 2.5).abs() < 1e-12);
        let ranked = rank_epicenter_candidates(&f);
        let order: Vec<u32> = ranked.iter().map(|c| c.pmu.0).collect();
        assert_eq!(order, vec![4, 2, 5, 1, 3]);
        assert_eq!(ranked[0].rank, 1);
    }

    #[test]
    fn equal_magnitudes_rank_by_id() {
        let f = frame(&[(9, 0.01), (3, 0.01), (5, 0.01)]);
        let order: Vec<u32> = rank_epicenter_candidates(&f).iter().map(|c| c.pmu.0).collect();
        assert_eq!(order, vec![3, 5, 9]);
    }

    #[test]
    fn single_point_peaks_at_nearest_cell() {
        let p = Position { x: 10.0, y: -4.0 };
        let f = kde_field(&[p], &[1.0], Some(2.0), 33).unwrap();
        let (i, j) = f.argmax();
        let best = f.cell_center(i, j);
        // no other cell center is closer to the point
        for jj in 0..f.ny {
            for ii in 0..f.nx {
                let c = f.cell_center(ii, jj);
                let d = (c.x - p.x).hypot(c.y - p.y);
                assert!(d >= (best.x - p.x).hypot(best.y - p.y) - 1e-12);
            }
        }
    }

    #[test]
    fn mirrored_points_give_symmetric_field() {
        let pts = [Position { x: 0.0, y: 0.0 }, Position { x: 10.0, y: 6.0 }];
        let f = kde_field(&pts, &[1.0, 1.0], None, 64).unwrap();
        for j in 0..f.ny {
            for i in 0..f.nx {
                let a = f.at(i, j);
                let b = f.at(f.nx - 1 - i, f.ny - 1 - j);
                assert!((a - b).abs() < 1e-12, "({i},{j}) {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_weights_and_empty_inputs() {
        let pts = [Position { x: 0.0, y: 0.0 }, Position { x: 1.0, y: 1.0 }];
        let f = kde_field(&pts, &[0.0, 0.0], None, 16).unwrap();
        assert!(f.values.iter().all(|&v| v == 0.0));
        let e = kde_field(&[], &[], None, 16).unwrap();
        assert!(e.values.iter().all(|&v| v == 0.0));
        assert!(kde_field(&pts, &[1.0, 1.0], None, 8).is_err());
        assert!(kde_field(&pts, &[1.0, 1.0], Some(0.0), 16).is_err());
    }
}
