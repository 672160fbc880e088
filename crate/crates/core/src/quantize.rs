//! Voltage and interval codebooks.
//!
//! Voltages use 25 equal-width edges between the 1st and 99th percentiles of
//! the pooled fitting data; intervals use 25 equal-count edges of the
//! inter-key-point gap distribution. Both split the line into 26 bins, one
//! per letter. A value maps to the first bin whose upper edge is not below
//! it; a letter maps back to its bin's upper edge, with the open top bin
//! represented by twice the last edge.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::CODEBOOK_FORMAT_VERSION;

pub const EDGES: usize = 25;
pub const BINS: usize = 26;
/// Step used to separate tied interval edges.
pub const TIE_EPS: f64 = 1e-9;

pub const LOWER: [char; BINS] = [
    'a', 'b', 'c', 'd', 'e', 'f', 'g', 'h', 'i', 'j', 'k', 'l', 'm', 'n', 'o', 'p', 'q', 'r', 's', 't', 'u', 'v', 'w',
    'x', 'y', 'z',
];
pub const UPPER: [char; BINS] = [
    'A', 'B', 'C', 'D', 'E', 'F', 'G', 'H', 'I', 'J', 'K', 'L', 'M', 'N', 'O', 'P', 'Q', 'R', 'S', 'T', 'U', 'V', 'W',
    'X', 'Y', 'Z',
];

pub fn voltage_index(c: char) -> Option<usize> {
    c.is_ascii_lowercase().then(|| (c as u8 - b'a') as usize)
}

pub fn interval_index(c: char) -> Option<usize> {
    c.is_ascii_uppercase().then(|| (c as u8 - b'A') as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeBook {
    pub version: String,
    pub rate: u32,
    /// V₀..V₂₄ in millivolts.
    pub v_edges: Vec<f64>,
    /// T₀..T₂₄ in samples at `rate`.
    pub t_edges: Vec<f64>,
}

/// Diagnostics from [`fit_codebook`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub voltage_count: usize,
    pub interval_count: usize,
    pub distinct_intervals: usize,
    /// Set when tied interval quantiles had to be separated.
    pub tied_interval_edges: bool,
}

impl CodeBook {
    pub fn new(v_edges: Vec<f64>, t_edges: Vec<f64>, rate: u32) -> Result<Self> {
        let cb = CodeBook {
            version: CODEBOOK_FORMAT_VERSION.to_string(),
            rate,
            v_edges,
            t_edges,
        };
        cb.validate()?;
        Ok(cb)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CODEBOOK_FORMAT_VERSION {
            return Err(Error::CodebookVersion {
                expected: CODEBOOK_FORMAT_VERSION.into(),
                found: self.version.clone(),
            });
        }
        if self.rate == 0 {
            return Err(Error::InvalidCodebook("rate must be positive".into()));
        }
        for (name, edges) in [("v_edges", &self.v_edges), ("t_edges", &self.t_edges)] {
            if edges.len() != EDGES {
                return Err(Error::InvalidCodebook(format!(
                    "{name} must hold {EDGES} values, found {}",
                    edges.len()
                )));
            }
            if edges.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidCodebook(format!("{name} contains a non-finite value")));
            }
            if let Some(i) = edges.windows(2).position(|w| w[0] >= w[1]) {
                return Err(Error::InvalidCodebook(format!(
                    "{name} not strictly ascending at index {}",
                    i + 1
                )));
            }
        }
        // The top-bin sentinels 2·V₂₄ and 2·T₂₄ must lie above the last edge.
        if self.v_edges[EDGES - 1] <= 0.0 {
            return Err(Error::InvalidCodebook("V24 must be positive".into()));
        }
        if self.t_edges[0] <= 0.0 {
            return Err(Error::InvalidCodebook("t_edges must be positive".into()));
        }
        Ok(())
    }

    pub fn v_sentinel(&self) -> f64 {
        2.0 * self.v_edges[EDGES - 1]
    }

    pub fn t_sentinel(&self) -> f64 {
        2.0 * self.t_edges[EDGES - 1]
    }

    /// Width of one voltage bin inside `[V₀, V₂₄]`.
    pub fn voltage_bin_width(&self) -> f64 {
        (self.v_edges[EDGES - 1] - self.v_edges[0]) / (EDGES - 1) as f64
    }

    /// `f_V`: first bin whose upper edge is ≥ `x`; values above V₂₄ go to 'z'.
    pub fn map_voltage(&self, x: f64) -> char {
        LOWER[self.v_edges.partition_point(|&v| v < x)]
    }

    /// `g_V`: upper edge of the letter's bin, `2·V₂₄` for 'z'.
    pub fn unmap_voltage(&self, c: char) -> Result<f64> {
        let i = voltage_index(c).ok_or(Error::OutsideAlphabet(c))?;
        Ok(if i == EDGES { self.v_sentinel() } else { self.v_edges[i] })
    }

    /// `f_T` for a gap of `d ≥ 1` samples.
    pub fn map_interval(&self, d: usize) -> Result<char> {
        if d < 1 {
            return Err(Error::InvalidArgument("interval must be at least one sample".into()));
        }
        let d = d as f64;
        Ok(UPPER[self.t_edges.partition_point(|&t| t < d)])
    }

    /// `g_T`: rounded upper edge (at least 1), `round(2·T₂₄)` for 'Z'.
    pub fn unmap_interval(&self, c: char) -> Result<usize> {
        let i = interval_index(c).ok_or(Error::OutsideAlphabet(c))?;
        let t = if i == EDGES { self.t_sentinel() } else { self.t_edges[i] };
        Ok((t.round() as usize).max(1))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cb: CodeBook = serde_json::from_str(text)?;
        cb.validate()?;
        Ok(cb)
    }
}

pub fn save_codebook(cb: &CodeBook, path: &Path) -> Result<()> {
    fs::write(path, cb.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn load_codebook(path: &Path) -> Result<CodeBook> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CodeBook::from_json(&text)
}

/// Linear-interpolation percentile of sorted data (`p` in [0, 100]).
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Nearest-rank quantile of sorted data: element `ceil(q·n) − 1`, with
/// `q = num / den`.
pub fn nearest_rank<T: Copy>(sorted: &[T], num: usize, den: usize) -> T {
    let n = sorted.len();
    let rank = (num * n).div_ceil(den).max(1);
    sorted[rank - 1]
}

pub const MIN_VOLTAGES: usize = 10_000;
pub const MIN_INTERVALS: usize = 100;

/// Fits a codebook from pooled voltages and inter-key-point gaps (in samples
/// at `rate`).
pub fn fit_codebook(voltages: &[f64], intervals: &[usize], rate: u32) -> Result<(CodeBook, FitReport)> {
    if voltages.len() < MIN_VOLTAGES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_VOLTAGES} voltage samples, got {}",
            voltages.len()
        )));
    }
    if intervals.len() < MIN_INTERVALS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_INTERVALS} intervals, got {}",
            intervals.len()
        )));
    }
    if voltages.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("voltages must be finite".into()));
    }
    if intervals.contains(&0) {
        return Err(Error::InvalidArgument("intervals must be at least one sample".into()));
    }

    let mut v = voltages.to_vec();
    v.sort_by(f64::total_cmp);
    let v_lo = percentile_sorted(&v, 1.0);
    let v_hi = percentile_sorted(&v, 99.0);
    if v_hi <= v_lo {
        return Err(Error::Degenerate(format!(
            "1st and 99th voltage percentiles coincide ({v_lo})"
        )));
    }
    let step = (v_hi - v_lo) / (EDGES - 1) as f64;
    let mut v_edges: Vec<f64> = (0..EDGES).map(|k| v_lo + step * k as f64).collect();
    v_edges[EDGES - 1] = v_hi;

    let mut t = intervals.to_vec();
    t.sort_unstable();
    let mut distinct = t.clone();
    distinct.dedup();
    // Edge k closes bin k: the (k+1)/26 quantile, so each bin holds ~n/26.
    let mut t_edges: Vec<f64> = (0..EDGES).map(|k| nearest_rank(&t, k + 1, BINS) as f64).collect();
    let mut tied = false;
    for k in 1..EDGES {
        if t_edges[k] <= t_edges[k - 1] {
            t_edges[k] = t_edges[k - 1] + TIE_EPS;
            tied = true;
        }
    }
    if tied {
        log::warn!(
            "interval quantiles tie ({} distinct values for {BINS} bins); edges separated by {TIE_EPS}",
            distinct.len()
        );
    }
    let report = FitReport {
        voltage_count: v.len(),
        interval_count: t.len(),
        distinct_intervals: distinct.len(),
        tied_interval_edges: tied,
    };
    Ok((CodeBook::new(v_edges, t_edges, rate)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_book() -> CodeBook {
        // V_j = j + 1, T_j = 2(j + 1)
        CodeBook::new(
            (0..EDGES).map(|j| j as f64 + 1.0).collect(),
            (0..EDGES).map(|j| 2.0 * (j as f64 + 1.0)).collect(),
            250,
        )
        .unwrap()
    }

    #[test]
    fn voltage_bins_are_closed_above() {
        let cb = unit_book();
        assert_eq!(cb.map_voltage(1.0), 'a');
        assert_eq!(cb.map_voltage(-100.0), 'a');
        assert_eq!(cb.map_voltage(1.0000001), 'b');
        assert_eq!(cb.map_voltage(25.0), 'y');
        assert_eq!(cb.map_voltage(25.0001), 'z');
        assert_eq!(cb.map_voltage(1e9), 'z');
    }

    #[test]
    fn hand_scan_with_integer_edges() {
        let cb = CodeBook::new((0..EDGES).map(|j| j as f64).collect(), unit_book().t_edges, 250).unwrap();
        // min{j : 23.5 ≤ j} = 24
        assert_eq!(cb.map_voltage(23.5), 'y');
        assert_eq!(cb.map_voltage(0.0), 'a');
        assert_eq!(cb.unmap_voltage('a').unwrap(), 0.0);
        assert_eq!(cb.unmap_voltage('z').unwrap(), 48.0);
    }

    #[test]
    fn interval_maps() {
        let cb = unit_book();
        assert_eq!(cb.map_interval(2).unwrap(), 'A');
        assert_eq!(cb.map_interval(1).unwrap(), 'A');
        assert_eq!(cb.map_interval(3).unwrap(), 'B');
        assert_eq!(cb.map_interval(51).unwrap(), 'Z');
        assert!(cb.map_interval(0).is_err());
        assert_eq!(cb.unmap_interval('A').unwrap(), 2);
        assert_eq!(cb.unmap_interval('Z').unwrap(), 100);
        assert!(cb.unmap_interval('a').is_err());
        assert!(matches!(cb.unmap_voltage('Q'), Err(Error::OutsideAlphabet('Q'))));
    }

    #[test]
    fn unmap_interval_floor_clamps_to_one() {
        let mut t: Vec<f64> = (0..EDGES).map(|j| j as f64 + 0.2).collect();
        t[0] = 0.2;
        let cb = CodeBook::new(unit_book().v_edges, t, 250).unwrap();
        assert_eq!(cb.unmap_interval('A').unwrap(), 1);
    }

    #[test]
    fn nearest_rank_quantiles() {
        let v: Vec<usize> = (1..=2600).collect();
        assert_eq!(nearest_rank(&v, 1, 26), 100);
        assert_eq!(nearest_rank(&v, 25, 26), 2500);
        assert_eq!(nearest_rank(&[7usize], 1, 26), 7);
    }

    #[test]
    fn validation_catches_tampering() {
        let mut cb = unit_book();
        cb.v_edges.swap(3, 4);
        assert!(matches!(cb.validate(), Err(Error::InvalidCodebook(_))));
        let mut cb = unit_book();
        cb.t_edges.pop();
        assert!(cb.validate().is_err());
        let mut cb = unit_book();
        cb.version = "0".into();
        assert!(matches!(cb.validate(), Err(Error::CodebookVersion { .. })));
    }

    #[test]
    fn missing_field_is_a_parse_error() {
        let text = r#"{"version":"1","rate":250,"v_edges":[1,2]}"#;
        assert!(matches!(CodeBook::from_json(text), Err(Error::Parse(_))));
    }

    #[test]
    fn tied_intervals_are_flagged_and_separated() {
        let voltages: Vec<f64> = (0..MIN_VOLTAGES).map(|i| i as f64 / 100.0).collect();
        let intervals: Vec<usize> = (0..500).map(|i| 1 + i % 5).collect();
        let (cb, report) = fit_codebook(&voltages, &intervals, 250).unwrap();
        assert!(report.tied_interval_edges);
        assert_eq!(report.distinct_intervals, 5);
        assert!(cb.t_edges.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn constant_voltages_are_degenerate() {
        let voltages = vec![0.3; MIN_VOLTAGES];
        let intervals: Vec<usize> = (1..=200).collect();
        assert!(matches!(
            fit_codebook(&voltages, &intervals, 250),
            Err(Error::Degenerate(_))
        ));
    }
}
