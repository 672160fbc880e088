//! R-peak detection, peak-anchored time warping of reconstructions, and
//! fidelity metrics.
//!
//! Decoded leads rarely have the original length because interval letters
//! decode to bin upper bounds. [`align_by_peaks`] maps a reconstruction back
//! onto the original time axis using matched R-peaks as anchors.

use serde::{Deserialize, Serialize};

use crate::codec::{decode_record, EcgLanguageRecord};
use crate::error::{Error, Result};
use crate::quantize::CodeBook;
use crate::record::{EcgRecord, LeadName};

/// Minimum spacing between detected peaks, in seconds.
pub const REFRACTORY_SECS: f64 = 0.2;
/// Width of the moving-average envelope, in seconds.
pub const ENVELOPE_SECS: f64 = 0.1;
/// Envelope threshold as a fraction of its maximum.
pub const THRESHOLD_FRACTION: f64 = 0.3;
/// Largest distance between a matched original and reconstructed peak.
pub const MATCH_GATE_SECS: f64 = 0.3;
/// Derivative energy is clipped at this quantile before smoothing, so one
/// exaggerated beat cannot push the others under the threshold.
pub const ENERGY_CLIP_QUANTILE: f64 = 0.98;
/// Floor of the clip level as a fraction of the largest energy.
const ENERGY_CLIP_FLOOR: f64 = 0.1;

fn envelope(x: &[f64], rate: u32) -> Vec<f64> {
    let n = x.len();
    let mut energy: Vec<f64> = (0..n)
        .map(|i| {
            let d = (x[(i + 1).min(n - 1)] - x[i.saturating_sub(1)]) / 2.0;
            d * d
        })
        .collect();
    let mut sorted = energy.clone();
    let k = ((n - 1) as f64 * ENERGY_CLIP_QUANTILE).round() as usize;
    let (_, &mut q, _) = sorted.select_nth_unstable_by(k, f64::total_cmp);
    let top = energy.iter().cloned().fold(0.0, f64::max);
    let clip = q.max(ENERGY_CLIP_FLOOR * top);
    for e in &mut energy {
        *e = e.min(clip);
    }
    let half = ((ENVELOPE_SECS * rate as f64) / 2.0).round().max(1.0) as usize;
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + energy[i];
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Detects R-peaks: squared-derivative energy clipped at a high quantile,
/// moving-average envelope, threshold at a fraction of the envelope maximum, then refinement to the
/// sample of largest deviation from the local mean. Candidates closer than
/// the refractory period keep only the stronger one.
pub fn detect_r_peaks(x: &[f64], rate: u32) -> Vec<usize> {
    let n = x.len();
    if n < 3 || rate == 0 {
        return Vec::new();
    }
    let env = envelope(x, rate);
    let peak_env = env.iter().cloned().fold(0.0, f64::max);
    let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    if peak_env.is_nan() || peak_env <= 1e-18 * scale * scale {
        return Vec::new();
    }
    let thr = THRESHOLD_FRACTION * peak_env;
    let search = ((ENVELOPE_SECS * rate as f64) * 0.75).round() as usize;

    // (strength, index) per supra-threshold run
    let mut candidates = Vec::new();
    let mut i = 0;
    while i < n {
        if env[i] <= thr {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && env[i] > thr {
            i += 1;
        }
        let (arg, strength) =
            (start..i)
                .map(|k| (k, env[k]))
                .fold((start, f64::MIN), |best, c| if c.1 > best.1 { c } else { best });
        candidates.push((strength, refine(x, arg, search)));
    }

    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let refractory = (REFRACTORY_SECS * rate as f64).round() as usize;
    let mut kept: Vec<usize> = Vec::new();
    for (_, idx) in candidates {
        if kept.iter().all(|&k| k.abs_diff(idx) >= refractory) {
            kept.push(idx);
        }
    }
    kept.sort_unstable();
    kept
}

fn refine(x: &[f64], center: usize, half: usize) -> usize {
    let lo = center.saturating_sub(half);
    let hi = (center + half + 1).min(x.len());
    let mean = x[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
    let mut best = center;
    let mut best_dev = -1.0;
    for (k, v) in x.iter().enumerate().take(hi).skip(lo) {
        let dev = (v - mean).abs();
        if dev > best_dev {
            best_dev = dev;
            best = k;
        }
    }
    best
}

/// In-order greedy matching of reconstructed peaks to original peaks.
/// Each reconstructed peak is projected onto the original time axis
/// relative to the last matched pair, scaling by `ratio` (original samples
/// per reconstructed sample), so slow drift does not accumulate against the
/// gate.
pub fn match_peaks(orig: &[usize], recon: &[usize], ratio: f64, gate: f64) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let project = |pairs: &[(usize, usize)], r: usize| match pairs.last() {
        Some(&(po, pr)) => po as f64 + (r as f64 - pr as f64) * ratio,
        None => r as f64 * ratio,
    };
    let mut j = 0;
    for &o in orig {
        let o_f = o as f64;
        while j + 1 < recon.len()
            && (project(&pairs, recon[j + 1]) - o_f).abs() <= (project(&pairs, recon[j]) - o_f).abs()
        {
            j += 1;
        }
        if j < recon.len() && (project(&pairs, recon[j]) - o_f).abs() <= gate {
            if pairs.last().is_none_or(|&(po, pr)| o > po && recon[j] > pr) {
                pairs.push((o, recon[j]));
            }
            j += 1;
        }
    }
    pairs
}

fn interp(x: &[f64], s: f64) -> f64 {
    let last = x.len() - 1;
    let s = s.clamp(0.0, last as f64);
    let i = s.floor() as usize;
    if i >= last {
        return x[last];
    }
    let frac = s - i as f64;
    if frac == 0.0 {
        x[i]
    } else {
        x[i] + frac * (x[i + 1] - x[i])
    }
}

/// Uniform linear resampling to `len` samples, endpoints preserved.
pub fn resample_uniform(x: &[f64], len: usize) -> Vec<f64> {
    if len == 0 || x.is_empty() {
        return Vec::new();
    }
    if len == 1 {
        return vec![x[0]];
    }
    let step = (x.len() - 1) as f64 / (len - 1) as f64;
    (0..len).map(|t| interp(x, t as f64 * step)).collect()
}

/// Time map from output sample `t` to a fractional position in the
/// reconstruction. Between anchors it is linear; outside them it continues
/// with the slope of the nearest anchor segment.
fn warp_position(anchors: &[(usize, usize)], t: usize) -> f64 {
    let k = anchors.partition_point(|&(o, _)| o <= t);
    let (a, b) = if k == 0 {
        (anchors[0], anchors[1])
    } else if k >= anchors.len() {
        (anchors[anchors.len() - 2], anchors[anchors.len() - 1])
    } else {
        (anchors[k - 1], anchors[k])
    };
    let slope = (b.1 as f64 - a.1 as f64) / (b.0 as f64 - a.0 as f64);
    a.1 as f64 + (t as f64 - a.0 as f64) * slope
}

/// Warps `recon` onto the time axis of `orig`. The output always has
/// `orig.len()` samples. With fewer than two matched peaks this falls back to
/// uniform resampling.
pub fn align_by_peaks(orig: &[f64], recon: &[f64], rate: u32) -> Vec<f64> {
    let n = orig.len();
    if n == 0 || recon.is_empty() {
        return vec![recon.first().copied().unwrap_or(0.0); n];
    }
    let po = detect_r_peaks(orig, rate);
    let pr = detect_r_peaks(recon, rate);
    let ratio = if recon.len() > 1 {
        (n - 1) as f64 / (recon.len() - 1) as f64
    } else {
        1.0
    };
    let anchors = match_peaks(&po, &pr, ratio, MATCH_GATE_SECS * rate as f64);
    if anchors.len() < 2 {
        return resample_uniform(recon, n);
    }
    (0..n).map(|t| interp(recon, warp_position(&anchors, t))).collect()
}

/// Comparison of an original lead with its aligned reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub rmse: f64,
    pub pearson_r: f64,
    /// Symbols per original sample.
    pub compression_ratio: f64,
    pub peak_count_orig: usize,
    pub peak_count_recon: usize,
    /// Set when either input has zero variance; `pearson_r` is then 0.
    pub zero_variance: bool,
}

/// Pearson correlation, or `None` if either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

pub fn fidelity_metrics(orig: &[f64], recon_aligned: &[f64], symbols: usize, rate: u32) -> Result<FidelityReport> {
    if orig.len() != recon_aligned.len() {
        return Err(Error::InvalidArgument(format!(
            "fidelity needs equal lengths, got {} and {}",
            orig.len(),
            recon_aligned.len()
        )));
    }
    if orig.is_empty() {
        return Err(Error::InvalidArgument("fidelity of empty signals".into()));
    }
    let n = orig.len() as f64;
    let rmse = (orig
        .iter()
        .zip(recon_aligned)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let r = pearson(orig, recon_aligned);
    Ok(FidelityReport {
        rmse,
        pearson_r: r.unwrap_or(0.0),
        compression_ratio: symbols as f64 / n,
        peak_count_orig: detect_r_peaks(orig, rate).len(),
        peak_count_recon: detect_r_peaks(recon_aligned, rate).len(),
        zero_variance: r.is_none(),
    })
}

/// Per-lead fidelity of a whole record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordFidelity {
    pub leads: Vec<(LeadName, FidelityReport)>,
    pub mean_pearson_r: f64,
    pub mean_rmse: f64,
    pub compression_ratio: f64,
}

/// Decodes `lang`, aligns each lead to `orig` and scores it.
pub fn record_fidelity(orig: &EcgRecord, lang: &EcgLanguageRecord, cb: &CodeBook) -> Result<RecordFidelity> {
    let orig = crate::record::reorder_leads(orig.clone());
    let decoded = decode_record(lang, cb)?;
    let rate = orig.sampling_rate();
    let leads = orig
        .leads()
        .iter()
        .zip(&decoded.leads)
        .zip(lang.blocks())
        .map(|((o, d), block)| {
            let aligned = align_by_peaks(&o.samples, &d.samples, rate);
            Ok((o.name, fidelity_metrics(&o.samples, &aligned, block.len(), rate)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let k = leads.len() as f64;
    Ok(RecordFidelity {
        mean_pearson_r: leads.iter().map(|(_, r)| r.pearson_r).sum::<f64>() / k,
        mean_rmse: leads.iter().map(|(_, r)| r.rmse).sum::<f64>() / k,
        compression_ratio: lang.symbol_count() as f64 / (orig.len() as f64 * k),
        leads,
    })
}
