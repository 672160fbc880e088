//! Per-lead denoising, detrending and resampling to the canonical rate.
//!
//! ```text
//! reorder -> notch 50 Hz -> notch 60 Hz -> bandpass 0.5-100 Hz (order 4)
//!         -> highpass 0.05 Hz (order 4) -> db6 denoise (4 levels) -> resample
//! ```
//!
//! Every IIR stage is applied forward-backward.

pub mod filter;
pub mod resample;
pub mod wavelet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::record::{reorder_leads, EcgRecord, Lead};

pub use filter::{filter_zero_phase, FilterKind, FilterSpec, Sos};
pub use resample::{resample, Resampler};
pub use wavelet::{wavelet_denoise, Threshold, Wavelet};

pub const CANONICAL_RATE: u32 = 250;

/// Stage toggles and parameters. Deserializable from the CLI JSON config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub notch50: bool,
    pub notch60: bool,
    pub notch_q: f64,
    pub bandpass: Option<(f64, f64)>,
    pub bandpass_order: usize,
    pub highpass: Option<f64>,
    pub highpass_order: usize,
    /// `None` disables wavelet denoising.
    pub wavelet_levels: Option<usize>,
    pub target_rate: u32,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            notch50: true,
            notch60: true,
            notch_q: 30.0,
            bandpass: Some((0.5, 100.0)),
            bandpass_order: 4,
            highpass: Some(0.05),
            highpass_order: 4,
            wavelet_levels: Some(4),
            target_rate: CANONICAL_RATE,
        }
    }
}

impl PreprocessConfig {
    /// Filter chain for a given input rate. Notches at or above Nyquist are
    /// dropped and the bandpass upper edge is pulled below Nyquist, so
    /// low-rate sources (e.g. 100 Hz) still go through the chain.
    pub fn filter_chain(&self, rate: u32) -> Vec<FilterSpec> {
        let nyq = rate as f64 / 2.0;
        let mut chain = Vec::new();
        for (on, f) in [(self.notch50, 50.0), (self.notch60, 60.0)] {
            if on {
                if f < nyq {
                    chain.push(FilterSpec::notch(f, self.notch_q));
                } else {
                    log::debug!("skipping {f} Hz notch at {rate} Hz sampling");
                }
            }
        }
        if let Some((low, high)) = self.bandpass {
            let high = if high < nyq { high } else { 0.9 * nyq };
            chain.push(FilterSpec::bandpass(low, high, self.bandpass_order));
        }
        if let Some(cutoff) = self.highpass {
            chain.push(FilterSpec::highpass(cutoff, self.highpass_order));
        }
        chain
    }
}

/// Runs the full chain on one lead sampled at `rate`.
pub fn preprocess_lead(signal: &[f64], rate: u32, cfg: &PreprocessConfig) -> Result<Vec<f64>> {
    let mut x = signal.to_vec();
    for spec in cfg.filter_chain(rate) {
        x = filter_zero_phase(&x, rate as f64, &spec)?;
    }
    if let Some(levels) = cfg.wavelet_levels {
        x = wavelet_denoise(&x, &Wavelet::DB6, levels, Threshold::Universal)?;
    }
    resample(&x, rate, cfg.target_rate)
}

/// Canonicalizes lead order then preprocesses every lead in parallel.
pub fn preprocess_record(record: &EcgRecord, cfg: &PreprocessConfig) -> Result<EcgRecord> {
    let rec = reorder_leads(record.clone());
    let rate = rec.sampling_rate();
    let meta = rec.meta().clone();
    let leads = rec
        .into_leads()
        .into_par_iter()
        .map(|lead| {
            Ok(Lead {
                name: lead.name,
                samples: preprocess_lead(&lead.samples, rate, cfg)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EcgRecord::new(leads, cfg.target_rate, meta)
}
