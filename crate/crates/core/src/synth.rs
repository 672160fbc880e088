//! Synthetic 12-lead ECGs built from Gaussian P, Q, R, S and T waves.
//!
//! Used by tests, the acceptance suite and the CLI smoke paths; the output is
//! fully determined by the config (including its seed).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::record::{EcgRecord, Lead, LeadName};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub rate: u32,
    pub duration_secs: f64,
    pub bpm: f64,
    /// Relative beat-to-beat RR jitter (uniform ±).
    pub rr_jitter: f64,
    pub noise_std: f64,
    /// Amplitude of a 0.2 Hz sinusoidal baseline wander, in mV.
    pub wander_mv: f64,
    /// Mains interference `(frequency Hz, amplitude mV)`.
    pub mains: Option<(f64, f64)>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            rate: 250,
            duration_secs: 10.0,
            bpm: 72.0,
            rr_jitter: 0.03,
            noise_std: 0.0,
            wander_mv: 0.0,
            mains: None,
            seed: 0,
        }
    }
}

/// One Gaussian wave component: (offset from R in s, width in s, amplitude in mV).
type Wave = (f64, f64, f64);

const LEAD_II_WAVES: [Wave; 5] = [
    (-0.20, 0.025, 0.15),   // P
    (-0.035, 0.010, -0.12), // Q
    (0.0, 0.011, 1.20),     // R
    (0.035, 0.012, -0.28),  // S
    (0.30, 0.055, 0.32),    // T
];

/// Per-lead gains applied to (P, QRS, T).
fn lead_gains(lead: LeadName) -> (f64, f64, f64) {
    match lead {
        LeadName::I => (0.6, 0.7, 0.6),
        LeadName::II => (1.0, 1.0, 1.0),
        LeadName::III => (0.4, 0.5, 0.3),
        LeadName::AVL => (0.3, 0.35, 0.25),
        LeadName::AVR => (-0.7, -0.8, -0.7),
        LeadName::AVF => (0.7, 0.75, 0.6),
        LeadName::V1 => (0.3, -0.6, -0.2),
        LeadName::V2 => (0.4, 0.6, 0.8),
        LeadName::V3 => (0.5, 0.9, 0.9),
        LeadName::V4 => (0.5, 1.3, 0.8),
        LeadName::V5 => (0.5, 1.1, 0.7),
        LeadName::V6 => (0.5, 0.9, 0.6),
    }
}

/// A synthetic record plus the true R-peak sample positions.
#[derive(Debug, Clone)]
pub struct SynthEcg {
    pub record: EcgRecord,
    pub r_peaks: Vec<usize>,
}

fn beat_times(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let rr = 60.0 / cfg.bpm;
    let mut t = 0.25 + rng.random::<f64>() * rr * 0.5;
    let mut beats = Vec::new();
    // Leave room for the P wave before the first beat and the T wave after the last.
    while t < cfg.duration_secs - 0.45 {
        beats.push(t);
        let jitter = if cfg.rr_jitter > 0.0 {
            rng.random_range(-cfg.rr_jitter..cfg.rr_jitter)
        } else {
            0.0
        };
        t += rr * (1.0 + jitter);
    }
    beats
}

pub fn synth_ecg(cfg: &SynthConfig) -> SynthEcg {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rate = cfg.rate as f64;
    let n = (cfg.duration_secs * rate).round() as usize;
    let beats = beat_times(cfg, &mut rng);
    let rr = 60.0 / cfg.bpm;
    // QT shortens with heart rate (Bazett-like).
    let t_scale = (rr / 1.0).sqrt();
    let wander_phase = rng.random::<f64>() * 2.0 * PI;
    let mains_phase = rng.random::<f64>() * 2.0 * PI;

    let leads = LeadName::CANONICAL
        .iter()
        .map(|&name| {
            let (gp, gqrs, gt) = lead_gains(name);
            let mut x = vec![0.0; n];
            for &b in &beats {
                for (k, &(off, width, amp)) in LEAD_II_WAVES.iter().enumerate() {
                    let (gain, off) = match k {
                        0 => (gp, off),
                        4 => (gt, off * t_scale),
                        _ => (gqrs, off),
                    };
                    let center = b + off;
                    let lo = (((center - 5.0 * width) * rate).floor().max(0.0)) as usize;
                    let hi = (((center + 5.0 * width) * rate).ceil() as usize).min(n);
                    for (i, v) in x.iter_mut().enumerate().take(hi).skip(lo) {
                        let t = i as f64 / rate - center;
                        *v += gain * amp * (-0.5 * (t / width).powi(2)).exp();
                    }
                }
            }
            for (i, v) in x.iter_mut().enumerate() {
                let t = i as f64 / rate;
                if cfg.wander_mv != 0.0 {
                    *v += cfg.wander_mv * (2.0 * PI * 0.2 * t + wander_phase).sin();
                }
                if let Some((f, a)) = cfg.mains {
                    *v += a * (2.0 * PI * f * t + mains_phase).sin();
                }
                if cfg.noise_std > 0.0 {
                    // Box-Muller
                    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                    let u2: f64 = rng.random();
                    *v += cfg.noise_std * (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos();
                }
            }
            Lead { name, samples: x }
        })
        .collect();

    let mut meta = BTreeMap::new();
    meta.insert("source".into(), "synthetic".into());
    meta.insert("bpm".into(), format!("{}", cfg.bpm));
    meta.insert("seed".into(), cfg.seed.to_string());
    let record = EcgRecord::new(leads, cfg.rate, meta).expect("synthetic record is valid");
    let r_peaks = beats.iter().map(|b| (b * rate).round() as usize).collect();
    SynthEcg { record, r_peaks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_sized() {
        let cfg = SynthConfig {
            seed: 9,
            noise_std: 0.01,
            ..Default::default()
        };
        let a = synth_ecg(&cfg);
        let b = synth_ecg(&cfg);
        assert_eq!(a.record, b.record);
        assert_eq!(a.record.len(), 2500);
        // ~72 bpm over 10 s
        assert!((10..=13).contains(&a.r_peaks.len()));
    }

    #[test]
    fn r_peaks_are_lead_ii_maxima() {
        let s = synth_ecg(&SynthConfig::default());
        let x = s.record.lead(LeadName::II).unwrap();
        for &p in &s.r_peaks {
            let lo = p.saturating_sub(10);
            let window = &x[lo..(p + 10).min(x.len())];
            let arg = window.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            assert!((lo + arg).abs_diff(p) <= 1);
        }
    }
}
