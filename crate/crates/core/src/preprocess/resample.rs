//! Rational-ratio polyphase resampling with a Kaiser-windowed sinc kernel.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Taps per polyphase branch.
pub const TAPS_PER_PHASE: usize = 64;
pub const KAISER_BETA: f64 = 8.6;
/// Cutoff as a fraction of the lower of the two Nyquist frequencies.
const ROLLOFF: f64 = 0.95;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Precomputed polyphase filter bank for an `up / down` rate change.
#[derive(Debug, Clone)]
pub struct Resampler {
    up: usize,
    down: usize,
    /// `phases[p][t]` weights input sample `base - HALF + 1 + t` for output
    /// instants at fractional offset `p / up` past `base`.
    phases: Vec<Vec<f64>>,
}

impl Resampler {
    pub fn new(from_rate: u32, to_rate: u32) -> Result<Self> {
        if from_rate == 0 || to_rate == 0 {
            return Err(Error::InvalidArgument("sampling rates must be positive".into()));
        }
        let g = gcd(from_rate as u64, to_rate as u64);
        let up = (to_rate as u64 / g) as usize;
        let down = (from_rate as u64 / g) as usize;
        // Cycles per input sample.
        let cutoff = 0.5 * ROLLOFF * (up as f64 / down as f64).min(1.0);
        let half = (TAPS_PER_PHASE / 2) as f64;
        let i0_beta = bessel_i0(KAISER_BETA);
        let phases = (0..up)
            .map(|p| {
                let frac = p as f64 / up as f64;
                let mut taps: Vec<f64> = (0..TAPS_PER_PHASE)
                    .map(|t| {
                        // Distance from the output instant to the input sample.
                        let d = frac - (t as f64 - half + 1.0);
                        let r = d / half;
                        if r.abs() >= 1.0 {
                            return 0.0;
                        }
                        let window = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0_beta;
                        2.0 * cutoff * sinc(2.0 * cutoff * d) * window
                    })
                    .collect();
                let sum: f64 = taps.iter().sum();
                for v in &mut taps {
                    *v /= sum;
                }
                taps
            })
            .collect();
        Ok(Resampler { up, down, phases })
    }

    pub fn ratio(&self) -> (usize, usize) {
        (self.up, self.down)
    }

    /// Output length for `n` input samples: `round(n * up / down)`.
    pub fn output_len(&self, n: usize) -> usize {
        ((n as u128 * self.up as u128 * 2 + self.down as u128) / (2 * self.down as u128)) as usize
    }

    pub fn process(&self, x: &[f64]) -> Vec<f64> {
        if self.up == self.down {
            return x.to_vec();
        }
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let half = TAPS_PER_PHASE as isize / 2;
        let out_len = self.output_len(n);
        let at = |i: isize| -> f64 {
            // Whole-sample reflection about the endpoints.
            if n == 1 {
                return x[0];
            }
            let period = 2 * (n as isize - 1);
            let mut j = i.rem_euclid(period);
            if j >= n as isize {
                j = period - j;
            }
            x[j as usize]
        };
        (0..out_len)
            .map(|m| {
                let pos = m * self.down;
                let base = (pos / self.up) as isize;
                let taps = &self.phases[pos % self.up];
                let start = base - half + 1;
                taps.iter().enumerate().map(|(t, w)| w * at(start + t as isize)).sum()
            })
            .collect()
    }
}

/// Resamples `signal` from `from_rate` to `to_rate` Hz.
pub fn resample(signal: &[f64], from_rate: u32, to_rate: u32) -> Result<Vec<f64>> {
    Ok(Resampler::new(from_rate, to_rate)?.process(signal))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, rate: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * freq * i as f64 / rate).sin()).collect()
    }

    /// Least-squares amplitude of a known-frequency sinusoid.
    fn amplitude(x: &[f64], freq: f64, rate: f64) -> f64 {
        let (mut s, mut c) = (0.0, 0.0);
        for (i, v) in x.iter().enumerate() {
            let w = 2.0 * PI * freq * i as f64 / rate;
            s += v * w.sin();
            c += v * w.cos();
        }
        2.0 * (s * s + c * c).sqrt() / x.len() as f64
    }

    #[test]
    fn identity_when_rates_match() {
        let x = sine(3.0, 250.0, 100);
        assert_eq!(resample(&x, 250, 250).unwrap(), x);
    }

    #[test]
    fn output_length_rounds() {
        assert_eq!(resample(&vec![0.0; 1000], 100, 250).unwrap().len(), 2500);
        assert_eq!(resample(&vec![0.0; 5000], 500, 250).unwrap().len(), 2500);
        assert_eq!(resample(&vec![0.0; 5001], 500, 250).unwrap().len(), 2501);
        assert_eq!(resample(&[0.0; 7], 360, 250).unwrap().len(), 5);
    }

    #[test]
    fn downsampling_preserves_5hz_amplitude() {
        let x = sine(5.0, 500.0, 5000);
        let y = resample(&x, 500, 250).unwrap();
        assert_eq!(y.len(), 2500);
        let a = amplitude(&y, 5.0, 250.0);
        assert!((a - 1.0).abs() <= 0.02, "amplitude {a}");
        // Peak alignment: y[k] samples x at 2k.
        for k in 100..2400 {
            assert!((y[k] - x[2 * k]).abs() < 1e-3);
        }
    }

    #[test]
    fn passband_within_one_db() {
        for (from, to) in [(500, 250), (100, 250), (360, 250)] {
            let nyq = from.min(to) as f64 / 2.0;
            for frac in [0.05, 0.3, 0.6, 0.8] {
                let f = nyq * frac;
                let x = sine(f, from as f64, 4 * from as usize);
                let y = resample(&x, from, to).unwrap();
                let trim = &y[to as usize / 2..y.len() - to as usize / 2];
                let a = amplitude(trim, f, to as f64);
                let db = 20.0 * a.log10();
                assert!(db.abs() <= 1.0, "{from}->{to} at {f} Hz: {db} dB");
            }
        }
    }

    #[test]
    fn constant_is_preserved() {
        let y = resample(&vec![2.5; 300], 500, 250).unwrap();
        assert!(y.iter().all(|v| (v - 2.5).abs() < 1e-12));
    }
}
