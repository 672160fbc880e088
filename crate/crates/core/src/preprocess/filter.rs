//! IIR filters realized as cascaded second-order sections, with optional
//! forward-backward (zero-phase) application.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One biquad, `a[0]` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + self.b[1] * z_inv + self.b[2] * z2) / (self.a[0] + self.a[1] * z_inv + self.a[2] * z2)
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2])
    }

    /// Steady-state transposed direct-form II state for a unit step input.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z2 = self.b[2] - self.a[2] * g;
        let z1 = self.b[1] - self.a[1] * g + z2;
        [z1, z2]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

impl Sos {
    /// Complex frequency response at `freq` Hz.
    pub fn response(&self, freq: f64, rate: f64) -> Complex64 {
        let w = 2.0 * PI * freq / rate;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn magnitude(&self, freq: f64, rate: f64) -> f64 {
        self.response(freq, rate).norm()
    }

    fn scale(&mut self, k: f64) {
        if let Some(first) = self.sections.first_mut() {
            for b in &mut first.b {
                *b *= k;
            }
        }
    }

    /// Per-section initial states for a constant input of value 1.
    fn step_states(&self) -> Vec<[f64; 2]> {
        let mut gain = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let zi = s.step_state();
                let out = [zi[0] * gain, zi[1] * gain];
                gain *= s.dc_gain();
                out
            })
            .collect()
    }

    fn run(&self, x: &mut [f64], init: Option<f64>) {
        let mut states = match init {
            Some(x0) => self.step_states().into_iter().map(|[a, b]| [a * x0, b * x0]).collect(),
            None => vec![[0.0; 2]; self.sections.len()],
        };
        for v in x.iter_mut() {
            let mut s = *v;
            for (sec, z) in self.sections.iter().zip(states.iter_mut()) {
                let y = sec.b[0] * s + z[0];
                z[0] = sec.b[1] * s - sec.a[1] * y + z[1];
                z[1] = sec.b[2] * s - sec.a[2] * y;
                s = y;
            }
            *v = s;
        }
    }

    /// Single causal pass, state initialized to the steady state of the first
    /// sample so a constant input produces no start-up transient.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        let x0 = y.first().copied();
        self.run(&mut y, x0);
        y
    }

    /// Forward-backward filtering with odd extension at both ends.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let pad = self.default_padlen().min(n.saturating_sub(1));
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let (first, last) = (x[0], x[n - 1]);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

        let x0 = ext[0];
        self.run(&mut ext, Some(x0));
        ext.reverse();
        let x0 = ext[0];
        self.run(&mut ext, Some(x0));
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }

    fn default_padlen(&self) -> usize {
        3 * (2 * self.sections.len() + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterKind {
    Notch { center: f64, q: f64 },
    Bandpass { low: f64, high: f64, order: usize },
    Highpass { cutoff: f64, order: usize },
    Lowpass { cutoff: f64, order: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub bidirectional: bool,
}

impl FilterSpec {
    pub fn notch(center: f64, q: f64) -> Self {
        FilterSpec {
            kind: FilterKind::Notch { center, q },
            bidirectional: true,
        }
    }

    pub fn bandpass(low: f64, high: f64, order: usize) -> Self {
        FilterSpec {
            kind: FilterKind::Bandpass { low, high, order },
            bidirectional: true,
        }
    }

    pub fn highpass(cutoff: f64, order: usize) -> Self {
        FilterSpec {
            kind: FilterKind::Highpass { cutoff, order },
            bidirectional: true,
        }
    }

    pub fn lowpass(cutoff: f64, order: usize) -> Self {
        FilterSpec {
            kind: FilterKind::Lowpass { cutoff, order },
            bidirectional: true,
        }
    }

    pub fn causal(mut self) -> Self {
        self.bidirectional = false;
        self
    }

    fn order(&self) -> usize {
        match self.kind {
            FilterKind::Notch { .. } => 2,
            FilterKind::Bandpass { order, .. } => 2 * order,
            FilterKind::Highpass { order, .. } | FilterKind::Lowpass { order, .. } => order,
        }
    }

    pub fn validate(&self, rate: f64) -> Result<()> {
        let nyq = rate / 2.0;
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match self.kind {
            FilterKind::Notch { center, q } => {
                if !(center > 0.0 && center < nyq) {
                    return bad(format!("notch center {center} Hz must lie in (0, {nyq})"));
                }
                if q <= 0.0 {
                    return bad(format!("notch Q must be positive, got {q}"));
                }
            }
            FilterKind::Bandpass { low, high, order } => {
                if !(low > 0.0 && low < high && high < nyq) {
                    return bad(format!("bandpass edges must satisfy 0 < {low} < {high} < {nyq}"));
                }
                if order == 0 {
                    return bad("filter order must be at least 1".into());
                }
            }
            FilterKind::Highpass { cutoff, order } | FilterKind::Lowpass { cutoff, order } => {
                if !(cutoff > 0.0 && cutoff < nyq) {
                    return bad(format!("cutoff {cutoff} Hz must lie in (0, {nyq})"));
                }
                if order == 0 {
                    return bad("filter order must be at least 1".into());
                }
            }
        }
        Ok(())
    }

    pub fn design(&self, rate: f64) -> Result<Sos> {
        self.validate(rate)?;
        Ok(match self.kind {
            FilterKind::Notch { center, q } => notch(center, q, rate),
            FilterKind::Bandpass { low, high, order } => butter_bandpass(low, high, order, rate),
            FilterKind::Highpass { cutoff, order } => butter_pass(cutoff, order, rate, true),
            FilterKind::Lowpass { cutoff, order } => butter_pass(cutoff, order, rate, false),
        })
    }
}

/// Applies `spec` to `signal`, zero-phase when `spec.bidirectional`.
pub fn filter_zero_phase(signal: &[f64], rate: f64, spec: &FilterSpec) -> Result<Vec<f64>> {
    let needed = 3 * spec.order() + 1;
    if signal.len() < needed {
        return Err(Error::SignalTooShort {
            needed,
            got: signal.len(),
        });
    }
    let sos = spec.design(rate)?;
    Ok(if spec.bidirectional {
        sos.filtfilt(signal)
    } else {
        sos.filter(signal)
    })
}

/// Second-order IIR notch, unity gain at DC and Nyquist.
fn notch(center: f64, q: f64, rate: f64) -> Sos {
    let w0 = 2.0 * PI * center / rate;
    let bw = w0 / q;
    let beta = (bw / 2.0).tan();
    let gain = 1.0 / (1.0 + beta);
    let c = w0.cos();
    Sos {
        sections: vec![Biquad {
            b: [gain, -2.0 * gain * c, gain],
            a: [1.0, -2.0 * gain * c, 2.0 * gain - 1.0],
        }],
    }
}

/// Analog Butterworth prototype poles (unit cutoff).
fn prototype_poles(order: usize) -> Vec<Complex64> {
    (0..order)
        .map(|k| {
            let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            Complex64::from_polar(1.0, theta)
        })
        .collect()
}

fn prewarp(freq: f64, rate: f64) -> f64 {
    2.0 * rate * (PI * freq / rate).tan()
}

fn bilinear(p: Complex64, rate: f64) -> Complex64 {
    let fs2 = 2.0 * rate;
    (fs2 + p) / (fs2 - p)
}

/// Groups digital poles into biquad denominators: conjugate pairs first,
/// then leftover real poles two at a time (a single real pole gets a
/// first-order denominator).
fn pole_sections(poles: &[Complex64]) -> Vec<[f64; 3]> {
    const IMAG_EPS: f64 = 1e-12;
    let mut out = Vec::new();
    let mut reals = Vec::new();
    for p in poles {
        if p.im > IMAG_EPS {
            out.push([1.0, -2.0 * p.re, p.norm_sqr()]);
        } else if p.im.abs() <= IMAG_EPS {
            reals.push(p.re);
        }
    }
    for pair in reals.chunks(2) {
        match *pair {
            [r1, r2] => out.push([1.0, -(r1 + r2), r1 * r2]),
            [r] => out.push([1.0, -r, 0.0]),
            _ => unreachable!(),
        }
    }
    out
}

fn butter_pass(cutoff: f64, order: usize, rate: f64, high: bool) -> Sos {
    let wc = prewarp(cutoff, rate);
    let poles: Vec<Complex64> = prototype_poles(order)
        .into_iter()
        .map(|p| if high { wc / p } else { p * wc })
        .map(|p| bilinear(p, rate))
        .collect();
    // Highpass zeros sit at z = 1, lowpass zeros at z = -1.
    let zero = if high { 1.0 } else { -1.0 };
    let mut sos = Sos {
        sections: pole_sections(&poles)
            .into_iter()
            .map(|a| {
                let b = if a[2] == 0.0 {
                    [1.0, -zero, 0.0]
                } else {
                    [1.0, -2.0 * zero, 1.0]
                };
                Biquad { b, a }
            })
            .collect(),
    };
    let reference = if high { rate / 2.0 } else { 0.0 };
    let g = sos.magnitude(reference, rate);
    sos.scale(1.0 / g);
    sos
}

fn butter_bandpass(low: f64, high: f64, order: usize, rate: f64) -> Sos {
    let w1 = prewarp(low, rate);
    let w2 = prewarp(high, rate);
    let bw = w2 - w1;
    let wo2 = w1 * w2;
    let mut poles = Vec::with_capacity(2 * order);
    for p in prototype_poles(order) {
        let p_lp = p * (bw / 2.0);
        let disc = (p_lp * p_lp - wo2).sqrt();
        poles.push(bilinear(p_lp + disc, rate));
        poles.push(bilinear(p_lp - disc, rate));
    }
    // One zero at z = 1 and one at z = -1 per section.
    let mut sos = Sos {
        sections: pole_sections(&poles)
            .into_iter()
            .map(|a| Biquad { b: [1.0, 0.0, -1.0], a })
            .collect(),
    };
    // Unity gain at the digital image of the analog centre frequency.
    let center = rate / PI * (wo2.sqrt() / (2.0 * rate)).atan();
    let g = sos.magnitude(center, rate);
    sos.scale(1.0 / g);
    sos
}
