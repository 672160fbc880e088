//! Multilevel orthogonal DWT with symmetric boundary extension and
//! MAD-based soft-threshold denoising.

use crate::error::{Error, Result};

/// An orthogonal wavelet given by its decomposition lowpass filter.
#[derive(Debug, Clone, Copy)]
pub struct Wavelet {
    pub name: &'static str,
    pub dec_lo: &'static [f64],
}

impl Wavelet {
    pub const DB6: Wavelet = Wavelet {
        name: "db6",
        dec_lo: &[
            -0.0010773010853084796,
            0.004777257510945511,
            0.0005538422011614961,
            -0.03158203931748603,
            0.027522865530305727,
            0.09750160558732304,
            -0.12976686756726194,
            -0.22626469396543983,
            0.31525035170919763,
            0.7511339080210954,
            0.49462389039845306,
            0.11154074335010947,
        ],
    };

    pub fn len(&self) -> usize {
        self.dec_lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dec_lo.is_empty()
    }

    /// Quadrature mirror of the lowpass filter.
    pub fn dec_hi(&self) -> Vec<f64> {
        let f = self.len();
        (0..f)
            .map(|j| {
                let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
                sign * self.dec_lo[f - 1 - j]
            })
            .collect()
    }
}

/// Half-sample symmetric extension index (`x[-1] = x[0]`, `x[n] = x[n-1]`).
fn sym_index(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -1 - i;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// One analysis step. Both outputs have length `floor((n + F - 1) / 2)`.
pub fn dwt(x: &[f64], wavelet: &Wavelet) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let f = wavelet.len();
    let hi = wavelet.dec_hi();
    let m = (n + f - 1) / 2;
    let mut approx = Vec::with_capacity(m);
    let mut detail = Vec::with_capacity(m);
    for k in 0..m {
        let (mut a, mut d) = (0.0, 0.0);
        for j in 0..f {
            let v = x[sym_index(2 * k as isize + 1 - j as isize, n)];
            a += wavelet.dec_lo[j] * v;
            d += hi[j] * v;
        }
        approx.push(a);
        detail.push(d);
    }
    (approx, detail)
}

/// Inverse of [`dwt`] for a signal of original length `n`.
pub fn idwt(approx: &[f64], detail: &[f64], n: usize, wavelet: &Wavelet) -> Vec<f64> {
    let f = wavelet.len() as isize;
    let hi = wavelet.dec_hi();
    let m = approx.len() as isize;
    (0..n as isize)
        .map(|i| {
            let k_lo = ((i - 1).max(0) + 1) / 2;
            let k_hi = ((i + f - 2) / 2).min(m - 1);
            (k_lo..=k_hi)
                .filter_map(|k| {
                    let j = 2 * k + 1 - i;
                    (0..f).contains(&j).then(|| {
                        let (j, k) = (j as usize, k as usize);
                        wavelet.dec_lo[j] * approx[k] + hi[j] * detail[k]
                    })
                })
                .sum()
        })
        .collect()
}

/// Coefficients of a `levels`-deep decomposition.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub approx: Vec<f64>,
    /// `details[0]` is level 1 (finest).
    pub details: Vec<Vec<f64>>,
    lengths: Vec<usize>,
}

pub fn wavedec(x: &[f64], wavelet: &Wavelet, levels: usize) -> Decomposition {
    let mut approx = x.to_vec();
    let mut details = Vec::with_capacity(levels);
    let mut lengths = Vec::with_capacity(levels);
    for _ in 0..levels {
        lengths.push(approx.len());
        let (a, d) = dwt(&approx, wavelet);
        approx = a;
        details.push(d);
    }
    Decomposition {
        approx,
        details,
        lengths,
    }
}

pub fn waverec(dec: &Decomposition, wavelet: &Wavelet) -> Vec<f64> {
    let mut approx = dec.approx.clone();
    for (detail, &n) in dec.details.iter().zip(&dec.lengths).rev() {
        approx = idwt(&approx, detail, n, wavelet);
    }
    approx
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// τ = σ·√(2 ln n) per detail level with σ = median(|d|) / 0.6745.
    Universal,
    /// The same τ for every detail level.
    Fixed(f64),
}

pub fn soft_threshold(v: f64, tau: f64) -> f64 {
    v.signum() * (v.abs() - tau).max(0.0)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Soft-threshold denoising of detail levels `1..=levels`; the coarsest
/// approximation is left untouched.
pub fn wavelet_denoise(signal: &[f64], wavelet: &Wavelet, levels: usize, threshold: Threshold) -> Result<Vec<f64>> {
    if levels == 0 {
        return Err(Error::InvalidArgument("wavelet depth must be at least 1".into()));
    }
    let needed = (1usize << levels) * wavelet.len();
    if signal.len() < needed {
        return Err(Error::SignalTooShort {
            needed,
            got: signal.len(),
        });
    }
    let n = signal.len() as f64;
    let mut dec = wavedec(signal, wavelet, levels);
    for d in &mut dec.details {
        let tau = match threshold {
            Threshold::Fixed(t) => t,
            Threshold::Universal => {
                let sigma = median(d.iter().map(|v| v.abs()).collect()) / 0.6745;
                sigma * (2.0 * n.ln()).sqrt()
            }
        };
        if tau > 0.0 {
            for v in d.iter_mut() {
                *v = soft_threshold(*v, tau);
            }
        }
    }
    Ok(waverec(&dec, wavelet))
}
