//! Shared helpers and independent oracles for the integration tests.
#![allow(dead_code)]

use std::sync::OnceLock;

use ecg_abcde::codec::{fit_codebook_from_records, EncodeOptions};
use ecg_abcde::quantize::{CodeBook, EDGES};
use ecg_abcde::synth::{synth_ecg, SynthConfig};
use ecg_abcde::EcgRecord;

/// `(Dx)_i = x_i − 2x_{i+1} + x_{i+2}`, written out independently of the
/// library.
pub fn d2(x: &[f64]) -> Vec<f64> {
    (0..x.len() - 2).map(|i| x[i] - 2.0 * x[i + 1] + x[i + 2]).collect()
}

/// `Dᵀs`.
pub fn d2t(s: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; s.len() + 2];
    for (i, v) in s.iter().enumerate() {
        out[i] += v;
        out[i + 1] -= 2.0 * v;
        out[i + 2] += v;
    }
    out
}

pub fn primal_objective(y: &[f64], x: &[f64], lambda: f64) -> f64 {
    let fit: f64 = y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
    0.5 * fit + lambda * d2(x).iter().map(|v| v.abs()).sum::<f64>()
}

/// Reference solution of `min ½‖y − x‖² + λ‖Dx‖₁` by accelerated
/// projected gradient on the dual `min ½‖y − λDᵀs‖², ‖s‖∞ ≤ 1`, with
/// function-value restarts. Stops on a relative duality gap of `gap_tol`.
/// Returns `(x, primal objective, duality gap)`.
pub fn dual_reference(y: &[f64], lambda: f64, gap_tol: f64, max_iter: usize) -> (Vec<f64>, f64, f64) {
    let m = y.len() - 2;
    let step = 1.0 / (16.0 * lambda * lambda);
    let dual_loss = |s: &[f64]| -> f64 {
        let r = d2t(s);
        y.iter().zip(&r).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>() * 0.5
    };
    let y_norm2: f64 = y.iter().map(|v| v * v).sum::<f64>() * 0.5;
    let mut s = vec![0.0; m];
    let mut z = s.clone();
    let mut t = 1.0f64;
    let mut f_prev = dual_loss(&s);
    let mut best = (y.to_vec(), f64::INFINITY, f64::INFINITY);
    for it in 0..max_iter {
        // Gradient at z: −λD(y − λDᵀz).
        let r = d2t(&z);
        let x: Vec<f64> = y.iter().zip(&r).map(|(a, b)| a - lambda * b).collect();
        let g: Vec<f64> = d2(&x).into_iter().map(|v| -lambda * v).collect();
        let s_new: Vec<f64> = z.iter().zip(&g).map(|(a, b)| (a - step * b).clamp(-1.0, 1.0)).collect();
        let f_new = dual_loss(&s_new);
        let t_new = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        if f_new > f_prev {
            // Restart momentum.
            z = s.clone();
            t = 1.0;
            continue;
        }
        z = s_new
            .iter()
            .zip(&s)
            .map(|(a, b)| a + (t - 1.0) / t_new * (a - b))
            .collect();
        s = s_new;
        t = t_new;
        f_prev = f_new;
        if it % 50 == 0 || it + 1 == max_iter {
            let r = d2t(&s);
            let x: Vec<f64> = y.iter().zip(&r).map(|(a, b)| a - lambda * b).collect();
            let p = primal_objective(y, &x, lambda);
            let d = y_norm2 - f_new;
            let gap = p - d;
            if p < best.1 {
                best = (x, p, gap);
            }
            if gap <= gap_tol * p.abs().max(1.0) {
                break;
            }
        }
    }
    best
}

/// Reference solution by a log-barrier interior-point method on the dual
/// `min ½νᵀDDᵀν − (Dy)ᵀν` subject to `|ν_i| < λ`, with dense Newton steps.
/// Stops on a relative duality gap of `gap_tol`. Returns
/// `(x, primal objective, duality gap)`.
pub fn dual_barrier(y: &[f64], lambda: f64, gap_tol: f64) -> (Vec<f64>, f64, f64) {
    let m = y.len() - 2;
    let a: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| match i.abs_diff(j) {
                    0 => 6.0,
                    1 => -4.0,
                    2 => 1.0,
                    _ => 0.0,
                })
                .collect()
        })
        .collect();
    let b = d2(y);
    let quad = |v: &[f64]| -> f64 {
        let av: f64 = (0..m).map(|i| v[i] * (0..m).map(|j| a[i][j] * v[j]).sum::<f64>()).sum();
        0.5 * av - b.iter().zip(v).map(|(p, q)| p * q).sum::<f64>()
    };
    let barrier = |v: &[f64], t: f64| -> f64 {
        t * quad(v) - v.iter().map(|x| (lambda - x).ln() + (lambda + x).ln()).sum::<f64>()
    };
    let primal_of = |v: &[f64]| -> (Vec<f64>, f64, f64) {
        let x: Vec<f64> = y.iter().zip(d2t(v)).map(|(p, q)| p - q).collect();
        let p = primal_objective(y, &x, lambda);
        let gap = p + quad(v);
        (x, p, gap)
    };
    let mut nu = vec![0.0; m];
    let mut t = 1.0;
    loop {
        for _ in 0..100 {
            let grad: Vec<f64> = (0..m)
                .map(|i| {
                    let av: f64 = (0..m).map(|j| a[i][j] * nu[j]).sum();
                    t * (av - b[i]) + 1.0 / (lambda - nu[i]) - 1.0 / (lambda + nu[i])
                })
                .collect();
            let mut h: Vec<Vec<f64>> = a.iter().map(|row| row.iter().map(|v| t * v).collect()).collect();
            for i in 0..m {
                h[i][i] += (lambda - nu[i]).powi(-2) + (lambda + nu[i]).powi(-2);
            }
            let step = cholesky_solve(h, grad.iter().map(|g| -g).collect());
            let decrement: f64 = -grad.iter().zip(&step).map(|(g, d)| g * d).sum::<f64>();
            if decrement <= 1e-14 {
                break;
            }
            let mut alpha = 1.0f64;
            for (v, d) in nu.iter().zip(&step) {
                if *d != 0.0 {
                    let room = if *d > 0.0 { lambda - v } else { lambda + v };
                    alpha = alpha.min(0.99 * room / d.abs());
                }
            }
            let f0 = barrier(&nu, t);
            loop {
                let trial: Vec<f64> = nu.iter().zip(&step).map(|(v, d)| v + alpha * d).collect();
                if barrier(&trial, t) <= f0 - 0.25 * alpha * decrement || alpha < 1e-12 {
                    nu = trial;
                    break;
                }
                alpha *= 0.5;
            }
        }
        let (x, p, gap) = primal_of(&nu);
        if gap <= gap_tol * p.abs().max(1.0) || t > 1e18 {
            return (x, p, gap);
        }
        t *= 10.0;
    }
}

/// Solves `H v = r` for symmetric positive definite `H` by dense Cholesky.
fn cholesky_solve(mut h: Vec<Vec<f64>>, mut r: Vec<f64>) -> Vec<f64> {
    let n = r.len();
    for j in 0..n {
        let d = (h[j][j] - (0..j).map(|k| h[j][k] * h[j][k]).sum::<f64>()).sqrt();
        h[j][j] = d;
        for i in j + 1..n {
            h[i][j] = (h[i][j] - (0..j).map(|k| h[i][k] * h[j][k]).sum::<f64>()) / d;
        }
    }
    for i in 0..n {
        r[i] = (r[i] - (0..i).map(|k| h[i][k] * r[k]).sum::<f64>()) / h[i][i];
    }
    for i in (0..n).rev() {
        r[i] = (r[i] - (i + 1..n).map(|k| h[k][i] * r[k]).sum::<f64>()) / h[i][i];
    }
    r
}

/// A codebook fitted on a fixed set of synthetic records, shared within a
/// test binary.
pub fn synthetic_codebook() -> &'static CodeBook {
    static CB: OnceLock<CodeBook> = OnceLock::new();
    CB.get_or_init(|| {
        let recs = training_records(8);
        fit_codebook_from_records(&recs, &EncodeOptions::default()).unwrap().0
    })
}

pub fn training_records(count: u64) -> Vec<EcgRecord> {
    (0..count)
        .map(|s| {
            synth_ecg(&SynthConfig {
                seed: 10_000 + s,
                bpm: 60.0 + 60.0 * s as f64 / count.max(2) as f64,
                noise_std: 0.01,
                ..Default::default()
            })
            .record
        })
        .collect()
}

/// Codebook with `V_j = (j + 1)/10 − 1.2` and integer `T_j = j + 2`.
pub fn integer_codebook() -> CodeBook {
    CodeBook::new(
        (0..EDGES).map(|j| (j as f64 + 1.0) / 10.0 - 1.2).collect(),
        (0..EDGES).map(|j| j as f64 + 2.0).collect(),
        250,
    )
    .unwrap()
}
