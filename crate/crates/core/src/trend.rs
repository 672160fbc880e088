//! L1 trend filtering and key-point extraction.
//!
//! Solves
//!
//! ```text
//! minimize  ½ Σ (yᵢ − xᵢ)²  +  λ Σ |xᵢ₋₁ − 2xᵢ + xᵢ₊₁|
//! ```
//!
//! with ADMM on the split `z = Dx` (`D` the second-difference operator).
//! The x-update is a pentadiagonal SPD solve `(I + ρDᵀD) x = b`, done with a
//! banded Cholesky factorization in O(n). The fit is piecewise linear; its
//! kinks are the key points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Applies the second-difference operator: `(Dx)ᵢ = xᵢ − 2xᵢ₊₁ + xᵢ₊₂`.
pub fn second_diff(x: &[f64]) -> Vec<f64> {
    x.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).collect()
}

/// Applies `Dᵀ`: maps `n − 2` values to `n`.
pub fn second_diff_adjoint(s: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; s.len() + 2];
    for (i, &v) in s.iter().enumerate() {
        out[i] += v;
        out[i + 1] -= 2.0 * v;
        out[i + 2] += v;
    }
    out
}

/// Value of the trend-filter objective.
pub fn tf_objective(y: &[f64], x: &[f64], lambda: f64) -> f64 {
    assert_eq!(y.len(), x.len(), "objective needs equal lengths");
    let fit: f64 = y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
    let penalty: f64 = second_diff(x).iter().map(|v| v.abs()).sum();
    0.5 * fit + lambda * penalty
}

/// Cholesky factor of a symmetric positive definite matrix with half
/// bandwidth 2. `rows[i][d]` holds `L[i][i - d]`.
#[derive(Debug, Clone)]
pub struct PentaCholesky {
    rows: Vec<[f64; 3]>,
}

impl PentaCholesky {
    /// `bands[i] = [A[i][i], A[i][i-1], A[i][i-2]]` (out-of-range entries ignored).
    pub fn factor(bands: &[[f64; 3]]) -> Result<Self> {
        let n = bands.len();
        let mut rows = vec![[0.0; 3]; n];
        for i in 0..n {
            for d in (1..=2).rev() {
                if i < d {
                    continue;
                }
                let j = i - d;
                // Σ_k L[i][k] L[j][k] over k < j within both bands.
                let mut acc = bands[i][d];
                for k in j.saturating_sub(2)..j {
                    if i - k <= 2 {
                        acc -= rows[i][i - k] * rows[j][j - k];
                    }
                }
                rows[i][d] = acc / rows[j][0];
            }
            let mut diag = bands[i][0];
            diag -= rows[i][1..=2.min(i)].iter().map(|v| v * v).sum::<f64>();
            if diag <= 0.0 || !diag.is_finite() {
                return Err(Error::Degenerate("banded matrix is not positive definite".into()));
            }
            rows[i][0] = diag.sqrt();
        }
        Ok(PentaCholesky { rows })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.rows.len();
        for i in 0..n {
            let mut v = b[i];
            for d in 1..=2.min(i) {
                v -= self.rows[i][d] * b[i - d];
            }
            b[i] = v / self.rows[i][0];
        }
        for i in (0..n).rev() {
            let mut v = b[i];
            for d in 1..=2 {
                if i + d < n {
                    v -= self.rows[i + d][d] * b[i + d];
                }
            }
            b[i] = v / self.rows[i][0];
        }
    }
}

/// Bands of `I + ρ DᵀD` for a length-`n` signal.
fn normal_bands(n: usize, rho: f64) -> Vec<[f64; 3]> {
    let mut bands = vec![[1.0, 0.0, 0.0]; n];
    const ROW: [f64; 3] = [1.0, -2.0, 1.0];
    for r in 0..n.saturating_sub(2) {
        for a in 0..3 {
            for b in 0..=a {
                bands[r + a][a - b] += rho * ROW[a] * ROW[b];
            }
        }
    }
    bands
}

/// `‖(DDᵀ)⁻¹ D y‖∞`: the smallest λ for which the solution is the
/// least-squares line through `y`.
pub fn lambda_max(y: &[f64]) -> Result<f64> {
    if y.len() < 3 {
        return Err(Error::SignalTooShort {
            needed: 3,
            got: y.len(),
        });
    }
    let m = y.len() - 2;
    let bands: Vec<[f64; 3]> = (0..m).map(|_| [6.0, -4.0, 1.0]).collect();
    let chol = PentaCholesky::factor(&bands)?;
    let mut v = second_diff(y);
    chol.solve_in_place(&mut v);
    Ok(v.iter().fold(0.0, |a, b| a.max(b.abs())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrendOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub rho: f64,
    /// Residual balancing of ρ.
    pub adaptive_rho: bool,
    /// Periodically try to finish with an exact active-set solve seeded by
    /// the current ADMM sign pattern.
    pub polish: bool,
}

impl Default for TrendOptions {
    fn default() -> Self {
        TrendOptions {
            tol: 1e-8,
            max_iter: 5000,
            rho: 1.0,
            adaptive_rho: true,
            polish: true,
        }
    }
}

/// Result of one trend-filter solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub x: Vec<f64>,
    pub lambda: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Dual certificate `s` with `‖s‖∞ ≤ 1` and `y − x ≈ λDᵀs`.
    pub dual: Vec<f64>,
}

impl TrendFit {
    /// `‖y − x − λDᵀs‖∞`, the stationarity residual of the certificate.
    pub fn stationarity_residual(&self, y: &[f64]) -> f64 {
        let dts = second_diff_adjoint(&self.dual);
        y.iter()
            .zip(&self.x)
            .zip(&dts)
            .fold(0.0, |m, ((yi, xi), d)| m.max((yi - xi - self.lambda * d).abs()))
    }
}

/// ADMM iterate; reused to warm-start nearby solves.
#[derive(Debug, Clone)]
struct AdmmState {
    z: Vec<f64>,
    u: Vec<f64>,
    rho: f64,
    lambda: f64,
}

pub fn l1_trend_filter(y: &[f64], lambda: f64, opts: &TrendOptions) -> Result<TrendFit> {
    solve(y, lambda, opts, None).map(|(fit, _)| fit)
}

fn solve(y: &[f64], lambda: f64, opts: &TrendOptions, warm: Option<&AdmmState>) -> Result<(TrendFit, AdmmState)> {
    let n = y.len();
    if n < 3 {
        return Err(Error::SignalTooShort { needed: 3, got: n });
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite sample at index {i}")));
    }
    let m = n - 2;
    if lambda == 0.0 {
        let fit = TrendFit {
            x: y.to_vec(),
            lambda,
            objective: tf_objective(y, y, 0.0),
            iterations: 0,
            converged: true,
            dual: vec![0.0; m],
        };
        let state = AdmmState {
            z: second_diff(y),
            u: vec![0.0; m],
            rho: opts.rho,
            lambda,
        };
        return Ok((fit, state));
    }

    let (mut z, mut u, mut rho) = match warm {
        Some(s) if s.z.len() == m && s.lambda > 0.0 => {
            // Scaled dual u = s·λ/ρ; keep s fixed when λ changes.
            let k = lambda / s.lambda;
            (s.z.clone(), s.u.iter().map(|v| v * k).collect(), s.rho)
        }
        _ => (second_diff(y), vec![0.0; m], opts.rho),
    };
    let mut chol = PentaCholesky::factor(&normal_bands(n, rho))?;
    let mut x = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut dz = vec![0.0; m];
    let mut converged = false;
    let mut iterations = 0;

    const BALANCE_EVERY: usize = 10;
    const MU: f64 = 10.0;
    const TAU: f64 = 2.0;
    const POLISH_FIRST: usize = 25;
    const POLISH_EVERY: usize = 400;

    while iterations < opts.max_iter {
        iterations += 1;
        // x-update: (I + ρDᵀD) x = y + ρDᵀ(z − u)
        rhs.copy_from_slice(y);
        for i in 0..m {
            let v = rho * (z[i] - u[i]);
            rhs[i] += v;
            rhs[i + 1] -= 2.0 * v;
            rhs[i + 2] += v;
        }
        x.copy_from_slice(&rhs);
        chol.solve_in_place(&mut x);

        // z-update and scaled dual ascent.
        let kappa = lambda / rho;
        let mut r_prim = 0.0f64;
        for i in 0..m {
            let dx = x[i] - 2.0 * x[i + 1] + x[i + 2];
            let v = dx + u[i];
            let z_new = v.signum() * (v.abs() - kappa).max(0.0);
            dz[i] = z_new - z[i];
            z[i] = z_new;
            u[i] = v - z_new;
            r_prim = r_prim.max((dx - z_new).abs());
        }
        // Dual residual ρ‖Dᵀ(z − z_old)‖∞ equals the stationarity residual.
        let mut r_dual = 0.0f64;
        for j in 0..n {
            let mut acc = 0.0;
            if j < m {
                acc += dz[j];
            }
            if j >= 1 && j - 1 < m {
                acc -= 2.0 * dz[j - 1];
            }
            if j >= 2 {
                acc += dz[j - 2];
            }
            r_dual = r_dual.max(acc.abs());
        }
        r_dual *= rho;

        if r_prim < opts.tol && r_dual < opts.tol {
            converged = true;
            break;
        }
        let checkpoint = iterations % POLISH_FIRST == 0
            && ((iterations / POLISH_FIRST).is_power_of_two() || iterations % POLISH_EVERY == 0);
        if opts.polish && (checkpoint || iterations == opts.max_iter) {
            if let Some(done) = polish(y, lambda, &u, rho, iterations) {
                return Ok(done);
            }
        }
        if opts.adaptive_rho && iterations % BALANCE_EVERY == 0 {
            let scale = if r_prim > MU * r_dual {
                TAU
            } else if r_dual > MU * r_prim {
                1.0 / TAU
            } else {
                1.0
            };
            if scale != 1.0 {
                rho *= scale;
                for v in &mut u {
                    *v /= scale;
                }
                chol = PentaCholesky::factor(&normal_bands(n, rho))?;
            }
        }
    }

    let dual: Vec<f64> = u.iter().map(|v| (v * rho / lambda).clamp(-1.0, 1.0)).collect();
    let fit = TrendFit {
        objective: tf_objective(y, &x, lambda),
        x,
        lambda,
        iterations,
        converged,
        dual,
    };
    Ok((fit, AdmmState { z, u, rho, lambda }))
}

/// Exact finish from the sign pattern in the scaled ADMM dual `u`.
fn polish(y: &[f64], lambda: f64, u: &[f64], rho: f64, iterations: usize) -> Option<(TrendFit, AdmmState)> {
    let s0: Vec<f64> = u.iter().map(|v| v * rho / lambda).collect();
    let s = projected_newton_dual(y, lambda, &s0)?;
    let x = primal_from_dual(y, lambda, &s);
    let z = second_diff(&x);
    let u = s.iter().map(|v| v * lambda / rho).collect();
    let fit = TrendFit {
        objective: tf_objective(y, &x, lambda),
        x,
        lambda,
        iterations,
        converged: true,
        dual: s,
    };
    Some((fit, AdmmState { z, u, rho, lambda }))
}

/// Entry `(i, j)` of `DDᵀ`.
fn ddt(i: usize, j: usize) -> f64 {
    match i.abs_diff(j) {
        0 => 6.0,
        1 => -4.0,
        2 => 1.0,
        _ => 0.0,
    }
}

/// `x = y − λDᵀs`.
fn primal_from_dual(y: &[f64], lambda: f64, s: &[f64]) -> Vec<f64> {
    let dts = second_diff_adjoint(s);
    y.iter().zip(&dts).map(|(yi, d)| yi - lambda * d).collect()
}

const NEWTON_MAX_ITER: usize = 200;

/// Banded factor of the principal submatrix of `DDᵀ` on sorted `free`.
fn reduced_factor(free: &[usize]) -> Option<PentaCholesky> {
    let bands: Vec<[f64; 3]> = free
        .iter()
        .enumerate()
        .map(|(p, &i)| {
            let sub = |d: usize| if p >= d { ddt(i, free[p - d]) } else { 0.0 };
            [6.0, sub(1), sub(2)]
        })
        .collect();
    PentaCholesky::factor(&bands).ok()
}

/// Gradient `D(Dᵀs − c)` of the scaled dual objective `½‖c − Dᵀs‖²`.
fn dual_gradient(c: &[f64], s: &[f64]) -> Vec<f64> {
    let r: Vec<f64> = second_diff_adjoint(s).iter().zip(c).map(|(a, b)| a - b).collect();
    second_diff(&r)
}

fn dual_value(c: &[f64], s: &[f64]) -> f64 {
    0.5 * second_diff_adjoint(s)
        .iter()
        .zip(c)
        .map(|(a, b)| (b - a).powi(2))
        .sum::<f64>()
}

/// Solves the dual on the face where `bound[i] = ±1` entries are fixed and
/// checks the KKT conditions there. Returns the dual if they hold.
fn face_solution(c: &[f64], bound: &[i8]) -> Option<Vec<f64>> {
    let m = bound.len();
    let free: Vec<usize> = (0..m).filter(|&i| bound[i] == 0).collect();
    let mut s: Vec<f64> = bound.iter().map(|&b| b as f64).collect();
    if !free.is_empty() {
        let chol = reduced_factor(&free)?;
        let g = dual_gradient(c, &s);
        let mut step: Vec<f64> = free.iter().map(|&i| -g[i]).collect();
        chol.solve_in_place(&mut step);
        for (&i, d) in free.iter().zip(&step) {
            s[i] += d;
        }
        // One refinement pass.
        let g = dual_gradient(c, &s);
        let mut step: Vec<f64> = free.iter().map(|&i| -g[i]).collect();
        chol.solve_in_place(&mut step);
        for (&i, d) in free.iter().zip(&step) {
            s[i] += d;
        }
    }
    let g = dual_gradient(c, &s);
    let gscale = c.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let slack = 1e-11 * gscale;
    let ok = (0..m).all(|i| match bound[i] {
        0 => s[i].abs() <= 1.0 + 1e-12,
        // At s = 1 the gradient must point outward (g ≤ 0), at s = −1 inward.
        b => g[i] * b as f64 <= slack,
    });
    ok.then(|| s.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect())
}

/// Projected Newton (Bertsekas) for the dual box QP
/// `min ½‖y/λ − Dᵀs‖²` subject to `‖s‖∞ ≤ 1`, started from `s0`.
/// Finishes with an exact face solve, so a returned `s` gives an exact
/// KKT pair `(y − λDᵀs, s)`. `None` if the iteration budget runs out.
fn projected_newton_dual(y: &[f64], lambda: f64, s0: &[f64]) -> Option<Vec<f64>> {
    let m = s0.len();
    let c: Vec<f64> = y.iter().map(|v| v / lambda).collect();
    let mut s: Vec<f64> = s0.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
    let mut f = dual_value(&c, &s);
    const EPS: f64 = 1e-3;
    const SIGMA: f64 = 1e-4;
    for _ in 0..NEWTON_MAX_ITER {
        let g = dual_gradient(&c, &s);
        let pg = (0..m).fold(0.0f64, |a, i| a.max((s[i] - (s[i] - g[i]).clamp(-1.0, 1.0)).abs()));
        let eps = EPS.min(pg);
        let bound: Vec<i8> = (0..m)
            .map(|i| {
                if s[i] >= 1.0 - eps && g[i] < 0.0 {
                    1
                } else if s[i] <= -1.0 + eps && g[i] > 0.0 {
                    -1
                } else {
                    0
                }
            })
            .collect();
        if let Some(exact) = face_solution(&c, &bound) {
            return Some(exact);
        }
        let free: Vec<usize> = (0..m).filter(|&i| bound[i] == 0).collect();
        let mut d: Vec<f64> = g.iter().map(|v| -v / 6.0).collect();
        if !free.is_empty() {
            let chol = reduced_factor(&free)?;
            let mut step: Vec<f64> = free.iter().map(|&i| -g[i]).collect();
            chol.solve_in_place(&mut step);
            for (&i, v) in free.iter().zip(&step) {
                d[i] = *v;
            }
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = (0..m).map(|i| (s[i] + alpha * d[i]).clamp(-1.0, 1.0)).collect();
            let decrease: f64 = (0..m)
                .map(|i| {
                    if bound[i] == 0 {
                        -alpha * g[i] * d[i]
                    } else {
                        g[i] * (s[i] - trial[i])
                    }
                })
                .sum();
            let ft = dual_value(&c, &trial);
            if f - ft >= SIGMA * decrease {
                s = trial;
                f = ft;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            log::debug!("projected Newton line search stalled");
            return None;
        }
    }
    log::debug!("projected Newton hit its iteration budget");
    None
}

/// Key points of a fit: both endpoints plus every kink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyPoints {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl KeyPoints {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Gaps between consecutive key points, in samples.
    pub fn intervals(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.windows(2).map(|w| w[1] - w[0])
    }
}

/// Where key-point values are read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeypointSource {
    /// The piecewise-linear fit.
    #[default]
    Fit,
    /// The signal that was fitted.
    Raw,
}

pub const DEFAULT_KINK_TOL: f64 = 1e-6;

/// Kink indices of `x`: `|xᵢ₋₁ − 2xᵢ + xᵢ₊₁| > kink_tol · max(1, max|x|)`.
pub fn kink_indices(x: &[f64], kink_tol: f64) -> Vec<usize> {
    let n = x.len();
    let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let thr = kink_tol * scale;
    let mut idx = Vec::with_capacity(n / 8 + 2);
    idx.push(0);
    for (i, d) in second_diff(x).iter().enumerate() {
        if d.abs() > thr {
            idx.push(i + 1);
        }
    }
    if n > 1 {
        idx.push(n - 1);
    }
    idx
}

pub fn extract_keypoints(fit: &TrendFit, kink_tol: f64) -> KeyPoints {
    let indices = kink_indices(&fit.x, kink_tol);
    let values = indices.iter().map(|&i| fit.x[i]).collect();
    KeyPoints { indices, values }
}

/// Like [`extract_keypoints`] but reads values from `raw` (the fitted signal).
pub fn extract_keypoints_from(fit: &TrendFit, raw: &[f64], kink_tol: f64) -> KeyPoints {
    let indices = kink_indices(&fit.x, kink_tol);
    let values = indices.iter().map(|&i| raw[i]).collect();
    KeyPoints { indices, values }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaBounds {
    pub lo: f64,
    pub hi: f64,
}

impl Default for LambdaBounds {
    fn default() -> Self {
        LambdaBounds { lo: 1e-3, hi: 1e3 }
    }
}

/// Which bound the search got stuck on, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundHit {
    Lower,
    Upper,
}

#[derive(Debug, Clone)]
pub struct AutoLambda {
    pub lambda: f64,
    /// Key points per sample at `lambda`.
    pub density: f64,
    pub bound: Option<BoundHit>,
    pub fit: TrendFit,
}

pub const DEFAULT_TARGET_DENSITY: f64 = 0.08;
const AUTO_MAX_STEPS: usize = 40;

/// Bisection on log λ until the key-point density lies within
/// `[target/2, 2·target]`. Once inside, the search continues toward the
/// dense edge of the band and returns the smallest in-band λ it found, which
/// is the least smoothed fit that still meets the density budget.
pub fn auto_lambda(
    y: &[f64],
    target_density: f64,
    bounds: LambdaBounds,
    opts: &TrendOptions,
    kink_tol: f64,
) -> Result<AutoLambda> {
    if !(target_density > 0.0 && target_density < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "target density must lie in (0, 0.5), got {target_density}"
        )));
    }
    if !(bounds.lo > 0.0 && bounds.lo < bounds.hi) {
        return Err(Error::InvalidArgument("lambda bounds must satisfy 0 < lo < hi".into()));
    }
    let n = y.len() as f64;
    let (lo_d, hi_d) = (0.5 * target_density, 2.0 * target_density);
    let density = |fit: &TrendFit| kink_indices(&fit.x, kink_tol).len() as f64 / n;

    // Bisection on log λ; density falls as λ grows. The bounds themselves
    // are only solved if the search runs into one of them.
    let (mut lo, mut hi) = (bounds.lo.ln(), bounds.hi.ln());
    let (mut lo_moved, mut hi_moved) = (false, false);
    let mut warm: Option<AdmmState> = None;
    let mut best: Option<(f64, f64, TrendFit)> = None;
    for _ in 0..AUTO_MAX_STEPS {
        let mid = 0.5 * (lo + hi);
        let lambda = mid.exp();
        let (fit, state) = solve(y, lambda, opts, warm.as_ref())?;
        warm = Some(state);
        let d = density(&fit);
        if d > hi_d {
            lo = mid;
            lo_moved = true;
        } else if d < lo_d {
            hi = mid;
            hi_moved = true;
        } else {
            let state = warm.take().expect("state of the last solve");
            return refine_toward_lower_edge(y, lo, mid, d, fit, state, hi_d, opts, kink_tol);
        }
        let miss = (d.ln() - target_density.ln()).abs();
        if best.as_ref().is_none_or(|b| miss < b.0) {
            best = Some((miss, d, fit));
        }
        if hi - lo < 1e-9 {
            break;
        }
    }
    let edge = match (lo_moved, hi_moved) {
        (true, false) => Some((bounds.hi, BoundHit::Upper)),
        (false, true) => Some((bounds.lo, BoundHit::Lower)),
        _ => None,
    };
    if let Some((lambda, hit)) = edge {
        let (fit, _) = solve(y, lambda, opts, warm.as_ref())?;
        let d = density(&fit);
        let bound = (d < lo_d || d > hi_d).then_some(hit);
        if bound.is_some() {
            log::warn!("auto lambda stopped at the {hit:?} bound {lambda} with density {d}");
        }
        return Ok(AutoLambda {
            lambda,
            density: d,
            bound,
            fit,
        });
    }
    let (_, density, fit) = best.expect("at least one bisection step");
    log::warn!("auto lambda did not reach the target band; using closest density {density}");
    Ok(AutoLambda {
        lambda: fit.lambda,
        density,
        bound: None,
        fit,
    })
}

const REFINE_STEPS: usize = 6;

#[allow(clippy::too_many_arguments)]
fn refine_toward_lower_edge(
    y: &[f64],
    mut lo: f64,
    mut hit: f64,
    mut density: f64,
    mut fit: TrendFit,
    mut state: AdmmState,
    hi_d: f64,
    opts: &TrendOptions,
    kink_tol: f64,
) -> Result<AutoLambda> {
    let n = y.len() as f64;
    for _ in 0..REFINE_STEPS {
        let mid = 0.5 * (lo + hit);
        let (f, s) = solve(y, mid.exp(), opts, Some(&state))?;
        let d = kink_indices(&f.x, kink_tol).len() as f64 / n;
        state = s;
        // Density only grows as λ shrinks, so `d` cannot fall below the band.
        if d > hi_d {
            lo = mid;
        } else {
            hit = mid;
            density = d;
            fit = f;
        }
    }
    Ok(AutoLambda {
        lambda: hit.exp(),
        density,
        bound: None,
        fit,
    })
}

/// How λ is chosen for each lead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum LambdaPolicy {
    Fixed { lambda: f64 },
    Auto { target_density: f64, lo: f64, hi: f64 },
}

impl Default for LambdaPolicy {
    fn default() -> Self {
        LambdaPolicy::Auto {
            target_density: DEFAULT_TARGET_DENSITY,
            lo: LambdaBounds::default().lo,
            hi: LambdaBounds::default().hi,
        }
    }
}

impl std::str::FromStr for LambdaPolicy {
    type Err = Error;

    /// `auto` or a nonnegative number.
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(LambdaPolicy::default());
        }
        let lambda: f64 = s
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("lambda must be a number or 'auto', got {s:?}")))?;
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "lambda must be nonnegative, got {lambda}"
            )));
        }
        Ok(LambdaPolicy::Fixed { lambda })
    }
}

/// Solves for one lead under a λ policy. Non-convergence is reported on the
/// returned fit, not as an error.
pub fn fit_with_policy(y: &[f64], policy: &LambdaPolicy, opts: &TrendOptions, kink_tol: f64) -> Result<TrendFit> {
    match *policy {
        LambdaPolicy::Fixed { lambda } => l1_trend_filter(y, lambda, opts),
        LambdaPolicy::Auto { target_density, lo, hi } => {
            // Search coarsely, then polish the chosen λ at full tolerance.
            let search = TrendOptions {
                tol: opts.tol.max(1e-6),
                ..*opts
            };
            let found = auto_lambda(y, target_density, LambdaBounds { lo, hi }, &search, kink_tol)?;
            // An active-set finish already satisfies the certificate exactly.
            let exact = found.fit.converged && found.fit.stationarity_residual(y) <= opts.tol;
            if exact || (search.tol == opts.tol && found.fit.converged) {
                return Ok(found.fit);
            }
            l1_trend_filter(y, found.lambda, opts)
        }
    }
}
