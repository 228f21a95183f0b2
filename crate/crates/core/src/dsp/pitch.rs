//! YIN fundamental-frequency estimation.
//!
//! The difference function is evaluated through an FFT cross-correlation so
//! that 8192-sample analysis frames stay cheap.

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

pub const F0_MIN_HZ: f64 = 50.0;
pub const F0_MAX_HZ: f64 = 2000.0;
/// Cumulative-mean-normalized difference below which a lag counts as periodic.
pub const YIN_THRESHOLD: f64 = 0.15;
pub(crate) const MIN_BLOCK: usize = 2048;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Cross-correlation `r[τ] = Σ_{j<w} x[j]·x[j+τ]` for `τ ∈ 0..=max_lag`.
/// With `w + max_lag <= x.len()` a circular transform of `x.len()`
/// (rounded up to a power of two) never wraps. Both real inputs share one
/// complex FFT, `z = x + i·y`.
fn autocorrelation(x: &[f64], w: usize, max_lag: usize) -> Vec<f64> {
    debug_assert!(w + max_lag <= x.len());
    let size = x.len().next_power_of_two();
    let (fwd, inv) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(size), p.plan_fft_inverse(size))
    });
    let mut z: Vec<Complex64> = (0..size)
        .map(|i| {
            let a = x.get(i).copied().unwrap_or(0.0);
            Complex64::new(a, if i < w { a } else { 0.0 })
        })
        .collect();
    fwd.process(&mut z);
    // X = (Z[k] + conj Z[-k]) / 2, Y = (Z[k] - conj Z[-k]) / 2i.
    let mut prod: Vec<Complex64> = (0..size)
        .map(|k| {
            let (zk, zn) = (z[k], z[(size - k) % size].conj());
            let xk = (zk + zn) * 0.5;
            let yk = (zk - zn) * Complex64::new(0.0, -0.5);
            xk * yk.conj()
        })
        .collect();
    inv.process(&mut prod);
    let scale = 1.0 / size as f64;
    prod[..=max_lag].iter().map(|c| c.re * scale).collect()
}

/// Cumulative-mean-normalized difference function for lags `0..=max_lag`.
fn cmnd(block: &[f32], max_lag: usize) -> Vec<f64> {
    let x: Vec<f64> = block.iter().map(|&s| s as f64).collect();
    let w = x.len() - max_lag;
    let r = autocorrelation(&x, w, max_lag);
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    for v in &x {
        prefix.push(prefix.last().unwrap() + v * v);
    }
    let e0 = prefix[w];
    let mut out = vec![1.0; max_lag + 1];
    let mut running = 0.0;
    for tau in 1..=max_lag {
        let e_tau = prefix[tau + w] - prefix[tau];
        let d = (e0 + e_tau - 2.0 * r[tau]).max(0.0);
        running += d;
        out[tau] = if running > 0.0 {
            d * tau as f64 / running
        } else {
            1.0
        };
    }
    out
}

/// Fundamental frequency of a block in Hz, or 0 when unvoiced. Blocks must
/// hold at least 2048 samples; shorter blocks are treated as unvoiced.
pub fn f0(block: &[f32], sample_rate: u32) -> f64 {
    let sr = sample_rate as f64;
    let max_lag = (sr / F0_MIN_HZ).floor() as usize;
    let min_lag = ((sr / F0_MAX_HZ).floor() as usize).max(2);
    if block.len() < MIN_BLOCK || block.len() <= max_lag + 1 {
        return 0.0;
    }
    if block.iter().all(|&s| s == 0.0) {
        return 0.0;
    }
    let d = cmnd(block, max_lag);
    let Some(mut tau) = (min_lag..=max_lag).find(|&t| d[t] < YIN_THRESHOLD) else {
        return 0.0;
    };
    while tau < max_lag && d[tau + 1] < d[tau] {
        tau += 1;
    }
    let refined = if tau > min_lag && tau < max_lag {
        let (a, b, c) = (d[tau - 1], d[tau], d[tau + 1]);
        let denom = a - 2.0 * b + c;
        if denom.abs() > f64::EPSILON {
            tau as f64 + 0.5 * (a - c) / denom
        } else {
            tau as f64
        }
    } else {
        tau as f64
    };
    let hz = sr / refined;
    if (F0_MIN_HZ..=F0_MAX_HZ).contains(&hz) {
        hz
    } else {
        0.0
    }
}
