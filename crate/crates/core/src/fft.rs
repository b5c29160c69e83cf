//! Thin wrapper around rustfft with the crate's scaling convention:
//! the inverse transform carries the 1/N factor, the forward carries none.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn with_plan(n: usize, inverse: bool, data: &mut [Complex64]) {
    PLANS.with(|cell| {
        let (planner, cache) = &mut *cell.borrow_mut();
        let plan = cache.entry((n, inverse)).or_insert_with(|| {
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        });
        plan.process(data);
    });
}

/// Forward DFT, unnormalized: X[k] = sum_n x[n] e^{-2πi kn/N}.
pub fn fft(data: &mut [Complex64]) {
    with_plan(data.len(), false, data);
}

/// Inverse DFT with 1/N scaling: x[n] = (1/N) sum_k X[k] e^{+2πi kn/N}.
pub fn ifft(data: &mut [Complex64]) {
    let n = data.len();
    with_plan(n, true, data);
    let scale = 1.0 / n as f64;
    for v in data.iter_mut() {
        *v *= scale;
    }
}

/// FFT bin angular frequencies for an `n`-point grid at `sample_rate`,
/// in transform order (bin k maps to k·fs/n for k < n/2, (k-n)·fs/n above).
pub fn angular_frequencies(n: usize, sample_rate: f64) -> Vec<f64> {
    let df = sample_rate / n as f64;
    (0..n)
        .map(|k| {
            let f = if k < n.div_ceil(2) {
                k as f64 * df
            } else {
                (k as f64 - n as f64) * df
            };
            2.0 * std::f64::consts::PI * f
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_identity() {
        let mut data: Vec<Complex64> = (0..64)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64).cos()))
            .collect();
        let orig = data.clone();
        fft(&mut data);
        ifft(&mut data);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn impulse_spectrum_is_flat() {
        let mut data = vec![Complex64::new(0.0, 0.0); 8];
        data[0] = Complex64::new(1.0, 0.0);
        fft(&mut data);
        for v in &data {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn frequency_grid_wraps_negative() {
        let w = angular_frequencies(8, 8.0);
        assert!((w[0] - 0.0).abs() < 1e-12);
        assert!((w[1] - 2.0 * std::f64::consts::PI).abs() < 1e-9);
        assert!((w[7] + 2.0 * std::f64::consts::PI).abs() < 1e-9);
    }
}
