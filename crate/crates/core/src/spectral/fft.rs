//! Thin 2D complex FFT layer over rustfft with plan caching.
//!
//! Conventions match the Fourier expansion u(x) = sum_k u_k exp(i k0 k.x)
//! on the n x n collocation grid x_j = j L / n: the synthesis (spectral ->
//! physical) transform is the unnormalized inverse DFT, and analysis divides
//! by n^2.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

thread_local! {
    static PLAN_CACHE: RefCell<HashMap<usize, Plans>> = RefCell::new(HashMap::new());
}

fn with_plans<R>(n: usize, f: impl FnOnce(&Plans) -> R) -> R {
    PLAN_CACHE.with(|cache| {
        let mut cache = cache.borrow_mut();
        let plans = cache.entry(n).or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            }
        });
        f(plans)
    })
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

fn transform_2d(data: &mut [Complex64], n: usize, forward: bool) {
    debug_assert_eq!(data.len(), n * n);
    with_plans(n, |plans| {
        let fft = if forward { &plans.forward } else { &plans.inverse };
        fft.process(data);
        transpose(data, n);
        fft.process(data);
        transpose(data, n);
    });
}

/// Spectral coefficients -> physical samples (unnormalized inverse DFT).
pub fn synthesize(data: &mut [Complex64], n: usize) {
    transform_2d(data, n, false);
}

/// Physical samples -> spectral coefficients (forward DFT / n^2).
pub fn analyze(data: &mut [Complex64], n: usize) {
    transform_2d(data, n, true);
    let scale = 1.0 / (n * n) as f64;
    for v in data.iter_mut() {
        *v *= scale;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let n = 16;
        let mut data: Vec<Complex64> = (0..n * n)
            .map(|i| Complex64::new((i % 7) as f64, (i % 3) as f64))
            .collect();
        let orig = data.clone();
        synthesize(&mut data, n);
        analyze(&mut data, n);
        for (a, b) in data.iter().zip(orig.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn single_mode_synthesis_is_plane_wave() {
        let n = 8;
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        data[1 * n + 2] = Complex64::new(1.0, 0.0); // k = (1, 2)
        synthesize(&mut data, n);
        for i in 0..n {
            for j in 0..n {
                let phase = 2.0 * std::f64::consts::PI * (i as f64 * 1.0 + j as f64 * 2.0)
                    / n as f64;
                let expect = Complex64::new(phase.cos(), phase.sin());
                assert!((data[i * n + j] - expect).norm() < 1e-12);
            }
        }
    }
}
