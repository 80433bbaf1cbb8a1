//! Linear convolution, direct for short outputs and FFT-backed above a
//! crossover length, with the kernel spectrum cached for reuse across
//! Monte Carlo replicas.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Output length above which the FFT path wins.
pub const FFT_CROSSOVER: usize = 1024;

/// Schoolbook linear convolution; output length `a.len() + b.len() - 1`.
pub fn convolve_direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// FFT convolver with a fixed kernel whose spectrum is computed once.
pub struct FftConvolver {
    fft_len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kernel_fft: Vec<Complex<f64>>,
    kernel_len: usize,
    max_signal_len: usize,
}

impl FftConvolver {
    pub fn new(kernel: &[f64], max_signal_len: usize) -> Self {
        assert!(!kernel.is_empty() && max_signal_len > 0);
        let out_len = kernel.len() + max_signal_len - 1;
        let fft_len = out_len.next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let mut kernel_fft = vec![Complex::new(0.0, 0.0); fft_len];
        for (i, &k) in kernel.iter().enumerate() {
            kernel_fft[i] = Complex::new(k, 0.0);
        }
        forward.process(&mut kernel_fft);
        Self {
            fft_len,
            forward,
            inverse,
            kernel_fft,
            kernel_len: kernel.len(),
            max_signal_len,
        }
    }

    /// Full linear convolution of the cached kernel with `signal`.
    pub fn convolve(&self, signal: &[f64]) -> Vec<f64> {
        assert!(
            signal.len() <= self.max_signal_len,
            "signal longer than planned"
        );
        let mut buf = vec![Complex::new(0.0, 0.0); self.fft_len];
        for (i, &s) in signal.iter().enumerate() {
            buf[i] = Complex::new(s, 0.0);
        }
        self.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(self.kernel_fft.iter()) {
            *b *= *k;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.fft_len as f64;
        buf[..self.kernel_len + signal.len() - 1]
            .iter()
            .map(|c| c.re * scale)
            .collect()
    }
}

/// One-shot convolution dispatching on output length.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    if out_len <= FFT_CROSSOVER {
        convolve_direct(a, b)
    } else {
        FftConvolver::new(a, b.len()).convolve(b)
    }
}
