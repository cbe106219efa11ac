//! Minimal 2D FFT on row-major buffers, backed by rustfft plans.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Smallest 5-smooth integer >= n (FFT-efficient embedding size).
pub(crate) fn next_fast_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut k = m;
        for f in [2usize, 3, 5] {
            while k % f == 0 {
                k /= f;
            }
        }
        if k == 1 {
            return m;
        }
        m += 1;
    }
}

/// Plans for a fixed p1 x p2 transform (index = i + j*p1, i fastest).
pub(crate) struct Fft2 {
    pub p1: usize,
    pub p2: usize,
    fwd1: Arc<dyn Fft<f64>>,
    inv1: Arc<dyn Fft<f64>>,
    fwd2: Arc<dyn Fft<f64>>,
    inv2: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(p1: usize, p2: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            p1,
            p2,
            fwd1: planner.plan_fft_forward(p1),
            inv1: planner.plan_fft_inverse(p1),
            fwd2: planner.plan_fft_forward(p2),
            inv2: planner.plan_fft_inverse(p2),
        }
    }

    pub fn len(&self) -> usize {
        self.p1 * self.p2
    }

    fn run(&self, data: &mut [Complex64], inverse: bool) {
        assert_eq!(data.len(), self.len());
        let (f1, f2) = if inverse {
            (&self.inv1, &self.inv2)
        } else {
            (&self.fwd1, &self.fwd2)
        };
        // transform the contiguous x1-lines
        let mut scratch = vec![Complex64::default(); f1.get_inplace_scratch_len()];
        for row in data.chunks_exact_mut(self.p1) {
            f1.process_with_scratch(row, &mut scratch);
        }
        // transpose, transform the (now contiguous) x2-lines, transpose back
        let mut t = vec![Complex64::default(); self.len()];
        for j in 0..self.p2 {
            for i in 0..self.p1 {
                t[j + i * self.p2] = data[i + j * self.p1];
            }
        }
        let mut scratch2 = vec![Complex64::default(); f2.get_inplace_scratch_len()];
        for col in t.chunks_exact_mut(self.p2) {
            f2.process_with_scratch(col, &mut scratch2);
        }
        for i in 0..self.p1 {
            for j in 0..self.p2 {
                data[i + j * self.p1] = t[j + i * self.p2];
            }
        }
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, false);
    }

    /// Unnormalized inverse transform (forward then inverse scales by len).
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, true);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_sizes() {
        assert_eq!(next_fast_size(1), 1);
        assert_eq!(next_fast_size(121), 125);
        assert_eq!(next_fast_size(31), 32);
        assert_eq!(next_fast_size(97), 100);
    }

    #[test]
    fn roundtrip_and_delta() {
        let fft = Fft2::new(12, 10);
        let n = fft.len();
        let orig: Vec<Complex64> = (0..n)
            .map(|k| Complex64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()))
            .collect();
        let mut data = orig.clone();
        fft.forward(&mut data);
        fft.inverse(&mut data);
        for (a, b) in data.iter().zip(orig.iter()) {
            assert!((a / n as f64 - b).norm() < 1e-12);
        }
        // delta transforms to all-ones
        let mut delta = vec![Complex64::default(); n];
        delta[0] = Complex64::new(1.0, 0.0);
        fft.forward(&mut delta);
        for v in &delta {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }
}
