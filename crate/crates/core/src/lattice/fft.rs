//! Periodic transforms on `N^d` grids (axis 0 fastest).

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

pub(crate) struct GridFft {
    d: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl GridFft {
    pub fn new(d: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        GridFft { d, n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    /// In-place transform along every axis; the inverse is unnormalized.
    pub fn transform(&self, data: &mut [Complex<f64>], inverse: bool) {
        let fft = if inverse { &self.inverse } else { &self.forward };
        let n = self.n;
        data.par_chunks_mut(n).for_each(|line| fft.process(line));
        for axis in 1..self.d {
            let stride = n.pow(axis as u32);
            let block = stride * n;
            // Each block holds `stride` interleaved lines along `axis`.
            data.par_chunks_mut(block).for_each(|chunk| {
                let mut line = vec![Complex::default(); n];
                for inner in 0..stride {
                    for (k, z) in line.iter_mut().enumerate() {
                        *z = chunk[inner + k * stride];
                    }
                    fft.process(&mut line);
                    for (k, z) in line.iter().enumerate() {
                        chunk[inner + k * stride] = *z;
                    }
                }
            });
        }
    }

    /// `C(m) = #{i : b_i ∧ b_{i+m}}`, exact.
    pub fn autocorrelation(&self, bits: &[bool]) -> Vec<i64> {
        let mut z: Vec<Complex<f64>> = bits.iter().map(|&b| Complex::new(b as u8 as f64, 0.0)).collect();
        self.transform(&mut z, false);
        z.par_iter_mut().for_each(|c| *c = Complex::new(c.norm_sqr(), 0.0));
        self.transform(&mut z, true);
        let scale = 1.0 / z.len() as f64;
        z.iter().map(|c| (c.re * scale).round() as i64).collect()
    }

    /// Spectrum of a real even tile (imaginary parts vanish).
    pub fn real_spectrum(&self, tile: &[f64]) -> Vec<f64> {
        let mut z: Vec<Complex<f64>> = tile.iter().map(|&x| Complex::new(x, 0.0)).collect();
        self.transform(&mut z, false);
        z.iter().map(|c| c.re).collect()
    }

    /// Periodic convolution of `bits` with the tile whose spectrum is given.
    pub fn convolve(&self, bits: &[bool], spectrum: &[f64]) -> Vec<f64> {
        let mut z: Vec<Complex<f64>> = bits.iter().map(|&b| Complex::new(b as u8 as f64, 0.0)).collect();
        self.transform(&mut z, false);
        z.par_iter_mut().zip(spectrum.par_iter()).for_each(|(c, &s)| *c *= s);
        self.transform(&mut z, true);
        let scale = 1.0 / z.len() as f64;
        z.iter().map(|c| c.re * scale).collect()
    }
}
