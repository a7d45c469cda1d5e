//! Convolution of lattice distributions, by direct summation or by FFT.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::GridDistribution;
use crate::{Real, Result};

/// Above this many cells `convolve` switches to the FFT route.
pub const FFT_THRESHOLD: usize = 256;

/// Law of `A + B` for independent `A`, `B` on the same lattice. Mass that
/// lands past the grid end becomes truncated mass.
pub fn convolve<T: Real>(a: &GridDistribution<T>, b: &GridDistribution<T>) -> Result<GridDistribution<T>> {
    if a.cells() > FFT_THRESHOLD {
        convolve_fft(a, b)
    } else {
        convolve_direct(a, b)
    }
}

/// Quadratic-time convolution. Terms `a_i b_j` and `a_j b_i` are paired
/// before summation, which makes the result bitwise symmetric in `a`, `b`.
pub fn convolve_direct<T: Real>(
    a: &GridDistribution<T>,
    b: &GridDistribution<T>,
) -> Result<GridDistribution<T>> {
    a.check_compatible(b)?;
    let out = direct_masses(&a.masses(), &b.masses());
    GridDistribution::from_masses(a.step(), &out)
}

pub(crate) fn direct_masses<T: Real>(ma: &[T], mb: &[T]) -> Vec<T> {
    let n = ma.len();
    (0..n)
        .map(|k| {
            let mut acc = T::zero();
            let mut i = 0;
            while 2 * i < k {
                acc = acc + (ma[i] * mb[k - i] + ma[k - i] * mb[i]);
                i += 1;
            }
            if 2 * i == k {
                acc = acc + ma[i] * mb[i];
            }
            acc
        })
        .collect()
}

pub fn convolve_fft<T: Real>(a: &GridDistribution<T>, b: &GridDistribution<T>) -> Result<GridDistribution<T>> {
    a.check_compatible(b)?;
    let mut conv = FftConvolver::new(a.cells() + 1);
    let kernel = conv.spectrum(&b.masses());
    let out = conv.apply(&a.masses(), &kernel);
    GridDistribution::from_masses(a.step(), &out)
}

/// Linear convolution of length-`n` mass vectors truncated back to `n`,
/// with plans cached so a fixed kernel can be applied repeatedly.
pub(crate) struct FftConvolver<T: Real> {
    n: usize,
    size: usize,
    forward: std::sync::Arc<dyn rustfft::Fft<T>>,
    inverse: std::sync::Arc<dyn rustfft::Fft<T>>,
}

impl<T: Real> FftConvolver<T> {
    pub(crate) fn new(n: usize) -> Self {
        let size = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::new();
        Self {
            n,
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        }
    }

    pub(crate) fn spectrum(&mut self, masses: &[T]) -> Vec<Complex<T>> {
        let mut buf: Vec<Complex<T>> = masses
            .iter()
            .map(|&m| Complex::new(m, T::zero()))
            .chain(std::iter::repeat(Complex::new(T::zero(), T::zero())))
            .take(self.size)
            .collect();
        self.forward.process(&mut buf);
        buf
    }

    pub(crate) fn apply(&mut self, masses: &[T], kernel: &[Complex<T>]) -> Vec<T> {
        let mut buf = self.spectrum(masses);
        for (x, k) in buf.iter_mut().zip(kernel) {
            *x = *x * *k;
        }
        self.inverse.process(&mut buf);
        let scale = T::count(self.size).recip();
        // Rounding noise of order eps around exact zeros is clipped.
        buf.iter()
            .take(self.n)
            .map(|c| (c.re * scale).max(T::zero()))
            .collect()
    }
}
