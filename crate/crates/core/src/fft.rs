//! In-place radix-2 complex FFT and its 2-D wrapper.
//!
//! Grids are powers of two by construction, so a plain iterative
//! Cooley–Tukey transform with a precomputed twiddle table is all the
//! spectral calculus needs. Transforms are unnormalized in the forward
//! direction; the inverse applies the 1/n² factor.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

pub(crate) struct FftPlan {
    n: usize,
    /// Forward twiddles exp(-2πi k/n) for k < n/2.
    twiddles: Vec<Complex64>,
}

impl FftPlan {
    pub fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        let step = -core::f64::consts::TAU / n as f64;
        let twiddles = (0..n / 2)
            .map(|k| {
                let phi = step * k as f64;
                Complex64::new(libm::cos(phi), libm::sin(phi))
            })
            .collect();
        FftPlan { n, twiddles }
    }

    /// 1-D transform of `data` (length n) in place.
    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        debug_assert_eq!(data.len(), n);

        // Bit-reversal permutation.
        let shift = usize::BITS - n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> shift;
            if j > i {
                data.swap(i, j);
            }
        }

        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for block in data.chunks_exact_mut(len) {
                for j in 0..half {
                    let mut w = self.twiddles[j * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let t = w * block[j + half];
                    block[j + half] = block[j] - t;
                    block[j] += t;
                }
            }
            len *= 2;
        }
    }

    /// Forward 2-D transform of an n×n real field (row-major) into an n×n
    /// complex spectrum, bin `(kx, ky)` at index `ky*n + kx`.
    pub fn forward2(&self, src: &[f64]) -> Vec<Complex64> {
        let n = self.n;
        debug_assert_eq!(src.len(), n * n);
        let mut spec: Vec<Complex64> =
            src.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for row in spec.chunks_exact_mut(n) {
            self.transform(row, false);
        }
        self.columns(&mut spec, false);
        spec
    }

    /// Inverse 2-D transform back to a real field; the imaginary residue of
    /// a conjugate-symmetric spectrum is discarded.
    pub fn inverse2_real(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        let n = self.n;
        debug_assert_eq!(spec.len(), n * n);
        for row in spec.chunks_exact_mut(n) {
            self.transform(row, true);
        }
        self.columns(&mut spec, true);
        let scale = 1.0 / (n * n) as f64;
        spec.iter().map(|c| c.re * scale).collect()
    }

    fn columns(&self, spec: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for x in 0..n {
            for y in 0..n {
                col[y] = spec[y * n + x];
            }
            self.transform(&mut col, inverse);
            for y in 0..n {
                spec[y * n + x] = col[y];
            }
        }
    }
}
