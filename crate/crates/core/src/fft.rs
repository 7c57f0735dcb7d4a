//! Zero-padded linear convolution on the lattice through a d-dimensional FFT.
//!
//! Fields live on `N^d` nodes and are embedded in a `(2N)^d` torus, so a
//! kernel sampled at every offset in `[-(N-1), N-1]^d` never wraps onto the
//! output. Two real kernels are packed into one complex spectrum
//! `K1 + i K2`; since the field is real, the real and imaginary parts of the
//! inverse transform are the two convolutions.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::{ScalarField, VelocityGrid};

const TILE: usize = 16;

pub struct Convolver {
    grid: VelocityGrid,
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Convolver {
    pub fn new(grid: &VelocityGrid) -> Self {
        let m = 2 * grid.points_per_axis();
        let mut planner = FftPlanner::new();
        Self {
            grid: *grid,
            m,
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
        }
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    /// Padded points per axis.
    pub fn padded_points(&self) -> usize {
        self.m
    }

    pub fn padded_len(&self) -> usize {
        self.m.pow(self.grid.dim() as u32)
    }

    /// In-place unnormalised d-dimensional transform of a padded array.
    pub fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inv } else { &self.fwd };
        debug_assert_eq!(data.len(), self.padded_len());
        transform_nd(plan.as_ref(), self.m, self.grid.dim(), data);
    }

    /// Spectrum of a lattice field embedded at the low corner of the torus.
    pub fn field_spectrum(&self, values: &[f64]) -> Vec<Complex64> {
        let d = self.grid.dim();
        let mut buf = vec![Complex64::default(); self.padded_len()];
        let mut idx = vec![0usize; d];
        for (i, &x) in values.iter().enumerate() {
            self.grid.unravel(i, &mut idx);
            let p = idx.iter().fold(0, |acc, &k| acc * self.m + k);
            buf[p] = Complex64::new(x, 0.0);
        }
        self.transform(&mut buf, false);
        buf
    }

    /// Spectrum of `re + i im`, both sampled at integer cell offsets in
    /// `[-(N-1), N-1]^d`. The unused offset `N` is set to zero.
    pub fn kernel_spectrum(
        &self,
        re: &(dyn Fn(&[i64]) -> f64 + Sync),
        im: Option<&(dyn Fn(&[i64]) -> f64 + Sync)>,
    ) -> Vec<Complex64> {
        self.sampled_spectrum(re, im, self.grid.points_per_axis() as i64)
    }

    /// Spectrum for output on the `(N+1)^d` vertex lattice `-L + s h`: the
    /// closures receive `r = s - j` in `[-(N-1), N]^d` and should evaluate
    /// the kernel at `(r - 1/2) h`.
    pub fn staggered_kernel_spectrum(
        &self,
        re: &(dyn Fn(&[i64]) -> f64 + Sync),
        im: Option<&(dyn Fn(&[i64]) -> f64 + Sync)>,
    ) -> Vec<Complex64> {
        self.sampled_spectrum(re, im, i64::MAX)
    }

    fn sampled_spectrum(
        &self,
        re: &(dyn Fn(&[i64]) -> f64 + Sync),
        im: Option<&(dyn Fn(&[i64]) -> f64 + Sync)>,
        n: i64,
    ) -> Vec<Complex64> {
        let m = self.m;
        let d = self.grid.dim();
        let mut buf = vec![Complex64::default(); self.padded_len()];
        buf.par_chunks_mut(m).enumerate().for_each(|(row, chunk)| {
            let mut off = vec![0i64; d];
            let mut r = row;
            for k in (0..d - 1).rev() {
                off[k] = wrap(r % m, m);
                r /= m;
            }
            if off[..d - 1].iter().any(|&o| o.abs() == n) {
                return;
            }
            for (j, slot) in chunk.iter_mut().enumerate() {
                off[d - 1] = wrap(j, m);
                if off[d - 1].abs() == n {
                    continue;
                }
                let a = re(&off);
                let b = im.map_or(0.0, |g| g(&off));
                *slot = Complex64::new(a, b);
            }
        });
        self.transform(&mut buf, false);
        buf
    }

    /// Multiplies a field spectrum by a packed kernel spectrum, inverts, and
    /// returns the two real convolutions restricted to the grid, scaled by
    /// the cell volume.
    pub fn apply(&self, field_hat: &[Complex64], kernel_hat: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let mut buf: Vec<Complex64> = field_hat
            .par_iter()
            .zip(kernel_hat.par_iter())
            .map(|(a, b)| a * b)
            .collect();
        self.transform(&mut buf, true);
        self.restrict(&buf)
    }

    /// As `apply`, for a staggered kernel spectrum; returns `(N+1)^d` values.
    pub fn apply_staggered(&self, field_hat: &[Complex64], kernel_hat: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let mut buf: Vec<Complex64> = field_hat
            .par_iter()
            .zip(kernel_hat.par_iter())
            .map(|(a, b)| a * b)
            .collect();
        self.transform(&mut buf, true);
        let scale = self.grid.cell_volume() / self.padded_len() as f64;
        let d = self.grid.dim();
        let side = self.grid.points_per_axis() + 1;
        let len = side.pow(d as u32);
        let mut re = vec![0.0; len];
        let mut im = vec![0.0; len];
        for i in 0..len {
            let mut rest = i;
            let mut p = 0;
            let mut mul = 1;
            for _ in 0..d {
                p += (rest % side) * mul;
                rest /= side;
                mul *= self.m;
            }
            re[i] = buf[p].re * scale;
            im[i] = buf[p].im * scale;
        }
        (re, im)
    }

    /// Takes the low-corner `N^d` block of a padded array and applies the
    /// inverse-transform and quadrature scaling.
    pub fn restrict(&self, buf: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let scale = self.grid.cell_volume() / self.padded_len() as f64;
        let d = self.grid.dim();
        let len = self.grid.len();
        let mut re = vec![0.0; len];
        let mut im = vec![0.0; len];
        let mut idx = vec![0usize; d];
        for i in 0..len {
            self.grid.unravel(i, &mut idx);
            let p = idx.iter().fold(0, |acc, &k| acc * self.m + k);
            re[i] = buf[p].re * scale;
            im[i] = buf[p].im * scale;
        }
        (re, im)
    }

    /// Squared angular wavenumber of every padded mode.
    pub fn wavenumber_sq(&self) -> Vec<f64> {
        let m = self.m;
        let d = self.grid.dim();
        let base = 2.0 * std::f64::consts::PI / (m as f64 * self.grid.spacing());
        let k2: Vec<f64> = (0..m)
            .map(|j| {
                let q = wrap(j, m) as f64 * base;
                q * q
            })
            .collect();
        let mut out = vec![0.0; self.padded_len()];
        for (p, slot) in out.iter_mut().enumerate() {
            let mut r = p;
            let mut s = 0.0;
            for _ in 0..d {
                s += k2[r % m];
                r /= m;
            }
            *slot = s;
        }
        out
    }
}

#[inline]
fn wrap(j: usize, m: usize) -> i64 {
    if j <= m / 2 {
        j as i64
    } else {
        j as i64 - m as i64
    }
}

/// In-place d-dimensional transform of an `m^d` row-major array.
pub(crate) fn transform_nd(plan: &dyn Fft<f64>, m: usize, d: usize, data: &mut [Complex64]) {
    for axis in 0..d {
        let stride = m.pow((d - 1 - axis) as u32);
        if stride == 1 {
            data.par_chunks_mut(m * 64).for_each(|chunk| {
                let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
                plan.process_with_scratch(chunk, &mut scratch);
            });
            continue;
        }
        data.par_chunks_mut(m * stride).for_each(|block| {
            let mut lines = vec![Complex64::default(); TILE * m];
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            let mut c0 = 0;
            while c0 < stride {
                let w = TILE.min(stride - c0);
                for j in 0..m {
                    let row = &block[j * stride + c0..j * stride + c0 + w];
                    for (t, &x) in row.iter().enumerate() {
                        lines[t * m + j] = x;
                    }
                }
                plan.process_with_scratch(&mut lines[..w * m], &mut scratch);
                for j in 0..m {
                    let row = &mut block[j * stride + c0..j * stride + c0 + w];
                    for (t, x) in row.iter_mut().enumerate() {
                        *x = lines[t * m + j];
                    }
                }
                c0 += w;
            }
        });
    }
}

/// Gradient by Fourier differentiation on the periodic `N^d` box (the
/// Nyquist mode is dropped).
pub fn spectral_gradient(u: &ScalarField) -> Vec<ScalarField> {
    let grid = u.grid;
    let n = grid.points_per_axis();
    let d = grid.dim();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut hat: Vec<Complex64> = u.values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    transform_nd(fwd.as_ref(), n, d, &mut hat);
    let period = 2.0 * grid.half_extent();
    let wave = |j: usize| -> f64 {
        let j = j as i64;
        let n = n as i64;
        let s = if j < n / 2 { j } else if j == n / 2 { 0 } else { j - n };
        std::f64::consts::TAU * s as f64 / period
    };
    let norm = 1.0 / grid.len() as f64;
    let mut idx = vec![0usize; d];
    (0..d)
        .map(|k| {
            let mut buf = hat.clone();
            for (i, x) in buf.iter_mut().enumerate() {
                grid.unravel(i, &mut idx);
                *x *= Complex64::new(0.0, wave(idx[k]));
            }
            transform_nd(inv.as_ref(), n, d, &mut buf);
            ScalarField {
                grid,
                values: buf.iter().map(|z| z.re * norm).collect(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transform_roundtrip() {
        let g = VelocityGrid::new(3, 1.0, 4).unwrap();
        let c = Convolver::new(&g);
        let orig: Vec<Complex64> = (0..c.padded_len())
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut x = orig.clone();
        c.transform(&mut x, false);
        c.transform(&mut x, true);
        let n = c.padded_len() as f64;
        for (a, b) in x.iter().zip(&orig) {
            assert!((a / n - b).norm() < 1e-12);
        }
    }

    #[test]
    fn packed_pair_matches_direct_sum() {
        let g = VelocityGrid::new(2, 1.0, 6).unwrap();
        let c = Convolver::new(&g);
        let k1 = |o: &[i64]| 1.0 / (1.0 + (o[0] * o[0] + 2 * o[1] * o[1]) as f64);
        let k2 = |o: &[i64]| (o[0] - o[1]) as f64;
        let f: Vec<f64> = (0..g.len()).map(|i| ((i * 7 % 5) as f64) - 1.5).collect();
        let kh = c.kernel_spectrum(&k1, Some(&k2));
        let (a, b) = c.apply(&c.field_spectrum(&f), &kh);
        let n = g.points_per_axis();
        for i in 0..n {
            for j in 0..n {
                let (mut s1, mut s2) = (0.0, 0.0);
                for p in 0..n {
                    for q in 0..n {
                        let o = [i as i64 - p as i64, j as i64 - q as i64];
                        s1 += f[p * n + q] * k1(&o);
                        s2 += f[p * n + q] * k2(&o);
                    }
                }
                let h2 = g.cell_volume();
                assert!((a[i * n + j] - h2 * s1).abs() < 1e-12);
                assert!((b[i * n + j] - h2 * s2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spectral_gradient_of_gaussian() {
        let g = VelocityGrid::new(3, 8.0, 32).unwrap();
        let u = ScalarField::from_fn(&g, |v| (-0.5 * v.iter().map(|x| x * x).sum::<f64>()).exp());
        let grad = spectral_gradient(&u);
        for i in (0..g.len()).step_by(97) {
            let v = g.node_vec(i);
            for k in 0..3 {
                assert!((grad[k].values[i] + v[k] * u.values[i]).abs() < 1e-7);
            }
        }
    }
}
