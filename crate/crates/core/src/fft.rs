//! Three-dimensional complex FFTs on `n³` cubes.
//!
//! Arrays are stored x-fastest: sample `(i, j, k)` lives at `i + n*(j + n*k)`.
//! The forward transform carries the `1/n³` factor, so a field is recovered
//! as `u(x) = Σ_k û(k) e^{ik·x}` and a constant `c` maps to `û(0) = c`.
//!
//! x-lines are contiguous and transformed in place. y- and z-lines are
//! brought into rows by small `n × n` transposes so that every 1-D transform
//! runs on contiguous memory.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub type C64 = Complex64;

pub struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("n", &self.n).finish()
    }
}

/// Shared plan for cube side `n`.
pub fn plan(n: usize) -> Arc<Fft3> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Fft3>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(Fft3::new(n)))
        .clone()
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place forward transform, normalised by `1/n³`.
    pub fn forward(&self, data: &mut [C64]) {
        self.run(data, &self.forward);
        let scale = 1.0 / self.len() as f64;
        data.par_chunks_mut(4096)
            .for_each(|c| c.iter_mut().for_each(|v| *v *= scale));
    }

    /// In-place forward transform without the `1/n³` factor.
    pub fn forward_unscaled(&self, data: &mut [C64]) {
        self.run(data, &self.forward);
    }

    /// In-place inverse transform (no normalisation).
    pub fn inverse(&self, data: &mut [C64]) {
        self.run(data, &self.inverse);
    }

    fn run(&self, data: &mut [C64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let nn = n * n;
        assert_eq!(data.len(), self.len(), "fft buffer has wrong length");
        let scratch_len = fft.get_inplace_scratch_len();
        let zero = C64::new(0.0, 0.0);
        let buffers = || (vec![zero; nn], vec![zero; scratch_len]);

        // x: lines are contiguous
        data.par_chunks_mut(nn).for_each_init(
            || vec![zero; scratch_len],
            |scratch, plane| fft.process_with_scratch(plane, scratch),
        );

        // y: transpose each z-plane, transform rows, transpose back
        data.par_chunks_mut(nn)
            .for_each_init(buffers, |(tmp, scratch), plane| {
                transpose(plane, tmp, n);
                fft.process_with_scratch(tmp, scratch);
                transpose(tmp, plane, n);
            });

        // z: gather the (k, i) slab of each j, transform, scatter back
        let mut slabs = vec![zero; data.len()];
        let src: &[C64] = data;
        slabs
            .par_chunks_mut(nn)
            .enumerate()
            .for_each_init(buffers, |(tmp, scratch), (j, rows)| {
                for k in 0..n {
                    let off = n * j + nn * k;
                    tmp[n * k..n * (k + 1)].copy_from_slice(&src[off..off + n]);
                }
                transpose(tmp, rows, n);
                fft.process_with_scratch(rows, scratch);
                transpose(rows, tmp, n);
                rows.copy_from_slice(tmp);
            });
        data.par_chunks_mut(nn).enumerate().for_each(|(k, plane)| {
            for (j, slab) in slabs.chunks(nn).enumerate() {
                plane[n * j..n * (j + 1)].copy_from_slice(&slab[n * k..n * (k + 1)]);
            }
        });
    }

    /// Spectra of two real arrays from a single complex transform.
    pub fn forward_real_pair(&self, a: &[f64], b: &[f64]) -> (Vec<C64>, Vec<C64>) {
        let mut z: Vec<C64> = a.par_iter().zip(b).map(|(&x, &y)| C64::new(x, y)).collect();
        self.forward(&mut z);
        let n = self.n;
        let zero = C64::new(0.0, 0.0);
        let (mut sa, mut sb) = (vec![zero; z.len()], vec![zero; z.len()]);
        let half_i = C64::new(0.0, -0.5);
        sa.par_chunks_mut(n * n)
            .zip(sb.par_chunks_mut(n * n))
            .enumerate()
            .for_each(|(k, (pa, pb))| {
                let km = (n - k) % n;
                for j in 0..n {
                    let jm = (n - j) % n;
                    let row = n * (j + n * k);
                    let row_m = n * (jm + n * km);
                    for i in 0..n {
                        let im = (n - i) % n;
                        let zk = z[row + i];
                        let zm = z[row_m + im].conj();
                        pa[n * j + i] = (zk + zm) * 0.5;
                        pb[n * j + i] = (zk - zm) * half_i;
                    }
                }
            });
        (sa, sb)
    }

    pub fn forward_real(&self, a: &[f64]) -> Vec<C64> {
        let mut z: Vec<C64> = a.par_iter().map(|&x| C64::new(x, 0.0)).collect();
        self.forward(&mut z);
        z
    }

    /// Real parts of the inverse transforms of two spectra, using one
    /// complex transform. Exact when both spectra are Hermitian.
    pub fn inverse_real_pair(&self, a: &[C64], b: &[C64]) -> (Vec<f64>, Vec<f64>) {
        let i = C64::new(0.0, 1.0);
        let mut z: Vec<C64> = a.par_iter().zip(b).map(|(&x, &y)| x + i * y).collect();
        self.inverse(&mut z);
        let re = z.par_iter().map(|c| c.re).collect();
        let im = z.par_iter().map(|c| c.im).collect();
        (re, im)
    }

    pub fn inverse_real(&self, a: &[C64]) -> Vec<f64> {
        let mut z = a.to_vec();
        self.inverse(&mut z);
        z.into_par_iter().map(|c| c.re).collect()
    }

    /// Physical samples of three spectra (two transforms).
    pub fn inverse_real3(&self, s: [&[C64]; 3]) -> [Vec<f64>; 3] {
        let (a, b) = self.inverse_real_pair(s[0], s[1]);
        let c = self.inverse_real(s[2]);
        [a, b, c]
    }

    /// Spectra of three real arrays (two transforms).
    pub fn forward_real3(&self, p: [&[f64]; 3]) -> [Vec<C64>; 3] {
        let (a, b) = self.forward_real_pair(p[0], p[1]);
        let c = self.forward_real(p[2]);
        [a, b, c]
    }
}

/// `dst[i*n + j] = src[j*n + i]` for an `n × n` block, in 8 × 8 tiles when
/// `n` allows.
fn transpose(src: &[C64], dst: &mut [C64], n: usize) {
    let b = if n.is_multiple_of(8) { 8 } else { 1 };
    for jb in (0..n).step_by(b) {
        for ib in (0..n).step_by(b) {
            for j in jb..jb + b {
                let row = &src[j * n + ib..j * n + ib + b];
                for (d, v) in row.iter().enumerate() {
                    dst[(ib + d) * n + j] = *v;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(n: usize, data: &[C64]) -> Vec<C64> {
        let tau = 2.0 * std::f64::consts::PI / n as f64;
        let mut out = vec![C64::new(0.0, 0.0); data.len()];
        for k3 in 0..n {
            for k2 in 0..n {
                for k1 in 0..n {
                    let mut acc = C64::new(0.0, 0.0);
                    for x3 in 0..n {
                        for x2 in 0..n {
                            for x1 in 0..n {
                                let phase = -tau * ((k1 * x1 + k2 * x2 + k3 * x3) as f64);
                                acc += data[x1 + n * (x2 + n * x3)] * C64::from_polar(1.0, phase);
                            }
                        }
                    }
                    out[k1 + n * (k2 + n * k3)] = acc / (n * n * n) as f64;
                }
            }
        }
        out
    }

    #[test]
    fn forward_matches_naive_dft() {
        let n = 4;
        let data: Vec<C64> = (0..n * n * n)
            .map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let expect = naive_dft(n, &data);
        let mut got = data.clone();
        Fft3::new(n).forward(&mut got);
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn real_pair_matches_separate_transforms() {
        let n = 8;
        let f = Fft3::new(n);
        let a: Vec<f64> = (0..f.len()).map(|i| (i as f64 * 0.3).sin()).collect();
        let b: Vec<f64> = (0..f.len()).map(|i| (i as f64 * 0.7).cos() + 0.2).collect();
        let (sa, sb) = f.forward_real_pair(&a, &b);
        let ea = f.forward_real(&a);
        let eb = f.forward_real(&b);
        for i in 0..f.len() {
            assert!((sa[i] - ea[i]).norm() < 1e-14);
            assert!((sb[i] - eb[i]).norm() < 1e-14);
        }
        let (ra, rb) = f.inverse_real_pair(&sa, &sb);
        for i in 0..f.len() {
            assert!((ra[i] - a[i]).abs() < 1e-13);
            assert!((rb[i] - b[i]).abs() < 1e-13);
        }
    }
}
