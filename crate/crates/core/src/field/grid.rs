use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Periodic `n³` grid on a cube of side `domain_length`, plus the kinematic
/// viscosity of the fluid living on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    domain_length: f64,
    nu: f64,
}

impl GridSpec {
    pub fn new(n: usize, domain_length: f64, nu: f64) -> Result<Self> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "n = {n} must be even and at least 8"
            )));
        }
        if !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n = {n} must be a power of two"
            )));
        }
        if !(domain_length > 0.0 && domain_length.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "domain length {domain_length} must be positive"
            )));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "viscosity {nu} must be positive"
            )));
        }
        Ok(Self {
            n,
            domain_length,
            nu,
        })
    }

    /// `[0, 2π)³` with the given resolution and viscosity.
    pub fn periodic(n: usize, nu: f64) -> Result<Self> {
        Self::new(n, 2.0 * PI, nu)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn with_nu(&self, nu: f64) -> Result<Self> {
        Self::new(self.n, self.domain_length, nu)
    }

    /// Same cube and viscosity at a different resolution.
    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(n, self.domain_length, self.nu)
    }

    /// Number of grid points, `n³`.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.domain_length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(3)
    }

    pub fn volume(&self) -> f64 {
        self.domain_length.powi(3)
    }

    /// Fundamental wavenumber `2π / L`.
    pub fn k0(&self) -> f64 {
        2.0 * PI / self.domain_length
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx % n, (idx / n) % n, idx / (n * n)]
    }

    /// Physical coordinates of grid node `idx`.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let [i, j, k] = self.unravel(idx);
        let h = self.dx();
        [i as f64 * h, j as f64 * h, k as f64 * h]
    }

    /// Signed integer wavenumber of FFT index `i`; the Nyquist index maps to
    /// `-n/2`.
    #[inline]
    pub fn signed_mode(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// FFT index of signed integer wavenumber `m`.
    #[inline]
    pub fn mode_index(&self, m: i64) -> usize {
        m.rem_euclid(self.n as i64) as usize
    }

    #[inline]
    pub fn is_nyquist(&self, i: usize) -> bool {
        i == self.n / 2
    }

    /// Physical wavenumbers along one axis.
    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.k0() * self.signed_mode(i) as f64)
            .collect()
    }

    /// Wavenumbers used for odd derivatives: the Nyquist entry is zeroed so
    /// that derivatives of real fields stay real.
    pub fn derivative_wavenumbers(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                if self.is_nyquist(i) {
                    0.0
                } else {
                    self.k0() * self.signed_mode(i) as f64
                }
            })
            .collect()
    }

    /// Integer wavevector of flat spectral index `idx`.
    pub fn mode_vector(&self, idx: usize) -> [i64; 3] {
        let [i, j, k] = self.unravel(idx);
        [
            self.signed_mode(i),
            self.signed_mode(j),
            self.signed_mode(k),
        ]
    }

    /// Wraps a point into `[0, L)³`.
    pub fn wrap(&self, x: [f64; 3]) -> [f64; 3] {
        x.map(|c| c.rem_euclid(self.domain_length))
    }

    /// Minimum-image displacement from `b` to `a`.
    pub fn periodic_delta(&self, a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        let l = self.domain_length;
        let mut d = [0.0; 3];
        for c in 0..3 {
            let mut v = (a[c] - b[c]).rem_euclid(l);
            if v > 0.5 * l {
                v -= l;
            }
            d[c] = v;
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(6, 1.0, 1.0).is_err());
        assert!(GridSpec::new(12, 1.0, 1.0).is_err());
        assert!(GridSpec::new(16, 0.0, 1.0).is_err());
        assert!(GridSpec::new(16, 1.0, -1.0).is_err());
        assert!(GridSpec::new(16, 1.0, 0.1).is_ok());
    }

    #[test]
    fn mode_round_trip() {
        let g = GridSpec::periodic(16, 1.0).unwrap();
        for i in 0..16 {
            assert_eq!(g.mode_index(g.signed_mode(i)), i);
        }
        assert_eq!(g.signed_mode(8), -8);
        assert_eq!(g.derivative_wavenumbers()[8], 0.0);
        assert_eq!(g.wavenumbers()[15], -1.0);
    }

    #[test]
    fn periodic_delta_is_minimum_image() {
        let g = GridSpec::periodic(8, 1.0).unwrap();
        let d = g.periodic_delta([0.1, 6.0, 3.0], [6.2, 0.2, 3.0]);
        let l = 2.0 * PI;
        assert!((d[0] - (0.1 + l - 6.2)).abs() < 1e-12);
        assert!((d[1] - (6.0 - 0.2 - l)).abs() < 1e-12);
        assert_eq!(d[2], 0.0);
    }
}
