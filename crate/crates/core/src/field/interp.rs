use rayon::prelude::*;

use super::GridSpec;
use crate::fft::C64;

/// Off-grid evaluation of a truncated Fourier series.
///
/// Only modes with `|û| > cutoff · max|û|` are kept (`cutoff = 0` keeps every
/// nonzero mode, which is the exact series). Nyquist coefficients are split
/// evenly between `±n/2`, matching zero-padded refinement of the grid.
#[derive(Debug, Clone)]
pub struct Interpolator {
    k0: f64,
    ncomp: usize,
    kmax: usize,
    lines: Vec<Line>,
    m1: Vec<i32>,
    coef: Vec<C64>,
}

#[derive(Debug, Clone, Copy)]
struct Line {
    m2: i32,
    m3: i32,
    start: usize,
    end: usize,
}

impl Interpolator {
    pub fn new(grid: &GridSpec, spectra: &[&[C64]], cutoff: f64) -> Self {
        let ncomp = spectra.len();
        assert!((1..=3).contains(&ncomp), "between one and three components");
        let n = grid.n();
        let big = spectra
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0f64, |m, z| m.max(z.norm()));
        let thresh = cutoff * big;
        let half = (n / 2) as i64;

        let mut modes: Vec<([i64; 3], Vec<C64>)> = Vec::new();
        for idx in 0..grid.len() {
            let mag = spectra.iter().map(|s| s[idx].norm()).fold(0.0f64, f64::max);
            if mag == 0.0 || mag <= thresh {
                continue;
            }
            let m = grid.mode_vector(idx);
            let mut targets: Vec<([i64; 3], f64)> = vec![(m, 1.0)];
            for axis in 0..3 {
                if m[axis] == -half {
                    targets = targets
                        .into_iter()
                        .flat_map(|(t, w)| {
                            let mut b = t;
                            b[axis] = half;
                            [(t, 0.5 * w), (b, 0.5 * w)]
                        })
                        .collect();
                }
            }
            for (t, w) in targets {
                modes.push((t, spectra.iter().map(|s| s[idx] * w).collect()));
            }
        }
        modes.sort_by_key(|(m, _)| (m[2], m[1], m[0]));

        let mut lines = Vec::new();
        let mut m1 = Vec::with_capacity(modes.len());
        let mut coef = Vec::with_capacity(modes.len() * ncomp);
        let mut kmax = 0usize;
        for (m, c) in &modes {
            let pos = m1.len();
            match lines.last_mut() {
                Some(Line { m2, m3, end, .. }) if *m2 == m[1] as i32 && *m3 == m[2] as i32 => {
                    *end = pos + 1
                }
                _ => lines.push(Line {
                    m2: m[1] as i32,
                    m3: m[2] as i32,
                    start: pos,
                    end: pos + 1,
                }),
            }
            m1.push(m[0] as i32);
            coef.extend_from_slice(c);
            kmax = kmax.max(
                m.iter()
                    .map(|v| v.unsigned_abs() as usize)
                    .max()
                    .unwrap_or(0),
            );
        }
        Self {
            k0: grid.k0(),
            ncomp,
            kmax,
            lines,
            m1,
            coef,
        }
    }

    /// Number of retained modes.
    pub fn modes(&self) -> usize {
        self.m1.len()
    }

    pub fn components(&self) -> usize {
        self.ncomp
    }

    fn table(&self, x: f64) -> Vec<C64> {
        let k = self.kmax as i64;
        (-k..=k)
            .map(|m| C64::from_polar(1.0, self.k0 * m as f64 * x))
            .collect()
    }

    /// Series value at `x`; unused trailing components are zero.
    pub fn eval(&self, x: [f64; 3]) -> [f64; 3] {
        let (ex, ey, ez) = (self.table(x[0]), self.table(x[1]), self.table(x[2]));
        let off = self.kmax as i32;
        let nc = self.ncomp;
        let mut acc = [C64::new(0.0, 0.0); 3];
        for line in &self.lines {
            let mut inner = [C64::new(0.0, 0.0); 3];
            for p in line.start..line.end {
                let e = ex[(self.m1[p] + off) as usize];
                for c in 0..nc {
                    inner[c] += self.coef[p * nc + c] * e;
                }
            }
            let f = ey[(line.m2 + off) as usize] * ez[(line.m3 + off) as usize];
            for c in 0..nc {
                acc[c] += inner[c] * f;
            }
        }
        [acc[0].re, acc[1].re, acc[2].re]
    }

    pub fn eval_many(&self, points: &[[f64; 3]]) -> Vec<[f64; 3]> {
        points.par_iter().map(|&p| self.eval(p)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Field, ScalarField};
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn node_values_are_reproduced() {
        let g = GridSpec::periodic(8, 1.0).unwrap();
        let f = Field::from_fn(g, |x| {
            [
                (x[0] + 2.0 * x[1]).sin(),
                (3.0 * x[2]).cos() * x[0].sin(),
                0.3,
            ]
        });
        let it = f.interpolator(0.0);
        for idx in [0, 5, 77, 300, 511] {
            let v = it.eval(g.position(idx));
            for c in 0..3 {
                assert!((v[c] - f.physical()[c][idx]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn analytic_sine() {
        let g = GridSpec::periodic(16, 1.0).unwrap();
        let f = ScalarField::from_fn(g, |x| x[0].sin());
        assert!((f.sample([PI / 3.0, 0.4, 1.0]) - 3f64.sqrt() / 2.0).abs() < 1e-13);
    }

    #[test]
    fn nyquist_mode_is_split() {
        // cos(4x) on n=8 sits entirely on the Nyquist plane
        let g = GridSpec::periodic(8, 1.0).unwrap();
        let f = ScalarField::from_fn(g, |x| (4.0 * x[0]).cos());
        let x = 0.3;
        assert!((f.sample([x, 0.0, 0.0]) - (4.0 * x).cos()).abs() < 1e-13);
    }
}
