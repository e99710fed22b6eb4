//! Periodic fields on the `n³` grid.
//!
//! A [`Field`] (three components) or [`ScalarField`] keeps both its physical
//! samples and its spectral coefficients; the two are kept FFT-consistent at
//! construction and the value is immutable afterwards. All operators return
//! new fields.

mod generate;
mod grid;
mod interp;

pub use generate::{selfsimilar_profile, Generator};
pub use grid::GridSpec;
pub use interp::Interpolator;

use rayon::prelude::*;

use crate::fft::{plan, C64};
use crate::sum::{max_by, tree_sum_by};
use crate::{Error, Result};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Norm selector for [`Field::norm`] and [`ScalarField::norm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    /// `L^p` over one period cell, `p ∈ [1, ∞]`.
    Lp(f64),
    /// Homogeneous Sobolev norm `‖Λ^s f‖_{L²}`.
    Hdot(f64),
    /// Enstrophy norm, `‖∇u‖_{L²}`.
    V,
}

fn check_len(grid: &GridSpec, len: usize) -> Result<()> {
    if len != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: len,
        });
    }
    Ok(())
}

/// Applies a per-mode multiplier to one spectrum.
fn multiply<F>(grid: &GridSpec, spec: &[C64], f: F) -> Vec<C64>
where
    F: Fn(usize) -> C64 + Sync,
{
    debug_assert_eq!(spec.len(), grid.len());
    spec.par_iter()
        .enumerate()
        .map(|(idx, &c)| c * f(idx))
        .collect()
}

/// `(ik)^α` for one flat spectral index.
fn derivative_symbol(
    grid: &GridSpec,
    kd: &[Vec<f64>; 3],
    kf: &[Vec<f64>; 3],
    idx: usize,
    alpha: [u32; 3],
) -> C64 {
    let ijk = grid.unravel(idx);
    let mut sym = C64::new(1.0, 0.0);
    for axis in 0..3 {
        let a = alpha[axis];
        if a == 0 {
            continue;
        }
        let k = if a % 2 == 1 {
            kd[axis][ijk[axis]]
        } else {
            kf[axis][ijk[axis]]
        };
        sym *= C64::new(0.0, k).powu(a);
    }
    sym
}

fn axis_tables(grid: &GridSpec) -> ([Vec<f64>; 3], [Vec<f64>; 3]) {
    let kd = grid.derivative_wavenumbers();
    let kf = grid.wavenumbers();
    ([kd.clone(), kd.clone(), kd], [kf.clone(), kf.clone(), kf])
}

fn k_squared(grid: &GridSpec, kf: &[Vec<f64>; 3], idx: usize) -> f64 {
    let [i, j, k] = grid.unravel(idx);
    kf[0][i] * kf[0][i] + kf[1][j] * kf[1][j] + kf[2][k] * kf[2][k]
}

fn fractional_symbol(ksq: f64, s: f64) -> f64 {
    if ksq == 0.0 {
        if s == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        ksq.powf(0.5 * s)
    }
}

fn validate_exponent(s: f64) -> Result<()> {
    if !(-2.0..=2.0).contains(&s) {
        return Err(Error::InvalidArgument(format!(
            "fractional exponent {s} outside [-2, 2]"
        )));
    }
    Ok(())
}

fn lp_from_magnitudes(grid: &GridSpec, mag: &(dyn Fn(usize) -> f64 + Sync), p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "L^p exponent {p} must lie in [1, ∞]"
        )));
    }
    if p.is_infinite() {
        return Ok(max_by(0..grid.len(), mag));
    }
    let s = tree_sum_by(0..grid.len(), &|i| mag(i).powf(p));
    Ok((s * grid.cell_volume()).powf(1.0 / p))
}

/// `‖f‖_{L^p}` of grid samples, cell-volume weighted.
pub fn lp_norm(grid: &GridSpec, values: &[f64], p: f64) -> Result<f64> {
    if values.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: values.len(),
        });
    }
    lp_from_magnitudes(grid, &|i| values[i].abs(), p)
}

/// Phase factors `e^{ik·y}` for a translation by `y`, or `None` when `y` is a
/// whole number of grid cells along every axis.
fn integer_shift(grid: &GridSpec, y: [f64; 3]) -> Option<[i64; 3]> {
    let h = grid.dx();
    let mut out = [0i64; 3];
    for c in 0..3 {
        let m = (y[c] / h).round();
        if (y[c] / h - m).abs() > 1e-9 {
            return None;
        }
        out[c] = m as i64;
    }
    Some(out)
}

fn shift_samples(grid: &GridSpec, data: &[f64], m: [i64; 3]) -> Vec<f64> {
    let n = grid.n() as i64;
    (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let [i, j, k] = grid.unravel(idx);
            let ii = (i as i64 + m[0]).rem_euclid(n) as usize;
            let jj = (j as i64 + m[1]).rem_euclid(n) as usize;
            let kk = (k as i64 + m[2]).rem_euclid(n) as usize;
            data[grid.index(ii, jj, kk)]
        })
        .collect()
}

fn shift_phases(grid: &GridSpec, y: [f64; 3]) -> Vec<C64> {
    let kf = grid.wavenumbers();
    let axis =
        |c: usize| -> Vec<C64> { kf.iter().map(|&k| C64::from_polar(1.0, k * y[c])).collect() };
    let (ex, ey, ez) = (axis(0), axis(1), axis(2));
    (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let [i, j, k] = grid.unravel(idx);
            ex[i] * ey[j] * ez[k]
        })
        .collect()
}

/// Three-component periodic field.
#[derive(Debug, Clone)]
pub struct Field {
    grid: GridSpec,
    physical: [Vec<f64>; 3],
    spectral: [Vec<C64>; 3],
}

impl Field {
    pub fn zeros(grid: GridSpec) -> Self {
        let z = vec![0.0; grid.len()];
        let s = vec![ZERO; grid.len()];
        Self {
            grid,
            physical: [z.clone(), z.clone(), z],
            spectral: [s.clone(), s.clone(), s],
        }
    }

    pub fn from_physical(grid: GridSpec, physical: [Vec<f64>; 3]) -> Result<Self> {
        for c in &physical {
            check_len(&grid, c.len())?;
        }
        let fft = plan(grid.n());
        let spectral = fft.forward_real3([&physical[0], &physical[1], &physical[2]]);
        Ok(Self {
            grid,
            physical,
            spectral,
        })
    }

    /// Builds a field from spectral coefficients. The physical samples are
    /// the real part of the inverse transform and the stored spectrum is
    /// recomputed from them, so the two representations always agree.
    pub fn from_spectral(grid: GridSpec, spectral: [Vec<C64>; 3]) -> Result<Self> {
        for c in &spectral {
            check_len(&grid, c.len())?;
        }
        let fft = plan(grid.n());
        let physical = fft.inverse_real3([&spectral[0], &spectral[1], &spectral[2]]);
        Self::from_physical(grid, physical)
    }

    /// Samples `f(x)` at every grid node.
    pub fn from_fn<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn([f64; 3]) -> [f64; 3] + Sync,
    {
        let vals: Vec<[f64; 3]> = (0..grid.len())
            .into_par_iter()
            .map(|idx| f(grid.position(idx)))
            .collect();
        let comp = |c: usize| vals.iter().map(|v| v[c]).collect::<Vec<_>>();
        Self::from_physical(grid, [comp(0), comp(1), comp(2)])
            .expect("lengths match by construction")
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn physical(&self) -> &[Vec<f64>; 3] {
        &self.physical
    }

    pub fn spectral(&self) -> &[Vec<C64>; 3] {
        &self.spectral
    }

    pub fn value(&self, idx: usize) -> [f64; 3] {
        [
            self.physical[0][idx],
            self.physical[1][idx],
            self.physical[2][idx],
        ]
    }

    fn map_components<F>(&self, f: F) -> Self
    where
        F: Fn(usize, &[C64]) -> Vec<C64>,
    {
        let spectral = [
            f(0, &self.spectral[0]),
            f(1, &self.spectral[1]),
            f(2, &self.spectral[2]),
        ];
        Self::from_spectral(self.grid, spectral).expect("lengths preserved")
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            grid: self.grid,
            physical: self
                .physical
                .clone()
                .map(|c| c.into_iter().map(|v| v * a).collect()),
            spectral: self
                .spectral
                .clone()
                .map(|c| c.into_iter().map(|v| v * a).collect()),
        }
    }

    pub fn add(&self, other: &Field) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let phys = [0, 1, 2].map(|c| {
            self.physical[c]
                .iter()
                .zip(&other.physical[c])
                .map(|(a, b)| a + b)
                .collect::<Vec<_>>()
        });
        Self::from_physical(self.grid, phys)
    }

    /// Leray projection `I − k kᵀ/|k|²`; the mean mode passes through.
    pub fn leray_project(&self) -> Self {
        let g = self.grid;
        let kd = g.derivative_wavenumbers();
        let out: Vec<[C64; 3]> = (0..g.len())
            .into_par_iter()
            .map(|idx| {
                let [i, j, k] = g.unravel(idx);
                let kv = [kd[i], kd[j], kd[k]];
                let u = [
                    self.spectral[0][idx],
                    self.spectral[1][idx],
                    self.spectral[2][idx],
                ];
                project_mode(kv, u)
            })
            .collect();
        let comp = |c: usize| out.iter().map(|v| v[c]).collect::<Vec<_>>();
        Self::from_spectral(g, [comp(0), comp(1), comp(2)]).expect("lengths preserved")
    }

    /// Mixed partial derivative `∂^α` of every component.
    pub fn derivative(&self, alpha: [u32; 3]) -> Self {
        let g = self.grid;
        let (kd, kf) = axis_tables(&g);
        self.map_components(|_, s| {
            multiply(&g, s, |idx| derivative_symbol(&g, &kd, &kf, idx, alpha))
        })
    }

    pub fn curl(&self) -> Self {
        let g = self.grid;
        let kd = g.derivative_wavenumbers();
        let out: Vec<[C64; 3]> = (0..g.len())
            .into_par_iter()
            .map(|idx| {
                let [i, j, k] = g.unravel(idx);
                let ik = [
                    C64::new(0.0, kd[i]),
                    C64::new(0.0, kd[j]),
                    C64::new(0.0, kd[k]),
                ];
                let u = [
                    self.spectral[0][idx],
                    self.spectral[1][idx],
                    self.spectral[2][idx],
                ];
                [
                    ik[1] * u[2] - ik[2] * u[1],
                    ik[2] * u[0] - ik[0] * u[2],
                    ik[0] * u[1] - ik[1] * u[0],
                ]
            })
            .collect();
        let comp = |c: usize| out.iter().map(|v| v[c]).collect::<Vec<_>>();
        Self::from_spectral(g, [comp(0), comp(1), comp(2)]).expect("lengths preserved")
    }

    pub fn divergence(&self) -> ScalarField {
        let g = self.grid;
        let kd = g.derivative_wavenumbers();
        let out: Vec<C64> = (0..g.len())
            .into_par_iter()
            .map(|idx| {
                let [i, j, k] = g.unravel(idx);
                C64::new(0.0, 1.0)
                    * (self.spectral[0][idx] * kd[i]
                        + self.spectral[1][idx] * kd[j]
                        + self.spectral[2][idx] * kd[k])
            })
            .collect();
        ScalarField::from_spectral(g, out).expect("lengths preserved")
    }

    /// `max_k |k·û(k)| / max_k |û(k)|`, zero for the zero field.
    pub fn spectral_divergence_ratio(&self) -> f64 {
        let g = self.grid;
        let kd = g.derivative_wavenumbers();
        let div = max_by(0..g.len(), |idx| {
            let [i, j, k] = g.unravel(idx);
            (self.spectral[0][idx] * kd[i]
                + self.spectral[1][idx] * kd[j]
                + self.spectral[2][idx] * kd[k])
                .norm()
        });
        let big = max_by(0..g.len(), |idx| {
            (0..3)
                .map(|c| self.spectral[c][idx].norm())
                .fold(0.0, f64::max)
        });
        if big == 0.0 {
            0.0
        } else {
            div / (big * g.k0())
        }
    }

    pub fn is_divergence_free(&self) -> bool {
        self.spectral_divergence_ratio() <= 1e-10
    }

    /// `Λ^s f` with symbol `|k|^s`, `s ∈ [−2, 2]`. Negative exponents need a
    /// mean-free field.
    pub fn fractional_laplacian(&self, s: f64) -> Result<Self> {
        validate_exponent(s)?;
        if s < 0.0 {
            let big = (0..3)
                .flat_map(|c| self.spectral[c].iter())
                .fold(0.0f64, |m, z| m.max(z.norm()));
            for c in 0..3 {
                let mean = self.spectral[c][0].norm();
                if mean > 1e-12 * big.max(f64::MIN_POSITIVE) {
                    return Err(Error::NonzeroMean { s, mean });
                }
            }
        }
        let g = self.grid;
        let (_, kf) = axis_tables(&g);
        Ok(self.map_components(|_, spec| {
            multiply(&g, spec, |idx| {
                C64::new(fractional_symbol(k_squared(&g, &kf, idx), s), 0.0)
            })
        }))
    }

    /// Pointwise Euclidean magnitude `|u(x)|`.
    pub fn magnitude(&self) -> Vec<f64> {
        (0..self.grid.len())
            .into_par_iter()
            .map(|i| {
                let v = self.value(i);
                (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
            })
            .collect()
    }

    pub fn norm(&self, kind: NormKind) -> Result<f64> {
        let g = self.grid;
        match kind {
            NormKind::Lp(p) => {
                let ph = &self.physical;
                lp_from_magnitudes(
                    &g,
                    &|i| (ph[0][i] * ph[0][i] + ph[1][i] * ph[1][i] + ph[2][i] * ph[2][i]).sqrt(),
                    p,
                )
            }
            NormKind::Hdot(s) => {
                if s < 0.0 {
                    // same mean-free requirement as the operator
                    self.fractional_laplacian(s)?;
                }
                let (_, kf) = axis_tables(&g);
                let sp = &self.spectral;
                let sum = tree_sum_by(0..g.len(), &|idx| {
                    let w = fractional_symbol(k_squared(&g, &kf, idx), s);
                    w * w * (sp[0][idx].norm_sqr() + sp[1][idx].norm_sqr() + sp[2][idx].norm_sqr())
                });
                Ok((g.volume() * sum).sqrt())
            }
            NormKind::V => self.norm(NormKind::Hdot(1.0)),
        }
    }

    /// `‖u‖²_{L²}` from the spectral coefficients.
    pub fn parseval_l2_squared(&self) -> f64 {
        let sp = &self.spectral;
        self.grid.volume()
            * tree_sum_by(0..self.grid.len(), &|idx| {
                sp[0][idx].norm_sqr() + sp[1][idx].norm_sqr() + sp[2][idx].norm_sqr()
            })
    }

    /// Velocity gradient `G[i][j] = ∂_j u_i` sampled on the grid.
    pub fn gradient_tensor(&self) -> [[Vec<f64>; 3]; 3] {
        let g = self.grid;
        let fft = plan(g.n());
        let kd = g.derivative_wavenumbers();
        let d = |c: usize, axis: usize| -> Vec<C64> {
            self.spectral[c]
                .par_iter()
                .enumerate()
                .map(|(idx, &z)| z * C64::new(0.0, kd[g.unravel(idx)[axis]]))
                .collect()
        };
        [0, 1, 2].map(|c| {
            let (a, b) = fft.inverse_real_pair(&d(c, 0), &d(c, 1));
            let e = fft.inverse_real(&d(c, 2));
            [a, b, e]
        })
    }

    /// Pointwise Frobenius norm `|∇u(x)|`.
    pub fn gradient_magnitude(&self) -> Vec<f64> {
        let gt = self.gradient_tensor();
        (0..self.grid.len())
            .into_par_iter()
            .map(|idx| {
                let mut s = 0.0;
                for row in &gt {
                    for comp in row {
                        s += comp[idx] * comp[idx];
                    }
                }
                s.sqrt()
            })
            .collect()
    }

    /// Exact value of the truncated Fourier series at an arbitrary point.
    pub fn sample(&self, point: [f64; 3]) -> [f64; 3] {
        let it = Interpolator::new(
            &self.grid,
            &[&self.spectral[0], &self.spectral[1], &self.spectral[2]],
            0.0,
        );
        let v = it.eval(point);
        [v[0], v[1], v[2]]
    }

    /// Batch interpolator; coefficients below `cutoff · max|û|` are dropped.
    pub fn interpolator(&self, cutoff: f64) -> Interpolator {
        Interpolator::new(
            &self.grid,
            &[&self.spectral[0], &self.spectral[1], &self.spectral[2]],
            cutoff,
        )
    }

    /// The translated field `x ↦ u(x + y)`. Whole-cell shifts permute
    /// samples; other shifts apply the spectral phase `e^{ik·y}`.
    pub fn shift(&self, y: [f64; 3]) -> Self {
        let g = self.grid;
        if let Some(m) = integer_shift(&g, y) {
            let phys = [0, 1, 2].map(|c| shift_samples(&g, &self.physical[c], m));
            return Self::from_physical(g, phys).expect("lengths preserved");
        }
        let ph = shift_phases(&g, y);
        self.map_components(|_, s| s.iter().zip(&ph).map(|(a, b)| a * b).collect())
    }

    /// Physical samples of `x ↦ u(x + y)` without building a full field.
    pub fn shifted_samples(&self, y: [f64; 3]) -> [Vec<f64>; 3] {
        let g = self.grid;
        if let Some(m) = integer_shift(&g, y) {
            return [0, 1, 2].map(|c| shift_samples(&g, &self.physical[c], m));
        }
        let ph = shift_phases(&g, y);
        let s: [Vec<C64>; 3] = [0, 1, 2].map(|c| {
            self.spectral[c]
                .iter()
                .zip(&ph)
                .map(|(a, b)| a * b)
                .collect()
        });
        plan(g.n()).inverse_real3([&s[0], &s[1], &s[2]])
    }

    /// Zero-padded (spectrally interpolated) copy on an `m³` grid, `m ≥ n`.
    pub fn refine(&self, m: usize) -> Result<Self> {
        let fine = self.grid.with_n(m)?;
        if m < self.grid.n() {
            return Err(Error::InvalidArgument(format!(
                "refinement target {m} below n"
            )));
        }
        let spectral = [0, 1, 2].map(|c| pad_spectrum(&self.grid, &fine, &self.spectral[c]));
        Self::from_spectral(fine, spectral)
    }
}

/// Copies a spectrum to a finer grid. Nyquist planes of the coarse grid are
/// split symmetrically so the padded field keeps the same values.
pub(crate) fn pad_spectrum(coarse: &GridSpec, fine: &GridSpec, spec: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; fine.len()];
    let n = coarse.n();
    for idx in 0..coarse.len() {
        let ijk = coarse.unravel(idx);
        let m = coarse.mode_vector(idx);
        // each Nyquist axis contributes to both ±n/2 with half weight
        let mut targets: Vec<([i64; 3], f64)> = vec![(m, 1.0)];
        for axis in 0..3 {
            if ijk[axis] == n / 2 {
                let mut next = Vec::with_capacity(targets.len() * 2);
                for (t, w) in targets {
                    let mut a = t;
                    let mut b = t;
                    a[axis] = -(n as i64) / 2;
                    b[axis] = (n as i64) / 2;
                    next.push((a, 0.5 * w));
                    next.push((b, 0.5 * w));
                }
                targets = next;
            }
        }
        for (t, w) in targets {
            let fi = fine.index(
                fine.mode_index(t[0]),
                fine.mode_index(t[1]),
                fine.mode_index(t[2]),
            );
            out[fi] += spec[idx] * w;
        }
    }
    out
}

/// Inverse of [`pad_spectrum`] for band-limited data: keeps the modes the
/// coarse grid can hold and folds `±n/2` onto the coarse Nyquist index.
pub(crate) fn truncate_spectrum(fine: &GridSpec, coarse: &GridSpec, spec: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; coarse.len()];
    let half = (coarse.n() / 2) as i64;
    let fine_half = (fine.n() / 2) as i64;
    let fold = |m: i64| -> Option<usize> {
        if m.abs() > half || m == fine_half {
            None
        } else {
            Some(coarse.mode_index(if m == half { -half } else { m }))
        }
    };
    for idx in 0..fine.len() {
        let m = fine.mode_vector(idx);
        if let (Some(i), Some(j), Some(k)) = (fold(m[0]), fold(m[1]), fold(m[2])) {
            out[coarse.index(i, j, k)] += spec[idx];
        }
    }
    out
}

/// Projects one Fourier coefficient onto the plane orthogonal to `k`.
#[inline]
pub(crate) fn project_mode(k: [f64; 3], u: [C64; 3]) -> [C64; 3] {
    let ksq = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
    if ksq == 0.0 {
        return u;
    }
    let dot = (u[0] * k[0] + u[1] * k[1] + u[2] * k[2]) / ksq;
    [u[0] - dot * k[0], u[1] - dot * k[1], u[2] - dot * k[2]]
}

/// Single-component periodic field.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: GridSpec,
    physical: Vec<f64>,
    spectral: Vec<C64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            physical: vec![0.0; grid.len()],
            spectral: vec![ZERO; grid.len()],
        }
    }

    pub fn from_physical(grid: GridSpec, physical: Vec<f64>) -> Result<Self> {
        check_len(&grid, physical.len())?;
        let spectral = plan(grid.n()).forward_real(&physical);
        Ok(Self {
            grid,
            physical,
            spectral,
        })
    }

    pub fn from_spectral(grid: GridSpec, spectral: Vec<C64>) -> Result<Self> {
        check_len(&grid, spectral.len())?;
        let physical = plan(grid.n()).inverse_real(&spectral);
        Self::from_physical(grid, physical)
    }

    pub fn from_fn<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn([f64; 3]) -> f64 + Sync,
    {
        let vals = (0..grid.len())
            .into_par_iter()
            .map(|idx| f(grid.position(idx)))
            .collect();
        Self::from_physical(grid, vals).expect("lengths match by construction")
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn physical(&self) -> &[f64] {
        &self.physical
    }

    pub fn spectral(&self) -> &[C64] {
        &self.spectral
    }

    pub fn mean(&self) -> f64 {
        self.spectral[0].re
    }

    pub fn derivative(&self, alpha: [u32; 3]) -> Self {
        let g = self.grid;
        let (kd, kf) = axis_tables(&g);
        let s = multiply(&g, &self.spectral, |idx| {
            derivative_symbol(&g, &kd, &kf, idx, alpha)
        });
        Self::from_spectral(g, s).expect("lengths preserved")
    }

    pub fn gradient(&self) -> Field {
        let comps = [[1, 0, 0], [0, 1, 0], [0, 0, 1]].map(|a| self.derivative(a).spectral);
        Field::from_spectral(self.grid, comps).expect("lengths preserved")
    }

    pub fn laplacian(&self) -> Self {
        let g = self.grid;
        let (_, kf) = axis_tables(&g);
        let s = multiply(&g, &self.spectral, |idx| {
            C64::new(-k_squared(&g, &kf, idx), 0.0)
        });
        Self::from_spectral(g, s).expect("lengths preserved")
    }

    pub fn fractional_laplacian(&self, s: f64) -> Result<Self> {
        validate_exponent(s)?;
        if s < 0.0 {
            let big = self.spectral.iter().fold(0.0f64, |m, z| m.max(z.norm()));
            let mean = self.spectral[0].norm();
            if mean > 1e-12 * big.max(f64::MIN_POSITIVE) {
                return Err(Error::NonzeroMean { s, mean });
            }
        }
        let g = self.grid;
        let (_, kf) = axis_tables(&g);
        let out = multiply(&g, &self.spectral, |idx| {
            C64::new(fractional_symbol(k_squared(&g, &kf, idx), s), 0.0)
        });
        Self::from_spectral(g, out)
    }

    pub fn norm(&self, kind: NormKind) -> Result<f64> {
        let g = self.grid;
        match kind {
            NormKind::Lp(p) => {
                let ph = &self.physical;
                lp_from_magnitudes(&g, &|i| ph[i].abs(), p)
            }
            NormKind::Hdot(s) => {
                if s < 0.0 {
                    self.fractional_laplacian(s)?;
                }
                let (_, kf) = axis_tables(&g);
                let sp = &self.spectral;
                let sum = tree_sum_by(0..g.len(), &|idx| {
                    let w = fractional_symbol(k_squared(&g, &kf, idx), s);
                    w * w * sp[idx].norm_sqr()
                });
                Ok((g.volume() * sum).sqrt())
            }
            NormKind::V => self.norm(NormKind::Hdot(1.0)),
        }
    }

    pub fn max_abs(&self) -> f64 {
        max_by(0..self.grid.len(), |i| self.physical[i].abs())
    }

    pub fn sample(&self, point: [f64; 3]) -> f64 {
        Interpolator::new(&self.grid, &[&self.spectral], 0.0).eval(point)[0]
    }

    pub fn interpolator(&self, cutoff: f64) -> Interpolator {
        Interpolator::new(&self.grid, &[&self.spectral], cutoff)
    }

    pub fn shift(&self, y: [f64; 3]) -> Self {
        let g = self.grid;
        if let Some(m) = integer_shift(&g, y) {
            return Self::from_physical(g, shift_samples(&g, &self.physical, m))
                .expect("lengths preserved");
        }
        let ph = shift_phases(&g, y);
        let s = self.spectral.iter().zip(&ph).map(|(a, b)| a * b).collect();
        Self::from_spectral(g, s).expect("lengths preserved")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid(n: usize) -> GridSpec {
        GridSpec::periodic(n, 0.1).unwrap()
    }

    fn random_field(g: GridSpec, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let comp = |rng: &mut ChaCha8Rng| {
            (0..g.len())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect::<Vec<f64>>()
        };
        let p = [comp(&mut rng), comp(&mut rng), comp(&mut rng)];
        Field::from_physical(g, p).unwrap()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn constant_maps_to_mean_mode() {
        let g = grid(8);
        let f = ScalarField::from_fn(g, |_| 2.5);
        assert!((f.spectral()[0] - C64::new(2.5, 0.0)).norm() < 1e-14);
        assert!(f.spectral()[1..].iter().all(|c| c.norm() < 1e-14));
    }

    #[test]
    fn sine_has_expected_coefficients() {
        let g = grid(8);
        let f = ScalarField::from_fn(g, |x| x[0].sin());
        let plus = f.spectral()[g.index(1, 0, 0)];
        let minus = f.spectral()[g.index(7, 0, 0)];
        assert!((plus - C64::new(0.0, -0.5)).norm() < 1e-14);
        assert!((minus - C64::new(0.0, 0.5)).norm() < 1e-14);
    }

    #[test]
    fn random_round_trip() {
        let f = random_field(grid(16), 1);
        let back = Field::from_spectral(*f.grid(), f.spectral().clone()).unwrap();
        let scale = f.physical()[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for c in 0..3 {
            assert!(max_diff(&back.physical()[c], &f.physical()[c]) <= 1e-12 * scale);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let g = grid(8);
        let err = ScalarField::from_physical(g, vec![0.0; 10]).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                expected: 512,
                found: 10
            }
        ));
    }

    #[test]
    fn leray_annihilates_gradients() {
        let g = grid(16);
        let phi = ScalarField::from_fn(g, |x| {
            (x[0] + 2.0 * x[1]).sin() * x[2].cos() + (3.0 * x[2]).cos()
        });
        let p = phi.gradient().leray_project();
        for c in 0..3 {
            assert!(p.physical()[c].iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn leray_is_idempotent_and_keeps_mean() {
        let f = random_field(grid(16), 2);
        let p1 = f.leray_project();
        let p2 = p1.leray_project();
        assert!(p1.is_divergence_free());
        for c in 0..3 {
            assert!(max_diff(&p1.physical()[c], &p2.physical()[c]) < 1e-12);
            assert!((p1.spectral()[c][0] - f.spectral()[c][0]).norm() < 1e-15);
        }
    }

    #[test]
    fn derivative_of_sine() {
        let g = grid(16);
        let f = ScalarField::from_fn(g, |x| x[0].sin());
        let d = f.derivative([1, 0, 0]);
        let exact = ScalarField::from_fn(g, |x| x[0].cos());
        assert!(max_diff(d.physical(), exact.physical()) < 1e-12);
        let d2 = f.derivative([2, 0, 0]);
        assert!(
            max_diff(
                d2.physical(),
                &f.physical().iter().map(|v| -v).collect::<Vec<_>>()
            ) < 1e-12
        );
    }

    #[test]
    fn curl_of_gradient_and_divergence_of_curl_vanish() {
        let g = grid(16);
        let phi = ScalarField::from_fn(g, |x| (x[0] - x[1]).cos() * (2.0 * x[2]).sin());
        let c = phi.gradient().curl();
        for comp in c.physical() {
            assert!(comp.iter().all(|v| v.abs() < 1e-12));
        }
        let f = random_field(g, 3);
        let div = f.curl().divergence();
        assert!(div.max_abs() < 1e-10);
    }

    #[test]
    fn fractional_laplacian_eigenfunction() {
        let g = grid(16);
        let f = ScalarField::from_fn(g, |x| (x[0] + 2.0 * x[1] - x[2]).cos());
        let l1 = f.fractional_laplacian(1.0).unwrap();
        let k = 6f64.sqrt();
        assert!(
            max_diff(
                l1.physical(),
                &f.physical().iter().map(|v| k * v).collect::<Vec<_>>()
            ) < 1e-12
        );
        let id = f.fractional_laplacian(0.0).unwrap();
        assert!(max_diff(id.physical(), f.physical()) < 1e-13);
    }

    #[test]
    fn fractional_laplacian_inverse_pair() {
        let g = grid(16);
        let f = random_field(g, 4);
        for s in [0.5, 1.0, 1.5, 2.0] {
            let back = f
                .fractional_laplacian(s)
                .unwrap()
                .fractional_laplacian(-s)
                .unwrap();
            for c in 0..3 {
                let mean = f.spectral()[c][0].re;
                let expect: Vec<f64> = f.physical()[c].iter().map(|v| v - mean).collect();
                assert!(max_diff(&back.physical()[c], &expect) < 1e-10);
            }
        }
    }

    #[test]
    fn negative_exponent_with_mean_is_rejected() {
        let g = grid(8);
        let f = ScalarField::from_fn(g, |x| 1.0 + x[0].sin());
        assert!(matches!(
            f.fractional_laplacian(-1.0),
            Err(Error::NonzeroMean { .. })
        ));
        assert!(f.fractional_laplacian(2.5).is_err());
    }

    #[test]
    fn hdot_three_halves_single_mode_parseval() {
        // single mode k = (1, 2, 0): ‖Λ^{3/2} u‖ = |k|^{3/2} ‖u‖ by Parseval
        let g = grid(16);
        let f = Field::from_fn(g, |x| [0.0, 0.0, (x[0] + 2.0 * x[1]).sin()]);
        let l2 = f.norm(NormKind::Lp(2.0)).unwrap();
        let via_op = f
            .fractional_laplacian(1.5)
            .unwrap()
            .norm(NormKind::Lp(2.0))
            .unwrap();
        let via_norm = f.norm(NormKind::Hdot(1.5)).unwrap();
        let expect = 5f64.powf(0.75) * l2;
        assert!((via_op - expect).abs() < 1e-10 * expect);
        assert!((via_norm - expect).abs() < 1e-10 * expect);
    }

    #[test]
    fn lp_norm_of_constant() {
        let g = grid(8);
        let f = Field::from_fn(g, |_| [0.6, 0.0, 0.8]);
        for p in [1.0, 2.0, 3.0, 6.0] {
            let expect = (2.0 * PI).powf(3.0 / p);
            assert!((f.norm(NormKind::Lp(p)).unwrap() - expect).abs() < 1e-12 * expect);
        }
        assert!((f.norm(NormKind::Lp(f64::INFINITY)).unwrap() - 1.0).abs() < 1e-15);
        assert!(f.norm(NormKind::Lp(0.5)).is_err());
    }

    #[test]
    fn l2_of_sine_and_v_norm_of_mode() {
        let g = grid(16);
        let f = Field::from_fn(g, |x| [x[0].sin(), 0.0, 0.0]);
        let expect = (2.0 * PI).powf(1.5) / 2f64.sqrt();
        assert!((f.norm(NormKind::Lp(2.0)).unwrap() - expect).abs() < 1e-12);
        assert!((f.parseval_l2_squared().sqrt() - expect).abs() < 1e-12);
        let m = Field::from_fn(g, |x| [0.0, (3.0 * x[0]).cos(), 0.0]);
        let l2 = m.norm(NormKind::Lp(2.0)).unwrap();
        assert!((m.norm(NormKind::V).unwrap() - 3.0 * l2).abs() < 1e-11);
    }

    #[test]
    fn parseval_matches_quadrature_on_random_field() {
        let f = random_field(grid(16), 5);
        let q = f.norm(NormKind::Lp(2.0)).unwrap().powi(2);
        assert!((q - f.parseval_l2_squared()).abs() <= 1e-10 * q);
    }

    #[test]
    fn shift_matches_direct_translation() {
        let g = grid(16);
        let f = Field::from_fn(g, |x| {
            [
                (x[0] + x[2]).sin(),
                (2.0 * x[1]).cos(),
                x[0].cos() * x[1].sin(),
            ]
        });
        for y in [[g.dx() * 3.0, 0.0, -g.dx()], [0.37, -1.1, 0.25]] {
            let s = f.shift(y);
            let exact = Field::from_fn(g, |x| {
                let z = [x[0] + y[0], x[1] + y[1], x[2] + y[2]];
                [
                    (z[0] + z[2]).sin(),
                    (2.0 * z[1]).cos(),
                    z[0].cos() * z[1].sin(),
                ]
            });
            for c in 0..3 {
                assert!(max_diff(&s.physical()[c], &exact.physical()[c]) < 1e-12);
            }
        }
    }

    #[test]
    fn refine_preserves_samples() {
        let f = random_field(grid(8), 6);
        let fine = f.refine(16).unwrap();
        for idx in 0..f.grid().len() {
            let [i, j, k] = f.grid().unravel(idx);
            let fi = fine.grid().index(2 * i, 2 * j, 2 * k);
            for c in 0..3 {
                assert!((fine.physical()[c][fi] - f.physical()[c][idx]).abs() < 1e-12);
            }
        }
    }
}
