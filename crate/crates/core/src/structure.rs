//! Velocity increments: shell and cumulative second-order structure
//! functions, longitudinal moments and their scaling exponents, the Dini
//! modulus, and the closed-form bounds of the self-similar and multifractal
//! scenarios.
//!
//! Grid-wide `s₂` and `S₂` use Fourier multipliers: the sphere mean of
//! `e^{ik·y}` is `sinc(ρ|k|)`, so
//! `s₂(·,ρ) = F⁻¹[ĝ(sinc − 1)] − 2u·F⁻¹[û(sinc − 1)]` with `g = |u|²`, and
//! `S₂` swaps `sinc − 1` for its `dρ/ρ` integral up to `2R`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::csv::{num, Table};
use crate::fft::{plan, C64};
use crate::field::{lp_norm, pad_spectrum, Field, GridSpec, Interpolator, NormKind};
use crate::quadrature::{cumulative_kernel, sinc, RadialGrid, SphereQuadrature};
use crate::sum::tree_sum_by;
use crate::{Error, Result};

pub const STRUCTURE_HEADER: &str = "r,s2_mean,S2_mean,S2_L32_norm";
pub const MOMENTS_HEADER: &str = "p,ell,moment,four_fifths_ratio";
pub const ZETA_HEADER: &str = "p,zeta,r_squared,points,sign";

fn check_radius(grid: &GridSpec, r: f64, reach: f64) -> Result<()> {
    let limit = grid.domain_length() / 4.0;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "radius {r} must be positive"
        )));
    }
    if reach * r >= limit {
        return Err(Error::RadiusTooLarge {
            r: reach * r,
            limit,
        });
    }
    Ok(())
}

/// Unit vectors along the axes, face diagonals and cube diagonals.
pub fn stencil26() -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(26);
    for a in -1i32..=1 {
        for b in -1i32..=1 {
            for c in -1i32..=1 {
                if (a, b, c) == (0, 0, 0) {
                    continue;
                }
                let len = ((a * a + b * b + c * c) as f64).sqrt();
                out.push([a as f64 / len, b as f64 / len, c as f64 / len]);
            }
        }
    }
    out
}

/// Sphere quadrature over exact series values of `u`.
#[derive(Debug, Clone)]
pub struct IncrementProbe {
    grid: GridSpec,
    u: Interpolator,
}

impl IncrementProbe {
    pub fn new(u: &Field) -> Self {
        Self {
            grid: *u.grid(),
            u: u.interpolator(1e-15),
        }
    }

    /// `s₂(x, r) = ⨏|u(x + rξ) − u(x)|²`.
    pub fn shell_s2(&self, x: [f64; 3], r: f64, quad: &SphereQuadrature) -> Result<f64> {
        check_radius(&self.grid, r, 1.0)?;
        Ok(self.shell(x, self.u.eval(x), r, quad))
    }

    fn shell(&self, x: [f64; 3], ux: [f64; 3], r: f64, quad: &SphereQuadrature) -> f64 {
        quad.average(|xi| {
            let v = self
                .u
                .eval([x[0] + r * xi[0], x[1] + r * xi[1], x[2] + r * xi[2]]);
            (0..3).map(|c| (v[c] - ux[c]).powi(2)).sum()
        })
    }

    /// `S₂(x, r) = ∫₀^{2r} s₂(x, ρ) dρ/ρ` on a radial grid.
    pub fn cumulative_s2(
        &self,
        x: [f64; 3],
        r: f64,
        quad: &SphereQuadrature,
        n_rad: usize,
    ) -> Result<f64> {
        check_radius(&self.grid, r, 2.0)?;
        let ux = self.u.eval(x);
        let radial = RadialGrid::new(r, n_rad)?;
        Ok(radial.integrate_to_2r(|rho| self.shell(x, ux, rho, quad)))
    }
}

pub fn shell_s2(u: &Field, x: [f64; 3], r: f64, quad: &SphereQuadrature) -> Result<f64> {
    IncrementProbe::new(u).shell_s2(x, r, quad)
}

pub fn cumulative_s2(
    u: &Field,
    x: [f64; 3],
    r: f64,
    quad: &SphereQuadrature,
    n_rad: usize,
) -> Result<f64> {
    IncrementProbe::new(u).cumulative_s2(x, r, quad, n_rad)
}

/// Precomputed spectra for grid-wide `s₂`/`S₂` evaluation.
#[derive(Debug, Clone)]
pub struct IncrementField {
    grid: GridSpec,
    fine: GridSpec,
    u: [Vec<f64>; 3],
    u_hat: [Vec<C64>; 3],
    g_hat: Vec<C64>,
}

impl IncrementField {
    pub fn new(u: &Field) -> Self {
        let grid = *u.grid();
        let fine = grid.with_n(2 * grid.n()).expect("doubled grid");
        let padded: [Vec<C64>; 3] = [0, 1, 2].map(|c| pad_spectrum(&grid, &fine, &u.spectral()[c]));
        let fft = plan(fine.n());
        let uf = fft.inverse_real3([&padded[0], &padded[1], &padded[2]]);
        let g: Vec<f64> = (0..fine.len())
            .into_par_iter()
            .map(|i| uf[0][i] * uf[0][i] + uf[1][i] * uf[1][i] + uf[2][i] * uf[2][i])
            .collect();
        let g_hat = fft.forward_real(&g);
        Self {
            grid,
            fine,
            u: u.physical().clone(),
            u_hat: u.spectral().clone(),
            g_hat,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn apply(&self, multiplier: impl Fn(f64) -> f64 + Sync) -> Vec<f64> {
        let (g, f) = (self.grid, self.fine);
        let kf = f.wavenumbers();
        let a_hat: Vec<C64> = self
            .g_hat
            .par_iter()
            .enumerate()
            .map(|(idx, &c)| {
                let [i, j, k] = f.unravel(idx);
                c * multiplier((kf[i] * kf[i] + kf[j] * kf[j] + kf[k] * kf[k]).sqrt())
            })
            .collect();
        let a = plan(f.n()).inverse_real(&a_hat);
        let kc = g.wavenumbers();
        let b_hat: [Vec<C64>; 3] = [0, 1, 2].map(|c| {
            self.u_hat[c]
                .par_iter()
                .enumerate()
                .map(|(idx, &z)| {
                    let [i, j, k] = g.unravel(idx);
                    z * multiplier((kc[i] * kc[i] + kc[j] * kc[j] + kc[k] * kc[k]).sqrt())
                })
                .collect()
        });
        let b = plan(g.n()).inverse_real3([&b_hat[0], &b_hat[1], &b_hat[2]]);
        (0..g.len())
            .into_par_iter()
            .map(|idx| {
                let [i, j, k] = g.unravel(idx);
                let fine_idx = f.index(2 * i, 2 * j, 2 * k);
                let dot: f64 = (0..3).map(|c| self.u[c][idx] * b[c][idx]).sum();
                // clamp round-off below zero; both quantities are nonnegative
                (a[fine_idx] - 2.0 * dot).max(0.0)
            })
            .collect()
    }

    /// `s₂(x, ρ)` at every grid point.
    pub fn s2(&self, rho: f64) -> Result<Vec<f64>> {
        check_radius(&self.grid, rho, 1.0)?;
        Ok(self.apply(|kappa| sinc(rho * kappa) - 1.0))
    }

    /// `S₂(x, r)` at every grid point.
    pub fn cumulative_s2(&self, r: f64) -> Result<Vec<f64>> {
        check_radius(&self.grid, r, 2.0)?;
        Ok(self.cumulative_s2_unchecked(r))
    }

    /// `S₂(x, r)` for callers that enforce their own radius limit.
    pub(crate) fn cumulative_s2_unchecked(&self, r: f64) -> Vec<f64> {
        self.apply(|kappa| cumulative_kernel(2.0 * r * kappa))
    }
}

/// `∫_A S₂(x, r)^q dx` over the cells where `mask` is set.
pub fn s2_lq_on_set(u: &Field, r: f64, q: f64, mask: &[bool]) -> Result<f64> {
    let s2 = IncrementField::new(u).cumulative_s2(r)?;
    integral_on_set(u.grid(), &s2, q, mask)
}

/// `∫_A f^q dx` for nonnegative grid samples `f`.
pub fn integral_on_set(grid: &GridSpec, f: &[f64], q: f64, mask: &[bool]) -> Result<f64> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "exponent q = {q} must be finite and ≥ 1"
        )));
    }
    for len in [f.len(), mask.len()] {
        if len != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: len,
            });
        }
    }
    Ok(grid.cell_volume()
        * tree_sum_by(0..grid.len(), &|i| if mask[i] { f[i].powf(q) } else { 0.0 }))
}

/// Cells within distance `r` of a set cell (periodic).
pub fn dilate_mask(grid: &GridSpec, mask: &[bool], r: f64) -> Vec<bool> {
    let n = grid.n() as i64;
    let reach = (r / grid.dx()).floor() as i64;
    let mut offsets = Vec::new();
    for a in -reach..=reach {
        for b in -reach..=reach {
            for c in -reach..=reach {
                if ((a * a + b * b + c * c) as f64).sqrt() * grid.dx() <= r {
                    offsets.push([a, b, c]);
                }
            }
        }
    }
    (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let [i, j, k] = grid.unravel(idx);
            offsets.iter().any(|o| {
                let ii = (i as i64 + o[0]).rem_euclid(n) as usize;
                let jj = (j as i64 + o[1]).rem_euclid(n) as usize;
                let kk = (k as i64 + o[2]).rem_euclid(n) as usize;
                mask[grid.index(ii, jj, kk)]
            })
        })
        .collect()
}

/// `[∫_A S₂(·,r)^q] / [r^{2q} ∫_{A+rB} |∇u|^{2q}]`.
pub fn local_gradient_ratio(u: &Field, r: f64, q: f64, mask: &[bool]) -> Result<f64> {
    let num = s2_lq_on_set(u, r, q, mask)?;
    let grad = u.gradient_magnitude();
    let den = integral_on_set(u.grid(), &grad, 2.0 * q, &dilate_mask(u.grid(), mask, r))?;
    Ok(num / (r.powf(2.0 * q) * den))
}

/// `‖δ_y u‖_{L^p}` with `δ_y u(x) = u(x + y) − u(x)`.
pub fn increment_norm(u: &Field, y: [f64; 3], p: f64) -> Result<f64> {
    let s = u.shifted_samples(y);
    let ph = u.physical();
    let mag: Vec<f64> = (0..u.grid().len())
        .into_par_iter()
        .map(|i| {
            (0..3)
                .map(|c| (s[c][i] - ph[c][i]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    lp_norm(u.grid(), &mag, p)
}

/// One entry of the longitudinal moment table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentRow {
    pub p: u32,
    pub ell: f64,
    /// `⟨(δ∥_ℓ u)^p⟩` over grid points and stencil directions.
    pub moment: f64,
    /// `⟨(δ∥_ℓ u)³⟩ / (−(4/5) ε ℓ)` for `p = 3`, NaN otherwise.
    pub four_fifths_ratio: f64,
}

/// Mean dissipation rate `ν⟨|∇u|²⟩`.
pub fn dissipation_rate(u: &Field) -> Result<f64> {
    let g = u.grid();
    Ok(g.nu() * u.norm(NormKind::V)?.powi(2) / g.volume())
}

/// Space- and direction-averaged longitudinal increment moments.
///
/// Offsets `ℓ d̂` run over `directions` (default: [`stencil26`]); offsets
/// that are not whole cells are sampled spectrally.
pub fn longitudinal_moments(
    u: &Field,
    ells: &[f64],
    ps: &[u32],
    directions: Option<&[[f64; 3]]>,
) -> Result<Vec<MomentRow>> {
    let default = stencil26();
    let dirs = directions.unwrap_or(&default);
    if dirs.is_empty() {
        return Err(Error::InvalidArgument("empty direction set".into()));
    }
    for &ell in ells {
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "offset length {ell} must be positive"
            )));
        }
    }
    let g = u.grid();
    let eps = dissipation_rate(u)?;
    let ph = u.physical();
    let mut rows = Vec::with_capacity(ells.len() * ps.len());
    for &ell in ells {
        let mut sums = vec![0.0; ps.len()];
        for d in dirs {
            let s = u.shifted_samples([ell * d[0], ell * d[1], ell * d[2]]);
            let dl: Vec<f64> = (0..g.len())
                .into_par_iter()
                .map(|i| (0..3).map(|c| (s[c][i] - ph[c][i]) * d[c]).sum())
                .collect();
            for (slot, &p) in sums.iter_mut().zip(ps) {
                *slot += tree_sum_by(0..g.len(), &|i| dl[i].powi(p as i32)) / g.len() as f64;
            }
        }
        for (&p, s) in ps.iter().zip(sums) {
            let moment = s / dirs.len() as f64;
            let ratio = if p == 3 {
                moment / (-0.8 * eps * ell)
            } else {
                f64::NAN
            };
            rows.push(MomentRow {
                p,
                ell,
                moment,
                four_fifths_ratio: ratio,
            });
        }
    }
    Ok(rows)
}

pub fn moments_table(rows: &[MomentRow]) -> Table {
    let mut t = Table::new(MOMENTS_HEADER);
    for m in rows {
        t.push(vec![
            m.p.to_string(),
            num(m.ell),
            num(m.moment),
            num(m.four_fifths_ratio),
        ]);
    }
    t
}

/// Power-law fit of `|moment|` against `ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub enum ZetaFit {
    Fit {
        p: u32,
        zeta: f64,
        /// Prefactor of `|moment| ≈ c ℓ^ζ`.
        prefactor: f64,
        r_squared: f64,
        points: usize,
        /// Sign shared by the fitted moments.
        sign: f64,
    },
    NoFit {
        p: u32,
        reason: String,
    },
}

impl ZetaFit {
    pub fn zeta(&self) -> Option<f64> {
        match self {
            Self::Fit { zeta, .. } => Some(*zeta),
            Self::NoFit { .. } => None,
        }
    }
}

/// Default fitting range `[4Δx, L/8]`.
pub fn default_fit_range(grid: &GridSpec) -> (f64, f64) {
    (4.0 * grid.dx(), grid.domain_length() / 8.0)
}

/// Least-squares slope of `log|moment|` against `log ℓ` for every `p`
/// present in `rows`, using offsets inside `range` (inclusive).
pub fn fit_zeta(rows: &[MomentRow], range: (f64, f64)) -> Vec<ZetaFit> {
    let mut ps: Vec<u32> = rows.iter().map(|r| r.p).collect();
    ps.sort_unstable();
    ps.dedup();
    let tol = 1e-12 * range.1.abs();
    ps.into_iter()
        .map(|p| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.p == p && r.ell >= range.0 - tol && r.ell <= range.1 + tol)
                .map(|r| (r.ell, r.moment))
                .collect();
            fit_one(p, &pts)
        })
        .collect()
}

fn fit_one(p: u32, pts: &[(f64, f64)]) -> ZetaFit {
    let no = |reason: String| ZetaFit::NoFit { p, reason };
    if pts.len() < 4 {
        return no(format!("{} offsets in range, need at least 4", pts.len()));
    }
    if pts.iter().any(|&(_, m)| m == 0.0 || !m.is_finite()) {
        return no("zero or non-finite moment in range".into());
    }
    let sign = pts[0].1.signum();
    if pts.iter().any(|&(_, m)| m.signum() != sign) {
        return no("moments change sign in range".into());
    }
    let xs: Vec<f64> = pts.iter().map(|&(l, _)| l.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|&(_, m)| m.abs().ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return no("offsets in range are all equal".into());
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    ZetaFit::Fit {
        p,
        zeta: slope,
        prefactor: (my - slope * mx).exp(),
        r_squared,
        points: pts.len(),
        sign,
    }
}

pub fn zeta_table(fits: &[ZetaFit]) -> Table {
    let mut t = Table::new(ZETA_HEADER);
    for f in fits {
        match f {
            ZetaFit::Fit {
                p,
                zeta,
                r_squared,
                points,
                sign,
                ..
            } => t.push(vec![
                p.to_string(),
                num(*zeta),
                num(*r_squared),
                points.to_string(),
                num(*sign),
            ]),
            ZetaFit::NoFit { p, .. } => t.push(vec![
                p.to_string(),
                "NaN".into(),
                "NaN".into(),
                "0".into(),
                "NaN".into(),
            ]),
        }
    }
    t
}

/// Grid-wide structure-function summary at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureRow {
    pub r: f64,
    pub s2_mean: f64,
    pub s2_cumulative_mean: f64,
    /// `‖S₂(·, r)‖_{L^{3/2}}`
    pub s2_cumulative_l32: f64,
}

pub fn structure_rows(u: &Field, radii: &[f64]) -> Result<Vec<StructureRow>> {
    let inc = IncrementField::new(u);
    let g = *u.grid();
    radii
        .iter()
        .map(|&r| {
            let s2 = inc.s2(r)?;
            let cum = inc.cumulative_s2(r)?;
            let mean = |v: &[f64]| tree_sum_by(0..v.len(), &|i| v[i]) / v.len() as f64;
            Ok(StructureRow {
                r,
                s2_mean: mean(&s2),
                s2_cumulative_mean: mean(&cum),
                s2_cumulative_l32: lp_norm(&g, &cum, 1.5)?,
            })
        })
        .collect()
}

pub fn structure_table(rows: &[StructureRow]) -> Table {
    let mut t = Table::new(STRUCTURE_HEADER);
    for s in rows {
        t.push_nums(&[s.r, s.s2_mean, s.s2_cumulative_mean, s.s2_cumulative_l32]);
    }
    t
}

/// `‖S₂(·,r)‖_{L^{3/2}}` against `(1/4π)∫_{|y|≤2r} ‖δ_y u‖²_{L³} dy/|y|³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityRatio {
    pub r: f64,
    pub s2_l32: f64,
    pub increment_integral: f64,
    pub ratio: f64,
}

pub fn duality_ratio(
    u: &Field,
    r: f64,
    quad: &SphereQuadrature,
    n_rad: usize,
) -> Result<DualityRatio> {
    let cum = IncrementField::new(u).cumulative_s2(r)?;
    let s2_l32 = lp_norm(u.grid(), &cum, 1.5)?;
    let radial = RadialGrid::new(r, n_rad)?;
    let mut integral = 0.0;
    for node in radial.nodes() {
        let mut shell = 0.0;
        for (xi, w) in quad.nodes().iter().zip(quad.weights()) {
            let y = [node.rho * xi[0], node.rho * xi[1], node.rho * xi[2]];
            shell += w * increment_norm(u, y, 3.0)?.powi(2);
        }
        integral += node.weight * shell / (4.0 * PI);
    }
    let ratio = if integral > 0.0 {
        s2_l32 / integral
    } else {
        0.0
    };
    Ok(DualityRatio {
        r,
        s2_l32,
        increment_integral: integral,
        ratio,
    })
}

/// `m(ρ) = max_{d̂} ‖δ_{ρd̂} u‖_{L³}` on a radius grid, with
/// `J(ρ) = ∫₀^ρ m² dρ'/ρ'`.
///
/// Between nodes `m²` is interpolated as a power of `ρ`, which makes the
/// integral exact for power-law moduli; below the first node the first
/// segment's exponent is continued to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DiniModulus {
    pub rho: Vec<f64>,
    pub m: Vec<f64>,
    /// `J(ρ_k)`, nondecreasing.
    pub cumulative: Vec<f64>,
}

impl DiniModulus {
    /// Builds the table from given values, `rho` strictly increasing.
    pub fn from_values(rho: Vec<f64>, m: Vec<f64>) -> Result<Self> {
        if rho.len() < 2 || rho.len() != m.len() {
            return Err(Error::InvalidArgument(
                "need at least two radii with one modulus value each".into(),
            ));
        }
        if rho[0] <= 0.0 || rho.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "radii must be positive and strictly increasing".into(),
            ));
        }
        if m.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "modulus values must be finite and nonnegative".into(),
            ));
        }
        let mut cumulative = Vec::with_capacity(rho.len());
        let mut acc = tail(rho[0], rho[1], m[0], m[1]);
        cumulative.push(acc);
        for k in 1..rho.len() {
            acc += segment(rho[k - 1], rho[k], m[k - 1], m[k]);
            cumulative.push(acc);
        }
        Ok(Self { rho, m, cumulative })
    }

    /// `∫₀^t m² dρ/ρ` for `0 < t ≤ max ρ`.
    pub fn integral_to(&self, t: f64) -> f64 {
        let (rho, m) = (&self.rho, &self.m);
        if t <= rho[0] {
            return tail(t, rho[0], power_at(rho[0], rho[1], m[0], m[1], t), m[0])
                .min(self.cumulative[0]);
        }
        let k = rho.partition_point(|&r| r < t).min(rho.len() - 1);
        let mt = power_at(rho[k - 1], rho[k], m[k - 1], m[k], t);
        self.cumulative[k - 1] + segment(rho[k - 1], t, m[k - 1], mt)
    }

    /// `I_m(r) = ∫₀^{2r} m² dρ/ρ`.
    pub fn i_m(&self, r: f64) -> f64 {
        self.integral_to(2.0 * r)
    }
}

/// `m` at `t` on the power law through `(a, ma)`, `(b, mb)`.
fn power_at(a: f64, b: f64, ma: f64, mb: f64, t: f64) -> f64 {
    if ma == 0.0 || mb == 0.0 {
        return ma + (mb - ma) * (t - a) / (b - a);
    }
    ma * (mb / ma).powf((t / a).ln() / (b / a).ln())
}

/// `∫_a^b m² dρ/ρ` with `m²` a power of `ρ` through both end values.
fn segment(a: f64, b: f64, ma: f64, mb: f64) -> f64 {
    let (fa, fb) = (ma * ma, mb * mb);
    let len = (b / a).ln();
    if fa == 0.0 || fb == 0.0 {
        return 0.5 * (fa + fb) * len;
    }
    let gamma = (fb / fa).ln() / len;
    if gamma.abs() < 1e-12 {
        return fa * len;
    }
    (fb - fa) / gamma
}

/// `∫₀^{a} m² dρ/ρ` continuing the power law of the first segment.
fn tail(a: f64, b: f64, ma: f64, mb: f64) -> f64 {
    let (fa, fb) = (ma * ma, mb * mb);
    if fa == 0.0 {
        return 0.0;
    }
    if fb == 0.0 {
        return f64::INFINITY;
    }
    let gamma = (fb / fa).ln() / (b / a).ln();
    if gamma <= 0.0 {
        f64::INFINITY
    } else {
        fa / gamma
    }
}

pub fn dini_modulus(
    u: &Field,
    rho_grid: &[f64],
    directions: Option<&[[f64; 3]]>,
) -> Result<DiniModulus> {
    let default = stencil26();
    let dirs = directions.unwrap_or(&default);
    let limit = u.grid().domain_length() / 4.0;
    if let Some(&bad) = rho_grid.iter().find(|&&r| r >= limit) {
        return Err(Error::RadiusTooLarge { r: bad, limit });
    }
    let mut m = Vec::with_capacity(rho_grid.len());
    for &rho in rho_grid {
        let mut best = 0.0f64;
        for d in dirs {
            best = best.max(increment_norm(
                u,
                [rho * d[0], rho * d[1], rho * d[2]],
                3.0,
            )?);
        }
        m.push(best);
    }
    DiniModulus::from_values(rho_grid.to_vec(), m)
}

/// Outcome of choosing `r` from `I_m(r) ≤ (ν/C)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RSelection {
    Admissible {
        r: f64,
        i_m: f64,
    },
    /// Even the smallest candidate fails; carries its `I_m`.
    Inadmissible {
        r: f64,
        i_m: f64,
        threshold: f64,
    },
}

/// Largest `r = ρ_k / 2` on the modulus grid with `I_m(r) ≤ (ν/C)²`.
pub fn select_r(modulus: &DiniModulus, nu: f64, c: f64) -> RSelection {
    let threshold = (nu / c).powi(2);
    let mut best = None;
    for (k, &rho) in modulus.rho.iter().enumerate() {
        if modulus.cumulative[k] <= threshold {
            best = Some((rho / 2.0, modulus.cumulative[k]));
        }
    }
    match best {
        Some((r, i_m)) => RSelection::Admissible { r, i_m },
        None => RSelection::Inadmissible {
            r: modulus.rho[0] / 2.0,
            i_m: modulus.cumulative[0],
            threshold,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfSimilarBound {
    /// `UL/ν`
    pub re_v: f64,
    /// `C_s (r/L)^{3s} Re(V)³ ν³`
    pub bound: f64,
    /// `(r/L)^s Re(V) ≤ C_s^{−1/3} (2C)^{−1}`
    pub condition_ok: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn selfsimilar_bound(
    u_scale: f64,
    l_scale: f64,
    s: f64,
    r: f64,
    nu: f64,
    c_s: f64,
    c: f64,
) -> Result<SelfSimilarBound> {
    for (name, v) in [
        ("U", u_scale),
        ("L", l_scale),
        ("s", s),
        ("r", r),
        ("nu", nu),
        ("C_s", c_s),
        ("C", c),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "{name} = {v} must be positive"
            )));
        }
    }
    let re_v = u_scale * l_scale / nu;
    let ratio = r / l_scale;
    Ok(SelfSimilarBound {
        re_v,
        bound: c_s * ratio.powf(3.0 * s) * re_v.powi(3) * nu.powi(3),
        condition_ok: ratio.powf(s) * re_v <= c_s.powf(-1.0 / 3.0) / (2.0 * c),
    })
}

/// One atom `(h, d(h), μ-weight)` of a discrete singularity spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumAtom {
    pub h: f64,
    pub d: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultifractalBound {
    /// `C ∫ h^{−3/2} dμ`
    pub c_mu: f64,
    pub zeta_3: f64,
    /// `GL/ν`
    pub r_g: f64,
    /// `C_μ R_G³ (r₀/L)^{ζ₃} ν³`
    pub bound: f64,
    /// `R_G³ (r₀/L)^{ζ₃} ≤ (C³ C_μ)^{−1}`
    pub condition_ok: bool,
}

fn validate_spectrum(spectrum: &[SpectrumAtom]) -> Result<()> {
    if spectrum.is_empty() {
        return Err(Error::InvalidArgument("empty singularity spectrum".into()));
    }
    for a in spectrum {
        if !(a.h > 0.0 && a.h <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "Hölder exponent h = {} outside (0, 1]",
                a.h
            )));
        }
        if !(a.d <= 3.0) {
            return Err(Error::InvalidArgument(format!(
                "dimension d = {} exceeds 3",
                a.d
            )));
        }
        if !(a.weight >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "negative weight {}",
                a.weight
            )));
        }
    }
    let total: f64 = spectrum.iter().map(|a| a.weight).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "weights sum to {total}, not 1"
        )));
    }
    Ok(())
}

/// `ζ_p = min_h (3 − d(h) + p h)` over the atoms.
pub fn zeta_p(spectrum: &[SpectrumAtom], p: f64) -> Result<f64> {
    validate_spectrum(spectrum)?;
    Ok(spectrum
        .iter()
        .map(|a| 3.0 - a.d + p * a.h)
        .fold(f64::INFINITY, f64::min))
}

pub fn multifractal_bound(
    spectrum: &[SpectrumAtom],
    r0: f64,
    l_scale: f64,
    g: f64,
    nu: f64,
    c: f64,
) -> Result<MultifractalBound> {
    validate_spectrum(spectrum)?;
    for (name, v) in [("r0", r0), ("L", l_scale), ("G", g), ("nu", nu), ("C", c)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "{name} = {v} must be positive"
            )));
        }
    }
    let zeta_3 = zeta_p(spectrum, 3.0)?;
    let c_mu = c * spectrum
        .iter()
        .map(|a| a.weight * a.h.powf(-1.5))
        .sum::<f64>();
    let r_g = g * l_scale / nu;
    let scaled = r_g.powi(3) * (r0 / l_scale).powf(zeta_3);
    Ok(MultifractalBound {
        c_mu,
        zeta_3,
        r_g,
        bound: c_mu * scaled * nu.powi(3),
        condition_ok: scaled <= 1.0 / (c.powi(3) * c_mu),
    })
}
