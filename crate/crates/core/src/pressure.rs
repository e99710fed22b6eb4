//! Pressure: the global Poisson solve and the local splitting `p = β + π`.
//!
//! Local quantities are evaluated from exact Fourier-series values of `u` and
//! `p` on spheres about the probe point, with radial integrals on
//! [`RadialGrid`] nodes. Balls are kept small enough that they never wrap
//! around the torus.

use rayon::prelude::*;

use crate::csv::{num, Table};
use crate::fft::{plan, C64};
use crate::field::{truncate_spectrum, Field, GridSpec, Interpolator, NormKind, ScalarField};
use crate::quadrature::{
    gauss_legendre_on, shell_band_average, Panel, RadialGrid, SphereQuadrature,
};
use crate::{Error, Result};

/// Coefficients below this fraction of the largest one are skipped when
/// building interpolators; far below every tolerance used here.
const INTERP_CUTOFF: f64 = 1e-15;

pub const VERIFY_HEADER: &str = "x1,x2,x3,r,p,beta,pi,K,residual,rel_residual";

/// Solves `−Δp = ∂_i∂_j(u_iu_j)` with zero mean.
///
/// Products are formed on a grid twice as fine, so a band-limited `u` gives
/// the exact (unaliased) pressure truncated to the grid.
pub fn solve_pressure(u: &Field) -> ScalarField {
    let g = *u.grid();
    let fine = g.with_n(2 * g.n()).expect("doubling keeps a valid grid");
    let uf = u.refine(fine.n()).expect("finer grid");
    let ph = uf.physical();
    let fft = plan(fine.n());
    let prod = |a: usize, b: usize| -> Vec<f64> {
        ph[a].par_iter().zip(&ph[b]).map(|(x, y)| x * y).collect()
    };
    let pairs = [[(0, 0), (1, 1)], [(2, 2), (0, 1)], [(0, 2), (1, 2)]];
    let mut hat: Vec<((usize, usize), Vec<C64>)> = Vec::with_capacity(6);
    for [a, b] in pairs {
        let (sa, sb) = fft.forward_real_pair(&prod(a.0, a.1), &prod(b.0, b.1));
        hat.push((a, truncate_spectrum(&fine, &g, &sa)));
        hat.push((b, truncate_spectrum(&fine, &g, &sb)));
    }
    let kd = g.derivative_wavenumbers();
    let p: Vec<C64> = (0..g.len())
        .into_par_iter()
        .map(|idx| {
            let [i, j, l] = g.unravel(idx);
            let k = [kd[i], kd[j], kd[l]];
            let ksq = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if ksq == 0.0 {
                return C64::new(0.0, 0.0);
            }
            let mut s = C64::new(0.0, 0.0);
            for ((a, b), h) in &hat {
                let w = if a == b { 1.0 } else { 2.0 };
                s += h[idx] * (w * k[*a] * k[*b]);
            }
            -s / ksq
        })
        .collect();
    ScalarField::from_spectral(g, p).expect("grid length")
}

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

/// Mean of `f` over the sphere `|y − x| = r`.
pub fn spherical_average(
    f: &ScalarField,
    x: [f64; 3],
    r: f64,
    quad: &SphereQuadrature,
) -> Result<f64> {
    check_radius(f.grid(), r, 1.0)?;
    let it = f.interpolator(0.0);
    Ok(sphere_mean(&it, x, r, quad))
}

fn sphere_mean(it: &Interpolator, x: [f64; 3], r: f64, quad: &SphereQuadrature) -> f64 {
    quad.average(|xi| it.eval(offset(x, r, xi))[0])
}

#[inline]
fn offset(x: [f64; 3], r: f64, xi: [f64; 3]) -> [f64; 3] {
    [x[0] + r * xi[0], x[1] + r * xi[1], x[2] + r * xi[2]]
}

/// `σ_ij(ξ) = 3ξ_iξ_j − δ_ij` for a unit vector `ξ`.
pub fn sigma(xi: [f64; 3]) -> Result<[[f64; 3]; 3]> {
    let norm = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "sigma needs a unit vector, |ξ| = {norm}"
        )));
    }
    let mut s = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            s[i][j] = 3.0 * xi[i] * xi[j] - if i == j { 1.0 } else { 0.0 };
        }
    }
    Ok(s)
}

/// Radial weight of the singular part of `π`: 1 up to `λ = 1`, then linear
/// down to 0 at `λ = 2`.
pub fn weight_w(lambda: f64) -> f64 {
    if lambda <= 1.0 {
        1.0
    } else if lambda <= 2.0 {
        2.0 - lambda
    } else {
        0.0
    }
}

/// Quadrature resolution for the local pressure terms.
#[derive(Debug, Clone)]
pub struct LocalQuadrature {
    pub sphere: SphereQuadrature,
    /// Radial nodes for the `dρ/ρ` integrals.
    pub n_rad: usize,
    /// Gauss–Legendre nodes for `β` on `[r, 2r]`.
    pub n_beta: usize,
    /// Largest accepted `|A(ρ_min)| / max_ρ |A(ρ)|` before the principal
    /// value is flagged.
    pub pv_tolerance: f64,
}

impl LocalQuadrature {
    pub fn new(n_theta: usize, n_phi: usize, n_rad: usize, n_beta: usize) -> Result<Self> {
        if n_beta == 0 {
            return Err(Error::InvalidArgument("n_beta must be positive".into()));
        }
        RadialGrid::new(1.0, n_rad)?;
        Ok(Self {
            sphere: SphereQuadrature::new(n_theta, n_phi)?,
            n_rad,
            n_beta,
            pv_tolerance: 1e-4,
        })
    }

    /// Default resolution for fields resolved up to `|k| r ≈ 5`.
    pub fn baseline() -> Self {
        Self::new(8, 16, 9, 6).expect("valid defaults")
    }

    /// Every resolution parameter doubled.
    pub fn refined(&self) -> Self {
        Self {
            sphere: self.sphere.refined(),
            n_rad: 2 * self.n_rad,
            n_beta: 2 * self.n_beta,
            pv_tolerance: self.pv_tolerance,
        }
    }

    fn radial(&self, r: f64) -> Result<RadialGrid> {
        RadialGrid::new(r, self.n_rad)
    }
}

/// Angular moments of the increment `δ = u(x+ρξ) − v` on one shell.
#[derive(Debug, Clone, Copy, Default)]
struct Shell {
    /// `⨏(ξ·δ)²`
    q: f64,
    /// `⨏|δ|²`
    s2: f64,
    /// `⨏|u(x+ρξ) − u(x)|²`
    s2_centered: f64,
}

impl Shell {
    /// `⨏σ_ij δ_iδ_j`
    fn a(&self) -> f64 {
        3.0 * self.q - self.s2
    }
}

fn shell(
    u: &Interpolator,
    x: [f64; 3],
    rho: f64,
    v: [f64; 3],
    ux: [f64; 3],
    quad: &SphereQuadrature,
) -> Shell {
    let mut out = Shell::default();
    for (xi, w) in quad.nodes().iter().zip(quad.weights()) {
        let uy = u.eval(offset(x, rho, *xi));
        let d = [uy[0] - v[0], uy[1] - v[1], uy[2] - v[2]];
        let c = [uy[0] - ux[0], uy[1] - ux[1], uy[2] - ux[2]];
        let proj = xi[0] * d[0] + xi[1] * d[1] + xi[2] * d[2];
        out.q += w * proj * proj;
        out.s2 += w * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        out.s2_centered += w * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
    }
    let norm = 1.0 / (4.0 * std::f64::consts::PI);
    out.q *= norm;
    out.s2 *= norm;
    out.s2_centered *= norm;
    out
}

/// Principal-value integral with the size of its innermost shell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvEstimate {
    pub value: f64,
    /// `|⨏σ_ijδ_iδ_j|` on the smallest shell.
    pub innermost: f64,
    /// False when the innermost shell is not small against the largest,
    /// i.e. the angular cancellation behind the principal value is not
    /// resolved.
    pub cancellation_ok: bool,
}

/// Everything in the local splitting of `p(x)` at radius `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureDecomposition {
    pub x: [f64; 3],
    pub r: f64,
    pub v: [f64; 3],
    pub p_x: f64,
    pub beta: f64,
    pub pi: f64,
    /// `K(x, r)`
    pub k_singular: f64,
    /// `⨏|ξ·(u(x+rξ) − v)|²`
    pub sphere_quadratic_term: f64,
    /// `|u(x) − v|²/3`
    pub shift_term: f64,
    /// `p − β − π + |u(x) − v|²/3`
    pub residual: f64,
    /// `|residual| / ‖p‖_∞`
    pub rel_residual: f64,
    /// `p − p̄(r) + |u(x) − v|²/3 − ⨏|ξ·(u(x+rξ) − v)|² − K`
    pub lemma_residual: f64,
    /// `S₂(x, r)`, built from the same shells.
    pub s2_cumulative: f64,
    pub pv: PvEstimate,
}

/// Interpolators for `u` and its pressure, built once per field.
#[derive(Debug, Clone)]
pub struct LocalPressure {
    grid: GridSpec,
    u: Interpolator,
    p: Interpolator,
    p_sup: f64,
}

impl LocalPressure {
    pub fn new(u: &Field) -> Result<Self> {
        if !u.is_divergence_free() {
            return Err(Error::InvalidArgument(format!(
                "velocity is not divergence-free (ratio {:.3e})",
                u.spectral_divergence_ratio()
            )));
        }
        let p = solve_pressure(u);
        Ok(Self {
            grid: *u.grid(),
            u: u.interpolator(INTERP_CUTOFF),
            p: p.interpolator(INTERP_CUTOFF),
            p_sup: p.max_abs(),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `‖p‖_∞` over grid nodes.
    pub fn pressure_sup(&self) -> f64 {
        self.p_sup
    }

    pub fn velocity(&self, x: [f64; 3]) -> [f64; 3] {
        self.u.eval(x)
    }

    pub fn pressure(&self, x: [f64; 3]) -> f64 {
        self.p.eval(x)[0]
    }

    pub fn k_singular(
        &self,
        x: [f64; 3],
        r: f64,
        v: Option<[f64; 3]>,
        quad: &LocalQuadrature,
    ) -> Result<PvEstimate> {
        k_singular_with(&self.grid, &self.u, x, r, v, quad)
    }

    pub fn pi_term(
        &self,
        x: [f64; 3],
        r: f64,
        v: Option<[f64; 3]>,
        quad: &LocalQuadrature,
    ) -> Result<f64> {
        Ok(self.decompose(x, r, v, quad)?.pi)
    }

    pub fn beta_term(&self, x: [f64; 3], r: f64, quad: &LocalQuadrature) -> Result<f64> {
        beta_with(&self.grid, &self.p, x, r, quad)
    }

    /// All terms of the splitting at one probe; `v` defaults to `u(x)`.
    pub fn decompose(
        &self,
        x: [f64; 3],
        r: f64,
        v: Option<[f64; 3]>,
        quad: &LocalQuadrature,
    ) -> Result<PressureDecomposition> {
        check_radius(&self.grid, r, 1.0)?;
        let beta = beta_with(&self.grid, &self.p, x, r, quad)?;
        let ux = self.u.eval(x);
        let v = v.unwrap_or(ux);
        let radial = quad.radial(r)?;
        let (mut k, mut pi, mut s2cum) = (0.0, 0.0, 0.0);
        let (mut innermost, mut largest) = (0.0f64, 0.0f64);
        for node in radial.nodes() {
            let sh = shell(&self.u, x, node.rho, v, ux, &quad.sphere);
            let a = sh.a();
            largest = largest.max(a.abs());
            if node.panel == Panel::Tail {
                innermost = a.abs();
            }
            if node.panel != Panel::Outer {
                k += node.weight * a;
            } else {
                pi += node.weight * (node.rho / r) * sh.q;
            }
            pi += node.weight * weight_w(node.rho / r) * a;
            s2cum += node.weight * sh.s2_centered;
        }
        let at_r = shell(&self.u, x, r, v, ux, &quad.sphere);
        let pbar_r = sphere_mean(&self.p, x, r, &quad.sphere);
        let p_x = self.pressure(x);
        let d = [ux[0] - v[0], ux[1] - v[1], ux[2] - v[2]];
        let shift_term = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / 3.0;
        let residual = p_x - beta - pi + shift_term;
        let scale = if self.p_sup > 0.0 { self.p_sup } else { 1.0 };
        Ok(PressureDecomposition {
            x,
            r,
            v,
            p_x,
            beta,
            pi,
            k_singular: k,
            sphere_quadratic_term: at_r.q,
            shift_term,
            residual,
            rel_residual: residual.abs() / scale,
            lemma_residual: p_x - pbar_r + shift_term - at_r.q - k,
            s2_cumulative: s2cum,
            pv: PvEstimate {
                value: k,
                innermost,
                cancellation_ok: innermost <= quad.pv_tolerance * largest || largest == 0.0,
            },
        })
    }

    /// [`decompose`](Self::decompose) at many probes, evaluated in parallel;
    /// results keep the order of `points`.
    pub fn decompose_many(
        &self,
        points: &[[f64; 3]],
        r: f64,
        quad: &LocalQuadrature,
    ) -> Result<Vec<PressureDecomposition>> {
        points
            .par_iter()
            .map(|&x| self.decompose(x, r, None, quad))
            .collect()
    }

    /// Residual of `⨏ξ_i(ξ·u(x+rξ)) + (1/4π) PV∫_{B_r} σ_ij/|y−x|³ u_j dy = u_i(x)/3`,
    /// maximised over `i`.
    pub fn divfree_identity_residual(
        &self,
        x: [f64; 3],
        r: f64,
        quad: &LocalQuadrature,
    ) -> Result<f64> {
        check_radius(&self.grid, r, 1.0)?;
        let radial = quad.radial(r)?;
        let sphere = &quad.sphere;
        let norm = 1.0 / (4.0 * std::f64::consts::PI);
        let mut lhs = [0.0; 3];
        for (xi, w) in sphere.nodes().iter().zip(sphere.weights()) {
            let u = self.u.eval(offset(x, r, *xi));
            let proj = xi[0] * u[0] + xi[1] * u[1] + xi[2] * u[2];
            for i in 0..3 {
                lhs[i] += norm * w * xi[i] * proj;
            }
        }
        for node in radial.nodes().iter().filter(|n| n.panel != Panel::Outer) {
            for (xi, w) in sphere.nodes().iter().zip(sphere.weights()) {
                let u = self.u.eval(offset(x, node.rho, *xi));
                let proj = xi[0] * u[0] + xi[1] * u[1] + xi[2] * u[2];
                // σ_ij u_j = 3ξ_i(ξ·u) − u_i
                for i in 0..3 {
                    lhs[i] += node.weight * norm * w * (3.0 * xi[i] * proj - u[i]);
                }
            }
        }
        let ux = self.u.eval(x);
        Ok((0..3)
            .map(|i| (lhs[i] - ux[i] / 3.0).abs())
            .fold(0.0, f64::max))
    }
}

fn k_singular_with(
    grid: &GridSpec,
    u: &Interpolator,
    x: [f64; 3],
    r: f64,
    v: Option<[f64; 3]>,
    quad: &LocalQuadrature,
) -> Result<PvEstimate> {
    check_radius(grid, r, 1.0)?;
    let radial = quad.radial(r)?;
    let ux = u.eval(x);
    let v = v.unwrap_or(ux);
    let (mut value, mut innermost, mut largest) = (0.0, 0.0f64, 0.0f64);
    for node in radial.nodes().iter().filter(|n| n.panel != Panel::Outer) {
        let a = shell(u, x, node.rho, v, ux, &quad.sphere).a();
        value += node.weight * a;
        largest = largest.max(a.abs());
        if node.panel == Panel::Tail {
            innermost = a.abs();
        }
    }
    Ok(PvEstimate {
        value,
        innermost,
        cancellation_ok: innermost <= quad.pv_tolerance * largest || largest == 0.0,
    })
}

fn beta_with(
    grid: &GridSpec,
    p: &Interpolator,
    x: [f64; 3],
    r: f64,
    quad: &LocalQuadrature,
) -> Result<f64> {
    check_radius(grid, r, 2.0)?;
    let (rho, w) = gauss_legendre_on(quad.n_beta, r, 2.0 * r);
    Ok(rho
        .iter()
        .zip(&w)
        .map(|(&rh, wi)| wi * sphere_mean(p, x, rh, &quad.sphere))
        .sum::<f64>()
        / r)
}

/// `K(x, r)` for velocity `u`; `v` defaults to `u(x)`.
pub fn k_singular(
    u: &Field,
    x: [f64; 3],
    r: f64,
    v: Option<[f64; 3]>,
    quad: &LocalQuadrature,
) -> Result<PvEstimate> {
    k_singular_with(u.grid(), &u.interpolator(INTERP_CUTOFF), x, r, v, quad)
}

/// `π(x, r)` for velocity `u`; `v` defaults to `u(x)`.
pub fn pi_term(
    u: &Field,
    x: [f64; 3],
    r: f64,
    v: Option<[f64; 3]>,
    quad: &LocalQuadrature,
) -> Result<f64> {
    LocalPressure::new(u)?.pi_term(x, r, v, quad)
}

/// `β(x, r) = (1/r)∫_r^{2r} p̄(x, ρ) dρ`.
pub fn beta_term(p: &ScalarField, x: [f64; 3], r: f64, quad: &LocalQuadrature) -> Result<f64> {
    beta_with(p.grid(), &p.interpolator(0.0), x, r, quad)
}

pub fn verify_representation(
    u: &Field,
    x: [f64; 3],
    r: f64,
    v: Option<[f64; 3]>,
    quad: &LocalQuadrature,
) -> Result<PressureDecomposition> {
    LocalPressure::new(u)?.decompose(x, r, v, quad)
}

pub fn verify_divfree_identity(
    u: &Field,
    x: [f64; 3],
    r: f64,
    quad: &LocalQuadrature,
) -> Result<f64> {
    LocalPressure::new(u)?.divfree_identity_residual(x, r, quad)
}

pub fn decomposition_table(rows: &[PressureDecomposition]) -> Table {
    let mut t = Table::new(VERIFY_HEADER);
    for d in rows {
        t.push(
            [
                d.x[0],
                d.x[1],
                d.x[2],
                d.r,
                d.p_x,
                d.beta,
                d.pi,
                d.k_singular,
                d.residual,
                d.rel_residual,
            ]
            .iter()
            .map(|&v| num(v))
            .collect(),
        );
    }
    t
}

/// `β(·, r)` on the whole grid, via its Fourier multiplier
/// `(1/r)∫_r^{2r} sinc(ρ|k|) dρ`.
pub fn beta_field(p: &ScalarField, r: f64) -> Result<ScalarField> {
    let g = *p.grid();
    check_radius(&g, r, 2.0)?;
    let kf = g.wavenumbers();
    let spec: Vec<C64> = p
        .spectral()
        .par_iter()
        .enumerate()
        .map(|(idx, &c)| {
            let [i, j, k] = g.unravel(idx);
            let kappa = (kf[i] * kf[i] + kf[j] * kf[j] + kf[k] * kf[k]).sqrt();
            c * shell_band_average(r, kappa)
        })
        .collect();
    ScalarField::from_spectral(g, spec)
}

/// Measured constants in the two bounds on `β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaScaling {
    pub r: f64,
    /// `r² ‖β‖_∞ / (‖∇u‖₂ ‖u‖₂)`
    pub linf_constant: f64,
    /// `‖β‖_q / ‖u‖²_{2q}`
    pub lq_constant: f64,
}

pub fn beta_scaling(u: &Field, radii: &[f64], q: f64) -> Result<Vec<BetaScaling>> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "exponent q = {q} must be finite and ≥ 1"
        )));
    }
    let p = solve_pressure(u);
    let grad = u.norm(NormKind::V)?;
    let l2 = u.norm(NormKind::Lp(2.0))?;
    let l2q = u.norm(NormKind::Lp(2.0 * q))?;
    radii
        .iter()
        .map(|&r| {
            let b = beta_field(&p, r)?;
            Ok(BetaScaling {
                r,
                linf_constant: r * r * b.max_abs() / (grad * l2),
                lq_constant: b.norm(NormKind::Lp(q))? / (l2q * l2q),
            })
        })
        .collect()
}

pub const BETA_SCALING_HEADER: &str = "r,linf_constant,lq_constant";

pub fn beta_scaling_table(rows: &[BetaScaling]) -> Table {
    let mut t = Table::new(BETA_SCALING_HEADER);
    for s in rows {
        t.push_nums(&[s.r, s.linf_constant, s.lq_constant]);
    }
    t
}
