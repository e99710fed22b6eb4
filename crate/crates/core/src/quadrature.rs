//! Quadrature rules and the special functions used by spherical averages.

use std::f64::consts::PI;

use crate::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    (
        x.iter().map(|t| c + h * t).collect(),
        w.iter().map(|v| v * h).collect(),
    )
}

/// Product rule on the unit sphere: Gauss–Legendre in `cos θ` times a
/// uniform azimuth grid. Weights sum to `4π`.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    n_theta: usize,
    n_phi: usize,
    nodes: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl SphereQuadrature {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < 1 || n_phi < 1 {
            return Err(Error::InvalidArgument(format!(
                "sphere quadrature needs n_theta, n_phi ≥ 1 (got {n_theta}, {n_phi})"
            )));
        }
        let (ct, wt) = gauss_legendre(n_theta);
        let dphi = 2.0 * PI / n_phi as f64;
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (c, w) in ct.iter().zip(&wt) {
            let s = (1.0 - c * c).max(0.0).sqrt();
            for j in 0..n_phi {
                // half-step offset keeps the poles of the azimuth grid off the axes
                let phi = (j as f64 + 0.5) * dphi;
                nodes.push([s * phi.cos(), s * phi.sin(), *c]);
                weights.push(w * dphi);
            }
        }
        Ok(Self {
            n_theta,
            n_phi,
            nodes,
            weights,
        })
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// The same rule with twice as many nodes in each direction.
    pub fn refined(&self) -> Self {
        Self::new(2 * self.n_theta, 2 * self.n_phi).expect("refinement of a valid rule")
    }

    /// Normalised average `(1/4π) ∫_{S²} f`.
    pub fn average<F: Fn([f64; 3]) -> f64>(&self, f: F) -> f64 {
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, w)| w * f(x))
            .sum();
        s / (4.0 * PI)
    }
}

/// Which piece of the radial grid a node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Panel {
    /// Single node at `ρ_min` carrying the analytic `∫₀^{ρ_min}` contribution.
    Tail,
    /// `[ρ_min, r]`.
    Inner,
    /// `[r, 2r]`.
    Outer,
}

#[derive(Debug, Clone, Copy)]
pub struct RadialNode {
    pub rho: f64,
    /// Weight for the `dρ/ρ` measure.
    pub weight: f64,
    pub panel: Panel,
}

/// Radii for `∫₀^{2r} (…) dρ/ρ` integrals.
///
/// Gauss–Legendre in `log ρ` on `[ρ_min, r]` and on `[r, 2r]`, with
/// `ρ_min = 10⁻³ r`. Below `ρ_min` the angular integrands vanish like `ρ²`,
/// so `∫₀^{ρ_min} A dρ/ρ ≈ A(ρ_min)/2`; that term is the tail node.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    r: f64,
    rho_min: f64,
    n_rad: usize,
    nodes: Vec<RadialNode>,
}

pub const RHO_MIN_FRACTION: f64 = 1e-3;

impl RadialGrid {
    /// `n_rad` nodes in total: two thirds on the inner panel, the rest on
    /// the outer one, plus the tail node.
    pub fn new(r: f64, n_rad: usize) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "radius {r} must be positive"
            )));
        }
        if n_rad < 3 {
            return Err(Error::InvalidArgument(format!(
                "n_rad = {n_rad} must be at least 3"
            )));
        }
        let n_outer = (n_rad / 3).max(1);
        let n_inner = n_rad - n_outer;
        let rho_min = RHO_MIN_FRACTION * r;
        let mut nodes = vec![RadialNode {
            rho: rho_min,
            weight: 0.5,
            panel: Panel::Tail,
        }];
        let mut panel = |a: f64, b: f64, m: usize, tag: Panel| {
            let (t, w) = gauss_legendre_on(m, a.ln(), b.ln());
            for (ti, wi) in t.into_iter().zip(w) {
                nodes.push(RadialNode {
                    rho: ti.exp(),
                    weight: wi,
                    panel: tag,
                });
            }
        };
        panel(rho_min, r, n_inner, Panel::Inner);
        panel(r, 2.0 * r, n_outer, Panel::Outer);
        Ok(Self {
            r,
            rho_min,
            n_rad,
            nodes,
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn rho_min(&self) -> f64 {
        self.rho_min
    }

    pub fn n_rad(&self) -> usize {
        self.n_rad
    }

    pub fn nodes(&self) -> &[RadialNode] {
        &self.nodes
    }

    pub fn refined(&self) -> Self {
        Self::new(self.r, 2 * self.n_rad).expect("refinement of a valid grid")
    }

    /// `∫₀^{r} f dρ/ρ`.
    pub fn integrate_to_r<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .filter(|n| n.panel != Panel::Outer)
            .map(|n| n.weight * f(n.rho))
            .sum()
    }

    /// `∫₀^{2r} f dρ/ρ`.
    pub fn integrate_to_2r<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().map(|n| n.weight * f(n.rho)).sum()
    }
}

/// `sin z / z`, which is also the spherical Bessel function `j₀`.
pub fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        let z2 = z * z;
        1.0 - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// `Cin(z) = ∫₀^z (1 − cos t)/t dt`.
pub fn cin(z: f64) -> f64 {
    let z = z.abs();
    if z < 0.5 {
        // alternating series Σ (−1)^{k+1} z^{2k} / (2k (2k)!)
        let mut term = 1.0;
        let mut sum = 0.0;
        let z2 = z * z;
        for k in 1..12 {
            let kf = k as f64;
            term *= z2 / ((2.0 * kf - 1.0) * (2.0 * kf));
            let t = term / (2.0 * kf);
            sum += if k % 2 == 1 { t } else { -t };
        }
        return sum;
    }
    const PANEL: f64 = 2.0;
    let (x, w) = gl16();
    let panels = (z / PANEL).ceil() as usize;
    let h = z / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let a = p as f64 * h;
        for (xi, wi) in x.iter().zip(w) {
            let t = a + 0.5 * h * (xi + 1.0);
            let s = (0.5 * t).sin();
            sum += wi * 0.5 * h * 2.0 * s * s / t;
        }
    }
    sum
}

/// `Si(z) = ∫₀^z sin t / t dt`.
pub fn si(z: f64) -> f64 {
    if z < 0.0 {
        return -si(-z);
    }
    const PANEL: f64 = 2.0;
    let (x, w) = gl16();
    let panels = (z / PANEL).ceil().max(1.0) as usize;
    let h = z / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let a = p as f64 * h;
        for (xi, wi) in x.iter().zip(w) {
            sum += wi * 0.5 * h * sinc(a + 0.5 * h * (xi + 1.0));
        }
    }
    sum
}

/// `(1/r)∫_r^{2r} sinc(ρκ) dρ`; the Fourier multiplier of the radial
/// average of spherical means at `κ = |k|`.
pub fn shell_band_average(r: f64, kappa: f64) -> f64 {
    let z = r * kappa;
    if z < 1e-3 {
        // 1 − (7/18) z² + O(z⁴)
        return 1.0 - 7.0 / 18.0 * z * z;
    }
    (si(2.0 * z) - si(z)) / z
}

fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: std::sync::OnceLock<(Vec<f64>, Vec<f64>)> = std::sync::OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

/// `∫₀^z (sinc t − 1) dt/t = 1 − sinc z − Cin z`; the Fourier multiplier
/// of the cumulative structure function at `z = 2R|k|`.
pub fn cumulative_kernel(z: f64) -> f64 {
    if z.abs() < 1e-2 {
        let z2 = z * z;
        return -z2 / 12.0 + z2 * z2 / 480.0;
    }
    1.0 - sinc(z) - cin(z)
}
