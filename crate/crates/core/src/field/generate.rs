//! Synthetic initial data.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Field, GridSpec};
use crate::fft::C64;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Generator {
    /// `A (sin k₀x₁ cos k₀x₂, −cos k₀x₁ sin k₀x₂, 0)`.
    TaylorGreen2d { amplitude: f64 },
    /// Random phases, energy spectrum `E(k) ∝ k^slope` on the integer shell
    /// `k_min ≤ |m| ≤ k_max`, rescaled so that `⟨|u|²⟩^{1/2} = rms`.
    RandomDivfree {
        slope: f64,
        k_min: f64,
        k_max: f64,
        rms: f64,
        seed: u64,
    },
    /// `A e sin(k·x)` with a fixed unit polarization `e ⊥ k`.
    SingleMode { k: [i64; 3], amplitude: f64 },
    /// `U (1 + |x − c|/L)^{−β} e₁` about the cube centre `c`, projected.
    SelfSimilar {
        velocity: f64,
        length: f64,
        beta: f64,
    },
}

fn param(params: &BTreeMap<String, f64>, key: &str, default: Option<f64>) -> Result<f64> {
    match (params.get(key), default) {
        (Some(&v), _) => Ok(v),
        (None, Some(d)) => Ok(d),
        (None, None) => Err(Error::MissingInput(format!("generator parameter `{key}`"))),
    }
}

impl Generator {
    /// Builds a generator from its kind name and a flat parameter map.
    pub fn from_kind(kind: &str, params: &BTreeMap<String, f64>, seed: u64) -> Result<Self> {
        let g = match kind {
            "taylor_green_2d" => Self::TaylorGreen2d {
                amplitude: param(params, "amplitude", Some(1.0))?,
            },
            "random_divfree" | "random_divfree_spectrum" => Self::RandomDivfree {
                slope: param(params, "slope", Some(-5.0 / 3.0))?,
                k_min: param(params, "k_min", Some(1.0))?,
                k_max: param(params, "k_max", None)?,
                rms: param(params, "rms", Some(1.0))?,
                seed,
            },
            "single_mode" => Self::SingleMode {
                k: [
                    param(params, "k1", Some(1.0))? as i64,
                    param(params, "k2", Some(0.0))? as i64,
                    param(params, "k3", Some(0.0))? as i64,
                ],
                amplitude: param(params, "amplitude", Some(1.0))?,
            },
            "selfsimilar_profile" => Self::SelfSimilar {
                velocity: param(params, "U", Some(1.0))?,
                length: param(params, "L", Some(1.0))?,
                beta: param(params, "beta", None)?,
            },
            other => return Err(Error::UnknownGenerator(other.to_string())),
        };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::RandomDivfree {
                k_min, k_max, rms, ..
            } => {
                if !(k_min > 0.0 && k_max >= k_min && rms >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "random_divfree needs 0 < k_min ≤ k_max and rms ≥ 0 (got {k_min}, {k_max}, {rms})"
                    )));
                }
            }
            Self::SingleMode { k: [0, 0, 0], .. } => {
                return Err(Error::InvalidArgument("single_mode needs k ≠ 0".into()));
            }
            Self::SelfSimilar { length, beta, .. } if !(length > 0.0 && beta > 0.0) => {
                return Err(Error::InvalidArgument(
                    "selfsimilar_profile needs L > 0 and β > 0".into(),
                ));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn generate(&self, grid: GridSpec) -> Result<Field> {
        self.validate()?;
        let k0 = grid.k0();
        Ok(match *self {
            Self::TaylorGreen2d { amplitude: a } => Field::from_fn(grid, |x| {
                let (s1, c1) = (k0 * x[0]).sin_cos();
                let (s2, c2) = (k0 * x[1]).sin_cos();
                [a * s1 * c2, -a * c1 * s2, 0.0]
            }),
            Self::RandomDivfree {
                slope,
                k_min,
                k_max,
                rms,
                seed,
            } => random_divfree(grid, slope, k_min, k_max, rms, seed)?,
            Self::SingleMode { k, amplitude } => {
                let half = (grid.n() / 2) as i64;
                if k.iter().any(|&m| m.abs() >= half) {
                    return Err(Error::InvalidArgument(format!(
                        "mode {k:?} not resolved on n = {}",
                        grid.n()
                    )));
                }
                let kf = k.map(|m| m as f64);
                let (e, _) = orthonormal_pair(kf);
                Field::from_fn(grid, |x| {
                    let s = amplitude * (k0 * (kf[0] * x[0] + kf[1] * x[1] + kf[2] * x[2])).sin();
                    [s * e[0], s * e[1], s * e[2]]
                })
                .leray_project()
            }
            Self::SelfSimilar {
                velocity,
                length,
                beta,
            } => selfsimilar_profile(grid, velocity, length, beta),
        })
    }
}

/// Unprojected-then-projected profile `U (1 + d/L)^{−β} e₁`, with `d` the
/// periodic distance to the cube centre.
pub fn selfsimilar_profile(grid: GridSpec, velocity: f64, length: f64, beta: f64) -> Field {
    let c = 0.5 * grid.domain_length();
    Field::from_fn(grid, |x| {
        let d = grid.periodic_delta(x, [c, c, c]);
        let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        [velocity * (1.0 + r / length).powf(-beta), 0.0, 0.0]
    })
    .leray_project()
}

/// Two unit vectors completing `k̂` to a right-handed orthonormal frame.
fn orthonormal_pair(k: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let norm = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let cross = |a: [f64; 3], b: [f64; 3]| {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let kn = norm(k);
    let kh = k.map(|v| v / kn);
    // axis least aligned with k
    let mut axis = 0;
    for c in 1..3 {
        if kh[c].abs() < kh[axis].abs() {
            axis = c;
        }
    }
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let a = cross(kh, e);
    let an = norm(a);
    let a = a.map(|v| v / an);
    (a, cross(kh, a))
}

fn in_upper_half(m: [i64; 3]) -> bool {
    m[2] > 0 || (m[2] == 0 && (m[1] > 0 || (m[1] == 0 && m[0] > 0)))
}

fn random_divfree(
    grid: GridSpec,
    slope: f64,
    k_min: f64,
    k_max: f64,
    rms: f64,
    seed: u64,
) -> Result<Field> {
    let n = grid.n();
    let half = (n / 2) as i64;
    if k_max >= half as f64 {
        return Err(Error::InvalidArgument(format!(
            "k_max = {k_max} must be below n/2 = {half}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zero = C64::new(0.0, 0.0);
    let mut spec = [
        vec![zero; grid.len()],
        vec![zero; grid.len()],
        vec![zero; grid.len()],
    ];
    let kmax = k_max.floor() as i64;
    let mut total = 0.0;
    for m3 in -kmax..=kmax {
        for m2 in -kmax..=kmax {
            for m1 in -kmax..=kmax {
                let m = [m1, m2, m3];
                if !in_upper_half(m) {
                    continue;
                }
                let km = ((m1 * m1 + m2 * m2 + m3 * m3) as f64).sqrt();
                if km < k_min || km > k_max {
                    continue;
                }
                let amp = km.powf(0.5 * (slope - 2.0));
                let (a, b) = orthonormal_pair(m.map(|v| v as f64));
                let alpha: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let p1 = C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
                let p2 = C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
                let (ca, sa) = (alpha.cos(), alpha.sin());
                let idx = grid.index(
                    grid.mode_index(m1),
                    grid.mode_index(m2),
                    grid.mode_index(m3),
                );
                let neg = grid.index(
                    grid.mode_index(-m1),
                    grid.mode_index(-m2),
                    grid.mode_index(-m3),
                );
                for c in 0..3 {
                    let v = (p1 * (ca * a[c]) + p2 * (sa * b[c])) * amp;
                    spec[c][idx] = v;
                    spec[c][neg] = v.conj();
                }
                total += 2.0 * amp * amp;
            }
        }
    }
    if total == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "no modes with {k_min} ≤ |k| ≤ {k_max}"
        )));
    }
    let scale = rms / total.sqrt();
    for comp in spec.iter_mut() {
        for v in comp.iter_mut() {
            *v *= scale;
        }
    }
    Ok(Field::from_spectral(grid, spec)?.leray_project())
}
