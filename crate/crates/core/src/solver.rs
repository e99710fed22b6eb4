//! Time integration of the unforced incompressible equations.
//!
//! The velocity evolves in Fourier space as `∂ₜû = −ν|k|²û + N(û)` with
//! `N(û) = −P FFT(ω × u)`. For divergence-free `u` the rotational form
//! differs from `u·∇u` by a gradient, which the projection removes. With the
//! 2/3 rule the product is formed from masked fields and masked again, so
//! `⟨N(u), u⟩ = 0` holds to round-off.
//!
//! The viscous term is integrated exactly by the factor `e^{−ν|k|²h}` and the
//! rest by classical RK4 in the transformed variable (Lawson's scheme).

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csv::Table;
use crate::fft::{plan, C64};
use crate::field::{project_mode, Field, GridSpec, NormKind};
use crate::sum::max_by;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Integrator {
    Rk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub dealias: bool,
    pub integrator: Integrator,
    /// Steps between statistics records (the final time is always recorded).
    pub stats_stride: usize,
    /// Steps between stored snapshots; `0` keeps only the first and last.
    pub snapshot_stride: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 1.0,
            dealias: true,
            integrator: Integrator::Rk4,
            stats_stride: 1,
            snapshot_stride: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dt = {} must be positive",
                self.dt
            )));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "t_end = {} must be nonnegative",
                self.t_end
            )));
        }
        if self.stats_stride == 0 {
            return Err(Error::InvalidArgument(
                "stats_stride must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Number of steps; the last one is shortened to land on `t_end`.
    pub fn steps(&self) -> usize {
        let s = self.t_end / self.dt;
        (s - 1e-9 * s.max(1.0)).ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowStats {
    pub t: f64,
    /// `½‖u‖²_{L²}`.
    pub energy: f64,
    /// `‖∇u‖²_{L²}`.
    pub enstrophy: f64,
    /// `ν‖∇u‖²_{L²}/|𝕋³|`, the space-averaged dissipation rate.
    pub dissipation: f64,
    pub max_u: f64,
    /// Largest Frobenius norm of the velocity gradient.
    pub max_grad_u: f64,
}

pub const STATS_HEADER: &str = "t,energy,enstrophy,dissipation,max_u,max_grad_u";

pub fn flow_stats(u: &Field, t: f64) -> FlowStats {
    let g = u.grid();
    let energy = 0.5 * u.parseval_l2_squared();
    let enstrophy = u
        .norm(NormKind::V)
        .expect("V norm is always defined")
        .powi(2);
    let mag = u.magnitude();
    let grad = u.gradient_magnitude();
    FlowStats {
        t,
        energy,
        enstrophy,
        dissipation: g.nu() * enstrophy / g.volume(),
        max_u: max_by(0..mag.len(), |i| mag[i]),
        max_grad_u: max_by(0..grad.len(), |i| grad[i]),
    }
}

pub fn stats_table(stats: &[FlowStats]) -> Table {
    let mut t = Table::new(STATS_HEADER);
    for s in stats {
        t.push_nums(&[
            s.t,
            s.energy,
            s.enstrophy,
            s.dissipation,
            s.max_u,
            s.max_grad_u,
        ]);
    }
    t
}

pub fn write_stats_csv(stats: &[FlowStats], path: &Path) -> Result<()> {
    stats_table(stats).write(path)
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: GridSpec,
    pub config: SolverConfig,
    /// `(t, u(t))`, strictly increasing in `t`.
    pub snapshots: Vec<(f64, Field)>,
    pub stats: Vec<FlowStats>,
}

impl Trajectory {
    pub fn final_field(&self) -> &Field {
        &self
            .snapshots
            .last()
            .expect("trajectory has at least the initial snapshot")
            .1
    }

    pub fn times(&self) -> Vec<f64> {
        self.stats.iter().map(|s| s.t).collect()
    }
}

type Spec3 = [Vec<C64>; 3];

/// Precomputed spectral tables for one grid.
struct Operator {
    grid: GridSpec,
    /// Derivative wavevector of every flat index.
    kvec: Vec<[f64; 3]>,
    ksq: Vec<f64>,
    mask: Option<Vec<bool>>,
}

impl Operator {
    fn new(grid: GridSpec, dealias: bool) -> Self {
        let kf = grid.wavenumbers();
        let kd = grid.derivative_wavenumbers();
        let n = grid.n() as i64;
        let ijk: Vec<[usize; 3]> = (0..grid.len()).map(|idx| grid.unravel(idx)).collect();
        let ksq = ijk
            .iter()
            .map(|&[i, j, k]| kf[i] * kf[i] + kf[j] * kf[j] + kf[k] * kf[k])
            .collect();
        let kvec = ijk.iter().map(|&[i, j, k]| [kd[i], kd[j], kd[k]]).collect();
        let mask = dealias.then(|| {
            (0..grid.len())
                .map(|idx| grid.mode_vector(idx).iter().all(|&m| 3 * m.abs() < n))
                .collect()
        });
        Self {
            grid,
            kvec,
            ksq,
            mask,
        }
    }

    #[inline]
    fn keep(&self, idx: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[idx])
    }

    /// `N(û) = −P mask FFT(ω × u)` and `max|u|` on the grid.
    ///
    /// Six real arrays go through three complex inverse transforms as the
    /// pairs `(u₀, u₁)`, `(u₂, ω₀)`, `(ω₁, ω₂)`; the product needs two forward
    /// transforms.
    fn nonlinear(&self, u: &Spec3) -> (Spec3, f64) {
        let g = self.grid;
        let len = g.len();
        let n = g.n();
        let fft = plan(n);
        let zero = C64::new(0.0, 0.0);
        let i = C64::new(0.0, 1.0);
        let pack = |f: &(dyn Fn([f64; 3], [C64; 3]) -> C64 + Sync)| -> Vec<C64> {
            (0..len)
                .into_par_iter()
                .with_min_len(1024)
                .map(|idx| {
                    if self.keep(idx) {
                        f(self.kvec[idx], [u[0][idx], u[1][idx], u[2][idx]])
                    } else {
                        zero
                    }
                })
                .collect()
        };
        // ω̂ = ik × û
        let w = |k: [f64; 3], v: [C64; 3], c: usize| -> C64 {
            let (a, b) = ((c + 1) % 3, (c + 2) % 3);
            i * (v[b] * k[a] - v[a] * k[b])
        };
        let mut z1 = pack(&|_, v| v[0] + i * v[1]);
        let mut z2 = pack(&|k, v| v[2] + i * w(k, v, 0));
        let mut z3 = pack(&|k, v| w(k, v, 1) + i * w(k, v, 2));
        fft.inverse(&mut z1);
        fft.inverse(&mut z2);
        fft.inverse(&mut z3);
        let max_u = max_by(0..len, |p| (z1[p].norm_sqr() + z2[p].re * z2[p].re).sqrt());
        let (mut y1, mut y2): (Vec<C64>, Vec<C64>) = (0..len)
            .into_par_iter()
            .with_min_len(1024)
            .map(|p| {
                let (u0, u1, u2) = (z1[p].re, z1[p].im, z2[p].re);
                let (w0, w1, w2) = (z2[p].im, z3[p].re, z3[p].im);
                let c0 = w1 * u2 - w2 * u1;
                let c1 = w2 * u0 - w0 * u2;
                let c2 = w0 * u1 - w1 * u0;
                (C64::new(c0, c1), C64::new(c2, 0.0))
            })
            .unzip();
        fft.forward_unscaled(&mut y1);
        fft.forward_unscaled(&mut y2);
        let scale = 1.0 / len as f64;
        let mut out: Spec3 = [vec![zero; len], vec![zero; len], vec![zero; len]];
        let [o0, o1, o2] = &mut out;
        let half_i = C64::new(0.0, -0.5);
        o0.par_chunks_mut(n * n)
            .zip(o1.par_chunks_mut(n * n))
            .zip(o2.par_chunks_mut(n * n))
            .enumerate()
            .for_each(|(k, ((a, b), c))| {
                let km = (n - k) % n;
                for j in 0..n {
                    let jm = (n - j) % n;
                    for ii in 0..n {
                        let idx = ii + n * (j + n * k);
                        if !self.keep(idx) {
                            continue;
                        }
                        let neg = (n - ii) % n + n * (jm + n * km);
                        let (yk, ym) = (y1[idx], y1[neg].conj());
                        let prod = [
                            (yk + ym) * (0.5 * scale),
                            (yk - ym) * half_i * scale,
                            y2[idx] * scale,
                        ];
                        let p = project_mode(self.kvec[idx], prod);
                        let o = ii + n * j;
                        a[o] = -p[0];
                        b[o] = -p[1];
                        c[o] = -p[2];
                    }
                }
            });
        (out, max_u)
    }

    fn decay(&self, h: f64) -> Vec<f64> {
        let nu = self.grid.nu();
        self.ksq.iter().map(|k2| (-nu * k2 * h).exp()).collect()
    }
}

fn axpy(y: &Spec3, a: f64, x: &Spec3) -> Spec3 {
    [0, 1, 2].map(|c| y[c].par_iter().zip(&x[c]).map(|(p, q)| p + q * a).collect())
}

fn scale_by(e: &[f64], x: &Spec3) -> Spec3 {
    [0, 1, 2].map(|c| x[c].par_iter().zip(e).map(|(v, f)| v * f).collect())
}

/// One Lawson RK4 step with precomputed decay factors for `h/2` and `h`.
fn lawson_step(
    op: &Operator,
    u: &Spec3,
    h: f64,
    e_half: &[f64],
    e_full: &[f64],
    t: f64,
) -> Result<Spec3> {
    let (a, max_u) = op.nonlinear(u);
    let limit = 0.5 * op.grid.dx() / max_u;
    if !max_u.is_finite() {
        return Err(Error::NonFinite {
            t,
            what: "velocity",
        });
    }
    if h > limit {
        return Err(Error::Cfl { t, dt: h, limit });
    }
    let b = op.nonlinear(&scale_by(e_half, &axpy(u, 0.5 * h, &a))).0;
    let c = op.nonlinear(&axpy(&scale_by(e_half, u), 0.5 * h, &b)).0;
    let eu = scale_by(e_full, u);
    let d = op.nonlinear(&axpy(&eu, h, &scale_by(e_half, &c))).0;
    let bc = axpy(&b, 1.0, &c);
    let mut incr = scale_by(e_full, &a);
    incr = axpy(&incr, 2.0, &scale_by(e_half, &bc));
    incr = axpy(&incr, 1.0, &d);
    let next = axpy(&eu, h / 6.0, &incr);
    if next
        .iter()
        .any(|comp| comp.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()))
    {
        return Err(Error::NonFinite {
            t: t + h,
            what: "velocity",
        });
    }
    Ok(next)
}

/// `νΔu − P(u·∇u)`.
pub fn nse_rhs(u: &Field, dealias: bool) -> Field {
    let op = Operator::new(*u.grid(), dealias);
    let (nl, _) = op.nonlinear(u.spectral());
    let nu = u.grid().nu();
    let out = [0, 1, 2].map(|c| {
        nl[c]
            .iter()
            .zip(&u.spectral()[c])
            .zip(&op.ksq)
            .map(|((n, v), k2)| n - v * (nu * k2))
            .collect()
    });
    Field::from_spectral(*u.grid(), out).expect("lengths preserved")
}

/// Advances `u` by one step of size `dt` starting at time `t`.
pub fn step(u: &Field, dt: f64, dealias: bool, t: f64) -> Result<Field> {
    let op = Operator::new(*u.grid(), dealias);
    let next = lawson_step(&op, u.spectral(), dt, &op.decay(0.5 * dt), &op.decay(dt), t)?;
    Field::from_spectral(*u.grid(), next)
}

pub fn simulate(u0: &Field, config: &SolverConfig) -> Result<Trajectory> {
    simulate_with(u0, config, |_, _| Ok(()))
}

/// Runs the solver and calls `observe(stats, u)` at every statistics time.
pub fn simulate_with<F>(u0: &Field, config: &SolverConfig, mut observe: F) -> Result<Trajectory>
where
    F: FnMut(&FlowStats, &Field) -> Result<()>,
{
    config.validate()?;
    let grid = *u0.grid();
    let op = Operator::new(grid, config.dealias);
    let dt = config.dt;
    let steps = config.steps();
    let (e_half, e_full) = (op.decay(0.5 * dt), op.decay(dt));

    let s0 = flow_stats(u0, 0.0);
    if !s0.energy.is_finite() {
        return Err(Error::NonFinite {
            t: 0.0,
            what: "initial data",
        });
    }
    observe(&s0, u0)?;
    let mut traj = Trajectory {
        grid,
        config: config.clone(),
        snapshots: vec![(0.0, u0.clone())],
        stats: vec![s0],
    };

    let mut u = u0.spectral().clone();
    let mut t = 0.0;
    for j in 1..=steps {
        let t_next = if j == steps {
            config.t_end
        } else {
            j as f64 * dt
        };
        let h = t_next - t;
        u = if (h - dt).abs() <= 1e-12 * dt {
            lawson_step(&op, &u, dt, &e_half, &e_full, t)?
        } else {
            lawson_step(&op, &u, h, &op.decay(0.5 * h), &op.decay(h), t)?
        };
        t = t_next;
        let want_stats = j % config.stats_stride == 0 || j == steps;
        let want_snap =
            j == steps || (config.snapshot_stride > 0 && j % config.snapshot_stride == 0);
        if want_stats || want_snap {
            let f = Field::from_spectral(grid, u.clone())?;
            if want_stats {
                let s = flow_stats(&f, t);
                if !s.energy.is_finite() || !s.max_grad_u.is_finite() {
                    return Err(Error::NonFinite {
                        t,
                        what: "flow statistics",
                    });
                }
                observe(&s, &f)?;
                traj.stats.push(s);
            }
            if want_snap {
                traj.snapshots.push((t, f));
            }
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Generator;

    fn tg(n: usize, nu: f64) -> Field {
        Generator::TaylorGreen2d { amplitude: 1.0 }
            .generate(GridSpec::periodic(n, nu).unwrap())
            .unwrap()
    }

    #[test]
    fn zero_rhs_for_zero_field() {
        let g = GridSpec::periodic(16, 0.1).unwrap();
        let r = nse_rhs(&Field::zeros(g), true);
        assert!(r.physical().iter().all(|c| c.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn taylor_green_rhs_is_pure_diffusion() {
        // u·∇u = −∇(cos 2x₁ + cos 2x₂)/4 is a gradient, so the rhs is νΔu = −2νu
        for dealias in [true, false] {
            let u = tg(16, 0.1);
            let r = nse_rhs(&u, dealias);
            for c in 0..3 {
                for (a, b) in r.physical()[c].iter().zip(&u.physical()[c]) {
                    assert!((a + 0.2 * b).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn nonlinearity_is_energy_neutral() {
        let g = GridSpec::periodic(16, 1e-9).unwrap();
        let u = Generator::RandomDivfree {
            slope: -5.0 / 3.0,
            k_min: 1.0,
            k_max: 7.0,
            rms: 1.0,
            seed: 3,
        }
        .generate(g)
        .unwrap();
        for dealias in [true, false] {
            let op = Operator::new(g, dealias);
            let (nl, _) = op.nonlinear(u.spectral());
            let dot: f64 = (0..3)
                .map(|c| {
                    nl[c]
                        .iter()
                        .zip(&u.spectral()[c])
                        .map(|(a, b)| (a * b.conj()).re)
                        .sum::<f64>()
                })
                .sum();
            let scale: f64 = (0..3)
                .map(|c| nl[c].iter().map(|v| v.norm_sqr()).sum::<f64>())
                .sum::<f64>()
                .sqrt();
            assert!(dot.abs() < 1e-10 * scale, "dealias={dealias}: {dot}");
        }
    }

    #[test]
    fn zero_initial_data_stays_zero() {
        let g = GridSpec::periodic(8, 0.1).unwrap();
        let cfg = SolverConfig {
            dt: 0.01,
            t_end: 0.05,
            ..Default::default()
        };
        let traj = simulate(&Field::zeros(g), &cfg).unwrap();
        assert_eq!(traj.stats.len(), 6);
        assert!(traj.stats.iter().all(|s| s.energy == 0.0));
    }

    #[test]
    fn cfl_violation_is_reported() {
        let u = tg(16, 0.1).scale(100.0);
        let cfg = SolverConfig {
            dt: 0.01,
            t_end: 0.1,
            ..Default::default()
        };
        assert!(matches!(simulate(&u, &cfg), Err(Error::Cfl { .. })));
    }

    #[test]
    fn shortened_last_step_lands_on_t_end() {
        let cfg = SolverConfig {
            dt: 0.3,
            t_end: 1.0,
            ..Default::default()
        };
        assert_eq!(cfg.steps(), 4);
        let cfg = SolverConfig {
            dt: 0.1,
            t_end: 1.0,
            ..Default::default()
        };
        assert_eq!(cfg.steps(), 10);
        let traj = simulate(
            &tg(8, 0.1),
            &SolverConfig {
                dt: 0.3,
                t_end: 1.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(traj.stats.last().unwrap().t, 1.0);
    }

    #[test]
    fn stats_of_constant_and_single_mode() {
        let g = GridSpec::periodic(8, 0.1).unwrap();
        let c = Field::from_fn(g, |_| [1.0, 2.0, 0.0]);
        let s = flow_stats(&c, 0.0);
        assert_eq!(s.enstrophy, 0.0);
        assert_eq!(s.dissipation, 0.0);
        let m = Field::from_fn(g, |x| [0.0, x[0].sin(), 0.0]);
        let s = flow_stats(&m, 0.0);
        let l2sq = m.norm(NormKind::Lp(2.0)).unwrap().powi(2);
        assert!((s.enstrophy - l2sq).abs() < 1e-12 * l2sq);
        assert!((s.max_grad_u - 1.0).abs() < 1e-12);
    }
}
