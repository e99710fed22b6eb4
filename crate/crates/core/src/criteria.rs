//! Regularity monitors and enstrophy certificates along a trajectory.
//!
//! Every certificate is a closed-form bound with one free absolute constant
//! `C`. Reports carry the measured functional, the bound under the configured
//! constant and the critical constant at which the two coincide, so a run
//! tells how large `C` has to be rather than just whether `C = 1` works.
//!
//! Smallness conditions (worst-set integrals, the increment condition on
//! regions of interest) are monitors: they hold when the configured `C` is at
//! most the critical one. Enstrophy and `L^q` certificates hold when it is at
//! least the critical one.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::csv::{num, Table};
use crate::field::{lp_norm, Field, GridSpec, NormKind};
use crate::pressure::solve_pressure;
use crate::quadrature::{Panel, RadialGrid, SphereQuadrature};
use crate::solver::FlowStats;
use crate::structure::{dissipation_rate, IncrementField};
use crate::sum::tree_sum_by;
use crate::{Error, Result};

pub const REPORT_HEADER: &str = "t,measured,bound,ratio,required_C,pass";

/// Default percentile for quantile-based level policies.
pub const DEFAULT_QUANTILE: f64 = 0.99;

/// Absolute constants of the inequalities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constants {
    pub c_absolute: f64,
    /// Constant of `‖u‖_{L⁶} ≤ C‖u‖_{Ḣ¹}`.
    pub c_morrey: f64,
    /// `(q, C_q)` overrides for the `q`-dependent constants.
    pub c_q: Vec<(f64, f64)>,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            c_absolute: 1.0,
            c_morrey: 0.30596,
            c_q: Vec::new(),
        }
    }
}

impl Constants {
    pub fn validate(&self) -> Result<()> {
        let ok = |c: f64| c > 0.0 && c.is_finite();
        if !ok(self.c_absolute)
            || !ok(self.c_morrey)
            || self.c_q.iter().any(|&(q, c)| !ok(c) || q.is_nan())
        {
            return Err(Error::InvalidArgument(
                "constants must be positive and finite".into(),
            ));
        }
        Ok(())
    }

    /// `C_q`, falling back to `c_absolute`.
    pub fn for_q(&self, q: f64) -> f64 {
        self.c_q
            .iter()
            .find(|&&(k, _)| k == q)
            .map_or(self.c_absolute, |&(_, c)| c)
    }
}

/// Norms of one snapshot that feed the certificates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormSample {
    pub t: f64,
    /// `‖u‖²_{L²}`.
    pub l2_sq: f64,
    /// `‖u‖²_V = ‖∇u‖²_{L²}`.
    pub enstrophy: f64,
    /// `(q, ‖u‖_{L^q})` for the requested exponents.
    pub lq: Vec<(f64, f64)>,
    pub grad_l3: f64,
    /// `‖Λ^{1/2}u‖_{L²}`.
    pub lambda12: f64,
    /// `‖Λ^{3/2}u‖²_{L²}`.
    pub lambda32_sq: f64,
    /// Space-averaged dissipation rate.
    pub dissipation: f64,
}

impl NormSample {
    pub fn lq(&self, q: f64) -> Option<f64> {
        self.lq.iter().find(|&&(k, _)| k == q).map(|&(_, v)| v)
    }
}

pub fn sample_norms(u: &Field, t: f64, qs: &[f64]) -> Result<NormSample> {
    let g = u.grid();
    let lq = qs
        .iter()
        .map(|&q| Ok((q, u.norm(NormKind::Lp(q))?)))
        .collect::<Result<Vec<_>>>()?;
    let enstrophy = u.norm(NormKind::V)?.powi(2);
    Ok(NormSample {
        t,
        l2_sq: u.parseval_l2_squared(),
        enstrophy,
        lq,
        grad_l3: lp_norm(g, &u.gradient_magnitude(), 3.0)?,
        lambda12: u.norm(NormKind::Hdot(0.5))?,
        lambda32_sq: u.norm(NormKind::Hdot(1.5))?.powi(2),
        dissipation: g.nu() * enstrophy / g.volume(),
    })
}

pub fn sample_trajectory(snapshots: &[(f64, Field)], qs: &[f64]) -> Result<Vec<NormSample>> {
    snapshots
        .par_iter()
        .map(|(t, u)| sample_norms(u, *t, qs))
        .collect()
}

/// `∫_{t₀}^{t_i} f dt` by the trapezoid rule, for every `i`.
pub fn cumulative_trapezoid(t: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    for i in 0..t.len() {
        if i > 0 {
            acc += 0.5 * (t[i] - t[i - 1]) * (f[i] + f[i - 1]);
        }
        out.push(acc);
    }
    out
}

/// One criterion evaluated along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: String,
    pub times: Vec<f64>,
    pub measured: Vec<f64>,
    /// NaN where the criterion has no bound.
    pub bound: Vec<f64>,
    /// Constant at which `measured = bound`.
    pub required_c: Vec<f64>,
    pub pass: Vec<bool>,
    /// The configured constant the bound was evaluated with.
    pub constant: f64,
    pub params: BTreeMap<String, f64>,
    /// Auxiliary time series such as `r(t)` or `U(t)`.
    pub series: BTreeMap<String, Vec<f64>>,
    pub note: Option<String>,
}

/// Parameters and outcome of a report, without the time series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportSummary {
    pub id: String,
    pub constant: f64,
    pub passed: bool,
    pub max_required_c: f64,
    pub params: BTreeMap<String, f64>,
    pub note: Option<String>,
}

/// Whether the criterion holds for large or for small constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sense {
    Certificate,
    Smallness,
}

impl CriterionReport {
    fn new(
        id: &str,
        times: Vec<f64>,
        measured: Vec<f64>,
        bound: Vec<f64>,
        required_c: Vec<f64>,
        constant: f64,
        sense: Sense,
    ) -> Self {
        let pass: Vec<bool> = measured
            .iter()
            .zip(&bound)
            .map(|(&m, &b)| if b.is_nan() { m.is_finite() } else { m <= b })
            .collect();
        let mut r = Self {
            id: id.to_string(),
            times,
            measured,
            bound,
            required_c,
            pass,
            constant,
            params: BTreeMap::new(),
            series: BTreeMap::new(),
            note: None,
        };
        if !r.passed() {
            r.note = Some(match sense {
                Sense::Certificate => format!(
                    "constant too small: C = {} needs at least {}",
                    constant,
                    r.max_required_c()
                ),
                Sense::Smallness => format!(
                    "condition violated: C = {} must not exceed {}",
                    constant,
                    r.min_required_c()
                ),
            });
        }
        r
    }

    fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    fn with_series(mut self, key: &str, values: Vec<f64>) -> Self {
        self.series.insert(key.to_string(), values);
        self
    }

    /// `measured / bound`, NaN where no bound is defined.
    pub fn ratio(&self, i: usize) -> f64 {
        let b = self.bound[i];
        if b.is_nan() || b == 0.0 {
            f64::NAN
        } else {
            self.measured[i] / b
        }
    }

    pub fn passed(&self) -> bool {
        self.pass.iter().all(|&p| p)
    }

    pub fn max_required_c(&self) -> f64 {
        self.required_c
            .iter()
            .copied()
            .filter(|c| !c.is_nan())
            .fold(f64::NAN, f64::max)
    }

    pub fn min_required_c(&self) -> f64 {
        self.required_c
            .iter()
            .copied()
            .filter(|c| !c.is_nan())
            .fold(f64::NAN, f64::min)
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(REPORT_HEADER);
        for i in 0..self.times.len() {
            t.push(vec![
                num(self.times[i]),
                num(self.measured[i]),
                num(self.bound[i]),
                num(self.ratio(i)),
                num(self.required_c[i]),
                self.pass[i].to_string(),
            ]);
        }
        t
    }

    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            id: self.id.clone(),
            constant: self.constant,
            passed: self.passed(),
            max_required_c: self.max_required_c(),
            params: self.params.clone(),
            note: self.note.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// worst-set integrals and level sets

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "set measure δ = {delta} must be positive"
        )));
    }
    Ok(())
}

fn sorted_powers(grid: &GridSpec, values: &[f64], exponent: f64) -> Result<Vec<f64>> {
    if values.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: values.len(),
        });
    }
    if !(exponent > 0.0 && exponent.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "exponent {exponent} must be positive"
        )));
    }
    let mut w: Vec<f64> = values.par_iter().map(|v| v.abs().powf(exponent)).collect();
    w.par_sort_unstable_by(|a, b| b.total_cmp(a));
    Ok(w)
}

/// `sup_{|A| ≤ δ} ∫_A |f|^exponent` on the grid measure.
///
/// Cells are taken in decreasing order of `|f|`; the last one is pro-rated
/// to spend the budget exactly. `δ` beyond the domain volume selects the
/// whole domain.
pub fn worst_set_integral(
    grid: &GridSpec,
    values: &[f64],
    exponent: f64,
    delta: f64,
) -> Result<f64> {
    check_delta(delta)?;
    let w = sorted_powers(grid, values, exponent)?;
    let dv = grid.cell_volume();
    let budget = delta.min(grid.volume());
    let k = ((budget / dv).floor() as usize).min(w.len());
    let full = dv * tree_sum_by(0..k, &|i| w[i]);
    let rest = if k < w.len() {
        (budget - k as f64 * dv).max(0.0) * w[k]
    } else {
        0.0
    };
    Ok(full + rest)
}

/// Largest `δ` with `worst_set_integral(δ) ≤ threshold`; the domain volume
/// when even the full integral stays below it.
pub fn admissible_delta(
    grid: &GridSpec,
    values: &[f64],
    exponent: f64,
    threshold: f64,
) -> Result<f64> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold {threshold} must be nonnegative"
        )));
    }
    let w = sorted_powers(grid, values, exponent)?;
    let dv = grid.cell_volume();
    let mut acc = 0.0;
    for (i, &wi) in w.iter().enumerate() {
        let next = acc + dv * wi;
        if next > threshold {
            return Ok(i as f64 * dv + (threshold - acc) / wi);
        }
        acc = next;
    }
    Ok(grid.volume())
}

/// Measures of `B_U = {|u| ≥ U}` and `B_{U,G} = B_U ∩ {|∇u| ≥ G}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSetMeasure {
    pub u_level: f64,
    pub measure: f64,
    /// `U⁻²‖u‖²_{L²}` on the grid measure.
    pub chebyshev_bound: f64,
    pub g_level: Option<f64>,
    pub measure_ug: Option<f64>,
    /// `|{|∇u| ≥ G}|`.
    pub gradient_measure: Option<f64>,
    pub vorticity_l1: Option<f64>,
    /// `G|{|∇u| ≥ G}| / ‖ω‖_{L¹}`, the constant the weak-type bound needs.
    pub weak_l1_ratio: Option<f64>,
}

impl LevelSetMeasure {
    pub fn chebyshev_holds(&self) -> bool {
        self.measure <= self.chebyshev_bound
    }
}

fn check_level(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "level {name} = {v} must be positive"
        )));
    }
    Ok(())
}

pub fn level_set_measure(u: &Field, u_level: f64, g_level: Option<f64>) -> Result<LevelSetMeasure> {
    check_level("U", u_level)?;
    let g = u.grid();
    let dv = g.cell_volume();
    let mag = u.magnitude();
    let in_u: Vec<bool> = mag.iter().map(|&m| m >= u_level).collect();
    let count = |mask: &[bool]| mask.iter().filter(|&&b| b).count() as f64 * dv;
    let l2_sq = dv * tree_sum_by(0..mag.len(), &|i| mag[i] * mag[i]);
    let mut out = LevelSetMeasure {
        u_level,
        measure: count(&in_u),
        chebyshev_bound: l2_sq / (u_level * u_level),
        g_level,
        measure_ug: None,
        gradient_measure: None,
        vorticity_l1: None,
        weak_l1_ratio: None,
    };
    if let Some(gl) = g_level {
        check_level("G", gl)?;
        let grad = u.gradient_magnitude();
        let in_g: Vec<bool> = grad.iter().map(|&v| v >= gl).collect();
        let both: Vec<bool> = in_u.iter().zip(&in_g).map(|(&a, &b)| a && b).collect();
        let gm = count(&in_g);
        let w1 = u.curl().norm(NormKind::Lp(1.0))?;
        out.measure_ug = Some(count(&both));
        out.gradient_measure = Some(gm);
        out.vorticity_l1 = Some(w1);
        out.weak_l1_ratio = Some(if w1 > 0.0 { gl * gm / w1 } else { f64::NAN });
    }
    Ok(out)
}

/// How a level `U(t)` or `G(t)` is chosen at each snapshot.
#[derive(Debug, Clone, PartialEq)]
pub enum LevelPolicy {
    Constant(f64),
    /// Nearest-rank quantile of the pointwise magnitude.
    Quantile(f64),
    /// One value per snapshot.
    Series(Vec<f64>),
}

impl LevelPolicy {
    pub fn resolve(&self, index: usize, magnitudes: &[f64]) -> Result<f64> {
        let v = match self {
            LevelPolicy::Constant(v) => *v,
            LevelPolicy::Quantile(q) => {
                if !(*q > 0.0 && *q <= 1.0) || magnitudes.is_empty() {
                    return Err(Error::InvalidArgument(format!(
                        "quantile {q} must lie in (0, 1]"
                    )));
                }
                let mut s = magnitudes.to_vec();
                s.par_sort_unstable_by(f64::total_cmp);
                let rank = ((q * s.len() as f64).ceil() as usize).clamp(1, s.len());
                s[rank - 1]
            }
            LevelPolicy::Series(v) => *v.get(index).ok_or_else(|| {
                Error::MissingInput(format!(
                    "level series has {} entries, snapshot {index} requested",
                    v.len()
                ))
            })?,
        };
        check_level("policy value", v)?;
        Ok(v)
    }
}

impl Default for LevelPolicy {
    fn default() -> Self {
        LevelPolicy::Quantile(DEFAULT_QUANTILE)
    }
}

/// Chebyshev check of `|B_U(t)| ≤ U⁻²‖u(t)‖²_{L²}` on every snapshot.
pub fn level_set_monitor(
    snapshots: &[(f64, Field)],
    u_policy: &LevelPolicy,
    g_policy: Option<&LevelPolicy>,
) -> Result<CriterionReport> {
    let rows = snapshots
        .par_iter()
        .enumerate()
        .map(|(i, (_, u))| {
            let ul = u_policy.resolve(i, &u.magnitude())?;
            let gl = match g_policy {
                Some(p) => Some(p.resolve(i, &u.gradient_magnitude())?),
                None => None,
            };
            level_set_measure(u, ul, gl)
        })
        .collect::<Result<Vec<_>>>()?;
    let times = snapshots.iter().map(|s| s.0).collect();
    let measured = rows.iter().map(|r| r.measure).collect();
    let bound = rows.iter().map(|r| r.chebyshev_bound).collect();
    let ratio = rows.iter().map(|r| r.measure / r.chebyshev_bound).collect();
    let mut rep = CriterionReport::new(
        "level_set",
        times,
        measured,
        bound,
        ratio,
        1.0,
        Sense::Certificate,
    )
    .with_series("U", rows.iter().map(|r| r.u_level).collect());
    if g_policy.is_some() {
        rep = rep
            .with_series(
                "G",
                rows.iter().map(|r| r.g_level.unwrap_or(f64::NAN)).collect(),
            )
            .with_series(
                "measure_UG",
                rows.iter()
                    .map(|r| r.measure_ug.unwrap_or(f64::NAN))
                    .collect(),
            )
            .with_series(
                "weak_l1_ratio",
                rows.iter()
                    .map(|r| r.weak_l1_ratio.unwrap_or(f64::NAN))
                    .collect(),
            );
    }
    Ok(rep)
}

/// Which field an integrability functional is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subject {
    Velocity,
    Pressure,
}

/// Worst-set smallness of `|u|³` (velocity) or `|p|^{3/2}` (pressure) on sets
/// of measure `δ`, against `(ν/2C_morrey)³` or `(ν/C)³` respectively.
pub fn uniform_integrability_monitor(
    snapshots: &[(f64, Field)],
    subject: Subject,
    delta: f64,
    constants: &Constants,
) -> Result<CriterionReport> {
    check_delta(delta)?;
    constants.validate()?;
    let (id, exponent, scale, c) = match subject {
        Subject::Velocity => ("uil3", 3.0, 2.0, constants.c_morrey),
        Subject::Pressure => ("unifint", 1.5, 1.0, constants.c_absolute),
    };
    let measured = snapshots
        .par_iter()
        .map(|(_, u)| match subject {
            Subject::Velocity => worst_set_integral(u.grid(), &u.magnitude(), exponent, delta),
            Subject::Pressure => {
                worst_set_integral(u.grid(), solve_pressure(u).physical(), exponent, delta)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let nu = first_grid(snapshots)?.nu();
    let bound = vec![(nu / (scale * c)).powi(3); measured.len()];
    let critical = measured.iter().map(|&m| nu / (scale * m.cbrt())).collect();
    Ok(CriterionReport::new(
        id,
        times_of(snapshots),
        measured,
        bound,
        critical,
        c,
        Sense::Smallness,
    )
    .with_param("delta", delta))
}

fn first_grid(snapshots: &[(f64, Field)]) -> Result<GridSpec> {
    snapshots
        .first()
        .map(|s| *s.1.grid())
        .ok_or_else(|| Error::MissingInput("empty trajectory".into()))
}

fn times_of(snapshots: &[(f64, Field)]) -> Vec<f64> {
    snapshots.iter().map(|s| s.0).collect()
}

// ---------------------------------------------------------------------------
// space-time integrability

/// `∫‖u‖^p_{L^q}dt` with `2/p + 3/q = 1`, or `∫‖p‖_{L^q}^{2q/(2q−3)}dt`
/// for the pressure. `measured` is the running integral.
pub fn lps_integral(
    snapshots: &[(f64, Field)],
    p: f64,
    q: f64,
    subject: Subject,
) -> Result<CriterionReport> {
    match subject {
        Subject::Velocity => {
            if !(q > 3.0) || (2.0 / p + 3.0 / q - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidExponents(format!(
                    "(p, q) = ({p}, {q}) needs 2/p + 3/q = 1 and q > 3"
                )));
            }
        }
        Subject::Pressure => {
            let want = 2.0 * q / (2.0 * q - 3.0);
            if !(q > 1.5) || (p - want).abs() > 1e-12 * want.abs().max(1.0) {
                return Err(Error::InvalidExponents(format!(
                    "pressure exponent {p} must equal 2q/(2q − 3) = {want} with q = {q} > 3/2"
                )));
            }
        }
    }
    let norms = snapshots
        .par_iter()
        .map(|(_, u)| match subject {
            Subject::Velocity => u.norm(NormKind::Lp(q)),
            Subject::Pressure => lp_norm(u.grid(), solve_pressure(u).physical(), q),
        })
        .collect::<Result<Vec<f64>>>()?;
    let times = times_of(snapshots);
    let f: Vec<f64> = norms.iter().map(|v| v.powf(p)).collect();
    let measured = cumulative_trapezoid(&times, &f);
    let total = measured.last().copied().unwrap_or(0.0);
    let n = times.len();
    let id = match subject {
        Subject::Velocity => "lps_velocity",
        Subject::Pressure => "lps_pressure",
    };
    Ok(CriterionReport::new(
        id,
        times,
        measured,
        vec![f64::NAN; n],
        vec![f64::NAN; n],
        f64::NAN,
        Sense::Certificate,
    )
    .with_param("p", p)
    .with_param("q", q)
    .with_param("M", total)
    .with_series("norm", norms))
}

// ---------------------------------------------------------------------------
// closed-form certificates

/// `y₀ exp(C ν^{−(q+3)/(q−3)} ∫‖u‖_{L^q}^{2q/(q−3)})`.
pub fn quanta_v_bound(y0: f64, nu: f64, q: f64, integral: f64, c: f64) -> f64 {
    y0 * (c * nu.powf(-(q + 3.0) / (q - 3.0)) * integral).exp()
}

/// `y₀ exp(C ν⁻³ M_V)`.
pub fn vcond_bound(y0: f64, nu: f64, m_v: f64, c: f64) -> f64 {
    y0 * (c * m_v / nu.powi(3)).exp()
}

/// `y₀ exp(C N/ν)`.
pub fn grad_l3_bound(y0: f64, nu: f64, n: f64, c: f64) -> f64 {
    y0 * (c * n / nu).exp()
}

/// `y₀ exp(C M/ν)`.
pub fn lambda32_bound(y0: f64, nu: f64, m: f64, c: f64) -> f64 {
    y0 * (c * m / nu).exp()
}

/// `‖Λ^{1/2}u₀‖ + C M`; viscosity independent.
pub fn half_derivative_bound(h0: f64, m: f64, c: f64) -> f64 {
    h0 + c * m
}

/// The two branches `y₀ exp(C t‖u₀‖²/(δν))` and `y₀ + 2C‖u₀‖⁴/(δν²)`.
pub fn foias_branches(y0: f64, l2_sq0: f64, nu: f64, delta: f64, t: f64, c: f64) -> (f64, f64) {
    (
        y0 * (c * t * l2_sq0 / (delta * nu)).exp(),
        y0 + 2.0 * c * l2_sq0 * l2_sq0 / (delta * nu * nu),
    )
}

pub fn foias_bound(y0: f64, l2_sq0: f64, nu: f64, delta: f64, t: f64, c: f64) -> f64 {
    let (a, b) = foias_branches(y0, l2_sq0, nu, delta, t, c);
    a.min(b)
}

/// Time after which the time-independent branch is the smaller one:
/// `δν/(C‖u₀‖²) log(1 + 2C‖u₀‖⁴/(δν²y₀))`.
pub fn foias_crossover(y0: f64, l2_sq0: f64, nu: f64, delta: f64, c: f64) -> f64 {
    delta * nu / (c * l2_sq0) * (2.0 * c * l2_sq0 * l2_sq0 / (delta * nu * nu * y0)).ln_1p()
}

/// `‖u₀‖_{L^r} exp(C t‖u₀‖²_{L²}/(νδ))`.
pub fn pressure_lr_bound(lr0: f64, l2_sq0: f64, nu: f64, delta: f64, t: f64, c: f64) -> f64 {
    lr0 * (c * t * l2_sq0 / (nu * delta)).exp()
}

/// `‖u₀‖_{L^q} exp(C t‖u₀‖²/(νδ) + ν^{−3/2}‖u₀‖²Γ)`.
pub fn s2_lq_bound(lq0: f64, l2_sq0: f64, nu: f64, delta: f64, t: f64, gamma: f64, c: f64) -> f64 {
    lq0 * (c * t * l2_sq0 / (nu * delta) + l2_sq0 * gamma / nu.powf(1.5)).exp()
}

/// `‖u₀‖_{L^q} exp(Cν⁻¹∫U² + C∫G + Cν^{−3/2}‖u₀‖²Γ)`.
pub fn region_lq_bound(
    lq0: f64,
    l2_sq0: f64,
    nu: f64,
    int_u2: f64,
    int_g: f64,
    gamma: f64,
    c: f64,
) -> f64 {
    lq0 * (c * (int_u2 / nu + int_g + l2_sq0 * gamma / nu.powf(1.5))).exp()
}

/// Smallest `C ≥ 0` with `m ≤ base·exp(C a + b)`.
fn required_exponential(m: f64, base: f64, a: f64, b: f64) -> f64 {
    if m <= base * b.exp() {
        0.0
    } else if a > 0.0 {
        ((m / base).ln() - b) / a
    } else {
        f64::INFINITY
    }
}

/// Smallest `C ≥ 0` with `m ≤ base + C a`.
fn required_additive(m: f64, base: f64, a: f64) -> f64 {
    if m <= base {
        0.0
    } else if a > 0.0 {
        (m - base) / a
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CertificateKind {
    /// Enstrophy from `∫‖u‖_{L^q}^{2q/(q−3)}`, `q > 3`.
    QuantaV { q: f64 },
    /// Enstrophy from `∫‖u‖⁴_V`.
    Vcond,
    /// Enstrophy under worst-set smallness of `|u|³` at measure `δ`.
    Foias { delta: f64 },
    /// Enstrophy from `N = ∫‖∇u‖²_{L³}`.
    GradL3,
    /// Enstrophy from `M = ∫‖Λ^{3/2}u‖²_{L²}`.
    Lambda32,
    /// `‖Λ^{1/2}u‖_{L²}` from the same `M`.
    HalfDerivative,
    /// `‖u‖_{L^r}` under worst-set smallness of `|p|^{3/2}`, `r ≥ 4`.
    PressureLr { r: f64, delta: f64 },
    /// `‖u‖_{L^q}` under the `S₂` condition with cutoff `r(t)`, `q ≥ 4`.
    S2Lq { q: f64, delta: f64 },
    /// `‖u‖_{L^q}` under the increment condition on `B(t)`, `q ≥ 4`.
    RegionLq { q: f64 },
}

impl CertificateKind {
    pub fn id(&self) -> &'static str {
        match self {
            CertificateKind::QuantaV { .. } => "quantaV",
            CertificateKind::Vcond => "vcond",
            CertificateKind::Foias { .. } => "foias",
            CertificateKind::GradL3 => "gradL3",
            CertificateKind::Lambda32 => "lambda32",
            CertificateKind::HalfDerivative => "half_derivative",
            CertificateKind::PressureLr { .. } => "pressure_lr",
            CertificateKind::S2Lq { .. } => "s2_lq",
            CertificateKind::RegionLq { .. } => "region_lq",
        }
    }
}

/// Trajectory data a certificate draws on. Optional series are indexed like
/// `samples`.
#[derive(Debug, Clone, Copy)]
pub struct CertificateInputs<'a> {
    pub nu: f64,
    pub samples: &'a [NormSample],
    pub radius: Option<&'a [f64]>,
    pub u_level: Option<&'a [f64]>,
    pub g_level: Option<&'a [f64]>,
}

impl<'a> CertificateInputs<'a> {
    pub fn new(nu: f64, samples: &'a [NormSample]) -> Self {
        Self {
            nu,
            samples,
            radius: None,
            u_level: None,
            g_level: None,
        }
    }

    fn series(&self, name: &str, s: Option<&'a [f64]>) -> Result<&'a [f64]> {
        let s = s.ok_or_else(|| Error::MissingInput(format!("{name}(t)")))?;
        if s.len() != self.samples.len() {
            return Err(Error::DimensionMismatch {
                expected: self.samples.len(),
                found: s.len(),
            });
        }
        Ok(s)
    }

    fn lq(&self, q: f64) -> Result<Vec<f64>> {
        self.samples
            .iter()
            .map(|s| {
                s.lq(q)
                    .ok_or_else(|| Error::MissingInput(format!("‖u‖_{{L^{q}}} samples")))
            })
            .collect()
    }
}

/// `Γ(t) = (∫₀ᵗ r⁻⁴ds)^{1/2}` on the sample times.
pub fn gamma_series(times: &[f64], radius: &[f64]) -> Vec<f64> {
    let f: Vec<f64> = radius.iter().map(|r| r.powi(-4)).collect();
    cumulative_trapezoid(times, &f)
        .into_iter()
        .map(f64::sqrt)
        .collect()
}

enum Form {
    /// `base·exp(C a + b)`.
    Exp { base: f64, a: Vec<f64>, b: Vec<f64> },
    /// `base + C a`.
    Add { base: f64, a: Vec<f64> },
}

pub fn certificate(
    kind: CertificateKind,
    inputs: &CertificateInputs,
    constants: &Constants,
) -> Result<CriterionReport> {
    constants.validate()?;
    let s = inputs.samples;
    let nu = inputs.nu;
    if s.is_empty() {
        return Err(Error::MissingInput("norm samples".into()));
    }
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "viscosity {nu} must be positive"
        )));
    }
    let times: Vec<f64> = s.iter().map(|x| x.t).collect();
    let elapsed: Vec<f64> = times.iter().map(|t| t - times[0]).collect();
    let enstrophy: Vec<f64> = s.iter().map(|x| x.enstrophy).collect();
    let y0 = enstrophy[0];
    let l2 = s[0].l2_sq;
    let cum = |f: &dyn Fn(&NormSample) -> f64| {
        cumulative_trapezoid(&times, &s.iter().map(f).collect::<Vec<_>>())
    };
    let zeros = vec![0.0; s.len()];
    let mut params = BTreeMap::new();
    let mut c = constants.c_absolute;

    let (measured, form) = match kind {
        CertificateKind::QuantaV { q } => {
            if !(q > 3.0) {
                return Err(Error::InvalidExponents(format!("q = {q} must exceed 3")));
            }
            let lq = inputs.lq(q)?;
            let e = 2.0 * q / (q - 3.0);
            let f: Vec<f64> = lq.iter().map(|v| v.powf(e)).collect();
            let scale = nu.powf(-(q + 3.0) / (q - 3.0));
            let a = cumulative_trapezoid(&times, &f)
                .into_iter()
                .map(|i| scale * i)
                .collect();
            params.insert("q".into(), q);
            (
                enstrophy,
                Form::Exp {
                    base: y0,
                    a,
                    b: zeros,
                },
            )
        }
        CertificateKind::Vcond => {
            let a = cum(&|x| x.enstrophy * x.enstrophy)
                .into_iter()
                .map(|m| m / nu.powi(3))
                .collect();
            (
                enstrophy,
                Form::Exp {
                    base: y0,
                    a,
                    b: zeros,
                },
            )
        }
        CertificateKind::GradL3 => {
            let a = cum(&|x| x.grad_l3 * x.grad_l3)
                .into_iter()
                .map(|n| n / nu)
                .collect();
            (
                enstrophy,
                Form::Exp {
                    base: y0,
                    a,
                    b: zeros,
                },
            )
        }
        CertificateKind::Lambda32 => {
            let a = cum(&|x| x.lambda32_sq)
                .into_iter()
                .map(|m| m / nu)
                .collect();
            (
                enstrophy,
                Form::Exp {
                    base: y0,
                    a,
                    b: zeros,
                },
            )
        }
        CertificateKind::HalfDerivative => {
            let measured: Vec<f64> = s.iter().map(|x| x.lambda12).collect();
            let base = measured[0];
            (
                measured,
                Form::Add {
                    base,
                    a: cum(&|x| x.lambda32_sq),
                },
            )
        }
        CertificateKind::Foias { delta } => {
            check_delta(delta)?;
            let mut bound = Vec::with_capacity(s.len());
            let mut required = Vec::with_capacity(s.len());
            let add = 2.0 * l2 * l2 / (delta * nu * nu);
            for (i, &m) in enstrophy.iter().enumerate() {
                bound.push(foias_bound(y0, l2, nu, delta, elapsed[i], c));
                let r_exp = required_exponential(m, y0, elapsed[i] * l2 / (delta * nu), 0.0);
                required.push(r_exp.max(required_additive(m, y0, add)));
            }
            let rep = CriterionReport::new(
                kind.id(),
                times,
                enstrophy,
                bound,
                required,
                c,
                Sense::Certificate,
            )
            .with_param("delta", delta)
            .with_param("crossover_time", foias_crossover(y0, l2, nu, delta, c));
            return Ok(rep);
        }
        CertificateKind::PressureLr { r, delta } => {
            if !(r >= 4.0) {
                return Err(Error::InvalidExponents(format!(
                    "L^r exponent {r} must be at least 4"
                )));
            }
            check_delta(delta)?;
            c = constants.for_q(r);
            let measured = inputs.lq(r)?;
            let a = elapsed.iter().map(|t| t * l2 / (nu * delta)).collect();
            params.insert("r".into(), r);
            params.insert("delta".into(), delta);
            (
                measured.clone(),
                Form::Exp {
                    base: measured[0],
                    a,
                    b: zeros,
                },
            )
        }
        CertificateKind::S2Lq { q, delta } => {
            if !(q >= 4.0) {
                return Err(Error::InvalidExponents(format!(
                    "L^q exponent {q} must be at least 4"
                )));
            }
            check_delta(delta)?;
            c = constants.for_q(q);
            let radius = inputs.series("r", inputs.radius)?;
            let measured = inputs.lq(q)?;
            let gamma = gamma_series(&times, radius);
            let a = elapsed.iter().map(|t| t * l2 / (nu * delta)).collect();
            let b = gamma.iter().map(|g| l2 * g / nu.powf(1.5)).collect();
            params.insert("q".into(), q);
            params.insert("delta".into(), delta);
            params.insert("Gamma".into(), *gamma.last().unwrap_or(&0.0));
            (
                measured.clone(),
                Form::Exp {
                    base: measured[0],
                    a,
                    b,
                },
            )
        }
        CertificateKind::RegionLq { q } => {
            if !(q >= 4.0) {
                return Err(Error::InvalidExponents(format!(
                    "L^q exponent {q} must be at least 4"
                )));
            }
            c = constants.for_q(q);
            let radius = inputs.series("r", inputs.radius)?;
            let ul = inputs.series("U", inputs.u_level)?;
            let gl = inputs.series("G", inputs.g_level)?;
            let measured = inputs.lq(q)?;
            let gamma = gamma_series(&times, radius);
            let iu = cumulative_trapezoid(&times, &ul.iter().map(|u| u * u).collect::<Vec<_>>());
            let ig = cumulative_trapezoid(&times, gl);
            let a = (0..s.len())
                .map(|i| iu[i] / nu + ig[i] + l2 * gamma[i] / nu.powf(1.5))
                .collect();
            params.insert("q".into(), q);
            (
                measured.clone(),
                Form::Exp {
                    base: measured[0],
                    a,
                    b: zeros,
                },
            )
        }
    };

    let (bound, required): (Vec<f64>, Vec<f64>) = match &form {
        Form::Exp { base, a, b } => measured
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                (
                    base * (c * a[i] + b[i]).exp(),
                    required_exponential(m, *base, a[i], b[i]),
                )
            })
            .unzip(),
        Form::Add { base, a } => measured
            .iter()
            .enumerate()
            .map(|(i, &m)| (base + c * a[i], required_additive(m, *base, a[i])))
            .unzip(),
    };
    let mut rep = CriterionReport::new(
        kind.id(),
        times,
        measured,
        bound,
        required,
        c,
        Sense::Certificate,
    );
    rep.params = params;
    Ok(rep)
}

// ---------------------------------------------------------------------------
// structure-function conditions

/// `η = (ν³/ε)^{1/4}`.
pub fn kolmogorov_eta(nu: f64, eps: f64) -> Result<f64> {
    if !(nu > 0.0 && eps > 0.0 && nu.is_finite() && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "η needs ν > 0 and ε > 0 (ν = {nu}, ε = {eps})"
        )));
    }
    Ok((nu.powi(3) / eps).powf(0.25))
}

/// `∫η⁻⁴dt` against `ν⁻³∫ε dt` and the energy bound `ν⁻³⟨|u₀|²⟩/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KolmogorovBudget {
    pub eta_integral: f64,
    pub dissipation_integral: f64,
    pub energy_bound: f64,
    /// `ν⁻³(e(0) − e(T))` with `e` the mean kinetic energy density.
    pub energy_drop: f64,
}

pub fn kolmogorov_budget(stats: &[FlowStats], nu: f64, volume: f64) -> Result<KolmogorovBudget> {
    let (first, last) = match (stats.first(), stats.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::MissingInput("flow statistics".into())),
    };
    let times: Vec<f64> = stats.iter().map(|s| s.t).collect();
    let inv4 = stats
        .iter()
        .map(|s| kolmogorov_eta(nu, s.dissipation).map(|e| e.powi(-4)))
        .collect::<Result<Vec<_>>>()?;
    let eps: Vec<f64> = stats.iter().map(|s| s.dissipation).collect();
    let nu3 = nu.powi(3);
    Ok(KolmogorovBudget {
        eta_integral: *cumulative_trapezoid(&times, &inv4).last().unwrap(),
        dissipation_integral: cumulative_trapezoid(&times, &eps).last().unwrap() / nu3,
        energy_bound: first.energy / volume / nu3,
        energy_drop: (first.energy - last.energy) / volume / nu3,
    })
}

/// Cutoff radius `r(t)` of the structure-function conditions.
#[derive(Debug, Clone, PartialEq)]
pub enum RadiusPolicy {
    Fixed(f64),
    /// `r = η` from the instantaneous mean dissipation.
    Kolmogorov,
    /// One radius per snapshot.
    Custom(Vec<f64>),
}

impl RadiusPolicy {
    pub fn resolve(&self, index: usize, u: &Field) -> Result<f64> {
        match self {
            RadiusPolicy::Fixed(r) => Ok(*r),
            RadiusPolicy::Kolmogorov => kolmogorov_eta(u.grid().nu(), dissipation_rate(u)?),
            RadiusPolicy::Custom(v) => v.get(index).copied().ok_or_else(|| {
                Error::MissingInput(format!(
                    "radius series has {} entries, snapshot {index} requested",
                    v.len()
                ))
            }),
        }
    }
}

fn check_cutoff(grid: &GridSpec, r: f64, fraction: f64) -> Result<()> {
    let limit = grid.domain_length() * fraction;
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "radius {r} must be positive"
        )));
    }
    if !(r < limit) {
        return Err(Error::RadiusTooLarge { r, limit });
    }
    Ok(())
}

/// Worst-set smallness of `S₂(·, 2r(t))^{3/2}` at measure `δ` against
/// `(ν/C)³`, with `∫r⁻⁴dt` reported.
pub fn s2cond_monitor(
    snapshots: &[(f64, Field)],
    policy: &RadiusPolicy,
    delta: f64,
    constants: &Constants,
) -> Result<CriterionReport> {
    check_delta(delta)?;
    constants.validate()?;
    let grid = first_grid(snapshots)?;
    let rows = snapshots
        .par_iter()
        .enumerate()
        .map(|(i, (_, u))| {
            let r = policy.resolve(i, u)?;
            check_cutoff(u.grid(), r, 0.125)?;
            let s2 = IncrementField::new(u).cumulative_s2_unchecked(2.0 * r);
            Ok((r, worst_set_integral(u.grid(), &s2, 1.5, delta)?))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let times = times_of(snapshots);
    let radius: Vec<f64> = rows.iter().map(|x| x.0).collect();
    let measured: Vec<f64> = rows.iter().map(|x| x.1).collect();
    let c = constants.c_absolute;
    let nu = grid.nu();
    let bound = vec![(nu / c).powi(3); measured.len()];
    let critical = measured.iter().map(|&m| nu / m.cbrt()).collect();
    let r4 = cumulative_trapezoid(
        &times,
        &radius.iter().map(|r| r.powi(-4)).collect::<Vec<_>>(),
    );
    Ok(CriterionReport::new(
        "s2cond",
        times,
        measured,
        bound,
        critical,
        c,
        Sense::Smallness,
    )
    .with_param("delta", delta)
    .with_param("r_inv4_integral", *r4.last().unwrap())
    .with_series("r", radius))
}

/// `B = {|u| ≥ U and |∇u| ≥ G}`.
pub fn region_mask(u: &Field, u_level: f64, g_level: f64) -> Vec<bool> {
    let mag = u.magnitude();
    let grad = u.gradient_magnitude();
    mag.iter()
        .zip(&grad)
        .map(|(&m, &g)| m >= u_level && g >= g_level)
        .collect()
}

/// `∫_{|y| ≤ r} (∫_B |δ_y u|³dx)^{2/3} dy/|y|³` by log-radial Gauss–Legendre
/// times the sphere rule; increments at off-grid offsets are spectral.
pub fn region_increment_integral(
    u: &Field,
    mask: &[bool],
    r: f64,
    quad: &SphereQuadrature,
    n_rad: usize,
) -> Result<f64> {
    let g = *u.grid();
    if mask.len() != g.len() {
        return Err(Error::DimensionMismatch {
            expected: g.len(),
            found: mask.len(),
        });
    }
    check_cutoff(&g, r, 0.25)?;
    if !mask.iter().any(|&b| b) {
        return Ok(0.0);
    }
    let radial = RadialGrid::new(r, n_rad)?;
    let cells: Vec<usize> = (0..g.len()).filter(|&i| mask[i]).collect();
    let ph = u.physical();
    let offsets: Vec<(f64, usize)> = radial
        .nodes()
        .iter()
        .filter(|n| n.panel != Panel::Outer)
        .flat_map(|n| (0..quad.len()).map(move |j| (n.rho, j)))
        .collect();
    let inner: Vec<f64> = offsets
        .par_iter()
        .map(|&(rho, j)| {
            let xi = quad.nodes()[j];
            let shifted = u.shifted_samples([rho * xi[0], rho * xi[1], rho * xi[2]]);
            let s = tree_sum_by(0..cells.len(), &|m| {
                let i = cells[m];
                let d: f64 = (0..3).map(|c| (shifted[c][i] - ph[c][i]).powi(2)).sum();
                d.powf(1.5)
            });
            (s * g.cell_volume()).powf(2.0 / 3.0)
        })
        .collect();
    let mut total = 0.0;
    let mut k = 0;
    for n in radial.nodes().iter().filter(|n| n.panel != Panel::Outer) {
        let mut surface = 0.0;
        for j in 0..quad.len() {
            surface += quad.weights()[j] * inner[k];
            k += 1;
        }
        total += n.weight * surface;
    }
    Ok(total)
}

/// The increment condition on `B(t)` against `(ν/C)²` at every snapshot.
#[allow(clippy::too_many_arguments)]
pub fn region_increment_check(
    snapshots: &[(f64, Field)],
    u_policy: &LevelPolicy,
    g_policy: &LevelPolicy,
    radius: &RadiusPolicy,
    quad: &SphereQuadrature,
    n_rad: usize,
    constants: &Constants,
) -> Result<CriterionReport> {
    constants.validate()?;
    let grid = first_grid(snapshots)?;
    let mut rows = Vec::with_capacity(snapshots.len());
    for (i, (_, u)) in snapshots.iter().enumerate() {
        let ul = u_policy.resolve(i, &u.magnitude())?;
        let gl = g_policy.resolve(i, &u.gradient_magnitude())?;
        let r = radius.resolve(i, u)?;
        let mask = region_mask(u, ul, gl);
        let measure = mask.iter().filter(|&&b| b).count() as f64 * grid.cell_volume();
        rows.push((
            ul,
            gl,
            r,
            measure,
            region_increment_integral(u, &mask, r, quad, n_rad)?,
        ));
    }
    let c = constants.c_absolute;
    let nu = grid.nu();
    let measured: Vec<f64> = rows.iter().map(|x| x.4).collect();
    let bound = vec![(nu / c).powi(2); rows.len()];
    let critical = measured.iter().map(|&m| nu / m.sqrt()).collect();
    Ok(CriterionReport::new(
        "region_increment",
        times_of(snapshots),
        measured,
        bound,
        critical,
        c,
        Sense::Smallness,
    )
    .with_series("U", rows.iter().map(|x| x.0).collect())
    .with_series("G", rows.iter().map(|x| x.1).collect())
    .with_series("r", rows.iter().map(|x| x.2).collect())
    .with_series("measure_B", rows.iter().map(|x| x.3).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Generator;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> GridSpec {
        GridSpec::periodic(n, 0.1).unwrap()
    }

    fn random(n: usize, seed: u64) -> Field {
        Generator::RandomDivfree {
            slope: -5.0 / 3.0,
            k_min: 1.0,
            k_max: 3.0,
            rms: 1.0,
            seed,
        }
        .generate(grid(n))
        .unwrap()
    }

    /// Supremum over fractional level sets `{v > τ} ∪ (part of {v = τ})`,
    /// each candidate threshold evaluated from scratch.
    fn threshold_oracle(g: &GridSpec, v: &[f64], e: f64, delta: f64) -> f64 {
        let dv = g.cell_volume();
        let w: Vec<f64> = v.iter().map(|x| x.abs().powf(e)).collect();
        let budget = delta.min(g.volume());
        let mut best = 0.0f64;
        for &tau in &w {
            let above = w.iter().filter(|&&x| x > tau).count() as f64 * dv;
            let at = w.iter().filter(|&&x| x == tau).count() as f64 * dv;
            if above <= budget {
                let s: f64 = w.iter().filter(|&&x| x > tau).sum::<f64>() * dv;
                best = best.max(s + (budget - above).min(at) * tau);
            }
        }
        best
    }

    #[test]
    fn constants_defaults() {
        let c = Constants::default();
        c.validate().unwrap();
        assert_eq!(c.c_absolute, 1.0);
        assert_eq!(c.for_q(6.0), 1.0);
        let c = Constants {
            c_q: vec![(6.0, 2.5)],
            ..Default::default()
        };
        assert_eq!(c.for_q(6.0), 2.5);
        assert!(Constants {
            c_absolute: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn worst_set_of_constant_field() {
        let g = grid(8);
        let ones = vec![1.0; g.len()];
        for delta in [0.01, 1.0, 7.3, g.volume()] {
            let v = worst_set_integral(&g, &ones, 3.0, delta).unwrap();
            assert!((v - delta).abs() <= 1e-12 * delta);
        }
        assert!(worst_set_integral(&g, &ones, 3.0, 0.0).is_err());
        assert!(worst_set_integral(&g, &ones, 3.0, -1.0).is_err());
        let all = worst_set_integral(&g, &ones, 3.0, 1e6).unwrap();
        assert!((all - g.volume()).abs() <= 1e-12 * all);
    }

    #[test]
    fn worst_set_of_two_level_field() {
        let g = grid(8);
        let (a, b) = (2.0, 0.5);
        let v: Vec<f64> = (0..g.len())
            .map(|i| if i % 5 == 0 { a } else { b })
            .collect();
        let va = v.iter().filter(|&&x| x == a).count() as f64 * g.cell_volume();
        let delta = 0.7 * va;
        let got = worst_set_integral(&g, &v, 3.0, delta).unwrap();
        assert!((got - delta * a * a * a).abs() <= 1e-12 * got);
    }

    #[test]
    fn worst_set_matches_threshold_oracle() {
        let g = grid(8);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-2.0..2.0)).collect();
        for delta in [0.3, 5.0, 40.0, 200.0] {
            let got = worst_set_integral(&g, &v, 1.5, delta).unwrap();
            let want = threshold_oracle(&g, &v, 1.5, delta);
            assert!((got - want).abs() <= 1e-12 * want, "{got} {want}");
        }
    }

    #[test]
    fn admissible_delta_inverts_worst_set() {
        let g = grid(8);
        let u = random(8, 3);
        let mag = u.magnitude();
        let total = worst_set_integral(&g, &mag, 3.0, g.volume()).unwrap();
        for frac in [0.01, 0.3, 0.9] {
            let d = admissible_delta(&g, &mag, 3.0, frac * total).unwrap();
            let back = worst_set_integral(&g, &mag, 3.0, d).unwrap();
            assert!((back - frac * total).abs() <= 1e-10 * total);
        }
        assert_eq!(
            admissible_delta(&g, &mag, 3.0, 2.0 * total).unwrap(),
            g.volume()
        );
    }

    #[test]
    fn level_set_of_unit_field() {
        let g = grid(8);
        let u = Field::from_fn(g, |_| [1.0, 0.0, 0.0]);
        let m = level_set_measure(&u, 2.0, None).unwrap();
        assert_eq!(m.measure, 0.0);
        assert!((m.chebyshev_bound - g.volume() / 4.0).abs() <= 1e-12 * g.volume());
        assert!(m.chebyshev_holds());
    }

    #[test]
    fn chebyshev_equality_for_indicator_field() {
        let g = grid(8);
        let u = Field::from_physical(
            g,
            [
                (0..g.len())
                    .map(|i| if i % 3 == 0 { 1.0 } else { 0.0 })
                    .collect(),
                vec![0.0; g.len()],
                vec![0.0; g.len()],
            ],
        )
        .unwrap();
        let m = level_set_measure(&u, 1.0, None).unwrap();
        assert!(m.chebyshev_holds());
        assert!((m.measure - m.chebyshev_bound).abs() <= 1e-12 * m.measure);
    }

    #[test]
    fn region_of_both_levels_is_inside_velocity_region() {
        let u = random(16, 4);
        let m = level_set_measure(&u, 0.8, Some(1.5)).unwrap();
        assert!(m.measure_ug.unwrap() <= m.measure);
        assert!(m.measure_ug.unwrap() <= m.gradient_measure.unwrap());
        assert!(m.weak_l1_ratio.unwrap() > 0.0);
        assert!(m.chebyshev_holds());
    }

    #[test]
    fn quantile_policy() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(LevelPolicy::Quantile(0.99).resolve(0, &v).unwrap(), 99.0);
        assert_eq!(LevelPolicy::Quantile(1.0).resolve(0, &v).unwrap(), 100.0);
        assert_eq!(
            LevelPolicy::Series(vec![3.0, 4.0]).resolve(1, &v).unwrap(),
            4.0
        );
        assert!(LevelPolicy::Series(vec![3.0]).resolve(1, &v).is_err());
        assert!(LevelPolicy::Constant(0.0).resolve(0, &v).is_err());
    }

    fn samples(values: &[(f64, f64)]) -> Vec<NormSample> {
        values
            .iter()
            .map(|&(t, y)| NormSample {
                t,
                l2_sq: 2.0,
                enstrophy: y,
                lq: vec![(6.0, 1.5)],
                grad_l3: 1.0,
                lambda12: 1.0,
                lambda32_sq: 1.0,
                dissipation: 0.1,
            })
            .collect()
    }

    #[test]
    fn quanta_v_with_zero_integral_is_initial_enstrophy() {
        assert_eq!(quanta_v_bound(3.7, 0.1, 6.0, 0.0, 1.0), 3.7);
        let s = samples(&[(0.0, 3.7)]);
        let rep = certificate(
            CertificateKind::QuantaV { q: 6.0 },
            &CertificateInputs::new(0.1, &s),
            &Constants::default(),
        )
        .unwrap();
        assert_eq!(rep.bound, vec![3.7]);
        assert!(rep.passed());
        assert_eq!(rep.required_c, vec![0.0]);
    }

    #[test]
    fn grad_l3_factor_e() {
        assert!((grad_l3_bound(1.0, 1.0, 1.0, 1.0) - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn quanta_v_rejects_q_at_most_three() {
        let s = samples(&[(0.0, 1.0)]);
        let inputs = CertificateInputs::new(0.1, &s);
        for q in [3.0, 2.0] {
            assert!(matches!(
                certificate(
                    CertificateKind::QuantaV { q },
                    &inputs,
                    &Constants::default()
                ),
                Err(Error::InvalidExponents(_))
            ));
        }
        assert!(matches!(
            certificate(
                CertificateKind::QuantaV { q: 8.0 },
                &inputs,
                &Constants::default()
            ),
            Err(Error::MissingInput(_))
        ));
        assert!(matches!(
            certificate(
                CertificateKind::S2Lq { q: 6.0, delta: 1.0 },
                &inputs,
                &Constants::default()
            ),
            Err(Error::MissingInput(_))
        ));
    }

    #[test]
    fn foias_crossover_is_where_branches_meet() {
        let (y0, l2, nu, delta) = (2.0, 3.0, 0.1, 0.5);
        let t_star = foias_crossover(y0, l2, nu, delta, 1.0);
        // bisection on the branch difference
        let diff = |t: f64| {
            let (a, b) = foias_branches(y0, l2, nu, delta, t, 1.0);
            a - b
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        while diff(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if diff(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((t_star - lo).abs() <= 1e-12 * t_star, "{t_star} {lo}");
        // the closed form of the remark
        let remark = delta * nu / l2 * (1.0 + 2.0 * l2 * l2 / (delta * nu * nu * y0)).ln();
        assert!((t_star - remark).abs() <= 1e-14 * remark);
    }

    #[test]
    fn required_constant_reproduces_measurement() {
        let s = samples(&[(0.0, 1.0), (0.5, 1.2), (1.0, 1.1)]);
        let inputs = CertificateInputs::new(0.5, &s);
        let rep = certificate(CertificateKind::GradL3, &inputs, &Constants::default()).unwrap();
        for i in 1..3 {
            let c = rep.required_c[i];
            let b = grad_l3_bound(1.0, 0.5, s[i].t, c);
            assert!((b - s[i].enstrophy).abs() <= 1e-12);
        }
        let tight = Constants {
            c_absolute: 0.5 * rep.max_required_c(),
            ..Default::default()
        };
        let rep = certificate(CertificateKind::GradL3, &inputs, &tight).unwrap();
        assert!(!rep.passed());
        assert!(rep
            .note
            .as_deref()
            .unwrap()
            .starts_with("constant too small"));
    }

    #[test]
    fn kolmogorov_scale() {
        let eta = kolmogorov_eta(0.1, 0.1).unwrap();
        assert!((eta - 0.1f64.sqrt()).abs() < 1e-15);
        assert!(kolmogorov_eta(0.1, 0.0).is_err());
    }

    #[test]
    fn fixed_radius_integral_and_constant_field() {
        let g = grid(16);
        let u = Field::from_fn(g, |_| [0.3, -0.2, 0.1]);
        let snaps: Vec<(f64, Field)> = (0..5).map(|i| (0.25 * i as f64, u.clone())).collect();
        let r = 0.2;
        for delta in [0.01, 1.0, g.volume()] {
            let rep = s2cond_monitor(
                &snaps,
                &RadiusPolicy::Fixed(r),
                delta,
                &Constants::default(),
            )
            .unwrap();
            assert!(rep.passed());
            assert!(rep.measured.iter().all(|&m| m.abs() < 1e-20));
            let want = 1.0 * r.powi(-4);
            assert!((rep.params["r_inv4_integral"] - want).abs() <= 1e-12 * want);
        }
        let too_big = RadiusPolicy::Fixed(g.domain_length() / 8.0);
        assert!(matches!(
            s2cond_monitor(&snaps, &too_big, 1.0, &Constants::default()),
            Err(Error::RadiusTooLarge { .. })
        ));
    }

    #[test]
    fn lps_exponents() {
        let u = random(8, 1);
        let snaps: Vec<(f64, Field)> = (0..4).map(|i| (0.5 * i as f64, u.clone())).collect();
        let rep = lps_integral(&snaps, 4.0, 6.0, Subject::Velocity).unwrap();
        let want = 1.5 * u.norm(NormKind::Lp(6.0)).unwrap().powi(4);
        assert!((rep.params["M"] - want).abs() <= 1e-12 * want);
        assert!(rep.passed());
        assert!(matches!(
            lps_integral(&snaps, 4.0, 5.0, Subject::Velocity),
            Err(Error::InvalidExponents(_))
        ));
        assert!(matches!(
            lps_integral(&snaps, 2.0, 3.0, Subject::Velocity),
            Err(Error::InvalidExponents(_))
        ));
        let q = 3.0;
        let p = 2.0 * q / (2.0 * q - 3.0);
        let rep = lps_integral(&snaps, p, q, Subject::Pressure).unwrap();
        let pn = lp_norm(u.grid(), solve_pressure(&u).physical(), q).unwrap();
        assert!((rep.params["M"] - 1.5 * pn.powf(p)).abs() <= 1e-12 * rep.params["M"]);
        assert!(lps_integral(&snaps, 3.0, 3.0, Subject::Pressure).is_err());
        assert!(lps_integral(&snaps, 1.0, 1.5, Subject::Pressure).is_err());
    }

    #[test]
    fn region_integral_vanishes_on_empty_set_and_constant_field() {
        let u = random(8, 2);
        let quad = SphereQuadrature::new(4, 8).unwrap();
        let none = vec![false; u.grid().len()];
        assert_eq!(
            region_increment_integral(&u, &none, 0.3, &quad, 6).unwrap(),
            0.0
        );
        let c = Field::from_fn(*u.grid(), |_| [1.0, 2.0, 3.0]);
        let all = vec![true; u.grid().len()];
        assert!(region_increment_integral(&c, &all, 0.3, &quad, 6).unwrap() < 1e-20);
    }

    #[test]
    fn report_table_layout() {
        let s = samples(&[(0.0, 1.0), (1.0, 0.9)]);
        let rep = certificate(
            CertificateKind::Vcond,
            &CertificateInputs::new(0.1, &s),
            &Constants::default(),
        )
        .unwrap();
        let csv = rep.table().to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), REPORT_HEADER);
        assert_eq!(lines.count(), 2);
        assert!(csv.trim_end().ends_with("true"));
    }
}
