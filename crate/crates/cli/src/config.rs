//! Run configuration.
//!
//! Grammar: UTF-8 text, one `section.key = value` per line, `#` starts a
//! comment, blank lines are ignored. Keys may appear once. Lists are
//! comma-separated; probe points are `x y z` triples separated by `;`.
//! Unknown keys are rejected so that typos cannot silently fall back to
//! defaults.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use nsrl_core::criteria::{Constants, LevelPolicy, RadiusPolicy};
use nsrl_core::pressure::LocalQuadrature;
use nsrl_core::solver::{Integrator, SolverConfig};
use nsrl_core::GridSpec;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    Generator {
        kind: String,
        params: BTreeMap<String, f64>,
        seed: u64,
    },
    Snapshot(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Probes {
    Points(Vec<[f64; 3]>),
    Random { count: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureConfig {
    pub r: f64,
    pub n_theta: usize,
    pub n_phi: usize,
    pub n_rad: usize,
    pub n_beta: usize,
    /// Number of quadrature doublings after the base level.
    pub refine: usize,
}

impl PressureConfig {
    pub fn quadrature(&self) -> Result<LocalQuadrature, CliError> {
        Ok(LocalQuadrature::new(
            self.n_theta,
            self.n_phi,
            self.n_rad,
            self.n_beta,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureConfig {
    pub radii: Vec<f64>,
    pub ells: Vec<f64>,
    pub orders: Vec<u32>,
    /// Fit window; the default is `[4Δx, L/8]`.
    pub fit_range: Option<(f64, f64)>,
    pub beta_q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriteriaConfig {
    pub list: Vec<String>,
    pub q: f64,
    /// Worst-set measure; derived from the run when absent.
    pub delta: Option<f64>,
    pub constants: Constants,
    pub u_level: LevelPolicy,
    pub g_level: LevelPolicy,
    pub radius: RadiusPolicy,
    pub n_theta: usize,
    pub n_phi: usize,
    pub n_rad: usize,
}

pub const CRITERIA: &[&str] = &[
    "quantaV",
    "vcond",
    "foias",
    "gradL3",
    "lambda32",
    "half_derivative",
    "pressure_lr",
    "s2_lq",
    "region_lq",
    "lps_velocity",
    "lps_pressure",
    "uil3",
    "unifint",
    "level_set",
    "s2cond",
    "region_increment",
    "kolmogorov",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub initial: Initial,
    pub solver: SolverConfig,
    pub output: PathBuf,
    pub probes: Probes,
    pub pressure: PressureConfig,
    pub structure: StructureConfig,
    pub criteria: CriteriaConfig,
}

struct Entries {
    map: BTreeMap<String, (String, usize)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {line_no}: expected `section.key = value`"))
            })?;
            let key = key.trim();
            match key.split_once('.') {
                Some((s, k))
                    if !s.is_empty() && !k.is_empty() && !key.contains(char::is_whitespace) => {}
                _ => {
                    return Err(CliError::Config(format!(
                        "line {line_no}: key `{key}` is not of the form section.key"
                    )))
                }
            }
            if map
                .insert(key.to_string(), (value.trim().to_string(), line_no))
                .is_some()
            {
                return Err(CliError::Config(format!(
                    "line {line_no}: duplicate key `{key}`"
                )));
            }
        }
        Ok(Self { map })
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.map.remove(key)
    }

    fn get<T: FromStr>(&mut self, key: &str, default: Option<T>) -> Result<T, CliError> {
        match self.take(key) {
            Some((v, line)) => v.parse().map_err(|_| {
                CliError::Config(format!("line {line}: cannot parse `{v}` for `{key}`"))
            }),
            None => {
                default.ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
            }
        }
    }

    fn opt<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError> {
        match self.take(key) {
            Some((v, line)) => v.parse().map(Some).map_err(|_| {
                CliError::Config(format!("line {line}: cannot parse `{v}` for `{key}`"))
            }),
            None => Ok(None),
        }
    }

    fn list<T: FromStr>(&mut self, key: &str, default: Vec<T>) -> Result<Vec<T>, CliError> {
        match self.take(key) {
            Some((v, line)) => split_list(&v)
                .map(|s| {
                    s.parse().map_err(|_| {
                        CliError::Config(format!("line {line}: cannot parse `{s}` in `{key}`"))
                    })
                })
                .collect(),
            None => Ok(default),
        }
    }

    fn section(&mut self, prefix: &str) -> Vec<(String, String, usize)> {
        let keys: Vec<String> = self
            .map
            .keys()
            .filter(|k| k.starts_with(prefix))
            .cloned()
            .collect();
        keys.into_iter()
            .map(|k| {
                let (v, line) = self.map.remove(&k).unwrap();
                (k[prefix.len()..].to_string(), v, line)
            })
            .collect()
    }
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_level(v: &str, key: &str) -> Result<LevelPolicy, CliError> {
    let bad = || {
        CliError::Config(format!(
            "`{key}` expects a number, `quantile:<q>` or a comma list (got `{v}`)"
        ))
    };
    if let Some(q) = v.strip_prefix("quantile:") {
        return q
            .trim()
            .parse()
            .map(LevelPolicy::Quantile)
            .map_err(|_| bad());
    }
    if v.contains(',') {
        let s: Result<Vec<f64>, _> = split_list(v).map(str::parse).collect();
        return s.map(LevelPolicy::Series).map_err(|_| bad());
    }
    v.parse().map(LevelPolicy::Constant).map_err(|_| bad())
}

fn render_level(p: &LevelPolicy) -> String {
    match p {
        LevelPolicy::Constant(v) => format!("{v}"),
        LevelPolicy::Quantile(q) => format!("quantile:{q}"),
        LevelPolicy::Series(v) => join(v),
    }
}

fn parse_radius(v: &str) -> Result<RadiusPolicy, CliError> {
    if v == "kolmogorov" {
        return Ok(RadiusPolicy::Kolmogorov);
    }
    let bad = || {
        CliError::Config(format!(
            "`criteria.radius` expects a number, `kolmogorov` or a comma list (got `{v}`)"
        ))
    };
    if v.contains(',') {
        let s: Result<Vec<f64>, _> = split_list(v).map(str::parse).collect();
        return s.map(RadiusPolicy::Custom).map_err(|_| bad());
    }
    v.parse().map(RadiusPolicy::Fixed).map_err(|_| bad())
}

fn render_radius(p: &RadiusPolicy) -> String {
    match p {
        RadiusPolicy::Fixed(r) => format!("{r}"),
        RadiusPolicy::Kolmogorov => "kolmogorov".into(),
        RadiusPolicy::Custom(v) => join(v),
    }
}

fn parse_points(v: &str) -> Result<Vec<[f64; 3]>, CliError> {
    v.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|p| {
            let xs: Vec<f64> = p
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| CliError::Config(format!("probe point `{p}` is not three numbers")))?;
            <[f64; 3]>::try_from(xs)
                .map_err(|_| CliError::Config(format!("probe point `{p}` is not three numbers")))
        })
        .collect()
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut e = Entries::parse(text)?;
        let grid = GridSpec::new(
            e.get("grid.n", None)?,
            e.get("grid.domain_length", Some(2.0 * PI))?,
            e.get("grid.nu", None)?,
        )?;

        let snapshot: Option<String> = e.opt("initial.snapshot")?;
        let kind: Option<String> = e.opt("initial.kind")?;
        let seed: u64 = e.get("initial.seed", Some(0))?;
        let params = e.section("initial.");
        let initial = match (snapshot, kind) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "give either initial.kind or initial.snapshot, not both".into(),
                ))
            }
            (Some(path), None) => {
                if let Some((k, _, line)) = params.first() {
                    return Err(CliError::Config(format!(
                        "line {line}: `initial.{k}` has no meaning with a snapshot"
                    )));
                }
                Initial::Snapshot(PathBuf::from(path))
            }
            (None, Some(kind)) => {
                let mut map = BTreeMap::new();
                for (k, v, line) in params {
                    let x = v.parse().map_err(|_| {
                        CliError::Config(format!(
                            "line {line}: cannot parse `{v}` for `initial.{k}`"
                        ))
                    })?;
                    map.insert(k, x);
                }
                Initial::Generator {
                    kind,
                    params: map,
                    seed,
                }
            }
            (None, None) => {
                return Err(CliError::Config(
                    "missing initial.kind or initial.snapshot".into(),
                ))
            }
        };

        let d = SolverConfig::default();
        let integrator: String = e.get("solver.integrator", Some("rk4".to_string()))?;
        if integrator != "rk4" {
            return Err(CliError::Config(format!(
                "unknown integrator `{integrator}` (supported: rk4)"
            )));
        }
        let solver = SolverConfig {
            dt: e.get("solver.dt", Some(d.dt))?,
            t_end: e.get("solver.t_end", Some(d.t_end))?,
            dealias: e.get("solver.dealias", Some(d.dealias))?,
            integrator: Integrator::Rk4,
            stats_stride: e.get("solver.stats_stride", Some(d.stats_stride))?,
            snapshot_stride: e.get("solver.snapshot_stride", Some(d.snapshot_stride))?,
        };
        solver.validate()?;

        let output = PathBuf::from(e.get::<String>("output.dir", Some("out".into()))?);

        let points: Option<String> = e.opt("probes.points")?;
        let count: usize = e.get("probes.count", Some(20))?;
        let probe_seed: u64 = e.get("probes.seed", Some(0))?;
        let probes = match points {
            Some(p) => Probes::Points(parse_points(&p)?),
            None => Probes::Random {
                count,
                seed: probe_seed,
            },
        };

        let b = LocalQuadrature::baseline();
        let pressure = PressureConfig {
            r: e.get("pressure.r", Some(0.3))?,
            n_theta: e.get("pressure.n_theta", Some(b.sphere.n_theta()))?,
            n_phi: e.get("pressure.n_phi", Some(b.sphere.n_phi()))?,
            n_rad: e.get("pressure.n_rad", Some(b.n_rad))?,
            n_beta: e.get("pressure.n_beta", Some(b.n_beta))?,
            refine: e.get("pressure.refine", Some(1))?,
        };
        pressure.quadrature()?;

        let (h, len) = (grid.dx(), grid.domain_length());
        let structure = StructureConfig {
            radii: e.list("structure.radii", vec![len / 64.0, len / 32.0, len / 16.0])?,
            ells: e.list("structure.ells", (1..=8).map(|k| k as f64 * h).collect())?,
            orders: e.list("structure.orders", vec![2, 3, 4, 6])?,
            fit_range: match (e.opt("structure.fit_min")?, e.opt("structure.fit_max")?) {
                (Some(a), Some(b)) => Some((a, b)),
                (None, None) => None,
                _ => {
                    return Err(CliError::Config(
                        "give both structure.fit_min and structure.fit_max".into(),
                    ))
                }
            },
            beta_q: e.get("structure.beta_q", Some(2.0))?,
        };

        let dc = Constants::default();
        let list: Vec<String> = e.list("criteria.list", Vec::new())?;
        if let Some(bad) = list.iter().find(|c| !CRITERIA.contains(&c.as_str())) {
            return Err(CliError::Config(format!(
                "unknown criterion `{bad}` (known: {})",
                CRITERIA.join(", ")
            )));
        }
        let u_level = match e.take("criteria.u_level") {
            Some((v, _)) => parse_level(&v, "criteria.u_level")?,
            None => LevelPolicy::default(),
        };
        let g_level = match e.take("criteria.g_level") {
            Some((v, _)) => parse_level(&v, "criteria.g_level")?,
            None => LevelPolicy::default(),
        };
        let radius = match e.take("criteria.radius") {
            Some((v, _)) => parse_radius(&v)?,
            None => RadiusPolicy::Kolmogorov,
        };
        let criteria = CriteriaConfig {
            list,
            q: e.get("criteria.q", Some(6.0))?,
            delta: e.opt("criteria.delta")?,
            constants: Constants {
                c_absolute: e.get("criteria.c_absolute", Some(dc.c_absolute))?,
                c_morrey: e.get("criteria.c_morrey", Some(dc.c_morrey))?,
                c_q: Vec::new(),
            },
            u_level,
            g_level,
            radius,
            n_theta: e.get("criteria.n_theta", Some(4))?,
            n_phi: e.get("criteria.n_phi", Some(8))?,
            n_rad: e.get("criteria.n_rad", Some(9))?,
        };
        criteria.constants.validate()?;

        if let Some((k, (_, line))) = e.map.iter().next() {
            return Err(CliError::Config(format!("line {line}: unknown key `{k}`")));
        }
        Ok(Self {
            grid,
            initial,
            solver,
            output,
            probes,
            pressure,
            structure,
            criteria,
        })
    }

    /// Every resolved value in the input grammar; parsing it gives back the
    /// same configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("grid.n", self.grid.n().to_string());
        kv("grid.domain_length", self.grid.domain_length().to_string());
        kv("grid.nu", self.grid.nu().to_string());
        match &self.initial {
            Initial::Generator { kind, params, seed } => {
                kv("initial.kind", kind.clone());
                kv("initial.seed", seed.to_string());
                for (k, v) in params {
                    kv(&format!("initial.{k}"), v.to_string());
                }
            }
            Initial::Snapshot(p) => kv("initial.snapshot", p.display().to_string()),
        }
        kv("solver.dt", self.solver.dt.to_string());
        kv("solver.t_end", self.solver.t_end.to_string());
        kv("solver.dealias", self.solver.dealias.to_string());
        kv("solver.integrator", "rk4".into());
        kv("solver.stats_stride", self.solver.stats_stride.to_string());
        kv(
            "solver.snapshot_stride",
            self.solver.snapshot_stride.to_string(),
        );
        kv("output.dir", self.output.display().to_string());
        match &self.probes {
            Probes::Points(p) => kv(
                "probes.points",
                p.iter()
                    .map(|x| format!("{} {} {}", x[0], x[1], x[2]))
                    .collect::<Vec<_>>()
                    .join("; "),
            ),
            Probes::Random { count, seed } => {
                kv("probes.count", count.to_string());
                kv("probes.seed", seed.to_string());
            }
        }
        let p = &self.pressure;
        kv("pressure.r", p.r.to_string());
        kv("pressure.n_theta", p.n_theta.to_string());
        kv("pressure.n_phi", p.n_phi.to_string());
        kv("pressure.n_rad", p.n_rad.to_string());
        kv("pressure.n_beta", p.n_beta.to_string());
        kv("pressure.refine", p.refine.to_string());
        let st = &self.structure;
        kv("structure.radii", join(&st.radii));
        kv("structure.ells", join(&st.ells));
        kv("structure.orders", join(&st.orders));
        if let Some((a, b)) = st.fit_range {
            kv("structure.fit_min", a.to_string());
            kv("structure.fit_max", b.to_string());
        }
        kv("structure.beta_q", st.beta_q.to_string());
        let c = &self.criteria;
        kv("criteria.list", c.list.join(", "));
        kv("criteria.q", c.q.to_string());
        if let Some(d) = c.delta {
            kv("criteria.delta", d.to_string());
        }
        kv("criteria.c_absolute", c.constants.c_absolute.to_string());
        kv("criteria.c_morrey", c.constants.c_morrey.to_string());
        kv("criteria.u_level", render_level(&c.u_level));
        kv("criteria.g_level", render_level(&c.g_level));
        kv("criteria.radius", render_radius(&c.radius));
        kv("criteria.n_theta", c.n_theta.to_string());
        kv("criteria.n_phi", c.n_phi.to_string());
        kv("criteria.n_rad", c.n_rad.to_string());
        s
    }
}
