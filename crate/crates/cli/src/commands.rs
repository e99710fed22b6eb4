//! The five subcommands. Each writes the resolved configuration and its
//! result files into the output directory; wall-clock timings go to the
//! `run.log` sidecar so that every other file is reproducible byte for byte.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use nsrl_core::criteria::{
    admissible_delta, certificate, kolmogorov_budget, kolmogorov_eta, level_set_monitor,
    lps_integral, region_increment_check, s2cond_monitor, sample_trajectory,
    uniform_integrability_monitor, CertificateInputs, CertificateKind, CriterionReport,
    KolmogorovBudget, ReportSummary, Subject,
};
use nsrl_core::csv::{num, Table};
use nsrl_core::field::Generator;
use nsrl_core::pressure::{beta_scaling, beta_scaling_table, decomposition_table, LocalPressure};
use nsrl_core::quadrature::SphereQuadrature;
use nsrl_core::snapshot::{load_snapshot, store_snapshot};
use nsrl_core::solver::{simulate, stats_table, Trajectory};
use nsrl_core::structure::{
    default_fit_range, fit_zeta, longitudinal_moments, moments_table, structure_rows,
    structure_table, zeta_table,
};
use nsrl_core::Field;

use crate::config::{Initial, Probes, RunConfig};
use crate::error::CliError;

pub const RESOLVED_CONFIG: &str = "config.resolved";
pub const RUN_LOG: &str = "run.log";
pub const CRITERIA_SUMMARY: &str = "criteria_summary.json";
pub const PLOT_DATA: &str = "plot_data.csv";
pub const REPORT_JSON: &str = "report.json";

/// Output directory plus the timing log.
struct Run {
    dir: PathBuf,
    log: Vec<(String, f64)>,
}

impl Run {
    fn open(cfg: &RunConfig) -> Result<Self, CliError> {
        let dir = cfg.output.clone();
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let run = Self {
            dir,
            log: Vec::new(),
        };
        run.write(RESOLVED_CONFIG, &cfg.to_text())?;
        Ok(run)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&self, name: &str, text: &str) -> Result<(), CliError> {
        let p = self.path(name);
        fs::write(&p, text).map_err(|e| CliError::io(&p, e))
    }

    fn table(&self, name: &str, t: &Table) -> Result<(), CliError> {
        self.write(name, &t.to_csv())
    }

    fn timed<T>(
        &mut self,
        phase: &str,
        f: impl FnOnce() -> Result<T, CliError>,
    ) -> Result<T, CliError> {
        let start = Instant::now();
        let out = f()?;
        self.log
            .push((phase.to_string(), start.elapsed().as_secs_f64()));
        Ok(out)
    }

    fn finish(self) -> Result<(), CliError> {
        let mut s = String::new();
        for (phase, secs) in &self.log {
            s.push_str(&format!("{phase} {secs:.3}s\n"));
        }
        self.write(RUN_LOG, &s)
    }
}

pub fn initial_field(cfg: &RunConfig) -> Result<Field, CliError> {
    match &cfg.initial {
        Initial::Generator { kind, params, seed } => {
            Ok(Generator::from_kind(kind, params, *seed)?.generate(cfg.grid)?)
        }
        Initial::Snapshot(path) => {
            let (u, _) = load_snapshot(path)?;
            if *u.grid() != cfg.grid {
                return Err(CliError::Config(format!(
                    "snapshot {} has grid n = {}, L = {}, ν = {}; the config asks for n = {}, L = {}, ν = {}",
                    path.display(),
                    u.grid().n(),
                    u.grid().domain_length(),
                    u.grid().nu(),
                    cfg.grid.n(),
                    cfg.grid.domain_length(),
                    cfg.grid.nu()
                )));
            }
            Ok(u)
        }
    }
}

pub fn probe_points(cfg: &RunConfig) -> Vec<[f64; 3]> {
    match &cfg.probes {
        Probes::Points(p) => p.clone(),
        Probes::Random { count, seed } => {
            let len = cfg.grid.domain_length();
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..*count)
                .map(|_| std::array::from_fn(|_| rng.random_range(0.0..len)))
                .collect()
        }
    }
}

fn trajectory(
    cfg: &RunConfig,
    run: &mut Run,
    keep_snapshots: bool,
) -> Result<Trajectory, CliError> {
    let u0 = run.timed("initial", || initial_field(cfg))?;
    let mut solver = cfg.solver.clone();
    if keep_snapshots && solver.snapshot_stride == 0 {
        solver.snapshot_stride = solver.stats_stride;
    }
    run.timed("simulate", || Ok(simulate(&u0, &solver)?))
}

pub fn simulate_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let mut run = Run::open(cfg)?;
    let traj = trajectory(cfg, &mut run, false)?;
    run.table("stats.csv", &stats_table(&traj.stats))?;
    let snap_dir = run.path("snapshots");
    fs::create_dir_all(&snap_dir).map_err(|e| CliError::io(&snap_dir, e))?;
    let mut index = Table::new("index,t,file");
    for (i, (t, u)) in traj.snapshots.iter().enumerate() {
        let name = format!("snap_{i:05}.nsrl");
        store_snapshot(u, *t, &snap_dir.join(&name))?;
        index.push(vec![i.to_string(), num(*t), format!("snapshots/{name}")]);
    }
    run.table("snapshots.csv", &index)?;
    let last = traj
        .stats
        .last()
        .expect("initial statistics are always recorded");
    println!(
        "simulate: t = {}, energy = {:.6e}, {} snapshots",
        last.t,
        last.energy,
        traj.snapshots.len()
    );
    run.finish()
}

pub fn verify_pressure_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let mut run = Run::open(cfg)?;
    let u = run.timed("initial", || initial_field(cfg))?;
    let lp = LocalPressure::new(&u)?;
    let pts = probe_points(cfg);
    let r = cfg.pressure.r;
    let mut quad = cfg.pressure.quadrature()?;
    let mut summary = Table::new(
        "level,n_theta,n_phi,n_rad,n_beta,max_rel_residual,ratio,max_pi_minus_2S2,pv_unresolved",
    );
    let mut prev = f64::NAN;
    for level in 0..=cfg.pressure.refine {
        let rows = run.timed(&format!("level {level}"), || {
            Ok(lp.decompose_many(&pts, r, &quad)?)
        })?;
        let mut t = decomposition_table(&rows);
        t.header
            .extend(["S2".to_string(), "pi_minus_2S2".to_string()]);
        for (row, d) in t.rows.iter_mut().zip(&rows) {
            row.push(num(d.s2_cumulative));
            row.push(num(d.pi.abs() - 2.0 * d.s2_cumulative));
        }
        run.table(&format!("pressure_level{level}.csv"), &t)?;
        let worst = rows.iter().map(|d| d.rel_residual).fold(0.0, f64::max);
        let slack = rows
            .iter()
            .map(|d| d.pi.abs() - 2.0 * d.s2_cumulative)
            .fold(f64::NEG_INFINITY, f64::max);
        let unresolved = rows.iter().filter(|d| !d.pv.cancellation_ok).count();
        summary.push(vec![
            level.to_string(),
            quad.sphere.n_theta().to_string(),
            quad.sphere.n_phi().to_string(),
            quad.n_rad.to_string(),
            quad.n_beta.to_string(),
            num(worst),
            num(prev / worst),
            num(slack),
            unresolved.to_string(),
        ]);
        println!(
            "verify-pressure: level {level}, max relative residual {worst:.3e}, ratio {:.3}",
            prev / worst
        );
        prev = worst;
        quad = quad.refined();
    }
    run.table("pressure_refinement.csv", &summary)?;
    run.finish()
}

pub fn structure_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let mut run = Run::open(cfg)?;
    let u = run.timed("initial", || initial_field(cfg))?;
    let st = &cfg.structure;
    let rows = run.timed("structure", || Ok(structure_rows(&u, &st.radii)?))?;
    run.table("structure.csv", &structure_table(&rows))?;
    let moments = run.timed("moments", || {
        Ok(longitudinal_moments(&u, &st.ells, &st.orders, None)?)
    })?;
    run.table("moments.csv", &moments_table(&moments))?;
    let fits = fit_zeta(
        &moments,
        st.fit_range.unwrap_or_else(|| default_fit_range(&cfg.grid)),
    );
    run.table("zeta.csv", &zeta_table(&fits))?;
    let beta = run.timed("beta", || Ok(beta_scaling(&u, &st.radii, st.beta_q)?))?;
    run.table("beta_scaling.csv", &beta_scaling_table(&beta))?;
    println!(
        "structure: {} radii, {} moment rows, {} exponent fits",
        rows.len(),
        moments.len(),
        fits.len()
    );
    run.finish()
}

#[derive(Debug, Serialize)]
pub struct CriteriaSummary {
    /// Worst-set measure used by the smallness conditions.
    pub delta: Option<f64>,
    pub all_passed: bool,
    pub reports: Vec<ReportSummary>,
    pub kolmogorov: Option<KolmogorovBudget>,
}

/// Report table with every auxiliary series appended as a column.
fn report_table(rep: &CriterionReport) -> Table {
    let mut t = rep.table();
    for (name, values) in &rep.series {
        t.header.push(name.clone());
        for (row, v) in t.rows.iter_mut().zip(values) {
            row.push(num(*v));
        }
    }
    t
}

pub fn criteria_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let mut run = Run::open(cfg)?;
    let c = &cfg.criteria;
    let mut summary = CriteriaSummary {
        delta: None,
        all_passed: true,
        reports: Vec::new(),
        kolmogorov: None,
    };
    if c.list.is_empty() {
        run.write(CRITERIA_SUMMARY, &serde_json::to_string_pretty(&summary)?)?;
        println!("criteria: nothing requested");
        return run.finish();
    }

    let traj = trajectory(cfg, &mut run, true)?;
    let snaps = &traj.snapshots;
    let nu = cfg.grid.nu();
    let consts = &c.constants;
    let delta = match c.delta {
        Some(d) => d,
        None => {
            let threshold = (nu / (2.0 * consts.c_morrey)).powi(3);
            snaps.iter().try_fold(f64::INFINITY, |acc, (_, u)| {
                admissible_delta(u.grid(), &u.magnitude(), 3.0, threshold).map(|d| acc.min(d))
            })?
        }
    };
    summary.delta = Some(delta);

    let samples = run.timed("norms", || Ok(sample_trajectory(snaps, &[c.q])?))?;
    let per_snapshot =
        |f: &dyn Fn(usize, &Field) -> nsrl_core::Result<f64>| -> Result<Vec<f64>, CliError> {
            Ok(snaps
                .iter()
                .enumerate()
                .map(|(i, (_, u))| f(i, u))
                .collect::<nsrl_core::Result<_>>()?)
        };
    let radius = per_snapshot(&|i, u| c.radius.resolve(i, u))?;
    let u_level = per_snapshot(&|i, u| c.u_level.resolve(i, &u.magnitude()))?;
    let g_level = per_snapshot(&|i, u| c.g_level.resolve(i, &u.gradient_magnitude()))?;
    let inputs = CertificateInputs {
        radius: Some(&radius),
        u_level: Some(&u_level),
        g_level: Some(&g_level),
        ..CertificateInputs::new(nu, &samples)
    };
    let cert =
        |kind| -> Result<CriterionReport, CliError> { Ok(certificate(kind, &inputs, consts)?) };
    let q = c.q;

    for id in &c.list {
        if id == "kolmogorov" {
            let budget = kolmogorov_budget(&traj.stats, nu, cfg.grid.volume())?;
            let mut t = Table::new("t,dissipation,eta,eta_inv4");
            for s in &traj.stats {
                let eta = kolmogorov_eta(nu, s.dissipation)?;
                t.push_nums(&[s.t, s.dissipation, eta, eta.powi(-4)]);
            }
            run.table("criterion_kolmogorov.csv", &t)?;
            println!(
                "criteria: {:<16} ∫η⁻⁴dt = {:.6e}, ν⁻³E(0)/|T³| = {:.6e}",
                "kolmogorov", budget.eta_integral, budget.energy_bound
            );
            summary.kolmogorov = Some(budget);
            continue;
        }
        let rep = run.timed(id, || match id.as_str() {
            "quantaV" => cert(CertificateKind::QuantaV { q }),
            "vcond" => cert(CertificateKind::Vcond),
            "foias" => cert(CertificateKind::Foias { delta }),
            "gradL3" => cert(CertificateKind::GradL3),
            "lambda32" => cert(CertificateKind::Lambda32),
            "half_derivative" => cert(CertificateKind::HalfDerivative),
            "pressure_lr" => cert(CertificateKind::PressureLr { r: q, delta }),
            "s2_lq" => cert(CertificateKind::S2Lq { q, delta }),
            "region_lq" => cert(CertificateKind::RegionLq { q }),
            "lps_velocity" => Ok(lps_integral(
                snaps,
                2.0 * q / (q - 3.0),
                q,
                Subject::Velocity,
            )?),
            "lps_pressure" => {
                let qp = q / 2.0;
                Ok(lps_integral(
                    snaps,
                    2.0 * qp / (2.0 * qp - 3.0),
                    qp,
                    Subject::Pressure,
                )?)
            }
            "uil3" => Ok(uniform_integrability_monitor(
                snaps,
                Subject::Velocity,
                delta,
                consts,
            )?),
            "unifint" => Ok(uniform_integrability_monitor(
                snaps,
                Subject::Pressure,
                delta,
                consts,
            )?),
            "level_set" => Ok(level_set_monitor(snaps, &c.u_level, Some(&c.g_level))?),
            "s2cond" => Ok(s2cond_monitor(snaps, &c.radius, delta, consts)?),
            "region_increment" => {
                let quad = SphereQuadrature::new(c.n_theta, c.n_phi)?;
                Ok(region_increment_check(
                    snaps, &c.u_level, &c.g_level, &c.radius, &quad, c.n_rad, consts,
                )?)
            }
            other => Err(CliError::Config(format!("unknown criterion `{other}`"))),
        })?;
        run.table(&format!("criterion_{id}.csv"), &report_table(&rep))?;
        let s = rep.summary();
        println!(
            "criteria: {:<16} {} (max required C {})",
            s.id,
            if s.passed { "pass" } else { "FAIL" },
            s.max_required_c
        );
        summary.all_passed &= s.passed;
        summary.reports.push(s);
    }
    run.write(CRITERIA_SUMMARY, &serde_json::to_string_pretty(&summary)?)?;
    run.finish()
}

#[derive(Debug, Serialize)]
struct FileEntry {
    name: String,
    columns: Vec<String>,
    rows: usize,
}

#[derive(Debug, Serialize)]
struct Report {
    files: Vec<FileEntry>,
    points: usize,
    criteria: Option<serde_json::Value>,
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap_or("")
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    Ok((header, rows))
}

fn cell_value(cell: &str) -> Option<f64> {
    match cell {
        "true" => Some(1.0),
        "false" => Some(0.0),
        _ => cell.parse().ok(),
    }
}

/// Merges every CSV in the output directory into one long-format table
/// `source,series,x,y` (first column as `x`) and writes an index.
pub fn report_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = cfg.output.clone();
    let mut names: Vec<String> = match fs::read_dir(&dir) {
        Ok(rd) => rd
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".csv") && n != PLOT_DATA)
            .collect(),
        Err(e) => return Err(CliError::io(&dir, e)),
    };
    names.sort();
    if names.is_empty() {
        return Err(CliError::Config(format!(
            "no CSV results in {}; run another subcommand first",
            dir.display()
        )));
    }
    let run = Run::open(cfg)?;
    let mut plot = Table::new("source,series,x,y");
    let mut files = Vec::new();
    for name in &names {
        let (header, rows) = read_csv(&dir.join(name))?;
        let source = name.trim_end_matches(".csv");
        for row in &rows {
            let Some(x) = row.first().and_then(|c| cell_value(c)) else {
                continue;
            };
            for (col, cell) in header.iter().zip(row).skip(1) {
                if let Some(y) = cell_value(cell) {
                    plot.push(vec![source.to_string(), col.clone(), num(x), num(y)]);
                }
            }
        }
        files.push(FileEntry {
            name: name.clone(),
            columns: header,
            rows: rows.len(),
        });
    }
    run.table(PLOT_DATA, &plot)?;
    let criteria = match fs::read_to_string(dir.join(CRITERIA_SUMMARY)) {
        Ok(s) => Some(serde_json::from_str(&s)?),
        Err(_) => None,
    };
    let report = Report {
        files,
        points: plot.rows.len(),
        criteria,
    };
    run.write(REPORT_JSON, &serde_json::to_string_pretty(&report)?)?;
    println!(
        "report: {} files merged into {} points",
        names.len(),
        plot.rows.len()
    );
    run.finish()
}
