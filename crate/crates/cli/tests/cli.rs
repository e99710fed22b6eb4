use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nsrl_core::snapshot::{load_snapshot, store_snapshot};
use nsrl_core::{Field, GridSpec};

fn nsrl(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nsrl"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("NSRL_THREADS", t),
        None => cmd.env_remove("NSRL_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn run(sub: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        sub,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    nsrl(&args, None)
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn error_record(o: &Output) -> serde_json::Value {
    let err = String::from_utf8_lossy(&o.stderr);
    let line = err.lines().last().expect("an error record on stderr");
    serde_json::from_str(line)
        .unwrap_or_else(|e| panic!("stderr is not a JSON record ({e}): {err}"))
}

const TG: &str = "grid.n = 16\ngrid.nu = 0.1\ninitial.kind = taylor_green_2d\nsolver.dt = 0.005\nsolver.t_end = 0.5\n";

const RANDOM: &str = "grid.n = 16\ngrid.nu = 0.05\ninitial.kind = random_divfree\ninitial.k_max = 3\n\
                      initial.seed = 4\nsolver.dt = 0.01\nsolver.t_end = 0.2\nsolver.stats_stride = 4\n";

#[test]
fn simulate_reproduces_taylor_green() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "tg.cfg", TG);
    let out = tmp.path().join("out");
    ok(&run("simulate", &cfg, &out, &[]));

    let (u, t) = load_snapshot(&out.join("snapshots/snap_00001.nsrl")).unwrap();
    assert_eq!(t, 0.5);
    let decay = (-2.0 * 0.1 * t).exp();
    let g = *u.grid();
    let mut err = 0.0;
    for idx in 0..g.len() {
        let [x, y, _] = g.position(idx);
        let exact = [x.sin() * y.cos() * decay, -x.cos() * y.sin() * decay, 0.0];
        let v = u.value(idx);
        err += (0..3).map(|c| (v[c] - exact[c]).powi(2)).sum::<f64>();
    }
    let err = (err * g.cell_volume()).sqrt();
    assert!(err <= 1e-6, "L2 error {err}");

    let stats = fs::read_to_string(out.join("stats.csv")).unwrap();
    assert!(stats.starts_with("t,energy,enstrophy,dissipation,max_u,max_grad_u\n"));
    assert_eq!(stats.lines().count(), 1 + 101);
    let snaps = fs::read_to_string(out.join("snapshots.csv")).unwrap();
    assert_eq!(snaps.lines().count(), 3);
    assert!(out.join("run.log").exists());
}

#[test]
fn resolved_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "r.cfg", RANDOM);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&run("simulate", &cfg, &a, &[]));
    ok(&run("simulate", &a.join("config.resolved"), &b, &[]));
    assert_eq!(
        fs::read(a.join("stats.csv")).unwrap(),
        fs::read(b.join("stats.csv")).unwrap()
    );
    let resolved = fs::read_to_string(a.join("config.resolved")).unwrap();
    assert!(resolved.contains("initial.k_max = 3\n") && resolved.contains("solver.dt = 0.01\n"));
}

#[test]
fn seed_flag_changes_the_initial_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "r.cfg",
        &format!("{RANDOM}solver.t_end = 0\n").replace("solver.t_end = 0.2\n", ""),
    );
    let (a, b, c) = (
        tmp.path().join("a"),
        tmp.path().join("b"),
        tmp.path().join("c"),
    );
    ok(&run("simulate", &cfg, &a, &[]));
    ok(&run("simulate", &cfg, &b, &["--seed", "4"]));
    ok(&run("simulate", &cfg, &c, &["--seed", "5"]));
    let stats = |d: &Path| fs::read(d.join("stats.csv")).unwrap();
    assert_eq!(stats(&a), stats(&b));
    assert_ne!(stats(&a), stats(&c));
    assert!(fs::read_to_string(c.join("config.resolved"))
        .unwrap()
        .contains("initial.seed = 5\n"));
}

#[test]
fn snapshot_restart_matches_generator_start() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "r.cfg", RANDOM);
    let a = tmp.path().join("a");
    ok(&run("simulate", &cfg, &a, &[]));
    let (u0, _) = load_snapshot(&a.join("snapshots/snap_00000.nsrl")).unwrap();
    let snap = tmp.path().join("u0.nsrl");
    store_snapshot(&u0, 0.0, &snap).unwrap();
    let restart = RANDOM.replace(
        "initial.kind = random_divfree\ninitial.k_max = 3\ninitial.seed = 4\n",
        "",
    ) + &format!("initial.snapshot = {}\n", snap.display());
    let cfg2 = write_config(tmp.path(), "s.cfg", &restart);
    let b = tmp.path().join("b");
    ok(&run("simulate", &cfg2, &b, &[]));
    assert_eq!(
        fs::read(a.join("stats.csv")).unwrap(),
        fs::read(b.join("stats.csv")).unwrap()
    );
}

#[test]
fn empty_criteria_list_gives_empty_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "tg.cfg", TG);
    let out = tmp.path().join("out");
    ok(&run("criteria", &cfg, &out, &[]));
    let s: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("criteria_summary.json")).unwrap())
            .unwrap();
    assert_eq!(s["reports"], serde_json::json!([]));
    assert!(s["delta"].is_null() && s["kolmogorov"].is_null());
    assert!(out.join("config.resolved").exists());
}

#[test]
fn criteria_reports_every_requested_check() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "r.cfg",
        &format!("{RANDOM}criteria.list = quantaV, foias, gradL3, level_set, s2cond, kolmogorov\n"),
    );
    let out = tmp.path().join("out");
    ok(&run("criteria", &cfg, &out, &[]));
    let s: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("criteria_summary.json")).unwrap())
            .unwrap();
    let ids: Vec<&str> = s["reports"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["quantaV", "foias", "gradL3", "level_set", "s2cond"]);
    assert!(s["delta"].as_f64().unwrap() > 0.0);
    assert!(s["kolmogorov"]["eta_integral"]
        .as_f64()
        .unwrap()
        .is_finite());
    for id in ["quantaV", "foias", "gradL3"] {
        let r = s["reports"]
            .as_array()
            .unwrap()
            .iter()
            .find(|r| r["id"] == id)
            .unwrap();
        assert_eq!(r["passed"], true, "{id}");
    }
    let csv = fs::read_to_string(out.join("criterion_level_set.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "t,measured,bound,ratio,required_C,pass,G,U,measure_UG,weak_l1_ratio"
    );
    // stats stride 4 over 20 steps: snapshots at t = 0, 0.04, ..., 0.2
    assert_eq!(csv.lines().count(), 1 + 6);
    assert!(csv
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(5) == Some("true")));
}

#[test]
fn verify_pressure_refinement_reports_ratio() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "p.cfg",
        &format!("{RANDOM}probes.count = 5\npressure.refine = 0\n"),
    );
    let out = tmp.path().join("out");
    ok(&run("verify-pressure", &cfg, &out, &["--refine", "1"]));
    let text = fs::read_to_string(out.join("pressure_refinement.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][1], 2.0 * rows[0][1]);
    assert_eq!(rows[1][3], 2.0 * rows[0][3]);
    assert!(rows[0][6].is_nan());
    assert!((rows[1][6] - rows[0][5] / rows[1][5]).abs() <= 1e-12 * rows[1][6]);
    assert!(rows[1][6] >= 4.0, "ratio {}", rows[1][6]);
    let level = fs::read_to_string(out.join("pressure_level1.csv")).unwrap();
    assert_eq!(level.lines().count(), 6);
}

#[test]
fn structure_writes_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.cfg", RANDOM);
    let out = tmp.path().join("out");
    ok(&run("structure", &cfg, &out, &[]));
    for (name, header) in [
        ("structure.csv", "r,s2_mean,S2_mean,S2_L32_norm"),
        ("moments.csv", "p,ell,moment,four_fifths_ratio"),
        ("zeta.csv", "p,zeta,r_squared,points,sign"),
        ("beta_scaling.csv", "r,linf_constant,lq_constant"),
    ] {
        let text = fs::read_to_string(out.join(name)).unwrap();
        assert_eq!(text.lines().next(), Some(header), "{name}");
        assert!(text.lines().count() > 1, "{name}");
    }
}

#[test]
fn report_merges_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "tg.cfg",
        TG.replace("solver.t_end = 0.5", "solver.t_end = 0.02")
            .as_str(),
    );
    let out = tmp.path().join("out");
    ok(&run("simulate", &cfg, &out, &[]));
    ok(&run("report", &cfg, &out, &[]));
    let plot = fs::read_to_string(out.join("plot_data.csv")).unwrap();
    let mut lines = plot.lines();
    assert_eq!(lines.next(), Some("source,series,x,y"));
    // 5 stats records × 5 series, plus 2 snapshots × 1 numeric series
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.iter().filter(|l| l.starts_with("stats,")).count(), 25);
    assert_eq!(
        rows.iter().filter(|l| l.starts_with("snapshots,")).count(),
        2
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["points"], 27);
    // rerun is byte-identical and ignores its own output
    let first = fs::read(out.join("plot_data.csv")).unwrap();
    ok(&run("report", &cfg, &out, &[]));
    assert_eq!(first, fs::read(out.join("plot_data.csv")).unwrap());

    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let o = run("report", &cfg, &empty, &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_errors_exit_2_with_record() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    for (name, text) in [
        ("unknown.cfg", format!("{TG}solver.dtt = 1\n")),
        (
            "generator.cfg",
            TG.replace("taylor_green_2d", "vortex_ring"),
        ),
        (
            "criterion.cfg",
            format!("{TG}criteria.list = quantaV, bogus\n"),
        ),
    ] {
        let cfg = write_config(tmp.path(), name, &text);
        let o = run("simulate", &cfg, &out, &[]);
        assert_eq!(o.status.code(), Some(2), "{name}");
        let rec = error_record(&o);
        assert_eq!(rec["error"], "validation");
        assert_eq!(rec["exit_code"], 2);
    }
    let cfg = write_config(tmp.path(), "tg.cfg", TG);
    let o = nsrl(
        &[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        Some("0"),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cfl.cfg",
        &TG.replace("solver.dt = 0.005", "solver.dt = 0.5"),
    );
    let o = run("simulate", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(3));
    let rec = error_record(&o);
    assert_eq!(rec["error"], "numerical");
    assert!(rec["message"].as_str().unwrap().contains("CFL"));
}

#[test]
fn io_failures_exit_4() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run("simulate", &tmp.path().join("missing.cfg"), &out, &[]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(error_record(&o)["error"], "io");

    let bad = tmp.path().join("bad.nsrl");
    fs::write(&bad, [b"XXXX".as_slice(), &[0u8; 60]].concat()).unwrap();
    let cfg = write_config(
        tmp.path(),
        "snap.cfg",
        &format!(
            "grid.n = 16\ngrid.nu = 0.1\ninitial.snapshot = {}\n",
            bad.display()
        ),
    );
    let o = run("simulate", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(4));
    assert!(error_record(&o)["message"]
        .as_str()
        .unwrap()
        .contains("magic"));
}

#[test]
fn snapshot_grid_must_match_config() {
    let tmp = tempfile::tempdir().unwrap();
    let snap = tmp.path().join("u.nsrl");
    store_snapshot(
        &Field::zeros(GridSpec::periodic(8, 0.1).unwrap()),
        0.0,
        &snap,
    )
    .unwrap();
    let cfg = write_config(
        tmp.path(),
        "snap.cfg",
        &format!(
            "grid.n = 16\ngrid.nu = 0.1\ninitial.snapshot = {}\n",
            snap.display()
        ),
    );
    let o = run("simulate", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "r.cfg",
        &format!(
            "{RANDOM}criteria.list = quantaV, foias, uil3, level_set, s2cond, region_increment\n"
        ),
    );
    let mut dirs = Vec::new();
    for threads in ["1", "3"] {
        let out = tmp.path().join(format!("t{threads}"));
        let o = nsrl(
            &[
                "criteria",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ],
            Some(threads),
        );
        ok(&o);
        dirs.push(out);
    }
    let mut names: Vec<String> = fs::read_dir(&dirs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv") || n.ends_with(".json"))
        .collect();
    names.sort();
    assert!(names.len() >= 7);
    for n in names {
        assert_eq!(
            fs::read(dirs[0].join(&n)).unwrap(),
            fs::read(dirs[1].join(&n)).unwrap(),
            "{n}"
        );
    }
}
