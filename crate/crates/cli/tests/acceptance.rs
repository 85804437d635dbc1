//! End-to-end acceptance: `criteria` prints one PASS/FAIL line per criterion,
//! in order, and fails if any criterion fails; the remaining tests drive the
//! `smallcap` binary itself (exit codes, config errors, reproduction).

use serde_json::Value;
use std::io::Write;
use smallcap_harness::config::parse_config;
use smallcap_harness::experiments::Check;
use smallcap_harness::run::{self, RunRecord};
use smallcap_core::expsum::ExpSumSpec;
use smallcap_core::moments::{exact_torus_moment, Method, MomentQuery, SlabDomain};
use smallcap_core::oracle::naive_energy;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

struct Verdict {
    pass: bool,
    detail: String,
    notes: Vec<String>,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into(), notes: Vec::new() }
    }
}

fn execute(json: &str) -> RunRecord {
    let config = parse_config(json, None).unwrap_or_else(|e| panic!("bad acceptance config: {e}\n{json}"));
    let outcome = run::execute(&config, None).unwrap_or_else(|e| panic!("run failed: {e}\n{json}"));
    run::record(&config, outcome)
}

fn check_lines(rec: &RunRecord, label: &str) -> Vec<String> {
    rec.checks.iter().map(|c: &Check| format!("{label}: {}", c.line())).collect()
}

/// Aggregate several runs: pass iff every check of every run passes.
fn from_runs(runs: &[(String, RunRecord)], detail: impl Into<String>) -> Verdict {
    let mut v = Verdict::new(runs.iter().all(|(_, r)| r.passed), detail);
    for (label, rec) in runs {
        v.notes.extend(check_lines(rec, label));
    }
    v
}

fn torus_moment(spec: ExpSumSpec, p: f64) -> f64 {
    let dim = spec.dimension();
    let q = MomentQuery { spec, p, domain: SlabDomain::torus(dim), normalized: false, method: Method::ExactFFT };
    exact_torus_moment(&q).expect("exact moment").moment
}

fn parseval() -> Verdict {
    let mut worst: f64 = 0.0;
    for n in [2, 3] {
        for big_n in 4..=64usize {
            let spec = ExpSumSpec::moment_curve(n, big_n).unwrap().with_random_phases(1000 * n as u64 + big_n as u64);
            worst = worst.max((torus_moment(spec, 2.0) / big_n as f64 - 1.0).abs());
        }
    }
    Verdict::new(worst <= 1e-9, format!("worst relative error {worst:.2e} (limit 1e-9) over n in {{2,3}}, N in 4..=64"))
}

fn parabola_fourth_moment() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut oracle_mismatch = Vec::new();
    for big_n in 4..=32usize {
        let want = (2 * big_n * big_n - big_n) as f64;
        let got = torus_moment(ExpSumSpec::parabola(big_n).unwrap(), 4.0);
        worst = worst.max((got / want - 1.0).abs());
        let points: Vec<Vec<f64>> = (1..=big_n).map(|j| vec![j as f64, (j * j) as f64]).collect();
        let count = naive_energy(&points, 0.0).unwrap();
        if count as f64 != want {
            oracle_mismatch.push(big_n);
        }
    }
    Verdict::new(
        worst <= 1e-6 && oracle_mismatch.is_empty(),
        format!(
            "worst relative error vs 2N^2-N {worst:.2e} (limit 1e-6), N in 4..=32; quadruple counts disagreeing: {oracle_mismatch:?}"
        ),
    )
}

fn beta_scan() -> Verdict {
    let mut runs = Vec::new();
    // beta = 0 is a whole period in the last variable, so tau only translates
    // the domain and one exact run covers both offsets.
    let exact = r#"{"subcommand": "moments", "params": {"scan": "slab", "dimension": 3, "n_values": [8, 16, 32, 64],
        "p": 12, "beta": 0, "method": "exact", "slope_min": 5.5, "slope_max": 6.5, "min_r_squared": 0.98}}"#;
    runs.push(("beta=0 exact".to_string(), execute(exact)));
    for beta in [0.75, 1.5] {
        let target = 6.0 - 2.0 * beta;
        for tau in [0.0, 0.617] {
            let json = format!(
                r#"{{"subcommand": "moments", "seed": 3, "params": {{"scan": "slab", "dimension": 3, "n_values": [8, 16, 32, 64],
                "p": {p}, "beta": {beta}, "tau": {tau}, "method": "monte-carlo", "samples": 2000000,
                "slope_min": {lo}, "slope_max": {hi}, "min_r_squared": 0.98}}}}"#,
                p = 12.0 - 2.0 * beta,
                lo = target - 0.5,
                hi = target + 0.5,
            );
            runs.push((format!("beta={beta} tau={tau}"), execute(&json)));
        }
    }
    let slopes: Vec<String> =
        runs.iter().map(|(l, r)| format!("{l}: {:.3}", r.summary.get("slope").copied().unwrap_or(f64::NAN))).collect();
    from_runs(&runs, format!("fitted slopes {}", slopes.join(", ")))
}

fn small_cap() -> Verdict {
    let mut runs = Vec::new();
    for alpha in [0.5, 0.75, 1.0] {
        let json = format!(
            r#"{{"subcommand": "moments", "seed": 4, "params": {{"scan": "small-cap", "alpha": {alpha},
            "r_values": [16, 32, 64, 128, 256, 512, 1024], "draws": 5, "samples": 100000, "slope_max": {max}}}}}"#,
            max = alpha / 2.0 + 0.25
        );
        runs.push((format!("alpha={alpha}"), execute(&json)));
    }
    let slopes: Vec<String> = runs
        .iter()
        .map(|(l, r)| format!("{l}: {:.3}", r.summary.get("max_draw_slope").copied().unwrap_or(f64::NAN)))
        .collect();
    from_runs(&runs, format!("largest per-draw slopes {}", slopes.join(", ")))
}

fn flat_sharpness() -> Verdict {
    let rec = execute(
        r#"{"subcommand": "decouple", "params": {"manifold": "flat", "scales": [4, 8, 16], "p_values": [4, 6],
        "min_sharp_ratio": 0.1}}"#,
    );
    from_runs(&[("flat".into(), rec)], "lower bound >= 0.1 L^(1-1/p-1/r), (p,r) in {(4,4),(6,6)}, L in {4,8,16}")
}

fn refined_flat() -> Verdict {
    let rec = execute(
        r#"{"subcommand": "decouple", "seed": 6, "params": {"manifold": "refined-flat", "l_values": [4, 8],
        "multiplicity_exponents": [0, 1, 2], "seeds": 10, "p_values": [4, 6], "max_gain": 8}}"#,
    );
    let worst = rec.checks.first().map_or(f64::NAN, |c| c.value);
    from_runs(&[("refined flat".into(), rec)], format!("max lhs/rhs over seeds {worst:.3} (limit 8)"))
}

fn linear_kakeya() -> Verdict {
    let rec = execute(
        r#"{"subcommand": "kakeya", "seed": 7, "params": {"mode": "linear", "delta": 0.015625, "directions": 64,
        "multiplicities": [1, 2, 4], "families": 100, "max_constant": 16, "max_raster_gap": 0.1}}"#,
    );
    from_runs(&[("linear".into(), rec)], "100 families per multiplicity, delta = 1/64")
}

fn bilinear() -> Verdict {
    let rec = execute(
        r#"{"subcommand": "kakeya", "seed": 8, "params": {"mode": "bilinear", "delta": 0.03125, "families": 50,
        "max_constant": 64}}"#,
    );
    from_runs(&[("bilinear".into(), rec)], "50 transverse families, delta = 1/32")
}

fn refined_planar() -> Verdict {
    let rec = execute(
        r#"{"subcommand": "kakeya", "seed": 9, "params": {"mode": "refined-planar", "alpha_values": [0.5, 0.75],
        "delta_values": [0.03125, 0.015625], "per_fat": 1, "hubs": 3, "seeds": 3, "richness_factor": 4,
        "max_spread": 4}}"#,
    );
    let spreads: Vec<String> =
        rec.summary.iter().filter(|(k, _)| k.starts_with("spread")).map(|(k, v)| format!("{k} = {v:.3}")).collect();
    from_runs(&[("refined planar".into(), rec)], format!("constant spread across delta: {}", spreads.join(", ")))
}

fn trilinear() -> Verdict {
    let rec = execute(
        r#"{"subcommand": "kakeya", "seed": 10, "params": {"mode": "trilinear", "alpha": 0.5,
        "delta_values": [0.0625, 0.03125], "seeds": 3, "max_spread": 4}}"#,
    );
    from_runs(&[("trilinear".into(), rec)], "alpha = 1/2, delta in {1/16, 1/32}, audited families")
}

fn plates() -> Verdict {
    let rec = execute(
        r#"{"subcommand": "kakeya", "seed": 11, "params": {"mode": "plates", "delta": 0.015625, "pairs": 50,
        "min_angle_factor": 4, "max_ratio": 4, "plank_delta": 0.00390625, "plank_shrink": 0.05, "plank_pairs": 50}}"#,
    );
    from_runs(&[("plates".into(), rec)], "50 plate pairs, 50 plank pairs")
}

fn energy() -> Verdict {
    let rec = execute(
        r#"{"subcommand": "energy", "seed": 12, "params": {"delta_values": [0.125, 0.0625, 0.03125, 0.015625],
        "oracle_sets": 50, "oracle_max_size": 40, "max_slope": 2.3}}"#,
    );
    let slope = rec.summary.get("slope").copied().unwrap_or(f64::NAN);
    from_runs(&[("energy".into(), rec)], format!("energy exponent {slope:.3} (limit 2.3), 50 oracle sets"))
}

fn vdc() -> Verdict {
    let rec = execute(r#"{"subcommand": "vdc", "params": {"t": 1e6, "slack": 10, "bound_grid": 10, "epsilon": 0}}"#);
    from_runs(&[("vdc".into(), rec)], "t = 1e6, slack 10, 10 x 10 grid")
}

fn oracles(scratch: &Path) -> Verdict {
    let rec = execute(
        r#"{"subcommand": "oracle-check", "seed": 14, "params": {"moment_configs": 20, "mc_samples": 200000,
        "sigmas": 3, "quadrature_configs": 5, "rich_instances": 12, "energy_sets": 20}}"#,
    );
    let mut v = from_runs(&[("oracle-check".into(), rec)], "");
    let mut worst: f64 = 0.0;
    for (name, json) in [
        (
            "moments",
            r#"{"subcommand": "moments", "params": {"scan": "slab", "dimension": 3, "n_values": [4, 6, 8], "p": 6,
            "beta": 1, "tau": 0.3, "method": "exact"}}"#,
        ),
        (
            "moments-torus",
            r#"{"subcommand": "moments", "params": {"scan": "slab", "dimension": 2, "n_values": [8, 16, 32], "p": 4,
            "beta": 0, "method": "exact", "coefficients": "random"}}"#,
        ),
        ("energy", r#"{"subcommand": "energy", "params": {}}"#),
        ("vdc", r#"{"subcommand": "vdc", "params": {}}"#),
    ] {
        let config = parse_config(json, None).expect("config");
        let dir = scratch.join(format!("reproduce-{name}"));
        run::run(&config, &dir, None).expect("run");
        let (_, dev) = run::reproduce(&dir.join(run::RESULTS_JSON), None, None).expect("reproduce");
        v.notes.push(format!("reproduce {name}: max relative deviation {:e} over {} values", dev.max_relative, dev.cells));
        worst = worst.max(dev.max_relative);
    }
    v.pass &= worst == 0.0;
    v.detail = format!("oracle suite {}, reproduce deviation {worst:e}", if v.pass { "clean" } else { "see notes" });
    v
}

fn numbers(v: &Value, out: &mut Vec<u64>) {
    match v {
        Value::Number(n) => out.push(n.as_f64().expect("finite number").to_bits()),
        Value::Array(a) => a.iter().for_each(|x| numbers(x, out)),
        Value::Object(m) => m.values().for_each(|x| numbers(x, out)),
        _ => {}
    }
}

fn determinism(scratch: &Path) -> Verdict {
    let configs = [
        r#"{"subcommand": "moments", "params": {"scan": "slab", "dimension": 3, "n_values": [6, 8, 10], "p": 8, "beta": 1, "tau": 0.617}}"#,
        r#"{"subcommand": "moments", "seed": 5, "params": {"scan": "slab", "dimension": 3, "n_values": [8, 16], "p": 9, "beta": 0.75, "method": "monte-carlo", "samples": 50000}}"#,
        r#"{"subcommand": "moments", "seed": 5, "params": {"scan": "small-cap", "alpha": 0.75, "r_values": [16, 32, 64], "draws": 2, "samples": 20000}}"#,
        r#"{"subcommand": "decouple", "seed": 5, "params": {"manifold": "flat", "scales": [4, 8], "extremal": "random-phase"}}"#,
        r#"{"subcommand": "decouple", "seed": 5, "params": {"manifold": "parabola", "scales": [16, 32], "domain": "sampled", "samples": 20000}}"#,
        r#"{"subcommand": "decouple", "seed": 5, "params": {"manifold": "refined-flat", "l_values": [4], "seeds": 3}}"#,
        r#"{"subcommand": "kakeya", "seed": 5, "params": {"mode": "linear", "families": 5}}"#,
        r#"{"subcommand": "kakeya", "seed": 5, "params": {"mode": "bilinear", "families": 5}}"#,
        r#"{"subcommand": "kakeya", "seed": 5, "params": {"mode": "refined-planar", "alpha_values": [0.75], "delta_values": [0.0625, 0.03125]}}"#,
        r#"{"subcommand": "kakeya", "seed": 5, "params": {"mode": "trilinear", "delta_values": [0.0625, 0.03125], "seeds": 1}}"#,
        r#"{"subcommand": "kakeya", "seed": 5, "params": {"mode": "plates", "pairs": 10, "plank_pairs": 10}}"#,
        r#"{"subcommand": "energy", "seed": 5, "params": {"oracle_sets": 5}}"#,
        r#"{"subcommand": "vdc", "params": {}}"#,
        r#"{"subcommand": "oracle-check", "seed": 5, "params": {"moment_configs": 4, "mc_samples": 20000, "quadrature_configs": 1, "rich_instances": 2, "energy_sets": 4}}"#,
    ];
    let mut differing = Vec::new();
    let mut v = Verdict::new(true, "");
    for (k, json) in configs.iter().enumerate() {
        let config = parse_config(json, None).expect("config");
        let mut reference: Option<Vec<u64>> = None;
        for workers in [1, 2, 3] {
            let dir = scratch.join(format!("det-{k}-w{workers}"));
            run::run(&config, &dir, Some(workers)).expect("run");
            let text = std::fs::read_to_string(dir.join(run::RESULTS_JSON)).expect("results.json");
            let mut bits = Vec::new();
            numbers(&serde_json::from_str(&text).expect("json"), &mut bits);
            match &reference {
                None => reference = Some(bits),
                Some(r) if *r != bits => differing.push(format!("{} #{k} at {workers} workers", config.subcommand.name())),
                Some(_) => {}
            }
        }
    }
    v.pass = differing.is_empty();
    v.detail = format!("{} configurations x workers {{1,2,3}}; differing: {differing:?}", configs.len());
    v
}

/// Written straight to the process's stdout so the lines show up even
/// though the test harness captures `print!` output.
fn say(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

#[test]
fn criteria() {
    let scratch = tempfile::tempdir().expect("scratch directory");
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        ("Parseval on the torus", Box::new(parseval)),
        ("fourth moment of the parabola", Box::new(parabola_fourth_moment)),
        ("moment-curve slab scan", Box::new(beta_scan)),
        ("parabola small-cap averages", Box::new(small_cap)),
        ("flat decoupling sharpness", Box::new(flat_sharpness)),
        ("refined flat decoupling", Box::new(refined_flat)),
        ("linear Kakeya", Box::new(linear_kakeya)),
        ("bilinear rich squares", Box::new(bilinear)),
        ("refined planar Kakeya", Box::new(refined_planar)),
        ("trilinear bound", Box::new(trilinear)),
        ("plate geometry", Box::new(plates)),
        ("additive energy", Box::new(energy)),
        ("zeta block bounds", Box::new(vdc)),
        ("oracle equivalence", Box::new(|| oracles(scratch.path()))),
        ("determinism across workers", Box::new(|| determinism(scratch.path()))),
    ];
    say("");
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = f();
        let secs = start.elapsed().as_secs_f64();
        say(&format!("{} criterion {:>2} {name}: {} [{secs:.1} s]", if v.pass { "PASS" } else { "FAIL" }, i + 1, v.detail));
        for note in &v.notes {
            say(&format!("        {note}"));
        }
        if !v.pass {
            failed.push(i + 1);
        }
    }
    say(&format!("acceptance: {} of {} criteria passed; failed: {failed:?}", criteria.len() - failed.len(), criteria.len()));
    assert!(failed.is_empty(), "criteria failed: {failed:?}");
}

// ---- the binary -----------------------------------------------------------

fn smallcap(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smallcap")).args(args).current_dir(cwd).output().expect("spawn smallcap")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn passing_run_exits_zero_and_writes_both_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "vdc.json", r#"{"subcommand": "vdc", "params": {"slack": 10}}"#);
    let o = smallcap(&["vdc", "--config", &cfg, "--out", "res"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("PASS |sum| / new bound"));
    let rec = run::read_record(&dir.path().join("res").join(run::RESULTS_JSON)).unwrap();
    assert!(rec.passed);
    let dat = std::fs::read_to_string(dir.path().join("res").join(run::RESULTS_DAT)).unwrap();
    assert!(dat.starts_with("# N abs_sum"));
    assert_eq!(dat.lines().count(), rec.table.rows.len() + 1);
}

#[test]
fn failed_threshold_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "vdc.json", r#"{"subcommand": "vdc", "params": {"slack": 1e-6}}"#);
    let o = smallcap(&["vdc", "--config", &cfg, "--out", "res"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL |sum| / new bound"));
    // the artifacts are still written
    assert!(!run::read_record(&dir.path().join("res").join(run::RESULTS_JSON)).unwrap().passed);
}

#[test]
fn config_errors_exit_two_with_a_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let bad = "{\n  \"subcommand\": \"energy\",\n  \"params\": {\n    \"delta_values\": [0.125],\n    \"oracle_set\": 3\n  }\n}\n";
    let cfg = write(dir.path(), "bad.json", bad);
    let o = smallcap(&["energy", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 5"), "{}", stderr(&o));
    assert!(stderr(&o).contains("oracle_set"));

    let o = smallcap(&["vdc", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2), "a config for another subcommand is refused");
    let o = smallcap(&["energy", "--config", "missing.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = smallcap(&["energy", "--workers", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = smallcap(&["energy", "--no-such-flag"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("runs").exists(), "nothing is written on usage errors");
}

#[test]
fn compute_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    // a 2^40-point torus grid is over every size cap
    let cfg = write(
        dir.path(),
        "huge.json",
        r#"{"subcommand": "moments", "params": {"scan": "slab", "dimension": 3, "n_values": [4096], "p": 20, "beta": 0}}"#,
    );
    let o = smallcap(&["moments", "--config", &cfg, "--out", "res"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert!(stderr(&o).contains("computation failed"), "{}", stderr(&o));
}

#[test]
fn default_output_directory_and_seed_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = smallcap(&["energy", "--seed", "17"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rec = run::read_record(&dir.path().join("runs/energy").join(run::RESULTS_JSON)).unwrap();
    assert_eq!(rec.seed, 17);
    assert_eq!(rec.config["seed"], 17);
}

#[test]
fn reproduce_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "mc.json",
        r#"{"subcommand": "moments", "seed": 2, "params": {"scan": "slab", "dimension": 2, "n_values": [4, 8, 16],
           "p": 4, "beta": 1, "method": "monte-carlo", "samples": 20000}}"#,
    );
    let o = smallcap(&["moments", "--config", &cfg, "--out", "mc", "--workers", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let o = smallcap(&["reproduce", "mc/results.json", "--workers", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("max relative deviation: 0e0"), "{}", stdout(&o));

    // another seed moves the estimates, but only by a few standard errors
    let o = smallcap(&["reproduce", "mc/results.json", "--seed", "99"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(!out.contains("max relative deviation: 0e0"));
    let sigmas: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("max deviation in standard errors: "))
        .expect("sigma line")
        .parse()
        .unwrap();
    assert!(sigmas > 0.0 && sigmas < 6.0, "{sigmas}");

    std::fs::write(dir.path().join("junk.json"), "{\"version\": 1}").unwrap();
    let o = smallcap(&["reproduce", "junk.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = smallcap(&["reproduce", "nowhere.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
