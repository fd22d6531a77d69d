use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wfh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wfh"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

/// CSV text without the trailing wall-time column.
fn strip_timing(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').unwrap().0)
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn capacity_table() {
    let out = wfh(&["capacity", "--min", "1", "--max", "2", "--points", "2"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].contains("holevo"));
    // holevo(1) = 2
    let holevo: f64 = lines[1].split_whitespace().nth(3).unwrap().parse().unwrap();
    assert!((holevo - 2.0).abs() < 1e-8);
}

#[test]
fn capacity_rejects_bad_grid() {
    assert_eq!(code(&wfh(&["capacity", "--min", "0"])), 1);
}

#[test]
fn point_at_fixed_lo_matches_reference() {
    // dense-grid evaluation of the same integral, z^2 = 3.5
    let z = 3.5f64.sqrt().to_string();
    let out = wfh(&["point", "--detector", "wh", "--M", "10", "--nS", "10", "--z", &z]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let bits = v["bits_per_use"].as_f64().unwrap();
    assert!((bits - 2.321164974180229).abs() < 1e-9, "{bits}");
    assert_eq!(v["modulation"], "gaussian");
    assert_eq!(v["optimized"], false);
    let pie = v["pie"].as_f64().unwrap();
    assert!((pie * 10.0 - bits).abs() < 1e-12);
}

#[test]
fn point_bpsk_and_gamma() {
    let out = wfh(&["point", "--detector", "hl", "--M", "2", "--nS", "0.5", "--z", "1", "--bpsk"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["modulation"], "bpsk");
    assert_eq!(v["nu"], "inf");
    let bits = v["bits_per_use"].as_f64().unwrap();
    assert!(bits > 0.0 && bits <= 1.0);

    let out = wfh(&["point", "--detector", "wh", "--M", "3", "--nS", "1", "--z", "1", "--nu", "3"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["modulation"], "gamma");
}

#[test]
fn point_optimizes_lo() {
    let fixed = wfh(&["point", "--detector", "wh", "--M", "1", "--nS", "0.1", "--z", "0.3"]);
    let best = wfh(&["point", "--detector", "wh", "--M", "1", "--nS", "0.1", "--optimize-z"]);
    assert_eq!(code(&best), 0);
    let v = json(&best);
    assert_eq!(v["optimized"], true);
    assert!(v["bits_per_use"].as_f64().unwrap() >= json(&fixed)["bits_per_use"].as_f64().unwrap());
    assert!(v["z"].as_f64().unwrap() > 0.0);
}

#[test]
fn point_errors_map_to_exit_codes() {
    // prior does not fit the receiver
    assert_eq!(code(&wfh(&["point", "--detector", "dw", "--M", "3", "--nS", "1", "--z", "1", "--nu", "2"])), 1);
    assert_eq!(code(&wfh(&["point", "--detector", "wh", "--M", "0", "--nS", "1", "--z", "1"])), 1);
    assert_eq!(code(&wfh(&["point", "--detector", "wh", "--M", "2", "--nS", "-1", "--z", "1"])), 1);
    assert_eq!(code(&wfh(&["point", "--detector", "xx", "--M", "2", "--nS", "1", "--z", "1"])), 1);
    assert_eq!(code(&wfh(&["point", "--detector", "wh", "--M", "2", "--nS", "1"])), 1);
}

#[test]
fn sweep_summary_and_figures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "baselines.cfg",
        "[sweep]\nexperiment = baselines\n[grid]\nmin = 0.05\nmax = 2\npoints = 121\n",
    );
    let csv = dir.path().join("baselines.csv");
    let out = wfh(&["sweep", "--config", &cfg, "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with(
        "experiment,n_S,M,detector,modulation,bits_per_use,pie,ratio,gain,z_opt,nu_opt,node_count,wall_time_s\n"
    ));
    assert_eq!(text.lines().count(), 1 + 4 * 121);

    let summary = wfh(&["summary", "--in", csv.to_str().unwrap()]);
    assert_eq!(code(&summary), 0);
    let s = stdout(&summary);
    let n_sh: f64 = s
        .lines()
        .find(|l| l.contains("sh-dd"))
        .and_then(|l| l.rsplit(' ').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((n_sh - 0.22).abs() < 0.02, "{s}");
    assert!(s.contains("dh-dd"));

    let figs = dir.path().join("figs");
    let out = wfh(&["figures", "--in", csv.to_str().unwrap(), "--out", figs.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(figs.join("fig1.csv").exists());
    assert!(figs.join("fig9.csv").exists());
    assert!(!figs.join("fig4.csv").exists());
}

#[test]
fn sweep_is_deterministic_and_feeds_figures() {
    let dir = tempfile::tempdir().unwrap();
    let body = "[sweep]\nexperiment = single_quadrature\nthreads = 2\n\
                [grid]\nmin = 0.1\nmax = 1\npoints = 2\n[detectors]\nM = 2\n\
                [optimizer]\ncoarse_points = 9\nstarts = 1\n";
    let cfg = write_config(dir.path(), "sq.cfg", body);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = wfh(&["sweep", "--config", &cfg, "--out", path.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (ta, tb) = (fs::read_to_string(&a).unwrap(), fs::read_to_string(&b).unwrap());
    assert_eq!(strip_timing(&ta), strip_timing(&tb));
    assert_eq!(ta.lines().count(), 1 + 2 * 2);

    let figs = dir.path().join("figs");
    let out = wfh(&["figures", "--in", a.to_str().unwrap(), "--out", figs.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let fig4 = fs::read_to_string(figs.join("fig4.csv")).unwrap();
    assert!(fig4.lines().any(|l| l.starts_with("single_quadrature,") && l.contains(",hl,")));
    assert!(fig4.lines().any(|l| l.starts_with("baselines,") && l.contains(",dd,")));
    assert!(figs.join("fig5.csv").exists());
}

#[test]
fn sweep_errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out_csv = dir.path().join("o.csv");
    let out_csv = out_csv.to_str().unwrap();
    assert_eq!(code(&wfh(&["sweep", "--config", "/nonexistent.cfg", "--out", out_csv])), 3);

    let bad = write_config(dir.path(), "bad.cfg", "[sweep]\nexperiment = gains\n[grid]\nmin = -1\n");
    assert_eq!(code(&wfh(&["sweep", "--config", &bad, "--out", out_csv])), 1);

    let no_out = write_config(dir.path(), "noout.cfg", "[sweep]\nexperiment = baselines\n");
    assert_eq!(code(&wfh(&["sweep", "--config", &no_out])), 1);

    let unwritable = dir.path().join("missing_dir").join("x.csv");
    assert_eq!(
        code(&wfh(&["sweep", "--config", &no_out, "--out", unwritable.to_str().unwrap()])),
        3
    );
}

#[test]
fn summary_rejects_malformed_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "not,a,results,file\n1,2,3,4\n").unwrap();
    assert_eq!(code(&wfh(&["summary", "--in", path.to_str().unwrap()])), 3);
}
