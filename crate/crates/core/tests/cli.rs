use nonrev_kinetic::cli::run;
use std::fs;
use std::path::Path;
use std::process::Command;

fn nrk(out: &Path, args: &[&str]) -> i32 {
    let mut v = vec!["nrk".to_string(), "--out-dir".into(), out.display().to_string()];
    v.extend(args.iter().map(|s| s.to_string()));
    run(v)
}

fn data_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn stationary_two_state_and_header() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("chain.cfg");
    fs::write(&cfg, "# two states\nmodel = markov\nrates = 0,1;3,0\n").unwrap();
    assert_eq!(nrk(d.path(), &["stationary", "--config", cfg.to_str().unwrap(), "--seed", "9"]), 0);
    let rows = data_rows(&d.path().join("pi.csv"));
    assert!((rows[0][1] - 0.75).abs() < 1e-15 && (rows[1][1] - 0.25).abs() < 1e-15);
    let text = fs::read_to_string(d.path().join("pi.csv")).unwrap();
    assert!(text.starts_with("# nonrev-kinetic "));
    assert!(text.contains("# rates = 0,1;3,0") && text.contains("# seed = 9"));
    assert_eq!(json(&d.path().join("summary.json"))["config"]["model"], "markov");
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let o = d.path();
    assert_eq!(nrk(o, &["stationary", "--set", "rates=0,1,0;1,0,0;0,1,0"]), 2);
    assert_eq!(nrk(o, &["stationary", "--config", "/nonexistent/x.cfg"]), 1);
    assert_eq!(nrk(o, &["evolve", "--set", "rates=0,1;3,0", "--set", "n_steps=0"]), 1);
    assert_eq!(nrk(o, &["kernel", "--set", "model=kuramoto-b", "--set", "epsilon=1.5"]), 1);
    assert_eq!(nrk(o, &["kac", "--set", "model=kuramoto-a", "--set", "M=8", "--set", "N=1"]), 1);
    assert_eq!(nrk(o, &["stationary", "--set", "model=nope"]), 1);
    assert_eq!(nrk(o, &["bogus"]), 1);
}

#[test]
fn binary_reports_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_nrk");
    let ok = Command::new(bin).args(["stationary", "--set", "rates=0,2;2,0", "--out-dir"]).arg(d.path()).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let bad = Command::new(bin).args(["stationary", "--set", "rates=0,1,0;1,0,0;0,1,0", "--out-dir"]).arg(d.path()).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("reducible"));
}

#[test]
fn evolve_entropy_columns() {
    let d = tempfile::tempdir().unwrap();
    let o = d.path();
    assert_eq!(nrk(o, &["evolve", "--set", "rates=0,1;3,0", "--set", "p0=pi"]), 0);
    assert!(data_rows(&o.join("entropy.csv")).iter().all(|r| r[1].abs() < 1e-15));
    assert_eq!(
        nrk(o, &["evolve", "--set", "model=kuramoto-a", "--set", "M=16", "--set", "T=10", "--set", "n_steps=40"]),
        0
    );
    let e = data_rows(&o.join("entropy.csv"));
    assert!(e.windows(2).all(|w| w[1][1] <= w[0][1] + 1e-12));
    assert!(e.last().unwrap()[1] < e[0][1]);
    assert_eq!(json(&o.join("summary.json"))["entropy_monotone"], true);
}

#[test]
fn balance_verdicts() {
    let d = tempfile::tempdir().unwrap();
    let o = d.path();
    let rates = "rates=0,1,0.5;0.5,0,1;1,0.5,0";
    assert_eq!(nrk(o, &["balance", "--set", rates]), 0);
    assert_eq!(json(&o.join("report.json"))["verdict"], "solution");
    assert_eq!(nrk(o, &["balance", "--set", rates, "--set", "flux=perturbed"]), 0);
    let r = json(&o.join("report.json"));
    assert_eq!(r["verdict"], "not-solution");
    assert!(r["gap"].as_f64().unwrap() > 1e-3);
    // perturbing edges with zero rate makes the flux entropy infinite
    assert_eq!(nrk(o, &["balance", "--set", "rates=0,1,0;0,0,1;1,0,0", "--set", "flux=perturbed"]), 0);
    let r = json(&o.join("report.json"));
    assert_eq!(r["terms"]["e_forward"], "inf");
    assert!(!r["flags"].as_array().unwrap().is_empty());
    assert_eq!(nrk(o, &["balance", "--set", "model=kuramoto-b", "--set", "M=8", "--set", "n_steps=20"]), 0);
    let r = json(&o.join("report.json"));
    assert_eq!(r["system"], "boltzmann");
    assert!(r["terms"]["factorization_residual"].as_f64().is_some());
}

#[test]
fn kernel_curve_and_tensor_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let o = d.path();
    let args = ["kernel", "--set", "model=kuramoto-b", "--set", "M=8", "--set", "tensor=true", "--set", "oracle_points=200"];
    assert_eq!(nrk(o, &args), 0);
    for r in data_rows(&o.join("curve.csv")) {
        let exact = nonrev_kinetic::kernels::kuramoto_lambda_b(r[0], 0.5).unwrap();
        assert!((r[1] - exact).abs() <= 1e-15 * exact.abs().max(1.0));
    }
    assert!(json(&o.join("summary.json"))["oracle_sup_error"].as_f64().unwrap() < 1e-3);
    let kpath = o.join("kernel.csv");
    let (b, sym) = nonrev_kinetic::io::read_kernel_csv(&kpath).unwrap();
    assert!(sym && b.n_states() == 8);
    let set = format!("kernel={}", kpath.display());
    assert_eq!(nrk(&o.join("file"), &["kernel", "--set", "model=kernel-file", "--set", &set]), 0);
    let s = json(&o.join("file/summary.json"));
    assert!(s["symmetry_defect"].as_f64().unwrap() < 1e-15);
}

#[test]
fn kac_runs_are_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let args = ["kac", "--set", "model=kuramoto-a", "--set", "M=8", "--set", "N=30", "--set", "replicas=8", "--seed", "5"];
    assert_eq!(nrk(&d.path().join("a"), &args), 0);
    assert_eq!(nrk(&d.path().join("b"), &args), 0);
    for f in ["events.csv", "marginal.csv", "summary.json"] {
        assert_eq!(fs::read(d.path().join("a").join(f)).unwrap(), fs::read(d.path().join("b").join(f)).unwrap(), "{f}");
    }
    let s = json(&d.path().join("a/summary.json"));
    assert!(s["n_events"].as_u64().unwrap() > 0);
    assert!(s["chaos_gap"]["tv"].as_f64().unwrap() < 1.0);
    let mut other = args.to_vec();
    other[10] = "6";
    assert_eq!(nrk(&d.path().join("c"), &other), 0);
    assert_ne!(fs::read(d.path().join("a/events.csv")).unwrap(), fs::read(d.path().join("c/events.csv")).unwrap());
}

#[test]
fn threads_do_not_change_output() {
    let d = tempfile::tempdir().unwrap();
    let args = ["kac", "--set", "model=kuramoto-b", "--set", "M=8", "--set", "N=20", "--set", "replicas=6"];
    let mut one = args.to_vec();
    one.extend(["--threads", "1"]);
    let mut three = args.to_vec();
    three.extend(["--threads", "3"]);
    assert_eq!(nrk(&d.path().join("a"), &one), 0);
    assert_eq!(nrk(&d.path().join("b"), &three), 0);
    let strip = |p: &Path| fs::read_to_string(p).unwrap().lines().filter(|l| !l.contains("threads")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&d.path().join("a/summary.json")), strip(&d.path().join("b/summary.json")));
}
