use std::path::Path;
use std::process::{Command, Output};

fn qebath(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qebath"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("QEBATH_JOBS")
        .output()
        .unwrap()
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

fn column(path: &Path, name: &str) -> usize {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().position(|h| h == name).unwrap()
}

#[test]
fn parallel_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["--task", "teff-2qe", "--dsteps", "7", "--osteps", "6", "--d", "2"],
        &["--task", "doublon-band", "--dmin", "-1", "--dmax", "1", "--dsteps", "3", "--osteps", "2", "--nb", "16"],
        &["--task", "ueff", "--dsteps", "3", "--osteps", "4", "--nb", "32"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let mut outputs = Vec::new();
        for jobs in ["1", "8", "8"] {
            let p = dir.path().join(format!("{i}-{jobs}-{}.csv", outputs.len()));
            let mut a = args.to_vec();
            a.extend(["--jobs", jobs]);
            assert!(qebath(&a, &p).status.success());
            outputs.push(std::fs::read(&p).unwrap());
        }
        assert!(outputs.windows(2).all(|w| w[0] == w[1]), "case {i}");
    }
}

#[test]
fn unknown_flags_and_bad_grids_fail() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.csv");
    assert_eq!(qebath(&["--task", "ueff", "--verbose"], &p).status.code(), Some(2));
    assert_eq!(qebath(&["--task", "ueff", "--dsteps", "1"], &p).status.code(), Some(2));
    assert_eq!(qebath(&["--task", "ueff", "--dmin", "nan"], &p).status.code(), Some(2));
    assert!(!p.exists());
}

#[test]
fn failed_points_are_flagged_and_set_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.csv");
    let out = qebath(&["--task", "teff-2qe", "--omin", "0", "--omax", "1", "--osteps", "2", "--dsteps", "2"], &p);
    assert_eq!(out.status.code(), Some(1));
    let status = column(&p, "status");
    let omega = column(&p, "omega");
    for r in rows(&p) {
        let want = if &r[omega] == "0" { "error" } else { "ok" };
        assert_eq!(&r[status], want);
    }
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("t.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["errors"], 2);
    assert_eq!(m["rows"], 4);
    assert_eq!(m["task"], "teff-2qe");
    assert_eq!(m["config"]["omegas"][1], 1.0);
}

#[test]
fn antisymmetric_state_appears_above_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.csv");
    let args = ["--task", "teff-2qe", "--dmin", "1", "--dmax", "2", "--dsteps", "2", "--omin", "1", "--omax", "2", "--osteps", "11"];
    assert!(qebath(&args, &p).status.success());
    let (d, o, e, t) = (column(&p, "delta"), column(&p, "omega"), column(&p, "exists_minus"), column(&p, "t_eff"));
    for r in rows(&p) {
        let delta: f64 = r[d].parse().unwrap();
        let omega: f64 = r[o].parse().unwrap();
        let exists = &r[e] == "true";
        if (omega - (2.0 * delta).sqrt()).abs() > 0.05 {
            assert_eq!(exists, omega > (2.0 * delta).sqrt(), "{delta} {omega}");
        }
        // an absent state leaves an empty cell, never a number
        assert_eq!(r[t].is_empty(), !exists);
    }
}

#[test]
fn decoupled_bands_have_no_isolated_rows() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("b.csv");
    let args = ["--task", "doublon-band", "--dmin", "0", "--dsteps", "1", "--omin", "0", "--osteps", "1", "--nb", "8"];
    assert!(qebath(&args, &p).status.success());
    let (b, e) = (column(&p, "band_defined"), column(&p, "e_2b"));
    let r = rows(&p);
    assert_eq!(r.len(), 8);
    assert!(r.iter().all(|x| &x[b] == "false" && x[e].is_empty()));
}

#[test]
fn check_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.csv");
    let out = qebath(&["--task", "check-suite", "--seed", "11"], &p);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let pass = column(&p, "pass");
    let r = rows(&p);
    assert!(r.len() >= 10 && r.iter().all(|x| &x[pass] == "true"));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().filter(|l| l.ends_with("PASS")).count(), r.len());
}

#[test]
fn dmrg_point_writes_a_loadable_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.csv");
    let args = ["--task", "dmrg-point", "--dmin", "0", "--dsteps", "1", "--omin", "0.5", "--osteps", "1", "--n", "4"];
    assert!(qebath(&args, &p).status.success());
    let r = rows(&p);
    let ck = &r[0][column(&p, "checkpoint")];
    let state = qebath::mps::checkpoint::load(&dir.path().join(ck)).unwrap();
    let e: f64 = r[0][column(&p, "energy")].parse().unwrap();
    assert_eq!(state.energy, e);
    assert_eq!(&r[0][column(&p, "converged")], "true");
}
