use std::path::Path;
use std::process::{Command, Output};

fn gpv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpv")).args(args).output().expect("spawn gpv")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn ratio_check_prints_the_table() {
    let o = gpv(&["ratio-check"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("theta,n,ratio\n"));
    let row = text.lines().find(|l| l.starts_with("1.0000000000000000e0,2,")).unwrap();
    let r: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
    assert!((r - 1.3259).abs() < 0.005);
}

#[test]
fn selftest_succeeds() {
    let o = gpv(&["selftest"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}

#[test]
fn small_coverage_run_is_deterministic_across_threads() {
    let args = [
        "coverage", "--theta", "1", "--n-bidders", "3", "--total-obs", "450", "--mc-reps", "3", "--boot-reps", "20",
        "--grid-step", "0.05", "--alpha", "0.1,0.05", "--seed", "7",
    ];
    let a = gpv(&[&args[..], &["--threads", "1"]].concat());
    let b = gpv(&[&args[..], &["--threads", "2"]].concat());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().starts_with("homogeneous,3,"));
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "theta = 2\nn_bidders = 3\ntotal_obs = 450\nmc_reps = 2\nboot_reps = 10\ngrid_step = 0.1\n")
        .unwrap();
    let out = dir.path().join("cov.csv");
    let o = gpv(&["coverage", "--config", cfg.to_str().unwrap(), "--mc-reps", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let row = text.lines().nth(1).unwrap();
    // mc_reps is the eighth column
    assert_eq!(row.split(',').nth(7), Some("1"));
    assert_eq!(row.split(',').nth(2), Some("2.0000000000000000e0"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "theta = 1\n\nwidth = 3\n").unwrap();
    let o = gpv(&["coverage", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    let o = gpv(&["coverage", "--range", "0.8,0.2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = gpv(&["coverage", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

fn write_bids(path: &Path, body: &str) {
    std::fs::write(path, body).unwrap();
}

#[test]
fn estimate_writes_a_table_and_rejects_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("bids.csv");
    let mut body = String::from("auction,bidder,bid\n");
    for l in 0..60 {
        for i in 0..3 {
            let b = 0.5 * (((l * 3 + i) as f64 * 0.618_034).fract() * 0.98 + 0.01);
            body.push_str(&format!("a{l},{i},{b}\n"));
        }
    }
    write_bids(&good, &body);
    let o = gpv(&["estimate", good.to_str().unwrap(), "--boot-reps", "20", "--points", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("v,f_hat,var_hat,ci_lo,ci_hi,band_lo,band_hi\n"));
    assert_eq!(text.lines().count(), 6);

    let bad = dir.path().join("bad.csv");
    write_bids(&bad, "auction,bidder,bid\na,1,0.1\na,2,oops\n");
    let o = gpv(&["estimate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    let o = gpv(&["estimate", dir.path().join("none.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}
