use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn halfsign(cache: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_halfsign"))
        .env("HALFSIGN_CACHE_DIR", cache)
        .env_remove("HALFSIGN_CONFIG")
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn built(dir: &Path) {
    let out = halfsign(dir, &["form-build", "N=2000"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let out = halfsign(dir, &["cusp-extract", "N=2000"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn pipeline_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    built(dir.path());
    let args = ["voronoi-compare", "N=2000", "x=1000", "d=1", "M=256"];
    let first = halfsign(dir.path(), &args);
    assert_eq!(first.status.code(), Some(0));
    let v = json(&first);
    assert_eq!(v["schema_version"], 1);
    let rows = v["report"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0]["residual"].as_f64().unwrap() < 2.0);
    let second = halfsign(dir.path(), &args);
    assert_eq!(first.stdout, second.stdout);

    let csv = halfsign(dir.path(), &["voronoi-compare", "N=2000", "x=1000", "d=1", "M=256", "format=csv"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("a,d,direct_value,m,"));
}

#[test]
fn sign_commands() {
    let dir = tempfile::tempdir().unwrap();
    built(dir.path());
    let out = halfsign(dir.path(), &["signs-windows", "N=2000", "x0=100", "x1=1500", "c0=50"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["report"]["failure_count"], 0);
    assert_eq!(v["report"]["label"], "within theorem hypotheses");
    let out = halfsign(dir.path(), &["signs-windows", "N=2000", "x0=100", "x1=1500", "c0=5", "Q=15", "a=2"]);
    assert_eq!(json(&out)["report"]["label"], "outside theorem hypotheses");
    let out = halfsign(dir.path(), &["signs-count", "N=2000", "set=squarefree", "x=500", "format=csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("i,j\n"));
    let out = halfsign(dir.path(), &["stats-meansq", "N=2000", "grid=100,1000,2000"]);
    assert!(json(&out)["report"]["d_fit"].as_f64().unwrap() > 0.0);
}

#[test]
fn expsum_suite() {
    let dir = tempfile::tempdir().unwrap();
    let out = halfsign(dir.path(), &["expsum-verify", "case=b", "bound=99"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["report"]["result"]["max_abs_err"].as_f64().unwrap() < 1e-9);
    // The literal vanishing statement fails, which is a verification failure.
    let out = halfsign(dir.path(), &["expsum-verify", "case=c", "bound=3"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = halfsign(dir.path(), &["voronoi-compare", "x=1000", "d=1", "M=256"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["error"]["kind"], "cache_missing");
    let out = halfsign(dir.path(), &["signs-count", "colour=red"]);
    assert_eq!(out.status.code(), Some(3));
    let out = halfsign(dir.path(), &["expsum-verify", "case=zz"]);
    assert_eq!(out.status.code(), Some(3));
    let out = halfsign(dir.path(), &["form-build", "rho=2"]);
    assert_eq!(out.status.code(), Some(3));
    let out = halfsign(dir.path(), &["no-such-command"]);
    assert_eq!(out.status.code(), Some(3));
    built(dir.path());
    let out = halfsign(dir.path(), &["voronoi-compare", "N=2000", "x=1000", "d=1", "M=5000"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# desk run\nN=2000\nformat=csv\n").unwrap();
    let c = cfg.to_str().unwrap();
    let out = halfsign(dir.path(), &["--config", c, "form-build"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("key,value\n"));
    let out = halfsign(dir.path(), &["--config", c, "form-build", "format=json"]);
    assert_eq!(json(&out)["config"]["N"], 2000);
    std::fs::write(&cfg, "N=2000\nwidth=3\n").unwrap();
    let out = halfsign(dir.path(), &["--config", c, "form-build"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["error"]["kind"], "unknown_key");
}
