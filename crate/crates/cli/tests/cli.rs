use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn helmdd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_helmdd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(i).unwrap().to_string()).collect()
}

const ONED: &str = r#"
kind = "oned_verify"
seed = 3
[params]
k = [1, 10, 40]
N = [2, 3, 4, 5, 6, 7, 8]
delta = 0.3
"#;

#[test]
fn oned_verify_passes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "oned.toml", ONED);
    let out = tmp.path().join("out");
    let o = helmdd(&["oned", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("oned.csv")).unwrap();
    let ratios = column(&csv, "max_ratio");
    assert_eq!(ratios.len(), 21);
    assert!(ratios.iter().all(|r| r.parse::<f64>().unwrap() <= 1e-12));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["failed"], 0);
}

#[test]
fn malformed_config_names_the_field() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();
    let cases = [
        ("kind = \"oned_verify\"\n[params]\nk = []\nN = [2]\ndelta = 0.3\n", "params.k"),
        ("kind = \"zeta_table\"\n[params]\nk = [10]\nL = [2]\nN = [4]\ndelta = \"H/4\"\n", "params.delta"),
        ("kind = \"oned_verify\"\n[params]\nk = [1]\nN = [2]\ndelta = 0.3\nstarts = 2\n", "params.starts"),
        ("kind = \"oned_verify\"\n[params]\nk = [1]\nN = [2]\ndelta = 0.3\nwavenumber = 2\n", "wavenumber"),
    ];
    for (i, (body, field)) in cases.iter().enumerate() {
        let cfg = write_config(tmp.path(), &format!("bad{i}.toml"), body);
        let cmd = if body.contains("zeta") { "zeta" } else { "oned" };
        let o = helmdd(&[cmd, "--config", &cfg, "--out", out]);
        assert!(!o.status.success());
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(field), "expected {field} in {err}");
    }
    let cfg = write_config(tmp.path(), "oned.toml", ONED);
    let o = helmdd(&["algebra", "--config", &cfg, "--out", out]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("kind"));
}

#[test]
fn reruns_are_bit_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cb.toml",
        "kind = \"checkerboard_iterate\"\nseed = 5\n[params]\nk = [10]\nN = [2]\ndelta = \"H/4\"\nstarts = 2\n",
    );
    let oned = write_config(tmp.path(), "oned.toml", ONED);
    for (cmd, cfg, file) in [("iterate", &cfg, "iterate.csv"), ("gmres", &cfg, "gmres.csv"), ("oned", &oned, "oned.csv")] {
        let mut bytes = Vec::new();
        for run in 0..2 {
            let out = tmp.path().join(format!("{cmd}{run}"));
            let o = helmdd(&[cmd, "--config", cfg, "--out", out.to_str().unwrap()]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            let mut all = fs::read(out.join(file)).unwrap();
            if cmd != "oned" {
                all.extend(fs::read(out.join(format!("histories/{cmd}_k10_N2_start1.csv"))).unwrap());
            }
            bytes.push(all);
        }
        assert_eq!(bytes[0], bytes[1], "{cmd}");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "oned.toml", ONED);
    let out = tmp.path().join("out");
    let o = helmdd(&["oned", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "11"]);
    assert!(o.status.success());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 11);
}

#[test]
fn impmap_table_values() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "impmap.toml",
        "kind = \"impmap_table\"\n[params]\nk = [10, 20]\nL = [1, 2]\ndelta = \"L/3\"\n",
    );
    let out = tmp.path().join("out");
    let o = helmdd(&["impmap", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("tb:imp-left2right-aspect"));
    let csv = fs::read_to_string(out.join("impmap.csv")).unwrap();
    let rho: Vec<f64> = column(&csv, "rho").iter().map(|s| s.parse().unwrap()).collect();
    let gamma: Vec<f64> = column(&csv, "gamma").iter().map(|s| s.parse().unwrap()).collect();
    // rows: (10,1) (10,2) (20,1) (20,2)
    assert!((0.155..=0.185).contains(&rho[0]));
    assert!((0.075..=0.098).contains(&rho[1]));
    assert!((0.175..=0.205).contains(&rho[2]));
    assert!((0.94..=0.98).contains(&gamma[0]));
    assert!((0.98..=1.005).contains(&gamma[2]));
}

#[test]
fn size_guard_skips_without_failing() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "zeta.toml",
        "kind = \"zeta_table\"\n[params]\nk = [10, 160]\nL = [2]\nN = [2]\ndelta = \"L/3\"\n",
    );
    let out = tmp.path().join("out");
    let o = helmdd(&["zeta", "--config", &cfg, "--out", out.to_str().unwrap(), "--max-dofs", "20000"]);
    assert!(o.status.success());
    let csv = fs::read_to_string(out.join("zeta.csv")).unwrap();
    assert_eq!(column(&csv, "k"), ["10"]);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["skipped"], 1);
    assert_eq!(manifest["runs"][1]["status"], "skipped");
}
