use std::path::Path;
use std::process::Command;

const CONFIG: &str = r#"
[study]
problem = "advection_homogeneous"
schemes = ["setdm0", "setdm1"]
dt_list = [0.125, 0.0625, 0.03125]
finest_dt = 0.015625
t_end = 0.25
realizations = 2

[grid]
nx = 6
ny = 6

[noise]
kind = "power_law"
n1 = 6
n2 = 6
"#;

fn setdm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_setdm"))
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("study.toml");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn converge_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("out");
    let status = setdm()
        .args(["converge", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&out)
        .args(["--seed", "5", "--realizations", "3", "--threads", "2"])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("scheme,dt,rms_error,realizations,flagged_count"));
    assert_eq!(lines.count(), 6);
    assert!(csv.contains(",3,0"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["metadata"]["seed"], 5);
    assert_eq!(json["metadata"]["realizations"], 3);
}

#[test]
fn solve_and_darcy_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let traj = dir.path().join("traj.csv");
    let s = setdm().args(["solve", "--config"]).arg(&cfg).arg("--out").arg(&traj).output().unwrap();
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    let text = std::fs::read_to_string(&traj).unwrap();
    assert!(text.starts_with("index,x,y,value\n"));
    assert_eq!(text.lines().count(), 36 + 1);

    let darcy = dir.path().join("darcy.csv");
    let s = setdm().args(["darcy", "--config"]).arg(&cfg).arg("--out").arg(&darcy).output().unwrap();
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    let text = std::fs::read_to_string(&darcy).unwrap();
    assert!(text.starts_with("i,j,x,y,k,p,qx,qy\n"));
    assert_eq!(text.lines().count(), 36 + 1);
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("t_end = 0.25", "t_end = 0.25\ntend = 1"));
    let s = setdm().args(["converge", "--config"]).arg(&cfg).output().unwrap();
    assert!(!s.status.success());
    assert!(String::from_utf8_lossy(&s.stderr).contains("unknown field"));
}
