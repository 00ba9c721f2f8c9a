use std::path::Path;
use std::process::{Command, Output};

use lpkin_core::snapshot;
use lpkin_core::state::{maxwellian, Distribution, VelocityGrid};

const BIN: &str = env!("CARGO_BIN_EXE_lpkin");

const BASE: &str = r#"
dimension = 2
[grid]
n = 12
radius = 5.0
[kernel]
gamma = 1.0
angular = { type = "constant", c = 0.15915494309189535 }
"#;

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_config_is_a_usage_error() {
    let o = run(&[
        "check",
        "--config",
        "/nonexistent/run.toml",
        "--suite",
        "estim1",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cannot read"), "{}", stderr(&o));
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", BASE);
    let o = run(&["check", "--config", &cfg, "--suite", "estim9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("possible values"));
}

#[test]
fn incompatible_weight_names_the_condition() {
    let dir = tempfile::tempdir().unwrap();
    let text = BASE.replace(
        r#"{ type = "constant", c = 0.15915494309189535 }"#,
        r#"{ type = "singular", strength = 1.0, nu = -1.5 }"#,
    ) + "[[norms]]\np = 1.5\nq = 1.0\n";
    let cfg = write(dir.path(), "run.toml", &text);
    let o = run(&["check", "--config", &cfg, "--suite", "fonc"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("requires pq ≥ 2"), "{}", stderr(&o));
}

#[test]
fn ensemble_without_seed_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        &format!("{BASE}[ensemble]\nsize = 2\n"),
    );
    let o = run(&["check", "--config", &cfg, "--suite", "estim1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"), "{}", stderr(&o));
}

#[test]
fn configured_matrix_check_passes_and_emits_reports() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{BASE}[[norms]]\np = 2.0\nq = 1.0\n[ensemble]\nsize = 2\nseed = 11\n[suite]\nmatrix = \"configured\"\n");
    let cfg = write(dir.path(), "run.toml", &text);
    let out = dir.path().join("reports.json");
    let o = run(&[
        "check",
        "--config",
        &cfg,
        "--suite",
        "estim5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let reports: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(reports.len(), 2);
    for r in &reports {
        assert_eq!(r["name"], "estim5");
        assert_eq!(r["pass"], true);
        assert_eq!(r["seed"], 11);
        for key in ["lhs", "rhs", "margin", "constants", "convergence"] {
            assert!(r.get(key).is_some(), "missing {key}");
        }
    }
}

#[test]
fn equilibrium_trajectory_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../configs/equilibrium.toml"
    );
    let out = dir.path().join("traj.csv");
    let o = run(&["simulate", "--config", cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert!(rows.len() > 2);
    for name in ["mass", "energy", "entropy"] {
        let c = col(name);
        let first = rows[0][c];
        for r in &rows {
            assert!(
                (r[c] - first).abs() <= 5e-3 * first.abs(),
                "{name} drifted: {} vs {first}",
                r[c]
            );
        }
    }
}

fn save(dir: &Path, name: &str, f: &Distribution) -> String {
    let p = dir.join(name);
    snapshot::save(f, &p).unwrap();
    p.to_str().unwrap().to_string()
}

fn load_part(prefix: &Path, part: &str) -> Vec<f64> {
    let p = format!("{}_{part}.csv", prefix.display());
    let (_, values) = snapshot::read_csv(std::fs::File::open(p).unwrap()).unwrap();
    values
}

#[test]
fn collide_outputs_gain_loss_and_total() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", BASE);
    let grid = VelocityGrid::new(2, 12, 5.0).unwrap();
    let prefix = dir.path().join("q");
    let prefix_s = prefix.to_str().unwrap();

    let zero = save(dir.path(), "zero.csv", &Distribution::zeros(grid));
    let o = run(&["collide", "--config", &cfg, &zero, &zero, "--out", prefix_s]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for part in ["gain", "loss", "q"] {
        assert!(load_part(&prefix, part).iter().all(|x| *x == 0.0));
    }

    let m = save(
        dir.path(),
        "m.csv",
        &maxwellian(grid, 1.0, &[0.0, 0.0], 1.0).unwrap(),
    );
    let o = run(&["collide", "--config", &cfg, &m, &m, "--out", prefix_s]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let l1 = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>();
    let q = load_part(&prefix, "q");
    let loss = load_part(&prefix, "loss");
    assert!(l1(&q) < 0.2 * l1(&loss), "{} vs {}", l1(&q), l1(&loss));

    let other = VelocityGrid::new(2, 10, 5.0).unwrap();
    let m10 = save(
        dir.path(),
        "m10.csv",
        &maxwellian(other, 1.0, &[0.0, 0.0], 1.0).unwrap(),
    );
    let o = run(&["collide", "--config", &cfg, &m, &m10, "--out", prefix_s]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("different grids"), "{}", stderr(&o));
}
