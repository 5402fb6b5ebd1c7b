use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pathflow_cli::results::read_results;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn pathflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathflow"))
        .args(args)
        .env_remove("PATHFLOW_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

const SPHERE_QI: &str = r#"
manifold = "sphere2"
steps = 64
samples = 200
seed = 3

[r]
preset = "constant"
values = [1.0, 0.0, 0.0]

[phi]
preset = "linear"
coeffs = [0.0, 0.0, 1.0]

[flow]
s = 0.25
ds = 0.0625
"#;

#[test]
fn missing_config_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.toml");
    let out = pathflow(&["ibp", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.toml"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(pathflow(&["ibp"]).status.code(), Some(2));
    assert_eq!(pathflow(&["integrate"]).status.code(), Some(2));
    assert_eq!(pathflow(&["qi", "--mode", "rk4"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        "manifold = \"circle\"\nsample = 10\n",
    );
    assert_eq!(
        pathflow(&["simulate", "--config", &cfg]).status.code(),
        Some(2)
    );
    let cfg = write_config(
        dir.path(),
        "nophi.toml",
        "manifold = \"circle\"\nsamples = 100\n",
    );
    let out = dir.path().join("x.csv");
    let args = ["ibp", "--config", &cfg, "--out", out.to_str().unwrap()];
    assert_eq!(pathflow(&args).status.code(), Some(2));
    let out = pathflow(&["simulate", "--config", &cfg, "--threads", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_flow_time_gives_an_exact_zero_difference() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "qi.toml",
        &SPHERE_QI.replace("s = 0.25", "s = 0.0"),
    );
    let out = dir.path().join("qi.csv");
    let run = pathflow(&["qi", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(
        run.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let rows = read_results(&out).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(
        (rows[0].diff_mean, rows[0].diff_se, rows[0].z),
        (0.0, 0.0, 0.0)
    );
    assert!(rows[0].pass);
}

#[test]
fn circle_ibp_config_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ibp.csv");
    let cfg = configs().join("circle-ibp.toml");
    let run = pathflow(&[
        "ibp",
        "--config",
        cfg.to_str().unwrap(),
        "--samples",
        "20000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        run.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&run.stdout)
    );
    let rows = read_results(&out).unwrap();
    assert_eq!(
        rows.iter().map(|r| r.command.as_str()).collect::<Vec<_>>(),
        ["ibp", "ibp/analytic"]
    );
    assert!(rows
        .iter()
        .all(|r| r.pass && r.n_samples == 20_000 && r.manifold == "circle"));
}

#[test]
fn failed_check_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    // both sides estimate E[z_T], which is nowhere near 5
    let cfg = write_config(
        dir.path(),
        "qi.toml",
        &format!("analytic = 5.0\n{SPHERE_QI}"),
    );
    let out = dir.path().join("qi.csv");
    let run = pathflow(&["qi", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(1));
    let rows = read_results(&out).unwrap();
    assert!(
        !rows
            .iter()
            .find(|r| r.command == "qi/analytic")
            .unwrap()
            .pass
    );
}

#[test]
fn manifest_records_the_resolved_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "qi.toml", SPHERE_QI);
    let out = dir.path().join("nested/qi.csv");
    let run = pathflow(&[
        "qi",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "11",
        "--mode",
        "heun",
        "--threads",
        "2",
    ]);
    assert_eq!(
        run.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let manifest = std::fs::read_to_string(dir.path().join("nested/qi.csv.manifest.toml")).unwrap();
    for needle in [
        "command = \"qi\"",
        "seed = 11",
        "threads = 2",
        &format!("version = \"{}\"", env!("CARGO_PKG_VERSION")),
        "mode = \"heun\"",
        "[config.phi]",
    ] {
        assert!(
            manifest.contains(needle),
            "{needle} missing from\n{manifest}"
        );
    }
    let rows = read_results(&out).unwrap();
    assert!(rows.iter().all(|r| r.seed == 11 && r.wall_time_s == 0.0));
}

#[test]
fn timing_flag_records_wall_times() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "qi.toml", SPHERE_QI);
    let out = dir.path().join("qi.csv");
    let run = pathflow(&[
        "qi",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--timing",
    ]);
    assert_eq!(run.status.code(), Some(0));
    assert!(read_results(&out).unwrap()[0].wall_time_s > 0.0);
}

#[test]
fn thread_count_does_not_change_the_results_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "qi.toml", SPHERE_QI);
    let bytes = |threads: &str| {
        let out = dir.path().join(format!("qi-{threads}.csv"));
        let run = Command::new(env!("CARGO_BIN_EXE_pathflow"))
            .args(["qi", "--config", &cfg, "--out", out.to_str().unwrap()])
            .env("PATHFLOW_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(run.status.code(), Some(0));
        std::fs::read(out).unwrap()
    };
    assert_eq!(bytes("1"), bytes("3"));
}

#[test]
fn every_command_runs_on_a_small_config() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
manifold = "torus1"
steps = 32
samples = 100
seed = 2

[r]
preset = "linear"
values = [2.0]

[phi]
preset = "cosine"
wavevector = [1.0]

[flow]
s = 0.5
ds = 0.125

[geometry]
points = 5

[convergence]
levels = [8, 16]
refine = 2
paths = 2
flow_ds = [0.25, 0.125]
flow_reference = 0.0625
flow_paths = 2

[divergence]
exact_paths = 5
"#;
    let cfg = write_config(dir.path(), "torus.toml", text);
    for command in [
        "geometry-check",
        "simulate",
        "divergence",
        "flow",
        "ibp",
        "qi",
        "convergence",
    ] {
        let out = dir.path().join(format!("{command}.csv"));
        let run = pathflow(&[command, "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(
            run.status.code(),
            Some(0),
            "{command}: {}{}",
            String::from_utf8_lossy(&run.stdout),
            String::from_utf8_lossy(&run.stderr)
        );
        let rows = read_results(&out).unwrap();
        assert!(!rows.is_empty());
        assert!(rows.iter().all(
            |r| r.command.starts_with(command.split('-').next().unwrap())
                || r.command.starts_with("density")
        ));
    }
}
