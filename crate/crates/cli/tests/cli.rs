use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

const COARSE: [&str; 4] = ["--set", "solver.dlam=0.1", "--set", "solver.paths=100"];

fn mvhawkes(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvhawkes"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("MVHAWKES_OUT")
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn sha(path: &Path) -> String {
    hex::encode(Sha256::digest(fs::read(path).unwrap()))
}

fn csv_hashes(dir: &Path) -> Vec<(String, String)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), sha(&p)))
        .collect();
    v.sort();
    v
}

#[test]
fn simulate_hawkes_writes_paths_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = mvhawkes(dir.path(), &["simulate-hawkes"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for p in 0..10 {
        let file = dir.path().join(format!("path_{p:04}.csv"));
        let text = fs::read_to_string(&file).unwrap();
        assert_eq!(text.lines().next(), Some("t,lambda_1,N_1"));
    }
    assert!(!dir.path().join("path_0010.csv").exists());
    let summary = fs::read_to_string(dir.path().join("hawkes_summary.csv")).unwrap();
    assert!(summary.starts_with("t,mean_lambda_1,se_lambda_1,expected_lambda_1,within_3se_1"));
    assert!(dir.path().join("config.resolved.toml").exists());
    assert!(!dir.path().join(".lock").exists());
}

#[test]
fn poisson_summary_stays_on_the_decay_curve() {
    let dir = tempfile::tempdir().unwrap();
    let o = mvhawkes(
        dir.path(),
        &[
            "--set",
            "hawkes.beta=[[0.0]]",
            "--set",
            "simulate.paths=200",
            "simulate-hawkes",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = fs::read_to_string(dir.path().join("hawkes_summary.csv")).unwrap();
    for row in summary.lines().skip(1) {
        assert!(row.ends_with(",true"), "{row}");
    }
}

#[test]
fn invalid_parameter_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = mvhawkes(dir.path(), &["--set", "hawkes.alpha=[-1.0]", "simulate-hawkes"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("hawkes.alpha"), "{}", stderr(&o));

    let o = mvhawkes(dir.path(), &["--set", "solver.no_such_key=1", "solve-g"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let o = mvhawkes(
        dir.path(),
        &["--set", "frontier.xi=[1.0]", "frontier", "--poisson", "lambda=0.48"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("frontier.xi"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = mvhawkes(dir.path(), &["--config", "/nonexistent/run.toml", "solve-g"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn solve_g_caches_by_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = COARSE.to_vec();
    args.push("solve-g");

    let first = mvhawkes(dir.path(), &args);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    assert!(stdout(&first).starts_with("solved surface"));
    let csv = dir.path().join("g_surface.csv");
    let h1 = sha(&csv);
    let cached: Vec<_> = fs::read_dir(dir.path().join("cache")).unwrap().collect();
    assert_eq!(cached.len(), 1);
    let cache_file = cached[0].as_ref().unwrap().path();
    let c1 = sha(&cache_file);

    let text = fs::read_to_string(&csv).unwrap();
    let terminal: Vec<_> = text
        .lines()
        .filter(|l| l.starts_with("2.0000000000000000e0,"))
        .collect();
    assert!(!terminal.is_empty());
    // t, lambda_1, g_tilde, se
    assert!(
        terminal
            .iter()
            .all(|l| l.split(',').nth(2) == Some("1.0000000000000000e0")),
        "{terminal:?}"
    );

    let second = mvhawkes(dir.path(), &args);
    assert_eq!(second.status.code(), Some(0));
    assert!(stdout(&second).starts_with("loaded cached surface"));
    assert_eq!(sha(&csv), h1);
    assert_eq!(sha(&cache_file), c1);

    let mut forced = args.clone();
    forced.insert(0, "--force");
    let third = mvhawkes(dir.path(), &forced);
    assert!(stdout(&third).starts_with("solved surface"));
    assert_eq!(sha(&csv), h1);

    // a different seed is a different surface
    let mut reseeded = args.clone();
    reseeded.splice(0..0, ["--seed", "7"]);
    let fourth = mvhawkes(dir.path(), &reseeded);
    assert!(stdout(&fourth).starts_with("solved surface"));
    assert_eq!(fs::read_dir(dir.path().join("cache")).unwrap().count(), 2);
}

#[test]
fn poisson_solve_reports_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = mvhawkes(
        dir.path(),
        &[
            "--set",
            "solver.dlam=0.1",
            "--set",
            "solver.paths=200",
            "--set",
            "hawkes.beta=[[0.0]]",
            "solve-g",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("Poisson closed form 0.867238"), "{}", stdout(&o));
    assert!(stdout(&o).contains("(within 1%)"), "{}", stdout(&o));
}

#[test]
fn poisson_frontier_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let o = mvhawkes(
        dir.path(),
        &[
            "--set",
            "wealth.n_paths=20000",
            "frontier",
            "--poisson",
            "lambda=0.48",
            "--validate",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}\n{}", stdout(&o), stderr(&o));
    let text = fs::read_to_string(dir.path().join("frontier.csv")).unwrap();
    let mut rows = text.lines();
    assert_eq!(rows.next(), Some("xi,theta_star,variance,sd"));
    let first: Vec<f64> = rows.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert!((first[0] - 0.04f64.exp()).abs() < 1e-15);
    assert_eq!(first[2], 0.0);
    assert_eq!(text.lines().count(), 12);

    let w = fs::read_to_string(dir.path().join("wealth_summary.csv")).unwrap();
    assert!(w.lines().nth(1).unwrap().ends_with(",true"));
}

#[test]
fn failed_validation_exits_nonzero() {
    // one step per unit of time freezes the control far too long
    let dir = tempfile::tempdir().unwrap();
    let o = mvhawkes(
        dir.path(),
        &[
            "--set",
            "wealth.n_paths=20000",
            "--set",
            "wealth.dt=1.0",
            "--set",
            "frontier.validate_xi=1.5",
            "frontier",
            "--poisson",
            "lambda=0.48",
            "--validate",
        ],
    );
    assert_eq!(o.status.code(), Some(3), "{}\n{}", stdout(&o), stderr(&o));
    assert!(fs::read_to_string(dir.path().join("wealth_summary.csv"))
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .ends_with(",false"));
}

#[test]
fn locked_output_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join(".lock"), "").unwrap();
    let o = mvhawkes(dir.path(), &["simulate-hawkes"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(!dir.path().join("path_0000.csv").exists());
}

#[test]
fn identical_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "--seed",
        "11",
        "--set",
        "wealth.n_paths=2000",
        "frontier",
        "--poisson",
        "lambda=0.3",
        "--validate",
    ];
    for d in [&a, &b] {
        assert_eq!(
            mvhawkes(d.path(), &["--seed", "11", "simulate-hawkes"]).status.code(),
            Some(0)
        );
        assert_eq!(mvhawkes(d.path(), &args).status.code(), Some(0));
    }
    let ha = csv_hashes(a.path());
    assert!(ha.len() >= 13);
    assert_eq!(ha, csv_hashes(b.path()));
}

#[test]
fn resolved_config_reproduces_the_run() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let o = mvhawkes(
        a.path(),
        &[
            "--seed",
            "5",
            "--set",
            "simulate.paths=3",
            "--set",
            "hawkes.lambda0=[0.9]",
            "simulate-hawkes",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let resolved = a.path().join("config.resolved.toml");
    let o = mvhawkes(b.path(), &["--config", resolved.to_str().unwrap(), "simulate-hawkes"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(csv_hashes(a.path()), csv_hashes(b.path()));
    assert_eq!(
        fs::read_to_string(&resolved)
            .unwrap()
            .replace(&a.path().display().to_string(), ""),
        fs::read_to_string(b.path().join("config.resolved.toml"))
            .unwrap()
            .replace(&b.path().display().to_string(), "")
    );
}
