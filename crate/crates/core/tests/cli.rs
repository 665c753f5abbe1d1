//! The `hdg5` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

use hdg5::cli::RunConfig;

fn hdg5(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdg5")).args(args).output().expect("spawn hdg5")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_writes_dump_and_error_row() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("field.csv");
    let o = hdg5(&["--problem", "P1", "--k", "1", "--solve", "--N", "32", "--T", "0.1", "--out", path(&dump)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&dump).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("element,x,u,q,p,r,s"));
    // k + 2 samples per element
    assert_eq!(lines.count(), 32 * 3);
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("k,N,h,dt,e_u,eoc_u"));
    let e_u: f64 = rows[1].split(',').nth(4).unwrap().parse().unwrap();
    assert!(e_u > 1e-4 && e_u < 1e-2, "{e_u}");
}

#[test]
fn study_csv_has_one_row_per_level() {
    let o = hdg5(&["--problem", "P1", "--k", "1", "--study", "--levels", "3:5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows[0], "k,N,h,dt,e_u,eoc_u,e_q,eoc_q,e_p,eoc_p,e_r,eoc_r,e_s,eoc_s");
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("1,8,"));
    assert!(rows[1].ends_with(",-"));
    let last: Vec<&str> = rows[3].split(',').collect();
    let order: f64 = last[5].parse().unwrap();
    assert!((order - 2.0).abs() < 0.3, "{order}");
}

#[test]
fn runs_are_bit_identical() {
    let args = ["--problem", "P2", "--k", "2", "--study", "--levels", "3:4"];
    let a = hdg5(&args);
    let b = hdg5(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn bad_values_exit_with_config_error() {
    for args in [
        vec!["--k", "9"],
        vec!["--N", "1"],
        vec!["--T=-1"],
        vec!["--levels", "5:3"],
        vec!["--problem", "P9"],
        vec!["--unknown-flag"],
        vec!["--problem-file", "/nonexistent/problem.toml"],
    ] {
        let o = hdg5(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty());
    }
}

#[test]
fn config_parse_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "k = 2\nn_elemnts = 16\n").unwrap();
    let o = hdg5(&["--config", path(&cfg)]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("n_elemnts"), "{err}");
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn zero_tau_is_refused_with_the_violated_condition() {
    let o = hdg5(&["--tau-preset", "zero", "--problem", "P2", "--solve", "--N", "8"]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("tau_su-"), "{}", stderr(&o));
}

#[test]
fn allow_unstable_overrides_the_refusal() {
    let o = hdg5(&["--tau-preset", "zero", "--problem", "P1", "--solve", "--N", "8", "--T", "0.01", "--allow-unstable"]);
    assert_ne!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn singular_projection_is_a_solver_failure() {
    let o = hdg5(&["--superconvergence", "--k", "1", "--levels", "3:4", "--tau-preset", "zero", "--allow-unstable"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn stability_check_reports_pass_and_fail() {
    let o = hdg5(&["--stability-check", "--problem", "P2"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).lines().any(|l| l == "PASS"), "{}", stdout(&o));
    let o = hdg5(&["--stability-check", "--problem", "P2", "--tau-preset", "zero"]);
    assert_eq!(code(&o), 4);
    let out = stdout(&o);
    assert!(out.lines().any(|l| l.starts_with("FAIL")), "{out}");
    assert!(out.contains("violated"), "{out}");
}

#[test]
fn superconvergence_csv() {
    let o = hdg5(&["--superconvergence", "--k", "1", "--levels", "3:5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 4);
    assert!(out.starts_with("k,N,eps_u,eoc_eps_u"), "{out}");
}

#[test]
fn dumped_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let o = hdg5(&[
        "--problem", "P4", "--k", "3", "--study", "--levels", "2:4", "--dt", "0.001", "--T", "0.05",
        "--tau-preset", "paper-dirichlet", "--dump-config", path(&cfg),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&cfg).unwrap();
    let parsed = RunConfig::from_toml(&text).unwrap();
    assert_eq!(parsed.k, 3);
    assert_eq!(parsed.levels, [2, 4]);
    assert_eq!(parsed.t_final, 0.05);
    // re-dumping the parsed config reproduces the file
    let again = hdg5(&["--config", path(&cfg), "--dump-config"]);
    assert_eq!(code(&again), 0);
    assert_eq!(stdout(&again), text);
    assert_eq!(RunConfig::from_toml(&stdout(&again)).unwrap(), parsed);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "mode = \"study\"\nproblem = \"P3\"\nk = 2\nlevels = [3, 6]\n").unwrap();
    let o = hdg5(&["--config", path(&cfg), "--k", "0", "--dump-config"]);
    assert_eq!(code(&o), 0);
    let c = RunConfig::from_toml(&stdout(&o)).unwrap();
    assert_eq!(c.k, 0);
    assert_eq!(c.levels, [3, 6]);
    assert_eq!(c.problem.map(|p| p.to_string()), Some("P3".into()));
}

#[test]
fn tau_file_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let tau = dir.path().join("tau.toml");
    let table = hdg5::stabilization::StabilizationConfig::paper_periodic();
    std::fs::write(&tau, toml::to_string(&table).unwrap()).unwrap();
    let o = hdg5(&["--stability-check", "--problem", "P1", "--tau-file", path(&tau)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = hdg5(&["--problem", "P1", "--tau-file", path(&tau), "--dump-config"]);
    let c = RunConfig::from_toml(&stdout(&o)).unwrap();
    assert_eq!(c.stabilization(hdg5::mesh::BoundaryKind::Periodic), table);
}

#[test]
fn custom_problem_file_runs() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("p.toml");
    std::fs::write(
        &file,
        "name = \"wave\"\ndomain = [0.0, 6.283185307179586]\nboundary = \"periodic\"\nalpha = 0.0\nbeta = -1.0\n\
         flux = []\n\n[[exact]]\nkind = \"sin\"\na = 1.0\nb = 1.0\n",
    )
    .unwrap();
    let custom = hdg5(&["--problem-file", path(&file), "--k", "2", "--study", "--levels", "3:4"]);
    let builtin = hdg5(&["--problem", "P1", "--k", "2", "--study", "--levels", "3:4"]);
    assert_eq!(code(&custom), 0, "{}", stderr(&custom));
    assert_eq!(stdout(&custom), stdout(&builtin));
}

#[test]
fn help_and_version_exit_zero() {
    let o = hdg5(&["--help"]);
    assert_eq!(code(&o), 0);
    for flag in ["--problem", "--problem-file", "--levels", "--dt-policy", "--tau-preset", "--dump-config", "--allow-unstable"] {
        assert!(stdout(&o).contains(flag), "{flag}");
    }
    assert_eq!(code(&hdg5(&["--version"])), 0);
}
