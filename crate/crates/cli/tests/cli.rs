use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn inforef(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inforef")).args(args).output().unwrap()
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout_value(out: &Output, key: &str) -> f64 {
    let text = String::from_utf8_lossy(&out.stdout);
    let line = text
        .lines()
        .find(|l| l.starts_with(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {text}"));
    line[key.len() + 1..].parse().unwrap()
}

#[test]
fn validate_reports_ok_and_errors() {
    let ok = inforef(&["validate", s(&fixtures().join("weather.id"))]);
    assert!(ok.status.success());

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.id");
    let text = fs::read_to_string(fixtures().join("weather.id")).unwrap();
    fs::write(&bad, text.replacen("0.7", "0.6", 1)).unwrap();
    let out = inforef(&["validate", s(&bad)]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));

    assert_eq!(inforef(&["validate", "/no/such/file.id"]).status.code(), Some(2));
    let garbage = dir.path().join("garbage.id");
    fs::write(&garbage, "chance X {{{").unwrap();
    assert_eq!(inforef(&["validate", s(&garbage)]).status.code(), Some(2));
}

#[test]
fn maze_solve_refine_eval_agree() {
    let dir = tempfile::tempdir().unwrap();
    let id = dir.path().join("corridor.id");
    let maze = fixtures().join("mazes/corridor.txt");
    assert!(inforef(&["maze", s(&maze), "--stages", "2", "--out", s(&id)])
        .status
        .success());

    let table = dir.path().join("dp.txt");
    let solved = inforef(&["solve", s(&id), "--out", s(&table)]);
    assert!(solved.status.success());
    assert_eq!(stdout_value(&solved, "ev"), 1.0);
    assert_eq!(stdout_value(&inforef(&["eval", s(&id), s(&table)]), "ev"), 1.0);

    let policy = dir.path().join("policy.txt");
    let profile = dir.path().join("profile.csv");
    let refined = inforef(&["refine", s(&id), "--policy", s(&policy), "--profile", s(&profile)]);
    assert!(refined.status.success());
    let final_ev = stdout_value(&refined, "final_ev");
    let csv = fs::read_to_string(&profile).unwrap();
    assert!(csv.contains("N,queries,ev,ev_normalized,wall_ms\n"));
    assert!(csv.trim_end().ends_with(&format!("# final_ev={final_ev}")));
    let evaluated = stdout_value(&inforef(&["eval", s(&id), s(&policy)]), "ev");
    assert!((evaluated - final_ev).abs() < 1e-9);
}

#[test]
fn simulation_cross_check_on_noisy_maze() {
    let dir = tempfile::tempdir().unwrap();
    let id = dir.path().join("rooms.id");
    let config = dir.path().join("rooms.toml");
    fs::copy(fixtures().join("mazes/rooms.txt"), dir.path().join("rooms.txt")).unwrap();
    fs::write(
        &config,
        "maze = \"rooms.txt\"\nstages = 3\nsensor = \"noisy\"\nactuator = \"noisy\"\n",
    )
    .unwrap();
    assert!(inforef(&["maze", "--config", s(&config), "--out", s(&id)])
        .status
        .success());
    let policy = dir.path().join("policy.txt");
    assert!(
        inforef(&["refine", s(&id), "--max-extensions", "5", "--policy", s(&policy)])
            .status
            .success()
    );
    let out = inforef(&["eval", s(&id), s(&policy), "--simulate", "20000", "--seed", "5"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("agree=true"));
}

#[test]
fn guard_and_mismatch_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let id = dir.path().join("rooms.id");
    let maze = fixtures().join("mazes/rooms.txt");
    assert!(inforef(&["maze", s(&maze), "--stages", "4", "--out", s(&id)])
        .status
        .success());
    let out = inforef(&["solve", s(&id)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds"));

    let weather = fixtures().join("weather.id");
    let policy = dir.path().join("policy.txt");
    assert!(inforef(&["refine", s(&weather), "--policy", s(&policy)])
        .status
        .success());
    assert_eq!(inforef(&["eval", s(&id), s(&policy)]).status.code(), Some(1));

    let bad_maze = dir.path().join("bad.txt");
    fs::write(&bad_maze, "..\n..\n").unwrap();
    assert_eq!(inforef(&["maze", s(&bad_maze), "--out", s(&id)]).status.code(), Some(2));
}

#[test]
fn plot_data_and_ledger_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let weather = fixtures().join("weather.id");
    let plot = dir.path().join("plot.csv");
    let ledger = dir.path().join("ledger.csv");
    let out = inforef(&[
        "refine",
        s(&weather),
        "--emit-plot-data",
        s(&plot),
        "--ledger",
        s(&ledger),
    ]);
    assert!(out.status.success());
    assert!(fs::read_to_string(&plot)
        .unwrap()
        .starts_with("N,queries,ev_normalized\n"));
    let ledger = fs::read_to_string(&ledger).unwrap();
    assert!(ledger.starts_with("category,count\n"));
    let queries = stdout_value(&out, "queries") as u64;
    let sum: u64 = ledger
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(sum, queries);
}
