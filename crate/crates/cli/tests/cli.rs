use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use macgame_cli::Scenario;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_macgame"))
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_scenario(dir: &tempfile::TempDir, text: &str) -> PathBuf {
    let path = dir.path().join("scenario.scn");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn region_prints_total_capacity() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(&dir, "m = 3\npower = 25\nnoise = 0.1\n");
    let o = run(&["region", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    // ln 751
    assert!(text.contains("C{1,2,3} = 6.62140565"), "{text}");
    assert!(text.contains("r_3 = 0.404799551"), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with('C')).count(), 7);
}

#[test]
fn region_face_points_are_seeded() {
    let path = shipped("asym2.scn");
    let a = run(&["region", path.to_str().unwrap(), "--face-points", "5"]);
    let b = run(&["region", path.to_str().unwrap(), "--face-points", "5"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().filter(|l| l.starts_with("face_point")).count(), 5);
}

#[test]
fn check_eq_at_equal_share() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(&dir, "m = 2\nsnr = 1,1\ng = identity\n");
    let o = run(&["check-eq", path.to_str().unwrap(), "--profile", "0.549306,0.549306", "--assert"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("nash: true, strong: true, pareto: true\n"), "{}", stdout(&o));
}

#[test]
fn check_eq_assert_fails_off_the_face() {
    let path = shipped("sym2.scn");
    let o = run(&["check-eq", path.to_str().unwrap(), "--profile", "0.3,0.3", "--assert"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("nash: false, strong: false, pareto: false"));
    let o = run(&["check-eq", path.to_str().unwrap(), "--profile", "0.3,0.3"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn best_response_takes_the_remaining_capacity() {
    let path = shipped("sym2.scn");
    let o = run(&["br", path.to_str().unwrap(), "--user", "1", "--others", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    // the pair constraint binds: ln 3 − 0.5 < ln 2
    let expected = 3f64.ln() - 0.5;
    assert_eq!(stdout(&o).trim(), format!("BR_1 = {expected:.9}"));
    let o = run(&["br", path.to_str().unwrap(), "--user", "2", "--others", "0.1"]);
    assert_eq!(stdout(&o).trim(), format!("BR_2 = {:.9}", 2f64.ln()));
}

#[test]
fn metrics_for_identity_utility() {
    let o = run(&["metrics", shipped("sym2.scn").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("spoa = 1.00000000"), "{text}");
    assert!(text.contains("pos = 1.00000000"), "{text}");
}

#[test]
fn normalized_reports_equal_shares() {
    let o = run(&["normalized", shipped("sym3.scn").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let share = 751f64.ln() / 3.0;
    assert_eq!(text.matches(&format!("= {share:.8} (free)")).count(), 3, "{text}");
}

#[test]
fn normalized_rejects_linear_utility() {
    let o = run(&["normalized", shipped("sym2.scn").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ess_verdicts() {
    let path = shipped("sym2.scn");
    let o = run(&["ess", path.to_str().unwrap(), "--assert"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("ess: true"));
    let below = format!("{}", 0.9 * 3f64.ln() / 2.0);
    let o = run(&["ess", path.to_str().unwrap(), "--resident", &below, "--assert"]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("ess: false"));
    assert!(text.contains("witness: mutant = "), "{text}");
}

#[test]
fn ess_needs_a_symmetric_channel() {
    let o = run(&["ess", shipped("asym2.scn").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("equal SNRs"));
}

#[test]
fn dynamics_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(
        &dir,
        "m = 2\nsnr = 1,1\nprotocol = smith\ntheta = 2\nsteps = 300\nrecord_every = 50\nmethod = montecarlo\nsamples = 200\nseed = 5\n",
    );
    let mut outputs = Vec::new();
    for run_id in 0..2 {
        let trace = dir.path().join(format!("trace{run_id}.csv"));
        let fin = dir.path().join(format!("final{run_id}.csv"));
        let o = run(&[
            "dynamics",
            path.to_str().unwrap(),
            "--trace",
            trace.to_str().unwrap(),
            "--final",
            fin.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push((std::fs::read(&trace).unwrap(), std::fs::read(&fin).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let trace = String::from_utf8(outputs[0].0.clone()).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("t,mean_rate,avg_payoff,velocity_l1,mass_drift"));
    assert_eq!(lines.count(), 7);
    let fin = String::from_utf8(outputs[0].1.clone()).unwrap();
    assert!(fin.starts_with("grid_value,mass\n"));
    assert_eq!(fin.lines().count(), 52);
}

#[test]
fn dynamics_uses_scenario_paths() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    let fin = dir.path().join("f.csv");
    let text = format!(
        "m = 2\nsnr = 1,1\nsteps = 10\ntrace_csv = {}\nfinal_csv = {}\n",
        trace.display(),
        fin.display()
    );
    let path = write_scenario(&dir, &text);
    let o = run(&["dynamics", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(trace.exists() && fin.exists());
}

#[test]
fn verify_passes_on_shipped_scenarios() {
    for name in ["sym2.scn", "sym3.scn", "asym2.scn"] {
        let o = run(&["verify", shipped(name).to_str().unwrap()]);
        let text = stdout(&o);
        assert_eq!(o.status.code(), Some(0), "{name}\n{text}");
        assert!(!text.contains("FAIL"), "{name}\n{text}");
        assert!(text.contains(" 0 failed"), "{text}");
    }
}

#[test]
fn dump_config_round_trips() {
    for name in ["sym2.scn", "sym3.scn", "asym2.scn"] {
        let path = shipped(name);
        let o = run(&["region", path.to_str().unwrap(), "--dump-config"]);
        assert_eq!(o.status.code(), Some(0));
        let original = Scenario::parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(Scenario::parse(&stdout(&o)).unwrap(), original);
    }
}

#[test]
fn scenario_errors_exit_with_usage_status() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(&dir, "m = 2\nsnr = 1,1\nprotocol = smith\ntheta = 0.5\ncolour = red\n");
    let o = run(&["region", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4: theta must be ≥ 1"), "{err}");
    assert!(err.contains("line 5: unknown key `colour`"), "{err}");
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let path = shipped("sym2.scn");
    let o = run(&["br", path.to_str().unwrap(), "--user", "3", "--others", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
