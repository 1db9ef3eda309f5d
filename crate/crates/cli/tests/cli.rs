use std::path::{Path, PathBuf};
use std::process::Command;

use cavity_node_cli::{load_config, parse_config, run, sweep_rows, ConfigError, RunMode, RunOptions, Verdict};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cavity-node"))
}

fn summary(dir: &Path, prefix: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join(format!("{prefix}_summary.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn shipped_scenarios_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 5);
}

#[test]
fn lossless_trap_end_to_end() {
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["trap", "--config"])
        .arg(scenario("lossless_trap.toml"))
        .arg("--out")
        .arg(out.path())
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    let s = summary(out.path(), "lossless");
    assert_eq!(s["verdict"], "feasible");
    assert_eq!(s["efficiency"]["predicted"].as_f64().unwrap(), 1.0);
    assert!(s["efficiency"]["simulated"].as_f64().unwrap() >= 1.0 - 1e-6);
    assert!(s["efficiency"]["abs_difference"].as_f64().unwrap() <= 1e-6);
    for f in ["lossless_pulse.csv", "lossless_trajectory.csv", "lossless_report.txt"] {
        assert!(out.path().join(f).exists(), "{f}");
    }
    let traj = std::fs::read_to_string(out.path().join("lossless_trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,re_ain,im_ain,re_aout,im_aout,re_g,im_g,re_r,im_r,re_e,im_e,node_prob\n"));
    assert_eq!(traj.lines().count(), 16002);
}

#[test]
fn excess_cavity_loss_exits_with_two() {
    let out = tempfile::tempdir().unwrap();
    let status = bin().arg("--config").arg(scenario("cavity_loss_too_high.toml")).arg("--out").arg(out.path()).output().unwrap();
    assert_eq!(status.status.code(), Some(2));
    let report = std::fs::read_to_string(out.path().join("lossy_cavity_report.txt")).unwrap();
    assert!(report.contains("infeasible"));
}

#[test]
fn bad_config_exits_with_one_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("lossless_trap.toml")).unwrap().replace("g0 = 3.0", "g0 = 3.0\ngama = 0.1");
    let path = dir.path().join("typo.toml");
    std::fs::write(&path, text).unwrap();
    let out = bin().arg("--config").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gama"));
}

#[test]
fn both_node_blocks_are_a_validation_error() {
    let text = std::fs::read_to_string(scenario("lossless_trap.toml")).unwrap()
        + "\n[multinode]\nkappa = 1.0\ncouplings = [3.0]\nbranching = [1.0]\ndeltas = [0.0]\ngammas = [0.0]\n";
    assert!(matches!(parse_config(&text), Err(ConfigError::Validation(_))));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let cfg = load_config(&scenario("detuned_chirped_trap.toml")).unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let opts = RunOptions { out_dir: d.path().to_path_buf(), prefix: "x".into(), workers: Some(1) };
        run(&cfg, RunMode::Trap, &opts).unwrap();
    }
    for f in ["x_pulse.csv", "x_trajectory.csv", "x_summary.json"] {
        let a = std::fs::read(dirs[0].path().join(f)).unwrap();
        let b = std::fs::read(dirs[1].path().join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
}

#[test]
fn sweep_keeps_config_order_and_finds_one_threshold() {
    let cfg = load_config(&scenario("bandwidth_sweep.toml")).unwrap();
    let serial = sweep_rows(&cfg, Some(1)).unwrap();
    let parallel = sweep_rows(&cfg, Some(4)).unwrap();
    // NaN fields defeat PartialEq, so compare the exact printed form
    assert_eq!(format!("{serial:?}"), format!("{parallel:?}"));
    let values = &cfg.sweep.as_ref().unwrap().values;
    assert_eq!(serial.iter().map(|r| r.value).collect::<Vec<_>>(), *values);
    assert!(serial.windows(2).all(|w| w[1].min_margin > w[0].min_margin));
    let flips = serial.windows(2).filter(|w| w[0].feasible != w[1].feasible).count();
    assert_eq!(flips, 1);
    assert!(!serial[0].feasible && serial[19].feasible);
}

#[test]
fn sweep_with_simulation_reports_both_efficiencies() {
    let text = std::fs::read_to_string(scenario("lossy_generate.toml")).unwrap().replace("mode = \"generate\"", "mode = \"sweep\"")
        + "\n[sweep]\nparameter = \"node.gamma_sp\"\nvalues = [0.0, 0.2]\nmode = \"generate\"\n";
    let cfg = parse_config(&text).unwrap();
    let rows = sweep_rows(&cfg, Some(2)).unwrap();
    assert!(rows.iter().all(|r| r.feasible && r.error.is_none()));
    for r in &rows {
        assert!((r.eta_predicted - r.eta_simulated).abs() < 1e-4, "{r:?}");
    }
    assert!(rows[1].eta_predicted < rows[0].eta_predicted);
}

#[test]
fn two_level_trap_reports_closed_form_and_simulation() {
    let cfg = load_config(&scenario("two_level_trap.toml")).unwrap();
    let out = tempfile::tempdir().unwrap();
    let opts = RunOptions { out_dir: out.path().to_path_buf(), prefix: "n2".into(), workers: None };
    let report = run(&cfg, RunMode::Trap, &opts).unwrap();
    assert_eq!(report.verdict, Verdict::Feasible);
    let e = report.efficiency.unwrap();
    assert!(e.abs_difference.unwrap() < 1e-4);
    let header = std::fs::read_to_string(out.path().join("n2_trajectory.csv")).unwrap();
    assert!(header.lines().next().unwrap().contains("re_r_1,im_r_1,re_r_2,im_r_2,re_e"));
}

#[test]
fn adiabatic_and_simulate_verbs() {
    let out = tempfile::tempdir().unwrap();
    let path = scenario("lossless_trap.toml");
    for verb in ["adiabatic", "simulate", "feasibility"] {
        let status = bin().arg(verb).arg("--config").arg(&path).arg("--out").arg(out.path()).output().unwrap();
        assert_eq!(status.status.code(), Some(0), "{verb}: {}", String::from_utf8_lossy(&status.stderr));
        let s = summary(out.path(), "lossless");
        assert_eq!(s["mode"], verb);
    }
    let margin = std::fs::read_to_string(out.path().join("lossless_margin.csv")).unwrap();
    assert!(margin.starts_with("t,margin\n"));
}
