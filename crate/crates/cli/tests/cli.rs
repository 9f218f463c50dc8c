use std::path::Path;
use std::process::{Command, Output};

use coherence_forge::state::{apply_filter, coherence, mean_energy, product_pure_state};
use coherence_forge::{DiagonalFilter, EnergySpectrum};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_coherence-forge"));
    cmd.env_remove("COHERENCE_FORGE_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Value of `key: value` on stdout, first token only.
fn field(o: &Output, key: &str) -> f64 {
    let prefix = format!("{key}: ");
    let line = stdout(o)
        .lines()
        .find(|l| l.starts_with(&prefix))
        .unwrap_or_else(|| panic!("no '{key}' in output:\n{}", stdout(o)))
        .to_string();
    line[prefix.len()..]
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap()
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn filter_equalization_point() {
    let o = run(&[
        "filter",
        "--p",
        "0.1",
        "--ps",
        "0.04",
        "--target",
        "coherence",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!((field(&o, "a") - 1.0 / 9.0).abs() < 1e-11);
    assert!((field(&o, "b") - 1.0 / 3.0).abs() < 1e-11);
    assert!((field(&o, "coherence") - 4f64.ln()).abs() < 1e-11);
    assert!(stdout(&o).contains("(2 bits)"));
}

#[test]
fn filter_identity_at_full_success() {
    let o = run(&["filter", "--p", "0.1", "--ps", "1.0", "--target", "energy"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(field(&o, "a"), 1.0);
    assert_eq!(field(&o, "b"), 1.0);
    assert!((field(&o, "mean_energy") - 0.2).abs() < 1e-12);
    assert!((field(&o, "coherence") - 0.650165946783).abs() < 1e-11);
}

#[test]
fn filter_out_of_range_is_domain_error() {
    let o = run(&[
        "filter", "--p", "0.1", "--ps", "0.005", "--target", "energy",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("P_S below p²"), "{}", stderr(&o));
}

#[test]
fn malformed_flags_are_usage_errors() {
    assert_eq!(
        run(&["filter", "--p", "0.1", "--ps", "abc"]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["filter", "--ps", "0.5"]).status.code(), Some(1));
    assert_eq!(run(&["nonsense"]).status.code(), Some(1));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn filter_modes_agree_and_write_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.json");
    let closed = run(&[
        "filter",
        "--p",
        "0.2",
        "--ps",
        "0.5",
        "--mode",
        "closed-form",
    ]);
    let general = run(&[
        "filter",
        "--p",
        "0.2",
        "--ps",
        "0.5",
        "--mode",
        "general",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(general.status.code(), Some(0));
    assert!((field(&closed, "coherence") - field(&general, "coherence")).abs() < 1e-10);
    let f: DiagonalFilter = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(f.dim(), 4);

    let mixed = run(&[
        "filter", "--p", "0.2", "--eta", "0.75", "--ps", "0.3", "--mode", "tsallis",
    ]);
    assert_eq!(mixed.status.code(), Some(0), "{}", stderr(&mixed));
    assert!((field(&mixed, "p_success") - 0.3).abs() < 1e-10);
    let bad = run(&[
        "filter",
        "--p",
        "0.2",
        "--eta",
        "0.75",
        "--ps",
        "0.3",
        "--mode",
        "closed-form",
    ]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn state_file_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let state = product_pure_state(0.1, 2).unwrap();
    std::fs::write(&path, serde_json::to_string(&state).unwrap()).unwrap();
    let o = run(&[
        "oracle",
        "--state",
        path.to_str().unwrap(),
        "--ps",
        "0.19",
        "--target",
        "energy",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).trim_end().ends_with("PASS"));
    let missing = run(&["oracle", "--state", "/nonexistent/s.json", "--ps", "0.5"]);
    assert_eq!(missing.status.code(), Some(3));
    std::fs::write(&path, "{\"dim\": 2}").unwrap();
    let broken = run(&["oracle", "--state", path.to_str().unwrap(), "--ps", "0.5"]);
    assert_eq!(broken.status.code(), Some(2));
}

#[test]
fn frontier_factorized_endpoints() {
    let o = run(&[
        "frontier",
        "--p",
        "0.1",
        "--family",
        "factorized",
        "--grid",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(
        header,
        [
            "p_success",
            "coherence_nats",
            "mean_energy",
            "a",
            "b",
            "family"
        ]
    );
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][4], "0");
    assert_eq!(rows[1][4], "1");
    assert!(rows.iter().all(|r| r[5] == "factorized"));
}

#[test]
fn frontier_csv_contents_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("f.csv");
    let svg = dir.path().join("f.svg");
    let o = run(&[
        "frontier",
        "--p",
        "0.1",
        "--family",
        "both",
        "--out-csv",
        csv.to_str().unwrap(),
        "--out-svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(!text.contains('\r'));
    let (_, rows) = csv_rows(&text);
    assert_eq!(rows.len(), 400);
    assert!(rows
        .iter()
        .any(|r| r[0] == "0.04" && r[1].starts_with("1.386294") && r[5] == "optimal"));

    // Every row re-validates from its (a, b) parameters.
    let state = product_pure_state(0.1, 2).unwrap();
    let spectrum = EnergySpectrum::two_qubit();
    for r in &rows {
        let (a, b): (f64, f64) = (r[3].parse().unwrap(), r[4].parse().unwrap());
        let f = DiagonalFilter::from_real(&[a, b, b, 1.0]).unwrap();
        let (out, ps) = apply_filter(&state, &f).unwrap();
        assert!((ps - r[0].parse::<f64>().unwrap()).abs() < 1e-9);
        assert!(
            (coherence(&out) - r[1].parse::<f64>().unwrap()).abs() < 1e-9,
            "{r:?}"
        );
        assert!(
            (mean_energy(&out, &spectrum).unwrap() - r[2].parse::<f64>().unwrap()).abs() < 1e-9
        );
    }

    // Optimal on or above factorized wherever both sampled the same P_S.
    let opt: Vec<_> = rows.iter().filter(|r| r[5] == "optimal").collect();
    for f in rows.iter().filter(|r| r[5] == "factorized") {
        if let Some(o) = opt.iter().find(|o| o[0] == f[0]) {
            assert!(o[1].parse::<f64>().unwrap() >= f[1].parse::<f64>().unwrap() - 1e-9);
        }
    }

    let plot = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(plot.matches("<polyline").count(), 2);
    assert!(plot.contains(">optimal<") && plot.contains(">factorized<"));
}

#[test]
fn frontier_is_byte_deterministic() {
    let a = run(&[
        "frontier", "--p", "0.3", "--target", "energy", "--grid", "50",
    ]);
    let b = run(&[
        "frontier",
        "--p",
        "0.3",
        "--target",
        "energy",
        "--grid",
        "50",
        "--threads",
        "1",
    ]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn frontier_unwritable_path() {
    let o = run(&[
        "frontier",
        "--p",
        "0.1",
        "--out-csv",
        "/nonexistent/dir/f.csv",
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn frontier_verify_reports_pass() {
    let o = run(&[
        "frontier", "--p", "0.1", "--grid", "40", "--verify", "4", "--seed", "7",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("verify optimal: 4 samples"));
    assert!(stderr(&o).contains("PASS"));
}

fn mixed(eta: &str, extra: &[&str]) -> Vec<Vec<f64>> {
    let mut args = vec!["mixed-scan", "--eta", eta];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(
        header,
        [
            "p",
            "eta",
            "coherence_nats",
            "mean_energy",
            "b_opt",
            "input_coherence",
            "input_energy"
        ]
    );
    rows.iter()
        .map(|r| r.iter().map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn mixed_scan_examples() {
    let pure = mixed("1", &["--p-min", "0.1", "--p-max", "0.2", "--steps", "2"]);
    assert!(pure[0][2] > pure[0][5] && pure[0][3] > pure[0][6]);

    for row in mixed("0", &["--steps", "5"]) {
        assert_eq!(row[2], 0.0);
    }

    let plateau = mixed(
        "0.75",
        &["--p-min", "0.1", "--p-max", "0.3", "--steps", "3"],
    );
    assert!((plateau[0][2] - plateau[2][2]).abs() < 1e-6);
    assert!((plateau[0][3] - plateau[2][3]).abs() < 1e-6);
}

#[test]
fn mixed_scan_threshold_and_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("m.csv");
    let o = run(&[
        "mixed-scan",
        "--eta",
        "1",
        "--threshold",
        "--out-csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let th: f64 = stdout(&o)
        .lines()
        .find_map(|l| l.strip_prefix("plateau threshold: p_th = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((th - 0.5).abs() < 1e-6);
    assert_eq!(
        run(&["mixed-scan", "--eta", "1", "--steps", "1"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn iterate_examples() {
    let id = run(&[
        "iterate", "--p", "0.1", "--stages", "1", "--a", "1", "--b", "1",
    ]);
    assert_eq!(id.status.code(), Some(0));
    assert_eq!(field(&id, "sequential_residual"), 0.0);
    assert!((field(&id, "p_total") - 1.0).abs() < 1e-12);

    let two = run(&[
        "iterate", "--p", "0.1", "--stages", "2", "--a", "0", "--b", "1",
    ]);
    assert_eq!(two.status.code(), Some(0));
    assert!(field(&two, "sequential_residual") <= 1e-10);
    assert!(field(&two, "direct_simulation_residual") <= 1e-10);
    assert!(field(&two, "coherence_iterative") <= field(&two, "coherence_single_copy") + 1e-6);
    assert!(stdout(&two).trim_end().ends_with("PASS"));

    assert_eq!(
        run(&["iterate", "--p", "0.1", "--stages", "3"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn iterate_writes_kraus_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.json");
    let o = run(&["iterate", "--p", "0.3", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["kraus"]["operators"].as_array().unwrap().len(), 4);
    assert!(v["povm"]["plus"].is_array());
}

#[test]
fn choi_examples() {
    let ideal = run(&["choi", "--a", "0.32", "--b", "0.8"]);
    assert_eq!(ideal.status.code(), Some(0));
    for key in ["purity", "fidelity", "fidelity_compensated"] {
        assert!((field(&ideal, key) - 1.0).abs() < 1e-12);
    }

    let shifted = run(&[
        "choi",
        "--a",
        "0.32",
        "--b",
        "0.8",
        "--phases",
        "0,0.2,-0.1,0",
    ]);
    assert!(field(&shifted, "fidelity") < 1.0);
    assert!((field(&shifted, "fidelity_compensated") - 1.0).abs() < 1e-9);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chi.json");
    let zero = run(&[
        "choi",
        "--a",
        "0",
        "--b",
        "0",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(zero.status.code(), Some(0));
    let chi: coherence_forge::optics::ChoiMatrix =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(chi.matrix()[(15, 15)].re, 1.0);
    assert!((chi.trace() - 1.0).abs() < 1e-15);
    assert!((field(&zero, "fidelity") - 1.0).abs() < 1e-12);

    assert_eq!(
        run(&["choi", "--a", "0.1", "--b", "0.5", "--phases", "0,1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["choi", "--a", "1.5", "--b", "0.5"]).status.code(),
        Some(2)
    );
}

#[test]
fn optics_bare_ppbs() {
    let t_v = (1.0f64 / 3.0).sqrt().to_string();
    let o = run(&["optics", "--ppbs", &format!("1,{t_v}")]);
    assert_eq!(o.status.code(), Some(0));
    assert!((field(&o, "a") - 1.0 / 3.0).abs() < 1e-11);
    assert!((field(&o, "b") - (1.0f64 / 3.0).sqrt()).abs() < 1e-11);
    assert!(stdout(&o).contains("a <= b^2: yes"));
    assert_eq!(
        run(&["optics", "--attenuations", "1,1"]).status.code(),
        Some(1)
    );
    assert_eq!(
        run(&["optics", "--attenuations", "0,0,0,0"]).status.code(),
        Some(2)
    );
}

#[test]
fn oracle_examples() {
    let e = run(&[
        "oracle",
        "--p",
        "0.1",
        "--ps",
        "0.19",
        "--target",
        "energy",
        "--grid-step",
        "0.02",
    ]);
    assert_eq!(e.status.code(), Some(0));
    assert!(stdout(&e).trim_end().ends_with("PASS"));

    let full = run(&["oracle", "--p", "0.1", "--ps", "1"]);
    assert!(stdout(&full).trim_end().ends_with("PASS"));

    let stub = run(&[
        "oracle",
        "--p",
        "0.1",
        "--ps",
        "0.04",
        "--synthesizer",
        "identity",
    ]);
    assert_eq!(stub.status.code(), Some(0));
    assert!(stdout(&stub).trim_end().ends_with("FAIL"));
    assert!(field(&stub, "shortfall") > 1e-3);

    let tight = run(&[
        "oracle",
        "--p",
        "0.1",
        "--ps",
        "0.123",
        "--grid-step",
        "0.5",
        "--tolerance",
        "1e-6",
    ]);
    assert_eq!(tight.status.code(), Some(2));
}

#[test]
fn config_file_and_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "# two-qubit run\np = 0.1\nps = 0.04\ntarget = coherence\nlog-base = 2\n",
    )
    .unwrap();
    let o = run(&["filter", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!((field(&o, "coherence") - 4f64.ln()).abs() < 1e-11);
    assert!((field(&o, "coherence_reported") - 2.0).abs() < 1e-11);

    let over = run(&["filter", "--config", cfg.to_str().unwrap(), "--ps", "1"]);
    assert!((field(&over, "p_success") - 1.0).abs() < 1e-12);

    std::fs::write(&cfg, "bogus-key = 3\n").unwrap();
    assert_eq!(
        run(&["filter", "--config", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        run(&["filter", "--config", "/nonexistent.cfg"])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn spectrum_and_threads() {
    let o = run(&[
        "filter",
        "--p",
        "0.1",
        "--ps",
        "0.5",
        "--target",
        "energy",
        "--mode",
        "general",
        "--spectrum",
        "0,1,1.5,2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let bad = run(&["filter", "--p", "0.1", "--ps", "0.5", "--spectrum", "0,1,2"]);
    assert_eq!(bad.status.code(), Some(2));
    let unordered = run(&[
        "filter",
        "--p",
        "0.1",
        "--ps",
        "0.5",
        "--spectrum",
        "0,2,1,3",
    ]);
    assert_eq!(unordered.status.code(), Some(2));
    let three = run(&["filter", "--p", "0.1", "--qubits", "3", "--ps", "0.5"]);
    assert_eq!(three.status.code(), Some(1));

    let env = bin()
        .env("COHERENCE_FORGE_THREADS", "2")
        .args(["frontier", "--p", "0.1", "--grid", "10"])
        .output()
        .unwrap();
    assert_eq!(env.status.code(), Some(0));
    let bad_env = bin()
        .env("COHERENCE_FORGE_THREADS", "many")
        .args(["frontier", "--p", "0.1"])
        .output()
        .unwrap();
    assert_eq!(bad_env.status.code(), Some(1));
    assert_eq!(
        run(&["--threads", "0", "frontier", "--p", "0.1"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn help_lists_subcommands() {
    let o = run(&["--help"]);
    let text = stdout(&o);
    for sub in [
        "filter",
        "frontier",
        "mixed-scan",
        "iterate",
        "choi",
        "optics",
        "oracle",
    ] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
    assert!(Path::new(env!("CARGO_BIN_EXE_coherence-forge")).exists());
}
