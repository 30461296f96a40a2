use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use phnet::models::{self, TwoMassParams};
use phnet::nalgebra::DVector;
use phnet::{energy_report, implicit_midpoint, zero_input, LinearPhSystem};
use phnet_cli::document::{self, parse_document, Loaded};
use phnet_cli::table;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn phnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phnet")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn load_system(path: &Path) -> LinearPhSystem {
    match parse_document(&std::fs::read_to_string(path).unwrap()).unwrap() {
        Loaded::System(s) => s,
        other => panic!("expected a linear system, found {}", other.kind()),
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn two_mass_fixture_matches_the_constructor() {
    let expected = models::two_mass(&TwoMassParams::default()).unwrap();
    assert_eq!(load_system(&fixture("two_mass.json")), expected);
    assert_eq!(load_system(&fixture("two_mass_model.json")), expected);
}

#[test]
fn documents_roundtrip_exactly() {
    let mut docs = vec![
        document::system_to_json(&load_system(&fixture("oscillator.json"))),
        document::system_to_json(&models::two_mass(&TwoMassParams { m1: 0.7, r2: 0.3, ..Default::default() }).unwrap()),
    ];
    for (name, network) in [("poroelastic", true), ("maxwell", true), ("maxwell", false), ("two-mass", true)] {
        let loaded = document::build_model(name, &Default::default(), network).unwrap();
        docs.push(document::loaded_to_json(&loaded).unwrap());
    }
    for text in docs {
        let once = parse_document(&text).unwrap();
        let again = document::loaded_to_json(&once).unwrap();
        assert_eq!(again, text);
        match (once, parse_document(&again).unwrap()) {
            (Loaded::System(a), Loaded::System(b)) => assert_eq!(a, b),
            (Loaded::Network(a), Loaded::Network(b)) => assert_eq!(a, b),
            _ => panic!("kind changed"),
        }
    }
}

#[test]
fn trajectory_table_roundtrips_bitwise() {
    let sys = models::two_mass(&TwoMassParams::default()).unwrap();
    let x0 = DVector::from_vec(vec![1.0, 0.5, -0.3, 0.2, 0.1]);
    let traj = implicit_midpoint(&sys, &zero_input(0), &x0, 0.0, 1.0, 0.01).unwrap();
    let rep = energy_report(&traj, &sys).unwrap();
    let mut buf = Vec::new();
    table::write_trajectory(&mut buf, &traj, &rep, 5).unwrap();
    let back = table::read_trajectory(buf.as_slice()).unwrap();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back.times), bits(traj.times()));
    assert_eq!(bits(&back.energy), bits(traj.energy()));
    assert_eq!(back.states, traj.states());
    let residuals: Vec<f64> = back.residuals.iter().map(|r| r.unwrap()).collect();
    assert_eq!(bits(&residuals), bits(&rep.residuals));
}

#[test]
fn empty_trajectory_writes_only_the_header() {
    let sys = load_system(&fixture("oscillator.json"));
    let x0 = DVector::from_vec(vec![1.0, 0.0]);
    let traj = implicit_midpoint(&sys, &zero_input(0), &x0, 0.0, 0.0, 0.1).unwrap();
    let rep = energy_report(&traj, &sys).unwrap();
    let mut buf = Vec::new();
    table::write_trajectory(&mut buf, &traj, &rep, 2).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("t,x1,x2,H,balance_residual\n"));
}

#[test]
fn validate_exit_codes() {
    let ok = phnet(&["validate", p(&fixture("two_mass.json"))]);
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    let bad = phnet(&["validate", p(&fixture("bad_dissipation.json"))]);
    assert_eq!(code(&bad), 2);
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL"));
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\"version\": 1,\n \"J\": [[0, 1],\n").unwrap();
    let out = phnet(&["validate", p(&broken)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("line"), "{}", stderr(&out));
    assert_eq!(code(&phnet(&["validate", "/nonexistent/file.json"])), 1);
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(code(&phnet(&["frobnicate"])), 1);
    assert_eq!(code(&phnet(&["simulate", p(&fixture("oscillator.json")), "--t1", "1"])), 1);
    let help = phnet(&["--help"]);
    assert_eq!(code(&help), 0);
    assert!(String::from_utf8_lossy(&help.stdout).contains("simulate"));
    let bad_grid = phnet(&["simulate", p(&fixture("oscillator.json")), "--x0", "1,0", "--t1", "1", "--dt", "0.3"]);
    assert_eq!(code(&bad_grid), 1);
    let wrong_x0 = phnet(&["simulate", p(&fixture("oscillator.json")), "--x0", "1", "--t1", "1", "--dt", "0.1"]);
    assert_eq!(code(&wrong_x0), 1);
}

#[test]
fn failed_port_verification_exits_3_with_residual() {
    let out = phnet(&[
        "decouple",
        p(&fixture("two_mass.json")),
        "--partition",
        "2,3",
        "--order",
        "0,3,1,2,4",
        "--ports",
        p(&fixture("alternate_ports.json")),
    ]);
    assert_eq!(code(&out), 3);
    let err = stderr(&out);
    assert!(err.contains("(0, 1)") && err.contains("[-1, 1, 0]"), "{err}");
}

#[test]
fn decouple_then_condense_recovers_the_system() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net.json");
    let mono = dir.path().join("mono.json");
    let out = phnet(&["decouple", p(&fixture("two_mass.json")), "--partition", "3,2", "-o", p(&net)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = phnet(&["condense", p(&net), "-o", p(&mono)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let original = load_system(&fixture("two_mass.json"));
    let back = load_system(&mono);
    assert!((back.structure() - original.structure()).amax() <= 1e-14);
    assert!((back.dissipation() - original.dissipation()).amax() <= 1e-14);
    assert!((back.energy_matrix() - original.energy_matrix()).amax() <= 1e-14);
}

const INDEFINITE_NET: &str = r#"{
  "version": 1, "kind": "network",
  "subsystems": [{"J": [[0]]}, {"J": [[0]]}],
  "ports": ["identity", "identity"],
  "coupling": {"matrix": [[-1, 0], [0, -1]]}
}"#;

#[test]
fn indefinite_condensation_points_to_the_descriptor_route() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net.json");
    std::fs::write(&net, INDEFINITE_NET).unwrap();
    let out = phnet(&["condense", p(&net)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("build_phdae"), "{}", stderr(&out));
    assert_eq!(code(&phnet(&["condense", p(&net), "--mode", "skew"])), 2);

    let dae = dir.path().join("dae.json");
    let out = phnet(&["condense", p(&net), "--mode", "phdae", "-o", p(&dae)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let sim = phnet(&["simulate", p(&dae), "--x0", "1,0", "--t1", "1", "--dt", "0.1"]);
    assert_eq!(code(&sim), 4);
    assert!(stderr(&sim).contains("integrate unsupported"));
}

#[test]
fn simulate_is_deterministic_and_reportable() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("run.csv");
    let sys = fixture("two_mass.json");
    let args = ["simulate", p(&sys), "--x0", "1,0.5,-0.3,0.2,0.1", "--t1", "2", "--dt", "0.01"];
    let a = phnet(&args);
    let b = phnet(&args);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    std::fs::write(&csv, &a.stdout).unwrap();
    let rep = phnet(&["report", p(&csv), p(&fixture("two_mass.json"))]);
    assert_eq!(code(&rep), 0, "{}", stderr(&rep));
    let text = String::from_utf8_lossy(&rep.stdout);
    assert!(text.contains("200 steps") && text.contains("monotone yes"), "{text}");
    assert!(text.contains("max |H(table) - H(system)| 0.000e0"), "{text}");

    let strang = phnet(&[
        "simulate",
        p(&fixture("two_mass.json")),
        "--x0",
        "1,0,0,0,0",
        "--t1",
        "1",
        "--dt",
        "0.1",
        "--method",
        "strang",
    ]);
    assert_eq!(code(&strang), 0, "{}", stderr(&strang));
    assert!(stderr(&strang).starts_with("strang:"));
}

#[test]
fn report_flags_energy_gain_of_an_unforced_run() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("gain.csv");
    std::fs::write(&csv, "t,x1,x2,H,balance_residual\n0,1,0,0.5,\n0.1,1,0.2,0.52,\n").unwrap();
    let out = phnet(&["report", p(&csv), p(&fixture("oscillator.json"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn simulate_refuses_invalid_structure() {
    let out = phnet(&["simulate", p(&fixture("bad_dissipation.json")), "--x0", "1", "--t1", "1", "--dt", "0.1"]);
    assert_eq!(code(&out), 2);
    let forced = phnet(&[
        "simulate",
        p(&fixture("bad_dissipation.json")),
        "--x0",
        "1",
        "--t1",
        "1",
        "--dt",
        "0.1",
        "--no-validate",
    ]);
    assert_eq!(code(&forced), 0);
}

#[test]
fn cosim_is_deterministic_and_close_to_the_monolithic_run() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net.json");
    assert_eq!(code(&phnet(&["model", "two-mass", "--network", "-o", p(&net)])), 0);
    let x0 = "1,0.5,-0.3,0.2,0.1";
    let cosim = |mode: &str| {
        phnet(&[
            "cosim",
            p(&net),
            "--mode",
            mode,
            "--window",
            "0.1",
            "--sweeps",
            "30",
            "--dt",
            "0.01",
            "--x0",
            x0,
            "--t1",
            "1",
        ])
    };
    let a = cosim("jacobi");
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, cosim("jacobi").stdout);
    let mono = phnet(&["simulate", p(&fixture("two_mass.json")), "--x0", x0, "--t1", "1", "--dt", "0.01"]);
    let ta = table::read_trajectory(a.stdout.as_slice()).unwrap();
    let tm = table::read_trajectory(mono.stdout.as_slice()).unwrap();
    let dev = ta.states.iter().zip(&tm.states).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max);
    assert!(dev <= 1e-12, "deviation {dev:.3e}");
    assert_eq!(code(&cosim("gauss-seidel")), 0);
    let mismatched =
        phnet(&["cosim", p(&net), "--window", "0.015", "--sweeps", "3", "--dt", "0.01", "--x0", x0, "--t1", "1"]);
    assert_eq!(code(&mismatched), 1);
}

#[test]
fn model_command_honours_parameters() {
    let out = phnet(&["model", "two-mass", "--params", "m1=2,r1=0,r2=0"]);
    assert_eq!(code(&out), 0);
    let Loaded::System(sys) = parse_document(&String::from_utf8_lossy(&out.stdout)).unwrap() else { panic!() };
    let expected = models::two_mass(&TwoMassParams { m1: 2.0, ..TwoMassParams::undamped() }).unwrap();
    assert_eq!(sys, expected);
    assert_eq!(code(&phnet(&["model", "two-mass", "--params", "mass=2"])), 1);
    assert_eq!(code(&phnet(&["model", "two-mass", "--params", "m1=-1"])), 1);
    let maxwell = phnet(&["model", "maxwell", "--params", "nx=3,ny=2"]);
    assert_eq!(code(&maxwell), 0);
    let v = phnet(&["validate", p(&fixture("two_mass_model.json"))]);
    assert_eq!(code(&v), 0);
}

#[test]
fn three_steps_give_four_rows_with_fixed_precision() {
    let out = phnet(&["simulate", p(&fixture("oscillator.json")), "--x0", "1,0", "--t1", "0.3", "--dt", "0.1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[1], "0.0000000000000000e0,1.0000000000000000e0,0.0000000000000000e0,5.0000000000000000e-1,");
}

#[test]
fn documents_are_validated_on_load() {
    let bad = p(&fixture("bad_dissipation.json")).to_string();
    let out = phnet(&["decouple", &bad, "--partition", "1"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("W positive semidefinite: FAIL"), "{}", stderr(&out));
    assert_eq!(code(&phnet(&["--no-validate", "decouple", &bad, "--partition", "1"])), 0);
    assert_eq!(code(&phnet(&["validate", p(&fixture("two_mass.json")), "--samples", "4", "--tol", "1e-12"])), 0);
}
