use std::path::PathBuf;
use std::process::Command;

use expander_lab_cli::manifest::{manifest_path, JobKind, RunManifest};
use expander_lab_cli::output::{parse_profile_csv, ProfileDocument, SweepDocument, PROFILE_SCHEMA};
use expander_lab_cli::run;

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cli(args: &[&str]) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("expander-lab").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("expander-lab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

const HOPF: [&str; 6] = ["--n", "3", "--p", "2", "--k", "2"];

fn with_hopf(cmd: &str, rest: &[&str]) -> Vec<String> {
    std::iter::once(cmd)
        .chain(HOPF)
        .chain(rest.iter().copied())
        .map(String::from)
        .collect()
}

fn cli_owned(args: Vec<String>) -> Outcome {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    cli(&refs)
}

#[test]
fn params_table() {
    let o = cli_owned(with_hopf("params", &[]));
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.contains("lambda        2\n"));
    assert!(o.stdout.contains("phi0          1.1180"));
    assert!(o.stdout.contains("kind          sink"));
}

#[test]
fn params_inadmissible() {
    let o = cli(&["params", "--n", "4", "--p", "2", "--k", "2"]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("inadmissible"));
    let o = cli(&["params", "--n", "3", "--p", "2", "--k", "3"]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("inadmissible"));
}

#[test]
fn params_json_for_the_octonionic_map() {
    let o = cli(&["params", "--n", "15", "--p", "8", "--k", "2", "--json"]);
    assert_eq!(o.code, 0);
    let v: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(v["kind"], "sink");
    assert_eq!(v["lambda"], 2.0);
    assert_eq!(v["family"], "octonionic");
}

#[test]
fn spiral_sink_is_classified_not_rejected() {
    let o = cli(&["params", "--n", "3", "--p", "2", "--k", "4", "--json"]);
    assert_eq!(o.code, 0);
    let v: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(v["kind"], "spiral_sink");
    assert_eq!(v["solvable"], false);
}

#[test]
fn usage_errors_exit_one() {
    let o = cli_owned(with_hopf("solve", &["--radius", "0.5"]));
    assert_eq!(o.code, 1);
    assert!(o.stderr.contains("--epsilon"));
    assert_eq!(cli(&["frobnicate"]).code, 1);
    assert_eq!(
        cli_owned(with_hopf("solve", &["--epsilon", "x", "--radius", "0.5"])).code,
        1
    );
    assert_eq!(
        cli_owned(with_hopf(
            "solve",
            &["--epsilon", "-0.1", "--radius", "0.5"]
        ))
        .code,
        1
    );
    assert_eq!(cli(&["--help"]).code, 0);
}

#[test]
fn solve_csv_fixture() {
    let o = cli_owned(with_hopf(
        "solve",
        &["--epsilon", "0.05", "--radius", "0.5", "--points", "300"],
    ));
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.starts_with("r,f,f_r,phi,psi,t\n"));
    assert!(!o.stdout.contains('\r'));
    let (rows, trailer) = parse_profile_csv(&o.stdout).unwrap();
    assert_eq!(rows.len(), 300);
    for w in rows.windows(2) {
        assert!(w[1][0] > w[0][0]);
    }
    for [r, f, f_r, phi, psi, t] in &rows {
        assert!((r - t.exp()).abs() <= 1e-15 * r);
        assert!((f - r * phi).abs() <= 1e-15 * f.abs().max(1e-300));
        assert!((f_r - (phi + psi)).abs() <= 1e-15 * f_r.abs());
    }
    let keys: Vec<&str> = trailer.iter().map(|(k, _)| k.as_str()).collect();
    assert_eq!(keys[0], "phi_inf");
    for key in ["max_residual", "k_hat", "envelope_ok"] {
        assert!(keys.contains(&key), "{key}");
    }
    let phi_inf: f64 = trailer[0].1.parse().unwrap();
    assert!((phi_inf - 0.238639285).abs() < 1e-8);
}

#[test]
fn solve_json_matches_the_schema() {
    let o = cli_owned(with_hopf(
        "solve",
        &[
            "--epsilon",
            "0.05",
            "--radius",
            "0.5",
            "--points",
            "100",
            "--format",
            "json",
        ],
    ));
    assert_eq!(o.code, 0, "{}", o.stderr);
    let doc: ProfileDocument = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(doc.schema, PROFILE_SCHEMA);
    assert_eq!(doc.samples.len(), 100);
    assert!(doc.diagnostics.certified());
    let again = serde_json::to_string_pretty(&doc).unwrap() + "\n";
    assert_eq!(again, o.stdout);
}

#[test]
fn solve_failures_map_to_exit_codes() {
    let o = cli(&[
        "solve",
        "--n",
        "3",
        "--p",
        "2",
        "--k",
        "4",
        "--epsilon",
        "0.05",
        "--radius",
        "0.5",
    ]);
    assert_eq!(o.code, 2);
    let o = cli_owned(with_hopf("solve", &["--epsilon", "0.05", "--radius", "8"]));
    assert_eq!(o.code, 3);
    assert!(o.stderr.contains("BracketFailure"), "{}", o.stderr);
}

#[test]
fn manifest_replay_is_byte_identical() {
    let out = scratch("profile.csv");
    let path = out.to_str().unwrap();
    let o = cli_owned(with_hopf(
        "solve",
        &[
            "--epsilon",
            "0.05",
            "--radius",
            "0.5",
            "--points",
            "150",
            "--out",
            path,
        ],
    ));
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.is_empty());
    let first = std::fs::read(&out).unwrap();
    let manifest: RunManifest =
        serde_json::from_slice(&std::fs::read(manifest_path(&out)).unwrap()).unwrap();
    assert_eq!(manifest.command, JobKind::Solve);
    assert_eq!((manifest.n, manifest.p, manifest.k), (3, 2, 2));
    assert_eq!(manifest.epsilon, vec![0.05]);

    let replayed = scratch("replayed.csv");
    let o = cli(&[
        "replay",
        manifest_path(&out).to_str().unwrap(),
        "--out",
        replayed.to_str().unwrap(),
    ]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert_eq!(std::fs::read(&replayed).unwrap(), first);
    let o = cli(&["replay", manifest_path(&out).to_str().unwrap()]);
    assert_eq!(o.stdout.as_bytes(), first.as_slice());
}

#[test]
fn bad_manifest_is_a_usage_error() {
    let path = scratch("bad.manifest.json");
    std::fs::write(&path, "{\"command\": \"solve\"}").unwrap();
    assert_eq!(cli(&["replay", path.to_str().unwrap()]).code, 1);
    assert_eq!(cli(&["replay", "/nonexistent/manifest.json"]).code, 1);
}

#[test]
fn sweep_rows_follow_the_grid() {
    let args = |jobs: &str| {
        with_hopf(
            "sweep",
            &[
                "--epsilon",
                "0.01,0.02,0.05",
                "--radius",
                "0.5",
                "--jobs",
                jobs,
                "--format",
                "json",
            ],
        )
    };
    let one = cli_owned(args("1"));
    assert_eq!(one.code, 0, "{}", one.stderr);
    let doc: SweepDocument = serde_json::from_str(&one.stdout).unwrap();
    let eps: Vec<f64> = doc.rows.iter().map(|r| r.eps).collect();
    assert_eq!(eps, vec![0.01, 0.02, 0.05]);
    assert!(doc.rows.iter().all(|r| r.status == "ok"));
    let four = cli_owned(args("4"));
    assert_eq!(four.stdout, one.stdout);
}

#[test]
fn sweep_reports_failed_rows() {
    let o = cli_owned(with_hopf(
        "sweep",
        &["--epsilon", "0.05", "--radius", "0.5,8"],
    ));
    assert_eq!(o.code, 3);
    let lines: Vec<&str> = o.stdout.lines().collect();
    assert_eq!(lines[0], "eps,R,phi_inf,k_hat,residual,status");
    assert!(lines[1].ends_with(",ok"));
    assert_eq!(lines[2], "5e-2,8e0,,,,BracketFailure");
}

#[test]
fn empty_sweep_grid() {
    assert_eq!(cli_owned(with_hopf("sweep", &["--radius", "0.5"])).code, 1);
    assert_eq!(
        cli_owned(with_hopf("sweep", &["--epsilon", "--radius", "0.5"])).code,
        1
    );
}

#[test]
fn verify_single_type() {
    let o = cli_owned(with_hopf("verify", &[]));
    assert_eq!(o.code, 0, "{}{}", o.stdout, o.stderr);
    assert!(o.stdout.contains("PASS"));
    assert!(o.stdout.contains("1 of 1 types pass"));
    let o = cli(&["verify", "--n", "3", "--p", "2", "--k", "4"]);
    assert_eq!(o.code, 2);
}

#[test]
fn binary_exit_codes_and_thread_cap() {
    let bin = env!("CARGO_BIN_EXE_expander-lab");
    let status = Command::new(bin)
        .args(["params", "--n", "4", "--p", "2", "--k", "2"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    let status = Command::new(bin)
        .args(["solve", "--n", "3"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let out = Command::new(bin)
        .args([
            "sweep",
            "--n",
            "3",
            "--p",
            "2",
            "--k",
            "2",
            "--epsilon",
            "0.05",
            "--radius",
            "0.5",
        ])
        .env("EXPANDER_LAB_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("EXPANDER_LAB_THREADS"));
}
