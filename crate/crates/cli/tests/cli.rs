use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use spectramoment::estimator::{solve_estimation, Prior, SolveOptions, SolveReport};
use spectramoment::filterbank::FilterBank;
use spectramoment::io::JsonMatrix;
use spectramoment::linalg::from_real_rows;
use spectramoment::moment_space::MomentSpace;
use spectramoment::numerics::{GridSpec, DEFAULT_RANK_TOL};
use tempfile::TempDir;

const SHIFT_BANK: &str = r#"{"A": [[0, 0], [1, 0]], "B": [[1], [0]]}"#;
const STATIC_BANK: &str = r#"{"A": [[0, 0], [0, 0]], "B": [[1, 0], [0, 1]]}"#;
const FLAT_PRIOR: &str = r#"{"kind": "scalar", "constant": 1}"#;
const DIAG_PRIOR: &str = r#"{"kind": "matrix", "constant": [[1, 0], [0, 2]]}"#;
const IDENTITY: &str = "[[1, 0], [0, 1]]";

struct Sandbox(TempDir);

impl Sandbox {
    fn new() -> Self {
        Self(tempfile::tempdir().unwrap())
    }

    fn file(&self, name: &str, contents: &str) -> PathBuf {
        let path = self.0.path().join(name);
        fs::write(&path, contents).unwrap();
        path
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }
}

fn run(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spectramoment"))
        .args(args.iter().map(|a| a.as_ref()))
        .env("SPECTRAMOMENT_GRID_N", "256")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

/// Entry `(i, j)` of a serialized matrix, accepting `x` or `[re, im]`.
fn entry(v: &Value, i: usize, j: usize) -> (f64, f64) {
    match &v[i][j] {
        Value::Array(pair) => (pair[0].as_f64().unwrap(), pair[1].as_f64().unwrap()),
        other => (other.as_f64().unwrap(), 0.0),
    }
}

#[test]
fn check_reports_dimension_and_feasibility() {
    let sb = Sandbox::new();
    let fb = sb.file("fb.json", SHIFT_BANK);
    let out = run(&[&"check", &"--fb", &fb, &"--sigma", &sb.file("sigma.json", IDENTITY)]);
    assert_eq!(code(&out), 0);
    let report = stdout_json(&out);
    assert_eq!(report["dimension"], 3);
    assert_eq!(report["feasible"], true);

    let out = run(&[&"check", &"--fb", &fb, &"--sigma", &sb.file("neg.json", "[[-1, 0], [0, -1]]")]);
    assert_eq!(code(&out), 1);
    assert_eq!(stdout_json(&out)["feasible"], false);

    let out = run(&[&"check", &"--fb", &fb, &"--sigma", &sb.file("bad.json", "[[1, 0], [0")]);
    assert_eq!(code(&out), 2);
}

#[test]
fn estimate_flat_prior_on_shift_bank() {
    let sb = Sandbox::new();
    let spectrum = sb.path("spectrum.csv");
    let out = run(&[
        &"estimate",
        &"--fb",
        &sb.file("fb.json", SHIFT_BANK),
        &"--prior",
        &sb.file("prior.json", FLAT_PRIOR),
        &"--sigma",
        &sb.file("sigma.json", IDENTITY),
        &"--spectrum",
        &spectrum,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert!(report["residual"].as_f64().unwrap() <= 1e-9);
    for (i, j, want) in [(0, 0, 0.5), (0, 1, 0.0), (1, 0, 0.0), (1, 1, 0.5)] {
        let (re, im) = entry(&report["lambda"], i, j);
        assert!((re - want).abs() <= 1e-8 && im.abs() <= 1e-8, "Λ[{i}][{j}] = {re} + {im}i");
    }

    let csv = fs::read_to_string(&spectrum).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "theta,re_00,im_00");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 256);
    for row in rows {
        let fields: Vec<f64> = row.split(',').map(|f| f.parse().unwrap()).collect();
        assert!((fields[1] - 1.0).abs() <= 1e-8 && fields[2].abs() <= 1e-12);
    }
}

#[test]
fn estimate_static_matrix_prior() {
    let sb = Sandbox::new();
    let out = run(&[
        &"estimate",
        &"--fb",
        &sb.file("fb.json", STATIC_BANK),
        &"--prior",
        &sb.file("prior.json", DIAG_PRIOR),
        &"--sigma",
        &sb.file("sigma.json", IDENTITY),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    for (i, j, want) in [(0, 0, 1.0), (0, 1, 0.0), (1, 0, 0.0), (1, 1, 2f64.sqrt())] {
        let (re, im) = entry(&report["factor"], i, j);
        assert!((re - want).abs() <= 1e-8 && im.abs() <= 1e-8, "C[{i}][{j}] = {re} + {im}i");
    }
}

#[test]
fn estimate_multistart_reports_dispersion() {
    let sb = Sandbox::new();
    let fb = sb.file("fb.json", r#"{"A": [[0.5, 0], [0.3, -0.4]], "B": [[1, 0], [0.2, 1]]}"#);
    let prior =
        sb.file("prior.json", r#"{"kind": "matrix", "fourier": [[[2, 0.3], [0.3, 1.5]], [[0.2, 0], [0.1, 0.3]]]}"#);
    let sigma = sb.file("sigma.json", "[[2, 0.2], [0.2, 1.5]]");
    let out = run(&[
        &"estimate",
        &"--fb",
        &fb,
        &"--prior",
        &prior,
        &"--sigma",
        &sigma,
        &"--multistart",
        &"10",
        &"--seed",
        &"3",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert!(report["max_pairwise_distance"].is_f64());
    assert!(report["possible_non_uniqueness"].is_boolean());

    let out = run(&[&"estimate", &"--fb", &fb, &"--prior", &prior, &"--sigma", &sigma, &"--multistart", &"10"]);
    assert_eq!(code(&out), 2, "multistart without --seed");
}

#[test]
fn probe_exit_codes() {
    let sb = Sandbox::new();
    let shift = sb.file("shift.json", SHIFT_BANK);
    let out = run(&[
        &"probe",
        &"--fb",
        &shift,
        &"--prior",
        &sb.file("flat.json", FLAT_PRIOR),
        &"--trials",
        &"20",
        &"--seed",
        &"1",
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout_json(&out)["max_relative_gap"].as_f64().unwrap() <= 1e-10);

    let stat = sb.file("static.json", STATIC_BANK);
    let diag = sb.file("diag.json", DIAG_PRIOR);
    let witness = sb.file("witness.json", r#"{"C": [[1, 0], [0, 1]], "V": [[1, 0], [1, 2]]}"#);
    let out =
        run(&[&"probe", &"--fb", &stat, &"--prior", &diag, &"--trials", &"5", &"--seed", &"1", &"--witness", &witness]);
    assert_eq!(code(&out), 1);
    let report = stdout_json(&out);
    assert_eq!(report["holds"], false);
    assert!(report["max_gap"].as_f64().unwrap() >= 1.0 - 1e-12);

    let out = run(&[&"probe", &"--fb", &stat, &"--prior", &diag, &"--trials", &"0", &"--seed", &"1"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_file_is_a_usage_error() {
    let out = run(&[&"check", &"--fb", &Path::new("/nonexistent/fb.json"), &"--sigma", &"/nonexistent/s.json"]);
    assert_eq!(code(&out), 2);
}

/// The emitted report deserializes to exactly the in-process result.
#[test]
fn estimate_json_round_trip() {
    let sb = Sandbox::new();
    let out_path = sb.path("report.json");
    let fb_json = r#"{"A": [[0.4, 0.1], [-0.2, 0.3]], "B": [[1], [0.5]]}"#;
    let fb = FilterBank::new(from_real_rows(&[&[0.4, 0.1], &[-0.2, 0.3]]), from_real_rows(&[&[1.0], &[0.5]])).unwrap();
    let sigma = fb.reachability_gramian().unwrap();
    let sigma_path = sb.path("sigma.json");
    spectramoment::io::write_json(&sigma_path, &JsonMatrix(sigma.clone())).unwrap();
    let out = run(&[
        &"estimate",
        &"--fb",
        &sb.file("fb.json", fb_json),
        &"--prior",
        &sb.file("prior.json", FLAT_PRIOR),
        &"--sigma",
        &sigma_path,
        &"--out",
        &out_path,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let parsed: SolveReport = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();

    let ms = MomentSpace::build(&fb, GridSpec::new(256).unwrap(), DEFAULT_RANK_TOL).unwrap();
    let prior = Prior::constant_scalar(*ms.grid(), 1.0).unwrap();
    let direct = solve_estimation(&ms, &prior, &sigma, &SolveOptions::default()).unwrap();
    assert_eq!(parsed.iterations, direct.iterations);
    let gap = (&parsed.lambda - &direct.lambda).camax();
    assert!(gap <= 1e-15, "Λ round trip gap {gap:e}");
    for (a, b) in parsed.lambda_coords.iter().zip(&direct.lambda_coords) {
        assert!((a - b).abs() <= 1e-15);
    }
    assert_eq!(parsed.residual_history, direct.residual_history);
}

#[test]
fn spectrum_csv_and_json() {
    let sb = Sandbox::new();
    let args_base = [
        sb.file("fb.json", STATIC_BANK),
        sb.file("prior.json", DIAG_PRIOR),
        sb.file("lambda.json", "[[1, 0], [0, 2]]"),
    ];
    let out = run(&[
        &"spectrum",
        &"--fb",
        &args_base[0],
        &"--prior",
        &args_base[1],
        &"--lambda",
        &args_base[2],
        &"--format",
        &"csv",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "theta,re_00,im_00,re_01,im_01,re_11,im_11");

    let out = run(&[&"spectrum", &"--fb", &args_base[0], &"--prior", &args_base[1], &"--lambda", &args_base[2]]);
    let json = stdout_json(&out);
    assert_eq!(json["theta"].as_array().unwrap().len(), 256);
    // Φ ≡ I for this Λ.
    let first = &json["values"][0];
    assert!((entry(first, 0, 0).0 - 1.0).abs() <= 1e-12 && (entry(first, 1, 1).0 - 1.0).abs() <= 1e-12);
}

#[test]
fn simulate_then_check() {
    let sb = Sandbox::new();
    let scenario = sb.file(
        "scenario.json",
        &format!(
            r#"{{"fb": {SHIFT_BANK}, "truth": {{"type": "white_noise"}}, "T": 20000, "seed": 4, "real_valued": true}}"#
        ),
    );
    let sigma = sb.path("sigma.json");
    let first = run(&[&"simulate", &"--scenario", &scenario, &"--sigma-out", &sigma]);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    let report = stdout_json(&first);
    assert_eq!(report["target"]["infeasible"], false);
    assert_eq!(report["diagnostics"]["burn_in"], 1000);
    // Same seed, same bytes.
    let again = run(&[&"simulate", &"--scenario", &scenario]);
    assert_eq!(first.stdout, again.stdout);

    let out = run(&[&"check", &"--fb", &sb.file("fb.json", SHIFT_BANK), &"--sigma", &sigma]);
    assert_eq!(code(&out), 0);
}
