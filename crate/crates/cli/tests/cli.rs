//! End-to-end tests of the binary: output formats, golden bytes, the
//! documented exit-code contract, and determinism across runs.
//!
//! Fixtures are generated with a small deterministic PRNG; set
//! STATEVAL_SEED to try a different fixture realization.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_stateval")
}

fn workdir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// splitmix64, enough randomness for fixture noise.
struct Prng(u64);

impl Prng {
    fn new() -> Self {
        let seed = std::env::var("STATEVAL_SEED")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(42u64);
        Prng(seed)
    }

    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn gaussian(&mut self, sigma: f64) -> f64 {
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        sigma * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

fn smooth_position(t: f64) -> [f64; 3] {
    [t.sin(), (0.7 * t).cos(), 0.3 * (1.3 * t).sin()]
}

fn smooth_velocity(t: f64) -> [f64; 3] {
    [t.cos(), -0.7 * (0.7 * t).sin(), 0.39 * (1.3 * t).cos()]
}

fn write_fixture(
    path: &Path,
    samples: usize,
    duration: f64,
    noise: Option<(&mut Prng, f64)>,
    with_velocity: bool,
) {
    let mut text = String::from("# timestamp tx ty tz qx qy qz qw");
    if with_velocity {
        text.push_str(" vx vy vz");
    }
    text.push('\n');
    let mut noise = noise;
    for i in 0..samples {
        let t = duration * i as f64 / (samples - 1) as f64;
        let mut p = smooth_position(t);
        let mut v = smooth_velocity(t);
        if let Some((prng, sigma)) = noise.as_mut() {
            for k in 0..3 {
                p[k] += prng.gaussian(*sigma);
                v[k] += prng.gaussian(*sigma);
            }
        }
        text.push_str(&format!(
            "{t:.9} {:.9} {:.9} {:.9} 0.000000000 0.000000000 0.000000000 1.000000000",
            p[0], p[1], p[2]
        ));
        if with_velocity {
            text.push_str(&format!(" {:.9} {:.9} {:.9}", v[0], v[1], v[2]));
        }
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

fn field(table: &str, key: &str) -> String {
    table
        .lines()
        .find(|l| l.starts_with(key))
        .unwrap_or_else(|| panic!("no field {key} in:\n{table}"))
        .split_whitespace()
        .nth(1)
        .unwrap()
        .to_string()
}

fn float_field(table: &str, key: &str) -> f64 {
    field(table, key).parse().unwrap()
}

#[test]
fn fit_writes_fit_file_and_reports_small_rmse() {
    let dir = workdir("fit_basic");
    write_fixture(&dir.join("traj.tum"), 500, 10.0, None, false);
    let out = run(&dir, &["fit", "traj.tum", "--degree", "64"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = stdout(&out);
    assert!(float_field(&table, "transl_rmse") < 1e-8, "{table}");
    let fit = fs::read(dir.join("traj.cbf")).unwrap();
    assert_eq!(&fit[..4], b"CBF1");
}

#[test]
fn fit_on_stationary_trajectory_has_zero_rmse() {
    let dir = workdir("fit_stationary");
    let mut text = String::from("# header\n");
    for i in 0..10 {
        text.push_str(&format!(
            "{:.9} 1.000000000 1.000000000 1.000000000 0.000000000 0.000000000 0.000000000 1.000000000\n",
            i as f64
        ));
    }
    fs::write(dir.join("still.tum"), text).unwrap();
    let out = run(&dir, &["fit", "still.tum", "--degree", "4"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(float_field(&stdout(&out), "transl_rmse") <= 1e-12);
}

#[test]
fn fit_with_too_few_samples_exits_3() {
    let dir = workdir("fit_underdetermined");
    write_fixture(&dir.join("tiny.tum"), 20, 2.0, None, false);
    let out = run(&dir, &["fit", "tiny.tum", "--degree", "64"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).to_lowercase().contains("underdetermined"));
}

#[test]
fn parse_errors_exit_2_and_name_file_and_line() {
    let dir = workdir("parse_error");
    fs::write(
        dir.join("bad.tum"),
        "# ok\n0.0 0 0 0 0 0 0 1\nnot a valid line\n",
    )
    .unwrap();
    let out = run(&dir, &["fit", "bad.tum", "--degree", "2"]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("bad.tum") && err.contains("line 3"), "{err}");
}

#[test]
fn velocity_of_linear_motion_is_constant() {
    let dir = workdir("velocity_linear");
    let mut text = String::new();
    for i in 0..20 {
        let t = i as f64 * 0.1;
        text.push_str(&format!(
            "{t:.9} {:.9} {:.9} {:.9} 0.000000000 0.000000000 0.000000000 1.000000000\n",
            t,
            2.0 * t,
            3.0 * t
        ));
    }
    fs::write(dir.join("linear.tum"), text).unwrap();
    let out = run(&dir, &["velocity", "linear.tum", "--degree", "3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let written = fs::read_to_string(dir.join("linear.vel.tum")).unwrap();
    for line in written.lines().skip(1) {
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(|f| f.parse().unwrap())
            .collect();
        assert_eq!(fields.len(), 11);
        assert!((fields[8] - 1.0).abs() < 1e-6, "{line}");
        assert!((fields[9] - 2.0).abs() < 1e-6, "{line}");
        assert!((fields[10] - 3.0).abs() < 1e-6, "{line}");
    }
}

#[test]
fn velocity_beats_finite_differences_on_noisy_data() {
    let dir = workdir("velocity_trend");
    let mut prng = Prng::new();
    write_fixture(&dir.join("truth.tum"), 500, 10.0, None, true);
    write_fixture(
        &dir.join("noisy.tum"),
        500,
        10.0,
        Some((&mut prng, 0.01)),
        false,
    );
    let out = run(
        &dir,
        &[
            "velocity",
            "noisy.tum",
            "--degree",
            "48",
            "--truth",
            "truth.tum",
            "--compare-fd",
            "--csv",
            "vel.csv",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = stdout(&out);
    let cheb = float_field(&table, "vel_rmse_chebyshev");
    let fd = float_field(&table, "vel_rmse_fd");
    assert!(
        cheb < 0.5 * fd,
        "chebyshev {cheb} should clearly beat finite differences {fd}"
    );
    let csv = fs::read_to_string(dir.join("vel.csv")).unwrap();
    assert!(csv.starts_with("t,vx,vy,vz,true_vx,true_vy,true_vz,fd_vx,fd_vy,fd_vz\n"));
    assert_eq!(csv.lines().count(), 501);
}

#[test]
fn velocity_query_outside_fit_domain_exits_3() {
    let dir = workdir("velocity_domain");
    write_fixture(&dir.join("traj.tum"), 200, 10.0, None, false);
    let out = run(&dir, &["fit", "traj.tum", "--degree", "32"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = run(
        &dir,
        &["velocity", "traj.cbf", "--rate", "10", "--end", "12.0"],
    );
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("outside domain"), "{}", stderr(&out));
}

#[test]
fn eval_of_identical_trajectories_is_zero() {
    let dir = workdir("eval_zero");
    write_fixture(&dir.join("truth.tum"), 200, 10.0, None, true);
    for metric in ["ase", "ate"] {
        let out = run(
            &dir,
            &[
                "eval",
                "truth.tum",
                "--ref",
                "truth.tum",
                "--metric",
                metric,
                "--format",
                "json",
            ],
        );
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let json = stdout(&out);
        assert!(json.contains("\"rmse\":0.00000000e0"), "{metric}: {json}");
    }
}

#[test]
fn eval_orders_estimators_by_noise_and_keeps_argument_order() {
    let dir = workdir("eval_order");
    let mut prng = Prng::new();
    write_fixture(&dir.join("truth.tum"), 500, 10.0, None, true);
    write_fixture(&dir.join("a.tum"), 500, 10.0, Some((&mut prng, 0.01)), true);
    write_fixture(&dir.join("b.tum"), 500, 10.0, Some((&mut prng, 0.05)), true);
    let out = run(
        &dir,
        &[
            "eval",
            "b.tum",
            "a.tum",
            "--ref",
            "truth.tum",
            "--metric",
            "ase",
            "--format",
            "csv",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let body = stdout(&out);
    let rows: Vec<&str> = body.lines().collect();
    assert_eq!(rows[0], "metric,estimator,count,rmse,std,median");
    assert!(rows[1].starts_with("ASE,b.tum,500,"));
    assert!(rows[2].starts_with("ASE,a.tum,500,"));
    let rmse = |row: &str| -> f64 { row.split(',').nth(3).unwrap().parse().unwrap() };
    assert!(rmse(rows[2]) < rmse(rows[1]), "{body}");
}

#[test]
fn eval_ase_without_reference_velocity_exits_5_unless_synthesized() {
    let dir = workdir("eval_synth");
    let mut prng = Prng::new();
    write_fixture(&dir.join("ref.tum"), 400, 10.0, None, false);
    write_fixture(
        &dir.join("est.tum"),
        400,
        10.0,
        Some((&mut prng, 0.01)),
        true,
    );

    let out = run(
        &dir,
        &["eval", "est.tum", "--ref", "ref.tum", "--metric", "ase"],
    );
    assert_eq!(code(&out), 5);
    assert!(stderr(&out).contains("--synth-vel"), "{}", stderr(&out));

    let out = run(
        &dir,
        &[
            "eval",
            "est.tum",
            "--ref",
            "ref.tum",
            "--metric",
            "ase",
            "--synth-vel",
            "--degree",
            "48",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = stdout(&out);
    assert!(table.starts_with("Metric  C-ASE"), "{table}");

    // json keeps the schema's lowercase metric id
    let out = run(
        &dir,
        &[
            "eval",
            "est.tum",
            "--ref",
            "ref.tum",
            "--metric",
            "ase",
            "--synth-vel",
            "--degree",
            "48",
            "--format",
            "json",
        ],
    );
    assert!(stdout(&out).contains("\"metric\":\"ase\""));
}

#[test]
fn eval_ase_with_velocity_free_estimator_exits_5() {
    let dir = workdir("eval_est_novel");
    write_fixture(&dir.join("ref.tum"), 300, 10.0, None, true);
    write_fixture(&dir.join("est.tum"), 300, 10.0, None, false);
    let out = run(
        &dir,
        &["eval", "est.tum", "--ref", "ref.tum", "--metric", "ase"],
    );
    assert_eq!(code(&out), 5);
    assert!(stderr(&out).contains("est.tum"), "{}", stderr(&out));
}

#[test]
fn eval_disjoint_time_ranges_exit_4() {
    let dir = workdir("eval_overlap");
    write_fixture(&dir.join("ref.tum"), 100, 10.0, None, true);
    let mut text = String::new();
    for i in 0..100 {
        let t = 5000.0 + i as f64 * 0.1;
        text.push_str(&format!(
            "{t:.9} 0.000000000 0.000000000 0.000000000 0.000000000 0.000000000 0.000000000 1.000000000 0.000000000 0.000000000 0.000000000\n"
        ));
    }
    fs::write(dir.join("far.tum"), text).unwrap();
    let out = run(
        &dir,
        &["eval", "far.tum", "--ref", "ref.tum", "--metric", "ase"],
    );
    assert_eq!(code(&out), 4);
}

#[test]
fn rpe_window_arithmetic_and_bounds() {
    let dir = workdir("rpe_window");
    write_fixture(&dir.join("traj.tum"), 10, 1.0, None, false);
    let out = run(
        &dir,
        &[
            "eval", "traj.tum", "--ref", "traj.tum", "--metric", "rpe", "--delta", "3", "--format",
            "json",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("\"count\":7"), "{}", stdout(&out));

    let out = run(
        &dir,
        &[
            "eval", "traj.tum", "--ref", "traj.tum", "--metric", "rpe", "--delta", "10",
        ],
    );
    assert_eq!(code(&out), 5);
}

#[test]
fn compress_then_sample_reproduces_the_fit_rmse() {
    let dir = workdir("compress_sample");
    write_fixture(&dir.join("big.tum"), 10_000, 100.0, None, false);
    let out = run(
        &dir,
        &["compress", "big.tum", "--degree", "256", "-o", "big.cbf"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = stdout(&out);
    let ratio = float_field(&table, "ratio");
    assert!(ratio < 0.08, "ratio {ratio}");
    let reported = float_field(&table, "transl_rmse");

    // resample at the original 100 Hz grid and recompute the rmse
    let out = run(
        &dir,
        &[
            "sample",
            "big.cbf",
            "--rate",
            "99.99",
            "-o",
            "resampled.tum",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let orig = fs::read_to_string(dir.join("big.tum")).unwrap();
    let resampled = fs::read_to_string(dir.join("resampled.tum")).unwrap();
    let parse = |text: &str| -> Vec<[f64; 3]> {
        text.lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .map(|l| {
                let f: Vec<f64> = l.split_whitespace().map(|x| x.parse().unwrap()).collect();
                [f[1], f[2], f[3]]
            })
            .collect()
    };
    let (a, b) = (parse(&orig), parse(&resampled));
    assert_eq!(a.len(), b.len());
    let mse: f64 = a
        .iter()
        .zip(&b)
        .map(|(p, q)| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2))
        .sum::<f64>()
        / a.len() as f64;
    let resampled_rmse = mse.sqrt();
    // equal up to the 9-decimal text quantization of both files
    assert!(
        (resampled_rmse - reported).abs() < 5e-9,
        "resampled {resampled_rmse} vs reported {reported}"
    );
}

#[test]
fn corrupt_fit_files_exit_3() {
    let dir = workdir("corrupt_fit");
    fs::write(dir.join("junk.cbf"), b"XXXXjunkjunkjunk").unwrap();
    let out = run(&dir, &["sample", "junk.cbf", "--rate", "10"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("bad magic"), "{}", stderr(&out));

    fs::write(dir.join("short.cbf"), b"CBF1\x01\x02").unwrap();
    let out = run(&dir, &["sample", "short.cbf", "--rate", "10"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("truncated"), "{}", stderr(&out));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = workdir("determinism");
    let mut prng = Prng::new();
    write_fixture(&dir.join("truth.tum"), 300, 10.0, None, true);
    write_fixture(
        &dir.join("est.tum"),
        300,
        10.0,
        Some((&mut prng, 0.02)),
        true,
    );

    for format in ["json", "csv", "table"] {
        let args = [
            "eval",
            "est.tum",
            "--ref",
            "truth.tum",
            "--metric",
            "ase",
            "--per-step",
            "--format",
            format,
        ];
        let first = run(&dir, &args);
        let second = run(&dir, &args);
        assert_eq!(code(&first), 0);
        assert_eq!(first.stdout, second.stdout, "{format} output not stable");
    }

    let args = [
        "velocity", "est.tum", "--degree", "48", "--csv", "v1.csv", "-o", "v1.tum",
    ];
    assert_eq!(code(&run(&dir, &args)), 0);
    let first_csv = fs::read(dir.join("v1.csv")).unwrap();
    let first_tum = fs::read(dir.join("v1.tum")).unwrap();
    assert_eq!(code(&run(&dir, &args)), 0);
    assert_eq!(fs::read(dir.join("v1.csv")).unwrap(), first_csv);
    assert_eq!(fs::read(dir.join("v1.tum")).unwrap(), first_tum);
}

#[test]
fn align_flag_accepts_the_documented_values() {
    let dir = workdir("align_values");
    write_fixture(&dir.join("t.tum"), 100, 5.0, None, true);
    for align in ["sim3", "se3", "none"] {
        let out = run(
            &dir,
            &[
                "eval", "t.tum", "--ref", "t.tum", "--metric", "ate", "--align", align,
            ],
        );
        assert_eq!(code(&out), 0, "align {align}: {}", stderr(&out));
    }
}
