use std::fs;
use std::path::Path;

use stateval::chebyshev::{ChebyshevError, Domain, Weights};
use stateval::liegroups::{ExtendedPose, Rotation};
use stateval::metrics::{
    ase, ate, finite_difference_velocity, rpe, MetricError, MetricReport, SimilarityTransform,
};
use stateval::nalgebra::Vector3;
use stateval::trajectory::{
    associate, compute_velocity, deserialize_fit, fit_trajectory_translation, parse_tum,
    serialize_fit, tum_has_velocity_columns, write_tum, FitOptions, StampedState, TrajectoryError,
};
use stateval::{ChebyshevFit64, Trajectory64};

use crate::output::{csv_field, fmt9, json_string, Summary};
use crate::{EvalArgs, FitArgs, FormatArg, MetricArg, SampleArgs, VelocityArgs};

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_ASSOCIATION: u8 = 4;
const EXIT_PRECONDITION: u8 = 5;

pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    fn input(message: impl Into<String>) -> Self {
        Self::new(EXIT_INPUT, message)
    }

    fn precondition(message: impl Into<String>) -> Self {
        Self::new(EXIT_PRECONDITION, message)
    }

    fn in_file(mut self, path: &Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }
}

impl From<TrajectoryError> for CliError {
    fn from(e: TrajectoryError) -> Self {
        let code = match &e {
            TrajectoryError::MalformedLine { .. }
            | TrajectoryError::NonMonotoneTime { .. }
            | TrajectoryError::DenormalizedQuaternion { .. }
            | TrajectoryError::Empty => EXIT_INPUT,
            TrajectoryError::NoOverlap => EXIT_ASSOCIATION,
            TrajectoryError::BadMagic
            | TrajectoryError::VersionMismatch { .. }
            | TrajectoryError::TruncatedPayload
            | TrajectoryError::TrailingBytes
            | TrajectoryError::InvalidHeader(_)
            | TrajectoryError::Fit(_) => EXIT_NUMERIC,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<ChebyshevError> for CliError {
    fn from(e: ChebyshevError) -> Self {
        CliError::new(EXIT_NUMERIC, e.to_string())
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        let code = match &e {
            MetricError::DegenerateGeometry => EXIT_NUMERIC,
            MetricError::NoOverlap => EXIT_ASSOCIATION,
            _ => EXIT_PRECONDITION,
        };
        CliError::new(code, e.to_string())
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn warn_nanosecond_stamps(path: &Path, text: &str) {
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .and_then(|l| l.split_whitespace().next())
        .and_then(|f| f.parse::<f64>().ok());
    if let Some(t) = first {
        if t.abs() > 1e12 {
            eprintln!(
                "warning: {}: timestamps look like integer nanoseconds, converting to seconds",
                path.display()
            );
        }
    }
}

fn fit_options(
    weights: &Option<Weights<f64>>,
    ridge: Option<f64>,
    pad: f64,
    traj: &Trajectory64,
) -> Result<FitOptions<f64>, CliError> {
    let mut options = FitOptions::default();
    if let Some(w) = weights {
        options.weights = w.clone();
    }
    options.ridge = ridge;
    if pad < 0.0 {
        return Err(CliError::input("--pad must be non-negative"));
    }
    if pad > 0.0 {
        let times = traj.times();
        options.domain = Some(
            Domain::new(times[0] - pad, times[times.len() - 1] + pad).map_err(CliError::from)?,
        );
    }
    Ok(options)
}

fn translation_rmse(fit: &ChebyshevFit64, traj: &Trajectory64) -> Result<f64, CliError> {
    let mut acc = 0.0;
    for s in traj.states() {
        let p = fit.evaluate(s.t)?;
        acc += (Vector3::new(p[0], p[1], p[2]) - s.state.translation).norm_squared();
    }
    Ok((acc / traj.len() as f64).sqrt())
}

fn uniform_times(start: f64, end: f64, rate: f64) -> Result<Vec<f64>, CliError> {
    // NaN fails both checks
    if rate.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(CliError::input("--rate must be positive"));
    }
    if start.partial_cmp(&end) != Some(std::cmp::Ordering::Less) {
        return Err(CliError::input("--start must be strictly before --end"));
    }
    let n = ((end - start) * rate).floor() as usize + 1;
    Ok((0..n).map(|i| start + i as f64 / rate).collect())
}

pub fn fit(args: &FitArgs, report_ratio: bool) -> Result<(), CliError> {
    let text = read_text(&args.input)?;
    warn_nanosecond_stamps(&args.input, &text);
    let with_velocity = tum_has_velocity_columns(&text).unwrap_or(false);
    let traj = parse_tum::<f64>(&text, with_velocity)
        .map_err(|e| CliError::from(e).in_file(&args.input))?;

    let options = fit_options(&args.weights, args.ridge, args.pad, &traj)?;
    let fit = fit_trajectory_translation(&traj, args.degree, &options)?;
    let rmse = translation_rmse(&fit, &traj)?;
    let bytes = serialize_fit(&fit);
    let output = args
        .output
        .clone()
        .unwrap_or_else(|| args.input.with_extension("cbf"));
    write_file(&output, &bytes)?;

    let mut summary = Summary::new()
        .str("input", args.input.display().to_string())
        .int("samples", traj.len() as u64)
        .int("degree", fit.degree() as u64)
        .float("domain_start", fit.domain().a())
        .float("domain_end", fit.domain().b())
        .float("transl_rmse", rmse)
        .str("output", output.display().to_string())
        .int("fit_bytes", bytes.len() as u64);
    if report_ratio {
        summary = summary
            .int("tum_bytes", text.len() as u64)
            .float("ratio", bytes.len() as f64 / text.len() as f64);
    }
    print!("{}", summary.render(args.format));
    Ok(())
}

pub fn velocity(args: &VelocityArgs) -> Result<(), CliError> {
    let raw = fs::read(&args.input)
        .map_err(|e| CliError::input(format!("{}: {e}", args.input.display())))?;

    let (out_traj, degree) = if raw.starts_with(b"CBF1") {
        let fit =
            deserialize_fit::<f64>(&raw).map_err(|e| CliError::from(e).in_file(&args.input))?;
        if fit.dims() != 3 {
            return Err(CliError::input(format!(
                "{}: fit has {} axes, velocity synthesis needs 3",
                args.input.display(),
                fit.dims()
            )));
        }
        let rate = args
            .rate
            .ok_or_else(|| CliError::input("--rate is required for fit input"))?;
        let start = args.start.unwrap_or_else(|| fit.domain().a());
        let end = args.end.unwrap_or_else(|| fit.domain().b());
        let times = uniform_times(start, end, rate)?;
        let velocities = compute_velocity(&fit, &times)?;
        let states = times
            .iter()
            .zip(&velocities)
            .map(|(&t, v)| {
                let p = fit.evaluate(t)?;
                Ok(StampedState {
                    t,
                    state: ExtendedPose::new(
                        Rotation::identity(),
                        Vector3::new(p[0], p[1], p[2]),
                        *v,
                    ),
                })
            })
            .collect::<Result<Vec<_>, ChebyshevError>>()?;
        let traj = Trajectory64::new(states, true).map_err(CliError::from)?;
        (traj, fit.degree())
    } else {
        let text = String::from_utf8(raw).map_err(|_| {
            CliError::input(format!("{}: not valid UTF-8 text", args.input.display()))
        })?;
        warn_nanosecond_stamps(&args.input, &text);
        let with_velocity = tum_has_velocity_columns(&text).unwrap_or(false);
        let traj = parse_tum::<f64>(&text, with_velocity)
            .map_err(|e| CliError::from(e).in_file(&args.input))?;
        let degree = args
            .degree
            .ok_or_else(|| CliError::input("--degree is required for trajectory input"))?;
        let options = fit_options(&args.weights, args.ridge, args.pad, &traj)?;
        let synthesized = traj.synthesize_velocity(degree, &options)?;
        (synthesized, degree)
    };

    let output = args
        .output
        .clone()
        .unwrap_or_else(|| args.input.with_extension("vel.tum"));
    write_file(&output, write_tum(&out_traj).as_bytes())?;

    let fd_velocities = if args.compare_fd {
        Some(finite_difference_velocity(&out_traj)?)
    } else {
        None
    };

    // velocity RMSE against a reference with recorded velocities
    let mut truth_fields: Vec<(&'static str, f64)> = Vec::new();
    let mut truth_lookup: Option<Vec<Option<usize>>> = None;
    let mut truth_traj: Option<Trajectory64> = None;
    if let Some(truth_path) = &args.truth {
        let text = read_text(truth_path)?;
        if tum_has_velocity_columns(&text) != Some(true) {
            return Err(CliError::precondition(format!(
                "{}: truth file has no velocity columns (vx vy vz)",
                truth_path.display()
            )));
        }
        let truth =
            parse_tum::<f64>(&text, true).map_err(|e| CliError::from(e).in_file(truth_path))?;
        let pairing = associate(&out_traj, &truth, args.max_diff)?;
        let mut lookup = vec![None; out_traj.len()];
        let mut cheb_acc = 0.0;
        let mut fd_acc = 0.0;
        for &(i, j) in pairing.pairs() {
            lookup[i] = Some(j);
            let v_true = truth.states()[j].state.velocity;
            cheb_acc += (out_traj.states()[i].state.velocity - v_true).norm_squared();
            if let Some(fd) = &fd_velocities {
                fd_acc += (fd[i] - v_true).norm_squared();
            }
        }
        let n = pairing.len() as f64;
        truth_fields.push(("vel_rmse_chebyshev", (cheb_acc / n).sqrt()));
        if fd_velocities.is_some() {
            truth_fields.push(("vel_rmse_fd", (fd_acc / n).sqrt()));
        }
        truth_lookup = Some(lookup);
        truth_traj = Some(truth);
    }

    if let Some(csv_path) = &args.csv {
        let mut csv = String::from("t,vx,vy,vz");
        if truth_traj.is_some() {
            csv.push_str(",true_vx,true_vy,true_vz");
        }
        if fd_velocities.is_some() {
            csv.push_str(",fd_vx,fd_vy,fd_vz");
        }
        csv.push('\n');
        for (i, s) in out_traj.states().iter().enumerate() {
            let v = s.state.velocity;
            csv.push_str(&format!(
                "{},{},{},{}",
                fmt9(s.t),
                fmt9(v.x),
                fmt9(v.y),
                fmt9(v.z)
            ));
            if let (Some(lookup), Some(truth)) = (&truth_lookup, &truth_traj) {
                match lookup[i] {
                    Some(j) => {
                        let tv = truth.states()[j].state.velocity;
                        csv.push_str(&format!(",{},{},{}", fmt9(tv.x), fmt9(tv.y), fmt9(tv.z)));
                    }
                    None => csv.push_str(",,,"),
                }
            }
            if let Some(fd) = &fd_velocities {
                let f = fd[i];
                csv.push_str(&format!(",{},{},{}", fmt9(f.x), fmt9(f.y), fmt9(f.z)));
            }
            csv.push('\n');
        }
        write_file(csv_path, csv.as_bytes())?;
    }

    let mut summary = Summary::new()
        .str("input", args.input.display().to_string())
        .int("samples", out_traj.len() as u64)
        .int("degree", degree as u64)
        .str("output", output.display().to_string());
    for (key, value) in truth_fields {
        summary = summary.float(key, value);
    }
    print!("{}", summary.render(args.format));
    Ok(())
}

struct EvalRow {
    estimator: String,
    report: MetricReport<f64>,
    alignment: SimilarityTransform<f64>,
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let ref_text = read_text(&args.reference)?;
    warn_nanosecond_stamps(&args.reference, &ref_text);
    let ref_has_velocity = tum_has_velocity_columns(&ref_text).unwrap_or(false);

    let mut label = match args.metric {
        MetricArg::Ase => "ASE",
        MetricArg::Ate => "ATE",
        MetricArg::Rpe => "RPE",
    };
    let reference = if args.metric == MetricArg::Ase && !ref_has_velocity {
        if !args.synth_vel {
            return Err(CliError::precondition(format!(
                "{}: reference has no velocity columns; pass --synth-vel --degree N to \
                 synthesize them from the translation fit (or produce a file with \
                 `stateval velocity`)",
                args.reference.display()
            )));
        }
        let degree = args
            .degree
            .ok_or_else(|| CliError::input("--synth-vel requires --degree"))?;
        let base = parse_tum::<f64>(&ref_text, false)
            .map_err(|e| CliError::from(e).in_file(&args.reference))?;
        let options = fit_options(&args.weights, args.ridge, 0.0, &base)?;
        label = "C-ASE";
        base.synthesize_velocity(degree, &options)?
    } else {
        parse_tum::<f64>(&ref_text, ref_has_velocity)
            .map_err(|e| CliError::from(e).in_file(&args.reference))?
    };

    let mut rows = Vec::new();
    for est_path in &args.est {
        let est_text = read_text(est_path)?;
        warn_nanosecond_stamps(est_path, &est_text);
        let est_has_velocity = tum_has_velocity_columns(&est_text).unwrap_or(false);
        if args.metric == MetricArg::Ase && !est_has_velocity {
            return Err(CliError::precondition(format!(
                "{}: estimator file has no velocity columns; ase scores the full state, \
                 so the estimator must export vx vy vz",
                est_path.display()
            )));
        }
        let est = parse_tum::<f64>(&est_text, est_has_velocity)
            .map_err(|e| CliError::from(e).in_file(est_path))?;
        let pairing = associate(&est, &reference, args.max_diff)?;
        let (report, alignment) = match args.metric {
            MetricArg::Ase => ase(&est, &reference, &pairing, args.align.mode())?,
            MetricArg::Ate => ate(&est, &reference, &pairing, args.align.mode())?,
            MetricArg::Rpe => (
                rpe(&est, &reference, &pairing, args.delta)?,
                SimilarityTransform::identity(),
            ),
        };
        rows.push(EvalRow {
            estimator: est_path.display().to_string(),
            report,
            alignment,
        });
    }

    print!("{}", render_eval(args, label, &rows));
    Ok(())
}

fn render_eval(args: &EvalArgs, label: &str, rows: &[EvalRow]) -> String {
    let metric_id = match args.metric {
        MetricArg::Ase => "ase",
        MetricArg::Ate => "ate",
        MetricArg::Rpe => "rpe",
    };
    match args.format {
        FormatArg::Table => {
            let mut out = format!("Metric  {label}\n");
            let width = rows
                .iter()
                .map(|r| r.estimator.len())
                .chain(std::iter::once("Estimator".len()))
                .max()
                .unwrap();
            out.push_str(&format!(
                "{:width$}  {:>15}  {:>15}  {:>15}\n",
                "Estimator", "RMSE", "STD", "Median"
            ));
            for row in rows {
                out.push_str(&format!(
                    "{:width$}  {:>15}  {:>15}  {:>15}\n",
                    row.estimator,
                    fmt9(row.report.rmse),
                    fmt9(row.report.std),
                    fmt9(row.report.median)
                ));
            }
            out
        }
        FormatArg::Json => {
            let objects: Vec<String> = rows
                .iter()
                .map(|row| {
                    let q = row.alignment.rotation.quaternion_xyzw();
                    let t = row.alignment.translation;
                    let mut obj = format!(
                        "{{\"metric\":{},\"count\":{},\"rmse\":{},\"std\":{},\"median\":{},\
                         \"align\":{{\"s\":{},\"quat_xyzw\":[{},{},{},{}],\"t\":[{},{},{}]}}",
                        json_string(metric_id),
                        row.report.count,
                        fmt9(row.report.rmse),
                        fmt9(row.report.std),
                        fmt9(row.report.median),
                        fmt9(row.alignment.scale),
                        fmt9(q[0]),
                        fmt9(q[1]),
                        fmt9(q[2]),
                        fmt9(q[3]),
                        fmt9(t.x),
                        fmt9(t.y),
                        fmt9(t.z)
                    );
                    if args.per_step {
                        let steps: Vec<String> =
                            row.report.per_step.iter().map(|e| fmt9(*e)).collect();
                        obj.push_str(&format!(",\"per_step\":[{}]", steps.join(",")));
                    }
                    obj.push('}');
                    obj
                })
                .collect();
            if objects.len() == 1 {
                format!("{}\n", objects[0])
            } else {
                format!("[{}]\n", objects.join(","))
            }
        }
        FormatArg::Csv => {
            let mut out = String::from("metric,estimator,count,rmse,std,median\n");
            for row in rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    csv_field(label),
                    csv_field(&row.estimator),
                    row.report.count,
                    fmt9(row.report.rmse),
                    fmt9(row.report.std),
                    fmt9(row.report.median)
                ));
            }
            out
        }
    }
}

pub fn sample(args: &SampleArgs) -> Result<(), CliError> {
    let raw = fs::read(&args.input)
        .map_err(|e| CliError::input(format!("{}: {e}", args.input.display())))?;
    let fit = deserialize_fit::<f64>(&raw).map_err(|e| CliError::from(e).in_file(&args.input))?;
    if fit.dims() != 3 {
        return Err(CliError::input(format!(
            "{}: fit has {} axes, trajectory sampling needs 3",
            args.input.display(),
            fit.dims()
        )));
    }
    let start = args.start.unwrap_or_else(|| fit.domain().a());
    let end = args.end.unwrap_or_else(|| fit.domain().b());
    let times = uniform_times(start, end, args.rate)?;
    let states = times
        .iter()
        .map(|&t| {
            let p = fit.evaluate(t)?;
            Ok(StampedState {
                t,
                state: ExtendedPose::new(
                    Rotation::identity(),
                    Vector3::new(p[0], p[1], p[2]),
                    Vector3::zeros(),
                ),
            })
        })
        .collect::<Result<Vec<_>, ChebyshevError>>()?;
    let traj = Trajectory64::new(states, false).map_err(CliError::from)?;

    let output = args
        .output
        .clone()
        .unwrap_or_else(|| args.input.with_extension("resampled.tum"));
    write_file(&output, write_tum(&traj).as_bytes())?;

    let summary = Summary::new()
        .str("input", args.input.display().to_string())
        .int("degree", fit.degree() as u64)
        .float("rate", args.rate)
        .int("samples", traj.len() as u64)
        .str("output", output.display().to_string());
    print!("{}", summary.render(args.format));
    Ok(())
}
