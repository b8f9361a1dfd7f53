use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use expander_lab::barrier::{build_region, random_trajectories, verify_invariance};
use expander_lab::params::{
    admissible_types, classify_equilibria, solvable_case, validate_type, EigenPair,
    EquilibriumClass, HopfFamily, LomseSpec,
};
use expander_lab::solver::{
    asymptotic_angle, certify_grid, dirichlet_solve, uniqueness_check, uniqueness_radius,
    SolverConfig, SolverError, DEFAULT_VARIANTS,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{Format, ParamsArgs, ReplayArgs, SolveArgs, SweepArgs, TypeArgs, VerifyArgs};
use crate::manifest::{manifest_path, timestamp, JobKind, RunManifest, TOOL_VERSION};
use crate::output::{
    json, profile_csv, sweep_csv, ProfileDocument, SweepDocument, SweepRow, PROFILE_SCHEMA,
    SWEEP_SCHEMA,
};
use crate::CliError;

/// Boundary samples per arc for the invariance report.
pub const INVARIANCE_SAMPLES: usize = 10_000;
/// Random interior trajectories and their time span.
pub const TRAJECTORY_COUNT: usize = 100;
pub const TRAJECTORY_SPAN: f64 = 15.0;

fn spec_of(n: i64, p: i64, k: i64) -> Result<LomseSpec, CliError> {
    validate_type(n, p, k).map_err(|e| CliError::Inadmissible(e.to_string()))
}

fn solver_error(err: SolverError) -> CliError {
    match err {
        SolverError::UnsupportedCase { .. } => CliError::Unsupported(err.to_string()),
        SolverError::InvalidInput(msg) => CliError::Usage(msg),
        other => CliError::Numerical {
            name: other.name(),
            message: other.to_string(),
        },
    }
}

fn config(scale: f64) -> Result<SolverConfig, CliError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(CliError::Usage(format!(
            "--tolerance-scale {scale} must be positive"
        )));
    }
    Ok(SolverConfig::default().with_tolerance_scale(scale))
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut threads =
        jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    if let Ok(cap) = std::env::var("EXPANDER_LAB_THREADS") {
        let cap: usize = cap.trim().parse().ok().filter(|&c| c > 0).ok_or_else(|| {
            CliError::Usage(format!(
                "EXPANDER_LAB_THREADS={cap:?} is not a positive integer"
            ))
        })?;
        threads = threads.min(cap);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Io(e.to_string()))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct ParamsReport {
    n: u32,
    p: u32,
    k: u32,
    family: HopfFamily,
    lambda: f64,
    lambda_sq: f64,
    phi0: f64,
    #[serde(flatten)]
    class: EquilibriumClass,
    solvable: bool,
    uniqueness_radius: f64,
}

fn family_name(family: HopfFamily) -> String {
    match family {
        HopfFamily::Complex { l } => format!("complex Hopf, l = {l}"),
        HopfFamily::Quaternionic { l } => format!("quaternionic Hopf, l = {l}"),
        HopfFamily::Octonionic => "octonionic Hopf".into(),
    }
}

fn eigen_text(pair: EigenPair) -> String {
    match pair {
        EigenPair::Real { first, second } => format!("{first}, {second}"),
        EigenPair::ComplexConjugate { re, im } => format!("{re} ± {im}i"),
    }
}

pub fn params(args: &ParamsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let TypeArgs { n, p, k } = args.spec;
    let spec = spec_of(n, p, k)?;
    let class = classify_equilibria(&spec);
    let report = ParamsReport {
        n: spec.n(),
        p: spec.p(),
        k: spec.k(),
        family: spec.family(),
        lambda: spec.lambda(),
        lambda_sq: spec.lambda_sq(),
        phi0: spec.phi0(),
        class,
        solvable: solvable_case(&spec),
        uniqueness_radius: uniqueness_radius(&spec),
    };
    let text = if args.json {
        json(&report)
    } else {
        let rows = [
            ("type", spec.to_string()),
            ("family", family_name(spec.family())),
            ("lambda", report.lambda.to_string()),
            ("lambda^2", report.lambda_sq.to_string()),
            ("phi0", report.phi0.to_string()),
            (
                "origin",
                format!(
                    "{}, {}",
                    class.origin_eigenvalues.0, class.origin_eigenvalues.1
                ),
            ),
            ("cone point", eigen_text(class.cone_point_eigenvalues)),
            ("discriminant", class.discriminant.to_string()),
            ("kind", class.kind.to_string()),
            (
                "solvable",
                if report.solvable { "yes" } else { "no" }.into(),
            ),
            ("uniqueness R", report.uniqueness_radius.to_string()),
        ];
        let mut text = String::new();
        for (key, value) in rows {
            let _ = writeln!(text, "{key:<14}{value}");
        }
        text
    };
    out.write_all(text.as_bytes()).map_err(CliError::from)
}

/// Output of one solve or sweep job.
struct JobOutput {
    text: String,
    failed: usize,
    total: usize,
}

fn run_job(m: &RunManifest, jobs: Option<usize>) -> Result<JobOutput, CliError> {
    let spec = spec_of(m.n.into(), m.p.into(), m.k.into())?;
    match m.command {
        JobKind::Solve => {
            let (&[eps], &[radius]) = (m.epsilon.as_slice(), m.radius.as_slice()) else {
                return Err(CliError::Usage(
                    "a solve manifest holds exactly one eps and one R".into(),
                ));
            };
            if m.points.is_some_and(|p| p < 2) {
                return Err(CliError::Usage("--points must be at least 2".into()));
            }
            let profile =
                dirichlet_solve(&spec, eps, radius, &m.tolerances).map_err(solver_error)?;
            let angle = asymptotic_angle(&profile).map_err(solver_error)?;
            let doc = ProfileDocument {
                schema: PROFILE_SCHEMA.into(),
                n: m.n,
                p: m.p,
                k: m.k,
                epsilon: eps,
                radius,
                phi_inf: angle.phi_inf,
                phi_inf_error: angle.error_bound,
                k_hat: profile.diagnostics.small_r_exponent,
                diagnostics: profile.diagnostics.clone(),
                samples: m
                    .points
                    .map_or_else(|| profile.samples(), |p| profile.resample(p)),
            };
            let text = match m.format {
                Format::Csv => profile_csv(&doc),
                Format::Json => json(&doc),
            };
            Ok(JobOutput {
                text,
                failed: 0,
                total: 1,
            })
        }
        JobKind::Sweep => {
            if m.epsilon.is_empty() || m.radius.is_empty() {
                return Err(CliError::Usage(
                    "empty grid: give at least one --epsilon and one --radius".into(),
                ));
            }
            build_region(&spec).map_err(|e| CliError::Unsupported(e.to_string()))?;
            let grid: Vec<(f64, f64)> = m
                .epsilon
                .iter()
                .flat_map(|&e| m.radius.iter().map(move |&r| (e, r)))
                .collect();
            let cfg = m.tolerances;
            let rows: Vec<SweepRow> = pool(jobs)?.install(|| {
                grid.par_iter()
                    .map(
                        |&(eps, radius)| match dirichlet_solve(&spec, eps, radius, &cfg) {
                            Ok(profile) => SweepRow {
                                eps,
                                radius,
                                phi_inf: Some(profile.phi_inf),
                                k_hat: profile.diagnostics.small_r_exponent,
                                residual: Some(profile.diagnostics.max_residual),
                                status: "ok".into(),
                            },
                            Err(err) => SweepRow {
                                eps,
                                radius,
                                phi_inf: None,
                                k_hat: None,
                                residual: None,
                                status: err.name().into(),
                            },
                        },
                    )
                    .collect()
            });
            let failed = rows.iter().filter(|r| r.status != "ok").count();
            let doc = SweepDocument {
                schema: SWEEP_SCHEMA.into(),
                n: m.n,
                p: m.p,
                k: m.k,
                rows,
            };
            let text = match m.format {
                Format::Csv => sweep_csv(&doc),
                Format::Json => json(&doc),
            };
            Ok(JobOutput {
                text,
                failed,
                total: grid.len(),
            })
        }
    }
}

fn emit(
    m: &RunManifest,
    result: JobOutput,
    out_path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    match out_path {
        Some(path) => {
            write_file(path, &result.text)?;
            write_file(&manifest_path(path), &json(m))?;
        }
        None => out.write_all(result.text.as_bytes())?,
    }
    if result.failed > 0 {
        return Err(CliError::Numerical {
            name: "SweepFailure",
            message: format!("{} of {} runs failed", result.failed, result.total),
        });
    }
    Ok(())
}

fn manifest(
    kind: JobKind,
    spec: &LomseSpec,
    eps: Vec<f64>,
    radius: Vec<f64>,
    format: Format,
) -> RunManifest {
    RunManifest {
        command: kind,
        n: spec.n(),
        p: spec.p(),
        k: spec.k(),
        epsilon: eps,
        radius,
        format,
        points: None,
        tolerances: SolverConfig::default(),
        seeds: Vec::new(),
        tool_version: TOOL_VERSION.into(),
        timestamp: timestamp(),
    }
}

pub fn solve(args: &SolveArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let TypeArgs { n, p, k } = args.spec;
    let spec = spec_of(n, p, k)?;
    let m = RunManifest {
        points: args.points,
        tolerances: config(args.tolerance_scale)?,
        ..manifest(
            JobKind::Solve,
            &spec,
            vec![args.epsilon],
            vec![args.radius],
            args.format,
        )
    };
    let result = run_job(&m, None)?;
    emit(&m, result, args.out.as_deref(), out)
}

pub fn sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let TypeArgs { n, p, k } = args.spec;
    let spec = spec_of(n, p, k)?;
    let m = RunManifest {
        tolerances: config(args.tolerance_scale)?,
        ..manifest(
            JobKind::Sweep,
            &spec,
            args.epsilon.clone(),
            args.radius.clone(),
            args.format,
        )
    };
    let result = run_job(&m, args.jobs)?;
    emit(&m, result, args.out.as_deref(), out)
}

pub fn replay(args: &ReplayArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.manifest)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.manifest.display())))?;
    let recorded: RunManifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid manifest: {e}")))?;
    if recorded.tool_version != TOOL_VERSION {
        writeln!(
            err,
            "warning: manifest written by version {}, replaying with {TOOL_VERSION}",
            recorded.tool_version
        )?;
    }
    let result = run_job(&recorded, None)?;
    let m = RunManifest {
        timestamp: timestamp(),
        ..recorded
    };
    emit(&m, result, args.out.as_deref(), out)
}

#[derive(Debug, Clone, Serialize)]
struct VerifyRow {
    n: u32,
    p: u32,
    k: u32,
    invariance_ok: bool,
    min_inflow: f64,
    trajectories_ok: bool,
    max_exit: f64,
    eps: Option<f64>,
    radius: Option<f64>,
    max_residual: Option<f64>,
    envelope_ok: bool,
    certified: bool,
    uniqueness_radius: f64,
    uniqueness_sup: Option<f64>,
    uniqueness_threshold: Option<f64>,
    uniqueness_ok: bool,
    errors: Vec<String>,
    pass: bool,
}

fn verify_one(spec: &LomseSpec, seed: u64) -> Result<VerifyRow, CliError> {
    let region = build_region(spec).map_err(|e| CliError::Unsupported(e.to_string()))?;
    let cfg = SolverConfig::default();
    let invariance = verify_invariance(&region, 0.0, INVARIANCE_SAMPLES);
    let trajectories = random_trajectories(&region, TRAJECTORY_COUNT, seed, TRAJECTORY_SPAN);
    let mut errors = Vec::new();
    let profile = certify_grid(spec, &cfg)
        .map_err(|e| errors.push(format!("profile: {}", e.name())))
        .ok();
    let r_u = uniqueness_radius(spec);
    let eps = profile.as_ref().map_or(0.05, |p| p.eps);
    let uniqueness = uniqueness_check(spec, eps, r_u, &cfg, DEFAULT_VARIANTS)
        .map_err(|e| errors.push(format!("uniqueness: {}", e.name())))
        .ok();
    let d = profile.as_ref().map(|p| &p.diagnostics);
    let certified = d.is_some_and(|d| d.certified());
    let uniqueness_ok = uniqueness.as_ref().is_some_and(|u| u.pass);
    Ok(VerifyRow {
        n: spec.n(),
        p: spec.p(),
        k: spec.k(),
        invariance_ok: invariance.pass,
        min_inflow: invariance
            .min_bottom_inflow
            .min(invariance.min_barrier_inflow),
        trajectories_ok: trajectories.pass(),
        max_exit: trajectories.max_exit,
        eps: profile.as_ref().map(|p| p.eps),
        radius: profile.as_ref().map(|p| p.radius),
        max_residual: d.map(|d| d.max_residual),
        envelope_ok: d.is_some_and(|d| d.envelope_ok),
        certified,
        uniqueness_radius: r_u,
        uniqueness_sup: uniqueness.as_ref().map(|u| u.sup_difference),
        uniqueness_threshold: uniqueness.as_ref().map(|u| u.threshold),
        uniqueness_ok,
        errors,
        pass: invariance.pass && trajectories.pass() && certified && uniqueness_ok,
    })
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAIL"
    }
}

fn short(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.3e}"))
}

fn verify_table(rows: &[VerifyRow]) -> String {
    let mut text = format!(
        "{:<12}{:<12}{:<14}{:<12}{:<12}{:<12}{:<10}{:<12}{}\n",
        "type",
        "invariance",
        "trajectories",
        "eps",
        "R",
        "residual",
        "envelope",
        "uniqueness",
        "result"
    );
    for row in rows {
        let _ = writeln!(
            text,
            "{:<12}{:<12}{:<14}{:<12}{:<12}{:<12}{:<10}{:<12}{}",
            format!("({},{},{})", row.n, row.p, row.k),
            mark(row.invariance_ok),
            mark(row.trajectories_ok),
            short(row.eps),
            short(row.radius),
            short(row.max_residual),
            mark(row.envelope_ok),
            mark(row.uniqueness_ok),
            if row.pass { "PASS" } else { "FAIL" }
        );
        for e in &row.errors {
            let _ = writeln!(text, "    {e}");
        }
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    let _ = writeln!(text, "{} of {} types pass", rows.len() - failed, rows.len());
    text
}

pub fn verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let specs: Vec<LomseSpec> = if args.all_solvable {
        admissible_types(args.max_n, args.max_k)
            .into_iter()
            .filter(|s| build_region(s).is_ok())
            .collect()
    } else {
        let (Some(n), Some(p), Some(k)) = (args.n, args.p, args.k) else {
            return Err(CliError::Usage(
                "give --n, --p and --k, or --all-solvable".into(),
            ));
        };
        vec![spec_of(n, p, k)?]
    };
    if specs.is_empty() {
        return Err(CliError::Usage("no solvable types in range".into()));
    }
    let rows: Vec<VerifyRow> = pool(args.jobs)?.install(|| {
        specs
            .par_iter()
            .map(|spec| verify_one(spec, args.seed))
            .collect::<Result<_, _>>()
    })?;
    let text = if args.json {
        json(&rows)
    } else {
        verify_table(&rows)
    };
    out.write_all(text.as_bytes())?;
    let failed = rows.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(CliError::Numerical {
            name: "VerificationFailure",
            message: format!("{failed} of {} types failed", rows.len()),
        });
    }
    Ok(())
}
