//! The expander construction: stable curve at the origin in backward time,
//! Dirichlet matching `φ(-T) = eps`, forward extension through `Δ`, and the
//! checks that certify the result.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barrier::{build_region, BarrierError, InvariantRegion, DEFAULT_SLACK};
use crate::dynamics::{
    from_saddle_coords, relative_residual, saddle_field, saddle_field_autonomous,
    saddle_perturbation, ExpanderField, PhiPsiState, SaddleCoords, Similarity,
};
use crate::integrator::{
    integrate_stiff, State, StepSettings, Termination, Tolerances, Trajectory,
};
use crate::params::LomseSpec;
use crate::stable_curve::{
    admissible_entry, find_stable_initial, fit_decay_rate, least_squares_slope,
    stable_initial_value, PerturbedSaddleSystem, ShootingConfig, ShootingError, Stage,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("unsupported case {spec}: {reason}")]
    UnsupportedCase { spec: String, reason: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("shooting bracket failure: {0}")]
    BracketFailure(String),
    #[error("forward trajectory left the invariant region at t = {t} by {distance:e}")]
    RegionViolation { t: f64, distance: f64 },
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("fit window too short: {0}")]
    WindowTooShort(String),
}

impl SolverError {
    /// Stable identifier used in reports and exit messages.
    pub fn name(&self) -> &'static str {
        match self {
            SolverError::UnsupportedCase { .. } => "UnsupportedCase",
            SolverError::InvalidInput(_) => "InvalidInput",
            SolverError::BracketFailure(_) => "BracketFailure",
            SolverError::RegionViolation { .. } => "RegionViolation",
            SolverError::NoConvergence(_) => "NoConvergence",
            SolverError::WindowTooShort(_) => "WindowTooShort",
        }
    }
}

impl From<BarrierError> for SolverError {
    fn from(err: BarrierError) -> Self {
        match err {
            BarrierError::UnsupportedCase { spec, reason } => SolverError::UnsupportedCase {
                spec: spec.to_string(),
                reason,
            },
        }
    }
}

impl From<ShootingError> for SolverError {
    fn from(err: ShootingError) -> Self {
        match err {
            ShootingError::BracketFailure { .. } => SolverError::BracketFailure(err.to_string()),
            ShootingError::InvalidConfig(msg) => SolverError::InvalidInput(msg),
            ShootingError::WindowTooShort { .. } | ShootingError::NonPositive { .. } => {
                SolverError::WindowTooShort(err.to_string())
            }
            other => SolverError::NoConvergence(other.to_string()),
        }
    }
}

/// The expander system in saddle coordinates and reversed time `s = -t`:
/// `κ = k - 1`, `μ = n + k`, `β = 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpanderSaddle {
    spec: LomseSpec,
}

impl ExpanderSaddle {
    pub fn new(spec: LomseSpec) -> Self {
        Self { spec }
    }
}

impl PerturbedSaddleSystem for ExpanderSaddle {
    fn kappa(&self) -> f64 {
        f64::from(self.spec.k()) - 1.0
    }

    fn mu(&self) -> f64 {
        f64::from(self.spec.n() + self.spec.k())
    }

    fn beta(&self) -> f64 {
        2.0
    }

    fn nonlinear(&self, x: f64, y: f64) -> (f64, f64) {
        let (xs, ys) = saddle_field_autonomous(x, y, &self.spec);
        (xs + self.kappa() * x, ys - self.mu() * y)
    }

    fn perturbation(&self, x: f64, y: f64) -> (f64, f64) {
        saddle_perturbation(x, y, &self.spec)
    }

    fn field(&self, t: f64, x: f64, y: f64) -> (f64, f64) {
        saddle_field(
            &SaddleCoords { s: t, x, y },
            &self.spec,
            Similarity::Expander,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Cone aperture `M`.
    pub aperture: f64,
    pub delta: f64,
    /// The forward integration gives up at this `t`.
    pub forward_horizon: f64,
    /// `|psi|` and the drift of `phi` over the last unit of `t` must fall below this.
    pub settle_tol: f64,
    /// Relative tolerance on `phi(-T) = eps`.
    pub matching_tol: f64,
    pub max_secant_iterations: usize,
    pub shooting_rel_tol: f64,
    pub forward_rel_tol: f64,
    pub forward_abs_tol: f64,
    /// The backward tail is followed until `r` has dropped by this many decades.
    pub tail_decades: f64,
    pub bracket_scale: (f64, f64),
    pub region_slack: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            aperture: 0.1,
            delta: 0.5,
            forward_horizon: 20.0,
            settle_tol: 1e-9,
            matching_tol: 1e-10,
            max_secant_iterations: 40,
            shooting_rel_tol: 1e-12,
            forward_rel_tol: 1e-10,
            forward_abs_tol: 1e-15,
            tail_decades: 4.0,
            bracket_scale: (1.0, 1.0),
            region_slack: DEFAULT_SLACK,
        }
    }
}

impl SolverConfig {
    /// Multiply every integration tolerance by `factor`.
    pub fn with_tolerance_scale(mut self, factor: f64) -> Self {
        self.shooting_rel_tol *= factor;
        self.forward_rel_tol *= factor;
        self.forward_abs_tol *= factor;
        self
    }

    fn shooting(&self, sys: &ExpanderSaddle, eps: f64, start_time: f64) -> ShootingConfig {
        let mut cfg = ShootingConfig::new(self.aperture, eps, start_time);
        let decades = self.tail_decades * sys.kappa();
        cfg.convergence_radius = eps * 1e-8f64.min(10f64.powf(-decades));
        cfg.horizon = start_time + (60.0f64).max(3.0 * self.tail_decades * std::f64::consts::LN_10);
        cfg.tolerances = Tolerances::new(self.shooting_rel_tol, 1e-12 * cfg.convergence_radius);
        cfg.bracket_scale = self.bracket_scale;
        cfg
    }

    fn forward_tolerances(&self) -> Tolerances {
        Tolerances::new(self.forward_rel_tol, self.forward_abs_tol)
    }
}

/// One row of a profile table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub r: f64,
    pub f: f64,
    pub f_r: f64,
    pub phi: f64,
    pub psi: f64,
    pub t: f64,
}

impl ProfileSample {
    /// Row at log-radius `t`: `r = e^t`, `f = r phi`, `f_r = phi + psi`.
    pub fn from_state(t: f64, phi: f64, psi: f64) -> Self {
        let r = t.exp();
        Self {
            r,
            f: r * phi,
            f_r: phi + psi,
            phi,
            psi,
            t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Largest relative residual of the profile equation.
    pub max_residual: f64,
    /// Fitted decay rate of `X` along the backward tail.
    pub decay_fit: Option<f64>,
    /// `κ - δ`.
    pub decay_bound: f64,
    /// Fitted exponent of `f ~ r^k_hat` near the origin.
    pub small_r_exponent: Option<f64>,
    pub envelope_ok: bool,
    pub in_region_ok: bool,
    pub monotone_ok: bool,
    pub below_cone_ok: bool,
    pub psi_final: f64,
}

/// A computed expander together with its certification data.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpanderProfile {
    pub spec: LomseSpec,
    pub eps: f64,
    /// Dirichlet radius `R = e^{-T}`.
    pub radius: f64,
    pub start_time: f64,
    /// Entry abscissa `X(T)` produced by the secant loop.
    pub entry_abscissa: f64,
    pub y_star: f64,
    /// `(phi, psi)` against `t`, from `-T` until settled.
    pub forward: Trajectory,
    /// `(X, Y)` against `s = -t`, from `T` down to the capture radius.
    pub tail: Trajectory,
    pub stages: Vec<Stage>,
    pub secant_iterations: usize,
    /// `|phi(-T) - eps|`.
    pub matching_error: f64,
    pub phi_inf: f64,
    pub diagnostics: Diagnostics,
}

impl ExpanderProfile {
    /// Profile rows ordered by increasing `r`: the tail, then the forward part.
    pub fn samples(&self) -> Vec<ProfileSample> {
        let n = f64::from(self.spec.n());
        let k = f64::from(self.spec.k());
        let mut out: Vec<ProfileSample> = self
            .tail
            .samples()
            .iter()
            .rev()
            .filter(|(s, _)| *s > self.start_time)
            .map(|&(s, [x, y])| ProfileSample::from_state(-s, x + y, (k - 1.0) * x - (n + k) * y))
            .collect();
        out.extend(
            self.forward
                .samples()
                .iter()
                .map(|&(t, [phi, psi])| ProfileSample::from_state(t, phi, psi)),
        );
        out
    }

    /// `points` rows equally spaced in `t = log r` from the end of the tail to
    /// the end of the forward part, read off the dense output.
    pub fn resample(&self, points: usize) -> Vec<ProfileSample> {
        let points = points.max(2);
        let (a, b) = (-self.tail.end_time(), self.forward.end_time());
        (0..points)
            .filter_map(|i| {
                let t = if i + 1 == points {
                    b
                } else {
                    a + (b - a) * i as f64 / (points - 1) as f64
                };
                self.state_at(t)
                    .map(|(phi, psi)| ProfileSample::from_state(t, phi, psi))
            })
            .collect()
    }

    /// `(phi, psi)` at log-radius `t`, from the tail when `t < -T`.
    pub fn state_at(&self, t: f64) -> Option<(f64, f64)> {
        if t >= -self.start_time {
            return self.forward.at(t).map(|z| (z[0], z[1]));
        }
        let [x, y] = self.tail.at(-t)?;
        let n = f64::from(self.spec.n());
        let k = f64::from(self.spec.k());
        Some((x + y, (k - 1.0) * x - (n + k) * y))
    }

    /// `f(r)`, or `None` below the end of the tail or past the forward end.
    pub fn f_at(&self, r: f64) -> Option<f64> {
        if !(r > 0.0) {
            return None;
        }
        let t = r.ln();
        self.state_at(t).map(|(phi, _)| r * phi)
    }

    pub fn final_state(&self) -> PhiPsiState {
        let [phi, psi] = self.forward.final_state();
        PhiPsiState::new(self.forward.end_time(), phi, psi)
    }

    /// Smallest radius reached by the tail.
    pub fn min_radius(&self) -> f64 {
        (-self.tail.end_time()).exp()
    }
}

/// `C̃ = 2 λ² (n - p) φ₀³ / (3√3)`.
pub fn envelope_constant(spec: &LomseSpec) -> f64 {
    let phi0 = spec.phi0();
    2.0 * spec.lambda_sq() * f64::from(spec.n() - spec.p()) * phi0.powi(3) / (3.0 * 3f64.sqrt())
}

/// `λ^{-2/(2k-3)}`, the largest radius covered by the uniqueness statement.
pub fn uniqueness_radius(spec: &LomseSpec) -> f64 {
    spec.lambda().powf(-2.0 / (2.0 * f64::from(spec.k()) - 3.0))
}

fn stable_curve_at(
    sys: &ExpanderSaddle,
    cfg: &SolverConfig,
    entry: f64,
    start_time: f64,
) -> Result<crate::stable_curve::StableCurve, SolverError> {
    Ok(find_stable_initial(
        sys,
        &cfg.shooting(sys, entry, start_time),
    )?)
}

/// Samples per local interpolant on the forward (stiff) part.
const DENSE_NODES: usize = 6;

fn integrate_forward(
    spec: &LomseSpec,
    start: PhiPsiState,
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    let field = ExpanderField { spec: *spec };
    let tol = cfg.forward_tolerances();
    let mut total: Option<Trajectory> = None;
    let mut t = start.t;
    let mut y = [start.phi, start.psi];
    let mut initial_step = None;
    while t < cfg.forward_horizon {
        let t_next = (t + 1.0).min(cfg.forward_horizon);
        let settings = StepSettings {
            initial_step,
            ..StepSettings::default()
        };
        let mut piece = integrate_stiff(&field, t, y, t_next, tol, &[], settings);
        piece.rebuild_from_samples(DENSE_NODES);
        if let Termination::StepFailure(msg) = piece.termination() {
            return Err(SolverError::NoConvergence(format!(
                "forward integration: {msg}"
            )));
        }
        initial_step = Some(piece.last_step().abs().max(1e-6));
        y = piece.final_state();
        t = piece.end_time();
        let traj = match total.as_mut() {
            Some(existing) => {
                existing.append(piece);
                existing
            }
            None => total.insert(piece),
        };
        if t - start.t >= 1.0 && settled(traj, t, cfg.settle_tol) {
            let mut traj = total.expect("set above");
            // Past this point psi is below what f_r = phi + psi can resolve
            // at large r, so the profile ends where psi first stays small.
            let first_small = traj
                .samples()
                .iter()
                .rposition(|(_, z)| z[1].abs() >= cfg.settle_tol)
                .map_or(0, |i| i + 1);
            let cut = traj.samples()[first_small].0;
            traj.truncate_at(cut);
            return Ok(traj);
        }
    }
    Err(SolverError::NoConvergence(format!(
        "psi not below {} by t = {}",
        cfg.settle_tol, cfg.forward_horizon
    )))
}

fn settled(traj: &Trajectory, t: f64, tol: f64) -> bool {
    let Some(before) = traj.at(t - 1.0) else {
        return false;
    };
    let end = traj.final_state();
    (end[0] - before[0]).abs() < tol
        && traj
            .samples()
            .iter()
            .filter(|(ts, _)| *ts >= t - 1.0)
            .all(|(_, z)| z[1].abs() < tol)
}

fn check_region(
    region: &InvariantRegion,
    forward: &Trajectory,
    slack: f64,
) -> Result<(), SolverError> {
    for &(t, [phi, psi]) in forward.samples() {
        let distance = region.exit_distance(&PhiPsiState::new(t, phi, psi));
        if distance > slack {
            return Err(SolverError::RegionViolation { t, distance });
        }
    }
    Ok(())
}

fn flat_profile(
    spec: &LomseSpec,
    start_time: f64,
    cfg: &SolverConfig,
) -> Result<ExpanderProfile, SolverError> {
    let forward = integrate_forward(spec, PhiPsiState::new(-start_time, 0.0, 0.0), cfg)?;
    let tail = crate::integrator::integrate(
        &|_, _: &State| [0.0, 0.0],
        start_time,
        [0.0, 0.0],
        start_time,
        Tolerances::new(1.0, 1.0),
        &[],
        StepSettings::default(),
    );
    let mut profile = ExpanderProfile {
        spec: *spec,
        eps: 0.0,
        radius: (-start_time).exp(),
        start_time,
        entry_abscissa: 0.0,
        y_star: 0.0,
        forward,
        tail,
        stages: Vec::new(),
        secant_iterations: 0,
        matching_error: 0.0,
        phi_inf: 0.0,
        diagnostics: empty_diagnostics(),
    };
    profile.diagnostics = certify(&profile, cfg);
    Ok(profile)
}

fn empty_diagnostics() -> Diagnostics {
    Diagnostics {
        max_residual: 0.0,
        decay_fit: None,
        decay_bound: 0.0,
        small_r_exponent: None,
        envelope_ok: true,
        in_region_ok: true,
        monotone_ok: true,
        below_cone_ok: true,
        psi_final: 0.0,
    }
}

/// Build the expander with `phi(-T) = eps`.
pub fn build_expander(
    spec: &LomseSpec,
    eps: f64,
    start_time: f64,
    cfg: &SolverConfig,
) -> Result<ExpanderProfile, SolverError> {
    let region = build_region(spec)?;
    if !eps.is_finite() || eps < 0.0 {
        return Err(SolverError::InvalidInput(format!(
            "eps = {eps} must be a finite non-negative number"
        )));
    }
    if eps >= spec.phi0() {
        return Err(SolverError::InvalidInput(format!(
            "eps = {eps} must lie below the cone slope {}",
            spec.phi0()
        )));
    }
    if !start_time.is_finite() {
        return Err(SolverError::InvalidInput(format!(
            "start time {start_time} is not finite"
        )));
    }
    if -start_time >= cfg.forward_horizon {
        return Err(SolverError::InvalidInput(format!(
            "start t = {} is past the forward horizon",
            -start_time
        )));
    }
    if eps == 0.0 {
        return flat_profile(spec, start_time, cfg);
    }

    let sys = ExpanderSaddle::new(*spec);
    let mut entry = eps;
    let mut previous: Option<(f64, f64)> = None;
    let mut result = None;
    for iteration in 1..=cfg.max_secant_iterations {
        // Only the first stage decides Y*; the full curve is followed once
        // the entry abscissa is matched.
        let y_star = stable_initial_value(&sys, &cfg.shooting(&sys, entry, start_time))?;
        let residual = entry + y_star - eps;
        if residual.abs() <= cfg.matching_tol * eps {
            result = Some((entry, iteration, residual.abs()));
            break;
        }
        let next = match previous {
            Some((e0, r0)) if residual != r0 => entry - residual * (entry - e0) / (residual - r0),
            _ => entry - residual,
        };
        if !(next > 0.0) || !next.is_finite() {
            return Err(SolverError::NoConvergence(format!(
                "secant step left the entry range at {next}"
            )));
        }
        previous = Some((entry, residual));
        entry = next;
    }
    let Some((entry, secant_iterations, matching_error)) = result else {
        return Err(SolverError::NoConvergence(format!(
            "phi(-T) not matched to eps within {} secant iterations",
            cfg.max_secant_iterations
        )));
    };
    let curve = stable_curve_at(&sys, cfg, entry, start_time)?;

    let start = from_saddle_coords(start_time, entry, curve.y_star, spec);
    let forward = integrate_forward(spec, start, cfg)?;
    check_region(&region, &forward, cfg.region_slack)?;
    let [phi_end, psi_end] = forward.final_state();
    let phi_inf = phi_end + 0.5 * psi_end;
    let mut profile = ExpanderProfile {
        spec: *spec,
        eps,
        radius: (-start_time).exp(),
        start_time,
        entry_abscissa: entry,
        y_star: curve.y_star,
        forward,
        tail: curve.trajectory,
        stages: curve.stages,
        secant_iterations,
        matching_error,
        phi_inf,
        diagnostics: empty_diagnostics(),
    };
    profile.diagnostics = certify(&profile, cfg);
    Ok(profile)
}

/// Solve with the Dirichlet condition `f(R) = eps R`.
pub fn dirichlet_solve(
    spec: &LomseSpec,
    eps: f64,
    radius: f64,
    cfg: &SolverConfig,
) -> Result<ExpanderProfile, SolverError> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(SolverError::InvalidInput(format!(
            "radius R = {radius} must be positive"
        )));
    }
    let profile = build_expander(spec, eps, -radius.ln(), cfg)?;
    let f_r = profile.f_at(radius).unwrap_or(f64::NAN);
    let target = eps * radius;
    if !((f_r - target).abs() <= 1e-10 * target.max(f64::MIN_POSITIVE)
        || (eps == 0.0 && f_r == 0.0))
    {
        return Err(SolverError::NoConvergence(format!(
            "f(R) = {f_r} misses eps R = {target}"
        )));
    }
    Ok(profile)
}

/// Largest relative residual of the profile equation, with `f_rr` obtained
/// by central differences of the dense output at every step midpoint.
pub fn max_residual(profile: &ExpanderProfile) -> f64 {
    let spec = &profile.spec;
    let mut worst: f64 = 0.0;
    let mut check = |t: f64, phi: f64, psi: f64, psi_t: f64| {
        let r = t.exp();
        let f_rr = (psi_t + psi) / r;
        if let Ok(res) = relative_residual(r, r * phi, phi + psi, f_rr, spec, Similarity::Expander)
        {
            worst = worst.max(if res.is_nan() { f64::INFINITY } else { res });
        }
    };
    for w in profile.forward.samples().windows(2) {
        let (a, b) = (w[0].0, w[1].0);
        let mid = 0.5 * (a + b);
        let h = 1e-3 * (b - a);
        let (Some(zp), Some(zm), Some(z)) = (
            profile.forward.at(mid + h),
            profile.forward.at(mid - h),
            profile.forward.at(mid),
        ) else {
            continue;
        };
        check(mid, z[0], z[1], (zp[1] - zm[1]) / (2.0 * h));
    }
    let n = f64::from(spec.n());
    let k = f64::from(spec.k());
    let psi_of = |z: State| (k - 1.0) * z[0] - (n + k) * z[1];
    for w in profile.tail.samples().windows(2) {
        let (a, b) = (w[0].0, w[1].0);
        let mid = 0.5 * (a + b);
        let h = 1e-3 * (b - a);
        let (Some(zp), Some(zm), Some(z)) = (
            profile.tail.at(mid + h),
            profile.tail.at(mid - h),
            profile.tail.at(mid),
        ) else {
            continue;
        };
        // d/dt = -d/ds.
        let psi_t = -(psi_of(zp) - psi_of(zm)) / (2.0 * h);
        check(-mid, z[0] + z[1], psi_of(z), psi_t);
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub constant: f64,
    /// Samples where the difference quotient of `psi` is positive.
    pub rising_samples: usize,
    pub violations: usize,
    /// Largest `psi e^{2t} / C̃` over the rising samples.
    pub max_ratio: f64,
    pub psi_final: f64,
    pub psi_final_ok: bool,
    pub ok: bool,
}

/// Final `|psi|` accepted as "tends to zero".
pub const PSI_FINAL_TOL: f64 = 1e-8;

/// Check `psi < C̃ e^{-2t}` wherever `psi` is increasing, on `(t, psi)`
/// samples ordered by `t`. The sign of `psi_t` comes from the backward
/// difference quotient between consecutive samples.
pub fn check_envelope_samples(spec: &LomseSpec, samples: &[(f64, f64)]) -> EnvelopeReport {
    let constant = envelope_constant(spec);
    let mut rising = 0;
    let mut violations = 0;
    let mut max_ratio: f64 = 0.0;
    for w in samples.windows(2) {
        let ((t0, psi0), (t1, psi1)) = (w[0], w[1]);
        if (psi1 - psi0) / (t1 - t0) > 0.0 {
            rising += 1;
            let envelope = constant * (-2.0 * t1).exp();
            max_ratio = max_ratio.max(psi1 / envelope);
            if !(psi1 < envelope) {
                violations += 1;
            }
        }
    }
    let psi_final = samples.last().map_or(0.0, |s| s.1);
    let psi_final_ok = psi_final.abs() < PSI_FINAL_TOL;
    EnvelopeReport {
        constant,
        rising_samples: rising,
        violations,
        max_ratio,
        psi_final,
        psi_final_ok,
        ok: violations == 0 && psi_final_ok,
    }
}

pub fn check_envelope(profile: &ExpanderProfile) -> EnvelopeReport {
    let samples: Vec<(f64, f64)> = profile
        .forward
        .samples()
        .iter()
        .map(|&(t, z)| (t, z[1]))
        .collect();
    check_envelope_samples(&profile.spec, &samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AngleEstimate {
    pub phi_inf: f64,
    /// `∫ψ` beyond the last sample, bounded with the envelope.
    pub error_bound: f64,
}

/// `phi_inf`, the slope of the asymptotic cone.
pub fn asymptotic_angle(profile: &ExpanderProfile) -> Result<AngleEstimate, SolverError> {
    if profile.eps == 0.0 {
        return Ok(AngleEstimate {
            phi_inf: 0.0,
            error_bound: 0.0,
        });
    }
    let end = profile.final_state();
    if !(end.psi.abs() < PSI_FINAL_TOL) {
        return Err(SolverError::NoConvergence(format!(
            "psi = {} at the last sample",
            end.psi
        )));
    }
    let bound = 0.5 * envelope_constant(&profile.spec) * (-2.0 * end.t).exp();
    // psi decays like e^{-2t}, so the remaining rise of phi is psi / 2.
    Ok(AngleEstimate {
        phi_inf: end.phi + 0.5 * end.psi,
        error_bound: bound.max(0.5 * end.psi.abs()),
    })
}

/// Number of decades of `r` the small-`r` fit must span.
pub const MIN_FIT_DECADES: f64 = 3.0;

/// Least-squares slope of `log f` against `log r` over `(r, f)` pairs.
pub fn small_r_exponent_from_samples(samples: &[(f64, f64)]) -> Result<f64, SolverError> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(r, f)| *r > 0.0 && *f > 0.0)
        .map(|(r, f)| (r.ln(), f.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(SolverError::WindowTooShort(
            "fewer than three positive samples".into(),
        ));
    }
    let lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let decades = (hi - lo) / std::f64::consts::LN_10;
    if decades < MIN_FIT_DECADES {
        return Err(SolverError::WindowTooShort(format!(
            "{decades:.2} decades of r, need {MIN_FIT_DECADES}"
        )));
    }
    Ok(least_squares_slope(&pts))
}

/// Exponent `k_hat` in `f ~ r^k_hat` fitted on the backward tail.
pub fn small_r_exponent(profile: &ExpanderProfile) -> Result<f64, SolverError> {
    let (s0, s1) = (profile.start_time, profile.tail.end_time());
    let count = 400;
    let samples: Vec<(f64, f64)> = (0..count)
        .filter_map(|i| {
            let s = s0 + (s1 - s0) * f64::from(i) / f64::from(count - 1);
            let r = (-s).exp();
            profile.f_at(r).map(|f| (r, f))
        })
        .collect();
    small_r_exponent_from_samples(&samples)
}

/// Decay rate of `X` on the later three quarters of the tail.
pub fn backward_decay(profile: &ExpanderProfile) -> Result<f64, SolverError> {
    let (s0, s1) = (profile.start_time, profile.tail.end_time());
    Ok(fit_decay_rate(&profile.tail, s0 + 0.25 * (s1 - s0), s1)?)
}

fn certify(profile: &ExpanderProfile, cfg: &SolverConfig) -> Diagnostics {
    let spec = &profile.spec;
    let kappa = f64::from(spec.k()) - 1.0;
    let tol = cfg.forward_tolerances();
    let forward = profile.forward.samples();
    let monotone_ok = forward
        .windows(2)
        .all(|w| w[1].1[0] >= w[0].1[0] - 10.0 * (tol.abs + tol.rel * w[0].1[0].abs()));
    let below_cone_ok = profile.samples().iter().all(|s| s.phi < spec.phi0());
    let in_region_ok = build_region(spec).is_ok_and(|region| {
        forward.iter().all(|&(t, [phi, psi])| {
            region.exit_distance(&PhiPsiState::new(t, phi, psi)) <= cfg.region_slack
        })
    });
    Diagnostics {
        max_residual: max_residual(profile),
        decay_fit: if profile.eps > 0.0 {
            backward_decay(profile).ok()
        } else {
            None
        },
        decay_bound: kappa - cfg.delta,
        small_r_exponent: if profile.eps > 0.0 {
            small_r_exponent(profile).ok()
        } else {
            None
        },
        envelope_ok: check_envelope(profile).ok,
        in_region_ok,
        monotone_ok,
        below_cone_ok,
        psi_final: profile.forward.final_state()[1],
    }
}

/// Settings that distinguish the two runs of [`uniqueness_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunVariant {
    /// Seeds the bracket perturbation.
    pub seed: u64,
    /// Multiplies every integration tolerance.
    pub tolerance_scale: f64,
}

pub const DEFAULT_VARIANTS: [RunVariant; 2] = [
    RunVariant {
        seed: 1,
        tolerance_scale: 1.0,
    },
    RunVariant {
        seed: 2,
        tolerance_scale: 0.5,
    },
];

/// Base configuration with bracket ends drawn from `[0.5, 1] M X` by the
/// variant's seed and tolerances scaled.
pub fn variant_config(base: &SolverConfig, variant: RunVariant) -> SolverConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(variant.seed);
    let upper = rng.random_range(0.5..=1.0);
    let lower = rng.random_range(0.5..=1.0);
    SolverConfig {
        bracket_scale: (upper, lower),
        ..base.with_tolerance_scale(variant.tolerance_scale)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub sup_difference: f64,
    pub threshold: f64,
    /// Radius below which the profiles are bounded by monotonicity.
    pub resolved_from: f64,
    pub variants: [RunVariant; 2],
    pub phi_inf: [f64; 2],
    pub pass: bool,
}

/// Solve twice with independently perturbed brackets and tolerances and
/// compare `f` on `[0, R]`.
pub fn uniqueness_check(
    spec: &LomseSpec,
    eps: f64,
    radius: f64,
    base: &SolverConfig,
    variants: [RunVariant; 2],
) -> Result<UniquenessReport, SolverError> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(SolverError::InvalidInput(format!(
            "uniqueness needs eps in (0, 1], got {eps}"
        )));
    }
    let limit = uniqueness_radius(spec);
    if !(radius > 0.0 && radius <= limit * (1.0 + 1e-12)) {
        return Err(SolverError::InvalidInput(format!(
            "uniqueness needs R in (0, {limit}], got {radius}"
        )));
    }
    let a = dirichlet_solve(spec, eps, radius, &variant_config(base, variants[0]))?;
    let b = dirichlet_solve(spec, eps, radius, &variant_config(base, variants[1]))?;

    // Below the shallower tail both profiles are positive and increasing,
    // so their difference is bounded by the larger value there.
    let r_min = a.min_radius().max(b.min_radius());
    let mut sup: f64 = match (a.f_at(r_min), b.f_at(r_min)) {
        (Some(fa), Some(fb)) => fa.abs().max(fb.abs()),
        _ => f64::INFINITY,
    };
    let count = 4000;
    let (la, lb) = (r_min.ln(), radius.ln());
    for i in 0..=count {
        let r = if i == count {
            radius
        } else {
            (la + (lb - la) * f64::from(i) / f64::from(count)).exp()
        };
        match (a.f_at(r), b.f_at(r)) {
            (Some(fa), Some(fb)) => sup = sup.max((fa - fb).abs()),
            _ => sup = f64::INFINITY,
        }
    }
    let threshold = 1e-6 * eps * radius;
    Ok(UniquenessReport {
        sup_difference: sup,
        threshold,
        resolved_from: r_min,
        variants,
        phi_inf: [a.phi_inf, b.phi_inf],
        pass: sup < threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusScan {
    pub rows: Vec<(f64, Result<f64, String>)>,
    pub last_success: Option<f64>,
    /// First radius (in scan order) at which the construction failed.
    pub first_failure: Option<f64>,
}

/// Solve on increasing radii; the first failure estimates `R0`.
pub fn estimate_r0(spec: &LomseSpec, eps: f64, radii: &[f64], cfg: &SolverConfig) -> RadiusScan {
    let mut rows = Vec::new();
    let mut last_success = None;
    let mut first_failure = None;
    for &radius in radii {
        match dirichlet_solve(spec, eps, radius, cfg) {
            Ok(profile) => {
                last_success = Some(radius);
                rows.push((radius, Ok(profile.phi_inf)));
            }
            Err(err) => {
                rows.push((radius, Err(err.name().to_string())));
                first_failure = Some(radius);
                break;
            }
        }
    }
    RadiusScan {
        rows,
        last_success,
        first_failure,
    }
}

/// Sampled `(eps0, T0)` of the expander system in saddle coordinates.
pub fn entry_bounds(spec: &LomseSpec, cfg: &SolverConfig) -> Result<(f64, f64), SolverError> {
    Ok(admissible_entry(
        &ExpanderSaddle::new(*spec),
        cfg.aperture,
        cfg.delta,
    )?)
}

/// Default search grids for a certified `(eps, T)` pair.
pub const EPS_GRID: [f64; 3] = [0.1, 0.05, 0.01];
pub const T_GRID: [f64; 3] = [2.0, 3.0, 5.0];

/// Residual level a profile must reach to count as certified.
pub const RESIDUAL_TOL: f64 = 1e-6;

impl Diagnostics {
    pub fn certified(&self) -> bool {
        self.max_residual < RESIDUAL_TOL
            && self.envelope_ok
            && self.in_region_ok
            && self.monotone_ok
            && self.below_cone_ok
    }
}

/// First `(eps, T)` on the default grids whose profile certifies.
pub fn certify_grid(spec: &LomseSpec, cfg: &SolverConfig) -> Result<ExpanderProfile, SolverError> {
    let mut last_err = None;
    for eps in EPS_GRID {
        for t in T_GRID {
            match build_expander(spec, eps, t, cfg) {
                Ok(profile) if profile.diagnostics.certified() => return Ok(profile),
                Ok(_) => {}
                Err(err @ SolverError::UnsupportedCase { .. }) => return Err(err),
                Err(err) => last_err = Some(err),
            }
        }
    }
    Err(last_err.unwrap_or_else(|| SolverError::NoConvergence("no grid point certified".into())))
}
