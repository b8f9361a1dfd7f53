//! Stable curves of non-autonomously perturbed planar saddles.
//!
//! The systems have the form
//!
//! ```text
//! X_t = -κ X + f1(X, Y) + e^{-βt} g1(X, Y)
//! Y_t =  μ Y + f2(X, Y) + e^{-βt} g2(X, Y)
//! ```
//!
//! with `f_i` superlinear and `g_i` at most linear at the origin. On the
//! entry segment `{X = eps, |Y| <= M eps}` at time `T`, solutions leaving the
//! cone `|Y| <= M X` through the top and through the bottom form two open
//! intervals; whatever lies between them converges to the origin. Exit
//! classification plus bisection turns this into an algorithm.
//!
//! A double-precision bisection pins the stable initial value to a few ulps,
//! and the saddle amplifies that residual at rate `κ + μ`, so one shot cannot
//! follow the curve all the way to a small convergence radius. The engine
//! therefore works in stages: once the two bracketing shots start to separate
//! it restarts the bisection on the entry segment through the current point.

use serde::Serialize;
use thiserror::Error;

use crate::integrator::{
    self, Crossing, Event, State, StepSettings, Termination, Tolerances, Trajectory,
};

pub trait PerturbedSaddleSystem {
    /// Contraction rate along `X`.
    fn kappa(&self) -> f64;
    /// Expansion rate along `Y`.
    fn mu(&self) -> f64;
    /// Decay exponent of the perturbation.
    fn beta(&self) -> f64;
    /// `(f1, f2)`.
    fn nonlinear(&self, x: f64, y: f64) -> (f64, f64);
    /// `(g1, g2)`.
    fn perturbation(&self, x: f64, y: f64) -> (f64, f64);

    fn field(&self, t: f64, x: f64, y: f64) -> (f64, f64) {
        let (f1, f2) = self.nonlinear(x, y);
        let (g1, g2) = self.perturbation(x, y);
        let w = (-self.beta() * t).exp();
        (-self.kappa() * x + f1 + w * g1, self.mu() * y + f2 + w * g2)
    }
}

/// `X_t = -κX + a X²`, `Y_t = μY + c X² + e^{-βt} γ X`.
///
/// With `a = γ = 0` the stable curve is exactly `Y = -c X² / (2κ + μ)`;
/// with `c = 0` as well it is the axis `Y = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticSaddle {
    pub kappa: f64,
    pub mu: f64,
    pub beta: f64,
    pub x_quadratic: f64,
    pub y_quadratic: f64,
    pub forcing: f64,
}

impl QuadraticSaddle {
    pub fn linear(kappa: f64, mu: f64) -> Self {
        Self {
            kappa,
            mu,
            beta: 1.0,
            x_quadratic: 0.0,
            y_quadratic: 0.0,
            forcing: 0.0,
        }
    }

    /// `X_t = -X`, `Y_t = Y + X²`, stable curve `Y = -X²/3`.
    pub fn unit_quadratic() -> Self {
        Self {
            y_quadratic: 1.0,
            ..Self::linear(1.0, 1.0)
        }
    }

    /// Stable curve when the system is autonomous and `a = 0`.
    pub fn exact_stable_y(&self, x: f64) -> Option<f64> {
        (self.x_quadratic == 0.0 && self.forcing == 0.0)
            .then(|| -self.y_quadratic * x * x / (2.0 * self.kappa + self.mu))
    }
}

impl PerturbedSaddleSystem for QuadraticSaddle {
    fn kappa(&self) -> f64 {
        self.kappa
    }

    fn mu(&self) -> f64 {
        self.mu
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn nonlinear(&self, x: f64, _y: f64) -> (f64, f64) {
        (self.x_quadratic * x * x, self.y_quadratic * x * x)
    }

    fn perturbation(&self, x: f64, _y: f64) -> (f64, f64) {
        (0.0, self.forcing * x)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShootingError {
    #[error("invalid shooting configuration: {0}")]
    InvalidConfig(String),
    #[error("undecided exit for Y0 = {y0}: norm not decreasing at the horizon t = {time}")]
    Undecided { y0: f64, time: f64 },
    #[error("bracket failure at t = {time}: upper end exits {upper:?}, lower end exits {lower:?}")]
    BracketFailure {
        time: f64,
        upper: ExitClass,
        lower: ExitClass,
    },
    #[error("continuation stalled at t = {time}")]
    Stalled { time: f64 },
    #[error("integration failed: {0}")]
    IntegrationFailure(String),
    #[error("fit window [{from}, {to}] is too short or not covered")]
    WindowTooShort { from: f64, to: f64 },
    #[error("X is not positive at t = {time}")]
    NonPositive { time: f64 },
    #[error("no admissible (eps, T) pair in the search grid")]
    NoAdmissiblePair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitClass {
    Top,
    Bottom,
    Converged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShootingConfig {
    /// Cone aperture `M`.
    pub aperture: f64,
    /// Entry abscissa.
    pub eps: f64,
    /// Start time `T`.
    pub start_time: f64,
    /// Horizon `t_max`.
    pub horizon: f64,
    pub convergence_radius: f64,
    /// Absolute width at which bisection stops on the first stage; later
    /// stages scale it with their entry abscissa.
    pub bisect_tol: f64,
    pub tolerances: Tolerances,
    /// Fractions of `M X` used for the upper and lower bracket ends.
    pub bracket_scale: (f64, f64),
}

/// Relative separation of the bracketing shots (in units of `X`) beyond which
/// a stage is cut and restarted.
pub const STAGE_SEPARATION: f64 = 1e-10;

const MAX_STAGES: usize = 200;
const MIN_STAGE_PROGRESS: f64 = 1e-3;

impl ShootingConfig {
    pub fn new(aperture: f64, eps: f64, start_time: f64) -> Self {
        let convergence_radius = 1e-8 * eps;
        Self {
            aperture,
            eps,
            start_time,
            horizon: start_time + 60.0,
            convergence_radius,
            bisect_tol: 1e-18 * eps,
            tolerances: Tolerances::new(1e-12, 1e-12 * convergence_radius),
            bracket_scale: (1.0, 1.0),
        }
    }

    pub fn validate(&self) -> Result<(), ShootingError> {
        let positive = [
            ("aperture", self.aperture),
            ("eps", self.eps),
            ("convergence_radius", self.convergence_radius),
            ("bisect_tol", self.bisect_tol),
            ("rel_tol", self.tolerances.rel),
            ("abs_tol", self.tolerances.abs),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ShootingError::InvalidConfig(format!(
                    "{name} = {value} must be positive"
                )));
            }
        }
        if !self.start_time.is_finite() || !(self.horizon > self.start_time) {
            return Err(ShootingError::InvalidConfig(format!(
                "horizon {} must exceed the start time {}",
                self.horizon, self.start_time
            )));
        }
        let (up, down) = self.bracket_scale;
        if !(up > 0.0 && up <= 1.0 && down > 0.0 && down <= 1.0) {
            return Err(ShootingError::InvalidConfig(format!(
                "bracket scales ({up}, {down}) must lie in (0, 1]"
            )));
        }
        Ok(())
    }
}

/// One classified shot.
#[derive(Debug, Clone, PartialEq)]
pub struct Shot {
    pub class: ExitClass,
    pub trajectory: Trajectory,
}

fn system_rhs<S: PerturbedSaddleSystem + ?Sized>(sys: &S) -> impl Fn(f64, &State) -> State + '_ {
    move |t, z| {
        let (a, b) = sys.field(t, z[0], z[1]);
        [a, b]
    }
}

fn shoot_from<S: PerturbedSaddleSystem + ?Sized>(
    sys: &S,
    cfg: &ShootingConfig,
    t0: f64,
    x0: f64,
    y0: f64,
    capture: bool,
) -> Result<Shot, ShootingError> {
    let m = cfg.aperture;
    let r2 = if capture {
        cfg.convergence_radius * cfg.convergence_radius
    } else {
        0.0
    };
    let start = [x0, y0];
    let just = |class| Shot {
        class,
        trajectory: integrator::integrate(
            &|_, _: &State| [0.0, 0.0],
            t0,
            start,
            t0,
            cfg.tolerances,
            &[],
            StepSettings::default(),
        ),
    };
    if capture && x0 * x0 + y0 * y0 <= r2 {
        return Ok(just(ExitClass::Converged));
    }
    // Starting on an edge: the sign of the outward flux decides.
    let (xt, yt) = sys.field(t0, x0, y0);
    if y0 >= m * x0 && yt - m * xt > 0.0 {
        return Ok(just(ExitClass::Top));
    }
    if y0 <= -m * x0 && yt + m * xt < 0.0 {
        return Ok(just(ExitClass::Bottom));
    }

    let rhs = system_rhs(sys);
    let mut events = vec![
        Event::new("top", Crossing::Rising, move |_, z: &State| z[1] - m * z[0]),
        Event::new("bottom", Crossing::Falling, move |_, z: &State| {
            z[1] + m * z[0]
        }),
    ];
    if capture {
        events.push(Event::new(
            "converged",
            Crossing::Falling,
            move |_, z: &State| z[0] * z[0] + z[1] * z[1] - r2,
        ));
    }
    let trajectory = integrator::integrate(
        &rhs,
        t0,
        start,
        cfg.horizon,
        cfg.tolerances,
        &events,
        StepSettings::default(),
    );
    let class = match trajectory.termination() {
        Termination::Event("top") => ExitClass::Top,
        Termination::Event("bottom") => ExitClass::Bottom,
        Termination::Event(_) => ExitClass::Converged,
        Termination::StepFailure(msg) => {
            return Err(ShootingError::IntegrationFailure(msg.clone()))
        }
        Termination::ReachedEnd => {
            let end = trajectory.end_time();
            let norm = |z: State| z[0].hypot(z[1]);
            let earlier = trajectory.at(end - 1.0).map(norm).unwrap_or(f64::INFINITY);
            let last = norm(trajectory.final_state());
            if last < earlier || last <= cfg.convergence_radius {
                ExitClass::Converged
            } else {
                return Err(ShootingError::Undecided { y0, time: end });
            }
        }
    };
    Ok(Shot { class, trajectory })
}

/// Integrate from `(X, Y)(T) = (eps, y0)` and report how the solution leaves
/// the cone `|Y| <= M X`, together with its trajectory.
pub fn shoot<S: PerturbedSaddleSystem + ?Sized>(
    sys: &S,
    cfg: &ShootingConfig,
    y0: f64,
) -> Result<Shot, ShootingError> {
    cfg.validate()?;
    if y0.abs() > cfg.aperture * cfg.eps || !y0.is_finite() {
        return Err(ShootingError::InvalidConfig(format!(
            "|Y0| = {} exceeds M eps = {}",
            y0.abs(),
            cfg.aperture * cfg.eps
        )));
    }
    shoot_from(sys, cfg, cfg.start_time, cfg.eps, y0, true)
}

pub fn classify_exit<S: PerturbedSaddleSystem + ?Sized>(
    sys: &S,
    cfg: &ShootingConfig,
    y0: f64,
) -> Result<ExitClass, ShootingError> {
    shoot(sys, cfg, y0).map(|s| s.class)
}

/// Bisection record of one continuation stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stage {
    pub start_time: f64,
    pub x: f64,
    /// Final bracket: `lower` exits through the bottom, `upper` through the top.
    pub lower: f64,
    pub upper: f64,
    pub y_star: f64,
    pub iterations: usize,
    /// Distance between `y_star` and the value carried over from the
    /// previous stage.
    pub jump: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StableCurve {
    /// Stable initial value on the entry segment at `T`.
    pub y_star: f64,
    /// Stitched trajectory from `T` down to the convergence radius.
    pub trajectory: Trajectory,
    pub stages: Vec<Stage>,
    pub class: ExitClass,
}

impl StableCurve {
    /// Largest jump in `Y` introduced where stages were stitched.
    pub fn max_stitch_jump(&self) -> f64 {
        self.stages.iter().map(|s| s.jump).fold(0.0, f64::max)
    }
}

/// Last time in the common window at which the two bracketing shots are
/// still within [`STAGE_SEPARATION`] of each other, relative to `X`.
fn separation_time(lower: &Trajectory, upper: &Trajectory) -> f64 {
    let t0 = lower.start_time();
    let t1 = lower.end_time().min(upper.end_time());
    let steps = (((t1 - t0) / 0.01).ceil() as usize).max(1);
    let mut last_ok = t0;
    for i in 0..=steps {
        let t = if i == steps {
            t1
        } else {
            t0 + (t1 - t0) * i as f64 / steps as f64
        };
        let (Some(a), Some(b)) = (lower.at(t), upper.at(t)) else {
            break;
        };
        if (a[1] - b[1]).abs() > STAGE_SEPARATION * a[0].abs() {
            break;
        }
        last_ok = t;
    }
    last_ok
}

struct StageBisection {
    lower: f64,
    upper: f64,
    lower_shot: Shot,
    upper_shot: Shot,
    iterations: usize,
    converged: Option<(f64, Shot)>,
}

fn bisect_stage<S: PerturbedSaddleSystem + ?Sized>(
    sys: &S,
    cfg: &ShootingConfig,
    t0: f64,
    x0: f64,
) -> Result<StageBisection, ShootingError> {
    let m = cfg.aperture;
    let (up_scale, down_scale) = cfg.bracket_scale;
    let mut upper = m * x0 * up_scale;
    let mut lower = -m * x0 * down_scale;
    let mut upper_shot = shoot_from(sys, cfg, t0, x0, upper, false)?;
    let mut lower_shot = shoot_from(sys, cfg, t0, x0, lower, false)?;
    if upper_shot.class != ExitClass::Top || lower_shot.class != ExitClass::Bottom {
        return Err(ShootingError::BracketFailure {
            time: t0,
            upper: upper_shot.class,
            lower: lower_shot.class,
        });
    }

    let width_tol = cfg.bisect_tol * x0 / cfg.eps;
    let mut iterations = 0;
    let mut converged: Option<(f64, Shot)> = None;
    while upper - lower > width_tol {
        let mid = 0.5 * (lower + upper);
        if mid <= lower || mid >= upper {
            break;
        }
        iterations += 1;
        let shot = shoot_from(sys, cfg, t0, x0, mid, false)?;
        match shot.class {
            ExitClass::Top => {
                upper = mid;
                upper_shot = shot;
            }
            ExitClass::Bottom => {
                lower = mid;
                lower_shot = shot;
            }
            ExitClass::Converged => {
                converged = Some((mid, shot));
                break;
            }
        }
    }
    Ok(StageBisection {
        lower,
        upper,
        lower_shot,
        upper_shot,
        iterations,
        converged,
    })
}

/// `Y*` alone: the first stage of [`find_stable_initial`] without the
/// continuation, so the result equals `find_stable_initial(..).y_star`.
pub fn stable_initial_value<S: PerturbedSaddleSystem + ?Sized>(
    sys: &S,
    cfg: &ShootingConfig,
) -> Result<f64, ShootingError> {
    cfg.validate()?;
    let b = bisect_stage(sys, cfg, cfg.start_time, cfg.eps)?;
    Ok(b.converged.map_or(0.5 * (b.lower + b.upper), |(y, _)| y))
}

/// Locate the stable initial value `Y*` with `X(T) = eps` and follow the
/// stable curve to the convergence radius.
pub fn find_stable_initial<S: PerturbedSaddleSystem + ?Sized>(
    sys: &S,
    cfg: &ShootingConfig,
) -> Result<StableCurve, ShootingError> {
    cfg.validate()?;
    let mut stages: Vec<Stage> = Vec::new();
    let mut total: Option<Trajectory> = None;
    let mut t0 = cfg.start_time;
    let mut x0 = cfg.eps;
    let mut carried: Option<f64> = None;

    loop {
        if stages.len() >= MAX_STAGES {
            return Err(ShootingError::Stalled { time: t0 });
        }
        let StageBisection {
            lower,
            upper,
            lower_shot,
            iterations,
            converged,
            upper_shot,
        } = bisect_stage(sys, cfg, t0, x0)?;

        let y_star = converged
            .as_ref()
            .map_or(0.5 * (lower + upper), |(y, _)| *y);
        stages.push(Stage {
            start_time: t0,
            x: x0,
            lower,
            upper,
            y_star,
            iterations,
            jump: carried.map_or(0.0, |y| (y - y_star).abs()),
        });

        // A shot that never leaves the cone is final; otherwise keep the
        // part where both bracket ends still agree.
        let (mut piece, mut done) = match converged {
            Some((_, shot)) => (shot.trajectory, true),
            None => {
                let cut = separation_time(&lower_shot.trajectory, &upper_shot.trajectory);
                if cut - t0 < MIN_STAGE_PROGRESS {
                    return Err(ShootingError::Stalled { time: t0 });
                }
                let mut piece = lower_shot.trajectory;
                piece.truncate_at(cut);
                (piece, false)
            }
        };
        if let Some(t_hit) = first_time_within(&piece, cfg.convergence_radius) {
            piece.truncate_at(t_hit);
            done = true;
        }
        let [x_cut, y_cut] = piece.final_state();
        let end = piece.end_time();
        carried = Some(y_cut);
        match total.as_mut() {
            Some(t) => t.append(piece),
            None => total = Some(piece),
        }
        if done {
            return Ok(StableCurve {
                y_star: stages[0].y_star,
                trajectory: total.expect("at least one stage"),
                stages,
                class: ExitClass::Converged,
            });
        }
        t0 = end;
        x0 = x_cut;
        if !(x0 > 0.0) {
            return Err(ShootingError::NonPositive { time: t0 });
        }
    }
}

/// First time the trajectory enters the ball of the given radius, located by
/// bisection on the dense output.
fn first_time_within(traj: &Trajectory, radius: f64) -> Option<f64> {
    let norm = |z: State| z[0].hypot(z[1]);
    let samples = traj.samples();
    let idx = samples.iter().position(|&(_, z)| norm(z) <= radius)?;
    if idx == 0 {
        return Some(samples[0].0);
    }
    let (mut a, mut b) = (samples[idx - 1].0, samples[idx].0);
    while (b - a).abs() > integrator::EVENT_TIME_TOLERANCE {
        let mid = 0.5 * (a + b);
        if mid <= a.min(b) || mid >= a.max(b) {
            break;
        }
        if norm(traj.at(mid)?) <= radius {
            b = mid;
        } else {
            a = mid;
        }
    }
    Some(b)
}

/// Minimum window length accepted by [`fit_decay_rate`].
pub const MIN_FIT_WINDOW: f64 = 0.5;

/// Negated least-squares slope of `log X` against `t` on `[from, to]`.
pub fn fit_decay_rate(trajectory: &Trajectory, from: f64, to: f64) -> Result<f64, ShootingError> {
    let short = ShootingError::WindowTooShort { from, to };
    if !(to - from >= MIN_FIT_WINDOW) {
        return Err(short);
    }
    let count = 400;
    let mut pts = Vec::with_capacity(count);
    for i in 0..count {
        let t = from + (to - from) * i as f64 / (count - 1) as f64;
        let z = trajectory.at(t).ok_or_else(|| short.clone())?;
        if !(z[0] > 0.0) {
            return Err(ShootingError::NonPositive { time: t });
        }
        pts.push((t, z[0].ln()));
    }
    Ok(-least_squares_slope(&pts))
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Sample points per certified set in [`admissible_entry`].
pub const ENTRY_SAMPLES: usize = 1000;
pub const ENTRY_MAX_HALVINGS: i32 = 30;
pub const ENTRY_MAX_TIME: u32 = 20;

/// Whether the entry conditions hold for `(eps, T)` at the sample points.
///
/// The field is affine in `w = e^{-βt}`, so checking `w = e^{-βT}` and `w = 0`
/// covers every `t >= T`.
pub fn entry_conditions_hold<S: PerturbedSaddleSystem + ?Sized>(
    sys: &S,
    aperture: f64,
    delta: f64,
    eps: f64,
    start_time: f64,
) -> bool {
    let kappa = sys.kappa();
    let weights = [(-sys.beta() * start_time).exp(), 0.0];
    let field = |x: f64, y: f64, w: f64| {
        let (f1, f2) = sys.nonlinear(x, y);
        let (g1, g2) = sys.perturbation(x, y);
        (-kappa * x + f1 + w * g1, sys.mu() * y + f2 + w * g2)
    };
    let cols = 40;
    let rows = ENTRY_SAMPLES / cols;
    for w in weights {
        for i in 0..cols {
            let x = eps * (i + 1) as f64 / cols as f64;
            for j in 0..rows {
                let y = aperture * x * (-1.0 + 2.0 * j as f64 / (rows - 1) as f64);
                if field(x, y, w).0 > -(kappa - delta) * x {
                    return false;
                }
            }
        }
        for i in 0..ENTRY_SAMPLES {
            let x = eps * (i + 1) as f64 / ENTRY_SAMPLES as f64;
            if field(x, aperture * x, w).1 <= 0.0 || field(x, -aperture * x, w).1 >= 0.0 {
                return false;
            }
        }
    }
    true
}

/// Largest `eps0 = 2^{-j}` and, for it, smallest integer `T0` at which the
/// sampled entry conditions hold.
pub fn admissible_entry<S: PerturbedSaddleSystem + ?Sized>(
    sys: &S,
    aperture: f64,
    delta: f64,
) -> Result<(f64, f64), ShootingError> {
    if !(delta > 0.0 && delta < sys.kappa()) || !(aperture > 0.0) {
        return Err(ShootingError::InvalidConfig(format!(
            "need 0 < delta < kappa and M > 0, got delta = {delta}, M = {aperture}"
        )));
    }
    for j in 0..=ENTRY_MAX_HALVINGS {
        let eps = 2f64.powi(-j);
        for t in 0..=ENTRY_MAX_TIME {
            if entry_conditions_hold(sys, aperture, delta, eps, f64::from(t)) {
                return Ok((eps, f64::from(t)));
            }
        }
    }
    Err(ShootingError::NoAdmissiblePair)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_classification() {
        let sys = QuadraticSaddle::linear(1.0, 2.0);
        let cfg = ShootingConfig::new(0.5, 0.1, 0.0);
        assert_eq!(classify_exit(&sys, &cfg, 0.025).unwrap(), ExitClass::Top);
        assert_eq!(
            classify_exit(&sys, &cfg, -0.025).unwrap(),
            ExitClass::Bottom
        );
        assert_eq!(
            classify_exit(&sys, &cfg, 0.0).unwrap(),
            ExitClass::Converged
        );
    }

    #[test]
    fn quadratic_manifold_point_converges() {
        let sys = QuadraticSaddle::unit_quadratic();
        let mut cfg = ShootingConfig::new(0.5, 0.3, 0.0);
        // One shot from the exact value only tracks the manifold so far.
        cfg.convergence_radius = 1e-3;
        assert_eq!(
            classify_exit(&sys, &cfg, -0.03).unwrap(),
            ExitClass::Converged
        );
    }

    #[test]
    fn out_of_cone_start_rejected() {
        let sys = QuadraticSaddle::linear(1.0, 1.0);
        let cfg = ShootingConfig::new(0.1, 0.1, 0.0);
        assert!(matches!(
            classify_exit(&sys, &cfg, 0.02),
            Err(ShootingError::InvalidConfig(_))
        ));
    }

    #[test]
    fn edge_start_uses_flux() {
        let sys = QuadraticSaddle::linear(1.0, 1.0);
        let cfg = ShootingConfig::new(0.1, 0.1, 0.0);
        assert_eq!(classify_exit(&sys, &cfg, 0.01).unwrap(), ExitClass::Top);
        assert_eq!(classify_exit(&sys, &cfg, -0.01).unwrap(), ExitClass::Bottom);
    }

    #[test]
    fn linear_stable_value_is_zero() {
        let sys = QuadraticSaddle::linear(1.5, 3.0);
        let cfg = ShootingConfig::new(0.1, 0.2, 1.0);
        let curve = find_stable_initial(&sys, &cfg).unwrap();
        assert!(curve.y_star.abs() <= cfg.bisect_tol);
        let rho = fit_decay_rate(&curve.trajectory, 2.0, 8.0).unwrap();
        assert!((rho - 1.5).abs() < 1e-6, "{rho}");
    }

    #[test]
    fn quadratic_stable_value() {
        let sys = QuadraticSaddle::unit_quadratic();
        for eps in [0.1, 0.2, 0.3] {
            for t in [0.0, 2.0, 5.0] {
                let cfg = ShootingConfig::new(0.5, eps, t);
                let curve = find_stable_initial(&sys, &cfg).unwrap();
                assert!(
                    (curve.y_star + eps * eps / 3.0).abs() < 1e-6,
                    "{eps} {t}: {}",
                    curve.y_star
                );
                assert_eq!(curve.class, ExitClass::Converged);
                let [x, y] = curve.trajectory.final_state();
                assert!(x.hypot(y) <= cfg.convergence_radius * (1.0 + 1e-6));
            }
        }
    }

    #[test]
    fn first_stage_value_matches_the_full_search() {
        let sys = QuadraticSaddle {
            mu: 6.0,
            ..QuadraticSaddle::unit_quadratic()
        };
        for eps in [0.1, 0.3] {
            let cfg = ShootingConfig::new(0.5, eps, 0.5);
            let full = find_stable_initial(&sys, &cfg).unwrap();
            assert_eq!(stable_initial_value(&sys, &cfg).unwrap(), full.y_star);
        }
    }

    #[test]
    fn continuation_stays_on_the_curve() {
        // A strong saddle forces several stages.
        let sys = QuadraticSaddle {
            mu: 6.0,
            ..QuadraticSaddle::unit_quadratic()
        };
        let cfg = ShootingConfig::new(0.5, 0.3, 0.0);
        let curve = find_stable_initial(&sys, &cfg).unwrap();
        assert!(curve.stages.len() > 1);
        for &(t, z) in curve.trajectory.samples() {
            let exact = sys.exact_stable_y(z[0]).unwrap();
            assert!(
                (z[1] - exact).abs() <= 1e-8 * z[0] + 1e-20,
                "t = {t}: {z:?}"
            );
        }
        let rho = fit_decay_rate(&curve.trajectory, 1.0, 15.0).unwrap();
        assert!((rho - 1.0).abs() < 1e-3);
        assert!(curve.max_stitch_jump() <= STAGE_SEPARATION * 0.3 * 10.0);
    }

    #[test]
    fn bracket_failure_is_reported() {
        // The forcing pushes every solution up at early times.
        let sys = QuadraticSaddle {
            forcing: 50.0,
            beta: 0.1,
            ..QuadraticSaddle::linear(1.0, 1.0)
        };
        let cfg = ShootingConfig::new(0.1, 0.1, 0.0);
        assert!(matches!(
            find_stable_initial(&sys, &cfg),
            Err(ShootingError::BracketFailure { .. })
        ));
    }

    #[test]
    fn fit_rejects_short_window() {
        let sys = QuadraticSaddle::linear(1.0, 1.0);
        let curve = find_stable_initial(&sys, &ShootingConfig::new(0.1, 0.1, 0.0)).unwrap();
        assert!(matches!(
            fit_decay_rate(&curve.trajectory, 1.0, 1.1),
            Err(ShootingError::WindowTooShort { .. })
        ));
        assert!(matches!(
            fit_decay_rate(&curve.trajectory, 1.0, 500.0),
            Err(ShootingError::WindowTooShort { .. })
        ));
    }

    #[test]
    fn entry_for_linear_system() {
        let sys = QuadraticSaddle::linear(1.0, 1.0);
        assert_eq!(admissible_entry(&sys, 0.3, 0.5).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn entry_for_quadratic_contraction() {
        let sys = QuadraticSaddle {
            x_quadratic: 1.0,
            ..QuadraticSaddle::linear(1.0, 1.0)
        };
        let (eps0, t0) = admissible_entry(&sys, 1.0, 0.5).unwrap();
        assert!(eps0 <= 0.5);
        assert_eq!(t0, 0.0);
    }

    #[test]
    fn entry_needs_time_for_forcing() {
        let sys = QuadraticSaddle {
            forcing: 4.0,
            ..QuadraticSaddle::linear(1.0, 1.0)
        };
        let (_, t0) = admissible_entry(&sys, 1.0, 0.5).unwrap();
        assert!(t0 >= 2.0, "{t0}");
        assert!(admissible_entry(&sys, 1.0, 1.5).is_err());
    }
}
