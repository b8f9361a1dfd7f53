//! The compact positively invariant region `Δ` of the expander system.
//!
//! `Δ` is bounded below by `{psi = 0}` and above by the barrier graph
//!
//! ```text
//! g(phi) = c ((λ² - 1) p / (1 + λ² phi²) - (n - p)) phi / (n - p)
//!        = c λ² (phi0² - phi²) phi / (1 + λ² phi²),
//! ```
//!
//! with `c = 3/2` for `(3,2,2)`, `(5,4,2)`, `(5,4,4)` and `c = 2` for `n >= 7`.
//! The second (factored) form is what gets evaluated: it vanishes exactly at
//! `phi0`, which matters once the barrier flux is multiplied by `e^{2t}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{rhs_phipsi, rhs_phipsi_autonomous, ExpanderField, PhiPsiState, Similarity};
use crate::integrator::{integrate_stiff, StepSettings, Termination, Tolerances};
use crate::params::{classify_equilibria, solvable_case, EquilibriumKind, LomseSpec};

/// Slack used by trajectory monitors when testing membership.
pub const DEFAULT_SLACK: f64 = 1e-9;

/// Absolute tolerance on the sampled inward flux.
pub const FLUX_TOLERANCE: f64 = 1e-10;

pub const MIN_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BarrierError {
    #[error("no invariant region for {spec}: {reason}")]
    UnsupportedCase { spec: LomseSpec, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantRegion {
    spec: LomseSpec,
    coefficient: f64,
}

impl InvariantRegion {
    pub fn spec(&self) -> &LomseSpec {
        &self.spec
    }

    /// The barrier coefficient `c`.
    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    /// Barrier height `g(phi)`.
    pub fn g(&self, phi: f64) -> f64 {
        let l2 = self.spec.lambda_sq();
        let phi0 = self.spec.phi0();
        self.coefficient * l2 * (phi0 * phi0 - phi * phi) * phi / (1.0 + l2 * phi * phi)
    }

    /// Barrier in its expanded form, kept for cross-checking [`Self::g`].
    pub fn g_expanded(&self, phi: f64) -> f64 {
        let n = f64::from(self.spec.n());
        let p = f64::from(self.spec.p());
        let l2 = self.spec.lambda_sq();
        self.coefficient * ((l2 - 1.0) * p / (1.0 + l2 * phi * phi) - (n - p)) * phi / (n - p)
    }

    pub fn g_prime(&self, phi: f64) -> f64 {
        let l2 = self.spec.lambda_sq();
        let phi0_sq = self.spec.phi0() * self.spec.phi0();
        let denom = 1.0 + l2 * phi * phi;
        let numer =
            (phi0_sq - 3.0 * phi * phi) * denom - 2.0 * l2 * phi * phi * (phi0_sq - phi * phi);
        self.coefficient * l2 * numer / (denom * denom)
    }

    /// Exact membership: `0 <= phi <= phi0` and `0 <= psi <= g(phi)`.
    pub fn contains(&self, state: &PhiPsiState) -> bool {
        self.contains_with_slack(state, 0.0)
    }

    pub fn contains_with_slack(&self, state: &PhiPsiState, slack: f64) -> bool {
        self.exit_distance(state) <= slack
    }

    /// How far `state` lies outside the region (zero inside).
    pub fn exit_distance(&self, state: &PhiPsiState) -> f64 {
        if !state.is_finite() {
            return f64::INFINITY;
        }
        let phi0 = self.spec.phi0();
        let clamped = state.phi.clamp(0.0, phi0);
        let ceiling = self.g(clamped);
        [
            -state.phi,
            state.phi - phi0,
            -state.psi,
            state.psi - ceiling,
            0.0,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// Inward flux `<(phi_t, psi_t), (g'(phi), -1)>` on the barrier graph.
    /// `t = None` evaluates the autonomous field.
    pub fn barrier_inflow(&self, phi: f64, t: Option<f64>) -> f64 {
        let psi = self.g(phi);
        let (phi_t, psi_t) = self.field(phi, psi, t);
        self.g_prime(phi) * phi_t - psi_t
    }

    /// `psi_t` on the bottom edge `{psi = 0}`.
    pub fn bottom_inflow(&self, phi: f64, t: Option<f64>) -> f64 {
        self.field(phi, 0.0, t).1
    }

    fn field(&self, phi: f64, psi: f64, t: Option<f64>) -> (f64, f64) {
        match t {
            Some(t) => rhs_phipsi(
                &PhiPsiState::new(t, phi, psi),
                &self.spec,
                Similarity::Expander,
            ),
            None => rhs_phipsi_autonomous(phi, psi, &self.spec),
        }
    }
}

/// Build the region for a solvable (sink) case.
pub fn build_region(spec: &LomseSpec) -> Result<InvariantRegion, BarrierError> {
    if classify_equilibria(spec).kind == EquilibriumKind::SpiralSink {
        return Err(BarrierError::UnsupportedCase {
            spec: *spec,
            reason: "the cone point is a spiral sink".into(),
        });
    }
    if !solvable_case(spec) {
        return Err(BarrierError::UnsupportedCase {
            spec: *spec,
            reason: "no barrier is known for this type".into(),
        });
    }
    let coefficient = if spec.n() >= 7 { 2.0 } else { 1.5 };
    Ok(InvariantRegion {
        spec: *spec,
        coefficient,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub min_bottom_inflow: f64,
    pub min_barrier_inflow: f64,
    /// `phi` where the barrier flux is smallest.
    pub worst_barrier_phi: f64,
    /// Time of that sample; `None` for the autonomous limit.
    pub worst_barrier_time: Option<f64>,
    pub samples: usize,
    pub times: Vec<f64>,
    pub pass: bool,
}

/// Sample both boundary arcs at `n_samples` points (at least
/// [`MIN_SAMPLES`]), for `t = t_from, t_from + 1, ..., t_from + 20` and the
/// autonomous limit, and report the smallest inward fluxes.
pub fn verify_invariance(
    region: &InvariantRegion,
    t_from: f64,
    n_samples: usize,
) -> InvarianceReport {
    let samples = n_samples.max(MIN_SAMPLES);
    let phi0 = region.spec.phi0();
    let times: Vec<f64> = (0..=20).map(|i| t_from + f64::from(i)).collect();
    let slices: Vec<Option<f64>> = std::iter::once(None)
        .chain(times.iter().copied().map(Some))
        .collect();

    let mut min_bottom = f64::INFINITY;
    let mut min_barrier = f64::INFINITY;
    let mut worst_phi = 0.0;
    let mut worst_time = None;
    for i in 0..samples {
        // Fraction first, so the last sample is exactly phi0.
        let phi = phi0 * (i as f64 / (samples - 1) as f64);
        for &t in &slices {
            min_bottom = min_bottom.min(region.bottom_inflow(phi, t));
            let flux = region.barrier_inflow(phi, t);
            if flux < min_barrier {
                min_barrier = flux;
                worst_phi = phi;
                worst_time = t;
            }
        }
    }
    InvarianceReport {
        min_bottom_inflow: min_bottom,
        min_barrier_inflow: min_barrier,
        worst_barrier_phi: worst_phi,
        worst_barrier_time: worst_time,
        samples,
        times,
        pass: min_bottom >= -FLUX_TOLERANCE && min_barrier >= -FLUX_TOLERANCE,
    }
}

/// Largest exit distance accepted from a sampled trajectory.
pub const TRAJECTORY_EXIT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySweep {
    pub count: usize,
    pub seed: u64,
    pub t_end: f64,
    /// Largest [`InvariantRegion::exit_distance`] over all accepted steps.
    pub max_exit: f64,
    /// Start of the trajectory attaining `max_exit`.
    pub worst_start: PhiPsiState,
    /// Runs that did not reach `t_end`.
    pub failures: usize,
}

/// Integrate `count` trajectories of the expander system from `t = 0` to
/// `t_end`, started uniformly at random inside the region, and record how
/// far any of them leaves it.
pub fn random_trajectories(
    region: &InvariantRegion,
    count: usize,
    seed: u64,
    t_end: f64,
) -> TrajectorySweep {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let field = ExpanderField { spec: region.spec };
    let tol = Tolerances::new(1e-8, 1e-12);
    let mut max_exit = f64::NEG_INFINITY;
    let mut worst_start = PhiPsiState::new(0.0, 0.0, 0.0);
    let mut failures = 0;
    for _ in 0..count {
        let phi = rng.random_range(0.0..region.spec.phi0());
        let psi = rng.random_range(0.0..=region.g(phi));
        let traj = integrate_stiff(
            &field,
            0.0,
            [phi, psi],
            t_end,
            tol,
            &[],
            StepSettings::default(),
        );
        if *traj.termination() != Termination::ReachedEnd {
            failures += 1;
        }
        let exit = traj
            .samples()
            .iter()
            .map(|&(t, [phi, psi])| region.exit_distance(&PhiPsiState::new(t, phi, psi)))
            .fold(f64::NEG_INFINITY, f64::max);
        if exit > max_exit {
            max_exit = exit;
            worst_start = PhiPsiState::new(0.0, phi, psi);
        }
    }
    TrajectorySweep {
        count,
        seed,
        t_end,
        max_exit,
        worst_start,
        failures,
    }
}

impl TrajectorySweep {
    pub fn pass(&self) -> bool {
        self.failures == 0 && self.max_exit <= TRAJECTORY_EXIT_TOL
    }
}
