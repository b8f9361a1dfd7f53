//! Right-hand sides, coordinate changes and linearizations of the reduced
//! self-similarity equation.
//!
//! For a graph `(r x, f(r) L(x))` over a LOMSE `L` of `(n, p, k)`-type, the
//! self-similar condition `H = C F^perp` reduces to
//!
//! ```text
//! f_rr / (1 + f_r^2) + (n - p) f_r / r + p (r f_r - λ² f) / (r² + λ² f²) + C (r f_r - f) = 0.
//! ```
//!
//! With `t = log r`, `phi = f / r` and `psi = phi_t` this becomes a planar
//! non-autonomous system whose only time dependence is `C e^{2t}`. Formulas
//! are kept in their printed arrangement; residual tests then certify the
//! transcription.

use serde::Serialize;
use thiserror::Error;

use crate::params::{EigenPair, LomseSpec};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DynamicsError {
    #[error("degenerate radius r = {0}: the profile equation needs r > 0")]
    DegenerateRadius(f64),
    #[error("similarity constant must be -1, 0 or 1, got {0}")]
    InvalidSimilarity(i64),
}

/// Sign of the constant in `H = C F^perp`; after rescaling only the sign matters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    Shrinker,
    Minimal,
    Expander,
}

impl Similarity {
    pub fn value(self) -> f64 {
        match self {
            Similarity::Shrinker => -1.0,
            Similarity::Minimal => 0.0,
            Similarity::Expander => 1.0,
        }
    }
}

impl TryFrom<i64> for Similarity {
    type Error = DynamicsError;

    fn try_from(c: i64) -> Result<Self, Self::Error> {
        match c {
            -1 => Ok(Similarity::Shrinker),
            0 => Ok(Similarity::Minimal),
            1 => Ok(Similarity::Expander),
            other => Err(DynamicsError::InvalidSimilarity(other)),
        }
    }
}

/// A point of the first-order system: log-radius `t`, slope `phi = f / r`
/// and `psi = phi_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiPsiState {
    pub t: f64,
    pub phi: f64,
    pub psi: f64,
}

impl PhiPsiState {
    pub fn new(t: f64, phi: f64, psi: f64) -> Self {
        Self { t, phi, psi }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.phi.is_finite() && self.psi.is_finite()
    }
}

/// The four terms of the profile equation, in printed order.
pub fn profile_terms(
    r: f64,
    f: f64,
    f_r: f64,
    f_rr: f64,
    spec: &LomseSpec,
    c: Similarity,
) -> Result<[f64; 4], DynamicsError> {
    if !(r > 0.0) {
        return Err(DynamicsError::DegenerateRadius(r));
    }
    let n = f64::from(spec.n());
    let p = f64::from(spec.p());
    let l2 = spec.lambda_sq();
    Ok([
        f_rr / (1.0 + f_r * f_r),
        (n - p) * f_r / r,
        p * (r * f_r - l2 * f) / (r * r + l2 * f * f),
        c.value() * (r * f_r - f),
    ])
}

/// Left-hand side of the profile equation; vanishes along exact solutions.
pub fn ode_residual(
    r: f64,
    f: f64,
    f_r: f64,
    f_rr: f64,
    spec: &LomseSpec,
    c: Similarity,
) -> Result<f64, DynamicsError> {
    Ok(profile_terms(r, f, f_r, f_rr, spec, c)?.iter().sum())
}

/// Residual divided by the sum of the magnitudes of its four terms, so the
/// result is scale free; zero when all terms vanish.
pub fn relative_residual(
    r: f64,
    f: f64,
    f_r: f64,
    f_rr: f64,
    spec: &LomseSpec,
    c: Similarity,
) -> Result<f64, DynamicsError> {
    let terms = profile_terms(r, f, f_r, f_rr, spec, c)?;
    let sum: f64 = terms.iter().sum();
    let scale: f64 = terms.iter().map(|x| x.abs()).sum();
    Ok(if scale > 0.0 { sum.abs() / scale } else { 0.0 })
}

/// Solve the profile equation for `f_rr`.
pub fn rhs_profile(
    r: f64,
    f: f64,
    f_r: f64,
    spec: &LomseSpec,
    c: Similarity,
) -> Result<f64, DynamicsError> {
    let [_, a, b, d] = profile_terms(r, f, f_r, 0.0, spec, c)?;
    Ok(-(1.0 + f_r * f_r) * (a + b + d))
}

fn phipsi_field(phi: f64, psi: f64, growth: f64, spec: &LomseSpec) -> (f64, f64) {
    let n = f64::from(spec.n());
    let p = f64::from(spec.p());
    let l2 = spec.lambda_sq();
    let denom = 1.0 + l2 * phi * phi;
    let psi_coeff = n - p + p / denom + growth;
    let phi_coeff = n - p + (1.0 - l2) * p / denom;
    let slope = phi + psi;
    let psi_t = -psi - (psi_coeff * psi + phi_coeff * phi) * (1.0 + slope * slope);
    (psi, psi_t)
}

/// `(phi_t, psi_t)` of the first-order system.
pub fn rhs_phipsi(state: &PhiPsiState, spec: &LomseSpec, c: Similarity) -> (f64, f64) {
    let growth = match c {
        Similarity::Minimal => 0.0,
        _ => c.value() * (2.0 * state.t).exp(),
    };
    phipsi_field(state.phi, state.psi, growth, spec)
}

/// The autonomous part of [`rhs_phipsi`]: the `C e^{2t}` term dropped, i.e.
/// the `t -> -inf` limit.
pub fn rhs_phipsi_autonomous(phi: f64, psi: f64, spec: &LomseSpec) -> (f64, f64) {
    phipsi_field(phi, psi, 0.0, spec)
}

/// Jacobian of [`rhs_phipsi`] with respect to `(phi, psi)`, and the partial
/// derivative with respect to `t`.
pub fn jacobian_phipsi(
    state: &PhiPsiState,
    spec: &LomseSpec,
    c: Similarity,
) -> ([[f64; 2]; 2], [f64; 2]) {
    let n = f64::from(spec.n());
    let p = f64::from(spec.p());
    let l2 = spec.lambda_sq();
    let PhiPsiState { t, phi, psi } = *state;
    let growth = match c {
        Similarity::Minimal => 0.0,
        _ => c.value() * (2.0 * t).exp(),
    };
    let denom = 1.0 + l2 * phi * phi;
    let d_denom = 2.0 * l2 * phi;
    let a = n - p + p / denom + growth;
    let b = n - p + (1.0 - l2) * p / denom;
    let da = -p * d_denom / (denom * denom);
    let db = -(1.0 - l2) * p * d_denom / (denom * denom);
    let slope = phi + psi;
    let q = 1.0 + slope * slope;
    let bracket = a * psi + b * phi;
    let d_phi = -((da * psi + db * phi + b) * q + bracket * 2.0 * slope);
    let d_psi = -1.0 - (a * q + bracket * 2.0 * slope);
    let d_t = -2.0 * growth * psi * q;
    ([[0.0, 1.0], [d_phi, d_psi]], [0.0, d_t])
}

/// The forward `(phi, psi)` field with its analytic Jacobian.
pub(crate) struct ExpanderField {
    pub(crate) spec: LomseSpec,
}

impl crate::integrator::Field for ExpanderField {
    fn eval(&self, t: f64, y: &[f64; 2]) -> [f64; 2] {
        let (a, b) = rhs_phipsi(
            &PhiPsiState::new(t, y[0], y[1]),
            &self.spec,
            Similarity::Expander,
        );
        [a, b]
    }

    fn jacobian(&self, t: f64, y: &[f64; 2]) -> ([[f64; 2]; 2], [f64; 2]) {
        jacobian_phipsi(
            &PhiPsiState::new(t, y[0], y[1]),
            &self.spec,
            Similarity::Expander,
        )
    }
}

/// Saddle-adapted coordinates in reversed time `s = -t`.
///
/// `X` and `Y` are the components along the unstable eigenvector `(1, k - 1)`
/// and the stable eigenvector `(1, -n - k)` of the origin; in `s` the origin
/// becomes a saddle with contraction `k - 1` along `X` and expansion `n + k`
/// along `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaddleCoords {
    pub s: f64,
    pub x: f64,
    pub y: f64,
}

fn saddle_denominator(spec: &LomseSpec) -> f64 {
    f64::from(spec.n() + 2 * spec.k() - 1)
}

fn to_saddle_components(phi: f64, psi: f64, spec: &LomseSpec) -> (f64, f64) {
    let n = f64::from(spec.n());
    let k = f64::from(spec.k());
    let d = saddle_denominator(spec);
    (
        (n + k) / d * phi + 1.0 / d * psi,
        (k - 1.0) / d * phi - 1.0 / d * psi,
    )
}

fn from_saddle_components(x: f64, y: f64, spec: &LomseSpec) -> (f64, f64) {
    let n = f64::from(spec.n());
    let k = f64::from(spec.k());
    (x + y, (k - 1.0) * x - (n + k) * y)
}

pub fn to_saddle_coords(state: &PhiPsiState, spec: &LomseSpec) -> SaddleCoords {
    let (x, y) = to_saddle_components(state.phi, state.psi, spec);
    SaddleCoords { s: -state.t, x, y }
}

pub fn from_saddle_coords(s: f64, x: f64, y: f64, spec: &LomseSpec) -> PhiPsiState {
    let (phi, psi) = from_saddle_components(x, y, spec);
    PhiPsiState { t: -s, phi, psi }
}

/// `(X_s, Y_s)`: the first-order system pushed through the saddle coordinates.
pub fn saddle_field(coords: &SaddleCoords, spec: &LomseSpec, c: Similarity) -> (f64, f64) {
    let state = from_saddle_coords(coords.s, coords.x, coords.y, spec);
    let (phi_t, psi_t) = rhs_phipsi(&state, spec, c);
    to_saddle_components(-phi_t, -psi_t, spec)
}

/// Autonomous part of [`saddle_field`] (`e^{-2s}` term dropped).
pub fn saddle_field_autonomous(x: f64, y: f64, spec: &LomseSpec) -> (f64, f64) {
    let (phi, psi) = from_saddle_components(x, y, spec);
    let (phi_t, psi_t) = rhs_phipsi_autonomous(phi, psi, spec);
    to_saddle_components(-phi_t, -psi_t, spec)
}

/// Coefficient of `e^{-2s}` in [`saddle_field`] for the expander (`C = 1`).
pub fn saddle_perturbation(x: f64, y: f64, spec: &LomseSpec) -> (f64, f64) {
    let (phi, psi) = from_saddle_components(x, y, spec);
    let slope = phi + psi;
    // e^{2t} enters psi_t as -e^{2t} psi (1 + (phi + psi)^2); s = -t flips the sign.
    to_saddle_components(0.0, psi * (1.0 + slope * slope), spec)
}

/// A real 2x2 matrix, row major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Matrix2(pub [[f64; 2]; 2]);

impl Matrix2 {
    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn eigenvalues(&self) -> EigenPair {
        EigenPair::from_trace_det(self.trace(), self.det())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Equilibrium {
    Origin,
    ConePoint,
}

/// Linearization of the autonomous system at one of its equilibria.
pub fn linearize(spec: &LomseSpec, at: Equilibrium) -> Matrix2 {
    let n = f64::from(spec.n());
    let p = f64::from(spec.p());
    let p_l2 = p * spec.lambda_sq();
    let lower_left = match at {
        Equilibrium::Origin => p_l2 - n,
        Equilibrium::ConePoint => 2.0 * n * (n / p_l2 - 1.0),
    };
    Matrix2([[0.0, 1.0], [lower_left, -n - 1.0]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::validate_type;

    fn hopf() -> LomseSpec {
        validate_type(3, 2, 2).unwrap()
    }

    #[test]
    fn profile_rhs_examples() {
        let spec = hopf();
        let c = Similarity::Expander;
        assert_eq!(rhs_profile(1.0, 0.0, 0.0, &spec, c).unwrap(), 0.0);
        let phi0 = spec.phi0();
        assert!(rhs_profile(1.0, phi0, phi0, &spec, c).unwrap().abs() < 1e-14);
        let f_rr = rhs_profile(1.0, 0.5, 0.6, &spec, c).unwrap();
        assert!((f_rr - 0.952).abs() < 1e-14, "{f_rr}");
    }

    #[test]
    fn residual_examples() {
        let spec = hopf();
        let c = Similarity::Expander;
        let phi0 = spec.phi0();
        assert!(ode_residual(1.0, phi0, phi0, 0.0, &spec, c).unwrap().abs() < 1e-14);
        assert_eq!(ode_residual(1.0, 0.0, 1.0, 0.0, &spec, c).unwrap(), 4.0);
        assert!(matches!(
            ode_residual(0.0, 1.0, 1.0, 0.0, &spec, c),
            Err(DynamicsError::DegenerateRadius(_))
        ));
        assert!(rhs_profile(-1.0, 1.0, 1.0, &spec, c).is_err());
    }

    #[test]
    fn phipsi_examples() {
        let spec = hopf();
        let c = Similarity::Expander;
        assert_eq!(
            rhs_phipsi(&PhiPsiState::new(3.0, 0.0, 0.0), &spec, c),
            (0.0, 0.0)
        );
        let (a, b) = rhs_phipsi_autonomous(spec.phi0(), 0.0, &spec);
        assert_eq!(a, 0.0);
        assert!(b.abs() < 1e-15);
        let (phi_t, psi_t) = rhs_phipsi(&PhiPsiState::new(0.0, 0.5, 0.1), &spec, c);
        assert_eq!(phi_t, 0.1);
        assert!((psi_t - 0.852).abs() < 1e-14, "{psi_t}");
    }

    #[test]
    fn saddle_coordinate_examples() {
        let spec = hopf();
        let c = to_saddle_coords(&PhiPsiState::new(0.0, 1.0, 0.0), &spec);
        assert_eq!(c.s, 0.0);
        assert!((c.x - 5.0 / 6.0).abs() < 1e-15);
        assert!((c.y - 1.0 / 6.0).abs() < 1e-15);
        let zero = to_saddle_coords(&PhiPsiState::new(1.0, 0.0, 0.0), &spec);
        assert_eq!((zero.x, zero.y), (0.0, 0.0));
        let start = PhiPsiState::new(-2.0, 0.3, -0.1);
        let c = to_saddle_coords(&start, &spec);
        let back = from_saddle_coords(c.s, c.x, c.y, &spec);
        assert_eq!(back.t, start.t);
        assert!((back.phi - start.phi).abs() < 1e-15);
        assert!((back.psi - start.psi).abs() < 1e-15);
    }

    #[test]
    fn linearization_examples() {
        let spec = hopf();
        assert_eq!(
            linearize(&spec, Equilibrium::Origin),
            Matrix2([[0.0, 1.0], [5.0, -4.0]])
        );
        assert_eq!(
            linearize(&spec, Equilibrium::ConePoint),
            Matrix2([[0.0, 1.0], [-3.75, -4.0]])
        );
        let spec = validate_type(5, 4, 2).unwrap();
        let m = linearize(&spec, Equilibrium::Origin);
        assert_eq!(m, Matrix2([[0.0, 1.0], [7.0, -6.0]]));
        assert_eq!(
            m.eigenvalues(),
            EigenPair::Real {
                first: 1.0,
                second: -7.0
            }
        );
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let spec = validate_type(5, 4, 4).unwrap();
        let c = Similarity::Expander;
        let state = PhiPsiState::new(0.4, 0.7, 0.3);
        let (jac, dt) = jacobian_phipsi(&state, &spec, c);
        let h = 1e-6;
        let fd = |dphi: f64, dpsi: f64, dtt: f64| {
            let plus = rhs_phipsi(
                &PhiPsiState::new(state.t + dtt, state.phi + dphi, state.psi + dpsi),
                &spec,
                c,
            );
            let minus = rhs_phipsi(
                &PhiPsiState::new(state.t - dtt, state.phi - dphi, state.psi - dpsi),
                &spec,
                c,
            );
            (
                (plus.0 - minus.0) / (2.0 * h),
                (plus.1 - minus.1) / (2.0 * h),
            )
        };
        let col_phi = fd(h, 0.0, 0.0);
        let col_psi = fd(0.0, h, 0.0);
        let col_t = fd(0.0, 0.0, h);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * b.abs().max(1.0);
        assert!(close(jac[0][0], col_phi.0) && close(jac[1][0], col_phi.1));
        assert!(close(jac[0][1], col_psi.0) && close(jac[1][1], col_psi.1));
        assert!(close(dt[0], col_t.0) && close(dt[1], col_t.1));
    }

    #[test]
    fn saddle_split_reassembles_full_field() {
        let spec = hopf();
        let coords = SaddleCoords {
            s: 0.7,
            x: 0.03,
            y: -0.002,
        };
        let full = saddle_field(&coords, &spec, Similarity::Expander);
        let auto = saddle_field_autonomous(coords.x, coords.y, &spec);
        let pert = saddle_perturbation(coords.x, coords.y, &spec);
        let w = (-2.0 * coords.s).exp();
        assert!((full.0 - (auto.0 + w * pert.0)).abs() < 1e-15);
        assert!((full.1 - (auto.1 + w * pert.1)).abs() < 1e-15);
    }

    #[test]
    fn similarity_conversion() {
        assert_eq!(Similarity::try_from(1).unwrap(), Similarity::Expander);
        assert_eq!(Similarity::try_from(-1).unwrap(), Similarity::Shrinker);
        assert!(Similarity::try_from(2).is_err());
    }
}
