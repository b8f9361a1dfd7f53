//! Admissible LOMSE types and the constants derived from them.
//!
//! A Lawson–Osserman map with a single nonzero singular value (LOMSE) of
//! `(n, p, k)`-type maps `S^n` with constant rank `p`, its components being
//! spherical harmonics of degree `k`. Only the three classified families
//! generalizing the Hopf maps are accepted:
//!
//! * `(n, p) = (2l + 1, 2l)` (complex Hopf family),
//! * `(n, p) = (4l + 3, 4l)` (quaternionic Hopf family),
//! * `(n, p) = (15, 8)` (octonionic Hopf map),
//!
//! each with `k = 2q`, `l, q >= 1`.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamsError {
    #[error("inadmissible type (n, p, k) = ({n}, {p}, {k}): {reason}")]
    InadmissibleType {
        n: i64,
        p: i64,
        k: i64,
        reason: String,
    },
    #[error("non-even degree k = {k}: the spherical-harmonic degree must be an even integer >= 2")]
    NonEvenDegree { k: i64 },
}

/// Which Hopf family an admissible `(n, p)` pair belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HopfFamily {
    /// `(2l + 1, 2l)`.
    Complex { l: u32 },
    /// `(4l + 3, 4l)`.
    Quaternionic { l: u32 },
    /// `(15, 8)`.
    Octonionic,
}

/// An admissible `(n, p, k)` triple together with its singular value `lambda`
/// and cone slope `phi0 = tan(theta)`.
///
/// Construct through [`validate_type`]; derived constants are computed once
/// there and read everywhere else.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LomseSpec {
    n: u32,
    p: u32,
    k: u32,
    family: HopfFamily,
    lambda: f64,
    phi0: f64,
}

impl LomseSpec {
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn family(&self) -> HopfFamily {
        self.family
    }

    /// Common nonzero singular value `sqrt(k (n + k - 1) / p)`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `lambda^2`, computed directly from the integers.
    pub fn lambda_sq(&self) -> f64 {
        f64::from(self.k) * f64::from(self.n + self.k - 1) / f64::from(self.p)
    }

    /// Slope of the minimal cone, and the second equilibrium of the reduced system.
    pub fn phi0(&self) -> f64 {
        self.phi0
    }

    /// `p lambda^2 - n = k (n + k - 1) - n`, an exact integer.
    pub fn p_lambda_sq_minus_n(&self) -> f64 {
        f64::from(self.k * (self.n + self.k - 1) - self.n)
    }

    pub fn triple(&self) -> (u32, u32, u32) {
        (self.n, self.p, self.k)
    }
}

impl fmt::Display for LomseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.n, self.p, self.k)
    }
}

fn family_of(n: i64, p: i64) -> Option<HopfFamily> {
    if n == 15 && p == 8 {
        return Some(HopfFamily::Octonionic);
    }
    if p >= 2 && p % 2 == 0 && n == p + 1 {
        return Some(HopfFamily::Complex { l: (p / 2) as u32 });
    }
    if p >= 4 && p % 4 == 0 && n == p + 3 {
        return Some(HopfFamily::Quaternionic { l: (p / 4) as u32 });
    }
    None
}

/// Validate an arbitrary integer triple and derive `lambda` and `phi0`.
pub fn validate_type(n: i64, p: i64, k: i64) -> Result<LomseSpec, ParamsError> {
    if k < 2 || k % 2 != 0 {
        return Err(ParamsError::NonEvenDegree { k });
    }
    let inadmissible = |reason: String| ParamsError::InadmissibleType { n, p, k, reason };
    if n < 3 {
        return Err(inadmissible(format!("sphere dimension n = {n} is below 3")));
    }
    if p <= 0 || p >= n {
        return Err(inadmissible(format!("rank p = {p} is outside 0 < p < n")));
    }
    if n % 2 == 0 {
        return Err(inadmissible(format!(
            "n = {n} is even, every family has odd n"
        )));
    }
    let family = family_of(n, p).ok_or_else(|| {
        inadmissible(format!(
            "(n, p) = ({n}, {p}) matches none of (2l+1, 2l), (4l+3, 4l), (15, 8)"
        ))
    })?;
    if k > 10_000 || n > 10_000 {
        return Err(inadmissible("parameters too large".to_string()));
    }

    let (n, p, k) = (n as u32, p as u32, k as u32);
    let lambda_sq = f64::from(k) * f64::from(n + k - 1) / f64::from(p);
    let p_lambda_sq_minus_n = f64::from(k * (n + k - 1) - n);
    if p_lambda_sq_minus_n <= 0.0 {
        return Err(ParamsError::InadmissibleType {
            n: n.into(),
            p: p.into(),
            k: k.into(),
            reason: "p lambda^2 <= n, the cone slope is not real".to_string(),
        });
    }
    let phi0 = (p_lambda_sq_minus_n / (f64::from(n - p) * lambda_sq)).sqrt();
    Ok(LomseSpec {
        n,
        p,
        k,
        family,
        lambda: lambda_sq.sqrt(),
        phi0,
    })
}

/// Whether the existence construction applies: `(3,2,2)`, `(5,4,2)`,
/// `(5,4,4)`, or any `n >= 7`.
pub fn solvable_case(spec: &LomseSpec) -> bool {
    matches!(spec.triple(), (3, 2, 2) | (5, 4, 2) | (5, 4, 4)) || spec.n >= 7
}

/// Slope `kappa_d = sqrt((2d + 1) / (4 (d - 1)))` of the classical
/// Lawson–Osserman cone over the Hopf map `S^{2d-1} -> S^d`, `d in {2, 4, 8}`.
pub fn lawson_osserman_slope(d: u32) -> Option<f64> {
    match d {
        2 | 4 | 8 => Some((f64::from(2 * d + 1) / f64::from(4 * (d - 1))).sqrt()),
        _ => None,
    }
}

/// A pair of eigenvalues of a real 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EigenPair {
    /// Two real eigenvalues, larger first.
    Real { first: f64, second: f64 },
    /// `re ± i im` with `im > 0`.
    ComplexConjugate { re: f64, im: f64 },
}

impl EigenPair {
    /// Eigenvalues of a monic quadratic `x^2 - trace x + det`.
    pub fn from_trace_det(trace: f64, det: f64) -> Self {
        let disc = trace * trace - 4.0 * det;
        if disc >= 0.0 {
            let root = disc.sqrt();
            EigenPair::Real {
                first: 0.5 * (trace + root),
                second: 0.5 * (trace - root),
            }
        } else {
            EigenPair::ComplexConjugate {
                re: 0.5 * trace,
                im: 0.5 * (-disc).sqrt(),
            }
        }
    }

    pub fn trace(&self) -> f64 {
        match *self {
            EigenPair::Real { first, second } => first + second,
            EigenPair::ComplexConjugate { re, .. } => 2.0 * re,
        }
    }

    pub fn product(&self) -> f64 {
        match *self {
            EigenPair::Real { first, second } => first * second,
            EigenPair::ComplexConjugate { re, im } => re * re + im * im,
        }
    }

    pub fn max_real_part(&self) -> f64 {
        match *self {
            EigenPair::Real { first, .. } => first,
            EigenPair::ComplexConjugate { re, .. } => re,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    Sink,
    SpiralSink,
}

impl fmt::Display for EquilibriumKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EquilibriumKind::Sink => "sink",
            EquilibriumKind::SpiralSink => "spiral sink",
        })
    }
}

/// Linearized behaviour of the autonomous reduced system at its two
/// equilibria in `phi >= 0`: the saddle at the origin and the cone point
/// `(phi0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumClass {
    /// `(k - 1, -n - k)`.
    pub origin_eigenvalues: (f64, f64),
    pub cone_point_eigenvalues: EigenPair,
    /// `n^2 - 6n + 1 + 8n^2 / (k (k + n - 1))`.
    pub discriminant: f64,
    pub kind: EquilibriumKind,
}

/// Closed-form eigenvalues at both equilibria.
pub fn classify_equilibria(spec: &LomseSpec) -> EquilibriumClass {
    let n = f64::from(spec.n);
    let k = f64::from(spec.k);
    let discriminant = n * n - 6.0 * n + 1.0 + 8.0 * n * n / (k * (k + n - 1.0));
    let centre = -(n + 1.0) / 2.0;
    let (cone_point_eigenvalues, kind) = if discriminant >= 0.0 {
        let half = 0.5 * discriminant.sqrt();
        (
            EigenPair::Real {
                first: centre + half,
                second: centre - half,
            },
            EquilibriumKind::Sink,
        )
    } else {
        (
            EigenPair::ComplexConjugate {
                re: centre,
                im: 0.5 * (-discriminant).sqrt(),
            },
            EquilibriumKind::SpiralSink,
        )
    };
    EquilibriumClass {
        origin_eigenvalues: (k - 1.0, -n - k),
        cone_point_eigenvalues,
        discriminant,
        kind,
    }
}

/// Every admissible triple with `n <= max_n` and `k <= max_k`, ordered by
/// `(n, p, k)`.
pub fn admissible_types(max_n: u32, max_k: u32) -> Vec<LomseSpec> {
    let mut out = Vec::new();
    for n in 3..=max_n {
        for p in 1..n {
            for k in (2..=max_k).step_by(2) {
                if let Ok(spec) = validate_type(n.into(), p.into(), k.into()) {
                    out.push(spec);
                }
            }
        }
    }
    out
}
