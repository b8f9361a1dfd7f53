//! Adaptive one-step integrators for planar non-autonomous systems.
//!
//! Two schemes share the [`Trajectory`] type and the event machinery:
//!
//! * [`integrate`]: Dormand–Prince 5(4) with PI step control and its
//!   fourth-order continuous extension.
//! * [`integrate_stiff`]: the L-stable Rosenbrock method RODAS3 (order 3,
//!   embedded order 2) with cubic Hermite dense output. The expander system
//!   relaxes `psi` at rate `~e^{2t}`, which stalls any explicit scheme once
//!   `t` exceeds a few units.
//!
//! Both integrate in either time direction.

mod dopri;
mod rosenbrock;
mod trajectory;

pub use dopri::integrate;
pub use rosenbrock::integrate_stiff;
pub use trajectory::{Interpolant, Termination, Trajectory};

/// State of a planar system.
pub type State = [f64; 2];

/// A planar vector field `y' = f(t, y)`.
///
/// Closures `Fn(f64, &State) -> State` implement this with a
/// finite-difference Jacobian.
pub trait Field {
    fn eval(&self, t: f64, y: &State) -> State;

    /// `(df/dy, df/dt)`.
    fn jacobian(&self, t: f64, y: &State) -> ([[f64; 2]; 2], State) {
        finite_difference_jacobian(|t, y| self.eval(t, y), t, y)
    }
}

impl<F> Field for F
where
    F: Fn(f64, &State) -> State,
{
    fn eval(&self, t: f64, y: &State) -> State {
        self(t, y)
    }
}

pub(crate) fn finite_difference_jacobian<F>(f: F, t: f64, y: &State) -> ([[f64; 2]; 2], State)
where
    F: Fn(f64, &State) -> State,
{
    let root_eps = f64::EPSILON.sqrt();
    let mut jac = [[0.0; 2]; 2];
    for col in 0..2 {
        let h = root_eps * y[col].abs().max(1.0);
        let mut plus = *y;
        let mut minus = *y;
        plus[col] += h;
        minus[col] -= h;
        let fp = f(t, &plus);
        let fm = f(t, &minus);
        for row in 0..2 {
            jac[row][col] = (fp[row] - fm[row]) / (2.0 * h);
        }
    }
    let h = root_eps * t.abs().max(1.0);
    let fp = f(t + h, y);
    let fm = f(t - h, y);
    let dt = [(fp[0] - fm[0]) / (2.0 * h), (fp[1] - fm[1]) / (2.0 * h)];
    (jac, dt)
}

/// Mixed error tolerances: component `i` is scaled by `abs + rel * |y_i|`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Tolerances {
    pub fn new(rel: f64, abs: f64) -> Self {
        Self { rel, abs }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self {
            rel: self.rel * factor,
            abs: self.abs * factor,
        }
    }

    pub(crate) fn error_norm(&self, y0: &State, y1: &State, err: &State) -> f64 {
        let mut acc = 0.0;
        for i in 0..2 {
            let sc = self.abs + self.rel * y0[i].abs().max(y1[i].abs());
            acc += (err[i] / sc).powi(2);
        }
        (acc / 2.0).sqrt()
    }
}

/// Step-size bookkeeping shared by both schemes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSettings {
    /// First trial step; defaults to `1e-4 |t1 - t0|`.
    pub initial_step: Option<f64>,
    pub max_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for StepSettings {
    fn default() -> Self {
        Self {
            initial_step: None,
            max_step: None,
            max_steps: 2_000_000,
        }
    }
}

/// Which sign changes of an event function count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    Any,
    Rising,
    Falling,
}

/// A named scalar function whose sign change stops the integration.
pub struct Event<'a> {
    pub name: &'static str,
    pub crossing: Crossing,
    func: Box<dyn Fn(f64, &State) -> f64 + 'a>,
}

impl<'a> Event<'a> {
    pub fn new(
        name: &'static str,
        crossing: Crossing,
        func: impl Fn(f64, &State) -> f64 + 'a,
    ) -> Self {
        Self {
            name,
            crossing,
            func: Box::new(func),
        }
    }

    pub fn value(&self, t: f64, y: &State) -> f64 {
        (self.func)(t, y)
    }

    fn triggered(&self, before: f64, after: f64) -> bool {
        if before == 0.0 || before.is_nan() || after.is_nan() {
            return false;
        }
        match self.crossing {
            Crossing::Any => before.signum() != after.signum() || after == 0.0,
            Crossing::Rising => before < 0.0 && after >= 0.0,
            Crossing::Falling => before > 0.0 && after <= 0.0,
        }
    }
}

/// Event times are located to this width by bisection on the dense output.
pub const EVENT_TIME_TOLERANCE: f64 = 1e-12;

/// Check the events over the last accepted step and return the earliest
/// `(time, event index)` crossing, if any.
pub(crate) fn locate_events(
    events: &[Event<'_>],
    previous: &mut [f64],
    segment: &Interpolant,
    t_start: f64,
    t_end: f64,
) -> Option<(f64, usize)> {
    let y_end = segment.eval(t_end);
    let mut earliest: Option<(f64, usize)> = None;
    let forward = t_end > t_start;
    for (idx, event) in events.iter().enumerate() {
        let before = previous[idx];
        let after = event.value(t_end, &y_end);
        if event.triggered(before, after) {
            let sign = before.signum();
            let (mut a, mut b) = (t_start, t_end);
            for _ in 0..200 {
                if (b - a).abs() <= EVENT_TIME_TOLERANCE {
                    break;
                }
                let mid = 0.5 * (a + b);
                let v = event.value(mid, &segment.eval(mid));
                if v.signum() == sign && v != 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            let better = match earliest {
                None => true,
                Some((t_prev, _)) => (forward && b < t_prev) || (!forward && b > t_prev),
            };
            if better {
                earliest = Some((b, idx));
            }
        }
        previous[idx] = after;
    }
    earliest
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_difference_jacobian_of_linear_field() {
        let (jac, dt) = finite_difference_jacobian(
            |t, y| [2.0 * y[0] - y[1], 3.0 * y[1] + t],
            0.5,
            &[1.0, 2.0],
        );
        assert!((jac[0][0] - 2.0).abs() < 1e-8);
        assert!((jac[0][1] + 1.0).abs() < 1e-8);
        assert!(jac[1][0].abs() < 1e-8);
        assert!((jac[1][1] - 3.0).abs() < 1e-8);
        assert!(dt[0].abs() < 1e-8 && (dt[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn crossing_directions() {
        let rising = Event::new("r", Crossing::Rising, |_, y| y[0]);
        assert!(rising.triggered(-1.0, 1.0));
        assert!(!rising.triggered(1.0, -1.0));
        assert!(!rising.triggered(0.0, 1.0));
        let falling = Event::new("f", Crossing::Falling, |_, y| y[0]);
        assert!(falling.triggered(1.0, 0.0));
        assert!(!falling.triggered(-1.0, 1.0));
        let any = Event::new("a", Crossing::Any, |_, y| y[0]);
        assert!(any.triggered(1.0, -1.0) && any.triggered(-1.0, 1.0));
    }
}
