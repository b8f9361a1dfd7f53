use super::{
    locate_events, Event, Field, Interpolant, State, StepSettings, Termination, Tolerances,
    Trajectory,
};

// RODAS3 in the form (I/(h γ) - J) K_i = f(t + α_i h, y + Σ a_ij K_j)
// + Σ (c_ij / h) K_j + h γ_i f_t.
const GAMMA: f64 = 0.5;
const A: [[f64; 3]; 4] = [
    [0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0],
    [2.0, 0.0, 0.0],
    [2.0, 0.0, 1.0],
];
const C: [[f64; 3]; 4] = [
    [0.0, 0.0, 0.0],
    [4.0, 0.0, 0.0],
    [1.0, -1.0, 0.0],
    [1.0, -1.0, -8.0 / 3.0],
];
const M: [f64; 4] = [2.0, 0.0, 1.0, 1.0];
const E: [f64; 4] = [0.0, 0.0, 0.0, 1.0];
const ALPHA: [f64; 4] = [0.0, 0.0, 1.0, 1.0];
const GAMMA_I: [f64; 4] = [0.5, 1.5, 0.0, 0.0];
const ERROR_ORDER: f64 = 3.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 6.0;

fn solve2(m: &[[f64; 2]; 2], b: &State) -> Option<State> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([
        (b[0] * m[1][1] - m[0][1] * b[1]) / det,
        (m[0][0] * b[1] - m[1][0] * b[0]) / det,
    ])
}

/// Integrate a stiff planar system with RODAS3, stopping at the first event.
///
/// The Jacobian comes from [`Field::jacobian`].
pub fn integrate_stiff<F: Field + ?Sized>(
    f: &F,
    t0: f64,
    y0: State,
    t1: f64,
    tol: Tolerances,
    events: &[Event<'_>],
    settings: StepSettings,
) -> Trajectory {
    let mut traj = Trajectory::start(t0, y0);
    let span = t1 - t0;
    if span == 0.0 {
        return traj;
    }
    let dir = span.signum();
    let max_step = settings.max_step.unwrap_or(span.abs()).abs();
    let mut h = settings
        .initial_step
        .map(f64::abs)
        .unwrap_or(1e-4 * span.abs())
        .min(max_step)
        * dir;

    let mut previous: Vec<f64> = events.iter().map(|e| e.value(t0, &y0)).collect();
    let mut t = t0;
    let mut y = y0;
    let mut f0 = f.eval(t, &y);
    let mut last_rejected = false;
    let mut steps = 0usize;

    loop {
        if steps >= settings.max_steps {
            return traj.finish(Termination::StepFailure(format!(
                "step budget of {} exhausted at t = {t}",
                settings.max_steps
            )));
        }
        steps += 1;
        let remaining = t1 - t;
        let last = h.abs() >= remaining.abs();
        if last {
            h = remaining;
        }
        if h.abs() <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return traj.finish(Termination::StepFailure(format!(
                "step size underflow at t = {t}"
            )));
        }

        let (jac, ft) = f.jacobian(t, &y);
        let ghinv = 1.0 / (GAMMA * h);
        let w = [
            [ghinv - jac[0][0], -jac[0][1]],
            [-jac[1][0], ghinv - jac[1][1]],
        ];

        let mut k: [State; 4] = [[0.0; 2]; 4];
        let mut failed = false;
        for stage in 0..4 {
            let mut ys = y;
            for j in 0..stage {
                for i in 0..2 {
                    ys[i] += A[stage][j] * k[j][i];
                }
            }
            let fs = if stage == 0 || (ys == y && ALPHA[stage] == 0.0) {
                f0
            } else {
                f.eval(t + ALPHA[stage] * h, &ys)
            };
            let mut rhs = fs;
            for j in 0..stage {
                for i in 0..2 {
                    rhs[i] += C[stage][j] / h * k[j][i];
                }
            }
            for i in 0..2 {
                rhs[i] += h * GAMMA_I[stage] * ft[i];
            }
            match solve2(&w, &rhs) {
                Some(ks) if ks[0].is_finite() && ks[1].is_finite() => k[stage] = ks,
                _ => {
                    failed = true;
                    break;
                }
            }
        }

        let mut y_new = y;
        let mut err_vec = [0.0; 2];
        if !failed {
            for stage in 0..4 {
                for i in 0..2 {
                    y_new[i] += M[stage] * k[stage][i];
                    err_vec[i] += E[stage] * k[stage][i];
                }
            }
        }
        let err = if failed {
            f64::INFINITY
        } else {
            tol.error_norm(&y, &y_new, &err_vec)
        };
        if !err.is_finite() {
            h *= FAC_MIN;
            last_rejected = true;
            continue;
        }

        let fac = (SAFETY * err.powf(-1.0 / ERROR_ORDER)).clamp(FAC_MIN, FAC_MAX);
        if err <= 1.0 {
            let t_new = if last { t1 } else { t + h };
            let f1 = f.eval(t_new, &y_new);
            let segment = Interpolant::Hermite {
                t0: t,
                h: t_new - t,
                y0: y,
                y1: y_new,
                f0,
                f1,
            };
            let hit = locate_events(events, &mut previous, &segment, t, t_new);
            traj.push(t_new, y_new, segment, h);
            if let Some((t_event, idx)) = hit {
                traj.truncate_at(t_event);
                return traj.finish(Termination::Event(events[idx].name));
            }
            if last {
                return traj.finish(Termination::ReachedEnd);
            }
            let grow = if last_rejected { fac.min(1.0) } else { fac };
            last_rejected = false;
            t = t_new;
            y = y_new;
            f0 = f1;
            h = dir * (h.abs() * grow).min(max_step);
        } else {
            h *= fac.min(1.0);
            last_rejected = true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::Crossing;

    #[test]
    fn exponential_decay() {
        let traj = integrate_stiff(
            &|_t: f64, y: &State| [-y[0], 0.0],
            0.0,
            [1.0, 0.0],
            1.0,
            Tolerances::new(1e-11, 1e-11),
            &[],
            StepSettings::default(),
        );
        assert_eq!(*traj.termination(), Termination::ReachedEnd);
        assert!((traj.final_state()[0] - (-1f64).exp()).abs() < 1e-9);
    }

    fn fixed_step_error(h: f64) -> f64 {
        let settings = StepSettings {
            initial_step: Some(h),
            max_step: Some(h),
            ..StepSettings::default()
        };
        let traj = integrate_stiff(
            &|t: f64, y: &State| [-y[0] + t.cos(), y[0] - 2.0 * y[1]],
            0.0,
            [1.0, 0.0],
            2.0,
            Tolerances::new(1.0, 1.0),
            &[],
            settings,
        );
        let reference = crate::integrator::integrate(
            &|t: f64, y: &State| [-y[0] + t.cos(), y[0] - 2.0 * y[1]],
            0.0,
            [1.0, 0.0],
            2.0,
            Tolerances::new(1e-13, 1e-13),
            &[],
            StepSettings::default(),
        );
        let a = traj.final_state();
        let b = reference.final_state();
        (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
    }

    #[test]
    fn third_order_convergence() {
        let e1 = fixed_step_error(0.1);
        let e2 = fixed_step_error(0.05);
        let order = (e1 / e2).log2();
        assert!(order > 2.7, "observed order {order}");
    }

    #[test]
    fn very_stiff_relaxation() {
        // y' = -1e6 (y - cos t): explicit schemes need ~1e6 steps here.
        let stiff = |t: f64, y: &State| [-1e6 * (y[0] - t.cos()), 0.0];
        let traj = integrate_stiff(
            &stiff,
            0.0,
            [0.0, 0.0],
            3.0,
            Tolerances::new(1e-8, 1e-10),
            &[],
            StepSettings::default(),
        );
        assert_eq!(*traj.termination(), Termination::ReachedEnd);
        assert!(
            traj.samples().len() < 5000,
            "{} steps",
            traj.samples().len()
        );
        assert!((traj.final_state()[0] - 3f64.cos()).abs() < 1e-5);
    }

    #[test]
    fn event_and_backward() {
        let events = [Event::new("double", Crossing::Rising, |_, y: &State| {
            y[0] - 2.0
        })];
        let traj = integrate_stiff(
            &|_t: f64, y: &State| [-y[0], 0.0],
            0.0,
            [1.0, 0.0],
            -3.0,
            Tolerances::new(1e-10, 1e-10),
            &events,
            StepSettings::default(),
        );
        assert_eq!(*traj.termination(), Termination::Event("double"));
        assert!((traj.end_time() + 2f64.ln()).abs() < 1e-7);
    }
}
