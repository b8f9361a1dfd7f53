use super::{
    locate_events, Event, Field, Interpolant, State, StepSettings, Termination, Tolerances,
    Trajectory,
};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

fn comb(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// Integrate `y' = f(t, y)` from `(t0, y0)` to `t1` (either direction) with
/// Dormand–Prince 5(4). Integration stops at the first event crossing.
pub fn integrate<F: Field + ?Sized>(
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
    let mut k1 = f.eval(t, &y);
    let mut facold: f64 = 1e-4;
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

        let k2 = f.eval(t + C2 * h, &comb(&y, h, &[(A21, &k1)]));
        let k3 = f.eval(t + C3 * h, &comb(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f.eval(
            t + C4 * h,
            &comb(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = f.eval(
            t + C5 * h,
            &comb(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f.eval(
            t + h,
            &comb(
                &y,
                h,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y_new = comb(
            &y,
            h,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let t_new = if last { t1 } else { t + h };
        let k7 = f.eval(t_new, &y_new);

        let err_vec = comb(
            &[0.0, 0.0],
            h,
            &[
                (E1, &k1),
                (E3, &k3),
                (E4, &k4),
                (E5, &k5),
                (E6, &k6),
                (E7, &k7),
            ],
        );
        let err = tol.error_norm(&y, &y_new, &err_vec);
        if !err.is_finite() || !y_new[0].is_finite() || !y_new[1].is_finite() {
            h *= FAC_MIN;
            last_rejected = true;
            continue;
        }

        let fac11 = err.powf(EXPO1);
        if err <= 1.0 {
            let fac = (fac11 / facold.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            if last_rejected {
                h_new = dir * h_new.abs().min(h.abs());
            }
            facold = err.max(1e-4);
            last_rejected = false;

            let ydiff = [y_new[0] - y[0], y_new[1] - y[1]];
            let mut rc3 = [0.0; 2];
            let mut rc4 = [0.0; 2];
            let mut rc5 = [0.0; 2];
            for i in 0..2 {
                rc3[i] = h * k1[i] - ydiff[i];
                rc4[i] = ydiff[i] - h * k7[i] - rc3[i];
                rc5[i] = h
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let segment = Interpolant::Dopri {
                t0: t,
                h: t_new - t,
                coeffs: [y, ydiff, rc3, rc4, rc5],
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
            t = t_new;
            y = y_new;
            k1 = k7;
            h = dir * h_new.abs().min(max_step);
        } else {
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            last_rejected = true;
        }
    }
}
