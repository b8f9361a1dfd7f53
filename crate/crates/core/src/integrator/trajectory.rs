use super::State;

/// Dense output over one accepted step `[t0, t0 + h]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Interpolant {
    /// Dormand–Prince continuous extension.
    Dopri { t0: f64, h: f64, coeffs: [State; 5] },
    /// Cubic Hermite through both endpoints and slopes.
    Hermite {
        t0: f64,
        h: f64,
        y0: State,
        y1: State,
        f0: State,
        f1: State,
    },
    /// Polynomial through neighbouring samples, evaluated in barycentric form.
    Local {
        nodes: Vec<(f64, State)>,
        weights: Vec<f64>,
    },
}

impl Interpolant {
    pub fn eval(&self, t: f64) -> State {
        match self {
            Interpolant::Dopri { t0, h, coeffs } => {
                let theta = (t - t0) / h;
                let theta1 = 1.0 - theta;
                let [r1, r2, r3, r4, r5] = coeffs;
                let mut out = [0.0; 2];
                for i in 0..2 {
                    out[i] = r1[i]
                        + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i])));
                }
                out
            }
            Interpolant::Hermite {
                t0,
                h,
                y0,
                y1,
                f0,
                f1,
            } => {
                let s = (t - t0) / h;
                let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
                let h10 = s * (1.0 - s) * (1.0 - s);
                let h01 = s * s * (3.0 - 2.0 * s);
                let h11 = s * s * (s - 1.0);
                let mut out = [0.0; 2];
                for i in 0..2 {
                    out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
                }
                out
            }
            Interpolant::Local { nodes, weights } => {
                let mut num = [0.0; 2];
                let mut den = 0.0;
                for ((tj, yj), wj) in nodes.iter().zip(weights) {
                    let d = t - tj;
                    if d == 0.0 {
                        return *yj;
                    }
                    let c = wj / d;
                    num[0] += c * yj[0];
                    num[1] += c * yj[1];
                    den += c;
                }
                [num[0] / den, num[1] / den]
            }
        }
    }

    fn local(nodes: Vec<(f64, State)>) -> Self {
        let weights = (0..nodes.len())
            .map(|j| {
                let prod: f64 = (0..nodes.len())
                    .filter(|&m| m != j)
                    .map(|m| nodes[j].0 - nodes[m].0)
                    .product();
                1.0 / prod
            })
            .collect();
        Interpolant::Local { nodes, weights }
    }
}

/// Why an integration stopped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Termination {
    ReachedEnd,
    /// Name of the event that fired first.
    Event(&'static str),
    /// Step size underflow, step budget exhausted, or a non-finite state.
    StepFailure(String),
}

/// Accepted steps of an integration with dense output between them.
///
/// Sample times are strictly monotone (increasing or decreasing); segment `i`
/// interpolates between samples `i` and `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<(f64, State)>,
    segments: Vec<Interpolant>,
    termination: Termination,
    last_step: f64,
}

impl Trajectory {
    pub(crate) fn start(t0: f64, y0: State) -> Self {
        Self {
            samples: vec![(t0, y0)],
            segments: Vec::new(),
            termination: Termination::ReachedEnd,
            last_step: 0.0,
        }
    }

    pub(crate) fn push(&mut self, t: f64, y: State, segment: Interpolant, step: f64) {
        self.samples.push((t, y));
        self.segments.push(segment);
        self.last_step = step;
    }

    pub(crate) fn finish(mut self, termination: Termination) -> Self {
        self.termination = termination;
        self
    }

    pub fn samples(&self) -> &[(f64, State)] {
        &self.samples
    }

    pub fn segments(&self) -> &[Interpolant] {
        &self.segments
    }

    pub fn termination(&self) -> &Termination {
        &self.termination
    }

    /// Size of the last accepted step, useful to warm-start a continuation.
    pub fn last_step(&self) -> f64 {
        self.last_step
    }

    pub fn start_time(&self) -> f64 {
        self.samples[0].0
    }

    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].0
    }

    pub fn final_state(&self) -> State {
        self.samples[self.samples.len() - 1].1
    }

    fn forward(&self) -> bool {
        self.end_time() >= self.start_time()
    }

    /// Dense state at `t`, or `None` outside the covered interval.
    pub fn at(&self, t: f64) -> Option<State> {
        let idx = self.segment_index(t)?;
        if idx == self.segments.len() {
            return Some(self.final_state());
        }
        let (ta, ya) = self.samples[idx];
        let (tb, yb) = self.samples[idx + 1];
        if t == ta {
            return Some(ya);
        }
        if t == tb {
            return Some(yb);
        }
        Some(self.segments[idx].eval(t))
    }

    fn segment_index(&self, t: f64) -> Option<usize> {
        if t.is_nan() {
            return None;
        }
        let (lo, hi) = if self.forward() {
            (self.start_time(), self.end_time())
        } else {
            (self.end_time(), self.start_time())
        };
        if t < lo || t > hi {
            return None;
        }
        if self.segments.is_empty() {
            return Some(0);
        }
        let forward = self.forward();
        // First sample strictly past t.
        let past = self
            .samples
            .partition_point(|(ts, _)| if forward { *ts <= t } else { *ts >= t });
        Some(past.saturating_sub(1).min(self.segments.len() - 1))
    }

    /// Drop everything past `t` (in the direction of integration), ending on
    /// the dense state at `t`.
    pub fn truncate_at(&mut self, t: f64) {
        let Some(idx) = self.segment_index(t) else {
            return;
        };
        if self.segments.is_empty() {
            return;
        }
        let y = self.at(t).expect("t is covered");
        self.samples.truncate(idx + 1);
        self.segments.truncate(idx + 1);
        if self.samples[idx].0 == t {
            self.segments.truncate(idx);
        } else {
            self.samples.push((t, y));
        }
    }

    /// Continue this trajectory with `next`, which must start where this one
    /// ends. The state at the junction is taken from `next`.
    pub fn append(&mut self, next: Trajectory) {
        let scale = self.end_time().abs().max(1.0);
        assert!(
            (next.start_time() - self.end_time()).abs() <= 1e-12 * scale,
            "trajectories do not join: {} vs {}",
            self.end_time(),
            next.start_time()
        );
        self.samples.pop();
        self.samples.extend(next.samples);
        self.segments.extend(next.segments);
        self.termination = next.termination;
        self.last_step = next.last_step;
    }

    /// Replace the dense output by polynomials through `nodes` neighbouring
    /// samples (centred where possible).
    ///
    /// Stiff runs need this: the endpoint slopes used by Hermite segments are
    /// dominated by round-off amplified by the stiffness, while the sample
    /// values themselves are accurate.
    pub fn rebuild_from_samples(&mut self, nodes: usize) {
        let count = self.samples.len();
        let width = nodes.clamp(2, count.max(2)).min(count);
        if width < 2 {
            return;
        }
        let below = (width - 1) / 2;
        self.segments = (0..count - 1)
            .map(|i| {
                let first = i.saturating_sub(below).min(count - width);
                Interpolant::local(self.samples[first..first + width].to_vec())
            })
            .collect();
    }

    /// Sample the dense output on `count` equally spaced times covering the
    /// whole trajectory, endpoints included.
    pub fn resample(&self, count: usize) -> Vec<(f64, State)> {
        let count = count.max(2);
        let (a, b) = (self.start_time(), self.end_time());
        (0..count)
            .map(|i| {
                let t = if i + 1 == count {
                    b
                } else {
                    a + (b - a) * i as f64 / (count - 1) as f64
                };
                (t, self.at(t).expect("inside the trajectory"))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(t0: f64, t1: f64, steps: usize) -> Trajectory {
        // y = (t, 2t) with exact Hermite segments.
        let mut traj = Trajectory::start(t0, [t0, 2.0 * t0]);
        let h = (t1 - t0) / steps as f64;
        for i in 0..steps {
            let a = t0 + h * i as f64;
            let b = if i + 1 == steps { t1 } else { a + h };
            let seg = Interpolant::Hermite {
                t0: a,
                h,
                y0: [a, 2.0 * a],
                y1: [b, 2.0 * b],
                f0: [1.0, 2.0],
                f1: [1.0, 2.0],
            };
            traj.push(b, [b, 2.0 * b], seg, h);
        }
        traj
    }

    #[test]
    fn dense_lookup_both_directions() {
        for (a, b) in [(0.0, 1.0), (1.0, 0.0)] {
            let traj = linear(a, b, 7);
            for i in 0..=20 {
                let t = f64::from(i) / 20.0;
                let y = traj.at(t).unwrap();
                assert!((y[0] - t).abs() < 1e-14 && (y[1] - 2.0 * t).abs() < 1e-14);
            }
            assert!(traj.at(1.5).is_none());
            assert!(traj.at(-0.1).is_none());
        }
    }

    #[test]
    fn truncate_then_append() {
        let mut traj = linear(0.0, 1.0, 4);
        traj.truncate_at(0.6);
        assert_eq!(traj.end_time(), 0.6);
        assert_eq!(traj.segments().len() + 1, traj.samples().len());
        assert!((traj.final_state()[1] - 1.2).abs() < 1e-14);
        let tail = linear(0.6, 2.0, 3);
        traj.append(tail);
        assert_eq!(traj.end_time(), 2.0);
        assert_eq!(traj.segments().len() + 1, traj.samples().len());
        let y = traj.at(1.3).unwrap();
        assert!((y[0] - 1.3).abs() < 1e-14);
    }

    #[test]
    fn truncate_on_a_sample() {
        let mut traj = linear(0.0, 1.0, 4);
        traj.truncate_at(0.5);
        assert_eq!(traj.samples().len(), 3);
        assert_eq!(traj.segments().len(), 2);
    }

    #[test]
    fn rebuilt_dense_output_is_polynomial_exact() {
        let mut traj = Trajectory::start(0.0, [0.0, 1.0]);
        let mut t = 0.0;
        for i in 0..12 {
            let h = 0.05 + 0.01 * f64::from(i % 3);
            let seg = Interpolant::Hermite {
                t0: t,
                h,
                y0: [0.0; 2],
                y1: [0.0; 2],
                f0: [0.0; 2],
                f1: [0.0; 2],
            };
            t += h;
            traj.push(t, [t.powi(5), 1.0 - t * t], seg, h);
        }
        traj.samples[0].1 = [0.0, 1.0];
        traj.rebuild_from_samples(6);
        for i in 0..=100 {
            let t = traj.end_time() * f64::from(i) / 100.0;
            let y = traj.at(t).unwrap();
            assert!((y[0] - t.powi(5)).abs() < 1e-13, "{t}");
            assert!((y[1] - (1.0 - t * t)).abs() < 1e-13, "{t}");
        }
    }

    #[test]
    fn resample_hits_endpoints() {
        let traj = linear(0.0, 1.0, 3);
        let pts = traj.resample(11);
        assert_eq!(pts.len(), 11);
        assert_eq!(pts[0].0, 0.0);
        assert_eq!(pts[10].0, 1.0);
    }
}
