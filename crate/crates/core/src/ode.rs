//! Adaptive Dormand-Prince 5(4) integrator for the planar model.
//!
//! Steps are reported to an observer as `(t, y, y')` triples, which is all a
//! cubic Hermite interpolant needs between accepted steps.

use crate::error::{Error, Result};

pub type State = [f64; 2];

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

/// One accepted step endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub t: f64,
    pub y: State,
    pub dy: State,
}

/// Observer verdict after each accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on |h|.
    pub h_max: f64,
    pub max_steps: usize,
    /// Abort once `x1` drops below this value; `None` disables the guard.
    pub singular_below: Option<f64>,
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator {
            rtol: 1e-10,
            atol: 1e-12,
            h_max: f64::INFINITY,
            max_steps: 5_000_000,
            singular_below: Some(1e-6),
        }
    }
}

#[inline]
fn axpy(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

impl Integrator {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Integrator {
        Integrator {
            rtol,
            atol,
            ..Integrator::default()
        }
    }

    pub fn with_h_max(mut self, h_max: f64) -> Integrator {
        self.h_max = h_max;
        self
    }

    /// Integrates from `t0` to `t_end` (either direction). The observer sees
    /// the initial point and every accepted step; returning [`Flow::Stop`]
    /// ends the run early. Returns the last accepted step.
    pub fn run<F, O>(&self, rhs: F, t0: f64, y0: State, t_end: f64, mut observe: O) -> Result<Step>
    where
        F: Fn(f64, &State) -> State,
        O: FnMut(&Step) -> Flow,
    {
        let dir = if t_end >= t0 { 1.0 } else { -1.0 };
        let span = (t_end - t0).abs();
        let mut t = t0;
        let mut y = y0;
        let mut k1 = rhs(t, &y);
        let start = Step { t, y, dy: k1 };
        if span == 0.0 || observe(&start) == Flow::Stop {
            return Ok(start);
        }

        let mut h = self.initial_step(&y, &k1, span);
        let mut last = start;
        let mut steps = 0usize;
        let mut rejected_in_row = 0usize;
        loop {
            let remaining = (t_end - t).abs();
            if remaining <= 1e-14 * span.max(1.0) {
                return Ok(last);
            }
            let mut last_step = false;
            if h >= remaining {
                h = remaining;
                last_step = true;
            }
            let hs = dir * h;
            let k2 = rhs(t + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]));
            let k3 = rhs(t + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]));
            let k4 = rhs(
                t + C4 * hs,
                &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            );
            let k5 = rhs(
                t + C5 * hs,
                &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = rhs(
                t + hs,
                &axpy(
                    &y,
                    hs,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                ),
            );
            let y_new = axpy(
                &y,
                hs,
                &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            );
            let t_new = if last_step { t_end } else { t + hs };
            let k7 = rhs(t_new, &y_new);

            let mut err = 0.0;
            for i in 0..2 {
                let e = hs
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let scale = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
                err += (e / scale) * (e / scale);
            }
            let err = (0.5 * err).sqrt();

            let positive = self.singular_below.is_none() || y_new[0] > 0.0;
            if err.is_finite() && err <= 1.0 && positive {
                t = t_new;
                y = y_new;
                k1 = k7;
                steps += 1;
                rejected_in_row = 0;
                if let Some(limit) = self.singular_below {
                    if y[0] < limit {
                        return Err(Error::Singularity { t, x1: y[0] });
                    }
                }
                last = Step { t, y, dy: k1 };
                if observe(&last) == Flow::Stop || last_step {
                    return Ok(last);
                }
                if steps >= self.max_steps {
                    return Err(Error::StepFailure {
                        t,
                        reason: format!("step budget {} exhausted", self.max_steps),
                    });
                }
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                h = (h * factor).min(self.h_max);
            } else {
                rejected_in_row += 1;
                let factor = if err.is_finite() {
                    (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
                } else {
                    0.1
                };
                h *= factor;
                if h <= 1e-15 * t.abs().max(1.0) || rejected_in_row > 100 {
                    if self.singular_below.is_some() && !(y_new[0] > 0.0) {
                        return Err(Error::Singularity { t, x1: y[0] });
                    }
                    return Err(Error::StepFailure {
                        t,
                        reason: format!("step size underflow (h = {h:e})"),
                    });
                }
            }
        }
    }

    fn initial_step(&self, y: &State, dy: &State, span: f64) -> f64 {
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..2 {
            let sc = self.atol + self.rtol * y[i].abs();
            d0 += (y[i] / sc).powi(2);
            d1 += (dy[i] / sc).powi(2);
        }
        let h = if d0 < 1e-10 || d1 < 1e-10 {
            1e-6
        } else {
            0.01 * (d0 / d1).sqrt()
        };
        h.min(self.h_max).min(span).max(1e-12 * span)
    }

    /// Convenience wrapper: returns every accepted step.
    pub fn collect<F>(&self, rhs: F, t0: f64, y0: State, t_end: f64) -> Result<Vec<Step>>
    where
        F: Fn(f64, &State) -> State,
    {
        let mut out = Vec::new();
        self.run(rhs, t0, y0, t_end, |s| {
            out.push(*s);
            Flow::Continue
        })?;
        Ok(out)
    }

    /// Final state only.
    pub fn endpoint<F>(&self, rhs: F, t0: f64, y0: State, t_end: f64) -> Result<State>
    where
        F: Fn(f64, &State) -> State,
    {
        Ok(self.run(rhs, t0, y0, t_end, |_| Flow::Continue)?.y)
    }
}

/// Cubic Hermite interpolation between two steps.
pub fn hermite(a: &Step, b: &Step, t: f64) -> State {
    let h = b.t - a.t;
    let s = (t - a.t) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    std::array::from_fn(|i| h00 * a.y[i] + h10 * h * a.dy[i] + h01 * b.y[i] + h11 * h * b.dy[i])
}

/// Dense evaluation on steps sorted by increasing `t`.
pub fn interpolate(steps: &[Step], t: f64) -> Option<State> {
    let first = steps.first()?;
    let last = steps.last()?;
    if t < first.t || t > last.t {
        return None;
    }
    let idx = steps.partition_point(|s| s.t <= t);
    if idx == 0 {
        return Some(first.y);
    }
    if idx >= steps.len() {
        return Some(last.y);
    }
    Some(hermite(&steps[idx - 1], &steps[idx], t))
}
