//! The figure-eight separatrix `E(x1, x2) = beta` through the saddle.
//!
//! In the three-equilibrium window the middle root `x_sa` is a saddle with
//! energy `beta`. Each loop leaves the saddle, turns at the simple zero
//! `x_turn` of `E(x, 0) - beta` on the far side of a center, and returns.
//! Orbits are parameterized with `t = 0` at the turning point, where the
//! time-reversal symmetry makes `x1` even and `x2` odd.

use serde::Serialize;

use crate::equilibria::equilibrium_abscissas;
use crate::error::{Error, Result};
use crate::model::{
    conservative_field, energy_unchecked, m_prime_unchecked, m_unchecked, Params, PhaseState,
    Regime,
};
use crate::ode::{hermite, Flow, Integrator, Step};
use crate::output::{fmt17, Csv};
use crate::roots::{bisect, newton_polish};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }

    /// `+1` for the right loop, `-1` for the left.
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitSample {
    pub t: f64,
    pub x1: f64,
    pub x2: f64,
}

/// One homoclinic loop with a time-parameterized, parity-symmetric sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleLoop {
    pub side: Side,
    pub x_sa: f64,
    pub x_turn: f64,
    pub beta: f64,
    /// Saddle eigenvalue `sqrt(m'(x_sa))`.
    pub lambda: f64,
    /// Samples over `[-t_cut, t_cut]`, increasing in `t`.
    pub orbit: Vec<OrbitSample>,
    /// Distance to the saddle at which the forward half was cut.
    pub delta: f64,
    params: Params,
    /// Index of the `t = 0` sample in `orbit`.
    origin: usize,
}

/// Sampling controls for [`sample_orbit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitOptions {
    /// Stop once `|x1 - x_sa| < delta`; `None` uses `1e-6 |x_turn - x_sa|`.
    pub delta: Option<f64>,
    pub dt_max: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        OrbitOptions {
            delta: None,
            dt_max: 0.02,
            rtol: 1e-13,
            atol: 1e-15,
        }
    }
}

/// Largest tolerated `|E - beta|` along a sampled orbit.
pub const ENERGY_TOL: f64 = 1e-8;

/// Saddle abscissa and its energy `beta = E(x_sa, 0)`.
///
/// Requires `b1 < b1*` and `a` strictly inside the window `(a_r, a_l)`, where
/// the conservative system has two centers and a saddle.
pub fn saddle_energy(p: &Params) -> Result<(f64, f64)> {
    let roots = three_roots(p)?;
    let x_sa = roots[1];
    Ok((x_sa, energy_unchecked(x_sa, 0.0, p)))
}

fn three_roots(p: &Params) -> Result<[f64; 3]> {
    if p.regime() != Regime::Bistable {
        return Err(Error::Regime(format!(
            "a homoclinic loop requires b1 < b1* = {} (two centers and a saddle); got b1 = {} ({} regime)",
            p.b1_crit(),
            p.b1(),
            p.regime().name()
        )));
    }
    let roots = equilibrium_abscissas(p);
    match roots.as_slice() {
        &[l, s, r] if m_prime_unchecked(s, p) > 0.0 => Ok([l, s, r]),
        _ => {
            let window = crate::bifurcation::bistable_window(p)
                .map(|(lo, hi)| format!("({lo}, {hi})"))
                .unwrap_or_else(|| "empty".to_string());
            Err(Error::Regime(format!(
                "a homoclinic loop requires a strictly inside the three-equilibrium window {window}; got a = {} with {} equilibria",
                p.a(),
                roots.len()
            )))
        }
    }
}

/// Simple zeros `(x_left, x_right)` of `E(x, 0) - beta` adjacent to the saddle.
pub fn turning_points(p: &Params, x_sa: f64, beta: f64) -> Result<(f64, f64)> {
    let [left_center, _, right_center] = three_roots(p)?;
    if !(left_center < x_sa && x_sa < right_center) {
        return Err(Error::InvalidParams(format!(
            "x_sa = {x_sa} is not between the centers {left_center} and {right_center}"
        )));
    }
    let g = |x: f64| energy_unchecked(x, 0.0, p) - beta;
    let dg = |x: f64| -(m_unchecked(x, p) + p.a());

    let mut hi = 2.0 * right_center;
    while g(hi) <= 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::NoBracket {
                lo: right_center,
                hi,
            });
        }
    }
    let right = bisect(g, right_center, hi, 1e-15 * hi)?;
    let right = newton_polish(g, dg, right, right_center, hi);

    let mut lo = 0.5 * left_center;
    while g(lo) <= 0.0 {
        lo *= 0.5;
        if lo < 1e-12 {
            return Err(Error::NoBracket {
                lo,
                hi: left_center,
            });
        }
    }
    let left = bisect(g, lo, left_center, 1e-15 * left_center)?;
    let left = newton_polish(g, dg, left, lo, left_center);
    Ok((left, right))
}

/// Nonnegative velocity on the separatrix,
/// `sqrt(2 (beta + a x1 + b2/x1 - b1/(7 x1^7) - x1^2/2))`.
pub fn separatrix_velocity(x1: f64, beta: f64, p: &Params) -> Result<f64> {
    crate::error::require_positive("x1", x1)?;
    let radicand = 2.0 * (beta - energy_unchecked(x1, 0.0, p));
    if radicand < -1e-12 {
        return Err(Error::Domain {
            what: "x1",
            requirement: "a point of the homoclinic loop (E(x1, 0) <= beta)",
            value: x1,
        });
    }
    Ok(radicand.max(0.0).sqrt())
}

/// Builds one loop by integrating the conservative flow from the turning
/// point towards the saddle and mirroring the result to negative times.
pub fn sample_orbit(p: &Params, side: Side, opts: &OrbitOptions) -> Result<SaddleLoop> {
    let (x_sa, beta) = saddle_energy(p)?;
    let (left, right) = turning_points(p, x_sa, beta)?;
    let x_turn = match side {
        Side::Left => left,
        Side::Right => right,
    };
    let span = (x_turn - x_sa).abs();
    let delta = opts.delta.unwrap_or(1e-6 * span);
    if !(delta > 0.0 && delta < 0.1 * span) {
        return Err(Error::InvalidParams(format!(
            "delta = {delta} must lie in (0, {}) for this loop",
            0.1 * span
        )));
    }
    let lambda = m_prime_unchecked(x_sa, p).sqrt();
    let t_max = 50.0 / lambda;

    let integ = Integrator {
        h_max: opts.dt_max,
        ..Integrator::with_tolerances(opts.rtol, opts.atol)
    };
    let rhs = |_t: f64, y: &[f64; 2]| conservative_field(y, p);
    let mut forward: Vec<OrbitSample> = Vec::new();
    let mut closest = f64::INFINITY;
    let mut drift: f64 = 0.0;
    integ.run(rhs, 0.0, [x_turn, 0.0], t_max, |s: &Step| {
        let dist = (s.y[0] - x_sa).abs();
        drift = drift.max((energy_unchecked(s.y[0], s.y[1], p) - beta).abs());
        // Past the closest approach the numerical orbit has slid onto the
        // unstable manifold; the previous sample ends the loop.
        if dist > closest && closest < 1e-3 * span {
            return Flow::Stop;
        }
        forward.push(OrbitSample {
            t: s.t,
            x1: s.y[0],
            x2: s.y[1],
        });
        closest = closest.min(dist);
        if dist < delta {
            Flow::Stop
        } else {
            Flow::Continue
        }
    })?;
    if drift > ENERGY_TOL {
        return Err(Error::EnergyDrift {
            drift,
            limit: ENERGY_TOL,
        });
    }

    let mut orbit: Vec<OrbitSample> = forward
        .iter()
        .skip(1)
        .rev()
        .map(|s| OrbitSample {
            t: -s.t,
            x1: s.x1,
            x2: -s.x2,
        })
        .collect();
    let origin = orbit.len();
    orbit.extend(forward.iter().copied());

    Ok(SaddleLoop {
        side,
        x_sa,
        x_turn,
        beta,
        lambda,
        orbit,
        delta,
        params: *p,
        origin,
    })
}

/// Both loops, built concurrently when the executor allows it.
pub fn sample_both(
    p: &Params,
    opts: &OrbitOptions,
    exec: crate::Execution,
) -> Result<[SaddleLoop; 2]> {
    let built = exec.map(&[Side::Left, Side::Right], |&side| {
        sample_orbit(p, side, opts)
    });
    let mut it = built.into_iter();
    let left = it.next().expect("two sides")?;
    let right = it.next().expect("two sides")?;
    Ok([left, right])
}

impl SaddleLoop {
    pub fn params(&self) -> &Params {
        &self.params
    }

    /// Samples with `t >= 0`, starting at the turning point.
    pub fn forward_half(&self) -> &[OrbitSample] {
        &self.orbit[self.origin..]
    }

    pub fn t_cut(&self) -> f64 {
        self.orbit.last().map_or(0.0, |s| s.t)
    }

    fn step(&self, s: &OrbitSample) -> Step {
        let y = [s.x1, s.x2];
        Step {
            t: s.t,
            y,
            dy: conservative_field(&y, &self.params),
        }
    }

    /// Cubic Hermite interpolation of the loop at time `t` in `[-t_cut, t_cut]`.
    pub fn state_at(&self, t: f64) -> Option<PhaseState> {
        let t_cut = self.t_cut();
        if !(t.abs() <= t_cut) {
            return None;
        }
        let half = self.forward_half();
        let tau = t.abs();
        let idx = half.partition_point(|s| s.t <= tau);
        let y = if idx >= half.len() {
            let last = half[half.len() - 1];
            [last.x1, last.x2]
        } else {
            hermite(&self.step(&half[idx - 1]), &self.step(&half[idx]), tau)
        };
        let x2 = if t < 0.0 { -y[1] } else { y[1] };
        Some(PhaseState { x1: y[0], x2 })
    }

    /// Interpolated state inside forward interval `i` (between samples `i`, `i+1`).
    /// Exponential decay rate of `|x2|` fitted by least squares on the tail
    /// samples within `1e-3 |x_turn - x_sa|` of the saddle.
    pub fn tail_decay_rate(&self) -> Option<f64> {
        let span = (self.x_turn - self.x_sa).abs();
        let pts: Vec<(f64, f64)> = self
            .forward_half()
            .iter()
            .filter(|s| (s.x1 - self.x_sa).abs() <= 1e-3 * span && s.x2 != 0.0)
            .map(|s| (s.t, s.x2.abs().ln()))
            .collect();
        if pts.len() < 3 {
            return None;
        }
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
        Some(-sxy / sxx)
    }

    /// Largest `|E(x1, x2) - beta|` over the samples.
    pub fn max_energy_error(&self) -> f64 {
        self.orbit
            .iter()
            .map(|s| (energy_unchecked(s.x1, s.x2, &self.params) - self.beta).abs())
            .fold(0.0, f64::max)
    }

    /// CSV `t,x1,x2`.
    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["t", "x1", "x2"]);
        for s in &self.orbit {
            csv.row(&[fmt17(s.t), fmt17(s.x1), fmt17(s.x2)]);
        }
        csv.into_string()
    }
}
