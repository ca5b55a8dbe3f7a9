//! Melnikov integrals along a homoclinic loop and the persistence threshold.
//!
//! For the forcing `B cos(Omega t)` and damping `C x2 / x1^3`,
//!
//! ```text
//! M(t0) = B xi1 sin(Omega t0) + C xi2,
//! xi1   = -2 int_0^inf sin(Omega t) x2(t) dt,
//! xi2   = -int_{-inf}^{inf} x2(t)^2 / x1(t)^3 dt,
//! ```
//!
//! with time measured from the turning point of the loop. `M` has simple
//! zeros exactly when `B / C > |xi2 / xi1|`.

use serde::Serialize;

use crate::error::{require_positive, Error, Result};
use crate::homoclinic::{OrbitSample, SaddleLoop, Side};
use crate::model::{
    conservative_field, energy_unchecked, m_prime_unchecked, m_second_unchecked, Params, PhaseState,
};
use crate::ode::{hermite, Step};
use crate::output::{fmt17, Csv, JsonObject};
use crate::parallel::Execution;
use crate::quad;

/// Value with a nonnegative error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

/// Relative tolerance on the tail contribution of `xi1`.
pub const TAIL_REL_LIMIT: f64 = 1e-6;
/// Largest accepted relative disagreement of the two `xi2` routes.
pub const ROUTE_REL_LIMIT: f64 = 1e-4;
/// Largest `Omega h` per Simpson panel.
const PHASE_PER_PANEL: f64 = 0.25;

fn to_step(s: &OrbitSample, p: &Params) -> Step {
    let y = [s.x1, s.x2];
    Step {
        t: s.t,
        y,
        dy: conservative_field(&y, p),
    }
}

/// Composite Simpson over consecutive samples, each interval split so that
/// `omega h <= 0.25`, with the state between samples taken from the cubic
/// Hermite interpolant. The error estimate is the Richardson difference
/// against half as many panels.
fn simpson_along<F>(samples: &[OrbitSample], p: &Params, omega: f64, f: F) -> Integral
where
    F: Fn(f64, [f64; 2]) -> f64,
{
    let mut fine_sum = 0.0;
    let mut err_sum = 0.0;
    for w in samples.windows(2) {
        let (a, b) = (to_step(&w[0], p), to_step(&w[1], p));
        let h = b.t - a.t;
        if h == 0.0 {
            continue;
        }
        let k = ((omega * h / PHASE_PER_PANEL).ceil() as usize).max(1);
        let eval = |t: f64| -> f64 {
            if t == a.t {
                f(t, a.y)
            } else if t == b.t {
                f(t, b.y)
            } else {
                f(t, hermite(&a, &b, t))
            }
        };
        // 2k panels on a uniform grid of 4k + 1 points.
        let n = 4 * k;
        let dt = h / n as f64;
        let vals: Vec<f64> = (0..=n)
            .map(|j| {
                if j == n {
                    eval(b.t)
                } else {
                    eval(a.t + j as f64 * dt)
                }
            })
            .collect();
        let mut fine = 0.0;
        for j in (0..n).step_by(2) {
            fine += vals[j] + 4.0 * vals[j + 1] + vals[j + 2];
        }
        fine *= dt / 3.0;
        let mut coarse = 0.0;
        for j in (0..n).step_by(4) {
            coarse += vals[j] + 4.0 * vals[j + 2] + vals[j + 4];
        }
        coarse *= 2.0 * dt / 3.0;
        fine_sum += fine;
        err_sum += (fine - coarse).abs() / 15.0;
    }
    Integral {
        value: fine_sum,
        error: err_sum,
    }
}

/// `xi1 = -2 int_0^inf sin(omega t) x2(t) dt` along the loop.
///
/// Beyond the last sample the orbit is on the linear stable manifold,
/// `x2(t) = x2(T) e^{-lambda (t - T)}`; that tail is integrated in closed
/// form and its uncertainty (fitted versus exact decay rate, plus the
/// quadratic correction) enters the error estimate. Fails with
/// [`Error::TailTooLarge`] when that uncertainty exceeds
/// `1e-6 max(|xi1|, 2 int |sin(omega t) x2| dt)`.
pub fn xi1(lp: &SaddleLoop, omega: f64) -> Result<Integral> {
    require_positive("omega", omega)?;
    let p = lp.params();
    let half = lp.forward_half();
    let body = simpson_along(half, p, omega, |t, y| (omega * t).sin() * y[1]);

    let last = half[half.len() - 1];
    let (t_end, amp) = (last.t, last.x2);
    let lambda = lp.lambda;
    let tail_integral = amp * (lambda * (omega * t_end).sin() + omega * (omega * t_end).cos())
        / (lambda * lambda + omega * omega);
    let u = (last.x1 - lp.x_sa).abs();
    let nonlinear = u * m_second_unchecked(lp.x_sa, p).abs() / m_prime_unchecked(lp.x_sa, p);
    let fit = lp
        .tail_decay_rate()
        .map_or(1.0, |rate| (rate - lambda).abs() / lambda);
    let tail_bound = 2.0 * tail_integral.abs() * (nonlinear + fit);

    let value = -2.0 * (body.value + tail_integral);
    // For fast forcing xi1 cancels to almost nothing; the gate is then taken
    // relative to the L1 norm of the integrand instead.
    let magnitude =
        2.0 * simpson_along(half, p, omega, |t, y| ((omega * t).sin() * y[1]).abs()).value;
    let limit = TAIL_REL_LIMIT * value.abs().max(magnitude);
    if tail_bound > limit {
        return Err(Error::TailTooLarge {
            bound: tail_bound,
            limit,
        });
    }
    Ok(Integral {
        value,
        error: 2.0 * body.error + tail_bound,
    })
}

/// Both evaluations of `xi2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Xi2 {
    /// Returned value: the position-form route.
    pub value: f64,
    pub error: f64,
    /// Time quadrature over the sampled orbit.
    pub time_route: f64,
    /// Quadrature in `x1` with `dt = dx1 / x2`.
    pub position_route: f64,
}

/// `xi2 = -int x2^2 / x1^3 dt`, computed along the sampled orbit and, after
/// the change of variable `dt = dx1 / x2`, as `-2 int |x2| / x1^3 dx1` over
/// `[x_sa, x_turn]`. The second route substitutes `x1 = x_turn -/+ s^2`,
/// which removes the square-root behaviour at the turning point.
pub fn xi2(lp: &SaddleLoop) -> Result<Xi2> {
    let p = lp.params();
    let half = lp.forward_half();

    let body = simpson_along(half, p, 0.0, |_, y| y[1] * y[1] / (y[0] * y[0] * y[0]));
    let last = half[half.len() - 1];
    let tail = last.x2 * last.x2 / (2.0 * lp.lambda * lp.x_sa.powi(3));
    let time_route = -2.0 * (body.value + tail);

    let orient = lp.side.sign();
    let s_max = (lp.x_turn - lp.x_sa).abs().sqrt();
    let beta = lp.beta;
    let integrand = |s: f64| {
        let x = lp.x_turn - orient * s * s;
        let v2 = 2.0 * (beta - energy_unchecked(x, 0.0, p));
        2.0 * s * v2.max(0.0).sqrt() / (x * x * x)
    };
    let est = quad::integrate(integrand, 0.0, s_max, 1e-15, 1e-13);
    let position_route = -2.0 * est.value;

    let rel = (time_route - position_route).abs() / position_route.abs();
    if rel > ROUTE_REL_LIMIT {
        return Err(Error::RouteMismatch {
            first: time_route,
            second: position_route,
            rel,
        });
    }
    Ok(Xi2 {
        value: position_route,
        error: 2.0 * est.error + (time_route - position_route).abs(),
        time_route,
        position_route,
    })
}

/// `int_{-T}^{T} cos(omega t) x2(t) dt` over the full symmetric sampling.
/// Vanishes because `x2` is odd in `t`.
pub fn cosine_parity_integral(lp: &SaddleLoop, omega: f64) -> f64 {
    simpson_along(&lp.orbit, lp.params(), omega, |t, y| {
        (omega * t).cos() * y[1]
    })
    .value
}

/// `M(t0) = B xi1 sin(omega t0) + C xi2`.
pub fn melnikov_at(t0: f64, forcing: f64, damping: f64, omega: f64, xi1: f64, xi2: f64) -> f64 {
    forcing * xi1 * (omega * t0).sin() + damping * xi2
}

/// Forcing amplitude `C |xi2 / xi1|` above which `M` has simple zeros;
/// infinite when `xi1 = 0`.
pub fn persistence_threshold(xi1: f64, xi2: f64, damping: f64) -> f64 {
    if xi1 == 0.0 {
        f64::INFINITY
    } else {
        damping * (xi2 / xi1).abs()
    }
}

/// Strict inequality `B > B*`.
pub fn persists(forcing: f64, threshold: f64) -> bool {
    threshold.is_finite() && forcing > threshold
}

/// First-order signed splitting `eps M / |f(state)|` along the normal
/// `(-f2, f1) / |f|` of the unperturbed loop at `state`.
pub fn splitting_distance(
    epsilon: f64,
    m_value: f64,
    lp: &SaddleLoop,
    state: PhaseState,
) -> Result<f64> {
    let f = conservative_field(&[state.x1, state.x2], lp.params());
    let norm = f[0].hypot(f[1]);
    if !(norm > 1e-12) {
        return Err(Error::Domain {
            what: "|f(state)|",
            requirement: "> 0 (state must not be the saddle)",
            value: norm,
        });
    }
    Ok(epsilon * m_value / norm)
}

/// Zeros of `M` over one forcing period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroStructure {
    NoZeros,
    Tangency,
    TwoSimpleZeros,
}

/// Classifies the zeros of `M` from `samples` equispaced phases over one
/// period: sign changes give simple zeros, a sampled value within `1e-12`
/// of zero without a sign change is a tangency.
pub fn zero_structure(
    forcing: f64,
    damping: f64,
    omega: f64,
    xi1: f64,
    xi2: f64,
    samples: usize,
) -> ZeroStructure {
    let period = std::f64::consts::TAU / omega;
    let vals: Vec<f64> = (0..samples)
        .map(|k| {
            melnikov_at(
                period * k as f64 / samples as f64,
                forcing,
                damping,
                omega,
                xi1,
                xi2,
            )
        })
        .collect();
    let scale = (forcing * xi1).abs() + (damping * xi2).abs();
    let changes = (0..samples)
        .filter(|&k| vals[k] * vals[(k + 1) % samples] < 0.0)
        .count();
    if changes >= 2 {
        ZeroStructure::TwoSimpleZeros
    } else if vals
        .iter()
        .any(|v| v.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE))
    {
        ZeroStructure::Tangency
    } else {
        ZeroStructure::NoZeros
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MelnikovResult {
    pub side: Side,
    pub omega: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub err_xi1: f64,
    pub err_xi2: f64,
    /// `C |xi2 / xi1|`.
    pub threshold_b: f64,
    pub persists: bool,
}

impl MelnikovResult {
    pub fn to_json(&self) -> String {
        JsonObject::new()
            .string("side", self.side.name())
            .num("omega", self.omega)
            .num("xi1", self.xi1)
            .num("xi2", self.xi2)
            .num("err_xi1", self.err_xi1)
            .num("err_xi2", self.err_xi2)
            .num("threshold_B", self.threshold_b)
            .boolean("persists", self.persists)
            .render()
    }
}

/// Full analysis of one loop at the forcing frequency and amplitudes in `lp.params()`.
pub fn analyze(lp: &SaddleLoop) -> Result<MelnikovResult> {
    let x2 = xi2(lp)?;
    analyze_with(lp, &x2, lp.params().omega())
}

fn analyze_with(lp: &SaddleLoop, x2: &Xi2, omega: f64) -> Result<MelnikovResult> {
    let p = lp.params();
    let x1 = xi1(lp, omega)?;
    let threshold_b = persistence_threshold(x1.value, x2.value, p.damping());
    Ok(MelnikovResult {
        side: lp.side,
        omega,
        xi1: x1.value,
        xi2: x2.value,
        err_xi1: x1.error,
        err_xi2: x2.error,
        threshold_b,
        persists: persists(p.forcing(), threshold_b),
    })
}

/// Results for every loop, with the smaller threshold singled out.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MelnikovReport {
    pub results: Vec<MelnikovResult>,
    pub min_threshold_b: f64,
}

impl MelnikovReport {
    pub fn new(results: Vec<MelnikovResult>) -> MelnikovReport {
        let min_threshold_b = results
            .iter()
            .map(|r| r.threshold_b)
            .fold(f64::INFINITY, f64::min);
        MelnikovReport {
            results,
            min_threshold_b,
        }
    }

    pub fn to_json(&self) -> String {
        JsonObject::new()
            .raw(
                "results",
                crate::output::json_array(self.results.iter().map(MelnikovResult::to_json)),
            )
            .num("min_threshold_B", self.min_threshold_b)
            .render()
    }
}

/// Analyzes several loops (typically left and right) concurrently.
pub fn analyze_loops(loops: &[SaddleLoop], exec: Execution) -> Result<MelnikovReport> {
    let results: Result<Vec<_>> = exec.map(loops, analyze).into_iter().collect();
    Ok(MelnikovReport::new(results?))
}

/// Thresholds across forcing frequencies; `xi2` is computed once per loop.
pub fn scan_omega(
    loops: &[SaddleLoop],
    omegas: &[f64],
    exec: Execution,
) -> Result<Vec<MelnikovResult>> {
    let xi2s: Vec<Xi2> = loops.iter().map(xi2).collect::<Result<_>>()?;
    let jobs: Vec<(usize, f64)> = omegas
        .iter()
        .flat_map(|&w| (0..loops.len()).map(move |i| (i, w)))
        .collect();
    exec.map(&jobs, |&(i, w)| analyze_with(&loops[i], &xi2s[i], w))
        .into_iter()
        .collect()
}

/// CSV `omega,side,xi1,xi2,threshold_B`.
pub fn scan_csv(results: &[MelnikovResult]) -> String {
    let mut csv = Csv::new(&["omega", "side", "xi1", "xi2", "threshold_B"]);
    for r in results {
        csv.row(&[
            fmt17(r.omega),
            r.side.name().to_string(),
            fmt17(r.xi1),
            fmt17(r.xi2),
            fmt17(r.threshold_b),
        ]);
    }
    csv.into_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homoclinic::{sample_orbit, OrbitOptions};

    fn loop_for(side: Side) -> SaddleLoop {
        let p = Params::new(0.1, 1.0, 1.89)
            .unwrap()
            .with_damping(1.0)
            .unwrap()
            .with_forcing(0.5, 1.0)
            .unwrap();
        sample_orbit(&p, side, &OrbitOptions::default()).unwrap()
    }

    #[test]
    fn xi2_routes_agree() {
        for side in [Side::Left, Side::Right] {
            let lp = loop_for(side);
            let r = xi2(&lp).unwrap();
            assert!(r.value < 0.0);
            let rel = (r.time_route - r.position_route).abs() / r.position_route.abs();
            assert!(rel < 1e-5, "{side:?}: {r:?}");
        }
    }

    #[test]
    fn xi1_bounds_and_decay() {
        for side in [Side::Left, Side::Right] {
            let lp = loop_for(side);
            let v = xi1(&lp, 1.0).unwrap();
            assert!(v.value.abs() <= 2.0 * (lp.x_turn - lp.x_sa).abs());
            let slow = xi1(&lp, lp.lambda).unwrap().value.abs();
            let fast = xi1(&lp, 100.0 * lp.lambda).unwrap().value.abs();
            assert!(fast < slow / 10.0, "{side:?}: {fast} vs {slow}");
        }
    }

    #[test]
    fn cosine_integral_vanishes() {
        let lp = loop_for(Side::Right);
        let amp = lp.orbit.iter().map(|s| s.x2.abs()).fold(0.0, f64::max);
        for w in [0.3, 1.0, 2.5] {
            assert!(cosine_parity_integral(&lp, w).abs() <= 1e-8 * amp);
        }
    }

    #[test]
    fn formula_cases() {
        assert_eq!(melnikov_at(0.0, 2.0, 1.5, 1.0, 0.3, -0.4), 1.5 * -0.4);
        for t0 in [0.1, 1.0, 5.0] {
            assert_eq!(melnikov_at(t0, 0.0, 1.0, 1.0, 0.3, -0.4), -0.4);
        }
        let b = persistence_threshold(0.290315, -0.382056, 1.0);
        assert!((b - 1.31601).abs() < 1e-4);
        assert!(persists(1.317, b) && !persists(1.315, b));
        assert_eq!(persistence_threshold(0.3, -0.4, 0.0), 0.0);
        assert!(persists(1e-9, 0.0));
        assert_eq!(persistence_threshold(0.0, -0.4, 1.0), f64::INFINITY);
        assert!(!persists(1e300, f64::INFINITY));
    }

    #[test]
    fn zero_structures() {
        let (xi1, xi2) = (0.29, -0.38);
        let b_star = persistence_threshold(xi1, xi2, 1.0);
        assert_eq!(
            zero_structure(0.99 * b_star, 1.0, 1.0, xi1, xi2, 1000),
            ZeroStructure::NoZeros
        );
        assert_eq!(
            zero_structure(b_star, 1.0, 1.0, xi1, xi2, 1000),
            ZeroStructure::Tangency
        );
        assert_eq!(
            zero_structure(1.01 * b_star, 1.0, 1.0, xi1, xi2, 1000),
            ZeroStructure::TwoSimpleZeros
        );
    }

    #[test]
    fn splitting_first_order() {
        let lp = loop_for(Side::Right);
        let s = PhaseState {
            x1: lp.x_turn,
            x2: 0.0,
        };
        assert_eq!(splitting_distance(1e-3, 0.0, &lp, s).unwrap(), 0.0);
        let d1 = splitting_distance(1e-3, 0.02, &lp, s).unwrap();
        let d2 = splitting_distance(2e-3, 0.02, &lp, s).unwrap();
        assert_eq!(d2, 2.0 * d1);
        assert!(d1 > 0.0 && splitting_distance(1e-3, -0.02, &lp, s).unwrap() < 0.0);
        let saddle = PhaseState {
            x1: lp.x_sa,
            x2: 0.0,
        };
        assert!(splitting_distance(1e-3, 0.02, &lp, saddle).is_err());
    }

    #[test]
    fn analysis_threshold_contract() {
        let lp = loop_for(Side::Right);
        let r = analyze(&lp).unwrap();
        assert_eq!(r.threshold_b, 1.0 * (r.xi2 / r.xi1).abs());
        assert!(r.xi2 <= 0.0);
        let json = r.to_json();
        assert!(json.contains("\"threshold_B\":") && json.contains("\"side\":\"right\""));
    }

    #[test]
    fn xi2_independent_of_omega() {
        let lp = loop_for(Side::Left);
        let scans = scan_omega(
            std::slice::from_ref(&lp),
            &[0.5, 1.0, 3.0],
            Execution::Parallel,
        )
        .unwrap();
        assert!(scans
            .iter()
            .all(|r| r.xi2.to_bits() == scans[0].xi2.to_bits()));
        assert!(scan_csv(&scans).starts_with("omega,side,xi1,xi2,threshold_B\n"));
    }
}
