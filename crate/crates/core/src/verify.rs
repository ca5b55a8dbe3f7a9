//! Direct numerical check of the Melnikov prediction.
//!
//! The perturbed system is integrated as is. Its period map at phase `t0`
//! has a hyperbolic fixed point near the saddle; stable and unstable leaves
//! grown from that point are followed to the line normal to the unperturbed
//! loop at a section point, and their signed gap is compared with
//! `eps M / |f|`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::homoclinic::SaddleLoop;
use crate::melnikov::{melnikov_at, splitting_distance, xi1, xi2};
use crate::model::{conservative_field, perturbed_field, Params, PhaseState};
use crate::ode::{interpolate, Integrator, Step};
use crate::output::{fmt17, Csv};
use crate::parallel::Execution;

/// Integrator used by [`simulate`].
pub fn default_integrator() -> Integrator {
    Integrator::with_tolerances(1e-10, 1e-12)
}

/// Tighter integrator for period maps and manifold leaves.
pub fn map_integrator() -> Integrator {
    Integrator::with_tolerances(1e-12, 1e-14)
}

/// Gaps below this are treated as zero.
pub const NOISE_FLOOR: f64 = 1e-9;
/// Offset of the manifold seeds from the fixed point.
pub const SEED_OFFSET: f64 = 1e-7;
const FD_STEP: f64 = 1e-7;
const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 50;

/// Dense trajectory of the perturbed system.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Step>,
    pub tol_used: f64,
}

impl Trajectory {
    /// Hermite-interpolated state inside the integrated time span.
    pub fn at(&self, t: f64) -> Option<PhaseState> {
        interpolate(&self.samples, t).map(|y| PhaseState { x1: y[0], x2: y[1] })
    }

    pub fn last(&self) -> PhaseState {
        let s = self.samples.last().expect("non-empty trajectory");
        PhaseState {
            x1: s.y[0],
            x2: s.y[1],
        }
    }

    /// CSV `t,x1,x2`.
    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["t", "x1", "x2"]);
        for s in &self.samples {
            csv.row(&[fmt17(s.t), fmt17(s.y[0]), fmt17(s.y[1])]);
        }
        csv.into_string()
    }
}

/// Integrates the perturbed system from `(t0, s0)` to `t1 > t0`.
pub fn simulate(p: &Params, s0: PhaseState, t0: f64, t1: f64) -> Result<Trajectory> {
    simulate_with(p, s0, t0, t1, &default_integrator())
}

pub fn simulate_with(
    p: &Params,
    s0: PhaseState,
    t0: f64,
    t1: f64,
    integ: &Integrator,
) -> Result<Trajectory> {
    crate::error::require_positive("x1", s0.x1)?;
    if !(t1 > t0) {
        return Err(Error::InvalidParams(format!(
            "simulate requires t1 > t0 (got {t0}, {t1})"
        )));
    }
    let samples = integ.collect(|t, y| perturbed_field(t, y, p), t0, s0.to_array(), t1)?;
    Ok(Trajectory {
        samples,
        tol_used: integ.rtol,
    })
}

fn flow(p: &Params, y: [f64; 2], t0: f64, t1: f64, integ: &Integrator) -> Result<[f64; 2]> {
    integ.endpoint(|t, y| perturbed_field(t, y, p), t0, y, t1)
}

/// State after one forcing period `2 pi / Omega` starting at time `t0_phase`.
pub fn stroboscopic_map(p: &Params, s: PhaseState, t0_phase: f64) -> Result<PhaseState> {
    crate::error::require_positive("x1", s.x1)?;
    let y = flow(
        p,
        s.to_array(),
        t0_phase,
        t0_phase + p.period(),
        &map_integrator(),
    )?;
    Ok(PhaseState::from_array(y))
}

/// Central finite-difference Jacobian of the period map.
pub fn map_jacobian(p: &Params, s: PhaseState, t0_phase: f64) -> Result<[[f64; 2]; 2]> {
    let mut jac = [[0.0; 2]; 2];
    for j in 0..2 {
        let mut plus = s.to_array();
        let mut minus = s.to_array();
        plus[j] += FD_STEP;
        minus[j] -= FD_STEP;
        let fp = stroboscopic_map(p, PhaseState::from_array(plus), t0_phase)?;
        let fm = stroboscopic_map(p, PhaseState::from_array(minus), t0_phase)?;
        jac[0][j] = (fp.x1 - fm.x1) / (2.0 * FD_STEP);
        jac[1][j] = (fp.x2 - fm.x2) / (2.0 * FD_STEP);
    }
    Ok(jac)
}

/// Eigenvalue and unit eigenvector.
pub type Eigenpair = (f64, [f64; 2]);

/// Real eigenpairs `(mu_large, v_large), (mu_small, v_small)` of a 2x2
/// matrix with unit eigenvectors, or `None` for complex eigenvalues.
pub fn real_eigen(m: &[[f64; 2]; 2]) -> Option<(Eigenpair, Eigenpair)> {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc < 0.0 {
        return None;
    }
    let root = disc.sqrt();
    // Avoid cancellation for the small eigenvalue.
    let big = if tr >= 0.0 {
        0.5 * (tr + root)
    } else {
        0.5 * (tr - root)
    };
    let small = if big != 0.0 {
        det / big
    } else {
        0.5 * (tr - root)
    };
    let (hi, lo) = if big.abs() >= small.abs() {
        (big, small)
    } else {
        (small, big)
    };
    let vec_for = |mu: f64| -> [f64; 2] {
        // (m - mu I) v = 0: use the row with the larger norm.
        let r0 = [m[0][0] - mu, m[0][1]];
        let r1 = [m[1][0], m[1][1] - mu];
        let r = if r0[0].hypot(r0[1]) >= r1[0].hypot(r1[1]) {
            r0
        } else {
            r1
        };
        let v = if r[0] == 0.0 && r[1] == 0.0 {
            [1.0, 0.0]
        } else {
            [-r[1], r[0]]
        };
        let n = v[0].hypot(v[1]);
        [v[0] / n, v[1] / n]
    };
    Some(((hi, vec_for(hi)), (lo, vec_for(lo))))
}

/// Hyperbolic fixed point of the period map at phase `t0_phase`, found by
/// Newton iteration from the unperturbed saddle.
pub fn perturbed_saddle(p: &Params, t0_phase: f64) -> Result<PhaseState> {
    let (x_sa, _) = crate::homoclinic::saddle_energy(p)?;
    let mut z = PhaseState { x1: x_sa, x2: 0.0 };
    let mut residual = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITER {
        let pz = stroboscopic_map(p, z, t0_phase)?;
        let g = [pz.x1 - z.x1, pz.x2 - z.x2];
        residual = g[0].hypot(g[1]);
        if residual <= NEWTON_TOL {
            return Ok(z);
        }
        let mut jac = map_jacobian(p, z, t0_phase)?;
        jac[0][0] -= 1.0;
        jac[1][1] -= 1.0;
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dx = (jac[1][1] * g[0] - jac[0][1] * g[1]) / det;
        let dy = (-jac[1][0] * g[0] + jac[0][0] * g[1]) / det;
        z = PhaseState::new(z.x1 - dx, z.x2 - dy)?;
    }
    Err(Error::NonConvergence {
        what: "perturbed saddle Newton iteration",
        iterations: NEWTON_MAX_ITER,
        residual,
    })
}

/// Outcome of one splitting measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplittingReport {
    pub epsilon: f64,
    pub t0_section: f64,
    /// `(unstable - stable) . n` at the section, `n = (-f2, f1) / |f|`.
    pub measured_distance: f64,
    /// `eps M(t0 - tau) / |f|`.
    pub predicted_distance: f64,
    pub sign_match: bool,
}

fn sign_match(measured: f64, predicted: f64) -> bool {
    let above = |v: f64| v.abs() > NOISE_FLOOR;
    match (above(measured), above(predicted)) {
        (true, true) => measured.signum() == predicted.signum(),
        (false, false) => true,
        _ => false,
    }
}

/// Section geometry at the unperturbed loop point `q`.
#[derive(Debug, Clone, Copy)]
struct Section {
    q: [f64; 2],
    tangent: [f64; 2],
    normal: [f64; 2],
    /// Points farther than this from `q` are ignored.
    radius: f64,
}

impl Section {
    fn coords(&self, y: [f64; 2]) -> (f64, f64, f64) {
        let d = [y[0] - self.q[0], y[1] - self.q[1]];
        (
            d[0] * self.tangent[0] + d[1] * self.tangent[1],
            d[0] * self.normal[0] + d[1] * self.normal[1],
            d[0].hypot(d[1]),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Leaf {
    Unstable,
    Stable,
}

/// Grows one leaf and returns its normal coordinate where it crosses the section.
///
/// Seeds `z + SEED_OFFSET mu^(+-sigma) v` cover one fundamental domain as
/// `sigma` runs over `[0, 1]`; after `n` periods of forward (unstable) or
/// backward (stable) flow they sweep the next stretch of the leaf at time
/// `t0`. The first `n` whose stretch crosses the section near `q` is
/// refined in `sigma` by bisection.
#[allow(clippy::too_many_arguments)]
fn leaf_crossing(
    p: &Params,
    fixed: PhaseState,
    mu: f64,
    dir: [f64; 2],
    leaf: Leaf,
    t0: f64,
    section: &Section,
    max_time: f64,
) -> Result<f64> {
    let integ = map_integrator();
    let period = p.period();
    let growth = match leaf {
        Leaf::Unstable => mu,
        Leaf::Stable => 1.0 / mu,
    };
    let image = |n: usize, sigma: f64| -> Result<[f64; 2]> {
        let scale = SEED_OFFSET * growth.powf(sigma);
        let seed = [fixed.x1 + scale * dir[0], fixed.x2 + scale * dir[1]];
        let start = match leaf {
            Leaf::Unstable => t0 - n as f64 * period,
            Leaf::Stable => t0 + n as f64 * period,
        };
        flow(p, seed, start, t0, &integ)
    };

    const GRID: usize = 24;
    let max_n = ((max_time / period).ceil() as usize).max(1);
    for n in 1..=max_n {
        // Overlap into the next domain so crossings at sigma = 1 are not lost.
        let sigmas: Vec<f64> = (0..=GRID).map(|k| 1.25 * k as f64 / GRID as f64).collect();
        let mut prev: Option<(f64, f64, f64)> = None;
        for &sigma in &sigmas {
            // Leaves that wander off towards the singularity are outside the section anyway.
            let y = match image(n, sigma) {
                Ok(y) => y,
                Err(Error::Singularity { .. }) => {
                    prev = None;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let (tau, _, dist) = section.coords(y);
            if let Some((s_prev, tau_prev, dist_prev)) = prev {
                if tau_prev * tau <= 0.0 && dist_prev.max(dist) < section.radius {
                    let (mut lo, mut hi, mut tau_lo) = (s_prev, sigma, tau_prev);
                    for _ in 0..80 {
                        if hi - lo < 1e-13 {
                            break;
                        }
                        let mid = 0.5 * (lo + hi);
                        let (t_mid, _, _) = section.coords(image(n, mid)?);
                        if t_mid == 0.0 {
                            lo = mid;
                            hi = mid;
                            break;
                        }
                        if t_mid.signum() == tau_lo.signum() {
                            lo = mid;
                            tau_lo = t_mid;
                        } else {
                            hi = mid;
                        }
                    }
                    let (_, normal, _) = section.coords(image(n, 0.5 * (lo + hi))?);
                    return Ok(normal);
                }
            }
            prev = Some((sigma, tau, dist));
        }
    }
    Err(Error::SectionNotReached { limit: max_time })
}

/// Measures the signed manifold gap at the loop point with loop time
/// `section_tau` (0 is the turning point) on the time slice `t0_phase`.
///
/// `p` supplies the perturbation (`eps`, `B`, `C`, `Omega`); its conservative
/// constants must match the loop's.
pub fn measure_splitting(
    p: &Params,
    lp: &SaddleLoop,
    t0_phase: f64,
    section_tau: f64,
) -> Result<SplittingReport> {
    let lpp = lp.params();
    if (p.b1(), p.b2(), p.a()) != (lpp.b1(), lpp.b2(), lpp.a()) {
        return Err(Error::InvalidParams(
            "splitting parameters must share b1, b2, a with the loop".to_string(),
        ));
    }
    let q = lp.state_at(section_tau).ok_or_else(|| {
        Error::InvalidParams(format!(
            "section time {section_tau} outside the sampled loop"
        ))
    })?;
    let f = conservative_field(&q.to_array(), p);
    let norm = f[0].hypot(f[1]);
    let section = Section {
        q: q.to_array(),
        tangent: [f[0] / norm, f[1] / norm],
        normal: [-f[1] / norm, f[0] / norm],
        radius: 0.25 * (lp.x_turn - lp.x_sa).abs(),
    };

    let fixed = perturbed_saddle(p, t0_phase)?;
    let jac = map_jacobian(p, fixed, t0_phase)?;
    let ((mu_u, mut v_u), (mu_s, mut v_s)) = real_eigen(&jac).ok_or(Error::NonConvergence {
        what: "real eigen-decomposition of the period map",
        iterations: 0,
        residual: f64::NAN,
    })?;
    if !(mu_u > 1.0 && mu_s > 0.0 && mu_s < 1.0) {
        return Err(Error::Regime(format!(
            "period-map fixed point is not hyperbolic (multipliers {mu_u}, {mu_s})"
        )));
    }
    // Both branches of the chosen loop lie on the side of its turning point.
    let side = lp.side.sign();
    if v_u[0] * side < 0.0 {
        v_u = [-v_u[0], -v_u[1]];
    }
    if v_s[0] * side < 0.0 {
        v_s = [-v_s[0], -v_s[1]];
    }
    let max_time = 10.0 * lp.t_cut();
    let unstable = leaf_crossing(
        p,
        fixed,
        mu_u,
        v_u,
        Leaf::Unstable,
        t0_phase,
        &section,
        max_time,
    )?;
    let stable = leaf_crossing(
        p,
        fixed,
        mu_s,
        v_s,
        Leaf::Stable,
        t0_phase,
        &section,
        max_time,
    )?;
    let measured = unstable - stable;

    let omega = p.omega();
    let xi1 = xi1(lp, omega)?.value;
    let xi2 = xi2(lp)?.value;
    let m = melnikov_at(
        t0_phase - section_tau,
        p.forcing(),
        p.damping(),
        omega,
        xi1,
        xi2,
    );
    let predicted = splitting_distance(p.epsilon(), m, lp, q)?;
    Ok(SplittingReport {
        epsilon: p.epsilon(),
        t0_section: t0_phase,
        measured_distance: measured,
        predicted_distance: predicted,
        sign_match: sign_match(measured, predicted),
    })
}

/// Splitting at several phases on the turning-point section.
pub fn phase_scan(
    p: &Params,
    lp: &SaddleLoop,
    phases: &[f64],
    exec: Execution,
) -> Result<Vec<SplittingReport>> {
    exec.map(phases, |&t0| measure_splitting(p, lp, t0, 0.0))
        .into_iter()
        .collect()
}

/// `n` equispaced phases over one forcing period.
pub fn equispaced_phases(p: &Params, n: usize) -> Vec<f64> {
    (0..n).map(|k| p.period() * k as f64 / n as f64).collect()
}

/// Splitting at one phase for several perturbation sizes.
pub fn epsilon_scan(
    p: &Params,
    lp: &SaddleLoop,
    epsilons: &[f64],
    t0_phase: f64,
    exec: Execution,
) -> Result<Vec<SplittingReport>> {
    exec.map(epsilons, |&eps| {
        let q = p.with_epsilon(eps)?;
        measure_splitting(&q, lp, t0_phase, 0.0)
    })
    .into_iter()
    .collect()
}

/// Least-squares slope of `log|measured|` against `log eps`.
pub fn scaling_exponent(reports: &[SplittingReport]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = reports
        .iter()
        .filter(|r| r.epsilon > 0.0 && r.measured_distance != 0.0)
        .map(|r| (r.epsilon.ln(), r.measured_distance.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}

/// CSV `epsilon,t0_phase,measured,predicted,sign_match`.
pub fn splitting_csv(reports: &[SplittingReport]) -> String {
    let mut csv = Csv::new(&["epsilon", "t0_phase", "measured", "predicted", "sign_match"]);
    for r in reports {
        csv.row(&[
            fmt17(r.epsilon),
            fmt17(r.t0_section),
            fmt17(r.measured_distance),
            fmt17(r.predicted_distance),
            r.sign_match.to_string(),
        ]);
    }
    csv.into_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::energy_unchecked;

    fn reference() -> Params {
        Params::new(0.1, 1.0, 1.89).unwrap()
    }

    #[test]
    fn equilibrium_stays_put() {
        let p = reference();
        let (x_sa, _) = crate::homoclinic::saddle_energy(&p).unwrap();
        let roots = crate::equilibria::equilibrium_abscissas(&p);
        let tr = simulate(
            &p,
            PhaseState {
                x1: roots[0],
                x2: 0.0,
            },
            0.0,
            10.0,
        )
        .unwrap();
        let end = tr.last();
        assert!((end.x1 - roots[0]).abs() < 1e-12 && end.x2.abs() < 1e-12);
        let s = stroboscopic_map(&p, PhaseState { x1: x_sa, x2: 0.0 }, 0.3).unwrap();
        assert!((s.x1 - x_sa).abs() < 1e-9 && s.x2.abs() < 1e-9);
    }

    #[test]
    fn energy_conserved_without_perturbation() {
        let p = reference();
        let s0 = PhaseState { x1: 1.2, x2: 0.05 };
        let e0 = energy_unchecked(s0.x1, s0.x2, &p);
        let tr = simulate(&p, s0, 0.0, 100.0).unwrap();
        for s in &tr.samples {
            let e = energy_unchecked(s.y[0], s.y[1], &p);
            assert!(((e - e0) / e0).abs() < 1e-8);
        }
    }

    #[test]
    fn map_composes() {
        let p = reference()
            .with_forcing(0.3, 1.0)
            .unwrap()
            .with_damping(1.0)
            .unwrap()
            .with_epsilon(0.01)
            .unwrap();
        let s = PhaseState { x1: 1.3, x2: 0.01 };
        let twice =
            stroboscopic_map(&p, stroboscopic_map(&p, s, 0.7).unwrap(), 0.7 + p.period()).unwrap();
        let direct = flow(
            &p,
            s.to_array(),
            0.7,
            0.7 + 2.0 * p.period(),
            &map_integrator(),
        )
        .unwrap();
        assert!((twice.x1 - direct[0]).abs() < 1e-8 && (twice.x2 - direct[1]).abs() < 1e-8);
    }

    #[test]
    fn eigen_of_diagonal() {
        let ((hi, vh), (lo, vl)) = real_eigen(&[[3.0, 0.0], [0.0, 0.5]]).unwrap();
        assert_eq!((hi, lo), (3.0, 0.5));
        assert!((vh[0].abs() - 1.0).abs() < 1e-15 && (vl[1].abs() - 1.0).abs() < 1e-15);
        assert!(real_eigen(&[[0.0, -1.0], [1.0, 0.0]]).is_none());
    }

    #[test]
    fn unperturbed_fixed_point_is_saddle() {
        let p = reference();
        let z = perturbed_saddle(&p, 0.0).unwrap();
        let (x_sa, _) = crate::homoclinic::saddle_energy(&p).unwrap();
        assert!((z.x1 - x_sa).abs() < 1e-10 && z.x2.abs() < 1e-10);
    }

    #[test]
    fn sign_rules() {
        assert!(sign_match(1e-6, 2e-6));
        assert!(!sign_match(-1e-6, 2e-6));
        assert!(sign_match(1e-12, -1e-12));
        assert!(!sign_match(1e-12, 1e-6));
    }

    #[test]
    fn rejects_bad_simulation_span() {
        let p = reference();
        assert!(simulate(&p, PhaseState { x1: 1.0, x2: 0.0 }, 1.0, 1.0).is_err());
        assert!(simulate(&p, PhaseState { x1: -1.0, x2: 0.0 }, 0.0, 1.0).is_err());
    }

    #[test]
    fn splitting_matches_prediction_and_scales_linearly() {
        let base = reference()
            .with_damping(1.0)
            .unwrap()
            .with_forcing(0.5, 1.0)
            .unwrap();
        let lp = crate::homoclinic::sample_orbit(
            &base,
            crate::homoclinic::Side::Right,
            &Default::default(),
        )
        .unwrap();
        let reports =
            epsilon_scan(&base, &lp, &[1e-5, 1e-4, 1e-3], 1.0, Execution::Sequential).unwrap();
        for r in &reports {
            assert!(r.sign_match, "{r:?}");
            let gap = (r.measured_distance - r.predicted_distance).abs();
            assert!(gap < 0.05 * r.predicted_distance.abs() + 1e-9, "{r:?}");
        }
        let slope = scaling_exponent(&reports).unwrap();
        assert!((slope - 1.0).abs() < 0.05, "{slope}");
        let csv = splitting_csv(&reports);
        assert!(csv.starts_with("epsilon,t0_phase,measured,predicted,sign_match\n"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn unperturbed_leaves_coincide() {
        let base = reference()
            .with_damping(1.0)
            .unwrap()
            .with_forcing(0.5, 1.0)
            .unwrap();
        let lp = crate::homoclinic::sample_orbit(
            &base,
            crate::homoclinic::Side::Left,
            &Default::default(),
        )
        .unwrap();
        let r = measure_splitting(&base, &lp, 0.4, 0.0).unwrap();
        assert!(
            r.measured_distance.abs() < NOISE_FLOOR && r.sign_match,
            "{r:?}"
        );
    }
}
