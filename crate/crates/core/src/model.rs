//! Shifted AFM oscillator `x'' = m(x) + a + eps (B cos(Omega t) - C x' / x^3)`.
//!
//! The shift `x = y + a` moves the tip-sample singularity to `x = 0`. The
//! conservative part is the planar Hamiltonian field `(x2, m(x1) + a)` with
//! energy [`energy`]; the perturbation is squeeze-film damping plus harmonic
//! forcing.
//!
//! Every function rejects `x <= 0` instead of returning infinities.

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};

/// Relative tolerance under which `b1` is treated as equal to `b1*`.
pub const CRITICAL_REL_TOL: f64 = 1e-12;

/// Shape of the total force `m` for a given `(b1, b2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `b1 > b1*`: `m` strictly decreasing, one equilibrium for every `a`.
    Monotone,
    /// `b1 = b1*`: `m` non-increasing with an inflection at `x_c`.
    Critical,
    /// `b1 < b1*`: `m` has a local minimum and maximum, up to three equilibria.
    Bistable,
}

impl Regime {
    pub fn of(b1: f64, b2: f64) -> Regime {
        let crit = (4.0 / 27.0) * b2 * b2 * b2;
        if (b1 - crit).abs() <= CRITICAL_REL_TOL * crit {
            Regime::Critical
        } else if b1 > crit {
            Regime::Monotone
        } else {
            Regime::Bistable
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::Monotone => "monotone",
            Regime::Critical => "critical",
            Regime::Bistable => "bistable",
        }
    }
}

/// Validated model constants.
///
/// Construct with [`Params::new`] and refine with the `with_*` methods; every
/// constructor re-validates. The critical repulsion `b1*` and the [`Regime`]
/// are computed once and cached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Params {
    b1: f64,
    b2: f64,
    a: f64,
    damping: f64,
    forcing: f64,
    omega: f64,
    epsilon: f64,
    #[serde(skip)]
    b1_crit: f64,
    #[serde(skip)]
    regime: Regime,
}

impl Params {
    /// Conservative parameter set with `C = B = eps = 0` and `Omega = 1`.
    pub fn new(b1: f64, b2: f64, a: f64) -> Result<Params> {
        require_positive("b1", b1)?;
        require_positive("b2", b2)?;
        require_positive("a", a)?;
        let b1_crit = critical_b1(b2)?;
        Ok(Params {
            b1,
            b2,
            a,
            damping: 0.0,
            forcing: 0.0,
            omega: 1.0,
            epsilon: 0.0,
            b1_crit,
            regime: Regime::of(b1, b2),
        })
    }

    pub fn with_damping(mut self, c: f64) -> Result<Params> {
        require_nonnegative("C", c)?;
        self.damping = c;
        Ok(self)
    }

    pub fn with_forcing(mut self, amplitude: f64, omega: f64) -> Result<Params> {
        require_nonnegative("B", amplitude)?;
        require_positive("Omega", omega)?;
        self.forcing = amplitude;
        self.omega = omega;
        Ok(self)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Params> {
        require_nonnegative("epsilon", epsilon)?;
        self.epsilon = epsilon;
        Ok(self)
    }

    /// Same constants with a different offset `a`.
    pub fn with_a(self, a: f64) -> Result<Params> {
        require_positive("a", a)?;
        Ok(Params { a, ..self })
    }

    pub fn b1(&self) -> f64 {
        self.b1
    }
    pub fn b2(&self) -> f64 {
        self.b2
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    /// Damping coefficient `C`.
    pub fn damping(&self) -> f64 {
        self.damping
    }
    /// Forcing amplitude `B`.
    pub fn forcing(&self) -> f64 {
        self.forcing
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    /// Cached `b1* = (4/27) b2^3`.
    pub fn b1_crit(&self) -> f64 {
        self.b1_crit
    }
    pub fn regime(&self) -> Regime {
        self.regime
    }
    /// Forcing period `2 pi / Omega`.
    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.omega
    }
}

fn require_nonnegative(what: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            requirement: "0 <= value < inf",
            value,
        })
    }
}

/// A point `(x1, x2)` of the shifted phase plane, `x1 > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub x1: f64,
    pub x2: f64,
}

impl PhaseState {
    pub fn new(x1: f64, x2: f64) -> Result<PhaseState> {
        require_positive("x1", x1)?;
        if !x2.is_finite() {
            return Err(Error::Domain {
                what: "x2",
                requirement: "finite",
                value: x2,
            });
        }
        Ok(PhaseState { x1, x2 })
    }

    pub(crate) fn from_array(y: [f64; 2]) -> PhaseState {
        PhaseState { x1: y[0], x2: y[1] }
    }

    pub(crate) fn to_array(self) -> [f64; 2] {
        [self.x1, self.x2]
    }
}

/// Total force `m(x) = b1/x^8 - x - b2/x^2`.
pub fn eval_m(x: f64, p: &Params) -> Result<f64> {
    require_positive("x", x)?;
    Ok(m_unchecked(x, p))
}

/// `m'(x) = -8 b1/x^9 - 1 + 2 b2/x^3`.
pub fn eval_m_prime(x: f64, p: &Params) -> Result<f64> {
    require_positive("x", x)?;
    Ok(m_prime_unchecked(x, p))
}

/// `m''(x) = 72 b1/x^10 - 6 b2/x^4`.
pub fn eval_m_second(x: f64, p: &Params) -> Result<f64> {
    require_positive("x", x)?;
    Ok(m_second_unchecked(x, p))
}

#[inline]
pub(crate) fn m_unchecked(x: f64, p: &Params) -> f64 {
    let x2 = x * x;
    let x8 = x2 * x2 * x2 * x2;
    p.b1 / x8 - x - p.b2 / x2
}

#[inline]
pub(crate) fn m_prime_unchecked(x: f64, p: &Params) -> f64 {
    let x3 = x * x * x;
    let x9 = x3 * x3 * x3;
    -8.0 * p.b1 / x9 - 1.0 + 2.0 * p.b2 / x3
}

#[inline]
pub(crate) fn m_second_unchecked(x: f64, p: &Params) -> f64 {
    let x2 = x * x;
    let x4 = x2 * x2;
    72.0 * p.b1 / (x4 * x4 * x2) - 6.0 * p.b2 / x4
}

/// Critical repulsion `b1* = (4/27) b2^3` separating monotone and bistable force.
pub fn critical_b1(b2: f64) -> Result<f64> {
    require_positive("b2", b2)?;
    Ok((4.0 / 27.0) * b2 * b2 * b2)
}

/// Inflection abscissa `x_c = (4 b2 / 3)^(1/3)` of `m` at `b1 = b1*`.
pub fn inflection_x(b2: f64) -> Result<f64> {
    require_positive("b2", b2)?;
    Ok((4.0 * b2 / 3.0).cbrt())
}

/// `E(x1, x2) = x2^2/2 + x1^2/2 + b1/(7 x1^7) - b2/x1 - a x1`.
pub fn energy(s: PhaseState, p: &Params) -> Result<f64> {
    require_positive("x1", s.x1)?;
    Ok(energy_unchecked(s.x1, s.x2, p))
}

#[inline]
pub(crate) fn energy_unchecked(x1: f64, x2: f64, p: &Params) -> f64 {
    let x7 = x1.powi(7);
    0.5 * x2 * x2 + 0.5 * x1 * x1 + p.b1 / (7.0 * x7) - p.b2 / x1 - p.a * x1
}

/// Conservative field `f` or perturbed field `f + eps g` at time `t`.
pub fn vector_field(s: PhaseState, t: f64, p: &Params, perturbed: bool) -> Result<(f64, f64)> {
    require_positive("x1", s.x1)?;
    let [d1, d2] = if perturbed {
        perturbed_field(t, &s.to_array(), p)
    } else {
        conservative_field(&s.to_array(), p)
    };
    Ok((d1, d2))
}

#[inline]
pub(crate) fn conservative_field(y: &[f64; 2], p: &Params) -> [f64; 2] {
    [y[1], m_unchecked(y[0], p) + p.a]
}

#[inline]
pub(crate) fn perturbed_field(t: f64, y: &[f64; 2], p: &Params) -> [f64; 2] {
    let [d1, d2] = conservative_field(y, p);
    if p.epsilon == 0.0 {
        return [d1, d2];
    }
    let x3 = y[0] * y[0] * y[0];
    let g2 = p.forcing * (p.omega * t).cos() - p.damping * y[1] / x3;
    [d1, d2 + p.epsilon * g2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(b1: f64, b2: f64, a: f64) -> Params {
        Params::new(b1, b2, a).unwrap()
    }

    #[test]
    fn m_values() {
        assert_eq!(eval_m(1.0, &params(2.0, 1.0, 1.0)).unwrap(), 0.0);
        assert_relative_eq!(
            eval_m(1.0, &params(0.1, 1.0, 1.0)).unwrap(),
            -1.9,
            epsilon = 1e-15
        );
    }

    #[test]
    fn m_prime_direct() {
        let v = eval_m_prime(0.5, &params(0.1, 1.0, 1.0)).unwrap();
        assert_relative_eq!(v, -394.6, max_relative = 1e-14);
    }

    #[test]
    fn inflection_point_is_degenerate() {
        let b2 = 1.0;
        let p = params(critical_b1(b2).unwrap(), b2, 1.0);
        let xc = inflection_x(b2).unwrap();
        assert!(eval_m_prime(xc, &p).unwrap().abs() < 1e-14);
        assert!(eval_m_second(xc, &p).unwrap().abs() < 1e-13);
    }

    #[test]
    fn critical_values() {
        assert_eq!(critical_b1(3.0).unwrap(), 4.0);
        assert_relative_eq!(critical_b1(1.0).unwrap(), 4.0 / 27.0, epsilon = 1e-15);
        assert_eq!(inflection_x(0.75).unwrap(), 1.0);
        assert_relative_eq!(
            inflection_x(1.0).unwrap(),
            1.100642416298209,
            epsilon = 1e-12
        );
    }

    #[test]
    fn energy_direct() {
        let p = params(0.1, 1.0, 1.89);
        let e = energy(PhaseState::new(1.0, 0.0).unwrap(), &p).unwrap();
        assert_relative_eq!(e, 0.5 + 0.1 / 7.0 - 1.0 - 1.89, epsilon = 1e-15);
        assert_relative_eq!(e, -2.375714285714286, epsilon = 1e-12);
        let up = energy(PhaseState { x1: 1.3, x2: 0.4 }, &p).unwrap();
        let down = energy(PhaseState { x1: 1.3, x2: -0.4 }, &p).unwrap();
        assert_eq!(up, down);
    }

    #[test]
    fn field_values() {
        let p = params(0.1, 1.0, 1.89)
            .with_damping(1.0)
            .unwrap()
            .with_forcing(2.0, 1.0)
            .unwrap()
            .with_epsilon(1.0)
            .unwrap();
        let s = PhaseState::new(1.0, 1.0).unwrap();
        let (_, d2) = vector_field(s, 0.0, &p, true).unwrap();
        let m1 = eval_m(1.0, &p).unwrap();
        assert_relative_eq!(d2, m1 + 1.89 + 1.0, epsilon = 1e-14);
        let (c1, c2) = vector_field(s, 0.0, &p, false).unwrap();
        assert_eq!((c1, c2), (1.0, m1 + 1.89));
    }

    #[test]
    fn rejects_nonpositive_x() {
        let p = params(0.1, 1.0, 1.0);
        assert!(matches!(eval_m(0.0, &p), Err(Error::Domain { .. })));
        assert!(eval_m_prime(-1.0, &p).is_err());
        assert!(eval_m_second(0.0, &p).is_err());
        assert!(energy(PhaseState { x1: 0.0, x2: 1.0 }, &p).is_err());
        assert!(vector_field(PhaseState { x1: -0.1, x2: 0.0 }, 0.0, &p, false).is_err());
        assert!(PhaseState::new(0.0, 0.0).is_err());
        assert!(critical_b1(0.0).is_err());
        assert!(inflection_x(-2.0).is_err());
    }

    #[test]
    fn rejects_bad_params() {
        assert!(Params::new(0.0, 1.0, 1.0).is_err());
        assert!(Params::new(1.0, -1.0, 1.0).is_err());
        assert!(Params::new(1.0, 1.0, 0.0).is_err());
        let p = params(0.1, 1.0, 1.0);
        assert!(p.with_damping(-1.0).is_err());
        assert!(p.with_forcing(1.0, 0.0).is_err());
        assert!(p.with_epsilon(f64::NAN).is_err());
    }

    #[test]
    fn regime_tags() {
        assert_eq!(Regime::of(4.0, 3.0), Regime::Critical);
        assert_eq!(Regime::of(0.2, 1.0), Regime::Monotone);
        assert_eq!(Regime::of(0.1, 1.0), Regime::Bistable);
        assert_eq!(
            params(0.0113876, 0.148148, 1.07468).regime(),
            Regime::Monotone
        );
    }
}
