//! Equilibria of the conservative system: positive roots of `F(x) = m(x) + a`.
//!
//! Multiplying `m(x) + a = 0` by `x^8` gives the degree-9 polynomial
//! `x^9 - a x^8 + b2 x^6 - b1 = 0`, so there are finitely many roots. We do
//! not work with the polynomial (it overflows for large `x`); instead `F` is
//! bracketed directly on a log-spaced grid whose nodes include the critical
//! points of `m`, so each monotone piece of `F` holds at most one root.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    inflection_x, m_prime_unchecked, m_second_unchecked, m_unchecked, Params, Regime,
};
use crate::roots::{bisect, newton_polish};

/// Number of log-spaced bracketing nodes.
pub const GRID_POINTS: usize = 2048;
/// Default relative tolerance for degeneracy tests.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Root residual bound, scaled by `max(1, a)`.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    /// Local minimum of the energy: nonlinear center.
    Center,
    /// Local maximum of the energy along `x`.
    Saddle,
    /// Fold point coinciding with an equilibrium.
    Cusp,
    /// Triple root at `b1 = b1*`, still a nonlinear center.
    DegenerateCenter,
}

impl EquilibriumKind {
    pub fn name(self) -> &'static str {
        match self {
            EquilibriumKind::Center => "center",
            EquilibriumKind::Saddle => "saddle",
            EquilibriumKind::Cusp => "cusp",
            EquilibriumKind::DegenerateCenter => "degenerate_center",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Equilibrium {
    pub x: f64,
    pub kind: EquilibriumKind,
    pub m_prime: f64,
    /// Achieved `|m(x) + a|`.
    pub residual: f64,
}

impl Equilibrium {
    /// `{"x", "kind", "m_prime", "residual"}`.
    pub fn to_json(&self) -> String {
        crate::output::JsonObject::new()
            .num("x", self.x)
            .string("kind", self.kind.name())
            .num("m_prime", self.m_prime)
            .num("residual", self.residual)
            .render()
    }
}

/// Critical points of `m` on `x > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalPoints {
    /// `b1 > b1*`: `m` is strictly decreasing.
    None,
    /// `b1 = b1*`: the minimum and maximum have merged into the inflection
    /// point `x_c`, a degenerate double root of `m'`.
    Tangency { x_c: f64 },
    /// `b1 < b1*`: local minimum at `x_l`, local maximum at `x_r`.
    Pair { x_l: f64, x_r: f64 },
}

impl CriticalPoints {
    pub fn pair(&self) -> Option<(f64, f64)> {
        match *self {
            CriticalPoints::Pair { x_l, x_r } => Some((x_l, x_r)),
            _ => None,
        }
    }
}

/// Critical points of `m`, i.e. the positive roots of `x^9 - 2 b2 x^6 + 8 b1`.
pub fn critical_points_of_m(p: &Params) -> CriticalPoints {
    match p.regime() {
        Regime::Monotone => CriticalPoints::None,
        Regime::Critical => CriticalPoints::Tangency {
            x_c: inflection_x(p.b2()).expect("b2 validated"),
        },
        Regime::Bistable => {
            // m' peaks where m'' = 0, i.e. x^6 = 12 b1 / b2.
            let x_peak = (12.0 * p.b1() / p.b2()).powf(1.0 / 6.0);
            let mp = |x: f64| m_prime_unchecked(x, p);
            if mp(x_peak) <= 0.0 {
                // b1 is below b1* by less than the rounding of m'.
                return CriticalPoints::Tangency { x_c: x_peak };
            }
            let mut lo = 0.5 * x_peak;
            while mp(lo) >= 0.0 {
                lo *= 0.5;
            }
            let mut hi = 2.0 * x_peak;
            while mp(hi) >= 0.0 {
                hi *= 2.0;
            }
            let ms = |x: f64| m_second_unchecked(x, p);
            let refine = |a: f64, b: f64| -> f64 {
                let xtol = 1e-15 * b;
                let r = bisect(mp, a, b, xtol).expect("sign change established");
                newton_polish(mp, ms, r, a, b)
            };
            CriticalPoints::Pair {
                x_l: refine(lo, x_peak),
                x_r: refine(x_peak, hi),
            }
        }
    }
}

/// Search interval guaranteed to contain every root: `F > 0` below `lo` and
/// `F < 0` above `hi`.
pub(crate) fn search_bounds(p: &Params) -> (f64, f64) {
    let (b1, b2, a) = (p.b1(), p.b2(), p.a());
    // x^9 + b2 x^6 <= b1 implies m(x) + a >= a > 0.
    let small = (b1 / (2.0 * b2))
        .powf(1.0 / 6.0)
        .min((0.5 * b1).powf(1.0 / 9.0));
    let lo = 1e-3_f64.min(0.5 * small);
    // x >= a + 1 with x^8 >= b1 implies m(x) + a < 0.
    let hi = 1e3_f64.max(2.0 * (a + 1.0).max(b1.powf(1.0 / 8.0)));
    (lo, hi)
}

/// Ascending positive roots of `m(x) + a`.
pub fn equilibrium_abscissas(p: &Params) -> Vec<f64> {
    let f = |x: f64| m_unchecked(x, p) + p.a();
    let df = |x: f64| m_prime_unchecked(x, p);
    let touch_tol = RESIDUAL_TOL * p.a().max(1.0);

    let (lo, hi) = search_bounds(p);
    let (llo, lhi) = (lo.ln(), hi.ln());
    let mut nodes: Vec<f64> = (0..GRID_POINTS)
        .map(|i| (llo + (lhi - llo) * i as f64 / (GRID_POINTS - 1) as f64).exp())
        .collect();
    let mut special = Vec::new();
    match critical_points_of_m(p) {
        CriticalPoints::None => {}
        CriticalPoints::Tangency { x_c } => special.push(x_c),
        CriticalPoints::Pair { x_l, x_r } => special.extend([x_l, x_r]),
    }
    nodes.extend(special.iter().copied());
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();

    // Critical points touching zero are double roots; pin their value to 0.
    let values: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let v = f(x);
            if special.contains(&x) && v.abs() <= touch_tol {
                0.0
            } else {
                v
            }
        })
        .collect();

    let mut roots = Vec::new();
    for i in 0..nodes.len() {
        if values[i] == 0.0 {
            roots.push(nodes[i]);
            continue;
        }
        if i + 1 < nodes.len() && values[i] * values[i + 1] < 0.0 {
            let (a, b) = (nodes[i], nodes[i + 1]);
            let r = bisect(f, a, b, 1e-13).expect("bracketed");
            let polished = newton_polish(f, df, r, a, b);
            roots.push(polished);
        }
    }
    roots
}

/// Every equilibrium, classified with [`DEFAULT_TOL`].
pub fn find_equilibria(p: &Params) -> Vec<Equilibrium> {
    equilibrium_abscissas(p)
        .into_iter()
        .map(|x| classify(x, p, DEFAULT_TOL).expect("root produced by the bracketing search"))
        .collect()
}

/// Classification of a single equilibrium.
///
/// Since `d^2E/dx^2 = -m'`, a negative `m'` is an energy minimum (center)
/// and a positive one an energy maximum (saddle). When `|m'| <= tol` the
/// point is degenerate: a degenerate center on the `b1 = b1*` boundary, a
/// cusp when `a` sits on one of the fold values `-m(x_l)`, `-m(x_r)`.
pub fn classify(x_eq: f64, p: &Params, tol: f64) -> Result<Equilibrium> {
    crate::error::require_positive("x", x_eq)?;
    let scale = p.a().max(1.0);
    let residual = (m_unchecked(x_eq, p) + p.a()).abs();
    if residual > tol.max(RESIDUAL_TOL) * scale {
        return Err(Error::NotARoot { x: x_eq, residual });
    }
    let m_prime = m_prime_unchecked(x_eq, p);
    let kind = if m_prime < -tol {
        EquilibriumKind::Center
    } else if m_prime > tol {
        EquilibriumKind::Saddle
    } else if (p.b1() - p.b1_crit()).abs() <= tol * p.b1_crit() {
        EquilibriumKind::DegenerateCenter
    } else if let Some((x_l, x_r)) = critical_points_of_m(p).pair() {
        let at_fold = |x: f64| (p.a() + m_unchecked(x, p)).abs() <= tol * scale;
        if at_fold(x_l) || at_fold(x_r) {
            EquilibriumKind::Cusp
        } else {
            return Err(Error::InconsistentDegeneracy { x: x_eq, m_prime });
        }
    } else {
        return Err(Error::InconsistentDegeneracy { x: x_eq, m_prime });
    };
    Ok(Equilibrium {
        x: x_eq,
        kind,
        m_prime,
        residual,
    })
}
