//! Saddle-node (fold) structure of the equilibria in the offset `a`.
//!
//! With `F(x, a) = m(x) + a`, the folds sit at the critical points of `m`:
//! `a_i = -m(x_i)`. Transversality needs `F_xx = m''(x_i) != 0` and
//! `F_a = 1 != 0`.

use serde::Serialize;

use crate::equilibria::{classify, critical_points_of_m, equilibrium_abscissas, EquilibriumKind};
use crate::error::{require_positive, Error, Result};
use crate::model::{m_second_unchecked, m_unchecked, Params, Regime};
use crate::output::{fmt17, Csv};
use crate::parallel::Execution;

pub use crate::model::Regime as ForceRegime;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaddleNodePoint {
    /// Critical abscissa `x_l` or `x_r`.
    pub x: f64,
    /// Fold value `a_i = -m(x_i)`.
    pub a_crit: f64,
    /// `d^2F/dx^2` at the fold.
    pub d2f: f64,
    /// `dF/da`, identically one.
    pub daf: f64,
}

/// Regime of the force for `(b1, b2)`.
pub fn regime(b1: f64, b2: f64) -> Result<Regime> {
    require_positive("b1", b1)?;
    require_positive("b2", b2)?;
    Ok(Regime::of(b1, b2))
}

/// Returns `(m''(x), 1)`.
pub fn check_transversality(x: f64, p: &Params) -> Result<(f64, f64)> {
    require_positive("x", x)?;
    Ok((m_second_unchecked(x, p), 1.0))
}

/// The two folds `[(x_l, a_l), (x_r, a_r)]` when `b1 < b1*`, empty otherwise.
pub fn saddle_node_points(p: &Params) -> Vec<SaddleNodePoint> {
    let Some((x_l, x_r)) = critical_points_of_m(p).pair() else {
        return Vec::new();
    };
    [x_l, x_r]
        .into_iter()
        .map(|x| {
            let (d2f, daf) = check_transversality(x, p).expect("positive abscissa");
            SaddleNodePoint {
                x,
                a_crit: -m_unchecked(x, p),
                d2f,
                daf,
            }
        })
        .collect()
}

/// Open window of `a` with three equilibria, `(a_r, a_l)`.
pub fn bistable_window(p: &Params) -> Option<(f64, f64)> {
    let pts = saddle_node_points(p);
    match pts.as_slice() {
        [l, r] => Some((r.a_crit, l.a_crit)),
        _ => None,
    }
}

/// Branch stability in the diagram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    /// Center branch.
    Stable,
    /// Saddle branch.
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagramPoint {
    pub a: f64,
    pub x: f64,
    pub kind: EquilibriumKind,
    pub m_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagramBranch {
    pub id: usize,
    pub stability: Stability,
    pub samples: Vec<DiagramPoint>,
}

/// Equilibria at `n` uniformly spaced offsets in `[a_min, a_max]`, grouped
/// into branches by nearest-neighbour continuation in `x`.
///
/// A point extends a branch of the same kind from the previous column when
/// the jump is below the larger of five median steps and the square-root
/// scale `2 sqrt(2 da / |m''|)` expected next to a fold. When there are no
/// folds the implicit-function step `5 da / |m'|` is also accepted, which
/// covers the steep part of a nearly critical force.
pub fn sweep_a(
    p: &Params,
    a_min: f64,
    a_max: f64,
    n: usize,
    exec: Execution,
) -> Result<Vec<DiagramBranch>> {
    if !(a_min > 0.0 && a_max > a_min && a_max.is_finite()) || n < 2 {
        return Err(Error::InvalidParams(format!(
            "sweep requires 0 < a_min < a_max and n >= 2 (got a_min = {a_min}, a_max = {a_max}, n = {n})"
        )));
    }
    let a_values: Vec<f64> = (0..n)
        .map(|i| a_min + (a_max - a_min) * i as f64 / (n - 1) as f64)
        .collect();
    let columns: Vec<Vec<DiagramPoint>> = exec.map(&a_values, |&a| {
        let q = p.with_a(a).expect("a > 0");
        equilibrium_abscissas(&q)
            .into_iter()
            .filter_map(|x| classify(x, &q, crate::equilibria::DEFAULT_TOL).ok())
            .map(|e| DiagramPoint {
                a,
                x: e.x,
                kind: e.kind,
                m_prime: e.m_prime,
            })
            .collect()
    });

    let da = (a_max - a_min) / (n - 1) as f64;
    let folds = saddle_node_points(p);
    let fold_scale = folds
        .iter()
        .map(|s| 2.0 * (2.0 * da / s.d2f.abs()).sqrt())
        .fold(0.0, f64::max);

    // First pass: unconstrained same-kind nearest distances to size the threshold.
    let mut steps = Vec::new();
    for w in columns.windows(2) {
        for q in &w[1] {
            if let Some(d) = w[0]
                .iter()
                .filter(|prev| same_family(prev.kind, q.kind))
                .map(|prev| (prev.x - q.x).abs())
                .min_by(f64::total_cmp)
            {
                steps.push(d);
            }
        }
    }
    let median = if steps.is_empty() {
        0.0
    } else {
        steps.sort_by(f64::total_cmp);
        steps[steps.len() / 2]
    };
    let base_threshold = (5.0 * median).max(fold_scale);
    // Without folds, allow the local predictor step |dx/da| da = da / |m'|.
    let threshold_for = |tail: &DiagramPoint| {
        if folds.is_empty() {
            base_threshold.max(5.0 * da / tail.m_prime.abs())
        } else {
            base_threshold
        }
    };

    let mut branches: Vec<DiagramBranch> = Vec::new();
    // Indices of branches alive in the previous column.
    let mut alive: Vec<usize> = Vec::new();
    for column in &columns {
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (qi, q) in column.iter().enumerate() {
            for &bi in &alive {
                let tail = branches[bi].samples.last().expect("non-empty branch");
                if same_family(tail.kind, q.kind) {
                    let d = (tail.x - q.x).abs();
                    if d <= threshold_for(tail) {
                        candidates.push((d, qi, bi));
                    }
                }
            }
        }
        candidates.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut point_branch: Vec<Option<usize>> = vec![None; column.len()];
        let mut used = vec![false; branches.len()];
        for (_, qi, bi) in candidates {
            if point_branch[qi].is_none() && !used[bi] {
                point_branch[qi] = Some(bi);
                used[bi] = true;
            }
        }
        let mut next_alive = Vec::new();
        for (qi, q) in column.iter().enumerate() {
            let bi = match point_branch[qi] {
                Some(bi) => bi,
                None => {
                    branches.push(DiagramBranch {
                        id: branches.len(),
                        stability: stability_of(q.kind),
                        samples: Vec::new(),
                    });
                    branches.len() - 1
                }
            };
            branches[bi].samples.push(*q);
            next_alive.push(bi);
        }
        alive = next_alive;
    }
    Ok(branches)
}

fn stability_of(kind: EquilibriumKind) -> Stability {
    match kind {
        EquilibriumKind::Saddle => Stability::Unstable,
        _ => Stability::Stable,
    }
}

// Degenerate points terminate branches: they are only matched with themselves.
fn same_family(a: EquilibriumKind, b: EquilibriumKind) -> bool {
    a == b
}

/// CSV `branch_id,a,x,kind,m_prime`, rows ordered by branch then `a`.
pub fn diagram_csv(branches: &[DiagramBranch]) -> String {
    let mut csv = Csv::new(&["branch_id", "a", "x", "kind", "m_prime"]);
    for b in branches {
        for s in &b.samples {
            csv.row(&[
                b.id.to_string(),
                fmt17(s.a),
                fmt17(s.x),
                s.kind.name().to_string(),
                fmt17(s.m_prime),
            ]);
        }
    }
    csv.into_string()
}

/// Samples of the boundary curve `b1 = b1*(b2)` separating the regimes.
pub fn regime_curve(b2_min: f64, b2_max: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    require_positive("b2_min", b2_min)?;
    if !(b2_max > b2_min) || n < 2 {
        return Err(Error::InvalidParams(format!(
            "regime curve requires b2_min < b2_max and n >= 2 (got {b2_min}, {b2_max}, {n})"
        )));
    }
    Ok((0..n)
        .map(|i| {
            let b2 = b2_min + (b2_max - b2_min) * i as f64 / (n - 1) as f64;
            (b2, (4.0 / 27.0) * b2 * b2 * b2)
        })
        .collect())
}
