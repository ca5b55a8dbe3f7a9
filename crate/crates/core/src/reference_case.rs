//! Cantilever example parameter set and its consistency check.
//!
//! The adimensional cantilever constants lie beyond the
//! critical repulsion, so the conservative system has a single equilibrium
//! and no loop. The target Melnikov magnitudes cannot come from these
//! constants; only the threshold they imply is reproducible as arithmetic.

use crate::equilibria::find_equilibria;
use crate::melnikov::persistence_threshold;
use crate::model::{Params, Regime};
use crate::output::JsonObject;
use crate::Result;

pub const B1: f64 = 0.0113876;
pub const B2: f64 = 0.148148;
pub const A: f64 = 1.07468;
pub const C: f64 = 1.0;
pub const OMEGA: f64 = 1.0;
/// Target `|xi1|`.
pub const XI1_ABS: f64 = 0.290315;
/// Target `xi2`.
pub const XI2: f64 = -0.382056;
/// Target persistence threshold.
pub const THRESHOLD: f64 = 1.31601;

pub fn params() -> Result<Params> {
    Params::new(B1, B2, A)?
        .with_damping(C)?
        .with_forcing(0.0, OMEGA)
}

/// Threshold implied by the target `xi1`, `xi2` and `C`.
pub fn target_threshold() -> f64 {
    persistence_threshold(XI1_ABS, XI2, C)
}

/// What the pipeline finds for the cantilever constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub b1: f64,
    pub b1_crit: f64,
    pub regime: Regime,
    pub equilibria: usize,
    pub loop_exists: bool,
    pub threshold_from_targets: f64,
    pub diagnostic: String,
}

impl ConsistencyReport {
    pub fn to_json(&self) -> String {
        JsonObject::new()
            .num("b1", self.b1)
            .num("b1_crit", self.b1_crit)
            .string("regime", self.regime.name())
            .int("equilibria", self.equilibria as i64)
            .boolean("loop_exists", self.loop_exists)
            .num("threshold_from_targets", self.threshold_from_targets)
            .string("diagnostic", &self.diagnostic)
            .render()
    }
}

pub fn consistency_report() -> Result<ConsistencyReport> {
    let p = params()?;
    let equilibria = find_equilibria(&p).len();
    let loop_exists = crate::homoclinic::saddle_energy(&p).is_ok();
    let regime = p.regime();
    let diagnostic = if regime == Regime::Bistable {
        format!("b1 = {} < b1* = {:.6e}: loops exist", p.b1(), p.b1_crit())
    } else {
        format!(
            "b1 = {} > b1* = {:.6e}: {} equilibrium, no homoclinic loop; target |xi1| = {}, |xi2| = {} are not reproducible from these constants",
            p.b1(),
            p.b1_crit(),
            equilibria,
            XI1_ABS,
            XI2.abs()
        )
    };
    Ok(ConsistencyReport {
        b1: p.b1(),
        b1_crit: p.b1_crit(),
        regime,
        equilibria,
        loop_exists,
        threshold_from_targets: target_threshold(),
        diagnostic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cantilever_set_is_monotone() {
        let r = consistency_report().unwrap();
        assert_eq!(r.regime, Regime::Monotone);
        assert_eq!(r.equilibria, 1);
        assert!(!r.loop_exists);
        assert!((r.b1_crit - 4.817e-4).abs() < 1e-6);
        assert!(r.diagnostic.contains("no homoclinic loop"));
    }

    #[test]
    fn target_threshold_reproduces() {
        assert!((target_threshold() - THRESHOLD).abs() < 1e-4);
    }
}
