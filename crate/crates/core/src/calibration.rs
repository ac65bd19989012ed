//! Frozen thresholds for the Monte Carlo diagnostics, from a pilot run at a
//! fixed seed. [`run_pilot`] reproduces the frozen values exactly.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::FieldModel;
use crate::harness::experiments::estimate_maximal_norms;
use crate::innovations::MarginalLaw;
use crate::maximal::dyadic_ratio_diagnostic;

pub const PILOT_SEED: u64 = 0xC0FFEE;
pub const PILOT_REPLICATIONS: usize = 200;
/// Seed of the acceptance runs, distinct from the pilot seed.
pub const ACCEPTANCE_SEED: u64 = 0xACCE97;
/// Exponent of the `L^p` norm in the growth profile.
pub const GROWTH_P: f64 = 1.5;

/// Caps are the pilot maxima times these factors. Acceptance runs use a
/// different seed, so the caps must absorb seed-to-seed variation of a
/// maximum over 200 replications.
pub const DYADIC_HEADROOM: f64 = 1.5;
pub const GROWTH_HEADROOM: f64 = 1.10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PilotValues {
    /// Max of `M_full / M_dyadic` over windows `2^3..2^7`, `d = 1`.
    pub dyadic_max_d1: f64,
    /// Same over `2^3..2^5` per axis, `d = 2`.
    pub dyadic_max_d2: f64,
    /// `‖M_{2^10}‖ / ‖M_{2^9}‖`, atom model, `d = 1`.
    pub growth_d1: f64,
    /// `‖M_{(2^6,2^6)}‖ / ‖M_{(2^5,2^5)}‖`, product model, `d = 2`.
    pub growth_d2: f64,
}

pub const FROZEN_PILOT: PilotValues = PilotValues {
    dyadic_max_d1: 1.938_440_410_598_620_6,
    dyadic_max_d2: 2.437_087_183_379_770_5,
    growth_d1: 1.015_266_926_529_858_8,
    growth_d2: 1.077_329_770_578_404,
};

pub fn dyadic_ratio_cap(d: usize) -> f64 {
    DYADIC_HEADROOM
        * match d {
            1 => FROZEN_PILOT.dyadic_max_d1,
            _ => FROZEN_PILOT.dyadic_max_d2,
        }
}

pub fn growth_threshold(d: usize) -> f64 {
    GROWTH_HEADROOM
        * match d {
            1 => FROZEN_PILOT.growth_d1,
            _ => FROZEN_PILOT.growth_d2,
        }
}

pub fn atom_model_d1() -> Arc<FieldModel> {
    Arc::new(FieldModel::iid_orthomartingale(1, MarginalLaw::Rademacher).expect("valid"))
}

pub fn product_model_d2() -> Arc<FieldModel> {
    Arc::new(FieldModel::product_orthomartingale(vec![MarginalLaw::Rademacher; 2]).expect("valid"))
}

pub fn dyadic_windows(d: usize) -> Vec<Vec<usize>> {
    let range = if d == 1 { 3..=7 } else { 3..=5 };
    range.map(|e| vec![1usize << e; d]).collect()
}

pub fn growth_schedule(d: usize) -> Vec<Vec<u32>> {
    if d == 1 {
        vec![vec![9], vec![10]]
    } else {
        vec![vec![5, 5], vec![6, 6]]
    }
}

pub fn dyadic_max(model: &Arc<FieldModel>, replications: usize, seed: u64) -> Result<(f64, bool)> {
    let s = dyadic_ratio_diagnostic(model, &dyadic_windows(model.dim()), replications, seed)?;
    Ok((s.iter().map(|w| w.max).fold(1.0, f64::max), s.iter().all(|w| w.ordered)))
}

pub fn growth(model: &Arc<FieldModel>, replications: usize, seed: u64) -> Result<f64> {
    let est = estimate_maximal_norms(model, &growth_schedule(model.dim()), GROWTH_P, None, replications, seed)?;
    Ok(est.last_growth().expect("two windows"))
}

pub fn run_pilot(seed: u64) -> Result<PilotValues> {
    let d1 = atom_model_d1();
    let d2 = product_model_d2();
    Ok(PilotValues {
        dyadic_max_d1: dyadic_max(&d1, PILOT_REPLICATIONS, seed)?.0,
        dyadic_max_d2: dyadic_max(&d2, PILOT_REPLICATIONS, seed)?.0,
        growth_d1: growth(&d1, PILOT_REPLICATIONS, seed)?,
        growth_d2: growth(&d2, PILOT_REPLICATIONS, seed)?,
    })
}
