//! Field models `f` built from innovation atoms, and their samples on windows.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::innovations::{
    sample_atoms, AtomCombination, InnovationModel, MarginalLaw, Realization, DEFAULT_SUPPORT_CAP,
};
use crate::lattice::{LatticeIndex, PrefixSumTable, Region, Window};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FieldKind {
    OrthomartingaleAtom,
    /// `f = Σ_{j ≽ 0} a_j ξ_{-j}`.
    CausalLinear {
        coefficients: BTreeMap<LatticeIndex, f64>,
    },
}

/// A stationary field `(f∘T^i)_i` given by a combination of atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldModel {
    d: usize,
    innovation: InnovationModel,
    kind: FieldKind,
    f: AtomCombination,
}

impl FieldModel {
    /// `ξ_ℓ = ∏_q e_q(ℓ_q)` with `f = ξ_0`.
    pub fn product_orthomartingale(axes: Vec<MarginalLaw>) -> Result<Self> {
        let d = axes.len();
        let innovation = InnovationModel::product(axes)?;
        Ok(Self {
            d,
            innovation,
            kind: FieldKind::OrthomartingaleAtom,
            f: AtomCombination::atom(LatticeIndex::zeros(d)),
        })
    }

    /// iid atoms with `f = ξ_0`.
    pub fn iid_orthomartingale(d: usize, law: MarginalLaw) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidModel("dimension must be at least 1".into()));
        }
        Ok(Self {
            d,
            innovation: InnovationModel::iid(law)?,
            kind: FieldKind::OrthomartingaleAtom,
            f: AtomCombination::atom(LatticeIndex::zeros(d)),
        })
    }

    pub fn causal_linear(
        d: usize,
        innovation: InnovationModel,
        coefficients: impl IntoIterator<Item = (LatticeIndex, f64)>,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidModel("dimension must be at least 1".into()));
        }
        innovation.validate(d)?;
        let mut table = BTreeMap::new();
        for (j, a) in coefficients {
            if j.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: j.dim() });
            }
            if j.coords().iter().any(|&c| c < 0) {
                return Err(Error::InvalidModel(format!("coefficient key {j} has a negative coordinate")));
            }
            if !a.is_finite() {
                return Err(Error::NonFinite(a));
            }
            *table.entry(j).or_insert(0.0) += a;
        }
        table.retain(|_, a| *a != 0.0);
        let f = AtomCombination::from_terms(d, table.iter().map(|(j, &a)| (-j, a)))?;
        Ok(Self { d, innovation, kind: FieldKind::CausalLinear { coefficients: table }, f })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn innovation(&self) -> &InnovationModel {
        &self.innovation
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    /// The combination `f`.
    pub fn combination(&self) -> &AtomCombination {
        &self.f
    }

    /// Coefficients `a_j`; the atom model reports `{0: 1}`.
    pub fn coefficients(&self) -> BTreeMap<LatticeIndex, f64> {
        match &self.kind {
            FieldKind::OrthomartingaleAtom => [(LatticeIndex::zeros(self.d), 1.0)].into_iter().collect(),
            FieldKind::CausalLinear { coefficients } => coefficients.clone(),
        }
    }

    /// Largest lag per axis, `max_j j_q` over the coefficient support.
    pub fn lag_extent(&self) -> LatticeIndex {
        self.coefficients().keys().fold(LatticeIndex::zeros(self.d), |acc, j| acc.join(j))
    }

    /// `Σ a_j²`, reported but never used to rescale.
    pub fn coefficient_energy(&self) -> f64 {
        self.coefficients().values().map(|a| a * a).sum()
    }

    /// Lattice points whose atoms are read when rendering `window`.
    pub fn required_region(&self, window: &Window) -> Region {
        let w = window.region();
        match self.f.bounding_region() {
            Some(b) => Region { lo: &w.lo + &b.lo, hi: &w.hi + &b.hi },
            None => w,
        }
    }
}

/// Field values `f∘T^{origin + i - 1}` on the sites of a window.
#[derive(Clone, Debug)]
pub struct FieldSample {
    window: Window,
    values: Vec<f64>,
    table: PrefixSumTable<f64>,
    seed: u64,
    model: Option<Arc<FieldModel>>,
}

impl FieldSample {
    /// A sample from explicit values, with no model attached.
    pub fn from_values(window: Window, values: Vec<f64>, seed: u64) -> Result<Self> {
        if let Some(&x) = values.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(x));
        }
        let table = PrefixSumTable::build(&window, &values)?;
        Ok(Self { window, values, table, seed, model: None })
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn table(&self) -> &PrefixSumTable<f64> {
        &self.table
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn model(&self) -> Option<&FieldModel> {
        self.model.as_deref()
    }

    /// The value at a 1-based site.
    pub fn value(&self, site: &LatticeIndex) -> Result<f64> {
        self.window
            .site_offset(site.coords())
            .map(|o| self.values[o])
            .ok_or_else(|| Error::OutOfWindow { index: site.clone() })
    }

    /// `S_n = Σ_{1 ≼ i ≼ n}` of the window values.
    pub fn partial_sum(&self, n: &LatticeIndex) -> Result<f64> {
        self.table.rect_sum(&LatticeIndex::ones(n.dim()), n)
    }

    /// Same values scaled by `c`.
    pub fn scaled(&self, c: f64) -> Result<FieldSample> {
        let mut s =
            FieldSample::from_values(self.window.clone(), self.values.iter().map(|v| c * v).collect(), self.seed)?;
        s.model = self.model.clone();
        Ok(s)
    }
}

/// Renders `model` on `window` from freshly sampled atoms.
pub fn render_sample(model: &Arc<FieldModel>, window: &Window, seed: u64) -> Result<FieldSample> {
    if window.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: window.dim() });
    }
    let realization = sample_atoms(model.innovation(), &model.required_region(window), seed)?;
    render_from_realization(model, window, &realization)
}

/// Renders `model` on `window` from given atoms; atoms outside the
/// realization are an error.
pub fn render_from_realization(
    model: &Arc<FieldModel>,
    window: &Window,
    realization: &Realization,
) -> Result<FieldSample> {
    let f = model.combination();
    let values: Vec<f64> = (0..window.volume())
        .into_par_iter()
        .map(|o| f.evaluate_shifted(&window.lattice_point(&window.site_at(o)), realization))
        .collect::<Result<_>>()?;
    let mut sample = FieldSample::from_values(window.clone(), values, realization.seed())?;
    sample.model = Some(Arc::clone(model));
    Ok(sample)
}

/// `S_n(f) = Σ_{0 ≼ i ≼ n-1} U^i f` as a combination.
pub fn symbolic_partial_sum(model: &FieldModel, n: &LatticeIndex) -> Result<AtomCombination> {
    symbolic_partial_sum_capped(model, n, DEFAULT_SUPPORT_CAP)
}

pub fn symbolic_partial_sum_capped(model: &FieldModel, n: &LatticeIndex, cap: usize) -> Result<AtomCombination> {
    if n.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: n.dim() });
    }
    model.combination().block_sum(n, cap)
}
