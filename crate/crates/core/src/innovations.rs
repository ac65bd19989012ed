//! Sparse linear combinations of innovation atoms, conditioning by
//! truncation, and sampled realizations of the atoms.
//!
//! The atom at `ℓ` is `ξ∘T^ℓ`. For iid atoms, or for product atoms
//! `ξ_ℓ = ∏_q e_q(ℓ_q)`, the conditional expectation given
//! `F_i = σ(ξ_ℓ : ℓ ≼ i)` keeps exactly the atoms with `ℓ ≼ i`: every other
//! atom carries at least one centered factor independent of `F_i`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeIndex, Region};
use crate::norms::DiscreteLaw;
use crate::rng::CounterRng;

/// Default cap on the number of stored terms.
pub const DEFAULT_SUPPORT_CAP: usize = 1_000_000;

/// Default cap on the number of outcomes enumerated for an exact law.
pub const EXACT_LAW_CAP: usize = 1 << 20;

/// `constant + Σ_ℓ coeff_ℓ · ξ_ℓ` with finitely many nonzero coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomCombination {
    dim: usize,
    terms: BTreeMap<LatticeIndex, f64>,
    constant: f64,
}

impl AtomCombination {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: BTreeMap::new(), constant: 0.0 }
    }

    /// The single atom `ξ_key`.
    pub fn atom(key: LatticeIndex) -> Self {
        let dim = key.dim();
        let mut terms = BTreeMap::new();
        terms.insert(key, 1.0);
        Self { dim, terms, constant: 0.0 }
    }

    /// Merges duplicate keys and drops zero coefficients.
    pub fn from_terms(dim: usize, terms: impl IntoIterator<Item = (LatticeIndex, f64)>) -> Result<Self> {
        let mut c = Self::zero(dim);
        for (k, v) in terms {
            if k.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: k.dim() });
            }
            if !v.is_finite() {
                return Err(Error::NonFinite(v));
            }
            c.add_term(k, v);
        }
        Ok(c)
    }

    pub fn with_constant(mut self, constant: f64) -> Self {
        self.constant = constant;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    /// True when there are no atoms and the constant is zero.
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty() && self.constant == 0.0
    }

    pub fn terms(&self) -> &BTreeMap<LatticeIndex, f64> {
        &self.terms
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn coefficient(&self, key: &LatticeIndex) -> f64 {
        self.terms.get(key).copied().unwrap_or(0.0)
    }

    fn add_term(&mut self, key: LatticeIndex, v: f64) {
        if v == 0.0 {
            return;
        }
        match self.terms.entry(key) {
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = *e.get() + v;
                if s == 0.0 {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(v);
            }
        }
    }

    /// `self += coef · other`.
    pub fn add_scaled(&mut self, other: &AtomCombination, coef: f64) {
        debug_assert_eq!(self.dim, other.dim);
        for (k, &v) in &other.terms {
            self.add_term(k.clone(), coef * v);
        }
        self.constant += coef * other.constant;
    }

    pub fn add(&self, other: &AtomCombination) -> Self {
        let mut out = self.clone();
        out.add_scaled(other, 1.0);
        out
    }

    pub fn sub(&self, other: &AtomCombination) -> Self {
        let mut out = self.clone();
        out.add_scaled(other, -1.0);
        out
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = Self::zero(self.dim);
        out.add_scaled(self, c);
        out
    }

    /// Drops coefficients with `|c| ≤ tol`.
    pub fn prune(&mut self, tol: f64) {
        self.terms.retain(|_, v| v.abs() > tol);
        if self.constant.abs() <= tol {
            self.constant = 0.0;
        }
    }

    /// `U^i c`: every key moves by `i`.
    pub fn shift(&self, i: &LatticeIndex) -> Self {
        Self { dim: self.dim, terms: self.terms.iter().map(|(k, &v)| (k + i, v)).collect(), constant: self.constant }
    }

    /// `E[c | F_i]`: keeps the atoms with `ℓ ≼ i`.
    pub fn conditional_projection(&self, i: &LatticeIndex) -> Self {
        Self {
            dim: self.dim,
            terms: self.terms.iter().filter(|(k, _)| k.precedes(i)).map(|(k, &v)| (k.clone(), v)).collect(),
            constant: self.constant,
        }
    }

    /// Conditioning along some axes only: `None` leaves an axis untouched.
    pub fn partial_projection(&self, levels: &[Option<i64>]) -> Self {
        Self {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| levels.iter().enumerate().all(|(q, l)| l.is_none_or(|l| k[q] <= l)))
                .map(|(k, &v)| (k.clone(), v))
                .collect(),
            constant: self.constant,
        }
    }

    /// Conditioning on the one-axis filtration: keeps `ℓ_q ≤ level`.
    pub fn axis_projection(&self, q: usize, level: i64) -> Self {
        let mut levels = vec![None; self.dim];
        levels[q] = Some(level);
        self.partial_projection(&levels)
    }

    /// `π_j = ∏_q (E^{(q)}_{j_q} - E^{(q)}_{j_q - 1})` applied to `self`.
    pub fn hannan_projector(&self, j: &LatticeIndex) -> Self {
        let mut c = self.clone();
        for q in 0..self.dim {
            c = c.axis_projection(q, j[q]).sub(&c.axis_projection(q, j[q] - 1));
        }
        c
    }

    /// `Σ_{0 ≼ t ≼ b-1} U^t c`, one axis at a time.
    pub fn block_sum(&self, b: &LatticeIndex, cap: usize) -> Result<Self> {
        if b.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: b.dim() });
        }
        if b.coords().iter().any(|&x| x < 1) {
            return Err(Error::Domain(format!("block extent {b} must be ≽ 1")));
        }
        let mut cur = self.clone();
        for q in 0..self.dim {
            let extent = b[q];
            if extent == 1 {
                continue;
            }
            let mut next = Self::zero(self.dim);
            for (k, &v) in &cur.terms {
                for t in 0..extent {
                    next.add_term(k.with(q, k[q] + t), v);
                }
            }
            if next.terms.len() > cap {
                return Err(Error::SupportOverflow { size: next.terms.len(), cap });
            }
            next.constant = cur.constant * extent as f64;
            cur = next;
        }
        Ok(cur)
    }

    /// Smallest box holding every key, if any.
    pub fn bounding_region(&self) -> Option<Region> {
        let mut it = self.terms.keys();
        let first = it.next()?;
        let (mut lo, mut hi) = (first.clone(), first.clone());
        for k in it {
            lo = lo.meet(k);
            hi = hi.join(k);
        }
        Some(Region { lo, hi })
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().fold(self.constant.abs(), |m, v| m.max(v.abs()))
    }

    /// `(Σ coeff²)^{1/2}`.
    pub fn coefficient_l2(&self) -> f64 {
        self.terms.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn coefficient_l1(&self) -> f64 {
        self.terms.values().map(|v| v.abs()).sum()
    }

    /// `constant + Σ coeff_ℓ · ξ_ℓ` on a realization.
    pub fn evaluate(&self, r: &Realization) -> Result<f64> {
        self.evaluate_shifted(&LatticeIndex::zeros(self.dim), r)
    }

    /// Evaluates `U^by c` without building the shifted combination.
    pub fn evaluate_shifted(&self, by: &LatticeIndex, r: &Realization) -> Result<f64> {
        let mut key = vec![0i64; self.dim];
        let mut acc = self.constant;
        for (k, &v) in &self.terms {
            for q in 0..self.dim {
                key[q] = k[q] + by[q];
            }
            acc += v * r.atom(&key)?;
        }
        Ok(acc)
    }
}

impl fmt::Display for AtomCombination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        let mut first = true;
        if self.constant != 0.0 {
            write!(f, "const:{}", self.constant)?;
            first = false;
        }
        for (k, v) in &self.terms {
            if !first {
                write!(f, ", ")?;
            }
            write!(f, "{k}:{v}")?;
            first = false;
        }
        write!(f, "}}")
    }
}

/// One-dimensional centered law with unit variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MarginalLaw {
    Rademacher,
    Gaussian,
    /// `sqrt((1-p)/p)` with probability `p`, `-sqrt(p/(1-p))` otherwise.
    TwoPoint {
        p: f64,
    },
    /// `±spike` with total probability `weight`, `±base` otherwise, where
    /// `base` is set by the unit variance.
    SpikeMixture {
        spike: f64,
        weight: f64,
    },
    Discrete {
        atoms: Vec<(f64, f64)>,
    },
}

impl MarginalLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            MarginalLaw::Rademacher | MarginalLaw::Gaussian => Ok(()),
            MarginalLaw::TwoPoint { p } => {
                if !(*p > 0.0 && *p < 1.0) {
                    return Err(Error::InvalidLaw(format!("two-point p = {p} must lie in (0,1)")));
                }
                Ok(())
            }
            MarginalLaw::SpikeMixture { spike, weight } => {
                if !(*weight > 0.0 && *weight < 1.0) || !(spike.is_finite()) {
                    return Err(Error::InvalidLaw(format!("spike weight {weight} must lie in (0,1)")));
                }
                if weight * spike * spike >= 1.0 {
                    return Err(Error::InvalidLaw(format!("spike {spike} with weight {weight} exceeds unit variance")));
                }
                Ok(())
            }
            MarginalLaw::Discrete { atoms } => {
                let law = DiscreteLaw::new(atoms.clone())?;
                if law.mean().abs() > 1e-12 {
                    return Err(Error::InvalidLaw(format!("mean {} is not 0", law.mean())));
                }
                if (law.expect(|v| v * v) - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidLaw(format!("variance {} is not 1", law.expect(|v| v * v))));
                }
                Ok(())
            }
        }
    }

    /// The exact law, when it has finitely many atoms.
    pub fn discrete_law(&self) -> Option<DiscreteLaw> {
        let atoms = match self {
            MarginalLaw::Rademacher => return Some(DiscreteLaw::rademacher()),
            MarginalLaw::Gaussian => return None,
            MarginalLaw::TwoPoint { p } => {
                vec![((1.0 - p) / p).sqrt(), -(p / (1.0 - p)).sqrt()].into_iter().zip([*p, 1.0 - p]).collect()
            }
            MarginalLaw::SpikeMixture { spike, weight } => {
                let base = ((1.0 - weight * spike * spike) / (1.0 - weight)).sqrt();
                vec![
                    (-spike, weight / 2.0),
                    (-base, (1.0 - weight) / 2.0),
                    (base, (1.0 - weight) / 2.0),
                    (*spike, weight / 2.0),
                ]
            }
            MarginalLaw::Discrete { atoms } => atoms.clone(),
        };
        DiscreteLaw::from_weights(atoms).ok()
    }

    /// Exact law of `|X|`; the Gaussian uses a fine quadrature.
    pub fn abs_law(&self) -> DiscreteLaw {
        match self.discrete_law() {
            Some(l) => l.abs().canonical(),
            None => DiscreteLaw::half_normal_quadrature(),
        }
    }

    pub fn sample(&self, rng: &mut CounterRng) -> f64 {
        match self {
            MarginalLaw::Rademacher => {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            MarginalLaw::Gaussian => StandardNormal.sample(rng),
            _ => {
                let law = self.discrete_law().expect("validated discrete law");
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for &(v, p) in law.atoms() {
                    acc += p;
                    if u < acc {
                        return v;
                    }
                }
                law.atoms().last().unwrap().0
            }
        }
    }
}

/// How atoms are generated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InnovationModel {
    /// One independent draw per lattice site.
    Iid { law: MarginalLaw },
    /// `ξ_ℓ = ∏_q e_q(ℓ_q)` for independent sequences `e_q`.
    Product { axes: Vec<MarginalLaw> },
}

impl InnovationModel {
    pub fn iid(law: MarginalLaw) -> Result<Self> {
        law.validate()?;
        Ok(InnovationModel::Iid { law })
    }

    pub fn product(axes: Vec<MarginalLaw>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidModel("product model needs at least one axis law".into()));
        }
        for l in &axes {
            l.validate()?;
        }
        Ok(InnovationModel::Product { axes })
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            InnovationModel::Iid { law } => law.validate(),
            InnovationModel::Product { axes } => {
                if axes.len() != d {
                    return Err(Error::InvalidModel(format!(
                        "product model has {} axis laws for dimension {d}",
                        axes.len()
                    )));
                }
                axes.iter().try_for_each(MarginalLaw::validate)
            }
        }
    }

    /// The atom value at `ℓ`, a pure function of `(seed, ℓ)`.
    pub fn atom_value(&self, seed: u64, key: &[i64]) -> f64 {
        match self {
            InnovationModel::Iid { law } => law.sample(&mut CounterRng::for_site(seed, 0, key)),
            InnovationModel::Product { axes } => axes
                .iter()
                .enumerate()
                .map(|(q, law)| law.sample(&mut CounterRng::for_site(seed, q as u64 + 1, &[key[q]])))
                .product(),
        }
    }

    /// Law of `|ξ_0|`, exactly when every factor is discrete.
    pub fn atom_abs_law(&self, d: usize) -> Result<DiscreteLaw> {
        match self {
            InnovationModel::Iid { law } => Ok(law.abs_law()),
            InnovationModel::Product { .. } => {
                abs_law_of_combination(&AtomCombination::atom(LatticeIndex::zeros(d)), self, EXACT_LAW_CAP)
            }
        }
    }
}

/// Atom values on a box of lattice points.
#[derive(Clone, Debug)]
pub struct Realization {
    region: Region,
    values: Vec<f64>,
    seed: u64,
}

impl Realization {
    pub fn from_values(region: Region, values: Vec<f64>, seed: u64) -> Result<Self> {
        if values.len() != region.volume() {
            return Err(Error::ShapeMismatch { expected: region.volume(), got: values.len() });
        }
        Ok(Self { region, values, seed })
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The atom at `key`, or an out-of-margin error.
    #[inline]
    pub fn atom(&self, key: &[i64]) -> Result<f64> {
        match self.region.offset(key) {
            Some(o) => Ok(self.values[o]),
            None => Err(Error::OutOfMargin {
                key: LatticeIndex::new(key.to_vec()),
                lo: self.region.lo.clone(),
                hi: self.region.hi.clone(),
            }),
        }
    }

    /// The realization `ℓ ↦ r(ℓ + by)`.
    pub fn translated(&self, by: &LatticeIndex) -> Realization {
        Realization { region: self.region.translate(&-by), values: self.values.clone(), seed: self.seed }
    }
}

/// Draws the atoms on `region`. Values depend only on `(seed, site)`, so two
/// overlapping regions agree on their overlap.
pub fn sample_atoms(model: &InnovationModel, region: &Region, seed: u64) -> Result<Realization> {
    let d = region.dim();
    model.validate(d)?;
    let values: Vec<f64> = match model {
        InnovationModel::Iid { .. } => {
            (0..region.volume()).into_par_iter().map(|o| model.atom_value(seed, region.point_at(o).coords())).collect()
        }
        InnovationModel::Product { axes } => {
            let sequences: Vec<Vec<f64>> = axes
                .iter()
                .enumerate()
                .map(|(q, law)| {
                    (region.lo[q]..=region.hi[q])
                        .map(|t| law.sample(&mut CounterRng::for_site(seed, q as u64 + 1, &[t])))
                        .collect()
                })
                .collect();
            (0..region.volume())
                .map(|o| {
                    let p = region.point_at(o);
                    (0..d).map(|q| sequences[q][(p[q] - region.lo[q]) as usize]).product()
                })
                .collect()
        }
    };
    Realization::from_values(region.clone(), values, seed)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Source {
    Site(LatticeIndex),
    Axis(usize, i64),
}

/// Exact law of `|c|` under the innovation model. Discrete models are
/// enumerated over their independent sources (sites, or axis coordinates for
/// product models); iid Gaussian combinations use `|N(0, ‖c‖²)|`.
pub fn abs_law_of_combination(c: &AtomCombination, model: &InnovationModel, cap: usize) -> Result<DiscreteLaw> {
    if c.terms().is_empty() {
        return Ok(DiscreteLaw::point(c.constant().abs()));
    }
    if let InnovationModel::Iid { law: MarginalLaw::Gaussian } = model {
        if c.constant() != 0.0 {
            return Err(Error::InvalidLaw("Gaussian combination with a constant has no tabulated law".into()));
        }
        return Ok(DiscreteLaw::half_normal_quadrature().scale(c.coefficient_l2()));
    }

    let mut sources: Vec<(Source, DiscreteLaw)> = Vec::new();
    let mut index: HashMap<Source, usize> = HashMap::new();
    let mut term_sources: Vec<(Vec<usize>, f64)> = Vec::new();
    for (key, &coef) in c.terms() {
        let keys: Vec<(Source, &MarginalLaw)> = match model {
            InnovationModel::Iid { law } => vec![(Source::Site(key.clone()), law)],
            InnovationModel::Product { axes } => {
                axes.iter().enumerate().map(|(q, law)| (Source::Axis(q, key[q]), law)).collect()
            }
        };
        let mut ids = Vec::with_capacity(keys.len());
        for (src, law) in keys {
            let id = match index.get(&src) {
                Some(&id) => id,
                None => {
                    let dl = law
                        .discrete_law()
                        .ok_or_else(|| Error::InvalidLaw("continuous factor has no exact enumeration".into()))?;
                    let dl = dl.canonical();
                    sources.push((src.clone(), dl));
                    index.insert(src, sources.len() - 1);
                    sources.len() - 1
                }
            };
            ids.push(id);
        }
        term_sources.push((ids, coef));
    }

    let outcomes: f64 = sources.iter().map(|s| s.1.atoms().len() as f64).product();
    if outcomes > cap as f64 {
        return Err(Error::ExactLawTooLarge { outcomes, cap });
    }
    let radices: Vec<usize> = sources.iter().map(|s| s.1.atoms().len()).collect();
    let mut digits = vec![0usize; sources.len()];
    let mut atoms = Vec::with_capacity(outcomes as usize);
    loop {
        let prob: f64 = digits.iter().enumerate().map(|(s, &k)| sources[s].1.atoms()[k].1).product();
        let value: f64 = c.constant()
            + term_sources
                .iter()
                .map(|(ids, coef)| coef * ids.iter().map(|&s| sources[s].1.atoms()[digits[s]].0).product::<f64>())
                .sum::<f64>();
        atoms.push((value.abs(), prob));
        let mut s = 0;
        loop {
            if s == digits.len() {
                return DiscreteLaw::from_weights(atoms).map(|l| l.canonical());
            }
            digits[s] += 1;
            if digits[s] < radices[s] {
                break;
            }
            digits[s] = 0;
            s += 1;
        }
    }
}
