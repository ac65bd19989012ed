//! Dyadic martingale/coboundary decompositions of partial sums, verified
//! pointwise on realizations, and the projective series of causal fields.
//!
//! Every term `d_{k,I}` is a tensor product of one-axis operators applied to
//! `f`: a martingale operator on the axes of `I` and a coboundary operator
//! elsewhere. One-axis operators are sums of `coef · P_c τ_s S_b` where `S_b`
//! sums `b` consecutive shifts, `τ_s` shifts by `s`, and `P_c` truncates at
//! level `c`. Truncations along different axes commute, so the operators can
//! be applied axis by axis.
//!
//! With `U_k = P_{-2^k} S_{2^k}` the one-axis identity
//! `S_i = Σ_k Σ_{ℓ < ⌊i/2^k⌋} D_k∘τ_{2^k ℓ} + Σ_k bit_k(i) U_k∘τ_{2^k(⌊i/2^k⌋-1)}`
//! holds with `D_0 = I - P_{-1}` and `D_k = U_{k-1} + τ_{2^{k-1}} U_{k-1} - U_k`,
//! which gives the inequality term by term after tensorizing.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{symbolic_partial_sum, FieldModel};
use crate::innovations::{abs_law_of_combination, AtomCombination, Realization, DEFAULT_SUPPORT_CAP, EXACT_LAW_CAP};
use crate::lattice::{AxisSet, LatticeIndex, PrefixSumTable, Region, Window};
use crate::norms::{empirical_orlicz_norm, orlicz_norm, OrliczParams};
use crate::rng::child_seed;

/// Which one-axis operators build `d_{k,I}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// `D_0 = I - P_{-1}`, `D_k = U_{k-1} + τ_{2^{k-1}} U_{k-1} - U_k`,
    /// coboundary `U_k`. Exact by telescoping.
    Telescoping,
    /// The closed formula with blocks `2^{k + 1_{Z(k)} - 1_I}` and levels
    /// `-2^{k - 1_{I''}} - 1_{I'}`, taken literally.
    General,
    /// As `General`, with the axes where `k_q = 0` conditioned at `-1_{I'}`.
    GeneralZeroOrigin,
    /// The one-dimensional proof listing tensorized: `D_0 = I - P_{-1}`,
    /// `D_k = (P_{-2^{k-1}} - P_{-2^k}) S_{2^k}`, coboundary `U_k`.
    ProofListing,
}

impl Variant {
    pub const ALL: [Variant; 4] =
        [Variant::Telescoping, Variant::General, Variant::GeneralZeroOrigin, Variant::ProofListing];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Telescoping => "telescoping",
            Variant::General => "general",
            Variant::GeneralZeroOrigin => "general-zero-origin",
            Variant::ProofListing => "proof-listing",
        }
    }
}

/// `coef · P_level τ_shift S_block` along one axis; `level = None` is no
/// truncation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisTerm {
    pub coef: f64,
    pub shift: i64,
    pub block: i64,
    pub level: Option<i64>,
}

const fn term(coef: f64, shift: i64, block: i64, level: Option<i64>) -> AxisTerm {
    AxisTerm { coef, shift, block, level }
}

/// One-axis operator for exponent `k`, martingale (`q ∈ I`) or coboundary.
pub fn axis_terms(variant: Variant, martingale: bool, k: u32) -> Vec<AxisTerm> {
    let p = |e: u32| 1i64 << e;
    match (variant, martingale, k) {
        (Variant::Telescoping | Variant::ProofListing, true, 0) => {
            vec![term(1.0, 0, 1, None), term(-1.0, 0, 1, Some(-1))]
        }
        (Variant::Telescoping, true, k) => vec![
            term(1.0, 0, p(k - 1), Some(-p(k - 1))),
            term(1.0, p(k - 1), p(k - 1), Some(0)),
            term(-1.0, 0, p(k), Some(-p(k))),
        ],
        (Variant::ProofListing, true, k) => vec![term(1.0, 0, p(k), Some(-p(k - 1))), term(-1.0, 0, p(k), Some(-p(k)))],
        (Variant::Telescoping | Variant::ProofListing, false, k) => {
            vec![term(1.0, 0, p(k), Some(-p(k)))]
        }
        (Variant::General, true, 0) => vec![term(1.0, 0, 1, Some(-1)), term(-1.0, 0, 1, Some(-2))],
        (Variant::GeneralZeroOrigin, true, 0) => {
            vec![term(1.0, 0, 1, Some(0)), term(-1.0, 0, 1, Some(-1))]
        }
        (Variant::General | Variant::GeneralZeroOrigin, true, k) => {
            vec![term(1.0, 0, p(k - 1), Some(-p(k))), term(-1.0, 0, p(k - 1), Some(-p(k - 1)))]
        }
        (Variant::General, false, 0) => vec![term(1.0, 0, 2, Some(-1))],
        (Variant::GeneralZeroOrigin, false, 0) => vec![term(1.0, 0, 2, Some(0))],
        (Variant::General | Variant::GeneralZeroOrigin, false, k) => {
            vec![term(1.0, 0, p(k), Some(-p(k)))]
        }
    }
}

/// The term `d_{k,I}` with its measurability diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionTerm {
    pub k: LatticeIndex,
    pub axes: AxisSet,
    /// Axes with `k_q = 0`.
    pub zero_axes: AxisSet,
    pub combination: AtomCombination,
    /// Index `c` with `d_{k,I}` measurable for `F_c`.
    pub defining: LatticeIndex,
    pub measurable: bool,
    /// Positive shifts by `2^{k_q}` along `q ∈ I` are centered given `F_c`.
    pub orthomartingale: bool,
}

impl Serialize for AxisSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.axes().map(|q| q + 1))
    }
}

impl<'de> Deserialize<'de> for AxisSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let axes: Vec<usize> = Vec::deserialize(d)?;
        if axes.iter().any(|&q| q == 0 || q > 32) {
            return Err(serde::de::Error::custom("axes are numbered from 1"));
        }
        Ok(AxisSet::from_axes(&axes.iter().map(|q| q - 1).collect::<Vec<_>>()))
    }
}

type BlockCache = HashMap<LatticeIndex, AtomCombination>;

fn build_term(
    f: &AtomCombination,
    k: &LatticeIndex,
    axes: AxisSet,
    variant: Variant,
    cache: &mut BlockCache,
    cap: usize,
) -> Result<DecompositionTerm> {
    let d = f.dim();
    let per_axis: Vec<Vec<AxisTerm>> = (0..d).map(|q| axis_terms(variant, axes.contains(q), k[q] as u32)).collect();

    let mut acc = AtomCombination::zero(d);
    let mut magnitude = 0.0;
    let mut pick = vec![0usize; d];
    loop {
        let chosen: Vec<AxisTerm> = (0..d).map(|q| per_axis[q][pick[q]]).collect();
        let coef: f64 = chosen.iter().map(|t| t.coef).product();
        let block = LatticeIndex::new(chosen.iter().map(|t| t.block).collect());
        let shift = LatticeIndex::new(chosen.iter().map(|t| t.shift).collect());
        let levels: Vec<Option<i64>> = chosen.iter().map(|t| t.level).collect();
        if !cache.contains_key(&block) {
            cache.insert(block.clone(), f.block_sum(&block, cap)?);
        }
        let piece = cache[&block].shift(&shift).partial_projection(&levels);
        magnitude += coef.abs() * piece.max_abs_coefficient();
        acc.add_scaled(&piece, coef);
        if acc.len() > cap {
            return Err(Error::SupportOverflow { size: acc.len(), cap });
        }
        let mut q = d;
        loop {
            if q == 0 {
                break;
            }
            q -= 1;
            pick[q] += 1;
            if pick[q] < per_axis[q].len() {
                break;
            }
            pick[q] = 0;
        }
        if pick.iter().all(|&x| x == 0) {
            break;
        }
    }
    // Cancelling sums leave rounding residue of a few ulps of the summands.
    acc.prune(64.0 * f64::EPSILON * magnitude);

    let defining = LatticeIndex::new(
        per_axis.iter().map(|ts| ts.iter().map(|t| t.level.unwrap_or(t.shift + t.block - 1)).max().unwrap()).collect(),
    );
    let measurable = acc.conditional_projection(&defining) == acc;
    let orthomartingale = axes.axes().all(|q| {
        (1..=2).all(|j| {
            let by = LatticeIndex::unit(d, q).hadamard(&LatticeIndex::splat(d, j << k[q]));
            acc.shift(&by).conditional_projection(&defining).is_empty()
        })
    });
    let zero_axes = AxisSet::from_axes(&(0..d).filter(|&q| k[q] == 0).collect::<Vec<_>>());
    Ok(DecompositionTerm { k: k.clone(), axes, zero_axes, combination: acc, defining, measurable, orthomartingale })
}

fn require_dim_one(model: &FieldModel) -> Result<()> {
    if model.dim() != 1 {
        return Err(Error::Domain(format!("one-dimensional decomposition requested for d = {}", model.dim())));
    }
    Ok(())
}

/// `u_k = E[S_{2^k}(f) | F_{-2^k}]` in dimension one.
pub fn u_k(model: &FieldModel, k: u32) -> Result<AtomCombination> {
    require_dim_one(model)?;
    let b = 1i64 << k;
    Ok(symbolic_partial_sum(model, &LatticeIndex::from([b]))?.conditional_projection(&LatticeIndex::from([-b])))
}

/// `d_k = u_k + u_k∘T^{2^k} - u_{k+1}` in dimension one.
pub fn d_k(model: &FieldModel, k: u32) -> Result<AtomCombination> {
    let u = u_k(model, k)?;
    let next = u_k(model, k + 1)?;
    Ok(u.add(&u.shift(&LatticeIndex::from([1i64 << k]))).sub(&next))
}

/// `d_{k,I}` for one variant. For [`Variant::Telescoping`] a failed
/// measurability or orthomartingale check is an error; other variants only
/// report the flags.
pub fn d_k_i(model: &FieldModel, k: &LatticeIndex, axes: AxisSet, variant: Variant) -> Result<DecompositionTerm> {
    let d = model.dim();
    if k.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: k.dim() });
    }
    if k.coords().iter().any(|&x| !(0..=40).contains(&x)) {
        return Err(Error::Domain(format!("exponents {k} must lie in [0, 40]")));
    }
    let t = build_term(model.combination(), k, axes, variant, &mut BlockCache::new(), DEFAULT_SUPPORT_CAP)?;
    check_term(&t, variant)?;
    Ok(t)
}

fn check_term(t: &DecompositionTerm, variant: Variant) -> Result<()> {
    if variant == Variant::Telescoping && !(t.measurable && t.orthomartingale) {
        return Err(Error::Invariant(format!(
            "d_(k={}, I={}) fails measurability ({}) or the orthomartingale property ({})",
            t.k, t.axes, t.measurable, t.orthomartingale
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Every `d_{k,I}` for `0 ≼ k ≼ n`, ready to be checked on realizations.
#[derive(Clone, Debug)]
pub struct Decomposition {
    model: Arc<FieldModel>,
    exponents: Vec<u32>,
    variant: Variant,
    terms: Vec<DecompositionTerm>,
}

impl Decomposition {
    pub fn new(model: Arc<FieldModel>, exponents: &[u32], variant: Variant) -> Result<Self> {
        let d = model.dim();
        if exponents.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: exponents.len() });
        }
        if exponents.iter().any(|&e| e > 30) {
            return Err(Error::Domain(format!("exponents {exponents:?} are too large")));
        }
        let mut ks = Vec::new();
        let mut k = vec![0i64; d];
        loop {
            ks.push(LatticeIndex::new(k.clone()));
            let mut q = d;
            loop {
                if q == 0 {
                    break;
                }
                q -= 1;
                if k[q] < exponents[q] as i64 {
                    k[q] += 1;
                    break;
                }
                k[q] = 0;
            }
            if k.iter().all(|&x| x == 0) {
                break;
            }
        }
        let f = model.combination().clone();
        let nested: Vec<Vec<DecompositionTerm>> = ks
            .par_iter()
            .map(|k| {
                let mut cache = BlockCache::new();
                AxisSet::all(d)
                    .map(|axes| {
                        let t = build_term(&f, k, axes, variant, &mut cache, DEFAULT_SUPPORT_CAP)?;
                        check_term(&t, variant)?;
                        Ok(t)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(Self { model, exponents: exponents.to_vec(), variant, terms: nested.into_iter().flatten().collect() })
    }

    pub fn terms(&self) -> &[DecompositionTerm] {
        &self.terms
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn model(&self) -> &Arc<FieldModel> {
        &self.model
    }

    /// The window `[1, 2^n]` of the left-hand side.
    pub fn window(&self) -> Window {
        Window::dyadic(&self.exponents).expect("exponents validated")
    }

    /// Every atom read by [`Decomposition::verify`].
    pub fn required_region(&self) -> Region {
        let top = LatticeIndex::pow2(&LatticeIndex::new(self.exponents.iter().map(|&e| e as i64).collect()));
        let mut region = self.model.required_region(&self.window());
        for t in &self.terms {
            if let Some(b) = t.combination.bounding_region() {
                region = region.union(&Region { lo: b.lo, hi: &b.hi + &top });
            }
        }
        region
    }

    /// Left side `max_{1≼i≼2^n} |S_i(f)|` and the sum over `(k, I)` of
    /// `max |S_i^I(T^{2^k}, d_{k,I})|` on one realization.
    pub fn verify(&self, realization: &Realization) -> Result<VerifyOutcome> {
        let d = self.model.dim();
        let window = self.window();
        let f = self.model.combination();
        let values: Vec<f64> = (0..window.volume())
            .map(|o| f.evaluate_shifted(&window.lattice_point(&window.site_at(o)), realization))
            .collect::<Result<_>>()?;
        let table = PrefixSumTable::build(&window, &values)?;
        let lhs = window.sites().map(|s| table.cumulative_unchecked(s.coords()).abs()).fold(0.0, f64::max);

        let mut rhs = 0.0;
        for t in &self.terms {
            if t.combination.is_empty() {
                continue;
            }
            rhs += term_maximum(t, &self.exponents, realization, d)?;
        }
        Ok(VerifyOutcome { lhs, rhs, pass: lhs <= rhs + 1e-9 * (1.0 + rhs.abs()) })
    }
}

/// `max |S_i^I(T^{2^k}, d)|` over `1 - 1_I ≼ i ≼ 2^{n-k}`, with `d` rendered
/// on the sublattice points `2^k ⊙ p`, `0 ≼ p ≼ 2^{n-k}`.
fn term_maximum(t: &DecompositionTerm, exponents: &[u32], r: &Realization, d: usize) -> Result<f64> {
    let steps: Vec<i64> = (0..d).map(|q| 1i64 << t.k[q]).collect();
    let counts: Vec<i64> = (0..d).map(|q| 1i64 << (exponents[q] as i64 - t.k[q])).collect();
    let window = Window::new(counts.iter().map(|&c| c as usize + 1).collect())?;
    let mut by = vec![0i64; d];
    let values: Vec<f64> = (0..window.volume())
        .map(|o| {
            let site = window.site_at(o);
            for q in 0..d {
                by[q] = (site[q] - 1) * steps[q];
            }
            t.combination.evaluate_shifted(&LatticeIndex::new(by.clone()), r)
        })
        .collect::<Result<_>>()?;
    let table = PrefixSumTable::build(&window, &values)?;

    let start: Vec<i64> = (0..d).map(|q| t.axes.contains(q) as i64).collect();
    let mut i = start.clone();
    let mut lo = vec![0i64; d];
    let mut hi = vec![0i64; d];
    let mut best: f64 = 0.0;
    loop {
        for q in 0..d {
            if t.axes.contains(q) {
                lo[q] = 1;
                hi[q] = i[q];
            } else {
                lo[q] = i[q] + 1;
                hi[q] = i[q] + 1;
            }
        }
        best = best.max(table.rect_sum_unchecked(&lo, &hi).abs());
        let mut q = d;
        loop {
            if q == 0 {
                return Ok(best);
            }
            q -= 1;
            if i[q] < counts[q] {
                i[q] += 1;
                break;
            }
            i[q] = start[q];
        }
    }
}

/// Builds the telescoping decomposition and checks it on one realization.
pub fn verify_pointwise_inequality(
    model: &Arc<FieldModel>,
    exponents: &[u32],
    realization: &Realization,
) -> Result<VerifyOutcome> {
    Decomposition::new(Arc::clone(model), exponents, Variant::Telescoping)?.verify(realization)
}

/// How the law of a projected partial sum is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum LawMode {
    Exact,
    /// Exact when possible, otherwise `samples` Monte Carlo draws.
    ExactOrMonteCarlo {
        samples: usize,
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MwTerm {
    pub n: LatticeIndex,
    /// `‖E[S_n(f) | F_0]‖_{2,2(d-1)}`.
    pub norm: f64,
    pub ci: Option<(f64, f64)>,
    /// `|n|^{-3/2} · norm`.
    pub value: f64,
    /// `ℓ²` norm of the coefficients of `E[S_n(f) | F_0]`.
    pub coefficient_l2: f64,
    pub method: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MwSeries {
    pub partial_sum: f64,
    pub terms: Vec<MwTerm>,
    /// Per axis, the first `n_q` from which `E[S_n(f) | F_0]` no longer
    /// changes within the range.
    pub stabilization_index: LatticeIndex,
    /// `lag_extent + 1`.
    pub predicted_index: LatticeIndex,
    pub params: OrliczParams,
}

/// `Σ_{1 ≼ n ≼ n_max} |n|^{-3/2} ‖E[S_n(f) | F_0]‖_{2,2(d-1)}`.
///
/// When `r = 0` the norm is the `L²` norm, and the atoms are orthonormal, so
/// it equals the coefficient `ℓ²` norm exactly.
pub fn mw_series(model: &FieldModel, n_max: &LatticeIndex, mode: LawMode) -> Result<MwSeries> {
    let d = model.dim();
    if n_max.dim() != d || n_max.coords().iter().any(|&c| c < 1) {
        return Err(Error::Domain(format!("n_max {n_max} must be ≽ 1 in dimension {d}")));
    }
    let params = OrliczParams::for_dimension(d);
    let origin = LatticeIndex::zeros(d);
    let grid = Window::new(n_max.coords().iter().map(|&c| c as usize).collect())?;
    let mut projected: BTreeMap<LatticeIndex, AtomCombination> = BTreeMap::new();
    let mut terms = Vec::with_capacity(grid.volume());
    let mut partial_sum = 0.0;
    for n in grid.sites() {
        let c = symbolic_partial_sum(model, &n)?.conditional_projection(&origin);
        let (norm, ci, method) = if c.is_empty() {
            (0.0, None, "empty")
        } else if params.r == 0.0 {
            (c.coefficient_l2(), None, "l2-orthonormal")
        } else {
            match abs_law_of_combination(&c, model.innovation(), EXACT_LAW_CAP) {
                Ok(law) => (orlicz_norm(&law, &params)?, None, "exact"),
                Err(e @ (Error::ExactLawTooLarge { .. } | Error::InvalidLaw(_))) => match mode {
                    LawMode::Exact => return Err(e),
                    LawMode::ExactOrMonteCarlo { samples, seed } => {
                        let draws: Vec<f64> = (0..samples.max(2))
                            .into_par_iter()
                            .map(|s| {
                                let s = child_seed(seed, s as u64);
                                c.constant()
                                    + c.terms()
                                        .iter()
                                        .map(|(k, v)| v * model.innovation().atom_value(s, k.coords()))
                                        .sum::<f64>()
                            })
                            .collect();
                        let est = empirical_orlicz_norm(&draws, &params, seed)?;
                        (est.value, Some((est.ci_lo, est.ci_hi)), "monte-carlo")
                    }
                },
                Err(e) => return Err(e),
            }
        };
        let weight = (n.volume() as f64).powf(-1.5);
        partial_sum += weight * norm;
        terms.push(MwTerm {
            n: n.clone(),
            norm,
            ci,
            value: weight * norm,
            coefficient_l2: c.coefficient_l2(),
            method: method.to_string(),
        });
        projected.insert(n, c);
    }

    let mut stabilization = vec![0i64; d];
    for q in 0..d {
        let mut first = n_max[q];
        for t in (1..n_max[q]).rev() {
            let stable = projected.iter().filter(|(n, _)| n[q] > t).all(|(n, c)| &projected[&n.with(q, t)] == c);
            if stable {
                first = t;
            } else {
                break;
            }
        }
        stabilization[q] = first;
    }
    Ok(MwSeries {
        partial_sum,
        terms,
        stabilization_index: LatticeIndex::new(stabilization),
        predicted_index: &model.lag_extent() + &LatticeIndex::ones(d),
        params,
    })
}

/// `(Σ_{ℓ ≽ 0} (Σ_{0 ≼ i ≼ n-1} a_{i+ℓ})²)^{1/2}` by direct loops over the
/// coefficient table.
pub fn mw_inner_sum(coefficients: &BTreeMap<LatticeIndex, f64>, n: &LatticeIndex) -> f64 {
    let d = n.dim();
    let lag = coefficients.keys().fold(LatticeIndex::zeros(d), |acc, j| acc.join(j));
    let lag_box = Window::new(lag.coords().iter().map(|&c| c as usize + 1).collect()).expect("lags are ≽ 0");
    let sum_box = Window::new(n.coords().iter().map(|&c| c as usize).collect()).expect("n ≽ 1");
    let ones = LatticeIndex::ones(d);
    let mut total = 0.0;
    for l in lag_box.sites() {
        let l = &l - &ones;
        let mut inner = 0.0;
        for i in sum_box.sites() {
            let i = &i - &ones;
            if let Some(a) = coefficients.get(&(&i + &l)) {
                inner += a;
            }
        }
        total += inner * inner;
    }
    total.sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HannanSeries {
    /// `Σ_j |a_j| · ‖ξ_0‖_{2,2(d-1)}`.
    pub value: f64,
    pub innovation_norm: f64,
    pub coefficient_l1: f64,
    /// `Σ_j ‖π_{-j}(f)‖_{2,2(d-1)}` computed from the projections.
    pub projector_sum: f64,
}

pub fn hannan_series(model: &FieldModel) -> Result<HannanSeries> {
    let d = model.dim();
    let params = OrliczParams::for_dimension(d);
    let atom_law = model.innovation().atom_abs_law(d)?;
    let innovation_norm = orlicz_norm(&atom_law, &params)?;
    let coefficients = model.coefficients();
    let coefficient_l1: f64 = coefficients.values().map(|a| a.abs()).sum();
    let mut projector_sum = 0.0;
    for j in coefficients.keys() {
        let p = model.combination().hannan_projector(&-j);
        let law = match abs_law_of_combination(&p, model.innovation(), EXACT_LAW_CAP) {
            Ok(l) => l,
            Err(_) => atom_law.scale(p.coefficient_l1()),
        };
        projector_sum += orlicz_norm(&law, &params)?;
    }
    Ok(HannanSeries { value: coefficient_l1 * innovation_norm, innovation_norm, coefficient_l1, projector_sum })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::innovations::{sample_atoms, InnovationModel, MarginalLaw};
    use rand::{Rng, SeedableRng};

    fn li<const N: usize>(c: [i64; N]) -> LatticeIndex {
        LatticeIndex::from(c)
    }

    fn rademacher() -> InnovationModel {
        InnovationModel::iid(MarginalLaw::Rademacher).unwrap()
    }

    fn linear(d: usize, coefs: Vec<(LatticeIndex, f64)>) -> Arc<FieldModel> {
        Arc::new(FieldModel::causal_linear(d, rademacher(), coefs).unwrap())
    }

    fn random_linear(rng: &mut impl Rng, d: usize, support: usize, max_lag: i64) -> Arc<FieldModel> {
        let coefs = (0..support)
            .map(|_| {
                (LatticeIndex::new((0..d).map(|_| rng.gen_range(0..=max_lag)).collect()), rng.gen_range(-1.0..1.0))
            })
            .collect();
        linear(d, coefs)
    }

    #[test]
    fn u_k_examples() {
        let atom = FieldModel::iid_orthomartingale(1, MarginalLaw::Rademacher).unwrap();
        for k in 0..5 {
            assert!(u_k(&atom, k).unwrap().is_empty());
        }
        let m = linear(1, vec![(li([0]), 1.0), (li([1]), 1.0)]);
        assert_eq!(u_k(&m, 0).unwrap(), AtomCombination::atom(li([-1])));
        let two = FieldModel::iid_orthomartingale(2, MarginalLaw::Rademacher).unwrap();
        assert!(u_k(&two, 0).is_err());
    }

    #[test]
    fn d_k_matches_telescoping_martingale_operator() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(2);
        for _ in 0..20 {
            let m = random_linear(&mut rng, 1, 4, 5);
            for k in 0..5u32 {
                let t = d_k_i(&m, &li([k as i64 + 1]), AxisSet::full(1), Variant::Telescoping).unwrap();
                let mut direct = d_k(&m, k).unwrap();
                let mut telescoped = t.combination.clone();
                direct.prune(1e-12);
                telescoped.prune(1e-12);
                assert_eq!(direct.terms().len(), telescoped.terms().len());
                for (key, v) in direct.terms() {
                    assert!((v - telescoped.coefficient(key)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn d_k_i_examples() {
        let m = linear(1, vec![(li([0]), 0.7), (li([2]), -1.5)]);
        let f = m.combination().clone();
        let d0 = d_k_i(&m, &li([0]), AxisSet::full(1), Variant::Telescoping).unwrap();
        assert_eq!(d0.combination, f.sub(&f.conditional_projection(&li([-1]))));
        for k in 1..4u32 {
            let t = d_k_i(&m, &li([k as i64]), AxisSet::EMPTY, Variant::Telescoping).unwrap();
            assert_eq!(t.combination, u_k(&m, k).unwrap());
        }

        let atom = Arc::new(FieldModel::iid_orthomartingale(2, MarginalLaw::Rademacher).unwrap());
        let dec = Decomposition::new(atom, &[2, 3], Variant::Telescoping).unwrap();
        for t in dec.terms() {
            let top = t.k == li([0, 0]) && t.axes == AxisSet::full(2);
            assert_eq!(t.combination.is_empty(), !top, "k={} I={}", t.k, t.axes);
        }
    }

    #[test]
    fn general_formula_reduces_to_coboundary_for_k_positive() {
        let m = linear(1, vec![(li([0]), 1.0), (li([1]), 0.5), (li([3]), 0.25)]);
        for k in 1..4u32 {
            let g = d_k_i(&m, &li([k as i64]), AxisSet::EMPTY, Variant::General).unwrap();
            assert_eq!(g.combination, u_k(&m, k).unwrap());
        }
    }

    #[test]
    fn dim_two_listing_cross_check() {
        let m = linear(
            2,
            vec![(li([0, 0]), 1.0), (li([1, 0]), 0.5), (li([0, 1]), -0.75), (li([1, 1]), 0.3), (li([2, 2]), 0.2)],
        );
        let f = m.combination().clone();
        let proj = |c: &AtomCombination, a: i64, b: i64| c.conditional_projection(&li([a, b]));
        let s = |a: i64, b: i64| symbolic_partial_sum(&m, &li([a, b])).unwrap();

        // d_{0,0,[2]} = f - P_{0,-1} f - P_{-1,0} f + P_{-1,-1} f.
        let listed = f.sub(&proj(&f, 0, -1)).sub(&proj(&f, -1, 0)).add(&proj(&f, -1, -1));
        let t = d_k_i(&m, &li([0, 0]), AxisSet::full(2), Variant::Telescoping).unwrap();
        assert_eq!(t.combination, listed);

        // d_{k1,k2,∅} = P_{-2^k} S_{2^k} f for k ≽ 1.
        for (k1, k2) in [(1, 1), (2, 1), (1, 3)] {
            let listed = proj(&s(1 << k1, 1 << k2), -(1 << k1), -(1 << k2));
            let t = d_k_i(&m, &li([k1, k2]), AxisSet::EMPTY, Variant::Telescoping).unwrap();
            assert_eq!(t.combination, listed);
        }

        // d_{0,0,∅} = P_{-1,-1} S_{2,2} f is the literal closed formula.
        let listed = proj(&s(2, 2), -1, -1);
        let g = d_k_i(&m, &li([0, 0]), AxisSet::EMPTY, Variant::General).unwrap();
        assert_eq!(g.combination, listed);
        let t = d_k_i(&m, &li([0, 0]), AxisSet::EMPTY, Variant::Telescoping).unwrap();
        assert_ne!(t.combination, listed);
    }

    #[test]
    fn literal_formula_fails_on_the_atom_model() {
        // For f = ξ_0 every literal term vanishes while the left side does not.
        let atom = Arc::new(FieldModel::iid_orthomartingale(1, MarginalLaw::Rademacher).unwrap());
        let dec = Decomposition::new(Arc::clone(&atom), &[3], Variant::General).unwrap();
        assert!(dec.terms().iter().all(|t| t.combination.is_empty()));
        let r = sample_atoms(atom.innovation(), &dec.required_region(), 1).unwrap();
        let out = dec.verify(&r).unwrap();
        assert!(out.lhs >= 1.0 && out.rhs == 0.0 && !out.pass);
    }

    #[test]
    fn proof_listing_fails_on_a_lagged_atom() {
        // f = ξ_{-3} with every atom equal to +1: S_i = i, so the left side is 2^n.
        let n = 6u32;
        let m = linear(1, vec![(li([3]), 1.0)]);
        let listing = Decomposition::new(Arc::clone(&m), &[n], Variant::ProofListing).unwrap();
        let telescoping = Decomposition::new(Arc::clone(&m), &[n], Variant::Telescoping).unwrap();
        let region = listing.required_region().union(&telescoping.required_region());
        let r = Realization::from_values(region.clone(), vec![1.0; region.volume()], 0).unwrap();
        let bad = listing.verify(&r).unwrap();
        assert_eq!(bad.lhs, 64.0);
        assert!(!bad.pass, "{bad:?}");
        assert!(telescoping.verify(&r).unwrap().pass);
    }

    #[test]
    fn zero_field_passes_trivially() {
        let m = linear(2, vec![(li([1, 1]), 0.0)]);
        let dec = Decomposition::new(Arc::clone(&m), &[2, 2], Variant::Telescoping).unwrap();
        let r = sample_atoms(m.innovation(), &dec.required_region(), 3).unwrap();
        assert_eq!(dec.verify(&r).unwrap(), VerifyOutcome { lhs: 0.0, rhs: 0.0, pass: true });
    }

    #[test]
    fn atom_model_is_nearly_tight() {
        let atom = Arc::new(FieldModel::iid_orthomartingale(1, MarginalLaw::Rademacher).unwrap());
        let dec = Decomposition::new(Arc::clone(&atom), &[5], Variant::Telescoping).unwrap();
        for seed in 0..20 {
            let r = sample_atoms(atom.innovation(), &dec.required_region(), seed).unwrap();
            let out = dec.verify(&r).unwrap();
            assert_eq!(out.lhs, out.rhs);
        }
    }

    #[test]
    fn telescoping_invariants_hold_for_random_models() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(8);
        for d in 1..=2 {
            for _ in 0..10 {
                let m = random_linear(&mut rng, d, 3, 2);
                let n = vec![3u32; d];
                let dec = Decomposition::new(Arc::clone(&m), &n, Variant::Telescoping).unwrap();
                assert!(dec.terms().iter().all(|t| t.measurable && t.orthomartingale));
                let r = sample_atoms(m.innovation(), &dec.required_region(), rng.gen()).unwrap();
                assert!(dec.verify(&r).unwrap().pass);
            }
        }
    }

    #[test]
    fn margin_violation_is_explicit() {
        let m = linear(1, vec![(li([0]), 1.0), (li([2]), 1.0)]);
        let dec = Decomposition::new(Arc::clone(&m), &[3], Variant::Telescoping).unwrap();
        let r = sample_atoms(m.innovation(), &Region::new(li([0]), li([7])).unwrap(), 0).unwrap();
        assert!(matches!(dec.verify(&r), Err(Error::OutOfMargin { .. })));
    }

    #[test]
    fn mw_series_examples() {
        // E[S_n(ξ_0) | F_0] = ξ_0 for every n, so the series is a zeta partial sum.
        let atom = FieldModel::iid_orthomartingale(1, MarginalLaw::Rademacher).unwrap();
        let zeta: f64 = (1..=10).map(|n| (n as f64).powf(-1.5)).sum();
        assert!((mw_series(&atom, &li([10]), LawMode::Exact).unwrap().partial_sum - zeta).abs() < 1e-14);

        let m = FieldModel::causal_linear(1, rademacher(), [(li([0]), 1.0), (li([1]), 1.0)]).unwrap();
        let s = mw_series(&m, &li([10]), LawMode::Exact).unwrap();
        assert_eq!(s.stabilization_index, li([2]));
        assert_eq!(s.predicted_index, li([2]));
        let coefs = m.coefficients();
        for t in &s.terms {
            assert!((t.norm - mw_inner_sum(&coefs, &t.n)).abs() < 1e-12);
        }
        // n = 1: ξ_0 + ξ_{-1}; n ≥ 2: 2ξ_0 + ξ_{-1}.
        assert!((s.terms[0].norm - 2f64.sqrt()).abs() < 1e-15);
        assert!((s.terms[1].norm - 5f64.sqrt()).abs() < 1e-15);

        let zero = FieldModel::causal_linear(1, rademacher(), [(li([0]), 0.0)]).unwrap();
        assert_eq!(mw_series(&zero, &li([5]), LawMode::Exact).unwrap().partial_sum, 0.0);
    }

    #[test]
    fn mw_series_in_dimension_two_uses_exact_laws() {
        let m = FieldModel::causal_linear(2, rademacher(), [(li([0, 0]), 1.0), (li([1, 0]), 0.5)]).unwrap();
        let s = mw_series(&m, &li([3, 3]), LawMode::Exact).unwrap();
        assert!(s.terms.iter().all(|t| t.method == "exact"));
        assert_eq!(s.stabilization_index, li([2, 1]));
        assert_eq!(s.predicted_index, li([2, 1]));
    }

    #[test]
    fn hannan_examples() {
        let atom = FieldModel::iid_orthomartingale(1, MarginalLaw::Rademacher).unwrap();
        let h = hannan_series(&atom).unwrap();
        assert_eq!(h.value, h.innovation_norm);
        let two = FieldModel::causal_linear(1, rademacher(), [(li([0]), 2.0)]).unwrap();
        assert!((hannan_series(&two).unwrap().value - 2.0).abs() < 1e-12);
        let g = FieldModel::causal_linear(
            2,
            InnovationModel::iid(MarginalLaw::Gaussian).unwrap(),
            [(li([0, 1]), -1.5), (li([2, 0]), 0.5)],
        )
        .unwrap();
        let h = hannan_series(&g).unwrap();
        assert!((h.value - h.projector_sum).abs() <= 1e-9 * h.value);
    }
}
