//! Exact norms of finitely supported laws: `L^p`, weak `L^p`, and Luxemburg
//! norms for the Young functions `x^p (1 + ln(1+x))^r`, plus checkers for the
//! lemmas that relate them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{child_seed, CounterRng};

const PROB_TOL: f64 = 1e-12;
const BOOTSTRAP_RESAMPLES: usize = 200;

/// A law with finitely many atoms `(value, probability)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteLaw {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteLaw {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Empty("discrete law"));
        }
        let mut total = 0.0;
        for &(v, p) in &atoms {
            if !v.is_finite() {
                return Err(Error::NonFinite(v));
            }
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::InvalidLaw(format!("probability {p} must be positive")));
            }
            total += p;
        }
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidLaw(format!("probabilities sum to {total}")));
        }
        Ok(Self { atoms })
    }

    /// Builds a law from positive weights, normalizing them to sum to one.
    pub fn from_weights(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidLaw(format!("weights sum to {total}")));
        }
        let atoms: Vec<(f64, f64)> = atoms.into_iter().filter(|a| a.1 > 0.0).map(|(v, w)| (v, w / total)).collect();
        for &(v, _) in &atoms {
            if !v.is_finite() {
                return Err(Error::NonFinite(v));
            }
        }
        Ok(Self { atoms })
    }

    pub fn point(c: f64) -> Self {
        Self { atoms: vec![(c, 1.0)] }
    }

    pub fn rademacher() -> Self {
        Self { atoms: vec![(-1.0, 0.5), (1.0, 0.5)] }
    }

    /// The empirical measure of a sample.
    pub fn empirical(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("sample"));
        }
        if let Some(&x) = samples.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(x));
        }
        let w = 1.0 / samples.len() as f64;
        Ok(Self { atoms: samples.iter().map(|&x| (x, w)).collect() })
    }

    /// `|N(0,1)|` discretized by composite Simpson quadrature on `[0, 12]`.
    /// Mass beyond 12 is below `1e-32`.
    pub fn half_normal_quadrature() -> Self {
        const INTERVALS: usize = 24_000;
        const UPPER: f64 = 12.0;
        let h = UPPER / INTERVALS as f64;
        let density = |x: f64| (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * x * x).exp();
        let atoms = (0..=INTERVALS)
            .map(|k| {
                let x = k as f64 * h;
                let simpson = if k == 0 || k == INTERVALS {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                (x, simpson * h / 3.0 * density(x))
            })
            .collect();
        Self::from_weights(atoms).expect("quadrature weights are positive")
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn map(&self, g: impl Fn(f64) -> f64) -> Self {
        Self { atoms: self.atoms.iter().map(|&(v, p)| (g(v), p)).collect() }
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|&(v, p)| p * g(v)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|v| v)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expect(|v| (v - m) * (v - m))
    }

    pub fn prob(&self, event: impl Fn(f64) -> bool) -> f64 {
        self.atoms.iter().filter(|a| event(a.0)).map(|a| a.1).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.atoms.iter().map(|a| a.0.abs()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|a| a.0 == 0.0)
    }

    /// Sorted by value with equal values merged.
    pub fn canonical(&self) -> Self {
        let mut atoms = self.atoms.clone();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (v, p) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => merged.push((v, p)),
            }
        }
        Self { atoms: merged }
    }

    /// Splits every nonzero atom `v` into `v(1 - eps)` and `v(1 + eps)` with
    /// half the mass each.
    pub fn refine(&self, eps: f64) -> Self {
        let mut atoms = Vec::with_capacity(2 * self.atoms.len());
        for &(v, p) in &self.atoms {
            if v == 0.0 {
                atoms.push((v, p));
            } else {
                atoms.push((v * (1.0 - eps), p / 2.0));
                atoms.push((v * (1.0 + eps), p / 2.0));
            }
        }
        Self { atoms }
    }

    /// Law of `X + Y` for independent `X`, `Y`, merged.
    pub fn convolve(&self, other: &DiscreteLaw) -> Self {
        let mut atoms = Vec::with_capacity(self.atoms.len() * other.atoms.len());
        for &(a, p) in &self.atoms {
            for &(b, q) in &other.atoms {
                atoms.push((a + b, p * q));
            }
        }
        Self { atoms }.canonical()
    }
}

/// Parameters of `φ_{p,r}(x) = x^p (1 + ln(1+x))^r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrliczParams {
    pub p: f64,
    pub r: f64,
}

impl OrliczParams {
    pub fn new(p: f64, r: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::Domain(format!("Orlicz exponent p = {p} must be ≥ 1")));
        }
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::Domain(format!("Orlicz log power r = {r} must be ≥ 0")));
        }
        Ok(Self { p, r })
    }

    /// The `(2, 2(d-1))` space used by the maximal-function bound.
    pub fn for_dimension(d: usize) -> Self {
        Self { p: 2.0, r: 2.0 * (d as f64 - 1.0) }
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        let log_part = if self.r == 0.0 { 1.0 } else { (1.0 + x.ln_1p()).powf(self.r) };
        x.powf(self.p) * log_part
    }
}

pub fn phi(x: f64, params: &OrliczParams) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("φ requires x ≥ 0, got {x}")));
    }
    Ok(params.eval(x))
}

/// Luxemburg norm `inf{λ > 0 : E[φ(|X|/λ)] ≤ 1}`.
pub fn orlicz_norm(law: &DiscreteLaw, params: &OrliczParams) -> Result<f64> {
    scaled_orlicz_norm(law, params, 1.0)
}

/// Luxemburg norm for the Young function `a·φ`.
pub fn scaled_orlicz_norm(law: &DiscreteLaw, params: &OrliczParams, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("Young function scale {a} must be positive")));
    }
    let points: Vec<(f64, f64)> = law.atoms().iter().filter(|x| x.0 != 0.0).map(|&(v, p)| (v.abs(), p)).collect();
    if points.is_empty() {
        return Ok(0.0);
    }
    let g = |lambda: f64| -> f64 { a * points.iter().map(|&(v, p)| p * params.eval(v / lambda)).sum::<f64>() };
    Ok(luxemburg_root(g, law.max_abs()))
}

/// Smallest `λ` with `g(λ) ≤ 1` for a decreasing `g`, to about 1e-13 relative.
fn luxemburg_root(g: impl Fn(f64) -> f64, max_abs: f64) -> f64 {
    let mut hi = 2.0 * max_abs.max(1.0);
    while g(hi) > 1.0 {
        hi *= 2.0;
    }
    let mut lo = hi * 2f64.powi(-60);
    let mut guard = 0;
    while g(lo) <= 1.0 && guard < 2000 {
        hi = lo;
        lo *= 0.5;
        guard += 1;
    }
    while hi / lo > 1.0 + 1e-13 {
        let mid = if hi / lo > 2.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// `(E|X|^p)^{1/p}`.
pub fn lp_norm(law: &DiscreteLaw, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("L^p requires p ≥ 1, got {p}")));
    }
    Ok(law.expect(|v| v.abs().powf(p)).powf(1.0 / p))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakLpNorms {
    /// `sup_A P(A)^{1/p - 1} E[|X| 1_A]`.
    pub dual_norm: f64,
    /// `(sup_t t^p P(|X| > t))^{1/p}`.
    pub tail_sup: f64,
}

/// Both weak-`L^p` quantities, exact on discrete laws. The dual supremum is
/// taken over upper level sets of `|X|`: on each level the objective is
/// quasi-convex in `P(A)`, so the maximum sits at a level boundary.
pub fn weak_lp_norms(law: &DiscreteLaw, p: f64) -> Result<WeakLpNorms> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::Domain(format!("weak L^p requires 1 < p ≤ 2, got {p}")));
    }
    let mut levels = law.abs().canonical().atoms().to_vec();
    levels.reverse();
    let mut mass = 0.0;
    let mut first_moment = 0.0;
    let mut dual: f64 = 0.0;
    let mut tail: f64 = 0.0;
    for &(v, prob) in &levels {
        mass += prob;
        first_moment += v * prob;
        dual = dual.max(mass.powf(1.0 / p - 1.0) * first_moment);
        tail = tail.max(v.powf(p) * mass);
    }
    Ok(WeakLpNorms { dual_norm: dual, tail_sup: tail.powf(1.0 / p) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLemmaRatios {
    /// `‖X²‖_{1,r} / ‖X‖²_{2,r}` per law.
    pub square: Vec<f64>,
    /// `‖|X|^{1/2}‖_{2,r} / ‖X‖^{1/2}_{1,r}` per law.
    pub root: Vec<f64>,
    pub square_max: f64,
    pub root_max: f64,
}

impl PowerLemmaRatios {
    pub fn all_finite(&self) -> bool {
        self.square.iter().chain(&self.root).all(|x| x.is_finite())
    }
}

/// Both power-exchange ratios over a family. A zero law contributes ratio 1.
pub fn check_orlicz_power_lemma(laws: &[DiscreteLaw], r: f64) -> Result<PowerLemmaRatios> {
    let p1 = OrliczParams::new(1.0, r)?;
    let p2 = OrliczParams::new(2.0, r)?;
    let mut square = Vec::with_capacity(laws.len());
    let mut root = Vec::with_capacity(laws.len());
    for law in laws {
        let x = law.abs();
        let n2 = orlicz_norm(&x, &p2)?;
        let n1 = orlicz_norm(&x, &p1)?;
        if n2 == 0.0 || n1 == 0.0 {
            square.push(1.0);
            root.push(1.0);
            continue;
        }
        square.push(orlicz_norm(&x.map(|v| v * v), &p1)? / (n2 * n2));
        root.push(orlicz_norm(&x.map(f64::sqrt), &p2)? / n1.sqrt());
    }
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(PowerLemmaRatios { square_max: max(&square), root_max: max(&root), square, root })
}

/// `‖X‖_φ / ‖X‖_{aφ}` for the scaled Young function `aφ`.
pub fn scaled_young_ratio(law: &DiscreteLaw, params: &OrliczParams, a: f64) -> Result<f64> {
    let base = orlicz_norm(law, params)?;
    let scaled = scaled_orlicz_norm(law, params, a)?;
    if scaled == 0.0 {
        return Ok(1.0);
    }
    Ok(base / scaled)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesLemmaCheck {
    pub lhs: f64,
    /// `E[X^p (ln X)^{q+p/2} 1{X>1}]`.
    pub moment: f64,
    pub constant: f64,
    pub rhs_bound: f64,
    pub pass: bool,
    /// `Σ 2^k k^q P{X > 2^{k/2}}`.
    pub second_lhs: f64,
    /// `E[X² (ln X)^q 1{X>1}]`.
    pub second_moment: f64,
    pub second_constant: f64,
    pub second_rhs_bound: f64,
    pub second_pass: bool,
}

/// Tail-sum bounds for a nonnegative `X`, truncated at `k_max`.
///
/// The first bound uses the constant `(2/ln 2)^{q+p/2}`. The second uses
/// `2·(2/ln 2)^q`: on `{2^{j/2} < X ≤ 2^{(j+1)/2}}` the partial sum
/// `Σ_{k≤j} 2^k k^q` is below `2·2^j j^q ≤ 2 X² j^q` and `j ≤ 2 ln X / ln 2`.
pub fn check_series_lemma(law: &DiscreteLaw, p: f64, q: f64, k_max: u32) -> Result<SeriesLemmaCheck> {
    if !(p >= 1.0) || !(q >= 0.0) || k_max < 1 {
        return Err(Error::Domain(format!("series lemma requires p ≥ 1, q ≥ 0, k_max ≥ 1 (got {p}, {q}, {k_max})")));
    }
    if let Some(&(v, _)) = law.atoms().iter().find(|a| a.0 < 0.0) {
        return Err(Error::InvalidLaw(format!("series lemma needs X ≥ 0, found atom {v}")));
    }
    let ln2 = std::f64::consts::LN_2;
    let mut lhs = 0.0;
    let mut second_lhs = 0.0;
    for k in 1..=k_max {
        let kf = k as f64;
        let threshold = 2f64.powi(k as i32) / kf.sqrt();
        lhs += 2f64.powf(kf * p) * kf.powf(q) * law.prob(|x| x > threshold);
        let threshold2 = 2f64.powf(kf / 2.0);
        second_lhs += 2f64.powi(k as i32) * kf.powf(q) * law.prob(|x| x > threshold2);
    }
    let s = q + p / 2.0;
    let moment = law.expect(|x| if x > 1.0 { x.powf(p) * x.ln().powf(s) } else { 0.0 });
    let constant = (2.0 / ln2).powf(s);
    let second_moment = law.expect(|x| if x > 1.0 { x * x * x.ln().powf(q) } else { 0.0 });
    let second_constant = 2.0 * (2.0 / ln2).powf(q);
    let rhs_bound = constant * moment;
    let second_rhs_bound = second_constant * second_moment;
    Ok(SeriesLemmaCheck {
        lhs,
        moment,
        constant,
        rhs_bound,
        pass: lhs <= rhs_bound,
        second_lhs,
        second_moment,
        second_constant,
        second_rhs_bound,
        second_pass: second_lhs <= second_rhs_bound,
    })
}

/// An estimate from `n` observations with a bootstrap interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub std_error: f64,
    pub n: usize,
    pub seed: u64,
}

fn bootstrap(samples: &[f64], seed: u64, stat: impl Fn(&[f64]) -> Result<f64>) -> Result<NormEstimate> {
    if samples.is_empty() {
        return Err(Error::Empty("sample"));
    }
    if let Some(&x) = samples.iter().find(|x| !x.is_finite()) {
        return Err(Error::NonFinite(x));
    }
    let value = stat(samples)?;
    let n = samples.len();
    let mut resample = vec![0.0; n];
    let mut stats = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for b in 0..BOOTSTRAP_RESAMPLES {
        let mut rng = CounterRng::new(child_seed(seed, b as u64));
        for slot in resample.iter_mut() {
            *slot = samples[rng.gen_range(0..n)];
        }
        stats.push(stat(&resample)?);
    }
    let mean = stats.iter().sum::<f64>() / stats.len() as f64;
    let var = stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (stats.len() - 1) as f64;
    stats.sort_by(f64::total_cmp);
    let pick = |q: f64| stats[((q * (stats.len() - 1) as f64).round() as usize).min(stats.len() - 1)];
    Ok(NormEstimate {
        value,
        ci_lo: pick(0.025).min(value),
        ci_hi: pick(0.975).max(value),
        std_error: var.sqrt(),
        n,
        seed,
    })
}

/// `(mean |x|^p)^{1/p}` with a 95% percentile-bootstrap interval.
pub fn empirical_lp_norm(samples: &[f64], p: f64, seed: u64) -> Result<NormEstimate> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("L^p requires p ≥ 1, got {p}")));
    }
    bootstrap(samples, seed, |xs| Ok((xs.iter().map(|x| x.abs().powf(p)).sum::<f64>() / xs.len() as f64).powf(1.0 / p)))
}

/// Luxemburg norm of the empirical measure with a bootstrap interval.
pub fn empirical_orlicz_norm(samples: &[f64], params: &OrliczParams, seed: u64) -> Result<NormEstimate> {
    bootstrap(samples, seed, |xs| orlicz_norm(&DiscreteLaw::empirical(xs)?, params))
}

/// A family of nonnegative stress laws: a few fixed shapes followed by
/// random ones with log-uniform atoms spanning several decades.
pub fn law_family(seed: u64, count: usize) -> Vec<DiscreteLaw> {
    let mut fixed = vec![
        DiscreteLaw::point(1.0),
        DiscreteLaw::new(vec![(0.0, 0.5), (1.0, 0.5)]).unwrap(),
        DiscreteLaw::from_weights((1..=12).map(|k| (2f64.powi(k), 2f64.powi(-2 * k))).collect()).unwrap(),
        DiscreteLaw::from_weights((1..=30).map(|k| (k as f64, (k as f64).powf(-3.5))).collect()).unwrap(),
        DiscreteLaw::new(vec![(0.0, 0.99), (100.0, 0.01)]).unwrap(),
    ];
    fixed.truncate(count);
    let mut laws = fixed;
    let mut index = 0u64;
    while laws.len() < count {
        let mut rng = CounterRng::new(child_seed(seed, index));
        index += 1;
        let atoms = rng.gen_range(2..=12);
        let pts: Vec<(f64, f64)> = (0..atoms)
            .map(|_| {
                let v = if rng.gen_bool(0.15) { 0.0 } else { rng.gen_range(-3.0f64..7.0).exp() };
                (v, -rng.gen::<f64>().max(1e-12).ln())
            })
            .collect();
        laws.push(DiscreteLaw::from_weights(pts).unwrap());
    }
    laws
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn phi_examples() {
        let p = OrliczParams::new(3.0, 0.0).unwrap();
        assert_eq!(phi(2.0, &p).unwrap(), 8.0);
        let p22 = OrliczParams::new(2.0, 2.0).unwrap();
        assert_eq!(phi(0.0, &p22).unwrap(), 0.0);
        let expected = (1.0 + 2f64.ln()).powi(2);
        assert!((phi(1.0, &p22).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 2.8667).abs() < 1e-4);
        assert!(phi(-1.0, &p22).is_err());
        assert!(OrliczParams::new(0.5, 0.0).is_err());
        assert!(OrliczParams::new(2.0, -1.0).is_err());
    }

    #[test]
    fn orlicz_constant_and_zero() {
        let p = OrliczParams::new(2.0, 0.0).unwrap();
        let c = orlicz_norm(&DiscreteLaw::point(3.5), &p).unwrap();
        assert!(rel(c, 3.5) < 1e-12);
        assert_eq!(orlicz_norm(&DiscreteLaw::point(0.0), &p).unwrap(), 0.0);
    }

    #[test]
    fn orlicz_rademacher_matches_independent_root() {
        // Solve (1/λ)^2 (1 + ln(1 + 1/λ))^2 = 1, i.e. u(1 + ln(1+u)) = 1 with u = 1/λ,
        // by Newton iteration on h(u) = u(1 + ln(1+u)) - 1.
        let mut u: f64 = 0.5;
        for _ in 0..60 {
            let h = u * (1.0 + u.ln_1p()) - 1.0;
            let dh = 1.0 + u.ln_1p() + u / (1.0 + u);
            u -= h / dh;
        }
        let oracle = 1.0 / u;
        let p = OrliczParams::new(2.0, 2.0).unwrap();
        let got = orlicz_norm(&DiscreteLaw::rademacher(), &p).unwrap();
        assert!(rel(got, oracle) < 1e-11, "{got} vs {oracle}");
        assert!((got - 1.508_554_724_06).abs() < 1e-9, "{got}");
    }

    #[test]
    fn gaussian_quadrature_moments() {
        let g = DiscreteLaw::half_normal_quadrature();
        assert!((g.expect(|x| x * x) - 1.0).abs() < 1e-11);
        assert!((g.expect(|x| x) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-11);
        assert!((g.expect(|x| x.powi(4)) - 3.0).abs() < 1e-10);
        let p = OrliczParams::new(2.0, 0.0).unwrap();
        assert!(rel(orlicz_norm(&g, &p).unwrap(), 1.0) < 1e-10);
    }

    #[test]
    fn weak_lp_examples() {
        let c = weak_lp_norms(&DiscreteLaw::point(2.0), 1.5).unwrap();
        assert!(rel(c.dual_norm, 2.0) < 1e-15);
        assert!(rel(c.tail_sup, 2.0) < 1e-15);
        let two = DiscreteLaw::new(vec![(0.0, 0.5), (1.0, 0.5)]).unwrap();
        let w = weak_lp_norms(&two, 2.0).unwrap();
        assert!((w.tail_sup - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(weak_lp_norms(&two, 1.0).is_err());
    }

    #[test]
    fn dual_norm_matches_event_enumeration() {
        // Brute force over all unions of atoms of a small law.
        let law = DiscreteLaw::new(vec![(3.0, 0.1), (-1.0, 0.3), (0.5, 0.4), (2.0, 0.2)]).unwrap();
        for &p in &[1.25, 1.5, 2.0] {
            let mut best: f64 = 0.0;
            for mask in 1u32..16 {
                let (mut pa, mut ea) = (0.0, 0.0);
                for (k, &(v, pr)) in law.atoms().iter().enumerate() {
                    if mask >> k & 1 == 1 {
                        pa += pr;
                        ea += v.abs() * pr;
                    }
                }
                best = best.max(pa.powf(1.0 / p - 1.0) * ea);
            }
            let got = weak_lp_norms(&law, p).unwrap().dual_norm;
            assert!(rel(got, best) < 1e-14);
        }
    }

    #[test]
    fn power_lemma_trivial_cases() {
        for r in [0.0, 2.0] {
            let ratios = check_orlicz_power_lemma(&[DiscreteLaw::rademacher()], r).unwrap();
            if r == 0.0 {
                assert!((ratios.square_max - 1.0).abs() < 1e-12);
                assert!((ratios.root_max - 1.0).abs() < 1e-12);
            }
            assert!(ratios.all_finite());
        }
        let c = check_orlicz_power_lemma(&[DiscreteLaw::point(5.0)], 0.0).unwrap();
        assert!((c.square_max - 1.0).abs() < 1e-12 && (c.root_max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn series_lemma_examples() {
        let small = DiscreteLaw::new(vec![(0.3, 0.5), (1.0, 0.5)]).unwrap();
        let c = check_series_lemma(&small, 2.0, 1.0, 40).unwrap();
        assert_eq!((c.lhs, c.rhs_bound, c.pass), (0.0, 0.0, true));

        // P{X > 2} = 0 under the strict inequality, so the k = 1 term vanishes.
        let two = DiscreteLaw::point(2.0);
        let c = check_series_lemma(&two, 2.0, 0.0, 40).unwrap();
        assert_eq!(c.lhs, 0.0);
        assert!((c.rhs_bound - 8.0).abs() < 1e-12);
        assert!(c.pass && c.second_pass);

        let just_above = DiscreteLaw::point(2.0 + 1e-9);
        let c = check_series_lemma(&just_above, 2.0, 0.0, 40).unwrap();
        assert_eq!(c.lhs, 4.0);
        assert!(c.pass);
    }

    #[test]
    fn empirical_examples() {
        let e = empirical_lp_norm(&[2.5; 10], 1.5, 1).unwrap();
        assert!(rel(e.value, 2.5) < 1e-12);
        assert!(rel(e.ci_lo, 2.5) < 1e-12 && rel(e.ci_hi, 2.5) < 1e-12);
        assert_eq!(empirical_lp_norm(&[1.0, 3.0], 1.0, 1).unwrap().value, 2.0);
        assert!(empirical_lp_norm(&[], 1.0, 1).is_err());
        assert!(empirical_lp_norm(&[f64::NAN], 1.0, 1).is_err());
    }

    #[test]
    fn empirical_gaussian_second_moment() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = CounterRng::new(99);
        let xs: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let e = empirical_lp_norm(&xs, 2.0, 3).unwrap();
        assert!((e.value - 1.0).abs() <= 3.0 * e.std_error, "{e:?}");
    }

    fn law_strategy() -> impl Strategy<Value = DiscreteLaw> {
        prop::collection::vec((-50.0f64..50.0, 0.01f64..1.0), 1..8).prop_map(|a| DiscreteLaw::from_weights(a).unwrap())
    }

    fn independent_sum(x: &DiscreteLaw, y: &DiscreteLaw) -> DiscreteLaw {
        x.convolve(y)
    }

    proptest! {
        #[test]
        fn orlicz_is_homogeneous(law in law_strategy(), c in -20.0f64..20.0, r in 0.0f64..3.0) {
            let p = OrliczParams::new(2.0, r).unwrap();
            let base = orlicz_norm(&law, &p).unwrap();
            let scaled = orlicz_norm(&law.scale(c), &p).unwrap();
            prop_assert!((scaled - c.abs() * base).abs() <= 1e-9 * (1.0 + scaled));
        }

        #[test]
        fn orlicz_triangle(x in law_strategy(), y in law_strategy(), r in 0.0f64..3.0) {
            let p = OrliczParams::new(1.5, r).unwrap();
            let s = orlicz_norm(&independent_sum(&x, &y), &p).unwrap();
            let bound = orlicz_norm(&x, &p).unwrap() + orlicz_norm(&y, &p).unwrap();
            prop_assert!(s <= bound + 1e-9 * (1.0 + bound));
        }

        #[test]
        fn orlicz_root_is_tight(law in law_strategy(), r in 0.0f64..3.0) {
            prop_assume!(!law.is_zero());
            let p = OrliczParams::new(2.0, r).unwrap();
            let lambda = orlicz_norm(&law, &p).unwrap();
            let g = law.expect(|v| p.eval(v.abs() / lambda));
            prop_assert!((g - 1.0).abs() <= 1e-8);
        }

        #[test]
        fn orlicz_monotone_in_r(law in law_strategy(), r in 0.0f64..3.0, extra in 0.0f64..2.0) {
            let a = orlicz_norm(&law, &OrliczParams::new(2.0, r).unwrap()).unwrap();
            let b = orlicz_norm(&law, &OrliczParams::new(2.0, r + extra).unwrap()).unwrap();
            prop_assert!(a <= b * (1.0 + 1e-12));
        }

        #[test]
        fn weak_lp_chain(law in law_strategy(), p in 1.01f64..=2.0) {
            let w = weak_lp_norms(&law, p).unwrap();
            let strong = lp_norm(&law, p).unwrap();
            prop_assert!(w.tail_sup <= w.dual_norm * (1.0 + 1e-12) + 1e-12);
            prop_assert!(w.dual_norm <= strong * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn series_lemma_random(seed in 0u64..1000) {
            let law = &law_family(seed, 6)[5];
            for (p, q) in [(2.0, 0.0), (2.0, 2.0), (1.0, 1.0)] {
                let c = check_series_lemma(law, p, q, 40).unwrap();
                prop_assert!(c.pass, "{:?}", c);
                prop_assert!(c.second_pass, "{:?}", c);
            }
        }
    }
}
