//! Monte Carlo and exact checkers: the martingale deviation inequality and
//! the weak-type transfer lemma.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::innovations::MarginalLaw;
use crate::rng::{child_seed, CounterRng};

/// Two-sided 99% normal quantile.
pub const WILSON_Z99: f64 = 2.575_829_303_548_900_4;

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let centre = (phat + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

pub fn wilson_upper(successes: u64, trials: u64) -> f64 {
    wilson_interval(successes, trials, WILSON_Z99).1
}

/// `2 exp(-x²/(2y))`.
pub fn deviation_bound(x: f64, y: f64) -> f64 {
    2.0 * (-x * x / (2.0 * y)).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationPoint {
    pub x: f64,
    pub y: f64,
    pub count: u64,
    pub trials: u64,
    pub probability: f64,
    pub lower: f64,
    pub upper: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationCheck {
    pub n: usize,
    pub points: Vec<DeviationPoint>,
    /// Per replication, `Σ d_j`.
    pub sums: Vec<f64>,
    /// Per replication, `Σ (d_j² + E[d_j² | F_{j-1}])`.
    pub quadratic: Vec<f64>,
    pub pass: bool,
}

fn law_variance(law: &MarginalLaw) -> f64 {
    law.discrete_law().map_or(1.0, |l| l.expect(|v| v * v))
}

/// `(Σ d_j, Σ (d_j² + σ²))` for one replication of `n` iid draws.
pub fn deviation_draw(n: usize, law: &MarginalLaw, seed: u64) -> (f64, f64) {
    let var = law_variance(law);
    let mut rng = CounterRng::new(seed);
    let mut s = 0.0;
    let mut q = 0.0;
    for _ in 0..n {
        let x = law.sample(&mut rng);
        s += x;
        q += x * x + var;
    }
    (s, q)
}

/// Frequency of `{|Σ d_j| > x} ∩ {Σ (d_j² + E[d_j² | F_{j-1}]) ≤ y}` with a
/// Wilson 99% upper bound, compared to `2 exp(-x²/(2y))` at every grid point.
pub fn check_deviation_inequality(
    n: usize,
    law: &MarginalLaw,
    xs: &[f64],
    ys: &[f64],
    replications: usize,
    seed: u64,
) -> Result<DeviationCheck> {
    law.validate()?;
    if n == 0 || replications == 0 {
        return Err(Error::Empty("deviation length or replications"));
    }
    if xs.iter().chain(ys).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Domain("deviation grid values must be positive".into()));
    }
    let draws: Vec<(f64, f64)> =
        (0..replications).into_par_iter().map(|rep| deviation_draw(n, law, child_seed(seed, rep as u64))).collect();
    let mut points = Vec::with_capacity(xs.len() * ys.len());
    for &x in xs {
        for &y in ys {
            let count = draws.iter().filter(|(s, q)| s.abs() > x && *q <= y).count() as u64;
            let trials = replications as u64;
            let (lower, upper) = wilson_interval(count, trials, WILSON_Z99);
            let bound = deviation_bound(x, y);
            points.push(DeviationPoint {
                x,
                y,
                count,
                trials,
                probability: count as f64 / trials as f64,
                lower,
                upper,
                bound,
                pass: upper <= bound,
            });
        }
    }
    Ok(DeviationCheck {
        n,
        pass: points.iter().all(|p| p.pass),
        points,
        sums: draws.iter().map(|d| d.0).collect(),
        quadratic: draws.iter().map(|d| d.1).collect(),
    })
}

/// Exact probability of the deviation event for a discrete law, by
/// convolving the joint law of `(Σ d_j, Σ (d_j² + σ²))`.
pub fn exact_deviation_probability(n: usize, law: &MarginalLaw, x: f64, y: f64, cap: usize) -> Result<f64> {
    let atoms = law
        .discrete_law()
        .ok_or_else(|| Error::InvalidLaw("exact deviation probability needs a discrete law".into()))?;
    let var = law_variance(law);
    let mut states: Vec<(f64, f64, f64)> = vec![(0.0, 0.0, 1.0)];
    for _ in 0..n {
        let mut next = Vec::with_capacity(states.len() * atoms.atoms().len());
        for &(s, q, p) in &states {
            for &(v, w) in atoms.atoms() {
                next.push((s + v, q + v * v + var, p * w));
            }
        }
        next.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        states.clear();
        for (s, q, p) in next {
            match states.last_mut() {
                Some(last) if last.0 == s && last.1 == q => last.2 += p,
                _ => states.push((s, q, p)),
            }
        }
        if states.len() > cap {
            return Err(Error::ExactLawTooLarge { outcomes: states.len() as f64, cap });
        }
    }
    Ok(states.iter().filter(|(s, q, _)| s.abs() > x && *q <= y).map(|t| t.2).sum())
}

/// A pair `(X, Y)` of nonnegative variables on a finite probability space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointLaw {
    /// `(probability, x, y)` outcomes.
    pub outcomes: Vec<(f64, f64, f64)>,
}

impl JointLaw {
    pub fn new(outcomes: Vec<(f64, f64, f64)>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::Empty("joint law"));
        }
        for &(p, x, y) in &outcomes {
            if !(p > 0.0) || !(x >= 0.0) || !(y >= 0.0) || !x.is_finite() || !y.is_finite() {
                return Err(Error::InvalidLaw(format!("outcome ({p}, {x}, {y}) is not a valid nonnegative atom")));
            }
        }
        let total: f64 = outcomes.iter().map(|o| o.0).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidLaw(format!("probabilities sum to {total}")));
        }
        Ok(Self { outcomes })
    }

    /// `min over x > 0 of E[Y 1{X ≥ x}] - x P{X > x}`. On a finite space the
    /// left side is constant on each `(v_{k-1}, v_k]` and the right side
    /// increases towards `v_k P{X ≥ v_k}`, so atoms suffice.
    pub fn hypothesis_slack(&self) -> f64 {
        let mut slack = f64::INFINITY;
        for &(_, v, _) in &self.outcomes {
            if v <= 0.0 {
                continue;
            }
            let mut mass = 0.0;
            let mut weighted = 0.0;
            for &(p, x, y) in &self.outcomes {
                if x >= v {
                    mass += p;
                    weighted += p * y;
                }
            }
            slack = slack.min(weighted - v * mass);
        }
        slack
    }

    pub fn satisfies_hypothesis(&self) -> bool {
        let scale = self.outcomes.iter().map(|o| o.1.max(o.2)).fold(1.0, f64::max);
        self.hypothesis_slack() >= -1e-12 * scale
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakTypePoint {
    pub t: f64,
    /// `P{X > 2t}`.
    pub lhs: f64,
    /// `E[(Y/t - 1)^+]`.
    pub rhs: f64,
    /// `∫_1^∞ P{Y > st} ds` by integrating the step survival function.
    pub rhs_step: f64,
    pub pass: bool,
}

/// Exact check of `P{X > 2t} ≤ ∫_1^∞ P{Y > st} ds` on every grid point,
/// after checking `x P{X > x} ≤ E[Y 1{X ≥ x}]` for all `x > 0`.
pub fn check_weak_type_transfer(law: &JointLaw, ts: &[f64]) -> Result<Vec<WeakTypePoint>> {
    if !law.satisfies_hypothesis() {
        return Err(Error::InvalidLaw(format!(
            "pair fails the weak-type hypothesis (slack {})",
            law.hypothesis_slack()
        )));
    }
    let mut ys: Vec<(f64, f64)> = law.outcomes.iter().map(|o| (o.2, o.0)).collect();
    ys.sort_by(|a, b| a.0.total_cmp(&b.0));
    ts.iter()
        .map(|&t| {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::Domain(format!("t = {t} must be positive")));
            }
            let lhs: f64 = law.outcomes.iter().filter(|o| o.1 > 2.0 * t).map(|o| o.0).sum();
            let rhs: f64 = law.outcomes.iter().map(|o| o.0 * (o.2 / t - 1.0).max(0.0)).sum();
            let mut rhs_step = 0.0;
            let mut left = 1.0;
            let mut tail: f64 = ys.iter().filter(|(y, _)| y / t > 1.0).map(|a| a.1).sum();
            for &(y, p) in &ys {
                let s = y / t;
                if s <= 1.0 {
                    continue;
                }
                rhs_step += (s - left) * tail;
                left = s;
                tail -= p;
            }
            Ok(WeakTypePoint { t, lhs, rhs, rhs_step, pass: lhs <= rhs * (1.0 + 1e-12) + 1e-15 })
        })
        .collect()
}

/// Random finite pairs satisfying the hypothesis: `Y = X` for even indices,
/// `Y = X + extra` with `extra ≥ 0` for odd ones.
pub fn random_joint_laws(seed: u64, count: usize) -> Vec<JointLaw> {
    (0..count)
        .map(|i| {
            let mut rng = CounterRng::new(child_seed(seed, i as u64));
            let atoms = rng.gen_range(1..=10);
            let weights: Vec<f64> = (0..atoms).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = weights.iter().sum();
            let outcomes = weights
                .iter()
                .map(|w| {
                    let x = if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(-2.0f64..3.0).exp() };
                    let y = if i % 2 == 0 { x } else { x + rng.gen_range(0.0..2.0) };
                    (w / total, x, y)
                })
                .collect();
            JointLaw::new(outcomes).expect("valid by construction")
        })
        .collect()
}
