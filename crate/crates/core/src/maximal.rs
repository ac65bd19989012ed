//! Windowed maximal functions `max |S_n| / (|n|^{1/2} ∏ LL(n_q)^{1/2})` and
//! the dyadic block statistics.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{render_sample, FieldModel, FieldSample};
use crate::lattice::{axis_normalizer, dyadic_candidates, LatticeIndex, Window};
use crate::rng::child_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximalResult {
    pub value: f64,
    pub argmax: LatticeIndex,
    pub window: Window,
    /// `i` of the index set `N_i`; `d` is the full window.
    pub restriction: usize,
}

/// Maximal function over `N_restriction ∩ window`.
pub fn maximal_function(sample: &FieldSample, restriction: usize) -> Result<MaximalResult> {
    maximal_function_within(sample, sample.window().sizes(), restriction)
}

/// Maximal function over the sub-window `1 ≼ n ≼ sizes` of a sample.
pub fn maximal_function_within(sample: &FieldSample, sizes: &[usize], restriction: usize) -> Result<MaximalResult> {
    let window = sample.window().sub_window(sizes)?;
    let d = window.dim();
    if restriction > d {
        return Err(Error::Domain(format!("restriction {restriction} exceeds dimension {d}")));
    }
    let candidates = dyadic_candidates(&window, restriction);
    let norms: Vec<Vec<f64>> =
        candidates.iter().map(|c| c.iter().map(|&n| axis_normalizer(n as u64)).collect()).collect();
    let table = sample.table();

    let mut best = -1.0;
    let mut argmax = vec![0usize; d];
    let mut cursor = vec![0usize; d];
    let mut index = vec![0i64; d];
    'outer: loop {
        let mut denom = 1.0;
        for q in 0..d {
            index[q] = candidates[q][cursor[q]];
            denom *= norms[q][cursor[q]];
        }
        let ratio = table.cumulative_unchecked(&index).abs() / denom;
        if ratio > best {
            best = ratio;
            argmax.copy_from_slice(&cursor);
        }
        let mut q = d;
        loop {
            if q == 0 {
                break 'outer;
            }
            q -= 1;
            cursor[q] += 1;
            if cursor[q] < candidates[q].len() {
                break;
            }
            cursor[q] = 0;
        }
    }
    Ok(MaximalResult {
        value: best,
        argmax: LatticeIndex::new((0..d).map(|q| candidates[q][argmax[q]]).collect()),
        window,
        restriction,
    })
}

/// `L(max(n, 1))`: the exponent is clamped at 1 so that `n = 0` normalizes
/// by `L(1) = 1`.
pub fn exponent_log(n: u32) -> f64 {
    (n.max(1) as f64).ln().max(1.0)
}

fn dyadic_block_sum(sample: &FieldSample, block: &[i64]) -> Result<f64> {
    let window = sample.window();
    for (q, &b) in block.iter().enumerate() {
        if b < 1 || b as usize > window.sizes()[q] {
            return Err(Error::OutOfWindow { index: LatticeIndex::new(block.to_vec()) });
        }
    }
    Ok(sample.table().cumulative_unchecked(block))
}

/// `Y_n = |S_{2^n}| / (|2^n|^{1/2} ∏ L(n_q)^{1/2})`.
pub fn y_statistic(sample: &FieldSample, exponents: &[u32]) -> Result<f64> {
    let d = sample.window().dim();
    if exponents.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: exponents.len() });
    }
    if exponents.iter().any(|&e| e > 62) {
        return Err(Error::Domain(format!("exponents {exponents:?} are too large")));
    }
    let block: Vec<i64> = exponents.iter().map(|&e| 1i64 << e).collect();
    let s = dyadic_block_sum(sample, &block)?;
    let denom: f64 = exponents.iter().map(|&e| (2f64.powi(e as i32) * exponent_log(e)).sqrt()).product();
    Ok(s.abs() / denom)
}

/// `Y_{n,i}`: block `2^{n - (n_i - 1) e_i}`, so extent 2 along `axis`, and
/// axis `axis` left out of the normalization.
pub fn y_axis_statistic(sample: &FieldSample, exponents: &[u32], axis: usize) -> Result<f64> {
    let d = sample.window().dim();
    if axis >= d || exponents.len() != d {
        return Err(Error::Domain(format!("axis {axis} or exponents {exponents:?} invalid for d = {d}")));
    }
    let block: Vec<i64> = (0..d).map(|q| if q == axis { 2 } else { 1i64 << exponents[q] }).collect();
    let s = dyadic_block_sum(sample, &block)?;
    let denom: f64 = (0..d)
        .filter(|&q| q != axis)
        .map(|q| (2f64.powi(exponents[q] as i32) * exponent_log(exponents[q])).sqrt())
        .product();
    Ok(s.abs() / denom)
}

/// `Z_i = sup_n |Y_{n,i}|` over the dyadic exponents that fit in the window.
/// `Y_{n,i}` does not depend on `n_i`.
pub fn z_statistic(sample: &FieldSample, axis: usize) -> Result<f64> {
    let window = sample.window();
    let d = window.dim();
    if axis >= d {
        return Err(Error::Domain(format!("axis {axis} invalid for d = {d}")));
    }
    if window.sizes()[axis] < 2 {
        return Err(Error::Domain(format!("axis {axis} needs extent ≥ 2 for Z")));
    }
    let max_exp: Vec<u32> = window
        .sizes()
        .iter()
        .enumerate()
        .map(|(q, &s)| if q == axis { 0 } else { usize::BITS - 1 - s.leading_zeros() })
        .collect();
    let mut exps = vec![0u32; d];
    let mut best: f64 = 0.0;
    loop {
        best = best.max(y_axis_statistic(sample, &exps, axis)?);
        let mut q = d;
        loop {
            if q == 0 {
                return Ok(best);
            }
            q -= 1;
            if exps[q] < max_exp[q] {
                exps[q] += 1;
                break;
            }
            exps[q] = 0;
        }
    }
}

/// `M_full / M_dyadic` with `0/0 = 1`.
pub fn dyadic_ratio(full: f64, dyadic: f64) -> f64 {
    if full == 0.0 && dyadic == 0.0 {
        1.0
    } else {
        full / dyadic
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    pub window: Vec<usize>,
    pub ratios: Vec<f64>,
    pub max: f64,
    pub median: f64,
    pub q90: f64,
    pub q99: f64,
    /// `M_dyadic ≤ M_full` held on every replication.
    pub ordered: bool,
}

/// Nearest-rank quantile of a sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Ratios `M_full / M_dyadic` over nested dyadic windows. Each replication
/// renders the largest window once; smaller windows are its corners.
pub fn dyadic_ratio_diagnostic(
    model: &Arc<FieldModel>,
    windows: &[Vec<usize>],
    replications: usize,
    seed: u64,
) -> Result<Vec<RatioSummary>> {
    if windows.is_empty() || replications == 0 {
        return Err(Error::Empty("windows or replications"));
    }
    let d = model.dim();
    for w in windows {
        if w.len() != d || w.iter().any(|&s| !s.is_power_of_two()) {
            return Err(Error::Domain(format!("window {w:?} is not a dyadic window of dimension {d}")));
        }
    }
    let outer: Vec<usize> = (0..d).map(|q| windows.iter().map(|w| w[q]).max().unwrap()).collect();
    let outer = Window::new(outer)?;
    let per_rep: Vec<Vec<(f64, f64)>> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let sample = render_sample(model, &outer, child_seed(seed, rep as u64))?;
            windows
                .iter()
                .map(|w| {
                    let full = maximal_function_within(&sample, w, d)?.value;
                    let dyadic = maximal_function_within(&sample, w, 0)?.value;
                    Ok((full, dyadic))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    Ok(windows
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let ordered = per_rep.iter().all(|r| r[k].1 <= r[k].0);
            let ratios: Vec<f64> = per_rep.iter().map(|r| dyadic_ratio(r[k].0, r[k].1)).collect();
            let mut sorted = ratios.clone();
            sorted.sort_by(f64::total_cmp);
            RatioSummary {
                window: w.clone(),
                max: *sorted.last().unwrap(),
                median: quantile_sorted(&sorted, 0.5),
                q90: quantile_sorted(&sorted, 0.9),
                q99: quantile_sorted(&sorted, 0.99),
                ratios,
                ordered,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::innovations::MarginalLaw;
    use crate::lattice::{dyadic_indices, lil_normalizer};
    use proptest::prelude::*;

    fn sample(sizes: Vec<usize>, values: Vec<f64>) -> FieldSample {
        FieldSample::from_values(Window::new(sizes).unwrap(), values, 0).unwrap()
    }

    fn brute_max(s: &FieldSample, i: usize) -> f64 {
        dyadic_indices(s.window(), i)
            .unwrap()
            .map(|n| s.partial_sum(&n).unwrap().abs() / lil_normalizer(&n).unwrap())
            .fold(0.0, f64::max)
    }

    #[test]
    fn maximal_examples() {
        let z = sample(vec![4, 4], vec![0.0; 16]);
        let r = maximal_function(&z, 2).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.argmax, LatticeIndex::ones(2));

        let ones = sample(vec![4], vec![1.0; 4]);
        let r = maximal_function(&ones, 1).unwrap();
        assert_eq!(r.value, 2.0);
        assert_eq!(r.argmax, LatticeIndex::from([4]));
    }

    #[test]
    fn y_examples() {
        let z = sample(vec![8], vec![0.0; 8]);
        assert_eq!(y_statistic(&z, &[3]).unwrap(), 0.0);
        let ones = sample(vec![8], vec![1.0; 8]);
        let expected = 8.0 / (8f64.sqrt() * 3f64.ln().sqrt());
        assert!((y_statistic(&ones, &[3]).unwrap() - expected).abs() < 1e-14);
        let v = sample(vec![8], (1..=8).map(|v| v as f64).collect());
        assert_eq!(y_statistic(&v, &[0]).unwrap(), 1.0);
        assert!(y_statistic(&ones, &[4]).is_err());
    }

    #[test]
    fn z_in_dimension_one_is_the_two_block() {
        let v = sample(vec![8], vec![0.5, -2.0, 3.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(z_statistic(&v, 0).unwrap(), 1.5);
        let z = sample(vec![8], vec![0.0; 8]);
        assert_eq!(z_statistic(&z, 0).unwrap(), 0.0);
    }

    #[test]
    fn z_in_dimension_two_matches_enumeration() {
        let vals: Vec<f64> = (0..32).map(|k| ((k * 7) % 11) as f64 - 5.0).collect();
        let s = sample(vec![4, 8], vals);
        for axis in 0..2 {
            let other = 1 - axis;
            let max_e = if other == 0 { 2 } else { 3 };
            let mut best: f64 = 0.0;
            for e in 0..=max_e {
                let mut n = [0i64; 2];
                n[axis] = 2;
                n[other] = 1 << e;
                let denom = (2f64.powi(e) * exponent_log(e as u32)).sqrt();
                best = best.max(s.partial_sum(&LatticeIndex::from(n)).unwrap().abs() / denom);
            }
            assert_eq!(z_statistic(&s, axis).unwrap(), best);
        }
    }

    #[test]
    fn ratio_convention() {
        assert_eq!(dyadic_ratio(0.0, 0.0), 1.0);
        let m = Arc::new(
            FieldModel::causal_linear(
                1,
                crate::innovations::InnovationModel::iid(MarginalLaw::Rademacher).unwrap(),
                [(LatticeIndex::from([0]), 0.0)],
            )
            .unwrap(),
        );
        let t = dyadic_ratio_diagnostic(&m, &[vec![8]], 3, 1).unwrap();
        assert!(t[0].ratios.iter().all(|&r| r == 1.0));
    }

    #[test]
    fn ratio_diagnostic_is_ordered() {
        let m = Arc::new(FieldModel::product_orthomartingale(vec![MarginalLaw::Rademacher]).unwrap());
        let t = dyadic_ratio_diagnostic(&m, &[vec![8], vec![64]], 40, 5).unwrap();
        for s in &t {
            assert!(s.ordered);
            assert!(s.ratios.iter().all(|&r| r >= 1.0));
        }
    }

    fn field() -> impl Strategy<Value = FieldSample> {
        prop::collection::vec(1usize..=9, 1..=3)
            .prop_flat_map(|sizes| {
                let n = sizes.iter().product::<usize>();
                (Just(sizes), prop::collection::vec(-3.0f64..3.0, n))
            })
            .prop_map(|(s, v)| sample(s, v))
    }

    proptest! {
        #[test]
        fn matches_brute_force_and_nests(s in field()) {
            let d = s.window().dim();
            let mut prev = 0.0;
            for i in 0..=d {
                let r = maximal_function(&s, i).unwrap();
                prop_assert!((r.value - brute_max(&s, i)).abs() <= 1e-12 * (1.0 + r.value));
                prop_assert!(r.value >= prev);
                let at = s.partial_sum(&r.argmax).unwrap().abs() / lil_normalizer(&r.argmax).unwrap();
                prop_assert_eq!(at, r.value);
                prev = r.value;
            }
        }

        #[test]
        fn homogeneous(s in field(), c in -5.0f64..5.0) {
            let d = s.window().dim();
            let a = maximal_function(&s, d).unwrap().value;
            let b = maximal_function(&s.scaled(c).unwrap(), d).unwrap().value;
            prop_assert!((b - c.abs() * a).abs() <= 1e-12 * (1.0 + b));
        }

        #[test]
        fn monotone_in_window(s in field()) {
            let d = s.window().dim();
            let full = maximal_function(&s, d).unwrap().value;
            let inner: Vec<usize> = s.window().sizes().iter().map(|&x| x.div_ceil(2)).collect();
            prop_assert!(maximal_function_within(&s, &inner, d).unwrap().value <= full);
        }
    }
}
