//! Experiment runners behind [`run`].

use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checks::{check_deviation_inequality, check_weak_type_transfer, random_joint_laws};
use super::config::{DecompositionSpec, ExperimentConfig, ExperimentKind, ModelSpec};
use super::report::{Check, Record, Report};
use crate::decomposition::{hannan_series, mw_inner_sum, mw_series, Decomposition, LawMode, Variant, VerifyOutcome};
use crate::error::{Error, Result};
use crate::field::{render_sample, FieldModel};
use crate::innovations::sample_atoms;
use crate::lattice::{LatticeIndex, Window};
use crate::maximal::{dyadic_ratio_diagnostic, maximal_function_within, RatioSummary};
use crate::norms::{
    check_orlicz_power_lemma, check_series_lemma, empirical_lp_norm, empirical_orlicz_norm, law_family, lp_norm,
    orlicz_norm, weak_lp_norms, NormEstimate, OrliczParams,
};
use crate::rng::{child_seed, CounterRng};

/// Environment variable with the default worker count.
pub const THREADS_ENV: &str = "LILFIELD_THREADS";

/// Stream separating random model coefficients from atom draws.
const COEFFICIENT_STREAM: u64 = 0x636f_6566;

const GROWTH_BOOTSTRAP: usize = 200;

fn window_label(sizes: &[usize]) -> String {
    sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("x")
}

fn index_label(n: &LatticeIndex) -> String {
    n.coords().iter().map(|s| s.to_string()).collect::<Vec<_>>().join("x")
}

fn sizes_of(exponents: &[u32]) -> Vec<usize> {
    exponents.iter().map(|&e| 1usize << e).collect()
}

/// Seed for the coefficients of replication `rep` of a random model.
pub fn coefficient_seed(seed: u64, rep: usize) -> u64 {
    child_seed(child_seed(seed, COEFFICIENT_STREAM), rep as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowEstimate {
    pub window: Vec<usize>,
    /// `M_W` per replication.
    pub values: Vec<f64>,
    pub lp: NormEstimate,
    pub orlicz: Option<NormEstimate>,
    /// `‖M_W‖_p / ‖M_{W'}‖_p` against the previous window, with a paired
    /// bootstrap interval.
    pub growth: Option<(f64, f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximalEstimate {
    pub p: f64,
    pub windows: Vec<WindowEstimate>,
    /// `‖ξ_0‖_{2,2(d-1)}`, when the innovation law is exact.
    pub innovation_norm: Option<f64>,
}

impl MaximalEstimate {
    pub fn last_growth(&self) -> Option<f64> {
        self.windows.last().and_then(|w| w.growth.map(|g| g.0))
    }
}

fn lp_of(values: &[f64], p: f64) -> f64 {
    (values.iter().map(|v| v.abs().powf(p)).sum::<f64>() / values.len() as f64).powf(1.0 / p)
}

/// Monte Carlo `‖M_W(f)‖_p` over a schedule of dyadic windows. Each
/// replication renders the largest window once; smaller windows are its
/// corners, so successive estimates are paired.
pub fn estimate_maximal_norms(
    model: &Arc<FieldModel>,
    schedule: &[Vec<u32>],
    p: f64,
    orlicz_r: Option<f64>,
    replications: usize,
    seed: u64,
) -> Result<MaximalEstimate> {
    let d = model.dim();
    if schedule.is_empty() || replications == 0 {
        return Err(Error::Empty("schedule or replications"));
    }
    if schedule.iter().any(|w| w.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: schedule.iter().map(Vec::len).find(|&l| l != d).unwrap(),
        });
    }
    let windows: Vec<Vec<usize>> = schedule.iter().map(|w| sizes_of(w)).collect();
    let outer = Window::new((0..d).map(|q| windows.iter().map(|w| w[q]).max().unwrap()).collect())?;
    let per_rep: Vec<Vec<f64>> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let sample = render_sample(model, &outer, child_seed(seed, rep as u64))?;
            windows.iter().map(|w| Ok(maximal_function_within(&sample, w, d)?.value)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let orlicz_params = orlicz_r.map(|r| OrliczParams::new(2.0, r)).transpose()?;
    let mut out = Vec::with_capacity(windows.len());
    for (k, w) in windows.iter().enumerate() {
        let values: Vec<f64> = per_rep.iter().map(|r| r[k]).collect();
        let lp = empirical_lp_norm(&values, p, child_seed(seed ^ 0x6c70, k as u64))?;
        let orlicz = orlicz_params
            .as_ref()
            .map(|params| empirical_orlicz_norm(&values, params, child_seed(seed ^ 0x6f72, k as u64)))
            .transpose()?;
        let growth = (k > 0).then(|| {
            let prev: Vec<f64> = per_rep.iter().map(|r| r[k - 1]).collect();
            let ratio = |a: &[f64], b: &[f64]| {
                let den = lp_of(b, p);
                if den == 0.0 {
                    1.0
                } else {
                    lp_of(a, p) / den
                }
            };
            let point = ratio(&values, &prev);
            let mut boots = Vec::with_capacity(GROWTH_BOOTSTRAP);
            let mut a = vec![0.0; replications];
            let mut b = vec![0.0; replications];
            for i in 0..GROWTH_BOOTSTRAP {
                let mut rng = CounterRng::new(child_seed(seed ^ 0x6772, (k * GROWTH_BOOTSTRAP + i) as u64));
                for j in 0..replications {
                    let pick = rng.gen_range(0..replications);
                    a[j] = values[pick];
                    b[j] = prev[pick];
                }
                boots.push(ratio(&a, &b));
            }
            boots.sort_by(f64::total_cmp);
            let at = |q: f64| boots[((q * (boots.len() - 1) as f64).round()) as usize];
            (point, at(0.025).min(point), at(0.975).max(point))
        });
        out.push(WindowEstimate { window: w.clone(), values, lp, orlicz, growth });
    }
    let innovation_norm = model
        .innovation()
        .atom_abs_law(d)
        .ok()
        .map(|law| orlicz_norm(&law, &OrliczParams::for_dimension(d)))
        .transpose()?;
    Ok(MaximalEstimate { p, windows: out, innovation_norm })
}

/// Per replication and variant, the pointwise inequality on fresh atoms.
/// Random models draw new coefficients for every replication.
pub fn verify_decomposition_runs(
    spec: &ModelSpec,
    d: usize,
    exponents: &[u32],
    variants: &[Variant],
    replications: usize,
    seed: u64,
) -> Result<Vec<Vec<VerifyOutcome>>> {
    let build = |model: Arc<FieldModel>| -> Result<Vec<Decomposition>> {
        variants.iter().map(|&v| Decomposition::new(Arc::clone(&model), exponents, v)).collect()
    };
    let fixed = if spec.is_random() { None } else { Some(build(spec.build(d, seed)?)?) };
    (0..replications)
        .into_par_iter()
        .map(|rep| {
            let owned;
            let decs = match &fixed {
                Some(decs) => decs,
                None => {
                    owned = build(spec.build(d, coefficient_seed(seed, rep))?)?;
                    &owned
                }
            };
            let region = decs
                .iter()
                .map(Decomposition::required_region)
                .reduce(|a, b| a.union(&b))
                .ok_or(Error::Empty("variants"))?;
            let atoms = sample_atoms(decs[0].model().innovation(), &region, child_seed(seed, rep as u64))?;
            decs.iter().map(|dec| dec.verify(&atoms)).collect()
        })
        .collect()
}

fn build_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let threads = threads.or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()));
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    builder.build().map_err(|e| Error::Io(format!("thread pool: {e}")))
}

/// Runs the configured experiment on its own thread pool.
pub fn run(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let pool = build_pool(config.threads)?;
    let start = Instant::now();
    let (records, checks) = pool.install(|| dispatch(config))?;
    Ok(Report {
        config: config.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        pass: checks.iter().all(|c| c.pass),
        records,
        checks,
    })
}

type Output = (Vec<Record>, Vec<Check>);

fn dispatch(c: &ExperimentConfig) -> Result<Output> {
    match c.experiment {
        ExperimentKind::MaximalEstimate => run_maximal(c),
        ExperimentKind::VerifyDecomposition => run_decomposition(c),
        ExperimentKind::CheckDeviation => run_deviation(c),
        ExperimentKind::CheckOrliczLemmas => run_lemmas(c),
        ExperimentKind::Series => run_series(c),
        ExperimentKind::DyadicRatio => run_dyadic(c),
    }
}

fn check(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), pass, detail: detail.into() }
}

fn run_maximal(c: &ExperimentConfig) -> Result<Output> {
    let name = c.experiment.name();
    let spec = c.maximal.clone();
    let schedule = spec.as_ref().map_or_else(|| vec![c.window.clone()], |m| m.schedule.clone());
    let orlicz_r = spec.as_ref().filter(|m| m.orlicz).map(|_| c.r);
    let model = c.model.build(c.d, coefficient_seed(c.seed, 0))?;
    let est = estimate_maximal_norms(&model, &schedule, c.p, orlicz_r, c.replications, c.seed)?;
    let pr = (Some(c.p), Some(c.r));
    let mut records = Vec::new();
    for w in &est.windows {
        let label = window_label(&w.window);
        if c.per_replication {
            for (rep, v) in w.values.iter().enumerate() {
                records.push(
                    Record::new(name, c.d, "maximal", *v, child_seed(c.seed, rep as u64))
                        .window(&label)
                        .pr(pr.0, pr.1)
                        .replication(rep),
                );
            }
        }
        records.push(
            Record::new(name, c.d, "lp_norm", w.lp.value, c.seed)
                .window(&label)
                .pr(pr.0, pr.1)
                .ci(w.lp.ci_lo, w.lp.ci_hi),
        );
        if let Some(o) = &w.orlicz {
            records.push(
                Record::new(name, c.d, "orlicz_norm", o.value, c.seed)
                    .window(&label)
                    .pr(Some(2.0), Some(c.r))
                    .ci(o.ci_lo, o.ci_hi),
            );
        }
        if let Some(norm) = est.innovation_norm.filter(|n| *n > 0.0) {
            records.push(
                Record::new(name, c.d, "ratio_to_innovation_norm", w.lp.value / norm, c.seed)
                    .window(&label)
                    .pr(pr.0, pr.1),
            );
        }
        if let Some((g, lo, hi)) = w.growth {
            records.push(Record::new(name, c.d, "growth", g, c.seed).window(&label).pr(pr.0, pr.1).ci(lo, hi));
        }
    }
    if let Some(norm) = est.innovation_norm {
        records.push(
            Record::new(name, c.d, "innovation_norm", norm, c.seed).pr(Some(2.0), Some(2.0 * (c.d as f64 - 1.0))),
        );
    }
    let mut checks = Vec::new();
    if let (Some(cap), Some(g)) = (spec.and_then(|m| m.growth_cap), est.last_growth()) {
        if let Some(last) = records.iter_mut().rev().find(|r| r.statistic == "growth") {
            last.verdict = Some(super::report::Verdict::from_bool(g <= cap));
        }
        checks.push(check("growth within cap", g <= cap, format!("growth {g} vs cap {cap}")));
    }
    Ok((records, checks))
}

fn run_decomposition(c: &ExperimentConfig) -> Result<Output> {
    let name = c.experiment.name();
    let variants = c.decomposition.clone().unwrap_or_default().variants;
    let runs = verify_decomposition_runs(&c.model, c.d, &c.window, &variants, c.replications, c.seed)?;
    let label = window_label(&sizes_of(&c.window));
    let mut records = Vec::new();
    let mut checks = Vec::new();
    for (vi, v) in variants.iter().enumerate() {
        let decisive = *v == Variant::Telescoping;
        let mut holds = 0usize;
        for (rep, outs) in runs.iter().enumerate() {
            let o = outs[vi];
            holds += o.pass as usize;
            if c.per_replication {
                let seed = child_seed(c.seed, rep as u64);
                records.push(
                    Record::new(name, c.d, format!("lhs:{}", v.name()), o.lhs, seed).window(&label).replication(rep),
                );
                let mut rhs =
                    Record::new(name, c.d, format!("rhs:{}", v.name()), o.rhs, seed).window(&label).replication(rep);
                if decisive {
                    rhs = rhs.verdict(o.pass);
                }
                records.push(rhs);
            }
        }
        let rate = holds as f64 / runs.len() as f64;
        let mut rec = Record::new(name, c.d, format!("pass_rate:{}", v.name()), rate, c.seed).window(&label);
        if decisive {
            rec = rec.verdict(holds == runs.len());
            checks.push(check(
                "pointwise inequality on every realization",
                holds == runs.len(),
                format!("{holds}/{} realizations", runs.len()),
            ));
        }
        records.push(rec);
    }
    Ok((records, checks))
}

fn run_deviation(c: &ExperimentConfig) -> Result<Output> {
    let name = c.experiment.name();
    let dev = c.deviation.as_ref().expect("validated");
    let res = check_deviation_inequality(dev.n, &dev.law, &dev.x, &dev.y, c.replications, c.seed)?;
    let label = dev.n.to_string();
    let mut records = Vec::new();
    if c.per_replication {
        for (rep, (s, q)) in res.sums.iter().zip(&res.quadratic).enumerate() {
            let seed = child_seed(c.seed, rep as u64);
            records.push(Record::new(name, c.d, "sum", *s, seed).window(&label).replication(rep));
            records.push(Record::new(name, c.d, "quadratic_variation", *q, seed).window(&label).replication(rep));
        }
    }
    for pt in &res.points {
        let stat = format!("probability[x={},y={}]", pt.x, pt.y);
        records.push(
            Record::new(name, c.d, stat, pt.probability, c.seed).window(&label).ci(pt.lower, pt.upper).verdict(pt.pass),
        );
        records.push(Record::new(name, c.d, format!("bound[x={},y={}]", pt.x, pt.y), pt.bound, c.seed).window(&label));
    }
    let failed = res.points.iter().filter(|p| !p.pass).count();
    let checks = vec![check(
        "Wilson upper bound below 2exp(-x^2/2y)",
        res.pass,
        format!("{failed} of {} grid points fail", res.points.len()),
    )];
    Ok((records, checks))
}

fn run_lemmas(c: &ExperimentConfig) -> Result<Output> {
    let name = c.experiment.name();
    let spec = c.lemmas.clone().unwrap_or_default();
    let laws = law_family(c.seed, spec.laws);
    let mut records = Vec::new();
    let mut checks = Vec::new();

    let mut chain_ok = true;
    for (i, law) in laws.iter().enumerate() {
        for &p in &spec.weak_p {
            let w = weak_lp_norms(law, p)?;
            let lp = lp_norm(law, p)?;
            let ok = w.tail_sup <= w.dual_norm * (1.0 + 1e-9) + 1e-300 && w.dual_norm <= lp * (1.0 + 1e-9) + 1e-300;
            chain_ok &= ok;
            let rec =
                |s: &str, v: f64| Record::new(name, c.d, s, v, c.seed).window(format!("law{i}")).pr(Some(p), None);
            records.push(rec("weak_tail_sup", w.tail_sup));
            records.push(rec("weak_dual_norm", w.dual_norm));
            records.push(rec("lp_norm", lp).verdict(ok));
        }
    }
    checks.push(check("weak-Lp chain", chain_ok, "tail_sup ≤ dual_norm ≤ ‖X‖_p"));

    let mut series_ok = true;
    for (i, law) in laws.iter().enumerate() {
        for &(p, q) in &spec.series_pq {
            let s = check_series_lemma(law, p, q, spec.k_max)?;
            series_ok &= s.pass && s.second_pass;
            let rec = |st: &str, v: f64| {
                Record::new(name, c.d, format!("{st}[q={q}]"), v, c.seed).window(format!("law{i}")).pr(Some(p), None)
            };
            records.push(rec("series_lhs", s.lhs));
            records.push(rec("series_rhs", s.rhs_bound).verdict(s.pass));
            records.push(rec("series_second_lhs", s.second_lhs));
            records.push(rec("series_second_rhs", s.second_rhs_bound).verdict(s.second_pass));
        }
    }
    checks.push(check("series lemma with explicit constants", series_ok, ""));

    let refined: Vec<_> = laws.iter().map(|l| l.refine(spec.refine)).collect();
    for &r in &spec.power_r {
        let base = check_orlicz_power_lemma(&laws, r)?;
        let fine = check_orlicz_power_lemma(&refined, r)?;
        let stable = |a: f64, b: f64| (b / a - 1.0).abs() <= spec.stability;
        let ok = base.all_finite()
            && fine.all_finite()
            && stable(base.square_max, fine.square_max)
            && stable(base.root_max, fine.root_max);
        let rec = |s: &str, v: f64| Record::new(name, c.d, s, v, c.seed).pr(None, Some(r));
        records.push(rec("power_square_max", base.square_max));
        records.push(rec("power_root_max", base.root_max));
        records.push(rec("power_square_max_refined", fine.square_max).verdict(ok));
        records.push(rec("power_root_max_refined", fine.root_max).verdict(ok));
        checks.push(check(
            format!("power lemma ratios finite and stable (r={r})"),
            ok,
            format!("square {} -> {}, root {} -> {}", base.square_max, fine.square_max, base.root_max, fine.root_max),
        ));
    }

    let mut weak_ok = true;
    for (i, pair) in random_joint_laws(c.seed, spec.weak_type_pairs).iter().enumerate() {
        for pt in check_weak_type_transfer(pair, &spec.t_grid)? {
            weak_ok &= pt.pass;
            records.push(
                Record::new(name, c.d, format!("weak_type_rhs[t={}]", pt.t), pt.rhs, c.seed)
                    .window(format!("pair{i}"))
                    .verdict(pt.pass),
            );
            records.push(
                Record::new(name, c.d, format!("weak_type_lhs[t={}]", pt.t), pt.lhs, c.seed).window(format!("pair{i}")),
            );
        }
    }
    checks.push(check("weak-type transfer", weak_ok, ""));
    Ok((records, checks))
}

fn run_series(c: &ExperimentConfig) -> Result<Output> {
    let name = c.experiment.name();
    let spec = c.series.as_ref().expect("validated");
    let model = c.model.build(c.d, c.seed)?;
    let n_max = LatticeIndex::new(spec.n_max.clone());
    let mode = if spec.monte_carlo > 0 {
        LawMode::ExactOrMonteCarlo { samples: spec.monte_carlo, seed: c.seed }
    } else {
        LawMode::Exact
    };
    let mw = mw_series(&model, &n_max, mode)?;
    let coefs = model.coefficients();
    let mut records = Vec::new();
    let mut inner_ok = true;
    for t in &mw.terms {
        let inner = mw_inner_sum(&coefs, &t.n);
        inner_ok &= (inner - t.coefficient_l2).abs() <= 1e-9 * (1.0 + inner);
        let mut rec = Record::new(name, c.d, "mw_term_norm", t.norm, c.seed).window(index_label(&t.n));
        if let Some((lo, hi)) = t.ci {
            rec = rec.ci(lo, hi);
        }
        records.push(rec);
        records.push(Record::new(name, c.d, "mw_coefficient_l2", t.coefficient_l2, c.seed).window(index_label(&t.n)));
        records.push(Record::new(name, c.d, "mw_inner_sum", inner, c.seed).window(index_label(&t.n)));
    }
    records.push(Record::new(name, c.d, "mw_partial_sum", mw.partial_sum, c.seed).window(index_label(&n_max)));
    let covered = mw.predicted_index.precedes(&n_max);
    let stable_ok = !covered || mw.stabilization_index == mw.predicted_index;
    for q in 0..c.d {
        records.push(Record::new(
            name,
            c.d,
            format!("stabilization_index[{}]", q + 1),
            mw.stabilization_index[q] as f64,
            c.seed,
        ));
        records.push(Record::new(
            name,
            c.d,
            format!("predicted_index[{}]", q + 1),
            mw.predicted_index[q] as f64,
            c.seed,
        ));
    }
    let mut checks = vec![
        check("mw coefficient part equals the direct inner sums", inner_ok, "within 1e-9"),
        check(
            "mw stabilizes at the predicted index",
            stable_ok,
            format!("{} vs {}", mw.stabilization_index, mw.predicted_index),
        ),
    ];
    match hannan_series(&model) {
        Ok(h) => {
            let ok = (h.value - h.projector_sum).abs() <= 1e-9 * (1.0 + h.value);
            records.push(Record::new(name, c.d, "hannan_series", h.value, c.seed));
            records.push(Record::new(name, c.d, "hannan_projector_sum", h.projector_sum, c.seed).verdict(ok));
            records.push(Record::new(name, c.d, "innovation_norm", h.innovation_norm, c.seed));
            checks.push(check(
                "hannan series equals the projector sum",
                ok,
                format!("{} vs {}", h.value, h.projector_sum),
            ));
        }
        Err(e) => checks.push(check("hannan series", false, e.to_string())),
    }
    Ok((records, checks))
}

fn run_dyadic(c: &ExperimentConfig) -> Result<Output> {
    let name = c.experiment.name();
    let spec = c.dyadic.as_ref().expect("validated");
    let model = c.model.build(c.d, coefficient_seed(c.seed, 0))?;
    let windows: Vec<Vec<usize>> = spec.schedule.iter().map(|w| sizes_of(w)).collect();
    let summaries = dyadic_ratio_diagnostic(&model, &windows, c.replications, c.seed)?;
    Ok(dyadic_records(name, c, &summaries, spec.ratio_cap))
}

fn dyadic_records(name: &str, c: &ExperimentConfig, summaries: &[RatioSummary], cap: Option<f64>) -> Output {
    let mut records = Vec::new();
    let mut ordered = true;
    let mut max = 1.0f64;
    for s in summaries {
        let label = window_label(&s.window);
        ordered &= s.ordered;
        max = max.max(s.max);
        if c.per_replication {
            for (rep, r) in s.ratios.iter().enumerate() {
                records.push(
                    Record::new(name, c.d, "ratio", *r, child_seed(c.seed, rep as u64))
                        .window(&label)
                        .replication(rep)
                        .verdict(*r >= 1.0),
                );
            }
        }
        records.push(Record::new(name, c.d, "ratio_median", s.median, c.seed).window(&label));
        records.push(Record::new(name, c.d, "ratio_q99", s.q99, c.seed).window(&label));
        let mut rec = Record::new(name, c.d, "ratio_max", s.max, c.seed).window(&label);
        if let Some(cap) = cap {
            rec = rec.verdict(s.max <= cap);
        }
        records.push(rec);
    }
    let mut checks = vec![check("dyadic maximum below the full maximum", ordered, "")];
    if let Some(cap) = cap {
        checks.push(check("dyadic ratio within cap", max <= cap, format!("max {max} vs cap {cap}")));
    }
    (records, checks)
}

/// A decomposition section listing every variant, for diagnostics.
pub fn all_variants() -> DecompositionSpec {
    DecompositionSpec { variants: Variant::ALL.to_vec() }
}
