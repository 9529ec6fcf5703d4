use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corpus::Corpus;
use super::operators::OperatorSpec;
use crate::error::{Error, Result};
use crate::grid::{SampledFunction, Window};
use crate::interp::{
    boundary_lemma_check_with, interp_norm, phi_bar_bound_check_with, EndpointQ, Endpoints, KNet, KSolver,
    SplitProfiles, TGrid, ROUNDING_SLACK,
};
use crate::maximal::{maximal_profile_allcubes, maximal_profile_dyadic, MaximalProfile, SideSchedule};
use crate::norms::{interp_parameter, morrey_norm, net_norm, MorreyParams, NormParams, SpacePair};
use crate::report::{Report, ReportRow};

/// Largest t-grid used when widening for coverage.
pub const MAX_GRID_POINTS: usize = 4096;
/// Allowed relative drift of a ratio under `L → L+1`.
pub const REFINEMENT_DRIFT: f64 = 0.10;
/// Allowed relative change of the Morrey ratio under dilation.
pub const DILATION_TOLERANCE: f64 = 1e-6;

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 && den == 0.0 {
        1.0
    } else if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn grid_label(w: Window) -> String {
    format!("n={} L={} W={}", w.dim, w.level, w.window_order)
}

fn pair_label(p: &SpacePair) -> String {
    format!("p0={} p1={} theta={} q={}", p.p0, p.p1, p.theta, p.q)
}

fn corpus_window(corpus: &Corpus) -> Result<Window> {
    corpus.spec.window()
}

fn set_common_meta(report: &mut Report, corpus: &Corpus) -> Result<()> {
    report.set_meta("grid", grid_label(corpus_window(corpus)?));
    report.set_meta("corpus_hash", corpus.hash());
    report.set_meta("seed", corpus.spec.seed);
    report.set_meta("functions", corpus.len());
    Ok(())
}

struct PairRatios {
    up_over_n: f64,
    n_over_lo: f64,
}

/// Shared engine of both equivalence theorems.
fn verify_equivalence(corpus: &Corpus, pairs: &[SpacePair], net: KNet, title: &str) -> Result<Report> {
    let w = corpus_window(corpus)?;
    let endpoint_q = match net {
        KNet::Dyadic => EndpointQ::Infinity,
        KNet::AllCubes => EndpointQ::Sigma,
    };
    // Pairs sharing endpoints share one solver and one widened grid.
    let mut groups: Vec<(Endpoints, Vec<usize>)> = Vec::new();
    for (i, pair) in pairs.iter().enumerate() {
        pair.validate()?;
        let e = Endpoints::from_pair(pair, endpoint_q)?;
        match groups.iter_mut().find(|g| g.0 == e) {
            Some(g) => g.1.push(i),
            None => groups.push((e, vec![i])),
        }
    }

    let per_function: Vec<(Vec<ReportRow>, Vec<PairRatios>)> = corpus
        .functions
        .par_iter()
        .zip(&corpus.labels)
        .map(|(f, label)| -> Result<_> {
            let sp = SplitProfiles::new(f, net);
            let mut rows = Vec::new();
            let mut ratios: Vec<Option<PairRatios>> = (0..pairs.len()).map(|_| None).collect();
            for (endpoints, members) in &groups {
                let solver = KSolver::from_profiles(&sp, *endpoints)?;
                let targets: Vec<(f64, f64)> = members.iter().map(|&i| (pairs[i].theta, pairs[i].q)).collect();
                let kb = solver.bracket_covering(TGrid::default_for(w, endpoints.p0), &targets, MAX_GRID_POINTS);
                let violations = kb.violations();
                rows.push(
                    ReportRow::at_most(
                        "bracket",
                        format!("f={label} p0={} p1={} inner={}", endpoints.p0, endpoints.p1, endpoints.inner),
                        violations.len() as f64,
                        0.0,
                        0.0,
                    )
                    .with_witness(violations.first().cloned().unwrap_or_default()),
                );
                for &i in members {
                    let pair = &pairs[i];
                    let params = format!("f={label} {}", pair_label(pair));
                    let n = net_norm(sp.profile(), NormParams::new(pair.p(), pair.q)?)?;
                    let ib = interp_norm(&kb, pair.theta, pair.q);
                    let up_over_n = ratio(ib.upper, n.value);
                    let n_over_lo = ratio(n.value, ib.lower);
                    let finite_note = if n.is_finite() {
                        String::new()
                    } else {
                        format!("divergent norm from t={}", n.divergence.map(|d| d.from).unwrap_or(f64::NAN))
                    };
                    rows.push(ReportRow::at_most("interp-order", params.clone(), ratio(ib.lower, ib.upper), 1.0, ROUNDING_SLACK));
                    rows.push(
                        ReportRow::verdict("ratio:up-over-n", params.clone(), up_over_n, up_over_n.is_finite())
                            .with_witness(finite_note.clone()),
                    );
                    rows.push(
                        ReportRow::verdict("ratio:n-over-lo", params.clone(), n_over_lo, n_over_lo.is_finite())
                            .with_witness(finite_note),
                    );
                    rows.push(
                        ReportRow::verdict("coverage", params, ib.uncovered_fraction, true).with_witness(if ib.covered {
                            String::new()
                        } else {
                            "warning: grid head/tail above 1e-6 after widening".to_string()
                        }),
                    );
                    ratios[i] = Some(PairRatios { up_over_n, n_over_lo });
                }
            }
            Ok((rows, ratios.into_iter().map(|r| r.expect("every pair evaluated")).collect()))
        })
        .collect::<Result<_>>()?;

    let mut report = Report::new(title);
    set_common_meta(&mut report, corpus)?;
    let mut maxima = vec![(0.0f64, 0.0f64); pairs.len()];
    for (rows, ratios) in per_function {
        for row in rows {
            report.push(row);
        }
        for (i, r) in ratios.iter().enumerate() {
            maxima[i].0 = max_nan(maxima[i].0, r.up_over_n);
            maxima[i].1 = max_nan(maxima[i].1, r.n_over_lo);
        }
    }
    for (pair, (up, lo)) in pairs.iter().zip(maxima) {
        let params = format!("{} {}", grid_label(w), pair_label(pair));
        report.push(ReportRow::verdict("frozen:up-over-n", params.clone(), up, up.is_finite()));
        report.push(ReportRow::verdict("frozen:n-over-lo", params, lo, lo.is_finite()));
    }
    Ok(report)
}

fn max_nan(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// Dyadic net: `N_{p,q}` against the geometric-grid interpolation norm of
/// `(N_{p₀,∞}, N_{p₁,∞})`.
pub fn verify_theorem1(corpus: &Corpus, pairs: &[SpacePair]) -> Result<Report> {
    verify_equivalence(corpus, pairs, KNet::Dyadic, "theorem1")
}

/// All-cubes net on the nonnegative cone with `(N_{p₀,σ}, N_{p₁,σ})`
/// endpoints; also runs the two lemmas for three partition sizes.
pub fn verify_theorem2(corpus: &Corpus, pairs: &[SpacePair], lemma_samples: usize) -> Result<Report> {
    let w = corpus_window(corpus)?;
    for pair in pairs {
        if pair.p0 < w.dim as f64 {
            return Err(Error::param(format!(
                "the all-cubes equivalence needs p0 >= n, got p0 = {} with n = {}",
                pair.p0, w.dim
            )));
        }
    }
    require_nonneg(corpus)?;
    let mut report = verify_equivalence(corpus, pairs, KNet::AllCubes, "theorem2")?;
    let lemmas = verify_lemmas(corpus, &lemma_taus(w), lemma_samples, corpus.spec.seed)?;
    report.extend(lemmas);
    Ok(report)
}

fn require_nonneg(corpus: &Corpus) -> Result<()> {
    for f in &corpus.functions {
        f.require_nonnegative()?;
    }
    Ok(())
}

/// Bound on `f̄(t, f₀)` for `t ≥ 2^{nm}` after the order-`m` dyadic split,
/// relative to `max|f|`.
pub const CANCELLATION_BOUND: f64 = 2.910_383_045_673_370_4e-11; // 2^-35

/// For every representable order `m`, the mean-zero part `f₀` of the
/// order-`m` dyadic split has no dyadic average above rounding on cubes of
/// measure at least `2^{nm}`.
pub fn verify_cancellation(corpus: &Corpus) -> Result<Report> {
    let w = corpus_window(corpus)?;
    let rows: Vec<ReportRow> = corpus
        .functions
        .par_iter()
        .zip(&corpus.labels)
        .map(|(f, label)| -> Result<ReportRow> {
            let scale = f.max_abs();
            let (mut worst, mut at) = (0.0f64, w.min_order());
            for m in w.min_order()..=w.max_order() {
                let d = crate::interp::split_dyadic(f, m)?;
                let profile = maximal_profile_dyadic(&d.f0);
                let v = ratio(profile.value(w.dyadic_measure(m))?, scale);
                if v > worst {
                    worst = v;
                    at = m;
                }
            }
            Ok(ReportRow::at_most("cancellation", format!("f={label}"), worst, CANCELLATION_BOUND, 0.0)
                .with_witness(format!("order={at}")))
        })
        .collect::<Result<_>>()?;
    let mut report = Report::new("cancellation");
    set_common_meta(&mut report, corpus)?;
    report.rows = rows;
    Ok(report)
}

/// Three representable partition measures: sides `2`, `2^{⌊k/2⌋}` and
/// `E/4` cells, with `E = 2^k`.
pub fn lemma_taus(w: Window) -> Vec<f64> {
    let e = w.extent() as u64;
    let k = e.trailing_zeros();
    let mut sides = vec![2u64.min(e), 1u64 << (k / 2), (e / 4).max(1)];
    sides.sort_unstable();
    sides.dedup();
    sides.into_iter().map(|h| w.cube_measure(h)).collect()
}

/// `sup φ₀ ≤ f̄(τ)`, the `φ̄₀` bounds and the boundary lemma on every
/// function for every `τ`.
pub fn verify_lemmas(corpus: &Corpus, taus: &[f64], samples: usize, seed: u64) -> Result<Report> {
    require_nonneg(corpus)?;
    let rows: Vec<Vec<ReportRow>> = corpus
        .functions
        .par_iter()
        .enumerate()
        .map(|(i, f)| -> Result<_> {
            let profile = maximal_profile_allcubes(f, SideSchedule::AllSides)?;
            let mut rows = Vec::new();
            for &tau in taus {
                let tag = |mut r: ReportRow| {
                    r.params = format!("f={} {}", corpus.labels[i], r.params);
                    r
                };
                rows.extend(phi_bar_bound_check_with(f, &profile, tau)?.rows.into_iter().map(tag));
                let b = boundary_lemma_check_with(f, &profile, tau, samples, seed.wrapping_add(i as u64))?;
                rows.extend(b.rows.into_iter().map(tag));
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let mut report = Report::new("lemmas");
    set_common_meta(&mut report, corpus)?;
    report.rows = rows.into_iter().flatten().collect();
    Ok(report)
}

/// `s^{1/p₀} f̄(s) ≤ ‖f₀‖_{N_{p₀,∞}} + s^{1/p₀-1/p₁} ‖f₁‖_{N_{p₁,∞}}` at every
/// profile breakpoint, for every decomposition witnessed on the bracket
/// grid. Constant exactly one (up to rounding).
pub fn verify_embedding(corpus: &Corpus, pair: &SpacePair, net: KNet) -> Result<Report> {
    let w = corpus_window(corpus)?;
    let endpoints = Endpoints::new(pair.p0, pair.p1, f64::INFINITY)?;
    let rows: Vec<Vec<ReportRow>> = corpus
        .functions
        .par_iter()
        .zip(&corpus.labels)
        .map(|(f, label)| -> Result<_> {
            let sp = SplitProfiles::new(f, net);
            let solver = KSolver::from_profiles(&sp, endpoints)?;
            let kb = solver.bracket(TGrid::default_for(w, pair.p0));
            let mut seen = Vec::new();
            for wit in &kb.witnesses {
                if !seen.contains(&wit.provenance) {
                    seen.push(wit.provenance);
                }
            }
            let delta = endpoints.delta();
            let mut rows = Vec::new();
            for prov in seen {
                let wit = solver
                    .candidates()
                    .find(|c| c.provenance == prov)
                    .copied()
                    .expect("witness comes from the candidate set");
                let (mut worst, mut at) = (0.0f64, f64::NAN);
                for (&s, &v) in sp.profile().breakpoints().iter().zip(sp.profile().values()) {
                    let lhs = s.powf(1.0 / pair.p0) * v;
                    let rhs = wit.norm0 + s.powf(delta) * wit.norm1;
                    let r = ratio(lhs, rhs);
                    if r > worst {
                        worst = r;
                        at = s;
                    }
                }
                rows.push(
                    ReportRow::at_most(
                        "embedding",
                        format!("f={label} witness={} p0={} p1={}", prov.label(w), pair.p0, pair.p1),
                        worst,
                        1.0,
                        ROUNDING_SLACK,
                    )
                    .with_witness(format!("s={at}")),
                );
            }
            let violations = kb.violations();
            rows.push(
                ReportRow::at_most("bracket", format!("f={label}"), violations.len() as f64, 0.0, 0.0)
                    .with_witness(violations.first().cloned().unwrap_or_default()),
            );
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let mut report = Report::new("embedding");
    set_common_meta(&mut report, corpus)?;
    report.set_meta("net", format!("{net:?}"));
    report.rows = rows.into_iter().flatten().collect();
    Ok(report)
}

/// Morrey norm against `N_{p,∞}` on all cubes, `1/p = 1 - λ/n`, with a
/// dilation check of the ratio.
pub fn verify_morrey(corpus: &Corpus, lambdas: &[f64]) -> Result<Report> {
    require_nonneg(corpus)?;
    let w = corpus_window(corpus)?;
    let k = if w.level >= 1 { 1 } else { -1 };
    let per: Vec<Vec<(f64, f64, f64)>> = corpus
        .functions
        .par_iter()
        .map(|f| -> Result<_> {
            let g = f.dilated(k)?;
            let pf = maximal_profile_allcubes(f, SideSchedule::AllSides)?;
            let pg = maximal_profile_allcubes(&g, SideSchedule::AllSides)?;
            lambdas
                .iter()
                .map(|&lambda| {
                    let mp = MorreyParams { lambda };
                    let np = NormParams::new(mp.net_exponent(w.dim), f64::INFINITY)?;
                    let r = ratio(morrey_norm(f, mp)?, net_norm(&pf, np)?.value);
                    let rg = ratio(morrey_norm(&g, mp)?, net_norm(&pg, np)?.value);
                    Ok((lambda, r, rg))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut report = Report::new("morrey");
    set_common_meta(&mut report, corpus)?;
    report.set_meta("dilation", k);
    for (j, &lambda) in lambdas.iter().enumerate() {
        let (mut hi, mut inv) = (0.0f64, 0.0f64);
        for (i, rs) in per.iter().enumerate() {
            let (_, r, rg) = rs[j];
            let params = format!("f={} lambda={lambda}", corpus.labels[i]);
            report.push(ReportRow::verdict("ratio", params.clone(), r, r.is_finite() && r > 0.0));
            report.push(ReportRow::at_most("dilation", params, (rg / r - 1.0).abs(), DILATION_TOLERANCE, 0.0));
            hi = max_nan(hi, r);
            inv = max_nan(inv, 1.0 / r);
        }
        let params = format!("{} lambda={lambda}", grid_label(w));
        report.push(ReportRow::verdict("frozen:ratio-max", params.clone(), hi, hi.is_finite()));
        report.push(ReportRow::verdict("frozen:inverse-ratio-max", params, inv, inv.is_finite()));
    }
    Ok(report)
}

/// Exponents of the interpolation corollary: `T` bounded from `N_{p_i,σ}`
/// to `N_{q_i,∞}` implies `N_{p,τ} → N_{q,τ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorollaryParams {
    pub p0: f64,
    #[serde(with = "crate::report::real")]
    pub p1: f64,
    pub q0: f64,
    #[serde(with = "crate::report::real")]
    pub q1: f64,
    pub theta: f64,
    pub sigma: f64,
    pub tau: f64,
    /// Output exponent; `1/q = (1-θ)/q₀ + θ/q₁` when `None`.
    #[serde(default)]
    pub q: Option<f64>,
}

impl CorollaryParams {
    /// `q_i = p_i`, `σ = 1`, `τ = 2`.
    pub fn new(p0: f64, p1: f64, theta: f64) -> CorollaryParams {
        CorollaryParams {
            p0,
            p1,
            q0: p0,
            q1: p1,
            theta,
            sigma: 1.0,
            tau: 2.0,
            q: None,
        }
    }

    pub fn p(&self) -> Result<f64> {
        interp_parameter(self.p0, self.p1, self.theta)
    }

    pub fn q(&self) -> f64 {
        self.q
            .unwrap_or_else(|| 1.0 / ((1.0 - self.theta) / self.q0 + self.theta / self.q1))
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if !(self.p0 >= dim as f64 && self.p1 > self.p0 && self.p1.is_finite()) {
            return Err(Error::param(format!(
                "need n <= p0 < p1 < inf, got p0 = {}, p1 = {}",
                self.p0, self.p1
            )));
        }
        if !(self.q0 >= 1.0 && self.q1 >= 1.0 && self.q0.is_finite() && self.q1.is_finite() && self.q0 != self.q1) {
            return Err(Error::param("need 1 <= q0, q1 < inf with q0 != q1"));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::param("theta must lie in (0, 1)"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite() && self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::param("sigma and tau must be positive and finite"));
        }
        Ok(())
    }

    fn label(&self) -> String {
        format!(
            "p0={} p1={} q0={} q1={} theta={} sigma={} tau={} q={}",
            self.p0,
            self.p1,
            self.q0,
            self.q1,
            self.theta,
            self.sigma,
            self.tau,
            self.q()
        )
    }
}

struct CorollaryMeasure {
    r0: f64,
    r1: f64,
    out: f64,
    inp: f64,
    contraction: Option<f64>,
}

/// Measures `F₀`, `F₁` as corpus suprema and the constant `c` in
/// `‖Tf‖_{N_{q,τ}} ≤ c F₀^{1-θ} F₁^θ ‖f‖_{N_{p,τ}}` on the all-cubes net.
pub fn verify_corollary(op: &OperatorSpec, corpus: &Corpus, cp: &CorollaryParams) -> Result<Report> {
    require_nonneg(corpus)?;
    let w = corpus_window(corpus)?;
    cp.validate(w.dim)?;
    let p = cp.p()?;
    let q = cp.q();
    let norm = |prof: &MaximalProfile, p: f64, q: f64| -> Result<f64> { Ok(net_norm(prof, NormParams::new(p, q)?)?.value) };
    let measures: Vec<CorollaryMeasure> = corpus
        .functions
        .par_iter()
        .map(|f| -> Result<_> {
            let tf = op.apply(f)?;
            let pf = maximal_profile_allcubes(f, SideSchedule::AllSides)?;
            let ptf = maximal_profile_allcubes(&tf, SideSchedule::AllSides)?;
            let contraction = match op {
                OperatorSpec::DyadicAverage { .. } => {
                    let (df, dtf) = (maximal_profile_dyadic(f), maximal_profile_dyadic(&tf));
                    let mut worst = 0.0f64;
                    for (pp, qq) in [(cp.p0, cp.sigma), (cp.p1, cp.sigma), (p, cp.tau), (cp.p0, f64::INFINITY)] {
                        worst = worst.max(ratio(norm(&dtf, pp, qq)?, norm(&df, pp, qq)?));
                    }
                    Some(worst)
                }
                _ => None,
            };
            Ok(CorollaryMeasure {
                r0: ratio(norm(&ptf, cp.q0, f64::INFINITY)?, norm(&pf, cp.p0, cp.sigma)?),
                r1: ratio(norm(&ptf, cp.q1, f64::INFINITY)?, norm(&pf, cp.p1, cp.sigma)?),
                out: norm(&ptf, q, cp.tau)?,
                inp: norm(&pf, p, cp.tau)?,
                contraction,
            })
        })
        .collect::<Result<_>>()?;

    let f0 = measures.iter().fold(0.0f64, |m, x| max_nan(m, x.r0));
    let f1 = measures.iter().fold(0.0f64, |m, x| max_nan(m, x.r1));
    let scale = f0.powf(1.0 - cp.theta) * f1.powf(cp.theta);
    let mut report = Report::new("corollary");
    set_common_meta(&mut report, corpus)?;
    report.set_meta("operator", op.name());
    let label = cp.label();
    report.push(ReportRow::verdict("measured:F0", format!("{} {label}", op.name()), f0, f0.is_finite()));
    report.push(ReportRow::verdict("measured:F1", format!("{} {label}", op.name()), f1, f1.is_finite()));
    let mut c_max = 0.0f64;
    for (i, m) in measures.iter().enumerate() {
        let c = ratio(m.out, scale * m.inp);
        c_max = max_nan(c_max, c);
        let params = format!("f={} {}", corpus.labels[i], op.name());
        report.push(ReportRow::verdict("ratio:c", params.clone(), c, c.is_finite()));
        if let Some(worst) = m.contraction {
            report.push(ReportRow::at_most("dyadic-contraction", params, worst, 1.0, ROUNDING_SLACK));
        }
    }
    report.push(quasilinearity_row(op, corpus)?);
    report.push(ReportRow::verdict(
        "frozen:c",
        format!("{} {} {label}", grid_label(w), op.name()),
        c_max,
        c_max.is_finite(),
    ));
    Ok(report)
}

/// `max |T(f+g)| / (|Tf| + |Tg|)` over consecutive corpus pairs; at most
/// one for the linear operators offered.
fn quasilinearity_row(op: &OperatorSpec, corpus: &Corpus) -> Result<ReportRow> {
    let mut worst = 0.0f64;
    for pair in corpus.functions.windows(2) {
        let sum = pair[0].combine(1.0, &pair[1], 1.0)?;
        let (ts, ta, tb) = (op.apply(&sum)?, op.apply(&pair[0])?, op.apply(&pair[1])?);
        for ((s, a), b) in ts.values().iter().zip(ta.values()).zip(tb.values()) {
            worst = worst.max(ratio(s.abs(), a.abs() + b.abs()));
        }
    }
    Ok(ReportRow::at_most("quasilinearity", op.name(), worst, 1.0, ROUNDING_SLACK))
}

/// Relative drift of every `ratio:` row between two runs of the same
/// verification on grids `L` and `L+1`.
pub fn refinement_drift(base: &Report, refined: &Report) -> Report {
    let mut report = Report::new(format!("{}-refinement", base.title));
    for row in base.rows_named("ratio:") {
        let other = refined
            .rows
            .iter()
            .find(|r| r.name == row.name && r.params == row.params);
        let drift = match other {
            Some(o) => (o.value / row.value - 1.0).abs(),
            None => f64::NAN,
        };
        report.push(ReportRow::at_most(
            format!("drift:{}", &row.name["ratio:".len()..]),
            row.params.clone(),
            drift,
            REFINEMENT_DRIFT,
            0.0,
        ));
    }
    report
}

/// `λf` leaves every `ratio:` row unchanged; returns the largest relative
/// change.
pub fn scaling_drift(base: &Report, scaled: &Report) -> f64 {
    let mut worst = 0.0f64;
    for row in base.rows_named("ratio:") {
        if let Some(o) = scaled.rows.iter().find(|r| r.name == row.name && r.params == row.params) {
            worst = max_nan(worst, (o.value / row.value - 1.0).abs());
        }
    }
    worst
}

/// The functions of `corpus` that the theorems accept (used when a mixed
/// corpus is passed to a nonnegative-cone run).
pub fn nonneg_only(functions: &[SampledFunction]) -> Vec<SampledFunction> {
    functions.iter().filter(|f| f.is_nonnegative()).cloned().collect()
}
