//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Frozen constants are read from `frozen_constants.json` at the workspace
//! root (or `$NETSPACE_FROZEN_CONSTANTS`); `NETSPACE_REFREEZE=1` records
//! them instead.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use netspace::harness::{
    generate_corpus, hardy_suite, lemma_taus, refinement_drift, verify_cancellation, verify_corollary,
    verify_embedding, verify_lemmas, verify_morrey, verify_theorem1, verify_theorem2, Corpus, CorpusSpec, FreezeMode,
    FrozenConstants, OperatorSpec,
};
use netspace::interp::KNet;
use netspace::maximal::maximal_profile_dyadic;
use netspace::norms::net_norm;
use netspace::report::Report;
use netspace::{NormParams, SampledFunction, Window};
use netspace_cli::config::{defaults, DEFAULT_SEED};

/// Criterion 1 and 2 tolerance.
const EXACT_TOL: f64 = 1e-12;
/// Criterion 9: dilation invariance of the Morrey ratio.
const DILATION_TOL: f64 = 1e-6;
/// Criterion 7 and 8: allowed ratio drift under `L → L+1`.
const DRIFT_TOL: f64 = 0.10;
/// Criterion 5: relative agreement of both quadrature routes.
const HARDY_QUADRATURE_TOL: f64 = 1e-9;
/// Criterion 3: `2^-35` relative to `max|f|`.
const CANCELLATION_TOL: f64 = 2.910_383_045_673_370_4e-11;
/// Criterion 4(b) sample count.
const BOUNDARY_SAMPLES: usize = 1000;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn from_reports(reports: &[&Report], extra: &str) -> Outcome {
        let rows: usize = reports.iter().map(|r| r.rows.len()).sum();
        let failing: Vec<_> = reports.iter().flat_map(|r| r.failures()).collect();
        let mut detail = format!("{rows} rows, {} failing", failing.len());
        if !extra.is_empty() {
            detail.push_str("; ");
            detail.push_str(extra);
        }
        if let Some(row) = failing.first() {
            detail.push_str(&format!(
                "; first failure {} [{}] value={} bound={} {}",
                row.name, row.params, row.value, row.bound, row.witness
            ));
        }
        Outcome {
            pass: failing.is_empty() && rows > 0,
            detail,
        }
    }
}

struct Suite {
    frozen: FrozenConstants,
    mode: FreezeMode,
    out: std::path::PathBuf,
    lines: Vec<(u32, bool, String)>,
}

impl Suite {
    fn run(&mut self, id: u32, title: &str, budget: Duration, body: impl FnOnce(&mut Suite) -> Outcome) {
        let started = Instant::now();
        let outcome = body(self);
        let elapsed = started.elapsed();
        let in_time = elapsed <= budget;
        let pass = outcome.pass && in_time;
        let line = format!(
            "criterion {id:>2} {}: {title}: {} ({:.2}s of {}s budget{})",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", over budget" }
        );
        println!("{line}");
        self.lines.push((id, pass, line));
    }

    fn freeze(&mut self, report: &mut Report, corpus: &Corpus) {
        self.frozen
            .apply(report, &corpus.hash(), self.mode)
            .expect("frozen constants file is writable");
    }

    fn save(&self, report: &Report, stem: &str) {
        report.write(&self.out, stem).expect("report written");
    }
}

fn corpus(spec: CorpusSpec) -> Corpus {
    generate_corpus(&spec).expect("valid corpus spec")
}

fn indicator(dim: usize, level: i32, window_order: i32) -> SampledFunction {
    let w = Window::new(dim, level, window_order).unwrap();
    let unit = 1usize << level;
    SampledFunction::from_fn(w, |[i, j]| if i < unit && (dim == 1 || j < unit) { 1.0 } else { 0.0 }).unwrap()
}

/// `f̄(t)` for `1_{[0,1)ⁿ}` on the dyadic net.
fn indicator_profile(dim: usize, t: f64) -> f64 {
    if t <= 1.0 {
        return 1.0;
    }
    let n = dim as f64;
    let m = (t.log2() / n).ceil();
    2f64.powf(-n * m)
}

fn criterion1() -> Outcome {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (dim, level, wo) in [(1, 4, 4), (2, 3, 3)] {
        let profile = maximal_profile_dyadic(&indicator(dim, level, wo));
        for &t in profile.breakpoints() {
            worst = worst.max((profile.value(t).unwrap() - indicator_profile(dim, t)).abs());
            checked += 1;
        }
        // Interior points of every step and of the tail beyond the window.
        for k in -(level * dim as i32 + 2)..=((wo + 6) * dim as i32) {
            for frac in [0.3, 0.5, 0.9, 1.0] {
                let t = 2f64.powf(k as f64 - 1.0 + frac);
                worst = worst.max((profile.value(t).unwrap() - indicator_profile(dim, t)).abs());
                checked += 1;
            }
        }
    }
    Outcome {
        pass: worst <= EXACT_TOL,
        detail: format!("{checked} evaluations, max error {worst:e}"),
    }
}

fn criterion2() -> Outcome {
    let mut worst = 0.0f64;
    for (dim, level, wo) in [(1, 4, 4), (2, 3, 3)] {
        let profile = maximal_profile_dyadic(&indicator(dim, level, wo));
        for p in [1.5, 2.0, 4.0] {
            let v = net_norm(&profile, NormParams::new(p, f64::INFINITY).unwrap()).unwrap().value;
            worst = worst.max((v - 1.0).abs());
        }
    }
    Outcome {
        pass: worst <= EXACT_TOL,
        detail: format!("max |norm - 1| = {worst:e}"),
    }
}

fn run_binary(args: &[&str], out: &Path) -> (bool, Vec<u8>, Vec<u8>) {
    let status = Command::new(env!("CARGO_BIN_EXE_netspace"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("NETSPACE_REFREEZE")
        .output()
        .expect("binary runs");
    let stem = args[1];
    let csv = std::fs::read(out.join(format!("{stem}.csv"))).unwrap_or_default();
    let json = std::fs::read(out.join(format!("{stem}.json"))).unwrap_or_default();
    (status.status.code().is_some(), csv, json)
}

fn main() {
    let mode = FreezeMode::from_env();
    let out = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&out).unwrap();
    let mut suite = Suite {
        frozen: FrozenConstants::load_default().expect("frozen constants readable"),
        mode,
        out,
        lines: Vec::new(),
    };
    println!(
        "acceptance: frozen constants {} ({} entries, mode {:?})",
        suite.frozen.path().display(),
        suite.frozen.len(),
        mode
    );
    let seed = DEFAULT_SEED;
    let secs = Duration::from_secs;

    suite.run(1, "exact dyadic profile of the unit-cube indicator", secs(1), |_| criterion1());
    suite.run(2, "exact N_{p,inf} norm of the unit-cube indicator", secs(1), |_| criterion2());

    suite.run(3, "cancellation of the order-m dyadic split", secs(30), |s| {
        let r1 = verify_cancellation(&corpus(defaults::cancellation_1d(seed))).unwrap();
        let r2 = verify_cancellation(&corpus(defaults::cancellation(seed))).unwrap();
        s.save(&r1, "cancellation-1d");
        s.save(&r2, "cancellation-2d");
        let worst = r1.max_value("cancellation").unwrap().max(r2.max_value("cancellation").unwrap());
        let mut o = Outcome::from_reports(&[&r1, &r2], &format!("max f0 profile / max|f| = {worst:e}"));
        o.pass &= worst <= CANCELLATION_TOL;
        o
    });

    suite.run(4, "exact-constant lemmas on the nonnegative cone", secs(120), |s| {
        let c = corpus(defaults::lemmas(seed));
        let taus = lemma_taus(c.spec.window().unwrap());
        let r = verify_lemmas(&c, &taus, BOUNDARY_SAMPLES, seed).unwrap();
        s.save(&r, "lemmas");
        Outcome::from_reports(&[&r], &format!("tau in {taus:?}"))
    });

    suite.run(5, "Hardy inequalities with the exact constant", secs(10), |s| {
        let r = hardy_suite(seed, 100).unwrap();
        s.save(&r, "hardy");
        let worst = r.max_value("variant1:lhs-quadrature").unwrap_or(0.0).max(r.max_value("power:lhs-quadrature").unwrap_or(0.0));
        let tol_ok = r
            .rows
            .iter()
            .filter(|row| row.name.ends_with("quadrature"))
            .all(|row| row.bound == HARDY_QUADRATURE_TOL);
        let mut o = Outcome::from_reports(&[&r], &format!("quadrature agreement {worst:e}"));
        o.pass &= tol_ok;
        o
    });

    // Criterion 6 reuses the equivalence runs of criteria 7 and 8.
    let t1_pairs = defaults::theorem1_pairs();
    let t2_pairs = defaults::theorem2_pairs();
    let mut equivalence: Vec<Report> = Vec::new();

    suite.run(7, "dyadic two-sided equivalence, frozen ratios and refinement", secs(180), |s| {
        let mut parts = Vec::new();
        for spec in [defaults::theorem1_1d(seed), defaults::theorem1(seed)] {
            let c = corpus(spec);
            let mut base = verify_theorem1(&c, &t1_pairs).unwrap();
            let refined = verify_theorem1(&c.refined().unwrap(), &t1_pairs).unwrap();
            s.freeze(&mut base, &c);
            let drift = refinement_drift(&base, &refined);
            s.save(&base, &format!("theorem1-{}d", c.spec.dim));
            s.save(&drift, &format!("theorem1-{}d-refinement", c.spec.dim));
            parts.push(base);
            parts.push(drift);
        }
        let max_drift = parts.iter().filter_map(|r| r.max_value("drift")).fold(0.0, f64::max);
        let spread = parts.iter().filter_map(|r| r.max_value("frozen:")).fold(0.0, f64::max);
        let refs: Vec<&Report> = parts.iter().collect();
        let mut o = Outcome::from_reports(&refs, &format!("max frozen ratio {spread:.4}, max drift {max_drift:.2e}"));
        o.pass &= max_drift < DRIFT_TOL;
        equivalence.extend(parts);
        o
    });

    suite.run(8, "all-cubes two-sided equivalence on the nonnegative cone", secs(240), |s| {
        let c = corpus(defaults::theorem2(seed));
        let mut base = verify_theorem2(&c, &t2_pairs, BOUNDARY_SAMPLES).unwrap();
        let refined = verify_theorem2(&c.refined().unwrap(), &t2_pairs, 0).unwrap();
        s.freeze(&mut base, &c);
        let drift = refinement_drift(&base, &refined);
        s.save(&base, "theorem2");
        s.save(&drift, "theorem2-refinement");
        let max_drift = drift.max_value("drift").unwrap();
        let spread = base.max_value("frozen:").unwrap();
        let mut o = Outcome::from_reports(&[&base, &drift], &format!("max frozen ratio {spread:.4}, max drift {max_drift:.2e}"));
        o.pass &= max_drift < DRIFT_TOL;
        equivalence.push(base);
        o
    });

    suite.run(6, "bracket consistency and the subadditivity embedding", secs(60), |s| {
        let mut brackets = Report::new("brackets");
        for r in &equivalence {
            for row in r.rows.iter().filter(|row| row.name == "bracket" || row.name == "interp-order") {
                brackets.push(row.clone());
            }
        }
        let e1 = verify_embedding(&corpus(defaults::embedding(seed)), &t1_pairs[0], KNet::Dyadic).unwrap();
        let e2 = verify_embedding(&corpus(defaults::theorem2(seed)), &t2_pairs[0], KNet::AllCubes).unwrap();
        s.save(&e1, "embedding-dyadic");
        s.save(&e2, "embedding-allcubes");
        let worst = e1.max_value("embedding").unwrap().max(e2.max_value("embedding").unwrap());
        Outcome::from_reports(
            &[&brackets, &e1, &e2],
            &format!("{} bracket rows from criteria 7 and 8, max embedding ratio {worst:.15}", brackets.rows.len()),
        )
    });

    suite.run(9, "Morrey comparison and dilation invariance", secs(60), |s| {
        let mut reports = Vec::new();
        for spec in [defaults::morrey_1d(seed), defaults::morrey(seed)] {
            let c = corpus(spec);
            let mut r = verify_morrey(&c, &defaults::lambdas(c.spec.dim)).unwrap();
            s.freeze(&mut r, &c);
            s.save(&r, &format!("morrey-{}d", c.spec.dim));
            reports.push(r);
        }
        let dil = reports.iter().filter_map(|r| r.max_value("dilation")).fold(0.0, f64::max);
        let tol_ok = reports.iter().flat_map(|r| r.rows_named("dilation")).all(|row| row.bound == DILATION_TOL);
        let refs: Vec<&Report> = reports.iter().collect();
        let mut o = Outcome::from_reports(&refs, &format!("max dilation change {dil:e}"));
        o.pass &= tol_ok;
        o
    });

    suite.run(10, "operator interpolation with measured F0, F1 and frozen c", secs(60), |s| {
        let c = corpus(defaults::corollary(seed));
        let cp = defaults::corollary_params();
        let mut reports = Vec::new();
        for op in [OperatorSpec::Identity, OperatorSpec::DyadicAverage { order: 0 }, OperatorSpec::HardyAverage] {
            let mut r = verify_corollary(&op, &c, &cp).unwrap();
            s.freeze(&mut r, &c);
            s.save(&r, &format!("corollary-{}", op.name().replace(':', "")));
            reports.push(r);
        }
        let refs: Vec<&Report> = reports.iter().collect();
        let c_max = reports.iter().filter_map(|r| r.max_value("frozen:c")).fold(0.0, f64::max);
        Outcome::from_reports(&refs, &format!("max c {c_max:.4}"))
    });

    suite.run(11, "determinism across thread counts", secs(120), |s| {
        let mut same = 0;
        let mut differing = Vec::new();
        for name in ["theorem1", "morrey", "hardy", "corollary"] {
            let a = s.out.join(format!("det-{name}-1"));
            let b = s.out.join(format!("det-{name}-4"));
            let (ok_a, csv_a, json_a) = run_binary(&["verify", name, "--threads", "1"], &a);
            let (ok_b, csv_b, json_b) = run_binary(&["verify", name, "--threads", "4"], &b);
            if ok_a && ok_b && !csv_a.is_empty() && csv_a == csv_b && json_a == json_b {
                same += 1;
            } else {
                differing.push(name);
            }
        }
        Outcome {
            pass: differing.is_empty(),
            detail: format!("{same} verify runs byte-identical at 1 and 4 threads; differing: {differing:?}"),
        }
    });

    suite.lines.sort_by_key(|l| l.0);
    let failed: Vec<u32> = suite.lines.iter().filter(|l| !l.1).map(|l| l.0).collect();
    println!(
        "acceptance: {} of {} criteria pass{}",
        suite.lines.len() - failed.len(),
        suite.lines.len(),
        if failed.is_empty() { String::new() } else { format!("; failing {failed:?}") }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
