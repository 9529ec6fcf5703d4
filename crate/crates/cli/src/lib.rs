//! Command-line frontend: argument parsing, run configuration and the
//! commands behind the `netspace` binary.

pub mod config;
pub mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use netspace::harness::{
    generate_corpus, hardy_suite, refinement_drift, verify_cancellation, verify_corollary, verify_embedding,
    verify_lemmas, verify_morrey, verify_theorem1, verify_theorem2, Corpus, CorpusSpec, FreezeMode, FrozenConstants,
    OperatorSpec,
};
use netspace::interp::{interp_norm, Endpoints, KNet, KSolver, SplitProfiles, TGrid};
use netspace::maximal::maximal_profile;
use netspace::norms::{morrey_norm, net_norm, MorreyParams};
use netspace::report::{Report, SCHEMA_VERSION};
use netspace::{GridFormat, NetKind, NormParams, SampledFunction, SideSchedule, SpacePair, Window};

pub use config::{defaults, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "netspace", version, about = "Net maximal functions, net-space norms and interpolation checks")]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// dyadic, allcubes or explicit:<path>
    #[arg(long, global = true)]
    pub net: Option<String>,
    /// Record frozen constants instead of checking them.
    #[arg(long, global = true)]
    pub freeze: bool,
    /// Also emit SVG charts.
    #[arg(long, global = true)]
    pub plot: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Maximal profile of each input as CSV.
    Maximal {
        inputs: Vec<PathBuf>,
        /// all, geometric or geometric:<ratio>
        #[arg(long)]
        schedule: Option<String>,
    },
    /// N_{p,q} quasi-norm of each input (files or directories).
    Norm {
        inputs: Vec<PathBuf>,
        #[arg(short)]
        p: Option<f64>,
        #[arg(short)]
        q: Option<f64>,
    },
    /// Morrey norm against N_{p,inf} on all cubes.
    Morrey {
        inputs: Vec<PathBuf>,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// K-functional bracket on the geometric t-grid.
    Kfunc {
        input: PathBuf,
        #[arg(long)]
        p0: Option<f64>,
        #[arg(long)]
        p1: Option<f64>,
        /// Inner exponent of both endpoints (default inf).
        #[arg(long)]
        inner: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
    },
    /// Run a verification and write its report.
    Verify(VerifyArgs),
    /// Write a generated corpus as csv-grid files.
    GenCorpus {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        nonneg: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VerifyName {
    Theorem1,
    Theorem2,
    Embedding,
    Hardy,
    Corollary,
    Morrey,
    Lemmas,
    Cancellation,
}

impl VerifyName {
    pub fn stem(&self) -> &'static str {
        match self {
            VerifyName::Theorem1 => "theorem1",
            VerifyName::Theorem2 => "theorem2",
            VerifyName::Embedding => "embedding",
            VerifyName::Hardy => "hardy",
            VerifyName::Corollary => "corollary",
            VerifyName::Morrey => "morrey",
            VerifyName::Lemmas => "lemmas",
            VerifyName::Cancellation => "cancellation",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CorpusArgs {
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub level: Option<i32>,
    #[arg(long)]
    pub window_order: Option<i32>,
    /// Number of functions (random cases for `hardy`).
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    pub name: VerifyName,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub p0: Vec<f64>,
    #[arg(long)]
    pub p1: Option<f64>,
    #[arg(long)]
    pub q0: Option<f64>,
    #[arg(long)]
    pub q1: Option<f64>,
    #[arg(long)]
    pub theta: Vec<f64>,
    #[arg(long)]
    pub q: Vec<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Corollary input exponent of both sides.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub lambda: Vec<f64>,
    /// identity, dyadic-average:<m> or hardy-average
    #[arg(long)]
    pub operator: Option<String>,
    /// Random cubes per function for the boundary lemma.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Also rerun on the grid refined L -> L+1 and report ratio drift.
    #[arg(long)]
    pub refine: bool,
    /// Skip the frozen-constant comparison.
    #[arg(long)]
    pub no_frozen: bool,
}

/// Result of a command: whether every check passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

pub fn parse_operator(s: &str) -> Result<OperatorSpec> {
    match s {
        "identity" => Ok(OperatorSpec::Identity),
        "hardy-average" => Ok(OperatorSpec::HardyAverage),
        _ => match s.strip_prefix("dyadic-average:") {
            Some(m) => Ok(OperatorSpec::DyadicAverage {
                order: m.parse().with_context(|| format!("bad order in `{s}`"))?,
            }),
            None => bail!("unknown operator `{s}`"),
        },
    }
}

fn parse_schedule(s: &str) -> Result<SideSchedule> {
    match s {
        "all" => Ok(SideSchedule::AllSides),
        "geometric" => Ok(SideSchedule::Geometric(SideSchedule::DEFAULT_RATIO)),
        _ => match s.strip_prefix("geometric:") {
            Some(r) => Ok(SideSchedule::Geometric(r.parse().with_context(|| format!("bad ratio in `{s}`"))?)),
            None => bail!("unknown side schedule `{s}`"),
        },
    }
}

/// Files named directly, plus every grid file (csv, bin, raw, f64) inside
/// named directories in lexicographic order.
pub fn load_inputs(paths: &[PathBuf]) -> Result<Vec<(PathBuf, SampledFunction)>> {
    if paths.is_empty() {
        bail!("no input given");
    }
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|e| matches!(e.extension().and_then(|x| x.to_str()), Some("csv" | "bin" | "raw" | "f64")))
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(p.clone());
        }
    }
    files
        .into_iter()
        .map(|f| {
            let func = SampledFunction::load(&f, GridFormat::from_path(&f))?;
            Ok((f, func))
        })
        .collect()
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn to_json_value(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(if v.is_nan() {
            "nan"
        } else if v > 0.0 {
            "inf"
        } else {
            "-inf"
        })
    }
}

/// Parses the command line, merges the configuration file and runs.
pub fn run(cli: Cli) -> Result<Outcome> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.net.is_some() {
        cfg.net = cli.net.clone();
    }
    if let Some(k) = cfg.threads {
        // A global pool that already exists (repeated calls in one process)
        // keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global();
    }
    let freeze = if cli.freeze { FreezeMode::Freeze } else { FreezeMode::from_env() };
    match cli.command {
        Command::Maximal { inputs, schedule } => {
            cfg.check_subcommand("maximal")?;
            if !inputs.is_empty() {
                cfg.inputs = inputs;
            }
            if let Some(s) = schedule {
                cfg.schedule = Some(parse_schedule(&s)?);
            }
            cmd_maximal(&cfg, cli.plot)
        }
        Command::Norm { inputs, p, q } => {
            cfg.check_subcommand("norm")?;
            if !inputs.is_empty() {
                cfg.inputs = inputs;
            }
            let base = cfg.norm.unwrap_or(NormParams { p: 2.0, q: f64::INFINITY });
            cfg.norm = Some(NormParams::new(p.unwrap_or(base.p), q.unwrap_or(base.q))?);
            cmd_norm(&cfg)
        }
        Command::Morrey { inputs, lambda } => {
            cfg.check_subcommand("morrey")?;
            if !inputs.is_empty() {
                cfg.inputs = inputs;
            }
            if let Some(lambda) = lambda {
                cfg.morrey = Some(MorreyParams { lambda });
            }
            cmd_morrey(&cfg)
        }
        Command::Kfunc {
            input,
            p0,
            p1,
            inner,
            theta,
            q,
        } => {
            cfg.check_subcommand("kfunc")?;
            cfg.inputs = vec![input];
            let base = cfg.endpoints.unwrap_or(Endpoints {
                p0: 1.5,
                p1: 4.0,
                inner: f64::INFINITY,
            });
            cfg.endpoints = Some(Endpoints::new(
                p0.unwrap_or(base.p0),
                p1.unwrap_or(base.p1),
                inner.unwrap_or(base.inner),
            )?);
            cmd_kfunc(&cfg, theta.zip(q), cli.plot)
        }
        Command::Verify(args) => {
            cfg.check_subcommand("verify")?;
            apply_verify_args(&mut cfg, &args)?;
            let started = Instant::now();
            let frozen = (!args.no_frozen).then_some(freeze);
            let report = run_verify(args.name, &cfg, frozen)?;
            let out = cfg.out_dir();
            let stem = args.name.stem();
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let (csv, json_path) = report.write(&out, stem)?;
            let timings = json!({
                "schema": SCHEMA_VERSION,
                "elapsed_seconds": started.elapsed().as_secs_f64(),
                "threads": rayon::current_num_threads(),
            });
            write_file(&out.join(format!("{stem}.timings.json")), format!("{timings:#}\n"))?;
            if cli.plot {
                write_file(&out.join(format!("{stem}.svg")), svg::ratio_chart(&report, "ratio"))?;
            }
            let failures = report.failures().count();
            println!(
                "{stem}: {} rows, {failures} failing; wrote {} and {}",
                report.rows.len(),
                csv.display(),
                json_path.display()
            );
            for row in report.failures().take(10) {
                eprintln!("FAIL {} [{}] value={} bound={} {}", row.name, row.params, row.value, row.bound, row.witness);
            }
            Ok(if report.all_pass() { Outcome::Pass } else { Outcome::Fail })
        }
        Command::GenCorpus { corpus, nonneg } => {
            cfg.check_subcommand("gen-corpus")?;
            let mut spec = cfg
                .corpus
                .clone()
                .unwrap_or_else(|| CorpusSpec::new(Window::new(2, 3, 3).expect("static window"), cfg.seed(), 20, nonneg));
            if nonneg {
                spec.nonneg = true;
            }
            apply_corpus_args(&mut spec, &corpus, cfg.seed);
            cmd_gen_corpus(&cfg, &spec)
        }
    }
}

fn apply_corpus_args(spec: &mut CorpusSpec, args: &CorpusArgs, seed: Option<u64>) {
    if let Some(d) = args.dim {
        spec.dim = d;
    }
    if let Some(l) = args.level {
        spec.level = l;
    }
    if let Some(w) = args.window_order {
        spec.window_order = w;
    }
    if let Some(c) = args.count {
        spec.count = c;
    }
    if let Some(s) = seed {
        spec.seed = s;
    }
}

fn default_corpus(name: VerifyName, seed: u64) -> CorpusSpec {
    match name {
        VerifyName::Theorem1 | VerifyName::Hardy => defaults::theorem1(seed),
        VerifyName::Theorem2 => defaults::theorem2(seed),
        VerifyName::Embedding => defaults::embedding(seed),
        VerifyName::Corollary => defaults::corollary(seed),
        VerifyName::Morrey => defaults::morrey(seed),
        VerifyName::Lemmas => defaults::lemmas(seed),
        VerifyName::Cancellation => defaults::cancellation(seed),
    }
}

/// Folds the `verify` flags into the configuration.
pub fn apply_verify_args(cfg: &mut RunConfig, args: &VerifyArgs) -> Result<()> {
    let name = args.name;
    let mut spec = cfg.corpus.clone().unwrap_or_else(|| default_corpus(name, cfg.seed()));
    apply_corpus_args(&mut spec, &args.corpus, cfg.seed);
    if name == VerifyName::Hardy {
        if let Some(c) = args.corpus.count {
            cfg.hardy_count = Some(c);
        }
    } else {
        cfg.corpus = Some(spec);
    }
    if args.refine {
        cfg.refine = Some(true);
    }
    if let Some(s) = args.samples {
        cfg.lemma_samples = Some(s);
    }
    if !args.lambda.is_empty() {
        cfg.lambdas = args.lambda.clone();
    }
    if let Some(op) = &args.operator {
        cfg.operator = Some(parse_operator(op)?);
    }
    let theorem2 = name == VerifyName::Theorem2;
    let pair_flags = !args.p0.is_empty() || !args.theta.is_empty() || !args.q.is_empty() || args.p1.is_some();
    if name == VerifyName::Corollary {
        let mut cp = cfg.corollary.unwrap_or_else(defaults::corollary_params);
        if let Some(&p0) = args.p0.first() {
            cp.p0 = p0;
            cp.q0 = args.q0.unwrap_or(p0);
        }
        if let Some(p1) = args.p1 {
            cp.p1 = p1;
            cp.q1 = args.q1.unwrap_or(p1);
        }
        if let Some(&t) = args.theta.first() {
            cp.theta = t;
        }
        if let Some(&q) = args.q.first() {
            cp.q = Some(q);
        }
        if let Some(s) = args.sigma {
            cp.sigma = s;
        }
        if let Some(t) = args.tau {
            cp.tau = t;
        }
        cfg.corollary = Some(cp);
    } else if pair_flags || (cfg.pairs.is_empty() && matches!(name, VerifyName::Theorem1 | VerifyName::Theorem2 | VerifyName::Embedding)) {
        let defaults = if theorem2 { defaults::theorem2_pairs() } else { defaults::theorem1_pairs() };
        if !pair_flags {
            cfg.pairs = if name == VerifyName::Embedding { defaults[..1].to_vec() } else { defaults };
        } else {
            let mut p0s = args.p0.clone();
            if p0s.is_empty() {
                p0s.push(defaults[0].p0);
            }
            let thetas = if args.theta.is_empty() { defaults::THETAS.to_vec() } else { args.theta.clone() };
            let qs = if args.q.is_empty() { defaults::QS.to_vec() } else { args.q.clone() };
            let inner_default = if theorem2 { 2.0 } else { f64::INFINITY };
            let mut pairs = Vec::new();
            for &p0 in &p0s {
                let p1 = args.p1.unwrap_or(if theorem2 { 2.0 * p0 } else { 4.0 });
                for &theta in &thetas {
                    for &q in &qs {
                        let mut pair = SpacePair::new(
                            p0,
                            args.q0.unwrap_or(inner_default),
                            p1,
                            args.q1.unwrap_or(inner_default),
                            theta,
                            q,
                        )?;
                        if let Some(s) = args.sigma {
                            pair = pair.with_sigma(s)?;
                        }
                        pairs.push(pair);
                    }
                }
            }
            cfg.pairs = pairs;
        }
    }
    Ok(())
}

fn corpus_of(cfg: &RunConfig) -> Result<Corpus> {
    let spec = cfg.corpus.as_ref().context("no corpus configured")?;
    Ok(generate_corpus(spec)?)
}

fn embedding_net(cfg: &RunConfig) -> Result<KNet> {
    match cfg.net.as_deref().unwrap_or("dyadic") {
        "dyadic" => Ok(KNet::Dyadic),
        "allcubes" | "all-cubes" => Ok(KNet::AllCubes),
        other => bail!("net `{other}` has no K-functional splitter; use dyadic or allcubes"),
    }
}

/// Runs one verification from a fully resolved configuration. Frozen
/// constants are checked or recorded when `frozen` is set.
pub fn run_verify(name: VerifyName, cfg: &RunConfig, frozen: Option<FreezeMode>) -> Result<Report> {
    let seed = cfg.seed();
    let (mut report, hash) = match name {
        VerifyName::Hardy => (hardy_suite(seed, cfg.hardy_count.unwrap_or(defaults::HARDY_COUNT))?, None),
        _ => {
            let corpus = corpus_of(cfg)?;
            let hash = corpus.hash();
            let samples = cfg.lemma_samples.unwrap_or(defaults::LEMMA_SAMPLES);
            let mut report = match name {
                VerifyName::Theorem1 => verify_theorem1(&corpus, &cfg.pairs)?,
                VerifyName::Theorem2 => verify_theorem2(&corpus, &cfg.pairs, samples)?,
                VerifyName::Embedding => {
                    let pair = cfg.pairs.first().context("embedding needs a pair")?;
                    verify_embedding(&corpus, pair, embedding_net(cfg)?)?
                }
                VerifyName::Corollary => {
                    let op = cfg.operator.unwrap_or_else(defaults::operator);
                    verify_corollary(&op, &corpus, &cfg.corollary.unwrap_or_else(defaults::corollary_params))?
                }
                VerifyName::Morrey => {
                    let lambdas = if cfg.lambdas.is_empty() { defaults::lambdas(corpus.spec.dim) } else { cfg.lambdas.clone() };
                    verify_morrey(&corpus, &lambdas)?
                }
                VerifyName::Lemmas => {
                    let w = corpus.spec.window()?;
                    verify_lemmas(&corpus, &netspace::harness::lemma_taus(w), samples, seed)?
                }
                VerifyName::Cancellation => verify_cancellation(&corpus)?,
                VerifyName::Hardy => unreachable!(),
            };
            if cfg.refine == Some(true) && matches!(name, VerifyName::Theorem1 | VerifyName::Theorem2) {
                let refined = corpus.refined()?;
                let r2 = match name {
                    VerifyName::Theorem1 => verify_theorem1(&refined, &cfg.pairs)?,
                    _ => verify_theorem2(&refined, &cfg.pairs, 0)?,
                };
                report.extend(refinement_drift(&report, &r2));
            }
            (report, Some(hash))
        }
    };
    if let (Some(mode), Some(hash)) = (frozen, hash) {
        if report.rows_named(netspace::harness::frozen::FROZEN_PREFIX).next().is_some() {
            FrozenConstants::load_default()?.apply(&mut report, &hash, mode)?;
        }
    }
    Ok(report)
}

fn cmd_maximal(cfg: &RunConfig, plot: bool) -> Result<Outcome> {
    let inputs = load_inputs(&cfg.inputs)?;
    let out = cfg.out_dir();
    let single = inputs.len() == 1;
    for (path, f) in &inputs {
        let net = cfg.net_kind(f.window())?;
        let profile = maximal_profile(f, &net, cfg.schedule())?;
        let stem = if single {
            "profile".to_string()
        } else {
            format!("{}.profile", path.file_stem().and_then(|s| s.to_str()).unwrap_or("input"))
        };
        let csv = out.join(format!("{stem}.csv"));
        write_file(&csv, profile.to_csv())?;
        if plot {
            write_file(&out.join(format!("{stem}.svg")), svg::profile_chart(&path.display().to_string(), &profile))?;
        }
        println!("{}", csv.display());
    }
    Ok(Outcome::Pass)
}

fn norm_json(v: &netspace::NormValue) -> Value {
    let mut obj = json!({ "norm": to_json_value(v.value) });
    if let Some(d) = v.divergence {
        obj["divergent_segment"] = json!({ "from": to_json_value(d.from), "reason": d.reason });
    }
    obj
}

fn cmd_norm(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.norm.context("norm parameters missing")?;
    let inputs = load_inputs(&cfg.inputs)?;
    let mut rows = Vec::new();
    for (path, f) in &inputs {
        let profile = maximal_profile(f, &cfg.net_kind(f.window())?, cfg.schedule())?;
        let mut row = norm_json(&net_norm(&profile, params)?);
        if inputs.len() > 1 {
            row["input"] = json!(path.display().to_string());
        }
        rows.push(row);
    }
    let doc = if rows.len() == 1 {
        rows.pop().expect("one row")
    } else {
        json!({
            "schema": SCHEMA_VERSION,
            "p": to_json_value(params.p),
            "q": to_json_value(params.q),
            "rows": rows,
        })
    };
    let text = format!("{doc:#}\n");
    write_file(&cfg.out_dir().join("norm.json"), &text)?;
    print!("{text}");
    Ok(Outcome::Pass)
}

fn cmd_morrey(cfg: &RunConfig) -> Result<Outcome> {
    let mp = cfg.morrey.unwrap_or(MorreyParams { lambda: 0.0 });
    let inputs = load_inputs(&cfg.inputs)?;
    let mut rows = Vec::new();
    for (path, f) in &inputs {
        let dim = f.dim();
        let m = morrey_norm(f, mp)?;
        let np = NormParams::new(mp.net_exponent(dim), f64::INFINITY)?;
        let profile = maximal_profile(&f.map(f64::abs), &NetKind::AllCubes, SideSchedule::AllSides)?;
        let n = net_norm(&profile, np)?.value;
        rows.push(json!({
            "input": path.display().to_string(),
            "lambda": mp.lambda,
            "p": to_json_value(np.p),
            "morrey": to_json_value(m),
            "net_norm": to_json_value(n),
            "ratio": to_json_value(m / n),
        }));
    }
    let doc = json!({ "schema": SCHEMA_VERSION, "rows": rows });
    let text = format!("{doc:#}\n");
    write_file(&cfg.out_dir().join("morrey.json"), &text)?;
    print!("{text}");
    Ok(Outcome::Pass)
}

fn cmd_kfunc(cfg: &RunConfig, target: Option<(f64, f64)>, plot: bool) -> Result<Outcome> {
    let endpoints = cfg.endpoints.context("endpoints missing")?;
    let endpoints = Endpoints::new(endpoints.p0, endpoints.p1, endpoints.inner)?;
    let inputs = load_inputs(&cfg.inputs)?;
    let (path, f) = inputs.first().context("kfunc needs one input")?;
    let sp = SplitProfiles::new(f, embedding_net(cfg)?);
    let solver = KSolver::from_profiles(&sp, endpoints)?;
    let grid = TGrid::default_for(f.window(), endpoints.p0);
    let kb = match target {
        Some(t) => solver.bracket_covering(grid, &[t], netspace::harness::verify::MAX_GRID_POINTS),
        None => solver.bracket(grid),
    };
    let out = cfg.out_dir();
    let csv = out.join("kfunc.csv");
    write_file(&csv, kb.to_csv())?;
    if plot {
        let series = [
            svg::Series {
                label: "lower".into(),
                points: kb.t_grid.iter().copied().zip(kb.lower.iter().copied()).collect(),
            },
            svg::Series {
                label: "upper".into(),
                points: kb.t_grid.iter().copied().zip(kb.upper.iter().copied()).collect(),
            },
        ];
        write_file(
            &out.join("kfunc.svg"),
            svg::line_chart(&path.display().to_string(), "t", "K(t)", &series, true, true),
        )?;
    }
    let violations = kb.violations();
    let mut doc = json!({
        "csv": csv.display().to_string(),
        "points": kb.t_grid.len(),
        "norm_first": to_json_value(kb.norm_first),
        "norm_second": to_json_value(kb.norm_second),
        "violations": violations,
    });
    if let Some((theta, q)) = target {
        let ib = interp_norm(&kb, theta, q);
        doc["interp_lower"] = to_json_value(ib.lower);
        doc["interp_upper"] = to_json_value(ib.upper);
        doc["covered"] = json!(ib.covered);
    }
    println!("{doc:#}");
    Ok(if violations.is_empty() { Outcome::Pass } else { Outcome::Fail })
}

fn cmd_gen_corpus(cfg: &RunConfig, spec: &CorpusSpec) -> Result<Outcome> {
    let corpus = generate_corpus(spec)?;
    let dir = cfg.out_dir().join("corpus");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for (i, f) in corpus.functions.iter().enumerate() {
        f.save(&dir.join(format!("{i:03}.csv")), GridFormat::CsvGrid)?;
    }
    let meta = json!({
        "schema": SCHEMA_VERSION,
        "spec": spec,
        "hash": corpus.hash(),
        "labels": corpus.labels,
    });
    write_file(&cfg.out_dir().join("corpus.json"), format!("{meta:#}\n"))?;
    println!("{} functions in {}", corpus.len(), dir.display());
    Ok(Outcome::Pass)
}
