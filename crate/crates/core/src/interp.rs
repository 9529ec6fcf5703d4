//! Constructive decompositions `f = f₀ + f₁` and two-sided brackets for the
//! Peetre K-functional of a couple of net spaces.
//!
//! The splitter replaces `f` by its averages over a grid-aligned partition
//! into cubes of one size: for the dyadic net these are the order-`m` dyadic
//! cubes, for the all-cubes net the `τ`-partition with `τ = (h·2^{-L})ⁿ`.
//! Since the window extent is a power of two both families coincide as sets
//! of cells; they differ in the net used to measure the pieces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AveragePyramid, PrefixSums, SampledFunction, Window};
use crate::maximal::{maximal_profile_allcubes, maximal_profile_dyadic, MaximalProfile, SideSchedule};
use crate::norms::{net_norm, NormParams, SpacePair};
use crate::numeric::compensated_sum;
use crate::report::{Report, ReportRow};

/// Relative slack for comparisons that hold with equality in exact
/// arithmetic.
pub const ROUNDING_SLACK: f64 = 1e-12;

/// Coverage threshold for the head and tail of the geometric-grid sum.
pub const COVERAGE_TOLERANCE: f64 = 1e-6;

/// Which splitter produced a decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Provenance {
    /// `f₁` = averages over order-`m` dyadic cubes.
    Dyadic { order: i32 },
    /// `f₁` = averages over the partition into cubes of `side` cells.
    Partition { side: u64 },
    /// `f₀ = f`, `f₁ = 0`.
    WholeInFirst,
    /// `f₀ = 0`, `f₁ = f`.
    WholeInSecond,
}

impl Provenance {
    /// Compact label used in CSV exports.
    pub fn label(&self, window: Window) -> String {
        match *self {
            Provenance::Dyadic { order } => format!("dyadic:{order}"),
            Provenance::Partition { side } => format!("partition:{}", window.cube_measure(side)),
            Provenance::WholeInFirst => "first".to_string(),
            Provenance::WholeInSecond => "second".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub f0: SampledFunction,
    pub f1: SampledFunction,
    pub provenance: Provenance,
}

impl Decomposition {
    /// Largest `|f₀ + f₁ - f|` relative to `max|f|`.
    pub fn residual(&self, f: &SampledFunction) -> f64 {
        let scale = f.max_abs().max(f64::MIN_POSITIVE);
        self.f0
            .values()
            .iter()
            .zip(self.f1.values())
            .zip(f.values())
            .map(|((a, b), c)| (a + b - c).abs())
            .fold(0.0, f64::max)
            / scale
    }

    /// Largest `|∫_Q f₀| / ∫_Q |f|` over the cells `Q` of the splitting
    /// partition; zero for the trivial decompositions.
    pub fn block_mean_defect(&self, f: &SampledFunction) -> f64 {
        let side = match self.provenance {
            Provenance::Dyadic { order } => 1usize << (order - f.window().min_order()),
            Provenance::Partition { side } => side as usize,
            _ => return 0.0,
        };
        let ps0 = PrefixSums::new(&self.f0);
        let psa = PrefixSums::new(&f.map(f64::abs));
        let w = f.window();
        let blocks = w.extent() / side;
        let blocks1 = if w.dim == 1 { 1 } else { blocks };
        let mut worst = 0.0f64;
        for b0 in 0..blocks {
            for b1 in 0..blocks1 {
                let lo = [(b0 * side) as i64, (b1 * side) as i64];
                let hi = [lo[0] + side as i64, lo[1] + side as i64];
                let mass = psa.rect_sum(lo, hi);
                let defect = ps0.rect_sum(lo, hi).abs();
                if defect > 0.0 {
                    worst = worst.max(defect / mass.max(f64::MIN_POSITIVE));
                }
            }
        }
        worst
    }

    /// The documented invariants: cellwise reconstruction to `2^-40` and
    /// mean zero of `f₀` on every partition cell.
    pub fn check(&self, f: &SampledFunction) -> Result<()> {
        let tol = 2f64.powi(-40);
        let r = self.residual(f);
        if r > tol {
            return Err(Error::param(format!("decomposition residual {r:e} exceeds 2^-40")));
        }
        let d = self.block_mean_defect(f);
        if d > tol {
            return Err(Error::param(format!("f0 block mean defect {d:e} exceeds 2^-40")));
        }
        Ok(())
    }
}

/// Cellwise averages over aligned blocks of `2^k` cells per axis.
fn block_averages(f: &SampledFunction, pyramid: &AveragePyramid, order: i32) -> SampledFunction {
    let w = f.window();
    let k = (order - w.min_order()) as u32;
    let vals = pyramid.order(order).expect("order checked by caller");
    let sc = pyramid.side_count(order);
    SampledFunction::from_fn(w, |[i0, i1]| {
        let b0 = i0 >> k;
        if w.dim == 1 {
            vals[b0]
        } else {
            vals[b0 * sc + (i1 >> k)]
        }
    })
    .expect("averages of finite values are finite")
}

fn split_at_order(f: &SampledFunction, pyramid: &AveragePyramid, order: i32, provenance: Provenance) -> Decomposition {
    let phi0 = block_averages(f, pyramid, order);
    let f0 = f.combine(1.0, &phi0, -1.0).expect("same window");
    Decomposition {
        f0,
        f1: phi0,
        provenance,
    }
}

fn check_order(w: Window, order: i32) -> Result<()> {
    if order < w.min_order() || order > w.max_order() {
        return Err(Error::OrderOutOfRange {
            order,
            min: w.min_order(),
            max: w.max_order(),
        });
    }
    Ok(())
}

/// `f₁ = φ₀` (order-`m` dyadic averages), `f₀ = f - φ₀`.
pub fn split_dyadic(f: &SampledFunction, order: i32) -> Result<Decomposition> {
    check_order(f.window(), order)?;
    let pyramid = AveragePyramid::new(f);
    Ok(split_at_order(f, &pyramid, order, Provenance::Dyadic { order }))
}

/// Side in cells of the partition with cell measure `tau`.
pub fn partition_side(window: Window, tau: f64) -> Result<u64> {
    let e = window.extent() as u64;
    let mut below = None;
    let mut above = None;
    let mut h = 1u64;
    while h <= e {
        let m = window.cube_measure(h);
        if (m - tau).abs() <= ROUNDING_SLACK * m {
            return Ok(h);
        }
        if m < tau {
            below = Some(m);
        } else if above.is_none() {
            above = Some(m);
        }
        h *= 2;
    }
    Err(Error::NonRepresentableMeasure { tau, below, above })
}

/// `f₁ = φ₀` (averages on the partition into cubes of measure `τ`),
/// `f₀ = f - φ₀`.
pub fn split_partition(f: &SampledFunction, tau: f64) -> Result<Decomposition> {
    let w = f.window();
    let side = partition_side(w, tau)?;
    let order = w.min_order() + side.trailing_zeros() as i32;
    let pyramid = AveragePyramid::new(f);
    Ok(split_at_order(f, &pyramid, order, Provenance::Partition { side }))
}

/// Rebuilds the decomposition a witness refers to.
pub fn decompose(f: &SampledFunction, provenance: Provenance) -> Result<Decomposition> {
    match provenance {
        Provenance::Dyadic { order } => split_dyadic(f, order),
        Provenance::Partition { side } => split_partition(f, f.window().cube_measure(side)),
        Provenance::WholeInFirst => Ok(Decomposition {
            f0: f.clone(),
            f1: SampledFunction::zeros(f.window()),
            provenance,
        }),
        Provenance::WholeInSecond => Ok(Decomposition {
            f0: SampledFunction::zeros(f.window()),
            f1: f.clone(),
            provenance,
        }),
    }
}

fn allcubes(f: &SampledFunction) -> MaximalProfile {
    maximal_profile_allcubes(f, SideSchedule::AllSides).expect("all-sides schedule is valid")
}

/// Checks `sup φ₀ ≤ f̄(τ)`, `φ̄₀(s) ≤ f̄(τ)` for `s ≤ τ` and
/// `φ̄₀(s) ≤ 4 f̄(s)` for `s > τ` on the all-cubes net, at every breakpoint
/// of either profile.
pub fn phi_bar_bound_check(f: &SampledFunction, tau: f64) -> Result<Report> {
    f.require_nonnegative()?;
    let profile = allcubes(f);
    phi_bar_bound_check_with(f, &profile, tau)
}

pub(crate) fn phi_bar_bound_check_with(f: &SampledFunction, profile: &MaximalProfile, tau: f64) -> Result<Report> {
    let d = split_partition(f, tau)?;
    let phi_profile = allcubes(&d.f1);
    let f_tau = profile.eval(tau);
    let params = format!("tau={tau}");

    let mut report = Report::new("phi-bar bound");
    let sup = d.f1.max_abs();
    report.push(ReportRow::at_most("phi0-sup", params.clone(), sup, f_tau, ROUNDING_SLACK));

    let mut points: Vec<f64> = profile
        .breakpoints()
        .iter()
        .chain(phi_profile.breakpoints())
        .copied()
        .chain([tau])
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup();

    let (mut small, mut small_at) = (0.0f64, 0.0);
    let (mut large, mut large_at) = (0.0f64, f64::NAN);
    for &s in &points {
        let phi = phi_profile.eval(s);
        if s <= tau {
            let r = ratio(phi, f_tau);
            if r > small {
                small = r;
                small_at = s;
            }
        } else {
            let r = ratio(phi, profile.eval(s));
            if r > large || large_at.is_nan() {
                large = large.max(r);
                large_at = s;
            }
        }
    }
    report.push(
        ReportRow::at_most("phi-bar-below-tau", params.clone(), small, 1.0, ROUNDING_SLACK)
            .with_witness(format!("s={small_at}")),
    );
    report.push(
        ReportRow::at_most("phi-bar-above-tau", params, large, 4.0, ROUNDING_SLACK)
            .with_witness(if large_at.is_nan() { String::new() } else { format!("s={large_at}") }),
    );
    Ok(report)
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// `|∫_I (f - φ₀)| ≤ 4ⁿ |I|^{(n-1)/n} τ^{1/n} f̄(τ)` for `samples` random
/// grid cubes `I` with `|I| ≥ τ` meeting the window.
pub fn boundary_lemma_check(f: &SampledFunction, tau: f64, samples: usize, seed: u64) -> Result<Report> {
    f.require_nonnegative()?;
    let profile = allcubes(f);
    boundary_lemma_check_with(f, &profile, tau, samples, seed)
}

pub(crate) fn boundary_lemma_check_with(
    f: &SampledFunction,
    profile: &MaximalProfile,
    tau: f64,
    samples: usize,
    seed: u64,
) -> Result<Report> {
    let w = f.window();
    let d = split_partition(f, tau)?;
    let ps = PrefixSums::new(&d.f0);
    let n = w.dim as f64;
    let e = w.extent() as i64;
    let h_min = partition_side(w, tau)? as i64;
    let f_tau = profile.eval(tau);
    let cell = w.cell_measure();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut witness = String::new();
    for _ in 0..samples {
        let side = rng.gen_range(h_min..=e);
        let mut corner = [0i64; 2];
        for c in corner.iter_mut().take(w.dim) {
            *c = rng.gen_range(-side + 1..e);
        }
        let hi = [corner[0] + side, if w.dim == 1 { 1 } else { corner[1] + side }];
        let lhs = (ps.rect_sum(corner, hi) * cell).abs();
        let measure = w.cube_measure(side as u64);
        let rhs = 4f64.powf(n) * measure.powf((n - 1.0) / n) * tau.powf(1.0 / n) * f_tau;
        let r = ratio(lhs, rhs);
        if r > worst {
            worst = r;
            witness = format!("corner=({};{}) side={side}", corner[0], corner[1]);
        }
    }
    let mut report = Report::new("boundary lemma");
    report.push(
        ReportRow::at_most("boundary-lemma", format!("tau={tau} samples={samples}"), worst, 1.0, ROUNDING_SLACK)
            .with_witness(witness),
    );
    Ok(report)
}

/// Inner exponent of both endpoint spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndpointQ {
    Infinity,
    Sigma,
}

/// Endpoint couple `(N_{p₀,r}, N_{p₁,r})` with a shared inner exponent `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Endpoints {
    pub p0: f64,
    #[serde(with = "crate::report::real")]
    pub p1: f64,
    #[serde(with = "crate::report::real")]
    pub inner: f64,
}

impl Endpoints {
    /// `p₁ = ∞` is allowed with `inner = ∞` (the `N_{∞,∞}` endpoint).
    pub fn new(p0: f64, p1: f64, inner: f64) -> Result<Endpoints> {
        if !(p0 > 0.0 && p1 > p0) {
            return Err(Error::param(format!("need 0 < p0 < p1, got p0 = {p0}, p1 = {p1}")));
        }
        if !(inner > 0.0) {
            return Err(Error::param(format!("inner exponent must be positive, got {inner}")));
        }
        if p1.is_infinite() && inner.is_finite() {
            return Err(Error::param("p1 = inf requires an infinite inner exponent"));
        }
        Ok(Endpoints { p0, p1, inner })
    }

    pub fn from_pair(pair: &SpacePair, q: EndpointQ) -> Result<Endpoints> {
        match q {
            EndpointQ::Infinity => Endpoints::new(pair.p0, pair.p1, f64::INFINITY),
            EndpointQ::Sigma => {
                let sigma = pair.sigma().ok_or_else(|| Error::param("sigma undefined for q0 = q1 = q = inf"))?;
                Endpoints::new(pair.p0, pair.p1, sigma)
            }
        }
    }

    /// `1/p₀ - 1/p₁`.
    pub fn delta(&self) -> f64 {
        1.0 / self.p0 - 1.0 / self.p1
    }

    /// Evaluation measure `s(t)` with `s^{1/p₀ - 1/p₁} = t`.
    pub fn measure_at(&self, t: f64) -> f64 {
        t.powf(1.0 / self.delta())
    }

    /// Constant `c` with `s^{1/p₀} f̄(s) ≤ c·K(t)`: one for weak endpoints,
    /// `(r/p₀)^{1/r}` otherwise.
    pub fn lower_factor(&self) -> f64 {
        if self.inner.is_infinite() {
            1.0
        } else {
            let r = self.inner;
            (r / self.p0).powf(1.0 / r).max((r / self.p1).powf(1.0 / r))
        }
    }

    fn params(&self) -> (NormParams, NormParams) {
        (
            NormParams {
                p: self.p0,
                q: self.inner,
            },
            NormParams {
                p: self.p1,
                q: self.inner,
            },
        )
    }
}

/// Net on which endpoints are measured; fixes the splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KNet {
    Dyadic,
    AllCubes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KProblem {
    pub endpoints: Endpoints,
    pub net: KNet,
}

impl KProblem {
    /// `(N_{p₀,∞}, N_{p₁,∞})` on the dyadic net.
    pub fn theorem1(pair: &SpacePair) -> Result<KProblem> {
        Ok(KProblem {
            endpoints: Endpoints::from_pair(pair, EndpointQ::Infinity)?,
            net: KNet::Dyadic,
        })
    }

    /// `(N_{p₀,σ}, N_{p₁,σ})` on the all-cubes net.
    pub fn theorem2(pair: &SpacePair) -> Result<KProblem> {
        Ok(KProblem {
            endpoints: Endpoints::from_pair(pair, EndpointQ::Sigma)?,
            net: KNet::AllCubes,
        })
    }

    pub fn profile(&self, f: &SampledFunction) -> MaximalProfile {
        match self.net {
            KNet::Dyadic => maximal_profile_dyadic(f),
            KNet::AllCubes => allcubes(f),
        }
    }

    fn norms(&self, profile: &MaximalProfile) -> (f64, f64) {
        let (a0, a1) = self.endpoints.params();
        (
            net_norm(profile, a0).expect("validated endpoints").value,
            net_norm(profile, a1).expect("validated endpoints").value,
        )
    }
}

/// Endpoint norms of one decomposition; `c0 + t·c1` bounds `K(t)` for all `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub provenance: Provenance,
    pub norm0: f64,
    pub norm1: f64,
}

impl Witness {
    pub fn cost(&self, t: f64) -> f64 {
        if self.norm1 == 0.0 {
            self.norm0
        } else {
            self.norm0 + t * self.norm1
        }
    }
}

/// `s(t)^{1/p₀} f̄(s(t)) / c`, a certified lower bound of `K(t)`.
pub fn k_lower(profile: &MaximalProfile, t: f64, endpoints: &Endpoints) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::param(format!("K evaluated at t = {t}; need t > 0")));
    }
    Ok(lower_at(profile, t, endpoints))
}

fn lower_at(profile: &MaximalProfile, t: f64, e: &Endpoints) -> f64 {
    let s = e.measure_at(t);
    if s == 0.0 || s.is_infinite() {
        return 0.0;
    }
    s.powf(1.0 / e.p0) * profile.eval(s) / e.lower_factor()
}

#[derive(Debug, Clone)]
pub struct KUpper {
    pub value: f64,
    pub decomposition: Decomposition,
    /// The prescribed parameter fell outside the representable range.
    pub clamped: bool,
}

/// Upper bound at a single `t`: the splitter at the prescribed parameter
/// and its two neighbours on each side, plus the trivial decompositions.
/// Weak endpoints use the dyadic net, `σ` endpoints the all-cubes net.
pub fn k_upper(f: &SampledFunction, t: f64, pair: &SpacePair, endpoint_q: EndpointQ) -> Result<KUpper> {
    if !(t > 0.0) {
        return Err(Error::param(format!("K evaluated at t = {t}; need t > 0")));
    }
    let problem = match endpoint_q {
        EndpointQ::Infinity => KProblem::theorem1(pair)?,
        EndpointQ::Sigma => KProblem::theorem2(pair)?,
    };
    let solver = KSolver::new(f, problem)?;
    let (w, clamped) = solver.upper_at(t);
    Ok(KUpper {
        value: w.cost(t),
        decomposition: decompose(f, w.provenance)?,
        clamped,
    })
}

/// Geometric grid `t = ratio^m`, `m ∈ [m_lo, m_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TGrid {
    pub ratio: f64,
    pub m_lo: i32,
    pub m_hi: i32,
}

impl TGrid {
    /// `a = 2^{n/p₀}` with `m` spanning `±((W+L)p₀/n + 8)`.
    pub fn default_for(window: Window, p0: f64) -> TGrid {
        let n = window.dim as f64;
        let span = ((window.window_order + window.level) as f64 * p0 / n).ceil() as i32 + 8;
        TGrid {
            ratio: 2f64.powf(n / p0),
            m_lo: -span,
            m_hi: span,
        }
    }

    /// Same range of `t` with the ratio replaced by its square root.
    pub fn halved(&self) -> TGrid {
        TGrid {
            ratio: self.ratio.sqrt(),
            m_lo: 2 * self.m_lo,
            m_hi: 2 * self.m_hi,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (self.m_lo..=self.m_hi).map(|m| self.ratio.powi(m)).collect()
    }
}

/// Profiles of `f` and of both pieces of every splitter order, for one net.
/// Independent of the endpoint exponents, so one instance serves several
/// parameter pairs.
#[derive(Debug, Clone)]
pub struct SplitProfiles {
    net: KNet,
    window: Window,
    profile: MaximalProfile,
    /// Indexed by `order - min_order`: `(provenance, f₀ profile, f₁ profile)`.
    splits: Vec<(Provenance, MaximalProfile, MaximalProfile)>,
}

impl SplitProfiles {
    pub fn new(f: &SampledFunction, net: KNet) -> SplitProfiles {
        let w = f.window();
        let profile_of = |g: &SampledFunction| match net {
            KNet::Dyadic => maximal_profile_dyadic(g),
            KNet::AllCubes => allcubes(g),
        };
        let pyramid = AveragePyramid::new(f);
        let splits = (w.min_order()..=w.max_order())
            .into_par_iter()
            .map(|order| {
                let provenance = match net {
                    KNet::Dyadic => Provenance::Dyadic { order },
                    KNet::AllCubes => Provenance::Partition {
                        side: 1u64 << (order - w.min_order()),
                    },
                };
                let d = split_at_order(f, &pyramid, order, provenance);
                (provenance, profile_of(&d.f0), profile_of(&d.f1))
            })
            .collect();
        SplitProfiles {
            net,
            window: w,
            profile: profile_of(f),
            splits,
        }
    }

    pub fn net(&self) -> KNet {
        self.net
    }

    pub fn profile(&self) -> &MaximalProfile {
        &self.profile
    }
}

/// Precomputed candidate decompositions of one function.
#[derive(Debug, Clone)]
pub struct KSolver {
    problem: KProblem,
    window: Window,
    profile: MaximalProfile,
    /// Indexed by `order - min_order`.
    splits: Vec<Witness>,
    whole_first: Witness,
    whole_second: Witness,
}

impl KSolver {
    pub fn new(f: &SampledFunction, problem: KProblem) -> Result<KSolver> {
        KSolver::from_profiles(&SplitProfiles::new(f, problem.net), problem.endpoints)
    }

    pub fn from_profiles(sp: &SplitProfiles, endpoints: Endpoints) -> Result<KSolver> {
        let endpoints = Endpoints::new(endpoints.p0, endpoints.p1, endpoints.inner)?;
        let problem = KProblem { endpoints, net: sp.net };
        let (n0, n1) = problem.norms(&sp.profile);
        let splits = sp
            .splits
            .iter()
            .map(|(provenance, p0, p1)| Witness {
                provenance: *provenance,
                norm0: problem.norms(p0).0,
                norm1: problem.norms(p1).1,
            })
            .collect();
        Ok(KSolver {
            problem,
            window: sp.window,
            profile: sp.profile.clone(),
            splits,
            whole_first: Witness {
                provenance: Provenance::WholeInFirst,
                norm0: n0,
                norm1: 0.0,
            },
            whole_second: Witness {
                provenance: Provenance::WholeInSecond,
                norm0: 0.0,
                norm1: n1,
            },
        })
    }

    pub fn problem(&self) -> &KProblem {
        &self.problem
    }

    pub fn profile(&self) -> &MaximalProfile {
        &self.profile
    }

    /// `‖f‖_{A₀}` and `‖f‖_{A₁}`.
    pub fn endpoint_norms(&self) -> (f64, f64) {
        (self.whole_first.norm0, self.whole_second.norm1)
    }

    /// All candidate witnesses in canonical order.
    pub fn candidates(&self) -> impl Iterator<Item = &Witness> {
        self.splits.iter().chain([&self.whole_first, &self.whole_second])
    }

    pub fn lower(&self, t: f64) -> f64 {
        lower_at(&self.profile, t, &self.problem.endpoints)
    }

    /// Best witness in the neighbourhood of the prescribed parameter.
    pub fn upper_at(&self, t: f64) -> (Witness, bool) {
        let w = self.window;
        let s = self.problem.endpoints.measure_at(t);
        let exact = s.log2() / w.dim as f64;
        let (lo, hi) = (w.min_order(), w.max_order());
        let clamped = !(exact >= lo as f64 - 0.5 && exact <= hi as f64 + 0.5);
        let centre = if exact.is_nan() {
            lo
        } else {
            exact.round().clamp(lo as f64, hi as f64) as i32
        };
        let mut best = self.whole_first;
        let mut best_cost = best.cost(t);
        let neighbours = ((centre - 2).max(lo)..=(centre + 2).min(hi)).map(|m| &self.splits[(m - lo) as usize]);
        for cand in neighbours.chain([&self.whole_second]) {
            let c = cand.cost(t);
            if c < best_cost || best_cost.is_nan() {
                best = *cand;
                best_cost = c;
            }
        }
        (best, clamped)
    }

    /// Bracket on `grid`: neighbourhood search per `t`, then the upper values
    /// are replaced by the minimum over every witness found on the grid and
    /// the lower values by their monotone and `K(t)/t` envelopes.
    pub fn bracket(&self, grid: TGrid) -> KBracket {
        let t_grid = grid.points();
        let raw: Vec<(f64, Witness, bool)> = t_grid
            .par_iter()
            .map(|&t| {
                let (w, c) = self.upper_at(t);
                (self.lower(t), w, c)
            })
            .collect();

        let mut found: Vec<Witness> = Vec::new();
        for (_, w, _) in &raw {
            if !found.iter().any(|f| f.provenance == w.provenance) {
                found.push(*w);
            }
        }
        found.sort_by_key(|w| w.provenance);

        let mut upper = Vec::with_capacity(t_grid.len());
        let mut witnesses = Vec::with_capacity(t_grid.len());
        for &t in &t_grid {
            let mut best = found[0];
            for w in &found[1..] {
                if w.cost(t) < best.cost(t) {
                    best = *w;
                }
            }
            upper.push(best.cost(t));
            witnesses.push(best);
        }

        // K is nondecreasing and K(t)/t is nonincreasing, so both envelopes
        // of a certified lower bound are certified.
        let mut lower: Vec<f64> = raw.iter().map(|r| r.0).collect();
        for i in 1..lower.len() {
            lower[i] = lower[i].max(lower[i - 1]);
        }
        for i in (0..lower.len().saturating_sub(1)).rev() {
            let scaled = lower[i + 1] * (t_grid[i] / t_grid[i + 1]);
            lower[i] = lower[i].max(scaled);
        }

        let (norm_first, norm_second) = self.endpoint_norms();
        KBracket {
            grid,
            window: self.window,
            t_grid,
            lower,
            upper,
            witnesses,
            clamped: raw.iter().map(|r| r.2).collect(),
            norm_first,
            norm_second,
        }
    }

    /// Widens `grid` in steps of 8 until every `(θ, q)` in `targets` has
    /// head and tail contributions below [`COVERAGE_TOLERANCE`], or the
    /// grid reaches `max_points`.
    pub fn bracket_covering(&self, grid: TGrid, targets: &[(f64, f64)], max_points: usize) -> KBracket {
        let mut grid = grid;
        loop {
            let kb = self.bracket(grid);
            let (mut widen_lo, mut widen_hi) = (false, false);
            for &(theta, q) in targets {
                let r = interp_norm(&kb, theta, q);
                if !r.covered {
                    widen_lo |= r.head_bound > 0.0 && r.head_bound.is_finite();
                    widen_hi |= r.tail_bound > 0.0 && r.tail_bound.is_finite();
                }
            }
            let size = (grid.m_hi - grid.m_lo + 1) as usize;
            if !(widen_lo || widen_hi) || size + 16 > max_points {
                return kb;
            }
            if widen_lo {
                grid.m_lo -= 8;
            }
            if widen_hi {
                grid.m_hi += 8;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KBracket {
    pub grid: TGrid,
    pub window: Window,
    pub t_grid: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub witnesses: Vec<Witness>,
    pub clamped: Vec<bool>,
    /// `‖f‖_{A₀}`, bounding `K(t)` for large `t`.
    pub norm_first: f64,
    /// `‖f‖_{A₁}`, bounding `K(t)/t` for small `t`.
    pub norm_second: f64,
}

impl KBracket {
    /// Violations of `lower ≤ upper`, monotonicity of both sequences and
    /// `upper(t)/t` nonincreasing (relative tolerance `1e-9`).
    pub fn violations(&self) -> Vec<String> {
        let tol = 1e-9;
        let mut out = Vec::new();
        for (i, &t) in self.t_grid.iter().enumerate() {
            if self.lower[i] > self.upper[i] * (1.0 + ROUNDING_SLACK) {
                out.push(format!("lower > upper at t={t}: {} > {}", self.lower[i], self.upper[i]));
            }
            if i > 0 {
                let tp = self.t_grid[i - 1];
                if self.upper[i] < self.upper[i - 1] * (1.0 - tol) {
                    out.push(format!("upper decreases at t={t}"));
                }
                if self.lower[i] < self.lower[i - 1] * (1.0 - tol) {
                    out.push(format!("lower decreases at t={t}"));
                }
                if self.upper[i] / t > self.upper[i - 1] / tp * (1.0 + tol) {
                    out.push(format!("upper/t increases at t={t}"));
                }
            }
        }
        out
    }

    /// CSV with header `t,lower,upper,witness_param`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,lower,upper,witness_param\n");
        for i in 0..self.t_grid.len() {
            s.push_str(&format!(
                "{},{},{},{}\n",
                self.t_grid[i],
                self.lower[i],
                self.upper[i],
                self.witnesses[i].provenance.label(self.window)
            ));
        }
        s
    }
}

/// Bounds on `(Σ_m (a^{-θm} K(a^m))^q)^{1/q}` from a bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterpNorm {
    pub lower: f64,
    /// Includes the analytic bounds for the grid head and tail.
    pub upper: f64,
    /// Bound on the `m < m_lo` part from `K(t) ≤ t‖f‖_{A₁}` (q-th power for
    /// finite `q`, sup otherwise).
    pub head_bound: f64,
    /// Bound on the `m > m_hi` part from `K(t) ≤ ‖f‖_{A₀}`.
    pub tail_bound: f64,
    /// Share of the upper value owed to the head and tail bounds.
    pub uncovered_fraction: f64,
    pub covered: bool,
}

impl InterpNorm {
    /// Values scaled by `(ln a)^{1/q}`, comparable across grid ratios.
    pub fn normalized(&self, ratio: f64, q: f64) -> (f64, f64) {
        if q.is_infinite() {
            (self.lower, self.upper)
        } else {
            let c = ratio.ln().powf(1.0 / q);
            (self.lower * c, self.upper * c)
        }
    }
}

fn geometric_tail(base: f64, first_exp: f64, step_exp: f64) -> f64 {
    // Σ_{k≥0} base^{first_exp + k·step_exp} with step_exp < 0.
    base.powf(first_exp) / (1.0 - base.powf(step_exp))
}

/// Geometric-grid interpolation quasi-norm bounds.
pub fn interp_norm(kb: &KBracket, theta: f64, q: f64) -> InterpNorm {
    let a = kb.grid.ratio;
    let weights: Vec<f64> = (kb.grid.m_lo..=kb.grid.m_hi).map(|m| a.powf(-theta * m as f64)).collect();
    let (m_lo, m_hi) = (kb.grid.m_lo as f64, kb.grid.m_hi as f64);
    let scale = |norm: f64, bound: f64| if norm == 0.0 { 0.0 } else { norm * bound };
    if q.is_infinite() {
        let lower = weights.iter().zip(&kb.lower).map(|(w, k)| w * k).fold(0.0, f64::max);
        let body = weights.iter().zip(&kb.upper).map(|(w, k)| w * k).fold(0.0, f64::max);
        let head = scale(kb.norm_second, a.powf((1.0 - theta) * (m_lo - 1.0)));
        let tail = scale(kb.norm_first, a.powf(-theta * (m_hi + 1.0)));
        let edge = head.max(tail);
        let upper = body.max(edge);
        let covered = edge <= body;
        return InterpNorm {
            lower,
            upper,
            head_bound: head,
            tail_bound: tail,
            uncovered_fraction: if covered { 0.0 } else { 1.0 - body / upper },
            covered,
        };
    }
    let lower = compensated_sum(weights.iter().zip(&kb.lower).map(|(w, k)| (w * k).powf(q))).powf(1.0 / q);
    let body = compensated_sum(weights.iter().zip(&kb.upper).map(|(w, k)| (w * k).powf(q)));
    let head = scale(
        kb.norm_second.powf(q),
        geometric_tail(a, (1.0 - theta) * q * (m_lo - 1.0), -(1.0 - theta) * q),
    );
    let tail = scale(kb.norm_first.powf(q), geometric_tail(a, -theta * q * (m_hi + 1.0), -theta * q));
    let total = body + head + tail;
    let uncovered = if total == 0.0 { 0.0 } else { (head + tail) / total };
    InterpNorm {
        lower,
        upper: total.powf(1.0 / q),
        head_bound: head,
        tail_bound: tail,
        uncovered_fraction: uncovered,
        covered: uncovered <= COVERAGE_TOLERANCE,
    }
}
