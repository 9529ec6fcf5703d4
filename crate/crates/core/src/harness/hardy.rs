//! Weighted Hardy inequalities with constant `(μσ)^{-1/σ}`:
//!
//! ```text
//! variant 1:  ‖ y^{-μ} (∫_0^y (r^{-ν}|g|)^σ dr/r)^{1/σ} ‖_{L^τ(dy/y)} ≤ (μσ)^{-1/σ} ‖ y^{-μ-ν} g ‖_{L^τ(dy/y)}
//! variant 2:  ‖ y^{ μ} (∫_y^∞ (r^{-ν}|g|)^σ dr/r)^{1/σ} ‖_{L^τ(dy/y)} ≤ (μσ)^{-1/σ} ‖ y^{ μ-ν} g ‖_{L^τ(dy/y)}
//! ```
//!
//! Both hold for `σ ≤ τ` (equality at `σ = τ`); for `τ < σ` they fail,
//! so that range is rejected.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, gauss_legendre, integrate_panels};
use crate::report::{Report, ReportRow};

/// Relative agreement required between closed-form and quadrature values.
pub const QUADRATURE_TOLERANCE: f64 = 1e-9;
const SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HardyVariant {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardyParams {
    pub mu: f64,
    pub nu: f64,
    pub sigma: f64,
    /// May be infinite.
    #[serde(with = "crate::report::real")]
    pub tau: f64,
}

impl HardyParams {
    pub fn new(mu: f64, nu: f64, sigma: f64, tau: f64) -> Result<HardyParams> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::param(format!("mu must be positive, got {mu}")));
        }
        if !nu.is_finite() {
            return Err(Error::param(format!("nu must be finite, got {nu}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::param(format!("sigma must be positive and finite, got {sigma}")));
        }
        if !(tau >= sigma) {
            return Err(Error::param(format!(
                "the inequality with constant (mu sigma)^(-1/sigma) needs sigma <= tau, got sigma = {sigma}, tau = {tau}"
            )));
        }
        Ok(HardyParams { mu, nu, sigma, tau })
    }

    pub fn constant(&self) -> f64 {
        (self.mu * self.sigma).powf(-1.0 / self.sigma)
    }

    fn label(&self) -> String {
        format!("mu={} nu={} sigma={} tau={}", self.mu, self.nu, self.sigma, self.tau)
    }
}

/// `g = values[j]` on `(breaks[j], breaks[j+1]]`, zero elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepG {
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
}

impl StepG {
    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<StepG> {
        if breaks.len() != values.len() + 1 || values.is_empty() {
            return Err(Error::param("step function needs len(breaks) = len(values) + 1 >= 2"));
        }
        if !(breaks[0] > 0.0) || breaks.windows(2).any(|w| !(w[1] > w[0])) || !breaks.last().unwrap().is_finite() {
            return Err(Error::param("breaks must be positive, finite and increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("step values must be finite"));
        }
        Ok(StepG { breaks, values })
    }

    /// Log-uniform breakpoints in `[10^-3, 10^3]`, values in `[-1, 1]` with
    /// occasional zeros.
    pub fn random(rng: &mut impl Rng) -> StepG {
        let k = rng.gen_range(1..=8);
        let mut breaks: Vec<f64> = (0..=k).map(|_| 10f64.powf(rng.gen_range(-3.0..3.0))).collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        while breaks.len() < 2 {
            breaks.push(breaks[0] * 2.0);
        }
        let values = (1..breaks.len())
            .map(|_| if rng.gen_bool(0.15) { 0.0 } else { rng.gen_range(-1.0..1.0) })
            .collect();
        StepG { breaks, values }
    }

    fn abs_at(&self, r: f64) -> f64 {
        if r <= self.breaks[0] || r > *self.breaks.last().unwrap() {
            return 0.0;
        }
        let j = self.breaks.partition_point(|&b| b < r);
        self.values[j - 1].abs()
    }
}

/// `∫_a^b r^{e-1} dr`.
fn power_integral(e: f64, a: f64, b: f64) -> f64 {
    if e == 0.0 {
        (b / a).ln()
    } else {
        (b.powf(e) - a.powf(e)) / e
    }
}

/// Both sides of one variant, each from two independent routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HardySides {
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_quadrature: f64,
    pub rhs_quadrature: f64,
}

/// Panels of width at most `0.5` in `ln y` between consecutive cuts.
fn log_panels(cuts: &[f64]) -> Vec<f64> {
    let mut out = vec![cuts[0]];
    for w in cuts.windows(2) {
        let k = ((w[1] - w[0]) / 0.5).ceil().max(1.0) as usize;
        for i in 1..=k {
            out.push(w[0] + (w[1] - w[0]) * i as f64 / k as f64);
        }
    }
    out
}

/// Closed-form inner integral on segments plus closed-form tails; the outer
/// integral over each segment uses composite Gauss–Legendre in `ln y`.
fn sides_semi_analytic(p: &HardyParams, g: &StepG, variant: HardyVariant) -> (f64, f64) {
    let (mu, nu, s, t) = (p.mu, p.nu, p.sigma, p.tau);
    let e_in = -nu * s;
    let segs: Vec<f64> = g
        .values
        .iter()
        .enumerate()
        .map(|(j, v)| v.abs().powf(s) * power_integral(e_in, g.breaks[j], g.breaks[j + 1]))
        .collect();
    let total = compensated_sum(segs.iter().copied());
    let rule = gauss_legendre(20);
    let k = g.values.len();
    // Inner integral as a function of y inside segment j.
    let inner = |j: usize, y: f64, before: f64| -> f64 {
        let v = g.values[j].abs().powf(s);
        match variant {
            HardyVariant::Lower => before + v * power_integral(e_in, g.breaks[j], y),
            HardyVariant::Upper => before + v * power_integral(e_in, y, g.breaks[j + 1]),
        }
    };
    let weight = |y: f64| match variant {
        HardyVariant::Lower => y.powf(-mu),
        HardyVariant::Upper => y.powf(mu),
    };
    let rhs_exp = match variant {
        HardyVariant::Lower => -mu - nu,
        HardyVariant::Upper => mu - nu,
    };
    // Cumulative inner values at segment starts.
    let before: Vec<f64> = (0..k)
        .map(|j| match variant {
            HardyVariant::Lower => compensated_sum(segs[..j].iter().copied()),
            HardyVariant::Upper => compensated_sum(segs[j + 1..].iter().copied()),
        })
        .collect();

    if t.is_infinite() {
        let mut lhs = match variant {
            // y > r_K: y^{-μ} I_K^{1/σ}, decreasing; sup at r_K.
            HardyVariant::Lower => g.breaks[k].powf(-mu) * total.powf(1.0 / s),
            // y < r_0: y^{μ} J_0^{1/σ}, sup at r_0.
            HardyVariant::Upper => g.breaks[0].powf(mu) * total.powf(1.0 / s),
        };
        for j in 0..k {
            let (a, b) = (g.breaks[j], g.breaks[j + 1]);
            let h = |y: f64| weight(y) * inner(j, y, before[j]).max(0.0).powf(1.0 / s);
            lhs = lhs.max(h(a)).max(h(b));
            for y in stationary_points(p, g.values[j].abs().powf(s), j, g, before[j], variant) {
                if y > a && y < b {
                    lhs = lhs.max(h(y));
                }
            }
        }
        let rhs = (0..k)
            .map(|j| {
                let v = g.values[j].abs();
                v * g.breaks[j].powf(rhs_exp).max(g.breaks[j + 1].powf(rhs_exp))
            })
            .fold(0.0, f64::max);
        return (lhs, p.constant() * rhs);
    }

    let mut lhs_terms = Vec::with_capacity(k + 1);
    lhs_terms.push(match variant {
        HardyVariant::Lower => total.powf(t / s) * g.breaks[k].powf(-mu * t) / (mu * t),
        HardyVariant::Upper => total.powf(t / s) * g.breaks[0].powf(mu * t) / (mu * t),
    });
    for j in 0..k {
        let cuts = log_panels(&[g.breaks[j].ln(), g.breaks[j + 1].ln()]);
        lhs_terms.push(integrate_panels(&rule, &cuts, |u| {
            let y = u.exp();
            (weight(y) * inner(j, y, before[j]).max(0.0).powf(1.0 / s)).powf(t)
        }));
    }
    let rhs = compensated_sum(
        (0..k).map(|j| g.values[j].abs().powf(t) * power_integral(rhs_exp * t, g.breaks[j], g.breaks[j + 1])),
    );
    (
        compensated_sum(lhs_terms).powf(1.0 / t),
        p.constant() * rhs.powf(1.0 / t),
    )
}

/// Interior critical point of `y ↦ w(y)^σ·(C + A·(y^{e} - c))` on segment
/// `j`; at most one exists.
fn stationary_points(p: &HardyParams, v: f64, j: usize, g: &StepG, before: f64, variant: HardyVariant) -> Vec<f64> {
    let (mu, nu, s) = (p.mu, p.nu, p.sigma);
    let e = -nu * s;
    if v == 0.0 || e == 0.0 {
        return Vec::new();
    }
    // Inner = C' + (v/e)·y^e (lower) or C' - (v/e)·y^e (upper).
    let (c_prime, a) = match variant {
        HardyVariant::Lower => (before - v / e * g.breaks[j].powf(e), v / e),
        HardyVariant::Upper => (before + v / e * g.breaks[j + 1].powf(e), -v / e),
    };
    // d/dy [y^{±μσ} (C' + a y^e)] = 0  ⇒  y^e = ∓μσ C' / (a (±μσ + e)).
    let m = match variant {
        HardyVariant::Lower => -mu * s,
        HardyVariant::Upper => mu * s,
    };
    let denom = a * (m + e);
    if denom == 0.0 {
        return Vec::new();
    }
    let ye = -m * c_prime / denom;
    if ye > 0.0 {
        vec![ye.powf(1.0 / e)]
    } else {
        Vec::new()
    }
}

/// Fully numerical evaluation of both sides: nested composite
/// Gauss–Legendre in `ln r` and `ln y` over `[u_lo, u_hi]`, with `g` given
/// pointwise. `kinks` are the points where `g` jumps.
fn sides_quadrature(
    p: &HardyParams,
    g: &dyn Fn(f64) -> f64,
    kinks: &[f64],
    u_lo: f64,
    u_hi: f64,
    variant: HardyVariant,
) -> (f64, f64) {
    let (mu, nu, s, t) = (p.mu, p.nu, p.sigma, p.tau);
    let rule = gauss_legendre(20);
    let mut cuts: Vec<f64> = vec![u_lo, u_hi];
    cuts.extend(kinks.iter().map(|k| k.ln()).filter(|u| *u > u_lo && *u < u_hi));
    cuts.sort_by(f64::total_cmp);
    let panels = log_panels(&cuts);
    let integrand = |u: f64| {
        let r = u.exp();
        (r.powf(-nu) * g(r)).powf(s)
    };
    // Inner integral at panel boundaries, accumulated from the side the
    // variant integrates from so that no tail is formed by subtraction.
    let pieces: Vec<f64> = panels
        .windows(2)
        .map(|w| integrate_panels(&rule, w, integrand))
        .collect();
    let m = panels.len();
    let mut left = vec![0.0; m];
    for i in 1..m {
        left[i] = left[i - 1] + pieces[i - 1];
    }
    let mut right = vec![0.0; m];
    for i in (0..m - 1).rev() {
        right[i] = right[i + 1] + pieces[i];
    }
    let outer = |u: f64, i: usize| {
        let y = u.exp();
        let (weight, inner) = match variant {
            HardyVariant::Lower => (y.powf(-mu), left[i] + integrate_panels(&rule, &[panels[i], u], integrand)),
            HardyVariant::Upper => (y.powf(mu), right[i + 1] + integrate_panels(&rule, &[u, panels[i + 1]], integrand)),
        };
        (weight * inner.powf(1.0 / s)).powf(t)
    };
    let lhs = compensated_sum(
        (0..panels.len() - 1).map(|i| integrate_panels(&rule, &panels[i..i + 2], |u| outer(u, i))),
    );
    let rhs_exp = match variant {
        HardyVariant::Lower => -mu - nu,
        HardyVariant::Upper => mu - nu,
    };
    let rhs = integrate_panels(&rule, &panels, |u| {
        let y = u.exp();
        (y.powf(rhs_exp) * g(y)).powf(t)
    });
    (lhs.powf(1.0 / t), p.constant() * rhs.powf(1.0 / t))
}

/// Both sides for a step function. The quadrature route truncates `ln y` at
/// a distance where the neglected tails are below `1e-16` relative.
pub fn hardy_sides(p: &HardyParams, g: &StepG, variant: HardyVariant) -> HardySides {
    let (lhs, rhs) = sides_semi_analytic(p, g, variant);
    if p.tau.is_infinite() {
        return HardySides {
            lhs,
            rhs,
            lhs_quadrature: f64::NAN,
            rhs_quadrature: f64::NAN,
        };
    }
    let reach = 40.0 / (p.mu * p.tau);
    let (u_lo, u_hi) = match variant {
        HardyVariant::Lower => (g.breaks[0].ln(), g.breaks.last().unwrap().ln() + reach),
        HardyVariant::Upper => (g.breaks[0].ln() - reach, g.breaks.last().unwrap().ln()),
    };
    let (lq, rq) = sides_quadrature(p, &|r| g.abs_at(r), &g.breaks, u_lo, u_hi, variant);
    HardySides {
        lhs,
        rhs,
        lhs_quadrature: lq,
        rhs_quadrature: rq,
    }
}

/// `g = r^β` on `(0, 1]` (variant 1) or `[1, ∞)` (variant 2), for which both
/// sides have closed forms. Needs `κ = ±(β - ν) > μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerCase {
    pub params: HardyParams,
    pub beta: f64,
    pub variant: HardyVariant,
}

impl PowerCase {
    fn kappa(&self) -> f64 {
        match self.variant {
            HardyVariant::Lower => self.beta - self.params.nu,
            HardyVariant::Upper => self.params.nu - self.beta,
        }
    }

    pub fn closed_form(&self) -> Result<(f64, f64)> {
        let HardyParams { mu, sigma: s, tau: t, .. } = self.params;
        let k = self.kappa();
        if !(k > mu) || t.is_infinite() {
            return Err(Error::param("power case needs kappa > mu and finite tau"));
        }
        let lhs = (k * s).powf(-t / s) * k / ((k - mu) * mu * t);
        let rhs = (mu * s).powf(-t / s) / ((k - mu) * t);
        Ok((lhs.powf(1.0 / t), rhs.powf(1.0 / t)))
    }

    pub fn quadrature(&self) -> (f64, f64) {
        let HardyParams { mu, tau: t, sigma: s, .. } = self.params;
        let k = self.kappa();
        let beta = self.beta;
        // Decay rates at both ends of the log range.
        let reach = 40.0 / ((k - mu) * t).min(mu * t).min(k * s);
        match self.variant {
            HardyVariant::Lower => {
                let g = move |r: f64| if r <= 1.0 { r.powf(beta) } else { 0.0 };
                sides_quadrature(&self.params, &g, &[1.0], -reach, reach, self.variant)
            }
            HardyVariant::Upper => {
                let g = move |r: f64| if r >= 1.0 { r.powf(beta) } else { 0.0 };
                sides_quadrature(&self.params, &g, &[1.0], -reach, reach, self.variant)
            }
        }
    }
}

/// Five power cases covering both variants, `σ < τ` and `σ = τ`.
pub fn standard_power_cases() -> Vec<PowerCase> {
    let case = |mu, nu, sigma, tau, beta, variant| PowerCase {
        params: HardyParams::new(mu, nu, sigma, tau).expect("valid parameters"),
        beta,
        variant,
    };
    vec![
        case(0.5, 0.3, 1.0, 2.0, 1.5, HardyVariant::Lower),
        case(1.0, -0.5, 0.5, 1.0, 1.0, HardyVariant::Lower),
        case(0.4, 1.0, 1.0, 1.0, 0.2, HardyVariant::Upper),
        case(0.7, 2.0, 2.0, 3.0, 0.5, HardyVariant::Upper),
        case(2.0, 0.0, 1.5, 4.0, 3.0, HardyVariant::Lower),
    ]
}

fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn push_case(report: &mut Report, name: &str, params: String, lhs: f64, rhs: f64, lq: f64, rq: f64) {
    report.push(ReportRow::at_most(format!("{name}:inequality"), params.clone(), lhs, rhs, SLACK));
    if lq.is_finite() {
        report.push(ReportRow::at_most(format!("{name}:lhs-quadrature"), params.clone(), rel_diff(lhs, lq), QUADRATURE_TOLERANCE, 0.0));
        report.push(ReportRow::at_most(format!("{name}:rhs-quadrature"), params, rel_diff(rhs, rq), QUADRATURE_TOLERANCE, 0.0));
    }
}

/// Both variants for every `g` at fixed parameters.
pub fn verify_hardy(params: &HardyParams, gs: &[StepG]) -> Result<Report> {
    let params = HardyParams::new(params.mu, params.nu, params.sigma, params.tau)?;
    let mut report = Report::new("hardy");
    for (i, g) in gs.iter().enumerate() {
        for variant in [HardyVariant::Lower, HardyVariant::Upper] {
            let sides = hardy_sides(&params, g, variant);
            let name = match variant {
                HardyVariant::Lower => "variant1",
                HardyVariant::Upper => "variant2",
            };
            push_case(
                &mut report,
                name,
                format!("g={i} {}", params.label()),
                sides.lhs,
                sides.rhs,
                sides.lhs_quadrature,
                sides.rhs_quadrature,
            );
        }
    }
    Ok(report)
}

/// `count` random step functions with random admissible parameters (finite
/// `τ`, `σ ≤ τ`), plus the standard power cases.
pub fn hardy_suite(seed: u64, count: usize) -> Result<Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = Report::new("hardy");
    report.set_meta("seed", seed);
    report.set_meta("random_cases", count);
    for _ in 0..count {
        let sigma = rng.gen_range(0.5..3.0);
        let tau = sigma * rng.gen_range(1.0..3.0);
        let params = HardyParams::new(rng.gen_range(0.2..3.0), rng.gen_range(-2.0..2.0), sigma, tau)?;
        let g = StepG::random(&mut rng);
        let sub = verify_hardy(&params, std::slice::from_ref(&g))?;
        report.extend(sub);
    }
    for (i, case) in standard_power_cases().into_iter().enumerate() {
        let (lhs, rhs) = case.closed_form()?;
        let (lq, rq) = case.quadrature();
        push_case(&mut report, "power", format!("case={i} beta={} {}", case.beta, case.params.label()), lhs, rhs, lq, rq);
    }
    Ok(report)
}
