//! Closed-form net-space quasi-norms, the Morrey norm, and the parameter
//! algebra of real interpolation between net spaces.
//!
//! Because `f̄` is a step function, `∫ (t^{1/p} f̄(t))^q dt/t` is a finite
//! sum of exact segment integrals plus an analytic tail; no quadrature is
//! involved.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PrefixSums, SampledFunction};
use crate::maximal::{MaximalProfile, Tail};
use crate::numeric::compensated_sum;

/// Exponents of `N_{p,q}`; either may be `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    #[serde(with = "crate::report::real")]
    pub p: f64,
    #[serde(with = "crate::report::real")]
    pub q: f64,
}

impl NormParams {
    /// `p = ∞` is only meaningful with `q = ∞`: `N_{∞,q}` for finite `q`
    /// contains only functions with `f̄ ≡ 0`.
    pub fn new(p: f64, q: f64) -> Result<NormParams> {
        if !(p > 0.0) || !(q > 0.0) {
            return Err(Error::param(format!("need p > 0 and q > 0, got p = {p}, q = {q}")));
        }
        if p.is_infinite() && q.is_finite() {
            return Err(Error::param("p = inf requires q = inf"));
        }
        Ok(NormParams { p, q })
    }
}

/// Where an infinite norm comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Divergence {
    /// Left end of the divergent segment (the tail threshold `T⋆`).
    pub from: f64,
    pub reason: &'static str,
}

/// A norm value; `+∞` is a regular result carrying its divergent segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormValue {
    pub value: f64,
    pub divergence: Option<Divergence>,
}

impl NormValue {
    fn finite(value: f64) -> NormValue {
        NormValue {
            value,
            divergence: None,
        }
    }

    fn divergent(from: f64, reason: &'static str) -> NormValue {
        NormValue {
            value: f64::INFINITY,
            divergence: Some(Divergence { from, reason }),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// `‖f‖_{N_{p,q}}` from the profile of `f`.
pub fn net_norm(profile: &MaximalProfile, params: NormParams) -> Result<NormValue> {
    let params = NormParams::new(params.p, params.q)?;
    if params.q.is_infinite() {
        Ok(sup_norm(profile, params.p))
    } else {
        Ok(integral_norm(profile, params.p, params.q))
    }
}

fn sup_norm(profile: &MaximalProfile, p: f64) -> NormValue {
    let inv_p = 1.0 / p;
    let mut best = profile
        .breakpoints()
        .iter()
        .zip(profile.values())
        .fold(0.0f64, |m, (&t, &v)| m.max(t.powf(inv_p) * v));
    let threshold = profile.threshold();
    let amplitude = profile.tail().amplitude();
    if amplitude > 0.0 {
        // Tail value t^{1/p - 1} A: decreasing for p > 1, constant at p = 1.
        let tail_sup = match profile.tail() {
            Tail::Zero => 0.0,
            Tail::DyadicSteps { dim, .. } => {
                let first = threshold * 2f64.powi(dim as i32);
                if p < 1.0 {
                    return NormValue::divergent(threshold, "t^(1/p) f̄(t) grows in the tail for p < 1");
                }
                amplitude * first.powf(inv_p - 1.0)
            }
            Tail::Reciprocal { .. } => {
                if p < 1.0 {
                    return NormValue::divergent(threshold, "t^(1/p) f̄(t) grows in the tail for p < 1");
                }
                if p == 1.0 {
                    amplitude
                } else if threshold == 0.0 {
                    return NormValue::divergent(0.0, "reciprocal profile unbounded at t -> 0");
                } else {
                    amplitude * threshold.powf(inv_p - 1.0)
                }
            }
        };
        best = best.max(tail_sup);
    }
    NormValue::finite(best)
}

fn integral_norm(profile: &MaximalProfile, p: f64, q: f64) -> NormValue {
    match tail_power_integral(profile, p, q) {
        Ok(tail) => {
            let head = segments_power_integral(profile, p, q, f64::INFINITY);
            NormValue::finite((head + tail).powf(1.0 / q))
        }
        Err(div) => NormValue {
            value: f64::INFINITY,
            divergence: Some(div),
        },
    }
}

/// `Σ_j v_j^q (p/q) (t_hi^{q/p} - t_lo^{q/p})` over breakpoint segments,
/// clipped at `t_max`.
fn segments_power_integral(profile: &MaximalProfile, p: f64, q: f64, t_max: f64) -> f64 {
    let r = q / p;
    let mut lo = 0.0f64;
    let mut terms = Vec::with_capacity(profile.values().len());
    for (&t, &v) in profile.breakpoints().iter().zip(profile.values()) {
        let hi = t.min(t_max);
        if hi > lo && v > 0.0 {
            terms.push(v.powf(q) * (p / q) * (hi.powf(r) - lo.powf(r)));
        }
        lo = t;
        if lo >= t_max {
            break;
        }
    }
    compensated_sum(terms)
}

/// `∫_{T⋆}^∞ (t^{1/p} f̄(t))^q dt/t` in closed form.
fn tail_power_integral(profile: &MaximalProfile, p: f64, q: f64) -> std::result::Result<f64, Divergence> {
    let amplitude = profile.tail().amplitude();
    let threshold = profile.threshold();
    if amplitude == 0.0 {
        return Ok(0.0);
    }
    let divergent = Divergence {
        from: threshold,
        reason: "tail integral diverges: f̄ ~ |∫f|/t needs p > 1",
    };
    if p <= 1.0 || threshold == 0.0 {
        return Err(divergent);
    }
    let exponent = q * (1.0 / p - 1.0);
    match profile.tail() {
        Tail::Zero => Ok(0.0),
        Tail::Reciprocal { .. } => Ok(amplitude.powf(q) * threshold.powf(exponent) / (-exponent)),
        Tail::DyadicSteps { dim, .. } => {
            // Segment k ≥ 1: (T 2^{n(k-1)}, T 2^{nk}] with value A / (T 2^{nk}).
            let n = dim as f64;
            let rho = 2f64.powf(n * exponent);
            let per_step = amplitude.powf(q) * threshold.powf(exponent) * (p / q) * (1.0 - 2f64.powf(-n * q / p));
            Ok(per_step * rho / (1.0 - rho))
        }
    }
}

/// `∫_0^{t_max} (t^{1/p} f̄(t))^q dt/t` (no outer `1/q` power), finite `q`.
pub fn partial_power_integral(profile: &MaximalProfile, p: f64, q: f64, t_max: f64) -> f64 {
    let head = segments_power_integral(profile, p, q, t_max);
    let threshold = profile.threshold();
    if t_max <= threshold {
        return head;
    }
    let amplitude = profile.tail().amplitude();
    if amplitude == 0.0 {
        return head;
    }
    let exponent = q * (1.0 / p - 1.0);
    let tail = match profile.tail() {
        Tail::Zero => 0.0,
        Tail::Reciprocal { .. } => {
            if exponent == 0.0 {
                amplitude.powf(q) * (t_max / threshold).ln()
            } else {
                amplitude.powf(q) * (t_max.powf(exponent) - threshold.powf(exponent)) / exponent
            }
        }
        Tail::DyadicSteps { dim, .. } => {
            let step = 2f64.powi(dim as i32);
            let r = q / p;
            let mut lo = threshold;
            let mut terms = Vec::new();
            while lo < t_max {
                let hi = lo * step;
                let v = amplitude / hi;
                terms.push(v.powf(q) * (p / q) * (hi.min(t_max).powf(r) - lo.powf(r)));
                lo = hi;
            }
            compensated_sum(terms)
        }
    };
    head + tail
}

/// Morrey exponent `λ ∈ [0, n)` for `M_1^λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorreyParams {
    pub lambda: f64,
}

impl MorreyParams {
    /// The `p` with `1/p = 1 - λ/n` whose `N_{p,∞}` norm is comparable.
    pub fn net_exponent(&self, dim: usize) -> f64 {
        1.0 / (1.0 - self.lambda / dim as f64)
    }
}

/// `sup_Q |Q|^{-λ/n} ∫_Q |f|` over grid-representable cubes.
///
/// Cubes replace the balls of the classical definition; for `λ ≥ 0` the
/// supremum over cubes larger than the window is attained at the window
/// side, so sides `1..=E` suffice.
pub fn morrey_norm(f: &SampledFunction, mp: MorreyParams) -> Result<f64> {
    let w = f.window();
    let n = w.dim as f64;
    if !(mp.lambda >= 0.0 && mp.lambda < n) {
        return Err(Error::param(format!("Morrey exponent must lie in [0, {n}), got {}", mp.lambda)));
    }
    let abs = f.map(f64::abs);
    let ps = PrefixSums::new(&abs);
    let cell = w.cell_measure();
    let best = (1..=w.extent())
        .into_par_iter()
        .map(|h| {
            let mass = ps.max_abs_cube_sum(h, false) * cell;
            mass * w.cube_measure(h as u64).powf(-mp.lambda / n)
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::param(format!("{name} must lie in [0, 1], got {v}")));
    }
    Ok(())
}

/// `p` with `1/p = (1-θ)/p₀ + θ/p₁`; `p₁` may be infinite.
pub fn interp_parameter(p0: f64, p1: f64, theta: f64) -> Result<f64> {
    if !(p0 > 0.0 && p1 > p0) {
        return Err(Error::param(format!("need 0 < p0 < p1, got p0 = {p0}, p1 = {p1}")));
    }
    check_unit("theta", theta)?;
    Ok(1.0 / ((1.0 - theta) / p0 + theta / p1))
}

/// Reiteration parameter `η = (1-θ)θ₀ + θθ₁`.
pub fn reiteration_parameter(theta0: f64, theta1: f64, theta: f64) -> Result<f64> {
    check_unit("theta0", theta0)?;
    check_unit("theta1", theta1)?;
    check_unit("theta", theta)?;
    Ok((1.0 - theta) * theta0 + theta * theta1)
}

/// Parameters of an interpolation couple `(N_{p₀,q₀}, N_{p₁,q₁})_{θ,q}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacePair {
    #[serde(with = "crate::report::real")]
    pub p0: f64,
    #[serde(with = "crate::report::real")]
    pub q0: f64,
    #[serde(with = "crate::report::real")]
    pub p1: f64,
    #[serde(with = "crate::report::real")]
    pub q1: f64,
    pub theta: f64,
    #[serde(with = "crate::report::real")]
    pub q: f64,
    /// Inner exponent for the `N_{p,σ}` endpoints; `None` picks
    /// `½·min{q₀, q₁, q}`.
    #[serde(default)]
    pub sigma: Option<f64>,
}

impl SpacePair {
    pub fn new(p0: f64, q0: f64, p1: f64, q1: f64, theta: f64, q: f64) -> Result<SpacePair> {
        let pair = SpacePair {
            p0,
            q0,
            p1,
            q1,
            theta,
            q,
            sigma: None,
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<SpacePair> {
        self.sigma = Some(sigma);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p0 > 0.0 && self.p1 > self.p0 && self.p1.is_finite()) {
            return Err(Error::param(format!(
                "need 0 < p0 < p1 < inf, got p0 = {}, p1 = {}",
                self.p0, self.p1
            )));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::param(format!("theta must lie in (0, 1), got {}", self.theta)));
        }
        for (name, v) in [("q0", self.q0), ("q1", self.q1), ("q", self.q)] {
            if !(v > 0.0) {
                return Err(Error::param(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(s) = self.sigma {
            let bound = self.q0.min(self.q1).min(self.q);
            if !(s > 0.0 && s < bound) {
                return Err(Error::param(format!("sigma must lie in (0, {bound}), got {s}")));
            }
        }
        Ok(())
    }

    /// `1/p = (1-θ)/p₀ + θ/p₁`.
    pub fn p(&self) -> f64 {
        interp_parameter(self.p0, self.p1, self.theta).expect("validated pair")
    }

    /// Geometric t-grid ratio `a = 2^{n/p₀}`.
    pub fn grid_ratio(&self, dim: usize) -> f64 {
        2f64.powf(dim as f64 / self.p0)
    }

    /// `σ`, or `None` when `q₀ = q₁ = q = ∞` and no explicit value is set.
    pub fn sigma(&self) -> Option<f64> {
        self.sigma.or_else(|| {
            let m = self.q0.min(self.q1).min(self.q);
            m.is_finite().then_some(0.5 * m)
        })
    }

    /// `η` for the reiteration through `(N_{1,∞}, N_{∞,∞})`, where
    /// `N_{p_i,q_i} = (N_{1,∞}, N_{∞,∞})_{θ_i,q_i}` with `θ_i = 1 - 1/p_i`.
    /// Defined when `p₀ > 1`.
    pub fn eta(&self) -> Option<f64> {
        if self.p0 <= 1.0 {
            return None;
        }
        reiteration_parameter(1.0 - 1.0 / self.p0, 1.0 - 1.0 / self.p1, self.theta).ok()
    }
}
