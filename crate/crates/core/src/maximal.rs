//! Net maximal function `f̄(t, M) = sup_{e ∈ M, |e| ≥ t} |(1/|e|) ∫_e f|`
//! as an exact step profile in `t`.
//!
//! The two-parameter supremum (position, scale) is reduced to one pass: the
//! best average at each scale is computed independently, then a suffix max
//! over scales gives the value for every `t`. Above the window the profile
//! continues analytically (see [`Tail`]).

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AveragePyramid, PrefixSums, SampledFunction};
use crate::nets::{cube_average, Cube, NetKind};
use crate::numeric::pow2i;

/// Behaviour of `f̄` beyond the last breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Tail {
    /// `f̄ ≡ 0` (bounded explicit nets).
    Zero,
    /// Dyadic nets: `f̄(t) = A / 2^(nm)` with `2^(nm)` the smallest dyadic
    /// measure `≥ t`. Only the cube `[0, 2^m)^n` meets the window.
    DyadicSteps { amplitude: f64, dim: usize },
    /// All cubes: `f̄(t) = A / t`, where `A` is the largest `|∫|` over the
    /// window's intersections with cubes that cover at least one full axis.
    Reciprocal { amplitude: f64 },
}

impl Tail {
    pub fn amplitude(&self) -> f64 {
        match *self {
            Tail::Zero => 0.0,
            Tail::DyadicSteps { amplitude, .. } | Tail::Reciprocal { amplitude } => amplitude,
        }
    }

    fn scaled(&self, factor: f64) -> Tail {
        match *self {
            Tail::Zero => Tail::Zero,
            Tail::DyadicSteps { amplitude, dim } => Tail::DyadicSteps {
                amplitude: amplitude * factor,
                dim,
            },
            Tail::Reciprocal { amplitude } => Tail::Reciprocal {
                amplitude: amplitude * factor,
            },
        }
    }
}

/// Nonincreasing step function `t ↦ f̄(t)`.
///
/// `values[j]` is the value on `(breakpoints[j-1], breakpoints[j]]` (with
/// `breakpoints[-1] = 0`); past the last breakpoint the [`Tail`] applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalProfile {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    tail: Tail,
}

impl MaximalProfile {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>, tail: Tail) -> Result<MaximalProfile> {
        if breakpoints.len() != values.len() {
            return Err(Error::param("breakpoints and values differ in length"));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) || breakpoints.first().is_some_and(|&t| t <= 0.0) {
            return Err(Error::param("breakpoints must be positive and strictly increasing"));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::param("profile values must be finite, nonnegative and nonincreasing"));
        }
        Ok(MaximalProfile {
            breakpoints,
            values,
            tail,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    /// Start of the analytic tail, `T⋆`.
    pub fn threshold(&self) -> f64 {
        self.breakpoints.last().copied().unwrap_or(0.0)
    }

    /// `sup_t f̄(t)`.
    pub fn sup(&self) -> f64 {
        match self.values.first() {
            Some(&v) => v,
            None => match self.tail {
                Tail::Zero => 0.0,
                // Without breakpoints the tail starts at 0 and is unbounded
                // unless its amplitude vanishes.
                _ if self.tail.amplitude() == 0.0 => 0.0,
                _ => f64::INFINITY,
            },
        }
    }

    /// `f̄(t)` for `t > 0`.
    pub fn value(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::param(format!("profile evaluated at t = {t}; need t > 0")));
        }
        Ok(self.eval(t))
    }

    pub(crate) fn eval(&self, t: f64) -> f64 {
        let j = self.breakpoints.partition_point(|&b| b < t);
        if j < self.values.len() {
            return self.values[j];
        }
        match self.tail {
            Tail::Zero => 0.0,
            Tail::Reciprocal { amplitude } => amplitude / t,
            Tail::DyadicSteps { .. } if t.is_infinite() => 0.0,
            Tail::DyadicSteps { amplitude, dim } => amplitude / dyadic_ceiling(t, dim),
        }
    }

    /// Profile of `λf`.
    pub fn scaled(&self, lambda: f64) -> MaximalProfile {
        let a = lambda.abs();
        MaximalProfile {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|v| v * a).collect(),
            tail: self.tail.scaled(a),
        }
    }

    /// CSV export: `t,value` rows followed by one tail record.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value\n");
        for (t, v) in self.breakpoints.iter().zip(&self.values) {
            let _ = writeln!(out, "{t},{v}");
        }
        match self.tail {
            Tail::Zero => out.push_str("tail,zero,0\n"),
            Tail::DyadicSteps { amplitude, dim } => {
                let _ = writeln!(out, "tail,dyadic-steps,{amplitude},{dim}");
            }
            Tail::Reciprocal { amplitude } => {
                let _ = writeln!(out, "tail,reciprocal,{amplitude}");
            }
        }
        out
    }
}

/// Smallest dyadic measure `2^(nm) ≥ t`.
pub(crate) fn dyadic_ceiling(t: f64, dim: usize) -> f64 {
    let n = dim as i32;
    let mut m = (t.log2() / n as f64).ceil() as i32;
    while pow2i(n * (m - 1)) >= t {
        m -= 1;
    }
    while pow2i(n * m) < t {
        m += 1;
    }
    pow2i(n * m)
}

/// Side lengths (in cells) at which all-cubes averages are maximized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "ratio")]
pub enum SideSchedule {
    /// Every side `1..=E`; exact on the grid-representable cube class.
    AllSides,
    /// `h_k = ⌈ratio^k⌉` plus the window side; a certified lower bound.
    Geometric(f64),
}

impl Default for SideSchedule {
    fn default() -> Self {
        SideSchedule::AllSides
    }
}

impl SideSchedule {
    pub const DEFAULT_RATIO: f64 = 1.189_207_115_002_721; // 2^(1/4)

    pub fn sides(&self, extent: usize) -> Result<Vec<usize>> {
        match *self {
            SideSchedule::AllSides => Ok((1..=extent).collect()),
            SideSchedule::Geometric(ratio) => {
                if !(ratio > 1.0) || !ratio.is_finite() {
                    return Err(Error::param(format!("geometric side ratio must exceed 1, got {ratio}")));
                }
                let mut sides = Vec::new();
                let mut x = 1.0f64;
                loop {
                    let h = (x.ceil() as usize).clamp(1, extent);
                    if sides.last() != Some(&h) {
                        sides.push(h);
                    }
                    if h == extent {
                        break;
                    }
                    x *= ratio;
                }
                Ok(sides)
            }
        }
    }
}

/// Profile over the dyadic net, `O(cells)`.
pub fn maximal_profile_dyadic(f: &SampledFunction) -> MaximalProfile {
    let pyr = AveragePyramid::new(f);
    let w = f.window();
    let orders: Vec<i32> = (w.min_order()..=w.max_order()).collect();
    let per_order: Vec<f64> = orders.iter().map(|&m| pyr.max_abs(m).unwrap()).collect();
    let values = suffix_max(&per_order);
    let breakpoints = orders.iter().map(|&m| w.dyadic_measure(m)).collect();
    MaximalProfile {
        breakpoints,
        values,
        tail: Tail::DyadicSteps {
            amplitude: pyr.integral().abs(),
            dim: w.dim,
        },
    }
}

/// Profile over all grid-aligned cubes with sides from `schedule`.
///
/// For nonnegative `f` only cubes inside the window are scanned (a cube
/// sticking out is dominated by a shifted copy inside); signed functions
/// scan every position meeting the window.
pub fn maximal_profile_allcubes(f: &SampledFunction, schedule: SideSchedule) -> Result<MaximalProfile> {
    let w = f.window();
    let e = w.extent();
    let sides = schedule.sides(e)?;
    let ps = PrefixSums::new(f);
    let protrude = !f.is_nonnegative();
    let cell = w.cell_measure();
    let per_side: Vec<f64> = sides
        .par_iter()
        .map(|&h| {
            let best = ps.max_abs_cube_sum(h, protrude);
            best * cell / w.cube_measure(h as u64)
        })
        .collect();
    let values = suffix_max(&per_side);
    let breakpoints = sides.iter().map(|&h| w.cube_measure(h as u64)).collect();
    // At h = E every admissible intersection covers a full axis or is anchored
    // at a window face, the same family as for any larger side.
    let amplitude = per_side.last().copied().unwrap_or(0.0) * w.measure();
    Ok(MaximalProfile {
        breakpoints,
        values,
        tail: Tail::Reciprocal { amplitude },
    })
}

/// Profile over an explicit list of cubes; `f̄ = 0` beyond the largest one.
pub fn maximal_profile_explicit(f: &SampledFunction, cubes: &[Cube]) -> Result<MaximalProfile> {
    if cubes.is_empty() {
        return Err(Error::EmptyNet);
    }
    let ps = PrefixSums::new(f);
    let mut entries: Vec<(f64, f64)> = cubes
        .iter()
        .map(|c| Ok((c.measure(), cube_average(&ps, c)?.abs())))
        .collect::<Result<_>>()?;
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut breakpoints: Vec<f64> = Vec::new();
    let mut best: Vec<f64> = Vec::new();
    for (m, v) in entries {
        if breakpoints.last() == Some(&m) {
            let last = best.last_mut().unwrap();
            *last = last.max(v);
        } else {
            breakpoints.push(m);
            best.push(v);
        }
    }
    Ok(MaximalProfile {
        breakpoints,
        values: suffix_max(&best),
        tail: Tail::Zero,
    })
}

/// Dispatches on the net kind.
pub fn maximal_profile(f: &SampledFunction, net: &NetKind, schedule: SideSchedule) -> Result<MaximalProfile> {
    match net {
        NetKind::Dyadic => Ok(maximal_profile_dyadic(f)),
        NetKind::AllCubes => maximal_profile_allcubes(f, schedule),
        NetKind::Explicit(cubes) => maximal_profile_explicit(f, cubes),
    }
}

fn suffix_max(xs: &[f64]) -> Vec<f64> {
    let mut out = xs.to_vec();
    for k in (0..out.len().saturating_sub(1)).rev() {
        out[k] = out[k].max(out[k + 1]);
    }
    out
}
