//! Cell-average step functions on a dyadic window, together with the two
//! aggregate structures every other module reads from: the integral image
//! ([`PrefixSums`]) and the dyadic [`AveragePyramid`].
//!
//! A [`SampledFunction`] at level `L` with window order `W` lives on
//! `[0, 2^W)^n`, split into cells of side `2^-L`. Values are exact cell
//! averages and the function vanishes outside the window, so every integral
//! over a grid-aligned box is a finite sum.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, pow2i, DoubleDouble};

/// Largest supported `W + L`; keeps 2D grids at or below 2^24 cells.
pub const MAX_LOG_EXTENT: i32 = 12;

/// Geometry of the host window `[0, 2^W)^n` at resolution `2^-L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub dim: usize,
    pub level: i32,
    pub window_order: i32,
}

impl Window {
    pub fn new(dim: usize, level: i32, window_order: i32) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::UnsupportedDim(dim));
        }
        if level < 0 {
            return Err(Error::Header {
                field: "level",
                reason: format!("must be >= 0, got {level}"),
            });
        }
        if window_order < -level {
            return Err(Error::Header {
                field: "window_order",
                reason: format!("must be >= -level = {}, got {window_order}", -level),
            });
        }
        let log_extent = window_order + level;
        let max = if dim == 1 { 2 * MAX_LOG_EXTENT } else { MAX_LOG_EXTENT };
        if log_extent > max {
            return Err(Error::Header {
                field: "window_order",
                reason: format!("window_order + level = {log_extent} exceeds {max}"),
            });
        }
        Ok(Window {
            dim,
            level,
            window_order,
        })
    }

    /// Cells per axis, `2^(W+L)`.
    pub fn extent(&self) -> usize {
        1usize << (self.window_order + self.level)
    }

    pub fn cells(&self) -> usize {
        self.extent().pow(self.dim as u32)
    }

    pub fn cell_side(&self) -> f64 {
        pow2i(-self.level)
    }

    pub fn cell_measure(&self) -> f64 {
        pow2i(-(self.dim as i32) * self.level)
    }

    /// Lebesgue measure of the window, `2^(nW)`.
    pub fn measure(&self) -> f64 {
        pow2i(self.dim as i32 * self.window_order)
    }

    /// Finest representable dyadic order, `-L`.
    pub fn min_order(&self) -> i32 {
        -self.level
    }

    /// Order of the window itself, `W`.
    pub fn max_order(&self) -> i32 {
        self.window_order
    }

    /// Measure `2^(nm)` of an order-`m` dyadic cube.
    pub fn dyadic_measure(&self, order: i32) -> f64 {
        pow2i(self.dim as i32 * order)
    }

    /// Measure of a cube whose side is `side` cells.
    pub fn cube_measure(&self, side: u64) -> f64 {
        (side as f64 * self.cell_side()).powi(self.dim as i32)
    }

    pub fn refined(&self) -> Result<Window> {
        Window::new(self.dim, self.level + 1, self.window_order)
    }
}

/// Function on `[0, 2^W)^n` stored as exact cell averages, row-major with
/// the first coordinate as the slow axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    window: Window,
    values: Vec<f64>,
}

/// On-disk encodings accepted by [`SampledFunction::load`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridFormat {
    CsvGrid,
    RawF64,
}

impl GridFormat {
    /// `.bin`/`.raw`/`.f64` are raw, everything else csv-grid.
    pub fn from_path(path: &Path) -> GridFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("raw") | Some("f64") => GridFormat::RawF64,
            _ => GridFormat::CsvGrid,
        }
    }
}

impl SampledFunction {
    pub fn new(window: Window, values: Vec<f64>) -> Result<Self> {
        let expected = window.cells();
        if values.len() != expected {
            return Err(Error::ExtentMismatch {
                expected,
                found: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(SampledFunction { window, values })
    }

    pub fn zeros(window: Window) -> Self {
        SampledFunction {
            values: vec![0.0; window.cells()],
            window,
        }
    }

    /// Builds a function from a per-cell closure taking `[i0, i1]` (the
    /// second index is 0 in 1D).
    pub fn from_fn(window: Window, mut f: impl FnMut([usize; 2]) -> f64) -> Result<Self> {
        let e = window.extent();
        let values = match window.dim {
            1 => (0..e).map(|i| f([i, 0])).collect(),
            _ => (0..e * e).map(|k| f([k / e, k % e])).collect(),
        };
        SampledFunction::new(window, values)
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn dim(&self) -> usize {
        self.window.dim
    }

    pub fn level(&self) -> i32 {
        self.window.level
    }

    pub fn window_order(&self) -> i32 {
        self.window.window_order
    }

    pub fn extent(&self) -> usize {
        self.window.extent()
    }

    pub fn cell_measure(&self) -> f64 {
        self.window.cell_measure()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value of the cell `[i0, i1]`.
    pub fn at(&self, idx: [usize; 2]) -> f64 {
        match self.window.dim {
            1 => self.values[idx[0]],
            _ => self.values[idx[0] * self.extent() + idx[1]],
        }
    }

    /// `∫f`, summed row-major with compensation.
    pub fn integral(&self) -> f64 {
        compensated_sum(self.values.iter().copied()) * self.cell_measure()
    }

    /// `∫|f|`.
    pub fn abs_integral(&self) -> f64 {
        compensated_sum(self.values.iter().map(|v| v.abs())) * self.cell_measure()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// First negative cell, if any.
    pub fn first_negative(&self) -> Option<(usize, f64)> {
        self.values
            .iter()
            .copied()
            .enumerate()
            .find(|&(_, v)| v < 0.0)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.first_negative().is_none()
    }

    pub fn require_nonnegative(&self) -> Result<()> {
        match self.first_negative() {
            Some((index, value)) => Err(Error::NegativeFunction { index, value }),
            None => Ok(()),
        }
    }

    pub fn scaled(&self, factor: f64) -> SampledFunction {
        self.map(|v| v * factor)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SampledFunction {
        SampledFunction {
            window: self.window,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `alpha * self + beta * other`, cellwise.
    pub fn combine(&self, alpha: f64, other: &SampledFunction, beta: f64) -> Result<SampledFunction> {
        self.same_window(other)?;
        Ok(SampledFunction {
            window: self.window,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        })
    }

    pub(crate) fn same_window(&self, other: &SampledFunction) -> Result<()> {
        if self.window != other.window {
            return Err(Error::param(format!(
                "window mismatch: {:?} vs {:?}",
                self.window, other.window
            )));
        }
        Ok(())
    }

    /// Same function at level `L+1`: each cell split into `2^n` children
    /// carrying the parent value.
    pub fn refined(&self) -> Result<SampledFunction> {
        let window = self.window.refined()?;
        let e = self.extent();
        let values = match self.dim() {
            1 => self.values.iter().flat_map(|&v| [v, v]).collect(),
            _ => {
                let e2 = 2 * e;
                let mut out = vec![0.0; e2 * e2];
                for i in 0..e2 {
                    for j in 0..e2 {
                        out[i * e2 + j] = self.values[(i / 2) * e + j / 2];
                    }
                }
                out
            }
        };
        Ok(SampledFunction { window, values })
    }

    /// `x ↦ f(x / 2^k)`: same cell values on cells `2^k` times larger.
    pub fn dilated(&self, k: i32) -> Result<SampledFunction> {
        let w = self.window;
        let window = Window::new(w.dim, w.level - k, w.window_order + k)?;
        Ok(SampledFunction {
            window,
            values: self.values.clone(),
        })
    }

    pub fn load(path: &Path, format: GridFormat) -> Result<SampledFunction> {
        match format {
            GridFormat::CsvGrid => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                SampledFunction::parse_csv_grid(&text)
            }
            GridFormat::RawF64 => {
                let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
                SampledFunction::parse_raw(&bytes)
            }
        }
    }

    /// csv-grid: first line `dim,level,window_order`, then row-major values.
    pub fn parse_csv_grid(text: &str) -> Result<SampledFunction> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or(Error::Header {
            field: "dim",
            reason: "empty input".into(),
        })?;
        let fields: Vec<&str> = header.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Header {
                field: "dim",
                reason: format!("expected `dim,level,window_order`, got `{header}`"),
            });
        }
        let parse_int = |field: &'static str, s: &str| -> Result<i64> {
            s.parse::<i64>().map_err(|_| Error::Header {
                field,
                reason: format!("`{s}` is not an integer"),
            })
        };
        let dim = parse_int("dim", fields[0])?;
        let level = parse_int("level", fields[1])?;
        let window_order = parse_int("window_order", fields[2])?;
        let window = window_from_header(dim, level, window_order)?;

        let mut values = Vec::with_capacity(window.cells());
        for line in lines {
            for token in line.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                let index = values.len();
                let v: f64 = token.parse().map_err(|_| Error::Parse {
                    index,
                    token: token.to_string(),
                })?;
                values.push(v);
            }
        }
        SampledFunction::new(window, values)
    }

    /// raw-f64: three little-endian `i64` header words, then `f64` values.
    pub fn parse_raw(bytes: &[u8]) -> Result<SampledFunction> {
        if bytes.len() < 24 {
            return Err(Error::Header {
                field: "dim",
                reason: format!("raw header needs 24 bytes, got {}", bytes.len()),
            });
        }
        let word = |k: usize| i64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().unwrap());
        let window = window_from_header(word(0), word(1), word(2))?;
        let payload = &bytes[24..];
        if payload.len() % 8 != 0 {
            return Err(Error::ExtentMismatch {
                expected: window.cells(),
                found: payload.len() / 8,
            });
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        SampledFunction::new(window, values)
    }

    pub fn to_csv_grid(&self) -> String {
        let w = self.window;
        let mut out = format!("{},{},{}\n", w.dim, w.level, w.window_order);
        let row = match w.dim {
            1 => self.values.len(),
            _ => self.extent(),
        };
        for chunk in self.values.chunks(row) {
            let line: Vec<String> = chunk.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_raw(&self) -> Vec<u8> {
        let w = self.window;
        let mut out = Vec::with_capacity(24 + 8 * self.values.len());
        for word in [w.dim as i64, w.level as i64, w.window_order as i64] {
            out.extend_from_slice(&word.to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn save(&self, path: &Path, format: GridFormat) -> Result<()> {
        let bytes = match format {
            GridFormat::CsvGrid => self.to_csv_grid().into_bytes(),
            GridFormat::RawF64 => self.to_raw(),
        };
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&bytes).map_err(|e| Error::io(path, e))
    }
}

fn window_from_header(dim: i64, level: i64, window_order: i64) -> Result<Window> {
    let small = |field: &'static str, v: i64| -> Result<i32> {
        i32::try_from(v).map_err(|_| Error::Header {
            field,
            reason: format!("{v} out of range"),
        })
    };
    if dim != 1 && dim != 2 {
        return Err(Error::Header {
            field: "dim",
            reason: format!("must be 1 or 2, got {dim}"),
        });
    }
    Window::new(
        dim as usize,
        small("level", level)?,
        small("window_order", window_order)?,
    )
}

/// Integral image: cumulative sums over lower-left orthants with one zero
/// row/column per axis, stored as double-double so that inclusion–exclusion
/// does not lose the small rectangles to cancellation.
///
/// Units are cell values: a rectangle sum is `∫_rect f / cell_measure`.
#[derive(Debug, Clone)]
pub struct PrefixSums {
    window: Window,
    stride: usize,
    hi: Vec<f64>,
    lo: Vec<f64>,
}

impl PrefixSums {
    pub fn new(f: &SampledFunction) -> PrefixSums {
        let window = f.window();
        let e = window.extent();
        let stride = e + 1;
        match window.dim {
            1 => {
                let mut hi = vec![0.0; stride];
                let mut lo = vec![0.0; stride];
                let mut acc = DoubleDouble::ZERO;
                for (i, &v) in f.values().iter().enumerate() {
                    acc = acc.add_f64(v);
                    hi[i + 1] = acc.hi;
                    lo[i + 1] = acc.lo;
                }
                PrefixSums {
                    window,
                    stride,
                    hi,
                    lo,
                }
            }
            _ => {
                let mut hi = vec![0.0; stride * stride];
                let mut lo = vec![0.0; stride * stride];
                for i in 0..e {
                    let mut row = DoubleDouble::ZERO;
                    for j in 0..e {
                        row = row.add_f64(f.values()[i * e + j]);
                        let above = i * stride + j + 1;
                        let here = (i + 1) * stride + j + 1;
                        let p = DoubleDouble {
                            hi: hi[above],
                            lo: lo[above],
                        }
                        .add(row);
                        hi[here] = p.hi;
                        lo[here] = p.lo;
                    }
                }
                PrefixSums {
                    window,
                    stride,
                    hi,
                    lo,
                }
            }
        }
    }

    pub fn window(&self) -> Window {
        self.window
    }

    #[inline(always)]
    fn corner(&self, i: usize, j: usize) -> DoubleDouble {
        let k = i * self.stride + j;
        DoubleDouble {
            hi: self.hi[k],
            lo: self.lo[k],
        }
    }

    #[inline(always)]
    fn corner1(&self, i: usize) -> DoubleDouble {
        DoubleDouble {
            hi: self.hi[i],
            lo: self.lo[i],
        }
    }

    /// Sum of cell values over the half-open box `[lo, hi)` in finest-grid
    /// units; the box is clipped to the window (f ≡ 0 outside).
    pub fn rect_sum(&self, lo: [i64; 2], hi: [i64; 2]) -> f64 {
        let e = self.window.extent() as i64;
        let clip = |v: i64| v.clamp(0, e) as usize;
        match self.window.dim {
            1 => {
                let (a, b) = (clip(lo[0]), clip(hi[0]));
                if b <= a {
                    return 0.0;
                }
                self.corner1(b).sub(self.corner1(a)).value()
            }
            _ => {
                let (a0, b0, a1, b1) = (clip(lo[0]), clip(hi[0]), clip(lo[1]), clip(hi[1]));
                if b0 <= a0 || b1 <= a1 {
                    return 0.0;
                }
                self.clipped_sum2(a0, b0, a1, b1)
            }
        }
    }

    #[inline(always)]
    fn clipped_sum2(&self, a0: usize, b0: usize, a1: usize, b1: usize) -> f64 {
        let top = self.corner(b0, b1).sub(self.corner(a0, b1));
        let bottom = self.corner(b0, a1).sub(self.corner(a0, a1));
        top.sub(bottom).value()
    }

    /// Sum over the whole window.
    pub fn total(&self) -> f64 {
        let e = self.window.extent();
        match self.window.dim {
            1 => self.corner1(e).value(),
            _ => self.corner(e, e).value(),
        }
    }

    /// `∫` over a box with arbitrary real corners (finest-grid units),
    /// divided by cell measure. Exact for step functions: the orthant
    /// integral is multilinear inside each cell.
    pub fn box_sum(&self, lo: [f64; 2], hi: [f64; 2]) -> f64 {
        match self.window.dim {
            1 => {
                if hi[0] <= lo[0] {
                    return 0.0;
                }
                self.orthant1(hi[0]) - self.orthant1(lo[0])
            }
            _ => {
                if hi[0] <= lo[0] || hi[1] <= lo[1] {
                    return 0.0;
                }
                self.orthant2(hi[0], hi[1]) - self.orthant2(lo[0], hi[1]) - self.orthant2(hi[0], lo[1])
                    + self.orthant2(lo[0], lo[1])
            }
        }
    }

    fn split(&self, x: f64) -> (usize, f64) {
        let e = self.window.extent();
        let x = x.clamp(0.0, e as f64);
        let i = (x.floor() as usize).min(e - 1);
        (i, x - i as f64)
    }

    fn orthant1(&self, x: f64) -> f64 {
        let (i, a) = self.split(x);
        let p0 = self.corner1(i).value();
        let p1 = self.corner1(i + 1).value();
        p0 + a * (p1 - p0)
    }

    fn orthant2(&self, x: f64, y: f64) -> f64 {
        let (i, a) = self.split(x);
        let (j, b) = self.split(y);
        let p00 = self.corner(i, j).value();
        let p10 = self.corner(i + 1, j).value();
        let p01 = self.corner(i, j + 1).value();
        let p11 = self.corner(i + 1, j + 1).value();
        p00 + a * (p10 - p00) + b * (p01 - p00) + a * b * (p11 - p10 - p01 + p00)
    }

    /// Largest `|sum|` over all positions of a cube with side `h` cells.
    ///
    /// With `protrude` the cube may stick out of the window on any side (the
    /// corner ranges over `[-h+1, E-1]`); otherwise it stays inside, which is
    /// enough for nonnegative functions.
    pub fn max_abs_cube_sum(&self, h: usize, protrude: bool) -> f64 {
        let e = self.window.extent();
        let (start, end) = if protrude {
            (-(h as i64) + 1, e as i64 - 1)
        } else if h <= e {
            (0, (e - h) as i64)
        } else {
            (0, 0)
        };
        let clip = |v: i64| v.clamp(0, e as i64) as usize;
        match self.window.dim {
            1 => {
                let mut best = 0.0f64;
                for c in start..=end {
                    let (a, b) = (clip(c), clip(c + h as i64));
                    if b > a {
                        let s = self.corner1(b).sub(self.corner1(a)).value();
                        best = best.max(s.abs());
                    }
                }
                best
            }
            _ => {
                let mut best = 0.0f64;
                let mut column = vec![DoubleDouble::ZERO; e + 1];
                for c0 in start..=end {
                    let (a0, b0) = (clip(c0), clip(c0 + h as i64));
                    if b0 <= a0 {
                        continue;
                    }
                    for (j, slot) in column.iter_mut().enumerate() {
                        *slot = self.corner(b0, j).sub(self.corner(a0, j));
                    }
                    for c1 in start..=end {
                        let (a1, b1) = (clip(c1), clip(c1 + h as i64));
                        if b1 <= a1 {
                            continue;
                        }
                        let s = column[b1].sub(column[a1]).value();
                        best = best.max(s.abs());
                    }
                }
                best
            }
        }
    }
}

/// Averages of `f` over every dyadic cube of order `m ∈ [-L, W]` inside
/// the window, built bottom-up.
#[derive(Debug, Clone)]
pub struct AveragePyramid {
    window: Window,
    levels: Vec<Vec<f64>>,
    integral: f64,
}

impl AveragePyramid {
    pub fn new(f: &SampledFunction) -> AveragePyramid {
        let window = f.window();
        let dim = window.dim;
        let mut levels = vec![f.values().to_vec()];
        let mut side = window.extent();
        while side > 1 {
            let child = levels.last().unwrap();
            let half = side / 2;
            let parent = match dim {
                1 => (0..half)
                    .map(|i| (child[2 * i] + child[2 * i + 1]) * 0.5)
                    .collect(),
                _ => {
                    let mut out = Vec::with_capacity(half * half);
                    for i in 0..half {
                        for j in 0..half {
                            let r0 = 2 * i * side + 2 * j;
                            let r1 = r0 + side;
                            let s = (child[r0] + child[r0 + 1]) + (child[r1] + child[r1 + 1]);
                            out.push(s * 0.25);
                        }
                    }
                    out
                }
            };
            levels.push(parent);
            side = half;
        }
        AveragePyramid {
            window,
            levels,
            integral: f.integral(),
        }
    }

    pub fn window(&self) -> Window {
        self.window
    }

    /// Cubes per axis at order `m`.
    pub fn side_count(&self, order: i32) -> usize {
        1usize << (self.window.window_order - order)
    }

    /// All order-`m` averages, row-major. `None` outside `[-L, W]`.
    pub fn order(&self, order: i32) -> Option<&[f64]> {
        let k = order - self.window.min_order();
        if k < 0 || order > self.window.max_order() {
            return None;
        }
        Some(&self.levels[k as usize])
    }

    /// Average over the order-`m` cube with index `k`; for `m > W` the only
    /// cube meeting the window is `[0, 2^m)^n` and the average is `∫f/2^(nm)`.
    pub fn average(&self, order: i32, index: [usize; 2]) -> Option<f64> {
        if order > self.window.max_order() {
            if index == [0, 0] {
                return Some(self.integral / self.window.dyadic_measure(order));
            }
            return Some(0.0);
        }
        let vals = self.order(order)?;
        let s = self.side_count(order);
        match self.window.dim {
            1 => vals.get(index[0]).copied(),
            _ => {
                if index[0] >= s || index[1] >= s {
                    return None;
                }
                Some(vals[index[0] * s + index[1]])
            }
        }
    }

    pub fn max_abs(&self, order: i32) -> Option<f64> {
        if order > self.window.max_order() {
            return Some(self.integral.abs() / self.window.dyadic_measure(order));
        }
        self.order(order)
            .map(|v| v.iter().fold(0.0f64, |m, x| m.max(x.abs())))
    }

    /// `∫f` over the window.
    pub fn integral(&self) -> f64 {
        self.integral
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(window: Window, seed: u64) -> SampledFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..window.cells()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        SampledFunction::new(window, values).unwrap()
    }

    #[test]
    fn csv_grid_constant_1d() {
        let f = SampledFunction::parse_csv_grid("1,2,0\n1,1,1,1\n").unwrap();
        assert_eq!(f.dim(), 1);
        assert_eq!(f.values(), &[1.0; 4]);
        assert_eq!(f.cell_measure(), 0.25);
        assert_eq!(f.integral(), 1.0);
    }

    #[test]
    fn csv_grid_single_cell_2d() {
        let mut text = String::from("2,1,1\n");
        let mut vals = vec!["0"; 16];
        vals[5] = "1";
        text.push_str(&vals.join(","));
        let f = SampledFunction::parse_csv_grid(&text).unwrap();
        assert_eq!(f.extent(), 4);
        assert_eq!(f.at([1, 1]), 1.0);
        assert_eq!(f.integral(), 0.25);
    }

    #[test]
    fn csv_grid_extent_mismatch() {
        let text = format!("2,1,1\n{}", vec!["0"; 15].join(","));
        match SampledFunction::parse_csv_grid(&text) {
            Err(Error::ExtentMismatch { expected, found }) => {
                assert_eq!((expected, found), (16, 15));
            }
            other => panic!("expected extent mismatch, got {other:?}"),
        }
    }

    #[test]
    fn csv_grid_rejects_bad_header_and_values() {
        assert!(matches!(
            SampledFunction::parse_csv_grid("3,1,1\n0"),
            Err(Error::Header { field: "dim", .. })
        ));
        assert!(matches!(
            SampledFunction::parse_csv_grid("1,x,1\n0"),
            Err(Error::Header { field: "level", .. })
        ));
        assert!(matches!(
            SampledFunction::parse_csv_grid("1,1,-2\n0"),
            Err(Error::Header {
                field: "window_order",
                ..
            })
        ));
        assert!(matches!(
            SampledFunction::parse_csv_grid("1,1,0\n0,NaN"),
            Err(Error::NonFinite { index: 1, .. })
        ));
        assert!(matches!(
            SampledFunction::parse_csv_grid("1,1,0\n0,abc"),
            Err(Error::Parse { index: 1, .. })
        ));
    }

    #[test]
    fn raw_roundtrip_and_truncation() {
        let f = random(Window::new(2, 2, 1).unwrap(), 3);
        let bytes = f.to_raw();
        assert_eq!(SampledFunction::parse_raw(&bytes).unwrap(), f);
        assert!(matches!(
            SampledFunction::parse_raw(&bytes[..bytes.len() - 8]),
            Err(Error::ExtentMismatch { .. })
        ));
        let text = f.to_csv_grid();
        assert_eq!(SampledFunction::parse_csv_grid(&text).unwrap(), f);
    }

    #[test]
    fn prefix_sums_constant_and_indicator() {
        let w = Window::new(2, 3, 0).unwrap();
        let one = SampledFunction::from_fn(w, |_| 1.0).unwrap();
        let ps = PrefixSums::new(&one);
        assert_eq!(ps.rect_sum([0, 0], [8, 8]), 64.0);
        assert_eq!(ps.total(), 64.0);

        let spike = SampledFunction::from_fn(w, |i| if i == [2, 5] { 1.0 } else { 0.0 }).unwrap();
        let ps = PrefixSums::new(&spike);
        assert_eq!(ps.rect_sum([2, 5], [3, 6]), 1.0);
        assert_eq!(ps.rect_sum([3, 5], [4, 6]), 0.0);
        assert_eq!(ps.rect_sum([-4, -4], [20, 20]), 1.0);
    }

    #[test]
    fn prefix_sums_match_direct_summation() {
        let w = Window::new(2, 6, 0).unwrap();
        let f = random(w, 11);
        let ps = PrefixSums::new(&f);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let tol = 2f64.powi(-40);
        for _ in 0..1000 {
            let a0 = rng.gen_range(0..64i64);
            let b0 = rng.gen_range(a0 + 1..=64);
            let a1 = rng.gen_range(0..64i64);
            let b1 = rng.gen_range(a1 + 1..=64);
            let mut direct = 0.0;
            let mut mass = 0.0;
            for i in a0..b0 {
                for j in a1..b1 {
                    let v = f.at([i as usize, j as usize]);
                    direct += v;
                    mass += v.abs();
                }
            }
            let got = ps.rect_sum([a0, a1], [b0, b1]);
            assert!((got - direct).abs() <= tol * mass, "{got} vs {direct}");
        }
    }

    #[test]
    fn box_sum_fractional_matches_refined_grid() {
        let f = random(Window::new(2, 2, 1).unwrap(), 5);
        let fine = f.refined().unwrap();
        let ps = PrefixSums::new(&f);
        let pf = PrefixSums::new(&fine);
        // [0.5, 3.5) x [1.5, 6) in coarse cells is [1, 7) x [3, 12) in fine.
        let coarse = ps.box_sum([0.5, 1.5], [3.5, 6.0]);
        let refined = pf.rect_sum([1, 3], [7, 12]) / 4.0;
        assert!((coarse - refined).abs() < 1e-12);
    }

    #[test]
    fn pyramid_of_constant_and_small_1d() {
        let w = Window::new(1, 2, 0).unwrap();
        let c = SampledFunction::from_fn(w, |_| 3.5).unwrap();
        let pyr = AveragePyramid::new(&c);
        for m in -2..=0 {
            assert!(pyr.order(m).unwrap().iter().all(|&v| v == 3.5));
        }

        let f = SampledFunction::new(w, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let pyr = AveragePyramid::new(&f);
        assert_eq!(pyr.order(-2).unwrap(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(pyr.order(-1).unwrap(), &[0.5, 0.0]);
        assert_eq!(pyr.order(0).unwrap(), &[0.25]);
        assert_eq!(pyr.average(2, [0, 0]), Some(0.25 / 4.0));
        assert_eq!(pyr.order(1), None);
        assert_eq!(pyr.order(-3), None);
    }

    #[test]
    fn pyramid_parent_is_mean_of_children() {
        let w = Window::new(2, 4, 4).unwrap();
        let f = random(w, 21);
        let pyr = AveragePyramid::new(&f);
        let tol = 2f64.powi(-40);
        for m in w.min_order()..w.max_order() {
            let s = pyr.side_count(m);
            let child = pyr.order(m).unwrap();
            let parent = pyr.order(m + 1).unwrap();
            for i in 0..s / 2 {
                for j in 0..s / 2 {
                    let kids = [
                        child[2 * i * s + 2 * j],
                        child[2 * i * s + 2 * j + 1],
                        child[(2 * i + 1) * s + 2 * j],
                        child[(2 * i + 1) * s + 2 * j + 1],
                    ];
                    let mean = kids.iter().sum::<f64>() / 4.0;
                    let scale = kids.iter().map(|v| v.abs()).sum::<f64>() / 4.0;
                    assert!((parent[i * (s / 2) + j] - mean).abs() <= tol * scale.max(f64::MIN_POSITIVE));
                }
            }
        }
        // Direct averaging oracle at every order.
        for m in w.min_order()..=w.max_order() {
            let s = pyr.side_count(m);
            let cells = 1usize << (m + w.level);
            for i in 0..s {
                for j in 0..s {
                    let mut sum = 0.0;
                    let mut mass = 0.0;
                    for a in 0..cells {
                        for b in 0..cells {
                            let v = f.at([i * cells + a, j * cells + b]);
                            sum += v;
                            mass += v.abs();
                        }
                    }
                    let n = (cells * cells) as f64;
                    let got = pyr.average(m, [i, j]).unwrap();
                    assert!((got - sum / n).abs() <= tol * mass / n);
                }
            }
        }
    }

    #[test]
    fn pyramid_is_linear_and_refinement_consistent() {
        let w = Window::new(2, 3, 2).unwrap();
        let f = random(w, 1);
        let g = random(w, 2);
        let h = f.combine(2.0, &g, -0.5).unwrap();
        let (pf, pg, ph) = (AveragePyramid::new(&f), AveragePyramid::new(&g), AveragePyramid::new(&h));
        let tol = 2f64.powi(-40);
        for m in w.min_order()..=w.max_order() {
            for ((a, b), c) in pf.order(m).unwrap().iter().zip(pg.order(m).unwrap()).zip(ph.order(m).unwrap()) {
                let want = 2.0 * a - 0.5 * b;
                assert!((c - want).abs() <= tol * (2.0 * a.abs() + 0.5 * b.abs()) * 4.0);
            }
        }
        let fine = AveragePyramid::new(&f.refined().unwrap());
        for m in w.min_order()..=w.max_order() {
            assert_eq!(fine.order(m).unwrap(), pf.order(m).unwrap());
        }
    }

    #[test]
    fn full_window_query_is_integral_over_cell_measure() {
        let w = Window::new(1, 5, 2).unwrap();
        let f = random(w, 8);
        let ps = PrefixSums::new(&f);
        assert!((ps.total() * f.cell_measure() - f.integral()).abs() < 1e-13);
    }

    #[test]
    fn max_abs_cube_sum_sees_protruding_cubes() {
        let w = Window::new(1, 1, 0).unwrap();
        let f = SampledFunction::new(w, vec![1.0, -1.0]).unwrap();
        let ps = PrefixSums::new(&f);
        assert_eq!(ps.max_abs_cube_sum(2, false), 0.0);
        assert_eq!(ps.max_abs_cube_sum(2, true), 1.0);
    }
}
