//! Nets of cubes and cube geometry.
//!
//! A [`Cube`] stores integer coordinates in units of `2^-level`; cubes built
//! from a function's window use the window's level, so they are aligned with
//! the finest grid. [`Cube::doubled`] may move to a finer unit when the side
//! is odd.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PrefixSums, Window};
use crate::numeric::pow2i;

/// Half-open axis-parallel cube `corner + [0, side)^n`, in units of `2^-level`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cube {
    pub dim: usize,
    pub level: i32,
    pub corner: [i64; 2],
    pub side: u64,
}

impl Cube {
    pub fn new(dim: usize, level: i32, corner: [i64; 2], side: u64) -> Cube {
        assert!(side > 0, "cube side must be positive");
        let corner = if dim == 1 { [corner[0], 0] } else { corner };
        Cube {
            dim,
            level,
            corner,
            side,
        }
    }

    /// Cube on the finest grid of `window`.
    pub fn on_grid(window: Window, corner: [i64; 2], side: u64) -> Cube {
        Cube::new(window.dim, window.level, corner, side)
    }

    pub fn side_length(&self) -> f64 {
        self.side as f64 * pow2i(-self.level)
    }

    pub fn measure(&self) -> f64 {
        self.side_length().powi(self.dim as i32)
    }

    /// Same center, twice the edge.
    pub fn doubled(&self) -> Cube {
        if self.side % 2 == 0 {
            let half = (self.side / 2) as i64;
            Cube::new(
                self.dim,
                self.level,
                [self.corner[0] - half, self.corner[1] - half],
                self.side * 2,
            )
        } else {
            let s = self.side as i64;
            Cube::new(
                self.dim,
                self.level + 1,
                [2 * self.corner[0] - s, 2 * self.corner[1] - s],
                self.side * 4,
            )
        }
    }

    /// The same cube expressed in units of `2^-level` (`level >= self.level`).
    pub fn at_level(&self, level: i32) -> Cube {
        assert!(level >= self.level, "can only refine units");
        let k = 1i64 << (level - self.level);
        Cube::new(
            self.dim,
            level,
            [self.corner[0] * k, self.corner[1] * k],
            self.side * k as u64,
        )
    }

    pub fn center(&self) -> [f64; 2] {
        let u = pow2i(-self.level);
        let h = self.side as f64 / 2.0;
        [
            (self.corner[0] as f64 + h) * u,
            if self.dim == 1 { 0.0 } else { (self.corner[1] as f64 + h) * u },
        ]
    }

    pub fn contains(&self, other: &Cube) -> bool {
        let level = self.level.max(other.level);
        let (a, b) = (self.at_level(level), other.at_level(level));
        (0..self.dim).all(|k| {
            a.corner[k] <= b.corner[k] && b.corner[k] + b.side as i64 <= a.corner[k] + a.side as i64
        })
    }

    pub fn intersection_measure(&self, other: &Cube) -> f64 {
        let level = self.level.max(other.level);
        let (a, b) = (self.at_level(level), other.at_level(level));
        let u = pow2i(-level);
        (0..self.dim)
            .map(|k| {
                let lo = a.corner[k].max(b.corner[k]);
                let hi = (a.corner[k] + a.side as i64).min(b.corner[k] + b.side as i64);
                (hi - lo).max(0) as f64 * u
            })
            .product()
    }

    /// Box in finest-grid units of `window` (possibly fractional).
    pub fn grid_box(&self, window: Window) -> ([f64; 2], [f64; 2]) {
        let scale = pow2i(window.level - self.level);
        let lo = [self.corner[0] as f64 * scale, self.corner[1] as f64 * scale];
        let s = self.side as f64 * scale;
        (lo, [lo[0] + s, lo[1] + s])
    }
}

/// Kinds of nets over which the maximal function takes its supremum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetKind {
    Dyadic,
    AllCubes,
    Explicit(Vec<Cube>),
}

/// A net bound to its host window.
#[derive(Debug, Clone, PartialEq)]
pub struct NetSpec {
    pub kind: NetKind,
    pub window: Window,
}

impl NetSpec {
    pub fn new(kind: NetKind, window: Window) -> Result<NetSpec> {
        if let NetKind::Explicit(cubes) = &kind {
            if cubes.is_empty() {
                return Err(Error::EmptyNet);
            }
            if let Some(c) = cubes.iter().find(|c| c.dim != window.dim) {
                return Err(Error::DimMismatch {
                    expected: window.dim,
                    found: c.dim,
                });
            }
        }
        Ok(NetSpec { kind, window })
    }
}

/// All order-`m` dyadic cubes meeting the window.
///
/// For `m ≤ W` these are the `2^(n(W-m))` cubes tiling the window. For
/// `m > W` the only one is `[0, 2^m)^n`, which contains the window; its
/// average is `∫f / 2^(nm)`.
pub fn enumerate_dyadic(window: Window, order: i32) -> Result<Vec<Cube>> {
    if order < window.min_order() {
        return Err(Error::OrderOutOfRange {
            order,
            min: window.min_order(),
            max: i32::MAX,
        });
    }
    let side = 1u64 << (order + window.level);
    if order > window.max_order() {
        return Ok(vec![Cube::on_grid(window, [0, 0], side)]);
    }
    let count = 1i64 << (window.max_order() - order);
    let s = side as i64;
    let cubes = match window.dim {
        1 => (0..count)
            .map(|i| Cube::on_grid(window, [i * s, 0], side))
            .collect(),
        _ => (0..count)
            .flat_map(|i| (0..count).map(move |j| (i, j)))
            .map(|(i, j)| Cube::on_grid(window, [i * s, j * s], side))
            .collect(),
    };
    Ok(cubes)
}

/// `(1/|c|) ∫_c f` with `f ≡ 0` outside the window.
pub fn cube_average(ps: &PrefixSums, cube: &Cube) -> Result<f64> {
    let window = ps.window();
    if cube.dim != window.dim {
        return Err(Error::DimMismatch {
            expected: window.dim,
            found: cube.dim,
        });
    }
    let sum = if cube.level <= window.level {
        let k = 1i64 << (window.level - cube.level);
        let lo = [cube.corner[0] * k, cube.corner[1] * k];
        let s = cube.side as i64 * k;
        ps.rect_sum(lo, [lo[0] + s, lo[1] + s])
    } else {
        let (lo, hi) = cube.grid_box(window);
        ps.box_sum(lo, hi)
    };
    Ok(sum * window.cell_measure() / cube.measure())
}

/// Parses an explicit net list: CSV rows `corner_0[,corner_1],side` in
/// finest-grid units of `window`. Blank lines and `#` comments are skipped.
pub fn parse_net_list(text: &str, window: Window) -> Result<Vec<Cube>> {
    let mut cubes = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != window.dim + 1 {
            return Err(Error::NetList {
                line: lineno + 1,
                reason: format!("expected {} fields, got {}", window.dim + 1, fields.len()),
            });
        }
        let ints: Vec<i64> = fields
            .iter()
            .map(|s| {
                s.parse::<i64>().map_err(|_| Error::NetList {
                    line: lineno + 1,
                    reason: format!("`{s}` is not an integer"),
                })
            })
            .collect::<Result<_>>()?;
        let side = ints[window.dim];
        if side <= 0 {
            return Err(Error::NetList {
                line: lineno + 1,
                reason: format!("side must be positive, got {side}"),
            });
        }
        let corner = [ints[0], if window.dim == 2 { ints[1] } else { 0 }];
        cubes.push(Cube::on_grid(window, corner, side as u64));
    }
    if cubes.is_empty() {
        return Err(Error::EmptyNet);
    }
    Ok(cubes)
}

pub fn load_net_list(path: &Path, window: Window) -> Result<Vec<Cube>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_net_list(&text, window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SampledFunction;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dyadic_halves_of_unit_interval() {
        let w = Window::new(1, 3, 0).unwrap();
        let cubes = enumerate_dyadic(w, -1).unwrap();
        assert_eq!(cubes.len(), 2);
        assert_eq!(cubes[0].side_length(), 0.5);
        assert_eq!(cubes[0].corner[0], 0);
        assert_eq!(cubes[1].corner[0] as f64 * w.cell_side(), 0.5);
    }

    #[test]
    fn dyadic_unit_squares_tile_window() {
        let w = Window::new(2, 2, 1).unwrap();
        let cubes = enumerate_dyadic(w, 0).unwrap();
        assert_eq!(cubes.len(), 4);
        assert!(cubes.iter().all(|c| c.measure() == 1.0));
        assert!(matches!(
            enumerate_dyadic(w, -3),
            Err(Error::OrderOutOfRange { order: -3, .. })
        ));
        let big = enumerate_dyadic(w, 3).unwrap();
        assert_eq!(big.len(), 1);
        assert_eq!(big[0].measure(), 64.0);
    }

    #[test]
    fn dyadic_cubes_partition_the_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let dim = rng.gen_range(1..=2);
            let level = rng.gen_range(0..4);
            let order_w = rng.gen_range(-level..4);
            let w = Window::new(dim, level, order_w).unwrap();
            let m = rng.gen_range(w.min_order()..=w.max_order());
            let e = w.extent();
            let mut hits = vec![0u32; w.cells()];
            for c in enumerate_dyadic(w, m).unwrap() {
                let s = c.side as usize;
                let (c0, c1) = (c.corner[0] as usize, c.corner[1] as usize);
                for i in c0..c0 + s {
                    if dim == 1 {
                        hits[i] += 1;
                    } else {
                        for j in c1..c1 + s {
                            hits[i * e + j] += 1;
                        }
                    }
                }
            }
            assert!(hits.iter().all(|&h| h == 1));
        }
    }

    #[test]
    fn same_order_intersections() {
        let w = Window::new(2, 2, 2).unwrap();
        for m in w.min_order()..=w.max_order() {
            let cubes = enumerate_dyadic(w, m).unwrap();
            for a in &cubes {
                for b in &cubes {
                    let want = if a == b { w.dyadic_measure(m) } else { 0.0 };
                    assert_eq!(a.intersection_measure(b), want);
                }
            }
        }
    }

    #[test]
    fn averages_of_constant_and_indicator() {
        let w = Window::new(2, 2, 1).unwrap();
        let one = SampledFunction::from_fn(w, |_| 1.0).unwrap();
        let ps = PrefixSums::new(&one);
        let window_cube = Cube::on_grid(w, [0, 0], 8);
        assert_eq!(cube_average(&ps, &window_cube).unwrap(), 1.0);

        // Indicator of [0,1)^2; containing cube [0,2)^2 of measure 4.
        let ind = SampledFunction::from_fn(w, |[i, j]| if i < 4 && j < 4 { 1.0 } else { 0.0 }).unwrap();
        let ps = PrefixSums::new(&ind);
        assert_eq!(cube_average(&ps, &Cube::on_grid(w, [0, 0], 8)).unwrap(), 0.25);
        // A cube sticking out of the window only sees f inside.
        assert_eq!(cube_average(&ps, &Cube::on_grid(w, [-4, -4], 8)).unwrap(), 0.25);
        let wrong_dim = Cube::new(1, 2, [0, 0], 1);
        assert!(cube_average(&ps, &wrong_dim).is_err());
    }

    #[test]
    fn random_cube_averages_match_direct_sum() {
        let w = Window::new(2, 4, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = SampledFunction::from_fn(w, |_| rng.gen_range(-1.0..1.0)).unwrap();
        let ps = PrefixSums::new(&f);
        let e = w.extent() as i64;
        let tol = 2f64.powi(-40);
        for _ in 0..500 {
            let side = rng.gen_range(1..=e) as u64;
            let corner = [rng.gen_range(-(side as i64)..e), rng.gen_range(-(side as i64)..e)];
            let cube = Cube::on_grid(w, corner, side);
            let mut sum = 0.0;
            let mut mass = 0.0;
            for i in corner[0].max(0)..(corner[0] + side as i64).min(e) {
                for j in corner[1].max(0)..(corner[1] + side as i64).min(e) {
                    let v = f.at([i as usize, j as usize]);
                    sum += v;
                    mass += v.abs();
                }
            }
            let direct = sum * w.cell_measure() / cube.measure();
            let scale = mass * w.cell_measure() / cube.measure();
            let got = cube_average(&ps, &cube).unwrap();
            assert!((got - direct).abs() <= tol * scale.max(1e-300));
        }
    }

    #[test]
    fn doubled_cube_geometry() {
        let w = Window::new(1, 0, 2).unwrap();
        let unit = Cube::on_grid(w, [0, 0], 1);
        let d = unit.doubled();
        assert_eq!(d.side_length(), 2.0);
        assert_eq!(d.corner[0] as f64 * pow2i(-d.level), -0.5);
        assert_eq!(d.center(), unit.center());

        let sq = Cube::new(2, 0, [0, 0], 1);
        let d = sq.doubled();
        assert_eq!(d.measure(), 4.0);
        assert_eq!(d.center(), sq.center());

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let c = Cube::new(2, rng.gen_range(0..4), [rng.gen_range(-20..20), rng.gen_range(-20..20)], rng.gen_range(1..30));
            let d = c.doubled();
            assert!(d.contains(&c));
            assert_eq!(d.measure(), 4.0 * c.measure());
            assert_eq!(d.center(), c.center());
        }
    }

    #[test]
    fn fractional_cube_average() {
        // Doubled unit cell sticks half a cell out on each side.
        let w = Window::new(1, 0, 2).unwrap();
        let f = SampledFunction::new(w, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let ps = PrefixSums::new(&f);
        let d = Cube::on_grid(w, [1, 0], 1).doubled();
        // [0.5, 2.5): 0.5*1 + 2 + 0.5*3 = 4 over length 2.
        assert_eq!(cube_average(&ps, &d).unwrap(), 2.0);
    }

    #[test]
    fn net_list_parsing() {
        let w = Window::new(2, 1, 1).unwrap();
        let cubes = parse_net_list("# corner,corner,side\n0,0,2\n1,-1,3\n", w).unwrap();
        assert_eq!(cubes.len(), 2);
        assert_eq!(cubes[1].corner, [1, -1]);
        assert!(matches!(parse_net_list("0,2\n", w), Err(Error::NetList { line: 1, .. })));
        assert!(matches!(parse_net_list("0,0,0\n", w), Err(Error::NetList { .. })));
        assert!(matches!(parse_net_list("\n", w), Err(Error::EmptyNet)));
        assert!(matches!(
            NetSpec::new(NetKind::Explicit(vec![]), w),
            Err(Error::EmptyNet)
        ));
    }
}
