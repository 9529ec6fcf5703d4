use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{SampledFunction, Window};

/// Test-function families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    IndicatorCube,
    PowerSpike,
    RandomNonneg,
    RandomSigned,
    Checkerboard,
    IndicatorSum,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 6] = [
        GeneratorKind::IndicatorCube,
        GeneratorKind::PowerSpike,
        GeneratorKind::RandomNonneg,
        GeneratorKind::RandomSigned,
        GeneratorKind::Checkerboard,
        GeneratorKind::IndicatorSum,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub dim: usize,
    pub level: i32,
    pub window_order: i32,
    /// Function `i` uses `kinds[i % kinds.len()]`.
    pub kinds: Vec<GeneratorKind>,
    pub seed: u64,
    pub count: usize,
    /// Restrict to the cone `f ≥ 0`.
    pub nonneg: bool,
    /// Spike exponents are drawn below `n / spike_p0`.
    #[serde(default = "default_spike_p0")]
    pub spike_p0: f64,
}

fn default_spike_p0() -> f64 {
    2.0
}

impl CorpusSpec {
    pub fn new(window: Window, seed: u64, count: usize, nonneg: bool) -> CorpusSpec {
        CorpusSpec {
            dim: window.dim,
            level: window.level,
            window_order: window.window_order,
            kinds: GeneratorKind::ALL.to_vec(),
            seed,
            count,
            nonneg,
            spike_p0: default_spike_p0(),
        }
    }

    pub fn with_kinds(mut self, kinds: &[GeneratorKind]) -> CorpusSpec {
        self.kinds = kinds.to_vec();
        self
    }

    pub fn window(&self) -> Result<Window> {
        Window::new(self.dim, self.level, self.window_order)
    }
}

/// Generated functions with their identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub spec: CorpusSpec,
    pub functions: Vec<SampledFunction>,
    pub labels: Vec<String>,
}

impl Corpus {
    /// `sha256` over the window parameters and all cell values.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        if let Some(f) = self.functions.first() {
            let w = f.window();
            for v in [w.dim as i64, w.level as i64, w.window_order as i64] {
                h.update(v.to_le_bytes());
            }
        }
        for f in &self.functions {
            for v in f.values() {
                h.update(v.to_le_bytes());
            }
        }
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// Each function on the grid refined `L → L+1` (same function).
    pub fn refined(&self) -> Result<Corpus> {
        let functions = self.functions.iter().map(|f| f.refined()).collect::<Result<Vec<_>>>()?;
        let mut spec = self.spec.clone();
        spec.level += 1;
        Ok(Corpus {
            spec,
            functions,
            labels: self.labels.clone(),
        })
    }

    pub fn scaled(&self, lambda: f64) -> Corpus {
        Corpus {
            spec: self.spec.clone(),
            functions: self.functions.iter().map(|f| f.scaled(lambda)).collect(),
            labels: self.labels.clone(),
        }
    }
}

pub fn generate_corpus(spec: &CorpusSpec) -> Result<Corpus> {
    let w = spec.window()?;
    if spec.kinds.is_empty() {
        return Err(Error::param("corpus needs at least one generator kind"));
    }
    if !(spec.spike_p0 > 0.0) {
        return Err(Error::param("spike_p0 must be positive"));
    }
    let functions: Vec<SampledFunction> = (0..spec.count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64);
            generate_one(w, spec.kinds[i % spec.kinds.len()], spec.nonneg, spec.spike_p0, &mut rng)
        })
        .collect::<Result<_>>()?;
    let labels = (0..spec.count)
        .map(|i| format!("{i}:{}", kind_name(spec.kinds[i % spec.kinds.len()])))
        .collect();
    Ok(Corpus {
        spec: spec.clone(),
        functions,
        labels,
    })
}

fn kind_name(k: GeneratorKind) -> &'static str {
    match k {
        GeneratorKind::IndicatorCube => "indicator",
        GeneratorKind::PowerSpike => "spike",
        GeneratorKind::RandomNonneg => "random-nonneg",
        GeneratorKind::RandomSigned => "random-signed",
        GeneratorKind::Checkerboard => "checkerboard",
        GeneratorKind::IndicatorSum => "indicator-sum",
    }
}

fn random_box(w: Window, rng: &mut ChaCha8Rng) -> ([usize; 2], usize) {
    let e = w.extent();
    let side = rng.gen_range(1..=(e / 2).max(1));
    let mut corner = [0usize; 2];
    for c in corner.iter_mut().take(w.dim) {
        *c = rng.gen_range(0..=e - side);
    }
    (corner, side)
}

fn in_box(idx: [usize; 2], corner: [usize; 2], side: usize, dim: usize) -> bool {
    (0..dim).all(|a| idx[a] >= corner[a] && idx[a] < corner[a] + side)
}

fn generate_one(w: Window, kind: GeneratorKind, nonneg: bool, spike_p0: f64, rng: &mut ChaCha8Rng) -> Result<SampledFunction> {
    let n = w.dim;
    let e = w.extent();
    let sign = |rng: &mut ChaCha8Rng| if nonneg || rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    match kind {
        GeneratorKind::IndicatorCube => {
            let (corner, side) = random_box(w, rng);
            let s = sign(rng);
            SampledFunction::from_fn(w, |idx| if in_box(idx, corner, side, n) { s } else { 0.0 })
        }
        GeneratorKind::PowerSpike => {
            let alpha = rng.gen_range(0.2..0.9) * n as f64 / spike_p0;
            let mut centre = [0usize; 2];
            for c in centre.iter_mut().take(n) {
                *c = rng.gen_range(0..e);
            }
            let s = sign(rng);
            let h = w.cell_side();
            SampledFunction::from_fn(w, |idx| {
                let d2: f64 = (0..n).map(|a| ((idx[a] as f64 - centre[a] as f64) * h).powi(2)).sum();
                // Truncation at cell scale keeps the sampled spike bounded.
                s * d2.sqrt().max(h).powf(-alpha)
            })
        }
        GeneratorKind::RandomNonneg => {
            let k = rng.gen_range(1..=4);
            SampledFunction::from_fn(w, |_| rng.gen::<f64>().powi(k))
        }
        GeneratorKind::RandomSigned => {
            if nonneg {
                SampledFunction::from_fn(w, |_| rng.gen::<f64>())
            } else {
                SampledFunction::from_fn(w, |_| rng.gen_range(-1.0..1.0))
            }
        }
        GeneratorKind::Checkerboard => {
            let board = checkerboard(w, rng.gen_range(w.min_order()..=w.max_order()))?;
            Ok(if nonneg { board.map(|v| 0.5 * (1.0 + v)) } else { board })
        }
        GeneratorKind::IndicatorSum => {
            let pieces: Vec<([usize; 2], usize, f64)> = (0..rng.gen_range(3..=6))
                .map(|_| {
                    let (c, s) = random_box(w, rng);
                    (c, s, sign(rng) * rng.gen_range(0.1..2.0))
                })
                .collect();
            SampledFunction::from_fn(w, |idx| {
                pieces
                    .iter()
                    .filter(|(c, s, _)| in_box(idx, *c, *s, n))
                    .map(|p| p.2)
                    .sum()
            })
        }
    }
}

/// Checkerboard of order `m`: `±1` by the parity of the order-`m` cube.
pub fn checkerboard(w: Window, order: i32) -> Result<SampledFunction> {
    if order < w.min_order() || order > w.max_order() {
        return Err(Error::OrderOutOfRange {
            order,
            min: w.min_order(),
            max: w.max_order(),
        });
    }
    let k = (order - w.min_order()) as u32;
    SampledFunction::from_fn(w, |[i, j]| {
        let parity = ((i >> k) + if w.dim == 2 { j >> k } else { 0 }) % 2;
        if parity == 0 {
            1.0
        } else {
            -1.0
        }
    })
}
