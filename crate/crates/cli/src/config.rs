use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use netspace::harness::{CorollaryParams, CorpusSpec, OperatorSpec};
use netspace::interp::Endpoints;
use netspace::nets::load_net_list;
use netspace::norms::MorreyParams;
use netspace::{NetKind, NormParams, SideSchedule, SpacePair, Window};

pub const DEFAULT_SEED: u64 = 7;

/// Everything a run needs. Loaded from `--config`, then overridden by
/// command-line flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Informational; a mismatch with the invoked subcommand is an error.
    pub subcommand: Option<String>,
    pub inputs: Vec<PathBuf>,
    /// `dyadic`, `allcubes` or `explicit:<path>`.
    pub net: Option<String>,
    pub schedule: Option<SideSchedule>,
    pub norm: Option<NormParams>,
    pub endpoints: Option<Endpoints>,
    pub pairs: Vec<SpacePair>,
    pub morrey: Option<MorreyParams>,
    pub lambdas: Vec<f64>,
    pub corpus: Option<CorpusSpec>,
    pub corollary: Option<CorollaryParams>,
    pub operator: Option<OperatorSpec>,
    pub hardy_count: Option<usize>,
    pub lemma_samples: Option<usize>,
    pub refine: Option<bool>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn schedule(&self) -> SideSchedule {
        self.schedule.unwrap_or_default()
    }

    /// Resolves the net string against the window of the function it will
    /// be applied to.
    pub fn net_kind(&self, window: Window) -> Result<NetKind> {
        parse_net(self.net.as_deref().unwrap_or("dyadic"), window)
    }

    pub fn check_subcommand(&self, invoked: &str) -> Result<()> {
        match &self.subcommand {
            Some(s) if s != invoked => bail!("config is for subcommand `{s}`, invoked `{invoked}`"),
            _ => Ok(()),
        }
    }
}

pub fn parse_net(s: &str, window: Window) -> Result<NetKind> {
    match s {
        "dyadic" => Ok(NetKind::Dyadic),
        "allcubes" | "all-cubes" => Ok(NetKind::AllCubes),
        _ => match s.strip_prefix("explicit:") {
            Some(path) => Ok(NetKind::Explicit(load_net_list(Path::new(path), window)?)),
            None => bail!("unknown net `{s}` (expected dyadic, allcubes or explicit:<path>)"),
        },
    }
}

/// The configurations behind `netspace verify <name>` when no corpus or
/// parameters are given.
pub mod defaults {
    use super::*;

    fn corpus(dim: usize, level: i32, window_order: i32, count: usize, nonneg: bool, seed: u64) -> CorpusSpec {
        let w = Window::new(dim, level, window_order).expect("static window");
        CorpusSpec::new(w, seed, count, nonneg)
    }

    pub const THETAS: [f64; 3] = [0.25, 0.5, 0.75];
    pub const QS: [f64; 3] = [1.0, 2.0, f64::INFINITY];

    pub fn theorem1_pairs() -> Vec<SpacePair> {
        let mut out = Vec::new();
        for theta in THETAS {
            for q in QS {
                out.push(SpacePair::new(1.2, f64::INFINITY, 4.0, f64::INFINITY, theta, q).expect("static pair"));
            }
        }
        out
    }

    pub fn theorem2_pairs() -> Vec<SpacePair> {
        let mut out = Vec::new();
        for p0 in [2.0, 3.0] {
            for theta in THETAS {
                for q in QS {
                    out.push(SpacePair::new(p0, 2.0, 2.0 * p0, 2.0, theta, q).expect("static pair"));
                }
            }
        }
        out
    }

    pub fn theorem1(seed: u64) -> CorpusSpec {
        corpus(2, 4, 4, 20, false, seed)
    }

    pub fn theorem1_1d(seed: u64) -> CorpusSpec {
        corpus(1, 6, 6, 20, false, seed)
    }

    pub fn theorem2(seed: u64) -> CorpusSpec {
        corpus(2, 3, 4, 20, true, seed)
    }

    pub fn lemmas(seed: u64) -> CorpusSpec {
        corpus(2, 4, 4, 20, true, seed)
    }

    pub fn cancellation(seed: u64) -> CorpusSpec {
        corpus(2, 4, 4, 50, false, seed)
    }

    pub fn cancellation_1d(seed: u64) -> CorpusSpec {
        corpus(1, 6, 6, 50, false, seed)
    }

    pub fn embedding(seed: u64) -> CorpusSpec {
        corpus(2, 4, 4, 20, false, seed)
    }

    pub fn morrey(seed: u64) -> CorpusSpec {
        corpus(2, 3, 4, 20, true, seed)
    }

    pub fn morrey_1d(seed: u64) -> CorpusSpec {
        corpus(1, 5, 5, 20, true, seed)
    }

    pub fn corollary(seed: u64) -> CorpusSpec {
        corpus(2, 3, 3, 20, true, seed)
    }

    pub fn corollary_params() -> CorollaryParams {
        CorollaryParams::new(2.0, 6.0, 0.5)
    }

    pub fn operator() -> OperatorSpec {
        OperatorSpec::DyadicAverage { order: 0 }
    }

    /// `λ ∈ {0, n/4, n/2}`.
    pub fn lambdas(dim: usize) -> Vec<f64> {
        let n = dim as f64;
        vec![0.0, n / 4.0, n / 2.0]
    }

    pub const HARDY_COUNT: usize = 100;
    pub const LEMMA_SAMPLES: usize = 1000;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_with_infinities() {
        let cfg = RunConfig {
            subcommand: Some("verify".into()),
            pairs: defaults::theorem1_pairs(),
            corpus: Some(defaults::theorem1(3)),
            norm: Some(NormParams::new(2.0, f64::INFINITY).unwrap()),
            ..RunConfig::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"inf\""));
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_fields_and_nets_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
        let w = Window::new(1, 1, 1).unwrap();
        assert!(parse_net("hexagons", w).is_err());
        assert!(parse_net("explicit:/nonexistent/net.csv", w).is_err());
        assert_eq!(parse_net("allcubes", w).unwrap(), NetKind::AllCubes);
    }
}
