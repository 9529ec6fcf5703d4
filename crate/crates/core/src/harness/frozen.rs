use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::Report;

/// Overrides the frozen-constant file location.
pub const FROZEN_ENV: &str = "NETSPACE_FROZEN_CONSTANTS";
/// When set to `1`, verification runs record their measurements instead of
/// checking them.
pub const REFREEZE_ENV: &str = "NETSPACE_REFREEZE";
/// Allowed regression over a frozen constant.
pub const REGRESSION_FACTOR: f64 = 1.05;
/// Rows whose name starts with this prefix are checked against the file.
pub const FROZEN_PREFIX: &str = "frozen:";

static FILE_LOCK: Mutex<()> = Mutex::new(());

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreezeMode {
    Check,
    Freeze,
}

impl FreezeMode {
    pub fn from_env() -> FreezeMode {
        match std::env::var(REFREEZE_ENV) {
            Ok(v) if v == "1" => FreezeMode::Freeze,
            _ => FreezeMode::Check,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct FrozenFile {
    schema: u32,
    constants: BTreeMap<String, f64>,
}

/// Reference values of empirical equivalence constants.
#[derive(Debug, Clone)]
pub struct FrozenConstants {
    path: PathBuf,
    constants: BTreeMap<String, f64>,
}

/// `$NETSPACE_FROZEN_CONSTANTS`, else `frozen_constants.json` at the
/// workspace root.
pub fn default_path() -> PathBuf {
    match std::env::var_os(FROZEN_ENV) {
        Some(p) => PathBuf::from(p),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("../../frozen_constants.json"),
    }
}

pub fn frozen_key(theorem: &str, params: &str, corpus_hash: &str) -> String {
    format!("{theorem}|{params}|{corpus_hash}")
}

impl FrozenConstants {
    /// A missing file yields an empty set.
    pub fn load(path: &Path) -> Result<FrozenConstants> {
        let constants = match fs::read_to_string(path) {
            Ok(text) => {
                let file: FrozenFile = serde_json::from_str(&text).map_err(|e| Error::Frozen {
                    path: path.to_path_buf(),
                    reason: e.to_string(),
                })?;
                file.constants
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(Error::io(path, e)),
        };
        Ok(FrozenConstants {
            path: path.to_path_buf(),
            constants,
        })
    }

    pub fn load_default() -> Result<FrozenConstants> {
        FrozenConstants::load(&default_path())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.constants.get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.constants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constants.is_empty()
    }

    /// Checks (or records) every `frozen:` row of `report`. The key uses the
    /// report title, the row name without prefix plus its parameters, and
    /// the corpus hash. Missing constants fail the row in check mode.
    pub fn apply(&mut self, report: &mut Report, corpus_hash: &str, mode: FreezeMode) -> Result<()> {
        let title = report.title.clone();
        let mut fresh = BTreeMap::new();
        for row in report.rows.iter_mut().filter(|r| r.name.starts_with(FROZEN_PREFIX)) {
            let name = &row.name[FROZEN_PREFIX.len()..];
            let key = frozen_key(&title, &format!("{name} {}", row.params), corpus_hash);
            match mode {
                FreezeMode::Freeze => {
                    row.bound = row.value;
                    row.tolerance = REGRESSION_FACTOR - 1.0;
                    row.pass = row.value.is_finite();
                    if row.pass {
                        fresh.insert(key, row.value);
                    }
                }
                FreezeMode::Check => match self.constants.get(&key) {
                    Some(&c) => {
                        row.bound = c;
                        row.tolerance = REGRESSION_FACTOR - 1.0;
                        row.pass = row.value.is_finite() && row.value <= c * REGRESSION_FACTOR;
                    }
                    None => {
                        row.pass = false;
                        row.witness = format!("missing frozen constant {key}");
                    }
                },
            }
        }
        if !fresh.is_empty() {
            self.constants.extend(fresh.clone());
            merge_into_file(&self.path, fresh)?;
        }
        Ok(())
    }
}

/// Read-merge-write under a process-wide lock.
fn merge_into_file(path: &Path, entries: BTreeMap<String, f64>) -> Result<()> {
    let _guard = FILE_LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let mut current = FrozenConstants::load(path)?.constants;
    current.extend(entries);
    let file = FrozenFile {
        schema: 1,
        constants: current,
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
