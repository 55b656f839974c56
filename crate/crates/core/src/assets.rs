//! Bundled data assets and the directory override used by the CLI.
//!
//! Every asset can be replaced by a file of the same name in a data
//! directory; see [`AssetDir`].

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const KEY_TABLE: &str = include_str!("../assets/keys.tsv");
pub const CHART: &str = include_str!("../assets/chart.tsv");
pub const EXPERT_WEIGHTS: &str = include_str!("../assets/expert_weights.tsv");
pub const BIGRAMS: &str = include_str!("../assets/bigrams.csv");
pub const INTERVALS: &str = include_str!("../assets/intervals.csv");
pub const DEMO_PART: &str = include_str!("../assets/demo.musicxml");

pub const KEY_TABLE_FILE: &str = "keys.tsv";
pub const CHART_FILE: &str = "chart.tsv";
pub const EXPERT_WEIGHTS_FILE: &str = "expert_weights.tsv";
pub const BIGRAMS_FILE: &str = "bigrams.csv";
pub const INTERVALS_FILE: &str = "intervals.csv";

/// Environment variable naming a directory whose files override the bundled assets.
pub const DATA_DIR_ENV: &str = "SAXDIFF_DATA_DIR";

/// Resolves asset text: an explicit path wins, then a file in the override
/// directory, then the bundled copy.
#[derive(Clone, Debug, Default)]
pub struct AssetDir {
    dir: Option<PathBuf>,
}

impl AssetDir {
    pub fn new(dir: Option<PathBuf>) -> AssetDir {
        AssetDir { dir }
    }

    pub fn from_env() -> AssetDir {
        AssetDir::new(std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
    }

    /// Returns (text, source name).
    pub fn read(&self, explicit: Option<&Path>, file: &str, bundled: &'static str) -> Result<(String, String)> {
        if let Some(p) = explicit {
            return read_file(p);
        }
        if let Some(dir) = &self.dir {
            let p = dir.join(file);
            if p.exists() {
                return read_file(&p);
            }
        }
        Ok((bundled.to_string(), format!("bundled {file}")))
    }
}

fn read_file(p: &Path) -> Result<(String, String)> {
    let text = std::fs::read_to_string(p).map_err(|e| Error::load(p.display().to_string(), e.to_string()))?;
    Ok((text, p.display().to_string()))
}
