//! Run settings from `--config`, merged under command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

use crate::Format;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub tx: Option<PathBuf>,
    pub roster: Option<PathBuf>,
    pub wallets: Option<PathBuf>,
    pub prices: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub tags: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub phases: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub day_range: Option<String>,
    pub format: Option<Format>,
    #[serde(default)]
    pub literal_scan: bool,
    #[serde(default)]
    pub all_roster_gini: bool,
    #[serde(default)]
    pub all_roster_cvr: bool,
    #[serde(default)]
    pub single_pass_clean: bool,
    #[serde(default)]
    pub value_weighted_shares: bool,
    #[serde(default)]
    pub self_loops: bool,
    #[serde(default)]
    pub full_months: bool,
    pub top_k: Option<usize>,
    #[serde(default)]
    pub verify_checksums: bool,
    pub member_substring: Option<String>,
    pub tag_substring: Option<String>,
    pub tag_exclusions: Option<Vec<String>>,
}

impl RunConfig {
    /// Loads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(ponzi_core::Error::from)
            .with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.tx,
            &mut cfg.roster,
            &mut cfg.wallets,
            &mut cfg.prices,
            &mut cfg.corpus,
            &mut cfg.tags,
            &mut cfg.dataset,
            &mut cfg.phases,
            &mut cfg.out,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}
