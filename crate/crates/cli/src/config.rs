//! Run configuration: defaults, then the config file, then flags.

use std::path::{Path, PathBuf};

use affinelab::{Error, Result, Settings};
use serde::{Deserialize, Serialize};

/// Environment variable holding the default working precision.
pub const PRECISION_ENV: &str = "AFFINELAB_PRECISION";

/// Optional overrides, as read from a config file or from flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub precision: Option<u32>,
    pub guard_bits: Option<u32>,
    pub budget: Option<u64>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

impl Overrides {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::InvalidArgument(format!("config {}: {e}", path.display())))
    }

    /// `self` wins where set.
    fn over(self, base: Overrides) -> Overrides {
        Overrides {
            precision: self.precision.or(base.precision),
            guard_bits: self.guard_bits.or(base.guard_bits),
            budget: self.budget.or(base.budget),
            workers: self.workers.or(base.workers),
            seed: self.seed.or(base.seed),
            report: self.report.or(base.report),
            csv: self.csv.or(base.csv),
        }
    }
}

/// Fully resolved configuration, echoed into every report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub settings: Settings,
    pub seed: u64,
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub config_file: Option<PathBuf>,
    /// Subcommand flags after parsing.
    pub args: toml::Table,
}

pub const DEFAULT_SEED: u64 = 1;

fn env_precision() -> Result<Option<u32>> {
    match std::env::var(PRECISION_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::InvalidArgument(format!("{PRECISION_ENV} must be an integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

pub fn resolve(
    command: &str,
    flags: Overrides,
    config_file: Option<&Path>,
    args: toml::Table,
) -> Result<RunConfig> {
    let file = match config_file {
        Some(p) => Overrides::load(p)?,
        None => Overrides::default(),
    };
    let env = Overrides { precision: env_precision()?, ..Overrides::default() };
    let o = flags.over(file.over(env));
    let d = Settings::default();
    let settings = Settings {
        precision: o.precision.unwrap_or(d.precision),
        guard_bits: o.guard_bits.unwrap_or(d.guard_bits),
        budget: o.budget.unwrap_or(d.budget),
        workers: o.workers.unwrap_or(d.workers),
    };
    settings.validate()?;
    Ok(RunConfig {
        command: command.to_string(),
        settings,
        seed: o.seed.unwrap_or(DEFAULT_SEED),
        report: o.report,
        csv: o.csv,
        config_file: config_file.map(Path::to_path_buf),
        args,
    })
}
