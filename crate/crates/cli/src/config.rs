//! Runtime settings with layered resolution: built-in defaults, then an
//! optional TOML file, then `SPANFORGE_*` environment variables, then
//! command-line flags. Later layers win per field.

use std::path::Path;
use std::time::Duration;

use anyhow::{anyhow, Context, Result};
use serde::Deserialize;

use spanforge_core::accel::PipelineConfig;

use crate::dispatch::DispatchConfig;

/// One layer of optional overrides. TOML files, the environment, and CLI
/// flags all reduce to this shape.
#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    pub workers: Option<usize>,
    pub package_bytes: Option<usize>,
    pub package_docs: Option<usize>,
    pub flush_us: Option<u64>,
    pub channel_capacity: Option<usize>,
    pub sort_buffer_capacity: Option<usize>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn from_toml(path: &Path) -> Result<Overrides> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn from_env() -> Result<Overrides> {
        fn get<T: std::str::FromStr>(key: &str) -> Result<Option<T>> {
            match std::env::var(key) {
                Ok(v) => v
                    .parse()
                    .map(Some)
                    .map_err(|_| anyhow!("{key}={v:?} is not a valid value")),
                Err(_) => Ok(None),
            }
        }
        Ok(Overrides {
            workers: get("SPANFORGE_WORKERS")?,
            package_bytes: get("SPANFORGE_PACKAGE_BYTES")?,
            package_docs: get("SPANFORGE_PACKAGE_DOCS")?,
            flush_us: get("SPANFORGE_FLUSH_US")?,
            channel_capacity: get("SPANFORGE_CHANNEL_CAPACITY")?,
            sort_buffer_capacity: get("SPANFORGE_SORT_BUFFER_CAPACITY")?,
            seed: get("SPANFORGE_SEED")?,
        })
    }

    fn apply(self, other: Overrides) -> Overrides {
        Overrides {
            workers: other.workers.or(self.workers),
            package_bytes: other.package_bytes.or(self.package_bytes),
            package_docs: other.package_docs.or(self.package_docs),
            flush_us: other.flush_us.or(self.flush_us),
            channel_capacity: other.channel_capacity.or(self.channel_capacity),
            sort_buffer_capacity: other.sort_buffer_capacity.or(self.sort_buffer_capacity),
            seed: other.seed.or(self.seed),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Settings {
    pub dispatch: DispatchConfig,
    pub seed: u64,
}

/// Resolve settings from the layered sources. `flags` comes last and wins.
pub fn resolve(config_file: Option<&Path>, flags: Overrides) -> Result<Settings> {
    let mut merged = Overrides::default();
    if let Some(path) = config_file {
        merged = merged.apply(Overrides::from_toml(path)?);
    }
    merged = merged.apply(Overrides::from_env()?);
    merged = merged.apply(flags);

    let defaults = DispatchConfig::default();
    let pipeline_defaults = PipelineConfig::default();
    Ok(Settings {
        dispatch: DispatchConfig {
            workers: merged.workers.unwrap_or(defaults.workers).max(1),
            package_bytes: merged.package_bytes.unwrap_or(defaults.package_bytes),
            package_docs: merged.package_docs.unwrap_or(defaults.package_docs).max(1),
            flush: merged
                .flush_us
                .map(Duration::from_micros)
                .unwrap_or(defaults.flush),
            pipeline: PipelineConfig {
                channel_capacity: merged
                    .channel_capacity
                    .unwrap_or(pipeline_defaults.channel_capacity),
                sort_buffer_capacity: merged
                    .sort_buffer_capacity
                    .unwrap_or(pipeline_defaults.sort_buffer_capacity),
                ..pipeline_defaults
            },
        },
        seed: merged.seed.unwrap_or(1),
    })
}
