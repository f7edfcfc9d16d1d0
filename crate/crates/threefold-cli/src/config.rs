//! Run configuration: truncation window, growth cap, output format and
//! cache location. Defaults cover every check in the verification suite
//! with margin; a config file in the flat key-value format can override
//! them, and command-line flags override the file.

use std::path::PathBuf;

use threefold_core::series::TruncationPolicy;

use crate::specfile::{parse_document, ParseError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Text,
    Json,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub policy: TruncationPolicy,
    pub growth_cap: u32,
    pub format: OutputFormat,
    pub cache_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            policy: TruncationPolicy::new(6, -12, 12),
            growth_cap: 4,
            format: OutputFormat::Text,
            cache_dir: None,
        }
    }
}

impl RunConfig {
    /// Apply `key = value` overrides from a config file.
    pub fn apply_file(&mut self, text: &str) -> Result<(), ParseError> {
        let doc = parse_document(text)?;
        let mut u_deg = self.policy.u_deg_max;
        let mut z_min = self.policy.z_min;
        let mut z_max = self.policy.z_max;
        for (key, value) in &doc {
            let bad = |message: &str| ParseError::BadValue {
                key: key.clone(),
                message: message.to_string(),
            };
            match key.as_str() {
                "u_deg" => u_deg = value.parse().map_err(|_| bad("not an integer"))?,
                "z_min" => z_min = value.parse().map_err(|_| bad("not an integer"))?,
                "z_max" => z_max = value.parse().map_err(|_| bad("not an integer"))?,
                "growth_cap" => {
                    self.growth_cap = value.parse().map_err(|_| bad("not an integer"))?
                }
                "format" => {
                    self.format = match value.as_str() {
                        "text" => OutputFormat::Text,
                        "json" => OutputFormat::Json,
                        _ => return Err(bad("expected `text` or `json`")),
                    }
                }
                "cache_dir" => self.cache_dir = Some(PathBuf::from(value)),
                _ => return Err(bad("unknown config key")),
            }
        }
        if !(z_min <= 0 && 0 <= z_max) {
            return Err(ParseError::BadValue {
                key: "z_min/z_max".to_string(),
                message: "window must contain z^0".to_string(),
            });
        }
        self.policy = TruncationPolicy::new(u_deg, z_min, z_max);
        Ok(())
    }

    /// Stable one-line encoding, part of every cache key.
    pub fn canonical_string(&self) -> String {
        format!(
            "u_deg={};z_min={};z_max={};growth_cap={}",
            self.policy.u_deg_max, self.policy.z_min, self.policy.z_max, self.growth_cap
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overrides() {
        let mut config = RunConfig::default();
        config.apply_file("u_deg = 4\nz_min = -8\nz_max = 8\nformat = json\n").unwrap();
        assert_eq!(config.policy, TruncationPolicy::new(4, -8, 8));
        assert_eq!(config.format, OutputFormat::Json);
        assert!(config.apply_file("nonsense = 1\n").is_err());
    }
}
