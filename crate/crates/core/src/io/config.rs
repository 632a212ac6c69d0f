use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::SweepConfig;

/// Parses and validates a configuration file body. Parse errors carry the
/// line and column of the offending key.
pub fn parse_config(text: &str) -> Result<SweepConfig> {
    let cfg: SweepConfig = toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        match e.span() {
            Some(span) => {
                let (line, col) = line_col(text, span.start);
                Error::Config(format!("line {line}, column {col}: {msg}"))
            }
            None => Error::Config(msg),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a configuration file, returning the parsed config and its text.
pub fn load_config(path: &Path) -> Result<(SweepConfig, String)> {
    let text = std::fs::read_to_string(path)?;
    let cfg = parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    Ok((cfg, text))
}

/// Serializes a config to the file format; `parse_config` inverts it.
pub fn config_to_string(cfg: &SweepConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
}

/// One-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}
