//! Bundled scenario presets A to F and loading of custom scenario files.

use std::fs;
use std::path::Path;

use skece_core::channel::{Preset, ScenarioConfig};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PresetError {
    #[error("cannot read scenario file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid scenario {name}: {source}")]
    Parse { name: String, source: Box<toml::de::Error> },
    #[error("invalid scenario {name}: {source}")]
    Invalid {
        name: String,
        source: skece_core::channel::ChannelError,
    },
}

const SOURCES: [(Preset, &str); 6] = [
    (Preset::A, include_str!("../presets/a.toml")),
    (Preset::B, include_str!("../presets/b.toml")),
    (Preset::C, include_str!("../presets/c.toml")),
    (Preset::D, include_str!("../presets/d.toml")),
    (Preset::E, include_str!("../presets/e.toml")),
    (Preset::F, include_str!("../presets/f.toml")),
];

pub fn parse_scenario(name: &str, text: &str) -> Result<ScenarioConfig, PresetError> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| PresetError::Parse {
        name: name.to_string(),
        source: Box::new(e),
    })?;
    cfg.validate().map_err(|e| PresetError::Invalid {
        name: name.to_string(),
        source: e,
    })?;
    Ok(cfg)
}

/// The bundled configuration of a lettered preset. `Custom` has none.
pub fn preset(p: Preset) -> Option<ScenarioConfig> {
    SOURCES
        .iter()
        .find(|(q, _)| *q == p)
        .map(|(q, text)| parse_scenario(&q.letter().to_string(), text).expect("bundled presets are valid"))
}

pub fn from_letter(s: &str) -> Option<Preset> {
    Preset::ALL
        .into_iter()
        .find(|p| s.len() == 1 && s.eq_ignore_ascii_case(&p.letter().to_string()))
}

/// Resolves `A`..`F` to a bundled preset, anything else to a TOML file.
pub fn load_scenario(arg: &str) -> Result<ScenarioConfig, PresetError> {
    if let Some(p) = from_letter(arg) {
        return Ok(preset(p).expect("lettered preset"));
    }
    let path = Path::new(arg);
    let text = fs::read_to_string(path).map_err(|source| PresetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(arg, &text)
}
