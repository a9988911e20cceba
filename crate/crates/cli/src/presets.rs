//! In-repo preset catalogue, embedded in the binary.

use crate::config::{ConfigError, RunConfig};

pub const PRESET_NAMES: &[&str] = &[
    "linear-constant",
    "delay-ode",
    "preset-a",
    "preset-b",
    "preset-c",
    "preset-n",
];

pub fn source(name: &str) -> Option<&'static str> {
    match name.to_ascii_lowercase().as_str() {
        "linear-constant" => Some(include_str!("../presets/linear-constant.toml")),
        "delay-ode" => Some(include_str!("../presets/delay-ode.toml")),
        "preset-a" => Some(include_str!("../presets/preset-a.toml")),
        "preset-b" => Some(include_str!("../presets/preset-b.toml")),
        "preset-c" => Some(include_str!("../presets/preset-c.toml")),
        "preset-n" => Some(include_str!("../presets/preset-n.toml")),
        _ => None,
    }
}

pub fn load(name: &str) -> Result<RunConfig, ConfigError> {
    let text = source(name).ok_or_else(|| ConfigError {
        field: "preset".into(),
        message: format!(
            "unknown preset `{name}`; available: {}",
            PRESET_NAMES.join(", ")
        ),
    })?;
    RunConfig::from_toml_str(text)
}
