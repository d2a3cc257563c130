//! Bundled run configurations for the published parameter sets.

use crate::config::RunConfig;
use crate::error::CliError;

const PRESETS: &[(&str, &str)] = &[
    ("fig1_qwz", include_str!("../presets/fig1_qwz.toml")),
    ("fig1_sticlet", include_str!("../presets/fig1_sticlet.toml")),
    ("fig2_qwz", include_str!("../presets/fig2_qwz.toml")),
    ("fig2_sticlet", include_str!("../presets/fig2_sticlet.toml")),
    ("fig3", include_str!("../presets/fig3.toml")),
    ("figS7", include_str!("../presets/figS7.toml")),
    ("fig4", include_str!("../presets/fig4.toml")),
    ("fig4_right", include_str!("../presets/fig4_right.toml")),
    ("figS8", include_str!("../presets/figS8.toml")),
    ("figS9", include_str!("../presets/figS9.toml")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|p| p.0)
}

pub fn source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|p| p.0 == name).map(|p| p.1)
}

pub fn load(name: &str) -> Result<RunConfig, CliError> {
    let text = source(name).ok_or_else(|| {
        let known: Vec<&str> = names().collect();
        CliError::Config(format!("unknown preset {name:?}; known: {}", known.join(", ")))
    })?;
    RunConfig::from_toml(text).map_err(|e| CliError::Config(format!("preset {name}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for n in names() {
            let c = load(n).unwrap();
            assert_eq!(c.name.as_deref(), Some(n));
        }
    }

    #[test]
    fn unknown_preset_is_config_error() {
        assert_eq!(load("fig9").unwrap_err().exit_code(), 3);
    }
}
