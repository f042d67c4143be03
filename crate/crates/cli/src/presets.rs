//! Versioned scenario presets compiled into the binary.

pub struct Preset {
    pub name: &'static str,
    pub text: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "koopman",
        text: include_str!("../presets/koopman.toml"),
    },
    Preset {
        name: "koopman-identity",
        text: include_str!("../presets/koopman-identity.toml"),
    },
    Preset {
        name: "meanfield",
        text: include_str!("../presets/meanfield.toml"),
    },
    Preset {
        name: "meanfield-control",
        text: include_str!("../presets/meanfield-control.toml"),
    },
    Preset {
        name: "particles",
        text: include_str!("../presets/particles.toml"),
    },
    Preset {
        name: "general",
        text: include_str!("../presets/general.toml"),
    },
    Preset {
        name: "general-hermite",
        text: include_str!("../presets/general-hermite.toml"),
    },
    Preset {
        name: "brackets",
        text: include_str!("../presets/brackets.toml"),
    },
];

pub const ACCEPTANCE: &str = include_str!("../presets/acceptance.toml");

pub fn get(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|p| p.name == name).map(|p| p.text)
}

/// First comment line of a preset.
pub fn summary(text: &str) -> &str {
    text.lines()
        .next()
        .and_then(|l| l.strip_prefix('#'))
        .map(str::trim)
        .unwrap_or("")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    #[test]
    fn every_preset_parses() {
        for p in PRESETS {
            RunConfig::from_toml(p.text).unwrap_or_else(|e| panic!("{}: {e}", p.name));
            assert!(!summary(p.text).is_empty(), "{}", p.name);
        }
    }
}
