//! Experiment configuration: presets, strict TOML files, flag overlay,
//! and the canonical form that is hashed into every output header.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Every physics knob an experiment can take. All fields optional so the
/// same struct serves as preset, file content, flag overlay, and merged
/// result. Unknown keys in a file are an error, not a warning: a typoed
/// knob silently falling back to a default would poison the provenance
/// hash with a lie.
///
/// Only physics lives here. Destination paths and thread counts are
/// deliberately excluded so the canonical hash identifies the experiment,
/// not the machine it ran on.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subcommand: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operator: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Bin width for the occupation histogram; 0 selects the automatic
    /// range-based width.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ns: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kscale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refinement: Option<u32>,
}

impl ExperimentConfig {
    /// Field-wise overlay: any knob set in `top` wins, the rest fall
    /// through to `self`.
    pub fn overlay(self, top: ExperimentConfig) -> ExperimentConfig {
        ExperimentConfig {
            subcommand: top.subcommand.or(self.subcommand),
            grid: top.grid.or(self.grid),
            operator: top.operator.or(self.operator),
            eps: top.eps.or(self.eps),
            bins: top.bins.or(self.bins),
            reps: top.reps.or(self.reps),
            a: top.a.or(self.a),
            alpha: top.alpha.or(self.alpha),
            p: top.p.or(self.p),
            ns: top.ns.or(self.ns),
            kscale: top.kscale.or(self.kscale),
            mc: top.mc.or(self.mc),
            seed: top.seed.or(self.seed),
            refinement: top.refinement.or(self.refinement),
        }
    }

    /// Canonical TOML: fixed key order (struct order), unset knobs
    /// omitted. Two runs with the same physics produce byte-identical
    /// canonical text, which is what gets hashed.
    pub fn canonical_toml(&self) -> Result<String> {
        toml::to_string(self).context("serializing canonical config")
    }

    pub fn sha256_hex(&self) -> Result<String> {
        let text = self.canonical_toml()?;
        let digest = Sha256::digest(text.as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            use std::fmt::Write;
            write!(hex, "{byte:02x}").expect("writing to a String cannot fail");
        }
        Ok(hex)
    }
}

/// Named bundles of defaults. `desk` is sized for an interactive check on
/// one core: a fine grid but modest replication.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    match name {
        "desk" => Ok(ExperimentConfig {
            grid: Some(4096),
            reps: Some(2000),
            eps: Some(1e-3),
            ..ExperimentConfig::default()
        }),
        other => bail!("unknown preset {other:?} (available: desk)"),
    }
}

/// Strict parse of a config file: unknown keys are rejected.
pub fn load_file(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let cfg: ExperimentConfig = toml::from_str(&text)
        .with_context(|| format!("parsing config file {}", path.display()))?;
    Ok(cfg)
}

/// Merge preset, file, and flag layers (later wins) and pin the
/// subcommand. A file written for one experiment refuses to drive
/// another.
pub fn resolve(
    subcommand: &str,
    preset_name: Option<&str>,
    config_path: Option<&Path>,
    flags: ExperimentConfig,
) -> Result<ExperimentConfig> {
    let mut merged = ExperimentConfig::default();
    if let Some(name) = preset_name {
        merged = merged.overlay(preset(name)?);
    }
    if let Some(path) = config_path {
        let file = load_file(path)?;
        if let Some(ref sub) = file.subcommand {
            if sub != subcommand {
                bail!(
                    "config file {} is for subcommand {sub:?}, but {subcommand:?} was invoked",
                    path.display()
                );
            }
        }
        merged = merged.overlay(file);
    }
    merged = merged.overlay(flags);
    merged.subcommand = Some(subcommand.to_string());
    Ok(merged)
}

/// Unwrap a required knob with a uniform error message. Physics is never
/// silently defaulted; a missing knob names itself and the ways to set it.
pub fn need<T: Copy>(value: Option<T>, name: &str) -> Result<T> {
    value.ok_or_else(|| {
        anyhow::anyhow!("missing required setting {name:?} (set it via --{name}, a config file, or a preset)")
    })
}

/// Same as [`need`] for non-Copy values.
pub fn need_ref<'a, T>(value: &'a Option<T>, name: &str) -> Result<&'a T> {
    value.as_ref().ok_or_else(|| {
        anyhow::anyhow!("missing required setting {name:?} (set it via --{name}, a config file, or a preset)")
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlay_prefers_the_top_layer_per_field() {
        let base = ExperimentConfig {
            grid: Some(64),
            eps: Some(1e-3),
            ..ExperimentConfig::default()
        };
        let top = ExperimentConfig {
            grid: Some(128),
            seed: Some(7),
            ..ExperimentConfig::default()
        };
        let merged = base.overlay(top);
        assert_eq!(merged.grid, Some(128));
        assert_eq!(merged.eps, Some(1e-3));
        assert_eq!(merged.seed, Some(7));
    }

    #[test]
    fn canonical_form_is_stable_and_omits_unset_knobs() {
        let cfg = ExperimentConfig {
            subcommand: Some("lt-moments".into()),
            grid: Some(4096),
            eps: Some(1e-3),
            seed: Some(42),
            ..ExperimentConfig::default()
        };
        let text = cfg.canonical_toml().unwrap();
        assert!(text.contains("subcommand = \"lt-moments\""));
        assert!(text.contains("grid = 4096"));
        assert!(!text.contains("alpha"));
        assert_eq!(text, cfg.clone().canonical_toml().unwrap());
        assert_eq!(cfg.sha256_hex().unwrap().len(), 64);
    }

    #[test]
    fn hash_tracks_physics_only() {
        let mut a = ExperimentConfig {
            grid: Some(256),
            ..ExperimentConfig::default()
        };
        let h1 = a.sha256_hex().unwrap();
        a.seed = Some(3);
        let h2 = a.sha256_hex().unwrap();
        assert_ne!(h1, h2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<ExperimentConfig>("grdi = 64\n").unwrap_err();
        assert!(err.to_string().contains("grdi"));
    }

    #[test]
    fn resolve_rejects_a_file_for_another_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        std::fs::write(&path, "subcommand = \"verify\"\nseed = 1\n").unwrap();
        let err = resolve("simulate", None, Some(&path), ExperimentConfig::default()).unwrap_err();
        assert!(err.to_string().contains("verify"));
    }

    #[test]
    fn resolve_layers_preset_file_flags_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        std::fs::write(&path, "reps = 10\nseed = 5\n").unwrap();
        let flags = ExperimentConfig {
            seed: Some(9),
            ..ExperimentConfig::default()
        };
        let cfg = resolve("lt-moments", Some("desk"), Some(&path), flags).unwrap();
        assert_eq!(cfg.grid, Some(4096)); // from the preset
        assert_eq!(cfg.reps, Some(10)); // file overrides preset
        assert_eq!(cfg.seed, Some(9)); // flag overrides file
        assert_eq!(cfg.subcommand.as_deref(), Some("lt-moments"));
    }
}
