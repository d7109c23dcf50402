//! Browser bindings: each export takes the text of a run configuration and
//! returns the same CSV or key/value text the command-line tool prints.

use std::path::Path;

use iwkb::commands::{self, OutputFormat};
use iwkb::config::RunConfig;
use wasm_bindgen::prelude::*;

/// Configuration of the five-segment reference profile.
pub const TABLE_CONFIG: &str = include_str!("../../core/fixtures/paper.cfg");

/// A smooth ramp where the method is valid everywhere.
pub const RAMP_CONFIG: &str = include_str!("../../core/fixtures/ramp.cfg");

fn config(text: &str) -> Result<RunConfig, String> {
    // files referenced by the config cannot be read from the page
    let cfg = RunConfig::parse(text, Path::new(".")).map_err(|e| e.to_string())?;
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

pub fn potential_text(config_text: &str) -> Result<String, String> {
    commands::cmd_potential(&config(config_text)?, Some(OutputFormat::Csv)).map_err(|e| e.to_string())
}

pub fn profile_text(config_text: &str) -> Result<String, String> {
    commands::cmd_profile(&config(config_text)?, Some(OutputFormat::Csv)).map_err(|e| e.to_string())
}

pub fn constants_text(config_text: &str) -> Result<String, String> {
    commands::cmd_constants(&config(config_text)?, Some(OutputFormat::Kv)).map_err(|e| e.to_string())
}

pub fn compare_text(config_text: &str) -> Result<String, String> {
    commands::cmd_compare(&config(config_text)?, Some(OutputFormat::Kv)).map_err(|e| e.to_string())
}

/// `x,V,E` samples of the configured potential.
#[wasm_bindgen]
pub fn potential(config_text: &str) -> Result<String, JsError> {
    potential_text(config_text).map_err(|e| JsError::new(&e))
}

/// `x,V,k,u,A,B,a,b,T,R,validity,evanescent` profile.
#[wasm_bindgen]
pub fn profile(config_text: &str) -> Result<String, JsError> {
    profile_text(config_text).map_err(|e| JsError::new(&e))
}

/// Boundary constants as `key=value` lines.
#[wasm_bindgen]
pub fn constants(config_text: &str) -> Result<String, JsError> {
    constants_text(config_text).map_err(|e| JsError::new(&e))
}

/// Far-field T from the method against the converged step oracle.
#[wasm_bindgen]
pub fn compare(config_text: &str) -> Result<String, JsError> {
    compare_text(config_text).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn table_config() -> String {
    TABLE_CONFIG.to_string()
}

#[wasm_bindgen]
pub fn ramp_config() -> String {
    RAMP_CONFIG.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_run_through_every_export() {
        for cfg in [TABLE_CONFIG, RAMP_CONFIG] {
            assert!(potential_text(cfg).unwrap().starts_with("x,V,E\n"));
            assert!(profile_text(cfg).unwrap().starts_with("x,V,k,u,"));
            assert!(constants_text(cfg).unwrap().starts_with("format=1\n"));
        }
        let cmp = compare_text(RAMP_CONFIG).unwrap();
        assert!(cmp.contains("T_oracle="), "{cmp}");
    }

    #[test]
    fn errors_come_back_as_messages() {
        let err = profile_text("potential = constant\n").unwrap_err();
        assert!(err.contains("v0"), "{err}");
        assert!(potential_text(&TABLE_CONFIG.replace("grid = 721", "grid = 1")).is_err());
    }
}
