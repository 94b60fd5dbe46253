//! Run configuration: defaults, then the config file, then `PRIVINFER_GRID_N`, then flags.

use std::path::Path;

use privinfer::dpverify::VerifyOptions;
use privinfer::eval::EvalConfig;
use serde::Deserialize;

pub const GRID_ENV: &str = "PRIVINFER_GRID_N";

/// Keys accepted in a config file, one `key = value` per line.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub grid_n: Option<usize>,
    pub simplex_n: Option<usize>,
    pub normal_n: Option<usize>,
    pub mech_cells_per_unit: Option<u32>,
    pub fuel: Option<u64>,
    pub max_depth: Option<usize>,
    pub conjugate: Option<bool>,
    pub max_inputs: Option<usize>,
    pub allow_large: Option<bool>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub eval: EvalConfig,
    pub max_inputs: usize,
    pub allow_large: bool,
    pub seed: u64,
}

impl Default for Settings {
    fn default() -> Self {
        let v = VerifyOptions::default();
        Settings { eval: v.eval, max_inputs: v.max_inputs, allow_large: v.allow_large, seed: 0x5eed }
    }
}

impl Settings {
    pub fn apply(&mut self, c: &ConfigFile) {
        let e = &mut self.eval;
        set(&mut e.grid_n, c.grid_n);
        set(&mut e.simplex_n, c.simplex_n);
        set(&mut e.normal_n, c.normal_n);
        set(&mut e.mech_cells_per_unit, c.mech_cells_per_unit);
        set(&mut e.fuel, c.fuel);
        set(&mut e.max_depth, c.max_depth);
        set(&mut e.conjugate, c.conjugate);
        set(&mut self.max_inputs, c.max_inputs);
        set(&mut self.allow_large, c.allow_large);
        set(&mut self.seed, c.seed);
    }

    pub fn verify_options(&self, slack: f64) -> VerifyOptions {
        VerifyOptions { eval: self.eval.clone(), max_inputs: self.max_inputs, allow_large: self.allow_large, slack }
    }
}

fn set<T: Copy>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

pub fn parse_config(text: &str) -> Result<ConfigFile, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

pub fn read_config(path: &Path) -> Result<ConfigFile, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {}", path.display(), e))?;
    parse_config(&text).map_err(|e| format!("{}: {}", path.display(), e))
}

/// Layers the file (if any) and the environment over the defaults.
pub fn load(path: Option<&Path>, env_grid: Option<String>) -> Result<Settings, String> {
    let mut s = Settings::default();
    if let Some(p) = path {
        s.apply(&read_config(p)?);
    }
    if let Some(g) = env_grid {
        let n: usize = g.trim().parse().map_err(|_| format!("{} must be a positive integer, got `{}`", GRID_ENV, g))?;
        if n == 0 {
            return Err(format!("{} must be positive", GRID_ENV));
        }
        s.eval.grid_n = n;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_and_comments() {
        let c = parse_config("# acceptance settings\ngrid_n = 10000\nfuel = 500\nconjugate = false\n").unwrap();
        let mut s = Settings::default();
        s.apply(&c);
        assert_eq!(s.eval.grid_n, 10_000);
        assert_eq!(s.eval.fuel, 500);
        assert!(!s.eval.conjugate);
        assert_eq!(s.eval.simplex_n, Settings::default().eval.simplex_n);
    }

    #[test]
    fn unknown_key_is_an_error() {
        assert!(parse_config("grid = 3\n").is_err());
    }

    #[test]
    fn environment_beats_file() {
        let dir = std::env::temp_dir().join(format!("privinfer-config-{}", std::process::id()));
        std::fs::write(&dir, "grid_n = 50\n").unwrap();
        let s = load(Some(&dir), Some("70".into())).unwrap();
        std::fs::remove_file(&dir).ok();
        assert_eq!(s.eval.grid_n, 70);
        assert!(load(None, Some("zero".into())).is_err());
    }
}
