//! Training configuration and its `key = value` text form.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! Keys are exactly the field names below; unknown or repeated keys are
//! errors. Missing keys keep their defaults.
//!
//! ```text
//! n-inputs = 16
//! omega-max = 15
//! grid-n = 256
//! layer-sizes = 18,128,128,1
//! learning-rate = 0.001
//! adam-beta1 = 0.9
//! adam-beta2 = 0.999
//! adam-epsilon = 1e-8
//! steps = 5000
//! seed = 42
//! grid-convention = open
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::TIME_FEATURES;
use crate::sampler::GridConvention;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub n_inputs: usize,
    pub omega_max: usize,
    pub grid_n: usize,
    pub layer_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub steps: usize,
    pub seed: u64,
    pub grid_convention: GridConvention,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_inputs: 16,
            omega_max: 15,
            grid_n: 256,
            layer_sizes: vec![18, 128, 128, 1],
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            steps: 5000,
            seed: 42,
            grid_convention: GridConvention::Open,
        }
    }
}

pub const KEYS: [&str; 11] = [
    "n-inputs",
    "omega-max",
    "grid-n",
    "layer-sizes",
    "learning-rate",
    "adam-beta1",
    "adam-beta2",
    "adam-epsilon",
    "steps",
    "seed",
    "grid-convention",
];

impl TrainConfig {
    /// Checks every cross-field constraint, naming the first one violated.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_inputs == 0 {
            return fail("n-inputs must be at least 1".into());
        }
        if self.grid_n < 2 {
            return fail(format!("grid-n must be at least 2, got {}", self.grid_n));
        }
        if 2 * self.omega_max >= self.grid_n {
            return fail(format!(
                "omega-max must be < grid-n / 2 (omega-max = {}, grid-n = {})",
                self.omega_max, self.grid_n
            ));
        }
        if self.steps == 0 {
            return fail("steps must be at least 1".into());
        }
        if !(self.adam_beta1 > 0.0 && self.adam_beta1 < 1.0) {
            return fail(format!("adam-beta1 must lie in (0, 1), got {}", self.adam_beta1));
        }
        if !(self.adam_beta2 > 0.0 && self.adam_beta2 < 1.0) {
            return fail(format!("adam-beta2 must lie in (0, 1), got {}", self.adam_beta2));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning-rate must be positive, got {}", self.learning_rate));
        }
        if !(self.adam_epsilon > 0.0 && self.adam_epsilon.is_finite()) {
            return fail(format!("adam-epsilon must be positive, got {}", self.adam_epsilon));
        }
        let sizes = &self.layer_sizes;
        if sizes.len() < 2 || sizes.contains(&0) {
            return fail(format!(
                "layer-sizes must list at least 2 positive sizes, got {sizes:?}"
            ));
        }
        if sizes[0] != self.n_inputs + TIME_FEATURES {
            return fail(format!(
                "layer-sizes must start with n-inputs + 2 = {}, got {}",
                self.n_inputs + TIME_FEATURES,
                sizes[0]
            ));
        }
        if sizes[sizes.len() - 1] != 1 {
            return fail(format!("layer-sizes must end with 1, got {sizes:?}"));
        }
        Ok(())
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("cannot parse `{value}` for {key}")))
        }
        match key {
            "n-inputs" => self.n_inputs = parse(key, value)?,
            "omega-max" => self.omega_max = parse(key, value)?,
            "grid-n" => self.grid_n = parse(key, value)?,
            "layer-sizes" => {
                self.layer_sizes = value.split(',').map(|s| parse(key, s.trim())).collect::<Result<_>>()?
            }
            "learning-rate" => self.learning_rate = parse(key, value)?,
            "adam-beta1" => self.adam_beta1 = parse(key, value)?,
            "adam-beta2" => self.adam_beta2 = parse(key, value)?,
            "adam-epsilon" => self.adam_epsilon = parse(key, value)?,
            "steps" => self.steps = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "grid-convention" => self.grid_convention = value.parse()?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parses the text form on top of the defaults. Does not validate.
    pub fn parse_overrides(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            cfg.set(key, value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", lineno + 1, strip_prefix(e))))?;
        }
        Ok(cfg)
    }

    /// Serializes every field; `parse_overrides` reads it back exactly.
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let sizes: Vec<String> = self.layer_sizes.iter().map(usize::to_string).collect();
        let _ = writeln!(s, "n-inputs = {}", self.n_inputs);
        let _ = writeln!(s, "omega-max = {}", self.omega_max);
        let _ = writeln!(s, "grid-n = {}", self.grid_n);
        let _ = writeln!(s, "layer-sizes = {}", sizes.join(","));
        let _ = writeln!(s, "learning-rate = {:?}", self.learning_rate);
        let _ = writeln!(s, "adam-beta1 = {:?}", self.adam_beta1);
        let _ = writeln!(s, "adam-beta2 = {:?}", self.adam_beta2);
        let _ = writeln!(s, "adam-epsilon = {:?}", self.adam_epsilon);
        let _ = writeln!(s, "steps = {}", self.steps);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "grid-convention = {}", self.grid_convention);
        s
    }
}

fn strip_prefix(e: Error) -> String {
    match e {
        Error::Config(msg) => msg,
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn text_round_trip() {
        let cfg = TrainConfig {
            learning_rate: 3.3e-4,
            grid_convention: GridConvention::Paper,
            seed: u64::MAX,
            ..TrainConfig::default()
        };
        let text = cfg.to_kv_string();
        assert_eq!(TrainConfig::parse_overrides(&text).unwrap(), cfg);
        for key in KEYS {
            assert!(text.contains(&format!("{key} = ")), "{key}");
        }
    }

    #[test]
    fn comments_and_partial_files() {
        let cfg = TrainConfig::parse_overrides("# tiny run\nsteps = 10 # short\n\n  seed=7\n").unwrap();
        assert_eq!(cfg.steps, 10);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.grid_n, 256);
    }

    #[test]
    fn parse_errors() {
        for bad in [
            "steps 10",
            "stepz = 3",
            "steps = -1",
            "steps = 1\nsteps = 2",
            "grid-convention = closed",
        ] {
            assert!(TrainConfig::parse_overrides(bad).is_err(), "{bad}");
        }
        let err = TrainConfig::parse_overrides("\nseed = x").unwrap_err();
        assert_eq!(err.to_string(), "invalid config: line 2: cannot parse `x` for seed");
    }

    #[test]
    fn validation_names_the_constraint() {
        let cfg = TrainConfig {
            grid_n: 30,
            ..TrainConfig::default()
        };
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("omega-max must be < grid-n / 2"), "{msg}");

        let cfg = TrainConfig {
            steps: 0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("steps"));

        let cfg = TrainConfig {
            adam_beta2: 1.0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("adam-beta2"));

        let cfg = TrainConfig {
            n_inputs: 4,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("n-inputs + 2"));
    }
}
