//! Pipeline hyperparameters and their `key=value` file form.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::Connectivity;

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    /// Flow-magnitude detection threshold, pixels/frame at flow resolution.
    pub gamma_o: f64,
    /// Minimum region size in pixels (strictly exceeded to pass).
    pub gamma_b: usize,
    /// Maximum number of clearance erosions.
    pub gamma_r: usize,
    /// Minimum trajectory length in waypoints (strictly exceeded to pass).
    pub gamma_t: usize,
    /// Clearance reward per surviving erosion.
    pub r: f64,
    pub p_det_tp: f64,
    pub p_det_fp: f64,
    pub p_prior: f64,
    pub p_bb: f64,
    pub p_nb_k: f64,
    pub p_nb_nk: f64,
    pub connectivity: Connectivity,
    pub flow_downscale: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            gamma_o: 0.45,
            gamma_b: 20,
            gamma_r: 4,
            gamma_t: 30,
            r: 0.2,
            p_det_tp: 0.95,
            p_det_fp: 0.2,
            p_prior: 0.1,
            p_bb: 0.98,
            p_nb_k: 0.85,
            p_nb_nk: 0.01,
            connectivity: Connectivity::Four,
            flow_downscale: 4,
        }
    }
}

/// The published operating point.
pub fn default_config() -> PipelineConfig {
    PipelineConfig::default()
}

const KEYS: [&str; 13] = [
    "gamma_o",
    "gamma_B",
    "gamma_r",
    "gamma_T",
    "r",
    "p_det_tp",
    "p_det_fp",
    "p_prior",
    "p_bb",
    "p_nb_k",
    "p_nb_nk",
    "connectivity",
    "flow_downscale",
];

impl PipelineConfig {
    /// Checks every invariant, reporting the first one that fails.
    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("p_det_tp", self.p_det_tp),
            ("p_det_fp", self.p_det_fp),
            ("p_prior", self.p_prior),
            ("p_bb", self.p_bb),
            ("p_nb_k", self.p_nb_k),
            ("p_nb_nk", self.p_nb_nk),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("probability {name}={p} outside [0,1]")));
            }
        }
        if self.p_det_tp <= self.p_det_fp {
            return Err(Error::Config(format!(
                "detector not informative: p_det_tp={} must exceed p_det_fp={}",
                self.p_det_tp, self.p_det_fp
            )));
        }
        if !(self.p_bb >= self.p_nb_k && self.p_nb_k >= self.p_nb_nk) {
            return Err(Error::Config(format!(
                "transition ordering violated: need p_bb >= p_nb_k >= p_nb_nk, got {} / {} / {}",
                self.p_bb, self.p_nb_k, self.p_nb_nk
            )));
        }
        if !(self.gamma_o.is_finite() && self.gamma_o >= 0.0) {
            return Err(Error::Config(format!("gamma_o={} must be >= 0", self.gamma_o)));
        }
        if !(self.r.is_finite() && self.r >= 0.0) {
            return Err(Error::Config(format!("r={} must be >= 0", self.r)));
        }
        if self.r * self.gamma_r as f64 >= 1.0 {
            return Err(Error::Config(format!(
                "reward exceeds unit edge cost: r*gamma_r = {} >= 1",
                self.r * self.gamma_r as f64
            )));
        }
        if self.flow_downscale == 0 {
            return Err(Error::Config("flow_downscale must be positive".into()));
        }
        Ok(())
    }

    /// Serialises to `key=value` lines using the canonical key names.
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        for key in KEYS {
            let _ = writeln!(s, "{key}={}", self.value_of(key));
        }
        s
    }

    fn value_of(&self, key: &str) -> String {
        match key {
            "gamma_o" => self.gamma_o.to_string(),
            "gamma_B" => self.gamma_b.to_string(),
            "gamma_r" => self.gamma_r.to_string(),
            "gamma_T" => self.gamma_t.to_string(),
            "r" => self.r.to_string(),
            "p_det_tp" => self.p_det_tp.to_string(),
            "p_det_fp" => self.p_det_fp.to_string(),
            "p_prior" => self.p_prior.to_string(),
            "p_bb" => self.p_bb.to_string(),
            "p_nb_k" => self.p_nb_k.to_string(),
            "p_nb_nk" => self.p_nb_nk.to_string(),
            "connectivity" => self.connectivity.count().to_string(),
            "flow_downscale" => self.flow_downscale.to_string(),
            _ => unreachable!("unknown key {key}"),
        }
    }

    /// Parses `key=value` lines. Blank lines and `#` comments are skipped;
    /// missing keys keep their defaults and unknown keys are an error. The
    /// result is not validated.
    pub fn parse_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Format(format!("line {}: expected key=value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |_| Error::Format(format!("line {}: bad value for {key}: {value:?}", lineno + 1));
            match key {
                "gamma_o" => cfg.gamma_o = value.parse().map_err(bad)?,
                "r" => cfg.r = value.parse().map_err(bad)?,
                "p_det_tp" => cfg.p_det_tp = value.parse().map_err(bad)?,
                "p_det_fp" => cfg.p_det_fp = value.parse().map_err(bad)?,
                "p_prior" => cfg.p_prior = value.parse().map_err(bad)?,
                "p_bb" => cfg.p_bb = value.parse().map_err(bad)?,
                "p_nb_k" => cfg.p_nb_k = value.parse().map_err(bad)?,
                "p_nb_nk" => cfg.p_nb_nk = value.parse().map_err(bad)?,
                "gamma_B" => cfg.gamma_b = parse_count(value, key, lineno)?,
                "gamma_r" => cfg.gamma_r = parse_count(value, key, lineno)?,
                "gamma_T" => cfg.gamma_t = parse_count(value, key, lineno)?,
                "flow_downscale" => cfg.flow_downscale = parse_count(value, key, lineno)?,
                "connectivity" => {
                    cfg.connectivity = Connectivity::from_count(parse_count(value, key, lineno)? as u32)
                        .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?
                }
                other => {
                    return Err(Error::Format(format!("line {}: unknown key {other:?}", lineno + 1)))
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_kv(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_kv_string())?;
        Ok(())
    }
}

fn parse_count(value: &str, key: &str, lineno: usize) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::Format(format!("line {}: bad value for {key}: {value:?}", lineno + 1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_values() {
        let c = default_config();
        assert_eq!(c.gamma_o, 0.45);
        assert_eq!(c.gamma_b, 20);
        assert_eq!(c.gamma_r, 4);
        assert_eq!(c.gamma_t, 30);
        assert_eq!(c.r, 0.2);
        assert_eq!(c.p_det_tp, 0.95);
        assert_eq!(c.p_det_fp, 0.2);
        assert_eq!(c.p_prior, 0.1);
        assert_eq!(c.p_bb, 0.98);
        assert_eq!(c.p_nb_k, 0.85);
        assert_eq!(c.p_nb_nk, 0.01);
        assert_eq!(c.connectivity, Connectivity::Four);
        assert_eq!(c.flow_downscale, 4);
        c.validate().unwrap();
    }

    #[test]
    fn reward_budget_violation() {
        let c = PipelineConfig {
            r: 0.3,
            ..default_config()
        };
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("reward exceeds unit edge cost"), "{err}");
        // 0.25 * 4 == 1 is also rejected: edge costs must stay strictly positive.
        let c = PipelineConfig {
            r: 0.25,
            ..default_config()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn uninformative_detector() {
        let c = PipelineConfig {
            p_det_tp: 0.1,
            p_det_fp: 0.2,
            ..default_config()
        };
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("detector not informative"), "{err}");
    }

    #[test]
    fn transition_ordering_and_range() {
        let c = PipelineConfig {
            p_nb_k: 0.99,
            ..default_config()
        };
        assert!(c.validate().unwrap_err().to_string().contains("transition ordering"));
        let c = PipelineConfig {
            p_prior: 1.5,
            ..default_config()
        };
        assert!(c.validate().unwrap_err().to_string().contains("p_prior"));
    }

    #[test]
    fn kv_parsing() {
        let text = "# tuned\ngamma_o = 0.6\n\ngamma_B=12\nconnectivity=8\n";
        let c = PipelineConfig::parse_kv(text).unwrap();
        assert_eq!(c.gamma_o, 0.6);
        assert_eq!(c.gamma_b, 12);
        assert_eq!(c.connectivity, Connectivity::Eight);
        assert_eq!(c.p_bb, 0.98);
        assert!(PipelineConfig::parse_kv("gamma_b=3").is_err());
        assert!(PipelineConfig::parse_kv("gamma_o").is_err());
        assert!(PipelineConfig::parse_kv("connectivity=6").is_err());
        assert!(PipelineConfig::parse_kv("gamma_T=-1").is_err());
    }

    #[test]
    fn kv_round_trip() {
        let c = PipelineConfig {
            gamma_o: 0.1 + 0.2,
            r: 1.0 / 7.0,
            connectivity: Connectivity::Eight,
            ..default_config()
        };
        assert_eq!(PipelineConfig::parse_kv(&c.to_kv_string()).unwrap(), c);
    }
}
