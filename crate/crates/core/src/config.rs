//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are an error so
//! that a typo cannot silently fall back to a default.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaze::{GazeGeometry, ReadingDirection};
use crate::segmentation::SegmentOptions;
use crate::states::HofRules;
use crate::styles::KMeansOptions;
use crate::thresholds::{FilterRule, IkiOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub segment: SegmentOptions,
    pub geometry: GazeGeometry,
    pub rules: HofRules,
    pub filter: FilterRule,
    pub apply_filter: bool,
    pub kmeans: KMeansOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            segment: SegmentOptions::default(),
            geometry: GazeGeometry::default(),
            rules: HofRules::default(),
            filter: FilterRule::default(),
            apply_filter: true,
            kmeans: KMeansOptions::default(),
        }
    }
}

pub const KEYS: &[&str] = &[
    "gaze_gap_ms",
    "include_deletions",
    "line_tol",
    "same_pos_radius",
    "min_advance",
    "regress_limit",
    "max_saccade",
    "scatter_dy",
    "direction",
    "theta_o",
    "theta_h",
    "theta_p",
    "max_kbi_ms",
    "max_pub_ms",
    "apply_filter",
    "k",
    "seed",
    "n_init",
    "max_iter",
];

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse { line, message: format!("{key}: cannot parse {v:?}") })
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        Self::parse_with_keys(text).map(|(c, _)| c)
    }

    /// Parses and also reports which keys the text set explicitly.
    pub fn parse_with_keys(text: &str) -> Result<(RunConfig, Vec<String>)> {
        let mut c = RunConfig::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| Error::Parse { line, message: format!("expected key = value, got {body:?}") })?;
            let (key, v) = (key.trim(), value.trim());
            seen.push(key.to_string());
            match key {
                "gaze_gap_ms" => c.segment.gaze_gap_ms = num(line, key, v)?,
                "include_deletions" => c.segment.iki = IkiOptions { include_deletions: num(line, key, v)? },
                "line_tol" => c.geometry.line_tol = num(line, key, v)?,
                "same_pos_radius" => c.geometry.same_pos_radius = num(line, key, v)?,
                "min_advance" => c.geometry.min_advance = num(line, key, v)?,
                "regress_limit" => c.geometry.regress_limit = num(line, key, v)?,
                "max_saccade" => c.geometry.max_saccade = num(line, key, v)?,
                "scatter_dy" => c.geometry.scatter_dy = num(line, key, v)?,
                "direction" => {
                    c.geometry.direction = match v {
                        "ltr" => ReadingDirection::LeftToRight,
                        "rtl" => ReadingDirection::RightToLeft,
                        _ => return Err(Error::Parse { line, message: format!("direction must be ltr or rtl, got {v:?}") }),
                    }
                }
                "theta_o" => c.rules.theta_o = num(line, key, v)?,
                "theta_h" => c.rules.theta_h = num(line, key, v)?,
                "theta_p" => c.rules.theta_p = num(line, key, v)?,
                "max_kbi_ms" => c.filter.max_kbi_ms = num(line, key, v)?,
                "max_pub_ms" => c.filter.max_pub_ms = num(line, key, v)?,
                "apply_filter" => c.apply_filter = num(line, key, v)?,
                "k" => c.kmeans.k = num(line, key, v)?,
                "seed" => c.kmeans.seed = num(line, key, v)?,
                "n_init" => c.kmeans.n_init = num(line, key, v)?,
                "max_iter" => c.kmeans.max_iter = num(line, key, v)?,
                _ => return Err(Error::Parse { line, message: format!("unknown key {key:?}") }),
            }
        }
        c.validate()?;
        Ok((c, seen))
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        let positive = [
            ("line_tol", g.line_tol),
            ("same_pos_radius", g.same_pos_radius),
            ("max_saccade", g.max_saccade),
            ("scatter_dy", g.scatter_dy),
            ("max_kbi_ms", self.filter.max_kbi_ms),
            ("max_pub_ms", self.filter.max_pub_ms),
            ("theta_p", self.rules.theta_p),
        ];
        for (k, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{k} must be positive, got {v}")));
            }
        }
        for (k, v) in [("theta_o", self.rules.theta_o), ("theta_h", self.rules.theta_h)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParams(format!("{k} must lie in [0, 1], got {v}")));
            }
        }
        if self.segment.gaze_gap_ms < 0 {
            return Err(Error::InvalidParams("gaze_gap_ms must not be negative".to_string()));
        }
        if self.kmeans.k == 0 || self.kmeans.n_init == 0 || self.kmeans.max_iter == 0 {
            return Err(Error::InvalidParams("k, n_init and max_iter must be at least 1".to_string()));
        }
        Ok(())
    }

    /// Canonical text form; parsing it gives back the same configuration.
    pub fn to_text(&self) -> String {
        let g = &self.geometry;
        let dir = match g.direction {
            ReadingDirection::LeftToRight => "ltr",
            ReadingDirection::RightToLeft => "rtl",
        };
        let pairs: [(&str, String); 19] = [
            ("gaze_gap_ms", self.segment.gaze_gap_ms.to_string()),
            ("include_deletions", self.segment.iki.include_deletions.to_string()),
            ("line_tol", g.line_tol.to_string()),
            ("same_pos_radius", g.same_pos_radius.to_string()),
            ("min_advance", g.min_advance.to_string()),
            ("regress_limit", g.regress_limit.to_string()),
            ("max_saccade", g.max_saccade.to_string()),
            ("scatter_dy", g.scatter_dy.to_string()),
            ("direction", dir.to_string()),
            ("theta_o", self.rules.theta_o.to_string()),
            ("theta_h", self.rules.theta_h.to_string()),
            ("theta_p", self.rules.theta_p.to_string()),
            ("max_kbi_ms", self.filter.max_kbi_ms.to_string()),
            ("max_pub_ms", self.filter.max_pub_ms.to_string()),
            ("apply_filter", self.apply_filter.to_string()),
            ("k", self.kmeans.k.to_string()),
            ("seed", self.kmeans.seed.to_string()),
            ("n_init", self.kmeans.n_init.to_string()),
            ("max_iter", self.kmeans.max_iter.to_string()),
        ];
        pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_form_round_trips() {
        let mut c = RunConfig::default();
        c.rules.theta_o = 0.55;
        c.kmeans.seed = 17;
        c.geometry.direction = ReadingDirection::RightToLeft;
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
        assert_eq!(c.to_text().lines().count(), KEYS.len());
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(matches!(RunConfig::parse("thet_o = 0.6"), Err(Error::Parse { line: 1, .. })));
        assert!(RunConfig::parse("# comment\n\ntheta_o = lots").is_err());
        assert!(RunConfig::parse("theta_h = 1.5").is_err());
        assert_eq!(RunConfig::parse("  # only a comment\n").unwrap(), RunConfig::default());
    }
}
