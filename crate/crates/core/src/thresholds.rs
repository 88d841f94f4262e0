//! Session-specific pause thresholds derived from inter-keystroke intervals.
//!
//! KBI = 2 x median within-word IKI, PUB = 3 x median between-word IKI.
//! A within-word IKI joins two alphanumeric keystrokes; a between-word IKI
//! joins a non-alphanumeric keystroke to a following alphanumeric one.
//! Intervals ending on a non-alphanumeric keystroke are discarded.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::session::{KeyAction, KeyEvent, Ms, Session};
use crate::stats::median;

pub const KBI_FACTOR: f64 = 2.0;
pub const PUB_FACTOR: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet {
    pub kbi_ms: f64,
    pub pub_ms: f64,
    pub median_within_iki: f64,
    pub median_between_iki: f64,
    pub n_within: usize,
    pub n_between: usize,
}

impl ThresholdSet {
    pub fn from_medians(median_within: f64, median_between: f64, n_within: usize, n_between: usize) -> Self {
        ThresholdSet {
            kbi_ms: KBI_FACTOR * median_within,
            pub_ms: PUB_FACTOR * median_between,
            median_within_iki: median_within,
            median_between_iki: median_between,
            n_within,
            n_between,
        }
    }

    /// Thresholds given directly, e.g. from a configuration or a published example.
    pub fn fixed(kbi_ms: f64, pub_ms: f64) -> Self {
        ThresholdSet::from_medians(kbi_ms / KBI_FACTOR, pub_ms / PUB_FACTOR, 0, 0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IkiOptions {
    /// Whether deletion keystrokes take part in the interval streams.
    pub include_deletions: bool,
}

impl Default for IkiOptions {
    fn default() -> Self {
        IkiOptions { include_deletions: true }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IkiClasses {
    pub within: Vec<Ms>,
    pub between: Vec<Ms>,
}

pub fn classify_ikis(keys: &[KeyEvent], opts: IkiOptions) -> Result<IkiClasses> {
    let stream: Vec<&KeyEvent> = keys
        .iter()
        .filter(|k| opts.include_deletions || k.action == KeyAction::Insert)
        .collect();
    if stream.len() < 2 {
        return Err(Error::TooFewValues { needed: 2, got: stream.len() });
    }
    let mut out = IkiClasses::default();
    for pair in stream.windows(2) {
        let (prev, next) = (pair[0], pair[1]);
        if !next.is_alnum {
            continue;
        }
        let gap = next.time - prev.time;
        if prev.is_alnum {
            out.within.push(gap);
        } else {
            out.between.push(gap);
        }
    }
    Ok(out)
}

pub fn derive_thresholds(s: &Session, opts: IkiOptions) -> Result<ThresholdSet> {
    let classes = classify_ikis(&s.keys, opts).map_err(|_| Error::UnderivableThresholds { within: 0, between: 0 })?;
    thresholds_from_ikis(&classes)
}

pub fn thresholds_from_ikis(classes: &IkiClasses) -> Result<ThresholdSet> {
    let as_f64 = |v: &[Ms]| v.iter().map(|&x| x as f64).collect::<Vec<_>>();
    match (median(&as_f64(&classes.within)), median(&as_f64(&classes.between))) {
        (Some(w), Some(b)) if w > 0.0 && b > 0.0 => {
            Ok(ThresholdSet::from_medians(w, b, classes.within.len(), classes.between.len()))
        }
        _ => Err(Error::UnderivableThresholds { within: classes.within.len(), between: classes.between.len() }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterRule {
    pub max_kbi_ms: f64,
    pub max_pub_ms: f64,
}

impl Default for FilterRule {
    fn default() -> Self {
        FilterRule { max_kbi_ms: 2000.0, max_pub_ms: 6000.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    KbiTooLong,
    PubTooLong,
    KbiAndPubTooLong,
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExclusionReason::KbiTooLong => "kbi_too_long",
            ExclusionReason::PubTooLong => "pub_too_long",
            ExclusionReason::KbiAndPubTooLong => "kbi_and_pub_too_long",
        })
    }
}

impl FilterRule {
    pub fn check(&self, t: &ThresholdSet) -> Option<ExclusionReason> {
        match (t.kbi_ms > self.max_kbi_ms, t.pub_ms > self.max_pub_ms) {
            (false, false) => None,
            (true, false) => Some(ExclusionReason::KbiTooLong),
            (false, true) => Some(ExclusionReason::PubTooLong),
            (true, true) => Some(ExclusionReason::KbiAndPubTooLong),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<usize>,
    pub excluded: Vec<(usize, ExclusionReason)>,
}

/// Partitions sessions (by index) into kept and excluded.
pub fn filter_sessions(sets: &[ThresholdSet], rule: FilterRule) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    for (i, t) in sets.iter().enumerate() {
        match rule.check(t) {
            None => out.kept.push(i),
            Some(reason) => out.excluded.push((i, reason)),
        }
    }
    out
}
