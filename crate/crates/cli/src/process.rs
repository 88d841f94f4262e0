//! Loading and per-session processing shared by the subcommands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Result};
use btss_core::config::RunConfig;
use btss_core::gaze::{classify_gaze, GazeAnalysis};
use btss_core::segmentation::{segment_with_thresholds, SegmentHierarchy};
use btss_core::session::{parse_alignment, parse_session, validate_session, Session};
use btss_core::states::{detect_phases, label_units, merge_spans, HofSpan, Phases, UnitLabel};
use btss_core::thresholds::{derive_thresholds, ExclusionReason, ThresholdSet};

use crate::io::{alignment_path, discover, par_map};

#[derive(Clone, Debug)]
pub struct Loaded {
    pub path: PathBuf,
    pub session: Session,
}

/// A session file that could not be used, with the reason.
#[derive(Clone, Debug)]
pub struct Failure {
    pub path: PathBuf,
    pub session_id: String,
    pub message: String,
}

impl Failure {
    pub fn report(&self) -> String {
        format!("session {} ({}): {}", self.session_id, self.path.display(), self.message)
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("session").to_string()
}

pub fn load_one(path: &Path) -> std::result::Result<Loaded, Failure> {
    let fail = |id: String, message: String| Failure { path: path.to_path_buf(), session_id: id, message };
    let mut session = parse_session(path).map_err(|e| fail(stem(path), e.to_string()))?;
    let align = alignment_path(path);
    if align.is_file() {
        session.alignment = Some(parse_alignment(&align).map_err(|e| fail(session.id.clone(), format!("alignment: {e}")))?);
    }
    let diagnostics = validate_session(&session);
    if !diagnostics.is_empty() {
        let shown: Vec<String> = diagnostics.iter().take(3).map(|d| d.message.clone()).collect();
        let more = diagnostics.len().saturating_sub(3);
        let suffix = if more > 0 { format!(" (and {more} more)") } else { String::new() };
        return Err(fail(session.id.clone(), format!("invalid session: {}{suffix}", shown.join("; "))));
    }
    if session.translator.is_empty() {
        session.translator = session.id.clone();
    }
    Ok(Loaded { path: path.to_path_buf(), session })
}

/// Loads every session under `input`, ordered by session id.
pub fn load_all(input: &Path, jobs: usize) -> Result<(Vec<Loaded>, Vec<Failure>)> {
    let files = discover(input)?;
    let results = par_map(jobs, &files, |p| load_one(p))?;
    let mut loaded = Vec::new();
    let mut failed = Vec::new();
    for r in results {
        match r {
            Ok(l) => loaded.push(l),
            Err(f) => failed.push(f),
        }
    }
    let mut seen: BTreeMap<String, PathBuf> = BTreeMap::new();
    for l in &loaded {
        if let Some(first) = seen.insert(l.session.id.clone(), l.path.clone()) {
            bail!("duplicate session id {} in {} and {}", l.session.id, first.display(), l.path.display());
        }
    }
    loaded.sort_by(|a, b| a.session.id.cmp(&b.session.id));
    failed.sort_by(|a, b| a.session_id.cmp(&b.session_id).then(a.path.cmp(&b.path)));
    Ok((loaded, failed))
}

#[derive(Clone, Debug)]
pub struct Processed {
    pub path: PathBuf,
    pub session: Session,
    pub exclusion: Option<ExclusionReason>,
    pub hierarchy: SegmentHierarchy,
    pub gaze: GazeAnalysis,
    pub labels: Vec<UnitLabel>,
    pub spans: Vec<HofSpan>,
    pub phases: Phases,
}

impl Processed {
    pub fn thresholds(&self) -> &ThresholdSet {
        &self.hierarchy.thresholds
    }
}

pub fn process(l: &Loaded, cfg: &RunConfig, fixed: Option<ThresholdSet>) -> std::result::Result<Processed, Failure> {
    let fail = |e: btss_core::Error| Failure { path: l.path.clone(), session_id: l.session.id.clone(), message: e.to_string() };
    let s = &l.session;
    let t = match fixed {
        Some(t) => t,
        None => derive_thresholds(s, cfg.segment.iki).map_err(fail)?,
    };
    let exclusion = if cfg.apply_filter { cfg.filter.check(&t) } else { None };
    let hierarchy = segment_with_thresholds(s, &t, &cfg.segment).map_err(fail)?;
    let gaze = classify_gaze(s, &hierarchy, &cfg.geometry);
    let labels = label_units(&hierarchy, &gaze, &cfg.rules);
    let spans = merge_spans(&labels);
    let phases = detect_phases(s, &hierarchy);
    Ok(Processed { path: l.path.clone(), session: s.clone(), exclusion, hierarchy, gaze, labels, spans, phases })
}

pub fn process_all(
    loaded: &[Loaded],
    cfg: &RunConfig,
    fixed: Option<ThresholdSet>,
    jobs: usize,
) -> Result<(Vec<Processed>, Vec<Failure>)> {
    let results = par_map(jobs, loaded, |l| process(l, cfg, fixed))?;
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for r in results {
        match r {
            Ok(p) => ok.push(p),
            Err(f) => failed.push(f),
        }
    }
    Ok((ok, failed))
}

pub fn fixed_thresholds(kbi: Option<f64>, pub_ms: Option<f64>) -> Result<Option<ThresholdSet>> {
    match (kbi, pub_ms) {
        (Some(k), Some(p)) => {
            if !(k > 0.0 && p > 0.0 && k.is_finite() && p.is_finite()) {
                return Err(anyhow!("thresholds must be positive, got KBI {k} and PUB {p}"));
            }
            Ok(Some(ThresholdSet::fixed(k, p)))
        }
        _ => Ok(None),
    }
}

/// Session id made safe for use as a file name.
pub fn file_id(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect()
}
