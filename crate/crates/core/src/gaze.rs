//! Linear / re-fixation / scattered gaze patterns inside each AU.
//!
//! Consecutive same-window fixation parts of an AU form a chain. Each
//! transition in the chain is labelled from its displacement; fixation `i`
//! takes the label of the transition that reaches it and the first fixation
//! takes the label of the first transition. Maximal same-label stretches
//! become [`GazeRun`]s. A chain of one fixation is a re-fixation.

use serde::{Deserialize, Serialize};

use crate::segmentation::{FixationPart, SegmentHierarchy};
use crate::session::{Ms, Session, Window};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadingDirection {
    LeftToRight,
    RightToLeft,
}

impl ReadingDirection {
    fn sign(self) -> f64 {
        match self {
            ReadingDirection::LeftToRight => 1.0,
            ReadingDirection::RightToLeft => -1.0,
        }
    }
}

/// Pixel tolerances for transition labelling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GazeGeometry {
    pub line_tol: f64,
    pub same_pos_radius: f64,
    pub min_advance: f64,
    pub regress_limit: f64,
    pub max_saccade: f64,
    pub scatter_dy: f64,
    pub direction: ReadingDirection,
}

impl Default for GazeGeometry {
    fn default() -> Self {
        GazeGeometry {
            line_tol: 40.0,
            same_pos_radius: 30.0,
            min_advance: 10.0,
            regress_limit: 120.0,
            max_saccade: 500.0,
            scatter_dy: 150.0,
            direction: ReadingDirection::LeftToRight,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GazePattern {
    Linear,
    Refix,
    Scattered,
}

impl GazePattern {
    pub const ALL: [GazePattern; 3] = [GazePattern::Linear, GazePattern::Refix, GazePattern::Scattered];
}

pub fn classify_transition(dx: f64, dy: f64, g: &GazeGeometry) -> GazePattern {
    let advance = dx * g.direction.sign();
    let dy = dy.abs();
    if dy > g.scatter_dy || dx.abs() > g.max_saccade {
        return GazePattern::Scattered;
    }
    let same_spot = dx.hypot(dy) <= g.same_pos_radius;
    let small_regression = (-g.regress_limit..g.min_advance).contains(&advance) && dy <= g.line_tol;
    if same_spot || small_regression {
        GazePattern::Refix
    } else if advance > g.min_advance && advance <= g.max_saccade && dy <= g.line_tol {
        GazePattern::Linear
    } else {
        GazePattern::Scattered
    }
}

/// Labels a chain of fixation positions, one label per fixation.
pub fn label_chain(points: &[(f64, f64)], g: &GazeGeometry) -> Vec<GazePattern> {
    if points.len() < 2 {
        return vec![GazePattern::Refix; points.len()];
    }
    let transitions: Vec<GazePattern> =
        points.windows(2).map(|w| classify_transition(w[1].0 - w[0].0, w[1].1 - w[0].1, g)).collect();
    std::iter::once(transitions[0]).chain(transitions.iter().copied()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GazeRun {
    pub au_id: usize,
    pub pattern: GazePattern,
    pub start: Ms,
    pub dur: Ms,
    pub n_fix: usize,
    pub window: Window,
}

/// Per-AU pattern durations (Dur_L, Dur_R, Dur_S).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternDurations {
    pub linear: Ms,
    pub refix: Ms,
    pub scattered: Ms,
}

impl PatternDurations {
    pub fn total(&self) -> Ms {
        self.linear + self.refix + self.scattered
    }

    pub fn get(&self, p: GazePattern) -> Ms {
        match p {
            GazePattern::Linear => self.linear,
            GazePattern::Refix => self.refix,
            GazePattern::Scattered => self.scattered,
        }
    }

    fn add(&mut self, p: GazePattern, d: Ms) {
        match p {
            GazePattern::Linear => self.linear += d,
            GazePattern::Refix => self.refix += d,
            GazePattern::Scattered => self.scattered += d,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GazeDiagnostic {
    pub au_id: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GazeAnalysis {
    pub runs: Vec<GazeRun>,
    pub per_au: Vec<PatternDurations>,
    /// Linear reading time on the source window, per AU.
    pub linear_source: Vec<Ms>,
    pub diagnostics: Vec<GazeDiagnostic>,
}

/// Appends the runs of one chain; a chain always opens a fresh run.
fn runs_for_chain(au_id: usize, parts: &[FixationPart], labels: &[GazePattern], out: &mut Vec<GazeRun>) {
    let first = out.len();
    for (part, &label) in parts.iter().zip(labels) {
        let open = out.len() > first;
        match out.last_mut() {
            Some(run) if open && run.pattern == label => {
                run.dur += part.dur;
                run.n_fix += 1;
            }
            _ => out.push(GazeRun { au_id, pattern: label, start: part.start, dur: part.dur, n_fix: 1, window: part.window }),
        }
    }
}

pub fn classify_gaze(s: &Session, h: &SegmentHierarchy, g: &GazeGeometry) -> GazeAnalysis {
    let mut out = GazeAnalysis {
        per_au: vec![PatternDurations::default(); h.aus.len()],
        linear_source: vec![0; h.aus.len()],
        ..Default::default()
    };
    for (au_id, parts) in h.parts_by_au().into_iter().enumerate() {
        if parts.is_empty() {
            continue;
        }
        let missing = parts.iter().any(|p| {
            let f = &s.fixes[p.fixation];
            !(f.x.is_finite() && f.y.is_finite())
        });
        if missing {
            out.diagnostics.push(GazeDiagnostic {
                au_id,
                message: format!("AU {au_id}: fixation without coordinates, gaze time reported as scattered"),
            });
        }
        let mut chain_start = 0;
        for i in 1..=parts.len() {
            if i < parts.len() && parts[i].window == parts[i - 1].window {
                continue;
            }
            let chain = &parts[chain_start..i];
            let labels = if missing {
                vec![GazePattern::Scattered; chain.len()]
            } else {
                let points: Vec<(f64, f64)> = chain.iter().map(|p| (s.fixes[p.fixation].x, s.fixes[p.fixation].y)).collect();
                label_chain(&points, g)
            };
            runs_for_chain(au_id, chain, &labels, &mut out.runs);
            for (part, &label) in chain.iter().zip(&labels) {
                out.per_au[au_id].add(label, part.dur);
                if label == GazePattern::Linear && part.window == Window::Source {
                    out.linear_source[au_id] += part.dur;
                }
            }
            chain_start = i;
        }
    }
    out
}
