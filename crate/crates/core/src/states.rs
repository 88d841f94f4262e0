//! HOF (hesitation / orientation / flow) labelling and translation phases.
//!
//! HOF labels are assigned to whole production units and to the pauses that
//! lie between them, so a state never cuts through a PU. The labeller is
//! rule based with three tunable thresholds.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::gaze::GazeAnalysis;
use crate::segmentation::{PauseKind, SegmentHierarchy};
use crate::session::{AlignmentPair, KeyAction, Ms, Session};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HofState {
    H,
    O,
    F,
}

impl HofState {
    pub const ALL: [HofState; 3] = [HofState::H, HofState::O, HofState::F];

    pub fn index(self) -> usize {
        match self {
            HofState::H => 0,
            HofState::O => 1,
            HofState::F => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HofState::H => "Hesitation",
            HofState::O => "Orientation",
            HofState::F => "Flow",
        }
    }
}

impl fmt::Display for HofState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HofState::H => "H",
            HofState::O => "O",
            HofState::F => "F",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HofRules {
    /// Minimum share of gaze time that is linear reading on the source text.
    pub theta_o: f64,
    /// Minimum share of gaze time spent re-fixating.
    pub theta_h: f64,
    /// A PUB at least this many times the PUB threshold signals hesitation.
    pub theta_p: f64,
}

impl Default for HofRules {
    fn default() -> Self {
        HofRules { theta_o: 0.6, theta_h: 0.5, theta_p: 2.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum UnitRef {
    Pu(usize),
    Pause(usize),
}

/// Aggregates of one labelling unit (a PU or a pause outside any PU).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitProfile {
    pub unit: UnitRef,
    pub start: Ms,
    pub end: Ms,
    pub keystrokes: usize,
    pub deletions: usize,
    pub gaze: Ms,
    pub linear_source: Ms,
    pub refix: Ms,
    pub pause: Option<(PauseKind, Ms)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitLabel {
    pub profile: UnitProfile,
    pub state: HofState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HofSpan {
    pub state: HofState,
    pub start: Ms,
    pub dur: Ms,
    pub pu_ids: Vec<usize>,
    pub pause_ids: Vec<usize>,
}

impl HofSpan {
    pub fn end(&self) -> Ms {
        self.start + self.dur
    }
}

/// PUs and the pauses outside them, in time order; together they tile the session.
pub fn unit_profiles(h: &SegmentHierarchy, gaze: &GazeAnalysis) -> Vec<UnitProfile> {
    let profile = |unit: UnitRef, start: Ms, end: Ms, au_ids: &mut dyn Iterator<Item = usize>, pause| {
        let mut p = UnitProfile { unit, start, end, keystrokes: 0, deletions: 0, gaze: 0, linear_source: 0, refix: 0, pause };
        for a in au_ids {
            let au = &h.aus[a];
            p.keystrokes += au.keystrokes();
            p.deletions += au.del;
            p.gaze += au.gaze_time();
            p.linear_source += gaze.linear_source.get(a).copied().unwrap_or(0);
            p.refix += gaze.per_au.get(a).map_or(0, |d| d.refix);
        }
        p
    };
    let mut units: Vec<UnitProfile> = Vec::new();
    for pu in &h.pus {
        let mut ids = pu.kb_ids.iter().flat_map(|&k| h.kbs[k].au_ids.iter().copied()).chain(
            pu.internal_kbi_ids.iter().flat_map(|&p| h.pauses[p].au_ids.iter().copied()),
        );
        units.push(profile(UnitRef::Pu(pu.id), pu.start, pu.end(), &mut ids, None));
    }
    for p in &h.pauses {
        if p.au_ids.iter().any(|&a| h.aus[a].pu_id.is_some()) {
            continue;
        }
        units.push(profile(UnitRef::Pause(p.id), p.start, p.end(), &mut p.au_ids.iter().copied(), Some((p.kind, p.dur))));
    }
    units.sort_by_key(|u| u.start);
    units
}

pub fn classify_unit(u: &UnitProfile, rules: &HofRules, pub_ms: f64) -> HofState {
    let share = |x: Ms| if u.gaze > 0 { x as f64 / u.gaze as f64 } else { 0.0 };
    if u.gaze > 0 && u.keystrokes == 0 && share(u.linear_source) >= rules.theta_o {
        return HofState::O;
    }
    let long_break = matches!(u.pause, Some((PauseKind::Pub, d)) if d as f64 >= rules.theta_p * pub_ms);
    if u.deletions > 0 || (u.gaze > 0 && share(u.refix) >= rules.theta_h) || long_break {
        return HofState::H;
    }
    HofState::F
}

pub fn label_units(h: &SegmentHierarchy, gaze: &GazeAnalysis, rules: &HofRules) -> Vec<UnitLabel> {
    unit_profiles(h, gaze)
        .into_iter()
        .map(|profile| UnitLabel { state: classify_unit(&profile, rules, h.thresholds.pub_ms), profile })
        .collect()
}

/// Merges adjacent same-state unit labels into spans.
pub fn merge_spans(labels: &[UnitLabel]) -> Vec<HofSpan> {
    let mut spans: Vec<HofSpan> = Vec::new();
    for l in labels {
        let span = match spans.last_mut() {
            Some(s) if s.state == l.state => s,
            _ => {
                spans.push(HofSpan { state: l.state, start: l.profile.start, dur: 0, pu_ids: vec![], pause_ids: vec![] });
                spans.last_mut().unwrap()
            }
        };
        span.dur = l.profile.end - span.start;
        match l.profile.unit {
            UnitRef::Pu(id) => span.pu_ids.push(id),
            UnitRef::Pause(id) => span.pause_ids.push(id),
        }
    }
    spans
}

pub fn label_hof(h: &SegmentHierarchy, gaze: &GazeAnalysis, rules: &HofRules) -> Vec<HofSpan> {
    merge_spans(&label_units(h, gaze, rules))
}

/// State per production unit, read as one step of the HOF chain: the
/// pause that opens a PU carries the state when there is one.
pub fn block_states(labels: &[UnitLabel]) -> Vec<HofState> {
    let mut out = Vec::new();
    let mut opening: Option<HofState> = None;
    for l in labels {
        match l.profile.unit {
            UnitRef::Pause(_) => opening = Some(l.state),
            UnitRef::Pu(_) => out.push(opening.take().unwrap_or(l.state)),
        }
    }
    out
}

/// Fraction of entries in each state, in H, O, F order.
pub fn occupancy(states: &[HofState]) -> [f64; 3] {
    let mut counts = [0usize; 3];
    for s in states {
        counts[s.index()] += 1;
    }
    let n = states.len().max(1) as f64;
    counts.map(|c| c as f64 / n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhaseKind {
    Orientation,
    Drafting,
    Revision,
}

impl PhaseKind {
    pub const ALL: [PhaseKind; 3] = [PhaseKind::Orientation, PhaseKind::Drafting, PhaseKind::Revision];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase {
    pub kind: PhaseKind,
    pub start: Ms,
    pub end: Ms,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phases {
    pub phases: [Phase; 3],
    /// Set when the drafting end comes from the final text rather than an alignment.
    pub approximated: bool,
}

impl Phases {
    pub fn at(&self, t: Ms) -> PhaseKind {
        self.phases.iter().find(|p| p.start <= t && t < p.end).map_or(PhaseKind::Revision, |p| p.kind)
    }
}

/// Final text as (glyph, index of the inserting keystroke) after replaying
/// insertions as appends and deletions as backspaces.
pub fn final_text(s: &Session) -> Vec<(char, usize)> {
    let mut text = Vec::new();
    for (i, k) in s.keys.iter().enumerate() {
        match k.action {
            KeyAction::Insert => text.push((k.glyph, i)),
            KeyAction::Delete => {
                text.pop();
            }
        }
    }
    text
}

/// Alphanumeric tokens of the final text, each as the keystroke indices of its glyphs.
pub fn final_tokens(s: &Session) -> Vec<Vec<usize>> {
    let mut tokens: Vec<Vec<usize>> = Vec::new();
    let mut open = false;
    for (c, i) in final_text(s) {
        if c.is_alphanumeric() {
            if !open {
                tokens.push(Vec::new());
                open = true;
            }
            tokens.last_mut().unwrap().push(i);
        } else {
            open = false;
        }
    }
    tokens
}

fn token_completion(s: &Session, token: &[usize]) -> Option<Ms> {
    token.iter().map(|&i| s.keys[i].end()).max()
}

pub fn detect_phases(s: &Session, h: &SegmentHierarchy) -> Phases {
    let first_key = s.keys.first().map_or(h.start, |k| k.time);
    let last_key_end = s.keys.last().map_or(h.end, |k| k.end());
    let tokens = final_tokens(s);

    let aligned = s.alignment.as_ref().and_then(|pairs| aligned_drafting_end(s, &tokens, pairs));
    let (draft_end, approximated) = match aligned {
        Some(t) => (t, false),
        None => (tokens.last().and_then(|t| token_completion(s, t)).unwrap_or(last_key_end), true),
    };
    let draft_end = draft_end.clamp(first_key, h.end);
    Phases {
        phases: [
            Phase { kind: PhaseKind::Orientation, start: h.start, end: first_key },
            Phase { kind: PhaseKind::Drafting, start: first_key, end: draft_end },
            Phase { kind: PhaseKind::Revision, start: draft_end, end: h.end },
        ],
        approximated,
    }
}

fn aligned_drafting_end(s: &Session, tokens: &[Vec<usize>], pairs: &[AlignmentPair]) -> Option<Ms> {
    let last_st = pairs.iter().map(|p| p.st.last).max()?;
    pairs
        .iter()
        .filter(|p| p.st.first <= last_st && last_st <= p.st.last)
        .flat_map(|p| p.tt.first..=p.tt.last)
        .filter_map(|i| tokens.get(i))
        .filter_map(|t| token_completion(s, t))
        .max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze::{classify_gaze, GazeGeometry};
    use crate::segmentation::{segment_with_thresholds, SegmentOptions};
    use crate::session::{FixationEvent, KeyEvent, TokenSpan, Window};
    use crate::thresholds::ThresholdSet;

    fn typed(text: &str, start: Ms, step: Ms) -> Vec<KeyEvent> {
        text.chars()
            .enumerate()
            .map(|(i, c)| {
                let t = start + i as Ms * step;
                if c == '<' {
                    KeyEvent::delete(t, 'x')
                } else {
                    KeyEvent::insert(t, c)
                }
            })
            .collect()
    }

    fn labelled(s: &Session) -> (SegmentHierarchy, Vec<UnitLabel>) {
        let h = segment_with_thresholds(s, &ThresholdSet::fixed(300.0, 900.0), &SegmentOptions::default()).unwrap();
        let g = classify_gaze(s, &h, &GazeGeometry::default());
        let l = label_units(&h, &g, &HofRules::default());
        (h, l)
    }

    #[test]
    fn pure_insertion_unit_is_flow() {
        let (_, l) = labelled(&Session::new("f", typed("abc de", 0, 100), vec![]));
        assert_eq!(l.iter().map(|u| u.state).collect::<Vec<_>>(), vec![HofState::F]);
    }

    #[test]
    fn linear_source_reading_pause_is_orientation() {
        let fixes: Vec<FixationEvent> =
            (0..5).map(|i| FixationEvent::new(i * 220, 200, Window::Source, 100.0 + 70.0 * i as f64, 50.0)).collect();
        let s = Session::new("o", typed("ab", 1200, 100), fixes);
        let (_, l) = labelled(&s);
        assert_eq!(l[0].state, HofState::O);
        assert!(matches!(l[0].profile.unit, UnitRef::Pause(_)));
        assert_eq!(block_states(&l), vec![HofState::O]);
    }

    #[test]
    fn deletion_makes_hesitation() {
        let (_, l) = labelled(&Session::new("h", typed("ab<c", 0, 100), vec![]));
        assert_eq!(l[0].state, HofState::H);
    }

    #[test]
    fn very_long_break_is_hesitation() {
        let mut keys = typed("ab", 0, 100);
        keys.extend(typed("cd", 3000, 100));
        let (_, l) = labelled(&Session::new("p", keys, vec![]));
        let states: Vec<_> = l.iter().map(|u| u.state).collect();
        assert_eq!(states, vec![HofState::F, HofState::H, HofState::F]);
        let spans = merge_spans(&l);
        assert_eq!(spans.len(), 3);
        assert_eq!(spans.iter().map(|s| s.dur).sum::<Ms>(), 3101);
    }

    #[test]
    fn orientation_phase_runs_to_first_keystroke() {
        let fixes = vec![FixationEvent::new(0, 4000, Window::Source, 0.0, 0.0)];
        let s = Session::new("ph", typed("ab", 5000, 100), fixes);
        let (h, _) = labelled(&s);
        let p = detect_phases(&s, &h);
        assert_eq!(p.phases[0], Phase { kind: PhaseKind::Orientation, start: 0, end: 5000 });
        // last token completed by the last keystroke: empty revision
        assert_eq!(p.phases[2].start, p.phases[2].end);
        assert!(p.approximated);
    }

    #[test]
    fn revision_follows_last_token() {
        // "ab cd" then a pause and a correction inside the first word
        let mut keys = typed("ab cd", 0, 100);
        keys.push(KeyEvent::insert(3000, '.'));
        let s = Session::new("r", keys, vec![]);
        let (h, _) = labelled(&s);
        let p = detect_phases(&s, &h);
        assert_eq!(p.phases[1].end, 401);
        assert_eq!(p.at(2000), PhaseKind::Revision);
    }

    #[test]
    fn alignment_picks_tokens_of_final_source_word() {
        let keys = typed("ab cd ef", 0, 100);
        let mut s = Session::new("a", keys, vec![]);
        s.alignment = Some(vec![
            AlignmentPair { st: TokenSpan { first: 0, last: 0 }, tt: TokenSpan { first: 0, last: 0 } },
            AlignmentPair { st: TokenSpan { first: 1, last: 1 }, tt: TokenSpan { first: 1, last: 1 } },
            AlignmentPair { st: TokenSpan { first: 0, last: 0 }, tt: TokenSpan { first: 2, last: 2 } },
        ]);
        let (h, _) = labelled(&s);
        let p = detect_phases(&s, &h);
        assert!(!p.approximated);
        assert_eq!(p.phases[1].end, 401);
    }
}
