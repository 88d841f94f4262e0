//! Activity units, keystroke bursts and production units.
//!
//! The timeline of a session is cut into activity units (AUs) of uniform
//! typing/gaze activity. Keystrokes closer than the KBI threshold form key
//! runs; inside a run a new AU starts wherever the concurrent gaze window
//! changes (types 4, 5, 6), outside runs AUs follow gaze coverage (types 1,
//! 2) and uncovered time (type 8). Same-window fixations separated by less
//! than `gaze_gap_ms` count as continuous gaze on that window. Gaze AUs that
//! end up holding no fixation time at all fall back to type 4 or 8.
//!
//! Gap AUs between runs then cluster into pauses (KBI or PUB) or, when
//! shorter than the KBI threshold, are absorbed into the surrounding
//! keystroke burst. Bursts joined by KBI pauses form production units.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::session::{structural_diagnostics, KeyAction, KeyEvent, Ms, Session, Window};
use crate::thresholds::{derive_thresholds, IkiOptions, ThresholdSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentOptions {
    /// Same-window fixations closer than this are treated as one gaze stretch.
    pub gaze_gap_ms: Ms,
    pub iki: IkiOptions,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        SegmentOptions { gaze_gap_ms: 100, iki: IkiOptions::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum AuType {
    SourceReading,
    TargetReading,
    Typing,
    TypingSourceReading,
    TypingTargetReading,
    NoData,
}

impl AuType {
    pub const ALL: [AuType; 6] = [
        AuType::SourceReading,
        AuType::TargetReading,
        AuType::Typing,
        AuType::TypingSourceReading,
        AuType::TypingTargetReading,
        AuType::NoData,
    ];

    pub fn code(self) -> u8 {
        match self {
            AuType::SourceReading => 1,
            AuType::TargetReading => 2,
            AuType::Typing => 4,
            AuType::TypingSourceReading => 5,
            AuType::TypingTargetReading => 6,
            AuType::NoData => 8,
        }
    }

    pub fn from_code(code: u8) -> Option<AuType> {
        AuType::ALL.into_iter().find(|t| t.code() == code)
    }

    pub fn is_typing(self) -> bool {
        matches!(self, AuType::Typing | AuType::TypingSourceReading | AuType::TypingTargetReading)
    }

    /// Classifies a stretch of constant activity.
    pub fn classify(typing: bool, gaze: Option<Window>) -> AuType {
        match (typing, gaze) {
            (true, None) => AuType::Typing,
            (true, Some(Window::Source)) => AuType::TypingSourceReading,
            (true, Some(Window::Target)) => AuType::TypingTargetReading,
            (false, None) => AuType::NoData,
            (false, Some(Window::Source)) => AuType::SourceReading,
            (false, Some(Window::Target)) => AuType::TargetReading,
        }
    }

    pub fn without_gaze(self) -> AuType {
        if self.is_typing() {
            AuType::Typing
        } else {
            AuType::NoData
        }
    }
}

impl From<AuType> for u8 {
    fn from(t: AuType) -> u8 {
        t.code()
    }
}

impl TryFrom<u8> for AuType {
    type Error = String;
    fn try_from(code: u8) -> std::result::Result<Self, String> {
        AuType::from_code(code).ok_or_else(|| format!("unknown AU type {code}"))
    }
}

impl fmt::Display for AuType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// Maximal keystroke sequence whose successive IKIs stay below the KBI threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyRun {
    pub start: Ms,
    pub end: Ms,
    pub first_key: usize,
    pub last_key: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivityUnit {
    pub id: usize,
    pub au_type: AuType,
    pub start: Ms,
    pub dur: Ms,
    pub ins: usize,
    pub del: usize,
    pub tgnbr: usize,
    pub fix_s: usize,
    pub trt_s: Ms,
    pub fix_t: usize,
    pub trt_t: Ms,
    pub edit: String,
    pub kb_id: Option<usize>,
    pub pause_id: Option<usize>,
    pub pu_id: Option<usize>,
}

impl ActivityUnit {
    pub fn end(&self) -> Ms {
        self.start + self.dur
    }

    pub fn gaze_time(&self) -> Ms {
        self.trt_s + self.trt_t
    }

    pub fn keystrokes(&self) -> usize {
        self.ins + self.del
    }
}

/// The slice of a fixation that falls inside one AU.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixationPart {
    pub au_id: usize,
    pub fixation: usize,
    pub start: Ms,
    pub dur: Ms,
    pub window: Window,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BurstKind {
    Ins,
    Del,
    Mixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeystrokeBurst {
    pub id: usize,
    pub start: Ms,
    pub dur: Ms,
    pub kind: BurstKind,
    pub au_ids: Vec<usize>,
    pub ins: usize,
    pub del: usize,
}

impl KeystrokeBurst {
    pub fn end(&self) -> Ms {
        self.start + self.dur
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PauseKind {
    #[serde(rename = "KBI")]
    Kbi,
    #[serde(rename = "PUB")]
    Pub,
}

impl fmt::Display for PauseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PauseKind::Kbi => "KBI",
            PauseKind::Pub => "PUB",
        })
    }
}

/// Leading and trailing pauses lie before the first or after the last keystroke.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PausePosition {
    Leading,
    Interior,
    Trailing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauseSpan {
    pub id: usize,
    pub start: Ms,
    pub dur: Ms,
    pub kind: PauseKind,
    pub position: PausePosition,
    pub au_ids: Vec<usize>,
}

impl PauseSpan {
    pub fn end(&self) -> Ms {
        self.start + self.dur
    }

    pub fn kind_for(dur: Ms, t: &ThresholdSet) -> PauseKind {
        if dur as f64 >= t.pub_ms {
            PauseKind::Pub
        } else {
            PauseKind::Kbi
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductionUnit {
    pub id: usize,
    pub start: Ms,
    pub dur: Ms,
    pub kb_ids: Vec<usize>,
    pub internal_kbi_ids: Vec<usize>,
}

impl ProductionUnit {
    pub fn end(&self) -> Ms {
        self.start + self.dur
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentHierarchy {
    pub session_id: String,
    pub thresholds: ThresholdSet,
    pub start: Ms,
    pub end: Ms,
    pub aus: Vec<ActivityUnit>,
    pub kbs: Vec<KeystrokeBurst>,
    pub pauses: Vec<PauseSpan>,
    pub pus: Vec<ProductionUnit>,
    pub fixation_parts: Vec<FixationPart>,
}

impl SegmentHierarchy {
    /// Fixation parts grouped per AU, in AU order.
    pub fn parts_by_au(&self) -> Vec<&[FixationPart]> {
        let mut out = Vec::with_capacity(self.aus.len());
        let mut i = 0;
        for au in &self.aus {
            let from = i;
            while i < self.fixation_parts.len() && self.fixation_parts[i].au_id == au.id {
                i += 1;
            }
            out.push(&self.fixation_parts[from..i]);
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Key runs
// ---------------------------------------------------------------------------

pub fn build_keystroke_runs(keys: &[KeyEvent], kbi_ms: f64) -> Vec<KeyRun> {
    let mut runs: Vec<KeyRun> = Vec::new();
    for (i, k) in keys.iter().enumerate() {
        match runs.last_mut() {
            Some(run) if ((k.time - keys[run.last_key].time) as f64) < kbi_ms => {
                run.last_key = i;
                run.end = run.end.max(k.end());
            }
            _ => runs.push(KeyRun { start: k.time, end: k.end(), first_key: i, last_key: i }),
        }
    }
    runs
}

// ---------------------------------------------------------------------------
// Activity units
// ---------------------------------------------------------------------------

/// Same-window gaze stretches with short saccade gaps bridged.
fn gaze_stretches(s: &Session, gaze_gap_ms: Ms) -> Vec<(Ms, Ms, Window)> {
    let mut out: Vec<(Ms, Ms, Window)> = Vec::new();
    for f in &s.fixes {
        match out.last_mut() {
            Some(last) if last.2 == f.window && f.start >= last.1 && f.start - last.1 < gaze_gap_ms => {
                last.1 = last.1.max(f.end());
            }
            _ => out.push((f.start, f.end(), f.window)),
        }
    }
    out
}

/// Marks keystrokes that complete a target-text token: a delimiter after a
/// word, or the session's final keystroke when a word is still open.
pub fn token_completions(keys: &[KeyEvent]) -> Vec<bool> {
    let mut completes = vec![false; keys.len()];
    let mut in_token = false;
    for (i, k) in keys.iter().enumerate() {
        if k.action != KeyAction::Insert {
            continue;
        }
        if k.is_alnum {
            in_token = true;
        } else if in_token {
            completes[i] = true;
            in_token = false;
        }
    }
    if in_token {
        if let Some(last) = completes.last_mut() {
            *last = true;
        }
    }
    completes
}

pub fn build_activity_units(s: &Session, runs: &[KeyRun], gaze_gap_ms: Ms) -> (Vec<ActivityUnit>, Vec<FixationPart>) {
    let Some((span_start, span_end)) = s.span() else {
        return (Vec::new(), Vec::new());
    };
    let stretches = gaze_stretches(s, gaze_gap_ms);

    let mut cuts: Vec<Ms> = vec![span_start, span_end];
    cuts.extend(runs.iter().flat_map(|r| [r.start, r.end]));
    cuts.extend(stretches.iter().flat_map(|g| [g.0, g.1]));
    cuts.sort_unstable();
    cuts.dedup();

    // Maximal intervals of constant (typing, gaze window) state.
    let mut states: Vec<(Ms, Ms, bool, Option<Window>)> = Vec::new();
    let (mut ri, mut gi) = (0, 0);
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        while ri < runs.len() && runs[ri].end <= a {
            ri += 1;
        }
        while gi < stretches.len() && stretches[gi].1 <= a {
            gi += 1;
        }
        let typing = ri < runs.len() && runs[ri].start <= a;
        let gaze = (gi < stretches.len() && stretches[gi].0 <= a).then(|| stretches[gi].2);
        match states.last_mut() {
            Some(last) if last.1 == a && last.2 == typing && last.3 == gaze => last.1 = b,
            _ => states.push((a, b, typing, gaze)),
        }
    }

    // Type each interval; gaze intervals without fixation time lose their gaze.
    let mut typed: Vec<(Ms, Ms, AuType)> = Vec::new();
    let mut fp = 0;
    for &(a, b, typing, gaze) in &states {
        while fp < s.fixes.len() && s.fixes[fp].end() <= a {
            fp += 1;
        }
        let covered = s.fixes[fp..]
            .iter()
            .take_while(|f| f.start < b)
            .any(|f| f.end().min(b) > f.start.max(a));
        let mut t = AuType::classify(typing, gaze);
        if gaze.is_some() && !covered {
            t = t.without_gaze();
        }
        match typed.last_mut() {
            Some(last) if last.2 == t => last.1 = b,
            _ => typed.push((a, b, t)),
        }
    }

    let completes = token_completions(&s.keys);
    let mut aus = Vec::with_capacity(typed.len());
    let mut parts = Vec::new();
    let (mut kp, mut fp) = (0, 0);
    for (id, &(a, b, au_type)) in typed.iter().enumerate() {
        let mut au = ActivityUnit {
            id,
            au_type,
            start: a,
            dur: b - a,
            ins: 0,
            del: 0,
            tgnbr: 0,
            fix_s: 0,
            trt_s: 0,
            fix_t: 0,
            trt_t: 0,
            edit: String::new(),
            kb_id: None,
            pause_id: None,
            pu_id: None,
        };
        while kp < s.keys.len() && s.keys[kp].time < b {
            let k = &s.keys[kp];
            match k.action {
                KeyAction::Insert => {
                    au.ins += 1;
                    au.edit.push(k.glyph);
                }
                KeyAction::Delete => {
                    au.del += 1;
                    au.edit.push('[');
                    au.edit.push(k.glyph);
                    au.edit.push(']');
                }
            }
            if completes[kp] {
                au.tgnbr += 1;
            }
            kp += 1;
        }
        while fp < s.fixes.len() && s.fixes[fp].end() <= a {
            fp += 1;
        }
        for (offset, f) in s.fixes[fp..].iter().enumerate().take_while(|(_, f)| f.start < b) {
            let (ps, pe) = (f.start.max(a), f.end().min(b));
            if pe <= ps {
                continue;
            }
            match f.window {
                Window::Source => {
                    au.fix_s += 1;
                    au.trt_s += pe - ps;
                }
                Window::Target => {
                    au.fix_t += 1;
                    au.trt_t += pe - ps;
                }
            }
            parts.push(FixationPart { au_id: id, fixation: fp + offset, start: ps, dur: pe - ps, window: f.window });
        }
        aus.push(au);
    }
    (aus, parts)
}

// ---------------------------------------------------------------------------
// Bursts, pauses and production units
// ---------------------------------------------------------------------------

struct BurstBuilder {
    start: Ms,
    end: Ms,
    au_ids: Vec<usize>,
    ins: usize,
    del: usize,
}

impl BurstBuilder {
    fn add(&mut self, au: &ActivityUnit) {
        if self.au_ids.is_empty() {
            self.start = au.start;
        }
        self.end = au.end();
        self.au_ids.push(au.id);
        self.ins += au.ins;
        self.del += au.del;
    }

    fn finish(self, id: usize) -> KeystrokeBurst {
        let kind = match (self.ins, self.del) {
            (_, 0) => BurstKind::Ins,
            (0, _) => BurstKind::Del,
            _ => BurstKind::Mixed,
        };
        KeystrokeBurst { id, start: self.start, dur: self.end - self.start, kind, au_ids: self.au_ids, ins: self.ins, del: self.del }
    }
}

pub fn cluster_pauses_and_kbs(aus: &[ActivityUnit], t: &ThresholdSet) -> (Vec<KeystrokeBurst>, Vec<PauseSpan>) {
    // Alternating groups of typing and non-typing AUs.
    let mut groups: Vec<(bool, usize, usize)> = Vec::new();
    for (i, au) in aus.iter().enumerate() {
        let typing = au.au_type.is_typing();
        match groups.last_mut() {
            Some(g) if g.0 == typing => g.2 = i + 1,
            _ => groups.push((typing, i, i + 1)),
        }
    }
    let first_typing = groups.iter().position(|g| g.0);
    let last_typing = groups.iter().rposition(|g| g.0);

    let mut kbs = Vec::new();
    let mut pauses = Vec::new();
    let mut pending: Vec<usize> = Vec::new();
    let mut current: Option<BurstBuilder> = None;
    let new_burst = || BurstBuilder { start: 0, end: 0, au_ids: Vec::new(), ins: 0, del: 0 };

    for (gi, &(typing, from, to)) in groups.iter().enumerate() {
        let members = &aus[from..to];
        if typing {
            let kb = current.get_or_insert_with(|| {
                let mut kb = new_burst();
                for &id in &pending {
                    kb.add(&aus[id]);
                }
                kb
            });
            pending.clear();
            members.iter().for_each(|au| kb.add(au));
            continue;
        }
        let start = members[0].start;
        let dur = members[members.len() - 1].end() - start;
        if (dur as f64) < t.kbi_ms {
            match current.as_mut() {
                Some(kb) => members.iter().for_each(|au| kb.add(au)),
                None => pending.extend(members.iter().map(|au| au.id)),
            }
            continue;
        }
        if let Some(kb) = current.take() {
            kbs.push(kb.finish(kbs.len()));
        }
        let position = match (first_typing, last_typing) {
            (Some(f), _) if gi < f => PausePosition::Leading,
            (_, Some(l)) if gi > l => PausePosition::Trailing,
            (None, None) => PausePosition::Leading,
            _ => PausePosition::Interior,
        };
        pauses.push(PauseSpan {
            id: pauses.len(),
            start,
            dur,
            kind: PauseSpan::kind_for(dur, t),
            position,
            au_ids: members.iter().map(|au| au.id).collect(),
        });
    }
    if let Some(kb) = current.take() {
        kbs.push(kb.finish(kbs.len()));
    } else if !pending.is_empty() {
        // Only reachable without keystrokes; keep every AU accounted for.
        let start = aus[pending[0]].start;
        let dur = aus[*pending.last().unwrap()].end() - start;
        pauses.push(PauseSpan {
            id: pauses.len(),
            start,
            dur,
            kind: PauseSpan::kind_for(dur, t),
            position: PausePosition::Leading,
            au_ids: pending,
        });
    }
    (kbs, pauses)
}

pub fn build_production_units(kbs: &[KeystrokeBurst], pauses: &[PauseSpan]) -> Vec<ProductionUnit> {
    enum Item {
        Kb(usize),
        Pause(usize),
    }
    let mut items: Vec<(Ms, Item)> = kbs.iter().map(|k| (k.start, Item::Kb(k.id))).collect();
    items.extend(pauses.iter().map(|p| (p.start, Item::Pause(p.id))));
    items.sort_by_key(|(start, _)| *start);

    let mut pus: Vec<ProductionUnit> = Vec::new();
    let mut current: Option<ProductionUnit> = None;
    let mut pending_kbi: Vec<usize> = Vec::new();
    for (_, item) in items {
        match item {
            Item::Kb(i) => {
                let kb = &kbs[i];
                match current.as_mut() {
                    Some(pu) => {
                        pu.kb_ids.push(i);
                        pu.internal_kbi_ids.append(&mut pending_kbi);
                        pu.dur = kb.end() - pu.start;
                    }
                    None => {
                        current = Some(ProductionUnit {
                            id: pus.len(),
                            start: kb.start,
                            dur: kb.dur,
                            kb_ids: vec![i],
                            internal_kbi_ids: Vec::new(),
                        })
                    }
                }
            }
            Item::Pause(p) => {
                let pause = &pauses[p];
                if pause.kind == PauseKind::Kbi && pause.position == PausePosition::Interior && current.is_some() {
                    pending_kbi.push(p);
                } else {
                    pus.extend(current.take());
                    pending_kbi.clear();
                }
            }
        }
    }
    pus.extend(current);
    pus
}

// ---------------------------------------------------------------------------
// Composite
// ---------------------------------------------------------------------------

/// Segments a session with thresholds derived from its own keystrokes.
pub fn segment(s: &Session, opts: &SegmentOptions) -> Result<SegmentHierarchy> {
    let diags = structural_diagnostics(s);
    if !diags.is_empty() {
        return Err(Error::InvalidSession(diags));
    }
    let t = derive_thresholds(s, opts.iki)?;
    segment_with_thresholds(s, &t, opts)
}

/// Segments a session against externally supplied thresholds.
pub fn segment_with_thresholds(s: &Session, t: &ThresholdSet, opts: &SegmentOptions) -> Result<SegmentHierarchy> {
    let diags = structural_diagnostics(s);
    if !diags.is_empty() {
        return Err(Error::InvalidSession(diags));
    }
    if !(t.kbi_ms > 0.0 && t.pub_ms > 0.0) {
        return Err(Error::Input(format!("thresholds must be positive: KBI {} PUB {}", t.kbi_ms, t.pub_ms)));
    }
    let (start, end) = s.span().ok_or(Error::EmptyKeyStream)?;
    let runs = build_keystroke_runs(&s.keys, t.kbi_ms);
    let (mut aus, fixation_parts) = build_activity_units(s, &runs, opts.gaze_gap_ms);
    let (kbs, pauses) = cluster_pauses_and_kbs(&aus, t);
    let pus = build_production_units(&kbs, &pauses);

    for kb in &kbs {
        for &a in &kb.au_ids {
            aus[a].kb_id = Some(kb.id);
        }
    }
    for p in &pauses {
        for &a in &p.au_ids {
            aus[a].pause_id = Some(p.id);
        }
    }
    for pu in &pus {
        let ids = pu.kb_ids.iter().flat_map(|&k| kbs[k].au_ids.iter()).chain(pu.internal_kbi_ids.iter().flat_map(|&p| pauses[p].au_ids.iter()));
        for &a in ids.collect::<Vec<_>>() {
            aus[a].pu_id = Some(pu.id);
        }
    }

    Ok(SegmentHierarchy { session_id: s.id.clone(), thresholds: *t, start, end, aus, kbs, pauses, pus, fixation_parts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::FixationEvent;

    fn ins(times: &[Ms]) -> Vec<KeyEvent> {
        times.iter().map(|&t| KeyEvent::insert(t, 'a')).collect()
    }

    #[test]
    fn runs_split_at_kbi() {
        let runs = build_keystroke_runs(&ins(&[0, 100, 600]), 374.0);
        assert_eq!(runs.iter().map(|r| (r.start, r.end)).collect::<Vec<_>>(), vec![(0, 101), (600, 601)]);
    }

    #[test]
    fn single_key_is_one_millisecond_run() {
        let runs = build_keystroke_runs(&ins(&[42]), 374.0);
        assert_eq!(runs, vec![KeyRun { start: 42, end: 43, first_key: 0, last_key: 0 }]);
    }

    #[test]
    fn target_reading_before_typing() {
        let s = Session::new("r", ins(&[1000]), vec![FixationEvent::new(0, 1000, Window::Target, 0.0, 0.0)]);
        let t = ThresholdSet::fixed(374.0, 891.0);
        let h = segment_with_thresholds(&s, &t, &SegmentOptions::default()).unwrap();
        let types: Vec<_> = h.aus.iter().map(|a| (a.au_type, a.start, a.dur)).collect();
        assert_eq!(types, vec![(AuType::TargetReading, 0, 1000), (AuType::Typing, 1000, 1)]);
        assert_eq!(h.pauses.len(), 1);
        assert_eq!(h.pauses[0].kind, PauseKind::Pub);
        assert_eq!(h.pauses[0].position, PausePosition::Leading);
        assert_eq!(h.pus.len(), 1);
    }

    #[test]
    fn short_leading_gap_is_absorbed_into_first_burst() {
        let s = Session::new("a", ins(&[300, 400]), vec![FixationEvent::new(0, 200, Window::Source, 0.0, 0.0)]);
        let t = ThresholdSet::fixed(374.0, 891.0);
        let h = segment_with_thresholds(&s, &t, &SegmentOptions::default()).unwrap();
        assert_eq!(h.kbs.len(), 1);
        assert!(h.pauses.is_empty());
        assert_eq!(h.kbs[0].au_ids.len(), h.aus.len());
        assert_eq!(h.kbs[0].start, 0);
        assert!(h.aus.iter().any(|a| a.au_type == AuType::SourceReading));
    }

    #[test]
    fn pauses_group_into_production_units() {
        // KB, KBI, KB, PUB, KB
        let s = Session::new("p", ins(&[0, 500, 2000]), vec![]);
        let t = ThresholdSet::fixed(374.0, 891.0);
        let h = segment_with_thresholds(&s, &t, &SegmentOptions::default()).unwrap();
        let kinds: Vec<_> = h.pauses.iter().map(|p| p.kind).collect();
        assert_eq!(kinds, vec![PauseKind::Kbi, PauseKind::Pub]);
        assert_eq!(h.pus.len(), 2);
        assert_eq!(h.pus[0].kb_ids, vec![0, 1]);
        assert_eq!(h.pus[0].internal_kbi_ids, vec![0]);
        assert_eq!(h.pus[1].kb_ids, vec![2]);
    }

    #[test]
    fn single_keystroke_session() {
        let s = Session::new("one", ins(&[7]), vec![]);
        let h = segment_with_thresholds(&s, &ThresholdSet::fixed(300.0, 900.0), &SegmentOptions::default()).unwrap();
        assert_eq!((h.aus.len(), h.kbs.len(), h.pus.len()), (1, 1, 1));
        assert_eq!(h.aus[0].tgnbr, 1);
    }

    #[test]
    fn gaze_stretch_without_fixation_time_becomes_no_data() {
        // Typing covers both fixations' ends; the remaining bridged gap holds no fixation.
        let keys = ins(&[0, 100, 110, 140, 250, 400]);
        let fixes = vec![FixationEvent::new(50, 60, Window::Source, 0.0, 0.0), FixationEvent::new(150, 100, Window::Source, 0.0, 0.0)];
        let s = Session::new("g", keys, fixes);
        let t = ThresholdSet::fixed(105.0, 900.0);
        let h = segment_with_thresholds(&s, &t, &SegmentOptions::default()).unwrap();
        for au in &h.aus {
            match au.au_type {
                AuType::SourceReading | AuType::TypingSourceReading => assert!(au.trt_s > 0),
                AuType::NoData | AuType::Typing => assert_eq!(au.gaze_time(), 0),
                _ => {}
            }
        }
    }

    #[test]
    fn token_completion_counts() {
        let keys: Vec<KeyEvent> = "ab c".chars().enumerate().map(|(i, c)| KeyEvent::insert(i as Ms * 10, c)).collect();
        assert_eq!(token_completions(&keys), vec![false, false, true, true]);
    }
}
