//! Progression graph: a time-window view of one session as drawing data,
//! plus a deterministic SVG rendering of it.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::segmentation::{AuType, PauseKind, SegmentHierarchy};
use crate::session::{KeyAction, Ms, Session, Window};
use crate::states::{HofSpan, HofState};

pub fn au_color(t: AuType) -> &'static str {
    match t {
        AuType::SourceReading => "#1f5fd6",
        AuType::TargetReading => "#8fdc8a",
        AuType::Typing => "#f2d729",
        AuType::TypingSourceReading => "#d62728",
        AuType::TypingTargetReading => "#1b7a2e",
        AuType::NoData => "#000000",
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Band {
    pub id: usize,
    pub au_type: AuType,
    pub start: Ms,
    pub end: Ms,
    pub color: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bar {
    pub id: usize,
    pub start: Ms,
    pub end: Ms,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PauseBar {
    pub id: usize,
    pub kind: PauseKind,
    pub start: Ms,
    pub end: Ms,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateBar {
    pub state: HofState,
    pub start: Ms,
    pub end: Ms,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixMark {
    pub start: Ms,
    pub end: Ms,
    pub window: Window,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyMark {
    pub time: Ms,
    pub action: KeyAction,
    pub glyph: String,
    /// Cursor position in the growing target text.
    pub position: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProgressionDoc {
    pub session_id: String,
    pub start: Ms,
    pub end: Ms,
    pub aus: Vec<Band>,
    pub kbs: Vec<Bar>,
    pub pus: Vec<Bar>,
    pub pauses: Vec<PauseBar>,
    pub hof: Vec<StateBar>,
    pub fixations: Vec<FixMark>,
    pub keys: Vec<KeyMark>,
}

impl ProgressionDoc {
    pub fn is_empty(&self) -> bool {
        self.aus.is_empty() && self.keys.is_empty() && self.fixations.is_empty()
    }
}

fn clip(start: Ms, end: Ms, w0: Ms, w1: Ms) -> Option<(Ms, Ms)> {
    let (a, b) = (start.max(w0), end.min(w1));
    (a < b).then_some((a, b))
}

/// Builds the drawing data for `[window.0, window.1)`; an empty window gives an empty document.
pub fn export_progression(s: &Session, h: &SegmentHierarchy, hof: Option<&[HofSpan]>, window: (Ms, Ms)) -> ProgressionDoc {
    let (w0, w1) = window;
    let mut doc = ProgressionDoc { session_id: s.id.clone(), start: w0, end: w1.max(w0), ..Default::default() };
    if w1 <= w0 {
        return doc;
    }
    for au in &h.aus {
        if let Some((a, b)) = clip(au.start, au.end(), w0, w1) {
            doc.aus.push(Band { id: au.id, au_type: au.au_type, start: a, end: b, color: au_color(au.au_type).to_string() });
        }
    }
    for kb in &h.kbs {
        if let Some((a, b)) = clip(kb.start, kb.end(), w0, w1) {
            doc.kbs.push(Bar { id: kb.id, start: a, end: b });
        }
    }
    for pu in &h.pus {
        if let Some((a, b)) = clip(pu.start, pu.end(), w0, w1) {
            doc.pus.push(Bar { id: pu.id, start: a, end: b });
        }
    }
    for p in &h.pauses {
        if let Some((a, b)) = clip(p.start, p.end(), w0, w1) {
            doc.pauses.push(PauseBar { id: p.id, kind: p.kind, start: a, end: b });
        }
    }
    for span in hof.unwrap_or(&[]) {
        if let Some((a, b)) = clip(span.start, span.end(), w0, w1) {
            doc.hof.push(StateBar { state: span.state, start: a, end: b });
        }
    }
    for f in &s.fixes {
        if let Some((a, b)) = clip(f.start, f.end(), w0, w1) {
            doc.fixations.push(FixMark { start: a, end: b, window: f.window });
        }
    }
    let mut len = 0usize;
    for k in &s.keys {
        let position = match k.action {
            KeyAction::Insert => {
                len += 1;
                len - 1
            }
            KeyAction::Delete => {
                len = len.saturating_sub(1);
                len
            }
        };
        if (w0..w1).contains(&k.time) {
            doc.keys.push(KeyMark { time: k.time, action: k.action, glyph: k.glyph.to_string(), position });
        }
    }
    doc
}

fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            ' ' => out.push('_'),
            c if c.is_control() => out.push('\u{00b7}'),
            c => out.push(c),
        }
    }
    out
}

const WIDTH: f64 = 1000.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const PLOT_TOP: f64 = 130.0;
const PLOT_HEIGHT: f64 = 240.0;

fn hof_color(s: HofState) -> &'static str {
    match s {
        HofState::H => "#e377c2",
        HofState::O => "#17becf",
        HofState::F => "#bcbd22",
    }
}

/// Renders a document to SVG. Output depends only on the document.
pub fn render_svg(doc: &ProgressionDoc) -> String {
    let height = PLOT_TOP + PLOT_HEIGHT + 110.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="monospace" font-size="11">"#
    );
    let _ = writeln!(svg, r##"<rect x="0" y="0" width="{WIDTH}" height="{height}" fill="#ffffff"/>"##);
    let span = (doc.end - doc.start).max(1) as f64;
    let x = |t: Ms| LEFT + (t - doc.start) as f64 / span * (WIDTH - LEFT - RIGHT);
    let w = |a: Ms, b: Ms| ((b - a) as f64 / span * (WIDTH - LEFT - RIGHT)).max(0.5);

    let _ = writeln!(svg, r#"<text x="4" y="22">HOF</text><text x="4" y="42">PU</text><text x="4" y="62">KB</text><text x="4" y="82">pause</text><text x="4" y="112">AU</text>"#);
    for b in &doc.hof {
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="12" width="{:.2}" height="14" fill="{}"><title>{} {}-{}</title></rect>"#,
            x(b.start),
            w(b.start, b.end),
            hof_color(b.state),
            b.state.name(),
            b.start,
            b.end
        );
    }
    for b in &doc.pus {
        let _ = writeln!(
            svg,
            r##"<rect x="{:.2}" y="32" width="{:.2}" height="14" fill="#9a9a9a"/><text x="{:.2}" y="43" fill="#ffffff">PU{}</text>"##,
            x(b.start),
            w(b.start, b.end),
            x(b.start) + 2.0,
            b.id + 1
        );
    }
    for b in &doc.kbs {
        let _ = writeln!(
            svg,
            r##"<rect x="{:.2}" y="52" width="{:.2}" height="14" fill="#555555"/><text x="{:.2}" y="63" fill="#ffffff">KB{}</text>"##,
            x(b.start),
            w(b.start, b.end),
            x(b.start) + 2.0,
            b.id + 1
        );
    }
    for p in &doc.pauses {
        let fill = match p.kind {
            PauseKind::Kbi => "#d8d8d8",
            PauseKind::Pub => "#7f7f7f",
        };
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="72" width="{:.2}" height="14" fill="{fill}"/><text x="{:.2}" y="83">{}</text>"#,
            x(p.start),
            w(p.start, p.end),
            x(p.start) + 2.0,
            p.kind
        );
    }
    for b in &doc.aus {
        let _ = writeln!(
            svg,
            r##"<rect x="{:.2}" y="96" width="{:.2}" height="22" fill="{}" stroke="#ffffff" stroke-width="0.5"><title>AU {} type {} {}-{}</title></rect>"##,
            x(b.start),
            w(b.start, b.end),
            b.color,
            b.id,
            b.au_type,
            b.start,
            b.end
        );
    }

    let max_pos = doc.keys.iter().map(|k| k.position).max().unwrap_or(0).max(1) as f64;
    let y = |pos: usize| PLOT_TOP + PLOT_HEIGHT - 10.0 - pos as f64 / max_pos * (PLOT_HEIGHT - 20.0);
    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT}" y="{PLOT_TOP}" width="{:.2}" height="{PLOT_HEIGHT}" fill="none" stroke="#cccccc"/>"##,
        WIDTH - LEFT - RIGHT
    );
    for f in &doc.fixations {
        let (lane, fill) = match f.window {
            Window::Source => (PLOT_TOP + PLOT_HEIGHT + 12.0, "#1f5fd6"),
            Window::Target => (PLOT_TOP + PLOT_HEIGHT + 26.0, "#2ca02c"),
        };
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="{lane:.2}" width="{:.2}" height="10" fill="{fill}" fill-opacity="0.7"/>"#,
            x(f.start),
            w(f.start, f.end)
        );
    }
    for k in &doc.keys {
        let fill = match k.action {
            KeyAction::Insert => "#000000",
            KeyAction::Delete => "#d62728",
        };
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" fill="{fill}" text-anchor="middle">{}</text>"#,
            x(k.time),
            y(k.position),
            escape_xml(&k.glyph)
        );
    }
    let axis_y = PLOT_TOP + PLOT_HEIGHT + 56.0;
    let _ = writeln!(
        svg,
        r#"<text x="4" y="{:.2}">ST</text><text x="4" y="{:.2}">TT</text><text x="{LEFT}" y="{axis_y:.2}">{} ms</text><text x="{:.2}" y="{axis_y:.2}" text-anchor="end">{} ms</text>"#,
        PLOT_TOP + PLOT_HEIGHT + 21.0,
        PLOT_TOP + PLOT_HEIGHT + 35.0,
        doc.start,
        WIDTH - RIGHT,
        doc.end
    );
    let mut lx = LEFT;
    for t in AuType::ALL {
        let _ = writeln!(
            svg,
            r##"<rect x="{lx:.2}" y="{:.2}" width="12" height="12" fill="{}" stroke="#333333" stroke-width="0.5"/><text x="{:.2}" y="{:.2}">{}</text>"##,
            axis_y + 14.0,
            au_color(t),
            lx + 16.0,
            axis_y + 24.0,
            t
        );
        lx += 50.0;
    }
    svg.push_str("</svg>\n");
    svg
}
