//! Session data model and the tab-separated event file format.
//!
//! A session file carries optional `# key: value` metadata lines, a header
//! row and one row per event:
//!
//! ```text
//! # id: s01
//! # translator: t01
//! time  kind  action  glyph  alnum  dur  win  x  y
//! 53843 key   ins     L      1
//! 55139 fix                         21   TT   812.5  140
//! ```
//!
//! Columns are matched by header name. Key rows leave `dur win x y` empty,
//! fixation rows leave `action glyph alnum` empty. Glyphs escape `\\`, tab,
//! newline and carriage return with a backslash. Events are stored sorted;
//! keystrokes precede fixations that start on the same millisecond.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Milliseconds from session start.
pub type Ms = i64;

pub const COLUMNS: [&str; 9] = ["time", "kind", "action", "glyph", "alnum", "dur", "win", "x", "y"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyAction {
    #[serde(rename = "ins")]
    Insert,
    #[serde(rename = "del")]
    Delete,
}

impl KeyAction {
    pub fn tag(self) -> &'static str {
        match self {
            KeyAction::Insert => "ins",
            KeyAction::Delete => "del",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Window {
    #[serde(rename = "ST")]
    Source,
    #[serde(rename = "TT")]
    Target,
}

impl Window {
    pub fn tag(self) -> &'static str {
        match self {
            Window::Source => "ST",
            Window::Target => "TT",
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// A keystroke. Keystrokes are point events lasting exactly 1 ms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyEvent {
    pub time: Ms,
    pub action: KeyAction,
    /// The produced or removed text unit.
    pub glyph: char,
    pub is_alnum: bool,
}

impl KeyEvent {
    pub fn insert(time: Ms, glyph: char) -> Self {
        KeyEvent { time, action: KeyAction::Insert, glyph, is_alnum: glyph.is_alphanumeric() }
    }

    /// A deletion keystroke. Backspace is never alphanumeric, whatever it removes.
    pub fn delete(time: Ms, removed: char) -> Self {
        KeyEvent { time, action: KeyAction::Delete, glyph: removed, is_alnum: false }
    }

    pub fn end(&self) -> Ms {
        self.time + 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixationEvent {
    pub start: Ms,
    pub dur: Ms,
    pub window: Window,
    /// Screen coordinates in px; NaN when the recording has none.
    pub x: f64,
    pub y: f64,
}

impl FixationEvent {
    pub fn new(start: Ms, dur: Ms, window: Window, x: f64, y: f64) -> Self {
        FixationEvent { start, dur, window, x, y }
    }

    pub fn end(&self) -> Ms {
        self.start + self.dur
    }
}

/// Inclusive token index range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSpan {
    pub first: usize,
    pub last: usize,
}

impl TokenSpan {
    fn parse(field: &str) -> Option<TokenSpan> {
        let field = field.trim();
        let (a, b) = match field.split_once('-') {
            Some((a, b)) => (a.trim().parse().ok()?, b.trim().parse().ok()?),
            None => {
                let v = field.parse().ok()?;
                (v, v)
            }
        };
        (a <= b).then_some(TokenSpan { first: a, last: b })
    }
}

impl fmt::Display for TokenSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.first == self.last {
            write!(f, "{}", self.first)
        } else {
            write!(f, "{}-{}", self.first, self.last)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentPair {
    pub st: TokenSpan,
    pub tt: TokenSpan,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub translator: String,
    pub source_lang: String,
    pub target_lang: String,
    pub keys: Vec<KeyEvent>,
    pub fixes: Vec<FixationEvent>,
    pub alignment: Option<Vec<AlignmentPair>>,
}

impl Session {
    pub fn new(id: impl Into<String>, keys: Vec<KeyEvent>, fixes: Vec<FixationEvent>) -> Self {
        Session { id: id.into(), keys, fixes, ..Default::default() }
    }

    /// `[first event time, last event end)`, or `None` for an empty session.
    pub fn span(&self) -> Option<(Ms, Ms)> {
        let starts = self.keys.iter().map(|k| k.time).chain(self.fixes.iter().map(|f| f.start));
        let ends = self.keys.iter().map(KeyEvent::end).chain(self.fixes.iter().map(FixationEvent::end));
        Some((starts.min()?, ends.max()?))
    }

    pub fn insertions(&self) -> usize {
        self.keys.iter().filter(|k| k.action == KeyAction::Insert).count()
    }

    pub fn deletions(&self) -> usize {
        self.keys.len() - self.insertions()
    }

    /// Sorts events into canonical order: keys by time (stable), fixations by start.
    pub fn sort_events(&mut self) {
        self.keys.sort_by_key(|k| k.time);
        self.fixes.sort_by_key(|f| f.start);
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

pub fn parse_session(path: &Path) -> Result<Session> {
    let text = std::fs::read_to_string(path)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("session");
    parse_session_str(&text, stem)
}

/// Parses a session file body. `default_id` is used when no `# id:` line exists.
pub fn parse_session_str(text: &str, default_id: &str) -> Result<Session> {
    let mut session = Session { id: default_id.to_string(), ..Default::default() };
    let mut columns: Option<[usize; 9]> = None;
    let mut fix_lines = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let Some(cols) = columns else {
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((key, value)) = meta.split_once(':') {
                    let value = value.trim().to_string();
                    match key.trim() {
                        "id" => session.id = value,
                        "translator" => session.translator = value,
                        "source_lang" => session.source_lang = value,
                        "target_lang" => session.target_lang = value,
                        other => return Err(parse_err(line_no, format!("unknown metadata key `{other}`"))),
                    }
                }
                continue;
            }
            columns = Some(parse_header(line, line_no)?);
            continue;
        };

        let fields: Vec<&str> = line.split('\t').collect();
        let get = |c: usize| fields.get(cols[c]).copied().unwrap_or("");
        let time: Ms = get(0)
            .trim()
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad time `{}`", get(0))))?;
        match get(1).trim() {
            "key" => {
                for c in 5..9 {
                    if !get(c).trim().is_empty() {
                        return Err(parse_err(line_no, format!("key row has a value in column `{}`", COLUMNS[c])));
                    }
                }
                let action = match get(2).trim() {
                    "ins" => KeyAction::Insert,
                    "del" => KeyAction::Delete,
                    other => return Err(parse_err(line_no, format!("unknown action `{other}`"))),
                };
                let glyph_text = unescape_glyph(get(3)).map_err(|m| parse_err(line_no, m))?;
                let mut chars = glyph_text.chars();
                let glyph = match (chars.next(), chars.next()) {
                    (Some(c), None) => c,
                    (None, _) => return Err(parse_err(line_no, "empty glyph".to_string())),
                    (Some(_), Some(_)) => {
                        return Err(parse_err(line_no, format!("glyph `{glyph_text}` is more than one text unit")))
                    }
                };
                let is_alnum = match get(4).trim() {
                    "1" | "true" => true,
                    "0" | "false" => false,
                    "" => action == KeyAction::Insert && glyph.is_alphanumeric(),
                    other => return Err(parse_err(line_no, format!("bad alnum flag `{other}`"))),
                };
                session.keys.push(KeyEvent { time, action, glyph, is_alnum });
            }
            "fix" => {
                for c in 2..5 {
                    if !get(c).is_empty() {
                        return Err(parse_err(line_no, format!("fix row has a value in column `{}`", COLUMNS[c])));
                    }
                }
                let dur: Ms = get(5)
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("bad duration `{}`", get(5))))?;
                let window = match get(6).trim() {
                    "ST" => Window::Source,
                    "TT" => Window::Target,
                    other => return Err(parse_err(line_no, format!("unknown window `{other}`"))),
                };
                let coord = |c: usize| -> Result<f64> {
                    let v = get(c).trim();
                    if v.is_empty() {
                        Ok(f64::NAN)
                    } else {
                        v.parse().map_err(|_| parse_err(line_no, format!("bad {} coordinate `{v}`", COLUMNS[c])))
                    }
                };
                session.fixes.push(FixationEvent { start: time, dur, window, x: coord(7)?, y: coord(8)? });
                fix_lines.push(line_no);
            }
            other => return Err(parse_err(line_no, format!("unknown kind `{other}`"))),
        }
    }

    if columns.is_none() {
        return Err(parse_err(1, "missing header row".to_string()));
    }
    if session.keys.is_empty() {
        return Err(Error::EmptyKeyStream);
    }
    session.keys.sort_by_key(|k| k.time);
    let mut order: Vec<usize> = (0..session.fixes.len()).collect();
    order.sort_by_key(|&i| (session.fixes[i].start, i));
    for pair in order.windows(2) {
        if session.fixes[pair[0]].start == session.fixes[pair[1]].start {
            let line = fix_lines[pair[0].max(pair[1])];
            return Err(parse_err(line, format!("two fixations start at {}", session.fixes[pair[0]].start)));
        }
    }
    session.fixes = order.into_iter().map(|i| session.fixes[i].clone()).collect();
    Ok(session)
}

fn parse_header(line: &str, line_no: usize) -> Result<[usize; 9]> {
    let names: Vec<&str> = line.split('\t').map(str::trim).collect();
    let mut cols = [0usize; 9];
    for (c, want) in COLUMNS.iter().enumerate() {
        cols[c] = names
            .iter()
            .position(|n| n == want)
            .ok_or_else(|| parse_err(line_no, format!("missing required column `{want}`")))?;
    }
    Ok(cols)
}

fn parse_err(line: usize, message: String) -> Error {
    Error::Parse { line, message }
}

fn unescape_glyph(field: &str) -> std::result::Result<String, String> {
    let mut out = String::new();
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => return Err(format!("bad glyph escape `\\{}`", other.map(String::from).unwrap_or_default())),
        }
    }
    Ok(out)
}

fn escape_glyph(c: char, out: &mut String) {
    match c {
        '\\' => out.push_str("\\\\"),
        '\t' => out.push_str("\\t"),
        '\n' => out.push_str("\\n"),
        '\r' => out.push_str("\\r"),
        c => out.push(c),
    }
}

fn fmt_coord(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// Writes the canonical file form: metadata, header, events merged by time
/// with keystrokes first on ties.
pub fn serialize_session(s: &Session) -> String {
    let mut out = String::new();
    out.push_str(&format!("# id: {}\n", s.id));
    for (key, value) in [("translator", &s.translator), ("source_lang", &s.source_lang), ("target_lang", &s.target_lang)] {
        if !value.is_empty() {
            out.push_str(&format!("# {key}: {value}\n"));
        }
    }
    out.push_str(&COLUMNS.join("\t"));
    out.push('\n');

    let (mut ki, mut fi) = (0, 0);
    while ki < s.keys.len() || fi < s.fixes.len() {
        let take_key = match (s.keys.get(ki), s.fixes.get(fi)) {
            (Some(k), Some(f)) => k.time <= f.start,
            (Some(_), None) => true,
            _ => false,
        };
        if take_key {
            let k = &s.keys[ki];
            out.push_str(&format!("{}\tkey\t{}\t", k.time, k.action.tag()));
            escape_glyph(k.glyph, &mut out);
            out.push_str(if k.is_alnum { "\t1\t\t\t\t\n" } else { "\t0\t\t\t\t\n" });
            ki += 1;
        } else {
            let f = &s.fixes[fi];
            out.push_str(&format!(
                "{}\tfix\t\t\t\t{}\t{}\t{}\t{}\n",
                f.start,
                f.dur,
                f.window.tag(),
                fmt_coord(f.x),
                fmt_coord(f.y)
            ));
            fi += 1;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Alignment files
// ---------------------------------------------------------------------------

pub fn parse_alignment_str(text: &str) -> Result<Vec<AlignmentPair>> {
    let mut pairs = Vec::new();
    let mut header_seen = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            let names: Vec<&str> = line.split('\t').map(str::trim).collect();
            if names != ["st_tokens", "tt_tokens"] {
                return Err(parse_err(idx + 1, "alignment header must be `st_tokens\\ttt_tokens`".into()));
            }
            header_seen = true;
            continue;
        }
        let (st, tt) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(idx + 1, "expected two tab-separated ranges".into()))?;
        let span = |f: &str| TokenSpan::parse(f).ok_or_else(|| parse_err(idx + 1, format!("bad token range `{f}`")));
        pairs.push(AlignmentPair { st: span(st)?, tt: span(tt)? });
    }
    Ok(pairs)
}

pub fn parse_alignment(path: &Path) -> Result<Vec<AlignmentPair>> {
    parse_alignment_str(&std::fs::read_to_string(path)?)
}

pub fn serialize_alignment(pairs: &[AlignmentPair]) -> String {
    let mut out = String::from("st_tokens\ttt_tokens\n");
    for p in pairs {
        out.push_str(&format!("{}\t{}\n", p.st, p.tt));
    }
    out
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Invariant {
    NoKeystrokes,
    NegativeTime,
    UnsortedKeys,
    UnsortedFixations,
    NonPositiveDuration,
    OverlappingFixations,
    NonFiniteCoordinate,
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Invariant::NoKeystrokes => "no-keystrokes",
            Invariant::NegativeTime => "negative-time",
            Invariant::UnsortedKeys => "unsorted-keys",
            Invariant::UnsortedFixations => "unsorted-fixations",
            Invariant::NonPositiveDuration => "non-positive-duration",
            Invariant::OverlappingFixations => "overlapping-fixations",
            Invariant::NonFiniteCoordinate => "non-finite-coordinate",
        };
        f.write_str(name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stream {
    Key,
    Fix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub invariant: Invariant,
    pub stream: Option<Stream>,
    pub index: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.invariant)?;
        if let (Some(stream), Some(index)) = (self.stream, self.index) {
            let s = match stream {
                Stream::Key => "key",
                Stream::Fix => "fix",
            };
            write!(f, " at {s} #{index}")?;
        }
        write!(f, ": {}", self.message)
    }
}

fn diag(invariant: Invariant, stream: Stream, index: usize, message: String) -> Diagnostic {
    Diagnostic { invariant, stream: Some(stream), index: Some(index), message }
}

/// Checks every session invariant. An empty result means the session is valid.
pub fn validate_session(s: &Session) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if s.keys.is_empty() {
        out.push(Diagnostic {
            invariant: Invariant::NoKeystrokes,
            stream: None,
            index: None,
            message: "inter-keystroke intervals need at least one keystroke".into(),
        });
    }
    for (i, k) in s.keys.iter().enumerate() {
        if k.time < 0 {
            out.push(diag(Invariant::NegativeTime, Stream::Key, i, format!("time {}", k.time)));
        }
        if i > 0 && k.time < s.keys[i - 1].time {
            out.push(diag(
                Invariant::UnsortedKeys,
                Stream::Key,
                i,
                format!("time {} after {}", k.time, s.keys[i - 1].time),
            ));
        }
    }
    let mut latest_end: Option<(Ms, usize)> = None;
    for (i, f) in s.fixes.iter().enumerate() {
        if f.start < 0 {
            out.push(diag(Invariant::NegativeTime, Stream::Fix, i, format!("start {}", f.start)));
        }
        if f.dur <= 0 {
            out.push(diag(Invariant::NonPositiveDuration, Stream::Fix, i, format!("duration {}", f.dur)));
        }
        if !f.x.is_finite() || !f.y.is_finite() {
            out.push(diag(Invariant::NonFiniteCoordinate, Stream::Fix, i, format!("({}, {})", f.x, f.y)));
        }
        if i > 0 && f.start < s.fixes[i - 1].start {
            out.push(diag(
                Invariant::UnsortedFixations,
                Stream::Fix,
                i,
                format!("start {} after {}", f.start, s.fixes[i - 1].start),
            ));
        }
        if let Some((end, j)) = latest_end {
            if f.start < end {
                out.push(diag(
                    Invariant::OverlappingFixations,
                    Stream::Fix,
                    i,
                    format!("starts at {} before fixation #{j} ends at {end}", f.start),
                ));
            }
        }
        if latest_end.is_none_or(|(end, _)| f.end() > end) {
            latest_end = Some((f.end(), i));
        }
    }
    out
}

/// Validation restricted to the invariants segmentation depends on.
/// Missing coordinates only affect gaze-pattern classification.
pub(crate) fn structural_diagnostics(s: &Session) -> Vec<Diagnostic> {
    validate_session(s)
        .into_iter()
        .filter(|d| d.invariant != Invariant::NonFiniteCoordinate)
        .collect()
}
