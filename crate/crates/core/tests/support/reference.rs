//! Slow reference segmenter written straight from the rules, one millisecond
//! at a time, plus a random small-session generator. Shared by the core
//! integration tests and the acceptance target.

#![allow(dead_code)]

use btss_core::segmentation::{PauseKind, SegmentHierarchy};
use btss_core::session::{FixationEvent, KeyAction, KeyEvent, Ms, Session, Window};
use rand::Rng;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefAu {
    pub start: Ms,
    pub dur: Ms,
    pub code: u8,
    pub ins: usize,
    pub del: usize,
    pub tgnbr: usize,
    pub fix_s: usize,
    pub trt_s: Ms,
    pub fix_t: usize,
    pub trt_t: Ms,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefHierarchy {
    pub aus: Vec<RefAu>,
    pub kbs: Vec<Vec<usize>>,
    pub pauses: Vec<(Vec<usize>, bool)>,
    pub pus: Vec<Vec<usize>>,
}

impl RefHierarchy {
    /// Projects a fast-path hierarchy onto the same shape for comparison.
    pub fn from_hierarchy(h: &SegmentHierarchy) -> RefHierarchy {
        RefHierarchy {
            aus: h
                .aus
                .iter()
                .map(|a| RefAu {
                    start: a.start,
                    dur: a.dur,
                    code: a.au_type.code(),
                    ins: a.ins,
                    del: a.del,
                    tgnbr: a.tgnbr,
                    fix_s: a.fix_s,
                    trt_s: a.trt_s,
                    fix_t: a.fix_t,
                    trt_t: a.trt_t,
                })
                .collect(),
            kbs: h.kbs.iter().map(|k| k.au_ids.clone()).collect(),
            pauses: h.pauses.iter().map(|p| (p.au_ids.clone(), p.kind == PauseKind::Pub)).collect(),
            pus: h.pus.iter().map(|p| p.kb_ids.clone()).collect(),
        }
    }
}

fn overlap(a0: Ms, a1: Ms, b0: Ms, b1: Ms) -> Ms {
    (a1.min(b1) - a0.max(b0)).max(0)
}

pub fn reference_segment(s: &Session, kbi: f64, pub_ms: f64, gaze_gap: Ms) -> RefHierarchy {
    let keys = &s.keys;
    let fixes = &s.fixes;
    let start = keys.iter().map(|k| k.time).chain(fixes.iter().map(|f| f.start)).min().unwrap();
    let end = keys.iter().map(|k| k.time + 1).chain(fixes.iter().map(|f| f.start + f.dur)).max().unwrap();
    let len = (end - start) as usize;

    // Typing: key i and key j share a run iff every IKI between them is below kbi.
    let mut typing = vec![false; len];
    let mut i = 0;
    while i < keys.len() {
        let mut j = i;
        while j + 1 < keys.len() && ((keys[j + 1].time - keys[j].time) as f64) < kbi {
            j += 1;
        }
        for t in keys[i].time..keys[j].time + 1 {
            typing[(t - start) as usize] = true;
        }
        i = j + 1;
    }

    // Gaze window: covered by a fixation, or inside a short gap between two
    // consecutive fixations on the same window.
    let mut gaze: Vec<Option<Window>> = vec![None; len];
    let mut covered = vec![false; len];
    for (n, f) in fixes.iter().enumerate() {
        for t in f.start..f.start + f.dur {
            gaze[(t - start) as usize] = Some(f.window);
            covered[(t - start) as usize] = true;
        }
        if let Some(next) = fixes.get(n + 1) {
            let gap_start = f.start + f.dur;
            if next.window == f.window && next.start >= gap_start && next.start - gap_start < gaze_gap {
                for t in gap_start..next.start {
                    gaze[(t - start) as usize] = Some(f.window);
                }
            }
        }
    }

    // Maximal constant-state stretches; a gaze stretch without any fixation
    // time loses its gaze.
    let mut code = vec![0u8; len];
    let mut a = 0;
    while a < len {
        let mut b = a;
        while b < len && typing[b] == typing[a] && gaze[b] == gaze[a] {
            b += 1;
        }
        let any_fix = (a..b).any(|t| covered[t]);
        let g = if any_fix { gaze[a] } else { None };
        let c = match (typing[a], g) {
            (true, None) => 4,
            (true, Some(Window::Source)) => 5,
            (true, Some(Window::Target)) => 6,
            (false, None) => 8,
            (false, Some(Window::Source)) => 1,
            (false, Some(Window::Target)) => 2,
        };
        for t in a..b {
            code[t] = c;
        }
        a = b;
    }

    // Token completions.
    let last_insert_before = |i: usize| keys[..i].iter().rev().find(|k| k.action == KeyAction::Insert);
    let completes: Vec<bool> = (0..keys.len())
        .map(|i| {
            let k = &keys[i];
            let delimiter = k.action == KeyAction::Insert
                && !k.is_alnum
                && last_insert_before(i).is_some_and(|p| p.is_alnum);
            let final_open = i + 1 == keys.len() && last_insert_before(keys.len()).is_some_and(|p| p.is_alnum);
            delimiter || final_open
        })
        .collect();

    let mut aus = Vec::new();
    let mut a = 0;
    while a < len {
        let mut b = a;
        while b < len && code[b] == code[a] {
            b += 1;
        }
        let (t0, t1) = (start + a as Ms, start + b as Ms);
        let in_au: Vec<usize> = (0..keys.len()).filter(|&i| keys[i].time >= t0 && keys[i].time < t1).collect();
        let mut au = RefAu {
            start: t0,
            dur: t1 - t0,
            code: code[a],
            ins: in_au.iter().filter(|&&i| keys[i].action == KeyAction::Insert).count(),
            del: in_au.iter().filter(|&&i| keys[i].action == KeyAction::Delete).count(),
            tgnbr: in_au.iter().filter(|&&i| completes[i]).count(),
            fix_s: 0,
            trt_s: 0,
            fix_t: 0,
            trt_t: 0,
        };
        for f in fixes {
            let o = overlap(t0, t1, f.start, f.start + f.dur);
            if o > 0 {
                match f.window {
                    Window::Source => {
                        au.fix_s += 1;
                        au.trt_s += o;
                    }
                    Window::Target => {
                        au.fix_t += 1;
                        au.trt_t += o;
                    }
                }
            }
        }
        aus.push(au);
        a = b;
    }

    // An AU is a pause member iff its maximal non-typing group lasts at least kbi.
    let is_typing = |c: u8| matches!(c, 4 | 5 | 6);
    let mut pause_member = vec![false; aus.len()];
    let mut i = 0;
    while i < aus.len() {
        if is_typing(aus[i].code) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < aus.len() && !is_typing(aus[j].code) {
            j += 1;
        }
        let total: Ms = aus[i..j].iter().map(|a| a.dur).sum();
        if total as f64 >= kbi {
            for m in pause_member.iter_mut().take(j).skip(i) {
                *m = true;
            }
        }
        i = j;
    }

    let mut kbs: Vec<Vec<usize>> = Vec::new();
    let mut pauses: Vec<(Vec<usize>, bool)> = Vec::new();
    let mut order: Vec<(bool, usize)> = Vec::new();
    let mut i = 0;
    while i < aus.len() {
        let mut j = i;
        while j < aus.len() && pause_member[j] == pause_member[i] {
            j += 1;
        }
        let ids: Vec<usize> = (i..j).collect();
        if pause_member[i] {
            let total: Ms = aus[i..j].iter().map(|a| a.dur).sum();
            order.push((true, pauses.len()));
            pauses.push((ids, total as f64 >= pub_ms));
        } else {
            order.push((false, kbs.len()));
            kbs.push(ids);
        }
        i = j;
    }

    // PUs: KB sequences split at PUB pauses and at the leading/trailing pauses.
    let mut pus: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    for (n, &(is_pause, id)) in order.iter().enumerate() {
        if !is_pause {
            current.push(id);
            continue;
        }
        let interior = order[..n].iter().any(|o| !o.0) && order[n + 1..].iter().any(|o| !o.0);
        if pauses[id].1 || !interior {
            if !current.is_empty() {
                pus.push(std::mem::take(&mut current));
            }
        }
    }
    if !current.is_empty() {
        pus.push(current);
    }

    RefHierarchy { aus, kbs, pauses, pus }
}

/// Random valid session with at most 50 events.
pub fn random_session<R: Rng>(rng: &mut R, id: &str) -> Session {
    let glyphs = ['a', 'b', 'é', '7', ' ', '.', ','];
    let n_keys = rng.gen_range(1..=25);
    let mut t: Ms = rng.gen_range(0..800);
    let mut keys = Vec::with_capacity(n_keys);
    for _ in 0..n_keys {
        if rng.gen_bool(0.15) {
            keys.push(KeyEvent::delete(t, 'x'));
        } else {
            keys.push(KeyEvent::insert(t, glyphs[rng.gen_range(0..glyphs.len())]));
        }
        t += match rng.gen_range(0..10) {
            0..=5 => rng.gen_range(1..300),
            6..=8 => rng.gen_range(300..1000),
            _ => rng.gen_range(1000..3000),
        };
    }
    let n_fix = rng.gen_range(0..=25);
    let mut t: Ms = rng.gen_range(0..800);
    let mut fixes = Vec::with_capacity(n_fix);
    for _ in 0..n_fix {
        let dur = rng.gen_range(40..700);
        let window = if rng.gen_bool(0.5) { Window::Source } else { Window::Target };
        fixes.push(FixationEvent::new(t, dur, window, rng.gen_range(0.0..1200.0), rng.gen_range(0.0..600.0)));
        t += dur
            + match rng.gen_range(0..10) {
                0..=2 => rng.gen_range(0..10),
                3..=7 => rng.gen_range(10..150),
                _ => rng.gen_range(150..1500),
            };
    }
    Session::new(id, keys, fixes)
}

/// Random thresholds with pub > kbi.
pub fn random_thresholds<R: Rng>(rng: &mut R) -> (f64, f64) {
    let kbi = rng.gen_range(80.0..700.0f64).round();
    let pub_ms = (kbi * rng.gen_range(1.2..3.5f64)).round();
    (kbi, pub_ms)
}
