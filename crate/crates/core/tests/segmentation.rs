mod support;

use btss_core::segmentation::{
    build_keystroke_runs, segment, segment_with_thresholds, AuType, PauseKind, PausePosition, SegmentHierarchy,
    SegmentOptions,
};
use btss_core::session::{parse_session, parse_session_str, serialize_session, FixationEvent, KeyEvent, Ms, Session, Window};
use btss_core::thresholds::ThresholdSet;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::reference::{random_session, random_thresholds, reference_segment, RefHierarchy};

fn worked() -> Session {
    parse_session(std::path::Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/worked_example.tsv"))).unwrap()
}

fn worked_hierarchy() -> SegmentHierarchy {
    segment_with_thresholds(&worked(), &ThresholdSet::fixed(374.0, 891.0), &SegmentOptions::default()).unwrap()
}

#[test]
fn worked_example_structure() {
    let h = worked_hierarchy();
    let codes: Vec<u8> = h.aus.iter().map(|a| a.au_type.code()).collect();
    assert_eq!(codes, vec![4, 6, 2, 8, 4, 8, 2, 6, 2, 6, 2, 6, 5]);
    assert_eq!(h.aus.len(), 13);
    assert_eq!(h.kbs.len(), 5);
    assert_eq!(h.pus.len(), 3);

    assert_eq!(h.aus[0].dur, 1296);
    assert_eq!(h.aus[1].dur, 204);
    assert_eq!(h.pus[0].dur, 1500);
    assert_eq!(h.aus[3].dur, 862);
    assert_eq!(h.aus[3].au_type, AuType::NoData);
    assert_eq!(h.aus[5].dur, 217);

    let pauses: Vec<(PauseKind, Ms, usize)> = h.pauses.iter().map(|p| (p.kind, p.dur, p.au_ids.len())).collect();
    assert_eq!(
        pauses,
        vec![(PauseKind::Pub, 1219, 2), (PauseKind::Pub, 1062, 2), (PauseKind::Kbi, 811, 1), (PauseKind::Kbi, 453, 1)]
    );
    assert_eq!(h.pus[2].kb_ids.len(), 3);
    assert_eq!(h.aus[7].edit, "[o]");
    assert_eq!(h.aus[0].edit, "La soci");

    let trt_t: Vec<Ms> = h.aus.iter().map(|a| a.trt_t).collect();
    assert_eq!(trt_t, vec![0, 116, 334, 0, 0, 0, 796, 1, 786, 188, 453, 73, 0]);
    let ins: Vec<usize> = h.aus.iter().map(|a| a.ins).collect();
    assert_eq!(ins, vec![7, 2, 0, 0, 1, 0, 0, 0, 0, 2, 0, 1, 5]);
    assert_eq!((h.aus[12].fix_s, h.aus[12].dur), (5, 677));
}

#[test]
fn worked_example_fixation_split() {
    let h = worked_hierarchy();
    let long = h.fixation_parts.iter().filter(|p| p.fixation == worked().fixes.iter().position(|f| f.dur == 1500).unwrap());
    let parts: Vec<Ms> = long.map(|p| p.dur).collect();
    assert_eq!(parts, vec![786, 188, 453, 73]);
    assert_eq!(parts.iter().sum::<Ms>(), 1500);
}

#[test]
fn worked_example_round_trips_through_the_file_format() {
    let s = worked();
    let again = parse_session_str(&serialize_session(&s), "x").unwrap();
    assert_eq!(s, again);
    let opts = SegmentOptions::default();
    let t = ThresholdSet::fixed(374.0, 891.0);
    assert_eq!(segment_with_thresholds(&s, &t, &opts).unwrap(), segment_with_thresholds(&again, &t, &opts).unwrap());
}

#[test]
fn keystrokes_only_session_has_typing_and_no_data_units() {
    let keys: Vec<KeyEvent> = "ab cd  ef".chars().enumerate().map(|(i, c)| KeyEvent::insert(i as Ms * 250, c)).collect();
    let h = segment(&Session::new("k", keys, vec![]), &SegmentOptions::default()).unwrap();
    assert!(h.aus.iter().all(|a| matches!(a.au_type, AuType::Typing | AuType::NoData)));
}

#[test]
fn gaze_between_close_keys_stays_in_one_burst() {
    let keys = vec![KeyEvent::insert(0, 'a'), KeyEvent::insert(201, 'b')];
    let fixes = vec![FixationEvent::new(1, 200, Window::Target, 0.0, 0.0)];
    let h = segment_with_thresholds(&Session::new("g", keys, fixes), &ThresholdSet::fixed(374.0, 891.0), &SegmentOptions::default())
        .unwrap();
    assert_eq!(h.kbs.len(), 1);
    assert!(h.pauses.is_empty());
}

#[test]
fn trailing_pause_belongs_to_no_production_unit() {
    let keys = vec![KeyEvent::insert(0, 'a'), KeyEvent::insert(100, ' ')];
    let fixes = vec![FixationEvent::new(500, 2000, Window::Source, 0.0, 0.0)];
    let h = segment_with_thresholds(&Session::new("t", keys, fixes), &ThresholdSet::fixed(374.0, 891.0), &SegmentOptions::default())
        .unwrap();
    assert_eq!(h.pauses.last().unwrap().position, PausePosition::Trailing);
    assert!(h.aus.last().unwrap().pu_id.is_none());
    assert_eq!(h.pus.len(), 1);
}

fn check_invariants(s: &Session, h: &SegmentHierarchy) {
    let (start, end) = s.span().unwrap();
    // tiling
    assert_eq!(h.aus.first().unwrap().start, start);
    assert_eq!(h.aus.last().unwrap().end(), end);
    for w in h.aus.windows(2) {
        assert_eq!(w[0].end(), w[1].start);
        assert_ne!(w[0].au_type, w[1].au_type);
    }
    assert_eq!(h.aus.iter().map(|a| a.dur).sum::<Ms>(), end - start);
    // conservation
    let gaze: Ms = h.aus.iter().map(|a| a.gaze_time()).sum();
    let fix_total: Ms = s.fixes.iter().map(|f| f.end().min(end) - f.start.max(start)).sum();
    assert_eq!(gaze, fix_total);
    assert_eq!(h.aus.iter().map(|a| a.ins).sum::<usize>(), s.insertions());
    assert_eq!(h.aus.iter().map(|a| a.del).sum::<usize>(), s.deletions());
    // per-type content
    for a in &h.aus {
        assert!(a.gaze_time() <= a.dur);
        match a.au_type.code() {
            1 => assert!(a.trt_t == 0 && a.trt_s > 0 && a.keystrokes() == 0),
            2 => assert!(a.trt_s == 0 && a.trt_t > 0 && a.keystrokes() == 0),
            8 => assert!(a.gaze_time() == 0 && a.keystrokes() == 0),
            // a gaze change inside a key run can leave a typing slice with no keystroke
            4 => assert!(a.gaze_time() == 0),
            5 => assert!(a.trt_s > 0 && a.trt_t == 0),
            6 => assert!(a.trt_t > 0 && a.trt_s == 0),
            _ => unreachable!(),
        }
    }
    // membership: exactly one KB or pause per AU
    for a in &h.aus {
        assert!(a.kb_id.is_some() ^ a.pause_id.is_some());
    }
    for p in &h.pauses {
        assert_eq!(p.kind == PauseKind::Pub, p.dur as f64 >= h.thresholds.pub_ms);
        assert!(p.dur as f64 >= h.thresholds.kbi_ms);
        assert!(p.au_ids.iter().all(|&i| !h.aus[i].au_type.is_typing()));
    }
    for kb in &h.kbs {
        assert!(kb.ins + kb.del >= 1);
    }
    // monotone ids
    for w in h.kbs.windows(2) {
        assert!(w[0].start < w[1].start);
    }
    for w in h.pus.windows(2) {
        assert!(w[0].start < w[1].start);
        let between: Vec<_> = h.pauses.iter().filter(|p| p.start >= w[0].end() && p.end() <= w[1].start).collect();
        assert_eq!(between.len(), 1);
        assert_eq!(between[0].kind, PauseKind::Pub);
    }
    for pu in &h.pus {
        for &p in &pu.internal_kbi_ids {
            assert_eq!(h.pauses[p].kind, PauseKind::Kbi);
        }
    }
}

#[test]
fn random_sessions_match_reference_segmenter() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 0..300 {
        let s = random_session(&mut rng, &format!("r{n}"));
        let (kbi, pub_ms) = random_thresholds(&mut rng);
        let gap = if rng.gen_bool(0.7) { 100 } else { rng.gen_range(0..200) };
        let opts = SegmentOptions { gaze_gap_ms: gap, ..Default::default() };
        let h = segment_with_thresholds(&s, &ThresholdSet::fixed(kbi, pub_ms), &opts).unwrap();
        let expected = reference_segment(&s, kbi, pub_ms, gap);
        assert_eq!(RefHierarchy::from_hierarchy(&h), expected, "session {n}: {s:?}");
        check_invariants(&s, &h);
    }
}

#[test]
fn worked_example_satisfies_invariants() {
    check_invariants(&worked(), &worked_hierarchy());
}

fn brute_force_runs(times: &[Ms], kbi: f64) -> Vec<(Ms, Ms)> {
    let mut out = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        let starts_run = i == 0 || ((t - times[i - 1]) as f64) >= kbi;
        if starts_run {
            let mut j = i;
            while j + 1 < times.len() && ((times[j + 1] - times[j]) as f64) < kbi {
                j += 1;
            }
            out.push((t, times[j] + 1));
        }
    }
    out
}

proptest! {
    #[test]
    fn runs_match_brute_force(gaps in prop::collection::vec(1i64..1200, 0..40), kbi in 50.0f64..800.0) {
        let mut times = vec![0];
        for g in gaps {
            times.push(times.last().unwrap() + g);
        }
        let keys: Vec<KeyEvent> = times.iter().map(|&t| KeyEvent::insert(t, 'a')).collect();
        let runs: Vec<(Ms, Ms)> = build_keystroke_runs(&keys, kbi).iter().map(|r| (r.start, r.end)).collect();
        prop_assert_eq!(runs, brute_force_runs(&times, kbi));
    }

    #[test]
    fn segmentation_is_deterministic_and_stable_under_reparse(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_session(&mut rng, "p");
        let t = ThresholdSet::fixed(300.0, 800.0);
        let opts = SegmentOptions::default();
        let a = segment_with_thresholds(&s, &t, &opts).unwrap();
        let reparsed = parse_session_str(&serialize_session(&s), "p").unwrap();
        prop_assert_eq!(&a, &segment_with_thresholds(&reparsed, &t, &opts).unwrap());
    }
}
