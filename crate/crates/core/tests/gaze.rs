mod support;

use btss_core::gaze::{classify_gaze, label_chain, GazeGeometry, GazePattern, ReadingDirection};
use btss_core::segmentation::{segment_with_thresholds, SegmentOptions};
use btss_core::session::{FixationEvent, KeyEvent, Session, Window};
use btss_core::thresholds::ThresholdSet;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::reference::{random_session, random_thresholds};

fn random_chain(rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let n = rng.gen_range(1..20);
    let mut p = (rng.gen_range(0.0..1000.0), rng.gen_range(0.0..600.0));
    let mut out = vec![p];
    for _ in 1..n {
        // mix of reading steps, small jitters and jumps
        p = match rng.gen_range(0..3) {
            0 => (p.0 + rng.gen_range(-20.0..120.0), p.1 + rng.gen_range(-10.0..10.0)),
            1 => (p.0 + rng.gen_range(-40.0..40.0), p.1 + rng.gen_range(-40.0..40.0)),
            _ => (rng.gen_range(0.0..1000.0), rng.gen_range(0.0..600.0)),
        };
        out.push(p);
    }
    out
}

#[test]
fn labels_survive_translation_of_a_thousand_chains() {
    let g = GazeGeometry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..1000 {
        let chain = random_chain(&mut rng);
        let (tx, ty) = (rng.gen_range(-5000.0..5000.0), rng.gen_range(-5000.0..5000.0));
        // shift by whole numbers so the coordinates stay exactly representable
        let (tx, ty) = (f64::round(tx), f64::round(ty));
        let moved: Vec<(f64, f64)> = chain.iter().map(|&(x, y)| (x + tx, y + ty)).collect();
        assert_eq!(label_chain(&chain, &g), label_chain(&moved, &g));
    }
}

#[test]
fn mirrored_chain_under_rtl_matches_ltr() {
    let ltr = GazeGeometry::default();
    let rtl = GazeGeometry { direction: ReadingDirection::RightToLeft, ..ltr };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let chain = random_chain(&mut rng);
        let mirrored: Vec<(f64, f64)> = chain.iter().map(|&(x, y)| (-x, y)).collect();
        assert_eq!(label_chain(&chain, &ltr), label_chain(&mirrored, &rtl));
    }
}

#[test]
fn one_label_per_fixation() {
    let g = GazeGeometry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let chain = random_chain(&mut rng);
        assert_eq!(label_chain(&chain, &g).len(), chain.len());
    }
    assert!(label_chain(&[], &g).is_empty());
}

#[test]
fn missing_coordinates_fall_back_to_scattered() {
    let keys = vec![KeyEvent::insert(0, 'a'), KeyEvent::insert(100, 'b')];
    let fixes = vec![
        FixationEvent::new(10, 40, Window::Source, 100.0, 100.0),
        FixationEvent::new(60, 30, Window::Source, f64::NAN, 100.0),
    ];
    let s = Session::new("nan", keys, fixes);
    let h = segment_with_thresholds(&s, &ThresholdSet::fixed(300.0, 900.0), &SegmentOptions::default()).unwrap();
    let gz = classify_gaze(&s, &h, &GazeGeometry::default());
    assert_eq!(gz.diagnostics.len(), 1);
    let total: i64 = gz.per_au.iter().map(|d| d.scattered).sum();
    assert_eq!(total, 70);
    assert!(gz.runs.iter().all(|r| r.pattern == GazePattern::Scattered));
}

#[test]
fn chain_breaks_on_window_change() {
    // ST then TT with a small spatial step: the TT fixation starts its own chain
    let keys = vec![KeyEvent::insert(0, 'a'), KeyEvent::insert(200, 'b')];
    let fixes = vec![
        FixationEvent::new(10, 50, Window::Source, 100.0, 100.0),
        FixationEvent::new(70, 50, Window::Target, 180.0, 100.0),
    ];
    let s = Session::new("win", keys, fixes);
    let h = segment_with_thresholds(&s, &ThresholdSet::fixed(300.0, 900.0), &SegmentOptions::default()).unwrap();
    let gz = classify_gaze(&s, &h, &GazeGeometry::default());
    assert_eq!(gz.runs.len(), 2);
    assert!(gz.runs.iter().all(|r| r.n_fix == 1 && r.pattern == GazePattern::Refix));
}

fn check_partition(s: &Session, kbi: f64, pub_ms: f64) -> Result<(), TestCaseError> {
    let h = segment_with_thresholds(s, &ThresholdSet::fixed(kbi, pub_ms), &SegmentOptions::default()).unwrap();
    let gz = classify_gaze(s, &h, &GazeGeometry::default());
    prop_assert_eq!(gz.per_au.len(), h.aus.len());
    for (au, d) in h.aus.iter().zip(&gz.per_au) {
        prop_assert_eq!(d.linear + d.refix + d.scattered, au.trt_s + au.trt_t);
        prop_assert!(gz.linear_source[au.id] <= d.linear);
    }
    let run_total: i64 = gz.runs.iter().map(|r| r.dur).sum();
    let au_total: i64 = h.aus.iter().map(|a| a.trt_s + a.trt_t).sum();
    prop_assert_eq!(run_total, au_total);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn pattern_durations_partition_au_gaze(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_session(&mut rng, "p");
        let (kbi, pub_ms) = random_thresholds(&mut rng);
        check_partition(&s, kbi, pub_ms)?;
    }

    #[test]
    fn session_translation_keeps_durations(seed in any::<u64>(), tx in -3000i32..3000, ty in -3000i32..3000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_session(&mut rng, "t");
        let mut moved = s.clone();
        for f in &mut moved.fixes {
            f.x += tx as f64;
            f.y += ty as f64;
        }
        let t = ThresholdSet::fixed(300.0, 900.0);
        let h = segment_with_thresholds(&s, &t, &SegmentOptions::default()).unwrap();
        let g = GazeGeometry::default();
        prop_assert_eq!(classify_gaze(&s, &h, &g).per_au, classify_gaze(&moved, &h, &g).per_au);
    }
}
